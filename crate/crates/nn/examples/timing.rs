//! Rough forward/backward timing of the default networks.
use ndarray::Array3;
use pdeup_nn::{Rdn, RdnConfig};
use std::time::Instant;

fn main() {
    for (name, m, n) in [
        ("spatial", Rdn::spatial(&RdnConfig::default(), 0).unwrap(), 32),
        ("temporal", Rdn::temporal(&RdnConfig::temporal(2), 2, 0).unwrap(), 64),
    ] {
        let x = Array3::from_elem((2, n, n), 0.3);
        let t = Instant::now();
        let (y, tr) = m.forward_traced(x.view()).unwrap();
        let f = t.elapsed();
        let mut g = vec![0.0; m.n_params()];
        let t = Instant::now();
        m.backward(&tr, y.view(), &mut g).unwrap();
        println!("{name}: forward {:?} backward {:?}", f, t.elapsed());
    }
}
