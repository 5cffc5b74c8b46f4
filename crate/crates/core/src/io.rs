//! `FLD1` field-series files.
//!
//! A newline-terminated text header
//!
//! ```text
//! FLD1
//! dtype=f64
//! order=row-major
//! shape=T,C,H,W
//! vars=u,v,sigma_xz,sigma_yz
//! t0=<float>
//! dt=<float>
//! domain=x0,y0,x1,y1
//! end
//! ```
//!
//! is followed by `T·C·H·W` little-endian `f64` values in `(T, C, H, W)` order,
//! `C` indexing the `vars` list.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{FieldError, Result};
use crate::grid::{Grid2D, Rect};
use crate::state::{SnapshotSeries, StateSnapshot, Variable, NUM_VARIABLES};

pub const MAGIC: &str = "FLD1";

pub fn write_series(series: &SnapshotSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| FieldError::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode_series(series, &mut w).map_err(|e| FieldError::io(path, e))?;
    w.flush().map_err(|e| FieldError::io(path, e))
}

pub fn encode_series(series: &SnapshotSeries, w: &mut impl Write) -> std::io::Result<()> {
    let (h, wd) = series.grid().shape();
    let d = series.grid().domain();
    let vars: Vec<&str> = Variable::ALL.iter().map(|v| v.name()).collect();
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "dtype=f64")?;
    writeln!(w, "order=row-major")?;
    writeln!(w, "shape={},{},{},{}", series.len(), NUM_VARIABLES, h, wd)?;
    writeln!(w, "vars={}", vars.join(","))?;
    writeln!(w, "t0={:?}", series.t0())?;
    writeln!(w, "dt={:?}", series.dt())?;
    writeln!(w, "domain={:?},{:?},{:?},{:?}", d.x0, d.y0, d.x1, d.y1)?;
    writeln!(w, "end")?;
    for snap in series.snapshots() {
        for field in snap.fields() {
            for v in field.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_series(path: impl AsRef<Path>) -> Result<SnapshotSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| FieldError::io(path, e))?;
    decode_series(BufReader::new(file))
}

fn header_value<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| FieldError::format(key, format!("expected `{key}=...`, found `{line}`")))
}

fn parse_f64(s: &str, key: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| FieldError::format(key, format!("`{s}`: {e}")))
}

pub fn decode_series(mut r: impl BufRead) -> Result<SnapshotSeries> {
    let mut next_line = |what: &str| -> Result<String> {
        let mut line = String::new();
        let n = r
            .read_line(&mut line)
            .map_err(|e| FieldError::format(what, e.to_string()))?;
        if n == 0 || !line.ends_with('\n') {
            return Err(FieldError::format(what, "header ended early"));
        }
        line.pop();
        Ok(line)
    };

    if next_line("magic")? != MAGIC {
        return Err(FieldError::format("magic", "not an FLD1 file"));
    }
    let dtype = next_line("dtype")?;
    if header_value(&dtype, "dtype")? != "f64" {
        return Err(FieldError::format("dtype", format!("unsupported `{dtype}`")));
    }
    let order = next_line("order")?;
    if header_value(&order, "order")? != "row-major" {
        return Err(FieldError::format("order", format!("unsupported `{order}`")));
    }

    let shape_line = next_line("shape")?;
    let shape: Vec<usize> = header_value(&shape_line, "shape")?
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| FieldError::format("shape", e.to_string()))?;
    let [t, c, h, w] = shape[..] else {
        return Err(FieldError::format("shape", "expected four dimensions T,C,H,W"));
    };

    let vars_line = next_line("vars")?;
    let vars: Vec<Variable> = header_value(&vars_line, "vars")?
        .split(',')
        .map(str::parse)
        .collect::<Result<_>>()?;
    if vars.len() != c {
        return Err(FieldError::format(
            "vars",
            format!("{} names listed but C = {c}", vars.len()),
        ));
    }
    let mut seen = [false; NUM_VARIABLES];
    for v in &vars {
        if std::mem::replace(&mut seen[v.index()], true) {
            return Err(FieldError::format("vars", format!("duplicate `{v}`")));
        }
    }
    if c != NUM_VARIABLES {
        return Err(FieldError::format(
            "vars",
            format!("expected all {NUM_VARIABLES} state variables"),
        ));
    }

    let t0_line = next_line("t0")?;
    let t0 = parse_f64(header_value(&t0_line, "t0")?, "t0")?;
    let dt_line = next_line("dt")?;
    let dt = parse_f64(header_value(&dt_line, "dt")?, "dt")?;
    let domain_line = next_line("domain")?;
    let coords: Vec<f64> = header_value(&domain_line, "domain")?
        .split(',')
        .map(|s| parse_f64(s, "domain"))
        .collect::<Result<_>>()?;
    let [x0, y0, x1, y1] = coords[..] else {
        return Err(FieldError::format("domain", "expected x0,y0,x1,y1"));
    };
    if next_line("end")? != "end" {
        return Err(FieldError::format("end", "missing header terminator"));
    }

    let grid = Grid2D::new(w, h, Rect { x0, y0, x1, y1 })
        .map_err(|e| FieldError::format("shape", e.to_string()))?;
    if t == 0 {
        return Err(FieldError::format("shape", "T = 0: empty series"));
    }

    let expected = t * c * h * w * 8;
    let mut payload = Vec::with_capacity(expected);
    r.read_to_end(&mut payload)
        .map_err(|e| FieldError::format("payload", e.to_string()))?;
    if payload.len() != expected {
        return Err(FieldError::format(
            "payload",
            format!(
                "{} bytes for shape {t}×{c}×{h}×{w}, expected {expected} ({})",
                payload.len(),
                if payload.len() < expected {
                    "truncated"
                } else {
                    "trailing data"
                }
            ),
        ));
    }

    let mut values = payload
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")));
    let mut snapshots = Vec::with_capacity(t);
    for step in 0..t {
        let mut fields: [Option<Array2<f64>>; NUM_VARIABLES] = Default::default();
        for var in &vars {
            let data: Vec<f64> = values.by_ref().take(h * w).collect();
            let arr = Array2::from_shape_vec((h, w), data).expect("payload length checked");
            fields[var.index()] = Some(arr);
        }
        let fields = fields.map(|f| f.expect("all variables present"));
        let snap = StateSnapshot::new(t0 + step as f64 * dt, fields).map_err(|e| {
            FieldError::format("payload", format!("snapshot {step}: {e}"))
        })?;
        snapshots.push(snap);
    }
    SnapshotSeries::new(grid, dt, snapshots)
}
