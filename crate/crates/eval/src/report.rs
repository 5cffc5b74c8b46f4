use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::TimingReport;
use crate::error::{EvalError, Result};
use crate::metrics::{Comparison, EvalReport};

pub const EVAL_JSON: &str = "eval.json";
pub const ERRORS_CSV: &str = "errors.csv";

/// Contents of `eval.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub framework: EvalReport,
    pub baseline: Option<EvalReport>,
    pub comparison: Option<Comparison>,
    pub timing: Option<TimingReport>,
}

impl EvalOutput {
    fn reports(&self) -> impl Iterator<Item = &EvalReport> {
        std::iter::once(&self.framework).chain(self.baseline.as_ref())
    }
}

/// `t,e_u,e_v,e_sxz,e_syz,method`, one row per timestep and method. An
/// undefined error is left empty.
pub fn errors_csv<'a>(reports: impl IntoIterator<Item = &'a EvalReport>) -> String {
    let mut s = String::from("t,e_u,e_v,e_sxz,e_syz,method\n");
    for rep in reports {
        for row in &rep.rows {
            write!(s, "{}", row.t).unwrap();
            for e in row.e {
                match e {
                    Some(x) => write!(s, ",{x}").unwrap(),
                    None => s.push(','),
                }
            }
            writeln!(s, ",{}", rep.method).unwrap();
        }
    }
    s
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| EvalError::Io { path: path.into(), source })
}

/// Writes `eval.json` and `errors.csv` into `dir`.
pub fn write_outputs(out: &EvalOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| EvalError::Io { path: dir.into(), source })?;
    let json = serde_json::to_string_pretty(out).expect("report serializes");
    write(&dir.join(EVAL_JSON), &(json + "\n"))?;
    write(&dir.join(ERRORS_CSV), &errors_csv(out.reports()))
}
