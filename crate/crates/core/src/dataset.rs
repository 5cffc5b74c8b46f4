//! Coarse (network input) and fine (evaluation reference) dataset generation.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::FieldError;
use crate::grid::{make_grid, Rect};
use crate::interp::bilinear_interpolate;
use crate::io::write_series;
use crate::solver::{solve, SolveError, SolverConfig};
use crate::state::{SnapshotSeries, StateSnapshot};

pub const LR_FILE: &str = "lr.fld";
pub const HR_FILE: &str = "hr.fld";
pub const MANIFEST_FILE: &str = "dataset.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Nodes per side of the coarse solve.
    pub coarse_solve_n: usize,
    /// Nodes per side of the interpolated network input.
    pub input_grid_n: usize,
    /// Nodes per side of the fine reference solve and of the network output.
    pub fine_grid_n: usize,
    pub dt_coarse: f64,
    /// Temporal upscaling factor `Δt_c / Δt_f`.
    pub k: usize,
    pub n_steps: usize,
    /// Spatial upscaling factor `Δx_c / Δx_f` as quoted for the original
    /// unstructured coarse mesh. Recorded only.
    pub s_reported: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            coarse_solve_n: 9,
            input_grid_n: 32,
            fine_grid_n: 64,
            dt_coarse: 0.005,
            k: 2,
            n_steps: 48,
            s_reported: 11.0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if self.k < 2 {
            return Err(SolveError::Config(format!("k = {} must be >= 2", self.k)));
        }
        if self.n_steps == 0 {
            return Err(SolveError::Config("n_steps must be >= 1".into()));
        }
        if !(self.dt_coarse > 0.0 && self.dt_coarse.is_finite()) {
            return Err(SolveError::Config(format!(
                "dt_coarse = {} must be positive",
                self.dt_coarse
            )));
        }
        if self.coarse_solve_n < 5 || self.input_grid_n < 3 || self.fine_grid_n < 5 {
            return Err(SolveError::Config(
                "coarse_solve_n and fine_grid_n must be >= 5, input_grid_n >= 3".into(),
            ));
        }
        if !self.fine_grid_n.is_multiple_of(self.input_grid_n) {
            return Err(SolveError::Config(format!(
                "fine_grid_n = {} is not an integer multiple of input_grid_n = {}",
                self.fine_grid_n, self.input_grid_n
            )));
        }
        Ok(())
    }

    /// Image upsampling ratio of the spatial network.
    pub fn upsample_ratio(&self) -> usize {
        self.fine_grid_n / self.input_grid_n
    }

    pub fn dt_fine(&self) -> f64 {
        self.dt_coarse / self.k as f64
    }

    pub fn coarse_solver(&self) -> SolverConfig {
        SolverConfig::new(self.coarse_solve_n, self.dt_coarse, self.n_steps)
    }

    pub fn fine_solver(&self) -> SolverConfig {
        SolverConfig::new(self.fine_grid_n, self.dt_fine(), self.n_steps * self.k)
    }
}

/// Runs the coarse solve and interpolates every snapshot onto the input grid.
pub fn coarse_input_series(cfg: &DatasetConfig) -> Result<SnapshotSeries, SolveError> {
    let coarse = solve(&cfg.coarse_solver())?;
    interpolate_series(&coarse, cfg.input_grid_n)
}

pub fn interpolate_series(src: &SnapshotSeries, n: usize) -> Result<SnapshotSeries, SolveError> {
    let dst = make_grid(n, Rect::UNIT)?;
    let snaps = src
        .snapshots()
        .iter()
        .map(|s| {
            let fields = s
                .fields()
                .iter()
                .map(|f| bilinear_interpolate(f.view(), src.grid(), &dst))
                .collect::<Result<Vec<_>, FieldError>>()?;
            let fields: [_; 4] = fields.try_into().expect("four fields");
            Ok(StateSnapshot::new(s.t, fields)?)
        })
        .collect::<Result<Vec<_>, SolveError>>()?;
    Ok(SnapshotSeries::new(dst, src.dt(), snaps)?)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetManifest {
    #[serde(flatten)]
    pub config: DatasetConfig,
    pub dt_fine: f64,
    pub upsample_ratio: usize,
    pub coarse_solver: String,
    pub coarse_solve_seconds: f64,
    pub fine_solve_seconds: f64,
    pub lr_file: String,
    pub hr_file: String,
    pub lr_sha256: String,
    pub hr_sha256: String,
}

#[derive(Clone, Debug)]
pub struct DatasetPaths {
    pub lr: PathBuf,
    pub hr: PathBuf,
    pub manifest: PathBuf,
}

pub fn sha256_file(path: &Path) -> Result<String, FieldError> {
    let bytes = fs::read(path).map_err(|e| FieldError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writes `lr.fld`, `hr.fld` and `dataset.json` into `out_dir`.
pub fn generate_dataset(cfg: &DatasetConfig, out_dir: &Path) -> Result<DatasetPaths, SolveError> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| FieldError::io(out_dir, e))?;

    let start = Instant::now();
    let coarse = solve(&cfg.coarse_solver())?;
    let coarse_secs = start.elapsed().as_secs_f64();
    let lr = interpolate_series(&coarse, cfg.input_grid_n)?;

    let start = Instant::now();
    let hr = solve(&cfg.fine_solver())?;
    let fine_secs = start.elapsed().as_secs_f64();

    let paths = DatasetPaths {
        lr: out_dir.join(LR_FILE),
        hr: out_dir.join(HR_FILE),
        manifest: out_dir.join(MANIFEST_FILE),
    };
    write_series(&lr, &paths.lr)?;
    write_series(&hr, &paths.hr)?;

    let manifest = DatasetManifest {
        config: cfg.clone(),
        dt_fine: cfg.dt_fine(),
        upsample_ratio: cfg.upsample_ratio(),
        coarse_solver: format!(
            "structured Crank-Nicolson, 5-point Laplacian, {n}x{n} nodes, bilinear to {m}x{m}",
            n = cfg.coarse_solve_n,
            m = cfg.input_grid_n
        ),
        coarse_solve_seconds: coarse_secs,
        fine_solve_seconds: fine_secs,
        lr_file: LR_FILE.into(),
        hr_file: HR_FILE.into(),
        lr_sha256: sha256_file(&paths.lr)?,
        hr_sha256: sha256_file(&paths.hr)?,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(&paths.manifest, json).map_err(|e| FieldError::io(&paths.manifest, e))?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fine_dt_and_ratio() {
        let cfg = DatasetConfig::default();
        assert_eq!(cfg.dt_fine(), 0.0025);
        assert_eq!(cfg.upsample_ratio(), 2);
        let k3 = DatasetConfig { k: 3, ..cfg };
        assert_eq!(k3.dt_fine(), 0.005 / 3.0);
    }

    #[test]
    fn validation() {
        let bad = DatasetConfig {
            fine_grid_n: 60,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = DatasetConfig {
            k: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn missing_key_is_named() {
        let mut v = serde_json::to_value(DatasetConfig::default()).unwrap();
        v.as_object_mut().unwrap().remove("dt_coarse");
        let err = serde_json::from_value::<DatasetConfig>(v).unwrap_err();
        assert!(err.to_string().contains("dt_coarse"), "{err}");
    }
}
