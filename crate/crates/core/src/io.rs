//! Run configuration, field snapshots, CSV tables and run manifests.
//!
//! Snapshot layout (little endian):
//!
//! ```text
//! magic   8 bytes  "DLSNAP01"
//! n       u32      spatial dimension
//! N       u32      spinor components
//! L       f64      box length
//! m       u32      points per axis
//! data    m^n * N * 2 f64, point-major: for each grid point (row-major,
//!         last axis fastest) the N components as (re, im) pairs
//! ```

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::grid::{BoxGrid, SpinorField};
use crate::solver::SolverConfig;
use crate::spectral::{GreenMode, KernelQuadrature};

const MAGIC: &[u8; 8] = b"DLSNAP01";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub length: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn build(&self, n: usize) -> Result<BoxGrid> {
        BoxGrid::new(n, self.length, self.points)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    /// λ values as fractions of the first positive eigenvalue `2π/L`.
    pub lambda_fractions: Vec<f64>,
    /// Absolute λ values; used instead of the fractions when non-empty.
    pub lambdas: Vec<f64>,
    pub eps: Vec<f64>,
    /// Cutoff radius δ of the grafted spinor; defaults to `L/5`.
    pub cutoff_radius: Option<f64>,
    /// Refinement ladder for `bubble-verify`; defaults depend on n.
    pub ladder: Vec<GridSpec>,
    /// Concentration scale of the initial spinor; scanned when absent.
    pub init_eps: Option<f64>,
    /// Relative amplitude of a seeded random perturbation of the initial spinor.
    pub init_noise: f64,
    /// Largest |eigenvalue| listed by `spectrum`, in units of `2π/L`.
    pub spectrum_limit: f64,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            lambda_fractions: vec![0.2, 0.4, 0.6, 0.8, 0.95],
            lambdas: Vec::new(),
            eps: vec![0.1, 0.2, 0.3, 0.4],
            cutoff_radius: None,
            ladder: Vec::new(),
            init_eps: None,
            init_noise: 0.0,
            spectrum_limit: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    /// Grid for `calibrate_constants`; finer than the experiment grid by default.
    #[serde(default)]
    pub calibration_grid: Option<GridSpec>,
    #[serde(default = "default_kernel")]
    pub kernel: KernelQuadrature,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub experiment: ExperimentParams,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_kernel() -> KernelQuadrature {
    KernelQuadrature::EwaldSplit
}

impl RunConfig {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            grid: None,
            calibration_grid: None,
            kernel: default_kernel(),
            solver: SolverConfig::default(),
            experiment: ExperimentParams::default(),
            output_dir: None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn grid(&self) -> Result<BoxGrid> {
        match self.grid {
            Some(g) => g.build(self.n),
            None => BoxGrid::default_for(self.n),
        }
    }

    pub fn calibration_grid(&self) -> Result<BoxGrid> {
        match self.calibration_grid {
            Some(g) => g.build(self.n),
            None => match self.n {
                3 => BoxGrid::new(3, 30.0, 96),
                4 => BoxGrid::new(4, 16.0, 48),
                n => BoxGrid::new(n, 12.0, 24),
            },
        }
    }

    pub fn green_mode(&self) -> GreenMode {
        self.solver.green_mode
    }

    pub fn cutoff_radius(&self) -> Result<f64> {
        Ok(self.experiment.cutoff_radius.unwrap_or(self.grid()?.length() / 5.0))
    }

    pub fn lambdas(&self) -> Result<Vec<f64>> {
        if !self.experiment.lambdas.is_empty() {
            return Ok(self.experiment.lambdas.clone());
        }
        let fund = self.grid()?.fundamental();
        Ok(self.experiment.lambda_fractions.iter().map(|f| f * fund).collect())
    }

    pub fn ladder(&self) -> Result<Vec<BoxGrid>> {
        let specs: Vec<GridSpec> = if self.experiment.ladder.is_empty() {
            match self.n {
                3 => vec![(20.0, 32), (40.0, 64), (80.0, 128)],
                4 => vec![(12.0, 16), (24.0, 32)],
                _ => vec![(8.0, 16), (16.0, 32)],
            }
            .into_iter()
            .map(|(length, points)| GridSpec { length, points })
            .collect()
        } else {
            self.experiment.ladder.clone()
        };
        specs.iter().map(|g| g.build(self.n)).collect()
    }

    /// Check everything that can be checked without numerical work.
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(LabError::Config(format!("dimension n = {} must be at least 3", self.n)));
        }
        let grid = self.grid()?;
        self.calibration_grid()?;
        self.ladder()?;
        self.solver.validate()?;
        let delta = self.cutoff_radius()?;
        if !(delta > 0.0) || 4.0 * delta >= grid.length() {
            return Err(LabError::Config(format!(
                "cutoff radius {delta} needs 0 < 2δ < L/2 = {}",
                0.5 * grid.length()
            )));
        }
        for &l in &self.lambdas()? {
            if !(l.is_finite() && l > 0.0) {
                return Err(LabError::Config(format!("lambda = {l} must be positive")));
            }
        }
        if self.experiment.eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(LabError::Config("eps values must be positive".into()));
        }
        if !(self.experiment.init_noise >= 0.0) {
            return Err(LabError::Config("init_noise must be non-negative".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the config.
    pub fn content_hash(&self) -> String {
        let canon = serde_json::to_vec(self).expect("config serialises");
        let mut h = Sha256::new();
        h.update(env!("CARGO_PKG_VERSION").as_bytes());
        h.update(&canon);
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn write_snapshot(path: &Path, psi: &SpinorField) -> Result<()> {
    let g = psi.grid();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(g.dim() as u32).to_le_bytes())?;
    w.write_all(&(psi.spin_dim() as u32).to_le_bytes())?;
    w.write_all(&g.length().to_le_bytes())?;
    w.write_all(&(g.points() as u32).to_le_bytes())?;
    for p in 0..g.len() {
        for z in psi.at(p) {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<SpinorField> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(LabError::Config(format!("{} is not a field snapshot", path.display())));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    let mut u32_ = |r: &mut BufReader<File>| -> Result<usize> {
        r.read_exact(&mut b4)?;
        Ok(u32::from_le_bytes(b4) as usize)
    };
    let n = u32_(&mut r)?;
    let spin = u32_(&mut r)?;
    r.read_exact(&mut b8)?;
    let length = f64::from_le_bytes(b8);
    let m = u32_(&mut r)?;
    let grid = BoxGrid::new(n, length, m)?;
    let len = grid.len();
    let mut data = vec![Complex64::new(0.0, 0.0); len * spin];
    for p in 0..len {
        for c in 0..spin {
            r.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)?;
            let im = f64::from_le_bytes(b8);
            data[c * len + p] = Complex64::new(re, im);
        }
    }
    SpinorField::from_vec(grid, spin, data)
}

/// Shell-averaged `|ψ|` in bins of width `h` around the origin.
pub fn radial_profile(psi: &SpinorField) -> Vec<(f64, f64)> {
    let g = psi.grid();
    let h = g.spacing();
    let nbins = (0.5 * g.length() / h).floor() as usize;
    let mut sum = vec![0.0; nbins];
    let mut cnt = vec![0usize; nbins];
    let dens = psi.density();
    for (rr, v) in g.radius_squared().iter().zip(dens.values()) {
        let b = (rr.sqrt() / h + 0.5).floor() as usize;
        if b < nbins {
            sum[b] += v.sqrt();
            cnt[b] += 1;
        }
    }
    (0..nbins)
        .filter(|&b| cnt[b] > 0)
        .map(|b| (b as f64 * h, sum[b] / cnt[b] as f64))
        .collect()
}

/// CSV with leading `#` comment lines.
pub struct Table {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { comments: Vec::new(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn comment(&mut self, s: impl Into<String>) {
        self.comments.push(s.into());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_string(&self) -> Result<String> {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let body = w.into_inner().map_err(|e| LabError::Io(e.into_error()))?;
        out.push_str(&String::from_utf8(body).expect("csv is utf-8"));
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_string()?)?;
        Ok(())
    }
}

/// Fixed-format float for reproducible tables.
pub fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest<'a, T: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub config: &'a RunConfig,
    pub grid: BoxGrid,
    pub input_hash: String,
    pub threads: usize,
    pub wall_time_s: f64,
    pub finished_unix_s: u64,
    pub outputs: Vec<String>,
    pub result: T,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}
