//! Experiment configuration: JSON schema, defaults and aggregated validation.

use std::fmt;
use std::path::{Path, PathBuf};

use dualkin_core::fixtures::Fixtures;
use dualkin_core::hartree::{Grid1D, Kernel, MAX_MATRIX_POINTS, MIN_POINTS};
use dualkin_core::tensor::{max_abs, swap_matrix};
use dualkin_core::{CMatrix, ParticleModel, C64};
use serde::{Deserialize, Serialize};

/// Complex matrix written row by row as `[re, im]` pairs.
pub type ComplexRows = Vec<Vec<[f64; 2]>>;

const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub truncation: TruncationConfig,
    pub time: TimeConfig,
    pub quadrature: QuadratureConfig,
    pub epsilon_sweep: Vec<f64>,
    pub grid: GridConfig,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            truncation: TruncationConfig::default(),
            time: TimeConfig::default(),
            quadrature: QuadratureConfig::default(),
            epsilon_sweep: vec![0.2, 0.1, 0.05, 0.025],
            grid: GridConfig::default(),
            seed: 1,
            output: None,
        }
    }
}

/// Particle model. `k` and `phi` are drawn from the seed when omitted, with
/// `phi` scaled to operator norm `potential_norm`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub d: usize,
    pub k: Option<ComplexRows>,
    pub phi: Option<ComplexRows>,
    pub epsilon: f64,
    pub potential_norm: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { d: 2, k: None, phi: None, epsilon: 1.0, potential_norm: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationConfig {
    /// Observable sequence truncation for the hierarchy suites.
    pub s: usize,
    /// Highest order of the one-particle state series.
    pub series_cap: usize,
    /// Highest order of the marginal functionals.
    pub n_max: usize,
    /// Highest marginal index in the duality checks.
    pub s_max: usize,
    /// Truncation of the limit hierarchy in the chaos identity.
    pub chaos_s_max: usize,
    /// Trace of the initial one-particle state.
    pub lambda: f64,
    /// Weight of the sequence norm.
    pub gamma: f64,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self { s: 3, series_cap: 5, n_max: 2, s_max: 4, chaos_s_max: 5, lambda: 0.2, gamma: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    /// Evaluation time of the hierarchy, limit and grid experiments.
    pub t: f64,
    /// Evaluation time of the chaos and functional experiments.
    pub t_kinetic: f64,
    /// Grid time step.
    pub dt: f64,
    /// Times at which the hierarchy expansion is compared with its oracle.
    pub t_list: Vec<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { t: 0.5, t_kinetic: 0.4, dt: 1e-3, t_list: vec![-1.0, -0.5, 0.5, 1.0] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub nodes: usize,
    pub depth: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { nodes: 16, depth: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelConfig {
    Zero,
    Gaussian { amplitude: f64, width: f64 },
    #[serde(alias = "delta")]
    Dirac { strength: f64 },
}

impl KernelConfig {
    pub fn to_kernel(&self) -> Kernel {
        match *self {
            KernelConfig::Zero => Kernel::Zero,
            KernelConfig::Gaussian { amplitude, width } => Kernel::Gaussian { amplitude, width },
            KernelConfig::Dirac { strength } => Kernel::Delta { strength },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "M")]
    pub m: usize,
    pub dq: f64,
    pub kernel: KernelConfig,
    /// Packet centre; the middle of the box when omitted.
    pub center: Option<f64>,
    pub sigma: f64,
    pub momentum: f64,
    /// Coarse step of the energy-drift comparison; the fine step is half.
    pub energy_dt: f64,
    pub energy_t: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            m: 12,
            dq: 1.0,
            kernel: KernelConfig::Gaussian { amplitude: 1.0, width: 1.5 },
            center: None,
            sigma: 1.5,
            momentum: 0.6,
            energy_dt: 0.02,
            energy_t: 1.0,
        }
    }
}

impl GridConfig {
    pub fn grid(&self) -> dualkin_core::Result<Grid1D> {
        Grid1D::new(self.m, self.dq, self.kernel.to_kernel())
    }

    pub fn packet_center(&self) -> f64 {
        self.center.unwrap_or(0.5 * self.m as f64 * self.dq)
    }
}

/// Failure to load a configuration.
#[derive(Debug)]
pub enum ConfigError {
    Io(PathBuf, std::io::Error),
    Parse(serde_json::Error),
    Invalid(Vec<String>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            ConfigError::Parse(e) => write!(f, "parse error at line {}, column {}: {e}", e.line(), e.column()),
            ConfigError::Invalid(v) => {
                write!(f, "{} invalid setting(s):", v.len())?;
                for msg in v {
                    write!(f, "\n  - {msg}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let config: ExperimentConfig = serde_json::from_str(text).map_err(ConfigError::Parse)?;
    let violations = config.violations();
    if violations.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError::Invalid(violations))
    }
}

fn to_matrix(rows: &ComplexRows, n: usize, name: &str, out: &mut Vec<String>) -> Option<CMatrix> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        out.push(format!("model.{name} must be {n}x{n}"));
        return None;
    }
    if rows.iter().flatten().flatten().any(|x| !x.is_finite()) {
        out.push(format!("model.{name} has non-finite entries"));
        return None;
    }
    Some(CMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

fn hermitian_check(m: &CMatrix, name: &str, out: &mut Vec<String>) {
    let dev = max_abs(&(m - m.adjoint()));
    if dev > HERMITIAN_TOL * max_abs(m).max(1.0) {
        out.push(format!("model.{name} is not Hermitian: max asymmetry {dev:.3e}"));
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl ExperimentConfig {
    /// Every violated bound, in schema order.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let m = &self.model;
        if !(1..=3).contains(&m.d) {
            v.push(format!("model.d must lie in 1..=3, got {}", m.d));
        }
        if !(m.epsilon.is_finite() && m.epsilon >= 0.0) {
            v.push(format!("model.epsilon must be finite and nonnegative, got {}", m.epsilon));
        }
        if !(m.potential_norm.is_finite() && m.potential_norm >= 0.0) {
            v.push(format!("model.potential_norm must be finite and nonnegative, got {}", m.potential_norm));
        }
        match (&m.k, &m.phi) {
            (Some(k), Some(phi)) if (1..=3).contains(&m.d) => {
                if let Some(k) = to_matrix(k, m.d, "k", &mut v) {
                    hermitian_check(&k, "k", &mut v);
                }
                if let Some(phi) = to_matrix(phi, m.d * m.d, "phi", &mut v) {
                    hermitian_check(&phi, "phi", &mut v);
                    let swap = swap_matrix(m.d);
                    let dev = max_abs(&(&swap * &phi * &swap - &phi));
                    if dev > HERMITIAN_TOL * max_abs(&phi).max(1.0) {
                        v.push(format!("model.phi is not invariant under particle exchange: max deviation {dev:.3e}"));
                    }
                }
            }
            (None, None) | (Some(_), Some(_)) => {}
            _ => v.push("model.k and model.phi must be given together".into()),
        }

        let tr = &self.truncation;
        let inv_e = (-1.0f64).exp();
        if !(1..=4).contains(&tr.s) {
            v.push(format!("truncation.s must lie in 1..=4, got {}", tr.s));
        }
        if tr.series_cap > 5 {
            v.push(format!("truncation.series_cap must be at most 5 (6 particles), got {}", tr.series_cap));
        }
        if tr.n_max > 2 {
            v.push(format!("truncation.n_max must be at most 2, got {}", tr.n_max));
        }
        if tr.s_max == 0 || tr.s_max + tr.n_max > 6 {
            v.push(format!("truncation.s_max must be positive with s_max + n_max <= 6, got {}", tr.s_max));
        }
        if !(2..=6).contains(&tr.chaos_s_max) {
            v.push(format!("truncation.chaos_s_max must lie in 2..=6, got {}", tr.chaos_s_max));
        }
        if !(positive(tr.lambda) && tr.lambda < inv_e) {
            v.push(format!("truncation.lambda = {} violates 0 < lambda < 1/e = {inv_e:.6}", tr.lambda));
        }
        if !(positive(tr.gamma) && tr.gamma < inv_e) {
            v.push(format!("truncation.gamma = {} violates 0 < gamma < 1/e = {inv_e:.6}", tr.gamma));
        }

        let t = &self.time;
        if !t.t.is_finite() || !t.t_kinetic.is_finite() {
            v.push("time.t and time.t_kinetic must be finite".into());
        }
        if !positive(t.dt) {
            v.push(format!("time.dt must be positive, got {}", t.dt));
        }
        if t.t_list.is_empty() || t.t_list.iter().any(|x| !x.is_finite()) {
            v.push("time.t_list must be a nonempty list of finite times".into());
        }

        let q = &self.quadrature;
        if q.nodes == 0 || q.nodes > 64 {
            v.push(format!("quadrature.nodes must lie in 1..=64, got {}", q.nodes));
        }
        if q.depth + 1 < tr.s {
            v.push(format!("quadrature.depth must be at least s - 1 = {}, got {}", tr.s.saturating_sub(1), q.depth));
        }

        let e = &self.epsilon_sweep;
        if e.len() < 2 || e.iter().any(|x| !positive(*x)) || e.windows(2).any(|w| w[1] >= w[0]) {
            v.push("epsilon_sweep must hold at least two positive, strictly decreasing values".into());
        }

        let g = &self.grid;
        if !(MIN_POINTS..=MAX_MATRIX_POINTS).contains(&g.m) {
            v.push(format!("grid.M must lie in {MIN_POINTS}..={MAX_MATRIX_POINTS}, got {}", g.m));
        }
        if !positive(g.dq) || !positive(g.sigma) || !g.momentum.is_finite() {
            v.push("grid.dq and grid.sigma must be positive and grid.momentum finite".into());
        }
        if !positive(g.energy_dt) || !positive(g.energy_t) {
            v.push("grid.energy_dt and grid.energy_t must be positive".into());
        }
        match g.kernel {
            KernelConfig::Gaussian { amplitude, width } if !(amplitude.is_finite() && positive(width)) => {
                v.push("grid.kernel gaussian needs a finite amplitude and positive width".into())
            }
            KernelConfig::Dirac { strength } if !strength.is_finite() => {
                v.push("grid.kernel dirac needs a finite strength".into())
            }
            _ => {}
        }
        v
    }

    /// The particle model, drawn from the seed unless given explicitly.
    pub fn particle_model(&self) -> dualkin_core::Result<ParticleModel> {
        let m = &self.model;
        match (&m.k, &m.phi) {
            (Some(k), Some(phi)) => {
                let mut sink = Vec::new();
                let k = to_matrix(k, m.d, "k", &mut sink);
                let phi = to_matrix(phi, m.d * m.d, "phi", &mut sink);
                match (k, phi) {
                    (Some(k), Some(phi)) => ParticleModel::new(k, phi, m.epsilon),
                    _ => Err(dualkin_core::Error::InvalidModel(sink.join("; "))),
                }
            }
            _ => Ok(Fixtures::new(self.seed).model(m.d, m.potential_norm, m.epsilon)),
        }
    }
}

/// Row-major `[re, im]` form of a matrix.
pub fn complex_rows(m: &CMatrix) -> ComplexRows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}
