//! Periodic one-dimensional grid solver for the Hartree equation
//! `i ∂ψ/∂t = -½Δψ + (Φ * |ψ|²) ψ` and its local (cubic NLS) limit.
//!
//! The Laplacian is the periodic `(1, -2, 1)/Δq²` stencil; grid functions are
//! normalized by `Σ |ψ_j|² Δq = 1`.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::kinetic::{vlasov_solve_ode, OneParticleState};
use crate::tensor::{trace_norm, ParticleModel};
use crate::{CMatrix, C64};

/// Smallest supported grid.
pub const MIN_POINTS: usize = 8;
/// Largest grid accepted by the density-matrix comparison.
pub const MAX_MATRIX_POINTS: usize = 16;

/// Interaction kernel on the grid.
#[derive(Clone, Debug, PartialEq)]
pub enum Kernel {
    Zero,
    /// `Φ(q) = amplitude · exp(-q²/(2 width²))`.
    Gaussian { amplitude: f64, width: f64 },
    /// Kronecker delta divided by `Δq`.
    Delta { strength: f64 },
}

/// Periodic grid `q_j = j Δq`, `j = 0..M`, with kernel samples `Φ(q_j)` at
/// minimal-image distances.
#[derive(Clone, Debug)]
pub struct Grid1D {
    points: usize,
    spacing: f64,
    kernel: Kernel,
    samples: Vec<f64>,
}

impl Grid1D {
    pub fn new(points: usize, spacing: f64, kernel: Kernel) -> Result<Self> {
        if points < MIN_POINTS {
            return Err(Error::Grid(format!("need at least {MIN_POINTS} points, got {points}")));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Grid(format!("spacing must be positive, got {spacing}")));
        }
        let samples = (0..points)
            .map(|j| {
                let q = j.min(points - j) as f64 * spacing;
                match kernel {
                    Kernel::Zero => 0.0,
                    Kernel::Gaussian { amplitude, width } => amplitude * (-q * q / (2.0 * width * width)).exp(),
                    Kernel::Delta { strength } => {
                        if j == 0 {
                            strength / spacing
                        } else {
                            0.0
                        }
                    }
                }
            })
            .collect();
        Ok(Self { points, spacing, kernel, samples })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn length(&self) -> f64 {
        self.points as f64 * self.spacing
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.points).map(|j| j as f64 * self.spacing).collect()
    }

    /// `Φ(q_i - q_j)`.
    pub fn kernel_at(&self, i: usize, j: usize) -> f64 {
        self.samples[(i + self.points - j) % self.points]
    }

    /// Eigenvalue of `-½Δ` on the `n`-th Fourier mode:
    /// `ω_n = (2/Δq²) sin²(π n / M)`.
    pub fn dispersion(&self, n: usize) -> f64 {
        let s = (std::f64::consts::PI * n as f64 / self.points as f64).sin();
        2.0 * s * s / (self.spacing * self.spacing)
    }

    /// `Σ_j |ψ_j|² Δq`.
    pub fn mass(&self, psi: &[C64]) -> f64 {
        psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.spacing
    }

    /// `V_i = Σ_j Φ(q_i - q_j) |ψ_j|² Δq`.
    pub fn potential(&self, psi: &[C64]) -> Vec<f64> {
        let rho: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
        (0..self.points)
            .map(|i| (0..self.points).map(|j| self.kernel_at(i, j) * rho[j]).sum::<f64>() * self.spacing)
            .collect()
    }

    /// `Σ Δq ψ̄(-½Δψ) + ½ Σ_{ij} Δq² Φ_ij |ψ_i|²|ψ_j|²`.
    pub fn energy(&self, psi: &[C64]) -> f64 {
        let m = self.points;
        let h2 = self.spacing * self.spacing;
        let kinetic: f64 = (0..m)
            .map(|j| {
                let lap = (psi[(j + 1) % m] - psi[j] * 2.0 + psi[(j + m - 1) % m]) / h2;
                (psi[j].conj() * lap * -0.5).re
            })
            .sum::<f64>()
            * self.spacing;
        let v = self.potential(psi);
        let inter: f64 = psi.iter().zip(&v).map(|(z, vi)| z.norm_sqr() * vi).sum::<f64>() * self.spacing * 0.5;
        kinetic + inter
    }

    /// Matrix model on `C^M`: `K = -½Δ` and `Φ(i,j) = Φ(q_i - q_j)` on the
    /// two-particle diagonal, for the state `φ = √Δq ψ`.
    pub fn matrix_model(&self) -> Result<ParticleModel> {
        let m = self.points;
        if m > MAX_MATRIX_POINTS {
            return Err(Error::Grid(format!("density-matrix model supports at most {MAX_MATRIX_POINTS} points, got {m}")));
        }
        let h2 = self.spacing * self.spacing;
        let k = CMatrix::from_fn(m, m, |i, j| {
            let v = if i == j {
                1.0 / h2
            } else if (i + 1) % m == j || (j + 1) % m == i {
                -0.5 / h2
            } else {
                0.0
            };
            C64::new(v, 0.0)
        });
        let mut phi = CMatrix::zeros(m * m, m * m);
        for i in 0..m {
            for j in 0..m {
                phi[(i * m + j, i * m + j)] = C64::new(self.kernel_at(i, j), 0.0);
            }
        }
        ParticleModel::new(k, phi, 1.0)
    }
}

/// Final state and diagnostics of one splitting run.
#[derive(Clone, Debug)]
pub struct HartreeRun {
    pub psi: Vec<C64>,
    pub steps: usize,
    pub step: f64,
    /// Largest `|mass_{n+1} - mass_n|` over all steps.
    pub max_mass_step: f64,
    /// Largest `|E_n - E_0|` over all steps.
    pub energy_drift: f64,
    /// Whether `|mass(ψ₀) - 1| ≤ 1e-10`.
    pub input_normalized: bool,
}

struct Stepper {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    half_phases: Vec<C64>,
    scratch: Vec<C64>,
}

impl Stepper {
    fn new(grid: &Grid1D, h: f64) -> Self {
        let mut planner = FftPlanner::new();
        let m = grid.points();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let half_phases = (0..m).map(|n| C64::from_polar(1.0 / m as f64, -0.5 * h * grid.dispersion(n))).collect();
        let len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        Self { forward, inverse, half_phases, scratch: vec![C64::new(0.0, 0.0); len] }
    }

    fn kinetic_half(&mut self, psi: &mut [C64]) {
        self.forward.process_with_scratch(psi, &mut self.scratch);
        for (z, p) in psi.iter_mut().zip(&self.half_phases) {
            *z *= p;
        }
        self.inverse.process_with_scratch(psi, &mut self.scratch);
    }
}

/// Strang splitting: half kinetic step in the Fourier basis, exact phase step
/// `ψ ← e^{-iV h} ψ` (which leaves `|ψ|` and hence `V` unchanged), half kinetic
/// step. The step is adjusted to `t / round(|t|/dt)`; negative `t` runs
/// backward.
pub fn hartree_solve(psi0: &[C64], grid: &Grid1D, t: f64, dt: f64) -> Result<HartreeRun> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if psi0.len() != grid.points() {
        return Err(Error::Grid(format!("state has {} values for {} grid points", psi0.len(), grid.points())));
    }
    let steps = ((t.abs() / dt).round() as usize).max(1);
    let h = t / steps as f64;
    let mut psi = psi0.to_vec();
    let mass0 = grid.mass(&psi);
    let e0 = grid.energy(&psi);
    let mut stepper = Stepper::new(grid, h);
    let (mut max_mass_step, mut energy_drift, mut mass) = (0.0f64, 0.0f64, mass0);
    if t != 0.0 {
        for _ in 0..steps {
            stepper.kinetic_half(&mut psi);
            let v = grid.potential(&psi);
            for (z, vi) in psi.iter_mut().zip(&v) {
                *z *= C64::from_polar(1.0, -vi * h);
            }
            stepper.kinetic_half(&mut psi);
            let m = grid.mass(&psi);
            max_mass_step = max_mass_step.max((m - mass).abs());
            mass = m;
            energy_drift = energy_drift.max((grid.energy(&psi) - e0).abs());
        }
    }
    Ok(HartreeRun {
        psi,
        steps: if t == 0.0 { 0 } else { steps },
        step: h,
        max_mass_step,
        energy_drift,
        input_normalized: (mass0 - 1.0).abs() <= 1e-10,
    })
}

/// Scales `psi` so that `Σ |ψ_j|² Δq = 1`.
pub fn normalize(psi: &mut [C64], grid: &Grid1D) {
    let s = grid.mass(psi).sqrt();
    if s > 0.0 {
        for z in psi.iter_mut() {
            *z /= s;
        }
    }
}

/// Normalized Gaussian wave packet `exp(-(q-c)²/(4σ²) + i k q)`.
pub fn wave_packet(grid: &Grid1D, center: f64, sigma: f64, momentum: f64) -> Vec<C64> {
    let mut psi: Vec<C64> = grid
        .coordinates()
        .iter()
        .map(|&q| C64::from_polar((-(q - center).powi(2) / (4.0 * sigma * sigma)).exp(), momentum * q))
        .collect();
    normalize(&mut psi, grid);
    psi
}

/// Trace distance between the Vlasov solution from `|φ₀⟩⟨φ₀|` and the
/// projector onto the Hartree solution, `φ = √Δq ψ`.
#[derive(Clone, Debug)]
pub struct RankOneReport {
    pub t: f64,
    pub dt: f64,
    pub trace_distance: f64,
}

pub fn rank1_consistency(psi0: &[C64], grid: &Grid1D, t: f64, dt: f64) -> Result<RankOneReport> {
    let model = grid.matrix_model()?;
    let scale = grid.spacing().sqrt();
    let phi0: Vec<C64> = psi0.iter().map(|z| z * scale).collect();
    let vlasov = vlasov_solve_ode(&model, &OneParticleState::pure(&phi0), t, 1e-12)?;
    let run = hartree_solve(psi0, grid, t, dt)?;
    let phi: Vec<C64> = run.psi.iter().map(|z| z * scale).collect();
    let proj = OneParticleState::pure(&phi);
    Ok(RankOneReport { t, dt, trace_distance: 0.5 * trace_norm(&(vlasov.matrix() - proj.matrix())) })
}

/// Writes one row `q Re ψ Im ψ` per grid point with 17 significant digits.
pub fn write_grid_state<W: Write>(mut out: W, grid: &Grid1D, psi: &[C64]) -> Result<()> {
    writeln!(out, "# q re_psi im_psi")?;
    for (q, z) in grid.coordinates().iter().zip(psi) {
        writeln!(out, "{q:.16e} {:.16e} {:.16e}", z.re, z.im)?;
    }
    Ok(())
}

/// Reads a table written by [`write_grid_state`]; returns `(q, ψ)`.
pub fn read_grid_state<R: BufRead>(input: R) -> Result<(Vec<f64>, Vec<C64>)> {
    let mut q = Vec::new();
    let mut psi = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<f64> = line
            .split_whitespace()
            .map(|c| c.parse::<f64>().map_err(|e| Error::Grid(format!("line {}: {e}", n + 1))))
            .collect::<Result<_>>()?;
        if cols.len() != 3 {
            return Err(Error::Grid(format!("line {}: expected 3 columns, got {}", n + 1, cols.len())));
        }
        q.push(cols[0]);
        psi.push(C64::new(cols[1], cols[2]));
    }
    Ok((q, psi))
}
