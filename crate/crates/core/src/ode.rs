//! Adaptive Dormand–Prince 5(4) integrator for complex linear and nonlinear
//! systems `y' = f(t, y)`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest admissible step magnitude.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-12, h_min: 1e-14, max_steps: 2_000_000 }
    }
}

impl OdeOptions {
    pub fn with_tolerance(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, ..Self::default() }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates from `t0` to `t1` (either direction) and returns `y(t1)`.
pub fn integrate<F>(mut f: F, t0: f64, y0: Vec<C64>, t1: f64, opts: &OdeOptions) -> Result<Vec<C64>>
where
    F: FnMut(f64, &[C64]) -> Vec<C64>,
{
    let n = y0.len();
    if t1 == t0 || n == 0 {
        return Ok(y0);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut y = y0;
    let mut k: Vec<Vec<C64>> = vec![Vec::new(); 7];
    k[0] = f(t, &y);
    let mut h = initial_step(&y, &k[0], span, opts);
    let mut stage = vec![C64::new(0.0, 0.0); n];
    for _ in 0..opts.max_steps {
        let remaining = (t1 - t) * dir;
        if remaining <= 0.0 {
            return Ok(y);
        }
        let last = h >= remaining;
        let step = if last { remaining } else { h };
        let hs = step * dir;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        acc += kj[i] * (hs * a);
                    }
                }
                stage[i] = acc;
            }
            k[s] = f(t + C[s] * hs, &stage);
        }
        // stage now holds the fifth-order solution (FSAL row)
        let mut err = 0.0f64;
        for i in 0..n {
            let mut e = C64::new(0.0, 0.0);
            for (j, kj) in k.iter().enumerate() {
                e += kj[i] * E[j];
            }
            let scale = opts.atol + opts.rtol * y[i].norm().max(stage[i].norm());
            err = err.max((e * hs).norm() / scale);
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + hs };
            std::mem::swap(&mut y, &mut stage);
            k.swap(0, 6);
            if last {
                return Ok(y);
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = step * factor;
        if h < opts.h_min {
            return Err(Error::StepUnderflow { t, h });
        }
    }
    Err(Error::StepUnderflow { t, h })
}

/// Values at each of `times` (monotone in one direction from `t0`).
pub fn integrate_at<F>(mut f: F, t0: f64, y0: Vec<C64>, times: &[f64], opts: &OdeOptions) -> Result<Vec<Vec<C64>>>
where
    F: FnMut(f64, &[C64]) -> Vec<C64>,
{
    let mut out = Vec::with_capacity(times.len());
    let mut t = t0;
    let mut y = y0;
    for &target in times {
        y = integrate(&mut f, t, y, target, opts)?;
        t = target;
        out.push(y.clone());
    }
    Ok(out)
}

fn initial_step(y: &[C64], dy: &[C64], span: f64, opts: &OdeOptions) -> f64 {
    let mut d0 = 0.0f64;
    let mut d1 = 0.0f64;
    for (a, b) in y.iter().zip(dy) {
        let sc = opts.atol + opts.rtol * a.norm();
        d0 = d0.max(a.norm() / sc);
        d1 = d1.max(b.norm() / sc);
    }
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span).max(opts.h_min * 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_and_rotation() {
        let opts = OdeOptions::default();
        let y = integrate(|_, y| vec![y[0]], 0.0, vec![C64::new(1.0, 0.0)], 1.0, &opts).unwrap();
        assert!((y[0].re - 1f64.exp()).abs() < 1e-11);
        let i = C64::new(0.0, 1.0);
        let y = integrate(|_, y| vec![i * y[0]], 0.0, vec![C64::new(1.0, 0.0)], 2.0, &opts).unwrap();
        assert!((y[0] - (i * 2.0).exp()).norm() < 1e-11);
    }

    #[test]
    fn backward_integration_round_trips() {
        let opts = OdeOptions::default();
        let f = |t: f64, y: &[C64]| vec![y[1], -y[0] * (1.0 + 0.1 * t)];
        let y0 = vec![C64::new(0.3, 0.1), C64::new(-0.2, 0.5)];
        let y1 = integrate(f, 0.0, y0.clone(), 1.5, &opts).unwrap();
        let back = integrate(f, 1.5, y1, 0.0, &opts).unwrap();
        for (a, b) in back.iter().zip(&y0) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn time_dependent_polynomial_is_exact() {
        let opts = OdeOptions::default();
        let y = integrate(|t, _| vec![C64::new(3.0 * t * t, 0.0)], 0.0, vec![C64::new(0.0, 0.0)], 2.0, &opts).unwrap();
        assert!((y[0].re - 8.0).abs() < 1e-12);
    }
}
