//! Gauss–Legendre rules, nested time-ordered quadrature over the simplex
//! `t ≥ t_1 ≥ ... ≥ t_n ≥ 0`, and a spectral indefinite-integral matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess for the i-th largest root
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
pub fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

fn legendre_values(n: usize, z: f64) -> Vec<f64> {
    let mut v = vec![1.0; n + 1];
    if n >= 1 {
        v[1] = z;
    }
    for k in 2..=n {
        v[k] = ((2 * k - 1) as f64 * z * v[k - 1] - (k - 1) as f64 * v[k - 2]) / k as f64;
    }
    v
}

/// Gauss–Legendre rule on `[0, 1]` reused at every nesting level.
#[derive(Clone, Debug)]
pub struct SimplexQuadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    max_depth: usize,
}

impl Default for SimplexQuadrature {
    fn default() -> Self {
        Self::new(16, 3)
    }
}

impl SimplexQuadrature {
    pub fn new(nodes: usize, max_depth: usize) -> Self {
        let (x, w) = gauss_legendre(nodes);
        Self {
            nodes: x.iter().map(|z| 0.5 * (z + 1.0)).collect(),
            weights: w.iter().map(|v| 0.5 * v).collect(),
            max_depth,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Unit-interval nodes and weights.
    pub fn unit_rule(&self) -> (&[f64], &[f64]) {
        (&self.nodes, &self.weights)
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn rule(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let len = b - a;
        self.nodes.iter().zip(&self.weights).map(|(x, w)| (a + len * x, len * w)).collect()
    }

    pub fn check_depth(&self, needed: usize) -> Result<()> {
        if needed > self.max_depth {
            Err(Error::DepthExceeded { needed, max: self.max_depth })
        } else {
            Ok(())
        }
    }

    /// `∫_0^t dt_1 ∫_0^{t_1} dt_2 ... ∫_0^{t_{n-1}} dt_n f(t_1, ..., t_n)` by
    /// the product rule on each nested interval.
    pub fn nested_scalar<F: Fn(&[f64]) -> f64>(&self, n: usize, t: f64, f: &F) -> Result<f64> {
        self.check_depth(n)?;
        fn rec<F: Fn(&[f64]) -> f64>(q: &SimplexQuadrature, left: usize, upper: f64, times: &mut Vec<f64>, f: &F) -> f64 {
            if left == 0 {
                return f(times);
            }
            let mut acc = 0.0;
            for (x, w) in q.rule(0.0, upper) {
                times.push(x);
                acc += w * rec(q, left - 1, x, times, f);
                times.pop();
            }
            acc
        }
        Ok(rec(self, n, t, &mut Vec::with_capacity(n), f))
    }
}

/// Gauss–Legendre collocation on `[0, T]` with the spectral indefinite
/// integral matrix: `(S p)_i = ∫_0^{x_i} p` exactly for polynomials of degree
/// below the node count.
#[derive(Clone, Debug)]
pub struct Collocation {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub integral: DMatrix<f64>,
    length: f64,
}

impl Collocation {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("collocation needs at least one node".into()));
        }
        let (z, w) = gauss_legendre(n);
        let half = 0.5 * length;
        let vander = DMatrix::from_fn(n, n, |i, k| legendre_values(n, z[i])[k]);
        let mut prim = DMatrix::zeros(n, n);
        for i in 0..n {
            let p = legendre_values(n, z[i]);
            for k in 0..n {
                // ∫_{-1}^{z} P_k = (P_{k+1}(z) - P_{k-1}(z)) / (2k+1), and z + 1 for k = 0
                prim[(i, k)] = if k == 0 { z[i] + 1.0 } else { (p[k + 1] - p[k - 1]) / (2 * k + 1) as f64 } * half;
            }
        }
        let inv = vander
            .clone()
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("singular Legendre Vandermonde matrix".into()))?;
        Ok(Self {
            nodes: z.iter().map(|x| half * (x + 1.0)).collect(),
            weights: w.iter().map(|v| half * v).collect(),
            integral: prim * inv,
            length,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Interpolation weights for evaluating the node polynomial at `x`.
    pub fn interpolation_row(&self, x: f64) -> DVector<f64> {
        let n = self.nodes.len();
        let mut row = DVector::zeros(n);
        for j in 0..n {
            let mut l = 1.0;
            for m in 0..n {
                if m != j {
                    l *= (x - self.nodes[m]) / (self.nodes[j] - self.nodes[m]);
                }
            }
            row[j] = l;
        }
        row
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_positive_and_sum_to_length() {
        let q = SimplexQuadrature::default();
        let (x, w) = q.unit_rule();
        assert_eq!(x.len(), 16);
        assert!(w.iter().all(|&v| v > 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let r = q.rule(0.0, 2.5);
        assert!((r.iter().map(|p| p.1).sum::<f64>() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn rule_exact_for_high_degree_polynomials() {
        let q = SimplexQuadrature::new(16, 3);
        let v: f64 = q.rule(0.0, 1.0).iter().map(|(x, w)| w * x.powi(31)).sum();
        assert!((v - 1.0 / 32.0).abs() < 1e-15);
        let (x, _) = gauss_legendre(5);
        assert!(x[2].abs() < 1e-16 && (x[4] - 0.906_179_845_938_664).abs() < 1e-14);
    }

    #[test]
    fn simplex_volume_and_depth_limit() {
        let q = SimplexQuadrature::default();
        let v = q.nested_scalar(3, 0.7, &|_| 1.0).unwrap();
        assert!((v - 0.7f64.powi(3) / 6.0).abs() < 1e-15);
        let m = q.nested_scalar(2, 1.0, &|t| t[0] * t[1]).unwrap();
        // ∫_0^1 t1 ∫_0^{t1} t2 = 1/8
        assert!((m - 0.125).abs() < 1e-15);
        assert!(matches!(q.nested_scalar(4, 1.0, &|_| 1.0), Err(Error::DepthExceeded { needed: 4, max: 3 })));
    }

    #[test]
    fn collocation_integrates_smooth_functions() {
        let c = Collocation::new(20, 1.5).unwrap();
        let vals: DVector<f64> = DVector::from_iterator(20, c.nodes.iter().map(|x| x.cos()));
        let prim = &c.integral * vals;
        for (i, x) in c.nodes.iter().enumerate() {
            assert!((prim[i] - x.sin()).abs() < 1e-14);
        }
        let row = c.interpolation_row(1.5);
        let end: f64 = row.iter().zip(&c.nodes).map(|(l, x)| l * x.exp()).sum();
        assert!((end - 1.5f64.exp()).abs() < 1e-12);
    }
}
