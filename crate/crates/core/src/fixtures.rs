//! Seeded random fixtures: Hermitian matrices, symmetric n-body operators,
//! density matrices and models.
//!
//! Entries are drawn uniformly from `[-1, 1]` (real and imaginary parts) by a
//! ChaCha8 generator and then Hermitized, so a seed fully determines every
//! fixture on every platform.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::{swap_matrix, NBodyOperator, ObservableSequence, ParticleModel};
use crate::CMatrix;

pub struct Fixtures {
    rng: ChaCha8Rng,
}

impl Fixtures {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    pub fn complex_matrix(&mut self, n: usize) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| C64::new(self.rng.gen_range(-1.0..1.0), self.rng.gen_range(-1.0..1.0)))
    }

    pub fn complex_vector(&mut self, n: usize) -> Vec<C64> {
        (0..n).map(|_| C64::new(self.rng.gen_range(-1.0..1.0), self.rng.gen_range(-1.0..1.0))).collect()
    }

    pub fn hermitian(&mut self, n: usize) -> CMatrix {
        let a = self.complex_matrix(n);
        (&a + a.adjoint()).scale(0.5)
    }

    /// Hermitian, permutation-symmetric operator on `s` particles.
    pub fn symmetric_hermitian(&mut self, dim: usize, s: usize) -> CMatrix {
        let h = self.hermitian(dim.pow(s as u32));
        NBodyOperator::on_leading(dim, h).expect("power of dim").symmetrized().hermitian_part().into_matrix()
    }

    /// Hermitian pair potential with `SWAP Φ SWAP = Φ` exactly.
    pub fn swap_symmetric_potential(&mut self, dim: usize) -> CMatrix {
        let h = self.hermitian(dim * dim);
        let swap = swap_matrix(dim);
        // conjugation by SWAP only permutes entries, so the identity holds bitwise
        (&h + &swap * &h * &swap).scale(0.5)
    }

    /// Positive semidefinite matrix with the given trace.
    pub fn density_matrix(&mut self, dim: usize, trace: f64) -> CMatrix {
        let a = self.complex_matrix(dim);
        let rho = &a * a.adjoint();
        let tr = rho.trace().re;
        let rho = rho.scale(trace / tr);
        (&rho + rho.adjoint()).scale(0.5)
    }

    /// Unit vector in `C^dim`.
    pub fn unit_vector(&mut self, dim: usize) -> Vec<C64> {
        let v = self.complex_vector(dim);
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.into_iter().map(|z| z / norm).collect()
    }

    /// `(g_0, g_1, ..., g_S)` with real scalar `g_0` and symmetric Hermitian entries.
    pub fn observable_sequence(&mut self, dim: usize, truncation: usize) -> ObservableSequence {
        let mut entries = vec![CMatrix::from_element(1, 1, C64::new(self.rng.gen_range(-1.0..1.0), 0.0))];
        for s in 1..=truncation {
            entries.push(self.symmetric_hermitian(dim, s));
        }
        ObservableSequence::new(dim, entries).expect("fixture sequence is symmetric")
    }

    /// Random model with `‖Φ‖` rescaled to `potential_norm`.
    pub fn model(&mut self, dim: usize, potential_norm: f64, epsilon: f64) -> ParticleModel {
        let k = self.hermitian(dim);
        let phi = self.swap_symmetric_potential(dim);
        let scale = potential_norm / crate::tensor::operator_norm(&phi);
        ParticleModel::new(k, phi.scale(scale), epsilon).expect("fixture model is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{check_symmetry, hermitian_spectrum, max_abs};

    #[test]
    fn same_seed_same_fixture() {
        assert_eq!(Fixtures::new(9).hermitian(4), Fixtures::new(9).hermitian(4));
        assert_ne!(Fixtures::new(9).hermitian(4), Fixtures::new(10).hermitian(4));
    }

    #[test]
    fn fixture_invariants() {
        let mut fx = Fixtures::new(3);
        let phi = fx.swap_symmetric_potential(3);
        let swap = swap_matrix(3);
        assert_eq!(&swap * &phi * &swap, phi);
        let rho = fx.density_matrix(3, 0.2);
        assert!((rho.trace().re - 0.2).abs() < 1e-15);
        assert!(hermitian_spectrum(&rho)[0] > -1e-15);
        let g = NBodyOperator::on_leading(2, fx.symmetric_hermitian(2, 3)).unwrap();
        assert!(check_symmetry(&g) < 1e-13);
        assert!(max_abs(&(g.matrix() - g.matrix().adjoint())) == 0.0);
    }
}
