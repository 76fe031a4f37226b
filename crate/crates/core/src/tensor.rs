//! n-particle operator algebra on `(C^d)^{⊗n}`.
//!
//! Tensor index convention: particle listed first is the most significant
//! factor, row-major within each factor. An [`NBodyOperator`] carries the
//! ordered list of particle labels it acts on, so operators living on
//! different particle subsets can be embedded, traced and compared without
//! ambiguity.

use nalgebra::SymmetricEigen;
use num_complex::Complex64 as C64;

use crate::combinatorics::factorial;
use crate::error::{Error, Result};
use crate::{local, CMatrix};

/// Relative tolerance for the Hermiticity and swap-symmetry checks of a model.
pub const MODEL_TOLERANCE: f64 = 1e-12;
/// Tolerance for permutation symmetry of sequence entries.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Single-particle dimension, kinetic matrix `K`, pair potential `Φ` and the
/// interaction scale `ε`.
#[derive(Clone, Debug)]
pub struct ParticleModel {
    dim: usize,
    kinetic: CMatrix,
    potential: CMatrix,
    epsilon: f64,
}

impl ParticleModel {
    pub fn new(kinetic: CMatrix, potential: CMatrix, epsilon: f64) -> Result<Self> {
        let dim = kinetic.nrows();
        if dim == 0 || kinetic.ncols() != dim {
            return Err(Error::InvalidModel(format!(
                "kinetic matrix must be square and nonempty, got {}x{}",
                kinetic.nrows(),
                kinetic.ncols()
            )));
        }
        if potential.nrows() != dim * dim || potential.ncols() != dim * dim {
            return Err(Error::InvalidModel(format!(
                "pair potential must be {0}x{0}, got {1}x{2}",
                dim * dim,
                potential.nrows(),
                potential.ncols()
            )));
        }
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidModel(format!("epsilon must be finite and >= 0, got {epsilon}")));
        }
        let k_dev = hermiticity_deviation(&kinetic);
        if k_dev > MODEL_TOLERANCE * max_abs(&kinetic).max(1.0) {
            return Err(Error::InvalidModel(format!("kinetic matrix is not Hermitian (max asymmetry {k_dev:e})")));
        }
        let p_dev = hermiticity_deviation(&potential);
        if p_dev > MODEL_TOLERANCE * max_abs(&potential).max(1.0) {
            return Err(Error::InvalidModel(format!("pair potential is not Hermitian (max asymmetry {p_dev:e})")));
        }
        let swap = swap_matrix(dim);
        let s_dev = max_abs(&(&swap * &potential * &swap - &potential));
        if s_dev > MODEL_TOLERANCE * max_abs(&potential).max(1.0) {
            return Err(Error::InvalidModel(format!("pair potential is not swap symmetric (max deviation {s_dev:e})")));
        }
        Ok(Self { dim, kinetic, potential, epsilon })
    }

    /// Model with `Φ = 0`.
    pub fn free(kinetic: CMatrix) -> Result<Self> {
        let d = kinetic.nrows();
        Self::new(kinetic, CMatrix::zeros(d * d, d * d), 0.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kinetic(&self) -> &CMatrix {
        &self.kinetic
    }

    pub fn potential(&self) -> &CMatrix {
        &self.potential
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.kinetic.clone(), self.potential.clone(), epsilon)
    }

    /// Same model with `Φ` multiplied by `factor`.
    pub fn with_potential_scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            kinetic: self.kinetic.clone(),
            potential: self.potential.scale(factor),
            epsilon: self.epsilon,
        }
    }

    pub fn without_interaction(&self) -> Self {
        self.with_potential_scaled(0.0)
    }

    pub fn has_interaction(&self) -> bool {
        max_abs(&self.potential) > 0.0
    }

    /// Operator norm of `Φ` on the two-particle space.
    pub fn potential_norm(&self) -> f64 {
        operator_norm(&self.potential)
    }
}

/// Tensor-factor exchange on `C^d ⊗ C^d`.
pub fn swap_matrix(d: usize) -> CMatrix {
    let mut s = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            s[(i * d + j, j * d + i)] = C64::new(1.0, 0.0);
        }
    }
    s
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Largest singular value.
pub fn operator_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Sum of singular values.
pub fn trace_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.sum()
}

/// Eigenvalues of the Hermitian part, ascending.
pub fn hermitian_spectrum(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()).scale(0.5);
    let mut v: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Number of particles encoded by a `d^s x d^s` matrix.
pub fn particle_count_for(dim: usize, size: usize) -> Option<usize> {
    let mut s = 0;
    let mut acc = 1usize;
    while acc < size {
        acc *= dim;
        s += 1;
    }
    (acc == size).then_some(s)
}

fn check_distinct(labels: &[usize]) -> Result<()> {
    for (i, a) in labels.iter().enumerate() {
        if labels[..i].contains(a) {
            return Err(Error::DuplicateIndex(*a));
        }
    }
    Ok(())
}

/// Dense operator on the tensor product of the listed particles.
#[derive(Clone, Debug, PartialEq)]
pub struct NBodyOperator {
    dim: usize,
    particles: Vec<usize>,
    matrix: CMatrix,
}

impl NBodyOperator {
    pub fn new(dim: usize, particles: Vec<usize>, matrix: CMatrix) -> Result<Self> {
        check_distinct(&particles)?;
        let size = dim.pow(particles.len() as u32);
        if matrix.nrows() != size || matrix.ncols() != size {
            return Err(Error::DimensionMismatch(format!(
                "{} particles of dimension {dim} need a {size}x{size} matrix, got {}x{}",
                particles.len(),
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { dim, particles, matrix })
    }

    /// Operator on particles `1..=s`, with `s` inferred from the matrix size.
    pub fn on_leading(dim: usize, matrix: CMatrix) -> Result<Self> {
        let s = particle_count_for(dim, matrix.nrows()).ok_or_else(|| {
            Error::DimensionMismatch(format!("{} is not a power of {dim}", matrix.nrows()))
        })?;
        Self::new(dim, (1..=s).collect(), matrix)
    }

    pub fn scalar(dim: usize, value: C64) -> Self {
        Self { dim, particles: Vec::new(), matrix: CMatrix::from_element(1, 1, value) }
    }

    pub fn identity(dim: usize, particles: Vec<usize>) -> Result<Self> {
        let size = dim.pow(particles.len() as u32);
        Self::new(dim, particles, CMatrix::identity(size, size))
    }

    pub fn zeros(dim: usize, particles: Vec<usize>) -> Result<Self> {
        let size = dim.pow(particles.len() as u32);
        Self::new(dim, particles, CMatrix::zeros(size, size))
    }

    /// `⊗_i single` over the listed particles.
    pub fn product(dim: usize, particles: Vec<usize>, single: &CMatrix) -> Result<Self> {
        let mut m = CMatrix::identity(1, 1);
        for _ in &particles {
            m = local::kron(&m, single);
        }
        Self::new(dim, particles, m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn particles(&self) -> &[usize] {
        &self.particles
    }

    pub fn particle_count(&self) -> usize {
        self.particles.len()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Same matrix with new labels.
    pub fn relabeled(&self, particles: Vec<usize>) -> Result<Self> {
        Self::new(self.dim, particles, self.matrix.clone())
    }

    /// Tensor positions of `subset` inside this operator's particle list.
    pub fn positions_of(&self, subset: &[usize]) -> Result<Vec<usize>> {
        check_distinct(subset)?;
        subset
            .iter()
            .map(|p| {
                self.particles
                    .iter()
                    .position(|q| q == p)
                    .ok_or_else(|| Error::IndexOutOfRange { index: *p, host: self.particles.clone() })
            })
            .collect()
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { dim: self.dim, particles: self.particles.clone(), matrix: self.matrix.scale(c) }
    }

    pub fn scaled_complex(&self, c: C64) -> Self {
        Self { dim: self.dim, particles: self.particles.clone(), matrix: &self.matrix * c }
    }

    /// Sum with an operator on the same particle set (any order).
    pub fn add(&self, other: &Self) -> Result<Self> {
        let aligned = other.aligned_to(&self.particles)?;
        Ok(Self { dim: self.dim, particles: self.particles.clone(), matrix: &self.matrix + aligned.matrix })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let aligned = other.aligned_to(&self.particles)?;
        Ok(Self { dim: self.dim, particles: self.particles.clone(), matrix: &self.matrix - aligned.matrix })
    }

    pub(crate) fn add_scaled_assign(&mut self, c: f64, other: &Self) -> Result<()> {
        let aligned = other.aligned_to(&self.particles)?;
        self.matrix += aligned.matrix.scale(c);
        Ok(())
    }

    /// Reorders tensor factors so that the particle list becomes `order`.
    pub fn aligned_to(&self, order: &[usize]) -> Result<Self> {
        if order == self.particles.as_slice() {
            return Ok(self.clone());
        }
        if order.len() != self.particles.len() {
            return Err(Error::NotSubset { subset: self.particles.clone(), host: order.to_vec() });
        }
        let perm = self.positions_of(order)?;
        let m = local::permute_factors(self.dim, self.particles.len(), &perm, &self.matrix);
        Self::new(self.dim, order.to_vec(), m)
    }

    /// Tensor product with an operator on disjoint particles.
    pub fn kron(&self, other: &Self) -> Result<Self> {
        let mut particles = self.particles.clone();
        particles.extend_from_slice(&other.particles);
        Self::new(self.dim, particles, local::kron(&self.matrix, &other.matrix))
    }

    /// Embeds into `host ⊇ particles`, padding with identities.
    pub fn embed(&self, host: &[usize]) -> Result<Self> {
        check_distinct(host)?;
        let positions: Vec<usize> = self
            .particles
            .iter()
            .map(|p| {
                host.iter().position(|q| q == p).ok_or_else(|| Error::NotSubset {
                    subset: self.particles.clone(),
                    host: host.to_vec(),
                })
            })
            .collect::<Result<_>>()?;
        let m = local::embed(self.dim, host.len(), &positions, &self.matrix);
        Self::new(self.dim, host.to_vec(), m)
    }

    /// Partial trace over everything outside `keep`.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let positions = self.positions_of(keep).map_err(|e| match e {
            Error::IndexOutOfRange { .. } => Error::NotSubset { subset: keep.to_vec(), host: self.particles.clone() },
            other => other,
        })?;
        let m = local::partial_trace(self.dim, self.particles.len(), &positions, &self.matrix);
        Self::new(self.dim, keep.to_vec(), m)
    }

    /// `U X U†` with `u` acting on `support` (in that order).
    pub fn conjugated(&self, u: &CMatrix, support: &[usize]) -> Result<Self> {
        let pos = self.positions_of(support)?;
        let m = local::conjugate(self.dim, self.particles.len(), &pos, u, &self.matrix);
        Self::new(self.dim, self.particles.clone(), m)
    }

    /// `X A - A X` with `a` acting on `support`.
    pub fn commutator_with(&self, a: &CMatrix, support: &[usize]) -> Result<Self> {
        let pos = self.positions_of(support)?;
        let m = local::commutator(self.dim, self.particles.len(), &pos, &self.matrix, a);
        Self::new(self.dim, self.particles.clone(), m)
    }

    /// Conjugation by the transposition of tensor positions `a` and `b`.
    pub fn transposed_positions(&self, a: usize, b: usize) -> Self {
        let n = self.particles.len();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.swap(a, b);
        let m = local::permute_factors(self.dim, n, &perm, &self.matrix);
        Self { dim: self.dim, particles: self.particles.clone(), matrix: m }
    }

    /// Average of `P(π) X P(π)⁻¹` over all permutations of the tensor factors.
    pub fn symmetrized(&self) -> Self {
        let n = self.particles.len();
        let perms = permutations(n);
        let mut acc = CMatrix::zeros(self.matrix.nrows(), self.matrix.ncols());
        for p in &perms {
            acc += local::permute_factors(self.dim, n, p, &self.matrix);
        }
        Self { dim: self.dim, particles: self.particles.clone(), matrix: acc.scale(1.0 / perms.len() as f64) }
    }

    /// Average over permutations of the factors at `positions` only.
    pub fn symmetrized_over(&self, positions: &[usize]) -> Self {
        let n = self.particles.len();
        let perms = permutations(positions.len());
        let mut acc = CMatrix::zeros(self.matrix.nrows(), self.matrix.ncols());
        for p in &perms {
            let mut full: Vec<usize> = (0..n).collect();
            for (k, &pk) in p.iter().enumerate() {
                full[positions[k]] = positions[pk];
            }
            acc += local::permute_factors(self.dim, n, &full, &self.matrix);
        }
        Self { dim: self.dim, particles: self.particles.clone(), matrix: acc.scale(1.0 / perms.len() as f64) }
    }

    pub fn hermitian_part(&self) -> Self {
        Self {
            dim: self.dim,
            particles: self.particles.clone(),
            matrix: (&self.matrix + self.matrix.adjoint()).scale(0.5),
        }
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        hermiticity_deviation(&self.matrix)
    }

    pub fn symmetry_deviation(&self) -> f64 {
        check_symmetry(self)
    }

    pub fn op_norm(&self) -> f64 {
        operator_norm(&self.matrix)
    }

    pub fn trace_norm(&self) -> f64 {
        trace_norm(&self.matrix)
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }

    /// Operator norm of `self - other` after aligning particle orders.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.op_norm())
    }
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Embeds `op` (acting on its own particles) into `host`.
pub fn embed(op: &NBodyOperator, host: &[usize]) -> Result<NBodyOperator> {
    op.embed(host)
}

/// Traces out every particle not in `keep`.
pub fn partial_trace(op: &NBodyOperator, keep: &[usize]) -> Result<NBodyOperator> {
    op.partial_trace(keep)
}

/// Max operator-norm deviation under adjacent transpositions of the factors.
pub fn check_symmetry(op: &NBodyOperator) -> f64 {
    let n = op.particle_count();
    (1..n)
        .map(|k| operator_norm(&(op.transposed_positions(k - 1, k).matrix - &op.matrix)))
        .fold(0.0, f64::max)
}

/// Truncated sequence `(G_0, G_1, ..., G_S)` of marginal observables; entry
/// `s` acts on particles `1..=s`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableSequence {
    dim: usize,
    entries: Vec<NBodyOperator>,
}

impl ObservableSequence {
    /// Builds a sequence from `G_0, ..., G_S`; every entry must be
    /// permutation symmetric.
    pub fn new(dim: usize, entries: Vec<CMatrix>) -> Result<Self> {
        let seq = Self::from_matrices(dim, entries)?;
        for e in &seq.entries {
            let dev = check_symmetry(e);
            if dev > SYMMETRY_TOLERANCE {
                return Err(Error::InvalidArgument(format!(
                    "entry {} is not permutation symmetric (deviation {dev:e})",
                    e.particle_count()
                )));
            }
        }
        Ok(seq)
    }

    pub(crate) fn from_matrices(dim: usize, entries: Vec<CMatrix>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("a sequence needs at least G_0".into()));
        }
        let entries = entries
            .into_iter()
            .enumerate()
            .map(|(s, m)| NBodyOperator::new(dim, (1..=s).collect(), m))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim, entries })
    }

    pub(crate) fn from_operators(dim: usize, entries: Vec<NBodyOperator>) -> Self {
        Self { dim, entries }
    }

    pub fn zeros(dim: usize, truncation: usize) -> Self {
        let entries = (0..=truncation)
            .map(|s| NBodyOperator::zeros(dim, (1..=s).collect()).expect("consistent sizes"))
            .collect();
        Self { dim, entries }
    }

    /// `(0, ..., 0, g_k, 0, ..., 0)` truncated at `truncation`.
    pub fn single_entry(dim: usize, truncation: usize, op: CMatrix) -> Result<Self> {
        let op = NBodyOperator::on_leading(dim, op)?;
        let k = op.particle_count();
        if k > truncation {
            return Err(Error::InvalidArgument(format!("entry {k} exceeds truncation {truncation}")));
        }
        let mut seq = Self::zeros(dim, truncation);
        seq.entries[k] = op;
        Ok(seq)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn truncation(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn entry(&self, s: usize) -> &NBodyOperator {
        &self.entries[s]
    }

    pub fn entries(&self) -> &[NBodyOperator] {
        &self.entries
    }

    /// Entry `s` multiplied by `factor^s`.
    pub fn scaled_by_power(&self, factor: f64) -> Self {
        let entries = self
            .entries
            .iter()
            .enumerate()
            .map(|(s, e)| e.scaled(factor.powi(s as i32)))
            .collect();
        Self { dim: self.dim, entries }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let n = self.entries.len().min(other.entries.len());
        let entries = (0..n).map(|s| self.entries[s].sub(&other.entries[s])).collect::<Result<_>>()?;
        Ok(Self { dim: self.dim, entries })
    }

    pub fn gamma_norm(&self, gamma: f64) -> Result<f64> {
        gamma_norm(self, gamma)
    }

    pub fn max_symmetry_deviation(&self) -> f64 {
        self.entries.iter().map(check_symmetry).fold(0.0, f64::max)
    }

    pub fn max_hermiticity_deviation(&self) -> f64 {
        self.entries.iter().map(|e| e.hermiticity_deviation()).fold(0.0, f64::max)
    }
}

/// Truncated state sequence `(1, F_1, ..., F_S)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSequence {
    dim: usize,
    entries: Vec<NBodyOperator>,
}

impl StateSequence {
    /// Builds `(1, F_1, ..., F_S)` from `F_1, ..., F_S`.
    pub fn new(dim: usize, marginals: Vec<CMatrix>) -> Result<Self> {
        let mut entries = vec![NBodyOperator::scalar(dim, C64::new(1.0, 0.0))];
        for (k, m) in marginals.into_iter().enumerate() {
            let op = NBodyOperator::new(dim, (1..=k + 1).collect(), m)?;
            let herm = op.hermiticity_deviation();
            let sym = check_symmetry(&op);
            if herm > SYMMETRY_TOLERANCE || sym > SYMMETRY_TOLERANCE {
                return Err(Error::InvalidArgument(format!(
                    "F_{} must be Hermitian and symmetric (hermiticity {herm:e}, symmetry {sym:e})",
                    k + 1
                )));
            }
            entries.push(op);
        }
        Ok(Self { dim, entries })
    }

    /// Chaos data `(1, f, f⊗f, ..., f^{⊗S})`.
    pub fn chaos(single: &CMatrix, truncation: usize) -> Result<Self> {
        let dim = single.nrows();
        let marginals = (1..=truncation)
            .map(|s| NBodyOperator::product(dim, (1..=s).collect(), single).map(|o| o.into_matrix()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, marginals)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn truncation(&self) -> usize {
        self.entries.len() - 1
    }

    pub fn entry(&self, s: usize) -> &NBodyOperator {
        &self.entries[s]
    }

    pub fn entries(&self) -> &[NBodyOperator] {
        &self.entries
    }

    /// Sum of trace norms of all entries.
    pub fn trace_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.trace_norm()).sum()
    }
}

/// Per-`n` terms `(1/n!) Tr(g_n f_n)` of the duality pairing, up to the
/// shorter truncation.
pub fn pairing_terms(g: &ObservableSequence, f: &StateSequence) -> Result<Vec<C64>> {
    if g.dim != f.dim {
        return Err(Error::DimensionMismatch(format!("single-particle dimensions {} and {}", g.dim, f.dim)));
    }
    let top = g.truncation().min(f.truncation());
    (0..=top)
        .map(|n| {
            let (gn, fn_) = (&g.entries[n], &f.entries[n]);
            if gn.matrix.shape() != fn_.matrix.shape() {
                return Err(Error::DimensionMismatch(format!("entry {n} shapes differ")));
            }
            // Tr(g f) = Σ_ij g_ij f_ji
            let tr: C64 = gn.matrix.iter().zip(fn_.matrix.transpose().iter()).map(|(a, b)| a * b).sum();
            Ok(tr / factorial(n))
        })
        .collect()
}

/// `Σ_n (1/n!) Tr(g_n f_n)`, real part.
pub fn dual_pairing(g: &ObservableSequence, f: &StateSequence) -> Result<f64> {
    Ok(dual_pairing_complex(g, f)?.re)
}

pub fn dual_pairing_complex(g: &ObservableSequence, f: &StateSequence) -> Result<C64> {
    Ok(pairing_terms(g, f)?.into_iter().sum())
}

/// `max_n γ^n/n! ‖g_n‖`.
pub fn gamma_norm(g: &ObservableSequence, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::GammaOutOfRange(gamma));
    }
    Ok(g.entries
        .iter()
        .enumerate()
        .map(|(n, e)| gamma.powi(n as i32) / factorial(n) * e.op_norm())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::Fixtures;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn embed_on_second_particle_pads_first() {
        let g = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(2.0), c(-3.0)]));
        let op = NBodyOperator::new(2, vec![2], g.clone()).unwrap();
        let e = op.embed(&[1, 2]).unwrap();
        let expected = CMatrix::identity(2, 2).kronecker(&g);
        assert_eq!(e.matrix(), &expected);
    }

    #[test]
    fn embed_into_own_support_is_noop() {
        let mut fx = Fixtures::new(3);
        let g = NBodyOperator::new(2, vec![1, 2], fx.hermitian(4)).unwrap();
        assert_eq!(g.embed(&[1, 2]).unwrap(), g);
    }

    #[test]
    fn embed_gap_then_permute_equals_adjacent_embed() {
        let mut fx = Fixtures::new(5);
        let m = fx.hermitian(4);
        let g13 = NBodyOperator::new(2, vec![1, 3], m.clone()).unwrap();
        let g12 = NBodyOperator::new(2, vec![1, 2], m).unwrap();
        let host = [1, 2, 3];
        let lhs = g13.embed(&host).unwrap().transposed_positions(1, 2);
        let rhs = g12.embed(&host).unwrap();
        // explicit 8x8 comparison
        for r in 0..8 {
            for k in 0..8 {
                assert_eq!(lhs.matrix()[(r, k)], rhs.matrix()[(r, k)]);
            }
        }
    }

    #[test]
    fn embed_rejects_bad_hosts() {
        let g = NBodyOperator::identity(2, vec![4]).unwrap();
        assert!(matches!(g.embed(&[1, 2]), Err(Error::NotSubset { .. })));
        assert!(matches!(g.embed(&[4, 4]), Err(Error::DuplicateIndex(4))));
        assert!(matches!(NBodyOperator::identity(2, vec![1, 1]), Err(Error::DuplicateIndex(1))));
    }

    #[test]
    fn partial_trace_of_product_state() {
        let mut fx = Fixtures::new(11);
        let a = fx.hermitian(2);
        let b = fx.hermitian(2);
        let ab = NBodyOperator::new(2, vec![1, 2], a.kronecker(&b)).unwrap();
        let kept = ab.partial_trace(&[1]).unwrap();
        assert!(crate::tensor::max_abs(&(kept.matrix() - &a * b.trace())) < 1e-14);
        assert_eq!(ab.partial_trace(&[1, 2]).unwrap(), ab);
        assert!(matches!(ab.partial_trace(&[3]), Err(Error::NotSubset { .. })));
    }

    #[test]
    fn partial_trace_of_swap_is_identity() {
        let swap = NBodyOperator::new(2, vec![1, 2], swap_matrix(2)).unwrap();
        let kept = swap.partial_trace(&[1]).unwrap();
        assert_eq!(kept.matrix(), &CMatrix::identity(2, 2));
    }

    #[test]
    fn trace_survives_partial_trace() {
        let mut fx = Fixtures::new(2);
        let x = NBodyOperator::new(2, vec![1, 2, 3], fx.complex_matrix(8)).unwrap();
        let t = x.partial_trace(&[3, 1]).unwrap().trace();
        assert!((t - x.trace()).norm() < 1e-13);
    }

    #[test]
    fn pairing_of_scalar_and_trace_entries() {
        let mut fx = Fixtures::new(4);
        let rho = fx.density_matrix(2, 0.7);
        let f = StateSequence::chaos(&rho, 3).unwrap();
        let mut g = ObservableSequence::zeros(2, 3);
        g.entries[0] = NBodyOperator::scalar(2, c(1.0));
        assert!((dual_pairing(&g, &f).unwrap() - 1.0).abs() < 1e-15);
        let g = ObservableSequence::single_entry(2, 3, CMatrix::identity(2, 2)).unwrap();
        assert!((dual_pairing(&g, &f).unwrap() - 0.7).abs() < 1e-14);
    }

    #[test]
    fn pairing_matches_naive_double_loop() {
        let mut fx = Fixtures::new(8);
        let g2 = fx.symmetric_hermitian(2, 2);
        let f2 = fx.symmetric_hermitian(2, 2);
        let g = ObservableSequence::single_entry(2, 2, g2.clone()).unwrap();
        let f = StateSequence::new(2, vec![CMatrix::zeros(2, 2), f2.clone()]).unwrap();
        let mut naive = C64::new(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                naive += g2[(i, j)] * f2[(j, i)];
            }
        }
        let value = dual_pairing_complex(&g, &f).unwrap();
        assert!((value - naive * 0.5).norm() < 1e-13);
        assert!(value.im.abs() < 1e-10);
    }

    #[test]
    fn gamma_norm_simple_cases() {
        let g = ObservableSequence::single_entry(2, 3, CMatrix::identity(2, 2)).unwrap();
        assert!((gamma_norm(&g, 0.1).unwrap() - 0.1).abs() < 1e-15);
        let mut g = ObservableSequence::zeros(2, 2);
        g.entries[0] = NBodyOperator::scalar(2, c(-2.5));
        assert!((gamma_norm(&g, 0.3).unwrap() - 2.5).abs() < 1e-15);
        assert!(matches!(gamma_norm(&g, 1.0), Err(Error::GammaOutOfRange(_))));
        assert!(matches!(gamma_norm(&g, 0.0), Err(Error::GammaOutOfRange(_))));
    }

    #[test]
    fn gamma_norm_matches_eigen_oracle() {
        let mut fx = Fixtures::new(21);
        let entries = vec![
            CMatrix::from_element(1, 1, c(0.3)),
            fx.hermitian(2).scale(4.0),
            fx.symmetric_hermitian(2, 2).scale(9.0),
            fx.symmetric_hermitian(2, 3).scale(40.0),
        ];
        let g = ObservableSequence::new(2, entries.clone()).unwrap();
        let gamma: f64 = 0.2;
        let oracle = entries
            .iter()
            .enumerate()
            .map(|(n, m)| {
                let gram = m.adjoint() * m;
                let top = SymmetricEigen::new(gram).eigenvalues.max().max(0.0).sqrt();
                gamma.powi(n as i32) / factorial(n) * top
            })
            .fold(0.0, f64::max);
        assert!((gamma_norm(&g, gamma).unwrap() - oracle).abs() < 1e-12 * oracle);
    }

    #[test]
    fn symmetry_check_cases() {
        let mut fx = Fixtures::new(13);
        let x = NBodyOperator::new(2, vec![1, 2, 3], fx.complex_matrix(8)).unwrap();
        assert!(check_symmetry(&x.symmetrized()) < 1e-12);
        let a = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(0.0)]));
        let b = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.0), c(1.0)]));
        let ab = NBodyOperator::new(2, vec![1, 2], a.kronecker(&b)).unwrap();
        // P(a⊗b)P = b⊗a, and ‖a⊗b − b⊗a‖ = ‖diag(0,1,-1,0)‖ = 1
        assert!((check_symmetry(&ab) - 1.0).abs() < 1e-14);
        let one = NBodyOperator::new(2, vec![1], fx.complex_matrix(2)).unwrap();
        assert_eq!(check_symmetry(&one), 0.0);
    }

    #[test]
    fn model_validation() {
        let mut fx = Fixtures::new(1);
        let k = fx.hermitian(2);
        let phi = fx.swap_symmetric_potential(2);
        assert!(ParticleModel::new(k.clone(), phi.clone(), 0.5).is_ok());
        let mut bad = k.clone();
        bad[(0, 1)] += C64::new(0.1, 0.0);
        assert!(matches!(ParticleModel::new(bad, phi.clone(), 0.5), Err(Error::InvalidModel(_))));
        let lopsided = CMatrix::identity(2, 2).kronecker(&fx.hermitian(2));
        assert!(matches!(ParticleModel::new(k.clone(), lopsided, 0.5), Err(Error::InvalidModel(_))));
        assert!(ParticleModel::new(k, phi, -1.0).is_err());
    }

    #[test]
    fn sequence_rejects_asymmetric_entries() {
        let a = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(0.0)]));
        let entries = vec![CMatrix::zeros(1, 1), CMatrix::zeros(2, 2), a.kronecker(&CMatrix::identity(2, 2))];
        assert!(ObservableSequence::new(2, entries).is_err());
    }

    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn trace_after_embed_scales_by_identity_dimension(seed in 0u64..1000, pad in 1usize..3) {
            let mut fx = Fixtures::new(seed);
            let op = NBodyOperator::new(2, vec![2], fx.hermitian(2)).unwrap();
            let host: Vec<usize> = (1..=1 + pad).collect();
            let back = op.embed(&host).unwrap().partial_trace(&[2]).unwrap();
            let expected = op.matrix() * C64::new(2f64.powi(pad as i32), 0.0);
            prop_assert!(crate::tensor::max_abs(&(back.matrix() - expected)) < 1e-13 * 2f64.powi(pad as i32));
        }

        #[test]
        fn pairing_is_bilinear(seed in 0u64..1000, alpha in -3.0f64..3.0) {
            let mut fx = Fixtures::new(seed);
            let g = fx.observable_sequence(2, 3);
            let h = fx.observable_sequence(2, 3);
            let f = StateSequence::chaos(&fx.density_matrix(2, 0.3), 3).unwrap();
            let combo = ObservableSequence::from_operators(
                2,
                g.entries().iter().zip(h.entries()).map(|(a, b)| a.scaled(alpha).add(b).unwrap()).collect(),
            );
            let lhs = dual_pairing(&combo, &f).unwrap();
            let rhs = alpha * dual_pairing(&g, &f).unwrap() + dual_pairing(&h, &f).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
