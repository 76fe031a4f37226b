//! Dual hierarchy for observables: the cumulant solution expansion, a closed
//! ODE oracle for the truncated hierarchy, the additive-observable shortcut,
//! the mean-value functional and the a priori norm bound.

use crate::combinatorics::{factorial, injective_assignments, subsets, ClusterElement};
use crate::cumulants::{Cumulants, Direction};
use crate::dynamics::{liouvillian_int, HamiltonianSet};
use crate::error::{Error, Result};
use crate::ode::{integrate, OdeOptions};
use crate::tensor::{pairing_terms, NBodyOperator, ObservableSequence, ParticleModel, StateSequence};
use crate::{CMatrix, C64};

fn check_truncation(g0: &ObservableSequence, set: &HamiltonianSet) -> Result<()> {
    if g0.dim() != set.dim() {
        return Err(Error::DimensionMismatch(format!("sequence dimension {} vs model {}", g0.dim(), set.dim())));
    }
    if g0.truncation() > set.max_particles() {
        return Err(Error::TooManyParticles { requested: g0.truncation(), max: set.max_particles() });
    }
    Ok(())
}

fn labels(s: usize) -> Vec<usize> {
    (1..=s).collect()
}

fn complement(y: &[usize], x: &[usize]) -> Vec<usize> {
    y.iter().copied().filter(|p| !x.contains(p)).collect()
}

/// `G_s(t) = Σ_n Σ_{X⊆Y, |X|=n} 𝔄_{1+n}(t, {Y\X}, X) G_{s-n}(0, Y\X)`.
pub fn evolve_expansion(g0: &ObservableSequence, t: f64, set: &HamiltonianSet) -> Result<ObservableSequence> {
    check_truncation(g0, set)?;
    let c = Cumulants::new(set, t)?;
    let entries = (0..=g0.truncation()).map(|s| expansion_entry(g0, s, &c, false)).collect::<Result<_>>()?;
    Ok(ObservableSequence::from_operators(g0.dim(), entries))
}

/// Same expansion evaluated as the literal ordered-tuple sum with `1/n!`.
pub fn evolve_expansion_ordered(g0: &ObservableSequence, t: f64, set: &HamiltonianSet) -> Result<ObservableSequence> {
    check_truncation(g0, set)?;
    let c = Cumulants::new(set, t)?;
    let entries = (0..=g0.truncation()).map(|s| expansion_entry(g0, s, &c, true)).collect::<Result<_>>()?;
    Ok(ObservableSequence::from_operators(g0.dim(), entries))
}

fn expansion_entry(g0: &ObservableSequence, s: usize, c: &Cumulants, ordered: bool) -> Result<NBodyOperator> {
    let dim = g0.dim();
    let y = labels(s);
    let mut acc = NBodyOperator::zeros(dim, y.clone())?;
    if s == 0 {
        return Ok(g0.entry(0).clone());
    }
    // n = s would act on the scalar G_0, where every partition term is the same
    // multiple of the identity and the weights sum to zero.
    for n in 0..s {
        let tuples: Vec<Vec<usize>> = if ordered { injective_assignments(n, s) } else { subsets(&y, n) };
        let scale = if ordered { 1.0 / factorial(n) } else { 1.0 };
        for x in &tuples {
            let rest = complement(&y, x);
            let target = g0.entry(s - n).relabeled(rest.clone())?.embed(&y)?;
            let mut ground = vec![ClusterElement::Aggregate(rest)];
            ground.extend(x.iter().map(|&j| ClusterElement::Single(j)));
            let term = c.apply(Direction::Forward, &ground, &target)?;
            acc.add_scaled_assign(scale, &term)?;
        }
    }
    Ok(acc)
}

/// `Σ_{j₁≠j₂} 𝒩_int(j₁,j₂) G_{s-1}(Y\j₁)` on `Y = (1..s)`, without `ε`.
pub fn hierarchy_coupling(model: &ParticleModel, lower: &NBodyOperator, s: usize) -> Result<NBodyOperator> {
    let y = labels(s);
    let mut acc = NBodyOperator::zeros(model.dim(), y.clone())?;
    if s < 2 {
        return Ok(acc);
    }
    for &j1 in &y {
        let g = lower.relabeled(complement(&y, &[j1]))?.embed(&y)?;
        for &j2 in &y {
            if j2 != j1 {
                acc.add_scaled_assign(1.0, &liouvillian_int(model, j1, j2, &g)?)?;
            }
        }
    }
    Ok(acc)
}

/// Same coupling with `potential` in place of the model potential, assuming
/// `lower` is permutation symmetric: the `j₁ = s` term is computed once and
/// moved to every other `j₁` by a transposition of tensor factors.
pub fn symmetric_coupling(potential: &CMatrix, lower: &NBodyOperator, s: usize) -> Result<NBodyOperator> {
    let y = labels(s);
    let dim = lower.dim();
    let mut acc = NBodyOperator::zeros(dim, y.clone())?;
    if s < 2 {
        return Ok(acc);
    }
    let g = lower.relabeled(labels(s - 1))?.embed(&y)?;
    let mut base = NBodyOperator::zeros(dim, y.clone())?;
    for j2 in 1..s {
        base.add_scaled_assign(1.0, &g.commutator_with(potential, &[s, j2])?)?;
    }
    let base = base.scaled_complex(C64::new(0.0, -1.0));
    for j1 in 1..=s {
        let moved = if j1 == s { base.clone() } else { base.transposed_positions(j1 - 1, s - 1) };
        acc.add_scaled_assign(1.0, &moved)?;
    }
    Ok(acc)
}

/// Right-hand side of the hierarchy: the diagonal generator of `diag` on each
/// entry plus `coupling` times [`hierarchy_coupling`].
pub fn hierarchy_rhs(
    g: &ObservableSequence,
    diag: &HamiltonianSet,
    model: &ParticleModel,
    coupling: f64,
) -> Result<ObservableSequence> {
    let mut out = Vec::with_capacity(g.truncation() + 1);
    for s in 0..=g.truncation() {
        let mut d = diag.generator(g.entry(s))?;
        if s >= 2 && coupling != 0.0 {
            d.add_scaled_assign(coupling, &hierarchy_coupling(model, g.entry(s - 1), s)?)?;
        }
        out.push(d);
    }
    Ok(ObservableSequence::from_operators(g.dim(), out))
}

fn pack(g: &ObservableSequence) -> Vec<C64> {
    g.entries().iter().flat_map(|e| e.matrix().iter().copied()).collect()
}

fn unpack(dim: usize, truncation: usize, y: &[C64]) -> ObservableSequence {
    let mut offset = 0;
    let mut entries = Vec::with_capacity(truncation + 1);
    for s in 0..=truncation {
        let n = dim.pow(s as u32);
        let m = CMatrix::from_column_slice(n, n, &y[offset..offset + n * n]);
        offset += n * n;
        entries.push(NBodyOperator::new(dim, labels(s), m).expect("consistent sizes"));
    }
    ObservableSequence::from_operators(dim, entries)
}

/// Integrates the truncated hierarchy with the given diagonal dynamics and
/// coupling strength. The system is lower triangular, so the truncation is
/// exact.
pub fn integrate_hierarchy(
    g0: &ObservableSequence,
    t: f64,
    diag: &HamiltonianSet,
    model: &ParticleModel,
    coupling: f64,
    opts: &OdeOptions,
) -> Result<ObservableSequence> {
    check_truncation(g0, diag)?;
    let (dim, top) = (g0.dim(), g0.truncation());
    let mut failure = None;
    let y = integrate(
        |_, y| {
            let g = unpack(dim, top, y);
            match hierarchy_rhs(&g, diag, model, coupling) {
                Ok(r) => pack(&r),
                Err(e) => {
                    failure.get_or_insert(e);
                    vec![C64::new(0.0, 0.0); y.len()]
                }
            }
        },
        0.0,
        pack(g0),
        t,
        opts,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(unpack(dim, top, &y))
}

/// Direct integration of the dual hierarchy at local tolerance `1e-12`.
pub fn evolve_ode_oracle(g0: &ObservableSequence, t: f64, set: &HamiltonianSet) -> Result<ObservableSequence> {
    let model = set.model().clone();
    integrate_hierarchy(g0, t, set, &model, model.epsilon(), &OdeOptions::default())
}

/// `𝔄_s(t) Σ_j g₁(j)` on `Y = (1..s)`.
pub fn additive_evolve(g1: &NBodyOperator, s: usize, t: f64, set: &HamiltonianSet) -> Result<NBodyOperator> {
    if g1.particle_count() != 1 {
        return Err(Error::InvalidArgument(format!("additive observable must act on one particle, got {}", g1.particle_count())));
    }
    if s == 0 {
        return Err(Error::InvalidArgument("additive evolution needs s >= 1".into()));
    }
    let y = labels(s);
    let mut sum = NBodyOperator::zeros(g1.dim(), y.clone())?;
    for &j in &y {
        sum.add_scaled_assign(1.0, &g1.relabeled(vec![j])?.embed(&y)?)?;
    }
    Cumulants::new(set, t)?.forward(None, &y, &sum)
}

/// Mean value with the per-`s` pairing terms kept for tail diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanValue {
    pub value: f64,
    /// `|(1/s!) Tr(G_s F_s)|` for each `s`.
    pub terms: Vec<f64>,
}

impl MeanValue {
    /// Magnitude of the last retained term.
    pub fn tail(&self) -> f64 {
        self.terms.last().copied().unwrap_or(0.0)
    }

    /// Whether the term magnitudes are non-increasing from `s = 1` on.
    pub fn monotone_tail(&self) -> bool {
        self.terms.iter().skip(1).zip(self.terms.iter().skip(2)).all(|(a, b)| b <= a)
    }
}

pub fn mean_value(g: &ObservableSequence, f: &StateSequence) -> Result<MeanValue> {
    let terms = pairing_terms(g, f)?;
    let value = terms.iter().sum::<C64>().re;
    Ok(MeanValue { value, terms: terms.iter().map(|z| z.norm()).collect() })
}

/// Both sides of `‖G(t)‖_γ ≤ e²(1-γe)⁻¹ ‖G(0)‖_γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub gamma: f64,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }

    /// `‖G(t)‖_γ / ‖G(0)‖_γ`.
    pub fn ratio(&self) -> f64 {
        self.lhs * self.constant / self.rhs
    }
}

/// `e²/(1-γe)`.
pub fn bound_constant(gamma: f64) -> Result<f64> {
    let e = std::f64::consts::E;
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::GammaOutOfRange(gamma));
    }
    if gamma >= 1.0 / e {
        return Err(Error::GammaAboveInverseE(gamma));
    }
    Ok(e * e / (1.0 - gamma * e))
}

pub fn verify_bound(g0: &ObservableSequence, t: f64, gamma: f64, set: &HamiltonianSet) -> Result<BoundReport> {
    let constant = bound_constant(gamma)?;
    let gt = evolve_expansion(g0, t, set)?;
    Ok(BoundReport { gamma, t, lhs: gt.gamma_norm(gamma)?, rhs: constant * g0.gamma_norm(gamma)?, constant })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::Fixtures;
    use crate::tensor::max_abs;
    use proptest::prelude::*;

    fn setup(seed: u64, eps: f64) -> (HamiltonianSet, Fixtures) {
        let mut fx = Fixtures::new(seed);
        let model = fx.model(2, 1.0, eps);
        (HamiltonianSet::new(&model, 4).unwrap(), fx)
    }

    fn seq_distance(a: &ObservableSequence, b: &ObservableSequence) -> f64 {
        a.entries().iter().zip(b.entries()).map(|(x, y)| max_abs(&(x.matrix() - y.matrix()))).fold(0.0, f64::max)
    }

    #[test]
    fn symmetric_coupling_matches_general() {
        let (set, mut fx) = setup(15, 1.0);
        let model = set.model();
        for s in 2..=4 {
            let lower = NBodyOperator::new(2, labels(s - 1), fx.symmetric_hermitian(2, s - 1)).unwrap();
            let a = hierarchy_coupling(model, &lower, s).unwrap();
            let b = symmetric_coupling(model.potential(), &lower, s).unwrap();
            assert!(max_abs(&(a.matrix() - b.matrix())) < 1e-12);
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let (set, mut fx) = setup(1, 0.4);
        let g0 = fx.observable_sequence(2, 3);
        assert!(seq_distance(&evolve_expansion(&g0, 0.0, &set).unwrap(), &g0) < 1e-13);
    }

    #[test]
    fn free_dynamics_is_diagonal() {
        let (set, mut fx) = setup(2, 0.4);
        let free = HamiltonianSet::new(&set.model().without_interaction(), 3).unwrap();
        let g0 = fx.observable_sequence(2, 3);
        let gt = evolve_expansion(&g0, 0.7, &free).unwrap();
        for s in 1..=3 {
            let direct = free.heisenberg_map(s, 0.7, g0.entry(s)).unwrap();
            assert!(max_abs(&(gt.entry(s).matrix() - direct.matrix())) < 1e-12);
        }
    }

    #[test]
    fn expansion_matches_oracle() {
        for (seed, eps, t) in [(3, 0.4, 0.6), (4, 1.0, -1.0), (5, 0.4, 1.0)] {
            let (set, mut fx) = setup(seed, eps);
            let g0 = fx.observable_sequence(2, 3);
            let a = evolve_expansion(&g0, t, &set).unwrap();
            let b = evolve_ode_oracle(&g0, t, &set).unwrap();
            let d = a.sub(&b).unwrap().gamma_norm(0.1).unwrap();
            assert!(d <= 1e-8, "seed {seed}: {d:e}");
        }
    }

    #[test]
    fn ordered_sum_matches_subset_sum() {
        let (set, mut fx) = setup(6, 0.7);
        let g0 = fx.observable_sequence(2, 3);
        let a = evolve_expansion(&g0, 0.5, &set).unwrap();
        let b = evolve_expansion_ordered(&g0, 0.5, &set).unwrap();
        assert!(seq_distance(&a, &b) < 1e-12);
    }

    #[test]
    fn identity_observable_is_stationary() {
        let (set, _) = setup(7, 1.0);
        let mut entries = vec![CMatrix::zeros(1, 1), CMatrix::identity(2, 2)];
        entries.extend((2..=3).map(|s| CMatrix::zeros(1 << s, 1 << s)));
        let g0 = ObservableSequence::new(2, entries).unwrap();
        let gt = evolve_ode_oracle(&g0, 0.8, &set).unwrap();
        assert!(max_abs(&(gt.entry(1).matrix() - CMatrix::identity(2, 2))) < 1e-14);
    }

    #[test]
    fn single_particle_oracle_matches_group() {
        let (set, mut fx) = setup(8, 1.0);
        let g0 = fx.observable_sequence(2, 1);
        let gt = evolve_ode_oracle(&g0, 0.9, &set).unwrap();
        let direct = set.heisenberg_map(1, 0.9, g0.entry(1)).unwrap();
        assert!(max_abs(&(gt.entry(1).matrix() - direct.matrix())) < 1e-10);
    }

    #[test]
    fn oracle_time_reversal() {
        let (set, mut fx) = setup(9, 0.5);
        let g0 = fx.observable_sequence(2, 3);
        let fwd = evolve_ode_oracle(&g0, 0.7, &set).unwrap();
        let back = evolve_ode_oracle(&fwd, -0.7, &set).unwrap();
        assert!(seq_distance(&back, &g0) < 1e-9);
    }

    #[test]
    fn additive_cases() {
        let (set, mut fx) = setup(10, 0.6);
        let g1 = NBodyOperator::new(2, vec![1], fx.hermitian(2)).unwrap();
        let one = additive_evolve(&g1, 1, 0.5, &set).unwrap();
        assert!(max_abs(&(one.matrix() - set.heisenberg_map(1, 0.5, &g1).unwrap().matrix())) < 1e-13);
        let free = HamiltonianSet::new(&set.model().without_interaction(), 3).unwrap();
        assert!(additive_evolve(&g1, 3, 0.5, &free).unwrap().max_abs() < 1e-12);
        let seq = ObservableSequence::single_entry(2, 3, g1.matrix().clone()).unwrap();
        let gt = evolve_expansion(&seq, 0.5, &set).unwrap();
        for s in 1..=3 {
            let a = additive_evolve(&g1, s, 0.5, &set).unwrap();
            assert!(max_abs(&(a.matrix() - gt.entry(s).matrix())) < 1e-10);
        }
    }

    #[test]
    fn hierarchy_residual_is_second_order() {
        let (set, mut fx) = setup(11, 0.8);
        let model = set.model().clone();
        let g0 = fx.observable_sequence(2, 3);
        let t = 0.4;
        let rhs = hierarchy_rhs(&evolve_expansion(&g0, t, &set).unwrap(), &set, &model, model.epsilon()).unwrap();
        let residual = |h: f64| {
            let p = evolve_expansion(&g0, t + h, &set).unwrap();
            let m = evolve_expansion(&g0, t - h, &set).unwrap();
            let fd = p.sub(&m).unwrap();
            fd.entries()
                .iter()
                .zip(rhs.entries())
                .map(|(a, b)| max_abs(&(a.matrix().scale(0.5 / h) - b.matrix())))
                .fold(0.0, f64::max)
        };
        let ratio = residual(0.02) / residual(0.01);
        assert!((ratio - 4.0).abs() < 0.5, "{ratio}");
    }

    #[test]
    fn mean_value_cases() {
        let (_, mut fx) = setup(12, 1.0);
        let g = fx.observable_sequence(2, 3);
        let zero = StateSequence::new(2, vec![]).unwrap();
        assert!((mean_value(&g, &zero).unwrap().value - g.entry(0).matrix()[(0, 0)].re).abs() < 1e-15);
        let rho = fx.density_matrix(2, 1.0);
        let f = StateSequence::chaos(&rho.scale(0.2), 3).unwrap();
        let mv = mean_value(&g, &f).unwrap();
        assert!(mv.monotone_tail(), "{:?}", mv.terms);
        let g2 = fx.symmetric_hermitian(2, 2);
        let f2 = fx.symmetric_hermitian(2, 2);
        let gs = ObservableSequence::single_entry(2, 2, g2.clone()).unwrap();
        let fs = StateSequence::new(2, vec![CMatrix::zeros(2, 2), f2.clone()]).unwrap();
        let expect = 0.5 * (&g2 * &f2).trace().re;
        assert!((mean_value(&gs, &fs).unwrap().value - expect).abs() < 1e-13);
    }

    #[test]
    fn duality_with_full_dynamics() {
        let (set, mut fx) = setup(13, 0.9);
        let g2 = fx.symmetric_hermitian(2, 2);
        let f2 = fx.symmetric_hermitian(2, 2);
        let gs = ObservableSequence::single_entry(2, 2, g2).unwrap();
        let fs = StateSequence::new(2, vec![CMatrix::zeros(2, 2), f2]).unwrap();
        let lhs = mean_value(&evolve_expansion(&gs, 0.6, &set).unwrap(), &fs).unwrap().value;
        let ft = set.schrodinger_map(2, 0.6, fs.entry(2)).unwrap();
        let fts = StateSequence::new(2, vec![CMatrix::zeros(2, 2), ft.into_matrix()]).unwrap();
        let rhs = mean_value(&gs, &fts).unwrap().value;
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn bound_cases() {
        let e = std::f64::consts::E;
        assert!((bound_constant(0.1).unwrap() - e * e / (1.0 - 0.1 * e)).abs() < 1e-15);
        assert!(matches!(bound_constant(0.4), Err(Error::GammaAboveInverseE(_))));
        let (set, mut fx) = setup(14, 1.0);
        let g0 = fx.observable_sequence(2, 3);
        let r = verify_bound(&g0, 0.0, 0.1, &set).unwrap();
        assert!((r.ratio() - 1.0).abs() < 1e-12 && r.holds());
        for t in [0.5, 1.0, 2.0] {
            assert!(verify_bound(&g0, t, 0.1, &set).unwrap().holds());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn symmetry_and_hermiticity_preserved(seed in 0u64..1000, t in -1.0f64..1.0) {
            let (set, mut fx) = setup(seed, 0.7);
            let g0 = fx.observable_sequence(2, 3);
            let gt = evolve_expansion(&g0, t, &set).unwrap();
            prop_assert!(gt.max_symmetry_deviation() < 1e-10);
            prop_assert!(gt.max_hermiticity_deviation() < 1e-10);
        }
    }
}
