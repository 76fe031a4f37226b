//! Vlasov kinetic equation for the one-particle density operator: the
//! self-consistent ODE, the iteration series and its product form, and the
//! propagation of chaos for `k`-ary observables.

use crate::dynamics::HamiltonianSet;
use crate::error::{Error, Result};
use crate::meanfield::limit_evolve_spectral;
use crate::ode::{integrate, OdeOptions};
use crate::quadrature::Collocation;
use crate::tensor::{hermitian_spectrum, hermiticity_deviation, trace_norm, NBodyOperator, ObservableSequence, ParticleModel};
use crate::{CMatrix, C64};

/// Highest order accepted by [`vlasov_solve_series`].
pub const MAX_SERIES_ORDER: usize = 6;
/// Default number of collocation nodes per nested time integral.
pub const SERIES_NODES: usize = 24;

/// Hermitian one-particle density operator with trace `λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct OneParticleState {
    matrix: CMatrix,
}

impl OneParticleState {
    /// Accepts any Hermitian matrix (to `1e-12`, relative).
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch("state must be square".into()));
        }
        let dev = hermiticity_deviation(&matrix);
        if dev > 1e-12 * (1.0 + matrix.norm()) {
            return Err(Error::InvalidArgument(format!("state is not Hermitian (deviation {dev:e})")));
        }
        Ok(Self { matrix })
    }

    /// Additionally requires a spectrum bounded below by `-1e-12`.
    pub fn physical(matrix: CMatrix) -> Result<Self> {
        let s = Self::new(matrix)?;
        let low = s.spectrum()[0];
        if low < -1e-12 {
            return Err(Error::InvalidArgument(format!("state has negative eigenvalue {low:e}")));
        }
        Ok(s)
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn pure(psi: &[C64]) -> Self {
        let v = nalgebra::DVector::from_column_slice(psi);
        Self { matrix: &v * v.adjoint() }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Trace `λ`.
    pub fn weight(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn trace_norm(&self) -> f64 {
        trace_norm(&self.matrix)
    }

    /// Eigenvalues in ascending order.
    pub fn spectrum(&self) -> Vec<f64> {
        hermitian_spectrum(&self.matrix)
    }

    /// `f ⊗ ... ⊗ f` on particles `1..=k`.
    pub fn product(&self, k: usize) -> Result<NBodyOperator> {
        NBodyOperator::product(self.dim(), (1..=k).collect(), &self.matrix)
    }
}

/// Mean-field potential `U_f = Tr₂ Φ(1,2)(I ⊗ f)`.
pub fn mean_field_potential(model: &ParticleModel, f: &CMatrix) -> Result<CMatrix> {
    let d = model.dim();
    let phi = NBodyOperator::new(d, vec![1, 2], model.potential().clone())?;
    let ff = NBodyOperator::new(d, vec![2], f.clone())?.embed(&[1, 2])?;
    Ok(NBodyOperator::new(d, vec![1, 2], phi.matrix() * ff.matrix())?.partial_trace(&[1])?.into_matrix())
}

/// `-𝒩₀(1) f + Tr₂(-𝒩_int(1,2)) f⊗f`.
pub fn vlasov_rhs(model: &ParticleModel, f: &CMatrix) -> Result<CMatrix> {
    let d = model.dim();
    let ff = NBodyOperator::product(d, vec![1, 2], f)?;
    // -𝒩 g = i[g, A]
    let i = C64::new(0.0, 1.0);
    let kinetic = (f * model.kinetic() - model.kinetic() * f) * i;
    let inter = ff.commutator_with(model.potential(), &[1, 2])?.scaled_complex(i).partial_trace(&[1])?;
    Ok(kinetic + inter.matrix())
}

/// Adaptive solution of the Vlasov equation at tolerance `tol`.
pub fn vlasov_solve_ode(model: &ParticleModel, f0: &OneParticleState, t: f64, tol: f64) -> Result<OneParticleState> {
    let d = model.dim();
    if f0.dim() != d {
        return Err(Error::DimensionMismatch(format!("state dimension {} vs model {d}", f0.dim())));
    }
    let y0: Vec<C64> = f0.matrix.iter().copied().collect();
    let y = integrate(
        |_, y| {
            let f = CMatrix::from_column_slice(d, d, y);
            let r = vlasov_rhs(model, &f).expect("dimensions checked above");
            r.iter().copied().collect()
        },
        0.0,
        y0,
        t,
        &OdeOptions::with_tolerance(tol),
    )?;
    Ok(OneParticleState { matrix: CMatrix::from_column_slice(d, d, &y) })
}

/// Convergence radius `t₀ = (2‖Φ‖ ‖f₀‖₁)⁻¹` of the iteration series.
pub fn convergence_radius(model: &ParticleModel, f0: &OneParticleState) -> f64 {
    let denom = 2.0 * model.potential_norm() * f0.trace_norm();
    if denom == 0.0 {
        f64::INFINITY
    } else {
        1.0 / denom
    }
}

/// Truncated iteration series for `∏_{i≤k} f₁(t,i)` with its per-order terms.
#[derive(Clone, Debug)]
pub struct SeriesResult {
    pub sum: NBodyOperator,
    pub terms: Vec<NBodyOperator>,
    pub t0: f64,
}

impl SeriesResult {
    /// Trace norm of each order.
    pub fn term_norms(&self) -> Vec<f64> {
        self.terms.iter().map(|x| x.trace_norm()).collect()
    }
}

/// `k`-particle product series up to `order` interaction insertions. Each
/// insertion `Σ_{i≤m} (-𝒩_int(i, m+1))` is followed at once by the trace over
/// the new particle `m+1`, which no later flow touches. The nested integrals
/// are evaluated in the interaction picture, where the free flows become the
/// freely evolved potential `Φ_σ = 𝒢⁰₂(σ)Φ`.
pub fn product_series(
    model: &ParticleModel,
    f0: &OneParticleState,
    k: usize,
    t: f64,
    order: usize,
    nodes: usize,
) -> Result<SeriesResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("product series needs k >= 1".into()));
    }
    if f0.dim() != model.dim() {
        return Err(Error::DimensionMismatch(format!("state dimension {} vs model {}", f0.dim(), model.dim())));
    }
    let t0 = convergence_radius(model, f0);
    if t.abs() >= t0 {
        return Err(Error::OutsideRadius { t, t0 });
    }
    let d = model.dim();
    let free = HamiltonianSet::new(&model.without_interaction(), 2)?;
    let outer = free.flow(t)?;
    let ks: Vec<usize> = (1..=k).collect();
    let mut terms = vec![outer.schrodinger_each(&f0.product(k)?, &ks)?];
    if order > 0 && t != 0.0 {
        let col = Collocation::new(nodes, t)?;
        let potentials: Vec<CMatrix> = col
            .nodes
            .iter()
            .map(|&s| {
                let u = free.propagator(2, s)?;
                Ok(&u * model.potential() * u.adjoint())
            })
            .collect::<Result<_>>()?;
        for n in 1..=order {
            // R_{k+n} = f0^{⊗(k+n)} at every node
            let top = f0.product(k + n)?;
            let mut level: Vec<NBodyOperator> = vec![top; nodes];
            for m in (k..k + n).rev() {
                let kicked: Vec<NBodyOperator> =
                    level.iter().zip(&potentials).map(|(x, phi)| insertion(x, phi, m)).collect::<Result<_>>()?;
                if m == k {
                    let mut end = NBodyOperator::zeros(d, ks.clone())?;
                    for (w, x) in col.weights.iter().zip(&kicked) {
                        end.add_scaled_assign(*w, x)?;
                    }
                    level = vec![end];
                } else {
                    level = (0..nodes)
                        .map(|i| {
                            let mut acc = NBodyOperator::zeros(d, (1..=m).collect())?;
                            for (j, x) in kicked.iter().enumerate() {
                                acc.add_scaled_assign(col.integral[(i, j)], x)?;
                            }
                            Ok(acc)
                        })
                        .collect::<Result<_>>()?;
                }
            }
            terms.push(outer.schrodinger_each(&level[0], &ks)?);
        }
    } else if order > 0 {
        terms.extend((0..order).map(|_| NBodyOperator::zeros(d, ks.clone())).collect::<Result<Vec<_>>>()?);
    }
    let mut sum = terms[0].clone();
    for x in &terms[1..] {
        sum.add_scaled_assign(1.0, x)?;
    }
    Ok(SeriesResult { sum, terms, t0 })
}

/// `Tr_{m+1} Σ_{i≤m} i[X, Φ(i, m+1)]` for `X` on particles `1..=m+1`.
fn insertion(x: &NBodyOperator, phi: &CMatrix, m: usize) -> Result<NBodyOperator> {
    let mut acc = NBodyOperator::zeros(x.dim(), x.particles().to_vec())?;
    for i in 1..=m {
        acc.add_scaled_assign(1.0, &x.commutator_with(phi, &[i, m + 1])?)?;
    }
    acc.scaled_complex(C64::new(0.0, 1.0)).partial_trace(&(1..=m).collect::<Vec<_>>())
}

/// Vlasov state from the iteration series truncated at `order ≤ 6`.
#[derive(Clone, Debug)]
pub struct VlasovSeries {
    pub state: OneParticleState,
    pub terms: Vec<CMatrix>,
    pub term_norms: Vec<f64>,
    pub t0: f64,
}

pub fn vlasov_solve_series(model: &ParticleModel, f0: &OneParticleState, t: f64, order: usize) -> Result<VlasovSeries> {
    if order > MAX_SERIES_ORDER {
        return Err(Error::OrderTooLarge { order, max: MAX_SERIES_ORDER });
    }
    let r = product_series(model, f0, 1, t, order, SERIES_NODES)?;
    let term_norms = r.term_norms();
    Ok(VlasovSeries {
        state: OneParticleState { matrix: r.sum.into_matrix() },
        terms: r.terms.into_iter().map(|x| x.into_matrix()).collect(),
        term_norms,
        t0: r.t0,
    })
}

/// Deviation between the `k`-fold product series and the product of `k`
/// one-particle series, both truncated at `order`.
#[derive(Clone, Debug)]
pub struct ProductFormulaReport {
    pub k: usize,
    pub order: usize,
    pub t: f64,
    pub deviation: f64,
    /// Trace norms of the product-series orders.
    pub term_norms: Vec<f64>,
}

pub fn product_formula_check(
    model: &ParticleModel,
    f0: &OneParticleState,
    k: usize,
    t: f64,
    order: usize,
) -> Result<ProductFormulaReport> {
    if !(1..=3).contains(&k) {
        return Err(Error::InvalidArgument(format!("product formula supports k = 1..3, got {k}")));
    }
    if order > MAX_SERIES_ORDER {
        return Err(Error::OrderTooLarge { order, max: MAX_SERIES_ORDER });
    }
    let joint = product_series(model, f0, k, t, order, SERIES_NODES)?;
    let single = product_series(model, f0, 1, t, order, SERIES_NODES)?.sum;
    let mut prod = single.clone();
    for i in 2..=k {
        prod = prod.kron(&single.relabeled(vec![i])?)?;
    }
    Ok(ProductFormulaReport {
        k,
        order,
        t,
        deviation: joint.sum.sub(&prod)?.trace_norm(),
        term_norms: joint.term_norms(),
    })
}

/// Both sides of the chaos identity for a `k`-ary observable.
#[derive(Clone, Debug, PartialEq)]
pub struct ChaosReport {
    pub k: usize,
    pub t: f64,
    pub s_max: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_err: f64,
    /// Magnitude of the last included term `s = s_max`.
    pub tail_estimate: f64,
    /// `(1/s!) Tr g_s(t) ∏ f₀` for `s = k..=s_max`.
    pub terms: Vec<f64>,
}

impl ChaosReport {
    /// Whether the per-`s` terms decay in magnitude.
    pub fn decaying(&self) -> bool {
        self.terms.windows(2).all(|w| w[1].abs() <= w[0].abs())
    }
}

/// `Σ_{s=k}^{S} (1/s!) Tr g_s(t) ∏f₀` from the limit hierarchy against
/// `(1/k!) Tr g_k(0) ∏ f₁(t)` from the Vlasov ODE.
pub fn chaos_equality(
    model: &ParticleModel,
    gk: &NBodyOperator,
    f0: &OneParticleState,
    t: f64,
    s_max: usize,
) -> Result<ChaosReport> {
    let k = gk.particle_count();
    if k == 0 || s_max < k {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= s_max, got k = {k}, s_max = {s_max}")));
    }
    let d = model.dim();
    let g0 = ObservableSequence::single_entry(d, s_max, gk.relabeled((1..=k).collect())?.into_matrix())?;
    let gt = limit_evolve_spectral(&g0, t, model, SERIES_NODES)?;
    let mut terms = Vec::with_capacity(s_max - k + 1);
    for s in k..=s_max {
        let prod = f0.product(s)?;
        let tr: C64 = gt.entry(s).matrix().iter().zip(prod.matrix().transpose().iter()).map(|(a, b)| a * b).sum();
        terms.push(tr.re / crate::combinatorics::factorial(s));
    }
    let lhs: f64 = terms.iter().sum();
    let ft = vlasov_solve_ode(model, f0, t, 1e-12)?;
    let prod = ft.product(k)?;
    let rhs = (gk.relabeled((1..=k).collect())?.matrix() * prod.matrix()).trace().re / crate::combinatorics::factorial(k);
    Ok(ChaosReport {
        k,
        t,
        s_max,
        lhs,
        rhs,
        abs_err: (lhs - rhs).abs(),
        tail_estimate: terms.last().map_or(0.0, |x| x.abs()),
        terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::Fixtures;
    use crate::tensor::max_abs;

    fn setup(seed: u64) -> (ParticleModel, Fixtures) {
        let mut fx = Fixtures::new(seed);
        let model = fx.model(2, 1.0, 1.0);
        (model, fx)
    }

    #[test]
    fn rhs_cases() {
        let (model, mut fx) = setup(1);
        let f = CMatrix::identity(2, 2).scale(0.1);
        let r = vlasov_rhs(&model, &f).unwrap();
        let u = mean_field_potential(&model, &f).unwrap();
        let expect = (&u * &f - &f * &u) * C64::new(0.0, 1.0);
        assert!(max_abs(&(r - expect)) < 1e-15);
        let g = fx.density_matrix(2, 0.3);
        let free = model.without_interaction();
        let r = vlasov_rhs(&free, &g).unwrap();
        let expect = (&g * free.kinetic() - free.kinetic() * &g) * C64::new(0.0, 1.0);
        assert!(max_abs(&(r - expect)) < 1e-15);
    }

    #[test]
    fn rhs_matches_effective_hamiltonian() {
        let (model, mut fx) = setup(2);
        let f = fx.density_matrix(2, 0.2);
        // U_f by explicit index sums
        let (d, phi) = (2, model.potential());
        let u = CMatrix::from_fn(d, d, |a, b| {
            let mut acc = C64::new(0.0, 0.0);
            for c in 0..d {
                for e in 0..d {
                    acc += phi[(a * d + c, b * d + e)] * f[(e, c)];
                }
            }
            acc
        });
        let h = model.kinetic() + u;
        let expect = (&h * &f - &f * &h) * C64::new(0.0, -1.0);
        let r = vlasov_rhs(&model, &f).unwrap();
        assert!(max_abs(&(&r - expect)) < 1e-14);
        assert!(r.trace().norm() < 1e-12);
    }

    #[test]
    fn ode_is_isospectral() {
        let (model, mut fx) = setup(3);
        let f0 = OneParticleState::physical(fx.density_matrix(2, 1.0)).unwrap();
        let ft = vlasov_solve_ode(&model, &f0, 1.3, 1e-10).unwrap();
        for (a, b) in f0.spectrum().iter().zip(ft.spectrum()) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!((f0.weight() - ft.weight()).abs() < 1e-10);
        let psi = fx.unit_vector(2);
        let pure = vlasov_solve_ode(&model, &OneParticleState::pure(&psi), 1.0, 1e-10).unwrap();
        assert!(pure.spectrum()[0].abs() < 1e-8);
    }

    #[test]
    fn free_ode_is_conjugation() {
        let (model, mut fx) = setup(4);
        let free = model.without_interaction();
        let f0 = OneParticleState::new(fx.density_matrix(2, 0.5)).unwrap();
        let ft = vlasov_solve_ode(&free, &f0, 0.8, 1e-12).unwrap();
        let set = HamiltonianSet::new(&free, 1).unwrap();
        let u = set.propagator(1, -0.8).unwrap();
        assert!(max_abs(&(ft.matrix() - &u * f0.matrix() * u.adjoint())) < 1e-10);
    }

    #[test]
    fn series_matches_ode() {
        let (model, mut fx) = setup(5);
        let f0 = OneParticleState::physical(fx.density_matrix(2, 0.2)).unwrap();
        let t0 = convergence_radius(&model, &f0);
        let s = vlasov_solve_series(&model, &f0, 0.5 * t0, 6).unwrap();
        let ode = vlasov_solve_ode(&model, &f0, 0.5 * t0, 1e-12).unwrap();
        let err = trace_norm(&(s.state.matrix() - ode.matrix()));
        assert!(err <= 1e-6, "{err:e} {:?}", s.term_norms);
        assert!(s.term_norms.windows(2).skip(1).all(|w| w[1] < w[0]), "{:?}", s.term_norms);
        let mut prev = f64::INFINITY;
        for n in 0..=6 {
            let e = trace_norm(&(vlasov_solve_series(&model, &f0, 0.5 * t0, n).unwrap().state.matrix() - ode.matrix()));
            assert!(e < prev, "order {n}");
            prev = e;
        }
    }

    #[test]
    fn series_limits() {
        let (model, mut fx) = setup(6);
        let f0 = OneParticleState::new(fx.density_matrix(2, 0.2)).unwrap();
        let t0 = convergence_radius(&model, &f0);
        assert!(matches!(vlasov_solve_series(&model, &f0, t0, 2), Err(Error::OutsideRadius { .. })));
        assert!(matches!(vlasov_solve_series(&model, &f0, 0.1, 7), Err(Error::OrderTooLarge { .. })));
        let zero = vlasov_solve_series(&model, &f0, 0.3 * t0, 0).unwrap();
        let free = vlasov_solve_ode(&model.without_interaction(), &f0, 0.3 * t0, 1e-12).unwrap();
        assert!(max_abs(&(zero.state.matrix() - free.matrix())) < 1e-10);
    }

    #[test]
    fn product_formula() {
        let (model, mut fx) = setup(7);
        let f0 = OneParticleState::physical(fx.density_matrix(2, 0.2)).unwrap();
        let t = 0.5 * convergence_radius(&model, &f0);
        let free = product_formula_check(&model.without_interaction(), &f0, 2, 0.4, 4).unwrap();
        assert!(free.deviation < 1e-12);
        let one = product_formula_check(&model, &f0, 1, t, 4).unwrap();
        assert!(one.deviation < 1e-15);
        let two = product_formula_check(&model, &f0, 2, t, 6).unwrap();
        assert!(two.deviation < 1e-6, "{}", two.deviation);
    }

    #[test]
    fn chaos_cases() {
        let (model, mut fx) = setup(8);
        let f0 = OneParticleState::physical(fx.density_matrix(2, 0.2)).unwrap();
        let g1 = NBodyOperator::new(2, vec![1], fx.hermitian(2)).unwrap();
        let zero = chaos_equality(&model, &g1, &f0, 0.0, 3).unwrap();
        assert!(zero.abs_err < 1e-15);
        let g2 = NBodyOperator::new(2, vec![1, 2], fx.symmetric_hermitian(2, 2)).unwrap();
        let free = chaos_equality(&model.without_interaction(), &g2, &f0, 0.4, 3).unwrap();
        assert!(free.abs_err < 1e-10);
        for g in [&g1, &g2] {
            let r = chaos_equality(&model, g, &f0, 0.4, 5).unwrap();
            assert!(r.abs_err <= 10.0 * r.tail_estimate, "{r:?}");
        }
    }
}
