//! Evolution of states described by the one-particle density operator: the
//! evolution operators `𝔙_{1+n}` built from scattering cumulants, the marginal
//! functionals of the state, the one-particle series, the generalized kinetic
//! equation and the duality with the dual hierarchy.

use num_rational::Ratio;

use crate::combinatorics::{bounded_compositions, enumerate_dissections, factorial, factorial_exact, injective_assignments, ClusterElement};
use crate::cumulants::{Cumulants, Direction};
use crate::dynamics::{liouvillian_free, liouvillian_int, HamiltonianSet};
use crate::error::{Error, Result};
use crate::hierarchy::{additive_evolve, evolve_expansion, mean_value};
use crate::kinetic::OneParticleState;
use crate::tensor::{NBodyOperator, ObservableSequence, StateSequence};
use crate::C64;

/// Highest supported order of `𝔙_{1+n}`.
pub const MAX_V_ORDER: usize = 2;
/// Largest number of particles in any expansion.
pub const MAX_PARTICLES: usize = 6;

/// Truncations standing in for the infinite sums over particle number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FunctionalTruncation {
    /// Highest `n` in the marginal functionals.
    pub n_max: usize,
    /// Highest marginal index `s`.
    pub s_max: usize,
    /// Highest `n` in the one-particle series; it involves `series_cap + 1` particles.
    pub series_cap: usize,
    /// Trace of `F₁⁰`.
    pub lambda: f64,
}

impl FunctionalTruncation {
    pub fn new(n_max: usize, s_max: usize, series_cap: usize, lambda: f64) -> Result<Self> {
        let t = Self { n_max, s_max, series_cap, lambda };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_max > MAX_V_ORDER {
            return Err(Error::OrderTooLarge { order: self.n_max, max: MAX_V_ORDER });
        }
        if self.series_cap + 1 > MAX_PARTICLES {
            return Err(Error::TooManyParticles { requested: self.series_cap + 1, max: MAX_PARTICLES });
        }
        if self.s_max + self.n_max > MAX_PARTICLES {
            return Err(Error::TooManyParticles { requested: self.s_max + self.n_max, max: MAX_PARTICLES });
        }
        check_lambda(self.lambda)
    }

    /// Particle count the Hamiltonian cache must cover.
    pub fn particles_needed(&self) -> usize {
        (self.s_max + self.n_max).max(self.series_cap + 1)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_nan() || lambda.abs() >= (-1.0f64).exp() {
        return Err(Error::LambdaTooLarge(lambda));
    }
    Ok(())
}

/// One scattering-cumulant factor `𝔄̂_{1+|X|}(t, host, X)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Attachment {
    pub host: usize,
    pub block: Vec<usize>,
}

/// One term of `𝔙_{1+n}`: weight times `𝔄̂_{1+head}(t,{Y},s+1..s+head)`
/// applied after the stages, stage 1 first.
#[derive(Clone, Debug, PartialEq)]
pub struct VTerm {
    pub coefficient: Ratio<i64>,
    pub weight: f64,
    pub head: usize,
    pub stages: Vec<Vec<Attachment>>,
}

/// Exact weight, floating weight and attachments of one choice.
type WeightedAttachments = (Ratio<i64>, f64, Vec<Attachment>);

/// Choices of one dissection factor: the dissection of `z` into at most
/// `hosts` blocks, attached to distinct hosts in `1..=hosts`.
fn dissection_options(z: &[usize], hosts: usize) -> Result<Vec<WeightedAttachments>> {
    let mut out = Vec::new();
    for d in enumerate_dissections(z, hosts)? {
        let m = d.blocks.len();
        let mut denom = factorial_exact(m);
        let mut fdenom = factorial(m);
        for b in &d.blocks {
            denom *= factorial_exact(b.len());
            fdenom *= factorial(b.len());
        }
        for hostlist in injective_assignments(m, hosts) {
            let att = hostlist.iter().zip(&d.blocks).map(|(&h, b)| Attachment { host: h, block: b.clone() }).collect();
            out.push((Ratio::new(1, denom), 1.0 / fdenom, att));
        }
    }
    Ok(out)
}

/// Term lattice of `𝔙_{1+n}(t,{Y},s+1..s+n)` with `|Y| = s`.
pub fn v_terms(s: usize, n: usize) -> Result<Vec<VTerm>> {
    if n > MAX_V_ORDER {
        return Err(Error::OrderTooLarge { order: n, max: MAX_V_ORDER });
    }
    if s == 0 {
        return Err(Error::InvalidArgument("the cluster {Y} must be nonempty".into()));
    }
    let mut terms = Vec::new();
    for comp in bounded_compositions(n) {
        let sigma: usize = comp.iter().sum();
        let sign: i64 = if comp.len() % 2 == 0 { 1 } else { -1 };
        let lead = factorial_exact(n) / factorial_exact(n - sigma);
        let mut partial = vec![(Ratio::from_integer(sign * lead), sign as f64 * factorial(n) / factorial(n - sigma), Vec::new())];
        let mut upper = s + n;
        for &nj in &comp {
            let hosts = upper - nj;
            let z: Vec<usize> = (hosts + 1..=upper).collect();
            let options = dissection_options(&z, hosts)?;
            let mut next = Vec::with_capacity(partial.len() * options.len());
            for (c, w, stages) in &partial {
                for (oc, ow, att) in &options {
                    let mut st: Vec<Vec<Attachment>> = stages.clone();
                    st.push(att.clone());
                    next.push((c * oc, w * ow, st));
                }
            }
            partial = next;
            upper = hosts;
        }
        terms.extend(partial.into_iter().map(|(coefficient, weight, stages)| VTerm { coefficient, weight, head: n - sigma, stages }));
    }
    Ok(terms)
}

fn ratio_to_f64(r: &Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `𝔙_{1+n}(t,{Y},s+1..s+n)` applied to `target`, which must carry particles
/// `1..=s+n` (possibly more). With `exact` the rational coefficients are used.
pub fn evolution_operator_v(c: &Cumulants, s: usize, n: usize, target: &NBodyOperator, exact: bool) -> Result<NBodyOperator> {
    let y: Vec<usize> = (1..=s).collect();
    let mut acc = NBodyOperator::zeros(target.dim(), target.particles().to_vec())?;
    for term in v_terms(s, n)? {
        let mut x = target.clone();
        for stage in &term.stages {
            for a in stage {
                let mut ground = vec![ClusterElement::Single(a.host)];
                ground.extend(a.block.iter().map(|&p| ClusterElement::Single(p)));
                x = c.apply(Direction::Scattering, &ground, &x)?;
            }
        }
        let extras: Vec<usize> = (s + 1..=s + term.head).collect();
        x = c.scattering(Some(&y), &extras, &x)?;
        let w = if exact { ratio_to_f64(&term.coefficient) } else { term.weight };
        acc.add_scaled_assign(w, &x)?;
    }
    Ok(acc)
}

/// Truncated marginal functional with its per-`n` contributions.
#[derive(Clone, Debug)]
pub struct MarginalFunctional {
    pub value: NBodyOperator,
    pub terms: Vec<NBodyOperator>,
}

impl MarginalFunctional {
    pub fn term_norms(&self) -> Vec<f64> {
        self.terms.iter().map(|x| x.trace_norm()).collect()
    }
}

/// `F_s(t|F₁(t)) ≈ Σ_{n≤n_max} (1/n!) Tr_{s+1..s+n} 𝔙_{1+n}(t,{Y},s+1..s+n) ∏F₁(t)`.
pub fn marginal_functional(
    set: &HamiltonianSet,
    t: f64,
    s: usize,
    f1_t: &OneParticleState,
    trunc: &FunctionalTruncation,
) -> Result<MarginalFunctional> {
    trunc.validate()?;
    let c = Cumulants::new(set, t)?;
    marginal_functional_with(&c, s, f1_t, trunc.n_max)
}

fn marginal_functional_with(c: &Cumulants, s: usize, f1_t: &OneParticleState, n_max: usize) -> Result<MarginalFunctional> {
    let y: Vec<usize> = (1..=s).collect();
    let mut terms = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let prod = f1_t.product(s + n)?;
        let v = evolution_operator_v(c, s, n, &prod, false)?;
        terms.push(v.partial_trace(&y)?.scaled(1.0 / factorial(n)));
    }
    let mut value = terms[0].clone();
    for x in &terms[1..] {
        value.add_scaled_assign(1.0, x)?;
    }
    Ok(MarginalFunctional { value, terms })
}

/// One-particle series with its per-order terms.
#[derive(Clone, Debug)]
pub struct F1Series {
    pub state: OneParticleState,
    pub terms: Vec<NBodyOperator>,
}

impl F1Series {
    pub fn term_norms(&self) -> Vec<f64> {
        self.terms.iter().map(|x| x.trace_norm()).collect()
    }

    /// Trace norm of the last retained order.
    pub fn tail(&self) -> f64 {
        self.terms.last().map_or(0.0, |x| x.trace_norm())
    }
}

/// `F₁(t) = Σ_{n≤cap} (1/n!) Tr_{2..n+1} 𝔄_{1+n}(-t,1..n+1) ∏F₁⁰`.
pub fn f1_series(set: &HamiltonianSet, f1_0: &OneParticleState, t: f64, cap: usize) -> Result<F1Series> {
    check_lambda(f1_0.weight())?;
    if cap + 1 > MAX_PARTICLES {
        return Err(Error::TooManyParticles { requested: cap + 1, max: MAX_PARTICLES });
    }
    let c = Cumulants::new(set, t)?;
    let mut terms = Vec::with_capacity(cap + 1);
    for n in 0..=cap {
        let particles: Vec<usize> = (1..=n + 1).collect();
        let x = c.backward(None, &particles, &f1_0.product(n + 1)?)?;
        terms.push(x.partial_trace(&[1])?.scaled(1.0 / factorial(n)));
    }
    let mut sum = terms[0].clone();
    for x in &terms[1..] {
        sum.add_scaled_assign(1.0, x)?;
    }
    Ok(F1Series { state: OneParticleState::new(sum.hermitian_part().into_matrix())?, terms })
}

/// Both sides of the kinetic cluster expansion of `𝔄_{1+n}(-t,{Y},s+1..s+n)`,
/// applied to the input symmetrized over the extra particles and symmetrized
/// again on output.
#[derive(Clone, Debug)]
pub struct ClusterIdentityReport {
    pub s: usize,
    pub n: usize,
    pub lhs: NBodyOperator,
    pub rhs: NBodyOperator,
}

impl ClusterIdentityReport {
    pub fn deviation(&self) -> f64 {
        self.lhs.sub(&self.rhs).map(|d| d.max_abs()).unwrap_or(f64::INFINITY)
    }
}

/// `Σ_{n₁} n!/(n-n₁)! 𝔙_{1+n-n₁}(t,{Y},s+1..s+n-n₁) ∘ B_{n₁}`, where `B_{n₁}`
/// attaches the dissected top `n₁` particles to distinct hosts through
/// backward cumulants and evolves the remaining hosts by `𝔄₁(-t)`.
pub fn cluster_expansion_rhs(c: &Cumulants, s: usize, n: usize, f: &NBodyOperator) -> Result<NBodyOperator> {
    let total = s + n;
    let mut acc = NBodyOperator::zeros(f.dim(), f.particles().to_vec())?;
    for n1 in 0..=n {
        let hosts = total - n1;
        let z: Vec<usize> = (hosts + 1..=total).collect();
        let options = if n1 == 0 {
            vec![(1.0, Vec::new())]
        } else {
            dissection_options(&z, hosts)?.into_iter().map(|(_, w, a)| (w, a)).collect()
        };
        let lead = factorial(n) / factorial(n - n1);
        for (w, attachments) in options {
            let mut x = f.clone();
            for a in &attachments {
                let mut ground = vec![ClusterElement::Single(a.host)];
                ground.extend(a.block.iter().map(|&p| ClusterElement::Single(p)));
                x = c.apply(Direction::Backward, &ground, &x)?;
            }
            let free: Vec<usize> = (1..=hosts).filter(|m| attachments.iter().all(|a| a.host != *m)).collect();
            x = c.flow().schrodinger_each(&x, &free)?;
            let v = evolution_operator_v(c, s, n - n1, &x, false)?;
            acc.add_scaled_assign(lead * w, &v)?;
        }
    }
    Ok(acc)
}

pub fn cluster_expansion_identity(set: &HamiltonianSet, t: f64, s: usize, n: usize, f: &NBodyOperator) -> Result<ClusterIdentityReport> {
    if n > MAX_V_ORDER {
        return Err(Error::OrderTooLarge { order: n, max: MAX_V_ORDER });
    }
    let particles: Vec<usize> = (1..=s + n).collect();
    if f.particles() != particles.as_slice() {
        return Err(Error::InvalidArgument(format!("input must act on particles 1..={}", s + n)));
    }
    let extras: Vec<usize> = (s..s + n).collect();
    let sym = |x: &NBodyOperator| x.symmetrized_over(&extras);
    let input = sym(f);
    let c = Cumulants::new(set, t)?;
    let y: Vec<usize> = (1..=s).collect();
    let ext: Vec<usize> = (s + 1..=s + n).collect();
    let lhs = sym(&c.backward(Some(&y), &ext, &input)?);
    let rhs = sym(&cluster_expansion_rhs(&c, s, n, &input)?);
    Ok(ClusterIdentityReport { s, n, lhs, rhs })
}

/// Generalized kinetic equation checked on the one-particle series.
#[derive(Clone, Debug)]
pub struct GkeResidual {
    pub t: f64,
    pub n_max: usize,
    /// Trace norm of `dF₁/dt - rhs`.
    pub residual: f64,
    /// Trace norm of the last retained order of the functional at `s = 2`.
    pub functional_tail: f64,
    /// Trace norm of the last retained order of the one-particle series.
    pub series_tail: f64,
}

/// Compares a fourth-order central difference of [`f1_series`] with
/// `-𝒩₀F₁ + Tr₂(-ε𝒩_int(1,2)) F₂(t|F₁(t))`.
pub fn gke_residual(set: &HamiltonianSet, f1_0: &OneParticleState, t: f64, trunc: &FunctionalTruncation, h: f64) -> Result<GkeResidual> {
    trunc.validate()?;
    let f = |tau: f64| f1_series(set, f1_0, tau, trunc.series_cap).map(|r| r.state.matrix().clone());
    let deriv = (f(t - 2.0 * h)? - f(t + 2.0 * h)? + (f(t + h)? - f(t - h)?) * C64::new(8.0, 0.0)) / C64::new(12.0 * h, 0.0);
    let series = f1_series(set, f1_0, t, trunc.series_cap)?;
    let f1 = NBodyOperator::new(f1_0.dim(), vec![1], series.state.matrix().clone())?;
    let model = set.model();
    let minus_i = C64::new(-1.0, 0.0);
    let mut rhs = liouvillian_free(model, 1, &f1)?.scaled_complex(minus_i);
    let c = Cumulants::new(set, t)?;
    let f2 = marginal_functional_with(&c, 2, &series.state, trunc.n_max)?;
    let kick = liouvillian_int(model, 1, 2, &f2.value)?.scaled(-model.epsilon()).partial_trace(&[1])?;
    rhs.add_scaled_assign(1.0, &kick)?;
    let diff = &deriv - rhs.matrix();
    Ok(GkeResidual {
        t,
        n_max: trunc.n_max,
        residual: crate::tensor::trace_norm(&diff),
        functional_tail: f2.terms.last().map_or(0.0, |x| x.trace_norm()),
        series_tail: series.tail(),
    })
}

/// Both sides of the duality between the dual hierarchy on chaotic data and
/// the marginal functionals of the state.
#[derive(Clone, Debug, PartialEq)]
pub struct DualityReport {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub abs_err: f64,
    pub lhs_tail: f64,
    pub rhs_tail: f64,
    /// Per-order contributions, indexed by total particle number minus one.
    pub lhs_terms: Vec<f64>,
    pub rhs_terms: Vec<f64>,
}

impl DualityReport {
    pub fn tails(&self) -> f64 {
        self.lhs_tail + self.rhs_tail
    }

    /// Largest `|lhs_terms[k] - rhs_terms[k]|` over `k < orders`.
    pub fn term_mismatch(&self, orders: usize) -> f64 {
        self.lhs_terms
            .iter()
            .zip(&self.rhs_terms)
            .take(orders)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `⟨G(t)|F^c⟩` against `Σ_s (1/s!) Tr G_s(0) F_s(t|F₁(t))`.
pub fn duality_check(
    set: &HamiltonianSet,
    g0: &ObservableSequence,
    f1_0: &OneParticleState,
    t: f64,
    trunc: &FunctionalTruncation,
) -> Result<DualityReport> {
    trunc.validate()?;
    if g0.truncation() > trunc.s_max {
        return Err(Error::InvalidArgument(format!("observable truncation {} exceeds s_max {}", g0.truncation(), trunc.s_max)));
    }
    let chaos = StateSequence::chaos(f1_0.matrix(), g0.truncation())?;
    let lhs_mv = mean_value(&evolve_expansion(g0, t, set)?, &chaos)?;
    let series = f1_series(set, f1_0, t, trunc.series_cap)?;
    let c = Cumulants::new(set, t)?;
    let mut rhs_terms = vec![g0.entry(0).matrix()[(0, 0)].re];
    let mut rhs_tail = 0.0f64;
    for s in 1..=g0.truncation() {
        let fs = if s == 1 {
            NBodyOperator::new(f1_0.dim(), vec![1], series.state.matrix().clone())?
        } else {
            let m = marginal_functional_with(&c, s, &series.state, trunc.n_max)?;
            rhs_tail += m.terms.last().map_or(0.0, |x| x.trace_norm()) * g0.entry(s).op_norm() / factorial(s);
            m.value
        };
        rhs_terms.push((g0.entry(s).matrix() * fs.matrix()).trace().re / factorial(s));
    }
    rhs_tail += series.tail() * g0.entry(1).op_norm();
    let lhs: f64 = lhs_mv.value;
    let rhs: f64 = rhs_terms.iter().sum();
    Ok(DualityReport {
        t,
        lhs,
        rhs,
        abs_err: (lhs - rhs).abs(),
        lhs_tail: lhs_mv.tail(),
        rhs_tail,
        lhs_terms: lhs_mv.terms,
        rhs_terms,
    })
}

/// Additive case: `Σ_s (1/s!) Tr 𝔄_s(t)Σ_j g₁(j) ∏F₁⁰` against
/// `Tr g₁ F₁(t)` with `F₁(t)` from [`f1_series`]. Term `k` on both sides is
/// the contribution with `k + 1` particles.
pub fn additive_duality(
    set: &HamiltonianSet,
    g1: &NBodyOperator,
    f1_0: &OneParticleState,
    t: f64,
    trunc: &FunctionalTruncation,
) -> Result<DualityReport> {
    trunc.validate()?;
    let mut lhs_terms = Vec::with_capacity(trunc.s_max);
    for s in 1..=trunc.s_max {
        let gs = additive_evolve(g1, s, t, set)?;
        let prod = f1_0.product(s)?;
        lhs_terms.push((gs.matrix() * prod.matrix()).trace().re / factorial(s));
    }
    let series = f1_series(set, f1_0, t, trunc.series_cap)?;
    let g = g1.relabeled(vec![1])?;
    let rhs_terms: Vec<f64> = series.terms.iter().map(|x| (g.matrix() * x.matrix()).trace().re).collect();
    let lhs: f64 = lhs_terms.iter().sum();
    let rhs: f64 = rhs_terms.iter().sum();
    Ok(DualityReport {
        t,
        lhs,
        rhs,
        abs_err: (lhs - rhs).abs(),
        lhs_tail: lhs_terms.last().map_or(0.0, |x| x.abs()),
        rhs_tail: series.tail() * g.op_norm(),
        lhs_terms,
        rhs_terms,
    })
}
