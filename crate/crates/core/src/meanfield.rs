//! Mean-field limit of the dual hierarchy: the limit recurrence as an ODE and
//! as nested Duhamel integrals, additive observables, the `ε → 0` convergence
//! experiment, and the Duhamel and group-factorization identities.

use crate::cumulants::Cumulants;
use crate::dynamics::{liouvillian_int, HamiltonianSet};
use crate::error::{Error, Result};
use crate::hierarchy::{evolve_expansion, integrate_hierarchy, symmetric_coupling};
use crate::ode::OdeOptions;
use crate::quadrature::{Collocation, SimplexQuadrature};
use crate::tensor::{NBodyOperator, ObservableSequence, ParticleModel};

/// Solves `d/dt g_s = Σ𝒩₀(i) g_s + Σ_{j₁≠j₂} 𝒩_int(j₁,j₂) g_{s-1}(Y\j₁)`.
/// The coupling carries no `ε`; the model's `ε` is ignored.
pub fn limit_evolve_ode(g0: &ObservableSequence, t: f64, model: &ParticleModel) -> Result<ObservableSequence> {
    let free = HamiltonianSet::new(&model.without_interaction(), g0.truncation().max(1))?;
    integrate_hierarchy(g0, t, &free, model, 1.0, &OdeOptions::default())
}

/// Level-by-level solution of the same recurrence in the interaction picture
/// `h_s(τ) = 𝒢⁰_s(-τ) g_s(τ)`, where `h_s' = C_s(Φ_τ) h_{s-1}` with the freely
/// evolved potential `Φ_τ = 𝒢⁰_2(-τ)Φ`. Each level is integrated on `nodes`
/// Gauss–Legendre collocation points, which is exact for polynomial `h_{s-1}`
/// of degree below `nodes`. Entries must be permutation symmetric.
pub fn limit_evolve_spectral(
    g0: &ObservableSequence,
    t: f64,
    model: &ParticleModel,
    nodes: usize,
) -> Result<ObservableSequence> {
    let top = g0.truncation();
    if t == 0.0 {
        return Ok(g0.clone());
    }
    let col = Collocation::new(nodes, t)?;
    let free = HamiltonianSet::new(&model.without_interaction(), 2)?;
    let potentials: Vec<_> = col
        .nodes
        .iter()
        .map(|&tau| {
            let u = free.propagator(2, -tau)?;
            Ok(&u * model.potential() * u.adjoint())
        })
        .collect::<Result<_>>()?;
    let mut entries = vec![g0.entry(0).clone()];
    let mut lower: Vec<NBodyOperator> = Vec::new();
    for s in 1..=top {
        let start = g0.entry(s);
        let mut level = Vec::with_capacity(nodes);
        let mut end = start.clone();
        if s >= 2 {
            let kicks: Vec<NBodyOperator> = lower
                .iter()
                .zip(&potentials)
                .map(|(h, phi)| symmetric_coupling(phi, h, s))
                .collect::<Result<_>>()?;
            for i in 0..nodes {
                let mut h = start.clone();
                for (j, kick) in kicks.iter().enumerate() {
                    h.add_scaled_assign(col.integral[(i, j)], kick)?;
                }
                level.push(h);
            }
            for (w, kick) in col.weights.iter().zip(&kicks) {
                end.add_scaled_assign(*w, kick)?;
            }
        } else {
            level = vec![start.clone(); nodes];
        }
        let flow = free.flow(t)?;
        entries.push(flow.heisenberg_each(&end, end.particles())?);
        lower = level;
    }
    Ok(ObservableSequence::from_operators(g0.dim(), entries))
}

/// Nested Duhamel evaluation of the limit recurrence.
struct LimitQuadrature<'a> {
    model: &'a ParticleModel,
    free: HamiltonianSet,
    quad: &'a SimplexQuadrature,
    g0: &'a ObservableSequence,
    y: Vec<usize>,
}

impl LimitQuadrature<'_> {
    fn free_flow(&self, x: &NBodyOperator, tau: f64) -> Result<NBodyOperator> {
        let u = self.free.propagator(1, tau)?;
        self.y.iter().try_fold(x.clone(), |acc, &i| acc.conjugated(&u, &[i]))
    }

    /// `W_J(τ) = g_{s-|J|}(τ, Y\J)` embedded in `Y`, split by the number of
    /// interaction insertions relative to `J`:
    /// `W_J(τ) = 𝒢⁰(τ) g(Y\J) + Σ_{j∉J} ∫₀^τ 𝒢⁰(τ-σ) Σ_{i∉J∪j} 𝒩(i,j) W_{J+j}(σ) dσ`.
    fn w(&self, removed: &mut Vec<usize>, tau: f64) -> Result<Vec<NBodyOperator>> {
        let rest: Vec<usize> = self.y.iter().copied().filter(|p| !removed.contains(p)).collect();
        let base = self.g0.entry(rest.len()).relabeled(rest.clone())?.embed(&self.y)?;
        let mut terms = vec![self.free_flow(&base, tau)?];
        if rest.len() < 2 {
            return Ok(terms);
        }
        let zero = NBodyOperator::zeros(self.model.dim(), self.y.clone())?;
        terms.resize(rest.len(), zero);
        for &j in &rest {
            removed.push(j);
            for (sigma, weight) in self.quad.rule(0.0, tau) {
                let inner = self.w(removed, sigma)?;
                for (k, term) in inner.iter().enumerate() {
                    let mut kicked = NBodyOperator::zeros(self.model.dim(), self.y.clone())?;
                    for &i in &rest {
                        if i != j {
                            kicked.add_scaled_assign(1.0, &liouvillian_int(self.model, i, j, term)?)?;
                        }
                    }
                    terms[k + 1].add_scaled_assign(weight, &self.free_flow(&kicked, tau - sigma)?)?;
                }
            }
            removed.pop();
        }
        Ok(terms)
    }
}

/// Terms of the limit expansion for entry `s`, indexed by the number of
/// interaction insertions `n = 0..s-1`.
pub fn limit_quadrature_terms(
    g0: &ObservableSequence,
    s: usize,
    t: f64,
    model: &ParticleModel,
    quad: &SimplexQuadrature,
) -> Result<Vec<NBodyOperator>> {
    if s > g0.truncation() {
        return Err(Error::InvalidArgument(format!("entry {s} exceeds truncation {}", g0.truncation())));
    }
    if s == 0 {
        return Ok(vec![g0.entry(0).clone()]);
    }
    quad.check_depth(s - 1)?;
    let lq = LimitQuadrature {
        model,
        free: HamiltonianSet::new(&model.without_interaction(), 1)?,
        quad,
        g0,
        y: (1..=s).collect(),
    };
    lq.w(&mut Vec::with_capacity(s), t)
}

/// Limit solution by nested quadrature; every entry needs depth `s - 1`.
pub fn limit_evolve_quadrature(
    g0: &ObservableSequence,
    t: f64,
    model: &ParticleModel,
    quad: &SimplexQuadrature,
) -> Result<ObservableSequence> {
    let entries = (0..=g0.truncation())
        .map(|s| {
            let terms = limit_quadrature_terms(g0, s, t, model, quad)?;
            let mut acc = terms[0].clone();
            for term in &terms[1..] {
                acc.add_scaled_assign(1.0, term)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    Ok(ObservableSequence::from_operators(g0.dim(), entries))
}

/// Limit evolution of the additive observable `(0, g₁, 0, ...)` at entry `s`:
/// only the `(s-1)`-fold integral survives.
pub fn additive_limit(
    g1: &NBodyOperator,
    s: usize,
    t: f64,
    model: &ParticleModel,
    quad: &SimplexQuadrature,
) -> Result<NBodyOperator> {
    if g1.particle_count() != 1 || s == 0 {
        return Err(Error::InvalidArgument("additive limit needs a one-particle observable and s >= 1".into()));
    }
    let seq = ObservableSequence::single_entry(g1.dim(), s, g1.matrix().clone())?;
    let mut terms = limit_quadrature_terms(&seq, s, t, model, quad)?;
    Ok(terms.swap_remove(s - 1))
}

/// One row of the mean-field convergence table.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub epsilon: f64,
    pub s: usize,
    pub t: f64,
    /// `‖ε^{-s} G_s^ε(t) - g_s(t)‖` in operator norm.
    pub error: f64,
    /// `ln(error_prev/error) / ln(ε_prev/ε)` against the previous `ε`.
    pub empirical_order: Option<f64>,
}

/// Runs the scaled hierarchy with `G_s(0) = εˢ g_s(0)` and interaction `ε`
/// for each `ε` and compares against the limit solution.
pub fn meanfield_convergence(
    g0: &ObservableSequence,
    eps_list: &[f64],
    t: f64,
    model: &ParticleModel,
) -> Result<Vec<ConvergenceRecord>> {
    if eps_list.windows(2).any(|w| w[1] >= w[0]) || eps_list.iter().any(|e| *e <= 0.0) {
        return Err(Error::InvalidArgument("epsilon list must be positive and strictly decreasing".into()));
    }
    let limit = limit_evolve_ode(g0, t, model)?;
    let top = g0.truncation();
    let mut errors = vec![Vec::with_capacity(eps_list.len()); top + 1];
    for &eps in eps_list {
        let set = HamiltonianSet::new(&model.with_epsilon(eps)?, top.max(1))?;
        let gt = evolve_expansion(&g0.scaled_by_power(eps), t, &set)?.scaled_by_power(1.0 / eps);
        for (s, errs) in errors.iter_mut().enumerate() {
            errs.push(gt.entry(s).sub(limit.entry(s))?.op_norm());
        }
    }
    let mut records = Vec::new();
    for (s, errs) in errors.iter().enumerate().skip(1) {
        for (k, &eps) in eps_list.iter().enumerate() {
            let empirical_order =
                (k > 0).then(|| (errs[k - 1] / errs[k]).ln() / (eps_list[k - 1] / eps).ln());
            records.push(ConvergenceRecord { epsilon: eps, s, t, error: errs[k], empirical_order });
        }
    }
    Ok(records)
}

/// `(ε, ‖𝒢_s^ε(t) g - ∏𝒢₁(t,j) g‖)` for each `ε`.
pub fn group_factorization_check(
    g: &NBodyOperator,
    t: f64,
    eps_list: &[f64],
    model: &ParticleModel,
) -> Result<Vec<(f64, f64)>> {
    let s = g.particle_count();
    let particles = g.particles().to_vec();
    eps_list
        .iter()
        .map(|&eps| {
            let set = HamiltonianSet::new(&model.with_epsilon(eps)?, s.max(1))?;
            let flow = set.flow(t)?;
            let full = flow.heisenberg(g, &particles)?;
            let product = flow.heisenberg_each(g, &particles)?;
            Ok((eps, full.sub(&product)?.op_norm()))
        })
        .collect()
}

/// Both sides of `𝔄₂(t,1,2) g(1) = ε ∫₀ᵗ 𝒢₂(t-τ) 𝒩_int(1,2) 𝒢₁(τ,1)𝒢₁(τ,2) g(1) dτ`.
#[derive(Clone, Debug)]
pub struct DuhamelCheck {
    pub cumulant: NBodyOperator,
    pub integral: NBodyOperator,
}

impl DuhamelCheck {
    pub fn residual(&self) -> f64 {
        self.cumulant.sub(&self.integral).map(|d| d.op_norm()).unwrap_or(f64::INFINITY)
    }
}

pub fn duhamel_check(g1: &NBodyOperator, t: f64, set: &HamiltonianSet, quad: &SimplexQuadrature) -> Result<DuhamelCheck> {
    if g1.particle_count() != 1 {
        return Err(Error::InvalidArgument("Duhamel check uses a one-particle observable".into()));
    }
    let y = [1, 2];
    let target = g1.relabeled(vec![1])?.embed(&y)?;
    let cumulant = Cumulants::new(set, t)?.forward(Some(&[1]), &[2], &target)?;
    let model = set.model();
    let mut integral = NBodyOperator::zeros(model.dim(), y.to_vec())?;
    for (tau, w) in quad.rule(0.0, t) {
        let inner = set.flow(tau)?.heisenberg_each(&target, &y)?;
        let kicked = liouvillian_int(model, 1, 2, &inner)?;
        let outer = set.heisenberg_map(2, t - tau, &kicked)?;
        integral.add_scaled_assign(w * model.epsilon(), &outer)?;
    }
    Ok(DuhamelCheck { cumulant, integral })
}
