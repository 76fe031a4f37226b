//! The five verification suites. Independent experiment points fan out over
//! the current rayon pool; results are collected in input order so every
//! report and table is independent of the worker count.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{anyhow, Context};
use dualkin_core::cumulants::{generator_probe, Cumulants};
use dualkin_core::fixtures::Fixtures;
use dualkin_core::gke::{additive_duality, cluster_expansion_identity, duality_check, evolution_operator_v, gke_residual, FunctionalTruncation};
use dualkin_core::hartree::{hartree_solve, rank1_consistency, wave_packet, write_grid_state};
use dualkin_core::hierarchy::{bound_constant, evolve_expansion, evolve_expansion_ordered, evolve_ode_oracle, verify_bound};
use dualkin_core::kinetic::{chaos_equality, convergence_radius, product_formula_check, vlasov_solve_ode, vlasov_solve_series};
use dualkin_core::meanfield::{duhamel_check, group_factorization_check, limit_evolve_ode, limit_evolve_quadrature, meanfield_convergence};
use dualkin_core::tensor::{max_abs, swap_matrix, trace_norm};
use dualkin_core::{HamiltonianSet, NBodyOperator, ObservableSequence, OneParticleState, ParticleModel, SimplexQuadrature};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{complex_rows, ComplexRows, ExperimentConfig};
use crate::report::{fmt_num, Artifact, Check, Checker, ExperimentReport, SuiteOutput, Table, Timing};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Suite {
    Verify,
    Meanfield,
    Chaos,
    GkeDuality,
    Hartree,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Verify, Suite::Meanfield, Suite::Chaos, Suite::GkeDuality, Suite::Hartree];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Verify => "verify",
            Suite::Meanfield => "meanfield",
            Suite::Chaos => "chaos",
            Suite::GkeDuality => "gke-duality",
            Suite::Hartree => "hartree",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| anyhow!("unknown suite {s:?}"))
    }
}

/// Interaction strengths at which the hierarchy expansion meets its oracle.
pub const EXPANSION_EPSILONS: [f64; 2] = [0.4, 1.0];
/// Number of random observables tested against the norm estimate.
pub const BOUND_SEEDS: u64 = 20;
/// Probe times for the small-time limits of the cumulants.
pub const PROBE_TIMES: [f64; 3] = [1e-3, 5e-4, 2.5e-4];
/// Order of the Vlasov iteration series compared with the ODE.
pub const VLASOV_SERIES_ORDER: usize = 6;
/// Highest total particle number in the order-by-order duality comparison.
pub const MATCHED_ORDERS: usize = 4;

struct Parts {
    checks: Vec<Check>,
    artifacts: Vec<Artifact>,
    timings: Vec<Timing>,
}

impl Parts {
    fn new() -> Self {
        Self { checks: Vec::new(), artifacts: Vec::new(), timings: Vec::new() }
    }

    fn timed<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(Timing { name: name.into(), seconds: start.elapsed().as_secs_f64() });
        out
    }
}

#[derive(Serialize)]
struct FixtureFile {
    seed: u64,
    d: usize,
    epsilon: f64,
    k: ComplexRows,
    phi: ComplexRows,
}

/// Independent fixture stream for one experiment.
fn fixtures(cfg: &ExperimentConfig, tag: u64) -> Fixtures {
    Fixtures::new(cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(tag))
}

/// Runs one suite on a validated configuration.
pub fn run_suite(cfg: &ExperimentConfig, suite: Suite, tol_scale: f64) -> anyhow::Result<SuiteOutput> {
    let violations = cfg.violations();
    if !violations.is_empty() {
        return Err(anyhow!("invalid configuration: {}", violations.join("; ")));
    }
    let model = cfg.particle_model().context("building the particle model")?;
    let ck = Checker::new(tol_scale);
    let start = Instant::now();
    let mut parts = match suite {
        Suite::Verify => verify(cfg, &model, ck)?,
        Suite::Meanfield => meanfield(cfg, &model, ck)?,
        Suite::Chaos => chaos(cfg, &model, ck)?,
        Suite::GkeDuality => gke(cfg, &model, ck)?,
        Suite::Hartree => hartree(cfg, ck)?,
    };
    parts.timings.push(Timing { name: "total".into(), seconds: start.elapsed().as_secs_f64() });
    let fixture = FixtureFile {
        seed: cfg.seed,
        d: model.dim(),
        epsilon: model.epsilon(),
        k: complex_rows(model.kinetic()),
        phi: complex_rows(model.potential()),
    };
    let mut json = serde_json::to_vec_pretty(&fixture)?;
    json.push(b'\n');
    parts.artifacts.push(Artifact { name: "fixtures.json".into(), contents: json });
    let report = ExperimentReport {
        suite: suite.name().into(),
        seed: cfg.seed,
        pass: parts.checks.iter().all(|c| c.pass),
        tol_scale,
        config: cfg.clone(),
        checks: parts.checks,
        timings: parts.timings,
        files: parts.artifacts.iter().map(|a| a.name.clone()).collect(),
    };
    Ok(SuiteOutput { report, artifacts: parts.artifacts })
}

fn symmetric_on(fx: &mut Fixtures, d: usize, n: usize) -> anyhow::Result<NBodyOperator> {
    Ok(NBodyOperator::on_leading(d, fx.symmetric_hermitian(d, n))?)
}

fn max_entry_distance(a: &ObservableSequence, b: &ObservableSequence) -> anyhow::Result<f64> {
    let mut worst = 0.0f64;
    for s in 0..=a.truncation() {
        worst = worst.max(a.entry(s).sub(b.entry(s))?.op_norm());
    }
    Ok(worst)
}

fn worst_ratio(ratios: &[f64], target: f64) -> f64 {
    ratios.iter().copied().max_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs())).unwrap_or(f64::NAN)
}

/// Largest ratio of successive entries; below one iff strictly decreasing.
fn max_successive_ratio(values: &[f64]) -> f64 {
    values.windows(2).map(|w| w[1] / w[0]).fold(f64::NEG_INFINITY, f64::max)
}

fn verify(cfg: &ExperimentConfig, model: &ParticleModel, ck: Checker) -> anyhow::Result<Parts> {
    let mut p = Parts::new();
    let d = model.dim();
    let s = cfg.truncation.s;

    let swap = swap_matrix(d);
    let sym = max_abs(&(&swap * model.potential() * &swap - model.potential()));
    p.checks.push(ck.tolerance(None, "model_exchange_symmetry", sym, 1e-12));

    let (zero, free) = p.timed("cumulant_degeneracy", || -> anyhow::Result<(f64, f64)> {
        let set = HamiltonianSet::new(model, 5)?;
        let free_set = HamiltonianSet::new(&model.without_interaction(), 5)?;
        let mut times = vec![cfg.time.t];
        times.extend(&cfg.time.t_list);
        let cases: Vec<(usize, NBodyOperator)> = {
            let mut fx = fixtures(cfg, 11);
            (1..=4).map(|n| Ok((n, symmetric_on(&mut fx, d, n + 1)?))).collect::<anyhow::Result<_>>()?
        };
        let results: Vec<(f64, f64)> = cases
            .par_iter()
            .map(|(n, g)| -> anyhow::Result<(f64, f64)> {
                let particles: Vec<usize> = (1..=n + 1).collect();
                let at_zero = Cumulants::new(&set, 0.0)?.forward(None, &particles, g)?.max_abs();
                let mut without = 0.0f64;
                for &t in &times {
                    without = without.max(Cumulants::new(&free_set, t)?.forward(None, &particles, g)?.max_abs());
                }
                Ok((at_zero, without))
            })
            .collect::<anyhow::Result<_>>()?;
        Ok(results.iter().fold((0.0f64, 0.0f64), |(a, b), (x, y)| (a.max(*x), b.max(*y))))
    })?;
    p.checks.push(ck.tolerance(Some(1), "cumulants_vanish_at_t0", zero, 1e-11));
    p.checks.push(ck.tolerance(Some(1), "cumulants_vanish_without_interaction", free, 1e-11));

    let probes = p.timed("generator_probes", || -> anyhow::Result<_> {
        let set = HamiltonianSet::new(model, 3)?;
        let mut fx = fixtures(cfg, 12);
        let targets: Vec<NBodyOperator> = (1..=3).map(|n| symmetric_on(&mut fx, d, n)).collect::<anyhow::Result<_>>()?;
        targets.par_iter().map(|g| Ok(generator_probe(&set, g, &PROBE_TIMES)?)).collect::<anyhow::Result<Vec<_>>>()
    })?;
    p.checks.push(ck.within(Some(2), "probe_order1_halving_ratio", worst_ratio(&probes[0].ratios, 2.0), 2.0, 0.3));
    p.checks.push(ck.within(Some(2), "probe_order2_halving_ratio", worst_ratio(&probes[1].ratios, 2.0), 2.0, 0.3));
    p.checks.push(ck.at_least(Some(2), "probe_order3_fitted_order", probes[2].fitted_order, 0.8));

    let g0 = fixtures(cfg, 13).observable_sequence(d, s);
    let expansion = p.timed("expansion_vs_oracle", || -> anyhow::Result<Vec<f64>> {
        let points: Vec<(f64, f64)> =
            EXPANSION_EPSILONS.iter().flat_map(|&e| cfg.time.t_list.iter().map(move |&t| (e, t))).collect();
        points
            .par_iter()
            .map(|&(eps, t)| {
                let set = HamiltonianSet::new(&model.with_epsilon(eps)?, s.max(1))?;
                let a = evolve_expansion(&g0, t, &set)?;
                let b = evolve_ode_oracle(&g0, t, &set)?;
                Ok(a.sub(&b)?.gamma_norm(cfg.truncation.gamma)?)
            })
            .collect()
    })?;
    for (i, eps) in EXPANSION_EPSILONS.iter().enumerate() {
        let n = cfg.time.t_list.len();
        let worst = expansion[i * n..(i + 1) * n].iter().copied().fold(0.0, f64::max);
        p.checks.push(ck.tolerance(Some(3), format!("expansion_vs_oracle_eps{eps}"), worst, 1e-8));
    }
    let ordered = p.timed("ordered_expansion", || -> anyhow::Result<f64> {
        let set = HamiltonianSet::new(model, s.max(1))?;
        let a = evolve_expansion(&g0, cfg.time.t, &set)?;
        let b = evolve_expansion_ordered(&g0, cfg.time.t, &set)?;
        max_entry_distance(&a, &b)
    })?;
    p.checks.push(ck.tolerance(None, "ordered_sum_matches_subset_sum", ordered, 1e-10));

    let gamma = cfg.truncation.gamma;
    let constant = bound_constant(gamma)?;
    let ratio = p.timed("norm_bound", || -> anyhow::Result<f64> {
        let set = HamiltonianSet::new(model, s.max(1))?;
        let ratios: Vec<f64> = (0..BOUND_SEEDS)
            .into_par_iter()
            .map(|k| -> anyhow::Result<f64> {
                let g = fixtures(cfg, 1000 + k).observable_sequence(d, s);
                let mut worst = 0.0f64;
                for &t in &cfg.time.t_list {
                    worst = worst.max(verify_bound(&g, t, gamma, &set)?.ratio());
                }
                Ok(worst)
            })
            .collect::<anyhow::Result<_>>()?;
        Ok(ratios.into_iter().fold(0.0, f64::max))
    })?;
    p.checks.push(ck.bound(Some(4), format!("norm_ratio_max_over_{BOUND_SEEDS}_seeds"), ratio, constant));

    let duhamel = p.timed("duhamel", || -> anyhow::Result<f64> {
        let set = HamiltonianSet::new(model, 2)?;
        let g1 = symmetric_on(&mut fixtures(cfg, 14), d, 1)?;
        let quad = SimplexQuadrature::new(cfg.quadrature.nodes, cfg.quadrature.depth);
        Ok(duhamel_check(&g1, cfg.time.t, &set, &quad)?.residual())
    })?;
    p.checks.push(ck.tolerance(Some(5), "duhamel_identity_n1_s2", duhamel, 1e-8));
    Ok(p)
}

fn meanfield(cfg: &ExperimentConfig, model: &ParticleModel, ck: Checker) -> anyhow::Result<Parts> {
    let mut p = Parts::new();
    let d = model.dim();
    let s = cfg.truncation.s;
    let t = cfg.time.t;
    let mut fx = fixtures(cfg, 21);
    let g0 = fx.observable_sequence(d, s);
    let g2 = symmetric_on(&mut fx, d, 2.min(s).max(1))?;
    let start = Instant::now();
    let (records, (limit, factor)) = rayon::join(
        || meanfield_convergence(&g0, &cfg.epsilon_sweep, t, model),
        || {
            rayon::join(
                || -> anyhow::Result<f64> {
                    let quad = SimplexQuadrature::new(cfg.quadrature.nodes, cfg.quadrature.depth);
                    let a = limit_evolve_ode(&g0, t, model)?;
                    let b = limit_evolve_quadrature(&g0, t, model, &quad)?;
                    max_entry_distance(&a, &b)
                },
                || group_factorization_check(&g2, t, &cfg.epsilon_sweep, model),
            )
        },
    );
    p.timings.push(Timing { name: "meanfield_experiments".into(), seconds: start.elapsed().as_secs_f64() });
    let records = records?;

    let mut table = Table::new("epsilon,s,t,error_opnorm,empirical_order");
    for r in &records {
        table.push(&[
            fmt_num(r.epsilon),
            r.s.to_string(),
            fmt_num(r.t),
            fmt_num(r.error),
            r.empirical_order.map(fmt_num).unwrap_or_default(),
        ]);
    }
    p.artifacts.push(table.into_artifact("convergence.csv"));
    for level in 2..=s {
        let errs: Vec<f64> = records.iter().filter(|r| r.s == level).map(|r| r.error).collect();
        p.checks.push(ck.below(Some(6), format!("meanfield_errors_decrease_s{level}"), max_successive_ratio(&errs), 1.0));
    }
    p.checks.push(ck.tolerance(Some(7), "limit_ode_vs_quadrature", limit?, 1e-7));
    let errs: Vec<f64> = factor?.into_iter().map(|(_, e)| e).collect();
    p.checks.push(ck.below(None, "group_factorization_errors_decrease", max_successive_ratio(&errs), 1.0));
    Ok(p)
}

fn chaos(cfg: &ExperimentConfig, model: &ParticleModel, ck: Checker) -> anyhow::Result<Parts> {
    let mut p = Parts::new();
    let d = model.dim();
    let mut fx = fixtures(cfg, 31);
    let f0 = OneParticleState::physical(fx.density_matrix(d, cfg.truncation.lambda))?;
    let observables = [symmetric_on(&mut fx, d, 1)?, symmetric_on(&mut fx, d, 2)?];
    let th = 0.5 * convergence_radius(model, &f0);

    let vlasov = p.timed("vlasov_series_vs_ode", || -> anyhow::Result<_> {
        let series = vlasov_solve_series(model, &f0, th, VLASOV_SERIES_ORDER)?;
        let ode = vlasov_solve_ode(model, &f0, th, 1e-12)?;
        let dev = trace_norm(&(series.state.matrix() - ode.matrix()));
        let spec = ode.spectrum().iter().zip(f0.spectrum()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let trace = (ode.weight() - f0.weight()).abs().max((series.state.weight() - f0.weight()).abs());
        Ok((dev, spec, trace))
    })?;
    p.checks.push(ck.tolerance(Some(8), "vlasov_series_order6_vs_ode", vlasov.0, 1e-6));
    p.checks.push(ck.tolerance(Some(8), "vlasov_isospectrality", vlasov.1, 1e-8));
    p.checks.push(ck.tolerance(Some(8), "vlasov_trace_conservation", vlasov.2, 1e-8));

    let reports = p.timed("chaos_identity", || -> anyhow::Result<Vec<_>> {
        observables
            .par_iter()
            .map(|g| Ok(chaos_equality(model, g, &f0, cfg.time.t_kinetic, cfg.truncation.chaos_s_max)?))
            .collect()
    })?;
    let mut table = Table::new("k,t,s_max,lhs,rhs,abs_err,tail_estimate");
    for r in &reports {
        table.push(&[
            r.k.to_string(),
            fmt_num(r.t),
            r.s_max.to_string(),
            fmt_num(r.lhs),
            fmt_num(r.rhs),
            fmt_num(r.abs_err),
            fmt_num(r.tail_estimate),
        ]);
        p.checks.push(ck.tolerance(Some(9), format!("chaos_identity_k{}", r.k), r.abs_err, 10.0 * r.tail_estimate).with_tail(r.tail_estimate));
    }
    p.artifacts.push(table.into_artifact("chaos.csv"));

    let product = p.timed("product_formula", || product_formula_check(model, &f0, 2, th, VLASOV_SERIES_ORDER))?;
    p.checks.push(ck.tolerance(None, "product_formula_k2", product.deviation, 1e-6).with_tail(*product.term_norms.last().unwrap_or(&0.0)));
    Ok(p)
}

fn gke(cfg: &ExperimentConfig, model: &ParticleModel, ck: Checker) -> anyhow::Result<Parts> {
    let mut p = Parts::new();
    let d = model.dim();
    let tr = &cfg.truncation;
    let trunc = FunctionalTruncation::new(tr.n_max, tr.s_max, tr.series_cap, tr.lambda)?;
    let set = HamiltonianSet::new(model, trunc.particles_needed().max(4))?;
    let t = cfg.time.t_kinetic;
    let mut fx = fixtures(cfg, 41);
    let f0 = OneParticleState::physical(fx.density_matrix(d, tr.lambda))?;

    let cases: Vec<(usize, usize)> = (1..=2).flat_map(|s| (0..=2).map(move |n| (s, n))).collect();
    let identity = p.timed("cluster_expansion_identity", || -> anyhow::Result<Vec<f64>> {
        cases
            .par_iter()
            .enumerate()
            .map(|(i, &(s, n))| {
                let mut fx = fixtures(cfg, 400 + i as u64);
                let f = NBodyOperator::new(d, (1..=s + n).collect(), fx.complex_matrix(d.pow((s + n) as u32)))?;
                Ok(cluster_expansion_identity(&set, t, s, n, &f)?.deviation())
            })
            .collect()
    })?;
    for (&(s, n), dev) in cases.iter().zip(identity) {
        p.checks.push(ck.tolerance(Some(10), format!("cluster_expansion_s{s}_n{n}"), dev, 1e-10));
    }

    let g1 = symmetric_on(&mut fx, d, 1)?;
    let additive = p.timed("additive_duality", || additive_duality(&set, &g1, &f0, t, &trunc))?;
    p.checks.push(ck.tolerance(Some(11), "additive_duality", additive.abs_err, 10.0 * additive.tails()).with_tail(additive.tails()));
    let orders = MATCHED_ORDERS.min(tr.s_max).min(tr.series_cap + 1);
    p.checks.push(ck.tolerance(Some(11), format!("duality_terms_up_to_order{orders}"), additive.term_mismatch(orders), 1e-9));

    let g0 = fx.observable_sequence(d, tr.s_max.min(3));
    let general = p.timed("duality", || duality_check(&set, &g0, &f0, t, &trunc))?;
    p.checks.push(ck.tolerance(None, "sequence_duality", general.abs_err, 10.0 * general.tails()).with_tail(general.tails()));

    let residuals = p.timed("kinetic_equation_residual", || -> anyhow::Result<Vec<_>> {
        (0..=tr.n_max)
            .into_par_iter()
            .map(|n| {
                let tn = FunctionalTruncation::new(n, tr.s_max, tr.series_cap, tr.lambda)?;
                Ok(gke_residual(&set, &f0, t, &tn, 1e-3)?)
            })
            .collect()
    })?;
    if residuals.len() > 1 {
        let r: Vec<f64> = residuals.iter().map(|x| x.residual).collect();
        let last = residuals.last().expect("nonempty");
        p.checks.push(
            ck.below(None, "kinetic_equation_residual_decreases", max_successive_ratio(&r), 1.0)
                .with_tail(last.functional_tail + last.series_tail),
        );
    }

    let exact = p.timed("exact_weights", || -> anyhow::Result<f64> {
        let n = tr.n_max;
        let f = NBodyOperator::new(d, (1..=2 + n).collect(), fx.complex_matrix(d.pow((2 + n) as u32)))?;
        let c = Cumulants::new(&set, t)?;
        let a = evolution_operator_v(&c, 2, n, &f, false)?;
        let b = evolution_operator_v(&c, 2, n, &f, true)?;
        Ok(a.sub(&b)?.max_abs())
    })?;
    p.checks.push(ck.tolerance(None, "exact_rational_weights", exact, 1e-13));
    Ok(p)
}

fn hartree(cfg: &ExperimentConfig, ck: Checker) -> anyhow::Result<Parts> {
    let mut p = Parts::new();
    let gc = &cfg.grid;
    let grid = gc.grid()?;
    let psi0 = wave_packet(&grid, gc.packet_center(), gc.sigma, gc.momentum);
    let t = cfg.time.t;
    let dt = cfg.time.dt;
    let start = Instant::now();
    let (main, (coarse, fine)) = rayon::join(
        || hartree_solve(&psi0, &grid, t, dt),
        || rayon::join(|| hartree_solve(&psi0, &grid, gc.energy_t, gc.energy_dt), || hartree_solve(&psi0, &grid, gc.energy_t, 0.5 * gc.energy_dt)),
    );
    p.timings.push(Timing { name: "hartree_runs".into(), seconds: start.elapsed().as_secs_f64() });
    let (main, coarse, fine) = (main?, coarse?, fine?);
    p.checks.push(ck.tolerance(Some(12), "mass_conservation_per_step", main.max_mass_step, 1e-12));
    p.checks.push(ck.within(Some(12), "energy_drift_halving_ratio", coarse.energy_drift / fine.energy_drift, 4.0, 1.0));
    let rank1 = p.timed("rank1_consistency", || rank1_consistency(&psi0, &grid, t, dt))?;
    p.checks.push(ck.tolerance(Some(12), "rank1_trace_distance", rank1.trace_distance, 1e-6));

    let mut table = Table::new("dt,t,steps,max_mass_step,energy_drift");
    for (run, horizon) in [(&main, t), (&coarse, gc.energy_t), (&fine, gc.energy_t)] {
        table.push(&[fmt_num(run.step), fmt_num(horizon), run.steps.to_string(), fmt_num(run.max_mass_step), fmt_num(run.energy_drift)]);
    }
    p.artifacts.push(table.into_artifact("hartree.csv"));
    for (name, psi) in [("hartree_initial.txt", &psi0), ("hartree_final.txt", &main.psi)] {
        let mut buf = Vec::new();
        write_grid_state(&mut buf, &grid, psi)?;
        p.artifacts.push(Artifact { name: name.into(), contents: buf });
    }
    Ok(p)
}
