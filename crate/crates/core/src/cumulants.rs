//! Forward, backward and scattering cumulants as explicit partition sums.
//!
//! For a ground set `({Y\X}, j_1, ..., j_n)` the cumulant is
//! `Σ_P (-1)^{|P|-1} (|P|-1)! ∏_{X_i ∈ P} 𝒢_{|X_i|}(±t, X_i)`; a block holding the
//! aggregate acts on the aggregate particles together with its singles. All
//! block groups of one partition act on disjoint supports and are applied in
//! block order.

use crate::combinatorics::{enumerate_partitions, ClusterElement, Partition};
use crate::dynamics::{liouvillian_free, liouvillian_int, Flow, HamiltonianSet};
use crate::error::{Error, Result};
use crate::tensor::NBodyOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Heisenberg groups `𝒢(t)`.
    Forward,
    /// State-side groups `𝒢(-t)`.
    Backward,
    /// Scattering groups `Ĝ(t) = 𝒢(-t) ∏ 𝒢_1(t)`.
    Scattering,
}

/// Time, ground set and direction of one cumulant.
#[derive(Clone, Debug, PartialEq)]
pub struct CumulantSpec {
    pub t: f64,
    pub cluster: Option<Vec<usize>>,
    pub singles: Vec<usize>,
    pub direction: Direction,
}

impl CumulantSpec {
    pub fn new(t: f64, cluster: Option<Vec<usize>>, singles: Vec<usize>, direction: Direction) -> Result<Self> {
        let spec = Self { t, cluster, singles, direction };
        spec.ground()?;
        Ok(spec)
    }

    /// Ground set of the partition sum, aggregate first.
    pub fn ground(&self) -> Result<Vec<ClusterElement>> {
        let mut g = Vec::with_capacity(self.singles.len() + 1);
        if let Some(c) = &self.cluster {
            g.push(ClusterElement::Aggregate(c.clone()));
        }
        g.extend(self.singles.iter().map(|&i| ClusterElement::Single(i)));
        enumerate_partitions(&g)?;
        Ok(g)
    }

    /// Sorted union of all particles in the ground set.
    pub fn ambient(&self) -> Vec<usize> {
        let mut a: Vec<usize> = self.cluster.iter().flatten().chain(&self.singles).copied().collect();
        a.sort_unstable();
        a
    }

    /// Number of ground elements.
    pub fn order(&self) -> usize {
        self.singles.len() + usize::from(self.cluster.is_some())
    }
}

/// Cumulant evaluator with propagators cached for one time `t`.
#[derive(Clone, Debug)]
pub struct Cumulants {
    flow: Flow,
}

impl Cumulants {
    pub fn new(set: &HamiltonianSet, t: f64) -> Result<Self> {
        Ok(Self { flow: set.flow(t)? })
    }

    pub fn time(&self) -> f64 {
        self.flow.time()
    }

    pub fn flow(&self) -> &Flow {
        &self.flow
    }

    /// Group of the given direction on `support`, applied to `x`.
    pub fn group(&self, direction: Direction, x: &NBodyOperator, support: &[usize]) -> Result<NBodyOperator> {
        match direction {
            Direction::Forward => self.flow.heisenberg(x, support),
            Direction::Backward => self.flow.schrodinger(x, support),
            Direction::Scattering => {
                if support.len() <= 1 {
                    return Ok(x.clone());
                }
                let free = self.flow.heisenberg_each(x, support)?;
                self.flow.schrodinger(&free, support)
            }
        }
    }

    /// Partition sum over `ground` applied to `target`. The target is embedded
    /// into the sorted union of its own particles and the ground particles.
    pub fn apply(&self, direction: Direction, ground: &[ClusterElement], target: &NBodyOperator) -> Result<NBodyOperator> {
        let partitions = enumerate_partitions(ground)?;
        let x = embed_for(ground, target)?;
        let mut acc = NBodyOperator::zeros(x.dim(), x.particles().to_vec())?;
        for p in &partitions {
            let term = self.partition_term(direction, p, &x)?;
            acc.add_scaled_assign(p.weight as f64, &term)?;
        }
        Ok(acc)
    }

    fn partition_term(&self, direction: Direction, p: &Partition, x: &NBodyOperator) -> Result<NBodyOperator> {
        p.supports().iter().try_fold(x.clone(), |acc, support| self.group(direction, &acc, support))
    }

    pub fn forward(&self, cluster: Option<&[usize]>, singles: &[usize], target: &NBodyOperator) -> Result<NBodyOperator> {
        self.apply(Direction::Forward, &ground_of(cluster, singles), target)
    }

    pub fn backward(&self, cluster: Option<&[usize]>, singles: &[usize], target: &NBodyOperator) -> Result<NBodyOperator> {
        self.apply(Direction::Backward, &ground_of(cluster, singles), target)
    }

    pub fn scattering(&self, cluster: Option<&[usize]>, singles: &[usize], target: &NBodyOperator) -> Result<NBodyOperator> {
        self.apply(Direction::Scattering, &ground_of(cluster, singles), target)
    }
}

fn ground_of(cluster: Option<&[usize]>, singles: &[usize]) -> Vec<ClusterElement> {
    let mut g = Vec::with_capacity(singles.len() + 1);
    if let Some(c) = cluster {
        g.push(ClusterElement::Aggregate(c.to_vec()));
    }
    g.extend(singles.iter().map(|&i| ClusterElement::Single(i)));
    g
}

fn embed_for(ground: &[ClusterElement], target: &NBodyOperator) -> Result<NBodyOperator> {
    let mut host: Vec<usize> = target.particles().to_vec();
    for e in ground {
        for p in e.particles() {
            if !host.contains(&p) {
                host.push(p);
            }
        }
    }
    if host.len() == target.particle_count() {
        return Ok(target.clone());
    }
    host.sort_unstable();
    target.embed(&host)
}

fn check_direction(spec: &CumulantSpec, expected: Direction) -> Result<()> {
    if spec.direction != expected {
        return Err(Error::InvalidArgument(format!("expected a {expected:?} spec, got {:?}", spec.direction)));
    }
    Ok(())
}

/// `𝔄_{1+n}(t, {Y\X}, X)` applied to `target`.
pub fn forward_cumulant(set: &HamiltonianSet, spec: &CumulantSpec, target: &NBodyOperator) -> Result<NBodyOperator> {
    check_direction(spec, Direction::Forward)?;
    Cumulants::new(set, spec.t)?.apply(Direction::Forward, &spec.ground()?, target)
}

/// `𝔄_{1+n}(-t, ...)` applied to `target`.
pub fn backward_cumulant(set: &HamiltonianSet, spec: &CumulantSpec, target: &NBodyOperator) -> Result<NBodyOperator> {
    check_direction(spec, Direction::Backward)?;
    Cumulants::new(set, spec.t)?.apply(Direction::Backward, &spec.ground()?, target)
}

/// `Ĝ_{|X|}(t) f = 𝒢_{|X|}(-t, X) ∏_{i∈X} 𝒢_1(t, i) f`.
pub fn scattering_group(set: &HamiltonianSet, t: f64, support: &[usize], f: &NBodyOperator) -> Result<NBodyOperator> {
    Cumulants::new(set, t)?.group(Direction::Scattering, f, support)
}

/// `𝔄̂_{1+n}(t, {Y}, extras)` applied to `target`.
pub fn scattering_cumulant(
    set: &HamiltonianSet,
    t: f64,
    cluster: &[usize],
    extras: &[usize],
    target: &NBodyOperator,
) -> Result<NBodyOperator> {
    Cumulants::new(set, t)?.scattering(Some(cluster), extras, target)
}

/// Small-`t` behaviour of one cumulant order.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSeries {
    pub order: usize,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `values[k] / values[k+1]`.
    pub ratios: Vec<f64>,
    /// Least-squares slope of `log value` against `log t`.
    pub fitted_order: f64,
}

/// Probes the small-`t` limits of the first three cumulants on a target with
/// `order` particles:
/// order 1 measures `‖𝔄_1(t)g - g - t𝒩_0 g‖/t`, order 2 measures
/// `‖𝔄_2(t)g - tε𝒩_int g‖/t`, order 3 measures `‖𝔄_3(t)g‖/t`.
pub fn generator_probe(set: &HamiltonianSet, g: &NBodyOperator, times: &[f64]) -> Result<ProbeSeries> {
    let order = g.particle_count();
    let model = set.model();
    let particles = g.particles().to_vec();
    let slope = match order {
        1 => Some(liouvillian_free(model, particles[0], g)?),
        2 => Some(liouvillian_int(model, particles[0], particles[1], g)?.scaled(model.epsilon())),
        3 => None,
        _ => return Err(Error::InvalidArgument(format!("probe order must be 1, 2 or 3, got {order}"))),
    };
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        if t <= 0.0 {
            return Err(Error::InvalidArgument(format!("probe times must be positive, got {t}")));
        }
        let c = Cumulants::new(set, t)?.forward(None, &particles, g)?;
        let residual = match (&slope, order) {
            (Some(s), 1) => c.sub(g)?.sub(&s.scaled(t))?,
            (Some(s), _) => c.sub(&s.scaled(t))?,
            (None, _) => c,
        };
        values.push(residual.op_norm() / t);
    }
    let ratios = values.windows(2).map(|w| w[0] / w[1]).collect();
    Ok(ProbeSeries { order, times: times.to_vec(), fitted_order: log_log_slope(times, &values), values, ratios })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(_, v)| **v > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::Fixtures;
    use crate::tensor::{max_abs, ParticleModel};
    use proptest::prelude::*;

    fn setup(seed: u64) -> (ParticleModel, HamiltonianSet, Fixtures) {
        let mut fx = Fixtures::new(seed);
        let model = fx.model(2, 1.0, 0.7);
        let set = HamiltonianSet::new(&model, 5).unwrap();
        (model, set, fx)
    }

    fn random_on(fx: &mut Fixtures, particles: Vec<usize>) -> NBodyOperator {
        let n = particles.len();
        NBodyOperator::new(2, particles, fx.hermitian(2usize.pow(n as u32))).unwrap()
    }

    #[test]
    fn first_order_is_the_group() {
        let (_, set, mut fx) = setup(1);
        let g = random_on(&mut fx, vec![1, 2, 3]);
        let c = Cumulants::new(&set, 0.8).unwrap();
        let a1 = c.forward(Some(&[1, 2, 3]), &[], &g).unwrap();
        let direct = set.heisenberg_map(3, 0.8, &g).unwrap();
        assert!(max_abs(&(a1.matrix() - direct.matrix())) < 1e-13);
        let b1 = c.backward(Some(&[1, 2, 3]), &[], &g).unwrap();
        assert!(max_abs(&(b1.matrix() - set.schrodinger_map(3, 0.8, &g).unwrap().matrix())) < 1e-13);
    }

    #[test]
    fn degenerate_at_zero_time() {
        let (_, set, mut fx) = setup(2);
        let c = Cumulants::new(&set, 0.0).unwrap();
        for n in 1..=4 {
            let target = random_on(&mut fx, vec![1]);
            let singles: Vec<usize> = (2..=n + 1).collect();
            let v = c.forward(Some(&[1]), &singles, &target).unwrap();
            assert!(v.max_abs() <= 1e-12, "n = {n}: {}", v.max_abs());
            let b = c.backward(Some(&[1]), &singles, &target).unwrap();
            assert!(b.max_abs() <= 1e-12);
        }
        let target = random_on(&mut fx, vec![1]);
        let v = c.forward(Some(&[1]), &[], &target).unwrap();
        assert!(max_abs(&(v.matrix() - target.matrix())) <= 1e-12);
    }

    #[test]
    fn free_dynamics_kills_higher_cumulants() {
        let (model, _, mut fx) = setup(3);
        let free = HamiltonianSet::new(&model.without_interaction(), 5).unwrap();
        let c = Cumulants::new(&free, 0.9).unwrap();
        for n in 1..=3 {
            let target = random_on(&mut fx, vec![1, 2]);
            let singles: Vec<usize> = (3..=n + 2).collect();
            assert!(c.forward(Some(&[1, 2]), &singles, &target).unwrap().max_abs() <= 1e-11);
            assert!(c.scattering(Some(&[1, 2]), &singles, &target).unwrap().max_abs() <= 1e-12);
        }
    }

    #[test]
    fn second_order_unrolled() {
        let (_, set, mut fx) = setup(4);
        let c = Cumulants::new(&set, 0.5).unwrap();
        let g = random_on(&mut fx, vec![1, 2]);
        let a2 = c.forward(None, &[1, 2], &g).unwrap();
        let g2 = set.heisenberg_map(2, 0.5, &g).unwrap();
        let u = set.propagator(1, 0.5).unwrap();
        let uu = u.kronecker(&u);
        let prod = &uu * g.matrix() * uu.adjoint();
        assert!(max_abs(&(a2.matrix() - (g2.matrix() - prod))) < 1e-12);
        assert!(a2.hermiticity_deviation() < 1e-11);
    }

    #[test]
    fn forward_backward_duality() {
        let (_, set, mut fx) = setup(5);
        let c = Cumulants::new(&set, 0.6).unwrap();
        let g = random_on(&mut fx, vec![1]);
        let f = random_on(&mut fx, vec![1, 2, 3]);
        let lhs = (c.forward(Some(&[1]), &[2, 3], &g).unwrap().matrix() * f.matrix()).trace();
        let gg = g.embed(&[1, 2, 3]).unwrap();
        let rhs = (gg.matrix() * c.backward(Some(&[1]), &[2, 3], &f).unwrap().matrix()).trace();
        assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn scattering_group_cases() {
        let (model, set, mut fx) = setup(6);
        let f = random_on(&mut fx, vec![1, 2]);
        let single = scattering_group(&set, 0.5, &[2], &f).unwrap();
        assert_eq!(single, f);
        let free = HamiltonianSet::new(&model.without_interaction(), 2).unwrap();
        let v = scattering_group(&free, 0.5, &[1, 2], &f).unwrap();
        assert!(max_abs(&(v.matrix() - f.matrix())) < 1e-12);
        let w = set.propagator(2, -0.5).unwrap() * set.propagator(1, 0.5).unwrap().kronecker(&set.propagator(1, 0.5).unwrap());
        let direct = &w * f.matrix() * w.adjoint();
        let v = scattering_group(&set, 0.5, &[1, 2], &f).unwrap();
        assert!(max_abs(&(v.matrix() - direct)) < 1e-12);
    }

    #[test]
    fn scattering_cumulant_cases() {
        let (_, set, mut fx) = setup(7);
        let f = random_on(&mut fx, vec![1, 2, 3]);
        let zero = scattering_cumulant(&set, 0.0, &[1, 2], &[3], &f).unwrap();
        assert!(zero.max_abs() < 1e-12);
        let n0 = scattering_cumulant(&set, 0.4, &[1, 2], &[], &f).unwrap();
        let g = scattering_group(&set, 0.4, &[1, 2], &f).unwrap();
        assert!(max_abs(&(n0.matrix() - g.matrix())) < 1e-14);
    }

    #[test]
    fn spec_round_trip() {
        let (_, set, mut fx) = setup(8);
        let spec = CumulantSpec::new(0.3, Some(vec![2]), vec![1, 3], Direction::Forward).unwrap();
        assert_eq!(spec.ambient(), vec![1, 2, 3]);
        assert_eq!(spec.order(), 3);
        let g = random_on(&mut fx, vec![2]);
        let via_spec = forward_cumulant(&set, &spec, &g).unwrap();
        let direct = Cumulants::new(&set, 0.3).unwrap().forward(Some(&[2]), &[1, 3], &g).unwrap();
        assert_eq!(via_spec, direct);
        assert!(backward_cumulant(&set, &spec, &g).is_err());
        assert!(CumulantSpec::new(0.3, Some(vec![1]), vec![1], Direction::Forward).is_err());
    }

    #[test]
    fn generator_probes() {
        let (model, set, mut fx) = setup(9);
        let ts = [1e-3, 5e-4, 2.5e-4];
        let p1 = generator_probe(&set, &random_on(&mut fx, vec![1]), &ts).unwrap();
        assert!(p1.ratios.iter().all(|r| (r - 2.0).abs() < 0.3), "{:?}", p1.ratios);
        let p2 = generator_probe(&set, &random_on(&mut fx, vec![1, 2]), &ts).unwrap();
        assert!(p2.ratios.iter().all(|r| (r - 2.0).abs() < 0.3), "{:?}", p2.ratios);
        let p3 = generator_probe(&set, &random_on(&mut fx, vec![1, 2, 3]), &ts).unwrap();
        assert!(p3.fitted_order >= 0.8, "{}", p3.fitted_order);
        let free = HamiltonianSet::new(&model.without_interaction(), 2).unwrap();
        let p = generator_probe(&free, &random_on(&mut fx, vec![1, 2]), &ts).unwrap();
        assert!(p.values.iter().all(|v| *v < 1e-9));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn hermiticity_preserved(seed in 0u64..500, t in -1.0f64..1.0) {
            let (_, set, mut fx) = setup(seed);
            let g = random_on(&mut fx, vec![2, 3]);
            let c = Cumulants::new(&set, t).unwrap();
            let v = c.forward(Some(&[2, 3]), &[1, 4], &g).unwrap();
            prop_assert!(v.hermiticity_deviation() < 1e-11);
        }

        #[test]
        fn cumulant_is_linear(seed in 0u64..500) {
            let (_, set, mut fx) = setup(seed);
            let a = random_on(&mut fx, vec![1]);
            let b = random_on(&mut fx, vec![1]);
            let c = Cumulants::new(&set, 0.4).unwrap();
            let sum = c.forward(Some(&[1]), &[2], &a.add(&b).unwrap()).unwrap();
            let parts = c.forward(Some(&[1]), &[2], &a).unwrap().add(&c.forward(Some(&[1]), &[2], &b).unwrap()).unwrap();
            prop_assert!(max_abs(&(sum.matrix() - parts.matrix())) < 1e-12);
        }
    }
}
