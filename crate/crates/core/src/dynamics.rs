//! Hamiltonians `H_n`, the Heisenberg groups `𝒢_n(t) g = e^{itH_n} g e^{-itH_n}`,
//! their state-side adjoints and the generators `𝒩_0`, `𝒩_int`.

use nalgebra::SymmetricEigen;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::tensor::{NBodyOperator, ParticleModel};
use crate::{local, CMatrix};

/// Upper bound on the dense space dimension `d^n` of any cached level.
pub const MAX_SPACE_DIM: usize = 4096;

#[derive(Clone, Debug)]
struct Level {
    hamiltonian: CMatrix,
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

/// `H_n` and its eigendecomposition for every `n ≤ max_particles`.
#[derive(Clone, Debug)]
pub struct HamiltonianSet {
    model: ParticleModel,
    levels: Vec<Level>,
}

/// `Σ_i K(i) + ε Σ_{i<j} Φ(i,j)` on `n` particles.
pub fn assemble_hamiltonian(model: &ParticleModel, n: usize) -> CMatrix {
    let d = model.dim();
    let size = d.pow(n as u32);
    let mut h = CMatrix::zeros(size, size);
    for i in 0..n {
        h += local::embed(d, n, &[i], model.kinetic());
    }
    if model.epsilon() != 0.0 {
        for i in 0..n {
            for j in i + 1..n {
                h += local::embed(d, n, &[i, j], model.potential()).scale(model.epsilon());
            }
        }
    }
    h
}

impl HamiltonianSet {
    pub fn new(model: &ParticleModel, max_particles: usize) -> Result<Self> {
        let d = model.dim();
        let limit = (1..).take_while(|&n| d.checked_pow(n as u32).is_some_and(|v| v <= MAX_SPACE_DIM)).last().unwrap_or(0);
        if max_particles > limit {
            return Err(Error::TooManyParticles { requested: max_particles, max: limit });
        }
        let levels = (0..=max_particles)
            .map(|n| {
                let h = assemble_hamiltonian(model, n);
                let eig = SymmetricEigen::new(h.clone());
                Level { hamiltonian: h, eigenvalues: eig.eigenvalues.iter().copied().collect(), eigenvectors: eig.eigenvectors }
            })
            .collect();
        Ok(Self { model: model.clone(), levels })
    }

    pub fn model(&self) -> &ParticleModel {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn max_particles(&self) -> usize {
        self.levels.len() - 1
    }

    fn level(&self, n: usize) -> Result<&Level> {
        self.levels.get(n).ok_or(Error::TooManyParticles { requested: n, max: self.max_particles() })
    }

    pub fn hamiltonian(&self, n: usize) -> Result<&CMatrix> {
        Ok(&self.level(n)?.hamiltonian)
    }

    pub fn eigenvalues(&self, n: usize) -> Result<&[f64]> {
        Ok(&self.level(n)?.eigenvalues)
    }

    pub fn eigenvectors(&self, n: usize) -> Result<&CMatrix> {
        Ok(&self.level(n)?.eigenvectors)
    }

    /// `e^{itH_n}`.
    pub fn propagator(&self, n: usize, t: f64) -> Result<CMatrix> {
        let lv = self.level(n)?;
        if t == 0.0 {
            return Ok(CMatrix::identity(lv.hamiltonian.nrows(), lv.hamiltonian.ncols()));
        }
        let v = &lv.eigenvectors;
        let mut scaled = v.clone();
        for (k, &e) in lv.eigenvalues.iter().enumerate() {
            let phase = C64::from_polar(1.0, t * e);
            for z in scaled.column_mut(k).iter_mut() {
                *z *= phase;
            }
        }
        Ok(scaled * v.adjoint())
    }

    /// Precomputed propagators for a fixed time.
    pub fn flow(&self, t: f64) -> Result<Flow> {
        Flow::new(self, t)
    }

    /// `e^{itH_n} g e^{-itH_n}`.
    pub fn heisenberg_map(&self, n: usize, t: f64, g: &NBodyOperator) -> Result<NBodyOperator> {
        check_count(n, g)?;
        let u = self.propagator(n, t)?;
        NBodyOperator::new(g.dim(), g.particles().to_vec(), &u * g.matrix() * u.adjoint())
    }

    /// `e^{-itH_n} f e^{itH_n}`.
    pub fn schrodinger_map(&self, n: usize, t: f64, f: &NBodyOperator) -> Result<NBodyOperator> {
        self.heisenberg_map(n, -t, f)
    }

    /// `d/dt 𝒢_n(t) g` at `t = 0`: `-i[g, H_n]`.
    pub fn generator(&self, g: &NBodyOperator) -> Result<NBodyOperator> {
        let h = self.hamiltonian(g.particle_count())?;
        let m = (g.matrix() * h - h * g.matrix()) * C64::new(0.0, -1.0);
        NBodyOperator::new(g.dim(), g.particles().to_vec(), m)
    }
}

fn check_count(n: usize, g: &NBodyOperator) -> Result<()> {
    if g.particle_count() != n {
        return Err(Error::DimensionMismatch(format!(
            "operator acts on {} particles, group on {n}",
            g.particle_count()
        )));
    }
    Ok(())
}

/// Propagators `e^{itH_m}` for `m = 1..=max` at one fixed time, applied to
/// operators on arbitrary particle subsets of a larger space.
#[derive(Clone, Debug)]
pub struct Flow {
    t: f64,
    props: Vec<CMatrix>,
}

impl Flow {
    pub fn new(set: &HamiltonianSet, t: f64) -> Result<Self> {
        let props = (0..=set.max_particles()).map(|m| set.propagator(m, t)).collect::<Result<_>>()?;
        Ok(Self { t, props })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn propagator(&self, m: usize) -> Result<&CMatrix> {
        self.props.get(m).ok_or(Error::TooManyParticles { requested: m, max: self.props.len() - 1 })
    }

    /// `𝒢_{|X|}(t, X)` applied to `g`, with `X = support ⊆ g.particles()`.
    pub fn heisenberg(&self, g: &NBodyOperator, support: &[usize]) -> Result<NBodyOperator> {
        if support.is_empty() {
            return Ok(g.clone());
        }
        g.conjugated(self.propagator(support.len())?, support)
    }

    /// `𝒢_{|X|}(-t, X)` applied to `g`.
    pub fn schrodinger(&self, g: &NBodyOperator, support: &[usize]) -> Result<NBodyOperator> {
        if support.is_empty() {
            return Ok(g.clone());
        }
        g.conjugated(&self.propagator(support.len())?.adjoint(), support)
    }

    /// `∏_{i ∈ X} 𝒢_1(t, i)` applied to `g`.
    pub fn heisenberg_each(&self, g: &NBodyOperator, support: &[usize]) -> Result<NBodyOperator> {
        let u = self.propagator(1)?;
        support.iter().try_fold(g.clone(), |acc, &i| acc.conjugated(u, &[i]))
    }

    /// `∏_{i ∈ X} 𝒢_1(-t, i)` applied to `g`.
    pub fn schrodinger_each(&self, g: &NBodyOperator, support: &[usize]) -> Result<NBodyOperator> {
        let u = self.propagator(1)?.adjoint();
        support.iter().try_fold(g.clone(), |acc, &i| acc.conjugated(&u, &[i]))
    }
}

/// `𝒩_0(i) g = -i[g, K(i)]`.
pub fn liouvillian_free(model: &ParticleModel, i: usize, g: &NBodyOperator) -> Result<NBodyOperator> {
    Ok(g.commutator_with(model.kinetic(), &[i])?.scaled_complex(C64::new(0.0, -1.0)))
}

/// `𝒩_int(i,j) g = -i[g, Φ(i,j)]`, without the factor `ε`.
pub fn liouvillian_int(model: &ParticleModel, i: usize, j: usize, g: &NBodyOperator) -> Result<NBodyOperator> {
    if i == j {
        return Err(Error::InvalidArgument(format!("interaction generator needs two distinct particles, got ({i}, {i})")));
    }
    Ok(g.commutator_with(model.potential(), &[i, j])?.scaled_complex(C64::new(0.0, -1.0)))
}

/// `Σ_i 𝒩_0(i) g` over all particles of `g`.
pub fn free_generator(model: &ParticleModel, g: &NBodyOperator) -> Result<NBodyOperator> {
    let mut acc = NBodyOperator::zeros(g.dim(), g.particles().to_vec())?;
    for &i in g.particles() {
        acc.add_scaled_assign(1.0, &liouvillian_free(model, i, g)?)?;
    }
    Ok(acc)
}

/// `Σ_{i<j} 𝒩_int(i,j) g` over all pairs of particles of `g`.
pub fn interaction_generator(model: &ParticleModel, g: &NBodyOperator) -> Result<NBodyOperator> {
    let p = g.particles().to_vec();
    let mut acc = NBodyOperator::zeros(g.dim(), p.clone())?;
    for a in 0..p.len() {
        for b in a + 1..p.len() {
            acc.add_scaled_assign(1.0, &liouvillian_int(model, p[a], p[b], g)?)?;
        }
    }
    Ok(acc)
}
