use dualkin_core::cumulants::Cumulants;
use dualkin_core::fixtures::Fixtures;
use dualkin_core::gke::{f1_series, marginal_functional, FunctionalTruncation};
use dualkin_core::hartree::{hartree_solve, read_grid_state, wave_packet, write_grid_state, Grid1D, Kernel};
use dualkin_core::hierarchy::{evolve_expansion, evolve_ode_oracle, mean_value};
use dualkin_core::kinetic::{chaos_equality, vlasov_solve_ode};
use dualkin_core::meanfield::{limit_evolve_ode, limit_evolve_spectral};
use dualkin_core::tensor::{max_abs, trace_norm};
use dualkin_core::{HamiltonianSet, NBodyOperator, OneParticleState, StateSequence};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn expansion_agrees_with_oracle(seed in 0u64..10_000, t in -1.0f64..1.0, eps in 0.1f64..1.0) {
        let mut fx = Fixtures::new(seed);
        let set = HamiltonianSet::new(&fx.model(2, 1.0, eps), 3).unwrap();
        let g0 = fx.observable_sequence(2, 3);
        let a = evolve_expansion(&g0, t, &set).unwrap();
        let b = evolve_ode_oracle(&g0, t, &set).unwrap();
        prop_assert!(a.sub(&b).unwrap().gamma_norm(0.1).unwrap() <= 1e-8);
    }

    #[test]
    fn limit_solvers_agree(seed in 0u64..10_000, t in -0.6f64..0.6) {
        let mut fx = Fixtures::new(seed);
        let model = fx.model(2, 1.0, 1.0);
        let g0 = fx.observable_sequence(2, 3);
        let a = limit_evolve_ode(&g0, t, &model).unwrap();
        let b = limit_evolve_spectral(&g0, t, &model, 24).unwrap();
        for s in 0..=3 {
            prop_assert!(a.entry(s).sub(b.entry(s)).unwrap().op_norm() < 1e-9);
        }
    }

    #[test]
    fn cumulant_of_order_two_is_group_minus_product(seed in 0u64..10_000, t in -1.0f64..1.0) {
        let mut fx = Fixtures::new(seed);
        let set = HamiltonianSet::new(&fx.model(2, 1.0, 0.7), 2).unwrap();
        let g = NBodyOperator::on_leading(2, fx.symmetric_hermitian(2, 2)).unwrap();
        let c = Cumulants::new(&set, t).unwrap();
        let second = c.forward(None, &[1, 2], &g).unwrap();
        let flow = set.flow(t).unwrap();
        let expect = flow.heisenberg(&g, &[1, 2]).unwrap().sub(&flow.heisenberg_each(&g, &[1, 2]).unwrap()).unwrap();
        prop_assert!(second.sub(&expect).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn hartree_conserves_mass(seed in 0u64..10_000, strength in -2.0f64..2.0) {
        let mut fx = Fixtures::new(seed);
        let grid = Grid1D::new(16, 0.75, Kernel::Delta { strength }).unwrap();
        let psi = wave_packet(&grid, fx.uniform(4.0, 8.0), fx.uniform(0.8, 2.0), fx.uniform(-1.0, 1.0));
        let run = hartree_solve(&psi, &grid, 0.3, 0.01).unwrap();
        prop_assert!(run.max_mass_step <= 1e-12);
        prop_assert!((grid.mass(&run.psi) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn chaos_pairing_matches_mean_value_of_limit_sequence() {
    let mut fx = Fixtures::new(17);
    let model = fx.model(2, 1.0, 1.0);
    let f0 = OneParticleState::physical(fx.density_matrix(2, 0.2)).unwrap();
    let g1 = NBodyOperator::new(2, vec![1], fx.hermitian(2)).unwrap();
    let report = chaos_equality(&model, &g1, &f0, 0.3, 5).unwrap();
    let ft = vlasov_solve_ode(&model, &f0, 0.3, 1e-12).unwrap();
    let direct = (g1.matrix() * ft.matrix()).trace().re;
    assert!((report.rhs - direct).abs() < 1e-14);
    assert!(report.abs_err <= 10.0 * report.tail_estimate);
}

#[test]
fn functional_trace_tracks_the_one_particle_series() {
    let mut fx = Fixtures::new(23);
    let model = fx.model(2, 1.0, 1.0);
    let set = HamiltonianSet::new(&model, 6).unwrap();
    let f0 = OneParticleState::physical(fx.density_matrix(2, 0.2)).unwrap();
    let trunc = FunctionalTruncation::new(2, 2, 5, 0.2).unwrap();
    let f1 = f1_series(&set, &f0, 0.3, 5).unwrap();
    let f2 = marginal_functional(&set, 0.3, 2, &f1.state, &trunc).unwrap();
    // total weight stays λ² up to the truncation tail
    let w = f2.value.trace().re;
    assert!((w - f1.state.weight().powi(2)).abs() < 1e-6, "{w}");
    let chaos = StateSequence::chaos(f0.matrix(), 3).unwrap();
    let g0 = fx.observable_sequence(2, 3);
    let mv = mean_value(&evolve_expansion(&g0, 0.0, &set).unwrap(), &chaos).unwrap();
    assert!(mv.terms.len() == 4 && mv.monotone_tail());
}

#[test]
fn grid_state_files_round_trip() {
    let grid = Grid1D::new(12, 1.0, Kernel::Gaussian { amplitude: 1.0, width: 1.5 }).unwrap();
    let psi = hartree_solve(&wave_packet(&grid, 5.0, 1.5, 0.6), &grid, 0.2, 1e-2).unwrap().psi;
    let path = std::env::temp_dir().join(format!("dualkin-grid-{}.txt", std::process::id()));
    write_grid_state(std::fs::File::create(&path).unwrap(), &grid, &psi).unwrap();
    let (q, back) = read_grid_state(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(q, grid.coordinates());
    assert_eq!(back, psi);
    let rho = NBodyOperator::new(12, vec![1], dualkin_core::CMatrix::from_fn(12, 12, |i, j| back[i] * back[j].conj())).unwrap();
    assert!(max_abs(&(rho.matrix() - rho.matrix().adjoint())) < 1e-15);
    assert!(trace_norm(rho.matrix()) > 0.0);
}
