use phenoflow::*;
use proptest::prelude::*;

fn solver(cells: usize, nodes: usize, gamma: f64, epsilon: f64, reaction: ReactionSpec) -> Solver {
    let grid = SpatialGrid::new_1d(-1.0, 1.0, cells).unwrap();
    let mesh = PhenotypeMesh::new(nodes).unwrap();
    let mut cfg = SolverConfig::new(PressureExponent::new(gamma).unwrap(), 1.0);
    cfg.epsilon = epsilon;
    cfg.boundary = BoundaryPolicy::Ignore;
    Solver::new(grid, mesh, reaction, cfg).unwrap()
}

fn data(cells: usize, nodes: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0..0.9f64, cells), nodes)
}

fn mass(s: &Solver, st: &SimulationState) -> f64 {
    st.rho.iter().sum::<f64>() * s.grid.spacing(0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn steps_keep_densities_nonnegative(
        layers in data(24, 3),
        gamma in 1.5..8.0f64,
        epsilon in 0.0..0.1f64,
        g0 in 0.0..2.0f64,
    ) {
        let s = solver(24, 3, gamma, epsilon, ReactionSpec::linear(g0, 0.5, 1.0));
        let mut st = s.state(PopulationField::from_layers(layers).unwrap(), 0.0, 0).unwrap();
        for _ in 0..20 {
            let dt = s.stable_dt(&st);
            prop_assert!(dt > 0.0 && dt.is_finite());
            st = s.step(&st, dt).unwrap().0;
            for j in 0..3 {
                prop_assert!(st.n.layer(j).iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn zero_reaction_without_outflow_conserves_mass(
        layers in data(32, 2),
        gamma in 1.5..6.0f64,
    ) {
        // keep the data away from the walls so nothing reaches the ghost cells
        let layers: Vec<Vec<f64>> = layers
            .into_iter()
            .map(|l| l.iter().enumerate().map(|(i, &v)| if (8..24).contains(&i) { v } else { 0.0 }).collect())
            .collect();
        let s = solver(32, 2, gamma, 0.0, ReactionSpec::zero(1.0));
        let mut st = s.state(PopulationField::from_layers(layers).unwrap(), 0.0, 0).unwrap();
        let m0 = mass(&s, &st);
        for _ in 0..5 {
            let dt = s.stable_dt(&st);
            st = s.step(&st, dt).unwrap().0;
        }
        prop_assert!((mass(&s, &st) - m0).abs() <= 1e-13 * m0.max(1.0));
    }

    #[test]
    fn layer_sums_follow_density_equation(layers in data(20, 4), gamma in 1.5..5.0f64) {
        let s = solver(20, 4, gamma, 0.0, ReactionSpec::linear(0.8, 0.0, 1.0));
        let st = s.state(PopulationField::from_layers(layers).unwrap(), 0.0, 0).unwrap();
        let dt = s.stable_dt(&st);
        let rho = s.step_density_only(&st.rho, dt).unwrap();
        let next = s.step(&st, dt).unwrap().0;
        for (a, b) in next.rho.iter().zip(rho.iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
