use std::path::{Path, PathBuf};

use phenoflow::experiments::{parse_config, read_diagnostics, write_trajectory, Verifier, VerifyOptions};
use phenoflow::*;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn reference_configs_validate_and_prepare() {
    for name in ["barenblatt", "logistic", "saturation", "positivity"] {
        let cfg = parse_config(&configs().join(format!("{name}.toml"))).unwrap();
        let run = cfg.prepare().unwrap();
        assert_eq!(run.n0.layer_count(), cfg.phenotype.nodes, "{name}");
    }
}

#[test]
fn barenblatt_run_tracks_oracle() {
    let mut cfg = parse_config(&configs().join("barenblatt.toml")).unwrap();
    cfg.grid.cells = 200;
    let run = cfg.prepare().unwrap();
    let traj = run.solver.run(&run.n0).unwrap();
    let oracle = BarenblattProfile::new(cfg.gamma().unwrap(), 1, cfg.initial.mass, cfg.initial.t0).unwrap();
    let fin = traj.final_state();
    let grid = &run.solver.grid;
    let h = grid.spacing(0);
    let err: f64 = (0..grid.len())
        .map(|c| (fin.rho[c] - oracle.density(grid.center(c)[0].abs(), traj.t_end).unwrap()).abs() * h)
        .sum();
    assert!(err < 2.5e-2, "L1 error {err}");
    assert!((traj.stats.final_mass - traj.stats.initial_mass).abs() < 1e-12);

    // the support spreads
    let width = |rho: &[f64]| rho.iter().filter(|&&r| r > 1e-8).count();
    assert!(width(&fin.rho) > width(&traj.snapshots[0].state.rho));
}

#[test]
fn solver_is_deterministic() {
    let cfg = parse_config(&configs().join("saturation.toml")).unwrap();
    let mut cfg = cfg;
    cfg.solver.t_end = 0.05;
    let a = cfg.prepare().unwrap();
    let b = cfg.prepare().unwrap();
    let ta = a.solver.run(&a.n0).unwrap();
    let tb = b.solver.run(&b.n0).unwrap();
    assert_eq!(ta.final_state().n, tb.final_state().n);
    assert_eq!(ta.records, tb.records);
}

#[test]
fn trajectory_files_round_trip() {
    let mut cfg = parse_config(&configs().join("positivity.toml")).unwrap();
    cfg.solver.t_end = 0.02;
    let run = cfg.prepare().unwrap();
    let traj = run.solver.run(&run.n0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_trajectory(dir.path(), &traj, &run.solver.grid).unwrap();
    assert_eq!(read_diagnostics(&dir.path().join("diagnostics.csv")).unwrap(), traj.records);
    let last = traj.snapshots.len() - 1;
    let snap = experiments::read_snapshot(
        &dir.path().join(format!("snapshot_{last:04}.csv")),
        &run.solver.grid,
        &run.solver.mesh,
    )
    .unwrap();
    assert_eq!(snap, traj.final_state().n);
}

#[test]
fn corrupted_oracle_constant_fails_self_test() {
    let good = Verifier::new(VerifyOptions::new(configs())).unwrap();
    assert!(good.run_one("self-test").unwrap().passed);
    assert!(good.run_one("schema").unwrap().passed);

    let mut opts = VerifyOptions::new(configs());
    opts.barenblatt_shape = Some(0.1);
    let bad = Verifier::new(opts).unwrap();
    let o = bad.run_one("self-test").unwrap();
    assert!(!o.passed, "{o}");
}

#[test]
fn missing_config_directory_is_reported() {
    assert!(Verifier::new(VerifyOptions::new(Path::new("/nonexistent/configs"))).is_err());
}
