use polarized_traces::bench::{
    run_solve, snapshot_iterations, write_outputs, write_snapshots, ModelSource, RunConfig, REPORT_COLUMNS,
};
use polarized_traces::prelude::*;

#[test]
fn nested_run_converges() {
    let cfg = RunConfig::square(64, 10.0, 2, 2);
    let out = run_solve(&cfg).unwrap();
    let r = &out.report;
    assert!(r.converged && r.iterations <= 5, "{r:?}");
    assert!(r.volume_residual <= 1e-4);
    assert!(r.stored_scalars > 0 && r.compression_ratio <= 1.0);
    assert_eq!(r.residual_history.split(';').count(), r.iterations + 1);
}

#[test]
fn outputs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_solve(&RunConfig::square(32, 8.0, 2, 1)).unwrap();
    write_outputs(&out, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), REPORT_COLUMNS.join(","));
    assert_eq!(csv.lines().count(), 2);
    assert!(dir.path().join("field.helm-u").exists());
    let pgm = std::fs::read(dir.path().join("field.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n32 32\n255\n"));
}

#[test]
fn snapshot_sequence() {
    let cfg = RunConfig { tol: 1e-8, ..RunConfig::square(48, 8.0, 3, 1) };
    let snaps = snapshot_iterations(&cfg).unwrap();
    assert!(snaps.len() >= 3);

    let problem = cfg.problem().unwrap();
    let solver = OuterSolver::build(&problem, &cfg.solver_options()).unwrap();
    let f = cfg.source(&problem.grid);
    let zero = polarized_traces::sweep::TraceSet::zeros(solver.num_interfaces(), solver.width());
    let local = solver.reconstruct_volume(&zero, &f).unwrap();
    assert!(snaps[0].rel_diff(&local) < 1e-14);

    let last = snaps.last().unwrap();
    assert!(last.rel_diff(&run_solve(&cfg).unwrap().field) < 1e-14);
    let dist: Vec<f64> = snaps.iter().map(|s| s.rel_diff(last)).collect();
    assert!(dist.windows(2).all(|w| w[1] <= w[0] * 1.01 + 1e-12), "{dist:?}");

    let dir = tempfile::tempdir().unwrap();
    let names = write_snapshots(&snaps, dir.path()).unwrap();
    assert_eq!(names.len(), snaps.len());
    assert!(dir.path().join("snapshot_final.helm-u").exists());
}

#[test]
fn config_errors() {
    assert!(matches!(RunConfig::from_toml("nx = 32"), Err(Error::Config(_))));
    let text = r#"
        nx = 32
        ny = 32
        h = 10.0
        f_hz = 8.0
        layers = 2
        bogus = 1
        model = { kind = "constant", c = 2000.0 }
    "#;
    assert!(matches!(RunConfig::from_toml(text), Err(Error::Config(_))));
    let missing = RunConfig {
        model: ModelSource::File { file: "/nonexistent/model.helm-m".into() },
        ..RunConfig::square(32, 8.0, 2, 1)
    };
    assert!(matches!(missing.validate(), Err(Error::Config(_))));
    let too_many = RunConfig::square(32, 8.0, 9, 1);
    assert!(matches!(run_solve(&too_many), Err(Error::TooManyLayers(_))));
}

#[test]
fn coarse_resolution_is_flagged() {
    let cfg = RunConfig::square(32, 40.0, 2, 1);
    let grid = cfg.grid().unwrap();
    assert!(cfg.resolution_warning(&cfg.model(&grid).unwrap()).is_some());
    let fine = RunConfig::square(32, 8.0, 2, 1);
    assert!(fine.resolution_warning(&fine.model(&grid).unwrap()).is_none());
}

#[test]
fn pml_strength_is_configurable() {
    let base = RunConfig::square(32, 8.0, 2, 1);
    let weak = RunConfig { pml_strength: Some(5.0), ..base.clone() };
    let p = weak.problem().unwrap().profile.unwrap();
    let q = base.problem().unwrap().profile.unwrap();
    assert!((p.sigma_max * 8.0 - q.sigma_max).abs() < 1e-9 * q.sigma_max);
    assert!(matches!(RunConfig { pml_strength: Some(0.0), ..base }.validate(), Err(Error::Config(_))));
}
