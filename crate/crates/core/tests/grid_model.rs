use polarized_traces::dense::{dot, norm2};
use polarized_traces::io::{load_model, read_field, write_field, write_model};
use polarized_traces::prelude::*;
use polarized_traces::sparse::lu::factorize;

#[test]
fn dirichlet_laplacian_lowest_eigenvalue() {
    let n = 64;
    let grid = Grid::dirichlet(n, n, 1.0 / (n + 1) as f64).unwrap();
    let model = SlownessModel::from_values(n, n, vec![1.0; n * n]).unwrap();
    let problem = Problem::with_omega(grid, model, 0.0, None).unwrap();
    let a = problem.assemble_patch(&grid.full_patch());
    let lu = factorize(&a).unwrap();
    let mut x = vec![C64::new(1.0, 0.0); a.dim()];
    for _ in 0..30 {
        x = lu.solve(&x).unwrap();
        let s = norm2(&x);
        x.iter_mut().for_each(|v| *v /= s);
    }
    let lambda = dot(&x, &a.matvec(&x).unwrap()).re;
    let exact = 2.0 * std::f64::consts::PI.powi(2);
    assert!((lambda - exact).abs() / exact < 0.02, "{lambda} vs {exact}");
}

fn write_raw(path: &std::path::Path, header: &str, values: &[f64]) {
    let mut bytes = format!("{header}\n").into_bytes();
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes).unwrap();
}

#[test]
fn model_file_examples() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::new(4, 4, 1.0, 2).unwrap();
    let path = dir.path().join("m.helm-m");
    let slowness = 1.0 / (2000.0f64 * 2000.0);
    write_raw(&path, "HELM-M v1 4 4", &[slowness; 16]);
    let m = load_model(&path, &grid).unwrap();
    assert!(m.values().iter().all(|&v| v == slowness));
    assert!((m.min_velocity() - 2000.0).abs() < 1e-9);

    write_raw(&path, "HELM-M v1 4 5", &[slowness; 20]);
    assert!(matches!(load_model(&path, &grid), Err(Error::DimensionMismatch { .. })));

    write_raw(&path, "HELM-M v1 4 4", &[slowness; 15]);
    assert!(matches!(load_model(&path, &grid), Err(Error::Format(_))));

    let mut bad = vec![slowness; 16];
    bad[5] = -1.0;
    write_raw(&path, "HELM-M v1 4 4", &bad);
    assert!(matches!(load_model(&path, &grid), Err(Error::NonPositive { index: 5, .. })));
}

#[test]
fn synthetic_model_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::new(24, 16, 5.0, 4).unwrap();
    let m = synthetic_model(&ModelSpec::RoughLayered { seed: 3, c_min: 1500.0, c_max: 4500.0 }, &grid).unwrap();
    let path = dir.path().join("rough.helm-m");
    write_model(&m, &path).unwrap();
    assert_eq!(load_model(&path, &grid).unwrap(), m);
    assert!(m.min_velocity() >= 1500.0 - 1e-9 && m.max_velocity() <= 4500.0 + 1e-9);
}

#[test]
fn field_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::new(64, 64, 10.0, 8).unwrap();
    let mut u = ComplexField::zeros(&grid);
    for (i, v) in u.values.iter_mut().enumerate() {
        *v = C64::new((i as f64 * 0.1).sin() / 3.0, (i as f64).sqrt());
    }
    let path = dir.path().join("u.helm-u");
    write_field(&u, &path).unwrap();
    let header = "HELM-U v1 64 64\n".len() as u64;
    assert_eq!(std::fs::metadata(&path).unwrap().len(), header + 64 * 64 * 16);
    let (nx, ny, values) = read_field(&path).unwrap();
    assert_eq!((nx, ny), (64, 64));
    let expect = u.interior();
    assert!(values
        .iter()
        .zip(&expect)
        .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));
}

#[test]
fn grid_validation() {
    assert!(matches!(Grid::new(3, 8, 1.0, 4), Err(Error::InvalidDimension(_))));
    assert!(matches!(Grid::new(8, 8, 0.0, 4), Err(Error::InvalidDimension(_))));
    assert!(matches!(Grid::new(8, 8, 1.0, 1), Err(Error::InvalidDimension(_))));
    let g = build_grid(10, 6, 2.0, 3).unwrap();
    assert_eq!((g.ext_nx(), g.ext_ny(), g.n_total()), (16, 12, 192));
    let idx = g.index(5, 7);
    assert_eq!(g.coords(idx), (5, 7));
}

#[test]
fn pml_profile_validation() {
    assert!(PmlProfile::new(-1.0, 2).is_err());
    let p = PmlProfile::new(10.0, 2).unwrap();
    assert_eq!(p.sigma(0.0), 0.0);
    assert!((p.sigma(1.0) - 10.0).abs() < 1e-12);
    assert!(p.sigma(0.5) < p.sigma(0.75));
}
