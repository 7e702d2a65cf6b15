use polarized_traces::dense::Mat;
use polarized_traces::layered::{build_layer, partition_layers};
use polarized_traces::nested::{build_cell_greens, CellOptions, Role};
use polarized_traces::plr::{compress, LeafKind, PlrMatrix};
use polarized_traces::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn identity_is_reproduced_exactly_in_the_leaves() {
    let a = Mat::identity(128);
    let p = compress(&a, 1e-8, 16).unwrap();
    assert!(p.to_dense().sub(&a).fro_norm() <= 1e-8 * a.fro_norm());
    assert!(p.leaves().iter().any(|l| l.kind == LeafKind::Zero));
    assert!(p.stats().ratio < 0.5);
}

#[test]
fn random_matrix_falls_back_to_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = Mat::from_fn(200, 200, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let p = compress(&a, 1e-8, 32).unwrap();
    assert!(p.to_dense().sub(&a).fro_norm() <= 1e-8 * a.fro_norm());
    assert!((p.stats().ratio - 1.0).abs() < 1e-12, "{:?}", p.stats());
}

#[test]
fn uncompressed_matrix_reports_full_storage() {
    let a = Mat::from_fn(10, 7, |i, j| C64::new((i + j) as f64, 0.0));
    let p = PlrMatrix::from_dense(a.clone());
    assert_eq!(p.eps(), 0.0);
    assert_eq!(p.to_dense(), a);
    assert_eq!(p.stats().ratio, 1.0);
}

#[test]
fn invalid_tolerance_is_rejected() {
    let a = Mat::identity(4);
    assert!(compress(&a, 0.0, 8).is_err());
    assert!(compress(&a, 1.5, 8).is_err());
}

#[test]
fn cell_green_block_compresses() {
    let grid = Grid::new(192, 128, 10.0, 8).unwrap();
    let model = synthetic_model(&ModelSpec::Constant { c: 2000.0 }, &grid).unwrap();
    let problem = Problem::new(grid, model, 10.0).unwrap();
    let part = partition_layers(&grid, 2).unwrap();
    let layer = build_layer(&problem, &part, 0).unwrap();
    let opts = CellOptions { eps: Some(1e-8), ..Default::default() };
    let cells = build_cell_greens(&problem, &layer, 3, &opts).unwrap();
    assert_eq!(cells[1].own_cols.len(), 64);
    let block = cells[1].block(Role::Trail, Role::Lead).unwrap();
    let stats = block.stats();
    assert!(stats.ratio < 0.5, "{stats:?}");
    let exact = build_cell_greens(&problem, &layer, 3, &CellOptions { eps: None, ..Default::default() }).unwrap();
    let dense = exact[1].block(Role::Trail, Role::Lead).unwrap().to_dense();
    let err = block.to_dense().sub(&dense).fro_norm() / dense.fro_norm();
    assert!(err <= 1e-8, "{err}");
}
