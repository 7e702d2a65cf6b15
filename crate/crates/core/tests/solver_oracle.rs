use polarized_traces::layered::direct_solve;
use polarized_traces::nested::{CellOptions, NestedLayer, Role};
use polarized_traces::prelude::*;

fn problem(nx: usize, ny: usize, spec: ModelSpec) -> Problem {
    let grid = Grid::new(nx, ny, 10.0, 8).unwrap();
    let model = synthetic_model(&spec, &grid).unwrap();
    Problem::new(grid, model, 10.0).unwrap()
}

fn lens() -> ModelSpec {
    ModelSpec::Lens { c_background: 2000.0, c_lens: 1600.0, radius: 0.25 }
}

#[test]
fn layered_matches_direct() {
    let pb = problem(32, 32, lens());
    let f = point_source(&pb.grid, 10, 7);
    let reference = direct_solve(&pb, &f).unwrap();
    for l in [1, 2, 3, 4] {
        let solver = OuterSolver::build(&pb, &SolverOptions::layered(l)).unwrap();
        let (u, stats) = solver.solve(&f, 1e-10).unwrap();
        assert!(stats.converged, "L={l}");
        let err = u.rel_diff(&reference);
        assert!(err < 1e-8, "L={l}: {err}, iterations {}", stats.iterations);
    }
}

#[test]
fn nested_matches_direct() {
    let pb = problem(40, 32, lens());
    let f = point_source(&pb.grid, 30, 20);
    let reference = direct_solve(&pb, &f).unwrap();
    for strategy in [InnerStrategy::CompressedLu, InnerStrategy::NestedPolarized] {
        for lc in [1, 2, 3] {
            let mut opts = SolverOptions::nested(3, lc, strategy);
            opts.inner_eps = None;
            opts.inner_tol = 1e-12;
            let solver = OuterSolver::build(&pb, &opts).unwrap();
            let (u, stats) = solver.solve(&f, 1e-10).unwrap();
            let err = u.rel_diff(&reference);
            assert!(stats.converged && err < 1e-7, "{strategy:?} Lc={lc}: {err}");
        }
    }
}

#[test]
fn nested_layer_reproduces_direct_greens() {
    let pb = problem(36, 24, lens());
    let solver = OuterSolver::build(&pb, &SolverOptions::layered(2)).unwrap();
    let layer = &solver.layers[1];
    let w = layer.ext_nx();
    let lead: Vec<C64> = (0..2 * w).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
    let reference = solver.apply_direct(1, Some(&lead), None).unwrap();
    let opts = CellOptions { eps: None, keep_dense: true, keep_factor: true, ..Default::default() };
    let nested = NestedLayer::build(&pb, layer, 3, &opts).unwrap();
    let err = nested.compare(&reference, Some(&lead), None).unwrap();
    assert!(err < 1e-10, "{err}");

    let cell = &nested.cells[1];
    for (out, inp) in [(Role::Lead, Role::Trail), (Role::Red, Role::Lead), (Role::Trail, Role::Red)] {
        let k = cell.block(out, inp).unwrap();
        let v: Vec<C64> = (0..k.cols()).map(|i| C64::new(1.0 / (1.0 + i as f64), 0.3)).collect();
        let a = k.matvec(&v).unwrap();
        let b = cell.apply_matrix_free(out, inp, &v).unwrap();
        let d = polarized_traces::dense::rel_diff(&a, &b);
        assert!(d < 1e-10, "{out:?}/{inp:?}: {d}");
    }
    let ab = cell.raw_block(Role::Lead, Role::Trail).unwrap();
    let ba = cell.raw_block(Role::Trail, Role::Lead).unwrap();
    assert!(ab.sub(&ba.transpose()).fro_norm() < 1e-8 * ab.fro_norm());
}
