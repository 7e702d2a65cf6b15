use std::collections::BTreeMap;
use std::process::ExitCode;

use polarized_traces::analytic::green_2d;
use polarized_traces::bench::{default_npml, fit_slope, run_scaling_study, run_solve, ModelSource, RunConfig};
use polarized_traces::dense::{norm2, Mat};
use polarized_traces::layered::direct_solve;
use polarized_traces::nested::{CellOptions, NestedLayer};
use polarized_traces::plr::{compress, DEFAULT_MAX_LEAF};
use polarized_traces::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn models() -> Vec<(&'static str, ModelSpec)> {
    vec![
        ("constant", ModelSpec::Constant { c: 2000.0 }),
        ("gradient", ModelSpec::VerticalGradient { c_top: 1500.0, c_bottom: 3000.0 }),
        ("rough7", ModelSpec::RoughLayered { seed: 7, c_min: 1500.0, c_max: 4500.0 }),
    ]
}

fn case_config(n: usize, spec: &ModelSpec, layers: usize, cells: usize, strategy: InnerStrategy) -> RunConfig {
    RunConfig {
        h: 1280.0 / n as f64,
        model: ModelSource::Synthetic(spec.clone()),
        strategy,
        sources: vec![[n / 2, n / 4]],
        ..RunConfig::square(n, 18.0 * n as f64 / 128.0, layers, cells)
    }
}

struct Case {
    n: usize,
    model: &'static str,
    layers: usize,
    cells: usize,
    strategy: InnerStrategy,
    iterations: usize,
    converged: bool,
    error: f64,
    field: ComplexField,
}

fn oracle_cases() -> Vec<Case> {
    let mut cases = Vec::new();
    for n in [32, 64, 128] {
        for (name, spec) in models() {
            let base = case_config(n, &spec, 2, 1, InnerStrategy::CompressedLu);
            let problem = base.problem().unwrap();
            let f = base.source(&problem.grid);
            let reference = direct_solve(&problem, &f).unwrap();
            for layers in [2, 3] {
                for cells in [1, 2, 3] {
                    for strategy in [InnerStrategy::CompressedLu, InnerStrategy::NestedPolarized] {
                        let cfg = case_config(n, &spec, layers, cells, strategy);
                        let solver = OuterSolver::build(&problem, &cfg.solver_options()).unwrap();
                        let (u, stats) = solver.solve(&f, cfg.tol).unwrap();
                        cases.push(Case {
                            n,
                            model: name,
                            layers,
                            cells,
                            strategy,
                            iterations: stats.iterations,
                            converged: stats.converged,
                            error: u.rel_diff(&reference),
                            field: u,
                        });
                    }
                }
            }
        }
    }
    cases
}

fn oracle_equivalence(cases: &[Case]) -> Outcome {
    let worst = cases.iter().map(|c| c.error).fold(0.0, f64::max);
    let failed: Vec<String> = cases
        .iter()
        .filter(|c| !c.converged || c.error.is_nan() || c.error > 1e-4)
        .map(|c| format!("{}/{}/L{}xC{}/{:?}: {:.2e}", c.n, c.model, c.layers, c.cells, c.strategy, c.error))
        .collect();
    outcome(failed.is_empty(), format!("{} cases, worst error {worst:.2e} {failed:?}", cases.len()))
}

fn iteration_counts(cases: &[Case]) -> Outcome {
    let max_it = cases.iter().map(|c| c.iterations).max().unwrap_or(0);
    let mut spread: BTreeMap<(&str, usize, usize, bool), (usize, usize)> = BTreeMap::new();
    for c in cases {
        let e = spread
            .entry((c.model, c.layers, c.cells, c.strategy == InnerStrategy::CompressedLu))
            .or_insert((usize::MAX, 0));
        e.0 = e.0.min(c.iterations);
        e.1 = e.1.max(c.iterations);
    }
    let worst_spread = spread.values().map(|(lo, hi)| hi - lo).max().unwrap_or(0);
    outcome(
        max_it <= 6 && worst_spread <= 2,
        format!("max iterations {max_it}, max spread across sizes {worst_spread}"),
    )
}

fn strategy_consistency(cases: &[Case]) -> Outcome {
    let mut worst_it = 0;
    let mut worst_diff: f64 = 0.0;
    for pair in cases.chunks(2) {
        let (a, b) = (&pair[0], &pair[1]);
        assert_eq!((a.n, a.model, a.layers, a.cells), (b.n, b.model, b.layers, b.cells));
        worst_it = worst_it.max(a.iterations.abs_diff(b.iterations));
        worst_diff = worst_diff.max(a.field.rel_diff(&b.field));
    }
    outcome(
        worst_it <= 1 && worst_diff <= 1e-4,
        format!("max iteration difference {worst_it}, max field difference {worst_diff:.2e}"),
    )
}

fn random_trace(rng: &mut ChaCha8Rng, len: usize) -> Vec<C64> {
    (0..len).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

fn factorization_identity() -> Outcome {
    let grid = Grid::new(64, 64, 20.0, default_npml(64, 64)).unwrap();
    let model = synthetic_model(&ModelSpec::RoughLayered { seed: 7, c_min: 1500.0, c_max: 4500.0 }, &grid).unwrap();
    let problem = Problem::new(grid, model, 9.0).unwrap();
    let solver = OuterSolver::build(&problem, &SolverOptions::layered(3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut exact, mut compressed) = (0.0f64, 0.0f64);
    for layer in &solver.layers {
        let w = 2 * layer.ext_nx();
        for lc in [2, 3] {
            let dense = CellOptions { eps: None, ..Default::default() };
            let plr = CellOptions { eps: Some(1e-8), ..Default::default() };
            let a = NestedLayer::build(&problem, layer, lc, &dense).unwrap();
            let b = NestedLayer::build(&problem, layer, lc, &plr).unwrap();
            for _ in 0..20 {
                let lead = layer.has_lead.then(|| random_trace(&mut rng, w));
                let trail = layer.has_trail.then(|| random_trace(&mut rng, w));
                let reference = solver.apply_direct(layer.id, lead.as_deref(), trail.as_deref()).unwrap();
                exact = exact.max(a.compare(&reference, lead.as_deref(), trail.as_deref()).unwrap());
                compressed = compressed.max(b.compare(&reference, lead.as_deref(), trail.as_deref()).unwrap());
            }
        }
    }
    outcome(
        exact <= 1e-9 && compressed <= 1e-6,
        format!("uncompressed {exact:.2e}, compressed at 1e-8 {compressed:.2e}"),
    )
}

fn analytic_physics() -> Outcome {
    let n = 64;
    let (h, c) = (10.0, 2000.0);
    let omega = 0.3 * c / h;
    let grid = Grid::new(n, n, h, default_npml(n, n)).unwrap();
    let model = synthetic_model(&ModelSpec::Constant { c }, &grid).unwrap();
    let problem = Problem::new(grid, model, omega / std::f64::consts::PI).unwrap();
    let (sx, sy) = (n / 2, n / 2);
    let f = point_source(&grid, sx, sy);
    let direct = direct_solve(&problem, &f).unwrap();
    let solver = OuterSolver::build(&problem, &SolverOptions::nested(2, 2, InnerStrategy::CompressedLu)).unwrap();
    let (nested, _) = solver.solve(&f, 1e-8).unwrap();
    let r_max = sx.min(sy).min(n - 1 - sx).min(n - 1 - sy) as f64 * h;
    let k = omega / c;
    let mut errs = Vec::new();
    for u in [&direct, &nested] {
        let (mut num, mut den) = (0.0, 0.0);
        for iy in 0..n {
            for ix in 0..n {
                let r = h * ((ix as f64 - sx as f64).powi(2) + (iy as f64 - sy as f64).powi(2)).sqrt();
                if r < 5.0 * h || r > r_max {
                    continue;
                }
                let g = green_2d(k, r);
                num += (u.at(ix, iy) - g).norm_sqr();
                den += g.norm_sqr();
            }
        }
        errs.push((num / den).sqrt());
    }
    let ppw = 2.0 * std::f64::consts::PI / (k * h);
    outcome(
        errs.iter().all(|e| *e <= 0.05),
        format!("{ppw:.1} points per wavelength, direct {:.2}%, nested {:.2}%", 100.0 * errs[0], 100.0 * errs[1]),
    )
}

fn kernel(rng: &mut ChaCha8Rng, kind: usize, m: usize, n: usize) -> Mat {
    let xs: Vec<f64> = (0..m).map(|i| i as f64 / m as f64).collect();
    let ys: Vec<f64> = (0..n).map(|j| j as f64 / n as f64 + rng.random_range(0.0..0.01)).collect();
    match kind {
        0 => Mat::from_fn(m, n, |i, j| C64::new(1.0 / (1.0 + 10.0 * (xs[i] - ys[j]).abs()), 0.0)),
        1 => {
            let k = rng.random_range(5.0..40.0);
            Mat::from_fn(m, n, |i, j| {
                let r = (xs[i] - ys[j]).abs() + 0.01;
                C64::from_polar(1.0 / r.sqrt(), k * r)
            })
        }
        2 => {
            let rank = rng.random_range(1..8);
            let u = Mat::from_fn(m, rank, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let v = Mat::from_fn(rank, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let mut a = u.matmul(&v);
            let noise = Mat::from_fn(m, n, |_, _| C64::new(rng.random_range(-1e-9..1e-9), 0.0));
            a.add_scaled(C64::new(1.0, 0.0), &noise);
            a
        }
        _ => Mat::from_fn(m, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))),
    }
}

fn plr_guarantees() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_rec, mut worst_mv) = (0.0f64, 0.0f64);
    let mut trials = 0;
    for kind in 0..4 {
        for eps in [1e-4, 1e-6, 1e-8] {
            for _ in 0..3 {
                let (m, n) = (rng.random_range(40..200), rng.random_range(40..200));
                let a = kernel(&mut rng, kind, m, n);
                let p = compress(&a, eps, DEFAULT_MAX_LEAF).unwrap();
                let scale = eps * a.fro_norm();
                worst_rec = worst_rec.max(p.to_dense().sub(&a).fro_norm() / scale);
                let v = random_trace(&mut rng, n);
                let y = p.matvec(&v).unwrap();
                let d: Vec<C64> = y.iter().zip(a.matvec(&v)).map(|(p, q)| p - q).collect();
                worst_mv = worst_mv.max(norm2(&d) / (4.0 * scale * norm2(&v)));
                trials += 1;
            }
        }
    }
    let xs: Vec<f64> = (0..256).map(|i| i as f64 / 256.0).collect();
    let smooth = Mat::from_fn(256, 256, |i, j| C64::new(1.0 / (1.0 + 10.0 * (xs[i] - xs[j]).abs()), 0.0));
    let ratio = compress(&smooth, 1e-6, DEFAULT_MAX_LEAF).unwrap().stats().ratio;
    outcome(
        worst_rec <= 1.0 && worst_mv <= 1.0 && ratio < 0.5,
        format!(
            "{trials} kernels, reconstruction {worst_rec:.2} and matvec {worst_mv:.2} of bound, smooth ratio {ratio:.3}"
        ),
    )
}

fn scaling_trend() -> Outcome {
    let template = RunConfig { h: 20.0, ..RunConfig::square(64, 12.5, 2, 2) };
    let rows = run_scaling_study(&template, &[64, 128, 256, 512], &[(2, 2)]);
    let runs: Vec<_> = rows.iter().filter(|r| r.kind == "run").collect();
    if runs.len() != 4 || runs.iter().any(|r| !r.converged || !r.error.is_empty()) {
        return outcome(false, format!("study failed: {runs:?}"));
    }
    let n: Vec<f64> = runs.iter().map(|r| r.n as f64).collect();
    let width: Vec<f64> = runs.iter().map(|r| r.size as f64).collect();
    let time = fit_slope(&n, &runs.iter().map(|r| r.per_iteration_s).collect::<Vec<_>>());
    let memory = fit_slope(&width, &runs.iter().map(|r| r.stored_scalars).collect::<Vec<_>>());
    outcome(
        time <= 0.95 && memory <= 1.6,
        format!("per-iteration slope vs N {time:.2}, memory slope vs width {memory:.2}"),
    )
}

fn determinism() -> Outcome {
    let cfg = RunConfig {
        model: ModelSource::Synthetic(ModelSpec::RoughLayered { seed: 7, c_min: 1500.0, c_max: 4500.0 }),
        seed: Some(11),
        sources: vec![[20, 10], [40, 50]],
        ..RunConfig::square(64, 10.0, 2, 2)
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_solve(&cfg).unwrap())
    };
    let outs = [run_solve(&cfg).unwrap(), run_solve(&cfg).unwrap(), run(1), run(4)];
    let bits =
        |f: &ComplexField| f.interior().iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect::<Vec<_>>();
    let first = bits(&outs[0].field);
    let same =
        outs.iter().all(|o| bits(&o.field) == first && o.report.without_times() == outs[0].report.without_times());
    outcome(same, format!("{} runs (repeated, 1 thread, 4 threads)", outs.len()))
}

fn main() -> ExitCode {
    let cases = oracle_cases();
    let results = [
        ("1 oracle equivalence", oracle_equivalence(&cases)),
        ("2 iteration counts", iteration_counts(&cases)),
        ("3 factorization identity", factorization_identity()),
        ("4 analytic point source", analytic_physics()),
        ("5 compression guarantees", plr_guarantees()),
        ("6 scaling trend", scaling_trend()),
        ("7 strategy consistency", strategy_consistency(&cases)),
        ("8 determinism", determinism()),
    ];
    let mut ok = true;
    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        ok &= o.pass;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
