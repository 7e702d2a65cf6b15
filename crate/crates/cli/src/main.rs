use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polarized_traces::bench::{
    run_scaling_study, run_solve, snapshot_iterations, write_outputs, write_snapshots, write_study, RunConfig,
};
use polarized_traces::Error;

#[derive(Parser)]
#[command(name = "ptrace", version, about = "Nested polarized-traces Helmholtz solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed of a rough-layered model.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve once; writes report.csv and field.{helm-u,pgm}.
    Solve(Common),
    /// Scaling study over grid sizes and partitions; writes study.csv.
    Study {
        #[command(flatten)]
        common: Common,
        /// Square grid sizes, comma separated; defaults to the config's nx.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Partitions as LAYERSxCELLS, comma separated; defaults to the config's.
        #[arg(long, value_delimiter = ',', value_parser = parse_partition)]
        partitions: Vec<(usize, usize)>,
    },
    /// Volume field after each outer iteration; writes snapshot_*.{helm-u,pgm}.
    Snapshots(Common),
}

fn parse_partition(s: &str) -> Result<(usize, usize), String> {
    let (l, c) = s.split_once('x').ok_or_else(|| format!("expected LAYERSxCELLS, got {s:?}"))?;
    let n = |v: &str| v.parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((n(l)?, n(c)?))
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::Io(_)
            | Error::Format(_)
            | Error::TooManyLayers(_)
            | Error::TooManyCells(_)
            | Error::InvalidParameter(_)
            | Error::InvalidDimension(_) => Failure::Config(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn setup(common: &Common) -> Result<RunConfig, Failure> {
    if let Some(k) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    let mut cfg = RunConfig::load(&common.config)?;
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    let grid = cfg.grid()?;
    if let Some(w) = cfg.resolution_warning(&cfg.model(&grid)?) {
        eprintln!("warning: {w}");
    }
    std::fs::create_dir_all(&common.out).map_err(|e| Failure::Config(format!("{}: {e}", common.out.display())))?;
    Ok(cfg)
}

fn solve(common: &Common) -> Result<(), Failure> {
    let cfg = setup(common)?;
    let out = run_solve(&cfg)?;
    write_outputs(&out, &common.out)?;
    let r = &out.report;
    println!(
        "{} iterations, residual {:.3e}, volume residual {:.3e}, online {:.3}s, offline {:.3}s",
        r.iterations,
        r.gmres_residual,
        r.volume_residual,
        r.online_s,
        r.factorization_s + r.greens_s
    );
    if !r.converged {
        return Err(Failure::Numerical(format!("no convergence in {} iterations", r.iterations)));
    }
    Ok(())
}

fn study(common: &Common, sizes: &[usize], partitions: &[(usize, usize)]) -> Result<(), Failure> {
    let cfg = setup(common)?;
    let sizes = if sizes.is_empty() { vec![cfg.nx] } else { sizes.to_vec() };
    let parts = if partitions.is_empty() { vec![(cfg.layers, cfg.cells)] } else { partitions.to_vec() };
    let rows = run_scaling_study(&cfg, &sizes, &parts);
    let path = common.out.join("study.csv");
    write_study(&rows, &path)?;
    for r in &rows {
        if !r.error.is_empty() {
            eprintln!("size {} with {}x{}: {}", r.size, r.layers, r.cells, r.error);
        }
    }
    println!("{} rows written to {}", rows.len(), path.display());
    Ok(())
}

fn snapshots(common: &Common) -> Result<(), Failure> {
    let cfg = setup(common)?;
    let fields = snapshot_iterations(&cfg)?;
    let stems = write_snapshots(&fields, Path::new(&common.out))?;
    println!("{} snapshots written to {}", stems.len(), common.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(c) => solve(c),
        Command::Study { common, sizes, partitions } => study(common, sizes, partitions),
        Command::Snapshots(c) => snapshots(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
