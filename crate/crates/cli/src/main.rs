use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ssns_cli::plot::{read_series, render_svg, PlotSpec};
use ssns_cli::selftest::run_selftest;
use ssns_cli::{run_and_write, CliError, CliResult, ExperimentConfig, ExperimentKind, Settings};

#[derive(Parser)]
#[command(name = "ssns", version, about = "Quantize bandlimited graph signals with single-shot noise shaping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Relative error over bandwidths and bit depths.
    Sweep(ExperimentArgs),
    /// Error scaling in the bit depth at a fixed bandwidth.
    Bitdepth(ExperimentArgs),
    /// SSNS against the sampled noise-shaping sketch and the bound curves.
    Compare(ExperimentArgs),
    /// 1-bit halftoning of a point cloud's height field.
    Halftone(ExperimentArgs),
    /// Fast internal consistency checks.
    Selftest,
    /// Line chart (SVG) from a result CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// ring, grid, grid:HxW, sensor, swissroll, edgelist:PATH or points:PATH.
    #[arg(long)]
    graph: Option<String>,
    /// Vertex count for generated graphs.
    #[arg(long)]
    n: Option<String>,
    /// Neighbours for kNN graphs.
    #[arg(long)]
    k: Option<String>,
    /// Bandwidths: list and/or ranges, e.g. `15:155:10` or `20,50`.
    #[arg(long)]
    r: Option<String>,
    /// Bit depths, same syntax; `budget` means ceil(log2 log2 N).
    #[arg(long)]
    bits: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// reference or fast.
    #[arg(long)]
    engine: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// SSS-R sample count (default ceil(N ln N)).
    #[arg(long)]
    samples: Option<String>,
    /// Point or PLY file; shorthand for `--graph points:PATH`.
    #[arg(long)]
    mesh: Option<String>,
}

impl ExperimentArgs {
    fn resolve(&self, kind: ExperimentKind) -> CliResult<ExperimentConfig> {
        let file = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::default(),
        };
        let mut flags = Settings::default();
        let pairs = [
            ("graph", &self.graph),
            ("n", &self.n),
            ("k", &self.k),
            ("r", &self.r),
            ("bits", &self.bits),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("engine", &self.engine),
            ("out", &self.out),
            ("samples", &self.samples),
            ("mesh", &self.mesh),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                flags.set(key, v)?;
            }
        }
        ExperimentConfig::resolve(kind, &[&file, &flags])
    }
}

#[derive(Args)]
struct PlotArgs {
    /// Result CSV.
    input: PathBuf,
    #[arg(long)]
    x: String,
    /// Comma-separated y columns.
    #[arg(long)]
    y: String,
    #[arg(long)]
    group: Option<String>,
    #[arg(long)]
    log_y: bool,
    #[arg(long)]
    title: Option<String>,
    /// Output SVG (default: input with .svg extension).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> CliResult<ExitCode> {
    let (kind, args) = match command {
        Command::Sweep(a) => (ExperimentKind::Sweep, a),
        Command::Bitdepth(a) => (ExperimentKind::Bitdepth, a),
        Command::Compare(a) => (ExperimentKind::Compare, a),
        Command::Halftone(a) => (ExperimentKind::Halftone, a),
        Command::Selftest => {
            let checks = run_selftest();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let ok = checks.iter().all(|c| c.passed);
            return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
        Command::Plot(p) => {
            let spec = PlotSpec {
                x: p.x,
                y: p.y.split(',').map(|s| s.trim().to_string()).collect(),
                group: p.group,
                log_y: p.log_y,
                title: p.title.unwrap_or_else(|| p.input.display().to_string()),
            };
            let svg = render_svg(&read_series(&p.input, &spec)?, &spec)?;
            let out = p.out.unwrap_or_else(|| p.input.with_extension("svg"));
            std::fs::write(&out, svg).map_err(|e| CliError::io(&out, e))?;
            println!("{}", out.display());
            return Ok(ExitCode::SUCCESS);
        }
    };
    let cfg = args.resolve(kind)?;
    for path in run_and_write(&cfg)? {
        println!("{}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}
