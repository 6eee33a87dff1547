use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use switching_diffusion::config::load_config;
use switching_diffusion::experiments::Runner;
use switching_diffusion::report::{verdict_line, OutputFormat, ReportBundle};
use switching_diffusion::Error;

/// Runs verification suites for a two-regime switching diffusion.
#[derive(Debug, Parser)]
#[command(name = "swdiff", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of worker threads.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
    /// Runs only these suites (repeatable); defaults to the config's list.
    #[arg(long = "suite")]
    suites: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
            Format::Both => OutputFormat::Both,
        }
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    let mut cfg = load_config(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if !cli.suites.is_empty() {
        cfg.suites = cli.suites;
    }
    if let Some(dir) = std::env::var_os("SWDIFF_OUTPUT_DIR") {
        cfg.output_dir = PathBuf::from(dir);
    }
    cfg.validate()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .expect("thread pool with at least one worker");
    let bundle = pool.install(|| -> Result<ReportBundle, Error> {
        let runner = Runner::new(&cfg)?;
        let sc = runner.scenario();
        let m = &sc.conditions.margins;
        println!(
            "model {} d={} lambda=({}, {}) kappa=({}, {}) M={} M1={}",
            sc.model.name, sc.model.d, sc.model.lambda_minus, sc.model.lambda_plus, sc.model.kappa_minus, sc.model.kappa_plus, sc.model.m, sc.params.m1
        );
        println!(
            "conditions c1={} ({:.6}) c2={} ({:.6}) c2a={} ({:.6})",
            sc.conditions.holds_c1,
            m.c1_dimension.min(m.c1_balance),
            sc.conditions.holds_c2,
            m.c2,
            sc.conditions.holds_c2a,
            m.c2a
        );
        let out = runner.run(&cfg.suites)?;
        Ok(ReportBundle::new(&cfg, &cfg.suites, out))
    })?;
    for r in &bundle.reports {
        println!("{}", verdict_line(r));
    }
    for path in bundle.write(&cfg.output_dir, cli.format.into())? {
        println!("wrote {}", path.display());
    }
    Ok(bundle.all_passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
