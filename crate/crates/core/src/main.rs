use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wkg::config::RunConfig;
use wkg::data::Preset;
use wkg::run::{self, PlotKind};
use wkg::verify::SuiteOptions;
use wkg::Error;

#[derive(Parser)]
#[command(name = "wkg", version, about = "Wave-Klein-Gordon forward solver and modified wave operator construction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forward run from the recipe data: snapshots, diagnostics.csv, manifest.
    Simulate(Common),
    /// Backward construction from scattering data: cache, contraction log, residuals, norms.
    Construct(Common),
    /// Property suite; exits 5 if any check fails.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Use a cutoff that breaks the partition of unity.
        #[arg(long)]
        broken_bump: bool,
        #[arg(long, default_value_t = 100_000)]
        phase_samples: usize,
    },
    /// Brute-force comparison of the bilinear evaluator (grids up to 12³).
    Oracle(Common),
    /// Tidy `x,series,value` CSV from an artifact directory, on stdout.
    Plotdata {
        dir: PathBuf,
        #[arg(long, value_enum)]
        which: Which,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Decay,
    Residuals,
    Contraction,
    Shells,
}

/// Flags override the JSON config.
#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    box_length: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    cache_dt: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, short)]
    output_dir: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> wkg::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.n {
            c.grid.n = v;
        }
        if let Some(v) = self.box_length {
            c.grid.box_length = v;
        }
        if let Some(v) = self.eps {
            c.eps = v;
        }
        if let Some(v) = &self.preset {
            c.data.preset = Preset::parse(v).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.t_max {
            c.t_max = v;
        }
        if let Some(v) = self.t_end {
            c.solver.t_end = v;
        }
        if let Some(v) = self.dt {
            c.solver.dt = v;
        }
        if let Some(v) = self.cache_dt {
            c.cache.dt = v;
        }
        if let Some(v) = self.tol {
            c.fixed_point.tol = v;
        }
        if let Some(v) = self.max_iter {
            c.fixed_point.max_iter = v;
        }
        if self.threads.is_some() {
            c.threads = self.threads;
        }
        if let Some(v) = &self.output_dir {
            c.output_dir = v.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::BlowUp { .. } => 3,
        Error::NonContraction(_) => 4,
        _ => 2,
    }
}

fn execute(cli: Cli) -> wkg::Result<u8> {
    match cli.command {
        Command::Simulate(common) => {
            let cfg = common.resolve()?;
            let dir = cfg.resolved_output_dir();
            let s = run::simulate(&cfg, &dir)?;
            println!("{} steps to t = {}, {} snapshots in {}", s.steps, s.t_end, s.snapshots, dir.display());
            Ok(0)
        }
        Command::Construct(common) => {
            let cfg = common.resolve()?;
            let dir = cfg.resolved_output_dir();
            let c = run::construct(&cfg, &dir)?;
            let r = &c.report;
            println!(
                "converged in {} iterations (distance {:e}); r_kg decreasing on [{}, {}]: {}; X constants {:.4e} {:.4e}; artifacts in {}",
                r.iterations,
                r.final_distance,
                r.residuals.window.0,
                r.residuals.window.1,
                r.residuals.r_kg_decreasing,
                r.x_constants[0],
                r.x_constants[1],
                dir.display()
            );
            Ok(0)
        }
        Command::Verify { common, broken_bump, phase_samples } => {
            let cfg = common.resolve()?;
            let dir = cfg.resolved_output_dir();
            let report = run::verify(&cfg, &dir, SuiteOptions { broken_bump, phase_samples, seed: cfg.seed })?;
            print!("{}", report.table());
            Ok(if report.all_pass { 0 } else { 5 })
        }
        Command::Oracle(common) => {
            let cfg = common.resolve()?;
            let c = run::oracle(&cfg, &cfg.resolved_output_dir())?;
            println!("{} {} {:e} (threshold {:e}, {})", c.name, if c.pass { "PASS" } else { "FAIL" }, c.value, c.threshold, c.detail);
            Ok(if c.pass { 0 } else { 5 })
        }
        Command::Plotdata { dir, which } => {
            let kind = match which {
                Which::Decay => PlotKind::Decay,
                Which::Residuals => PlotKind::Residuals,
                Which::Contraction => PlotKind::Contraction,
                Which::Shells => PlotKind::Shells,
            };
            print!("{}", run::plotdata(&dir, kind)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("wkg: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
