use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use aptqr_core::ingest::{RunConfig, YearMonth};
use aptqr_core::quantreg::ModelSpec;
use aptqr_core::report::{self, Table};
use clap::{Args, Parser, Subcommand};

/// Environment variable naming the default data directory. A `data_dir`
/// key in the config overrides it and `--data-dir` overrides both.
const DATA_DIR_ENV: &str = "APTQR_DATA_DIR";

#[derive(Parser)]
#[command(name = "aptqr", version, about = "Multi-factor quantile regression for commodity excess returns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write report.md plus one CSV per table.
    Run(Common),
    /// Print descriptive statistics, ADF and VIF for the configured panel.
    Describe(Common),
    /// Fit one quantile with bootstrap standard errors.
    Qr {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        tau: f64,
    },
    /// Causal impact of an intervention month on the target.
    Impact {
        #[command(flatten)]
        common: Common,
        /// First post-intervention month, YYYY-MM.
        #[arg(long)]
        date: YearMonth,
    },
}

#[derive(Args)]
struct Common {
    /// Run config (`key = value` lines).
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Quantile-normalize the factor columns.
    #[arg(long)]
    quantile_normalize: bool,
    /// Directory holding `<SERIES>.csv` files.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Log progress to stderr.
    #[arg(short, long)]
    verbose: bool,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let env_dir = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from);
        let fallback = self.data_dir.as_deref().or(env_dir.as_deref());
        let mut config = RunConfig::load(&self.config, fallback)?;
        if let Some(dir) = &self.data_dir {
            config.data_dir = dir.clone();
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        config.quantile_normalize |= self.quantile_normalize;
        Ok(config)
    }
}

fn print_tables(tables: &[Table]) -> Result<()> {
    for t in tables {
        print!("{}", t.markdown()?);
    }
    Ok(())
}

fn run(config_path: &Path, config: &RunConfig) -> Result<()> {
    let text = std::fs::read_to_string(config_path)?;
    let digest = report::config_digest(&text);
    let report = report::run_pipeline(config, &digest)?;
    let written = report.write(&config.output_dir)?;
    println!("wrote {} files to {}", written.len(), config.output_dir.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            let config = common.load()?;
            run(&common.config, &config)
        }
        Command::Describe(common) => {
            let config = common.load()?;
            let (_, panel) = report::prepare(&config)?;
            let rows = report::describe_panel(&panel).map_err(|e| e.in_stage("describe"))?;
            print_tables(&[report::descriptive_table(&rows)])
        }
        Command::Qr { common, tau } => {
            let config = common.load()?;
            let (_, panel) = report::prepare(&config)?;
            let spec = ModelSpec::for_panel(&panel);
            let fit = report::fit_with_inference(&panel, &spec, tau, config.bootstrap, config.seed)
                .map_err(|e| e.in_stage("qr"))?;
            let title = format!("Quantile regression at tau = {tau}");
            print_tables(&[report::quantile_table("qr", &title, std::slice::from_ref(&fit))])?;
            if let Some(r2) = fit.pseudo_r2 {
                println!("pseudo R²: {}", report::fmt2(r2));
            }
            Ok(())
        }
        Command::Impact { common, date } => {
            let config = common.load()?;
            let (_, panel) = report::prepare(&config)?;
            let impact = report::run_causal_impact(&config, &panel, date).map_err(|e| e.in_stage("impact"))?;
            print_tables(&[report::impact_table(&impact)])
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verbose = match &cli.command {
        Command::Run(c) | Command::Describe(c) => c.verbose,
        Command::Qr { common, .. } | Command::Impact { common, .. } => common.verbose,
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if verbose { "info" } else { "warn" }))
        .init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aptqr: {e}");
            ExitCode::FAILURE
        }
    }
}
