use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kbh_core::datagen::ExperimentConfig;
use kbh_harness::{
    estimate, plotdata, run_campaign, truth_path, write_campaign, write_estimate, CampaignConfig,
    DatasetFile, Estimator, HarnessError, IdentifyOptions, Result, TruthFile,
};

/// Kernel-based Hammerstein system identification.
#[derive(Parser)]
#[command(name = "kbh", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate g and f from one dataset.
    Identify(IdentifyArgs),
    /// Run a Monte Carlo campaign over simulated experiments.
    Campaign(CampaignArgs),
    /// Emit boxplot summaries and overlays from a campaign directory.
    Plotdata(PlotArgs),
    /// Write one simulated dataset (and its ground truth) to disk.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct IdentifyArgs {
    /// Dataset CSV (`u,y` columns).
    input: PathBuf,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
    /// Impulse-response length; defaults to the dataset header.
    #[arg(long)]
    n: Option<usize>,
    /// Basis dimension (polynomial degree + 1).
    #[arg(long, default_value_t = 7)]
    p: usize,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Seed of the random initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "kbh", value_parser = ["kbh", "baseline"])]
    estimator: String,
}

#[derive(Args)]
struct CampaignArgs {
    /// `key = value` config file; defaults cover the eight standard experiments.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
    /// Overrides `runs` from the config.
    #[arg(long)]
    runs: Option<usize>,
    /// Overrides the master `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    parallelism: usize,
}

#[derive(Args)]
struct PlotArgs {
    /// Campaign output directory.
    campaign: PathBuf,
    /// Output directory; defaults to `<campaign>/plot`.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Runs to overlay, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    runs: Vec<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Dataset path; the truth goes to `<stem>.truth.csv` beside it.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    nu: usize,
    #[arg(long, default_value_t = 10.0)]
    snr: f64,
    /// Number of samples.
    #[arg(long = "samples", short = 'N', default_value_t = 500)]
    samples: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    p: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn identify(args: IdentifyArgs) -> Result<()> {
    let dataset = DatasetFile::read(&args.input)?;
    let n = args.n.or(dataset.n).ok_or_else(|| {
        HarnessError::Usage(
            "impulse-response length unknown: pass --n or add `# n=` to the dataset header".into(),
        )
    })?;
    let opts = IdentifyOptions {
        estimator: args.estimator.parse::<Estimator>()?,
        n,
        p: args.p,
        tol: args.tol,
        max_iter: args.max_iter,
        seed: args.seed,
    };
    let est = estimate(&dataset.record, &opts)?;
    write_estimate(&est, &args.out)?;
    let status = est.termination.map(|t| t.as_str()).unwrap_or("closed-form");
    println!(
        "{}: {} iterations ({status}); wrote {}",
        opts.estimator.as_str(),
        est.iterations,
        args.out.display()
    );
    Ok(())
}

fn campaign(args: CampaignArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => CampaignConfig::read(path)?,
        None => CampaignConfig::default(),
    };
    config.runs = args.runs.unwrap_or(config.runs);
    config.seed = args.seed.unwrap_or(config.seed);
    if config.runs == 0 {
        eprintln!("warning: runs = 0, writing an empty campaign");
    }
    let result = run_campaign(&config, args.parallelism)?;
    write_campaign(&result, &args.out)?;
    println!(
        "{} rows ({} failed); wrote {}",
        result.rows.len(),
        result.failures(),
        args.out.display()
    );
    result.check_failure_rate()
}

fn plot(args: PlotArgs) -> Result<()> {
    let out = args.out.unwrap_or_else(|| args.campaign.join("plot"));
    let data = plotdata(&args.campaign, &out, &args.runs)?;
    println!(
        "{} summary rows, {} overlays; wrote {}",
        data.boxplot.len(),
        data.overlays,
        out.display()
    );
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let exp = ExperimentConfig {
        nu: args.nu,
        snr: args.snr,
        samples: args.samples,
        n: args.n,
        p: args.p,
        runs: 1,
        seed: args.seed,
    };
    let run = exp.generate(args.seed)?;
    DatasetFile {
        record: run.data.record.clone(),
        n: Some(args.n),
    }
    .write(&args.out)?;
    let truth = truth_path(&args.out);
    TruthFile::from(&run.data.truth).write(&truth)?;
    println!("wrote {} and {}", args.out.display(), truth.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Identify(a) => identify(a),
        Command::Campaign(a) => campaign(a),
        Command::Plotdata(a) => plot(a),
        Command::Simulate(a) => simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
