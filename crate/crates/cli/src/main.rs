use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;

use sleepguard::config::{validate_file, LoadError, ScenarioConfig};
use sleepguard::metrics::{compare, compute, Comparison, RunMetrics};
use sleepguard::replay::{verify, ReplayReport};
use sleepguard::sim::run_with_detection;
use sleepguard::trace::RunTrace;

const EXIT_MISMATCH: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "sleepguard", version, about = "Sleep-deprivation defense simulator for hierarchical sensor networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario (or a paired seed sweep with --sweep).
    Run(RunArgs),
    /// Run detection-on/off pairs over a seed range.
    Sweep(SweepArgs),
    /// Replay a trace file (or run a scenario) through the offline oracle.
    Verify { path: PathBuf },
    /// Check a scenario and print the resolved config.
    Validate { config: PathBuf },
}

#[derive(Args)]
struct OutArgs {
    /// Output directory.
    #[arg(long, env = "SLEEPGUARD_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    #[command(flatten)]
    out: OutArgs,
    /// Run the trace-replay oracle and fail on any mismatch.
    #[arg(long)]
    verify: bool,
    /// Disable both detection phases; routing and energy are unchanged.
    #[arg(long)]
    no_detection: bool,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// `seeds=a..b` (exclusive) or `seeds=a..=b`.
    #[arg(long, value_name = "seeds=A..B")]
    sweep: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    config: PathBuf,
    #[command(flatten)]
    out: OutArgs,
    /// `a..b` (exclusive) or `a..=b`.
    #[arg(long)]
    seeds: String,
    #[arg(long)]
    verify: bool,
}

#[derive(Debug)]
enum Failure {
    Invalid(LoadError),
    Mismatch(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => match args.sweep.as_deref() {
            Some(range) => parse_seeds(range.strip_prefix("seeds=").unwrap_or(range))
                .map_err(Failure::from)
                .and_then(|seeds| sweep(&args.config, args.out.out.as_deref(), seeds, args.verify)),
            None => run_one(&args),
        },
        Command::Sweep(args) => parse_seeds(&args.seeds)
            .map_err(Failure::from)
            .and_then(|seeds| sweep(&args.config, args.out.out.as_deref(), seeds, args.verify)),
        Command::Verify { path } => verify_path(&path),
        Command::Validate { config } => validate(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            for line in e.errors() {
                eprintln!("error: {line}");
            }
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::Mismatch(report)) => {
            eprint!("{report}");
            ExitCode::from(EXIT_MISMATCH)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_IO)
        }
    }
}

fn parse_seeds(range: &str) -> Result<Vec<u64>> {
    let (a, b, inclusive) = if let Some((a, b)) = range.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = range.split_once("..") {
        (a, b, false)
    } else {
        bail!("seed range `{range}` is not of the form a..b");
    };
    let a: u64 = a.trim().parse().with_context(|| format!("bad seed `{a}`"))?;
    let b: u64 = b.trim().parse().with_context(|| format!("bad seed `{b}`"))?;
    let seeds: Vec<u64> = if inclusive { (a..=b).collect() } else { (a..b).collect() };
    if seeds.is_empty() {
        bail!("seed range `{range}` is empty");
    }
    Ok(seeds)
}

fn load(path: &Path) -> Result<ScenarioConfig, Failure> {
    let v = validate_file(path).map_err(Failure::Invalid)?;
    for d in &v.defaults {
        info!("default {} = {}", d.path, d.value);
    }
    Ok(v.config)
}

fn out_dir(flag: Option<&Path>, config: &ScenarioConfig, scenario: &Path) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = &config.output_dir {
        return PathBuf::from(p);
    }
    let stem = scenario.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    Path::new("out").join(stem)
}

struct Artifacts {
    trace: RunTrace,
    metrics: RunMetrics,
    report: Option<ReplayReport>,
}

fn simulate(config: &ScenarioConfig, detection: bool, check: bool) -> Result<Artifacts> {
    let trace = run_with_detection(config, detection).context("simulation failed")?;
    let metrics = compute(&trace)?;
    let report = check.then(|| verify(&trace));
    Ok(Artifacts { trace, metrics, report })
}

fn write_run(dir: &Path, a: &Artifacts) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        fs::write(&p, text).with_context(|| format!("cannot write {}", p.display()))
    };
    write("trace.tsv", a.trace.to_text())?;
    write("metrics.txt", a.metrics.to_kv())?;
    write("metrics.csv", format!("{}\n{}\n", RunMetrics::CSV_HEADER, a.metrics.csv_row()))?;
    if let Some(r) = &a.report {
        write("replay.txt", r.to_string())?;
    }
    Ok(())
}

fn run_one(args: &RunArgs) -> Result<(), Failure> {
    let mut config = load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let detection = config.detection.enabled && !args.no_detection;
    let a = simulate(&config, detection, args.verify)?;
    let dir = out_dir(args.out.out.as_deref(), &config, &args.config);
    write_run(&dir, &a)?;
    print!("{}", a.metrics.to_kv());
    info!("wrote {}", dir.display());
    check_report(a.report.as_ref(), "run")
}

fn check_report(report: Option<&ReplayReport>, label: &str) -> Result<(), Failure> {
    match report {
        Some(r) if !r.is_clean() => Err(Failure::Mismatch(format!("{label}: {r}"))),
        Some(r) => {
            info!("{label}: oracle agrees ({} tags, {} decisions)", r.tags_checked, r.decisions_checked);
            Ok(())
        }
        None => Ok(()),
    }
}

fn sweep(path: &Path, flag: Option<&Path>, seeds: Vec<u64>, check: bool) -> Result<(), Failure> {
    let base = load(path)?;
    let dir = out_dir(flag, &base, path);
    let results: Vec<Result<(u64, Artifacts, Artifacts)>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = base.clone();
            cfg.seed = seed;
            let on = simulate(&cfg, true, check)?;
            let off = simulate(&cfg, false, check)?;
            let seed_dir = dir.join(format!("seed-{seed}"));
            write_run(&seed_dir.join("on"), &on)?;
            write_run(&seed_dir.join("off"), &off)?;
            Ok((seed, on, off))
        })
        .collect();

    let mut csv = format!("{}\n", RunMetrics::CSV_HEADER);
    let mut summary = String::new();
    let mut regressions = 0;
    let mut improvement = 0i64;
    let mut mismatches = Vec::new();
    let n = results.len();
    for r in results {
        let (seed, on, off) = r?;
        csv.push_str(&format!("{}\n{}\n", on.metrics.csv_row(), off.metrics.csv_row()));
        let c: Comparison = compare(&on.metrics, &off.metrics).map_err(anyhow::Error::from)?;
        if c.lifetime_regressed {
            regressions += 1;
            warn!("seed {seed}: first death earlier with detection ({:+})", c.first_death_delta);
        }
        improvement += c.first_death_delta;
        summary.push_str(&format!("[seed {seed}]\n{}", c.to_kv()));
        for (label, a) in [("on", &on), ("off", &off)] {
            if let Some(rep) = a.report.as_ref().filter(|r| !r.is_clean()) {
                mismatches.push(format!("seed {seed} {label}: {rep}"));
            }
        }
    }
    summary.push_str(&format!(
        "[summary]\npairs={n}\nregressions={regressions}\nmean_first_death_delta={:.3}\n",
        improvement as f64 / n as f64
    ));
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    fs::write(dir.join("metrics.csv"), csv).context("cannot write metrics.csv")?;
    fs::write(dir.join("comparison.txt"), &summary).context("cannot write comparison.txt")?;
    print!("{summary}");
    if !mismatches.is_empty() {
        return Err(Failure::Mismatch(mismatches.join("")));
    }
    Ok(())
}

fn verify_path(path: &Path) -> Result<(), Failure> {
    let report = if path.extension().is_some_and(|e| e == "toml") {
        let config = load(path)?;
        let trace = run_with_detection(&config, config.detection.enabled).context("simulation failed")?;
        verify(&trace)
    } else {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let trace = RunTrace::parse(&text).map_err(anyhow::Error::from)?;
        if !trace.is_complete() {
            warn!("trace has no END record");
        }
        verify(&trace)
    };
    print!("{report}");
    check_report(Some(&report), &path.display().to_string())
}

fn validate(path: &Path) -> Result<(), Failure> {
    let config = load(path)?;
    print!("{}", config.to_toml());
    Ok(())
}
