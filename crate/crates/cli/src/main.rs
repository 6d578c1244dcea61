use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context as _, Result};
use clap::{Parser, Subcommand};

use hetpricing::harness::{
    aggregate, cumulative_regret, emit_csv, emit_json, CoverSource, LearnerConfig, Prepared,
    RunConfig, Summary,
};
use hetpricing::instances::InstanceSpec;
use hetpricing::pricing::Context;
use hetpricing::verify;

const OUT_ENV: &str = "HETPRICING_OUT";
const THREADS_ENV: &str = "HETPRICING_THREADS";

#[derive(Parser)]
#[command(
    name = "hetpricing",
    version,
    about = "Pricing-regret experiments with heterogeneous buyers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a configuration and write traces plus a summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replaces the configured seeds, e.g. `0..20` or `0..=19`.
        #[arg(long)]
        seed_range: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        check_invariants: bool,
    },
    /// Rerun a configuration for each value of one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `KEY=v1,v2,...` with KEY one of T, lambda, eps.
        #[arg(long)]
        vary: String,
        #[arg(long)]
        seed_range: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build an instance and print its atoms and scalar projection.
    Instance {
        /// Path to a JSON instance description, or the JSON itself.
        #[arg(long)]
        spec: String,
    },
    /// Build a model class and write it as JSON.
    Cover {
        /// Path to a JSON cover description, or the JSON itself.
        #[arg(long)]
        spec: String,
        /// Horizon used for the default layer count of layered classes.
        #[arg(long, default_value_t = 1000)]
        horizon: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the randomized property suites.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn read_json_arg(arg: &str) -> Result<String> {
    if arg.trim_start().starts_with('{') {
        return Ok(arg.to_string());
    }
    std::fs::read_to_string(arg).with_context(|| format!("reading {arg}"))
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    RunConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_seed_range(s: &str) -> Result<Vec<u64>> {
    let (a, b, inclusive) = if let Some((a, b)) = s.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = s.split_once("..") {
        (a, b, false)
    } else {
        bail!("seed range {s:?} is not of the form a..b or a..=b");
    };
    let a: u64 = a.trim().parse().context("seed range start")?;
    let b: u64 = b.trim().parse().context("seed range end")?;
    let seeds: Vec<u64> = if inclusive {
        (a..=b).collect()
    } else {
        (a..b).collect()
    };
    if seeds.is_empty() {
        bail!("seed range {s:?} is empty");
    }
    Ok(seeds)
}

fn out_dir(cli: Option<PathBuf>, cfg: &RunConfig) -> Option<PathBuf> {
    cli.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| cfg.output.dir.clone())
}

fn run_config(cfg: RunConfig, out: Option<&Path>, tag: &str) -> Result<Summary> {
    let start = Instant::now();
    let prepared = Prepared::new(cfg)?;
    let runs = prepared.run_all()?;
    let curves: Vec<(u64, Vec<f64>)> = runs
        .iter()
        .map(|(s, r)| (*s, cumulative_regret(r)))
        .collect();
    let mut summary = aggregate(prepared.config.learner.name(), &curves)?;
    summary.instance = Some(serde_json::to_value(&prepared.config.instance)?);
    summary.wall_time_secs = start.elapsed().as_secs_f64();
    summary
        .validate()
        .map_err(|e| anyhow!("summary failed validation: {e}"))?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        emit_csv(&dir.join(format!("rounds{tag}.csv")), &runs)?;
        emit_json(&dir.join(format!("summary{tag}.json")), &summary)?;
    }
    Ok(summary)
}

fn report(label: &str, s: &Summary) {
    let last = s.checkpoints.last().expect("nonempty checkpoints");
    println!(
        "{label}: learner={} T={} seeds={} mean_regret={:.4} std={:.4} min={:.4} max={:.4} wall={:.2}s",
        s.learner,
        s.horizon,
        s.seeds.len(),
        last.mean,
        last.std,
        last.min,
        last.max,
        s.wall_time_secs
    );
}

fn apply_vary(cfg: &mut RunConfig, key: &str, value: &str) -> Result<()> {
    let x: f64 = value
        .parse()
        .with_context(|| format!("value {value:?} for {key}"))?;
    match key {
        "T" => {
            if x < 1.0 || x.fract() != 0.0 {
                bail!("T must be a positive integer, got {value}");
            }
            cfg.horizon = x as u64;
        }
        "lambda" => match &mut cfg.learner {
            LearnerConfig::Ops { lambda, .. } | LearnerConfig::Pops { lambda, .. } => {
                *lambda = Some(x)
            }
            other => bail!("learner {} has no lambda", other.name()),
        },
        "eps" => match &mut cfg.learner {
            LearnerConfig::Pops { eps, .. } => *eps = Some(x),
            other => bail!("learner {} has no eps", other.name()),
        },
        _ => bail!("cannot vary {key:?}; expected T, lambda or eps"),
    }
    Ok(())
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{THREADS_ENV}={v}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring thread pool")?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    init_threads()?;
    match cli.command {
        Command::Run {
            config,
            seed_range,
            out,
            check_invariants,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(r) = seed_range {
                cfg.seeds = parse_seed_range(&r)?;
            }
            cfg.invariant_checks |= check_invariants;
            let dir = out_dir(out, &cfg);
            let summary = run_config(cfg, dir.as_deref(), "")?;
            report("run", &summary);
        }
        Command::Sweep {
            config,
            vary,
            seed_range,
            out,
        } => {
            let mut base = load_config(&config)?;
            if let Some(r) = seed_range {
                base.seeds = parse_seed_range(&r)?;
            }
            let (key, values) = vary
                .split_once('=')
                .ok_or_else(|| anyhow!("--vary expects KEY=v1,v2,..."))?;
            let dir = out_dir(out, &base);
            for value in values.split(',').map(str::trim).filter(|v| !v.is_empty()) {
                let mut cfg = base.clone();
                apply_vary(&mut cfg, key, value)?;
                let tag = format!("_{key}_{value}");
                let summary = run_config(cfg, dir.as_deref(), &tag)?;
                report(&format!("{key}={value}"), &summary);
            }
        }
        Command::Instance { spec } => {
            let spec: InstanceSpec = serde_json::from_str(&read_json_arg(&spec)?)?;
            let d = spec.build()?;
            println!("{}", serde_json::to_string_pretty(&d)?);
            if d.dim() == 1 {
                let q = d.project(&Context::scalar())?;
                println!(
                    "best_response={} best_revenue={}",
                    q.best_response(),
                    q.best_revenue()
                );
            }
        }
        Command::Cover { spec, horizon, out } => {
            let source: CoverSource = serde_json::from_str(&read_json_arg(&spec)?)?;
            let class = source.build(horizon)?;
            let text = serde_json::to_string(&class)?;
            match out {
                Some(path) => {
                    std::fs::write(&path, text)
                        .with_context(|| format!("writing {}", path.display()))?;
                    eprintln!("wrote {} models to {}", class.len(), path.display());
                }
                None => println!("{text}"),
            }
        }
        Command::Verify { seed } => {
            let reports = verify::run_all(seed)?;
            let mut ok = true;
            for r in &reports {
                println!(
                    "{} {}: {} cases, {} failures, worst excess {:.3e}",
                    if r.passed() { "PASS" } else { "FAIL" },
                    r.name,
                    r.cases,
                    r.failures,
                    r.worst_excess
                );
                ok &= r.passed();
            }
            if !ok {
                bail!("property suites reported failures");
            }
        }
    }
    Ok(())
}
