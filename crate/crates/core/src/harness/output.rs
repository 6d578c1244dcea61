//! Round records, regret curves, aggregation, and CSV/JSON output.

use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PricingError, Result};

pub const SCHEMA_VERSION: &str = "v1";
pub const CSV_HEADER: &str = "seed,t,context_id,price,purchase,gap,cum_regret";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: u64,
    /// Index of the context for discrete processes, `-1` otherwise.
    pub context_id: i64,
    pub price: f64,
    pub hat_price: Option<f64>,
    pub purchase: bool,
    pub gap: f64,
    pub cum_regret: f64,
}

/// Prefix sums of the gap column.
pub fn cumulative_regret(records: &[RoundRecord]) -> Vec<f64> {
    let mut acc = 0.0;
    records
        .iter()
        .map(|r| {
            acc += r.gap;
            acc
        })
        .collect()
}

/// `1, 2, 4, ...` up to `horizon`, plus `horizon` itself.
pub fn checkpoints(horizon: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut t = 1u64;
    while t < horizon {
        out.push(t);
        t *= 2;
    }
    if horizon >= 1 {
        out.push(horizon);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointStats {
    pub t: u64,
    pub mean: f64,
    /// Sample standard deviation across seeds (0 for one seed).
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: String,
    pub learner: String,
    #[serde(default)]
    pub instance: Option<serde_json::Value>,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub final_regret: Vec<f64>,
    pub checkpoints: Vec<CheckpointStats>,
    pub wall_time_secs: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Pointwise statistics of per-seed regret curves at logarithmic
/// checkpoints. Every curve must cover the same horizon.
pub fn aggregate(learner: &str, curves: &[(u64, Vec<f64>)]) -> Result<Summary> {
    let horizon = match curves.first() {
        Some((_, c)) => c.len(),
        None => {
            return Err(PricingError::InvalidParameter(
                "no curves to aggregate".into(),
            ))
        }
    };
    if let Some((seed, c)) = curves.iter().find(|(_, c)| c.len() != horizon) {
        return Err(PricingError::InvalidParameter(format!(
            "seed {seed} has horizon {}, expected {horizon}",
            c.len()
        )));
    }
    if horizon == 0 {
        return Err(PricingError::InvalidParameter("empty regret curve".into()));
    }
    let stats = checkpoints(horizon as u64)
        .into_iter()
        .map(|t| {
            let xs: Vec<f64> = curves.iter().map(|(_, c)| c[t as usize - 1]).collect();
            let (mean, std) = mean_std(&xs);
            CheckpointStats {
                t,
                mean,
                std,
                min: xs.iter().copied().fold(f64::INFINITY, f64::min),
                max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    Ok(Summary {
        schema: SCHEMA_VERSION.to_string(),
        learner: learner.to_string(),
        instance: None,
        horizon: horizon as u64,
        seeds: curves.iter().map(|(s, _)| *s).collect(),
        final_regret: curves.iter().map(|(_, c)| c[horizon - 1]).collect(),
        checkpoints: stats,
        wall_time_secs: 0.0,
    })
}

impl Summary {
    /// Structural checks on a summary document.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.schema != SCHEMA_VERSION {
            return Err(format!(
                "schema {:?}, expected {SCHEMA_VERSION:?}",
                self.schema
            ));
        }
        if self.seeds.len() != self.final_regret.len() {
            return Err("one final regret per seed required".into());
        }
        if self.checkpoints.windows(2).any(|w| w[0].t >= w[1].t) {
            return Err("checkpoint times not strictly increasing".into());
        }
        if self.checkpoints.last().map(|c| c.t) != Some(self.horizon) {
            return Err("last checkpoint must be the horizon".into());
        }
        for c in &self.checkpoints {
            let slack = 1e-9 * c.max.abs().max(1.0);
            if c.mean < c.min - slack || c.mean > c.max + slack || c.std < 0.0 {
                return Err(format!("inconsistent statistics at t = {}", c.t));
            }
        }
        if self.wall_time_secs.is_nan() || self.wall_time_secs < 0.0 {
            return Err("negative wall time".into());
        }
        Ok(())
    }

    pub fn mean_final(&self) -> f64 {
        mean_std(&self.final_regret).0
    }
}

/// Rounds to twelve significant digits.
fn round12(x: f64) -> f64 {
    format!("{x:.11e}").parse().expect("formatted float parses")
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    seed: u64,
    t: u64,
    context_id: i64,
    price: f64,
    purchase: u8,
    gap: f64,
    cum_regret: f64,
}

fn csv_err(e: csv::Error) -> PricingError {
    PricingError::Serde(e.to_string())
}

pub fn write_csv<W: Write>(w: W, runs: &[(u64, Vec<RoundRecord>)]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(CSV_HEADER.split(',')).map_err(csv_err)?;
    for (seed, records) in runs {
        for r in records {
            out.serialize(CsvRow {
                seed: *seed,
                t: r.t,
                context_id: r.context_id,
                price: round12(r.price),
                purchase: r.purchase as u8,
                gap: round12(r.gap),
                cum_regret: round12(r.cum_regret),
            })
            .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn emit_csv(path: &Path, runs: &[(u64, Vec<RoundRecord>)]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_csv(BufWriter::new(f), runs)
}

/// Reads back a CSV written by [`write_csv`]; `hat_price` is not stored and
/// comes back as `None`.
pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<(u64, RoundRecord)>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != CSV_HEADER {
        return Err(PricingError::Serde(format!(
            "unexpected CSV header {header:?}"
        )));
    }
    rdr.deserialize()
        .map(|row| {
            let row: CsvRow = row.map_err(csv_err)?;
            Ok((
                row.seed,
                RoundRecord {
                    t: row.t,
                    context_id: row.context_id,
                    price: row.price,
                    hat_price: None,
                    purchase: row.purchase == 1,
                    gap: row.gap,
                    cum_regret: row.cum_regret,
                },
            ))
        })
        .collect()
}

pub fn emit_json(path: &Path, summary: &Summary) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, summary)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
