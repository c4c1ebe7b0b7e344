//! Timing and memory sweeps over N, and log-log slope fits of the results.
//!
//! Sweeps run one attention call at a time on a single thread. Inputs are
//! generated outside the timed region; only the attention call is timed.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::attention::{attend, AttentionMechanism};
use crate::error::{Error, Result};
use crate::par::sequential;
use crate::tensor::{Real, DEFAULT_EPS};
use crate::workload::Workload;

pub const MIN_REPEATS: usize = 5;
pub const MIN_FIT_POINTS: usize = 4;
pub const DEFAULT_MEMORY_BUDGET: u64 = 2 << 30;
pub const CSV_HEADER: &str = "mechanism,n,dk,dv,repeat,wall_ns,aux_bytes";

/// One timed attention call.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub mechanism: AttentionMechanism,
    pub n: usize,
    pub dk: usize,
    pub dv: usize,
    pub repeat_index: usize,
    pub wall_ns: u64,
    pub aux_bytes: u64,
}

impl BenchRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.mechanism, self.n, self.dk, self.dv, self.repeat_index, self.wall_ns, self.aux_bytes
        )
    }
}

/// Writes the header and one LF-terminated row per record.
pub fn write_csv<W: Write>(mut w: W, records: &[BenchRecord]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            _ => Err(format!("unknown precision `{s}` (expected f32 or f64)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub mechanism: AttentionMechanism,
    pub n_values: Vec<usize>,
    pub dx: usize,
    pub dk: usize,
    pub dv: usize,
    pub repeats: usize,
    pub seed: u64,
    pub eps: f64,
    pub precision: Precision,
    /// Upper bound on bytes for an `N × N` weight matrix.
    pub memory_budget: u64,
}

impl SweepConfig {
    pub fn new(mechanism: AttentionMechanism, n_values: Vec<usize>) -> Self {
        SweepConfig {
            mechanism,
            n_values,
            dx: 32,
            dk: 32,
            dv: 32,
            repeats: MIN_REPEATS,
            seed: 0,
            eps: DEFAULT_EPS,
            precision: Precision::F32,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.repeats < MIN_REPEATS {
            return Err(Error::TooFewRepeats {
                got: self.repeats,
                required: MIN_REPEATS,
            });
        }
        for (name, value) in [("dx", self.dx), ("dk", self.dk), ("dv", self.dv)] {
            if value == 0 {
                return Err(Error::ZeroCount(name));
            }
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(Error::ZeroCount("n"));
        }
        if self.mechanism.is_quadratic_memory() {
            let elem = match self.precision {
                Precision::F32 => 4u128,
                Precision::F64 => 8u128,
            };
            for &n in &self.n_values {
                let required = (n as u128) * (n as u128) * elem;
                if required > self.memory_budget as u128 {
                    let suggested_max_n = ((self.memory_budget as u128 / elem) as f64).sqrt() as usize;
                    return Err(Error::MemoryBudgetExceeded {
                        mechanism: self.mechanism.to_string(),
                        n,
                        required,
                        budget: self.memory_budget,
                        suggested_max_n,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Seed for the inputs of repeat `repeat` at size `n`.
pub fn input_seed(seed: u64, n: usize, repeat: usize) -> u64 {
    crate::tensor::Rng::derive(seed, ((n as u64) << 20) ^ repeat as u64).next_u64()
}

/// Runs one discarded warm-up call per N, then `repeats` timed calls per N.
/// Records come back grouped by N in `n_values` order, repeats ascending.
pub fn bench_sweep(config: &SweepConfig) -> Result<Vec<BenchRecord>> {
    config.validate()?;
    sequential(|| match config.precision {
        Precision::F32 => sweep::<f32>(config),
        Precision::F64 => sweep::<f64>(config),
    })
}

fn sweep<T: Real>(config: &SweepConfig) -> Result<Vec<BenchRecord>> {
    let generate = |n: usize, repeat: usize| {
        Workload::<T>::generate(input_seed(config.seed, n, repeat), n, config.dx, config.dk, config.dv)
    };
    for &n in &config.n_values {
        let warmup = generate(n, usize::MAX)?;
        let qkv = &warmup.qkv;
        drop(attend(&config.mechanism, &qkv.q, &qkv.k, &qkv.v, config.eps)?);
    }

    // Repeats are interleaved across sizes so that a burst of machine noise
    // lands on every N instead of skewing a single median.
    let mut records = Vec::with_capacity(config.n_values.len() * config.repeats);
    for repeat in 0..config.repeats {
        for &n in &config.n_values {
            let w = generate(n, repeat)?;
            let qkv = &w.qkv;
            let start = Instant::now();
            let res = attend(&config.mechanism, &qkv.q, &qkv.k, &qkv.v, config.eps)?;
            let elapsed = start.elapsed();
            records.push(BenchRecord {
                mechanism: config.mechanism.clone(),
                n,
                dk: config.dk,
                dv: config.dv,
                repeat_index: repeat,
                wall_ns: (elapsed.as_nanos() as u64).max(1),
                aux_bytes: res.aux_bytes() as u64,
            });
        }
    }
    let position = |n: usize| config.n_values.iter().position(|&m| m == n);
    records.sort_by_key(|r| (position(r.n), r.repeat_index));
    Ok(records)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Time,
    AuxMemory,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Time => "time",
            Metric::AuxMemory => "aux_memory",
        })
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "time" => Ok(Metric::Time),
            "aux_memory" => Ok(Metric::AuxMemory),
            _ => Err(format!("unknown metric `{s}` (expected time or aux_memory)")),
        }
    }
}

/// Least-squares line through `(log₂ n, log₂ median)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub mechanism: AttentionMechanism,
    pub metric: Metric,
    pub slope: f64,
    pub r_squared: f64,
    pub points: Vec<(usize, f64)>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Fits the growth exponent of `metric` in N from per-N medians.
pub fn fit_loglog_slope(records: &[BenchRecord], metric: Metric) -> Result<SlopeFit> {
    let mut by_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in records {
        let value = match metric {
            Metric::Time => r.wall_ns as f64,
            Metric::AuxMemory => r.aux_bytes as f64,
        };
        by_n.entry(r.n).or_default().push(value);
    }
    if by_n.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientSweep {
            distinct: by_n.len(),
            required: MIN_FIT_POINTS,
        });
    }
    let mechanism = records[0].mechanism.clone();
    if let Some(other) = records.iter().find(|r| r.mechanism != mechanism) {
        return Err(Error::MixedRecords(
            mechanism.to_string(),
            other.mechanism.to_string(),
        ));
    }
    let points: Vec<(usize, f64)> = by_n
        .into_iter()
        .map(|(n, mut values)| (n, median(&mut values)))
        .collect();

    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).log2()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, v)| v.log2()).collect();
    let m = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / m;
    let mean_y = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(SlopeFit {
        mechanism,
        metric,
        slope,
        r_squared,
        points,
    })
}
