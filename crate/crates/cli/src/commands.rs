use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use linattn::analysis::compare as compare_mechanisms;
use linattn::bench::{bench_sweep, fit_loglog_slope, write_csv, SweepConfig, MIN_FIT_POINTS};
use linattn::verify::{self, VerifyConfig};
use linattn::vision::{self, AttentionLayer};
use linattn::workload::Workload;
use linattn::{AttentionMechanism, ProjectionWeights, Rng};
use serde::Serialize;

use crate::{ApplyArgs, BenchArgs, CompareArgs, Format, VerifyArgs, OUT_DIR_ENV};

/// Resolves `--out` against the output-directory override and checks that
/// the parent directory exists.
fn output_path(path: &Path) -> Result<PathBuf> {
    let path = match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_owned(),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        if !parent.is_dir() {
            bail!("output directory {} does not exist", parent.display());
        }
    }
    Ok(path)
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn require_json(format: Format) -> Result<()> {
    if format != Format::Json {
        bail!("this command only writes JSON (--format json)");
    }
    Ok(())
}

pub fn verify(args: VerifyArgs) -> Result<ExitCode> {
    require_json(args.format)?;
    let out = args.out.as_deref().map(output_path).transpose()?;
    let config = VerifyConfig {
        seed: args.common.seed,
        eps: args.common.eps,
        instances: args.instances,
        max_n: args.n,
        max_dk: args.dk,
        max_dv: args.dv,
        mechanisms: if args.mechanism.is_empty() {
            AttentionMechanism::builtin()
        } else {
            args.mechanism
        },
    };
    let report = verify::run(&config)?;
    write_json(out.as_deref(), &report)?;
    Ok(if report.all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

pub fn compare(args: CompareArgs) -> Result<ExitCode> {
    require_json(args.format)?;
    let [a, b] = <[AttentionMechanism; 2]>::try_from(args.mechanism)
        .map_err(|m| anyhow::anyhow!("--mechanism takes exactly two mechanisms, got {}", m.len()))?;
    let out = args.out.as_deref().map(output_path).transpose()?;
    let dx = args.dx.unwrap_or(args.dk);
    let w = Workload::<f64>::generate(args.seed, args.n, dx, args.dk, args.dv)?;
    let report = compare_mechanisms(&a, &b, &w.qkv.q, &w.qkv.k, &w.qkv.v, args.eps)?;
    write_json(out.as_deref(), &report)?;
    Ok(ExitCode::SUCCESS)
}

/// Default sweep sizes: up to 16384 for quadratic-memory mechanisms, up to
/// 65536 otherwise.
pub fn default_n_values(mechanism: &AttentionMechanism) -> Vec<usize> {
    if mechanism.is_quadratic_memory() {
        vec![1024, 2048, 4096, 8192, 16384]
    } else {
        vec![4096, 8192, 16384, 32768, 65536]
    }
}

pub fn bench(args: BenchArgs) -> Result<ExitCode> {
    let metrics = args.fit.metrics();
    let out = args.out.as_deref().map(output_path).transpose()?;
    let fit_out = args.fit_out.as_deref().map(output_path).transpose()?;
    if args.repeats < linattn::bench::MIN_REPEATS {
        bail!(
            "--repeats must be at least {} (got {})",
            linattn::bench::MIN_REPEATS,
            args.repeats
        );
    }
    if !metrics.is_empty() && !args.n.is_empty() {
        let mut distinct = args.n.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < MIN_FIT_POINTS {
            bail!(
                "slope fit needs at least {MIN_FIT_POINTS} distinct --n values, got {} (pass --fit none to skip)",
                distinct.len()
            );
        }
    }

    let configs: Vec<SweepConfig> = args
        .mechanism
        .iter()
        .map(|m| {
            let n_values = if args.n.is_empty() {
                default_n_values(m)
            } else {
                args.n.clone()
            };
            let mut c = SweepConfig::new(m.clone(), n_values);
            c.dx = args.dx.unwrap_or(args.dk);
            c.dk = args.dk;
            c.dv = args.dv;
            c.repeats = args.repeats;
            c.seed = args.common.seed;
            c.eps = args.common.eps;
            c.precision = args.precision;
            c.memory_budget = args.memory_budget;
            c
        })
        .collect();

    let mut records = Vec::new();
    let mut fits = Vec::new();
    for config in &configs {
        let recs = bench_sweep(config)?;
        for &metric in &metrics {
            fits.push(fit_loglog_slope(&recs, metric)?);
        }
        records.extend(recs);
    }

    let mut w = sink(out.as_deref())?;
    match args.format {
        Format::Csv => write_csv(&mut w, &records)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &records)?;
            writeln!(w)?;
        }
    }
    w.flush()?;

    if !fits.is_empty() {
        let json = serde_json::to_string_pretty(&fits)?;
        match fit_out {
            Some(path) => fs::write(&path, json + "\n")
                .with_context(|| format!("writing {}", path.display()))?,
            None => eprintln!("{json}"),
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn apply(args: ApplyArgs) -> Result<ExitCode> {
    if !args.input.is_file() {
        bail!("input map {} does not exist", args.input.display());
    }
    let sidecar = vision::sidecar_path(&args.input);
    if !sidecar.is_file() {
        bail!("sidecar {} does not exist", sidecar.display());
    }
    if let Some(dir) = &args.weights {
        for name in vision::WEIGHT_FILES {
            if !dir.join(name).is_file() {
                bail!("weights file {} does not exist", dir.join(name).display());
            }
        }
    }
    let out = output_path(&args.out)?;

    let fm = vision::load(&args.input)?;
    let weights = match &args.weights {
        Some(dir) => vision::load_weights(dir)?,
        None => {
            let c = fm.channels();
            let dk = args.dk.unwrap_or(c);
            ProjectionWeights::seeded(&mut Rng::new(args.common.seed), c, dk, c)
        }
    };
    if weights.dx() != fm.channels() {
        bail!(
            "weights expect {} channels but the map has {}",
            weights.dx(),
            fm.channels()
        );
    }
    let layer = AttentionLayer::new(weights, args.mechanism, args.common.eps)?;
    let result = vision::layer_forward(&layer, &fm)?;
    vision::save(&result, &out)?;
    Ok(ExitCode::SUCCESS)
}
