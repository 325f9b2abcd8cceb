//! Monte-Carlo comparison of the estimators on simulated mixtures.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bss::{unmix, Method};
use crate::config::ExperimentSpec;
use crate::error::Result;
use crate::eval::{kron_unmixing, mdi};
use crate::simgen::{gen_latent_setting, gen_mixing, mix, MixingKind, Setting};
use crate::tensor::{Matrix, TensorSeries};

pub const CSV_HEADER: &str = "setting,mixing,method,T,mean_mdi,se_mdi,n_ok";

/// Random stream for one replicate of one `(setting, mixing, T)` cell.
/// Depends only on its arguments, never on scheduling.
pub fn replicate_rng(seed: u64, rep: usize, setting: Setting, mixing: MixingKind, t: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(rep as u64));
    let stream = ((setting as u64) << 63) | ((mixing as u64) << 62) | t as u64;
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub mdi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicateRecord {
    pub setting: Setting,
    pub mixing: MixingKind,
    #[serde(rename = "T")]
    pub t: usize,
    pub rep: usize,
    pub outcomes: Vec<MethodOutcome>,
}

/// Simulates one dataset and scores every method of the spec on it.
pub fn run_replicate(
    spec: &ExperimentSpec,
    setting: Setting,
    mixing: MixingKind,
    t: usize,
    rep: usize,
) -> ReplicateRecord {
    let mut rng = replicate_rng(spec.seed, rep, setting, mixing, t);
    let data = gen_latent_setting(setting, &spec.dims, t, &mut rng)
        .and_then(|z| {
            let a = gen_mixing(&spec.dims, mixing, &mut rng);
            Ok((mix(&z, &a)?, kron_unmixing(&a)))
        })
        .map_err(|e| e.to_string());
    let outcomes = spec
        .methods
        .iter()
        .map(|&method| {
            let scored = data
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|(x, omega)| score(x, omega, method, spec).map_err(|e| e.to_string()));
            match scored {
                Ok(v) => MethodOutcome {
                    method,
                    mdi: Some(v),
                    error: None,
                },
                Err(e) => MethodOutcome {
                    method,
                    mdi: None,
                    error: Some(e),
                },
            }
        })
        .collect();
    ReplicateRecord {
        setting,
        mixing,
        t,
        rep,
        outcomes,
    }
}

fn score(x: &TensorSeries, omega: &Matrix, method: Method, spec: &ExperimentSpec) -> Result<f64> {
    let res = unmix(x, method, &spec.method_config(method))?;
    let gamma = if method.is_tensor() {
        kron_unmixing(&res.mode_unmixers)
    } else {
        res.mode_unmixers[0].clone()
    };
    Ok(mdi(&gamma, omega)?.value)
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub setting: Setting,
    pub mixing: MixingKind,
    pub method: Method,
    #[serde(rename = "T")]
    pub t: usize,
    pub mean_mdi: Option<f64>,
    pub se_mdi: Option<f64>,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub spec: ExperimentSpec,
    pub version: String,
    pub seed: u64,
    pub wall_clock_secs: f64,
    pub replicates: Vec<ReplicateRecord>,
    pub summary: Vec<CellSummary>,
}

fn mean_and_se(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (Some(mean), Some((var / n as f64).sqrt()))
}

fn cells(spec: &ExperimentSpec) -> Vec<(Setting, MixingKind, usize)> {
    let mut out = Vec::new();
    for &s in &spec.settings {
        for &m in &spec.mixings {
            for &t in &spec.lengths {
                out.push((s, m, t));
            }
        }
    }
    out
}

pub fn summarize(spec: &ExperimentSpec, replicates: &[ReplicateRecord]) -> Vec<CellSummary> {
    let mut summary = Vec::new();
    for (setting, mixing, t) in cells(spec) {
        let in_cell: Vec<&ReplicateRecord> = replicates
            .iter()
            .filter(|r| r.setting == setting && r.mixing == mixing && r.t == t)
            .collect();
        for &method in &spec.methods {
            let outcomes: Vec<&MethodOutcome> = in_cell
                .iter()
                .flat_map(|r| r.outcomes.iter().filter(|o| o.method == method))
                .collect();
            let ok: Vec<f64> = outcomes.iter().filter_map(|o| o.mdi).collect();
            let (mean_mdi, se_mdi) = mean_and_se(&ok);
            summary.push(CellSummary {
                setting,
                mixing,
                method,
                t,
                mean_mdi,
                se_mdi,
                n_ok: ok.len(),
                n_failed: outcomes.len() - ok.len(),
            });
        }
    }
    summary
}

/// Runs every replicate of every cell in parallel and aggregates.
pub fn run_benchmark(spec: &ExperimentSpec) -> Result<RunManifest> {
    spec.validate()?;
    let start = Instant::now();
    let tasks: Vec<(Setting, MixingKind, usize, usize)> = cells(spec)
        .into_iter()
        .flat_map(|(s, m, t)| (0..spec.reps).map(move |rep| (s, m, t, rep)))
        .collect();
    let replicates: Vec<ReplicateRecord> = tasks
        .par_iter()
        .map(|&(s, m, t, rep)| run_replicate(spec, s, m, t, rep))
        .collect();
    let summary = summarize(spec, &replicates);
    Ok(RunManifest {
        spec: spec.clone(),
        version: crate::VERSION.to_string(),
        seed: spec.seed,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        replicates,
        summary,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| format!("{x:.6e}"))
}

pub fn summary_csv(summary: &[CellSummary]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in summary {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.setting,
            c.mixing,
            c.method,
            c.t,
            fmt_opt(c.mean_mdi),
            fmt_opt(c.se_mdi),
            c.n_ok
        )
        .unwrap();
    }
    out
}

/// One panel per `(setting, mixing)`: rows are lengths, columns methods.
pub fn figure_table(spec: &ExperimentSpec, summary: &[CellSummary]) -> String {
    let mut out = String::new();
    for &setting in &spec.settings {
        for &mixing in &spec.mixings {
            writeln!(out, "# {setting} setting, {mixing} mixing: mean MDI").unwrap();
            writeln!(out, "# Both axes have logarithmic scales (T vs mean MDI).").unwrap();
            write!(out, "{:>8}", "T").unwrap();
            for m in &spec.methods {
                write!(out, " {:>10}", m.name()).unwrap();
            }
            out.push('\n');
            for &t in &spec.lengths {
                write!(out, "{t:>8}").unwrap();
                for &method in &spec.methods {
                    let v = summary
                        .iter()
                        .find(|c| c.setting == setting && c.mixing == mixing && c.t == t && c.method == method)
                        .and_then(|c| c.mean_mdi);
                    match v {
                        Some(v) => write!(out, " {v:>10.4}").unwrap(),
                        None => write!(out, " {:>10}", "-").unwrap(),
                    }
                }
                out.push('\n');
            }
            out.push('\n');
        }
    }
    out
}

/// Writes `manifest.json`, `summary.csv` and `figure2.txt` into `dir`.
pub fn write_outputs(manifest: &RunManifest, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(dir.join("manifest.json"), json)?;
    std::fs::write(dir.join("summary.csv"), summary_csv(&manifest.summary))?;
    std::fs::write(dir.join("figure2.txt"), figure_table(&manifest.spec, &manifest.summary))?;
    Ok(())
}
