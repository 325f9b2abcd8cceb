use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use tensor_bss::bench::{run_benchmark, summary_csv, write_outputs};
use tensor_bss::bss::unmix;
use tensor_bss::config::ExperimentSpec;
use tensor_bss::eval::{kron_unmixing, kurtosis_rank, max_abs_correlations_series, mdi};
use tensor_bss::io::{read_matrices, read_series, write_matrices, write_series};
use tensor_bss::moments::IdentityShift;
use tensor_bss::simgen::{gen_latent_setting, gen_mixing, mix};
use tensor_bss::{bench, BssError, LagSet, Method, MixingKind, Result, Setting};

/// Blind source separation for tensor-valued time series.
#[derive(Parser)]
#[command(name = "tensor-bss", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate latent series Z, mixed series X and the mixing matrices.
    Simulate(SimulateArgs),
    /// Estimate an unmixing transform and the recovered sources.
    Unmix(UnmixArgs),
    /// Score unmixers by MDI, or recovered sources by correlation with targets.
    Evaluate(EvaluateArgs),
    /// Run a Monte-Carlo benchmark from a spec file.
    Bench(BenchArgs),
    /// Rank recovered components by excess kurtosis.
    Rank(RankArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "arma")]
    setting: Setting,
    #[arg(long, default_value = "gaussian")]
    mixing: MixingKind,
    #[arg(long, value_delimiter = ',', default_value = "3,2,2")]
    dims: Vec<usize>,
    #[arg(long = "T", default_value_t = 1000)]
    t: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for Z.txt, X.txt and mixing.txt.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct UnmixArgs {
    /// Series file to unmix.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    method: Method,
    /// `a:b` or `a,b,c`; defaults to the method's standard lags.
    #[arg(long)]
    lags: Option<LagSet>,
    /// Use δ_ij I instead of I in the tensor gJADE matrices.
    #[arg(long)]
    diagonal_shift: bool,
    /// Output directory for recovered.txt, unmixers.txt and diagnostics.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Unmixer file written by `unmix`.
    #[arg(long, requires = "mixing")]
    unmixers: Option<PathBuf>,
    /// Mixing matrices written by `simulate`.
    #[arg(long)]
    mixing: Option<PathBuf>,
    /// Recovered series written by `unmix`.
    #[arg(long, requires = "targets", conflicts_with = "unmixers")]
    recovered: Option<PathBuf>,
    /// Series whose cells are the target signals.
    #[arg(long)]
    targets: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment spec file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    /// Recovered series file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(report: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    match out {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => print_stdout(&(text + "\n"))?,
    }
    Ok(())
}

// A closed pipe downstream (e.g. `| head`) is not an error.
fn print_stdout(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut rng = bench::replicate_rng(a.seed, 0, a.setting, a.mixing, a.t);
    let z = gen_latent_setting(a.setting, &a.dims, a.t, &mut rng)?;
    let mixing = gen_mixing(&a.dims, a.mixing, &mut rng);
    let x = mix(&z, &mixing)?;
    std::fs::create_dir_all(&a.out)?;
    write_series(a.out.join("Z.txt"), &z)?;
    write_series(a.out.join("X.txt"), &x)?;
    write_matrices(a.out.join("mixing.txt"), &mixing)?;
    eprintln!("wrote {} frames of shape {:?} to {}", a.t, a.dims, a.out.display());
    Ok(())
}

fn unmix_cmd(a: UnmixArgs) -> Result<()> {
    let s = read_series(&a.input)?;
    let mut cfg = a.method.config_with_lags(a.lags)?;
    if a.diagonal_shift {
        cfg.identity_shift = IdentityShift::DiagonalPairs;
    }
    let res = unmix(&s, a.method, &cfg)?;
    std::fs::create_dir_all(&a.out)?;
    write_series(a.out.join("recovered.txt"), &res.recovered)?;
    write_matrices(a.out.join("unmixers.txt"), &res.mode_unmixers)?;
    let diagnostics = json!({
        "method": a.method,
        "lags": cfg.lags,
        "identity_shift": cfg.identity_shift,
        "input_dims": s.dims(),
        "T": s.len(),
        "modes": res.diagnostics,
    });
    emit(&diagnostics, Some(&a.out.join("diagnostics.json")))
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let report = match (&a.unmixers, &a.mixing, &a.recovered, &a.targets) {
        (Some(u), Some(m), _, _) => {
            let gammas = read_matrices(u)?;
            let mixing = read_matrices(m)?;
            let omega = kron_unmixing(&mixing);
            // a single unmixer is a vector method acting on vectorized frames
            let gamma = kron_unmixing(&gammas);
            let v = mdi(&gamma, &omega)?;
            json!({ "mdi": v.value, "assignment": v.assignment, "row_scores": v.row_scores })
        }
        (_, _, Some(r), Some(t)) => {
            let recovered = read_series(r)?;
            let targets = read_series(t)?;
            let cells: Vec<Vec<f64>> = (0..targets.frame_size()).map(|l| targets.component(l)).collect();
            serde_json::to_value(max_abs_correlations_series(&recovered, &cells)?).expect("report serializes")
        }
        _ => {
            return Err(BssError::InvalidParameter(
                "evaluate needs --unmixers with --mixing, or --recovered with --targets".into(),
            ))
        }
    };
    emit(&report, a.out.as_deref())
}

fn bench_cmd(a: BenchArgs) -> Result<()> {
    let mut spec = ExperimentSpec::from_file(&a.config)?;
    if let Some(r) = a.reps {
        spec.reps = r;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(o) = a.out {
        spec.out = o;
    }
    spec.validate()?;
    let manifest = run_benchmark(&spec)?;
    write_outputs(&manifest, &spec.out)?;
    print_stdout(&summary_csv(&manifest.summary))?;
    eprintln!(
        "{} replicates in {:.1}s, outputs in {}",
        manifest.replicates.len(),
        manifest.wall_clock_secs,
        spec.out.display()
    );
    Ok(())
}

fn rank(a: RankArgs) -> Result<()> {
    let s = read_series(&a.input)?;
    let report = serde_json::to_value(kurtosis_rank(&s)?).expect("report serializes");
    emit(&report, a.out.as_deref())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Unmix(a) => unmix_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Bench(a) => bench_cmd(a),
        Command::Rank(a) => rank(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
