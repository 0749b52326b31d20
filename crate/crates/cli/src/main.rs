//! Command-line front end: end-to-end clustering, dataset synthesis,
//! λ sweeps, and label-file evaluation.
//!
//! Exit codes: 0 success, 1 input error, 2 solver hit the iteration cap
//! (results are still written).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use tisrl_core::dataset::{self, MultiViewDataset, SynthSpec};
use tisrl_core::metrics::{accuracy, nmi, pairwise_f_precision};
use tisrl_core::solver::{run, SolverStatus, TisrlConfig};
use tisrl_core::spectral::{cluster, AffinityMatrix, SpectralConfig};

#[derive(Parser)]
#[command(
    name = "tisrl",
    version,
    about = "Multi-view subspace clustering via tensor low-rank representation learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn the intrinsic affinity of a dataset and cluster it.
    Cluster {
        /// Dataset directory (manifest.json plus view files).
        #[arg(long)]
        data: PathBuf,
        /// Trade-off weight of the column-sparse error term.
        #[arg(long)]
        lambda: f64,
        /// Number of clusters; defaults to the manifest value.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scale every sample column to unit norm before solving.
        #[arg(long)]
        normalize: bool,
        /// Repeat the clustering stage this many times with distinct seeds;
        /// reported metrics are means, labels.csv comes from the first run.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        /// Cap on solver iterations.
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        /// Skip writing trace.csv.
        #[arg(long)]
        no_trace: bool,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic union-of-subspaces dataset.
    Synth {
        #[arg(long, default_value_t = 3)]
        views: usize,
        /// Number of samples.
        #[arg(long)]
        n: usize,
        /// Number of clusters.
        #[arg(long)]
        k: usize,
        /// Dimension of each cluster's subspace.
        #[arg(long)]
        r: usize,
        /// Per-view ambient dimensions, comma separated; defaults to
        /// k·r + 5·(view + 1).
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        /// Noise standard deviation.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one cold-start clustering per λ and tabulate the metrics.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated λ grid, e.g. 0.01,0.1,1.
        #[arg(long, value_delimiter = ',', required = true)]
        lambdas: Vec<f64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        normalize: bool,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        /// Output directory for sweep.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a predicted labeling against ground truth.
    Eval {
        /// Ground-truth labels, one integer per line.
        #[arg(long)]
        truth: PathBuf,
        /// Predicted labels, one integer per line.
        #[arg(long)]
        pred: PathBuf,
    },
}

fn main() -> ExitCode {
    // LAPACK/BLAS stays single-threaded so results do not depend on a thread
    // count; data parallelism goes through the rayon pool below.
    if std::env::var_os("OPENBLAS_NUM_THREADS").is_none() {
        std::env::set_var("OPENBLAS_NUM_THREADS", "1");
    }
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(threads) = std::env::var("TISRL_THREADS") {
        match threads.trim().parse::<usize>() {
            Ok(t) if t >= 1 => rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global()
                .expect("the global rayon pool is built once"),
            _ => {
                eprintln!("error: TISRL_THREADS must be a positive integer, got {threads:?}");
                return ExitCode::from(1);
            }
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) =>
        {
            print!("{err}");
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            eprint!("{err}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Cluster {
            data,
            lambda,
            k,
            seed,
            normalize,
            repeats,
            max_iters,
            no_trace,
            out,
        } => cmd_cluster(
            &data, lambda, k, seed, normalize, repeats, max_iters, no_trace, &out,
        ),
        Command::Synth {
            views,
            n,
            k,
            r,
            dims,
            sigma,
            seed,
            out,
        } => cmd_synth(views, n, k, r, dims, sigma, seed, &out),
        Command::Sweep {
            data,
            lambdas,
            k,
            seed,
            normalize,
            max_iters,
            out,
        } => cmd_sweep(&data, &lambdas, k, seed, normalize, max_iters, &out),
        Command::Eval { truth, pred } => cmd_eval(&truth, &pred),
    }
}

fn load_dataset(path: &Path, normalize: bool) -> Result<MultiViewDataset> {
    let data =
        dataset::load(path).with_context(|| format!("loading dataset from {}", path.display()))?;
    if normalize {
        Ok(dataset::normalize(&data)?)
    } else {
        Ok(data)
    }
}

fn resolve_k(flag: Option<usize>, data: &MultiViewDataset) -> Result<usize> {
    match flag.or_else(|| data.num_clusters()) {
        Some(k) => Ok(k),
        None => bail!("no cluster count: pass --k or add num_clusters to the manifest"),
    }
}

/// Four clustering scores against ground truth.
#[derive(Clone, Copy)]
struct Scores {
    nmi: f64,
    acc: f64,
    fscore: f64,
    precision: f64,
}

fn score(truth: &[usize], pred: &[usize]) -> Result<Scores> {
    let (fscore, precision) = pairwise_f_precision(truth, pred)?;
    Ok(Scores {
        nmi: nmi(truth, pred)?,
        acc: accuracy(truth, pred)?,
        fscore,
        precision,
    })
}

fn render_metrics(s: &Scores) -> String {
    format!(
        "{{\n  \"nmi\": {:.6},\n  \"acc\": {:.6},\n  \"fscore\": {:.6},\n  \"precision\": {:.6}\n}}\n",
        s.nmi, s.acc, s.fscore, s.precision
    )
}

fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = BufWriter::new(
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    for l in labels {
        writeln!(out, "{l}")?;
    }
    out.flush()?;
    Ok(())
}

fn write_affinity(path: &Path, w: &AffinityMatrix) -> Result<()> {
    let mut out = BufWriter::new(
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    for row in w.matrix().rows() {
        let line: Vec<String> = row.iter().map(|x| format!("{x:.6}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_cluster(
    data_dir: &Path,
    lambda: f64,
    k: Option<usize>,
    seed: u64,
    normalize: bool,
    repeats: usize,
    max_iters: usize,
    no_trace: bool,
    out_dir: &Path,
) -> Result<u8> {
    if repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    let data = load_dataset(data_dir, normalize)?;
    let k = resolve_k(k, &data)?;
    let mut config = TisrlConfig::new(lambda);
    config.max_iters = max_iters;
    let (state, trace, status) = run(&data, &config)?;
    let affinity = state.intrinsic_affinity();

    // Repeats re-seed only the clustering stage; seeds advance by the
    // restart count so no two repeats share a restart stream.
    let stride = SpectralConfig::new(k, seed).kmeans_restarts as u64;
    let predictions: Vec<Vec<usize>> = (0..repeats)
        .map(|rep| {
            let rep_seed = seed.wrapping_add(stride.wrapping_mul(rep as u64));
            cluster(&affinity, &SpectralConfig::new(k, rep_seed))
        })
        .collect::<Result<_, _>>()?;

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    write_labels(&out_dir.join("labels.csv"), &predictions[0])?;
    write_affinity(&out_dir.join("affinity.csv"), &affinity)?;
    if !no_trace {
        let path = out_dir.join("trace.csv");
        let mut out = BufWriter::new(
            fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        );
        trace.write_csv(&mut out)?;
        out.flush()?;
    }
    if let Some(truth) = data.labels() {
        let scores: Vec<Scores> = predictions
            .iter()
            .map(|pred| score(truth, pred))
            .collect::<Result<_>>()?;
        let m = repeats as f64;
        let mean = Scores {
            nmi: scores.iter().map(|s| s.nmi).sum::<f64>() / m,
            acc: scores.iter().map(|s| s.acc).sum::<f64>() / m,
            fscore: scores.iter().map(|s| s.fscore).sum::<f64>() / m,
            precision: scores.iter().map(|s| s.precision).sum::<f64>() / m,
        };
        fs::write(out_dir.join("metrics.json"), render_metrics(&mean))?;
    }
    log::info!(
        "solver {} after {} iterations; outputs in {}",
        status.as_str(),
        trace.iterations(),
        out_dir.display()
    );
    Ok(match status {
        SolverStatus::Converged => 0,
        SolverStatus::MaxItersReached => 2,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    views: usize,
    n: usize,
    k: usize,
    r: usize,
    dims: Option<Vec<usize>>,
    sigma: f64,
    seed: u64,
    out: &Path,
) -> Result<u8> {
    let dims = dims.unwrap_or_else(|| (0..views).map(|i| k * r + 5 * (i + 1)).collect());
    let spec = SynthSpec {
        views,
        n,
        k,
        r,
        dims,
        sigma,
        seed,
    };
    let data = dataset::synth(&spec)?;
    dataset::save(&data, out)?;
    log::info!("wrote dataset {} to {}", data.name(), out.display());
    Ok(0)
}

fn cmd_sweep(
    data_dir: &Path,
    lambdas: &[f64],
    k: Option<usize>,
    seed: u64,
    normalize: bool,
    max_iters: usize,
    out_dir: &Path,
) -> Result<u8> {
    if lambdas.is_empty() || lambdas.iter().any(|&l| l.is_nan() || l <= 0.0) {
        bail!("--lambdas must be a nonempty list of positive values");
    }
    let data = load_dataset(data_dir, normalize)?;
    let k = resolve_k(k, &data)?;
    let truth = match data.labels() {
        Some(t) => t.to_vec(),
        None => bail!("sweep needs ground-truth labels to score against"),
    };

    // One cold-start run per λ; rows keep grid order however the runs are
    // scheduled.
    let rows: Vec<String> = lambdas
        .par_iter()
        .map(|&lambda| {
            let mut config = TisrlConfig::new(lambda);
            config.max_iters = max_iters;
            let outcome = run(&data, &config).map_err(anyhow::Error::from).and_then(
                |(state, trace, status)| {
                    let pred = cluster(&state.intrinsic_affinity(), &SpectralConfig::new(k, seed))?;
                    Ok((score(&truth, &pred)?, trace.iterations(), status))
                },
            );
            match outcome {
                Ok((s, iters, status)) => format!(
                    "{lambda:.6},{:.6},{:.6},{:.6},{:.6},{iters},{}",
                    s.nmi,
                    s.acc,
                    s.fscore,
                    s.precision,
                    status.as_str()
                ),
                Err(err) => {
                    log::warn!("lambda {lambda}: {err:#}");
                    format!("{lambda:.6},nan,nan,nan,nan,0,error")
                }
            }
        })
        .collect();

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let path = out_dir.join("sweep.csv");
    let mut out = BufWriter::new(
        fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    );
    writeln!(out, "lambda,nmi,acc,fscore,precision,iters,status")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(0)
}

fn read_labels_file(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .map(|(idx, line)| {
            line.trim().parse().with_context(|| {
                format!(
                    "{}, line {}: not a label: {:?}",
                    path.display(),
                    idx + 1,
                    line.trim()
                )
            })
        })
        .collect()
}

fn cmd_eval(truth: &Path, pred: &Path) -> Result<u8> {
    let truth = read_labels_file(truth)?;
    let pred = read_labels_file(pred)?;
    let s = score(&truth, &pred)?;
    print!("{}", render_metrics(&s));
    Ok(0)
}
