//! Command-line workflows: feature extraction, single-round acquisition, full
//! active-learning runs, oracle checks and scaling benchmarks.
//!
//! Every command reads an optional config file, writes into `--out`, and
//! echoes the effective configuration there as `config.txt`.

mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

pub use config::RunConfig;

use crate::acquisition::{
    acquire, dense_acquire, AcquisitionStats, BatchRule, FeatureSource, GeneratedSource, PffmSource, ScratchMeter,
    SelectionResult,
};
use crate::error::{Error, Result};
use crate::harness::{
    al_loop, family_fraction, mean_std, run_auc, write_round_csv, write_selection_csv, AlConfig, Benchmark, Metrics,
    RoundLog, ROUND_CSV_HEADER,
};
use crate::kernels::FeatureMatrix;
use crate::oracle::check::{self, SweepReport};
use crate::potential::xyz::read_xyz;
use crate::potential::{ModelParams, Structure};
use crate::rng::RootSeed;

#[derive(Debug, Parser)]
#[command(name = "poolforge", version, about = "Batch active-learning acquisition for energy/force models")]
pub struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value = "poolforge-out")]
    pub out: PathBuf,
    /// Fixed reduction order and single-threaded numerics.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Feature rows for every structure of an extended-XYZ file.
    Features {
        structures: PathBuf,
        /// Model parameters (`PFPM`); a seeded random model if omitted.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// One acquisition round from training and pool feature files.
    Acquire {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        pool: PathBuf,
    },
    /// Active-learning runs on the synthetic benchmark for every configured
    /// method and seed.
    AlRun,
    /// Brute-force reference sweeps.
    OracleCheck,
    /// Wall time and scratch memory against pool size.
    Bench,
}

/// Maps an error to the process exit code: 1 for bad input, 2 for numerical
/// failure.
pub fn exit_code(err: &Error) -> ExitCode {
    if err.is_numerical() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

/// Caps rayon workers from `POOLFORGE_THREADS`.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("POOLFORGE_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config { key: "POOLFORGE_THREADS".into(), msg: format!("cannot parse '{v}'") })?;
        if n == 0 {
            return Err(Error::Config { key: "POOLFORGE_THREADS".into(), msg: "must be at least 1".into() });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::parse(&fs::read_to_string(path)?)?,
        None => RunConfig::default(),
    };
    fs::create_dir_all(&cli.out)?;
    fs::write(cli.out.join("config.txt"), format!("# seed = {}\n{cfg}", cli.seed))?;
    let seed = RootSeed(cli.seed);
    let parallel = !cli.deterministic && rayon::current_num_threads() > 1;
    match &cli.command {
        Command::Features { structures, params } => cmd_features(&cfg, seed, structures, params.as_deref(), &cli.out),
        Command::Acquire { train, pool } => cmd_acquire(&cfg, parallel, train, pool, &cli.out),
        Command::AlRun => cmd_al_run(&cfg, cli.seed, parallel, &cli.out),
        Command::OracleCheck => cmd_oracle_check(cli.seed, &cli.out),
        Command::Bench => cmd_bench(&cfg, seed, parallel, &cli.out),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn cmd_features(cfg: &RunConfig, seed: RootSeed, structures: &Path, params: Option<&Path>, out: &Path) -> Result<()> {
    let frames = read_xyz(structures)?;
    if frames.is_empty() {
        return Err(Error::Empty("structure file"));
    }
    let model = match params {
        Some(p) => ModelParams::read_pfpm(File::open(p)?)?,
        None => ModelParams::init(cfg.student_dims(), &mut seed.stream("student")),
    };
    let map = cfg.feature_map()?;
    let descriptor = cfg.descriptor()?;
    let refs: Vec<&Structure> = frames.iter().map(|f| &f.structure).collect();
    let data = map.compute_all(&model, &descriptor, &refs)?;
    let matrix = FeatureMatrix::new(refs.len(), map.dim(&model), data)?;
    matrix.save(&out.join("features.pffm"), cfg.feature_precision)?;
    info!("{} rows of dim {} written", matrix.rows(), matrix.dim());
    Ok(())
}

fn write_selection(path: &Path, sel: &SelectionResult) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", SelectionResult::CSV_HEADER)?;
    sel.write_csv_rows(&mut w, 0)?;
    w.flush()?;
    Ok(())
}

fn write_stats(path: &Path, stats: &[AcquisitionStats]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", AcquisitionStats::CSV_HEADER)?;
    for s in stats {
        s.write_csv_row(&mut w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_acquire(cfg: &RunConfig, parallel: bool, train: &Path, pool: &Path, out: &Path) -> Result<()> {
    let mut train = PffmSource::open(train)?;
    let mut pool = PffmSource::open(pool)?;
    let rule = if cfg.selection == "greedy" { BatchRule::Greedy } else { BatchRule::Lcmd };
    let batch = cfg.batch.min(pool.rows());
    if batch < cfg.batch {
        warn!("batch {} exceeds the pool of {}; selecting the whole pool", cfg.batch, pool.rows());
    }
    let pipeline = crate::acquisition::PipelineConfig { shortlist: cfg.shortlist.min(pool.rows()), ..cfg.pipeline(parallel) };
    let meter = ScratchMeter::new();
    let (sel, stats) = acquire(&mut train, &mut pool, rule, batch, &pipeline, &meter)?;
    write_selection(&out.join("selection.csv"), &sel)?;
    write_stats(&out.join("stats.csv"), &[stats])?;
    info!("selected {} of {} candidates in {:.3} s", sel.len(), stats.pool_rows, stats.wall_seconds);
    Ok(())
}

/// Logs of every method (outer) and seed (inner).
pub type RunLogs = Vec<(String, Vec<(u64, Vec<RoundLog>)>)>;

/// Runs every configured method on `cfg.seeds` consecutive seeds starting at
/// `first_seed`. Seeds run concurrently; each seed is an independent pipeline.
pub fn run_methods(cfg: &RunConfig, first_seed: u64, parallel: bool) -> Result<(Vec<Benchmark>, RunLogs)> {
    let spec = cfg.benchmark_spec()?;
    let al: AlConfig = cfg.al_config(parallel);
    let methods = cfg.methods.iter().map(|m| cfg.method(m)).collect::<Result<Vec<_>>>()?;
    let seeds: Vec<u64> = (first_seed..first_seed + cfg.seeds as u64).collect();
    let per_seed = seeds
        .par_iter()
        .map(|&s| {
            let bench = Benchmark::build(&spec, RootSeed(s))?;
            let logs = methods.iter().map(|m| al_loop(&bench, m, &al, RootSeed(s))).collect::<Result<Vec<_>>>()?;
            Ok((bench, logs))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out: RunLogs = methods.iter().map(|m| (m.to_string(), Vec::new())).collect();
    let mut benches = Vec::with_capacity(seeds.len());
    for (&s, (bench, logs)) in seeds.iter().zip(per_seed) {
        for (k, l) in logs.into_iter().enumerate() {
            out[k].1.push((s, l));
        }
        benches.push(bench);
    }
    Ok((benches, out))
}

pub fn cmd_al_run(cfg: &RunConfig, first_seed: u64, parallel: bool, out: &Path) -> Result<()> {
    let start = Instant::now();
    let (benches, runs) = run_methods(cfg, first_seed, parallel)?;
    let mut summary = create(&out.join("summary.csv"))?;
    writeln!(summary, "method,metric,auc_mean,auc_std")?;
    let mut families = create(&out.join("family_fractions.csv"))?;
    writeln!(families, "method,seed,family,fraction")?;
    for (method, per_seed) in &runs {
        let file = method.replace(':', "_");
        let mut rounds = create(&out.join(format!("rounds_{file}.csv")))?;
        writeln!(rounds, "{ROUND_CSV_HEADER}")?;
        let mut selections = create(&out.join(format!("selections_{file}.csv")))?;
        writeln!(selections, "seed,{}", SelectionResult::CSV_HEADER)?;
        for ((seed, logs), bench) in per_seed.iter().zip(&benches) {
            write_round_csv(&mut rounds, *seed, logs)?;
            let mut buf = Vec::new();
            write_selection_csv(&mut buf, logs)?;
            for line in String::from_utf8_lossy(&buf).lines() {
                writeln!(selections, "{seed},{line}")?;
            }
            for r in 0..bench.families() {
                writeln!(families, "{method},{seed},{r},{:.6}", family_fraction(bench, logs, r))?;
            }
        }
        for metric in Metrics::NAMES {
            let aucs = per_seed.iter().map(|(_, l)| run_auc(l, metric)).collect::<Result<Vec<_>>>()?;
            let (mean, std) = mean_std(&aucs);
            writeln!(summary, "{method},{metric},{mean:.6},{std:.6}")?;
        }
        rounds.flush()?;
        selections.flush()?;
    }
    summary.flush()?;
    families.flush()?;
    info!("{} methods × {} seeds in {:.1} s", runs.len(), cfg.seeds, start.elapsed().as_secs_f64());
    Ok(())
}

/// Runs every reference sweep.
pub fn oracle_reports(seed: u64) -> Result<Vec<SweepReport>> {
    let mut reports = vec![
        check::woodbury_sweep(seed, crate::acquisition::DEFAULT_RIDGE)?,
        check::shortlist_sweep(seed, 20)?,
        check::lcmd_sweep(seed)?,
    ];
    reports.extend(check::derivative_sweep(seed)?);
    reports.extend(check::invariance_sweep(seed, 100)?);
    Ok(reports)
}

pub fn cmd_oracle_check(seed: u64, out: &Path) -> Result<()> {
    let reports = oracle_reports(seed)?;
    let mut w = create(&out.join("oracle.csv"))?;
    writeln!(w, "check,cases,worst,tolerance,passed")?;
    for r in &reports {
        println!("{r}");
        writeln!(w, "{},{},{:e},{:e},{}", r.name, r.cases, r.worst, r.tolerance, r.passed())?;
    }
    w.flush()?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::CheckFailed(failed.join(", ")))
    }
}

/// Gaussian feature rows, reproducible per row from `(seed, row)` alone so
/// that any block can be regenerated without storing the matrix.
pub fn synthetic_source(seed: u64, rows: usize, dim: usize) -> GeneratedSource<impl FnMut(usize, &mut [f64])> {
    GeneratedSource::new(rows, dim, move |row, out: &mut [f64]| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(row as u64);
        for v in out.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
    })
}

/// All rows of a synthetic source as one row-major buffer.
pub fn synthetic_rows(seed: u64, rows: usize, dim: usize) -> Result<Vec<f64>> {
    let mut src = synthetic_source(seed, rows, dim);
    let mut out = vec![0.0; rows * dim];
    src.fill(0, &mut out)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub path: &'static str,
    pub stats: AcquisitionStats,
}

/// Chunked acquisition over synthetic features at one pool size.
pub fn scaling_chunked(cfg: &RunConfig, seed: RootSeed, n_pool: usize, parallel: bool) -> Result<ScalingRow> {
    let mut train = synthetic_source(seed.0, cfg.bench_train_rows, cfg.bench_dim);
    let mut pool = synthetic_source(seed.0 ^ 0x5eed, n_pool, cfg.bench_dim);
    let meter = ScratchMeter::new();
    let pipeline = crate::acquisition::PipelineConfig { shortlist: cfg.shortlist.min(n_pool), ..cfg.pipeline(parallel) };
    let (_, stats) = acquire(&mut train, &mut pool, BatchRule::Lcmd, cfg.batch.min(n_pool), &pipeline, &meter)?;
    Ok(ScalingRow { path: "chunked", stats })
}

/// Dense kernel-space acquisition at one total size `n = n_T + n_P`.
pub fn scaling_dense(cfg: &RunConfig, seed: RootSeed, n_pool: usize) -> Result<ScalingRow> {
    let train = synthetic_rows(seed.0, cfg.bench_train_rows, cfg.bench_dim)?;
    let pool = synthetic_rows(seed.0 ^ 0x5eed, n_pool, cfg.bench_dim)?;
    let meter = ScratchMeter::new();
    let pipeline = crate::acquisition::PipelineConfig { shortlist: cfg.shortlist.min(n_pool), ..cfg.pipeline(false) };
    let (_, stats) =
        dense_acquire(&train, &pool, cfg.bench_dim, BatchRule::Lcmd, cfg.batch.min(n_pool), &pipeline, &meter)?;
    Ok(ScalingRow { path: "dense", stats })
}

pub fn cmd_bench(cfg: &RunConfig, seed: RootSeed, parallel: bool, out: &Path) -> Result<()> {
    let mut rows = Vec::new();
    for &n in &cfg.bench_pool_sizes {
        let r = scaling_chunked(cfg, seed, n, parallel)?;
        info!("chunked n_P = {n}: {:.3} s, {} scratch bytes", r.stats.wall_seconds, r.stats.scratch_peak_bytes);
        rows.push(r);
        if cfg.bench_dense {
            if cfg.bench_train_rows + n <= cfg.bench_dense_max {
                let r = scaling_dense(cfg, seed, n)?;
                info!("dense n_P = {n}: {:.3} s, {} scratch bytes", r.stats.wall_seconds, r.stats.scratch_peak_bytes);
                rows.push(r);
            } else {
                warn!("dense path skipped at n_P = {n}: {} rows exceed the cap of {}", cfg.bench_train_rows + n, cfg.bench_dense_max);
            }
        }
    }
    let mut w = create(&out.join("scaling.csv"))?;
    writeln!(w, "path,{}", AcquisitionStats::CSV_HEADER)?;
    for r in &rows {
        write!(w, "{},", r.path)?;
        r.stats.write_csv_row(&mut w)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses arguments, runs the command and maps failures to exit codes.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| run(&cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
