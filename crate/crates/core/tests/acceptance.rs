//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use poolforge::acquisition::{
    self, build_precision, committee_scores, stream_shortlist, PipelineConfig, Prediction, ScratchMeter,
};
use poolforge::cli::{self, RunConfig};
use poolforge::harness::{family_fraction, mean_std, run_auc};
use poolforge::kernels::{cosine_normalize, dot, joint_feature, JointWeights};
use poolforge::oracle::check::{self, SweepReport};
use poolforge::rng::RootSeed;
use poolforge::Result;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

fn sweeps(reports: &[SweepReport]) -> Outcome {
    let passed = reports.iter().all(SweepReport::passed);
    let detail = reports.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("; ");
    Outcome::new(passed, detail)
}

/// Least-squares slope of `ln y` against `ln x`.
fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn woodbury() -> Result<Outcome> {
    Ok(sweeps(&[check::woodbury_sweep(11, acquisition::DEFAULT_RIDGE)?]))
}

fn shortlist() -> Result<Outcome> {
    Ok(sweeps(&[check::shortlist_sweep(12, 20)?]))
}

fn lcmd() -> Result<Outcome> {
    Ok(sweeps(&[check::lcmd_sweep(13)?]))
}

fn derivatives() -> Result<Outcome> {
    Ok(sweeps(&check::derivative_sweep(14)?))
}

fn invariances() -> Result<Outcome> {
    Ok(sweeps(&check::invariance_sweep(15, 100)?))
}

fn joint_kernel() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut unit = |d: usize| -> Result<Vec<f64>> {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        cosine_normalize(&v)
    };
    let mut worst = 0.0f64;
    let mut cases = 0;
    for (we, wf) in [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (32.0, 1.0)] {
        let w = JointWeights::new(we, wf)?;
        for d in [3, 17, 64] {
            for _ in 0..50 {
                let (ea, fa, eb, fb) = (unit(d)?, unit(2 * d)?, unit(d)?, unit(2 * d)?);
                let lhs = dot(&joint_feature(&ea, &fa, w)?, &joint_feature(&eb, &fb, w)?);
                let rhs = we * dot(&ea, &eb) + wf * dot(&fa, &fb);
                worst = worst.max((lhs - rhs).abs());
                cases += 1;
            }
        }
    }
    Ok(Outcome::new(worst <= 1e-12, format!("{cases} pairs, worst |K_EF - (w_E k_E + w_F k_F)| = {worst:.2e}")))
}

fn memory() -> Result<Outcome> {
    let d = 256;
    let cfg = RunConfig { bench_dim: d, chunk: 512, shortlist: 500, bench_train_rows: 1000, ..RunConfig::default() };
    let mut peaks = Vec::new();
    for n in [1_000, 10_000, 100_000] {
        let row = cli::scaling_chunked(&cfg, RootSeed(17), n, false)?;
        peaks.push((n, row.stats.scratch_peak_bytes));
    }
    let lo = peaks.iter().map(|p| p.1).min().unwrap_or(0) as f64;
    let hi = peaks.iter().map(|p| p.1).max().unwrap_or(0) as f64;
    let variation = (hi - lo) / lo;

    let dense_cfg = RunConfig { bench_dim: 128, bench_train_rows: 500, ..RunConfig::default() };
    let mut dense = Vec::new();
    for n in [1_000, 2_000, 5_000, 10_000, 20_000] {
        let row = cli::scaling_dense(&dense_cfg, RootSeed(17), n - dense_cfg.bench_train_rows)?;
        dense.push((n as f64, row.stats.scratch_peak_bytes as f64));
    }
    let exponent = log_log_slope(&dense);
    let passed = variation < 0.05 && (1.8..=2.2).contains(&exponent);
    Ok(Outcome::new(
        passed,
        format!(
            "chunked peaks {:?} bytes (variation {:.2}%), dense exponent {exponent:.3}",
            peaks.iter().map(|p| p.1).collect::<Vec<_>>(),
            100.0 * variation
        ),
    ))
}

fn linear_scoring() -> Result<Outcome> {
    let d = 128;
    let cfg = PipelineConfig::default();
    let meter = ScratchMeter::new();
    let state = build_precision(&mut cli::synthetic_source(18, 1000, d), &cfg, &meter)?;
    let mut points = Vec::new();
    for n in [10_000, 20_000, 50_000, 100_000, 200_000] {
        let mut best = f64::INFINITY;
        for _ in 0..3 {
            let mut pool = cli::synthetic_source(19, n, d);
            let start = Instant::now();
            stream_shortlist(&mut pool, &state, &cfg, &meter)?;
            best = best.min(start.elapsed().as_secs_f64());
        }
        points.push((n as f64, best));
    }
    let slope = log_log_slope(&points);
    Ok(Outcome::new(
        (0.9..=1.15).contains(&slope),
        format!(
            "times {:?} s, log-log slope {slope:.3}",
            points.iter().map(|p| format!("{:.3}", p.1)).collect::<Vec<_>>()
        ),
    ))
}

fn benchmark() -> Result<Outcome> {
    let cfg = RunConfig::default();
    let (_, runs) = cli::run_methods(&cfg, 0, false)?;
    let aucs = |name: &str| -> Result<Vec<f64>> {
        let (_, per_seed) = runs.iter().find(|(m, _)| m == name).expect("configured method");
        per_seed.iter().map(|(_, logs)| run_auc(logs, "force_rmse")).collect()
    };
    let random = aucs("random")?;
    let (random_mean, _) = mean_std(&random);
    let mut passed = true;
    let mut detail = format!("random {random_mean:.1}");
    for m in ["ntk-e", "ntk-f", "ntk-ef", "activation"] {
        let a = aucs(m)?;
        let (mean, _) = mean_std(&a);
        passed &= mean <= random_mean;
        detail += &format!(", {m} {mean:.1}");
        if m == "ntk-ef" {
            let wins = a.iter().zip(&random).filter(|(x, r)| x < r).count();
            passed &= wins >= 4;
            detail += &format!(" ({wins}/{} seeds below random)", a.len());
        }
    }
    Ok(Outcome::new(passed, format!("mean force-RMSE AUC: {detail}")))
}

fn bias_robustness() -> Result<Outcome> {
    let family = 4;
    let cfg = RunConfig { bias_family: Some(family), ..RunConfig::default() };
    let (benches, runs) = cli::run_methods(&cfg, 0, false)?;
    let balanced = 1.0 / benches[0].families() as f64;
    let pool_share: Vec<f64> = benches
        .iter()
        .map(|b| b.pool.iter().filter(|&&i| b.structures[i].family == family).count() as f64 / b.pool.len() as f64)
        .collect();
    let fraction = |name: &str| -> f64 {
        let (_, per_seed) = runs.iter().find(|(m, _)| m == name).expect("configured method");
        let f: Vec<f64> = per_seed.iter().zip(&benches).map(|((_, logs), b)| family_fraction(b, logs, family)).collect();
        mean_std(&f).0
    };
    let random = fraction("random");
    let mut passed = true;
    let mut detail =
        format!("pool share {:.3}, balanced {balanced:.3}, random {random:.3}", mean_std(&pool_share).0);
    for m in ["ntk-e", "ntk-f", "ntk-ef", "activation"] {
        let f = fraction(m);
        passed &= (f - balanced).abs() < (random - balanced).abs();
        detail += &format!(", {m} {f:.3}");
    }
    Ok(Outcome::new(passed, format!("up-weighted family selection fraction: {detail}")))
}

fn committee() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut random_pred = |atoms: usize| Prediction {
        energy: rng.random_range(-50.0..50.0),
        forces: (0..atoms).map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)]).collect(),
    };
    let candidates: Vec<Prediction> = (0..30).map(|c| random_pred(2 + c % 7)).collect();
    let same = committee_scores(&vec![candidates.clone(); 4])?;
    let zero = same.energy.iter().chain(&same.force).all(|&v| v == 0.0);

    let members: Vec<Vec<Prediction>> =
        (0..5).map(|_| candidates.iter().map(|c| random_pred(c.forces.len())).collect()).collect();
    let got = committee_scores(&members)?;
    let var = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
    };
    let mut worst = 0.0f64;
    for c in 0..candidates.len() {
        let e: Vec<f64> = members.iter().map(|m| m[c].energy).collect();
        let atoms = candidates[c].forces.len();
        let mut f = 0.0;
        for i in 0..atoms {
            for a in 0..3 {
                let comp: Vec<f64> = members.iter().map(|m| m[c].forces[i][a]).collect();
                f += var(&comp);
            }
        }
        f /= atoms as f64;
        let e_want = var(&e);
        worst = worst.max((got.energy[c] - e_want).abs() / e_want.max(1.0));
        worst = worst.max((got.force[c] - f).abs() / f.max(1.0));
    }
    Ok(Outcome::new(zero && worst < 1e-12, format!("identical members zero: {zero}, worst deviation {worst:.2e}")))
}

type Criterion = (u32, &'static str, Duration, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (1, "woodbury equivalence", Duration::from_secs(10), woodbury),
        (2, "shortlist exactness", Duration::from_secs(5), shortlist),
        (3, "lcmd oracle equality", Duration::from_secs(10), lcmd),
        (4, "derivative correctness", Duration::from_secs(30), derivatives),
        (5, "physical invariances", Duration::from_secs(30), invariances),
        (6, "joint kernel identity", Duration::from_secs(60), joint_kernel),
        (7, "memory contract", Duration::from_secs(300), memory),
        (8, "linear-time scoring", Duration::from_secs(600), linear_scoring),
        (9, "active-learning benchmark", Duration::from_secs(900), benchmark),
        (10, "bias robustness", Duration::from_secs(900), bias_robustness),
        (11, "committee correctness", Duration::from_secs(60), committee),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (id, name, limit, run) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let outcome = run().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let passed = outcome.passed && in_time;
        if !passed {
            failed += 1;
        }
        let timing = if in_time {
            format!("{:.1} s", elapsed.as_secs_f64())
        } else {
            format!("{:.1} s, over the {} s limit", elapsed.as_secs_f64(), limit.as_secs())
        };
        println!(
            "criterion {id:2} {}: {name} ({timing}) {}",
            if passed { "PASS" } else { "FAIL" },
            outcome.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
