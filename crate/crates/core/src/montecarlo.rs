//! Monte Carlo verification of the analytic quantities.
//!
//! Paths are split into fixed blocks of [`BLOCK_PATHS`]. Block `b` draws from
//! a ChaCha8 generator seeded with the master seed on stream `b`, so a report
//! depends only on the configuration and never on thread scheduling; block
//! results are reduced in block order.
//!
//! Standard errors use the analytic variance of each estimator (binomial
//! `p(1-p)/N` for frequencies, `E e^(-2uS) - (E e^(-uS))^2` for the Laplace
//! transform). This keeps a z-score finite when an empirical frequency is 0.

use crate::error::{domain, Result};
use crate::process::{BivariateCount, JumpSampler, ProcessParams, SubordinatedPoisson};
use crate::shock::{
    failure_cause_prob_by, hitting_reliability, integrate_fallible, reliability_series, total_failure_density,
    FailureSemantics, ThresholdDist,
};
use crate::subordinator::SubordinatorSpec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

/// Paths per RNG stream.
pub const BLOCK_PATHS: u64 = 4096;

/// Default |z| above which a comparison fails.
pub const DEFAULT_Z_THRESHOLD: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub paths: u64,
    pub master_seed: u64,
    pub workers: usize,
    pub horizon: f64,
    pub semantics: FailureSemantics,
    pub z_threshold: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            paths: 100_000,
            master_seed: 20_240_917,
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            horizon: 5.0,
            semantics: FailureSemantics::Crossing,
            z_threshold: DEFAULT_Z_THRESHOLD,
        }
    }
}

impl SimConfig {
    pub fn new(paths: u64, master_seed: u64) -> Self {
        Self { paths, master_seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return domain("paths must be positive");
        }
        if self.workers == 0 {
            return domain("workers must be positive");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return domain(format!("horizon must be positive and finite, got {}", self.horizon));
        }
        if !(self.z_threshold > 0.0) {
            return domain(format!("z threshold must be positive, got {}", self.z_threshold));
        }
        Ok(())
    }
}

/// One analytic-versus-empirical record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub analytic: f64,
    pub empirical: f64,
    pub std_error: f64,
    pub z_score: f64,
    pub pass: bool,
}

impl Comparison {
    pub fn new(name: impl Into<String>, analytic: f64, empirical: f64, std_error: f64, z_threshold: f64) -> Self {
        let diff = empirical - analytic;
        let z_score = if std_error > 0.0 {
            diff / std_error
        } else if diff.abs() <= 1e-12 * analytic.abs().max(1.0) {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        Self { name: name.into(), analytic, empirical, std_error, z_score, pass: z_score.abs() <= z_threshold }
    }

    /// Frequency `hits / n` against probability `p`.
    pub fn frequency(name: impl Into<String>, p: f64, hits: u64, n: u64, z_threshold: f64) -> Self {
        let nf = n as f64;
        let se = (p * (1.0 - p) / nf).max(0.0).sqrt();
        Self::new(name, p, hits as f64 / nf, se, z_threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub quantity: String,
    pub config: SimConfig,
    pub comparisons: Vec<Comparison>,
    /// Fraction of paths with no failure by the horizon (failure runs only).
    pub censored_fraction: Option<f64>,
    /// Wall-clock seconds; left out of JSON so equal configs give equal bytes.
    #[serde(skip)]
    pub runtime_seconds: Option<f64>,
}

impl SimReport {
    pub fn all_pass(&self) -> bool {
        self.comparisons.iter().all(|c| c.pass)
    }

    pub fn max_abs_z(&self) -> f64 {
        self.comparisons.iter().map(|c| c.z_score.abs()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Runs `f(rng, n_paths)` on every block and returns the block results in
/// block order.
fn run_blocks<T, F>(cfg: &SimConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, u64) -> Result<T> + Sync,
{
    cfg.validate()?;
    let blocks = cfg.paths.div_ceil(BLOCK_PATHS) as usize;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<T>>>> = Mutex::new((0..blocks).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..cfg.workers.min(blocks) {
            scope.spawn(|| loop {
                let b = next.fetch_add(1, Ordering::Relaxed);
                if b >= blocks {
                    break;
                }
                let n = BLOCK_PATHS.min(cfg.paths - b as u64 * BLOCK_PATHS);
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
                rng.set_stream(b as u64);
                let r = f(&mut rng, n);
                slots.lock().expect("no worker panics while holding the lock")[b] = Some(r);
            });
        }
    });
    slots.into_inner().expect("workers joined").into_iter().map(|s| s.expect("every block ran")).collect()
}

/// Empirical cell frequencies of `(N1(t), N2(t))` for `h <= max_h`.
pub fn estimate_pmf_cells(sys: &SubordinatedPoisson, t: f64, max_h: u64, cfg: &SimConfig) -> Result<SimReport> {
    if !(t >= 0.0) {
        return domain(format!("time must be >= 0, got {t}"));
    }
    let start = Instant::now();
    let cells: Vec<BivariateCount> = BivariateCount::lattice(max_h).collect();
    let index = |k: BivariateCount| {
        let h = k.total();
        (h * (h + 1) / 2 + k.k2) as usize
    };
    let counts = run_blocks(cfg, |rng, n| {
        let mut c = vec![0u64; cells.len()];
        for _ in 0..n {
            let k = sys.simulate_counts(t, rng)?;
            if k.total() <= max_h {
                c[index(k)] += 1;
            }
        }
        Ok(c)
    })?;
    let mut total = vec![0u64; cells.len()];
    for c in counts {
        for (a, b) in total.iter_mut().zip(c) {
            *a += b;
        }
    }
    let comparisons = cells
        .iter()
        .map(|&k| {
            let p = sys.pmf(k, t)?;
            Ok(Comparison::frequency(format!("pmf(k1={},k2={})", k.k1, k.k2), p, total[index(k)], cfg.paths, cfg.z_threshold))
        })
        .collect::<Result<_>>()?;
    Ok(SimReport {
        quantity: "pmf".into(),
        config: cfg.clone(),
        comparisons,
        censored_fraction: None,
        runtime_seconds: Some(start.elapsed().as_secs_f64()),
    })
}

/// Empirical pmf cells with `h <= 6`.
pub fn estimate_pmf(p: &ProcessParams, t: f64, cfg: &SimConfig) -> Result<SimReport> {
    p.validate()?;
    estimate_pmf_cells(&p.as_subordinated(), t, 6, cfg)
}

/// How a simulated path ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathCause {
    /// a single type-1 shock landed on the threshold
    Type1,
    Type2,
    /// a jump of size two or more landed exactly on the threshold
    Multiple,
    /// the count jumped over the threshold without hitting it
    Overshoot,
    /// no crossing by the horizon
    Censored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome {
    pub threshold: u64,
    /// first time with `Z >= L`, `None` when censored
    pub crossing_time: Option<f64>,
    pub cause: PathCause,
}

impl PathOutcome {
    /// Failure time under the given semantics.
    pub fn failure_time(&self, semantics: FailureSemantics) -> Option<f64> {
        match (semantics, self.cause) {
            (FailureSemantics::Hitting, PathCause::Overshoot) => None,
            _ => self.crossing_time,
        }
    }
}

fn simulate_one<R: rand::Rng + ?Sized>(
    sampler: &JumpSampler,
    d: &ThresholdDist,
    horizon: f64,
    rng: &mut R,
) -> PathOutcome {
    let threshold = d.sample(rng);
    let mut t = 0.0;
    let mut z: u64 = 0;
    loop {
        t += sampler.next_gap(rng);
        if t > horizon {
            return PathOutcome { threshold, crossing_time: None, cause: PathCause::Censored };
        }
        let (j1, j2) = sampler.sample(rng);
        z = z.saturating_add(j1 + j2);
        if z >= threshold {
            let cause = match (z == threshold, j1, j2) {
                (false, _, _) => PathCause::Overshoot,
                (true, 1, 0) => PathCause::Type1,
                (true, 0, 1) => PathCause::Type2,
                (true, _, _) => PathCause::Multiple,
            };
            return PathOutcome { threshold, crossing_time: Some(t), cause };
        }
    }
}

/// Per-path outcomes in path order.
pub fn simulate_failures(sys: &SubordinatedPoisson, d: &ThresholdDist, cfg: &SimConfig) -> Result<Vec<PathOutcome>> {
    d.validate()?;
    let sampler = JumpSampler::new(sys)?;
    let blocks = run_blocks(cfg, |rng, n| Ok((0..n).map(|_| simulate_one(&sampler, d, cfg.horizon, rng)).collect::<Vec<_>>()))?;
    Ok(blocks.into_iter().flatten().collect())
}

/// Compares simulated failure paths with the analytic law: survival on
/// `grid`, cause frequencies by the horizon, and the censored fraction.
/// Under hitting semantics the overshoot frequency (the defect of the
/// hitting time) is compared as well.
pub fn estimate_failure_law(
    sys: &SubordinatedPoisson,
    d: &ThresholdDist,
    grid: &[f64],
    cfg: &SimConfig,
) -> Result<SimReport> {
    let start = Instant::now();
    if grid.iter().any(|t| !(*t >= 0.0 && *t <= cfg.horizon)) {
        return domain(format!("grid points must lie in [0, {}]", cfg.horizon));
    }
    let outcomes = simulate_failures(sys, d, cfg)?;
    report_failure_law(sys, d, grid, cfg, &outcomes, start)
}

/// Builds the failure-law report from already simulated outcomes.
pub fn report_failure_law(
    sys: &SubordinatedPoisson,
    d: &ThresholdDist,
    grid: &[f64],
    cfg: &SimConfig,
    outcomes: &[PathOutcome],
    start: Instant,
) -> Result<SimReport> {
    let n = outcomes.len() as u64;
    let z = cfg.z_threshold;
    let sem = cfg.semantics;
    let mut comparisons = Vec::new();
    for &t in grid {
        let alive = outcomes.iter().filter(|o| o.failure_time(sem).is_none_or(|ft| ft > t)).count() as u64;
        let analytic = match sem {
            FailureSemantics::Crossing => reliability_series(sys, d, t)?,
            FailureSemantics::Hitting => hitting_reliability(sys, d, t)?,
        };
        comparisons.push(Comparison::frequency(format!("survival(t={t})"), analytic, alive, n, z));
    }
    let h = cfg.horizon;
    let count = |c: PathCause| outcomes.iter().filter(|o| o.cause == c).count() as u64;
    let p1 = failure_cause_prob_by(sys, d, 1, h)?;
    let p2 = failure_cause_prob_by(sys, d, 2, h)?;
    let hit = integrate_fallible(|s| total_failure_density(sys, d, s, FailureSemantics::Hitting), 0.0, h, 1e-12)?;
    let crossed = 1.0 - reliability_series(sys, d, h)?;
    comparisons.push(Comparison::frequency("cause=1", p1, count(PathCause::Type1), n, z));
    comparisons.push(Comparison::frequency("cause=2", p2, count(PathCause::Type2), n, z));
    comparisons.push(Comparison::frequency("cause=multiple", (hit - p1 - p2).max(0.0), count(PathCause::Multiple), n, z));
    if sem == FailureSemantics::Hitting {
        comparisons.push(Comparison::frequency("overshoot", (crossed - hit).max(0.0), count(PathCause::Overshoot), n, z));
    }
    comparisons.push(Comparison::frequency("censored", 1.0 - crossed, count(PathCause::Censored), n, z));
    let censored_fraction = Some(count(PathCause::Censored) as f64 / n as f64);
    Ok(SimReport {
        quantity: "failure".into(),
        config: cfg.clone(),
        comparisons,
        censored_fraction,
        runtime_seconds: Some(start.elapsed().as_secs_f64()),
    })
}

/// Mean of `exp(-u S(t))` against `exp(-t psi(u))` for each `u`.
pub fn estimate_subordinator_laplace(s: &SubordinatorSpec, t: f64, us: &[f64], cfg: &SimConfig) -> Result<SimReport> {
    s.validate()?;
    if !(t >= 0.0) {
        return domain(format!("time must be >= 0, got {t}"));
    }
    if us.iter().any(|u| !(*u >= 0.0)) {
        return domain("Laplace arguments must be >= 0");
    }
    let start = Instant::now();
    let sums = run_blocks(cfg, |rng, n| {
        let mut acc = vec![0.0; us.len()];
        for _ in 0..n {
            let x = s.sample_increment(t, rng)?;
            for (a, u) in acc.iter_mut().zip(us) {
                *a += (-u * x).exp();
            }
        }
        Ok(acc)
    })?;
    let mut total = vec![0.0; us.len()];
    for b in sums {
        for (a, v) in total.iter_mut().zip(b) {
            *a += v;
        }
    }
    let nf = cfg.paths as f64;
    let comparisons = us
        .iter()
        .zip(total)
        .map(|(&u, sum)| {
            let m1 = (-t * s.laplace_exponent(u)?).exp();
            let m2 = (-t * s.laplace_exponent(2.0 * u)?).exp();
            let se = ((m2 - m1 * m1).max(0.0) / nf).sqrt();
            Ok(Comparison::new(format!("laplace(u={u})"), m1, sum / nf, se, cfg.z_threshold))
        })
        .collect::<Result<_>>()?;
    Ok(SimReport {
        quantity: "laplace".into(),
        config: cfg.clone(),
        comparisons,
        censored_fraction: None,
        runtime_seconds: Some(start.elapsed().as_secs_f64()),
    })
}
