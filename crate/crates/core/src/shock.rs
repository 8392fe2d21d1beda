//! Competing-risks shock model.
//!
//! Shocks of type 1 and 2 arrive as the two components of the counting
//! process. The system carries a random threshold `L >= 1`, independent of the
//! shocks, and fails once the cumulative count `Z(t)` reaches it. Two failure
//! notions are exposed:
//!
//! - crossing: first `t` with `Z(t) >= L`; its survival is
//!   `sum_k P(L > k) P(Z(t) = k)`.
//! - hitting: first `t` with `Z(t) = L`; a jump that lands exactly on `L`
//!   through a single shock of type `n` fails the system with cause `n`.
//!
//! For `alpha < 1` the count jumps by more than one, so the two differ and the
//! hitting law is defective.

use crate::error::{domain, Error, Result};
use crate::process::{
    check_cap, hoppe_sum, time_weights, wright_outer_series, BivariateCount, CountPmfTable, HoppeNormalization, ProcessParams,
    SubordinatedPoisson, DEFAULT_DERIVATIVE_CAP, TAIL_CAP,
};
use crate::quad;
use crate::special_fn::{ln_factorial, CompensatedSum};
use crate::subordinator::SubordinatorSpec;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

/// Absolute accuracy targeted by threshold-series truncation.
pub const SERIES_TOL: f64 = 1e-13;

/// Absolute tolerance of mixture quadratures.
pub const QUAD_TOL: f64 = 1e-10;

/// Law of the success probability of a geometric threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum MixingLaw {
    Uniform,
    /// density proportional to `(1 + a p)^(-(b+1))` on (0, 1)
    TruncatedLomax { a: f64, b: f64 },
    /// Weibull with scale `a`, shape `b`, location `c`, truncated to (0, 1)
    TruncatedWeibull { a: f64, b: f64, c: f64 },
    PointMass { p: f64 },
}

impl MixingLaw {
    /// Lomax law tied to the process: `a = Lambda / theta`, `b = alpha - 1`.
    pub fn lomax_for(p: &ProcessParams) -> Result<Self> {
        if !(p.theta > 0.0) || p.alpha >= 1.0 {
            return Err(Error::Unsupported("the tied Lomax law needs theta > 0 and alpha < 1".into()));
        }
        let law = MixingLaw::TruncatedLomax { a: p.total_rate() / p.theta, b: p.alpha - 1.0 };
        law.validate()?;
        Ok(law)
    }

    /// Weibull law tied to the process: `a = 1/Lambda`, `b = alpha`,
    /// `c = -theta/Lambda`.
    pub fn weibull_for(p: &ProcessParams) -> Self {
        let lam = p.total_rate();
        MixingLaw::TruncatedWeibull { a: 1.0 / lam, b: p.alpha, c: -p.theta / lam }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MixingLaw::Uniform => Ok(()),
            MixingLaw::TruncatedLomax { a, b } => {
                if a > 0.0 && b > -1.0 && b != 0.0 && a.is_finite() && b.is_finite() {
                    Ok(())
                } else {
                    domain(format!("truncated Lomax needs a > 0, b > -1, b != 0; got a={a}, b={b}"))
                }
            }
            MixingLaw::TruncatedWeibull { a, b, c } => {
                if !(a > 0.0 && b > 0.0 && c.is_finite()) {
                    return domain(format!("truncated Weibull needs a, b > 0; got a={a}, b={b}"));
                }
                if c >= 1.0 {
                    return domain(format!("truncated Weibull location must be below 1, got {c}"));
                }
                Ok(())
            }
            MixingLaw::PointMass { p } => {
                if p > 0.0 && p <= 1.0 {
                    Ok(())
                } else {
                    domain(format!("point mass must lie in (0, 1], got {p}"))
                }
            }
        }
    }

    /// `(p_min, p_max)` of the support.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            MixingLaw::TruncatedWeibull { c, .. } => (c.max(0.0), 1.0),
            MixingLaw::PointMass { p } => (p, p),
            _ => (0.0, 1.0),
        }
    }

    fn weibull_cum(a: f64, b: f64, c: f64, p: f64) -> f64 {
        (-((p - c) / a).powf(b)).exp()
    }

    /// Density on the support (the point mass has none).
    pub fn density(&self, p: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(p > lo && p < hi) {
            return 0.0;
        }
        match *self {
            MixingLaw::Uniform => 1.0,
            MixingLaw::TruncatedLomax { a, b } => {
                a * b * (1.0 + a * p).powf(-(b + 1.0)) / (1.0 - (1.0 + a).powf(-b))
            }
            MixingLaw::TruncatedWeibull { a, b, c } => {
                let x = (p - c) / a;
                let z = Self::weibull_cum(a, b, c, lo) - Self::weibull_cum(a, b, c, hi);
                b / a * x.powf(b - 1.0) * (-x.powf(b)).exp() / z
            }
            MixingLaw::PointMass { .. } => 0.0,
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            MixingLaw::Uniform => u,
            MixingLaw::TruncatedLomax { a, b } => {
                let k = 1.0 - (1.0 + a).powf(-b);
                ((1.0 - u * k).powf(-1.0 / b) - 1.0) / a
            }
            MixingLaw::TruncatedWeibull { a, b, c } => {
                let (lo, hi) = self.support();
                let e_lo = Self::weibull_cum(a, b, c, lo);
                let e_hi = Self::weibull_cum(a, b, c, hi);
                let e = e_lo - u * (e_lo - e_hi);
                (c + a * (-e.ln()).powf(1.0 / b)).clamp(lo, hi)
            }
            MixingLaw::PointMass { p } => p,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random())
    }

    /// `int f(p) dG(p)`.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> Result<f64> {
        if let MixingLaw::PointMass { p } = *self {
            return Ok(f(p));
        }
        let (lo, hi) = self.support();
        Ok(quad::integrate(|p| f(p) * self.density(p), lo, hi, QUAD_TOL)?.value)
    }
}

/// Law of the threshold `L` (values `1, 2, ...`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ThresholdDist {
    Geometric { p: f64 },
    DiscreteExponential,
    YuleSimon { rho: f64 },
    Deterministic { m: u64 },
    /// `pmf[i] = P(L = i + 1)`
    Empirical { pmf: Vec<f64> },
    GeometricMixture { law: MixingLaw },
}

impl ThresholdDist {
    pub fn validate(&self) -> Result<()> {
        match self {
            ThresholdDist::Geometric { p } => {
                if !(*p > 0.0 && *p <= 1.0) {
                    return domain(format!("geometric threshold needs p in (0, 1], got {p}"));
                }
            }
            ThresholdDist::DiscreteExponential => {}
            ThresholdDist::YuleSimon { rho } => {
                if !(*rho > 0.0 && rho.is_finite()) {
                    return domain(format!("Yule-Simon threshold needs rho > 0, got {rho}"));
                }
            }
            ThresholdDist::Deterministic { m } => {
                if *m < 1 {
                    return domain("deterministic threshold needs m >= 1");
                }
            }
            ThresholdDist::Empirical { pmf } => {
                if pmf.is_empty() || pmf.iter().any(|q| !(*q >= 0.0)) {
                    return domain("empirical threshold needs a nonempty nonnegative pmf");
                }
                let s: f64 = pmf.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return domain(format!("empirical threshold pmf must sum to 1 (within 1e-12), got {s}"));
                }
            }
            ThresholdDist::GeometricMixture { law } => law.validate()?,
        }
        Ok(())
    }

    /// `P(L > k)`.
    pub fn survival(&self, k: u64) -> f64 {
        if k == 0 {
            return 1.0;
        }
        let kf = k as f64;
        match self {
            ThresholdDist::Geometric { p } => (kf * (-p).ln_1p()).exp(),
            ThresholdDist::DiscreteExponential => (-kf).exp(),
            ThresholdDist::YuleSimon { rho } => {
                (libm::lgamma(kf + 1.0) + libm::lgamma(rho + 1.0) - libm::lgamma(kf + rho + 1.0)).exp()
            }
            ThresholdDist::Deterministic { m } => {
                if k < *m {
                    1.0
                } else {
                    0.0
                }
            }
            ThresholdDist::Empirical { pmf } => pmf.iter().skip(k as usize).sum(),
            ThresholdDist::GeometricMixture { law } => match *law {
                MixingLaw::Uniform => 1.0 / (kf + 1.0),
                MixingLaw::PointMass { p } => (kf * (-p).ln_1p()).exp(),
                _ => law.expect(|p| (kf * (-p).ln_1p()).exp()).unwrap_or(f64::NAN),
            },
        }
    }

    /// `P(L = k)` for `k >= 1`.
    pub fn pmf(&self, k: u64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let kf = k as f64;
        match self {
            ThresholdDist::Geometric { p } => p * ((kf - 1.0) * (-p).ln_1p()).exp(),
            ThresholdDist::DiscreteExponential => (1.0 - (-1f64).exp()) * (-(kf - 1.0)).exp(),
            ThresholdDist::YuleSimon { rho } => {
                rho * (libm::lgamma(kf) + libm::lgamma(rho + 1.0) - libm::lgamma(kf + rho + 1.0)).exp()
            }
            ThresholdDist::Deterministic { m } => {
                if k == *m {
                    1.0
                } else {
                    0.0
                }
            }
            ThresholdDist::Empirical { pmf } => pmf.get(k as usize - 1).copied().unwrap_or(0.0),
            ThresholdDist::GeometricMixture { law } => match *law {
                MixingLaw::Uniform => 1.0 / (kf * (kf + 1.0)),
                MixingLaw::PointMass { p } => p * ((kf - 1.0) * (-p).ln_1p()).exp(),
                _ => law.expect(|p| p * ((kf - 1.0) * (-p).ln_1p()).exp()).unwrap_or(f64::NAN),
            },
        }
    }

    /// Largest value `L` can take, when finite.
    pub fn max_support(&self) -> Option<u64> {
        match self {
            ThresholdDist::Geometric { p } if *p >= 1.0 => Some(1),
            ThresholdDist::Deterministic { m } => Some(*m),
            ThresholdDist::Empirical { pmf } => Some(pmf.len() as u64),
            ThresholdDist::GeometricMixture { law: MixingLaw::PointMass { p } } if *p >= 1.0 => Some(1),
            _ => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            ThresholdDist::Geometric { p } => geometric(*p, rng),
            ThresholdDist::DiscreteExponential => geometric(1.0 - (-1f64).exp(), rng),
            ThresholdDist::YuleSimon { rho } => {
                let w = Exp::new(*rho).expect("validated rate").sample(rng);
                geometric((-w).exp(), rng)
            }
            ThresholdDist::Deterministic { m } => *m,
            ThresholdDist::Empirical { pmf } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, q) in pmf.iter().enumerate() {
                    acc += q;
                    if u < acc {
                        return i as u64 + 1;
                    }
                }
                pmf.len() as u64
            }
            ThresholdDist::GeometricMixture { law } => geometric(law.sample(rng), rng),
        }
    }
}

/// Geometric variable on `{1, 2, ...}` with success probability `p`.
fn geometric<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    if p >= 1.0 {
        return 1;
    }
    if !(p > 0.0) {
        return u64::MAX;
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    let g = (u.ln() / (-p).ln_1p()).floor() + 1.0;
    if g < 1.8e19 {
        g as u64
    } else {
        u64::MAX
    }
}

/// `P(L > k)`.
pub fn threshold_survival(d: &ThresholdDist, k: u64) -> Result<f64> {
    d.validate()?;
    Ok(d.survival(k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureSemantics {
    #[default]
    Crossing,
    Hitting,
}

/// Rate at which a single type-`n` shock arrives: `(lambda_n / Lambda) mu_1`.
pub fn unit_shock_rate(sys: &SubordinatedPoisson, n: usize) -> Result<f64> {
    let lam_n = match n {
        1 => sys.lambda1,
        2 => sys.lambda2,
        _ => return domain(format!("shock type must be 1 or 2, got {n}")),
    };
    Ok(lam_n / sys.total_rate() * sys.jump_masses(1)[0])
}

/// `lambda_n alpha (Lambda + theta)^(alpha - 1)`.
pub fn hazard_rate_closed(p: &ProcessParams, n: usize) -> Result<f64> {
    p.validate()?;
    let lam_n = p.rate(n)?;
    Ok(lam_n * p.alpha * (p.total_rate() + p.theta).powf(p.alpha - 1.0))
}

/// Hazard of a type-`n` failure from state `k` at time `t`, assembled from
/// the derivative-sum pmf over the Wright-series pmf.
pub fn hazard_rate(p: &ProcessParams, n: usize, k: BivariateCount, t: f64) -> Result<f64> {
    hazard_rate_with(p, n, k, t, DEFAULT_DERIVATIVE_CAP, HoppeNormalization::Corrected)
}

pub fn hazard_rate_with(
    p: &ProcessParams,
    n: usize,
    k: BivariateCount,
    t: f64,
    cap: usize,
    norm: HoppeNormalization,
) -> Result<f64> {
    let c = hazard_rate_closed(p, n)?;
    if !(t > 0.0) {
        return domain(format!("hazard needs t > 0, got {t}"));
    }
    let h = k.total() as usize;
    check_cap("derivative order", h, cap)?;
    let w = time_weights(t, h);
    // ratio of the two total-count pmfs, with the common exp(-t psi) pulled out
    let numer = hoppe_sum(p, h, &|j| w[j], norm);
    let denom = total_count_wright_scaled(p, h, t)?;
    Ok(c * numer / denom)
}

/// `P(Z(t) = h) exp(t psi(Lambda))` by the Wright series.
fn total_count_wright_scaled(p: &ProcessParams, h: usize, t: f64) -> Result<f64> {
    let log_pref = -ln_factorial(h as u64) + t * p.psi(p.total_rate());
    let v = wright_outer_series(p, h as u64, t, log_pref)?;
    Ok(if h % 2 == 1 { -v } else { v })
}

/// `P(Z(t) = k)` weighted by a threshold sequence, truncated once the
/// remaining mass is provably below [`SERIES_TOL`].
struct ThresholdSeries<'a> {
    d: &'a ThresholdDist,
    surv: Vec<f64>,
}

impl<'a> ThresholdSeries<'a> {
    fn new(d: &'a ThresholdDist) -> Self {
        Self { d, surv: vec![1.0] }
    }

    fn survival(&mut self, k: usize) -> f64 {
        while self.surv.len() <= k {
            let n = self.surv.len() as u64;
            self.surv.push(self.d.survival(n));
        }
        self.surv[k]
    }

    fn pmf(&mut self, k: usize) -> f64 {
        match self.d {
            ThresholdDist::GeometricMixture { law } if !matches!(law, MixingLaw::Uniform | MixingLaw::PointMass { .. }) => {
                (self.survival(k - 1) - self.survival(k)).max(0.0)
            }
            _ => self.d.pmf(k as u64),
        }
    }
}

fn truncation_error(what: &str, partial: f64, bound: f64) -> Error {
    Error::NotConverged { what: what.into(), partial, abs_error: bound, terms: TAIL_CAP }
}

/// Crossing survival `sum_k P(L > k) P(Z(t) = k)` for any subordinator.
pub fn reliability_series(sys: &SubordinatedPoisson, d: &ThresholdDist, t: f64) -> Result<f64> {
    d.validate()?;
    let mut table = CountPmfTable::new(sys, t)?;
    let mut ts = ThresholdSeries::new(d);
    let mut sum = CompensatedSum::new();
    let mut cum = CompensatedSum::new();
    let last = d.max_support().map(|m| m as usize - 1);
    let mut bound = 1.0;
    for k in 0..TAIL_CAP {
        let pk = table.get(k);
        sum.add(ts.survival(k) * pk);
        cum.add(pk);
        if last == Some(k) {
            return Ok(sum.value());
        }
        bound = ts.survival(k + 1) * (1.0 - cum.value()).max(0.0);
        if bound < SERIES_TOL {
            return Ok(sum.value());
        }
    }
    Err(truncation_error("threshold series of the reliability", sum.value(), bound))
}

/// Crossing survival for the tempered stable process.
pub fn reliability(p: &ProcessParams, d: &ThresholdDist, t: f64) -> Result<f64> {
    p.validate()?;
    reliability_series(&p.as_subordinated(), d, t)
}

/// Type-`n` failure density `c_n sum_k P(L = k) P(Z(t) = k - 1)`, `c_n` the
/// unit-shock rate.
pub fn failure_density_for(sys: &SubordinatedPoisson, d: &ThresholdDist, n: usize, t: f64) -> Result<f64> {
    d.validate()?;
    let c = unit_shock_rate(sys, n)?;
    let mut table = CountPmfTable::new(sys, t)?;
    let mut ts = ThresholdSeries::new(d);
    let mut sum = CompensatedSum::new();
    let mut cum = CompensatedSum::new();
    let last = d.max_support().map(|m| m as usize);
    let mut bound = 1.0;
    for k in 1..TAIL_CAP {
        let pk = table.get(k - 1);
        sum.add(ts.pmf(k) * pk);
        cum.add(pk);
        if last == Some(k) {
            return Ok(c * sum.value());
        }
        bound = c * ts.survival(k) * (1.0 - cum.value()).max(0.0);
        if bound < SERIES_TOL {
            return Ok(c * sum.value());
        }
    }
    Err(truncation_error("threshold series of the failure density", c * sum.value(), bound))
}

pub fn failure_density(p: &ProcessParams, d: &ThresholdDist, n: usize, t: f64) -> Result<f64> {
    p.validate()?;
    failure_density_for(&p.as_subordinated(), d, n, t)
}

/// Type-`n` failure density through the finite derivative sums; every
/// threshold value needed must sit within `cap + 1`.
pub fn failure_density_hoppe(
    p: &ProcessParams,
    d: &ThresholdDist,
    n: usize,
    t: f64,
    cap: usize,
    norm: HoppeNormalization,
) -> Result<f64> {
    d.validate()?;
    let c = hazard_rate_closed(p, n)?;
    if !(t >= 0.0) {
        return domain(format!("time must be >= 0, got {t}"));
    }
    let p0 = (-t * p.psi(p.total_rate())).exp();
    let w = time_weights(t, cap);
    let mut ts = ThresholdSeries::new(d);
    let mut sum = CompensatedSum::new();
    let mut cum = CompensatedSum::new();
    let last = d.max_support().map(|m| m as usize);
    for k in 1..=cap + 1 {
        let pz = p0 * hoppe_sum(p, k - 1, &|j| w[j], norm);
        sum.add(ts.pmf(k) * pz);
        cum.add(pz);
        if last == Some(k) || c * ts.survival(k) * (1.0 - cum.value()).max(0.0) < SERIES_TOL {
            return Ok(c * sum.value());
        }
    }
    Err(Error::CapExceeded { what: "threshold truncation of the derivative-sum density".into(), needed: cap + 2, cap })
}

/// Probability that the system fails by a single shock of type `n` landing
/// exactly on the threshold: `c_n / psi(Lambda) sum_k P(L = k) u_(k-1)`,
/// where `u_m` is the probability that the total count ever equals `m`.
pub fn failure_cause_prob_for(sys: &SubordinatedPoisson, d: &ThresholdDist, n: usize) -> Result<f64> {
    d.validate()?;
    let c = unit_shock_rate(sys, n)? / sys.jump_rate();
    let mut ts = ThresholdSeries::new(d);
    let mut pi: Vec<f64> = Vec::new();
    let mut u = vec![1.0];
    let mut sum = CompensatedSum::new();
    let last = d.max_support().map(|m| m as usize);
    let rate = sys.jump_rate();
    let mut bound = 1.0;
    for k in 1..TAIL_CAP {
        let m = k - 1;
        if m >= 1 {
            if pi.len() < m {
                pi = sys.jump_masses((2 * m).max(64)).iter().map(|x| x / rate).collect();
            }
            let um: f64 = (1..=m).map(|j| pi[j - 1] * u[m - j]).sum();
            u.push(um);
        }
        sum.add(ts.pmf(k) * u[m]);
        if last == Some(k) {
            return Ok(c * sum.value());
        }
        bound = c * ts.survival(k);
        if bound < SERIES_TOL {
            return Ok(c * sum.value());
        }
    }
    Err(truncation_error("threshold series of the cause probability", c * sum.value(), bound))
}

pub fn failure_cause_prob(p: &ProcessParams, d: &ThresholdDist, n: usize) -> Result<f64> {
    p.validate()?;
    failure_cause_prob_for(&p.as_subordinated(), d, n)
}

/// Cause probability through the finite derivative sums with the time
/// integral done in closed form (`int t^l/l! e^(-t psi) dt = psi^(-l-1)`).
/// The alternating inner sums cancel like `2^h`, so orders beyond about 30
/// lose most digits.
pub fn failure_cause_prob_series(
    p: &ProcessParams,
    d: &ThresholdDist,
    n: usize,
    cap: usize,
    norm: HoppeNormalization,
) -> Result<f64> {
    d.validate()?;
    let c = hazard_rate_closed(p, n)?;
    let psi = p.psi(p.total_rate());
    let mut ts = ThresholdSeries::new(d);
    let mut sum = CompensatedSum::new();
    let last = d.max_support().map(|m| m as usize);
    for k in 1..=cap + 1 {
        let u = psi * hoppe_sum(p, k - 1, &|l| psi.powi(-(l as i32) - 1), norm);
        sum.add(ts.pmf(k) * u);
        if last == Some(k) || c / psi * ts.survival(k) < SERIES_TOL {
            return Ok(c / psi * sum.value());
        }
    }
    Err(Error::CapExceeded { what: "threshold truncation of the cause series".into(), needed: cap + 2, cap })
}

/// Cause probability as `int_0^inf g_n(t) dt`.
pub fn failure_cause_prob_by_integration(p: &ProcessParams, d: &ThresholdDist, n: usize) -> Result<f64> {
    p.validate()?;
    let sys = p.as_subordinated();
    let mut err = None;
    let r = quad::integrate_to_infinity(
        |t| match failure_density_for(&sys, d, n, t) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        0.0,
        1e-10,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(r.value),
    }
}

/// Central-difference step used for time derivatives of the survival.
pub fn derivative_step(t: f64) -> f64 {
    let s = 1e-5 * t.max(1.0);
    if t > 0.0 {
        s.min(0.5 * t)
    } else {
        s
    }
}

/// `-dR/dt` by central differences (one-sided at `t = 0`).
pub fn failure_density_total_numeric(sys: &SubordinatedPoisson, d: &ThresholdDist, t: f64) -> Result<f64> {
    let h = derivative_step(t);
    let r = |s: f64| reliability_series(sys, d, s);
    if t > 0.0 {
        Ok(-(r(t + h)? - r(t - h)?) / (2.0 * h))
    } else {
        Ok(-(-3.0 * r(0.0)? + 4.0 * r(h)? - r(2.0 * h)?) / (2.0 * h))
    }
}

/// Failure-rate of the crossing time, `(-dR/dt) / R`.
pub fn hazard_of_t(p: &ProcessParams, d: &ThresholdDist, t: f64) -> Result<f64> {
    p.validate()?;
    d.validate()?;
    if !(t > 0.0) {
        return domain(format!("hazard of T needs t > 0, got {t}"));
    }
    let lam = p.total_rate();
    match d {
        ThresholdDist::Geometric { p: q } => return Ok(p.psi(lam * q)),
        ThresholdDist::DiscreteExponential => return Ok(p.psi(lam * (1.0 - (-1f64).exp()))),
        _ => {}
    }
    let sys = p.as_subordinated();
    let r = reliability_series(&sys, d, t)?;
    if r < 1e-290 {
        return domain(format!("survival {r:e} is below the underflow floor at t={t}"));
    }
    Ok(failure_density_total_numeric(&sys, d, t)? / r)
}

/// `exp(-t psi(Lambda p))`: crossing survival for a geometric threshold.
pub fn reliability_general_geometric(s: &SubordinatorSpec, lambda1: f64, lambda2: f64, p: f64, t: f64) -> Result<f64> {
    s.validate()?;
    if !(p > 0.0 && p <= 1.0) {
        return domain(format!("geometric parameter must lie in (0, 1], got {p}"));
    }
    if !(t >= 0.0) {
        return domain(format!("time must be >= 0, got {t}"));
    }
    Ok((-t * s.laplace_exponent((lambda1 + lambda2) * p)?).exp())
}

/// `int exp(-t psi(Lambda p)) dG(p)` by quadrature.
pub fn reliability_mixture(s: &SubordinatorSpec, lambda1: f64, lambda2: f64, law: &MixingLaw, t: f64) -> Result<f64> {
    s.validate()?;
    law.validate()?;
    let lam = lambda1 + lambda2;
    law.expect(|p| (-t * s.psi(lam * p)).exp())
}

fn closed_form_params(p: &ProcessParams) -> Result<()> {
    p.validate()?;
    if !(p.alpha < 1.0 && p.theta > 0.0) {
        return Err(Error::Unsupported(format!(
            "closed form needs alpha < 1 and theta > 0 (alpha={}, theta={}); use the quadrature route",
            p.alpha, p.theta
        )));
    }
    Ok(())
}

/// `Gamma(a, z1) - Gamma(a, z2)` for `0 < z1 < z2`, through whichever of the
/// upper or lower incomplete gamma keeps the subtraction well conditioned.
fn incomplete_gamma_gap(a: f64, z1: f64, z2: f64) -> Result<f64> {
    use statrs::function::gamma::{gamma_li, gamma_ui};
    if z1 < a {
        Ok(gamma_li(a, z2) - gamma_li(a, z1))
    } else {
        Ok(gamma_ui(a, z1) - gamma_ui(a, z2))
    }
}

/// Uniform mixing law:
/// `e^(t theta^alpha) / (alpha Lambda) [theta E_l(t theta^alpha) - (Lambda + theta) E_l(t (Lambda + theta)^alpha)]`,
/// `l = (alpha - 1) / alpha`.
pub fn reliability_uniform_closed(p: &ProcessParams, t: f64) -> Result<f64> {
    closed_form_params(p)?;
    if !(t >= 0.0) {
        return domain(format!("time must be >= 0, got {t}"));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let (alpha, theta, lam) = (p.alpha, p.theta, p.total_rate());
    let z1 = t * theta.powf(alpha);
    let z2 = t * (lam + theta).powf(alpha);
    // with E_l(z) = z^(l-1) Gamma(1-l, z) both brackets share t^(-1/alpha)
    let a = 1.0 / alpha;
    let gap = incomplete_gamma_gap(a, z1, z2)?;
    Ok(z1.exp() / (alpha * lam) * t.powf(-a) * gap)
}

/// Uniform closed form evaluated term by term with [`gen_exp_integral`].
///
/// [`gen_exp_integral`]: crate::special_fn::gen_exp_integral
pub fn reliability_uniform_closed_direct(p: &ProcessParams, t: f64) -> Result<f64> {
    use crate::special_fn::gen_exp_integral_scaled;
    closed_form_params(p)?;
    if !(t > 0.0) {
        return domain(format!("the direct form needs t > 0, got {t}"));
    }
    let (alpha, theta, lam) = (p.alpha, p.theta, p.total_rate());
    let l = (alpha - 1.0) / alpha;
    let z1 = t * theta.powf(alpha);
    let z2 = t * (lam + theta).powf(alpha);
    let e1 = gen_exp_integral_scaled(l, z1)?;
    let e2 = gen_exp_integral_scaled(l, z2)? * (z1 - z2).exp();
    Ok((theta * e1 - (lam + theta) * e2) / (alpha * lam))
}

/// Truncated Lomax mixing law with `a = Lambda / theta`, `b = alpha - 1`.
pub fn reliability_lomax_closed(p: &ProcessParams, t: f64) -> Result<f64> {
    closed_form_params(p)?;
    if !(t >= 0.0) {
        return domain(format!("time must be >= 0, got {t}"));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let (alpha, theta, lam) = (p.alpha, p.theta, p.total_rate());
    let y = 1.0 + lam / theta;
    let z1 = t * theta.powf(alpha);
    let z2 = z1 * y.powf(alpha);
    // l = 2 - 1/alpha, so 1 - l = 1/alpha - 1
    let a = 1.0 / alpha - 1.0;
    let gap = incomplete_gamma_gap(a, z1, z2)?;
    Ok(z1.exp() * (alpha - 1.0) / (alpha * (1.0 - y.powf(1.0 - alpha))) * z1.powf(-a) * gap)
}

/// Lomax closed form evaluated term by term with the exponential integral.
pub fn reliability_lomax_closed_direct(p: &ProcessParams, t: f64) -> Result<f64> {
    use crate::special_fn::gen_exp_integral_scaled;
    closed_form_params(p)?;
    if !(t > 0.0) {
        return domain(format!("the direct form needs t > 0, got {t}"));
    }
    let (alpha, theta, lam) = (p.alpha, p.theta, p.total_rate());
    let l = 2.0 - 1.0 / alpha;
    let y = 1.0 + lam / theta;
    let z1 = t * theta.powf(alpha);
    let z2 = z1 * y.powf(alpha);
    let e1 = gen_exp_integral_scaled(l, z1)?;
    let e2 = gen_exp_integral_scaled(l, z2)? * (z1 - z2).exp();
    Ok((alpha - 1.0) / (alpha * (1.0 - y.powf(1.0 - alpha))) * (e1 - y.powf(1.0 - alpha) * e2))
}

/// Truncated Weibull mixing law with `a = 1/Lambda`, `b = alpha`,
/// `c = -theta/Lambda`: `[1 - e^(-(t+1) psi)] / [(t+1)(1 - e^(-psi))]`.
pub fn reliability_weibull_closed(p: &ProcessParams, t: f64) -> Result<f64> {
    p.validate()?;
    if !(t >= 0.0) {
        return domain(format!("time must be >= 0, got {t}"));
    }
    let psi = p.psi(p.total_rate());
    Ok(-(-(t + 1.0) * psi).exp_m1() / ((t + 1.0) * -(-psi).exp_m1()))
}

/// Yule-Simon threshold: `e^(-t psi(Lambda)) + int_0^1 (1-z)^rho d/dz G(z) dz`
/// with `G(z) = exp(-t psi(Lambda (1-z)))`.
pub fn reliability_yule_simon(p: &ProcessParams, rho: f64, t: f64) -> Result<f64> {
    p.validate()?;
    if !(rho > 0.0) {
        return domain(format!("Yule-Simon parameter must be positive, got {rho}"));
    }
    if !(t > 0.0) {
        return domain(format!("the integral form needs t > 0 (use the series route at t = 0), got {t}"));
    }
    let (alpha, theta, lam) = (p.alpha, p.theta, p.total_rate());
    let g_prime = |z: f64| {
        let u = lam * (1.0 - z);
        t * lam * alpha * (u + theta).powf(alpha - 1.0) * (-t * p.psi(u)).exp()
    };
    let r = quad::integrate(|z| (1.0 - z).powf(rho) * g_prime(z), 0.0, 1.0, QUAD_TOL)?;
    Ok((-t * p.psi(lam)).exp() + r.value)
}

/// Lazily grown jump masses `mu_j` and tails `sum_(i>j) mu_i`.
struct JumpTable<'a> {
    sys: &'a SubordinatedPoisson,
    psi: f64,
    mu: Vec<f64>,
    tail: Vec<f64>,
}

impl<'a> JumpTable<'a> {
    fn new(sys: &'a SubordinatedPoisson) -> Self {
        Self { sys, psi: sys.jump_rate(), mu: Vec::new(), tail: Vec::new() }
    }

    fn grow(&mut self, j: usize) {
        if self.mu.len() < j {
            self.mu = self.sys.jump_masses((2 * j).max(64));
            let mut acc = CompensatedSum::new();
            self.tail = self
                .mu
                .iter()
                .map(|m| {
                    acc.add(*m);
                    (self.psi - acc.value()).max(0.0)
                })
                .collect();
        }
    }

    /// `mu_j`, `j >= 1`.
    fn mass(&mut self, j: usize) -> f64 {
        self.grow(j);
        self.mu[j - 1]
    }

    /// `sum_(i > j) mu_i`, `j >= 0`.
    fn tail(&mut self, j: usize) -> f64 {
        if j == 0 {
            return self.psi;
        }
        self.grow(j);
        self.tail[j - 1]
    }
}

/// Exact total failure density at `t`.
///
/// Crossing: `-dR/dt = sum_m P(Z=m) sum_(l>m) P(L=l) M(l-m-1)` with `M(i)` the
/// mass of jumps larger than `i`. Hitting: `sum_m P(Z=m) sum_(l>m) P(L=l) mu_(l-m)`.
/// The unit-jump terms of either sum are `g1 + g2`.
pub fn total_failure_density(
    sys: &SubordinatedPoisson,
    d: &ThresholdDist,
    t: f64,
    semantics: FailureSemantics,
) -> Result<f64> {
    d.validate()?;
    let mut table = CountPmfTable::new(sys, t)?;
    let mut ts = ThresholdSeries::new(d);
    let mut jumps = JumpTable::new(sys);
    let psi = jumps.psi;
    let last = d.max_support().map(|m| m as usize);
    let mut sum = CompensatedSum::new();
    let mut cum = CompensatedSum::new();
    let mut bound = psi;
    for m in 0..TAIL_CAP {
        if last.is_some_and(|l| m >= l) {
            return Ok(sum.value());
        }
        let pm = table.get(m);
        let mut inner = CompensatedSum::new();
        for l in m + 1..m + 1 + TAIL_CAP {
            let i = l - m - 1;
            inner.add(
                ts.pmf(l)
                    * match semantics {
                        FailureSemantics::Crossing => jumps.tail(i),
                        FailureSemantics::Hitting => jumps.mass(i + 1),
                    },
            );
            // later terms carry at most M(i) of jump mass and P(L > l) of threshold mass
            if last == Some(l) || jumps.tail(i) * ts.survival(l) < 1e-3 * SERIES_TOL {
                break;
            }
        }
        sum.add(pm * inner.value());
        cum.add(pm);
        bound = psi * ts.survival(m + 1) * (1.0 - cum.value()).max(0.0);
        if bound < SERIES_TOL {
            return Ok(sum.value());
        }
    }
    Err(truncation_error("threshold series of the total failure density", sum.value(), bound))
}

/// Probability that `Z` ever equals `L` (the hitting time is finite).
pub fn hit_probability(sys: &SubordinatedPoisson, d: &ThresholdDist) -> Result<f64> {
    d.validate()?;
    let rate = sys.jump_rate();
    let mut ts = ThresholdSeries::new(d);
    let mut jumps = JumpTable::new(sys);
    let mut u = vec![1.0];
    let mut sum = CompensatedSum::new();
    let last = d.max_support().map(|m| m as usize);
    let mut bound = 1.0;
    for k in 1..TAIL_CAP {
        let uk: f64 = (1..=k).map(|j| jumps.mass(j) / rate * u[k - j]).sum();
        u.push(uk);
        sum.add(ts.pmf(k) * uk);
        if last == Some(k) {
            return Ok(sum.value());
        }
        bound = ts.survival(k);
        if bound < SERIES_TOL {
            return Ok(sum.value());
        }
    }
    Err(truncation_error("threshold series of the hit probability", sum.value(), bound))
}

/// Reliability, densities and cause probabilities on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureLaw {
    pub semantics: FailureSemantics,
    pub times: Vec<f64>,
    /// Crossing: `P(Z(t) < L)`. Hitting: `P(no exact hit of L by t)`, which
    /// tends to `1 - hit_probability` rather than 0 when jumps overshoot.
    pub reliability: Vec<f64>,
    /// Total failure density under the chosen semantics.
    pub density: Vec<f64>,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    /// Probabilities that a single shock of type 1 or 2 lands on `L`.
    pub cause_probabilities: [f64; 2],
    pub hit_probability: f64,
}

impl FailureLaw {
    pub fn compute(
        sys: &SubordinatedPoisson,
        d: &ThresholdDist,
        times: &[f64],
        semantics: FailureSemantics,
    ) -> Result<Self> {
        if times.iter().any(|t| !(*t >= 0.0)) {
            return domain("failure-law times must be >= 0");
        }
        let g1: Vec<f64> = times.iter().map(|&t| failure_density_for(sys, d, 1, t)).collect::<Result<_>>()?;
        let g2: Vec<f64> = times.iter().map(|&t| failure_density_for(sys, d, 2, t)).collect::<Result<_>>()?;
        let density: Vec<f64> =
            times.iter().map(|&t| total_failure_density(sys, d, t, semantics)).collect::<Result<_>>()?;
        let reliability = match semantics {
            FailureSemantics::Crossing => {
                times.iter().map(|&t| reliability_series(sys, d, t)).collect::<Result<_>>()?
            }
            FailureSemantics::Hitting => {
                times.iter().map(|&t| hitting_reliability(sys, d, t)).collect::<Result<_>>()?
            }
        };
        let cause_probabilities = [failure_cause_prob_for(sys, d, 1)?, failure_cause_prob_for(sys, d, 2)?];
        let hit_probability = hit_probability(sys, d)?;
        Ok(Self { semantics, times: times.to_vec(), reliability, density, g1, g2, cause_probabilities, hit_probability })
    }
}

/// `int_0^t f(s) ds` for a fallible integrand, surfacing the first error.
pub(crate) fn integrate_fallible<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let mut err = None;
    let r = quad::integrate(
        |s| match f(s) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        },
        a,
        b,
        tol,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(r.value),
    }
}

/// `P(T > t)` for the hitting time.
pub fn hitting_reliability(sys: &SubordinatedPoisson, d: &ThresholdDist, t: f64) -> Result<f64> {
    let f = integrate_fallible(|s| total_failure_density(sys, d, s, FailureSemantics::Hitting), 0.0, t, 1e-12)?;
    Ok((1.0 - f).clamp(0.0, 1.0))
}

/// `int_0^t g_n(s) ds`: probability of a type-`n` failure by `t`.
pub fn failure_cause_prob_by(sys: &SubordinatedPoisson, d: &ThresholdDist, n: usize, t: f64) -> Result<f64> {
    integrate_fallible(|s| failure_density_for(sys, d, n, s), 0.0, t, 1e-12)
}
