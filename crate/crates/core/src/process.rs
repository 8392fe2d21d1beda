//! The bivariate counting process `(N1(S(t)), N2(S(t)))`.
//!
//! The total count `Z = N1 + N2` is compound Poisson with jump rate
//! `psi(Lambda)` and jump masses `mu_j` (see
//! [`SubordinatorSpec::count_jump_masses`]); given `Z = h` the split is
//! binomial with success probability `lambda1 / Lambda`. Three routes to the
//! joint pmf are provided:
//!
//! - [`btsfpp_pmf`]: the compound-Poisson recursion
//!   `p_n = (t/n) sum_j j mu_j p_(n-j)`. All terms are positive, so this is the
//!   production route for large `h` and for every subordinator.
//! - [`btsfpp_pmf_wright`]: a double series over the Fox-Wright function.
//!   The outer series alternates and only converges for `theta < Lambda`
//!   when `alpha < 1`.
//! - [`btsfpp_pmf_derivative`]: the finite triple sum for the `h`-th
//!   derivative of `exp(-t psi(u))`, capped at order 40 by default.

use crate::error::{domain, Error, Result};
use crate::special_fn::{binomial, ln_factorial, real_binomial, CompensatedSum, SMALL_TERM_RUN};
use crate::subordinator::{PathGrid, SubordinatorSpec};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

/// Default cap on the derivative order accepted by the finite-sum routes.
pub const DEFAULT_DERIVATIVE_CAP: usize = 40;

/// Hard cap on the total count considered by truncation rules.
pub const TAIL_CAP: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessParams {
    pub alpha: f64,
    pub theta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl ProcessParams {
    pub fn new(alpha: f64, theta: f64, lambda1: f64, lambda2: f64) -> Result<Self> {
        let p = Self { alpha, theta, lambda1, lambda2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        SubordinatorSpec::TemperedStable { alpha: self.alpha, theta: self.theta }.validate()?;
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0 && self.lambda1.is_finite() && self.lambda2.is_finite()) {
            return domain(format!("rates must be finite and >= 0, got {}, {}", self.lambda1, self.lambda2));
        }
        if self.total_rate() <= 0.0 {
            return domain("at least one rate must be positive");
        }
        Ok(())
    }

    /// `Lambda = lambda1 + lambda2`.
    pub fn total_rate(&self) -> f64 {
        self.lambda1 + self.lambda2
    }

    /// Rate of stream `n` (1 or 2).
    pub fn rate(&self, n: usize) -> Result<f64> {
        match n {
            1 => Ok(self.lambda1),
            2 => Ok(self.lambda2),
            _ => domain(format!("shock type must be 1 or 2, got {n}")),
        }
    }

    pub fn subordinator(&self) -> SubordinatorSpec {
        SubordinatorSpec::TemperedStable { alpha: self.alpha, theta: self.theta }
    }

    pub fn as_subordinated(&self) -> SubordinatedPoisson {
        SubordinatedPoisson { subordinator: self.subordinator(), lambda1: self.lambda1, lambda2: self.lambda2 }
    }

    /// Tempered stable Laplace exponent `(u + theta)^alpha - theta^alpha`.
    pub fn psi(&self, u: f64) -> f64 {
        self.subordinator().psi(u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct BivariateCount {
    pub k1: u64,
    pub k2: u64,
}

impl BivariateCount {
    pub fn new(k1: u64, k2: u64) -> Self {
        Self { k1, k2 }
    }

    pub fn total(&self) -> u64 {
        self.k1 + self.k2
    }

    /// All counts with `k1 + k2 = h`, ordered by `k1`.
    pub fn diagonal(h: u64) -> impl Iterator<Item = BivariateCount> {
        (0..=h).map(move |k1| BivariateCount::new(k1, h - k1))
    }

    /// All counts with `k1 + k2 <= h_max`.
    pub fn lattice(h_max: u64) -> impl Iterator<Item = BivariateCount> {
        (0..=h_max).flat_map(BivariateCount::diagonal)
    }
}

/// `P(N1(s) = k1, N2(s) = k2)` for independent Poisson streams at time `s`.
pub fn bivariate_poisson_pmf(lambda1: f64, lambda2: f64, k: BivariateCount, s: f64) -> Result<f64> {
    if !(s >= 0.0) || lambda1 < 0.0 || lambda2 < 0.0 {
        return domain("bivariate Poisson pmf needs s >= 0 and nonnegative rates");
    }
    let one = |lam: f64, k: u64| -> f64 {
        let m = lam * s;
        if k == 0 {
            (-m).exp()
        } else if m == 0.0 {
            0.0
        } else {
            (k as f64 * m.ln() - m - ln_factorial(k)).exp()
        }
    };
    Ok(one(lambda1, k.k1) * one(lambda2, k.k2))
}

/// `C(h, k1) (lambda1/Lambda)^k1 (lambda2/Lambda)^k2`.
fn split_probability(lambda1: f64, lambda2: f64, k: BivariateCount) -> f64 {
    let lam = lambda1 + lambda2;
    let part = |l: f64, k: u64| -> f64 {
        if k == 0 {
            0.0
        } else if l == 0.0 {
            f64::NEG_INFINITY
        } else {
            k as f64 * (l / lam).ln()
        }
    };
    let h = k.total();
    let lc = ln_factorial(h) - ln_factorial(k.k1) - ln_factorial(k.k2);
    (lc + part(lambda1, k.k1) + part(lambda2, k.k2)).exp()
}

/// A Poisson pair run on the clock of an arbitrary subordinator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubordinatedPoisson {
    pub subordinator: SubordinatorSpec,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl SubordinatedPoisson {
    pub fn new(subordinator: SubordinatorSpec, lambda1: f64, lambda2: f64) -> Result<Self> {
        subordinator.validate()?;
        if !(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda1 + lambda2 > 0.0) {
            return domain("rates must be >= 0 with a positive sum");
        }
        Ok(Self { subordinator, lambda1, lambda2 })
    }

    pub fn total_rate(&self) -> f64 {
        self.lambda1 + self.lambda2
    }

    /// Rate of shock arrivals (jumps of the total count): `psi(Lambda)`.
    pub fn jump_rate(&self) -> f64 {
        self.subordinator.psi(self.total_rate())
    }

    /// Masses `mu_1..=mu_n` of total-count jumps of each size.
    pub fn jump_masses(&self, n: usize) -> Vec<f64> {
        self.subordinator.count_jump_masses(self.total_rate(), n)
    }

    /// `P(Z(t) = h)` for `h = 0..=max_h`.
    pub fn total_count_pmf(&self, t: f64, max_h: usize) -> Result<Vec<f64>> {
        let mut table = CountPmfTable::new(self, t)?;
        table.extend_to(max_h);
        Ok(table.values()[..=max_h].to_vec())
    }

    pub fn pmf(&self, k: BivariateCount, t: f64) -> Result<f64> {
        let h = k.total() as usize;
        let total = self.total_count_pmf(t, h)?;
        Ok(split_probability(self.lambda1, self.lambda2, k) * total[h])
    }

    /// `E u1^N1 u2^N2 = exp(-t psi(lambda1 (1-u1) + lambda2 (1-u2)))`.
    pub fn pgf(&self, u1: f64, u2: f64, t: f64) -> Result<f64> {
        check_pgf_args(u1, u2, t)?;
        Ok((-t * self.subordinator.psi(self.lambda1 * (1.0 - u1) + self.lambda2 * (1.0 - u2))).exp())
    }

    pub fn simulate_counts<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Result<BivariateCount> {
        if !(t >= 0.0) {
            return domain(format!("time must be >= 0, got {t}"));
        }
        let s = self.subordinator.sample_increment(t, rng)?;
        Ok(BivariateCount::new(poisson(self.lambda1 * s, rng), poisson(self.lambda2 * s, rng)))
    }

    /// Grid-sampled path: subordinator values at the grid times, then
    /// conditionally independent Poisson increments on each subinterval.
    pub fn simulate_path<R: Rng + ?Sized>(&self, grid: &PathGrid, rng: &mut R) -> Result<GridPath> {
        let sub = self.subordinator.sample_path(grid, rng)?;
        let mut counts = Vec::with_capacity(sub.len());
        let mut prev = 0.0;
        let mut c = BivariateCount::default();
        for &s in &sub {
            let ds = s - prev;
            c.k1 = c.k1.saturating_add(poisson(self.lambda1 * ds, rng));
            c.k2 = c.k2.saturating_add(poisson(self.lambda2 * ds, rng));
            counts.push(c);
            prev = s;
        }
        Ok(GridPath { times: grid.times().to_vec(), subordinator: sub, counts })
    }

    /// Exact event-driven path on `[0, horizon]`: exponential inter-arrival
    /// times with rate `psi(Lambda)`, total jump sizes from the jump masses,
    /// binomial split between the two streams.
    pub fn simulate_events<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Result<CountPath> {
        let sampler = JumpSampler::new(self)?;
        let mut events = Vec::new();
        let mut t = 0.0;
        loop {
            t += sampler.next_gap(rng);
            if t > horizon {
                break;
            }
            let (j1, j2) = sampler.sample(rng);
            events.push(CountEvent { time: t, j1, j2 });
        }
        Ok(CountPath { horizon, events })
    }
}

fn check_pgf_args(u1: f64, u2: f64, t: f64) -> Result<()> {
    if !((0.0..=1.0).contains(&u1) && (0.0..=1.0).contains(&u2)) {
        return domain(format!("pgf arguments must lie in [0, 1], got ({u1}, {u2})"));
    }
    if !(t >= 0.0) {
        return domain(format!("time must be >= 0, got {t}"));
    }
    Ok(())
}

pub(crate) fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    if mean > 1e15 {
        // relative spread below 1e-7; the draw is its mean to working precision
        return mean.min(u64::MAX as f64 / 4.0) as u64;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

/// `P(Z(t) = n)` grown on demand by the compound-Poisson recursion.
#[derive(Debug, Clone)]
pub struct CountPmfTable {
    sys: SubordinatedPoisson,
    t: f64,
    weights: Vec<f64>,
    p: Vec<f64>,
}

impl CountPmfTable {
    pub fn new(sys: &SubordinatedPoisson, t: f64) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return domain(format!("time must be finite and >= 0, got {t}"));
        }
        Ok(Self { sys: *sys, t, weights: Vec::new(), p: vec![(-t * sys.jump_rate()).exp()] })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn get(&mut self, n: usize) -> f64 {
        self.extend_to(n);
        self.p[n]
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    pub fn extend_to(&mut self, n: usize) {
        if n < self.p.len() {
            return;
        }
        if self.weights.len() < n {
            let m = n.max(2 * self.weights.len()).max(64);
            self.weights = self.sys.jump_masses(m).iter().enumerate().map(|(j, mu)| (j + 1) as f64 * mu).collect();
        }
        for m in self.p.len()..=n {
            let mut s = 0.0;
            for j in 1..=m {
                s += self.weights[j - 1] * self.p[m - j];
            }
            self.p.push(self.t * s / m as f64);
        }
    }
}

/// Total-count pmf for the tempered stable process.
pub fn total_count_pmf(p: &ProcessParams, t: f64, max_h: usize) -> Result<Vec<f64>> {
    p.validate()?;
    p.as_subordinated().total_count_pmf(t, max_h)
}

/// Joint pmf by the compound-Poisson recursion.
pub fn btsfpp_pmf(p: &ProcessParams, k: BivariateCount, t: f64) -> Result<f64> {
    p.validate()?;
    p.as_subordinated().pmf(k, t)
}

/// Truncation point of the adaptive tail rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailTruncation {
    pub k_max: usize,
    /// `P(Z <= k_max)`.
    pub mass: f64,
}

/// Smallest `K` with `P(Z <= K) >= 1 - eps` and `P(Z = K) < eps / 10`.
pub fn tail_rule(p: &ProcessParams, t: f64, eps: f64) -> Result<TailTruncation> {
    p.validate()?;
    tail_rule_for(&p.as_subordinated(), t, eps, TAIL_CAP)
}

pub fn tail_rule_for(sys: &SubordinatedPoisson, t: f64, eps: f64, cap: usize) -> Result<TailTruncation> {
    if !(eps > 0.0 && eps < 1.0) {
        return domain(format!("tail tolerance must lie in (0, 1), got {eps}"));
    }
    let mut table = CountPmfTable::new(sys, t)?;
    let mut acc = CompensatedSum::new();
    for k in 0..=cap {
        let pk = table.get(k);
        acc.add(pk);
        if acc.value() >= 1.0 - eps && pk < eps / 10.0 {
            return Ok(TailTruncation { k_max: k, mass: acc.value() });
        }
    }
    Err(Error::NotConverged {
        what: format!("tail rule at eps {eps:e}"),
        partial: acc.value(),
        abs_error: 1.0 - acc.value(),
        terms: cap,
    })
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return domain(format!("time must be finite and >= 0, got {t}"));
    }
    Ok(())
}

/// Cap on the outer index of the Wright route.
const WRIGHT_OUTER_MAX: usize = 5_000;
/// Cap on the inner index of one row.
const WRIGHT_INNER_MAX: usize = 20_000;
/// Inner terms below this fraction of the row's largest term are dropped.
const WRIGHT_ROW_TOL: f64 = 1e-30;

/// Joint pmf by the double Fox-Wright series.
pub fn btsfpp_pmf_wright(p: &ProcessParams, k: BivariateCount, t: f64) -> Result<f64> {
    p.validate()?;
    check_time(t)?;
    let h = k.total();
    if t == 0.0 {
        return Ok(if h == 0 { 1.0 } else { 0.0 });
    }
    let lam = p.total_rate();
    let lp = |l: f64, k: u64| if k == 0 { 0.0 } else { k as f64 * l.ln() };
    if (k.k1 > 0 && p.lambda1 == 0.0) || (k.k2 > 0 && p.lambda2 == 0.0) {
        return Ok(0.0);
    }
    let log_pref = -(h as f64) * lam.ln() + lp(p.lambda1, k.k1) + lp(p.lambda2, k.k2)
        - ln_factorial(k.k1)
        - ln_factorial(k.k2);
    let sign = if h % 2 == 1 { -1.0 } else { 1.0 };
    Ok(sign * wright_outer_series(p, h, t, log_pref)?)
}

/// `e^(t theta^alpha) sum_i theta^i / (i! Lambda^i) 1psi1[-Lambda^alpha t; (1, alpha); (1-h-i, alpha)]`
/// scaled by `exp(log_pref)`.
///
/// The double series cancels heavily in both indices (condition numbers of
/// 1e7 are routine), so it is summed in double-double arithmetic. With
/// `n = h + i` the gamma ratio of the inner term is the falling factorial
/// `(alpha r)_n`, and the rows
/// `B(i, r) = q^i C(n, i) z^r / r! C(alpha r, n)`, `q = theta / Lambda`,
/// satisfy `B(i+1, r) = B(i, r) q (alpha r - n) / (i + 1)`. The sum is
/// `h! sum B`, with no log-gamma and no overflow.
pub(crate) fn wright_outer_series(p: &ProcessParams, h: u64, t: f64, log_pref: f64) -> Result<f64> {
    let lam = p.total_rate();
    let (alpha, theta) = (p.alpha, p.theta);
    if alpha < 1.0 && theta >= lam {
        return domain(format!(
            "the Wright route diverges for theta >= Lambda when alpha < 1 (theta={theta}, Lambda={lam})"
        ));
    }
    let z = -lam.powf(alpha) * t;
    let q = theta / lam;
    let scale = (log_pref + t * theta.powf(alpha) + ln_factorial(h)).exp();
    let mut row = WrightRow::new(z, alpha, h);
    let mut sum = TwoFloat::from(0.0);
    let mut small = 0;
    let mut prev = f64::INFINITY;
    for i in 0..WRIGHT_OUTER_MAX {
        if i > 0 {
            if theta == 0.0 {
                break;
            }
            row.advance(q, i);
        }
        row.extend(i, q)?;
        let term = row.sum();
        sum += term;
        let mag = term.hi().abs();
        let total = sum.hi().abs();
        if !total.is_finite() {
            return Err(Error::NotConverged {
                what: "outer theta-series of the Wright route".into(),
                partial: f64::NAN,
                abs_error: f64::INFINITY,
                terms: i,
            });
        }
        if mag <= prev && mag <= 1e-20 * total + 1e-300 {
            small += 1;
        } else {
            small = 0;
        }
        prev = mag;
        if small >= SMALL_TERM_RUN {
            return Ok(f64::from(sum) * scale);
        }
    }
    if theta == 0.0 {
        return Ok(f64::from(sum) * scale);
    }
    Err(Error::NotConverged {
        what: "outer theta-series of the Wright route".into(),
        partial: f64::from(sum) * scale,
        abs_error: prev * scale,
        terms: WRIGHT_OUTER_MAX,
    })
}

/// One row `B(i, .)` of the Wright double series.
struct WrightRow {
    z: f64,
    alpha: f64,
    h: u64,
    terms: Vec<TwoFloat>,
}

impl WrightRow {
    fn new(z: f64, alpha: f64, h: u64) -> Self {
        WrightRow { z, alpha, h, terms: Vec::new() }
    }

    /// `alpha r - m`, exact up to the final rounding of the double-double.
    fn shifted(&self, r: usize, m: u64) -> TwoFloat {
        TwoFloat::new_mul(self.alpha, r as f64) - m as f64
    }

    /// Moves from row `i - 1` to row `i`.
    fn advance(&mut self, q: f64, i: usize) {
        let n = self.h + i as u64 - 1;
        for r in 0..self.terms.len() {
            let f = self.shifted(r, n) * q / i as f64;
            self.terms[r] *= f;
        }
    }

    /// `B(i, r)` from scratch.
    fn direct(&self, i: usize, q: f64, r: usize) -> TwoFloat {
        let n = self.h + i as u64;
        let mut acc = TwoFloat::from(1.0);
        for m in 0..(r.max(n as usize)) {
            if m < r {
                acc *= self.z;
                acc /= (m + 1) as f64;
            }
            if (m as u64) < n {
                acc *= self.shifted(r, m as u64);
                acc /= (m + 1) as f64;
            }
            if m < i {
                acc *= q * (self.h as usize + m + 1) as f64;
                acc /= (m + 1) as f64;
            }
        }
        acc
    }

    /// Appends terms until the tail is negligible. Past `alpha r > n + 1`
    /// the terms are unimodal in `r`, so a falling run of small terms ends it.
    fn extend(&mut self, i: usize, q: f64) -> Result<()> {
        let n = self.h as f64 + i as f64;
        let mut peak = self.terms.iter().map(|x| x.hi().abs()).fold(0.0, f64::max);
        let mut run = 0;
        let mut r = 0;
        loop {
            if r >= WRIGHT_INNER_MAX {
                return Err(Error::NotConverged {
                    what: "inner series of the Wright route".into(),
                    partial: f64::from(self.sum()),
                    abs_error: f64::NAN,
                    terms: WRIGHT_INNER_MAX,
                });
            }
            if r == self.terms.len() {
                let b = self.direct(i, q, r);
                peak = peak.max(b.hi().abs());
                self.terms.push(b);
            }
            let mag = self.terms[r].hi().abs();
            let before = if r > 0 { self.terms[r - 1].hi().abs() } else { f64::INFINITY };
            if self.alpha * r as f64 > n + 1.0 && mag <= before && mag <= WRIGHT_ROW_TOL * peak {
                run += 1;
            } else {
                run = 0;
            }
            r += 1;
            if run >= SMALL_TERM_RUN && r >= self.terms.len() {
                return Ok(());
            }
        }
    }

    fn sum(&self) -> TwoFloat {
        self.terms.iter().fold(TwoFloat::from(0.0), |acc, &x| acc + x)
    }
}

/// Univariate pmf of the tempered space-fractional Poisson process
/// `N(S(t))` with rate `lambda`, by the Wright series.
pub fn tsfpp_pmf(lambda: f64, alpha: f64, theta: f64, k: u64, t: f64) -> Result<f64> {
    let p = ProcessParams::new(alpha, theta, lambda, 0.0)?;
    btsfpp_pmf_wright(&p, BivariateCount::new(k, 0), t)
}

/// Which base the finite derivative sums use for `(u + theta)^(alpha i - h)`.
///
/// `Corrected` carries the factor `Lambda^h (Lambda + theta)^(-h)` that the
/// chain rule produces; `AsPrinted` drops it, which inflates the result by
/// `((Lambda + theta) / Lambda)^h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum HoppeNormalization {
    #[default]
    Corrected,
    AsPrinted,
}

/// `(-1)^h sum_{k<=h} w(k) sum_{j<=k} C(k,j) (-1)^j psi^(k-j) D_j`, with
/// `D_j = sum_{i<=j} C(j,i) C(alpha i, h) Y_i (-theta^alpha)^(j-i)`.
///
/// With `w(k) = t^k / k!` this is `P(Z(t) = h) / P(Z(t) = 0)`.
pub(crate) fn hoppe_sum(p: &ProcessParams, h: usize, w: &dyn Fn(usize) -> f64, norm: HoppeNormalization) -> f64 {
    let lam = p.total_rate();
    let base = lam + p.theta;
    let psi = p.psi(lam);
    let tha = -p.theta.powf(p.alpha);
    let factor = match norm {
        HoppeNormalization::Corrected => (lam / base).powi(h as i32),
        HoppeNormalization::AsPrinted => 1.0,
    };
    let y: Vec<f64> =
        (0..=h).map(|i| real_binomial(p.alpha * i as f64, h) * base.powf(p.alpha * i as f64) * factor).collect();
    let d: Vec<f64> = (0..=h)
        .map(|j| {
            (0..=j)
                .map(|i| binomial(j as u64, i as u64) * y[i] * tha.powi((j - i) as i32))
                .collect::<CompensatedSum>()
                .value()
        })
        .collect();
    let mut total = CompensatedSum::new();
    for k in 0..=h {
        let wk = w(k);
        if wk == 0.0 {
            continue;
        }
        let mut inner = CompensatedSum::new();
        for j in 0..=k {
            let sgn = if j % 2 == 1 { -1.0 } else { 1.0 };
            inner.add(binomial(k as u64, j as u64) * sgn * psi.powi((k - j) as i32) * d[j]);
        }
        total.add(wk * inner.value());
    }
    if h % 2 == 1 {
        -total.value()
    } else {
        total.value()
    }
}

pub(crate) fn check_cap(what: &str, h: usize, cap: usize) -> Result<()> {
    if h > cap {
        return Err(Error::CapExceeded { what: what.into(), needed: h, cap });
    }
    Ok(())
}

/// Joint pmf by the finite derivative sum, default cap.
pub fn btsfpp_pmf_derivative(p: &ProcessParams, k: BivariateCount, t: f64) -> Result<f64> {
    btsfpp_pmf_derivative_capped(p, k, t, DEFAULT_DERIVATIVE_CAP)
}

pub fn btsfpp_pmf_derivative_capped(p: &ProcessParams, k: BivariateCount, t: f64, cap: usize) -> Result<f64> {
    btsfpp_pmf_derivative_with(p, k, t, cap, HoppeNormalization::Corrected)
}

pub fn btsfpp_pmf_derivative_with(
    p: &ProcessParams,
    k: BivariateCount,
    t: f64,
    cap: usize,
    norm: HoppeNormalization,
) -> Result<f64> {
    p.validate()?;
    check_time(t)?;
    let h = k.total() as usize;
    check_cap("derivative order", h, cap)?;
    let weights = time_weights(t, h);
    let ratio = hoppe_sum(p, h, &|j| weights[j], norm);
    Ok(split_probability(p.lambda1, p.lambda2, k) * (-t * p.psi(p.total_rate())).exp() * ratio)
}

/// `t^k / k!` for `k = 0..=h`.
pub(crate) fn time_weights(t: f64, h: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(h + 1);
    let mut acc = 1.0;
    w.push(acc);
    for k in 1..=h {
        acc *= t / k as f64;
        w.push(acc);
    }
    w
}

pub fn btsfpp_pgf(p: &ProcessParams, u1: f64, u2: f64, t: f64) -> Result<f64> {
    p.validate()?;
    p.as_subordinated().pgf(u1, u2, t)
}

/// `|dG/dt + psi(lambda1 (1-u1) + lambda2 (1-u2)) G|` with `dG/dt` by central
/// differences.
pub fn pgf_ode_residual(p: &ProcessParams, u1: f64, u2: f64, t: f64, step: f64) -> Result<f64> {
    check_step(t, step)?;
    let g = |s: f64| btsfpp_pgf(p, u1, u2, s);
    let dg = (g(t + step)? - g(t - step)?) / (2.0 * step);
    let coef = p.psi(p.lambda1 * (1.0 - u1) + p.lambda2 * (1.0 - u2));
    Ok((dg + coef * g(t)?).abs())
}

fn check_step(t: f64, step: f64) -> Result<()> {
    if !(step > 0.0 && t > step) {
        return domain(format!("central differences need t > step > 0, got t={t}, step={step}"));
    }
    Ok(())
}

/// Sign of `theta` inside the fractional shift operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum OperatorForm {
    /// `-[(Lambda + theta - lambda1 B1 - lambda2 B2)^alpha - theta^alpha]`,
    /// the operator whose symbol is the pgf exponent.
    #[default]
    Corrected,
    /// The binomial expansion around `1 - theta / Lambda`.
    AsPrinted,
}

/// `|d/dt q(k, t) - A q(k, t)|` for the fractional shift operator `A`
/// expanded in powers of `lambda1 B1 + lambda2 B2` (truncated at `j = h`,
/// beyond which every shift leaves the lattice).
pub fn pmf_pde_residual(p: &ProcessParams, k: BivariateCount, t: f64, step: f64) -> Result<f64> {
    pmf_pde_residual_with(p, k, t, step, OperatorForm::Corrected)
}

pub fn pmf_pde_residual_with(
    p: &ProcessParams,
    k: BivariateCount,
    t: f64,
    step: f64,
    form: OperatorForm,
) -> Result<f64> {
    p.validate()?;
    check_step(t, step)?;
    let h = k.total() as usize;
    check_cap("operator expansion order", h, DEFAULT_DERIVATIVE_CAP)?;
    let sys = p.as_subordinated();
    let joint = |table: &[f64], c: BivariateCount| split_probability(p.lambda1, p.lambda2, c) * table[c.total() as usize];
    let now = sys.total_count_pmf(t, h)?;
    let up = sys.total_count_pmf(t + step, h)?;
    let down = sys.total_count_pmf(t - step, h)?;
    let dq = (joint(&up, k) - joint(&down, k)) / (2.0 * step);

    let lam = p.total_rate();
    let shifted = match form {
        OperatorForm::Corrected => 1.0 + p.theta / lam,
        OperatorForm::AsPrinted => 1.0 - p.theta / lam,
    };
    let mut series = CompensatedSum::new();
    for j in 0..=h {
        let coef = real_binomial(p.alpha, j) * shifted.powf(p.alpha - j as f64) * if j % 2 == 1 { -1.0 } else { 1.0 }
            / lam.powi(j as i32);
        if coef == 0.0 {
            continue;
        }
        // (lambda1 B1 + lambda2 B2)^j q(k)
        let mut shift = 0.0;
        for r1 in 0..=(j as u64).min(k.k1) {
            let r2 = j as u64 - r1;
            if r2 > k.k2 {
                continue;
            }
            let c = BivariateCount::new(k.k1 - r1, k.k2 - r2);
            shift += binomial(j as u64, r1) * p.lambda1.powi(r1 as i32) * p.lambda2.powi(r2 as i32) * joint(&now, c);
        }
        series.add(coef * shift);
    }
    let rhs = -lam.powf(p.alpha) * series.value() + p.theta.powf(p.alpha) * joint(&now, k);
    Ok((dq - rhs).abs())
}

/// Base of `(base)^(alpha - h)` in the Levy measure of the process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LevyBase {
    /// `theta + Lambda`, as the Laplace integral of the Levy density gives.
    #[default]
    ThetaPlusRate,
    /// `theta + k1 + k2`.
    ThetaPlusCount,
}

/// Levy measure of the bivariate process at the jump `k != (0, 0)`.
pub fn levy_measure_mass(p: &ProcessParams, k: BivariateCount) -> Result<f64> {
    levy_measure_mass_with(p, k, LevyBase::ThetaPlusRate)
}

pub fn levy_measure_mass_with(p: &ProcessParams, k: BivariateCount, base: LevyBase) -> Result<f64> {
    p.validate()?;
    let h = k.total();
    if h == 0 {
        return domain("the Levy measure puts no mass at the origin");
    }
    let alpha = p.alpha;
    if alpha == 1.0 {
        return Ok(match (k.k1, k.k2) {
            (1, 0) => p.lambda1,
            (0, 1) => p.lambda2,
            _ => 0.0,
        });
    }
    let b = match base {
        LevyBase::ThetaPlusRate => p.theta + p.total_rate(),
        LevyBase::ThetaPlusCount => p.theta + h as f64,
    };
    if h <= 20 {
        let fact = |n: u64| (1..=n).fold(1.0, |a, i| a * i as f64);
        let pre = p.lambda1.powi(k.k1 as i32) * p.lambda2.powi(k.k2 as i32) / (fact(k.k1) * fact(k.k2));
        Ok(pre * alpha * (libm::tgamma(h as f64 - alpha) / libm::tgamma(1.0 - alpha)) * b.powf(alpha - h as f64))
    } else {
        let lp = |l: f64, k: u64| if k == 0 { 0.0 } else { k as f64 * l.ln() };
        let log = lp(p.lambda1, k.k1) + lp(p.lambda2, k.k2) - ln_factorial(k.k1) - ln_factorial(k.k2)
            + alpha.ln()
            + libm::lgamma(h as f64 - alpha)
            - libm::lgamma(1.0 - alpha)
            + (alpha - h as f64) * b.ln();
        Ok(log.exp())
    }
}

/// `|E u^Z - sum_k u^k P(Z = k)|` with the pmf from the univariate Wright
/// series; the `k`-series stops by the ten-small-terms rule.
pub fn wright_exponential_identity_residual(p: &ProcessParams, u: f64, t: f64) -> Result<f64> {
    p.validate()?;
    if !(0.0..=1.0).contains(&u) {
        return domain(format!("u must lie in [0, 1], got {u}"));
    }
    if !(t > 0.0) {
        return domain(format!("time must be positive, got {t}"));
    }
    let lam = p.total_rate();
    let left = (-t * p.psi(lam * (1.0 - u))).exp();
    let mut right = CompensatedSum::new();
    let mut small = 0;
    let mut prev = f64::INFINITY;
    for k in 0..TAIL_CAP as u64 {
        let log_pref = -(k as f64) * lam.ln() + k as f64 * lam.ln() - ln_factorial(k)
            + if k == 0 { 0.0 } else { k as f64 * u.ln() };
        let term = if u == 0.0 && k > 0 {
            0.0
        } else {
            let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
            sign * wright_outer_series(p, k, t, log_pref)?
        };
        right.add(term);
        let mag = term.abs();
        if mag <= prev && mag <= 1e-15 * right.value().abs().max(1e-300) {
            small += 1;
        } else {
            small = 0;
        }
        prev = mag;
        if small >= SMALL_TERM_RUN {
            return Ok((left - right.value()).abs());
        }
    }
    Err(Error::NotConverged {
        what: "identity k-series".into(),
        partial: right.value(),
        abs_error: prev,
        terms: TAIL_CAP,
    })
}

/// A jump of the count process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountEvent {
    pub time: f64,
    pub j1: u64,
    pub j2: u64,
}

/// Exact jump path on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CountPath {
    pub horizon: f64,
    pub events: Vec<CountEvent>,
}

impl CountPath {
    pub fn counts_at(&self, t: f64) -> BivariateCount {
        self.events.iter().take_while(|e| e.time <= t).fold(BivariateCount::default(), |c, e| {
            BivariateCount::new(c.k1.saturating_add(e.j1), c.k2.saturating_add(e.j2))
        })
    }
}

/// Grid-sampled path.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    pub times: Vec<f64>,
    pub subordinator: Vec<f64>,
    pub counts: Vec<BivariateCount>,
}

/// Exact sampler for total-count jumps and their split.
#[derive(Debug, Clone)]
pub struct JumpSampler {
    rate: f64,
    cdf: Vec<f64>,
    tail: Tail,
    p1: f64,
}

#[derive(Debug, Clone, Copy)]
enum Tail {
    None,
    /// mass at `j > start` proportional to Sibuya(alpha) weights times `r^j`
    Sibuya { alpha: f64, r: f64, start: u64 },
    /// mass at `j > start` proportional to `r^j / j`
    Logarithmic { r: f64, start: u64 },
}

const JUMP_TABLE_MAX: usize = 4096;
const JUMP_COUNT_MAX: u64 = 1 << 60;

impl JumpSampler {
    pub fn new(sys: &SubordinatedPoisson) -> Result<Self> {
        let rate = sys.jump_rate();
        if !(rate > 0.0 && rate.is_finite()) {
            return domain("jump rate must be positive and finite");
        }
        let mu = sys.jump_masses(JUMP_TABLE_MAX);
        let mut cdf = Vec::new();
        let mut acc = 0.0;
        for m in &mu {
            acc += m / rate;
            cdf.push(acc.min(1.0));
            if acc >= 1.0 - 1e-15 {
                break;
            }
        }
        let start = cdf.len() as u64;
        let lam = sys.total_rate();
        let tail = if acc >= 1.0 - 1e-15 {
            Tail::None
        } else {
            match sys.subordinator.canonical() {
                SubordinatorSpec::TemperedStable { alpha, theta } => Tail::Sibuya { alpha, r: lam / (lam + theta), start },
                SubordinatorSpec::Stable { alpha } => Tail::Sibuya { alpha, r: 1.0, start },
                SubordinatorSpec::Gamma { rate: b, .. } => Tail::Logarithmic { r: lam / (lam + b), start },
                SubordinatorSpec::Deterministic { .. } => Tail::None,
            }
        };
        if matches!(tail, Tail::None) {
            if let Some(last) = cdf.last_mut() {
                *last = 1.0;
            }
        }
        Ok(Self { rate, cdf, tail, p1: sys.lambda1 / lam })
    }

    /// Rate of jumps of the total count.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn next_gap<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let e: f64 = Exp1.sample(rng);
        e / self.rate
    }

    /// Size of the next total-count jump.
    pub fn sample_total<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let last = *self.cdf.last().unwrap_or(&1.0);
        if u < last || matches!(self.tail, Tail::None) {
            return self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1) as u64 + 1;
        }
        match self.tail {
            Tail::Sibuya { alpha, r, start } => loop {
                let j = sibuya_beyond(alpha, start, rng);
                if r >= 1.0 || rng.random::<f64>() < r.powf((j - start - 1) as f64) {
                    return j;
                }
            },
            Tail::Logarithmic { r, start } => loop {
                let g = geometric_from_one(1.0 - r, rng);
                let j = start.saturating_add(g);
                if rng.random::<f64>() < (start + 1) as f64 / j as f64 {
                    return j;
                }
            },
            Tail::None => unreachable!(),
        }
    }

    /// Next jump split into the two streams.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (u64, u64) {
        let j = self.sample_total(rng);
        let j1 = if self.p1 >= 1.0 {
            j
        } else if self.p1 <= 0.0 {
            0
        } else {
            Binomial::new(j, self.p1).map(|b| b.sample(rng)).unwrap_or(0)
        };
        (j1, j - j1)
    }
}

fn geometric_from_one<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    if p >= 1.0 {
        return 1;
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    let g = (u.ln() / (-p).ln_1p()).floor() + 1.0;
    if g.is_finite() && g < JUMP_COUNT_MAX as f64 {
        g as u64
    } else {
        JUMP_COUNT_MAX
    }
}

/// `ln P(X > j)` for the Sibuya law with index `alpha`.
fn sibuya_log_survival(alpha: f64, j: u64) -> f64 {
    let j = j as f64;
    libm::lgamma(j + 1.0 - alpha) - libm::lgamma(1.0 - alpha) - libm::lgamma(j + 1.0)
}

/// Sibuya variable conditioned on exceeding `start`, by inversion.
fn sibuya_beyond<R: Rng + ?Sized>(alpha: f64, start: u64, rng: &mut R) -> u64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    let target = u.ln() + sibuya_log_survival(alpha, start);
    let mut lo = start;
    let mut hi = start + 1;
    while sibuya_log_survival(alpha, hi) > target {
        lo = hi;
        if hi >= JUMP_COUNT_MAX / 2 {
            return JUMP_COUNT_MAX;
        }
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if sibuya_log_survival(alpha, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

pub fn simulate_counts<R: Rng + ?Sized>(p: &ProcessParams, t: f64, rng: &mut R) -> Result<BivariateCount> {
    p.validate()?;
    p.as_subordinated().simulate_counts(t, rng)
}

pub fn simulate_path<R: Rng + ?Sized>(p: &ProcessParams, grid: &PathGrid, rng: &mut R) -> Result<GridPath> {
    p.validate()?;
    p.as_subordinated().simulate_path(grid, rng)
}
