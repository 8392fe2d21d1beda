//! Subordinators: nondecreasing Levy processes used as random clocks.
//!
//! Every variant exposes its Laplace exponent `psi` (so that
//! `E exp(-u S(t)) = exp(-t psi(u))`), its Levy density where one exists, and
//! an exact sampler for increments.

use crate::error::{domain, Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SubordinatorSpec {
    /// `psi(u) = (u + theta)^alpha - theta^alpha`, `alpha` in (0, 1].
    TemperedStable { alpha: f64, theta: f64 },
    /// `psi(u) = u^alpha`.
    Stable { alpha: f64 },
    /// `psi(u) = shape * ln(1 + u / rate)`.
    Gamma { shape: f64, rate: f64 },
    /// `psi(u) = drift * u`.
    Deterministic { drift: f64 },
}

impl SubordinatorSpec {
    pub fn tempered_stable(alpha: f64, theta: f64) -> Result<Self> {
        let s = SubordinatorSpec::TemperedStable { alpha, theta };
        s.validate()?;
        Ok(s)
    }

    pub fn stable(alpha: f64) -> Result<Self> {
        let s = SubordinatorSpec::Stable { alpha };
        s.validate()?;
        Ok(s)
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        let s = SubordinatorSpec::Gamma { shape, rate };
        s.validate()?;
        Ok(s)
    }

    pub fn deterministic(drift: f64) -> Result<Self> {
        let s = SubordinatorSpec::Deterministic { drift };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SubordinatorSpec::TemperedStable { alpha, theta } => {
                check_alpha(alpha)?;
                if !(theta >= 0.0 && theta.is_finite()) {
                    return domain(format!("tempering theta must be finite and >= 0, got {theta}"));
                }
            }
            SubordinatorSpec::Stable { alpha } => check_alpha(alpha)?,
            SubordinatorSpec::Gamma { shape, rate } => {
                if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
                    return domain(format!("gamma subordinator needs shape, rate > 0, got {shape}, {rate}"));
                }
            }
            SubordinatorSpec::Deterministic { drift } => {
                if !(drift > 0.0 && drift.is_finite()) {
                    return domain(format!("drift must be positive, got {drift}"));
                }
            }
        }
        Ok(())
    }

    /// Collapses degenerate parameterizations: `alpha = 1` is unit drift and
    /// `theta = 0` is the untempered stable law.
    pub fn canonical(&self) -> SubordinatorSpec {
        match *self {
            SubordinatorSpec::TemperedStable { alpha, .. } | SubordinatorSpec::Stable { alpha } if alpha == 1.0 => {
                SubordinatorSpec::Deterministic { drift: 1.0 }
            }
            SubordinatorSpec::TemperedStable { alpha, theta } if theta == 0.0 => SubordinatorSpec::Stable { alpha },
            other => other,
        }
    }

    pub fn laplace_exponent(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0) {
            return domain(format!("Laplace exponent needs u >= 0, got {u}"));
        }
        Ok(self.psi(u))
    }

    pub(crate) fn psi(&self, u: f64) -> f64 {
        match *self {
            SubordinatorSpec::TemperedStable { alpha, theta } => {
                if theta == 0.0 {
                    u.powf(alpha)
                } else {
                    theta.powf(alpha) * (alpha * (u / theta).ln_1p()).exp_m1()
                }
            }
            SubordinatorSpec::Stable { alpha } => u.powf(alpha),
            SubordinatorSpec::Gamma { shape, rate } => shape * (u / rate).ln_1p(),
            SubordinatorSpec::Deterministic { drift } => drift * u,
        }
    }

    /// Levy density `nu(s)` for `s > 0`. Pure-drift laws have none.
    pub fn levy_density(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return domain(format!("Levy density needs s > 0, got {s}"));
        }
        match self.canonical() {
            SubordinatorSpec::TemperedStable { alpha, theta } => Ok(stable_density(alpha, s) * (-theta * s).exp()),
            SubordinatorSpec::Stable { alpha } => Ok(stable_density(alpha, s)),
            SubordinatorSpec::Gamma { shape, rate } => Ok(shape * (-rate * s).exp() / s),
            SubordinatorSpec::Deterministic { .. } => {
                Err(Error::Unsupported("a pure-drift subordinator has no Levy density".into()))
            }
        }
    }

    /// Drift coefficient (zero for every law with a Levy density).
    pub fn drift(&self) -> f64 {
        match self.canonical() {
            SubordinatorSpec::Deterministic { drift } => drift,
            _ => 0.0,
        }
    }

    /// Jump-size masses `mu_1, ..., mu_n` of the compound Poisson process
    /// `N(S(t))`, where `N` is Poisson with rate `lambda`:
    /// `mu_j = int (lambda s)^j e^(-lambda s) / j! nu(ds)`, plus the drift term
    /// at `j = 1`. They sum to `psi(lambda)`.
    pub fn count_jump_masses(&self, lambda: f64, n: usize) -> Vec<f64> {
        let mut mu = vec![0.0; n];
        if n == 0 || lambda <= 0.0 {
            return mu;
        }
        match self.canonical() {
            SubordinatorSpec::TemperedStable { alpha, theta } => fill_tempered(&mut mu, alpha, theta, lambda),
            SubordinatorSpec::Stable { alpha } => fill_tempered(&mut mu, alpha, 0.0, lambda),
            SubordinatorSpec::Gamma { shape, rate } => {
                let r = lambda / (lambda + rate);
                let mut rj = 1.0;
                for (j, m) in mu.iter_mut().enumerate() {
                    rj *= r;
                    *m = shape * rj / (j + 1) as f64;
                }
            }
            SubordinatorSpec::Deterministic { drift } => mu[0] = drift * lambda,
        }
        mu
    }

    /// Draws `S(t + dt) - S(t)`.
    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Result<f64> {
        if !(dt >= 0.0 && dt.is_finite()) {
            return domain(format!("time step must be finite and >= 0, got {dt}"));
        }
        if dt == 0.0 {
            return Ok(0.0);
        }
        Ok(match self.canonical() {
            SubordinatorSpec::TemperedStable { alpha, theta } => tempered_stable(alpha, theta, dt, rng),
            SubordinatorSpec::Stable { alpha } => dt.powf(1.0 / alpha) * positive_stable(alpha, rng),
            SubordinatorSpec::Gamma { shape, rate } => Gamma::new(shape * dt, 1.0 / rate)
                .map_err(|e| Error::Domain(e.to_string()))?
                .sample(rng),
            SubordinatorSpec::Deterministic { drift } => drift * dt,
        })
    }

    /// Values of `S` at every grid time (with `S(0) = 0`).
    pub fn sample_path<R: Rng + ?Sized>(&self, grid: &PathGrid, rng: &mut R) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(grid.times().len());
        let mut prev_t = 0.0;
        let mut s = 0.0;
        for &t in grid.times() {
            s += self.sample_increment(t - prev_t, rng)?;
            out.push(s);
            prev_t = t;
        }
        Ok(out)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        domain(format!("stability index alpha must lie in (0, 1], got {alpha}"))
    }
}

fn stable_density(alpha: f64, s: f64) -> f64 {
    alpha / (libm::tgamma(1.0 - alpha) * s.powf(alpha + 1.0))
}

fn fill_tempered(mu: &mut [f64], alpha: f64, theta: f64, lambda: f64) {
    let r = lambda / (lambda + theta);
    mu[0] = alpha * lambda * (lambda + theta).powf(alpha - 1.0);
    for j in 1..mu.len() {
        mu[j] = mu[j - 1] * r * (j as f64 - alpha) / (j as f64 + 1.0);
    }
}

/// Unit-time positive stable variable, `E exp(-u X) = exp(-u^alpha)`
/// (Kanter's representation).
pub(crate) fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    loop {
        let u: f64 = PI * rng.random::<f64>();
        if u == 0.0 {
            continue;
        }
        let e: f64 = Exp1.sample(rng);
        let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
        let b = (((1.0 - alpha) * u).sin() / e).powf((1.0 - alpha) / alpha);
        let x = a * b;
        if x.is_finite() {
            return x;
        }
    }
}

/// Exact tempered stable increment: stable proposal accepted with probability
/// `exp(-theta X)`; long steps are halved so acceptance stays above 0.1.
fn tempered_stable<R: Rng + ?Sized>(alpha: f64, theta: f64, dt: f64, rng: &mut R) -> f64 {
    if (-dt * theta.powf(alpha)).exp() < 0.1 {
        let h = 0.5 * dt;
        return tempered_stable(alpha, theta, h, rng) + tempered_stable(alpha, theta, h, rng);
    }
    let scale = dt.powf(1.0 / alpha);
    loop {
        let x = scale * positive_stable(alpha, rng);
        if rng.random::<f64>() < (-theta * x).exp() {
            return x;
        }
    }
}

/// Nondecreasing sampling times, all `>= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid(Vec<f64>);

impl PathGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return domain("grid times must be finite and >= 0");
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return domain("grid times must be nondecreasing");
        }
        Ok(Self(times))
    }

    /// `steps` equal steps on `(0, t_end]`.
    pub fn uniform(t_end: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(t_end > 0.0) {
            return domain("uniform grid needs t_end > 0 and at least one step");
        }
        Self::new((1..=steps).map(|i| t_end * i as f64 / steps as f64).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }
}
