//! Alpha-stable variates via the Chambers-Mallows-Stuck transform.
//!
//! Parameterisation: characteristic function
//! `exp(i*delta*t - gamma^alpha |t|^alpha (1 - i*beta*sgn(t)*tan(pi*alpha/2)))`
//! for `alpha != 1`, with the usual logarithmic correction at `alpha == 1`.
//! At `alpha = 2` this is a Gaussian of variance `2 gamma^2`; at `alpha = 1,
//! beta = 0` a Cauchy law with scale `gamma`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl StableParams {
    /// Symmetric law centred at zero.
    pub fn symmetric(alpha: f64, gamma: f64) -> Self {
        Self {
            alpha,
            beta: 0.0,
            gamma,
            delta: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let Self {
            alpha,
            beta,
            gamma,
            delta,
        } = *self;
        if !(alpha.is_finite() && alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 2], got {alpha}")));
        }
        if !(beta.is_finite() && (-1.0..=1.0).contains(&beta)) {
            return Err(Error::invalid(format!("beta must lie in [-1, 1], got {beta}")));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
        }
        if !delta.is_finite() {
            return Err(Error::invalid("delta must be finite"));
        }
        Ok(())
    }

    /// One standardised draw (`gamma = 1`, `delta = 0`) followed by scaling.
    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut u: f64 = rng.random();
        while u == 0.0 {
            u = rng.random();
        }
        let v = PI * (u - 0.5);
        let mut w: f64 = Exp1.sample(rng);
        while w == 0.0 {
            w = Exp1.sample(rng);
        }
        let (a, b) = (self.alpha, self.beta);
        if (a - 1.0).abs() < 1e-12 {
            let shifted = FRAC_PI_2 + b * v;
            let x = (shifted * v.tan() - b * ((FRAC_PI_2 * w * v.cos()) / shifted).ln())
                / FRAC_PI_2;
            self.gamma * x + (2.0 / PI) * b * self.gamma * self.gamma.ln() + self.delta
        } else {
            let t = b * (PI * a / 2.0).tan();
            let shift = t.atan() / a;
            let scale = (1.0 + t * t).powf(1.0 / (2.0 * a));
            let x = scale * (a * (v + shift)).sin() / v.cos().powf(1.0 / a)
                * ((v - a * (v + shift)).cos() / w).powf((1.0 - a) / a);
            self.gamma * x + self.delta
        }
    }
}

/// `n` independent draws from `S(alpha, beta, gamma, delta)`.
pub fn sample_sas<R: Rng + ?Sized>(params: &StableParams, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    params.validate()?;
    Ok((0..n).map(|_| params.draw(rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn quantile(sorted: &[f64], q: f64) -> f64 {
        let pos = q * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[(lo + 1).min(sorted.len() - 1)] * frac
    }

    #[test]
    fn alpha_two_is_gaussian() {
        let p = StableParams::symmetric(2.0, 1.5);
        let x = sample_sas(&p, 100_000, &mut rng::stream(1, &[])).unwrap();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64;
        let want = 2.0 * 1.5 * 1.5;
        assert!((var / want - 1.0).abs() < 0.03, "variance {var} vs {want}");
    }

    #[test]
    fn alpha_one_is_cauchy() {
        let p = StableParams {
            alpha: 1.0,
            beta: 0.0,
            gamma: 2.0,
            delta: 0.7,
        };
        let mut x = sample_sas(&p, 100_000, &mut rng::stream(2, &[])).unwrap();
        x.sort_by(f64::total_cmp);
        let median = quantile(&x, 0.5);
        let iqr = quantile(&x, 0.75) - quantile(&x, 0.25);
        assert!((median - 0.7).abs() < 0.03 * 2.0, "median {median}");
        assert!((iqr / 4.0 - 1.0).abs() < 0.03, "iqr {iqr}");
    }

    #[test]
    fn characteristic_function_matches_at_alpha_1_2() {
        let p = StableParams::symmetric(1.2, 1.0);
        let x = sample_sas(&p, 100_000, &mut rng::stream(3, &[])).unwrap();
        for i in 1..=20 {
            let t = 0.1 * i as f64;
            let (re, im) = x.iter().fold((0.0, 0.0), |(re, im), v| {
                (re + (t * v).cos(), im + (t * v).sin())
            });
            let n = x.len() as f64;
            let dev = ((re / n - (-t.powf(1.2)).exp()).powi(2) + (im / n).powi(2)).sqrt();
            assert!(dev < 0.05, "t={t}: deviation {dev}");
        }
    }

    #[test]
    fn rejects_bad_alpha() {
        let mut r = rng::stream(0, &[]);
        assert!(sample_sas(&StableParams::symmetric(0.0, 1.0), 1, &mut r).is_err());
        assert!(sample_sas(&StableParams::symmetric(2.5, 1.0), 1, &mut r).is_err());
        assert!(sample_sas(&StableParams::symmetric(1.5, 0.0), 1, &mut r).is_err());
    }

    #[test]
    fn skewed_draws_are_finite() {
        let p = StableParams {
            alpha: 0.7,
            beta: 0.8,
            gamma: 1.0,
            delta: 0.0,
        };
        let x = sample_sas(&p, 10_000, &mut rng::stream(4, &[])).unwrap();
        assert!(x.iter().all(|v| v.is_finite()));
    }
}
