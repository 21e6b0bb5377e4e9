//! Linear variance schedule and its derived products.

use crate::error::{Error, Result};

pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;

/// Precomputed β, α, ᾱ and σ for steps `1..=T`.
///
/// Accessors take the 1-based step index used throughout the sampler.
/// Internally everything is stored 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    beta_start: f64,
    beta_end: f64,
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
    sigmas: Vec<f64>,
}

impl Schedule {
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if steps < 2 {
            return Err(Error::ScheduleConfig(format!("need at least 2 steps, got {steps}")));
        }
        if !(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0) {
            return Err(Error::ScheduleConfig(format!(
                "need 0 < beta_start < beta_end < 1, got {beta_start}, {beta_end}"
            )));
        }
        let span = (steps - 1) as f64;
        let betas: Vec<f64> = (0..steps)
            .map(|i| beta_start + (beta_end - beta_start) * (i as f64) / span)
            .collect();
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(steps);
        let mut acc = 1.0;
        for a in &alphas {
            acc *= a;
            alpha_bars.push(acc);
        }
        let sigmas = betas.iter().map(|b| b.sqrt()).collect();
        Ok(Self {
            beta_start,
            beta_end,
            betas,
            alphas,
            alpha_bars,
            sigmas,
        })
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn beta_start(&self) -> f64 {
        self.beta_start
    }

    pub fn beta_end(&self) -> f64 {
        self.beta_end
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            Err(Error::StepRange { t, max: self.steps() })
        } else {
            Ok(())
        }
    }

    /// β_t. Panics if `t` is outside `1..=T`.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alphas[t - 1]
    }

    /// ᾱ_t, with the convention ᾱ_0 = 1 used by the final DDIM transition.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bars[t - 1]
        }
    }

    pub fn sigma(&self, t: usize) -> f64 {
        self.sigmas[t - 1]
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Self::linear(DEFAULT_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END).expect("default schedule is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_endpoints_and_midpoint() {
        let s = Schedule::default();
        assert_eq!(s.beta(1), 1e-4);
        assert!((s.beta(1000) - 0.02).abs() < 1e-15);
        // closed form: 1e-4 + (0.02 - 1e-4) * 499 / 999
        let expected = 1e-4 + 0.0199 * 499.0 / 999.0;
        assert!((s.beta(500) - expected).abs() < 1e-15);
        assert!((s.beta(500) - 0.010045).abs() < 1e-5);
    }

    #[test]
    fn two_step_products() {
        let s = Schedule::linear(2, 0.1, 0.2).unwrap();
        assert!((s.alpha_bar(1) - 0.9).abs() < 1e-15);
        assert!((s.alpha_bar(2) - 0.72).abs() < 1e-15);
    }

    #[test]
    fn invariants_hold() {
        let s = Schedule::default();
        for t in 1..=s.steps() {
            assert_eq!(s.alpha(t), 1.0 - s.beta(t));
            assert!((s.sigma(t).powi(2) - s.beta(t)).abs() < 1e-16);
            if t > 1 {
                assert!(s.beta(t) > s.beta(t - 1));
                assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
                assert_eq!(s.alpha_bar(t), s.alpha_bar(t - 1) * s.alpha(t));
            }
        }
        assert!(s.alpha_bar(s.steps()) < s.alpha_bar(1));
        assert!(s.alpha_bar(1) < 1.0);
        assert!(s.alpha_bar(1000) < 0.01);
    }

    #[test]
    fn product_matches_log_sum() {
        let s = Schedule::default();
        let mut log_sum = 0.0;
        for t in 1..=s.steps() {
            log_sum += s.alpha(t).ln();
            let rel = (s.alpha_bar(t) - log_sum.exp()).abs() / s.alpha_bar(t);
            assert!(rel < 1e-12, "t={t} rel={rel}");
        }
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(Schedule::linear(1, 1e-4, 0.02), Err(Error::ScheduleConfig(_))));
        assert!(Schedule::linear(10, 0.0, 0.02).is_err());
        assert!(Schedule::linear(10, 0.02, 0.01).is_err());
        assert!(Schedule::linear(10, 1e-4, 1.0).is_err());
        assert!(Schedule::linear(10, f64::NAN, 0.5).is_err());
    }

    #[test]
    fn step_range() {
        let s = Schedule::linear(5, 0.1, 0.2).unwrap();
        assert!(s.check_step(0).is_err());
        assert!(s.check_step(6).is_err());
        assert!(s.check_step(5).is_ok());
    }
}
