//! Overlap estimation by amplified SWAP tests.
//!
//! The SWAP-test ancilla is a rotation by `θ` with `sin²θ = p₀`. After
//! `k` Grover reflections (`m = 2k + 1` state preparations per shot) the
//! ancilla reads 0 with probability `sin²(mθ)`. Shots are taken at
//! geometrically growing depths, and `θ` is located by maximum likelihood
//! on `[π/4, π/2]`: each depth halves the surviving interval of candidate
//! angles, which plays the role of one binary-search step.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use rand_distr::{Binomial, Distribution};

use super::OverlapEstimate;
use crate::error::{invalid, QbeError, Result};
use crate::rng::Rng;

const DEPTH_GROWTH: f64 = 1.5;
const SHOT_SCALE: f64 = 0.55;
const GRID_PER_SLOT: f64 = 40.0;

/// Depths and per-depth shot count for a target precision.
#[derive(Debug, Clone, PartialEq)]
pub struct AeSchedule {
    /// Odd amplification depths `m` (state preparations per shot).
    pub depths: Vec<u64>,
    pub shots_per_depth: u64,
}

impl AeSchedule {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return invalid(format!("epsilon must lie in (0, 1), got {epsilon}"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return invalid(format!("delta must lie in (0, 1), got {delta}"));
        }
        // `value = −cos 2θ` so an angle error of ε/2 bounds the value error by ε.
        let target = PI / (2.0 * epsilon);
        let mut depths = vec![1u64];
        let mut x = 1.0;
        while (*depths.last().unwrap() as f64) < target {
            x *= DEPTH_GROWTH;
            let mut m = x.round() as u64;
            if m.is_multiple_of(2) {
                m += 1;
            }
            if m > *depths.last().unwrap() {
                depths.push(m);
            }
        }
        let levels = depths.len() as f64;
        let shots = (SHOT_SCALE * (levels / (delta * epsilon)).ln()).ceil().max(1.0) as u64;
        Ok(Self { depths, shots_per_depth: shots })
    }

    pub fn calls(&self) -> u64 {
        self.shots_per_depth * self.depths.iter().sum::<u64>()
    }
}

/// State preparations used by [`amplitude_estimate_bs`]; independent of `p₀`.
pub fn amplitude_estimation_calls(epsilon: f64, delta: f64) -> Result<u64> {
    Ok(AeSchedule::new(epsilon, delta)?.calls())
}

fn log_likelihood(theta: f64, data: &[(u64, u64, u64)]) -> f64 {
    let mut ll = 0.0;
    for &(m, r, h) in data {
        let p = (m as f64 * theta).sin().powi(2).clamp(1e-300, 1.0);
        let q = (1.0 - p).max(1e-300);
        ll += h as f64 * p.ln() + (r - h) as f64 * q.ln();
    }
    ll
}

/// Grid search over a window that shrinks with each depth, followed by a
/// golden-section polish. The window after depth `m_j` spans half a period
/// of the previous depth on either side of the running estimate.
fn maximize_likelihood(data: &[(u64, u64, u64)], epsilon: f64) -> f64 {
    let mut est = FRAC_PI_2;
    let mut prev_m: Option<u64> = None;
    for j in 0..data.len() {
        let m = data[j].0;
        let (lo, hi) = match prev_m {
            None => (FRAC_PI_4, FRAC_PI_2),
            Some(pm) => {
                let w = PI / (2.0 * pm as f64);
                ((est - w).max(FRAC_PI_4), (est + w).min(FRAC_PI_2))
            }
        };
        let step = if j + 1 == data.len() {
            (1.0 / (GRID_PER_SLOT * m as f64)).min(epsilon / GRID_PER_SLOT)
        } else {
            1.0 / (GRID_PER_SLOT * m as f64)
        };
        let npts = (((hi - lo) / step).ceil() as usize).max(2);
        let h = (hi - lo) / npts as f64;
        let mut best = (hi, f64::NEG_INFINITY);
        for i in (0..=npts).rev() {
            let t = lo + h * i as f64;
            let ll = log_likelihood(t, &data[..=j]);
            if ll > best.1 {
                best = (t, ll);
            }
        }
        est = best.0;
        prev_m = Some(m);
        if j + 1 == data.len() {
            let (mut a, mut b) = ((est - h).max(FRAC_PI_4), (est + h).min(FRAC_PI_2));
            let g = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..40 {
                let c = b - g * (b - a);
                let d = a + g * (b - a);
                if log_likelihood(c, data) >= log_likelihood(d, data) {
                    b = d;
                } else {
                    a = c;
                }
            }
            let mid = 0.5 * (a + b);
            if log_likelihood(mid, data) > best.1 {
                est = mid;
            }
        }
    }
    est
}

/// Estimates `2p₀ − 1` to within `epsilon` with probability at least `1 − delta`.
pub fn amplitude_estimate_bs(p0: f64, epsilon: f64, delta: f64, rng: &mut Rng) -> Result<OverlapEstimate> {
    if !(0.5 - 1e-12..=1.0 + 1e-12).contains(&p0) {
        return invalid(format!("SWAP-test probability {p0} outside [1/2, 1]"));
    }
    let schedule = AeSchedule::new(epsilon, delta)?;
    amplitude_estimate_with(p0, &schedule, epsilon, rng)
}

/// Runs a given schedule; `epsilon` sets the final grid resolution.
pub fn amplitude_estimate_with(p0: f64, schedule: &AeSchedule, epsilon: f64, rng: &mut Rng) -> Result<OverlapEstimate> {
    if !(0.5 - 1e-12..=1.0 + 1e-12).contains(&p0) {
        return invalid(format!("SWAP-test probability {p0} outside [1/2, 1]"));
    }
    let theta_true = p0.clamp(0.5, 1.0).sqrt().asin();
    let r = schedule.shots_per_depth;

    let mut data = Vec::with_capacity(schedule.depths.len());
    for &m in &schedule.depths {
        let p = (m as f64 * theta_true).sin().powi(2).clamp(0.0, 1.0);
        let hits = Binomial::new(r, p).map_err(|e| QbeError::InvalidArgument(e.to_string()))?.sample(rng);
        data.push((m, r, hits));
    }

    let theta = maximize_likelihood(&data, epsilon);

    let fisher: f64 = schedule.depths.iter().map(|&m| 4.0 * (m * m) as f64 * r as f64).sum();
    let sigma_theta = 1.0 / fisher.sqrt();
    let amplitude = theta.sin();
    Ok(OverlapEstimate {
        value: 2.0 * amplitude * amplitude - 1.0,
        std_error: (2.0 * (2.0 * theta).sin()).abs() * sigma_theta,
        amplitude,
        amplitude_std_error: theta.cos() * sigma_theta,
        shots_used: r * schedule.depths.len() as u64,
        eigensolver_calls: schedule.calls(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn certain_outcome_returns_one() {
        let mut rng = seeded(1);
        for eps in [0.1, 0.01, 0.001] {
            let est = amplitude_estimate_bs(1.0, eps, 0.05, &mut rng).unwrap();
            assert_eq!(est.value, 1.0);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut rng = seeded(1);
        assert!(amplitude_estimate_bs(0.75, 1.0, 0.05, &mut rng).is_err());
        assert!(amplitude_estimate_bs(0.75, 0.01, 0.0, &mut rng).is_err());
        assert!(amplitude_estimate_bs(0.3, 0.01, 0.05, &mut rng).is_err());
    }

    #[test]
    fn depths_are_odd_and_increasing() {
        let s = AeSchedule::new(1e-3, 0.05).unwrap();
        assert!(s.depths.windows(2).all(|w| w[1] > w[0]));
        assert!(s.depths.iter().all(|m| m % 2 == 1));
        assert!(*s.depths.last().unwrap() as f64 >= PI / 2e-3);
    }
}
