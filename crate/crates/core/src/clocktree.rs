// SPDX-License-Identifier: Apache-2.0

//! Full-rate sample clock derived from a half-rate input.
//!
//! The half-rate clock is divided into quarter-rate quadrature phases that
//! drive the 4:1 output multiplexers, so each full-rate edge belongs to one
//! of four mux phases. Residual duty-cycle error (after correction) moves
//! alternate edges in opposite directions; residual quadrature error moves
//! the I pair against the Q pair. Both are modeled as fractions of a UI and
//! add to Gaussian random jitter.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Quadrature displacement per mux phase, in units of `quadrature_error * T`.
const QUADRATURE_PATTERN: [f64; 4] = [0.5, 0.5, -0.5, -0.5];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClockError {
    #[error("invalid clock configuration: {0}")]
    InvalidConfig(String),
    #[error("edge count must be at least 1")]
    EmptySchedule,
    #[error("random jitter reordered edges {0} and {1}; rj_sigma is too large for this sample rate")]
    EdgeReorder(usize, usize),
    #[error("rate divisor {0} is not one of 2, 4, 8, 16, 32")]
    InvalidDivisor(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockConfig {
    /// Full sample rate in Hz (twice the input clock frequency).
    pub sample_rate: f64,
    /// Residual duty-cycle error as a fraction of one UI.
    pub duty_cycle_error: f64,
    /// Residual quadrature error as a fraction of one UI.
    pub quadrature_error: f64,
    /// Random jitter standard deviation in seconds.
    pub rj_sigma: f64,
    pub rng_seed: u64,
}

impl ClockConfig {
    pub fn ideal(sample_rate: f64) -> Self {
        Self {
            sample_rate,
            duty_cycle_error: 0.0,
            quadrature_error: 0.0,
            rj_sigma: 0.0,
            rng_seed: 0,
        }
    }

    pub fn period(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn validate(&self) -> Result<(), ClockError> {
        let bad = |msg: String| Err(ClockError::InvalidConfig(msg));
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return bad(format!("sample_rate must be positive, got {}", self.sample_rate));
        }
        if !(self.duty_cycle_error.abs() < 0.5) {
            return bad(format!(
                "|duty_cycle_error| must be < 0.5 UI, got {}",
                self.duty_cycle_error
            ));
        }
        if !(self.quadrature_error.abs() < 0.5) {
            return bad(format!(
                "|quadrature_error| must be < 0.5 UI, got {}",
                self.quadrature_error
            ));
        }
        if self.duty_cycle_error.abs() + self.quadrature_error.abs() >= 0.5 {
            return bad("combined |duty| + |quadrature| error must be < 0.5 UI".into());
        }
        if !(self.rj_sigma.is_finite() && self.rj_sigma >= 0.0) {
            return bad(format!("rj_sigma must be non-negative, got {}", self.rj_sigma));
        }
        Ok(())
    }

    /// Peak-to-peak of the per-phase deterministic displacement, in seconds.
    pub fn deterministic_pk_pk(&self) -> f64 {
        let d: Vec<f64> = (0..4).map(|k| deterministic_displacement(k, self)).collect();
        let max = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }
}

/// Deterministic displacement of full-rate edge `k` in seconds.
pub fn deterministic_displacement(k: usize, cfg: &ClockConfig) -> f64 {
    let t = cfg.period();
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    cfg.duty_cycle_error * t * sign + cfg.quadrature_error * t * QUADRATURE_PATTERN[k % 4]
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSchedule {
    pub edge_times: Vec<f64>,
    pub nominal_period: f64,
}

impl EdgeSchedule {
    pub fn ideal(n: usize, nominal_period: f64) -> Self {
        Self {
            edge_times: (0..n).map(|k| k as f64 * nominal_period).collect(),
            nominal_period,
        }
    }

    pub fn len(&self) -> usize {
        self.edge_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_times.is_empty()
    }

    /// Time interval error of every edge against the ideal grid `k * T`.
    pub fn tie(&self) -> Vec<f64> {
        self.edge_times
            .iter()
            .enumerate()
            .map(|(k, t)| t - k as f64 * self.nominal_period)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,time_s\n");
        for (k, t) in self.edge_times.iter().enumerate() {
            out.push_str(&format!("{k},{t:.8e}\n"));
        }
        out
    }
}

/// Generates `n` full-rate edge times.
///
/// `edge_k = k*T + dj(k) + rj_k`, with `rj_k` drawn from a ChaCha8 stream
/// seeded by `cfg.rng_seed`, so the schedule is reproducible.
pub fn derive_edges(n: usize, cfg: &ClockConfig) -> Result<EdgeSchedule, ClockError> {
    cfg.validate()?;
    if n == 0 {
        return Err(ClockError::EmptySchedule);
    }
    let period = cfg.period();
    let mut times: Vec<f64> = (0..n)
        .map(|k| k as f64 * period + deterministic_displacement(k, cfg))
        .collect();
    if cfg.rj_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        let normal = Normal::new(0.0, cfg.rj_sigma).expect("sigma validated");
        for t in times.iter_mut() {
            *t += normal.sample(&mut rng);
        }
        if let Some(i) = (1..n).find(|&i| !(times[i] > times[i - 1])) {
            return Err(ClockError::EdgeReorder(i - 1, i));
        }
    }
    Ok(EdgeSchedule {
        edge_times: times,
        nominal_period: period,
    })
}

/// Full-rate edge indices on which a clock divided by `rate_divisor`
/// toggles.
///
/// A clock at `1/divisor` of the full rate has a period of `divisor` UIs
/// and therefore toggles every `divisor / 2` full-rate edges, starting at
/// edge 0. The half-rate input toggles on every edge.
pub fn subrate_indices(rate_divisor: u32, n: usize) -> Result<Vec<usize>, ClockError> {
    if !matches!(rate_divisor, 2 | 4 | 8 | 16 | 32) {
        return Err(ClockError::InvalidDivisor(rate_divisor));
    }
    let stride = (rate_divisor / 2) as usize;
    Ok((0..n).step_by(stride).collect())
}
