//! Entanglement-generation timing: physical pair time from loss, logical
//! (purified) pair time, reconfiguration duty cycle, and a seeded
//! attempt-level Monte Carlo check of the analytic model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::routing::PathSpec;
use crate::switch_loss::overhead_factor;

/// Physical Bell pairs consumed by purification per logical Bell pair.
pub const PURIFICATION_FACTOR: f64 = 80.0;

/// One attempt per pump pulse of a 1 GHz source.
pub const DEFAULT_T_ATTEMPT: f64 = 1e-9;

/// Example reconfiguration time for a MEMS-class group switch. There is no
/// default; configurations must state `t_gs` explicitly.
pub const EXAMPLE_T_GS: f64 = 1e-3;

/// Per-connection infidelity contributed by the interconnect.
pub const DEFAULT_INFIDELITY: f64 = 0.10;

/// Expected time to herald one physical Bell pair over a channel with
/// `loss_db`, with one attempt every `t_attempt` seconds.
pub fn physical_pair_time(t_attempt: f64, loss_db: f64) -> f64 {
    t_attempt * overhead_factor(loss_db)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkTiming {
    /// Unknown when the timing was derived from `t_peg` alone.
    pub t_attempt: Option<f64>,
    pub t_peg: f64,
    pub t_leg: f64,
    pub t_gs: f64,
    pub r_leg: f64,
    pub duty_cycle: f64,
}

/// Logical-pair timing with the default purification factor.
pub fn logical_pair_timing(t_peg: f64, t_gs: f64) -> LinkTiming {
    logical_pair_timing_with(t_peg, t_gs, PURIFICATION_FACTOR)
}

pub fn logical_pair_timing_with(t_peg: f64, t_gs: f64, purification_factor: f64) -> LinkTiming {
    let t_leg = purification_factor * t_peg;
    let round = t_leg + t_gs;
    LinkTiming {
        t_attempt: None,
        t_peg,
        t_leg,
        t_gs,
        r_leg: 1.0 / round,
        duty_cycle: t_leg / round,
    }
}

/// Full timing chain from attempt period and channel loss.
pub fn link_timing(t_attempt: f64, loss_db: f64, t_gs: f64, purification_factor: f64) -> LinkTiming {
    LinkTiming {
        t_attempt: Some(t_attempt),
        ..logical_pair_timing_with(physical_pair_time(t_attempt, loss_db), t_gs, purification_factor)
    }
}

/// Empirical statistics from [`simulate_link`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkSimulation {
    pub logical_pairs: usize,
    pub attempts: u64,
    pub mean_t_peg: f64,
    pub se_t_peg: f64,
    pub mean_t_leg: f64,
    pub se_t_leg: f64,
}

/// Attempt-level Monte Carlo of logical pair generation.
///
/// Every slot is one Bernoulli trial with success probability
/// `10^(-loss/10)`; a logical pair completes after `purification_factor`
/// successes. Statistics are taken over logical pairs, and `t_peg` of a pair
/// is its `t_leg` divided by the purification factor.
pub fn simulate_link(loss_db: f64, t_attempt: f64, n_logical: usize, seed: u64) -> LinkSimulation {
    simulate_link_with(loss_db, t_attempt, n_logical, seed, PURIFICATION_FACTOR as u32)
}

pub fn simulate_link_with(
    loss_db: f64,
    t_attempt: f64,
    n_logical: usize,
    seed: u64,
    purification_factor: u32,
) -> LinkSimulation {
    assert!(n_logical >= 1, "simulate_link needs at least one logical pair");
    let success = 10f64.powf(-loss_db / 10.0).min(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total_attempts = 0u64;
    // Welford accumulators over per-logical-pair attempt counts
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..n_logical {
        let mut attempts = 0u64;
        let mut successes = 0u32;
        while successes < purification_factor {
            attempts += 1;
            if success >= 1.0 || rng.gen::<f64>() < success {
                successes += 1;
            }
        }
        total_attempts += attempts;
        let x = attempts as f64;
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let n = n_logical as f64;
    let variance = if n_logical > 1 { m2 / (n - 1.0) } else { 0.0 };
    let se_attempts = (variance / n).sqrt();
    let factor = purification_factor as f64;
    LinkSimulation {
        logical_pairs: n_logical,
        attempts: total_attempts,
        mean_t_leg: mean * t_attempt,
        se_t_leg: se_attempts * t_attempt,
        mean_t_peg: mean * t_attempt / factor,
        se_t_peg: se_attempts * t_attempt / factor,
    }
}

/// Infidelity the interconnect adds to one connection. It does not depend on
/// switch count or radix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfidelityModel {
    pub per_connection: f64,
}

impl Default for InfidelityModel {
    fn default() -> Self {
        InfidelityModel {
            per_connection: DEFAULT_INFIDELITY,
        }
    }
}

impl InfidelityModel {
    pub fn infidelity_estimate(&self, _path: &PathSpec) -> f64 {
        self.per_connection
    }

    pub fn fidelity(&self, path: &PathSpec) -> f64 {
        1.0 - self.infidelity_estimate(path)
    }
}

pub fn infidelity_estimate(path: &PathSpec) -> f64 {
    InfidelityModel::default().infidelity_estimate(path)
}
