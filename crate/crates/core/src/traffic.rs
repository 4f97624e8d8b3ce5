//! Per-slot task arrivals driven by fractional Gaussian noise.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub mean_tasks_per_slot: f64,
    pub hurst: f64,
    pub relative_std: f64,
    pub slot_duration_s: f64,
    pub task_size_bytes: u64,
    pub seed: u64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            mean_tasks_per_slot: 122.0,
            hurst: 0.8,
            relative_std: 0.2,
            slot_duration_s: 0.05,
            task_size_bytes: 2500,
            seed: 0,
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_tasks_per_slot > 0.0) {
            return Err(Error::config("traffic.mean_tasks_per_slot", "must be positive"));
        }
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(Error::config("traffic.hurst", "must lie in (0, 1)"));
        }
        if !(self.relative_std >= 0.0) {
            return Err(Error::config("traffic.relative_std", "must be non-negative"));
        }
        if !(self.slot_duration_s > 0.0) {
            return Err(Error::config("traffic.slot_duration_s", "must be positive"));
        }
        if self.task_size_bytes == 0 {
            return Err(Error::config("traffic.task_size_bytes", "must be positive"));
        }
        Ok(())
    }

    /// Mean bytes arriving at one source per slot.
    pub fn mean_demand_bytes(&self) -> f64 {
        self.mean_tasks_per_slot * self.task_size_bytes as f64
    }
}

/// Autocovariance of unit-variance fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(hurst: f64, k: usize) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// `series` independent unit-variance fGn sequences of length `n`, by Hosking's
/// (Durbin-Levinson) recursion. Exact in distribution; O(n^2) per call.
pub fn fgn<R: Rng + ?Sized>(hurst: f64, n: usize, series: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(n); series];
    if n == 0 {
        return out;
    }
    let gamma: Vec<f64> = (0..n).map(|k| fgn_autocovariance(hurst, k)).collect();
    let mut phi: Vec<f64> = Vec::with_capacity(n);
    let mut v = 1.0;
    for s in out.iter_mut() {
        s.push(rng.sample::<f64, _>(StandardNormal));
    }
    for t in 1..n {
        let acc: f64 = (1..t).map(|j| phi[j - 1] * gamma[t - j]).sum();
        let k = (gamma[t] - acc) / v;
        let prev = phi.clone();
        for j in 1..t {
            phi[j - 1] = prev[j - 1] - k * prev[t - j - 1];
        }
        phi.push(k);
        v *= 1.0 - k * k;
        let sd = v.max(0.0).sqrt();
        for s in out.iter_mut() {
            let mean: f64 = (1..=t).map(|j| phi[j - 1] * s[t - j]).sum();
            let z: f64 = rng.sample(StandardNormal);
            s.push(mean + sd * z);
        }
    }
    out
}

/// Task counts `[sources][steps]`, deterministic per `cfg.seed`.
pub fn generate_counts(cfg: &TrafficConfig, sources: usize, steps: usize) -> Result<Vec<Vec<u32>>> {
    cfg.validate()?;
    if steps == 0 {
        return Err(Error::config("steps", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = fgn(cfg.hurst, steps, sources, &mut rng);
    Ok(noise
        .into_iter()
        .map(|x| {
            x.into_iter()
                .map(|z| {
                    let c = cfg.mean_tasks_per_slot * (1.0 + cfg.relative_std * z);
                    c.max(0.0).round() as u32
                })
                .collect()
        })
        .collect())
}
