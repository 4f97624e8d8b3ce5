//! Softmax-with-slack action encoding, quantization, and safe exploration.

use super::state::InvolvedSet;
use crate::error::{Error, Result};
use crate::nn::Mat;
use crate::sim::{
    quantize_offload, quantize_power, quantize_subarrays, Endpoint, LinkAlloc, LinkAllocation,
    OffloadAssignment, RATIO_TOLERANCE,
};
use rand::Rng;
use rand_distr::StandardNormal;

/// Self plus four neighbors.
pub const OFFLOAD_WIDTH: usize = 5;
/// Four links plus slack.
pub const SUB_TO_WIDTH: usize = 5;
/// Used share plus slack.
pub const SUB_OT_WIDTH: usize = 2;

pub fn pow_to_width(subbands: usize) -> usize {
    4 * subbands + 1
}

pub fn pow_ot_width(subbands: usize) -> usize {
    subbands + 1
}

/// Per-source action width: offload, sub-array and power groups.
pub fn offload_action_width(subbands: usize) -> usize {
    OFFLOAD_WIDTH + SUB_TO_WIDTH + pow_to_width(subbands)
}

pub fn outcome_action_width(subbands: usize) -> usize {
    SUB_OT_WIDTH + pow_ot_width(subbands)
}

/// Post-softmax ratios of both phases, slack components included. Offload
/// rows follow the source order, outcome rows the involved-node order.
#[derive(Clone, Debug, PartialEq)]
pub struct JointAction {
    pub offload: Mat,
    pub sub_to: Mat,
    pub pow_to: Mat,
    pub sub_ot: Mat,
    pub pow_ot: Mat,
}

impl JointAction {
    pub fn groups(&self) -> [&Mat; 5] {
        [&self.offload, &self.sub_to, &self.pow_to, &self.sub_ot, &self.pow_ot]
    }

    pub fn groups_mut(&mut self) -> [&mut Mat; 5] {
        [&mut self.offload, &mut self.sub_to, &mut self.pow_to, &mut self.sub_ot, &mut self.pow_ot]
    }

    pub fn subbands(&self) -> usize {
        self.pow_ot.cols.saturating_sub(1)
    }

    /// Every row must be a point of the probability simplex.
    pub fn validate(&self) -> Result<()> {
        for m in self.groups() {
            for r in 0..m.rows {
                let row = m.row(r);
                if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::Action("negative or non-finite ratio".into()));
                }
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > RATIO_TOLERANCE {
                    return Err(Error::Action(format!("action group sums to {s}")));
                }
            }
        }
        Ok(())
    }

    /// Per-node action features for the critic: offload-phase ratios on source
    /// rows (zero elsewhere) followed by the outcome-phase ratios.
    pub fn node_features(&self, inv: &InvolvedSet) -> Result<Mat> {
        let k = self.subbands();
        let (wt, wo) = (offload_action_width(k), outcome_action_width(k));
        if self.offload.rows != inv.sources.len() || self.sub_ot.rows != inv.len() {
            return Err(Error::Dimension("action rows do not match the involved set".into()));
        }
        let mut out = Mat::zeros(inv.len(), wt + wo);
        for (p, &i) in inv.sources.iter().enumerate() {
            let row = out.row_mut(i);
            row[..OFFLOAD_WIDTH].copy_from_slice(self.offload.row(p));
            row[OFFLOAD_WIDTH..OFFLOAD_WIDTH + SUB_TO_WIDTH].copy_from_slice(self.sub_to.row(p));
            row[OFFLOAD_WIDTH + SUB_TO_WIDTH..wt].copy_from_slice(self.pow_to.row(p));
        }
        for i in 0..inv.len() {
            let row = out.row_mut(i);
            row[wt..wt + SUB_OT_WIDTH].copy_from_slice(self.sub_ot.row(i));
            row[wt + SUB_OT_WIDTH..].copy_from_slice(self.pow_ot.row(i));
        }
        Ok(out)
    }

    /// Inverse of `node_features`, used to split critic gradients per head.
    pub fn split_node_features(m: &Mat, inv: &InvolvedSet, subbands: usize) -> Result<JointAction> {
        let (wt, wo) = (offload_action_width(subbands), outcome_action_width(subbands));
        if m.cols != wt + wo || m.rows != inv.len() {
            return Err(Error::Dimension("action feature matrix shape".into()));
        }
        let take = |rows: &[usize], a: usize, b: usize| {
            let mut out = Mat::zeros(rows.len(), b - a);
            for (r, &i) in rows.iter().enumerate() {
                out.row_mut(r).copy_from_slice(&m.row(i)[a..b]);
            }
            out
        };
        let all: Vec<usize> = (0..inv.len()).collect();
        Ok(JointAction {
            offload: take(&inv.sources, 0, OFFLOAD_WIDTH),
            sub_to: take(&inv.sources, OFFLOAD_WIDTH, OFFLOAD_WIDTH + SUB_TO_WIDTH),
            pow_to: take(&inv.sources, OFFLOAD_WIDTH + SUB_TO_WIDTH, wt),
            sub_ot: take(&all, wt, wt + SUB_OT_WIDTH),
            pow_ot: take(&all, wt + SUB_OT_WIDTH, wt + wo),
        })
    }
}

/// Integer assignment and per-phase allocations of one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct Quantized {
    pub assignment: OffloadAssignment,
    pub offload: LinkAllocation,
    pub outcome: LinkAllocation,
}

/// Turns ratios into tasks, sub-arrays and watts. All four offloading ISLs of
/// every source are allocated; every involved node gets one outcome link.
pub fn quantize_action(
    action: &JointAction,
    inv: &InvolvedSet,
    arrivals: &[u32],
    max_subarrays: usize,
    max_power_w: f64,
) -> Result<Quantized> {
    action.validate()?;
    let k = action.subbands();
    if arrivals.len() != inv.sources.len() || action.offload.rows != inv.sources.len() {
        return Err(Error::Dimension("one arrival count and action row per source".into()));
    }
    if action.sub_ot.rows != inv.len() || action.pow_ot.rows != inv.len() {
        return Err(Error::Dimension("one outcome action row per involved node".into()));
    }
    let mut assignment = OffloadAssignment::default();
    let mut offload = LinkAllocation::default();
    for (p, &src) in inv.sources.iter().enumerate() {
        assignment.rows.push(quantize_offload(action.offload.row(p), arrivals[p])?);
        let subs = quantize_subarrays(&action.sub_to.row(p)[..4], max_subarrays)?;
        let watts = quantize_power(&action.pow_to.row(p)[..4 * k], max_power_w)?;
        for (j, &dst) in inv.offload_targets[p].iter().enumerate() {
            offload.insert(
                src,
                Endpoint::Sat(dst),
                LinkAlloc { subarrays: subs[j], power_w: watts[j * k..(j + 1) * k].to_vec() },
            );
        }
    }
    let mut outcome = LinkAllocation::default();
    for i in 0..inv.len() {
        let Some(next) = inv.next_hop[i] else { continue };
        let share = action.sub_ot.get(i, 0);
        let subarrays = 1 + (share * (max_subarrays - 1) as f64 + 1e-9).floor() as usize;
        let watts = quantize_power(&action.pow_ot.row(i)[..k], max_power_w)?;
        outcome.insert(i, next, LinkAlloc { subarrays: subarrays.min(max_subarrays), power_w: watts });
    }
    Ok(Quantized { assignment, offload, outcome })
}

/// Zero-sum Gaussian perturbation of one simplex group with standard
/// deviation `std_frac * max(group)`. Returns false and leaves the group
/// untouched when the noise might make a ratio negative: a component already
/// at zero, or any component of the realized perturbation below zero.
pub fn explore_group<R: Rng + ?Sized>(group: &mut [f64], std_frac: f64, rng: &mut R) -> bool {
    if std_frac <= 0.0 || group.len() < 2 || group.iter().any(|v| *v <= 0.0) {
        return false;
    }
    let sigma = std_frac * group.iter().copied().fold(0.0, f64::max);
    let z: Vec<f64> = group.iter().map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    let noisy: Vec<f64> = group.iter().zip(&z).map(|(g, n)| g + sigma * (n - mean)).collect();
    if noisy.iter().any(|v| *v < 0.0) {
        return false;
    }
    group.copy_from_slice(&noisy);
    true
}

/// Applies `explore_group` to every row of every head; returns accepted count.
pub fn explore<R: Rng + ?Sized>(action: &mut JointAction, std_frac: f64, rng: &mut R) -> usize {
    let mut accepted = 0;
    for m in action.groups_mut() {
        for r in 0..m.rows {
            accepted += usize::from(explore_group(m.row_mut(r), std_frac, rng));
        }
    }
    accepted
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn null_noise_leaves_ratios() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut g = [0.3, 0.2, 0.5];
        assert!(!explore_group(&mut g, 0.0, &mut rng));
        assert_eq!(g, [0.3, 0.2, 0.5]);
    }

    #[test]
    fn one_hot_group_is_always_withdrawn() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let mut g = [1.0, 0.0, 0.0, 0.0, 0.0];
            assert!(!explore_group(&mut g, 0.05, &mut rng));
            assert_eq!(g, [1.0, 0.0, 0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn accepted_noise_is_zero_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut accepted = 0;
        for _ in 0..2000 {
            let base = [0.2, 0.25, 0.15, 0.3, 0.1];
            let mut g = base;
            if explore_group(&mut g, 0.05, &mut rng) {
                accepted += 1;
                assert!((g.iter().sum::<f64>() - base.iter().sum::<f64>()).abs() < 1e-12);
                assert!(g.iter().all(|v| *v >= 0.0));
                assert_ne!(g, base);
            }
        }
        assert!(accepted > 1900);
    }
}
