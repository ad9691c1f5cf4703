//! Classification reward families and expected stopping rewards.
//!
//! A reward spec scores the classification of a single point given the
//! process value there; the expected stopping reward of a history is the
//! integral over the interval of the best achievable per-point score. On
//! the discretized problem that integral is a trapezoid rule over the
//! x-grid: interior points contribute the expected best score under their
//! bridge conditional, observed points contribute the score of the known
//! value. The dynamic program and the reward must see the same
//! discretization or the stop/continue comparison would be biased, so no
//! finer sub-grid is used.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::ObservationHistory;
use crate::prior::{compute_kernel, BridgeDistribution, BridgeKernel, Grid, PriorModel};

/// Per-point classification scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardSpec {
    /// Unit reward for classifying a point on the correct side of
    /// `threshold`.
    Indicator { threshold: f64 },
    /// Signed distance to `threshold`, clipped to `±clip`.
    ClippedLinear { threshold: f64, clip: f64 },
}

impl RewardSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            RewardSpec::Indicator { .. } => Ok(()),
            RewardSpec::ClippedLinear { clip, .. } => {
                if *clip > 0.0 && clip.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("clip bound must be positive, got {clip}")))
                }
            }
        }
    }

    pub fn threshold(&self) -> f64 {
        match self {
            RewardSpec::Indicator { threshold } => *threshold,
            RewardSpec::ClippedLinear { threshold, .. } => *threshold,
        }
    }

    /// Uniform bound on the per-point score.
    pub fn bound(&self) -> f64 {
        match self {
            RewardSpec::Indicator { .. } => 1.0,
            RewardSpec::ClippedLinear { clip, .. } => *clip,
        }
    }

    /// Best achievable score at a point whose value is known exactly
    /// (classification there is certain).
    pub fn endpoint_value(&self, y: f64) -> f64 {
        match self {
            RewardSpec::Indicator { .. } => 1.0,
            RewardSpec::ClippedLinear { threshold, clip } => (y - threshold).abs().min(*clip),
        }
    }

    /// Expected best score under `kernel` sliced at left index `i_left`.
    ///
    /// For the indicator family this is max(p, 1-p) where p is the mass at
    /// or above the threshold, the threshold-straddling cell contributing
    /// half its mass to each side (unbiased on the symmetric grid).
    pub(crate) fn pointwise_from_kernel(
        &self,
        kernel: &BridgeKernel,
        i_left: usize,
        grid: &Grid,
    ) -> f64 {
        let (lo, hi) = kernel.window(i_left);
        let z = kernel.prefix[hi + 1] - kernel.prefix[lo];
        match self {
            RewardSpec::Indicator { .. } => {
                let p_above = match grid.center_index() {
                    Some(ic) => {
                        let at = lo + ic;
                        let above = kernel.prefix[hi + 1] - kernel.prefix[at + 1];
                        (above + 0.5 * kernel.rel[at]) / z
                    }
                    None => {
                        let first_above = lo + grid.n() / 2;
                        (kernel.prefix[hi + 1] - kernel.prefix[first_above]) / z
                    }
                };
                p_above.max(1.0 - p_above)
            }
            RewardSpec::ClippedLinear { threshold, clip } => {
                let mut acc = 0.0;
                for (idx, y) in (lo..=hi).zip(grid.ys()) {
                    acc += kernel.rel[idx] * (y - threshold).clamp(-clip, *clip);
                }
                (acc / z).abs()
            }
        }
    }
}

/// Expected best per-point score under an explicit bridge pmf (reward
/// density per unit length).
pub fn pointwise_value(reward: &RewardSpec, pmf: &BridgeDistribution, grid: &Grid) -> f64 {
    match reward {
        RewardSpec::Indicator { .. } => {
            let mut above = 0.0;
            let mut at = 0.0;
            let ic = grid.center_index();
            for (i, (&p, &y)) in pmf.probs().iter().zip(grid.ys()).enumerate() {
                if ic == Some(i) {
                    at += p;
                } else if y > reward.threshold() {
                    above += p;
                }
            }
            let p_above = above + 0.5 * at;
            p_above.max(1.0 - p_above)
        }
        RewardSpec::ClippedLinear { threshold, clip } => {
            let e: f64 = pmf
                .probs()
                .iter()
                .zip(grid.ys())
                .map(|(p, y)| p * (y - threshold).clamp(-clip, *clip))
                .sum();
            e.abs()
        }
    }
}

/// Canonical stop-reward fold over one gap of `j` x-steps: trapezoid of
/// the pointwise values at interior grid points, with endpoint integrands
/// evaluated at the observed values. Every caller (public op, table build,
/// oracle) routes through this one fold so the results agree bitwise.
pub(crate) fn stop_reward_with<K>(
    reward: &RewardSpec,
    grid: &Grid,
    j: usize,
    i_left: usize,
    i_right: usize,
    mut kernel: K,
) -> f64
where
    K: FnMut(usize, usize, i64) -> Arc<BridgeKernel>,
{
    let ys = grid.ys();
    let dd = i_right as i64 - i_left as i64;
    let mut acc = 0.5 * (reward.endpoint_value(ys[i_left]) + reward.endpoint_value(ys[i_right]));
    for split in 1..j {
        let k = kernel(split, j - split, dd);
        acc += reward.pointwise_from_kernel(&k, i_left, grid);
    }
    grid.h() * acc
}

/// Expected reward of stopping with a single gap: two observations
/// `dx` apart with values `y_left`, `y_right`.
pub fn stop_reward(
    reward: &RewardSpec,
    prior: &PriorModel,
    grid: &Grid,
    dx: f64,
    y_left: f64,
    y_right: f64,
) -> Result<f64> {
    reward.validate()?;
    prior.validate()?;
    let j = grid.length_steps(dx)?;
    let il = grid.y_index(y_left)?;
    let ir = grid.y_index(y_right)?;
    Ok(stop_reward_with(reward, grid, j, il, ir, |al, ar, dd| {
        Arc::new(compute_kernel(prior, grid, al, ar, dd))
    }))
}

/// Expected reward of stopping with a full history: one trapezoid over the
/// whole interval, observed points contributing their known-value score
/// and interior points the pointwise value of their flanking-pair bridge.
pub fn history_reward(
    reward: &RewardSpec,
    prior: &PriorModel,
    grid: &Grid,
    h: &ObservationHistory,
) -> Result<f64> {
    reward.validate()?;
    prior.validate()?;
    let obs = h.observations();
    let mut steps = Vec::with_capacity(obs.len());
    for o in obs {
        steps.push((grid.offset_steps(o.x - h.a())?, grid.y_index(o.y)?));
    }
    if steps.last().map(|s| s.0) != Some(grid.m()) {
        return Err(Error::OffGrid { what: "interval length", value: h.b() - h.a() });
    }
    let mut acc = 0.0;
    for pair in steps.windows(2) {
        let (t0, i0) = pair[0];
        let (t1, i1) = pair[1];
        let dd = i1 as i64 - i0 as i64;
        for t in t0..t1 {
            let f = if t == t0 {
                reward.endpoint_value(grid.y(i0))
            } else {
                let k = compute_kernel(prior, grid, t - t0, t1 - t, dd);
                reward.pointwise_from_kernel(&k, i0, grid)
            };
            acc += if t == 0 { 0.5 * f } else { f };
        }
    }
    acc += 0.5 * reward.endpoint_value(grid.y(steps.last().unwrap().1));
    Ok(grid.h() * acc)
}
