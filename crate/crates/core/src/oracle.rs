//! Brute-force value computation over full histories on tiny grids.
//!
//! This is the ground-truth engine the solver is checked against: a
//! memoized backward recursion over *complete* histories, with no value
//! decomposition anywhere —
//!
//! `V(h) = max( R(h), max over unsampled interior points x' of
//!              E[ V(h + (x', Y')) ] - c )`
//!
//! It shares the bridge and reward primitives with the rest of the crate
//! (so both routes see identical conditional laws and quadrature) but none
//! of the solver's code paths; agreement between the two is evidence for
//! the decomposition, not a tautology. Instances are capped at eight
//! interior points because the state space is combinatorial.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::history::ObservationHistory;
use crate::prior::{Grid, KernelCache, PriorModel};
use crate::reward::{stop_reward_with, RewardSpec};

/// Hard cap on interior grid points the recursion will enumerate.
pub const MAX_INTERIOR: usize = 8;

type State = Vec<(u16, u16)>; // (x-step, value index), sorted by step

/// Reusable brute-force engine for one (prior, grid, reward, cost)
/// configuration; the memo is shared across queries, and states are keyed
/// by relative structure (translation invariance makes that sound).
pub struct BruteForce {
    grid: Grid,
    reward: RewardSpec,
    cost: f64,
    kernels: KernelCache,
    memo: HashMap<State, f64>,
}

impl BruteForce {
    pub fn new(prior: &PriorModel, grid: &Grid, reward: &RewardSpec, cost: f64) -> Result<Self> {
        prior.validate()?;
        reward.validate()?;
        if !(cost > 0.0) {
            return Err(Error::invalid("cost must be positive".to_string()));
        }
        if grid.m() - 1 > MAX_INTERIOR {
            return Err(Error::GridTooLarge { interior: grid.m() - 1, max: MAX_INTERIOR });
        }
        Ok(BruteForce {
            grid: grid.clone(),
            reward: reward.clone(),
            cost,
            kernels: KernelCache::new(prior.clone(), grid.clone()),
            memo: HashMap::new(),
        })
    }

    /// Value of a full history whose interval spans the whole grid.
    pub fn value(&mut self, h: &ObservationHistory) -> Result<f64> {
        let state = self.resolve(h)?;
        Ok(self.value_rec(state))
    }

    /// Expected stopping reward of a full history (sum over its gaps).
    pub fn reward_of(&mut self, h: &ObservationHistory) -> Result<f64> {
        let state = self.resolve(h)?;
        Ok(self.state_reward(&state))
    }

    fn resolve(&self, h: &ObservationHistory) -> Result<State> {
        let mut state = Vec::with_capacity(h.len());
        for o in h.observations() {
            let step = self.grid.offset_steps(o.x - h.a())?;
            state.push((step as u16, self.grid.y_index(o.y)? as u16));
        }
        if state.last().map(|s| s.0) != Some(self.grid.m() as u16) {
            return Err(Error::OffGrid { what: "interval length", value: h.b() - h.a() });
        }
        Ok(state)
    }

    fn state_reward(&self, state: &State) -> f64 {
        let mut acc = 0.0;
        for pair in state.windows(2) {
            let (s0, i0) = (pair[0].0 as usize, pair[0].1 as usize);
            let (s1, i1) = (pair[1].0 as usize, pair[1].1 as usize);
            acc += stop_reward_with(&self.reward, &self.grid, s1 - s0, i0, i1, |al, ar, dd| {
                self.kernels.kernel(al, ar, dd)
            });
        }
        acc
    }

    fn value_rec(&mut self, state: State) -> f64 {
        if let Some(&v) = self.memo.get(&state) {
            return v;
        }
        let mut best = self.state_reward(&state);
        for step in 1..self.grid.m() as u16 {
            let pos = state.partition_point(|&(s, _)| s < step);
            if state.get(pos).map(|s| s.0) == Some(step) {
                continue; // already observed
            }
            let (sl, il) = state[pos - 1];
            let (sr, ir) = state[pos];
            let kernel = self.kernels.kernel(
                (step - sl) as usize,
                (sr - step) as usize,
                ir as i64 - il as i64,
            );
            let pmf = kernel.pmf(il as usize);
            let mut expect = 0.0;
            for (i, &p) in pmf.probs().iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let mut child = state.clone();
                child.insert(pos, (step, i as u16));
                expect += p * self.value_rec(child);
            }
            best = best.max(expect - self.cost);
        }
        self.memo.insert(state, best);
        best
    }
}

/// One-shot brute-force value of a history on a tiny grid.
pub fn brute_value(
    prior: &PriorModel,
    grid: &Grid,
    reward: &RewardSpec,
    cost: f64,
    h: &ObservationHistory,
) -> Result<f64> {
    BruteForce::new(prior, grid, reward, cost)?.value(h)
}
