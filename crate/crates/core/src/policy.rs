//! Executable sampling policies.
//!
//! Three policies share one execution loop:
//!
//! - `Optimal` — greedy on a solved [`ValueTable`]: per gap, the table's
//!   argmax action and the value-minus-stop improvement; the policy
//!   samples the globally best improving location and stops when no gap
//!   improves. Equivalent by construction to re-running the table's
//!   Q-maximization (the argmax was recorded during the build with the
//!   same tie-breaking).
//! - `OneStepLookahead` — samples the location maximizing the expected
//!   immediate reward gain, stopping once the best gain drops below the
//!   cost.
//! - `FixedBudgetLookahead` — the same argmax, sign and cost ignored,
//!   stopping only after the budget is exhausted (the chosen sample may be
//!   non-improving; a budgeted policy has to spend its samples somewhere).
//!
//! Ties are broken toward the leftmost maximizing location, scanning gaps
//! left to right and splits in increasing offset.

use rand::Rng;

use crate::error::{Error, Result};
use crate::history::{Observation, ObservationHistory};
use crate::prior::{Grid, KernelCache, PriorModel};
use crate::reward::RewardSpec;
use crate::solver::{Action, StopTable, ValueTable};

/// Which policy to execute.
#[derive(Clone, Copy)]
pub enum PolicyKind<'t> {
    Optimal(&'t ValueTable),
    OneStepLookahead { cost: f64 },
    FixedBudgetLookahead { budget: usize },
}

impl PolicyKind<'_> {
    pub fn label(&self) -> String {
        match self {
            PolicyKind::Optimal(_) => "optimal".to_string(),
            PolicyKind::OneStepLookahead { .. } => "one_step_lookahead".to_string(),
            PolicyKind::FixedBudgetLookahead { budget } => {
                format!("fixed_budget_lookahead({budget})")
            }
        }
    }
}

/// Immutable evaluation context shared by decisions and runs; safe to
/// share across threads (the kernel cache is concurrent).
pub struct PolicyContext<'a> {
    pub prior: &'a PriorModel,
    pub grid: &'a Grid,
    pub reward: &'a RewardSpec,
    pub stops: &'a StopTable,
    pub kernels: &'a KernelCache,
}

/// What a policy wants to do next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    Stop,
    Sample(f64),
}

/// Record of one policy execution.
#[derive(Debug, Clone)]
pub struct PolicyTrace {
    /// Sampled locations and observed values, in sampling order.
    pub steps: Vec<Observation>,
    /// Number of samples taken.
    pub tau: usize,
    /// Expected stopping reward of the final history.
    pub final_reward: f64,
    /// `final_reward - cost * tau` (cost as passed to [`run`]).
    pub performance: f64,
    /// The history after the policy stopped.
    pub final_history: ObservationHistory,
}

struct Gap {
    x_left: f64,
    j: usize,
    il: usize,
    ir: usize,
}

fn resolve_gaps(grid: &Grid, h: &ObservationHistory) -> Result<Vec<Gap>> {
    let mut out = Vec::with_capacity(h.len() - 1);
    for (left, right) in h.gaps() {
        let j = grid.length_steps(right.x - left.x)?;
        if j > grid.m() {
            return Err(Error::OffGrid { what: "gap length", value: right.x - left.x });
        }
        out.push(Gap {
            x_left: left.x,
            j,
            il: grid.y_index(left.y)?,
            ir: grid.y_index(right.y)?,
        });
    }
    Ok(out)
}

fn check_table(table: &ValueTable, ctx: &PolicyContext) -> Result<()> {
    let meta = table.meta();
    if &meta.prior != ctx.prior {
        return Err(Error::TableMismatch("prior differs".to_string()));
    }
    if &meta.grid != ctx.grid {
        return Err(Error::TableMismatch("grid differs".to_string()));
    }
    if &meta.reward != ctx.reward {
        return Err(Error::TableMismatch("reward differs".to_string()));
    }
    Ok(())
}

/// Expected sum of the two sub-gap stop rewards when sampling `split`
/// steps into a gap, averaged over the bridge pmf at the split point.
fn expected_split_stop(ctx: &PolicyContext, gap: &Gap, split: usize) -> f64 {
    let dd = gap.ir as i64 - gap.il as i64;
    let kernel = ctx.kernels.kernel(split, gap.j - split, dd);
    let (lo, hi) = kernel.window(gap.il);
    let z = kernel.prefix[hi + 1] - kernel.prefix[lo];
    let mut num = 0.0;
    for (t, idx) in (lo..=hi).enumerate() {
        num += kernel.rel[idx]
            * (ctx.stops.stop(split, gap.il, t) + ctx.stops.stop(gap.j - split, t, gap.ir));
    }
    num / z
}

/// Best (improvement, location) over all candidate samples, scanning left
/// to right with strict improvement so ties resolve to the leftmost
/// location.
fn best_lookahead(ctx: &PolicyContext, gaps: &[Gap]) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for gap in gaps {
        let s_gap = ctx.stops.stop(gap.j, gap.il, gap.ir);
        for split in 1..gap.j {
            let gain = expected_split_stop(ctx, gap, split) - s_gap;
            if best.map_or(true, |(g, _)| gain > g) {
                best = Some((gain, gap.x_left + split as f64 * ctx.grid.h()));
            }
        }
    }
    best
}

/// One decision of the given policy from history `h`.
pub fn decide(kind: &PolicyKind, ctx: &PolicyContext, h: &ObservationHistory) -> Result<Decision> {
    let gaps = resolve_gaps(ctx.grid, h)?;
    match kind {
        PolicyKind::Optimal(table) => {
            check_table(table, ctx)?;
            let mut best: Option<(f64, f64)> = None;
            for gap in &gaps {
                if let Action::Split(split) = table.action(gap.j, gap.il, gap.ir) {
                    let improvement =
                        table.value(gap.j, gap.il, gap.ir) - table.stop(gap.j, gap.il, gap.ir);
                    if best.map_or(true, |(imp, _)| improvement > imp) {
                        best = Some((improvement, gap.x_left + split as f64 * ctx.grid.h()));
                    }
                }
            }
            Ok(match best {
                Some((imp, x)) if imp > 0.0 => Decision::Sample(x),
                _ => Decision::Stop,
            })
        }
        PolicyKind::OneStepLookahead { cost } => Ok(match best_lookahead(ctx, &gaps) {
            Some((gain, x)) if gain - cost > 0.0 => Decision::Sample(x),
            _ => Decision::Stop,
        }),
        PolicyKind::FixedBudgetLookahead { budget } => {
            // Samples taken so far, counted against an endpoint-only start.
            let taken = h.len() - 2;
            if taken >= *budget {
                return Ok(Decision::Stop);
            }
            Ok(match best_lookahead(ctx, &gaps) {
                Some((_, x)) => Decision::Sample(x),
                None => Decision::Stop,
            })
        }
    }
}

/// Runs a policy to completion from `h0`, sampling observed values from
/// the bridge conditional of each sampled point's flanking observations.
pub fn run<R: Rng + ?Sized>(
    kind: &PolicyKind,
    ctx: &PolicyContext,
    h0: &ObservationHistory,
    cost: f64,
    rng: &mut R,
) -> Result<PolicyTrace> {
    if let PolicyKind::Optimal(table) = kind {
        check_table(table, ctx)?;
        if table.cost() != cost {
            return Err(Error::TableMismatch(format!(
                "table built for cost {}, run uses {cost}",
                table.cost()
            )));
        }
    }
    let initial_gaps = resolve_gaps(ctx.grid, h0)?;
    if let PolicyKind::FixedBudgetLookahead { budget } = kind {
        let free: usize = initial_gaps.iter().map(|g| g.j - 1).sum();
        if *budget > free {
            return Err(Error::invalid(format!(
                "budget {budget} exceeds the {free} unsampled interior grid points"
            )));
        }
    }
    let mut h = h0.clone();
    let mut steps = Vec::new();
    // Each sample consumes a distinct grid point, so m-1 bounds every policy.
    for _ in 0..ctx.grid.m() {
        match decide(kind, ctx, &h)? {
            Decision::Stop => break,
            Decision::Sample(x) => {
                let (left, right) = h
                    .gaps()
                    .find(|(l, r)| l.x < x && x < r.x)
                    .ok_or_else(|| Error::invalid(format!("sample location {x} not interior")))?;
                let al = ctx.grid.length_steps(x - left.x)?;
                let ar = ctx.grid.length_steps(right.x - x)?;
                let il = ctx.grid.y_index(left.y)?;
                let ir = ctx.grid.y_index(right.y)?;
                let kernel = ctx.kernels.kernel(al, ar, ir as i64 - il as i64);
                let y = kernel.pmf(il).sample(ctx.grid, rng);
                let obs = Observation::new(x, y);
                steps.push(obs);
                h = h.insert(obs)?;
            }
        }
    }
    let final_reward = ctx.stops.stop_of_history(ctx.grid, &h)?;
    let tau = steps.len();
    Ok(PolicyTrace {
        steps,
        tau,
        final_reward,
        performance: final_reward - cost * tau as f64,
        final_history: h,
    })
}
