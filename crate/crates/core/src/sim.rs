//! Monte Carlo policy evaluation.
//!
//! Replications are embarrassingly parallel; every replication draws its
//! randomness from an independent counter-mode stream of one seed, and the
//! aggregation is a compensated sequential reduction over the ordered
//! results, so a report is bit-for-bit reproducible whatever the thread
//! count. Comparisons between two policies at the same configuration reuse
//! the same per-replication streams (common random numbers), which tightens
//! the variance of the ratio without biasing either estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::history::ObservationHistory;
use crate::policy::{run, PolicyContext, PolicyKind, PolicyTrace};
use crate::prior::{Grid, KernelCache, PriorModel};
use crate::reward::RewardSpec;
use crate::solver::StopTable;
use crate::util::mean_and_se;

/// One experiment configuration: model, discretization, objective, and the
/// initial history.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub prior: PriorModel,
    pub grid: Grid,
    pub reward: RewardSpec,
    pub cost: f64,
    pub initial: ObservationHistory,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        self.reward.validate()?;
        if !(self.cost > 0.0) || !self.cost.is_finite() {
            return Err(Error::invalid("cost must be positive".to_string()));
        }
        let span = self.initial.b() - self.initial.a();
        if (span - self.grid.m() as f64 * self.grid.h()).abs() > 1e-9 * self.grid.h() {
            return Err(Error::invalid(format!(
                "history interval length {span} does not match grid span {}",
                self.grid.m() as f64 * self.grid.h()
            )));
        }
        Ok(())
    }
}

/// Aggregate of one policy evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub policy: String,
    pub replications: usize,
    pub mean_performance: f64,
    pub std_error: f64,
    pub mean_tau: f64,
    pub mean_reward: f64,
}

/// Shared per-scenario evaluation state: stop table and kernel cache built
/// once, reused across replications and policies.
pub struct Harness<'s> {
    scenario: &'s Scenario,
    stops: StopTable,
    kernels: KernelCache,
}

impl<'s> Harness<'s> {
    pub fn new(scenario: &'s Scenario) -> Result<Self> {
        scenario.validate()?;
        Ok(Harness {
            scenario,
            stops: StopTable::build(&scenario.prior, &scenario.grid, &scenario.reward)?,
            kernels: KernelCache::new(scenario.prior.clone(), scenario.grid.clone()),
        })
    }

    /// Reuses a value table's stop rewards instead of rebuilding them.
    pub fn with_stops(scenario: &'s Scenario, stops: StopTable) -> Result<Self> {
        scenario.validate()?;
        Ok(Harness {
            scenario,
            stops,
            kernels: KernelCache::new(scenario.prior.clone(), scenario.grid.clone()),
        })
    }

    pub fn context(&self) -> PolicyContext<'_> {
        PolicyContext {
            prior: &self.scenario.prior,
            grid: &self.scenario.grid,
            reward: &self.scenario.reward,
            stops: &self.stops,
            kernels: &self.kernels,
        }
    }

    fn replicate<F>(&self, reps: usize, seed: u64, per_rep: F) -> Result<Vec<PolicyTrace>>
    where
        F: Fn(&PolicyContext, &mut ChaCha8Rng) -> Result<PolicyTrace> + Sync,
    {
        (0..reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(rep as u64);
                per_rep(&self.context(), &mut rng)
            })
            .collect()
    }

    fn aggregate(&self, label: String, traces: &[PolicyTrace]) -> EvalReport {
        let perf: Vec<f64> = traces.iter().map(|t| t.performance).collect();
        let (mean_performance, std_error) = mean_and_se(&perf);
        let taus: Vec<f64> = traces.iter().map(|t| t.tau as f64).collect();
        let rewards: Vec<f64> = traces.iter().map(|t| t.final_reward).collect();
        EvalReport {
            policy: label,
            replications: traces.len(),
            mean_performance,
            std_error,
            mean_tau: mean_and_se(&taus).0,
            mean_reward: mean_and_se(&rewards).0,
        }
    }

    /// Evaluates one policy over `reps` independent replications.
    ///
    /// Fixed-budget policies are scored on reward alone: their sample
    /// count is pinned, so a cost term would be a constant offset.
    pub fn evaluate(&self, kind: &PolicyKind, reps: usize, seed: u64) -> Result<EvalReport> {
        if reps < 1 {
            return Err(Error::invalid("replications must be at least 1".to_string()));
        }
        let cost = match kind {
            PolicyKind::FixedBudgetLookahead { .. } => 0.0,
            _ => self.scenario.cost,
        };
        let traces = self.replicate(reps, seed, |ctx, rng| {
            run(kind, ctx, &self.scenario.initial, cost, rng)
        })?;
        Ok(self.aggregate(kind.label(), &traces))
    }

    /// Evaluates a fixed-budget lookahead at a possibly fractional
    /// expected budget: each replication rounds the budget up with
    /// probability equal to the fractional part (integer budgets consume
    /// no extra randomness).
    pub fn evaluate_fractional_budget(
        &self,
        budget: f64,
        reps: usize,
        seed: u64,
    ) -> Result<EvalReport> {
        if !(budget >= 0.0) || !budget.is_finite() {
            return Err(Error::invalid(format!("budget must be nonnegative, got {budget}")));
        }
        let floor = budget.floor();
        let frac = budget - floor;
        let traces = self.replicate(reps, seed, |ctx, rng| {
            let extra = frac > 0.0 && rng.random::<f64>() < frac;
            let kind = PolicyKind::FixedBudgetLookahead {
                budget: floor as usize + usize::from(extra),
            };
            run(&kind, ctx, &self.scenario.initial, 0.0, rng)
        })?;
        Ok(self.aggregate(format!("fixed_budget_lookahead({budget})"), &traces))
    }
}

/// Convenience one-shot evaluation.
pub fn evaluate(
    kind: &PolicyKind,
    scenario: &Scenario,
    reps: usize,
    seed: u64,
) -> Result<EvalReport> {
    Harness::new(scenario)?.evaluate(kind, reps, seed)
}

/// One row of a cost sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub cost: f64,
    pub optimal_value: f64,
    pub optimal_se: f64,
    pub lookahead_value: f64,
    pub lookahead_se: f64,
    pub ratio: f64,
}

/// Builds one value table per cost and evaluates the optimal and one-step
/// lookahead policies with common random numbers at each cost point.
pub fn sweep_cost(
    scenario: &Scenario,
    costs: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if costs.is_empty() {
        return Err(Error::invalid("cost sweep must not be empty".to_string()));
    }
    if costs.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::invalid("cost must be positive".to_string()));
    }
    if costs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("cost sweep must be strictly ascending".to_string()));
    }
    let mut rows = Vec::with_capacity(costs.len());
    for &cost in costs {
        let sc = Scenario { cost, ..scenario.clone() };
        let table = crate::solver::ValueTable::build(
            &sc.prior,
            &sc.grid,
            &sc.reward,
            cost,
            sc.initial.a(),
            sc.initial.b(),
        )?;
        let harness = Harness::with_stops(&sc, table.stops().clone())?;
        let optimal = harness.evaluate(&PolicyKind::Optimal(&table), reps, seed)?;
        let lookahead = harness.evaluate(&PolicyKind::OneStepLookahead { cost }, reps, seed)?;
        rows.push(SweepRow {
            cost,
            optimal_value: optimal.mean_performance,
            optimal_se: optimal.std_error,
            lookahead_value: lookahead.mean_performance,
            lookahead_se: lookahead.std_error,
            ratio: lookahead.mean_performance / optimal.mean_performance,
        });
    }
    Ok(rows)
}

/// CSV rendering of a cost sweep.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("c,optimal_value,optimal_se,lookahead_value,lookahead_se,ratio\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.cost, r.optimal_value, r.optimal_se, r.lookahead_value, r.lookahead_se, r.ratio
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::ValueTable;

    fn scenario(prior: PriorModel, m: usize, n: usize, cost: f64) -> Scenario {
        let grid = Grid::with_default_range(1.0, m, n, 0.0, &prior).unwrap();
        Scenario {
            prior,
            grid,
            reward: RewardSpec::Indicator { threshold: 0.0 },
            cost,
            initial: ObservationHistory::from_endpoints(0.0, 1.0, 0.0, 0.0).unwrap(),
        }
    }

    #[test]
    fn zero_sample_policy_reports_exact_values() {
        let sc = scenario(PriorModel::BrownianMotion, 20, 21, 2.0);
        let table =
            ValueTable::build(&sc.prior, &sc.grid, &sc.reward, sc.cost, 0.0, 1.0).unwrap();
        let harness = Harness::with_stops(&sc, table.stops().clone()).unwrap();
        let report = harness.evaluate(&PolicyKind::Optimal(&table), 500, 9).unwrap();
        let r0 =
            crate::reward::stop_reward(&sc.reward, &sc.prior, &sc.grid, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(report.mean_performance, r0);
        assert_eq!(report.std_error, 0.0);
        assert_eq!(report.mean_tau, 0.0);
    }

    #[test]
    fn reports_are_bitwise_reproducible() {
        let sc = scenario(PriorModel::CompoundPoisson { rate: 20.0 }, 20, 21, 0.1);
        let table =
            ValueTable::build(&sc.prior, &sc.grid, &sc.reward, sc.cost, 0.0, 1.0).unwrap();
        let harness = Harness::with_stops(&sc, table.stops().clone()).unwrap();
        let a = harness.evaluate(&PolicyKind::Optimal(&table), 400, 123).unwrap();
        let b = harness.evaluate(&PolicyKind::Optimal(&table), 400, 123).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reports_do_not_depend_on_thread_count() {
        let sc = scenario(PriorModel::BrownianMotion, 20, 21, 0.1);
        let table =
            ValueTable::build(&sc.prior, &sc.grid, &sc.reward, sc.cost, 0.0, 1.0).unwrap();
        let eval = || {
            let harness = Harness::with_stops(&sc, table.stops().clone()).unwrap();
            harness.evaluate(&PolicyKind::Optimal(&table), 300, 7).unwrap()
        };
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(eval);
        let multi = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(eval);
        assert_eq!(single, multi);
    }

    #[test]
    fn optimal_mean_matches_table_value() {
        // The table value is the analytic expectation of the greedy
        // policy's performance under the same discretized model.
        let sc = scenario(PriorModel::BrownianMotion, 30, 21, 0.05);
        let table =
            ValueTable::build(&sc.prior, &sc.grid, &sc.reward, sc.cost, 0.0, 1.0).unwrap();
        let harness = Harness::with_stops(&sc, table.stops().clone()).unwrap();
        let report = harness.evaluate(&PolicyKind::Optimal(&table), 20_000, 31).unwrap();
        let v0 = table.value_of_history(&sc.initial).unwrap();
        assert!(
            (report.mean_performance - v0).abs() <= 3.0 * report.std_error,
            "mean {} vs table {v0} (se {})",
            report.mean_performance,
            report.std_error
        );
    }

    #[test]
    fn sweep_no_sample_regime_is_flat() {
        let sc = scenario(PriorModel::BrownianMotion, 10, 11, 2.0);
        let rows = sweep_cost(&sc, &[2.0, 3.0], 100, 1).unwrap();
        let r0 =
            crate::reward::stop_reward(&sc.reward, &sc.prior, &sc.grid, 1.0, 0.0, 0.0).unwrap();
        for row in &rows {
            assert_eq!(row.optimal_value, r0);
            assert_eq!(row.lookahead_value, r0);
            assert_eq!(row.ratio, 1.0);
        }
    }

    #[test]
    fn sweep_values_sit_between_stop_reward_and_bound() {
        let sc = scenario(PriorModel::BrownianMotion, 30, 21, 0.05);
        let rows = sweep_cost(&sc, &[0.05], 2_000, 5).unwrap();
        assert!(rows[0].optimal_value > 0.5 && rows[0].optimal_value < 1.0);
        assert!(rows[0].lookahead_value > 0.5 && rows[0].lookahead_value < 1.0);
    }

    #[test]
    fn sweep_optimal_column_non_increasing() {
        let sc = scenario(PriorModel::BrownianMotion, 20, 21, 0.05);
        let rows = sweep_cost(&sc, &[0.05, 0.1, 0.2, 2.0], 2_000, 17).unwrap();
        for w in rows.windows(2) {
            assert!(
                w[1].optimal_value <= w[0].optimal_value,
                "optimal value increased from {} to {}",
                w[0].optimal_value,
                w[1].optimal_value
            );
        }
    }

    #[test]
    fn mean_tau_non_increasing_in_cost() {
        let sc = scenario(PriorModel::BrownianMotion, 20, 21, 0.05);
        let mut prev: Option<EvalReport> = None;
        for cost in [0.05, 0.1, 0.3] {
            let sc_c = Scenario { cost, ..sc.clone() };
            let table =
                ValueTable::build(&sc_c.prior, &sc_c.grid, &sc_c.reward, cost, 0.0, 1.0).unwrap();
            let harness = Harness::with_stops(&sc_c, table.stops().clone()).unwrap();
            let rep = harness.evaluate(&PolicyKind::Optimal(&table), 4_000, 3).unwrap();
            if let Some(p) = &prev {
                let slack = 3.0 * (p.mean_tau.max(rep.mean_tau) + 1.0) / (4_000f64).sqrt();
                assert!(rep.mean_tau <= p.mean_tau + slack);
            }
            prev = Some(rep);
        }
    }

    #[test]
    fn optimal_dominates_lookahead_statistically() {
        let sc = scenario(PriorModel::CompoundPoisson { rate: 20.0 }, 24, 21, 0.05);
        let rows = sweep_cost(&sc, &[0.05], 4_000, 11).unwrap();
        let joint = (rows[0].optimal_se.powi(2) + rows[0].lookahead_se.powi(2)).sqrt();
        assert!(rows[0].optimal_value >= rows[0].lookahead_value - 3.0 * joint);
    }

    #[test]
    fn fractional_budget_interpolates_sample_counts() {
        let sc = scenario(PriorModel::BrownianMotion, 20, 21, 0.05);
        let harness = Harness::new(&sc).unwrap();
        let low = harness.evaluate_fractional_budget(2.0, 2_000, 13).unwrap();
        let mid = harness.evaluate_fractional_budget(2.5, 2_000, 13).unwrap();
        let high = harness.evaluate_fractional_budget(3.0, 2_000, 13).unwrap();
        assert_eq!(low.mean_tau, 2.0);
        assert_eq!(high.mean_tau, 3.0);
        assert!(mid.mean_tau > 2.3 && mid.mean_tau < 2.7, "got {}", mid.mean_tau);
    }

    #[test]
    fn sweep_rejects_bad_cost_lists() {
        let sc = scenario(PriorModel::BrownianMotion, 10, 11, 0.05);
        assert!(sweep_cost(&sc, &[], 10, 0).is_err());
        assert!(sweep_cost(&sc, &[-0.1, 0.2], 10, 0).is_err());
        assert!(sweep_cost(&sc, &[0.2, 0.1], 10, 0).is_err());
    }

    #[test]
    fn csv_has_pinned_header() {
        let rows = vec![SweepRow {
            cost: 0.05,
            optimal_value: 0.8,
            optimal_se: 0.001,
            lookahead_value: 0.79,
            lookahead_se: 0.001,
            ratio: 0.9875,
        }];
        let csv = sweep_csv(&rows);
        assert!(csv.starts_with("c,optimal_value,optimal_se,lookahead_value,lookahead_se,ratio\n"));
        assert_eq!(csv.lines().count(), 2);
    }
}
