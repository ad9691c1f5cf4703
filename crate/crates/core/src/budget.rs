//! Expected-budget-constrained values via the Lagrangian dual.
//!
//! The cost-per-sample value `V(H, lambda)`, viewed as a function of the
//! cost, is a supremum of functions linear in `lambda` and therefore
//! convex; `g(lambda) = V(H0, lambda) + lambda * T` inherits convexity, and
//! its infimum over positive costs equals the optimal value under a
//! constraint on the *expected* number of samples. The minimization runs by
//! golden-section search, which needs nothing beyond convexity — `V` is
//! piecewise linear in `lambda` (finitely many policies on a finite grid),
//! so derivative-based methods would be unreliable.
//!
//! The hard-budget value is sandwiched: the dual value bounds it from
//! above, a fixed-budget lookahead policy estimates it from below.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sim::{Harness, Scenario};
use crate::solver::ValueTable;

/// Bounds for one expected-sample budget.
#[derive(Debug, Clone)]
pub struct BudgetResult {
    /// Expected-sample budget T.
    pub budget: f64,
    /// Minimizing cost found by the dual search.
    pub lambda_star: f64,
    /// Dual value: the expected-budget optimum, an upper bound for the
    /// hard-budget value.
    pub upper_value: f64,
    /// Monte Carlo estimate of the fixed-budget lookahead policy, a lower
    /// bound for the hard-budget value.
    pub lower_value: f64,
    pub lower_se: f64,
    /// The minimizer hit the bracket floor, so the budget may exceed the
    /// range the dual can certify; treat `upper_value` with suspicion.
    pub lambda_at_floor: bool,
}

/// Reusable dual-program solver: value tables are cached per cost (keyed
/// at a tenth of the search tolerance) because each table build dominates
/// everything else.
pub struct DualSolver<'s> {
    scenario: &'s Scenario,
    tol: f64,
    tables: HashMap<i64, Arc<ValueTable>>,
    harness: Harness<'s>,
}

impl<'s> DualSolver<'s> {
    /// `tol` is the golden-section termination width on lambda.
    pub fn new(scenario: &'s Scenario, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::invalid("tolerance must be positive".to_string()));
        }
        Ok(DualSolver { scenario, tol, tables: HashMap::new(), harness: Harness::new(scenario)? })
    }

    fn table_at(&mut self, lambda: f64) -> Result<Arc<ValueTable>> {
        let key = (lambda / (self.tol / 10.0)).round() as i64;
        if let Some(t) = self.tables.get(&key) {
            return Ok(Arc::clone(t));
        }
        let sc = self.scenario;
        let table = Arc::new(ValueTable::build(
            &sc.prior,
            &sc.grid,
            &sc.reward,
            lambda,
            sc.initial.a(),
            sc.initial.b(),
        )?);
        self.tables.insert(key, Arc::clone(&table));
        Ok(table)
    }

    /// `V(H0, lambda) + lambda * T`.
    pub fn dual_value(&mut self, budget: f64, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
        }
        if !(budget >= 0.0) {
            return Err(Error::invalid(format!("budget must be nonnegative, got {budget}")));
        }
        let table = self.table_at(lambda)?;
        Ok(table.value_of_history(&self.scenario.initial)? + lambda * budget)
    }

    /// Minimizes the dual over `bracket` by golden-section search and
    /// estimates the matching lower bound by simulating the fixed-budget
    /// lookahead policy (fractional budgets are randomized between the
    /// neighboring integers).
    pub fn solve(
        &mut self,
        budget: f64,
        bracket: (f64, f64),
        reps: usize,
        seed: u64,
    ) -> Result<BudgetResult> {
        let (mut lo, mut hi) = bracket;
        if !(0.0 < lo && lo < hi) {
            return Err(Error::invalid(format!("invalid bracket ({lo}, {hi})")));
        }
        const INV_PHI2: f64 = 0.381_966_011_250_105_2; // 2 - golden ratio
        let mut best = (f64::INFINITY, lo);
        let probe = |s: &mut Self, lambda: f64, best: &mut (f64, f64)| -> Result<f64> {
            let g = s.dual_value(budget, lambda)?;
            if g < best.0 {
                *best = (g, lambda);
            }
            Ok(g)
        };
        let mut x1 = lo + INV_PHI2 * (hi - lo);
        let mut x2 = hi - INV_PHI2 * (hi - lo);
        let mut f1 = probe(self, x1, &mut best)?;
        let mut f2 = probe(self, x2, &mut best)?;
        while hi - lo > self.tol {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = lo + INV_PHI2 * (hi - lo);
                f1 = probe(self, x1, &mut best)?;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = hi - INV_PHI2 * (hi - lo);
                f2 = probe(self, x2, &mut best)?;
            }
        }
        let lower = self.harness.evaluate_fractional_budget(budget, reps, seed)?;
        Ok(BudgetResult {
            budget,
            lambda_star: best.1,
            upper_value: best.0,
            lower_value: lower.mean_performance,
            lower_se: lower.std_error,
            lambda_at_floor: best.1 - bracket.0 <= self.tol,
        })
    }

    /// Solves a whole budget sweep, then tightens every upper value to the
    /// minimum of the dual over the union of all probed costs. The refined
    /// values inherit exact monotonicity and concavity in T from being a
    /// pointwise minimum of linear functions.
    pub fn sweep(
        &mut self,
        budgets: &[f64],
        bracket: (f64, f64),
        reps: usize,
        seed: u64,
    ) -> Result<Vec<BudgetResult>> {
        let mut results = Vec::with_capacity(budgets.len());
        for &t in budgets {
            results.push(self.solve(t, bracket, reps, seed)?);
        }
        let probed: Vec<(f64, f64)> = self
            .tables
            .values()
            .map(|table| {
                let v = table.value_of_history(&self.scenario.initial)?;
                Ok((table.cost(), v))
            })
            .collect::<Result<_>>()?;
        for r in &mut results {
            for &(lambda, v) in &probed {
                let g = v + lambda * r.budget;
                if g < r.upper_value {
                    r.upper_value = g;
                    r.lambda_star = lambda;
                }
            }
        }
        Ok(results)
    }
}

/// One-shot dual evaluation.
pub fn dual_value(scenario: &Scenario, budget: f64, lambda: f64) -> Result<f64> {
    DualSolver::new(scenario, 1e-3)?.dual_value(budget, lambda)
}

/// One-shot expected-budget solve; see [`DualSolver::solve`].
pub fn solve_v1(
    scenario: &Scenario,
    budget: f64,
    bracket: (f64, f64),
    tol: f64,
    reps: usize,
    seed: u64,
) -> Result<BudgetResult> {
    DualSolver::new(scenario, tol)?.solve(budget, bracket, reps, seed)
}

/// CSV of the expected-budget curve: `T,lambda_star,value`.
pub fn expected_budget_csv(results: &[BudgetResult]) -> String {
    let mut out = String::from("T,lambda_star,value\n");
    for r in results {
        out.push_str(&format!("{},{},{}\n", r.budget, r.lambda_star, r.upper_value));
    }
    out
}

/// CSV of the hard-budget sandwich: `T,lower,lower_se,upper`.
pub fn hard_budget_csv(results: &[BudgetResult]) -> String {
    let mut out = String::from("T,lower,lower_se,upper\n");
    for r in results {
        out.push_str(&format!("{},{},{},{}\n", r.budget, r.lower_value, r.lower_se, r.upper_value));
    }
    out
}
