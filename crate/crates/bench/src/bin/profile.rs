//! Rough wall-clock timings for the expensive building blocks; used to
//! size experiment defaults, not a benchmark.

use std::time::Instant;

use levelset_core::{Grid, ObservationHistory, PriorModel, RewardSpec, ValueTable};

fn time_build(label: &str, prior: &PriorModel, m: usize, n: usize, cost: f64) {
    let grid = Grid::with_default_range(1.0, m, n, 0.0, prior).unwrap();
    let reward = RewardSpec::Indicator { threshold: 0.0 };
    let t0 = Instant::now();
    let table = ValueTable::build(prior, &grid, &reward, cost, 0.0, 1.0).unwrap();
    let h0 = ObservationHistory::from_endpoints(0.0, 1.0, 0.0, 0.0).unwrap();
    println!(
        "{label}: {:.2}s  V(H0) = {:.6}",
        t0.elapsed().as_secs_f64(),
        table.value_of_history(&h0).unwrap()
    );
}

fn main() {
    let bm = PriorModel::BrownianMotion;
    let cpp = PriorModel::CompoundPoisson { rate: 20.0 };
    time_build("brownian m=50  n=41", &bm, 50, 41, 0.05);
    time_build("brownian m=100 n=41", &bm, 100, 41, 0.05);
    time_build("brownian m=100 n=81", &bm, 100, 81, 0.05);
    time_build("cpp      m=50  n=41", &cpp, 50, 41, 0.05);
    time_build("cpp      m=100 n=81", &cpp, 100, 81, 0.05);
}
