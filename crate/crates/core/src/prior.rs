//! Translation-invariant Markov priors and their discretized bridge
//! conditionals.
//!
//! Every probabilistic quantity downstream reduces to one primitive: the
//! conditional law of the process at an interior point given the two
//! flanking observations (exact by the Markov property). Because both
//! supported priors are translation invariant, that law depends only on
//! the two flanking distances and the two observed values, never on
//! absolute location — which is what lets the solver index its table by
//! gap length alone.
//!
//! Discretization scheme:
//!
//! - Brownian motion: the bridge is Normal with mean
//!   `yL + dxL/(dxL+dxR) * (yR - yL)` and variance `dxL*dxR/(dxL+dxR)`,
//!   discretized by cell-midpoint density times cell width and
//!   renormalized.
//! - Compound Poisson (rate `mu`, standard normal jumps): conditioning on
//!   a continuous endpoint value is ill-posed at zero jumps, so the
//!   conditioning event is the grid cell of width `dy` containing the
//!   endpoint difference `d`. The total jump count N over the span gets
//!   weight `Poisson(mu*s)(N) * P(S_N in cell(d))` (N = 0 contributes
//!   exactly when the cell contains 0); given N, the count K landing left
//!   of the interior point is Binomial(N, dxL/s) and the interior value is
//!   `yL + Normal(d*K/N, K*(N-K)/N)` (a point mass at yL or yL+d for
//!   K in {0, N}). The Poisson mixture is truncated where its tail drops
//!   below 1e-10 and everything is renormalized on the value grid.

use std::sync::{Arc, OnceLock};

use dashmap::DashMap;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{norm_pdf, normal_interval_prob};

/// Poisson mixture truncation: stop once the remaining tail mass is below
/// this (far below any grid-induced error).
const POISSON_TAIL_TOL: f64 = 1e-10;

/// Joint (N, K) mixture components below this normalized weight are
/// skipped; the pmf is renormalized afterwards, so the effect is orders of
/// magnitude below the 1e-12 normalization tolerance.
const COMPONENT_WEIGHT_FLOOR: f64 = 1e-15;

/// Gaussian components are accumulated over cells within this many
/// standard deviations of their mean.
const GAUSS_WINDOW_SDS: f64 = 8.0;

/// Markov prior on the unknown process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorModel {
    /// Standard Brownian motion.
    BrownianMotion,
    /// Compound Poisson process: jumps arrive at `rate` per unit length,
    /// each jump is standard normal.
    CompoundPoisson { rate: f64 },
}

impl PriorModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            PriorModel::BrownianMotion => Ok(()),
            PriorModel::CompoundPoisson { rate } => {
                if *rate > 0.0 && rate.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid(format!(
                        "compound Poisson rate must be positive, got {rate}"
                    )))
                }
            }
        }
    }

    /// Standard deviation of the unconditional increment over `len`.
    pub fn std_over(&self, len: f64) -> f64 {
        match self {
            PriorModel::BrownianMotion => len.sqrt(),
            PriorModel::CompoundPoisson { rate } => (rate * len).sqrt(),
        }
    }
}

/// Discretization of the problem: `m` equal x-steps of width `h` spanning
/// the interval, and `n` equally spaced values symmetric about the
/// classification threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    m: usize,
    h: f64,
    dy: f64,
    center: f64,
    ys: Vec<f64>,
}

impl Grid {
    /// Builds a grid for an interval of length `len` with `m` x-steps and
    /// `n` values covering `center ± half_width`.
    pub fn new(len: f64, m: usize, n: usize, center: f64, half_width: f64) -> Result<Self> {
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::invalid(format!("interval length must be positive, got {len}")));
        }
        if m < 1 {
            return Err(Error::invalid("m must be at least 1".to_string()));
        }
        if n < 3 {
            return Err(Error::invalid(format!("n must be at least 3, got {n}")));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::invalid(format!(
                "value range half-width must be positive, got {half_width}"
            )));
        }
        let dy = 2.0 * half_width / (n - 1) as f64;
        let mid = (n - 1) as f64 / 2.0;
        let ys = (0..n).map(|i| center + (i as f64 - mid) * dy).collect();
        Ok(Grid { m, h: len / m as f64, dy, center, ys })
    }

    /// Default value range: `center ± 6 sigma_max` where `sigma_max` is the
    /// process standard deviation over the whole interval. Tail mass beyond
    /// six sigmas is below discretization error.
    pub fn with_default_range(
        len: f64,
        m: usize,
        n: usize,
        center: f64,
        prior: &PriorModel,
    ) -> Result<Self> {
        Grid::new(len, m, n, center, 6.0 * prior.std_over(len))
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.ys.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn y(&self, i: usize) -> f64 {
        self.ys[i]
    }

    /// Index of the grid value whose cell contains `center`, if any (odd
    /// `n`). Even-sized grids split exactly at the center.
    pub fn center_index(&self) -> Option<usize> {
        let i = (self.ys.len() - 1) / 2;
        ((self.ys[i] - self.center).abs() < 0.25 * self.dy).then_some(i)
    }

    /// Maps a value onto its grid index, requiring it to be on-grid.
    pub fn y_index(&self, y: f64) -> Result<usize> {
        let r = (y - self.ys[0]) / self.dy;
        let i = r.round();
        if i < 0.0 || i >= self.ys.len() as f64 || (y - (self.ys[0] + i * self.dy)).abs() > 1e-6 * self.dy
        {
            return Err(Error::OffGrid { what: "value", value: y });
        }
        Ok(i as usize)
    }

    /// Number of x-steps spanned by `dx`, requiring grid alignment.
    pub fn length_steps(&self, dx: f64) -> Result<usize> {
        let t = dx / self.h;
        let j = t.round();
        if j < 1.0 || (dx - j * self.h).abs() > 1e-6 * self.h {
            return Err(Error::OffGrid { what: "length", value: dx });
        }
        Ok(j as usize)
    }

    /// Like [`Grid::length_steps`] but admits zero offsets.
    pub fn offset_steps(&self, dx: f64) -> Result<usize> {
        if dx.abs() <= 1e-6 * self.h {
            return Ok(0);
        }
        self.length_steps(dx)
    }
}

/// Probability vector over the value grid for the process at one interior
/// point, conditioned on its two flanking observations.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeDistribution {
    probs: Vec<f64>,
}

impl BridgeDistribution {
    /// Wraps a raw probability vector, renormalizing it. Entries must be
    /// nonnegative with a positive sum.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::invalid("bridge probabilities must be nonnegative".to_string()));
        }
        let z: f64 = probs.iter().sum();
        if !(z > 0.0) {
            return Err(Error::invalid("bridge probabilities sum to zero".to_string()));
        }
        Ok(BridgeDistribution { probs: probs.into_iter().map(|p| p / z).collect() })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self, grid: &Grid) -> f64 {
        self.probs.iter().zip(grid.ys()).map(|(p, y)| p * y).sum()
    }

    pub fn variance(&self, grid: &Grid) -> f64 {
        let m = self.mean(grid);
        self.probs.iter().zip(grid.ys()).map(|(p, y)| p * (y - m) * (y - m)).sum()
    }

    /// Inverse-CDF draw of a grid value.
    pub fn sample<R: Rng + ?Sized>(&self, grid: &Grid, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return grid.y(i);
            }
        }
        grid.y(grid.n() - 1)
    }
}

/// Unnormalized bridge weights expressed over value-grid *offsets*
/// `r = i - iL` from the left observation, `r` in `[-(n-1), n-1]`.
///
/// Translation invariance makes this the natural shared object: one kernel
/// serves every (iL, iR) pair with the same index difference. A prefix-sum
/// array supports O(1) windowed sums when the kernel is sliced to the n
/// cells of an actual grid.
#[derive(Debug)]
pub struct BridgeKernel {
    n: usize,
    pub(crate) rel: Vec<f64>,
    pub(crate) prefix: Vec<f64>,
}

impl BridgeKernel {
    fn from_rel(n: usize, rel: Vec<f64>) -> Self {
        debug_assert_eq!(rel.len(), 2 * n - 1);
        let mut prefix = Vec::with_capacity(rel.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for &w in &rel {
            acc += w;
            prefix.push(acc);
        }
        BridgeKernel { n, rel, prefix }
    }

    /// Inclusive `rel` index range covering grid cells when the left
    /// observation sits at grid index `iL`.
    #[inline]
    pub(crate) fn window(&self, i_left: usize) -> (usize, usize) {
        (self.n - 1 - i_left, 2 * self.n - 2 - i_left)
    }

    /// Normalized pmf over the full value grid for left index `iL`.
    pub(crate) fn pmf(&self, i_left: usize) -> BridgeDistribution {
        let (lo, hi) = self.window(i_left);
        let z = self.prefix[hi + 1] - self.prefix[lo];
        debug_assert!(z > 0.0, "bridge kernel has no mass on the grid");
        let probs = self.rel[lo..=hi].iter().map(|&w| w / z).collect();
        BridgeDistribution { probs }
    }
}

/// One Gaussian mixture component discretized to value cells: unit-mass
/// weights `pdf(cell midpoint)/sd * dy` over the window of cells within
/// [`GAUSS_WINDOW_SDS`] standard deviations of the mean, starting at cell
/// offset `first`.
#[derive(Debug)]
pub(crate) struct ComponentVec {
    first: i64,
    weights: Box<[f64]>,
}

fn gaussian_component(n: usize, dy: f64, mean: f64, sd: f64) -> ComponentVec {
    let reach = GAUSS_WINDOW_SDS * sd;
    let r_min = (((mean - reach) / dy).floor() as i64).max(-(n as i64 - 1));
    let r_max = (((mean + reach) / dy).ceil() as i64).min(n as i64 - 1);
    let weights = (r_min..=r_max)
        .map(|r| {
            let z = (r as f64 * dy - mean) / sd;
            norm_pdf(z) / sd * dy
        })
        .collect();
    ComponentVec { first: r_min, weights }
}

fn add_component(rel: &mut [f64], n: usize, weight: f64, comp: &ComponentVec) {
    let base = (comp.first + n as i64 - 1) as usize;
    for (t, w) in comp.weights.iter().enumerate() {
        rel[base + t] += weight * w;
    }
}

/// Lazily filled tables of jump-mixture ingredients that do not depend on
/// the flanking distances: per (value difference, total jump count) cell
/// probabilities, and per (value difference, total count, left count)
/// Gaussian components. One cache serves every split of every layer of a
/// table build; reads after initialization are lock-free.
pub(crate) struct ComponentCache {
    n: usize,
    dy: f64,
    /// Largest total jump count any kernel on this grid can request.
    cap: usize,
    /// Indexed by dd offset: `P(S_N in cell(d))` for N = 1..=cap.
    cells: Vec<OnceLock<Box<[f64]>>>,
    /// Indexed by (dd offset, triangular (count, k)): interior components.
    comps: Vec<OnceLock<ComponentVec>>,
}

#[inline]
fn tri_index(count: usize, k: usize) -> usize {
    debug_assert!(count >= 2 && k >= 1 && k < count);
    (count - 1) * (count - 2) / 2 + (k - 1)
}

impl ComponentCache {
    pub(crate) fn new(prior: &PriorModel, grid: &Grid) -> Self {
        let cap = match prior {
            PriorModel::BrownianMotion => 0,
            PriorModel::CompoundPoisson { rate } => {
                poisson_hard_cap(rate * grid.m() as f64 * grid.h())
            }
        };
        let width = 2 * grid.n() - 1;
        let tri_len = if cap >= 2 { tri_index(cap, cap - 1) + 1 } else { 0 };
        ComponentCache {
            n: grid.n(),
            dy: grid.dy(),
            cap,
            cells: (0..width).map(|_| OnceLock::new()).collect(),
            comps: (0..width * tri_len).map(|_| OnceLock::new()).collect(),
        }
    }

    /// `P(S_N in cell(dd * dy))` for N = 1..=cap.
    fn cell_probs(&self, dd: i64) -> &[f64] {
        let slot = (dd + self.n as i64 - 1) as usize;
        self.cells[slot].get_or_init(|| {
            let d_val = dd as f64 * self.dy;
            let (lo, hi) = (d_val - 0.5 * self.dy, d_val + 0.5 * self.dy);
            (1..=self.cap)
                .map(|count| normal_interval_prob(lo, hi, 0.0, (count as f64).sqrt()))
                .collect()
        })
    }

    fn component(&self, dd: i64, count: usize, k: usize) -> &ComponentVec {
        let tri_len = tri_index(self.cap, self.cap - 1) + 1;
        let slot = (dd + self.n as i64 - 1) as usize * tri_len + tri_index(count, k);
        self.comps[slot].get_or_init(|| {
            let d_val = dd as f64 * self.dy;
            let (nn, kk) = (count as f64, k as f64);
            let mean = d_val * kk / nn;
            let sd = (kk * (nn - kk) / nn).sqrt();
            gaussian_component(self.n, self.dy, mean, sd)
        })
    }
}

/// Builds the bridge kernel for flanking distances of `a_left` and
/// `a_right` x-steps and a value-index difference `dd = iR - iL`.
pub(crate) fn compute_kernel(
    prior: &PriorModel,
    grid: &Grid,
    a_left: usize,
    a_right: usize,
    dd: i64,
) -> BridgeKernel {
    compute_kernel_with(prior, grid, a_left, a_right, dd, None)
}

/// As [`compute_kernel`], drawing jump-mixture components from `cache`
/// when one is supplied. Cached and fresh components are the same pure
/// function of the key, so both paths produce bitwise-identical kernels.
pub(crate) fn compute_kernel_with(
    prior: &PriorModel,
    grid: &Grid,
    a_left: usize,
    a_right: usize,
    dd: i64,
    cache: Option<&ComponentCache>,
) -> BridgeKernel {
    debug_assert!(a_left >= 1 && a_right >= 1);
    let n = grid.n();
    let dy = grid.dy();
    let d_val = dd as f64 * dy;
    let mut rel = vec![0.0; 2 * n - 1];
    match prior {
        PriorModel::BrownianMotion => {
            let frac = a_left as f64 / (a_left + a_right) as f64;
            let mean = frac * d_val;
            let var = grid.h() * (a_left as f64 * a_right as f64) / (a_left + a_right) as f64;
            add_component(&mut rel, n, 1.0, &gaussian_component(n, dy, mean, var.sqrt()));
        }
        PriorModel::CompoundPoisson { rate } => {
            let span = (a_left + a_right) as f64 * grid.h();
            let lam = rate * span;
            let (lo, hi) = (d_val - 0.5 * dy, d_val + 0.5 * dy);
            let weights = match cache {
                Some(cache) => {
                    let probs = cache.cell_probs(dd);
                    poisson_cell_weights(lam, dd == 0, |count| probs[count - 1])
                }
                None => poisson_cell_weights(lam, dd == 0, |count| {
                    normal_interval_prob(lo, hi, 0.0, (count as f64).sqrt())
                }),
            };
            let p_left = a_left as f64 / (a_left + a_right) as f64;
            if weights.iter().all(|&w| w == 0.0) {
                // The conditioning event underflowed entirely (difference
                // absurdly far in the tail); fall back to an atom on the
                // straight-line interpolant so the pmf still normalizes.
                let r = (p_left * dd as f64).round() as i64;
                rel[(r + n as i64 - 1) as usize] = 1.0;
            } else {
                accumulate_jump_mixture(&mut rel, n, grid, dd, &weights, p_left, cache);
            }
        }
    }
    BridgeKernel::from_rel(n, rel)
}

/// Largest total jump count the Poisson truncation can reach at rate
/// `lam`; monotone in `lam`, so evaluating it at the full-interval span
/// bounds every kernel on the grid.
fn poisson_hard_cap(lam: f64) -> usize {
    (lam + 12.0 * lam.sqrt() + 30.0).ceil() as usize
}

/// Normalized weights over the total jump count N: Poisson(lam) times the
/// probability that a sum of N standard normals lands in the width-`dy`
/// cell around the endpoint difference (N = 0 contributes exactly when
/// that cell contains zero; `cell(count)` supplies the N >= 1 terms).
/// Truncated once the Poisson tail drops below `POISSON_TAIL_TOL`; kept
/// running until some weight is positive so the result normalizes however
/// far the difference sits in the tail.
fn poisson_cell_weights(lam: f64, cell_has_zero: bool, cell: impl Fn(usize) -> f64) -> Vec<f64> {
    let hard_cap = poisson_hard_cap(lam);
    let mut pois = (-lam).exp();
    let mut cum = pois;
    let mut total = 0.0;
    let mut w = Vec::with_capacity(hard_cap + 1);
    w.push(if cell_has_zero { pois } else { 0.0 });
    total += w[0];
    let mut count = 0usize;
    while (cum < 1.0 - POISSON_TAIL_TOL || total <= 0.0) && count < hard_cap {
        count += 1;
        pois *= lam / count as f64;
        cum += pois;
        let term = pois * cell(count);
        w.push(term);
        total += term;
    }
    if total > 0.0 {
        for wi in &mut w {
            *wi /= total;
        }
    }
    w
}

/// Accumulates the (N, K) jump mixture: K of the N jumps land left of the
/// interior point with Binomial(N, p_left) probability; conditioned on the
/// span difference, the interior offset is Normal(d*K/N, K*(N-K)/N), a
/// point mass at offset 0 (K = 0) or `dd` (K = N).
fn accumulate_jump_mixture(
    rel: &mut [f64],
    n: usize,
    grid: &Grid,
    dd: i64,
    weights: &[f64],
    p_left: f64,
    cache: Option<&ComponentCache>,
) {
    let origin = n - 1;
    rel[origin] += weights[0];
    let dd_idx = (dd + n as i64 - 1) as usize;
    let dy = grid.dy();
    let d_val = dd as f64 * dy;
    let mut binom = vec![0.0; weights.len()];
    for (count, &w_n) in weights.iter().enumerate().skip(1) {
        if w_n <= 0.0 {
            continue;
        }
        let nn = count as f64;
        fill_binomial(&mut binom[..=count], p_left);
        for (k, &b) in binom[..=count].iter().enumerate() {
            let wt = w_n * b;
            if wt < COMPONENT_WEIGHT_FLOOR {
                continue;
            }
            if k == 0 {
                rel[origin] += wt;
            } else if k == count {
                rel[dd_idx] += wt;
            } else if let Some(cache) = cache {
                add_component(rel, n, wt, &cache.component(dd, count, k));
            } else {
                let kk = k as f64;
                let mean = d_val * kk / nn;
                let sd = (kk * (nn - kk) / nn).sqrt();
                add_component(rel, n, wt, &gaussian_component(n, dy, mean, sd));
            }
        }
    }
}

/// Fills `buf` with Binomial(buf.len()-1, p) probabilities, recursing from
/// the high-probability end so the starting power never underflows.
fn fill_binomial(buf: &mut [f64], p: f64) {
    let count = buf.len() - 1;
    if p <= 0.5 {
        let ratio = p / (1.0 - p);
        buf[0] = (1.0 - p).powi(count as i32);
        for k in 0..count {
            buf[k + 1] = buf[k] * (count - k) as f64 / (k + 1) as f64 * ratio;
        }
    } else {
        let ratio = (1.0 - p) / p;
        buf[count] = p.powi(count as i32);
        for k in (1..=count).rev() {
            buf[k - 1] = buf[k] * k as f64 / (count - k + 1) as f64 * ratio;
        }
    }
}

/// Concurrent cache of bridge kernels for one (prior, grid) pair, keyed by
/// (left steps, right steps, index difference). Kernels are pure functions
/// of the key, so racing inserts are harmless.
pub struct KernelCache {
    prior: PriorModel,
    grid: Grid,
    components: ComponentCache,
    map: DashMap<(u32, u32, i32), Arc<BridgeKernel>>,
}

impl KernelCache {
    pub fn new(prior: PriorModel, grid: Grid) -> Self {
        let components = ComponentCache::new(&prior, &grid);
        KernelCache { prior, grid, components, map: DashMap::new() }
    }

    pub fn prior(&self) -> &PriorModel {
        &self.prior
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub(crate) fn kernel(&self, a_left: usize, a_right: usize, dd: i64) -> Arc<BridgeKernel> {
        let key = (a_left as u32, a_right as u32, dd as i32);
        if let Some(k) = self.map.get(&key) {
            return Arc::clone(&k);
        }
        let k = Arc::new(compute_kernel_with(
            &self.prior,
            &self.grid,
            a_left,
            a_right,
            dd,
            Some(&self.components),
        ));
        self.map.entry(key).or_insert(k).clone()
    }
}

fn resolve(
    grid: &Grid,
    dx_left: f64,
    dx_right: f64,
    y_left: f64,
    y_right: f64,
) -> Result<(usize, usize, usize, usize)> {
    let a_left = grid.length_steps(dx_left)?;
    let a_right = grid.length_steps(dx_right)?;
    let i_left = grid.y_index(y_left)?;
    let i_right = grid.y_index(y_right)?;
    Ok((a_left, a_right, i_left, i_right))
}

/// Conditional pmf of the process value at the point `dx_left` right of
/// the left observation, given flanking observations `(dx_left, y_left)`
/// and `(dx_right, y_right)` away on either side.
pub fn bridge_pmf(
    prior: &PriorModel,
    grid: &Grid,
    dx_left: f64,
    dx_right: f64,
    y_left: f64,
    y_right: f64,
) -> Result<BridgeDistribution> {
    prior.validate()?;
    let (al, ar, il, ir) = resolve(grid, dx_left, dx_right, y_left, y_right)?;
    let kernel = compute_kernel(prior, grid, al, ar, ir as i64 - il as i64);
    Ok(kernel.pmf(il))
}

/// One reproducible draw from [`bridge_pmf`]; the caller owns the RNG
/// stream.
pub fn bridge_sample<R: Rng + ?Sized>(
    prior: &PriorModel,
    grid: &Grid,
    dx_left: f64,
    dx_right: f64,
    y_left: f64,
    y_right: f64,
    rng: &mut R,
) -> Result<f64> {
    let pmf = bridge_pmf(prior, grid, dx_left, dx_right, y_left, y_right)?;
    Ok(pmf.sample(grid, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_grid(m: usize, n: usize, half_width: f64) -> Grid {
        Grid::new(1.0, m, n, 0.0, half_width).unwrap()
    }

    #[test]
    fn grid_is_symmetric_about_center() {
        let g = unit_grid(10, 81, 6.0);
        let n = g.n();
        for i in 0..n {
            assert!((g.y(i) + g.y(n - 1 - i)).abs() < 1e-12);
        }
        assert_eq!(g.center_index(), Some(40));
        assert_eq!(g.y(40), 0.0);
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(Grid::new(1.0, 0, 5, 0.0, 1.0).is_err());
        assert!(Grid::new(1.0, 5, 2, 0.0, 1.0).is_err());
        assert!(Grid::new(1.0, 5, 5, 0.0, 0.0).is_err());
        assert!(Grid::new(0.0, 5, 5, 0.0, 1.0).is_err());
    }

    #[test]
    fn brownian_bridge_moments_match_closed_form() {
        let g = unit_grid(2, 81, 6.0);
        let pmf = bridge_pmf(&PriorModel::BrownianMotion, &g, 0.5, 0.5, 0.0, 0.0).unwrap();
        // Closed form: mean yL + dxL/s (yR - yL) = 0, variance dxL dxR / s = 0.25.
        assert!(pmf.mean(&g).abs() < 1e-9);
        assert!((pmf.variance(&g) - 0.25).abs() < 2.0 * g.dy() * g.dy());
        let total: f64 = pmf.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn brownian_bridge_concentrates_near_close_observation() {
        let g = unit_grid(100, 81, 6.0);
        let h = g.h();
        let pmf = bridge_pmf(&PriorModel::BrownianMotion, &g, h, 99.0 * h, 0.0, 0.0).unwrap();
        let argmax = pmf
            .probs()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, g.center_index().unwrap());
    }

    #[test]
    fn off_grid_inputs_are_rejected() {
        let g = unit_grid(10, 11, 1.0);
        let p = PriorModel::BrownianMotion;
        assert!(matches!(
            bridge_pmf(&p, &g, 0.15, 0.5, 0.0, 0.0),
            Err(Error::OffGrid { what: "length", .. })
        ));
        assert!(matches!(
            bridge_pmf(&p, &g, 0.1, 0.5, 0.07, 0.0),
            Err(Error::OffGrid { what: "value", .. })
        ));
    }

    #[test]
    fn sampling_is_reproducible() {
        let g = unit_grid(4, 41, 6.0);
        let p = PriorModel::CompoundPoisson { rate: 20.0 };
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            bridge_sample(&p, &g, 0.5, 0.5, 0.0, 0.0, &mut rng).unwrap()
        };
        assert_eq!(draw(7), draw(7));
    }

    #[test]
    fn sample_mean_obeys_clt_bound() {
        let g = unit_grid(2, 81, 6.0);
        let p = PriorModel::BrownianMotion;
        let pmf = bridge_pmf(&p, &g, 0.5, 0.5, 0.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let reps = 100_000;
        let mean: f64 =
            (0..reps).map(|_| pmf.sample(&g, &mut rng)).sum::<f64>() / reps as f64;
        // Bridge sd is 0.5; allow three sigmas of the sample mean.
        assert!(mean.abs() < 3.0 * 0.5 / (reps as f64).sqrt());
    }

    #[test]
    fn empirical_pmf_matches_bridge_pmf() {
        let g = unit_grid(2, 41, 6.0);
        let p = PriorModel::BrownianMotion;
        let pmf = bridge_pmf(&p, &g, 0.5, 0.5, 0.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let reps = 1_000_000usize;
        let mut counts = vec![0usize; g.n()];
        for _ in 0..reps {
            let y = pmf.sample(&g, &mut rng);
            counts[g.y_index(y).unwrap()] += 1;
        }
        let tv: f64 = pmf
            .probs()
            .iter()
            .zip(&counts)
            .map(|(p, &c)| (p - c as f64 / reps as f64).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 5e-3, "total variation {tv} too large");
    }

    #[test]
    fn compound_poisson_rare_jumps_pin_left_value() {
        let g = unit_grid(2, 41, 6.0);
        let p = PriorModel::CompoundPoisson { rate: 0.1 };
        let pmf = bridge_pmf(&p, &g, 0.5, 0.5, 0.0, 0.0).unwrap();
        // With almost surely zero jumps the conditional mass sits at yL.
        assert!(pmf.probs()[g.center_index().unwrap()] > 0.95);
    }

    #[test]
    fn compound_poisson_extreme_difference_still_normalizes() {
        let g = unit_grid(2, 41, 6.0);
        let p = PriorModel::CompoundPoisson { rate: 20.0 };
        let n = g.n();
        let pmf =
            bridge_pmf(&p, &g, 0.5, 0.5, g.y(0), g.y(n - 1)).unwrap();
        let total: f64 = pmf.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(pmf.probs().iter().all(|&q| q >= 0.0));
    }

    #[test]
    fn equal_endpoint_pmf_is_exactly_symmetric() {
        let g = unit_grid(10, 41, 6.0);
        for prior in [
            PriorModel::BrownianMotion,
            PriorModel::CompoundPoisson { rate: 20.0 },
        ] {
            let pmf = bridge_pmf(&prior, &g, 0.3, 0.7, 0.0, 0.0).unwrap();
            let q = pmf.probs();
            let n = g.n();
            for i in 0..n {
                assert_eq!(q[i], q[n - 1 - i], "asymmetry at {i} for {prior:?}");
            }
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn priors() -> impl Strategy<Value = PriorModel> {
            prop_oneof![
                Just(PriorModel::BrownianMotion),
                (0.5f64..30.0).prop_map(|rate| PriorModel::CompoundPoisson { rate }),
            ]
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]
            #[test]
            fn pmf_normalizes_and_mirrors(
                prior in priors(),
                a_left in 1usize..8,
                a_right in 1usize..8,
                il in 0usize..21,
                ir in 0usize..21,
            ) {
                let g = Grid::new(1.0, 8, 21, 0.0, 5.0).unwrap();
                let kernel = compute_kernel(&prior, &g, a_left, a_right, ir as i64 - il as i64);
                let pmf = kernel.pmf(il);
                let total: f64 = pmf.probs().iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                prop_assert!(pmf.probs().iter().all(|&p| p >= 0.0));

                // Viewing the bridge from the other side leaves the
                // conditional law unchanged (symmetric increments).
                let swapped = compute_kernel(&prior, &g, a_right, a_left, il as i64 - ir as i64);
                let from_right = swapped.pmf(ir);
                for i in 0..g.n() {
                    prop_assert!((pmf.probs()[i] - from_right.probs()[i]).abs() < 1e-12);
                }
            }
        }
    }
}
