//! The value-table dynamic program.
//!
//! Translation invariance collapses the state space to two-observation
//! gaps anchored at zero, so the whole problem is captured by a 3-D table
//! `V[gap length in steps][left value index][right value index]` together
//! with a same-shape action table. Layer `j` is computed from layers
//! `1..j-1` only: the value of sampling at interior split `j'` decomposes
//! into the two sub-gap values
//!
//! `Q(j') = E[ V[j'][yL][Y'] + V[j-j'][Y'][yR] ] - c`
//!
//! with `Y'` drawn from the bridge conditional, and the entry is the max
//! of the stop reward and the best split. Candidate samples are interior
//! splits only: re-measuring an already observed endpoint leaves the
//! history unchanged and pays `c`, so it is never optimal — excluding the
//! endpoints is exact, not an approximation.
//!
//! Tie-breaking is deterministic: stopping wins over sampling at equal
//! value, and the leftmost split wins among equal splits. Comparisons are
//! exact float comparisons; tolerances appear only in tests.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::ObservationHistory;
use crate::prior::{compute_kernel, compute_kernel_with, BridgeKernel, ComponentCache, Grid, PriorModel};
use crate::reward::{stop_reward_with, RewardSpec};

const FILE_MAGIC: &[u8; 4] = b"LSVT";
const FILE_VERSION: u32 = 1;
const ACTION_STOP: i32 = -1;

/// Decision recorded for a table entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Stop,
    /// Sample at the interior grid point this many steps from the left
    /// observation.
    Split(usize),
}

/// Everything that determines a table, recorded alongside it so other
/// commands can validate and reuse the build configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub version: u32,
    pub prior: PriorModel,
    pub reward: RewardSpec,
    pub cost: f64,
    pub a: f64,
    pub b: f64,
    pub grid: Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Shape {
    n: usize,
    m: usize,
}

impl Shape {
    #[inline]
    fn idx(&self, j: usize, i_left: usize, i_right: usize) -> usize {
        (j * self.n + i_left) * self.n + i_right
    }

    fn len(&self) -> usize {
        (self.m + 1) * self.n * self.n
    }
}

/// Expected stop rewards for every (gap length, left value, right value)
/// state. Cost-free, so heuristic policies can be evaluated without
/// building a full value table.
#[derive(Debug, Clone, PartialEq)]
pub struct StopTable {
    shape: Shape,
    s: Vec<f64>,
}

impl StopTable {
    /// Builds the stop-reward table for one (prior, grid, reward) triple.
    pub fn build(prior: &PriorModel, grid: &Grid, reward: &RewardSpec) -> Result<Self> {
        prior.validate()?;
        reward.validate()?;
        check_threshold(grid, reward)?;
        let shape = Shape { n: grid.n(), m: grid.m() };
        let mut s = vec![0.0; shape.len()];
        let components = ComponentCache::new(prior, grid);
        for j in 1..=grid.m() {
            let kernels = LayerKernels::build(prior, grid, j, &components);
            let layer = layer_stops(grid, reward, j, &kernels);
            s[shape.idx(j, 0, 0)..shape.idx(j, 0, 0) + grid.n() * grid.n()]
                .copy_from_slice(&layer);
        }
        Ok(StopTable { shape, s })
    }

    #[inline]
    pub fn stop(&self, j: usize, i_left: usize, i_right: usize) -> f64 {
        self.s[self.shape.idx(j, i_left, i_right)]
    }

    /// Sum of gap stop rewards for a grid-aligned history.
    pub fn stop_of_history(&self, grid: &Grid, h: &ObservationHistory) -> Result<f64> {
        fold_gaps(grid, h, |j, il, ir| self.stop(j, il, ir))
    }
}

/// The solved table: values, argmax actions, and the stop rewards they
/// were compared against.
#[derive(Debug)]
pub struct ValueTable {
    meta: TableMeta,
    shape: Shape,
    v: Vec<f64>,
    actions: Vec<i32>,
    stops: StopTable,
}

/// Bridge kernels for all splits of one layer, indexed by (split, value
/// index difference). Dropped when the layer is done; no reuse is possible
/// across layers because the flanking distances change.
pub(crate) struct LayerKernels {
    n: usize,
    store: Vec<Arc<BridgeKernel>>,
}

impl LayerKernels {
    pub(crate) fn build(
        prior: &PriorModel,
        grid: &Grid,
        j: usize,
        components: &ComponentCache,
    ) -> Self {
        let n = grid.n();
        let width = 2 * n - 1;
        let store: Vec<Arc<BridgeKernel>> = (0..(j.saturating_sub(1)) * width)
            .into_par_iter()
            .map(|t| {
                let split = t / width + 1;
                let dd = (t % width) as i64 - (n as i64 - 1);
                Arc::new(compute_kernel_with(prior, grid, split, j - split, dd, Some(components)))
            })
            .collect();
        LayerKernels { n, store }
    }

    #[inline]
    pub(crate) fn get(&self, split: usize, dd: i64) -> &Arc<BridgeKernel> {
        let width = 2 * self.n - 1;
        &self.store[(split - 1) * width + (dd + self.n as i64 - 1) as usize]
    }
}

fn layer_stops(grid: &Grid, reward: &RewardSpec, j: usize, kernels: &LayerKernels) -> Vec<f64> {
    let n = grid.n();
    (0..n * n)
        .into_par_iter()
        .map(|t| {
            let (il, ir) = (t / n, t % n);
            stop_reward_with(reward, grid, j, il, ir, |split, _, dd| {
                Arc::clone(kernels.get(split, dd))
            })
        })
        .collect()
}

fn check_threshold(grid: &Grid, reward: &RewardSpec) -> Result<()> {
    if (grid.center() - reward.threshold()).abs() > 1e-9 * grid.dy() {
        return Err(Error::invalid(format!(
            "value grid must be centered on the classification threshold: grid center {}, threshold {}",
            grid.center(),
            reward.threshold()
        )));
    }
    Ok(())
}

fn fold_gaps(
    grid: &Grid,
    h: &ObservationHistory,
    mut f: impl FnMut(usize, usize, usize) -> f64,
) -> Result<f64> {
    let mut acc = 0.0;
    for (left, right) in h.gaps() {
        let j = grid.length_steps(right.x - left.x)?;
        if j > grid.m() {
            return Err(Error::OffGrid { what: "gap length", value: right.x - left.x });
        }
        acc += f(j, grid.y_index(left.y)?, grid.y_index(right.y)?);
    }
    Ok(acc)
}

impl ValueTable {
    /// Runs the full dynamic program for one configuration.
    ///
    /// Layers are computed in increasing gap length; within a layer all
    /// (left, right) value pairs are independent and evaluated in
    /// parallel. Results are identical whatever the thread count: each
    /// entry's inner sums run sequentially in a fixed order.
    pub fn build(
        prior: &PriorModel,
        grid: &Grid,
        reward: &RewardSpec,
        cost: f64,
        a: f64,
        b: f64,
    ) -> Result<Self> {
        prior.validate()?;
        reward.validate()?;
        check_threshold(grid, reward)?;
        if !(cost > 0.0) || !cost.is_finite() {
            return Err(Error::invalid("cost must be positive".to_string()));
        }
        if ((b - a) - grid.m() as f64 * grid.h()).abs() > 1e-9 * grid.h() {
            return Err(Error::invalid(format!(
                "interval [{a}, {b}] does not match grid span {}",
                grid.m() as f64 * grid.h()
            )));
        }
        let n = grid.n();
        let shape = Shape { n, m: grid.m() };
        let mut v = vec![0.0; shape.len()];
        let mut vt = vec![0.0; shape.len()]; // transposed layers: vt[j][iR][iL]
        let mut s = vec![0.0; shape.len()];
        let mut actions = vec![ACTION_STOP; shape.len()];
        let components = ComponentCache::new(prior, grid);

        for j in 1..=grid.m() {
            let kernels = LayerKernels::build(prior, grid, j, &components);
            let stops = layer_stops(grid, reward, j, &kernels);
            let entries: Vec<(f64, i32)> = (0..n * n)
                .into_par_iter()
                .map(|t| {
                    let (il, ir) = (t / n, t % n);
                    let stop = stops[t];
                    let mut best_q = f64::NEG_INFINITY;
                    let mut best_split = 0usize;
                    let dd = ir as i64 - il as i64;
                    for split in 1..j {
                        let k = kernels.get(split, dd);
                        let (lo, hi) = k.window(il);
                        let z = k.prefix[hi + 1] - k.prefix[lo];
                        let rel = &k.rel[lo..=hi];
                        let vl = &v[shape.idx(split, il, 0)..shape.idx(split, il, 0) + n];
                        let vr = &vt[shape.idx(j - split, ir, 0)..shape.idx(j - split, ir, 0) + n];
                        let mut num = 0.0;
                        for ((w, l), r) in rel.iter().zip(vl).zip(vr) {
                            num += w * (l + r);
                        }
                        let q = num / z - cost;
                        if q > best_q {
                            best_q = q;
                            best_split = split;
                        }
                    }
                    if best_split == 0 || stop >= best_q {
                        (stop, ACTION_STOP)
                    } else {
                        (best_q, best_split as i32)
                    }
                })
                .collect();
            let base = shape.idx(j, 0, 0);
            for (t, (val, act)) in entries.into_iter().enumerate() {
                v[base + t] = val;
                actions[base + t] = act;
            }
            s[base..base + n * n].copy_from_slice(&stops);
            for il in 0..n {
                for ir in 0..n {
                    vt[base + ir * n + il] = v[base + il * n + ir];
                }
            }
        }

        Ok(ValueTable {
            meta: TableMeta {
                version: FILE_VERSION,
                prior: prior.clone(),
                reward: reward.clone(),
                cost,
                a,
                b,
                grid: grid.clone(),
            },
            shape,
            v,
            actions,
            stops: StopTable { shape, s },
        })
    }

    pub fn meta(&self) -> &TableMeta {
        &self.meta
    }

    pub fn grid(&self) -> &Grid {
        &self.meta.grid
    }

    pub fn cost(&self) -> f64 {
        self.meta.cost
    }

    pub fn stops(&self) -> &StopTable {
        &self.stops
    }

    #[inline]
    pub fn value(&self, j: usize, i_left: usize, i_right: usize) -> f64 {
        self.v[self.shape.idx(j, i_left, i_right)]
    }

    #[inline]
    pub fn stop(&self, j: usize, i_left: usize, i_right: usize) -> f64 {
        self.stops.stop(j, i_left, i_right)
    }

    #[inline]
    pub fn action(&self, j: usize, i_left: usize, i_right: usize) -> Action {
        match self.actions[self.shape.idx(j, i_left, i_right)] {
            ACTION_STOP => Action::Stop,
            split => Action::Split(split as usize),
        }
    }

    /// Sum of per-gap values for a grid-aligned history: by the value
    /// decomposition this is the value of the whole history.
    pub fn value_of_history(&self, h: &ObservationHistory) -> Result<f64> {
        fold_gaps(self.grid(), h, |j, il, ir| self.value(j, il, ir))
    }

    /// Sum of per-gap stop rewards for a grid-aligned history.
    pub fn stop_of_history(&self, h: &ObservationHistory) -> Result<f64> {
        self.stops.stop_of_history(self.grid(), h)
    }

    /// Recomputes the split Q-values and stop reward entering one entry's
    /// max, exactly as the build did.
    pub fn q_values(&self, i_left: usize, i_right: usize, j: usize) -> Result<(Vec<f64>, f64)> {
        let n = self.shape.n;
        if i_left >= n || i_right >= n || j == 0 || j > self.shape.m {
            return Err(Error::invalid(format!(
                "table index out of range: ({i_left}, {i_right}, {j})"
            )));
        }
        let grid = self.grid();
        let dd = i_right as i64 - i_left as i64;
        let mut qs = Vec::with_capacity(j.saturating_sub(1));
        for split in 1..j {
            let k = compute_kernel(&self.meta.prior, grid, split, j - split, dd);
            let (lo, hi) = k.window(i_left);
            let z = k.prefix[hi + 1] - k.prefix[lo];
            let mut num = 0.0;
            for (t, idx) in (lo..=hi).enumerate() {
                num += k.rel[idx] * (self.value(split, i_left, t) + self.value(j - split, t, i_right));
            }
            qs.push(num / z - self.meta.cost);
        }
        Ok((qs, self.stop(j, i_left, i_right)))
    }

    /// Serializes the table: a JSON header followed by the raw arrays in
    /// little-endian layer-major order. The build is deterministic, so
    /// identical configurations produce byte-identical files.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(FILE_MAGIC)?;
        w.write_all(&FILE_VERSION.to_le_bytes())?;
        let header = serde_json::to_vec(&self.meta)?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        w.write_all(&(self.v.len() as u64).to_le_bytes())?;
        for x in &self.v {
            w.write_all(&x.to_le_bytes())?;
        }
        for x in &self.actions {
            w.write_all(&x.to_le_bytes())?;
        }
        for x in &self.stops.s {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != FILE_MAGIC {
            return Err(Error::Format("bad magic bytes".to_string()));
        }
        let mut u32buf = [0u8; 4];
        r.read_exact(&mut u32buf)?;
        let version = u32::from_le_bytes(u32buf);
        if version != FILE_VERSION {
            return Err(Error::Format(format!("unsupported table version {version}")));
        }
        let mut u64buf = [0u8; 8];
        r.read_exact(&mut u64buf)?;
        let header_len = u64::from_le_bytes(u64buf) as usize;
        let mut header = vec![0u8; header_len];
        r.read_exact(&mut header)?;
        let meta: TableMeta = serde_json::from_slice(&header)?;
        let shape = Shape { n: meta.grid.n(), m: meta.grid.m() };
        r.read_exact(&mut u64buf)?;
        let len = u64::from_le_bytes(u64buf) as usize;
        if len != shape.len() {
            return Err(Error::Format(format!(
                "array length {len} does not match grid shape {}",
                shape.len()
            )));
        }
        let mut f64buf = [0u8; 8];
        let mut read_f64s = |r: &mut BufReader<File>| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(len);
            for _ in 0..len {
                r.read_exact(&mut f64buf)?;
                out.push(f64::from_le_bytes(f64buf));
            }
            Ok(out)
        };
        let v = read_f64s(&mut r)?;
        let mut actions = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut u32buf)?;
            actions.push(i32::from_le_bytes(u32buf));
        }
        let s = read_f64s(&mut r)?;
        Ok(ValueTable { meta, shape, v, actions, stops: StopTable { shape, s } })
    }
}
