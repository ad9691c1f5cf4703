//! Small numeric helpers shared across modules.

use statrs::function::erf::erfc;

pub(crate) const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Standard normal density.
#[inline]
pub(crate) fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / SQRT_2PI
}

/// Standard normal CDF via the complementary error function, accurate in
/// the left tail.
#[inline]
pub(crate) fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal survival function, accurate in the right tail.
#[inline]
pub(crate) fn norm_sf(z: f64) -> f64 {
    0.5 * erfc(z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Probability that a Normal(mean, sd²) variable lands in [lo, hi].
///
/// One-sided intervals subtract two same-tail values so the result keeps
/// full relative accuracy however deep in the tail it sits; when even that
/// underflows, falls back to midpoint density times width, which keeps the
/// result positive and of the right magnitude for as long as the density
/// is representable.
pub(crate) fn normal_interval_prob(lo: f64, hi: f64, mean: f64, sd: f64) -> f64 {
    debug_assert!(hi >= lo && sd > 0.0);
    let zl = (lo - mean) / sd;
    let zh = (hi - mean) / sd;
    let p = if zl >= 0.0 {
        norm_sf(zl) - norm_sf(zh)
    } else {
        norm_cdf(zh) - norm_cdf(zl)
    };
    if p > 0.0 {
        p
    } else {
        let zm = 0.5 * (zl + zh);
        norm_pdf(zm) / sd * (hi - lo)
    }
}

/// Neumaier-compensated summation; order-stable aggregation for Monte
/// Carlo reductions.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Mean and standard error of a sample, computed with compensated sums.
///
/// Returns the sample value itself (and zero error) when every entry is
/// bitwise identical, so deterministic policies report exact aggregates.
pub(crate) fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    assert!(!xs.is_empty());
    let all_equal = xs.iter().all(|&x| x == xs[0]);
    if all_equal {
        return (xs[0], 0.0);
    }
    let n = xs.len() as f64;
    let mut s = CompensatedSum::default();
    for &x in xs {
        s.add(x);
    }
    let mean = s.value() / n;
    let mut dev = CompensatedSum::default();
    for &x in xs {
        let d = x - mean;
        dev.add(d * d);
    }
    let var = dev.value() / (n - 1.0);
    (mean, (var / n).sqrt())
}
