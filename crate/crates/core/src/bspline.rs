//! Uniform B-spline bases on an extended knot grid.
//!
//! A grid of `G` interior intervals on `[lo, hi]` with degree `k` carries
//! `G + 2k + 1` uniformly spaced knots, `k` of them beyond each end of the
//! domain, so that exactly `G + k` degree-`k` basis functions are defined and
//! they sum to one everywhere in `[lo, hi]`.
//!
//! Outside the domain the basis is extended linearly from its value and slope
//! at the nearest boundary. Partition of unity survives the extension because
//! the boundary slopes sum to zero.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::math::floor;
use crate::{Error, Result};

/// Largest supported spline degree.
pub const MAX_ORDER: usize = 7;

/// Degree, interval count and domain of a uniform spline grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BSplineGrid {
    order: usize,
    intervals: usize,
    lo: f64,
    hi: f64,
}

impl Default for BSplineGrid {
    /// Cubic, five intervals on `[-1, 2]`.
    fn default() -> Self {
        BSplineGrid {
            order: 3,
            intervals: 5,
            lo: -1.0,
            hi: 2.0,
        }
    }
}

/// The `k + 1` basis functions that can be nonzero at one point, with slopes.
#[derive(Debug, Clone, Copy)]
pub struct LocalBasis {
    /// Index of the first function in `values`.
    pub start: usize,
    len: usize,
    values: [f64; MAX_ORDER + 1],
    derivs: [f64; MAX_ORDER + 1],
}

impl LocalBasis {
    /// Basis values `B_{start}..B_{start+k}`.
    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values[..self.len]
    }

    /// First derivatives with respect to `x`, aligned with [`values`](Self::values).
    #[inline]
    pub fn derivs(&self) -> &[f64] {
        &self.derivs[..self.len]
    }
}

impl BSplineGrid {
    /// Validated constructor: `1 <= order <= MAX_ORDER`, `intervals >= 1`, `lo < hi`.
    pub fn new(order: usize, intervals: usize, lo: f64, hi: f64) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::Config(format!("spline order {order} outside 1..={MAX_ORDER}")));
        }
        if intervals == 0 {
            return Err(Error::Config("spline grid needs at least one interval".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("spline domain [{lo}, {hi}] is empty")));
        }
        Ok(BSplineGrid {
            order,
            intervals,
            lo,
            hi,
        })
    }

    /// Spline degree `k`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Interior interval count `G`.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Lower domain bound.
    pub fn lo(&self) -> f64 {
        self.lo
    }

    /// Upper domain bound.
    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Number of basis functions, `G + k`.
    pub fn num_basis(&self) -> usize {
        self.intervals + self.order
    }

    /// Knot spacing.
    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.intervals as f64
    }

    /// Knot `j` of the extended sequence, `0 <= j <= G + 2k`.
    #[inline]
    pub fn knot(&self, j: usize) -> f64 {
        self.lo + (j as f64 - self.order as f64) * self.step()
    }

    /// Full knot sequence.
    pub fn knots(&self) -> Vec<f64> {
        (0..=self.intervals + 2 * self.order).map(|j| self.knot(j)).collect()
    }

    /// Index of the interior interval used to evaluate `x` (clamped to the domain).
    fn span(&self, x: f64) -> usize {
        let s = floor((x - self.lo) / self.step());
        if s <= 0.0 {
            0
        } else {
            (s as usize).min(self.intervals - 1)
        }
    }

    /// Triangular Cox-de Boor evaluation on the interval `[t_i, t_{i+1})`,
    /// `i = knot_span`, for the given degree. Fills `out[0..=degree]` with
    /// functions `i - degree ..= i`. When `lower` is given it receives the
    /// degree `degree - 1` values of functions `i - degree + 1 ..= i`.
    fn triangle(
        &self,
        x: f64,
        knot_span: usize,
        degree: usize,
        out: &mut [f64; MAX_ORDER + 1],
        mut lower: Option<&mut [f64; MAX_ORDER + 1]>,
    ) {
        let mut left = [0.0; MAX_ORDER + 1];
        let mut right = [0.0; MAX_ORDER + 1];
        out[0] = 1.0;
        if degree == 1 {
            if let Some(l) = lower.as_deref_mut() {
                l[0] = 1.0;
            }
        }
        for j in 1..=degree {
            left[j] = x - self.knot(knot_span + 1 - j);
            right[j] = self.knot(knot_span + j) - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = out[r] / (right[r + 1] + left[j - r]);
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
            if j + 1 == degree {
                if let Some(l) = lower.as_deref_mut() {
                    l[..=j].copy_from_slice(&out[..=j]);
                }
            }
        }
    }

    /// Values and slopes of the functions active at `x`, with linear
    /// extension outside `[lo, hi]`.
    pub fn local(&self, x: f64) -> LocalBasis {
        let k = self.order;
        let clamped = x.clamp(self.lo, self.hi);
        let s = self.span(clamped);
        let mut values = [0.0; MAX_ORDER + 1];
        let mut lower = [0.0; MAX_ORDER + 1];
        self.triangle(clamped, s + k, k, &mut values, Some(&mut lower));
        let inv_h = 1.0 / self.step();
        let mut derivs = [0.0; MAX_ORDER + 1];
        for q in 0..=k {
            let left = if q >= 1 { lower[q - 1] } else { 0.0 };
            let right = if q < k { lower[q] } else { 0.0 };
            derivs[q] = (left - right) * inv_h;
        }
        if x != clamped {
            let dx = x - clamped;
            for q in 0..=k {
                values[q] += derivs[q] * dx;
            }
        }
        LocalBasis {
            start: s,
            len: k + 1,
            values,
            derivs,
        }
    }

    /// Dense basis vector of length `G + k` at `x`.
    pub fn basis(&self, x: f64) -> Vec<f64> {
        let local = self.local(x);
        let mut out = vec![0.0; self.num_basis()];
        out[local.start..local.start + local.len].copy_from_slice(local.values());
        out
    }

    /// Dense basis of an arbitrary degree `0..=k` on this grid's knots, for
    /// `x` in `[lo, hi)`. Degree `d` has `G + 2k - d` functions; degree 0 is
    /// the indicator of the knot interval containing `x`.
    pub fn basis_of_degree(&self, x: f64, degree: usize) -> Result<Vec<f64>> {
        if degree > self.order {
            return Err(Error::Config(format!("degree {degree} above grid order {}", self.order)));
        }
        if !(x >= self.lo && x < self.hi) {
            return Err(Error::Config(format!("x = {x} outside [{}, {})", self.lo, self.hi)));
        }
        let knot_span = self.span(x) + self.order;
        let mut values = [0.0; MAX_ORDER + 1];
        self.triangle(x, knot_span, degree, &mut values, None);
        let mut out = vec![0.0; self.intervals + 2 * self.order - degree];
        let first = knot_span - degree;
        out[first..=knot_span].copy_from_slice(&values[..=degree]);
        Ok(out)
    }
}

/// Degree-`k` basis values at `x`, one per function.
pub fn bspline_basis(x: f64, grid: &BSplineGrid) -> Vec<f64> {
    grid.basis(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Textbook recursion over the full knot vector, no locality shortcuts.
    fn cox_de_boor(knots: &[f64], i: usize, d: usize, x: f64) -> f64 {
        if d == 0 {
            return if knots[i] <= x && x < knots[i + 1] { 1.0 } else { 0.0 };
        }
        let a = (x - knots[i]) / (knots[i + d] - knots[i]) * cox_de_boor(knots, i, d - 1, x);
        let b = (knots[i + d + 1] - x) / (knots[i + d + 1] - knots[i + 1]) * cox_de_boor(knots, i + 1, d - 1, x);
        a + b
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(BSplineGrid::new(0, 5, 0.0, 1.0).is_err());
        assert!(BSplineGrid::new(3, 0, 0.0, 1.0).is_err());
        assert!(BSplineGrid::new(3, 5, 1.0, 1.0).is_err());
        assert!(BSplineGrid::new(MAX_ORDER + 1, 5, 0.0, 1.0).is_err());
    }

    #[test]
    fn degree_zero_is_interval_indicator() {
        let g = BSplineGrid::new(3, 5, -1.0, 2.0).unwrap();
        let x = 0.25; // in interior interval 2, knot interval 5
        let b = g.basis_of_degree(x, 0).unwrap();
        let knots = g.knots();
        for (i, v) in b.iter().enumerate() {
            let inside = knots[i] <= x && x < knots[i + 1];
            assert_eq!(*v, if inside { 1.0 } else { 0.0 });
        }
        assert_eq!(b.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn count_matches_grid() {
        let g = BSplineGrid::default();
        assert_eq!(bspline_basis(0.3, &g).len(), 8);
    }

    #[test]
    fn cubic_at_interior_knot_matches_recursion() {
        let g = BSplineGrid::new(3, 5, -1.0, 2.0).unwrap();
        let knots = g.knots();
        for j in 3..=7 {
            let x = knots[j];
            let fast = g.basis(x);
            for (i, v) in fast.iter().enumerate() {
                assert!((v - cox_de_boor(&knots, i, 3, x)).abs() < 1e-12);
            }
        }
        // uniform cubic at a knot: 1/6, 4/6, 1/6
        let b = g.basis(knots[5]);
        let nz: Vec<f64> = b.into_iter().filter(|v| v.abs() > 1e-15).collect();
        assert_eq!(nz.len(), 3);
        assert!((nz[0] - 1.0 / 6.0).abs() < 1e-12);
        assert!((nz[1] - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn slopes_match_finite_differences() {
        let g = BSplineGrid::new(3, 4, 0.0, 1.0).unwrap();
        for &x in &[-0.3, 0.01, 0.37, 0.5, 0.99, 1.4] {
            let lb = g.local(x);
            let h = 1e-6;
            let up = g.basis(x + h);
            let dn = g.basis(x - h);
            for (q, d) in lb.derivs().iter().enumerate() {
                let fd = (up[lb.start + q] - dn[lb.start + q]) / (2.0 * h);
                assert!((d - fd).abs() < 1e-6, "x={x} q={q} {d} vs {fd}");
            }
        }
    }

    #[test]
    fn extension_is_linear_and_sums_to_one() {
        let g = BSplineGrid::default();
        let a = g.basis(-3.0);
        let b = g.basis(-2.0);
        let c = g.basis(-1.0);
        for i in 0..a.len() {
            assert!(((a[i] - b[i]) - (b[i] - c[i])).abs() < 1e-12);
        }
        assert!((g.basis(7.5).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn partition_of_unity(k in 1usize..=5, g in 1usize..12, x in 0.0f64..=1.0) {
                let grid = BSplineGrid::new(k, g, -1.0, 2.0).unwrap();
                let x = -1.0 + 3.0 * x;
                let b = grid.basis(x);
                prop_assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(b.iter().filter(|v| **v != 0.0).count() <= k + 1);
                prop_assert!(b.iter().all(|v| *v >= -1e-15));
            }

            #[test]
            fn agrees_with_recursion(k in 1usize..=4, g in 1usize..8, u in 0.0f64..1.0) {
                let grid = BSplineGrid::new(k, g, -1.0, 2.0).unwrap();
                let x = -1.0 + 3.0 * u;
                let knots = grid.knots();
                for (i, v) in grid.basis(x).iter().enumerate() {
                    prop_assert!((v - cox_de_boor(&knots, i, k, x)).abs() < 1e-12);
                }
            }
        }
    }
}
