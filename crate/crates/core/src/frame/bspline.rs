//! Clamped uniform B-splines on `[0, 1]`.

use crate::scalar::Real;

/// Uniform B-spline family of order `m` (degree `m − 1`) with `intervals`
/// knot intervals and `m`-fold knots at both ends.
#[derive(Debug, Clone)]
pub(crate) struct ClampedSplines<T> {
    order: usize,
    intervals: usize,
    knots: Vec<T>,
}

impl<T: Real> ClampedSplines<T> {
    pub fn new(order: usize, intervals: usize) -> Self {
        let p = order - 1;
        let knots = (0..intervals + 2 * order - 1)
            .map(|j| {
                let j = j as isize - p as isize;
                let j = j.clamp(0, intervals as isize) as usize;
                T::from_usize_lossy(j) / T::from_usize_lossy(intervals)
            })
            .collect();
        ClampedSplines {
            order,
            intervals,
            knots,
        }
    }

    pub fn count(&self) -> usize {
        self.intervals + self.order - 1
    }

    /// Index of the first non-vanishing function at `x` and the `order`
    /// values of the functions `first..first+order`. `x = 1` belongs to the
    /// last interval, so the partition of unity holds on the closed interval.
    pub fn eval(&self, x: T, out: &mut [T]) -> usize {
        let m = self.order;
        let p = m - 1;
        let scaled = (x * T::from_usize_lossy(self.intervals)).floor();
        let i = scaled.to_usize().unwrap_or(0).min(self.intervals - 1);
        let span = i + p;
        let t = &self.knots;
        let mut left = [T::zero(); 16];
        let mut right = [T::zero(); 16];
        out[0] = T::one();
        for j in 1..=p {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = T::zero();
            for r in 0..j {
                let temp = out[r] / (right[r + 1] + left[j - r]);
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
        i
    }
}
