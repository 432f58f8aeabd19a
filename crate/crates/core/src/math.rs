//! Numeric helpers shared by the inference and learning code.
//!
//! All transcendental functions go through `libm`, so results are identical
//! across platforms and independent of the host `std`.

use alloc::vec;
use alloc::vec::Vec;

/// Smallest probability allowed into a division or a logarithm.
pub const PROB_FLOOR: f64 = 1e-30;

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// `ln(exp(a) + exp(b))` without overflow.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + libm::log1p(libm::exp(lo - hi))
}

/// `ln(sum(exp(v)))`, `-inf` for an empty or all `-inf` slice.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| exp(v - max)).sum();
    max + ln(sum)
}

/// Binary entropy in bits of a two-point distribution.
pub fn binary_entropy(p0: f64) -> f64 {
    let h = |p: f64| if p > 0.0 { -p * libm::log2(p) } else { 0.0 };
    h(p0) + h(1.0 - p0)
}

/// Dense row-major `rows x cols` table of reals.
///
/// Used both for linear-domain probability tables (one row per time step)
/// and for log-domain recursion variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Table {
    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> crate::Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            crate::error::check_len("table row", cols, r.as_ref().len())?;
            data.extend_from_slice(r.as_ref());
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Per-time uniform distribution over `cols` outcomes.
    pub fn uniform(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 1.0 / cols as f64)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Elementwise `exp`, turning a log table into a linear one.
    pub fn exp(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| exp(v)).collect(),
        }
    }

    /// Rescales every row to sum to one. Rows summing to zero are left alone.
    pub fn normalize_rows(&mut self) {
        for r in 0..self.rows {
            let row = self.row_mut(r);
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|v| *v /= s);
            }
        }
    }

    /// Checks that every row is a distribution to within `tol`.
    pub fn check_distribution(&self, tol: f64) -> crate::Result<()> {
        for row in self.iter_rows() {
            if row.iter().any(|&p| p.is_nan() || p < 0.0) {
                return Err(crate::Error::Input("negative or NaN probability"));
            }
            if libm::fabs(row.iter().sum::<f64>() - 1.0) > tol {
                return Err(crate::Error::Input("probability row does not sum to one"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_matches_direct_sum() {
        let v = [-1.0, -2.0, -3.0];
        let direct = (v.iter().map(|x: &f64| x.exp()).sum::<f64>()).ln();
        assert!((logsumexp(&v) - direct).abs() < 1e-15);
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
        assert_eq!(logsumexp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert!((logsumexp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn log_add_handles_neg_infinity() {
        assert_eq!(log_add(f64::NEG_INFINITY, -3.0), -3.0);
        assert!((log_add(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn binary_entropy_extremes() {
        assert_eq!(binary_entropy(1.0), 0.0);
        assert!((binary_entropy(0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normalize_rows_skips_zero_rows() {
        let mut t = Table::from_rows(&[[1.0, 3.0], [0.0, 0.0]]).unwrap();
        t.normalize_rows();
        assert_eq!(t.row(0), &[0.25, 0.75]);
        assert_eq!(t.row(1), &[0.0, 0.0]);
    }
}
