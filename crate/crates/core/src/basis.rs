//! Variable-width cubic B-spline bases built in natural time.
//!
//! Events are placed at integer positions `t'_i = i` (`i = 1..n`) with the
//! window endpoints at `t'_0 = 0` and `t'_{n+1} = n + 1`. On that axis `m`
//! uniform cubic B-splines with knot spacing `w = (n + 1) / (m - 3)` are laid
//! out. Mapping back to actual time stretches each basis over a fixed number
//! of events, so bases are narrow where events are dense. Each basis is held
//! constant over an inter-event segment, which gives the `(n + 2) × m`
//! matrix `f_i^j = F^j(i)`.
//!
//! Every row has at most four nonzero entries, so rows are stored as a start
//! column plus four weights.

use std::io::Write;

use crate::error::{Error, Result};

/// Uniform cubic B-spline bump supported on `[0, 4]`.
pub fn bspline_base(x: f64) -> f64 {
    if !(0.0..4.0).contains(&x) {
        return 0.0;
    }
    if x < 1.0 {
        x * x * x / 6.0
    } else if x < 2.0 {
        (((-3.0 * x + 12.0) * x - 12.0) * x + 4.0) / 6.0
    } else if x < 3.0 {
        (((3.0 * x - 24.0) * x + 60.0) * x - 44.0) / 6.0
    } else {
        let u = 4.0 - x;
        u * u * u / 6.0
    }
}

/// First derivative of [`bspline_base`].
pub fn bspline_base_deriv(x: f64) -> f64 {
    if !(0.0..4.0).contains(&x) {
        return 0.0;
    }
    if x < 1.0 {
        x * x / 2.0
    } else if x < 2.0 {
        ((-9.0 * x + 24.0) * x - 12.0) / 6.0
    } else if x < 3.0 {
        ((9.0 * x - 48.0) * x + 60.0) / 6.0
    } else {
        let u = 4.0 - x;
        -u * u / 2.0
    }
}

/// Number of bases `m = 3 + round(n / k)`, rounding half away from zero.
///
/// Sequences too short to reach four bases are given the minimum `m = 4`.
pub fn basis_count(n: usize, k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::Config("events-per-basis divisor k must be >= 1".into()));
    }
    let extra = (n as f64 / k as f64).round() as usize;
    Ok((3 + extra).max(4))
}

/// Four consecutive basis weights starting at column `first`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisRow {
    pub first: usize,
    pub weights: [f64; 4],
}

impl BasisRow {
    /// `Σ_j a_j f^j` restricted to the nonzero columns.
    #[inline]
    pub fn dot(&self, coeffs: &[f64]) -> f64 {
        let a = &coeffs[self.first..self.first + 4];
        self.weights[0] * a[0] + self.weights[1] * a[1] + self.weights[2] * a[2] + self.weights[3] * a[3]
    }

    pub fn get(&self, j: usize) -> f64 {
        if j >= self.first && j < self.first + 4 {
            self.weights[j - self.first]
        } else {
            0.0
        }
    }
}

/// Piecewise-constant variable-width basis for one event sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalTimeBasis {
    n: usize,
    m: usize,
    spacing: f64,
    values: Vec<BasisRow>,
    derivs: Vec<BasisRow>,
}

impl NaturalTimeBasis {
    /// Basis for `n` events with `m = 3 + round(n / k)` functions.
    pub fn build(n: usize, k: usize) -> Result<Self> {
        let m = basis_count(n, k)?;
        Self::with_count(n, m)
    }

    /// Basis for `n` events with an explicit basis count `m ≥ 4`.
    pub fn with_count(n: usize, m: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("a spline basis needs at least one event".into()));
        }
        if m < 4 {
            return Err(Error::Config(format!(
                "a cubic spline basis needs m >= 4 functions, got {m}"
            )));
        }
        let spacing = (n + 1) as f64 / (m - 3) as f64;
        let row = |i: usize, f: fn(f64) -> f64, scale: f64| {
            let u = i as f64 / spacing;
            let first = (u.floor() as usize).min(m - 4);
            let mut weights = [0.0; 4];
            for (r, w) in weights.iter_mut().enumerate() {
                // F^j(t') = f((t' - ξ_{j-4}) / w) with 0-based column j = first + r
                *w = f(u - (first + r) as f64 + 3.0) * scale;
            }
            BasisRow { first, weights }
        };
        let values = (0..=n + 1).map(|i| row(i, bspline_base, 1.0)).collect();
        let derivs = (1..=n).map(|i| row(i, bspline_base_deriv, 1.0 / spacing)).collect();
        Ok(Self {
            n,
            m,
            spacing,
            values,
            derivs,
        })
    }

    /// Event count `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Basis count `m`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Knot spacing `w` in natural time.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Row `i = 0..=n+1` of `f_i^j`.
    pub fn value_row(&self, i: usize) -> &BasisRow {
        &self.values[i]
    }

    /// Rows `i = 0..=n+1` of `f_i^j`.
    pub fn value_rows(&self) -> &[BasisRow] {
        &self.values
    }

    /// Row for event `i = 1..=n` of the natural-time derivative matrix `G`.
    pub fn deriv_row(&self, i: usize) -> &BasisRow {
        &self.derivs[i - 1]
    }

    /// Rows `i = 1..=n` of `G`.
    pub fn deriv_rows(&self) -> &[BasisRow] {
        &self.derivs
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i].get(j)
    }

    pub fn deriv(&self, i: usize, j: usize) -> f64 {
        self.derivs[i - 1].get(j)
    }

    /// `log μ_i = Σ_j a_j f_i^j` for every segment `i = 0..=n`.
    pub fn log_rates(&self, coeffs: &[f64]) -> Vec<f64> {
        self.values[..=self.n].iter().map(|r| r.dot(coeffs)).collect()
    }

    pub fn values_dense(&self) -> Vec<Vec<f64>> {
        dense(&self.values, self.m)
    }

    pub fn derivs_dense(&self) -> Vec<Vec<f64>> {
        dense(&self.derivs, self.m)
    }

    /// Writes `f_i^j` as CSV: one row per `i`, one column per `j`.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        let header: Vec<String> = (1..=self.m).map(|j| format!("f{j}")).collect();
        writeln!(writer, "i,{}", header.join(","))?;
        for (i, row) in self.values_dense().iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(writer, "{i},{}", cells.join(","))?;
        }
        Ok(())
    }
}

fn dense(rows: &[BasisRow], m: usize) -> Vec<Vec<f64>> {
    rows.iter().map(|r| (0..m).map(|j| r.get(j)).collect()).collect()
}

/// Free function form of [`NaturalTimeBasis::build`].
pub fn build_basis(n: usize, k: usize) -> Result<NaturalTimeBasis> {
    NaturalTimeBasis::build(n, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn base_values() {
        assert_eq!(bspline_base(-1.0), 0.0);
        assert_eq!(bspline_base(5.0), 0.0);
        assert_abs_diff_eq!(bspline_base(2.0), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bspline_base(1.0), 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bspline_base(3.0), 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn base_derivative_values() {
        assert_eq!(bspline_base_deriv(2.0), 0.0);
        assert_eq!(bspline_base_deriv(0.0), 0.0);
        assert_abs_diff_eq!(bspline_base_deriv(0.5), 0.125, epsilon = 1e-15);
        let h = 1e-6;
        let fd = (bspline_base(0.5 + h) - bspline_base(0.5 - h)) / (2.0 * h);
        assert_abs_diff_eq!(fd, 0.125, epsilon = 1e-8);
    }

    #[test]
    fn base_is_c2_at_knots() {
        // values, slopes, and curvature agree from both sides of each knot
        for knot in [1.0, 2.0, 3.0] {
            let h = 1e-7;
            assert_abs_diff_eq!(bspline_base(knot - h), bspline_base(knot + h), epsilon = 1e-6);
            assert_abs_diff_eq!(
                bspline_base_deriv(knot - h),
                bspline_base_deriv(knot + h),
                epsilon = 1e-6
            );
        }
        assert_abs_diff_eq!(bspline_base(4.0 - 1e-9), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn basis_count_examples() {
        assert_eq!(basis_count(100, 50).unwrap(), 5);
        assert_eq!(basis_count(100, 25).unwrap(), 7);
        assert_eq!(basis_count(125, 50).unwrap(), 6); // 2.5 rounds away from zero
        assert_eq!(basis_count(1, 50).unwrap(), 4);
        assert!(basis_count(10, 0).is_err());
    }

    #[test]
    fn explicit_small_count_is_a_configuration_error() {
        assert!(matches!(NaturalTimeBasis::with_count(10, 3), Err(Error::Config(_))));
        assert!(matches!(NaturalTimeBasis::with_count(0, 4), Err(Error::Config(_))));
    }

    #[test]
    fn single_event_basis() {
        let b = build_basis(1, 50).unwrap();
        assert_eq!(b.m(), 4);
        let dense = b.values_dense();
        assert_eq!(dense.len(), 3);
        // w = 2; natural times 0, 1, 2 map to u = 0, 0.5, 1
        let expected = [
            [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0, 0.0],
            [
                bspline_base(3.5),
                bspline_base(2.5),
                bspline_base(1.5),
                bspline_base(0.5),
            ],
            [0.0, 1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
        ];
        for (row, exp) in dense.iter().zip(expected.iter()) {
            for (v, e) in row.iter().zip(exp.iter()) {
                assert_abs_diff_eq!(v, e, epsilon = 1e-15);
            }
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn derivs_match_finite_differences() {
        let b = build_basis(40, 10).unwrap();
        let w = b.spacing();
        let h = 1e-5;
        for i in 1..=b.n() {
            for j in 0..b.m() {
                let f = |t: f64| bspline_base(t / w - j as f64 + 3.0);
                let fd = (f(i as f64 + h) - f(i as f64 - h)) / (2.0 * h);
                assert_abs_diff_eq!(b.deriv(i, j), fd, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn csv_export_has_one_line_per_row() {
        let b = build_basis(10, 5).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + b.n() + 2);
        assert!(text.starts_with("i,f1,f2,f3,f4,f5"));
    }

    proptest! {
        #[test]
        fn partition_of_unity_and_sparsity(n in 1usize..3000, k in 1usize..300) {
            let b = build_basis(n, k).unwrap();
            prop_assert_eq!(b.value_rows().len(), n + 2);
            prop_assert_eq!(b.deriv_rows().len(), n);
            for row in b.value_rows() {
                let s: f64 = row.weights.iter().sum();
                prop_assert!((s - 1.0).abs() <= 1e-12);
                prop_assert!(row.first + 4 <= b.m());
                prop_assert!(row.weights.iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
            // derivative rows sum to zero: constants have zero slope
            for row in b.deriv_rows() {
                prop_assert!(row.weights.iter().sum::<f64>().abs() <= 1e-12);
            }
        }
    }
}
