// SPDX-License-Identifier: MIT OR Apache-2.0

//! The CUSUM transformation and the matrices it acts on.
//!
//! Data matrices are `p x n` with rows indexed by coordinate and columns by
//! time. The transformation maps a `p x n` matrix to the `p x (n-1)` matrix
//! of scaled cumulative-sum contrasts: entry `(j, t)` compares the mean of
//! row `j` after time `t` with the mean up to time `t`, scaled so that white
//! noise keeps unit variance. Time indices are 1-based throughout; a
//! changepoint at `z` means the last column of the left segment is `z`.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// A `p x n` observation (or mean, or noise) matrix. Rows are coordinates,
/// columns are time points.
#[derive(Clone, Debug)]
pub struct ObservationMatrix {
    values: Array2<f64>,
}

impl ObservationMatrix {
    /// Wraps a matrix, checking `p >= 1`, `n >= 2` and finiteness.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (p, n) = values.dim();
        if p < 1 {
            return Err(Error::invalid_input("observation matrix needs at least one row"));
        }
        if n < 2 {
            return Err(Error::invalid_input(format!(
                "observation matrix needs at least two time points, got n={n}"
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid_input("observation matrix contains non-finite entries"));
        }
        Ok(ObservationMatrix { values })
    }

    pub fn p(&self) -> usize {
        self.values.nrows()
    }

    pub fn n(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Submatrix of columns `start..end` (0-based, half open).
    pub fn columns(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n() {
            return Err(Error::invalid_input(format!(
                "column range {start}..{end} out of bounds for n={}",
                self.n()
            )));
        }
        ObservationMatrix::new(self.values.slice(ndarray::s![.., start..end]).to_owned())
    }

    /// Splits columns into odd-indexed and even-indexed halves (1-based), the
    /// sample-splitting layout used by the split estimators. A trailing
    /// column of odd-length input is dropped first.
    pub fn split_alternating(&self) -> Result<(Self, Self)> {
        let n = self.n();
        if n < 4 {
            return Err(Error::invalid_input(format!(
                "alternating split needs n >= 4, got n={n}"
            )));
        }
        let n_even = n - n % 2;
        let n1 = n_even / 2;
        let mut x1 = Array2::zeros((self.p(), n1));
        let mut x2 = Array2::zeros((self.p(), n1));
        for t in 0..n1 {
            x1.column_mut(t).assign(&self.values.column(2 * t));
            x2.column_mut(t).assign(&self.values.column(2 * t + 1));
        }
        Ok((ObservationMatrix { values: x1 }, ObservationMatrix { values: x2 }))
    }
}

/// Result of the CUSUM transformation: a `p x (n-1)` matrix, tagged with the
/// original series length `n`.
#[derive(Clone, Debug)]
pub struct CusumMatrix {
    values: Array2<f64>,
    n: usize,
}

impl CusumMatrix {
    /// Wraps a precomputed contrast matrix. `values` must have `n - 1`
    /// columns and finite entries.
    pub fn new(values: Array2<f64>, n: usize) -> Result<Self> {
        if n < 2 || values.ncols() != n - 1 {
            return Err(Error::invalid_input(format!(
                "CUSUM matrix must have n-1 columns, got {} for n={n}",
                values.ncols()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid_input("CUSUM matrix contains non-finite entries"));
        }
        Ok(CusumMatrix { values, n })
    }

    pub fn p(&self) -> usize {
        self.values.nrows()
    }

    /// Original time length of the series the matrix was computed from.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

/// CUSUM transformation of a data matrix.
///
/// Entry `(j, t)`, for `1 <= t <= n-1`, equals
/// `sqrt(t(n-t)/n) * (mean(X[j, t+1..n]) - mean(X[j, 1..t]))`,
/// computed in the equivalent partial-sum form with one `O(n)` pass per row.
pub fn cusum_transform(x: &ObservationMatrix) -> CusumMatrix {
    let (p, n) = (x.p(), x.n());
    let nf = n as f64;
    let mut out = Array2::zeros((p, n - 1));
    for (j, row) in x.values().outer_iter().enumerate() {
        let total: f64 = row.iter().sum();
        let mut head = 0.0f64;
        for t in 1..n {
            head += row[t - 1];
            let tf = t as f64;
            let scale = (nf / (tf * (nf - tf))).sqrt();
            out[[j, t - 1]] = scale * (tf / nf * total - head);
        }
    }
    CusumMatrix { values: out, n }
}

/// The unit-rank time profile of a single change at `z` in a length-`n`
/// series: the CUSUM transformation of any single-changepoint mean matrix
/// equals `theta * gamma'` with this vector as `gamma`.
///
/// `gamma[t-1] = sqrt(t/(n(n-t))) * (n-z)` for `t <= z` and
/// `sqrt((n-t)/(nt)) * z` for `t > z`; the maximum is attained at `t = z`.
pub fn gamma_vector(n: usize, z: usize) -> Result<Array1<f64>> {
    if n < 2 {
        return Err(Error::invalid_input(format!("gamma_vector needs n >= 2, got {n}")));
    }
    if z < 1 || z > n - 1 {
        return Err(Error::invalid_input(format!(
            "changepoint index must lie in [1, n-1], got z={z} for n={n}"
        )));
    }
    let nf = n as f64;
    let zf = z as f64;
    let mut g = Array1::zeros(n - 1);
    for t in 1..n {
        let tf = t as f64;
        g[t - 1] = if t <= z {
            (tf / (nf * (nf - tf))).sqrt() * (nf - zf)
        } else {
            ((nf - tf) / (nf * tf)).sqrt() * zf
        };
    }
    Ok(g)
}

/// Ground-truth description of a piecewise-constant mean structure:
/// changepoints `z_1 < ... < z_nu` in `[1, n-1]` and the `nu + 1` segment
/// mean vectors. Segment `i` covers times `z_i + 1 ..= z_{i+1}` under the
/// conventions `z_0 = 0`, `z_{nu+1} = n`.
#[derive(Clone, Debug)]
pub struct PiecewiseMeanSpec {
    n: usize,
    p: usize,
    changepoints: Vec<usize>,
    segment_means: Vec<Array1<f64>>,
}

impl PiecewiseMeanSpec {
    pub fn new(
        n: usize,
        p: usize,
        changepoints: Vec<usize>,
        segment_means: Vec<Array1<f64>>,
    ) -> Result<Self> {
        if n < 2 || p < 1 {
            return Err(Error::invalid_input(format!("need n >= 2 and p >= 1, got n={n}, p={p}")));
        }
        if segment_means.len() != changepoints.len() + 1 {
            return Err(Error::invalid_input(format!(
                "{} changepoints require {} segment means, got {}",
                changepoints.len(),
                changepoints.len() + 1,
                segment_means.len()
            )));
        }
        for (i, z) in changepoints.iter().enumerate() {
            if *z < 1 || *z > n - 1 {
                return Err(Error::invalid_input(format!(
                    "changepoint {z} outside [1, {}]",
                    n - 1
                )));
            }
            if i > 0 && changepoints[i - 1] >= *z {
                return Err(Error::invalid_input("changepoints must be strictly increasing"));
            }
        }
        for (i, m) in segment_means.iter().enumerate() {
            if m.len() != p {
                return Err(Error::invalid_input(format!(
                    "segment mean {i} has length {}, expected {p}",
                    m.len()
                )));
            }
            if !m.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid_input("segment means must be finite"));
            }
            if i > 0 && segment_means[i - 1] == *m {
                return Err(Error::invalid_input(format!(
                    "consecutive segment means {} and {i} are identical",
                    i - 1
                )));
            }
        }
        Ok(PiecewiseMeanSpec { n, p, changepoints, segment_means })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn num_changepoints(&self) -> usize {
        self.changepoints.len()
    }

    pub fn changepoints(&self) -> &[usize] {
        &self.changepoints
    }

    pub fn segment_means(&self) -> &[Array1<f64>] {
        &self.segment_means
    }

    /// Change vector at the `i`-th changepoint (0-based).
    pub fn theta(&self, i: usize) -> Array1<f64> {
        &self.segment_means[i + 1] - &self.segment_means[i]
    }

    /// Maximum number of coordinates any single change touches.
    pub fn sparsity(&self) -> usize {
        (0..self.num_changepoints())
            .map(|i| self.theta(i).iter().filter(|v| **v != 0.0).count())
            .max()
            .unwrap_or(0)
    }

    /// Minimum segment length divided by `n`.
    pub fn min_spacing_fraction(&self) -> f64 {
        let mut prev = 0usize;
        let mut min_gap = self.n;
        for &z in &self.changepoints {
            min_gap = min_gap.min(z - prev);
            prev = z;
        }
        min_gap = min_gap.min(self.n - prev);
        min_gap as f64 / self.n as f64
    }

    /// Smallest Euclidean magnitude over the change vectors, `None` when the
    /// spec has no changepoint.
    pub fn min_change_magnitude(&self) -> Option<f64> {
        (0..self.num_changepoints())
            .map(|i| self.theta(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
    }

    /// Materialises the `p x n` mean matrix.
    pub fn mean_matrix(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.p, self.n));
        let mut seg = 0usize;
        for t in 1..=self.n {
            while seg < self.changepoints.len() && self.changepoints[seg] < t {
                seg += 1;
            }
            out.column_mut(t - 1).assign(&self.segment_means[seg]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn constant_series_has_zero_contrasts() {
        let x = ObservationMatrix::new(Array2::ones((1, 4))).unwrap();
        let t = cusum_transform(&x);
        assert_eq!(t.values().dim(), (1, 3));
        assert!(t.values().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn hand_evaluated_three_point_series() {
        let x = ObservationMatrix::new(array![[0.0, 0.0, 3.0]]).unwrap();
        let t = cusum_transform(&x);
        let c = (2.0f64 / 3.0).sqrt();
        assert!(close(t.values()[[0, 0]], c * 1.5, 1e-12));
        assert!(close(t.values()[[0, 1]], c * 3.0, 1e-12));
    }

    #[test]
    fn single_change_mean_is_rank_one_with_gamma_profile() {
        let n = 8;
        let z = 3;
        let theta = array![2.0, 0.0, -1.0];
        let base = array![0.5, -1.0, 2.0];
        let spec = PiecewiseMeanSpec::new(
            n,
            3,
            vec![z],
            vec![base.clone(), &base + &theta],
        )
        .unwrap();
        let mu = ObservationMatrix::new(spec.mean_matrix()).unwrap();
        let t = cusum_transform(&mu);
        let g = gamma_vector(n, z).unwrap();
        for j in 0..3 {
            for k in 0..n - 1 {
                assert!(
                    close(t.values()[[j, k]], theta[j] * g[k], 1e-10),
                    "entry ({j},{k})"
                );
            }
        }
    }

    #[test]
    fn gamma_hand_values_and_symmetry() {
        let g = gamma_vector(4, 2).unwrap();
        let r = 1.0 / 3.0f64.sqrt();
        assert!(close(g[0], r, 1e-12) && close(g[1], 1.0, 1e-12) && close(g[2], r, 1e-12));

        let a = gamma_vector(4, 1).unwrap();
        let b = gamma_vector(4, 3).unwrap();
        for i in 0..3 {
            assert!(close(a[i], b[2 - i], 1e-12));
        }
        // peak at t = z
        let g = gamma_vector(24, 7).unwrap();
        let peak = g.iter().cloned().fold(f64::MIN, f64::max);
        assert!(close(g[6], peak, 0.0));
    }

    #[test]
    fn gamma_norm_bounds_small_case() {
        let n = 6usize;
        let z = 2usize;
        let g = gamma_vector(n, z).unwrap();
        let l2 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ntau = 2.0; // min(z, n-z)
        assert!(l2 >= ntau / 4.0);
        assert!(l2 <= ntau * (std::f64::consts::E * n as f64 / 2.0).ln().sqrt());
    }

    #[test]
    fn degenerate_two_point_series() {
        let x = ObservationMatrix::new(array![[1.0, 3.0], [0.0, 0.0]]).unwrap();
        let t = cusum_transform(&x);
        assert_eq!(t.values().dim(), (2, 1));
        // sqrt(1*1/2) * (3 - 1)
        assert!(close(t.values()[[0, 0]], 2.0 / 2.0f64.sqrt(), 1e-12));
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(ObservationMatrix::new(Array2::zeros((1, 1))).is_err());
        assert!(ObservationMatrix::new(array![[f64::NAN, 1.0]]).is_err());
        assert!(gamma_vector(10, 0).is_err());
        assert!(gamma_vector(10, 10).is_err());
        // identical consecutive segment means
        assert!(PiecewiseMeanSpec::new(
            6,
            1,
            vec![3],
            vec![array![1.0], array![1.0]]
        )
        .is_err());
    }

    #[test]
    fn derived_quantities() {
        let spec = PiecewiseMeanSpec::new(
            10,
            3,
            vec![2, 7],
            vec![array![0.0, 0.0, 0.0], array![3.0, 4.0, 0.0], array![3.0, 4.0, 1.0]],
        )
        .unwrap();
        assert_eq!(spec.sparsity(), 2);
        assert!(close(spec.min_spacing_fraction(), 0.2, 1e-15));
        assert!(close(spec.min_change_magnitude().unwrap(), 1.0, 1e-15));
        let mu = spec.mean_matrix();
        assert_eq!(mu[[0, 1]], 0.0);
        assert_eq!(mu[[0, 2]], 3.0);
        assert_eq!(mu[[2, 7]], 1.0);
    }

    #[test]
    fn split_alternating_matches_definition() {
        let x = ObservationMatrix::new(array![[1.0, 2.0, 3.0, 4.0, 5.0]]).unwrap();
        let (x1, x2) = x.split_alternating().unwrap();
        assert_eq!(x1.values().row(0).to_vec(), vec![1.0, 3.0]);
        assert_eq!(x2.values().row(0).to_vec(), vec![2.0, 4.0]);
    }
}
