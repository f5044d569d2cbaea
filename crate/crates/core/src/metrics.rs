// SPDX-License-Identifier: MIT OR Apache-2.0

//! Evaluation metrics for changepoint estimates: Hausdorff distance between
//! location sets, L1-Wasserstein distance between the empirical measures of
//! the locations, and the Adjusted Rand Index of the induced segmentations.

use crate::error::{Error, Result};

/// A segmentation of `1..=n` by sorted changepoints in `[1, n-1]`; time `t`
/// belongs to segment `#{z < t}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segmentation {
    n: usize,
    changepoints: Vec<usize>,
}

impl Segmentation {
    pub fn new(n: usize, changepoints: Vec<usize>) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid_input("segmentation needs n >= 1"));
        }
        for (i, &z) in changepoints.iter().enumerate() {
            if z < 1 || z > n - 1 {
                return Err(Error::invalid_input(format!("changepoint {z} outside [1, {}]", n - 1)));
            }
            if i > 0 && changepoints[i - 1] >= z {
                return Err(Error::invalid_input("changepoints must be strictly increasing"));
            }
        }
        Ok(Segmentation { n, changepoints })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn changepoints(&self) -> &[usize] {
        &self.changepoints
    }

    /// Segment label of time `t` (1-based).
    fn label(&self, t: usize) -> usize {
        self.changepoints.partition_point(|z| *z < t)
    }
}

/// Hausdorff distance between two nonempty point sets.
pub fn hausdorff(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid_input("Hausdorff distance needs nonempty sets"));
    }
    if !a.iter().chain(b).all(|v| v.is_finite()) {
        return Err(Error::invalid_input("Hausdorff distance needs finite points"));
    }
    let directed = |from: &[f64], to: &[f64]| {
        from.iter()
            .map(|x| to.iter().map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0f64, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)))
}

/// L1-Wasserstein distance between two probability measures given as
/// weighted point masses `(location, mass)`. Masses must each sum to one;
/// the optimal coupling on the line is the quantile coupling, computed by a
/// merge over cumulative masses.
pub fn wasserstein1(p: &[(f64, f64)], q: &[(f64, f64)]) -> Result<f64> {
    let check = |m: &[(f64, f64)], name: &str| -> Result<Vec<(f64, f64)>> {
        if m.is_empty() {
            return Err(Error::invalid_input(format!("{name} has no atoms")));
        }
        let mut total = 0.0;
        for &(x, w) in m {
            if !x.is_finite() || !w.is_finite() || w < 0.0 {
                return Err(Error::invalid_input(format!("{name} has an invalid atom ({x}, {w})")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid_input(format!("{name} has total mass {total}, expected 1")));
        }
        let mut sorted = m.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(sorted)
    };
    let ps = check(p, "first measure")?;
    let qs = check(q, "second measure")?;

    let mut cost = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    let (mut pi, mut qj) = (ps[0].1, qs[0].1);
    loop {
        let step = pi.min(qj);
        cost += step * (ps[i].0 - qs[j].0).abs();
        pi -= step;
        qj -= step;
        if pi <= 1e-15 {
            i += 1;
            if i == ps.len() {
                break;
            }
            pi = ps[i].1;
        }
        if qj <= 1e-15 {
            j += 1;
            if j == qs.len() {
                break;
            }
            qj = qs[j].1;
        }
    }
    Ok(cost)
}

fn choose2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand Index between two segmentations of the same time range,
/// viewed as labelings of `1..=n`. Degenerate cases where the expected and
/// maximal pair-counting indices coincide score 1 for identical labelings
/// and 0 otherwise.
pub fn adjusted_rand_index(s1: &Segmentation, s2: &Segmentation) -> Result<f64> {
    if s1.n() != s2.n() {
        return Err(Error::invalid_input(format!(
            "segmentations cover different ranges: {} vs {}",
            s1.n(),
            s2.n()
        )));
    }
    let n = s1.n();
    let k1 = s1.changepoints.len() + 1;
    let k2 = s2.changepoints.len() + 1;
    let mut table = vec![vec![0.0f64; k2]; k1];
    let mut rows = vec![0.0f64; k1];
    let mut cols = vec![0.0f64; k2];
    for t in 1..=n {
        let (l1, l2) = (s1.label(t), s2.label(t));
        table[l1][l2] += 1.0;
        rows[l1] += 1.0;
        cols[l2] += 1.0;
    }
    let index: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let row_sum: f64 = rows.iter().map(|&c| choose2(c)).sum();
    let col_sum: f64 = cols.iter().map(|&c| choose2(c)).sum();
    let expected = row_sum * col_sum / choose2(n as f64);
    let maximum = 0.5 * (row_sum + col_sum);
    if (maximum - expected).abs() < 1e-12 {
        return Ok(if s1.changepoints == s2.changepoints { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (maximum - expected))
}
