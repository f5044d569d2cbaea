// SPDX-License-Identifier: MIT OR Apache-2.0

//! Spatial-dependence variant of the split estimator.
//!
//! When noise columns share a covariance `Sigma`, the best projection
//! direction is `Sigma^{-1} theta` (normalised) rather than `theta`. This
//! module supplies the two parametric precision families with closed-form
//! maximum-likelihood fits (an AR(1)-in-space model with geometric
//! covariance, and a global equicorrelation model), residual extraction from
//! near-endpoint column differences, and the precision-weighted detector.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::cusum::{cusum_transform, ObservationMatrix};
use crate::error::{Error, Result};
use crate::projection::{SolveMethod, SolverConfig};
use crate::single::{default_lambda, solve_direction, DetectionVariant, SingleDetection};

/// Keeps estimated precision matrices finite near the parameter boundary.
const RHO_CLAMP: f64 = 1e-6;

/// Noise dependence family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DependenceKind {
    /// Independent coordinates; the precision step is skipped.
    Iid,
    /// Geometric cross-sectional covariance `rho^|i-j|`.
    LocalAr,
    /// Equicorrelation `(1-rho) I + (rho/p) 1 1'` style global dependence
    /// (precision fitted for `I + (rho/p) 1 1'`).
    GlobalEqui,
    /// Row-wise AR(1) noise; detection needs no modification, so the
    /// precision step is skipped.
    TemporalAr,
}

/// A dependence model with its parameter, used for validation and for
/// building covariance matrices in tests and simulations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DependenceModel {
    pub kind: DependenceKind,
    pub rho: f64,
    pub sigma2: f64,
}

impl DependenceModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0) {
            return Err(Error::invalid_input("sigma2 must be positive"));
        }
        match self.kind {
            DependenceKind::LocalAr | DependenceKind::TemporalAr => {
                if !(self.rho.abs() < 1.0) {
                    return Err(Error::invalid_input(format!("need |rho| < 1, got {}", self.rho)));
                }
            }
            DependenceKind::GlobalEqui => {
                if !(self.rho > -1.0) {
                    return Err(Error::invalid_input(format!("need rho > -1, got {}", self.rho)));
                }
            }
            DependenceKind::Iid => {}
        }
        Ok(())
    }

    /// Cross-sectional covariance matrix of one column (identity for the
    /// kinds without spatial structure). The global family here is
    /// `I + (rho/p) 1 1'`.
    pub fn covariance(&self, p: usize) -> Result<Array2<f64>> {
        self.validate()?;
        let mut sigma = Array2::eye(p);
        match self.kind {
            DependenceKind::LocalAr => {
                for i in 0..p {
                    for j in 0..p {
                        sigma[[i, j]] = self.rho.powi((i as i32 - j as i32).abs());
                    }
                }
            }
            DependenceKind::GlobalEqui => {
                let add = self.rho / p as f64;
                for i in 0..p {
                    for j in 0..p {
                        sigma[[i, j]] += add;
                    }
                }
            }
            _ => {}
        }
        sigma.mapv_inplace(|v| v * self.sigma2);
        Ok(sigma)
    }
}

/// Exact inverse of the geometric covariance `(rho^|i-j|)`: a tridiagonal
/// matrix with corner corrections.
pub fn precision_local(rho: f64, p: usize) -> Result<Array2<f64>> {
    if !(rho.abs() < 1.0) {
        return Err(Error::invalid_input(format!("need |rho| < 1, got {rho}")));
    }
    if p < 2 {
        return Err(Error::invalid_input(format!("need p >= 2, got {p}")));
    }
    let denom = 1.0 - rho * rho;
    let mut theta = Array2::zeros((p, p));
    for i in 0..p {
        theta[[i, i]] = (1.0 + rho * rho) / denom;
        if i + 1 < p {
            theta[[i, i + 1]] = -rho / denom;
            theta[[i + 1, i]] = -rho / denom;
        }
    }
    theta[[0, 0]] -= rho * rho / denom;
    theta[[p - 1, p - 1]] -= rho * rho / denom;
    Ok(theta)
}

/// Exact inverse of `I + (rho/p) 1 1'`, by the rank-one update formula.
pub fn precision_global(rho: f64, p: usize) -> Result<Array2<f64>> {
    if !(rho > -1.0) {
        return Err(Error::invalid_input(format!("need rho > -1, got {rho}")));
    }
    if p < 1 {
        return Err(Error::invalid_input("need p >= 1"));
    }
    let add = -rho / (p as f64 * (1.0 + rho));
    let mut theta = Array2::eye(p);
    for i in 0..p {
        for j in 0..p {
            theta[[i, j]] += add;
        }
    }
    Ok(theta)
}

/// A fitted precision matrix, stored in structured form so the
/// matrix-vector product stays `O(p)`.
#[derive(Clone, Debug)]
pub struct PrecisionEstimate {
    /// The maximum-likelihood parameter (before the safety clamp used to
    /// materialise the matrix).
    pub rho_hat: f64,
    pub kind: DependenceKind,
    pub p: usize,
    pub sample_count: usize,
    /// Whether `rho_hat` had to be pulled back from the boundary of the
    /// parameter space.
    pub clamped: bool,
}

impl PrecisionEstimate {
    fn rho_safe(&self) -> f64 {
        match self.kind {
            DependenceKind::LocalAr => self.rho_hat.clamp(-1.0 + RHO_CLAMP, 1.0 - RHO_CLAMP),
            DependenceKind::GlobalEqui => self.rho_hat.max(-1.0 + RHO_CLAMP),
            _ => 0.0,
        }
    }

    /// Materialises the `p x p` precision matrix.
    pub fn matrix(&self) -> Result<Array2<f64>> {
        match self.kind {
            DependenceKind::LocalAr => precision_local(self.rho_safe(), self.p),
            DependenceKind::GlobalEqui => precision_global(self.rho_safe(), self.p),
            _ => Ok(Array2::eye(self.p)),
        }
    }

    /// `Theta v` using the tridiagonal / rank-one structure.
    pub fn apply(&self, v: &ArrayView1<f64>) -> Array1<f64> {
        assert_eq!(v.len(), self.p, "dimension mismatch in precision apply");
        let rho = self.rho_safe();
        match self.kind {
            DependenceKind::LocalAr => {
                let denom = 1.0 - rho * rho;
                let p = self.p;
                let mut out = Array1::zeros(p);
                for i in 0..p {
                    let diag = if i == 0 || i == p - 1 { 1.0 } else { 1.0 + rho * rho };
                    let mut acc = diag * v[i];
                    if i > 0 {
                        acc -= rho * v[i - 1];
                    }
                    if i + 1 < p {
                        acc -= rho * v[i + 1];
                    }
                    out[i] = acc / denom;
                }
                out
            }
            DependenceKind::GlobalEqui => {
                let sum: f64 = v.iter().sum();
                let shift = rho / (self.p as f64 * (1.0 + rho)) * sum;
                v.mapv(|x| x - shift)
            }
            _ => v.to_owned(),
        }
    }
}

/// Sufficient statistics of the local model: `a` is the mean adjacent
/// product, `b` the boundary-corrected mean square, plus the raw traces the
/// likelihood needs.
struct LocalStats {
    a: f64,
    b: f64,
    tr: f64,
    s_first: f64,
    s_last: f64,
    p: usize,
    m: usize,
}

fn local_stats(samples: &ArrayView2<f64>) -> Result<LocalStats> {
    let (p, m) = samples.dim();
    if p < 2 || m < 1 {
        return Err(Error::invalid_input(format!("need p >= 2 and m >= 1 samples, got p={p}, m={m}")));
    }
    let mf = m as f64;
    let mut adj = 0.0;
    let mut tr = 0.0;
    let mut s_first = 0.0;
    let mut s_last = 0.0;
    for t in 0..m {
        let col = samples.column(t);
        for j in 0..p {
            tr += col[j] * col[j];
            if j + 1 < p {
                adj += col[j] * col[j + 1];
            }
        }
        s_first += col[0] * col[0];
        s_last += col[p - 1] * col[p - 1];
    }
    let a = adj / mf / (p - 1) as f64;
    let tr = tr / mf;
    let s_first = s_first / mf;
    let s_last = s_last / mf;
    let b = (2.0 * tr - s_first - s_last) / (p - 1) as f64;
    Ok(LocalStats { a, b, tr, s_first, s_last, p, m })
}

/// Real roots of the monic cubic `x^3 + c2 x^2 + c1 x + c0`.
fn cubic_real_roots(c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    // depressed form t^3 + pt + q with x = t - c2/3
    let shift = c2 / 3.0;
    let p = c1 - c2 * c2 / 3.0;
    let q = 2.0 * c2.powi(3) / 27.0 - c2 * c1 / 3.0 + c0;
    let mut roots = Vec::new();
    let disc = -4.0 * p.powi(3) - 27.0 * q * q;
    if disc > 0.0 {
        // three real roots
        let r = (-p / 3.0).sqrt();
        let phi = (3.0 * q / (2.0 * p * r)).clamp(-1.0, 1.0).acos();
        for k in 0..3 {
            roots.push(2.0 * r * (phi / 3.0 - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - shift);
        }
    } else {
        // one real root, Cardano
        let half_q = q / 2.0;
        let inner = (half_q * half_q + p.powi(3) / 27.0).max(0.0).sqrt();
        let t = (-half_q + inner).cbrt() + (-half_q - inner).cbrt();
        roots.push(t - shift);
    }
    // Newton polish on the original cubic
    for r in roots.iter_mut() {
        for _ in 0..4 {
            let f = ((*r + c2) * *r + c1) * *r + c0;
            let df = (3.0 * *r + 2.0 * c2) * *r + c1;
            if df.abs() > 1e-300 {
                *r -= f / df;
            }
        }
    }
    roots
}

/// Bisection sweep for sign changes of the cubic on `[-1, 1]`, backing up
/// the closed form in ill-conditioned cases.
fn cubic_roots_in_unit_interval(c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    let f = |x: f64| ((x + c2) * x + c1) * x + c0;
    let mut roots: Vec<f64> = cubic_real_roots(c2, c1, c0)
        .into_iter()
        .filter(|r| r.is_finite() && (-1.0 - 1e-9..=1.0 + 1e-9).contains(r))
        .map(|r| r.clamp(-1.0, 1.0))
        .collect();
    let grid = 400;
    let mut prev_x = -1.0;
    let mut prev_f = f(prev_x);
    for i in 1..=grid {
        let x = -1.0 + 2.0 * i as f64 / grid as f64;
        let fx = f(x);
        if prev_f == 0.0 {
            roots.push(prev_x);
        } else if prev_f * fx < 0.0 {
            let (mut lo, mut hi) = (prev_x, x);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if f(lo) * f(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev_x = x;
        prev_f = fx;
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-7);
    roots
}

/// Profile log-likelihood of the local model (up to constants), evaluated
/// with the parameter pulled marginally inside the open interval.
fn local_log_likelihood(stats: &LocalStats, rho: f64) -> f64 {
    let r = rho.clamp(-1.0 + 1e-9, 1.0 - 1e-9);
    let denom = 1.0 - r * r;
    let quad = (1.0 + r * r) * stats.tr
        - r * r * (stats.s_first + stats.s_last)
        - 2.0 * r * (stats.p - 1) as f64 * stats.a;
    -((stats.p - 1) as f64) * denom.ln() - quad / denom
}

/// Maximum-likelihood fit of the geometric cross-sectional model from iid
/// mean-zero samples (columns of `samples`). The estimate is the root of the
/// score cubic in `[-1, 1]` with the highest likelihood; when no root lands
/// in range the nearest endpoint is taken and flagged.
pub fn estimate_rho_local(samples: &ArrayView2<f64>) -> Result<PrecisionEstimate> {
    let stats = local_stats(samples)?;
    // score cubic: rho^3 - a rho^2 + (b - 1) rho - a
    let candidates = cubic_roots_in_unit_interval(-stats.a, stats.b - 1.0, -stats.a);
    let (rho_hat, clamped) = if candidates.is_empty() {
        let all = cubic_real_roots(-stats.a, stats.b - 1.0, -stats.a);
        let nearest = all
            .into_iter()
            .filter(|r| r.is_finite())
            .min_by(|x, y| {
                let dx = (x.clamp(-1.0, 1.0) - x).abs();
                let dy = (y.clamp(-1.0, 1.0) - y).abs();
                dx.total_cmp(&dy)
            })
            .unwrap_or(0.0);
        (nearest.clamp(-1.0, 1.0), true)
    } else {
        let best = candidates
            .into_iter()
            .max_by(|x, y| {
                local_log_likelihood(&stats, *x).total_cmp(&local_log_likelihood(&stats, *y))
            })
            .unwrap();
        (best, false)
    };
    Ok(PrecisionEstimate {
        rho_hat,
        kind: DependenceKind::LocalAr,
        p: stats.p,
        sample_count: stats.m,
        clamped,
    })
}

/// Closed-form maximum-likelihood fit of the global equicorrelation model:
/// the grand mean of the sample covariance minus one.
pub fn estimate_rho_global(samples: &ArrayView2<f64>) -> Result<PrecisionEstimate> {
    let (p, m) = samples.dim();
    if p < 1 || m < 1 {
        return Err(Error::invalid_input("need at least one coordinate and one sample"));
    }
    let mut grand = 0.0;
    for t in 0..m {
        let s: f64 = samples.column(t).iter().sum();
        grand += s * s;
    }
    let rho_hat = grand / (p as f64 * m as f64) - 1.0;
    let clamped = rho_hat <= -1.0 + RHO_CLAMP;
    Ok(PrecisionEstimate {
        rho_hat,
        kind: DependenceKind::GlobalEqui,
        p,
        sample_count: m,
        clamped,
    })
}

/// Noise proxies from the odd-column half of a split: disjoint first-order
/// column differences taken within `n1 * tau_lb` of each end, scaled by
/// `2^{-1/2}` so each residual column has the noise covariance. Returns a
/// `p x m` matrix with `m = 2 * floor(n1 * tau_lb / 2)`.
pub fn build_residuals(x1: &ObservationMatrix, tau_lb: f64) -> Result<Array2<f64>> {
    if !(0.0..1.0).contains(&tau_lb) || tau_lb <= 0.0 {
        return Err(Error::invalid_input(format!("tau_lb must lie in (0, 1), got {tau_lb}")));
    }
    let n1 = x1.n();
    let r = (n1 as f64 * tau_lb / 2.0).floor() as usize;
    if r < 1 {
        return Err(Error::invalid_input(format!(
            "too few columns for residuals: n1={n1}, tau_lb={tau_lb}"
        )));
    }
    let p = x1.p();
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let v = x1.values();
    let mut out = Array2::zeros((p, 2 * r));
    for t in 1..=r {
        // left end: columns 2t and 2t-1 (1-based)
        for j in 0..p {
            out[[j, t - 1]] = scale * (v[[j, 2 * t - 1]] - v[[j, 2 * t - 2]]);
        }
        // right end: columns n1-2t and n1-2t+1 (1-based)
        for j in 0..p {
            out[[j, r + t - 1]] = scale * (v[[j, n1 - 2 * t - 1]] - v[[j, n1 - 2 * t]]);
        }
    }
    Ok(out)
}

/// Split detection with its precision diagnostics.
#[derive(Clone, Debug)]
pub struct SpatialDetection {
    pub detection: SingleDetection,
    /// The fitted precision, absent when the kind needs none.
    pub precision: Option<PrecisionEstimate>,
    /// True when precision estimation failed and the identity was used.
    pub fallback_identity: bool,
}

/// Sample-splitting detector for spatially dependent noise: the projection
/// direction estimated on the odd columns is reweighted by a fitted
/// precision matrix before scanning the even-column CUSUM. Estimation
/// failures fall back to the identity weighting and are flagged.
pub fn inspect_single_spatial(
    x: &ObservationMatrix,
    cfg: &SolverConfig,
    method: SolveMethod,
    kind: DependenceKind,
    tau_lb: f64,
) -> Result<SpatialDetection> {
    cfg.validate()?;
    let lambda = cfg.lambda.unwrap_or_else(|| default_lambda(x.p(), x.n()));
    let (x1, x2) = x.split_alternating()?;
    let t1 = cusum_transform(&x1);
    let t2 = cusum_transform(&x2);
    let sol = solve_direction(&t1, cfg, method, lambda)?;

    let (precision, fallback_identity) = match kind {
        DependenceKind::Iid | DependenceKind::TemporalAr => (None, false),
        DependenceKind::LocalAr => match build_residuals(&x1, tau_lb)
            .and_then(|w| estimate_rho_local(&w.view()))
        {
            Ok(pe) => (Some(pe), false),
            Err(_) => (None, true),
        },
        DependenceKind::GlobalEqui => match build_residuals(&x1, tau_lb)
            .and_then(|w| estimate_rho_global(&w.view()))
        {
            Ok(pe) => (Some(pe), false),
            Err(_) => (None, true),
        },
    };

    let mut v_proj = match &precision {
        Some(pe) => pe.apply(&sol.v_hat.view()),
        None => sol.v_hat.clone(),
    };
    let norm = v_proj.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::solver("precision-weighted direction vanished"));
    }
    v_proj.mapv_inplace(|v| v / norm);

    let values = t2.values();
    let projected: Vec<f64> = (0..values.ncols())
        .map(|c| values.column(c).iter().zip(v_proj.iter()).map(|(a, b)| a * b).sum())
        .collect();
    let mut best = (1usize, f64::MIN);
    for (i, v) in projected.iter().enumerate() {
        if v.abs() > best.1 {
            best = (i + 1, v.abs());
        }
    }
    Ok(SpatialDetection {
        detection: SingleDetection {
            z_hat: 2 * best.0,
            t_max: best.1,
            v_hat: v_proj,
            projected_cusum: projected,
            variant: DetectionVariant::Split,
        },
        precision,
        fallback_identity,
    })
}
