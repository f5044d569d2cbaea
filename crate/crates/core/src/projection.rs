// SPDX-License-Identifier: MIT OR Apache-2.0

//! Estimation of the sparse projection direction.
//!
//! Both estimators maximise `<T, M> - lambda * ||M||_1` over a convex body:
//! the nuclear-norm unit ball (solved by ADMM with a nuclear-ball projection
//! and an entrywise soft-threshold step) or the entrywise l2 unit ball
//! (closed form: normalised soft-thresholding). The projection direction is
//! the leading left singular vector of the optimiser. A brute-force k-sparse
//! maximiser over row subsets is provided as a test oracle for small `p`.

use ndarray::{Array1, Array2, ArrayView2};

use crate::cusum::CusumMatrix;
use crate::error::{Error, Result};
use crate::linalg::GramSpectrum;

/// Which solver backs the direction estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    /// Closed-form optimiser over the entrywise l2 ball.
    Soft,
    /// ADMM over the nuclear-norm ball.
    Admm,
}

/// Feasible set an optimiser was computed over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintSet {
    NuclearBall,
    L2Ball,
    BruteForceKSparse,
}

/// Solver knobs. `lambda: None` means "derive the default regularisation
/// level from the data dimensions at the call site".
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub lambda: Option<f64>,
    /// Relative ADMM stopping tolerance: iteration ends once
    /// `max|Y - Z| <= primal_dual_tol * (1 + max|T|)`.
    pub primal_dual_tol: f64,
    pub max_iterations: usize,
    pub power_iteration_tol: f64,
    pub power_iteration_max: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: None,
            primal_dual_tol: 1e-4,
            max_iterations: 10_000,
            power_iteration_tol: 1e-9,
            power_iteration_max: 500,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambda {
            if !l.is_finite() || l < 0.0 {
                return Err(Error::invalid_input(format!("lambda must be finite and >= 0, got {l}")));
            }
        }
        if !(self.primal_dual_tol > 0.0) || !(self.power_iteration_tol > 0.0) {
            return Err(Error::invalid_input("solver tolerances must be positive"));
        }
        if self.max_iterations == 0 || self.power_iteration_max == 0 {
            return Err(Error::invalid_input("iteration limits must be positive"));
        }
        Ok(())
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut cfg = self.clone();
        cfg.lambda = Some(lambda);
        cfg
    }
}

/// Optimiser of one of the convex programs, together with its leading left
/// singular vector and diagnostics.
#[derive(Clone, Debug)]
pub struct ProjectionSolution {
    pub m_hat: Array2<f64>,
    /// Unit vector; first nonzero coordinate is positive.
    pub v_hat: Array1<f64>,
    /// `<T, m_hat> - lambda * ||m_hat||_1`.
    pub objective: f64,
    pub iterations: usize,
    pub constraint_set: ConstraintSet,
    /// Upper bound on the objective over either feasible set:
    /// the Frobenius norm of `soft(T, lambda)`.
    pub certificate: f64,
    pub converged: bool,
}

/// Entrywise soft-thresholding: `sgn(m) * max(|m| - lambda, 0)`.
pub fn soft_threshold(m: &ArrayView2<f64>, lambda: f64) -> Array2<f64> {
    debug_assert!(lambda >= 0.0);
    m.mapv(|v| v.signum() * (v.abs() - lambda).max(0.0))
}

/// Euclidean projection onto the standard probability simplex
/// `{x : x_i >= 0, sum x_i = 1}`.
pub fn project_simplex(d: &[f64]) -> Result<Vec<f64>> {
    if d.is_empty() {
        return Err(Error::invalid_input("cannot project an empty vector onto the simplex"));
    }
    let mut sorted: Vec<f64> = d.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        css += u;
        let candidate = (css - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    Ok(d.iter().map(|&v| (v - theta).max(0.0)).collect())
}

/// Frobenius-distance projection onto the nuclear-norm unit ball: inputs
/// already inside the ball are returned unchanged, otherwise the singular
/// values are replaced by their simplex projection.
pub fn project_nuclear_ball(m: &ArrayView2<f64>) -> Result<Array2<f64>> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid_input("matrix entries must be finite"));
    }
    let spectrum = GramSpectrum::compute(m)?;
    let nuclear: f64 = spectrum.d.iter().sum();
    if nuclear <= 1.0 {
        return Ok(m.to_owned());
    }
    let projected = project_simplex(&spectrum.d)?;
    Ok(spectrum.with_singular_values(m, &projected))
}

/// Leading left singular vector by power iteration on `M M'`.
#[derive(Clone, Debug)]
pub struct LeadingVector {
    pub vector: Array1<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration for `argmax ||M' v||_2` over unit vectors.
///
/// The starting vector is proportional to the row norms of `M` (falling back
/// to canonical basis vectors when that lands in the null space), so the
/// output is deterministic. Sign convention: first nonzero entry positive.
/// When the spectrum is too degenerate to converge within `max_iter`, the
/// best iterate is returned with `converged = false`.
pub fn leading_left_singular_vector(
    m: &ArrayView2<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<LeadingVector> {
    let (p, w) = m.dim();
    if p == 0 || w == 0 {
        return Err(Error::invalid_input("matrix must be nonempty"));
    }
    let mut v = Array1::<f64>::zeros(p);
    for (j, row) in m.outer_iter().enumerate() {
        v[j] = row.iter().map(|x| x * x).sum::<f64>().sqrt();
    }
    let norm = l2_norm(&v);
    if norm == 0.0 {
        return Err(Error::invalid_input("zero matrix has no leading singular vector"));
    }
    v.mapv_inplace(|x| x / norm);

    let mut restarts = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let u = m.t().dot(&v);
        let y = m.dot(&u);
        let ny = l2_norm(&y);
        if ny == 0.0 {
            // the iterate fell in the null space of M M'; restart from the
            // next canonical basis vector
            if restarts >= p {
                return Err(Error::solver("power iteration found no invariant direction"));
            }
            v.fill(0.0);
            v[restarts] = 1.0;
            restarts += 1;
            continue;
        }
        let next = y.mapv(|x| x / ny);
        let delta = v
            .iter()
            .zip(next.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        v = next;
        if delta <= tol {
            converged = true;
            break;
        }
    }
    fix_sign(&mut v);
    Ok(LeadingVector { vector: v, iterations, converged })
}

fn l2_norm(v: &Array1<f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn fix_sign(v: &mut Array1<f64>) {
    if let Some(first) = v.iter().find(|x| **x != 0.0) {
        if *first < 0.0 {
            v.mapv_inplace(|x| -x);
        }
    }
}

fn max_abs(m: &ArrayView2<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

fn frobenius(m: &ArrayView2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn l1_norm(m: &ArrayView2<f64>) -> f64 {
    m.iter().map(|v| v.abs()).sum()
}

fn inner(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn finish_solution(
    t: &CusumMatrix,
    m_hat: Array2<f64>,
    lambda: f64,
    cfg: &SolverConfig,
    constraint_set: ConstraintSet,
    iterations: usize,
    converged: bool,
) -> Result<ProjectionSolution> {
    let certificate = frobenius(&soft_threshold(&t.values().view(), lambda).view());
    let objective = inner(&t.values().view(), &m_hat.view()) - lambda * l1_norm(&m_hat.view());
    let v_hat = if max_abs(&m_hat.view()) == 0.0 {
        // Zero optimiser: every direction is equivalent, return e_1 so the
        // solution still carries a unit vector.
        let mut e1 = Array1::zeros(t.p());
        e1[0] = 1.0;
        e1
    } else {
        leading_left_singular_vector(&m_hat.view(), cfg.power_iteration_tol, cfg.power_iteration_max)?
            .vector
    };
    Ok(ProjectionSolution {
        m_hat,
        v_hat,
        objective,
        iterations,
        constraint_set,
        certificate,
        converged,
    })
}

/// Orthonormalises the columns of `v` in place (modified Gram-Schmidt, two
/// passes). Returns false when a column collapses to zero.
fn orthonormalize(v: &mut Array2<f64>) -> bool {
    let (_, b) = v.dim();
    for _ in 0..2 {
        for j in 0..b {
            for i in 0..j {
                let proj: f64 = {
                    let (ci, cj) = (v.column(i), v.column(j));
                    ci.iter().zip(cj.iter()).map(|(a, b)| a * b).sum()
                };
                let ci = v.column(i).to_owned();
                let mut cj = v.column_mut(j);
                cj.iter_mut().zip(ci.iter()).for_each(|(x, y)| *x -= proj * y);
            }
            let norm: f64 = v.column(j).iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-300 {
                return false;
            }
            v.column_mut(j).mapv_inplace(|x| x / norm);
        }
    }
    true
}

/// Warm-startable partial nuclear-ball projection used inside the ADMM
/// loop, where the retained rank after water-filling is tiny.
///
/// Subspace iteration on `A'A` refines a block of right singular vectors;
/// once the Ritz values are stable, the water-filling cut is computed over
/// the block. Because the retention condition is a prefix property of the
/// sorted singular values, a cut that falls strictly inside a converged
/// block is exact regardless of the unseen smaller values; anything else
/// (cut not inside the block, slow convergence, tiny spectra) returns
/// `None` and the caller takes the dense route.
struct PartialProjector {
    warm: Option<Array2<f64>>,
}

impl PartialProjector {
    fn new() -> Self {
        PartialProjector { warm: None }
    }

    fn project(&mut self, a: &ArrayView2<f64>) -> Result<Option<Array2<f64>>> {
        let (p, m) = a.dim();
        let small = p.min(m);
        let mut b = self.warm.as_ref().map_or(4, |v| v.ncols()).clamp(2, small);
        'grow: loop {
            if 4 * b >= small {
                return Ok(None); // dense route is just as cheap
            }
            // deterministic start: warm subspace plus fixed-seed padding
            let mut v = Array2::<f64>::zeros((m, b));
            let mut g = crate::rng::GaussianStream::new(crate::rng::stream(0x5eed_b10c, 0, 0));
            if let Some(w) = &self.warm {
                let keep = w.ncols().min(b);
                v.slice_mut(ndarray::s![.., ..keep]).assign(&w.slice(ndarray::s![.., ..keep]));
                for j in keep..b {
                    for i in 0..m {
                        v[[i, j]] = g.next();
                    }
                }
            } else {
                for x in v.iter_mut() {
                    *x = g.next();
                }
            }
            if !orthonormalize(&mut v) {
                return Ok(None);
            }
            let mut prev_ritz: Option<Vec<f64>> = None;
            for _sweep in 0..60 {
                let w = a.dot(&v); // p x b
                let mut v2 = a.t().dot(&w); // m x b
                if !orthonormalize(&mut v2) {
                    return Ok(None);
                }
                v = v2;
                // Rayleigh-Ritz on the block
                let av = a.dot(&v); // p x b
                let s = av.t().dot(&av); // b x b
                let (lam, evecs) = crate::linalg::sym_eigh(&s.view())?;
                let ritz: Vec<f64> = (0..b).map(|i| lam[b - 1 - i].max(0.0).sqrt()).collect();
                let stable = prev_ritz.as_ref().is_some_and(|prev| {
                    prev.iter()
                        .zip(&ritz)
                        .all(|(x, y)| (x - y).abs() <= 1e-11 * ritz[0].max(1.0))
                });
                if stable {
                    // water-filling over the block
                    let cut = project_simplex(&ritz)?;
                    let retained = cut.iter().filter(|x| **x > 0.0).count();
                    if retained == 0 {
                        return Ok(None); // could mean nuclear norm <= 1
                    }
                    if retained >= b {
                        b *= 2; // cut not strictly inside the block
                        continue 'grow;
                    }
                    // rotate the block onto Ritz vectors (descending order)
                    let mut rot = Array2::<f64>::zeros((b, retained));
                    for out in 0..retained {
                        rot.column_mut(out).assign(&evecs.column(b - 1 - out));
                    }
                    let v_r = v.dot(&rot); // m x retained
                    let u_scaled = a.dot(&v_r); // columns are d_i * u_i
                    let mut out = Array2::<f64>::zeros((p, m));
                    for i in 0..retained {
                        let w_i = cut[i] / ritz[i];
                        let u_col = u_scaled.column(i);
                        let v_col = v_r.column(i);
                        for (row, &u_val) in u_col.iter().enumerate() {
                            let f = w_i * u_val;
                            if f != 0.0 {
                                for (col, &v_val) in v_col.iter().enumerate() {
                                    out[[row, col]] += f * v_val;
                                }
                            }
                        }
                    }
                    self.warm = Some(v);
                    return Ok(Some(out));
                }
                prev_ritz = Some(ritz);
            }
            return Ok(None); // subspace iteration failed to settle
        }
    }
}

/// ADMM for the nuclear-ball program, iterating
/// `Y <- П(Z - R + T)`, `Z <- soft(Y + R, lambda)`, `R <- R + (Y - Z)`
/// from zero starts until `max|Y - Z|` falls below the scale-aware
/// tolerance, or the iteration budget runs out (in which case the best
/// iterate is returned flagged `converged = false`).
///
/// The nuclear projection runs through a warm-started partial eigensolver
/// sized to the few singular values the water-filling keeps; its output is
/// re-verified against the dense projection on a sampled schedule, and any
/// disagreement permanently switches the solve to the dense route.
pub fn admm_solve(t: &CusumMatrix, cfg: &SolverConfig) -> Result<ProjectionSolution> {
    cfg.validate()?;
    let lambda = cfg
        .lambda
        .ok_or_else(|| Error::invalid_input("admm_solve requires a concrete lambda"))?;
    if !(lambda > 0.0) {
        return Err(Error::invalid_input(format!("admm_solve requires lambda > 0, got {lambda}")));
    }
    let dim = t.values().raw_dim();
    let t_inf = max_abs(&t.values().view());
    let tol = cfg.primal_dual_tol * (1.0 + t_inf);
    let mut y;
    let mut z = Array2::<f64>::zeros(dim);
    let mut r = Array2::<f64>::zeros(dim);
    let mut iterations = 0usize;
    let mut converged = false;
    let mut partial = PartialProjector::new();
    let mut use_partial = true;
    loop {
        iterations += 1;
        let a = &z - &r + t.values();
        let fast = if use_partial { partial.project(&a.view())? } else { None };
        y = match fast {
            Some(candidate) => {
                // sampled cross-check against the dense projection
                if iterations % 64 == 1 {
                    let exact = project_nuclear_ball(&a.view())?;
                    let dev = candidate
                        .iter()
                        .zip(exact.iter())
                        .map(|(x, y)| (x - y).abs())
                        .fold(0.0f64, f64::max);
                    if dev > 1e-7 * (1.0 + t_inf) {
                        use_partial = false;
                        exact
                    } else {
                        candidate
                    }
                } else {
                    candidate
                }
            }
            None => project_nuclear_ball(&a.view())?,
        };
        z = soft_threshold(&(&y + &r).view(), lambda);
        let diff = &y - &z;
        r += &diff;
        if max_abs(&diff.view()) <= tol {
            converged = true;
            break;
        }
        if iterations >= cfg.max_iterations {
            break;
        }
    }
    finish_solution(t, y, lambda, cfg, ConstraintSet::NuclearBall, iterations, converged)
}

/// Closed-form optimiser over the entrywise l2 ball:
/// `soft(T, lambda) / ||soft(T, lambda)||_F`.
///
/// Errors with [`Error::ThresholdTooLarge`] when soft-thresholding removes
/// every entry; the caller should lower `lambda` or report no signal.
pub fn closed_form_s2(t: &CusumMatrix, lambda: f64, cfg: &SolverConfig) -> Result<ProjectionSolution> {
    cfg.validate()?;
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid_input(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let s = soft_threshold(&t.values().view(), lambda);
    let norm = frobenius(&s.view());
    if norm == 0.0 {
        return Err(Error::ThresholdTooLarge);
    }
    let m_hat = s.mapv(|v| v / norm);
    finish_solution(t, m_hat, lambda, cfg, ConstraintSet::L2Ball, 0, true)
}

/// Number of `k`-subsets of `p` elements, saturating above `limit`.
fn binomial_capped(p: usize, k: usize, limit: f64) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (p - i) as f64 / (i + 1) as f64;
        if acc > limit {
            return f64::INFINITY;
        }
    }
    acc
}

const BRUTE_FORCE_LIMIT: f64 = 1e6;

/// Exhaustive k-sparse leading left singular vector: enumerates all row
/// subsets of size `k` (lexicographically; first maximiser wins ties) and
/// returns the unit vector supported on the best subset.
///
/// Refuses when `C(p, k)` exceeds 10^6.
pub fn brute_force_sparse_svd(t: &CusumMatrix, k: usize) -> Result<Array1<f64>> {
    let p = t.p();
    if k < 1 || k > p {
        return Err(Error::invalid_input(format!("sparsity k={k} must lie in [1, p={p}]")));
    }
    if binomial_capped(p, k, BRUTE_FORCE_LIMIT) > BRUTE_FORCE_LIMIT {
        return Err(Error::CombinatorialGuard(format!(
            "C({p}, {k}) exceeds the enumeration budget of {BRUTE_FORCE_LIMIT:.0}"
        )));
    }

    let values = t.values();
    let w = values.ncols();
    let mut subset: Vec<usize> = (0..k).collect();
    let mut best: Option<(f64, Vec<usize>, Array1<f64>)> = None;
    loop {
        // leading eigenpair of the k x k Gram matrix of the selected rows
        let mut gram = Array2::<f64>::zeros((k, k));
        for a in 0..k {
            for b in a..k {
                let mut acc = 0.0;
                for c in 0..w {
                    acc += values[[subset[a], c]] * values[[subset[b], c]];
                }
                gram[[a, b]] = acc;
                gram[[b, a]] = acc;
            }
        }
        let (lam, vecs) = crate::linalg::sym_eigh(&gram.view())?;
        let top = lam.len() - 1;
        if best.as_ref().map_or(true, |(s, _, _)| lam[top] > *s) {
            best = Some((lam[top], subset.clone(), vecs.column(top).to_owned()));
        }

        // next lexicographic k-subset
        let mut i = k;
        loop {
            if i == 0 {
                // enumeration finished
                let (_, idx, local) = best.expect("at least one subset evaluated");
                let mut v = Array1::<f64>::zeros(p);
                for (slot, &row) in idx.iter().enumerate() {
                    v[row] = local[slot];
                }
                let norm = l2_norm(&v);
                v.mapv_inplace(|x| x / norm);
                fix_sign(&mut v);
                return Ok(v);
            }
            i -= 1;
            if subset[i] != i + p - k {
                subset[i] += 1;
                for j in i + 1..k {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}
