// SPDX-License-Identifier: MIT OR Apache-2.0

//! Python bindings (`inspect_cp`) for the sparse-projection changepoint
//! estimator. Matrices cross the boundary as lists of row lists; detection
//! results come back as dicts.

use inspect_core as core;
use inspect_core::{
    DependenceKind, InspectConfig, NoiseModel, ObservationMatrix, Overlap, SolveMethod,
    SolverConfig,
};
use ndarray::Array2;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

fn err_to_py(e: core::Error) -> PyErr {
    match e {
        core::Error::Solver(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_array2(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    if rows.is_empty() {
        return Err(PyValueError::new_err("matrix must have at least one row"));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(PyValueError::new_err("matrix rows must have equal length"));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((flat.len() / width.max(1), width), flat)
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_observation(rows: Vec<Vec<f64>>) -> PyResult<ObservationMatrix> {
    ObservationMatrix::new(to_array2(rows)?).map_err(err_to_py)
}

fn from_array2(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

fn parse_method(method: &str) -> PyResult<SolveMethod> {
    match method {
        "soft" => Ok(SolveMethod::Soft),
        "admm" => Ok(SolveMethod::Admm),
        _ => Err(PyValueError::new_err(format!(
            "unknown method {method:?}; expected 'soft' or 'admm'"
        ))),
    }
}

fn solver_with(lambda: Option<f64>) -> SolverConfig {
    SolverConfig { lambda, ..SolverConfig::default() }
}

fn detection_dict<'py>(py: Python<'py>, d: &core::SingleDetection) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("z_hat", d.z_hat)?;
    out.set_item("t_max", d.t_max)?;
    out.set_item("v_hat", d.v_hat.to_vec())?;
    out.set_item("projected_cusum", d.projected_cusum.clone())?;
    Ok(out)
}

/// CUSUM transformation of a p x n matrix (rows = coordinates).
#[pyfunction]
fn cusum_transform(x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let x = to_observation(x)?;
    Ok(from_array2(core::cusum_transform(&x).values()))
}

/// Rank-one time profile of a single change at z in a length-n series.
#[pyfunction]
fn gamma_vector(n: usize, z: usize) -> PyResult<Vec<f64>> {
    Ok(core::gamma_vector(n, z).map_err(err_to_py)?.to_vec())
}

#[pyfunction]
fn soft_threshold(m: Vec<Vec<f64>>, lambda: f64) -> PyResult<Vec<Vec<f64>>> {
    let m = to_array2(m)?;
    Ok(from_array2(&core::soft_threshold(&m.view(), lambda)))
}

#[pyfunction]
fn project_simplex(d: Vec<f64>) -> PyResult<Vec<f64>> {
    core::project_simplex(&d).map_err(err_to_py)
}

#[pyfunction]
fn project_nuclear_ball(m: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let m = to_array2(m)?;
    Ok(from_array2(&core::project_nuclear_ball(&m.view()).map_err(err_to_py)?))
}

#[pyfunction]
#[pyo3(signature = (m, tol=1e-9, max_iter=500))]
fn leading_left_singular_vector(m: Vec<Vec<f64>>, tol: f64, max_iter: usize) -> PyResult<Vec<f64>> {
    let m = to_array2(m)?;
    Ok(core::leading_left_singular_vector(&m.view(), tol, max_iter)
        .map_err(err_to_py)?
        .vector
        .to_vec())
}

fn solution_dict<'py>(py: Python<'py>, s: &core::ProjectionSolution) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("m_hat", from_array2(&s.m_hat))?;
    out.set_item("v_hat", s.v_hat.to_vec())?;
    out.set_item("objective", s.objective)?;
    out.set_item("iterations", s.iterations)?;
    out.set_item("certificate", s.certificate)?;
    out.set_item("converged", s.converged)?;
    out.set_item(
        "constraint_set",
        match s.constraint_set {
            core::ConstraintSet::NuclearBall => "nuclear_ball",
            core::ConstraintSet::L2Ball => "l2_ball",
            core::ConstraintSet::BruteForceKSparse => "brute_force_k_sparse",
        },
    )?;
    Ok(out)
}

/// ADMM solve of the nuclear-ball relaxation for a CUSUM matrix `t` of a
/// series of original length `n` (defaults to one more than the column
/// count).
#[pyfunction]
#[pyo3(signature = (t, lambda_, n=None))]
fn admm_solve<'py>(
    py: Python<'py>,
    t: Vec<Vec<f64>>,
    lambda_: f64,
    n: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let m = to_array2(t)?;
    let n = n.unwrap_or(m.ncols() + 1);
    let t = core::CusumMatrix::new(m, n).map_err(err_to_py)?;
    let sol = core::admm_solve(&t, &solver_with(Some(lambda_))).map_err(err_to_py)?;
    solution_dict(py, &sol)
}

/// Closed-form solve over the entrywise l2 ball.
#[pyfunction]
#[pyo3(signature = (t, lambda_, n=None))]
fn closed_form_s2<'py>(
    py: Python<'py>,
    t: Vec<Vec<f64>>,
    lambda_: f64,
    n: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let m = to_array2(t)?;
    let n = n.unwrap_or(m.ncols() + 1);
    let t = core::CusumMatrix::new(m, n).map_err(err_to_py)?;
    let sol = core::closed_form_s2(&t, lambda_, &SolverConfig::default()).map_err(err_to_py)?;
    solution_dict(py, &sol)
}

/// Exhaustive k-sparse leading left singular vector (small p only).
#[pyfunction]
#[pyo3(signature = (t, k, n=None))]
fn brute_force_sparse_svd(t: Vec<Vec<f64>>, k: usize, n: Option<usize>) -> PyResult<Vec<f64>> {
    let m = to_array2(t)?;
    let n = n.unwrap_or(m.ncols() + 1);
    let t = core::CusumMatrix::new(m, n).map_err(err_to_py)?;
    Ok(core::brute_force_sparse_svd(&t, k).map_err(err_to_py)?.to_vec())
}

/// Robust per-row noise scales (1.05 * MAD of first differences).
#[pyfunction]
fn estimate_noise_mad(x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let x = to_observation(x)?;
    Ok(core::estimate_noise_mad(&x).map_err(err_to_py)?.sigma_hat)
}

/// Divides each row by its estimated scale; returns the scaled matrix and
/// the indices of rows left untouched because their estimate was zero.
#[pyfunction]
#[pyo3(signature = (x, sigma_hat=None))]
fn normalize(
    x: Vec<Vec<f64>>,
    sigma_hat: Option<Vec<f64>>,
) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let x = to_observation(x)?;
    let prof = match sigma_hat {
        Some(s) => core::NoiseProfile { sigma_hat: s },
        None => core::estimate_noise_mad(&x).map_err(err_to_py)?,
    };
    let (y, skipped) = core::normalize(&x, &prof).map_err(err_to_py)?;
    Ok((from_array2(y.values()), skipped))
}

/// Default regularisation level for normalised data of the given shape.
#[pyfunction]
fn default_lambda(p: usize, n: usize) -> f64 {
    core::default_lambda(p, n)
}

/// Full-data single-changepoint estimator.
#[pyfunction]
#[pyo3(signature = (x, lambda_=None, method="soft"))]
fn inspect_single<'py>(
    py: Python<'py>,
    x: Vec<Vec<f64>>,
    lambda_: Option<f64>,
    method: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let x = to_observation(x)?;
    let det = core::inspect_single(&x, &solver_with(lambda_), parse_method(method)?)
        .map_err(err_to_py)?;
    detection_dict(py, &det)
}

/// Sample-splitting single-changepoint estimator (even output index).
#[pyfunction]
#[pyo3(signature = (x, lambda_=None, method="soft"))]
fn inspect_single_split<'py>(
    py: Python<'py>,
    x: Vec<Vec<f64>>,
    lambda_: Option<f64>,
    method: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let x = to_observation(x)?;
    let det = core::inspect_single_split(&x, &solver_with(lambda_), parse_method(method)?)
        .map_err(err_to_py)?;
    detection_dict(py, &det)
}

/// Precision-weighted split estimator for spatially dependent noise.
/// `kind` is one of "iid", "local", "global", "temporal".
#[pyfunction]
#[pyo3(signature = (x, kind, tau_lb, lambda_=None, method="soft"))]
fn inspect_single_spatial<'py>(
    py: Python<'py>,
    x: Vec<Vec<f64>>,
    kind: &str,
    tau_lb: f64,
    lambda_: Option<f64>,
    method: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let x = to_observation(x)?;
    let kind = match kind {
        "iid" => DependenceKind::Iid,
        "local" => DependenceKind::LocalAr,
        "global" => DependenceKind::GlobalEqui,
        "temporal" => DependenceKind::TemporalAr,
        _ => {
            return Err(PyValueError::new_err(format!(
                "unknown dependence kind {kind:?}; expected iid, local, global or temporal"
            )))
        }
    };
    let out = core::inspect_single_spatial(&x, &solver_with(lambda_), parse_method(method)?, kind, tau_lb)
        .map_err(err_to_py)?;
    let d = detection_dict(py, &out.detection)?;
    d.set_item("rho_hat", out.precision.as_ref().map(|p| p.rho_hat))?;
    d.set_item("fallback_identity", out.fallback_identity)?;
    Ok(d)
}

/// Wild binary segmentation. Returns a dict with the sorted changepoints,
/// their scores and originating intervals, and the resolved (lambda, xi).
#[pyfunction]
#[pyo3(signature = (x, lambda_=None, xi=None, beta=0.0, q=1000, seed=0, method="soft", nulls=1000))]
#[allow(clippy::too_many_arguments)]
fn inspect_wbs<'py>(
    py: Python<'py>,
    x: Vec<Vec<f64>>,
    lambda_: Option<f64>,
    xi: Option<f64>,
    beta: f64,
    q: usize,
    seed: u64,
    method: &str,
    nulls: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let x = to_observation(x)?;
    let cfg = InspectConfig {
        lambda: lambda_,
        xi,
        beta,
        q,
        seed,
        method: parse_method(method)?,
        solver: SolverConfig::default(),
        calibration_nulls: nulls,
    };
    let det = core::inspect_wbs(&x, &cfg).map_err(err_to_py)?;
    let out = PyDict::new(py);
    out.set_item("changepoints", det.changepoints.clone())?;
    out.set_item("scores", det.scores.clone())?;
    out.set_item("intervals", det.intervals.clone())?;
    out.set_item("xi", det.xi)?;
    out.set_item("lambda", det.lambda)?;
    let trace = PyList::empty(py);
    for rec in &det.trace {
        let r = PyDict::new(py);
        r.set_item("location", rec.location)?;
        r.set_item("score", rec.score)?;
        r.set_item("interval", rec.interval)?;
        r.set_item("segment", rec.segment)?;
        r.set_item("accepted", rec.accepted)?;
        trace.append(r)?;
    }
    out.set_item("trace", trace)?;
    Ok(out)
}

/// Monte Carlo threshold calibration under the standard Gaussian null.
#[pyfunction]
#[pyo3(signature = (n, p, nulls=1000, seed=0, lambda_=None, method="soft"))]
fn calibrate_threshold(
    n: usize,
    p: usize,
    nulls: usize,
    seed: u64,
    lambda_: Option<f64>,
    method: &str,
) -> PyResult<f64> {
    let cfg = InspectConfig {
        lambda: lambda_,
        method: parse_method(method)?,
        ..InspectConfig::default()
    };
    core::calibrate_threshold(n, p, &cfg, nulls, seed).map_err(err_to_py)
}

/// The random time windows used by wild binary segmentation.
#[pyfunction]
fn draw_intervals(n: usize, q: usize, seed: u64) -> PyResult<Vec<(usize, usize)>> {
    Ok(core::draw_intervals(n, q, seed).map_err(err_to_py)?.pairs)
}

#[pyfunction]
fn precision_local(rho: f64, p: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(from_array2(&core::precision_local(rho, p).map_err(err_to_py)?))
}

#[pyfunction]
fn precision_global(rho: f64, p: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(from_array2(&core::precision_global(rho, p).map_err(err_to_py)?))
}

/// Maximum-likelihood dependence parameter of the geometric model from
/// mean-zero residual columns. Returns (rho_hat, clamped).
#[pyfunction]
fn estimate_rho_local(samples: Vec<Vec<f64>>) -> PyResult<(f64, bool)> {
    let s = to_array2(samples)?;
    let pe = core::estimate_rho_local(&s.view()).map_err(err_to_py)?;
    Ok((pe.rho_hat, pe.clamped))
}

/// Maximum-likelihood dependence parameter of the equicorrelation model.
#[pyfunction]
fn estimate_rho_global(samples: Vec<Vec<f64>>) -> PyResult<(f64, bool)> {
    let s = to_array2(samples)?;
    let pe = core::estimate_rho_global(&s.view()).map_err(err_to_py)?;
    Ok((pe.rho_hat, pe.clamped))
}

/// Scaled disjoint column differences from the ends of the odd-column half.
#[pyfunction]
fn build_residuals(x1: Vec<Vec<f64>>, tau_lb: f64) -> PyResult<Vec<Vec<f64>>> {
    let x1 = to_observation(x1)?;
    Ok(from_array2(&core::build_residuals(&x1, tau_lb).map_err(err_to_py)?))
}

fn parse_noise(noise: &str, sigma2: f64, rho: Option<f64>, shift_radius: Option<usize>) -> PyResult<NoiseModel> {
    let rho_required = || {
        rho.ok_or_else(|| PyValueError::new_err(format!("noise model {noise:?} requires rho")))
    };
    Ok(match noise {
        "gaussian" => NoiseModel::Gaussian { sigma2 },
        "unif" => NoiseModel::Uniform { sigma2 },
        "exp" => NoiseModel::CenteredExponential { sigma2 },
        "cs-local" => NoiseModel::CrossSectionalLocal { rho: rho_required()?, sigma2 },
        "cs-global" => NoiseModel::CrossSectionalGlobal { rho: rho_required()?, sigma2 },
        "temporal" => NoiseModel::TemporalAr { rho: rho_required()?, sigma2 },
        "async" => NoiseModel::AsyncShift {
            radius: shift_radius
                .ok_or_else(|| PyValueError::new_err("async noise requires shift_radius"))?,
            sigma2,
        },
        _ => {
            return Err(PyValueError::new_err(format!(
                "unknown noise model {noise:?}"
            )))
        }
    })
}

/// Draws a data matrix from the piecewise-mean model. Single changepoints
/// use the harmonic-root change pattern; multiple changepoints use the
/// requested support overlap ("complete", "half" or "none").
#[pyfunction]
#[pyo3(signature = (n, p, k, z, vartheta, overlap="half", noise="gaussian", sigma2=1.0, rho=None, shift_radius=None, seed=0))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    n: usize,
    p: usize,
    k: usize,
    z: Vec<usize>,
    vartheta: Vec<f64>,
    overlap: &str,
    noise: &str,
    sigma2: f64,
    rho: Option<f64>,
    shift_radius: Option<usize>,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = if z.len() == 1 {
        core::standard_signal(n, p, k, z[0], vartheta[0])
    } else {
        let ov = match overlap {
            "complete" => Overlap::Complete,
            "half" => Overlap::Half,
            "none" => Overlap::Disjoint,
            _ => return Err(PyValueError::new_err(format!("unknown overlap {overlap:?}"))),
        };
        core::overlap_signal(n, p, k, &z, &vartheta, ov)
    }
    .map_err(err_to_py)?;
    let model = parse_noise(noise, sigma2, rho, shift_radius)?;
    let sim = core::generate(&spec, &model, seed).map_err(err_to_py)?;
    let out = PyDict::new(py);
    out.set_item("x", from_array2(sim.x.values()))?;
    out.set_item("changepoints", z)?;
    out.set_item("clamped_shifts", sim.clamped_shifts)?;
    let theta: Vec<Vec<f64>> = (0..spec.num_changepoints())
        .map(|i| spec.theta(i).to_vec())
        .collect();
    out.set_item("thetas", theta)?;
    Ok(out)
}

#[pyfunction]
fn hausdorff(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    core::hausdorff(&a, &b).map_err(err_to_py)
}

/// L1-Wasserstein distance between weighted point masses given as
/// (location, mass) pairs.
#[pyfunction]
fn wasserstein1(p: Vec<(f64, f64)>, q: Vec<(f64, f64)>) -> PyResult<f64> {
    core::wasserstein1(&p, &q).map_err(err_to_py)
}

/// Adjusted Rand Index of the segmentations of 1..=n induced by two sorted
/// changepoint lists.
#[pyfunction]
fn adjusted_rand_index(n: usize, cps1: Vec<usize>, cps2: Vec<usize>) -> PyResult<f64> {
    let s1 = core::Segmentation::new(n, cps1).map_err(err_to_py)?;
    let s2 = core::Segmentation::new(n, cps2).map_err(err_to_py)?;
    core::adjusted_rand_index(&s1, &s2).map_err(err_to_py)
}

#[pymodule]
fn inspect_cp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(cusum_transform, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_vector, m)?)?;
    m.add_function(wrap_pyfunction!(soft_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(project_simplex, m)?)?;
    m.add_function(wrap_pyfunction!(project_nuclear_ball, m)?)?;
    m.add_function(wrap_pyfunction!(leading_left_singular_vector, m)?)?;
    m.add_function(wrap_pyfunction!(admm_solve, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_s2, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_sparse_svd, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_noise_mad, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(default_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(inspect_single, m)?)?;
    m.add_function(wrap_pyfunction!(inspect_single_split, m)?)?;
    m.add_function(wrap_pyfunction!(inspect_single_spatial, m)?)?;
    m.add_function(wrap_pyfunction!(inspect_wbs, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(draw_intervals, m)?)?;
    m.add_function(wrap_pyfunction!(precision_local, m)?)?;
    m.add_function(wrap_pyfunction!(precision_global, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_rho_local, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_rho_global, m)?)?;
    m.add_function(wrap_pyfunction!(build_residuals, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(hausdorff, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein1, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_rand_index, m)?)?;
    Ok(())
}
