// SPDX-License-Identifier: MIT OR Apache-2.0

//! Multiple changepoint estimation by wild binary segmentation.
//!
//! A fixed batch of random time windows is drawn once up front. Each
//! recursion step scores every window contained in the current segment with
//! the single-changepoint estimator, keeps the best-scoring candidate
//! (lowest window index on ties), accepts it when its score clears the
//! threshold `xi`, and recurses on both sides. The per-window loop is a
//! parallel map with a deterministic reduction, so results do not depend on
//! thread count.

use ndarray::Array1;
use rayon::prelude::*;

use crate::cusum::ObservationMatrix;
use crate::error::{Error, Result};
use crate::projection::{SolveMethod, SolverConfig};
use crate::rng;
use crate::single::{default_lambda, inspect_single, SingleDetection};

/// Tuning for [`inspect_wbs`]. `lambda: None` and `xi: None` resolve to the
/// dimension-driven default level and to Monte Carlo calibration under the
/// standard Gaussian null, respectively.
#[derive(Clone, Debug)]
pub struct InspectConfig {
    pub lambda: Option<f64>,
    pub xi: Option<f64>,
    /// Burn-off fraction: windows must keep `n * beta` clear of the current
    /// segment's endpoints.
    pub beta: f64,
    /// Number of random windows.
    pub q: usize,
    pub seed: u64,
    pub method: SolveMethod,
    pub solver: SolverConfig,
    /// Null replicates used when `xi` is auto-calibrated.
    pub calibration_nulls: usize,
}

impl Default for InspectConfig {
    fn default() -> Self {
        InspectConfig {
            lambda: None,
            xi: None,
            beta: 0.0,
            q: 1000,
            seed: 0,
            method: SolveMethod::Soft,
            solver: SolverConfig::default(),
            calibration_nulls: 1000,
        }
    }
}

impl InspectConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.beta) {
            return Err(Error::invalid_input(format!("beta must lie in [0, 1/2), got {}", self.beta)));
        }
        if self.q < 1 {
            return Err(Error::invalid_input("need at least one interval"));
        }
        if self.calibration_nulls < 1 {
            return Err(Error::invalid_input("need at least one calibration replicate"));
        }
        if let Some(xi) = self.xi {
            if !xi.is_finite() && !(xi == f64::INFINITY) {
                return Err(Error::invalid_input(format!("xi must be finite or +inf, got {xi}")));
            }
        }
        self.solver.validate()
    }
}

/// The `q` random windows `(s, e)` with `0 <= s < e <= n`.
#[derive(Clone, Debug)]
pub struct IntervalDraw {
    pub pairs: Vec<(usize, usize)>,
}

/// Draws `q` windows independently and uniformly from
/// `{(l, r) : 0 <= l < r <= n}`, deterministically in `seed`.
pub fn draw_intervals(n: usize, q: usize, seed: u64) -> Result<IntervalDraw> {
    if n < 2 {
        return Err(Error::invalid_input(format!("need n >= 2 to draw intervals, got {n}")));
    }
    if q < 1 {
        return Err(Error::invalid_input("need at least one interval"));
    }
    let mut rng = rng::stream(seed, rng::TAG_WBS_INTERVALS, 0);
    let mut pairs = Vec::with_capacity(q);
    while pairs.len() < q {
        let a = rng::uniform_below(&mut rng, n as u64 + 1) as usize;
        let b = rng::uniform_below(&mut rng, n as u64 + 1) as usize;
        if a != b {
            pairs.push((a.min(b), a.max(b)));
        }
    }
    Ok(IntervalDraw { pairs })
}

/// One examined candidate (accepted or rejected) in the recursion trace.
#[derive(Clone, Debug)]
pub struct CandidateRecord {
    /// Candidate changepoint location (1-based, absolute).
    pub location: usize,
    pub score: f64,
    /// The window the candidate came from.
    pub interval: (usize, usize),
    /// The segment being searched when the candidate was examined.
    pub segment: (usize, usize),
    pub accepted: bool,
}

/// Estimated changepoints plus per-changepoint evidence and the full
/// recursion trace (for threshold plots).
#[derive(Clone, Debug)]
pub struct MultiDetection {
    /// Sorted accepted changepoint locations.
    pub changepoints: Vec<usize>,
    /// Peak projected CUSUM score per accepted changepoint.
    pub scores: Vec<f64>,
    /// Originating window per accepted changepoint.
    pub intervals: Vec<(usize, usize)>,
    /// Projection direction per accepted changepoint.
    pub directions: Vec<Array1<f64>>,
    /// Projected CUSUM series of the originating window per accepted
    /// changepoint.
    pub curves: Vec<Vec<f64>>,
    /// Every candidate examined, in recursion order.
    pub trace: Vec<CandidateRecord>,
    /// Resolved threshold.
    pub xi: f64,
    /// Resolved regularisation level.
    pub lambda: f64,
}

struct Accepted {
    location: usize,
    score: f64,
    interval: (usize, usize),
    direction: Array1<f64>,
    curve: Vec<f64>,
}

/// Threshold calibration: the largest single-changepoint score seen across
/// `n_null` datasets of iid standard Gaussian noise, using the same lambda
/// rule and solver method as detection. Deterministic in `seed`; replicate
/// `i` uses the derived seed `combine(seed, i)`, so a smaller `n_null` is a
/// prefix of a larger one.
pub fn calibrate_threshold(
    n: usize,
    p: usize,
    cfg: &InspectConfig,
    n_null: usize,
    seed: u64,
) -> Result<f64> {
    if n_null < 1 {
        return Err(Error::invalid_input("need at least one null replicate"));
    }
    if n < 2 || p < 1 {
        return Err(Error::invalid_input(format!("need n >= 2 and p >= 1, got n={n}, p={p}")));
    }
    let lambda = cfg.lambda.unwrap_or_else(|| default_lambda(p, n));
    let solver = cfg.solver.with_lambda(lambda);
    let scores: Result<Vec<f64>> = (0..n_null)
        .into_par_iter()
        .map(|i| {
            let mut values = ndarray::Array2::zeros((p, n));
            for j in 0..p {
                let mut g = rng::GaussianStream::new(rng::stream(
                    rng::combine(seed, i as u64),
                    rng::TAG_CALIBRATION,
                    j as u64,
                ));
                for t in 0..n {
                    values[[j, t]] = g.next();
                }
            }
            let x = ObservationMatrix::new(values)?;
            match inspect_single(&x, &solver, cfg.method) {
                Ok(d) => Ok(d.t_max),
                Err(Error::ThresholdTooLarge) => Ok(0.0),
                Err(e) => Err(e),
            }
        })
        .collect();
    Ok(scores?.into_iter().fold(0.0f64, f64::max))
}

/// Wild binary segmentation with sparse-projection scoring.
///
/// The caller is responsible for noise normalisation (done once on the full
/// matrix, not per window). Segments shorter than 4 columns terminate the
/// recursion; windows that lose every entry to soft-thresholding simply
/// produce no candidate.
pub fn inspect_wbs(x: &ObservationMatrix, cfg: &InspectConfig) -> Result<MultiDetection> {
    cfg.validate()?;
    let (p, n) = (x.p(), x.n());
    let lambda = cfg.lambda.unwrap_or_else(|| default_lambda(p, n));
    let xi = match cfg.xi {
        Some(v) => v,
        None => calibrate_threshold(n, p, cfg, cfg.calibration_nulls, cfg.seed)?,
    };
    let draw = draw_intervals(n, cfg.q, cfg.seed)?;
    let solver = cfg.solver.with_lambda(lambda);

    let mut accepted: Vec<Accepted> = Vec::new();
    let mut trace: Vec<CandidateRecord> = Vec::new();
    // explicit DFS stack; left child processed before right child
    let mut stack = vec![(0usize, n)];
    while let Some((s, e)) = stack.pop() {
        if e - s < 4 {
            continue;
        }
        let margin = n as f64 * cfg.beta;
        let eligible: Vec<usize> = draw
            .pairs
            .iter()
            .enumerate()
            .filter(|(_, (sq, eq))| {
                *sq as f64 >= s as f64 + margin && *eq as f64 <= e as f64 - margin && eq - sq >= 2
            })
            .map(|(q, _)| q)
            .collect();
        if eligible.is_empty() {
            continue;
        }
        let results: Result<Vec<Option<SingleDetection>>> = eligible
            .par_iter()
            .map(|&q| {
                let (sq, eq) = draw.pairs[q];
                let sub = x.columns(sq, eq)?;
                match inspect_single(&sub, &solver, cfg.method) {
                    Ok(d) => Ok(Some(d)),
                    Err(Error::ThresholdTooLarge) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect();
        let results = results?;
        // deterministic argmax: strictly larger score wins, ties keep the
        // lowest window index
        let mut best: Option<(usize, SingleDetection)> = None;
        for (&q, det) in eligible.iter().zip(results) {
            if let Some(d) = det {
                if best.as_ref().map_or(true, |(_, b)| d.t_max > b.t_max) {
                    best = Some((q, d));
                }
            }
        }
        let Some((q0, det)) = best else { continue };
        let (sq, eq) = draw.pairs[q0];
        let location = sq + det.z_hat;
        let is_accepted = det.t_max > xi;
        trace.push(CandidateRecord {
            location,
            score: det.t_max,
            interval: (sq, eq),
            segment: (s, e),
            accepted: is_accepted,
        });
        if is_accepted {
            accepted.push(Accepted {
                location,
                score: det.t_max,
                interval: (sq, eq),
                direction: det.v_hat,
                curve: det.projected_cusum,
            });
            stack.push((location, e));
            stack.push((s, location));
        }
    }

    accepted.sort_by_key(|a| a.location);
    let mut out = MultiDetection {
        changepoints: Vec::new(),
        scores: Vec::new(),
        intervals: Vec::new(),
        directions: Vec::new(),
        curves: Vec::new(),
        trace,
        xi,
        lambda,
    };
    for a in accepted {
        out.changepoints.push(a.location);
        out.scores.push(a.score);
        out.intervals.push(a.interval);
        out.directions.push(a.direction);
        out.curves.push(a.curve);
    }
    Ok(out)
}
