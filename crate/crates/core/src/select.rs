//! Link prediction along a fitted direction and stopping-time selection.
//!
//! Once a direction estimate is in hand, the scalar projections
//! `z_i = <x_i, beta_hat>` carry all the signal, and the unknown link is
//! recovered by a box-kernel average of responses near `z`. Prediction risk
//! of that one-dimensional fit on held-out data then ranks the iterates of a
//! descent trajectory: the iterate whose direction gives the smallest
//! out-of-sample risk is the selected stopping time.

use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::optim::{Trajectory, TrajectoryRecord};
use crate::score::ScoreModel;
use crate::simgen::{MatrixSimInstance, SimInstance};

/// Box-kernel regression of responses on index values.
///
/// Prediction at `z` averages the responses whose anchor lies within
/// `bandwidth`; an empty window predicts zero, as does any `z` farther than
/// `radius` from `center` where no anchors concentrate.
#[derive(Debug, Clone)]
pub struct KernelPredictor {
    anchors: Vec<f64>,
    responses: Vec<f64>,
    pub bandwidth: f64,
    pub radius: f64,
    pub center: f64,
}

impl KernelPredictor {
    pub fn predict(&self, z: f64) -> f64 {
        if (z - self.center).abs() > self.radius {
            return 0.0;
        }
        let mut num = 0.0;
        let mut den = 0usize;
        for (&a, &y) in self.anchors.iter().zip(self.responses.iter()) {
            if (z - a).abs() <= self.bandwidth {
                num += y;
                den += 1;
            }
        }
        if den == 0 {
            0.0
        } else {
            num / den as f64
        }
    }

    pub fn n(&self) -> usize {
        self.anchors.len()
    }
}

fn resolve_window(n: usize, bandwidth: Option<f64>, radius: Option<f64>) -> Result<(f64, f64)> {
    let h = bandwidth.unwrap_or_else(|| (n as f64).powf(-1.0 / 3.0));
    if !(h > 0.0) {
        return Err(Error::InvalidParameter {
            what: "bandwidth must be positive",
        });
    }
    let r = radius.unwrap_or_else(|| 2.0 * (n as f64).ln().sqrt());
    if !(r >= 0.0) {
        return Err(Error::InvalidParameter {
            what: "window radius must be nonnegative",
        });
    }
    Ok((h, r))
}

/// Fits the kernel predictor on a vector-design sample. `beta_hat` must have
/// unit length in the model's identifiability norm (within `1e-6`). Defaults:
/// `bandwidth = n^{-1/3}`, `radius = 2 sqrt(log n)`; the window centers on
/// the index mean under the design.
pub fn fit_kernel(
    instance: &SimInstance,
    model: &ScoreModel,
    beta_hat: &[f64],
    bandwidth: Option<f64>,
    radius: Option<f64>,
) -> Result<KernelPredictor> {
    let n = instance.n();
    if n == 0 {
        return Err(Error::EmptyInstance);
    }
    if beta_hat.len() != instance.p() {
        return Err(Error::DimensionMismatch {
            expected: instance.p(),
            found: beta_hat.len(),
        });
    }
    let norm = model.identifiability_norm(beta_hat)?;
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::NotNormalized { norm });
    }
    let (h, r) = resolve_window(n, bandwidth, radius)?;
    Ok(KernelPredictor {
        anchors: instance.covariates.mul_vec(beta_hat)?,
        responses: instance.responses.clone(),
        bandwidth: h,
        radius: r,
        center: model.index_center(beta_hat)?,
    })
}

/// Matrix analog of [`fit_kernel`]; anchors are `trace(X_i^T beta_hat)` and
/// `beta_hat` must have unit Frobenius norm (within `1e-6`). The window
/// centers at zero since matrix designs here have mean-zero entries.
pub fn fit_kernel_matrix(
    instance: &MatrixSimInstance,
    beta_hat: &Mat,
    bandwidth: Option<f64>,
    radius: Option<f64>,
) -> Result<KernelPredictor> {
    let n = instance.n();
    if n == 0 {
        return Err(Error::EmptyInstance);
    }
    let d = instance.d();
    if beta_hat.rows() != d || beta_hat.cols() != d {
        return Err(Error::ShapeMismatch {
            left: (d, d),
            right: (beta_hat.rows(), beta_hat.cols()),
        });
    }
    let norm = beta_hat.frobenius_norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::NotNormalized { norm });
    }
    let (h, r) = resolve_window(n, bandwidth, radius)?;
    let anchors = instance
        .covariates
        .iter()
        .map(|x| {
            x.data()
                .iter()
                .zip(beta_hat.data().iter())
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    Ok(KernelPredictor {
        anchors,
        responses: instance.responses.clone(),
        bandwidth: h,
        radius: r,
        center: 0.0,
    })
}

/// Mean squared prediction error on a held-out sample, projecting its
/// covariates on the same direction the predictor was fit with.
pub fn prediction_risk(
    predictor: &KernelPredictor,
    instance: &SimInstance,
    beta_hat: &[f64],
) -> Result<f64> {
    if instance.n() == 0 {
        return Err(Error::EmptyInstance);
    }
    if beta_hat.len() != instance.p() {
        return Err(Error::DimensionMismatch {
            expected: instance.p(),
            found: beta_hat.len(),
        });
    }
    let z = instance.covariates.mul_vec(beta_hat)?;
    let mut acc = 0.0;
    for (&zi, &yi) in z.iter().zip(instance.responses.iter()) {
        let e = predictor.predict(zi) - yi;
        acc += e * e;
    }
    Ok(acc / instance.n() as f64)
}

/// Matrix analog of [`prediction_risk`].
pub fn prediction_risk_matrix(
    predictor: &KernelPredictor,
    instance: &MatrixSimInstance,
    beta_hat: &Mat,
) -> Result<f64> {
    if instance.n() == 0 {
        return Err(Error::EmptyInstance);
    }
    let d = instance.d();
    if beta_hat.rows() != d || beta_hat.cols() != d {
        return Err(Error::ShapeMismatch {
            left: (d, d),
            right: (beta_hat.rows(), beta_hat.cols()),
        });
    }
    let mut acc = 0.0;
    for (x, &yi) in instance.covariates.iter().zip(instance.responses.iter()) {
        let zi: f64 = x
            .data()
            .iter()
            .zip(beta_hat.data().iter())
            .map(|(a, b)| a * b)
            .sum();
        let e = predictor.predict(zi) - yi;
        acc += e * e;
    }
    Ok(acc / instance.n() as f64)
}

/// One scored candidate stopping time.
#[derive(Debug, Clone, Copy)]
pub struct SelectionCandidate {
    pub t: usize,
    pub train_loss: f64,
    pub test_risk: f64,
}

#[derive(Debug, Clone)]
pub struct SelectionReport {
    pub candidates: Vec<SelectionCandidate>,
    pub selected_t: usize,
}

/// Record index range `[start, end]` over which the loss has flattened:
/// `start` is the first index whose next two loss moves are both below
/// `rel_tol` relative to the neighboring loss scale. Falls back to the whole
/// range when the loss never flattens.
pub(crate) fn plateau_range(losses: &[f64], rel_tol: f64) -> (usize, usize) {
    let len = losses.len();
    if len <= 2 {
        return (0, len.saturating_sub(1));
    }
    let small = |k: usize| {
        let scale = losses[k].abs().max(losses[k + 1].abs()).max(1e-12);
        (losses[k + 1] - losses[k]).abs() <= rel_tol * scale
    };
    for i in 0..len - 1 {
        let first = small(i);
        let second = if i + 2 < len { small(i + 1) } else { true };
        if first && second {
            return (i, len - 1);
        }
    }
    (0, len - 1)
}

/// Up to `m` evenly spaced indices covering `[lo, hi]` inclusive,
/// deduplicated. A single candidate lands on `hi`, the most converged end.
pub(crate) fn spread_indices(lo: usize, hi: usize, m: usize) -> Vec<usize> {
    if m <= 1 || hi == lo {
        return alloc::vec![hi];
    }
    let mut out = Vec::with_capacity(m);
    let span = (hi - lo) as f64;
    for k in 0..m {
        let idx = lo + (span * k as f64 / (m - 1) as f64).round() as usize;
        if out.last() != Some(&idx) {
            out.push(idx);
        }
    }
    out
}

fn pick_min(candidates: &[SelectionCandidate]) -> usize {
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.test_risk < candidates[best].test_risk {
            best = i;
        }
    }
    candidates[best].t
}

/// Chooses a stopping time for a vector trajectory by held-out prediction
/// risk. Candidates are `m` evenly spaced records across the loss plateau;
/// each is normalized, used to fit the kernel predictor on `train`, and
/// scored on `test`. Ties and the argmin both resolve to the earliest `t`;
/// un-normalizable (zero) iterates score infinite risk.
pub fn select_stopping_time(
    trajectory: &Trajectory<Vec<f64>>,
    train: &SimInstance,
    test: &SimInstance,
    model: &ScoreModel,
    m: usize,
    plateau_rel_tol: f64,
) -> Result<SelectionReport> {
    if m == 0 {
        return Err(Error::InvalidParameter {
            what: "candidate count must be at least 1",
        });
    }
    if trajectory.records.is_empty() {
        return Err(Error::EmptyInstance);
    }
    let losses: Vec<f64> = trajectory.records.iter().map(|r| r.loss).collect();
    let (lo, hi) = plateau_range(&losses, plateau_rel_tol);
    let mut candidates = Vec::new();
    for idx in spread_indices(lo, hi, m) {
        let rec = &trajectory.records[idx];
        let risk = match crate::optim::normalize_identifiable(&rec.beta, model) {
            Ok(direction) => {
                let predictor = fit_kernel(train, model, &direction, None, None)?;
                prediction_risk(&predictor, test, &direction)?
            }
            Err(Error::ZeroNorm) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        candidates.push(SelectionCandidate {
            t: rec.t,
            train_loss: rec.loss,
            test_risk: risk,
        });
    }
    let selected_t = pick_min(&candidates);
    Ok(SelectionReport {
        candidates,
        selected_t,
    })
}

/// Matrix analog of [`select_stopping_time`], normalizing candidates in
/// Frobenius norm.
pub fn select_stopping_time_matrix(
    trajectory: &Trajectory<Mat>,
    train: &MatrixSimInstance,
    test: &MatrixSimInstance,
    m: usize,
    plateau_rel_tol: f64,
) -> Result<SelectionReport> {
    if m == 0 {
        return Err(Error::InvalidParameter {
            what: "candidate count must be at least 1",
        });
    }
    if trajectory.records.is_empty() {
        return Err(Error::EmptyInstance);
    }
    let losses: Vec<f64> = trajectory.records.iter().map(|r| r.loss).collect();
    let (lo, hi) = plateau_range(&losses, plateau_rel_tol);
    let mut candidates = Vec::new();
    for idx in spread_indices(lo, hi, m) {
        let rec = &trajectory.records[idx];
        let risk = match crate::optim::normalize_frobenius(&rec.beta) {
            Ok(direction) => {
                let predictor = fit_kernel_matrix(train, &direction, None, None)?;
                prediction_risk_matrix(&predictor, test, &direction)?
            }
            Err(Error::ZeroNorm) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        candidates.push(SelectionCandidate {
            t: rec.t,
            train_loss: rec.loss,
            test_risk: risk,
        });
    }
    let selected_t = pick_min(&candidates);
    Ok(SelectionReport {
        candidates,
        selected_t,
    })
}

/// The record closest to the truth in recorded squared distance, earliest on
/// ties. Only available when the trajectory was run with truth attached.
pub fn oracle_record<B>(trajectory: &Trajectory<B>) -> Result<&TrajectoryRecord<B>> {
    let mut best: Option<&TrajectoryRecord<B>> = None;
    for rec in &trajectory.records {
        let d = rec.dist_sq.ok_or(Error::InvalidParameter {
            what: "oracle selection needs distances recorded on the trajectory",
        })?;
        if best.is_none_or(|b| d < b.dist_sq.unwrap()) {
            best = Some(rec);
        }
    }
    best.ok_or(Error::EmptyInstance)
}
