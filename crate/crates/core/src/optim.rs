//! Factored gradient descent on the moment-matching loss.
//!
//! The target coefficient is parameterized as a difference of elementwise
//! squares, `beta = w . w - v . v` (Hadamard products), or of Gram factors
//! `B = W W^T - V V^T` in the matrix route. Both factors start at a small
//! positive scale `alpha`, which acts as the sparsity knob: coordinates the
//! moment estimate does not push on stay near `alpha^2` while the pushed ones
//! escape at a multiplicative rate, so early stopping plus a small threshold
//! reads out the support without an explicit penalty.
//!
//! The recorded loss is `<beta, beta> - 2 <beta, phi>`, whose minimizer over
//! unconstrained `beta` is `phi` itself. The update
//! `w' = w - eta (beta - phi) . w`, `v' = v + eta (beta - phi) . v`
//! is plain gradient descent on that loss with stepsize `eta / 4`.

use alloc::vec::Vec;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::robust::MomentEstimate;
use crate::score::ScoreModel;

/// Magnitude at which an iterate is declared divergent.
const DIVERGENCE_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Initialization scale for both factors; must be positive.
    pub alpha: f64,
    /// Stepsize of the factored update; must be positive.
    pub eta: f64,
    /// Number of update steps.
    pub t_max: usize,
    /// Record every this many steps (plus always step 0 and the last one).
    pub record_stride: usize,
}

impl SolverConfig {
    pub fn vector_default() -> Self {
        SolverConfig {
            alpha: 1e-5,
            eta: 0.005,
            t_max: 5000,
            record_stride: 10,
        }
    }

    pub fn matrix_default() -> Self {
        SolverConfig {
            alpha: 1e-3,
            eta: 0.005,
            t_max: 2500,
            record_stride: 10,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidParameter {
                what: "initialization scale must be positive",
            });
        }
        if !(self.eta > 0.0) {
            return Err(Error::InvalidParameter {
                what: "stepsize must be positive",
            });
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParameter {
                what: "record stride must be at least 1",
            });
        }
        Ok(())
    }
}

/// Ground truth handed to the solver so trajectories carry error curves.
/// `scaled_beta` is the quantity the iterates actually approach, i.e. the
/// population moment (slope times signal).
pub struct VectorTruth<'a> {
    pub scaled_beta: &'a [f64],
    pub support: &'a [usize],
}

pub struct MatrixTruth<'a> {
    pub scaled_beta: &'a Mat,
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord<B> {
    pub t: usize,
    pub beta: B,
    pub loss: f64,
    /// Squared distance to the truth's `scaled_beta`, when truth was given.
    pub dist_sq: Option<f64>,
    /// Largest off-support magnitude, when truth was given (vector runs).
    pub max_off_support: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Diagnostics {
    /// A factor entry went negative; the stepsize overshot a multiplicative
    /// update and the plateau structure is no longer trustworthy.
    pub positivity_violated: bool,
    /// Worst asymmetry of any recorded matrix iterate (zero for vectors).
    pub max_symmetry_error: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory<B> {
    pub records: Vec<TrajectoryRecord<B>>,
    pub config: SolverConfig,
    /// An iterate exceeded the divergence cap; records stop at that step.
    pub diverged: bool,
    /// Factor pair at the last computed step.
    pub final_state: Option<(B, B)>,
    pub diagnostics: Diagnostics,
}

impl<B> Trajectory<B> {
    pub fn final_beta(&self) -> Option<&B> {
        self.records.last().map(|r| &r.beta)
    }
}

/// Loss `<beta, beta> - 2 <beta, phi>` for vectors.
pub fn vector_loss(beta: &[f64], phi: &[f64]) -> Result<f64> {
    if beta.len() != phi.len() {
        return Err(Error::DimensionMismatch {
            expected: phi.len(),
            found: beta.len(),
        });
    }
    let mut acc = 0.0;
    for (&b, &f) in beta.iter().zip(phi.iter()) {
        acc += b * b - 2.0 * b * f;
    }
    Ok(acc)
}

/// Loss and full gradient in the factors. The gradient components are
/// `4 (beta - phi) . w` and `-4 (beta - phi) . v`.
pub fn vector_loss_grad(w: &[f64], v: &[f64], phi: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if w.len() != v.len() || w.len() != phi.len() {
        return Err(Error::DimensionMismatch {
            expected: phi.len(),
            found: w.len().max(v.len()),
        });
    }
    let p = phi.len();
    let mut loss = 0.0;
    let mut gw = alloc::vec![0.0; p];
    let mut gv = alloc::vec![0.0; p];
    for j in 0..p {
        let b = w[j] * w[j] - v[j] * v[j];
        let g = b - phi[j];
        loss += b * b - 2.0 * b * phi[j];
        gw[j] = 4.0 * g * w[j];
        gv[j] = -4.0 * g * v[j];
    }
    Ok((loss, gw, gv))
}

/// One factored update in place: `w ' = w - eta (beta - phi) . w` and
/// `v' = v + eta (beta - phi) . v`, with `beta` read from the incoming
/// factors.
pub fn vector_step(w: &mut [f64], v: &mut [f64], phi: &[f64], eta: f64) -> Result<()> {
    if w.len() != v.len() || w.len() != phi.len() {
        return Err(Error::DimensionMismatch {
            expected: phi.len(),
            found: w.len().max(v.len()),
        });
    }
    for j in 0..phi.len() {
        let g = w[j] * w[j] - v[j] * v[j] - phi[j];
        w[j] -= eta * g * w[j];
        v[j] += eta * g * v[j];
    }
    Ok(())
}

/// Frobenius loss and full gradient for the matrix factorization. With
/// `G = W W^T - V V^T - phi` the components are `2 (G + G^T) W` and
/// `-2 (G + G^T) V`.
pub fn matrix_loss_grad(w: &Mat, v: &Mat, phi: &Mat) -> Result<(f64, Mat, Mat)> {
    let beta = factored_beta(w, v)?;
    if beta.rows() != phi.rows() || beta.cols() != phi.cols() {
        return Err(Error::ShapeMismatch {
            left: (beta.rows(), beta.cols()),
            right: (phi.rows(), phi.cols()),
        });
    }
    let mut loss = 0.0;
    for (b, f) in beta.data().iter().zip(phi.data().iter()) {
        loss += b * b - 2.0 * b * f;
    }
    let mut g = beta;
    g.add_scaled(-1.0, phi)?;
    let mut gsym = g.transpose();
    gsym.add_scaled(1.0, &g)?;
    let mut gw = gsym.mul(w)?;
    gw.scale(2.0);
    let mut gv = gsym.mul(v)?;
    gv.scale(-2.0);
    Ok((loss, gw, gv))
}

fn factored_beta(w: &Mat, v: &Mat) -> Result<Mat> {
    let mut beta = w.mul_transpose(w)?;
    let vv = v.mul_transpose(v)?;
    beta.add_scaled(-1.0, &vv)?;
    Ok(beta)
}

fn exceeds_cap(xs: &[f64]) -> bool {
    xs.iter().any(|x| !x.is_finite() || x.abs() > DIVERGENCE_CAP)
}

/// Runs the factored descent on a vector moment estimate. Always records step
/// 0 and the final step; intermediate steps every `record_stride`. A
/// divergent iterate stops the run early with the partial trajectory kept and
/// `diverged` set.
pub fn run_vector(
    phi: &MomentEstimate,
    config: &SolverConfig,
    truth: Option<&VectorTruth>,
) -> Result<Trajectory<Vec<f64>>> {
    config.validate()?;
    let phi = phi.as_vector()?;
    let p = phi.len();
    if p == 0 {
        return Err(Error::EmptyInstance);
    }
    if let Some(t) = truth {
        if t.scaled_beta.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: t.scaled_beta.len(),
            });
        }
        for &j in t.support {
            if j >= p {
                return Err(Error::IndexOutOfRange { index: j, bound: p });
            }
        }
    }
    let mut w = alloc::vec![config.alpha; p];
    let mut v = alloc::vec![config.alpha; p];
    let mut records = Vec::new();
    let mut diagnostics = Diagnostics::default();
    let mut diverged = false;

    let mut off_mask = alloc::vec![true; p];
    if let Some(t) = truth {
        for &j in t.support {
            off_mask[j] = false;
        }
    }
    let record = |records: &mut Vec<TrajectoryRecord<Vec<f64>>>, t: usize, w: &[f64], v: &[f64]| {
        let beta: Vec<f64> = w
            .iter()
            .zip(v.iter())
            .map(|(&a, &b)| a * a - b * b)
            .collect();
        let loss = vector_loss(&beta, phi).expect("length fixed");
        let (dist_sq, max_off) = match truth {
            Some(tr) => {
                let d = beta
                    .iter()
                    .zip(tr.scaled_beta.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
                let m = beta
                    .iter()
                    .zip(off_mask.iter())
                    .filter(|(_, &off)| off)
                    .fold(0.0f64, |acc, (b, _)| acc.max(b.abs()));
                (Some(d), Some(m))
            }
            None => (None, None),
        };
        records.push(TrajectoryRecord {
            t,
            beta,
            loss,
            dist_sq,
            max_off_support: max_off,
        });
    };

    record(&mut records, 0, &w, &v);
    for t in 1..=config.t_max {
        vector_step(&mut w, &mut v, phi, config.eta)?;
        if !diagnostics.positivity_violated
            && w.iter().chain(v.iter()).any(|x| *x < 0.0)
        {
            diagnostics.positivity_violated = true;
        }
        if exceeds_cap(&w) || exceeds_cap(&v) {
            diverged = true;
            record(&mut records, t, &w, &v);
            break;
        }
        if t % config.record_stride == 0 || t == config.t_max {
            record(&mut records, t, &w, &v);
        }
    }
    Ok(Trajectory {
        records,
        config: *config,
        diverged,
        final_state: Some((w, v)),
        diagnostics,
    })
}

/// Matrix analog of [`run_vector`]: factors start at `alpha I` and follow
/// `W' = W - eta (W W^T - V V^T - phi) W`, `V' = V + eta (...) V`.
pub fn run_matrix(
    phi: &MomentEstimate,
    config: &SolverConfig,
    truth: Option<&MatrixTruth>,
) -> Result<Trajectory<Mat>> {
    config.validate()?;
    let phi = phi.as_matrix()?;
    if phi.rows() != phi.cols() {
        return Err(Error::NotSquare {
            rows: phi.rows(),
            cols: phi.cols(),
        });
    }
    let d = phi.rows();
    if d == 0 {
        return Err(Error::EmptyInstance);
    }
    let asym = phi.max_asymmetry()?;
    if asym > 1e-8 {
        return Err(Error::NotSymmetric {
            max_deviation: asym,
        });
    }
    if let Some(t) = truth {
        if t.scaled_beta.rows() != d || t.scaled_beta.cols() != d {
            return Err(Error::ShapeMismatch {
                left: (d, d),
                right: (t.scaled_beta.rows(), t.scaled_beta.cols()),
            });
        }
    }
    let mut w = Mat::identity(d);
    w.scale(config.alpha);
    let mut v = w.clone();
    let mut records: Vec<TrajectoryRecord<Mat>> = Vec::new();
    let mut diagnostics = Diagnostics::default();
    let mut diverged = false;

    let record = |records: &mut Vec<TrajectoryRecord<Mat>>,
                      diagnostics: &mut Diagnostics,
                      t: usize,
                      w: &Mat,
                      v: &Mat|
     -> Result<()> {
        let beta = factored_beta(w, v)?;
        diagnostics.max_symmetry_error = diagnostics.max_symmetry_error.max(beta.max_asymmetry()?);
        let mut loss = 0.0;
        for (b, f) in beta.data().iter().zip(phi.data().iter()) {
            loss += b * b - 2.0 * b * f;
        }
        let dist_sq = truth.map(|tr| {
            beta.data()
                .iter()
                .zip(tr.scaled_beta.data().iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        });
        records.push(TrajectoryRecord {
            t,
            beta,
            loss,
            dist_sq,
            max_off_support: None,
        });
        Ok(())
    };

    record(&mut records, &mut diagnostics, 0, &w, &v)?;
    for t in 1..=config.t_max {
        let mut g = factored_beta(&w, &v)?;
        g.add_scaled(-1.0, phi)?;
        let gw = g.mul(&w)?;
        let gv = g.mul(&v)?;
        w.add_scaled(-config.eta, &gw)?;
        v.add_scaled(config.eta, &gv)?;
        if exceeds_cap(w.data()) || exceeds_cap(v.data()) {
            diverged = true;
            record(&mut records, &mut diagnostics, t, &w, &v)?;
            break;
        }
        if t % config.record_stride == 0 || t == config.t_max {
            record(&mut records, &mut diagnostics, t, &w, &v)?;
        }
    }
    Ok(Trajectory {
        records,
        config: *config,
        diverged,
        final_state: Some((w, v)),
        diagnostics,
    })
}

/// Indices with `|beta_j| > lambda`, in increasing order.
pub fn threshold_vector(beta: &[f64], lambda: f64) -> Result<Vec<usize>> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter {
            what: "threshold must be nonnegative",
        });
    }
    Ok(beta
        .iter()
        .enumerate()
        .filter(|(_, b)| b.abs() > lambda)
        .map(|(j, _)| j)
        .collect())
}

#[derive(Debug, Clone)]
pub struct ThresholdedMatrix {
    /// Number of eigenvalues with magnitude above the threshold.
    pub rank: usize,
    /// Reconstruction from the surviving eigenpairs.
    pub matrix: Mat,
}

/// Eigenvalue thresholding of a symmetric matrix: eigenvalues with
/// `|lambda_k| <= lambda` are zeroed and the rest reassembled.
pub fn threshold_matrix(beta: &Mat, lambda: f64) -> Result<ThresholdedMatrix> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter {
            what: "threshold must be nonnegative",
        });
    }
    let asym = beta.max_asymmetry()?;
    if asym > 1e-10 * (1.0 + beta.max_abs()) {
        return Err(Error::NotSymmetric {
            max_deviation: asym,
        });
    }
    let eig = crate::linalg::sym_eigen(beta)?;
    let d = beta.rows();
    let mut rank = 0;
    let mut out = Mat::zeros(d, d);
    for k in 0..d {
        if eig.values[k].abs() > lambda {
            rank += 1;
            let col = eig.vectors.col(k);
            out.add_outer(eig.values[k], &col, &col)?;
        }
    }
    Ok(ThresholdedMatrix { rank, matrix: out })
}

/// Unit Euclidean rescale; rejects near-zero input.
pub fn normalize_l2(beta: &[f64]) -> Result<Vec<f64>> {
    let norm = crate::linalg::norm_l2(beta);
    if norm < 1e-14 {
        return Err(Error::ZeroNorm);
    }
    Ok(beta.iter().map(|b| b / norm).collect())
}

/// Rescales to unit length in the design-induced norm the signal was
/// normalized under (`sqrt(b^T Sigma b)` for correlated Gaussian designs,
/// plain Euclidean otherwise).
pub fn normalize_identifiable(beta: &[f64], model: &ScoreModel) -> Result<Vec<f64>> {
    let norm = model.identifiability_norm(beta)?;
    if norm < 1e-14 {
        return Err(Error::ZeroNorm);
    }
    Ok(beta.iter().map(|b| b / norm).collect())
}

/// Unit Frobenius rescale; rejects near-zero input.
pub fn normalize_frobenius(beta: &Mat) -> Result<Mat> {
    let norm = beta.frobenius_norm();
    if norm < 1e-14 {
        return Err(Error::ZeroNorm);
    }
    let mut out = beta.clone();
    out.scale(1.0 / norm);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robust::{MomentMode, MomentValue};
    use crate::simgen::gen_sparse_beta;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vec_estimate(phi: Vec<f64>) -> MomentEstimate {
        MomentEstimate {
            value: MomentValue::Vector(phi),
            mode: MomentMode::PlainVector,
        }
    }

    fn mat_estimate(phi: Mat) -> MomentEstimate {
        MomentEstimate {
            value: MomentValue::Matrix(phi),
            mode: MomentMode::PlainMatrixSymmetrized,
        }
    }

    #[test]
    fn vector_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 6e-6;
        for &p in &[3usize, 10, 50] {
            for _ in 0..20 {
                let w: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.5..1.5)).collect();
                let v: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.5..1.5)).collect();
                let phi: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let (_, gw, gv) = vector_loss_grad(&w, &v, &phi).unwrap();
                let scale = gw
                    .iter()
                    .chain(gv.iter())
                    .fold(1.0f64, |m, g| m.max(g.abs()));
                for j in 0..p {
                    let mut wp = w.clone();
                    let mut wm = w.clone();
                    let step = h * (1.0 + w[j].abs());
                    wp[j] += step;
                    wm[j] -= step;
                    let lp = {
                        let b: Vec<f64> = wp
                            .iter()
                            .zip(v.iter())
                            .map(|(&a, &b)| a * a - b * b)
                            .collect();
                        vector_loss(&b, &phi).unwrap()
                    };
                    let lm = {
                        let b: Vec<f64> = wm
                            .iter()
                            .zip(v.iter())
                            .map(|(&a, &b)| a * a - b * b)
                            .collect();
                        vector_loss(&b, &phi).unwrap()
                    };
                    let fd = (lp - lm) / (2.0 * step);
                    assert!(
                        (fd - gw[j]).abs() <= 1e-6 * scale,
                        "p={p} j={j} fd={fd} grad={}",
                        gw[j]
                    );
                }
            }
        }
    }

    #[test]
    fn matrix_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = 6e-6;
        for &d in &[2usize, 4, 8] {
            let rand_mat = |rng: &mut ChaCha8Rng| {
                let data: Vec<f64> = (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                Mat::from_vec(d, d, data).unwrap()
            };
            for _ in 0..5 {
                let w = rand_mat(&mut rng);
                let v = rand_mat(&mut rng);
                let mut phi = rand_mat(&mut rng);
                // Symmetrize so the run-time validation path is also the one
                // differentiated here.
                let pt = phi.transpose();
                phi.add_scaled(1.0, &pt).unwrap();
                phi.scale(0.5);
                let (_, gw, gv) = matrix_loss_grad(&w, &v, &phi).unwrap();
                let scale = gw.max_abs().max(gv.max_abs()).max(1.0);
                for i in 0..d {
                    for j in 0..d {
                        let step = h * (1.0 + w.get(i, j).abs());
                        let mut wp = w.clone();
                        wp.set(i, j, w.get(i, j) + step);
                        let mut wm = w.clone();
                        wm.set(i, j, w.get(i, j) - step);
                        let lp = matrix_loss_grad(&wp, &v, &phi).unwrap().0;
                        let lm = matrix_loss_grad(&wm, &v, &phi).unwrap().0;
                        let fd = (lp - lm) / (2.0 * step);
                        assert!(
                            (fd - gw.get(i, j)).abs() <= 1e-6 * scale,
                            "d={d} ({i},{j}) fd={fd} grad={}",
                            gw.get(i, j)
                        );
                        let mut vp = v.clone();
                        vp.set(i, j, v.get(i, j) + step);
                        let mut vm = v.clone();
                        vm.set(i, j, v.get(i, j) - step);
                        let lp = matrix_loss_grad(&w, &vp, &phi).unwrap().0;
                        let lm = matrix_loss_grad(&w, &vm, &phi).unwrap().0;
                        let fd = (lp - lm) / (2.0 * step);
                        assert!(
                            (fd - gv.get(i, j)).abs() <= 1e-6 * scale,
                            "d={d} ({i},{j}) fd={fd} grad={}",
                            gv.get(i, j)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn single_step_by_hand() {
        let mut w = vec![1.0];
        let mut v = vec![0.5];
        vector_step(&mut w, &mut v, &[0.5], 0.1).unwrap();
        // g = 1 - 0.25 - 0.5 = 0.25; w' = 1 - 0.025, v' = 0.5 * 1.025.
        assert_eq!(w, vec![0.975]);
        assert_eq!(v, vec![0.5125]);
        assert!(vector_step(&mut w, &mut v, &[0.0, 0.0], 0.1).is_err());
    }

    #[test]
    fn stationary_points_have_zero_gradient() {
        // w_j^2 - v_j^2 = phi_j makes the residual vanish coordinatewise.
        let phi = vec![0.81, -0.25, 0.0];
        let w = vec![0.9, 0.3, 0.0];
        let v = vec![0.0, (0.09f64 + 0.25).sqrt(), 0.0];
        let (_, gw, gv) = vector_loss_grad(&w, &v, &phi).unwrap();
        for j in 0..3 {
            assert!(gw[j].abs() < 1e-12);
            assert!(gv[j].abs() < 1e-12);
        }
    }

    #[test]
    fn negating_the_moment_negates_the_trajectory_exactly() {
        let phi: Vec<f64> = vec![0.7, -0.3, 0.05, 0.0];
        let config = SolverConfig {
            alpha: 1e-3,
            eta: 0.05,
            t_max: 300,
            record_stride: 50,
        };
        let pos = run_vector(&vec_estimate(phi.clone()), &config, None).unwrap();
        let neg_phi: Vec<f64> = phi.iter().map(|x| -x).collect();
        let neg = run_vector(&vec_estimate(neg_phi), &config, None).unwrap();
        assert_eq!(pos.records.len(), neg.records.len());
        for (a, b) in pos.records.iter().zip(neg.records.iter()) {
            assert_eq!(a.t, b.t);
            for (x, y) in a.beta.iter().zip(b.beta.iter()) {
                assert_eq!(*x, -*y, "swap symmetry must be exact");
            }
        }
    }

    #[test]
    fn oracle_moment_recovers_support_monotonically() {
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let (beta, support) = gen_sparse_beta(100, 5, &mut rng).unwrap();
            let config = SolverConfig {
                alpha: 1e-5,
                eta: 0.01,
                t_max: 4000,
                record_stride: 25,
            };
            let truth = VectorTruth {
                scaled_beta: &beta,
                support: &support,
            };
            let traj = run_vector(&vec_estimate(beta.clone()), &config, Some(&truth)).unwrap();
            assert!(!traj.diverged);
            assert!(!traj.diagnostics.positivity_violated);
            let mut prev = 0usize;
            for rec in &traj.records {
                let found = threshold_vector(&rec.beta, 5.0 * config.alpha).unwrap();
                assert!(found.len() >= prev, "support count dropped at t={}", rec.t);
                assert!(found.iter().all(|j| support.contains(j)));
                prev = found.len();
                // Coordinates the moment never pushes on stay exactly at the
                // initialization balance.
                assert_eq!(rec.max_off_support, Some(0.0));
            }
            let last = traj.records.last().unwrap();
            assert_eq!(
                threshold_vector(&last.beta, 5.0 * config.alpha).unwrap(),
                support
            );
            assert!(last.dist_sq.unwrap() < 1e-6);
        }
    }

    #[test]
    fn matrix_run_is_orthogonally_equivariant() {
        let d = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let gauss = Mat::from_vec(
            d,
            d,
            (0..d * d)
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect(),
        )
        .unwrap();
        let q = crate::linalg::orthonormal_columns(&gauss).unwrap();
        let mut phi = Mat::zeros(d, d);
        // Symmetric low-rank-ish target.
        let raw = Mat::from_vec(
            d,
            d,
            (0..d * d).map(|_| rng.gen_range(-0.6..0.6)).collect(),
        )
        .unwrap();
        let rt = raw.transpose();
        phi.add_scaled(0.5, &raw).unwrap();
        phi.add_scaled(0.5, &rt).unwrap();

        let mut rotated = q.mul(&phi).unwrap().mul(&q.transpose()).unwrap();
        // Rounded conjugation can leave asymmetry above the run validator.
        let rt2 = rotated.transpose();
        rotated.add_scaled(1.0, &rt2).unwrap();
        rotated.scale(0.5);

        let config = SolverConfig {
            alpha: 1e-3,
            eta: 0.05,
            t_max: 200,
            record_stride: 40,
        };
        let base = run_matrix(&mat_estimate(phi), &config, None).unwrap();
        let conj = run_matrix(&mat_estimate(rotated), &config, None).unwrap();
        for (a, b) in base.records.iter().zip(conj.records.iter()) {
            let expect = q.mul(&a.beta).unwrap().mul(&q.transpose()).unwrap();
            let mut diff = expect;
            diff.add_scaled(-1.0, &b.beta).unwrap();
            assert!(diff.max_abs() < 1e-8, "t={} err={:e}", a.t, diff.max_abs());
        }
        assert!(base.diagnostics.max_symmetry_error < 1e-12);
    }

    #[test]
    fn divergent_run_keeps_partial_trajectory() {
        let traj = run_vector(
            &vec_estimate(vec![1.0, 1.0]),
            &SolverConfig {
                alpha: 1.0,
                eta: 50.0,
                t_max: 1000,
                record_stride: 1,
            },
            None,
        )
        .unwrap();
        assert!(traj.diverged);
        let last = traj.records.last().unwrap();
        assert!(last.t < 1000);
        assert!(traj.records.first().unwrap().t == 0);
    }

    #[test]
    fn config_and_shape_validation() {
        let est = vec_estimate(vec![1.0]);
        let mut bad = SolverConfig::vector_default();
        bad.alpha = 0.0;
        assert!(run_vector(&est, &bad, None).is_err());
        let mut bad = SolverConfig::vector_default();
        bad.record_stride = 0;
        assert!(run_vector(&est, &bad, None).is_err());
        let mut bad = SolverConfig::vector_default();
        bad.eta = -1.0;
        assert!(run_vector(&est, &bad, None).is_err());

        let asym = mat_estimate(Mat::from_vec(2, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap());
        assert!(matches!(
            run_matrix(&asym, &SolverConfig::matrix_default(), None),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn recording_includes_endpoints_and_stride() {
        let traj = run_vector(
            &vec_estimate(vec![0.5]),
            &SolverConfig {
                alpha: 1e-3,
                eta: 0.01,
                t_max: 10,
                record_stride: 3,
            },
            None,
        )
        .unwrap();
        let ts: Vec<usize> = traj.records.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0, 3, 6, 9, 10]);
        assert_eq!(traj.records[0].loss, 0.0);
    }

    #[test]
    fn thresholding_reads_out_support_and_rank() {
        assert_eq!(
            threshold_vector(&[0.1, -0.004, 0.02], 0.01).unwrap(),
            vec![0, 2]
        );
        assert!(threshold_vector(&[1.0], -0.5).is_err());

        let m = Mat::from_vec(
            3,
            3,
            vec![1.0, 0.0, 0.0, 0.0, 0.003, 0.0, 0.0, 0.0, -0.8],
        )
        .unwrap();
        let th = threshold_matrix(&m, 0.01).unwrap();
        assert_eq!(th.rank, 2);
        assert!((th.matrix.get(0, 0) - 1.0).abs() < 1e-12);
        assert!(th.matrix.get(1, 1).abs() < 1e-12);
        assert!((th.matrix.get(2, 2) + 0.8).abs() < 1e-12);

        let asym = Mat::from_vec(2, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(threshold_matrix(&asym, 0.1).is_err());
    }

    #[test]
    fn normalization_helpers() {
        assert_eq!(normalize_l2(&[3.0, 4.0]).unwrap(), vec![0.6, 0.8]);
        assert!(matches!(normalize_l2(&[0.0, 0.0]), Err(Error::ZeroNorm)));

        let model = ScoreModel::standard_gaussian();
        let n = normalize_identifiable(&[2.0, 0.0], &model).unwrap();
        assert_eq!(n, vec![1.0, 0.0]);

        let m = Mat::from_vec(2, 2, vec![3.0, 0.0, 0.0, 4.0]).unwrap();
        let f = normalize_frobenius(&m).unwrap();
        assert!((f.frobenius_norm() - 1.0).abs() < 1e-15);
        assert!(normalize_frobenius(&Mat::zeros(2, 2)).is_err());
    }
}
