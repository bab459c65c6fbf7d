//! First-moment estimators, plain and heavy-tail robust.
//!
//! The estimand is `E[y * S(x)] = mu * beta`, so a sample mean of `y S(x)`
//! already points at the signal under light tails. With heavy-tailed designs
//! or responses the mean concentrates too slowly; the vector route winsorizes
//! both factors at a level `tau`, and the matrix route passes each
//! `y_i S(X_i)` through a spectral shrinker that caps singular values by the
//! bounded odd influence [`psi`] before averaging.

use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::score::ScoreModel;
use crate::simgen::{MatrixSimInstance, SimInstance};

/// How a moment estimate was formed, with its robustification constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentMode {
    PlainVector,
    TruncatedVector { tau: f64 },
    PlainMatrixSymmetrized,
    ShrunkMatrixSymmetrized { kappa: f64 },
}

/// Estimated first moment with provenance.
#[derive(Debug, Clone)]
pub struct MomentEstimate {
    pub value: MomentValue,
    pub mode: MomentMode,
}

#[derive(Debug, Clone)]
pub enum MomentValue {
    Vector(Vec<f64>),
    Matrix(Mat),
}

impl MomentEstimate {
    pub fn as_vector(&self) -> Result<&[f64]> {
        match &self.value {
            MomentValue::Vector(v) => Ok(v),
            MomentValue::Matrix(_) => Err(Error::UnsupportedModel {
                what: "expected a vector moment",
            }),
        }
    }

    pub fn as_matrix(&self) -> Result<&Mat> {
        match &self.value {
            MomentValue::Matrix(m) => Ok(m),
            MomentValue::Vector(_) => Err(Error::UnsupportedModel {
                what: "expected a matrix moment",
            }),
        }
    }
}

/// Sign-preserving clip `sign(a) * min(|a|, tau)`; `tau` must be positive.
pub fn winsorize(a: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter {
            what: "winsorization level must be positive",
        });
    }
    Ok(a.clamp(-tau, tau))
}

/// Bounded odd influence: `log(1 + x + x^2/2)` for positive `x`, extended as
/// an odd function. Satisfies `|psi(x)| <= |x|` and is strictly increasing.
pub fn psi(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x > 0.0 {
        (x + 0.5 * x * x).ln_1p()
    } else {
        -(-x + 0.5 * x * x).ln_1p()
    }
}

/// Plain sample mean `(1/n) sum y_i S(x_i)`.
pub fn plain_moment_vector(instance: &SimInstance, model: &ScoreModel) -> Result<MomentEstimate> {
    let n = instance.n();
    if n == 0 {
        return Err(Error::EmptyInstance);
    }
    let p = instance.p();
    let mut acc = alloc::vec![0.0; p];
    for i in 0..n {
        let s = model.score_vector(instance.covariates.row(i))?;
        let y = instance.responses[i];
        for (a, sj) in acc.iter_mut().zip(s.iter()) {
            *a += y * sj;
        }
    }
    let inv = 1.0 / n as f64;
    for a in acc.iter_mut() {
        *a *= inv;
    }
    Ok(MomentEstimate {
        value: MomentValue::Vector(acc),
        mode: MomentMode::PlainVector,
    })
}

/// Winsorized mean `(1/n) sum w(y_i) w(S(x_i))` with both factors clipped at
/// `tau`.
pub fn truncated_moment_vector(
    instance: &SimInstance,
    model: &ScoreModel,
    tau: f64,
) -> Result<MomentEstimate> {
    let n = instance.n();
    if n == 0 {
        return Err(Error::EmptyInstance);
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter {
            what: "winsorization level must be positive",
        });
    }
    let p = instance.p();
    let mut acc = alloc::vec![0.0; p];
    for i in 0..n {
        let s = model.score_vector(instance.covariates.row(i))?;
        let y = winsorize(instance.responses[i], tau)?;
        for (a, &sj) in acc.iter_mut().zip(s.iter()) {
            *a += y * winsorize(sj, tau)?;
        }
    }
    let inv = 1.0 / n as f64;
    for a in acc.iter_mut() {
        *a *= inv;
    }
    Ok(MomentEstimate {
        value: MomentValue::Vector(acc),
        mode: MomentMode::TruncatedVector { tau },
    })
}

/// Symmetrized sample mean `(1/2n) sum y_i (S(X_i) + S(X_i)^T)`.
pub fn plain_moment_matrix(
    instance: &MatrixSimInstance,
    model: &ScoreModel,
) -> Result<MomentEstimate> {
    let n = instance.n();
    if n == 0 {
        return Err(Error::EmptyInstance);
    }
    let d = instance.d();
    let mut acc = Mat::zeros(d, d);
    for (x, &y) in instance.covariates.iter().zip(instance.responses.iter()) {
        let s = model.score_matrix(x)?;
        for i in 0..d {
            for j in 0..d {
                let v = acc.get(i, j) + y * (s.get(i, j) + s.get(j, i));
                acc.set(i, j, v);
            }
        }
    }
    acc.scale(1.0 / (2.0 * n as f64));
    Ok(MomentEstimate {
        value: MomentValue::Matrix(acc),
        mode: MomentMode::PlainMatrixSymmetrized,
    })
}

/// Applies [`psi`] to the singular values of `a`, scaled by `kappa`:
/// the result has the same singular vectors, with each `sigma` replaced by
/// `psi(kappa * sigma) / kappa`.
///
/// Computed as `a + sum_i (psi(kappa s_i)/kappa - s_i) u_i v_i^T`, which
/// stays accurate as `kappa * sigma -> 0` where the map approaches the
/// identity.
pub fn spectral_shrink(a: &Mat, kappa: f64) -> Result<Mat> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter {
            what: "shrinkage scale must be positive",
        });
    }
    let f = crate::linalg::svd(a)?;
    let mut out = a.clone();
    let cutoff = 1e-14 * f.sigma.first().copied().unwrap_or(0.0);
    for (k, &s) in f.sigma.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        let coeff = psi(kappa * s) / kappa - s;
        if coeff == 0.0 {
            continue;
        }
        let uk = f.u.col(k);
        let vk = f.v.col(k);
        out.add_outer(coeff, &uk, &vk)?;
    }
    Ok(out)
}

/// Robust symmetrized matrix moment
/// `(1/2n) sum [H(y_i S(X_i), kappa) + H(y_i S(X_i), kappa)^T]`
/// with `H` the spectral shrinker.
pub fn robust_moment_matrix(
    instance: &MatrixSimInstance,
    model: &ScoreModel,
    kappa: f64,
) -> Result<MomentEstimate> {
    let n = instance.n();
    if n == 0 {
        return Err(Error::EmptyInstance);
    }
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter {
            what: "shrinkage scale must be positive",
        });
    }
    let d = instance.d();
    let mut acc = Mat::zeros(d, d);
    for (x, &y) in instance.covariates.iter().zip(instance.responses.iter()) {
        let mut s = model.score_matrix(x)?;
        s.scale(y);
        let h = spectral_shrink(&s, kappa)?;
        for i in 0..d {
            for j in 0..d {
                let v = acc.get(i, j) + h.get(i, j) + h.get(j, i);
                acc.set(i, j, v);
            }
        }
    }
    acc.scale(1.0 / (2.0 * n as f64));
    Ok(MomentEstimate {
        value: MomentValue::Matrix(acc),
        mode: MomentMode::ShrunkMatrixSymmetrized { kappa },
    })
}

/// Winsorization level `(m n / log p)^{1/4} / 2` from a fourth-moment bound
/// `m` on the response-score products.
pub fn fourth_moment_tau(m: f64, n: usize, p: usize) -> Result<f64> {
    if !(m > 0.0) {
        return Err(Error::InvalidParameter {
            what: "fourth-moment bound must be positive",
        });
    }
    if n == 0 || p < 2 {
        return Err(Error::InvalidParameter {
            what: "winsorization level needs n >= 1 and p >= 2",
        });
    }
    Ok((m * n as f64 / (p as f64).ln()).powf(0.25) / 2.0)
}

/// Simulation default `2 (n / log p)^{1/4}` (the fourth-moment formula at
/// `m = 256`).
pub fn default_tau(n: usize, p: usize) -> Result<f64> {
    fourth_moment_tau(256.0, n, p)
}

/// Shrinkage scale `sqrt(log(4d) / (n d m))` from a fourth-moment bound `m`.
pub fn fourth_moment_kappa(m: f64, n: usize, d: usize) -> Result<f64> {
    if !(m > 0.0) {
        return Err(Error::InvalidParameter {
            what: "fourth-moment bound must be positive",
        });
    }
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter {
            what: "shrinkage scale needs n >= 1 and d >= 1",
        });
    }
    Ok(((4.0 * d as f64).ln() / (n as f64 * d as f64 * m)).sqrt())
}

/// Simulation default `2 sqrt(log(4d) / (n d))` (the fourth-moment formula at
/// `m = 1/4`).
pub fn default_kappa(n: usize, d: usize) -> Result<f64> {
    fourth_moment_kappa(0.25, n, d)
}

/// Fourth sample moment of the responses, the data-driven stand-in for the
/// bound `m` when none is configured.
pub fn response_fourth_moment(responses: &[f64]) -> Result<f64> {
    if responses.is_empty() {
        return Err(Error::EmptyInstance);
    }
    let n = responses.len() as f64;
    Ok(responses.iter().map(|y| y.powi(4)).sum::<f64>() / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, Mat};
    use crate::simgen::{gen_sparse_beta, gen_vector_sim, LinkSpec};
    use alloc::vec;
    use alloc::vec::Vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn winsorize_clips_with_sign() {
        assert_eq!(winsorize(5.0, 2.0).unwrap(), 2.0);
        assert_eq!(winsorize(-5.0, 2.0).unwrap(), -2.0);
        assert_eq!(winsorize(1.5, 2.0).unwrap(), 1.5);
        assert_eq!(winsorize(0.0, 2.0).unwrap(), 0.0);
        assert!(winsorize(1.0, 0.0).is_err());
        assert!(winsorize(1.0, -1.0).is_err());
    }

    #[test]
    fn psi_known_values_and_shape() {
        let ln_2_5 = 2.5f64.ln();
        assert!((psi(1.0) - ln_2_5).abs() < 1e-15);
        assert!((psi(-1.0) + ln_2_5).abs() < 1e-15);
        assert_eq!(psi(0.0), 0.0);
        let grid: Vec<f64> = (-60..=60).map(|k| k as f64 * 0.25).collect();
        for &x in &grid {
            assert!((psi(-x) + psi(x)).abs() < 1e-15, "odd at {x}");
            assert!(psi(x).abs() <= x.abs() + 1e-15, "bounded at {x}");
        }
        for w in grid.windows(2) {
            assert!(psi(w[0]) < psi(w[1]), "monotone at {}", w[0]);
        }
    }

    fn tiny_instance() -> SimInstance {
        SimInstance {
            covariates: Mat::from_vec(2, 2, vec![1.0, 2.0, 3.0, -1.0]).unwrap(),
            responses: vec![2.0, -1.0],
            beta_star: vec![1.0, 0.0],
            support: vec![0],
            mu_star: None,
            link: LinkSpec::Identity,
            noise_sigma: 0.0,
            seed: 0,
        }
    }

    #[test]
    fn plain_vector_moment_by_hand() {
        let inst = tiny_instance();
        let model = ScoreModel::standard_gaussian();
        let phi = plain_moment_vector(&inst, &model).unwrap();
        assert_eq!(phi.mode, MomentMode::PlainVector);
        let v = phi.as_vector().unwrap();
        // (2*(1,2) + (-1)*(3,-1)) / 2 = (-0.5, 2.5)
        assert_eq!(v, &[-0.5, 2.5]);
        assert!(phi.as_matrix().is_err());
    }

    #[test]
    fn truncated_vector_moment_by_hand() {
        let inst = tiny_instance();
        let model = ScoreModel::standard_gaussian();
        let phi = truncated_moment_vector(&inst, &model, 1.0).unwrap();
        assert_eq!(phi.mode, MomentMode::TruncatedVector { tau: 1.0 });
        // (1*(1,1) + (-1)*(1,-1)) / 2 = (0, 1)
        assert_eq!(phi.as_vector().unwrap(), &[0.0, 1.0]);
        assert!(truncated_moment_vector(&inst, &model, 0.0).is_err());
    }

    #[test]
    fn empty_instance_rejected() {
        let model = ScoreModel::standard_gaussian();
        let inst = gen_vector_sim(&[1.0], &model, &LinkSpec::Identity, 0.5, 0, 1).unwrap();
        assert!(matches!(
            plain_moment_vector(&inst, &model),
            Err(Error::EmptyInstance)
        ));
        assert!(matches!(
            truncated_moment_vector(&inst, &model, 1.0),
            Err(Error::EmptyInstance)
        ));
    }

    #[test]
    fn plain_matrix_moment_by_hand() {
        let x = Mat::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let inst = MatrixSimInstance {
            covariates: vec![x],
            responses: vec![2.0],
            beta_star: Mat::identity(2),
            rank: 2,
            mu_star: None,
            link: LinkSpec::Identity,
            noise_sigma: 0.0,
            seed: 0,
        };
        let model = ScoreModel::standard_gaussian();
        let phi = plain_moment_matrix(&inst, &model).unwrap();
        // (1/2) * 2 * (X + X^T) = [[2, 5], [5, 8]]
        assert_eq!(phi.as_matrix().unwrap().data(), &[2.0, 5.0, 5.0, 8.0]);
        assert!(phi.as_vector().is_err());
    }

    #[test]
    fn shrink_diagonal_matches_psi() {
        let a = Mat::from_vec(2, 2, vec![3.0, 0.0, 0.0, 1.0]).unwrap();
        let h = spectral_shrink(&a, 1.0).unwrap();
        assert!((h.get(0, 0) - 8.5f64.ln()).abs() < 1e-12);
        assert!((h.get(1, 1) - 2.5f64.ln()).abs() < 1e-12);
        assert!(h.get(0, 1).abs() < 1e-12);
        assert!(h.get(1, 0).abs() < 1e-12);
        assert!(spectral_shrink(&a, 0.0).is_err());
    }

    #[test]
    fn shrink_matches_hermitian_dilation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for d in [2usize, 3, 5, 8] {
            let data: Vec<f64> = (0..d * d)
                .map(|_| rand::Rng::gen_range(&mut rng, -2.0..2.0))
                .collect();
            let a = Mat::from_vec(d, d, data).unwrap();
            for kappa in [0.3, 1.0, 2.5] {
                let h = spectral_shrink(&a, kappa).unwrap();

                // Oracle route: eigendecompose the symmetric dilation
                // [[0, A], [A^T, 0]], apply psi(kappa .)/kappa to the
                // eigenvalues, and read back the top-right block.
                let n = 2 * d;
                let mut dil = Mat::zeros(n, n);
                for i in 0..d {
                    for j in 0..d {
                        dil.set(i, d + j, a.get(i, j));
                        dil.set(d + j, i, a.get(i, j));
                    }
                }
                let eig = linalg::sym_eigen(&dil).unwrap();
                let mut mapped = Mat::zeros(n, n);
                for k in 0..n {
                    let w = psi(kappa * eig.values[k]) / kappa;
                    let col = eig.vectors.col(k);
                    mapped.add_outer(w, &col, &col).unwrap();
                }
                let mut worst = 0.0f64;
                for i in 0..d {
                    for j in 0..d {
                        worst = worst.max((mapped.get(i, d + j) - h.get(i, j)).abs());
                    }
                }
                assert!(worst < 1e-9, "d={d} kappa={kappa} worst={worst:e}");
            }
        }
    }

    #[test]
    fn shrink_contracts_operator_norm_and_fixes_small_scales() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let data: Vec<f64> = (0..36)
            .map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0))
            .collect();
        let a = Mat::from_vec(6, 6, data).unwrap();
        let norm_a = linalg::op_norm(&a).unwrap();
        for kappa in [0.5, 2.0, 10.0] {
            let h = spectral_shrink(&a, kappa).unwrap();
            assert!(linalg::op_norm(&h).unwrap() <= norm_a + 1e-12);
        }
        // kappa * sigma_max << 1 leaves the matrix essentially unchanged.
        let h = spectral_shrink(&a, 1e-6).unwrap();
        let mut diff = h.clone();
        diff.add_scaled(-1.0, &a).unwrap();
        assert!(diff.max_abs() < 1e-11);
    }

    #[test]
    fn tuning_constant_formulas() {
        // (1 * 256 / 4)^{1/4} / 2 = sqrt(2) at m = 1, n = 256, log p = 4.
        let p = (54.598150033144236f64).round() as usize; // e^4 ~ 54.6 -> 55
        let tau = fourth_moment_tau(1.0, 256, p).unwrap();
        let expect = (256.0 / (p as f64).ln()).powf(0.25) / 2.0;
        assert!((tau - expect).abs() < 1e-12);
        assert!((expect - 2.0f64.sqrt()).abs() < 2e-2);

        let kappa = fourth_moment_kappa(1.0, 100, 4).unwrap();
        assert!((kappa - (16.0f64.ln() / 400.0).sqrt()).abs() < 1e-15);
        assert!((kappa - 0.08326).abs() < 5e-6);

        let d = default_tau(256, p).unwrap();
        assert!((d - 2.0 * (256.0 / (p as f64).ln()).powf(0.25)).abs() < 1e-12);
        let dk = default_kappa(100, 4).unwrap();
        assert!((dk - 2.0 * (16.0f64.ln() / 400.0).sqrt()).abs() < 1e-15);

        assert!(fourth_moment_tau(0.0, 10, 10).is_err());
        assert!(fourth_moment_tau(1.0, 0, 10).is_err());
        assert!(fourth_moment_kappa(1.0, 10, 0).is_err());
    }

    #[test]
    fn truncation_beats_plain_under_outliers() {
        // Contaminate 5% of responses with +-100 spikes; the winsorized
        // moment should land closer to the clean target in sup norm for most
        // seeds.
        let p = 60;
        let n = 800;
        let model = ScoreModel::student_t(5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (beta, _) = gen_sparse_beta(p, 6, &mut rng).unwrap();

        // Clean large-sample reference for the truncation target.
        let big = gen_vector_sim(&beta, &model, &LinkSpec::F3, 0.5, 40_000, 999).unwrap();
        let reference = plain_moment_vector(&big, &model).unwrap();
        let reference = reference.as_vector().unwrap().to_vec();

        let tau = default_tau(n, p).unwrap();
        let mut wins = 0;
        let trials = 50;
        for trial in 0..trials {
            let mut inst =
                gen_vector_sim(&beta, &model, &LinkSpec::F3, 0.5, n, 10_000 + trial).unwrap();
            let mut spike_rng = ChaCha8Rng::seed_from_u64(20_000 + trial);
            for i in 0..n / 20 {
                let sign = if rand::Rng::gen::<bool>(&mut spike_rng) {
                    1.0
                } else {
                    -1.0
                };
                inst.responses[i * 20] = 100.0 * sign;
            }
            let plain = plain_moment_vector(&inst, &model).unwrap();
            let trunc = truncated_moment_vector(&inst, &model, tau).unwrap();
            let err = |est: &MomentEstimate| {
                est.as_vector()
                    .unwrap()
                    .iter()
                    .zip(reference.iter())
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            };
            if err(&trunc) < err(&plain) {
                wins += 1;
            }
        }
        assert!(wins * 2 > trials, "truncated won only {wins}/{trials}");
    }
}
