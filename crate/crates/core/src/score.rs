//! Score functions `S(x) = -grad log p0(x)` for the covariate families.
//!
//! The first-moment estimators rest on the Stein-type identity
//! `E[y * S(x)] = mu * beta` for differentiable links, so every family here
//! exposes its score in closed form. Gaussian designs score through the
//! precomputed covariance inverse; the i.i.d. families score entrywise, which
//! is also what the matrix variant applies to each covariate entry.

use alloc::sync::Arc;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Univariate density used for i.i.d. covariate entries.
#[derive(Clone)]
pub enum UnivariateFamily {
    /// Standard normal; score is the identity map.
    StandardGaussian,
    /// Student t with `dof` degrees of freedom; score `(dof+1) x / (dof + x^2)`.
    StudentT { dof: f64 },
    /// Gamma with the given shape and scale; score `1/scale - (shape-1)/x` on `x > 0`.
    Gamma { shape: f64, scale: f64 },
    /// User-supplied density, validated at construction.
    Custom(CustomDensity),
}

/// User-supplied univariate density with its log-density gradient.
///
/// Construction integrates the density over the supplied compact grid by the
/// trapezoid rule and rejects anything off unit mass by more than `1e-3`. The
/// grid range doubles as the support for score evaluation. Sampling is not
/// available for custom densities.
#[derive(Clone)]
pub struct CustomDensity {
    density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    log_density_gradient: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    lo: f64,
    hi: f64,
}

impl core::fmt::Debug for CustomDensity {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("CustomDensity")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .finish()
    }
}

impl core::fmt::Debug for UnivariateFamily {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            UnivariateFamily::StandardGaussian => f.write_str("StandardGaussian"),
            UnivariateFamily::StudentT { dof } => write!(f, "StudentT({dof})"),
            UnivariateFamily::Gamma { shape, scale } => write!(f, "Gamma({shape}, {scale})"),
            UnivariateFamily::Custom(c) => c.fmt(f),
        }
    }
}

impl CustomDensity {
    /// Validates `density` on `grid_points` equally spaced points of
    /// `[lo, hi]` and pairs it with its log-density gradient.
    pub fn new(
        density: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        log_density_gradient: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        lo: f64,
        hi: f64,
        grid_points: usize,
    ) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter {
                what: "custom density grid must be a finite interval",
            });
        }
        if grid_points < 2 {
            return Err(Error::InvalidParameter {
                what: "custom density grid needs at least two points",
            });
        }
        let step = (hi - lo) / (grid_points - 1) as f64;
        let mut mass = 0.0;
        let mut prev = density(lo);
        for k in 1..grid_points {
            let next = density(lo + step * k as f64);
            mass += 0.5 * (prev + next) * step;
            prev = next;
        }
        if (mass - 1.0).abs() > 1e-3 {
            return Err(Error::InvalidParameter {
                what: "custom density does not integrate to 1 on its grid",
            });
        }
        Ok(CustomDensity {
            density,
            log_density_gradient,
            lo,
            hi,
        })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn density(&self, x: f64) -> f64 {
        (self.density)(x)
    }
}

impl UnivariateFamily {
    pub fn student_t(dof: f64) -> Result<Self> {
        if !(dof > 0.0) {
            return Err(Error::InvalidParameter {
                what: "student t degrees of freedom must be positive",
            });
        }
        Ok(UnivariateFamily::StudentT { dof })
    }

    pub fn gamma(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0) || !(scale > 0.0) {
            return Err(Error::InvalidParameter {
                what: "gamma shape and scale must be positive",
            });
        }
        Ok(UnivariateFamily::Gamma { shape, scale })
    }

    /// Score of a single entry, with the family's support enforced.
    ///
    /// `index` only decorates the error for out-of-support values.
    pub fn score(&self, x: f64, index: usize) -> Result<f64> {
        match self {
            UnivariateFamily::StandardGaussian => Ok(x),
            UnivariateFamily::StudentT { dof } => Ok((dof + 1.0) * x / (dof + x * x)),
            UnivariateFamily::Gamma { shape, scale } => {
                if x <= 0.0 {
                    return Err(Error::OutOfSupport { index, value: x });
                }
                Ok(1.0 / scale - (shape - 1.0) / x)
            }
            UnivariateFamily::Custom(c) => {
                if x < c.lo || x > c.hi {
                    return Err(Error::OutOfSupport { index, value: x });
                }
                Ok(-(c.log_density_gradient)(x))
            }
        }
    }
}

/// Covariate model: either a joint Gaussian vector or i.i.d. univariate entries.
#[derive(Debug, Clone)]
pub enum ScoreModel {
    /// `N(mean, covariance)` design. The covariance inverse and Cholesky
    /// factor are fixed at construction so scoring and sampling stay
    /// deterministic and cheap.
    GaussianVector {
        mean: Vec<f64>,
        covariance: Mat,
        covariance_inverse: Mat,
        cholesky_factor: Mat,
    },
    /// Covariate entries drawn i.i.d. from one univariate family.
    IidUnivariate { family: UnivariateFamily },
}

/// 1-norm of a square matrix (max absolute column sum).
fn norm_one(a: &Mat) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..a.cols() {
        let mut sum = 0.0;
        for i in 0..a.rows() {
            sum += a.get(i, j).abs();
        }
        worst = worst.max(sum);
    }
    worst
}

impl ScoreModel {
    pub fn standard_gaussian() -> Self {
        ScoreModel::IidUnivariate {
            family: UnivariateFamily::StandardGaussian,
        }
    }

    pub fn student_t(dof: f64) -> Result<Self> {
        Ok(ScoreModel::IidUnivariate {
            family: UnivariateFamily::student_t(dof)?,
        })
    }

    pub fn gamma(shape: f64, scale: f64) -> Result<Self> {
        Ok(ScoreModel::IidUnivariate {
            family: UnivariateFamily::gamma(shape, scale)?,
        })
    }

    pub fn iid(family: UnivariateFamily) -> Self {
        ScoreModel::IidUnivariate { family }
    }

    /// Joint Gaussian design. Validates symmetry (within `1e-8`), positive
    /// definiteness via Cholesky, a 1-norm condition estimate below `1e12`,
    /// and that the computed inverse multiplies back to the identity within
    /// `1e-8`.
    pub fn gaussian_vector(mean: Vec<f64>, covariance: Mat) -> Result<Self> {
        if covariance.rows() != covariance.cols() {
            return Err(Error::NotSquare {
                rows: covariance.rows(),
                cols: covariance.cols(),
            });
        }
        if mean.len() != covariance.rows() {
            return Err(Error::DimensionMismatch {
                expected: covariance.rows(),
                found: mean.len(),
            });
        }
        let asym = covariance.max_asymmetry()?;
        if asym > 1e-8 {
            return Err(Error::NotSymmetric {
                max_deviation: asym,
            });
        }
        let cholesky_factor = linalg::cholesky(&covariance)?;
        let covariance_inverse = linalg::cholesky_inverse(&cholesky_factor)?;
        let cond = norm_one(&covariance) * norm_one(&covariance_inverse);
        if !(cond <= 1e12) {
            return Err(Error::IllConditioned { estimate: cond });
        }
        let mut residual = covariance.mul(&covariance_inverse)?;
        residual.add_scaled(-1.0, &Mat::identity(covariance.rows()))?;
        if residual.max_abs() > 1e-8 {
            return Err(Error::IllConditioned {
                estimate: residual.max_abs(),
            });
        }
        Ok(ScoreModel::GaussianVector {
            mean,
            covariance,
            covariance_inverse,
            cholesky_factor,
        })
    }

    /// Score of one covariate vector.
    pub fn score_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            ScoreModel::GaussianVector {
                mean,
                covariance_inverse,
                ..
            } => {
                if x.len() != mean.len() {
                    return Err(Error::DimensionMismatch {
                        expected: mean.len(),
                        found: x.len(),
                    });
                }
                let centered: Vec<f64> = x.iter().zip(mean.iter()).map(|(a, m)| a - m).collect();
                covariance_inverse.mul_vec(&centered)
            }
            ScoreModel::IidUnivariate { family } => x
                .iter()
                .enumerate()
                .map(|(i, &v)| family.score(v, i))
                .collect(),
        }
    }

    /// Entrywise score of a matrix covariate; i.i.d. families only.
    pub fn score_matrix(&self, x: &Mat) -> Result<Mat> {
        match self {
            ScoreModel::GaussianVector { .. } => Err(Error::UnsupportedModel {
                what: "matrix scores need an i.i.d. entry family",
            }),
            ScoreModel::IidUnivariate { family } => {
                let mut out = Mat::zeros(x.rows(), x.cols());
                for (i, (o, &v)) in out.data_mut().iter_mut().zip(x.data().iter()).enumerate() {
                    *o = family.score(v, i)?;
                }
                Ok(out)
            }
        }
    }

    /// Draws one covariate row of length `p`.
    pub fn sample_row<R: Rng + ?Sized>(&self, p: usize, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            ScoreModel::GaussianVector {
                mean,
                cholesky_factor,
                ..
            } => {
                if p != mean.len() {
                    return Err(Error::DimensionMismatch {
                        expected: mean.len(),
                        found: p,
                    });
                }
                let z: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
                let mut x = cholesky_factor.mul_vec(&z)?;
                for (xi, m) in x.iter_mut().zip(mean.iter()) {
                    *xi += m;
                }
                Ok(x)
            }
            ScoreModel::IidUnivariate { family } => match family {
                UnivariateFamily::StandardGaussian => {
                    Ok((0..p).map(|_| StandardNormal.sample(rng)).collect())
                }
                UnivariateFamily::StudentT { dof } => {
                    let d = rand_distr::StudentT::new(*dof).map_err(|_| {
                        Error::InvalidParameter {
                            what: "student t degrees of freedom must be positive",
                        }
                    })?;
                    Ok((0..p).map(|_| d.sample(rng)).collect())
                }
                UnivariateFamily::Gamma { shape, scale } => {
                    let d = rand_distr::Gamma::new(*shape, *scale).map_err(|_| {
                        Error::InvalidParameter {
                            what: "gamma shape and scale must be positive",
                        }
                    })?;
                    Ok((0..p).map(|_| d.sample(rng)).collect())
                }
                UnivariateFamily::Custom(_) => Err(Error::UnsupportedModel {
                    what: "custom densities cannot be sampled",
                }),
            },
        }
    }

    /// Draws one `d x d` matrix covariate; i.i.d. families only.
    pub fn sample_matrix<R: Rng + ?Sized>(&self, d: usize, rng: &mut R) -> Result<Mat> {
        match self {
            ScoreModel::GaussianVector { .. } => Err(Error::UnsupportedModel {
                what: "matrix covariates need an i.i.d. entry family",
            }),
            ScoreModel::IidUnivariate { .. } => {
                let row = self.sample_row(d * d, rng)?;
                Mat::from_vec(d, d, row)
            }
        }
    }

    /// Identifiability norm of a direction: `||Sigma^{1/2} beta||_2` under a
    /// Gaussian vector design, plain l2 otherwise.
    pub fn identifiability_norm(&self, beta: &[f64]) -> Result<f64> {
        match self {
            ScoreModel::GaussianVector { covariance, .. } => {
                let sb = covariance.mul_vec(beta)?;
                Ok(linalg::dot(beta, &sb).max(0.0).sqrt())
            }
            ScoreModel::IidUnivariate { .. } => Ok(linalg::norm_l2(beta)),
        }
    }

    /// Index window center used by the kernel predictor: `<mean, beta>` under
    /// a Gaussian vector design, zero otherwise.
    pub fn index_center(&self, beta: &[f64]) -> Result<f64> {
        match self {
            ScoreModel::GaussianVector { mean, .. } => {
                if beta.len() != mean.len() {
                    return Err(Error::DimensionMismatch {
                        expected: mean.len(),
                        found: beta.len(),
                    });
                }
                Ok(linalg::dot(mean, beta))
            }
            ScoreModel::IidUnivariate { .. } => Ok(0.0),
        }
    }
}

/// Symmetric positive definite square root via the Jacobi eigensolver.
///
/// Requires symmetry within `1e-10` and strictly positive eigenvalues.
pub fn spd_sqrt(a: &Mat) -> Result<Mat> {
    let asym = a.max_asymmetry()?;
    if asym > 1e-10 {
        return Err(Error::NotSymmetric {
            max_deviation: asym,
        });
    }
    let eig = linalg::sym_eigen(a)?;
    if eig.values.iter().any(|&w| w <= 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let n = a.rows();
    let mut scaled = eig.vectors.clone();
    for j in 0..n {
        let root = eig.values[j].sqrt();
        for i in 0..n {
            scaled.set(i, j, scaled.get(i, j) * root);
        }
    }
    let mut b = scaled.mul_transpose(&eig.vectors)?;
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (b.get(i, j) + b.get(j, i));
            b.set(i, j, avg);
            b.set(j, i, avg);
        }
    }
    Ok(b)
}
