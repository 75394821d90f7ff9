//! Gaussian random fields with prescribed isotropic geodesic variograms.
//!
//! The workhorse is the pinned construction: given a variogram
//! `gamma_v(h) = C h^eta (+ nugget)`, the covariance
//! `k(x, y) = (gamma_v(d(x, r)) + gamma_v(d(y, r)) - gamma_v(d(x, y))) / 2`
//! pinned at a reference point `r` (the first point of the list) yields a
//! centered Gaussian field with `E (phi(x) - phi(y))^2 = gamma_v(d(x, y))`
//! exactly, for every pair. A stationary powered-exponential covariance
//! family is provided for contrast.

mod estimators;
mod io;
mod sample;

pub use estimators::{
    moment_bound_check, moment_estimate, variogram_empirical, BinStat, MomentBoundVariant,
    MomentCondition,
};
pub use io::{read_sample_csv, read_values_mkc1, write_sample_csv, write_values_mkc1, MKC1_MAGIC};
pub use sample::{
    conditional_refine, coord_key, refinement_point_order, sample_gaussian, FieldSample, GridRef,
};

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifold::{GeometryError, Manifold, ManifoldPoint};

/// Jitter ladder: start at zero, then 1e-12 growing tenfold up to 1e-6.
pub const JITTER_LADDER_START: f64 = 1e-12;
pub const JITTER_LADDER_MAX: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error(
        "model rejected: covariance not positive semidefinite (smallest eigenvalue {smallest_eigenvalue:.3e} after jitter {jitter_max:.0e})"
    )]
    ModelRejection { smallest_eigenvalue: f64, jitter_max: f64 },
    #[error("inconsistent inputs: {0}")]
    Mismatch(String),
    #[error("sample file error: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceFamily {
    /// Pinned field built directly from the variogram `C h^eta + nugget`.
    PoweredExponentialVariogram,
    /// Stationary covariance `C exp(-h^eta) + nugget * delta`.
    ExponentialCovariance,
}

/// Isotropic model in geodesic distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceModel {
    family: CovarianceFamily,
    scale: f64,
    eta: f64,
    nugget: f64,
}

impl CovarianceModel {
    /// Validate `C > 0`, `eta` in (0, 1], `nugget >= 0`. Values of `eta`
    /// above 1 leave the positive-definiteness domain of the geodesic
    /// powered-exponential family on the sphere and are rejected as a
    /// model rejection rather than a usage error.
    pub fn new(
        family: CovarianceFamily,
        scale: f64,
        eta: f64,
        nugget: f64,
    ) -> Result<Self, FieldError> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(FieldError::InvalidModel(format!("scale C = {scale} must be > 0")));
        }
        if eta > 1.0 {
            return Err(FieldError::ModelRejection {
                smallest_eigenvalue: f64::NAN,
                jitter_max: JITTER_LADDER_MAX,
            });
        }
        if !(eta > 0.0) {
            return Err(FieldError::InvalidModel(format!("eta = {eta} must be in (0, 1]")));
        }
        if !(nugget >= 0.0) || !nugget.is_finite() {
            return Err(FieldError::InvalidModel(format!("nugget = {nugget} must be >= 0")));
        }
        Ok(CovarianceModel { family, scale, eta, nugget })
    }

    pub fn pinned(scale: f64, eta: f64) -> Result<Self, FieldError> {
        Self::new(CovarianceFamily::PoweredExponentialVariogram, scale, eta, 0.0)
    }

    pub fn family(&self) -> CovarianceFamily {
        self.family
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    /// Model variogram `sigma(x, y)^2` as a function of geodesic distance.
    pub fn variogram(&self, h: f64) -> f64 {
        if h == 0.0 {
            return 0.0;
        }
        match self.family {
            CovarianceFamily::PoweredExponentialVariogram => {
                self.scale * h.powf(self.eta) + self.nugget
            }
            CovarianceFamily::ExponentialCovariance => {
                2.0 * self.scale * (1.0 - (-h.powf(self.eta)).exp()) + 2.0 * self.nugget
            }
        }
    }

    /// Covariance entry for points at distances `d_ir`, `d_jr` from the
    /// reference and `d_ij` from each other.
    fn entry(&self, d_ij: f64, d_ir: f64, d_jr: f64) -> f64 {
        match self.family {
            CovarianceFamily::PoweredExponentialVariogram => {
                0.5 * (self.variogram(d_ir) + self.variogram(d_jr) - self.variogram(d_ij))
            }
            CovarianceFamily::ExponentialCovariance => {
                let base = self.scale * (-d_ij.powf(self.eta)).exp();
                if d_ij == 0.0 {
                    base + self.nugget
                } else {
                    base
                }
            }
        }
    }
}

/// Covariance matrix of the model on a point list, verified factorizable.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    /// The full matrix with the accepted jitter already added to the
    /// strictly-positive-variance diagonal entries.
    pub matrix: DMatrix<f64>,
    /// Jitter that made the factorization succeed (0 when none needed).
    pub jitter: f64,
    /// Indices whose variance is exactly zero (the pinned reference and
    /// duplicates of it); excluded from factorization, sampled as 0.
    pub zero_variance: Vec<usize>,
}

/// Build the covariance matrix of `model` on `points` and verify it is
/// factorizable after at most the maximal ladder jitter.
///
/// For the pinned family the reference is `points[0]`.
pub fn covariance_matrix(
    model: &CovarianceModel,
    points: &[ManifoldPoint],
    manifold: &Manifold,
) -> Result<CovarianceMatrix, FieldError> {
    let n = points.len();
    let mut dist_to_ref = vec![0.0; n];
    if model.family == CovarianceFamily::PoweredExponentialVariogram {
        for (i, p) in points.iter().enumerate() {
            dist_to_ref[i] = manifold.distance(&points[0], p)?;
        }
    }
    let mut matrix = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let d = if i == j { 0.0 } else { manifold.distance(&points[i], &points[j])? };
            let v = model.entry(d, dist_to_ref[i], dist_to_ref[j]);
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
    let zero_variance: Vec<usize> = (0..n).filter(|&i| matrix[(i, i)] == 0.0).collect();
    let live: Vec<usize> = (0..n).filter(|&i| matrix[(i, i)] != 0.0).collect();
    let sub = submatrix(&matrix, &live, &live);
    let (_, jitter) = cholesky_with_jitter(&sub)?;
    if jitter > 0.0 {
        for &i in &live {
            matrix[(i, i)] += jitter;
        }
    }
    Ok(CovarianceMatrix { matrix, jitter, zero_variance })
}

/// Try Cholesky with the jitter ladder; on exhaustion report the smallest
/// eigenvalue of the unjittered matrix.
pub(crate) fn cholesky_with_jitter(
    mat: &DMatrix<f64>,
) -> Result<(Cholesky<f64, Dyn>, f64), FieldError> {
    if mat.nrows() == 0 {
        return Ok((Cholesky::new(DMatrix::zeros(0, 0)).expect("empty cholesky"), 0.0));
    }
    let mut jitter = 0.0;
    loop {
        let mut attempt = mat.clone();
        for i in 0..attempt.nrows() {
            attempt[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(attempt) {
            return Ok((chol, jitter));
        }
        jitter = if jitter == 0.0 { JITTER_LADDER_START } else { jitter * 10.0 };
        if jitter > JITTER_LADDER_MAX * (1.0 + 1e-9) {
            let smallest = mat
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            return Err(FieldError::ModelRejection {
                smallest_eigenvalue: smallest,
                jitter_max: JITTER_LADDER_MAX,
            });
        }
    }
}

pub(crate) fn submatrix(mat: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| mat[(rows[i], cols[j])])
}
