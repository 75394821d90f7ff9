//! Rate functions, tail-bound verification, Hölder exponent estimation,
//! and dyadic chaining reconstruction.

mod chaining;
mod holder;
mod tail;

pub use chaining::{chaining_reconstruct, ChainingReport, ChainingTransition};
pub use holder::{holder_estimate, HolderEstimate, HolderLevelStat, LevelIncrements};
pub use tail::{gaussian_tail_predicate, tail_check, TailBin, TailPredicatePoint, TailReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("rate argument {h} outside the domain [0, {rho})")]
    RateDomain { h: f64, rho: f64 },
    #[error("invalid rate parameters: {0}")]
    InvalidRates(String),
    #[error("invalid Hölder constants: {0}")]
    InvalidHolder(String),
    #[error("need at least {needed} levels, got {got}")]
    InsufficientLevels { needed: usize, got: usize },
    #[error("no point pairs below rho; nothing to report")]
    EmptyReport,
    #[error("inconsistent inputs: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Geometry(#[from] crate::manifold::GeometryError),
    #[error(transparent)]
    Atlas(#[from] crate::atlas::AtlasError),
}

/// Which increment-threshold rate `r` is in force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateVariant {
    /// `r(h) = log2(1/h)^{-beta}`.
    Log,
    /// `r(h) = h^gamma`.
    Power,
}

/// The rate pair `(r, q)` on `[0, rho)` with `r(0) = q(0) = 0`:
/// `q(h) = K log2(1/h)^{-alpha} h^m` always, and `r` per [`RateVariant`].
///
/// Parameter ranges: `rho` in (0, 1], `alpha, beta > 1`, `gamma` in (0, 1),
/// `K >= 0` (`K = 0` is the degenerate identically-zero bound), and
/// `K_gamma > 0` for the Hölder envelope `r(h) <= K_gamma h^gamma`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateFunctions {
    variant: RateVariant,
    rho: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    bound_scale: f64,
    k_gamma: f64,
    dim: usize,
}

impl RateFunctions {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        variant: RateVariant,
        rho: f64,
        alpha: f64,
        beta: f64,
        gamma: f64,
        bound_scale: f64,
        k_gamma: f64,
        dim: usize,
    ) -> Result<Self, VerifyError> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(VerifyError::InvalidRates(format!("rho = {rho} outside (0, 1]")));
        }
        if !(alpha > 1.0) || !(beta > 1.0) {
            return Err(VerifyError::InvalidRates(format!(
                "alpha = {alpha} and beta = {beta} must exceed 1"
            )));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(VerifyError::InvalidRates(format!("gamma = {gamma} outside (0, 1)")));
        }
        if !(bound_scale >= 0.0) || !bound_scale.is_finite() {
            return Err(VerifyError::InvalidRates(format!("K = {bound_scale} must be >= 0")));
        }
        if !(k_gamma > 0.0) {
            return Err(VerifyError::InvalidRates(format!("K_gamma = {k_gamma} must be > 0")));
        }
        if dim == 0 {
            return Err(VerifyError::InvalidRates("dimension must be >= 1".into()));
        }
        Ok(RateFunctions { variant, rho, alpha, beta, gamma, bound_scale, k_gamma, dim })
    }

    pub fn variant(&self) -> RateVariant {
        self.variant
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// The constant `K` in `q`.
    pub fn bound_scale(&self) -> f64 {
        self.bound_scale
    }

    pub fn k_gamma(&self) -> f64 {
        self.k_gamma
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Evaluate `(r(h), q(h))` for `h` in `[0, rho)`.
    pub fn eval(&self, h: f64) -> Result<(f64, f64), VerifyError> {
        if !(0.0..).contains(&h) || h >= self.rho || !h.is_finite() {
            return Err(VerifyError::RateDomain { h, rho: self.rho });
        }
        if h == 0.0 {
            return Ok((0.0, 0.0));
        }
        let log2_inv = -h.log2();
        let r = match self.variant {
            RateVariant::Log => log2_inv.powf(-self.beta),
            RateVariant::Power => h.powf(self.gamma),
        };
        let q = self.bound_scale * log2_inv.powf(-self.alpha) * h.powi(self.dim as i32);
        Ok((r, q))
    }

    pub fn r(&self, h: f64) -> Result<f64, VerifyError> {
        Ok(self.eval(h)?.0)
    }

    pub fn q(&self, h: f64) -> Result<f64, VerifyError> {
        Ok(self.eval(h)?.1)
    }
}

/// Constants of the geometric-spacing assumption and the explicit local
/// Hölder constant `alpha_{gamma,n} = 2 K_gamma C_n^{2 gamma} /
/// (eta_n^gamma (1 - eta_n^gamma))`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HolderConstants {
    pub eta_n: f64,
    pub c_n: f64,
    pub gamma: f64,
    pub k_gamma: f64,
}

impl HolderConstants {
    pub fn new(eta_n: f64, c_n: f64, gamma: f64, k_gamma: f64) -> Result<Self, VerifyError> {
        if !(eta_n > 0.0 && eta_n < 1.0) {
            return Err(VerifyError::InvalidHolder(format!("eta_n = {eta_n} outside (0, 1)")));
        }
        if !(c_n > 0.0) {
            return Err(VerifyError::InvalidHolder(format!("C_n = {c_n} must be > 0")));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(VerifyError::InvalidHolder(format!("gamma = {gamma} outside (0, 1)")));
        }
        if !(k_gamma > 0.0) {
            return Err(VerifyError::InvalidHolder(format!("K_gamma = {k_gamma} must be > 0")));
        }
        Ok(HolderConstants { eta_n, c_n, gamma, k_gamma })
    }

    /// The closed-form local Hölder constant.
    pub fn holder_constant(&self) -> f64 {
        let e = self.eta_n.powf(self.gamma);
        2.0 * self.k_gamma * self.c_n.powf(2.0 * self.gamma) / (e * (1.0 - e))
    }

    /// Check the two-sided geometric envelope
    /// `eta_n^k / C_n <= delta_k <= C_n eta_n^k` for the given
    /// `(k, delta_k)` pairs; returns the failing levels.
    pub fn spacing_envelope_failures(&self, spacings: &[(u32, f64)]) -> Vec<u32> {
        spacings
            .iter()
            .filter(|(k, delta)| {
                let e = self.eta_n.powi(*k as i32);
                !(e / self.c_n <= *delta && *delta <= self.c_n * e)
            })
            .map(|(k, _)| *k)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn log_rates() -> RateFunctions {
        RateFunctions::new(RateVariant::Log, 1.0, 2.0, 2.0, 0.5, 1.0, 1.0, 2).unwrap()
    }

    #[test]
    fn rates_vanish_at_zero() {
        assert_eq!(log_rates().eval(0.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn log_rate_at_quarter() {
        // log2(4) = 2, beta = 2: r = 1/4.
        let (r, _) = log_rates().eval(0.25).unwrap();
        assert_relative_eq!(r, 0.25, max_relative = 1e-15);
    }

    #[test]
    fn q_at_quarter_dim_two() {
        // K = 1, alpha = 2, m = 2: q = 2^{-2} * (1/4)^2 = 0.015625.
        let (_, q) = log_rates().eval(0.25).unwrap();
        assert_relative_eq!(q, 0.015625, max_relative = 1e-15);
    }

    #[test]
    fn power_rate_square_root() {
        let rates = RateFunctions::new(RateVariant::Power, 1.0, 2.0, 2.0, 0.5, 1.0, 1.0, 2).unwrap();
        assert_relative_eq!(rates.r(0.09).unwrap(), 0.3, max_relative = 1e-15);
    }

    #[test]
    fn domain_errors() {
        let rates = log_rates();
        assert!(matches!(rates.eval(1.0), Err(VerifyError::RateDomain { .. })));
        assert!(matches!(rates.eval(-0.1), Err(VerifyError::RateDomain { .. })));
        assert!(rates.eval(0.999).is_ok());
    }

    #[test]
    fn strictly_increasing_on_grid() {
        // 10^3-point grid in (0, rho) for both variants.
        for rates in [
            log_rates(),
            RateFunctions::new(RateVariant::Power, 1.0, 2.0, 2.0, 0.3, 2.0, 1.0, 1).unwrap(),
        ] {
            let mut prev = (0.0, 0.0);
            for i in 1..=1000 {
                let h = rates.rho() * i as f64 / 1001.0;
                let (r, q) = rates.eval(h).unwrap();
                assert!(r > prev.0, "r not strictly increasing at h = {h}");
                assert!(q > prev.1, "q not strictly increasing at h = {h}");
                prev = (r, q);
            }
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(RateFunctions::new(RateVariant::Log, 1.5, 2.0, 2.0, 0.5, 1.0, 1.0, 1).is_err());
        assert!(RateFunctions::new(RateVariant::Log, 1.0, 1.0, 2.0, 0.5, 1.0, 1.0, 1).is_err());
        assert!(RateFunctions::new(RateVariant::Log, 1.0, 2.0, 2.0, 1.0, 1.0, 1.0, 1).is_err());
        assert!(RateFunctions::new(RateVariant::Log, 1.0, 2.0, 2.0, 0.5, -1.0, 1.0, 1).is_err());
        // K = 0 is the documented degenerate bound.
        assert!(RateFunctions::new(RateVariant::Log, 1.0, 2.0, 2.0, 0.5, 0.0, 1.0, 1).is_ok());
    }

    #[test]
    fn holder_constant_reference_value() {
        // K_gamma = 1, C_n = 1, eta_n = 1/2, gamma = 1/2:
        // 2 / (2^{-1/2} (1 - 2^{-1/2})) = 9.65685...
        let hc = HolderConstants::new(0.5, 1.0, 0.5, 1.0).unwrap();
        let e = 0.5_f64.sqrt();
        assert_relative_eq!(hc.holder_constant(), 2.0 / (e * (1.0 - e)), max_relative = 1e-15);
        assert_relative_eq!(hc.holder_constant(), 9.65685424949238, max_relative = 1e-12);
    }

    #[test]
    fn holder_constant_homogeneity() {
        // gamma = 1/2 makes C_n^{2 gamma} = C_n: doubling C_n doubles the value.
        let a = HolderConstants::new(0.5, 1.0, 0.5, 1.0).unwrap().holder_constant();
        let b = HolderConstants::new(0.5, 2.0, 0.5, 1.0).unwrap().holder_constant();
        assert_relative_eq!(b, 2.0 * a, max_relative = 1e-14);
        // Scaling K_gamma scales the constant exactly.
        let c = HolderConstants::new(0.5, 1.0, 0.5, 3.5).unwrap().holder_constant();
        assert_relative_eq!(c, 3.5 * a, max_relative = 1e-14);
    }

    #[test]
    fn gamma_zero_is_excluded() {
        assert!(HolderConstants::new(0.5, 1.0, 0.0, 1.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn holder_constant_scales_linearly_in_k_gamma(
            eta_n in 0.05f64..0.95,
            c_n in 0.1f64..10.0,
            gamma in 0.05f64..0.95,
            k_gamma in 0.1f64..10.0,
            c in 0.5f64..8.0,
        ) {
            let base = HolderConstants::new(eta_n, c_n, gamma, k_gamma).unwrap();
            let scaled = HolderConstants::new(eta_n, c_n, gamma, c * k_gamma).unwrap();
            let expected = c * base.holder_constant();
            let got = scaled.holder_constant();
            proptest::prop_assert!(
                ((got - expected) / expected).abs() < 1e-12,
                "got {got}, expected {expected}"
            );
        }
    }

    #[test]
    fn dyadic_spacings_satisfy_envelope() {
        // eta_n = 1/2, C_n = 1/(2 R_n): holds exactly for every k >= 1.
        let radius = 1.0 / (2.0 * 2.0_f64.sqrt());
        let hc = HolderConstants::new(0.5, 1.0 / (2.0 * radius), 0.5, 1.0).unwrap();
        let spacings: Vec<(u32, f64)> =
            (1..=20).map(|k| (k, radius * 2.0_f64.powi(1 - k as i32))).collect();
        assert!(hc.spacing_envelope_failures(&spacings).is_empty());
        // A violating spacing is flagged.
        assert_eq!(hc.spacing_envelope_failures(&[(3, 1.0)]), vec![3]);
    }
}
