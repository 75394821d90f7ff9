//! Empirical variogram and increment-moment estimators, binned by geodesic
//! distance, plus the moment-condition predicates.

use serde::{Deserialize, Serialize};

use super::{FieldError, FieldSample};
use crate::manifold::Manifold;
use crate::stats::{bin_index, geometric_mid, log_bin_edges};

/// One distance bin of an estimator table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinStat {
    pub h_lo: f64,
    pub h_hi: f64,
    /// Geometric bin midpoint.
    pub h_mid: f64,
    /// Number of point pairs in the bin.
    pub pairs: usize,
    /// Estimate (mean squared increment, or mean |increment|^l).
    pub estimate: f64,
    /// Pooled standard error treating all (pair, replicate) samples as
    /// independent; infinite when only one sample fell in the bin.
    pub stderr: f64,
}

fn pair_distances(
    sample: &FieldSample,
    manifold: &Manifold,
) -> Result<Vec<(usize, usize, f64)>, FieldError> {
    let pts = sample.points();
    let mut pairs = Vec::new();
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let d = manifold.distance(&pts[i], &pts[j])?;
            if d > 0.0 {
                pairs.push((i, j, d));
            }
        }
    }
    Ok(pairs)
}

fn binned_moment(
    sample: &FieldSample,
    manifold: &Manifold,
    bins: usize,
    power: f64,
) -> Result<Vec<BinStat>, FieldError> {
    if sample.len() < 2 {
        return Err(FieldError::Mismatch("need at least 2 points".into()));
    }
    if sample.replicates() == 0 {
        return Err(FieldError::Mismatch("need at least 1 replicate".into()));
    }
    let pairs = pair_distances(sample, manifold)?;
    if pairs.is_empty() {
        return Err(FieldError::Mismatch("all pairwise distances are zero".into()));
    }
    let lo = pairs.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|p| p.2).fold(0.0_f64, f64::max);
    let edges = if lo == hi {
        vec![lo * 0.999999, hi * 1.000001]
    } else {
        log_bin_edges(lo, hi, bins)
    };
    let n_bins = edges.len() - 1;
    let mut sum = vec![0.0; n_bins];
    let mut sum_sq = vec![0.0; n_bins];
    let mut n_samples = vec![0u64; n_bins];
    let mut n_pairs = vec![0usize; n_bins];
    for &(i, j, d) in &pairs {
        let Some(b) = bin_index(&edges, d) else { continue };
        n_pairs[b] += 1;
        for rep in 0..sample.replicates() {
            let x = (sample.value(rep, i) - sample.value(rep, j)).abs().powf(power);
            sum[b] += x;
            sum_sq[b] += x * x;
            n_samples[b] += 1;
        }
    }
    // Empty bins are omitted.
    let mut out = Vec::new();
    for b in 0..n_bins {
        if n_samples[b] == 0 {
            continue;
        }
        let n = n_samples[b] as f64;
        let mean = sum[b] / n;
        let stderr = if n_samples[b] >= 2 {
            let var = ((sum_sq[b] - n * mean * mean) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        } else {
            f64::INFINITY
        };
        out.push(BinStat {
            h_lo: edges[b],
            h_hi: edges[b + 1],
            h_mid: geometric_mid(edges[b], edges[b + 1]),
            pairs: n_pairs[b],
            estimate: mean,
            stderr,
        });
    }
    Ok(out)
}

/// Empirical variogram: per distance bin, the mean over pairs and
/// replicates of the squared increment.
pub fn variogram_empirical(
    sample: &FieldSample,
    manifold: &Manifold,
    bins: usize,
) -> Result<Vec<BinStat>, FieldError> {
    binned_moment(sample, manifold, bins, 2.0)
}

/// Empirical l-th absolute increment moment per distance bin.
pub fn moment_estimate(
    sample: &FieldSample,
    manifold: &Manifold,
    l: f64,
    bins: usize,
) -> Result<Vec<BinStat>, FieldError> {
    if l < 1.0 {
        return Err(FieldError::Mismatch(format!("moment order l = {l} must be >= 1")));
    }
    binned_moment(sample, manifold, bins, l)
}

/// Parameters of the sufficient moment conditions.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MomentCondition {
    pub l: f64,
    pub kappa: f64,
    pub nu: f64,
    pub scale: f64,
    pub gamma: f64,
    pub alpha: f64,
}

impl MomentCondition {
    pub fn new(
        l: f64,
        kappa: f64,
        nu: f64,
        scale: f64,
        gamma: f64,
        alpha: f64,
    ) -> Result<Self, FieldError> {
        if !(l >= 1.0) {
            return Err(FieldError::InvalidModel(format!("l = {l} must be >= 1")));
        }
        if !(nu > l + 1.0) {
            return Err(FieldError::InvalidModel(format!("nu = {nu} must exceed l + 1 = {}", l + 1.0)));
        }
        if !(scale > 0.0) {
            return Err(FieldError::InvalidModel(format!("K = {scale} must be > 0")));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(FieldError::InvalidModel(format!("gamma = {gamma} outside (0, 1)")));
        }
        if !(alpha > 1.0) {
            return Err(FieldError::InvalidModel(format!("alpha = {alpha} must exceed 1")));
        }
        Ok(MomentCondition { l, kappa, nu, scale, gamma, alpha })
    }

    /// Bound for the uniform-continuity condition:
    /// `K log2(1/d)^{-nu} d^kappa`.
    pub fn bound_uniform(&self, d: f64) -> f64 {
        self.scale * (-d.log2()).powf(-self.nu) * d.powf(self.kappa)
    }

    /// Bound for the Hölder condition: `K log2(1/d)^{-alpha} d^{m + l gamma}`.
    pub fn bound_holder(&self, d: f64, dim: usize) -> f64 {
        self.scale * (-d.log2()).powf(-self.alpha) * d.powf(dim as f64 + self.l * self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentBoundVariant {
    /// Uniform continuity: requires `kappa >= m`.
    Uniform,
    /// Hölder of order gamma.
    Holder,
}

/// Check an estimated moment table against the selected bound at the bin
/// midpoints. Returns one flag per table row.
pub fn moment_bound_check(
    table: &[BinStat],
    condition: &MomentCondition,
    variant: MomentBoundVariant,
    dim: usize,
) -> Result<Vec<bool>, FieldError> {
    if variant == MomentBoundVariant::Uniform && condition.kappa < dim as f64 {
        return Err(FieldError::InvalidModel(format!(
            "kappa = {} must be at least the dimension {dim}",
            condition.kappa
        )));
    }
    Ok(table
        .iter()
        .map(|row| {
            let bound = match variant {
                MomentBoundVariant::Uniform => condition.bound_uniform(row.h_mid),
                MomentBoundVariant::Holder => condition.bound_holder(row.h_mid, dim),
            };
            row.estimate <= bound
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{sample_gaussian, CovarianceFamily, CovarianceModel};
    use crate::manifold::{Manifold, ManifoldPoint};
    use crate::stats::linear_fit;
    use approx::assert_relative_eq;

    fn sphere_points(n: usize) -> (Manifold, Vec<ManifoldPoint>) {
        let m = Manifold::sphere(2).unwrap();
        let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
        let pts = (0..n)
            .map(|j| {
                let z = 1.0 - (2.0 * j as f64 + 1.0) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let t = golden * j as f64;
                m.point(&[r * t.cos(), r * t.sin(), z]).unwrap()
            })
            .collect();
        (m, pts)
    }

    #[test]
    fn variogram_slope_recovers_eta_one() {
        let (m, pts) = sphere_points(30);
        let model = CovarianceModel::pinned(1.0, 1.0).unwrap();
        let s = sample_gaussian(&model, &pts, &m, 10_000, 31).unwrap();
        let table = variogram_empirical(&s, &m, 12).unwrap();
        let xs: Vec<f64> = table.iter().map(|b| b.h_mid.ln()).collect();
        let ys: Vec<f64> = table.iter().map(|b| b.estimate.ln()).collect();
        let fit = linear_fit(&xs, &ys);
        assert!(
            (fit.slope - 1.0).abs() <= 0.05,
            "log-log variogram slope {} not within 0.05 of 1",
            fit.slope
        );
    }

    #[test]
    fn nugget_dominated_variogram_is_flat() {
        let (m, pts) = sphere_points(16);
        // C must stay positive; make it negligible next to the nugget.
        let model = CovarianceModel::new(
            CovarianceFamily::PoweredExponentialVariogram,
            1e-12,
            1.0,
            1.0,
        )
        .unwrap();
        let s = sample_gaussian(&model, &pts, &m, 4000, 5).unwrap();
        let table = variogram_empirical(&s, &m, 6).unwrap();
        for row in &table {
            assert_relative_eq!(row.estimate, 1.0, max_relative = 0.1);
        }
    }

    #[test]
    fn single_replicate_still_defined() {
        let (m, pts) = sphere_points(10);
        let model = CovarianceModel::pinned(1.0, 1.0).unwrap();
        let s = sample_gaussian(&model, &pts, &m, 1, 2).unwrap();
        let table = variogram_empirical(&s, &m, 4).unwrap();
        assert!(!table.is_empty());
        for row in &table {
            assert!(row.estimate >= 0.0);
            assert!(row.stderr.is_finite() || row.pairs == 1);
        }
    }

    #[test]
    fn second_moment_equals_variogram() {
        let (m, pts) = sphere_points(12);
        let model = CovarianceModel::pinned(1.0, 0.8).unwrap();
        let s = sample_gaussian(&model, &pts, &m, 200, 6).unwrap();
        let a = variogram_empirical(&s, &m, 8).unwrap();
        let b = moment_estimate(&s, &m, 2.0, 8).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x.estimate, y.estimate, max_relative = 1e-12);
        }
    }

    #[test]
    fn gaussian_kurtosis_ratio_is_three() {
        let (m, pts) = sphere_points(10);
        let model = CovarianceModel::pinned(1.0, 1.0).unwrap();
        let reps = 20_000;
        let s = sample_gaussian(&model, &pts, &m, reps, 8).unwrap();
        let m2 = moment_estimate(&s, &m, 2.0, 5).unwrap();
        let m4 = moment_estimate(&s, &m, 4.0, 5).unwrap();
        for (a, b) in m2.iter().zip(&m4) {
            let ratio = b.estimate / (a.estimate * a.estimate);
            // Kurtosis of a Gaussian is 3; allow generous Monte-Carlo slack
            // (samples within a bin are correlated across pairs).
            assert!(
                (ratio - 3.0).abs() < 0.25,
                "kurtosis ratio {ratio} too far from 3 at h = {}",
                a.h_mid
            );
        }
    }

    /// Analytic Gaussian moments against the Hölder-variant bound: with
    /// sigma^2 = C d^eta the separation gamma < eta/2 - m/l is real for
    /// large l. Here l = 16, m = 1, eta = 1: threshold 0.4375.
    #[test]
    fn holder_bound_separates_gamma_for_large_l() {
        let l = 16.0;
        let eta = 1.0;
        let dim = 1usize;
        // E|Z|^l = sigma^l 2^{l/2} Gamma((l+1)/2) / sqrt(pi); for l = 16
        // the constant is 2027025 (15!! for even l).
        let c_l = 2027025.0;
        let moment = |d: f64| c_l * d.powf(l * eta / 2.0);
        let h_grid: Vec<f64> = (2..=10).map(|j| 2.0_f64.powi(-j)).collect();
        let passing = MomentCondition::new(l, 1.0, l + 2.0, c_l, 0.3, 2.0).unwrap();
        let failing = MomentCondition::new(l, 1.0, l + 2.0, c_l, 0.6, 2.0).unwrap();
        let mut fail_seen = false;
        for &h in &h_grid {
            assert!(
                moment(h) <= passing.bound_holder(h, dim),
                "gamma = 0.3 bound should hold at h = {h}"
            );
            if moment(h) > failing.bound_holder(h, dim) {
                fail_seen = true;
            }
        }
        assert!(fail_seen, "gamma = 0.6 > eta/2 must fail at small h");
    }

    #[test]
    fn moment_bound_check_on_estimates() {
        let (m, pts) = sphere_points(12);
        let model = CovarianceModel::pinned(1.0, 1.0).unwrap();
        let s = sample_gaussian(&model, &pts, &m, 2000, 13).unwrap();
        let table = moment_estimate(&s, &m, 2.0, 6).unwrap();
        // A deliberately generous uniform bound: kappa = m, huge K.
        let cond = MomentCondition::new(2.0, 2.0, 4.0, 1e6, 0.3, 2.0).unwrap();
        let flags = moment_bound_check(&table, &cond, MomentBoundVariant::Uniform, 2).unwrap();
        assert!(flags.iter().all(|&f| f));
        // kappa below the dimension is rejected.
        let bad = MomentCondition::new(2.0, 1.0, 4.0, 1e6, 0.3, 2.0).unwrap();
        assert!(moment_bound_check(&table, &bad, MomentBoundVariant::Uniform, 2).is_err());
    }
}
