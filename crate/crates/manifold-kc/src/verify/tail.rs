//! Verification of the increment tail hypothesis
//! `P(|phi(x) - phi(y)| > r(d(x, y))) <= q(d(x, y))`,
//! empirically from replicated samples and analytically for Gaussian
//! models through the erfc tail.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::{RateFunctions, VerifyError};
use crate::fields::{CovarianceModel, FieldSample};
use crate::manifold::Manifold;
use crate::stats::{bin_index, log_bin_edges, standard_normal_sf, wilson_interval};

/// One distance bin of a tail report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailBin {
    pub h_lo: f64,
    pub h_hi: f64,
    pub pairs: usize,
    pub trials: u64,
    pub exceedances: u64,
    pub freq: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// `q` evaluated at the bin's maximal observed distance (conservative:
    /// `q` is increasing, so a pass is sound despite binning).
    pub bound: f64,
    /// One-sided normal-approximation p-value of seeing at least this many
    /// exceedances if the true rate were exactly the bound.
    pub p_value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailReport {
    pub bins: Vec<TailBin>,
    pub pairs_used: usize,
    pub replicates: usize,
    pub pass: bool,
}

/// Empirical check of the tail hypothesis on all sample pairs with
/// `0 < d(x, y) < rho`, binned by distance.
///
/// Exceedance uses the strict inequality `|increment| > r(d)`; ties count
/// as non-exceedance. Each bin passes when the Wilson 95% upper confidence
/// bound on the exceedance frequency stays at or below `q` at the bin's
/// maximal distance.
pub fn tail_check(
    sample: &FieldSample,
    manifold: &Manifold,
    rates: &RateFunctions,
    bins: usize,
) -> Result<TailReport, VerifyError> {
    if sample.replicates() == 0 {
        return Err(VerifyError::Mismatch("no replicates to test".into()));
    }
    let pts = sample.points();
    let mut pairs = Vec::new();
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let d = manifold.distance(&pts[i], &pts[j])?;
            if d > 0.0 && d < rates.rho() {
                pairs.push((i, j, d));
            }
        }
    }
    if pairs.is_empty() {
        return Err(VerifyError::EmptyReport);
    }
    let lo = pairs.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    let hi = pairs.iter().map(|p| p.2).fold(0.0_f64, f64::max);
    let edges =
        if lo == hi { vec![lo * 0.999999, hi * 1.000001] } else { log_bin_edges(lo, hi, bins) };
    let n_bins = edges.len() - 1;
    let mut exceed = vec![0u64; n_bins];
    let mut trials = vec![0u64; n_bins];
    let mut pair_count = vec![0usize; n_bins];
    let mut max_d = vec![0.0f64; n_bins];
    for &(i, j, d) in &pairs {
        let Some(b) = bin_index(&edges, d) else { continue };
        let threshold = rates.r(d)?;
        pair_count[b] += 1;
        max_d[b] = max_d[b].max(d);
        for rep in 0..sample.replicates() {
            let inc = (sample.value(rep, i) - sample.value(rep, j)).abs();
            if inc > threshold {
                exceed[b] += 1;
            }
            trials[b] += 1;
        }
    }
    let mut out = Vec::new();
    let mut pass = true;
    for b in 0..n_bins {
        if trials[b] == 0 {
            continue;
        }
        let ci = wilson_interval(exceed[b], trials[b], 0.95);
        let bound = rates.q(max_d[b])?;
        let bin_pass = ci.upper <= bound;
        pass &= bin_pass;
        let n = trials[b] as f64;
        let p_value = if bound >= 1.0 {
            1.0
        } else {
            let z = (exceed[b] as f64 - n * bound) / (n * bound * (1.0 - bound)).sqrt();
            standard_normal_sf(z)
        };
        out.push(TailBin {
            h_lo: edges[b],
            h_hi: edges[b + 1],
            pairs: pair_count[b],
            trials: trials[b],
            exceedances: exceed[b],
            freq: ci.point,
            ci_lo: ci.lower,
            ci_hi: ci.upper,
            bound,
            p_value,
            pass: bin_pass,
        });
    }
    Ok(TailReport { bins: out, pairs_used: pairs.len(), replicates: sample.replicates(), pass })
}

/// One grid point of the analytic Gaussian tail predicate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailPredicatePoint {
    pub h: f64,
    /// `P(|Z| > r(h))` for `Z ~ N(0, sigma(h)^2)`: `erfc(r / (sigma sqrt 2))`.
    pub tail: f64,
    pub bound: f64,
    /// `ln(bound) - ln(tail)`; positive means the hypothesis holds with
    /// that logarithmic margin.
    pub margin: f64,
    pub pass: bool,
}

/// Analytic bridge from a Gaussian variogram to the tail hypothesis:
/// evaluates `erfc(r(h) / (sigma(h) sqrt 2)) <= q(h)` pointwise on `h_grid`
/// with `sigma(h)^2` the model variogram.
pub fn gaussian_tail_predicate(
    model: &CovarianceModel,
    rates: &RateFunctions,
    h_grid: &[f64],
) -> Result<Vec<TailPredicatePoint>, VerifyError> {
    let mut out = Vec::with_capacity(h_grid.len());
    for &h in h_grid {
        if !(h > 0.0) || h >= rates.rho() {
            return Err(VerifyError::RateDomain { h, rho: rates.rho() });
        }
        let (r, q) = rates.eval(h)?;
        let sigma = model.variogram(h).sqrt();
        let tail = if sigma == 0.0 {
            0.0
        } else {
            erfc(r / (sigma * std::f64::consts::SQRT_2))
        };
        let margin = q.ln() - tail.ln();
        out.push(TailPredicatePoint { h, tail, bound: q, margin, pass: tail <= q });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{sample_gaussian, CovarianceModel};
    use crate::verify::RateVariant;
    use crate::{Chart, Manifold};

    fn sphere_points(n: usize) -> (Manifold, Vec<crate::ManifoldPoint>) {
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
    fn huge_threshold_means_no_exceedances() {
        let (m, pts) = sphere_points(12);
        let model = CovarianceModel::pinned(1.0, 1.0).unwrap();
        let s = sample_gaussian(&model, &pts, &m, 500, 3).unwrap();
        // Power rate with a tiny gamma makes r(h) close to 1 at desk
        // distances while sigma ~ sqrt(h): exceedances essentially never
        // happen; pair that with a vacuous bound.
        let rates =
            RateFunctions::new(RateVariant::Power, 1.0, 2.0, 2.0, 0.01, 1e6, 1.0, 2).unwrap();
        let report = tail_check(&s, &m, &rates, 6).unwrap();
        assert!(report.pass);
        for bin in &report.bins {
            assert!(bin.bound >= 1.0 || bin.freq < 0.5);
        }
    }

    #[test]
    fn pinned_gaussian_passes_with_generous_constant() {
        let (m, pts) = sphere_points(30);
        let model = CovarianceModel::pinned(1.0, 1.0).unwrap();
        let s = sample_gaussian(&model, &pts, &m, 4000, 7).unwrap();
        let rates =
            RateFunctions::new(RateVariant::Power, 1.0, 2.0, 2.0, 0.3, 65536.0, 1.0, 2).unwrap();
        let report = tail_check(&s, &m, &rates, 8).unwrap();
        assert!(report.pass, "failing bins: {:?}", report.bins.iter().filter(|b| !b.pass).count());
    }

    #[test]
    fn rough_model_fails_smooth_rates_in_small_bins() {
        // sigma^2 = d^{0.2} against rates expecting eta = 1 smoothness:
        // the analytic predicate identifies failing h before simulation.
        let model = CovarianceModel::pinned(1.0, 0.2).unwrap();
        let rates =
            RateFunctions::new(RateVariant::Power, 1.0, 2.0, 2.0, 0.3, 1.0, 1.0, 1).unwrap();
        let h_grid: Vec<f64> = (1..=20).map(|j| 2.0_f64.powi(-j)).collect();
        let analytic = gaussian_tail_predicate(&model, &rates, &h_grid).unwrap();
        let failing: Vec<f64> =
            analytic.iter().filter(|p| !p.pass).map(|p| p.h).collect();
        assert!(!failing.is_empty());
        // Small h fail: gamma = 0.3 > eta/2 = 0.1.
        assert!(failing.contains(&2.0_f64.powi(-20)));

        // Monte-Carlo confirmation on a circle grid with small spacings.
        let m = Manifold::sphere(1).unwrap();
        let c = m.point(&[1.0, 0.0]).unwrap();
        let chart = Chart::build(&m, &c, 0).unwrap();
        let grid = chart.dyadic_grid(7).unwrap();
        let s = sample_gaussian(&model, grid.points(), &m, 400, 5).unwrap();
        let report = tail_check(&s, &m, &rates, 10).unwrap();
        assert!(!report.pass);
        let small_fail = report.bins.iter().filter(|b| !b.pass).any(|b| b.h_hi < 0.1);
        assert!(small_fail, "expected small-h bins to fail");
    }

    #[test]
    fn exponent_cancellation_at_gamma_eta_over_two() {
        // gamma = eta/2: r/sigma = 1/sqrt(C) is constant, the tail never
        // decays, and q -> 0 beats it for small h.
        let model = CovarianceModel::pinned(1.0, 0.8).unwrap();
        let rates =
            RateFunctions::new(RateVariant::Power, 1.0, 2.0, 2.0, 0.4, 1.0, 1.0, 2).unwrap();
        let h_grid: Vec<f64> = (1..=20).map(|j| 2.0_f64.powi(-j)).collect();
        let points = gaussian_tail_predicate(&model, &rates, &h_grid).unwrap();
        let tails: Vec<f64> = points.iter().map(|p| p.tail).collect();
        for w in tails.windows(2) {
            assert!((w[0] - w[1]).abs() < 1e-12, "tail should be constant in h");
        }
        assert!(!points.last().unwrap().pass);
    }

    #[test]
    fn subcritical_gamma_passes_for_all_small_h() {
        // gamma = 0.3 < eta/2 = 0.5: r/sigma = h^{-0.2} grows and erfc
        // collapses super-polynomially; with K = 1 the predicate holds from
        // some h0 on, with increasing margins.
        let model = CovarianceModel::pinned(1.0, 1.0).unwrap();
        let rates =
            RateFunctions::new(RateVariant::Power, 1.0, 2.0, 2.0, 0.3, 1.0, 1.0, 2).unwrap();
        let h_grid: Vec<f64> = (1..=20).map(|j| 2.0_f64.powi(-j)).collect();
        let points = gaussian_tail_predicate(&model, &rates, &h_grid).unwrap();
        let first_pass = points.iter().position(|p| p.pass).expect("must pass eventually");
        assert!(points[first_pass..].iter().all(|p| p.pass));
        for w in points[first_pass..].windows(2) {
            assert!(w[1].margin >= w[0].margin);
        }
        assert!(points.last().unwrap().pass);
    }

    #[test]
    fn boundary_h_values_stay_finite() {
        let model = CovarianceModel::pinned(1.0, 1.0).unwrap();
        let rates =
            RateFunctions::new(RateVariant::Power, 1.0, 2.0, 2.0, 0.3, 1.0, 1.0, 2).unwrap();
        let points = gaussian_tail_predicate(&model, &rates, &[0.999_999]).unwrap();
        assert!(points[0].tail.is_finite());
        assert!(points[0].bound.is_finite());
        assert!(gaussian_tail_predicate(&model, &rates, &[1.0]).is_err());
    }

    #[test]
    fn no_pairs_under_rho_is_empty_report_error() {
        let (m, pts) = sphere_points(8);
        let model = CovarianceModel::pinned(1.0, 1.0).unwrap();
        let s = sample_gaussian(&model, &pts, &m, 10, 1).unwrap();
        // rho so small that every pair distance exceeds it.
        let rates =
            RateFunctions::new(RateVariant::Power, 1e-3, 2.0, 2.0, 0.3, 1.0, 1.0, 2).unwrap();
        assert!(matches!(tail_check(&s, &m, &rates, 4), Err(VerifyError::EmptyReport)));
    }
}
