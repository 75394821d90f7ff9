//! Small statistical helpers shared across the crate: binomial confidence
//! intervals, least-squares fits, logarithmic distance binning, and
//! extreme-value constants for maxima of Gaussian samples.

use statrs::distribution::{ContinuousCDF, Normal};

/// Wilson score interval for a binomial proportion.
#[derive(Debug, Clone, Copy)]
pub struct WilsonInterval {
    pub lower: f64,
    pub upper: f64,
    pub point: f64,
}

/// Wilson score interval at the given two-sided confidence level.
///
/// Never produces bounds outside [0, 1]; well-behaved for zero successes.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> WilsonInterval {
    assert!(trials > 0, "wilson_interval: trials must be > 0");
    assert!(
        confidence > 0.0 && confidence < 1.0,
        "wilson_interval: confidence must be in (0, 1)"
    );
    let n = trials as f64;
    let p_hat = successes as f64 / n;
    let z = standard_normal_quantile((1.0 + confidence) / 2.0);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p_hat + z2 / (2.0 * n)) / denom;
    let half = z * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    WilsonInterval {
        lower: (centre - half).max(0.0),
        upper: (centre + half).min(1.0),
        point: p_hat,
    }
}

/// Quantile of the standard normal distribution.
pub fn standard_normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

/// Upper tail probability of the standard normal, `P(Z > z)`.
pub fn standard_normal_sf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2)
}

/// Median of `max_{i<=n} |Z_i|` for `n` independent standard normals.
///
/// Solving `(2 Phi(a) - 1)^n = 1/2` gives `a = Phi^{-1}((1 + 2^{-1/n}) / 2)`,
/// an exact distributional identity (no asymptotics).
pub fn median_abs_max_normal(n: u64) -> f64 {
    assert!(n > 0, "median_abs_max_normal: n must be > 0");
    let p = (1.0 + (-std::f64::consts::LN_2 / n as f64).exp()) / 2.0;
    standard_normal_quantile(p)
}

/// Ordinary least squares fit of `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the residuals.
    pub slope_stderr: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len(), "linear_fit: length mismatch");
    let n = xs.len() as f64;
    assert!(xs.len() >= 2, "linear_fit: need at least two points");
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y) * (y - mean_y)).sum();
    let dof = (xs.len().max(3) - 2) as f64;
    LinearFit {
        slope,
        intercept,
        slope_stderr: (ss_res / dof / sxx).sqrt(),
        r_squared: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 },
    }
}

/// Edges of `n_bins` log-uniform bins spanning `[lo, hi]`.
///
/// The last edge is forced to `hi` exactly so the maximum lands in the final
/// bin.
pub fn log_bin_edges(lo: f64, hi: f64, n_bins: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo, "log_bin_edges: need 0 < lo < hi");
    assert!(n_bins >= 1);
    let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
    let mut edges: Vec<f64> = (0..=n_bins)
        .map(|i| (ln_lo + (ln_hi - ln_lo) * i as f64 / n_bins as f64).exp())
        .collect();
    edges[0] = lo;
    edges[n_bins] = hi;
    edges
}

/// Bin index for `v` given bin edges; the upper edge is inclusive.
pub fn bin_index(edges: &[f64], v: f64) -> Option<usize> {
    let n_bins = edges.len() - 1;
    if v < edges[0] || v > edges[n_bins] {
        return None;
    }
    if v == edges[n_bins] {
        return Some(n_bins - 1);
    }
    // Binary search on edges.
    let mut lo = 0;
    let mut hi = n_bins;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if v < edges[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(lo)
}

/// Geometric midpoint of a bin, the natural centre on log axes.
pub fn geometric_mid(lo: f64, hi: f64) -> f64 {
    (lo * hi).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wilson_matches_known_value() {
        // 8/10 at 95%: textbook Wilson bounds (0.4902, 0.9433).
        let ci = wilson_interval(8, 10, 0.95);
        assert_relative_eq!(ci.lower, 0.4901625, max_relative = 1e-4);
        assert_relative_eq!(ci.upper, 0.9433178, max_relative = 1e-4);
    }

    #[test]
    fn wilson_zero_successes() {
        let ci = wilson_interval(0, 1000, 0.95);
        assert_eq!(ci.lower, 0.0);
        assert!(ci.upper > 0.0 && ci.upper < 0.01);
    }

    #[test]
    fn normal_quantile_symmetry() {
        assert_relative_eq!(standard_normal_quantile(0.975), 1.959964, max_relative = 1e-5);
        assert_relative_eq!(
            standard_normal_quantile(0.025),
            -standard_normal_quantile(0.975),
            max_relative = 1e-12
        );
    }

    #[test]
    fn abs_max_median_single() {
        // n = 1: median of |Z| is the 0.75 quantile of Z.
        assert_relative_eq!(
            median_abs_max_normal(1),
            standard_normal_quantile(0.75),
            max_relative = 1e-12
        );
    }

    #[test]
    fn abs_max_median_increases() {
        let mut prev = 0.0;
        for n in [1u64, 2, 8, 64, 512, 4096] {
            let a = median_abs_max_normal(n);
            assert!(a > prev);
            prev = a;
        }
    }

    #[test]
    fn linear_fit_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let fit = linear_fit(&xs, &ys);
        assert_relative_eq!(fit.slope, 2.0, max_relative = 1e-12);
        assert_relative_eq!(fit.intercept, 1.0, max_relative = 1e-12);
        assert!(fit.slope_stderr < 1e-10);
        assert_relative_eq!(fit.r_squared, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn bins_cover_range() {
        let edges = log_bin_edges(0.1, 10.0, 12);
        assert_eq!(edges.len(), 13);
        assert_eq!(bin_index(&edges, 0.1), Some(0));
        assert_eq!(bin_index(&edges, 10.0), Some(11));
        assert_eq!(bin_index(&edges, 0.05), None);
        for w in edges.windows(2) {
            assert!(w[1] > w[0]);
        }
    }
}
