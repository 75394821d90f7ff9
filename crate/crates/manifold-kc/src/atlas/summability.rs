//! Partial sums and convergence certificates for the chaining series
//! `sum_k |pi_{n,k}| q(delta_{n,k})` and `sum_k r(delta_{n,k})`.
//!
//! The pair count has the exact closed form
//! `|pi_{n,k}| = ((3N - 2)^m - N^m) / 2` with `N = 2^{k+1} - 1`
//! (sum over the nonzero offsets in {-1,0,1}^m of the per-axis slack),
//! so partial sums run to arbitrary levels without building grids. Both
//! series are certified by term-by-term comparison against a p-series with
//! an analytically derived constant, alongside the raw successive-term
//! ratios.

use serde::Serialize;

use super::Chart;
use crate::verify::{RateFunctions, RateVariant};

/// Exact near-pair count of the level-k dyadic lattice in dimension m,
/// `((3N-2)^m - N^m)/2`, `N = 2^{k+1}-1`; `None` if it overflows u128.
pub fn pair_count_closed_form(k: u32, m: usize) -> Option<u128> {
    let n = (1u128 << (k + 1)) - 1;
    let big = (3 * n - 2).checked_pow(m as u32)?;
    let small = n.checked_pow(m as u32)?;
    Some((big - small) / 2)
}

fn pair_count_f64(k: u32, m: usize) -> f64 {
    match pair_count_closed_form(k, m) {
        Some(c) => c as f64,
        None => {
            let n = 2.0_f64.powi(k as i32 + 1) - 1.0;
            (((3.0 * n - 2.0).powi(m as i32)) - n.powi(m as i32)) / 2.0
        }
    }
}

/// Universal combinatorial constant with `|pi_{n,k}| <= K_m 2^{mk}` for
/// every level: `K_m = 2^{m-1} (3^m - 1)`.
pub fn pair_bound_universal(m: usize) -> f64 {
    2.0_f64.powi(m as i32 - 1) * (3.0_f64.powi(m as i32) - 1.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct SummabilityTerm {
    pub k: u32,
    pub delta: f64,
    pub pair_count: f64,
    pub term_q: f64,
    pub term_r: f64,
    pub partial_q: f64,
    pub partial_r: f64,
    /// `term(k+1) / term(k)`, `None` on the last computed level.
    pub ratio_q: Option<f64>,
    pub ratio_r: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummabilityReport {
    pub chart_index: usize,
    pub k_max: u32,
    pub rho: f64,
    /// Levels skipped because `delta_{n,k} >= rho` puts the rates outside
    /// their domain.
    pub skipped_levels: Vec<u32>,
    pub terms: Vec<SummabilityTerm>,
    pub sum_q: f64,
    pub sum_r: f64,
    /// First computed level from which every successive ratio stays
    /// strictly below 1.
    pub ratio_below_one_from_q: Option<u32>,
    pub ratio_below_one_from_r: Option<u32>,
    /// Comparison-series certificate: `term <= c * k^{-p}` for k >= 3 with
    /// the analytic constant; geometric for the power-law rate.
    pub comparison_exponent_q: f64,
    pub comparison_constant_q: f64,
    pub dominated_q: bool,
    pub comparison: RComparison,
    pub dominated_r: bool,
    /// Both series certified convergent.
    pub converged: bool,
}

/// How the r-series is certified.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RComparison {
    /// `r(delta_k) <= constant * k^{-beta}` for k >= 3 (log-rate).
    PSeries { exponent: f64, constant: f64 },
    /// `r(delta_k) = (2^{1-k} R)^gamma`: fixed ratio `2^{-gamma} < 1`.
    Geometric { ratio: f64 },
}

/// Evaluate partial sums and certificates up to level `k_max`.
pub fn summability_report(
    chart: &Chart,
    rates: &RateFunctions,
    k_max: u32,
) -> SummabilityReport {
    let m = chart.dim();
    let radius = chart.radius();
    let rho = rates.rho();
    let mut terms: Vec<SummabilityTerm> = Vec::new();
    let mut skipped = Vec::new();
    let (mut sum_q, mut sum_r) = (0.0, 0.0);
    for k in 1..=k_max {
        let delta = radius * 2.0_f64.powi(1 - k as i32);
        if delta >= rho {
            skipped.push(k);
            continue;
        }
        let (r, q) = rates.eval(delta).expect("delta < rho by construction");
        let count = pair_count_f64(k, m);
        let term_q = count * q;
        let term_r = r;
        sum_q += term_q;
        sum_r += term_r;
        terms.push(SummabilityTerm {
            k,
            delta,
            pair_count: count,
            term_q,
            term_r,
            partial_q: sum_q,
            partial_r: sum_r,
            ratio_q: None,
            ratio_r: None,
        });
    }
    for i in 0..terms.len().saturating_sub(1) {
        let (a, b) = (terms[i].term_q, terms[i + 1].term_q);
        terms[i].ratio_q = (a > 0.0).then(|| b / a);
        let (a, b) = (terms[i].term_r, terms[i + 1].term_r);
        terms[i].ratio_r = (a > 0.0).then(|| b / a);
    }

    let ratio_from = |pick: fn(&SummabilityTerm) -> Option<f64>| -> Option<u32> {
        let mut from = None;
        for t in &terms {
            match pick(t) {
                Some(r) if r < 1.0 => {
                    if from.is_none() {
                        from = Some(t.k);
                    }
                }
                Some(_) => from = None,
                None => {}
            }
        }
        from
    };

    // Analytic domination constants. R_n <= 1/2 gives
    // k - 1 - log2(R_n) >= k, so the log factors are bounded by k^{-alpha}
    // / k^{-beta} directly and the q-terms by the universal pair bound.
    let comparison_constant_q =
        rates.bound_scale() * pair_bound_universal(m) * (2.0 * radius).powi(m as i32);
    let comparison_exponent_q = rates.alpha();
    let dominated_q = terms
        .iter()
        .filter(|t| t.k >= 3)
        .all(|t| t.term_q <= comparison_constant_q * (t.k as f64).powf(-comparison_exponent_q) * (1.0 + 1e-12));

    let (comparison, dominated_r) = match rates.variant() {
        RateVariant::Log => {
            let c = RComparison::PSeries { exponent: rates.beta(), constant: 1.0 };
            let ok = terms
                .iter()
                .filter(|t| t.k >= 3)
                .all(|t| t.term_r <= (t.k as f64).powf(-rates.beta()) * (1.0 + 1e-12));
            (c, ok)
        }
        RateVariant::Power => {
            let ratio = 2.0_f64.powf(-rates.gamma());
            let ok = terms
                .windows(2)
                .all(|w| w[1].term_r <= w[0].term_r * ratio * (1.0 + 1e-12));
            (RComparison::Geometric { ratio }, ok)
        }
    };

    let converged = dominated_q && dominated_r;
    SummabilityReport {
        chart_index: chart.index(),
        k_max,
        rho,
        skipped_levels: skipped,
        ratio_below_one_from_q: ratio_from(|t| t.ratio_q),
        ratio_below_one_from_r: ratio_from(|t| t.ratio_r),
        terms,
        sum_q,
        sum_r,
        comparison_exponent_q,
        comparison_constant_q,
        dominated_q,
        comparison,
        dominated_r,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Manifold;

    fn chart(dim: usize) -> Chart {
        let m = Manifold::euclidean_box(vec![2.0; dim]).unwrap();
        let c = m.point(&vec![1.0; dim]).unwrap();
        Chart::build(&m, &c, 0).unwrap()
    }

    fn log_rates(dim: usize) -> RateFunctions {
        RateFunctions::new(RateVariant::Log, 1.0, 2.0, 2.0, 0.5, 1.0, 1.0, dim).unwrap()
    }

    #[test]
    fn closed_form_small_values() {
        // m = 1: N - 1 adjacent pairs.
        assert_eq!(pair_count_closed_form(1, 1), Some(2));
        assert_eq!(pair_count_closed_form(2, 1), Some(6));
        // m = 2, k = 1: N = 3 -> (49 - 9)/2 = 20.
        assert_eq!(pair_count_closed_form(1, 2), Some(20));
    }

    #[test]
    fn log_rate_partial_sums_converge() {
        let chart = chart(1);
        let report = summability_report(&chart, &log_rates(1), 30);
        assert!(report.skipped_levels.is_empty());
        assert_eq!(report.terms.len(), 30);
        // Positive terms: partial sums strictly increase.
        for w in report.terms.windows(2) {
            assert!(w[1].partial_q > w[0].partial_q);
            assert!(w[1].partial_r > w[0].partial_r);
        }
        assert!(report.dominated_q, "constant {}", report.comparison_constant_q);
        assert!(report.dominated_r);
        assert!(report.converged);
        // The r-ratios approach 1 from below but never reach it.
        assert_eq!(report.ratio_below_one_from_r, Some(1));
    }

    #[test]
    fn q_terms_scale_like_k_minus_alpha_in_2d() {
        // |pi| ~ 2^{2k} cancels delta^2 = (2^{1-k} R)^2, leaving the
        // k^{-alpha} log factor.
        let chart = chart(2);
        let report = summability_report(&chart, &log_rates(2), 20);
        for t in report.terms.iter().filter(|t| t.k >= 3) {
            let envelope = report.comparison_constant_q * (t.k as f64).powf(-2.0);
            assert!(t.term_q <= envelope * (1.0 + 1e-12));
            // And the envelope is not vacuous: within a factor ~8.
            assert!(t.term_q >= envelope / 8.0, "k={} term={} env={envelope}", t.k, t.term_q);
        }
    }

    #[test]
    fn zero_bound_scale_degenerates_to_zero_sum() {
        let chart = chart(1);
        let rates = RateFunctions::new(RateVariant::Log, 1.0, 2.0, 2.0, 0.5, 0.0, 1.0, 1).unwrap();
        let report = summability_report(&chart, &rates, 10);
        assert_eq!(report.sum_q, 0.0);
        assert!(report.sum_r > 0.0);
    }

    #[test]
    fn levels_outside_rho_are_skipped() {
        let chart = chart(1); // R = 1/2, delta_1 = 1/2
        let rates = RateFunctions::new(RateVariant::Log, 0.3, 2.0, 2.0, 0.5, 1.0, 1.0, 1).unwrap();
        let report = summability_report(&chart, &rates, 10);
        // delta_1 = 0.5 and delta_2 = 0.25 >= 0.3? 0.25 < 0.3, so only k=1 skipped.
        assert_eq!(report.skipped_levels, vec![1]);
        assert_eq!(report.terms[0].k, 2);
    }

    #[test]
    fn power_rate_is_geometric() {
        let chart = chart(1);
        let rates = RateFunctions::new(RateVariant::Power, 1.0, 2.0, 2.0, 0.4, 1.0, 1.0, 1).unwrap();
        let report = summability_report(&chart, &rates, 15);
        assert!(matches!(report.comparison, RComparison::Geometric { .. }));
        assert!(report.dominated_r);
        let ratios: Vec<f64> = report.terms.iter().filter_map(|t| t.ratio_r).collect();
        for r in ratios {
            assert!((r - 2.0_f64.powf(-0.4)).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_matches_enumeration() {
        use crate::atlas::pair_set;
        for dim in [1usize, 2] {
            let chart = chart(dim);
            for k in 1..=4 {
                let g = chart.dyadic_grid(k).unwrap();
                assert_eq!(
                    pair_set(&g).count as u128,
                    pair_count_closed_form(k, dim).unwrap(),
                    "dim {dim} level {k}"
                );
            }
        }
    }
}
