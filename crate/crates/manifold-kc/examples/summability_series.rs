//! Partial sums of the chaining series over the dyadic levels of one
//! chart, with their comparison-series convergence certificates.
//!
//! ```bash
//! cargo run -p manifold-kc --example summability_series
//! ```

use manifold_kc::atlas::summability_report;
use manifold_kc::{Chart, Manifold, RateFunctions, RateVariant};

fn main() {
    let sphere = Manifold::sphere(2).unwrap();
    let center = sphere.point(&[0.0, 0.0, 1.0]).unwrap();
    let chart = Chart::build(&sphere, &center, 0).unwrap();
    let rates = RateFunctions::new(RateVariant::Log, 1.0, 2.0, 2.0, 0.5, 1.0, 1.0, 2).unwrap();

    let report = summability_report(&chart, &rates, 30);
    println!(
        "{:>3} {:>12} {:>14} {:>12} {:>12} {:>12}",
        "k", "delta", "pairs", "term_q", "sum_q", "sum_r"
    );
    for t in report.terms.iter().take(15) {
        println!(
            "{:>3} {:>12.6} {:>14.0} {:>12.4e} {:>12.6} {:>12.6}",
            t.k, t.delta, t.pair_count, t.term_q, t.partial_q, t.partial_r
        );
    }
    println!("...");
    let last = report.terms.last().unwrap();
    println!(
        "k = {}: sum_q = {:.6}, sum_r = {:.6}",
        last.k, report.sum_q, report.sum_r
    );
    println!(
        "\nq-series dominated by {:.3} * k^(-{}) for k >= 3: {}",
        report.comparison_constant_q, report.comparison_exponent_q, report.dominated_q
    );
    println!("r-series certificate: {:?} (holds: {})", report.comparison, report.dominated_r);
    println!("converged: {}", report.converged);
    println!(
        "successive q-term ratios < 1 from k = {:?}; r-term ratios from k = {:?}",
        report.ratio_below_one_from_q, report.ratio_below_one_from_r
    );
}
