//! The increment tail hypothesis two ways: the analytic erfc-vs-q
//! predicate on a dyadic h-grid, and the empirical exceedance check with
//! Wilson intervals on a sampled field.
//!
//! ```bash
//! cargo run -p manifold-kc --example tail_bounds
//! ```

use manifold_kc::fields::sample_gaussian;
use manifold_kc::verify::{gaussian_tail_predicate, tail_check};
use manifold_kc::{CovarianceModel, Manifold, RateFunctions, RateVariant};

fn main() {
    let model = CovarianceModel::pinned(1.0, 1.0).unwrap();
    // r(h) = h^0.3 with gamma = 0.3 < eta/2; q(h) = K log2(1/h)^{-2} h^2.
    let rates =
        RateFunctions::new(RateVariant::Power, 1.0, 2.0, 2.0, 0.3, 65536.0, 1.0, 2).unwrap();

    let h_grid: Vec<f64> = (1..=20).map(|j| 2.0_f64.powi(-j)).collect();
    let predicate = gaussian_tail_predicate(&model, &rates, &h_grid).unwrap();
    println!("{:>12} {:>12} {:>12} {:>8}", "h", "tail", "bound q", "margin");
    for p in predicate.iter().step_by(2) {
        println!("{:>12.3e} {:>12.3e} {:>12.3e} {:>8.2}", p.h, p.tail, p.bound, p.margin);
    }
    println!("analytic predicate holds everywhere: {}", predicate.iter().all(|p| p.pass));

    // Empirical side on 30 sphere points.
    let sphere = Manifold::sphere(2).unwrap();
    let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    let points: Vec<_> = (0..30)
        .map(|j| {
            let z = 1.0 - (2.0 * j as f64 + 1.0) / 30.0;
            let r = (1.0 - z * z).sqrt();
            let t = golden * j as f64;
            sphere.point(&[r * t.cos(), r * t.sin(), z]).unwrap()
        })
        .collect();
    let sample = sample_gaussian(&model, &points, &sphere, 10_000, 6).unwrap();
    let report = tail_check(&sample, &sphere, &rates, 8).unwrap();
    println!(
        "\nempirical check: {} pairs under rho, {} replicates",
        report.pairs_used, report.replicates
    );
    println!("{:>8} {:>8} {:>10} {:>10} {:>12} {:>6}", "h_lo", "h_hi", "freq", "ci_hi", "bound", "pass");
    for b in &report.bins {
        println!(
            "{:>8.3} {:>8.3} {:>10.2e} {:>10.2e} {:>12.3e} {:>6}",
            b.h_lo, b.h_hi, b.freq, b.ci_hi, b.bound, b.pass
        );
    }
    println!("all bins pass: {}", report.pass);
}
