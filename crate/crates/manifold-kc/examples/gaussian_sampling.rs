//! Sample a pinned Gaussian field with variogram d(x,y)^0.8 on sphere
//! points and compare the empirical variogram against the model.
//!
//! ```bash
//! cargo run -p manifold-kc --example gaussian_sampling
//! ```

use manifold_kc::fields::{sample_gaussian, variogram_empirical};
use manifold_kc::stats::linear_fit;
use manifold_kc::{CovarianceModel, Manifold};

fn main() {
    let sphere = Manifold::sphere(2).unwrap();
    let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    let points: Vec<_> = (0..40)
        .map(|j| {
            let z = 1.0 - (2.0 * j as f64 + 1.0) / 40.0;
            let r = (1.0 - z * z).sqrt();
            let t = golden * j as f64;
            sphere.point(&[r * t.cos(), r * t.sin(), z]).unwrap()
        })
        .collect();

    let eta = 0.8;
    let model = CovarianceModel::pinned(1.0, eta).unwrap();
    let sample = sample_gaussian(&model, &points, &sphere, 8000, 2024).unwrap();
    println!("sampled {} replicates on {} points (seed 2024)", sample.replicates(), sample.len());

    let table = variogram_empirical(&sample, &sphere, 10).unwrap();
    println!("\n{:>10} {:>12} {:>12} {:>8}", "h_mid", "empirical", "model", "pairs");
    for row in &table {
        println!(
            "{:>10.4} {:>12.5} {:>12.5} {:>8}",
            row.h_mid,
            row.estimate,
            model.variogram(row.h_mid),
            row.pairs
        );
    }

    let xs: Vec<f64> = table.iter().map(|b| b.h_mid.ln()).collect();
    let ys: Vec<f64> = table.iter().map(|b| b.estimate.ln()).collect();
    let fit = linear_fit(&xs, &ys);
    println!("\nlog-log slope = {:.4} (model exponent eta = {eta})", fit.slope);
}
