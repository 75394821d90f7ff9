//! Reconstruct a field value at an off-grid point by chaining through the
//! nearest grid points of successive dyadic levels, watching the
//! differences shrink against the rate r(delta).
//!
//! ```bash
//! cargo run -p manifold-kc --example chaining_limit
//! ```

use manifold_kc::fields::{conditional_refine, refinement_point_order, sample_gaussian, FieldSample};
use manifold_kc::verify::chaining_reconstruct;
use manifold_kc::{Chart, CovarianceModel, DyadicGrid, Manifold, RateFunctions, RateVariant};

fn main() {
    let circle = Manifold::sphere(1).unwrap();
    let center = circle.point(&[1.0, 0.0]).unwrap();
    let chart = Chart::build(&circle, &center, 0).unwrap();
    let model = CovarianceModel::pinned(1.0, 1.0).unwrap();
    let rates = RateFunctions::new(RateVariant::Power, 1.0, 2.0, 2.0, 0.4, 1.0, 1.0, 1).unwrap();

    let mut data: Vec<(DyadicGrid, FieldSample)> = Vec::new();
    for k in 2..=8 {
        let grid = chart.dyadic_grid(k).unwrap();
        let sample = if let Some((_, prev)) = data.last() {
            let pts = refinement_point_order(prev.points(), grid.points());
            conditional_refine(prev, &pts, &circle, 500 + k as u64).unwrap()
        } else {
            sample_gaussian(&model, grid.points(), &circle, 400, 5).unwrap()
        };
        data.push((grid, sample));
    }
    let level_refs: Vec<(&DyadicGrid, &FieldSample)> = data.iter().map(|(g, s)| (g, s)).collect();

    let x = chart.point_at(&[0.3377 * chart.half_width()]).unwrap();
    let report = chaining_reconstruct(&chart, &level_refs, &x, &rates).unwrap();
    println!("chaining at chart coordinate {:.6}:", report.target_coords[0]);
    println!(
        "{:>5}->{:<5} {:>12} {:>12} {:>12} {:>10}",
        "k", "k+1", "delta", "r(delta)", "median diff", "exceed %"
    );
    for t in &report.transitions {
        println!(
            "{:>5}->{:<5} {:>12.6} {:>12.6} {:>12.6} {:>10.2}",
            t.from_level,
            t.to_level,
            t.delta_fine,
            t.threshold.unwrap_or(f64::NAN),
            t.median_abs_diff,
            100.0 * t.exceed_fraction.unwrap_or(f64::NAN)
        );
    }
    let first = report.values[0].clone();
    println!("\nreplicate 0 value sequence: {first:?}");
    println!("replicate 0 limit estimate: {:.6}", report.limit[0]);

    // A grid point of the coarsest level never moves.
    let fixed = data[0].0.points()[2].clone();
    let fixed_report = chaining_reconstruct(&chart, &level_refs, &fixed, &rates).unwrap();
    let constant = fixed_report.transitions.iter().all(|t| t.max_abs_diff == 0.0);
    println!("\ncoarse grid point stays constant across levels: {constant}");
}
