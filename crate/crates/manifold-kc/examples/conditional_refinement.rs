//! Refine a coarse-grid sample to a finer grid from the conditional
//! Gaussian law: the coarse values pass through bit-exactly and the joint
//! law matches a direct fine-grid draw.
//!
//! ```bash
//! cargo run -p manifold-kc --example conditional_refinement
//! ```

use manifold_kc::fields::{conditional_refine, refinement_point_order, sample_gaussian};
use manifold_kc::{Chart, CovarianceModel, Manifold};

fn main() {
    let circle = Manifold::sphere(1).unwrap();
    let center = circle.point(&[1.0, 0.0]).unwrap();
    let chart = Chart::build(&circle, &center, 0).unwrap();
    let model = CovarianceModel::pinned(1.0, 1.0).unwrap();

    let coarse_grid = chart.dyadic_grid(2).unwrap();
    let fine_grid = chart.dyadic_grid(3).unwrap();
    let reps = 5000;

    let coarse = sample_gaussian(&model, coarse_grid.points(), &circle, reps, 11).unwrap();
    let fine_points = refinement_point_order(coarse.points(), fine_grid.points());
    let refined = conditional_refine(&coarse, &fine_points, &circle, 12).unwrap();
    println!(
        "refined {} coarse points to {} fine points, {} replicates",
        coarse.len(),
        refined.len(),
        reps
    );

    let bit_exact = (0..reps)
        .all(|rep| (0..coarse.len()).all(|i| refined.value(rep, i) == coarse.value(rep, i)));
    println!("restriction to the coarse points is bit-exact: {bit_exact}");

    // Two-route check: empirical covariance of the refined sample against
    // a direct draw on the same fine point list.
    let direct = sample_gaussian(&model, &fine_points, &circle, reps, 13).unwrap();
    let cov_a = refined.empirical_covariance();
    let cov_b = direct.empirical_covariance();
    let mut worst_z = 0.0_f64;
    for i in 0..fine_points.len() {
        for j in i..fine_points.len() {
            let se = ((cov_b[(i, i)] * cov_b[(j, j)] + cov_b[(i, j)] * cov_b[(i, j)]) * 2.0
                / reps as f64)
                .sqrt();
            if se > 0.0 {
                worst_z = worst_z.max((cov_a[(i, j)] - cov_b[(i, j)]).abs() / se);
            }
        }
    }
    println!("worst covariance-entry deviation between the two routes: {worst_z:.2} standard errors");
}
