//! Build a chart cover of the flat torus, then check the metric sandwich
//! and the empirical coverage certificate.
//!
//! ```bash
//! cargo run -p manifold-kc --example atlas_cover
//! ```

use manifold_kc::atlas::Atlas;
use manifold_kc::Manifold;

fn main() {
    let torus = Manifold::flat_torus(vec![1.0, 1.0]).unwrap();
    let atlas = Atlas::cover_build(&torus, 16, 7).expect("16 lattice charts cover T^2");
    println!("built {} charts on {:?}", atlas.charts().len(), torus);

    let chart = &atlas.charts()[0];
    println!(
        "chart 0: center {:?}, radius {:.5}, alpha {:.5}, hypercube half-width {:.5}",
        chart.center().coords(),
        chart.radius(),
        chart.alpha(),
        chart.half_width()
    );

    let sandwich = chart.sandwich_check(20_000, 1).unwrap();
    println!(
        "sandwich on {} pairs: pass = {}, max d/d_n = {:.6}, max alpha*d_n/d = {:.6}",
        sandwich.pairs_tested, sandwich.pass, sandwich.max_d_over_dn, sandwich.max_alpha_dn_over_d
    );

    let coverage = atlas.coverage_check(10_000, 99).unwrap();
    println!(
        "coverage: {} of {} test points uncovered (pass = {})",
        coverage.uncovered, coverage.tested, coverage.pass
    );

    // A cover that is too small reports the points it misses.
    let sphere = Manifold::sphere(2).unwrap();
    match Atlas::cover_build(&sphere, 2, 7) {
        Err(manifold_kc::atlas::AtlasError::Coverage { uncovered, tested, .. }) => {
            println!("two caps on S^2: {uncovered} of {tested} points uncovered, as expected");
        }
        other => println!("unexpected outcome for the 2-chart sphere cover: {other:?}"),
    }
}
