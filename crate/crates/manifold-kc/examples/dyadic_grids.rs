//! Dyadic grid hierarchy inside one sphere chart: point counts, exact
//! spacing halving, nesting, and near-pair counts against the 2^{mk} bound.
//!
//! ```bash
//! cargo run -p manifold-kc --example dyadic_grids
//! ```

use manifold_kc::atlas::{pair_count_closed_form, pair_set};
use manifold_kc::{Chart, Manifold};

fn main() {
    let sphere = Manifold::sphere(2).unwrap();
    let center = sphere.point(&[0.0, 0.0, 1.0]).unwrap();
    let chart = Chart::build(&sphere, &center, 0).unwrap();
    println!("chart radius R = {:.6} (cap 1/(2 sqrt 2) = {:.6})", chart.radius(), 1.0 / (2.0 * 2.0_f64.sqrt()));
    println!();
    println!("{:>3} {:>8} {:>12} {:>10} {:>12} {:>10}", "k", "points", "delta", "pairs", "closed form", "K_m");

    let mut previous = None;
    for k in 1..=6 {
        let grid = chart.dyadic_grid(k).unwrap();
        let pairs = pair_set(&grid);
        let closed = pair_count_closed_form(k, 2).unwrap();
        println!(
            "{k:>3} {:>8} {:>12.6} {:>10} {:>12} {:>10.3}",
            grid.len(),
            grid.spacing(),
            pairs.count,
            closed,
            pairs.k_m_empirical
        );
        assert_eq!(pairs.count as u128, closed);

        if let Some(prev) = previous {
            assert_eq!(grid.spacing(), prev / 2.0, "spacing halves exactly");
        }
        previous = Some(grid.spacing());
    }

    // Nesting is literal: the level-3 coordinates contain every level-2
    // coordinate bit-for-bit.
    let coarse = chart.dyadic_grid(2).unwrap();
    let fine = chart.dyadic_grid(3).unwrap();
    let fine_keys: std::collections::HashSet<Vec<u64>> = fine
        .coords()
        .iter()
        .map(|c| c.iter().map(|v| v.to_bits()).collect())
        .collect();
    let nested = coarse
        .coords()
        .iter()
        .all(|c| fine_keys.contains(&c.iter().map(|v| v.to_bits()).collect::<Vec<u64>>()));
    println!("\nlevel-2 grid nested bit-exactly in level 3: {nested}");
}
