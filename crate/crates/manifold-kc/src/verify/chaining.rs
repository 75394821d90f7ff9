//! Dyadic chaining reconstruction: approximate a field value at an
//! arbitrary chart point by the values at the nearest grid points of
//! successive levels, and compare the successive differences against the
//! rate `r(delta_{n,k})`.

use serde::{Deserialize, Serialize};

use super::{RateFunctions, VerifyError};
use crate::atlas::{Chart, DyadicGrid};
use crate::fields::{coord_key, FieldSample};
use crate::ManifoldPoint;

/// Per-transition summary of the reconstruction differences.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainingTransition {
    pub from_level: u32,
    pub to_level: u32,
    /// Spacing of the finer level, the scale the rate is evaluated at.
    pub delta_fine: f64,
    /// Threshold `r(delta_fine)`, when `delta_fine < rho`.
    pub threshold: Option<f64>,
    pub median_abs_diff: f64,
    pub max_abs_diff: f64,
    /// Fraction of replicates with `|v_{k+1} - v_k| > threshold`.
    pub exceed_fraction: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainingReport {
    pub target_coords: Vec<f64>,
    pub levels: Vec<u32>,
    /// Nearest-grid-point values per replicate and level
    /// (`values[rep][level_idx]`).
    pub values: Vec<Vec<f64>>,
    pub transitions: Vec<ChainingTransition>,
    /// Finest-level values per replicate, the reconstruction estimate.
    pub limit: Vec<f64>,
}

/// Reconstruct the field at `x` through the nested levels.
///
/// Each `(grid, sample)` pair must cover the same level of one chart with
/// the sample's points a reordering of the grid's points. Ties in the
/// nearest-point search break toward the lexicographically smaller grid
/// coordinates.
pub fn chaining_reconstruct(
    chart: &Chart,
    levels: &[(&DyadicGrid, &FieldSample)],
    x: &ManifoldPoint,
    rates: &RateFunctions,
) -> Result<ChainingReport, VerifyError> {
    if levels.is_empty() {
        return Err(VerifyError::InsufficientLevels { needed: 1, got: 0 });
    }
    let coords = chart.coords(x)?;
    if coords.iter().any(|c| c.abs() >= chart.half_width()) {
        return Err(VerifyError::Mismatch(format!(
            "point lies outside the chart hypercube (half-width {})",
            chart.half_width()
        )));
    }
    let replicates = levels[0].1.replicates();
    let mut per_level_value_rows: Vec<Vec<f64>> = Vec::with_capacity(levels.len());
    let mut level_ids = Vec::with_capacity(levels.len());
    for (grid, sample) in levels {
        if sample.replicates() != replicates {
            return Err(VerifyError::Mismatch("levels disagree on replicate count".into()));
        }
        let nearest = grid.nearest_index(&coords);
        let key = coord_key(&grid.points()[nearest]);
        let sample_idx = sample
            .points()
            .iter()
            .position(|p| coord_key(p) == key)
            .ok_or_else(|| {
                VerifyError::Mismatch("sample does not contain the grid's points".into())
            })?;
        per_level_value_rows
            .push((0..replicates).map(|rep| sample.value(rep, sample_idx)).collect());
        level_ids.push(grid.level());
    }

    let mut transitions = Vec::new();
    for w in 0..levels.len() - 1 {
        let delta_fine = levels[w + 1].0.spacing();
        let threshold = rates.eval(delta_fine).ok().map(|(r, _)| r);
        let mut diffs: Vec<f64> = (0..replicates)
            .map(|rep| (per_level_value_rows[w + 1][rep] - per_level_value_rows[w][rep]).abs())
            .collect();
        diffs.sort_by(|a, b| a.total_cmp(b));
        let median = diffs[diffs.len() / 2];
        let max = *diffs.last().unwrap();
        let exceed_fraction = threshold
            .map(|t| diffs.iter().filter(|&&d| d > t).count() as f64 / replicates as f64);
        transitions.push(ChainingTransition {
            from_level: level_ids[w],
            to_level: level_ids[w + 1],
            delta_fine,
            threshold,
            median_abs_diff: median,
            max_abs_diff: max,
            exceed_fraction,
        });
    }

    let values: Vec<Vec<f64>> = (0..replicates)
        .map(|rep| per_level_value_rows.iter().map(|row| row[rep]).collect())
        .collect();
    let limit = per_level_value_rows.last().unwrap().clone();
    Ok(ChainingReport { target_coords: coords, levels: level_ids, values, transitions, limit })
}
