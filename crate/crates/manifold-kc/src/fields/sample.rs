//! Seeded Gaussian sampling and conditional refinement along nested point
//! sets.
//!
//! Each replicate draws its standard-normal vector from an independent
//! ChaCha substream indexed by the replicate number, so output is
//! bit-identical for a fixed seed regardless of how the replicate loop is
//! scheduled. Replicate generation is parallelized with rayon; results are
//! collected back in replicate order.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cholesky_with_jitter, covariance_matrix, submatrix, CovarianceModel, FieldError};
use crate::manifold::{Manifold, ManifoldPoint};

/// Provenance tag for samples drawn on a dyadic grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridRef {
    pub chart: usize,
    pub level: u32,
}

/// A replicated draw of a Gaussian field on a finite point set.
///
/// Values are stored replicate-major: `values[rep * len + i]` is the value
/// of replicate `rep` at point `i`.
#[derive(Debug, Clone)]
pub struct FieldSample {
    points: Vec<ManifoldPoint>,
    values: Vec<f64>,
    replicates: usize,
    seed: u64,
    model: CovarianceModel,
    grid_ref: Option<GridRef>,
}

impl FieldSample {
    /// Wrap externally computed values (deterministic control fields,
    /// file imports). `values` must have length `replicates * points.len()`.
    pub fn from_values(
        points: Vec<ManifoldPoint>,
        values: Vec<f64>,
        replicates: usize,
        seed: u64,
        model: CovarianceModel,
    ) -> Result<Self, FieldError> {
        if values.len() != replicates * points.len() {
            return Err(FieldError::Mismatch(format!(
                "{} values for {} replicates x {} points",
                values.len(),
                replicates,
                points.len()
            )));
        }
        Ok(FieldSample { points, values, replicates, seed, model, grid_ref: None })
    }

    pub fn points(&self) -> &[ManifoldPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn model(&self) -> &CovarianceModel {
        &self.model
    }

    pub fn grid_ref(&self) -> Option<GridRef> {
        self.grid_ref
    }

    pub fn with_grid_ref(mut self, grid_ref: GridRef) -> Self {
        self.grid_ref = Some(grid_ref);
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, replicate: usize, point: usize) -> f64 {
        self.values[replicate * self.points.len() + point]
    }

    pub fn replicate(&self, replicate: usize) -> &[f64] {
        let n = self.points.len();
        &self.values[replicate * n..(replicate + 1) * n]
    }

    /// Empirical covariance matrix over replicates (mean assumed zero).
    pub fn empirical_covariance(&self) -> DMatrix<f64> {
        let n = self.points.len();
        let mut cov = DMatrix::zeros(n, n);
        for rep in 0..self.replicates {
            let row = self.replicate(rep);
            for i in 0..n {
                for j in i..n {
                    cov[(i, j)] += row[i] * row[j];
                }
            }
        }
        let scale = 1.0 / self.replicates.max(1) as f64;
        for i in 0..n {
            for j in i..n {
                cov[(i, j)] *= scale;
                cov[(j, i)] = cov[(i, j)];
            }
        }
        cov
    }
}

/// Draw `replicates` independent field replicates on `points`.
///
/// Zero-variance points (the pinned reference and its duplicates) are set
/// to exactly 0 and excluded from the factorization.
pub fn sample_gaussian(
    model: &CovarianceModel,
    points: &[ManifoldPoint],
    manifold: &Manifold,
    replicates: usize,
    seed: u64,
) -> Result<FieldSample, FieldError> {
    let cov = covariance_matrix(model, points, manifold)?;
    let n = points.len();
    let live: Vec<usize> = (0..n).filter(|i| !cov.zero_variance.contains(i)).collect();
    let sub = submatrix(&cov.matrix, &live, &live);
    let (chol, extra) = cholesky_with_jitter(&sub)?;
    debug_assert_eq!(extra, 0.0, "matrix was already verified factorizable");
    let lower = chol.l();
    let values: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let z = standard_normal_vector(seed, rep as u64, live.len());
            let draw = &lower * z;
            let mut row = vec![0.0; n];
            for (slot, &idx) in live.iter().enumerate() {
                row[idx] = draw[slot];
            }
            row
        })
        .flatten_iter()
        .collect();
    Ok(FieldSample {
        points: points.to_vec(),
        values,
        replicates,
        seed,
        model: *model,
        grid_ref: None,
    })
}

fn standard_normal_vector(seed: u64, replicate: u64, len: usize) -> DVector<f64> {
    let mut rng = crate::seeded_rng(seed, replicate + 1);
    DVector::from_fn(len, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal))
}

/// Extend a coarse sample to `fine_points` by drawing from the conditional
/// Gaussian law given the coarse values.
///
/// `coarse.points` must appear in `fine_points` bit-exactly (dyadic grids
/// nest exactly, so restriction is literal identity); the coarse values are
/// copied through unchanged. For the pinned family the reference must stay
/// the same: `fine_points[0]` must equal `coarse.points[0]`.
pub fn conditional_refine(
    coarse: &FieldSample,
    fine_points: &[ManifoldPoint],
    manifold: &Manifold,
    seed: u64,
) -> Result<FieldSample, FieldError> {
    let model = *coarse.model();
    let fine_cov = covariance_matrix(&model, fine_points, manifold)?;
    let n = fine_points.len();

    // Locate each coarse point inside the fine list.
    let mut position = std::collections::HashMap::with_capacity(n);
    for (i, p) in fine_points.iter().enumerate() {
        position.insert(coord_key(p), i);
    }
    let mut coarse_to_fine = Vec::with_capacity(coarse.len());
    for p in coarse.points() {
        match position.get(&coord_key(p)) {
            Some(&i) => coarse_to_fine.push(i),
            None => {
                return Err(FieldError::Mismatch(
                    "coarse points must be a subset of the fine points".into(),
                ))
            }
        }
    }
    if super::CovarianceFamily::PoweredExponentialVariogram == model.family()
        && !coarse.points()[0].bit_eq(&fine_points[0])
    {
        return Err(FieldError::Mismatch(
            "pinned model: fine_points[0] must be the coarse reference point".into(),
        ));
    }

    let is_coarse: Vec<bool> = {
        let mut v = vec![false; n];
        for &i in &coarse_to_fine {
            v[i] = true;
        }
        v
    };
    let new_idx: Vec<usize> = (0..n).filter(|&i| !is_coarse[i]).collect();
    if new_idx.is_empty() {
        // Same point set: the refinement is the identity.
        let mut values = Vec::with_capacity(coarse.replicates() * n);
        for rep in 0..coarse.replicates() {
            let row = coarse.replicate(rep);
            let mut out = vec![0.0; n];
            for (ci, &fi) in coarse_to_fine.iter().enumerate() {
                out[fi] = row[ci];
            }
            values.extend(out);
        }
        return Ok(FieldSample {
            points: fine_points.to_vec(),
            values,
            replicates: coarse.replicates(),
            seed,
            model,
            grid_ref: None,
        });
    }

    // Condition only on coarse points with strictly positive variance; a
    // pinned reference is deterministically zero and carries no information.
    let known: Vec<usize> = coarse_to_fine
        .iter()
        .cloned()
        .filter(|i| !fine_cov.zero_variance.contains(i))
        .collect();
    let free: Vec<usize> =
        new_idx.iter().cloned().filter(|i| !fine_cov.zero_variance.contains(i)).collect();

    let k_aa = submatrix(&fine_cov.matrix, &known, &known);
    let k_ab = submatrix(&fine_cov.matrix, &known, &free);
    let k_bb = submatrix(&fine_cov.matrix, &free, &free);
    let (chol_aa, _) = cholesky_with_jitter(&k_aa)?;
    // W = K_aa^{-1} K_ab, so the conditional mean is W^T v and the
    // conditional covariance K_bb - K_ba W.
    let w = chol_aa.solve(&k_ab);
    let mut cond_cov = &k_bb - k_ab.transpose() * &w;
    // Symmetrize against accumulated asymmetry before factorizing.
    for i in 0..cond_cov.nrows() {
        for j in (i + 1)..cond_cov.ncols() {
            let s = 0.5 * (cond_cov[(i, j)] + cond_cov[(j, i)]);
            cond_cov[(i, j)] = s;
            cond_cov[(j, i)] = s;
        }
    }
    let (chol_cond, _) = cholesky_with_jitter(&cond_cov)?;
    let lower = chol_cond.l();

    // Map fine "known" indices back to coarse sample positions.
    let fine_to_coarse: std::collections::HashMap<usize, usize> =
        coarse_to_fine.iter().enumerate().map(|(c, &f)| (f, c)).collect();

    let replicates = coarse.replicates();
    let values: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let coarse_row = coarse.replicate(rep);
            let v_known =
                DVector::from_fn(known.len(), |i, _| coarse_row[fine_to_coarse[&known[i]]]);
            let mean = w.transpose() * &v_known;
            let z = standard_normal_vector(seed, rep as u64, free.len());
            let fluct = &lower * z;
            let mut row = vec![0.0; n];
            for (ci, &fi) in coarse_to_fine.iter().enumerate() {
                row[fi] = coarse_row[ci];
            }
            for (slot, &fi) in free.iter().enumerate() {
                row[fi] = mean[slot] + fluct[slot];
            }
            row
        })
        .flatten_iter()
        .collect();
    Ok(FieldSample {
        points: fine_points.to_vec(),
        values,
        replicates,
        seed,
        model,
        grid_ref: None,
    })
}

/// Bit-exact hash key for a point's stored coordinates.
pub fn coord_key(p: &ManifoldPoint) -> Vec<u64> {
    p.coords().iter().map(|c| c.to_bits()).collect()
}

/// Convenience: points of a fine grid ordered with the coarse sample's
/// points first (preserving their order), then the remaining fine points
/// in grid order. Keeps the pinned reference stable across levels.
pub fn refinement_point_order(
    coarse_points: &[ManifoldPoint],
    fine_grid_points: &[ManifoldPoint],
) -> Vec<ManifoldPoint> {
    let coarse_keys: std::collections::HashSet<Vec<u64>> =
        coarse_points.iter().map(coord_key).collect();
    let mut out = coarse_points.to_vec();
    for p in fine_grid_points {
        if !coarse_keys.contains(&coord_key(p)) {
            out.push(p.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::CovarianceFamily;
    use crate::Chart;
    use approx::assert_relative_eq;

    fn sphere_points(n: usize) -> (Manifold, Vec<ManifoldPoint>) {
        let m = Manifold::sphere(2).unwrap();
        let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
        let pts = (0..n)
            .map(|j| {
                let z = 1.0 - (2.0 * j as f64 + 1.0) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let t = golden * j as f64;
                m.point(&[r * t.cos(), r * t.sin(), z]).unwrap()
            })
            .collect();
        (m, pts)
    }

    #[test]
    fn zero_replicates_is_valid_and_empty() {
        let (m, pts) = sphere_points(5);
        let model = CovarianceModel::pinned(1.0, 1.0).unwrap();
        let s = sample_gaussian(&model, &pts, &m, 0, 1).unwrap();
        assert_eq!(s.replicates(), 0);
        assert!(s.values().is_empty());
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let (m, pts) = sphere_points(8);
        let model = CovarianceModel::pinned(1.0, 0.7).unwrap();
        let a = sample_gaussian(&model, &pts, &m, 50, 42).unwrap();
        let b = sample_gaussian(&model, &pts, &m, 50, 42).unwrap();
        assert_eq!(a.values(), b.values());
        let c = sample_gaussian(&model, &pts, &m, 50, 43).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn identical_across_thread_counts() {
        let (m, pts) = sphere_points(10);
        let model = CovarianceModel::pinned(1.0, 1.0).unwrap();
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = pool1.install(|| sample_gaussian(&model, &pts, &m, 64, 9).unwrap());
        let b = pool4.install(|| sample_gaussian(&model, &pts, &m, 64, 9).unwrap());
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn pinned_reference_is_exactly_zero() {
        let (m, pts) = sphere_points(6);
        let model = CovarianceModel::pinned(1.0, 1.0).unwrap();
        let s = sample_gaussian(&model, &pts, &m, 20, 3).unwrap();
        for rep in 0..20 {
            assert_eq!(s.value(rep, 0), 0.0);
        }
    }

    #[test]
    fn two_point_variance_within_three_stderr() {
        let (m, pts) = sphere_points(4);
        let two = &pts[..2];
        let model = CovarianceModel::pinned(1.0, 1.0).unwrap();
        let reps = 100_000;
        let s = sample_gaussian(&model, two, &m, reps, 7).unwrap();
        let d = m.distance(&two[0], &two[1]).unwrap();
        let target = model.variogram(d);
        let mut mean = 0.0;
        for rep in 0..reps {
            let diff = s.value(rep, 0) - s.value(rep, 1);
            mean += diff * diff;
        }
        mean /= reps as f64;
        // Var of the squared-difference estimator: 2 sigma^4 / n.
        let stderr = target * (2.0 / reps as f64).sqrt();
        assert!(
            (mean - target).abs() <= 3.0 * stderr,
            "empirical {mean} vs model {target} (3se = {})",
            3.0 * stderr
        );
    }

    #[test]
    fn empirical_covariance_converges_to_model() {
        let (m, pts) = sphere_points(8);
        let model = CovarianceModel::pinned(1.0, 1.0).unwrap();
        let reps = 10_000;
        let s = sample_gaussian(&model, &pts, &m, reps, 19).unwrap();
        let cov = covariance_matrix(&model, &pts, &m).unwrap().matrix;
        let emp = s.empirical_covariance();
        let max_var =
            (0..pts.len()).map(|i| cov[(i, i)]).fold(0.0_f64, f64::max);
        let tol = 5.0 / (reps as f64).sqrt() * max_var;
        let mut worst = 0.0_f64;
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                worst = worst.max((emp[(i, j)] - cov[(i, j)]).abs());
            }
        }
        assert!(worst < tol, "max covariance deviation {worst} above {tol}");
    }

    #[test]
    fn refine_identity_when_fine_equals_coarse() {
        let (m, pts) = sphere_points(6);
        let model = CovarianceModel::pinned(1.0, 1.0).unwrap();
        let coarse = sample_gaussian(&model, &pts, &m, 10, 5).unwrap();
        let refined = conditional_refine(&coarse, &pts, &m, 99).unwrap();
        assert_eq!(refined.values(), coarse.values());
    }

    #[test]
    fn refine_preserves_coarse_values_bit_exactly() {
        let m = Manifold::sphere(1).unwrap();
        let c = m.point(&[1.0, 0.0]).unwrap();
        let chart = Chart::build(&m, &c, 0).unwrap();
        let g1 = chart.dyadic_grid(1).unwrap();
        let g2 = chart.dyadic_grid(2).unwrap();
        let model = CovarianceModel::pinned(1.0, 1.0).unwrap();
        let coarse = sample_gaussian(&model, g1.points(), &m, 25, 11).unwrap();
        let fine_points = refinement_point_order(coarse.points(), g2.points());
        let refined = conditional_refine(&coarse, &fine_points, &m, 12).unwrap();
        for rep in 0..25 {
            for i in 0..coarse.len() {
                assert_eq!(refined.value(rep, i), coarse.value(rep, i), "rep {rep} point {i}");
            }
        }
    }

    #[test]
    fn refine_rejects_non_subset() {
        let (m, pts) = sphere_points(6);
        let model = CovarianceModel::pinned(1.0, 1.0).unwrap();
        let coarse = sample_gaussian(&model, &pts[..3], &m, 4, 2).unwrap();
        // Fine list missing one coarse point.
        let fine: Vec<ManifoldPoint> =
            vec![pts[0].clone(), pts[1].clone(), pts[3].clone(), pts[4].clone()];
        assert!(conditional_refine(&coarse, &fine, &m, 1).is_err());
    }

    /// Two-route law check: refine(sample(level 1), level 2) must match a
    /// direct draw on level 2 in distribution. Compare empirical
    /// covariances entrywise within 3 standard errors.
    #[test]
    fn refinement_matches_direct_sampling_in_law() {
        let m = Manifold::sphere(1).unwrap();
        let c = m.point(&[1.0, 0.0]).unwrap();
        let chart = Chart::build(&m, &c, 0).unwrap();
        let g1 = chart.dyadic_grid(1).unwrap();
        let g2 = chart.dyadic_grid(2).unwrap();
        let model = CovarianceModel::pinned(1.0, 1.0).unwrap();
        let reps = 10_000;

        let coarse = sample_gaussian(&model, g1.points(), &m, reps, 21).unwrap();
        let fine_points = refinement_point_order(coarse.points(), g2.points());
        let refined = conditional_refine(&coarse, &fine_points, &m, 22).unwrap();
        let direct = sample_gaussian(&model, &fine_points, &m, reps, 23).unwrap();

        let cov_a = refined.empirical_covariance();
        let cov_b = direct.empirical_covariance();
        let n = fine_points.len();
        let mut checked = 0;
        let mut failures = 0;
        for i in 0..n {
            for j in i..n {
                let kii = cov_b[(i, i)].max(1e-30);
                let kjj = cov_b[(j, j)].max(1e-30);
                let kij = cov_b[(i, j)];
                // Var of one empirical entry, doubled for the difference of
                // two independent estimates.
                let se = ((kii * kjj + kij * kij) * 2.0 / reps as f64).sqrt();
                if se == 0.0 {
                    assert_eq!(cov_a[(i, j)], cov_b[(i, j)]);
                    continue;
                }
                checked += 1;
                if (cov_a[(i, j)] - cov_b[(i, j)]).abs() > 3.0 * se {
                    failures += 1;
                }
            }
        }
        // 3-sigma misses happen at ~0.3% per entry; stay under 5%.
        assert!(
            (failures as f64) < 0.05 * checked as f64,
            "{failures} of {checked} covariance entries outside 3 standard errors"
        );
    }

    #[test]
    fn from_values_checks_shape() {
        let (_, pts) = sphere_points(3);
        let model = CovarianceModel::pinned(1.0, 1.0).unwrap();
        assert!(FieldSample::from_values(pts.clone(), vec![0.0; 6], 2, 0, model).is_ok());
        assert!(FieldSample::from_values(pts, vec![0.0; 5], 2, 0, model).is_err());
    }

    #[test]
    fn stationary_family_samples_too() {
        let (m, pts) = sphere_points(6);
        let model =
            CovarianceModel::new(CovarianceFamily::ExponentialCovariance, 1.0, 1.0, 0.0).unwrap();
        let s = sample_gaussian(&model, &pts, &m, 4000, 17).unwrap();
        // Marginal variance should be near C = 1.
        let mut v = 0.0;
        for rep in 0..s.replicates() {
            v += s.value(rep, 2) * s.value(rep, 2);
        }
        v /= s.replicates() as f64;
        assert_relative_eq!(v, 1.0, max_relative = 0.15);
    }
}
