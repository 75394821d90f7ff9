//! Closed-form Riemannian primitives for the three supported geometries:
//! the unit sphere S^m embedded in R^{m+1}, the flat torus R^m / (p Z^m),
//! and a Euclidean box.
//!
//! All three have explicit geodesic distance, exponential and logarithm
//! maps, and orthonormal tangent frames, which is what makes chart radii
//! and distortion bounds computable rather than merely existent.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Point-validity drift tolerance for sphere coordinates.
pub const SPHERE_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("invalid tangent vector: {0}")]
    InvalidTangent(String),
    #[error("tangent norm {norm} is at or beyond the injectivity radius {radius}")]
    BeyondInjectivityRadius { norm: f64, radius: f64 },
    #[error("target lies at the cut locus of the base point")]
    CutLocus,
    #[error("invalid manifold parameters: {0}")]
    InvalidManifold(String),
}

/// One of the supported geometries. Sphere radius is fixed to 1.
///
/// For the box, the extents describe the region used for chart placement
/// and coverage tests; the underlying geometry is flat R^m, so chart
/// hypercubes and dyadic grids may legitimately reach past the extents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Manifold {
    Sphere { dim: usize },
    FlatTorus { periods: Vec<f64> },
    Box { extents: Vec<f64> },
}

/// A point, stored in the representation natural to the geometry: a unit
/// vector in R^{m+1} for the sphere, a fundamental-domain representative
/// for the torus, plain coordinates for the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ManifoldPoint {
    coords: Vec<f64>,
}

impl ManifoldPoint {
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Bit-exact identity of the stored representation, used to match grid
    /// points across nested levels.
    pub fn bit_eq(&self, other: &ManifoldPoint) -> bool {
        self.coords.len() == other.coords.len()
            && self
                .coords
                .iter()
                .zip(&other.coords)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// A tangent vector at a base point. Components are ambient for the sphere
/// (orthogonal to the base) and intrinsic for the flat geometries.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: ManifoldPoint,
    pub components: Vec<f64>,
}

impl TangentVector {
    pub fn norm(&self) -> f64 {
        dot(&self.components, &self.components).sqrt()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Manifold {
    pub fn sphere(dim: usize) -> Result<Self, GeometryError> {
        if dim < 1 {
            return Err(GeometryError::InvalidManifold("sphere dim must be >= 1".into()));
        }
        Ok(Manifold::Sphere { dim })
    }

    pub fn flat_torus(periods: Vec<f64>) -> Result<Self, GeometryError> {
        if periods.is_empty() || periods.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(GeometryError::InvalidManifold(
                "torus periods must be finite and strictly positive".into(),
            ));
        }
        Ok(Manifold::FlatTorus { periods })
    }

    pub fn euclidean_box(extents: Vec<f64>) -> Result<Self, GeometryError> {
        if extents.is_empty() || extents.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(GeometryError::InvalidManifold(
                "box extents must be finite and strictly positive".into(),
            ));
        }
        Ok(Manifold::Box { extents })
    }

    /// Intrinsic dimension m.
    pub fn dim(&self) -> usize {
        match self {
            Manifold::Sphere { dim } => *dim,
            Manifold::FlatTorus { periods } => periods.len(),
            Manifold::Box { extents } => extents.len(),
        }
    }

    /// Length of the coordinate representation (m+1 for the sphere).
    pub fn ambient_dim(&self) -> usize {
        match self {
            Manifold::Sphere { dim } => dim + 1,
            _ => self.dim(),
        }
    }

    /// Injectivity radius, uniform over the manifold for all three
    /// geometries: pi for the unit sphere, half the shortest period for the
    /// torus, unbounded for the box.
    pub fn injectivity_radius(&self) -> f64 {
        match self {
            Manifold::Sphere { .. } => std::f64::consts::PI,
            Manifold::FlatTorus { periods } => {
                periods.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0
            }
            Manifold::Box { .. } => f64::INFINITY,
        }
    }

    /// Construct a point from raw coordinates, validating and normalizing
    /// the representation (sphere vectors are renormalized, torus
    /// coordinates reduced to [0, period)).
    pub fn point(&self, coords: &[f64]) -> Result<ManifoldPoint, GeometryError> {
        let expected = self.ambient_dim();
        if coords.len() != expected {
            return Err(GeometryError::DimensionMismatch { expected, got: coords.len() });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::InvalidPoint("non-finite coordinate".into()));
        }
        match self {
            Manifold::Sphere { .. } => {
                let n = dot(coords, coords).sqrt();
                if (n - 1.0).abs() > SPHERE_NORM_TOL {
                    return Err(GeometryError::InvalidPoint(format!(
                        "sphere point norm {n} drifts more than {SPHERE_NORM_TOL} from 1"
                    )));
                }
                Ok(ManifoldPoint { coords: coords.iter().map(|c| c / n).collect() })
            }
            Manifold::FlatTorus { periods } => Ok(ManifoldPoint {
                coords: coords.iter().zip(periods).map(|(c, p)| c.rem_euclid(*p)).collect(),
            }),
            Manifold::Box { .. } => Ok(ManifoldPoint { coords: coords.to_vec() }),
        }
    }

    /// Reconstruct a point from previously stored coordinates without
    /// renormalizing, so reloaded points are bit-identical to what was
    /// saved. Validates the same invariants as [`Manifold::point`].
    pub fn point_from_stored(&self, coords: &[f64]) -> Result<ManifoldPoint, GeometryError> {
        let p = ManifoldPoint { coords: coords.to_vec() };
        self.check_point(&p)?;
        if let Manifold::FlatTorus { periods } = self {
            for (c, period) in coords.iter().zip(periods) {
                if !(0.0..*period).contains(c) {
                    return Err(GeometryError::InvalidPoint(format!(
                        "torus coordinate {c} outside [0, {period})"
                    )));
                }
            }
        }
        Ok(p)
    }

    /// Construct a tangent vector at `base`, checking dimensions and (for
    /// the sphere) orthogonality to the base point.
    pub fn tangent(
        &self,
        base: &ManifoldPoint,
        components: &[f64],
    ) -> Result<TangentVector, GeometryError> {
        self.check_point(base)?;
        let expected = self.ambient_dim();
        if components.len() != expected {
            return Err(GeometryError::DimensionMismatch { expected, got: components.len() });
        }
        if let Manifold::Sphere { .. } = self {
            let proj = dot(base.coords(), components);
            if proj.abs() > 1e-9 * (1.0 + dot(components, components).sqrt()) {
                return Err(GeometryError::InvalidTangent(format!(
                    "component along the base point has magnitude {proj}"
                )));
            }
        }
        Ok(TangentVector { base: base.clone(), components: components.to_vec() })
    }

    /// Check the stored representation of `p` against this manifold.
    pub fn check_point(&self, p: &ManifoldPoint) -> Result<(), GeometryError> {
        let expected = self.ambient_dim();
        if p.coords.len() != expected {
            return Err(GeometryError::DimensionMismatch { expected, got: p.coords.len() });
        }
        if let Manifold::Sphere { .. } = self {
            let n = dot(&p.coords, &p.coords).sqrt();
            if (n - 1.0).abs() > SPHERE_NORM_TOL {
                return Err(GeometryError::InvalidPoint(format!("sphere point norm {n}")));
            }
        }
        Ok(())
    }

    /// Geodesic distance d(x, y).
    pub fn distance(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> Result<f64, GeometryError> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(match self {
            Manifold::Sphere { .. } => sphere_angle(x.coords(), y.coords()),
            Manifold::FlatTorus { periods } => {
                let mut s = 0.0;
                for ((a, b), p) in x.coords().iter().zip(y.coords()).zip(periods) {
                    let d = wrap_difference(b - a, *p);
                    s += d * d;
                }
                s.sqrt()
            }
            Manifold::Box { .. } => x
                .coords()
                .iter()
                .zip(y.coords())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
        })
    }

    /// Exponential map: follow the geodesic with initial velocity `v` for
    /// unit time. Errors when `|v|` reaches the injectivity radius.
    pub fn exp_map(&self, v: &TangentVector) -> Result<ManifoldPoint, GeometryError> {
        self.check_point(&v.base)?;
        if v.components.len() != self.ambient_dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.ambient_dim(),
                got: v.components.len(),
            });
        }
        let radius = self.injectivity_radius();
        match self {
            Manifold::Sphere { .. } => {
                // Project out any residual component along the base.
                let x = v.base.coords();
                let along = dot(x, &v.components);
                let comps: Vec<f64> =
                    v.components.iter().zip(x).map(|(c, b)| c - along * b).collect();
                let theta = dot(&comps, &comps).sqrt();
                if theta >= radius {
                    return Err(GeometryError::BeyondInjectivityRadius { norm: theta, radius });
                }
                if theta == 0.0 {
                    return Ok(v.base.clone());
                }
                let (s, c) = theta.sin_cos();
                let coords: Vec<f64> =
                    x.iter().zip(&comps).map(|(b, t)| c * b + s * t / theta).collect();
                self.point(&coords)
            }
            Manifold::FlatTorus { periods } => {
                let norm = v.norm();
                if norm >= radius {
                    return Err(GeometryError::BeyondInjectivityRadius { norm, radius });
                }
                let coords: Vec<f64> = v
                    .base
                    .coords()
                    .iter()
                    .zip(&v.components)
                    .zip(periods)
                    .map(|((b, t), p)| (b + t).rem_euclid(*p))
                    .collect();
                Ok(ManifoldPoint { coords })
            }
            Manifold::Box { .. } => {
                let coords: Vec<f64> =
                    v.base.coords().iter().zip(&v.components).map(|(b, t)| b + t).collect();
                Ok(ManifoldPoint { coords })
            }
        }
    }

    /// Inverse of the exponential map at `x`. Errors at or beyond the cut
    /// locus (sphere antipode, torus half-period tie).
    pub fn log_map(
        &self,
        x: &ManifoldPoint,
        y: &ManifoldPoint,
    ) -> Result<TangentVector, GeometryError> {
        self.check_point(x)?;
        self.check_point(y)?;
        match self {
            Manifold::Sphere { .. } => {
                let c = dot(x.coords(), y.coords()).clamp(-1.0, 1.0);
                if c <= -1.0 + 1e-12 {
                    return Err(GeometryError::CutLocus);
                }
                let theta = sphere_angle(x.coords(), y.coords());
                if theta == 0.0 {
                    return Ok(TangentVector {
                        base: x.clone(),
                        components: vec![0.0; x.coords.len()],
                    });
                }
                let perp: Vec<f64> =
                    y.coords().iter().zip(x.coords()).map(|(b, a)| b - c * a).collect();
                let pn = dot(&perp, &perp).sqrt();
                if pn < 1e-15 {
                    return Err(GeometryError::CutLocus);
                }
                Ok(TangentVector {
                    base: x.clone(),
                    components: perp.iter().map(|p| p * theta / pn).collect(),
                })
            }
            Manifold::FlatTorus { periods } => {
                let mut comps = Vec::with_capacity(periods.len());
                for ((a, b), p) in x.coords().iter().zip(y.coords()).zip(periods) {
                    let d = wrap_difference(b - a, *p);
                    // Equidistant in both directions: no canonical preimage.
                    if 2.0 * d.abs() == *p {
                        return Err(GeometryError::CutLocus);
                    }
                    comps.push(d);
                }
                Ok(TangentVector { base: x.clone(), components: comps })
            }
            Manifold::Box { .. } => Ok(TangentVector {
                base: x.clone(),
                components: x.coords().iter().zip(y.coords()).map(|(a, b)| b - a).collect(),
            }),
        }
    }

    /// Deterministic orthonormal frame of the tangent space at `x`:
    /// the standard basis for the flat geometries, Gram-Schmidt of the
    /// projected ambient basis for the sphere (near-degenerate projections
    /// below norm 1e-6 are skipped).
    pub fn orthonormal_frame(&self, x: &ManifoldPoint) -> Result<Vec<TangentVector>, GeometryError> {
        self.check_point(x)?;
        let m = self.dim();
        match self {
            Manifold::Sphere { .. } => {
                let ambient = self.ambient_dim();
                let mut frame: Vec<Vec<f64>> = Vec::with_capacity(m);
                for i in 0..ambient {
                    if frame.len() == m {
                        break;
                    }
                    let mut v = vec![0.0; ambient];
                    v[i] = 1.0;
                    let along = dot(x.coords(), &v);
                    for (vj, xj) in v.iter_mut().zip(x.coords()) {
                        *vj -= along * xj;
                    }
                    for f in &frame {
                        let c = dot(f, &v);
                        for (vj, fj) in v.iter_mut().zip(f) {
                            *vj -= c * fj;
                        }
                    }
                    let n = dot(&v, &v).sqrt();
                    if n < 1e-6 {
                        continue;
                    }
                    frame.push(v.iter().map(|c| c / n).collect());
                }
                debug_assert_eq!(frame.len(), m);
                Ok(frame
                    .into_iter()
                    .map(|components| TangentVector { base: x.clone(), components })
                    .collect())
            }
            _ => Ok((0..m)
                .map(|i| {
                    let mut components = vec![0.0; m];
                    components[i] = 1.0;
                    TangentVector { base: x.clone(), components }
                })
                .collect()),
        }
    }

    /// Tangent vector with the given components in the frame.
    pub fn from_frame_components(
        &self,
        frame: &[TangentVector],
        a: &[f64],
    ) -> Result<TangentVector, GeometryError> {
        if frame.len() != a.len() {
            return Err(GeometryError::DimensionMismatch { expected: frame.len(), got: a.len() });
        }
        let base = &frame[0].base;
        let mut components = vec![0.0; self.ambient_dim()];
        for (f, ai) in frame.iter().zip(a) {
            for (c, fc) in components.iter_mut().zip(&f.components) {
                *c += ai * fc;
            }
        }
        Ok(TangentVector { base: base.clone(), components })
    }

    /// Components of `v` in the frame (inner products; the frame is
    /// orthonormal so this inverts `from_frame_components`).
    pub fn frame_components(&self, frame: &[TangentVector], v: &TangentVector) -> Vec<f64> {
        frame.iter().map(|f| dot(&f.components, &v.components)).collect()
    }

    /// Sample a point uniformly (area measure for the sphere, Lebesgue for
    /// torus and box extents).
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> ManifoldPoint {
        match self {
            Manifold::Sphere { dim } => {
                let mut coords = vec![0.0; dim + 1];
                loop {
                    let mut norm2 = 0.0;
                    for c in coords.iter_mut() {
                        *c = rng.sample::<f64, _>(rand_distr::StandardNormal);
                        norm2 += *c * *c;
                    }
                    if norm2 > 1e-24 {
                        let n = norm2.sqrt();
                        for c in coords.iter_mut() {
                            *c /= n;
                        }
                        return ManifoldPoint { coords };
                    }
                }
            }
            Manifold::FlatTorus { periods } => ManifoldPoint {
                coords: periods.iter().map(|p| rng.gen_range(0.0..*p)).collect(),
            },
            Manifold::Box { extents } => ManifoldPoint {
                coords: extents.iter().map(|e| rng.gen_range(0.0..*e)).collect(),
            },
        }
    }
}

/// Shortest signed representative of `d` modulo `p`, in [-p/2, p/2].
fn wrap_difference(d: f64, p: f64) -> f64 {
    let w = d - p * (d / p).round();
    // round() is half-away-from-zero; either sign of a tie is fine for
    // distances, and log_map rejects ties explicitly.
    w
}

/// Angle between unit vectors via `2 atan2(|x - y|, |x + y|)`, which stays
/// accurate near both 0 (where acos of the dot product loses half the
/// significant digits) and pi.
fn sphere_angle(x: &[f64], y: &[f64]) -> f64 {
    let mut diff2 = 0.0;
    let mut sum2 = 0.0;
    for (a, b) in x.iter().zip(y) {
        diff2 += (a - b) * (a - b);
        sum2 += (a + b) * (a + b);
    }
    2.0 * diff2.sqrt().atan2(sum2.sqrt())
}

/// Result of a Monte-Carlo distortion certification at radius `r`.
#[derive(Debug, Clone, Serialize)]
pub struct DistortionReport {
    pub pass: bool,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub pairs_tested: usize,
}

impl DistortionReport {
    /// The sampled ratio farthest from 1, on a log scale.
    pub fn worst_ratio(&self) -> f64 {
        if self.max_ratio.ln().abs() >= self.min_ratio.ln().abs() {
            self.max_ratio
        } else {
            self.min_ratio
        }
    }
}

/// Check the metric distortion of the exponential map at `x` over the ball
/// of radius `r`: samples `n_pairs` tangent pairs (Y, Z), maps them through
/// exp, and tests `1/2 <= d(exp Y, exp Z) / |Y - Z| <= 2` for every pair.
pub fn distortion_check(
    manifold: &Manifold,
    x: &ManifoldPoint,
    r: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<DistortionReport, GeometryError> {
    if !(r > 0.0) || r >= manifold.injectivity_radius() {
        return Err(GeometryError::BeyondInjectivityRadius {
            norm: r,
            radius: manifold.injectivity_radius(),
        });
    }
    let frame = manifold.orthonormal_frame(x)?;
    let m = manifold.dim();
    let mut rng = crate::seeded_rng(seed, 0);
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = f64::NEG_INFINITY;
    let mut tested = 0;
    while tested < n_pairs {
        let a = sample_ball(&mut rng, m, r);
        let b = sample_ball(&mut rng, m, r);
        let dist2: f64 = a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum();
        let tangent_dist = dist2.sqrt();
        if tangent_dist < 1e-12 {
            continue;
        }
        let y = manifold.exp_map(&manifold.from_frame_components(&frame, &a)?)?;
        let z = manifold.exp_map(&manifold.from_frame_components(&frame, &b)?)?;
        let ratio = manifold.distance(&y, &z)? / tangent_dist;
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
        tested += 1;
    }
    Ok(DistortionReport {
        pass: min_ratio >= 0.5 && max_ratio <= 2.0,
        min_ratio,
        max_ratio,
        pairs_tested: tested,
    })
}

/// Uniform sample from the Euclidean m-ball of radius `r`.
fn sample_ball(rng: &mut ChaCha8Rng, m: usize, r: f64) -> Vec<f64> {
    loop {
        let dir: Vec<f64> =
            (0..m).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let n2 = dot(&dir, &dir);
        if n2 < 1e-24 {
            continue;
        }
        let n = n2.sqrt();
        let radius = r * rng.gen::<f64>().powf(1.0 / m as f64);
        return dir.iter().map(|c| c * radius / n).collect();
    }
}
