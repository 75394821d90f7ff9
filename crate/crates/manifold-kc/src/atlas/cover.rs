//! Chart covers from deterministic low-discrepancy center sequences, the
//! empirical coverage certificate, and atlas/grid file output.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AtlasError, Chart, DyadicGrid};
use crate::manifold::{Manifold, ManifoldPoint};

/// Number of random test points used by the coverage certificate.
pub const COVER_TEST_POINTS: usize = 10_000;

/// A finite chart cover of a manifold.
#[derive(Debug, Clone)]
pub struct Atlas {
    manifold: Manifold,
    charts: Vec<Chart>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageReport {
    pub tested: usize,
    pub uncovered: usize,
    pub pass: bool,
}

impl Atlas {
    /// Build `n_charts` charts at deterministic low-discrepancy centers and
    /// certify that `COVER_TEST_POINTS` seeded random points each lie in
    /// some chart domain, using the sufficient margin rule
    /// `d(p, x_n) < R_n / sqrt(m)`.
    ///
    /// Center sequences: equally spaced angles on the circle, a Fibonacci
    /// lattice on S^2, Halton-mapped Gaussians on higher spheres, and a
    /// regular lattice (smallest per-axis count whose power reaches
    /// `n_charts`, row-major truncated) on the torus and box.
    pub fn cover_build(
        manifold: &Manifold,
        n_charts: usize,
        seed: u64,
    ) -> Result<Self, AtlasError> {
        if n_charts == 0 {
            return Err(AtlasError::Construction("n_charts must be >= 1".into()));
        }
        let centers = chart_centers(manifold, n_charts)?;
        let charts = centers
            .iter()
            .enumerate()
            .map(|(i, c)| Chart::build(manifold, c, i))
            .collect::<Result<Vec<_>, _>>()?;
        let atlas = Atlas { manifold: manifold.clone(), charts };
        let (report, uncovered) = atlas.coverage_with_points(COVER_TEST_POINTS, seed)?;
        if !report.pass {
            return Err(AtlasError::Coverage {
                uncovered: report.uncovered,
                tested: report.tested,
                points: uncovered,
            });
        }
        Ok(atlas)
    }

    /// Assemble an atlas from already-built charts (deserialization path).
    pub fn from_charts(manifold: Manifold, charts: Vec<Chart>) -> Self {
        Atlas { manifold, charts }
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn centers(&self) -> impl Iterator<Item = &ManifoldPoint> {
        self.charts.iter().map(|c| c.center())
    }

    /// Re-run the empirical coverage certificate.
    pub fn coverage_check(&self, n_points: usize, seed: u64) -> Result<CoverageReport, AtlasError> {
        Ok(self.coverage_with_points(n_points, seed)?.0)
    }

    fn coverage_with_points(
        &self,
        n_points: usize,
        seed: u64,
    ) -> Result<(CoverageReport, Vec<ManifoldPoint>), AtlasError> {
        let mut rng = crate::seeded_rng(seed, 2);
        let mut uncovered = Vec::new();
        for _ in 0..n_points {
            let p = self.manifold.sample_point(&mut rng);
            let mut covered = false;
            for chart in &self.charts {
                let margin = chart.radius() / (self.manifold.dim() as f64).sqrt();
                if self.manifold.distance(&p, chart.center())? < margin {
                    covered = true;
                    break;
                }
            }
            if !covered {
                uncovered.push(p);
            }
        }
        let report = CoverageReport {
            tested: n_points,
            uncovered: uncovered.len(),
            pass: uncovered.is_empty(),
        };
        Ok((report, uncovered))
    }

    /// Write the versioned atlas schema as JSON.
    pub fn save(&self, path: &Path) -> Result<(), AtlasError> {
        let file = AtlasFile {
            schema_version: ATLAS_SCHEMA_VERSION,
            manifold: self.manifold.clone(),
            charts: self
                .charts
                .iter()
                .map(|c| ChartRecord {
                    index: c.index(),
                    center: c.center().coords().to_vec(),
                    radius: c.radius(),
                    alpha: c.alpha(),
                    frame: c.frame().iter().map(|f| f.components.clone()).collect(),
                })
                .collect(),
        };
        let json = serde_json::to_string_pretty(&file)
            .map_err(|e| AtlasError::Format(e.to_string()))?;
        atomic_write(path, json.as_bytes()).map_err(|e| AtlasError::Format(e.to_string()))
    }

    /// Load and re-validate an atlas file.
    pub fn load(path: &Path) -> Result<Self, AtlasError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AtlasError::Format(format!("{}: {e}", path.display())))?;
        let file: AtlasFile =
            serde_json::from_str(&text).map_err(|e| AtlasError::Format(e.to_string()))?;
        if file.schema_version != ATLAS_SCHEMA_VERSION {
            return Err(AtlasError::Format(format!(
                "unsupported atlas schema version {}",
                file.schema_version
            )));
        }
        let manifold = file.manifold;
        let charts = file
            .charts
            .into_iter()
            .map(|r| {
                // Stored coordinates come back bit-identical (no
                // renormalization), so reloaded grids match saved samples.
                let center = manifold.point_from_stored(&r.center)?;
                Chart::from_parts(manifold.clone(), r.index, center, r.radius, r.frame)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Atlas { manifold, charts })
    }
}

pub const ATLAS_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct AtlasFile {
    schema_version: u32,
    manifold: Manifold,
    charts: Vec<ChartRecord>,
}

#[derive(Serialize, Deserialize)]
struct ChartRecord {
    index: usize,
    center: Vec<f64>,
    radius: f64,
    alpha: f64,
    frame: Vec<Vec<f64>>,
}

/// Write a grid as CSV: point index, chart coordinates, ambient coordinates.
pub fn write_grid_csv(grid: &DyadicGrid, path: &Path) -> std::io::Result<()> {
    let mut out = Vec::new();
    let m = grid.dim();
    let ambient = grid.points()[0].coords().len();
    let mut header = String::from("index");
    for i in 0..m {
        header.push_str(&format!(",c{i}"));
    }
    for i in 0..ambient {
        header.push_str(&format!(",x{i}"));
    }
    writeln!(out, "{header}")?;
    for (i, (c, p)) in grid.coords().iter().zip(grid.points()).enumerate() {
        let mut line = i.to_string();
        for v in c {
            line.push_str(&format!(",{v}"));
        }
        for v in p.coords() {
            line.push_str(&format!(",{v}"));
        }
        writeln!(out, "{line}")?;
    }
    atomic_write(path, &out)
}

/// Write via a temp file in the same directory, then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile_path(dir, path);
    let mut attempts = 0;
    let file = loop {
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&tmp) {
            Ok(f) => break f,
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists && attempts < 16 => {
                attempts += 1;
                tmp.set_extension(format!("tmp{attempts}"));
            }
            Err(e) => return Err(e),
        }
    };
    {
        let mut w = std::io::BufWriter::new(file);
        w.write_all(bytes)?;
        w.flush()?;
    }
    std::fs::rename(&tmp, path)
}

fn tempfile_path(dir: &Path, target: &Path) -> std::path::PathBuf {
    let stem = target.file_name().and_then(|s| s.to_str()).unwrap_or("out");
    dir.join(format!(".{stem}.tmp"))
}

/// Deterministic chart centers for each geometry.
fn chart_centers(manifold: &Manifold, n: usize) -> Result<Vec<ManifoldPoint>, AtlasError> {
    match manifold {
        Manifold::Sphere { dim: 1 } => Ok((0..n)
            .map(|j| {
                let theta = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
                manifold.point(&[theta.cos(), theta.sin()]).unwrap()
            })
            .collect()),
        Manifold::Sphere { dim: 2 } => Ok(fibonacci_sphere(n)
            .into_iter()
            .map(|c| manifold.point(&c).unwrap())
            .collect()),
        Manifold::Sphere { dim } => Ok(halton_sphere(n, *dim)
            .into_iter()
            .map(|c| manifold.point(&c).unwrap())
            .collect()),
        Manifold::FlatTorus { periods } => Ok(lattice_centers(n, periods)
            .into_iter()
            .map(|c| manifold.point(&c).unwrap())
            .collect()),
        Manifold::Box { extents } => Ok(lattice_centers(n, extents)
            .into_iter()
            .map(|c| manifold.point(&c).unwrap())
            .collect()),
    }
}

/// Fibonacci lattice on S^2 (golden-angle longitudes, uniform z strips).
fn fibonacci_sphere(n: usize) -> Vec<Vec<f64>> {
    let golden_angle = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    (0..n)
        .map(|j| {
            let z = 1.0 - (2.0 * j as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let theta = golden_angle * j as f64;
            vec![r * theta.cos(), r * theta.sin(), z]
        })
        .collect()
}

/// Low-discrepancy points on S^m for m >= 3: Halton points mapped through
/// the normal quantile and radially projected.
fn halton_sphere(n: usize, dim: usize) -> Vec<Vec<f64>> {
    const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    (1..=n)
        .map(|j| {
            let mut v: Vec<f64> = (0..=dim)
                .map(|i| {
                    let u = radical_inverse(j as u64, PRIMES[i % PRIMES.len()]);
                    crate::stats::standard_normal_quantile(u.clamp(1e-12, 1.0 - 1e-12))
                })
                .collect();
            let norm: f64 = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm < 1e-12 {
                v[0] = 1.0;
            } else {
                for c in v.iter_mut() {
                    *c /= norm;
                }
            }
            v
        })
        .collect()
}

fn radical_inverse(mut j: u64, base: u64) -> f64 {
    let mut inv = 0.0;
    let mut frac = 1.0 / base as f64;
    while j > 0 {
        inv += (j % base) as f64 * frac;
        j /= base;
        frac /= base as f64;
    }
    inv
}

/// Regular lattice of cell midpoints: the smallest per-axis count whose
/// m-th power reaches `n`, truncated row-major to exactly `n` centers.
/// Pass a perfect m-th power for a complete lattice.
fn lattice_centers(n: usize, sides: &[f64]) -> Vec<Vec<f64>> {
    let m = sides.len();
    let mut per_axis = 1usize;
    while per_axis.pow(m as u32) < n {
        per_axis += 1;
    }
    let mut centers = Vec::with_capacity(n);
    let mut index = vec![0usize; m];
    for _ in 0..n {
        centers.push(
            index
                .iter()
                .zip(sides)
                .map(|(&i, s)| (i as f64 + 0.5) * s / per_axis as f64)
                .collect(),
        );
        for ax in (0..m).rev() {
            index[ax] += 1;
            if index[ax] < per_axis {
                break;
            }
            index[ax] = 0;
        }
    }
    centers
}

/// Uniform random point helper reused by pipeline checks.
pub fn sample_points<R: Rng>(manifold: &Manifold, n: usize, rng: &mut R) -> Vec<ManifoldPoint> {
    (0..n).map(|_| manifold.sample_point(rng)).collect()
}
