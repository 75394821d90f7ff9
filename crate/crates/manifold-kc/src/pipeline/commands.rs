//! The four pipeline commands. All file output goes through atomic
//! temp-and-rename writes; report JSON carries no timestamps so reruns of
//! the same config and seed are byte-identical (the manifest keeps its
//! timestamp in a dedicated field).

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{PipelineError, RunConfig};
use crate::atlas::{
    atomic_write, pair_set, separability_check, summability_report, write_grid_csv, Atlas,
    AtlasError, DyadicGrid, SandwichReport,
};
use crate::fields::{
    conditional_refine, coord_key, moment_estimate, read_values_mkc1, refinement_point_order,
    sample_gaussian, variogram_empirical, write_sample_csv, write_values_mkc1, FieldSample,
    GridRef,
};
use crate::manifold::ManifoldPoint;
use crate::verify::{
    chaining_reconstruct, gaussian_tail_predicate, holder_estimate, HolderConstants,
    LevelIncrements, VerifyError,
};

/// What a command produced, and whether every check it ran passed.
#[derive(Debug, Clone)]
pub struct CommandOutcome {
    pub pass: bool,
    pub messages: Vec<String>,
}

impl CommandOutcome {
    fn passing() -> Self {
        CommandOutcome { pass: true, messages: Vec::new() }
    }

    fn note(&mut self, msg: impl Into<String>) {
        self.messages.push(msg.into());
    }

    fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.pass &= pass;
        self.messages
            .push(format!("[{}] {name}: {}", if pass { "pass" } else { "FAIL" }, detail.into()));
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| PipelineError::Io(e.to_string()))?;
    atomic_write(path, json.as_bytes()).map_err(|e| PipelineError::Io(e.to_string()))
}

#[derive(Serialize, Deserialize)]
struct AtlasReport {
    coverage: CoverageSummary,
    sandwich: Vec<SandwichReport>,
    separability: serde_json::Value,
    summability: serde_json::Value,
    pass: bool,
}

#[derive(Serialize, Deserialize)]
struct CoverageSummary {
    tested: usize,
    uncovered: usize,
    pass: bool,
    /// Coordinates of uncovered points (all of them; empty on success).
    uncovered_points: Vec<Vec<f64>>,
}

/// Build the atlas, certify coverage, and run the chart checks.
pub fn cmd_atlas(cfg: &RunConfig, out: &Path) -> Result<CommandOutcome, PipelineError> {
    let v = cfg.validate()?;
    let mut outcome = CommandOutcome::passing();
    std::fs::create_dir_all(out).map_err(|e| PipelineError::Io(e.to_string()))?;

    let atlas = match Atlas::cover_build(&v.manifold, cfg.atlas.charts, cfg.atlas.seed) {
        Ok(atlas) => atlas,
        Err(AtlasError::Coverage { uncovered, tested, points }) => {
            let report = AtlasReport {
                coverage: CoverageSummary {
                    tested,
                    uncovered,
                    pass: false,
                    uncovered_points: points.iter().map(|p| p.coords().to_vec()).collect(),
                },
                sandwich: Vec::new(),
                separability: serde_json::Value::Null,
                summability: serde_json::Value::Null,
                pass: false,
            };
            write_json(&out.join("atlas_report.json"), &report)?;
            outcome.check(
                "coverage",
                false,
                format!("{uncovered} of {tested} test points uncovered; increase atlas.charts"),
            );
            return Ok(outcome);
        }
        Err(e) => return Err(e.into()),
    };
    atlas.save(&out.join("atlas.json"))?;
    outcome.note(format!("atlas: {} charts on {:?}", atlas.charts().len(), v.manifold));
    outcome.check("coverage", true, format!("{} test points covered", crate::atlas::COVER_TEST_POINTS));

    let mut sandwich = Vec::with_capacity(atlas.charts().len());
    let mut sandwich_pass = true;
    for chart in atlas.charts() {
        let rep = chart.sandwich_check(cfg.atlas.sandwich_pairs, cfg.atlas.seed ^ 0x5a5a)?;
        sandwich_pass &= rep.pass;
        sandwich.push(rep);
    }
    outcome.check(
        "sandwich",
        sandwich_pass,
        format!("{} pairs per chart on {} charts", cfg.atlas.sandwich_pairs, atlas.charts().len()),
    );

    let chart = atlas.charts().get(cfg.grid.chart).ok_or_else(|| {
        PipelineError::Config(format!("grid.chart = {} out of range", cfg.grid.chart))
    })?;
    let cap = DyadicGrid::level_cap(v.manifold.dim());
    let sep_k = cfg.atlas.separability_k_max.min(cap);
    let separability = separability_check(chart, sep_k)?;
    outcome.check(
        "separability",
        separability.pass,
        format!("exhaustive transitions up to k = {sep_k}"),
    );

    let summability = summability_report(chart, &v.rates, cfg.atlas.summability_k_max);
    outcome.check(
        "summability",
        summability.converged,
        format!(
            "partial sums to k = {}: sum_q = {:.6e}, sum_r = {:.6e}",
            cfg.atlas.summability_k_max, summability.sum_q, summability.sum_r
        ),
    );

    let report = AtlasReport {
        coverage: CoverageSummary {
            tested: crate::atlas::COVER_TEST_POINTS,
            uncovered: 0,
            pass: true,
            uncovered_points: Vec::new(),
        },
        sandwich,
        separability: serde_json::to_value(&separability)
            .map_err(|e| PipelineError::Io(e.to_string()))?,
        summability: serde_json::to_value(&summability)
            .map_err(|e| PipelineError::Io(e.to_string()))?,
        pass: outcome.pass,
    };
    write_json(&out.join("atlas_report.json"), &report)?;
    Ok(outcome)
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    config: RunConfig,
    /// Seed actually used per level (level -> seed).
    level_seeds: Vec<(u32, u64)>,
    /// Sample point ordering rule, for readers of the value files.
    point_order: String,
    files: Vec<FileEntry>,
    /// Wall-clock stamp, deliberately the only nondeterministic field.
    generated_unix_secs: u64,
}

#[derive(Serialize, Deserialize)]
struct FileEntry {
    name: String,
    sha256: String,
}

fn sha256_hex(path: &Path) -> Result<String, PipelineError> {
    let bytes = std::fs::read(path).map_err(|e| PipelineError::Io(e.to_string()))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Level seed: replicate substreams live inside the sampler, so distinct
/// per-level seeds are enough to decorrelate refinement fluctuations.
fn level_seed(run_seed: u64, level: u32) -> u64 {
    run_seed.wrapping_add(level as u64)
}

/// Draw nested samples on the configured chart and levels.
pub fn cmd_sample(cfg: &RunConfig, out: &Path) -> Result<CommandOutcome, PipelineError> {
    let v = cfg.validate()?;
    let mut outcome = CommandOutcome::passing();
    let atlas = Atlas::load(&out.join("atlas.json"))?;
    let chart = atlas.charts().get(cfg.grid.chart).ok_or_else(|| {
        PipelineError::Config(format!("grid.chart = {} out of range", cfg.grid.chart))
    })?;

    let mut files = Vec::new();
    let mut level_seeds = Vec::new();
    let mut prev: Option<FieldSample> = None;
    for k in cfg.grid.k0..=cfg.grid.k1 {
        let grid = chart.dyadic_grid(k)?;
        let seed = level_seed(cfg.run.seed, k);
        let sample = match &prev {
            None => {
                sample_gaussian(&v.model, grid.points(), &v.manifold, cfg.run.replicates, seed)?
            }
            Some(coarse) => {
                let pts = refinement_point_order(coarse.points(), grid.points());
                conditional_refine(coarse, &pts, &v.manifold, seed)?
            }
        }
        .with_grid_ref(GridRef { chart: chart.index(), level: k });
        level_seeds.push((k, seed));

        let grid_name = format!("grid_k{k}.csv");
        write_grid_csv(&grid, &out.join(&grid_name))
            .map_err(|e| PipelineError::Io(e.to_string()))?;
        let csv_name = format!("sample_k{k}.csv");
        write_sample_csv(&sample, &out.join(&csv_name))?;
        let bin_name = format!("sample_k{k}.mkc1");
        write_values_mkc1(&sample, &out.join(&bin_name))?;
        for name in [grid_name, csv_name, bin_name] {
            files.push(FileEntry { sha256: sha256_hex(&out.join(&name))?, name });
        }
        outcome.note(format!(
            "level {k}: {} points, {} replicates",
            sample.len(),
            sample.replicates()
        ));
        prev = Some(sample);
    }

    let manifest = Manifest {
        config: cfg.clone(),
        level_seeds,
        point_order: "level k0 in grid order; each finer level lists the coarser sample's \
                      points first, then the new grid points in grid order"
            .into(),
        files,
        generated_unix_secs: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(outcome)
}

/// Reconstruct the deterministic sample point order for level `k`.
fn sample_points_for_levels(
    chart: &crate::Chart,
    k0: u32,
    k1: u32,
) -> Result<Vec<(DyadicGrid, Vec<ManifoldPoint>)>, PipelineError> {
    let mut out = Vec::new();
    let mut prev: Option<Vec<ManifoldPoint>> = None;
    for k in k0..=k1 {
        let grid = chart.dyadic_grid(k)?;
        let pts = match &prev {
            None => grid.points().to_vec(),
            Some(coarse) => refinement_point_order(coarse, grid.points()),
        };
        prev = Some(pts.clone());
        out.push((grid, pts));
    }
    Ok(out)
}

#[derive(Serialize)]
struct VerifySummary {
    checks: Vec<CheckLine>,
    warnings: Vec<String>,
    pass: bool,
}

#[derive(Serialize)]
struct CheckLine {
    name: String,
    pass: bool,
    detail: String,
}

/// Run the verification suite against previously written samples.
pub fn cmd_verify(cfg: &RunConfig, out: &Path) -> Result<CommandOutcome, PipelineError> {
    let v = cfg.validate()?;
    let mut outcome = CommandOutcome::passing();
    let mut warnings: Vec<String> = Vec::new();
    let atlas = Atlas::load(&out.join("atlas.json"))?;
    let chart = atlas.charts().get(cfg.grid.chart).ok_or_else(|| {
        PipelineError::Config(format!("grid.chart = {} out of range", cfg.grid.chart))
    })?;

    // Reload samples against the reconstructed point order.
    let levels = sample_points_for_levels(chart, cfg.grid.k0, cfg.grid.k1)?;
    let mut samples: Vec<FieldSample> = Vec::new();
    for (k, (_, pts)) in (cfg.grid.k0..=cfg.grid.k1).zip(&levels) {
        let path = out.join(format!("sample_k{k}.mkc1"));
        let (reps, n, values) = read_values_mkc1(&path)?;
        if n != pts.len() {
            return Err(PipelineError::Io(format!(
                "{}: {} points on disk, expected {}",
                path.display(),
                n,
                pts.len()
            )));
        }
        samples.push(
            FieldSample::from_values(pts.clone(), values, reps, level_seed(cfg.run.seed, k), v.model)?
                .with_grid_ref(GridRef { chart: chart.index(), level: k }),
        );
    }
    let finest = samples.last().expect("at least one level");
    if finest.replicates() < 2 {
        return Err(PipelineError::Verify(VerifyError::Mismatch(
            "need at least 2 replicates to verify; increase run.replicates".into(),
        )));
    }

    // Estimator tables.
    let vario = variogram_empirical(finest, &v.manifold, cfg.verify.bins)?;
    write_table_csv(&out.join("variogram.csv"), &vario)?;
    let moments = moment_estimate(finest, &v.manifold, 4.0, cfg.verify.bins)?;
    write_table_csv(&out.join("moments_l4.csv"), &moments)?;
    outcome.note(format!("variogram/moment tables over {} bins", cfg.verify.bins));

    // Tail checks, analytic then empirical.
    let h_grid: Vec<f64> = (1..=cfg.verify.predicate_h_min_exp)
        .map(|j| 2.0_f64.powi(-(j as i32)))
        .filter(|h| *h < v.rates.rho())
        .collect();
    let predicate = gaussian_tail_predicate(&v.model, &v.rates, &h_grid)?;
    write_json(&out.join("predicate_report.json"), &predicate)?;
    let predicate_pass = predicate.iter().all(|p| p.pass);
    outcome.check(
        "tail-analytic",
        predicate_pass,
        format!("erfc vs q on {} grid points", predicate.len()),
    );
    if !predicate_pass && v.rates.gamma() >= v.model.eta() / 2.0 {
        warnings.push(format!(
            "Hölder consistency: requested gamma = {} is not below eta/2 = {}; \
             the tail hypothesis cannot hold at small h",
            v.rates.gamma(),
            v.model.eta() / 2.0
        ));
    }
    let tail = crate::verify::tail_check(finest, &v.manifold, &v.rates, cfg.verify.bins)?;
    write_json(&out.join("tail_report.json"), &tail)?;
    outcome.check(
        "tail-empirical",
        tail.pass,
        format!("{} bins, {} pairs, {} replicates", tail.bins.len(), tail.pairs_used, tail.replicates),
    );

    // Hölder exponent across levels.
    if samples.len() >= 3 {
        let mut pair_lists = Vec::new();
        for ((grid, pts), sample) in levels.iter().zip(&samples) {
            debug_assert_eq!(pts.len(), sample.len());
            let lookup: std::collections::HashMap<Vec<u64>, u32> = sample
                .points()
                .iter()
                .enumerate()
                .map(|(i, p)| (coord_key(p), i as u32))
                .collect();
            let ps = pair_set(grid);
            let pairs: Vec<(u32, u32)> = ps
                .pairs
                .iter()
                .map(|&(a, b)| {
                    (
                        lookup[&coord_key(&grid.points()[a as usize])],
                        lookup[&coord_key(&grid.points()[b as usize])],
                    )
                })
                .collect();
            pair_lists.push((grid.spacing(), pairs));
        }
        let inputs: Vec<LevelIncrements> = pair_lists
            .iter()
            .zip(&samples)
            .map(|((delta, pairs), sample)| LevelIncrements { delta: *delta, pairs, sample })
            .collect();
        let estimate = holder_estimate(&inputs)?;
        write_json(&out.join("holder_report.json"), &estimate)?;
        let ok = estimate.degenerate || estimate.in_unit_interval;
        outcome.check(
            "holder-estimate",
            ok,
            format!("gamma_hat = {:.4} (stderr {:.4})", estimate.gamma_hat, estimate.stderr),
        );
        if !estimate.degenerate && estimate.gamma_hat + 2.0 * estimate.stderr < v.rates.gamma() {
            warnings.push(format!(
                "Hölder consistency: estimated exponent {:.4} is below the requested gamma = {}",
                estimate.gamma_hat,
                v.rates.gamma()
            ));
        }
    } else {
        return Err(PipelineError::Verify(VerifyError::InsufficientLevels {
            needed: 3,
            got: samples.len(),
        }));
    }

    // Chaining at seeded off-grid probes.
    let mut rng = crate::seeded_rng(cfg.run.seed, 3);
    let level_refs: Vec<(&DyadicGrid, &FieldSample)> =
        levels.iter().map(|(g, _)| g).zip(&samples).collect();
    let mut chain_reports = Vec::new();
    for _ in 0..cfg.verify.chaining_probes {
        let coords = chart.sample_coords(&mut rng);
        let x = chart.point_at(&coords)?;
        chain_reports.push(chaining_reconstruct(chart, &level_refs, &x, &v.rates)?);
    }
    // One exact grid point as control: its sequence must be constant.
    let grid_probe = levels[0].0.points()[0].clone();
    let grid_report = chaining_reconstruct(chart, &level_refs, &grid_probe, &v.rates)?;
    let constant_on_grid =
        grid_report.transitions.iter().all(|t| t.max_abs_diff == 0.0);
    outcome.check("chaining-grid-constancy", constant_on_grid, "grid-point sequence constant");
    let summaries: Vec<serde_json::Value> = chain_reports
        .iter()
        .chain(std::iter::once(&grid_report))
        .map(|r| {
            serde_json::json!({
                "target_coords": r.target_coords,
                "levels": r.levels,
                "transitions": r.transitions,
            })
        })
        .collect();
    write_json(&out.join("chaining_report.json"), &summaries)?;

    // Geometric spacing envelope with eta_n = 1/2, C_n = 1/(2 R_n).
    let hc = HolderConstants::new(0.5, 1.0 / (2.0 * chart.radius()), v.rates.gamma(), v.rates.k_gamma())?;
    let spacings: Vec<(u32, f64)> = (cfg.grid.k0..=cfg.grid.k1)
        .map(|k| (k, chart.radius() * 2.0_f64.powi(1 - k as i32)))
        .collect();
    let envelope_failures = hc.spacing_envelope_failures(&spacings);
    outcome.check(
        "spacing-envelope",
        envelope_failures.is_empty(),
        format!("alpha_gamma_n = {:.6}", hc.holder_constant()),
    );

    // Summability certificate with the configured rates.
    let summability = summability_report(chart, &v.rates, cfg.atlas.summability_k_max);
    outcome.check("summability", summability.converged, "comparison-series certificate");

    let summary = VerifySummary {
        checks: outcome
            .messages
            .iter()
            .filter_map(|m| {
                let pass = m.starts_with("[pass]");
                let fail = m.starts_with("[FAIL]");
                if !pass && !fail {
                    return None;
                }
                let rest = &m[7..];
                let (name, detail) = rest.split_once(": ").unwrap_or((rest, ""));
                Some(CheckLine { name: name.to_string(), pass, detail: detail.to_string() })
            })
            .collect(),
        warnings: warnings.clone(),
        pass: outcome.pass,
    };
    write_json(&out.join("summary.json"), &summary)?;
    for w in warnings {
        outcome.note(format!("warning: {w}"));
    }
    Ok(outcome)
}

fn write_table_csv(path: &Path, table: &[crate::fields::BinStat]) -> Result<(), PipelineError> {
    let mut text = String::from("h_lo,h_hi,h_mid,pairs,estimate,stderr\n");
    for row in table {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.h_lo, row.h_hi, row.h_mid, row.pairs, row.estimate, row.stderr
        ));
    }
    atomic_write(path, text.as_bytes()).map_err(|e| PipelineError::Io(e.to_string()))
}

/// Pretty-print whatever reports exist in `out`.
pub fn cmd_report(out: &Path) -> Result<CommandOutcome, PipelineError> {
    let mut outcome = CommandOutcome::passing();
    let text = super::report::render_reports(out)?;
    print!("{text}");
    outcome.note(format!("reports read from {}", out.display()));
    Ok(outcome)
}

