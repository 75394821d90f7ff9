//! Human-readable rendering of the JSON/CSV reports a run leaves behind.

use std::fmt::Write as _;
use std::path::Path;

use super::PipelineError;

/// Render every report found in `out` as plain-text tables.
pub fn render_reports(out: &Path) -> Result<String, PipelineError> {
    let mut text = String::new();
    let mut found = false;

    if let Ok(value) = read(out, "summary.json") {
        found = true;
        let _ = writeln!(text, "== verify summary ==");
        if let Some(checks) = value.get("checks").and_then(|c| c.as_array()) {
            for check in checks {
                let _ = writeln!(
                    text,
                    "  {:<24} {}  {}",
                    check.get("name").and_then(|v| v.as_str()).unwrap_or("?"),
                    if check.get("pass").and_then(|v| v.as_bool()).unwrap_or(false) {
                        "pass"
                    } else {
                        "FAIL"
                    },
                    check.get("detail").and_then(|v| v.as_str()).unwrap_or(""),
                );
            }
        }
        if let Some(warnings) = value.get("warnings").and_then(|w| w.as_array()) {
            for w in warnings {
                let _ = writeln!(text, "  warning: {}", w.as_str().unwrap_or(""));
            }
        }
        let _ = writeln!(text);
    }

    if let Ok(value) = read(out, "atlas_report.json") {
        found = true;
        let _ = writeln!(text, "== atlas ==");
        if let Some(cov) = value.get("coverage") {
            let _ = writeln!(
                text,
                "  coverage: {}/{} uncovered ({})",
                cov.get("uncovered").and_then(|v| v.as_u64()).unwrap_or(0),
                cov.get("tested").and_then(|v| v.as_u64()).unwrap_or(0),
                pass_str(cov.get("pass")),
            );
        }
        if let Some(sw) = value.get("sandwich").and_then(|v| v.as_array()) {
            let worst = sw
                .iter()
                .filter_map(|r| r.get("max_d_over_dn").and_then(|v| v.as_f64()))
                .fold(f64::NEG_INFINITY, f64::max);
            let _ = writeln!(text, "  sandwich: {} charts, worst d/d_n = {worst:.6}", sw.len());
        }
        let _ = writeln!(text);
    }

    if let Ok(value) = read(out, "tail_report.json") {
        found = true;
        let _ = writeln!(text, "== empirical tail bins ==");
        let _ = writeln!(
            text,
            "  {:>10} {:>10} {:>12} {:>12} {:>12}  {}",
            "h_lo", "h_hi", "freq", "ci_hi", "bound", "pass"
        );
        if let Some(bins) = value.get("bins").and_then(|v| v.as_array()) {
            for b in bins {
                let _ = writeln!(
                    text,
                    "  {:>10.5} {:>10.5} {:>12.5e} {:>12.5e} {:>12.5e}  {}",
                    b.get("h_lo").and_then(|v| v.as_f64()).unwrap_or(f64::NAN),
                    b.get("h_hi").and_then(|v| v.as_f64()).unwrap_or(f64::NAN),
                    b.get("freq").and_then(|v| v.as_f64()).unwrap_or(f64::NAN),
                    b.get("ci_hi").and_then(|v| v.as_f64()).unwrap_or(f64::NAN),
                    b.get("bound").and_then(|v| v.as_f64()).unwrap_or(f64::NAN),
                    pass_str(b.get("pass")),
                );
            }
        }
        let _ = writeln!(text);
    }

    if let Ok(value) = read(out, "holder_report.json") {
        found = true;
        let _ = writeln!(text, "== Hölder estimate ==");
        let _ = writeln!(
            text,
            "  gamma_hat = {:.4} (stderr {:.4}, raw slope {:.4})",
            value.get("gamma_hat").and_then(|v| v.as_f64()).unwrap_or(f64::NAN),
            value.get("stderr").and_then(|v| v.as_f64()).unwrap_or(f64::NAN),
            value.get("slope_raw").and_then(|v| v.as_f64()).unwrap_or(f64::NAN),
        );
        let _ = writeln!(text);
    }

    if let Ok(csv) = std::fs::read_to_string(out.join("variogram.csv")) {
        found = true;
        let _ = writeln!(text, "== empirical variogram ==");
        for line in csv.lines().take(20) {
            let _ = writeln!(text, "  {line}");
        }
        let _ = writeln!(text);
    }

    if !found {
        return Err(PipelineError::Io(format!(
            "no reports found under {}; run the atlas/sample/verify commands first",
            out.display()
        )));
    }
    Ok(text)
}

fn read(out: &Path, name: &str) -> Result<serde_json::Value, PipelineError> {
    let path = out.join(name);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Io(e.to_string()))
}

fn pass_str(v: Option<&serde_json::Value>) -> &'static str {
    if v.and_then(|v| v.as_bool()).unwrap_or(false) {
        "pass"
    } else {
        "FAIL"
    }
}

/// Print to stdout (used by the binary).
pub fn print_reports(out: &Path) -> Result<(), PipelineError> {
    print!("{}", render_reports(out)?);
    Ok(())
}
