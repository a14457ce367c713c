use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::agents::AgentKind;
use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::experiment::RunSummary;
use super::metrics::{median, median_episode};

pub const CSV_HEADER: &str = "episode,return,mean_abs_td,update_ms";

pub fn csv_file_name(agent: AgentKind, seed: u64) -> String {
    format!("returns_{agent}_{seed}.csv")
}

/// Per-episode CSV. Reals carry 17 significant digits so they parse back
/// bit-for-bit; the timing column stays empty unless `timing` is set.
pub fn returns_csv(run: &RunSummary, timing: bool) -> String {
    let mut out = String::with_capacity(64 * (run.per_episode_returns.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (i, (ret, td)) in run.per_episode_returns.iter().zip(&run.mean_abs_td).enumerate() {
        let _ = write!(out, "{},{:.16e},{:.16e},", i + 1, ret, td);
        if timing {
            let _ = write!(out, "{:.16e}", run.update_ms[i]);
        }
        out.push('\n');
    }
    out
}

/// Returns column of a CSV written by [`returns_csv`].
pub fn parse_returns_csv(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(CSV_HEADER) => {}
        other => {
            return Err(Error::Config(format!(
                "expected CSV header `{CSV_HEADER}`, found {other:?}"
            )))
        }
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            line.split(',')
                .nth(1)
                .and_then(|f| f.parse::<f64>().ok())
                .ok_or_else(|| Error::Config(format!("CSV line {}: malformed row `{line}`", i + 2)))
        })
        .collect()
}

fn median_fields(runs: &[&RunSummary]) -> Value {
    let avgs: Vec<f64> = runs.iter().map(|r| r.avg_return_last_10pct).collect();
    let times: Vec<f64> = runs.iter().map(|r| r.mean_update_time_ms).collect();
    let conv: Vec<Option<usize>> = runs.iter().map(|r| r.convergence_episode).collect();
    json!({
        "median_avg_return_last_10pct": median(&avgs),
        "median_mean_update_time_ms": median(&times),
        "median_convergence_episode": median_episode(&conv),
    })
}

/// `{"runs": [...], "agents": [...]}`: one entry per run, then per-agent
/// medians across seeds. A median convergence episode is `null` when at
/// least half of the seeds never converged.
pub fn summary_json(runs: &[RunSummary]) -> Value {
    let per_run: Vec<Value> = runs
        .iter()
        .map(|r| {
            json!({
                "agent": r.agent.name(),
                "seed": r.seed,
                "avg_return_last_10pct": r.avg_return_last_10pct,
                "mean_update_time_ms": r.mean_update_time_ms,
                "convergence_episode": r.convergence_episode,
            })
        })
        .collect();
    let agents: Vec<Value> = AgentKind::ALL
        .iter()
        .filter_map(|&kind| {
            let mine: Vec<&RunSummary> = runs.iter().filter(|r| r.agent == kind).collect();
            if mine.is_empty() {
                return None;
            }
            let mut entry = median_fields(&mine);
            entry["agent"] = json!(kind.name());
            entry["seeds"] = json!(mine.iter().map(|r| r.seed).collect::<Vec<_>>());
            Some(entry)
        })
        .collect();
    json!({ "runs": per_run, "agents": agents })
}

fn agent_color(kind: AgentKind) -> &'static str {
    match kind {
        AgentKind::EnhancedFql => "#1f6fb4",
        AgentKind::NstepFql => "#e07b00",
        AgentKind::FuzzySarsa => "#2a9d3a",
    }
}

fn polyline(points: &[(f64, f64)], color: &str, width: f64, opacity: f64) -> String {
    let mut pts = String::new();
    for (x, y) in points {
        let _ = write!(pts, "{x:.1},{y:.1} ");
    }
    format!(
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\" stroke-opacity=\"{opacity}\" points=\"{}\"/>\n",
        pts.trim_end()
    )
}

/// Self-contained learning-curve plot: faint per-seed curves, a bold
/// per-agent median, and a dashed threshold line.
pub fn learning_curve_svg(runs: &[RunSummary], threshold: f64) -> String {
    const W: f64 = 820.0;
    const H: f64 = 480.0;
    const LEFT: f64 = 80.0;
    const RIGHT: f64 = 170.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 60.0;

    let episodes = runs.iter().map(|r| r.per_episode_returns.len()).max().unwrap_or(1).max(1);
    let all = runs.iter().flat_map(|r| r.per_episode_returns.iter().copied());
    let (mut lo, mut hi) = all.fold((threshold, threshold), |(lo, hi), v| (lo.min(v), hi.max(v)));
    hi = hi.max(0.0);
    if hi - lo < 1e-9 {
        lo -= 1.0;
    }
    let px = |ep: usize| LEFT + (W - LEFT - RIGHT) * (ep as f64 - 1.0) / ((episodes - 1).max(1) as f64);
    let py = |v: f64| TOP + (H - TOP - BOTTOM) * (hi - v) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(svg, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(
        svg,
        "<path d=\"M{x0},{y0} L{x0},{y1} L{x1},{y1}\" fill=\"none\" stroke=\"black\"/>"
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let y = py(v);
        let _ = writeln!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{x0}\" y2=\"{y:.1}\" stroke=\"black\"/><text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{v:.0}</text>",
            x0 - 4.0,
            x0 - 6.0,
            y + 4.0
        );
        let ep = 1 + ((episodes - 1) as f64 * k as f64 / 4.0).round() as usize;
        let x = px(ep);
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.1}\" y1=\"{y1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"black\"/><text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{ep}</text>",
            y1 + 4.0,
            y1 + 18.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">episode</text>",
        (x0 + x1) / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        svg,
        "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1})\">return</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    let ty = py(threshold);
    let _ = writeln!(
        svg,
        "<line x1=\"{x0}\" y1=\"{ty:.1}\" x2=\"{x1}\" y2=\"{ty:.1}\" stroke=\"#c0392b\" stroke-dasharray=\"6 4\"/><text x=\"{:.1}\" y=\"{:.1}\" fill=\"#c0392b\">threshold {threshold}</text>",
        x1 + 6.0,
        ty + 4.0
    );

    let mut legend_y = TOP + 10.0;
    for kind in AgentKind::ALL {
        let mine: Vec<&RunSummary> = runs.iter().filter(|r| r.agent == kind).collect();
        if mine.is_empty() {
            continue;
        }
        let color = agent_color(kind);
        for run in &mine {
            let pts: Vec<(f64, f64)> = run
                .per_episode_returns
                .iter()
                .enumerate()
                .map(|(i, &v)| (px(i + 1), py(v)))
                .collect();
            svg.push_str(&polyline(&pts, color, 1.0, 0.3));
        }
        let len = mine.iter().map(|r| r.per_episode_returns.len()).min().unwrap_or(0);
        let med: Vec<(f64, f64)> = (0..len)
            .filter_map(|i| {
                let col: Vec<f64> = mine.iter().map(|r| r.per_episode_returns[i]).collect();
                median(&col).map(|m| (px(i + 1), py(m)))
            })
            .collect();
        svg.push_str(&polyline(&med, color, 2.5, 1.0));
        let _ = writeln!(
            svg,
            "<line x1=\"{:.1}\" y1=\"{legend_y:.1}\" x2=\"{:.1}\" y2=\"{legend_y:.1}\" stroke=\"{color}\" stroke-width=\"2.5\"/><text x=\"{:.1}\" y=\"{:.1}\">{kind} (median)</text>",
            x1 + 6.0,
            x1 + 26.0,
            x1 + 30.0,
            legend_y + 4.0
        );
        legend_y += 18.0;
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes per-run CSVs, `summary.json` and (optionally) `learning_curve.svg`
/// into `cfg.output_dir`. Returns the written paths.
pub fn emit_artifacts(runs: &[RunSummary], cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |path: PathBuf, body: &str| -> Result<()> {
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    for run in runs {
        put(dir.join(csv_file_name(run.agent, run.seed)), &returns_csv(run, cfg.csv_timing))?;
    }
    let summary = serde_json::to_string_pretty(&summary_json(runs)).expect("json values always serialize");
    put(dir.join("summary.json"), &(summary + "\n"))?;
    if cfg.emit_svg {
        put(dir.join("learning_curve.svg"), &learning_curve_svg(runs, cfg.threshold))?;
    }
    Ok(written)
}

/// Reads a returns CSV back from disk.
pub fn read_returns_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_returns_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(agent: AgentKind, seed: u64, returns: Vec<f64>) -> RunSummary {
        let n = returns.len();
        RunSummary {
            agent,
            seed,
            avg_return_last_10pct: *returns.last().unwrap(),
            per_episode_returns: returns,
            mean_abs_td: vec![0.5; n],
            update_ms: vec![0.25; n],
            mean_update_time_ms: 0.25,
            convergence_episode: None,
        }
    }

    #[test]
    fn csv_has_header_plus_rows_and_roundtrips() {
        let r = run(AgentKind::EnhancedFql, 0, vec![-1.0 / 3.0, -1e-300, -123456.789]);
        let text = returns_csv(&r, false);
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().next(), Some(CSV_HEADER));
        assert!(text.lines().nth(1).unwrap().ends_with(','));
        assert_eq!(parse_returns_csv(&text).unwrap(), r.per_episode_returns);
        assert!(returns_csv(&r, true).lines().nth(1).unwrap().ends_with("e-1"));
    }

    #[test]
    fn summary_medians() {
        let runs: Vec<RunSummary> = [-100.0, -200.0, -300.0]
            .iter()
            .enumerate()
            .map(|(i, &v)| run(AgentKind::NstepFql, i as u64, vec![v]))
            .collect();
        let s = summary_json(&runs);
        assert_eq!(s["agents"][0]["median_avg_return_last_10pct"], json!(-200.0));
        assert_eq!(s["agents"][0]["agent"], json!("nstep-fql"));
        assert_eq!(s["agents"].as_array().unwrap().len(), 1);
        assert_eq!(s["runs"][2]["seed"], json!(2));
        assert!(s["runs"][0]["convergence_episode"].is_null());
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let runs = vec![
            run(AgentKind::EnhancedFql, 0, vec![-900.0, -500.0, -100.0]),
            run(AgentKind::FuzzySarsa, 0, vec![-800.0, -700.0, -600.0]),
        ];
        let svg = learning_curve_svg(&runs, -200.0);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.contains("episode") && svg.contains("return") && svg.contains("threshold -200"));
    }

    #[test]
    fn svg_only_when_requested() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig {
            output_dir: dir.path().to_path_buf(),
            ..Default::default()
        };
        let runs = vec![run(AgentKind::EnhancedFql, 7, vec![-1.0, -2.0, -3.0])];
        let written = emit_artifacts(&runs, &cfg).unwrap();
        assert_eq!(written.len(), 2);
        assert!(!dir.path().join("learning_curve.svg").exists());
        assert_eq!(read_returns_csv(&dir.path().join("returns_enhanced-fql_7.csv")).unwrap(), vec![-1.0, -2.0, -3.0]);
        cfg.emit_svg = true;
        emit_artifacts(&runs, &cfg).unwrap();
        assert!(dir.path().join("learning_curve.svg").exists());
    }
}
