//! Batch execution and artifact emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{OutputRequest, ScenarioConfig, DEFAULT_SNAPSHOT_POINTS};
use crate::error::{Error, Result};
use crate::numerics::log_grid;
use crate::objective::{reduced_cost, ReducedCostReport};
use crate::optimize::{grid_scan, solve_from_scan, OptimizeReport};

pub const TOOL_NAME: &str = "fracorder";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Extra cost-curve samples inside the final bracket.
pub const REFINEMENT_POINTS: usize = 16;

pub const COST_CURVE_HEADER: [&str; 6] = ["s", "J", "dJ", "d2J", "tracking", "penalty"];

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub s: f64,
    pub t: f64,
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub config: ScenarioConfig,
    pub report: OptimizeReport,
    pub cost_curve: Vec<ReducedCostReport>,
    pub snapshots: Vec<Snapshot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::invalid(
                "formats",
                format!("unknown format `{other}` (expected csv or json)"),
            )),
        }
    }
}

/// Full pipeline for one scenario.
pub fn run(config: &ScenarioConfig) -> Result<RunArtifacts> {
    let problem = config.build()?;
    let scan = grid_scan(&problem.scenario, &problem.penalty, &problem.optimizer)
        .map_err(|e| e.in_module("optimize"))?;
    let report = solve_from_scan(
        &problem.scenario,
        &problem.penalty,
        &problem.optimizer,
        &scan,
    )
    .map_err(|e| e.in_module("optimize"))?;

    let mut cost_curve = scan.points.clone();
    let (lo, hi) = report.bracket;
    let refine = log_grid(lo, hi, REFINEMENT_POINTS + 2);
    for &s in &refine[1..=REFINEMENT_POINTS] {
        cost_curve.push(
            reduced_cost(&problem.scenario, &problem.penalty, s)
                .map_err(|e| e.in_module("objective"))?,
        );
    }
    cost_curve.sort_by(|a, b| a.s.total_cmp(&b.s));

    let mut snapshots = Vec::new();
    for req in config.snapshot_requests() {
        let n = req.points.unwrap_or(DEFAULT_SNAPSHOT_POINTS);
        let state = &problem.scenario.state;
        let xs: Vec<f64> = state.basis().grid(n);
        let values = state
            .snapshot(req.s, req.t, &xs)
            .map_err(|e| e.in_module("state"))?;
        snapshots.push(Snapshot {
            s: req.s,
            t: req.t,
            xs,
            values,
        });
    }
    Ok(RunArtifacts {
        config: config.clone(),
        report,
        cost_curve,
        snapshots,
    })
}

/// Cost curve on a log grid over `[s_min, s_max]`.
pub fn scan(
    config: &ScenarioConfig,
    s_min: f64,
    s_max: f64,
    points: usize,
) -> Result<Vec<ReducedCostReport>> {
    if !(s_min > 0.0 && s_max > s_min && s_max.is_finite()) {
        return Err(Error::invalid(
            "s-range",
            format!("need 0 < s_min < s_max, got [{s_min}, {s_max}]"),
        ));
    }
    if points < 2 {
        return Err(Error::invalid("points", "need at least 2"));
    }
    let problem = config.build()?;
    let upper = problem.penalty.upper();
    if s_max >= upper {
        return Err(Error::OutsideDomain { s: s_max, upper });
    }
    let grid = log_grid(s_min, s_max, points);
    let rows: Vec<Result<ReducedCostReport>> = {
        use rayon::prelude::*;
        grid.par_iter()
            .map(|&s| reduced_cost(&problem.scenario, &problem.penalty, s))
            .collect()
    };
    rows.into_iter()
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_module("objective"))
}

fn num(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").unwrap();
}

pub fn cost_curve_csv(rows: &[ReducedCostReport]) -> String {
    let mut out = COST_CURVE_HEADER.join(",");
    out.push('\n');
    for r in rows {
        for (i, v) in [r.s, r.cost, r.d_cost, r.d2_cost, r.tracking, r.penalty]
            .into_iter()
            .enumerate()
        {
            if i > 0 {
                out.push(',');
            }
            num(&mut out, v);
        }
        out.push('\n');
    }
    out
}

pub fn trace_csv(report: &OptimizeReport) -> String {
    let mut out = String::from("iteration,step,accepted,s,J,dJ,d2J,tracking,penalty\n");
    for it in &report.iterations {
        let step = serde_json::to_value(it.step).unwrap();
        write!(
            out,
            "{},{},{}",
            it.iteration,
            step.as_str().unwrap(),
            it.accepted
        )
        .unwrap();
        let r = &it.report;
        for v in [r.s, r.cost, r.d_cost, r.d2_cost, r.tracking, r.penalty] {
            out.push(',');
            num(&mut out, v);
        }
        out.push('\n');
    }
    out
}

pub fn snapshot_csv(snap: &Snapshot) -> String {
    let mut out = String::from("s,t,x,y\n");
    for (x, y) in snap.xs.iter().zip(&snap.values) {
        for (i, v) in [snap.s, snap.t, *x, *y].into_iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            num(&mut out, v);
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct Summary<'a> {
    tool: &'a str,
    version: &'a str,
    /// The second-order verdict is exact for the truncated problem only.
    verdict_scope: String,
    report: &'a OptimizeReport,
    cost_curve_rows: usize,
    config: &'a ScenarioConfig,
}

pub fn summary_json(artifacts: &RunArtifacts) -> Result<String> {
    let j_max = artifacts.config.basis()?.j_max();
    let summary = Summary {
        tool: TOOL_NAME,
        version: TOOL_VERSION,
        verdict_scope: format!("at truncation J_max = {j_max}"),
        report: &artifacts.report,
        cost_curve_rows: artifacts.cost_curve.len(),
        config: &artifacts.config,
    };
    let mut text = serde_json::to_string_pretty(&summary).expect("summary fields are plain data");
    text.push('\n');
    Ok(text)
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes the requested artifacts under `out_dir`; returns the files written.
pub fn emit(artifacts: &RunArtifacts, out_dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let config = &artifacts.config;
    let mut written = Vec::new();
    if formats.contains(&Format::Json) && config.wants(OutputRequest::Summary) {
        written.push(write(
            out_dir.join("summary.json"),
            &summary_json(artifacts)?,
        )?);
    }
    if formats.contains(&Format::Csv) {
        if config.wants(OutputRequest::CostCurve) {
            written.push(write(
                out_dir.join("cost_curve.csv"),
                &cost_curve_csv(&artifacts.cost_curve),
            )?);
        }
        if config.wants(OutputRequest::Trace) {
            written.push(write(
                out_dir.join("trace.csv"),
                &trace_csv(&artifacts.report),
            )?);
        }
        if !artifacts.snapshots.is_empty() {
            let dir = out_dir.join("snapshots");
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            for (k, snap) in artifacts.snapshots.iter().enumerate() {
                written.push(write(
                    dir.join(format!("snapshot_{k:03}.csv")),
                    &snapshot_csv(snap),
                )?);
            }
        }
    }
    Ok(written)
}
