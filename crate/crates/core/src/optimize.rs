//! Minimization of the reduced cost over `s`: a log-spaced grid scan for the
//! global bracket, then safeguarded Newton on `J'` with bisection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{golden_section_min, log_grid};
use crate::objective::{
    check_optimality_with_tol, reduced_cost, PenaltySpec, ReducedCostReport, Scenario, Verdict,
};

/// Grid ends sit this far inside `(0, L)`.
pub const GRID_EDGE_OFFSET: f64 = 1e-3;
/// Right grid end when `L = ∞`.
pub const UNBOUNDED_GRID_UPPER: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub grid_points: usize,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub bracket_pad: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            grid_points: 64,
            newton_tol: 1e-10,
            max_newton_iters: 50,
            bracket_pad: 0.05,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 16 {
            return Err(Error::invalid(
                "grid_points",
                format!("must be at least 16, got {}", self.grid_points),
            ));
        }
        if !(self.newton_tol.is_finite() && self.newton_tol > 0.0) {
            return Err(Error::invalid(
                "newton_tol",
                format!("must be positive, got {}", self.newton_tol),
            ));
        }
        if self.max_newton_iters == 0 {
            return Err(Error::invalid("max_newton_iters", "must be positive"));
        }
        if !(self.bracket_pad > 0.0 && self.bracket_pad < 0.5) {
            return Err(Error::invalid(
                "bracket_pad",
                format!("must lie in (0, 0.5), got {}", self.bracket_pad),
            ));
        }
        Ok(())
    }
}

/// `[s_lo, s_hi]` for the scan.
pub fn grid_bounds(penalty: &PenaltySpec) -> Result<(f64, f64)> {
    let upper = penalty.upper();
    let hi = if upper.is_finite() {
        upper - GRID_EDGE_OFFSET
    } else {
        UNBOUNDED_GRID_UPPER
    };
    if hi <= GRID_EDGE_OFFSET {
        return Err(Error::invalid(
            "L",
            format!("domain (0, {upper}) too narrow for the scan grid"),
        ));
    }
    Ok((GRID_EDGE_OFFSET, hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridScan {
    /// Finite evaluations in increasing `s`.
    pub points: Vec<ReducedCostReport>,
    pub best: ReducedCostReport,
    pub bracket: (f64, f64),
    /// Grid points whose `J` is no larger than both neighbours.
    pub local_minima: Vec<f64>,
}

/// Evaluates `J` on `grid` (in parallel) and brackets the argmin.
pub fn scan_points(scenario: &Scenario, penalty: &PenaltySpec, grid: &[f64]) -> Result<GridScan> {
    let evaluated: Vec<Option<ReducedCostReport>> = grid
        .par_iter()
        .map(|&s| {
            reduced_cost(scenario, penalty, s)
                .ok()
                .filter(|r| r.is_finite())
        })
        .collect();
    let points: Vec<ReducedCostReport> = evaluated.into_iter().flatten().collect();
    if points.is_empty() {
        return Err(Error::EmptyScan(grid.len()));
    }
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if p.cost < points[best].cost {
            best = i;
        }
    }
    let lo = points[best.saturating_sub(1)].s;
    let hi = points[(best + 1).min(points.len() - 1)].s;
    let local_minima = (0..points.len())
        .filter(|&i| {
            let left = i == 0 || points[i].cost < points[i - 1].cost;
            let right = i + 1 == points.len() || points[i].cost <= points[i + 1].cost;
            left && right
        })
        .map(|i| points[i].s)
        .collect();
    Ok(GridScan {
        best: points[best],
        bracket: (lo, hi),
        points,
        local_minima,
    })
}

/// Log-grid scan over the working domain.
pub fn grid_scan(
    scenario: &Scenario,
    penalty: &PenaltySpec,
    config: &OptimizerConfig,
) -> Result<GridScan> {
    config.validate()?;
    let (lo, hi) = grid_bounds(penalty)?;
    scan_points(scenario, penalty, &log_grid(lo, hi, config.grid_points))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Start,
    Bracket,
    Newton,
    Bisection,
    Damped,
    Golden,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub step: StepKind,
    pub accepted: bool,
    #[serde(flatten)]
    pub report: ReducedCostReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub s_star: f64,
    #[serde(rename = "J_star")]
    pub cost_star: f64,
    #[serde(rename = "dJ_star")]
    pub d_cost_star: f64,
    #[serde(rename = "d2J_star")]
    pub d2_cost_star: f64,
    pub verdict: Verdict,
    pub bracket: (f64, f64),
    pub newton_iterations: usize,
    pub fallback_used: bool,
    pub local_minima: Vec<f64>,
    pub iterations: Vec<IterationRecord>,
}

impl OptimizeReport {
    /// 0 when sufficient, 2 when only stationary, 3 when not stationary or
    /// the curvature fallback ran.
    pub fn exit_code(&self) -> i32 {
        if self.fallback_used {
            return 3;
        }
        match self.verdict {
            Verdict::SecondOrderSufficient => 0,
            Verdict::FirstOrderStationary => 2,
            Verdict::NotStationary => 3,
        }
    }
}

struct Refiner<'a> {
    scenario: &'a Scenario,
    penalty: &'a PenaltySpec,
    config: &'a OptimizerConfig,
    records: Vec<IterationRecord>,
}

impl Refiner<'_> {
    fn eval(&self, s: f64) -> Result<ReducedCostReport> {
        let r =
            reduced_cost(self.scenario, self.penalty, s).map_err(|e| e.in_module("objective"))?;
        if !r.is_finite() {
            return Err(Error::NonFinite("reduced cost").in_module("optimize"));
        }
        Ok(r)
    }

    fn converged(&self, r: &ReducedCostReport) -> bool {
        r.d_cost.abs() <= self.config.newton_tol * (1.0 + r.cost.abs())
    }

    fn record(&mut self, step: StepKind, accepted: bool, report: ReducedCostReport) {
        let iteration = self.records.len();
        self.records.push(IterationRecord {
            iteration,
            step,
            accepted,
            report,
        });
    }

    fn trials(&self) -> usize {
        self.records
            .iter()
            .filter(|r| !matches!(r.step, StepKind::Start | StepKind::Bracket))
            .count()
    }
}

fn no_increase(trial: &ReducedCostReport, current: &ReducedCostReport) -> bool {
    trial.cost <= current.cost + 8.0 * f64::EPSILON * current.cost.abs().max(1.0)
}

/// Safeguarded Newton on `J'` inside `bracket`, started at `start`.
pub fn newton_refine(
    scenario: &Scenario,
    penalty: &PenaltySpec,
    bracket: (f64, f64),
    start: f64,
    config: &OptimizerConfig,
) -> Result<OptimizeReport> {
    config.validate()?;
    let (mut lo, mut hi) = (bracket.0.min(bracket.1), bracket.0.max(bracket.1));
    if !(lo > 0.0 && lo < hi && penalty.contains(lo) && penalty.contains(hi)) {
        return Err(Error::invalid(
            "bracket",
            format!("[{lo}, {hi}] must be a proper subinterval of the domain"),
        ));
    }
    if !(start >= lo && start <= hi) {
        return Err(Error::invalid(
            "start",
            format!("{start} lies outside [{lo}, {hi}]"),
        ));
    }
    let mut ctx = Refiner {
        scenario,
        penalty,
        config,
        records: Vec::new(),
    };
    let mut current = ctx.eval(start)?;
    ctx.record(StepKind::Start, true, current);

    let mut r_lo = ctx.eval(lo)?;
    let mut r_hi = ctx.eval(hi)?;
    if !(r_lo.d_cost < 0.0 && r_hi.d_cost > 0.0) {
        // Widen once in log space before giving up on a sign change.
        let width = (hi / lo).ln();
        let wlo = lo * (-config.bracket_pad * width).exp();
        let whi = hi * (config.bracket_pad * width).exp();
        if penalty.contains(wlo) && penalty.contains(whi) {
            lo = wlo;
            hi = whi;
            r_lo = ctx.eval(lo)?;
            r_hi = ctx.eval(hi)?;
        }
    }
    for r in [r_lo, r_hi] {
        let better = r.cost < current.cost;
        ctx.record(StepKind::Bracket, better, r);
        if better {
            current = r;
        }
    }
    let sign_change = r_lo.d_cost < 0.0 && r_hi.d_cost > 0.0;

    let mut fallback_used = false;
    if ctx.converged(&current) {
        // Already stationary at the start.
    } else if sign_change {
        let mut force_bisect = false;
        while ctx.trials() < config.max_newton_iters && !ctx.converged(&current) {
            let newton = current.s - current.d_cost / current.d2_cost;
            let (step, trial_s) =
                if !force_bisect && current.d2_cost > 0.0 && newton > lo && newton < hi {
                    (StepKind::Newton, newton)
                } else {
                    (StepKind::Bisection, 0.5 * (lo + hi))
                };
            if !(trial_s > lo && trial_s < hi) {
                break;
            }
            let trial = ctx.eval(trial_s)?;
            if trial.d_cost < 0.0 {
                lo = trial.s;
            } else if trial.d_cost > 0.0 {
                hi = trial.s;
            }
            let accepted = no_increase(&trial, &current);
            ctx.record(step, accepted, trial);
            if accepted {
                current = trial;
            }
            force_bisect = !accepted;
        }
    } else if current.d2_cost > 0.0 {
        // No sign change but positive curvature: damped Newton in the box.
        while ctx.trials() < config.max_newton_iters && !ctx.converged(&current) {
            let mut step = -current.d_cost / current.d2_cost;
            let mut kind = StepKind::Newton;
            let mut moved = false;
            for _ in 0..30 {
                let trial_s = (current.s + step).clamp(lo, hi);
                if trial_s == current.s || ctx.trials() >= config.max_newton_iters {
                    break;
                }
                let trial = ctx.eval(trial_s)?;
                let accepted = no_increase(&trial, &current);
                ctx.record(kind, accepted, trial);
                if accepted {
                    current = trial;
                    moved = true;
                    break;
                }
                step *= 0.5;
                kind = StepKind::Damped;
            }
            if !moved || current.d2_cost <= 0.0 {
                break;
            }
        }
    } else {
        fallback_used = true;
        let tol = 1e-12;
        let (s_min, _) = golden_section_min(
            |s| ctx.eval(s).map(|r| r.cost).unwrap_or(f64::INFINITY),
            lo,
            hi,
            tol,
            200,
        );
        let trial = ctx.eval(s_min)?;
        let accepted = no_increase(&trial, &current);
        ctx.record(StepKind::Golden, accepted, trial);
        if accepted {
            current = trial;
        }
    }

    let verdict = if ctx.converged(&current) {
        check_optimality_with_tol(&current, config.newton_tol)
    } else {
        Verdict::NotStationary
    };
    Ok(OptimizeReport {
        s_star: current.s,
        cost_star: current.cost,
        d_cost_star: current.d_cost,
        d2_cost_star: current.d2_cost,
        verdict,
        bracket: (lo, hi),
        newton_iterations: ctx.trials(),
        fallback_used,
        local_minima: Vec::new(),
        iterations: ctx.records,
    })
}

/// Scan then refine from the grid argmin.
pub fn solve(
    scenario: &Scenario,
    penalty: &PenaltySpec,
    config: &OptimizerConfig,
) -> Result<OptimizeReport> {
    let scan = grid_scan(scenario, penalty, config)?;
    solve_from_scan(scenario, penalty, config, &scan)
}

pub fn solve_from_scan(
    scenario: &Scenario,
    penalty: &PenaltySpec,
    config: &OptimizerConfig,
    scan: &GridScan,
) -> Result<OptimizeReport> {
    let mut report = newton_refine(scenario, penalty, scan.bracket, scan.best.s, config)?;
    report.local_minima = scan.local_minima.clone();
    Ok(report)
}
