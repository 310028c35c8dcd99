//! Reduced cost `J(s) = J0(s) + φ(s)` with exact first and second
//! derivatives, the penalty families, and the optimality verdict.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{StateEval, TimeSignal};

/// Evaluation cap for penalties on `(0, ∞)`.
pub const UNBOUNDED_WORKING_UPPER: f64 = 50.0;

/// `[φ, φ', φ'']` at `s`.
pub type PenaltyFn = dyn Fn(f64) -> [f64; 3] + Send + Sync;

#[derive(Clone)]
pub enum PenaltySpec {
    /// `φ(s) = 1 / (s (L − s))` on `(0, L)`.
    Reciprocal { upper: f64 },
    /// `φ(s) = e^s / s` on `(0, ∞)`.
    ExpOverS,
    /// User penalty with analytic first and second derivatives.
    Custom { upper: f64, eval: Arc<PenaltyFn> },
}

impl fmt::Debug for PenaltySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PenaltySpec::Reciprocal { upper } => write!(f, "Reciprocal(L = {upper})"),
            PenaltySpec::ExpOverS => f.write_str("ExpOverS"),
            PenaltySpec::Custom { upper, .. } => write!(f, "Custom(L = {upper})"),
        }
    }
}

impl PenaltySpec {
    pub fn reciprocal(upper: f64) -> Result<Self> {
        if !(upper.is_finite() && upper > 0.0) {
            return Err(Error::invalid(
                "L",
                format!("must be positive and finite, got {upper}"),
            ));
        }
        Ok(PenaltySpec::Reciprocal { upper })
    }

    /// Right end `L` of the domain `(0, L)`; may be infinite.
    pub fn upper(&self) -> f64 {
        match self {
            PenaltySpec::Reciprocal { upper } | PenaltySpec::Custom { upper, .. } => *upper,
            PenaltySpec::ExpOverS => f64::INFINITY,
        }
    }

    /// `L`, or the evaluation cap when `L = ∞`.
    pub fn working_upper(&self) -> f64 {
        let upper = self.upper();
        if upper.is_finite() {
            upper
        } else {
            UNBOUNDED_WORKING_UPPER
        }
    }

    pub fn contains(&self, s: f64) -> bool {
        s > 0.0 && s < self.upper()
    }

    /// `[φ, φ', φ'']` at `s`.
    pub fn eval_all(&self, s: f64) -> Result<[f64; 3]> {
        if !(s.is_finite() && self.contains(s)) {
            return Err(Error::OutsideDomain {
                s,
                upper: self.upper(),
            });
        }
        Ok(match self {
            PenaltySpec::Reciprocal { upper } => {
                let l = *upper;
                let q = s * (l - s);
                let dq = l - 2.0 * s;
                [
                    1.0 / q,
                    -dq / (q * q),
                    (2.0 * dq * dq + 2.0 * q) / (q * q * q),
                ]
            }
            PenaltySpec::ExpOverS => {
                let e = s.exp();
                [
                    e / s,
                    e * (s - 1.0) / (s * s),
                    e * (s * s - 2.0 * s + 2.0) / (s * s * s),
                ]
            }
            PenaltySpec::Custom { eval, .. } => eval(s),
        })
    }

    /// φ (order 0), φ' (order 1) or φ'' (order 2).
    pub fn eval(&self, s: f64, order: u8) -> Result<f64> {
        if order > 2 {
            return Err(Error::invalid(
                "order",
                format!("must be 0..=2, got {order}"),
            ));
        }
        Ok(self.eval_all(s)?[order as usize])
    }

    /// Minimizer of the penalty alone, where it is known in closed form.
    pub fn natural_minimizer(&self) -> Option<f64> {
        match self {
            PenaltySpec::Reciprocal { upper } => Some(upper / 2.0),
            PenaltySpec::ExpOverS => Some(1.0),
            PenaltySpec::Custom { .. } => None,
        }
    }
}

/// State data plus the tracking target: everything `J0` depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub state: StateEval,
    pub target: TimeSignal,
}

impl Scenario {
    pub fn new(state: StateEval, target: TimeSignal) -> Result<Self> {
        target.validate(state.basis().j_max(), state.horizon())?;
        Ok(Self { state, target })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedCostReport {
    pub s: f64,
    #[serde(rename = "J")]
    pub cost: f64,
    #[serde(rename = "dJ")]
    pub d_cost: f64,
    #[serde(rename = "d2J")]
    pub d2_cost: f64,
    pub tracking: f64,
    pub penalty: f64,
}

impl ReducedCostReport {
    pub fn is_finite(&self) -> bool {
        [
            self.cost,
            self.d_cost,
            self.d2_cost,
            self.tracking,
            self.penalty,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// `J`, `J'`, `J''` at `s`.
pub fn reduced_cost(
    scenario: &Scenario,
    penalty: &PenaltySpec,
    s: f64,
) -> Result<ReducedCostReport> {
    let [phi, dphi, d2phi] = penalty.eval_all(s)?;
    let misfit = scenario
        .state
        .misfit_and_derivatives(&scenario.target, s)
        .map_err(|e| e.in_module("state"))?;
    Ok(ReducedCostReport {
        s,
        cost: misfit.tracking + phi,
        d_cost: misfit.gradient + dphi,
        d2_cost: misfit.hessian + d2phi,
        tracking: misfit.tracking,
        penalty: phi,
    })
}

/// Optimality verdict at a point. At a finite truncation the second-order
/// condition is genuinely sufficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    FirstOrderStationary,
    SecondOrderSufficient,
    NotStationary,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::FirstOrderStationary => "first_order_stationary",
            Verdict::SecondOrderSufficient => "second_order_sufficient",
            Verdict::NotStationary => "not_stationary",
        })
    }
}

pub const DEFAULT_STATIONARITY_TOL: f64 = 1e-9;

/// Verdict with the default tolerance `1e-9 · (1 + |J|)`.
pub fn check_optimality(report: &ReducedCostReport) -> Verdict {
    check_optimality_with_tol(report, DEFAULT_STATIONARITY_TOL)
}

pub fn check_optimality_with_tol(report: &ReducedCostReport, rel_tol: f64) -> Verdict {
    let tol = rel_tol * (1.0 + report.cost.abs());
    let stationary = report.d_cost.abs() <= tol;
    if !stationary {
        Verdict::NotStationary
    } else if report.d2_cost > 0.0 {
        Verdict::SecondOrderSufficient
    } else {
        Verdict::FirstOrderStationary
    }
}
