//! Built-in self-checks run by `fracorder verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{builtin_scenarios, InitialSpec, PenaltyConfig, ScenarioConfig};
use crate::error::Result;
use crate::kernel::{check_bounds, eval_kernel};
use crate::numerics::log_grid;
use crate::objective::{reduced_cost, Verdict};
use crate::optimize::solve;
use crate::run::{cost_curve_csv, run, trace_csv};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

const SAMPLES: usize = 2000;
const SEED: u64 = 0x5eed_f4ac;

fn kernel_samples() -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    (0..SAMPLES)
        .map(|_| {
            let lambda = rng.gen_range(0.0..=100.0);
            let t = 10.0 - rng.gen_range(0.0..10.0);
            let s = 4.0 - rng.gen_range(0.0..3.95);
            (lambda, t, s)
        })
        .collect()
}

fn kernel_derivatives() -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for (lambda, t, s) in kernel_samples() {
        let k = eval_kernel(lambda, t, s, 3)?;
        let h = 1e-5;
        let plus = eval_kernel(lambda, t, s + h, 3)?;
        let minus = eval_kernel(lambda, t, s - h, 3)?;
        for order in 0..3u8 {
            let fd = (plus.derivative(order) - minus.derivative(order)) / (2.0 * h);
            let exact = k.derivative(order + 1);
            let tol = 1e-7f64.max(1e-5 * exact.abs()) * 10f64.powi(order as i32);
            worst = worst.max((fd - exact).abs() / tol);
        }
    }
    Ok(CheckOutcome {
        name: "kernel derivatives vs finite differences",
        passed: worst <= 1.0,
        detail: format!("{SAMPLES} samples, worst error/tolerance {worst:.3e}"),
    })
}

fn kernel_bounds() -> Result<CheckOutcome> {
    let mut failures = 0;
    for (lambda, t, s) in kernel_samples() {
        if !check_bounds(lambda, t, s)? {
            failures += 1;
        }
    }
    Ok(CheckOutcome {
        name: "kernel derivative bounds",
        passed: failures == 0,
        detail: format!("{failures} of {SAMPLES} samples violate the bound"),
    })
}

fn reduced_cost_derivatives(scenarios: &[ScenarioConfig]) -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for c in scenarios {
        let p = c.build()?;
        for s in log_grid(0.1, 3.0, 16) {
            let h = 1e-5 * s;
            let r = reduced_cost(&p.scenario, &p.penalty, s)?;
            let rp = reduced_cost(&p.scenario, &p.penalty, s + h)?;
            let rm = reduced_cost(&p.scenario, &p.penalty, s - h)?;
            let d1 = (rp.cost - rm.cost) / (2.0 * h);
            let d2 = (rp.d_cost - rm.d_cost) / (2.0 * h);
            worst = worst.max((d1 - r.d_cost).abs() / 1e-6f64.max(1e-4 * r.d_cost.abs()));
            worst = worst.max((d2 - r.d2_cost).abs() / 1e-6f64.max(1e-4 * r.d2_cost.abs()));
        }
    }
    Ok(CheckOutcome {
        name: "reduced cost derivatives vs finite differences",
        passed: worst <= 1.0,
        detail: format!(
            "{} scenarios, worst error/tolerance {worst:.3e}",
            scenarios.len()
        ),
    })
}

/// `∫_0^x θ e^{-cθ} dθ`.
fn theta_exp_integral(c: f64, x: f64) -> f64 {
    (1.0 - (-c * x).exp() * (1.0 + c * x)) / (c * c)
}

fn example_closed_forms(scenarios: &[ScenarioConfig]) -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for c in scenarios {
        let (p, example) = match &c.y0 {
            InitialSpec::Example1(p) => (*p, 1),
            InitialSpec::Example2(p) => (*p, 2),
            InitialSpec::Modes(_) => continue,
        };
        let problem = c.build()?;
        let j0 = p.j0 as f64;
        for s in log_grid(0.1, 3.0, 16) {
            let a = j0.powf(2.0 * s);
            let x = a * c.horizon;
            let integral = match example {
                1 => theta_exp_integral(2.0, x),
                _ => theta_exp_integral(2.0, x) - theta_exp_integral(1.0, x),
            };
            let expected = -2.0 * p.epsilon * p.epsilon * j0.powf(-2.0 * s) * j0.ln() * integral;
            let m = problem
                .scenario
                .state
                .misfit_and_derivatives(&problem.scenario.target, s)?;
            let err = (m.gradient - expected).abs() / expected.abs().max(1e-300);
            worst = worst.max(if expected == 0.0 {
                m.gradient.abs()
            } else {
                err
            });
            count += 1;
        }
    }
    Ok(CheckOutcome {
        name: "example gradients vs closed forms",
        passed: worst <= 1e-8,
        detail: format!("{count} points, worst relative error {worst:.3e}"),
    })
}

fn natural_exponent(config: &ScenarioConfig) -> Result<f64> {
    let mut degenerate = config.clone();
    degenerate.y0 = match &config.y0 {
        InitialSpec::Example1(p) => {
            InitialSpec::Example1(crate::config::PresetParams { epsilon: 0.0, ..*p })
        }
        InitialSpec::Example2(p) => {
            InitialSpec::Example2(crate::config::PresetParams { epsilon: 0.0, ..*p })
        }
        other => other.clone(),
    };
    let p = degenerate.build()?;
    Ok(solve(&p.scenario, &p.penalty, &p.optimizer)?.s_star)
}

/// Placement of `s̄` relative to the penalty minimizer `s0`. A perturbation
/// in mode `j0 = 1` has `ln λ = 0` and leaves `s̄ = s0`.
fn ordering(scenarios: &[ScenarioConfig]) -> Result<CheckOutcome> {
    let mut bad = Vec::new();
    for c in scenarios {
        let (p, example) = match &c.y0 {
            InitialSpec::Example1(p) => (*p, 1),
            InitialSpec::Example2(p) => (*p, 2),
            InitialSpec::Modes(_) => continue,
        };
        let problem = c.build()?;
        let s_bar = solve(&problem.scenario, &problem.penalty, &problem.optimizer)?.s_star;
        let s0 = natural_exponent(c)?;
        let ok = if p.j0 == 1 {
            (s_bar - s0).abs() <= 1e-8
        } else if example == 1 {
            s_bar > s0
        } else {
            s_bar < s0
        };
        if !ok {
            bad.push(c.label(0));
        }
    }
    Ok(CheckOutcome {
        name: "ordering of optima against the natural exponent",
        passed: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("{} scenarios", scenarios.len())
        } else {
            format!("violations: {}", bad.join(", "))
        },
    })
}

fn degenerate_reduction() -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for example in [1, 2] {
        for penalty in [
            PenaltyConfig::ExpOverS {},
            PenaltyConfig::Reciprocal { upper: 4.0 },
        ] {
            let c = ScenarioConfig::preset(example, 0.0, 2, penalty)?;
            let expected = match penalty {
                PenaltyConfig::ExpOverS {} => 1.0,
                PenaltyConfig::Reciprocal { upper } => upper / 2.0,
            };
            let p = c.build()?;
            let r = solve(&p.scenario, &p.penalty, &p.optimizer)?;
            worst = worst.max((r.s_star - expected).abs());
        }
    }
    Ok(CheckOutcome {
        name: "zero perturbation returns the penalty minimizer",
        passed: worst <= 1e-8,
        detail: format!("worst |s̄ - s0| = {worst:.3e}"),
    })
}

fn optimizer_convergence(scenarios: &[ScenarioConfig]) -> Result<CheckOutcome> {
    let mut worst_iters = 0;
    let mut bad = Vec::new();
    for c in scenarios {
        let p = c.build()?;
        let r = solve(&p.scenario, &p.penalty, &p.optimizer)?;
        worst_iters = worst_iters.max(r.newton_iterations);
        if r.verdict != Verdict::SecondOrderSufficient || r.newton_iterations > 15 {
            bad.push(c.label(0));
        }
    }
    Ok(CheckOutcome {
        name: "Newton convergence on built-in scenarios",
        passed: bad.is_empty(),
        detail: format!(
            "max {worst_iters} iterations; failures: {}",
            if bad.is_empty() {
                "none".into()
            } else {
                bad.join(", ")
            }
        ),
    })
}

fn energy(scenarios: &[ScenarioConfig]) -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for c in scenarios {
        let p = c.build()?;
        for s in log_grid(0.1, 3.0, 8) {
            let e = p.scenario.state.energy_diagnostic(s)?;
            worst = worst.max(e.lhs / e.rhs);
        }
    }
    Ok(CheckOutcome {
        name: "energy estimate",
        passed: worst <= 1.0 + 1e-8,
        detail: format!("worst lhs/rhs {worst:.12}"),
    })
}

fn sensitivity_bounds(scenarios: &[ScenarioConfig]) -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for c in scenarios {
        let p = c.build()?;
        let bound = p.scenario.state.sensitivity_bound_constant();
        for s in log_grid(0.05, 4.0, 32) {
            let (n1, n2) = p.scenario.state.sensitivity_norms(s)?;
            worst = worst.max(s * n1 / bound).max(s * s * n2 / bound);
        }
    }
    Ok(CheckOutcome {
        name: "sensitivity norms within the s^-k envelope",
        passed: worst <= 1.0,
        detail: format!("worst ratio to the envelope {worst:.3e}"),
    })
}

fn determinism() -> Result<CheckOutcome> {
    let c = ScenarioConfig::preset(1, 0.5, 2, PenaltyConfig::ExpOverS {})?;
    let a = run(&c)?;
    let b = run(&c)?;
    let same = cost_curve_csv(&a.cost_curve) == cost_curve_csv(&b.cost_curve)
        && trace_csv(&a.report) == trace_csv(&b.report);
    Ok(CheckOutcome {
        name: "repeated runs are identical",
        passed: same,
        detail: "cost curve and trace compared byte for byte".into(),
    })
}

type Check<'a> = (&'static str, Box<dyn Fn() -> Result<CheckOutcome> + 'a>);

/// Runs every check; an error inside a check is reported as a failure.
pub fn run_checks() -> Vec<CheckOutcome> {
    let scenarios = builtin_scenarios();
    let checks: Vec<Check<'_>> = vec![
        ("kernel derivatives", Box::new(kernel_derivatives)),
        ("kernel bounds", Box::new(kernel_bounds)),
        (
            "reduced cost derivatives",
            Box::new(|| reduced_cost_derivatives(&scenarios)),
        ),
        (
            "example closed forms",
            Box::new(|| example_closed_forms(&scenarios)),
        ),
        ("ordering", Box::new(|| ordering(&scenarios))),
        ("degenerate reduction", Box::new(degenerate_reduction)),
        ("optimizer", Box::new(|| optimizer_convergence(&scenarios))),
        ("energy", Box::new(|| energy(&scenarios))),
        ("sensitivity", Box::new(|| sensitivity_bounds(&scenarios))),
        ("determinism", Box::new(determinism)),
    ];
    checks
        .into_iter()
        .map(|(name, check)| {
            check().unwrap_or_else(|e| CheckOutcome {
                name,
                passed: false,
                detail: format!("error: {e}"),
            })
        })
        .collect()
}
