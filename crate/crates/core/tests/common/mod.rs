//! Independent reference computations for the integration tests. Nothing
//! here calls into the solver's numerics.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

/// Which of the two analytic example families a scenario belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// Neumann, `y0 = 1 + ε e_{j0}`, target `1`.
    Constant,
    /// Dirichlet, `y0 = ε e_{j0}`, target `ε e_{j0}`.
    Perturbed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pen {
    Exp,
    Rec(f64),
}

impl Pen {
    pub fn value(self, s: f64) -> f64 {
        match self {
            Pen::Exp => s.exp() / s,
            Pen::Rec(l) => 1.0 / (s * (l - s)),
        }
    }

    pub fn minimizer(self) -> f64 {
        match self {
            Pen::Exp => 1.0,
            Pen::Rec(l) => l / 2.0,
        }
    }

    pub fn scan_range(self) -> (f64, f64) {
        match self {
            Pen::Exp => (1e-3, 50.0),
            Pen::Rec(l) => (1e-3, l - 1e-3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Case {
    pub family: Family,
    pub eps: f64,
    pub j0: usize,
    pub horizon: f64,
    pub pen: Pen,
}

impl Case {
    /// Tracking term in closed form, `a = j0^{2s}`.
    pub fn tracking(&self, s: f64) -> f64 {
        let a = (self.j0 as f64).powf(2.0 * s);
        let t = self.horizon;
        let e2 = self.eps * self.eps;
        match self.family {
            Family::Constant => e2 * -(-2.0 * a * t).exp_m1() / (4.0 * a),
            Family::Perturbed => {
                0.5 * e2 * (t - 2.0 * -(-a * t).exp_m1() / a + -(-2.0 * a * t).exp_m1() / (2.0 * a))
            }
        }
    }

    pub fn cost(&self, s: f64) -> f64 {
        self.tracking(s) + self.pen.value(s)
    }

    /// `∫_0^{aT} θ w(θ) dθ` with the family's weight, by adaptive Simpson.
    pub fn gradient(&self, s: f64) -> f64 {
        let j0 = self.j0 as f64;
        if self.j0 == 1 {
            return 0.0;
        }
        // Both weights decay like e^{-θ}; past θ = 80 the tail is below 1e-32.
        let x = (j0.powf(2.0 * s) * self.horizon).min(80.0);
        let integral = match self.family {
            Family::Constant => adaptive_simpson(&|th: f64| th * (-2.0 * th).exp(), 0.0, x, 1e-12),
            Family::Perturbed => adaptive_simpson(
                &|th: f64| th * ((-th).exp() - 1.0) * (-th).exp(),
                0.0,
                x,
                1e-12,
            ),
        };
        -2.0 * self.eps * self.eps * j0.powf(-2.0 * s) * j0.ln() * integral
    }

    /// Energy left-hand side with zero forcing: `Σ λ^s y0²` over the
    /// perturbed mode.
    pub fn energy_lhs(&self, s: f64) -> f64 {
        (self.j0 as f64).powf(2.0 * s) * self.eps * self.eps
    }

    /// `‖∂_s y‖²_{L²(Q)} = (ε ℓ a)² ∫_0^T t² e^{-2at} dt`, `ℓ = ln λ`.
    pub fn sensitivity_sq(&self, s: f64) -> f64 {
        let lambda = (self.j0 * self.j0) as f64;
        let a = lambda.powf(s);
        let l = lambda.ln();
        let c = 2.0 * a;
        let t = self.horizon;
        let moment = (2.0 - (-c * t).exp() * (c * c * t * t + 2.0 * c * t + 2.0)) / (c * c * c);
        (self.eps * l * a).powi(2) * moment
    }
}

/// The built-in scenario grid, in the same order as the library's list.
pub fn builtin_cases() -> Vec<Case> {
    let mut out = Vec::new();
    for family in [Family::Constant, Family::Perturbed] {
        for eps in [0.1, 0.5] {
            for j0 in [1, 2, 5] {
                for pen in [Pen::Exp, Pen::Rec(4.0)] {
                    out.push(Case {
                        family,
                        eps,
                        j0,
                        horizon: 1.0,
                        pen,
                    });
                }
            }
        }
    }
    out
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    whole: f64,
    m: f64,
    fm: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (left, lm, flm) = simpson(f, a, fa, m, fm);
    let (right, rm, frm) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
        + simpson_rec(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
}

/// Adaptive Simpson with Richardson correction; the range is split at unit
/// intervals first so long decaying tails are resolved.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let pieces = ((b - a).ceil() as usize).clamp(1, 200);
    let mut total = 0.0;
    let mut c = 0.0;
    for k in 0..pieces {
        let lo = a + (b - a) * k as f64 / pieces as f64;
        let hi = a + (b - a) * (k + 1) as f64 / pieces as f64;
        let (flo, fhi) = (f(lo), f(hi));
        let (whole, m, fm) = simpson(f, lo, flo, hi, fhi);
        let piece = simpson_rec(f, lo, flo, hi, fhi, whole, m, fm, tol / pieces as f64, 50);
        // Neumaier summation.
        let t = total + piece;
        c += if total.abs() >= piece.abs() {
            (total - t) + piece
        } else {
            (piece - t) + total
        };
        total = t;
    }
    total + c
}

/// Argmin of `f` over a log grid, refined by trisection between the grid
/// neighbours.
pub fn dense_scan_argmin(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> f64 {
    let (l0, l1) = (lo.ln(), hi.ln());
    let grid: Vec<f64> = (0..points)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (points - 1) as f64).exp())
        .collect();
    let mut best = 0;
    let mut best_val = f(grid[0]);
    for (i, &s) in grid.iter().enumerate().skip(1) {
        let v = f(s);
        if v < best_val {
            best = i;
            best_val = v;
        }
    }
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(points - 1)];
    for _ in 0..200 {
        if b - a <= 1e-13 * b {
            break;
        }
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if f(m1) <= f(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    0.5 * (a + b)
}

/// `E`, `E'`, `E''` of `exp(-λ^s t)` in `s`, written out directly.
pub fn kernel_oracle(lambda: f64, t: f64, s: f64) -> [f64; 3] {
    if lambda == 0.0 {
        return [1.0, 0.0, 0.0];
    }
    let r = lambda.powf(s) * t;
    let e = (-r).exp();
    let l = lambda.ln();
    [e, -r * e * l, r * e * (r - 1.0) * l * l]
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_fracorder"))
}

pub fn write_file(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Every file under `dir`, relative path and contents, sorted.
pub fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}
