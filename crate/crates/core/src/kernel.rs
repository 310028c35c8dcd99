//! The decay kernel `E_{λ,t}(s) = exp(-λ^s t)` and its first three
//! derivatives in the fractional order `s`.
//!
//! With `r = λ^s t` and `ℓ = ln λ`:
//!
//! ```text
//! E'   = -r e^{-r} ℓ
//! E''  =  r e^{-r} (r - 1) ℓ²
//! E''' =  r e^{-r} (3r - 1 - r²) ℓ³
//! ```
//!
//! At `λ = 0` and `λ = 1` the map `s ↦ λ^s` is constant, so every
//! s-derivative is exactly zero there.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::numerics::{golden_section_min, log_grid};

/// Beyond this `r`, `e^{-r}` underflows in double precision.
const UNDERFLOW_EXPONENT: f64 = 745.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KernelEval {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl KernelEval {
    pub fn derivative(&self, order: u8) -> f64 {
        match order {
            0 => self.value,
            1 => self.d1,
            2 => self.d2,
            _ => self.d3,
        }
    }
}

/// Precomputed `λ^s` and `ln λ` for one eigenvalue at one `s`, shared by
/// every time evaluation of that mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeRate {
    /// `λ^s` (0 for λ = 0, possibly +∞ on overflow).
    pub rate: f64,
    /// `ln λ`, zero when the s-derivatives vanish identically (λ ∈ {0, 1}).
    pub log_lambda: f64,
}

impl ModeRate {
    pub fn new(lambda: f64, s: f64) -> Self {
        if lambda == 0.0 {
            return Self {
                rate: 0.0,
                log_lambda: 0.0,
            };
        }
        let log_lambda = lambda.ln();
        Self {
            rate: (s * log_lambda).exp(),
            log_lambda,
        }
    }

    /// Whether the s-derivatives are identically zero.
    pub fn is_s_independent(&self) -> bool {
        self.log_lambda == 0.0
    }

    /// Kernel at elapsed time `u ≥ 0`.
    #[inline]
    pub fn eval(&self, u: f64, order: u8) -> KernelEval {
        let r = self.rate * u;
        if r.is_nan() || r > UNDERFLOW_EXPONENT {
            // u = 0 with an infinite rate gives NaN; the kernel is 1 there.
            if u == 0.0 {
                return KernelEval {
                    value: 1.0,
                    ..KernelEval::default()
                };
            }
            return KernelEval::default();
        }
        let value = (-r).exp();
        if order == 0 || self.log_lambda == 0.0 {
            return KernelEval {
                value,
                ..KernelEval::default()
            };
        }
        let l = self.log_lambda;
        let p = r * value;
        let mut out = KernelEval {
            value,
            d1: -p * l,
            d2: 0.0,
            d3: 0.0,
        };
        if order >= 2 {
            out.d2 = p * (r - 1.0) * l * l;
        }
        if order >= 3 {
            out.d3 = p * (3.0 * r - 1.0 - r * r) * l * l * l;
        }
        out
    }
}

fn check_finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite, got {v}")))
    }
}

/// Evaluates `E_{λ,t}(s)` and its s-derivatives up to `order` (0..=3);
/// derivatives above `order` are left at zero.
pub fn eval_kernel(lambda: f64, t: f64, s: f64, order: u8) -> Result<KernelEval> {
    check_finite("lambda", lambda)?;
    check_finite("t", t)?;
    check_finite("s", s)?;
    if lambda < 0.0 {
        return Err(Error::invalid(
            "lambda",
            format!("must be nonnegative, got {lambda}"),
        ));
    }
    if t < 0.0 {
        return Err(Error::invalid("t", format!("must be nonnegative, got {t}")));
    }
    if s <= 0.0 {
        return Err(Error::invalid("s", format!("must be positive, got {s}")));
    }
    if order > 3 {
        return Err(Error::invalid(
            "order",
            format!("must be 0..=3, got {order}"),
        ));
    }
    Ok(ModeRate::new(lambda, s).eval(t, order))
}

/// Suprema over `r > 0` used to bound the kernel derivatives, and the
/// constants assembled from them:
/// `|E^{(k)}| ≤ s^{-k} Ĉ_k (1 + |ln t|^k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub m: [f64; 6],
    pub c_hat: [f64; 4],
}

impl BoundConstants {
    pub fn m(&self, i: usize) -> f64 {
        self.m[i - 1]
    }
}

type Profile = fn(f64) -> f64;

const PROFILES: [Profile; 6] = [
    |r| r * (-r).exp() * r.ln().abs(),
    |r| r * (-r).exp(),
    |r| r * (-r).exp() * (r - 1.0).abs() * 4.0 * r.ln().powi(2),
    |r| 4.0 * r * (-r).exp() * (r - 1.0).abs(),
    |r| r * (-r).exp() * (3.0 * r - 1.0 - r * r).abs() * 8.0 * r.ln().abs().powi(3),
    |r| 8.0 * r * (-r).exp() * (3.0 * r - 1.0 - r * r).abs(),
];

/// Relative inflation applied to scanned suprema so they bound from above.
const ENVELOPE_SLACK: f64 = 1e-9;

fn scan_supremum(profile: Profile) -> f64 {
    let grid = log_grid(1e-12, 1e3, 20_001);
    let (best, _) = grid.iter().enumerate().map(|(i, &r)| (i, profile(r))).fold(
        (0, f64::NEG_INFINITY),
        |acc, cur| if cur.1 > acc.1 { cur } else { acc },
    );
    let lo = grid[best.saturating_sub(1)].ln();
    let hi = grid[(best + 1).min(grid.len() - 1)].ln();
    let (_, neg) = golden_section_min(|x| -profile(x.exp()), lo, hi, 1e-12, 500);
    let refined = (-neg).max(profile(grid[best]));
    refined * (1.0 + ENVELOPE_SLACK)
}

/// The constants are scanned once per process and cached.
pub fn bound_constants() -> &'static BoundConstants {
    static CACHE: OnceLock<BoundConstants> = OnceLock::new();
    CACHE.get_or_init(|| {
        let m = PROFILES.map(scan_supremum);
        BoundConstants {
            m,
            c_hat: [1.0, m[0] + m[1], m[2] + m[3], m[4] + m[5]],
        }
    })
}

/// Checks the three derivative bounds at one point.
pub fn check_bounds(lambda: f64, t: f64, s: f64) -> Result<bool> {
    if t == 0.0 {
        return Err(Error::invalid(
            "t",
            "bounds involve |ln t|; t must be positive",
        ));
    }
    let k = eval_kernel(lambda, t, s, 3)?;
    let c = bound_constants();
    let log_t = t.ln().abs();
    let value_ok = k.value.abs() <= c.c_hat[0];
    let derivs_ok = (1..=3).all(|order| {
        let bound = s.powi(-(order as i32)) * c.c_hat[order] * (1.0 + log_t.powi(order as i32));
        k.derivative(order as u8).abs() <= bound
    });
    Ok(value_ok && derivs_ok)
}
