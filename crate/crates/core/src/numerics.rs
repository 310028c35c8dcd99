//! Small numerical building blocks: compensated summation, composite
//! Gauss–Legendre and Simpson quadrature, golden-section search and the
//! `x^k ∫_0^1 v^k e^{-xv} dv` family used by the closed-form time integrals.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Kahan–Babuška compensated accumulator. Summation order is the caller's
/// iteration order, so a fixed order gives bit-identical results.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = KahanSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

pub const GL_ORDER: usize = 8;

/// Nodes and weights of the 8-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre_8() -> &'static ([f64; GL_ORDER], [f64; GL_ORDER]) {
    static RULE: OnceLock<([f64; GL_ORDER], [f64; GL_ORDER])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        let mut nodes = [0.0; GL_ORDER];
        let mut weights = [0.0; GL_ORDER];
        for i in 0..n {
            // Chebyshev initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Controls for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureRule {
    pub initial_panels: usize,
    pub max_panels: usize,
    pub rel_tol: f64,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self {
            initial_panels: 8,
            max_panels: 1 << 13,
            rel_tol: 1e-11,
        }
    }
}

fn composite_gl<const N: usize, F>(f: &mut F, a: f64, b: f64, panels: usize) -> ([f64; N], [f64; N])
where
    F: FnMut(f64) -> [f64; N],
{
    let (nodes, weights) = gauss_legendre_8();
    let h = (b - a) / panels as f64;
    let mut sums = [KahanSum::new(); N];
    let mut abs_sums = [KahanSum::new(); N];
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for (x, w) in nodes.iter().zip(weights) {
            let values = f(mid + 0.5 * h * x);
            let scale = 0.5 * h * w;
            for k in 0..N {
                sums[k].add(scale * values[k]);
                abs_sums[k].add(scale * values[k].abs());
            }
        }
    }
    (sums.map(|s| s.value()), abs_sums.map(|s| s.value()))
}

/// Integrates a vector-valued function over `[a, b]`, split at the given
/// interior breakpoints. Each sub-interval uses composite 8-point
/// Gauss–Legendre with the panel count doubled until successive values agree
/// to `rel_tol` relative to the integral of `|f|` (per sub-interval, floored
/// at an even share of the whole-interval `|f|` integral).
pub fn integrate<const N: usize, F>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    rule: QuadratureRule,
) -> Result<[f64; N]>
where
    F: FnMut(f64) -> [f64; N],
{
    let mut cuts = Vec::with_capacity(breakpoints.len() + 2);
    cuts.push(a);
    let mut interior: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&c| c > a && c < b)
        .collect();
    interior.sort_by(f64::total_cmp);
    interior.dedup();
    cuts.extend(interior);
    cuts.push(b);

    // Coarse pass over every sub-interval fixes the global |f| scale, so a
    // sub-interval whose integrand is pure rounding noise far below the total
    // does not block convergence.
    let pieces: Vec<(f64, f64)> = cuts
        .windows(2)
        .map(|w| (w[0], w[1]))
        .filter(|(lo, hi)| hi > lo)
        .collect();
    let initial = rule.initial_panels.max(1);
    let coarse: Vec<([f64; N], [f64; N])> = pieces
        .iter()
        .map(|&(lo, hi)| composite_gl(&mut f, lo, hi, initial))
        .collect();
    let mut global_abs = [0.0; N];
    for (_, abs) in &coarse {
        for k in 0..N {
            global_abs[k] += abs[k];
        }
    }
    let share = 1.0 / pieces.len().max(1) as f64;

    let mut totals = [KahanSum::new(); N];
    for (&(lo, hi), &(mut prev, _)) in pieces.iter().zip(&coarse) {
        let mut panels = initial;
        loop {
            if panels * 2 > rule.max_panels {
                return Err(Error::QuadratureNonConvergence {
                    a: lo,
                    b: hi,
                    panels,
                });
            }
            panels *= 2;
            let (next, abs) = composite_gl(&mut f, lo, hi, panels);
            if !next.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("quadrature integrand"));
            }
            let converged = (0..N).all(|k| {
                let diff = (next[k] - prev[k]).abs();
                diff == 0.0 || diff <= rule.rel_tol * abs[k].max(share * global_abs[k])
            });
            prev = next;
            if converged {
                break;
            }
        }
        for k in 0..N {
            totals[k].add(prev[k]);
        }
    }
    Ok(totals.map(|t| t.value()))
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
) -> Result<f64> {
    integrate(|x| [f(x)], a, b, breakpoints, QuadratureRule::default()).map(|[v]| v)
}

/// Composite Simpson weights for `n` equispaced samples spanning an interval
/// of length `length`. An odd number of intervals closes with the 3/8 rule.
pub fn simpson_weights(n: usize, length: f64) -> Vec<f64> {
    assert!(n >= 4, "simpson_weights needs at least 4 samples");
    let intervals = n - 1;
    let h = length / intervals as f64;
    let mut w = vec![0.0; n];
    let simpson_intervals = if intervals.is_multiple_of(2) {
        intervals
    } else {
        intervals - 3
    };
    for i in (0..simpson_intervals).step_by(2) {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    if simpson_intervals < intervals {
        let i = simpson_intervals;
        w[i] += 3.0 * h / 8.0;
        w[i + 1] += 9.0 * h / 8.0;
        w[i + 2] += 9.0 * h / 8.0;
        w[i + 3] += 3.0 * h / 8.0;
    }
    w
}

/// Golden-section search for the minimum of a unimodal `f` on `[a, b]`.
/// Returns `(argmin, min)`.
pub fn golden_section_min<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (hi - lo).abs() <= tol * (1.0 + c.abs()) {
            break;
        }
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `h_k(x) = x^k ∫_0^1 v^k e^{-x v} dv` for k = 0, 1, 2, with `h_k(∞) = 0`
/// for k ≥ 1 and `h_0(∞) = 0` as well (the integral itself vanishes).
///
/// Then `∫_0^t u^k e^{-a u} du = t^{k+1} h_k(a t) / (a t)^k`, which is how the
/// constant-forcing Duhamel integrals are assembled without cancellation.
pub fn decay_moment(k: usize, x: f64) -> f64 {
    debug_assert!(k <= 2);
    if x.is_infinite() {
        return 0.0;
    }
    if x < 0.5 {
        // Σ_n (-x)^n / (n! (n + k + 1)), scaled by x^k.
        let mut term = 1.0;
        let mut acc = 0.0;
        for n in 0..40 {
            if n > 0 {
                term *= -x / n as f64;
            }
            let contrib = term / (n + k + 1) as f64;
            acc += contrib;
            if contrib.abs() < 1e-18 * acc.abs() {
                break;
            }
        }
        return acc * x.powi(k as i32);
    }
    let e = (-x).exp();
    match k {
        0 => -(-x).exp_m1() / x,
        1 => (1.0 - e * (1.0 + x)) / x,
        _ => (2.0 - e * (2.0 + 2.0 * x + x * x)) / x,
    }
}

/// Log-spaced grid of `n` points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}
