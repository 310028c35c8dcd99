//! Mode-by-mode evaluation of the state `y(s)`, its s-sensitivities and the
//! time-integrated quantities built from them.
//!
//! Each coefficient follows the Duhamel formula
//!
//! ```text
//! y_j(t, s) = ⟨y0, e_j⟩ E_{λ_j, t}(s) + ∫_0^t f_j(τ) E_{λ_j, t-τ}(s) dτ
//! ```
//!
//! and `∂_s^k y_j` replaces `E` by its k-th s-derivative. The forcing integral
//! is closed-form for zero and constant-in-time forcing and uses composite
//! Gauss–Legendre quadrature for sampled forcing.

use crate::basis::{EigenBasis, SpectralField};
use crate::error::{Error, Result};
use crate::kernel::{bound_constants, ModeRate};
use crate::numerics::{decay_moment, integrate, KahanSum, QuadratureRule};

/// Decay-scale multiples `c` at which `[0, T]` is split (`t = c / λ^s`).
const DECAY_BREAKS: [f64; 5] = [0.5, 2.0, 8.0, 32.0, 128.0];

/// Time dependence of a spectral quantity (forcing or tracking target).
#[derive(Debug, Clone, PartialEq)]
pub enum TimeSignal {
    Zero,
    /// One coefficient per mode position, constant in time.
    Constant(Vec<f64>),
    /// Values per mode position per node, linearly interpolated in time.
    Sampled {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

/// One mode's view of a [`TimeSignal`].
#[derive(Debug, Clone, Copy)]
enum ModeSignal<'a> {
    Zero,
    Constant(f64),
    Sampled { times: &'a [f64], values: &'a [f64] },
}

impl ModeSignal<'_> {
    fn at(&self, t: f64) -> f64 {
        match *self {
            ModeSignal::Zero => 0.0,
            ModeSignal::Constant(c) => c,
            ModeSignal::Sampled { times, values } => interpolate(times, values, t),
        }
    }

    fn is_zero(&self) -> bool {
        match *self {
            ModeSignal::Zero => true,
            ModeSignal::Constant(c) => c == 0.0,
            ModeSignal::Sampled { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    fn nodes(&self) -> &[f64] {
        match *self {
            ModeSignal::Sampled { times, .. } => times,
            _ => &[],
        }
    }
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    let n = times.len();
    if t <= times[0] {
        return values[0];
    }
    if t >= times[n - 1] {
        return values[n - 1];
    }
    let k = times.partition_point(|&x| x <= t);
    let (t0, t1) = (times[k - 1], times[k]);
    let w = (t - t0) / (t1 - t0);
    values[k - 1] + w * (values[k] - values[k - 1])
}

impl TimeSignal {
    /// Checks shape against `j_max` modes and coverage of `[0, horizon]`.
    pub fn validate(&self, j_max: usize, horizon: f64) -> Result<()> {
        match self {
            TimeSignal::Zero => Ok(()),
            TimeSignal::Constant(c) => {
                if c.len() != j_max {
                    return Err(Error::BasisMismatch(format!(
                        "constant signal has {} modes, basis has {j_max}",
                        c.len()
                    )));
                }
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("time signal"));
                }
                Ok(())
            }
            TimeSignal::Sampled { times, values } => {
                if times.len() < 2 {
                    return Err(Error::invalid("times", "need at least two nodes"));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::invalid("times", "must be strictly increasing"));
                }
                if times[0] > 0.0 || *times.last().unwrap() < horizon {
                    return Err(Error::invalid(
                        "times",
                        format!(
                            "must span [0, {horizon}], got [{}, {}]",
                            times[0],
                            times.last().unwrap()
                        ),
                    ));
                }
                if values.len() != j_max {
                    return Err(Error::BasisMismatch(format!(
                        "sampled signal has {} modes, basis has {j_max}",
                        values.len()
                    )));
                }
                for row in values {
                    if row.len() != times.len() {
                        return Err(Error::invalid(
                            "values",
                            "each mode needs one value per node",
                        ));
                    }
                    if row.iter().any(|v| !v.is_finite()) {
                        return Err(Error::NonFinite("time signal"));
                    }
                }
                Ok(())
            }
        }
    }

    fn mode(&self, pos: usize) -> ModeSignal<'_> {
        match self {
            TimeSignal::Zero => ModeSignal::Zero,
            TimeSignal::Constant(c) => ModeSignal::Constant(c[pos]),
            TimeSignal::Sampled { times, values } => ModeSignal::Sampled {
                times,
                values: &values[pos],
            },
        }
    }

    /// Value of mode `pos` at time `t`.
    pub fn value(&self, pos: usize, t: f64) -> f64 {
        self.mode(pos).at(t)
    }

    /// `sup_t |f_j(t)|` for mode `pos` (exact for piecewise-linear data).
    pub fn sup_abs(&self, pos: usize) -> f64 {
        match self.mode(pos) {
            ModeSignal::Zero => 0.0,
            ModeSignal::Constant(c) => c.abs(),
            ModeSignal::Sampled { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    pub fn is_zero_mode(&self, pos: usize) -> bool {
        self.mode(pos).is_zero()
    }
}

/// `(J0, G, H)`: tracking misfit and its first two s-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Misfit {
    pub tracking: f64,
    pub gradient: f64,
    pub hessian: f64,
}

/// Both sides of the energy estimate.
///
/// `lhs = ‖∂_t y‖²_{L²(Q)} + ‖y(T)‖²_{H^{s/2}} + ‖y‖²_{L²(0,T;H^s)}` is the
/// quantity the per-mode energy identity controls (it is nondecreasing in the
/// final time, so this is also its supremum over `[0, T]`).
/// `sup_form_lhs` replaces `‖y(T)‖` by `sup_t ‖y(t)‖`; it is only bounded by
/// `2 · rhs` in general.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyDiagnostic {
    pub lhs: f64,
    pub rhs: f64,
    pub sup_form_lhs: f64,
}

/// Problem data for the state equation in a fixed basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEval {
    basis: EigenBasis,
    y0: SpectralField,
    forcing: TimeSignal,
    horizon: f64,
    rule: QuadratureRule,
}

impl StateEval {
    pub fn new(
        basis: EigenBasis,
        y0: SpectralField,
        forcing: TimeSignal,
        horizon: f64,
    ) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid(
                "T",
                format!("must be positive, got {horizon}"),
            ));
        }
        basis.check_len(&y0)?;
        forcing.validate(basis.j_max(), horizon)?;
        Ok(Self {
            basis,
            y0,
            forcing,
            horizon,
            rule: QuadratureRule::default(),
        })
    }

    pub fn basis(&self) -> &EigenBasis {
        &self.basis
    }

    pub fn y0(&self) -> &SpectralField {
        &self.y0
    }

    pub fn forcing(&self) -> &TimeSignal {
        &self.forcing
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn check_args(&self, pos: usize, s: f64) -> Result<()> {
        if pos >= self.basis.j_max() {
            return Err(Error::ModeOutOfRange {
                index: pos,
                len: self.basis.j_max(),
            });
        }
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::invalid("s", format!("must be positive, got {s}")));
        }
        Ok(())
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::invalid(
                "t",
                format!("must lie in [0, {}], got {t}", self.horizon),
            ));
        }
        Ok(())
    }

    /// Evaluation handle for mode `pos` at order `s`.
    pub fn trajectory(&self, pos: usize, s: f64) -> Result<ModeTrajectory<'_>> {
        self.check_args(pos, s)?;
        Ok(ModeTrajectory {
            state: self,
            pos,
            rate: ModeRate::new(self.basis.modes()[pos].lambda, s),
        })
    }

    /// `y_j(t, s)` for the mode stored at `pos`.
    pub fn solve_mode(&self, pos: usize, s: f64, t: f64) -> Result<f64> {
        self.check_time(t)?;
        self.trajectory(pos, s)?.y(t)
    }

    /// `∂_s y_j` (order 1) or `∂²_ss y_j` (order 2).
    pub fn sensitivity_mode(&self, pos: usize, s: f64, t: f64, order: u8) -> Result<f64> {
        self.check_time(t)?;
        let traj = self.trajectory(pos, s)?;
        match order {
            1 => traj.dy_ds(t),
            2 => traj.d2y_ds2(t),
            _ => Err(Error::invalid(
                "order",
                format!("must be 1 or 2, got {order}"),
            )),
        }
    }

    fn breakpoints(&self, rate: &ModeRate, extra: &[&[f64]]) -> Vec<f64> {
        let mut cuts: Vec<f64> = if rate.rate > 0.0 {
            DECAY_BREAKS.iter().map(|c| c / rate.rate).collect()
        } else {
            Vec::new()
        };
        for nodes in extra {
            cuts.extend_from_slice(nodes);
        }
        cuts
    }

    /// Tracking misfit `J0 = ½‖y(s) − y_Q‖²_{L²(Q)}` with its first and
    /// second s-derivatives. Space integrals collapse by Parseval; modes are
    /// summed in ascending order with compensated accumulation.
    pub fn misfit_and_derivatives(&self, target: &TimeSignal, s: f64) -> Result<Misfit> {
        target
            .validate(self.basis.j_max(), self.horizon)
            .map_err(|e| match e {
                Error::BasisMismatch(m) => Error::BasisMismatch(format!("target: {m}")),
                e => e,
            })?;
        let mut sums = [KahanSum::new(); 3];
        for pos in 0..self.basis.j_max() {
            let target_mode = target.mode(pos);
            if self.y0.get(pos) == 0.0 && self.forcing.is_zero_mode(pos) && target_mode.is_zero() {
                continue;
            }
            let traj = self.trajectory(pos, s)?;
            let cuts = self.breakpoints(
                &traj.rate,
                &[self.forcing.mode(pos).nodes(), target_mode.nodes()],
            );
            let mut failure = None;
            let parts = integrate(
                |t| match traj.values(t, 2) {
                    Ok([y, dy, d2y]) => {
                        let r = y - target_mode.at(t);
                        [0.5 * r * r, r * dy, dy * dy + r * d2y]
                    }
                    Err(e) => {
                        failure.get_or_insert(e);
                        [0.0; 3]
                    }
                },
                0.0,
                self.horizon,
                &cuts,
                self.rule,
            )?;
            if let Some(e) = failure {
                return Err(e);
            }
            for (acc, v) in sums.iter_mut().zip(parts) {
                acc.add(v);
            }
        }
        Ok(Misfit {
            tracking: sums[0].value(),
            gradient: sums[1].value(),
            hessian: sums[2].value(),
        })
    }

    /// `(‖∂_s y(s)‖_{L²(Q)}, ‖∂²_ss y(s)‖_{L²(Q)})`.
    pub fn sensitivity_norms(&self, s: f64) -> Result<(f64, f64)> {
        let mut sums = [KahanSum::new(); 2];
        for pos in 0..self.basis.j_max() {
            if self.y0.get(pos) == 0.0 && self.forcing.is_zero_mode(pos) {
                continue;
            }
            let traj = self.trajectory(pos, s)?;
            if traj.rate.is_s_independent() {
                continue;
            }
            let cuts = self.breakpoints(&traj.rate, &[self.forcing.mode(pos).nodes()]);
            let mut failure = None;
            let parts = integrate(
                |t| match traj.values(t, 2) {
                    Ok([_, dy, d2y]) => [dy * dy, d2y * d2y],
                    Err(e) => {
                        failure.get_or_insert(e);
                        [0.0; 2]
                    }
                },
                0.0,
                self.horizon,
                &cuts,
                self.rule,
            )?;
            if let Some(e) = failure {
                return Err(e);
            }
            sums[0].add(parts[0]);
            sums[1].add(parts[1]);
        }
        Ok((sums[0].value().sqrt(), sums[1].value().sqrt()))
    }

    /// A constant `Ĉ4` with `‖∂_s y(s)‖ ≤ Ĉ4/s` and `‖∂²_ss y(s)‖ ≤ Ĉ4/s²`
    /// for every `s > 0`, assembled from the kernel bound constants, `‖y0‖`,
    /// the mode-wise forcing suprema and `T`.
    pub fn sensitivity_bound_constant(&self) -> f64 {
        let c = bound_constants();
        let t = self.horizon;
        let y0 = self.y0.l2_norm();
        let f_sup = (0..self.basis.j_max())
            .map(|pos| self.forcing.sup_abs(pos).powi(2))
            .sum::<f64>()
            .sqrt();
        let i = |m: u32| abs_log_moment(m, t);
        let a1 = (i(0) + 2.0 * i(1) + i(2)).sqrt();
        let b1 = i(0) + i(1);
        let a2 = (i(0) + 2.0 * i(2) + i(4)).sqrt();
        let b2 = i(0) + i(2);
        let first = c.c_hat[1] * (y0 * a1 + t.sqrt() * f_sup * b1);
        let second = c.c_hat[2] * (y0 * a2 + t.sqrt() * f_sup * b2);
        first.max(second)
    }

    /// Both sides of the energy estimate at order `s`.
    pub fn energy_diagnostic(&self, s: f64) -> Result<EnergyDiagnostic> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::invalid("s", format!("must be positive, got {s}")));
        }
        let t_end = self.horizon;
        let mut integrals = KahanSum::new();
        let mut terminal = KahanSum::new();
        let mut rhs = KahanSum::new();
        let mut sup_grid: Vec<f64> = (0..=512).map(|k| t_end * k as f64 / 512.0).collect();
        let mut active = Vec::new();
        for pos in 0..self.basis.j_max() {
            let forcing = self.forcing.mode(pos);
            let f_sup = self.forcing.sup_abs(pos);
            rhs.add(t_end * f_sup * f_sup);
            let traj = self.trajectory(pos, s)?;
            let a = traj.rate.rate;
            let y0 = self.y0.get(pos);
            if y0 != 0.0 {
                rhs.add(a * y0 * y0);
            }
            if y0 == 0.0 && forcing.is_zero() {
                continue;
            }
            active.push(pos);
            let cuts = self.breakpoints(&traj.rate, &[forcing.nodes()]);
            sup_grid.extend(cuts.iter().copied().filter(|c| *c > 0.0 && *c < t_end));
            let mut failure = None;
            let parts = integrate(
                |t| match traj.values(t, 0) {
                    Ok([y, ..]) => {
                        let ay = if a == 0.0 { 0.0 } else { a * y };
                        let dt = forcing.at(t) - ay;
                        [dt * dt, ay * ay]
                    }
                    Err(e) => {
                        failure.get_or_insert(e);
                        [0.0; 2]
                    }
                },
                0.0,
                t_end,
                &cuts,
                self.rule,
            )?;
            if let Some(e) = failure {
                return Err(e);
            }
            integrals.add(parts[0]);
            integrals.add(parts[1]);
            if a != 0.0 {
                let y_end = traj.y(t_end)?;
                terminal.add(a * y_end * y_end);
            }
        }
        let mut sup_energy = 0.0f64;
        for &t in &sup_grid {
            let mut e = KahanSum::new();
            for &pos in &active {
                let traj = self.trajectory(pos, s)?;
                if traj.rate.rate != 0.0 {
                    let y = traj.y(t)?;
                    e.add(traj.rate.rate * y * y);
                }
            }
            sup_energy = sup_energy.max(e.value());
        }
        Ok(EnergyDiagnostic {
            lhs: integrals.value() + terminal.value(),
            rhs: rhs.value(),
            sup_form_lhs: integrals.value() + sup_energy,
        })
    }

    /// Reconstructs `y(s)(x, t)` on the points `xs`.
    pub fn snapshot(&self, s: f64, t: f64, xs: &[f64]) -> Result<Vec<f64>> {
        self.check_time(t)?;
        let coeffs = (0..self.basis.j_max())
            .map(|pos| self.trajectory(pos, s)?.y(t))
            .collect::<Result<Vec<_>>>()?;
        self.basis.reconstruct(&SpectralField::new(coeffs)?, xs)
    }
}

/// `∫_0^T |ln t|^m dt` in closed form.
pub fn abs_log_moment(m: u32, t_end: f64) -> f64 {
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    let mf = fact(m);
    let log_t = t_end.ln();
    if t_end <= 1.0 {
        let u = -log_t;
        let series: f64 = (0..=m).map(|k| u.powi(k as i32) / fact(k)).sum();
        t_end * mf * series
    } else {
        let upper: f64 = (0..=m)
            .map(|k| {
                let sign = if (m - k).is_multiple_of(2) { 1.0 } else { -1.0 };
                sign * mf / fact(k) * log_t.powi(k as i32)
            })
            .sum();
        let lower = if m.is_multiple_of(2) { mf } else { -mf };
        mf + t_end * upper - lower
    }
}

/// Evaluation handle for one mode at a fixed order `s`.
#[derive(Debug, Clone, Copy)]
pub struct ModeTrajectory<'a> {
    state: &'a StateEval,
    pos: usize,
    rate: ModeRate,
}

impl ModeTrajectory<'_> {
    pub fn y(&self, t: f64) -> Result<f64> {
        Ok(self.values(t, 0)?[0])
    }

    pub fn dy_ds(&self, t: f64) -> Result<f64> {
        Ok(self.values(t, 1)?[1])
    }

    pub fn d2y_ds2(&self, t: f64) -> Result<f64> {
        Ok(self.values(t, 2)?[2])
    }

    pub fn rate(&self) -> ModeRate {
        self.rate
    }

    /// `[y, ∂_s y, ∂²_ss y]` at time `t`; entries above `order` are zero.
    pub fn values(&self, t: f64, order: u8) -> Result<[f64; 3]> {
        let y0 = self.state.y0.get(self.pos);
        let k = self.rate.eval(t, order);
        let mut out = [y0 * k.value, y0 * k.d1, y0 * k.d2];
        let forced = self.forced(t, order)?;
        for (o, f) in out.iter_mut().zip(forced) {
            *o += f;
        }
        Ok(out)
    }

    /// Duhamel forcing contribution `∫_0^t f_j(τ) ∂_s^k E_{λ,t−τ}(s) dτ`.
    fn forced(&self, t: f64, order: u8) -> Result<[f64; 3]> {
        if t == 0.0 {
            return Ok([0.0; 3]);
        }
        match self.state.forcing.mode(self.pos) {
            ModeSignal::Zero => Ok([0.0; 3]),
            ModeSignal::Constant(c) => {
                if c == 0.0 {
                    return Ok([0.0; 3]);
                }
                let x = self.rate.rate * t;
                let l = self.rate.log_lambda;
                let w = c * t * decay_moment(0, x);
                if order == 0 || l == 0.0 {
                    return Ok([w, 0.0, 0.0]);
                }
                let h1 = decay_moment(1, x);
                let dw = -c * l * t * h1;
                let d2w = if order >= 2 {
                    c * l * l * t * (decay_moment(2, x) - h1)
                } else {
                    0.0
                };
                Ok([w, dw, d2w])
            }
            signal @ ModeSignal::Sampled { times, .. } => {
                if signal.is_zero() {
                    return Ok([0.0; 3]);
                }
                let mut cuts: Vec<f64> = times.to_vec();
                if self.rate.rate > 0.0 {
                    cuts.extend(DECAY_BREAKS.iter().map(|c| t - c / self.rate.rate));
                }
                let rate = self.rate;
                integrate(
                    |tau| {
                        let f = signal.at(tau);
                        let k = rate.eval(t - tau, order);
                        [f * k.value, f * k.d1, f * k.d2]
                    },
                    0.0,
                    t,
                    &cuts,
                    self.state.rule,
                )
            }
        }
    }
}
