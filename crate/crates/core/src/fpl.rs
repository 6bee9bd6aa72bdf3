//! First-iterate ("fixed-point-like") portfolio dynamics of a trader facing a
//! reservoir with constant frequencies, driven by the classical price
//! `P_c(t) = M + (O - M) sin²(λt)`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{expectation, lower, FockSpace, LadderKind, MatrixOperator, ModeLabel, NumberState};
use crate::numerics::quadrature::{self, Tolerance};
use crate::price_ladder::{cash_power_op, factorial_weight, FactorialKind};
use crate::timeseries::{check_times, csv_columns, TimeSeries};

#[derive(Debug, Clone, PartialEq)]
pub struct FplParams {
    pub m: u32,
    pub o: u32,
    pub lam: f64,
    pub omega_a: f64,
    pub omega_c: f64,
    /// Ω_A, constant over the reservoir.
    pub big_omega_a: f64,
    /// Ω_C, constant over the reservoir.
    pub big_omega_c: f64,
    /// System shares and cash.
    pub n: u32,
    pub k: u32,
    /// Shares `n'` and cash `k_o` of the single reservoir trader.
    pub n_res: u32,
    pub k_res: u32,
    pub f: Complex64,
    /// Explicit `(ω(1), ω(2))`; when absent they follow from the occupations.
    pub weights: Option<(f64, f64)>,
    /// Supply-side constants of the price oscillator. The preset ties
    /// `ω_p = Σ|g|² = Ω_O = λ`; `P_c` always uses `λ`.
    pub omega_p: f64,
    pub big_omega_o: f64,
    pub g_norm_sq: f64,
}

impl FplParams {
    /// Reference parameter sets 1 to 4 (the `fig1`..`fig4` presets) with the given
    /// `(ω(1), ω(2))`. Figure 2 is Figure 1 with `n = 5`. The initial cash
    /// does not enter `δΠ` and is set to 10.
    pub fn figure(figure: u8, w1: f64, w2: f64) -> Result<Self> {
        let base = FplParams {
            m: 1,
            o: 2,
            lam: 1.0,
            omega_a: 1.0,
            omega_c: 1.0,
            big_omega_a: 2.0,
            big_omega_c: 2.0,
            n: 10,
            k: 10,
            n_res: 10,
            k_res: 10,
            f: Complex64::new(1.0, 0.0),
            weights: Some((w1, w2)),
            omega_p: 1.0,
            big_omega_o: 1.0,
            g_norm_sq: 1.0,
        };
        match figure {
            1 => Ok(base),
            2 => Ok(FplParams { n: 5, ..base }),
            3 => Ok(FplParams { m: 2, o: 1, ..base }),
            4 => Ok(FplParams {
                omega_a: 2.0,
                omega_c: 2.0,
                big_omega_a: 1.0,
                big_omega_c: 1.0,
                ..base
            }),
            _ => Err(Error::InvalidParams(format!("no figure preset {figure}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let reals = [
            self.lam,
            self.omega_a,
            self.omega_c,
            self.big_omega_a,
            self.big_omega_c,
        ];
        if reals.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidParams(
                "λ and the frequencies must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    /// Whether the supply constants sit in the tied regime `ω_p = Σ|g|² = Ω_O = λ`.
    pub fn in_tied_regime(&self) -> bool {
        [self.omega_p, self.big_omega_o, self.g_norm_sq]
            .iter()
            .all(|x| (x - self.lam).abs() <= 1e-12 * self.lam.max(1.0))
    }

    pub fn price(&self, t: f64) -> f64 {
        let (m, o) = (f64::from(self.m), f64::from(self.o));
        m + (o - m) * (self.lam * t).sin().powi(2)
    }

    /// `(α, β, α̃, β̃)`; `β` needs `λ > 0`.
    pub fn phase_coefficients(&self) -> Result<(f64, f64, f64, f64)> {
        if self.lam <= 0.0 {
            return Err(Error::Degenerate(
                "β is undefined at λ = 0; use the λ = 0 branch of trajectory".into(),
            ));
        }
        let (m, o) = (f64::from(self.m), f64::from(self.o));
        Ok((
            0.5 * ((m + o) * self.omega_c - 2.0 * self.omega_a),
            self.omega_c * (m - o) / (4.0 * self.lam),
            0.5 * ((m + o) * self.big_omega_c - 2.0 * self.big_omega_a),
            self.big_omega_c * (m - o) / (4.0 * self.lam),
        ))
    }
}

/// `(χ(t), χ̃(t))` with `χ = αt + β sin(2λt)`.
pub fn phases(t: f64, p: &FplParams) -> Result<(f64, f64)> {
    let (a, b, at, bt) = p.phase_coefficients()?;
    let s = (2.0 * p.lam * t).sin();
    Ok((a * t + b * s, at * t + bt * s))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Etas {
    pub eta1: Complex64,
    pub eta2: Complex64,
    pub eta1_tilde: Complex64,
    pub eta2_tilde: Complex64,
}

/// `η1 = e^{iχ}`, `η̃1 = e^{iχ̃}` (their integrands are exact derivatives),
/// `η2 = iλ ∫ e^{iχ̃}`, `η̃2 = iλ ∫ e^{iχ}`.
pub fn eta_functions(t: f64, p: &FplParams) -> Result<Etas> {
    if t < 0.0 {
        return Err(Error::InvalidTimeGrid);
    }
    let tol = Tolerance::default();
    let (chi, chit) = phases(t, p)?;
    let i_lam = Complex64::new(0.0, p.lam);
    let e_chi = |s: f64| Complex64::from_polar(1.0, phases(s, p).map_or(0.0, |x| x.0));
    let e_chit = |s: f64| Complex64::from_polar(1.0, phases(s, p).map_or(0.0, |x| x.1));
    Ok(Etas {
        eta1: Complex64::from_polar(1.0, chi),
        eta2: i_lam * quadrature::integrate(e_chit, 0.0, t, tol)?,
        eta1_tilde: Complex64::from_polar(1.0, chit),
        eta2_tilde: i_lam * quadrature::integrate(e_chi, 0.0, t, tol)?,
    })
}

/// `η1(t) = 1 + i ∫ (P_c ω_c - ω_a) e^{iχ}` evaluated by quadrature, for
/// checking the closed form.
pub fn eta1_by_quadrature(t: f64, p: &FplParams) -> Result<Complex64> {
    let integrand = |s: f64| {
        let chi = phases(s, p).map_or(0.0, |x| x.0);
        Complex64::new(0.0, p.price(s) * p.omega_c - p.omega_a) * Complex64::from_polar(1.0, chi)
    };
    Ok(1.0 + quadrature::integrate(integrand, 0.0, t, Tolerance::default())?)
}

/// `(ω(1), ω(2))` for a single reservoir trader:
/// `ω(1) = |f|² (1+n) k^(-M) [n' k_o^(+M) - (1+n') k_o^(-M)]`,
/// `ω(2) = |f|² (1+n') k_o^(-M) [n k^(+M) - (1+n) k^(-M)]`.
pub fn omega_coefficients(p: &FplParams) -> (f64, f64) {
    if let Some(w) = p.weights {
        return w;
    }
    let m = u64::from(p.m);
    let fall = |k: u32| factorial_weight(u64::from(k), m, FactorialKind::Falling);
    let rise = |k: u32| factorial_weight(u64::from(k), m, FactorialKind::Rising);
    let (n, nr) = (f64::from(p.n), f64::from(p.n_res));
    let f2 = p.f.norm_sqr();
    (
        f2 * (1.0 + n) * fall(p.k) * (nr * rise(p.k_res) - (1.0 + nr) * fall(p.k_res)),
        f2 * (1.0 + nr) * fall(p.k_res) * (n * rise(p.k) - (1.0 + n) * fall(p.k)),
    )
}

pub fn r_of_t(t: f64, p: &FplParams) -> Result<Complex64> {
    let (w1, w2) = omega_coefficients(p);
    let e = eta_functions(t, p)?;
    Ok(w1 * e.eta1 * e.eta2_tilde.conj() + w2 * e.eta2 * e.eta1_tilde.conj())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FplTrajectory {
    pub times: Vec<f64>,
    pub pc: TimeSeries,
    pub n_t: TimeSeries,
    pub k_t: TimeSeries,
    pub delta_pi: TimeSeries,
    /// `∫_0^t r` and `∫_0^t P_c r` on the grid.
    pub int_r: Vec<Complex64>,
    pub int_pc_r: Vec<Complex64>,
}

impl FplTrajectory {
    fn assemble(
        p: &FplParams,
        times: &[f64],
        int_r: Vec<Complex64>,
        int_pc_r: Vec<Complex64>,
    ) -> Result<Self> {
        let n0 = f64::from(p.n);
        let (m, k0) = (f64::from(p.m), f64::from(p.k));
        let pc: Vec<f64> = times.iter().map(|&t| p.price(t)).collect();
        let two_lam = 2.0 * p.lam;
        let n_t: Vec<f64> = int_r.iter().map(|i| n0 - two_lam * i.im).collect();
        let k_t: Vec<f64> = int_pc_r.iter().map(|i| k0 + two_lam * i.im).collect();
        let delta_pi: Vec<f64> = (0..times.len())
            .map(|j| {
                n0 * (pc[j] - m) - two_lam * int_r[j].im * pc[j] + two_lam * int_pc_r[j].im
            })
            .collect();
        Ok(FplTrajectory {
            times: times.to_vec(),
            pc: TimeSeries::new(times.to_vec(), pc, "Pc")?,
            n_t: TimeSeries::new(times.to_vec(), n_t, "n")?,
            k_t: TimeSeries::new(times.to_vec(), k_t, "k")?,
            delta_pi: TimeSeries::new(times.to_vec(), delta_pi, "delta_pi")?,
            int_r,
            int_pc_r,
        })
    }

    pub fn to_csv(&self) -> String {
        csv_columns(
            &["t", "Pc", "n", "k", "delta_pi"],
            &[
                &self.times,
                &self.pc.values,
                &self.n_t.values,
                &self.k_t.values,
                &self.delta_pi.values,
            ],
        )
    }
}

fn check_grid(times: &[f64]) -> Result<()> {
    check_times(times)?;
    if times.first() != Some(&0.0) {
        return Err(Error::InvalidTimeGrid);
    }
    Ok(())
}

fn lambda_zero(p: &FplParams, times: &[f64]) -> Result<FplTrajectory> {
    let zeros = vec![Complex64::new(0.0, 0.0); times.len()];
    FplTrajectory::assemble(p, times, zeros.clone(), zeros)
}

/// Trajectory on a grid starting at 0, with `∫r` and `∫P_c r` accumulated
/// interval by interval. Inside an interval `η2` and `η̃2` continue from their
/// cached values at the left grid point.
pub fn trajectory(p: &FplParams, times: &[f64]) -> Result<FplTrajectory> {
    p.validate()?;
    check_grid(times)?;
    if p.lam == 0.0 {
        return lambda_zero(p, times);
    }
    let tol = Tolerance::default();
    let (w1, w2) = omega_coefficients(p);
    let i_lam = Complex64::new(0.0, p.lam);
    let e_chi = |s: f64| Complex64::from_polar(1.0, phases(s, p).map_or(0.0, |x| x.0));
    let e_chit = |s: f64| Complex64::from_polar(1.0, phases(s, p).map_or(0.0, |x| x.1));
    let cum_chi = quadrature::cumulative(e_chi, times, tol)?;
    let cum_chit = quadrature::cumulative(e_chit, times, tol)?;

    let mut int_r = vec![Complex64::new(0.0, 0.0); times.len()];
    let mut int_pc_r = int_r.clone();
    for j in 1..times.len() {
        let left = times[j - 1];
        let failure = std::cell::Cell::new(None);
        let r = |s: f64| -> Complex64 {
            let inner = |g: &dyn Fn(f64) -> Complex64, base: Complex64| {
                quadrature::integrate(g, left, s, tol).map(|v| base + v)
            };
            match (inner(&e_chit, cum_chit[j - 1]), inner(&e_chi, cum_chi[j - 1])) {
                (Ok(ichit), Ok(ichi)) => {
                    let eta2 = i_lam * ichit;
                    let eta2t = i_lam * ichi;
                    w1 * e_chi(s) * eta2t.conj() + w2 * eta2 * e_chit(s).conj()
                }
                (Err(e), _) | (_, Err(e)) => {
                    failure.set(Some(e));
                    Complex64::new(0.0, 0.0)
                }
            }
        };
        let dr = quadrature::integrate(r, left, times[j], tol)?;
        let dpr = quadrature::integrate(|s| p.price(s) * r(s), left, times[j], tol)?;
        if let Some(e) = failure.take() {
            return Err(e);
        }
        int_r[j] = int_r[j - 1] + dr;
        int_pc_r[j] = int_pc_r[j - 1] + dpr;
    }
    FplTrajectory::assemble(p, times, int_r, int_pc_r)
}

/// Independent fixed-step evaluation: `η2`, `η̃2` advanced step by step with
/// Simpson's rule on each step (midpoint included), then `∫r`, `∫P_c r` by
/// composite Simpson. `points_per_unit` steps per unit time.
pub fn trajectory_simpson(
    p: &FplParams,
    times: &[f64],
    points_per_unit: usize,
) -> Result<FplTrajectory> {
    p.validate()?;
    check_grid(times)?;
    if p.lam == 0.0 {
        return lambda_zero(p, times);
    }
    let (w1, w2) = omega_coefficients(p);
    let i_lam = Complex64::new(0.0, p.lam);
    let e_chi = |s: f64| Complex64::from_polar(1.0, phases(s, p).map_or(0.0, |x| x.0));
    let e_chit = |s: f64| Complex64::from_polar(1.0, phases(s, p).map_or(0.0, |x| x.1));
    let mut int_r = vec![Complex64::new(0.0, 0.0); times.len()];
    let mut int_pc_r = int_r.clone();
    let (mut ichi, mut ichit) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    let r_at = |s: f64, ichi: Complex64, ichit: Complex64| {
        w1 * e_chi(s) * (i_lam * ichi).conj() + w2 * (i_lam * ichit) * e_chit(s).conj()
    };
    for j in 1..times.len() {
        let (a, b) = (times[j - 1], times[j]);
        let steps = (((b - a) * points_per_unit as f64).ceil() as usize).max(2);
        let steps = steps + steps % 2;
        let h = (b - a) / steps as f64;
        let mut r_vals = Vec::with_capacity(steps + 1);
        r_vals.push(r_at(a, ichi, ichit));
        for i in 0..steps {
            let s0 = a + i as f64 * h;
            let s1 = if i + 1 == steps { b } else { s0 + h };
            let mid = 0.5 * (s0 + s1);
            ichi += (e_chi(s0) + 4.0 * e_chi(mid) + e_chi(s1)) * (h / 6.0);
            ichit += (e_chit(s0) + 4.0 * e_chit(mid) + e_chit(s1)) * (h / 6.0);
            r_vals.push(r_at(s1, ichi, ichit));
        }
        let simpson = |g: &dyn Fn(usize) -> Complex64| -> Complex64 {
            let mut acc = g(0) + g(steps);
            for i in 1..steps {
                acc += g(i) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * (h / 3.0)
        };
        int_r[j] = int_r[j - 1] + simpson(&|i| r_vals[i]);
        int_pc_r[j] = int_pc_r[j - 1] + simpson(&|i| p.price(a + i as f64 * h) * r_vals[i]);
    }
    FplTrajectory::assemble(p, times, int_r, int_pc_r)
}

/// `P_c ṅ + k̇` at each time, with `ṅ`, `k̇` taken by finite differences of
/// the trajectory on the stencil `t ± h` (one-sided `t, t+h, t+2h` at 0).
pub fn balance_residuals(p: &FplParams, times: &[f64], h: f64) -> Result<Vec<f64>> {
    check_grid(times)?;
    if h.is_nan() || h <= 0.0 || times.windows(2).any(|w| w[1] - w[0] <= 3.0 * h) {
        return Err(Error::InvalidTimeGrid);
    }
    let mut grid = vec![0.0, h, 2.0 * h];
    for &t in &times[1..] {
        grid.extend([t - h, t, t + h]);
    }
    grid.dedup();
    let tr = trajectory(p, &grid)?;
    let (n, k) = (&tr.n_t.values, &tr.k_t.values);
    let mut out = vec![p.price(0.0) * (-3.0 * n[0] + 4.0 * n[1] - n[2]) / (2.0 * h)
        + (-3.0 * k[0] + 4.0 * k[1] - k[2]) / (2.0 * h)];
    let first = grid.len() - 3 * (times.len() - 1);
    for (i, &t) in times[1..].iter().enumerate() {
        let j = first + 3 * i + 1;
        let ndot = (n[j + 1] - n[j - 1]) / (2.0 * h);
        let kdot = (k[j + 1] - k[j - 1]) / (2.0 * h);
        out.push(p.price(t) * ndot + kdot);
    }
    Ok(out)
}

/// Space `[a, A, c, C, P]` holding the tracked trader, one reservoir trader
/// and the price, large enough for one trade either way.
pub fn pair_space(p: &FplParams) -> Result<Arc<FockSpace>> {
    let shares = (p.n + p.n_res + 1) as usize;
    let cash = (p.k + p.k_res + 2 * p.m) as usize;
    FockSpace::new(
        vec![shares, shares, cash, cash, p.m as usize],
        vec![
            ModeLabel::Share(0),
            ModeLabel::Share(1),
            ModeLabel::Cash(0),
            ModeLabel::Cash(1),
            ModeLabel::Price,
        ],
    )
}

/// `(z, Z(f))` with `z = a (c†)^P`, `Z(f) = f A (C†)^P` on [`pair_space`].
pub fn pair_fields(p: &FplParams, space: &Arc<FockSpace>) -> Result<(MatrixOperator, MatrixOperator)> {
    let field = |trader: usize| -> Result<MatrixOperator> {
        let a = lower(space, space.require_mode(ModeLabel::Share(trader))?)?;
        let cd = cash_power_op(
            space,
            space.require_mode(ModeLabel::Cash(trader))?,
            space.require_mode(ModeLabel::Price)?,
            LadderKind::Raise,
        )?;
        a.mul(&cd)
    };
    Ok((field(0)?, field(1)?.scale(p.f)))
}

pub fn pair_state(p: &FplParams) -> NumberState {
    NumberState::new(
        [p.n, p.n_res, p.k, p.k_res, p.m]
            .iter()
            .map(|&x| x as usize)
            .collect(),
    )
}

/// Replaces `r` by the zeroth-order product `ω(z† Z(f)) e^{-i(χ - χ̃)}` and
/// reports whether `n(t)` and `k(t)` stay put to 1e-12.
pub fn zeroth_order_check(p: &FplParams, times: &[f64]) -> Result<bool> {
    p.validate()?;
    check_grid(times)?;
    let space = pair_space(p)?;
    let (z, zf) = pair_fields(p, &space)?;
    let mean = expectation(&pair_state(p), &z.adjoint().mul(&zf)?)?;
    if p.lam == 0.0 {
        return Ok(true);
    }
    let r0 = |s: f64| {
        let (chi, chit) = phases(s, p).unwrap_or((0.0, 0.0));
        mean * Complex64::from_polar(1.0, -(chi - chit))
    };
    let tol = Tolerance::default();
    let int_r = quadrature::cumulative(r0, times, tol)?;
    let int_pc_r = quadrature::cumulative(|s| p.price(s) * r0(s), times, tol)?;
    let drift = int_r
        .iter()
        .chain(&int_pc_r)
        .map(|v| 2.0 * p.lam * v.im.abs())
        .fold(0.0, f64::max);
    Ok(drift < 1e-12)
}
