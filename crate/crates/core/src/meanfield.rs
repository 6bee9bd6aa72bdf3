//! Mean-field limit of the effective model at unit price.
//!
//! With `X_l = a_l c_l†` replaced far from trader `l` by a c-number
//! `X∞(t) = X0 e^{iνt}`, the pair `(x_l, n_l)` closes into a linear system
//! whose share occupation oscillates at `ω = sqrt((Φ-ν)² + 16|X0|²)`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{commutator, lower, number, raise, FockSpace, MatrixOperator, ModeLabel};
use crate::numerics::ode::{self, OdeOptions};
use crate::timeseries::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanFieldParams {
    /// `Φ = β_l - α_l`
    pub phi: f64,
    pub nu: f64,
    pub x0: Complex64,
    pub n0: f64,
    pub k0: f64,
    /// Share value γ used in the portfolio.
    pub gamma_share: f64,
}

impl MeanFieldParams {
    pub fn omega(&self) -> Result<f64> {
        let w = ((self.phi - self.nu).powi(2) + 16.0 * self.x0.norm_sqr()).sqrt();
        if w > 0.0 {
            Ok(w)
        } else {
            Err(Error::Degenerate("Φ = ν and X0 = 0 give ω = 0".into()))
        }
    }

    /// `16|X0|² (n0 + k0) / ω²`, the largest possible excursion of `n`.
    pub fn influence_bound(&self) -> Result<f64> {
        Ok(16.0 * self.x0.norm_sqr() * (self.n0 + self.k0) / self.omega()?.powi(2))
    }
}

/// `X_l = a_l c_l†`.
pub fn x_operator(space: &Arc<FockSpace>, trader: usize) -> Result<MatrixOperator> {
    let a = lower(space, space.require_mode(ModeLabel::Share(trader))?)?;
    let cd = raise(space, space.require_mode(ModeLabel::Cash(trader))?)?;
    a.mul(&cd)
}

#[derive(Debug, Clone)]
pub struct XAlgebra {
    /// `[X_i, X_j†]`
    pub x_xdag: MatrixOperator,
    /// `[X_i, n_j]`
    pub x_n: MatrixOperator,
    /// `[X_i, k_j]`
    pub x_k: MatrixOperator,
}

pub fn x_commutators(space: &Arc<FockSpace>, i: usize, j: usize) -> Result<XAlgebra> {
    let xi = x_operator(space, i)?;
    let xj = x_operator(space, j)?;
    let nj = number(space, space.require_mode(ModeLabel::Share(j))?)?;
    let kj = number(space, space.require_mode(ModeLabel::Cash(j))?)?;
    Ok(XAlgebra {
        x_xdag: commutator(&xi, &xj.adjoint())?,
        x_n: commutator(&xi, &nj)?,
        x_k: commutator(&xi, &kj)?,
    })
}

pub fn meanfield_n(t: f64, p: &MeanFieldParams) -> Result<f64> {
    let w = p.omega()?;
    let x2 = p.x0.norm_sqr();
    let c = (w * t).cos();
    Ok((p.n0 * (p.phi - p.nu).powi(2) - 8.0 * x2 * (p.k0 * (c - 1.0) - p.n0 * (c + 1.0)))
        / (w * w))
}

/// `Π(t) = Π(0) + (γ - 1)(n(t) - n0)` with `Π(0) = γ n0 + k0`.
pub fn meanfield_portfolio(t: f64, p: &MeanFieldParams) -> Result<f64> {
    let pi0 = p.gamma_share * p.n0 + p.k0;
    Ok(pi0 + (p.gamma_share - 1.0) * (meanfield_n(t, p)? - p.n0))
}

#[derive(Debug, Clone)]
pub struct MeanFieldSolution {
    pub n: TimeSeries,
    pub x: Vec<Complex64>,
    /// Largest `|Im n|` met along the trajectory.
    pub max_imag_n: f64,
}

/// Integrates `ẋ = iΦx + 2iX∞(t)(2n - Q)`, `ṅ = 2i(x X̄∞ - X∞ x̄)` with
/// `X∞(t) = X0 e^{iνt}`, `Q = n0 + k0`, from `x(0) = x_init`, `n(0) = n0`.
/// `n` is carried as a complex number so that its reality can be checked.
pub fn integrate_meanfield_ode_from(
    p: &MeanFieldParams,
    x_init: Complex64,
    times: &[f64],
) -> Result<MeanFieldSolution> {
    let q = p.n0 + p.k0;
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let x = Complex64::new(y[0], y[1]);
        let n = Complex64::new(y[2], y[3]);
        let xinf = p.x0 * Complex64::from_polar(1.0, p.nu * t);
        let i = Complex64::i();
        let dx = i * p.phi * x + 2.0 * i * xinf * (2.0 * n - q);
        let dn = 2.0 * i * (x * xinf.conj() - xinf * x.conj());
        dy[0] = dx.re;
        dy[1] = dx.im;
        dy[2] = dn.re;
        dy[3] = dn.im;
    };
    let ys = ode::integrate(
        rhs,
        &[x_init.re, x_init.im, p.n0, 0.0],
        times,
        OdeOptions::default(),
    )?;
    let max_imag_n = ys.iter().map(|y| y[3].abs()).fold(0.0, f64::max);
    Ok(MeanFieldSolution {
        n: TimeSeries::new(times.to_vec(), ys.iter().map(|y| y[2]).collect(), "n")?,
        x: ys.iter().map(|y| Complex64::new(y[0], y[1])).collect(),
        max_imag_n,
    })
}

pub fn integrate_meanfield_ode(p: &MeanFieldParams, times: &[f64]) -> Result<TimeSeries> {
    let sol = integrate_meanfield_ode_from(p, Complex64::new(0.0, 0.0), times)?;
    if sol.max_imag_n > 1e-9 {
        return Err(Error::ComplexExpectation(sol.max_imag_n));
    }
    Ok(sol.n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuCalibration {
    /// Fitted `|Φ - ν|`.
    pub detuning: f64,
    /// The two ν values compatible with the fit, `Φ - d` and `Φ + d`.
    pub candidates: [f64; 2],
    /// Largest pointwise gap between the closed form at the fitted ν and
    /// the supplied trajectory.
    pub max_residual: f64,
}

/// Fits the ν entering the closed form to a share trajectory. The closed form
/// depends on ν only through `(Φ - ν)²`, so the fit returns the detuning and
/// both mirror candidates.
pub fn calibrate_nu(p: &MeanFieldParams, samples: &TimeSeries) -> Result<NuCalibration> {
    let sse = |d: f64| -> f64 {
        let trial = MeanFieldParams {
            nu: p.phi - d,
            ..*p
        };
        samples
            .times
            .iter()
            .zip(&samples.values)
            .map(|(t, v)| meanfield_n(*t, &trial).map_or(f64::INFINITY, |m| (m - v).powi(2)))
            .sum()
    };
    let span = samples.times.last().copied().unwrap_or(1.0).max(1e-9);
    // frequencies resolvable on the sample grid
    let d_max = 4.0 * std::f64::consts::PI * samples.len() as f64 / span;
    let scan = 4000;
    let step = d_max / scan as f64;
    let best = (0..=scan)
        .map(|i| i as f64 * step)
        .min_by(|a, b| sse(*a).total_cmp(&sse(*b)))
        .expect("nonempty scan");
    // golden-section refinement around the best grid point
    let (mut lo, mut hi) = ((best - step).max(0.0), best + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if sse(m1) < sse(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let detuning = 0.5 * (lo + hi);
    let fitted = MeanFieldParams {
        nu: p.phi - detuning,
        ..*p
    };
    let mut max_residual: f64 = 0.0;
    for (t, v) in samples.times.iter().zip(&samples.values) {
        max_residual = max_residual.max((meanfield_n(*t, &fitted)? - v).abs());
    }
    Ok(NuCalibration {
        detuning,
        candidates: [p.phi - detuning, p.phi + detuning],
        max_residual,
    })
}
