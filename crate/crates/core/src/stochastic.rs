//! Stochastic-limit reduction of the open market: resonance functions, the
//! damping constants Γ, the generator L acting on system observables, and
//! stationarity verdicts.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{commutator, lower, number, FockSpace, LadderKind, MatrixOperator, ModeLabel, NumberState};
use crate::models::ModelParams;
use crate::price_ladder::{cash_power_op, factorial_weight, FactorialKind};
use crate::timeseries::format_g12;

pub const DEFAULT_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonProfile {
    /// `ε_Z(k) = P (Ω_C(k) - ω_c) - (Ω_A(k) - ω_a)`
    pub eps_z: Vec<f64>,
    /// `ε_O(k) = ω_p - Ω_O(k)`
    pub eps_o: Vec<f64>,
    pub p_mean: f64,
}

pub fn epsilon_profiles(params: &ModelParams, p_mean: f64) -> EpsilonProfile {
    EpsilonProfile {
        eps_z: params
            .reservoir
            .iter()
            .map(|r| p_mean * (r.omega_cash - params.omega_c) - (r.omega_share - params.omega_a))
            .collect(),
        eps_o: params
            .reservoir
            .iter()
            .map(|r| params.omega_p - r.omega_supply)
            .collect(),
        p_mean,
    }
}

/// How the Dirac mass at a zero of ε is represented on the discrete label set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaMass {
    /// Unit weight when `|ε| < tol`.
    Indicator { tol: f64 },
    /// `w / (π (ε² + w²))`, for sensitivity studies.
    Lorentzian { width: f64 },
}

impl DeltaMass {
    fn weight(self, eps: f64) -> f64 {
        match self {
            DeltaMass::Indicator { tol } => f64::from(u8::from(eps.abs() < tol)),
            DeltaMass::Lorentzian { width } => width / (PI * (eps * eps + width * width)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaCoefficients {
    pub gz_a: Complex64,
    pub gz_b: Complex64,
    pub go_a: Complex64,
    pub go_b: Complex64,
}

impl GammaCoefficients {
    pub fn real(gz_a: f64, gz_b: f64, go_a: f64, go_b: f64) -> Self {
        let c = |x| Complex64::new(x, 0.0);
        GammaCoefficients {
            gz_a: c(gz_a),
            gz_b: c(gz_b),
            go_a: c(go_a),
            go_b: c(go_b),
        }
    }
}

/// Occupations `(N_k, K_k, O_k)` of every reservoir trader.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirState {
    pub shares: Vec<usize>,
    pub cash: Vec<usize>,
    pub supply: Vec<usize>,
}

impl ReservoirState {
    /// Reads a number state laid out as `[N_1..N_r, K_1..K_r, O_1..O_r]`.
    pub fn from_number_state(state: &NumberState, reservoir: usize) -> Result<Self> {
        let occ = state.occupations();
        if occ.len() != 3 * reservoir {
            return Err(Error::InvalidParams(format!(
                "reservoir state for {reservoir} traders needs {} occupations, got {}",
                3 * reservoir,
                occ.len()
            )));
        }
        Ok(ReservoirState {
            shares: occ[..reservoir].to_vec(),
            cash: occ[reservoir..2 * reservoir].to_vec(),
            supply: occ[2 * reservoir..].to_vec(),
        })
    }

    fn len(&self) -> usize {
        self.shares.len()
    }
}

fn integer_price(p_mean: f64) -> Result<u64> {
    let m = p_mean.round();
    if p_mean < 0.0 || (p_mean - m).abs() > 1e-9 {
        return Err(Error::InvalidParams(format!(
            "price mean {p_mean} must be a nonnegative integer to weigh the cash ladders"
        )));
    }
    Ok(m as u64)
}

/// `ω_res(Z_k Z_k†) = (N_k + 1) K_k^(-M)` and `ω_res(Z_k† Z_k) = N_k K_k^(+M)`.
pub fn z_weights(shares: usize, cash: usize, price: u64) -> (f64, f64) {
    let k = cash as u64;
    (
        (shares + 1) as f64 * factorial_weight(k, price, FactorialKind::Falling),
        shares as f64 * factorial_weight(k, price, FactorialKind::Rising),
    )
}

/// Real parts of the four damping constants; imaginary parts are zero.
pub fn gamma_real_parts_with(
    params: &ModelParams,
    reservoir: &ReservoirState,
    profile: &EpsilonProfile,
    mass: DeltaMass,
) -> Result<GammaCoefficients> {
    let r = params.reservoir.len();
    if reservoir.len() != r || profile.eps_z.len() != r || profile.eps_o.len() != r {
        return Err(Error::InvalidParams(
            "reservoir state, profile and parameters disagree on the label set".into(),
        ));
    }
    let price = integer_price(profile.p_mean)?;
    let (mut za, mut zb, mut oa, mut ob) = (0.0, 0.0, 0.0, 0.0);
    for (k, res) in params.reservoir.iter().enumerate() {
        let dz = mass.weight(profile.eps_z[k]);
        let d_o = mass.weight(profile.eps_o[k]);
        let (zzd, zdz) = z_weights(reservoir.shares[k], reservoir.cash[k], price);
        let f2 = res.f.norm_sqr();
        let g2 = res.g.norm_sqr();
        za += PI * f2 * zzd * dz;
        zb += PI * f2 * zdz * dz;
        oa += PI * g2 * (reservoir.supply[k] + 1) as f64 * d_o;
        ob += PI * g2 * reservoir.supply[k] as f64 * d_o;
    }
    Ok(GammaCoefficients::real(za, zb, oa, ob))
}

pub fn gamma_real_parts(
    params: &ModelParams,
    reservoir: &ReservoirState,
    profile: &EpsilonProfile,
    zero_tol: f64,
) -> Result<GammaCoefficients> {
    gamma_real_parts_with(params, reservoir, profile, DeltaMass::Indicator { tol: zero_tol })
}

/// Space of the tracked trader alone: shares, cash, price.
pub fn system_space(share_cutoff: usize, cash_cutoff: usize, price_cutoff: usize) -> Result<Arc<FockSpace>> {
    FockSpace::new(
        vec![share_cutoff, cash_cutoff, price_cutoff],
        vec![ModeLabel::Share(0), ModeLabel::Cash(0), ModeLabel::Price],
    )
}

fn check_system(space: &FockSpace) -> Result<()> {
    for l in space.labels() {
        if !matches!(l, ModeLabel::Share(0) | ModeLabel::Cash(0) | ModeLabel::Price) {
            return Err(Error::ReservoirMode(l.to_string()));
        }
    }
    for l in [ModeLabel::Share(0), ModeLabel::Cash(0), ModeLabel::Price] {
        space.require_mode(l)?;
    }
    Ok(())
}

/// `z = a (c†)^P` on a system space.
pub fn z_operator(space: &Arc<FockSpace>) -> Result<MatrixOperator> {
    check_system(space)?;
    let a = lower(space, space.require_mode(ModeLabel::Share(0))?)?;
    let cdp = cash_power_op(
        space,
        space.require_mode(ModeLabel::Cash(0))?,
        space.require_mode(ModeLabel::Price)?,
        LadderKind::Raise,
    )?;
    a.mul(&cdp)
}

/// `Π = P n + k` on a system space.
pub fn system_portfolio(space: &Arc<FockSpace>) -> Result<MatrixOperator> {
    check_system(space)?;
    let n = number(space, space.require_mode(ModeLabel::Share(0))?)?;
    let k = number(space, space.require_mode(ModeLabel::Cash(0))?)?;
    let p = number(space, space.require_mode(ModeLabel::Price)?)?;
    p.mul(&n)?.add(&k)
}

fn lindblad_pair(
    x: &MatrixOperator,
    b: &MatrixOperator,
    g_a: Complex64,
    g_b: Complex64,
) -> Result<MatrixOperator> {
    let bd = b.adjoint();
    // Γa [b†, X] b − Γ̄a b† [b, X] + Γb [b, X] b† − Γ̄b b [b†, X]
    let c_bd = commutator(&bd, x)?;
    let c_b = commutator(b, x)?;
    c_bd.mul(b)?
        .scale(g_a)
        .sub(&bd.mul(&c_b)?.scale(g_a.conj()))?
        .add(&c_b.mul(&bd)?.scale(g_b))?
        .sub(&b.mul(&c_bd)?.scale(g_b.conj()))
}

/// Generator of the reduced dynamics acting on a system observable.
pub fn generator_apply(x: &MatrixOperator, gammas: &GammaCoefficients) -> Result<MatrixOperator> {
    let space = x.space();
    check_system(space)?;
    let z = z_operator(space)?;
    let p = lower(space, space.require_mode(ModeLabel::Price)?)?;
    lindblad_pair(x, &z, gammas.gz_a, gammas.gz_b)?.add(&lindblad_pair(
        x,
        &p,
        gammas.go_a,
        gammas.go_b,
    )?)
}

/// Columns where one more quantum in any system mode stays below the cutoff.
pub fn system_interior(space: &FockSpace) -> impl Fn(usize) -> bool + '_ {
    let price_cut = space.cutoff(space.mode_of(ModeLabel::Price).unwrap_or(0));
    let margins: Vec<usize> = space
        .labels()
        .iter()
        .map(|l| match l {
            ModeLabel::Cash(_) => price_cut + 1,
            _ => 1,
        })
        .collect();
    move |i| space.is_interior(i, &margins)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationarityVerdict {
    pub portfolio_stationary: bool,
    pub occupations_stationary: bool,
    pub eps_z_zeros: Vec<usize>,
    pub eps_o_zeros: Vec<usize>,
    pub gammas: GammaCoefficients,
    pub norm_l_pi: f64,
    pub norm_l_n: f64,
    pub norm_l_k: f64,
    pub p_mean: f64,
}

impl StationarityVerdict {
    /// Flat `key=value` lines in sorted key order.
    pub fn to_report(&self) -> String {
        let list = |v: &[usize]| {
            v.iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(";")
        };
        let mut kv = BTreeMap::new();
        kv.insert("eps_o_zeros", list(&self.eps_o_zeros));
        kv.insert("eps_z_zeros", list(&self.eps_z_zeros));
        kv.insert("gamma_o_a_re", format_g12(self.gammas.go_a.re));
        kv.insert("gamma_o_b_re", format_g12(self.gammas.go_b.re));
        kv.insert("gamma_z_a_re", format_g12(self.gammas.gz_a.re));
        kv.insert("gamma_z_b_re", format_g12(self.gammas.gz_b.re));
        kv.insert("norm_l_k", format_g12(self.norm_l_k));
        kv.insert("norm_l_n", format_g12(self.norm_l_n));
        kv.insert("norm_l_pi", format_g12(self.norm_l_pi));
        kv.insert("occupations_stationary", self.occupations_stationary.to_string());
        kv.insert("p_mean", format_g12(self.p_mean));
        kv.insert("portfolio_stationary", self.portfolio_stationary.to_string());
        kv.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

/// Verdict with generator norms measured on `space` (interior columns).
pub fn stationarity_verdict_on(
    space: &Arc<FockSpace>,
    params: &ModelParams,
    reservoir: &ReservoirState,
    p_mean: f64,
    zero_tol: f64,
) -> Result<StationarityVerdict> {
    let profile = epsilon_profiles(params, p_mean);
    let gammas = gamma_real_parts(params, reservoir, &profile, zero_tol)?;
    let zeros = |v: &[f64]| -> Vec<usize> {
        v.iter()
            .enumerate()
            .filter(|(_, e)| e.abs() < zero_tol)
            .map(|(k, _)| k)
            .collect()
    };
    let eps_z_zeros = zeros(&profile.eps_z);
    let eps_o_zeros = zeros(&profile.eps_o);
    let interior = system_interior(space);
    let n = number(space, space.require_mode(ModeLabel::Share(0))?)?;
    let k = number(space, space.require_mode(ModeLabel::Cash(0))?)?;
    let norm = |x: &MatrixOperator| -> Result<f64> {
        Ok(generator_apply(x, &gammas)?.max_abs_on_columns(&interior))
    };
    Ok(StationarityVerdict {
        portfolio_stationary: eps_o_zeros.is_empty(),
        occupations_stationary: eps_z_zeros.is_empty(),
        norm_l_pi: norm(&system_portfolio(space)?)?,
        norm_l_n: norm(&n)?,
        norm_l_k: norm(&k)?,
        eps_z_zeros,
        eps_o_zeros,
        gammas,
        p_mean,
    })
}

/// Verdict on a system space large enough to hold a few trades at the mean
/// price.
pub fn stationarity_verdict(
    params: &ModelParams,
    reservoir: &ReservoirState,
    p_mean: f64,
    zero_tol: f64,
) -> Result<StationarityVerdict> {
    let m = integer_price(p_mean)? as usize;
    let space = system_space(3, 3 * (m + 1) + m, m + 2)?;
    stationarity_verdict_on(&space, params, reservoir, p_mean, zero_tol)
}

/// Brace content of the second-order term `I(t) = -t {...}` on a system
/// number state `[n, k, M]`.
pub fn second_order_term(gammas: &GammaCoefficients, system_state: &NumberState) -> Result<Complex64> {
    let &[n, k, m] = system_state.occupations() else {
        return Err(Error::InvalidParams(
            "system state must hold [shares, cash, price]".into(),
        ));
    };
    let (k, m64) = (k as u64, m as u64);
    let z_dag_z = n as f64 * factorial_weight(k, m64, FactorialKind::Rising);
    let z_z_dag = (n + 1) as f64 * factorial_weight(k, m64, FactorialKind::Falling);
    Ok(gammas.gz_a * z_dag_z
        + gammas.gz_b * z_z_dag
        + gammas.go_a * m as f64
        + gammas.go_b * (m + 1) as f64)
}
