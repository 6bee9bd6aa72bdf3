//! Exact Heisenberg evolution on truncated spaces.
//!
//! A number state only explores the connected component of the Hamiltonian's
//! sparsity graph that contains it, so the propagator diagonalizes that block
//! alone. Outside it every amplitude stays zero.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{FockSpace, MatrixOperator, ModeLabel, NumberState};
use crate::models::{MarketModel, ModelKind};
use crate::timeseries::{check_times, TimeSeries};

const HERMITIAN_TOL: f64 = 1e-12;
const IMAG_TOL: f64 = 1e-9;

/// Eigendecomposition of the block of `H` reachable from one basis state.
#[derive(Debug, Clone)]
pub struct Propagator {
    space: Arc<FockSpace>,
    block: Vec<usize>,
    position: HashMap<usize, usize>,
    energies: DVector<f64>,
    vectors: DMatrix<Complex64>,
    /// `V† e_j` for the seed state.
    seed_amplitudes: DVector<Complex64>,
}

fn connected_block(h: &MatrixOperator, seed: usize) -> Vec<usize> {
    let mut neighbours: HashMap<usize, Vec<usize>> = HashMap::new();
    for (r, c, _) in h.entries() {
        if r != c {
            neighbours.entry(r).or_default().push(c);
            neighbours.entry(c).or_default().push(r);
        }
    }
    let mut seen = HashMap::from([(seed, ())]);
    let mut queue = VecDeque::from([seed]);
    let mut block = Vec::new();
    while let Some(i) = queue.pop_front() {
        block.push(i);
        for &j in neighbours.get(&i).into_iter().flatten() {
            if seen.insert(j, ()).is_none() {
                queue.push_back(j);
            }
        }
    }
    block.sort_unstable();
    block
}

impl Propagator {
    pub fn new(h: &MatrixOperator, state: &NumberState) -> Result<Self> {
        let defect = h.hermitian_defect();
        if defect >= HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        let space = Arc::clone(h.space());
        let seed = state.index_in(&space)?;
        let block = connected_block(h, seed);
        let position: HashMap<usize, usize> =
            block.iter().enumerate().map(|(p, &i)| (i, p)).collect();
        let d = block.len();
        let mut dense = DMatrix::<Complex64>::zeros(d, d);
        for (r, c, v) in h.entries() {
            if let (Some(&pr), Some(&pc)) = (position.get(&r), position.get(&c)) {
                dense[(pr, pc)] += v;
            }
        }
        let sym = (&dense + dense.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = sym.symmetric_eigen();
        let mut e_j = DVector::<Complex64>::zeros(d);
        e_j[position[&seed]] = Complex64::new(1.0, 0.0);
        let seed_amplitudes = eig.eigenvectors.adjoint() * e_j;
        Ok(Propagator {
            space,
            block,
            position,
            energies: eig.eigenvalues,
            vectors: eig.eigenvectors,
            seed_amplitudes,
        })
    }

    pub fn block(&self) -> &[usize] {
        &self.block
    }

    pub fn energies(&self) -> &[f64] {
        self.energies.as_slice()
    }

    /// `ψ(t) = e^{-iHt} φ` in block coordinates.
    pub fn state_at(&self, t: f64) -> DVector<Complex64> {
        let phased = DVector::from_iterator(
            self.block.len(),
            self.energies
                .iter()
                .zip(self.seed_amplitudes.iter())
                .map(|(e, a)| a * Complex64::from_polar(1.0, -e * t)),
        );
        &self.vectors * phased
    }

    /// Full-space amplitudes of `ψ(t)`.
    pub fn full_state_at(&self, t: f64) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.space.dim()];
        for (p, v) in self.state_at(t).iter().enumerate() {
            out[self.block[p]] = *v;
        }
        out
    }

    /// `⟨ψ(t)| X |ψ(t)⟩`.
    pub fn expectation_at(&self, x: &MatrixOperator, t: f64) -> Result<Complex64> {
        if !Arc::ptr_eq(x.space(), &self.space) && **x.space() != *self.space {
            return Err(Error::SpaceMismatch);
        }
        let psi = self.state_at(t);
        let mut acc = Complex64::new(0.0, 0.0);
        for (r, c, v) in x.entries() {
            if let (Some(&pr), Some(&pc)) = (self.position.get(&r), self.position.get(&c)) {
                acc += psi[pr].conj() * v * psi[pc];
            }
        }
        Ok(acc)
    }

    pub fn expectation_series(&self, x: &MatrixOperator, times: &[f64]) -> Result<Vec<Complex64>> {
        check_times(times)?;
        times.iter().map(|&t| self.expectation_at(x, t)).collect()
    }
}

fn real_series(values: Vec<Complex64>, times: &[f64], label: &str) -> Result<TimeSeries> {
    let mut out = Vec::with_capacity(values.len());
    for v in values {
        if v.im.abs() > IMAG_TOL * v.norm().max(1.0) {
            return Err(Error::ComplexExpectation(v.im));
        }
        out.push(v.re);
    }
    TimeSeries::new(times.to_vec(), out, label)
}

/// Conserved totals of shares, cash and price plus supply on `state`. Cutoffs
/// at or above these totals make the sector evolution truncation-free.
fn check_sector_exact(model: &MarketModel, state: &NumberState) -> Result<()> {
    let space = &model.space;
    state.index_in(space)?;
    let occ = state.occupations();
    let group = |l: &ModeLabel| match l {
        ModeLabel::Share(_) => 0,
        ModeLabel::Cash(_) => 1,
        ModeLabel::Supply(_) | ModeLabel::Price => 2,
        ModeLabel::Mode(_) => 3,
    };
    let mut totals = [0usize; 4];
    for (m, l) in space.labels().iter().enumerate() {
        totals[group(l)] += occ[m];
    }
    for (m, l) in space.labels().iter().enumerate() {
        let g = group(l);
        if g == 3 || space.cutoff(m) < totals[g] {
            return Err(Error::MarginViolation(format!(
                "cutoff {} of mode {l} is below the conserved total {}",
                space.cutoff(m),
                totals[g]
            )));
        }
    }
    Ok(())
}

/// `ω(e^{iHt} X e^{-iHt})` on the grid, for Hermitian `X`.
pub fn evolve_expectation(
    model: &MarketModel,
    x: &MatrixOperator,
    state: &NumberState,
    times: &[f64],
) -> Result<TimeSeries> {
    check_sector_exact(model, state)?;
    let prop = Propagator::new(&model.hamiltonian, state)?;
    real_series(prop.expectation_series(x, times)?, times, "X")
}

/// Same as [`evolve_expectation`] for an arbitrary Hermitian generator, with
/// no truncation check.
pub fn evolve_with(
    h: &MatrixOperator,
    x: &MatrixOperator,
    state: &NumberState,
    times: &[f64],
) -> Result<TimeSeries> {
    let prop = Propagator::new(h, state)?;
    real_series(prop.expectation_series(x, times)?, times, "X")
}

/// `(P(t), O(t))` of the decoupled price/supply oscillator started at `(M, O)`.
pub fn price_supply_closed_form(m: f64, o: f64, t: f64, lam: f64) -> (f64, f64) {
    let c = (2.0 * lam * t).cos();
    (
        0.5 * ((m + o) + (m - o) * c),
        0.5 * ((m + o) - (m - o) * c),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PortfolioForm {
    /// `Π_j = P n_j + k_j` with the price operator (or the frozen price of
    /// the effective model).
    Price,
    /// `Π_j = γ n_j + k_j` with a user-chosen share value.
    Gamma(f64),
}

/// `Π_j` at time zero; its Heisenberg evolution is the portfolio `Π_j(t)`.
pub fn portfolio_operator(
    model: &MarketModel,
    trader: usize,
    form: PortfolioForm,
) -> Result<MatrixOperator> {
    let n = model.number(ModeLabel::Share(trader))?;
    let k = model.number(ModeLabel::Cash(trader))?;
    match (model.kind, form) {
        (ModelKind::OpenMarket, _) => Err(Error::UnsupportedModel(
            "portfolio_operator",
            "two-trader or effective",
        )),
        (_, PortfolioForm::Gamma(g)) => k.axpy(Complex64::new(g, 0.0), &n),
        (ModelKind::EffectiveL { price }, PortfolioForm::Price) => {
            k.axpy(Complex64::new(f64::from(price), 0.0), &n)
        }
        (ModelKind::TwoTrader, PortfolioForm::Price) => model.price_weighted_holding(trader),
    }
}

pub fn portfolio_series(
    model: &MarketModel,
    trader: usize,
    form: PortfolioForm,
    state: &NumberState,
    times: &[f64],
) -> Result<TimeSeries> {
    let op = portfolio_operator(model, trader, form)?;
    let mut ts = evolve_expectation(model, &op, state, times)?;
    ts.label = format!("Pi{}", trader + 1);
    Ok(ts)
}

/// Effective-model shortcut `Π_j(t) = Π_j(0) + (γ - M)(n_j(t) - n_j(0))`,
/// which only needs the share trajectory.
pub fn portfolio_reduced(
    model: &MarketModel,
    trader: usize,
    gamma: f64,
    state: &NumberState,
    times: &[f64],
) -> Result<TimeSeries> {
    let ModelKind::EffectiveL { price } = model.kind else {
        return Err(Error::UnsupportedModel("portfolio_reduced", "effective"));
    };
    let n = model.number(ModeLabel::Share(trader))?;
    let pi0 = crate::fock::expectation(
        state,
        &portfolio_operator(model, trader, PortfolioForm::Gamma(gamma))?,
    )?
    .re;
    let ns = evolve_expectation(model, &n, state, times)?;
    let n0 = ns.values[0];
    let shift = gamma - f64::from(price);
    let values = ns.values.iter().map(|v| pi0 + shift * (v - n0)).collect();
    TimeSeries::new(times.to_vec(), values, format!("Pi{}", trader + 1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesCoefficients {
    /// `coeffs[m] = ⟨i^m / m! ad_H^m(X)⟩`
    pub coeffs: Vec<Complex64>,
    pub order: usize,
}

impl SeriesCoefficients {
    pub fn eval(&self, t: f64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * t + c)
    }

    pub fn eval_truncated(&self, t: f64, order: usize) -> Complex64 {
        self.coeffs[..=order.min(self.order)]
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * t + c)
    }
}

/// `ad_H^m(X) = [H, [H, ... [H, X]]]` as a matrix.
pub fn nested_commutator(h: &MatrixOperator, x: &MatrixOperator, m: usize) -> Result<MatrixOperator> {
    let mut out = x.clone();
    for _ in 0..m {
        out = crate::fock::commutator(h, &out)?;
    }
    Ok(out)
}

/// Taylor coefficients of `t ↦ ω(X(t))` from nested commutators. The
/// expectation of `ad_H^m(X)` on `φ` is expanded as
/// `Σ_a C(m,a) (-1)^(m-a) ⟨H^a φ| X |H^(m-a) φ⟩`, which needs only vectors.
pub fn heisenberg_series(
    model: &MarketModel,
    x: &MatrixOperator,
    state: &NumberState,
    order: usize,
) -> Result<SeriesCoefficients> {
    let space = &model.space;
    let idx = state.index_in(space)?;
    if check_sector_exact(model, state).is_err() {
        let margins: Vec<usize> = model.margins().iter().map(|d| d * order).collect();
        if !space.is_interior(idx, &margins) {
            return Err(Error::MarginViolation(format!(
                "order {order} expansion around {:?} reaches the cutoffs {:?}",
                state.occupations(),
                space.cutoffs()
            )));
        }
    }
    let mut powers = Vec::with_capacity(order + 1);
    let mut v = vec![Complex64::new(0.0, 0.0); space.dim()];
    v[idx] = Complex64::new(1.0, 0.0);
    powers.push(v);
    for b in 0..order {
        let next = model.hamiltonian.apply(&powers[b]);
        powers.push(next);
    }
    let x_applied: Vec<Vec<Complex64>> = powers.iter().map(|p| x.apply(p)).collect();
    let dot = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
        a.iter().zip(b).map(|(u, w)| u.conj() * w).sum()
    };
    let mut coeffs = Vec::with_capacity(order + 1);
    let mut factorial = 1.0;
    for m in 0..=order {
        if m > 0 {
            factorial *= m as f64;
        }
        let mut acc = Complex64::new(0.0, 0.0);
        let mut binom = 1.0;
        for a in 0..=m {
            let sign = if (m - a) % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binom * dot(&powers[a], &x_applied[m - a]);
            binom = binom * (m - a) as f64 / (a + 1) as f64;
        }
        coeffs.push(Complex64::i().powu(m as u32) * acc / factorial);
    }
    Ok(SeriesCoefficients { coeffs, order })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{expectation, number, raise, lower};
    use crate::models::{
        build_effective_l, build_two_trader, closed_market_space, closed_market_space_for,
        conserved_operators, split_effective, ModelParams,
    };
    use approx::assert_abs_diff_eq;

    fn two_trader(state: &NumberState) -> MarketModel {
        let space = closed_market_space_for(state).unwrap();
        build_two_trader(&ModelParams::two_trader([0.4, 0.9], [0.7, 0.2]), &space).unwrap()
    }

    fn grid(n: usize, t_max: f64) -> Vec<f64> {
        crate::timeseries::uniform_grid(t_max, n).unwrap()
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(price_supply_closed_form(3.0, 1.0, 0.0, 0.7), (3.0, 1.0));
        let (p, o) = price_supply_closed_form(1.0, 2.0, std::f64::consts::FRAC_PI_2, 1.0);
        assert_abs_diff_eq!(p, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(o, 1.0, epsilon = 1e-15);
        for t in [0.1, 1.3, 7.0] {
            let (p, o) = price_supply_closed_form(2.0, 2.0, t, 0.3);
            assert_eq!((p, o), (2.0, 2.0));
            let (p, o) = price_supply_closed_form(4.0, 1.0, t, 0.3);
            assert_abs_diff_eq!(p + o, 5.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn block_matches_full_diagonalization() {
        // unrestricted dense evolution on a small space as oracle
        let space = closed_market_space(2, 1, 3, 1, 1).unwrap();
        let m = build_two_trader(&ModelParams::two_trader([0.4, 0.9], [0.7, 0.2]), &space)
            .unwrap();
        let d = space.dim();
        let mut h = DMatrix::<Complex64>::zeros(d, d);
        for (r, c, v) in m.hamiltonian.entries() {
            h[(r, c)] = v;
        }
        let eig = h.symmetric_eigen();
        let state = NumberState::new(vec![1, 0, 2, 1, 1, 0]);
        let j = state.index_in(&space).unwrap();
        let prop = Propagator::new(&m.hamiltonian, &state).unwrap();
        assert!(prop.block().len() < d);
        for t in [0.0, 0.37, 2.9] {
            let phases = DMatrix::from_diagonal(&DVector::from_iterator(
                d,
                eig.eigenvalues
                    .iter()
                    .map(|e| Complex64::from_polar(1.0, -e * t)),
            ));
            let u = &eig.eigenvectors * phases * eig.eigenvectors.adjoint();
            let full = prop.full_state_at(t);
            for i in 0..d {
                assert!((u[(i, j)] - full[i]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn conservation_under_exact_evolution() {
        let state = NumberState::new(vec![1, 2, 3, 2, 1, 2]);
        let m = two_trader(&state);
        let times = grid(51, 5.0);
        for c in conserved_operators(&m).unwrap() {
            let ts = evolve_expectation(&m, &c.op, &state, &times).unwrap();
            assert!(ts.max_abs_drift() < 1e-8, "{}", c.name);
        }
        let n = m.number(ModeLabel::Share(0)).unwrap();
        let ts = evolve_expectation(&m, &n, &state, &times).unwrap();
        assert_abs_diff_eq!(ts.values[0], 1.0, epsilon = 1e-12);
        assert!(ts.max_abs_drift() > 1e-3);
    }

    #[test]
    fn margin_violation_detected() {
        let space = closed_market_space(2, 2, 2, 1, 1).unwrap();
        let m = build_two_trader(&ModelParams::two_trader([1.0; 2], [1.0; 2]), &space).unwrap();
        let state = NumberState::new(vec![1, 1, 2, 1, 0, 1]);
        let n = m.number(ModeLabel::Share(0)).unwrap();
        assert!(matches!(
            evolve_expectation(&m, &n, &state, &[0.0, 1.0]),
            Err(Error::MarginViolation(_))
        ));
    }

    #[test]
    fn price_closed_form_needs_decoupled_trading() {
        // no shares in play: the trading term vanishes and P follows h_po
        let state = NumberState::new(vec![0, 0, 2, 3, 2, 1]);
        let m = two_trader(&state);
        let p = m.number(ModeLabel::Price).unwrap();
        let times = grid(41, 4.0);
        let ts = evolve_expectation(&m, &p, &state, &times).unwrap();
        for (t, v) in times.iter().zip(&ts.values) {
            let (cf, _) = price_supply_closed_form(1.0, 2.0, *t, 1.0);
            assert!((v - cf).abs() < 1e-10);
        }
        // with trades possible the price-dependent amplitudes feed back on p
        let state = NumberState::new(vec![1, 1, 2, 2, 2, 1]);
        let m = two_trader(&state);
        let ts = evolve_expectation(&m, &p_of(&m), &state, &times).unwrap();
        let worst = times
            .iter()
            .zip(&ts.values)
            .map(|(t, v)| (v - price_supply_closed_form(1.0, 2.0, *t, 1.0).0).abs())
            .fold(0.0, f64::max);
        assert!(worst > 1e-3);
        let delta = crate::fock::lower(&m.space, m.space.require_mode(ModeLabel::Supply(0)).unwrap())
            .unwrap()
            .sub(&lower(&m.space, m.space.require_mode(ModeLabel::Price).unwrap()).unwrap())
            .unwrap();
        assert!(crate::fock::commutator(&m.hamiltonian, &delta).unwrap().max_abs() > 0.1);
    }

    fn p_of(m: &MarketModel) -> MatrixOperator {
        m.number(ModeLabel::Price).unwrap()
    }

    #[test]
    fn effective_price_follows_closed_form() {
        let space = closed_market_space(2, 2, 4, 3, 3).unwrap();
        let params = ModelParams {
            alpha: vec![0.5, 1.0],
            beta: vec![0.3, 0.8],
            interaction: vec![vec![0.0, 0.6], vec![0.6, 0.0]],
            ..Default::default()
        };
        let m = build_effective_l(&params, 1, &space).unwrap();
        let state = NumberState::new(vec![1, 1, 2, 2, 3, 0]);
        let times = grid(41, 4.0);
        let ts = evolve_expectation(&m, &p_of(&m), &state, &times).unwrap();
        for (t, v) in times.iter().zip(&ts.values) {
            assert!((v - price_supply_closed_form(0.0, 3.0, *t, 1.0).0).abs() < 1e-10);
        }
    }

    #[test]
    fn effective_reduction_identity() {
        let space = closed_market_space(3, 3, 6, 1, 1).unwrap();
        let params = ModelParams {
            alpha: vec![0.5, 1.0, 0.2],
            beta: vec![0.3, 0.8, 0.6],
            interaction: vec![
                vec![0.0, 0.4, 0.9],
                vec![0.4, 0.0, 0.3],
                vec![0.9, 0.3, 0.0],
            ],
            ..Default::default()
        };
        let m = build_effective_l(&params, 2, &space).unwrap();
        let state = NumberState::new(vec![1, 1, 1, 2, 2, 2, 1, 0]);
        let times = grid(21, 3.0);
        let gamma = 1.7;
        let direct = portfolio_series(&m, 0, PortfolioForm::Gamma(gamma), &state, &times).unwrap();
        let reduced = portfolio_reduced(&m, 0, gamma, &state, &times).unwrap();
        for (a, b) in direct.values.iter().zip(&reduced.values) {
            assert!((a - b).abs() < 1e-9);
        }
        // price form of the effective model is the Q-conserving one
        let pi = portfolio_series(&m, 0, PortfolioForm::Price, &state, &times).unwrap();
        assert!(pi.max_abs_drift() < 1e-9);
        let (_, h_po) = split_effective(&m).unwrap();
        assert!(h_po.hermitian_defect() < 1e-15);
    }

    #[test]
    fn portfolio_derivative_is_price_rate_times_shares() {
        let state = NumberState::new(vec![1, 1, 2, 2, 2, 1]);
        let m = two_trader(&state);
        let pi = portfolio_operator(&m, 0, PortfolioForm::Price).unwrap();
        assert_eq!(expectation(&state, &pi).unwrap().re, 1.0 * 1.0 + 2.0);
        // dP/dt = i[H, P]
        let p = m.number(ModeLabel::Price).unwrap();
        let pdot = crate::fock::commutator(&m.hamiltonian, &p)
            .unwrap()
            .scale(Complex64::i());
        let rate = pdot.mul(&m.number(ModeLabel::Share(0)).unwrap()).unwrap();
        let prop = Propagator::new(&m.hamiltonian, &state).unwrap();
        let h = 1e-4;
        for t in [0.3, 1.1, 2.5] {
            let fd = (prop.expectation_at(&pi, t + h).unwrap()
                - prop.expectation_at(&pi, t - h).unwrap())
                / (2.0 * h);
            let direct = prop.expectation_at(&rate, t).unwrap();
            assert!((fd - direct).norm() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn series_matches_matrix_commutators() {
        let state = NumberState::new(vec![1, 1, 2, 2, 1, 1]);
        let m = two_trader(&state);
        let pi = portfolio_operator(&m, 0, PortfolioForm::Price).unwrap();
        let series = heisenberg_series(&m, &pi, &state, 4).unwrap();
        let mut fact = 1.0;
        for k in 0..=4 {
            if k > 0 {
                fact *= k as f64;
            }
            let ad = nested_commutator(&m.hamiltonian, &pi, k).unwrap();
            let direct = Complex64::i().powu(k as u32) * expectation(&state, &ad).unwrap() / fact;
            assert!((direct - series.coeffs[k]).norm() < 1e-10, "order {k}");
        }
        assert_eq!(series.coeffs[0].re, expectation(&state, &pi).unwrap().re);
    }

    #[test]
    fn series_truncation_error_scaling() {
        let state = NumberState::new(vec![1, 1, 2, 3, 2, 1]);
        let m = two_trader(&state);
        let pi = portfolio_operator(&m, 0, PortfolioForm::Price).unwrap();
        let prop = Propagator::new(&m.hamiltonian, &state).unwrap();
        let series = heisenberg_series(&m, &pi, &state, 6).unwrap();
        // the t^6 remainder of the order-4 truncation sinks into rounding
        // below t ~ 0.01, so that order is fitted one decade higher
        for (order, t_hi) in [(1usize, 0.01), (2, 0.01), (3, 0.01), (4, 0.1)] {
            let ts: Vec<f64> = (0..8).map(|i| t_hi * 10f64.powf(-(i as f64) / 8.0)).collect();
            let pts: Vec<(f64, f64)> = ts
                .iter()
                .map(|&t| {
                    let exact = prop.expectation_at(&pi, t).unwrap();
                    let err = (series.eval_truncated(t, order) - exact).norm();
                    (t.ln(), err.ln())
                })
                .collect();
            let slope = log_log_slope(&pts);
            // odd coefficients vanish, so an even truncation gains one power
            let expect = if order % 2 == 0 { order + 2 } else { order + 1 } as f64;
            assert!((slope - expect).abs() < 0.2, "order {order}: slope {slope}");
        }
    }

    fn log_log_slope(pts: &[(f64, f64)]) -> f64 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }

    #[test]
    fn series_margin_check() {
        let space = closed_market_space(2, 3, 6, 2, 2).unwrap();
        let m = build_two_trader(&ModelParams::two_trader([1.0; 2], [1.0; 2]), &space).unwrap();
        let x = m.number(ModeLabel::Share(0)).unwrap();
        let edge = NumberState::new(vec![3, 1, 1, 1, 1, 1]);
        assert!(heisenberg_series(&m, &x, &edge, 2).is_err());
    }

    #[test]
    fn non_hermitian_rejected() {
        let space = FockSpace::unlabeled(vec![2]).unwrap();
        let h = raise(&space, 0).unwrap();
        let st = NumberState::new(vec![0]);
        assert!(matches!(Propagator::new(&h, &st), Err(Error::NotHermitian(_))));
        let h = raise(&space, 0).unwrap().add(&lower(&space, 0).unwrap()).unwrap();
        let x = number(&space, 0).unwrap();
        let ts = evolve_with(&h, &x, &st, &[0.0, 0.5]).unwrap();
        assert_abs_diff_eq!(ts.values[0], 0.0, epsilon = 1e-12);
    }
}
