//! Market Hamiltonians and their integrals of motion.
//!
//! Mode ordering is fixed: shares, then cash, then supply, then price, with
//! traders in index order inside each group. In the open market the tracked
//! trader is index 0 and reservoir trader `k` (position `k` in the label set)
//! is index `k + 1`; reservoir supply mode `k` is `Supply(k)`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{
    lower, number, raise, FockSpace, LadderKind, MatrixOperator, ModeLabel, NumberState,
};
use crate::price_ladder::cash_power_op;

/// Frequencies and smearing amplitudes of one reservoir trader `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirTrader {
    /// Ω_A(k)
    pub omega_share: f64,
    /// Ω_C(k)
    pub omega_cash: f64,
    /// Ω_O(k)
    pub omega_supply: f64,
    /// f(k), smearing of the share/cash field.
    pub f: Complex64,
    /// g(k), smearing of the supply field.
    pub g: Complex64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelParams {
    pub omega_a: f64,
    pub omega_c: f64,
    pub omega_p: f64,
    pub reservoir: Vec<ReservoirTrader>,
    /// Share frequencies α_l of the closed models.
    pub alpha: Vec<f64>,
    /// Cash frequencies β_l of the closed models.
    pub beta: Vec<f64>,
    /// Symmetric trader interaction matrix with zero diagonal.
    pub interaction: Vec<Vec<f64>>,
    pub lambda: f64,
}

impl ModelParams {
    pub fn two_trader(alpha: [f64; 2], beta: [f64; 2]) -> Self {
        ModelParams {
            alpha: alpha.to_vec(),
            beta: beta.to_vec(),
            ..Default::default()
        }
    }

    fn check_closed(&self, traders: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.alpha.len() != traders || self.beta.len() != traders {
            return bad(format!(
                "expected {traders} alpha and beta values, got {} and {}",
                self.alpha.len(),
                self.beta.len()
            ));
        }
        if self
            .alpha
            .iter()
            .chain(&self.beta)
            .any(|x| !x.is_finite() || *x < 0.0)
        {
            return bad("alpha and beta must be finite and nonnegative".into());
        }
        Ok(())
    }

    fn check_interaction(&self, traders: usize) -> Result<()> {
        let p = &self.interaction;
        if p.len() != traders || p.iter().any(|row| row.len() != traders) {
            return Err(Error::InvalidParams(format!(
                "interaction matrix must be {traders}x{traders}"
            )));
        }
        for (i, row) in p.iter().enumerate() {
            if row[i] != 0.0 {
                return Err(Error::InvalidParams(format!("p[{i}][{i}] must be zero")));
            }
            for (j, &v) in row.iter().enumerate() {
                if v < 0.0 || !v.is_finite() || v != p[j][i] {
                    return Err(Error::InvalidParams(format!(
                        "p[{i}][{j}] must be finite, nonnegative and symmetric"
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_open(&self) -> Result<()> {
        if self.reservoir.is_empty() {
            return Err(Error::InvalidParams("reservoir label set is empty".into()));
        }
        let freqs = [self.omega_a, self.omega_c, self.omega_p, self.lambda];
        let res = self
            .reservoir
            .iter()
            .flat_map(|r| [r.omega_share, r.omega_cash, r.omega_supply]);
        if freqs.into_iter().chain(res).any(|x| !x.is_finite() || x < 0.0) {
            return Err(Error::InvalidParams(
                "frequencies and coupling must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    TwoTrader,
    /// Closed L-trader model with the price frozen to a c-number.
    EffectiveL { price: u32 },
    OpenMarket,
}

#[derive(Debug, Clone)]
pub struct MarketModel {
    pub params: ModelParams,
    pub space: Arc<FockSpace>,
    pub hamiltonian: MatrixOperator,
    pub kind: ModelKind,
}

#[derive(Debug, Clone)]
pub struct ConservedOperator {
    pub name: String,
    pub op: MatrixOperator,
}

fn labels_closed(traders: usize) -> Vec<ModeLabel> {
    (0..traders)
        .map(ModeLabel::Share)
        .chain((0..traders).map(ModeLabel::Cash))
        .chain([ModeLabel::Supply(0), ModeLabel::Price])
        .collect()
}

fn labels_open(reservoir: usize) -> Vec<ModeLabel> {
    (0..=reservoir)
        .map(ModeLabel::Share)
        .chain((0..=reservoir).map(ModeLabel::Cash))
        .chain((0..reservoir).map(ModeLabel::Supply))
        .chain([ModeLabel::Price])
        .collect()
}

/// Space for a closed market of `traders` traders (two-trader or effective
/// model) with uniform cutoffs per mode group.
pub fn closed_market_space(
    traders: usize,
    share_cutoff: usize,
    cash_cutoff: usize,
    supply_cutoff: usize,
    price_cutoff: usize,
) -> Result<Arc<FockSpace>> {
    let cutoffs = std::iter::repeat_n(share_cutoff, traders)
        .chain(std::iter::repeat_n(cash_cutoff, traders))
        .chain([supply_cutoff, price_cutoff])
        .collect();
    FockSpace::new(cutoffs, labels_closed(traders))
}

/// Closed-market space whose cutoffs equal the conserved totals of `state`
/// (`[n_1..n_L, k_1..k_L, O, M]`). Evolution from `state` never reaches the
/// truncation.
pub fn closed_market_space_for(state: &NumberState) -> Result<Arc<FockSpace>> {
    let occ = state.occupations();
    if occ.len() < 6 || !occ.len().is_multiple_of(2) {
        return Err(Error::InvalidParams(format!(
            "closed-market state needs 2L+2 occupations with L >= 2, got {}",
            occ.len()
        )));
    }
    let traders = (occ.len() - 2) / 2;
    let shares: usize = occ[..traders].iter().sum();
    let cash: usize = occ[traders..2 * traders].iter().sum();
    let gamma = occ[2 * traders] + occ[2 * traders + 1];
    closed_market_space(traders, shares, cash, gamma, gamma)
}

/// Open-market space: tracked trader plus `reservoir` reservoir traders.
pub fn open_market_space(
    reservoir: usize,
    share_cutoff: usize,
    cash_cutoff: usize,
    supply_cutoff: usize,
    price_cutoff: usize,
) -> Result<Arc<FockSpace>> {
    let cutoffs = std::iter::repeat_n(share_cutoff, reservoir + 1)
        .chain(std::iter::repeat_n(cash_cutoff, reservoir + 1))
        .chain(std::iter::repeat_n(supply_cutoff, reservoir))
        .chain([price_cutoff])
        .collect();
    FockSpace::new(cutoffs, labels_open(reservoir))
}

/// Open-market space sized by the conserved totals of `state`, laid out as
/// `[n, N_1..N_r, k, K_1..K_r, O_1..O_r, M]`.
pub fn open_market_space_for(reservoir: usize, state: &NumberState) -> Result<Arc<FockSpace>> {
    let occ = state.occupations();
    let r = reservoir;
    if occ.len() != 3 * r + 3 || r == 0 {
        return Err(Error::InvalidParams(format!(
            "open-market state with {r} reservoir traders needs {} occupations",
            3 * r + 3
        )));
    }
    let shares: usize = occ[..=r].iter().sum();
    let cash: usize = occ[r + 1..2 * r + 2].iter().sum();
    let gamma: usize = occ[2 * r + 2..].iter().sum();
    open_market_space(r, shares, cash, gamma, gamma)
}

struct Ops<'a> {
    space: &'a Arc<FockSpace>,
}

impl Ops<'_> {
    fn mode(&self, l: ModeLabel) -> Result<usize> {
        self.space.require_mode(l)
    }
    fn n(&self, l: ModeLabel) -> Result<MatrixOperator> {
        number(self.space, self.mode(l)?)
    }
    fn lo(&self, l: ModeLabel) -> Result<MatrixOperator> {
        lower(self.space, self.mode(l)?)
    }
    fn hi(&self, l: ModeLabel) -> Result<MatrixOperator> {
        raise(self.space, self.mode(l)?)
    }
    fn cash_pow(&self, trader: usize, kind: LadderKind) -> Result<MatrixOperator> {
        cash_power_op(
            self.space,
            self.mode(ModeLabel::Cash(trader))?,
            self.mode(ModeLabel::Price)?,
            kind,
        )
    }
    fn product(&self, factors: &[&MatrixOperator]) -> Result<MatrixOperator> {
        let mut out = MatrixOperator::identity(self.space);
        for f in factors {
            out = out.mul(f)?;
        }
        Ok(out)
    }
    fn weighted_sum(&self, terms: &[(f64, MatrixOperator)]) -> Result<MatrixOperator> {
        let mut out = MatrixOperator::zero(self.space);
        for (w, t) in terms {
            out = out.axpy(Complex64::new(*w, 0.0), t)?;
        }
        Ok(out)
    }
}

fn traders_in(space: &FockSpace) -> usize {
    space
        .labels()
        .iter()
        .filter(|l| matches!(l, ModeLabel::Share(_)))
        .count()
}

/// `o†o + p†p + o†p + p†o` on the single supply mode of a closed market.
fn price_supply_block(ops: &Ops) -> Result<MatrixOperator> {
    let o = ops.lo(ModeLabel::Supply(0))?;
    let od = ops.hi(ModeLabel::Supply(0))?;
    let p = ops.lo(ModeLabel::Price)?;
    let pd = ops.hi(ModeLabel::Price)?;
    ops.n(ModeLabel::Supply(0))?
        .add(&ops.n(ModeLabel::Price)?)?
        .add(&od.mul(&p)?)?
        .add(&pd.mul(&o)?)
}

fn free_closed(ops: &Ops, params: &ModelParams, traders: usize) -> Result<MatrixOperator> {
    let mut terms = Vec::new();
    for l in 0..traders {
        terms.push((params.alpha[l], ops.n(ModeLabel::Share(l))?));
        terms.push((params.beta[l], ops.n(ModeLabel::Cash(l))?));
    }
    ops.weighted_sum(&terms)
}

/// Two traders exchanging one share at the dynamical price `P`:
/// `H = H_0 + a_1† a_2 c_1^P (c_2†)^P + a_1 a_2† (c_1†)^P c_2^P + o†p + p†o`.
pub fn build_two_trader(params: &ModelParams, space: &Arc<FockSpace>) -> Result<MarketModel> {
    params.check_closed(2)?;
    let ops = Ops { space };
    for l in labels_closed(2) {
        ops.mode(l)?;
    }
    let a1 = ops.lo(ModeLabel::Share(0))?;
    let a1d = ops.hi(ModeLabel::Share(0))?;
    let a2 = ops.lo(ModeLabel::Share(1))?;
    let a2d = ops.hi(ModeLabel::Share(1))?;
    let c1p = ops.cash_pow(0, LadderKind::Lower)?;
    let c1dp = ops.cash_pow(0, LadderKind::Raise)?;
    let c2p = ops.cash_pow(1, LadderKind::Lower)?;
    let c2dp = ops.cash_pow(1, LadderKind::Raise)?;

    let buy = ops.product(&[&a1d, &a2, &c1p, &c2dp])?;
    let sell = ops.product(&[&a1, &a2d, &c1dp, &c2p])?;
    let hamiltonian = free_closed(&ops, params, 2)?
        .add(&buy)?
        .add(&sell)?
        .add(&price_supply_block(&ops)?)?;
    Ok(MarketModel {
        params: params.clone(),
        space: Arc::clone(space),
        hamiltonian,
        kind: ModelKind::TwoTrader,
    })
}

/// L-trader model with the price operator replaced by the integer `price`:
/// `H_I = Σ_ij p_ij (a_i† a_j (c_i c_j†)^M + a_i a_j† (c_j c_i†)^M) + o†p + p†o`.
pub fn build_effective_l(
    params: &ModelParams,
    price: u32,
    space: &Arc<FockSpace>,
) -> Result<MarketModel> {
    let traders = traders_in(space);
    if traders < 2 {
        return Err(Error::MissingMode("at least two trader share modes".into()));
    }
    params.check_closed(traders)?;
    params.check_interaction(traders)?;
    let ops = Ops { space };
    for l in labels_closed(traders) {
        ops.mode(l)?;
    }
    let a: Vec<_> = (0..traders)
        .map(|l| ops.lo(ModeLabel::Share(l)))
        .collect::<Result<_>>()?;
    let ad: Vec<_> = a.iter().map(MatrixOperator::adjoint).collect();
    let cm: Vec<_> = (0..traders)
        .map(|l| Ok(ops.lo(ModeLabel::Cash(l))?.pow(price)))
        .collect::<Result<_>>()?;
    let cdm: Vec<_> = (0..traders)
        .map(|l| Ok(ops.hi(ModeLabel::Cash(l))?.pow(price)))
        .collect::<Result<_>>()?;

    let mut h = free_closed(&ops, params, traders)?;
    for i in 0..traders {
        for j in 0..traders {
            let pij = params.interaction[i][j];
            if pij == 0.0 {
                continue;
            }
            let t1 = ops.product(&[&ad[i], &a[j], &cm[i], &cdm[j]])?;
            let t2 = ops.product(&[&a[i], &ad[j], &cm[j], &cdm[i]])?;
            h = h.axpy(Complex64::new(pij, 0.0), &t1.add(&t2)?)?;
        }
    }
    let hamiltonian = h.add(&price_supply_block(&ops)?)?;
    Ok(MarketModel {
        params: params.clone(),
        space: Arc::clone(space),
        hamiltonian,
        kind: ModelKind::EffectiveL { price },
    })
}

/// Splits an effective model into the trading part `h` and the decoupled
/// price/supply part `h_po`.
pub fn split_effective(model: &MarketModel) -> Result<(MatrixOperator, MatrixOperator)> {
    if !matches!(model.kind, ModelKind::EffectiveL { .. }) {
        return Err(Error::UnsupportedModel("split", "effective L-trader"));
    }
    let h_po = price_supply_block(&Ops {
        space: &model.space,
    })?;
    Ok((model.hamiltonian.sub(&h_po)?, h_po))
}

/// Tracked trader coupled to a finite reservoir:
/// `H = H_0 + λ (z† Z(f) + z Z†(f̄) + p† o(g) + p o†(ḡ))` with
/// `z = a (c†)^P`, `Z_k = A_k (C_k†)^P`.
pub fn build_open_market(params: &ModelParams, space: &Arc<FockSpace>) -> Result<MarketModel> {
    params.check_open()?;
    let r = params.reservoir.len();
    let ops = Ops { space };
    for l in labels_open(r) {
        ops.mode(l)?;
    }
    let z = ops
        .lo(ModeLabel::Share(0))?
        .mul(&ops.cash_pow(0, LadderKind::Raise)?)?;
    let mut zf = MatrixOperator::zero(space);
    let mut og = MatrixOperator::zero(space);
    let mut free = ops.weighted_sum(&[
        (params.omega_a, ops.n(ModeLabel::Share(0))?),
        (params.omega_c, ops.n(ModeLabel::Cash(0))?),
        (params.omega_p, ops.n(ModeLabel::Price)?),
    ])?;
    for (k, res) in params.reservoir.iter().enumerate() {
        let zk = ops
            .lo(ModeLabel::Share(k + 1))?
            .mul(&ops.cash_pow(k + 1, LadderKind::Raise)?)?;
        zf = zf.axpy(res.f, &zk)?;
        og = og.axpy(res.g, &ops.lo(ModeLabel::Supply(k))?)?;
        free = free.add(&ops.weighted_sum(&[
            (res.omega_share, ops.n(ModeLabel::Share(k + 1))?),
            (res.omega_cash, ops.n(ModeLabel::Cash(k + 1))?),
            (res.omega_supply, ops.n(ModeLabel::Supply(k))?),
        ])?)?;
    }
    let pd = ops.hi(ModeLabel::Price)?;
    // z Z†(f̄) and p o†(ḡ) are the adjoints of z† Z(f) and p† o(g)
    let trade = z.adjoint().mul(&zf)?;
    let price = pd.mul(&og)?;
    let interaction = trade
        .add(&trade.adjoint())?
        .add(&price)?
        .add(&price.adjoint())?;
    let hamiltonian = free.axpy(Complex64::new(params.lambda, 0.0), &interaction)?;
    Ok(MarketModel {
        params: params.clone(),
        space: Arc::clone(space),
        hamiltonian,
        kind: ModelKind::OpenMarket,
    })
}

impl MarketModel {
    pub fn number(&self, label: ModeLabel) -> Result<MatrixOperator> {
        number(&self.space, self.space.require_mode(label)?)
    }

    pub fn traders(&self) -> usize {
        traders_in(&self.space)
    }

    /// Per-mode margin that one application of the interaction can consume:
    /// one quantum for shares, supply and price, up to the price cutoff plus
    /// one for cash.
    pub fn margins(&self) -> Vec<usize> {
        let price_cut = self
            .space
            .mode_of(ModeLabel::Price)
            .map(|m| self.space.cutoff(m))
            .unwrap_or(0);
        let cash_step = match self.kind {
            ModelKind::EffectiveL { price } => price as usize,
            _ => price_cut + 1,
        };
        self.space
            .labels()
            .iter()
            .map(|l| match l {
                ModeLabel::Cash(_) => cash_step,
                _ => 1,
            })
            .collect()
    }

    /// `P n_j + k_j`, the two-trader extension of the effective `Q_j`.
    pub fn price_weighted_holding(&self, trader: usize) -> Result<MatrixOperator> {
        self.number(ModeLabel::Price)?
            .mul(&self.number(ModeLabel::Share(trader))?)?
            .add(&self.number(ModeLabel::Cash(trader))?)
    }
}

/// Integrals of motion admitted by the model: total shares `N`, total cash
/// `K` and `Γ` (price plus supply). With the price frozen the effective model
/// also conserves `Δ = o - p` and `Q_j = n_j + k_j / M`.
pub fn conserved_operators(model: &MarketModel) -> Result<Vec<ConservedOperator>> {
    let space = &model.space;
    let ops = Ops { space };
    let sum_of = |pred: fn(&ModeLabel) -> bool| -> Result<MatrixOperator> {
        let mut out = MatrixOperator::zero(space);
        for (m, l) in space.labels().iter().enumerate() {
            if pred(l) {
                out = out.add(&number(space, m)?)?;
            }
        }
        Ok(out)
    };
    let mut out = vec![
        ConservedOperator {
            name: "N".into(),
            op: sum_of(|l| matches!(l, ModeLabel::Share(_)))?,
        },
        ConservedOperator {
            name: "K".into(),
            op: sum_of(|l| matches!(l, ModeLabel::Cash(_)))?,
        },
        ConservedOperator {
            name: "Gamma".into(),
            op: sum_of(|l| matches!(l, ModeLabel::Supply(_) | ModeLabel::Price))?,
        },
    ];
    match model.kind {
        ModelKind::OpenMarket | ModelKind::TwoTrader => {}
        ModelKind::EffectiveL { .. } => {
            out.push(ConservedOperator {
                name: "Delta".into(),
                op: ops.lo(ModeLabel::Supply(0))?.sub(&ops.lo(ModeLabel::Price)?)?,
            });
        }
    }
    if let ModelKind::EffectiveL { price } = model.kind {
        if price > 0 {
            for j in 0..model.traders() {
                let q = ops.n(ModeLabel::Share(j))?.axpy(
                    Complex64::new(1.0 / f64::from(price), 0.0),
                    &ops.n(ModeLabel::Cash(j))?,
                )?;
                out.push(ConservedOperator {
                    name: format!("Q{}", j + 1),
                    op: q,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{commutator, expectation};

    fn two_trader_model() -> MarketModel {
        let space = closed_market_space(2, 2, 6, 2, 2).unwrap();
        build_two_trader(&ModelParams::two_trader([0.3, 0.7], [1.1, 0.4]), &space).unwrap()
    }

    fn basis(space: &Arc<FockSpace>, occ: &[usize]) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); space.dim()];
        v[space.index_of(occ).unwrap()] = Complex64::new(1.0, 0.0);
        v
    }

    fn element(model: &MarketModel, op: &MatrixOperator, bra: &[usize], ket: &[usize]) -> f64 {
        let out = op.apply(&basis(&model.space, ket));
        out[model.space.index_of(bra).unwrap()].re
    }

    #[test]
    fn two_trader_is_hermitian() {
        let m = two_trader_model();
        assert!(m.hamiltonian.hermitian_defect() < 1e-12);
    }

    #[test]
    fn two_trader_share_transfer_amplitude() {
        let m = two_trader_model();
        let free = free_closed(&Ops { space: &m.space }, &m.params, 2).unwrap();
        let h_i = m.hamiltonian.sub(&free).unwrap();
        // trader 1 buys from trader 2 at price M: a1† √1, a2 √1,
        // c1^P on k1 = M gives √(M!), (c2†)^P on k2 = 0 gives √(M!)
        for price in 1..=2usize {
            let ket = [0, 1, price, 0, 0, price];
            let bra = [1, 0, 0, price, 0, price];
            let fact: f64 = (1..=price).map(|x| x as f64).product();
            assert!((element(&m, &h_i, &bra, &ket) - fact).abs() < 1e-12);
        }
        // gaining a share and cash at once is impossible
        assert_eq!(element(&m, &h_i, &[1, 0, 1, 0, 0, 1], &[0, 1, 0, 1, 0, 1]), 0.0);
        // buying 1 share with 2 cash at price 2, k1 = 3 -> 1, k2 = 1 -> 3
        let amp = element(&m, &h_i, &[2, 0, 1, 3, 0, 2], &[1, 1, 3, 1, 0, 2]);
        let hand = (2.0f64).sqrt() * 1.0 * (3.0f64 * 2.0).sqrt() * (2.0f64 * 3.0).sqrt();
        assert!((amp - hand).abs() < 1e-12);
    }

    #[test]
    fn zero_price_sector_is_plain_hopping() {
        let m = two_trader_model();
        let ops = Ops { space: &m.space };
        let free = free_closed(&ops, &m.params, 2).unwrap();
        let h_i = m.hamiltonian.sub(&free).unwrap();
        let a1 = ops.lo(ModeLabel::Share(0)).unwrap();
        let a2 = ops.lo(ModeLabel::Share(1)).unwrap();
        let hop = a1
            .adjoint()
            .mul(&a2)
            .unwrap()
            .add(&a1.mul(&a2.adjoint()).unwrap())
            .unwrap()
            .add(&price_supply_block(&ops).unwrap())
            .unwrap();
        let price_mode = m.space.require_mode(ModeLabel::Price).unwrap();
        let zero_price = |i: usize| m.space.occupation(i, price_mode) == 0;
        assert!(h_i.sub(&hop).unwrap().max_abs_on_columns(zero_price) < 1e-12);
    }

    #[test]
    fn two_trader_conservation_and_q_breaking() {
        let m = two_trader_model();
        let margins = m.margins();
        let interior = |i: usize| m.space.is_interior(i, &margins);
        let cons = conserved_operators(&m).unwrap();
        let names: Vec<_> = cons.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["N", "K", "Gamma"]);
        for c in &cons {
            let comm = commutator(&m.hamiltonian, &c.op).unwrap();
            assert!(comm.max_abs_on_columns(interior) < 1e-12, "{}", c.name);
        }
        let q = m.price_weighted_holding(0).unwrap();
        let comm = commutator(&m.hamiltonian, &q).unwrap();
        assert!(comm.max_abs_on_columns(interior) > 0.1);
    }

    #[test]
    fn effective_model_integrals() {
        let space = closed_market_space(3, 2, 6, 1, 2).unwrap();
        let params = ModelParams {
            alpha: vec![0.5, 1.0, 1.5],
            beta: vec![0.2, 0.9, 0.4],
            interaction: vec![
                vec![0.0, 0.3, 0.7],
                vec![0.3, 0.0, 0.2],
                vec![0.7, 0.2, 0.0],
            ],
            ..Default::default()
        };
        let m = build_effective_l(&params, 2, &space).unwrap();
        assert!(m.hamiltonian.hermitian_defect() < 1e-12);
        let margins = m.margins();
        let interior = |i: usize| m.space.is_interior(i, &margins);
        let cons = conserved_operators(&m).unwrap();
        assert_eq!(cons.len(), 7);
        for c in &cons {
            let comm = commutator(&m.hamiltonian, &c.op).unwrap();
            assert!(comm.max_abs_on_columns(interior) < 1e-12, "{}", c.name);
        }
    }

    #[test]
    fn effective_diagonal_without_interaction() {
        let space = closed_market_space(2, 2, 3, 1, 1).unwrap();
        let params = ModelParams {
            alpha: vec![0.5, 1.25],
            beta: vec![2.0, 0.75],
            interaction: vec![vec![0.0; 2]; 2],
            ..Default::default()
        };
        let m = build_effective_l(&params, 1, &space).unwrap();
        let (h, _) = split_effective(&m).unwrap();
        let st = NumberState::new(vec![2, 1, 3, 0, 1, 1]);
        let diag = expectation(&st, &m.hamiltonian).unwrap().re;
        assert!((diag - (0.5 * 2.0 + 1.25 + 2.0 * 3.0 + 1.0 + 1.0)).abs() < 1e-12);
        assert!((expectation(&st, &h).unwrap().re - (diag - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn parameter_validation() {
        let space = closed_market_space(2, 1, 1, 1, 1).unwrap();
        let mut params = ModelParams {
            alpha: vec![1.0, 1.0],
            beta: vec![1.0, 1.0],
            interaction: vec![vec![0.5, 0.0], vec![0.0, 0.0]],
            ..Default::default()
        };
        assert!(matches!(
            build_effective_l(&params, 1, &space),
            Err(Error::InvalidParams(_))
        ));
        params.interaction = vec![vec![0.0, 0.2], vec![0.3, 0.0]];
        assert!(build_effective_l(&params, 1, &space).is_err());
        let open = ModelParams::default();
        let space = open_market_space(1, 1, 1, 1, 1).unwrap();
        assert!(matches!(
            build_open_market(&open, &space),
            Err(Error::InvalidParams(_))
        ));
        let unlabeled = FockSpace::unlabeled(vec![1; 6]).unwrap();
        assert!(matches!(
            build_two_trader(&ModelParams::two_trader([1.0; 2], [1.0; 2]), &unlabeled),
            Err(Error::MissingMode(_))
        ));
    }

    fn open_model(lambda: f64, f: Complex64) -> MarketModel {
        let params = ModelParams {
            omega_a: 1.0,
            omega_c: 0.5,
            omega_p: 0.8,
            lambda,
            reservoir: vec![ReservoirTrader {
                omega_share: 2.0,
                omega_cash: 0.3,
                omega_supply: 1.1,
                f,
                g: Complex64::new(1.0, 0.0),
            }],
            ..Default::default()
        };
        let space = open_market_space(1, 2, 5, 2, 2).unwrap();
        build_open_market(&params, &space).unwrap()
    }

    #[test]
    fn open_market_structure() {
        let m = open_model(0.0, Complex64::new(1.0, 0.0));
        assert!(m.hamiltonian.entries().all(|(r, c, _)| r == c));
        let m = open_model(0.6, Complex64::new(0.8, -0.3));
        assert!(m.hamiltonian.hermitian_defect() < 1e-12);
        let margins = m.margins();
        let interior = |i: usize| m.space.is_interior(i, &margins);
        for c in conserved_operators(&m).unwrap() {
            let comm = commutator(&m.hamiltonian, &c.op).unwrap();
            assert!(comm.max_abs_on_columns(interior) < 1e-12, "{}", c.name);
        }
    }

    #[test]
    fn open_market_transfer_amplitude() {
        // layout [n, N1, k, K1, O1, M]
        let lambda = 0.6;
        let m = open_model(lambda, Complex64::new(1.0, 0.0));
        // z† Z(f): tracked trader buys one share from the reservoir at price 2
        // c^P on k = 2: √2, a† on n = 0: 1, A on N = 1: 1, (C†)^P on K = 0: √2
        let ket = [0, 1, 2, 0, 0, 2];
        let bra = [1, 0, 0, 2, 0, 2];
        let amp = element(&m, &m.hamiltonian, &bra, &ket);
        assert!((amp - lambda * 2.0).abs() < 1e-12);
    }
}
