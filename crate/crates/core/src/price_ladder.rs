//! Price-controlled cash operators.
//!
//! `c^P` removes as many cash quanta as the price mode holds, `(c†)^P` adds
//! them. On a basis vector with cash `k` and price `M`:
//!
//! ```text
//! c^P    φ(k, M) = φ(k, M)                       if M = 0
//!                = 0                             if M > k
//!                = sqrt(k (k-1) ... (k-M+1)) φ(k-M, M)
//! (c†)^P φ(k, M) = φ(k, M)                       if M = 0
//!                = sqrt((k+1) ... (k+M)) φ(k+M, M)
//! ```
//!
//! The raise form is truncated at the cash cutoff like an ordinary ladder.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{FockSpace, LadderKind, MatrixOperator};

/// Products larger than this are accumulated in log space.
pub const SATURATION_THRESHOLD: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorialKind {
    /// `k (k-1) ... (k-M+1)`
    Falling,
    /// `(k+1) (k+2) ... (k+M)`
    Rising,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorialWeight {
    pub k: u64,
    pub m: u64,
    pub kind: FactorialKind,
    /// Natural log of the weight; `-inf` when the weight vanishes.
    pub ln_value: f64,
    /// Set when the direct product passed [`SATURATION_THRESHOLD`].
    pub saturated: bool,
}

impl FactorialWeight {
    pub fn new(k: u64, m: u64, kind: FactorialKind) -> Self {
        let factors = |j: u64| match kind {
            FactorialKind::Falling => k - j,
            FactorialKind::Rising => k + 1 + j,
        };
        if kind == FactorialKind::Falling && m > k {
            return FactorialWeight {
                k,
                m,
                kind,
                ln_value: f64::NEG_INFINITY,
                saturated: false,
            };
        }
        let mut product = 1.0_f64;
        let mut ln_value = 0.0;
        let mut saturated = false;
        for j in 0..m {
            let f = factors(j) as f64;
            if saturated {
                ln_value += f.ln();
            } else {
                product *= f;
                if product > SATURATION_THRESHOLD {
                    saturated = true;
                    ln_value = product.ln();
                }
            }
        }
        if !saturated {
            ln_value = product.ln();
        }
        FactorialWeight {
            k,
            m,
            kind,
            ln_value,
            saturated,
        }
    }

    pub fn value(&self) -> f64 {
        self.ln_value.exp()
    }

    /// `sqrt(value)`, finite well beyond the range of `value` itself.
    pub fn sqrt_value(&self) -> f64 {
        (0.5 * self.ln_value).exp()
    }
}

pub fn factorial_weight(k: u64, m: u64, kind: FactorialKind) -> f64 {
    if kind == FactorialKind::Falling && m > k {
        return 0.0;
    }
    let w = FactorialWeight::new(k, m, kind);
    if w.saturated {
        return w.value();
    }
    // exact integer-valued product, no log round trip
    (0..m)
        .map(|j| match kind {
            FactorialKind::Falling => (k - j) as f64,
            FactorialKind::Rising => (k + 1 + j) as f64,
        })
        .product()
}

/// Builds `c^P` (`Lower`) or `(c†)^P` (`Raise`) and reports how many entries
/// went through the saturated log-space path.
pub fn cash_power_op_with_report(
    space: &Arc<FockSpace>,
    cash_mode: usize,
    price_mode: usize,
    kind: LadderKind,
) -> Result<(MatrixOperator, usize)> {
    space.check_mode(cash_mode)?;
    space.check_mode(price_mode)?;
    if cash_mode == price_mode {
        return Err(Error::ModeCollision(cash_mode));
    }
    let stride = space.stride(cash_mode);
    let cutoff = space.cutoff(cash_mode);
    let mut saturated = 0;
    let mut entries = Vec::new();
    for i in 0..space.dim() {
        let k = space.occupation(i, cash_mode);
        let m = space.occupation(i, price_mode);
        if m == 0 {
            entries.push(((i, i), Complex64::new(1.0, 0.0)));
            continue;
        }
        match kind {
            LadderKind::Lower if m <= k => {
                let w = FactorialWeight::new(k as u64, m as u64, FactorialKind::Falling);
                saturated += usize::from(w.saturated);
                entries.push(((i - m * stride, i), Complex64::new(w.sqrt_value(), 0.0)));
            }
            LadderKind::Raise if k + m <= cutoff => {
                let w = FactorialWeight::new(k as u64, m as u64, FactorialKind::Rising);
                saturated += usize::from(w.saturated);
                entries.push(((i + m * stride, i), Complex64::new(w.sqrt_value(), 0.0)));
            }
            _ => {}
        }
    }
    Ok((MatrixOperator::from_entries(space, entries)?, saturated))
}

pub fn cash_power_op(
    space: &Arc<FockSpace>,
    cash_mode: usize,
    price_mode: usize,
    kind: LadderKind,
) -> Result<MatrixOperator> {
    cash_power_op_with_report(space, cash_mode, price_mode, kind).map(|(op, _)| op)
}
