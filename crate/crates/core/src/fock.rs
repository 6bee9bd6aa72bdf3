//! Truncated multi-mode bosonic Fock spaces and sparse operators on them.
//!
//! Basis vectors are occupation tuples, one entry per mode, each bounded by
//! the mode cutoff. The dense basis index is mixed-radix with the last mode
//! varying fastest. Raising past the cutoff annihilates the state (hard
//! truncation), so canonical relations hold only on states strictly below
//! the cutoffs; tests therefore check identities on an interior subspace.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest basis size accepted by [`FockSpace::new`].
pub const DEFAULT_MAX_DIM: usize = 1 << 22;

/// Semantic role of a mode. Trader indices start at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModeLabel {
    Share(usize),
    Cash(usize),
    Supply(usize),
    Price,
    /// Unlabelled mode, identified only by position.
    Mode(usize),
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeLabel::Share(i) => write!(f, "share[{i}]"),
            ModeLabel::Cash(i) => write!(f, "cash[{i}]"),
            ModeLabel::Supply(i) => write!(f, "supply[{i}]"),
            ModeLabel::Price => write!(f, "price"),
            ModeLabel::Mode(i) => write!(f, "mode[{i}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderKind {
    Lower,
    Raise,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockSpace {
    cutoffs: Vec<usize>,
    labels: Vec<ModeLabel>,
    strides: Vec<usize>,
    dim: usize,
}

impl FockSpace {
    pub fn new(cutoffs: Vec<usize>, labels: Vec<ModeLabel>) -> Result<Arc<Self>> {
        Self::with_max_dim(cutoffs, labels, DEFAULT_MAX_DIM)
    }

    /// Space whose modes are labelled by position only.
    pub fn unlabeled(cutoffs: Vec<usize>) -> Result<Arc<Self>> {
        let labels = (0..cutoffs.len()).map(ModeLabel::Mode).collect();
        Self::new(cutoffs, labels)
    }

    pub fn with_max_dim(
        cutoffs: Vec<usize>,
        labels: Vec<ModeLabel>,
        max_dim: usize,
    ) -> Result<Arc<Self>> {
        if cutoffs.is_empty() {
            return Err(Error::EmptyModes);
        }
        if labels.len() != cutoffs.len() {
            return Err(Error::LabelMismatch {
                labels: labels.len(),
                cutoffs: cutoffs.len(),
            });
        }
        let mut strides = vec![0; cutoffs.len()];
        let mut dim: usize = 1;
        for (m, &c) in cutoffs.iter().enumerate().rev() {
            strides[m] = dim;
            dim = c
                .checked_add(1)
                .and_then(|r| dim.checked_mul(r))
                .filter(|&d| d <= max_dim)
                .ok_or(Error::Capacity { max: max_dim })?;
        }
        Ok(Arc::new(FockSpace {
            cutoffs,
            labels,
            strides,
            dim,
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn labels(&self) -> &[ModeLabel] {
        &self.labels
    }

    pub fn cutoff(&self, mode: usize) -> usize {
        self.cutoffs[mode]
    }

    pub fn mode_of(&self, label: ModeLabel) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn require_mode(&self, label: ModeLabel) -> Result<usize> {
        self.mode_of(label)
            .ok_or_else(|| Error::MissingMode(label.to_string()))
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.modes() {
            Ok(())
        } else {
            Err(Error::InvalidMode {
                mode,
                modes: self.modes(),
            })
        }
    }

    pub fn index_of(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.modes()
            || occupations.iter().zip(&self.cutoffs).any(|(o, c)| o > c)
        {
            return Err(Error::StateOutOfRange {
                occupations: occupations.to_vec(),
                cutoffs: self.cutoffs.clone(),
            });
        }
        Ok(occupations
            .iter()
            .zip(&self.strides)
            .map(|(o, s)| o * s)
            .sum())
    }

    /// Occupation of a single mode in the basis vector `index`.
    #[inline]
    pub fn occupation(&self, index: usize, mode: usize) -> usize {
        (index / self.strides[mode]) % (self.cutoffs[mode] + 1)
    }

    pub fn occupations(&self, index: usize) -> Vec<usize> {
        (0..self.modes()).map(|m| self.occupation(index, m)).collect()
    }

    #[inline]
    pub fn stride(&self, mode: usize) -> usize {
        self.strides[mode]
    }

    /// True when every mode can absorb `margins[m]` more quanta without
    /// reaching past its cutoff.
    pub fn is_interior(&self, index: usize, margins: &[usize]) -> bool {
        margins
            .iter()
            .enumerate()
            .all(|(m, &d)| self.occupation(index, m) + d <= self.cutoffs[m])
    }
}

/// Occupation tuple selecting one basis vector of a space.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NumberState {
    occupations: Vec<usize>,
}

impl NumberState {
    pub fn new(occupations: Vec<usize>) -> Self {
        NumberState { occupations }
    }

    pub fn occupations(&self) -> &[usize] {
        &self.occupations
    }

    pub fn index_in(&self, space: &FockSpace) -> Result<usize> {
        space.index_of(&self.occupations)
    }
}

/// Sparse complex matrix over the basis of a [`FockSpace`].
///
/// Entries are kept in a `(row, col)`-ordered map so iteration and
/// serialization are deterministic. Exact zeros are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixOperator {
    space: Arc<FockSpace>,
    entries: BTreeMap<(usize, usize), Complex64>,
}

impl MatrixOperator {
    pub fn zero(space: &Arc<FockSpace>) -> Self {
        MatrixOperator {
            space: Arc::clone(space),
            entries: BTreeMap::new(),
        }
    }

    pub fn identity(space: &Arc<FockSpace>) -> Self {
        Self::diagonal(space, |_| Complex64::new(1.0, 0.0))
    }

    /// Diagonal operator whose entry on each basis vector is `f(index)`.
    pub fn diagonal(space: &Arc<FockSpace>, f: impl Fn(usize) -> Complex64) -> Self {
        let entries = (0..space.dim())
            .filter_map(|i| {
                let v = f(i);
                (v != Complex64::new(0.0, 0.0)).then_some(((i, i), v))
            })
            .collect();
        MatrixOperator {
            space: Arc::clone(space),
            entries,
        }
    }

    pub fn from_entries(
        space: &Arc<FockSpace>,
        entries: impl IntoIterator<Item = ((usize, usize), Complex64)>,
    ) -> Result<Self> {
        let dim = space.dim();
        let mut map = BTreeMap::new();
        for ((r, c), v) in entries {
            if r >= dim || c >= dim {
                return Err(Error::StateOutOfRange {
                    occupations: vec![r, c],
                    cutoffs: vec![dim - 1],
                });
            }
            *map.entry((r, c)).or_insert(Complex64::new(0.0, 0.0)) += v;
        }
        map.retain(|_, v| *v != Complex64::new(0.0, 0.0));
        Ok(MatrixOperator {
            space: Arc::clone(space),
            entries: map,
        })
    }

    pub fn space(&self) -> &Arc<FockSpace> {
        &self.space
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries
            .get(&(row, col))
            .copied()
            .unwrap_or_default()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        self.entries.iter().map(|(&(r, c), &v)| (r, c, v))
    }

    fn same_space(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.space, &other.space) || self.space == other.space {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(Complex64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: Complex64, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        let mut entries = self.entries.clone();
        for (&k, &v) in &other.entries {
            *entries.entry(k).or_insert(Complex64::new(0.0, 0.0)) += alpha * v;
        }
        entries.retain(|_, v| *v != Complex64::new(0.0, 0.0));
        Ok(MatrixOperator {
            space: Arc::clone(&self.space),
            entries,
        })
    }

    pub fn scale(&self, alpha: Complex64) -> Self {
        let entries = if alpha == Complex64::new(0.0, 0.0) {
            BTreeMap::new()
        } else {
            self.entries.iter().map(|(&k, &v)| (k, alpha * v)).collect()
        };
        MatrixOperator {
            space: Arc::clone(&self.space),
            entries,
        }
    }

    pub fn scale_real(&self, alpha: f64) -> Self {
        self.scale(Complex64::new(alpha, 0.0))
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        let dim = self.space.dim();
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); dim];
        for (&(r, c), &v) in &other.entries {
            rows[r].push((c, v));
        }
        let mut out = Vec::new();
        let mut acc: BTreeMap<usize, Complex64> = BTreeMap::new();
        let mut current = None;
        let flush = |row: usize, acc: &mut BTreeMap<usize, Complex64>, out: &mut Vec<_>| {
            for (c, v) in std::mem::take(acc) {
                if v != Complex64::new(0.0, 0.0) {
                    out.push(((row, c), v));
                }
            }
        };
        for (&(r, k), &a) in &self.entries {
            if current != Some(r) {
                if let Some(prev) = current {
                    flush(prev, &mut acc, &mut out);
                }
                current = Some(r);
            }
            for &(c, b) in &rows[k] {
                *acc.entry(c).or_insert(Complex64::new(0.0, 0.0)) += a * b;
            }
        }
        if let Some(prev) = current {
            flush(prev, &mut acc, &mut out);
        }
        Ok(MatrixOperator {
            space: Arc::clone(&self.space),
            entries: out.into_iter().collect(),
        })
    }

    pub fn pow(&self, exponent: u32) -> Self {
        let mut out = MatrixOperator::identity(&self.space);
        for _ in 0..exponent {
            out = out.mul(self).expect("same space");
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        MatrixOperator {
            space: Arc::clone(&self.space),
            entries: self
                .entries
                .iter()
                .map(|(&(r, c), &v)| ((c, r), v.conj()))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest entry magnitude among columns selected by `keep`, i.e. the
    /// max-norm of the operator restricted to the span of those basis vectors.
    pub fn max_abs_on_columns(&self, keep: impl Fn(usize) -> bool) -> f64 {
        self.entries
            .iter()
            .filter(|(&(_, c), _)| keep(c))
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max)
    }

    /// Largest entry of `self - self^†`.
    pub fn hermitian_defect(&self) -> f64 {
        self.entries
            .iter()
            .map(|(&(r, c), &v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn drop_below(&self, tol: f64) -> Self {
        MatrixOperator {
            space: Arc::clone(&self.space),
            entries: self
                .entries
                .iter()
                .filter(|(_, v)| v.norm() > tol)
                .map(|(&k, &v)| (k, v))
                .collect(),
        }
    }

    /// `A x` for a dense vector over the basis.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.space.dim()];
        for (&(r, c), &v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    /// Debug dump as `row,col,re,im` lines in sorted order.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,col,re,im\n");
        for (&(r, c), v) in &self.entries {
            let _ = writeln!(s, "{r},{c},{:e},{:e}", v.re, v.im);
        }
        s
    }
}

pub fn build_space(cutoffs: Vec<usize>, labels: Vec<ModeLabel>) -> Result<Arc<FockSpace>> {
    FockSpace::new(cutoffs, labels)
}

/// Lowering (`a`) or raising (`a†`) operator of one mode.
pub fn ladder(space: &Arc<FockSpace>, mode: usize, kind: LadderKind) -> Result<MatrixOperator> {
    space.check_mode(mode)?;
    let stride = space.stride(mode);
    let cutoff = space.cutoff(mode);
    let entries = (0..space.dim()).filter_map(|i| {
        let n = space.occupation(i, mode);
        match kind {
            LadderKind::Lower if n > 0 => {
                Some(((i - stride, i), Complex64::new((n as f64).sqrt(), 0.0)))
            }
            LadderKind::Raise if n < cutoff => {
                Some(((i + stride, i), Complex64::new(((n + 1) as f64).sqrt(), 0.0)))
            }
            _ => None,
        }
    });
    MatrixOperator::from_entries(space, entries)
}

pub fn lower(space: &Arc<FockSpace>, mode: usize) -> Result<MatrixOperator> {
    ladder(space, mode, LadderKind::Lower)
}

pub fn raise(space: &Arc<FockSpace>, mode: usize) -> Result<MatrixOperator> {
    ladder(space, mode, LadderKind::Raise)
}

/// Number operator `a†a` built directly as a diagonal.
pub fn number(space: &Arc<FockSpace>, mode: usize) -> Result<MatrixOperator> {
    space.check_mode(mode)?;
    Ok(MatrixOperator::diagonal(space, |i| {
        Complex64::new(space.occupation(i, mode) as f64, 0.0)
    }))
}

pub fn commutator(a: &MatrixOperator, b: &MatrixOperator) -> Result<MatrixOperator> {
    a.mul(b)?.sub(&b.mul(a)?)
}

/// `<phi_state, A phi_state>`.
pub fn expectation(state: &NumberState, op: &MatrixOperator) -> Result<Complex64> {
    let i = state.index_in(op.space())?;
    Ok(op.get(i, i))
}
