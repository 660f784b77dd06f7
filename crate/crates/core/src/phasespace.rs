//! Canonical charts, the Darboux matrix, full and partial Poisson brackets and
//! the involution tests built on them.
//!
//! Coordinates are always ordered `(q¹…qⁿ, p₁…pₙ)`; a chart additionally
//! carries a partition of the positions into consecutive blocks
//! `σ = (σ₁,…,σ_v)`, and block `a` owns the conjugate pairs whose position
//! index falls into its range.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use nalgebra::DMatrix;

use crate::expr::{Expression, Jet1};
use crate::math;
use crate::report::{Check, ResidualTracker};
use crate::{Error, Result};

#[derive(Debug, PartialEq)]
struct ChartInner {
    n: usize,
    blocks: Vec<usize>,
    names: Vec<String>,
    offsets: Vec<usize>,
}

/// A canonical chart `(q, p)` with a block partition of the positions.
///
/// Cheap to clone; clones compare equal to the original.
#[derive(Clone)]
pub struct Chart {
    inner: Arc<ChartInner>,
}

impl Chart {
    /// Chart with default names `q1..qn, p1..pn`.
    pub fn new(n: usize, blocks: &[usize]) -> Result<Self> {
        let names = (1..=n)
            .map(|i| format!("q{i}"))
            .chain((1..=n).map(|i| format!("p{i}")))
            .collect();
        Self::with_names(names, blocks)
    }

    /// Single-block chart with default names.
    pub fn canonical(n: usize) -> Result<Self> {
        Self::new(n, &[n])
    }

    /// Chart with explicit variable names, positions first then momenta.
    pub fn with_names(names: Vec<String>, blocks: &[usize]) -> Result<Self> {
        if names.is_empty() || names.len() % 2 != 0 {
            return Err(Error::InvalidChart(format!(
                "{} variable names; a canonical chart needs an even, positive count",
                names.len()
            )));
        }
        let n = names.len() / 2;
        if blocks.is_empty() || blocks.iter().any(|&s| s == 0) {
            return Err(Error::InvalidChart("block sizes must be positive".to_string()));
        }
        let total: usize = blocks.iter().sum();
        if total != n {
            return Err(Error::InvalidChart(format!("block sizes sum to {total}, expected {n}")));
        }
        for (i, name) in names.iter().enumerate() {
            if !is_identifier(name) {
                return Err(Error::InvalidChart(format!("`{name}` is not an identifier")));
            }
            if names[..i].contains(name) {
                return Err(Error::InvalidChart(format!("duplicate variable name `{name}`")));
            }
        }
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut acc = 0;
        for &s in blocks {
            offsets.push(acc);
            acc += s;
        }
        Ok(Chart {
            inner: Arc::new(ChartInner { n, blocks: blocks.to_vec(), names, offsets }),
        })
    }

    /// Same variables, different block partition.
    pub fn with_blocks(&self, blocks: &[usize]) -> Result<Self> {
        Self::with_names(self.inner.names.clone(), blocks)
    }

    /// Number of degrees of freedom `n`.
    pub fn n(&self) -> usize {
        self.inner.n
    }

    /// Phase-space dimension `2n`.
    pub fn dim(&self) -> usize {
        2 * self.inner.n
    }

    pub fn blocks(&self) -> &[usize] {
        &self.inner.blocks
    }

    pub fn block_count(&self) -> usize {
        self.inner.blocks.len()
    }

    pub fn names(&self) -> &[String] {
        &self.inner.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.inner.names[index]
    }

    /// Position indices `0..n` belonging to block `a` (0-based).
    pub fn block_positions(&self, a: usize) -> Result<Range<usize>> {
        self.check_block(a)?;
        let start = self.inner.offsets[a];
        Ok(start..start + self.inner.blocks[a])
    }

    /// All phase-space indices of block `a`: its positions, then its momenta.
    pub fn block_indices(&self, a: usize) -> Result<Vec<usize>> {
        let r = self.block_positions(a)?;
        let n = self.n();
        Ok(r.clone().chain(r.map(|i| i + n)).collect())
    }

    /// Block owning the phase-space index `index`.
    pub fn block_of(&self, index: usize) -> usize {
        let pos = index % self.n();
        self.inner.offsets.iter().rposition(|&o| o <= pos).unwrap_or(0)
    }

    pub fn check_block(&self, a: usize) -> Result<()> {
        if a >= self.block_count() {
            return Err(Error::BlockOutOfRange { block: a, count: self.block_count() });
        }
        Ok(())
    }

    /// Resolves a variable name, including the block aliases `qa_j`/`pa_j`
    /// (1-based block `a`, 1-based position `j` inside the block).
    pub fn resolve(&self, name: &str) -> Option<usize> {
        if let Some(i) = self.inner.names.iter().position(|s| s == name) {
            return Some(i);
        }
        let (momentum, rest) = match name.as_bytes().first()? {
            b'q' => (false, &name[1..]),
            b'p' => (true, &name[1..]),
            _ => return None,
        };
        let (a, j) = rest.split_once('_')?;
        let a: usize = a.parse().ok()?;
        let j: usize = j.parse().ok()?;
        if a == 0 || j == 0 || a > self.block_count() || j > self.inner.blocks[a - 1] {
            return None;
        }
        let pos = self.inner.offsets[a - 1] + j - 1;
        Some(if momentum { pos + self.n() } else { pos })
    }
}

impl PartialEq for Chart {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner) || self.inner == other.inner
    }
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart")
            .field("names", &self.inner.names)
            .field("blocks", &self.inner.blocks)
            .finish()
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// The constant Darboux matrix `Ω = [[0, −I], [I, 0]]` of size `2n`.
pub fn symplectic_matrix(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, n + i)] = -1.0;
        m[(n + i, i)] = 1.0;
    }
    m
}

fn gradients(f: &Expression, g: &Expression, x: &[f64]) -> Result<(Jet1, Jet1)> {
    if f.chart() != g.chart() {
        return Err(Error::ChartMismatch);
    }
    Ok((f.jet1(x)?, g.jet1(x)?))
}

/// The single conjugate-pair term `∂f/∂qᵏ ∂g/∂p_k − ∂f/∂p_k ∂g/∂qᵏ`.
fn pair_term(fg: &[f64], gg: &[f64], n: usize, k: usize) -> (f64, f64) {
    let a = fg[k] * gg[n + k];
    let b = fg[n + k] * gg[k];
    (a - b, math::max(math::abs(a), math::abs(b)))
}

/// Full canonical Poisson bracket `{f, g}` at `x`.
pub fn poisson_bracket(f: &Expression, g: &Expression, x: &[f64]) -> Result<f64> {
    let (jf, jg) = gradients(f, g, x)?;
    let n = f.chart().n();
    Ok((0..n).map(|k| pair_term(&jf.grad, &jg.grad, n, k).0).sum())
}

/// Poisson bracket restricted to the conjugate pairs of block `a` (0-based).
pub fn partial_bracket(f: &Expression, g: &Expression, a: usize, x: &[f64]) -> Result<f64> {
    let range = f.chart().block_positions(a)?;
    let (jf, jg) = gradients(f, g, x)?;
    let n = f.chart().n();
    Ok(range.map(|k| pair_term(&jf.grad, &jg.grad, n, k).0).sum())
}

/// Determinant of the momentum Jacobian `[∂H_i/∂p_k]`.
pub fn vertical_independence(hs: &[Expression], x: &[f64]) -> Result<f64> {
    let first = hs.first().ok_or_else(|| Error::InvalidArgument("no Hamiltonians".into()))?;
    let n = first.chart().n();
    if hs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: hs.len() });
    }
    let mut jac = DMatrix::zeros(n, n);
    for (i, h) in hs.iter().enumerate() {
        if h.chart() != first.chart() {
            return Err(Error::ChartMismatch);
        }
        let j = h.jet1(x)?;
        for k in 0..n {
            jac[(i, k)] = j.grad[n + k];
        }
    }
    Ok(jac.determinant())
}

/// How strictly a family of functions must commute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvolutionMode {
    /// `{H_i, H_j} = 0`.
    Full,
    /// Every single conjugate-pair term vanishes (Benenti).
    Total,
    /// The bracket restricted to every block vanishes.
    Partial,
}

impl InvolutionMode {
    pub fn name(self) -> &'static str {
        match self {
            InvolutionMode::Full => "full",
            InvolutionMode::Total => "total",
            InvolutionMode::Partial => "partial",
        }
    }
}

/// Involution test of a family over sample points.
///
/// Each bracket sum is normalized by `1 + max |term|` before comparing with
/// `tol`. The block partition used by [`InvolutionMode::Partial`] is the one
/// of the Hamiltonians' chart.
pub fn involution_check(
    hs: &[Expression],
    samples: &[Vec<f64>],
    tol: f64,
    mode: InvolutionMode,
) -> Result<Check> {
    let first = hs.first().ok_or_else(|| Error::InvalidArgument("no Hamiltonians".into()))?;
    let chart = first.chart().clone();
    if hs.iter().any(|h| h.chart() != &chart) {
        return Err(Error::ChartMismatch);
    }
    let n = chart.n();
    let groups: Vec<Range<usize>> = match mode {
        InvolutionMode::Full => vec![0..n],
        InvolutionMode::Total => (0..n).map(|k| k..k + 1).collect(),
        InvolutionMode::Partial => {
            (0..chart.block_count()).map(|a| chart.block_positions(a)).collect::<Result<_>>()?
        }
    };
    let (name, anchor) = match mode {
        InvolutionMode::Full => ("involution.full", "{H_i, H_j} = 0"),
        InvolutionMode::Total => ("involution.total", "{H_i, H_j}|_k = 0 for every conjugate pair k"),
        InvolutionMode::Partial => ("involution.partial", "{H_i, H_j}|_a = 0 for every block a"),
    };
    let mut tracker = ResidualTracker::new();
    for x in samples {
        let jets: Vec<Jet1> = hs.iter().map(|h| h.jet1(x)).collect::<Result<_>>()?;
        for i in 0..jets.len() {
            for j in i + 1..jets.len() {
                for group in &groups {
                    let mut sum = 0.0;
                    let mut scale = 0.0;
                    for k in group.clone() {
                        let (t, s) = pair_term(&jets[i].grad, &jets[j].grad, n, k);
                        sum += t;
                        scale = math::max(scale, s);
                    }
                    tracker.record(math::abs(sum) / (1.0 + scale), x);
                }
            }
        }
    }
    Ok(tracker.finish(name, anchor, tol, samples.len()))
}

/// Benenti test: every single-pair bracket term vanishes at every sample.
pub fn t_involution_check(hs: &[Expression], samples: &[Vec<f64>], tol: f64) -> Result<Check> {
    involution_check(hs, samples, tol, InvolutionMode::Total)
}

/// Block-restricted brackets vanish for every pair, block and sample.
pub fn p_involution_check(hs: &[Expression], samples: &[Vec<f64>], tol: f64) -> Result<Check> {
    involution_check(hs, samples, tol, InvolutionMode::Partial)
}
