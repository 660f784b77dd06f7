//! Canonical changes of chart, pushforward of operators, and block-form
//! checks in block-adapted charts.
//!
//! In a chart adapted to blocks `σ = (σ₁,…,σ_v)`, an operator compatible
//! with the symplectic form is block diagonal with blocks
//!
//! ```text
//! K_a = [[A_a, B_a], [C_a, D_a]],   D_a = A_aᵀ,  B_a = −B_aᵀ,  C_a = −C_aᵀ
//! ```
//!
//! acting on `(q_a, p_a)`.

mod flow;

pub use self::flow::{flow_conserve, FlowResult};

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::expr::Expression;
use crate::linalg;
use crate::math;
use crate::phasespace::Chart;
use crate::report::{Check, ResidualTracker, VerificationReport};
use crate::tensor::OperatorField;
use crate::{Error, Result};

/// A change of chart given in both directions.
#[derive(Debug, Clone)]
pub struct ChartMap {
    source: Chart,
    target: Chart,
    /// New coordinates as functions of the old ones.
    forward: Vec<Expression>,
    /// Old coordinates as functions of the new ones.
    inverse: Vec<Expression>,
}

impl ChartMap {
    pub fn new(forward: Vec<Expression>, inverse: Vec<Expression>) -> Result<Self> {
        let source = forward.first().ok_or_else(|| Error::InvalidArgument("empty chart map".into()))?.chart().clone();
        let target = inverse.first().ok_or_else(|| Error::InvalidArgument("empty chart map".into()))?.chart().clone();
        if source.dim() != target.dim() {
            return Err(Error::DimensionMismatch { expected: source.dim(), found: target.dim() });
        }
        for (v, c) in [(&forward, &source), (&inverse, &target)] {
            if v.len() != c.dim() {
                return Err(Error::DimensionMismatch { expected: c.dim(), found: v.len() });
            }
            if v.iter().any(|e| e.chart() != c) {
                return Err(Error::ChartMismatch);
            }
        }
        Ok(ChartMap { source, target, forward, inverse })
    }

    pub fn parse<S: AsRef<str>>(source: &Chart, target: &Chart, forward: &[S], inverse: &[S]) -> Result<Self> {
        let f = forward.iter().map(|s| Expression::parse(s.as_ref(), source)).collect::<Result<_>>()?;
        let i = inverse.iter().map(|s| Expression::parse(s.as_ref(), target)).collect::<Result<_>>()?;
        Self::new(f, i)
    }

    pub fn identity(chart: &Chart) -> Self {
        let v: Vec<Expression> = (0..chart.dim()).map(|i| Expression::var(i, chart).expect("in range")).collect();
        ChartMap { source: chart.clone(), target: chart.clone(), forward: v.clone(), inverse: v }
    }

    pub fn source(&self) -> &Chart {
        &self.source
    }

    pub fn target(&self) -> &Chart {
        &self.target
    }

    pub fn forward(&self) -> &[Expression] {
        &self.forward
    }

    pub fn inverse(&self) -> &[Expression] {
        &self.inverse
    }

    /// New coordinates of the old point `x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward.iter().map(|e| e.eval(x)).collect()
    }

    /// Old coordinates of the new point `y`.
    pub fn apply_inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.inverse.iter().map(|e| e.eval(y)).collect()
    }

    /// `∂(new)/∂(old)` at the old point `x`.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let d = self.source.dim();
        let mut j = DMatrix::zeros(d, d);
        for (r, e) in self.forward.iter().enumerate() {
            let g = e.jet1(x)?.grad;
            for c in 0..d {
                j[(r, c)] = g[c];
            }
        }
        Ok(j)
    }

    /// `self` after `first`: source of `first` to target of `self`.
    pub fn after(&self, first: &ChartMap) -> Result<ChartMap> {
        if first.target != self.source {
            return Err(Error::ChartMismatch);
        }
        let forward = self.forward.iter().map(|e| e.substitute(&first.forward)).collect::<Result<_>>()?;
        let inverse = first.inverse.iter().map(|e| e.substitute(&self.inverse)).collect::<Result<_>>()?;
        ChartMap::new(forward, inverse)
    }
}

/// `H ∘ inverse`: a function of the old chart expressed in the new one.
pub fn pullback(h: &Expression, map: &ChartMap) -> Result<Expression> {
    if h.chart() != &map.source {
        return Err(Error::ChartMismatch);
    }
    h.substitute(&map.inverse)
}

/// Round trips in both directions on old-chart samples, relative to
/// `1 + |x|`.
pub fn round_trip_check(map: &ChartMap, samples: &[Vec<f64>], tol: f64) -> Result<Check> {
    let mut tr = ResidualTracker::new();
    for x in samples {
        let y = map.apply(x)?;
        let x2 = map.apply_inverse(&y)?;
        let y2 = map.apply(&x2)?;
        let mut worst = 0.0;
        for (a, b) in x.iter().zip(&x2).chain(y.iter().zip(&y2)) {
            worst = math::max(worst, math::abs(a - b) / (1.0 + math::abs(*a)));
        }
        tr.record(worst, x);
    }
    Ok(tr.finish("transform.round-trip", "inverse ∘ forward = id, forward ∘ inverse = id", tol, samples.len()))
}

/// Canonical bracket relations of the new coordinates, computed in the old
/// chart, after the round-trip check.
pub fn canonicity_check(map: &ChartMap, samples: &[Vec<f64>], tol: f64) -> Result<VerificationReport> {
    let mut report = VerificationReport::new();
    report.push(round_trip_check(map, samples, tol)?);
    let n = map.source.n();
    let d = 2 * n;
    let mut tr = ResidualTracker::new();
    for x in samples {
        let grads: Vec<Vec<f64>> = map.forward.iter().map(|e| e.jet1(x).map(|j| j.grad)).collect::<Result<_>>()?;
        let mut worst = 0.0;
        for a in 0..d {
            for b in (a + 1)..d {
                let (mut v, mut s) = (0.0, 0.0);
                for k in 0..n {
                    let t = grads[a][k] * grads[b][n + k] - grads[a][n + k] * grads[b][k];
                    v += t;
                    s = math::max(s, math::abs(t));
                }
                // {Q^a, P_a} = 1, all other pairs 0
                let expected = if b == a + n { 1.0 } else { 0.0 };
                let r = math::abs(v - expected) / (1.0 + s);
                if r > tol && tr.max() <= tol {
                    tr.note(format!("{{{}, {}}} = {v}", map.target.name(a), map.target.name(b)));
                }
                worst = math::max(worst, r);
            }
        }
        tr.record(worst, x);
    }
    report.push(tr.finish("transform.canonical", "{Q^a, P_b} = δ^a_b, {Q^a, Q^b} = {P_a, P_b} = 0", tol, samples.len()));
    Ok(report)
}

/// `J·A(x_old)·J⁻¹` at the new point `y`, with `x_old = inverse(y)` and `J`
/// the Jacobian of the forward map.
pub fn pushforward_operator(a: &OperatorField, map: &ChartMap, y: &[f64]) -> Result<DMatrix<f64>> {
    if a.chart() != &map.source {
        return Err(Error::ChartMismatch);
    }
    let x = map.apply_inverse(y)?;
    let j = map.jacobian(&x)?;
    let ji = linalg::inverse(&j, "Jacobian of the chart map")?;
    Ok(&j * a.eval(&x)? * ji)
}

/// The `(A, B, C, D)` blocks of one block of positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

/// Block decomposition of an operator value in a block-adapted chart.
#[derive(Debug, Clone)]
pub struct BlockDecomposition {
    pub blocks: Vec<Blocks>,
    /// Largest off-block entry divided by `1 +` the largest in-block entry.
    pub off_block: f64,
    /// Largest violation of `Dᵀ = A`, `B + Bᵀ = 0`, `C + Cᵀ = 0`, same scale.
    pub compatibility: f64,
    pub scale: f64,
}

/// Splits `m` (in `chart` coordinates) into per-block `A, B, C, D`.
pub fn block_decompose(m: &DMatrix<f64>, chart: &Chart) -> Result<BlockDecomposition> {
    let n = chart.n();
    if m.nrows() != 2 * n || m.ncols() != 2 * n {
        return Err(Error::DimensionMismatch { expected: 2 * n, found: m.nrows() });
    }
    let block_of = |i: usize| chart.block_of(if i < n { i } else { i - n });
    let mut inside = 0.0;
    let mut outside = 0.0;
    for i in 0..2 * n {
        for j in 0..2 * n {
            let v = math::abs(m[(i, j)]);
            if block_of(i) == block_of(j) {
                inside = math::max(inside, v);
            } else {
                outside = math::max(outside, v);
            }
        }
    }
    let scale = 1.0 + inside;
    let mut blocks = Vec::with_capacity(chart.block_count());
    let mut compat = 0.0;
    for a in 0..chart.block_count() {
        let r = chart.block_positions(a)?;
        let (s, k) = (r.start, r.len());
        let blk = Blocks {
            a: m.view((s, s), (k, k)).into_owned(),
            b: m.view((s, n + s), (k, k)).into_owned(),
            c: m.view((n + s, s), (k, k)).into_owned(),
            d: m.view((n + s, n + s), (k, k)).into_owned(),
        };
        compat = math::max(compat, linalg::max_abs(&(blk.d.transpose() - &blk.a)));
        compat = math::max(compat, linalg::max_abs(&(&blk.b + blk.b.transpose())));
        compat = math::max(compat, linalg::max_abs(&(&blk.c + blk.c.transpose())));
        blocks.push(blk);
    }
    Ok(BlockDecomposition { blocks, off_block: outside / scale, compatibility: compat / scale, scale })
}

/// Block structure of `A` pushed through `map`, on new-chart samples.
pub fn block_check(a: &OperatorField, map: &ChartMap, samples: &[Vec<f64>], tol: f64) -> Result<VerificationReport> {
    let mut off = ResidualTracker::new();
    let mut comp = ResidualTracker::new();
    for y in samples {
        let d = block_decompose(&pushforward_operator(a, map, y)?, &map.target)?;
        off.record(d.off_block, y);
        comp.record(d.compatibility, y);
    }
    let mut r = VerificationReport::new();
    r.push(off.finish("block.diagonal", "K = diag(K_1, …, K_v) in the adapted chart", tol, samples.len()));
    r.push(comp.finish("block.compatibility", "D_a = A_aᵀ, B_a = −B_aᵀ, C_a = −C_aᵀ", tol, samples.len()));
    Ok(r)
}

fn sym_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    m + m.transpose()
}

/// Largest residual of the block commutation relations of two commuting
/// compatible operators, relative to `1 + |blocks|²`.
pub fn block_commutation_residual(x: &BlockDecomposition, y: &BlockDecomposition) -> Result<f64> {
    if x.blocks.len() != y.blocks.len() {
        return Err(Error::DimensionMismatch { expected: x.blocks.len(), found: y.blocks.len() });
    }
    let mut worst = 0.0;
    for (p, q) in x.blocks.iter().zip(&y.blocks) {
        let rel = [
            &p.a * &q.a - &q.a * &p.a + &p.b * &q.c - &q.b * &p.c,
            &p.a * &q.b - &q.a * &p.b + &p.b * q.a.transpose() - &q.b * p.a.transpose(),
            &p.c * &q.a - &q.c * &p.a + p.a.transpose() * &q.c - q.a.transpose() * &p.c,
            sym_part(&(&p.a * &q.b - &q.a * &p.b)),
            sym_part(&(&p.c * &q.a - &q.c * &p.a)),
        ];
        for r in &rel {
            worst = math::max(worst, linalg::max_abs(r));
        }
    }
    Ok(worst / (x.scale * y.scale))
}

/// Block commutation relations for a pair of operators pushed through `map`.
pub fn block_commutation_check(
    k1: &OperatorField,
    k2: &OperatorField,
    map: &ChartMap,
    samples: &[Vec<f64>],
    tol: f64,
) -> Result<Check> {
    let mut tr = ResidualTracker::new();
    for y in samples {
        let d1 = block_decompose(&pushforward_operator(k1, map, y)?, &map.target)?;
        let d2 = block_decompose(&pushforward_operator(k2, map, y)?, &map.target)?;
        tr.record(block_commutation_residual(&d1, &d2)?, y);
    }
    Ok(tr.finish(
        "block.commutation",
        "[A,A'] + BC' − B'C = 0; AB' − A'B + BA'ᵀ − B'Aᵀ = 0; CA' − C'A + AᵀC' − A'ᵀC = 0; AB' − A'B and CA' − C'A skew",
        tol,
        samples.len(),
    ))
}

/// Entrywise comparison of `A` pushed through `map` with an expected
/// operator on the new chart.
pub fn pushforward_check(
    a: &OperatorField,
    map: &ChartMap,
    expected: &OperatorField,
    samples: &[Vec<f64>],
    tol: f64,
) -> Result<Check> {
    if expected.chart() != &map.target {
        return Err(Error::ChartMismatch);
    }
    let mut tr = ResidualTracker::new();
    for y in samples {
        let got = pushforward_operator(a, map, y)?;
        let want = expected.eval(y)?;
        tr.record(linalg::max_abs(&(&got - &want)) / (1.0 + linalg::max_abs(&want)), y);
    }
    Ok(tr.finish("transform.pushforward", "J K J⁻¹ matches the expected operator", tol, samples.len()))
}
