//! Generalized Stäckel systems.
//!
//! A spec is an invertible `m × m` matrix `S` whose row `a` depends only on
//! the positions of block `a`, and a vector `F` whose entry `f_a` depends
//! only on the variables of block `a`. The Hamiltonians are `H = S⁻¹F`,
//! assembled as `adj(S)·F / det S` with the determinant and adjugate
//! expanded symbolically. With generator `g`, operator `K_α` carries
//! `adj(S)_{αi} / adj(S)_{gi}` on both the position and momentum slots of
//! block `i`; in particular `K_g = I`.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::expr::{self, Expression, Node};
use crate::linalg;
use crate::math;
use crate::phasespace::Chart;
use crate::report::{Check, ResidualTracker, VerificationReport};
use crate::tensor::OperatorField;
use crate::{Error, Result};

/// Smallest admissible `|det S|` at a sample.
pub const DET_MIN: f64 = 1e-6;

/// Stäckel matrix and vector over a block-partitioned chart.
#[derive(Debug, Clone)]
pub struct StackelSpec {
    chart: Chart,
    /// Row-major `m × m` entries.
    s: Vec<Expression>,
    f: Vec<Expression>,
    /// Lets row `a` of `S` depend on the momenta of block `a` as well.
    pub momentum_rows: bool,
}

impl StackelSpec {
    /// `m` is the number of blocks of `chart`.
    pub fn new(chart: &Chart, s: Vec<Expression>, f: Vec<Expression>) -> Result<Self> {
        let m = chart.block_count();
        if s.len() != m * m {
            return Err(Error::DimensionMismatch { expected: m * m, found: s.len() });
        }
        if f.len() != m {
            return Err(Error::DimensionMismatch { expected: m, found: f.len() });
        }
        if s.iter().chain(&f).any(|e| e.chart() != chart) {
            return Err(Error::ChartMismatch);
        }
        Ok(StackelSpec { chart: chart.clone(), s, f, momentum_rows: false })
    }

    pub fn parse<S: AsRef<str>>(chart: &Chart, s: &[S], f: &[S]) -> Result<Self> {
        let p = |v: &[S]| v.iter().map(|t| Expression::parse(t.as_ref(), chart)).collect::<Result<Vec<_>>>();
        Self::new(chart, p(s)?, p(f)?)
    }

    pub fn with_momentum_rows(mut self, on: bool) -> Self {
        self.momentum_rows = on;
        self
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn m(&self) -> usize {
        self.f.len()
    }

    pub fn s(&self, a: usize, b: usize) -> &Expression {
        &self.s[a * self.m() + b]
    }

    pub fn f(&self, a: usize) -> &Expression {
        &self.f[a]
    }

    /// Structural locality of rows and of the vector entries.
    pub fn check_locality(&self) -> Result<()> {
        let chart = &self.chart;
        let n = chart.n();
        for a in 0..self.m() {
            let pos = chart.block_positions(a)?;
            let in_q = |v: usize| v < n && pos.contains(&v);
            let in_p = |v: usize| v >= n && pos.contains(&(v - n));
            for b in 0..self.m() {
                if let Some(v) = self.s(a, b).variables().into_iter().find(|&v| !(in_q(v) || self.momentum_rows && in_p(v))) {
                    return Err(Error::Locality { entry: format!("S[{a}][{b}]"), var: chart.name(v).to_string(), block: a });
                }
            }
            if let Some(v) = self.f(a).variables().into_iter().find(|&v| !(in_q(v) || in_p(v))) {
                return Err(Error::Locality { entry: format!("f[{a}]"), var: chart.name(v).to_string(), block: a });
            }
        }
        Ok(())
    }

    /// Numeric `S` at `x`.
    pub fn s_matrix(&self, x: &[f64]) -> Result<nalgebra::DMatrix<f64>> {
        let m = self.m();
        let mut out = nalgebra::DMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                out[(a, b)] = self.s(a, b).eval(x)?;
            }
        }
        Ok(out)
    }

    /// Symbolic `det S`.
    pub fn det(&self) -> Expression {
        let nodes: Vec<Node> = self.s.iter().map(|e| e.node().clone()).collect();
        let idx: Vec<usize> = (0..self.m()).collect();
        Expression::from_node(det_nodes(&nodes, self.m(), &idx, &idx), &self.chart).expect("same chart")
    }

    /// Symbolic adjugate, row-major: `adj[i][j] = (−1)^{i+j} M_{ji}`.
    pub fn adjugate(&self) -> Vec<Expression> {
        let m = self.m();
        let nodes: Vec<Node> = self.s.iter().map(|e| e.node().clone()).collect();
        let mut out = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                let rows: Vec<usize> = (0..m).filter(|&r| r != j).collect();
                let cols: Vec<usize> = (0..m).filter(|&c| c != i).collect();
                let minor = det_nodes(&nodes, m, &rows, &cols);
                let signed = if (i + j) % 2 == 0 { minor } else { expr::neg(minor) };
                out.push(Expression::from_node(signed, &self.chart).expect("same chart"));
            }
        }
        out
    }
}

/// Laplace expansion along the first listed row, tidied at every step.
fn det_nodes(s: &[Node], m: usize, rows: &[usize], cols: &[usize]) -> Node {
    match rows.len() {
        0 => Node::Const(1.0),
        1 => s[rows[0] * m + cols[0]].clone(),
        _ => {
            let r = rows[0];
            let rest: Vec<usize> = rows[1..].to_vec();
            let mut acc = Node::Const(0.0);
            for (k, &c) in cols.iter().enumerate() {
                let e = &s[r * m + c];
                if e.is_zero() {
                    continue;
                }
                let sub: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
                let term = expr::mul(expr::tidy(e), det_nodes(s, m, &rest, &sub));
                acc = if k % 2 == 0 { expr::add(acc, term) } else { expr::sub(acc, term) };
            }
            acc
        }
    }
}

/// Locality (structural) and invertibility (on samples) of a spec.
pub fn validate_spec(spec: &StackelSpec, samples: &[Vec<f64>]) -> Result<VerificationReport> {
    spec.check_locality()?;
    let det = spec.det();
    let mut tr = ResidualTracker::new();
    let mut smallest = f64::INFINITY;
    for x in samples {
        let v = math::abs(det.eval(x)?);
        smallest = smallest.min(v);
        tr.record(if v >= DET_MIN { 0.0 } else { 1.0 }, x);
    }
    let mut report = VerificationReport::new();
    report.push(Check::verdict("stackel.locality", "row a of S and f_a depend on block a only", true, None));
    report.push(
        tr.finish("stackel.invertible", "|det S| ≥ 1e-6", 0.5, samples.len())
            .with_note(format!("det S = {det}; min |det S| = {smallest:e}")),
    );
    Ok(report)
}

/// Hamiltonians and chain operators of a Stäckel spec.
#[derive(Debug, Clone)]
pub struct StackelSystem {
    pub hamiltonians: Vec<Expression>,
    pub operators: Vec<OperatorField>,
    /// Zero-based generator index.
    pub generator: usize,
    pub det: Expression,
}

/// Builds `H = adj(S)·F / det S` and the operators `K_α` for the zero-based
/// generator index `g`.
pub fn build_system(spec: &StackelSpec, g: usize) -> Result<StackelSystem> {
    spec.check_locality()?;
    let m = spec.m();
    if g >= m {
        return Err(Error::InvalidArgument(format!("generator index {g} out of range for {m} Hamiltonians")));
    }
    let chart = &spec.chart;
    let det = spec.det();
    if det.is_zero() {
        return Err(Error::Singular("det S vanishes identically".into()));
    }
    let adj = spec.adjugate();
    let hamiltonians: Vec<Expression> = (0..m)
        .map(|a| {
            let num = (0..m).fold(Node::Const(0.0), |acc, i| {
                expr::add(acc, expr::mul(adj[a * m + i].node().clone(), spec.f(i).node().clone()))
            });
            Expression::from_node(expr::div(num, det.node().clone()), chart).expect("same chart")
        })
        .collect();
    for i in 0..m {
        if adj[g * m + i].is_zero() {
            return Err(Error::GeneratorSlot { generator: g, slot: i });
        }
    }
    let n = chart.n();
    let mut operators = Vec::with_capacity(m);
    for alpha in 0..m {
        let mut diag: Vec<Expression> = (0..2 * n).map(|_| Expression::zero(chart)).collect();
        for i in 0..m {
            let coeff = adj[alpha * m + i].over(&adj[g * m + i]);
            for pos in chart.block_positions(i)? {
                diag[pos] = coeff.clone();
                diag[n + pos] = coeff.clone();
            }
        }
        operators.push(OperatorField::diagonal(chart, diag)?);
    }
    Ok(StackelSystem { hamiltonians, operators, generator: g, det })
}

/// Classical Stäckel case: every block has size one.
pub fn build_akn(spec: &StackelSpec, g: usize) -> Result<StackelSystem> {
    if spec.chart.blocks().iter().any(|&s| s != 1) {
        return Err(Error::InvalidArgument("a classical Stäckel system needs blocks of size 1".into()));
    }
    build_system(spec, g)
}

/// `f_a(x) − Σ_b S_ab(x)·h_b` for every block `a`.
pub fn separation_residuals(spec: &StackelSpec, h: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let m = spec.m();
    if h.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: h.len() });
    }
    (0..m)
        .map(|a| {
            let mut r = spec.f(a).eval(x)?;
            for (b, hb) in h.iter().enumerate() {
                r -= spec.s(a, b).eval(x)? * hb;
            }
            Ok(r)
        })
        .collect()
}

/// `S·H − F` on samples, each row divided by `1 + max |term|`.
pub fn system_residual_check(spec: &StackelSpec, sys: &StackelSystem, samples: &[Vec<f64>], tol: f64) -> Result<Check> {
    let m = spec.m();
    let mut tr = ResidualTracker::new();
    for x in samples {
        let h: Vec<f64> = sys.hamiltonians.iter().map(|e| e.eval(x)).collect::<Result<_>>()?;
        let mut worst = 0.0;
        for a in 0..m {
            let f = spec.f(a).eval(x)?;
            let (mut v, mut b) = (-f, math::abs(f));
            for (k, hk) in h.iter().enumerate() {
                let t = spec.s(a, k).eval(x)? * hk;
                v += t;
                b = math::max(b, math::abs(t));
            }
            worst = math::max(worst, math::abs(v) / (1.0 + b));
        }
        tr.record(worst, x);
    }
    Ok(tr.finish("stackel.inverse", "S·H = F", tol, samples.len()))
}

/// `max |M_ij − M_ji|` for `M = [∂φ/∂p]⁻¹ [∂φ/∂q]` at `x`.
pub fn symmetry_condition(phi: &[Expression], x: &[f64]) -> Result<f64> {
    let chart = phi.first().ok_or_else(|| Error::InvalidArgument("no separation relations".into()))?.chart();
    let n = chart.n();
    if phi.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: phi.len() });
    }
    if phi.iter().any(|p| p.chart() != chart) {
        return Err(Error::ChartMismatch);
    }
    let mut jq = nalgebra::DMatrix::zeros(n, n);
    let mut jp = nalgebra::DMatrix::zeros(n, n);
    for (i, p) in phi.iter().enumerate() {
        let g = p.jet1(x)?.grad;
        for k in 0..n {
            jq[(i, k)] = g[k];
            jp[(i, k)] = g[n + k];
        }
    }
    let scale = linalg::max_abs(&jp);
    if scale == 0.0 || math::abs(linalg::det(&jp)) <= 1e-12 * math::powi(scale, n as i32) {
        return Err(Error::Singular("momentum Jacobian of the separation relations".into()));
    }
    let m = linalg::inverse(&jp, "momentum Jacobian of the separation relations")? * jq;
    Ok(linalg::max_abs(&(&m - m.transpose())))
}
