//! Operator fields (`(1,1)`-tensors) and their Nijenhuis and Haantjes
//! torsions, evaluated pointwise in the coordinate frame.
//!
//! With `∂_l` the coordinate derivatives and summation over repeated indices,
//!
//! ```text
//! τ^i_{jk} = A^l_j ∂_l A^i_k − A^l_k ∂_l A^i_j − A^i_l (∂_j A^l_k − ∂_k A^l_j)
//! H^i_{jk} = A^i_l A^l_m τ^m_{jk} + τ^i_{lm} A^l_j A^m_k
//!            − A^i_l (τ^l_{mk} A^m_j + τ^l_{jm} A^m_k)
//! ```
//!
//! Components are computed for `j < k` and mirrored, so antisymmetry in the
//! lower indices is exact.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::expr::{self, Expression, Node};
use crate::math;
use crate::phasespace::{symplectic_matrix, Chart};
use crate::report::{ResidualTracker, VerificationReport};
use crate::{Error, Result};

/// A `(1,1)`-tensor field: a `2n × 2n` matrix of expressions, row = upper
/// index. Entries are stored row-major.
#[derive(Clone, PartialEq)]
pub struct OperatorField {
    chart: Chart,
    dim: usize,
    entries: Vec<Expression>,
}

impl OperatorField {
    /// Builds a field from row-major entries; all must live on `chart`.
    pub fn new(chart: &Chart, entries: Vec<Expression>) -> Result<Self> {
        let dim = chart.dim();
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        if entries.iter().any(|e| e.chart() != chart) {
            return Err(Error::ChartMismatch);
        }
        Ok(OperatorField { chart: chart.clone(), dim, entries })
    }

    /// Parses row-major entry strings.
    pub fn parse<S: AsRef<str>>(chart: &Chart, entries: &[S]) -> Result<Self> {
        let e = entries.iter().map(|s| Expression::parse(s.as_ref(), chart)).collect::<Result<_>>()?;
        Self::new(chart, e)
    }

    /// `diag(d₀, …, d_{2n-1})`.
    pub fn diagonal(chart: &Chart, diag: Vec<Expression>) -> Result<Self> {
        let dim = chart.dim();
        if diag.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: diag.len() });
        }
        let mut entries: Vec<Expression> = (0..dim * dim).map(|_| Expression::zero(chart)).collect();
        for (i, d) in diag.into_iter().enumerate() {
            entries[i * dim + i] = d;
        }
        Self::new(chart, entries)
    }

    pub fn identity(chart: &Chart) -> Self {
        let diag = (0..chart.dim()).map(|_| Expression::one(chart)).collect();
        Self::diagonal(chart, diag).expect("sizes agree")
    }

    /// Constant field from a numeric matrix.
    pub fn constant(chart: &Chart, m: &DMatrix<f64>) -> Result<Self> {
        let dim = chart.dim();
        if m.nrows() != dim || m.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: m.nrows() });
        }
        let entries = (0..dim * dim).map(|k| Expression::constant(m[(k / dim, k % dim)], chart)).collect();
        Self::new(chart, entries)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expression {
        &self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[Expression] {
        &self.entries
    }

    /// Every entry multiplied by `f`.
    pub fn scaled(&self, f: &Expression) -> Self {
        let entries = self.entries.iter().map(|e| f.times(e)).collect();
        OperatorField { chart: self.chart.clone(), dim: self.dim, entries }
    }

    /// Every entry tidied.
    pub fn tidy(&self) -> Self {
        let entries = self.entries.iter().map(Expression::tidy).collect();
        OperatorField { chart: self.chart.clone(), dim: self.dim, entries }
    }

    /// Transposed field.
    pub fn transpose(&self) -> Self {
        let d = self.dim;
        let entries = (0..d * d).map(|k| self.entry(k % d, k / d).clone()).collect();
        OperatorField { chart: self.chart.clone(), dim: d, entries }
    }

    /// Value matrix at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let d = self.dim;
        let mut m = DMatrix::zeros(d, d);
        for (k, e) in self.entries.iter().enumerate() {
            if !e.is_zero() {
                m[(k / d, k % d)] = e.eval(x)?;
            }
        }
        Ok(m)
    }

    /// Value matrix and its coordinate derivatives at `x`; `d[l][(i, j)]` is
    /// `∂_l A^i_j`.
    pub fn jet(&self, x: &[f64]) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
        let d = self.dim;
        let mut a = DMatrix::zeros(d, d);
        let mut da = alloc::vec![DMatrix::zeros(d, d); d];
        for (k, e) in self.entries.iter().enumerate() {
            if e.is_zero() {
                continue;
            }
            let j = e.jet1(x)?;
            let (r, c) = (k / d, k % d);
            a[(r, c)] = j.value;
            for (l, g) in j.grad.iter().enumerate() {
                da[l][(r, c)] = *g;
            }
        }
        Ok((a, da))
    }

    /// Rewrites the field as a function of other coordinates, see
    /// [`Expression::substitute`]. Only the entries are substituted; this is
    /// not a tensorial change of frame.
    pub fn substitute_entries(&self, subs: &[Expression]) -> Result<Self> {
        let entries: Vec<Expression> = self.entries.iter().map(|e| e.substitute(subs)).collect::<Result<_>>()?;
        let chart = subs.first().map(|s| s.chart().clone()).ok_or(Error::DimensionMismatch { expected: self.dim, found: 0 })?;
        Self::new(&chart, entries)
    }
}

impl core::fmt::Debug for OperatorField {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let rows: Vec<Vec<String>> = (0..self.dim)
            .map(|i| (0..self.dim).map(|j| format!("{}", self.entry(i, j))).collect())
            .collect();
        f.debug_struct("OperatorField").field("rows", &rows).finish()
    }
}

/// `f·A + g·B`, entrywise and tidied.
pub fn op_combine(f: &Expression, g: &Expression, a: &OperatorField, b: &OperatorField) -> Result<OperatorField> {
    same_chart(a, b)?;
    let entries = a.entries.iter().zip(&b.entries).map(|(x, y)| f.times(x).plus(&g.times(y))).collect();
    OperatorField::new(&a.chart, entries)
}

/// Matrix product `A·B`, tidied.
pub fn op_compose(a: &OperatorField, b: &OperatorField) -> Result<OperatorField> {
    same_chart(a, b)?;
    let d = a.dim;
    let mut entries = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let mut acc = Node::Const(0.0);
            for l in 0..d {
                let (x, y) = (a.entry(i, l).node(), b.entry(l, j).node());
                if x.is_zero() || y.is_zero() {
                    continue;
                }
                acc = expr::add(acc, expr::mul(x.clone(), y.clone()));
            }
            entries.push(Expression::from_node(acc, &a.chart)?);
        }
    }
    OperatorField::new(&a.chart, entries)
}

/// `[A, B] = AB − BA`, tidied.
pub fn op_commutator(a: &OperatorField, b: &OperatorField) -> Result<OperatorField> {
    let ab = op_compose(a, b)?;
    let ba = op_compose(b, a)?;
    let entries = ab.entries.iter().zip(&ba.entries).map(|(x, y)| x.minus(y)).collect();
    OperatorField::new(&a.chart, entries)
}

fn same_chart(a: &OperatorField, b: &OperatorField) -> Result<()> {
    if a.chart != b.chart {
        return Err(Error::ChartMismatch);
    }
    Ok(())
}

/// Components `T^i_{jk}` of a vector-valued 2-form at a point, antisymmetric
/// in `j, k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Torsion3 {
    dim: usize,
    data: Vec<f64>,
}

impl Torsion3 {
    fn zeros(dim: usize) -> Self {
        Torsion3 { dim, data: alloc::vec![0.0; dim * dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    /// Sets `T^i_{jk} = v` and `T^i_{kj} = −v`.
    fn set_pair(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let d = self.dim;
        self.data[(i * d + j) * d + k] = v;
        self.data[(i * d + k) * d + j] = -v;
    }

    pub fn max_abs(&self) -> f64 {
        math::max_abs(&self.data)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Nijenhuis torsion from the value matrix and its derivatives.
pub fn nijenhuis_from_jet(a: &DMatrix<f64>, da: &[DMatrix<f64>]) -> Torsion3 {
    let d = a.nrows();
    let mut t = Torsion3::zeros(d);
    for i in 0..d {
        for j in 0..d {
            for k in (j + 1)..d {
                let mut v = 0.0;
                for l in 0..d {
                    v += a[(l, j)] * da[l][(i, k)] - a[(l, k)] * da[l][(i, j)];
                    v -= a[(i, l)] * (da[j][(l, k)] - da[k][(l, j)]);
                }
                t.set_pair(i, j, k, v);
            }
        }
    }
    t
}

/// Haantjes torsion from the value matrix and its Nijenhuis torsion.
pub fn haantjes_from_nijenhuis(a: &DMatrix<f64>, tau: &Torsion3) -> Torsion3 {
    let d = a.nrows();
    let a2 = a * a;
    // s^i_{jk} = τ^i_{lm} A^l_j A^m_k, built as (τ^i_{l·} A)(j... ) in two contractions
    let mut tm = alloc::vec![0.0; d * d * d]; // tm[i][l][k] = Σ_m τ^i_{lm} A^m_k
    for i in 0..d {
        for l in 0..d {
            for k in 0..d {
                let mut v = 0.0;
                for m in 0..d {
                    v += tau.get(i, l, m) * a[(m, k)];
                }
                tm[(i * d + l) * d + k] = v;
            }
        }
    }
    let mut h = Torsion3::zeros(d);
    for i in 0..d {
        for j in 0..d {
            for k in (j + 1)..d {
                let mut v = 0.0;
                for m in 0..d {
                    v += a2[(i, m)] * tau.get(m, j, k);
                    v += tm[(i * d + m) * d + k] * a[(m, j)];
                }
                for l in 0..d {
                    let ail = a[(i, l)];
                    if ail == 0.0 {
                        continue;
                    }
                    let mut w = 0.0;
                    for m in 0..d {
                        w += tau.get(l, m, k) * a[(m, j)] + tau.get(l, j, m) * a[(m, k)];
                    }
                    v -= ail * w;
                }
                h.set_pair(i, j, k, v);
            }
        }
    }
    h
}

fn abs_matrix(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(math::abs)
}

/// Upper bound on the magnitudes of the terms entering the Nijenhuis
/// torsion: the same contraction with every factor replaced by its absolute
/// value and every difference by a sum.
fn nijenhuis_bound(a: &DMatrix<f64>, da: &[DMatrix<f64>]) -> Torsion3 {
    let d = a.nrows();
    let aa = abs_matrix(a);
    let dd: Vec<DMatrix<f64>> = da.iter().map(abs_matrix).collect();
    let mut t = Torsion3::zeros(d);
    for i in 0..d {
        for j in 0..d {
            for k in (j + 1)..d {
                let mut v = 0.0;
                for l in 0..d {
                    v += aa[(l, j)] * dd[l][(i, k)] + aa[(l, k)] * dd[l][(i, j)];
                    v += aa[(i, l)] * (dd[j][(l, k)] + dd[k][(l, j)]);
                }
                // store +v on both sides so that the bound stays non-negative
                t.data[(i * d + j) * d + k] = v;
                t.data[(i * d + k) * d + j] = v;
            }
        }
    }
    t
}

fn haantjes_bound(a: &DMatrix<f64>, tau_bound: &Torsion3) -> Torsion3 {
    let d = a.nrows();
    let aa = abs_matrix(a);
    let a2 = &aa * &aa;
    let mut h = Torsion3::zeros(d);
    for i in 0..d {
        for j in 0..d {
            for k in (j + 1)..d {
                let mut v = 0.0;
                for m in 0..d {
                    v += a2[(i, m)] * tau_bound.get(m, j, k);
                    for l in 0..d {
                        v += tau_bound.get(i, l, m) * aa[(l, j)] * aa[(m, k)];
                        v += aa[(i, l)] * (tau_bound.get(l, m, k) * aa[(m, j)] + tau_bound.get(l, j, m) * aa[(m, k)]);
                    }
                }
                h.data[(i * d + j) * d + k] = v;
                h.data[(i * d + k) * d + j] = v;
            }
        }
    }
    h
}

fn scaled_max(t: &Torsion3, bound: &Torsion3) -> f64 {
    t.data.iter().zip(&bound.data).fold(0.0, |m, (v, b)| math::max(m, math::abs(*v) / (1.0 + b)))
}

/// Nijenhuis torsion of `a` at `x`.
pub fn nijenhuis_torsion(a: &OperatorField, x: &[f64]) -> Result<Torsion3> {
    let (v, d) = a.jet(x)?;
    Ok(nijenhuis_from_jet(&v, &d))
}

/// Haantjes torsion of `a` at `x`.
pub fn haantjes_torsion(a: &OperatorField, x: &[f64]) -> Result<Torsion3> {
    let (v, d) = a.jet(x)?;
    Ok(haantjes_from_nijenhuis(&v, &nijenhuis_from_jet(&v, &d)))
}

/// Which torsion to measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TorsionKind {
    Nijenhuis,
    Haantjes,
}

impl TorsionKind {
    pub fn name(self) -> &'static str {
        match self {
            TorsionKind::Nijenhuis => "nijenhuis",
            TorsionKind::Haantjes => "haantjes",
        }
    }

    pub fn formula(self) -> &'static str {
        match self {
            TorsionKind::Nijenhuis => "τ_A(X,Y) = A²[X,Y] + [AX,AY] − A([X,AY] + [AX,Y])",
            TorsionKind::Haantjes => "H_A(X,Y) = A²τ_A(X,Y) + τ_A(AX,AY) − A(τ_A(X,AY) + τ_A(AX,Y))",
        }
    }
}

/// Largest torsion component at `x`, each divided by `1 +` the matching
/// absolute-value bound of its terms.
pub fn torsion_residual(a: &OperatorField, kind: TorsionKind, x: &[f64]) -> Result<f64> {
    let (v, d) = a.jet(x)?;
    Ok(torsion_residual_from_jet(kind, &v, &d))
}

/// [`torsion_residual`] from a value matrix and its derivatives.
pub fn torsion_residual_from_jet(kind: TorsionKind, a: &DMatrix<f64>, da: &[DMatrix<f64>]) -> f64 {
    let tau = nijenhuis_from_jet(a, da);
    let tb = nijenhuis_bound(a, da);
    match kind {
        TorsionKind::Nijenhuis => scaled_max(&tau, &tb),
        TorsionKind::Haantjes => scaled_max(&haantjes_from_nijenhuis(a, &tau), &haantjes_bound(a, &tb)),
    }
}

/// Torsion check of one operator over a sample set.
pub fn torsion_check(
    a: &OperatorField,
    kind: TorsionKind,
    samples: &[Vec<f64>],
    tol: f64,
    label: &str,
) -> Result<crate::report::Check> {
    let mut tr = ResidualTracker::new();
    for x in samples {
        tr.record(torsion_residual(a, kind, x)?, x);
    }
    Ok(tr.finish(&format!("torsion.{}.{label}", kind.name()), kind.formula(), tol, samples.len()))
}

/// `max |ΩA − AᵀΩ|` at `x`.
pub fn symplectic_compat(a: &OperatorField, x: &[f64]) -> Result<f64> {
    let m = a.eval(x)?;
    let om = symplectic_matrix(a.chart.n());
    Ok(crate::linalg::max_abs(&(&om * &m - m.transpose() * &om)))
}

/// Checks that `Σ c_k A^k` is Haantjes on the samples, after checking that
/// `A` itself is.
pub fn poly_closure_check(
    a: &OperatorField,
    coeffs: &[Expression],
    samples: &[Vec<f64>],
    tol: f64,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new();
    let pre = torsion_check(a, TorsionKind::Haantjes, samples, tol, "base")?;
    let pre_ok = pre.passed;
    report.push(pre);
    let chart = &a.chart;
    let mut power = OperatorField::identity(chart);
    let mut sum: Option<OperatorField> = None;
    for (k, c) in coeffs.iter().enumerate() {
        if k > 0 {
            power = op_compose(&power, a)?;
        }
        let term = power.scaled(c);
        sum = Some(match sum {
            None => term,
            Some(s) => op_combine(&Expression::one(chart), &Expression::one(chart), &s, &term)?,
        });
    }
    let p = sum.unwrap_or_else(|| OperatorField::identity(chart).scaled(&Expression::zero(chart)));
    let mut check = torsion_check(&p, TorsionKind::Haantjes, samples, tol, "polynomial")?;
    check.anchor = "H_A = 0 implies H_{p(A)} = 0 for p(A) = Σ c_k A^k".into();
    if !pre_ok {
        check.passed = false;
        check.notes.push("precondition violated: the base operator is not Haantjes".into());
    }
    report.push(check);
    Ok(report)
}
