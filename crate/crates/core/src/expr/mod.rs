//! Scalar expressions over the canonical variables of a chart.
//!
//! Expressions are rational functions with real coefficients: variables,
//! non-negative constants, `+ - * /`, unary minus and integer powers. They
//! are evaluated in binary64 together with exact first and second
//! derivatives through truncated Taylor (hyper-dual) arithmetic, see
//! [`Jet1`] and [`Jet2`].
//!
//! Grammar of the textual form:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := ['-'] atom ['^' ['-'] integer]
//! atom   := number | ident | '(' expr ')'
//! ```
//!
//! `-x^2` reads as `-(x^2)`. The printer emits the same grammar with the
//! minimum of parentheses, so printing and re-parsing reproduces the tree.

mod jet;
mod parse;

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops;

pub use self::jet::{Jet1, Jet2};
pub(crate) use self::jet::Number;

use crate::math;
use crate::phasespace::Chart;
use crate::{Error, Result};

/// Expression tree. Constants are finite and non-negative; negative values
/// are spelled `Neg(Const)`, which is what the parser produces.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Var(usize),
    Const(f64),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
}

impl Node {
    /// Constant node; negative values become `Neg(Const(|c|))`.
    pub fn constant(c: f64) -> Node {
        if c < 0.0 {
            Node::Neg(Box::new(Node::Const(-c)))
        } else {
            Node::Const(if c == 0.0 { 0.0 } else { c })
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Node::Const(c) if *c == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Node::Const(c) if *c == 1.0)
    }

    fn collect_vars(&self, out: &mut BTreeSet<usize>) {
        match self {
            Node::Var(i) => {
                out.insert(*i);
            }
            Node::Const(_) => {}
            Node::Neg(a) | Node::Pow(a, _) => a.collect_vars(out),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    fn max_var(&self) -> Option<usize> {
        let mut s = BTreeSet::new();
        self.collect_vars(&mut s);
        s.last().copied()
    }

    /// Replaces every `Var(i)` with `subs[i]`.
    fn substitute(&self, subs: &[Node]) -> Node {
        match self {
            Node::Var(i) => subs[*i].clone(),
            Node::Const(c) => Node::Const(*c),
            Node::Neg(a) => Node::Neg(Box::new(a.substitute(subs))),
            Node::Pow(a, k) => Node::Pow(Box::new(a.substitute(subs)), *k),
            Node::Add(a, b) => Node::Add(Box::new(a.substitute(subs)), Box::new(b.substitute(subs))),
            Node::Sub(a, b) => Node::Sub(Box::new(a.substitute(subs)), Box::new(b.substitute(subs))),
            Node::Mul(a, b) => Node::Mul(Box::new(a.substitute(subs)), Box::new(b.substitute(subs))),
            Node::Div(a, b) => Node::Div(Box::new(a.substitute(subs)), Box::new(b.substitute(subs))),
        }
    }
}

/// An expression bound to the chart whose variables it references.
#[derive(Clone, PartialEq)]
pub struct Expression {
    node: Node,
    chart: Chart,
}

impl Expression {
    /// Parses `text` against the variables (and block aliases) of `chart`.
    pub fn parse(text: &str, chart: &Chart) -> Result<Self> {
        Self::parse_with(text, chart, |_| None)
    }

    /// Like [`Expression::parse`], but identifiers that are not chart
    /// variables are looked up in `defs` and inlined.
    pub fn parse_with<F>(text: &str, chart: &Chart, defs: F) -> Result<Self>
    where
        F: Fn(&str) -> Option<Node>,
    {
        let node = parse::Parser::new(text, chart, &defs).parse()?;
        Ok(Expression { node, chart: chart.clone() })
    }

    /// Wraps a node; fails if it references variables outside the chart.
    pub fn from_node(node: Node, chart: &Chart) -> Result<Self> {
        if let Some(m) = node.max_var() {
            if m >= chart.dim() {
                return Err(Error::DimensionMismatch { expected: chart.dim(), found: m + 1 });
            }
        }
        Ok(Expression { node, chart: chart.clone() })
    }

    pub fn constant(c: f64, chart: &Chart) -> Self {
        Expression { node: Node::constant(c), chart: chart.clone() }
    }

    pub fn zero(chart: &Chart) -> Self {
        Self::constant(0.0, chart)
    }

    pub fn one(chart: &Chart) -> Self {
        Self::constant(1.0, chart)
    }

    /// The coordinate function of variable `index`.
    pub fn var(index: usize, chart: &Chart) -> Result<Self> {
        Self::from_node(Node::Var(index), chart)
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    pub fn into_node(self) -> Node {
        self.node
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    /// Indices of the variables that occur in the tree.
    pub fn variables(&self) -> BTreeSet<usize> {
        let mut s = BTreeSet::new();
        self.node.collect_vars(&mut s);
        s
    }

    pub fn is_zero(&self) -> bool {
        self.node.is_zero()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.chart.dim() {
            return Err(Error::DimensionMismatch { expected: self.chart.dim(), found: x.len() });
        }
        Ok(())
    }

    pub(crate) fn eval_as<N: Number>(&self, x: &[f64]) -> Result<N> {
        self.check_point(x)?;
        jet::eval(&self.node, x, &self.chart)
    }

    /// Value at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.eval_as::<f64>(x)
    }

    /// Value and gradient at `x`.
    pub fn jet1(&self, x: &[f64]) -> Result<Jet1> {
        self.eval_as::<Jet1>(x)
    }

    /// Value, gradient and Hessian at `x`.
    pub fn jet2(&self, x: &[f64]) -> Result<Jet2> {
        self.eval_as::<Jet2>(x)
    }

    /// Algebraically tidied copy: folds constants, drops neutral elements and
    /// cancels structurally identical factors of quotients.
    pub fn tidy(&self) -> Self {
        Expression { node: tidy(&self.node), chart: self.chart.clone() }
    }

    /// Symbolic partial derivative with respect to variable `index`, tidied.
    pub fn derivative(&self, index: usize) -> Self {
        Expression { node: derive(&self.node, index), chart: self.chart.clone() }
    }

    /// Composition with a coordinate change: every variable `i` is replaced
    /// by `subs[i]`; the result lives on the chart of `subs`.
    pub fn substitute(&self, subs: &[Expression]) -> Result<Self> {
        if subs.len() != self.chart.dim() {
            return Err(Error::DimensionMismatch { expected: self.chart.dim(), found: subs.len() });
        }
        let target = subs[0].chart.clone();
        if subs.iter().any(|s| s.chart != target) {
            return Err(Error::ChartMismatch);
        }
        let nodes: Vec<Node> = subs.iter().map(|s| s.node.clone()).collect();
        Ok(Expression { node: self.node.substitute(&nodes), chart: target })
    }

    fn combine(&self, other: &Expression, f: impl FnOnce(Node, Node) -> Node) -> Expression {
        assert!(self.chart == other.chart, "expressions belong to different charts");
        Expression { node: f(self.node.clone(), other.node.clone()), chart: self.chart.clone() }
    }

    /// Tidied sum.
    pub fn plus(&self, other: &Expression) -> Expression {
        self.combine(other, add)
    }

    /// Tidied difference.
    pub fn minus(&self, other: &Expression) -> Expression {
        self.combine(other, sub)
    }

    /// Tidied product.
    pub fn times(&self, other: &Expression) -> Expression {
        self.combine(other, mul)
    }

    /// Tidied quotient.
    pub fn over(&self, other: &Expression) -> Expression {
        self.combine(other, div)
    }

    /// Tidied negation.
    pub fn negated(&self) -> Expression {
        Expression { node: neg(self.node.clone()), chart: self.chart.clone() }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(f, &self.node, self.chart.names(), Prec::Sum)
    }
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expression({self})")
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $variant:ident) => {
        impl ops::$tr<&Expression> for &Expression {
            type Output = Expression;
            /// Raw (untidied) tree construction.
            ///
            /// # Panics
            /// If the operands belong to different charts.
            fn $method(self, rhs: &Expression) -> Expression {
                self.combine(rhs, |a, b| Node::$variant(Box::new(a), Box::new(b)))
            }
        }
        impl ops::$tr for Expression {
            type Output = Expression;
            fn $method(self, rhs: Expression) -> Expression {
                (&self).$method(&rhs)
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl ops::Neg for &Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        Expression { node: Node::Neg(Box::new(self.node.clone())), chart: self.chart.clone() }
    }
}

impl ops::Neg for Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        -&self
    }
}

/// A point of phase space, `(q¹…qⁿ, p₁…pₙ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(pub Vec<f64>);

impl Point {
    /// Checks the coordinate count against `chart`.
    pub fn new(chart: &Chart, values: Vec<f64>) -> Result<Self> {
        if values.len() != chart.dim() {
            return Err(Error::DimensionMismatch { expected: chart.dim(), found: values.len() });
        }
        Ok(Point(values))
    }
}

impl ops::Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

// ---------------------------------------------------------------------------
// Printing

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Sum,
    Term,
    Factor,
    Atom,
}

fn prec(n: &Node) -> Prec {
    match n {
        Node::Add(..) | Node::Sub(..) => Prec::Sum,
        Node::Mul(..) | Node::Div(..) => Prec::Term,
        Node::Neg(_) | Node::Pow(..) => Prec::Factor,
        Node::Var(_) | Node::Const(_) => Prec::Atom,
    }
}

fn write_const(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c == libm::trunc(c) && c < 1e15 {
        write!(f, "{}", c as i64)
    } else {
        write!(f, "{c}")
    }
}

fn write_node(f: &mut fmt::Formatter<'_>, n: &Node, names: &[String], ctx: Prec) -> fmt::Result {
    if prec(n) < ctx {
        f.write_str("(")?;
        write_node(f, n, names, Prec::Sum)?;
        return f.write_str(")");
    }
    match n {
        Node::Var(i) => f.write_str(&names[*i]),
        Node::Const(c) => write_const(f, *c),
        Node::Neg(a) => {
            f.write_str("-")?;
            match &**a {
                Node::Pow(b, k) => {
                    write_node(f, b, names, Prec::Atom)?;
                    write!(f, "^{k}")
                }
                other => write_node(f, other, names, Prec::Atom),
            }
        }
        Node::Pow(b, k) => {
            write_node(f, b, names, Prec::Atom)?;
            write!(f, "^{k}")
        }
        Node::Add(a, b) | Node::Sub(a, b) => {
            write_node(f, a, names, Prec::Sum)?;
            f.write_str(if matches!(n, Node::Add(..)) { " + " } else { " - " })?;
            write_right(f, b, names, Prec::Term)
        }
        Node::Mul(a, b) | Node::Div(a, b) => {
            write_node(f, a, names, Prec::Term)?;
            f.write_str(if matches!(n, Node::Mul(..)) { "*" } else { "/" })?;
            write_right(f, b, names, Prec::Factor)
        }
    }
}

/// Right operands that start with a minus sign get parentheses.
fn write_right(f: &mut fmt::Formatter<'_>, n: &Node, names: &[String], ctx: Prec) -> fmt::Result {
    if matches!(n, Node::Neg(_)) {
        f.write_str("(")?;
        write_node(f, n, names, Prec::Sum)?;
        f.write_str(")")
    } else {
        write_node(f, n, names, ctx)
    }
}

// ---------------------------------------------------------------------------
// Tidying

// The free functions below are tidying node constructors.

fn as_const(n: &Node) -> Option<f64> {
    match n {
        Node::Const(c) => Some(*c),
        Node::Neg(a) => match &**a {
            Node::Const(c) => Some(-*c),
            _ => None,
        },
        _ => None,
    }
}

/// Splits a leading sign off products and quotients.
fn strip_sign(n: Node) -> (bool, Node) {
    match n {
        Node::Neg(a) => {
            let (s, inner) = strip_sign(*a);
            (!s, inner)
        }
        other => (false, other),
    }
}

fn signed(negative: bool, n: Node) -> Node {
    if negative {
        neg(n)
    } else {
        n
    }
}

pub fn tidy(n: &Node) -> Node {
    match n {
        Node::Var(_) | Node::Const(_) => n.clone(),
        Node::Neg(a) => neg(tidy(a)),
        Node::Add(a, b) => add(tidy(a), tidy(b)),
        Node::Sub(a, b) => sub(tidy(a), tidy(b)),
        Node::Mul(a, b) => mul(tidy(a), tidy(b)),
        Node::Div(a, b) => div(tidy(a), tidy(b)),
        Node::Pow(a, k) => pow(tidy(a), *k),
    }
}

pub fn neg(a: Node) -> Node {
    match a {
        Node::Const(c) if c == 0.0 => Node::Const(0.0),
        Node::Neg(x) => *x,
        other => Node::Neg(Box::new(other)),
    }
}

pub fn add(a: Node, b: Node) -> Node {
    if a.is_zero() {
        return b;
    }
    if b.is_zero() {
        return a;
    }
    if let (Some(x), Some(y)) = (as_const(&a), as_const(&b)) {
        return Node::constant(x + y);
    }
    match b {
        Node::Neg(y) => sub(a, *y),
        b => Node::Add(Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Node, b: Node) -> Node {
    if b.is_zero() {
        return a;
    }
    if a.is_zero() {
        return neg(b);
    }
    if a == b {
        return Node::Const(0.0);
    }
    if let (Some(x), Some(y)) = (as_const(&a), as_const(&b)) {
        return Node::constant(x - y);
    }
    match b {
        Node::Neg(y) => add(a, *y),
        b => Node::Sub(Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Node, b: Node) -> Node {
    if a.is_zero() || b.is_zero() {
        return Node::Const(0.0);
    }
    let (sa, a) = strip_sign(a);
    let (sb, b) = strip_sign(b);
    let negative = sa != sb;
    let out = if a.is_one() {
        b
    } else if b.is_one() {
        a
    } else if let (Some(x), Some(y)) = (as_const(&a), as_const(&b)) {
        Node::constant(x * y)
    } else if matches!(a, Node::Div(..)) || matches!(b, Node::Div(..)) {
        let m = Node::Mul(Box::new(a), Box::new(b));
        cancel(&m).unwrap_or(m)
    } else {
        Node::Mul(Box::new(a), Box::new(b))
    };
    signed(negative, out)
}

pub fn div(a: Node, b: Node) -> Node {
    if a.is_zero() && !b.is_zero() {
        return Node::Const(0.0);
    }
    let (sa, a) = strip_sign(a);
    let (sb, b) = strip_sign(b);
    let negative = sa != sb;
    let out = if b.is_one() {
        a
    } else if let (Some(x), Some(y)) = (as_const(&a), as_const(&b)) {
        match reduce_fraction(x, y) {
            (n, d) if d == 1.0 => Node::constant(n),
            (n, d) => Node::Div(Box::new(Node::constant(n)), Box::new(Node::constant(d))),
        }
    } else {
        let d = Node::Div(Box::new(a), Box::new(b));
        cancel(&d).unwrap_or(d)
    };
    signed(negative, out)
}

pub fn pow(a: Node, k: i32) -> Node {
    match k {
        0 => return Node::Const(1.0),
        1 => return a,
        _ => {}
    }
    if let Some(c) = as_const(&a) {
        if k > 0 {
            return Node::constant(crate::math::powi(c, k));
        }
    }
    match a {
        Node::Neg(x) => {
            let p = pow(*x, k);
            if k % 2 == 0 {
                p
            } else {
                neg(p)
            }
        }
        Node::Pow(x, j) => pow(*x, j.saturating_mul(k)),
        a => Node::Pow(Box::new(a), k),
    }
}

/// `x/y` in lowest terms when both are integers below 2^53; an exact integer
/// quotient otherwise; unchanged when neither applies.
fn reduce_fraction(x: f64, y: f64) -> (f64, f64) {
    const EXACT: f64 = 9_007_199_254_740_992.0;
    if y == 0.0 {
        return (x, y);
    }
    let integral = |v: f64| v == libm::trunc(v) && math::abs(v) < EXACT;
    if integral(x) && integral(y) {
        let (mut a, mut b) = (math::abs(x) as u64, math::abs(y) as u64);
        while b != 0 {
            (a, b) = (b, a % b);
        }
        let g = a.max(1) as f64;
        let (n, d) = (x / g, y / g);
        return if d < 0.0 { (-n, -d) } else { (n, d) };
    }
    let q = x / y;
    if q == libm::trunc(q) && q * y == x {
        (q, 1.0)
    } else {
        (x, y)
    }
}

/// Multiplicative normal form of a product/quotient: sign, numeric
/// coefficient as a fraction, and bases with integer exponents in order of
/// first appearance.
struct Factors {
    negative: bool,
    num: f64,
    den: f64,
    bases: Vec<(Node, i32)>,
    merged: bool,
}

impl Factors {
    fn collect(&mut self, n: &Node, sign: i32) {
        match n {
            Node::Mul(a, b) => {
                self.collect(a, sign);
                self.collect(b, sign);
            }
            Node::Div(a, b) => {
                self.collect(a, sign);
                self.collect(b, -sign);
            }
            Node::Neg(a) => {
                self.negative = !self.negative;
                self.collect(a, sign);
            }
            Node::Const(c) => {
                if sign > 0 {
                    self.num *= c;
                } else {
                    self.den *= c;
                }
                self.merged |= self.num != 1.0 && self.den != 1.0;
            }
            Node::Pow(b, k) if !matches!(**b, Node::Const(_)) => self.push((**b).clone(), sign * k),
            other => self.push(other.clone(), sign),
        }
    }

    fn push(&mut self, base: Node, e: i32) {
        if let Some(slot) = self.bases.iter_mut().find(|(b, _)| *b == base) {
            if (slot.1 > 0) != (e > 0) {
                self.merged = true;
            }
            slot.1 += e;
        } else {
            self.bases.push((base, e));
        }
    }

    fn build(mut self) -> Node {
        (self.num, self.den) = reduce_fraction(self.num, self.den);
        let mut num: Option<Node> = (self.num != 1.0).then(|| Node::Const(self.num));
        let mut den: Option<Node> = (self.den != 1.0).then(|| Node::Const(self.den));
        for (b, e) in self.bases {
            let (slot, k) = if e > 0 { (&mut num, e) } else { (&mut den, -e) };
            if k == 0 {
                continue;
            }
            let f = if k == 1 { b } else { Node::Pow(Box::new(b), k) };
            *slot = Some(match slot.take() {
                None => f,
                Some(acc) => Node::Mul(Box::new(acc), Box::new(f)),
            });
        }
        let num = num.unwrap_or(Node::Const(1.0));
        let out = match den {
            None => num,
            Some(d) => Node::Div(Box::new(num), Box::new(d)),
        };
        signed(self.negative, out)
    }
}

/// Cancels shared factors between numerator and denominator. Returns `None`
/// when nothing cancels, so the caller can keep the original shape.
fn cancel(n: &Node) -> Option<Node> {
    let mut f = Factors { negative: false, num: 1.0, den: 1.0, bases: Vec::new(), merged: false };
    f.collect(n, 1);
    if f.num == 0.0 {
        return Some(Node::Const(0.0));
    }
    f.merged.then(|| f.build())
}

// ---------------------------------------------------------------------------
// Symbolic differentiation

fn derive(n: &Node, v: usize) -> Node {
    match n {
        Node::Var(i) => Node::Const(if *i == v { 1.0 } else { 0.0 }),
        Node::Const(_) => Node::Const(0.0),
        Node::Neg(a) => neg(derive(a, v)),
        Node::Add(a, b) => add(derive(a, v), derive(b, v)),
        Node::Sub(a, b) => sub(derive(a, v), derive(b, v)),
        Node::Mul(a, b) => {
            let (a, b) = (tidy(a), tidy(b));
            add(mul(derive(&a, v), b.clone()), mul(a, derive(&b, v)))
        }
        Node::Div(a, b) => {
            let (a, b) = (tidy(a), tidy(b));
            let db = derive(&b, v);
            let first = div(derive(&a, v), b.clone());
            if db.is_zero() {
                first
            } else {
                sub(first, div(mul(a, db), pow(b, 2)))
            }
        }
        Node::Pow(a, k) => {
            let a = tidy(a);
            let da = derive(&a, v);
            mul(mul(Node::constant(*k as f64), pow(a, k - 1)), da)
        }
    }
}
