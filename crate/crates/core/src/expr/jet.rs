use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::{Expression, Node};
use crate::math;
use crate::phasespace::Chart;
use crate::{Error, Result};

/// Scalar types an expression can be evaluated in.
pub(crate) trait Number: Sized + Clone {
    fn constant(c: f64, dim: usize) -> Self;
    fn variable(index: usize, x: &[f64]) -> Self;
    fn value(&self) -> f64;
    fn add(self, other: Self) -> Self;
    fn sub(self, other: Self) -> Self;
    fn mul(self, other: Self) -> Self;
    fn neg(self) -> Self;
    /// `1/self`; the caller guarantees a non-zero value.
    fn recip(self) -> Self;
    /// `self^k`; the caller guarantees a non-zero value when `k < 0`.
    fn powi(self, k: i32) -> Self;
}

impl Number for f64 {
    fn constant(c: f64, _: usize) -> Self {
        c
    }
    fn variable(index: usize, x: &[f64]) -> Self {
        x[index]
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn neg(self) -> Self {
        -self
    }
    fn recip(self) -> Self {
        1.0 / self
    }
    fn powi(self, k: i32) -> Self {
        math::powi(self, k)
    }
}

/// Value and gradient of a scalar function at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet1 {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl Jet1 {
    fn chain(self, g: f64, dg: f64) -> Self {
        Jet1 { value: g, grad: self.grad.into_iter().map(|d| dg * d).collect() }
    }
}

impl Number for Jet1 {
    fn constant(c: f64, dim: usize) -> Self {
        Jet1 { value: c, grad: vec![0.0; dim] }
    }
    fn variable(index: usize, x: &[f64]) -> Self {
        let mut grad = vec![0.0; x.len()];
        grad[index] = 1.0;
        Jet1 { value: x[index], grad }
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn add(mut self, o: Self) -> Self {
        self.value += o.value;
        self.grad.iter_mut().zip(&o.grad).for_each(|(a, b)| *a += b);
        self
    }
    fn sub(mut self, o: Self) -> Self {
        self.value -= o.value;
        self.grad.iter_mut().zip(&o.grad).for_each(|(a, b)| *a -= b);
        self
    }
    fn mul(mut self, o: Self) -> Self {
        let (a, b) = (self.value, o.value);
        self.grad.iter_mut().zip(&o.grad).for_each(|(da, db)| *da = *da * b + a * db);
        self.value = a * b;
        self
    }
    fn neg(mut self) -> Self {
        self.value = -self.value;
        self.grad.iter_mut().for_each(|d| *d = -*d);
        self
    }
    fn recip(self) -> Self {
        let b = self.value;
        self.chain(1.0 / b, -1.0 / (b * b))
    }
    fn powi(self, k: i32) -> Self {
        let b = self.value;
        let (g, dg) = power_derivs(b, k);
        self.chain(g, dg)
    }
}

/// Value, gradient and Hessian of a scalar function at a point. The Hessian
/// is stored row-major and is exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl Jet2 {
    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    /// Second partial `∂²f/∂xᵢ∂xⱼ`.
    pub fn hess_at(&self, i: usize, j: usize) -> f64 {
        self.hess[i * self.dim() + j]
    }

    /// Hessian as a dense matrix.
    pub fn hessian(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        nalgebra::DMatrix::from_row_slice(n, n, &self.hess)
    }

    /// Fills the lower triangle from the upper one.
    fn mirror(&mut self) {
        let n = self.dim();
        for i in 0..n {
            for j in 0..i {
                self.hess[i * n + j] = self.hess[j * n + i];
            }
        }
    }

    /// `g(self)` from `g`, `g'`, `g''` at the current value.
    fn chain(mut self, g: f64, dg: f64, ddg: f64) -> Self {
        let n = self.dim();
        for i in 0..n {
            for j in i..n {
                let h = &mut self.hess[i * n + j];
                *h = dg * *h + ddg * self.grad[i] * self.grad[j];
            }
        }
        self.grad.iter_mut().for_each(|d| *d *= dg);
        self.value = g;
        self.mirror();
        self
    }
}

impl Number for Jet2 {
    fn constant(c: f64, dim: usize) -> Self {
        Jet2 { value: c, grad: vec![0.0; dim], hess: vec![0.0; dim * dim] }
    }
    fn variable(index: usize, x: &[f64]) -> Self {
        let mut j = Self::constant(x[index], x.len());
        j.grad[index] = 1.0;
        j
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn add(mut self, o: Self) -> Self {
        self.value += o.value;
        self.grad.iter_mut().zip(&o.grad).for_each(|(a, b)| *a += b);
        self.hess.iter_mut().zip(&o.hess).for_each(|(a, b)| *a += b);
        self
    }
    fn sub(mut self, o: Self) -> Self {
        self.value -= o.value;
        self.grad.iter_mut().zip(&o.grad).for_each(|(a, b)| *a -= b);
        self.hess.iter_mut().zip(&o.hess).for_each(|(a, b)| *a -= b);
        self
    }
    fn mul(mut self, o: Self) -> Self {
        let n = self.dim();
        let (a, b) = (self.value, o.value);
        for i in 0..n {
            for j in i..n {
                let k = i * n + j;
                self.hess[k] = self.hess[k] * b
                    + a * o.hess[k]
                    + self.grad[i] * o.grad[j]
                    + o.grad[i] * self.grad[j];
            }
        }
        self.grad.iter_mut().zip(&o.grad).for_each(|(da, db)| *da = *da * b + a * db);
        self.value = a * b;
        self.mirror();
        self
    }
    fn neg(mut self) -> Self {
        self.value = -self.value;
        self.grad.iter_mut().for_each(|d| *d = -*d);
        self.hess.iter_mut().for_each(|d| *d = -*d);
        self
    }
    fn recip(self) -> Self {
        let b = self.value;
        self.chain(1.0 / b, -1.0 / (b * b), 2.0 / (b * b * b))
    }
    fn powi(self, k: i32) -> Self {
        let b = self.value;
        let (g, dg) = power_derivs(b, k);
        let ddg = if k == 0 || k == 1 {
            0.0
        } else {
            (k as f64) * ((k - 1) as f64) * math::powi(b, k - 2)
        };
        self.chain(g, dg, ddg)
    }
}

fn power_derivs(b: f64, k: i32) -> (f64, f64) {
    let dg = if k == 0 { 0.0 } else { (k as f64) * math::powi(b, k - 1) };
    (math::powi(b, k), dg)
}

fn pole(node: &Node, chart: &Chart) -> Error {
    let e = Expression { node: node.clone(), chart: chart.clone() };
    Error::DivisionByZero { subexpr: e.to_string() }
}

pub(super) fn eval<N: Number>(node: &Node, x: &[f64], chart: &Chart) -> Result<N> {
    Ok(match node {
        Node::Var(i) => N::variable(*i, x),
        Node::Const(c) => N::constant(*c, x.len()),
        Node::Neg(a) => eval::<N>(a, x, chart)?.neg(),
        Node::Add(a, b) => eval::<N>(a, x, chart)?.add(eval(b, x, chart)?),
        Node::Sub(a, b) => eval::<N>(a, x, chart)?.sub(eval(b, x, chart)?),
        Node::Mul(a, b) => eval::<N>(a, x, chart)?.mul(eval(b, x, chart)?),
        Node::Div(a, b) => {
            let den: N = eval(b, x, chart)?;
            if den.value() == 0.0 {
                return Err(pole(b, chart));
            }
            eval::<N>(a, x, chart)?.mul(den.recip())
        }
        Node::Pow(a, k) => {
            let base: N = eval(a, x, chart)?;
            if *k < 0 && base.value() == 0.0 {
                return Err(pole(a, chart));
            }
            base.powi(*k)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::super::Expression;
    use crate::phasespace::Chart;
    use crate::Error;
    use alloc::string::ToString;

    fn fd_grad(e: &Expression, x: &[f64], h: f64) -> alloc::vec::Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[i] += h;
                b[i] -= h;
                (e.eval(&a).unwrap() - e.eval(&b).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradient_and_hessian_match_central_differences() {
        let c = Chart::canonical(2).unwrap();
        let e = Expression::parse("(q1^3*p2 - q2/p1)/(2 + q1^2) + (p1 - q2)^-2 - 3*q1*p2^2", &c).unwrap();
        let x = [0.4, -0.7, 1.3, 0.9];
        let j2 = e.jet2(&x).unwrap();
        let j1 = e.jet1(&x).unwrap();
        assert_eq!(j1.value, j2.value);
        assert_eq!(j1.value, e.eval(&x).unwrap());
        let fd = fd_grad(&e, &x, 1e-6);
        for i in 0..4 {
            assert!((j1.grad[i] - fd[i]).abs() < 1e-7 * (1.0 + fd[i].abs()));
            assert!((j1.grad[i] - j2.grad[i]).abs() < 1e-14 * (1.0 + fd[i].abs()));
        }
        let h = 1e-4;
        for i in 0..4 {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += h;
            b[i] -= h;
            let ga = e.jet1(&a).unwrap().grad;
            let gb = e.jet1(&b).unwrap().grad;
            for j in 0..4 {
                let fd = (ga[j] - gb[j]) / (2.0 * h);
                assert!((j2.hess_at(i, j) - fd).abs() < 1e-6 * (1.0 + fd.abs()), "H[{i},{j}]");
            }
        }
    }

    #[test]
    fn hessian_is_bitwise_symmetric() {
        let c = Chart::canonical(3).unwrap();
        let e = Expression::parse("q1*q2*p3/(1 + p1^2*q3) - (q2 - p2)^3*q1", &c).unwrap();
        let j = e.jet2(&[0.3, 1.1, -0.2, 0.7, -1.4, 0.6]).unwrap();
        for i in 0..6 {
            for k in 0..6 {
                assert_eq!(j.hess_at(i, k).to_bits(), j.hess_at(k, i).to_bits());
            }
        }
    }

    #[test]
    fn poles_report_the_denominator() {
        let c = Chart::canonical(3).unwrap();
        let e = Expression::parse("1/(8*(p1 + p3)^2)", &c).unwrap();
        let err = e.eval(&[0.0, 0.0, 0.0, 1.0, 0.0, -1.0]).unwrap_err();
        assert_eq!(err, Error::DivisionByZero { subexpr: "8*(p1 + p3)^2".to_string() });
        let e = Expression::parse("q1^-1", &c).unwrap();
        assert!(matches!(e.jet2(&[0.0; 6]), Err(Error::DivisionByZero { .. })));
    }

    #[test]
    fn worked_hamiltonians_at_reference_point() {
        let c = Chart::canonical(3).unwrap();
        let h1 = Expression::parse(
            "4*p1^2 + 2*p2^2 + 4*p3^2 + q1*(q1 + 2) + 4*q2^2 + q3*(q3 - 2) + 4*q1*q2 + 2*q1*q3 + 4*q2*q3",
            &c,
        )
        .unwrap();
        let h2 = Expression::parse("p1 - p2 + p3", &c).unwrap();
        let x = [0.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        assert_eq!(h1.eval(&x).unwrap(), 8.0);
        assert_eq!(h2.eval(&x).unwrap(), 2.0);
    }

    #[test]
    fn dimension_is_checked() {
        let c = Chart::canonical(1).unwrap();
        let e = Expression::parse("q1", &c).unwrap();
        assert_eq!(e.eval(&[1.0]).unwrap_err(), Error::DimensionMismatch { expected: 2, found: 1 });
    }
}
