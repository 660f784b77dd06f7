//! Deterministic admissible sampling of phase-space points.
//!
//! Points are drawn uniformly from a box with a seeded ChaCha8 stream.
//! Points where any guard expression is smaller than its threshold in
//! absolute value (or cannot be evaluated) are rejected and redrawn, which
//! keeps samples away from the poles of the operators under test.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::{self, Expression, Node};
use crate::phasespace::Chart;
use crate::{Error, Result};

/// Default rejection threshold for guards.
pub const GUARD_MIN: f64 = 1e-3;

/// Seeded generator used throughout the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A denominator (or determinant) that must stay away from zero.
#[derive(Debug, Clone)]
pub struct Guard {
    pub expr: Expression,
    pub min: f64,
}

/// Sampling configuration.
#[derive(Debug, Clone)]
pub struct Sampler {
    pub seed: u64,
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
    pub guards: Vec<Guard>,
    /// Upper bound on draws per accepted point before giving up.
    pub max_attempts: usize,
}

impl Sampler {
    /// `count` points in `[-2, 2]^{2n}` from `seed`.
    pub fn new(seed: u64, count: usize) -> Self {
        Sampler { seed, count, lo: -2.0, hi: 2.0, guards: Vec::new(), max_attempts: 10_000 }
    }

    pub fn with_box(mut self, lo: f64, hi: f64) -> Self {
        self.lo = lo;
        self.hi = hi;
        self
    }

    /// Rejects points with `|g| < 1e-3`.
    pub fn guard(self, g: Expression) -> Self {
        self.guard_min(g, GUARD_MIN)
    }

    /// Rejects points with `|g| < min`.
    pub fn guard_min(mut self, g: Expression, min: f64) -> Self {
        self.guards.push(Guard { expr: g, min });
        self
    }

    fn admissible(&self, x: &[f64]) -> bool {
        self.guards
            .iter()
            .all(|g| matches!(g.expr.eval(x), Ok(v) if v.is_finite() && libm::fabs(v) >= g.min))
    }

    /// Draws the admissible sample set for `chart`.
    pub fn sample(&self, chart: &Chart) -> Result<Vec<Vec<f64>>> {
        if !(self.lo < self.hi) {
            return Err(Error::Sampling(format!("empty box [{}, {}]", self.lo, self.hi)));
        }
        if self.guards.iter().any(|g| g.expr.chart() != chart) {
            return Err(Error::ChartMismatch);
        }
        let mut rng = rng(self.seed);
        let mut out = Vec::with_capacity(self.count);
        let mut attempts = 0usize;
        while out.len() < self.count {
            let x: Vec<f64> = (0..chart.dim()).map(|_| rng.random_range(self.lo..self.hi)).collect();
            if self.admissible(&x) {
                out.push(x);
                attempts = 0;
            } else {
                attempts += 1;
                if attempts >= self.max_attempts {
                    return Err(Error::Sampling(format!(
                        "no admissible point after {attempts} draws; guards exclude the box"
                    )));
                }
            }
        }
        Ok(out)
    }
}

/// Random polynomial of total degree `≤ degree` in the variables `vars`,
/// with coefficients drawn from multiples of 1/8 in `[-1, 1]`.
pub fn random_polynomial<R: Rng>(rng: &mut R, chart: &Chart, vars: &[usize], degree: u32) -> Expression {
    let mut monomials: Vec<Vec<u32>> = Vec::new();
    let mut cur = alloc::vec![0u32; vars.len()];
    enumerate(&mut cur, 0, degree, &mut monomials);
    let mut acc = Node::Const(0.0);
    for exps in monomials {
        let c = rng.random_range(-8i32..=8) as f64 / 8.0;
        if c == 0.0 {
            continue;
        }
        let mut term = Node::constant(c);
        for (&v, &e) in vars.iter().zip(&exps) {
            if e > 0 {
                term = expr::mul(term, expr::pow(Node::Var(v), e as i32));
            }
        }
        acc = expr::add(acc, term);
    }
    Expression::from_node(acc, chart).expect("variables come from the chart")
}

fn enumerate(cur: &mut Vec<u32>, k: usize, left: u32, out: &mut Vec<Vec<u32>>) {
    if k == cur.len() {
        out.push(cur.clone());
        return;
    }
    for e in 0..=left {
        cur[k] = e;
        enumerate(cur, k + 1, left - e, out);
    }
    cur[k] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_guarded() {
        let c = Chart::canonical(3).unwrap();
        let g = Expression::parse("p1 + p3", &c).unwrap();
        let s = Sampler::new(7, 64).guard_min(g.clone(), 0.1);
        let a = s.sample(&c).unwrap();
        let b = s.sample(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);
        for x in &a {
            assert!(x.iter().all(|v| (-2.0..2.0).contains(v)));
            assert!(g.eval(x).unwrap().abs() >= 0.1);
        }
        assert_ne!(a, Sampler::new(8, 64).sample(&c).unwrap());
    }

    #[test]
    fn impossible_guard_is_an_error() {
        let c = Chart::canonical(1).unwrap();
        let g = Expression::parse("q1 - q1", &c).unwrap();
        let mut s = Sampler::new(1, 4).guard(g);
        s.max_attempts = 100;
        assert!(matches!(s.sample(&c), Err(Error::Sampling(_))));
    }

    #[test]
    fn random_polynomial_has_bounded_degree() {
        let c = Chart::canonical(2).unwrap();
        let mut r = rng(3);
        let p = random_polynomial(&mut r, &c, &[0, 2], 2);
        assert!(p.variables().iter().all(|v| *v == 0 || *v == 2));
        // a degree-2 polynomial has a constant Hessian
        let h1 = p.jet2(&[0.1, 0.0, 0.3, 0.0]).unwrap().hess;
        let h2 = p.jet2(&[-1.7, 0.5, 1.2, 0.9]).unwrap().hess;
        assert_eq!(h1, h2);
    }
}
