//! Haantjes chains `dH_α = K_αᵀ dH` and the diagonal chain operators built
//! from a pair of functions.

use alloc::format;
use alloc::vec::Vec;

use crate::expr::Expression;
use crate::math;
use crate::report::{Check, ResidualTracker, VerificationReport};
use crate::tensor::{torsion_check, OperatorField, TorsionKind};
use crate::{Error, Result};

fn check_charts(k: &OperatorField, h: &Expression) -> Result<()> {
    if k.chart() != h.chart() {
        return Err(Error::ChartMismatch);
    }
    Ok(())
}

/// Components `θ_i = Σ_j K^j_i ∂_j H` and their derivatives
/// `dθ[l][i] = ∂_l θ_i`, together with the matching absolute bounds.
fn chain_form(k: &OperatorField, h: &Expression, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let d = k.dim();
    let (kv, dk) = k.jet(x)?;
    let hj = h.jet2(x)?;
    let theta: Vec<f64> = (0..d).map(|i| (0..d).map(|j| kv[(j, i)] * hj.grad[j]).sum()).collect();
    let mut dtheta = alloc::vec![alloc::vec![0.0; d]; d];
    let mut bound = alloc::vec![alloc::vec![0.0; d]; d];
    for l in 0..d {
        for i in 0..d {
            let (mut v, mut b) = (0.0, 0.0);
            for j in 0..d {
                let t1 = dk[l][(j, i)] * hj.grad[j];
                let t2 = kv[(j, i)] * hj.hess_at(l, j);
                v += t1 + t2;
                b += math::abs(t1) + math::abs(t2);
            }
            dtheta[l][i] = v;
            bound[l][i] = b;
        }
    }
    Ok((theta, dtheta, bound))
}

/// `max |∂_i θ_j − ∂_j θ_i|` for `θ = Kᵀ dH` at `x`.
pub fn chain_closedness(k: &OperatorField, h: &Expression, x: &[f64]) -> Result<f64> {
    check_charts(k, h)?;
    let (_, dt, _) = chain_form(k, h, x)?;
    let d = k.dim();
    let mut m = 0.0;
    for i in 0..d {
        for j in (i + 1)..d {
            m = math::max(m, math::abs(dt[i][j] - dt[j][i]));
        }
    }
    Ok(m)
}

/// Closedness of `Kᵀ dH` over samples, each residual divided by `1 +` the
/// magnitude of its terms.
pub fn chain_closedness_check(k: &OperatorField, h: &Expression, samples: &[Vec<f64>], tol: f64) -> Result<Check> {
    check_charts(k, h)?;
    let d = k.dim();
    let mut tr = ResidualTracker::new();
    for x in samples {
        let (_, dt, b) = chain_form(k, h, x)?;
        let mut m = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                let r = math::abs(dt[i][j] - dt[j][i]) / (1.0 + b[i][j] + b[j][i]);
                m = math::max(m, r);
            }
        }
        tr.record(m, x);
    }
    Ok(tr.finish("chain.closedness", "d(Kᵀ dH) = 0", tol, samples.len()))
}

/// Checks `Kᵀ dH = dH_target` on samples.
pub fn chain_verify(
    k: &OperatorField,
    h: &Expression,
    target: &Expression,
    samples: &[Vec<f64>],
    tol: f64,
) -> Result<Check> {
    check_charts(k, h)?;
    check_charts(k, target)?;
    let d = k.dim();
    let mut tr = ResidualTracker::new();
    for x in samples {
        let kv = k.eval(x)?;
        let gh = h.jet1(x)?.grad;
        let gt = target.jet1(x)?.grad;
        let mut m = 0.0;
        for i in 0..d {
            let (mut v, mut b) = (0.0, math::abs(gt[i]));
            for j in 0..d {
                let t = kv[(j, i)] * gh[j];
                v += t;
                b = math::max(b, math::abs(t));
            }
            m = math::max(m, math::abs(v - gt[i]) / (1.0 + b));
        }
        tr.record(m, x);
    }
    Ok(tr.finish("chain.equation", "dH_α = Kᵀ dH", tol, samples.len()))
}

/// Diagonal operator whose `q_i` and `p_i` slots both carry
/// `(∂H_α/∂p_i) / (∂H/∂p_i)`, plus a report of the chain equation and the
/// Haantjes torsion on `samples`.
pub fn build_ksov(
    h: &Expression,
    h_alpha: &Expression,
    samples: &[Vec<f64>],
    tol: f64,
) -> Result<(OperatorField, VerificationReport)> {
    if h.chart() != h_alpha.chart() {
        return Err(Error::ChartMismatch);
    }
    let chart = h.chart();
    let n = chart.n();
    let mut slots = Vec::with_capacity(n);
    for i in 0..n {
        let num = h_alpha.derivative(n + i);
        let den = h.derivative(n + i);
        if den.is_zero() {
            return Err(Error::ZeroDenominator {
                slot: i,
                detail: format!("∂H/∂{} vanishes identically", chart.name(n + i)),
            });
        }
        for x in samples {
            if den.eval(x)? == 0.0 {
                return Err(Error::ZeroDenominator {
                    slot: i,
                    detail: format!("∂H/∂{} = {} vanishes at {:?}", chart.name(n + i), den, x),
                });
            }
        }
        slots.push(num.over(&den));
    }
    let diag: Vec<Expression> = slots.iter().chain(slots.iter()).cloned().collect();
    let k = OperatorField::diagonal(chart, diag)?;
    let mut report = VerificationReport::new();
    report.push(chain_verify(&k, h, h_alpha, samples, tol)?);
    report.push(torsion_check(&k, TorsionKind::Haantjes, samples, tol, "chain-operator")?);
    Ok((k, report))
}

/// Eight-point Gauss–Legendre nodes and weights on `[-1, 1]`.
const GL_NODES: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// Line integral of `θ = Kᵀ dH` from `base` to `x` along the staircase path
/// that moves one coordinate at a time. When `θ` is closed on a box
/// containing the path this is `H_α(x) − H_α(base)` for the chain partner.
/// Each leg uses eight-point Gauss–Legendre quadrature, exact for
/// polynomial integrands of degree ≤ 15 along the leg.
pub fn integrate_chain(k: &OperatorField, h: &Expression, base: &[f64], x: &[f64]) -> Result<f64> {
    check_charts(k, h)?;
    let d = k.dim();
    if base.len() != d || x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: base.len().min(x.len()) });
    }
    let mut p = base.to_vec();
    let mut total = 0.0;
    for i in 0..d {
        let (a, b) = (base[i], x[i]);
        if a != b {
            let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
            for (t, w) in GL_NODES {
                p[i] = mid + half * t;
                let kv = k.eval(&p)?;
                let g = h.jet1(&p)?.grad;
                let theta_i: f64 = (0..d).map(|j| kv[(j, i)] * g[j]).sum();
                total += w * half * theta_i;
            }
        }
        p[i] = b;
    }
    Ok(total)
}
