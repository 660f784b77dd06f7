//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

mod common;

use std::time::{Duration, Instant};

use common::*;
use haantjes_core::algebra::{spectrum_at, semisimple_at, verify_algebra, HaantjesAlgebra};
use haantjes_core::chains::chain_verify;
use haantjes_core::phasespace::{p_involution_check, t_involution_check};
use haantjes_core::sampling::{random_polynomial, rng, Sampler};
use haantjes_core::stackel::{build_system, symmetry_condition, system_residual_check, StackelSpec};
use haantjes_core::tensor::{haantjes_torsion, nijenhuis_torsion, torsion_check, TorsionKind};
use haantjes_core::transform::flow_conserve;
use haantjes_core::transform::{
    block_check, block_commutation_check, canonicity_check, pullback, pushforward_check,
};
use haantjes_core::{Chart, Error, Expression, OperatorField, DEFAULT_TOL};
use nalgebra::DMatrix;
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Outcome { passed: true, detail: String::new() }
    }

    fn require(&mut self, ok: bool, what: impl AsRef<str>) {
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail.push_str(what.as_ref());
        if !ok {
            self.detail.push_str(" [failed]");
            self.passed = false;
        }
    }

    fn within(&mut self, label: &str, value: f64, tol: f64) {
        self.require(value <= tol, format!("{label} {value:.2e} ≤ {tol:.0e}"));
    }

    fn timed(&mut self, start: Instant, limit: Duration) {
        let t = start.elapsed();
        self.require(t < limit, format!("{:.2}s < {}s", t.as_secs_f64(), limit.as_secs()));
    }
}

type Criterion = fn() -> Result<Outcome, Error>;

fn torsion_suite() -> Result<Outcome, Error> {
    let start = Instant::now();
    let mut o = Outcome::new();
    let samples = raw_samples(11, 64);
    let c = torsion_check(&l2(), TorsionKind::Haantjes, &samples, DEFAULT_TOL, "L2")?;
    o.within("Haantjes(L2)", c.max_residual, DEFAULT_TOL);
    let l3 = l3();
    let mut exact = 0.0f64;
    for x in &samples {
        exact = exact.max(nijenhuis_torsion(&l3, x)?.max_abs());
    }
    o.require(exact == 0.0, format!("Nijenhuis(L3) = {exact}"));
    o.timed(start, Duration::from_secs(5));
    Ok(o)
}

fn spectral_suite() -> Result<Outcome, Error> {
    let mut o = Outcome::new();
    let (l2, l3) = (l2(), l3());
    let (mut dev, mut ok_struct, mut ok_ss) = (0.0f64, true, true);
    for x in raw_samples(12, 16) {
        let lam = 1.0 / (4.0 * (x[3] + x[5]));
        let sp = spectrum_at(&l2, &x, None)?;
        let mut found = Vec::new();
        for e in &sp.eigenvalues {
            dev = dev.max(e.im.abs());
            let target = if (e.re - lam).abs() < (e.re).abs() { lam } else { 0.0 };
            dev = dev.max((e.re - target).abs());
            found.push((target, e.algebraic, e.riesz));
        }
        found.sort_by(|a, b| b.1.cmp(&a.1));
        ok_struct &= found == [(lam, 4, 2), (0.0, 2, 1)] && sp.minimal_polynomial_degree() == 3;
        ok_ss &= !semisimple_at(&l2, &x)? && semisimple_at(&l3, &x)?;
    }
    o.within("eigenvalue deviation", dev, 1e-8);
    o.require(ok_struct, "multiplicities (4,2), Riesz indices (2,1), minimal polynomial degree 3");
    o.require(ok_ss, "L2 not semisimple, L3 semisimple");
    Ok(o)
}

fn chain_suite() -> Result<Outcome, Error> {
    let mut o = Outcome::new();
    let h = raw_h();
    let s = raw_samples(13, 64);
    o.within("dH2 = L2ᵀdH1", chain_verify(&l2(), &h[0], &h[1], &s, DEFAULT_TOL)?.max_residual, DEFAULT_TOL);
    o.within("dH3 = L3ᵀdH1", chain_verify(&l3(), &h[0], &h[2], &s, DEFAULT_TOL)?.max_residual, DEFAULT_TOL);
    let f = four_h();
    let s = four_samples(14, 64);
    o.within("dH1 = K1ᵀdH2", chain_verify(&four_k1(), &f[1], &f[0], &s, DEFAULT_TOL)?.max_residual, DEFAULT_TOL);
    o.within("dH3 = K3ᵀdH2", chain_verify(&four_k3(), &f[1], &f[2], &s, DEFAULT_TOL)?.max_residual, DEFAULT_TOL);
    Ok(o)
}

fn transform_suite() -> Result<Outcome, Error> {
    let mut o = Outcome::new();
    let map = dh_map();
    let canon = canonicity_check(&map, &raw_samples(15, 64), DEFAULT_TOL)?;
    o.require(canon.passed(), format!("canonicity {:.2e}", canon.max_residual()));

    let ys = dh_samples(16, 64);
    let want = dh_h();
    let mut worst = 0.0f64;
    for (h, w) in raw_h().iter().zip(&want) {
        let pb = pullback(h, &map)?;
        for y in &ys {
            let (a, b) = (pb.eval(y)?, w.eval(y)?);
            worst = worst.max((a - b).abs() / (1.0 + b.abs()));
        }
    }
    o.within("pulled-back Hamiltonians", worst, 1e-10);
    let y0 = map.apply(&[0.0, 0.0, 0.0, 1.0, 0.0, 1.0])?;
    let vals: Vec<f64> = want.iter().map(|w| w.eval(&y0)).collect::<Result<_, _>>()?;
    o.require(vals == [8.0, 2.0, 0.0], format!("values at (0,0,0,1,0,1) = {vals:?}"));

    let p2 = pushforward_check(&l2(), &map, &dh_l2(), &ys, DEFAULT_TOL)?;
    let p3 = pushforward_check(&l3(), &map, &dh_l3(), &ys, DEFAULT_TOL)?;
    o.within("block matrix L2", p2.max_residual, DEFAULT_TOL);
    o.within("block matrix L3", p3.max_residual, DEFAULT_TOL);
    let mut blocks = block_check(&l2(), &map, &ys, DEFAULT_TOL)?.merge(block_check(&l3(), &map, &ys, DEFAULT_TOL)?);
    blocks.push(block_commutation_check(&l2(), &l3(), &map, &ys, DEFAULT_TOL)?);
    o.within("block relations", blocks.max_residual(), DEFAULT_TOL);
    Ok(o)
}

fn involution_suite() -> Result<Outcome, Error> {
    let mut o = Outcome::new();
    let p = p_involution_check(&dh_h(), &dh_samples(17, 64), DEFAULT_TOL)?;
    o.require(p.passed, format!("P-involution (2,1) {:.2e}", p.max_residual));
    let t = t_involution_check(&raw_h(), &raw_samples(18, 64), DEFAULT_TOL)?;
    o.require(!t.passed, format!("raw T-involution rejected {:.2e}", t.max_residual));
    let t4 = t_involution_check(&four_h(), &four_samples(19, 64), DEFAULT_TOL)?;
    o.require(t4.passed, format!("four-DOF T-involution {:.2e}", t4.max_residual));
    Ok(o)
}

/// Random spec on blocks `sizes`: row `a` of `S` is a degree ≤ 2 polynomial
/// in the positions of block `a`, `f_a` in the positions and momenta.
fn random_spec<R: Rng>(r: &mut R, sizes: &[usize]) -> StackelSpec {
    let n: usize = sizes.iter().sum();
    let chart = Chart::new(n, sizes).unwrap();
    let m = sizes.len();
    let mut s = Vec::new();
    let mut f = Vec::new();
    for a in 0..m {
        let q: Vec<usize> = chart.block_positions(a).unwrap().collect();
        let qp: Vec<usize> = q.iter().copied().chain(q.iter().map(|i| n + i)).collect();
        for _ in 0..m {
            s.push(random_polynomial(r, &chart, &q, 2));
        }
        f.push(random_polynomial(r, &chart, &qp, 2));
    }
    StackelSpec::new(&chart, s, f).unwrap()
}

/// Samples with `|det S|` and every generator cofactor bounded away from 0.
fn guarded_samples(spec: &StackelSpec, g: usize, seed: u64) -> Option<Vec<Vec<f64>>> {
    let m = spec.m();
    let adj = spec.adjugate();
    let mut sampler = Sampler::new(seed, 64).guard(spec.det());
    for i in 0..m {
        sampler = sampler.guard(adj[g * m + i].clone());
    }
    sampler.sample(spec.chart()).ok()
}

fn stackel_suite() -> Result<Outcome, Error> {
    let start = Instant::now();
    let mut o = Outcome::new();
    let mut r = rng(20);
    let (mut built, mut redraws) = (0, 0);
    let (mut inv, mut chain, mut alg, mut shf) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut failures = 0;
    while built < 50 {
        let sizes: &[usize] = if r.random_bool(0.5) { &[2, 1] } else { &[2, 1, 1] };
        let spec = random_spec(&mut r, sizes);
        let g = r.random_range(0..spec.m());
        let sys = match build_system(&spec, g) {
            Ok(s) => s,
            Err(Error::Singular(_) | Error::GeneratorSlot { .. }) => {
                redraws += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let Some(samples) = guarded_samples(&spec, g, 1000 + built as u64) else {
            redraws += 1;
            continue;
        };
        built += 1;
        let mut report = haantjes_core::VerificationReport::new();
        let t = t_involution_check(&sys.hamiltonians, &samples, DEFAULT_TOL)?;
        inv = inv.max(t.max_residual);
        report.push(t);
        for a in (0..spec.m()).filter(|&a| a != g) {
            let c = chain_verify(&sys.operators[a], &sys.hamiltonians[g], &sys.hamiltonians[a], &samples, DEFAULT_TOL)?;
            chain = chain.max(c.max_residual);
            report.push(c);
        }
        let va = verify_algebra(&HaantjesAlgebra::new(sys.operators.clone())?, &samples, 4, DEFAULT_TOL, built as u64)?;
        alg = alg.max(va.max_residual());
        let c = system_residual_check(&spec, &sys, &samples, 1e-10)?;
        shf = shf.max(c.max_residual);
        report.push(c);
        if !(report.passed() && va.passed()) {
            failures += 1;
        }
    }
    o.require(failures == 0, format!("{built} specs ({redraws} redrawn), {failures} failing"));
    o.within("T-involution", inv, DEFAULT_TOL);
    o.within("chains", chain, DEFAULT_TOL);
    o.within("algebra", alg, DEFAULT_TOL);
    o.within("S·H − F", shf, 1e-10);
    o.timed(start, Duration::from_secs(60));
    Ok(o)
}

/// Nijenhuis torsion from central differences of the entries.
fn fd_nijenhuis(a: &OperatorField, x: &[f64], h: f64) -> Result<Vec<f64>, Error> {
    let d = a.dim();
    let v = a.eval(x)?;
    let mut da = Vec::with_capacity(d);
    for l in 0..d {
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[l] += h;
        xm[l] -= h;
        da.push((a.eval(&xp)? - a.eval(&xm)?) / (2.0 * h));
    }
    let mut t = vec![0.0; d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let mut s = 0.0;
                for l in 0..d {
                    s += v[(l, j)] * da[l][(i, k)] - v[(l, k)] * da[l][(i, j)]
                        - v[(i, l)] * (da[j][(l, k)] - da[k][(l, j)]);
                }
                t[(i * d + j) * d + k] = s;
            }
        }
    }
    Ok(t)
}

/// Haantjes torsion contracted directly from Nijenhuis components.
fn haantjes_of(v: &DMatrix<f64>, t: &[f64]) -> Vec<f64> {
    let d = v.nrows();
    let at = |i: usize, j: usize, k: usize| t[(i * d + j) * d + k];
    let v2 = v * v;
    let mut h = vec![0.0; d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let mut s = 0.0;
                for m in 0..d {
                    s += v2[(i, m)] * at(m, j, k);
                    for l in 0..d {
                        s += at(i, l, m) * v[(l, j)] * v[(m, k)];
                        s -= v[(i, l)] * (at(l, m, k) * v[(m, j)] + at(l, j, m) * v[(m, k)]);
                    }
                }
                h[(i * d + j) * d + k] = s;
            }
        }
    }
    h
}

fn rel_diff(ad: &[f64], fd: &[f64]) -> f64 {
    let scale = fd.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    ad.iter().zip(fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
}

fn oracle_suite() -> Result<Outcome, Error> {
    let mut o = Outcome::new();
    let mut r = rng(21);
    let chart = Chart::canonical(2)?;
    let vars: Vec<usize> = (0..4).collect();
    let (mut nij, mut haa) = (0.0f64, 0.0f64);
    for trial in 0..20 {
        let entries: Vec<Expression> = (0..16).map(|_| random_polynomial(&mut r, &chart, &vars, 3)).collect();
        let a = OperatorField::new(&chart, entries)?;
        for x in Sampler::new(300 + trial, 4).sample(&chart)? {
            let fd = fd_nijenhuis(&a, &x, 1e-5)?;
            let ad = nijenhuis_torsion(&a, &x)?;
            nij = nij.max(rel_diff(ad.as_slice(), &fd));
            let fdh = haantjes_of(&a.eval(&x)?, &fd);
            haa = haa.max(rel_diff(haantjes_torsion(&a, &x)?.as_slice(), &fdh));
        }
    }
    o.within("Nijenhuis AD vs FD", nij, 1e-5);
    o.within("Haantjes AD vs FD", haa, 1e-5);

    let mut worst = 0.0f64;
    let mut specs = 0;
    while specs < 16 {
        let spec = random_spec(&mut r, &[2, 1, 1]);
        let Ok(sys) = build_system(&spec, 0) else { continue };
        let Ok(points) = Sampler::new(400 + specs, 16).guard(spec.det()).sample(spec.chart()) else { continue };
        specs += 1;
        for x in &points {
            let s = spec.s_matrix(x)?;
            let f: Vec<f64> = (0..3).map(|a| spec.f(a).eval(x)).collect::<Result<_, _>>()?;
            let e = |i: usize, j: usize| s[(i - 1, j - 1)];
            let det = s.determinant();
            let closed = [
                ((e(2, 2) * e(3, 3) - e(2, 3) * e(3, 2)) * f[0]
                    + (e(1, 3) * e(3, 2) - e(1, 2) * e(3, 3)) * f[1]
                    + (e(1, 2) * e(2, 3) - e(1, 3) * e(2, 2)) * f[2])
                    / det,
                ((e(2, 3) * e(3, 1) - e(2, 1) * e(3, 3)) * f[0]
                    + (e(1, 1) * e(3, 3) - e(1, 3) * e(3, 1)) * f[1]
                    + (e(1, 3) * e(2, 1) - e(1, 1) * e(2, 3)) * f[2])
                    / det,
                ((e(2, 1) * e(3, 2) - e(2, 2) * e(3, 1)) * f[0]
                    + (e(1, 2) * e(3, 1) - e(1, 1) * e(3, 2)) * f[1]
                    + (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1)) * f[2])
                    / det,
            ];
            for (h, c) in sys.hamiltonians.iter().zip(closed) {
                worst = worst.max((h.eval(x)? - c).abs() / (1.0 + c.abs()));
            }
        }
    }
    o.within("closed-form Hamiltonians", worst, 1e-10);
    Ok(o)
}

fn dynamics_suite() -> Result<Outcome, Error> {
    let start = Instant::now();
    let mut o = Outcome::new();
    let h = raw_h();
    let x0 = [0.3, -0.2, 0.1, 0.5, -0.4, 0.2];
    let r = flow_conserve(&h[0], &h, &x0, 10.0, 1e-3)?;
    o.within("drift H1", r.drifts[0], 1e-8);
    o.within("drift H2", r.drifts[1], 1e-6);
    o.within("drift H3", r.drifts[2], 1e-6);
    o.require(r.steps == 10_000, format!("{} steps", r.steps));
    o.timed(start, Duration::from_secs(10));
    Ok(o)
}

fn symmetry_suite() -> Result<Outcome, Error> {
    let mut o = Outcome::new();
    let c = raw_chart();
    let sep = parse_all(&SEPARATED_PHI, &c);
    let pts = Sampler::new(22, 64).guard(parse("p1", &c)).guard(parse("p2*q2", &c)).sample(&c)?;
    let mut worst = 0.0f64;
    for x in &pts {
        worst = worst.max(symmetry_condition(&sep, x)?);
    }
    o.require(worst == 0.0, format!("separated fixture {worst}"));

    let d = dh_chart();
    let phi = parse_all(&DH_PHI, &d);
    let pts = Sampler::new(23, 64).guard(parse("P3", &d)).guard(parse("P1 + P2", &d)).sample(&d)?;
    let mut worst = 0.0f64;
    for y in &pts {
        worst = worst.max(symmetry_condition(&phi, y)?);
    }
    o.within("block-adapted fixture", worst, 1e-9);

    let coupled = parse_all(&COUPLED_PHI, &c);
    let mut least = f64::INFINITY;
    for x in raw_samples(24, 64) {
        least = least.min(symmetry_condition(&coupled, &x)?);
    }
    o.require(least > 1e-3, format!("coupled fixture min {least:.2e} > 1e-3"));
    Ok(o)
}

fn main() {
    let criteria: [(&str, Criterion); 9] = [
        ("torsion", torsion_suite),
        ("spectral", spectral_suite),
        ("chains", chain_suite),
        ("transform", transform_suite),
        ("involution", involution_suite),
        ("stackel property", stackel_suite),
        ("oracles", oracle_suite),
        ("dynamics", dynamics_suite),
        ("symmetry", symmetry_suite),
    ];
    let mut all = true;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let (passed, detail) = match run() {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        all &= passed;
        println!("criterion {} ({name}): {} {detail}", k + 1, if passed { "PASS" } else { "FAIL" });
    }
    if !all {
        std::process::exit(1);
    }
}
