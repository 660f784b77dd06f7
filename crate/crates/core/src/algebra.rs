//! Haantjes algebras: closure checks and pointwise spectral analysis.
//!
//! The spectral part works on the value matrix of an operator at a point.
//! Eigenvalues are clustered, since a defective eigenvalue of multiplicity
//! `k` splits numerically by about `eps^{1/k}`; each cluster is represented
//! by its mean, which is accurate to rounding. The Riesz index of a cluster
//! is the smallest `k` with `rank (A − λI)^k = rank (A − λI)^{k+1}`, and its
//! generalized eigenspace is the kernel of `(A − λI)^ρ`. Complex conjugate
//! pairs are handled through the real factor `A² − 2 Re λ A + |λ|² I`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::DMatrix;
use rand::Rng;

use crate::expr::Expression;
use crate::linalg;
use crate::math;
use crate::phasespace::{symplectic_matrix, Chart};
use crate::report::{Check, ResidualTracker, VerificationReport};
use crate::sampling::{random_polynomial, rng};
use crate::tensor::{torsion_residual_from_jet, OperatorField, TorsionKind};
use crate::{Error, Result};

/// Relative tolerance for eigenvalue clustering.
pub const CLUSTER_RTOL: f64 = 1e-7;
/// Relative tolerance for subspace intersections.
const INTERSECT_RTOL: f64 = 1e-6;

/// A commuting family of operators on one chart.
#[derive(Debug, Clone)]
pub struct HaantjesAlgebra {
    chart: Chart,
    basis: Vec<OperatorField>,
    names: Vec<String>,
}

impl HaantjesAlgebra {
    /// Basis operators named `K1, K2, …`.
    pub fn new(basis: Vec<OperatorField>) -> Result<Self> {
        let names = (1..=basis.len()).map(|i| format!("K{i}")).collect();
        Self::with_names(basis, names)
    }

    pub fn with_names(basis: Vec<OperatorField>, names: Vec<String>) -> Result<Self> {
        let first = basis.first().ok_or_else(|| Error::InvalidArgument("empty algebra basis".into()))?;
        let chart = first.chart().clone();
        if basis.iter().any(|b| b.chart() != &chart) {
            return Err(Error::ChartMismatch);
        }
        if names.len() != basis.len() {
            return Err(Error::DimensionMismatch { expected: basis.len(), found: names.len() });
        }
        Ok(HaantjesAlgebra { chart, basis, names })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn basis(&self) -> &[OperatorField] {
        &self.basis
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }
}

/// One cluster of eigenvalues. For a complex pair `value` holds the member
/// with positive imaginary part; `algebraic` counts that member only.
#[derive(Debug, Clone)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
    pub algebraic: usize,
    pub geometric: usize,
    pub riesz: usize,
    /// Orthonormal real basis (columns) of the generalized eigenspace, of the
    /// conjugate pair's real invariant subspace when complex.
    pub basis: DMatrix<f64>,
}

impl Eigenvalue {
    pub fn is_real(&self) -> bool {
        self.im == 0.0
    }

    /// Real dimension of the generalized eigenspace.
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }
}

/// Pointwise spectrum of an operator.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<Eigenvalue>,
    pub cluster_tol: f64,
    pub warnings: Vec<String>,
}

impl Spectrum {
    /// Degree of the minimal polynomial, `Σ ρ_i` over distinct eigenvalues
    /// (a conjugate pair contributes twice).
    pub fn minimal_polynomial_degree(&self) -> usize {
        self.eigenvalues.iter().map(|e| if e.is_real() { e.riesz } else { 2 * e.riesz }).sum()
    }

    pub fn semisimple(&self) -> bool {
        self.eigenvalues.iter().all(|e| e.riesz == 1)
    }

    /// True when every generalized eigenspace has even real dimension.
    pub fn even_ranks(&self) -> bool {
        self.eigenvalues.iter().all(|e| e.rank() % 2 == 0)
    }

    /// Real eigenvalue closest to `value`, if any.
    pub fn find(&self, value: f64) -> Option<&Eigenvalue> {
        self.eigenvalues
            .iter()
            .filter(|e| e.is_real())
            .min_by(|a, b| math::abs(a.re - value).total_cmp(&math::abs(b.re - value)))
    }
}

fn spectral_radius(vals: &[(f64, f64)]) -> f64 {
    vals.iter().fold(0.0, |m, (re, im)| math::max(m, libm::hypot(*re, *im)))
}

/// Rank with a threshold relative to the largest singular value; matrices
/// whose largest singular value is below `floor` count as zero.
fn rank_rel(m: &DMatrix<f64>, floor: f64) -> usize {
    let s = linalg::singular_values(m);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax <= floor {
        return 0;
    }
    s.iter().filter(|&&v| v > linalg::RANK_RTOL * smax).count()
}

/// Spectrum of a numeric matrix. `cluster_tol` defaults to
/// `1e-7·(1 + spectral radius)`.
pub fn spectrum_of_matrix(a: &DMatrix<f64>, cluster_tol: Option<f64>) -> Spectrum {
    let d = a.nrows();
    let raw: Vec<(f64, f64)> = a.clone().complex_eigenvalues().iter().map(|c| (c.re, c.im)).collect();
    let radius = spectral_radius(&raw);
    let tol = cluster_tol.unwrap_or(CLUSTER_RTOL * (1.0 + radius));
    let mut warnings = Vec::new();

    // single-linkage clustering in the complex plane
    let mut clusters: Vec<Vec<(f64, f64)>> = Vec::new();
    for v in raw {
        let near: Vec<usize> = clusters
            .iter()
            .enumerate()
            .filter(|(_, c)| c.iter().any(|w| libm::hypot(v.0 - w.0, v.1 - w.1) <= tol))
            .map(|(i, _)| i)
            .collect();
        let mut merged = vec![v];
        for &i in near.iter().rev() {
            merged.extend(clusters.swap_remove(i));
        }
        clusters.push(merged);
    }
    let mut means: Vec<(f64, f64, usize)> = clusters
        .iter()
        .map(|c| {
            let k = c.len() as f64;
            let re = c.iter().map(|v| v.0).sum::<f64>() / k;
            let im = c.iter().map(|v| v.1).sum::<f64>() / k;
            (re, if math::abs(im) <= tol { 0.0 } else { im }, c.len())
        })
        .collect();
    means.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    for i in 0..means.len() {
        for j in (i + 1)..means.len() {
            let gap = libm::hypot(means[i].0 - means[j].0, means[i].1 - means[j].1);
            if gap <= 10.0 * tol {
                warnings.push(format!(
                    "eigenvalue clusters {:.6e} and {:.6e} are within 10x the clustering tolerance",
                    means[i].0, means[j].0
                ));
            }
        }
    }

    let floor = 1e-12 * (1.0 + radius);
    let id = DMatrix::<f64>::identity(d, d);
    let mut eigenvalues = Vec::new();
    for (re, im, count) in means {
        if im < 0.0 {
            continue;
        }
        let (b, kernel_dim, scale) = if im == 0.0 {
            (a - &id * re, count, floor)
        } else {
            (a * a - a * (2.0 * re) + &id * (re * re + im * im), 2 * count, floor * (1.0 + radius))
        };
        let geometric = d - rank_rel(&b, scale);
        let geometric = if im == 0.0 { geometric } else { geometric / 2 };
        let mut riesz = 1;
        let mut pk = b.clone();
        let mut rk = rank_rel(&pk, scale);
        while riesz < d {
            let next = &pk * &b;
            let rn = rank_rel(&next, scale * math::powi(1.0 + radius, riesz as i32));
            if rn == rk {
                break;
            }
            pk = next;
            rk = rn;
            riesz += 1;
        }
        if d - rk != kernel_dim {
            warnings.push(format!(
                "eigenvalue {re:.6e}: kernel dimension {} of (A - λI)^{riesz} differs from multiplicity {kernel_dim}",
                d - rk
            ));
        }
        let basis = linalg::smallest_right_singular(&pk, kernel_dim);
        eigenvalues.push(Eigenvalue { re, im, algebraic: count, geometric, riesz, basis });
    }
    Spectrum { eigenvalues, cluster_tol: tol, warnings }
}

/// Spectrum of the operator value at `x`.
pub fn spectrum_at(a: &OperatorField, x: &[f64], cluster_tol: Option<f64>) -> Result<Spectrum> {
    Ok(spectrum_of_matrix(&a.eval(x)?, cluster_tol))
}

/// True iff every Riesz index at `x` is 1.
pub fn semisimple_at(a: &OperatorField, x: &[f64]) -> Result<bool> {
    Ok(spectrum_at(a, x, None)?.semisimple())
}

/// A nontrivial intersection of generalized eigenspaces, one per basis
/// operator.
#[derive(Debug, Clone)]
pub struct JointSpace {
    /// `(re, im)` of the eigenvalue of each basis operator on this space.
    pub eigenvalues: Vec<(f64, f64)>,
    /// Orthonormal basis (columns).
    pub basis: DMatrix<f64>,
}

impl JointSpace {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }
}

/// All nontrivial intersections `∩_α D^{(α)}_{i_α}` at `x`, ordered by
/// descending rank, then by eigenvalue tuple.
pub fn joint_distributions(alg: &HaantjesAlgebra, x: &[f64]) -> Result<Vec<JointSpace>> {
    let d = alg.chart.dim();
    let mut current = vec![JointSpace { eigenvalues: Vec::new(), basis: DMatrix::identity(d, d) }];
    for op in &alg.basis {
        let spec = spectrum_at(op, x, None)?;
        let mut next = Vec::new();
        for u in &current {
            for e in &spec.eigenvalues {
                let w = linalg::intersect(&u.basis, &e.basis, INTERSECT_RTOL);
                if w.ncols() > 0 {
                    let mut ev = u.eigenvalues.clone();
                    ev.push((e.re, e.im));
                    next.push(JointSpace { eigenvalues: ev, basis: w });
                }
            }
        }
        current = next;
    }
    current.sort_by(|a, b| {
        b.rank().cmp(&a.rank()).then_with(|| {
            a.eigenvalues
                .iter()
                .zip(&b.eigenvalues)
                .map(|(x, y)| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
    });
    Ok(current)
}

/// Checks that the joint distributions decompose the tangent space into
/// even-rank pieces with the same rank profile at every sample.
pub fn decomposition_check(alg: &HaantjesAlgebra, samples: &[Vec<f64>]) -> Result<Check> {
    let d = alg.chart.dim();
    let mut tr = ResidualTracker::new();
    let mut profile: Option<Vec<usize>> = None;
    for x in samples {
        let spaces = joint_distributions(alg, x)?;
        let ranks: Vec<usize> = spaces.iter().map(JointSpace::rank).collect();
        let total: usize = ranks.iter().sum();
        let mut bad = 0.0;
        if total != d {
            tr.note(format!("ranks {ranks:?} do not sum to {d}"));
            bad = 1.0;
        }
        if ranks.iter().any(|r| r % 2 != 0) {
            tr.note(format!("odd rank in {ranks:?}"));
            bad = 1.0;
        }
        match &profile {
            None => profile = Some(ranks),
            Some(p) if *p != ranks => {
                tr.note(format!("rank profile {ranks:?} differs from {p:?}"));
                bad = 1.0;
            }
            _ => {}
        }
        tr.record(bad, x);
    }
    let mut c = tr.finish("algebra.decomposition", "T M = ⊕_a V_a, rank V_a even", 0.5, samples.len());
    if let Some(p) = profile {
        c.notes.push(format!("ranks {p:?}"));
    }
    Ok(c)
}

type Jet = (DMatrix<f64>, Vec<DMatrix<f64>>);

fn product_jet(a: &Jet, b: &Jet) -> Jet {
    let v = &a.0 * &b.0;
    let d = a.1.iter().zip(&b.1).map(|(da, db)| da * &b.0 + &a.0 * db).collect();
    (v, d)
}

fn combination_jet(f: &crate::Jet1, a: &Jet, g: &crate::Jet1, b: &Jet) -> Jet {
    let v = &a.0 * f.value + &b.0 * g.value;
    let d = (0..a.1.len())
        .map(|l| &a.1[l] * f.value + &a.0 * f.grad[l] + &b.1[l] * g.value + &b.0 * g.grad[l])
        .collect();
    (v, d)
}

/// Closure checks of an algebra on samples: Haantjes torsion of the basis,
/// of `trials` random combinations `f K_i + g K_j` (degree ≤ 2 polynomial
/// coefficients), and of pairwise products; commutators; compatibility
/// with the symplectic form.
pub fn verify_algebra(
    alg: &HaantjesAlgebra,
    samples: &[Vec<f64>],
    trials: usize,
    tol: f64,
    seed: u64,
) -> Result<VerificationReport> {
    let chart = &alg.chart;
    let m = alg.rank();
    let vars: Vec<usize> = (0..chart.dim()).collect();
    let mut r = rng(seed ^ 0x5eed_a16e);
    let combos: Vec<(usize, usize, Expression, Expression)> = (0..trials)
        .map(|_| {
            let i = r.random_range(0..m);
            let j = if m > 1 { (i + r.random_range(1..m)) % m } else { i };
            (i, j, random_polynomial(&mut r, chart, &vars, 2), random_polynomial(&mut r, chart, &vars, 2))
        })
        .collect();
    let om = symplectic_matrix(chart.n());

    let mut basis_t = ResidualTracker::new();
    let mut combo_t = ResidualTracker::new();
    let mut prod_t = ResidualTracker::new();
    let mut comm_t = ResidualTracker::new();
    let mut compat_t = ResidualTracker::new();
    for x in samples {
        let jets: Vec<Jet> = alg.basis.iter().map(|b| b.jet(x)).collect::<Result<_>>()?;
        let mut worst = 0.0;
        for (k, j) in jets.iter().enumerate() {
            let v = torsion_residual_from_jet(TorsionKind::Haantjes, &j.0, &j.1);
            if v > tol {
                basis_t.note(format!("{} fails", alg.names[k]));
            }
            worst = math::max(worst, v);
        }
        basis_t.record(worst, x);

        let mut worst = 0.0;
        for (i, j, f, g) in &combos {
            let cj = combination_jet(&f.jet1(x)?, &jets[*i], &g.jet1(x)?, &jets[*j]);
            worst = math::max(worst, torsion_residual_from_jet(TorsionKind::Haantjes, &cj.0, &cj.1));
        }
        combo_t.record(worst, x);

        let (mut wp, mut wc) = (0.0, 0.0);
        for i in 0..m {
            for j in i..m {
                let pj = product_jet(&jets[i], &jets[j]);
                wp = math::max(wp, torsion_residual_from_jet(TorsionKind::Haantjes, &pj.0, &pj.1));
                if i < j {
                    let (a, b) = (&jets[i].0, &jets[j].0);
                    let c = a * b - b * a;
                    let scale = 1.0 + linalg::max_abs(&(a.abs() * b.abs()));
                    wc = math::max(wc, linalg::max_abs(&c) / scale);
                }
            }
        }
        prod_t.record(wp, x);
        comm_t.record(wc, x);

        let mut worst = 0.0;
        for j in &jets {
            let a = &j.0;
            let res = linalg::max_abs(&(&om * a - a.transpose() * &om));
            worst = math::max(worst, res / (1.0 + linalg::max_abs(a)));
        }
        compat_t.record(worst, x);
    }
    let n = samples.len();
    let mut report = VerificationReport::new();
    report.push(basis_t.finish("algebra.torsion", "H_K = 0 for every basis operator K", tol, n));
    report.push(
        combo_t
            .finish("algebra.module", "H_{fK_i + gK_j} = 0 for polynomial f, g", tol, n)
            .with_note(format!("{trials} random combinations")),
    );
    report.push(prod_t.finish("algebra.ring", "H_{K_i K_j} = 0", tol, n));
    report.push(comm_t.finish("algebra.abelian", "[K_i, K_j] = 0", tol, n));
    report.push(compat_t.finish("algebra.compatibility", "Ω K = Kᵀ Ω", tol, n));
    Ok(report)
}
