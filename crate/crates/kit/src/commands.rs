//! One function per subcommand; each fills a [`Report`].

use anyhow::{anyhow, bail, ensure, Context as _, Result};
use haantjes_core::algebra::{decomposition_check, joint_distributions, spectrum_at, verify_algebra, HaantjesAlgebra};
use haantjes_core::chains::{chain_closedness_check, chain_verify};
use haantjes_core::phasespace::{involution_check, t_involution_check, InvolutionMode};
use haantjes_core::report::Check;
use haantjes_core::stackel::{
    build_system, separation_residuals, symmetry_condition, system_residual_check, validate_spec, StackelSpec,
    StackelSystem,
};
use haantjes_core::tensor::{torsion_check, TorsionKind};
use haantjes_core::transform::{
    block_check, block_commutation_check, canonicity_check, flow_conserve, pullback, pushforward_check,
};
use haantjes_core::{Expression, OperatorField};
use serde_json::{json, Map, Value};

use crate::model::{sampler_with, Model};
use crate::output::Report;

pub struct Run<'a> {
    pub model: &'a Model,
    pub seed: u64,
    pub samples: usize,
    pub tol: Option<f64>,
}

impl Run<'_> {
    fn tol(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    fn points(&self) -> Result<Vec<Vec<f64>>> {
        self.model.sampler(self.seed, self.samples).sample(self.model.chart()).context("sampling the model chart")
    }

    fn operator(&self, name: &str) -> Result<&OperatorField> {
        self.model.operators.get(name).ok_or_else(|| anyhow!("unknown operator `{name}`"))
    }

    fn hamiltonian(&self, name: &str) -> Result<&Expression> {
        self.model.hamiltonians.get(name).ok_or_else(|| anyhow!("unknown Hamiltonian `{name}`"))
    }
}

/// Check built from a pointwise residual function.
fn residual_check(
    name: &str,
    anchor: &str,
    tol: f64,
    samples: &[Vec<f64>],
    mut f: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<Check> {
    let (mut max, mut worst, mut nan) = (0.0f64, None, false);
    for x in samples {
        let r = f(x)?;
        if r.is_nan() {
            nan = true;
            worst = Some(x.clone());
            break;
        }
        if worst.is_none() || r > max {
            max = max.max(r);
            worst = Some(x.clone());
        }
    }
    Ok(Check {
        name: name.into(),
        anchor: anchor.into(),
        passed: !nan && max <= tol,
        max_residual: if nan { f64::NAN } else { max },
        tolerance: tol,
        worst_point: worst,
        samples: samples.len(),
        notes: Vec::new(),
    })
}

fn renamed(mut c: Check, name: String) -> Check {
    c.name = name;
    c
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum KindArg {
    Nijenhuis,
    Haantjes,
    Both,
}

pub fn torsion(run: &Run, ops: &[String], kind: KindArg, report: &mut Report) -> Result<()> {
    let names: Vec<String> = if ops.is_empty() { run.model.operators.keys().cloned().collect() } else { ops.to_vec() };
    ensure!(!names.is_empty(), "the model declares no operators");
    let kinds: &[TorsionKind] = match kind {
        KindArg::Nijenhuis => &[TorsionKind::Nijenhuis],
        KindArg::Haantjes => &[TorsionKind::Haantjes],
        KindArg::Both => &[TorsionKind::Nijenhuis, TorsionKind::Haantjes],
    };
    let samples = run.points()?;
    for name in &names {
        let op = run.operator(name)?;
        for &k in kinds {
            report.push(torsion_check(op, k, &samples, run.tol(haantjes_core::DEFAULT_TOL), name)?);
        }
    }
    Ok(())
}

fn spectrum_value(op: &OperatorField, x: &[f64]) -> Result<Value> {
    let sp = spectrum_at(op, x, None)?;
    let eig: Vec<Value> = sp
        .eigenvalues
        .iter()
        .map(|e| {
            json!({
                "re": e.re, "im": e.im, "algebraic": e.algebraic,
                "geometric": e.geometric, "riesz": e.riesz, "rank": e.rank(),
            })
        })
        .collect();
    Ok(json!({
        "eigenvalues": eig,
        "minimal_polynomial_degree": sp.minimal_polynomial_degree(),
        "semisimple": sp.semisimple(),
        "warnings": sp.warnings,
    }))
}

fn algebra_of(run: &Run) -> Result<HaantjesAlgebra> {
    ensure!(!run.model.algebra.is_empty(), "the model declares no operators");
    let basis = run.model.algebra.iter().map(|n| run.operator(n).cloned()).collect::<Result<_>>()?;
    Ok(HaantjesAlgebra::with_names(basis, run.model.algebra.clone())?)
}

pub fn algebra(run: &Run, trials: usize, report: &mut Report) -> Result<()> {
    let alg = algebra_of(run)?;
    let samples = run.points()?;
    report.extend(verify_algebra(&alg, &samples, trials, run.tol(haantjes_core::DEFAULT_TOL), run.seed)?);
    report.push(decomposition_check(&alg, &samples)?);
    let x = &samples[0];
    let mut spectra = Map::new();
    for (name, op) in alg.names().iter().zip(alg.basis()) {
        spectra.insert(name.clone(), spectrum_value(op, x)?);
    }
    let joint: Vec<Value> = joint_distributions(&alg, x)?
        .iter()
        .map(|j| json!({ "rank": j.rank(), "eigenvalues": j.eigenvalues.iter().map(|(r, i)| json!([r, i])).collect::<Vec<_>>() }))
        .collect();
    report.output("point", json!(x));
    report.output("spectra", Value::Object(spectra));
    report.output("joint_distributions", json!(joint));
    Ok(())
}

pub fn chain(run: &Run, single: Option<(String, String, String)>, report: &mut Report) -> Result<()> {
    let list: Vec<(String, String, String)> = match single {
        Some(t) => vec![t],
        None => run.model.chains.iter().map(|c| (c.operator.clone(), c.from.clone(), c.to.clone())).collect(),
    };
    ensure!(!list.is_empty(), "no chains declared; pass --op, --from and --to");
    let samples = run.points()?;
    let tol = run.tol(haantjes_core::DEFAULT_TOL);
    for (op, from, to) in &list {
        let (k, h, t) = (run.operator(op)?, run.hamiltonian(from)?, run.hamiltonian(to)?);
        report.push(renamed(chain_verify(k, h, t, &samples, tol)?, format!("chain.equation.{op}.{from}.{to}")));
        report.push(renamed(chain_closedness_check(k, h, &samples, tol)?, format!("chain.closedness.{op}.{from}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Full,
    Total,
    Partial,
}

pub fn involution(run: &Run, mode: ModeArg, report: &mut Report) -> Result<()> {
    let hs: Vec<Expression> = run.model.hamiltonians.values().cloned().collect();
    ensure!(hs.len() >= 2, "involution needs at least two Hamiltonians");
    let mode = match mode {
        ModeArg::Full => InvolutionMode::Full,
        ModeArg::Total => InvolutionMode::Total,
        ModeArg::Partial => InvolutionMode::Partial,
    };
    let samples = run.points()?;
    report.push(involution_check(&hs, &samples, run.tol(haantjes_core::DEFAULT_TOL), mode)?);
    Ok(())
}

fn stackel_spec<'a>(run: &'a Run, generator: Option<usize>) -> Result<(&'a StackelSpec, usize)> {
    let (spec, g) = run.model.stackel.as_ref().ok_or_else(|| anyhow!("the model has no `stackel` section"))?;
    let g = match generator {
        None => *g,
        Some(k) => {
            ensure!((1..=spec.m()).contains(&k), "--generator must be in 1..={}", spec.m());
            k - 1
        }
    };
    Ok((spec, g))
}

/// Samples with `det S` and the generator's cofactors kept away from zero.
fn stackel_points(run: &Run, spec: &StackelSpec, g: usize) -> Result<Vec<Vec<f64>>> {
    let m = spec.m();
    let adj = spec.adjugate();
    let mut s = run.model.sampler(run.seed, run.samples).guard(spec.det());
    for i in 0..m {
        if !adj[g * m + i].is_zero() {
            s = s.guard(adj[g * m + i].clone());
        }
    }
    s.sample(spec.chart()).context("sampling away from det S = 0")
}

fn system_value(sys: &StackelSystem, spec: &StackelSpec) -> Value {
    let mut hs = Map::new();
    for (a, h) in sys.hamiltonians.iter().enumerate() {
        hs.insert(format!("H{}", a + 1), json!(h.to_string()));
    }
    let chart = spec.chart();
    let mut ks = Map::new();
    for (a, k) in sys.operators.iter().enumerate() {
        let slots: Vec<String> = (0..spec.m())
            .map(|b| {
                let pos = chart.block_positions(b).expect("block exists").start;
                k.entry(pos, pos).to_string()
            })
            .collect();
        ks.insert(format!("K{}", a + 1), json!(slots));
    }
    json!({
        "generator": sys.generator + 1,
        "det": sys.det.to_string(),
        "hamiltonians": hs,
        "operators": ks,
    })
}

/// [`build_system`] with one-based indices in the diagnostics.
fn build_one_based(spec: &StackelSpec, g: usize) -> Result<StackelSystem> {
    build_system(spec, g).map_err(|e| match e {
        haantjes_core::Error::GeneratorSlot { generator, slot } => anyhow!(
            "generator H{} has a structurally zero cofactor for block {}; choose another generator",
            generator + 1,
            slot + 1
        ),
        e => e.into(),
    })
}

fn build(run: &Run, generator: Option<usize>, report: &mut Report) -> Result<(StackelSystem, Vec<Vec<f64>>)> {
    let (spec, g) = stackel_spec(run, generator)?;
    let sys = build_one_based(spec, g)?;
    let samples = stackel_points(run, spec, g)?;
    report.extend(validate_spec(spec, &samples)?);
    report.push(system_residual_check(spec, &sys, &samples, run.tol(1e-10))?);
    report.output("system", system_value(&sys, spec));
    Ok((sys, samples))
}

pub fn stackel_build(run: &Run, generator: Option<usize>, report: &mut Report) -> Result<()> {
    build(run, generator, report).map(|_| ())
}

pub fn stackel_verify(run: &Run, generator: Option<usize>, trials: usize, report: &mut Report) -> Result<()> {
    let (sys, samples) = build(run, generator, report)?;
    let tol = run.tol(haantjes_core::DEFAULT_TOL);
    let g = sys.generator;
    report.push(t_involution_check(&sys.hamiltonians, &samples, tol)?);
    for a in (0..sys.hamiltonians.len()).filter(|&a| a != g) {
        let c = chain_verify(&sys.operators[a], &sys.hamiltonians[g], &sys.hamiltonians[a], &samples, tol)?;
        report.push(renamed(c, format!("chain.equation.K{}", a + 1)));
    }
    let names = (1..=sys.operators.len()).map(|a| format!("K{a}")).collect();
    let alg = HaantjesAlgebra::with_names(sys.operators.clone(), names)?;
    report.extend(verify_algebra(&alg, &samples, trials, tol, run.seed)?);
    // declared Hamiltonians, in order, must agree with the built ones
    let declared: Vec<(&String, &Expression)> = run.model.hamiltonians.iter().collect();
    if declared.len() == sys.hamiltonians.len() {
        for ((name, want), got) in declared.into_iter().zip(&sys.hamiltonians) {
            let c = residual_check(&format!("stackel.declared.{name}"), "built H_a = declared H_a", tol, &samples, |x| {
                let (a, b) = (got.eval(x)?, want.eval(x)?);
                Ok((a - b).abs() / (1.0 + b.abs()))
            })?;
            report.push(c);
        }
    }
    Ok(())
}

pub fn se_residuals(run: &Run, generator: Option<usize>, report: &mut Report) -> Result<()> {
    let (spec, g) = stackel_spec(run, generator)?;
    let sys = build_one_based(spec, g)?;
    let sep = run.model.separation.as_ref();
    let levels = sep.and_then(|s| s.levels.clone());
    let points = match sep.and_then(|s| s.points.clone()) {
        Some(p) => p,
        None => {
            ensure!(levels.is_none(), "separation levels need explicit `points`");
            stackel_points(run, spec, g)?
        }
    };
    if let Some(h) = &levels {
        ensure!(h.len() == spec.m(), "separation: {} levels, expected {}", h.len(), spec.m());
    }
    let level_at = |x: &[f64]| -> Result<Vec<f64>> {
        match &levels {
            Some(h) => Ok(h.clone()),
            None => Ok(sys.hamiltonians.iter().map(|e| e.eval(x)).collect::<haantjes_core::Result<_>>()?),
        }
    };
    let mut rows = Vec::new();
    let c = residual_check(
        "stackel.separation",
        "f_a − Σ_b S_ab h_b = 0",
        run.tol(haantjes_core::DEFAULT_TOL),
        &points,
        |x| {
            let h = level_at(x)?;
            let r = separation_residuals(spec, &h, x)?;
            let mut worst = 0.0f64;
            for (a, ra) in r.iter().enumerate() {
                let mut scale = spec.f(a).eval(x)?.abs();
                for (b, hb) in h.iter().enumerate() {
                    scale = scale.max((spec.s(a, b).eval(x)? * hb).abs());
                }
                worst = worst.max(ra.abs() / (1.0 + scale));
            }
            rows.push(json!({ "point": x, "levels": h, "residuals": r }));
            Ok(worst)
        },
    )?;
    report.push(c);
    if sep.and_then(|s| s.points.as_ref()).is_some() {
        report.output("residuals", json!(rows));
    }
    Ok(())
}

pub fn symmetry(run: &Run, report: &mut Report) -> Result<()> {
    let phi = run
        .model
        .separation
        .as_ref()
        .and_then(|s| s.relations.as_ref())
        .ok_or_else(|| anyhow!("the model has no `separation.relations`"))?;
    let samples = run.points()?;
    let c = residual_check(
        "separation.symmetry",
        "[∂φ/∂p]⁻¹[∂φ/∂q] symmetric",
        run.tol(haantjes_core::DEFAULT_TOL),
        &samples,
        |x| symmetry_condition(phi, x).with_context(|| format!("at {x:?}")),
    )?;
    report.push(c);
    Ok(())
}

pub fn transform_verify(run: &Run, map: Option<&str>, report: &mut Report) -> Result<()> {
    let maps = &run.model.maps;
    let (name, tm) = match map {
        Some(n) => (n, maps.get(n).ok_or_else(|| anyhow!("unknown map `{n}`"))?),
        None => match maps.len() {
            1 => maps.get_index(0).map(|(k, v)| (k.as_str(), v)).expect("one map"),
            0 => bail!("the model declares no maps"),
            _ => bail!("the model declares several maps; pick one with --map"),
        },
    };
    let tol = run.tol(haantjes_core::DEFAULT_TOL);
    let xs = run.points()?;
    report.extend(canonicity_check(&tm.map, &xs, tol)?);
    let ys = sampler_with(run.seed, run.samples, &run.model.sampling, &tm.guards)
        .sample(&tm.scope.chart)
        .with_context(|| format!("sampling the target chart of `{name}`"))?;
    for (h, want) in &tm.hamiltonians {
        let pb = pullback(run.hamiltonian(h)?, &tm.map)?;
        let c = residual_check(&format!("transform.hamiltonian.{h}"), "H ∘ inverse = expected", tol, &ys, |y| {
            let (a, b) = (pb.eval(y)?, want.eval(y)?);
            Ok((a - b).abs() / (1.0 + b.abs()))
        })?;
        report.push(c);
    }
    for (o, want) in &tm.operators {
        let c = pushforward_check(run.operator(o)?, &tm.map, want, &ys, tol)?;
        report.push(renamed(c, format!("transform.pushforward.{o}")));
    }
    let ops: Vec<(&String, &OperatorField)> =
        tm.block_operators.iter().map(|n| run.operator(n).map(|op| (n, op))).collect::<Result<_>>()?;
    for (n, op) in &ops {
        for c in block_check(op, &tm.map, &ys, tol)?.checks {
            let nm = format!("{}.{n}", c.name);
            report.push(renamed(c, nm));
        }
    }
    for i in 0..ops.len() {
        for j in (i + 1)..ops.len() {
            let c = block_commutation_check(ops[i].1, ops[j].1, &tm.map, &ys, tol)?;
            report.push(renamed(c, format!("block.commutation.{}.{}", ops[i].0, ops[j].0)));
        }
    }
    let mut printed = Map::new();
    for (h, e) in run.model.hamiltonians.iter() {
        printed.insert(h.clone(), json!(pullback(e, &tm.map)?.to_string()));
    }
    report.output("map", json!(name));
    report.output("pulled_back", Value::Object(printed));
    Ok(())
}

pub fn flow(run: &Run, report: &mut Report) -> Result<()> {
    let f = run.model.flow.as_ref().ok_or_else(|| anyhow!("the model has no `flow` section"))?;
    let h = run.hamiltonian(&f.hamiltonian)?;
    let names: Vec<&String> = run.model.hamiltonians.keys().collect();
    let invariants: Vec<Expression> = run.model.hamiltonians.values().cloned().collect();
    let r = flow_conserve(h, &invariants, &f.x0, f.t, f.dt)?;
    for (name, drift) in names.iter().zip(&r.drifts) {
        let tol = f.tolerances.get(*name).copied().unwrap_or_else(|| run.tol(1e-8));
        report.push(Check {
            name: format!("flow.drift.{name}"),
            anchor: "max_t |I(x(t)) − I(x₀)|".into(),
            passed: *drift <= tol,
            max_residual: *drift,
            tolerance: tol,
            worst_point: None,
            samples: r.steps,
            notes: Vec::new(),
        });
    }
    report.output("steps", json!(r.steps));
    report.output("final_point", json!(r.final_point));
    Ok(())
}
