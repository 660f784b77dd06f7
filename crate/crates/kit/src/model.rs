//! Schema-1 model files: JSON with expressions as strings.

use anyhow::{anyhow, bail, ensure, Context, Result};
use haantjes_core::expr::Node;
use haantjes_core::sampling::{Sampler, GUARD_MIN};
use haantjes_core::stackel::StackelSpec;
use haantjes_core::transform::ChartMap;
use haantjes_core::{Chart, Expression, OperatorField};
use indexmap::IndexMap;
use serde::Deserialize;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartDecl {
    pub n: usize,
    #[serde(default)]
    pub blocks: Option<Vec<usize>>,
    #[serde(default)]
    pub names: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorDecl {
    pub dim: usize,
    #[serde(default)]
    pub entries: Option<Vec<String>>,
    #[serde(default)]
    pub diagonal: Option<Vec<String>>,
    #[serde(default)]
    pub scale: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum GuardDecl {
    Plain(String),
    WithMin { expr: String, min: f64 },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingDecl {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default, rename = "box")]
    pub bounds: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainDecl {
    pub operator: String,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackelDecl {
    #[serde(rename = "S")]
    pub s: Vec<Vec<String>>,
    pub f: Vec<String>,
    /// One-based index of the generating Hamiltonian.
    pub generator: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparationDecl {
    #[serde(default)]
    pub relations: Option<Vec<String>>,
    #[serde(default)]
    pub levels: Option<Vec<f64>>,
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDecl {
    pub target: ChartDecl,
    #[serde(default)]
    pub definitions: IndexMap<String, String>,
    pub forward: Vec<String>,
    pub inverse: Vec<String>,
    #[serde(default)]
    pub guards: Vec<GuardDecl>,
    /// Expected Hamiltonians on the target chart, keyed like the source ones.
    #[serde(default)]
    pub hamiltonians: IndexMap<String, String>,
    /// Expected operators on the target chart, keyed like the source ones.
    #[serde(default)]
    pub operators: IndexMap<String, OperatorDecl>,
    /// Operators whose pushforward must be block diagonal (default: the
    /// algebra).
    #[serde(default)]
    pub block_operators: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowDecl {
    pub hamiltonian: String,
    pub x0: Vec<f64>,
    pub t: f64,
    pub dt: f64,
    #[serde(default)]
    pub tolerances: IndexMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema: u32,
    #[serde(default)]
    pub description: Option<String>,
    pub chart: ChartDecl,
    #[serde(default)]
    pub definitions: IndexMap<String, String>,
    #[serde(default)]
    pub hamiltonians: IndexMap<String, String>,
    #[serde(default)]
    pub operators: IndexMap<String, OperatorDecl>,
    #[serde(default)]
    pub algebra: Option<Vec<String>>,
    #[serde(default)]
    pub chains: Vec<ChainDecl>,
    #[serde(default)]
    pub guards: Vec<GuardDecl>,
    #[serde(default)]
    pub sampling: SamplingDecl,
    #[serde(default)]
    pub stackel: Option<StackelDecl>,
    #[serde(default)]
    pub separation: Option<SeparationDecl>,
    #[serde(default)]
    pub maps: IndexMap<String, MapDecl>,
    #[serde(default)]
    pub flow: Option<FlowDecl>,
}

/// Named expressions on one chart; later definitions may use earlier ones.
pub struct Scope {
    pub chart: Chart,
    defs: Vec<(String, Node)>,
}

impl Scope {
    fn new(decl: &ChartDecl, definitions: &IndexMap<String, String>) -> Result<Self> {
        let chart = build_chart(decl)?;
        let mut scope = Scope { chart, defs: Vec::new() };
        for (name, text) in definitions {
            ensure!(scope.chart.resolve(name).is_none(), "definition `{name}` shadows a chart variable");
            let e = scope.parse(text).with_context(|| format!("definition `{name}`"))?;
            scope.defs.push((name.clone(), e.into_node()));
        }
        Ok(scope)
    }

    pub fn parse(&self, text: &str) -> Result<Expression> {
        Expression::parse_with(text, &self.chart, |name| {
            self.defs.iter().find(|(n, _)| n == name).map(|(_, node)| node.clone())
        })
        .map_err(|e| anyhow!("`{text}`: {e}"))
    }

    fn operator(&self, name: &str, decl: &OperatorDecl) -> Result<OperatorField> {
        let d = self.chart.dim();
        ensure!(decl.dim == d, "operator `{name}`: dim {} does not match chart dimension {d}", decl.dim);
        let op = match (&decl.entries, &decl.diagonal) {
            (Some(entries), None) => {
                ensure!(entries.len() == d * d, "operator `{name}`: {} entries, expected {}", entries.len(), d * d);
                let parsed = entries.iter().map(|t| self.parse(t)).collect::<Result<_>>()?;
                OperatorField::new(&self.chart, parsed)?
            }
            (None, Some(diag)) => {
                ensure!(diag.len() == d, "operator `{name}`: {} diagonal entries, expected {d}", diag.len());
                let parsed = diag.iter().map(|t| self.parse(t)).collect::<Result<_>>()?;
                OperatorField::diagonal(&self.chart, parsed)?
            }
            _ => bail!("operator `{name}` needs exactly one of `entries` and `diagonal`"),
        };
        Ok(match &decl.scale {
            Some(s) => op.scaled(&self.parse(s).with_context(|| format!("operator `{name}` scale"))?),
            None => op,
        })
    }

    fn guards(&self, decls: &[GuardDecl]) -> Result<Vec<(Expression, f64)>> {
        decls
            .iter()
            .map(|g| match g {
                GuardDecl::Plain(t) => Ok((self.parse(t)?, GUARD_MIN)),
                GuardDecl::WithMin { expr, min } => {
                    ensure!(*min > 0.0, "guard `{expr}`: min must be positive");
                    Ok((self.parse(expr)?, *min))
                }
            })
            .collect()
    }
}

fn build_chart(decl: &ChartDecl) -> Result<Chart> {
    let blocks = decl.blocks.clone().unwrap_or_else(|| vec![decl.n]);
    let chart = match &decl.names {
        Some(names) => {
            ensure!(names.len() == 2 * decl.n, "chart: {} names, expected {}", names.len(), 2 * decl.n);
            Chart::with_names(names.clone(), &blocks)?
        }
        None => Chart::new(decl.n, &blocks)?,
    };
    Ok(chart)
}

pub struct TargetMap {
    pub map: ChartMap,
    pub scope: Scope,
    pub guards: Vec<(Expression, f64)>,
    pub hamiltonians: IndexMap<String, Expression>,
    pub operators: IndexMap<String, OperatorField>,
    pub block_operators: Vec<String>,
}

pub struct Flow {
    pub hamiltonian: String,
    pub x0: Vec<f64>,
    pub t: f64,
    pub dt: f64,
    pub tolerances: IndexMap<String, f64>,
}

pub struct Separation {
    pub relations: Option<Vec<Expression>>,
    pub levels: Option<Vec<f64>>,
    pub points: Option<Vec<Vec<f64>>>,
}

/// A validated model with every expression parsed.
pub struct Model {
    pub description: Option<String>,
    pub scope: Scope,
    pub hamiltonians: IndexMap<String, Expression>,
    pub operators: IndexMap<String, OperatorField>,
    pub algebra: Vec<String>,
    pub chains: Vec<ChainDecl>,
    pub guards: Vec<(Expression, f64)>,
    pub sampling: SamplingDecl,
    pub stackel: Option<(StackelSpec, usize)>,
    pub separation: Option<Separation>,
    pub maps: IndexMap<String, TargetMap>,
    pub flow: Option<Flow>,
}

impl Model {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).context("model file")?;
        ensure!(file.schema == SCHEMA, "unsupported schema {} (this tool reads schema {SCHEMA})", file.schema);
        let scope = Scope::new(&file.chart, &file.definitions)?;

        let mut hamiltonians = IndexMap::new();
        for (name, text) in &file.hamiltonians {
            let e = scope.parse(text).with_context(|| format!("Hamiltonian `{name}`"))?;
            hamiltonians.insert(name.clone(), e);
        }
        let mut operators = IndexMap::new();
        for (name, decl) in &file.operators {
            operators.insert(name.clone(), scope.operator(name, decl)?);
        }
        let algebra = file.algebra.clone().unwrap_or_else(|| operators.keys().cloned().collect());
        for name in &algebra {
            ensure!(operators.contains_key(name), "algebra: unknown operator `{name}`");
        }
        for c in &file.chains {
            ensure!(operators.contains_key(&c.operator), "chain: unknown operator `{}`", c.operator);
            for h in [&c.from, &c.to] {
                ensure!(hamiltonians.contains_key(h), "chain: unknown Hamiltonian `{h}`");
            }
        }
        let guards = scope.guards(&file.guards)?;
        if let Some([lo, hi]) = file.sampling.bounds {
            ensure!(lo < hi, "sampling box must satisfy lo < hi");
        }

        let stackel = match &file.stackel {
            None => None,
            Some(d) => {
                let m = d.s.len();
                ensure!(d.s.iter().all(|r| r.len() == m), "stackel: S must be square");
                ensure!(d.f.len() == m, "stackel: f has {} entries, expected {m}", d.f.len());
                ensure!((1..=m).contains(&d.generator), "stackel: generator must be in 1..={m}");
                let s = d.s.iter().flatten().map(|t| scope.parse(t)).collect::<Result<_>>()?;
                let f = d.f.iter().map(|t| scope.parse(t)).collect::<Result<_>>()?;
                let spec = StackelSpec::new(&scope.chart, s, f)?;
                spec.check_locality()?;
                Some((spec, d.generator - 1))
            }
        };

        let separation = match &file.separation {
            None => None,
            Some(d) => {
                let relations = match &d.relations {
                    None => None,
                    Some(r) => {
                        ensure!(r.len() == scope.chart.n(), "separation: {} relations, expected {}", r.len(), scope.chart.n());
                        Some(r.iter().map(|t| scope.parse(t)).collect::<Result<_>>()?)
                    }
                };
                if let Some(points) = &d.points {
                    for p in points {
                        ensure!(p.len() == scope.chart.dim(), "separation: point of length {}", p.len());
                    }
                }
                Some(Separation { relations, levels: d.levels.clone(), points: d.points.clone() })
            }
        };

        let mut maps = IndexMap::new();
        for (name, d) in &file.maps {
            let target = Scope::new(&d.target, &d.definitions).with_context(|| format!("map `{name}`"))?;
            let forward = d.forward.iter().map(|t| scope.parse(t)).collect::<Result<_>>()?;
            let inverse = d.inverse.iter().map(|t| target.parse(t)).collect::<Result<_>>()?;
            let map = ChartMap::new(forward, inverse).with_context(|| format!("map `{name}`"))?;
            let mut hs = IndexMap::new();
            for (h, text) in &d.hamiltonians {
                ensure!(hamiltonians.contains_key(h), "map `{name}`: unknown Hamiltonian `{h}`");
                hs.insert(h.clone(), target.parse(text)?);
            }
            let mut ops = IndexMap::new();
            for (o, decl) in &d.operators {
                ensure!(operators.contains_key(o), "map `{name}`: unknown operator `{o}`");
                ops.insert(o.clone(), target.operator(o, decl)?);
            }
            let block_operators = d.block_operators.clone().unwrap_or_else(|| algebra.clone());
            for o in &block_operators {
                ensure!(operators.contains_key(o), "map `{name}`: unknown operator `{o}`");
            }
            let guards = target.guards(&d.guards)?;
            maps.insert(
                name.clone(),
                TargetMap { map, scope: target, guards, hamiltonians: hs, operators: ops, block_operators },
            );
        }

        let flow = match &file.flow {
            None => None,
            Some(d) => {
                ensure!(hamiltonians.contains_key(&d.hamiltonian), "flow: unknown Hamiltonian `{}`", d.hamiltonian);
                ensure!(d.x0.len() == scope.chart.dim(), "flow: x0 has length {}", d.x0.len());
                for k in d.tolerances.keys() {
                    ensure!(hamiltonians.contains_key(k), "flow: tolerance for unknown Hamiltonian `{k}`");
                }
                Some(Flow {
                    hamiltonian: d.hamiltonian.clone(),
                    x0: d.x0.clone(),
                    t: d.t,
                    dt: d.dt,
                    tolerances: d.tolerances.clone(),
                })
            }
        };

        Ok(Model {
            description: file.description,
            scope,
            hamiltonians,
            operators,
            algebra,
            chains: file.chains,
            guards,
            sampling: file.sampling,
            stackel,
            separation,
            maps,
            flow,
        })
    }

    pub fn chart(&self) -> &Chart {
        &self.scope.chart
    }

    pub fn sampler(&self, seed: u64, count: usize) -> Sampler {
        sampler_with(seed, count, &self.sampling, &self.guards)
    }
}

pub fn sampler_with(seed: u64, count: usize, sampling: &SamplingDecl, guards: &[(Expression, f64)]) -> Sampler {
    let mut s = Sampler::new(seed, count);
    if let Some([lo, hi]) = sampling.bounds {
        s = s.with_box(lo, hi);
    }
    for (g, min) in guards {
        s = s.guard_min(g.clone(), *min);
    }
    s
}
