//! `haantjes-kit`: runs verification suites on JSON model files.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 when the
//! model or the arguments cannot be used.

mod commands;
mod model;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use commands::{KindArg, ModeArg, Run};
use model::Model;
use output::{Context, Report};

const SEED_ENV: &str = "HAANTJES_SEED";

#[derive(Parser)]
#[command(name = "haantjes-kit", version, about = "Verify Haantjes structures and generalized Stäckel systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Sampler seed (HAANTJES_SEED takes precedence).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of sample points.
    #[arg(long)]
    samples: Option<usize>,
    /// Tolerance on normalized residuals.
    #[arg(long)]
    tol: Option<f64>,
    /// Also write the JSON report to this file.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Model file (schema 1).
    model: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Nijenhuis or Haantjes torsion of declared operators.
    Torsion {
        /// Operator name; repeat for several (default: all).
        #[arg(long = "op")]
        ops: Vec<String>,
        #[arg(long, value_enum, default_value = "haantjes")]
        kind: KindArg,
        #[command(flatten)]
        common: Common,
    },
    /// Closure, commutativity and compatibility of the operator algebra.
    Algebra {
        /// Random combinations tested per sample.
        #[arg(long, default_value_t = 8)]
        trials: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Chain equations dH_to = Kᵀ dH_from.
    Chain {
        #[arg(long = "op", requires_all = ["from", "to"])]
        op: Option<String>,
        #[arg(long, requires_all = ["op", "to"])]
        from: Option<String>,
        #[arg(long, requires_all = ["op", "from"])]
        to: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Involution of the declared Hamiltonians.
    Involution {
        #[arg(long, value_enum, default_value = "full")]
        mode: ModeArg,
        #[command(flatten)]
        common: Common,
    },
    /// Generalized Stäckel systems.
    Stackel {
        #[command(subcommand)]
        action: StackelAction,
    },
    /// Residuals of the separation relations of the Stäckel spec.
    SeResiduals {
        /// One-based generator index, overriding the model.
        #[arg(long)]
        generator: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Symmetry test of the declared separation relations.
    Symmetry {
        #[command(flatten)]
        common: Common,
    },
    /// Chart maps.
    Transform {
        #[command(subcommand)]
        action: TransformAction,
    },
    /// Implicit-midpoint flow and drift of every declared Hamiltonian.
    Flow {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum StackelAction {
    /// Build H = S⁻¹F and the chain operators.
    Build {
        #[arg(long)]
        generator: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Build, then check involution, chains and the operator algebra.
    Verify {
        #[arg(long)]
        generator: Option<usize>,
        #[arg(long, default_value_t = 8)]
        trials: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum TransformAction {
    /// Canonicity, pulled-back Hamiltonians, pushed-forward operators and
    /// block structure.
    Verify {
        #[arg(long)]
        map: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Torsion { common, .. }
            | Command::Algebra { common, .. }
            | Command::Chain { common, .. }
            | Command::Involution { common, .. }
            | Command::SeResiduals { common, .. }
            | Command::Symmetry { common }
            | Command::Flow { common }
            | Command::Stackel { action: StackelAction::Build { common, .. } | StackelAction::Verify { common, .. } }
            | Command::Transform { action: TransformAction::Verify { common, .. } } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Torsion { .. } => "torsion",
            Command::Algebra { .. } => "algebra",
            Command::Chain { .. } => "chain",
            Command::Involution { .. } => "involution",
            Command::Stackel { action: StackelAction::Build { .. } } => "stackel build",
            Command::Stackel { action: StackelAction::Verify { .. } } => "stackel verify",
            Command::SeResiduals { .. } => "se-residuals",
            Command::Symmetry { .. } => "symmetry",
            Command::Transform { .. } => "transform verify",
            Command::Flow { .. } => "flow",
        }
    }
}

fn seed_from_env() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => Ok(Some(v.trim().parse().with_context(|| format!("{SEED_ENV}={v} is not an unsigned integer"))?)),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(e).context(SEED_ENV),
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let common = cli.command.common();
    let bytes = std::fs::read(&common.model).with_context(|| format!("reading {}", common.model.display()))?;
    let text = std::str::from_utf8(&bytes).context("model file is not UTF-8")?;
    let model = Model::from_json(text).with_context(|| format!("loading {}", common.model.display()))?;
    let seed = seed_from_env()?.or(common.seed).or(model.sampling.seed).unwrap_or(haantjes_core::DEFAULT_SEED);
    let samples = common.samples.or(model.sampling.count).unwrap_or(haantjes_core::DEFAULT_SAMPLES);
    anyhow::ensure!(samples > 0, "--samples must be positive");
    if let Some(t) = common.tol {
        anyhow::ensure!(t > 0.0, "--tol must be positive");
    }
    let ctx = Context {
        command: cli.command.name().to_string(),
        model_sha256: hex::encode(Sha256::digest(&bytes)),
        seed,
        samples,
    };
    let mut report = Report::new(ctx);
    if let Some(d) = &model.description {
        report.output("description", serde_json::json!(d));
    }
    let r = Run { model: &model, seed, samples, tol: common.tol };
    match &cli.command {
        Command::Torsion { ops, kind, .. } => commands::torsion(&r, ops, *kind, &mut report)?,
        Command::Algebra { trials, .. } => commands::algebra(&r, *trials, &mut report)?,
        Command::Chain { op, from, to, .. } => {
            let single = match (op, from, to) {
                (Some(o), Some(f), Some(t)) => Some((o.clone(), f.clone(), t.clone())),
                _ => None,
            };
            commands::chain(&r, single, &mut report)?
        }
        Command::Involution { mode, .. } => commands::involution(&r, *mode, &mut report)?,
        Command::Stackel { action: StackelAction::Build { generator, .. } } => {
            commands::stackel_build(&r, *generator, &mut report)?
        }
        Command::Stackel { action: StackelAction::Verify { generator, trials, .. } } => {
            commands::stackel_verify(&r, *generator, *trials, &mut report)?
        }
        Command::SeResiduals { generator, .. } => commands::se_residuals(&r, *generator, &mut report)?,
        Command::Symmetry { .. } => commands::symmetry(&r, &mut report)?,
        Command::Transform { action: TransformAction::Verify { map, .. } } => {
            commands::transform_verify(&r, map.as_deref(), &mut report)?
        }
        Command::Flow { .. } => commands::flow(&r, &mut report)?,
    }
    let json = output::to_json_string(&report.to_value());
    print!("{json}");
    if let Some(path) = &common.json {
        std::fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
    }
    eprint!("{}", report.summary());
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
