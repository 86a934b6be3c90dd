//! Command execution for the `lipkit` binary.
//!
//! Every command produces one JSON report with the envelope
//! `{"tool_version","command","seed","inputs","result"}`, serialized with a
//! fixed field order and 17-significant-digit floats so identical inputs and
//! seeds give byte-identical reports. Exit codes: 0 = computed, verdict pass
//! (or no verdict applies); 1 = computed, verdict fail; 2 = usage or
//! configuration error (including inapplicable checks).

pub mod descriptors;

use clap::{Parser, Subcommand};
use descriptors::*;
use lipkit::corpus::probe_corpus;
use lipkit::dilation::{classify_1d, dilation_check, enumerate_cube_symmetries, Classification};
use lipkit::flatman::{
    chart_independence_check, local_isometry_check, transition_orthogonality_check, Atlas,
    ManifoldKind, ManifoldMap,
};
use lipkit::lipest::{
    global_lip, local_lip, local_lip_via_gradient, pointwise_lip, EstimateKind, EstimatorConfig,
};
use lipkit::report::Json;
use lipkit::wco::{
    dilation_violation_witness, preservation_check, wco_consistency_check, CheckedOperator,
    ConsistencyOutcome,
};
use thiserror::Error;

/// Seed fallback: `--seed`, then `LIPKIT_SEED`, then 0.
pub const SEED_ENV_VAR: &str = "LIPKIT_SEED";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Lib(#[from] lipkit::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Parser)]
#[command(
    name = "lipkit",
    version,
    about = "Lipschitz constants, weighted composition operators, and dilation recovery"
)]
pub struct Cli {
    /// RNG seed; falls back to LIPKIT_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for estimator fan-out (results are identical for any
    /// worker count).
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,

    /// Write the JSON report to this file instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<std::path::PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a global/local/pointwise Lipschitz constant.
    Estimate {
        /// One of: global, local, pointwise.
        #[arg(long)]
        kind: String,
        /// Space descriptor (JSON or @file).
        #[arg(long)]
        space: String,
        /// Function descriptor (builtin or expr:"...").
        #[arg(long)]
        func: String,
        /// Base point for local/pointwise (comma-separated; sampled if absent).
        #[arg(long)]
        at: Option<String>,
        /// Sampled pairs per stage.
        #[arg(long, default_value_t = 20000)]
        pairs: usize,
        /// Number of radius halvings in the shrinking schedule.
        #[arg(long, default_value_t = 8)]
        radii: u32,
    },
    /// Check Lipschitz-constant preservation of an operator over a corpus.
    CheckPreserve {
        /// Operator descriptor (JSON, @file, interval:a,b,c,d[:-], cube:n:i[:-]).
        #[arg(long, conflicts_with = "blackbox")]
        op: Option<String>,
        /// Black-box descriptor (shift:<point> with --space, or wco:<desc>).
        #[arg(long)]
        blackbox: Option<String>,
        /// Shared space for shift:<point> black boxes.
        #[arg(long)]
        space: Option<String>,
        #[arg(long, default_value = "global")]
        kind: String,
        /// Verdict tolerance on the max relative deviation.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value_t = 20000)]
        pairs: usize,
        #[arg(long, default_value_t = 8)]
        radii: u32,
        /// Probe corpus size.
        #[arg(long, default_value_t = 20)]
        corpus: usize,
    },
    /// Probe a black-box operator for the weighted-composition signature.
    Consistency {
        /// Black-box descriptor (shift:<point> or wco:<desc>).
        #[arg(long)]
        blackbox: String,
        /// Shared space for shift:<point>.
        #[arg(long)]
        space: Option<String>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 14)]
        corpus: usize,
    },
    /// Recover an affine dilation (alpha, A, b) from point pairs.
    Recover {
        /// Pairs file: JSON [[[x...],[y...]], ...] (or @file).
        #[arg(long)]
        pairs: String,
    },
    /// Test whether an operator's symbol is a dilation; search for a
    /// violation witness when the weight is constant.
    Dilation {
        #[arg(long)]
        op: String,
        #[arg(long, default_value_t = 2000)]
        pairs: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Classify 1-D samples as +alpha*x+c / -alpha*x+c or reject.
    Classify1d {
        /// Samples file: JSON [[x, y], ...] (or @file).
        #[arg(long)]
        samples: String,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Enumerate the affine symmetries of the unit cube.
    CubeSym {
        #[arg(long)]
        n: usize,
    },
    /// Certify a manifold map as a local isometry through induced chart maps.
    ManifoldCheck {
        /// One of: circle, torus.
        #[arg(long)]
        manifold: String,
        /// Fixture map name: translate, rotate90, shear, reflect.
        #[arg(long)]
        map: String,
        #[arg(long, default_value_t = 6)]
        points: usize,
        #[arg(long, default_value_t = 200)]
        pairs: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Check transition orthogonality and chart independence of an atlas.
    ChartCheck {
        /// One of: circle, torus.
        #[arg(long)]
        manifold: String,
        /// Function for the chart-independence comparison (defaults to a
        /// cosine wave).
        #[arg(long)]
        func: Option<String>,
        /// Base point (defaults to 0.25 per coordinate).
        #[arg(long)]
        at: Option<String>,
        #[arg(long, default_value_t = 8)]
        samples: usize,
        #[arg(long, default_value_t = 4000)]
        pairs: usize,
        /// Transition orthogonality tolerance.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Chart-independence relative tolerance.
        #[arg(long, default_value_t = 5e-2)]
        independence_tol: f64,
    },
}

pub struct Outcome {
    pub exit_code: i32,
    pub report: String,
}

fn envelope(command: &str, seed: u64, inputs: Json, result: Json) -> Json {
    Json::obj([
        ("tool_version", Json::str(env!("CARGO_PKG_VERSION"))),
        ("command", Json::str(command)),
        ("seed", Json::from(seed)),
        ("inputs", inputs),
        ("result", result),
    ])
}

fn resolve_seed(cli: &Cli) -> u64 {
    if let Some(seed) = cli.seed {
        return seed;
    }
    std::env::var(SEED_ENV_VAR)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

fn estimate_kind(raw: &str) -> Result<EstimateKind, CliError> {
    match raw {
        "global" => Ok(EstimateKind::Global),
        "local" => Ok(EstimateKind::Local),
        "pointwise" => Ok(EstimateKind::Pointwise),
        other => Err(CliError::Input(format!(
            "unknown kind `{other}` (expected global, local, or pointwise)"
        ))),
    }
}

fn manifold_kind(raw: &str) -> Result<ManifoldKind, CliError> {
    match raw {
        "circle" => Ok(ManifoldKind::Circle),
        "torus" => Ok(ManifoldKind::Torus),
        other => Err(CliError::Input(format!(
            "unknown manifold `{other}` (expected circle or torus)"
        ))),
    }
}

fn atlas_for(kind: ManifoldKind) -> Result<Atlas, CliError> {
    Ok(match kind {
        ManifoldKind::Circle => Atlas::circle(),
        ManifoldKind::Torus => Atlas::torus(2)?,
    })
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let seed = resolve_seed(cli);
    let workers = cli.workers.max(1);
    match &cli.command {
        Command::Estimate {
            kind,
            space,
            func,
            at,
            pairs,
            radii,
        } => {
            let kind = estimate_kind(kind)?;
            let space_v = parse_space(space)?;
            let f = parse_func(&space_v, func, seed)?;
            let cfg = EstimatorConfig::default()
                .with_pairs(*pairs)
                .with_radius_halvings(*radii)
                .with_seed(seed)
                .with_workers(workers);
            let (est, at_json, gradient_norm) = match kind {
                EstimateKind::Global => (global_lip(&f, &space_v, &cfg)?, Json::Null, Json::Null),
                _ => {
                    let p = match at {
                        Some(raw) => parse_point(&space_v, raw)?,
                        None => space_v
                            .sample_points(1, seed ^ 0xA7)
                            .pop()
                            .ok_or_else(|| CliError::Input("cannot sample a base point".into()))?,
                    };
                    let est = match kind {
                        EstimateKind::Local => local_lip(&f, &p, &space_v, &cfg)?,
                        _ => pointwise_lip(&f, &p, &space_v, &cfg)?,
                    };
                    let gn = if kind == EstimateKind::Local
                        && f.has_grad()
                        && space_v.is_euclidean_flat()
                    {
                        Json::Float(local_lip_via_gradient(&f, &p)?)
                    } else {
                        Json::Null
                    };
                    (est, p.to_json(), gn)
                }
            };
            // Worker count is an execution detail, deliberately not echoed:
            // reports must be byte-identical for any fan-out.
            let inputs = Json::obj([
                ("kind", Json::str(kind.as_str())),
                ("space", space_v.to_json()),
                ("func", Json::str(f.label())),
                ("at", at_json),
                ("pairs", Json::from(*pairs)),
                ("radii_halvings", Json::from(*radii as usize)),
            ]);
            let result = Json::obj([
                ("estimate", est.to_json()),
                ("gradient_norm", gradient_norm),
            ]);
            Ok(Outcome {
                exit_code: 0,
                report: envelope("estimate", seed, inputs, result).to_string(),
            })
        }

        Command::CheckPreserve {
            op,
            blackbox,
            space,
            kind,
            tol,
            pairs,
            radii,
            corpus,
        } => {
            let kind = estimate_kind(kind)?;
            let shared_space = space.as_deref().map(parse_space).transpose()?;
            let checked = match (op, blackbox) {
                (Some(op_desc), None) => {
                    CheckedOperator::Wco(parse_operator(op_desc, seed)?)
                }
                (None, Some(bb_desc)) => CheckedOperator::BlackBox(parse_blackbox(
                    bb_desc,
                    shared_space.as_ref(),
                    seed,
                )?),
                _ => {
                    return Err(CliError::Input(
                        "check-preserve needs exactly one of --op or --blackbox".into(),
                    ))
                }
            };
            let (source, op_json, paired) = match &checked {
                CheckedOperator::Wco(op) => (op.source().clone(), op.to_json(), true),
                CheckedOperator::BlackBox(op) => (
                    op.source().clone(),
                    Json::obj([("blackbox", Json::str(op.label()))]),
                    op.source().id() == op.target().id(),
                ),
            };
            let tol = tol.unwrap_or(if paired {
                lipkit::wco::EXACT_TOL
            } else {
                lipkit::wco::ESTIMATOR_TOL
            });
            let corpus_fns = probe_corpus(&source, seed ^ 0xC0, Some(*corpus))?;
            let cfg = EstimatorConfig::default()
                .with_pairs(*pairs)
                .with_radius_halvings(*radii)
                .with_seed(seed)
                .with_workers(workers);
            let report = preservation_check(&checked, &corpus_fns, kind, &cfg, tol, None)?;
            let inputs = Json::obj([
                ("operator", op_json),
                ("kind", Json::str(kind.as_str())),
                ("tolerance", Json::Float(tol)),
                ("pairs", Json::from(*pairs)),
                ("corpus_size", Json::from(corpus_fns.len())),
            ]);
            let exit_code = if report.verdict { 0 } else { 1 };
            Ok(Outcome {
                exit_code,
                report: envelope("check-preserve", seed, inputs, report.to_json()).to_string(),
            })
        }

        Command::Consistency {
            blackbox,
            space,
            tol,
            corpus,
        } => {
            let shared_space = space.as_deref().map(parse_space).transpose()?;
            let op = parse_blackbox(blackbox, shared_space.as_ref(), seed)?;
            let corpus_fns = probe_corpus(op.source(), seed ^ 0xC0, Some(*corpus))?;
            let cfg = EstimatorConfig::default().with_seed(seed);
            let outcome = wco_consistency_check(&op, &corpus_fns, &cfg, *tol)?;
            let inputs = Json::obj([
                ("blackbox", Json::str(op.label())),
                ("tolerance", Json::Float(*tol)),
                ("corpus_size", Json::from(corpus_fns.len())),
            ]);
            let exit_code = match &outcome {
                ConsistencyOutcome::Consistent => 0,
                ConsistencyOutcome::Inconsistent { .. } => 1,
                ConsistencyOutcome::Inapplicable { .. } => 2,
            };
            Ok(Outcome {
                exit_code,
                report: envelope("consistency", seed, inputs, outcome.to_json()).to_string(),
            })
        }

        Command::Recover { pairs } => {
            let data = parse_pairs_file(pairs)?;
            let dim = data
                .first()
                .map(|(x, _)| x.len())
                .ok_or_else(|| CliError::Input("pairs file is empty".into()))?;
            let recovery = lipkit::dilation::recover_affine(&data, dim)?;
            let inputs = Json::obj([
                ("pairs", Json::from(data.len())),
                ("dim", Json::from(dim)),
            ]);
            Ok(Outcome {
                exit_code: 0,
                report: envelope("recover", seed, inputs, recovery.to_json()).to_string(),
            })
        }

        Command::Dilation { op, pairs, tol } => {
            let operator = parse_operator(op, seed)?;
            let symbol = operator.symbol().clone();
            let report = dilation_check(
                &move |x| symbol.apply(x),
                operator.target(),
                operator.source(),
                *pairs,
                seed,
                *tol,
            )?;
            let cfg = EstimatorConfig::default()
                .with_pairs(*pairs)
                .with_seed(seed);
            let violation = match operator.constant_weight(seed) {
                Some(_) => match dilation_violation_witness(&operator, &cfg, *tol)? {
                    Some(w) => Json::obj([
                        ("p", w.p.to_json()),
                        ("q", w.q.to_json()),
                        ("witness", Json::str(w.witness.label())),
                        ("quotient", Json::Float(w.quotient)),
                        ("alpha", Json::Float(w.alpha)),
                    ]),
                    None => Json::Null,
                },
                None => Json::str("inapplicable: weight is not a nonzero constant"),
            };
            let violated = !matches!(violation, Json::Null);
            let inputs = Json::obj([
                ("operator", operator.to_json()),
                ("pairs", Json::from(*pairs)),
                ("tolerance", Json::Float(*tol)),
            ]);
            let result = Json::obj([
                ("dilation", report.to_json()),
                ("violation", violation),
            ]);
            let exit_code = if report.is_dilation && !violated { 0 } else { 1 };
            Ok(Outcome {
                exit_code,
                report: envelope("dilation", seed, inputs, result).to_string(),
            })
        }

        Command::Classify1d {
            samples,
            alpha,
            tol,
        } => {
            let data = parse_samples_file(samples)?;
            let classification = classify_1d(&data, *alpha, *tol)?;
            let inputs = Json::obj([
                ("samples", Json::from(data.len())),
                ("alpha", Json::Float(*alpha)),
                ("tolerance", Json::Float(*tol)),
            ]);
            let (result, exit_code) = match classification {
                Classification::Affine {
                    sign,
                    c,
                    max_residual,
                } => (
                    Json::obj([
                        ("sign", Json::Int(sign as i64)),
                        ("c", Json::Float(c)),
                        ("max_residual", Json::Float(max_residual)),
                        ("rejected", Json::Null),
                    ]),
                    0,
                ),
                Classification::Rejected(reason) => (
                    Json::obj([
                        ("sign", Json::Null),
                        ("c", Json::Null),
                        ("max_residual", Json::Null),
                        ("rejected", Json::str(reason.as_str())),
                    ]),
                    1,
                ),
            };
            Ok(Outcome {
                exit_code,
                report: envelope("classify1d", seed, inputs, result).to_string(),
            })
        }

        Command::CubeSym { n } => {
            let maps = enumerate_cube_symmetries(*n)?;
            let inputs = Json::obj([("n", Json::from(*n))]);
            let result = Json::obj([
                ("count", Json::from(maps.len())),
                ("maps", Json::arr(maps.iter().map(|m| m.to_json()))),
            ]);
            Ok(Outcome {
                exit_code: 0,
                report: envelope("cube-sym", seed, inputs, result).to_string(),
            })
        }

        Command::ManifoldCheck {
            manifold,
            map,
            points,
            pairs,
            tol,
        } => {
            let kind = manifold_kind(manifold)?;
            let atlas = atlas_for(kind)?;
            let sigma = ManifoldMap::fixture(kind, map)?;
            let report =
                local_isometry_check(&sigma, &atlas, &atlas, *points, *pairs, seed, *tol)?;
            let inputs = Json::obj([
                ("manifold", atlas.to_json()),
                ("map", Json::str(sigma.label())),
                ("points", Json::from(*points)),
                ("pairs_per_point", Json::from(*pairs)),
                ("tolerance", Json::Float(*tol)),
            ]);
            let exit_code = if report.pass { 0 } else { 1 };
            Ok(Outcome {
                exit_code,
                report: envelope("manifold-check", seed, inputs, report.to_json()).to_string(),
            })
        }

        Command::ChartCheck {
            manifold,
            func,
            at,
            samples,
            pairs,
            tol,
            independence_tol,
        } => {
            let kind = manifold_kind(manifold)?;
            let atlas = atlas_for(kind)?;
            let space = atlas.space();
            let f = match func {
                Some(desc) => parse_func(&space, desc, seed)?,
                None => {
                    let two_pi = std::f64::consts::TAU;
                    let text = match kind {
                        ManifoldKind::Circle => format!("cos({two_pi}*x0)"),
                        ManifoldKind::Torus => {
                            format!("cos({two_pi}*x0)*cos({two_pi}*x1)")
                        }
                    };
                    parse_func(&space, &format!("expr:{text}"), seed)?
                }
            };
            let p = match at {
                Some(raw) => parse_point(&space, raw)?,
                None => space.point(vec![0.25; space.dim()])?,
            };
            let transition = transition_orthogonality_check(&atlas, *samples, seed, *tol)?;
            let cfg = EstimatorConfig::default()
                .with_pairs(*pairs)
                .with_seed(seed)
                .with_workers(workers);
            let independence = chart_independence_check(&f, &p, &atlas, &cfg, *independence_tol)?;
            let inputs = Json::obj([
                ("manifold", atlas.to_json()),
                ("func", Json::str(f.label())),
                ("at", p.to_json()),
                ("samples", Json::from(*samples)),
                ("pairs", Json::from(*pairs)),
            ]);
            let pass = transition.pass && independence.pass;
            let result = Json::obj([
                ("transition", transition.to_json()),
                ("chart_independence", independence.to_json()),
            ]);
            Ok(Outcome {
                exit_code: if pass { 0 } else { 1 },
                report: envelope("chart-check", seed, inputs, result).to_string(),
            })
        }
    }
}
