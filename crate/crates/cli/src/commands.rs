use std::fmt;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use trilinear::bench::{mse_vs_crb as run_mse_vs_crb, typical_rank as run_typical_rank};
use trilinear::constraints::Constraint;
use trilinear::cpd::{cpd_als, random_model, FitOptions, Init, MissingMask};
use trilinear::crb::{build_fim, crb_pinv, noise_rescale, NoiseModel};
use trilinear::io::fixtures::{fixture, fixture_model, NAMES};
use trilinear::io::{read_tensor, sigma_for_snr, synth_model, write_tensor, Encoding, ModelDoc};
use trilinear::tensor::{kruskal_reconstruct, TensorLike};
use trilinear::tucker::{tucker_als, TuckerOptions};
use trilinear::uniqueness::{
    check_generic, check_model, generic_rank, multilinear_rank, rank_bounds, summarize, RANK_RTOL,
};
use trilinear::{Error, KruskalModel, SparseTensor, Tensor};

use crate::report::RunReport;
use crate::{
    CheckArgs, CrbArgs, DecomposeArgs, EncodingArg, InitArg, MseVsCrbArgs, NoiseArg, StorageArg, SynthArgs, TuckerArgs,
    TypicalRankArgs,
};

const FIXTURE_PREFIX: &str = "fixture:";

/// Why a command stopped. Usage problems exit with 2, numerical ones with 1.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Numerical(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Shape(_)
            | Error::ModeOutOfRange { .. }
            | Error::InvalidArgument(_)
            | Error::Parse { .. }
            | Error::Io(_) => Failure::Usage(msg),
            _ => Failure::Numerical(msg),
        }
    }
}

type Outcome = Result<RunReport, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn options<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).unwrap_or(Value::Null)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// Loads a tensor from a file path or a `fixture:<name>` reference.
fn load_tensor(spec: &str, warnings: &mut Vec<String>) -> Result<Tensor, Failure> {
    if let Some(name) = spec.strip_prefix(FIXTURE_PREFIX) {
        return fixture(name).map_err(|_| usage(format!("unknown fixture '{name}' (known: {})", NAMES.join(", "))));
    }
    let outcome = read_tensor(spec).map_err(|e| match e {
        Error::Io(io) => usage(format!("{spec}: {io}")),
        other => Failure::from(other),
    })?;
    warnings.extend(outcome.warnings);
    Ok(outcome.tensor)
}

/// Reads a model from a `decompose` report or a bare model document.
fn load_model(path: &Path) -> Result<KruskalModel, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let doc = value.pointer("/result/model").cloned().unwrap_or(value);
    let doc: ModelDoc =
        serde_json::from_value(doc).map_err(|e| usage(format!("{}: not a model document: {e}", path.display())))?;
    Ok(KruskalModel::try_from(&doc)?)
}

fn parse_constraints(specs: &[String], ndim: usize) -> Result<Vec<Constraint>, Failure> {
    let parsed = specs.iter().map(|s| s.parse::<Constraint>()).collect::<Result<Vec<_>, _>>()?;
    match parsed.len() {
        0 => Ok(vec![]),
        1 => Ok(vec![parsed[0].clone(); ndim]),
        n if n == ndim => Ok(parsed),
        n => Err(usage(format!("{n} constraints for a {ndim}-way tensor; give one or one per mode"))),
    }
}

pub fn decompose(args: &DecomposeArgs) -> Outcome {
    let start = Instant::now();
    let mut report = RunReport::new("decompose", Some(args.seed), options(args));
    let t = load_tensor(&args.tensor, &mut report.warnings)?;
    let missing = match &args.missing_mask {
        Some(path) => {
            let mask = load_tensor(&path.to_string_lossy(), &mut report.warnings)?.to_dense();
            if mask.shape() != t.shape() {
                return Err(usage(format!("mask shape {:?} differs from tensor shape {:?}", mask.shape(), t.shape())));
            }
            Some(MissingMask::from_indicator(&mask))
        }
        None => None,
    };
    let opts = FitOptions {
        rank: args.rank,
        max_sweeps: args.max_sweeps,
        tol: args.tol,
        init: match args.init {
            InitArg::Random => Init::Random,
            InitArg::Gevd => Init::Gevd,
        },
        seed: args.seed,
        restarts: args.restarts,
        constraints: parse_constraints(&args.constraints, t.ndim())?,
        missing,
    };
    let (model, fit) = cpd_als(&t, &opts)?;
    let loss = fit.final_loss();
    if !loss.is_finite() {
        return Err(Failure::Numerical(format!("fit ended with non-finite loss {loss}")));
    }
    let norm = t.norm_sq().sqrt();
    let residual = loss.max(0.0).sqrt();
    report.warnings.extend(fit.warnings.iter().cloned());
    report.result = json!({
        "shape": t.shape(),
        "tensor_norm": norm,
        "residual": residual,
        "relative_residual": residual / norm.max(f64::MIN_POSITIVE),
        "model": ModelDoc::from(&model),
        "fit": fit,
    });
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

pub fn tucker(args: &TuckerArgs) -> Outcome {
    let start = Instant::now();
    let mut report = RunReport::new("tucker", None, options(args));
    let t = load_tensor(&args.tensor, &mut report.warnings)?.to_dense();
    let opts = TuckerOptions { max_sweeps: args.max_sweeps, tol: args.tol };
    let (model, fit) = tucker_als(&t, &args.ranks, &opts)?;
    let norm = t.norm();
    let mut result = json!({
        "shape": t.shape(),
        "ranks": model.ranks(),
        "tensor_norm": norm,
        "core_norm": model.core.norm(),
        "relative_residual": fit.residual.max(0.0).sqrt() / norm.max(f64::MIN_POSITIVE),
        "fit": fit,
    });
    if args.full {
        result["core"] = json!({ "shape": model.core.shape(), "data": model.core.data() });
        result["bases"] = json!(model.bases.iter().map(|u| u.as_slice().to_vec()).collect::<Vec<_>>());
    }
    report.result = result;
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

pub fn check(args: &CheckArgs) -> Outcome {
    let start = Instant::now();
    let mut report = RunReport::new("check", Some(args.seed), options(args));
    report.result = if let Some(path) = &args.model {
        model_verdicts(&load_model(path)?)?
    } else if let Some(spec) = &args.tensor {
        let t = load_tensor(spec, &mut report.warnings)?.to_dense();
        let ml = multilinear_rank(&t, RANK_RTOL)?;
        json!({
            "shape": t.shape(),
            "multilinear_rank": ml,
            "rank_bounds": rank_bounds(t.shape(), &ml),
        })
    } else if let Some(rank) = args.rank {
        if args.dims.is_empty() || args.dims.contains(&0) || rank == 0 {
            return Err(usage("--dims and --rank must be positive"));
        }
        if args.generic {
            let v = check_generic(&args.dims, rank);
            json!({
                "dims": args.dims,
                "rank": rank,
                "generic_rank": generic_rank(&args.dims),
                "verdict": v.verdict,
                "verdicts": [v],
            })
        } else {
            let model = random_model(&args.dims, rank, args.seed, 0);
            model_verdicts(&model)?
        }
    } else {
        return Err(usage("check needs --model, --tensor, or --dims with --rank"));
    };
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

fn model_verdicts(model: &KruskalModel) -> Result<Value, Failure> {
    let verdicts = check_model(model)?;
    Ok(json!({
        "dims": model.shape(),
        "rank": model.rank(),
        "verdict": summarize(&verdicts),
        "verdicts": verdicts,
    }))
}

pub fn crb(args: &CrbArgs) -> Outcome {
    let start = Instant::now();
    let mut report = RunReport::new("crb", Some(args.seed), options(args));
    let model = match (&args.model, args.rank) {
        (Some(path), _) => load_model(path)?,
        (None, Some(rank)) if !args.dims.is_empty() => synth_model(&args.dims, rank, args.seed, 0.0)?.0,
        _ => return Err(usage("crb needs --model, or --dims with --rank")),
    };
    let noise = match args.noise {
        NoiseArg::Gaussian => NoiseModel::Gaussian { sigma2: args.scale * args.scale },
        NoiseArg::Laplacian => NoiseModel::Laplacian { b: args.scale },
        NoiseArg::Cauchy => NoiseModel::Cauchy { gamma: args.scale },
    };
    let fim = build_fim(&model, 1.0)?;
    let (unit, _) = crb_pinv(&fim, false)?;
    let bound = noise_rescale(&unit, noise)?;
    if !bound.total_trace.is_finite() {
        return Err(Failure::Numerical("bound is not finite".into()));
    }
    report.result = json!({
        "dims": model.shape(),
        "rank": model.rank(),
        "parameters": fim.num_params(),
        "noise": noise,
        "bound": bound,
    });
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

pub fn synth(args: &SynthArgs) -> Outcome {
    let start = Instant::now();
    let mut report = RunReport::new("synth", Some(args.seed), options(args));
    let (tensor, model, sigma) = if let Some(name) = &args.fixture {
        let t = load_tensor(&format!("{FIXTURE_PREFIX}{name}"), &mut report.warnings)?;
        (t, fixture_model(name), 0.0)
    } else {
        let rank = args.rank.ok_or_else(|| usage("synth needs --fixture, or --dims with --rank"))?;
        if args.dims.is_empty() {
            return Err(usage("synth needs --dims with --rank"));
        }
        let sigma = match (args.sigma, args.snr_db) {
            (Some(s), _) => s,
            (None, Some(db)) => {
                let (m, _) = synth_model(&args.dims, rank, args.seed, 0.0)?;
                let entries = args.dims.iter().product();
                sigma_for_snr(kruskal_reconstruct(&m).norm_sq(), entries, db)
            }
            (None, None) => 0.0,
        };
        let (m, t) = synth_model(&args.dims, rank, args.seed, sigma)?;
        (Tensor::Dense(t), Some(m), sigma)
    };
    let tensor = match (args.storage, tensor) {
        (StorageArg::Coo, Tensor::Dense(d)) => Tensor::Sparse(SparseTensor::from_dense(&d)),
        (StorageArg::Dense, Tensor::Sparse(s)) => Tensor::Dense(s.to_dense()),
        (_, t) => t,
    };
    if let Some(path) = &args.write {
        let enc = match args.encoding {
            EncodingArg::Text => Encoding::Text,
            EncodingArg::Binary => Encoding::Binary,
        };
        write_tensor(path, &tensor, enc)?;
    }
    report.result = json!({
        "shape": tensor.shape(),
        "tensor_norm": tensor.norm_sq().sqrt(),
        "sigma": sigma,
        "written": args.write.as_ref().map(|p| p.display().to_string()),
        "model": model.as_ref().map(ModelDoc::from),
    });
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

pub fn typical_rank(args: &TypicalRankArgs) -> Outcome {
    let mut report = RunReport::new("bench typical-rank", Some(args.seed), options(args));
    let r = run_typical_rank(args.size, args.trials, args.seed)?;
    report.wall_time_s = r.wall_time_s;
    report.result = to_value(&r);
    Ok(report)
}

pub fn mse_vs_crb(args: &MseVsCrbArgs) -> Outcome {
    let mut report = RunReport::new("bench mse-vs-crb", Some(args.seed), options(args));
    let r = run_mse_vs_crb(&args.dims, args.rank, args.snr_db, args.trials, args.seed)?;
    report.wall_time_s = r.wall_time_s;
    report.result = to_value(&r);
    Ok(report)
}
