//! Browser bindings for the static demo page in `www/`. Every export
//! returns a JSON string so the page can render it without glue types.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use trilinear::bench::typical_rank;
use trilinear::cpd::{cpd_als, FitOptions, Init};
use trilinear::io::fixtures::{fixture, NAMES};
use trilinear::io::{synth_model, ModelDoc};
use trilinear::tensor::TensorLike;
use trilinear::uniqueness::{check_generic, generic_rank};

fn to_js(v: Result<Value, String>) -> Result<String, JsError> {
    v.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

fn parse_dims(dims: &str) -> Result<Vec<usize>, String> {
    dims.split(|c: char| c == ',' || c == 'x' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| format!("'{s}' is not a mode size")))
        .collect()
}

/// Monte Carlo estimate of the probability that a Gaussian
/// `size × size × 2` tensor has real rank `size`.
#[wasm_bindgen(js_name = typicalRank)]
pub fn typical_rank_json(size: usize, trials: usize, seed: u64) -> Result<String, JsError> {
    to_js(
        typical_rank(size, trials, seed)
            .map_err(|e| e.to_string())
            .and_then(|r| serde_json::to_value(r).map_err(|e| e.to_string())),
    )
}

/// Generic uniqueness verdict and generic rank for a tensor size.
#[wasm_bindgen(js_name = checkGeneric)]
pub fn check_generic_json(dims: &str, rank: usize) -> Result<String, JsError> {
    to_js(parse_dims(dims).and_then(|d| {
        if d.len() < 2 || d.contains(&0) || rank == 0 {
            return Err("need at least two positive mode sizes and a positive rank".into());
        }
        let v = check_generic(&d, rank);
        Ok(json!({ "dims": d, "rank": rank, "generic_rank": generic_rank(&d), "verdict": v }))
    }))
}

/// Fits a CP model to a named fixture (`complexmult`, `strassen`,
/// `border-rank`) or, for `random:<dims>`, to a noiseless random tensor of
/// rank `rank`. Returns the loss trajectory and the fitted factors.
#[wasm_bindgen]
pub fn decompose(source: &str, rank: usize, seed: u64, max_sweeps: usize, gevd: bool) -> Result<String, JsError> {
    let run = || -> Result<Value, String> {
        let t = match source.strip_prefix("random:") {
            Some(dims) => {
                trilinear::Tensor::Dense(synth_model(&parse_dims(dims)?, rank, seed, 0.0).map_err(|e| e.to_string())?.1)
            }
            None => fixture(source).map_err(|_| format!("unknown fixture '{source}' (known: {})", NAMES.join(", ")))?,
        };
        let opts = FitOptions {
            max_sweeps,
            tol: 1e-12,
            seed,
            init: if gevd { Init::Gevd } else { Init::Random },
            ..FitOptions::with_rank(rank)
        };
        let (model, fit) = cpd_als(&t, &opts).map_err(|e| e.to_string())?;
        let norm = t.norm_sq().sqrt();
        Ok(json!({
            "shape": t.shape(),
            "relative_residual": fit.final_loss().max(0.0).sqrt() / norm,
            "loss": fit.loss,
            "max_component_norm": fit.max_component_norm,
            "diverging": fit.diverging,
            "warnings": fit.warnings,
            "model": ModelDoc::from(&model),
        }))
    };
    to_js(run())
}
