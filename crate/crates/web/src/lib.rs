//! Browser bindings for the demo page in `www/`. Every export returns a JSON
//! string; errors surface as thrown strings.

use cuesim_core::clustering::{cut_tree, hierarchical_cluster, Linkage, Metric};
use cuesim_core::grid::{estimate_accuracy, Axis, GridSpec};
use cuesim_core::schedule::{build_schedule, run_trial};
use cuesim_core::seed::SeedKey;
use cuesim_core::{ParameterPoint, RetrievalConstants, SentenceType};
use serde::Serialize;
use wasm_bindgen::prelude::*;

type Out = Result<String, String>;

fn json<T: Serialize>(v: &T) -> Out {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn constants(threshold: f64) -> RetrievalConstants {
    RetrievalConstants {
        threshold,
        ..RetrievalConstants::default()
    }
}

/// One trial with its full retrieval log.
pub fn trial_trace_json(
    sentence_type: &str,
    ga: f64,
    dat: f64,
    ans: f64,
    threshold: f64,
    seed: u64,
) -> Out {
    let t: SentenceType = sentence_type
        .parse()
        .map_err(|e: cuesim_core::Error| e.to_string())?;
    let schedule = build_schedule(&t).map_err(|e| e.to_string())?;
    let p = ParameterPoint::new(ga, dat, ans).map_err(|e| e.to_string())?;
    let k = constants(threshold);
    k.validate().map_err(|e| e.to_string())?;
    let out = run_trial(&schedule, &p, &k, &mut SeedKey::new(seed).stream())
        .map_err(|e| e.to_string())?;
    json(&out)
}

#[derive(Serialize)]
struct Slice {
    ga: Vec<f64>,
    ans: Vec<f64>,
    /// Row-major, one row per GA value.
    accuracy: Vec<Vec<f64>>,
}

/// Accuracy over the default GA x ANS plane at a fixed DAT.
pub fn accuracy_slice_json(
    sentence_type: &str,
    dat: f64,
    threshold: f64,
    iterations: u32,
    seed: u64,
) -> Out {
    let t: SentenceType = sentence_type
        .parse()
        .map_err(|e: cuesim_core::Error| e.to_string())?;
    let schedule = build_schedule(&t).map_err(|e| e.to_string())?;
    let grid = GridSpec {
        dat: Axis::single(dat),
        ..GridSpec::default()
    };
    grid.validate().map_err(|e| e.to_string())?;
    let k = constants(threshold);
    k.validate().map_err(|e| e.to_string())?;
    let (ga, ans) = (grid.ga.values(), grid.ans.values());
    let mut accuracy = Vec::with_capacity(ga.len());
    for &g in &ga {
        let mut row = Vec::with_capacity(ans.len());
        for &a in &ans {
            let p = ParameterPoint::new(g, dat, a).map_err(|e| e.to_string())?;
            row.push(
                estimate_accuracy(&schedule, &p, &k, iterations, seed)
                    .map_err(|e| e.to_string())?,
            );
        }
        accuracy.push(row);
    }
    json(&Slice { ga, ans, accuracy })
}

#[derive(Serialize)]
struct Clustering {
    merges: Vec<cuesim_core::clustering::Merge>,
    labels: Vec<usize>,
}

/// Agglomerative clustering of 2-D points given as `[[x, y], ...]`, cut
/// into `k` clusters.
pub fn cluster_points_json(points: &str, linkage: &str, k: usize) -> Out {
    let pts: Vec<[f64; 2]> = serde_json::from_str(points).map_err(|e| e.to_string())?;
    let linkage: Linkage = linkage
        .parse()
        .map_err(|e: cuesim_core::Error| e.to_string())?;
    let d = hierarchical_cluster(&pts, Metric::Euclidean, linkage).map_err(|e| e.to_string())?;
    let labels = cut_tree(&d, k).map_err(|e| e.to_string())?;
    json(&Clustering {
        merges: d.merges,
        labels,
    })
}

#[wasm_bindgen]
pub fn trial_trace(
    sentence_type: &str,
    ga: f64,
    dat: f64,
    ans: f64,
    threshold: f64,
    seed: u32,
) -> Result<String, JsValue> {
    trial_trace_json(sentence_type, ga, dat, ans, threshold, u64::from(seed)).map_err(JsValue::from)
}

#[wasm_bindgen]
pub fn accuracy_slice(
    sentence_type: &str,
    dat: f64,
    threshold: f64,
    iterations: u32,
    seed: u32,
) -> Result<String, JsValue> {
    accuracy_slice_json(sentence_type, dat, threshold, iterations, u64::from(seed))
        .map_err(JsValue::from)
}

#[wasm_bindgen]
pub fn cluster_points(points: &str, linkage: &str, k: usize) -> Result<String, JsValue> {
    cluster_points_json(points, linkage, k).map_err(JsValue::from)
}
