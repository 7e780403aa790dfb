//! Reference implementations used as test oracles. Written for clarity, not
//! speed, and without calling into the library code they check.
#![allow(dead_code)]

use cuesim_core::clustering::Linkage;
use cuesim_core::grid::{AccuracySurface, Axis, GridSpec};
use cuesim_core::{ParameterPoint, RetrievalConstants, SentenceType};
use rand::Rng;

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn manhattan(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// One oracle merge: the two member sets (lower smallest leaf first) and
/// the linkage distance at which they joined.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMerge {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub height: f64,
}

/// Naive agglomeration: every step recomputes every cluster-pair distance
/// from the raw point distances.
pub fn brute_force_cluster(
    points: &[Vec<f64>],
    dist: fn(&[f64], &[f64]) -> f64,
    linkage: Linkage,
) -> Vec<OracleMerge> {
    let mut clusters: Vec<Vec<usize>> = (0..points.len()).map(|i| vec![i]).collect();
    let mut out = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let pair: Vec<f64> = clusters[a]
                    .iter()
                    .flat_map(|&i| clusters[b].iter().map(move |&j| (i, j)))
                    .map(|(i, j)| dist(&points[i], &points[j]))
                    .collect();
                let d = match linkage {
                    Linkage::Single => pair.iter().copied().fold(f64::INFINITY, f64::min),
                    Linkage::Complete => pair.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    Linkage::Average => pair.iter().sum::<f64>() / pair.len() as f64,
                };
                let (ra, rb) = (clusters[a][0], clusters[b][0]);
                let key = (ra.min(rb), ra.max(rb));
                let take = match best {
                    None => true,
                    Some((bd, bk, _, _)) => d < bd || (d == bd && key < bk),
                };
                if take {
                    best = Some((d, key, a, b));
                }
            }
        }
        let (height, _, a, b) = best.unwrap();
        let (ca, cb) = (clusters[a].clone(), clusters[b].clone());
        let (left, right) = if ca[0] < cb[0] { (ca, cb) } else { (cb, ca) };
        let mut joined: Vec<usize> = left.iter().chain(&right).copied().collect();
        joined.sort_unstable();
        clusters.remove(b);
        clusters.remove(a);
        clusters.push(joined);
        clusters.sort_by_key(|c| c[0]);
        out.push(OracleMerge {
            left,
            right,
            height,
        });
    }
    out
}

/// Indices of all cells whose accuracy is closest to `observed`, found by
/// a plain scan.
pub fn exhaustive_ties(accuracies: &[f64], observed: f64) -> Vec<usize> {
    let d: Vec<f64> = accuracies.iter().map(|a| (a - observed).abs()).collect();
    let best = d.iter().copied().fold(f64::INFINITY, f64::min);
    (0..d.len()).filter(|&i| d[i] - best <= 1e-12).collect()
}

/// A small random surface: axis lengths 1..=4, accuracies in steps of 1/20
/// so that ties are common.
pub fn random_surface<R: Rng>(rng: &mut R, t: &SentenceType) -> AccuracySurface {
    let mut axis = |lo: f64, step: f64| {
        let n = rng.gen_range(1..=4usize);
        Axis::new(lo, lo + step * (n - 1) as f64, step)
    };
    let spec = GridSpec {
        ga: axis(0.2, 0.1),
        dat: axis(0.05, 0.01),
        ans: axis(0.15, 0.05),
    };
    let grid = cuesim_core::grid::build_grid(&spec).unwrap();
    let counts: Vec<u32> = (0..grid.len()).map(|_| rng.gen_range(0..=20)).collect();
    AccuracySurface::from_counts(
        grid,
        vec![t.clone()],
        counts,
        20,
        0,
        RetrievalConstants::default(),
    )
    .unwrap()
}

pub fn componentwise_mean(points: &[ParameterPoint]) -> [f64; 3] {
    let mut s = [0.0; 3];
    for p in points {
        s[0] += p.ga;
        s[1] += p.dat;
        s[2] += p.ans;
    }
    s.map(|v| v / points.len() as f64)
}

/// Standard logistic CDF at `x` for scale `s`.
pub fn logistic_cdf(x: f64, s: f64) -> f64 {
    1.0 / (1.0 + (-x / s).exp())
}
