//! Agglomerative clustering of fitted parameter vectors and two-group
//! discrimination.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{FitRecord, Group};
use crate::schedule::SentenceType;
use crate::seed::SeedKey;
use crate::table::Table;

/// How SR and OR fits are combined into feature rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    /// One row per participant: SR (GA, DAT, ANS) followed by OR (GA, DAT, ANS).
    #[default]
    Concatenate,
    /// One row per (participant, sentence type) with three components.
    Pool,
}

impl FromStr for FeatureMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concatenate" | "concat" => Ok(FeatureMode::Concatenate),
            "pool" => Ok(FeatureMode::Pool),
            other => Err(Error::invalid(format!(
                "unknown feature mode {other:?} (expected concatenate or pool)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub participant: String,
    pub group: Group,
    /// Set in pooled mode: the sentence type this row came from.
    pub sentence_type: Option<SentenceType>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: Vec<FeatureRow>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.values.len())
    }

    pub fn points(&self) -> Vec<&[f64]> {
        self.rows.iter().map(|r| r.values.as_slice()).collect()
    }

    pub fn groups(&self) -> Vec<Group> {
        self.rows.iter().map(|r| r.group).collect()
    }

    /// Shifts and scales every column to mean 0, standard deviation 1
    /// (population). Constant columns become all zeros.
    pub fn standardize(&mut self) {
        let n = self.rows.len() as f64;
        for c in 0..self.dim() {
            let mean = self.rows.iter().map(|r| r.values[c]).sum::<f64>() / n;
            let var = self
                .rows
                .iter()
                .map(|r| (r.values[c] - mean).powi(2))
                .sum::<f64>()
                / n;
            let sd = var.sqrt();
            for r in &mut self.rows {
                r.values[c] = if sd > 1e-12 {
                    (r.values[c] - mean) / sd
                } else {
                    0.0
                };
            }
        }
    }
}

/// Builds feature rows from subject- and object-relative fits. Participants
/// keep the order of their first appearance in `fits`.
pub fn build_features(
    fits: &[FitRecord],
    subject: &SentenceType,
    object: &SentenceType,
    mode: FeatureMode,
    standardize: bool,
) -> Result<FeatureMatrix> {
    let mut order: Vec<(&str, Group)> = Vec::new();
    let mut by_key: BTreeMap<(&str, &SentenceType), &FitRecord> = BTreeMap::new();
    for f in fits {
        if let Some(&(_, g)) = order.iter().find(|(p, _)| *p == f.participant) {
            if g != f.group {
                return Err(Error::invalid(format!(
                    "participant {} appears in both groups",
                    f.participant
                )));
            }
        } else {
            order.push((&f.participant, f.group));
        }
        by_key.insert((&f.participant, &f.sentence_type), f);
    }

    let mut missing = Vec::new();
    for (p, _) in &order {
        for t in [subject, object] {
            if !by_key.contains_key(&(*p, t)) {
                missing.push(format!("{p}/{t}"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "{} participant fit(s) missing: {}",
            missing.len(),
            missing.join(", ")
        )));
    }

    let vec3 = |f: &FitRecord| vec![f.fitted.ga, f.fitted.dat, f.fitted.ans];
    let mut rows = Vec::new();
    match mode {
        FeatureMode::Concatenate => {
            for (p, g) in &order {
                let mut values = vec3(by_key[&(*p, subject)]);
                values.extend(vec3(by_key[&(*p, object)]));
                rows.push(FeatureRow {
                    participant: (*p).to_owned(),
                    group: *g,
                    sentence_type: None,
                    values,
                });
            }
        }
        FeatureMode::Pool => {
            for t in [subject, object] {
                for (p, g) in &order {
                    rows.push(FeatureRow {
                        participant: (*p).to_owned(),
                        group: *g,
                        sentence_type: Some(t.clone()),
                        values: vec3(by_key[&(*p, t)]),
                    });
                }
            }
        }
    }
    let mut m = FeatureMatrix { rows };
    if standardize {
        m.standardize();
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
}

impl Metric {
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt(),
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "manhattan" => Ok(Metric::Manhattan),
            other => Err(Error::invalid(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Single,
    Average,
    #[default]
    Complete,
}

impl FromStr for Linkage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Linkage::Single),
            "average" => Ok(Linkage::Average),
            "complete" => Ok(Linkage::Complete),
            other => Err(Error::invalid(format!(
                "unknown linkage {other:?} (expected single, average or complete)"
            ))),
        }
    }
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Linkage::Single => "single",
            Linkage::Average => "average",
            Linkage::Complete => "complete",
        })
    }
}

/// One merge. Leaves are clusters `0..n`; the cluster formed by merge `i`
/// gets id `n + i`. `left` is the cluster whose smallest leaf index is lower.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub merges: Vec<Merge>,
    pub leaf_count: usize,
}

struct Slot {
    id: usize,
    size: usize,
    /// Smallest leaf index in the cluster; used for tie-breaking.
    rep: usize,
}

/// Agglomerative clustering with Lance–Williams distance updates. Among equal
/// linkage distances the pair with the lexicographically smallest
/// (smallest-leaf, smallest-leaf) indices merges first.
pub fn hierarchical_cluster<P: AsRef<[f64]>>(
    points: &[P],
    metric: Metric,
    linkage: Linkage,
) -> Result<Dendrogram> {
    let n = points.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "clustering needs at least 2 rows, got {n}"
        )));
    }
    let dim = points[0].as_ref().len();
    if points.iter().any(|p| p.as_ref().len() != dim) {
        return Err(Error::invalid("feature rows differ in dimensionality"));
    }
    if points
        .iter()
        .flat_map(|p| p.as_ref())
        .any(|v| !v.is_finite())
    {
        return Err(Error::invalid("feature rows contain non-finite values"));
    }

    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = metric.distance(points[i].as_ref(), points[j].as_ref());
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut slots: Vec<Option<Slot>> = (0..n)
        .map(|i| {
            Some(Slot {
                id: i,
                size: 1,
                rep: i,
            })
        })
        .collect();
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for i in 0..n {
            let Some(si) = &slots[i] else { continue };
            for j in (i + 1)..n {
                let Some(sj) = &slots[j] else { continue };
                let d = dist[i * n + j];
                let key = (si.rep.min(sj.rep), si.rep.max(sj.rep));
                let better = match best {
                    None => true,
                    Some((bd, bk, _, _)) => d < bd || (d == bd && key < bk),
                };
                if better {
                    best = Some((d, key, i, j));
                }
            }
        }
        let (height, _, i, j) = best.expect("at least two active clusters");
        let a = slots[i].take().expect("active");
        let b = slots[j].take().expect("active");
        for k in 0..n {
            if slots[k].is_none() {
                continue;
            }
            let (dik, djk) = (dist[i * n + k], dist[j * n + k]);
            let d = match linkage {
                Linkage::Single => dik.min(djk),
                Linkage::Complete => dik.max(djk),
                Linkage::Average => {
                    (a.size as f64 * dik + b.size as f64 * djk) / (a.size + b.size) as f64
                }
            };
            dist[i * n + k] = d;
            dist[k * n + i] = d;
        }
        let (left, right) = if a.rep < b.rep {
            (a.id, b.id)
        } else {
            (b.id, a.id)
        };
        merges.push(Merge {
            left,
            right,
            height,
            size: a.size + b.size,
        });
        slots[i] = Some(Slot {
            id: n + step,
            size: a.size + b.size,
            rep: a.rep.min(b.rep),
        });
    }
    Ok(Dendrogram {
        merges,
        leaf_count: n,
    })
}

impl Dendrogram {
    /// Leaf members of every cluster id, leaves first then merges.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let n = self.leaf_count;
        let mut m: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for mg in &self.merges {
            let mut v = m[mg.left].clone();
            v.extend_from_slice(&m[mg.right]);
            v.sort_unstable();
            m.push(v);
        }
        m
    }
}

/// Cluster label per leaf after undoing the last `k - 1` merges. Labels are
/// numbered by each cluster's smallest leaf index.
pub fn cut_tree(dendrogram: &Dendrogram, k: usize) -> Result<Vec<usize>> {
    let n = dendrogram.leaf_count;
    if k < 1 || k > n {
        return Err(Error::invalid(format!(
            "cannot cut a tree with {n} leaves into {k} clusters"
        )));
    }
    let mut owner: Vec<usize> = (0..n + dendrogram.merges.len()).collect();
    fn find(owner: &mut [usize], mut x: usize) -> usize {
        while owner[x] != x {
            owner[x] = owner[owner[x]];
            x = owner[x];
        }
        x
    }
    for (i, m) in dendrogram.merges.iter().take(n - k).enumerate() {
        let id = n + i;
        let l = find(&mut owner, m.left);
        let r = find(&mut owner, m.right);
        owner[l] = id;
        owner[r] = id;
    }
    let mut labels = vec![usize::MAX; n];
    let mut root_label: BTreeMap<usize, usize> = BTreeMap::new();
    for (leaf, label) in labels.iter_mut().enumerate() {
        let root = find(&mut owner, leaf);
        let next = root_label.len();
        *label = *root_label.entry(root).or_insert(next);
    }
    Ok(labels)
}

/// Two-cluster versus two-group confusion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discrimination {
    /// `confusion[predicted][true]`, indexed by [`Group::index`].
    pub confusion: [[u32; 2]; 2],
    /// Group predicted for cluster 0 and cluster 1.
    pub cluster_groups: [Group; 2],
}

impl Discrimination {
    pub fn group_size(&self, g: Group) -> u32 {
        self.confusion[0][g.index()] + self.confusion[1][g.index()]
    }

    pub fn correct(&self) -> u32 {
        self.confusion[0][0] + self.confusion[1][1]
    }

    pub fn total(&self) -> u32 {
        self.confusion.iter().flatten().sum()
    }

    /// Share of group `g` assigned to its own cluster.
    pub fn group_accuracy(&self, g: Group) -> f64 {
        let n = self.group_size(g);
        if n == 0 {
            0.0
        } else {
            f64::from(self.confusion[g.index()][g.index()]) / f64::from(n)
        }
    }

    /// Overall proportion correctly assigned.
    pub fn accuracy(&self) -> f64 {
        f64::from(self.correct()) / f64::from(self.total())
    }
}

fn check_two(assignments: &[usize], groups: &[Group]) -> Result<()> {
    if assignments.len() != groups.len() {
        return Err(Error::invalid(format!(
            "{} cluster assignments for {} group labels",
            assignments.len(),
            groups.len()
        )));
    }
    let mut clusters: Vec<usize> = assignments.to_vec();
    clusters.sort_unstable();
    clusters.dedup();
    if clusters != [0, 1] {
        return Err(Error::invalid(format!(
            "discrimination needs exactly clusters 0 and 1, found {clusters:?}"
        )));
    }
    let has = |g: Group| groups.contains(&g);
    if !(has(Group::Control) && has(Group::Iwa)) {
        return Err(Error::invalid(
            "discrimination needs both control and IWA participants",
        ));
    }
    Ok(())
}

/// Confusion counts under a fixed cluster→group mapping.
pub fn confusion_with_mapping(
    assignments: &[usize],
    groups: &[Group],
    cluster_groups: [Group; 2],
) -> Discrimination {
    let mut confusion = [[0u32; 2]; 2];
    for (&c, g) in assignments.iter().zip(groups) {
        confusion[cluster_groups[c].index()][g.index()] += 1;
    }
    Discrimination {
        confusion,
        cluster_groups,
    }
}

/// Picks the cluster↔group bijection with the most correct assignments
/// (cluster 0 → control on a tie).
pub fn evaluate_discrimination(assignments: &[usize], groups: &[Group]) -> Result<Discrimination> {
    check_two(assignments, groups)?;
    let direct = confusion_with_mapping(assignments, groups, [Group::Control, Group::Iwa]);
    let swapped = confusion_with_mapping(assignments, groups, [Group::Iwa, Group::Control]);
    Ok(if swapped.correct() > direct.correct() {
        swapped
    } else {
        direct
    })
}

/// Discrimination accuracy with group labels randomly permuted, `n_perm` times.
pub fn permutation_null(
    assignments: &[usize],
    groups: &[Group],
    n_perm: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_two(assignments, groups)?;
    let mut rng = SeedKey::new(seed).mix_str("permutation-null").stream();
    let mut labels = groups.to_vec();
    let mut out = Vec::with_capacity(n_perm);
    for _ in 0..n_perm {
        labels.shuffle(&mut rng);
        out.push(evaluate_discrimination(assignments, &labels)?.accuracy());
    }
    Ok(out)
}

/// Empirical `q`-quantile (nearest rank) of `values`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

fn percent(x: f64) -> String {
    format!("{}%", (x * 100.0).round() as i64)
}

/// Renders one or more confusion blocks side by side: rows are predicted
/// groups, columns are true groups, and the last row gives per-group
/// percentage accuracy.
pub fn render_discrimination(blocks: &[(&str, &Discrimination)]) -> String {
    let mut top = vec![String::new()];
    let mut header = vec!["predicted group".to_owned()];
    for (label, _) in blocks {
        top.push((*label).to_owned());
        top.push(String::new());
        header.push("controls".into());
        header.push("IWA".into());
    }
    let mut t = Table::new(top);
    t.push(header);
    for pred in Group::ALL {
        let mut row = vec![pred.as_str().to_owned()];
        for (_, d) in blocks {
            for truth in Group::ALL {
                row.push(d.confusion[pred.index()][truth.index()].to_string());
            }
        }
        t.push(row);
    }
    let mut acc = vec!["accuracy".to_owned()];
    for (_, d) in blocks {
        for g in Group::ALL {
            acc.push(percent(d.group_accuracy(g)));
        }
    }
    t.push(acc);
    t.render()
}

pub const ASSIGNMENTS_HEADER: &str = "participant,group,cluster";

pub fn assignments_to_csv(features: &FeatureMatrix, labels: &[usize]) -> String {
    let mut out = String::from(ASSIGNMENTS_HEADER);
    out.push('\n');
    for (r, c) in features.rows.iter().zip(labels) {
        let id = match &r.sentence_type {
            Some(t) => format!("{}/{}", r.participant, t),
            None => r.participant.clone(),
        };
        out.push_str(&format!("{id},{},{c}\n", r.group));
    }
    out
}
