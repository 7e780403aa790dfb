//! Synthetic participant cohorts drawn from an accuracy surface.
//!
//! Each participant gets a generating parameter point drawn from its group's
//! distribution. The point is snapped to the nearest surface cell (Euclidean
//! distance with each parameter scaled by its grid step) and each observed
//! accuracy is a Binomial(n_items, cell accuracy) draw divided by n_items.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Observation, ParticipantRecord};
use crate::error::{Error, Result};
use crate::fitting::Group;
use crate::grid::AccuracySurface;
use crate::memory::ParameterPoint;
use crate::schedule::SentenceType;
use crate::seed::SeedKey;

/// Either a fixed value or a uniform range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamDist {
    Fixed(f64),
    Uniform { lower: f64, upper: f64 },
}

impl ParamDist {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ParamDist::Fixed(v) => v,
            ParamDist::Uniform { lower, upper } => lower + (upper - lower) * rng.gen::<f64>(),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        match *self {
            ParamDist::Fixed(v) if v.is_finite() => Ok(()),
            ParamDist::Uniform { lower, upper }
                if lower.is_finite() && upper.is_finite() && lower <= upper =>
            {
                Ok(())
            }
            _ => Err(Error::invalid(format!(
                "{name}: invalid distribution {self:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub group: Group,
    pub count: u32,
    pub ga: ParamDist,
    pub dat: ParamDist,
    pub ans: ParamDist,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    /// Items per sentence type.
    pub n_items: u32,
    pub groups: Vec<GroupSpec>,
}

impl Default for SynthSpec {
    /// 46 controls near the standard settings and 56 IWA spread over the
    /// whole default grid, 20 items per sentence type.
    fn default() -> Self {
        SynthSpec {
            seed: 1,
            n_items: 20,
            groups: vec![
                GroupSpec {
                    group: Group::Control,
                    count: 46,
                    ga: ParamDist::Uniform {
                        lower: 0.9,
                        upper: 1.1,
                    },
                    dat: ParamDist::Uniform {
                        lower: 0.05,
                        upper: 0.06,
                    },
                    ans: ParamDist::Uniform {
                        lower: 0.15,
                        upper: 0.2,
                    },
                },
                GroupSpec {
                    group: Group::Iwa,
                    count: 56,
                    ga: ParamDist::Uniform {
                        lower: 0.2,
                        upper: 1.1,
                    },
                    dat: ParamDist::Uniform {
                        lower: 0.05,
                        upper: 0.1,
                    },
                    ans: ParamDist::Uniform {
                        lower: 0.15,
                        upper: 0.45,
                    },
                },
            ],
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_items == 0 {
            return Err(Error::invalid("n_items must be >= 1"));
        }
        if self.groups.is_empty() {
            return Err(Error::invalid("synthetic spec has no groups"));
        }
        for g in &self.groups {
            if g.count == 0 {
                return Err(Error::invalid(format!(
                    "group {}: count must be >= 1",
                    g.group
                )));
            }
            g.ga.validate("ga")?;
            g.dat.validate("dat")?;
            g.ans.validate("ans")?;
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: SynthSpec =
            toml::from_str(text).map_err(|e| Error::invalid(format!("synthetic spec: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("synth spec serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratingRecord {
    pub participant: String,
    pub group: Group,
    /// Point drawn from the group distribution.
    pub drawn: ParameterPoint,
    /// Surface cell the draw was matched to.
    pub cell: ParameterPoint,
    pub cell_index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCohort {
    pub dataset: Dataset,
    pub generating: Vec<GeneratingRecord>,
}

impl SyntheticCohort {
    pub fn generating_csv(&self) -> String {
        let mut out = String::from("participant,group,drawn_ga,drawn_dat,drawn_ans,ga,dat,ans\n");
        for g in &self.generating {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                g.participant,
                g.group,
                g.drawn.ga,
                g.drawn.dat,
                g.drawn.ans,
                g.cell.ga,
                g.cell.dat,
                g.cell.ans
            );
        }
        out
    }
}

/// Smallest positive spacing between distinct values on each axis; 1 for a
/// single-valued axis.
pub fn grid_steps(grid: &[ParameterPoint]) -> [f64; 3] {
    let mut steps = [1.0; 3];
    for (c, step) in steps.iter_mut().enumerate() {
        let mut v: Vec<f64> = grid.iter().map(|p| p.as_array()[c]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        if let Some(m) = v.windows(2).map(|w| w[1] - w[0]).min_by(f64::total_cmp) {
            *step = m;
        }
    }
    steps
}

/// Index of the grid point nearest to `p` in step-scaled Euclidean distance.
/// Points outside the grid's bounding box are rejected.
pub fn nearest_cell(grid: &[ParameterPoint], p: &ParameterPoint) -> Result<usize> {
    if grid.is_empty() {
        return Err(Error::invalid("surface has no grid points"));
    }
    let pa = p.as_array();
    for c in 0..3 {
        let lo = grid
            .iter()
            .map(|q| q.as_array()[c])
            .fold(f64::INFINITY, f64::min);
        let hi = grid
            .iter()
            .map(|q| q.as_array()[c])
            .fold(f64::NEG_INFINITY, f64::max);
        if pa[c] < lo - 1e-9 || pa[c] > hi + 1e-9 {
            return Err(Error::invalid(format!(
                "generating point {p} lies outside the surface ({} range {lo}..={hi})",
                ["GA", "DAT", "ANS"][c]
            )));
        }
    }
    let steps = grid_steps(grid);
    let dist = |q: &ParameterPoint| {
        let qa = q.as_array();
        (0..3)
            .map(|c| ((qa[c] - pa[c]) / steps[c]).powi(2))
            .sum::<f64>()
    };
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, q) in grid.iter().enumerate() {
        let d = dist(q);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    Ok(best)
}

/// Number of successes in `n` Bernoulli(`p`) trials.
pub fn binomial<R: Rng + ?Sized>(n: u32, p: f64, rng: &mut R) -> u32 {
    (0..n).filter(|_| rng.gen::<f64>() < p).count() as u32
}

pub fn generate_synthetic(
    spec: &SynthSpec,
    surface: &AccuracySurface,
    types: &[SentenceType],
) -> Result<SyntheticCohort> {
    spec.validate()?;
    let type_idx: Vec<usize> = types
        .iter()
        .map(|t| surface.require_type(t))
        .collect::<Result<_>>()?;
    let root = SeedKey::new(spec.seed).mix_str("synthetic");
    let mut participants = Vec::new();
    let mut generating = Vec::new();
    for g in &spec.groups {
        for k in 0..g.count {
            let id = format!("{}-{:03}", g.group, k + 1);
            let mut rng = root
                .mix_str(g.group.as_str())
                .mix_u64(u64::from(k))
                .stream();
            let drawn = ParameterPoint::new(
                g.ga.sample(&mut rng),
                g.dat.sample(&mut rng),
                g.ans.sample(&mut rng),
            )
            .map_err(|e| Error::invalid(format!("{id}: {e}")))?;
            let ci = nearest_cell(surface.grid(), &drawn)
                .map_err(|e| Error::invalid(format!("{id}: {e}")))?;
            let mut observations = std::collections::BTreeMap::new();
            for (t, &ti) in types.iter().zip(&type_idx) {
                let acc = surface.accuracy(ci, ti);
                let n_correct = binomial(spec.n_items, acc, &mut rng);
                observations.insert(t.clone(), Observation::new(spec.n_items, n_correct)?);
            }
            participants.push(ParticipantRecord {
                id: id.clone(),
                group: g.group,
                observations,
            });
            generating.push(GeneratingRecord {
                participant: id,
                group: g.group,
                drawn,
                cell: surface.grid()[ci],
                cell_index: ci,
            });
        }
    }
    let counts: Vec<String> = spec
        .groups
        .iter()
        .map(|g| format!("{} {}", g.count, g.group))
        .collect();
    Ok(SyntheticCohort {
        dataset: Dataset {
            participants,
            provenance: format!(
                "synthetic cohort (seed {}, {} items per type, {})",
                spec.seed,
                spec.n_items,
                counts.join(", ")
            ),
        },
        generating,
    })
}
