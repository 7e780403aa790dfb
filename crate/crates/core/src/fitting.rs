//! Per-participant fitting by absolute accuracy distance.
//!
//! For each sentence type the fit is every grid point whose simulated accuracy
//! lies closest to the observed accuracy. When several points tie, the fitted
//! vector is their componentwise mean, which may fall between grid points.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::AccuracySurface;
use crate::memory::ParameterPoint;
use crate::schedule::SentenceType;
use crate::table::Table;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "control")]
    Control,
    #[serde(rename = "IWA")]
    Iwa,
}

impl Group {
    pub const ALL: [Group; 2] = [Group::Control, Group::Iwa];

    pub fn as_str(&self) -> &'static str {
        match self {
            Group::Control => "control",
            Group::Iwa => "IWA",
        }
    }

    pub fn index(&self) -> usize {
        match self {
            Group::Control => 0,
            Group::Iwa => 1,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "control" => Ok(Group::Control),
            "IWA" | "iwa" => Ok(Group::Iwa),
            other => Err(Error::invalid(format!(
                "unknown group {other:?} (expected \"control\" or \"IWA\")"
            ))),
        }
    }
}

/// Which parameters deviate from the reference values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonDefaultFlags {
    pub ga: bool,
    pub dat: bool,
    pub ans: bool,
}

impl NonDefaultFlags {
    pub fn any(&self) -> bool {
        self.ga || self.dat || self.ans
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub participant: String,
    pub group: Group,
    pub sentence_type: SentenceType,
    pub tie_set: Vec<ParameterPoint>,
    pub fitted: ParameterPoint,
    pub residual: f64,
    pub non_default: NonDefaultFlags,
}

fn round12(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

/// Tie set, componentwise mean and residual for one observed accuracy.
#[derive(Clone, Debug, PartialEq)]
pub struct PointFit {
    pub tie_set: Vec<ParameterPoint>,
    pub fitted: ParameterPoint,
    pub residual: f64,
}

/// Finds all grid points minimising `|model accuracy - observed|`.
/// Distances are compared after rounding to 12 decimals.
pub fn fit_participant(
    observed: f64,
    surface: &AccuracySurface,
    sentence_type: &SentenceType,
) -> Result<PointFit> {
    if !(0.0..=1.0).contains(&observed) {
        return Err(Error::invalid(format!(
            "observed accuracy {observed} is outside [0, 1]"
        )));
    }
    let ti = surface.require_type(sentence_type)?;
    let grid = surface.grid();
    if grid.is_empty() {
        return Err(Error::invalid("surface has no grid points"));
    }
    let mut best = f64::INFINITY;
    let mut ties: Vec<usize> = Vec::new();
    for pi in 0..grid.len() {
        let d = round12((surface.accuracy(pi, ti) - observed).abs());
        if d < best {
            best = d;
            ties.clear();
            ties.push(pi);
        } else if d == best {
            ties.push(pi);
        }
    }
    let tie_set: Vec<ParameterPoint> = ties.iter().map(|&i| grid[i]).collect();
    Ok(PointFit {
        fitted: mean_point(&tie_set),
        tie_set,
        residual: best,
    })
}

pub fn mean_point(points: &[ParameterPoint]) -> ParameterPoint {
    let n = points.len() as f64;
    let sum = points.iter().fold([0.0; 3], |acc, p| {
        [acc[0] + p.ga, acc[1] + p.dat, acc[2] + p.ans]
    });
    ParameterPoint {
        ga: sum[0] / n,
        dat: sum[1] / n,
        ans: sum[2] / n,
    }
}

/// Per-parameter tolerances for [`flag_non_default`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub ga: f64,
    pub dat: f64,
    pub ans: f64,
}

impl Default for Tolerances {
    /// Half the default grid step per parameter.
    fn default() -> Self {
        Tolerances {
            ga: 0.05,
            dat: 0.005,
            ans: 0.025,
        }
    }
}

impl Tolerances {
    pub fn half_steps(steps: [f64; 3]) -> Self {
        Tolerances {
            ga: steps[0] / 2.0,
            dat: steps[1] / 2.0,
            ans: steps[2] / 2.0,
        }
    }
}

pub fn flag_non_default(
    fitted: &ParameterPoint,
    defaults: &ParameterPoint,
    eps: &Tolerances,
) -> Result<NonDefaultFlags> {
    if !(eps.ga > 0.0 && eps.dat > 0.0 && eps.ans > 0.0) {
        return Err(Error::invalid("non-default tolerances must be > 0"));
    }
    // Slack so that a fit exactly half a step away is not flagged by rounding.
    let beyond = |v: f64, d: f64, e: f64| (v - d).abs() > e + 1e-9;
    Ok(NonDefaultFlags {
        ga: beyond(fitted.ga, defaults.ga, eps.ga),
        dat: beyond(fitted.dat, defaults.dat, eps.dat),
        ans: beyond(fitted.ans, defaults.ans, eps.ans),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipantAccuracy {
    pub participant: String,
    pub group: Group,
    pub sentence_type: SentenceType,
    pub observed: f64,
}

/// Fits every participant observation and flags non-default parameters.
pub fn fit_all(
    observations: &[ParticipantAccuracy],
    surface: &AccuracySurface,
    defaults: &ParameterPoint,
    eps: &Tolerances,
) -> Result<Vec<FitResult>> {
    observations
        .iter()
        .map(|o| {
            let fit =
                fit_participant(o.observed, surface, &o.sentence_type).map_err(|e| match e {
                    Error::Invalid(m) => {
                        Error::invalid(format!("participant {}: {m}", o.participant))
                    }
                    other => other,
                })?;
            Ok(FitResult {
                participant: o.participant.clone(),
                group: o.group,
                sentence_type: o.sentence_type.clone(),
                non_default: flag_non_default(&fit.fitted, defaults, eps)?,
                tie_set: fit.tie_set,
                fitted: fit.fitted,
                residual: fit.residual,
            })
        })
        .collect()
}

/// The seven count columns: three single parameters and four conjunctions.
pub const COUNT_COLUMNS: [&str; 7] = [
    "GA",
    "DAT",
    "ANS",
    "GA & DAT",
    "GA & ANS",
    "DAT & ANS",
    "GA & DAT & ANS",
];

pub fn count_vector(f: &NonDefaultFlags) -> [u32; 7] {
    let b = |x: bool| u32::from(x);
    [
        b(f.ga),
        b(f.dat),
        b(f.ans),
        b(f.ga && f.dat),
        b(f.ga && f.ans),
        b(f.dat && f.ans),
        b(f.ga && f.dat && f.ans),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonDefaultRow {
    pub sentence_type: SentenceType,
    pub group: Group,
    pub participants: u32,
    pub counts: [u32; 7],
}

/// Non-default counts per (sentence type, group), rows ordered by sentence
/// type as given and then control before IWA.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonDefaultTable {
    pub rows: Vec<NonDefaultRow>,
}

pub fn tabulate_non_default(
    fits: &[FitResult],
    sentence_types: &[SentenceType],
) -> NonDefaultTable {
    let mut rows = Vec::new();
    for t in sentence_types {
        for g in Group::ALL {
            let mut row = NonDefaultRow {
                sentence_type: t.clone(),
                group: g,
                participants: 0,
                counts: [0; 7],
            };
            for f in fits
                .iter()
                .filter(|f| &f.sentence_type == t && f.group == g)
            {
                row.participants += 1;
                for (c, v) in row.counts.iter_mut().zip(count_vector(&f.non_default)) {
                    *c += v;
                }
            }
            rows.push(row);
        }
    }
    NonDefaultTable { rows }
}

impl NonDefaultTable {
    pub fn row(&self, t: &SentenceType, g: Group) -> Option<&NonDefaultRow> {
        self.rows
            .iter()
            .find(|r| &r.sentence_type == t && r.group == g)
    }

    pub(crate) fn table(&self) -> Table {
        let mut header = vec!["type".to_owned(), "group".to_owned(), "n".to_owned()];
        header.extend(COUNT_COLUMNS.iter().map(|s| (*s).to_owned()));
        let mut t = Table::new(header);
        let mut last: Option<&SentenceType> = None;
        for r in &self.rows {
            let label = if last == Some(&r.sentence_type) {
                String::new()
            } else {
                r.sentence_type.to_string()
            };
            last = Some(&r.sentence_type);
            let mut cells = vec![label, r.group.to_string(), r.participants.to_string()];
            cells.extend(r.counts.iter().map(u32::to_string));
            t.push(cells);
        }
        t
    }

    /// Aligned comma-separated rendering.
    pub fn render(&self) -> String {
        self.table().render()
    }
}

pub const FITS_HEADER: &str =
    "participant,group,sentence_type,ga,dat,ans,residual,tie_count,flag_ga,flag_dat,flag_ans";

pub fn fits_to_csv(fits: &[FitResult]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    out.push_str(FITS_HEADER);
    out.push('\n');
    for f in fits {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            f.participant,
            f.group,
            f.sentence_type,
            f.fitted.ga,
            f.fitted.dat,
            f.fitted.ans,
            f.residual,
            f.tie_set.len(),
            u8::from(f.non_default.ga),
            u8::from(f.non_default.dat),
            u8::from(f.non_default.ans),
        );
    }
    out
}

/// A fit as read back from a fits file. The tie set itself is not stored,
/// only its size.
#[derive(Clone, Debug, PartialEq)]
pub struct FitRecord {
    pub participant: String,
    pub group: Group,
    pub sentence_type: SentenceType,
    pub fitted: ParameterPoint,
    pub residual: f64,
    pub tie_count: usize,
    pub non_default: NonDefaultFlags,
}

impl From<&FitResult> for FitRecord {
    fn from(f: &FitResult) -> Self {
        FitRecord {
            participant: f.participant.clone(),
            group: f.group,
            sentence_type: f.sentence_type.clone(),
            fitted: f.fitted,
            residual: f.residual,
            tie_count: f.tie_set.len(),
            non_default: f.non_default,
        }
    }
}

pub fn fits_from_csv(text: &str, origin: &std::path::Path) -> Result<Vec<FitRecord>> {
    let perr = |line: u64, col: Option<&str>, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        column: col.map(str::to_owned),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| perr(1, None, e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != FITS_HEADER {
        return Err(perr(
            1,
            None,
            format!("expected header {FITS_HEADER:?}, found {header:?}"),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec =
            rec.map_err(|e| perr(e.position().map_or(0, |p| p.line()), None, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let f = |i: usize, name: &str| -> Result<f64> {
            rec[i]
                .trim()
                .parse()
                .map_err(|e| perr(line, Some(name), format!("{:?}: {e}", &rec[i])))
        };
        let flag = |i: usize, name: &str| -> Result<bool> {
            match rec[i].trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(perr(
                    line,
                    Some(name),
                    format!("expected 0 or 1, got {other:?}"),
                )),
            }
        };
        out.push(FitRecord {
            participant: rec[0].trim().to_owned(),
            group: rec[1]
                .trim()
                .parse()
                .map_err(|e: Error| perr(line, Some("group"), e.to_string()))?,
            sentence_type: rec[2]
                .trim()
                .parse()
                .map_err(|e: Error| perr(line, Some("sentence_type"), e.to_string()))?,
            fitted: ParameterPoint::new(f(3, "ga")?, f(4, "dat")?, f(5, "ans")?)
                .map_err(|e| perr(line, None, e.to_string()))?,
            residual: f(6, "residual")?,
            tie_count: rec[7]
                .trim()
                .parse()
                .map_err(|e| perr(line, Some("tie_count"), format!("{:?}: {e}", &rec[7])))?,
            non_default: NonDefaultFlags {
                ga: flag(8, "flag_ga")?,
                dat: flag(9, "flag_dat")?,
                ans: flag(10, "flag_ans")?,
            },
        });
    }
    Ok(out)
}
