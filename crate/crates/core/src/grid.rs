//! The discretised parameter space and Monte Carlo accuracy surfaces.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::{ParameterPoint, RetrievalConstants};
use crate::schedule::{run_trial, SentenceSchedule, SentenceType};
use crate::seed::SeedKey;

pub const DEFAULT_ITERATIONS: u32 = 1000;

/// Inclusive `lower..=upper` range sampled every `step`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub lower: f64,
    pub upper: f64,
    pub step: f64,
}

impl Axis {
    pub const fn new(lower: f64, upper: f64, step: f64) -> Self {
        Axis { lower, upper, step }
    }

    pub fn single(value: f64) -> Self {
        Axis::new(value, value, 1.0)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite() && self.step.is_finite()) {
            return Err(Error::invalid(format!(
                "{name} axis: bounds must be finite"
            )));
        }
        if self.lower > self.upper {
            return Err(Error::invalid(format!(
                "{name} axis: lower {} exceeds upper {}",
                self.lower, self.upper
            )));
        }
        if self.step <= 0.0 {
            return Err(Error::invalid(format!("{name} axis: step must be > 0")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        let span = (self.upper - self.lower) / self.step;
        (span + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `lower + k·step`, rounded to 10 decimals.
    pub fn value(&self, k: usize) -> f64 {
        round10(self.lower + k as f64 * self.step)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.value(k)).collect()
    }

    /// Whether `v` lies inside the axis range (with a small tolerance).
    pub fn covers(&self, v: f64) -> bool {
        v >= self.lower - 1e-9 && v <= self.upper + 1e-9
    }
}

pub(crate) fn round10(v: f64) -> f64 {
    let r = (v * 1e10).round() / 1e10;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub ga: Axis,
    pub dat: Axis,
    pub ans: Axis,
}

impl Default for GridSpec {
    /// GA 0.2..=1.1 by 0.1, DAT 0.05..=0.1 by 0.01, ANS 0.15..=0.45 by 0.05.
    fn default() -> Self {
        GridSpec {
            ga: Axis::new(0.2, 1.1, 0.1),
            dat: Axis::new(0.05, 0.1, 0.01),
            ans: Axis::new(0.15, 0.45, 0.05),
        }
    }
}

impl GridSpec {
    pub fn single(point: ParameterPoint) -> Self {
        GridSpec {
            ga: Axis::single(point.ga),
            dat: Axis::single(point.dat),
            ans: Axis::single(point.ans),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ga.validate("GA")?;
        self.dat.validate("DAT")?;
        self.ans.validate("ANS")?;
        if self.ga.lower <= 0.0 || self.dat.lower <= 0.0 || self.ans.lower < 0.0 {
            return Err(Error::invalid(
                "grid must satisfy GA > 0, DAT > 0 and ANS >= 0",
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ga.len() * self.dat.len() * self.ans.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn steps(&self) -> [f64; 3] {
        [self.ga.step, self.dat.step, self.ans.step]
    }

    pub fn covers(&self, p: &ParameterPoint) -> bool {
        self.ga.covers(p.ga) && self.dat.covers(p.dat) && self.ans.covers(p.ans)
    }
}

/// Cartesian product of the three axes, GA outermost and ANS innermost.
pub fn build_grid(spec: &GridSpec) -> Result<Vec<ParameterPoint>> {
    spec.validate()?;
    let (ga, dat, ans) = (spec.ga.values(), spec.dat.values(), spec.ans.values());
    let mut out = Vec::with_capacity(spec.len());
    for &g in &ga {
        for &d in &dat {
            for &a in &ans {
                out.push(ParameterPoint::new(g, d, a)?);
            }
        }
    }
    Ok(out)
}

/// Stream key for one (point, sentence type) cell.
pub fn cell_seed(
    master_seed: u64,
    point: &ParameterPoint,
    sentence_type: &SentenceType,
) -> SeedKey {
    SeedKey::new(master_seed)
        .mix_f64(point.ga)
        .mix_f64(point.dat)
        .mix_f64(point.ans)
        .mix_str(sentence_type.as_str())
}

/// Number of correct scored attachments in `n_iterations` independent trials.
pub fn estimate_correct(
    schedule: &SentenceSchedule,
    point: &ParameterPoint,
    constants: &RetrievalConstants,
    n_iterations: u32,
    master_seed: u64,
) -> Result<u32> {
    if n_iterations == 0 {
        return Err(Error::invalid("n_iterations must be >= 1"));
    }
    let mut rng = cell_seed(master_seed, point, &schedule.sentence_type).stream();
    let mut correct = 0;
    for _ in 0..n_iterations {
        if run_trial(schedule, point, constants, &mut rng)?.scored_correct {
            correct += 1;
        }
    }
    Ok(correct)
}

/// Proportion of trials with the correct scored attachment. Failed
/// retrievals count as incorrect.
pub fn estimate_accuracy(
    schedule: &SentenceSchedule,
    point: &ParameterPoint,
    constants: &RetrievalConstants,
    n_iterations: u32,
    master_seed: u64,
) -> Result<f64> {
    let c = estimate_correct(schedule, point, constants, n_iterations, master_seed)?;
    Ok(f64::from(c) / f64::from(n_iterations))
}

/// Simulated accuracy for every (grid point, sentence type) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct AccuracySurface {
    grid: Vec<ParameterPoint>,
    types: Vec<SentenceType>,
    /// Point-major: `counts[point * types.len() + type]`.
    counts: Vec<u32>,
    pub n_iterations: u32,
    pub master_seed: u64,
    pub constants: RetrievalConstants,
}

/// Contents of the JSON sidecar written next to a surface CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMetadata {
    pub master_seed: u64,
    pub n_iterations: u32,
    pub constants: RetrievalConstants,
    pub sentence_types: Vec<SentenceType>,
    pub cells: usize,
    pub generator: String,
}

pub const SURFACE_HEADER: &str = "ga,dat,ans,sentence_type,n_iter,n_correct,accuracy";

impl AccuracySurface {
    pub fn from_counts(
        grid: Vec<ParameterPoint>,
        types: Vec<SentenceType>,
        counts: Vec<u32>,
        n_iterations: u32,
        master_seed: u64,
        constants: RetrievalConstants,
    ) -> Result<Self> {
        if counts.len() != grid.len() * types.len() {
            return Err(Error::invalid(format!(
                "surface has {} counts for {} points x {} types",
                counts.len(),
                grid.len(),
                types.len()
            )));
        }
        if n_iterations == 0 {
            return Err(Error::invalid("n_iterations must be >= 1"));
        }
        if let Some(c) = counts.iter().find(|&&c| c > n_iterations) {
            return Err(Error::invalid(format!(
                "surface count {c} exceeds n_iterations {n_iterations}"
            )));
        }
        Ok(AccuracySurface {
            grid,
            types,
            counts,
            n_iterations,
            master_seed,
            constants,
        })
    }

    /// Builds a surface from explicit accuracies. Each accuracy is converted
    /// to a count over `n_iterations`.
    pub fn from_accuracies(
        grid: Vec<ParameterPoint>,
        sentence_type: SentenceType,
        accuracies: &[f64],
        n_iterations: u32,
    ) -> Result<Self> {
        if accuracies.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::invalid("accuracies must lie in [0, 1]"));
        }
        let counts = accuracies
            .iter()
            .map(|a| (a * f64::from(n_iterations)).round() as u32)
            .collect();
        Self::from_counts(
            grid,
            vec![sentence_type],
            counts,
            n_iterations,
            0,
            RetrievalConstants::default(),
        )
    }

    pub fn grid(&self) -> &[ParameterPoint] {
        &self.grid
    }

    pub fn sentence_types(&self) -> &[SentenceType] {
        &self.types
    }

    pub fn type_index(&self, t: &SentenceType) -> Option<usize> {
        self.types.iter().position(|x| x == t)
    }

    pub fn cell_count(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, point_idx: usize, type_idx: usize) -> u32 {
        self.counts[point_idx * self.types.len() + type_idx]
    }

    pub fn accuracy(&self, point_idx: usize, type_idx: usize) -> f64 {
        f64::from(self.count(point_idx, type_idx)) / f64::from(self.n_iterations)
    }

    /// Accuracy column for one sentence type, in grid order.
    pub fn accuracies_for(&self, t: &SentenceType) -> Result<Vec<f64>> {
        let ti = self.require_type(t)?;
        Ok((0..self.grid.len()).map(|p| self.accuracy(p, ti)).collect())
    }

    pub fn require_type(&self, t: &SentenceType) -> Result<usize> {
        self.type_index(t).ok_or_else(|| {
            Error::invalid(format!(
                "surface has no cells for sentence type {t} (available: {})",
                self.types
                    .iter()
                    .map(SentenceType::as_str)
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })
    }

    pub fn point_index(&self, p: &ParameterPoint) -> Option<usize> {
        self.grid.iter().position(|q| {
            (q.ga - p.ga).abs() < 1e-9
                && (q.dat - p.dat).abs() < 1e-9
                && (q.ans - p.ans).abs() < 1e-9
        })
    }

    pub fn metadata(&self) -> SurfaceMetadata {
        SurfaceMetadata {
            master_seed: self.master_seed,
            n_iterations: self.n_iterations,
            constants: self.constants,
            sentence_types: self.types.clone(),
            cells: self.cell_count(),
            generator: concat!("cuesim ", env!("CARGO_PKG_VERSION")).to_owned(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.counts.len() * 48);
        out.push_str(SURFACE_HEADER);
        out.push('\n');
        for (pi, p) in self.grid.iter().enumerate() {
            for (ti, t) in self.types.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    p.ga,
                    p.dat,
                    p.ans,
                    t,
                    self.n_iterations,
                    self.count(pi, ti),
                    self.accuracy(pi, ti)
                );
            }
        }
        out
    }

    pub fn metadata_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.metadata()).expect("metadata serializes");
        s.push('\n');
        s
    }

    /// Reads a surface from CSV text plus its metadata sidecar.
    pub fn from_csv(csv_text: &str, meta: &SurfaceMetadata, origin: &Path) -> Result<Self> {
        let parse_err = |line: u64, column: Option<&str>, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            column: column.map(str::to_owned),
            message,
        };
        let mut rdr = csv::ReaderBuilder::new().from_reader(csv_text.as_bytes());
        let header = rdr
            .headers()
            .map_err(|e| parse_err(1, None, e.to_string()))?
            .iter()
            .collect::<Vec<_>>()
            .join(",");
        if header != SURFACE_HEADER {
            return Err(parse_err(
                1,
                None,
                format!("expected header {SURFACE_HEADER:?}, found {header:?}"),
            ));
        }
        let mut grid: Vec<ParameterPoint> = Vec::new();
        let mut index: BTreeMap<[u64; 3], usize> = BTreeMap::new();
        let mut cells: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                parse_err(line, None, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let num = |i: usize, name: &str| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(line, Some(name), format!("{:?}: {e}", &rec[i])))
            };
            let int = |i: usize, name: &str| -> Result<u32> {
                rec[i]
                    .trim()
                    .parse::<u32>()
                    .map_err(|e| parse_err(line, Some(name), format!("{:?}: {e}", &rec[i])))
            };
            let p = ParameterPoint::new(num(0, "ga")?, num(1, "dat")?, num(2, "ans")?)
                .map_err(|e| parse_err(line, None, e.to_string()))?;
            let t: SentenceType = rec[3]
                .trim()
                .parse()
                .map_err(|e: Error| parse_err(line, Some("sentence_type"), e.to_string()))?;
            let ti = meta
                .sentence_types
                .iter()
                .position(|x| *x == t)
                .ok_or_else(|| {
                    parse_err(
                        line,
                        Some("sentence_type"),
                        format!("type {t} is not listed in the metadata"),
                    )
                })?;
            let n_iter = int(4, "n_iter")?;
            if n_iter != meta.n_iterations {
                return Err(parse_err(
                    line,
                    Some("n_iter"),
                    format!("{n_iter} differs from metadata ({})", meta.n_iterations),
                ));
            }
            let n_correct = int(5, "n_correct")?;
            let key = [p.ga.to_bits(), p.dat.to_bits(), p.ans.to_bits()];
            let pi = *index.entry(key).or_insert_with(|| {
                grid.push(p);
                grid.len() - 1
            });
            if cells.insert((pi, ti), n_correct).is_some() {
                return Err(parse_err(line, None, format!("duplicate cell {p} {t}")));
            }
        }
        let nt = meta.sentence_types.len();
        let mut counts = vec![0; grid.len() * nt];
        for pi in 0..grid.len() {
            for ti in 0..nt {
                counts[pi * nt + ti] = *cells.get(&(pi, ti)).ok_or_else(|| {
                    parse_err(
                        0,
                        None,
                        format!("missing cell {} {}", grid[pi], meta.sentence_types[ti]),
                    )
                })?;
            }
        }
        AccuracySurface::from_counts(
            grid,
            meta.sentence_types.clone(),
            counts,
            meta.n_iterations,
            meta.master_seed,
            meta.constants,
        )
    }

    /// Sidecar path for a surface CSV: `surface.csv` → `surface.json`.
    pub fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
        csv_path.with_extension("json")
    }

    pub fn write(&self, csv_path: &Path) -> Result<()> {
        crate::pipeline::write_atomic(csv_path, self.to_csv().as_bytes())?;
        crate::pipeline::write_atomic(
            &Self::sidecar_path(csv_path),
            self.metadata_json().as_bytes(),
        )
    }

    pub fn read(csv_path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(csv_path).map_err(|e| Error::io(csv_path, e))?;
        let side = Self::sidecar_path(csv_path);
        let meta_text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let meta: SurfaceMetadata = serde_json::from_str(&meta_text).map_err(|e| Error::Parse {
            path: side.clone(),
            line: e.line() as u64,
            column: None,
            message: e.to_string(),
        })?;
        Self::from_csv(&text, &meta, csv_path)
    }
}

/// Runs every (grid point, schedule) cell. Each cell draws from its own
/// stream keyed by `master_seed`, the point and the sentence type, so the
/// result does not depend on `parallelism`.
pub fn run_surface(
    spec: &GridSpec,
    schedules: &[SentenceSchedule],
    constants: &RetrievalConstants,
    n_iterations: u32,
    master_seed: u64,
    parallelism: usize,
) -> Result<AccuracySurface> {
    if n_iterations == 0 {
        return Err(Error::invalid("n_iterations must be >= 1"));
    }
    if schedules.is_empty() {
        return Err(Error::invalid("at least one sentence schedule is required"));
    }
    constants.validate()?;
    for (i, s) in schedules.iter().enumerate() {
        s.validate()?;
        if schedules[..i]
            .iter()
            .any(|o| o.sentence_type == s.sentence_type)
        {
            return Err(Error::invalid(format!(
                "sentence type {} given twice",
                s.sentence_type
            )));
        }
    }
    let grid = build_grid(spec)?;
    let nt = schedules.len();
    let n_cells = grid.len() * nt;
    let cell = |c: usize| {
        estimate_correct(
            &schedules[c % nt],
            &grid[c / nt],
            constants,
            n_iterations,
            master_seed,
        )
    };
    let counts = run_cells(n_cells, parallelism, cell)?;
    AccuracySurface::from_counts(
        grid,
        schedules.iter().map(|s| s.sentence_type.clone()).collect(),
        counts,
        n_iterations,
        master_seed,
        *constants,
    )
}

#[cfg(feature = "parallel")]
fn run_cells<F>(n: usize, parallelism: usize, f: F) -> Result<Vec<u32>>
where
    F: Fn(usize) -> Result<u32> + Sync,
{
    use rayon::prelude::*;
    if parallelism <= 1 {
        return (0..n).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(&f).collect())
}

#[cfg(not(feature = "parallel"))]
fn run_cells<F>(n: usize, _parallelism: usize, f: F) -> Result<Vec<u32>>
where
    F: Fn(usize) -> Result<u32>,
{
    (0..n).map(f).collect()
}
