//! End-to-end orchestration: surface, fits, non-default tables, clustering and
//! the text report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clustering::{
    self, build_features, confusion_with_mapping, cut_tree, evaluate_discrimination,
    hierarchical_cluster, permutation_null, quantile, render_discrimination, FeatureMode, Linkage,
    Metric,
};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fitting::{
    fit_all, fits_to_csv, tabulate_non_default, FitRecord, FitResult, Tolerances,
};
use crate::grid::{run_surface, AccuracySurface, GridSpec, DEFAULT_ITERATIONS};
use crate::memory::{ParameterPoint, RetrievalConstants};
use crate::schedule::{build_schedule, SentenceSchedule, SentenceType};
use crate::synth::SynthSpec;
use crate::table::Table;

/// A subject/object pair analysed together: one non-default table and one
/// clustering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub name: String,
    pub subject: SentenceType,
    pub object: SentenceType,
}

impl Family {
    pub fn defaults() -> Vec<Family> {
        vec![
            Family {
                name: "simple".into(),
                subject: SentenceType::sr(),
                object: SentenceType::or(),
            },
            Family {
                name: "reflexive".into(),
                subject: SentenceType::sr_refl(),
                object: SentenceType::or_refl(),
            },
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterOptions {
    pub standardize: bool,
    pub metric: Metric,
    pub linkage: Linkage,
    pub features: FeatureMode,
    /// Label permutations for the chance baseline.
    pub permutations: usize,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions {
            standardize: false,
            metric: Metric::Euclidean,
            linkage: Linkage::Complete,
            features: FeatureMode::Concatenate,
            permutations: 1000,
        }
    }
}

/// Everything that determines a report. Serialized verbatim into the report
/// header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub iterations: u32,
    /// Worker threads. Does not affect results and is not reported.
    #[serde(skip)]
    pub parallelism: usize,
    pub grid: GridSpec,
    pub constants: RetrievalConstants,
    pub defaults: ParameterPoint,
    /// Non-default tolerances; half the grid step when absent.
    pub tolerances: Option<Tolerances>,
    pub families: Vec<Family>,
    /// Schedule files overriding the built-in scripts, by sentence type.
    pub schedule_files: Vec<PathBuf>,
    pub clustering: ClusterOptions,
    pub synthetic: SynthSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 1,
            iterations: DEFAULT_ITERATIONS,
            parallelism: 1,
            grid: GridSpec::default(),
            constants: RetrievalConstants::default(),
            defaults: ParameterPoint::DEFAULTS,
            tolerances: None,
            families: Family::defaults(),
            schedule_files: Vec::new(),
            clustering: ClusterOptions::default(),
            synthetic: SynthSpec::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Invalid(m) => Error::invalid(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Sentence types of all families, in family order, without repeats.
    pub fn sentence_types(&self) -> Vec<SentenceType> {
        let mut out: Vec<SentenceType> = Vec::new();
        for f in &self.families {
            for t in [&f.subject, &f.object] {
                if !out.contains(t) {
                    out.push(t.clone());
                }
            }
        }
        out
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances
            .unwrap_or_else(|| Tolerances::half_steps(self.grid.steps()))
    }

    /// Schedules for every sentence type: loaded from `schedule_files` where
    /// given, built in otherwise.
    pub fn schedules(&self) -> Result<Vec<SentenceSchedule>> {
        let loaded: Vec<SentenceSchedule> = self
            .schedule_files
            .iter()
            .map(|p| SentenceSchedule::load(p))
            .collect::<Result<_>>()?;
        self.sentence_types()
            .iter()
            .map(|t| match loaded.iter().find(|s| &s.sentence_type == t) {
                Some(s) => Ok(s.clone()),
                None => build_schedule(t),
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be >= 1"));
        }
        if self.families.is_empty() {
            return Err(Error::invalid(
                "at least one sentence-type family is required",
            ));
        }
        self.grid.validate()?;
        self.constants.validate()?;
        self.defaults.validate()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterSummary {
    pub family: String,
    pub rows: usize,
    pub assignments_csv: String,
    pub accuracy: f64,
    pub null_p05: f64,
    pub null_p95: f64,
    pub table: String,
}

/// All outputs of one run, held in memory until written.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportBundle {
    pub surface: AccuracySurface,
    pub fits: Vec<FitResult>,
    pub clusters: Vec<ClusterSummary>,
    pub report: String,
    /// Present when the run generated its own cohort.
    pub dataset: Option<Dataset>,
    pub generating_csv: Option<String>,
}

impl ReportBundle {
    /// Files written by [`ReportBundle::write_to`], relative to the output
    /// directory, in write order.
    pub fn files(&self) -> Vec<(String, Vec<u8>)> {
        let mut out = vec![
            ("surface.csv".to_owned(), self.surface.to_csv().into_bytes()),
            (
                "surface.json".to_owned(),
                self.surface.metadata_json().into_bytes(),
            ),
            ("fits.csv".to_owned(), fits_to_csv(&self.fits).into_bytes()),
        ];
        for c in &self.clusters {
            out.push((
                format!("assignments-{}.csv", c.family),
                c.assignments_csv.clone().into_bytes(),
            ));
        }
        if let Some(d) = &self.dataset {
            out.push(("dataset.csv".to_owned(), d.to_csv().into_bytes()));
        }
        if let Some(g) = &self.generating_csv {
            out.push(("generating.csv".to_owned(), g.clone().into_bytes()));
        }
        out.push(("report.txt".to_owned(), self.report.clone().into_bytes()));
        out
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, bytes) in self.files() {
            write_atomic(&dir.join(name), &bytes)?;
        }
        Ok(())
    }
}

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Builds the surface and runs the analysis.
pub fn run_pipeline(dataset: &Dataset, config: &PipelineConfig) -> Result<ReportBundle> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let schedules = config.schedules().map_err(|e| e.in_stage("schedules"))?;
    let surface = run_surface(
        &config.grid,
        &schedules,
        &config.constants,
        config.iterations,
        config.seed,
        config.parallelism,
    )
    .map_err(|e| e.in_stage("grid"))?;
    analyze(dataset, surface, config)
}

/// Generates a synthetic cohort from the surface, then analyzes it.
pub fn run_synthetic(config: &PipelineConfig) -> Result<ReportBundle> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let schedules = config.schedules().map_err(|e| e.in_stage("schedules"))?;
    let surface = run_surface(
        &config.grid,
        &schedules,
        &config.constants,
        config.iterations,
        config.seed,
        config.parallelism,
    )
    .map_err(|e| e.in_stage("grid"))?;
    let cohort =
        crate::synth::generate_synthetic(&config.synthetic, &surface, &config.sentence_types())
            .map_err(|e| e.in_stage("synth"))?;
    let mut bundle = analyze(&cohort.dataset, surface, config)?;
    bundle.generating_csv = Some(cohort.generating_csv());
    bundle.dataset = Some(cohort.dataset);
    Ok(bundle)
}

/// Fits, tables and clustering over an existing surface.
pub fn analyze(
    dataset: &Dataset,
    surface: AccuracySurface,
    config: &PipelineConfig,
) -> Result<ReportBundle> {
    let types = config.sentence_types();
    let observations = dataset
        .observations(&types)
        .map_err(|e| e.in_stage("fit"))?;
    let fits = fit_all(
        &observations,
        &surface,
        &config.defaults,
        &config.tolerances(),
    )
    .map_err(|e| e.in_stage("fit"))?;
    let records: Vec<FitRecord> = fits.iter().map(FitRecord::from).collect();

    let mut report = String::new();
    write_header(&mut report, dataset, config);
    for path in &config.schedule_files {
        let sched = SentenceSchedule::load(path).map_err(|e| e.in_stage("schedules"))?;
        let _ = writeln!(
            report,
            "## schedule {} ({})\n",
            sched.sentence_type,
            path.display()
        );
        report.push_str("```toml\n");
        report.push_str(&sched.to_toml());
        report.push_str("```\n\n");
    }
    write_surface_section(&mut report, &surface, config).map_err(|e| e.in_stage("report"))?;

    for family in &config.families {
        let table = tabulate_non_default(&fits, &[family.subject.clone(), family.object.clone()]);
        let _ = writeln!(report, "## non-default parameters: {}\n", family.name);
        report.push_str(&table.render());
        report.push('\n');
    }

    let mut clusters = Vec::new();
    for family in &config.families {
        let summary =
            cluster_family(&records, family, config).map_err(|e| e.in_stage("cluster"))?;
        let _ = writeln!(report, "## clustering: {}\n", family.name);
        let opts = &config.clustering;
        let _ = writeln!(
            report,
            "features, {:?}; standardize, {}; metric, {:?}; linkage, {}; rows, {}\n",
            opts.features, opts.standardize, opts.metric, opts.linkage, summary.rows
        );
        report.push_str(&summary.table);
        let _ = writeln!(
            report,
            "\ndiscrimination accuracy, {:.4}\npermutation null 5th-95th percentile, {:.4} to {:.4} ({} permutations)\n",
            summary.accuracy, summary.null_p05, summary.null_p95, opts.permutations
        );
        clusters.push(summary);
    }

    Ok(ReportBundle {
        surface,
        fits,
        clusters,
        report,
        dataset: None,
        generating_csv: None,
    })
}

fn write_header(out: &mut String, dataset: &Dataset, config: &PipelineConfig) {
    let _ = writeln!(out, "# cuesim report\n");
    let _ = writeln!(out, "generator, cuesim {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(
        out,
        "participants, {} ({} control, {} IWA)",
        dataset.len(),
        dataset.group_count(crate::fitting::Group::Control),
        dataset.group_count(crate::fitting::Group::Iwa)
    );
    if !dataset.provenance.is_empty() {
        let _ = writeln!(
            out,
            "provenance, {}",
            dataset.provenance.replace('\n', " / ")
        );
    }
    let _ = writeln!(out, "\n## configuration\n");
    out.push_str("```toml\n");
    out.push_str(&config.to_toml());
    out.push_str("```\n\n");
}

fn write_surface_section(
    out: &mut String,
    surface: &AccuracySurface,
    config: &PipelineConfig,
) -> Result<()> {
    let _ = writeln!(out, "## surface\n");
    let _ = writeln!(
        out,
        "cells, {}\ngrid points, {}\niterations per cell, {}\n",
        surface.cell_count(),
        surface.grid().len(),
        surface.n_iterations
    );
    let default_idx = surface.point_index(&config.defaults);
    let mut t = Table::new(
        ["type", "mean", "min", "max", "at defaults"]
            .iter()
            .map(|s| (*s).to_owned())
            .collect(),
    );
    for ty in surface.sentence_types() {
        let acc = surface.accuracies_for(ty)?;
        let mean = acc.iter().sum::<f64>() / acc.len() as f64;
        let min = acc.iter().copied().fold(f64::INFINITY, f64::min);
        let max = acc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let at_default = default_idx
            .map(|i| format!("{:.4}", acc[i]))
            .unwrap_or_else(|| "-".into());
        t.push(vec![
            ty.to_string(),
            format!("{mean:.4}"),
            format!("{min:.4}"),
            format!("{max:.4}"),
            at_default,
        ]);
    }
    out.push_str(&t.render());
    out.push('\n');
    Ok(())
}

pub fn cluster_family(
    fits: &[FitRecord],
    family: &Family,
    config: &PipelineConfig,
) -> Result<ClusterSummary> {
    let opts = &config.clustering;
    let relevant: Vec<FitRecord> = fits
        .iter()
        .filter(|f| f.sentence_type == family.subject || f.sentence_type == family.object)
        .cloned()
        .collect();
    let features = build_features(
        &relevant,
        &family.subject,
        &family.object,
        opts.features,
        opts.standardize,
    )?;
    let dendrogram = hierarchical_cluster(&features.points(), opts.metric, opts.linkage)?;
    let labels = cut_tree(&dendrogram, 2)?;
    let groups = features.groups();
    let overall = evaluate_discrimination(&labels, &groups)?;
    let null_seed = crate::seed::SeedKey::new(config.seed)
        .mix_str(&family.name)
        .value();
    let null = permutation_null(&labels, &groups, opts.permutations.max(1), null_seed)?;

    let table = match opts.features {
        FeatureMode::Concatenate => {
            let label = format!("{} + {}", family.subject, family.object);
            render_discrimination(&[(&label, &overall)])
        }
        FeatureMode::Pool => {
            let mut blocks = Vec::new();
            for t in [&family.subject, &family.object] {
                let idx: Vec<usize> = features
                    .rows
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| r.sentence_type.as_ref() == Some(t))
                    .map(|(i, _)| i)
                    .collect();
                let a: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
                let g: Vec<_> = idx.iter().map(|&i| groups[i]).collect();
                blocks.push((
                    t.to_string(),
                    confusion_with_mapping(&a, &g, overall.cluster_groups),
                ));
            }
            let refs: Vec<(&str, &clustering::Discrimination)> =
                blocks.iter().map(|(l, d)| (l.as_str(), d)).collect();
            render_discrimination(&refs)
        }
    };

    Ok(ClusterSummary {
        family: family.name.clone(),
        rows: features.len(),
        assignments_csv: clustering::assignments_to_csv(&features, &labels),
        accuracy: overall.accuracy(),
        null_p05: quantile(&null, 0.05),
        null_p95: quantile(&null, 0.95),
        table,
    })
}
