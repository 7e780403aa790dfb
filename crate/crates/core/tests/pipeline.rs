use cuesim_core::dataset::{load_dataset, Dataset};
use cuesim_core::grid::{run_surface, AccuracySurface, Axis, GridSpec};
use cuesim_core::pipeline::{run_pipeline, run_synthetic, PipelineConfig};
use cuesim_core::schedule::build_schedule;
use cuesim_core::synth::{GroupSpec, ParamDist, SynthSpec};
use cuesim_core::{Error, SentenceType};

fn small_config() -> PipelineConfig {
    PipelineConfig {
        iterations: 200,
        grid: GridSpec {
            ga: Axis::new(0.5, 1.0, 0.25),
            dat: Axis::new(0.05, 0.1, 0.05),
            ans: Axis::new(0.15, 0.45, 0.15),
        },
        synthetic: SynthSpec {
            seed: 3,
            n_items: 20,
            groups: vec![
                GroupSpec {
                    group: cuesim_core::fitting::Group::Control,
                    count: 8,
                    ga: ParamDist::Fixed(1.0),
                    dat: ParamDist::Fixed(0.05),
                    ans: ParamDist::Uniform {
                        lower: 0.15,
                        upper: 0.2,
                    },
                },
                GroupSpec {
                    group: cuesim_core::fitting::Group::Iwa,
                    count: 10,
                    ga: ParamDist::Uniform {
                        lower: 0.5,
                        upper: 1.0,
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
        },
        ..PipelineConfig::default()
    }
}

#[test]
fn surface_independent_of_thread_count() {
    let c = small_config();
    let schedules = c.schedules().unwrap();
    let one = run_surface(&c.grid, &schedules, &c.constants, 100, 9, 1).unwrap();
    let many = run_surface(&c.grid, &schedules, &c.constants, 100, 9, 8).unwrap();
    assert_eq!(one, many);
    let other_seed = run_surface(&c.grid, &schedules, &c.constants, 100, 10, 1).unwrap();
    assert_ne!(one, other_seed);
}

#[test]
fn surface_round_trips_through_csv_and_sidecar() {
    let c = small_config();
    let s = run_surface(&c.grid, &c.schedules().unwrap(), &c.constants, 50, 4, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("surface.csv");
    s.write(&path).unwrap();
    assert!(AccuracySurface::sidecar_path(&path).exists());
    assert_eq!(AccuracySurface::read(&path).unwrap(), s);
}

#[test]
fn config_round_trips_through_toml() {
    let c = small_config();
    let back = PipelineConfig::from_toml(&c.to_toml()).unwrap();
    assert_eq!(
        back,
        PipelineConfig {
            parallelism: c.parallelism,
            ..c
        }
    );
    let e = PipelineConfig::from_toml("sede = 3").unwrap_err();
    assert!(e.is_validation());
}

#[test]
fn synthetic_bundle_writes_complete_outputs() {
    let bundle = run_synthetic(&small_config()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    bundle.write_to(dir.path()).unwrap();
    let mut names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "assignments-reflexive.csv",
            "assignments-simple.csv",
            "dataset.csv",
            "fits.csv",
            "generating.csv",
            "report.txt",
            "surface.csv",
            "surface.json",
        ]
    );
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    for needle in [
        "## configuration",
        "## surface",
        "## non-default parameters: simple",
        "## clustering: reflexive",
    ] {
        assert!(report.contains(needle), "{needle}");
    }

    // The written dataset reproduces the same analysis.
    let data = load_dataset(&dir.path().join("dataset.csv")).unwrap();
    assert_eq!(Some(&data), bundle.dataset.as_ref());
    let again = run_pipeline(&data, &small_config()).unwrap();
    assert_eq!(again.report, bundle.report);
}

#[test]
fn missing_sentence_type_is_reported_with_stage() {
    let text = "participant,group,sentence_type,n_items,n_correct\n\
                c1,control,SR,20,19\nc1,control,OR,20,18\n\
                a1,IWA,SR,20,12\na1,IWA,OR,20,9\n";
    let data = Dataset::from_csv(text, std::path::Path::new("d.csv")).unwrap();
    let e = run_pipeline(&data, &small_config()).unwrap_err();
    assert!(matches!(e, Error::Stage { stage: "fit", .. }), "{e}");
    assert!(e.to_string().contains("SR-REFL"), "{e}");
    assert!(e.is_validation());
}

#[test]
fn custom_schedule_file_overrides_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = build_schedule(&SentenceType::sr()).unwrap();
    s.word_duration = 0.6;
    let path = dir.path().join("SR.toml");
    std::fs::write(&path, s.to_toml()).unwrap();
    let c = PipelineConfig {
        schedule_files: vec![path],
        ..small_config()
    };
    let loaded = c.schedules().unwrap();
    assert_eq!(loaded[0], s);
    assert_eq!(loaded[1], build_schedule(&SentenceType::or()).unwrap());
    let bundle = run_synthetic(&c).unwrap();
    assert!(bundle.report.contains("## schedule SR"));
    assert!(bundle.report.contains("word_duration = 0.6"));
}
