mod common;

use common::{componentwise_mean, exhaustive_ties, random_surface};
use cuesim_core::fitting::{
    count_vector, fit_participant, flag_non_default, tabulate_non_default, FitResult, Group,
    NonDefaultFlags, Tolerances,
};
use cuesim_core::grid::{build_grid, AccuracySurface, GridSpec};
use cuesim_core::seed::SeedKey;
use cuesim_core::{ParameterPoint, SentenceType};
use rand::Rng;

#[test]
fn tie_sets_match_exhaustive_scan() {
    let t = SentenceType::sr();
    let mut rng = SeedKey::new(21).stream();
    for case in 0..500 {
        let surface = random_surface(&mut rng, &t);
        let acc = surface.accuracies_for(&t).unwrap();
        let observed = f64::from(rng.gen_range(0..=20u32)) / 20.0;
        let fit = fit_participant(observed, &surface, &t).unwrap();
        let want: Vec<ParameterPoint> = exhaustive_ties(&acc, observed)
            .into_iter()
            .map(|i| surface.grid()[i])
            .collect();
        assert_eq!(fit.tie_set, want, "case {case}");
        let m = componentwise_mean(&want);
        assert!((fit.fitted.ga - m[0]).abs() < 1e-12);
        assert!((fit.fitted.dat - m[1]).abs() < 1e-12);
        assert!((fit.fitted.ans - m[2]).abs() < 1e-12);
    }
}

#[test]
fn equidistant_pair_averages_componentwise() {
    let grid = build_grid(&GridSpec::default()).unwrap();
    let t = SentenceType::or();
    let mut acc = vec![0.0; grid.len()];
    let (a, b) = (17, 301);
    acc[a] = 0.6;
    acc[b] = 0.8;
    let surface = AccuracySurface::from_accuracies(grid.clone(), t.clone(), &acc, 1000).unwrap();
    let fit = fit_participant(0.7, &surface, &t).unwrap();
    assert_eq!(fit.tie_set, vec![grid[a], grid[b]]);
    assert!((fit.fitted.ga - (grid[a].ga + grid[b].ga) / 2.0).abs() < 1e-12);
    assert!((fit.fitted.dat - (grid[a].dat + grid[b].dat) / 2.0).abs() < 1e-12);
    assert!((fit.fitted.ans - (grid[a].ans + grid[b].ans) / 2.0).abs() < 1e-12);
    assert!((fit.residual - 0.1).abs() < 1e-12);
}

fn fit_with(p: NonDefaultFlags, g: Group, t: &SentenceType) -> FitResult {
    let pt = ParameterPoint::DEFAULTS;
    FitResult {
        participant: "x".into(),
        group: g,
        sentence_type: t.clone(),
        tie_set: vec![pt],
        fitted: pt,
        residual: 0.0,
        non_default: p,
    }
}

#[test]
fn single_counts_dominate_conjunctions() {
    let mut rng = SeedKey::new(22).stream();
    let types = [SentenceType::sr(), SentenceType::or()];
    let fits: Vec<FitResult> = (0..300)
        .map(|i| {
            let f = NonDefaultFlags {
                ga: rng.gen(),
                dat: rng.gen(),
                ans: rng.gen(),
            };
            fit_with(f, Group::ALL[i % 2], &types[(i / 2) % 2])
        })
        .collect();
    let table = tabulate_non_default(&fits, &types);
    for t in &types {
        for g in Group::ALL {
            let row = table.row(t, g).unwrap();
            let c = row.counts;
            // GA, DAT, ANS, GA+DAT, GA+ANS, DAT+ANS, all three.
            assert!(c[3] <= c[0].min(c[1]));
            assert!(c[4] <= c[0].min(c[2]));
            assert!(c[5] <= c[1].min(c[2]));
            assert!(c[6] <= c[3].min(c[4]).min(c[5]));
            let direct: [u32; 7] = fits
                .iter()
                .filter(|f| &f.sentence_type == t && f.group == g)
                .map(|f| count_vector(&f.non_default))
                .fold([0; 7], |mut acc, v| {
                    for k in 0..7 {
                        acc[k] += v[k];
                    }
                    acc
                });
            assert_eq!(c, direct);
        }
    }
}

#[test]
fn flags_use_strict_tolerance() {
    let d = ParameterPoint::DEFAULTS;
    let eps = Tolerances::default();
    let at_edge = ParameterPoint {
        ga: 0.95,
        dat: 0.055,
        ans: 0.175,
    };
    assert!(!flag_non_default(&at_edge, &d, &eps).unwrap().any());
    let beyond = ParameterPoint {
        ga: 0.9,
        dat: 0.07,
        ans: 0.15,
    };
    let f = flag_non_default(&beyond, &d, &eps).unwrap();
    assert!(f.ga && f.dat && !f.ans);
}
