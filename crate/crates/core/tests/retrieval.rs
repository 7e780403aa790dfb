mod common;

use cuesim_core::memory::{
    base_level, mismatch_penalty, retrieval_latency, retrieve, spreading, Chunk, CueSet,
};
use cuesim_core::schedule::{build_schedule, run_trial, ScheduleEvent, SCORED_LABEL};
use cuesim_core::seed::SeedKey;
use cuesim_core::{ParameterPoint, RetrievalConstants, SentenceType};
use proptest::prelude::*;

const FEATURES: [&str; 3] = ["pos", "animate", "case"];
const VALUES: [&str; 3] = ["a", "b", "c"];

/// A chunk with a random subset of features (at least one) and an encoding
/// time strictly before `now = 10`.
fn chunk_strategy(i: usize) -> impl Strategy<Value = Chunk> {
    (
        prop::collection::vec(prop::option::of(0..VALUES.len()), FEATURES.len()),
        0.0f64..9.99,
    )
        .prop_filter_map("needs a feature", move |(vals, t)| {
            let feats: Vec<(&str, &str)> = FEATURES
                .iter()
                .zip(&vals)
                .filter_map(|(f, v)| v.map(|v| (*f, VALUES[v])))
                .collect();
            if feats.is_empty() {
                None
            } else {
                Some(Chunk::new(format!("c{i}"), feats, t).unwrap())
            }
        })
}

fn scene() -> impl Strategy<Value = (Vec<Chunk>, CueSet)> {
    let chunks = (1usize..=4).prop_flat_map(|n| (0..n).map(chunk_strategy).collect::<Vec<_>>());
    let cues = (1usize..=3, prop::collection::vec(0..VALUES.len(), 3)).prop_map(|(j, v)| {
        CueSet::from_pairs((0..j).map(|k| (FEATURES[k], VALUES[v[k]]))).unwrap()
    });
    (chunks, cues)
}

fn point() -> impl Strategy<Value = ParameterPoint> {
    (0.1f64..2.0, 0.01f64..0.2, 0.0f64..0.6)
        .prop_map(|(g, d, a)| ParameterPoint::new(g, d, a).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn winner_is_first_argmax_and_threshold_decides(
        (chunks, cues) in scene(),
        p in point(),
        tau in -3.0f64..3.0,
        seed in any::<u64>(),
    ) {
        let k = RetrievalConstants { threshold: tau, ..RetrievalConstants::default() };
        let mut rng = SeedKey::new(seed).stream();
        let out = retrieve(&chunks, &cues, &p, &k, 10.0, &mut rng).unwrap();
        let totals: Vec<f64> = out.per_chunk.iter().map(|(_, b)| b.total).collect();
        let max = totals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let first = totals.iter().position(|&t| t == max).unwrap();
        if max >= tau {
            prop_assert_eq!(out.winner.as_ref(), Some(chunks[first].id()));
            prop_assert_eq!(out.latency, 0.2 * (-max).exp());
        } else {
            prop_assert!(out.winner.is_none());
            prop_assert_eq!(out.latency, 0.2 * (-tau).exp());
        }
    }

    #[test]
    fn activation_is_sum_of_terms(
        (chunks, cues) in scene(),
        p in point(),
        seed in any::<u64>(),
    ) {
        let k = RetrievalConstants::default();
        let mut rng = SeedKey::new(seed).stream();
        let out = retrieve(&chunks, &cues, &p, &k, 10.0, &mut rng).unwrap();
        let fan = cues.fan(&chunks);
        for (c, (id, b)) in chunks.iter().zip(&out.per_chunk) {
            prop_assert_eq!(c.id(), id);
            prop_assert_eq!(b.total, b.base + b.spread + b.penalty + b.noise);
            prop_assert_eq!(b.base, base_level(c, 10.0, 0.5).unwrap());
            prop_assert_eq!(b.spread, spreading(c, &cues, p.ga, &fan, 1.5).unwrap());
            prop_assert_eq!(b.penalty, mismatch_penalty(c, &cues, -1.5));
            if p.ans == 0.0 {
                prop_assert_eq!(b.noise, 0.0);
            }
        }
    }

    #[test]
    fn zero_noise_is_deterministic(
        (chunks, cues) in scene(),
        p in point(),
        s1 in any::<u64>(),
        s2 in any::<u64>(),
    ) {
        let p = ParameterPoint { ans: 0.0, ..p };
        let k = RetrievalConstants::default();
        let a = retrieve(&chunks, &cues, &p, &k, 10.0, &mut SeedKey::new(s1).stream()).unwrap();
        let b = retrieve(&chunks, &cues, &p, &k, 10.0, &mut SeedKey::new(s2).stream()).unwrap();
        prop_assert_eq!(a, b);
    }

    /// With at most four candidates every associative strength is positive
    /// (ln 4 < 1.5), so spreading cannot fall as GA rises.
    #[test]
    fn spreading_non_decreasing_in_ga(
        (chunks, cues) in scene(),
        g1 in 0.0f64..3.0,
        dg in 0.0f64..3.0,
    ) {
        let fan = cues.fan(&chunks);
        for c in &chunks {
            let lo = spreading(c, &cues, g1, &fan, 1.5).unwrap();
            let hi = spreading(c, &cues, g1 + dg, &fan, 1.5).unwrap();
            prop_assert!(hi >= lo - 1e-12, "{} < {}", hi, lo);
        }
    }

    #[test]
    fn latency_strictly_decreasing(a in -10.0f64..10.0, da in 1e-6f64..5.0) {
        prop_assert!(retrieval_latency(a + da, 0.2) < retrieval_latency(a, 0.2));
    }
}

#[test]
fn sr_zero_noise_trace_matches_hand_computation() {
    let s = build_schedule(&SentenceType::sr()).unwrap();
    let p = ParameterPoint::new(1.0, 0.05, 0.0).unwrap();
    let k = RetrievalConstants::default();
    let out = run_trial(&s, &p, &k, &mut SeedKey::new(0).stream()).unwrap();
    let e = out.entry(SCORED_LABEL).unwrap();

    // np1 at 0, who at 0.55, hugged at 1.1; three firings of 0.05 after each
    // 0.4 s word puts the retrieval at 1.65.
    assert!((e.at - 1.65).abs() < 1e-12, "{}", e.at);
    let expect = [
        ("np1", 1.5 - 0.5 * 1.65f64.ln()),
        ("who", -0.5 * 1.1f64.ln() - 4.5),
        ("v-emb", -0.5 * 0.55f64.ln() - 4.5),
    ];
    assert_eq!(e.outcome.per_chunk.len(), expect.len());
    for ((id, b), (want_id, want)) in e.outcome.per_chunk.iter().zip(expect) {
        assert_eq!(id.as_str(), want_id);
        assert!(
            (b.total - want).abs() < 1e-12,
            "{id}: {} vs {want}",
            b.total
        );
    }
    assert!((expect[0].1 - 1.2496).abs() < 1e-4);
    assert!(out.scored_correct);
    assert_eq!(e.outcome.latency, 0.2 * (-expect[0].1).exp());
}

#[test]
fn clock_is_sum_of_words_firings_and_latencies() {
    for t in SentenceType::builtin() {
        let s = build_schedule(&t).unwrap();
        for (i, p) in [(0.2, 0.1, 0.45), (1.0, 0.05, 0.15), (0.6, 0.07, 0.3)]
            .iter()
            .enumerate()
        {
            let p = ParameterPoint::new(p.0, p.1, p.2).unwrap();
            let out = run_trial(
                &s,
                &p,
                &RetrievalConstants::default(),
                &mut SeedKey::new(i as u64).stream(),
            )
            .unwrap();
            let words = s.encode_count() as f64 * s.word_duration;
            let firings = s.firing_count() as f64 * p.dat;
            let lat: f64 = out.retrieval_log.iter().map(|e| e.outcome.latency).sum();
            assert!(
                (out.total_time - (words + firings + lat)).abs() < 1e-9,
                "{t}"
            );
        }
    }
}

#[test]
fn retrieval_times_grow_with_dat() {
    let s = build_schedule(&SentenceType::or()).unwrap();
    let k = RetrievalConstants::default();
    let mut prev = f64::NEG_INFINITY;
    for dat in [0.05, 0.06, 0.07, 0.08, 0.09, 0.1] {
        let p = ParameterPoint::new(1.0, dat, 0.0).unwrap();
        let out = run_trial(&s, &p, &k, &mut SeedKey::new(0).stream()).unwrap();
        let at = out.entry(SCORED_LABEL).unwrap().at;
        assert!(at > prev);
        prev = at;
    }
}

#[test]
fn shipped_schedule_files_match_builtin() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("schedules");
    for t in SentenceType::builtin() {
        let loaded =
            cuesim_core::schedule::SentenceSchedule::load(&dir.join(format!("{t}.toml"))).unwrap();
        assert_eq!(loaded, build_schedule(&t).unwrap(), "{t}");
        loaded.validate().unwrap();
    }
}

#[test]
fn or_schedule_resolves_filler_gap_before_scoring() {
    let s = build_schedule(&SentenceType::or()).unwrap();
    let labels: Vec<&str> = s
        .events
        .iter()
        .filter_map(|e| match e {
            ScheduleEvent::Retrieve { label, .. } => Some(label.as_str()),
            _ => None,
        })
        .collect();
    assert_eq!(labels, ["filler-gap", SCORED_LABEL]);
}

#[test]
fn single_candidate_success_matches_logistic_cdf() {
    // One chunk whose deterministic activation is exactly 0 at now = 1.
    let c = Chunk::new("x", [("pos", "n")], 0.0).unwrap();
    let cues = CueSet::from_pairs([("pos", "m")]).unwrap();
    let k = RetrievalConstants {
        mismatch_penalty: 0.0,
        threshold: -0.4,
        ..RetrievalConstants::default()
    };
    let p = ParameterPoint::new(1.0, 0.05, 0.2).unwrap();
    let mut rng = SeedKey::new(11).stream();
    let n = 50_000;
    let hits = (0..n)
        .filter(|_| {
            retrieve(std::slice::from_ref(&c), &cues, &p, &k, 1.0, &mut rng)
                .unwrap()
                .succeeded()
        })
        .count();
    let want = 1.0 - common::logistic_cdf(-0.4, 0.2);
    assert!((hits as f64 / n as f64 - want).abs() < 0.01);
}
