//! Timed parse scripts for the relative-clause sentence types.
//!
//! A schedule is an ordered list of events run against a simulation clock:
//! each encoded word takes `word_duration` seconds, each production firing
//! takes DAT seconds and each retrieval takes its latency. A retrieval sees
//! every chunk encoded so far as a candidate.
//!
//! Exactly one retrieval is scored: the embedded verb retrieving its subject.
//! Reflexive sentence types add one unscored retrieval of the reflexive's
//! antecedent; its latency only affects the clock.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::{self, Chunk, ChunkId, Cue, CueSet, ParameterPoint, RetrievalConstants};

pub const SCORED_LABEL: &str = "embedded-verb-subject";
pub const REFLEXIVE_LABEL: &str = "reflexive-antecedent";
pub const FILLER_GAP_LABEL: &str = "filler-gap";

/// Sentence-type label, e.g. `SR` or `OR-REFL`.
///
/// Four types have built-in schedules. Schedule files may introduce others.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SentenceType(String);

impl SentenceType {
    pub const BUILTIN: [&'static str; 4] = ["SR", "OR", "SR-REFL", "OR-REFL"];

    pub fn new(label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if label.is_empty()
            || !label
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(Error::invalid(format!(
                "sentence type {label:?} must be non-empty and use only letters, digits, '-' or '_'"
            )));
        }
        Ok(SentenceType(label))
    }

    pub fn sr() -> Self {
        SentenceType("SR".into())
    }

    pub fn or() -> Self {
        SentenceType("OR".into())
    }

    pub fn sr_refl() -> Self {
        SentenceType("SR-REFL".into())
    }

    pub fn or_refl() -> Self {
        SentenceType("OR-REFL".into())
    }

    pub fn builtin() -> Vec<SentenceType> {
        Self::BUILTIN
            .iter()
            .map(|s| SentenceType((*s).into()))
            .collect()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_reflexive(&self) -> bool {
        self.0.ends_with("-REFL")
    }
}

impl fmt::Display for SentenceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for SentenceType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SentenceType::new(s)
    }
}

impl TryFrom<String> for SentenceType {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        SentenceType::new(s)
    }
}

impl From<SentenceType> for String {
    fn from(t: SentenceType) -> Self {
        t.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleEvent {
    /// One heard word, encoded as a chunk at the current clock time.
    EncodeChunk {
        id: ChunkId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        word: Option<String>,
        features: std::collections::BTreeMap<String, String>,
    },
    FireProductions {
        count: u32,
    },
    Retrieve {
        label: String,
        target: ChunkId,
        #[serde(default)]
        scored: bool,
        cues: CueSet,
    },
}

impl ScheduleEvent {
    fn encode(id: &str, word: &str, features: &[(&str, &str)]) -> Self {
        ScheduleEvent::EncodeChunk {
            id: id.into(),
            word: Some(word.into()),
            features: features
                .iter()
                .map(|(k, v)| ((*k).to_owned(), (*v).to_owned()))
                .collect(),
        }
    }

    fn fire(count: u32) -> Self {
        ScheduleEvent::FireProductions { count }
    }

    fn retrieve(label: &str, target: &str, scored: bool, cues: &[(&str, &str)]) -> Self {
        ScheduleEvent::Retrieve {
            label: label.into(),
            target: target.into(),
            scored,
            cues: CueSet::new(cues.iter().map(|(f, v)| Cue::new(*f, *v)).collect())
                .expect("built-in cue sets are valid"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentenceSchedule {
    pub sentence_type: SentenceType,
    /// Seconds per heard word.
    pub word_duration: f64,
    pub events: Vec<ScheduleEvent>,
}

impl SentenceSchedule {
    pub fn validate(&self) -> Result<()> {
        let ctx = |msg: String| Error::invalid(format!("schedule {}: {msg}", self.sentence_type));
        if !(self.word_duration > 0.0 && self.word_duration.is_finite()) {
            return Err(ctx(format!(
                "word_duration must be > 0, got {}",
                self.word_duration
            )));
        }
        let mut encoded: Vec<&ChunkId> = Vec::new();
        let mut scored = 0;
        let mut reflexive = 0;
        for (i, ev) in self.events.iter().enumerate() {
            match ev {
                ScheduleEvent::EncodeChunk { id, features, .. } => {
                    if encoded.contains(&id) {
                        return Err(ctx(format!("event {i}: chunk {id} encoded twice")));
                    }
                    if features.is_empty() {
                        return Err(ctx(format!("event {i}: chunk {id} has no features")));
                    }
                    encoded.push(id);
                }
                ScheduleEvent::FireProductions { count } => {
                    if *count == 0 {
                        return Err(ctx(format!("event {i}: fire count must be >= 1")));
                    }
                }
                ScheduleEvent::Retrieve {
                    label,
                    target,
                    scored: is_scored,
                    ..
                } => {
                    if encoded.is_empty() {
                        return Err(ctx(format!("event {i}: retrieval before any encoding")));
                    }
                    if !encoded.contains(&target) {
                        return Err(ctx(format!(
                            "event {i}: target {target} is not encoded before the retrieval"
                        )));
                    }
                    if *is_scored {
                        if label != SCORED_LABEL {
                            return Err(ctx(format!(
                                "event {i}: scored retrieval must be labelled {SCORED_LABEL:?}, got {label:?}"
                            )));
                        }
                        scored += 1;
                    }
                    if label == REFLEXIVE_LABEL {
                        if *is_scored {
                            return Err(ctx(format!(
                                "event {i}: reflexive retrieval must be unscored"
                            )));
                        }
                        reflexive += 1;
                    }
                }
            }
        }
        if scored != 1 {
            return Err(ctx(format!(
                "expected exactly one scored {SCORED_LABEL:?} retrieval, found {scored}"
            )));
        }
        let want_reflexive = usize::from(self.sentence_type.is_reflexive());
        if reflexive != want_reflexive {
            return Err(ctx(format!(
                "expected {want_reflexive} {REFLEXIVE_LABEL:?} retrieval(s), found {reflexive}"
            )));
        }
        Ok(())
    }

    pub fn encode_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, ScheduleEvent::EncodeChunk { .. }))
            .count()
    }

    pub fn firing_count(&self) -> u64 {
        self.events
            .iter()
            .map(|e| match e {
                ScheduleEvent::FireProductions { count } => u64::from(*count),
                _ => 0,
            })
            .sum()
    }

    pub fn retrievals(&self) -> impl Iterator<Item = (&str, &ChunkId, bool, &CueSet)> {
        self.events.iter().filter_map(|e| match e {
            ScheduleEvent::Retrieve {
                label,
                target,
                scored,
                cues,
            } => Some((label.as_str(), target, *scored, cues)),
            _ => None,
        })
    }

    pub fn scored_target(&self) -> Option<&ChunkId> {
        self.retrievals().find(|r| r.2).map(|r| r.1)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: SentenceSchedule =
            toml::from_str(text).map_err(|e| Error::invalid(format!("schedule file: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schedules always serialize")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Invalid(msg) => Error::invalid(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

const WORD_DURATION: f64 = 0.4;
const FIRINGS_PER_WORD: u32 = 3;
const OR_EXTRA_FIRINGS: u32 = 2;

const NOMINAL: (&str, &str) = ("pos", "nominal");
const ANIMATE: (&str, &str) = ("animate", "yes");

/// The built-in schedule for one of the four supported sentence types.
pub fn build_schedule(sentence_type: &SentenceType) -> Result<SentenceSchedule> {
    let woman_sr: &[(&str, &str)] = &[NOMINAL, ANIMATE, ("case", "nom")];
    let woman_or: &[(&str, &str)] = &[NOMINAL, ANIMATE, ("case", "acc")];
    let girl_sr: &[(&str, &str)] = &[NOMINAL, ANIMATE, ("case", "acc")];
    let girl_or: &[(&str, &str)] = &[NOMINAL, ANIMATE, ("case", "nom")];
    let who: &[(&str, &str)] = &[("pos", "relpro")];
    let verb: &[(&str, &str)] = &[("pos", "verb")];
    let subject_cues: &[(&str, &str)] = &[NOMINAL, ANIMATE, ("case", "nom")];
    let object_cues: &[(&str, &str)] = &[NOMINAL, ANIMATE, ("case", "acc")];

    let word = |id: &str, w: &str, f: &[(&str, &str)]| {
        [
            ScheduleEvent::encode(id, w, f),
            ScheduleEvent::fire(FIRINGS_PER_WORD),
        ]
    };

    let mut events = Vec::new();
    let (subject_relative, reflexive) = match sentence_type.as_str() {
        "SR" => (true, false),
        "OR" => (false, false),
        "SR-REFL" => (true, true),
        "OR-REFL" => (false, true),
        other => {
            return Err(Error::invalid(format!(
                "unknown sentence type {other:?}; supported: {}",
                SentenceType::BUILTIN.join(", ")
            )))
        }
    };

    if subject_relative {
        // the woman who hugged | the girl washed (herself)
        events.extend(word("np1", "the woman", woman_sr));
        events.extend(word("who", "who", who));
        events.extend(word("v-emb", "hugged", verb));
        events.push(ScheduleEvent::retrieve(
            SCORED_LABEL,
            "np1",
            true,
            subject_cues,
        ));
        events.extend(word("np2", "the girl", girl_sr));
    } else {
        // the woman who the girl hugged | washed (herself)
        events.extend(word("np1", "the woman", woman_or));
        events.extend(word("who", "who", who));
        events.extend(word("np2", "the girl", girl_or));
        events.extend(word("v-emb", "hugged", verb));
        events.push(ScheduleEvent::retrieve(
            FILLER_GAP_LABEL,
            "np1",
            false,
            object_cues,
        ));
        events.push(ScheduleEvent::fire(OR_EXTRA_FIRINGS));
        events.push(ScheduleEvent::retrieve(
            SCORED_LABEL,
            "np2",
            true,
            subject_cues,
        ));
    }
    events.extend(word("v-main", "washed", verb));
    if reflexive {
        events.extend(word("refl", "herself", &[("pos", "reflexive")]));
        events.push(ScheduleEvent::retrieve(
            REFLEXIVE_LABEL,
            "np1",
            false,
            &[NOMINAL, ANIMATE],
        ));
    }

    let schedule = SentenceSchedule {
        sentence_type: sentence_type.clone(),
        word_duration: WORD_DURATION,
        events,
    };
    debug_assert!(schedule.validate().is_ok());
    Ok(schedule)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalLogEntry {
    pub label: String,
    pub target: ChunkId,
    pub scored: bool,
    /// Clock time at which the retrieval started.
    pub at: f64,
    pub outcome: memory::RetrievalOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub scored_correct: bool,
    pub scored_failed: bool,
    pub retrieval_log: Vec<RetrievalLogEntry>,
    pub total_time: f64,
}

impl TrialOutcome {
    pub fn entry(&self, label: &str) -> Option<&RetrievalLogEntry> {
        self.retrieval_log.iter().find(|e| e.label == label)
    }
}

/// Runs one trial. The schedule is assumed valid (see
/// [`SentenceSchedule::validate`]); a malformed schedule yields an error
/// rather than a panic.
pub fn run_trial<R: Rng + ?Sized>(
    schedule: &SentenceSchedule,
    point: &ParameterPoint,
    constants: &RetrievalConstants,
    rng: &mut R,
) -> Result<TrialOutcome> {
    let mut clock = 0.0;
    let mut chunks: Vec<Chunk> = Vec::with_capacity(schedule.encode_count());
    let mut log = Vec::new();
    let mut scored_correct = false;
    let mut scored_failed = false;

    for ev in &schedule.events {
        match ev {
            ScheduleEvent::EncodeChunk { id, features, .. } => {
                chunks.push(Chunk::new(id.clone(), features.clone(), clock)?);
                clock += schedule.word_duration;
            }
            ScheduleEvent::FireProductions { count } => {
                clock += f64::from(*count) * point.dat;
            }
            ScheduleEvent::Retrieve {
                label,
                target,
                scored,
                cues,
            } => {
                let outcome = memory::retrieve(&chunks, cues, point, constants, clock, rng)?;
                if *scored {
                    scored_correct = outcome.winner.as_ref() == Some(target);
                    scored_failed = outcome.winner.is_none();
                }
                let at = clock;
                clock += outcome.latency;
                log.push(RetrievalLogEntry {
                    label: label.clone(),
                    target: target.clone(),
                    scored: *scored,
                    at,
                    outcome,
                });
            }
        }
    }

    Ok(TrialOutcome {
        scored_correct,
        scored_failed,
        retrieval_log: log,
        total_time: clock,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn events_of(t: &str) -> SentenceSchedule {
        build_schedule(&SentenceType::new(t).unwrap()).unwrap()
    }

    fn encode_index(s: &SentenceSchedule, id: &str) -> usize {
        s.events
            .iter()
            .position(|e| matches!(e, ScheduleEvent::EncodeChunk { id: i, .. } if i.as_str() == id))
            .unwrap()
    }

    #[test]
    fn builtin_schedules_are_valid() {
        for t in SentenceType::builtin() {
            build_schedule(&t).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn unknown_type_lists_supported() {
        let err = build_schedule(&SentenceType::new("PASSIVE").unwrap()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("PASSIVE"));
        for t in SentenceType::BUILTIN {
            assert!(msg.contains(t));
        }
    }

    #[test]
    fn sr_targets_np1_encoded_first() {
        let s = events_of("SR");
        assert_eq!(s.scored_target().unwrap().as_str(), "np1");
        assert!(encode_index(&s, "np1") < encode_index(&s, "np2"));
        assert_eq!(s.retrievals().count(), 1);
    }

    #[test]
    fn or_has_filler_gap_before_scored() {
        let s = events_of("OR");
        let r: Vec<_> = s.retrievals().collect();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].0, FILLER_GAP_LABEL);
        assert_eq!(r[0].1.as_str(), "np1");
        assert!(!r[0].2);
        assert_eq!(r[1].0, SCORED_LABEL);
        assert_eq!(r[1].1.as_str(), "np2");
    }

    #[test]
    fn or_refl_extends_or_with_final_reflexive() {
        let or = events_of("OR");
        let refl = events_of("OR-REFL");
        assert_eq!(&refl.events[..or.events.len()], &or.events[..]);
        match refl.events.last().unwrap() {
            ScheduleEvent::Retrieve {
                label,
                target,
                scored,
                ..
            } => {
                assert_eq!(label, REFLEXIVE_LABEL);
                assert_eq!(target.as_str(), "np1");
                assert!(!scored);
            }
            other => panic!("expected reflexive retrieval, got {other:?}"),
        }
    }

    #[test]
    fn validation_rejects_malformed() {
        let mut s = events_of("SR");
        s.events.push(ScheduleEvent::fire(0));
        assert!(s.validate().is_err());

        let mut s = events_of("SR");
        s.events.insert(
            0,
            ScheduleEvent::retrieve(FILLER_GAP_LABEL, "np1", false, &[NOMINAL]),
        );
        assert!(s.validate().is_err());

        let mut s = events_of("SR");
        s.events.push(ScheduleEvent::retrieve(
            SCORED_LABEL,
            "np2",
            true,
            &[NOMINAL],
        ));
        assert!(s.validate().is_err());

        let mut s = events_of("SR");
        s.sentence_type = SentenceType::sr_refl();
        assert!(s.validate().is_err());

        let mut s = events_of("SR");
        s.word_duration = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn scored_failure_is_incorrect() {
        // threshold far above any reachable activation
        let k = RetrievalConstants {
            threshold: 50.0,
            ..RetrievalConstants::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in SentenceType::builtin() {
            let out = run_trial(
                &build_schedule(&t).unwrap(),
                &ParameterPoint::DEFAULTS,
                &k,
                &mut rng,
            )
            .unwrap();
            assert!(out.scored_failed);
            assert!(!out.scored_correct);
        }
    }

    #[test]
    fn log_has_one_entry_per_retrieval_in_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for t in SentenceType::builtin() {
            let s = build_schedule(&t).unwrap();
            let out = run_trial(
                &s,
                &ParameterPoint::DEFAULTS,
                &RetrievalConstants::default(),
                &mut rng,
            )
            .unwrap();
            let labels: Vec<_> = s.retrievals().map(|r| r.0.to_owned()).collect();
            let logged: Vec<_> = out.retrieval_log.iter().map(|e| e.label.clone()).collect();
            assert_eq!(labels, logged);
        }
    }

    #[test]
    fn toml_round_trip_of_builtins() {
        for t in SentenceType::builtin() {
            let s = build_schedule(&t).unwrap();
            let back = SentenceSchedule::from_toml(&s.to_toml()).unwrap();
            assert_eq!(s, back);
        }
    }

    #[test]
    fn sentence_type_labels() {
        assert!(SentenceType::new("").is_err());
        assert!(SentenceType::new("S R").is_err());
        assert!(SentenceType::new("SR,OR").is_err());
        assert!(SentenceType::or_refl().is_reflexive());
        assert!(!SentenceType::or().is_reflexive());
    }
}
