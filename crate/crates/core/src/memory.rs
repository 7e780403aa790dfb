//! Declarative memory: activation calculus and cue-based retrieval.
//!
//! A chunk's total activation is the sum of four terms:
//!
//! ```text
//! A_i = B_i + S_i + P_i + ε
//! B_i = -d · ln(now - encoded_at)                   single-presentation decay
//! S_i = Σ_j (GA / J) · S_ji,  S_ji = S_max - ln(fan_j) when cue j matches
//! P_i = MP · (number of cues the chunk fails to match)
//! ε   ~ Logistic(0, ANS), drawn per candidate per retrieval request
//! ```
//!
//! Retrieval picks the candidate with the highest total and succeeds only if
//! that total reaches the threshold `tau`. Latency is `F · exp(-A)` on success
//! and `F · exp(-tau)` on failure.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChunkId(pub String);

impl ChunkId {
    pub fn new(id: impl Into<String>) -> Self {
        ChunkId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ChunkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<String> for ChunkId {
    fn from(s: String) -> Self {
        ChunkId(s)
    }
}

impl From<&str> for ChunkId {
    fn from(s: &str) -> Self {
        ChunkId(s.to_owned())
    }
}

/// A feature-valued element of declarative memory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    id: ChunkId,
    features: BTreeMap<String, String>,
    encoded_at: f64,
}

impl Chunk {
    pub fn new<K, V>(
        id: impl Into<ChunkId>,
        features: impl IntoIterator<Item = (K, V)>,
        encoded_at: f64,
    ) -> Result<Self>
    where
        K: Into<String>,
        V: Into<String>,
    {
        let id = id.into();
        let mut map = BTreeMap::new();
        for (k, v) in features {
            let k = k.into();
            if map.insert(k.clone(), v.into()).is_some() {
                return Err(Error::invalid(format!(
                    "chunk {id}: duplicate feature {k:?}"
                )));
            }
        }
        if map.is_empty() {
            return Err(Error::invalid(format!("chunk {id}: no features")));
        }
        if !(encoded_at >= 0.0 && encoded_at.is_finite()) {
            return Err(Error::invalid(format!(
                "chunk {id}: encoding time {encoded_at} must be finite and >= 0"
            )));
        }
        Ok(Chunk {
            id,
            features: map,
            encoded_at,
        })
    }

    pub fn id(&self) -> &ChunkId {
        &self.id
    }

    pub fn features(&self) -> &BTreeMap<String, String> {
        &self.features
    }

    pub fn feature(&self, name: &str) -> Option<&str> {
        self.features.get(name).map(String::as_str)
    }

    pub fn encoded_at(&self) -> f64 {
        self.encoded_at
    }

    fn matches(&self, cue: &Cue) -> bool {
        self.feature(&cue.feature) == Some(cue.value.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cue {
    pub feature: String,
    pub value: String,
}

impl Cue {
    pub fn new(feature: impl Into<String>, value: impl Into<String>) -> Self {
        Cue {
            feature: feature.into(),
            value: value.into(),
        }
    }
}

/// Retrieval cues held in the goal buffer. Spreading activation is divided
/// evenly among them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Cue>", into = "Vec<Cue>")]
pub struct CueSet {
    cues: Vec<Cue>,
}

impl CueSet {
    pub fn new(cues: Vec<Cue>) -> Result<Self> {
        if cues.is_empty() {
            return Err(Error::invalid("cue set must contain at least one cue"));
        }
        for (i, c) in cues.iter().enumerate() {
            if cues[..i].iter().any(|p| p.feature == c.feature) {
                return Err(Error::invalid(format!(
                    "cue set: duplicate feature {:?}",
                    c.feature
                )));
            }
        }
        Ok(CueSet { cues })
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        Self::new(pairs.into_iter().map(|(f, v)| Cue::new(f, v)).collect())
    }

    pub fn cues(&self) -> &[Cue] {
        &self.cues
    }

    /// Number of cues, `J`.
    pub fn len(&self) -> usize {
        self.cues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cues.is_empty()
    }

    /// Per-cue count of candidates carrying the cue's value.
    pub fn fan(&self, candidates: &[Chunk]) -> Vec<u32> {
        self.cues
            .iter()
            .map(|cue| candidates.iter().filter(|c| c.matches(cue)).count() as u32)
            .collect()
    }
}

impl TryFrom<Vec<Cue>> for CueSet {
    type Error = Error;
    fn try_from(cues: Vec<Cue>) -> Result<Self> {
        CueSet::new(cues)
    }
}

impl From<CueSet> for Vec<Cue> {
    fn from(set: CueSet) -> Self {
        set.cues
    }
}

/// One (GA, DAT, ANS) triple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParameterPoint {
    /// Goal activation, the total spreading-activation budget.
    pub ga: f64,
    /// Default action time: seconds per production firing.
    pub dat: f64,
    /// Scale of the logistic activation noise.
    pub ans: f64,
}

impl ParameterPoint {
    /// Standard settings of the unimpaired model.
    pub const DEFAULTS: ParameterPoint = ParameterPoint {
        ga: 1.0,
        dat: 0.05,
        ans: 0.15,
    };

    pub fn new(ga: f64, dat: f64, ans: f64) -> Result<Self> {
        let p = ParameterPoint { ga, dat, ans };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ga > 0.0 && self.ga.is_finite()) {
            return Err(Error::invalid(format!("GA must be > 0, got {}", self.ga)));
        }
        if !(self.dat > 0.0 && self.dat.is_finite()) {
            return Err(Error::invalid(format!("DAT must be > 0, got {}", self.dat)));
        }
        if !(self.ans >= 0.0 && self.ans.is_finite()) {
            return Err(Error::invalid(format!(
                "ANS must be >= 0, got {}",
                self.ans
            )));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.ga, self.dat, self.ans]
    }
}

impl Default for ParameterPoint {
    fn default() -> Self {
        Self::DEFAULTS
    }
}

impl fmt::Display for ParameterPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(GA={}, DAT={}, ANS={})", self.ga, self.dat, self.ans)
    }
}

/// Architecture constants held fixed across the parameter grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConstants {
    /// Latency scaling factor `F`, seconds.
    pub latency_factor: f64,
    /// Retrieval threshold `tau`.
    pub threshold: f64,
    /// Base-level decay exponent `d`.
    pub decay: f64,
    /// Maximum associative strength `S_max`.
    pub max_associative_strength: f64,
    /// Penalty per mismatching cue (`<= 0`).
    pub mismatch_penalty: f64,
}

impl Default for RetrievalConstants {
    fn default() -> Self {
        RetrievalConstants {
            latency_factor: 0.2,
            threshold: 0.0,
            decay: 0.5,
            max_associative_strength: 1.5,
            mismatch_penalty: -1.5,
        }
    }
}

impl RetrievalConstants {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.latency_factor,
            self.threshold,
            self.decay,
            self.max_associative_strength,
            self.mismatch_penalty,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("retrieval constants must be finite"));
        }
        if self.latency_factor <= 0.0 {
            return Err(Error::invalid("latency factor F must be > 0"));
        }
        if self.decay <= 0.0 {
            return Err(Error::invalid("decay d must be > 0"));
        }
        if self.max_associative_strength <= 0.0 {
            return Err(Error::invalid("S_max must be > 0"));
        }
        if self.mismatch_penalty > 0.0 {
            return Err(Error::invalid("mismatch penalty MP must be <= 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivationBreakdown {
    pub base: f64,
    pub spread: f64,
    pub penalty: f64,
    pub noise: f64,
    pub total: f64,
}

impl ActivationBreakdown {
    pub fn new(base: f64, spread: f64, penalty: f64, noise: f64) -> Self {
        ActivationBreakdown {
            base,
            spread,
            penalty,
            noise,
            total: base + spread + penalty + noise,
        }
    }

    /// Activation without the noise term.
    pub fn deterministic(&self) -> f64 {
        self.base + self.spread + self.penalty
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalOutcome {
    pub winner: Option<ChunkId>,
    pub latency: f64,
    pub per_chunk: Vec<(ChunkId, ActivationBreakdown)>,
}

impl RetrievalOutcome {
    pub fn succeeded(&self) -> bool {
        self.winner.is_some()
    }
}

/// Base-level activation of a chunk presented once, `-d · ln(now - encoded_at)`.
pub fn base_level(chunk: &Chunk, now: f64, decay: f64) -> Result<f64> {
    let age = now - chunk.encoded_at;
    if age.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::Precondition(format!(
            "base level of chunk {} requested at t={now}, but it was encoded at t={}",
            chunk.id, chunk.encoded_at
        )));
    }
    Ok(-decay * age.ln())
}

/// Spreading activation from the goal buffer. `fan[j]` is the number of
/// candidates matching cue `j`.
pub fn spreading(
    chunk: &Chunk,
    cues: &CueSet,
    goal_activation: f64,
    fan: &[u32],
    max_strength: f64,
) -> Result<f64> {
    if fan.len() != cues.len() {
        return Err(Error::Precondition(format!(
            "fan has {} entries for {} cues",
            fan.len(),
            cues.len()
        )));
    }
    let weight = goal_activation / cues.len() as f64;
    let mut total = 0.0;
    for (cue, &n) in cues.cues().iter().zip(fan) {
        if chunk.matches(cue) {
            if n == 0 {
                return Err(Error::Precondition(format!(
                    "chunk {} matches cue {}={} but its fan is 0",
                    chunk.id, cue.feature, cue.value
                )));
            }
            total += weight * (max_strength - f64::from(n).ln());
        }
    }
    Ok(total)
}

/// `MP` times the number of cues the chunk fails to match. A cue whose feature
/// is absent from the chunk counts as a mismatch.
pub fn mismatch_penalty(chunk: &Chunk, cues: &CueSet, penalty: f64) -> f64 {
    let misses = cues.cues().iter().filter(|c| !chunk.matches(c)).count();
    penalty * misses as f64
}

/// One draw from Logistic(0, `scale`) by inverse-CDF sampling.
pub fn sample_noise<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    let u: f64 = loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            break u;
        }
    };
    scale * (u / (1.0 - u)).ln()
}

#[allow(clippy::too_many_arguments)]
pub fn total_activation<R: Rng + ?Sized>(
    chunk: &Chunk,
    cues: &CueSet,
    point: &ParameterPoint,
    constants: &RetrievalConstants,
    now: f64,
    fan: &[u32],
    rng: &mut R,
) -> Result<ActivationBreakdown> {
    let base = base_level(chunk, now, constants.decay)?;
    let spread = spreading(
        chunk,
        cues,
        point.ga,
        fan,
        constants.max_associative_strength,
    )?;
    let penalty = mismatch_penalty(chunk, cues, constants.mismatch_penalty);
    let noise = sample_noise(point.ans, rng);
    Ok(ActivationBreakdown::new(base, spread, penalty, noise))
}

/// `F · exp(-A)`.
pub fn retrieval_latency(activation: f64, latency_factor: f64) -> f64 {
    latency_factor * (-activation).exp()
}

/// Competitive retrieval over `candidates`: the highest total wins if it
/// reaches the threshold. Ties go to the earlier candidate.
pub fn retrieve<R: Rng + ?Sized>(
    candidates: &[Chunk],
    cues: &CueSet,
    point: &ParameterPoint,
    constants: &RetrievalConstants,
    now: f64,
    rng: &mut R,
) -> Result<RetrievalOutcome> {
    if candidates.is_empty() {
        return Err(Error::invalid("retrieve: candidate list is empty"));
    }
    let fan = cues.fan(candidates);
    let mut per_chunk = Vec::with_capacity(candidates.len());
    let mut best: Option<(usize, f64)> = None;
    for (i, chunk) in candidates.iter().enumerate() {
        let b = total_activation(chunk, cues, point, constants, now, &fan, rng)?;
        if best.is_none_or(|(_, a)| b.total > a) {
            best = Some((i, b.total));
        }
        per_chunk.push((chunk.id.clone(), b));
    }
    let (idx, max) = best.expect("non-empty candidates");
    let (winner, latency) = if max >= constants.threshold {
        (
            Some(candidates[idx].id.clone()),
            retrieval_latency(max, constants.latency_factor),
        )
    } else {
        (
            None,
            retrieval_latency(constants.threshold, constants.latency_factor),
        )
    };
    Ok(RetrievalOutcome {
        winner,
        latency,
        per_chunk,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn np(id: &str, animate: &str, case: &str, at: f64) -> Chunk {
        Chunk::new(
            id,
            [("pos", "nominal"), ("animate", animate), ("case", case)],
            at,
        )
        .unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn base_level_examples() {
        let c = np("a", "yes", "nom", 1.0);
        assert_eq!(base_level(&c, 2.0, 0.5).unwrap(), 0.0);
        assert!(close(
            base_level(&c, 5.0, 0.5).unwrap(),
            -std::f64::consts::LN_2,
            1e-12
        ));
        assert!(close(
            base_level(&c, 1.25, 0.5).unwrap(),
            std::f64::consts::LN_2,
            1e-12
        ));
    }

    #[test]
    fn base_level_rejects_non_positive_age() {
        let c = np("woman", "yes", "nom", 1.0);
        for now in [1.0, 0.5] {
            let err = base_level(&c, now, 0.5).unwrap_err();
            assert!(matches!(err, Error::Precondition(_)));
            assert!(err.to_string().contains("woman"));
        }
    }

    #[test]
    fn spreading_examples() {
        let c = np("a", "yes", "nom", 0.0);
        let two = CueSet::from_pairs([("pos", "nominal"), ("animate", "yes")]).unwrap();
        assert!(close(
            spreading(&c, &two, 1.0, &[1, 1], 1.5).unwrap(),
            1.5,
            1e-12
        ));

        let c4 = Chunk::new("b", [("a", "1"), ("b", "1"), ("c", "1"), ("d", "1")], 0.0).unwrap();
        let four = CueSet::from_pairs([("a", "1"), ("b", "1"), ("c", "1"), ("d", "1")]).unwrap();
        assert!(close(
            spreading(&c4, &four, 0.2, &[1; 4], 1.5).unwrap(),
            0.3,
            1e-12
        ));

        let one = CueSet::from_pairs([("pos", "nominal")]).unwrap();
        assert!(close(
            spreading(&c, &one, 1.0, &[2], 1.5).unwrap(),
            0.806853,
            1e-6
        ));
    }

    #[test]
    fn spreading_zero_fan_on_match_is_precondition_error() {
        let c = np("a", "yes", "nom", 0.0);
        let one = CueSet::from_pairs([("pos", "nominal")]).unwrap();
        assert!(matches!(
            spreading(&c, &one, 1.0, &[0], 1.5),
            Err(Error::Precondition(_))
        ));
        // a non-matching cue may have fan 0
        let other = CueSet::from_pairs([("pos", "verb")]).unwrap();
        assert_eq!(spreading(&c, &other, 1.0, &[0], 1.5).unwrap(), 0.0);
    }

    #[test]
    fn mismatch_penalty_examples() {
        let c = np("a", "yes", "nom", 0.0);
        let all =
            CueSet::from_pairs([("pos", "nominal"), ("animate", "yes"), ("case", "nom")]).unwrap();
        assert_eq!(mismatch_penalty(&c, &all, -1.5), 0.0);
        let one =
            CueSet::from_pairs([("pos", "nominal"), ("animate", "yes"), ("case", "acc")]).unwrap();
        assert_eq!(mismatch_penalty(&c, &one, -1.5), -1.5);
        let three =
            CueSet::from_pairs([("pos", "verb"), ("animate", "no"), ("tense", "past")]).unwrap();
        assert_eq!(mismatch_penalty(&c, &three, -1.5), -4.5);
    }

    #[test]
    fn zero_scale_noise_is_exactly_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_noise(0.0, &mut rng), 0.0);
        }
    }

    #[test]
    fn noise_median_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut draws: Vec<f64> = (0..100_000).map(|_| sample_noise(0.15, &mut rng)).collect();
        draws.sort_by(f64::total_cmp);
        assert!(draws[50_000].abs() < 0.01);
    }

    #[test]
    fn total_activation_examples() {
        let k = RetrievalConstants::default();
        let p = ParameterPoint::new(1.0, 0.05, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = np("a", "yes", "nom", 0.0);
        let cues = CueSet::from_pairs([("pos", "nominal"), ("animate", "yes")]).unwrap();
        let b = total_activation(&c, &cues, &p, &k, 1.0, &[1, 1], &mut rng).unwrap();
        assert!(close(b.total, 1.5, 1e-12));

        let cues = CueSet::from_pairs([("pos", "nominal"), ("animate", "no")]).unwrap();
        let b = total_activation(&c, &cues, &p, &k, 4.0, &[1, 1], &mut rng).unwrap();
        assert!(close(b.total, -0.5 * 4f64.ln() + 0.75 - 1.5, 1e-12));
        assert!(close(b.total, -1.4431, 1e-4));
    }

    #[test]
    fn latency_examples() {
        assert_eq!(retrieval_latency(0.0, 0.2), 0.2);
        assert!(close(retrieval_latency(1.5, 0.2), 0.044626, 1e-6));
        assert!(close(retrieval_latency(-1.0, 0.2), 0.543656, 1e-6));
    }

    #[test]
    fn retrieve_empty_is_usage_error() {
        let cues = CueSet::from_pairs([("pos", "nominal")]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = retrieve(
            &[],
            &cues,
            &ParameterPoint::DEFAULTS,
            &RetrievalConstants::default(),
            1.0,
            &mut rng,
        );
        assert!(matches!(r, Err(Error::Invalid(_))));
    }

    #[test]
    fn below_threshold_fails_with_threshold_latency() {
        // single cue, matching, fan 1: A = -d ln(age) + GA * S_max
        // choose age so that A = tau - 0.1
        let k = RetrievalConstants::default();
        let ga = 1.0;
        let target = k.threshold - 0.1 - ga * k.max_associative_strength;
        let age = (-target / k.decay).exp();
        let c = Chunk::new("x", [("pos", "nominal")], 0.0).unwrap();
        let cues = CueSet::from_pairs([("pos", "nominal")]).unwrap();
        let p = ParameterPoint::new(ga, 0.05, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = retrieve(&[c], &cues, &p, &k, age, &mut rng).unwrap();
        assert!(close(out.per_chunk[0].1.total, k.threshold - 0.1, 1e-12));
        assert_eq!(out.winner, None);
        assert_eq!(out.latency, k.latency_factor * (-k.threshold).exp());
    }

    #[test]
    fn chunk_and_cue_validation() {
        assert!(Chunk::new("a", Vec::<(&str, &str)>::new(), 0.0).is_err());
        assert!(Chunk::new("a", [("pos", "n"), ("pos", "v")], 0.0).is_err());
        assert!(Chunk::new("a", [("pos", "n")], -1.0).is_err());
        assert!(CueSet::new(vec![]).is_err());
        assert!(CueSet::from_pairs([("pos", "n"), ("pos", "v")]).is_err());
        assert!(ParameterPoint::new(0.0, 0.05, 0.1).is_err());
        assert!(ParameterPoint::new(1.0, 0.0, 0.1).is_err());
        assert!(ParameterPoint::new(1.0, 0.05, -0.1).is_err());
        assert!(ParameterPoint::new(1.0, 0.05, 0.0).is_ok());
    }
}
