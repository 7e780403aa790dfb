//! Participant accuracy data.
//!
//! File format: comma-separated with header
//! `participant,group,sentence_type,n_items,n_correct`, one row per
//! participant and sentence type. Lines starting with `#` before the header
//! form a free-text provenance note.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{Group, ParticipantAccuracy};
use crate::schedule::SentenceType;

pub const DATASET_HEADER: &str = "participant,group,sentence_type,n_items,n_correct";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub n_items: u32,
    pub n_correct: u32,
}

impl Observation {
    pub fn new(n_items: u32, n_correct: u32) -> Result<Self> {
        if n_items == 0 {
            return Err(Error::invalid("n_items must be >= 1"));
        }
        if n_correct > n_items {
            return Err(Error::invalid(format!(
                "accuracy {} is above 1 ({n_correct} correct of {n_items})",
                f64::from(n_correct) / f64::from(n_items)
            )));
        }
        Ok(Observation { n_items, n_correct })
    }

    pub fn accuracy(&self) -> f64 {
        f64::from(self.n_correct) / f64::from(self.n_items)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub id: String,
    pub group: Group,
    pub observations: BTreeMap<SentenceType, Observation>,
}

impl ParticipantRecord {
    pub fn accuracy(&self, t: &SentenceType) -> Option<f64> {
        self.observations.get(t).map(Observation::accuracy)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub participants: Vec<ParticipantRecord>,
    pub provenance: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.participants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.participants.is_empty()
    }

    pub fn group_count(&self, g: Group) -> usize {
        self.participants.iter().filter(|p| p.group == g).count()
    }

    /// Every participant must have an observation for every type in `types`.
    pub fn check_coverage(&self, types: &[SentenceType]) -> Result<()> {
        let missing: Vec<String> = self
            .participants
            .iter()
            .flat_map(|p| {
                types
                    .iter()
                    .filter(|t| !p.observations.contains_key(*t))
                    .map(move |t| format!("{}/{t}", p.id))
            })
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "dataset lacks observations for {}",
                missing.join(", ")
            )))
        }
    }

    /// Observed accuracies for `types`, participant-major.
    pub fn observations(&self, types: &[SentenceType]) -> Result<Vec<ParticipantAccuracy>> {
        self.check_coverage(types)?;
        Ok(self
            .participants
            .iter()
            .flat_map(|p| {
                types.iter().map(move |t| ParticipantAccuracy {
                    participant: p.id.clone(),
                    group: p.group,
                    sentence_type: t.clone(),
                    observed: p.observations[t].accuracy(),
                })
            })
            .collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in self.provenance.lines() {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str(DATASET_HEADER);
        out.push('\n');
        for p in &self.participants {
            for (t, o) in &p.observations {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    p.id, p.group, t, o.n_items, o.n_correct
                );
            }
        }
        out
    }

    pub fn from_csv(text: &str, origin: &Path) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::EmptyFile {
                path: origin.to_path_buf(),
            });
        }
        let perr = |line: u64, column: Option<&str>, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            column: column.map(str::to_owned),
            message,
        };

        let provenance: Vec<&str> = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| l.trim_start_matches('#').trim())
            .collect();

        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header_line = provenance.len() as u64 + 1;
        let header = rdr
            .headers()
            .map_err(|e| perr(header_line, None, e.to_string()))?
            .iter()
            .map(str::trim)
            .collect::<Vec<_>>()
            .join(",");
        if header != DATASET_HEADER {
            return Err(perr(
                header_line,
                None,
                format!("expected header {DATASET_HEADER:?}, found {header:?}"),
            ));
        }

        let mut participants: Vec<ParticipantRecord> = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        for rec in rdr.records() {
            let rec =
                rec.map_err(|e| perr(e.position().map_or(0, |p| p.line()), None, e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            let id = rec[0].trim();
            if id.is_empty() {
                return Err(perr(
                    line,
                    Some("participant"),
                    "empty participant id".into(),
                ));
            }
            let group: Group = rec[1]
                .trim()
                .parse()
                .map_err(|e: Error| perr(line, Some("group"), e.to_string()))?;
            let t: SentenceType = rec[2]
                .trim()
                .parse()
                .map_err(|e: Error| perr(line, Some("sentence_type"), e.to_string()))?;
            let count = |i: usize, name: &str| -> Result<u32> {
                rec[i]
                    .trim()
                    .parse()
                    .map_err(|e| perr(line, Some(name), format!("{:?}: {e}", &rec[i])))
            };
            let n_items = count(3, "n_items")?;
            let n_correct = count(4, "n_correct")?;
            let column = if n_items == 0 { "n_items" } else { "n_correct" };
            let obs = Observation::new(n_items, n_correct)
                .map_err(|e| perr(line, Some(column), e.to_string()))?;

            let pi = match index.get(id) {
                Some(&pi) => pi,
                None => {
                    participants.push(ParticipantRecord {
                        id: id.to_owned(),
                        group,
                        observations: BTreeMap::new(),
                    });
                    index.insert(id.to_owned(), participants.len() - 1);
                    participants.len() - 1
                }
            };
            let p = &mut participants[pi];
            if p.group != group {
                return Err(perr(
                    line,
                    Some("group"),
                    format!("participant {id} listed as both {} and {group}", p.group),
                ));
            }
            if p.observations.insert(t.clone(), obs).is_some() {
                return Err(perr(
                    line,
                    Some("participant"),
                    format!("duplicate participant {id} for sentence type {t}"),
                ));
            }
        }
        if participants.is_empty() {
            return Err(Error::EmptyFile {
                path: origin.to_path_buf(),
            });
        }
        Ok(Dataset {
            participants,
            provenance: provenance.join("\n"),
        })
    }
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Dataset::from_csv(&text, path)
}
