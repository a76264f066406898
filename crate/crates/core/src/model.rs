//! Per-user inter-keystroke timing model.
//!
//! The model keeps the raw observations (the "Data" table) next to the
//! per-pair mean and sample standard deviation derived from them (the
//! "Analysis" table). Loading always re-derives the analysis from the
//! observations and rejects files where the two disagree.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::key::{KeyPair, Letter, LetterSet};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("interval for {pair} must be positive, got {delta_ms} ms")]
    NonPositiveDelta { pair: KeyPair, delta_ms: f64 },
    #[error("model file schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("model file is inconsistent: {0}")]
    ConsistencyFailure(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// One measured interval between two consecutive letter presses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "ObservationRow", into = "ObservationRow")]
pub struct Observation {
    pub pair: KeyPair,
    pub delta_ms: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObservationRow {
    a: Letter,
    b: Letter,
    delta_ms: f64,
}

impl From<ObservationRow> for Observation {
    fn from(r: ObservationRow) -> Self {
        Observation {
            pair: KeyPair::new(r.a, r.b),
            delta_ms: r.delta_ms,
        }
    }
}

impl From<Observation> for ObservationRow {
    fn from(o: Observation) -> Self {
        ObservationRow {
            a: o.pair.first,
            b: o.pair.second,
            delta_ms: o.delta_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "AnalysisRow", into = "AnalysisRow")]
pub struct PairStats {
    pub pair: KeyPair,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub count: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalysisRow {
    a: Letter,
    b: Letter,
    mean_ms: f64,
    std_ms: f64,
    count: usize,
}

impl From<AnalysisRow> for PairStats {
    fn from(r: AnalysisRow) -> Self {
        PairStats {
            pair: KeyPair::new(r.a, r.b),
            mean_ms: r.mean_ms,
            std_ms: r.std_ms,
            count: r.count,
        }
    }
}

impl From<PairStats> for AnalysisRow {
    fn from(s: PairStats) -> Self {
        AnalysisRow {
            a: s.pair.first,
            b: s.pair.second,
            mean_ms: s.mean_ms,
            std_ms: s.std_ms,
            count: s.count,
        }
    }
}

/// A model pair whose mean interval falls inside the matching window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub pair: KeyPair,
    pub mean_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingModel {
    observations: Vec<Observation>,
    stats: BTreeMap<KeyPair, PairStats>,
    asd_ms: f64,
}

fn pair_stats(pair: KeyPair, deltas: &[f64]) -> PairStats {
    let n = deltas.len();
    let mean_ms = deltas.iter().sum::<f64>() / n as f64;
    let std_ms = if n < 2 {
        0.0
    } else {
        let ss: f64 = deltas.iter().map(|d| (d - mean_ms) * (d - mean_ms)).sum();
        (ss / (n - 1) as f64).sqrt()
    };
    PairStats {
        pair,
        mean_ms,
        std_ms,
        count: n,
    }
}

/// Groups observations by ordered pair and computes mean, sample standard
/// deviation (divisor `n - 1`) and the average standard deviation over pairs
/// seen at least twice.
///
/// Observations are stored in canonical order, so permuting the input gives
/// an identical model.
pub fn train(observations: &[Observation]) -> Result<TimingModel, ModelError> {
    if let Some(bad) = observations
        .iter()
        .find(|o| !(o.delta_ms > 0.0 && o.delta_ms.is_finite()))
    {
        return Err(ModelError::NonPositiveDelta {
            pair: bad.pair,
            delta_ms: bad.delta_ms,
        });
    }
    let mut sorted = observations.to_vec();
    sorted.sort_by(|x, y| {
        x.pair
            .cmp(&y.pair)
            .then_with(|| x.delta_ms.total_cmp(&y.delta_ms))
    });

    let mut stats = BTreeMap::new();
    let mut start = 0;
    while start < sorted.len() {
        let pair = sorted[start].pair;
        let end = start + sorted[start..].partition_point(|o| o.pair == pair);
        let deltas: Vec<f64> = sorted[start..end].iter().map(|o| o.delta_ms).collect();
        stats.insert(pair, pair_stats(pair, &deltas));
        start = end;
    }

    let repeated: Vec<f64> = stats
        .values()
        .filter(|s| s.count >= 2)
        .map(|s| s.std_ms)
        .collect();
    let asd_ms = if repeated.is_empty() {
        0.0
    } else {
        repeated.iter().sum::<f64>() / repeated.len() as f64
    };

    Ok(TimingModel {
        observations: sorted,
        stats,
        asd_ms,
    })
}

impl TimingModel {
    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn stats(&self) -> impl Iterator<Item = &PairStats> {
        self.stats.values()
    }

    pub fn get(&self, pair: KeyPair) -> Option<&PairStats> {
        self.stats.get(&pair)
    }

    pub fn pair_count(&self) -> usize {
        self.stats.len()
    }

    pub fn asd_ms(&self) -> f64 {
        self.asd_ms
    }

    /// Half-width of the matching window: `pct * delta_ms + std_coeff * asd`.
    pub fn tolerance(&self, delta_ms: f64, pct: f64, std_coeff: f64) -> f64 {
        pct * delta_ms + std_coeff * self.asd_ms
    }

    /// Every pair whose first key is in `allowed_first` and whose mean lies
    /// within `t_f` of `delta_ms`, ordered by (first, second).
    pub fn candidates(&self, delta_ms: f64, t_f: f64, allowed_first: LetterSet) -> Vec<Candidate> {
        self.stats
            .values()
            .filter(|s| allowed_first.contains(s.pair.first))
            .filter(|s| s.mean_ms - t_f <= delta_ms && delta_ms <= s.mean_ms + t_f)
            .map(|s| Candidate {
                pair: s.pair,
                mean_ms: s.mean_ms,
            })
            .collect()
    }

    /// The analysis table as aligned text, one pair per line.
    pub fn analysis_table(&self) -> String {
        let mut out = String::from("pair   mean_ms    std_ms  count\n");
        for s in self.stats.values() {
            let _ = writeln!(
                out,
                "{:<4} {:>9.3} {:>9.3} {:>6}",
                s.pair.to_string(),
                s.mean_ms,
                s.std_ms,
                s.count
            );
        }
        let _ = writeln!(
            out,
            "pairs: {}  asd_ms: {:.3}",
            self.stats.len(),
            self.asd_ms
        );
        out
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            version: FORMAT_VERSION,
            observations: self.observations.clone(),
            analysis: self.stats.values().copied().collect(),
            asd_ms: self.asd_ms,
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    /// Parses and validates a model document.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| ModelError::SchemaMismatch(e.to_string()))?;
        if file.version != FORMAT_VERSION {
            return Err(ModelError::SchemaMismatch(format!(
                "unsupported version {} (expected {FORMAT_VERSION})",
                file.version
            )));
        }
        let model =
            train(&file.observations).map_err(|e| ModelError::ConsistencyFailure(e.to_string()))?;

        let mut analysis: BTreeMap<KeyPair, PairStats> = BTreeMap::new();
        for row in file.analysis {
            if analysis.insert(row.pair, row).is_some() {
                return Err(ModelError::ConsistencyFailure(format!(
                    "pair {} listed twice in analysis",
                    row.pair
                )));
            }
        }
        for (pair, want) in &model.stats {
            match analysis.get(pair) {
                Some(got) if got == want => {}
                Some(got) => {
                    return Err(ModelError::ConsistencyFailure(format!(
                        "pair {pair}: stored mean {} / std {} / count {} but observations give {} / {} / {}",
                        got.mean_ms, got.std_ms, got.count, want.mean_ms, want.std_ms, want.count
                    )))
                }
                None => {
                    return Err(ModelError::ConsistencyFailure(format!(
                        "pair {pair} has observations but no analysis row"
                    )))
                }
            }
        }
        if let Some(extra) = analysis.keys().find(|p| !model.stats.contains_key(p)) {
            return Err(ModelError::ConsistencyFailure(format!(
                "analysis row {extra} has no observations"
            )));
        }
        if file.asd_ms != model.asd_ms {
            return Err(ModelError::ConsistencyFailure(format!(
                "stored asd_ms {} but observations give {}",
                file.asd_ms, model.asd_ms
            )));
        }
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    observations: Vec<Observation>,
    analysis: Vec<PairStats>,
    asd_ms: f64,
}

pub fn save_model(model: &TimingModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    std::fs::write(path, model.to_json() + "\n").map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TimingModel, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    TimingModel::from_json(&text)
}
