//! Success-rate evaluation over recorded or synthetic word trials.
//!
//! A trial is a hit when the true word survives dictionary filtering. Trials
//! that fail inside the pipeline (no candidates, too few peaks) are misses,
//! tallied separately so they can be told apart from dictionary misses.

use std::collections::BTreeMap;
use std::io;

use rayon::prelude::*;
use serde::Serialize;

use crate::audio::AudioSignal;
use crate::keylog::session_to_pairs;
use crate::lexicon::Lexicon;
use crate::model::{self, ModelError, TimingModel};
use crate::predictor::{self, PredictError, PredictSettings};
use crate::segmenter::SegmentError;
use crate::synth::{self, SynthError, TypistProfile};

#[derive(Debug, Clone)]
pub struct Trial {
    pub signal: AudioSignal,
    pub word: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialOutcome {
    Predicted,
    NoCandidates,
    NotEnoughPeaks,
    CandidateExplosion,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub true_word: String,
    pub k: usize,
    pub words_all_count: usize,
    pub words_dict: Vec<String>,
    /// The true word is among the raw (pre-dictionary) candidates.
    pub true_in_all: bool,
    pub hit: bool,
    pub outcome: TrialOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LengthBucket {
    pub trials: usize,
    pub hits: usize,
    pub success: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub trials: usize,
    pub hits: usize,
    pub success_rate: f64,
    pub raw_success_rate: f64,
    pub by_length: BTreeMap<usize, LengthBucket>,
    pub asd_ms: f64,
    /// Mean number of dictionary words per trial.
    pub ambiguity: f64,
    pub no_candidates: usize,
    pub not_enough_peaks: usize,
    pub other_failures: usize,
    pub settings: PredictSettings,
    pub lexicon_sha256: String,
    pub per_trial: Vec<TrialRecord>,
}

fn run_trial(
    model: &TimingModel,
    lexicon: &Lexicon,
    trial: &Trial,
    settings: &PredictSettings,
) -> TrialRecord {
    let true_word = trial.word.to_ascii_lowercase();
    let k = true_word.chars().count();
    let result = predictor::predict(model, &trial.signal, k, settings, lexicon);
    match result {
        Ok(r) => {
            let true_in_all = r.words_all.binary_search(&true_word).is_ok();
            let hit = r.words_dict.contains(&true_word);
            TrialRecord {
                true_word,
                k,
                words_all_count: r.words_all.len(),
                words_dict: r.words_dict,
                true_in_all,
                hit,
                outcome: TrialOutcome::Predicted,
            }
        }
        Err(e) => {
            let outcome = match &e {
                PredictError::NoCandidates { .. } => TrialOutcome::NoCandidates,
                PredictError::Segment(SegmentError::NotEnoughPeaks { .. }) => {
                    TrialOutcome::NotEnoughPeaks
                }
                PredictError::CandidateExplosion { .. } => TrialOutcome::CandidateExplosion,
                other => TrialOutcome::Failed(other.to_string()),
            };
            TrialRecord {
                true_word,
                k,
                words_all_count: 0,
                words_dict: Vec::new(),
                true_in_all: false,
                hit: false,
                outcome,
            }
        }
    }
}

fn fraction(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

/// Predicts every trial and aggregates the results in trial order.
///
/// `jobs` caps the worker pool; `None` uses all cores, `Some(1)` runs inline.
pub fn run_eval(
    model: &TimingModel,
    lexicon: &Lexicon,
    trials: &[Trial],
    settings: &PredictSettings,
    jobs: Option<usize>,
) -> EvalReport {
    let records: Vec<TrialRecord> = match jobs {
        Some(1) => trials
            .iter()
            .map(|t| run_trial(model, lexicon, t, settings))
            .collect(),
        _ => {
            let work = || {
                trials
                    .par_iter()
                    .map(|t| run_trial(model, lexicon, t, settings))
                    .collect()
            };
            match jobs {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map(|pool| pool.install(work))
                    .unwrap_or_else(|_| work()),
                None => work(),
            }
        }
    };
    aggregate(records, model.asd_ms(), settings, lexicon)
}

fn aggregate(
    records: Vec<TrialRecord>,
    asd_ms: f64,
    settings: &PredictSettings,
    lexicon: &Lexicon,
) -> EvalReport {
    let trials = records.len();
    let hits = records.iter().filter(|r| r.hit).count();
    let raw_hits = records.iter().filter(|r| r.true_in_all).count();
    let mut by_length: BTreeMap<usize, LengthBucket> = BTreeMap::new();
    for r in &records {
        let b = by_length.entry(r.k).or_insert(LengthBucket {
            trials: 0,
            hits: 0,
            success: 0.0,
        });
        b.trials += 1;
        b.hits += r.hit as usize;
    }
    for b in by_length.values_mut() {
        b.success = fraction(b.hits, b.trials);
    }
    let dict_total: usize = records.iter().map(|r| r.words_dict.len()).sum();
    let count = |o: TrialOutcome| records.iter().filter(|r| r.outcome == o).count();
    let no_candidates = count(TrialOutcome::NoCandidates);
    let not_enough_peaks = count(TrialOutcome::NotEnoughPeaks);
    let other_failures = records
        .iter()
        .filter(|r| {
            matches!(
                r.outcome,
                TrialOutcome::CandidateExplosion | TrialOutcome::Failed(_)
            )
        })
        .count();
    EvalReport {
        trials,
        hits,
        success_rate: fraction(hits, trials),
        raw_success_rate: fraction(raw_hits, trials),
        by_length,
        asd_ms,
        ambiguity: if trials == 0 {
            0.0
        } else {
            dict_total as f64 / trials as f64
        },
        no_candidates,
        not_enough_peaks,
        other_failures,
        settings: *settings,
        lexicon_sha256: lexicon.sha256().to_string(),
        per_trial: records,
    }
}

/// Types `words` with `profile`, `repetitions` times over, and renders one
/// audio trial per typed word. Stream `stream` drives the typing and
/// `stream + 1 + i` the audio of trial `i`.
pub fn synth_trials(
    profile: &TypistProfile,
    words: &[&str],
    repetitions: usize,
    sample_rate: u32,
    stream: u64,
) -> Result<Vec<Trial>, SynthError> {
    let typed: Vec<&str> = (0..repetitions)
        .flat_map(|_| words.iter().copied())
        .collect();
    let session =
        synth::synth_session_with(profile, &typed, &mut synth::task_rng(profile.seed, stream))?;
    session
        .words
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let mut rng = synth::task_rng(profile.seed, stream + 1 + i as u64);
            let (signal, _) = synth::render_word(w, profile, sample_rate, &mut rng)?;
            Ok(Trial {
                signal,
                word: w.word.clone(),
            })
        })
        .collect()
}

/// Trains a model from `repetitions` synthetic passes over `words`.
pub fn synth_model(
    profile: &TypistProfile,
    words: &[&str],
    repetitions: usize,
    stream: u64,
) -> Result<TimingModel, SweepError> {
    let typed: Vec<&str> = (0..repetitions)
        .flat_map(|_| words.iter().copied())
        .collect();
    let session =
        synth::synth_session_with(profile, &typed, &mut synth::task_rng(profile.seed, stream))?;
    Ok(model::train(&session_to_pairs(&session.session))?)
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone)]
pub struct SweepConfig<'a> {
    pub words: &'a [&'a str],
    pub train_repetitions: usize,
    pub trial_repetitions: usize,
    pub sample_rate: u32,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub profile_std_ms: f64,
    pub asd_ms: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsdSweep {
    pub points: Vec<SweepPoint>,
    /// Pearson correlation of (asd, success); NaN when undefined.
    pub pearson: f64,
}

/// Trains one model per profile from synthetic sessions, evaluates it on
/// fresh synthetic trials, and returns (asd, success) pairs sorted by asd.
pub fn asd_sweep(
    profiles: &[TypistProfile],
    lexicon: &Lexicon,
    settings: &PredictSettings,
    config: &SweepConfig<'_>,
) -> Result<AsdSweep, SweepError> {
    let mut points = Vec::with_capacity(profiles.len());
    for profile in profiles {
        let model = synth_model(profile, config.words, config.train_repetitions, 0)?;
        let trials = synth_trials(
            profile,
            config.words,
            config.trial_repetitions,
            config.sample_rate,
            1 << 32,
        )?;
        let report = run_eval(&model, lexicon, &trials, settings, config.jobs);
        points.push(SweepPoint {
            profile_std_ms: profile.mean_std_ms(),
            asd_ms: model.asd_ms(),
            success_rate: report.success_rate,
        });
    }
    points.sort_by(|a, b| a.asd_ms.total_cmp(&b.asd_ms));
    let xs: Vec<f64> = points.iter().map(|p| p.asd_ms).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.success_rate).collect();
    Ok(AsdSweep {
        pearson: pearson(&xs, &ys),
        points,
    })
}

/// Pearson correlation coefficient.
///
/// NaN when there are fewer than two points or `xs` has no variance; 0 when
/// only `ys` has no variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return f64::NAN;
    }
    if syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

pub fn write_by_length_csv<W: io::Write>(out: W, report: &EvalReport) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["length", "success"])?;
    for (len, b) in &report.by_length {
        w.write_record([len.to_string(), b.success.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: io::Write>(out: W, sweep: &AsdSweep) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["asd_ms", "success_rate"])?;
    for p in &sweep.points {
        w.write_record([p.asd_ms.to_string(), p.success_rate.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::key::KeyPair;
    use crate::synth::PairTiming;

    use crate::COMMON_WORDS;

    fn common_profile(std: f64, seed: u64) -> TypistProfile {
        let pairs = COMMON_WORDS
            .iter()
            .flat_map(|w| KeyPair::of_word(w).unwrap());
        TypistProfile::random(pairs, (300.0, 600.0), std, seed)
    }

    fn settings() -> PredictSettings {
        PredictSettings::default()
    }

    #[test]
    fn zero_variance_common_words_all_hit() {
        let profile = common_profile(0.0, 5);
        let model = synth_model(&profile, &COMMON_WORDS, 2, 0).unwrap();
        let lexicon = Lexicon::from_words(COMMON_WORDS).unwrap();
        let trials = synth_trials(&profile, &COMMON_WORDS, 1, 8000, 100).unwrap();
        let report = run_eval(&model, &lexicon, &trials, &settings(), Some(2));
        assert_eq!(report.trials, 21);
        assert_eq!(report.success_rate, 1.0);
        assert!(report.ambiguity >= 1.0);
    }

    #[test]
    fn zero_trials() {
        let model = model::train(&[]).unwrap();
        let lexicon = Lexicon::from_words(["top"]).unwrap();
        let report = run_eval(&model, &lexicon, &[], &settings(), None);
        assert_eq!(report.success_rate, 0.0);
        assert!(report.by_length.is_empty());
        assert_eq!(report.ambiguity, 0.0);
    }

    #[test]
    fn lexicon_without_truth_scores_zero() {
        let profile = common_profile(0.0, 6);
        let model = synth_model(&profile, &COMMON_WORDS, 1, 0).unwrap();
        let lexicon = Lexicon::from_words(["zzz"]).unwrap();
        let trials = synth_trials(&profile, &COMMON_WORDS[..5], 1, 8000, 100).unwrap();
        let report = run_eval(&model, &lexicon, &trials, &settings(), Some(1));
        assert_eq!(report.success_rate, 0.0);
        assert_eq!(report.ambiguity, 0.0);
        assert_eq!(report.raw_success_rate, 1.0);
    }

    #[test]
    fn failures_are_tallied() {
        let mut pairs = BTreeMap::new();
        pairs.insert(
            KeyPair::parse("to").unwrap(),
            PairTiming {
                mean_ms: 300.0,
                std_ms: 0.0,
            },
        );
        pairs.insert(
            KeyPair::parse("op").unwrap(),
            PairTiming {
                mean_ms: 400.0,
                std_ms: 0.0,
            },
        );
        let profile = TypistProfile::new(pairs, 1);
        // Model knows (t,o) but not (o,p).
        let model = model::train(&[crate::model::Observation {
            pair: KeyPair::parse("to").unwrap(),
            delta_ms: 300.0,
        }])
        .unwrap();
        let lexicon = Lexicon::from_words(["top"]).unwrap();
        let mut trials = synth_trials(&profile, &["top"], 1, 8000, 0).unwrap();
        let mut short = trials[0].clone();
        short.word = "tops".into();
        trials.push(short);
        let report = run_eval(&model, &lexicon, &trials, &settings(), Some(1));
        assert_eq!(report.no_candidates, 1);
        assert_eq!(report.not_enough_peaks, 1);
        assert_eq!(report.hits, 0);
    }

    #[test]
    fn by_length_weighted_mean_matches_overall() {
        let profile = common_profile(15.0, 9);
        let model = synth_model(&profile, &COMMON_WORDS, 5, 0).unwrap();
        let lexicon = Lexicon::from_words(COMMON_WORDS).unwrap();
        let trials = synth_trials(&profile, &COMMON_WORDS, 2, 8000, 77).unwrap();
        let report = run_eval(
            &model,
            &lexicon,
            &trials,
            &PredictSettings {
                std_coeff: 0.0,
                ..settings()
            },
            None,
        );
        let weighted: f64 = report
            .by_length
            .values()
            .map(|b| b.success * b.trials as f64)
            .sum::<f64>()
            / report.trials as f64;
        assert!((weighted - report.success_rate).abs() < 1e-12);
        for b in report.by_length.values() {
            assert!((0.0..=1.0).contains(&b.success));
        }

        // Trial order does not change the rate.
        let mut reversed = trials.clone();
        reversed.reverse();
        let again = run_eval(
            &model,
            &lexicon,
            &reversed,
            &PredictSettings {
                std_coeff: 0.0,
                ..settings()
            },
            Some(1),
        );
        assert_eq!(again.success_rate, report.success_rate);
    }

    #[test]
    fn pearson_conventions() {
        assert!(pearson(&[5.0, 5.0], &[0.1, 0.9]).is_nan());
        assert!(pearson(&[1.0], &[1.0]).is_nan());
        assert_eq!(pearson(&[1.0, 2.0], &[0.5, 0.5]), 0.0);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_orders_by_asd() {
        let words = &COMMON_WORDS[..8];
        let profiles = vec![common_profile(40.0, 3), common_profile(0.0, 3)];
        let lexicon = Lexicon::from_words(COMMON_WORDS).unwrap();
        let s = PredictSettings {
            std_coeff: 0.0,
            ..settings()
        };
        let cfg = SweepConfig {
            words,
            train_repetitions: 10,
            trial_repetitions: 3,
            sample_rate: 4000,
            jobs: None,
        };
        let sweep = asd_sweep(&profiles, &lexicon, &s, &cfg).unwrap();
        assert_eq!(sweep.points.len(), 2);
        assert!(sweep.points[0].asd_ms < sweep.points[1].asd_ms);
        assert!(sweep.points[0].success_rate >= sweep.points[1].success_rate);
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &sweep).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("asd_ms,success_rate\n"));
    }
}
