//! Synthetic typist: keystroke logs and click audio with known ground truth.
//!
//! Intervals between consecutive letters are drawn from a per-pair Gaussian
//! and clamped below at `burst_ms + 1` so clicks never overlap. Each click is
//! a random-sign burst whose envelope falls linearly from `burst_amp` to a
//! tenth of it, so a keystroke is loudest where it starts.
//!
//! All randomness comes from ChaCha8 seeded with `seed`; independent tasks
//! use separate ChaCha streams (see [`task_rng`]).

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{self, AudioSignal};
use crate::key::{KeyPair, Letter};
use crate::keylog::{KeyLabel, KeystrokeEvent, TypingSession};

/// Silence before the first click of a rendered word.
pub const LEAD_MS: f64 = 100.0;
/// Silence after the last click of a rendered word ends.
pub const TAIL_MS: f64 = 200.0;
/// Pause between the last letter of a word and the space bar, and again
/// before the next word starts.
const WORD_GAP_MS: f64 = 400.0;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("word {word:?}: pair {pair} is not in the profile")]
    UnknownPair { word: String, pair: KeyPair },
    #[error("word {0:?} contains non-letter characters")]
    InvalidWord(String),
    #[error("onset at {onset_ms} ms does not fit in {total_ms} ms with a {burst_ms} ms burst")]
    OnsetOutOfRange {
        onset_ms: f64,
        total_ms: f64,
        burst_ms: f64,
    },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairTiming {
    pub mean_ms: f64,
    pub std_ms: f64,
}

#[derive(Serialize, Deserialize)]
struct PairTimingRow {
    a: Letter,
    b: Letter,
    mean_ms: f64,
    std_ms: f64,
}

mod pair_rows {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<KeyPair, PairTiming>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let rows: Vec<PairTimingRow> = map
            .iter()
            .map(|(p, t)| PairTimingRow {
                a: p.first,
                b: p.second,
                mean_ms: t.mean_ms,
                std_ms: t.std_ms,
            })
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<KeyPair, PairTiming>, D::Error> {
        let rows = Vec::<PairTimingRow>::deserialize(d)?;
        Ok(rows
            .into_iter()
            .map(|r| {
                (
                    KeyPair::new(r.a, r.b),
                    PairTiming {
                        mean_ms: r.mean_ms,
                        std_ms: r.std_ms,
                    },
                )
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypistProfile {
    #[serde(with = "pair_rows")]
    pub pairs: BTreeMap<KeyPair, PairTiming>,
    pub burst_ms: f64,
    pub burst_amp: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl TypistProfile {
    pub const DEFAULT_BURST_MS: f64 = 100.0;
    pub const DEFAULT_BURST_AMP: f64 = 0.8;

    pub fn new(pairs: BTreeMap<KeyPair, PairTiming>, seed: u64) -> Self {
        Self {
            pairs,
            burst_ms: Self::DEFAULT_BURST_MS,
            burst_amp: Self::DEFAULT_BURST_AMP,
            noise_std: 0.0,
            seed,
        }
    }

    /// Means drawn uniformly from `mean_range_ms` for every pair in `pairs`,
    /// all with the same standard deviation.
    pub fn random<I>(pairs: I, mean_range_ms: (f64, f64), std_ms: f64, seed: u64) -> Self
    where
        I: IntoIterator<Item = KeyPair>,
    {
        let mut rng = task_rng(seed, u64::MAX);
        let (lo, hi) = mean_range_ms;
        let map = pairs
            .into_iter()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .map(|p| {
                let mean = if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                };
                (
                    p,
                    PairTiming {
                        mean_ms: mean.round(),
                        std_ms,
                    },
                )
            })
            .collect();
        Self::new(map, seed)
    }

    /// Every adjacent pair of `words`, each mapped to a distinct mean such
    /// that neighbouring means are at least three tolerance windows of
    /// `tolerance_pct` apart. Means start at `base_ms`, are whole
    /// milliseconds, and are assigned to pairs in a seeded shuffled order.
    pub fn separated(
        words: &[&str],
        base_ms: f64,
        tolerance_pct: f64,
        seed: u64,
    ) -> Result<Self, SynthError> {
        if !(0.0..1.0 / 3.0).contains(&tolerance_pct) {
            return Err(SynthError::InvalidProfile(
                "tolerance_pct must be in [0, 1/3)".into(),
            ));
        }
        let mut pairs = Vec::new();
        for w in words {
            let wp = KeyPair::of_word(w).ok_or_else(|| SynthError::InvalidWord(w.to_string()))?;
            for p in wp {
                if !pairs.contains(&p) {
                    pairs.push(p);
                }
            }
        }
        pairs.sort();
        let mut rng = task_rng(seed, u64::MAX);
        for i in (1..pairs.len()).rev() {
            pairs.swap(i, rng.random_range(0..=i));
        }
        let mut means = Vec::with_capacity(pairs.len());
        let mut mean = base_ms.round();
        for _ in 0..pairs.len() {
            means.push(mean);
            // next - mean >= 3 * pct * next, plus a millisecond of headroom
            mean = (mean / (1.0 - 3.0 * tolerance_pct)).ceil() + 1.0;
        }
        let map = pairs
            .into_iter()
            .zip(means)
            .map(|(p, m)| {
                (
                    p,
                    PairTiming {
                        mean_ms: m,
                        std_ms: 0.0,
                    },
                )
            })
            .collect();
        Ok(Self::new(map, seed))
    }

    pub fn with_std(mut self, std_ms: f64) -> Self {
        for t in self.pairs.values_mut() {
            t.std_ms = std_ms;
        }
        self
    }

    pub fn with_noise(mut self, noise_std: f64) -> Self {
        self.noise_std = noise_std;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidProfile(m));
        if !(self.burst_ms > 0.0) {
            return bad("burst_ms must be positive".into());
        }
        if !(self.burst_amp > 0.0 && self.burst_amp <= 1.0) {
            return bad("burst_amp must be in (0, 1]".into());
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std must be non-negative".into());
        }
        for (p, t) in &self.pairs {
            if !(t.mean_ms > self.burst_ms) {
                return bad(format!("pair {p}: mean {} must exceed burst_ms", t.mean_ms));
            }
            if !(t.std_ms >= 0.0 && t.std_ms.is_finite()) {
                return bad(format!("pair {p}: std must be non-negative"));
            }
        }
        Ok(())
    }

    /// Mean of the per-pair standard deviations.
    pub fn mean_std_ms(&self) -> f64 {
        if self.pairs.is_empty() {
            return 0.0;
        }
        self.pairs.values().map(|t| t.std_ms).sum::<f64>() / self.pairs.len() as f64
    }
}

/// RNG for task `task` of a run seeded with `seed`.
pub fn task_rng(seed: u64, task: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(task);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthWord {
    pub word: String,
    /// Press times relative to the word's first key, which is at 0.
    pub onsets_ms: Vec<f64>,
    /// Absolute press time of the first key within the session.
    pub start_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSession {
    pub session: TypingSession,
    pub words: Vec<SynthWord>,
    pub intervals_drawn: usize,
    pub truncated: usize,
}

impl SynthSession {
    /// Fraction of drawn intervals that hit the non-overlap floor.
    pub fn truncation_rate(&self) -> f64 {
        if self.intervals_drawn == 0 {
            0.0
        } else {
            self.truncated as f64 / self.intervals_drawn as f64
        }
    }
}

/// Types `words` with the profile's own seed (stream 0).
pub fn synth_session<S: AsRef<str>>(
    profile: &TypistProfile,
    words: &[S],
) -> Result<SynthSession, SynthError> {
    synth_session_with(profile, words, &mut task_rng(profile.seed, 0))
}

pub fn synth_session_with<S: AsRef<str>, R: Rng>(
    profile: &TypistProfile,
    words: &[S],
    rng: &mut R,
) -> Result<SynthSession, SynthError> {
    profile.validate()?;
    let hold_ms = profile.burst_ms * 0.8;
    let floor = profile.burst_ms + 1.0;
    let mut events = Vec::new();
    let mut out_words = Vec::with_capacity(words.len());
    let mut cursor = 0.0;
    let mut drawn = 0;
    let mut truncated = 0;

    for word in words {
        let word = word.as_ref();
        let letters = crate::key::letters_of(word)
            .filter(|l| !l.is_empty())
            .ok_or_else(|| SynthError::InvalidWord(word.to_string()))?;
        let mut onsets = Vec::with_capacity(letters.len());
        let mut t = 0.0;
        onsets.push(t);
        for w in letters.windows(2) {
            let pair = KeyPair::new(w[0], w[1]);
            let timing = profile
                .pairs
                .get(&pair)
                .ok_or_else(|| SynthError::UnknownPair {
                    word: word.to_string(),
                    pair,
                })?;
            let sample = if timing.std_ms > 0.0 {
                Normal::new(timing.mean_ms, timing.std_ms)
                    .map_err(|e| SynthError::InvalidProfile(e.to_string()))?
                    .sample(rng)
            } else {
                timing.mean_ms
            };
            drawn += 1;
            let interval = if sample < floor {
                truncated += 1;
                floor
            } else {
                sample
            };
            t += interval;
            onsets.push(t);
        }
        for (l, &on) in letters.iter().zip(&onsets) {
            events.push(KeystrokeEvent {
                key: KeyLabel::Letter(*l),
                press_ms: cursor + on,
                release_ms: cursor + on + hold_ms,
                virtual_code: 0x41 + l.index() as u32,
                scan_code: 0,
                caps: false,
                shift: false,
            });
        }
        let space_at = cursor + t + WORD_GAP_MS;
        events.push(KeystrokeEvent {
            key: KeyLabel::Space,
            press_ms: space_at,
            release_ms: space_at + hold_ms,
            virtual_code: 0x20,
            scan_code: 0x39,
            caps: false,
            shift: false,
        });
        out_words.push(SynthWord {
            word: word.to_ascii_lowercase(),
            onsets_ms: onsets,
            start_ms: cursor,
        });
        cursor = space_at + WORD_GAP_MS;
    }

    Ok(SynthSession {
        session: TypingSession::new(format!("synth-{}", profile.seed), events),
        words: out_words,
        intervals_drawn: drawn,
        truncated,
    })
}

/// Renders clicks at `onsets_ms` into `total_ms` of audio using the
/// profile's seed (stream 1).
pub fn synth_audio(
    onsets_ms: &[f64],
    profile: &TypistProfile,
    sample_rate: u32,
    total_ms: f64,
) -> Result<AudioSignal, SynthError> {
    synth_audio_with(
        onsets_ms,
        profile,
        sample_rate,
        total_ms,
        &mut task_rng(profile.seed, 1),
    )
}

pub fn synth_audio_with<R: Rng>(
    onsets_ms: &[f64],
    profile: &TypistProfile,
    sample_rate: u32,
    total_ms: f64,
    rng: &mut R,
) -> Result<AudioSignal, SynthError> {
    profile.validate()?;
    if sample_rate == 0 {
        return Err(SynthError::InvalidProfile(
            "sample rate must be positive".into(),
        ));
    }
    let total = audio::ms_to_samples(total_ms.max(0.0), sample_rate);
    let burst = audio::ms_to_samples(profile.burst_ms, sample_rate).max(1);
    let mut samples = vec![0.0f64; total];

    for &onset in onsets_ms {
        let start = audio::ms_to_samples(onset.max(0.0), sample_rate);
        if onset < 0.0 || start + burst > total {
            return Err(SynthError::OnsetOutOfRange {
                onset_ms: onset,
                total_ms,
                burst_ms: profile.burst_ms,
            });
        }
        let span = (burst - 1).max(1) as f64;
        for (j, s) in samples[start..start + burst].iter_mut().enumerate() {
            let env = profile.burst_amp * (1.0 - 0.9 * j as f64 / span);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            *s += sign * env;
        }
    }
    if profile.noise_std > 0.0 {
        for s in samples.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *s += profile.noise_std * z;
        }
    }
    for s in samples.iter_mut() {
        *s = s.clamp(-1.0, 1.0);
    }
    Ok(AudioSignal::new(samples, sample_rate).expect("clamped samples are in range"))
}

/// Renders one word's clicks with [`LEAD_MS`] of silence before the first
/// key and [`TAIL_MS`] after the last burst. Returns the audio and the
/// onsets as placed in it.
pub fn render_word<R: Rng>(
    word: &SynthWord,
    profile: &TypistProfile,
    sample_rate: u32,
    rng: &mut R,
) -> Result<(AudioSignal, Vec<f64>), SynthError> {
    let placed: Vec<f64> = word.onsets_ms.iter().map(|t| t + LEAD_MS).collect();
    let last = placed.last().copied().unwrap_or(LEAD_MS);
    let total = last + profile.burst_ms + TAIL_MS;
    let signal = synth_audio_with(&placed, profile, sample_rate, total, rng)?;
    Ok((signal, placed))
}
