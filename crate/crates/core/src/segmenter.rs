//! Keystroke onset detection.
//!
//! A window of `frame_len` samples slides over the signal with a hop of one
//! and accumulates absolute amplitude. Onsets are then taken greedily: the
//! strongest remaining window wins, and its neighbourhood
//! `(b - min_gap, b + frame_len + min_gap)` is cleared before the next pick.
//! Intervals between keystrokes are measured between segment starts.

use std::io;
use std::ops::Range;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::audio::{self, AudioError, AudioSignal};

/// Windows between exact recomputations of the running sum.
const RESYNC_INTERVAL: usize = 1 << 16;

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("frame length must be at least one sample")]
    ZeroFrame,
    #[error("frame of {frame_len} samples is longer than the {len}-sample signal")]
    FrameTooLong { frame_len: usize, len: usize },
    #[error("at least one keystroke must be requested")]
    ZeroKeystrokes,
    #[error("only {found} of {requested} keystrokes found before the energy ran out")]
    NotEnoughPeaks { found: usize, requested: usize },
    #[error("{0} onset(s) given, intervals need at least two")]
    TooFewOnsets(usize),
    #[error("onsets must be strictly increasing")]
    UnsortedOnsets,
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Sum of absolute amplitude for every full window of the signal.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyArray {
    values: Vec<f64>,
    frame_len: usize,
    sample_rate: u32,
}

impl EnergyArray {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Wraps precomputed window energies. Negative values are rejected.
    pub fn from_values(values: Vec<f64>, frame_len: usize, sample_rate: u32) -> Option<Self> {
        (frame_len > 0 && values.iter().all(|v| *v >= 0.0)).then_some(Self {
            values,
            frame_len,
            sample_rate,
        })
    }
}

/// Neumaier-compensated accumulator.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn window_sum(samples: &[f64]) -> CompensatedSum {
    let mut acc = CompensatedSum::default();
    for s in samples {
        acc.add(s.abs());
    }
    acc
}

/// Computes `values[i] = sum(|samples[i..i + frame_len]|)` for every
/// `i` in `0..=len - frame_len`.
pub fn energy(signal: &AudioSignal, frame_len: usize) -> Result<EnergyArray, SegmentError> {
    let values = energy_of(signal.samples(), frame_len)?;
    Ok(EnergyArray {
        values,
        frame_len,
        sample_rate: signal.sample_rate(),
    })
}

/// Sliding-window energy over raw samples.
pub fn energy_of(samples: &[f64], frame_len: usize) -> Result<Vec<f64>, SegmentError> {
    if frame_len == 0 {
        return Err(SegmentError::ZeroFrame);
    }
    if frame_len > samples.len() {
        return Err(SegmentError::FrameTooLong {
            frame_len,
            len: samples.len(),
        });
    }
    let count = samples.len() - frame_len + 1;
    let mut values = Vec::with_capacity(count);
    let mut acc = window_sum(&samples[..frame_len]);
    values.push(acc.value().max(0.0));
    for i in 1..count {
        if i % RESYNC_INTERVAL == 0 {
            acc = window_sum(&samples[i..i + frame_len]);
        } else {
            acc.add(samples[i + frame_len - 1].abs());
            acc.add(-samples[i - 1].abs());
        }
        values.push(acc.value().max(0.0));
    }
    Ok(values)
}

/// Sorted keystroke onsets (sample indices) found in one recording.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OnsetList {
    onsets: Vec<usize>,
    frame_len: usize,
    sample_rate: u32,
}

impl OnsetList {
    pub fn new(
        onsets: Vec<usize>,
        frame_len: usize,
        sample_rate: u32,
    ) -> Result<Self, SegmentError> {
        if onsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SegmentError::UnsortedOnsets);
        }
        Ok(Self {
            onsets,
            frame_len,
            sample_rate,
        })
    }

    pub fn onsets(&self) -> &[usize] {
        &self.onsets
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.onsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.onsets.is_empty()
    }

    pub fn onsets_ms(&self) -> Vec<f64> {
        self.onsets
            .iter()
            .map(|&b| audio::samples_to_ms(b, self.sample_rate))
            .collect()
    }
}

fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Picks `k` onsets by repeated maximum extraction.
///
/// After each pick `b`, every window index `i` with
/// `b - min_gap < i < b + frame_len + min_gap` is cleared, and so is `b`
/// itself. Ties go to the smallest index. The result is sorted.
pub fn pick_onsets(
    energy: &EnergyArray,
    k: usize,
    min_gap: usize,
) -> Result<OnsetList, SegmentError> {
    if k == 0 {
        return Err(SegmentError::ZeroKeystrokes);
    }
    let mut remaining = energy.values.clone();
    let mut picked = Vec::with_capacity(k);
    for n in 0..k {
        let b = match argmax(&remaining) {
            Some(b) if remaining[b] > 0.0 => b,
            _ => {
                return Err(SegmentError::NotEnoughPeaks {
                    found: n,
                    requested: k,
                })
            }
        };
        picked.push(b);
        let lo = (b + 1).saturating_sub(min_gap.max(1));
        let hi = (b + energy.frame_len + min_gap).min(remaining.len());
        remaining[lo..hi].fill(0.0);
    }
    picked.sort_unstable();
    OnsetList::new(picked, energy.frame_len, energy.sample_rate)
}

/// Inter-keystroke intervals in milliseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSequence {
    deltas_ms: Vec<f64>,
}

impl IntervalSequence {
    /// Builds a sequence directly from millisecond deltas; all must be positive.
    pub fn from_ms(deltas_ms: Vec<f64>) -> Option<Self> {
        deltas_ms
            .iter()
            .all(|d| *d > 0.0 && d.is_finite())
            .then_some(Self { deltas_ms })
    }

    pub fn deltas_ms(&self) -> &[f64] {
        &self.deltas_ms
    }

    pub fn len(&self) -> usize {
        self.deltas_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas_ms.is_empty()
    }
}

pub fn intervals(onsets: &OnsetList) -> Result<IntervalSequence, SegmentError> {
    if onsets.len() < 2 {
        return Err(SegmentError::TooFewOnsets(onsets.len()));
    }
    let rate = onsets.sample_rate as f64;
    let deltas_ms = onsets
        .onsets
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64 * 1000.0 / rate)
        .collect();
    Ok(IntervalSequence { deltas_ms })
}

/// Half-open sample ranges `[b, b + frame_len)` for each onset, clipped to
/// the end of the signal.
pub fn extract_segments(signal: &AudioSignal, onsets: &OnsetList) -> Vec<Range<usize>> {
    let len = signal.len();
    onsets
        .onsets
        .iter()
        .map(|&b| b.min(len)..(b + onsets.frame_len).min(len))
        .collect()
}

/// Writes each segment as `segment_NNN.wav` (1-based) into `dir`.
pub fn write_segments(
    dir: &Path,
    signal: &AudioSignal,
    segments: &[Range<usize>],
) -> Result<Vec<PathBuf>, SegmentError> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(segments.len());
    for (i, range) in segments.iter().enumerate() {
        let path = dir.join(format!("segment_{:03}.wav", i + 1));
        audio::write_wav(&path, &signal.slice(range.clone()))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Writes `index,onset_sample,onset_ms,delta_ms`; `delta_ms` is the gap to
/// the previous onset and is empty on the first row.
pub fn write_onsets_csv<W: io::Write>(out: W, onsets: &OnsetList) -> Result<(), SegmentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "onset_sample", "onset_ms", "delta_ms"])?;
    let ms = onsets.onsets_ms();
    for (i, (&b, &t)) in onsets.onsets.iter().zip(&ms).enumerate() {
        let delta = if i == 0 {
            String::new()
        } else {
            let prev = onsets.onsets[i - 1];
            format!("{}", (b - prev) as f64 * 1000.0 / onsets.sample_rate as f64)
        };
        w.write_record([i.to_string(), b.to_string(), t.to_string(), delta])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn direct_energy(samples: &[f64], frame_len: usize) -> Vec<f64> {
        (0..=samples.len() - frame_len)
            .map(|i| samples[i..i + frame_len].iter().map(|s| s.abs()).sum())
            .collect()
    }

    fn sig(samples: Vec<f64>, rate: u32) -> AudioSignal {
        AudioSignal::new(samples, rate).unwrap()
    }

    #[test]
    fn energy_small_example() {
        let e = energy(&sig(vec![0.0, 0.0, 1.0, 0.0, 0.0], 1000), 2).unwrap();
        assert_eq!(e.values(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn energy_zero_and_identity() {
        let e = energy(&sig(vec![0.0; 50], 1000), 7).unwrap();
        assert_eq!(e.values().len(), 44);
        assert!(e.values().iter().all(|v| *v == 0.0));
        let e = energy(&sig(vec![0.5], 1000), 1).unwrap();
        assert_eq!(e.values(), &[0.5]);
    }

    #[test]
    fn energy_frame_errors() {
        let s = sig(vec![0.1; 4], 1000);
        assert!(matches!(
            energy(&s, 5),
            Err(SegmentError::FrameTooLong {
                frame_len: 5,
                len: 4
            })
        ));
        assert!(matches!(energy(&s, 0), Err(SegmentError::ZeroFrame)));
    }

    #[test]
    fn energy_survives_resync_boundary() {
        let samples: Vec<f64> = (0..RESYNC_INTERVAL + 5000)
            .map(|i| (i as f64 * 0.37).sin() * 0.9)
            .collect();
        let got = energy_of(&samples, 300).unwrap();
        let want = direct_energy(&samples, 300);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-9);
        }
    }

    #[test]
    fn pick_example_from_hand_simulation() {
        let e = EnergyArray::from_values(vec![0.0, 5.0, 3.0, 0.0, 0.0, 0.0, 9.0, 0.0], 1, 1000)
            .unwrap();
        let onsets = pick_onsets(&e, 2, 2).unwrap();
        assert_eq!(onsets.onsets(), &[1, 6]);
    }

    #[test]
    fn pick_single_spike() {
        let mut v = vec![0.0; 40];
        v[17] = 2.5;
        let e = EnergyArray::from_values(v, 4, 1000).unwrap();
        assert_eq!(pick_onsets(&e, 1, 4).unwrap().onsets(), &[17]);
    }

    #[test]
    fn pick_all_zero_fails() {
        let e = EnergyArray::from_values(vec![0.0; 3], 1, 1000).unwrap();
        assert!(matches!(
            pick_onsets(&e, 1, 0),
            Err(SegmentError::NotEnoughPeaks {
                found: 0,
                requested: 1
            })
        ));
    }

    #[test]
    fn pick_ties_prefer_smallest_index() {
        let e = EnergyArray::from_values(vec![1.0, 3.0, 3.0, 3.0], 1, 1000).unwrap();
        assert_eq!(pick_onsets(&e, 1, 1).unwrap().onsets(), &[1]);
    }

    #[test]
    fn pick_with_zero_gap_never_repeats_index() {
        let e = EnergyArray::from_values(vec![0.0, 4.0, 0.0, 0.0, 1.0], 1, 1000).unwrap();
        assert_eq!(pick_onsets(&e, 2, 0).unwrap().onsets(), &[1, 4]);
    }

    #[test]
    fn interval_examples() {
        let o = OnsetList::new(vec![100, 400, 800], 10, 1000).unwrap();
        assert_eq!(intervals(&o).unwrap().deltas_ms(), &[300.0, 400.0]);
        let o = OnsetList::new(vec![0, 4410], 10, 44100).unwrap();
        assert_eq!(intervals(&o).unwrap().deltas_ms(), &[100.0]);
        let o = OnsetList::new(vec![10, 20, 30], 1, 1000).unwrap();
        assert_eq!(intervals(&o).unwrap().deltas_ms(), &[10.0, 10.0]);
        let o = OnsetList::new(vec![10], 1, 1000).unwrap();
        assert!(matches!(intervals(&o), Err(SegmentError::TooFewOnsets(1))));
    }

    #[test]
    fn segment_examples() {
        let s = sig(vec![0.0; 1000], 1000);
        let o = OnsetList::new(vec![100, 400], 100, 1000).unwrap();
        assert_eq!(extract_segments(&s, &o), vec![100..200, 400..500]);
        let o = OnsetList::new(vec![950], 100, 1000).unwrap();
        assert_eq!(extract_segments(&s, &o), vec![950..1000]);
        let o = OnsetList::new(vec![], 100, 1000).unwrap();
        assert!(extract_segments(&s, &o).is_empty());
    }

    #[test]
    fn onsets_csv_layout() {
        let o = OnsetList::new(vec![0, 300, 700], 100, 1000).unwrap();
        let mut buf = Vec::new();
        write_onsets_csv(&mut buf, &o).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "index,onset_sample,onset_ms,delta_ms\n0,0,0,\n1,300,300,300\n2,700,700,400\n"
        );
    }

    #[test]
    fn segments_written_as_wav() {
        let dir = tempfile::tempdir().unwrap();
        let s = sig((0..1000).map(|i| (i % 7) as f64 / 10.0).collect(), 1000);
        let o = OnsetList::new(vec![100, 400], 100, 1000).unwrap();
        let paths = write_segments(dir.path(), &s, &extract_segments(&s, &o)).unwrap();
        assert_eq!(paths.len(), 2);
        let back = audio::load_wav(&paths[1]).unwrap();
        assert_eq!(back.len(), 100);
    }

    proptest! {
        #[test]
        fn energy_matches_direct_sum(
            samples in proptest::collection::vec(-1.0f64..=1.0, 1..3000),
            frame in 1usize..300,
        ) {
            let frame = frame.min(samples.len());
            let got = energy_of(&samples, frame).unwrap();
            let want = direct_energy(&samples, frame);
            prop_assert_eq!(got.len(), samples.len() - frame + 1);
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() <= 1e-9);
                prop_assert!(*g >= 0.0);
            }
        }

        #[test]
        fn picked_onsets_sorted_and_separated(
            values in proptest::collection::vec(0.0f64..10.0, 10..400),
            frame in 1usize..20,
            gap in 0usize..20,
            k in 1usize..6,
        ) {
            let e = EnergyArray::from_values(values, frame, 1000).unwrap();
            if let Ok(o) = pick_onsets(&e, k, gap) {
                prop_assert_eq!(o.len(), k);
                for w in o.onsets().windows(2) {
                    prop_assert!(w[1] - w[0] >= gap.max(1));
                }
                if k >= 2 {
                    let d = intervals(&o).unwrap();
                    prop_assert!(d.deltas_ms().iter().all(|x| *x > 0.0));
                    let total: f64 = d.deltas_ms().iter().sum();
                    let span = (o.onsets()[k - 1] - o.onsets()[0]) as f64;
                    prop_assert!((total - span).abs() < 1e-6);
                }
            }
        }
    }
}
