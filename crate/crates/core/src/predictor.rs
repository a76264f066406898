//! Candidate-word recovery from inter-keystroke intervals.
//!
//! For each interval the model yields the key pairs whose mean interval is
//! within the tolerance window and whose first key can follow the previous
//! step. Those pairs grow a letter tree one level per interval; branches that
//! fail to reach full depth are pruned, the surviving root-to-leaf paths are
//! the raw candidate words, and the lexicon keeps the real ones.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::audio::{self, AudioSignal};
use crate::key::{Letter, LetterSet};
use crate::lexicon::Lexicon;
use crate::model::TimingModel;
use crate::segmenter::{self, IntervalSequence, SegmentError};

/// Construction stops once this many partial paths are alive at one depth.
pub const MAX_LIVE_PATHS: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum PredictError {
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error("no model pair matches interval {step} ({delta_ms:.1} ms, tolerance {t_f:.1} ms)")]
    NoCandidates {
        step: usize,
        delta_ms: f64,
        t_f: f64,
    },
    #[error("candidate tree exceeded {MAX_LIVE_PATHS} live paths at interval {step} ({paths})")]
    CandidateExplosion { step: usize, paths: usize },
    #[error("at least two keystrokes are needed, got {0}")]
    TooFewKeystrokes(usize),
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
}

impl PredictError {
    /// True for failures that mean "the pipeline ran but found nothing".
    pub fn is_pipeline_failure(&self) -> bool {
        matches!(
            self,
            PredictError::NoCandidates { .. }
                | PredictError::CandidateExplosion { .. }
                | PredictError::Segment(SegmentError::NotEnoughPeaks { .. })
                | PredictError::Segment(SegmentError::FrameTooLong { .. })
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictSettings {
    pub frame_ms: f64,
    pub min_gap_ms: f64,
    pub tolerance_pct: f64,
    pub std_coeff: f64,
}

impl Default for PredictSettings {
    fn default() -> Self {
        Self {
            frame_ms: 100.0,
            min_gap_ms: 100.0,
            tolerance_pct: 0.05,
            std_coeff: 1.0,
        }
    }
}

impl PredictSettings {
    pub fn validate(&self) -> Result<(), PredictError> {
        let bad = |m: &str| Err(PredictError::InvalidSettings(m.into()));
        if !(self.frame_ms > 0.0 && self.frame_ms.is_finite()) {
            return bad("frame_ms must be positive");
        }
        if !(self.min_gap_ms >= 0.0 && self.min_gap_ms.is_finite()) {
            return bad("min_gap_ms must be non-negative");
        }
        if !(self.tolerance_pct >= 0.0 && self.tolerance_pct.is_finite()) {
            return bad("tolerance_pct must be non-negative");
        }
        if !(self.std_coeff >= 0.0 && self.std_coeff.is_finite()) {
            return bad("std_coeff must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Node {
    value: Option<Letter>,
    children: BTreeMap<Letter, usize>,
}

impl Node {
    fn new(value: Option<Letter>) -> Self {
        Self {
            value,
            children: BTreeMap::new(),
        }
    }
}

/// Letter tree rooted at an empty node. After [`build_tree`] every leaf sits
/// at depth `depth()`.
#[derive(Debug, Clone)]
pub struct CandidateTree {
    nodes: Vec<Node>,
    depth: usize,
}

impl CandidateTree {
    fn empty(depth: usize) -> Self {
        Self {
            nodes: vec![Node::new(None)],
            depth,
        }
    }

    fn add_child(&mut self, parent: usize, letter: Letter) -> usize {
        if let Some(&idx) = self.nodes[parent].children.get(&letter) {
            return idx;
        }
        let idx = self.nodes.len();
        self.nodes.push(Node::new(Some(letter)));
        self.nodes[parent].children.insert(letter, idx);
        idx
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Nodes reachable from the root, root included.
    pub fn node_count(&self) -> usize {
        let mut count = 0;
        let mut stack = vec![0];
        while let Some(n) = stack.pop() {
            count += 1;
            stack.extend(self.nodes[n].children.values());
        }
        count
    }

    pub fn is_empty(&self) -> bool {
        self.nodes[0].children.is_empty()
    }

    /// Drops every branch that does not reach full depth.
    fn prune(&mut self) {
        fn keep(
            tree: &CandidateTree,
            node: usize,
            depth: usize,
            out: &mut Vec<Node>,
        ) -> Option<usize> {
            let src = &tree.nodes[node];
            if depth == tree.depth {
                out.push(Node::new(src.value));
                return Some(out.len() - 1);
            }
            let mut kept = BTreeMap::new();
            for (&letter, &child) in &src.children {
                if let Some(idx) = keep(tree, child, depth + 1, out) {
                    kept.insert(letter, idx);
                }
            }
            if kept.is_empty() && depth > 0 {
                return None;
            }
            out.push(Node {
                value: src.value,
                children: kept,
            });
            Some(out.len() - 1)
        }

        let mut out = Vec::with_capacity(self.nodes.len());
        let root = keep(self, 0, 0, &mut out).expect("root is always kept");
        // Re-root so index 0 is the root again.
        out.swap(0, root);
        for node in &mut out {
            for idx in node.children.values_mut() {
                if *idx == root {
                    *idx = 0;
                } else if *idx == 0 {
                    *idx = root;
                }
            }
        }
        self.nodes = out;
    }
}

/// Per-interval tolerance windows `t_f`.
pub fn tolerances(
    model: &TimingModel,
    deltas: &IntervalSequence,
    pct: f64,
    std_coeff: f64,
) -> Vec<f64> {
    deltas
        .deltas_ms()
        .iter()
        .map(|&d| model.tolerance(d, pct, std_coeff))
        .collect()
}

/// Grows the candidate tree for `deltas` and prunes short branches.
///
/// The first interval creates both levels of each matching pair; every later
/// interval attaches the second key of each pair under every frontier node
/// holding the pair's first key. An interval with no matching pair is
/// reported as [`PredictError::NoCandidates`].
pub fn build_tree(
    model: &TimingModel,
    deltas: &IntervalSequence,
    pct: f64,
    std_coeff: f64,
) -> Result<CandidateTree, PredictError> {
    if deltas.is_empty() {
        return Err(PredictError::TooFewKeystrokes(deltas.len() + 1));
    }
    let k = deltas.len() + 1;
    let mut tree = CandidateTree::empty(k);
    let mut allowed = LetterSet::ALL;
    let mut frontier: Vec<usize> = Vec::new();

    for (step, &delta_ms) in deltas.deltas_ms().iter().enumerate() {
        let t_f = model.tolerance(delta_ms, pct, std_coeff);
        let cands = model.candidates(delta_ms, t_f, allowed);
        if cands.is_empty() {
            return Err(PredictError::NoCandidates {
                step: step + 1,
                delta_ms,
                t_f,
            });
        }
        allowed = cands.iter().map(|c| c.pair.second).collect();

        let mut next = Vec::new();
        if step == 0 {
            for c in &cands {
                let first = tree.add_child(0, c.pair.first);
                next.push(tree.add_child(first, c.pair.second));
            }
        } else {
            let mut by_first: [Vec<Letter>; 26] = Default::default();
            for c in &cands {
                by_first[c.pair.first.index()].push(c.pair.second);
            }
            for &node in &frontier {
                let value = tree.nodes[node]
                    .value
                    .expect("frontier nodes carry letters");
                for &second in &by_first[value.index()] {
                    next.push(tree.add_child(node, second));
                }
                if next.len() > MAX_LIVE_PATHS {
                    return Err(PredictError::CandidateExplosion {
                        step: step + 1,
                        paths: next.len(),
                    });
                }
            }
        }
        frontier = next;
    }
    tree.prune();
    Ok(tree)
}

/// All root-to-leaf words in lexicographic order.
pub fn enumerate_words(tree: &CandidateTree) -> Vec<String> {
    fn walk(tree: &CandidateTree, node: usize, prefix: &mut String, out: &mut Vec<String>) {
        let n = &tree.nodes[node];
        if let Some(l) = n.value {
            prefix.push(l.as_char());
        }
        if n.children.is_empty() {
            if !prefix.is_empty() {
                out.push(prefix.clone());
            }
        } else {
            for &child in n.children.values() {
                walk(tree, child, prefix, out);
            }
        }
        if n.value.is_some() {
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    walk(tree, 0, &mut String::with_capacity(tree.depth), &mut out);
    assert!(
        out.windows(2).all(|w| w[0] < w[1]),
        "tree paths must be unique and ordered"
    );
    out
}

/// The words of `words` that the lexicon contains, in input order.
pub fn filter_dictionary(words: &[String], lexicon: &Lexicon) -> Vec<String> {
    words
        .iter()
        .filter(|w| lexicon.contains(w))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictParams {
    pub k: usize,
    pub frame_ms: f64,
    pub min_gap_ms: f64,
    pub tolerance_pct: f64,
    pub std_coeff: f64,
    pub asd_ms: f64,
    pub sample_rate: u32,
    pub frame_samples: usize,
    pub min_gap_samples: usize,
    pub tolerances_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionResult {
    pub words_all: Vec<String>,
    pub words_dict: Vec<String>,
    pub params: PredictParams,
    pub onsets_ms: Vec<f64>,
    pub deltas_ms: Vec<f64>,
}

/// Runs segmentation, interval extraction, tree search and dictionary
/// filtering on one recording of a `k`-letter word.
pub fn predict(
    model: &TimingModel,
    signal: &AudioSignal,
    k: usize,
    settings: &PredictSettings,
    lexicon: &Lexicon,
) -> Result<PredictionResult, PredictError> {
    if k < 2 {
        return Err(PredictError::TooFewKeystrokes(k));
    }
    settings.validate()?;
    let rate = signal.sample_rate();
    let frame_samples = audio::ms_to_samples(settings.frame_ms, rate).max(1);
    let min_gap_samples = audio::ms_to_samples(settings.min_gap_ms, rate);

    let energy = segmenter::energy(signal, frame_samples)?;
    let onsets = segmenter::pick_onsets(&energy, k, min_gap_samples)?;
    let deltas = segmenter::intervals(&onsets)?;
    let tree = build_tree(model, &deltas, settings.tolerance_pct, settings.std_coeff)?;
    let words_all = enumerate_words(&tree);
    let words_dict = filter_dictionary(&words_all, lexicon);

    Ok(PredictionResult {
        words_all,
        words_dict,
        params: PredictParams {
            k,
            frame_ms: settings.frame_ms,
            min_gap_ms: settings.min_gap_ms,
            tolerance_pct: settings.tolerance_pct,
            std_coeff: settings.std_coeff,
            asd_ms: model.asd_ms(),
            sample_rate: rate,
            frame_samples,
            min_gap_samples,
            tolerances_ms: tolerances(model, &deltas, settings.tolerance_pct, settings.std_coeff),
        },
        onsets_ms: onsets.onsets_ms(),
        deltas_ms: deltas.deltas_ms().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::key::KeyPair;
    use crate::model::{train, Observation};
    use proptest::prelude::*;

    fn model_of(entries: &[(&str, &[f64])]) -> TimingModel {
        let obs: Vec<Observation> = entries
            .iter()
            .flat_map(|(p, ds)| {
                ds.iter().map(move |&d| Observation {
                    pair: KeyPair::parse(p).unwrap(),
                    delta_ms: d,
                })
            })
            .collect();
        train(&obs).unwrap()
    }

    fn deltas(d: &[f64]) -> IntervalSequence {
        IntervalSequence::from_ms(d.to_vec()).unwrap()
    }

    fn words(model: &TimingModel, d: &[f64], pct: f64, coeff: f64) -> Vec<String> {
        enumerate_words(&build_tree(model, &deltas(d), pct, coeff).unwrap())
    }

    /// Naive oracle: every word over `alphabet` whose adjacent pairs all
    /// match their interval.
    fn brute_force(
        model: &TimingModel,
        d: &[f64],
        pct: f64,
        coeff: f64,
        alphabet: &[Letter],
    ) -> Vec<String> {
        let k = d.len() + 1;
        let n = alphabet.len();
        let mut out = Vec::new();
        let mut idx = vec![0usize; k];
        if n == 0 {
            return out;
        }
        loop {
            let word: Vec<Letter> = idx.iter().map(|&i| alphabet[i]).collect();
            let ok = (0..k - 1).all(|i| {
                let t_f = model.tolerance(d[i], pct, coeff);
                model
                    .get(KeyPair::new(word[i], word[i + 1]))
                    .is_some_and(|s| s.mean_ms - t_f <= d[i] && d[i] <= s.mean_ms + t_f)
            });
            if ok {
                out.push(word.iter().map(|l| l.as_char()).collect());
            }
            let mut pos = k;
            loop {
                if pos == 0 {
                    out.sort();
                    return out;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < n {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }

    #[test]
    fn top_only() {
        let m = model_of(&[
            ("to", &[300.0, 310.0]),
            ("bo", &[475.0, 485.0]),
            ("op", &[400.0]),
        ]);
        assert_eq!(words(&m, &[300.0, 400.0], 0.05, 0.0), vec!["top"]);
        let alphabet = Letter::ALL;
        assert_eq!(
            brute_force(&m, &[300.0, 400.0], 0.05, 0.0, &alphabet),
            vec!["top"]
        );
    }

    #[test]
    fn ambiguous_first_pair() {
        let m = model_of(&[("to", &[300.0, 310.0]), ("bo", &[300.0]), ("op", &[400.0])]);
        assert_eq!(words(&m, &[300.0, 400.0], 0.05, 0.0), vec!["bop", "top"]);
    }

    #[test]
    fn unconnected_branch_is_pruned() {
        let m = model_of(&[("to", &[300.0]), ("ba", &[300.0]), ("op", &[400.0])]);
        let tree = build_tree(&m, &deltas(&[300.0, 400.0]), 0.0, 0.0).unwrap();
        assert_eq!(enumerate_words(&tree), vec!["top"]);
        // root, t, o, p
        assert_eq!(tree.node_count(), 4);
    }

    #[test]
    fn empty_candidate_set_is_reported() {
        let m = model_of(&[("to", &[300.0])]);
        let err = build_tree(&m, &deltas(&[300.0, 900.0]), 0.05, 0.0).unwrap_err();
        assert!(matches!(err, PredictError::NoCandidates { step: 2, .. }));
    }

    #[test]
    fn all_paths_pruned_gives_empty_word_list() {
        // Step 2 matches only a pair starting with `z`, never reachable from `o`.
        let m = model_of(&[("to", &[300.0]), ("az", &[300.0]), ("zq", &[400.0])]);
        let tree = build_tree(&m, &deltas(&[300.0, 400.0]), 0.0, 0.0).unwrap();
        assert_eq!(enumerate_words(&tree), vec!["azq"]);
        let m = model_of(&[("to", &[300.0]), ("zq", &[400.0]), ("qa", &[100.0])]);
        let err = build_tree(&m, &deltas(&[300.0, 400.0]), 0.0, 0.0).unwrap_err();
        assert!(matches!(err, PredictError::NoCandidates { step: 2, .. }));
    }

    #[test]
    fn enumerate_examples() {
        let empty = CandidateTree::empty(3);
        assert!(enumerate_words(&empty).is_empty());

        let mut chain = CandidateTree::empty(3);
        let t = chain.add_child(0, Letter::new('t').unwrap());
        let o = chain.add_child(t, Letter::new('o').unwrap());
        chain.add_child(o, Letter::new('p').unwrap());
        assert_eq!(enumerate_words(&chain), vec!["top"]);

        let mut two = CandidateTree::empty(3);
        for first in ['t', 'b'] {
            let a = two.add_child(0, Letter::new(first).unwrap());
            let o = two.add_child(a, Letter::new('o').unwrap());
            two.add_child(o, Letter::new('p').unwrap());
        }
        assert_eq!(enumerate_words(&two), vec!["bop", "top"]);
    }

    #[test]
    fn dictionary_filter() {
        let lex = Lexicon::from_words(["top", "work"]).unwrap();
        let w = vec!["bop".to_string(), "top".to_string()];
        assert_eq!(filter_dictionary(&w, &lex), vec!["top"]);
        assert!(filter_dictionary(&[], &lex).is_empty());
        assert!(filter_dictionary(&["bop".to_string()], &lex).is_empty());
    }

    #[test]
    fn settings_validation() {
        assert!(PredictSettings::default().validate().is_ok());
        let bad = PredictSettings {
            frame_ms: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = PredictSettings {
            tolerance_pct: -0.1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    fn arb_case() -> impl Strategy<Value = (Vec<(usize, usize, f64)>, Vec<f64>, f64, f64)> {
        (
            proptest::collection::vec((0usize..6, 0usize..6, 200.0f64..600.0), 1..30),
            proptest::collection::vec(200.0f64..600.0, 1..5),
            0.0f64..0.15,
            0.0f64..2.0,
        )
    }

    fn model_from(raw: &[(usize, usize, f64)]) -> TimingModel {
        let obs: Vec<Observation> = raw
            .iter()
            .map(|&(a, b, d)| Observation {
                pair: KeyPair::new(Letter::ALL[a], Letter::ALL[b]),
                delta_ms: d,
            })
            .collect();
        train(&obs).unwrap()
    }

    proptest! {
        #[test]
        fn tree_equals_brute_force((raw, d, pct, coeff) in arb_case()) {
            let m = model_from(&raw);
            let oracle = brute_force(&m, &d, pct, coeff, &Letter::ALL[..6]);
            match build_tree(&m, &deltas(&d), pct, coeff) {
                Ok(tree) => {
                    let got = enumerate_words(&tree);
                    prop_assert_eq!(&got, &oracle);
                    prop_assert!(got.iter().all(|w| w.len() == d.len() + 1));
                }
                Err(PredictError::NoCandidates { .. }) => prop_assert!(oracle.is_empty()),
                Err(e) => prop_assert!(false, "unexpected {e}"),
            }
        }

        #[test]
        fn widening_tolerance_is_monotone((raw, d, pct, coeff) in arb_case(), extra in 0.0f64..0.1) {
            let m = model_from(&raw);
            let narrow = build_tree(&m, &deltas(&d), pct, coeff).map(|t| enumerate_words(&t)).unwrap_or_default();
            let wide = build_tree(&m, &deltas(&d), pct + extra, coeff + extra).map(|t| enumerate_words(&t)).unwrap_or_default();
            for w in &narrow {
                prop_assert!(wide.contains(w));
            }
        }

        #[test]
        fn every_word_is_sound((raw, d, pct, coeff) in arb_case()) {
            let m = model_from(&raw);
            if let Ok(tree) = build_tree(&m, &deltas(&d), pct, coeff) {
                for w in enumerate_words(&tree) {
                    for (i, pair) in KeyPair::of_word(&w).unwrap().into_iter().enumerate() {
                        let s = m.get(pair).unwrap();
                        let t_f = m.tolerance(d[i], pct, coeff);
                        prop_assert!((s.mean_ms - d[i]).abs() <= t_f + 1e-9);
                    }
                }
            }
        }
    }
}
