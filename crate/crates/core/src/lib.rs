//! Recover typed words from the sound of typing, using a per-user model of
//! inter-keystroke timing.
//!
//! The pipeline:
//!
//! 1. [`keylog`] turns keystroke logs into letter-pair intervals.
//! 2. [`model`] aggregates them into per-pair mean and standard deviation.
//! 3. [`segmenter`] finds the `k` keystroke onsets in a recording of one word
//!    and measures the intervals between them.
//! 4. [`predictor`] matches each interval against the model, grows a tree of
//!    letter candidates, and keeps the paths that [`lexicon`] recognizes.
//!
//! [`synth`] generates logs and audio with known ground truth, and [`eval`]
//! measures success rates over many trials.

pub mod audio;
pub mod eval;
pub mod key;
pub mod keylog;
pub mod lexicon;
pub mod model;
pub mod predictor;
pub mod segmenter;
pub mod synth;

pub use audio::{load_wav, write_wav, AudioSignal};
pub use key::{KeyPair, Letter, LetterSet};
pub use lexicon::{load_lexicon, Lexicon};
pub use model::{load_model, save_model, train, TimingModel};
pub use predictor::{predict, PredictSettings, PredictionResult};
pub use synth::TypistProfile;

/// Common English words of varied length; the default evaluation vocabulary.
pub const COMMON_WORDS: [&str; 21] = [
    "work", "love", "life", "like", "night", "world", "table", "they", "have", "teacher", "book",
    "buy", "credit", "paper", "order", "mobile", "mother", "cat", "run", "house", "bill",
];
