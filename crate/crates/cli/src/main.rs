use std::fmt::Display;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use keyecho::eval::{self, SweepConfig, Trial};
use keyecho::keylog::{self, session_to_pairs};
use keyecho::predictor::PredictError;
use keyecho::segmenter::{self, SegmentError};
use keyecho::synth::{self, TypistProfile};
use keyecho::{
    audio, load_lexicon, load_model, load_wav, predict, save_model, train, KeyPair, Lexicon,
    PredictSettings, TimingModel, COMMON_WORDS,
};

const DEFAULT_SEED: u64 = 7;
const SYNTH_MEAN_RANGE_MS: (f64, f64) = (250.0, 600.0);
const SEPARATED_BASE_MS: f64 = 250.0;

const EXIT_IO: u8 = 2;
const EXIT_EMPTY: u8 = 3;
const EXIT_PIPELINE: u8 = 4;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(
    name = "keyecho",
    version,
    about = "Recover typed words from the sound of typing using inter-keystroke timing"
)]
struct Cli {
    #[command(flatten)]
    tuning: Tuning,

    /// Print results as JSON.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Copy, Serialize)]
struct Tuning {
    /// Energy window length.
    #[arg(long, global = true, default_value_t = 100.0)]
    frame_ms: f64,
    /// Extra suppression around each picked onset.
    #[arg(long, global = true, default_value_t = 100.0)]
    min_gap_ms: f64,
    /// Tolerance as a fraction of each measured interval.
    #[arg(long, global = true, default_value_t = 0.05)]
    tolerance_pct: f64,
    /// Tolerance multiple of the model's average standard deviation.
    #[arg(long, global = true, default_value_t = 1.0)]
    std_coeff: f64,
}

impl Tuning {
    fn settings(&self) -> PredictSettings {
        PredictSettings {
            frame_ms: self.frame_ms,
            min_gap_ms: self.min_gap_ms,
            tolerance_pct: self.tolerance_pct,
            std_coeff: self.std_coeff,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a timing model from keystroke logs.
    Train {
        #[arg(required = true, value_name = "KEYLOG")]
        keylogs: Vec<PathBuf>,
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
    },
    /// Find keystroke onsets in a recording of one word.
    Segment {
        audio: PathBuf,
        #[arg(long)]
        k: usize,
        /// Directory for onsets.csv; prints the CSV when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write every keystroke segment as a WAV file.
        #[arg(long, requires = "out")]
        dump_segments: bool,
    },
    /// Predict the word typed in a recording.
    Predict {
        audio: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        model: PathBuf,
        /// Word list, one per line; the bundled list when omitted.
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Generate keystroke logs and per-word audio with known ground truth.
    Synth {
        /// Words to type; the built-in word list when omitted.
        words: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Typist profile JSON; random pair means when omitted.
        #[arg(long, conflicts_with = "separated")]
        profile: Option<PathBuf>,
        /// Space pair means so every interval matches exactly one pair.
        #[arg(long)]
        separated: bool,
        /// Standard deviation of every generated pair interval.
        #[arg(long, default_value_t = 0.0)]
        std_ms: f64,
        /// Type the word list this many times.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        repeat: u32,
        #[arg(long, default_value_t = 16000, value_parser = clap::value_parser!(u32).range(1..))]
        sample_rate: u32,
    },
    /// Measure the success rate over labelled recordings.
    Eval {
        /// CSV with columns audio,word; audio paths are relative to it.
        manifest: Option<PathBuf>,
        #[arg(long, requires = "manifest")]
        model: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        jobs: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also sweep synthetic typists with these standard deviations (ms).
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        sweep_std: Vec<f64>,
        /// Base typist profile for the sweep.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Print the per-pair statistics of a model.
    ModelInspect {
        #[arg(long)]
        model: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Train { .. } => "train",
            Command::Segment { .. } => "segment",
            Command::Predict { .. } => "predict",
            Command::Synth { .. } => "synth",
            Command::Eval { .. } => "eval",
            Command::ModelInspect { .. } => "model-inspect",
        }
    }
}

/// Effective settings of one invocation, defaults resolved.
#[derive(Debug, Serialize)]
struct RunConfig {
    command: &'static str,
    #[serde(flatten)]
    tuning: Tuning,
    k: Option<usize>,
    model: Option<PathBuf>,
    lexicon: Option<String>,
    inputs: Vec<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    jobs: Option<usize>,
    json: bool,
}

impl RunConfig {
    fn new(cli: &Cli) -> Self {
        let mut cfg = RunConfig {
            command: cli.command.name(),
            tuning: cli.tuning,
            k: None,
            model: None,
            lexicon: None,
            inputs: Vec::new(),
            out: None,
            seed: None,
            jobs: None,
            json: cli.json,
        };
        let lexicon_name = |p: &Option<PathBuf>| {
            Some(
                p.as_ref()
                    .map_or_else(|| "bundled".to_string(), |p| p.display().to_string()),
            )
        };
        match &cli.command {
            Command::Train { keylogs, out } => {
                cfg.inputs = keylogs.clone();
                cfg.out = Some(out.clone());
            }
            Command::Segment { audio, k, out, .. } => {
                cfg.inputs = vec![audio.clone()];
                cfg.k = Some(*k);
                cfg.out = out.clone();
            }
            Command::Predict {
                audio,
                k,
                model,
                lexicon,
            } => {
                cfg.inputs = vec![audio.clone()];
                cfg.k = Some(*k);
                cfg.model = Some(model.clone());
                cfg.lexicon = lexicon_name(lexicon);
            }
            Command::Synth {
                out, seed, profile, ..
            } => {
                cfg.inputs = profile.iter().cloned().collect();
                cfg.out = Some(out.clone());
                cfg.seed = Some(seed.unwrap_or(DEFAULT_SEED));
            }
            Command::Eval {
                manifest,
                model,
                lexicon,
                out,
                jobs,
                seed,
                sweep_std,
                profile,
            } => {
                cfg.inputs = manifest.iter().chain(profile).cloned().collect();
                cfg.model = model.clone();
                cfg.lexicon = lexicon_name(lexicon);
                cfg.out = Some(out.clone());
                cfg.jobs = Some(jobs.map_or_else(rayon_threads, |j| j as usize));
                if !sweep_std.is_empty() {
                    cfg.seed = Some(seed.unwrap_or(DEFAULT_SEED));
                }
            }
            Command::ModelInspect { model } => cfg.model = Some(model.clone()),
        }
        cfg
    }
}

fn rayon_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn io(path: &Path, err: impl Display) -> Self {
        let shown = path.display().to_string();
        let msg = err.to_string();
        if msg.starts_with(&shown) {
            Self::new(EXIT_IO, msg)
        } else {
            Self::new(EXIT_IO, format!("{shown}: {msg}"))
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self::new(EXIT_USAGE, message)
    }
}

fn predict_failure(path: &Path, err: PredictError) -> Failure {
    match err {
        e if e.is_pipeline_failure() => {
            Failure::new(EXIT_PIPELINE, format!("{}: {e}", path.display()))
        }
        e @ (PredictError::InvalidSettings(_)
        | PredictError::TooFewKeystrokes(_)
        | PredictError::Segment(SegmentError::ZeroFrame | SegmentError::ZeroKeystrokes)) => {
            Failure::usage(e.to_string())
        }
        e => Failure::io(path, e),
    }
}

type CmdResult = Result<u8, Failure>;

fn emit_json(value: &serde_json::Value) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(io::Error::from)
        .and_then(|_| writeln!(out))
        .map_err(|e| Failure::new(EXIT_IO, format!("stdout: {e}")))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::io(path, e))
}

fn read_lexicon(path: &Option<PathBuf>) -> Result<Lexicon, Failure> {
    match path {
        Some(p) => load_lexicon(p).map_err(|e| Failure::io(p, e)),
        None => Ok(Lexicon::bundled()),
    }
}

fn read_model(path: &Path) -> Result<TimingModel, Failure> {
    load_model(path).map_err(|e| Failure::io(path, e))
}

fn cmd_train(cfg: &RunConfig, keylogs: &[PathBuf], out: &Path) -> CmdResult {
    let mut observations = Vec::new();
    for path in keylogs {
        let session = keylog::parse_keylog(path).map_err(|e| Failure::io(path, e))?;
        let pairs = session_to_pairs(&session);
        log::info!("{}: {} letter pairs", path.display(), pairs.len());
        observations.extend(pairs);
    }
    if observations.is_empty() {
        return Err(Failure::new(
            EXIT_EMPTY,
            "no letter pairs found in the keylogs",
        ));
    }
    let model = train(&observations).map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
    save_model(&model, out).map_err(|e| Failure::io(out, e))?;
    if cfg.json {
        emit_json(&json!({
            "config": cfg,
            "observations": observations.len(),
            "pairs": model.pair_count(),
            "asd_ms": model.asd_ms(),
        }))?;
    } else {
        println!("observations {}", observations.len());
        println!("pairs {}", model.pair_count());
        println!("asd_ms {}", model.asd_ms());
    }
    Ok(0)
}

fn cmd_segment(
    cfg: &RunConfig,
    audio_path: &Path,
    k: usize,
    out: Option<&Path>,
    dump: bool,
) -> CmdResult {
    if k == 0 {
        return Err(Failure::usage("--k must be at least 1"));
    }
    let signal = load_wav(audio_path).map_err(|e| Failure::io(audio_path, e))?;
    let rate = signal.sample_rate();
    let frame = audio::ms_to_samples(cfg.tuning.frame_ms, rate);
    let gap = audio::ms_to_samples(cfg.tuning.min_gap_ms, rate);
    let onsets = segmenter::energy(&signal, frame)
        .and_then(|e| segmenter::pick_onsets(&e, k, gap))
        .map_err(|e| predict_failure(audio_path, PredictError::Segment(e)))?;

    let mut csv_text = Vec::new();
    segmenter::write_onsets_csv(&mut csv_text, &onsets)
        .map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
    if let Some(dir) = out {
        create_dir(dir)?;
        write_file(&dir.join("onsets.csv"), &csv_text)?;
        write_file(
            &dir.join("run_config.json"),
            serde_json::to_string_pretty(cfg).expect("config serializes"),
        )?;
        if dump {
            let segments = segmenter::extract_segments(&signal, &onsets);
            segmenter::write_segments(dir, &signal, &segments).map_err(|e| Failure::io(dir, e))?;
        }
    }
    if cfg.json {
        emit_json(&json!({
            "config": cfg,
            "sample_rate": rate,
            "frame_samples": frame,
            "min_gap_samples": gap,
            "onsets": onsets.onsets(),
            "onsets_ms": onsets.onsets_ms(),
        }))?;
    } else if out.is_none() {
        io::stdout()
            .write_all(&csv_text)
            .map_err(|e| Failure::new(EXIT_IO, format!("stdout: {e}")))?;
    } else {
        println!("onsets {}", onsets.onsets().len());
    }
    Ok(0)
}

fn cmd_predict(
    cfg: &RunConfig,
    audio_path: &Path,
    k: usize,
    model_path: &Path,
    lexicon: &Option<PathBuf>,
) -> CmdResult {
    let model = read_model(model_path)?;
    let lexicon = read_lexicon(lexicon)?;
    let signal = load_wav(audio_path).map_err(|e| Failure::io(audio_path, e))?;
    let result = predict(&model, &signal, k, &cfg.tuning.settings(), &lexicon)
        .map_err(|e| predict_failure(audio_path, e))?;
    if cfg.json {
        emit_json(&json!({ "config": cfg, "result": result }))?;
    } else {
        for w in &result.words_dict {
            println!("{w}");
        }
    }
    log::info!(
        "{} raw candidate(s), {} in lexicon",
        result.words_all.len(),
        result.words_dict.len()
    );
    if result.words_dict.is_empty() {
        eprintln!(
            "keyecho: none of the {} candidate word(s) is in the lexicon",
            result.words_all.len()
        );
        return Ok(EXIT_EMPTY);
    }
    Ok(0)
}

#[derive(Serialize)]
struct TruthRow<'a> {
    audio: String,
    word: &'a str,
    start_ms: f64,
    onsets_ms: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ManifestRow {
    audio: String,
    word: String,
}

fn read_profile(path: &Path) -> Result<TypistProfile, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Failure::io(path, e))
}

fn word_pairs<S: AsRef<str>>(words: &[S]) -> Result<Vec<KeyPair>, Failure> {
    let mut pairs = Vec::new();
    for w in words {
        let p = KeyPair::of_word(w.as_ref()).ok_or_else(|| {
            Failure::usage(format!("word {:?} must contain only letters", w.as_ref()))
        })?;
        pairs.extend(p);
    }
    Ok(pairs)
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    cfg: &RunConfig,
    words: &[String],
    out: &Path,
    profile_path: Option<&Path>,
    separated: bool,
    std_ms: f64,
    repeat: u32,
    sample_rate: u32,
) -> CmdResult {
    let words: Vec<String> = if words.is_empty() {
        COMMON_WORDS.iter().map(|w| w.to_string()).collect()
    } else {
        words.iter().map(|w| w.to_ascii_lowercase()).collect()
    };
    if words.iter().any(|w| w.is_empty()) {
        return Err(Failure::usage("words must not be empty"));
    }
    let pairs = word_pairs(&words)?;
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    if !(std_ms >= 0.0 && std_ms.is_finite()) {
        return Err(Failure::usage("--std-ms must be non-negative"));
    }
    let profile = match profile_path {
        Some(p) => {
            let mut profile = read_profile(p)?;
            profile.seed = seed;
            profile
        }
        None if separated => {
            let refs: Vec<&str> = words.iter().map(String::as_str).collect();
            TypistProfile::separated(&refs, SEPARATED_BASE_MS, cfg.tuning.tolerance_pct, seed)
                .map_err(|e| Failure::usage(e.to_string()))?
                .with_std(std_ms)
        }
        None => TypistProfile::random(pairs, SYNTH_MEAN_RANGE_MS, std_ms, seed),
    };
    profile
        .validate()
        .map_err(|e| Failure::usage(e.to_string()))?;

    let typed: Vec<&str> = (0..repeat)
        .flat_map(|_| words.iter().map(String::as_str))
        .collect();
    let session = synth::synth_session_with(&profile, &typed, &mut synth::task_rng(seed, 0))
        .map_err(|e| Failure::usage(e.to_string()))?;

    create_dir(out)?;
    let session_path = out.join("session.csv");
    let file = fs::File::create(&session_path).map_err(|e| Failure::io(&session_path, e))?;
    keylog::write_keylog(io::BufWriter::new(file), &session.session)
        .map_err(|e| Failure::io(&session_path, e))?;
    write_file(
        &out.join("profile.json"),
        serde_json::to_string_pretty(&profile).expect("profile serializes"),
    )?;

    let mut manifest = csv::Writer::from_writer(Vec::new());
    let mut truth = Vec::with_capacity(session.words.len());
    for (i, w) in session.words.iter().enumerate() {
        let mut rng = synth::task_rng(seed, 1 + i as u64);
        let (signal, placed) = synth::render_word(w, &profile, sample_rate, &mut rng)
            .map_err(|e| Failure::usage(e.to_string()))?;
        let name = format!("word_{:03}_{}.wav", i + 1, w.word);
        let path = out.join(&name);
        keyecho::write_wav(&path, &signal).map_err(|e| Failure::io(&path, e))?;
        manifest
            .serialize(ManifestRow {
                audio: name.clone(),
                word: w.word.clone(),
            })
            .map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
        truth.push(TruthRow {
            audio: name,
            word: &w.word,
            start_ms: w.start_ms,
            onsets_ms: placed,
        });
    }
    let manifest = manifest
        .into_inner()
        .map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
    write_file(&out.join("manifest.csv"), manifest)?;
    let summary = json!({
        "config": cfg,
        "sample_rate": sample_rate,
        "words": truth.len(),
        "intervals_drawn": session.intervals_drawn,
        "truncated": session.truncated,
        "truncation_rate": session.truncation_rate(),
    });
    write_file(
        &out.join("truth.json"),
        serde_json::to_string_pretty(&json!({ "summary": summary, "words": truth }))
            .expect("truth serializes"),
    )?;
    if session.truncated > 0 {
        log::warn!(
            "{} of {} intervals were raised to the burst length",
            session.truncated,
            session.intervals_drawn
        );
    }
    if cfg.json {
        emit_json(&summary)?;
    } else {
        println!("words {}", truth.len());
        println!("truncation_rate {}", session.truncation_rate());
        println!("out {}", out.display());
    }
    Ok(0)
}

fn read_manifest(path: &Path) -> Result<Vec<Trial>, Failure> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::Reader::from_path(path).map_err(|e| Failure::io(path, e))?;
    let mut trials = Vec::new();
    for row in reader.deserialize::<ManifestRow>() {
        let row = row.map_err(|e| Failure::io(path, e))?;
        let audio_path = base.join(&row.audio);
        let signal = load_wav(&audio_path).map_err(|e| Failure::io(&audio_path, e))?;
        if KeyPair::of_word(&row.word).is_none() {
            return Err(Failure::io(
                path,
                format!("word {:?} must contain only letters", row.word),
            ));
        }
        trials.push(Trial {
            signal,
            word: row.word,
        });
    }
    Ok(trials)
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    cfg: &RunConfig,
    manifest: Option<&Path>,
    model: Option<&Path>,
    lexicon: &Option<PathBuf>,
    out: &Path,
    sweep_std: &[f64],
    profile_path: Option<&Path>,
) -> CmdResult {
    if manifest.is_none() && sweep_std.is_empty() {
        return Err(Failure::usage(
            "eval needs a manifest, --sweep-std, or both",
        ));
    }
    if manifest.is_some() && model.is_none() {
        return Err(Failure::usage("eval with a manifest needs --model"));
    }
    if sweep_std.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
        return Err(Failure::usage("--sweep-std values must be non-negative"));
    }
    let settings = cfg.tuning.settings();
    let lexicon = read_lexicon(lexicon)?;
    let jobs = cfg.jobs;

    let mut trials = Vec::new();
    let mut report = None;
    if let (Some(manifest), Some(model)) = (manifest, model) {
        let model = read_model(model)?;
        trials = read_manifest(manifest)?;
        report = Some(eval::run_eval(&model, &lexicon, &trials, &settings, jobs));
    }

    let mut sweep = None;
    if !sweep_std.is_empty() {
        let base_profile = profile_path.map(read_profile).transpose()?;
        let words: Vec<String> = if trials.is_empty() {
            let covered = |w: &&str| {
                base_profile.as_ref().is_none_or(|p| {
                    KeyPair::of_word(w)
                        .is_some_and(|pairs| pairs.iter().all(|k| p.pairs.contains_key(k)))
                })
            };
            let w: Vec<String> = COMMON_WORDS
                .iter()
                .copied()
                .filter(covered)
                .map(str::to_string)
                .collect();
            if w.is_empty() {
                return Err(Failure::usage(
                    "the sweep profile covers none of the built-in words; pass a manifest",
                ));
            }
            w
        } else {
            let mut w: Vec<String> = trials.iter().map(|t| t.word.to_ascii_lowercase()).collect();
            w.sort();
            w.dedup();
            w
        };
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
        let base = match base_profile {
            Some(p) => p.with_seed(seed),
            None => TypistProfile::random(word_pairs(&refs)?, (300.0, 600.0), 0.0, seed),
        };
        let profiles: Vec<TypistProfile> = sweep_std
            .iter()
            .map(|&s| base.clone().with_std(s))
            .collect();
        let config = SweepConfig {
            words: &refs,
            train_repetitions: 20,
            trial_repetitions: 5,
            sample_rate: 8000,
            jobs,
        };
        sweep = Some(
            eval::asd_sweep(&profiles, &lexicon, &settings, &config)
                .map_err(|e| Failure::usage(e.to_string()))?,
        );
    }

    create_dir(out)?;
    write_file(
        &out.join("report.json"),
        serde_json::to_string_pretty(&json!({ "config": cfg, "report": report, "sweep": sweep }))
            .expect("report serializes"),
    )?;
    if let Some(r) = &report {
        let path = out.join("by_length.csv");
        let file = fs::File::create(&path).map_err(|e| Failure::io(&path, e))?;
        eval::write_by_length_csv(file, r).map_err(|e| Failure::io(&path, e))?;
    }
    if let Some(s) = &sweep {
        let path = out.join("asd_sweep.csv");
        let file = fs::File::create(&path).map_err(|e| Failure::io(&path, e))?;
        eval::write_sweep_csv(file, s).map_err(|e| Failure::io(&path, e))?;
    }

    if cfg.json {
        emit_json(&json!({ "config": cfg, "report": report, "sweep": sweep }))?;
    } else {
        if let Some(r) = &report {
            println!("trials {}", r.trials);
            println!("hits {}", r.hits);
            println!("success_rate {}", r.success_rate);
            println!("raw_success_rate {}", r.raw_success_rate);
            println!("ambiguity {}", r.ambiguity);
            println!("asd_ms {}", r.asd_ms);
            for (len, b) in &r.by_length {
                println!("length {len}: {}/{} = {}", b.hits, b.trials, b.success);
            }
        }
        if let Some(s) = &sweep {
            for p in &s.points {
                println!("sweep asd_ms {} success_rate {}", p.asd_ms, p.success_rate);
            }
            println!("sweep pearson {}", s.pearson);
        }
    }
    if report.as_ref().is_some_and(|r| r.trials == 0) {
        eprintln!("keyecho: the manifest lists no recordings");
        return Ok(EXIT_EMPTY);
    }
    Ok(0)
}

fn cmd_model_inspect(cfg: &RunConfig, path: &Path) -> CmdResult {
    let model = read_model(path)?;
    if cfg.json {
        let stats: Vec<_> = model
            .stats()
            .map(|s| {
                json!({
                    "a": s.pair.first,
                    "b": s.pair.second,
                    "mean_ms": s.mean_ms,
                    "std_ms": s.std_ms,
                    "count": s.count,
                })
            })
            .collect();
        emit_json(&json!({
            "config": cfg,
            "pairs": model.pair_count(),
            "observations": model.observations().len(),
            "asd_ms": model.asd_ms(),
            "analysis": stats,
        }))?;
    } else {
        print!("{}", model.analysis_table());
        println!("pairs {}", model.pair_count());
        println!("observations {}", model.observations().len());
        println!("asd_ms {}", model.asd_ms());
    }
    Ok(0)
}

fn run(cli: Cli) -> CmdResult {
    let cfg = RunConfig::new(&cli);
    eprintln!(
        "run_config {}",
        serde_json::to_string(&cfg).expect("config serializes")
    );
    cli.tuning
        .settings()
        .validate()
        .map_err(|e| Failure::usage(e.to_string()))?;
    match &cli.command {
        Command::Train { keylogs, out } => cmd_train(&cfg, keylogs, out),
        Command::Segment {
            audio,
            k,
            out,
            dump_segments,
        } => cmd_segment(&cfg, audio, *k, out.as_deref(), *dump_segments),
        Command::Predict {
            audio,
            k,
            model,
            lexicon,
        } => cmd_predict(&cfg, audio, *k, model, lexicon),
        Command::Synth {
            words,
            out,
            profile,
            separated,
            std_ms,
            repeat,
            sample_rate,
            ..
        } => cmd_synth(
            &cfg,
            words,
            out,
            profile.as_deref(),
            *separated,
            *std_ms,
            *repeat,
            *sample_rate,
        ),
        Command::Eval {
            manifest,
            model,
            lexicon,
            out,
            sweep_std,
            profile,
            ..
        } => cmd_eval(
            &cfg,
            manifest.as_deref(),
            model.as_deref(),
            lexicon,
            out,
            sweep_std,
            profile.as_deref(),
        ),
        Command::ModelInspect { model } => cmd_model_inspect(&cfg, model),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KEYECHO_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("keyecho: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
