//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for usage and configuration errors, 2 for
//! errors in the input data.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::audio_io::{
    load_wav, render_table, save_wav, write_text, AudioSignal, Cell, Table, TableFormat,
    WavEncoding,
};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::framing::frame_signal;
use crate::mel_features::{FeatureMatrix, MelFilterbank, MfccExtractor};
use crate::pitch::track_pitch;
use crate::synth;
use crate::vad::detect_endpoints;
use crate::vq::{lbg_train, recognize, Codebook};

macro_rules! config_flags {
    ($($field:ident => $key:literal),* $(,)?) => {
        /// One optional flag per configuration key; set flags override the file.
        #[derive(Args, Debug, Default)]
        struct ConfigFlags {
            $(
                #[arg(long = $key, global = true, value_name = "VALUE", allow_hyphen_values = true, help_heading = "Configuration")]
                $field: Option<String>,
            )*
        }

        impl ConfigFlags {
            fn pairs(&self) -> Vec<(&'static str, Option<&str>)> {
                vec![$(($key, self.$field.as_deref())),*]
            }
        }
    };
}

config_flags! {
    frame_len_ms => "frame-len-ms",
    hop_ms => "hop-ms",
    window => "window",
    preemph_alpha => "preemph-alpha",
    log_floor => "log-floor",
    vad_energy_ratio => "vad-energy-ratio",
    vad_zcr_threshold => "vad-zcr-threshold",
    vad_min_run => "vad-min-run",
    pitch_f_min => "pitch-f-min",
    pitch_f_max => "pitch-f-max",
    pitch_peak_threshold => "pitch-peak-threshold",
    pitch_zcr_threshold => "pitch-zcr-threshold",
    pitch_frame_len_ms => "pitch-frame-len-ms",
    pitch_hop_ms => "pitch-hop-ms",
    pitch_preemph_alpha => "pitch-preemph-alpha",
    pitch_median_width => "pitch-median-width",
    pitch_fft_size => "pitch-fft-size",
    mel_num_filters => "mel-num-filters",
    mel_num_ceps => "mel-num-ceps",
    mel_fft_size => "mel-fft-size",
    mel_f_low => "mel-f-low",
    mel_f_high => "mel-f-high",
    vq_size => "vq-size",
    vq_epsilon => "vq-epsilon",
    vq_rel_tol => "vq-rel-tol",
    vq_max_iters => "vq-max-iters",
    apply_vad => "apply-vad",
}

#[derive(Parser, Debug)]
#[command(
    name = "cepfront",
    version,
    about = "Speech front end: endpoints, pitch, MFCCs and VQ recognition"
)]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(flatten)]
    flags: ConfigFlags,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct TableOut {
    /// Output file; standard output when omitted.
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    format: TableFormat,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-frame energy, zero-crossing rate and keep decision.
    Vad {
        input: PathBuf,
        #[command(flatten)]
        out: TableOut,
    },
    /// Per-frame voicing label and fundamental frequency.
    Pitch {
        input: PathBuf,
        #[command(flatten)]
        out: TableOut,
    },
    /// Mel-frequency cepstral coefficients, one row per frame.
    Mfcc {
        input: PathBuf,
        #[command(flatten)]
        out: TableOut,
    },
    /// Trains one codebook per label from a directory of WAV files.
    ///
    /// Each subdirectory of DIR is a label holding that label's recordings.
    /// With --label, DIR itself holds the recordings of that one label.
    Train {
        dir: PathBuf,
        /// Directory receiving `<label>.json` codebooks.
        #[arg(short, long, value_name = "DIR")]
        output: PathBuf,
        #[arg(long)]
        label: Option<String>,
        /// Summary table destination; standard output when omitted.
        #[arg(long, value_name = "FILE")]
        summary: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
        format: TableFormat,
    },
    /// Scores one WAV file against every codebook in a directory.
    Recognize {
        input: PathBuf,
        models: PathBuf,
        #[command(flatten)]
        out: TableOut,
    },
    #[command(hide = true)]
    Synth(SynthArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum SynthKind {
    Pulse,
    Impulse,
    Tone,
    Noise,
    Silence,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(value_enum)]
    kind: SynthKind,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 100.0)]
    f0: f64,
    #[arg(long, default_value_t = 440.0)]
    freq: f64,
    #[arg(long, default_value_t = 160)]
    period: usize,
    #[arg(long, default_value_t = 1.0)]
    duration: f64,
    #[arg(long, default_value_t = 16000)]
    fs: u32,
    #[arg(long, default_value_t = 0.5)]
    amplitude: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seconds of silence before and after the signal.
    #[arg(long, default_value_t = 0.0)]
    pad: f64,
    /// Write 32-bit float samples instead of PCM16.
    #[arg(long)]
    float: bool,
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn run_command<I, A>(argv: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match dispatch(&cli.command, &cfg) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::InvalidConfig(_) => 1,
        _ => 2,
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for (key, value) in cli.flags.pairs() {
        if let Some(v) = value {
            cfg.set(key, v).map_err(|e| e.context(format!("--{key}")))?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cmd: &Command, cfg: &PipelineConfig) -> Result<()> {
    match cmd {
        Command::Vad { input, out } => emit(&vad_table(&load(input)?, cfg)?, out, cfg),
        Command::Pitch { input, out } => emit(&pitch_table(&load(input)?, cfg)?, out, cfg),
        Command::Mfcc { input, out } => {
            let sig = load(input)?;
            let feats = features(&sig, cfg).map_err(|e| e.context(input.display().to_string()))?;
            emit(&mfcc_table(&feats), out, cfg)
        }
        Command::Train {
            dir,
            output,
            label,
            summary,
            format,
        } => {
            let table = train(dir, output, label.as_deref(), cfg)?;
            let out = TableOut {
                output: summary.clone(),
                format: *format,
            };
            emit(&table, &out, cfg)
        }
        Command::Recognize { input, models, out } => {
            emit(&recognize_table(input, models, cfg)?, out, cfg)
        }
        Command::Synth(args) => run_synth(args),
    }
}

fn load(path: &Path) -> Result<AudioSignal<f64>> {
    load_wav(path).map_err(|e| e.context(path.display().to_string()))
}

fn emit(table: &Table, out: &TableOut, cfg: &PipelineConfig) -> Result<()> {
    let text = render_table(table, out.format, Some(&cfg.digest()))?;
    match &out.output {
        Some(path) => write_text(path, &text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn vad_table(sig: &AudioSignal<f64>, cfg: &PipelineConfig) -> Result<Table> {
    let frames = frame_signal(sig, &cfg.frame)?;
    let ep = detect_endpoints(&frames, &cfg.vad)?;
    let mut table = Table::new(["frame_index", "start_sample", "energy", "zcr", "kept"]);
    for (i, &start) in frames.start_offsets().iter().enumerate() {
        table.push(vec![
            Cell::Int(i as i64),
            Cell::Int(start as i64),
            Cell::Float(ep.frame_energies[i]),
            Cell::Float(ep.frame_zcrs[i]),
            Cell::Bool(ep.keep_mask[i]),
        ]);
    }
    Ok(table)
}

fn pitch_table(sig: &AudioSignal<f64>, cfg: &PipelineConfig) -> Result<Table> {
    cfg.pitch.quefrency_band(sig.sample_rate_hz())?;
    let track = track_pitch(sig, &cfg.pitch)?;
    let mut table = Table::new(["time_s", "label", "f0_hz", "peak_value", "zcr"]);
    for e in &track.entries {
        table.push(vec![
            Cell::Float(e.time_s),
            Cell::Text(e.label.to_string()),
            e.f0_hz.map_or(Cell::Empty, Cell::Float),
            Cell::Float(e.peak_value),
            Cell::Float(e.zcr),
        ]);
    }
    Ok(table)
}

/// MFCCs of `sig`, restricted to the endpoint-trimmed region when enabled.
/// Frame times stay on the clock of the untrimmed signal.
pub fn features(sig: &AudioSignal<f64>, cfg: &PipelineConfig) -> Result<FeatureMatrix<f64>> {
    let fs = sig.sample_rate_hz();
    cfg.validate_for(fs)?;
    let bank = MelFilterbank::new(
        cfg.mel.num_filters,
        cfg.mel_fft_size(fs),
        fs,
        cfg.mel.f_low_hz,
        cfg.mel_f_high(fs),
    )?;
    let extractor = MfccExtractor::new(&bank, &cfg.frame, cfg.mel.num_ceps, cfg.log_floor)?;
    if !cfg.apply_vad_before_features {
        return extractor.extract(sig);
    }
    let frames = frame_signal(sig, &cfg.frame)?;
    match detect_endpoints(&frames, &cfg.vad)?.trimmed_span() {
        Some(span) => {
            let start = span.start;
            Ok(extractor
                .extract(&sig.slice(span)?)?
                .offset_times(start as f64 / f64::from(fs)))
        }
        None => Ok(FeatureMatrix {
            vectors: Vec::new(),
            num_ceps: cfg.mel.num_ceps,
            frame_times_s: Vec::new(),
            config_digest: extractor.digest(),
        }),
    }
}

fn mfcc_table(feats: &FeatureMatrix<f64>) -> Table {
    let columns =
        std::iter::once("time_s".to_string()).chain((0..feats.num_ceps).map(|k| format!("c{k}")));
    let mut table = Table::new(columns);
    for (t, v) in feats.frame_times_s.iter().zip(&feats.vectors) {
        table.push(
            std::iter::once(Cell::Float(*t))
                .chain(v.iter().map(|&c| Cell::Float(c)))
                .collect(),
        );
    }
    table
}

fn sorted_entries(dir: &Path, want_dirs: bool, ext: Option<&str>) -> Result<Vec<PathBuf>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() != want_dirs {
            continue;
        }
        let ext_ok = ext.is_none_or(|want| {
            path.extension()
                .is_some_and(|e| e.to_string_lossy().eq_ignore_ascii_case(want))
        });
        if ext_ok {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn train(dir: &Path, models: &Path, label: Option<&str>, cfg: &PipelineConfig) -> Result<Table> {
    let groups: Vec<(String, PathBuf)> = match label {
        Some(l) => vec![(l.to_string(), dir.to_path_buf())],
        None => sorted_entries(dir, true, None)?
            .into_iter()
            .map(|p| (file_label(&p), p))
            .collect(),
    };
    if groups.is_empty() {
        return Err(
            Error::EmptyTrainingSet.context(format!("no label directories in {}", dir.display()))
        );
    }
    std::fs::create_dir_all(models).map_err(|e| Error::io(models, e))?;
    let digest = cfg.digest();
    let mut table = Table::new([
        "label",
        "files",
        "vectors",
        "codebook_size",
        "train_distortion",
    ]);
    for (label, path) in groups {
        let wavs = sorted_entries(&path, false, Some("wav"))?;
        let mut vectors = Vec::new();
        for wav in &wavs {
            let sig = load(wav)?;
            let feats = features(&sig, cfg).map_err(|e| e.context(wav.display().to_string()))?;
            vectors.extend(feats.vectors);
        }
        let book = lbg_train(&vectors, cfg.vq.target_size, &cfg.vq.params)
            .map_err(|e| e.context(format!("label {label}")))?
            .with_label(label.clone())
            .with_digest(digest.clone());
        book.save(models.join(format!("{label}.json")))?;
        table.push(vec![
            Cell::Text(label),
            Cell::Int(wavs.len() as i64),
            Cell::Int(vectors.len() as i64),
            Cell::Int(book.size() as i64),
            Cell::Float(book.train_distortion),
        ]);
    }
    Ok(table)
}

fn recognize_table(input: &Path, models: &Path, cfg: &PipelineConfig) -> Result<Table> {
    let books = sorted_entries(models, false, Some("json"))?
        .iter()
        .map(Codebook::<f64>::load)
        .collect::<Result<Vec<_>>>()?;
    if books.is_empty() {
        return Err(Error::NoModels.context(models.display().to_string()));
    }
    let digest = cfg.digest();
    for b in &books {
        if b.config_digest.as_deref().is_some_and(|d| d != digest) {
            eprintln!(
                "warning: codebook {:?} was trained with config {}, current config is {digest}",
                b.label,
                b.config_digest.as_deref().unwrap_or_default()
            );
        }
    }
    let sig = load(input)?;
    let feats = features(&sig, cfg).map_err(|e| e.context(input.display().to_string()))?;
    let result = recognize(&feats, &books).map_err(|e| e.context(input.display().to_string()))?;
    let mut table = Table::new(["rank", "label", "score"]);
    for (i, (label, score)) in result.ranked().into_iter().enumerate() {
        table.push(vec![
            Cell::Int(i as i64 + 1),
            Cell::Text(label),
            Cell::Float(score),
        ]);
    }
    Ok(table)
}

fn run_synth(a: &SynthArgs) -> Result<()> {
    let sig: AudioSignal<f64> = match a.kind {
        SynthKind::Pulse => synth::pulse_train(a.f0, a.duration, a.amplitude, a.fs)?,
        SynthKind::Impulse => {
            let len = (a.duration * f64::from(a.fs)).round() as usize;
            synth::impulse_train(a.period, len, a.amplitude, a.fs)?
        }
        SynthKind::Tone => synth::tone(a.freq, a.duration, a.amplitude, a.fs)?,
        SynthKind::Noise => synth::white_noise(a.seed, a.duration, a.amplitude, a.fs)?,
        SynthKind::Silence => synth::silence(a.duration, a.fs)?,
    };
    let sig = if a.pad > 0.0 {
        let pad = synth::silence(a.pad, a.fs)?;
        synth::concat(&[pad.clone(), sig, pad])?
    } else {
        sig
    };
    let encoding = if a.float {
        WavEncoding::Float32
    } else {
        WavEncoding::Pcm16
    };
    save_wav(&sig, &a.output, encoding)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::KEYS;

    #[test]
    fn every_config_key_has_a_flag() {
        let keys: Vec<&str> = ConfigFlags::default().pairs().iter().map(|p| p.0).collect();
        assert_eq!(keys, KEYS);
    }

    #[test]
    fn flags_override_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("c.cfg");
        std::fs::write(&file, "hop-ms = 20\nvad-min-run = 1\n").unwrap();
        let cli = Cli::try_parse_from([
            "cepfront".as_ref(),
            "--config".as_ref(),
            file.as_os_str(),
            "--hop-ms".as_ref(),
            "5".as_ref(),
            "vad".as_ref(),
            "x.wav".as_ref(),
        ])
        .unwrap();
        let cfg = load_config(&cli).unwrap();
        assert_eq!(cfg.frame.hop_ms, 5.0);
        assert_eq!(cfg.vad.min_speech_run, 1);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_command(["cepfront"]), 1);
        assert_eq!(run_command(["cepfront", "frobnicate"]), 1);
        assert_eq!(
            run_command(["cepfront", "--hop-ms", "-3", "vad", "x.wav"]),
            1
        );
        assert_eq!(run_command(["cepfront", "--help"]), 0);
    }

    #[test]
    fn missing_input_is_a_data_error() {
        assert_eq!(run_command(["cepfront", "vad", "/nonexistent/none.wav"]), 2);
    }
}
