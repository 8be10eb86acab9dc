//! WAV input, WAV output for synthesized signals, and CSV/JSON tables.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, Write};
use std::ops::Range;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lowest sample rate the analysis chain accepts.
pub const MIN_SAMPLE_RATE_HZ: u32 = 8000;

/// A mono signal with its sample rate.
///
/// Samples decoded by [`load_wav`] lie in `[-1, 1]`. Derived signals (for
/// example after pre-emphasis) may leave that range, so the constructor
/// only checks that samples are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal<T> {
    samples: Vec<T>,
    sample_rate_hz: u32,
    source_label: String,
}

impl<T: Scalar> AudioSignal<T> {
    pub fn new(
        samples: Vec<T>,
        sample_rate_hz: u32,
        source_label: impl Into<String>,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyAudio);
        }
        if sample_rate_hz < MIN_SAMPLE_RATE_HZ {
            return Err(Error::InvalidSignal(format!(
                "sample rate {sample_rate_hz} Hz is below {MIN_SAMPLE_RATE_HZ} Hz"
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidSignal(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            source_label: source_label.into(),
        })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    /// Same rate and label, new samples.
    pub fn with_samples(&self, samples: Vec<T>) -> Result<Self> {
        Self::new(samples, self.sample_rate_hz, self.source_label.clone())
    }

    /// Sub-range of samples, e.g. an endpoint-trimmed region.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        let end = range.end.min(self.samples.len());
        let start = range.start.min(end);
        self.with_samples(self.samples[start..end].to_vec())
    }

    /// Multiplies every sample by `k`.
    pub fn scaled(&self, k: T) -> Self {
        Self {
            samples: self.samples.iter().map(|&s| s * k).collect(),
            sample_rate_hz: self.sample_rate_hz,
            source_label: self.source_label.clone(),
        }
    }
}

/// Sample encodings accepted by [`load_wav`] and produced by [`save_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

fn map_hound(err: hound::Error, path: &Path) -> Error {
    match err {
        // hound reports short reads as `Other` with this message
        hound::Error::IoError(e)
            if e.kind() == std::io::ErrorKind::UnexpectedEof
                || (e.kind() == std::io::ErrorKind::Other
                    && e.to_string().contains("read enough bytes")) =>
        {
            Error::MalformedContainer("file ends inside a header or chunk".into())
        }
        hound::Error::IoError(e) => Error::io(path, e),
        hound::Error::FormatError(msg) => Error::MalformedContainer(msg.to_string()),
        hound::Error::Unsupported => Error::UnsupportedEncoding("format not supported".into()),
        hound::Error::TooWide => Error::UnsupportedEncoding("sample width too large".into()),
        hound::Error::UnfinishedSample => {
            Error::MalformedContainer("data chunk ends inside a sample".into())
        }
        hound::Error::InvalidSampleFormat => {
            Error::UnsupportedEncoding("sample format does not match header".into())
        }
    }
}

/// Loads a PCM16 or float32 WAV file, downmixing stereo by averaging.
pub fn load_wav<T: Scalar>(path: impl AsRef<Path>) -> Result<AudioSignal<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_wav_from(BufReader::new(file), label, path)
}

/// Decodes a WAV stream already in memory or on any reader.
pub fn read_wav<T: Scalar, R: Read>(reader: R, label: impl Into<String>) -> Result<AudioSignal<T>> {
    read_wav_from(reader, label.into(), Path::new("<stream>"))
}

fn read_wav_from<T: Scalar, R: Read>(
    reader: R,
    label: String,
    path: &Path,
) -> Result<AudioSignal<T>> {
    let mut reader = hound::WavReader::new(reader).map_err(|e| map_hound(e, path))?;
    let spec = reader.spec();
    let channels = usize::from(spec.channels);
    if !(1..=2).contains(&channels) {
        return Err(Error::UnsupportedEncoding(format!(
            "{channels} channels (expected 1 or 2)"
        )));
    }
    let interleaved: Vec<T> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => {
            let scale = T::lit(1.0 / 32768.0);
            reader
                .samples::<i16>()
                .map(|s| s.map(|v| T::lit(f64::from(v)) * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| map_hound(e, path))?
        }
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| {
                s.map(|v| {
                    let v = T::lit(f64::from(v));
                    v.max(-T::one()).min(T::one())
                })
            })
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(e, path))?,
        (fmt, bits) => {
            return Err(Error::UnsupportedEncoding(format!(
                "{bits}-bit {fmt:?} samples"
            )));
        }
    };
    if interleaved.len() < channels {
        return Err(Error::EmptyAudio);
    }
    let samples = if channels == 2 {
        let half = T::lit(0.5);
        interleaved
            .chunks_exact(2)
            .map(|lr| (lr[0] + lr[1]) * half)
            .collect()
    } else {
        interleaved
    };
    AudioSignal::new(samples, spec.sample_rate, label)
}

fn wav_spec(sample_rate: u32, encoding: WavEncoding) -> hound::WavSpec {
    match encoding {
        WavEncoding::Pcm16 => hound::WavSpec {
            channels: 1,
            sample_rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        },
        WavEncoding::Float32 => hound::WavSpec {
            channels: 1,
            sample_rate,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        },
    }
}

/// Quantizes one normalized sample to PCM16 (round to nearest, saturating).
pub fn to_pcm16<T: Scalar>(x: T) -> i16 {
    let v = (x.as_f64() * 32768.0).round();
    v.clamp(-32768.0, 32767.0) as i16
}

pub fn write_wav<T: Scalar, W: Write + Seek>(
    signal: &AudioSignal<T>,
    writer: W,
    encoding: WavEncoding,
) -> Result<()> {
    let path = Path::new("<stream>");
    let mut w = hound::WavWriter::new(writer, wav_spec(signal.sample_rate_hz(), encoding))
        .map_err(|e| map_hound(e, path))?;
    for &s in signal.samples() {
        match encoding {
            WavEncoding::Pcm16 => w.write_sample(to_pcm16(s)),
            WavEncoding::Float32 => w.write_sample(s.as_f64() as f32),
        }
        .map_err(|e| map_hound(e, path))?;
    }
    w.finalize().map_err(|e| map_hound(e, path))
}

pub fn save_wav<T: Scalar>(
    signal: &AudioSignal<T>,
    path: impl AsRef<Path>,
    encoding: WavEncoding,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_wav(signal, BufWriter::new(file), encoding)
}

/// One cell of an output table.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn to_csv_field(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::from(*v),
            Cell::Float(v) => serde_json::Number::from_f64(*v)
                .map(Value::Number)
                .unwrap_or(Value::Null),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Bool(b) => Value::from(*b),
            Cell::Empty => Value::Null,
        }
    }
}

/// Shortest decimal that parses back to the same `f64` (up to 17 significant digits).
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

/// Column-named records, all rows sharing one schema.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    fn check_schema(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                return Err(Error::TableSchema(format!(
                    "row {i} has {} cells, header has {}",
                    row.len(),
                    self.columns.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
}

/// Renders a table. With a digest, CSV gains a leading `# config_digest=` comment line
/// and JSON becomes `{"config_digest": .., "rows": [..]}`; without one, the output is a
/// plain CSV or a top-level JSON array.
pub fn render_table(table: &Table, format: TableFormat, digest: Option<&str>) -> Result<String> {
    table.check_schema()?;
    match format {
        TableFormat::Csv => {
            let mut out = Vec::new();
            if let Some(d) = digest {
                writeln!(out, "# config_digest={d}").expect("write to Vec");
            }
            {
                let mut w = csv::WriterBuilder::new()
                    .terminator(csv::Terminator::Any(b'\n'))
                    .from_writer(&mut out);
                w.write_record(&table.columns)
                    .map_err(|e| Error::Serialization(e.to_string()))?;
                for row in &table.rows {
                    w.write_record(row.iter().map(Cell::to_csv_field))
                        .map_err(|e| Error::Serialization(e.to_string()))?;
                }
                w.flush().map_err(|e| Error::Serialization(e.to_string()))?;
            }
            String::from_utf8(out).map_err(|e| Error::Serialization(e.to_string()))
        }
        TableFormat::Json => {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = table
                        .columns
                        .iter()
                        .cloned()
                        .zip(row.iter().map(Cell::to_json))
                        .collect();
                    Value::Object(obj)
                })
                .collect();
            let doc = match digest {
                Some(d) => {
                    let mut obj = Map::new();
                    obj.insert("config_digest".into(), Value::from(d));
                    obj.insert("rows".into(), Value::Array(rows));
                    Value::Object(obj)
                }
                None => Value::Array(rows),
            };
            let mut text = serde_json::to_string_pretty(&doc)
                .map_err(|e| Error::Serialization(e.to_string()))?;
            text.push('\n');
            Ok(text)
        }
    }
}

/// Writes one record per row (CSV with header) or a top-level array of objects (JSON).
pub fn save_table(table: &Table, path: impl AsRef<Path>, format: TableFormat) -> Result<()> {
    write_text(path.as_ref(), &render_table(table, format, None)?)
}

/// As [`save_table`], with the configuration digest embedded.
pub fn save_table_with_digest(
    table: &Table,
    path: impl AsRef<Path>,
    format: TableFormat,
    digest: &str,
) -> Result<()> {
    write_text(path.as_ref(), &render_table(table, format, Some(digest))?)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
