//! JSONL and IRAD readers/writers.
//!
//! IRAD layout (all integers little-endian):
//!
//! ```text
//! "IRAD" | version u8 = 1 | N u32 | d u32
//! N*d f64, row-major
//! N x (len u16, utf-8 id bytes)
//! N x window u8 (0 = previous, 1 = current)
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{EmbeddingSet, Speaker, Transcript, Window};
use crate::error::{Error, Result};

pub const IRAD_MAGIC: &[u8; 4] = b"IRAD";
pub const IRAD_VERSION: u8 = 0x01;
/// Magic, version, N, d.
pub const IRAD_HEADER_LEN: usize = 4 + 1 + 4 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Jsonl,
    Irad,
}

impl EmbeddingFormat {
    /// Picks IRAD for `.irad` paths, JSONL otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("irad") => EmbeddingFormat::Irad,
            _ => EmbeddingFormat::Jsonl,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TranscriptRecord {
    id: String,
    window: Window,
    sentences: Vec<SentenceRecord>,
    #[serde(default)]
    agent_first_index: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SentenceRecord {
    speaker: Speaker,
    text: String,
}

/// Parses one transcript line; `line` is 1-based and only used in errors.
pub fn parse_transcript_line(raw: &str, line: usize) -> Result<Transcript> {
    let rec: TranscriptRecord = serde_json::from_str(raw).map_err(|e| Error::MalformedRecord {
        line,
        reason: e.to_string(),
    })?;
    if let Some(pos) = rec.sentences.iter().position(|s| s.text.trim().is_empty()) {
        return Err(Error::MalformedRecord {
            line,
            reason: format!("sentence {pos} of {} is empty", rec.id),
        });
    }
    let claimed = rec.agent_first_index;
    let turns = rec
        .sentences
        .into_iter()
        .map(|s| (s.speaker, s.text))
        .collect();
    let t = Transcript::new(rec.id, rec.window, turns)?;
    if let Some(claimed) = claimed {
        if claimed != t.agent_first_index {
            return Err(Error::MalformedRecord {
                line,
                reason: format!(
                    "agent_first_index {claimed} disagrees with speakers (expected {})",
                    t.agent_first_index
                ),
            });
        }
    }
    Ok(t)
}

/// Reads a transcript JSONL file, one record per non-blank line.
pub fn load_transcripts(path: impl AsRef<Path>) -> Result<Vec<Transcript>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_transcript_line(&line, i + 1)?);
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Component {
    Number(f64),
    // "NaN", "inf" and friends: accepted by the parser, rejected by validation.
    Text(String),
}

#[derive(Deserialize)]
struct EmbeddingRecord {
    id: String,
    window: Window,
    vector: Vec<Component>,
    #[serde(default)]
    text: Option<String>,
}

#[derive(Serialize)]
struct EmbeddingRecordOut<'a> {
    id: &'a str,
    window: Window,
    vector: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    text: Option<&'a str>,
}

/// Loads an embedding set, detecting IRAD by its magic bytes.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(IRAD_MAGIC) {
        read_irad(&bytes)
    } else {
        let text = std::str::from_utf8(&bytes).map_err(|e| Error::MalformedRecord {
            line: 0,
            reason: e.to_string(),
        })?;
        parse_embeddings_jsonl(text)
    }
}

fn parse_embeddings_jsonl(text: &str) -> Result<EmbeddingSet> {
    let mut ids = Vec::new();
    let mut windows = Vec::new();
    let mut texts = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut dim = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: EmbeddingRecord =
            serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                line: i + 1,
                reason: e.to_string(),
            })?;
        let d = *dim.get_or_insert(rec.vector.len());
        if rec.vector.len() != d || d == 0 {
            return Err(Error::DimensionMismatch(rec.id));
        }
        for c in rec.vector {
            let v = match c {
                Component::Number(v) => v,
                Component::Text(s) => {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::MalformedRecord {
                            line: i + 1,
                            reason: format!("vector component {s:?} is not a number"),
                        })?
                }
            };
            if !v.is_finite() {
                return Err(Error::NonFiniteValue(rec.id));
            }
            values.push(v);
        }
        ids.push(rec.id);
        windows.push(rec.window);
        texts.push(rec.text);
    }
    let d = dim.ok_or(Error::EmptySet)?;
    let matrix = Array2::from_shape_vec((ids.len(), d), values).expect("rows checked");
    EmbeddingSet::new(ids, windows, matrix, Some(texts))
}

/// Writes `set` to `path` in the requested format.
pub fn save_embeddings(
    set: &EmbeddingSet,
    path: impl AsRef<Path>,
    format: EmbeddingFormat,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        EmbeddingFormat::Irad => write_irad(set)?,
        EmbeddingFormat::Jsonl => embeddings_to_jsonl(set),
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn embeddings_to_jsonl(set: &EmbeddingSet) -> Vec<u8> {
    let mut out = Vec::new();
    for i in 0..set.len() {
        let rec = EmbeddingRecordOut {
            id: &set.ids()[i],
            window: set.windows()[i],
            vector: set.row(i).to_vec(),
            text: set.text(i),
        };
        serde_json::to_writer(&mut out, &rec).expect("finite values always serialize");
        out.push(b'\n');
    }
    out
}

/// Encodes `set` as an IRAD container. Texts are not stored.
pub fn write_irad(set: &EmbeddingSet) -> Result<Vec<u8>> {
    let n = u32::try_from(set.len()).map_err(|_| Error::BadContainer("N exceeds u32".into()))?;
    let d = u32::try_from(set.dim()).map_err(|_| Error::BadContainer("d exceeds u32".into()))?;
    let id_bytes: usize = set.ids().iter().map(|s| 2 + s.len()).sum();
    let mut out =
        Vec::with_capacity(IRAD_HEADER_LEN + 8 * set.len() * set.dim() + id_bytes + set.len());
    out.extend_from_slice(IRAD_MAGIC);
    out.push(IRAD_VERSION);
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    for v in set.matrix().iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for id in set.ids() {
        let len = u16::try_from(id.len())
            .map_err(|_| Error::BadContainer(format!("id longer than 65535 bytes: {id:.32}...")))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(id.as_bytes());
    }
    out.extend(set.windows().iter().map(|w| w.to_byte()));
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::BadContainer(format!("truncated while reading {what}")))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Decodes an IRAD container.
pub fn read_irad(bytes: &[u8]) -> Result<EmbeddingSet> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(4, "magic")? != IRAD_MAGIC {
        return Err(Error::BadContainer("bad magic".into()));
    }
    let version = c.take(1, "version")?[0];
    if version != IRAD_VERSION {
        return Err(Error::BadContainer(format!(
            "unsupported version {version}"
        )));
    }
    let n = c.u32("N")? as usize;
    let d = c.u32("d")? as usize;
    let count = n
        .checked_mul(d)
        .ok_or_else(|| Error::BadContainer("N*d overflows".into()))?;
    let raw = c.take(
        count
            .checked_mul(8)
            .ok_or_else(|| Error::BadContainer("N*d overflows".into()))?,
        "matrix",
    )?;
    let values: Vec<f64> = raw
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let mut ids = Vec::with_capacity(n);
    for _ in 0..n {
        let len = u16::from_le_bytes(c.take(2, "id length")?.try_into().unwrap()) as usize;
        let id = std::str::from_utf8(c.take(len, "id")?)
            .map_err(|e| Error::BadContainer(format!("id is not utf-8: {e}")))?;
        ids.push(id.to_owned());
    }
    let windows = c
        .take(n, "windows")?
        .iter()
        .map(|&b| {
            Window::from_byte(b).ok_or_else(|| Error::BadContainer(format!("bad window byte {b}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if c.pos != bytes.len() {
        return Err(Error::BadContainer(format!(
            "{} trailing bytes",
            bytes.len() - c.pos
        )));
    }
    let matrix = Array2::from_shape_vec((n, d), values).expect("length checked");
    EmbeddingSet::new(ids, windows, matrix, None)
}
