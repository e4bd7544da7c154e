use std::fmt;
use std::io::{self, BufRead, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::instances::{ExampleGenConfig, PretrainInstance};

pub const PACKED_MAGIC: &[u8; 4] = b"WBF1";
/// Magic, sequence length, prediction slots.
pub const PACKED_HEADER_LEN: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordFormat {
    Jsonl,
    Packed,
}

impl RecordFormat {
    pub fn extension(self) -> &'static str {
        match self {
            RecordFormat::Jsonl => "jsonl",
            RecordFormat::Packed => "wbf",
        }
    }
}

impl fmt::Display for RecordFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordFormat::Jsonl => "jsonl",
            RecordFormat::Packed => "packed",
        })
    }
}

impl FromStr for RecordFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(RecordFormat::Jsonl),
            "packed" => Ok(RecordFormat::Packed),
            other => Err(format!("unknown record format {other:?} (expected jsonl or packed)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum SerializeError {
    #[error("instance {index} has sequence length {found}, expected {expected}")]
    LengthMismatch { index: u64, expected: usize, found: usize },
    #[error("instance {index} has {found} masked positions, more than the {max} slots")]
    TooManyPredictions { index: u64, max: usize, found: usize },
    #[error("not a packed instance file (bad magic)")]
    BadMagic,
    #[error("record {index}: {message}")]
    BadRecord { index: u64, message: String },
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Bytes per packed record, including its length prefix.
pub fn packed_record_size(max_seq_length: usize, max_predictions: usize) -> usize {
    4 + 4 * max_seq_length + 2 * max_seq_length + 4 + 8 * max_predictions + 1
}

#[derive(Serialize, Deserialize)]
struct JsonRecord {
    input_ids: Vec<u32>,
    input_mask: Vec<u8>,
    segment_ids: Vec<u8>,
    masked_lm_positions: Vec<u32>,
    masked_lm_ids: Vec<u32>,
    next_sentence_label: [u8; 1],
}

/// Ordered writer for one instance file. Every instance must match the
/// sequence length given at construction.
pub struct InstanceWriter<W: Write> {
    out: W,
    format: RecordFormat,
    max_seq_length: usize,
    max_predictions: usize,
    count: u64,
}

impl<W: Write> InstanceWriter<W> {
    pub fn new(mut out: W, format: RecordFormat, max_seq_length: usize, max_predictions: usize) -> io::Result<Self> {
        if format == RecordFormat::Packed {
            out.write_all(PACKED_MAGIC)?;
            out.write_all(&(max_seq_length as u32).to_le_bytes())?;
            out.write_all(&(max_predictions as u32).to_le_bytes())?;
        }
        Ok(InstanceWriter {
            out,
            format,
            max_seq_length,
            max_predictions,
            count: 0,
        })
    }

    pub fn write(&mut self, inst: &PretrainInstance) -> Result<(), SerializeError> {
        let index = self.count;
        for len in [inst.input_ids.len(), inst.input_mask.len(), inst.segment_ids.len()] {
            if len != self.max_seq_length {
                return Err(SerializeError::LengthMismatch {
                    index,
                    expected: self.max_seq_length,
                    found: len,
                });
            }
        }
        let n = inst.masked_lm_positions.len();
        if n > self.max_predictions || inst.masked_lm_ids.len() != n {
            return Err(SerializeError::TooManyPredictions {
                index,
                max: self.max_predictions,
                found: n.max(inst.masked_lm_ids.len()),
            });
        }
        match self.format {
            RecordFormat::Jsonl => {
                let record = JsonRecord {
                    input_ids: inst.input_ids.clone(),
                    input_mask: inst.input_mask.clone(),
                    segment_ids: inst.segment_ids.clone(),
                    masked_lm_positions: inst.masked_lm_positions.clone(),
                    masked_lm_ids: inst.masked_lm_ids.clone(),
                    next_sentence_label: [inst.next_sentence_label],
                };
                serde_json::to_writer(&mut self.out, &record).map_err(io::Error::from)?;
                self.out.write_all(b"\n")?;
            }
            RecordFormat::Packed => {
                let size = packed_record_size(self.max_seq_length, self.max_predictions);
                let mut buf = Vec::with_capacity(size);
                buf.extend_from_slice(&((size - 4) as u32).to_le_bytes());
                for id in &inst.input_ids {
                    buf.extend_from_slice(&id.to_le_bytes());
                }
                buf.extend_from_slice(&inst.input_mask);
                buf.extend_from_slice(&inst.segment_ids);
                buf.extend_from_slice(&(n as u32).to_le_bytes());
                for slots in [&inst.masked_lm_positions, &inst.masked_lm_ids] {
                    for i in 0..self.max_predictions {
                        buf.extend_from_slice(&slots.get(i).copied().unwrap_or(0).to_le_bytes());
                    }
                }
                buf.push(inst.next_sentence_label);
                debug_assert_eq!(buf.len(), size);
                self.out.write_all(&buf)?;
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<PretrainInstance>, SerializeError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let r: JsonRecord = serde_json::from_str(&line).map_err(|source| SerializeError::Json { line: i + 1, source })?;
        out.push(PretrainInstance {
            input_ids: r.input_ids,
            input_mask: r.input_mask,
            segment_ids: r.segment_ids,
            masked_lm_positions: r.masked_lm_positions,
            masked_lm_ids: r.masked_lm_ids,
            next_sentence_label: r.next_sentence_label[0],
        });
    }
    Ok(out)
}

fn u32_at(buf: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(buf[at..at + 4].try_into().unwrap())
}

pub fn read_packed<R: Read>(mut input: R) -> Result<Vec<PretrainInstance>, SerializeError> {
    let mut header = [0u8; PACKED_HEADER_LEN];
    input.read_exact(&mut header).map_err(|_| SerializeError::BadMagic)?;
    if &header[..4] != PACKED_MAGIC {
        return Err(SerializeError::BadMagic);
    }
    let len = u32_at(&header, 4) as usize;
    let preds = u32_at(&header, 8) as usize;
    let body = packed_record_size(len, preds) - 4;
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;

    let mut out = Vec::new();
    let mut at = 0;
    while at < rest.len() {
        let index = out.len() as u64;
        let bad = |message: String| SerializeError::BadRecord { index, message };
        if rest.len() - at < 4 + body {
            return Err(bad("truncated record".into()));
        }
        let declared = u32_at(&rest, at) as usize;
        if declared != body {
            return Err(bad(format!("length prefix {declared}, expected {body}")));
        }
        let r = &rest[at + 4..at + 4 + body];
        let ids = |from: usize, n: usize| (0..n).map(|i| u32_at(r, from + 4 * i)).collect::<Vec<_>>();
        let input_ids = ids(0, len);
        let input_mask = r[4 * len..5 * len].to_vec();
        let segment_ids = r[5 * len..6 * len].to_vec();
        let n = u32_at(r, 6 * len) as usize;
        if n > preds {
            return Err(bad(format!("{n} masked positions exceed {preds} slots")));
        }
        let positions = ids(6 * len + 4, n);
        let masked_ids = ids(6 * len + 4 + 4 * preds, n);
        out.push(PretrainInstance {
            input_ids,
            input_mask,
            segment_ids,
            masked_lm_positions: positions,
            masked_lm_ids: masked_ids,
            next_sentence_label: r[body - 1],
        });
        at += 4 + body;
    }
    Ok(out)
}

/// Summary written next to an instance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceManifest {
    pub format: RecordFormat,
    pub count: u64,
    pub max_seq_length: usize,
    pub vocab_checksum: String,
    pub config: ExampleGenConfig,
}

/// Writes all instances and returns the manifest describing them.
pub fn serialize_instances<'a, W, I>(
    instances: I,
    out: W,
    format: RecordFormat,
    cfg: &ExampleGenConfig,
    vocab_checksum: &str,
) -> Result<InstanceManifest, SerializeError>
where
    W: Write,
    I: IntoIterator<Item = &'a PretrainInstance>,
{
    let mut writer = InstanceWriter::new(out, format, cfg.max_seq_length, cfg.max_predictions_per_seq)?;
    for inst in instances {
        writer.write(inst)?;
    }
    let count = writer.count();
    writer.finish()?;
    Ok(InstanceManifest {
        format,
        count,
        max_seq_length: cfg.max_seq_length,
        vocab_checksum: vocab_checksum.to_string(),
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(len: usize, label: u8) -> PretrainInstance {
        let mut input_ids: Vec<u32> = (0..len as u32).map(|i| i + 7).collect();
        input_ids[len - 1] = 0;
        PretrainInstance {
            input_mask: (0..len).map(|i| u8::from(i + 1 < len)).collect(),
            segment_ids: (0..len).map(|i| u8::from(i > len / 2 && i + 1 < len)).collect(),
            input_ids,
            masked_lm_positions: vec![1, 3],
            masked_lm_ids: vec![42, 43],
            next_sentence_label: label,
        }
    }

    fn cfg(len: usize) -> ExampleGenConfig {
        ExampleGenConfig { max_seq_length: len, max_predictions_per_seq: 4, ..Default::default() }
    }

    #[test]
    fn jsonl_round_trip() {
        let items = vec![sample(16, 0), sample(16, 1)];
        let mut buf = Vec::new();
        let m = serialize_instances(&items, &mut buf, RecordFormat::Jsonl, &cfg(16), "abc").unwrap();
        assert_eq!(m.count, 2);
        let line = String::from_utf8(buf.clone()).unwrap();
        assert!(line.lines().next().unwrap().contains("\"next_sentence_label\":[0]"));
        assert_eq!(read_jsonl(&buf[..]).unwrap(), items);
    }

    #[test]
    fn packed_size_and_round_trip() {
        let items: Vec<_> = (0..5).map(|i| sample(16, i % 2)).collect();
        let mut buf = Vec::new();
        serialize_instances(&items, &mut buf, RecordFormat::Packed, &cfg(16), "abc").unwrap();
        assert_eq!(buf.len(), PACKED_HEADER_LEN + 5 * packed_record_size(16, 4));
        assert_eq!(read_packed(&buf[..]).unwrap(), items);
    }

    #[test]
    fn empty_stream_is_valid() {
        let mut buf = Vec::new();
        let m = serialize_instances([], &mut buf, RecordFormat::Packed, &cfg(16), "abc").unwrap();
        assert_eq!(m.count, 0);
        assert_eq!(buf.len(), PACKED_HEADER_LEN);
        assert!(read_packed(&buf[..]).unwrap().is_empty());
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let items = vec![sample(16, 0), sample(32, 0)];
        let err = serialize_instances(&items, Vec::new(), RecordFormat::Jsonl, &cfg(16), "abc").unwrap_err();
        assert!(matches!(err, SerializeError::LengthMismatch { index: 1, expected: 16, found: 32 }));
    }

    #[test]
    fn bad_magic() {
        assert!(matches!(read_packed(&b"XXXX\0\0\0\0\0\0\0\0"[..]), Err(SerializeError::BadMagic)));
    }
}
