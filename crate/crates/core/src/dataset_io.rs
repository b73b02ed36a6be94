//! Dataset files: a commented CSV form and a compact binary form.
//!
//! Both round-trip bit-exactly. The CSV writer relies on `f64`'s shortest
//! round-trip formatting.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::AtomLayout;
use crate::sampling::{DatasetMeta, RssDataset, Schedule};
use crate::{Error, Result};

const CSV_TAG: &str = "# mts-rss-dataset v1";
const MAGIC: &[u8; 8] = b"MTSRSS01";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Csv,
    Binary,
}

#[derive(Serialize, Deserialize)]
struct BinaryHeader {
    samples: usize,
    master_seed: u64,
    scene_fingerprint: String,
    panels: String,
}

fn column_names(layout: &AtomLayout) -> Vec<String> {
    let mut names: Vec<String> = (0..layout.num_atoms())
        .map(|n| {
            let (l, u, v) = layout.atom_position(n);
            format!("p{l}_u{u}_v{v}")
        })
        .collect();
    names.push("rss".into());
    names
}

pub fn write_csv<W: Write>(dataset: &RssDataset, mut out: W) -> Result<()> {
    writeln!(out, "{CSV_TAG}")?;
    writeln!(out, "# samples={}", dataset.len())?;
    writeln!(out, "# master_seed={}", dataset.meta.master_seed)?;
    writeln!(
        out,
        "# scene_fingerprint={}",
        dataset.meta.scene_fingerprint
    )?;
    writeln!(out, "# panels={}", dataset.layout().describe())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(column_names(dataset.layout()))?;
    let mut record = Vec::with_capacity(dataset.layout().num_atoms() + 1);
    for (row, rss) in dataset.schedule.rows().zip(&dataset.rss) {
        record.clear();
        record.extend(row.iter().map(|k| k.to_string()));
        record.push(rss.to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(mut input: R) -> Result<RssDataset> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut meta = std::collections::HashMap::new();
    let mut lines = text.lines();
    if lines.next() != Some(CSV_TAG) {
        return Err(Error::Format("missing dataset header line".into()));
    }
    for line in lines.take_while(|l| l.starts_with('#')) {
        if let Some((k, v)) = line[1..].trim().split_once('=') {
            meta.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let field = |key: &str| {
        meta.get(key)
            .cloned()
            .ok_or_else(|| Error::Format(format!("missing header field {key}")))
    };
    let layout = Arc::new(AtomLayout::parse_description(&field("panels")?)?);
    let samples: usize = field("samples")?
        .parse()
        .map_err(|_| Error::Format("bad sample count".into()))?;
    let master_seed: u64 = field("master_seed")?
        .parse()
        .map_err(|_| Error::Format("bad master seed".into()))?;
    let n = layout.num_atoms();

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    if reader.headers()?.len() != n + 1 {
        return Err(Error::DimensionMismatch {
            expected: n + 1,
            found: reader.headers()?.len(),
        });
    }
    let mut indices = Vec::with_capacity(samples * n);
    let mut rss = Vec::with_capacity(samples);
    for record in reader.records() {
        let record = record?;
        for value in record.iter().take(n) {
            indices.push(
                value
                    .parse()
                    .map_err(|_| Error::Format(format!("bad phase index {value:?}")))?,
            );
        }
        let value = &record[n];
        rss.push(
            value
                .parse()
                .map_err(|_| Error::Format(format!("bad rss value {value:?}")))?,
        );
    }
    if rss.len() != samples {
        return Err(Error::DimensionMismatch {
            expected: samples,
            found: rss.len(),
        });
    }
    RssDataset::new(
        Schedule::new(layout, samples, indices)?,
        rss,
        DatasetMeta {
            master_seed,
            scene_fingerprint: field("scene_fingerprint")?,
        },
    )
}

pub fn write_binary<W: Write>(dataset: &RssDataset, mut out: W) -> Result<()> {
    let header = serde_json::to_vec(&BinaryHeader {
        samples: dataset.len(),
        master_seed: dataset.meta.master_seed,
        scene_fingerprint: dataset.meta.scene_fingerprint.clone(),
        panels: dataset.layout().describe(),
    })?;
    out.write_all(MAGIC)?;
    out.write_all(&(header.len() as u32).to_le_bytes())?;
    out.write_all(&header)?;
    let mut buf = Vec::with_capacity(dataset.len() * (dataset.layout().num_atoms() * 2 + 8));
    for row in dataset.schedule.rows() {
        for k in row {
            buf.extend_from_slice(&k.to_le_bytes());
        }
    }
    for x in &dataset.rss {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<RssDataset> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(Error::Format("not a binary RSS dataset".into()));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = 12 + header_len;
    if bytes.len() < body {
        return Err(Error::Format("truncated header".into()));
    }
    let header: BinaryHeader = serde_json::from_slice(&bytes[12..body])?;
    let layout = Arc::new(AtomLayout::parse_description(&header.panels)?);
    let n_idx = header.samples * layout.num_atoms();
    let expected = body + 2 * n_idx + 8 * header.samples;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let idx_bytes = &bytes[body..body + 2 * n_idx];
    let indices = idx_bytes
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    let rss = bytes[body + 2 * n_idx..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    RssDataset::new(
        Schedule::new(layout, header.samples, indices)?,
        rss,
        DatasetMeta {
            master_seed: header.master_seed,
            scene_fingerprint: header.scene_fingerprint,
        },
    )
}

pub fn save(dataset: &RssDataset, path: &Path, encoding: Encoding) -> Result<()> {
    let file = std::io::BufWriter::new(fs::File::create(path)?);
    match encoding {
        Encoding::Csv => write_csv(dataset, file),
        Encoding::Binary => write_binary(dataset, file),
    }
}

/// Reads either encoding, detected from the leading bytes.
pub fn load(path: &Path) -> Result<RssDataset> {
    let bytes = fs::read(path)?;
    let parsed = if bytes.starts_with(MAGIC) {
        read_binary(bytes.as_slice())
    } else {
        read_csv(bytes.as_slice())
    };
    parsed.map_err(|e| match e {
        Error::Format(message) => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}
