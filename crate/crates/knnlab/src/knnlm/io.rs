//! On-disk formats for datastores and evaluation records.
//!
//! * Datastore: magic `TLKNNDS1`, little-endian `u32` dimension, `u64`
//!   entry count, then all keys as f32 (row-major) and all values as u32.
//! * Evaluation records: CSV with the header in [`RECORDS_HEADER`]; floats
//!   print in Rust's shortest round-trip form; `hit` is 0/1.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Datastore, EvalRecord, RECORDS_HEADER};
use crate::error::{Error, Result};
use crate::util::binio::{write_f32s, write_u32, write_u64, CountingReader};
use crate::util::Matrix;

pub const DATASTORE_MAGIC: &[u8; 8] = b"TLKNNDS1";

pub fn write_datastore_file(path: &Path, ds: &Datastore) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DATASTORE_MAGIC)?;
    write_u32(&mut w, ds.dim() as u32)?;
    write_u64(&mut w, ds.len() as u64)?;
    write_f32s(&mut w, ds.keys().data())?;
    for &v in ds.values() {
        write_u32(&mut w, v)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a datastore. The file does not carry a vocabulary size, so values
/// are validated against `vocab_size` from the caller's corpus or config.
pub fn read_datastore_file(path: &Path, vocab_size: u32) -> Result<Datastore> {
    let mut r = CountingReader::new(BufReader::new(File::open(path)?));
    r.expect_magic(DATASTORE_MAGIC, "datastore")?;
    let dim = r.read_u32("key dimension")? as usize;
    if dim == 0 {
        return Err(Error::Data("datastore header declares dimension 0".into()));
    }
    let n = r.read_u64("entry count")? as usize;
    let keys = Matrix::from_vec(r.read_f32s(n * dim, "key vectors")?, dim)?;
    let mut values = Vec::with_capacity(n);
    let mut buf = vec![0u8; 4 * 4096];
    let mut remaining = n;
    while remaining > 0 {
        let take = remaining.min(4096);
        let chunk = &mut buf[..take * 4];
        r.read_exact_at(chunk, "value tokens")?;
        values.extend(
            chunk.chunks_exact(4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]])),
        );
        remaining -= take;
    }
    Datastore::from_parts(keys, values, vocab_size)
}

pub fn write_records_csv(path: &Path, records: &[EvalRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{RECORDS_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.position,
            r.target_id,
            r.freq_datastore,
            r.freq_pretrain,
            r.p_lm,
            r.p_knn,
            r.p_interp,
            u8::from(r.hit),
            r.ctx_ngram_counts[0],
            r.ctx_ngram_counts[1],
            r.ctx_ngram_counts[2],
            r.ctx_ngram_counts[3],
            r.ctx_ngram_counts[4],
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<EvalRecord>> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Data(format!("{}: empty records file", path.display())))?;
    if header.trim_end() != RECORDS_HEADER {
        return Err(Error::Data(format!("{}: unexpected records header", path.display())));
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 13 {
            return Err(Error::Data(format!(
                "{}: line {}: expected 13 fields, got {}",
                path.display(),
                lineno + 2,
                fields.len()
            )));
        }
        let parse_err = |what: &str| {
            Error::Data(format!("{}: line {}: bad {what}", path.display(), lineno + 2))
        };
        let hit = match fields[7] {
            "0" => false,
            "1" => true,
            _ => return Err(parse_err("hit flag")),
        };
        let mut counts = [0u64; 5];
        for (i, c) in counts.iter_mut().enumerate() {
            *c = fields[8 + i].parse().map_err(|_| parse_err("context n-gram count"))?;
        }
        records.push(EvalRecord {
            position: fields[0].parse().map_err(|_| parse_err("position"))?,
            target_id: fields[1].parse().map_err(|_| parse_err("target id"))?,
            freq_datastore: fields[2].parse().map_err(|_| parse_err("datastore frequency"))?,
            freq_pretrain: fields[3].parse().map_err(|_| parse_err("pretraining frequency"))?,
            p_lm: fields[4].parse().map_err(|_| parse_err("base probability"))?,
            p_knn: fields[5].parse().map_err(|_| parse_err("neighbor probability"))?,
            p_interp: fields[6].parse().map_err(|_| parse_err("interpolated probability"))?,
            hit,
            ctx_ngram_counts: counts,
        });
    }
    Ok(records)
}
