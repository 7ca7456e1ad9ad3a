//! On-disk corpus formats.
//!
//! * Token-id corpus: magic `TLCORP1`, little-endian `u32` vocab size,
//!   `u64` document count, then per document a `u64` length and that many
//!   `u32` token ids.
//! * Frequency table: TSV of `token_id<TAB>count` rows under a `#total=<N>`
//!   header line.
//! * Text corpora: UTF-8, documents separated by blank lines.
//! * Vocabulary: one token per line, line number = id.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::text::Vocabulary;
use super::{Corpus, FrequencyTable};
use crate::error::{Error, Result};
use crate::util::binio::CountingReader;

pub const CORPUS_MAGIC: &[u8; 7] = b"TLCORP1";

pub fn write_corpus_file(path: &Path, corpus: &Corpus) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CORPUS_MAGIC)?;
    w.write_all(&corpus.vocab_size().to_le_bytes())?;
    w.write_all(&(corpus.n_docs() as u64).to_le_bytes())?;
    for doc in corpus.docs() {
        w.write_all(&(doc.len() as u64).to_le_bytes())?;
        for &t in doc {
            w.write_all(&t.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_corpus_file(path: &Path) -> Result<Corpus> {
    let mut r = CountingReader::new(BufReader::new(File::open(path)?));
    let mut magic = [0u8; 7];
    r.read_exact_at(&mut magic, "magic")?;
    if &magic != CORPUS_MAGIC {
        return Err(Error::Data(format!(
            "bad magic {:?}: expected {:?} ({})",
            String::from_utf8_lossy(&magic),
            String::from_utf8_lossy(CORPUS_MAGIC),
            path.display()
        )));
    }
    let vocab_size = r.read_u32("vocab size")?;
    let n_docs = r.read_u64("document count")?;
    let mut docs = Vec::with_capacity(n_docs.min(1 << 20) as usize);
    for d in 0..n_docs {
        let len = r.read_u64(&format!("length of document {d}"))?;
        let mut doc = Vec::with_capacity(len.min(1 << 24) as usize);
        for i in 0..len {
            doc.push(r.read_u32(&format!("token {i} of document {d}"))?);
        }
        docs.push(doc);
    }
    Corpus::new(docs, vocab_size)
}

pub fn write_freq_tsv(path: &Path, table: &FrequencyTable) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "#total={}", table.total())?;
    for (id, &c) in table.counts().iter().enumerate() {
        if c > 0 {
            writeln!(w, "{id}\t{c}")?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_freq_tsv(path: &Path) -> Result<FrequencyTable> {
    let r = BufReader::new(File::open(path)?);
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty frequency table", path.display())))??;
    let declared_total: u64 = header
        .strip_prefix("#total=")
        .ok_or_else(|| {
            Error::Data(format!(
                "{}: frequency table must start with #total=<N>, got {header:?}",
                path.display()
            ))
        })?
        .parse()
        .map_err(|e| Error::Data(format!("{}: bad total: {e}", path.display())))?;
    let mut counts: Vec<u64> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (id_s, count_s) = line.split_once('\t').ok_or_else(|| {
            Error::Data(format!(
                "{}: line {}: expected token_id<TAB>count",
                path.display(),
                lineno + 2
            ))
        })?;
        let id: usize = id_s
            .parse()
            .map_err(|e| Error::Data(format!("{}: line {}: bad id: {e}", path.display(), lineno + 2)))?;
        let c: u64 = count_s.parse().map_err(|e| {
            Error::Data(format!("{}: line {}: bad count: {e}", path.display(), lineno + 2))
        })?;
        if id >= counts.len() {
            counts.resize(id + 1, 0);
        }
        counts[id] += c;
    }
    let table = FrequencyTable::from_counts(counts);
    if table.total() != declared_total {
        return Err(Error::Data(format!(
            "{}: declared total {} but rows sum to {}",
            path.display(),
            declared_total,
            table.total()
        )));
    }
    Ok(table)
}

/// Read a UTF-8 text corpus: documents are runs of non-blank lines separated
/// by one or more blank lines; a document's lines are joined with spaces.
pub fn read_text_documents(path: &Path) -> Result<Vec<String>> {
    let r = BufReader::new(File::open(path)?);
    let mut docs = Vec::new();
    let mut cur = String::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            if !cur.is_empty() {
                docs.push(std::mem::take(&mut cur));
            }
        } else {
            if !cur.is_empty() {
                cur.push(' ');
            }
            cur.push_str(&line);
        }
    }
    if !cur.is_empty() {
        docs.push(cur);
    }
    Ok(docs)
}

pub fn write_vocab_file(path: &Path, vocab: &Vocabulary) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for e in vocab.entries() {
        writeln!(w, "{e}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vocab_file(path: &Path) -> Result<Vocabulary> {
    let r = BufReader::new(File::open(path)?);
    let entries: Vec<String> = r.lines().collect::<std::io::Result<_>>()?;
    Vocabulary::from_entries(entries)
}
