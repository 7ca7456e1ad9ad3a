//! Tokenization and vocabulary construction.

use std::collections::HashMap;

use super::Corpus;
use crate::error::{Error, Result};

/// Reserved id for out-of-vocabulary tokens.
pub const UNK: u32 = 0;
const UNK_TOKEN: &str = "<unk>";

/// Whitespace-and-punctuation tokenizer.
///
/// Maximal runs of alphanumeric characters form one token; every other
/// non-whitespace codepoint is a token by itself. No case folding.
/// `"a--b"` tokenizes to `["a", "-", "-", "b"]`.
pub fn tokenize(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            if run_start.is_none() {
                run_start = Some(i);
            }
        } else {
            if let Some(s) = run_start.take() {
                out.push(&text[s..i]);
            }
            if !ch.is_whitespace() {
                out.push(&text[i..i + ch.len_utf8()]);
            }
        }
    }
    if let Some(s) = run_start {
        out.push(&text[s..]);
    }
    out
}

/// Token-string ↔ id mapping. Id 0 is always `<unk>`.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    entries: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    fn with_unk() -> Self {
        let mut v = Vocabulary { entries: Vec::new(), ids: HashMap::new() };
        v.insert(UNK_TOKEN);
        v
    }

    fn insert(&mut self, token: &str) -> u32 {
        let id = self.entries.len() as u32;
        self.entries.push(token.to_string());
        self.ids.insert(token.to_string(), id);
        id
    }

    /// Number of entries including `<unk>`.
    pub fn len(&self) -> u32 {
        self.entries.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        false // always holds <unk>
    }

    /// Id for a token, falling back to [`UNK`].
    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.entries.get(id as usize).map(|s| s.as_str())
    }

    pub(crate) fn from_entries(entries: Vec<String>) -> Result<Self> {
        if entries.first().map(|s| s.as_str()) != Some(UNK_TOKEN) {
            return Err(Error::Data(format!(
                "vocabulary must start with {UNK_TOKEN} at id 0"
            )));
        }
        let mut ids = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if ids.insert(e.clone(), i as u32).is_some() {
                return Err(Error::Data(format!("duplicate vocabulary entry {e:?}")));
            }
        }
        Ok(Vocabulary { entries, ids })
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }
}

/// Build a vocabulary from tokenized documents.
///
/// Tokens occurring at least `min_count` times get ids in order of first
/// occurrence, starting at 1; everything else maps to [`UNK`].
pub fn build_vocab(docs: &[Vec<&str>], min_count: u64) -> Result<Vocabulary> {
    if min_count == 0 {
        return Err(Error::InvalidInput(
            "min_count must be at least 1".to_string(),
        ));
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for doc in docs {
        for &tok in doc {
            *counts.entry(tok).or_insert(0) += 1;
        }
    }
    let mut vocab = Vocabulary::with_unk();
    for doc in docs {
        for &tok in doc {
            if counts[tok] >= min_count && !vocab.ids.contains_key(tok) {
                vocab.insert(tok);
            }
        }
    }
    Ok(vocab)
}

/// Map tokenized documents to ids under a vocabulary.
pub fn corpus_from_tokens(docs: &[Vec<&str>], vocab: &Vocabulary) -> Corpus {
    let mapped = docs
        .iter()
        .map(|doc| doc.iter().map(|t| vocab.id(t)).collect())
        .collect();
    Corpus::new(mapped, vocab.len()).expect("vocabulary ids are in range by construction")
}
