//! Vocabulary tertiles by datastore frequency.

use crate::corpus::FrequencyTable;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tertile {
    Low,
    Med,
    High,
}

impl Tertile {
    pub const ALL: [Tertile; 3] = [Tertile::Low, Tertile::Med, Tertile::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Tertile::Low => "LOW",
            Tertile::Med => "MED",
            Tertile::High => "HIGH",
        }
    }

    pub fn from_str(s: &str) -> Option<Tertile> {
        match s {
            "LOW" => Some(Tertile::Low),
            "MED" => Some(Tertile::Med),
            "HIGH" => Some(Tertile::High),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Tertile::Low => 0,
            Tertile::Med => 1,
            Tertile::High => 2,
        }
    }
}

/// Token type -> tertile, partitioning the vocabulary into thirds (±1)
/// by ascending frequency.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TertileCategories {
    cats: Vec<Tertile>,
}

impl TertileCategories {
    pub fn of(&self, token: u32) -> Tertile {
        self.cats[token as usize]
    }

    pub fn len(&self) -> usize {
        self.cats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cats.is_empty()
    }

    /// Number of types per tertile, in LOW, MED, HIGH order.
    pub fn sizes(&self) -> [usize; 3] {
        let mut out = [0usize; 3];
        for c in &self.cats {
            out[c.index()] += 1;
        }
        out
    }
}

/// Sort types ascending by (count, id) and split at floor(V/3) and
/// floor(2V/3): the first chunk is LOW, the middle MED, the rest HIGH.
pub fn categorize_tertiles(freq: &FrequencyTable) -> Result<TertileCategories> {
    let v = freq.len();
    if v < 3 {
        return Err(Error::InvalidInput(format!(
            "tertiles need a vocabulary of at least 3 types, got {v}"
        )));
    }
    let mut order: Vec<u32> = (0..v as u32).collect();
    order.sort_by_key(|&t| (freq.count(t), t));
    let lo = v / 3;
    let hi = 2 * v / 3;
    let mut cats = vec![Tertile::Low; v];
    for (rank, &t) in order.iter().enumerate() {
        cats[t as usize] = if rank < lo {
            Tertile::Low
        } else if rank < hi {
            Tertile::Med
        } else {
            Tertile::High
        };
    }
    Ok(TertileCategories { cats })
}
