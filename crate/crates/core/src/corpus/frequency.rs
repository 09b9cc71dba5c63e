use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Raw token counts for one corpus.
///
/// Zero counts are never stored and `total_tokens` always equals the sum of
/// the stored counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: HashMap<String, u64>,
    total_tokens: u64,
}

impl FrequencyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, word: &str, n: u64) {
        if n == 0 {
            return;
        }
        match self.counts.get_mut(word) {
            Some(c) => *c += n,
            None => {
                self.counts.insert(word.to_string(), n);
            }
        }
        self.total_tokens += n;
    }

    pub fn merge(mut self, other: FrequencyTable) -> FrequencyTable {
        if self.counts.len() < other.counts.len() {
            return other.merge(self);
        }
        for (w, n) in other.counts {
            *self.counts.entry(w).or_insert(0) += n;
        }
        self.total_tokens += other.total_tokens;
        self
    }

    pub fn get(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// Number of distinct words.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(w, &n)| (w.as_str(), n))
    }

    /// Entries sorted by descending count, ties broken lexicographically.
    pub fn sorted(&self) -> Vec<(&str, u64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        v
    }

    pub fn top_n(&self, n: usize) -> Vec<&str> {
        self.sorted().into_iter().take(n).map(|(w, _)| w).collect()
    }

    /// `word<TAB>count`, sorted by descending count then word.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for (w, n) in self.sorted() {
            writeln!(out, "{w}\t{n}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(input: R) -> Result<Self> {
        let mut ft = FrequencyTable::new();
        let mut seen = BTreeSet::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (word, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(i + 1, "expected `word<TAB>count`"))?;
            let count: u64 = count
                .trim()
                .parse()
                .map_err(|_| Error::format(i + 1, format!("bad count `{count}`")))?;
            if !seen.insert(word.to_string()) {
                return Err(Error::DuplicateWord(word.to_string()));
            }
            ft.add(word, count);
        }
        Ok(ft)
    }
}

impl<S: AsRef<str>> FromIterator<S> for FrequencyTable {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut ft = FrequencyTable::new();
        for w in iter {
            ft.add(w.as_ref(), 1);
        }
        ft
    }
}

/// Exact multiset counts of a token stream.
pub fn count_frequencies<I, S>(tokens: I) -> FrequencyTable
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    tokens.into_iter().collect()
}

/// Counts tokenized documents in parallel; the merge is order-independent so
/// the result does not depend on how work was split.
pub fn count_documents_par<D: AsRef<[String]> + Sync>(docs: &[D]) -> FrequencyTable {
    docs.par_iter()
        .fold(FrequencyTable::new, |mut ft, doc| {
            for w in doc.as_ref() {
                ft.add(w, 1);
            }
            ft
        })
        .reduce(FrequencyTable::new, FrequencyTable::merge)
}
