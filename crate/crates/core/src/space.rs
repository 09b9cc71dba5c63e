//! Queryable embedding spaces with exact top-k cosine neighbor search.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::corpus::{FrequencyTable, Vocabulary};
use crate::error::{Error, Result};
use crate::sgns::EmbeddingMatrix;

/// Neighbor candidates must occur strictly more often than this.
pub const DEFAULT_NEIGHBOR_MIN_FREQ: u64 = 100;

/// Unit-normalized word vectors plus the corpus frequencies of their words.
///
/// Rows follow vocabulary order (descending frequency, then word). Words with
/// all-zero vectors are dropped on construction.
#[derive(Debug, Clone)]
pub struct EmbeddingSpace {
    vocab: Vocabulary,
    dim: usize,
    unit: Vec<f64>,
    norms: Vec<f64>,
    candidates: Vec<u32>,
    is_candidate: Vec<bool>,
    lex_rank: Vec<u32>,
    neighbor_min_freq: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub word: String,
    pub cosine: f64,
}

/// The `k` nearest neighbors of one word, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSet {
    pub target: String,
    pub k: usize,
    pub ordered: Vec<Neighbor>,
    pub as_set: HashSet<String>,
}

impl NeighborSet {
    fn new(target: String, k: usize, ordered: Vec<Neighbor>) -> Self {
        let as_set = ordered.iter().map(|n| n.word.clone()).collect();
        NeighborSet {
            target,
            k,
            ordered,
            as_set,
        }
    }

    pub fn len(&self) -> usize {
        self.ordered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordered.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.ordered.iter().map(|n| n.word.as_str())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators; the order is fixed so every caller gets
    // bit-identical results for the same pair.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4 * 4;
    for (ca, cb) in a[..chunks].chunks_exact(4).zip(b[..chunks].chunks_exact(4)) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    let mut tail = 0.0;
    for (x, y) in a[chunks..].iter().zip(&b[chunks..]) {
        tail += x * y;
    }
    // +0.0 folds a negative zero into positive zero
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail + 0.0
}

impl EmbeddingSpace {
    /// Builds a space from trained vectors and the corpus frequency table.
    /// Words missing from `freq` get frequency 0 and never become neighbor
    /// candidates.
    pub fn build(e: &EmbeddingMatrix, freq: &FrequencyTable, neighbor_min_freq: u64) -> Result<Self> {
        let rows = (0..e.len()).map(|i| {
            let w = &e.words()[i];
            (w.clone(), freq.get(w), e.vector(i).iter().map(|&v| v as f64).collect::<Vec<_>>())
        });
        Self::from_rows(rows, e.dim(), neighbor_min_freq)
    }

    /// Builds a space from `(word, frequency, vector)` rows.
    pub fn from_rows<I>(rows: I, dim: usize, neighbor_min_freq: u64) -> Result<Self>
    where
        I: IntoIterator<Item = (String, u64, Vec<f64>)>,
    {
        let mut kept = Vec::new();
        let mut zero = 0usize;
        for (w, f, v) in rows {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("vector of `{w}`")));
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                log::warn!("`{w}` has a zero vector and is excluded from the space");
                zero += 1;
                continue;
            }
            kept.push((w, f, v, norm));
        }
        if kept.is_empty() {
            return Err(Error::Degenerate(if zero > 0 {
                "all vectors are zero".into()
            } else {
                "no vectors".into()
            }));
        }

        let vocab = Vocabulary::from_counts(kept.iter().map(|(w, f, _, _)| (w.clone(), *f)))?;
        let n = vocab.len();
        let mut unit = vec![0.0; n * dim];
        let mut norms = vec![0.0; n];
        for (w, _, v, norm) in kept {
            let id = vocab.id(&w).expect("word just inserted");
            norms[id] = norm;
            for (dst, x) in unit[id * dim..(id + 1) * dim].iter_mut().zip(&v) {
                *dst = x / norm;
            }
        }

        let is_candidate: Vec<bool> = (0..n).map(|i| vocab.freq(i) > neighbor_min_freq).collect();
        let candidates = (0..n as u32).filter(|&i| is_candidate[i as usize]).collect();
        let mut by_word: Vec<u32> = (0..n as u32).collect();
        by_word.sort_by(|&a, &b| vocab.word(a as usize).cmp(vocab.word(b as usize)));
        let mut lex_rank = vec![0u32; n];
        for (r, &id) in by_word.iter().enumerate() {
            lex_rank[id as usize] = r as u32;
        }

        Ok(EmbeddingSpace {
            vocab,
            dim,
            unit,
            norms,
            candidates,
            is_candidate,
            lex_rank,
            neighbor_min_freq,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn neighbor_min_freq(&self) -> u64 {
        self.neighbor_min_freq
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vocab.contains(word)
    }

    pub fn id(&self, word: &str) -> Result<usize> {
        self.vocab
            .id(word)
            .ok_or_else(|| Error::UnknownWord(word.to_string()))
    }

    pub fn word(&self, id: usize) -> &str {
        self.vocab.word(id)
    }

    pub fn freq(&self, id: usize) -> u64 {
        self.vocab.freq(id)
    }

    pub fn unit_row(&self, id: usize) -> &[f64] {
        &self.unit[id * self.dim..(id + 1) * self.dim]
    }

    /// The original (unnormalized) vector of `id`.
    pub fn raw_row(&self, id: usize) -> Vec<f64> {
        self.unit_row(id).iter().map(|x| x * self.norms[id]).collect()
    }

    pub fn is_candidate(&self, id: usize) -> bool {
        self.is_candidate[id]
    }

    pub fn num_candidates(&self) -> usize {
        self.candidates.len()
    }

    /// Frequencies of the words in the space as a frequency table (words with
    /// frequency 0 are omitted).
    pub fn frequency_table(&self) -> FrequencyTable {
        let mut ft = FrequencyTable::new();
        for (i, w) in self.vocab.words().iter().enumerate() {
            ft.add(w, self.vocab.freq(i));
        }
        ft
    }

    pub fn cosine(&self, w1: &str, w2: &str) -> Result<f64> {
        let (a, b) = (self.id(w1)?, self.id(w2)?);
        Ok(self.cosine_ids(a, b))
    }

    pub fn cosine_ids(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 1.0;
        }
        dot(self.unit_row(a), self.unit_row(b)).clamp(-1.0, 1.0)
    }

    fn neighbor_order(&self, a: &(u32, f64), b: &(u32, f64)) -> Ordering {
        b.1.partial_cmp(&a.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| self.lex_rank[a.0 as usize].cmp(&self.lex_rank[b.0 as usize]))
    }

    /// Candidates available to `id` as neighbors (itself excluded).
    fn available(&self, id: usize) -> usize {
        self.candidates.len() - usize::from(self.is_candidate[id])
    }

    fn select_top_k(&self, mut scored: Vec<(u32, f64)>, k: usize) -> Vec<(u32, f64)> {
        if k == 0 {
            return Vec::new();
        }
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, |a, b| self.neighbor_order(a, b));
            scored.truncate(k);
        }
        scored.sort_unstable_by(|a, b| self.neighbor_order(a, b));
        scored
    }

    /// Exact top-k neighbor ids for a batch of query ids.
    ///
    /// Queries are processed in blocks so that each candidate row is loaded
    /// once per block; blocks run in parallel. Results do not depend on the
    /// blocking or the thread count. `k` is clamped to the number of available
    /// candidates, with a warning.
    pub fn top_k_ids(&self, queries: &[usize], k: usize) -> Vec<Vec<(u32, f64)>> {
        if let Some(&q) = queries.iter().find(|&&q| self.available(q) < k) {
            log::warn!(
                "k={k} exceeds the {} neighbor candidates available (e.g. for `{}`); clamping",
                self.available(q),
                self.word(q)
            );
        }
        let ncand = self.candidates.len().max(1);
        let block = (1 << 20) / ncand;
        let block = block.clamp(1, 64);
        queries
            .par_chunks(block)
            .flat_map_iter(|chunk| {
                let mut scores: Vec<Vec<(u32, f64)>> = chunk
                    .iter()
                    .map(|_| Vec::with_capacity(self.candidates.len()))
                    .collect();
                for &c in &self.candidates {
                    let row = self.unit_row(c as usize);
                    for (qi, &q) in chunk.iter().enumerate() {
                        if q as u32 != c {
                            scores[qi].push((c, dot(self.unit_row(q), row)));
                        }
                    }
                }
                scores.into_iter().map(move |s| self.select_top_k(s, k))
            })
            .collect()
    }

    fn to_neighbor_set(&self, query: usize, k: usize, ids: Vec<(u32, f64)>) -> NeighborSet {
        let ordered = ids
            .into_iter()
            .map(|(id, cosine)| Neighbor {
                word: self.word(id as usize).to_string(),
                cosine,
            })
            .collect();
        NeighborSet::new(self.word(query).to_string(), k, ordered)
    }

    /// Exact `k` nearest neighbors of `word` among the neighbor candidates,
    /// excluding the word itself. Cosine ties are broken by word.
    pub fn top_k_neighbors(&self, word: &str, k: usize) -> Result<NeighborSet> {
        let id = self.id(word)?;
        let mut res = self.top_k_ids(&[id], k);
        Ok(self.to_neighbor_set(id, k, res.pop().unwrap()))
    }

    pub fn top_k_batch(&self, words: &[&str], k: usize) -> Result<Vec<NeighborSet>> {
        let ids = words.iter().map(|w| self.id(w)).collect::<Result<Vec<_>>>()?;
        let res = self.top_k_ids(&ids, k);
        Ok(ids
            .into_iter()
            .zip(res)
            .map(|(id, r)| self.to_neighbor_set(id, k, r))
            .collect())
    }
}

/// TSV neighbor cache: `target<TAB>rank<TAB>neighbor<TAB>cosine`, ranks from 1.
pub fn write_neighbor_dump<W: Write>(sets: &[NeighborSet], mut out: W) -> Result<()> {
    for set in sets {
        for (r, n) in set.ordered.iter().enumerate() {
            writeln!(out, "{}\t{}\t{}\t{}", set.target, r + 1, n.word, n.cosine)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a neighbor dump back; `k` of each set is its number of rows.
pub fn read_neighbor_dump<R: BufRead>(input: R) -> Result<Vec<NeighborSet>> {
    let mut sets: Vec<NeighborSet> = Vec::new();
    let mut current: Option<(String, Vec<Neighbor>)> = None;
    let finish = |cur: Option<(String, Vec<Neighbor>)>, sets: &mut Vec<NeighborSet>| {
        if let Some((t, ordered)) = cur {
            let k = ordered.len();
            sets.push(NeighborSet::new(t, k, ordered));
        }
    };
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(Error::format(i + 1, "expected 4 tab-separated fields"));
        }
        let rank: usize = f[1]
            .parse()
            .map_err(|_| Error::format(i + 1, format!("bad rank `{}`", f[1])))?;
        let cosine: f64 = f[3]
            .parse()
            .map_err(|_| Error::format(i + 1, format!("bad cosine `{}`", f[3])))?;
        if current.as_ref().is_none_or(|(t, _)| t != f[0]) {
            finish(current.take(), &mut sets);
            current = Some((f[0].to_string(), Vec::new()));
        }
        let (_, ordered) = current.as_mut().unwrap();
        if rank != ordered.len() + 1 {
            return Err(Error::format(i + 1, format!("rank {rank} out of sequence")));
        }
        ordered.push(Neighbor {
            word: f[2].to_string(),
            cosine,
        });
    }
    finish(current, &mut sets);
    Ok(sets)
}
