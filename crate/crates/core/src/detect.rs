//! Nearest-neighbor intersection detector and the ranked-list output type.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_stopwords, build_vocabulary, Vocabulary};
use crate::error::{Error, Result};
use crate::space::EmbeddingSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Neighborhood size.
    pub k: usize,
    /// Minimum corpus count for a word to be ranked.
    pub min_count: u64,
    /// Fraction of least frequent distinct words excluded from ranking.
    pub drop_quantile: f64,
    /// The most frequent `n` words of each corpus are treated as stopwords.
    pub stopword_top_n: usize,
    pub extra_stopwords: Vec<String>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            k: 1000,
            min_count: 200,
            drop_quantile: 0.2,
            stopword_top_n: 200,
            extra_stopwords: Vec::new(),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.drop_quantile) {
            return Err(Error::InvalidConfig(format!(
                "drop_quantile must lie in [0, 1), got {}",
                self.drop_quantile
            )));
        }
        Ok(())
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("k".into(), self.k.to_string());
        m.insert("min_count".into(), self.min_count.to_string());
        m.insert("drop_quantile".into(), self.drop_quantile.to_string());
        m.insert("stopword_top_n".into(), self.stopword_top_n.to_string());
        m.insert("extra_stopwords".into(), self.extra_stopwords.len().to_string());
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Nn,
    AlignCos,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Nn => "nn",
            Method::AlignCos => "aligncos",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nn" => Ok(Method::Nn),
            "aligncos" => Ok(Method::AlignCos),
            _ => Err(Error::InvalidConfig(format!("unknown method `{s}`"))),
        }
    }
}

/// Where a ranking came from: resolved configuration, seeds and input hashes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    pub inputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub word: String,
    pub score: f64,
    pub rank: usize,
}

/// Candidate words, most changed first. Scores are non-increasing and ranks
/// run 1, 2, 3, ...
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub entries: Vec<RankedEntry>,
    pub method: Method,
    pub provenance: Provenance,
}

impl RankedList {
    /// Sorts `(word, score, tie_break_freq)` by descending score, then
    /// descending tie-break frequency, then word.
    pub fn from_scores(method: Method, mut scored: Vec<(String, f64, u64)>) -> Result<Self> {
        if let Some((w, ..)) = scored.iter().find(|(_, s, _)| s.is_nan()) {
            return Err(Error::NonFinite(format!("score of `{w}`")));
        }
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap()
                .then_with(|| b.2.cmp(&a.2))
                .then_with(|| a.0.cmp(&b.0))
        });
        let mut seen = HashSet::new();
        for (w, ..) in &scored {
            if !seen.insert(w.as_str()) {
                return Err(Error::DuplicateWord(w.clone()));
            }
        }
        let entries = scored
            .into_iter()
            .enumerate()
            .map(|(i, (word, score, _))| RankedEntry {
                word,
                score: score + 0.0,
                rank: i + 1,
            })
            .collect();
        Ok(RankedList {
            entries,
            method,
            provenance: Provenance::default(),
        })
    }

    /// A list ranked in the given order, with scores decreasing from `len`.
    pub fn from_words<S: AsRef<str>>(method: Method, words: &[S]) -> Result<Self> {
        let n = words.len();
        let scored = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_ref().to_string(), (n - i) as f64, 0))
            .collect();
        Self::from_scores(method, scored)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.word.as_str())
    }

    pub fn top_k(&self, k: usize) -> impl Iterator<Item = &str> {
        self.words().take(k)
    }

    pub fn get(&self, word: &str) -> Option<&RankedEntry> {
        self.entries.iter().find(|e| e.word == word)
    }

    /// `rank<TAB>word<TAB>score`.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for e in &self.entries {
            writeln!(out, "{}\t{}\t{}", e.rank, e.word, e.score)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(input: R, method: Method) -> Result<Self> {
        let mut entries: Vec<RankedEntry> = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::format(i + 1, "expected `rank<TAB>word<TAB>score`"));
            }
            let rank: usize = f[0]
                .parse()
                .map_err(|_| Error::format(i + 1, format!("bad rank `{}`", f[0])))?;
            let score: f64 = f[2]
                .parse()
                .map_err(|_| Error::format(i + 1, format!("bad score `{}`", f[2])))?;
            if rank != entries.len() + 1 {
                return Err(Error::format(i + 1, format!("rank {rank} out of sequence")));
            }
            if entries.last().is_some_and(|p| score > p.score) {
                return Err(Error::format(i + 1, "scores must be non-increasing"));
            }
            if !seen.insert(f[1].to_string()) {
                return Err(Error::DuplicateWord(f[1].to_string()));
            }
            entries.push(RankedEntry {
                word: f[1].to_string(),
                score,
                rank,
            });
        }
        Ok(RankedList {
            entries,
            method,
            provenance: Provenance::default(),
        })
    }
}

/// Eligibility-flagged vocabularies of both spaces: stopwords are the top
/// `stopword_top_n` of either corpus plus the extra list; count and quantile
/// filters use each space's own corpus frequencies.
pub fn eligibility(a: &EmbeddingSpace, b: &EmbeddingSpace, cfg: &DetectorConfig) -> Result<(Vocabulary, Vocabulary)> {
    cfg.validate()?;
    let (ft_a, ft_b) = (a.frequency_table(), b.frequency_table());
    let stop = build_stopwords(&ft_a, &ft_b, cfg.stopword_top_n, &cfg.extra_stopwords);
    Ok((
        build_vocabulary(&ft_a, &stop, cfg.min_count, cfg.drop_quantile)?,
        build_vocabulary(&ft_b, &stop, cfg.min_count, cfg.drop_quantile)?,
    ))
}

/// Words present in both spaces and ranking-eligible in both corpora.
pub fn shared_eligible_words(a: &EmbeddingSpace, b: &EmbeddingSpace, cfg: &DetectorConfig) -> Result<BTreeSet<String>> {
    let (va, vb) = eligibility(a, b, cfg)?;
    let eligible_b: HashSet<&str> = vb.eligible_words().collect();
    let shared: BTreeSet<String> = va
        .eligible_words()
        .filter(|w| eligible_b.contains(w))
        .map(str::to_string)
        .collect();
    if shared.is_empty() {
        return Err(Error::Empty("no word is eligible in both corpora".into()));
    }
    Ok(shared)
}

/// `−|NN_a^k(w) ∩ NN_b^k(w)|`, compared on neighbor words.
pub fn nn_score(a: &EmbeddingSpace, b: &EmbeddingSpace, word: &str, k: usize) -> Result<i64> {
    let na = a.top_k_neighbors(word, k)?;
    let nb = b.top_k_neighbors(word, k)?;
    let shared = na.as_set.intersection(&nb.as_set).count();
    Ok(-(shared as i64))
}

/// Intersection sizes of the k-NN sets of `words` (which must exist in both
/// spaces), in input order.
pub fn intersection_sizes(a: &EmbeddingSpace, b: &EmbeddingSpace, words: &[&str], k: usize) -> Result<Vec<usize>> {
    let ids_a = words.iter().map(|w| a.id(w)).collect::<Result<Vec<_>>>()?;
    let ids_b = words.iter().map(|w| b.id(w)).collect::<Result<Vec<_>>>()?;
    // Map A's ids onto B's so that intersections compare integers.
    let a_to_b: Vec<Option<u32>> = (0..a.len())
        .map(|i| b.vocab().id(a.word(i)).map(|j| j as u32))
        .collect();
    let nn_a = a.top_k_ids(&ids_a, k);
    let nn_b = b.top_k_ids(&ids_b, k);
    Ok(nn_a
        .par_iter()
        .zip(nn_b.par_iter())
        .map(|(la, lb)| {
            let in_b: HashSet<u32> = la.iter().filter_map(|(id, _)| a_to_b[*id as usize]).collect();
            lb.iter().filter(|(id, _)| in_b.contains(id)).count()
        })
        .collect())
}

/// Ranks every shared eligible word by its NN-intersection score; smaller
/// intersections rank higher. Ties: larger `min(freq_a, freq_b)` first, then
/// lexicographic.
pub fn rank_usage_change(a: &EmbeddingSpace, b: &EmbeddingSpace, cfg: &DetectorConfig) -> Result<RankedList> {
    let shared = shared_eligible_words(a, b, cfg)?;
    let words: Vec<&str> = shared.iter().map(String::as_str).collect();
    let sizes = intersection_sizes(a, b, &words, cfg.k)?;
    let scored = words
        .iter()
        .zip(sizes)
        .map(|(w, n)| {
            let f = a.vocab().freq_of(w).min(b.vocab().freq_of(w));
            (w.to_string(), -(n as f64), f)
        })
        .collect();
    let mut list = RankedList::from_scores(Method::Nn, scored)?;
    list.provenance.config = cfg.to_map();
    Ok(list)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(rows: &[(&str, u64, Vec<f64>)]) -> EmbeddingSpace {
        let dim = rows[0].2.len();
        EmbeddingSpace::from_rows(rows.iter().map(|(w, f, v)| (w.to_string(), *f, v.clone())), dim, 0).unwrap()
    }

    fn open_cfg(k: usize) -> DetectorConfig {
        DetectorConfig {
            k,
            min_count: 1,
            drop_quantile: 0.0,
            stopword_top_n: 0,
            extra_stopwords: vec![],
        }
    }

    fn on_circle(words: &[&str], freq: u64) -> Vec<(&'static str, u64, Vec<f64>)> {
        words
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let t = i as f64 * 0.3;
                (Box::leak(w.to_string().into_boxed_str()) as &str, freq, vec![t.cos(), t.sin()])
            })
            .collect()
    }

    #[test]
    fn shared_vocabulary() {
        let a = space(&on_circle(&["a", "b", "c"], 10));
        let b = space(&on_circle(&["b", "c", "d"], 10));
        let s = shared_eligible_words(&a, &b, &open_cfg(1)).unwrap();
        assert_eq!(s.into_iter().collect::<Vec<_>>(), ["b", "c"]);
        let s = shared_eligible_words(&a, &a, &open_cfg(1)).unwrap();
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn stopword_in_one_corpus_excludes_word() {
        // `b` is the most frequent word of corpus B only.
        let a = space(&[("a", 50, vec![1.0, 0.0]), ("b", 10, vec![0.0, 1.0]), ("c", 5, vec![1.0, 1.0])]);
        let b = space(&[("a", 5, vec![1.0, 0.0]), ("b", 90, vec![0.0, 1.0]), ("c", 6, vec![1.0, 1.0])]);
        let cfg = DetectorConfig {
            stopword_top_n: 1,
            ..open_cfg(1)
        };
        let s = shared_eligible_words(&a, &b, &cfg).unwrap();
        assert_eq!(s.into_iter().collect::<Vec<_>>(), ["c"]);
    }

    #[test]
    fn empty_intersection_is_an_error() {
        let a = space(&on_circle(&["a", "b"], 10));
        let b = space(&on_circle(&["c", "d"], 10));
        assert!(matches!(shared_eligible_words(&a, &b, &open_cfg(1)), Err(Error::Empty(_))));
    }

    #[test]
    fn identical_spaces_give_minus_k() {
        let words = ["a", "b", "c", "d", "e", "f"];
        let a = space(&on_circle(&words, 10));
        assert_eq!(nn_score(&a, &a, "c", 3).unwrap(), -3);
        let r = rank_usage_change(&a, &a, &open_cfg(3)).unwrap();
        assert!(r.entries.iter().all(|e| e.score == -3.0));
        // all tied with equal frequency: lexicographic
        assert_eq!(r.words().collect::<Vec<_>>(), words);
    }

    #[test]
    fn toy_spaces_with_partial_overlap() {
        // Query `q` at angle 0. In A its 4 nearest are n1..n4; in B, n1 and n2
        // stay close while n3, n4 are pushed away by m1, m2.
        let ang = |deg: f64| vec![deg.to_radians().cos(), deg.to_radians().sin()];
        let a = space(&[
            ("q", 10, ang(0.0)),
            ("n1", 10, ang(5.0)),
            ("n2", 10, ang(10.0)),
            ("n3", 10, ang(15.0)),
            ("n4", 10, ang(20.0)),
            ("m1", 10, ang(120.0)),
            ("m2", 10, ang(130.0)),
        ]);
        let b = space(&[
            ("q", 10, ang(0.0)),
            ("n1", 10, ang(5.0)),
            ("n2", 10, ang(10.0)),
            ("n3", 10, ang(150.0)),
            ("n4", 10, ang(160.0)),
            ("m1", 10, ang(-5.0)),
            ("m2", 10, ang(-10.0)),
        ]);
        // brute-force oracle: sort all other words by cosine
        let oracle = |s: &EmbeddingSpace| {
            let mut v: Vec<(String, f64)> = s
                .vocab()
                .words()
                .iter()
                .filter(|w| *w != "q")
                .map(|w| (w.clone(), s.cosine("q", w).unwrap()))
                .collect();
            v.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap());
            v.into_iter().take(4).map(|p| p.0).collect::<HashSet<_>>()
        };
        assert_eq!(oracle(&a).intersection(&oracle(&b)).count(), 2);
        assert_eq!(nn_score(&a, &b, "q", 4).unwrap(), -2);
    }

    #[test]
    fn disjoint_neighbors_score_zero() {
        let ang = |deg: f64| vec![deg.to_radians().cos(), deg.to_radians().sin()];
        let a = space(&[("q", 10, ang(0.0)), ("x", 10, ang(5.0)), ("y", 10, ang(170.0))]);
        let b = space(&[("q", 10, ang(0.0)), ("x", 10, ang(175.0)), ("y", 10, ang(5.0))]);
        assert_eq!(nn_score(&a, &b, "q", 1).unwrap(), 0);
    }

    #[test]
    fn ranking_tie_break_by_min_frequency() {
        let r = RankedList::from_scores(
            Method::Nn,
            vec![("b".into(), -1.0, 5), ("a".into(), -1.0, 5), ("c".into(), -1.0, 9), ("d".into(), 0.0, 1)],
        )
        .unwrap();
        assert_eq!(r.words().collect::<Vec<_>>(), ["d", "c", "a", "b"]);
        assert_eq!(r.entries.iter().map(|e| e.rank).collect::<Vec<_>>(), [1, 2, 3, 4]);
    }

    #[test]
    fn ranked_list_validation() {
        assert!(RankedList::from_scores(Method::Nn, vec![("a".into(), f64::NAN, 0)]).is_err());
        assert!(RankedList::from_scores(Method::Nn, vec![("a".into(), 1.0, 0), ("a".into(), 2.0, 0)]).is_err());
    }

    #[test]
    fn tsv_round_trip_and_errors() {
        let r = RankedList::from_scores(
            Method::AlignCos,
            vec![("x".into(), 0.25, 0), ("y".into(), 0.125, 0), ("z".into(), -0.0, 0)],
        )
        .unwrap();
        let mut buf = Vec::new();
        r.write_tsv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "1\tx\t0.25\n2\ty\t0.125\n3\tz\t0\n");
        assert_eq!(RankedList::read_tsv(&buf[..], Method::AlignCos).unwrap(), r);
        assert!(RankedList::read_tsv(&b"2\tx\t1\n"[..], Method::Nn).is_err());
        assert!(RankedList::read_tsv(&b"1\tx\t1\n2\ty\t3\n"[..], Method::Nn).is_err());
        assert!(RankedList::read_tsv(&b"1\tx\t1\n2\tx\t0\n"[..], Method::Nn).is_err());
    }

    #[test]
    fn method_names() {
        for m in [Method::Nn, Method::AlignCos] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
    }
}
