use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::corpus::FrequencyTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct WordFlags {
    pub is_stopword: bool,
    pub below_min_count: bool,
    pub below_quantile: bool,
}

impl WordFlags {
    pub fn is_eligible(&self) -> bool {
        !(self.is_stopword || self.below_min_count || self.below_quantile)
    }
}

/// Word/id map ordered by descending frequency, ties broken lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    ids: HashMap<String, usize>,
    freq: Vec<u64>,
    flags: Vec<WordFlags>,
}

impl Vocabulary {
    /// Unfiltered vocabulary over `(word, count)` pairs. Zero counts are allowed
    /// here (words known to a space but absent from its corpus table).
    pub fn from_counts<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut entries: Vec<(String, u64)> =
            pairs.into_iter().map(|(w, n)| (w.into(), n)).collect();
        entries.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut ids = HashMap::with_capacity(entries.len());
        for (i, (w, _)) in entries.iter().enumerate() {
            if ids.insert(w.clone(), i).is_some() {
                return Err(Error::DuplicateWord(w.clone()));
            }
        }
        let (words, freq): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        let flags = vec![WordFlags::default(); words.len()];
        Ok(Vocabulary {
            words,
            ids,
            freq,
            flags,
        })
    }

    pub fn from_table(ft: &FrequencyTable) -> Self {
        Self::from_counts(ft.iter().map(|(w, n)| (w.to_string(), n)))
            .expect("frequency table keys are unique")
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.ids.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.ids.contains_key(word)
    }

    pub fn freq(&self, id: usize) -> u64 {
        self.freq[id]
    }

    pub fn freq_of(&self, word: &str) -> u64 {
        self.id(word).map_or(0, |i| self.freq[i])
    }

    pub fn flags(&self, id: usize) -> WordFlags {
        self.flags[id]
    }

    pub fn is_eligible(&self, id: usize) -> bool {
        self.flags[id].is_eligible()
    }

    /// Ranking-eligible words in vocabulary order.
    pub fn eligible_words(&self) -> impl Iterator<Item = &str> + '_ {
        self.words
            .iter()
            .zip(&self.flags)
            .filter(|(_, f)| f.is_eligible())
            .map(|(w, _)| w.as_str())
    }
}

/// Stopword set: the `n` most frequent words of each corpus plus `extra`.
pub fn build_stopwords(
    ft_a: &FrequencyTable,
    ft_b: &FrequencyTable,
    n: usize,
    extra: &[String],
) -> BTreeSet<String> {
    ft_a.top_n(n)
        .into_iter()
        .chain(ft_b.top_n(n))
        .map(str::to_string)
        .chain(extra.iter().cloned())
        .collect()
}

/// Builds the vocabulary of `ft` with ranking-eligibility flags.
///
/// The quantile cut is over distinct words: the `floor(drop_quantile * |V|)`
/// least frequent words are dropped, except that words tied with the least
/// frequent kept word are kept as well.
pub fn build_vocabulary(
    ft: &FrequencyTable,
    stop: &BTreeSet<String>,
    min_count: u64,
    drop_quantile: f64,
) -> Result<Vocabulary> {
    if ft.is_empty() {
        return Err(Error::Empty("frequency table".into()));
    }
    if !(0.0..1.0).contains(&drop_quantile) {
        return Err(Error::InvalidConfig(format!(
            "drop_quantile must lie in [0, 1), got {drop_quantile}"
        )));
    }
    let mut vocab = Vocabulary::from_table(ft);

    let n = vocab.len();
    let n_drop = (drop_quantile * n as f64 + 1e-9).floor() as usize;
    // Vocabulary is sorted by descending count, so the least frequent kept word
    // sits at index n - n_drop - 1.
    let cutoff = if n_drop == 0 { 0 } else { vocab.freq[n - n_drop - 1] };

    for i in 0..n {
        let count = vocab.freq[i];
        vocab.flags[i] = WordFlags {
            is_stopword: stop.contains(&vocab.words[i]),
            below_min_count: count < min_count,
            below_quantile: count < cutoff,
        };
    }
    Ok(vocab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(pairs: &[(&str, u64)]) -> FrequencyTable {
        let mut ft = FrequencyTable::new();
        for &(w, n) in pairs {
            ft.add(w, n);
        }
        ft
    }

    fn eligible(v: &Vocabulary) -> Vec<&str> {
        v.eligible_words().collect()
    }

    #[test]
    fn no_filters_all_eligible() {
        let ft = table(&[("a", 5), ("b", 1), ("c", 3)]);
        let v = build_vocabulary(&ft, &BTreeSet::new(), 1, 0.0).unwrap();
        assert_eq!(eligible(&v), ["a", "c", "b"]);
    }

    #[test]
    fn quantile_and_min_count() {
        let ft = table(&[("a", 500), ("b", 300), ("c", 100), ("d", 50), ("e", 10)]);
        let v = build_vocabulary(&ft, &BTreeSet::new(), 200, 0.2).unwrap();
        assert_eq!(eligible(&v), ["a", "b"]);
        let e = v.flags(v.id("e").unwrap());
        assert!(e.below_quantile && e.below_min_count);
        let d = v.flags(v.id("d").unwrap());
        assert!(!d.below_quantile && d.below_min_count);
    }

    #[test]
    fn quantile_boundary_ties_kept() {
        // 5 words, drop 1; `d` and `e` tie at the boundary so both are kept.
        let ft = table(&[("a", 9), ("b", 8), ("c", 7), ("d", 3), ("e", 3)]);
        let v = build_vocabulary(&ft, &BTreeSet::new(), 1, 0.2).unwrap();
        assert_eq!(eligible(&v).len(), 5);
    }

    #[test]
    fn all_stopwords() {
        let ft = table(&[("a", 9), ("b", 8)]);
        let stop: BTreeSet<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let v = build_vocabulary(&ft, &stop, 1, 0.0).unwrap();
        assert_eq!(v.len(), 2);
        assert!(eligible(&v).is_empty());
    }

    #[test]
    fn errors() {
        assert!(matches!(
            build_vocabulary(&FrequencyTable::new(), &BTreeSet::new(), 1, 0.0),
            Err(Error::Empty(_))
        ));
        let ft = table(&[("a", 1)]);
        assert!(build_vocabulary(&ft, &BTreeSet::new(), 1, 1.0).is_err());
        assert!(build_vocabulary(&ft, &BTreeSet::new(), 1, -0.1).is_err());
    }

    #[test]
    fn ordering_by_count_then_word() {
        let ft = table(&[("b", 2), ("a", 2), ("c", 5)]);
        let v = Vocabulary::from_table(&ft);
        assert_eq!(v.words(), ["c", "a", "b"]);
        assert_eq!(v.id("a"), Some(1));
    }

    #[test]
    fn stopwords_zero_and_passthrough() {
        let ft = table(&[("the", 10), ("a", 5)]);
        assert!(build_stopwords(&ft, &ft, 0, &[]).is_empty());
        let s = build_stopwords(&ft, &ft, 0, &["lol".to_string()]);
        assert_eq!(s.into_iter().collect::<Vec<_>>(), ["lol"]);
    }

    #[test]
    fn stopwords_union_of_tops() {
        let a = table(&[("the", 100), ("a", 50), ("cat", 10)]);
        let b = table(&[("the", 90), ("of", 60), ("dog", 5)]);
        let s = build_stopwords(&a, &b, 2, &[]);
        assert_eq!(s.into_iter().collect::<Vec<_>>(), ["a", "of", "the"]);
    }

    #[test]
    fn stopword_ties_lexicographic() {
        let a = table(&[("z", 5), ("y", 5), ("x", 5)]);
        let s = build_stopwords(&a, &FrequencyTable::new(), 2, &[]);
        assert_eq!(s.into_iter().collect::<Vec<_>>(), ["x", "y"]);
    }

    fn arb_table() -> impl Strategy<Value = FrequencyTable> {
        proptest::collection::btree_map("[a-f]{1,3}", 1u64..50, 1..40).prop_map(|m| {
            let mut ft = FrequencyTable::new();
            for (w, n) in m {
                ft.add(&w, n);
            }
            ft
        })
    }

    proptest! {
        #[test]
        fn unfiltered_marks_everything_eligible(ft in arb_table()) {
            let v = build_vocabulary(&ft, &BTreeSet::new(), 1, 0.0).unwrap();
            prop_assert_eq!(v.eligible_words().count(), ft.len());
        }

        #[test]
        fn stopword_size_bound(a in arb_table(), b in arb_table(), n in 0usize..20) {
            let extra = vec!["zz".to_string(), "yy".to_string()];
            prop_assert!(build_stopwords(&a, &b, n, &extra).len() <= 2 * n + extra.len());
        }

        #[test]
        fn rebuild_is_deterministic(ft in arb_table(), q in 0.0f64..0.9) {
            let v1 = build_vocabulary(&ft, &BTreeSet::new(), 3, q).unwrap();
            let rebuilt: FrequencyTable = {
                let mut t = FrequencyTable::new();
                let mut pairs: Vec<_> = ft.iter().collect();
                pairs.reverse();
                for (w, n) in pairs { t.add(w, n); }
                t
            };
            let v2 = build_vocabulary(&rebuilt, &BTreeSet::new(), 3, q).unwrap();
            prop_assert_eq!(v1, v2);
        }

        #[test]
        fn ids_are_a_bijection(ft in arb_table()) {
            let v = Vocabulary::from_table(&ft);
            for (i, w) in v.words().iter().enumerate() {
                prop_assert_eq!(v.id(w), Some(i));
            }
        }
    }
}
