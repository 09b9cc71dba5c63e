//! Ranking stability (intersection@k) and agreement with gold rankings
//! (Spearman, DCG).

use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::open_text;
use crate::detect::{Provenance, RankedList};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldRanking {
    pub entries: Vec<(String, f64)>,
    pub source_tag: String,
}

impl GoldRanking {
    pub fn new(entries: Vec<(String, f64)>, source_tag: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (w, s) in &entries {
            if !seen.insert(w.as_str()) {
                return Err(Error::DuplicateWord(w.clone()));
            }
            if !s.is_finite() {
                return Err(Error::NonFinite(format!("gold score of `{w}`")));
            }
        }
        Ok(GoldRanking {
            entries,
            source_tag: source_tag.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Parses `word<TAB>score` lines; blank lines are skipped.
pub fn parse_gold<R: BufRead>(input: R, source_tag: &str) -> Result<GoldRanking> {
    let mut entries = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (word, score) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(i + 1, "expected `word<TAB>score`"))?;
        let word = word.trim();
        if word.is_empty() {
            return Err(Error::format(i + 1, "empty word"));
        }
        let score: f64 = score
            .trim()
            .parse()
            .map_err(|_| Error::format(i + 1, format!("score `{}` is not a number", score.trim())))?;
        entries.push((word.to_string(), score));
    }
    if entries.is_empty() {
        return Err(Error::Empty(format!("gold ranking `{source_tag}` has no entries")));
    }
    GoldRanking::new(entries, source_tag)
}

pub fn load_gold(path: &Path) -> Result<GoldRanking> {
    parse_gold(open_text(path)?, &path.display().to_string())
}

/// `|top-k(r1) ∩ top-k(r2)| / k`.
pub fn intersection_at_k(r1: &RankedList, r2: &RankedList, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    for r in [r1, r2] {
        if r.len() < k {
            return Err(Error::TooShort {
                needed: k,
                found: r.len(),
            });
        }
    }
    let top: HashSet<&str> = r1.top_k(k).collect();
    let shared = r2.top_k(k).filter(|w| top.contains(w)).count();
    Ok(shared as f64 / k as f64)
}

/// Average ranks (1-based, ascending values); tied values share the mean of
/// the positions they occupy.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("no NaN"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn warn_missing(model: &RankedList, gold: &GoldRanking) {
    let missing: Vec<&str> = gold
        .entries
        .iter()
        .map(|(w, _)| w.as_str())
        .filter(|w| model.get(w).is_none())
        .collect();
    if !missing.is_empty() {
        warn!(
            "{} gold word(s) absent from the model ranking, placed last: {}",
            missing.len(),
            missing.join(", ")
        );
    }
}

/// Spearman's ρ between the model's scores for the gold words (higher means
/// more changed) and the gold scores, with fractional ranks for ties. Gold
/// words missing from the model share the lowest model rank.
pub fn spearman(model: &RankedList, gold: &GoldRanking) -> Result<f64> {
    if gold.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            found: gold.len(),
        });
    }
    warn_missing(model, gold);
    let scores: HashMap<&str, f64> = model.entries.iter().map(|e| (e.word.as_str(), e.score)).collect();
    let model_vals: Vec<f64> = gold
        .entries
        .iter()
        .map(|(w, _)| scores.get(w.as_str()).copied().unwrap_or(f64::NEG_INFINITY))
        .collect();
    let gold_vals: Vec<f64> = gold.entries.iter().map(|(_, s)| *s).collect();
    pearson(&fractional_ranks(&model_vals), &fractional_ranks(&gold_vals))
        .ok_or_else(|| Error::Degenerate("one of the rankings is constant".into()))
}

/// `Σ gold(w) / log2(rank(w) + 1)` over gold words, with 1-based model ranks;
/// missing words get rank `len + 1`.
pub fn dcg(model: &RankedList, gold: &GoldRanking) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::Empty("gold ranking".into()));
    }
    warn_missing(model, gold);
    let ranks: HashMap<&str, usize> = model.entries.iter().map(|e| (e.word.as_str(), e.rank)).collect();
    Ok(gold
        .entries
        .iter()
        .map(|(w, s)| {
            let r = ranks.get(w.as_str()).copied().unwrap_or(model.len() + 1);
            s / ((r + 1) as f64).log2()
        })
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<usize>,
    pub provenance: Provenance,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::Method;
    use proptest::prelude::*;

    fn list(words: &[&str]) -> RankedList {
        RankedList::from_words(Method::Nn, words).unwrap()
    }

    fn gold(entries: &[(&str, f64)]) -> GoldRanking {
        GoldRanking::new(entries.iter().map(|(w, s)| (w.to_string(), *s)).collect(), "t").unwrap()
    }

    #[test]
    fn intersection_examples() {
        let a = list(&["a", "b", "c", "d", "e", "x"]);
        let b = list(&["a", "c", "e", "f", "g", "y"]);
        assert_eq!(intersection_at_k(&a, &a, 4).unwrap(), 1.0);
        assert_eq!(intersection_at_k(&a, &b, 5).unwrap(), 0.6);
        let c = list(&["p", "q"]);
        assert_eq!(intersection_at_k(&a, &c, 2).unwrap(), 0.0);
        assert!(matches!(intersection_at_k(&a, &c, 3), Err(Error::TooShort { .. })));
        assert!(intersection_at_k(&a, &b, 0).is_err());
    }

    #[test]
    fn spearman_examples() {
        let m = list(&["a", "b", "c"]);
        assert!((spearman(&m, &gold(&[("a", 3.0), ("b", 2.0), ("c", 1.0)])).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&m, &gold(&[("a", 1.0), ("b", 2.0), ("c", 3.0)])).unwrap() + 1.0).abs() < 1e-12);
        let rho = spearman(&m, &gold(&[("a", 3.0), ("b", 1.0), ("c", 2.0)])).unwrap();
        assert!((rho - brute_force_rho(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0])).abs() < 1e-12);
        assert!((rho - 0.5).abs() < 1e-12);
        assert!(spearman(&m, &gold(&[("a", 1.0)])).is_err());
    }

    // Without ties: 1 − 6 Σ d² / (n(n² − 1)), where model rank 1 is the
    // most-changed word and so maps to the highest rank value.
    fn brute_force_rho(model_ranks: &[f64], gold: &[f64]) -> f64 {
        let n = gold.len() as f64;
        let d2: f64 = model_ranks
            .iter()
            .zip(gold)
            .map(|(r, g)| {
                let mr = n + 1.0 - r;
                let gr = gold.iter().filter(|x| *x <= g).count() as f64;
                (mr - gr).powi(2)
            })
            .sum();
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    }

    #[test]
    fn spearman_with_ties_and_missing_words() {
        // Scores tie for a and b.
        let m = RankedList::from_scores(
            Method::Nn,
            vec![("a".into(), -1.0, 0), ("b".into(), -1.0, 0), ("c".into(), -5.0, 0)],
        )
        .unwrap();
        let g = gold(&[("a", 2.0), ("b", 2.0), ("c", 0.0)]);
        assert!((spearman(&m, &g).unwrap() - 1.0).abs() < 1e-12);
        let g = gold(&[("a", 2.0), ("c", 1.0), ("zz", 0.0)]);
        assert!((spearman(&m, &g).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fractional_ranks_average_ties() {
        assert_eq!(fractional_ranks(&[10.0, 20.0, 10.0, 5.0]), [2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn dcg_examples() {
        let m = list(&["v", "x", "u"]);
        assert_eq!(dcg(&m, &gold(&[("v", 3.0)])).unwrap(), 3.0);
        assert!((dcg(&m, &gold(&[("u", 2.0), ("v", 1.0)])).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(dcg(&m, &gold(&[("u", 0.0), ("v", 0.0)])).unwrap(), 0.0);
        // missing word ranks at len + 1 = 4
        assert!((dcg(&m, &gold(&[("q", 1.0)])).unwrap() - 1.0 / 5f64.log2()).abs() < 1e-12);
        assert!((dcg(&m, &gold(&[("v", -2.0)])).unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn gold_parsing() {
        let text: String = (0..19).map(|i| format!("word{i}\t{}\n", i as f64 * 0.25 - 1.0)).collect();
        let g = parse_gold(text.as_bytes(), "fixture").unwrap();
        assert_eq!(g.len(), 19);
        assert_eq!(g.entries[0], ("word0".to_string(), -1.0));
        assert!(matches!(parse_gold(&b""[..], "e"), Err(Error::Empty(_))));
        assert!(matches!(parse_gold(&b"\n\n"[..], "e"), Err(Error::Empty(_))));
        match parse_gold(&b"a\t1\nb\t2\na\t3\n"[..], "d") {
            Err(Error::DuplicateWord(w)) => assert_eq!(w, "a"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_gold(&b"a 1\n"[..], "m"), Err(Error::Format { line: 1, .. })));
        assert!(matches!(parse_gold(&b"a\t1\nb\tx\n"[..], "m"), Err(Error::Format { line: 2, .. })));
        assert!(parse_gold(&b"a\tNaN\n"[..], "m").is_err());
    }

    #[test]
    fn report_json_omits_missing_k() {
        let r = MetricReport {
            metric: "dcg".into(),
            value: 1.5,
            k: None,
            provenance: Provenance::default(),
        };
        let s = serde_json::to_string(&r).unwrap();
        assert!(!s.contains("\"k\""));
        assert_eq!(serde_json::from_str::<MetricReport>(&s).unwrap(), r);
    }

    fn shuffled(n: usize) -> impl Strategy<Value = Vec<String>> {
        Just((0..n).map(|i| format!("w{i}")).collect::<Vec<_>>()).prop_shuffle()
    }

    proptest! {
        #[test]
        fn intersection_is_symmetric(a in shuffled(30), b in shuffled(30), k in 1usize..=30) {
            let (ra, rb) = (RankedList::from_words(Method::Nn, &a).unwrap(), RankedList::from_words(Method::Nn, &b).unwrap());
            prop_assert_eq!(intersection_at_k(&ra, &rb, k).unwrap(), intersection_at_k(&rb, &ra, k).unwrap());
            prop_assert_eq!(intersection_at_k(&ra, &rb, 30).unwrap(), 1.0);
        }

        #[test]
        fn dcg_drops_when_a_positive_word_moves_down(
            order in shuffled(12),
            scores in prop::collection::vec(-3.0f64..3.0, 12),
            pick in 0usize..11,
            boost in 0.01f64..5.0,
        ) {
            // Swap the picked word with the next one: the picked word's rank
            // worsens by one, the other's improves. Give only the picked word
            // a positive gold score and the other zero.
            let gold_entries: Vec<(String, f64)> = order
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    let s = if i == pick { boost } else if i == pick + 1 { 0.0 } else { scores[i] };
                    (w.clone(), s)
                })
                .collect();
            let g = GoldRanking::new(gold_entries, "p").unwrap();
            let before = RankedList::from_words(Method::Nn, &order).unwrap();
            let mut swapped = order.clone();
            swapped.swap(pick, pick + 1);
            let after = RankedList::from_words(Method::Nn, &swapped).unwrap();
            prop_assert!(dcg(&after, &g).unwrap() < dcg(&before, &g).unwrap());
        }

        #[test]
        fn spearman_ignores_monotone_transforms(
            order in shuffled(10),
            scores in prop::collection::vec(-5.0f64..5.0, 10),
        ) {
            prop_assume!(scores.iter().any(|s| *s != scores[0]));
            let m = RankedList::from_words(Method::Nn, &order).unwrap();
            let g1 = GoldRanking::new(order.iter().cloned().zip(scores.iter().copied()).collect(), "a").unwrap();
            let g2 = GoldRanking::new(
                order.iter().cloned().zip(scores.iter().map(|s| (s * 0.7).exp() + 3.0)).collect(),
                "b",
            ).unwrap();
            let (r1, r2) = (spearman(&m, &g1).unwrap(), spearman(&m, &g2).unwrap());
            prop_assert!((r1 - r2).abs() < 1e-12);
        }
    }
}
