//! Synthetic corpus pairs with planted usage changes.
//!
//! Every sentence is drawn from one topic: its tokens are function words
//! (shared by all topics) or words of that topic. A planted word belongs to
//! topic `2i` in corpus A and to topic `2i + 1` in corpus B; every other word
//! keeps its topic in both corpora.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::corpus::SentenceSource;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    /// Approximate token count of each corpus.
    pub tokens: usize,
    pub topics: usize,
    pub words_per_topic: usize,
    pub function_words: usize,
    pub planted: usize,
    pub min_sentence_len: usize,
    pub max_sentence_len: usize,
    /// Probability that a token is a function word.
    pub function_share: f64,
    /// Probability that a token of a host-topic sentence is the planted word.
    pub planted_share: f64,
    pub topic_zipf: f64,
    pub function_zipf: f64,
    /// Topic words sit on a ring in seeded random order; each sentence picks a
    /// focus point and draws words with weight `exp(−ring distance / locality)`
    /// times their Zipf weight. 0 disables the ring (topics are flat).
    pub locality: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            tokens: 1_000_000,
            topics: 20,
            words_per_topic: 95,
            function_words: 100,
            planted: 5,
            min_sentence_len: 8,
            max_sentence_len: 16,
            function_share: 0.25,
            planted_share: 0.02,
            topic_zipf: 0.7,
            function_zipf: 0.0,
            locality: 10.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.topics < 2 * self.planted || self.topics == 0 {
            return bad(format!("{} planted words need at least {} topics", self.planted, 2 * self.planted));
        }
        if self.words_per_topic == 0 || self.function_words == 0 {
            return bad("topics and the function-word list must be nonempty".into());
        }
        if self.min_sentence_len == 0 || self.min_sentence_len > self.max_sentence_len {
            return bad("sentence length range is empty".into());
        }
        if !(self.locality >= 0.0 && self.locality.is_finite()) {
            return bad("locality must be finite and non-negative".into());
        }
        for (name, p) in [("function_share", self.function_share), ("planted_share", self.planted_share)] {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1)"));
            }
        }
        Ok(())
    }

    pub fn vocabulary_size(&self) -> usize {
        self.function_words + self.topics * self.words_per_topic + self.planted
    }
}

/// One generated corpus: sentences of word ids over a shared name table.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    names: Arc<Vec<String>>,
    sentences: Vec<Vec<u32>>,
}

impl SyntheticCorpus {
    pub fn sentences(&self) -> impl Iterator<Item = Vec<&str>> {
        self.sentences
            .iter()
            .map(|s| s.iter().map(|&id| self.names[id as usize].as_str()).collect())
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    /// One space-separated sentence per line.
    pub fn write_text(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        for s in self.sentences() {
            writeln!(out, "{}", s.join(" "))?;
        }
        out.flush()?;
        Ok(())
    }
}

impl SentenceSource for SyntheticCorpus {
    fn for_each_sentence(&self, f: &mut dyn FnMut(&[&str])) -> Result<()> {
        let mut buf: Vec<&str> = Vec::new();
        for s in &self.sentences {
            buf.clear();
            buf.extend(s.iter().map(|&id| self.names[id as usize].as_str()));
            f(&buf);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPair {
    pub a: SyntheticCorpus,
    pub b: SyntheticCorpus,
    /// The planted words, in planting order.
    pub planted: Vec<String>,
    /// Topic index of every non-function word in corpus A.
    pub topic_of: Vec<(String, usize)>,
}

fn zipf_weights(n: usize, s: f64) -> Vec<f64> {
    (1..=n).map(|r| (r as f64).powf(-s)).collect()
}

// Word ids: function words first, then topic words topic by topic, then the
// planted words. Names are a seeded shuffle of `w0000..`, so neither name
// order nor lexicographic tie-breaking reveals the structure.
struct Layout<'a> {
    cfg: &'a SynthConfig,
}

impl Layout<'_> {
    fn topic_word(&self, t: usize, r: usize) -> u32 {
        (self.cfg.function_words + t * self.cfg.words_per_topic + r) as u32
    }

    fn planted(&self, i: usize) -> u32 {
        (self.cfg.function_words + self.cfg.topics * self.cfg.words_per_topic + i) as u32
    }
}

/// One sampling table per focus point on the ring (a single table when
/// `locality` is 0). `ring[t][r]` is the ring position of rank `r` in topic `t`.
fn topic_tables(cfg: &SynthConfig, ring: &[usize]) -> Vec<WeightedIndex<f64>> {
    let zipf = zipf_weights(cfg.words_per_topic, cfg.topic_zipf);
    if cfg.locality == 0.0 {
        return vec![WeightedIndex::new(zipf).expect("positive weights")];
    }
    let n = cfg.words_per_topic;
    (0..n)
        .map(|focus| {
            let w = zipf.iter().zip(ring).map(|(z, &pos)| {
                let d = pos.abs_diff(focus);
                z * (-(d.min(n - d) as f64) / cfg.locality).exp()
            });
            WeightedIndex::new(w).expect("positive weights")
        })
        .collect()
}

fn generate_corpus(
    cfg: &SynthConfig,
    layout: &Layout,
    rings: &[Vec<usize>],
    host_shift: usize,
    rng: &mut ChaCha8Rng,
    names: &Arc<Vec<String>>,
) -> SyntheticCorpus {
    let function = WeightedIndex::new(zipf_weights(cfg.function_words, cfg.function_zipf)).expect("positive weights");
    let tables: Vec<Vec<WeightedIndex<f64>>> = rings.iter().map(|r| topic_tables(cfg, r)).collect();
    // planted word hosted by each topic, if any
    let mut hosted: Vec<Option<u32>> = vec![None; cfg.topics];
    for i in 0..cfg.planted {
        hosted[2 * i + host_shift] = Some(layout.planted(i));
    }
    let mut sentences = Vec::new();
    let mut total = 0;
    while total < cfg.tokens {
        let t = rng.random_range(0..cfg.topics);
        let table = &tables[t][rng.random_range(0..tables[t].len())];
        let len = rng.random_range(cfg.min_sentence_len..=cfg.max_sentence_len);
        let sentence: Vec<u32> = (0..len)
            .map(|_| {
                if rng.random_bool(cfg.function_share) {
                    function.sample(rng) as u32
                } else if hosted[t].is_some() && rng.random_bool(cfg.planted_share) {
                    hosted[t].unwrap()
                } else {
                    layout.topic_word(t, table.sample(rng))
                }
            })
            .collect();
        total += sentence.len();
        sentences.push(sentence);
    }
    SyntheticCorpus {
        names: Arc::clone(names),
        sentences,
    }
}

/// Generates a corpus pair. Deterministic given `cfg`.
pub fn generate(cfg: &SynthConfig) -> Result<SyntheticPair> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let v = cfg.vocabulary_size();
    let width = v.to_string().len().max(4);
    let mut names: Vec<String> = (0..v).map(|i| format!("w{i:0width$}")).collect();
    names.shuffle(&mut rng);
    let names = Arc::new(names);
    let layout = Layout { cfg };
    let rings: Vec<Vec<usize>> = (0..cfg.topics)
        .map(|_| {
            let mut r: Vec<usize> = (0..cfg.words_per_topic).collect();
            r.shuffle(&mut rng);
            r
        })
        .collect();

    let mut rng_a = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng_a.set_stream(1);
    let mut rng_b = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng_b.set_stream(2);
    let a = generate_corpus(cfg, &layout, &rings, 0, &mut rng_a, &names);
    let b = generate_corpus(cfg, &layout, &rings, 1, &mut rng_b, &names);

    let planted = (0..cfg.planted).map(|i| names[layout.planted(i) as usize].clone()).collect();
    let mut topic_of = Vec::new();
    for t in 0..cfg.topics {
        for r in 0..cfg.words_per_topic {
            topic_of.push((names[layout.topic_word(t, r) as usize].clone(), t));
        }
    }
    for i in 0..cfg.planted {
        topic_of.push((names[layout.planted(i) as usize].clone(), 2 * i));
    }
    Ok(SyntheticPair { a, b, planted, topic_of })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::count_frequencies;

    fn small() -> SynthConfig {
        SynthConfig {
            tokens: 50_000,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let p1 = generate(&small()).unwrap();
        let p2 = generate(&small()).unwrap();
        assert_eq!(p1.a.sentences, p2.a.sentences);
        assert_eq!(p1.planted, p2.planted);
        let p3 = generate(&SynthConfig { seed: 2, ..small() }).unwrap();
        assert_ne!(p1.a.sentences, p3.a.sentences);
    }

    #[test]
    fn sizes_and_planted_words() {
        let cfg = small();
        let p = generate(&cfg).unwrap();
        assert_eq!(cfg.vocabulary_size(), 2005);
        assert!(p.a.num_tokens() >= 50_000 && p.a.num_tokens() < 50_100);
        assert_eq!(p.planted.len(), 5);
        let fa = count_frequencies(p.a.sentences().flatten());
        let fb = count_frequencies(p.b.sentences().flatten());
        for w in &p.planted {
            assert!(fa.get(w) > 0 && fb.get(w) > 0, "{w}");
        }
    }

    #[test]
    fn planted_word_changes_topic() {
        let p = generate(&small()).unwrap();
        let topic: std::collections::HashMap<&str, usize> = p.topic_of.iter().map(|(w, t)| (w.as_str(), *t)).collect();
        // majority topic of the topic words co-occurring with the planted word
        let host = |c: &SyntheticCorpus, w: &str| {
            let mut votes = vec![0usize; 20];
            for s in c.sentences().filter(|s| s.contains(&w)) {
                for x in s.iter().filter(|x| **x != w) {
                    if let Some(t) = topic.get(x) {
                        votes[*t] += 1;
                    }
                }
            }
            (0..20).max_by_key(|t| votes[*t]).unwrap()
        };
        for (i, w) in p.planted.iter().enumerate() {
            assert_eq!(host(&p.a, w), 2 * i);
            assert_eq!(host(&p.b, w), 2 * i + 1);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(generate(&SynthConfig { topics: 8, ..small() }).is_err());
        assert!(generate(&SynthConfig { function_share: 1.0, ..small() }).is_err());
        assert!(generate(&SynthConfig { min_sentence_len: 0, ..small() }).is_err());
    }
}
