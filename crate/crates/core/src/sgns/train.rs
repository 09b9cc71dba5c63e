use std::cell::Cell;
use std::collections::HashMap;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::{mpsc, Mutex};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EmbeddingMatrix, TrainerConfig};
use crate::corpus::{FrequencyTable, SentenceSource, Vocabulary};
use crate::error::{Error, Result};

/// A single trainable parameter. Sequential training uses `Cell<f32>`, the
/// parallel mode shares `AtomicF32` between workers with unsynchronized
/// (relaxed) read-modify-write, i.e. racy updates.
trait Slot {
    fn get(&self) -> f32;
    fn set(&self, v: f32);
}

impl Slot for Cell<f32> {
    #[inline(always)]
    fn get(&self) -> f32 {
        Cell::get(self)
    }
    #[inline(always)]
    fn set(&self, v: f32) {
        Cell::set(self, v)
    }
}

#[derive(Default)]
#[repr(transparent)]
struct AtomicF32(AtomicU32);

impl Slot for AtomicF32 {
    #[inline(always)]
    fn get(&self) -> f32 {
        f32::from_bits(self.0.load(Ordering::Relaxed))
    }
    #[inline(always)]
    fn set(&self, v: f32) {
        self.0.store(v.to_bits(), Ordering::Relaxed)
    }
}

struct Params<'a, S> {
    input: &'a [S],
    output: &'a [S],
    dim: usize,
}

impl<S: Slot> Params<'_, S> {
    fn input_row(&self, i: u32) -> &[S] {
        let i = i as usize;
        &self.input[i * self.dim..(i + 1) * self.dim]
    }

    fn output_row(&self, i: u32) -> &[S] {
        let i = i as usize;
        &self.output[i * self.dim..(i + 1) * self.dim]
    }
}

#[inline]
fn sigmoid32(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One SGD step on the loss of (center, targets) where `targets[0]` is the
/// observed context (label 1) and the rest are negatives (label 0).
fn update_pair<S: Slot>(
    params: &Params<'_, S>,
    center: u32,
    targets: &[(u32, f32)],
    lr: f32,
    l1: &mut [f32],
    neu1e: &mut [f32],
) {
    let v = params.input_row(center);
    for (dst, s) in l1.iter_mut().zip(v) {
        *dst = s.get();
    }
    neu1e.fill(0.0);
    for &(target, label) in targets {
        let c = params.output_row(target);
        let f: f32 = l1.iter().zip(c).map(|(a, b)| a * b.get()).sum();
        let g = (label - sigmoid32(f)) * lr;
        for ((e, cv), x) in neu1e.iter_mut().zip(c).zip(l1.iter()) {
            let cur = cv.get();
            *e += g * cur;
            cv.set(cur + g * x);
        }
    }
    for (s, e) in v.iter().zip(neu1e.iter()) {
        s.set(s.get() + e);
    }
}

/// Vocabulary-derived tables shared by every worker.
struct Tables {
    keep_prob: Vec<f32>,
    negatives: WeightedIndex<f64>,
    window: usize,
    n_neg: usize,
}

struct Worker {
    rng: ChaCha8Rng,
    l1: Vec<f32>,
    neu1e: Vec<f32>,
    kept: Vec<u32>,
    targets: Vec<(u32, f32)>,
}

impl Worker {
    fn new(rng: ChaCha8Rng, dim: usize) -> Self {
        Worker {
            rng,
            l1: vec![0.0; dim],
            neu1e: vec![0.0; dim],
            kept: Vec::new(),
            targets: Vec::new(),
        }
    }

    fn train_sentence<S: Slot>(&mut self, params: &Params<'_, S>, tables: &Tables, sentence: &[u32], lr: f32) {
        self.kept.clear();
        for &w in sentence {
            let p = tables.keep_prob[w as usize];
            if p >= 1.0 || self.rng.random::<f32>() < p {
                self.kept.push(w);
            }
        }
        let n = self.kept.len();
        for pos in 0..n {
            let center = self.kept[pos];
            let reach = self.rng.random_range(1..=tables.window);
            let lo = pos.saturating_sub(reach);
            let hi = (pos + reach).min(n - 1);
            for c in lo..=hi {
                if c == pos {
                    continue;
                }
                let context = self.kept[c];
                self.targets.clear();
                self.targets.push((context, 1.0));
                for _ in 0..tables.n_neg {
                    let neg = tables.negatives.sample(&mut self.rng) as u32;
                    if neg != context {
                        self.targets.push((neg, 0.0));
                    }
                }
                update_pair(params, center, &self.targets, lr, &mut self.l1, &mut self.neu1e);
            }
        }
    }
}

fn learning_rate(cfg: &TrainerConfig, seen: u64, total: u64) -> f32 {
    let progress = seen as f64 / (total as f64 + 1.0);
    (cfg.initial_lr as f64 * (1.0 - progress).max(1e-4)) as f32
}

fn worker_rng(seed: u64, worker: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(worker + 1);
    rng
}

/// Trains SGNS embeddings over `source`.
///
/// The vocabulary is every word with at least `cfg.min_count` occurrences,
/// ordered by descending count. Input vectors start uniform in
/// `[−0.5/dim, 0.5/dim]`, output vectors at zero; the learning rate decays
/// linearly from `cfg.initial_lr` to `cfg.initial_lr · 1e-4`. Frequent words
/// are subsampled with the usual `(√(f/t) + 1)·t/f` keep probability, and
/// negatives come from the unigram distribution raised to the 3/4 power.
pub fn train_embeddings(source: &dyn SentenceSource, cfg: &TrainerConfig) -> Result<EmbeddingMatrix> {
    cfg.validate()?;

    let mut ft = FrequencyTable::new();
    source.for_each_sentence(&mut |s| {
        for w in s {
            ft.add(w, 1);
        }
    })?;
    let vocab = Vocabulary::from_table(&ft);
    let n_words = (0..vocab.len())
        .take_while(|&i| vocab.freq(i) >= cfg.min_count)
        .count();
    if n_words == 0 {
        return Err(Error::Empty(format!(
            "no word occurs at least {} times",
            cfg.min_count
        )));
    }
    let words: Vec<String> = vocab.words()[..n_words].to_vec();
    let counts: Vec<u64> = (0..n_words).map(|i| vocab.freq(i)).collect();
    let ids: HashMap<&str, u32> = words.iter().enumerate().map(|(i, w)| (w.as_str(), i as u32)).collect();
    let train_words: u64 = counts.iter().sum();
    let total_words = train_words * cfg.epochs as u64;

    let keep_prob = counts
        .iter()
        .map(|&c| {
            if cfg.subsample_threshold <= 0.0 {
                return 1.0;
            }
            let t = cfg.subsample_threshold * train_words as f64;
            let c = c as f64;
            (((c / t).sqrt() + 1.0) * t / c).min(1.0) as f32
        })
        .collect();
    let negatives = WeightedIndex::new(counts.iter().map(|&c| (c as f64).powf(0.75)))
        .map_err(|e| Error::Degenerate(format!("negative sampling table: {e}")))?;
    let tables = Tables {
        keep_prob,
        negatives,
        window: cfg.window,
        n_neg: cfg.negatives,
    };

    let dim = cfg.dim;
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half = 0.5 / dim as f32;
    let input: Vec<f32> = (0..n_words * dim).map(|_| init_rng.random_range(-half..half)).collect();
    let output = vec![0.0f32; n_words * dim];

    let encode = |s: &[&str], out: &mut Vec<u32>| {
        out.clear();
        out.extend(s.iter().filter_map(|w| ids.get(w).copied()));
    };

    let (input, output) = if cfg.deterministic || cfg.threads == 1 {
        let mut input = input;
        let mut output = output;
        {
            let params = Params {
                input: Cell::from_mut(input.as_mut_slice()).as_slice_of_cells(),
                output: Cell::from_mut(output.as_mut_slice()).as_slice_of_cells(),
                dim,
            };
            let mut worker = Worker::new(worker_rng(cfg.seed, 0), dim);
            let mut seen = 0u64;
            let mut sentence = Vec::new();
            for _ in 0..cfg.epochs {
                source.for_each_sentence(&mut |s| {
                    encode(s, &mut sentence);
                    let lr = learning_rate(cfg, seen, total_words);
                    worker.train_sentence(&params, &tables, &sentence, lr);
                    seen += sentence.len() as u64;
                })?;
            }
        }
        (input, output)
    } else {
        let threads = if cfg.threads == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            cfg.threads
        };
        let shared_in: Vec<AtomicF32> = input.into_iter().map(|v| AtomicF32(AtomicU32::new(v.to_bits()))).collect();
        let shared_out: Vec<AtomicF32> = output.into_iter().map(|v| AtomicF32(AtomicU32::new(v.to_bits()))).collect();
        let seen = AtomicU64::new(0);
        let (tx, rx) = mpsc::sync_channel::<Vec<Vec<u32>>>(threads * 2);
        let rx = Mutex::new(rx);
        let params = Params {
            input: &shared_in,
            output: &shared_out,
            dim,
        };

        std::thread::scope(|scope| -> Result<()> {
            for t in 0..threads {
                let (params, tables, rx, seen) = (&params, &tables, &rx, &seen);
                scope.spawn(move || {
                    let mut worker = Worker::new(worker_rng(cfg.seed, t as u64), dim);
                    loop {
                        let batch = match rx.lock().unwrap().recv() {
                            Ok(b) => b,
                            Err(_) => return,
                        };
                        for sentence in &batch {
                            let lr = learning_rate(cfg, seen.load(Ordering::Relaxed), total_words);
                            worker.train_sentence(params, tables, sentence, lr);
                            seen.fetch_add(sentence.len() as u64, Ordering::Relaxed);
                        }
                    }
                });
            }
            let mut batch: Vec<Vec<u32>> = Vec::new();
            let mut batch_tokens = 0usize;
            let mut result = Ok(());
            'epochs: for _ in 0..cfg.epochs {
                let mut send_failed = false;
                let r = source.for_each_sentence(&mut |s| {
                    if send_failed {
                        return;
                    }
                    let mut ids = Vec::new();
                    encode(s, &mut ids);
                    batch_tokens += ids.len();
                    batch.push(ids);
                    if batch_tokens >= 10_000 {
                        batch_tokens = 0;
                        send_failed = tx.send(std::mem::take(&mut batch)).is_err();
                    }
                });
                if let Err(e) = r {
                    result = Err(e);
                    break 'epochs;
                }
            }
            if !batch.is_empty() {
                let _ = tx.send(batch);
            }
            drop(tx);
            result
        })?;
        (
            shared_in.into_iter().map(|a| f32::from_bits(a.0.into_inner())).collect(),
            shared_out.into_iter().map(|a| f32::from_bits(a.0.into_inner())).collect(),
        )
    };

    if input.iter().chain(&output).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("trained embeddings (learning rate too large?)".into()));
    }
    Ok(EmbeddingMatrix::new(words, dim, input)?.with_training_state(output, counts))
}
