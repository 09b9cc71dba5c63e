use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use usage_shift::sgns::{sgns_loss_and_grad, train_embeddings, EmbeddingMatrix, TrainerConfig};

fn small_cfg() -> TrainerConfig {
    TrainerConfig {
        dim: 20,
        min_count: 1,
        epochs: 5,
        subsample_threshold: 0.0,
        deterministic: true,
        threads: 1,
        ..TrainerConfig::default()
    }
}

fn cos(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| (*x as f64) * (*y as f64)).sum();
    let n = |v: &[f32]| v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
    dot / (n(a) * n(b))
}

/// Sentences drawn from `topics` disjoint word groups of `size` words.
fn topic_corpus(topics: usize, size: usize, sentences: usize, seed: u64) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sentences)
        .map(|_| {
            let t = rng.random_range(0..topics);
            (0..10).map(|_| format!("t{t}_{}", rng.random_range(0..size))).collect()
        })
        .collect()
}

fn mean_loss(e: &EmbeddingMatrix, corpus: &[Vec<String>]) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let to64 = |v: &[f32]| v.iter().map(|x| *x as f64).collect::<Vec<_>>();
    let mut total = 0.0;
    let n = 2000;
    for _ in 0..n {
        let s = &corpus[rng.random_range(0..corpus.len())];
        let i = rng.random_range(0..s.len() - 1);
        let c = e.index_of(&s[i]).unwrap();
        let p = e.index_of(&s[i + 1]).unwrap();
        let negs: Vec<Vec<f64>> = (0..5)
            .map(|_| to64(e.context_vector(rng.random_range(0..e.len())).unwrap()))
            .collect();
        let neg_refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
        total += sgns_loss_and_grad(&to64(e.vector(c)), &to64(e.context_vector(p).unwrap()), &neg_refs)
            .unwrap()
            .loss;
    }
    total / n as f64
}

/// Appends `x` to half the sentences of topic `tx` and `y` to the other half
/// of topic `ty`'s sentences.
fn with_probes(corpus: &[Vec<String>], tx: usize, ty: usize) -> Vec<Vec<String>> {
    corpus
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut s = s.clone();
            let topic = s[0].strip_prefix('t').and_then(|r| r.split('_').next()).unwrap().parse::<usize>().unwrap();
            if topic == tx && i % 2 == 0 {
                s.push("x".into());
            } else if topic == ty && i % 2 == 1 {
                s.push("y".into());
            }
            s
        })
        .collect()
}

#[test]
fn shared_contexts_raise_cosine() {
    let corpus = topic_corpus(4, 30, 3000, 1);
    let sim = |c: &Vec<Vec<String>>| {
        let e = train_embeddings(c, &small_cfg()).unwrap();
        cos(e.vector_of("x").unwrap(), e.vector_of("y").unwrap())
    };
    let apart = sim(&with_probes(&corpus, 0, 1));
    let together = sim(&with_probes(&corpus, 0, 0));
    assert!(together > apart + 0.3, "cosine {apart} -> {together}");
}

#[test]
fn topics_cluster() {
    let corpus = topic_corpus(3, 20, 3000, 2);
    let e = train_embeddings(&corpus, &small_cfg()).unwrap();
    let (mut within, mut across, mut nw, mut na) = (0.0, 0.0, 0, 0);
    for a in e.words() {
        for b in e.words() {
            if a >= b {
                continue;
            }
            let c = cos(e.vector_of(a).unwrap(), e.vector_of(b).unwrap());
            if a.split('_').next() == b.split('_').next() {
                within += c;
                nw += 1;
            } else {
                across += c;
                na += 1;
            }
        }
    }
    let (within, across) = (within / nw as f64, across / na as f64);
    assert!(within > across + 0.3, "within {within}, across {across}");
}

#[test]
fn more_training_lowers_loss() {
    let corpus = topic_corpus(4, 25, 2000, 3);
    let short = train_embeddings(&corpus, &TrainerConfig { epochs: 1, initial_lr: 0.002, ..small_cfg() }).unwrap();
    let long = train_embeddings(&corpus, &small_cfg()).unwrap();
    let (l1, l5) = (mean_loss(&short, &corpus), mean_loss(&long, &corpus));
    assert!(l5 < l1, "loss {l1} -> {l5}");
}

#[test]
fn norms_stay_bounded_and_finite() {
    let corpus = topic_corpus(2, 10, 3000, 4);
    let e = train_embeddings(&corpus, &TrainerConfig { initial_lr: 0.1, epochs: 10, ..small_cfg() }).unwrap();
    assert!(e.vectors().iter().all(|v| v.is_finite()));
    assert!(e.max_row_norm() <= 1e3);
}

#[test]
fn deterministic_mode_is_reproducible() {
    let corpus = topic_corpus(3, 15, 500, 5);
    let a = train_embeddings(&corpus, &small_cfg()).unwrap();
    let b = train_embeddings(&corpus, &small_cfg()).unwrap();
    assert_eq!(a.words(), b.words());
    assert_eq!(a.vectors(), b.vectors());
    let c = train_embeddings(&corpus, &TrainerConfig { seed: 7, ..small_cfg() }).unwrap();
    assert_ne!(a.vectors(), c.vectors());
}
