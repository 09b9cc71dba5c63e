//! Trains both corpora of a synthetic pair and prints where the planted words
//! land in the NN and AlignCos rankings.
//!
//! cargo run --release -p usage-shift --example planted -- [seed] [k]

use std::time::Instant;

use usage_shift::align::aligncos_rank;
use usage_shift::corpus::count_frequencies;
use usage_shift::detect::{rank_usage_change, DetectorConfig};
use usage_shift::sgns::{train_embeddings, TrainerConfig};
use usage_shift::space::{EmbeddingSpace, DEFAULT_NEIGHBOR_MIN_FREQ};
use usage_shift::synth::{generate, SyntheticCorpus, SynthConfig};

fn space(c: &SyntheticCorpus, seed: u64) -> EmbeddingSpace {
    let cfg = TrainerConfig {
        dim: 100,
        seed,
        ..TrainerConfig::default()
    };
    let t = Instant::now();
    let e = train_embeddings(c, &cfg).unwrap();
    eprintln!("trained {} tokens in {:.1?}", c.num_tokens(), t.elapsed());
    let ft = count_frequencies(c.sentences().flatten());
    EmbeddingSpace::build(&e, &ft, DEFAULT_NEIGHBOR_MIN_FREQ).unwrap()
}

fn main() {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    let seed = args.first().copied().unwrap_or(1);
    let k = args.get(1).copied().unwrap_or(50) as usize;
    let pair = generate(&SynthConfig { seed, ..SynthConfig::default() }).unwrap();
    let (a, b) = (space(&pair.a, seed), space(&pair.b, seed));
    let cfg = DetectorConfig { k, ..DetectorConfig::default() };
    let nn = rank_usage_change(&a, &b, &cfg).unwrap();
    let ac = aligncos_rank(&a, &b, &cfg).unwrap();
    println!("{} ranked words", nn.len());
    for w in &pair.planted {
        let r = |l: &usage_shift::detect::RankedList| l.get(w).map(|e| e.rank);
        println!("{w}: nn rank {:?}, aligncos rank {:?}", r(&nn), r(&ac));
    }
    println!("nn top 10: {:?}", nn.entries.iter().take(10).map(|e| (&e.word, e.score)).collect::<Vec<_>>());
}
