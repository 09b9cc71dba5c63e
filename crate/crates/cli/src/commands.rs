use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde_json::{json, Value};

use usage_shift::align::{aligncos, AlignOptions};
use usage_shift::corpus::{
    normalize_and_tokenize, open_text, FrequencyTable, LineDedup, NormalizerConfig, StripPattern, TokenizedFile,
};
use usage_shift::detect::{rank_usage_change, DetectorConfig, Method, RankedList};
use usage_shift::metrics::{dcg, intersection_at_k, load_gold, spearman, MetricReport};
use usage_shift::report::{emit_svg, neighbor_origins, neighbor_report, project_neighbors_2d, TsneConfig};
use usage_shift::sgns::{load_embeddings, save_embeddings, train_embeddings, EmbeddingMatrix, TrainerConfig};
use usage_shift::space::EmbeddingSpace;
use usage_shift::synth::{generate, SynthConfig};

use crate::config::Settings;
use crate::error::{CliError, StageExt};
use crate::provenance::{Outputs, RunRecord};
use crate::{Command, SpaceArgs};

pub fn dispatch(command: Command, s: &Settings) -> Result<(), CliError> {
    match command {
        Command::Tokenize { inputs, output, freq } => tokenize(s, &inputs, &output, freq),
        Command::Train { corpus, output, .. } => train(s, &corpus, &output),
        Command::Detect { spaces, output, .. } => detect(s, &spaces, &output),
        Command::Aligncos {
            spaces,
            output,
            map_out,
        } => align(s, &spaces, &output, map_out.as_deref()),
        Command::Stability {
            corpus_a,
            corpus_b,
            output_dir,
            ..
        } => stability(s, &corpus_a, &corpus_b, &output_dir),
        Command::Eval {
            ranking,
            gold,
            compare,
            at,
            output,
        } => eval(s, &ranking, gold.as_deref(), compare.as_deref(), &at, &output),
        Command::Report {
            spaces, words, output, ..
        } => report(s, &spaces, &words, &output),
        Command::Viz {
            spaces,
            word,
            output_dir,
            ..
        } => viz(s, &spaces, &word, &output_dir),
        Command::Synth { output_dir, .. } => synth(s, &output_dir),
    }
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path, stage: &'static str) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).stage(stage)?;
    }
    File::create(path).map(BufWriter::new).stage(stage)
}

fn write_json(path: &Path, v: &Value, stage: &'static str) -> Result<(), CliError> {
    let mut out = create(path, stage)?;
    serde_json::to_writer_pretty(&mut out, v).map_err(std::io::Error::from).stage(stage)?;
    out.write_all(b"\n").stage(stage)?;
    out.flush().stage(stage)
}

pub fn normalizer(s: &Settings) -> Result<NormalizerConfig, CliError> {
    let strip = s
        .get_list::<String>("tokenize.strip")?
        .iter()
        .map(|p| StripPattern::parse(p).ok_or_else(|| CliError::Usage(format!("unknown strip pattern `{p}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = NormalizerConfig {
        lowercase: s.get("tokenize.lowercase")?,
        strip_patterns: strip,
        number_token: s.raw("tokenize.number_token").to_string(),
        allowed_scripts: s.get_list::<String>("tokenize.scripts")?.into_iter().collect(),
        allowed_punct: s.raw("tokenize.punct").chars().collect(),
        keep_emoji: s.get("tokenize.emoji")?,
    };
    cfg.validate().stage("tokenize")?;
    Ok(cfg)
}

pub fn trainer(s: &Settings) -> Result<TrainerConfig, CliError> {
    let cfg = TrainerConfig {
        dim: s.get("train.dim")?,
        window: s.get("train.window")?,
        min_count: s.get("train.min_count")?,
        negatives: s.get("train.negatives")?,
        epochs: s.get("train.epochs")?,
        initial_lr: s.get("train.lr")?,
        subsample_threshold: s.get("train.subsample")?,
        seed: s.get("train.seed")?,
        deterministic: s.get("train.deterministic")?,
        threads: s.get("train.threads")?,
    };
    cfg.validate().stage("train")?;
    Ok(cfg)
}

pub fn detector(s: &Settings) -> Result<DetectorConfig, CliError> {
    let path = s.raw("detect.stopwords");
    let extra_stopwords = if path.is_empty() {
        Vec::new()
    } else {
        let r = open_text(Path::new(path)).stage("stopwords")?;
        r.lines()
            .map(|l| l.map(|l| l.trim().to_string()))
            .filter(|l| !matches!(l, Ok(w) if w.is_empty()))
            .collect::<std::io::Result<Vec<_>>>()
            .stage("stopwords")?
    };
    let cfg = DetectorConfig {
        k: s.get("detect.k")?,
        min_count: s.get("detect.min_count")?,
        drop_quantile: s.get("detect.drop_quantile")?,
        stopword_top_n: s.get("detect.stopword_top_n")?,
        extra_stopwords,
    };
    cfg.validate().stage("detect")?;
    Ok(cfg)
}

fn tokenize(s: &Settings, inputs: &[PathBuf], output: &Path, freq: Option<PathBuf>) -> Result<(), CliError> {
    const BATCH: usize = 10_000;
    let cfg = normalizer(s)?;
    let dedup = s.get::<bool>("tokenize.dedup")?;
    let mut record = RunRecord::new("tokenize");
    for (i, p) in inputs.iter().enumerate() {
        record.input(&format!("input{i}"), p).stage("tokenize")?;
    }
    let mut outputs = Outputs::new();
    let freq_path = outputs.track(freq.unwrap_or_else(|| with_suffix(output, ".freq.tsv")));
    let mut out = create(&outputs.track(output), "tokenize")?;
    let mut seen = LineDedup::new();
    let mut ft = FrequencyTable::new();
    let (mut lines, mut dropped) = (0u64, 0u64);
    let mut flush = |batch: &mut Vec<String>, out: &mut BufWriter<File>| -> std::io::Result<()> {
        let toks: Vec<Vec<String>> = batch.par_iter().map(|l| normalize_and_tokenize(l, &cfg)).collect();
        for t in toks.iter().filter(|t| !t.is_empty()) {
            for w in t {
                ft.add(w, 1);
            }
            writeln!(out, "{}", t.join(" "))?;
        }
        batch.clear();
        Ok(())
    };
    let mut batch = Vec::with_capacity(BATCH);
    for p in inputs {
        for line in open_text(p).stage("tokenize")?.lines() {
            let line = line.stage("tokenize")?;
            lines += 1;
            if dedup && !seen.first_time(&line) {
                dropped += 1;
                continue;
            }
            batch.push(line);
            if batch.len() == BATCH {
                flush(&mut batch, &mut out).stage("tokenize")?;
            }
        }
    }
    flush(&mut batch, &mut out).stage("tokenize")?;
    out.flush().stage("tokenize")?;
    info!("{lines} lines read, {dropped} duplicates dropped, {} tokens", ft.total_tokens());
    ft.write_tsv(create(&freq_path, "tokenize")?).stage("tokenize")?;
    outputs.track(crate::provenance::sidecar_path(output));
    record.write_sidecar(s, output).stage("tokenize")?;
    outputs.commit();
    Ok(())
}

fn counts_table(e: &EmbeddingMatrix) -> FrequencyTable {
    let mut ft = FrequencyTable::new();
    if let Some(c) = e.counts() {
        for (w, n) in e.words().iter().zip(c) {
            ft.add(w, *n);
        }
    }
    ft
}

fn train(s: &Settings, corpus: &Path, output: &Path) -> Result<(), CliError> {
    let cfg = trainer(s)?;
    let mut record = RunRecord::new("train");
    record.input("corpus", corpus).stage("train")?;
    record.seeds.push(cfg.seed);
    let mut outputs = Outputs::new();
    let e = train_embeddings(&TokenizedFile::new(corpus), &cfg).stage("train")?;
    info!("trained {} vectors of dimension {}", e.len(), e.dim());
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).stage("train")?;
    }
    save_embeddings(&e, &outputs.track(output)).stage("train")?;
    let freq = outputs.track(with_suffix(output, ".freq.tsv"));
    counts_table(&e).write_tsv(create(&freq, "train")?).stage("train")?;
    outputs.track(crate::provenance::sidecar_path(output));
    record.write_sidecar(s, output).stage("train")?;
    outputs.commit();
    Ok(())
}

fn load_space(
    s: &Settings,
    emb: &Path,
    freq: Option<&Path>,
    role: &str,
    record: &mut RunRecord,
) -> Result<EmbeddingSpace, CliError> {
    let freq = freq.map(Path::to_path_buf).unwrap_or_else(|| with_suffix(emb, ".freq.tsv"));
    record.input(&format!("emb_{role}"), emb).stage("load")?;
    record.input(&format!("freq_{role}"), &freq).stage("load")?;
    let e = load_embeddings(emb).stage("load")?;
    let ft = FrequencyTable::read_tsv(open_text(&freq).stage("load")?).stage("load")?;
    EmbeddingSpace::build(&e, &ft, s.get("detect.neighbor_min_freq")?).stage("load")
}

fn load_pair(s: &Settings, a: &SpaceArgs, record: &mut RunRecord) -> Result<(EmbeddingSpace, EmbeddingSpace), CliError> {
    Ok((
        load_space(s, &a.emb_a, a.freq_a.as_deref(), "a", record)?,
        load_space(s, &a.emb_b, a.freq_b.as_deref(), "b", record)?,
    ))
}

fn write_ranking(
    s: &Settings,
    mut list: RankedList,
    record: &RunRecord,
    output: &Path,
    outputs: &mut Outputs,
) -> Result<(), CliError> {
    list.provenance.config = s.map().clone();
    list.provenance.inputs = record.input_hashes();
    let mut out = create(&outputs.track(output), "write")?;
    list.write_tsv(&mut out).stage("write")?;
    outputs.track(crate::provenance::sidecar_path(output));
    record.write_sidecar(s, output).stage("write")?;
    Ok(())
}

fn detect(s: &Settings, spaces: &SpaceArgs, output: &Path) -> Result<(), CliError> {
    let cfg = detector(s)?;
    let mut record = RunRecord::new("detect");
    let (a, b) = load_pair(s, spaces, &mut record)?;
    let list = rank_usage_change(&a, &b, &cfg).stage("detect")?;
    info!("ranked {} shared words", list.len());
    let mut outputs = Outputs::new();
    record.extra.insert("method".into(), json!(Method::Nn));
    write_ranking(s, list, &record, output, &mut outputs)?;
    outputs.commit();
    Ok(())
}

fn align_options(s: &Settings) -> Result<AlignOptions, CliError> {
    Ok(AlignOptions {
        unit_normalize: s.get("align.unit_normalize")?,
        mean_center: s.get("align.mean_center")?,
    })
}

fn align(s: &Settings, spaces: &SpaceArgs, output: &Path, map_out: Option<&Path>) -> Result<(), CliError> {
    let cfg = detector(s)?;
    let opts = align_options(s)?;
    let mut record = RunRecord::new("aligncos");
    let (a, b) = load_pair(s, spaces, &mut record)?;
    let (list, map) = aligncos(&a, &b, &cfg, opts).stage("aligncos")?;
    info!("alignment residual {:.6}", map.residual);
    let mut outputs = Outputs::new();
    record.extra.insert("method".into(), json!(Method::AlignCos));
    record.extra.insert("residual".into(), json!(map.residual));
    write_ranking(s, list, &record, output, &mut outputs)?;
    if let Some(p) = map_out {
        let mut out = create(&outputs.track(p), "aligncos")?;
        out.write_all(map.w.to_text().as_bytes()).stage("aligncos")?;
        out.flush().stage("aligncos")?;
    }
    outputs.commit();
    Ok(())
}

/// Mean intersection@k over all pairs of runs; `None` when some list is
/// shorter than `k`.
fn mean_intersection(lists: &[RankedList], k: usize) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0;
    for i in 0..lists.len() {
        for j in i + 1..lists.len() {
            sum += intersection_at_k(&lists[i], &lists[j], k).ok()?;
            n += 1;
        }
    }
    Some(sum / n as f64)
}

fn stability(s: &Settings, corpus_a: &Path, corpus_b: &Path, dir: &Path) -> Result<(), CliError> {
    let seeds: Vec<u64> = s.get_list("stability.seeds")?;
    if seeds.len() < 2 {
        return Err(CliError::Usage("stability needs at least two seeds".into()));
    }
    let base = trainer(s)?;
    let cfg = detector(s)?;
    let opts = align_options(s)?;
    let neighbor_min_freq: u64 = s.get("detect.neighbor_min_freq")?;
    let mut record = RunRecord::new("stability");
    record.input("corpus_a", corpus_a).stage("stability")?;
    record.input("corpus_b", corpus_b).stage("stability")?;
    record.seeds = seeds.clone();
    fs::create_dir_all(dir).stage("stability")?;
    let mut outputs = Outputs::new();

    let mut runs = Vec::new();
    for &seed in &seeds {
        let tc = TrainerConfig { seed, ..base.clone() };
        let mut pair = Vec::new();
        for (tag, corpus) in [("a", corpus_a), ("b", corpus_b)] {
            info!("training corpus {tag} with seed {seed}");
            let e = train_embeddings(&TokenizedFile::new(corpus), &tc).stage("train")?;
            let path = outputs.track(dir.join(format!("seed{seed}_{tag}.txt")));
            save_embeddings(&e, &path).stage("train")?;
            let ft = counts_table(&e);
            ft.write_tsv(create(&outputs.track(with_suffix(&path, ".freq.tsv")), "train")?)
                .stage("train")?;
            pair.push(EmbeddingSpace::build(&e, &ft, neighbor_min_freq).stage("train")?);
        }
        let b = pair.pop().expect("two spaces");
        let a = pair.pop().expect("two spaces");
        runs.push((a, b));
    }

    let rank_all = |c: &DetectorConfig, method: Method| -> Result<Vec<RankedList>, CliError> {
        runs.iter()
            .map(|(a, b)| match method {
                Method::Nn => rank_usage_change(a, b, c).stage("detect"),
                Method::AlignCos => aligncos(a, b, c, opts).map(|r| r.0).stage("aligncos"),
            })
            .collect()
    };
    let ks: Vec<usize> = s.get_list("stability.ks")?;
    let at: usize = s.get("stability.sweep_at")?;
    let mut curves = BTreeMap::new();
    let mut tsv = String::from("method\tk\tintersection\n");
    for method in [Method::Nn, Method::AlignCos] {
        let lists = rank_all(&cfg, method)?;
        for (i, l) in lists.iter().enumerate() {
            let p = outputs.track(dir.join(format!("seed{}_{method}.tsv", seeds[i])));
            l.write_tsv(create(&p, "stability")?).stage("stability")?;
        }
        let mut points = Vec::new();
        for &k in &ks {
            match mean_intersection(&lists, k) {
                Some(v) => {
                    tsv.push_str(&format!("{method}\t{k}\t{v}\n"));
                    points.push(json!({ "k": k, "value": v }));
                }
                None => warn!("{method}: rankings shorter than {k}, skipped"),
            }
        }
        curves.insert(method.to_string(), points);
    }

    let mut freq_sweep = Vec::new();
    for cutoff in s.get_list::<u64>("stability.freq_cutoffs")? {
        let c = DetectorConfig {
            min_count: cutoff,
            ..cfg.clone()
        };
        let mut row = json!({ "min_count": cutoff });
        for method in [Method::Nn, Method::AlignCos] {
            row[method.to_string()] = match rank_all(&c, method) {
                Ok(lists) => json!(mean_intersection(&lists, at)),
                Err(e) => {
                    warn!("frequency cutoff {cutoff}: {e}");
                    Value::Null
                }
            };
        }
        freq_sweep.push(row);
    }
    let mut neighbor_sweep = Vec::new();
    for k in s.get_list::<usize>("stability.neighbor_ks")? {
        let c = DetectorConfig { k, ..cfg.clone() };
        let lists = rank_all(&c, Method::Nn)?;
        neighbor_sweep.push(json!({ "k": k, "nn": mean_intersection(&lists, at) }));
    }

    let out = outputs.track(dir.join("stability.json"));
    let mut doc = record.to_json(s);
    doc["curves"] = json!(curves);
    doc["sweep_at"] = json!(at);
    doc["freq_sweep"] = json!(freq_sweep);
    doc["neighbor_sweep"] = json!(neighbor_sweep);
    write_json(&out, &doc, "stability")?;
    let mut t = create(&outputs.track(dir.join("curves.tsv")), "stability")?;
    t.write_all(tsv.as_bytes()).stage("stability")?;
    t.flush().stage("stability")?;
    outputs.commit();
    Ok(())
}

fn read_ranking(p: &Path) -> Result<RankedList, CliError> {
    RankedList::read_tsv(open_text(p).stage("eval")?, Method::Nn).stage("eval")
}

fn eval(
    s: &Settings,
    ranking: &Path,
    gold: Option<&Path>,
    compare: Option<&Path>,
    at: &str,
    output: &Path,
) -> Result<(), CliError> {
    if gold.is_none() && compare.is_none() {
        return Err(CliError::Usage("eval needs --gold and/or --compare".into()));
    }
    let mut record = RunRecord::new("eval");
    record.input("ranking", ranking).stage("eval")?;
    let model = read_ranking(ranking)?;
    let mut reports = Vec::new();
    let provenance = |record: &RunRecord| usage_shift::detect::Provenance {
        config: BTreeMap::new(),
        seeds: Vec::new(),
        inputs: record.input_hashes(),
    };
    if let Some(g) = gold {
        record.input("gold", g).stage("eval")?;
        let gold = load_gold(g).stage("eval")?;
        for (metric, value) in [("spearman", spearman(&model, &gold)), ("dcg", dcg(&model, &gold))] {
            reports.push(MetricReport {
                metric: metric.into(),
                value: value.stage("eval")?,
                k: None,
                provenance: provenance(&record),
            });
        }
    }
    if let Some(c) = compare {
        record.input("compare", c).stage("eval")?;
        let other = read_ranking(c)?;
        for k in at.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let k: usize = k.parse().map_err(|_| CliError::Usage(format!("bad depth `{k}` in --at")))?;
            reports.push(MetricReport {
                metric: "intersection".into(),
                value: intersection_at_k(&model, &other, k).stage("eval")?,
                k: Some(k),
                provenance: provenance(&record),
            });
        }
    }
    let mut outputs = Outputs::new();
    write_json(&outputs.track(output), &json!(reports), "eval")?;
    outputs.track(crate::provenance::sidecar_path(output));
    record.write_sidecar(s, output).stage("eval")?;
    outputs.commit();
    Ok(())
}

fn report(s: &Settings, spaces: &SpaceArgs, words: &[String], output: &Path) -> Result<(), CliError> {
    let n: usize = s.get("report.n")?;
    let k: usize = s.get("detect.k")?;
    let mut record = RunRecord::new("report");
    let (a, b) = load_pair(s, spaces, &mut record)?;
    let reports = words
        .iter()
        .map(|w| neighbor_report(&a, &b, w, n, k).stage("report"))
        .collect::<Result<Vec<_>, _>>()?;
    let mut outputs = Outputs::new();
    write_json(&outputs.track(output), &json!(reports), "report")?;
    outputs.track(crate::provenance::sidecar_path(output));
    record.write_sidecar(s, output).stage("report")?;
    outputs.commit();
    Ok(())
}

fn viz(s: &Settings, spaces: &SpaceArgs, word: &str, dir: &Path) -> Result<(), CliError> {
    let n: usize = s.get("viz.n")?;
    let seed: u64 = s.get("viz.seed")?;
    let perplexity = match s.raw("viz.perplexity") {
        "auto" => None,
        _ => Some(s.get::<f64>("viz.perplexity")?),
    };
    let tsne_cfg = TsneConfig {
        perplexity,
        iterations: s.get("viz.iterations")?,
        ..TsneConfig::default()
    };
    let mut record = RunRecord::new("viz");
    record.seeds.push(seed);
    let (a, b) = load_pair(s, spaces, &mut record)?;
    let origins = neighbor_origins(&a, &b, word, n).stage("viz")?;
    fs::create_dir_all(dir).stage("viz")?;
    let mut outputs = Outputs::new();
    // file names keep only characters that are safe everywhere
    let stem: String = word
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    for (tag, space) in [("a", &a), ("b", &b)] {
        let p = project_neighbors_2d(space, tag, word, &origins, seed, &tsne_cfg).stage("viz")?;
        let svg = outputs.track(dir.join(format!("{stem}.{tag}.svg")));
        emit_svg(&p, &format!("{word} in corpus {}", tag.to_uppercase()), &svg).stage("viz")?;
        let tsv = outputs.track(dir.join(format!("{stem}.{tag}.tsv")));
        p.write_tsv(create(&tsv, "viz")?).stage("viz")?;
    }
    let side = outputs.track(dir.join(format!("{stem}.json")));
    write_json(&side, &record.to_json(s), "viz")?;
    outputs.commit();
    Ok(())
}

fn synth(s: &Settings, dir: &Path) -> Result<(), CliError> {
    let cfg = SynthConfig {
        seed: s.get("synth.seed")?,
        tokens: s.get("synth.tokens")?,
        ..SynthConfig::default()
    };
    let pair = generate(&cfg).stage("synth")?;
    fs::create_dir_all(dir).stage("synth")?;
    let mut outputs = Outputs::new();
    pair.a.write_text(&outputs.track(dir.join("corpus_a.txt"))).stage("synth")?;
    pair.b.write_text(&outputs.track(dir.join("corpus_b.txt"))).stage("synth")?;
    let mut out = create(&outputs.track(dir.join("planted.txt")), "synth")?;
    for w in &pair.planted {
        writeln!(out, "{w}").stage("synth")?;
    }
    out.flush().stage("synth")?;
    let mut record = RunRecord::new("synth");
    record.seeds.push(cfg.seed);
    write_json(&outputs.track(dir.join("synth.json")), &record.to_json(s), "synth")?;
    outputs.commit();
    Ok(())
}
