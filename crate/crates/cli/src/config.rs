//! Flat `key=value` run configuration.
//!
//! Values are layered: built-in defaults, then the `--config` file, then
//! `USAGE_SHIFT_*` environment variables, then `--set` and dedicated flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

pub const ENV_PREFIX: &str = "USAGE_SHIFT_";

/// Every recognized key with its default and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("tokenize.lowercase", "true", "lowercase all text"),
    ("tokenize.strip", "url,mention,hashtag,retweet", "token patterns removed entirely"),
    ("tokenize.number_token", "<num>", "replacement for numeric tokens"),
    ("tokenize.scripts", "Latin", "Unicode scripts whose letters make a token a word"),
    ("tokenize.punct", "-'.", "punctuation allowed inside tokens"),
    ("tokenize.emoji", "true", "keep emoji tokens"),
    ("tokenize.dedup", "true", "drop exact duplicate lines"),
    ("train.dim", "300", "embedding dimension"),
    ("train.window", "4", "maximum context window"),
    ("train.min_count", "20", "minimum count for a word to be trained"),
    ("train.negatives", "5", "negative samples per context"),
    ("train.epochs", "5", "passes over the corpus"),
    ("train.lr", "0.025", "initial learning rate"),
    ("train.subsample", "1e-3", "frequent-word subsampling threshold"),
    ("train.seed", "1", "random seed"),
    ("train.threads", "0", "training threads (0 = all cores)"),
    ("train.deterministic", "false", "single-threaded bit-reproducible training"),
    ("detect.k", "1000", "nearest-neighbor count"),
    ("detect.min_count", "200", "minimum corpus count for ranked words"),
    ("detect.drop_quantile", "0.2", "fraction of rarest words excluded from ranking"),
    ("detect.stopword_top_n", "200", "most frequent words of each corpus treated as stopwords"),
    ("detect.stopwords", "", "file with extra stopwords, one per line"),
    ("detect.neighbor_min_freq", "100", "neighbors must occur more often than this"),
    ("align.unit_normalize", "true", "unit-normalize rows before alignment"),
    ("align.mean_center", "false", "mean-center rows before alignment"),
    ("report.n", "10", "neighbors listed per corpus"),
    ("viz.n", "50", "neighbors projected from each corpus"),
    ("viz.seed", "1", "t-SNE seed"),
    ("viz.perplexity", "auto", "t-SNE perplexity, or auto"),
    ("viz.iterations", "1000", "t-SNE iterations"),
    ("stability.seeds", "1,2", "training seeds, at least two"),
    ("stability.ks", "10,20,50,100,200,500,1000", "list depths for intersection@k curves"),
    ("stability.freq_cutoffs", "50,100,200,500,1000", "detect.min_count values swept"),
    ("stability.neighbor_ks", "10,50,100,250,500,1000", "detect.k values swept"),
    ("stability.sweep_at", "100", "list depth at which sweeps are measured"),
    ("synth.seed", "1", "generator seed"),
    ("synth.tokens", "1000000", "approximate tokens per corpus"),
];

pub fn env_var_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.replace('.', "_").to_ascii_uppercase())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn known(key: &str) -> Result<(), CliError> {
    if KEYS.iter().any(|(k, ..)| *k == key) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("unknown configuration key `{key}`")))
    }
}

/// Parses `key=value` lines; `#` starts a comment line. A JSON provenance
/// sidecar is accepted too, in which case its `config` object is used.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, CliError> {
    if text.trim_start().starts_with('{') {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config JSON: {e}")))?;
        let obj = v
            .get("config")
            .and_then(|c| c.as_object())
            .ok_or_else(|| CliError::Usage("config JSON has no `config` object".into()))?;
        return obj
            .iter()
            .map(|(k, v)| match v.as_str() {
                Some(s) => Ok((k.clone(), s.to_string())),
                None => Err(CliError::Usage(format!("config value of `{k}` is not a string"))),
            })
            .collect();
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn parse_assignment(s: &str) -> Result<(String, String), CliError> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| CliError::Usage(format!("`{s}` is not KEY=VALUE")))
}

impl Settings {
    pub fn defaults() -> Self {
        Settings {
            values: KEYS.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// Layers the sources in increasing precedence. `env` is usually
    /// `std::env::vars()`; unrelated variables are ignored.
    pub fn resolve(
        file: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
        sets: &[String],
        flags: &[(&str, String)],
    ) -> Result<Self, CliError> {
        let mut s = Self::defaults();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            for (k, v) in parse_config_text(&text)? {
                s.set(&k, v)?;
            }
        }
        let env: BTreeMap<String, String> = env.into_iter().collect();
        for (k, ..) in KEYS {
            if let Some(v) = env.get(&env_var_name(k)) {
                s.set(k, v.clone())?;
            }
        }
        for a in sets {
            let (k, v) = parse_assignment(a)?;
            s.set(&k, v)?;
        }
        for (k, v) in flags {
            s.set(k, v.clone())?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: String) -> Result<(), CliError> {
        known(key)?;
        self.values.insert(key.to_string(), value);
        Ok(())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("unregistered key {key}"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let v = self.raw(key);
        v.parse()
            .map_err(|e| CliError::Usage(format!("invalid value `{v}` for {key}: {e}")))
    }

    /// Comma-separated list; empty string gives an empty list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError>
    where
        T::Err: Display,
    {
        let v = self.raw(key);
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|e| CliError::Usage(format!("invalid item `{s}` in {key}: {e}")))
            })
            .collect()
    }

    pub fn map(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_flag_env_file_default() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.conf");
        std::fs::write(&file, "# comment\ntrain.dim = 50\ntrain.epochs=2\ndetect.k=7\n").unwrap();
        let env = vec![
            ("USAGE_SHIFT_TRAIN_EPOCHS".to_string(), "3".to_string()),
            ("USAGE_SHIFT_DETECT_K".to_string(), "8".to_string()),
            ("UNRELATED".to_string(), "x".to_string()),
        ];
        let s = Settings::resolve(Some(&file), env, &["detect.k=9".into()], &[("train.seed", "4".into())]).unwrap();
        assert_eq!(s.get::<usize>("train.dim").unwrap(), 50);
        assert_eq!(s.get::<usize>("train.epochs").unwrap(), 3);
        assert_eq!(s.get::<usize>("detect.k").unwrap(), 9);
        assert_eq!(s.get::<u64>("train.seed").unwrap(), 4);
        assert_eq!(s.get::<usize>("train.window").unwrap(), 4);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            Settings::resolve(None, vec![], &["nope=1".into()], &[]),
            Err(CliError::Usage(_))
        ));
        assert!(Settings::resolve(None, vec![], &["train.dim".into()], &[]).is_err());
        let s = Settings::resolve(None, vec![], &["train.dim=abc".into()], &[]).unwrap();
        assert!(matches!(s.get::<usize>("train.dim"), Err(CliError::Usage(_))));
    }

    #[test]
    fn json_sidecar_round_trips() {
        let s = Settings::resolve(None, vec![], &["train.dim=12".into()], &[]).unwrap();
        let json = serde_json::json!({ "command": "train", "config": s.map() }).to_string();
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("out.json");
        std::fs::write(&file, json).unwrap();
        let back = Settings::resolve(Some(&file), vec![], &[], &[]).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn lists() {
        let s = Settings::defaults();
        assert_eq!(s.get_list::<usize>("stability.ks").unwrap(), [10, 20, 50, 100, 200, 500, 1000]);
        assert!(s.get_list::<String>("detect.stopwords").unwrap().is_empty());
        assert_eq!(env_var_name("train.min_count"), "USAGE_SHIFT_TRAIN_MIN_COUNT");
    }
}
