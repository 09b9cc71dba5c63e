use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_script::UnicodeScript;

use crate::error::{Error, Result};

/// Token classes removed outright before any other processing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StripPattern {
    Url,
    Mention,
    Hashtag,
    Retweet,
}

impl StripPattern {
    pub const ALL: [StripPattern; 4] = [
        StripPattern::Url,
        StripPattern::Mention,
        StripPattern::Hashtag,
        StripPattern::Retweet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StripPattern::Url => "url",
            StripPattern::Mention => "mention",
            StripPattern::Hashtag => "hashtag",
            StripPattern::Retweet => "retweet",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        StripPattern::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizerConfig {
    pub lowercase: bool,
    pub strip_patterns: Vec<StripPattern>,
    pub number_token: String,
    /// Unicode script names (`Latin`, `Hebrew`, ...), matched case-insensitively
    /// against either the full or the four-letter short name.
    pub allowed_scripts: BTreeSet<String>,
    pub allowed_punct: BTreeSet<char>,
    pub keep_emoji: bool,
}

impl Default for NormalizerConfig {
    fn default() -> Self {
        Self::for_scripts(&["Latin"])
    }
}

impl NormalizerConfig {
    pub fn for_scripts(scripts: &[&str]) -> Self {
        NormalizerConfig {
            lowercase: true,
            strip_patterns: StripPattern::ALL.to_vec(),
            number_token: "<num>".to_string(),
            allowed_scripts: scripts.iter().map(|s| s.to_string()).collect(),
            allowed_punct: ['-', '\'', '.'].into_iter().collect(),
            keep_emoji: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.number_token.trim().is_empty() || self.number_token.contains(char::is_whitespace) {
            return Err(Error::InvalidConfig(
                "number_token must be a nonempty string without whitespace".into(),
            ));
        }
        if let Some(c) = self.allowed_punct.iter().find(|c| !is_punctuation(**c)) {
            return Err(Error::InvalidConfig(format!(
                "allowed_punct contains non-punctuation character {c:?}"
            )));
        }
        Ok(())
    }

    fn strips(&self, p: StripPattern) -> bool {
        self.strip_patterns.contains(&p)
    }

    fn script_allowed(&self, c: char) -> bool {
        let script = c.script();
        let (full, short) = (script.full_name(), script.short_name());
        self.allowed_scripts
            .iter()
            .any(|s| s.eq_ignore_ascii_case(full) || s.eq_ignore_ascii_case(short))
    }

    fn keeps(&self, token: &str) -> bool {
        token == self.number_token
            || token.chars().any(|c| {
                self.allowed_punct.contains(&c)
                    || (self.keep_emoji && is_emoji(c))
                    || (c.is_alphabetic() && self.script_allowed(c))
            })
    }
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || (!c.is_ascii() && !c.is_alphanumeric() && !c.is_whitespace() && !c.is_control())
}

/// Pictographic code points. Covers the emoji blocks plus the BMP symbols that
/// default to emoji presentation.
pub fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF
        | 0x2600..=0x27BF
        | 0x2300..=0x23FF
        | 0x2B05..=0x2B07
        | 0x2B1B..=0x2B1C
        | 0x2B50
        | 0x2B55
        | 0x3030
        | 0x303D
        | 0x3297
        | 0x3299
        | 0x00A9
        | 0x00AE
        | 0x203C
        | 0x2049
        | 0x2122
        | 0x2139
        | 0x2194..=0x21AA)
}

fn number_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[+-]?(?:\d+(?:[.,:/]\d+)*|[.,]\d+)%?$").unwrap())
}

fn is_url(token: &str) -> bool {
    token.starts_with("http://") || token.starts_with("https://") || token.starts_with("www.")
}

impl NormalizerConfig {
    // Edge characters that are split off: punctuation and symbols that are
    // neither allowed punctuation nor emoji. `@` and `#` stay so mentions and
    // hashtags are still recognizable.
    fn trims(&self, c: char) -> bool {
        !c.is_alphanumeric()
            && !c.is_whitespace()
            && !self.allowed_punct.contains(&c)
            && !is_emoji(c)
            && c != '@'
            && c != '#'
    }

    fn trim_edges<'a>(&self, mut token: &'a str) -> &'a str {
        loop {
            let next = token.trim_matches(|c| self.trims(c));
            // A sentence-final run of dots is split off unless the word itself
            // contains dots (abbreviations such as `u.s.`).
            let core = next.trim_end_matches('.');
            let next = if !core.is_empty() && core.len() < next.len() && !core.contains('.') {
                core
            } else {
                next
            };
            if next.len() == token.len() {
                return next;
            }
            token = next;
        }
    }
}

/// Normalize one document (one input line) into tokens.
///
/// Lowercases, drops URLs, mentions, hashtags and retweet markers, splits
/// surrounding punctuation off each whitespace-separated token, replaces
/// numbers with `cfg.number_token`, and discards tokens that carry no
/// character of an allowed script, no allowed punctuation mark and no emoji.
pub fn normalize_and_tokenize(line: &str, cfg: &NormalizerConfig) -> Vec<String> {
    let lowered;
    let text = if cfg.lowercase {
        lowered = line.to_lowercase();
        lowered.as_str()
    } else {
        line
    };

    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        if raw == cfg.number_token {
            out.push(raw.to_string());
            continue;
        }
        if cfg.strips(StripPattern::Url) && is_url(raw) {
            continue;
        }
        let token = cfg.trim_edges(raw);
        if token.is_empty() {
            continue;
        }
        if cfg.strips(StripPattern::Url) && is_url(token) {
            continue;
        }
        if cfg.strips(StripPattern::Mention) && token.len() > 1 && token.starts_with('@') {
            continue;
        }
        if cfg.strips(StripPattern::Hashtag) && token.len() > 1 && token.starts_with('#') {
            continue;
        }
        if cfg.strips(StripPattern::Retweet) && token.eq_ignore_ascii_case("rt") {
            continue;
        }
        let re = number_regex();
        if re.is_match(token) || re.is_match(token.trim_end_matches('.')) {
            out.push(cfg.number_token.clone());
            continue;
        }
        if cfg.keeps(token) {
            out.push(token.to_string());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tok(s: &str) -> Vec<String> {
        normalize_and_tokenize(s, &NormalizerConfig::default())
    }

    #[test]
    fn strips_url_hashtag_mention_and_numbers() {
        assert_eq!(tok("Check http://t.co/x #cool @you 123"), ["check", "<num>"]);
    }

    #[test]
    fn empty_line() {
        assert!(tok("").is_empty());
        assert!(tok("   \t ").is_empty());
    }

    #[test]
    fn retweet_marker_and_mention() {
        assert_eq!(tok("RT @a hello hello"), ["hello", "hello"]);
        assert_eq!(tok("RT @a: hello"), ["hello"]);
    }

    #[test]
    fn stripping_is_configurable() {
        let mut cfg = NormalizerConfig::default();
        cfg.strip_patterns = vec![StripPattern::Url];
        assert_eq!(normalize_and_tokenize("rt @you #tag", &cfg), ["rt", "@you", "#tag"]);
    }

    #[test]
    fn punctuation_handling() {
        assert_eq!(tok("Hello, world!"), ["hello", "world"]);
        assert_eq!(tok("the end."), ["the", "end"]);
        assert_eq!(tok("the u.s. is"), ["the", "u.s.", "is"]);
        assert_eq!(tok("don't re-use ..."), ["don't", "re-use", "..."]);
        assert_eq!(tok("(1,000) 3.5. 12%"), ["<num>", "<num>", "<num>"]);
        assert_eq!(tok("!!! ?? ;"), Vec::<String>::new());
    }

    #[test]
    fn script_and_emoji_filter() {
        assert_eq!(tok("שלום hello"), ["hello"]);
        let he = NormalizerConfig::for_scripts(&["Hebrew"]);
        assert_eq!(normalize_and_tokenize("שלום hello 42", &he), ["שלום", "<num>"]);
        assert_eq!(tok("great 😀 ☕"), ["great", "😀", "☕"]);
        let mut no_emoji = NormalizerConfig::default();
        no_emoji.keep_emoji = false;
        assert_eq!(normalize_and_tokenize("great 😀", &no_emoji), ["great"]);
    }

    #[test]
    fn short_script_names_accepted() {
        let cfg = NormalizerConfig::for_scripts(&["hebr"]);
        assert_eq!(normalize_and_tokenize("שלום", &cfg), ["שלום"]);
    }

    #[test]
    fn validation() {
        assert!(NormalizerConfig::default().validate().is_ok());
        let mut cfg = NormalizerConfig::default();
        cfg.number_token = String::new();
        assert!(cfg.validate().is_err());
        let mut cfg = NormalizerConfig::default();
        cfg.allowed_punct.insert('a');
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn strip_pattern_names() {
        for p in StripPattern::ALL {
            assert_eq!(StripPattern::parse(p.name()), Some(p));
        }
        assert_eq!(StripPattern::parse("URL"), Some(StripPattern::Url));
        assert_eq!(StripPattern::parse("nope"), None);
    }

    proptest! {
        #[test]
        fn idempotent_on_own_output(
            line in proptest::collection::vec(
                prop_oneof![
                    "[a-zA-Z]{1,6}",
                    "[0-9]{1,4}",
                    "[.,!?'\"()#@:-]{1,3}",
                    "[a-z]{1,3}[.'-][a-z]{0,3}[.,!]{0,2}",
                    "(http://|www\\.)[a-z]{1,5}",
                    Just("RT".to_string()),
                    Just("שלום".to_string()),
                    Just("😀".to_string()),
                    Just("<num>".to_string()),
                ],
                0..12,
            )
        ) {
            let cfg = NormalizerConfig::default();
            let once = normalize_and_tokenize(&line.join(" "), &cfg);
            let twice = normalize_and_tokenize(&once.join(" "), &cfg);
            prop_assert_eq!(once, twice);
        }
    }
}
