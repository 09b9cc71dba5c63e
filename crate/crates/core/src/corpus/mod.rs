//! Corpus preprocessing: tokenization, frequency tables and filtered vocabularies.

mod frequency;
mod normalize;
mod vocabulary;

use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::fs::File;
use std::hash::{Hash, Hasher};
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;

pub use frequency::{count_documents_par, count_frequencies, FrequencyTable};
pub use normalize::{is_emoji, normalize_and_tokenize, NormalizerConfig, StripPattern};
pub use vocabulary::{build_stopwords, build_vocabulary, Vocabulary, WordFlags};

use crate::error::Result;

/// Opens a UTF-8 text file, transparently decompressing `.gz` files.
pub fn open_text(path: &Path) -> io::Result<Box<dyn BufRead + Send>> {
    let file = File::open(path)?;
    let gz = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("gz"));
    Ok(if gz {
        Box::new(BufReader::with_capacity(1 << 16, MultiGzDecoder::new(file)))
    } else {
        Box::new(BufReader::with_capacity(1 << 16, file))
    })
}

/// A corpus that can be streamed sentence by sentence any number of times.
///
/// Multi-epoch training re-reads the source instead of holding it in memory.
pub trait SentenceSource: Sync {
    fn for_each_sentence(&self, f: &mut dyn FnMut(&[&str])) -> Result<()>;
}

impl<S: AsRef<str> + Sync> SentenceSource for [Vec<S>] {
    fn for_each_sentence(&self, f: &mut dyn FnMut(&[&str])) -> Result<()> {
        let mut buf: Vec<&str> = Vec::new();
        for sentence in self {
            buf.clear();
            buf.extend(sentence.iter().map(AsRef::as_ref));
            f(&buf);
        }
        Ok(())
    }
}

impl<S: AsRef<str> + Sync> SentenceSource for Vec<Vec<S>> {
    fn for_each_sentence(&self, f: &mut dyn FnMut(&[&str])) -> Result<()> {
        self.as_slice().for_each_sentence(f)
    }
}

/// A pre-tokenized file: one document per line, tokens separated by spaces.
#[derive(Debug, Clone)]
pub struct TokenizedFile {
    path: PathBuf,
}

impl TokenizedFile {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        TokenizedFile { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl SentenceSource for TokenizedFile {
    fn for_each_sentence(&self, f: &mut dyn FnMut(&[&str])) -> Result<()> {
        let mut reader = open_text(&self.path)?;
        let mut line = String::new();
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                return Ok(());
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            f(&tokens);
        }
    }
}

/// Exact-line deduplication over a stream of documents.
///
/// Stores one 64-bit hash per distinct line.
#[derive(Debug, Default)]
pub struct LineDedup {
    seen: HashSet<u64>,
}

impl LineDedup {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `true` the first time a line is seen.
    pub fn first_time(&mut self, line: &str) -> bool {
        let mut h = DefaultHasher::new();
        line.hash(&mut h);
        self.seen.insert(h.finish())
    }
}
