//! word2vec text (read/write) and binary (read-only) formats.

use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use super::EmbeddingMatrix;
use crate::corpus::open_text;
use crate::error::{Error, Result};

/// Writes `<count> <dim>` then `<word> <f1> ... <fdim>` per row. Only input
/// vectors are exported. Floats use the shortest representation that parses
/// back to the identical `f32`.
pub fn write_text<W: Write>(e: &EmbeddingMatrix, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{} {}", e.len(), e.dim())?;
    for (i, w) in e.words().iter().enumerate() {
        out.write_all(w.as_bytes())?;
        for v in e.vector(i) {
            write!(out, " {v}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_embeddings(e: &EmbeddingMatrix, path: &Path) -> Result<()> {
    write_text(e, File::create(path)?)
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace();
    let parse = |s: Option<&str>| s.and_then(|s| s.parse::<usize>().ok());
    match (parse(it.next()), parse(it.next()), it.next()) {
        (Some(n), Some(d), None) if d > 0 => Ok((n, d)),
        _ => Err(Error::format(1, format!("malformed header `{}`", line.trim_end()))),
    }
}

pub fn read_text<R: BufRead>(mut input: R) -> Result<EmbeddingMatrix> {
    let mut line = String::new();
    if input.read_line(&mut line)? == 0 {
        return Err(Error::format(1, "missing header"));
    }
    let (count, dim) = parse_header(&line)?;
    let mut words = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count * dim);
    let mut lineno = 1;
    loop {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            break;
        }
        lineno += 1;
        if line.trim().is_empty() {
            continue;
        }
        if words.len() == count {
            return Err(Error::format(lineno, format!("header declares {count} words but more rows follow")));
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("nonblank line");
        let before = vectors.len();
        for f in fields {
            let v: f32 = f
                .parse()
                .map_err(|_| Error::format(lineno, format!("bad float `{f}`")))?;
            vectors.push(v);
        }
        let found = vectors.len() - before;
        if found != dim {
            return Err(Error::format(lineno, format!("expected {dim} values for `{word}`, found {found}")));
        }
        words.push(word.to_string());
    }
    if words.len() != count {
        return Err(Error::format(
            lineno,
            format!("header declares {count} words, file has {}", words.len()),
        ));
    }
    EmbeddingMatrix::new(words, dim, vectors)
}

/// Binary word2vec: text header, then per word `<word><space>` followed by
/// `dim` little-endian `f32`s and an optional newline.
pub fn read_binary<R: BufRead>(mut input: R) -> Result<EmbeddingMatrix> {
    let mut header = String::new();
    input.read_line(&mut header)?;
    let (count, dim) = parse_header(&header)?;
    let mut words = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count * dim);
    let mut buf = vec![0u8; dim * 4];
    let mut word = Vec::new();
    for i in 0..count {
        word.clear();
        input.read_until(b' ', &mut word)?;
        if word.last() != Some(&b' ') {
            return Err(Error::format(i + 2, format!("header declares {count} words, file has {i}")));
        }
        word.pop();
        let start = word.iter().position(|b| *b != b'\n').unwrap_or(word.len());
        let w = std::str::from_utf8(&word[start..])
            .map_err(|_| Error::format(i + 2, "word is not valid UTF-8"))?;
        if w.is_empty() {
            return Err(Error::format(i + 2, "empty word"));
        }
        input
            .read_exact(&mut buf)
            .map_err(|_| Error::format(i + 2, format!("truncated vector for `{w}`")))?;
        vectors.extend(
            buf.chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
        );
        words.push(w.to_string());
    }
    EmbeddingMatrix::new(words, dim, vectors)
}

/// Loads text or binary word2vec files; `.bin` (optionally `.bin.gz`) selects
/// the binary reader. Gzip input is decompressed transparently.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    let name = path.to_string_lossy();
    let binary = name.ends_with(".bin") || name.ends_with(".bin.gz");
    let reader = open_text(path)?;
    if binary {
        read_binary(reader)
    } else {
        read_text(reader)
    }
}
