//! Per-word neighbor reports and 2-D neighborhood projections.

mod svg;
mod tsne;

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

pub use svg::render_svg;
pub use tsne::{pca_2d, tsne, TsneConfig};

use crate::error::{Error, Result};
use crate::space::EmbeddingSpace;

/// Neighbors of `word` in each space that are not in the shared top-`k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborReport {
    pub word: String,
    pub k: usize,
    #[serde(rename = "intersection_size")]
    pub intersection_size_at_k: usize,
    pub top_a: Vec<String>,
    pub top_b: Vec<String>,
}

/// The first `n` neighbors of `word` within each space's top-`k` after removing
/// the words both top-`k` lists share. Restricting to the top-`k` keeps the two
/// reported lists disjoint.
pub fn neighbor_report(a: &EmbeddingSpace, b: &EmbeddingSpace, word: &str, n: usize, k: usize) -> Result<NeighborReport> {
    let na = a.top_k_neighbors(word, k)?;
    let nb = b.top_k_neighbors(word, k)?;
    let shared: HashSet<&String> = na.as_set.intersection(&nb.as_set).collect();
    let pick = |s: &crate::space::NeighborSet| {
        s.ordered
            .iter()
            .filter(|nb| !shared.contains(&nb.word))
            .take(n)
            .map(|nb| nb.word.clone())
            .collect::<Vec<_>>()
    };
    Ok(NeighborReport {
        word: word.to_string(),
        k,
        intersection_size_at_k: shared.len(),
        top_a: pick(&na),
        top_b: pick(&nb),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    AOnly,
    BOnly,
    Shared,
    Target,
}

impl Origin {
    pub fn name(self) -> &'static str {
        match self {
            Origin::AOnly => "a-only",
            Origin::BOnly => "b-only",
            Origin::Shared => "shared",
            Origin::Target => "target",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub word: String,
    pub x: f64,
    pub y: f64,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    pub points: Vec<Point>,
    /// Which space's geometry was projected.
    pub space_tag: String,
}

impl Projection2D {
    /// `word<TAB>x<TAB>y<TAB>origin` rows.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        for p in &self.points {
            writeln!(out, "{}\t{}\t{}\t{}", p.word, p.x, p.y, p.origin.name())?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Union of the top-`n` neighbors of `word` in both spaces, labelled by which
/// lists contain them.
pub fn neighbor_origins(a: &EmbeddingSpace, b: &EmbeddingSpace, word: &str, n: usize) -> Result<BTreeMap<String, Origin>> {
    let na = a.top_k_neighbors(word, n)?;
    let nb = b.top_k_neighbors(word, n)?;
    let mut out = BTreeMap::new();
    for w in na.words() {
        let o = if nb.as_set.contains(w) { Origin::Shared } else { Origin::AOnly };
        out.insert(w.to_string(), o);
    }
    for w in nb.words() {
        out.entry(w.to_string()).or_insert(Origin::BOnly);
    }
    Ok(out)
}

/// Projects `word` and `others` using the geometry of `space`. The target comes
/// first, followed by `others` in word order; words unknown to `space` are
/// skipped with a warning.
pub fn project_neighbors_2d(
    space: &EmbeddingSpace,
    space_tag: &str,
    word: &str,
    others: &BTreeMap<String, Origin>,
    seed: u64,
    cfg: &TsneConfig,
) -> Result<Projection2D> {
    let mut labelled = vec![(word.to_string(), Origin::Target, space.id(word)?)];
    let mut skipped = Vec::new();
    for (w, o) in others {
        if w == word {
            continue;
        }
        match space.id(w) {
            Ok(id) => labelled.push((w.clone(), *o, id)),
            Err(_) => skipped.push(w.as_str()),
        }
    }
    if !skipped.is_empty() {
        warn!("{} word(s) missing from space {space_tag}, not projected: {}", skipped.len(), skipped.join(", "));
    }
    if labelled.len() < 3 {
        return Err(Error::TooShort {
            needed: 3,
            found: labelled.len(),
        });
    }
    let x: Vec<Vec<f64>> = labelled.iter().map(|(_, _, id)| space.unit_row(*id).to_vec()).collect();
    let coords = tsne(&x, seed, cfg)?;
    Ok(Projection2D {
        points: labelled
            .into_iter()
            .zip(coords)
            .map(|((word, origin, _), [x, y])| Point { word, x, y, origin })
            .collect(),
        space_tag: space_tag.to_string(),
    })
}

pub fn emit_svg(p: &Projection2D, title: &str, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(render_svg(p, title).as_bytes())?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ang(deg: f64) -> Vec<f64> {
        vec![deg.to_radians().cos(), deg.to_radians().sin()]
    }

    fn space(rows: &[(&str, f64)]) -> EmbeddingSpace {
        EmbeddingSpace::from_rows(rows.iter().map(|(w, d)| (w.to_string(), 10, ang(*d))), 2, 0).unwrap()
    }

    #[test]
    fn identical_spaces_leave_nothing_to_report() {
        let a = space(&[("t", 0.0), ("a", 10.0), ("b", 20.0), ("c", 30.0)]);
        let r = neighbor_report(&a, &a, "t", 10, 3).unwrap();
        assert!(r.top_a.is_empty() && r.top_b.is_empty());
        assert_eq!(r.intersection_size_at_k, 3);
    }

    #[test]
    fn disjoint_neighborhoods_report_raw_lists() {
        let a = space(&[("t", 0.0), ("a1", 5.0), ("a2", 10.0), ("b1", 170.0), ("b2", 175.0)]);
        let b = space(&[("t", 0.0), ("a1", 170.0), ("a2", 175.0), ("b1", 5.0), ("b2", 10.0)]);
        let r = neighbor_report(&a, &b, "t", 2, 2).unwrap();
        assert_eq!(r.top_a, ["a1", "a2"]);
        assert_eq!(r.top_b, ["b1", "b2"]);
        assert_eq!(r.intersection_size_at_k, 0);
    }

    #[test]
    fn shared_neighbor_is_removed_and_next_promoted() {
        let a = space(&[("t", 0.0), ("s", 1.0), ("a1", 2.0), ("a2", 3.0), ("b1", 90.0), ("b2", 100.0)]);
        let b = space(&[("t", 0.0), ("s", 1.0), ("b1", 2.0), ("b2", 3.0), ("a1", 90.0), ("a2", 100.0)]);
        let r = neighbor_report(&a, &b, "t", 2, 3).unwrap();
        assert_eq!(r.intersection_size_at_k, 1);
        assert_eq!(r.top_a, ["a1", "a2"]);
        assert_eq!(r.top_b, ["b1", "b2"]);
        assert!(!r.top_a.contains(&"t".to_string()));
        assert!(neighbor_report(&a, &b, "zz", 2, 3).is_err());
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["intersection_size"], 1);
    }

    #[test]
    fn origins_and_projection() {
        let rows: Vec<(String, f64)> = (0..30).map(|i| (format!("w{i:02}"), i as f64 * 3.0)).collect();
        let rows_ref: Vec<(&str, f64)> = rows.iter().map(|(w, d)| (w.as_str(), *d)).collect();
        let a = space(&rows_ref);
        let rev: Vec<(&str, f64)> = rows.iter().map(|(w, d)| (w.as_str(), -*d * 1.7)).collect();
        let b = space(&rev);
        let origins = neighbor_origins(&a, &b, "w00", 5).unwrap();
        assert!(origins.values().any(|o| *o == Origin::Shared));
        assert!(!origins.contains_key("w00"));
        let cfg = TsneConfig::default();
        let p = project_neighbors_2d(&a, "a", "w00", &origins, 3, &cfg).unwrap();
        assert_eq!(p.points.iter().filter(|p| p.origin == Origin::Target).count(), 1);
        assert_eq!(p.points.len(), origins.len() + 1);
        assert!(p.points.iter().all(|p| p.x.is_finite() && p.y.is_finite()));
        assert_eq!(p, project_neighbors_2d(&a, "a", "w00", &origins, 3, &cfg).unwrap());
        let mut buf = Vec::new();
        p.write_tsv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("w00\t"));
        let tiny = BTreeMap::from([("w01".to_string(), Origin::AOnly)]);
        assert!(matches!(
            project_neighbors_2d(&a, "a", "w00", &tiny, 0, &cfg),
            Err(Error::TooShort { .. })
        ));
    }
}
