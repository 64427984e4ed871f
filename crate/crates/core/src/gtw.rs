//! Greedy time warping distance and the nearest-neighbour classifier built on
//! it.
//!
//! Recordings are matched as one point sequence: strokes are concatenated in
//! drawing order and only `(x, y)` enter the distance.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::recording::{
    recording_from_value, serialize_recording, ClassificationResult, Hypothesis, Point, Recording,
    RecordingError, SymbolId,
};

#[derive(Debug, Error)]
pub enum GtwError {
    #[error("cannot match an empty point sequence")]
    EmptySequence,
    #[error("template store is empty")]
    EmptyStore,
    #[error("template store I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("template file {file}: {reason}")]
    Format { file: String, reason: String },
}

fn delta(a: &Point, b: &Point) -> f64 {
    a.dist_sq(b)
}

/// Greedy warping distance between two point sequences.
///
/// Starting from the first pair, each step advances A, B or both, whichever
/// makes the next pair closest (ties prefer advancing A, then B). When one
/// sequence runs out, the rest of the other is matched against its last point.
pub fn gtw_distance(a: &[Point], b: &[Point]) -> Result<f64, GtwError> {
    if a.is_empty() || b.is_empty() {
        return Err(GtwError::EmptySequence);
    }
    let (mut i, mut j) = (0, 0);
    let mut d = delta(&a[0], &b[0]);
    while i + 1 < a.len() && j + 1 < b.len() {
        let l = delta(&a[i + 1], &b[j]);
        let m = delta(&a[i + 1], &b[j + 1]);
        let r = delta(&a[i], &b[j + 1]);
        let mu = l.min(m).min(r);
        d += mu;
        if l == mu {
            i += 1;
        } else if r == mu {
            j += 1;
        } else {
            i += 1;
            j += 1;
        }
    }
    if i + 1 == a.len() {
        d += b[j + 1..].iter().map(|p| delta(&a[i], p)).sum::<f64>();
    } else {
        d += a[i + 1..].iter().map(|p| delta(&b[j], p)).sum::<f64>();
    }
    Ok(d)
}

pub fn recording_distance(a: &Recording, b: &Recording) -> f64 {
    let pa: Vec<Point> = a.points().copied().collect();
    let pb: Vec<Point> = b.points().copied().collect();
    gtw_distance(&pa, &pb).expect("recordings are never empty")
}

/// Preprocessed training recordings per symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct GtwTemplateStore {
    templates: BTreeMap<SymbolId, Vec<Vec<Point>>>,
    cap: usize,
}

pub const DEFAULT_TEMPLATES_PER_SYMBOL: usize = 50;

impl Default for GtwTemplateStore {
    fn default() -> Self {
        Self::new(DEFAULT_TEMPLATES_PER_SYMBOL)
    }
}

impl GtwTemplateStore {
    pub fn new(cap: usize) -> Self {
        GtwTemplateStore {
            templates: BTreeMap::new(),
            cap,
        }
    }

    /// Adds a template unless its symbol is already full. Returns whether it
    /// was stored.
    pub fn insert(&mut self, symbol: SymbolId, rec: &Recording) -> bool {
        let list = self.templates.entry(symbol).or_default();
        if list.len() >= self.cap {
            return false;
        }
        list.push(rec.points().copied().collect());
        true
    }

    /// Stores labeled recordings in order, skipping unlabeled ones.
    pub fn from_recordings<'a>(recs: impl IntoIterator<Item = &'a Recording>, cap: usize) -> Self {
        let mut store = Self::new(cap);
        for r in recs {
            if let Some(label) = r.label {
                store.insert(label, r);
            }
        }
        store
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn symbol_count(&self) -> usize {
        self.templates.len()
    }

    pub fn template_count(&self) -> usize {
        self.templates.values().map(Vec::len).sum()
    }

    pub fn symbols(&self) -> impl Iterator<Item = SymbolId> + '_ {
        self.templates.keys().copied()
    }

    /// Smallest template distance per symbol, ascending by distance then id.
    pub fn nearest(&self, query: &Recording) -> Result<Vec<(SymbolId, f64)>, GtwError> {
        if self.is_empty() {
            return Err(GtwError::EmptyStore);
        }
        let q: Vec<Point> = query.points().copied().collect();
        let mut best: Vec<(SymbolId, f64)> = self
            .templates
            .par_iter()
            .map(|(&id, list)| {
                let d = list
                    .iter()
                    .map(|t| gtw_distance(&q, t).expect("non-empty"))
                    .fold(f64::INFINITY, f64::min);
                (id, d)
            })
            .collect();
        best.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        Ok(best)
    }

    /// The `k` nearest symbols with softmax pseudo-probabilities over
    /// `-distance / tau`, `tau` being the mean of the returned distances.
    pub fn classify(&self, query: &Recording, k: usize) -> Result<ClassificationResult, GtwError> {
        let mut best = self.nearest(query)?;
        best.truncate(k.max(1));
        Ok(distances_to_probabilities(&best))
    }

    /// Writes one `<symbol id>.json` per symbol, each an array of recordings.
    pub fn save(&self, dir: &Path) -> Result<(), GtwError> {
        fs::create_dir_all(dir)?;
        for (id, list) in &self.templates {
            let mut text = String::from("[");
            for (i, pts) in list.iter().enumerate() {
                if i > 0 {
                    text.push(',');
                }
                let rec = Recording::new(vec![pts.clone()]).expect("templates are non-empty");
                text.push_str(&serialize_recording(&rec));
            }
            text.push_str("]\n");
            fs::write(dir.join(format!("{id}.json")), text)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path, cap: usize) -> Result<Self, GtwError> {
        let mut store = Self::new(cap);
        let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<Result<_, _>>()?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let path = entry.path();
            let file = path.display().to_string();
            let format_err = |reason: String| GtwError::Format {
                file: file.clone(),
                reason,
            };
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let id: u32 = path
                .file_stem()
                .and_then(|s| s.to_str())
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| format_err("file name is not a symbol id".into()))?;
            let value: serde_json::Value =
                serde_json::from_str(&fs::read_to_string(&path)?).map_err(|e| format_err(e.to_string()))?;
            let list = value
                .as_array()
                .ok_or_else(|| format_err("expected an array of recordings".into()))?;
            for v in list {
                let rec = recording_from_value(v).map_err(|e: RecordingError| format_err(e.to_string()))?;
                store.insert(SymbolId(id), &rec);
            }
        }
        Ok(store)
    }
}

/// Softmax over `-d / tau` for an ascending distance list.
pub fn distances_to_probabilities(best: &[(SymbolId, f64)]) -> ClassificationResult {
    if best.is_empty() {
        return vec![];
    }
    let mut tau = best.iter().map(|(_, d)| d).sum::<f64>() / best.len() as f64;
    if !(tau > 0.0 && tau.is_finite()) {
        tau = 1.0;
    }
    let d_min = best[0].1;
    let weights: Vec<f64> = best.iter().map(|(_, d)| (-(d - d_min) / tau).exp()).collect();
    let total: f64 = weights.iter().sum();
    best.iter()
        .zip(&weights)
        .map(|(&(symbol, _), w)| Hypothesis {
            symbol,
            probability: w / total,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierRanking {
    /// `(index into the input, score)`, highest score first.
    pub ranked: Vec<(usize, f64)>,
    pub evaluations: usize,
}

/// Scores every recording by its summed distance to all others in both
/// directions and sorts descending; likely mislabeled samples come first.
pub fn rank_outliers(recs: &[Recording]) -> OutlierRanking {
    let seqs: Vec<Vec<Point>> = recs.iter().map(|r| r.points().copied().collect()).collect();
    let n = seqs.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let dists: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| gtw_distance(&seqs[i], &seqs[j]).expect("non-empty"))
        .collect();
    let mut scores = vec![0.0; n];
    for (&(i, j), d) in pairs.iter().zip(&dists) {
        scores[i] += d;
        scores[j] += d;
    }
    let mut ranked: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    OutlierRanking {
        ranked,
        evaluations: pairs.len(),
    }
}
