//! Dataset files: JSON-lines recordings with a label sidecar, stratified
//! splits and the binary feature matrix.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::PipelineError;
use crate::recording::{parse_recording, serialize_recording, Recording, SymbolId, SymbolTable};

/// Labeled recordings with their symbol table.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub symbols: SymbolTable,
    pub recordings: Vec<Recording>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

/// `<base>.jsonl` and `<base>.csv` for a dataset base path.
pub fn dataset_paths(base: &Path) -> (PathBuf, PathBuf) {
    let s = base.to_string_lossy();
    let stem = s.strip_suffix(".jsonl").or_else(|| s.strip_suffix(".csv")).unwrap_or(&s);
    (PathBuf::from(format!("{stem}.jsonl")), PathBuf::from(format!("{stem}.csv")))
}

pub fn dataset_exists(base: &Path) -> bool {
    let (a, b) = dataset_paths(base);
    a.is_file() && b.is_file()
}

/// Reads line `k` of `<base>.jsonl` together with data row `k` of
/// `<base>.csv` (`id,symbol_command`). Without a `symbols` table the table is
/// built from the distinct commands in byte order.
pub fn read_dataset(base: &Path, symbols: Option<&SymbolTable>) -> Result<LabeledSet, PipelineError> {
    let (jsonl, csv_path) = dataset_paths(base);
    let mut reader = csv::Reader::from_path(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    let mut labels: Vec<(u64, String)> = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| io_err(&csv_path, e))?;
        if rec.len() != 2 {
            return Err(io_err(&csv_path, format!("row {}: expected id,symbol_command", row + 2)));
        }
        let id: u64 = rec[0]
            .trim()
            .parse()
            .map_err(|_| io_err(&csv_path, format!("row {}: bad id {:?}", row + 2, &rec[0])))?;
        labels.push((id, rec[1].to_string()));
    }
    let symbols = match symbols {
        Some(s) => s.clone(),
        None => {
            let mut commands: Vec<&str> = labels.iter().map(|(_, c)| c.as_str()).collect();
            commands.sort_unstable();
            commands.dedup();
            SymbolTable::from_commands(&commands).expect("deduplicated")
        }
    };
    let file = fs::File::open(&jsonl).map_err(|e| io_err(&jsonl, e))?;
    let mut recordings = Vec::with_capacity(labels.len());
    let mut lines = BufReader::new(file).lines().filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()));
    for (k, (id, command)) in labels.iter().enumerate() {
        let line = lines
            .next()
            .ok_or_else(|| io_err(&jsonl, format!("{} labels but only {k} recordings", labels.len())))?
            .map_err(|e| io_err(&jsonl, e))?;
        let label = symbols
            .id_of_command(command)
            .ok_or_else(|| io_err(&csv_path, format!("recording {id}: unknown symbol {command:?}")))?;
        let rec = parse_recording(&line).map_err(|e| io_err(&jsonl, format!("line {}: {e}", k + 1)))?;
        recordings.push(rec.with_id(*id).with_label(label));
    }
    if lines.next().is_some() {
        return Err(io_err(&jsonl, format!("more recordings than the {} labels", labels.len())));
    }
    Ok(LabeledSet { symbols, recordings })
}

/// Writes `<base>.jsonl` and `<base>.csv`. Every recording needs an id and
/// a label from `symbols`.
pub fn write_dataset(base: &Path, set: &LabeledSet) -> Result<(), PipelineError> {
    let (jsonl, csv_path) = dataset_paths(base);
    if let Some(dir) = jsonl.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut out = BufWriter::new(fs::File::create(&jsonl).map_err(|e| io_err(&jsonl, e))?);
    let mut labels = csv::Writer::from_path(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    labels
        .write_record(["id", "symbol_command"])
        .map_err(|e| io_err(&csv_path, e))?;
    for (k, rec) in set.recordings.iter().enumerate() {
        let command = rec
            .label
            .and_then(|l| set.symbols.command(l))
            .ok_or_else(|| io_err(&csv_path, format!("recording {k} has no known label")))?;
        let id = rec.id.unwrap_or(k as u64);
        writeln!(out, "{}", serialize_recording(rec)).map_err(|e| io_err(&jsonl, e))?;
        labels
            .write_record([id.to_string().as_str(), command])
            .map_err(|e| io_err(&csv_path, e))?;
    }
    out.flush().map_err(|e| io_err(&jsonl, e))?;
    labels.flush().map_err(|e| io_err(&csv_path, e))?;
    Ok(())
}

/// Train, validation and test parts of something.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Splits<T> {
    pub train: T,
    pub validation: T,
    pub test: T,
}

impl<T> Splits<T> {
    pub const NAMES: [&'static str; 3] = ["train", "validation", "test"];

    pub fn map<U>(self, mut f: impl FnMut(&'static str, T) -> U) -> Splits<U> {
        Splits {
            train: f("train", self.train),
            validation: f("validation", self.validation),
            test: f("test", self.test),
        }
    }

    pub fn as_array(&self) -> [&T; 3] {
        [&self.train, &self.validation, &self.test]
    }
}

/// Largest-remainder allocation of `n` items to `fractions`; ties go to the
/// earlier part.
pub fn allocate(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts = [0usize; 3];
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = e.floor() as usize;
    }
    let mut rest = n - counts.iter().sum::<usize>().min(n);
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        if fractions[i] > 0.0 {
            counts[i] += 1;
            rest -= 1;
        }
    }
    counts
}

/// Stratified split: each symbol's recordings are shuffled with the seeded
/// generator and cut by [`allocate`]. A symbol with fewer recordings than
/// non-empty parts goes entirely to training. Parts are sorted by id.
pub fn split_dataset(recordings: &[Recording], fractions: [f64; 3], seed: u64) -> Splits<Vec<Recording>> {
    let mut by_symbol: BTreeMap<Option<SymbolId>, Vec<&Recording>> = BTreeMap::new();
    for r in recordings {
        by_symbol.entry(r.label).or_default().push(r);
    }
    let parts_used = fractions.iter().filter(|&&f| f > 0.0).count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Splits<Vec<Recording>> = Splits::default();
    for (symbol, mut recs) in by_symbol {
        recs.sort_by_key(|r| r.id);
        recs.shuffle(&mut rng);
        let counts = if recs.len() < parts_used {
            tracing::warn!(?symbol, n = recs.len(), "too few recordings to split; all go to training");
            [recs.len(), 0, 0]
        } else {
            allocate(recs.len(), &fractions)
        };
        let mut it = recs.into_iter().cloned();
        out.train.extend(it.by_ref().take(counts[0]));
        out.validation.extend(it.by_ref().take(counts[1]));
        out.test.extend(it);
    }
    for part in [&mut out.train, &mut out.validation, &mut out.test] {
        part.sort_by_key(|r| r.id);
    }
    out
}

const MAGIC: &[u8; 8] = b"SYMFEAT1";

/// Dense labeled feature matrix as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub features_hash: String,
    pub x: Array2<f64>,
    pub labels: Vec<SymbolId>,
}

/// Layout: magic `SYMFEAT1`, u32 dimension, u64 row count, 32-byte SHA-256
/// of the feature list, then per row a u32 symbol id and the f64 values.
/// All little endian.
pub fn write_feature_matrix(path: &Path, m: &FeatureMatrix) -> Result<(), PipelineError> {
    let hash = hex::decode(&m.features_hash).map_err(|e| io_err(path, e))?;
    if hash.len() != 32 {
        return Err(io_err(path, "feature hash must be 32 bytes"));
    }
    let mut w = BufWriter::new(fs::File::create(path).map_err(|e| io_err(path, e))?);
    let res: std::io::Result<()> = (|| {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(m.x.ncols() as u32)?;
        w.write_u64::<LittleEndian>(m.x.nrows() as u64)?;
        w.write_all(&hash)?;
        for (row, label) in m.x.rows().into_iter().zip(&m.labels) {
            w.write_u32::<LittleEndian>(label.0)?;
            for &v in row {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        w.flush()
    })();
    res.map_err(|e| io_err(path, e))
}

/// Reads a matrix written by [`write_feature_matrix`]. With `expect_hash`
/// the stored feature-list hash must match.
pub fn read_feature_matrix(path: &Path, expect_hash: Option<&str>) -> Result<FeatureMatrix, PipelineError> {
    let mut r = BufReader::new(fs::File::open(path).map_err(|e| io_err(path, e))?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| io_err(path, e))?;
    if &magic != MAGIC {
        return Err(io_err(path, "not a feature matrix file"));
    }
    let read = |r: &mut BufReader<fs::File>| -> std::io::Result<(usize, usize, [u8; 32])> {
        let dim = r.read_u32::<LittleEndian>()? as usize;
        let rows = r.read_u64::<LittleEndian>()? as usize;
        let mut hash = [0u8; 32];
        r.read_exact(&mut hash)?;
        Ok((dim, rows, hash))
    };
    let (dim, rows, hash) = read(&mut r).map_err(|e| io_err(path, e))?;
    let features_hash = hex::encode(hash);
    if let Some(want) = expect_hash {
        if want != features_hash {
            return Err(io_err(path, format!("feature hash {features_hash} does not match {want}")));
        }
    }
    let mut labels = Vec::with_capacity(rows);
    let mut values = Vec::with_capacity(rows * dim);
    let body: std::io::Result<()> = (|| {
        for _ in 0..rows {
            labels.push(SymbolId(r.read_u32::<LittleEndian>()?));
            for _ in 0..dim {
                values.push(r.read_f64::<LittleEndian>()?);
            }
        }
        Ok(())
    })();
    body.map_err(|e| io_err(path, format!("truncated: {e}")))?;
    let x = Array2::from_shape_vec((rows, dim), values).map_err(|e| io_err(path, e))?;
    Ok(FeatureMatrix { features_hash, x, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::synth_dataset;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    #[test]
    fn allocation_examples() {
        assert_eq!(allocate(100, &[0.8, 0.1, 0.1]), [80, 10, 10]);
        assert_eq!(allocate(7, &[0.8, 0.1, 0.1]), [5, 1, 1]);
        assert_eq!(allocate(3, &[1.0 / 3.0; 3]), [1, 1, 1]);
        assert_eq!(allocate(5, &[1.0, 0.0, 0.0]), [5, 0, 0]);
    }

    #[test]
    fn one_symbol_hundred_recordings() {
        let recs: Vec<Recording> = synth_dataset(100, 0)
            .1
            .into_iter()
            .filter(|r| r.label == Some(SymbolId(1)))
            .collect();
        let s = split_dataset(&recs, [0.8, 0.1, 0.1], 3);
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (80, 10, 10));
        assert_eq!(s, split_dataset(&recs, [0.8, 0.1, 0.1], 3));
        assert_ne!(s, split_dataset(&recs, [0.8, 0.1, 0.1], 4));
    }

    #[test]
    fn tiny_symbol_goes_to_training() {
        let recs: Vec<Recording> = synth_dataset(2, 0).1;
        let s = split_dataset(&recs, [0.8, 0.1, 0.1], 0);
        assert_eq!(s.train.len(), 10);
    }

    #[test]
    fn dataset_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (symbols, recordings) = synth_dataset(3, 2);
        let set = LabeledSet { symbols, recordings };
        let base = dir.path().join("raw/toy");
        write_dataset(&base, &set).unwrap();
        assert!(dataset_exists(&base));
        let back = read_dataset(&base, Some(&set.symbols)).unwrap();
        assert_eq!(back, set);
        // derived table: commands in byte order
        let derived = read_dataset(&base.with_extension("jsonl"), None).unwrap();
        let commands: Vec<&str> = derived.symbols.iter().map(|(_, c)| c).collect();
        assert_eq!(commands, vec!["+", "-", "\\Delta", "o", "x"]);
    }

    #[test]
    fn feature_matrix_round_trip_and_checks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.bin");
        let m = FeatureMatrix {
            features_hash: "ab".repeat(32),
            x: Array2::from_shape_fn((3, 2), |(r, c)| r as f64 * 0.1 + c as f64 / 3.0),
            labels: vec![SymbolId(0), SymbolId(4), SymbolId(2)],
        };
        write_feature_matrix(&path, &m).unwrap();
        assert_eq!(read_feature_matrix(&path, Some(&"ab".repeat(32))).unwrap(), m);
        assert!(read_feature_matrix(&path, Some(&"cd".repeat(32))).is_err());
        let bytes = fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 8 + 4 + 8 + 32 + 3 * (4 + 16));
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(read_feature_matrix(&path, None).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn splits_are_disjoint_and_stratified(per_class in 1usize..30, seed in any::<u64>()) {
            let (_, recs) = synth_dataset(per_class, 1);
            let s = split_dataset(&recs, [0.8, 0.1, 0.1], seed);
            let ids = |v: &Vec<Recording>| v.iter().map(|r| r.id.unwrap()).collect::<BTreeSet<_>>();
            let (a, b, c) = (ids(&s.train), ids(&s.validation), ids(&s.test));
            prop_assert_eq!(a.len() + b.len() + c.len(), recs.len());
            prop_assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
            for class in 0..5u32 {
                let n = s.train.iter().filter(|r| r.label == Some(SymbolId(class))).count() as f64;
                if per_class >= 3 {
                    prop_assert!((n - 0.8 * per_class as f64).abs() <= 1.0);
                }
            }
        }
    }
}
