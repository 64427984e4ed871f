//! Points, strokes and recordings, plus ingestion of the JSON stroke format.
//!
//! A recording on the wire is a top-level JSON array of strokes; each stroke is
//! an array of objects with the numeric keys `"x"`, `"y"` and `"time"`:
//!
//! ```text
//! [[{"x":657,"y":600,"time":1411732873010},{"x":656,"y":600,"time":1411732873056}],
//!  [{"x":706,"y":742,"time":1411732874742}]]
//! ```
//!
//! Unknown keys inside point objects are ignored.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecordingError {
    #[error("malformed JSON: {0}")]
    Parse(String),
    #[error("invalid recording structure: {0}")]
    Structure(String),
    #[error("invalid value at stroke {stroke}, point {point}: {reason}")]
    Value {
        stroke: usize,
        point: usize,
        reason: String,
    },
}

/// A single control point. Coordinates are canvas pixels until scaling runs;
/// `t` is in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    /// Milliseconds. Raw input is integral; resampling and smoothing may
    /// produce fractional times.
    pub t: f64,
    /// False only for points interpolated between strokes by `space_evenly`.
    pub pen_down: bool,
}

impl Point {
    pub fn new(x: f64, y: f64, t: f64) -> Self {
        Point {
            x,
            y,
            t,
            pen_down: true,
        }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Pen-down to pen-up sequence of points. Never empty inside a [`Recording`].
pub type Stroke = Vec<Point>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymbolId(pub u32);

impl fmt::Display for SymbolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One ranked classification candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub symbol: SymbolId,
    pub probability: f64,
}

/// Candidates ordered by descending probability, ties by ascending id.
pub type ClassificationResult = Vec<Hypothesis>;

/// A handwritten sample: at least one stroke, every stroke non-empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub id: Option<u64>,
    pub strokes: Vec<Stroke>,
    pub label: Option<SymbolId>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }
}

impl Recording {
    pub fn new(strokes: Vec<Stroke>) -> Result<Self, RecordingError> {
        if strokes.is_empty() {
            return Err(RecordingError::Structure("recording has no strokes".into()));
        }
        if let Some(i) = strokes.iter().position(|s| s.is_empty()) {
            return Err(RecordingError::Structure(format!("stroke {i} is empty")));
        }
        Ok(Recording {
            id: None,
            strokes,
            label: None,
        })
    }

    pub fn with_label(mut self, label: SymbolId) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_id(mut self, id: u64) -> Self {
        self.id = Some(id);
        self
    }

    /// Same id and label, new strokes. Callers guarantee the stroke invariants.
    pub(crate) fn with_strokes(&self, strokes: Vec<Stroke>) -> Recording {
        debug_assert!(!strokes.is_empty() && strokes.iter().all(|s| !s.is_empty()));
        Recording {
            id: self.id,
            strokes,
            label: self.label,
        }
    }

    pub fn point_count(&self) -> usize {
        self.strokes.iter().map(Vec::len).sum()
    }

    pub fn points(&self) -> impl Iterator<Item = &Point> {
        self.strokes.iter().flatten()
    }

    pub fn bounding_box(&self) -> BoundingBox {
        bounding_box(self)
    }
}

pub fn bounding_box(rec: &Recording) -> BoundingBox {
    let first = rec.strokes[0][0];
    rec.points().fold(
        BoundingBox {
            x_min: first.x,
            y_min: first.y,
            x_max: first.x,
            y_max: first.y,
        },
        |b, p| BoundingBox {
            x_min: b.x_min.min(p.x),
            y_min: b.y_min.min(p.y),
            x_max: b.x_max.max(p.x),
            y_max: b.y_max.max(p.y),
        },
    )
}

pub fn parse_recording(raw_text: &str) -> Result<Recording, RecordingError> {
    let value: Value =
        serde_json::from_str(raw_text).map_err(|e| RecordingError::Parse(e.to_string()))?;
    recording_from_value(&value)
}

/// Builds a recording from an already-parsed JSON value in the stroke format.
pub fn recording_from_value(value: &Value) -> Result<Recording, RecordingError> {
    let strokes_json = value
        .as_array()
        .ok_or_else(|| RecordingError::Structure("top level must be an array of strokes".into()))?;
    let mut strokes = Vec::with_capacity(strokes_json.len());
    for (si, stroke_json) in strokes_json.iter().enumerate() {
        let points_json = stroke_json.as_array().ok_or_else(|| {
            RecordingError::Structure(format!("stroke {si} must be an array of points"))
        })?;
        let mut stroke = Vec::with_capacity(points_json.len());
        for (pi, point_json) in points_json.iter().enumerate() {
            stroke.push(point_from_value(point_json, si, pi)?);
        }
        strokes.push(stroke);
    }
    Recording::new(strokes)
}

fn point_from_value(value: &Value, stroke: usize, point: usize) -> Result<Point, RecordingError> {
    let err = |reason: String| RecordingError::Value {
        stroke,
        point,
        reason,
    };
    let obj = value
        .as_object()
        .ok_or_else(|| RecordingError::Structure(format!("stroke {stroke}, point {point} is not an object")))?;
    let coord = |key: &str| -> Result<f64, RecordingError> {
        let v = obj
            .get(key)
            .ok_or_else(|| err(format!("missing key \"{key}\"")))?;
        let f = v
            .as_f64()
            .ok_or_else(|| err(format!("\"{key}\" is not a number: {v}")))?;
        if !f.is_finite() {
            return Err(err(format!("\"{key}\" is not finite")));
        }
        Ok(f)
    };
    let x = coord("x")?;
    let y = coord("y")?;
    let time = obj
        .get("time")
        .ok_or_else(|| err("missing key \"time\"".into()))?;
    let t = time
        .as_f64()
        .ok_or_else(|| err(format!("\"time\" is not a number: {time}")))?;
    if !t.is_finite() || t.abs() > 9.0e15 {
        return Err(err("\"time\" out of range".into()));
    }
    if t < 0.0 {
        return Err(err(format!("negative timestamp {t}")));
    }
    Ok(Point::new(x, y, t))
}

/// Writes the recording in the wire format with key order `x`, `y`, `time`.
/// Integral coordinates are written without a fractional part.
pub fn serialize_recording(rec: &Recording) -> String {
    let mut out = String::with_capacity(rec.point_count() * 40 + 2);
    out.push('[');
    for (si, stroke) in rec.strokes.iter().enumerate() {
        if si > 0 {
            out.push(',');
        }
        out.push('[');
        for (pi, p) in stroke.iter().enumerate() {
            if pi > 0 {
                out.push(',');
            }
            out.push_str("{\"x\":");
            write_number(&mut out, p.x);
            out.push_str(",\"y\":");
            write_number(&mut out, p.y);
            out.push_str(",\"time\":");
            write_number(&mut out, p.t);
            out.push('}');
        }
        out.push(']');
    }
    out.push(']');
    out
}

fn write_number(out: &mut String, v: f64) {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        let _ = write!(out, "{}", v as i64);
    } else {
        // serde_json prints the shortest representation that parses back to the same bits.
        out.push_str(&serde_json::to_string(&v).unwrap_or_else(|_| "0".into()));
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolTableError {
    #[error("duplicate symbol id {0}")]
    DuplicateId(SymbolId),
    #[error("duplicate symbol command {0:?}")]
    DuplicateCommand(String),
}

/// Bidirectional map between symbol ids and their LaTeX commands. Entry order
/// is significant: it is the output-neuron order of a trained model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SymbolTable {
    entries: Vec<(SymbolId, String)>,
    by_id: HashMap<SymbolId, usize>,
    by_command: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct SymbolEntry {
    id: SymbolId,
    command: String,
}

impl SymbolTable {
    pub fn new(entries: Vec<(SymbolId, String)>) -> Result<Self, SymbolTableError> {
        let mut by_id = HashMap::with_capacity(entries.len());
        let mut by_command = HashMap::with_capacity(entries.len());
        for (i, (id, cmd)) in entries.iter().enumerate() {
            if by_id.insert(*id, i).is_some() {
                return Err(SymbolTableError::DuplicateId(*id));
            }
            if by_command.insert(cmd.clone(), i).is_some() {
                return Err(SymbolTableError::DuplicateCommand(cmd.clone()));
            }
        }
        Ok(SymbolTable {
            entries,
            by_id,
            by_command,
        })
    }

    /// Assigns ids `0..n` to commands in the given order.
    pub fn from_commands<S: AsRef<str>>(commands: &[S]) -> Result<Self, SymbolTableError> {
        Self::new(
            commands
                .iter()
                .enumerate()
                .map(|(i, c)| (SymbolId(i as u32), c.as_ref().to_string()))
                .collect(),
        )
    }

    /// Ids `0..n` with placeholder commands `s0`, `s1`, ...
    pub fn anonymous(n: usize) -> Self {
        let commands: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        Self::from_commands(&commands).expect("generated commands are unique")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (SymbolId, &str)> {
        self.entries.iter().map(|(id, c)| (*id, c.as_str()))
    }

    pub fn ids(&self) -> impl Iterator<Item = SymbolId> + '_ {
        self.entries.iter().map(|(id, _)| *id)
    }

    pub fn id_at(&self, index: usize) -> Option<SymbolId> {
        self.entries.get(index).map(|(id, _)| *id)
    }

    pub fn index_of(&self, id: SymbolId) -> Option<usize> {
        self.by_id.get(&id).copied()
    }

    pub fn command(&self, id: SymbolId) -> Option<&str> {
        self.index_of(id).map(|i| self.entries[i].1.as_str())
    }

    pub fn id_of_command(&self, command: &str) -> Option<SymbolId> {
        self.by_command.get(command).map(|&i| self.entries[i].0)
    }
}

impl Serialize for SymbolTable {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let list: Vec<SymbolEntry> = self
            .entries
            .iter()
            .map(|(id, command)| SymbolEntry {
                id: *id,
                command: command.clone(),
            })
            .collect();
        list.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SymbolTable {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let list = Vec::<SymbolEntry>::deserialize(deserializer)?;
        SymbolTable::new(list.into_iter().map(|e| (e.id, e.command)).collect())
            .map_err(serde::de::Error::custom)
    }
}
