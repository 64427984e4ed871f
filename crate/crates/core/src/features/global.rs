//! Features describing the recording or whole strokes.

use crate::recording::{bounding_box, Point, Recording};

pub fn stroke_count(rec: &Recording) -> f64 {
    rec.strokes.len() as f64
}

fn path_length(stroke: &[Point]) -> f64 {
    stroke
        .windows(2)
        .filter(|w| w[0].pen_down && w[1].pen_down)
        .map(|w| w[0].dist(&w[1]))
        .sum()
}

/// Total length of all drawn segments. Segments touching a pen-up point are
/// not ink.
pub fn ink(rec: &Recording) -> f64 {
    rec.strokes.iter().map(|s| path_length(s)).sum()
}

pub fn aspect_ratio(rec: &Recording) -> f64 {
    let b = bounding_box(rec);
    (b.width() + 0.01) / (b.height() + 0.01)
}

pub fn width(rec: &Recording) -> f64 {
    bounding_box(rec).width()
}

pub fn height(rec: &Recording) -> f64 {
    bounding_box(rec).height()
}

/// Milliseconds between the earliest and latest point.
pub fn time(rec: &Recording) -> f64 {
    let (lo, hi) = rec
        .points()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.t), hi.max(p.t)));
    hi - lo
}

pub fn center_of_mass(rec: &Recording) -> [f64; 2] {
    let (x, y) = crate::augment::center_of_mass(rec);
    [x, y]
}

/// Mean `(x, y)` of each of the first `strokes` strokes; missing strokes are 0.
pub fn stroke_center(rec: &Recording, strokes: usize) -> Vec<f64> {
    (0..strokes)
        .flat_map(|i| match rec.strokes.get(i) {
            Some(s) => {
                let n = s.len() as f64;
                [
                    s.iter().map(|p| p.x).sum::<f64>() / n,
                    s.iter().map(|p| p.y).sum::<f64>() / n,
                ]
            }
            None => [0.0, 0.0],
        })
        .collect()
}

/// Stroke height divided by path length for the first `strokes` strokes.
/// Zero-length and missing strokes give 0.
pub fn re_curvature(rec: &Recording, strokes: usize) -> Vec<f64> {
    (0..strokes)
        .map(|i| match rec.strokes.get(i) {
            Some(s) => {
                let len = path_length(s);
                if len == 0.0 {
                    return 0.0;
                }
                let (lo, hi) = s
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
                (hi - lo) / len
            }
            None => 0.0,
        })
        .collect()
}

fn orient(a: &Point, b: &Point, c: &Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// True when the open segments cross at a single interior point. Touching
/// endpoints and collinear overlaps do not count.
fn segments_cross(a: &Point, b: &Point, c: &Point, d: &Point) -> bool {
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

fn crossings(s: &[Point], t: &[Point], same: bool) -> usize {
    let mut n = 0;
    for i in 0..s.len().saturating_sub(1) {
        let start = if same { i + 2 } else { 0 };
        for j in start..t.len().saturating_sub(1) {
            if segments_cross(&s[i], &s[i + 1], &t[j], &t[j + 1]) {
                n += 1;
            }
        }
    }
    n
}

/// Upper triangle, diagonal included, of the matrix of segment crossings
/// between the first `strokes` strokes, row by row.
pub fn stroke_intersections(rec: &Recording, strokes: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(strokes * (strokes + 1) / 2);
    for i in 0..strokes {
        for j in i..strokes {
            let v = match (rec.strokes.get(i), rec.strokes.get(j)) {
                (Some(a), Some(b)) => crossings(a, b, i == j),
                _ => 0,
            };
            out.push(v as f64);
        }
    }
    out
}
