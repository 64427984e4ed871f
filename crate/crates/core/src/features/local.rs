//! Point coordinates and per-point direction and curvature.

use super::{LocalWindow, PointCoordinates};
use crate::recording::{Point, Recording};

/// Slots of a stroke/point window over per-stroke values: the first `blocks`
/// strokes, each truncated to `points_per_stroke`. `None` marks a missing slot.
fn windowed<T: Copy>(
    per_stroke: &[Vec<T>],
    blocks: usize,
    points_per_stroke: usize,
) -> impl Iterator<Item = Option<T>> + '_ {
    (0..blocks).flat_map(move |s| {
        (0..points_per_stroke).map(move |p| per_stroke.get(s).and_then(|st| st.get(p)).copied())
    })
}

/// Coordinates of the first points of the first strokes, stroke-major,
/// `(x, y)` or `(x, y, pen_down)` per point. Missing values are filled.
pub fn constant_point_coordinates(rec: &Recording, p: &PointCoordinates) -> Vec<f64> {
    let per_point = if p.pen_down { 3 } else { 2 };
    let mut out = Vec::with_capacity(per_point * p.points_per_stroke * p.strokes.max(1));
    if p.strokes == 0 {
        let mut it = rec.points();
        for _ in 0..p.points_per_stroke {
            push_point(&mut out, it.next(), p.pen_down, p.fill_empty_with);
        }
    } else {
        for s in 0..p.strokes {
            let stroke = rec.strokes.get(s);
            for i in 0..p.points_per_stroke {
                push_point(&mut out, stroke.and_then(|st| st.get(i)), p.pen_down, p.fill_empty_with);
            }
        }
    }
    out
}

fn push_point(out: &mut Vec<f64>, point: Option<&Point>, pen_down: bool, fill: f64) {
    match point {
        Some(pt) => {
            out.push(pt.x);
            out.push(pt.y);
            if pen_down {
                out.push(if pt.pen_down { 1.0 } else { 0.0 });
            }
        }
        None => {
            out.extend(std::iter::repeat_n(fill, if pen_down { 3 } else { 2 }));
        }
    }
}

/// `(x, y)` of the first `n` points of the flattened recording.
pub fn first_n_points(rec: &Recording, n: usize, fill: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * n);
    let mut it = rec.points();
    for _ in 0..n {
        push_point(&mut out, it.next(), false, fill);
    }
    out
}

/// `(cos θ, sin θ)` of the writing direction at every point of a stroke, from
/// central differences. Endpoints have no direction; coincident neighbours give
/// `(0, 0)`.
pub fn point_directions(stroke: &[Point]) -> Vec<Option<(f64, f64)>> {
    (0..stroke.len())
        .map(|i| {
            if i == 0 || i + 1 >= stroke.len() {
                return None;
            }
            let dx = stroke[i + 1].x - stroke[i - 1].x;
            let dy = stroke[i + 1].y - stroke[i - 1].y;
            let ds = dx.hypot(dy);
            Some(if ds == 0.0 { (0.0, 0.0) } else { (dx / ds, dy / ds) })
        })
        .collect()
}

/// `(cos φ, sin φ)` with φ = θ(i+1) − θ(i−1), defined where both neighbours
/// have a direction.
fn point_curvatures(stroke: &[Point]) -> Vec<Option<(f64, f64)>> {
    let dirs = point_directions(stroke);
    (0..stroke.len())
        .map(|i| {
            let prev = if i == 0 { None } else { dirs[i - 1] };
            let next = dirs.get(i + 1).copied().flatten();
            let ((cm, sm), (cp, sp)) = (prev?, next?);
            Some((cp * cm + sp * sm, sp * cm - cp * sm))
        })
        .collect()
}

fn local_vector(rec: &Recording, w: &LocalWindow, f: fn(&[Point]) -> Vec<Option<(f64, f64)>>) -> Vec<f64> {
    let per_stroke: Vec<Vec<Option<(f64, f64)>>> = if w.strokes == 0 {
        let flat: Vec<Point> = rec.points().copied().collect();
        vec![f(&flat)]
    } else {
        rec.strokes.iter().take(w.strokes).map(|s| f(s)).collect()
    };
    windowed(&per_stroke, w.strokes.max(1), w.points_per_stroke)
        .flat_map(|slot| match slot.flatten() {
            Some((c, s)) => [c, s],
            None => [w.fill_empty_with; 2],
        })
        .collect()
}

pub fn direction(rec: &Recording, w: &LocalWindow) -> Vec<f64> {
    local_vector(rec, w, point_directions)
}

pub fn curvature(rec: &Recording, w: &LocalWindow) -> Vec<f64> {
    local_vector(rec, w, point_curvatures)
}
