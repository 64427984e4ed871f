//! Noise reduction: duplicate and dot handling, wild points, stroke merging,
//! smoothing, dehooking and polyline simplification.

use std::collections::HashSet;

use super::PreprocessError;
use crate::recording::{Point, Recording, Stroke};

/// Drops every point whose timestamp already occurred earlier in the
/// recording. Strokes left empty disappear.
pub fn remove_duplicate_time(rec: &Recording) -> Recording {
    let mut seen = HashSet::new();
    let strokes: Vec<Stroke> = rec
        .strokes
        .iter()
        .map(|s| {
            s.iter()
                .filter(|p| seen.insert(p.t.to_bits()))
                .copied()
                .collect::<Stroke>()
        })
        .filter(|s| !s.is_empty())
        .collect();
    rec.with_strokes(strokes)
}

/// Removes single-point strokes unless the recording consists only of them.
pub fn remove_dots(rec: &Recording) -> Recording {
    if rec.strokes.iter().all(|s| s.len() == 1) {
        return rec.clone();
    }
    rec.with_strokes(rec.strokes.iter().filter(|s| s.len() > 1).cloned().collect())
}

/// Replaces every stroke whose points all lie closer than `threshold` to each
/// other by a single point at their mean.
pub fn dot_reduction(rec: &Recording, threshold: f64) -> Recording {
    let strokes = rec
        .strokes
        .iter()
        .map(|s| {
            if s.len() < 2 || max_pairwise_distance(s) >= threshold {
                return s.clone();
            }
            let n = s.len() as f64;
            let x = s.iter().map(|p| p.x).sum::<f64>() / n;
            let y = s.iter().map(|p| p.y).sum::<f64>() / n;
            let t = (s.iter().map(|p| p.t).sum::<f64>() / n).floor();
            vec![Point::new(x, y, t)]
        })
        .collect();
    rec.with_strokes(strokes)
}

fn max_pairwise_distance(s: &[Point]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in s.iter().enumerate() {
        for b in &s[i + 1..] {
            best = best.max(a.dist(b));
        }
    }
    best
}

/// Removes points reached with a speed above `threshold` (pixels per
/// millisecond) from the previous surviving point. The first point of each
/// stroke always survives.
pub fn wild_point_filter(rec: &Recording, threshold: f64) -> Recording {
    let strokes = rec
        .strokes
        .iter()
        .map(|s| {
            let mut out: Stroke = vec![s[0]];
            for p in &s[1..] {
                let prev = out[out.len() - 1];
                let d = prev.dist(p);
                let dt = p.t - prev.t;
                let speed = if d == 0.0 {
                    0.0
                } else if dt <= 0.0 {
                    f64::INFINITY
                } else {
                    d / dt
                };
                if speed <= threshold {
                    out.push(*p);
                }
            }
            out
        })
        .collect();
    rec.with_strokes(strokes)
}

/// Joins a stroke onto its predecessor when the pen went down less than
/// `minimum_distance` from where it was lifted. Merges cascade.
pub fn stroke_connect(rec: &Recording, minimum_distance: f64) -> Recording {
    let mut out: Vec<Stroke> = Vec::with_capacity(rec.strokes.len());
    for s in &rec.strokes {
        match out.last_mut() {
            Some(prev) if prev[prev.len() - 1].dist(&s[0]) < minimum_distance => {
                prev.extend_from_slice(s)
            }
            _ => out.push(s.clone()),
        }
    }
    rec.with_strokes(out)
}

/// Replaces every interior point by the weighted mean of itself and its two
/// original neighbours. `theta` is normalized to sum 1; x, y and time are all
/// averaged. Endpoints and strokes of at most two points are unchanged.
pub fn weighted_average_smoothing(rec: &Recording, theta: [f64; 3]) -> Result<Recording, PreprocessError> {
    if theta.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(PreprocessError::OutOfRange {
            step: "WeightedAverageSmoothing",
            param: "theta",
            value: format!("{theta:?}"),
            range: "[0, 1]",
        });
    }
    let sum: f64 = theta.iter().sum();
    if sum <= 0.0 {
        return Err(PreprocessError::Invalid {
            step: "WeightedAverageSmoothing",
            reason: "theta must not be all zero".into(),
        });
    }
    let w = theta.map(|t| t / sum);
    let strokes = rec
        .strokes
        .iter()
        .map(|s| {
            if s.len() <= 2 {
                return s.clone();
            }
            let mut out = s.clone();
            for i in 1..s.len() - 1 {
                let (a, b, c) = (s[i - 1], s[i], s[i + 1]);
                out[i] = Point {
                    x: w[0] * a.x + w[1] * b.x + w[2] * c.x,
                    y: w[0] * a.y + w[1] * b.y + w[2] * c.y,
                    t: w[0] * a.t + w[1] * b.t + w[2] * c.t,
                    pen_down: b.pen_down,
                };
            }
            out
        })
        .collect();
    Ok(rec.with_strokes(strokes))
}

/// Angle in degrees at `b` for the path `a -> b -> c`.
pub type AngleFn = fn(&Point, &Point, &Point) -> f64;

/// Angle function used by [`dehook`].
pub const DEHOOK_ANGLE: AngleFn = turning_angle_deg;

/// Change of direction at `b` in degrees, in `[0, 180]`. 0 means the path
/// continues straight on; a zero-length leg counts as no turn.
pub fn turning_angle_deg(a: &Point, b: &Point, c: &Point) -> f64 {
    let (ux, uy) = (b.x - a.x, b.y - a.y);
    let (vx, vy) = (c.x - b.x, c.y - b.y);
    if (ux == 0.0 && uy == 0.0) || (vx == 0.0 && vy == 0.0) {
        return 0.0;
    }
    let cross = ux * vy - uy * vx;
    let dot = ux * vx + uy * vy;
    cross.abs().atan2(dot).to_degrees()
}

/// Strips hooks from both ends of every stroke: while the direction change at
/// the second-to-last point reaches `angle_threshold`, the last point goes.
/// The same is then done from the start. Strokes below three points are kept.
pub fn dehook(rec: &Recording, angle_threshold: f64) -> Recording {
    dehook_with(rec, angle_threshold, DEHOOK_ANGLE)
}

pub fn dehook_with(rec: &Recording, angle_threshold: f64, angle: AngleFn) -> Recording {
    let strokes = rec
        .strokes
        .iter()
        .map(|s| {
            let mut s = s.clone();
            dehook_tail(&mut s, angle_threshold, angle);
            s.reverse();
            dehook_tail(&mut s, angle_threshold, angle);
            s.reverse();
            s
        })
        .collect();
    rec.with_strokes(strokes)
}

fn dehook_tail(s: &mut Stroke, threshold: f64, angle: AngleFn) {
    while s.len() >= 3 {
        let n = s.len();
        if angle(&s[n - 3], &s[n - 2], &s[n - 1]) >= threshold {
            s.pop();
        } else {
            break;
        }
    }
}

/// Simplifies every stroke with the Douglas-Peucker algorithm.
pub fn douglas_peucker(rec: &Recording, epsilon: f64) -> Recording {
    let strokes = rec
        .strokes
        .iter()
        .map(|s| douglas_peucker_indices(s, epsilon).into_iter().map(|i| s[i]).collect())
        .collect();
    rec.with_strokes(strokes)
}

/// Indices of the points Douglas-Peucker keeps, ascending. The endpoints are
/// always kept; a point is kept when it is more than `epsilon` away from the
/// line through the enclosing kept points.
pub fn douglas_peucker_indices(stroke: &[Point], epsilon: f64) -> Vec<usize> {
    if stroke.len() <= 2 {
        return (0..stroke.len()).collect();
    }
    let mut keep = vec![false; stroke.len()];
    keep[0] = true;
    keep[stroke.len() - 1] = true;
    let mut stack = vec![(0, stroke.len() - 1)];
    while let Some((lo, hi)) = stack.pop() {
        if hi <= lo + 1 {
            continue;
        }
        let (mut idx, mut dmax) = (lo, 0.0);
        for i in lo + 1..hi {
            let d = line_distance(&stroke[i], &stroke[lo], &stroke[hi]);
            if d > dmax {
                idx = i;
                dmax = d;
            }
        }
        if dmax > epsilon {
            keep[idx] = true;
            stack.push((lo, idx));
            stack.push((idx, hi));
        }
    }
    keep.iter().enumerate().filter(|(_, k)| **k).map(|(i, _)| i).collect()
}

/// Distance from `p` to the infinite line through `a` and `b`, or to `a` when
/// the two coincide.
fn line_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return p.dist(a);
    }
    (dy * (p.x - a.x) - dx * (p.y - a.y)).abs() / len
}
