//! Size normalization and resampling.

use serde::{Deserialize, Serialize};

use crate::recording::{bounding_box, Point, Recording, Stroke};

/// Where `scale_and_shift` places the scaled recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShiftVariant {
    /// The dimension that determined the scale factor starts at 0; the other
    /// one is centered on 0.
    I1,
    /// No centering: the recording starts at (0, 0).
    I2,
    /// Both dimensions centered on 0.
    I3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Linear,
    Cubic,
}

pub fn scale_and_shift(rec: &Recording, variant: ShiftVariant) -> Recording {
    scale_and_shift_to(rec, variant, 1.0, 1.0)
}

/// Scales the recording preserving its aspect ratio so that it fits a
/// `max_width` x `max_height` box, shifts it according to `variant`, and makes
/// time relative to the first point.
///
/// A zero-extent dimension does not constrain the factor; a dot keeps factor 1.
pub fn scale_and_shift_to(
    rec: &Recording,
    variant: ShiftVariant,
    max_width: f64,
    max_height: f64,
) -> Recording {
    let bb = bounding_box(rec);
    let (width, height) = (bb.width(), bb.height());
    let factor_x = if width > 0.0 { max_width / width } else { f64::INFINITY };
    let factor_y = if height > 0.0 { max_height / height } else { f64::INFINITY };
    let factor = match factor_x.min(factor_y) {
        f if f.is_finite() => f,
        _ => 1.0,
    };
    let (scaled_w, scaled_h) = (width * factor, height * factor);
    // the x axis is the "bigger" one when it determined the factor
    let x_is_major = factor_x <= factor_y;
    let (add_x, add_y) = match variant {
        ShiftVariant::I2 => (0.0, 0.0),
        ShiftVariant::I1 if x_is_major => (0.0, -scaled_h / 2.0),
        ShiftVariant::I1 => (-scaled_w / 2.0, 0.0),
        ShiftVariant::I3 => (-scaled_w / 2.0, -scaled_h / 2.0),
    };
    let t_min = rec.points().map(|p| p.t).fold(f64::INFINITY, f64::min);
    let strokes = rec
        .strokes
        .iter()
        .map(|s| {
            s.iter()
                .map(|p| Point {
                    x: (p.x - bb.x_min) * factor + add_x,
                    y: (p.y - bb.y_min) * factor + add_y,
                    t: p.t - t_min,
                    pen_down: p.pen_down,
                })
                .collect()
        })
        .collect();
    rec.with_strokes(strokes)
}

/// Resamples the whole recording into one stroke of `number` points spaced
/// evenly in time from the first to the last timestamp. Points that fall
/// between strokes are interpolated across the gap and flagged
/// `pen_down = false`.
pub fn space_evenly(rec: &Recording, number: usize) -> Recording {
    let number = number.max(2);
    let all: Vec<Point> = rec.points().copied().collect();
    let t_start = all[0].t;
    let t_end = all.iter().map(|p| p.t).fold(f64::NEG_INFINITY, f64::max);
    if t_end <= t_start {
        let first = Point {
            pen_down: true,
            ..all[0]
        };
        return rec.with_strokes(vec![vec![first; number]]);
    }
    let spans: Vec<(f64, f64)> = rec
        .strokes
        .iter()
        .map(|s| (s[0].t, s[s.len() - 1].t))
        .collect();
    let mut out = Vec::with_capacity(number);
    let mut seg = 0;
    for k in 0..number {
        let t = if k + 1 == number {
            t_end
        } else {
            t_start + (t_end - t_start) * k as f64 / (number - 1) as f64
        };
        while seg + 2 < all.len() && all[seg + 1].t < t {
            seg += 1;
        }
        let (x, y) = lerp_segment(&all, seg, t);
        let pen_down = spans.iter().any(|&(a, b)| a <= t && t <= b);
        out.push(Point { x, y, t, pen_down });
    }
    rec.with_strokes(vec![out])
}

fn lerp_segment(points: &[Point], seg: usize, t: f64) -> (f64, f64) {
    if points.len() == 1 {
        return (points[0].x, points[0].y);
    }
    let (a, b) = (points[seg], points[seg + 1]);
    let dt = b.t - a.t;
    if dt <= 0.0 {
        return if t <= a.t { (a.x, a.y) } else { (b.x, b.y) };
    }
    let s = ((t - a.t) / dt).clamp(0.0, 1.0);
    (a.x + s * (b.x - a.x), a.y + s * (b.y - a.y))
}

/// Resamples every stroke with at least four points to `number` points
/// equidistant in time between its first and last timestamp. Shorter strokes
/// pass through unchanged.
pub fn space_evenly_per_stroke(rec: &Recording, number: usize, kind: Interpolation) -> Recording {
    space_evenly_per_stroke_diag(rec, number, kind).0
}

/// Like [`space_evenly_per_stroke`], also returning the indices of strokes
/// where cubic interpolation fell back to linear (fewer than four distinct,
/// strictly increasing timestamps).
pub fn space_evenly_per_stroke_diag(
    rec: &Recording,
    number: usize,
    kind: Interpolation,
) -> (Recording, Vec<usize>) {
    let number = number.max(2);
    let mut fallbacks = Vec::new();
    let strokes = rec
        .strokes
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if s.len() < 4 {
                return s.clone();
            }
            match kind {
                Interpolation::Linear => resample_linear(s, number),
                Interpolation::Cubic => match resample_cubic(s, number) {
                    Some(r) => r,
                    None => {
                        tracing::debug!(stroke = i, "cubic resampling fell back to linear");
                        fallbacks.push(i);
                        resample_linear(s, number)
                    }
                },
            }
        })
        .collect();
    (rec.with_strokes(strokes), fallbacks)
}

fn sample_times(t0: f64, t1: f64, number: usize) -> impl Iterator<Item = f64> {
    (0..number).map(move |k| {
        if k + 1 == number {
            t1
        } else {
            t0 + (t1 - t0) * k as f64 / (number - 1) as f64
        }
    })
}

fn resample_linear(stroke: &Stroke, number: usize) -> Stroke {
    let t0 = stroke[0].t;
    let t1 = stroke[stroke.len() - 1].t;
    let mut seg = 0;
    sample_times(t0, t1, number)
        .map(|t| {
            while seg + 2 < stroke.len() && stroke[seg + 1].t < t {
                seg += 1;
            }
            let (x, y) = lerp_segment(stroke, seg, t);
            Point::new(x, y, t)
        })
        .collect()
}

fn resample_cubic(stroke: &Stroke, number: usize) -> Option<Stroke> {
    let ts: Vec<f64> = stroke.iter().map(|p| p.t).collect();
    if ts.windows(2).any(|w| w[1] <= w[0]) {
        return None;
    }
    let xs: Vec<f64> = stroke.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = stroke.iter().map(|p| p.y).collect();
    let fx = NaturalCubicSpline::fit(&ts, &xs);
    let fy = NaturalCubicSpline::fit(&ts, &ys);
    let (t0, t1) = (ts[0], ts[ts.len() - 1]);
    Some(
        sample_times(t0, t1, number)
            .map(|t| Point::new(fx.eval(t), fy.eval(t), t))
            .collect(),
    )
}

/// Interpolating cubic spline with zero second derivative at both ends.
struct NaturalCubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl NaturalCubicSpline {
    /// `knots` must be strictly increasing with at least two entries.
    fn fit(knots: &[f64], values: &[f64]) -> Self {
        let n = knots.len();
        let mut second = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for the interior second derivatives (Thomas algorithm)
            let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            let mut upper = vec![0.0; m];
            for i in 0..m {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                upper[i] = h[i + 1];
                rhs[i] = 6.0
                    * ((values[i + 2] - values[i + 1]) / h[i + 1] - (values[i + 1] - values[i]) / h[i]);
            }
            for i in 1..m {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            second[m] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                second[i + 1] = (rhs[i] - upper[i] * second[i + 2]) / diag[i];
            }
        }
        NaturalCubicSpline {
            knots: knots.to_vec(),
            values: values.to_vec(),
            second,
        }
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.knots.len();
        let i = match self.knots.partition_point(|&k| k <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (a, b) = (self.knots[i], self.knots[i + 1]);
        let h = b - a;
        let u = (b - t) / h;
        let v = (t - a) / h;
        u * self.values[i]
            + v * self.values[i + 1]
            + ((u * u * u - u) * self.second[i] + (v * v * v - v) * self.second[i + 1]) * h * h / 6.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(strokes: Vec<Vec<(f64, f64, f64)>>) -> Recording {
        Recording::new(
            strokes
                .into_iter()
                .map(|s| s.into_iter().map(|(x, y, t)| Point::new(x, y, t)).collect())
                .collect(),
        )
        .unwrap()
    }

    fn extent(r: &Recording) -> (f64, f64, f64, f64) {
        let b = bounding_box(r);
        (b.x_min, b.x_max, b.y_min, b.y_max)
    }

    fn close(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64)) -> bool {
        (a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9 && (a.2 - b.2).abs() < 1e-9 && (a.3 - b.3).abs() < 1e-9
    }

    // width 0.8, height 1.0: the box whose variants land on the documented targets
    fn box_08_by_1() -> Recording {
        rec(vec![vec![(10.0, 20.0, 100.0), (10.8, 21.0, 150.0), (10.4, 20.5, 175.0)]])
    }

    #[test]
    fn variant_targets() {
        let r = box_08_by_1();
        assert!(close(extent(&scale_and_shift(&r, ShiftVariant::I1)), (-0.4, 0.4, 0.0, 1.0)));
        assert!(close(extent(&scale_and_shift(&r, ShiftVariant::I2)), (0.0, 0.8, 0.0, 1.0)));
        assert!(close(extent(&scale_and_shift(&r, ShiftVariant::I3)), (-0.4, 0.4, -0.5, 0.5)));
    }

    #[test]
    fn time_relativized() {
        let out = scale_and_shift(&box_08_by_1(), ShiftVariant::I1);
        let ts: Vec<f64> = out.points().map(|p| p.t).collect();
        assert_eq!(ts, vec![0.0, 50.0, 75.0]);
    }

    #[test]
    fn degenerate_boxes() {
        let dot = rec(vec![vec![(5.0, 7.0, 3.0)]]);
        for v in [ShiftVariant::I1, ShiftVariant::I2, ShiftVariant::I3] {
            let p = scale_and_shift(&dot, v).strokes[0][0];
            assert_eq!((p.x, p.y, p.t), (0.0, 0.0, 0.0));
        }
        // horizontal line: width determines the factor, height stays 0
        let line = rec(vec![vec![(0.0, 3.0, 0.0), (4.0, 3.0, 1.0)]]);
        let out = scale_and_shift(&line, ShiftVariant::I1);
        assert!(close(extent(&out), (0.0, 1.0, 0.0, 0.0)));
        let out = scale_and_shift(&line, ShiftVariant::I3);
        assert!(close(extent(&out), (-0.5, 0.5, 0.0, 0.0)));
    }

    #[test]
    fn larger_target_box() {
        let out = scale_and_shift_to(&box_08_by_1(), ShiftVariant::I3, 2.0, 2.0);
        assert!(close(extent(&out), (-0.8, 0.8, -1.0, 1.0)));
    }

    #[test]
    fn space_evenly_single_stroke() {
        let r = rec(vec![vec![(0.0, 0.0, 0.0), (10.0, 0.0, 10.0)]]);
        let out = space_evenly(&r, 3);
        let pts: Vec<(f64, f64, f64)> = out.strokes[0].iter().map(|p| (p.x, p.y, p.t)).collect();
        assert_eq!(pts, vec![(0.0, 0.0, 0.0), (5.0, 0.0, 5.0), (10.0, 0.0, 10.0)]);
        let out = space_evenly(&r, 2);
        assert_eq!(out.strokes[0].len(), 2);
        assert_eq!((out.strokes[0][1].x, out.strokes[0][1].t), (10.0, 10.0));
    }

    #[test]
    fn space_evenly_flags_gap_points() {
        // stroke A covers t in [0, 10], gap (10, 20), stroke B covers [20, 30]
        let r = rec(vec![
            vec![(0.0, 0.0, 0.0), (10.0, 0.0, 10.0)],
            vec![(10.0, 10.0, 20.0), (0.0, 10.0, 30.0)],
        ]);
        let out = space_evenly(&r, 7); // t = 0, 5, 10, 15, 20, 25, 30
        let flags: Vec<bool> = out.strokes[0].iter().map(|p| p.pen_down).collect();
        assert_eq!(flags, vec![true, true, true, false, true, true, true]);
        let gap = out.strokes[0][3];
        assert_eq!((gap.x, gap.y, gap.t), (10.0, 5.0, 15.0));
    }

    #[test]
    fn space_evenly_zero_duration() {
        let r = rec(vec![vec![(1.0, 2.0, 5.0), (3.0, 4.0, 5.0)]]);
        let out = space_evenly(&r, 4);
        assert!(out.strokes[0].iter().all(|p| (p.x, p.y, p.pen_down) == (1.0, 2.0, true)));
    }

    #[test]
    fn short_strokes_pass_through() {
        let r = rec(vec![vec![(0.0, 0.0, 0.0), (1.0, 5.0, 4.0), (3.0, 2.0, 9.0)]]);
        for kind in [Interpolation::Linear, Interpolation::Cubic] {
            assert_eq!(space_evenly_per_stroke(&r, 20, kind), r);
        }
    }

    #[test]
    fn linear_resampling_on_a_line() {
        // points on y = 2x at uneven times; x(t) is linear in t by construction
        let r = rec(vec![vec![(0.0, 0.0, 0.0), (1.0, 2.0, 1.0), (3.0, 6.0, 3.0), (4.0, 8.0, 4.0), (8.0, 16.0, 8.0)]]);
        let out = space_evenly_per_stroke(&r, 5, Interpolation::Linear);
        for (k, p) in out.strokes[0].iter().enumerate() {
            let t = 2.0 * k as f64;
            assert!((p.t - t).abs() < 1e-12);
            assert!((p.x - t).abs() < 1e-12 && (p.y - 2.0 * t).abs() < 1e-12);
        }
    }

    #[test]
    fn two_samples_are_endpoints() {
        let r = rec(vec![vec![(0.0, 1.0, 0.0), (5.0, 2.0, 3.0), (2.0, 7.0, 6.0), (9.0, 9.0, 10.0)]]);
        for kind in [Interpolation::Linear, Interpolation::Cubic] {
            let out = space_evenly_per_stroke(&r, 2, kind);
            let s = &out.strokes[0];
            assert_eq!(s.len(), 2);
            assert!((s[0].x - 0.0).abs() < 1e-12 && (s[0].y - 1.0).abs() < 1e-12);
            assert!((s[1].x - 9.0).abs() < 1e-12 && (s[1].y - 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_reproduces_knots_and_falls_back() {
        let r = rec(vec![vec![(0.0, 0.0, 0.0), (1.0, 1.0, 1.0), (4.0, 2.0, 2.0), (9.0, 3.0, 3.0)]]);
        let (out, fb) = space_evenly_per_stroke_diag(&r, 4, Interpolation::Cubic);
        assert!(fb.is_empty());
        for (a, b) in out.strokes[0].iter().zip(&r.strokes[0]) {
            assert!((a.x - b.x).abs() < 1e-12 && (a.y - b.y).abs() < 1e-12);
        }
        // y is linear in t, so the natural spline reproduces it everywhere
        let (out, _) = space_evenly_per_stroke_diag(&r, 7, Interpolation::Cubic);
        for p in &out.strokes[0] {
            assert!((p.y - p.t).abs() < 1e-12);
        }
        let repeated = rec(vec![vec![(0.0, 0.0, 0.0), (1.0, 1.0, 1.0), (4.0, 2.0, 1.0), (9.0, 3.0, 3.0)]]);
        let (out, fb) = space_evenly_per_stroke_diag(&repeated, 6, Interpolation::Cubic);
        assert_eq!(fb, vec![0]);
        assert_eq!(out.strokes[0].len(), 6);
    }

    fn arb_recording() -> impl Strategy<Value = Recording> {
        prop::collection::vec(
            prop::collection::vec((-500.0f64..500.0, -500.0f64..500.0, 1.0f64..50.0), 1..15),
            1..5,
        )
        .prop_map(|strokes| {
            let mut t = 0.0;
            let strokes = strokes
                .into_iter()
                .map(|s| {
                    s.into_iter()
                        .map(|(x, y, dt)| {
                            t += dt.round();
                            Point::new(x, y, t)
                        })
                        .collect()
                })
                .collect();
            Recording::new(strokes).unwrap()
        })
    }

    proptest! {
        #[test]
        fn scale_preserves_aspect_ratio(r in arb_recording(), v in prop_oneof![Just(ShiftVariant::I1), Just(ShiftVariant::I2), Just(ShiftVariant::I3)]) {
            let before = bounding_box(&r);
            prop_assume!(before.width() > 1e-6 && before.height() > 1e-6);
            let after = bounding_box(&scale_and_shift(&r, v));
            let ratio_before = before.width() / before.height();
            let ratio_after = after.width() / after.height();
            prop_assert!((ratio_before - ratio_after).abs() <= 1e-9 * ratio_before.max(1.0));
            prop_assert!((after.width().max(after.height()) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn scale_is_idempotent(r in arb_recording(), v in prop_oneof![Just(ShiftVariant::I1), Just(ShiftVariant::I2), Just(ShiftVariant::I3)]) {
            let once = scale_and_shift(&r, v);
            let twice = scale_and_shift(&once, v);
            for (a, b) in once.points().zip(twice.points()) {
                prop_assert!((a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9 && a.t == b.t);
            }
        }

        #[test]
        fn resampled_strokes_have_n_evenly_timed_points(r in arb_recording(), n in 2usize..40) {
            let out = space_evenly_per_stroke(&r, n, Interpolation::Linear);
            for (orig, s) in r.strokes.iter().zip(&out.strokes) {
                if orig.len() < 4 {
                    prop_assert_eq!(orig, s);
                    continue;
                }
                prop_assert_eq!(s.len(), n);
                let step = s[1].t - s[0].t;
                for w in s.windows(2) {
                    prop_assert!((w[1].t - w[0].t - step).abs() < 1e-9);
                }
            }
        }
    }
}
