//! Synthetic labeled recordings drawn from five geometric templates.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::recording::{Point, Recording, Stroke, SymbolId, SymbolTable};

/// Commands of the synthetic symbols, in id order.
pub const SYNTH_COMMANDS: [&str; 5] = ["-", "o", "x", "\\Delta", "+"];

pub fn synth_symbols() -> SymbolTable {
    SymbolTable::from_commands(&SYNTH_COMMANDS).expect("distinct commands")
}

/// Template polylines in a unit box, y pointing down.
fn template(class: usize) -> Vec<Vec<(f64, f64)>> {
    match class {
        0 => vec![vec![(0.0, 0.5), (1.0, 0.5)]],
        1 => vec![(0..=24)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / 24.0;
                (0.5 + 0.5 * a.cos(), 0.5 - 0.5 * a.sin())
            })
            .collect()],
        2 => vec![vec![(0.0, 0.0), (1.0, 1.0)], vec![(1.0, 0.0), (0.0, 1.0)]],
        3 => vec![vec![(0.5, 0.0), (0.0, 1.0), (1.0, 1.0), (0.5, 0.0)]],
        4 => vec![vec![(0.0, 0.5), (1.0, 0.5)], vec![(0.5, 0.0), (0.5, 1.0)]],
        _ => panic!("no template {class}"),
    }
}

/// Points along a polyline, evenly spaced by arc length.
fn sample_polyline(poly: &[(f64, f64)], n: usize) -> Vec<(f64, f64)> {
    let seg: Vec<f64> = poly
        .windows(2)
        .map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt())
        .collect();
    let total: f64 = seg.iter().sum();
    (0..n)
        .map(|k| {
            let mut s = total * k as f64 / (n - 1) as f64;
            for (i, &len) in seg.iter().enumerate() {
                if s <= len || i == seg.len() - 1 {
                    let u = if len > 0.0 { (s / len).min(1.0) } else { 0.0 };
                    let (a, b) = (poly[i], poly[i + 1]);
                    return (a.0 + u * (b.0 - a.0), a.1 + u * (b.1 - a.1));
                }
                s -= len;
            }
            poly[poly.len() - 1]
        })
        .collect()
}

/// One noisy drawing of symbol `class`: random size, aspect, rotation
/// (up to 10 degrees), position, point count and jitter.
pub fn synth_recording(class: usize, rng: &mut impl Rng) -> Recording {
    let size = rng.gen_range(40.0..120.0);
    let aspect = rng.gen_range(0.8..1.25);
    let angle = rng.gen_range(-10.0f64..10.0).to_radians();
    let (ox, oy) = (rng.gen_range(0.0..400.0), rng.gen_range(0.0..300.0));
    let (sin, cos) = angle.sin_cos();
    let mut t = rng.gen_range(0.0..1e6f64).floor();
    let strokes: Vec<Stroke> = template(class)
        .iter()
        .map(|poly| {
            let n = rng.gen_range(12..30);
            let pts = sample_polyline(poly, n)
                .into_iter()
                .map(|(u, v)| {
                    let (x, y) = ((u - 0.5) * size * aspect, (v - 0.5) * size / aspect);
                    let (x, y) = (x * cos - y * sin, x * sin + y * cos);
                    t += rng.gen_range(8.0..20.0f64).floor();
                    Point::new(
                        (ox + x + rng.gen_range(-1.5..1.5)).round(),
                        (oy + y + rng.gen_range(-1.5..1.5)).round(),
                        t,
                    )
                })
                .collect();
            t += rng.gen_range(100.0..400.0f64).floor();
            pts
        })
        .collect();
    Recording::new(strokes).expect("non-empty strokes")
}

/// `per_class` recordings of each synthetic symbol, interleaved by class,
/// with ids `0..` and labels set.
pub fn synth_dataset(per_class: usize, seed: u64) -> (SymbolTable, Vec<Recording>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut recs = Vec::with_capacity(per_class * SYNTH_COMMANDS.len());
    for i in 0..per_class {
        for class in 0..SYNTH_COMMANDS.len() {
            let id = (i * SYNTH_COMMANDS.len() + class) as u64;
            recs.push(
                synth_recording(class, &mut rng)
                    .with_id(id)
                    .with_label(SymbolId(class as u32)),
            );
        }
    }
    (synth_symbols(), recs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_shape_and_determinism() {
        let (symbols, recs) = synth_dataset(3, 1);
        assert_eq!(symbols.len(), 5);
        assert_eq!(recs.len(), 15);
        assert_eq!(recs[7].label, Some(SymbolId(2)));
        assert_eq!(recs[7].strokes.len(), 2);
        assert_eq!(recs, synth_dataset(3, 1).1);
        for r in &recs {
            for s in &r.strokes {
                assert!(s.windows(2).all(|w| w[1].t > w[0].t));
            }
        }
    }

    #[test]
    fn polyline_sampling_hits_ends() {
        let pts = sample_polyline(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)], 5);
        assert_eq!(pts[0], (0.0, 0.0));
        assert_eq!(pts[2], (1.0, 0.0));
        assert_eq!(pts[4], (1.0, 1.0));
    }
}
