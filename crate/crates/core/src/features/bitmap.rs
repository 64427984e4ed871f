//! Binary raster of the recording.

use crate::recording::{bounding_box, Point, Recording};

/// `n * n` cells, row-major from the top (smallest y). The grid is a square
/// of side `max(width, height)` centered on the bounding box; a cell is 1 when
/// a drawn segment or a point touches it.
pub fn bitmap(rec: &Recording, n: usize) -> Vec<f64> {
    let mut grid = vec![0.0; n * n];
    if n == 0 {
        return grid;
    }
    let b = bounding_box(rec);
    let side = b.width().max(b.height());
    let cx = (b.x_min + b.x_max) / 2.0;
    let cy = (b.y_min + b.y_max) / 2.0;
    let nf = n as f64;
    let to_grid = |p: &Point| -> (f64, f64) {
        if side == 0.0 {
            (nf / 2.0, nf / 2.0)
        } else {
            ((p.x - cx) / side * nf + nf / 2.0, (p.y - cy) / side * nf + nf / 2.0)
        }
    };
    let cell = |u: f64| -> usize { (u.floor().max(0.0) as usize).min(n - 1) };
    for stroke in &rec.strokes {
        for p in stroke {
            let (u, v) = to_grid(p);
            grid[cell(v) * n + cell(u)] = 1.0;
        }
        for w in stroke.windows(2) {
            if !(w[0].pen_down && w[1].pen_down) {
                continue;
            }
            let a = to_grid(&w[0]);
            let b = to_grid(&w[1]);
            traverse(a, b, n, &mut |i, j| grid[j * n + i] = 1.0);
        }
    }
    grid
}

/// Visits every grid cell the segment `a -> b` passes through, walking one
/// cell boundary at a time.
fn traverse(a: (f64, f64), b: (f64, f64), n: usize, visit: &mut impl FnMut(usize, usize)) {
    let clamp = |u: f64| -> i64 { (u.floor() as i64).clamp(0, n as i64 - 1) };
    let (mut i, mut j) = (clamp(a.0), clamp(a.1));
    let (end_i, end_j) = (clamp(b.0), clamp(b.1));
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let step_i: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_j: i64 = if dy > 0.0 { 1 } else { -1 };
    // parameter t in [0, 1] along the segment at which the next boundary is hit
    let first_boundary = |start: f64, idx: i64, d: f64| -> (f64, f64) {
        if d == 0.0 {
            return (f64::INFINITY, f64::INFINITY);
        }
        let next = if d > 0.0 { (idx + 1) as f64 } else { idx as f64 };
        ((next - start) / d, 1.0 / d.abs())
    };
    let (mut t_max_x, t_delta_x) = first_boundary(a.0, i, dx);
    let (mut t_max_y, t_delta_y) = first_boundary(a.1, j, dy);
    let limit = 4 * n + 4;
    for _ in 0..limit {
        visit(i as usize, j as usize);
        if (i, j) == (end_i, end_j) {
            return;
        }
        if t_max_x < t_max_y {
            if t_max_x > 1.0 {
                break;
            }
            i += step_i;
            t_max_x += t_delta_x;
        } else {
            if t_max_y > 1.0 {
                break;
            }
            j += step_j;
            t_max_y += t_delta_y;
        }
        if i < 0 || j < 0 || i >= n as i64 || j >= n as i64 {
            break;
        }
    }
    visit(end_i as usize, end_j as usize);
}
