//! Text rendering of a recording.

use crate::recording::Recording;

/// Draws the strokes onto a `width` x `height` character grid, keeping the
/// aspect ratio. Stroke `i` uses the digit `i % 10`, `.` is background.
pub fn text_grid(rec: &Recording, width: usize, height: usize) -> String {
    let (width, height) = (width.max(1), height.max(1));
    let bb = rec.bounding_box();
    let fit = |cells: usize, extent: f64| if extent > 0.0 { cells as f64 / extent } else { f64::INFINITY };
    let scale = fit(width - 1, bb.width()).min(fit(height - 1, bb.height()));
    let scale = if scale.is_finite() { scale } else { 0.0 };
    let mut grid = vec![vec!['.'; width]; height];
    let mut plot = |x: f64, y: f64, c: char| {
        let col = ((x - bb.x_min) * scale).round() as usize;
        let row = ((y - bb.y_min) * scale).round() as usize;
        if row < height && col < width {
            grid[row][col] = c;
        }
    };
    for (i, stroke) in rec.strokes.iter().enumerate() {
        let c = char::from_digit((i % 10) as u32, 10).expect("digit");
        plot(stroke[0].x, stroke[0].y, c);
        for w in stroke.windows(2) {
            let steps = (w[0].dist(&w[1]) * scale).ceil().max(1.0) as usize;
            for s in 1..=steps {
                let u = s as f64 / steps as f64;
                plot(w[0].x + u * (w[1].x - w[0].x), w[0].y + u * (w[1].y - w[0].y), c);
            }
        }
    }
    grid.into_iter()
        .map(|row| row.into_iter().collect::<String>() + "\n")
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recording::parse_recording;

    #[test]
    fn diagonal_and_dot() {
        let rec = parse_recording(
            r#"[[{"x":0,"y":0,"time":0},{"x":4,"y":4,"time":1}],[{"x":4,"y":0,"time":2}]]"#,
        )
        .unwrap();
        assert_eq!(text_grid(&rec, 5, 5), "0...1\n.0...\n..0..\n...0.\n....0\n");
    }

    #[test]
    fn fits_both_dimensions() {
        let rec = parse_recording(r#"[[{"x":0,"y":0,"time":0},{"x":10,"y":10,"time":1}]]"#).unwrap();
        assert_eq!(text_grid(&rec, 6, 3), "0.....\n.0....\n..0...\n");
    }

    #[test]
    fn single_point() {
        let rec = parse_recording(r#"[[{"x":3,"y":3,"time":0}]]"#).unwrap();
        assert_eq!(text_grid(&rec, 3, 2), "0..\n...\n");
    }
}
