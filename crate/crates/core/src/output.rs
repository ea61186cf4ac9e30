//! Field CSVs and binary PPM heatmaps.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Ten evenly spaced stops of the viridis colormap, dark to light.
const STOPS: [[u8; 3]; 10] = [
    [0x44, 0x01, 0x54],
    [0x48, 0x28, 0x78],
    [0x3e, 0x49, 0x89],
    [0x31, 0x68, 0x8e],
    [0x26, 0x82, 0x8e],
    [0x1f, 0x9e, 0x89],
    [0x35, 0xb7, 0x79],
    [0x6e, 0xce, 0x58],
    [0xb5, 0xde, 0x2b],
    [0xfd, 0xe7, 0x25],
];

/// 256-entry palette interpolated linearly between [`STOPS`] in integer
/// arithmetic, so every platform produces the same bytes.
pub fn palette() -> [[u8; 3]; 256] {
    let mut out = [[0u8; 3]; 256];
    let spans = (STOPS.len() - 1) as u32;
    for (i, rgb) in out.iter_mut().enumerate() {
        // position in units of 1/255 of a span
        let pos = i as u32 * spans;
        let (k, frac) = ((pos / 255) as usize, pos % 255);
        let (a, b) = (STOPS[k], STOPS[(k + 1).min(STOPS.len() - 1)]);
        for c in 0..3 {
            let v = a[c] as u32 * (255 - frac) + b[c] as u32 * frac;
            rgb[c] = ((v + 127) / 255) as u8;
        }
    }
    out
}

/// `x0,x1,…,value` rows in node order.
pub fn grid_field_csv(grid: &Grid, values: &[f64]) -> Result<String> {
    if values.len() != grid.n_nodes() {
        return Err(Error::SizeMismatch { expected: grid.n_nodes(), got: values.len() });
    }
    let mut out = String::new();
    for mu in 0..grid.dim() {
        let _ = write!(out, "x{mu},");
    }
    out.push_str("value\n");
    for (j, v) in values.iter().enumerate() {
        for x in grid.coords(j) {
            let _ = write!(out, "{x},");
        }
        let _ = writeln!(out, "{v}");
    }
    Ok(out)
}

/// Binary P6 image of a 1-d or 2-d field, `scale` pixels per node.
///
/// Axis 0 runs left to right and axis 1 bottom to top. Values are mapped
/// linearly from `range` onto the palette and clamped.
pub fn heatmap_ppm(grid: &Grid, values: &[f64], range: (f64, f64), scale: usize) -> Result<Vec<u8>> {
    if values.len() != grid.n_nodes() {
        return Err(Error::SizeMismatch { expected: grid.n_nodes(), got: values.len() });
    }
    if grid.dim() > 2 || scale == 0 {
        return Err(Error::Unsupported(format!("heatmaps need a 1-d or 2-d grid and a positive scale (d = {})", grid.dim())));
    }
    let nx = grid.axis_len(0);
    let ny = if grid.dim() == 2 { grid.axis_len(1) } else { 1 };
    let (w, h) = (nx * scale, ny * scale);
    let pal = palette();
    let (lo, hi) = range;
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(3 * w * h);
    for row in 0..h {
        let y = ny - 1 - row / scale;
        for col in 0..w {
            let j = if grid.dim() == 2 { grid.node(&[col / scale, y]) } else { col / scale };
            let t = ((values[j] - lo) / span).clamp(0.0, 1.0);
            let t = if t.is_nan() { 0.0 } else { t };
            out.extend_from_slice(&pal[(t * 255.0).round() as usize]);
        }
    }
    Ok(out)
}

/// Smallest and largest finite value over several fields.
pub fn value_range<'a>(fields: impl IntoIterator<Item = &'a [f64]>) -> (f64, f64) {
    fields
        .into_iter()
        .flatten()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn palette_ends_on_the_stops() {
        let p = palette();
        assert_eq!(p[0], STOPS[0]);
        assert_eq!(p[255], STOPS[9]);
        // green channel rises monotonically along viridis
        assert!(p.windows(2).all(|w| w[1][1] >= w[0][1]));
    }

    #[test]
    fn csv_lists_coordinates() {
        let g = Grid::new(vec![1, 2], 1.0).unwrap();
        let values: Vec<f64> = (0..8).map(|j| j as f64 * 0.5).collect();
        let csv = grid_field_csv(&g, &values).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x0,x1,value");
        assert_eq!(lines[1], "0,0,0");
        assert_eq!(lines[4], "1,1,1.5");
        assert_eq!(lines.len(), 9);
        assert!(grid_field_csv(&g, &values[..3]).is_err());
    }

    #[test]
    fn ppm_layout() {
        let g = Grid::new(vec![1, 1], 1.0).unwrap();
        // node (1, 1) hot, rest cold
        let img = heatmap_ppm(&g, &[0.0, 0.0, 0.0, 1.0], (0.0, 1.0), 2).unwrap();
        let header = b"P6\n4 4\n255\n";
        assert_eq!(&img[..header.len()], header);
        let px = &img[header.len()..];
        assert_eq!(px.len(), 48);
        // top-right pixel is the hot node
        assert_eq!(&px[9..12], &STOPS[9]);
        assert_eq!(&px[0..3], &STOPS[0]);
        assert_eq!(&px[45..48], &STOPS[0]);
        let g3 = Grid::new(vec![1, 1, 1], 1.0).unwrap();
        assert!(heatmap_ppm(&g3, &[0.0; 8], (0.0, 1.0), 1).is_err());
        assert_eq!(value_range([[1.0, f64::NAN].as_slice(), [-2.0].as_slice()]), (-2.0, 1.0));
    }
}
