//! Minimal raster line plot for values in `[0, 1]`.

use super::image::RgbImage;

const MARGIN: usize = 12;
const PALETTE: [[u8; 3]; 4] = [[31, 119, 180], [214, 39, 40], [44, 160, 44], [255, 127, 14]];

fn line(img: &mut RgbImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), rgb: [u8; 3]) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        if x >= 0 && y >= 0 {
            img.put_pixel(x as usize, y as usize, rgb);
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Plots each series over a shared, evenly spaced x axis. `None` values are
/// gaps. The y axis spans `[0, 1]` with light grid lines at quarters.
pub fn line_plot(series: &[Vec<Option<f64>>], width: usize, height: usize) -> RgbImage {
    let width = width.max(2 * MARGIN + 2);
    let height = height.max(2 * MARGIN + 2);
    let mut img = RgbImage::new(width, height, [255; 3]);
    let (left, right) = (MARGIN as i64, (width - MARGIN) as i64);
    let (top, bottom) = (MARGIN as i64, (height - MARGIN) as i64);
    for q in 0..=4 {
        let y = bottom - (bottom - top) * q / 4;
        line(&mut img, (left, y), (right, y), [220; 3]);
    }
    line(&mut img, (left, top), (left, bottom), [0; 3]);
    line(&mut img, (left, bottom), (right, bottom), [0; 3]);

    let points = series.iter().map(Vec::len).max().unwrap_or(0);
    let x_at = |i: usize| {
        if points <= 1 {
            (left + right) / 2
        } else {
            left + (right - left) * i as i64 / (points as i64 - 1)
        }
    };
    let y_at = |v: f64| bottom - ((bottom - top) as f64 * v.clamp(0.0, 1.0)).round() as i64;
    for (s, values) in series.iter().enumerate() {
        let rgb = PALETTE[s % PALETTE.len()];
        let mut prev: Option<(i64, i64)> = None;
        for (i, v) in values.iter().enumerate() {
            let Some(v) = v else {
                prev = None;
                continue;
            };
            let p = (x_at(i), y_at(*v));
            if let Some(q) = prev {
                line(&mut img, q, p, rgb);
            }
            for d in -1..=1 {
                line(&mut img, (p.0 - 1, p.1 + d), (p.0 + 1, p.1 + d), rgb);
            }
            prev = Some(p);
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_points_at_expected_height() {
        let img = line_plot(&[vec![Some(0.0), Some(1.0)]], 64, 64);
        assert_eq!((img.width(), img.height()), (64, 64));
        assert_eq!(img.pixel(MARGIN, 64 - MARGIN), PALETTE[0]);
        assert_eq!(img.pixel(64 - MARGIN, MARGIN), PALETTE[0]);
    }
}
