//! PNG figures: field heatmap panels and error-versus-time curves.

use std::path::Path;

use image::{Rgb, RgbImage};
use ndarray::ArrayView2;

use crate::error::{EvalError, Result};
use crate::metrics::EvalReport;
use pdeup_core::Variable;

const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const BLACK: Rgb<u8> = Rgb([0, 0, 0]);
const GRID: Rgb<u8> = Rgb([220, 220, 220]);
const LINES: [Rgb<u8>; 4] = [Rgb([31, 119, 180]), Rgb([214, 39, 40]), Rgb([44, 160, 44]), Rgb([148, 103, 189])];

/// Blue-white-red map for `x ∈ [-1, 1]`.
fn diverging(x: f64) -> Rgb<u8> {
    let x = x.clamp(-1.0, 1.0);
    let (lo, mid, hi) = ([33.0, 102.0, 172.0], [247.0, 247.0, 247.0], [178.0, 24.0, 43.0]);
    let (a, b, s) = if x < 0.0 { (mid, lo, -x) } else { (mid, hi, x) };
    let c = |i: usize| (a[i] + (b[i] - a[i]) * s).round() as u8;
    Rgb([c(0), c(1), c(2)])
}

fn save(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|source| EvalError::Image { path: path.into(), source })
}

/// Grid of heatmaps. `cells[r][c]` is drawn into a `cell_px` square with
/// nearest-node sampling; each row shares a symmetric colour range taken from
/// its largest magnitude. Missing cells stay white.
pub fn heatmap_panel(cells: &[Vec<Option<ArrayView2<f64>>>], cell_px: u32, path: &Path) -> Result<()> {
    let gap = 6u32;
    let rows = cells.len() as u32;
    let cols = cells.iter().map(Vec::len).max().unwrap_or(0) as u32;
    if rows == 0 || cols == 0 || cell_px == 0 {
        return Err(EvalError::Config("empty heatmap panel".into()));
    }
    let mut img = RgbImage::from_pixel(cols * (cell_px + gap) + gap, rows * (cell_px + gap) + gap, WHITE);
    for (r, row) in cells.iter().enumerate() {
        let range = row
            .iter()
            .flatten()
            .flat_map(|f| f.iter().copied())
            .filter(|v| v.is_finite())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let range = if range > 0.0 { range } else { 1.0 };
        for (c, cell) in row.iter().enumerate() {
            let Some(f) = cell else { continue };
            let (ny, nx) = f.dim();
            let (x0, y0) = (gap + c as u32 * (cell_px + gap), gap + r as u32 * (cell_px + gap));
            for py in 0..cell_px {
                // Row 0 of the field is y = y0 of the domain; draw it at the bottom.
                let j = ny - 1 - ((py as usize * ny) / cell_px as usize).min(ny - 1);
                for px in 0..cell_px {
                    let i = ((px as usize * nx) / cell_px as usize).min(nx - 1);
                    img.put_pixel(x0 + px, y0 + py, diverging(f[[j, i]] / range));
                }
            }
        }
    }
    save(&img, path)
}

fn line(img: &mut RgbImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), color: Rgb<u8>) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, color);
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

/// Error-versus-time curves, one panel per variable in a 2×2 layout, one
/// colour per report in the order given. Light horizontal lines mark every
/// 1% of error and a vertical line marks the training horizon.
pub fn error_curves(reports: &[&EvalReport], path: &Path) -> Result<()> {
    let (pw, ph, m) = (480i64, 320i64, 24i64);
    let mut img = RgbImage::from_pixel((2 * pw) as u32, (2 * ph) as u32, WHITE);
    let t_max = reports
        .iter()
        .flat_map(|r| r.rows.iter().map(|x| x.t))
        .fold(0.0f64, f64::max)
        .max(1e-12);
    for var in Variable::ALL {
        let (ox, oy) = ((var.index() as i64 % 2) * pw, (var.index() as i64 / 2) * ph);
        let (left, right, top, bottom) = (ox + m, ox + pw - m, oy + m, oy + ph - m);
        let e_max = reports
            .iter()
            .flat_map(|r| r.series(var, f64::NEG_INFINITY, f64::INFINITY))
            .map(|(_, e)| e)
            .fold(0.0f64, f64::max)
            .max(1.0)
            .ceil();
        let to_px = |t: f64, e: f64| {
            let x = left + ((t / t_max) * (right - left) as f64).round() as i64;
            let y = bottom - ((e / e_max) * (bottom - top) as f64).round() as i64;
            (x, y)
        };
        for k in 1..=(e_max as i64).min(50) {
            let (_, y) = to_px(0.0, k as f64);
            line(&mut img, (left, y), (right, y), GRID);
        }
        if let Some(h) = reports.iter().find_map(|r| r.training_horizon) {
            let (x, _) = to_px(h, 0.0);
            line(&mut img, (x, top), (x, bottom), GRID);
        }
        line(&mut img, (left, bottom), (right, bottom), BLACK);
        line(&mut img, (left, top), (left, bottom), BLACK);
        for (r, rep) in reports.iter().enumerate() {
            let pts: Vec<(i64, i64)> = rep
                .series(var, f64::NEG_INFINITY, f64::INFINITY)
                .into_iter()
                .map(|(t, e)| to_px(t, e))
                .collect();
            for w in pts.windows(2) {
                line(&mut img, w[0], w[1], LINES[r % LINES.len()]);
            }
        }
    }
    save(&img, path)
}
