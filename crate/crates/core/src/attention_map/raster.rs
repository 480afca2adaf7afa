use super::{Accumulation, AttentionMap, NormMode, RasterConfig, SessionLog};
use crate::error::{Error, Result};

/// Normalized 1-D Gaussian truncated at radius ⌈3σ⌉, length `2·radius + 1`.
/// Side taps are mirrored from one computation so the kernel is exactly
/// symmetric.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let two_var = 2.0 * sigma * sigma;
    let raw: Vec<f64> = (0..=radius)
        .map(|i| (-((i * i) as f64) / two_var).exp())
        .collect();
    let total = raw[0] + 2.0 * raw[1..].iter().sum::<f64>();
    let half: Vec<f64> = raw.iter().map(|v| v / total).collect();

    let mut kernel = Vec::with_capacity(2 * radius + 1);
    kernel.extend(half[1..].iter().rev());
    kernel.extend(half.iter());
    kernel
}

/// Separable zero-padded convolution of a `width × height` grid with a
/// symmetric odd-length kernel. Work is limited to the bounding box of the
/// non-zero input grown by the kernel radius; everything outside is exactly 0.
/// Every output sums its taps in kernel order, so shifting an interior input
/// shifts the output bit for bit.
pub fn blur(values: &[f64], width: usize, height: usize, kernel: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), width * height, "grid size mismatch");
    assert!(kernel.len() % 2 == 1, "kernel length must be odd");
    let radius = kernel.len() / 2;
    let mut out = vec![0.0; values.len()];

    let Some((x0, y0, x1, y1)) = nonzero_bbox(values, width, height) else {
        return out;
    };
    let ox0 = x0.saturating_sub(radius);
    let ox1 = (x1 + radius).min(width - 1);
    let oy0 = y0.saturating_sub(radius);
    let oy1 = (y1 + radius).min(height - 1);

    // Horizontal pass over the rows that carry mass.
    let mut tmp = vec![0.0; values.len()];
    for y in y0..=y1 {
        let row = &values[y * width..(y + 1) * width];
        let dst = &mut tmp[y * width..(y + 1) * width];
        for (x, d) in dst.iter_mut().enumerate().take(ox1 + 1).skip(ox0) {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                let sx = x + k;
                if sx < radius || sx - radius >= width {
                    continue;
                }
                acc += w * row[sx - radius];
            }
            *d = acc;
        }
    }

    // Vertical pass. Each output pixel accumulates taps in ascending order.
    for y in oy0..=oy1 {
        let dst = &mut out[y * width..(y + 1) * width];
        for (k, w) in kernel.iter().enumerate() {
            let sy = y + k;
            if sy < radius || sy - radius >= height {
                continue;
            }
            let sy = sy - radius;
            if sy < y0 || sy > y1 {
                continue;
            }
            let src = &tmp[sy * width..(sy + 1) * width];
            for x in ox0..=ox1 {
                dst[x] += w * src[x];
            }
        }
    }
    out
}

fn nonzero_bbox(values: &[f64], width: usize, height: usize) -> Option<(usize, usize, usize, usize)> {
    let mut bbox: Option<(usize, usize, usize, usize)> = None;
    for y in 0..height {
        for x in 0..width {
            if values[y * width + x] != 0.0 {
                bbox = Some(match bbox {
                    None => (x, y, x, y),
                    Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x), d.max(y)),
                });
            }
        }
    }
    bbox
}

/// Stamps a disk of `radius` at every click, before blurring.
pub fn stamp_disks(log: &SessionLog, radius: f64, accumulation: Accumulation) -> Result<Vec<f64>> {
    let (w, h) = (log.image_w as usize, log.image_h as usize);
    if let Some((index, c)) = log
        .clicks
        .iter()
        .enumerate()
        .find(|(_, c)| c.x as usize >= w || c.y as usize >= h)
    {
        return Err(Error::ClickOutOfBounds {
            index,
            x: c.x,
            y: c.y,
            width: w,
            height: h,
        });
    }

    let mut grid = vec![0.0; w * h];
    let reach = radius.floor() as i64;
    let r2 = radius * radius;
    for c in &log.clicks {
        let (cx, cy) = (c.x as i64, c.y as i64);
        for dy in -reach..=reach {
            let y = cy + dy;
            if y < 0 || y >= h as i64 {
                continue;
            }
            for dx in -reach..=reach {
                let x = cx + dx;
                if x < 0 || x >= w as i64 || ((dx * dx + dy * dy) as f64) > r2 {
                    continue;
                }
                let cell = &mut grid[y as usize * w + x as usize];
                match accumulation {
                    Accumulation::Additive => *cell += 1.0,
                    Accumulation::Union => *cell = 1.0,
                }
            }
        }
    }
    Ok(grid)
}

/// RAW attention map of one session: disks at the clicks, then Gaussian blur.
///
/// The session's own `bubble_radius`, when present, overrides the config.
pub fn rasterize(log: &SessionLog, cfg: &RasterConfig) -> Result<AttentionMap> {
    cfg.validate()?;
    let radius = log.bubble_radius.unwrap_or(cfg.bubble_radius);
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "session bubble radius must be positive, got {radius}"
        )));
    }
    let (w, h) = (log.image_w as usize, log.image_h as usize);
    let stamps = stamp_disks(log, radius, cfg.accumulation)?;
    let kernel = gaussian_kernel(cfg.blur_sigma);
    Ok(AttentionMap::from_parts(w, h, blur(&stamps, w, h, &kernel), NormMode::Raw))
}
