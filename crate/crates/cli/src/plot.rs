//! Static figures: attention heatmaps, difference maps and accuracy curves.

use std::path::Path;

use attnlit::attention_map::AttentionMap;
use image::{Rgb, RgbImage};

use crate::error::Result;

/// Dark-to-bright sequential ramp.
const HEAT: [[f64; 3]; 5] = [
    [0.0, 0.0, 4.0],
    [81.0, 18.0, 124.0],
    [183.0, 55.0, 121.0],
    [252.0, 137.0, 97.0],
    [252.0, 253.0, 191.0],
];

/// Blue, white, red.
const DIVERGING: [[f64; 3]; 3] = [[33.0, 102.0, 172.0], [247.0, 247.0, 247.0], [178.0, 24.0, 43.0]];

fn ramp(stops: &[[f64; 3]], t: f64) -> Rgb<u8> {
    let t = t.clamp(0.0, 1.0) * (stops.len() - 1) as f64;
    let i = (t.floor() as usize).min(stops.len() - 2);
    let f = t - i as f64;
    let c = |k: usize| (stops[i][k] + f * (stops[i + 1][k] - stops[i][k])).round() as u8;
    Rgb([c(0), c(1), c(2)])
}

fn save(img: RgbImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// Heatmap scaled to the map's maximum; an all-zero map renders dark.
pub fn heatmap_png(map: &AttentionMap, path: &Path) -> Result<()> {
    let (w, h) = map.dims();
    let max = map.max();
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
    let img = RgbImage::from_fn(w as u32, h as u32, |x, y| ramp(&HEAT, map.get(x as usize, y as usize) * scale));
    save(img, path)
}

/// `a − b` on a symmetric blue–white–red scale; red where `a` is larger.
pub fn difference_png(a: &AttentionMap, b: &AttentionMap, path: &Path) -> Result<()> {
    a.ensure_same_dims(b)?;
    let (w, h) = a.dims();
    let diff: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    let span = diff.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let scale = if span > 0.0 { 0.5 / span } else { 0.0 };
    let img = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        ramp(&DIVERGING, 0.5 + diff[y as usize * w + x as usize] * scale)
    });
    save(img, path)
}

/// Line chart of accuracy against the number of selected charts.
pub fn accuracy_svg(labels: &[String], accuracy: &[f64]) -> String {
    let (w, h, pad) = (480.0, 300.0, 48.0);
    let n = accuracy.len().max(1);
    let x = |i: usize| {
        if n == 1 {
            w / 2.0
        } else {
            pad + i as f64 * (w - 2.0 * pad) / (n - 1) as f64
        }
    };
    let y = |a: f64| h - pad - a.clamp(0.0, 1.0) * (h - 2.0 * pad);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        s.push_str(&format!(
            "<line x1=\"{pad}\" x2=\"{}\" y1=\"{y:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\
             <text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{tick:.2}</text>\n",
            w - pad,
            pad - 6.0,
            y(tick) + 4.0,
            y = y(tick)
        ));
    }
    let points: Vec<String> = accuracy.iter().enumerate().map(|(i, a)| format!("{:.1},{:.1}", x(i), y(*a))).collect();
    s.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#b7377a\" stroke-width=\"2\"/>\n",
        points.join(" ")
    ));
    for (i, (label, a)) in labels.iter().zip(accuracy).enumerate() {
        s.push_str(&format!(
            "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3.5\" fill=\"#b7377a\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">+{}</text>\n",
            x(i),
            y(*a),
            x(i),
            h - pad + 16.0,
            xml_escape(label)
        ));
    }
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">charts selected</text>\n\
         <text x=\"14\" y=\"{:.1}\" transform=\"rotate(-90 14 {:.1})\" text-anchor=\"middle\">weighted accuracy</text>\n</svg>\n",
        w / 2.0,
        h - 8.0,
        h / 2.0,
        h / 2.0
    ));
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp(&HEAT, 0.0), Rgb([0, 0, 4]));
        assert_eq!(ramp(&HEAT, 1.0), Rgb([252, 253, 191]));
        assert_eq!(ramp(&DIVERGING, 0.5), Rgb([247, 247, 247]));
        assert_eq!(ramp(&HEAT, 7.0), ramp(&HEAT, 1.0));
    }

    #[test]
    fn heatmap_has_map_dimensions() {
        let dir = tempfile::tempdir().unwrap();
        let map = AttentionMap::from_values(3, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 0.0]).unwrap();
        let path = dir.path().join("m.png");
        heatmap_png(&map, &path).unwrap();
        let img = image::open(&path).unwrap().to_rgb8();
        assert_eq!(img.dimensions(), (3, 2));
        assert_eq!(*img.get_pixel(1, 1), Rgb([252, 253, 191]));
        assert_eq!(*img.get_pixel(0, 0), Rgb([0, 0, 4]));
        difference_png(&map, &map, &dir.path().join("d.png")).unwrap();
    }

    #[test]
    fn svg_lists_every_step() {
        let svg = accuracy_svg(&["V1".into(), "C<2".into()], &[0.5, 0.75]);
        assert!(svg.contains("+V1") && svg.contains("+C&lt;2"));
        assert_eq!(svg.matches("<circle").count(), 2);
    }
}
