//! Scalar descriptors and pairwise comparisons of attention maps.
//!
//! Distribution metrics (KL, SIM, entropy) expect SUM1 inputs. Every pairwise
//! metric rejects maps of different dimensions instead of resampling.

use serde::{Deserialize, Serialize};

use crate::attention_map::{binarize, AttentionMap, Binarize, BinaryMask, SessionLog};
use crate::error::{Error, Result};

pub const DEFAULT_KL_EPSILON: f64 = 1e-12;
pub const DEFAULT_MI_BINS: usize = 32;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// Fixation pixels, taken from click locations.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FixationSet {
    pub points: Vec<(u32, u32)>,
}

impl FixationSet {
    pub fn new(points: Vec<(u32, u32)>) -> Self {
        FixationSet { points }
    }

    pub fn from_session(log: &SessionLog) -> Self {
        FixationSet {
            points: log.clicks.iter().map(|c| (c.x, c.y)).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn indices(&self, width: usize, height: usize) -> Result<Vec<usize>> {
        self.points
            .iter()
            .map(|&(x, y)| {
                if (x as usize) < width && (y as usize) < height {
                    Ok(y as usize * width + x as usize)
                } else {
                    Err(Error::InvalidParameter(format!(
                        "fixation ({x}, {y}) outside {width}x{height} map"
                    )))
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RegionKind {
    Title,
    Labels,
    Legend,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    pub kind: RegionKind,
    pub mask: BinaryMask,
}

/// KL(reference ‖ candidate) in nats; only the candidate is ε-smoothed.
pub fn kl_divergence(candidate: &AttentionMap, reference: &AttentionMap, eps: f64) -> Result<f64> {
    candidate.ensure_same_dims(reference)?;
    Ok(reference
        .values()
        .iter()
        .zip(candidate.values())
        .filter(|(r, _)| **r > 0.0)
        .map(|(r, c)| r * (r / (c + eps)).ln())
        .sum())
}

/// Population mean and variance. A constant slice has variance exactly 0
/// even when the summed mean picks up rounding error.
fn mean_and_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if !v.is_empty() && v.iter().all(|x| *x == v[0]) {
        return (v[0], 0.0);
    }
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

fn pearson_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    let (ma, va) = mean_and_var(a);
    let (mb, vb) = mean_and_var(b);
    if va <= 0.0 || vb <= 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / a.len() as f64;
    Ok((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}

pub fn pearson_cc(a: &AttentionMap, b: &AttentionMap) -> Result<f64> {
    a.ensure_same_dims(b)?;
    pearson_slices(a.values(), b.values())
}

/// Histogram intersection Σ min(aᵢ, bᵢ).
pub fn sim_histogram(a: &AttentionMap, b: &AttentionMap) -> Result<f64> {
    a.ensure_same_dims(b)?;
    Ok(a.values().iter().zip(b.values()).map(|(x, y)| x.min(*y)).sum())
}

/// Mean z-scored saliency over the fixations (population statistics).
pub fn nss(saliency: &AttentionMap, fixations: &FixationSet) -> Result<f64> {
    if fixations.is_empty() {
        return Err(Error::Empty("fixation set"));
    }
    let idx = fixations.indices(saliency.width(), saliency.height())?;
    let (mean, var) = mean_and_var(saliency.values());
    if var <= 0.0 {
        return Err(Error::Undefined("NSS of a constant map"));
    }
    let sd = var.sqrt();
    let v = saliency.values();
    Ok(idx.iter().map(|&i| (v[i] - mean) / sd).sum::<f64>() / idx.len() as f64)
}

/// AUC-Judd: fixated pixels are positives, every other pixel a negative.
/// Computed from the rank sum, so ties count one half.
pub fn auc_judd(saliency: &AttentionMap, fixations: &FixationSet) -> Result<f64> {
    if fixations.is_empty() {
        return Err(Error::Empty("fixation set"));
    }
    let n = saliency.len();
    let mut positive = vec![false; n];
    for i in fixations.indices(saliency.width(), saliency.height())? {
        positive[i] = true;
    }
    let n_pos = positive.iter().filter(|p| **p).count();
    let n_neg = n - n_pos;
    if n_neg == 0 {
        return Err(Error::Undefined("AUC with every pixel fixated"));
    }

    let v = saliency.values();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their average.
        let avg_rank = (i + j + 2) as f64 / 2.0;
        let pos_in_run = order[i..=j].iter().filter(|&&k| positive[k]).count();
        pos_rank_sum += avg_rank * pos_in_run as f64;
        i = j + 1;
    }
    let p = n_pos as f64;
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n_neg as f64))
}

fn ssim_window(len: usize) -> Vec<f64> {
    let c = (len as f64 - 1.0) / 2.0;
    let w: Vec<f64> = (0..len)
        .map(|i| {
            let d = i as f64 - c;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// "Valid" separable filtering: output has `(w - kx + 1) × (h - ky + 1)` cells.
fn filter_valid(v: &[f64], w: usize, h: usize, kx: &[f64], ky: &[f64]) -> Vec<f64> {
    let ow = w - kx.len() + 1;
    let oh = h - ky.len() + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = kx.iter().enumerate().map(|(k, c)| c * v[y * w + x + k]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = ky.iter().enumerate().map(|(k, c)| c * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// Mean local SSIM over every fully-contained Gaussian window (11×11, σ = 1.5;
/// the window shrinks to the map size for maps smaller than 11 pixels).
/// Dynamic range is the larger of the two map maxima, or 1 if both are zero.
pub fn ssim(a: &AttentionMap, b: &AttentionMap) -> Result<f64> {
    a.ensure_same_dims(b)?;
    let (w, h) = a.dims();
    if w == 0 || h == 0 {
        return Err(Error::Empty("map"));
    }
    let mut range = a.max().max(b.max());
    if range <= 0.0 {
        range = 1.0;
    }
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);

    let kx = ssim_window(SSIM_WINDOW.min(w));
    let ky = ssim_window(SSIM_WINDOW.min(h));
    let (av, bv) = (a.values(), b.values());
    let sq = |f: &dyn Fn(usize) -> f64| (0..av.len()).map(f).collect::<Vec<f64>>();
    let mu_a = filter_valid(av, w, h, &kx, &ky);
    let mu_b = filter_valid(bv, w, h, &kx, &ky);
    let aa = filter_valid(&sq(&|i| av[i] * av[i]), w, h, &kx, &ky);
    let bb = filter_valid(&sq(&|i| bv[i] * bv[i]), w, h, &kx, &ky);
    let ab = filter_valid(&sq(&|i| av[i] * bv[i]), w, h, &kx, &ky);

    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / mu_a.len() as f64)
}

fn bin_indices(v: &[f64], bins: usize) -> Option<Vec<usize>> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return None;
    }
    let span = hi - lo;
    Some(
        v.iter()
            .map(|x| (((x - lo) / span * bins as f64) as usize).min(bins - 1))
            .collect(),
    )
}

/// Histogram mutual information in bits, equal-width bins over each map's
/// own value range. A constant map carries no information (MI = 0).
pub fn mutual_information(a: &AttentionMap, b: &AttentionMap, bins: usize) -> Result<f64> {
    a.ensure_same_dims(b)?;
    if bins == 0 {
        return Err(Error::InvalidParameter("bins must be at least 1".into()));
    }
    let (Some(ia), Some(ib)) = (bin_indices(a.values(), bins), bin_indices(b.values(), bins)) else {
        return Ok(0.0);
    };
    let n = ia.len() as f64;
    let mut joint = vec![0usize; bins * bins];
    let mut pa = vec![0usize; bins];
    let mut pb = vec![0usize; bins];
    for (&i, &j) in ia.iter().zip(&ib) {
        joint[i * bins + j] += 1;
        pa[i] += 1;
        pb[j] += 1;
    }
    let mut mi = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let c = joint[i * bins + j];
            if c == 0 {
                continue;
            }
            let pij = c as f64 / n;
            mi += pij * (pij * n * n / (pa[i] as f64 * pb[j] as f64)).log2();
        }
    }
    Ok(mi.max(0.0))
}

/// Fractional ranks (1-based, ties share their average rank).
pub fn fractional_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman_rank(a: &AttentionMap, b: &AttentionMap) -> Result<f64> {
    a.ensure_same_dims(b)?;
    pearson_slices(&fractional_ranks(a.values()), &fractional_ranks(b.values()))
}

pub fn mse(a: &AttentionMap, b: &AttentionMap) -> Result<f64> {
    a.ensure_same_dims(b)?;
    if a.is_empty() {
        return Err(Error::Empty("map"));
    }
    Ok(a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64)
}

/// −Σ p log2 p over the non-zero cells of a SUM1 map.
pub fn shannon_entropy(map: &AttentionMap) -> f64 {
    -map.values()
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| p * p.log2())
        .sum::<f64>()
}

/// Fraction of pixels above `eps`; by default, the fraction of non-zero pixels.
/// Rasterized maps are exactly zero outside the blurred bubbles, so the
/// default measures the geometric support of the clicks.
pub fn saliency_coverage(map: &AttentionMap, eps: Option<f64>) -> f64 {
    if map.is_empty() {
        return 0.0;
    }
    let eps = eps.unwrap_or(0.0);
    map.values().iter().filter(|v| **v > eps).count() as f64 / map.len() as f64
}

pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            left: a.dims(),
            right: b.dims(),
        });
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (x, y) in a.bits().iter().zip(b.bits()) {
        inter += (*x && *y) as usize;
        union += (*x || *y) as usize;
    }
    if union == 0 {
        return Err(Error::Undefined("IoU of two empty masks"));
    }
    Ok(inter as f64 / union as f64)
}

/// IoU between the binarized map and a chart-element mask.
pub fn iou_region(map: &AttentionMap, region: &RegionMask, strategy: Binarize) -> Result<f64> {
    iou(&binarize(map, strategy)?, &region.mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention_map::NormMode;

    fn m(w: usize, h: usize, v: &[f64]) -> AttentionMap {
        AttentionMap::from_values(w, h, v.to_vec()).unwrap()
    }

    #[test]
    fn kl_identity_and_hand_value() {
        let r = m(2, 1, &[0.75, 0.25]);
        assert!(kl_divergence(&r, &r, DEFAULT_KL_EPSILON).unwrap().abs() < 1e-9);
        let c = m(2, 1, &[0.5, 0.5]);
        let kl = kl_divergence(&c, &r, DEFAULT_KL_EPSILON).unwrap();
        assert!((kl - 0.130812).abs() < 1e-5, "{kl}");
    }

    #[test]
    fn kl_zero_candidate_stays_finite() {
        let r = m(2, 1, &[0.5, 0.5]);
        let c = m(2, 1, &[1.0, 0.0]);
        let kl = kl_divergence(&c, &r, DEFAULT_KL_EPSILON).unwrap();
        assert!(kl.is_finite() && kl > 10.0);
    }

    #[test]
    fn pearson_cases() {
        let a = m(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!((pearson_cc(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        let b = m(2, 2, &[4.0, 3.0, 2.0, 1.0]);
        assert!((pearson_cc(&a, &b).unwrap() + 1.0).abs() < 1e-9);
        let c = m(2, 2, &[1.0, 2.0, 3.0, 5.0]);
        // Direct formula: r = Σ(dx·dy) / sqrt(Σdx²·Σdy²).
        let (mx, my) = (2.5, 2.75);
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [1.0, 2.0, 3.0, 5.0];
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
        let expect = sxy / (sxx * syy).sqrt();
        assert!((pearson_cc(&a, &c).unwrap() - expect).abs() < 1e-9);
        let flat = m(2, 2, &[1.0; 4]);
        assert!(matches!(pearson_cc(&a, &flat), Err(Error::UndefinedCorrelation)));
    }

    #[test]
    fn sim_cases() {
        let a = m(2, 1, &[0.5, 0.5]);
        assert_eq!(sim_histogram(&a, &a).unwrap(), 1.0);
        assert_eq!(sim_histogram(&a, &m(2, 1, &[0.25, 0.75])).unwrap(), 0.75);
        assert_eq!(sim_histogram(&m(2, 1, &[1.0, 0.0]), &m(2, 1, &[0.0, 1.0])).unwrap(), 0.0);
    }

    #[test]
    fn nss_cases() {
        let s = m(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let v = nss(&s, &FixationSet::new(vec![(1, 1)])).unwrap();
        assert!((v - 3f64.sqrt()).abs() < 1e-4);
        let all = FixationSet::new(vec![(0, 0), (1, 0), (0, 1), (1, 1)]);
        assert!(nss(&s, &all).unwrap().abs() < 1e-9);
        assert!(matches!(nss(&m(2, 2, &[3.0; 4]), &all), Err(Error::Undefined(_))));
        assert!(nss(&s, &FixationSet::default()).is_err());
        assert!(nss(&s, &FixationSet::new(vec![(2, 0)])).is_err());
    }

    #[test]
    fn auc_cases() {
        let s = m(3, 1, &[0.9, 0.1, 0.5]);
        assert_eq!(auc_judd(&s, &FixationSet::new(vec![(0, 0)])).unwrap(), 1.0);
        assert_eq!(auc_judd(&s, &FixationSet::new(vec![(2, 0)])).unwrap(), 0.5);
        let flat = m(3, 1, &[0.2; 3]);
        assert_eq!(auc_judd(&flat, &FixationSet::new(vec![(1, 0)])).unwrap(), 0.5);
        let all = FixationSet::new(vec![(0, 0), (1, 0), (2, 0)]);
        assert!(auc_judd(&s, &all).is_err());
        assert!(auc_judd(&s, &FixationSet::default()).is_err());
    }

    #[test]
    fn ssim_identity_and_zero() {
        let a = m(4, 3, &[0.1, 0.5, 0.2, 0.0, 0.3, 0.9, 0.4, 0.2, 0.0, 0.1, 0.6, 0.8]);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        assert!(ssim(&a, &AttentionMap::zeros(4, 3)).unwrap() < 1.0);
        let z = AttentionMap::zeros(4, 3);
        assert!((ssim(&z, &z).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mi_two_levels_is_one_bit() {
        let a = m(2, 2, &[0.0, 1.0, 0.0, 1.0]);
        assert!((mutual_information(&a, &a, 2).unwrap() - 1.0).abs() < 1e-12);
        let flat = m(2, 2, &[0.5; 4]);
        assert_eq!(mutual_information(&a, &flat, 2).unwrap(), 0.0);
    }

    #[test]
    fn spearman_cases() {
        let a = m(2, 2, &[0.1, 0.7, 0.3, 0.2]);
        let cubed = m(2, 2, &[0.001, 0.343, 0.027, 0.008]);
        assert!((spearman_rank(&a, &cubed).unwrap() - 1.0).abs() < 1e-9);
        let rev = m(2, 2, &[0.9, 0.1, 0.5, 0.6]);
        assert!((spearman_rank(&a, &rev).unwrap() + 1.0).abs() < 1e-9);
        // Ranks by hand: [1, 2.5, 2.5, 4] and [1, 4, 2.5, 2.5].
        let x = m(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        let y = m(2, 2, &[1.0, 3.0, 2.0, 2.0]);
        let rx = [1.0, 2.5, 2.5, 4.0];
        let ry = [1.0, 4.0, 2.5, 2.5];
        let mr = 2.5;
        let num: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mr) * (b - mr)).sum();
        let den: f64 = (rx.iter().map(|a| (a - mr) * (a - mr)).sum::<f64>()
            * ry.iter().map(|b| (b - mr) * (b - mr)).sum::<f64>())
        .sqrt();
        assert!((spearman_rank(&x, &y).unwrap() - num / den).abs() < 1e-9);
    }

    #[test]
    fn mse_cases() {
        let a = m(2, 1, &[0.0, 1.0]);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(mse(&a, &m(2, 1, &[1.0, 0.0])).unwrap(), 1.0);
    }

    #[test]
    fn entropy_cases() {
        let u = AttentionMap::uniform(8, 4);
        assert!((shannon_entropy(&u) - 5.0).abs() < 1e-12);
        assert_eq!(shannon_entropy(&m(3, 1, &[0.0, 1.0, 0.0])), 0.0);
        let p = m(2, 2, &[0.5, 0.25, 0.25, 0.0]);
        assert!((shannon_entropy(&p) - 1.5).abs() < 1e-9);
    }

    #[test]
    fn coverage_cases() {
        assert_eq!(saliency_coverage(&AttentionMap::zeros(4, 4), None), 0.0);
        assert_eq!(saliency_coverage(&m(2, 1, &[0.1, 2.0]), None), 1.0);
        assert_eq!(saliency_coverage(&m(4, 1, &[0.0, 1.0, 0.0, 0.5]), None), 0.5);
        assert_eq!(saliency_coverage(&m(4, 1, &[0.0, 1.0, 0.0, 0.5]), Some(0.6)), 0.25);
    }

    /// Pixels within bubble radius of the square blur support around a click.
    fn disk_plus_square_support(w: i64, h: i64, cx: i64, cy: i64, r: i64, half: i64) -> usize {
        let mut n = 0;
        for y in 0..h {
            for x in 0..w {
                let ex = ((x - cx).abs() - half).max(0);
                let ey = ((y - cy).abs() - half).max(0);
                if ex * ex + ey * ey <= r * r {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn single_click_coverage_matches_geometric_support() {
        use crate::attention_map::{rasterize, Answer, ClickEvent, RasterConfig};
        let log = SessionLog {
            participant_id: "p".into(),
            chart_id: "c".into(),
            clicks: vec![ClickEvent { x: 100, y: 100, t: 0 }],
            answer: Answer::Skipped,
            duration_s: 1.0,
            image_w: 200,
            image_h: 200,
            bubble_radius: None,
        };
        let map = rasterize(&log, &RasterConfig::default()).unwrap();
        // Disk of radius 32 dilated by the separable kernel's ⌈3σ⌉ = 57 square.
        let oracle = disk_plus_square_support(200, 200, 100, 100, 32, 57) as f64 / 40_000.0;
        let cov = saliency_coverage(&map, None);
        assert!((cov - oracle).abs() <= 0.005 * oracle, "{cov} vs {oracle}");
    }

    #[test]
    fn iou_cases() {
        let a = BinaryMask::new(4, 1, vec![true, true, false, false]).unwrap();
        let b = BinaryMask::new(4, 1, vec![false, true, true, false]).unwrap();
        assert!((iou(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        let c = BinaryMask::new(4, 1, vec![false, false, true, true]).unwrap();
        assert_eq!(iou(&a, &c).unwrap(), 0.0);
        let e = BinaryMask::new(4, 1, vec![false; 4]).unwrap();
        assert!(iou(&e, &e).is_err());
    }

    #[test]
    fn region_iou_binarizes_first() {
        let map = m(4, 1, &[0.9, 0.8, 0.1, 0.0]);
        let region = RegionMask {
            kind: RegionKind::Title,
            mask: BinaryMask::from_rect(4, 1, 0, 0, 2, 1),
        };
        assert_eq!(iou_region(&map, &region, Binarize::TopFraction(0.5)).unwrap(), 1.0);
    }

    #[test]
    fn pairwise_metrics_reject_dimension_mismatch() {
        let a = AttentionMap::uniform(2, 3);
        let b = AttentionMap::uniform(3, 2);
        assert!(kl_divergence(&a, &b, 1e-12).is_err());
        assert!(pearson_cc(&a, &b).is_err());
        assert!(sim_histogram(&a, &b).is_err());
        assert!(ssim(&a, &b).is_err());
        assert!(mutual_information(&a, &b, 4).is_err());
        assert!(spearman_rank(&a, &b).is_err());
        assert!(mse(&a, &b).is_err());
        assert_eq!(a.norm(), NormMode::Sum1);
    }
}
