//! Shared inputs for the benchmarks.

use attnlit::attention_map::{Answer, AttentionMap, ClickEvent, SessionLog};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A session with `clicks` uniformly placed clicks on a `w × h` chart.
pub fn session(w: u32, h: u32, clicks: usize, seed: u64) -> SessionLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SessionLog {
        participant_id: "P1".into(),
        chart_id: "V1".into(),
        clicks: (0..clicks)
            .map(|i| ClickEvent {
                x: rng.random_range(0..w),
                y: rng.random_range(0..h),
                t: 100 * i as u64,
            })
            .collect(),
        answer: Answer::Choice(0),
        duration_s: 10.0,
        image_w: w,
        image_h: h,
        bubble_radius: None,
    }
}

pub fn random_map(w: usize, h: usize, seed: u64) -> AttentionMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AttentionMap::from_values(w, h, (0..w * h).map(|_| rng.random::<f64>()).collect()).expect("finite values")
}

/// `n` feature rows of width `width` with random labels over `levels`.
pub fn rows(n: usize, width: usize, levels: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<[usize; 3]>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..n).map(|_| (0..width).map(|_| rng.random::<f64>()).collect()).collect();
    let y = (0..n).map(|_| std::array::from_fn(|_| rng.random_range(0..levels))).collect();
    (x, y)
}
