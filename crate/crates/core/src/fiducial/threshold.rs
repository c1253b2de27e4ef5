use crate::image::GrayImage;

/// Histogram bin for a real-valued pixel such that `v > t` iff `bin(v) > t`
/// for every integer level `t`.
#[inline]
fn level_bin(v: f32) -> usize {
    (v.ceil() as i64).clamp(0, 255) as usize
}

/// Otsu's global threshold over a 256-bin histogram.
///
/// Returns the level `t` maximizing the between-class variance of the split
/// `{v <= t}` / `{v > t}` (the smallest such level on ties) together with the
/// binarized image (255 where the source pixel exceeds `t`). A constant image
/// yields its own level and an all-zero mask.
pub fn otsu_threshold(img: &GrayImage) -> (u8, GrayImage) {
    let mut hist = [0u64; 256];
    for &v in img.pixels() {
        hist[level_bin(v)] += 1;
    }
    let total = img.pixels().len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();

    let occupied: Vec<usize> = (0..256).filter(|&i| hist[i] > 0).collect();
    let threshold = if occupied.len() <= 1 {
        occupied.first().copied().unwrap_or(0)
    } else {
        let mut best = (0usize, f64::NEG_INFINITY);
        let (mut w0, mut sum0) = (0.0, 0.0);
        for (t, &count) in hist.iter().enumerate() {
            w0 += count as f64;
            sum0 += t as f64 * count as f64;
            let w1 = total - w0;
            if w0 == 0.0 || w1 == 0.0 {
                continue;
            }
            let mu0 = sum0 / w0;
            let mu1 = (sum_all - sum0) / w1;
            let between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
            if between > best.1 {
                best = (t, between);
            }
        }
        best.0
    };

    let t = threshold as f32;
    let binary = img.map(|v| if v > t { 255.0 } else { 0.0 });
    (threshold as u8, binary)
}
