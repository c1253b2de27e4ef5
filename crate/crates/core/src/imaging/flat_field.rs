use crate::image::GrayImage;

/// Side of the square frame the corrected image is resampled to.
pub const CORRECTED_SIDE: usize = 1000;
/// Side of the box filter estimating the illumination field.
pub const BLUR_WINDOW: usize = 50;

/// Flat-field correction `C = R * m / F` at the standard working size.
pub fn flat_field_correct(img: &GrayImage) -> GrayImage {
    flat_field_correct_with(img, CORRECTED_SIDE, BLUR_WINDOW)
}

/// Flat-field correction with explicit output side and window.
///
/// `R` is the bilinear resize to `side x side`, `F` its box mean over a
/// `window x window` neighborhood (offsets `-window/2 ..= window/2 - 1`,
/// counting only in-bounds pixels) and `m` the mean of `R`. Pixels where
/// `F == 0` are set to `m`.
pub fn flat_field_correct_with(img: &GrayImage, side: usize, window: usize) -> GrayImage {
    let resized = img.resize_bilinear(side, side).expect("side is nonzero");
    let r = resized.pixels();
    let m = resized.mean();
    let blur = box_mean(r, side, side, window);
    let data: Vec<f32> = r
        .iter()
        .zip(&blur)
        .map(|(&v, &f)| {
            if f == 0.0 {
                m as f32
            } else {
                (v as f64 * m / f).clamp(0.0, 255.0) as f32
            }
        })
        .collect();
    GrayImage::from_vec(side, side, data).expect("values clamped to range")
}

/// Box mean over a `window x window` neighborhood, normalized by the number
/// of in-bounds pixels.
pub(crate) fn box_mean(px: &[f32], w: usize, h: usize, window: usize) -> Vec<f64> {
    let stride = w + 1;
    let mut integral = vec![0.0f64; stride * (h + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += px[y * w + x] as f64;
            integral[(y + 1) * stride + x + 1] = integral[y * stride + x + 1] + row;
        }
    }
    let before = window / 2;
    let after = window - before;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let y0 = y.saturating_sub(before);
        let y1 = (y + after).min(h);
        for x in 0..w {
            let x0 = x.saturating_sub(before);
            let x1 = (x + after).min(w);
            let sum = integral[y1 * stride + x1] - integral[y0 * stride + x1] - integral[y1 * stride + x0]
                + integral[y0 * stride + x0];
            out[y * w + x] = sum / ((y1 - y0) * (x1 - x0)) as f64;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_dev(img: &GrayImage) -> f64 {
        let m = img.mean();
        (img.pixels().iter().map(|&v| (v as f64 - m).powi(2)).sum::<f64>() / img.pixels().len() as f64).sqrt()
    }

    #[test]
    fn constant_image_is_unchanged() {
        let img = GrayImage::filled(640, 480, 100.0).unwrap();
        let out = flat_field_correct(&img);
        assert_eq!(out.dimensions(), (1000, 1000));
        assert!(out.pixels().iter().all(|&v| (v - 100.0).abs() < 1e-4));
    }

    #[test]
    fn box_mean_matches_direct_window_sum() {
        let (w, h) = (37, 23);
        let px: Vec<f32> = (0..w * h).map(|i| ((i * 7919) % 256) as f32).collect();
        let fast = box_mean(&px, w, h, 6);
        for y in 0..h {
            for x in 0..w {
                let (mut sum, mut n) = (0.0, 0);
                for dy in -3i64..=2 {
                    for dx in -3i64..=2 {
                        let (xx, yy) = (x as i64 + dx, y as i64 + dy);
                        if xx >= 0 && yy >= 0 && xx < w as i64 && yy < h as i64 {
                            sum += px[yy as usize * w + xx as usize] as f64;
                            n += 1;
                        }
                    }
                }
                assert!((fast[y * w + x] - sum / n as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn flattens_linear_gradient() {
        let img = GrayImage::from_fn(1000, 1000, |x, _| 50.0 + 150.0 * x as f32 / 999.0).unwrap();
        let out = flat_field_correct(&img);
        assert!(std_dev(&out) < 0.1 * std_dev(&img));
        assert!((out.mean() - img.mean()).abs() < 1.0);

        // direct evaluation of C = R m / F at a few pixels
        let m = img.mean();
        for (x, y) in [(0usize, 0usize), (10, 500), (500, 500), (999, 999)] {
            let (mut sum, mut n) = (0.0, 0.0);
            for yy in y.saturating_sub(25)..(y + 25).min(1000) {
                for xx in x.saturating_sub(25)..(x + 25).min(1000) {
                    sum += img.get(xx, yy) as f64;
                    n += 1.0;
                }
            }
            let expected = img.get(x, y) as f64 * m / (sum / n);
            assert!((out.get(x, y) as f64 - expected).abs() < 1e-3, "pixel ({x},{y})");
        }
    }

    #[test]
    fn impulse_stays_finite() {
        let mut img = GrayImage::filled(1000, 1000, 0.0).unwrap();
        img.set(500, 500, 255.0);
        let out = flat_field_correct(&img);
        assert!(out.pixels().iter().all(|v| v.is_finite()));
        // far from the impulse F == 0, so the output is the mean
        assert!((out.get(0, 0) as f64 - img.mean()).abs() < 1e-6);
    }
}
