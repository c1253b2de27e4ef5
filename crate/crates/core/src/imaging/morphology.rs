use crate::image::GrayImage;

fn foreground(img: &GrayImage) -> Vec<bool> {
    img.pixels().iter().map(|&v| v > 127.5).collect()
}

fn to_image(mask: &[bool], w: usize, h: usize) -> GrayImage {
    let data = mask.iter().map(|&b| if b { 255.0 } else { 0.0 }).collect();
    GrayImage::from_vec(w, h, data).expect("mask matches image size")
}

/// 3x3 erosion (`all`) or dilation (`any`) with out-of-bounds pixels as 0.
fn filter3(mask: &[bool], w: usize, h: usize, erode: bool) -> Vec<bool> {
    let at = |x: i64, y: i64| -> bool {
        x >= 0 && y >= 0 && x < w as i64 && y < h as i64 && mask[y as usize * w + x as usize]
    };
    let mut out = vec![false; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut hits = 0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    hits += at(x + dx, y + dy) as u32;
                }
            }
            out[y as usize * w + x as usize] = if erode { hits == 9 } else { hits > 0 };
        }
    }
    out
}

pub fn erode3(binary: &GrayImage) -> GrayImage {
    let (w, h) = binary.dimensions();
    to_image(&filter3(&foreground(binary), w, h, true), w, h)
}

pub fn dilate3(binary: &GrayImage) -> GrayImage {
    let (w, h) = binary.dimensions();
    to_image(&filter3(&foreground(binary), w, h, false), w, h)
}

/// Morphological opening with a 3x3 square: one erosion then one dilation.
pub fn morph_open(binary: &GrayImage) -> GrayImage {
    let (w, h) = binary.dimensions();
    let eroded = filter3(&foreground(binary), w, h, true);
    to_image(&filter3(&eroded, w, h, false), w, h)
}
