//! Canny-based document ROI cropping: Gaussian blur, Sobel gradients,
//! non-maximum suppression, double-threshold hysteresis, then the bounding
//! box of the largest connected edge component.

use crate::codec::ImageBuffer;
use super::CropRect;

const SIGMA: f64 = 1.4;
/// Crop falls back to the full frame when the component bounding box
/// covers less than this fraction of it.
const MIN_COVERAGE: f64 = 0.05;

/// Crops the frame to the dominant edge structure. Thresholds apply to the
/// Sobel gradient magnitude of the blurred luma (image values in `[0, 1]`).
pub fn canny_roi(img: &ImageBuffer, low: f64, high: f64) -> ImageBuffer {
    canny_crop_rect(img, low, high).apply(img)
}

/// The crop rectangle [`canny_roi`] would apply.
pub fn canny_crop_rect(img: &ImageBuffer, low: f64, high: f64) -> CropRect {
    assert!(0.0 <= low && low < high, "thresholds must satisfy 0 <= low < high");
    let edges = canny_edges(img, low, high);
    match largest_component_bbox(&edges, img.h, img.w) {
        Some(rect)
            if (rect.width() * rect.height()) as f64
                >= MIN_COVERAGE * (img.h * img.w) as f64 =>
        {
            rect
        }
        _ => CropRect::full(img),
    }
}

/// Binary edge map from the full Canny chain.
pub fn canny_edges(img: &ImageBuffer, low: f64, high: f64) -> Vec<bool> {
    let (h, w) = (img.h, img.w);
    let blurred = gaussian_blur(&img.luma(), h, w, SIGMA);

    // Sobel gradients with replicated borders.
    let at = |buf: &[f64], y: isize, x: isize| -> f64 {
        let y = y.clamp(0, h as isize - 1) as usize;
        let x = x.clamp(0, w as isize - 1) as usize;
        buf[y * w + x]
    };
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    let mut mag = vec![0.0; h * w];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            let dx = at(&blurred, y - 1, x + 1) + 2.0 * at(&blurred, y, x + 1)
                + at(&blurred, y + 1, x + 1)
                - at(&blurred, y - 1, x - 1)
                - 2.0 * at(&blurred, y, x - 1)
                - at(&blurred, y + 1, x - 1);
            let dy = at(&blurred, y + 1, x - 1) + 2.0 * at(&blurred, y + 1, x)
                + at(&blurred, y + 1, x + 1)
                - at(&blurred, y - 1, x - 1)
                - 2.0 * at(&blurred, y - 1, x)
                - at(&blurred, y - 1, x + 1);
            gx[i] = dx;
            gy[i] = dy;
            mag[i] = dx.hypot(dy);
        }
    }

    // Non-maximum suppression along the quantized gradient direction;
    // the outermost ring is suppressed.
    let mut thin = vec![0.0; h * w];
    if h >= 3 && w >= 3 {
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let i = y * w + x;
                let angle = gy[i].atan2(gx[i]).to_degrees();
                let angle = if angle < 0.0 { angle + 180.0 } else { angle };
                let (n1, n2) = if !(22.5..157.5).contains(&angle) {
                    (mag[i - 1], mag[i + 1])
                } else if angle < 67.5 {
                    (mag[(y - 1) * w + (x - 1)], mag[(y + 1) * w + (x + 1)])
                } else if angle < 112.5 {
                    (mag[(y - 1) * w + x], mag[(y + 1) * w + x])
                } else {
                    (mag[(y - 1) * w + (x + 1)], mag[(y + 1) * w + (x - 1)])
                };
                if mag[i] >= n1 && mag[i] >= n2 {
                    thin[i] = mag[i];
                }
            }
        }
    }

    // Double-threshold hysteresis: strong edges seed a flood over weak ones.
    let mut edge = vec![false; h * w];
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if thin[i] >= high && !edge[i] {
                edge[i] = true;
                stack.push((y, x));
                while let Some((cy, cx)) = stack.pop() {
                    for dy in -1isize..=1 {
                        for dx in -1isize..=1 {
                            let ny = cy as isize + dy;
                            let nx = cx as isize + dx;
                            if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                                continue;
                            }
                            let j = ny as usize * w + nx as usize;
                            if !edge[j] && thin[j] >= low {
                                edge[j] = true;
                                stack.push((ny as usize, nx as usize));
                            }
                        }
                    }
                }
            }
        }
    }
    edge
}

/// Separable Gaussian blur with clamped borders.
fn gaussian_blur(luma: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel = Vec::with_capacity(2 * radius as usize + 1);
    for d in -radius..=radius {
        kernel.push((-(d * d) as f64 / (2.0 * sigma * sigma)).exp());
    }
    let norm: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= norm;
    }

    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                let sx = (x + ki as isize - radius).clamp(0, w as isize - 1) as usize;
                acc += k * luma[y * w + sx];
            }
            tmp[y * w + x as usize] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h as isize {
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                let sy = (y + ki as isize - radius).clamp(0, h as isize - 1) as usize;
                acc += k * tmp[sy * w + x];
            }
            out[y as usize * w + x] = acc;
        }
    }
    out
}

/// Bounding box of the 8-connected edge component with the most pixels.
fn largest_component_bbox(edges: &[bool], h: usize, w: usize) -> Option<CropRect> {
    let mut visited = vec![false; h * w];
    let mut best: Option<(usize, CropRect)> = None;
    let mut stack = Vec::new();
    for start in 0..h * w {
        if !edges[start] || visited[start] {
            continue;
        }
        visited[start] = true;
        stack.push(start);
        let mut count = 0usize;
        let (mut x0, mut y0, mut x1, mut y1) = (w, h, 0usize, 0usize);
        while let Some(i) = stack.pop() {
            count += 1;
            let (y, x) = (i / w, i % w);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let ny = y as isize + dy;
                    let nx = x as isize + dx;
                    if ny < 0 || nx < 0 || ny >= h as isize || nx >= w as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if edges[j] && !visited[j] {
                        visited[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        let rect = CropRect {
            x0,
            y0,
            x1: x1 + 1,
            y1: y1 + 1,
        };
        if best.as_ref().map_or(true, |(c, _)| count > *c) {
            best = Some((count, rect));
        }
    }
    best.map(|(_, rect)| rect)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn white_page(h: usize, w: usize, top: usize, left: usize, ph: usize, pw: usize) -> ImageBuffer {
        let mut img = ImageBuffer::new(h, w);
        for y in top..top + ph {
            for x in left..left + pw {
                for c in 0..3 {
                    img.set(y, x, c, 1.0);
                }
            }
        }
        img
    }

    #[test]
    fn page_on_black_background_is_cropped_to_its_box() {
        let img = white_page(200, 300, 40, 60, 120, 180);
        let rect = canny_crop_rect(&img, 0.08, 0.2);
        // Known rectangle spans rows 40..160 and cols 60..240.
        assert!((rect.x0 as i64 - 60).abs() <= 1, "x0={}", rect.x0);
        assert!((rect.y0 as i64 - 40).abs() <= 1, "y0={}", rect.y0);
        assert!((rect.x1 as i64 - 240).abs() <= 1, "x1={}", rect.x1);
        assert!((rect.y1 as i64 - 160).abs() <= 1, "y1={}", rect.y1);

        // Crop content matches the source pixels exactly.
        let crop = rect.apply(&img);
        for y in 0..crop.h {
            for x in 0..crop.w {
                assert_eq!(crop.get(y, x, 0), img.get(rect.y0 + y, rect.x0 + x, 0));
            }
        }
    }

    #[test]
    fn constant_image_falls_back_to_full_frame() {
        let img = ImageBuffer::constant(100, 150, 0.4);
        let crop = canny_roi(&img, 0.08, 0.2);
        assert_eq!((crop.h, crop.w), (100, 150));
    }

    #[test]
    fn frame_filling_page_keeps_frame_dims() {
        let img = white_page(128, 128, 2, 2, 124, 124);
        let crop = canny_roi(&img, 0.08, 0.2);
        assert!(crop.h >= 120 && crop.w >= 120);
    }

    #[test]
    fn tiny_structure_falls_back_to_full_frame() {
        // A 4x4 dot covers far less than 5% of the frame.
        let img = white_page(200, 200, 98, 98, 4, 4);
        let crop = canny_roi(&img, 0.08, 0.2);
        assert_eq!((crop.h, crop.w), (200, 200));
    }

    #[test]
    fn canny_is_deterministic() {
        let img = white_page(120, 160, 20, 30, 60, 90);
        let a = canny_edges(&img, 0.08, 0.2);
        let b = canny_edges(&img, 0.08, 0.2);
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_one_pixel_image() {
        let img = ImageBuffer::constant(1, 1, 0.9);
        let crop = canny_roi(&img, 0.08, 0.2);
        assert_eq!((crop.h, crop.w), (1, 1));
    }
}
