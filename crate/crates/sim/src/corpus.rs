//! Deterministic synthetic corpus generator.
//!
//! Three kinds of scene stand in for the evaluation datasets: receipts
//! (text lines on paper), documents (a bordered page with text and one
//! chart region), and object scenes (colored shapes with annotated
//! bounding boxes). Capture augmentation adds background padding, sensor
//! noise, and a global lighting perturbation; receipts additionally draw a
//! per-image blur level so a known fraction of the corpus is degraded.
//! Every image is a pure function of `(spec.seed, index)`.

use crate::config::{CorpusKind, CorpusSpec};
use crate::font;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semlink_core::codec::ImageBuffer;
use semlink_core::tools::{Annotation, Detection, QaPair};
use std::io::Write;
use std::path::Path;

pub struct CorpusGenerator {
    spec: CorpusSpec,
}

impl CorpusGenerator {
    pub fn new(spec: CorpusSpec) -> Self {
        Self { spec }
    }

    pub fn count(&self) -> usize {
        self.spec.count
    }

    pub fn kind(&self) -> CorpusKind {
        self.spec.kind
    }

    /// Canvas dims after background padding of an even-rounded content box.
    pub fn canvas_dims(content_w: usize, content_h: usize, padding: f64) -> (usize, usize) {
        let round_even = |v: f64| -> usize {
            let r = v.round() as usize;
            r + (r % 2)
        };
        (
            round_even(content_w as f64 * (1.0 + padding)),
            round_even(content_h as f64 * (1.0 + padding)),
        )
    }

    /// Generates image `index` with its ground-truth sidecar record.
    pub fn image(&self, index: usize) -> (ImageBuffer, Annotation) {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.spec.seed, index as u64));
        match self.spec.kind {
            CorpusKind::Receipt => self.receipt(index, &mut rng),
            CorpusKind::Document => self.document(index, &mut rng),
            CorpusKind::Scene => self.scene(index, &mut rng),
        }
    }

    fn receipt(&self, index: usize, rng: &mut ChaCha8Rng) -> (ImageBuffer, Annotation) {
        const CONTENT_W: usize = 280;
        const CONTENT_H: usize = 360;
        let (cw, ch) = Self::canvas_dims(CONTENT_W, CONTENT_H, self.spec.padding_fraction);
        let mut img = ImageBuffer::constant(ch, cw, 0.25);
        let (ox, oy) = content_offset(rng, cw, ch, CONTENT_W, CONTENT_H);
        fill_rect(&mut img, ox, oy, CONTENT_W, CONTENT_H, [0.97, 0.96, 0.94]);

        let store = rng.gen_range(10..99);
        let month = rng.gen_range(1..=12);
        let day = rng.gen_range(1..=28);
        let mut lines = vec![
            "RECEIPT".to_string(),
            format!("STORE NO {store}"),
            format!("DATE 2025-{month:02}-{day:02}"),
        ];
        let mut cents_total = 0u32;
        for label in ["A", "B", "C"] {
            let cents = rng.gen_range(150..2500);
            cents_total += cents;
            lines.push(format!("ITEM {label} {}.{:02}", cents / 100, cents % 100));
        }
        let tax = cents_total / 10;
        cents_total += tax;
        lines.push(format!("TAX {}.{:02}", tax / 100, tax % 100));
        let total = format!("{}.{:02}", cents_total / 100, cents_total % 100);
        lines.push(format!("TOTAL {total}"));

        let scale = 2;
        let line_h = font::GLYPH_H * scale + 6;
        let mut total_region = None;
        for (li, line) in lines.iter().enumerate() {
            let y = oy + 18 + li * line_h;
            let x = ox + 16;
            draw_text(&mut img, x, y, line, scale, [0.08, 0.08, 0.1]);
            if line.starts_with("TOTAL") {
                let w = line.chars().count() * (font::GLYPH_W + 1) * scale;
                total_region = Some((
                    x as u32,
                    y as u32,
                    (x + w) as u32,
                    (y + font::GLYPH_H * scale) as u32,
                ));
            }
        }

        // One in ten receipts is captured badly out of focus.
        let blur_sigma = if index % 10 == 7 {
            rng.gen_range(1.6..2.4)
        } else {
            rng.gen_range(0.0..0.1)
        };
        if blur_sigma > 0.05 {
            img = gaussian_blur_image(&img, blur_sigma);
        }
        self.apply_capture_noise(&mut img, rng);

        let annotation = Annotation {
            text: lines.join("\n"),
            boxes: vec![],
            categories: vec![],
            qa_pairs: vec![QaPair {
                question: "what is the total amount".into(),
                answer: total,
                region: total_region,
            }],
        };
        (img, annotation)
    }

    fn document(&self, _index: usize, rng: &mut ChaCha8Rng) -> (ImageBuffer, Annotation) {
        const PAGE_W: usize = 600;
        const PAGE_H: usize = 440;
        let (cw, ch) = Self::canvas_dims(PAGE_W, PAGE_H, self.spec.padding_fraction);
        let mut img = ImageBuffer::constant(ch, cw, 0.32);
        let (ox, oy) = content_offset(rng, cw, ch, PAGE_W, PAGE_H);
        fill_rect(&mut img, ox, oy, PAGE_W, PAGE_H, [0.96, 0.96, 0.95]);
        outline_rect(&mut img, ox, oy, PAGE_W, PAGE_H, 3, [0.05, 0.05, 0.08]);

        let scale = 2;
        let line_h = font::GLYPH_H * scale + 8;
        let report_no = rng.gen_range(1..30);
        draw_text(
            &mut img,
            ox + 20,
            oy + 16,
            &format!("QUARTERLY REPORT {report_no}"),
            scale,
            [0.05, 0.05, 0.08],
        );
        let mut lines = vec![format!("QUARTERLY REPORT {report_no}")];
        let mut sum = 0u32;
        for i in 0..4 {
            let v = rng.gen_range(10..90);
            sum += v;
            let line = format!("SECTION {} VALUE {v}", i + 1);
            draw_text(
                &mut img,
                ox + 20,
                oy + 16 + (i + 1) * line_h,
                &line,
                scale,
                [0.1, 0.1, 0.12],
            );
            lines.push(line);
        }

        // Simple bar chart region on the right half of the page.
        let chart_x = ox + PAGE_W / 2 + 10;
        let chart_y = oy + 30;
        let chart_w = PAGE_W / 2 - 40;
        let chart_h = 160;
        outline_rect(&mut img, chart_x, chart_y, chart_w, chart_h, 2, [0.1, 0.1, 0.15]);
        let bars = rng.gen_range(3..6);
        let bar_w = chart_w / (2 * bars);
        for b in 0..bars {
            let bh = rng.gen_range(20..chart_h - 20);
            fill_rect(
                &mut img,
                chart_x + bar_w + b * 2 * bar_w,
                chart_y + chart_h - bh,
                bar_w,
                bh,
                [0.2, 0.3, 0.6],
            );
        }

        // The answer line is rendered large so it stays legible through
        // the codec's coefficient truncation.
        let answer_scale = 4;
        let answer_line = format!("TOTAL VALUE {sum}");
        let ans_x = ox + 20;
        let ans_y = oy + PAGE_H - 60;
        draw_text(&mut img, ans_x, ans_y, &answer_line, answer_scale, [0.05, 0.05, 0.08]);
        lines.push(answer_line);
        let ans_w = lines.last().unwrap().chars().count() * (font::GLYPH_W + 1) * answer_scale;
        let region = (
            ans_x as u32,
            ans_y as u32,
            (ans_x + ans_w) as u32,
            (ans_y + font::GLYPH_H * answer_scale) as u32,
        );

        self.apply_capture_noise(&mut img, rng);

        let annotation = Annotation {
            text: lines.join("\n"),
            boxes: vec![],
            categories: vec![],
            qa_pairs: vec![QaPair {
                question: "what is the total value".into(),
                answer: sum.to_string(),
                region: Some(region),
            }],
        };
        (img, annotation)
    }

    fn scene(&self, _index: usize, rng: &mut ChaCha8Rng) -> (ImageBuffer, Annotation) {
        const W: usize = 640;
        const H: usize = 480;
        let mut img = ImageBuffer::new(H, W);
        // Sky-to-ground gradient background.
        for y in 0..H {
            let t = y as f64 / H as f64;
            let sky = [0.55 - 0.2 * t, 0.65 - 0.25 * t, 0.8 - 0.35 * t];
            for x in 0..W {
                for c in 0..3 {
                    img.set(y, x, c, sky[c]);
                }
            }
        }
        // Crossing stripes near the bottom to anchor the street context.
        for stripe in 0..6 {
            let x = 140 + stripe * 70;
            fill_rect(&mut img, x, 400, 36, 60, [0.85, 0.85, 0.85]);
        }

        let mut boxes: Vec<Detection> = Vec::new();
        let conf = |rng: &mut ChaCha8Rng| -> f64 {
            if rng.gen_bool(0.15) {
                rng.gen_range(0.10..0.28)
            } else {
                rng.gen_range(0.45..0.97)
            }
        };

        // Pedestrians cluster around the crossing.
        let persons = rng.gen_range(2..=4usize);
        for _ in 0..persons {
            let w = rng.gen_range(26..40);
            let h = rng.gen_range(90..130);
            let x = rng.gen_range(180..420usize).min(W - w - 1);
            let y = rng.gen_range(230..(460 - h));
            draw_person(&mut img, x, y, w, h, rng);
            boxes.push(det(x, y, w, h, conf(rng), "person"));
        }
        // One or two cars to the sides.
        for _ in 0..rng.gen_range(1..=2usize) {
            let w = rng.gen_range(110..150);
            let h = rng.gen_range(50..70);
            let x = if rng.gen_bool(0.5) {
                rng.gen_range(40..140)
            } else {
                rng.gen_range(440..(W - w - 1))
            };
            let y = rng.gen_range(260..360);
            draw_car(&mut img, x, y, w, h, rng);
            boxes.push(det(x, y, w, h, conf(rng), "car"));
        }
        if rng.gen_bool(0.6) {
            let (w, h) = (46, 32);
            let x = rng.gen_range(200..400);
            let y = rng.gen_range(380..440);
            fill_ellipse(&mut img, x, y, w, h, [0.45, 0.3, 0.15]);
            boxes.push(det(x, y, w, h, conf(rng), "dog"));
        }
        if rng.gen_bool(0.5) {
            let (w, h) = (60, 130);
            let x = if rng.gen_bool(0.5) { 30 } else { 560 };
            let y = 180;
            draw_tree(&mut img, x, y, w, h);
            boxes.push(det(x, y, w, h, conf(rng), "tree"));
        }

        let mut categories: Vec<String> = Vec::new();
        for b in &boxes {
            if !categories.contains(&b.category) {
                categories.push(b.category.clone());
            }
        }

        self.apply_capture_noise(&mut img, rng);

        let annotation = Annotation {
            text: "pedestrian crossing scene with cars".into(),
            boxes,
            categories: categories.clone(),
            qa_pairs: vec![QaPair {
                question: "describe the scene".into(),
                answer: categories.join(", "),
                region: None,
            }],
        };
        (img, annotation)
    }

    /// Additive sensor noise plus a global lighting gain, clamped to range.
    fn apply_capture_noise(&self, img: &mut ImageBuffer, rng: &mut ChaCha8Rng) {
        let gain = 1.0 + rng.gen_range(-self.spec.lighting_jitter..=self.spec.lighting_jitter);
        let sigma = self.spec.noise_sigma;
        for v in img.data.iter_mut() {
            let noise = if sigma > 0.0 {
                let (u1, u2): (f64, f64) = (rng.gen_range(f64::MIN_POSITIVE..1.0), rng.gen());
                sigma * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            } else {
                0.0
            };
            *v = (*v * gain + noise).clamp(0.0, 1.0);
        }
    }

    /// Writes PNG images plus an `annotations.jsonl` sidecar file.
    pub fn write_to_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut jsonl = std::fs::File::create(dir.join("annotations.jsonl"))?;
        for i in 0..self.spec.count {
            let (img, ann) = self.image(i);
            write_png(&img, &dir.join(format!("{i:04}.png")))?;
            let mut record = serde_json::to_value(&ann).expect("annotation serializes");
            record["image"] = serde_json::Value::String(format!("{i:04}.png"));
            writeln!(jsonl, "{record}")?;
        }
        Ok(())
    }
}

fn det(x: usize, y: usize, w: usize, h: usize, confidence: f64, category: &str) -> Detection {
    Detection {
        x0: x as f64,
        y0: y as f64,
        x1: (x + w) as f64,
        y1: (y + h) as f64,
        confidence,
        category: category.into(),
    }
}

fn mix(seed: u64, index: u64) -> u64 {
    // splitmix64 over the pair.
    let mut z = seed ^ index.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn content_offset(
    rng: &mut ChaCha8Rng,
    cw: usize,
    ch: usize,
    content_w: usize,
    content_h: usize,
) -> (usize, usize) {
    let max_x = cw - content_w;
    let max_y = ch - content_h;
    (
        max_x / 4 + rng.gen_range(0..=(max_x / 2).max(1)),
        max_y / 4 + rng.gen_range(0..=(max_y / 2).max(1)),
    )
}

pub fn fill_rect(img: &mut ImageBuffer, x: usize, y: usize, w: usize, h: usize, color: [f64; 3]) {
    for yy in y..(y + h).min(img.h) {
        for xx in x..(x + w).min(img.w) {
            for c in 0..3 {
                img.set(yy, xx, c, color[c]);
            }
        }
    }
}

pub fn outline_rect(
    img: &mut ImageBuffer,
    x: usize,
    y: usize,
    w: usize,
    h: usize,
    thickness: usize,
    color: [f64; 3],
) {
    fill_rect(img, x, y, w, thickness, color);
    fill_rect(img, x, y + h - thickness, w, thickness, color);
    fill_rect(img, x, y, thickness, h, color);
    fill_rect(img, x + w - thickness, y, thickness, h, color);
}

fn fill_ellipse(img: &mut ImageBuffer, x: usize, y: usize, w: usize, h: usize, color: [f64; 3]) {
    let (cx, cy) = (x as f64 + w as f64 / 2.0, y as f64 + h as f64 / 2.0);
    let (rx, ry) = (w as f64 / 2.0, h as f64 / 2.0);
    for yy in y..(y + h).min(img.h) {
        for xx in x..(x + w).min(img.w) {
            let dx = (xx as f64 + 0.5 - cx) / rx;
            let dy = (yy as f64 + 0.5 - cy) / ry;
            if dx * dx + dy * dy <= 1.0 {
                for c in 0..3 {
                    img.set(yy, xx, c, color[c]);
                }
            }
        }
    }
}

fn draw_person(img: &mut ImageBuffer, x: usize, y: usize, w: usize, h: usize, rng: &mut ChaCha8Rng) {
    let shade = rng.gen_range(0.1..0.5);
    let body = [shade, shade * 0.6, shade * 0.8];
    let head_h = h / 4;
    fill_ellipse(img, x + w / 4, y, w / 2, head_h, [0.85, 0.7, 0.6]);
    fill_rect(img, x + w / 6, y + head_h, 2 * w / 3, h - head_h, body);
}

fn draw_car(img: &mut ImageBuffer, x: usize, y: usize, w: usize, h: usize, rng: &mut ChaCha8Rng) {
    let hue = rng.gen_range(0.0..1.0);
    let body = [0.3 + 0.6 * hue, 0.25, 0.8 - 0.6 * hue];
    fill_rect(img, x, y + h / 3, w, 2 * h / 3, body);
    fill_rect(img, x + w / 5, y, 3 * w / 5, h / 3, [0.6, 0.7, 0.8]);
    let wheel = h / 3;
    fill_ellipse(img, x + w / 8, y + h - wheel / 2, wheel, wheel, [0.05, 0.05, 0.05]);
    fill_ellipse(img, x + w - w / 8 - wheel, y + h - wheel / 2, wheel, wheel, [0.05, 0.05, 0.05]);
}

fn draw_tree(img: &mut ImageBuffer, x: usize, y: usize, w: usize, h: usize) {
    fill_rect(img, x + w / 2 - 4, y + h / 2, 8, h / 2, [0.4, 0.25, 0.1]);
    fill_ellipse(img, x, y, w, 2 * h / 3, [0.15, 0.5, 0.2]);
}

pub fn draw_text(
    img: &mut ImageBuffer,
    x: usize,
    y: usize,
    text: &str,
    scale: usize,
    color: [f64; 3],
) {
    let mut cx = x;
    for ch in text.chars() {
        let g = font::glyph(ch);
        for (ry, row) in g.iter().enumerate() {
            for rx in 0..font::GLYPH_W {
                if row & (1 << (font::GLYPH_W - 1 - rx)) != 0 {
                    fill_rect(img, cx + rx * scale, y + ry * scale, scale, scale, color);
                }
            }
        }
        cx += (font::GLYPH_W + 1) * scale;
    }
}

/// Full-image Gaussian blur used to degrade a fraction of receipt captures.
pub fn gaussian_blur_image(img: &ImageBuffer, sigma: f64) -> ImageBuffer {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel = Vec::with_capacity(2 * radius as usize + 1);
    for d in -radius..=radius {
        kernel.push((-(d * d) as f64 / (2.0 * sigma * sigma)).exp());
    }
    let norm: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= norm;
    }
    let (h, w) = (img.h, img.w);
    let mut tmp = ImageBuffer::new(h, w);
    for y in 0..h {
        for x in 0..w as isize {
            for c in 0..3 {
                let mut acc = 0.0;
                for (ki, k) in kernel.iter().enumerate() {
                    let sx = (x + ki as isize - radius).clamp(0, w as isize - 1) as usize;
                    acc += k * img.get(y, sx, c);
                }
                tmp.set(y, x as usize, c, acc);
            }
        }
    }
    let mut out = ImageBuffer::new(h, w);
    for y in 0..h as isize {
        for x in 0..w {
            for c in 0..3 {
                let mut acc = 0.0;
                for (ki, k) in kernel.iter().enumerate() {
                    let sy = (y + ki as isize - radius).clamp(0, h as isize - 1) as usize;
                    acc += k * tmp.get(sy, x, c);
                }
                out.set(y as usize, x, c, acc);
            }
        }
    }
    out
}

/// 8-bit RGB PNG encoding.
pub fn write_png(img: &ImageBuffer, path: &Path) -> std::io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut encoder = png::Encoder::new(std::io::BufWriter::new(file), img.w as u32, img.h as u32);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header()?;
    let bytes: Vec<u8> = img
        .data
        .iter()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    writer.write_image_data(&bytes)?;
    Ok(())
}
