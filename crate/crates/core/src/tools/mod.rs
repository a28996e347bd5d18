//! Glasses-side preprocessing toolbox: OCR extraction, document ROI
//! cropping, detector-based object cropping, probe downsampling, and
//! sharpness-based blur filtering.
//!
//! The reference OCR engine and detector are annotation-backed: they read
//! ground truth from corpus sidecar records so the pipeline runs without
//! shipping real models. Real engines plug in behind [`OcrEngine`] and
//! [`Detector`].

mod canny;

pub use canny::{canny_crop_rect, canny_edges, canny_roi};

use crate::codec::ImageBuffer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ToolError {
    #[error("no annotation available for this image")]
    MissingAnnotation,
    #[error("no tool registered for id {0}")]
    Unregistered(String),
}

/// The candidate preprocessing tools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToolId {
    Ocr,
    Canny,
    Object,
    None,
}

impl ToolId {
    pub fn as_str(self) -> &'static str {
        match self {
            ToolId::Ocr => "ocr",
            ToolId::Canny => "canny",
            ToolId::Object => "object",
            ToolId::None => "none",
        }
    }
}

/// Per-tool configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ToolConfig {
    Ocr { corruption_rate: f64 },
    Canny { low: f64, high: f64 },
    Object { conf_threshold: f64, margin: f64 },
    None,
}

/// Inventory of available tools and their configuration.
#[derive(Debug, Clone)]
pub struct ToolRegistry {
    tools: BTreeMap<ToolId, ToolConfig>,
}

impl Default for ToolRegistry {
    fn default() -> Self {
        let mut tools = BTreeMap::new();
        tools.insert(ToolId::Ocr, ToolConfig::Ocr { corruption_rate: 0.3 });
        tools.insert(ToolId::Canny, ToolConfig::Canny { low: 0.08, high: 0.2 });
        tools.insert(
            ToolId::Object,
            ToolConfig::Object {
                conf_threshold: 0.30,
                margin: 0.05,
            },
        );
        tools.insert(ToolId::None, ToolConfig::None);
        Self { tools }
    }
}

impl ToolRegistry {
    pub fn contains(&self, id: ToolId) -> bool {
        self.tools.contains_key(&id)
    }

    pub fn config(&self, id: ToolId) -> Result<&ToolConfig, ToolError> {
        self.tools
            .get(&id)
            .ok_or_else(|| ToolError::Unregistered(id.as_str().to_string()))
    }

    pub fn set(&mut self, id: ToolId, cfg: ToolConfig) {
        self.tools.insert(id, cfg);
    }
}

/// One question/answer pair, optionally tied to an image region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaPair {
    pub question: String,
    pub answer: String,
    /// `(x0, y0, x1, y1)` region holding the answer, if spatial.
    #[serde(default)]
    pub region: Option<(u32, u32, u32, u32)>,
}

/// Ground-truth sidecar record for one corpus image.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Annotation {
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub boxes: Vec<Detection>,
    #[serde(default)]
    pub categories: Vec<String>,
    #[serde(default)]
    pub qa_pairs: Vec<QaPair>,
}

/// One detection box in pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub confidence: f64,
    pub category: String,
}

/// Detector output for one frame.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionSet {
    pub boxes: Vec<Detection>,
}

impl DetectionSet {
    /// Keeps only the named categories.
    pub fn filter_categories(&self, keep: &[String]) -> DetectionSet {
        DetectionSet {
            boxes: self
                .boxes
                .iter()
                .filter(|b| keep.iter().any(|k| k == &b.category))
                .cloned()
                .collect(),
        }
    }
}

/// OCR backend: maps a frame to extracted UTF-8 text.
pub trait OcrEngine {
    fn extract(&self, img: &ImageBuffer) -> Result<String, ToolError>;
}

/// Reference OCR: replays the annotated ground-truth text, corrupting each
/// character independently with probability
/// `corruption_rate * (1 - sharpness / max_corpus_sharpness)` so that blur
/// degrades recognition the way it does for a real engine.
#[derive(Debug, Clone)]
pub struct AnnotationOcr {
    pub text: Option<String>,
    pub max_corpus_sharpness: f64,
    pub corruption_rate: f64,
    pub seed: u64,
}

const OCR_CHARSET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

impl OcrEngine for AnnotationOcr {
    fn extract(&self, img: &ImageBuffer) -> Result<String, ToolError> {
        let text = self.text.as_ref().ok_or(ToolError::MissingAnnotation)?;
        if text.is_empty() {
            return Ok(String::new());
        }
        let sharpness = sharpness_score(img);
        let norm = if self.max_corpus_sharpness > 0.0 {
            (sharpness / self.max_corpus_sharpness).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let p = (self.corruption_rate * (1.0 - norm)).clamp(0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let out = text
            .chars()
            .map(|c| {
                if rng.gen::<f64>() < p {
                    corrupt_char(c, &mut rng)
                } else {
                    c
                }
            })
            .collect();
        Ok(out)
    }
}

/// Replacement character guaranteed to differ from the original.
fn corrupt_char<R: Rng>(original: char, rng: &mut R) -> char {
    loop {
        let cand = OCR_CHARSET[rng.gen_range(0..OCR_CHARSET.len())] as char;
        if cand != original {
            return cand;
        }
    }
}

/// Extracts text from the frame via the configured engine.
pub fn ocr_extract(img: &ImageBuffer, engine: &dyn OcrEngine) -> Result<String, ToolError> {
    engine.extract(img)
}

/// Object detector backend.
pub trait Detector {
    fn detect(&self, img: &ImageBuffer) -> DetectionSet;
}

/// Reference detector: replays annotated boxes.
#[derive(Debug, Clone)]
pub struct AnnotationDetector {
    pub detections: DetectionSet,
}

impl Detector for AnnotationDetector {
    fn detect(&self, _img: &ImageBuffer) -> DetectionSet {
        self.detections.clone()
    }
}

/// Detector adapter that keeps only the listed categories, used when a
/// retrieved command narrows the intention to specific object classes.
pub struct CategoryFilter<'a> {
    pub inner: &'a dyn Detector,
    pub categories: Vec<String>,
}

impl Detector for CategoryFilter<'_> {
    fn detect(&self, img: &ImageBuffer) -> DetectionSet {
        self.inner.detect(img).filter_categories(&self.categories)
    }
}

/// Integer crop rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl CropRect {
    pub fn full(img: &ImageBuffer) -> Self {
        Self {
            x0: 0,
            y0: 0,
            x1: img.w,
            y1: img.h,
        }
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn apply(&self, img: &ImageBuffer) -> ImageBuffer {
        img.crop(self.y0, self.x0, self.height(), self.width())
            .expect("crop rect within image bounds")
    }
}

/// Merged detection rectangle with margin, before cropping. Detections
/// below `conf_threshold` are dropped; survivors merge into the minimal
/// enclosing rectangle, each side expanded by `margin` times the merged
/// width or height, rounded to the nearest integer and clamped to the
/// frame. No survivors means the full frame.
pub fn object_crop_rect(
    img: &ImageBuffer,
    detections: &DetectionSet,
    conf_threshold: f64,
    margin: f64,
) -> CropRect {
    let survivors: Vec<&Detection> = detections
        .boxes
        .iter()
        .filter(|b| b.confidence >= conf_threshold)
        .collect();
    if survivors.is_empty() {
        return CropRect::full(img);
    }
    let mut x0 = f64::INFINITY;
    let mut y0 = f64::INFINITY;
    let mut x1 = f64::NEG_INFINITY;
    let mut y1 = f64::NEG_INFINITY;
    for b in survivors {
        x0 = x0.min(b.x0);
        y0 = y0.min(b.y0);
        x1 = x1.max(b.x1);
        y1 = y1.max(b.y1);
    }
    let mw = x1 - x0;
    let mh = y1 - y0;
    let ex0 = (x0 - margin * mw).round().clamp(0.0, img.w as f64) as usize;
    let ey0 = (y0 - margin * mh).round().clamp(0.0, img.h as f64) as usize;
    let ex1 = (x1 + margin * mw).round().clamp(0.0, img.w as f64) as usize;
    let ey1 = (y1 + margin * mh).round().clamp(0.0, img.h as f64) as usize;
    CropRect {
        x0: ex0.min(img.w - 1),
        y0: ey0.min(img.h - 1),
        x1: ex1.max(ex0.min(img.w - 1) + 1).min(img.w),
        y1: ey1.max(ey0.min(img.h - 1) + 1).min(img.h),
    }
}

/// Detector-guided ROI crop.
pub fn object_roi(
    img: &ImageBuffer,
    detector: &dyn Detector,
    conf_threshold: f64,
    margin: f64,
) -> ImageBuffer {
    let det = detector.detect(img);
    object_crop_rect(img, &det, conf_threshold, margin).apply(img)
}

/// Bilinear resample to exactly 256x256 for intention probing.
pub fn downsample_probe(img: &ImageBuffer) -> ImageBuffer {
    resample_bilinear(img, 256, 256)
}

/// Bilinear resampling with half-pixel-center alignment.
pub fn resample_bilinear(img: &ImageBuffer, out_h: usize, out_w: usize) -> ImageBuffer {
    let mut out = ImageBuffer::new(out_h, out_w);
    let sy = img.h as f64 / out_h as f64;
    let sx = img.w as f64 / out_w as f64;
    for y in 0..out_h {
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (img.h - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(img.h - 1);
        let wy = fy - y0 as f64;
        for x in 0..out_w {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (img.w - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(img.w - 1);
            let wx = fx - x0 as f64;
            for c in 0..ImageBuffer::CHANNELS {
                let top = img.get(y0, x0, c) * (1.0 - wx) + img.get(y0, x1, c) * wx;
                let bot = img.get(y1, x0, c) * (1.0 - wx) + img.get(y1, x1, c) * wx;
                out.set(y, x, c, top * (1.0 - wy) + bot * wy);
            }
        }
    }
    out
}

/// Variance of the 3x3 Laplacian of the luma channel (edge replication).
pub fn sharpness_score(img: &ImageBuffer) -> f64 {
    let luma = img.luma();
    let (h, w) = (img.h, img.w);
    let at = |y: isize, x: isize| -> f64 {
        let y = y.clamp(0, h as isize - 1) as usize;
        let x = x.clamp(0, w as isize - 1) as usize;
        luma[y * w + x]
    };
    let mut responses = Vec::with_capacity(h * w);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let lap = at(y - 1, x) + at(y + 1, x) + at(y, x - 1) + at(y, x + 1) - 4.0 * at(y, x);
            responses.push(lap);
        }
    }
    let n = responses.len() as f64;
    let mean = responses.iter().sum::<f64>() / n;
    responses.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n
}

/// Indices kept after removing the `floor(fraction * N)` lowest scores.
/// Ties break by index ascending: the lower index is removed first.
pub fn filter_blurry_scores(scores: &[f64], fraction: f64) -> Vec<usize> {
    assert!((0.0..1.0).contains(&fraction), "fraction must be in [0, 1)");
    let remove = (fraction * scores.len() as f64).floor() as usize;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .expect("scores must be comparable")
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = order[remove..].to_vec();
    kept.sort_unstable();
    kept
}

/// Sharpness-based corpus filtering over in-memory images.
pub fn filter_blurry(images: &[ImageBuffer], fraction: f64) -> Vec<usize> {
    let scores: Vec<f64> = images.iter().map(sharpness_score).collect();
    filter_blurry_scores(&scores, fraction)
}
