//! JSON configuration for scenario runs and sweeps.

use semlink_core::CompressionRatio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Invalid(String),
    #[error("config I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    Text,
    Document,
    Scene,
}

impl CaseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseKind::Text => "text",
            CaseKind::Document => "document",
            CaseKind::Scene => "scene",
        }
    }

    /// The task label this case activates.
    pub fn label(self) -> &'static str {
        match self {
            CaseKind::Text => "text-reading",
            CaseKind::Document => "document",
            CaseKind::Scene => "scene",
        }
    }

    pub fn default_corpus_kind(self) -> CorpusKind {
        match self {
            CaseKind::Text => CorpusKind::Receipt,
            CaseKind::Document => CorpusKind::Document,
            CaseKind::Scene => CorpusKind::Scene,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationMode {
    FullImage,
    IntentionAware,
    IntentionStored,
    DirectVoice,
}

impl ActivationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ActivationMode::FullImage => "full_image",
            ActivationMode::IntentionAware => "intention_aware",
            ActivationMode::IntentionStored => "intention_stored",
            ActivationMode::DirectVoice => "direct_voice",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainKind {
    Baseline,
    Semantic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    Receipt,
    Document,
    Scene,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelCfg {
    pub k: usize,
    pub num_taps: usize,
    pub beta: f64,
    pub bler_threshold_db: f64,
    pub bler_slope_db: f64,
    /// `false` freezes the channel to unit gains (ESNR == transmit SNR).
    pub fading: bool,
}

impl Default for ChannelCfg {
    fn default() -> Self {
        Self {
            k: 64,
            num_taps: 8,
            beta: 5.0,
            bler_threshold_db: 4.0,
            bler_slope_db: 1.0,
            fading: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineCfg {
    pub rate: f64,
    pub bits_per_symbol: u32,
    /// Source-coded image payload model: bytes per pixel of the frame
    /// (3.0 is an uncompressed 24-bit raster).
    pub bytes_per_pixel: f64,
}

impl Default for BaselineCfg {
    fn default() -> Self {
        Self {
            rate: 0.5,
            bits_per_symbol: 4,
            bytes_per_pixel: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemanticCfg {
    /// QAM order for the bit-error model of packed latent bits.
    pub qam_m: u32,
    /// Compression ratio used for probe transmissions.
    pub probe_n: u32,
}

impl Default for SemanticCfg {
    fn default() -> Self {
        Self { qam_m: 16, probe_n: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolsCfg {
    pub canny_low: f64,
    pub canny_high: f64,
    pub conf_threshold: f64,
    pub margin: f64,
    pub ocr_corruption: f64,
}

impl Default for ToolsCfg {
    fn default() -> Self {
        Self {
            canny_low: 0.08,
            canny_high: 0.2,
            conf_threshold: 0.30,
            margin: 0.05,
            ocr_corruption: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsCfg {
    /// Answer-region PSNR needed to count an image-borne answer as
    /// recoverable.
    pub psnr_tau_db: f64,
    /// Optional synonym table override (JSON map of category -> synonyms).
    pub synonyms_path: Option<String>,
}

impl Default for MetricsCfg {
    fn default() -> Self {
        Self {
            psnr_tau_db: 18.0,
            synonyms_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerCfg {
    pub check_period_s: f64,
    pub memory_capacity: usize,
    /// Commands preloaded into the stored-command memory.
    pub seed_commands: Vec<String>,
}

impl Default for ControllerCfg {
    fn default() -> Self {
        Self {
            check_period_s: 1.0,
            memory_capacity: 16,
            seed_commands: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub count: usize,
    pub kind: CorpusKind,
    pub padding_fraction: f64,
    pub noise_sigma: f64,
    pub lighting_jitter: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            count: 30,
            kind: CorpusKind::Receipt,
            padding_fraction: 0.30,
            noise_sigma: 0.02,
            lighting_jitter: 0.1,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub case: CaseKind,
    pub mode: ActivationMode,
    pub chain: ChainKind,
    pub n: u32,
    /// Optional extra ratios for sweeps; empty means just `n`.
    pub n_list: Vec<u32>,
    pub snr_db: Vec<f64>,
    pub seeds: Vec<u64>,
    pub corpus: CorpusSpec,
    /// Path to a scripted-oracle JSON file; absent means the
    /// annotation-backed oracle.
    pub oracle_script: Option<String>,
    /// Ground-truth instruction used by the direct-voice mode.
    pub voice_command: Option<String>,
    /// Fraction of worst-sharpness images excluded before the run.
    pub blur_filter_fraction: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            case: CaseKind::Text,
            mode: ActivationMode::IntentionAware,
            chain: ChainKind::Semantic,
            n: 4,
            n_list: Vec::new(),
            snr_db: vec![10.0],
            seeds: vec![1],
            corpus: CorpusSpec::default(),
            oracle_script: None,
            voice_command: None,
            blur_filter_fraction: 0.0,
        }
    }
}

impl ScenarioConfig {
    /// Ratios the run crosses over: `n_list` when given, else `[n]`.
    pub fn ratios(&self) -> Vec<CompressionRatio> {
        let ns = if self.n_list.is_empty() {
            vec![self.n]
        } else {
            self.n_list.clone()
        };
        ns.iter()
            .filter_map(|&n| CompressionRatio::from_divisor(n))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub master_seed: u64,
    pub channel: ChannelCfg,
    pub baseline: BaselineCfg,
    pub semantic: SemanticCfg,
    pub tools: ToolsCfg,
    pub metrics: MetricsCfg,
    pub controller: ControllerCfg,
    pub scenario: ScenarioConfig,
}

impl SimConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: SimConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Master seed, honoring the SEMLINK_SEED environment override.
    pub fn effective_seed(&self) -> u64 {
        match std::env::var("SEMLINK_SEED") {
            Ok(v) => v.parse().unwrap_or(self.master_seed),
            Err(_) => self.master_seed,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.channel.k == 0 {
            return fail("channel.k must be >= 1".into());
        }
        if self.channel.num_taps == 0 || self.channel.num_taps > self.channel.k {
            return fail(format!(
                "channel.num_taps must be in 1..=k, got {}",
                self.channel.num_taps
            ));
        }
        if !(self.channel.beta > 0.0) {
            return fail("channel.beta must be > 0".into());
        }
        if !(self.channel.bler_slope_db > 0.0) {
            return fail("channel.bler_slope_db must be > 0".into());
        }
        if !(self.baseline.rate > 0.0 && self.baseline.rate <= 1.0) {
            return fail("baseline.rate must be in (0, 1]".into());
        }
        if !matches!(self.baseline.bits_per_symbol, 2 | 4 | 6 | 8) {
            return fail("baseline.bits_per_symbol must be one of 2,4,6,8".into());
        }
        if !(self.baseline.bytes_per_pixel > 0.0) {
            return fail("baseline.bytes_per_pixel must be > 0".into());
        }
        if !matches!(self.semantic.qam_m, 4 | 16 | 64 | 256) {
            return fail("semantic.qam_m must be a square QAM order (4,16,64,256)".into());
        }
        if CompressionRatio::from_divisor(self.semantic.probe_n).is_none() {
            return fail("semantic.probe_n must be one of 2,4,8,16".into());
        }
        if !(self.tools.canny_low >= 0.0 && self.tools.canny_low < self.tools.canny_high) {
            return fail("tools canny thresholds must satisfy 0 <= low < high".into());
        }
        for (name, v) in [
            ("tools.conf_threshold", self.tools.conf_threshold),
            ("tools.margin", self.tools.margin),
            ("tools.ocr_corruption", self.tools.ocr_corruption),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must be in [0, 1]"));
            }
        }
        if !(self.controller.check_period_s > 0.0) {
            return fail("controller.check_period_s must be > 0".into());
        }
        let s = &self.scenario;
        if CompressionRatio::from_divisor(s.n).is_none() {
            return fail(format!("scenario.n must be one of 2,4,8,16, got {}", s.n));
        }
        for &n in &s.n_list {
            if CompressionRatio::from_divisor(n).is_none() {
                return fail(format!("scenario.n_list entry {n} is not one of 2,4,8,16"));
            }
        }
        if s.snr_db.is_empty() {
            return fail("scenario.snr_db must be nonempty".into());
        }
        if s.seeds.is_empty() {
            return fail("scenario.seeds must be nonempty".into());
        }
        if s.corpus.count == 0 {
            return fail("corpus.count must be >= 1".into());
        }
        if !(0.0..1.0).contains(&s.blur_filter_fraction) {
            return fail("scenario.blur_filter_fraction must be in [0, 1)".into());
        }
        if !(s.corpus.padding_fraction >= 0.0) {
            return fail("corpus.padding_fraction must be >= 0".into());
        }
        Ok(())
    }
}
