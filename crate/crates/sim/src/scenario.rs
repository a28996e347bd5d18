//! Scenario runner: wires corpus, tools, codec, channel, and controller
//! per configuration and produces a transmission ledger plus task
//! outcomes. Everything is a pure function of the configuration and the
//! master seed.

use crate::config::{ActivationMode, CaseKind, ChainKind, SimConfig};
use crate::corpus::CorpusGenerator;
use crate::oracle::{AnnotationOracle, ScenarioOracle, ScriptedOracle};
use semlink_core::channel::{eesm, linear_to_db, sample_channel, ChannelRealization, LinkAbstractionConfig};
use semlink_core::codec::{
    dequantize, encode_latent, quantize, wire, BlockDct16, ImageBuffer, Transform,
};
use semlink_core::intent::{
    retrieve_command, similarity_tokens, Action, Controller, Event, TaskSpace, VlmOracle,
};
use semlink_core::metrics::{object_coverage, psnr, SynonymTable, TaskOutcome};
use semlink_core::tools::{
    canny_crop_rect, filter_blurry_scores, object_crop_rect, ocr_extract, sharpness_score,
    AnnotationOcr, Annotation, CropRect, DetectionSet, ToolId, ToolRegistry,
};
use semlink_core::transport::{
    baseline_transmit, ofdm_frames, pack_latent, semantic_transmit, unpack_latent, Chain,
    SymbolStream, TransmissionRecord,
};
use semlink_core::CompressionRatio;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("oracle script gap: {0}")]
    OracleGap(String),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Internal(String),
}

impl SimError {
    /// CLI exit code: 2 for configuration problems, 3 for oracle gaps.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) | SimError::Io(_) => 2,
            SimError::OracleGap(_) => 3,
            SimError::Internal(_) => 1,
        }
    }
}

/// What a ledger entry carried.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Probe,
    Task,
}

impl Purpose {
    pub fn as_str(self) -> &'static str {
        match self {
            Purpose::Probe => "probe",
            Purpose::Task => "task",
        }
    }
}

/// One transmission with its run context.
#[derive(Debug, Clone)]
pub struct LedgerRow {
    pub scenario: String,
    pub snr_db: f64,
    pub ratio: Option<CompressionRatio>,
    pub seed: u64,
    pub image: usize,
    pub purpose: Purpose,
    pub record: TransmissionRecord,
}

/// Aggregated cell metrics for the report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scenario: String,
    pub chain: Chain,
    pub snr_db: f64,
    pub n: Option<u32>,
    pub payload_bytes: u64,
    pub complex_symbols: u64,
    pub delivered: f64,
    pub psnr_db: Option<f64>,
    pub success: Option<f64>,
    pub coverage: Option<f64>,
}

#[derive(Debug, Default)]
struct CellAgg {
    payload_bytes: u64,
    complex_symbols: u64,
    delivered_hits: usize,
    delivered_total: usize,
    psnr_sum: f64,
    psnr_count: usize,
    success_hits: usize,
    success_total: usize,
    coverage_sum: f64,
    coverage_count: usize,
}

/// Full result of a scenario run.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub report_rows: Vec<ReportRow>,
    pub ledger: Vec<LedgerRow>,
    pub outcomes: Vec<TaskOutcome>,
    pub tool_invocations: u64,
    pub kept_images: Vec<usize>,
}

impl RunOutput {
    pub fn probe_count(&self) -> usize {
        self.ledger.iter().filter(|r| r.purpose == Purpose::Probe).count()
    }
}

/// Glasses-side output for one task capture.
enum Artifact {
    Text(String),
    Image { crop: ImageBuffer, rect: CropRect },
}

/// Packed latent ready for the semantic chain.
struct SemPayload {
    side: wire::SideInfo,
    stream: SymbolStream,
    payload_bytes: u64,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Independent stream per (master seed, context indices).
fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut state = splitmix(master);
    for &p in parts {
        state = splitmix(state ^ p.wrapping_mul(0xD1B54A32D192ED03));
    }
    state
}

pub fn default_synonyms() -> SynonymTable {
    serde_json::from_str(include_str!("../data/synonyms.json")).expect("embedded synonym table")
}

pub struct ScenarioRunner {
    cfg: SimConfig,
    transform: BlockDct16,
    registry: ToolRegistry,
    synonyms: SynonymTable,
    link: LinkAbstractionConfig,
    master: u64,
}

impl ScenarioRunner {
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let mut registry = ToolRegistry::default();
        registry.set(
            ToolId::Ocr,
            semlink_core::tools::ToolConfig::Ocr {
                corruption_rate: cfg.tools.ocr_corruption,
            },
        );
        registry.set(
            ToolId::Canny,
            semlink_core::tools::ToolConfig::Canny {
                low: cfg.tools.canny_low,
                high: cfg.tools.canny_high,
            },
        );
        registry.set(
            ToolId::Object,
            semlink_core::tools::ToolConfig::Object {
                conf_threshold: cfg.tools.conf_threshold,
                margin: cfg.tools.margin,
            },
        );
        let synonyms = match &cfg.metrics.synonyms_path {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                serde_json::from_str(&text)
                    .map_err(|e| SimError::Config(crate::config::ConfigError::Parse(e)))?
            }
            None => default_synonyms(),
        };
        let link = LinkAbstractionConfig::new(
            cfg.channel.beta,
            cfg.channel.bler_threshold_db,
            cfg.channel.bler_slope_db,
        )
        .map_err(|e| SimError::Internal(e.to_string()))?;
        let master = cfg.effective_seed();
        Ok(Self {
            cfg,
            transform: BlockDct16::new(),
            registry,
            synonyms,
            link,
            master,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    fn make_oracle(&self) -> Result<ScenarioOracle, SimError> {
        match &self.cfg.scenario.oracle_script {
            Some(path) => {
                let oracle = ScriptedOracle::from_path(std::path::Path::new(path))
                    .map_err(|e| SimError::Config(crate::config::ConfigError::Invalid(e)))?;
                Ok(ScenarioOracle::Scripted(oracle))
            }
            None => Ok(ScenarioOracle::Annotation(AnnotationOracle {
                label: self.cfg.scenario.case.label().to_string(),
            })),
        }
    }

    /// Scripted oracles can be injected directly (used by tests and the
    /// session driver); `None` builds the configured one.
    pub fn run(&self) -> Result<RunOutput, SimError> {
        let mut oracle = self.make_oracle()?;
        self.run_with_oracle(&mut oracle)
    }

    pub fn run_with_oracle(&self, oracle: &mut ScenarioOracle) -> Result<RunOutput, SimError> {
        let sc = &self.cfg.scenario;
        let gen = CorpusGenerator::new(sc.corpus);

        // Sharpness pass: needed for OCR normalization and blur filtering.
        let need_sharpness = sc.case == CaseKind::Text || sc.blur_filter_fraction > 0.0;
        let (scores, max_sharpness) = if need_sharpness {
            let scores: Vec<f64> = (0..gen.count())
                .map(|i| sharpness_score(&gen.image(i).0))
                .collect();
            let max = scores.iter().cloned().fold(0.0, f64::max);
            (scores, max)
        } else {
            (vec![], 1.0)
        };
        let kept: Vec<usize> = if sc.blur_filter_fraction > 0.0 {
            filter_blurry_scores(&scores, sc.blur_filter_fraction)
        } else {
            (0..gen.count()).collect()
        };

        let ratios = sc.ratios();
        let mut aggs: BTreeMap<(usize, usize, usize), CellAgg> = BTreeMap::new();
        let mut out = RunOutput {
            kept_images: kept.clone(),
            ..RunOutput::default()
        };

        for &image_idx in &kept {
            let (img, ann) = gen.image(image_idx);
            oracle.set_label(sc.case.label());
            let mut artifacts: BTreeMap<String, Artifact> = BTreeMap::new();
            let mut payloads: BTreeMap<(String, u32), SemPayload> = BTreeMap::new();
            let mut probe_cache: Option<(ImageBuffer, SemPayload)> = None;

            for (ri, &ratio) in ratios.iter().enumerate() {
                for (si, &snr) in sc.snr_db.iter().enumerate() {
                    for (di, &seed) in sc.seeds.iter().enumerate() {
                        let cell = CellCtx {
                            image_idx,
                            ratio,
                            ri,
                            snr,
                            si,
                            di,
                            seed,
                            max_sharpness,
                        };
                        let agg = aggs.entry((ri, si, di)).or_default();
                        self.run_cell(
                            &img,
                            &ann,
                            oracle,
                            &cell,
                            &mut artifacts,
                            &mut payloads,
                            &mut probe_cache,
                            agg,
                            &mut out,
                        )?;
                    }
                }
            }
        }

        for (ri, &ratio) in ratios.iter().enumerate() {
            for (si, &snr) in sc.snr_db.iter().enumerate() {
                for di in 0..sc.seeds.len() {
                    let agg = match aggs.get(&(ri, si, di)) {
                        Some(a) => a,
                        None => continue,
                    };
                    out.report_rows.push(ReportRow {
                        scenario: sc.name.clone(),
                        chain: self.task_chain(),
                        snr_db: snr,
                        n: matches!(self.task_chain(), Chain::Semantic)
                            .then_some(ratio.divisor()),
                        payload_bytes: agg.payload_bytes,
                        complex_symbols: agg.complex_symbols,
                        delivered: agg.delivered_hits as f64 / agg.delivered_total.max(1) as f64,
                        psnr_db: (agg.psnr_count > 0)
                            .then(|| agg.psnr_sum / agg.psnr_count as f64),
                        success: (agg.success_total > 0)
                            .then(|| agg.success_hits as f64 / agg.success_total as f64),
                        coverage: (agg.coverage_count > 0)
                            .then(|| agg.coverage_sum / agg.coverage_count as f64),
                    });
                }
            }
        }
        Ok(out)
    }

    /// The chain task content travels on: OCR text always uses the text
    /// chain; image content follows the configured chain.
    fn task_chain(&self) -> Chain {
        if self.cfg.scenario.case == CaseKind::Text
            && self.cfg.scenario.mode != ActivationMode::FullImage
        {
            Chain::Text
        } else {
            match self.cfg.scenario.chain {
                ChainKind::Baseline => Chain::Baseline,
                ChainKind::Semantic => Chain::Semantic,
            }
        }
    }

    fn channel_for(&self, cell: &CellCtx, purpose: u64) -> Result<ChannelRealization, SimError> {
        if self.cfg.channel.fading {
            let seed = derive_seed(
                self.master,
                &[cell.ri as u64, cell.si as u64, cell.seed, cell.image_idx as u64, purpose],
            );
            sample_channel(seed, self.cfg.channel.k, self.cfg.channel.num_taps, cell.snr)
                .map_err(|e| SimError::Internal(e.to_string()))
        } else {
            ChannelRealization::flat(self.cfg.channel.k, cell.snr)
                .map_err(|e| SimError::Internal(e.to_string()))
        }
    }

    fn esnr_db(&self, ch: &ChannelRealization) -> f64 {
        linear_to_db(eesm(&ch.snrs_linear, self.link.beta).expect("nonempty snrs"))
    }

    /// Encodes an image for the semantic chain.
    fn semantic_payload(&self, content: &ImageBuffer, ratio: CompressionRatio) -> SemPayload {
        let latent = encode_latent(content, &self.transform).expect("analysis");
        let q = quantize(&latent, ratio).expect("finite latent");
        let side = wire::SideInfo::of(&q);
        let stream = pack_latent(&q.levels, ratio).expect("levels in range");
        let payload_bytes = wire::wire_bytes(q.levels.len(), ratio) as u64;
        SemPayload {
            side,
            stream,
            payload_bytes,
        }
    }

    /// Semantic transmission: bit-level impairment, error-free side info.
    fn transmit_semantic(
        &self,
        payload: &SemPayload,
        ch: &ChannelRealization,
        bit_seed: u64,
    ) -> (ImageBuffer, TransmissionRecord) {
        let rx = semantic_transmit(&payload.stream, ch, self.cfg.semantic.qam_m, bit_seed);
        let levels = unpack_latent(&rx).expect("stream metadata intact");
        let q = payload.side.rebuild(levels).expect("shape matches");
        let img = self
            .transform
            .synthesize(&dequantize(&q))
            .expect("well-formed latent");
        let record = TransmissionRecord {
            chain: Chain::Semantic,
            payload_bytes: payload.payload_bytes,
            complex_symbols: payload.stream.num_complex_symbols as u64,
            ofdm_frames: ofdm_frames(payload.stream.num_complex_symbols as u64, self.cfg.channel.k),
            delivered: true,
            esnr_db: self.esnr_db(ch),
        };
        (img, record)
    }

    /// Coded digital transmission of `bytes` (all-or-nothing delivery).
    fn transmit_baseline(
        &self,
        bytes: u64,
        chain: Chain,
        ch: &ChannelRealization,
        seed: u64,
    ) -> TransmissionRecord {
        if bytes == 0 {
            return TransmissionRecord {
                chain,
                payload_bytes: 0,
                complex_symbols: 0,
                ofdm_frames: 0,
                delivered: true,
                esnr_db: self.esnr_db(ch),
            };
        }
        let mut rec = baseline_transmit(
            bytes,
            ch,
            self.cfg.baseline.rate,
            self.cfg.baseline.bits_per_symbol,
            &self.link,
            seed,
        )
        .expect("validated baseline parameters");
        rec.chain = chain;
        rec
    }

    /// Source-coded byte size of an image under the baseline model.
    fn image_bytes(&self, img: &ImageBuffer) -> u64 {
        ((img.h * img.w) as f64 * self.cfg.baseline.bytes_per_pixel).round() as u64
    }

    /// Categories a command narrows the detector to, via name or synonym.
    fn command_categories(&self, command: &str, ann: &Annotation) -> Vec<String> {
        let tokens = similarity_tokens(command);
        ann.categories
            .iter()
            .filter(|cat| {
                similarity_tokens(cat).iter().any(|t| tokens.contains(t))
                    || self.synonyms.get(cat.as_str()).map_or(false, |alts| {
                        alts.iter()
                            .any(|a| similarity_tokens(a).iter().any(|t| tokens.contains(t)))
                    })
            })
            .cloned()
            .collect()
    }

    /// Runs the glasses-side tool and caches the result for reuse across
    /// cells with the same label and filter.
    #[allow(clippy::too_many_arguments)]
    fn tool_artifact<'a>(
        &self,
        tool: ToolId,
        filter: &Option<Vec<String>>,
        img: &ImageBuffer,
        ann: &Annotation,
        cell: &CellCtx,
        artifacts: &'a mut BTreeMap<String, Artifact>,
        out: &mut RunOutput,
    ) -> Result<&'a Artifact, SimError> {
        let key = format!(
            "{}:{}",
            tool.as_str(),
            filter.as_ref().map_or(String::new(), |f| f.join("+"))
        );
        if !artifacts.contains_key(&key) {
            out.tool_invocations += 1;
            let artifact = match tool {
                ToolId::Ocr => {
                    let engine = AnnotationOcr {
                        text: Some(ann.text.clone()),
                        max_corpus_sharpness: cell.max_sharpness,
                        corruption_rate: self.cfg.tools.ocr_corruption,
                        seed: derive_seed(self.master, &[cell.image_idx as u64, 0xC0DE]),
                    };
                    Artifact::Text(
                        ocr_extract(img, &engine).map_err(|e| SimError::Internal(e.to_string()))?,
                    )
                }
                ToolId::Canny => {
                    let rect = canny_crop_rect(img, self.cfg.tools.canny_low, self.cfg.tools.canny_high);
                    Artifact::Image {
                        crop: rect.apply(img),
                        rect,
                    }
                }
                ToolId::Object => {
                    let mut det = DetectionSet {
                        boxes: ann.boxes.clone(),
                    };
                    if let Some(cats) = filter {
                        if !cats.is_empty() {
                            det = det.filter_categories(cats);
                        }
                    }
                    let rect =
                        object_crop_rect(img, &det, self.cfg.tools.conf_threshold, self.cfg.tools.margin);
                    Artifact::Image {
                        crop: rect.apply(img),
                        rect,
                    }
                }
                ToolId::None => Artifact::Image {
                    crop: img.clone(),
                    rect: CropRect::full(img),
                },
            };
            artifacts.insert(key.clone(), artifact);
        }
        Ok(artifacts.get(&key).expect("just inserted"))
    }

    #[allow(clippy::too_many_arguments)]
    fn run_cell(
        &self,
        img: &ImageBuffer,
        ann: &Annotation,
        oracle: &mut ScenarioOracle,
        cell: &CellCtx,
        artifacts: &mut BTreeMap<String, Artifact>,
        payloads: &mut BTreeMap<(String, u32), SemPayload>,
        probe_cache: &mut Option<(ImageBuffer, SemPayload)>,
        agg: &mut CellAgg,
        out: &mut RunOutput,
    ) -> Result<(), SimError> {
        let sc = &self.cfg.scenario;
        let mut ctrl = Controller::new(TaskSpace::standard(), self.cfg.controller.check_period_s, self.cfg.controller.memory_capacity);
        for (k, cmd) in self.cfg.controller.seed_commands.iter().enumerate() {
            ctrl.memory.store(cmd, k as f64);
        }
        let mut purpose_ctr = 0u64;
        let push_ledger = |out: &mut RunOutput, agg: &mut CellAgg, purpose: Purpose, record: &TransmissionRecord| {
            agg.payload_bytes += record.payload_bytes;
            agg.complex_symbols += record.complex_symbols;
            out.ledger.push(LedgerRow {
                scenario: sc.name.clone(),
                snr_db: cell.snr,
                ratio: (record.chain == Chain::Semantic).then_some(cell.ratio),
                seed: cell.seed,
                image: cell.image_idx,
                purpose,
                record: record.clone(),
            });
        };

        // Intention acquisition: probe loop, stored-command retrieval, or
        // direct voice, per the activation mode.
        let (label, filter): (String, Option<Vec<String>>) = match sc.mode {
            ActivationMode::FullImage => (sc.case.label().to_string(), None),
            ActivationMode::IntentionAware | ActivationMode::IntentionStored => {
                let actions = ctrl.step(Event::Tick(0.0));
                debug_assert!(actions.contains(&Action::CaptureProbe));
                if probe_cache.is_none() {
                    let probe_ratio = CompressionRatio::from_divisor(self.cfg.semantic.probe_n)
                        .expect("validated probe_n");
                    let probe = semlink_core::tools::downsample_probe(img);
                    let payload = self.semantic_payload(&probe, probe_ratio);
                    *probe_cache = Some((probe, payload));
                }
                let (_, probe_payload) = probe_cache.as_ref().expect("probe cached");
                let ch = self.channel_for(cell, purpose_ctr)?;
                purpose_ctr += 1;
                let bit_seed = derive_seed(
                    self.master,
                    &[cell.ri as u64, cell.si as u64, cell.seed, cell.image_idx as u64, purpose_ctr],
                );
                purpose_ctr += 1;
                let (rx_probe, record) = self.transmit_semantic(probe_payload, &ch, bit_seed);
                push_ledger(out, agg, Purpose::Probe, &record);
                let label = oracle
                    .predict(&rx_probe)
                    .map_err(|e| SimError::OracleGap(format!(
                        "scenario={} image={} snr={} seed={}: {e}",
                        sc.name, cell.image_idx, cell.snr, cell.seed
                    )))?;
                ctrl.step(Event::ProbeResult(label.clone()));
                let filter = if sc.mode == ActivationMode::IntentionStored {
                    retrieve_command(&ctrl.memory, &ann.text)
                        .map(|cmd| self.command_categories(cmd, ann))
                        .filter(|cats| !cats.is_empty())
                } else {
                    None
                };
                (label, filter)
            }
            ActivationMode::DirectVoice => {
                let cmd = sc
                    .voice_command
                    .clone()
                    .unwrap_or_else(|| sc.case.label().to_string());
                ctrl.step(Event::Voice(cmd.clone()));
                let label = match &ctrl.state.mode {
                    semlink_core::intent::Mode::TaskActive(l) => l.clone(),
                    _ => sc.case.label().to_string(),
                };
                let cats = self.command_categories(&cmd, ann);
                (label, (!cats.is_empty()).then_some(cats))
            }
        };

        let tool = if sc.mode == ActivationMode::FullImage {
            ToolId::None
        } else {
            semlink_core::intent::select_tool(&label, &self.registry, &ctrl.space)
                .map_err(|e| SimError::Internal(e.to_string()))?
        };
        if sc.mode == ActivationMode::FullImage {
            // Mode separation: no preprocessing tool executes; the frame
            // goes out as captured.
            if !artifacts.contains_key("none:") {
                artifacts.insert(
                    "none:".into(),
                    Artifact::Image {
                        crop: img.clone(),
                        rect: CropRect::full(img),
                    },
                );
            }
        }
        let artifact_key = if sc.mode == ActivationMode::FullImage {
            "none:".to_string()
        } else {
            let _ = self.tool_artifact(tool, &filter, img, ann, cell, artifacts, out)?;
            format!(
                "{}:{}",
                tool.as_str(),
                filter.as_ref().map_or(String::new(), |f| f.join("+"))
            )
        };
        let artifact = artifacts.get(&artifact_key).expect("artifact cached");

        // Task-content transmission and evaluation.
        let tick_actions = ctrl.step(Event::Tick(self.cfg.controller.check_period_s));
        let run_check = tick_actions.contains(&Action::ConsistencyCheck)
            && sc.mode != ActivationMode::FullImage;
        let (outcome, task_record, received_for_check) = match artifact {
            Artifact::Text(text) => {
                let bytes = text.len() as u64;
                let ch = self.channel_for(cell, purpose_ctr)?;
                purpose_ctr += 1;
                let tx_seed = derive_seed(
                    self.master,
                    &[cell.ri as u64, cell.si as u64, cell.seed, cell.image_idx as u64, purpose_ctr],
                );
                purpose_ctr += 1;
                let record = self.transmit_baseline(bytes, Chain::Text, &ch, tx_seed);
                let received = if record.delivered { text.clone() } else { String::new() };
                let answer = &ann.qa_pairs[0].answer;
                let success = record.delivered
                    && received.to_lowercase().contains(&answer.to_lowercase());
                agg.success_total += 1;
                agg.success_hits += success as usize;
                agg.delivered_total += 1;
                agg.delivered_hits += record.delivered as usize;
                (
                    TaskOutcome {
                        task_id: format!("{}-{}", sc.case.as_str(), cell.image_idx),
                        predicted: received,
                        truths: vec![answer.clone()],
                        success,
                        record: record.clone(),
                    },
                    record,
                    None,
                )
            }
            Artifact::Image { crop, rect } => {
                let (received, record): (Option<ImageBuffer>, TransmissionRecord) =
                    match self.task_chain() {
                        Chain::Semantic => {
                            let key = (artifact_key.clone(), cell.ratio.divisor());
                            if !payloads.contains_key(&key) {
                                let payload = self.semantic_payload(crop, cell.ratio);
                                payloads.insert(key.clone(), payload);
                            }
                            let payload = payloads.get(&key).expect("payload cached");
                            let ch = self.channel_for(cell, purpose_ctr)?;
                            purpose_ctr += 1;
                            let bit_seed = derive_seed(
                                self.master,
                                &[cell.ri as u64, cell.si as u64, cell.seed, cell.image_idx as u64, purpose_ctr],
                            );
                            purpose_ctr += 1;
                            let (rx, record) = self.transmit_semantic(payload, &ch, bit_seed);
                            (Some(rx), record)
                        }
                        _ => {
                            let ch = self.channel_for(cell, purpose_ctr)?;
                            purpose_ctr += 1;
                            let tx_seed = derive_seed(
                                self.master,
                                &[cell.ri as u64, cell.si as u64, cell.seed, cell.image_idx as u64, purpose_ctr],
                            );
                            purpose_ctr += 1;
                            let record =
                                self.transmit_baseline(self.image_bytes(crop), Chain::Baseline, &ch, tx_seed);
                            (record.delivered.then(|| crop.clone()), record)
                        }
                    };
                agg.delivered_total += 1;
                agg.delivered_hits += record.delivered as usize;

                let quality = match &received {
                    Some(rx) => psnr(crop, rx).expect("matching dims"),
                    None => 0.0,
                };
                agg.psnr_sum += quality;
                agg.psnr_count += 1;

                let outcome = self.evaluate_image_task(
                    img, ann, rect, &received, quality, &record, &filter, cell, agg,
                );
                (outcome, record, received)
            }
        };
        push_ledger(out, agg, Purpose::Task, &task_record);
        out.outcomes.push(outcome);

        // Per-period consistency verdict; delta = 0 falls back to probing
        // with an immediate probe transmission.
        if run_check {
            let check_img = received_for_check.as_ref().unwrap_or(img);
            let delta = match oracle.check(check_img, &label) {
                Ok(d) => d,
                Err(e) => {
                    if matches!(oracle, ScenarioOracle::Scripted(_)) {
                        return Err(SimError::OracleGap(format!(
                            "scenario={} image={} snr={} seed={}: {e}",
                            sc.name, cell.image_idx, cell.snr, cell.seed
                        )));
                    }
                    ctrl.state.oracle_failures += 1;
                    true
                }
            };
            let follow = ctrl.step(Event::Delta(if delta { 1 } else { 0 }));
            if follow.contains(&Action::CaptureProbe) {
                let (_, probe_payload) = probe_cache
                    .get_or_insert_with(|| {
                        let probe_ratio = CompressionRatio::from_divisor(self.cfg.semantic.probe_n)
                            .expect("validated probe_n");
                        let probe = semlink_core::tools::downsample_probe(img);
                        let payload = self.semantic_payload(&probe, probe_ratio);
                        (probe, payload)
                    });
                let ch = self.channel_for(cell, purpose_ctr)?;
                purpose_ctr += 1;
                let bit_seed = derive_seed(
                    self.master,
                    &[cell.ri as u64, cell.si as u64, cell.seed, cell.image_idx as u64, purpose_ctr],
                );
                let (_, record) = self.transmit_semantic(probe_payload, &ch, bit_seed);
                push_ledger(out, agg, Purpose::Probe, &record);
            }
        }
        Ok(())
    }

    /// Task-level verdict for an image-borne artifact.
    #[allow(clippy::too_many_arguments)]
    fn evaluate_image_task(
        &self,
        original: &ImageBuffer,
        ann: &Annotation,
        rect: &CropRect,
        received: &Option<ImageBuffer>,
        quality_db: f64,
        record: &TransmissionRecord,
        filter: &Option<Vec<String>>,
        cell: &CellCtx,
        agg: &mut CellAgg,
    ) -> TaskOutcome {
        let sc = &self.cfg.scenario;
        let task_id = format!("{}-{}", sc.case.as_str(), cell.image_idx);
        match sc.case {
            CaseKind::Scene => {
                // The response mentions every confident detection fully
                // visible in the received crop.
                let response = match received {
                    Some(_) => {
                        let mut cats: Vec<String> = Vec::new();
                        for b in &ann.boxes {
                            if b.confidence >= self.cfg.tools.conf_threshold
                                && b.x0 >= rect.x0 as f64
                                && b.y0 >= rect.y0 as f64
                                && b.x1 <= rect.x1 as f64
                                && b.y1 <= rect.y1 as f64
                                && !cats.contains(&b.category)
                            {
                                cats.push(b.category.clone());
                            }
                        }
                        if cats.is_empty() {
                            String::new()
                        } else {
                            format!("a scene with {}", cats.join(", "))
                        }
                    }
                    None => String::new(),
                };
                let task_categories: &[String] = match filter {
                    Some(cats) if !cats.is_empty() => cats,
                    _ => &ann.categories,
                };
                let coverage =
                    object_coverage(&response, task_categories, &self.synonyms).unwrap_or(0.0);
                agg.coverage_sum += coverage;
                agg.coverage_count += 1;
                let success = coverage >= 1.0;
                agg.success_total += 1;
                agg.success_hits += success as usize;
                TaskOutcome {
                    task_id,
                    predicted: response,
                    truths: vec![task_categories.join(", ")],
                    success,
                    record: record.clone(),
                }
            }
            CaseKind::Text | CaseKind::Document => {
                // Answer recoverable iff its region sits inside the crop
                // and survives transmission at usable fidelity.
                let answer = ann.qa_pairs[0].answer.clone();
                let success = match (ann.qa_pairs[0].region, received) {
                    (Some((gx0, gy0, gx1, gy1)), Some(rx)) => {
                        let inside = gx0 as usize >= rect.x0
                            && gy0 as usize >= rect.y0
                            && gx1 as usize <= rect.x1
                            && gy1 as usize <= rect.y1;
                        if inside {
                            let (rw, rh) = ((gx1 - gx0) as usize, (gy1 - gy0) as usize);
                            let orig_region = original
                                .crop(gy0 as usize, gx0 as usize, rh, rw)
                                .expect("region within frame");
                            let rx_region = rx
                                .crop(gy0 as usize - rect.y0, gx0 as usize - rect.x0, rh, rw)
                                .expect("region within crop");
                            let region_db = psnr(&orig_region, &rx_region).expect("same dims");
                            match record.chain {
                                Chain::Semantic => region_db >= self.cfg.metrics.psnr_tau_db,
                                _ => record.delivered,
                            }
                        } else {
                            false
                        }
                    }
                    _ => false,
                };
                agg.success_total += 1;
                agg.success_hits += success as usize;
                TaskOutcome {
                    task_id,
                    predicted: format!("region-psnr {quality_db:.2} dB"),
                    truths: vec![answer],
                    success,
                    record: record.clone(),
                }
            }
        }
    }
}

struct CellCtx {
    image_idx: usize,
    ratio: CompressionRatio,
    ri: usize,
    snr: f64,
    si: usize,
    #[allow(dead_code)]
    di: usize,
    seed: u64,
    max_sharpness: f64,
}

/// Controller session trace over simulated seconds on one corpus image,
/// used to exercise the closed loop at full length.
#[derive(Debug, Default)]
pub struct SessionReport {
    pub transitions_to_probing: u32,
    pub probe_transmissions: u32,
    pub consistency_checks: u32,
    pub task_transmissions: u32,
    pub ledger: Vec<LedgerRow>,
}

/// Drives a voice-activated session for `duration_s` simulated seconds at
/// the first configured SNR and seed; consistency verdicts come from the
/// supplied oracle.
pub fn run_session(
    cfg: &SimConfig,
    oracle: &mut dyn VlmOracle,
    duration_s: u64,
) -> Result<SessionReport, SimError> {
    let runner = ScenarioRunner::new(cfg.clone())?;
    let sc = &runner.cfg.scenario;
    let gen = CorpusGenerator::new(sc.corpus);
    let (img, ann) = gen.image(0);
    let max_sharpness = sharpness_score(&img).max(f64::MIN_POSITIVE);
    let probe_ratio =
        CompressionRatio::from_divisor(runner.cfg.semantic.probe_n).expect("validated");
    let probe_payload = runner.semantic_payload(
        &semlink_core::tools::downsample_probe(&img),
        probe_ratio,
    );

    let mut ctrl = Controller::new(
        TaskSpace::standard(),
        runner.cfg.controller.check_period_s,
        runner.cfg.controller.memory_capacity,
    );
    let mut report = SessionReport::default();
    let mut purpose_ctr = 0u64;
    let cell = CellCtx {
        image_idx: 0,
        ratio: sc.ratios()[0],
        ri: 0,
        snr: sc.snr_db[0],
        si: 0,
        di: 0,
        seed: sc.seeds[0],
        max_sharpness,
    };

    let voice = sc
        .voice_command
        .clone()
        .unwrap_or_else(|| sc.case.label().to_string());
    ctrl.step(Event::Voice(voice));

    // Task artifact is fixed for the session.
    let engine = AnnotationOcr {
        text: Some(ann.text.clone()),
        max_corpus_sharpness: max_sharpness,
        corruption_rate: runner.cfg.tools.ocr_corruption,
        seed: derive_seed(runner.master, &[0, 0xC0DE]),
    };
    let task_text = ocr_extract(&img, &engine).map_err(|e| SimError::Internal(e.to_string()))?;

    let transmit_probe = |report: &mut SessionReport, purpose_ctr: &mut u64| -> Result<(), SimError> {
        let ch = runner.channel_for(&cell, *purpose_ctr)?;
        *purpose_ctr += 1;
        let bit_seed = derive_seed(runner.master, &[0x9906, *purpose_ctr]);
        let (_, record) = runner.transmit_semantic(&probe_payload, &ch, bit_seed);
        report.probe_transmissions += 1;
        report.ledger.push(LedgerRow {
            scenario: sc.name.clone(),
            snr_db: cell.snr,
            ratio: Some(probe_ratio),
            seed: cell.seed,
            image: 0,
            purpose: Purpose::Probe,
            record,
        });
        Ok(())
    };

    for t in 1..=duration_s {
        let actions = ctrl.step(Event::Tick(t as f64));
        if actions.contains(&Action::CaptureProbe) {
            transmit_probe(&mut report, &mut purpose_ctr)?;
            let label = oracle
                .predict(&img)
                .map_err(|e| SimError::OracleGap(format!("session t={t}: {e}")))?;
            ctrl.step(Event::ProbeResult(label));
            continue;
        }
        if actions.contains(&Action::CaptureTask) {
            let ch = runner.channel_for(&cell, purpose_ctr)?;
            purpose_ctr += 1;
            let tx_seed = derive_seed(runner.master, &[0x7A5C, purpose_ctr]);
            let record = runner.transmit_baseline(task_text.len() as u64, Chain::Text, &ch, tx_seed);
            report.task_transmissions += 1;
            report.ledger.push(LedgerRow {
                scenario: sc.name.clone(),
                snr_db: cell.snr,
                ratio: None,
                seed: cell.seed,
                image: 0,
                purpose: Purpose::Task,
                record,
            });
        }
        if actions.contains(&Action::ConsistencyCheck) {
            report.consistency_checks += 1;
            let label = match &ctrl.state.mode {
                semlink_core::intent::Mode::TaskActive(l) => l.clone(),
                _ => continue,
            };
            let delta = oracle
                .check(&img, &label)
                .map_err(|e| SimError::OracleGap(format!("session t={t}: {e}")))?;
            let follow = ctrl.step(Event::Delta(if delta { 1 } else { 0 }));
            if follow.contains(&Action::CaptureProbe) {
                report.transitions_to_probing += 1;
                transmit_probe(&mut report, &mut purpose_ctr)?;
                let label = oracle
                    .predict(&img)
                    .map_err(|e| SimError::OracleGap(format!("session t={t}: {e}")))?;
                ctrl.step(Event::ProbeResult(label));
            }
        }
    }
    Ok(report)
}
