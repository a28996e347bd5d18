//! Pluggable VLM stand-ins.
//!
//! The annotation oracle answers from corpus ground truth and never fails;
//! the scripted oracle replays an ordered list of responses and aborts the
//! run (exit code 3) when a call has no remaining entry, identifying the
//! offending step.

use semlink_core::codec::ImageBuffer;
use semlink_core::intent::VlmOracle;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// One scripted response. `times: 0` repeats forever.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "trigger", rename_all = "snake_case")]
pub enum OracleRecord {
    Predict {
        response: String,
        #[serde(default = "default_times")]
        times: u32,
    },
    Consistency {
        response: u8,
        #[serde(default = "default_times")]
        times: u32,
    },
}

fn default_times() -> u32 {
    1
}

/// Replays scripted responses in order, one queue per trigger kind.
#[derive(Debug, Clone)]
pub struct ScriptedOracle {
    predictions: VecDeque<(String, u32)>,
    deltas: VecDeque<(u8, u32)>,
    predict_calls: u64,
    check_calls: u64,
}

impl ScriptedOracle {
    pub fn new(records: Vec<OracleRecord>) -> Self {
        let mut predictions = VecDeque::new();
        let mut deltas = VecDeque::new();
        for r in records {
            match r {
                OracleRecord::Predict { response, times } => predictions.push_back((response, times)),
                OracleRecord::Consistency { response, times } => deltas.push_back((response, times)),
            }
        }
        Self {
            predictions,
            deltas,
            predict_calls: 0,
            check_calls: 0,
        }
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("oracle script: {e}"))?;
        let records: Vec<OracleRecord> =
            serde_json::from_str(&text).map_err(|e| format!("oracle script: {e}"))?;
        Ok(Self::new(records))
    }

    fn take<T: Clone>(queue: &mut VecDeque<(T, u32)>) -> Option<T> {
        let (value, times) = queue.front_mut()?;
        let out = value.clone();
        if *times == 1 {
            queue.pop_front();
        } else if *times > 1 {
            *times -= 1;
        }
        // times == 0 repeats forever.
        Some(out)
    }
}

impl VlmOracle for ScriptedOracle {
    fn predict(&mut self, _probe: &ImageBuffer) -> Result<String, String> {
        self.predict_calls += 1;
        Self::take(&mut self.predictions).ok_or_else(|| {
            format!(
                "oracle script exhausted at predict call #{}",
                self.predict_calls
            )
        })
    }

    fn check(&mut self, _img: &ImageBuffer, _label: &str) -> Result<bool, String> {
        self.check_calls += 1;
        Self::take(&mut self.deltas)
            .map(|d| d != 0)
            .ok_or_else(|| {
                format!(
                    "oracle script exhausted at consistency call #{}",
                    self.check_calls
                )
            })
    }
}

/// Ground-truth oracle: predicts the label of the current corpus item and
/// always confirms consistency. The harness updates the label per image.
#[derive(Debug, Clone)]
pub struct AnnotationOracle {
    pub label: String,
}

impl VlmOracle for AnnotationOracle {
    fn predict(&mut self, _probe: &ImageBuffer) -> Result<String, String> {
        Ok(self.label.clone())
    }

    fn check(&mut self, _img: &ImageBuffer, _label: &str) -> Result<bool, String> {
        Ok(true)
    }
}

/// The oracle a scenario runs with.
pub enum ScenarioOracle {
    Annotation(AnnotationOracle),
    Scripted(ScriptedOracle),
}

impl ScenarioOracle {
    /// Points the annotation oracle at the current image's ground truth.
    pub fn set_label(&mut self, label: &str) {
        if let ScenarioOracle::Annotation(a) = self {
            a.label = label.to_string();
        }
    }
}

impl VlmOracle for ScenarioOracle {
    fn predict(&mut self, probe: &ImageBuffer) -> Result<String, String> {
        match self {
            ScenarioOracle::Annotation(o) => o.predict(probe),
            ScenarioOracle::Scripted(o) => o.predict(probe),
        }
    }

    fn check(&mut self, img: &ImageBuffer, label: &str) -> Result<bool, String> {
        match self {
            ScenarioOracle::Annotation(o) => o.check(img, label),
            ScenarioOracle::Scripted(o) => o.check(img, label),
        }
    }
}
