//! Closed-loop intention controller.
//!
//! The controller alternates between low-resolution probing and
//! task-active transmission. A pluggable oracle (a VLM stand-in) predicts
//! task labels from probes and issues per-period binary consistency
//! verdicts; a verdict of 0 drops the session back to probing. Voice
//! commands activate tasks directly and, when judged generalizable, are
//! stored for later retrieval by token-set similarity.

use crate::codec::ImageBuffer;
use crate::tools::{ToolError, ToolId, ToolRegistry};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum IntentError {
    #[error("oracle failure: {0}")]
    Oracle(String),
    #[error("label {0} is not in the task space")]
    UnknownLabel(String),
    #[error("probe must be 256x256, got {0}x{1}")]
    BadProbe(usize, usize),
}

/// Oracle interface shared by intention prediction and consistency checks.
/// Scripted implementations advance through a response list, hence `&mut`.
pub trait VlmOracle {
    /// Predicts a task label from a received low-resolution probe.
    fn predict(&mut self, probe: &ImageBuffer) -> Result<String, String>;

    /// Verifies that received task content still matches the active label.
    fn check(&mut self, task_img: &ImageBuffer, label: &str) -> Result<bool, String>;
}

/// One known intention with its tool binding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEntry {
    pub label: String,
    pub tool: ToolId,
    #[serde(default)]
    pub prompt: String,
    /// Set when the label was auto-added and awaits user confirmation.
    #[serde(default)]
    pub pending: bool,
}

/// Ordered set of known intentions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TaskSpace {
    pub entries: Vec<TaskEntry>,
}

impl TaskSpace {
    /// The three stock intentions with their canonical tool bindings.
    pub fn standard() -> Self {
        Self {
            entries: vec![
                TaskEntry {
                    label: "text-reading".into(),
                    tool: ToolId::Ocr,
                    prompt: "read transcribe text words letters receipt menu translate".into(),
                    pending: false,
                },
                TaskEntry {
                    label: "document".into(),
                    tool: ToolId::Canny,
                    prompt: "document page layout chart table diagram form".into(),
                    pending: false,
                },
                TaskEntry {
                    label: "scene".into(),
                    tool: ToolId::Object,
                    prompt: "describe observe scene objects people pedestrians person cars shelf"
                        .into(),
                    pending: false,
                },
            ],
        }
    }

    pub fn contains(&self, label: &str) -> bool {
        self.entries.iter().any(|e| e.label == label)
    }

    pub fn get(&self, label: &str) -> Option<&TaskEntry> {
        self.entries.iter().find(|e| e.label == label)
    }

    /// Appends an auto-discovered label with the safe full-frame binding,
    /// flagged for user confirmation.
    pub fn add_pending(&mut self, label: &str) {
        if !self.contains(label) {
            self.entries.push(TaskEntry {
                label: label.to_string(),
                tool: ToolId::None,
                prompt: String::new(),
                pending: true,
            });
        }
    }
}

/// Controller mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Mode {
    Probing,
    TaskActive(String),
}

/// Mutable controller state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentState {
    pub mode: Mode,
    /// Simulated time of the last consistency check (or task activation).
    pub last_check_time: f64,
    /// Consistency cadence in seconds.
    pub check_period: f64,
    /// Oracle prediction failures while probing.
    pub retries: u64,
    /// Consistency-check oracle failures (treated as "stay on task").
    pub oracle_failures: u64,
    /// Events that did not fit the current mode.
    pub malformed_events: u64,
}

impl Default for IntentState {
    fn default() -> Self {
        Self {
            mode: Mode::Probing,
            last_check_time: 0.0,
            check_period: 1.0,
            retries: 0,
            oracle_failures: 0,
            malformed_events: 0,
        }
    }
}

/// Stored voice commands, newest last, trimmed to capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandMemory {
    pub entries: Vec<(String, f64)>,
    pub capacity: usize,
}

impl CommandMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            entries: Vec::new(),
            capacity,
        }
    }

    pub fn store(&mut self, command: &str, time: f64) {
        self.entries.push((command.to_string(), time));
        while self.entries.len() > self.capacity {
            self.entries.remove(0);
        }
    }
}

/// Lowercased alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Tokens normalized for similarity matching: a trailing plural 's' is
/// stripped so "pedestrians" and "pedestrian" compare equal.
pub fn similarity_tokens(text: &str) -> std::collections::BTreeSet<String> {
    tokenize(text)
        .into_iter()
        .map(|t| {
            if t.len() > 3 && t.ends_with('s') && !t.ends_with("ss") {
                t[..t.len() - 1].to_string()
            } else {
                t
            }
        })
        .collect()
}

/// Token-set Jaccard similarity (plural-insensitive).
pub fn jaccard(a: &str, b: &str) -> f64 {
    let ta = similarity_tokens(a);
    let tb = similarity_tokens(b);
    if ta.is_empty() && tb.is_empty() {
        return 0.0;
    }
    let inter = ta.intersection(&tb).count() as f64;
    let union = ta.union(&tb).count() as f64;
    inter / union
}

const RETRIEVAL_MIN_SCORE: f64 = 0.1;

/// The stored command most similar to the context; `None` when the memory
/// is empty or the best score falls below 0.1. Ties go to the newest entry.
pub fn retrieve_command<'a>(memory: &'a CommandMemory, context: &str) -> Option<&'a str> {
    let mut best: Option<(&str, f64)> = None;
    for (cmd, _) in &memory.entries {
        let score = jaccard(cmd, context);
        if best.map_or(true, |(_, s)| score >= s) {
            best = Some((cmd, score));
        }
    }
    best.filter(|(_, s)| *s >= RETRIEVAL_MIN_SCORE).map(|(c, _)| c)
}

/// Predicts the task label from a received probe. Labels outside the space
/// are appended as pending entries rather than rejected.
pub fn predict_intention(
    probe: &ImageBuffer,
    space: &mut TaskSpace,
    oracle: &mut dyn VlmOracle,
) -> Result<String, IntentError> {
    if probe.h != 256 || probe.w != 256 {
        return Err(IntentError::BadProbe(probe.h, probe.w));
    }
    let label = oracle.predict(probe).map_err(IntentError::Oracle)?;
    if !space.contains(&label) {
        space.add_pending(&label);
    }
    Ok(label)
}

/// Oracle pass-through for the consistency indicator; an oracle failure
/// reads as "stay on task" (fail-open).
pub fn check_consistency(
    task_img: &ImageBuffer,
    label: &str,
    oracle: &mut dyn VlmOracle,
) -> (bool, bool) {
    match oracle.check(task_img, label) {
        Ok(delta) => (delta, false),
        Err(_) => (true, true),
    }
}

/// Tool lookup for a label, checking both the binding and the registry.
pub fn select_tool(
    label: &str,
    registry: &ToolRegistry,
    space: &TaskSpace,
) -> Result<ToolId, ToolError> {
    let entry = space
        .get(label)
        .ok_or_else(|| ToolError::Unregistered(label.to_string()))?;
    if !registry.contains(entry.tool) {
        return Err(ToolError::Unregistered(entry.tool.as_str().to_string()));
    }
    Ok(entry.tool)
}

/// Controller events.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    /// Simulated-time heartbeat (seconds).
    Tick(f64),
    /// Explicit user voice command.
    Voice(String),
    /// Label predicted from the last transmitted probe.
    ProbeResult(String),
    /// Consistency verdict for the last task transmission.
    Delta(u8),
}

/// Actions the harness performs in response to a transition.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    CaptureProbe,
    CaptureTask,
    ConsistencyCheck,
    SelectTool(String),
}

/// Words that mark a voice command as instance-specific: commands carrying
/// them are executed but not stored, since they do not generalize to
/// future tasks.
pub fn default_attribute_stoplist() -> Vec<String> {
    [
        "black", "white", "red", "blue", "green", "yellow", "purple", "orange", "brown",
        "pink", "gray", "grey", "clothing", "clothes", "shirt", "jacket", "dress", "hat",
        "coat", "pants", "suit",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// The closed-loop controller: state machine, task space, and command
/// memory, with a deterministic transition function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Controller {
    pub state: IntentState,
    pub space: TaskSpace,
    pub memory: CommandMemory,
    pub stoplist: Vec<String>,
    /// Simulated clock, advanced by ticks.
    pub now: f64,
}

impl Controller {
    pub fn new(space: TaskSpace, check_period: f64, memory_capacity: usize) -> Self {
        Self {
            state: IntentState {
                check_period,
                ..IntentState::default()
            },
            space,
            memory: CommandMemory::new(memory_capacity),
            stoplist: default_attribute_stoplist(),
            now: 0.0,
        }
    }

    /// A command generalizes when it contains no stop-listed attribute
    /// modifier.
    pub fn is_generalizable(&self, command: &str) -> bool {
        let tokens = tokenize(command);
        !tokens.iter().any(|t| self.stoplist.contains(t))
    }

    /// Maps a voice command to a task label: exact label match first, then
    /// best token overlap with label names and prompts.
    pub fn resolve_label(&self, command: &str) -> Option<String> {
        let lower = command.to_lowercase();
        if let Some(e) = self.space.entries.iter().find(|e| e.label == lower) {
            return Some(e.label.clone());
        }
        let mut best: Option<(String, f64)> = None;
        for e in &self.space.entries {
            let key = format!("{} {}", e.label, e.prompt);
            let score = jaccard(command, &key);
            if score > 0.0 && best.as_ref().map_or(true, |(_, s)| score > *s) {
                best = Some((e.label.clone(), score));
            }
        }
        best.map(|(l, _)| l)
    }

    /// Deterministic transition table. Returns the actions the harness
    /// should perform; malformed events leave the state unchanged.
    pub fn step(&mut self, event: Event) -> Vec<Action> {
        match event {
            Event::Tick(t) => {
                self.now = t;
                match &self.state.mode {
                    Mode::Probing => vec![Action::CaptureProbe],
                    Mode::TaskActive(_) => {
                        if t - self.state.last_check_time >= self.state.check_period {
                            self.state.last_check_time = t;
                            vec![Action::CaptureTask, Action::ConsistencyCheck]
                        } else {
                            vec![]
                        }
                    }
                }
            }
            Event::Voice(cmd) => {
                let label = match self.resolve_label(&cmd) {
                    Some(l) => l,
                    None => {
                        let l = cmd.to_lowercase();
                        self.space.add_pending(&l);
                        l
                    }
                };
                if self.is_generalizable(&cmd) {
                    self.memory.store(&cmd, self.now);
                }
                self.state.mode = Mode::TaskActive(label.clone());
                self.state.last_check_time = self.now;
                vec![Action::SelectTool(label)]
            }
            Event::ProbeResult(label) => match self.state.mode {
                Mode::Probing => {
                    if !self.space.contains(&label) {
                        self.space.add_pending(&label);
                    }
                    self.state.mode = Mode::TaskActive(label.clone());
                    self.state.last_check_time = self.now;
                    vec![Action::SelectTool(label)]
                }
                Mode::TaskActive(_) => {
                    self.state.malformed_events += 1;
                    vec![]
                }
            },
            Event::Delta(v) => match (&self.state.mode, v) {
                (Mode::TaskActive(_), 0) => {
                    self.state.mode = Mode::Probing;
                    vec![Action::CaptureProbe]
                }
                (Mode::TaskActive(_), 1) => vec![],
                _ => {
                    self.state.malformed_events += 1;
                    vec![]
                }
            },
        }
    }

    /// Cadence-gated consistency check for direct (non-step) use: `None`
    /// when this period's check already ran.
    pub fn check_consistency_at(
        &mut self,
        task_img: &ImageBuffer,
        oracle: &mut dyn VlmOracle,
        now: f64,
    ) -> Option<bool> {
        let label = match &self.state.mode {
            Mode::TaskActive(l) => l.clone(),
            Mode::Probing => return None,
        };
        if now - self.state.last_check_time < self.state.check_period {
            return None;
        }
        self.state.last_check_time = now;
        let (delta, failed) = check_consistency(task_img, &label, oracle);
        if failed {
            self.state.oracle_failures += 1;
        }
        Some(delta)
    }
}
