//! Shared domain types for recorded sessions, induced workflows, and
//! counterfactual expansions, together with validation and canonical
//! serialization.
//!
//! All types are immutable values after construction; they are safe to share
//! and send between threads without synchronization.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use crate::error::ModelError;

/// Kind of a recorded input event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Click,
    Key,
    Scroll,
    Paste,
    Idle,
}

/// One recorded mouse/keyboard action, timestamped relative to session start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEvent {
    pub timestamp_ms: u64,
    pub kind: ActionKind,
    /// Recovered typed or pasted text, when the recorder could capture it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screenshot_ref: Option<String>,
}

/// Contiguous run of events forming one visual work unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start_event_index: usize,
    pub end_event_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
}

impl Segment {
    pub fn new(start: usize, end: usize) -> Self {
        Segment {
            start_event_index: start,
            end_event_index: end,
            annotation: None,
        }
    }

    /// Number of events covered by this segment.
    pub fn len(&self) -> usize {
        self.end_event_index - self.start_event_index + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Who performed a workflow step.
///
/// `Unknown` is permitted only before the identification stage has run; every
/// scoring operation requires actors to be resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    HumanOnly,
    AiAssisted,
    Unknown,
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Actor::HumanOnly => write!(f, "human_only"),
            Actor::AiAssisted => write!(f, "ai_assisted"),
            Actor::Unknown => write!(f, "unknown"),
        }
    }
}

/// One induced workflow step: a natural-language description of a coherent
/// unit of progress, tied to the trace segments it was induced from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowStep {
    pub index: usize,
    pub text: String,
    pub actor: Actor,
    #[serde(default)]
    pub segment_refs: Vec<usize>,
}

impl WorkflowStep {
    pub fn new(index: usize, text: impl Into<String>) -> Self {
        WorkflowStep {
            index,
            text: text.into(),
            actor: Actor::Unknown,
            segment_refs: Vec::new(),
        }
    }

    pub fn with_actor(mut self, actor: Actor) -> Self {
        self.actor = actor;
        self
    }
}

/// Study task the session belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    Timer,
    Recipes,
    VisionBoard,
    Planner,
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskId::Timer => write!(f, "timer"),
            TaskId::Recipes => write!(f, "recipes"),
            TaskId::VisionBoard => write!(f, "vision_board"),
            TaskId::Planner => write!(f, "planner"),
        }
    }
}

/// Experimental condition. `Unlabeled` lets the scoring pipeline run on data
/// collected outside the study design; group comparisons require a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Short,
    Long,
    Unlabeled,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Short => write!(f, "short"),
            Condition::Long => write!(f, "long"),
            Condition::Unlabeled => write!(f, "unlabeled"),
        }
    }
}

/// Ordered sequence of steps one participant took to achieve a task goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workflow {
    pub participant_id: String,
    pub task_id: TaskId,
    pub condition: Condition,
    pub steps: Vec<WorkflowStep>,
}

impl Workflow {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Indices of steps tagged `AiAssisted`.
    pub fn ai_step_indices(&self) -> Vec<usize> {
        self.steps
            .iter()
            .filter(|s| s.actor == Actor::AiAssisted)
            .map(|s| s.index)
            .collect()
    }

    /// True when every step has a resolved (non-`Unknown`) actor.
    pub fn actors_resolved(&self) -> bool {
        self.steps.iter().all(|s| s.actor != Actor::Unknown)
    }

    /// Step texts joined by newline, the canonical embedding input.
    pub fn joined_text(&self) -> String {
        let texts: Vec<&str> = self.steps.iter().map(|s| s.text.as_str()).collect();
        texts.join("\n")
    }
}

/// Human-only replacement sequence for a single AI-assisted step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualExpansion {
    pub source_step_index: usize,
    pub replacement_steps: Vec<String>,
}

impl CounterfactualExpansion {
    /// Replacement cardinality `k` for this step.
    pub fn k(&self) -> usize {
        self.replacement_steps.len()
    }
}

/// The observed workflow with every AI-assisted step replaced by its
/// human-only expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualWorkflow {
    pub base: Workflow,
    pub expansions: Vec<CounterfactualExpansion>,
    /// Counterfactual step count: `n - (#expanded steps) + sum(k_i)`.
    pub m: usize,
}

impl CounterfactualWorkflow {
    /// Builds the counterfactual workflow, checking that every expansion
    /// points at an AI-assisted step and has `k >= 1`.
    pub fn build(
        base: Workflow,
        expansions: Vec<CounterfactualExpansion>,
    ) -> Result<Self, ModelError> {
        let n = base.len();
        if n == 0 {
            return Err(ModelError::EmptyWorkflow);
        }
        let mut seen = std::collections::BTreeSet::new();
        for exp in &expansions {
            let step = base
                .steps
                .get(exp.source_step_index)
                .ok_or(ModelError::ExpansionOutOfRange(exp.source_step_index))?;
            if step.actor != Actor::AiAssisted {
                return Err(ModelError::ExpansionOnHumanStep(exp.source_step_index));
            }
            if exp.replacement_steps.is_empty() {
                return Err(ModelError::EmptyExpansion(exp.source_step_index));
            }
            if !seen.insert(exp.source_step_index) {
                return Err(ModelError::DuplicateExpansion(exp.source_step_index));
            }
        }
        let total_k: usize = expansions.iter().map(|e| e.k()).sum();
        let m = n - expansions.len() + total_k;
        Ok(CounterfactualWorkflow { base, expansions, m })
    }

    /// Step texts of the fully materialized counterfactual, in order.
    pub fn materialized_texts(&self) -> Vec<String> {
        let by_index: BTreeMap<usize, &CounterfactualExpansion> = self
            .expansions
            .iter()
            .map(|e| (e.source_step_index, e))
            .collect();
        let mut out = Vec::with_capacity(self.m);
        for step in &self.base.steps {
            match by_index.get(&step.index) {
                Some(exp) => out.extend(exp.replacement_steps.iter().cloned()),
                None => out.push(step.text.clone()),
            }
        }
        out
    }
}

/// Self-reported post-task scales. All optional; ranges checked on load.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SurveyScales {
    /// Mental demand, 1-7.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tlx_load: Option<u8>,
    /// Trust in AI output, 1-5.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trust: Option<u8>,
    /// Perceived ownership of the final project, 1-5.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ownership: Option<u8>,
    /// Perceived distribution of cognitive work, 1-5.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cognitive_split: Option<u8>,
}

impl SurveyScales {
    pub fn validate(&self) -> Result<(), ModelError> {
        let check = |name: &str, v: Option<u8>, lo: u8, hi: u8| -> Result<(), ModelError> {
            if let Some(v) = v {
                if v < lo || v > hi {
                    return Err(ModelError::ScaleOutOfRange {
                        scale: name.to_string(),
                        value: v,
                        lo,
                        hi,
                    });
                }
            }
            Ok(())
        };
        check("tlx_load", self.tlx_load, 1, 7)?;
        check("trust", self.trust, 1, 5)?;
        check("ownership", self.ownership, 1, 5)?;
        check("cognitive_split", self.cognitive_split, 1, 5)?;
        Ok(())
    }
}

/// Everything ingested for one participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub workflow: Workflow,
    #[serde(default)]
    pub survey: SurveyScales,
    /// `(question_id, free_text)` pairs from the post-task recall section.
    #[serde(default)]
    pub recall_answers: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repo_path: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// One invariant breach found by [`validate_workflow`]. Violations are data,
/// not faults: the validator never errors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Step the violation is anchored to, when applicable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_index: Option<usize>,
    pub message: String,
}

impl Violation {
    fn at(step_index: usize, message: impl Into<String>) -> Self {
        Violation {
            step_index: Some(step_index),
            message: message.into(),
        }
    }

    fn global(message: impl Into<String>) -> Self {
        Violation {
            step_index: None,
            message: message.into(),
        }
    }
}

/// Checks every workflow invariant and returns the complete violation list.
/// An empty list means the workflow is valid. Pure: equal inputs always give
/// equal results.
pub fn validate_workflow(w: &Workflow) -> Vec<Violation> {
    let mut out = Vec::new();
    if w.steps.is_empty() {
        out.push(Violation::global("workflow has zero steps (n >= 1 required)"));
        return out;
    }
    for (pos, step) in w.steps.iter().enumerate() {
        if step.index != pos {
            out.push(Violation::at(
                pos,
                format!(
                    "non-dense indices: step at position {pos} carries index {}",
                    step.index
                ),
            ));
        }
        if step.text.trim().is_empty() {
            out.push(Violation::at(pos, "empty step text"));
        }
    }
    out
}

/// Checks the trace invariants: non-decreasing timestamps and non-empty paste
/// payloads.
pub fn validate_trace(events: &[ActionEvent]) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, ev) in events.iter().enumerate() {
        if i > 0 && ev.timestamp_ms < events[i - 1].timestamp_ms {
            out.push(Violation::at(
                i,
                format!(
                    "timestamps decrease: {} ms after {} ms",
                    ev.timestamp_ms,
                    events[i - 1].timestamp_ms
                ),
            ));
        }
        if ev.kind == ActionKind::Paste && ev.payload.as_deref().unwrap_or("").is_empty() {
            out.push(Violation::at(i, "paste event with empty payload"));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Canonical serialization
// ---------------------------------------------------------------------------

/// Serializes a valid workflow to its canonical byte form: compact JSON with
/// declaration field order, terminated by a newline. Identical workflows
/// yield identical bytes.
pub fn canonical_serialize(w: &Workflow) -> Result<Vec<u8>, ModelError> {
    let violations = validate_workflow(w);
    if !violations.is_empty() {
        return Err(ModelError::InvalidWorkflow(violations));
    }
    let mut bytes = serde_json::to_vec(w).map_err(ModelError::Serde)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Parses a canonical workflow document produced by [`canonical_serialize`].
pub fn canonical_parse(bytes: &[u8]) -> Result<Workflow, ModelError> {
    let w: Workflow = serde_json::from_slice(bytes).map_err(ModelError::Serde)?;
    let violations = validate_workflow(&w);
    if !violations.is_empty() {
        return Err(ModelError::InvalidWorkflow(violations));
    }
    Ok(w)
}

/// Parses a line-delimited trace file: one `ActionEvent` JSON object per line.
pub fn parse_trace(text: &str) -> Result<Vec<ActionEvent>, ModelError> {
    let mut events = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ev: ActionEvent = serde_json::from_str(line)
            .map_err(|e| ModelError::TraceLine(lineno + 1, e.to_string()))?;
        events.push(ev);
    }
    Ok(events)
}

/// Serializes a trace to its line-delimited form.
pub fn serialize_trace(events: &[ActionEvent]) -> Result<String, ModelError> {
    let mut out = String::new();
    for ev in events {
        out.push_str(&serde_json::to_string(ev).map_err(ModelError::Serde)?);
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_step_workflow() -> Workflow {
        Workflow {
            participant_id: "p01".into(),
            task_id: TaskId::Timer,
            condition: Condition::Short,
            steps: vec![
                WorkflowStep::new(0, "Read the task description"),
                WorkflowStep::new(1, "Write the timer loop"),
                WorkflowStep::new(2, "Test in the browser"),
            ],
        }
    }

    #[test]
    fn valid_workflow_passes() {
        assert!(validate_workflow(&three_step_workflow()).is_empty());
    }

    #[test]
    fn empty_step_text_flagged_with_index() {
        let mut w = three_step_workflow();
        w.steps[1].text = "   ".into();
        let v = validate_workflow(&w);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].step_index, Some(1));
        assert!(v[0].message.contains("empty step text"));
    }

    #[test]
    fn non_dense_indices_flagged() {
        let mut w = three_step_workflow();
        w.steps.remove(1);
        let v = validate_workflow(&w);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("non-dense"));
    }

    #[test]
    fn zero_step_workflow_flagged() {
        let mut w = three_step_workflow();
        w.steps.clear();
        let v = validate_workflow(&w);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("zero steps"));
    }

    #[test]
    fn validator_is_pure() {
        let mut w = three_step_workflow();
        w.steps[0].text = String::new();
        assert_eq!(validate_workflow(&w), validate_workflow(&w));
    }

    #[test]
    fn canonical_round_trip_is_identity() {
        let w = three_step_workflow();
        let bytes = canonical_serialize(&w).unwrap();
        let parsed = canonical_parse(&bytes).unwrap();
        assert_eq!(parsed, w);
        assert_eq!(canonical_serialize(&parsed).unwrap(), bytes);
    }

    #[test]
    fn identical_workflows_serialize_identically() {
        let a = three_step_workflow();
        let b = three_step_workflow();
        assert_eq!(
            canonical_serialize(&a).unwrap(),
            canonical_serialize(&b).unwrap()
        );
    }

    #[test]
    fn differing_step_text_differs_in_bytes() {
        let a = three_step_workflow();
        let mut b = three_step_workflow();
        b.steps[2].text = "Test in the terminal".into();
        assert_ne!(
            canonical_serialize(&a).unwrap(),
            canonical_serialize(&b).unwrap()
        );
    }

    #[test]
    fn invalid_workflow_rejected_by_serializer() {
        let mut w = three_step_workflow();
        w.steps[0].text = String::new();
        assert!(matches!(
            canonical_serialize(&w),
            Err(ModelError::InvalidWorkflow(_))
        ));
    }

    #[test]
    fn counterfactual_m_accounts_for_expansions() {
        let mut w = three_step_workflow();
        w.steps[1].actor = Actor::AiAssisted;
        let cw = CounterfactualWorkflow::build(
            w,
            vec![CounterfactualExpansion {
                source_step_index: 1,
                replacement_steps: vec!["a".into(), "b".into(), "c".into()],
            }],
        )
        .unwrap();
        assert_eq!(cw.m, 5); // 3 - 1 + 3
        assert_eq!(
            cw.materialized_texts(),
            vec!["Read the task description", "a", "b", "c", "Test in the browser"]
        );
    }

    #[test]
    fn expansion_on_human_step_rejected() {
        let w = three_step_workflow();
        let err = CounterfactualWorkflow::build(
            w,
            vec![CounterfactualExpansion {
                source_step_index: 0,
                replacement_steps: vec!["a".into()],
            }],
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::ExpansionOnHumanStep(0)));
    }

    #[test]
    fn m_equals_n_without_expansions() {
        let w = three_step_workflow();
        let cw = CounterfactualWorkflow::build(w, vec![]).unwrap();
        assert_eq!(cw.m, 3);
    }

    #[test]
    fn trace_validation_catches_order_and_paste() {
        let events = vec![
            ActionEvent {
                timestamp_ms: 100,
                kind: ActionKind::Click,
                payload: None,
                screenshot_ref: None,
            },
            ActionEvent {
                timestamp_ms: 50,
                kind: ActionKind::Paste,
                payload: Some(String::new()),
                screenshot_ref: None,
            },
        ];
        let v = validate_trace(&events);
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn trace_line_round_trip() {
        let events = vec![
            ActionEvent {
                timestamp_ms: 0,
                kind: ActionKind::Key,
                payload: Some("x".into()),
                screenshot_ref: None,
            },
            ActionEvent {
                timestamp_ms: 40,
                kind: ActionKind::Click,
                payload: None,
                screenshot_ref: Some("frames/0001.png".into()),
            },
        ];
        let text = serialize_trace(&events).unwrap();
        assert_eq!(parse_trace(&text).unwrap(), events);
    }

    #[test]
    fn survey_scale_ranges_enforced() {
        let mut s = SurveyScales::default();
        s.tlx_load = Some(7);
        assert!(s.validate().is_ok());
        s.tlx_load = Some(8);
        assert!(s.validate().is_err());
    }
}
