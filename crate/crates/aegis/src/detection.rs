//! Hybrid failure detection: execution-pattern analysis, output-consistency
//! checking, and the reliability threshold trigger, plus classification of
//! detected anomalies into the four-type taxonomy.
//!
//! Detection reads only trajectories, scores, and observable workflow state.
//! It never sees injection ground truth; the signatures make that structural.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ActionKind, ActionStatus, ContradictionRule, DetectionSource, ExperimentConfig, FailureEvent,
    FailureType, ReliabilityScore, SubtaskStatus, TaskSpec, Trajectory,
};
use crate::reliability::normalize_tokens;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Failure trigger: R strictly below theta.
    pub theta: f64,
    /// Consecutive same-tool failures for an execution-failure event.
    pub repeated_failure_n: u32,
    /// Identical-action recurrences flagging a non-progressing loop.
    pub loop_window: u32,
    /// Trailing actions inspected for confidence degradation.
    pub confidence_window: u32,
    pub contradiction_rule: ContradictionRule,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            theta: 0.65,
            repeated_failure_n: 3,
            loop_window: 4,
            confidence_window: 3,
            contradiction_rule: ContradictionRule::MajorityDisagreement,
        }
    }
}

impl DetectionConfig {
    pub fn from_experiment(cfg: &ExperimentConfig) -> Self {
        DetectionConfig {
            theta: cfg.theta,
            repeated_failure_n: cfg.detection.repeated_failure_n,
            loop_window: cfg.detection.loop_window,
            confidence_window: cfg.detection.confidence_window,
            contradiction_rule: cfg.detection.contradiction_rule,
        }
    }
}

/// Execution pattern analysis over one trajectory.
///
/// Emits an event when (a) the same tool fails `repeated_failure_n`
/// consecutive times, or (b) an identical (kind, tool, args) action recurs at
/// least `loop_window` times within a sliding window of `2·loop_window`
/// steps. Each streak or loop signature produces one event, carrying the step
/// at which the rule tripped.
pub fn analyze_patterns(traj: &Trajectory, cfg: &DetectionConfig) -> Vec<FailureEvent> {
    let mut events = Vec::new();

    // (a) repeated failures of one tool
    let n = cfg.repeated_failure_n as usize;
    let mut streak_tool: Option<&str> = None;
    let mut streak_len = 0usize;
    let mut streak_reported = false;
    for a in &traj.actions {
        let failed_tool = match (&a.kind, &a.status) {
            (ActionKind::ToolCall, ActionStatus::ToolError(_)) => a.tool.as_deref(),
            _ => None,
        };
        match failed_tool {
            Some(tool) if streak_tool == Some(tool) => streak_len += 1,
            Some(tool) => {
                streak_tool = Some(tool);
                streak_len = 1;
                streak_reported = false;
            }
            None => {
                streak_tool = None;
                streak_len = 0;
                streak_reported = false;
            }
        }
        if streak_len >= n && !streak_reported {
            streak_reported = true;
            events.push(FailureEvent {
                failure_type: FailureType::Execution,
                step_index: Some(a.step_index),
                run_index: Some(traj.run_index),
                source: DetectionSource::PatternAnalysis,
                evidence: format!(
                    "tool {} failed {streak_len} consecutive times",
                    streak_tool.unwrap_or("?")
                ),
                tool: streak_tool.map(str::to_string),
                injected: None,
            });
        }
    }

    // (b) non-progressing loop: identical action signature recurring
    let w = cfg.loop_window as usize;
    let window = 2 * w;
    let mut reported: Vec<(ActionKind, Option<&str>, &str)> = Vec::new();
    for (t, a) in traj.actions.iter().enumerate() {
        let sig = (a.kind, a.tool.as_deref(), a.args.as_str());
        if reported.contains(&sig) {
            continue;
        }
        let start = (t + 1).saturating_sub(window);
        let count = traj.actions[start..=t]
            .iter()
            .filter(|b| (b.kind, b.tool.as_deref(), b.args.as_str()) == sig)
            .count();
        if count >= w {
            reported.push(sig);
            events.push(FailureEvent {
                failure_type: FailureType::ReasoningInconsistency,
                step_index: Some(a.step_index),
                run_index: Some(traj.run_index),
                source: DetectionSource::PatternAnalysis,
                evidence: format!("action `{}` recurred {count} times without progress", a.args),
                tool: None,
                injected: None,
            });
        }
    }

    events
}

/// Output consistency check across a bundle of K runs.
///
/// Final outputs are normalized the same way action tokens are. A run that
/// produced no output cannot form or join a majority — "no answer" is not a
/// coherent answer. If no strict majority exists, the disagreement is an
/// inconsistency event citing the run indices.
pub fn check_consistency(bundle: &[Trajectory], cfg: &DetectionConfig) -> Result<Option<FailureEvent>> {
    let k = bundle.len();
    if k < 2 {
        return Err(Error::Contract(format!(
            "consistency check requires K >= 2 runs (got {k})"
        )));
    }
    let ContradictionRule::MajorityDisagreement = cfg.contradiction_rule;

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for traj in bundle {
        let norm = normalize_tokens(&traj.final_output).join(" ");
        if !norm.is_empty() {
            *counts.entry(norm).or_insert(0) += 1;
        }
    }
    let has_majority = counts.values().any(|&c| 2 * c > k);
    if has_majority {
        return Ok(None);
    }
    let runs: Vec<String> = bundle.iter().map(|t| t.run_index.to_string()).collect();
    Ok(Some(FailureEvent {
        failure_type: FailureType::ReasoningInconsistency,
        step_index: None,
        run_index: None,
        source: DetectionSource::ConsistencyCheck,
        evidence: format!(
            "no strict-majority output among {k} runs (runs {}; {} distinct non-empty outputs)",
            runs.join(","),
            counts.len()
        ),
        tool: None,
        injected: None,
    }))
}

/// Threshold trigger: an event iff R < theta, strictly.
///
/// The event's preliminary type points at the weakest component (low C →
/// inconsistency, low S → hallucination, low E → execution failure);
/// classification has the final word.
pub fn threshold_trigger(score: &ReliabilityScore) -> Option<FailureEvent> {
    if score.r >= score.theta {
        return None;
    }
    let prelim = if score.e <= score.s && score.e <= score.c {
        FailureType::Execution
    } else if score.s <= score.c {
        FailureType::Hallucination
    } else {
        FailureType::ReasoningInconsistency
    };
    Some(FailureEvent {
        failure_type: prelim,
        step_index: None,
        run_index: None,
        source: DetectionSource::ThresholdBreach,
        evidence: format!(
            "R = {:.4} below theta = {:.4} (C = {:.4}, S = {:.4}, E = {:.4})",
            score.r, score.theta, score.c, score.s, score.e
        ),
        tool: None,
        injected: None,
    })
}

/// Observable workflow context handed to the classifier: the representative
/// trajectory, the whole bundle, the task's post-run subtask statuses, and
/// the bundle's semantic score.
pub struct ClassifyContext<'a> {
    pub representative: &'a Trajectory,
    pub bundle: &'a [Trajectory],
    pub task: &'a TaskSpec,
    pub semantic_s: f64,
}

/// Classify detected anomalies by priority: hard evidence first.
///
/// 1. Any tool-error evidence → execution failure (F2).
/// 2. A failed subtask with dependents affected, or a subtask blocked behind
///    a failed/cascaded dependency → workflow propagation (F4).
/// 3. Strictly decreasing confidence over the trailing window and a final
///    output failing semantic match (S < 0.5) → hallucination (F1).
/// 4. Otherwise (contradiction or loop evidence) → reasoning inconsistency
///    (F3).
pub fn classify_failure(
    events: &[FailureEvent],
    ctx: &ClassifyContext,
    confidence_window: u32,
) -> Result<FailureType> {
    if events.is_empty() {
        return Err(Error::Contract("classification needs at least one event".into()));
    }

    // (1) tool-error evidence anywhere in the bundle or events
    let tool_evidence = events.iter().any(|e| e.tool.is_some())
        || ctx.bundle.iter().any(|t| {
            t.actions
                .iter()
                .any(|a| matches!(a.status, ActionStatus::ToolError(_)))
        });
    if tool_evidence {
        return Ok(FailureType::Execution);
    }

    // (2) workflow-propagation evidence in the task state
    let dependents = ctx.task.dependents();
    let propagation = ctx.task.subtasks.iter().any(|s| {
        (s.status == SubtaskStatus::Failed
            && dependents.get(s.id.as_str()).map_or(false, |d| !d.is_empty()))
            || s.status == SubtaskStatus::Cascaded
    });
    if propagation {
        return Ok(FailureType::WorkflowPropagation);
    }

    // (3) degrading confidence plus failed semantic match
    let w = confidence_window as usize;
    let actions = &ctx.representative.actions;
    if actions.len() >= w && w >= 2 {
        let tail = &actions[actions.len() - w..];
        let strictly_decreasing = tail.windows(2).all(|p| p[0].confidence > p[1].confidence);
        if strictly_decreasing && ctx.semantic_s < 0.5 {
            return Ok(FailureType::Hallucination);
        }
    }

    // (4) soft contradiction / loop evidence
    Ok(FailureType::ReasoningInconsistency)
}
