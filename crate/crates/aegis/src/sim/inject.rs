//! Fault injector: per task instance, a seeded draw decides whether a fault
//! is inserted, which taxonomy type it takes, and where it lands. The plan is
//! fully determined by (master seed, task id, repeat index) and is never read
//! by detection or healing — it exists to drive the world and to score
//! detection accuracy afterwards.

use rand::Rng;

use serde::{Deserialize, Serialize};

use crate::model::{ExperimentConfig, FailureType, TaskSpec, ToolErrorKind};
use crate::rng::stream_for;

use super::tools::ToolRegistry;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InjectionPlan {
    pub inject: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_type: Option<FailureType>,
    /// Step at which a hallucination's confidence degradation begins
    /// (informational; the scripted recipe degrades the trailing three).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_step: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_subtask: Option<String>,
    /// Which of the K runs diverges (reasoning-inconsistency faults).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_run: Option<usize>,
    /// Tool taken down for execution faults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_tool: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault_kind: Option<ToolErrorKind>,
    /// Whether the world offers a recovery path by construction.
    pub recoverable: bool,
    /// Transient faults manifest only on the first execution attempt.
    pub transient: bool,
}

impl InjectionPlan {
    pub fn none() -> Self {
        InjectionPlan::default()
    }

    pub fn active_type(&self) -> Option<FailureType> {
        if self.inject {
            self.failure_type
        } else {
            None
        }
    }
}

fn weighted_fault_kind(rng: &mut rand_chacha::ChaCha8Rng, profile: &crate::model::FaultProfile) -> ToolErrorKind {
    let total = profile.timeout + profile.refusal + profile.malformed;
    let draw = rng.gen::<f64>() * if total > 0.0 { total } else { 1.0 };
    if draw < profile.timeout {
        ToolErrorKind::Timeout
    } else if draw < profile.timeout + profile.refusal {
        ToolErrorKind::Refusal
    } else {
        ToolErrorKind::Malformed
    }
}

/// Whether excluding one subtask still leaves a feasible plan.
fn feasible_without(task: &TaskSpec, subtask_id: &str) -> bool {
    let mut clone = task.clone();
    crate::healing::replan(&mut clone, &[subtask_id.to_string()]).is_ok()
}

/// Draw the injection plan for one (task, repeat) instance.
///
/// The stream is keyed by (master_seed, "inject", task id, repeat), so every
/// policy faces the identical fault — the paired design the statistics rely
/// on. Fault type is uniform over the four taxonomy types.
///
/// Recoverability recipe: hallucinations are recoverable (the knowledge base
/// holds the correcting facts); execution faults are recoverable when an
/// alternative tool shares the capability; inconsistency faults are
/// recoverable iff K >= 3 (a majority exists) and are transient;
/// workflow-propagation faults target a subtask with dependents and are
/// recoverable iff an alternative dependency path survives its exclusion.
pub fn draw_injection(
    task: &TaskSpec,
    repeat_index: u32,
    cfg: &ExperimentConfig,
    registry: &ToolRegistry,
    master_seed: u64,
) -> InjectionPlan {
    let mut rng = stream_for(master_seed, &["inject", &task.id, &repeat_index.to_string()]);
    let inject = rng.gen::<f64>() < cfg.injection_prob;
    if !inject {
        return InjectionPlan::none();
    }
    let failure_type = FailureType::ALL[rng.gen_range(0..FailureType::ALL.len())];
    let mut plan = InjectionPlan {
        inject: true,
        failure_type: Some(failure_type),
        ..InjectionPlan::default()
    };
    match failure_type {
        FailureType::Hallucination => {
            let steps = task.subtasks.len();
            plan.target_step = Some(steps.saturating_sub(3));
            plan.recoverable = true;
            plan.transient = false;
        }
        FailureType::Execution => {
            let tool_subtasks: Vec<&crate::model::SubtaskNode> = task
                .subtasks
                .iter()
                .filter(|s| !s.required_capability.is_empty())
                .collect();
            if tool_subtasks.is_empty() {
                // nothing to break; the fault cannot manifest
                plan.recoverable = false;
                return plan;
            }
            let target = tool_subtasks[rng.gen_range(0..tool_subtasks.len())];
            let cap = target.required_capability.as_str();
            let bound = registry.default_binding(cap);
            plan.target_subtask = Some(target.id.clone());
            if let Some(tool) = bound {
                plan.fault_kind = Some(weighted_fault_kind(&mut rng, &tool.fault_profile));
                plan.target_tool = Some(tool.name.clone());
                plan.recoverable = registry.with_capability(cap).len() >= 2;
            }
            plan.transient = false;
        }
        FailureType::ReasoningInconsistency => {
            plan.target_run = Some(rng.gen_range(0..cfg.k_runs.max(1)) as usize);
            plan.recoverable = cfg.k_runs >= 3;
            plan.transient = true;
        }
        FailureType::WorkflowPropagation => {
            let dependents = task.dependents();
            let candidates: Vec<&str> = task
                .subtasks
                .iter()
                .filter(|s| dependents.get(s.id.as_str()).map_or(false, |d| !d.is_empty()))
                .map(|s| s.id.as_str())
                .collect();
            if candidates.is_empty() {
                plan.recoverable = false;
                return plan;
            }
            let target = candidates[rng.gen_range(0..candidates.len())];
            plan.target_subtask = Some(target.to_string());
            plan.recoverable = feasible_without(task, target);
            plan.transient = false;
        }
    }
    plan
}
