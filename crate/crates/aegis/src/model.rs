//! Shared domain vocabulary: tasks, plans, actions, trajectories, tools,
//! the failure taxonomy, reliability scores, and experiment configuration.
//!
//! All values here are plain data. They are immutable after construction
//! except for subtask statuses and tool evaluation scores, which evolve as a
//! task executes.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Tasks and plans
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    MultiStepReasoning,
    ApiOrchestration,
    DocumentProcessing,
}

impl TaskType {
    pub const ALL: [TaskType; 3] = [
        TaskType::MultiStepReasoning,
        TaskType::ApiOrchestration,
        TaskType::DocumentProcessing,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            TaskType::MultiStepReasoning => "multi_step_reasoning",
            TaskType::ApiOrchestration => "api_orchestration",
            TaskType::DocumentProcessing => "document_processing",
        }
    }

    /// Short prefix used in generated task ids.
    pub fn id_prefix(&self) -> &'static str {
        match self {
            TaskType::MultiStepReasoning => "msr",
            TaskType::ApiOrchestration => "api",
            TaskType::DocumentProcessing => "doc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SubtaskStatus {
    #[default]
    Pending,
    Succeeded,
    Failed,
    /// Removed from the plan by re-planning.
    Excluded,
    /// Unreachable because every dependency path runs through a failed or
    /// excluded node.
    Cascaded,
}

impl SubtaskStatus {
    /// Excluded and Cascaded nodes are out of the executable plan.
    pub fn is_dead(&self) -> bool {
        matches!(self, SubtaskStatus::Excluded | SubtaskStatus::Cascaded)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubtaskNode {
    pub id: String,
    pub description: String,
    /// Lower value = executed earlier among ready nodes.
    pub priority: u32,
    #[serde(default)]
    pub deps: BTreeSet<String>,
    /// Capability tag matching `ToolSpec::capabilities`; empty for
    /// pure-reasoning subtasks.
    #[serde(default)]
    pub required_capability: String,
    #[serde(default)]
    pub status: SubtaskStatus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub task_type: TaskType,
    pub objective: String,
    pub subtasks: Vec<SubtaskNode>,
    /// Knowledge-base entry ids consulted when scoring semantic accuracy.
    #[serde(default)]
    pub validation_refs: Vec<String>,
    /// Canonical answer text; ground truth for the task success rate.
    pub expected_output: String,
}

impl TaskSpec {
    pub fn subtask(&self, id: &str) -> Option<&SubtaskNode> {
        self.subtasks.iter().find(|s| s.id == id)
    }

    pub fn subtask_mut(&mut self, id: &str) -> Option<&mut SubtaskNode> {
        self.subtasks.iter_mut().find(|s| s.id == id)
    }

    /// Map from subtask id to the ids that depend on it.
    pub fn dependents(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut map: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for s in &self.subtasks {
            map.entry(s.id.as_str()).or_default();
        }
        for s in &self.subtasks {
            for d in &s.deps {
                map.entry(d.as_str()).or_default().push(s.id.as_str());
            }
        }
        map
    }

    /// Subtasks nothing depends on (the task's terminal nodes).
    pub fn sinks(&self) -> Vec<&SubtaskNode> {
        let deps = self.dependents();
        self.subtasks
            .iter()
            .filter(|s| deps.get(s.id.as_str()).map_or(true, |d| d.is_empty()))
            .collect()
    }

    /// True when every node still in the plan has succeeded.
    pub fn is_complete(&self) -> bool {
        self.subtasks
            .iter()
            .all(|s| s.status == SubtaskStatus::Succeeded || s.status.is_dead())
    }

    /// Mark every pending node blocked behind a Failed/Cascaded dependency as
    /// Cascaded. Called at the end of a run so workflow-propagation damage is
    /// visible in the recorded state. Before re-planning, a failed dependency
    /// blocks its dependents; only exclusion waives it.
    pub fn propagate_cascades(&mut self) {
        loop {
            let blocked: Vec<String> = self
                .subtasks
                .iter()
                .filter(|s| s.status == SubtaskStatus::Pending)
                .filter(|s| {
                    s.deps.iter().any(|d| {
                        matches!(
                            self.subtask(d).map(|n| n.status),
                            Some(SubtaskStatus::Failed) | Some(SubtaskStatus::Cascaded)
                        )
                    })
                })
                .map(|s| s.id.clone())
                .collect();
            if blocked.is_empty() {
                break;
            }
            for id in blocked {
                self.subtask_mut(&id).unwrap().status = SubtaskStatus::Cascaded;
            }
        }
    }
}

/// Returns every invariant violation of the task; empty means valid.
/// Violations are data, not errors.
pub fn validate_task(task: &TaskSpec) -> Vec<String> {
    let mut violations = Vec::new();

    let mut seen = BTreeSet::new();
    for s in &task.subtasks {
        if !seen.insert(s.id.as_str()) {
            violations.push(format!("duplicate id {}", s.id));
        }
        if s.priority == 0 {
            violations.push(format!("bad priority 0 on {}", s.id));
        }
    }

    for s in &task.subtasks {
        for d in &s.deps {
            if task.subtask(d).is_none() {
                violations.push(format!("dangling dep {d} (from {})", s.id));
            }
        }
    }

    // Kahn's algorithm; anything left over sits on a cycle. An independent
    // DFS detector lives in `verify` for cross-checking.
    let ids: Vec<&str> = task.subtasks.iter().map(|s| s.id.as_str()).collect();
    let id_set: BTreeSet<&str> = ids.iter().copied().collect();
    let mut indegree: BTreeMap<&str, usize> = ids.iter().map(|&i| (i, 0)).collect();
    for s in &task.subtasks {
        for d in &s.deps {
            if id_set.contains(d.as_str()) {
                *indegree.get_mut(s.id.as_str()).unwrap() += 1;
            }
        }
    }
    let mut queue: Vec<&str> = indegree
        .iter()
        .filter(|(_, &deg)| deg == 0)
        .map(|(&i, _)| i)
        .collect();
    let mut removed = BTreeSet::new();
    while let Some(node) = queue.pop() {
        removed.insert(node);
        for s in &task.subtasks {
            if s.deps.contains(node) && !removed.contains(s.id.as_str()) {
                let deg = indegree.get_mut(s.id.as_str()).unwrap();
                *deg = deg.saturating_sub(1);
                if *deg == 0 {
                    queue.push(s.id.as_str());
                }
            }
        }
    }
    if removed.len() != id_set.len() {
        let mut cyclic: Vec<&str> = id_set.difference(&removed).copied().collect();
        cyclic.sort_unstable();
        violations.push(format!("cycle: {}", cyclic.join(",")));
    }

    violations
}

/// Pending subtasks whose dependencies are all satisfied, sorted by
/// (priority ascending, id lexicographic).
///
/// A dependency is satisfied when it Succeeded, or when re-planning removed it
/// from the plan (Excluded/Cascaded) — an excluded dependency is waived, which
/// is what lets a diamond route around a failed branch.
pub fn topo_ready(task: &TaskSpec) -> Vec<String> {
    let mut ready: Vec<&SubtaskNode> = task
        .subtasks
        .iter()
        .filter(|s| s.status == SubtaskStatus::Pending)
        .filter(|s| {
            s.deps.iter().all(|d| {
                task.subtask(d).map_or(false, |n| {
                    n.status == SubtaskStatus::Succeeded || n.status.is_dead()
                })
            })
        })
        .collect();
    ready.sort_by(|a, b| a.priority.cmp(&b.priority).then(a.id.cmp(&b.id)));
    ready.into_iter().map(|s| s.id.clone()).collect()
}

// ---------------------------------------------------------------------------
// Actions and trajectories
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Reason,
    ToolCall,
    Respond,
}

impl ActionKind {
    pub fn label(&self) -> &'static str {
        match self {
            ActionKind::Reason => "reason",
            ActionKind::ToolCall => "toolcall",
            ActionKind::Respond => "respond",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolErrorKind {
    Timeout,
    Refusal,
    Malformed,
    Unavailable,
    Other(String),
}

impl ToolErrorKind {
    pub fn label(&self) -> &str {
        match self {
            ToolErrorKind::Timeout => "timeout",
            ToolErrorKind::Refusal => "refusal",
            ToolErrorKind::Malformed => "malformed",
            ToolErrorKind::Unavailable => "unavailable",
            ToolErrorKind::Other(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionStatus {
    Ok,
    ToolError(ToolErrorKind),
}

impl ActionStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, ActionStatus::Ok)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    /// 0-based position within the trajectory.
    pub step_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<String>,
    pub args: String,
    pub output: String,
    /// Always in [0, 1].
    pub confidence: f64,
    pub status: ActionStatus,
    pub sim_time_ms: u64,
}

impl Action {
    /// Invariant check: tool present iff the action is a tool call, and
    /// confidence in range.
    pub fn validate(&self) -> Result<()> {
        if self.tool.is_some() != (self.kind == ActionKind::ToolCall) {
            return Err(Error::Contract(format!(
                "action {}: tool field present iff kind is tool_call",
                self.step_index
            )));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::Contract(format!(
                "action {}: confidence {} out of [0,1]",
                self.step_index, self.confidence
            )));
        }
        Ok(())
    }
}

/// One execution run: an ordered sequence of agent steps. Bundles of K
/// trajectories from independent runs of the same input feed consistency
/// scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub run_index: usize,
    pub seed: u64,
    pub actions: Vec<Action>,
    pub final_output: String,
}

impl Trajectory {
    pub fn mean_confidence(&self) -> f64 {
        if self.actions.is_empty() {
            return 0.0;
        }
        self.actions.iter().map(|a| a.confidence).sum::<f64>() / self.actions.len() as f64
    }
}

// ---------------------------------------------------------------------------
// Tools
// ---------------------------------------------------------------------------

/// Relative likelihood of each injectable fault kind for a tool.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FaultProfile {
    pub timeout: f64,
    pub refusal: f64,
    pub malformed: f64,
}

impl Default for FaultProfile {
    fn default() -> Self {
        FaultProfile {
            timeout: 0.5,
            refusal: 0.25,
            malformed: 0.25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub capabilities: BTreeSet<String>,
    /// Lower = cheaper. Drives the simulated latency model and the
    /// tool-reselection tie-break.
    pub resource_cost: f64,
    /// Response template; `{args}` and `{capability}` are substituted.
    pub behavior: String,
    pub fault_profile: FaultProfile,
    /// Exponentially-weighted historical success rate, in [0, 1].
    pub eval_score: f64,
}

impl ToolSpec {
    /// EWMA update after an observed call outcome. Stays in [0, 1].
    pub fn record_outcome(&mut self, success: bool, alpha: f64) {
        let x = if success { 1.0 } else { 0.0 };
        self.eval_score = (1.0 - alpha) * self.eval_score + alpha * x;
        self.eval_score = self.eval_score.clamp(0.0, 1.0);
    }
}

// ---------------------------------------------------------------------------
// Failure taxonomy, scores, healing
// ---------------------------------------------------------------------------

/// The four-type failure taxonomy. Exhaustive and mutually exclusive labels
/// for any classified failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureType {
    /// F1: outputs factually incorrect or unsupported by context.
    Hallucination,
    /// F2: failures in tool invocation or API interaction.
    Execution,
    /// F3: logical contradictions in multi-step reasoning paths.
    ReasoningInconsistency,
    /// F4: cascading failures where one step's error fails dependent steps.
    WorkflowPropagation,
}

impl FailureType {
    pub const ALL: [FailureType; 4] = [
        FailureType::Hallucination,
        FailureType::Execution,
        FailureType::ReasoningInconsistency,
        FailureType::WorkflowPropagation,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            FailureType::Hallucination => "F1",
            FailureType::Execution => "F2",
            FailureType::ReasoningInconsistency => "F3",
            FailureType::WorkflowPropagation => "F4",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl ReliabilityWeights {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(w1: f64, w2: f64, w3: f64) -> Result<Self> {
        let w = ReliabilityWeights { w1, w2, w3 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.w1 < 0.0 || self.w2 < 0.0 || self.w3 < 0.0 {
            return Err(Error::Contract(format!(
                "weights must be nonnegative: ({}, {}, {})",
                self.w1, self.w2, self.w3
            )));
        }
        let sum = self.w1 + self.w2 + self.w3;
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::Contract(format!(
                "weights must sum to 1 (got {sum})"
            )));
        }
        Ok(())
    }
}

/// A computed reliability evaluation point: components, weighted score, and
/// the trigger threshold in force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityScore {
    pub c: f64,
    pub s: f64,
    pub e: f64,
    pub r: f64,
    pub theta: f64,
}

impl ReliabilityScore {
    /// R must be recomputable from the stored components and the weights.
    pub fn recompute_matches(&self, w: &ReliabilityWeights, tol: f64) -> bool {
        (w.w1 * self.c + w.w2 * self.s + w.w3 * self.e - self.r).abs() <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionSource {
    PatternAnalysis,
    ConsistencyCheck,
    ThresholdBreach,
}

/// A detected anomaly with its evidence. `injected` carries the ground-truth
/// injection label copied in by the harness for scoring detection accuracy;
/// detection and healing never read it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureEvent {
    pub failure_type: FailureType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_index: Option<usize>,
    pub source: DetectionSource,
    pub evidence: String,
    /// Tool implicated by the evidence, if any (repeated-failure patterns).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injected: Option<FailureType>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HealingStrategy {
    Replan,
    PromptCorrection,
    ToolReselection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HealingParams {
    Replan {
        exclude: Vec<String>,
    },
    PromptCorrection {
        flagged_claims: Vec<String>,
        cited_facts: Vec<String>,
    },
    ToolReselection {
        failed_tool: String,
        capability: String,
        replacement: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealingAction {
    pub strategy: HealingStrategy,
    pub params: HealingParams,
    /// 1-based healing attempt counter for the task execution.
    pub attempt: u32,
}

// ---------------------------------------------------------------------------
// Prompt state
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedClaim {
    pub claim: String,
    /// Up to three knowledge-base facts the claim should be verified against.
    pub facts: Vec<String>,
}

/// One correction appended by the prompt-rewriting strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionBlock {
    pub restated_objective: String,
    pub flagged: Vec<FlaggedClaim>,
    pub instruction: String,
}

/// The conversation state handed to the agent backend each step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PromptState {
    pub objective: String,
    /// Free-form context appended by feedback-loop policies.
    pub context_blocks: Vec<String>,
    pub correction_blocks: Vec<CorrectionBlock>,
}

impl PromptState {
    pub fn new(objective: &str) -> Self {
        PromptState {
            objective: objective.to_string(),
            context_blocks: Vec::new(),
            correction_blocks: Vec::new(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!("objective: {}", self.objective);
        for block in &self.context_blocks {
            out.push_str("\n\n");
            out.push_str(block);
        }
        for block in &self.correction_blocks {
            out.push_str("\n\ncorrection:\n");
            out.push_str(&format!("objective restated: {}\n", block.restated_objective));
            for fc in &block.flagged {
                out.push_str(&format!("claim `{}` unsupported — verify against:\n", fc.claim));
                for fact in &fc.facts {
                    out.push_str(&format!("  - {fact}\n"));
                }
            }
            out.push_str(&block.instruction);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightPresets {
    pub multi_step_reasoning: ReliabilityWeights,
    pub api_orchestration: ReliabilityWeights,
    pub document_processing: ReliabilityWeights,
}

impl WeightPresets {
    pub fn preset_for(&self, t: TaskType) -> ReliabilityWeights {
        match t {
            TaskType::MultiStepReasoning => self.multi_step_reasoning,
            TaskType::ApiOrchestration => self.api_orchestration,
            TaskType::DocumentProcessing => self.document_processing,
        }
    }
}

impl Default for WeightPresets {
    fn default() -> Self {
        WeightPresets {
            multi_step_reasoning: ReliabilityWeights { w1: 0.4, w2: 0.4, w3: 0.2 },
            api_orchestration: ReliabilityWeights { w1: 0.2, w2: 0.3, w3: 0.5 },
            document_processing: ReliabilityWeights { w1: 0.3, w2: 0.4, w3: 0.3 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ContradictionRule {
    #[default]
    MajorityDisagreement,
}

/// Detection tunables carried inside the experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionSettings {
    /// Consecutive same-tool failures that trigger an execution-failure event.
    pub repeated_failure_n: u32,
    /// Identical-action recurrences that flag a non-progressing loop.
    pub loop_window: u32,
    /// Trailing actions inspected for confidence degradation.
    pub confidence_window: u32,
    pub contradiction_rule: ContradictionRule,
}

impl Default for DetectionSettings {
    fn default() -> Self {
        DetectionSettings {
            repeated_failure_n: 3,
            loop_window: 4,
            confidence_window: 3,
            contradiction_rule: ContradictionRule::MajorityDisagreement,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HealingSettings {
    pub base_ms: u64,
    pub factor: f64,
    /// Maximum attempts per tool call before escalation.
    pub cap_attempts: u32,
}

impl Default for HealingSettings {
    fn default() -> Self {
        HealingSettings {
            base_ms: 100,
            factor: 2.0,
            cap_attempts: 5,
        }
    }
}

/// How the execution-rate axis treats a run with zero tool attempts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EZeroMode {
    /// Vacuously successful: E = 1.
    #[default]
    VacuousOne,
    /// Drop the E term and renormalize the remaining weights.
    Reweight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringSettings {
    /// Token-overlap threshold for a claim to match a knowledge-base entry.
    pub claim_match_jaccard: f64,
    pub distance: crate::reliability::DistanceKind,
    pub e_zero_attempts: EZeroMode,
    /// When set, prefix scores are logged after every aligned step of the
    /// bundle (observability only; detection stays at iteration granularity).
    pub score_each_step: bool,
}

impl Default for ScoringSettings {
    fn default() -> Self {
        ScoringSettings {
            claim_match_jaccard: 0.6,
            distance: crate::reliability::DistanceKind::WeightedLevenshtein,
            e_zero_attempts: EZeroMode::VacuousOne,
            score_each_step: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum PolicySpec {
    Proposed,
    Standard,
    Retry { max_retries: u32 },
    SelfRefine { rounds: u32 },
    ConsistencyVote { k: u32 },
}

impl PolicySpec {
    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::Proposed => "proposed",
            PolicySpec::Standard => "standard",
            PolicySpec::Retry { .. } => "retry",
            PolicySpec::SelfRefine { .. } => "self_refine",
            PolicySpec::ConsistencyVote { .. } => "consistency_vote",
        }
    }

    pub fn default_set() -> Vec<PolicySpec> {
        vec![
            PolicySpec::Proposed,
            PolicySpec::Standard,
            PolicySpec::Retry { max_retries: 2 },
            PolicySpec::SelfRefine { rounds: 2 },
            PolicySpec::ConsistencyVote { k: 3 },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub cases_per_task_type: u32,
    pub repeats: u32,
    pub injection_prob: f64,
    pub weights: WeightPresets,
    pub theta: f64,
    /// Independent executions per task (K).
    pub k_runs: u32,
    pub max_heal_attempts: u32,
    pub policies: Vec<PolicySpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub detection: DetectionSettings,
    pub healing: HealingSettings,
    pub scoring: ScoringSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: 42,
            cases_per_task_type: 100,
            repeats: 3,
            injection_prob: 0.30,
            weights: WeightPresets::default(),
            theta: 0.65,
            k_runs: 3,
            max_heal_attempts: 3,
            policies: PolicySpec::default_set(),
            output_dir: None,
            detection: DetectionSettings::default(),
            healing: HealingSettings::default(),
            scoring: ScoringSettings::default(),
        }
    }
}

impl ExperimentConfig {
    /// Every invariant violation in the configuration; empty means valid.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(0.0..=1.0).contains(&self.injection_prob) {
            v.push(format!("injection_prob {} out of [0,1]", self.injection_prob));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            v.push(format!("theta {} out of (0,1)", self.theta));
        }
        if self.cases_per_task_type == 0 {
            v.push("cases_per_task_type must be >= 1".into());
        }
        if self.repeats == 0 {
            v.push("repeats must be >= 1".into());
        }
        let consistency_scored = self.policies.iter().any(|p| matches!(p, PolicySpec::Proposed));
        if consistency_scored && self.k_runs < 2 {
            v.push(format!(
                "k_runs {} too small: consistency scoring needs K >= 2",
                self.k_runs
            ));
        }
        if self.k_runs == 0 {
            v.push("k_runs must be >= 1".into());
        }
        if self.max_heal_attempts == 0 {
            v.push("max_heal_attempts must be >= 1".into());
        }
        for (name, w) in [
            ("multi_step_reasoning", &self.weights.multi_step_reasoning),
            ("api_orchestration", &self.weights.api_orchestration),
            ("document_processing", &self.weights.document_processing),
        ] {
            if let Err(e) = w.validate() {
                v.push(format!("weights.{name}: {e}"));
            }
        }
        if self.policies.is_empty() {
            v.push("policies must not be empty".into());
        }
        if self.detection.repeated_failure_n == 0 {
            v.push("detection.repeated_failure_n must be >= 1".into());
        }
        if self.detection.loop_window < 2 {
            v.push("detection.loop_window must be >= 2".into());
        }
        if self.detection.confidence_window < 2 {
            v.push("detection.confidence_window must be >= 2".into());
        }
        if self.healing.cap_attempts == 0 {
            v.push("healing.cap_attempts must be >= 1".into());
        }
        if self.healing.factor < 1.0 {
            v.push("healing.factor must be >= 1".into());
        }
        if !(self.scoring.claim_match_jaccard > 0.0 && self.scoring.claim_match_jaccard <= 1.0) {
            v.push(format!(
                "scoring.claim_match_jaccard {} out of (0,1]",
                self.scoring.claim_match_jaccard
            ));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }
}
