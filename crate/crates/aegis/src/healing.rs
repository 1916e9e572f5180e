//! Self-healing: maps classified failures to recovery strategies, rewrites
//! prompts, reselects tools, re-plans around failed subtasks, and converts
//! infrastructure exceptions into agent-readable context with retry-interval
//! management.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    CorrectionBlock, ExperimentConfig, FailureType, FlaggedClaim, HealingAction, HealingParams,
    HealingStrategy, PromptState, SubtaskStatus, TaskSpec, ToolErrorKind, ToolSpec,
};
use crate::reliability::{token_jaccard, ClaimMatch};
use crate::sim::ValidationKB;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Backoff {
    pub base_ms: u64,
    pub factor: f64,
    /// Maximum attempts per tool call; the next attempt escalates instead.
    pub cap_attempts: u32,
}

impl Default for Backoff {
    fn default() -> Self {
        Backoff { base_ms: 100, factor: 2.0, cap_attempts: 5 }
    }
}

/// Strategy table plus attempt bounds. Every failure type has at least one
/// strategy and every ladder ends at re-planning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealingPolicy {
    pub table: BTreeMap<FailureType, Vec<HealingStrategy>>,
    pub max_heal_attempts: u32,
    pub backoff: Backoff,
}

impl Default for HealingPolicy {
    fn default() -> Self {
        let mut table = BTreeMap::new();
        table.insert(
            FailureType::Hallucination,
            vec![HealingStrategy::PromptCorrection, HealingStrategy::Replan],
        );
        table.insert(
            FailureType::Execution,
            vec![HealingStrategy::ToolReselection, HealingStrategy::Replan],
        );
        table.insert(FailureType::ReasoningInconsistency, vec![HealingStrategy::Replan]);
        table.insert(FailureType::WorkflowPropagation, vec![HealingStrategy::Replan]);
        HealingPolicy {
            table,
            max_heal_attempts: 3,
            backoff: Backoff::default(),
        }
    }
}

impl HealingPolicy {
    pub fn from_experiment(cfg: &ExperimentConfig) -> Self {
        HealingPolicy {
            max_heal_attempts: cfg.max_heal_attempts,
            backoff: Backoff {
                base_ms: cfg.healing.base_ms,
                factor: cfg.healing.factor,
                cap_attempts: cfg.healing.cap_attempts,
            },
            ..HealingPolicy::default()
        }
    }
}

/// All attempts are spent; the task is marked failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HealingExhausted;

/// No tool shares the required capability; escalate to re-planning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoAlternativeTool;

/// Every path to the task's terminal subtasks is excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanInfeasible;

/// Pick the recovery strategy for a classified failure.
///
/// Default mapping: hallucination → prompt correction, execution → tool
/// reselection, inconsistency and propagation → re-planning. A strategy that
/// already failed for the same failure type escalates to the next in the
/// list; the ladder ends at re-planning, which may repeat until attempts run
/// out.
pub fn select_strategy(
    ftype: FailureType,
    history: &[HealingAction],
    policy: &HealingPolicy,
) -> std::result::Result<HealingAction, HealingExhausted> {
    if history.len() as u32 >= policy.max_heal_attempts {
        return Err(HealingExhausted);
    }
    let ladder = policy
        .table
        .get(&ftype)
        .cloned()
        .unwrap_or_else(|| vec![HealingStrategy::Replan]);
    let tried: Vec<HealingStrategy> = history.iter().map(|h| h.strategy).collect();
    let strategy = ladder
        .iter()
        .copied()
        .find(|s| !tried.contains(s))
        .unwrap_or(HealingStrategy::Replan);
    let params = match strategy {
        HealingStrategy::Replan => HealingParams::Replan { exclude: Vec::new() },
        HealingStrategy::PromptCorrection => HealingParams::PromptCorrection {
            flagged_claims: Vec::new(),
            cited_facts: Vec::new(),
        },
        HealingStrategy::ToolReselection => HealingParams::ToolReselection {
            failed_tool: String::new(),
            capability: String::new(),
            replacement: String::new(),
        },
    };
    Ok(HealingAction {
        strategy,
        params,
        attempt: history.len() as u32 + 1,
    })
}

/// Deterministic prompt rewrite: restate the objective, cite the flagged
/// claims with up to three knowledge-base facts each, and instruct the agent
/// to answer only from provided facts. Pure function of its inputs; each
/// application appends exactly one correction block.
pub fn correct_prompt(
    prompt: &PromptState,
    flagged: &[ClaimMatch],
    kb: &ValidationKB,
    task: &TaskSpec,
) -> PromptState {
    let mut facts: Vec<(&str, &str)> = task
        .validation_refs
        .iter()
        .filter_map(|id| kb.lookup(id).map(|text| (id.as_str(), text)))
        .collect();
    facts.sort_by(|a, b| a.0.cmp(b.0));

    let flagged_claims: Vec<FlaggedClaim> = flagged
        .iter()
        .filter(|m| !m.matched)
        .map(|m| {
            // rank this task's facts by relevance to the claim, cite up to 3;
            // stable sort keeps entry-id order on ties
            let mut ranked: Vec<(&str, f64)> = facts
                .iter()
                .map(|(_, text)| (*text, token_jaccard(&m.claim, text)))
                .collect();
            ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
            FlaggedClaim {
                claim: m.claim.clone(),
                facts: ranked.iter().take(3).map(|(t, _)| t.to_string()).collect(),
            }
        })
        .collect();

    let mut next = prompt.clone();
    next.correction_blocks.push(CorrectionBlock {
        restated_objective: task.objective.clone(),
        flagged: flagged_claims,
        instruction: "answer only from the provided facts".to_string(),
    });
    next
}

/// Rank alternative tools sharing the capability, excluding the failed one:
/// evaluation score descending, then resource cost ascending, then name.
pub fn reselect_tool<'a>(
    failed_tool: &str,
    tools: &'a [ToolSpec],
    required_capability: &str,
) -> std::result::Result<&'a ToolSpec, NoAlternativeTool> {
    let mut candidates: Vec<&ToolSpec> = tools
        .iter()
        .filter(|t| t.name != failed_tool && t.capabilities.contains(required_capability))
        .collect();
    if candidates.is_empty() {
        return Err(NoAlternativeTool);
    }
    candidates.sort_by(|a, b| {
        b.eval_score
            .partial_cmp(&a.eval_score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(
                a.resource_cost
                    .partial_cmp(&b.resource_cost)
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
            .then(a.name.cmp(&b.name))
    });
    Ok(candidates[0])
}

/// Re-plan around failures: exclude the listed subtasks, mark every
/// descendant whose dependency paths all run through dead nodes as cascaded,
/// and return the remaining ready nodes ordered by (priority, id). Succeeded
/// nodes are never re-executed. Unreachable terminals make the plan
/// infeasible.
pub fn replan(
    task: &mut TaskSpec,
    failed_subtask_ids: &[String],
) -> std::result::Result<Vec<String>, PlanInfeasible> {
    for id in failed_subtask_ids {
        if let Some(node) = task.subtask_mut(id) {
            if node.status != SubtaskStatus::Succeeded {
                node.status = SubtaskStatus::Excluded;
            }
        }
    }

    // Recompute deadness from scratch. A node is dead when it is excluded or
    // when it has dependencies and every one of them is dead; a single
    // surviving dependency path keeps it alive, and dead dependencies are
    // waived at readiness. Starting from scratch resurrects nodes that were
    // cascaded by an earlier run but regain a path once the failure is
    // excluded.
    let mut dead: std::collections::BTreeSet<String> = task
        .subtasks
        .iter()
        .filter(|s| s.status == SubtaskStatus::Excluded)
        .map(|s| s.id.clone())
        .collect();
    loop {
        let newly: Vec<String> = task
            .subtasks
            .iter()
            .filter(|s| !dead.contains(&s.id))
            .filter(|s| !s.deps.is_empty() && s.deps.iter().all(|d| dead.contains(d)))
            .map(|s| s.id.clone())
            .collect();
        if newly.is_empty() {
            break;
        }
        dead.extend(newly);
    }

    for node in &mut task.subtasks {
        node.status = if node.status == SubtaskStatus::Excluded {
            SubtaskStatus::Excluded
        } else if dead.contains(&node.id) {
            SubtaskStatus::Cascaded
        } else {
            match node.status {
                SubtaskStatus::Succeeded => SubtaskStatus::Succeeded,
                // not excluded by the caller: left failed, blocking dependents
                SubtaskStatus::Failed => SubtaskStatus::Failed,
                _ => SubtaskStatus::Pending,
            }
        };
    }

    if task.sinks().iter().all(|s| s.status.is_dead()) {
        return Err(PlanInfeasible);
    }

    Ok(crate::model::topo_ready(task))
}

/// Structured text bridge for infrastructure exceptions. The category table
/// is closed; unknown kinds map to an unclassified bucket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredExceptionNote {
    pub category: String,
    pub tool: String,
    pub raw_message: String,
    pub remedies: Vec<Remedy>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Remedy {
    AlternativeTool,
    LongerRetryInterval,
}

/// Convert a low-level tool exception into structured text the agent loop can
/// reason about, plus the next retry interval.
///
/// The interval after the k-th failed attempt is `base_ms · factor^(k−1)`;
/// once `cap_attempts` attempts are spent the call escalates instead of
/// retrying (`None`).
pub fn exception_to_context(
    kind: &ToolErrorKind,
    tool: &str,
    raw_message: &str,
    attempt: u32,
    backoff: &Backoff,
) -> (StructuredExceptionNote, Option<u64>) {
    let (category, remedies) = match kind {
        ToolErrorKind::Timeout => (
            "API response delay",
            vec![Remedy::AlternativeTool, Remedy::LongerRetryInterval],
        ),
        ToolErrorKind::Unavailable => ("tool unavailable", vec![Remedy::AlternativeTool]),
        ToolErrorKind::Refusal => (
            "tool declined request",
            vec![Remedy::AlternativeTool, Remedy::LongerRetryInterval],
        ),
        ToolErrorKind::Malformed => (
            "tool returned invalid data",
            vec![Remedy::AlternativeTool, Remedy::LongerRetryInterval],
        ),
        ToolErrorKind::Other(_) => (
            "tool error (unclassified)",
            vec![Remedy::AlternativeTool, Remedy::LongerRetryInterval],
        ),
    };
    let note = StructuredExceptionNote {
        category: category.to_string(),
        tool: tool.to_string(),
        raw_message: raw_message.to_string(),
        remedies,
    };
    let interval = if attempt >= backoff.cap_attempts {
        None
    } else {
        let exp = backoff.factor.powi(attempt.saturating_sub(1) as i32);
        Some((backoff.base_ms as f64 * exp).round() as u64)
    };
    (note, interval)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SubtaskNode, TaskType};

    fn mk_action(strategy: HealingStrategy, attempt: u32) -> HealingAction {
        HealingAction {
            strategy,
            params: HealingParams::Replan { exclude: vec![] },
            attempt,
        }
    }

    #[test]
    fn strategy_table_defaults() {
        let policy = HealingPolicy::default();
        let a = select_strategy(FailureType::Hallucination, &[], &policy).unwrap();
        assert_eq!(a.strategy, HealingStrategy::PromptCorrection);
        assert_eq!(a.attempt, 1);

        let a = select_strategy(FailureType::Execution, &[], &policy).unwrap();
        assert_eq!(a.strategy, HealingStrategy::ToolReselection);
        assert_eq!(a.attempt, 1);

        let a = select_strategy(FailureType::ReasoningInconsistency, &[], &policy).unwrap();
        assert_eq!(a.strategy, HealingStrategy::Replan);

        let a = select_strategy(FailureType::WorkflowPropagation, &[], &policy).unwrap();
        assert_eq!(a.strategy, HealingStrategy::Replan);
    }

    #[test]
    fn failed_strategy_escalates_to_replan() {
        let policy = HealingPolicy::default();
        let history = vec![mk_action(HealingStrategy::ToolReselection, 1)];
        let a = select_strategy(FailureType::Execution, &history, &policy).unwrap();
        assert_eq!(a.strategy, HealingStrategy::Replan);
        assert_eq!(a.attempt, 2);
    }

    #[test]
    fn replan_is_terminal_and_repeatable() {
        let policy = HealingPolicy::default();
        let history = vec![
            mk_action(HealingStrategy::ToolReselection, 1),
            mk_action(HealingStrategy::Replan, 2),
        ];
        let a = select_strategy(FailureType::Execution, &history, &policy).unwrap();
        assert_eq!(a.strategy, HealingStrategy::Replan);
    }

    #[test]
    fn attempts_are_bounded() {
        let policy = HealingPolicy::default();
        let history = vec![
            mk_action(HealingStrategy::Replan, 1),
            mk_action(HealingStrategy::Replan, 2),
            mk_action(HealingStrategy::Replan, 3),
        ];
        assert_eq!(
            select_strategy(FailureType::Execution, &history, &policy),
            Err(HealingExhausted)
        );
    }

    fn tool(name: &str, cap: &str, eval: f64, cost: f64) -> ToolSpec {
        ToolSpec {
            name: name.into(),
            capabilities: [cap.to_string()].into_iter().collect(),
            resource_cost: cost,
            behavior: "{capability} data {args}".into(),
            fault_profile: Default::default(),
            eval_score: eval,
        }
    }

    #[test]
    fn reselect_prefers_eval_score() {
        let tools = vec![
            tool("bad", "search", 0.7, 1.0),
            tool("good", "search", 0.9, 5.0),
            tool("down", "search", 0.99, 0.1),
        ];
        let pick = reselect_tool("down", &tools, "search").unwrap();
        assert_eq!(pick.name, "good");
    }

    #[test]
    fn reselect_breaks_ties_by_cost() {
        let tools = vec![
            tool("pricey", "search", 0.8, 2.0),
            tool("cheap", "search", 0.8, 1.0),
            tool("down", "search", 0.9, 0.5),
        ];
        let pick = reselect_tool("down", &tools, "search").unwrap();
        assert_eq!(pick.name, "cheap");
    }

    #[test]
    fn reselect_with_no_candidates_signals() {
        let tools = vec![tool("down", "search", 0.9, 1.0)];
        assert_eq!(reselect_tool("down", &tools, "search"), Err(NoAlternativeTool));
        assert_eq!(reselect_tool("down", &tools, "other"), Err(NoAlternativeTool));
    }

    fn node(id: &str, priority: u32, deps: &[&str], status: SubtaskStatus) -> SubtaskNode {
        SubtaskNode {
            id: id.into(),
            description: format!("subtask {id}"),
            priority,
            deps: deps.iter().map(|s| s.to_string()).collect(),
            required_capability: String::new(),
            status,
        }
    }

    fn task(subtasks: Vec<SubtaskNode>) -> TaskSpec {
        TaskSpec {
            id: "t".into(),
            task_type: TaskType::MultiStepReasoning,
            objective: "obj".into(),
            subtasks,
            validation_refs: vec![],
            expected_output: "x".into(),
        }
    }

    #[test]
    fn replan_excludes_and_orders() {
        let mut t = task(vec![
            node("A", 2, &[], SubtaskStatus::Failed),
            node("B", 1, &[], SubtaskStatus::Pending),
            node("C", 3, &[], SubtaskStatus::Pending),
        ]);
        let plan = replan(&mut t, &["A".to_string()]).unwrap();
        assert_eq!(plan, vec!["B", "C"]);
        assert_eq!(t.subtask("A").unwrap().status, SubtaskStatus::Excluded);
    }

    #[test]
    fn replan_chain_is_infeasible() {
        let mut t = task(vec![
            node("A", 1, &[], SubtaskStatus::Failed),
            node("B", 2, &["A"], SubtaskStatus::Pending),
            node("C", 3, &["B"], SubtaskStatus::Pending),
        ]);
        assert_eq!(replan(&mut t, &["A".to_string()]), Err(PlanInfeasible));
    }

    #[test]
    fn replan_diamond_routes_around_failure() {
        let mut t = task(vec![
            node("A", 1, &[], SubtaskStatus::Succeeded),
            node("B", 2, &["A"], SubtaskStatus::Failed),
            node("C", 3, &["A"], SubtaskStatus::Succeeded),
            node("D", 4, &["B", "C"], SubtaskStatus::Cascaded),
        ]);
        let plan = replan(&mut t, &["B".to_string()]).unwrap();
        assert_eq!(plan, vec!["D"]);
        assert_eq!(t.subtask("B").unwrap().status, SubtaskStatus::Excluded);
        assert_eq!(t.subtask("D").unwrap().status, SubtaskStatus::Pending);
    }

    #[test]
    fn replan_never_touches_succeeded() {
        let mut t = task(vec![
            node("A", 1, &[], SubtaskStatus::Succeeded),
            node("B", 2, &["A"], SubtaskStatus::Failed),
            node("C", 3, &["A"], SubtaskStatus::Pending),
        ]);
        let _ = replan(&mut t, &["B".to_string()]).unwrap();
        assert_eq!(t.subtask("A").unwrap().status, SubtaskStatus::Succeeded);
    }

    #[test]
    fn replan_partitions_statuses() {
        let mut t = task(vec![
            node("A", 1, &[], SubtaskStatus::Succeeded),
            node("B", 2, &["A"], SubtaskStatus::Failed),
            node("C", 3, &["A"], SubtaskStatus::Pending),
            node("D", 4, &["B", "C"], SubtaskStatus::Pending),
            node("E", 5, &["B"], SubtaskStatus::Pending),
        ]);
        let plan = replan(&mut t, &["B".to_string()]).unwrap();
        // every subtask is exactly one of: succeeded, dead, or plan-reachable pending
        for s in &t.subtasks {
            let in_plan_universe = s.status == SubtaskStatus::Pending;
            let dead = s.status.is_dead();
            let done = s.status == SubtaskStatus::Succeeded;
            assert_eq!(
                1,
                [in_plan_universe, dead, done].iter().filter(|b| **b).count(),
                "{s:?}"
            );
        }
        assert_eq!(plan, vec!["C"]);
        // E depended only on B → cascaded
        assert_eq!(t.subtask("E").unwrap().status, SubtaskStatus::Cascaded);
    }

    #[test]
    fn prompt_correction_cites_facts() {
        let kb = ValidationKB::from_entries(vec![
            ("k1".into(), "the relay measures 42 units".into()),
            ("k2".into(), "route 9 requires clearance 3".into()),
        ]);
        let mut t = task(vec![]);
        t.validation_refs = vec!["k1".into(), "k2".into()];
        let prompt = PromptState::new("find the relay measurement");
        let flagged = vec![ClaimMatch {
            claim: "the relay measures 7 units".into(),
            matched: false,
            best_entry: Some("k1".into()),
            best_jaccard: 0.5,
        }];
        let next = correct_prompt(&prompt, &flagged, &kb, &t);
        assert_eq!(next.correction_blocks.len(), 1);
        let block = &next.correction_blocks[0];
        assert_eq!(block.restated_objective, "find the relay measurement");
        assert_eq!(block.flagged.len(), 1);
        assert_eq!(block.flagged[0].facts[0], "the relay measures 42 units");
        assert!(!block.instruction.is_empty());

        // determinism
        let again = correct_prompt(&prompt, &flagged, &kb, &t);
        assert_eq!(next, again);

        // applying twice appends exactly two blocks
        let twice = correct_prompt(&next, &flagged, &kb, &t);
        assert_eq!(twice.correction_blocks.len(), 2);
    }

    #[test]
    fn prompt_correction_without_claims_keeps_shell() {
        let kb = ValidationKB::from_entries(vec![]);
        let t = task(vec![]);
        let prompt = PromptState::new("obj");
        let next = correct_prompt(&prompt, &[], &kb, &t);
        let block = &next.correction_blocks[0];
        assert!(block.flagged.is_empty());
        assert_eq!(block.restated_objective, "obj");
        assert!(!block.instruction.is_empty());
    }

    #[test]
    fn exception_bridge_categories_and_intervals() {
        let backoff = Backoff::default();
        let (note, interval) =
            exception_to_context(&ToolErrorKind::Timeout, "search", "deadline exceeded", 1, &backoff);
        assert_eq!(note.category, "API response delay");
        assert_eq!(interval, Some(100));

        let (_, interval) =
            exception_to_context(&ToolErrorKind::Timeout, "search", "deadline exceeded", 3, &backoff);
        assert_eq!(interval, Some(400));

        let (_, interval) =
            exception_to_context(&ToolErrorKind::Timeout, "search", "deadline exceeded", 6, &backoff);
        assert_eq!(interval, None);

        let (note, _) = exception_to_context(&ToolErrorKind::Unavailable, "x", "gone", 1, &backoff);
        assert_eq!(note.category, "tool unavailable");
        let (note, _) = exception_to_context(&ToolErrorKind::Refusal, "x", "no", 1, &backoff);
        assert_eq!(note.category, "tool declined request");
        let (note, _) = exception_to_context(&ToolErrorKind::Malformed, "x", "??", 1, &backoff);
        assert_eq!(note.category, "tool returned invalid data");
        let (note, _) =
            exception_to_context(&ToolErrorKind::Other("weird".into()), "x", "?", 1, &backoff);
        assert_eq!(note.category, "tool error (unclassified)");
    }
}
