//! Agent backends. The engine owns the plan walk; a backend decides, for the
//! subtask in front of it, what the agent does next. The scripted backend is
//! the deterministic simulated model — including how injected faults surface
//! in its behavior. Real-LLM adapters implement the same trait.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{PromptState, SubtaskNode, TaskSpec};

use super::inject::InjectionPlan;
use crate::model::FailureType;

/// Everything a backend may look at for one step: observable workflow state
/// only — injection ground truth is not here.
pub struct StepContext<'a> {
    pub task: &'a TaskSpec,
    pub subtask: &'a SubtaskNode,
    pub prompt: &'a PromptState,
    /// 0-based position within the trajectory.
    pub step_index: usize,
    /// Actions already emitted for the current subtask.
    pub actions_for_subtask: usize,
    /// Alive, not-yet-succeeded subtasks including the current one.
    pub remaining_alive: usize,
    pub run_index: usize,
    /// Execution attempt (0 = first; healing and retry policies increment).
    pub attempt: u32,
}

/// What the agent wants to do next.
#[derive(Debug, Clone, PartialEq)]
pub enum Directive {
    Reason {
        args: String,
        note: String,
        /// A non-completing reason keeps the same subtask in front of the
        /// agent (bounded by the engine's step budget).
        completes_subtask: bool,
    },
    /// Call whichever tool the runtime has bound for a capability.
    CallCapability { capability: String, args: String },
    /// Call a tool by name (remote backends speak tool names).
    CallNamed { tool: String, args: String },
    Respond { text: String },
    /// Declare the current subtask unachievable.
    Abandon { reason: String },
}

pub trait AgentBackend {
    /// Produce the next directive plus its confidence. Must be deterministic
    /// given the context and the rng stream.
    fn next_action(&self, ctx: &StepContext, rng: &mut ChaCha8Rng) -> Result<(Directive, f64)>;
}

/// How many identical reasoning steps an injected non-progressing loop emits.
/// Matches the default detection loop window.
pub const LOOP_EMISSION: usize = 4;

const HALLUCINATION_WORDS: [&str; 8] = [
    "zeppelin", "marmalade", "quasar", "trombone", "glacier", "origami", "louver", "nebula",
];

/// The deterministic scripted agent. Clean behavior walks the subtask plan
/// and answers with the task's canonical output; injected faults surface as:
///
/// - hallucination: the final answer contradicts the knowledge base and the
///   trailing three confidences degrade by 0.7 per step; a correction block
///   in the prompt suppresses it (that is the recovery path).
/// - inconsistency: the targeted run loops on one reasoning step, then gives
///   a divergent answer; only on the first attempt.
/// - propagation: the targeted subtask is abandoned whenever scheduled.
///
/// Execution faults live in the tool layer, not here.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    plan: InjectionPlan,
}

impl ScriptedBackend {
    pub fn new(plan: InjectionPlan) -> Self {
        ScriptedBackend { plan }
    }

    pub fn clean() -> Self {
        ScriptedBackend { plan: InjectionPlan::none() }
    }

    fn fault(&self) -> Option<FailureType> {
        self.plan.active_type()
    }

    fn hallucination_active(&self, ctx: &StepContext) -> bool {
        self.fault() == Some(FailureType::Hallucination) && ctx.prompt.correction_blocks.is_empty()
    }

    fn divergence_active(&self, ctx: &StepContext) -> bool {
        self.fault() == Some(FailureType::ReasoningInconsistency)
            && self.plan.target_run == Some(ctx.run_index)
            && (!self.plan.transient || ctx.attempt == 0)
    }

    fn confidence(&self, ctx: &StepContext, rng: &mut ChaCha8Rng) -> f64 {
        let base = 0.8 + 0.2 * rng.gen::<f64>();
        if self.hallucination_active(ctx) && ctx.remaining_alive <= 3 {
            // bands (0.8..1.0), (0.56..0.7), (0.392..0.49) never overlap, so
            // the trailing three are strictly decreasing whatever the draws
            let decay = 0.7f64.powi(3 - ctx.remaining_alive as i32);
            base * decay
        } else {
            base
        }
    }

    fn hallucination_text(&self, ctx: &StepContext, rng: &mut ChaCha8Rng) -> String {
        let w1 = HALLUCINATION_WORDS[rng.gen_range(0..HALLUCINATION_WORDS.len())];
        let w2 = HALLUCINATION_WORDS[rng.gen_range(0..HALLUCINATION_WORDS.len())];
        let n: u32 = rng.gen_range(100..999);
        format!(
            "the {w1} {w2} indicates {n} beyond margin {run}.",
            run = ctx.run_index
        )
    }

    fn divergent_text(&self, rng: &mut ChaCha8Rng) -> String {
        let w = HALLUCINATION_WORDS[rng.gen_range(0..HALLUCINATION_WORDS.len())];
        let n: u32 = rng.gen_range(100..999);
        format!("inconclusive findings regarding the {w} variant {n}.")
    }
}

impl AgentBackend for ScriptedBackend {
    fn next_action(&self, ctx: &StepContext, rng: &mut ChaCha8Rng) -> Result<(Directive, f64)> {
        let sub = ctx.subtask;
        let confidence = self.confidence(ctx, rng);

        // injected workflow-propagation failure: the subtask is unachievable
        if self.fault() == Some(FailureType::WorkflowPropagation)
            && self.plan.target_subtask.as_deref() == Some(sub.id.as_str())
        {
            return Ok((
                Directive::Abandon { reason: "required input unavailable".to_string() },
                confidence,
            ));
        }

        let dependents = ctx.task.dependents();
        let is_terminal = dependents
            .get(sub.id.as_str())
            .map_or(true, |d| d.is_empty());

        if is_terminal {
            if self.divergence_active(ctx) {
                if ctx.actions_for_subtask < LOOP_EMISSION {
                    return Ok((
                        Directive::Reason {
                            args: "reconsider objective".to_string(),
                            note: "re-evaluating the approach".to_string(),
                            completes_subtask: false,
                        },
                        confidence,
                    ));
                }
                return Ok((Directive::Respond { text: self.divergent_text(rng) }, confidence));
            }
            if self.hallucination_active(ctx) {
                return Ok((
                    Directive::Respond { text: self.hallucination_text(ctx, rng) },
                    confidence,
                ));
            }
            return Ok((
                Directive::Respond { text: ctx.task.expected_output.clone() },
                confidence,
            ));
        }

        if !sub.required_capability.is_empty() {
            return Ok((
                Directive::CallCapability {
                    capability: sub.required_capability.clone(),
                    args: format!("{} for {}", sub.description, ctx.task.id),
                },
                confidence,
            ));
        }

        Ok((
            Directive::Reason {
                args: format!("subtask {}", sub.id),
                note: format!("worked through {}", sub.description),
                completes_subtask: true,
            },
            confidence,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SubtaskStatus, TaskType};
    use crate::rng::stream_for;

    fn task() -> TaskSpec {
        let node = |id: &str, pri: u32, deps: &[&str], cap: &str| SubtaskNode {
            id: id.into(),
            description: format!("subtask {id}"),
            priority: pri,
            deps: deps.iter().map(|s| s.to_string()).collect(),
            required_capability: cap.into(),
            status: SubtaskStatus::Pending,
        };
        TaskSpec {
            id: "t0".into(),
            task_type: TaskType::MultiStepReasoning,
            objective: "answer the question".into(),
            subtasks: vec![
                node("s0", 1, &[], ""),
                node("s1", 2, &["s0"], "search"),
                node("s2", 3, &["s1"], ""),
                node("s3", 4, &["s2"], ""),
            ],
            validation_refs: vec![],
            expected_output: "the relay measures 42 units.".into(),
        }
    }

    fn ctx<'a>(
        task: &'a TaskSpec,
        sub: &'a SubtaskNode,
        prompt: &'a PromptState,
        remaining: usize,
    ) -> StepContext<'a> {
        StepContext {
            task,
            subtask: sub,
            prompt,
            step_index: 0,
            actions_for_subtask: 0,
            remaining_alive: remaining,
            run_index: 0,
            attempt: 0,
        }
    }

    #[test]
    fn clean_walk_emits_expected_shapes() {
        let t = task();
        let prompt = PromptState::new(&t.objective);
        let backend = ScriptedBackend::clean();
        let mut rng = stream_for(1, &["run"]);

        let (d, c) = backend
            .next_action(&ctx(&t, t.subtask("s0").unwrap(), &prompt, 4), &mut rng)
            .unwrap();
        assert!(matches!(d, Directive::Reason { completes_subtask: true, .. }));
        assert!((0.8..=1.0).contains(&c));

        let (d, _) = backend
            .next_action(&ctx(&t, t.subtask("s1").unwrap(), &prompt, 3), &mut rng)
            .unwrap();
        assert!(matches!(d, Directive::CallCapability { ref capability, .. } if capability == "search"));

        let (d, _) = backend
            .next_action(&ctx(&t, t.subtask("s3").unwrap(), &prompt, 1), &mut rng)
            .unwrap();
        assert!(matches!(d, Directive::Respond { ref text } if text == &t.expected_output));
    }

    #[test]
    fn hallucination_degrades_and_contradicts() {
        let t = task();
        let prompt = PromptState::new(&t.objective);
        let plan = InjectionPlan {
            inject: true,
            failure_type: Some(FailureType::Hallucination),
            recoverable: true,
            ..Default::default()
        };
        let backend = ScriptedBackend::new(plan);
        let mut rng = stream_for(1, &["run"]);

        let (_, c3) = backend
            .next_action(&ctx(&t, t.subtask("s1").unwrap(), &prompt, 3), &mut rng)
            .unwrap();
        let (_, c2) = backend
            .next_action(&ctx(&t, t.subtask("s2").unwrap(), &prompt, 2), &mut rng)
            .unwrap();
        let (d, c1) = backend
            .next_action(&ctx(&t, t.subtask("s3").unwrap(), &prompt, 1), &mut rng)
            .unwrap();
        assert!(c3 > c2 && c2 > c1, "confidences must strictly degrade: {c3} {c2} {c1}");
        match d {
            Directive::Respond { text } => {
                assert_ne!(text, t.expected_output);
                assert!(text.contains("beyond margin"));
            }
            other => panic!("expected respond, got {other:?}"),
        }
    }

    #[test]
    fn correction_block_suppresses_hallucination() {
        let t = task();
        let mut prompt = PromptState::new(&t.objective);
        prompt.correction_blocks.push(crate::model::CorrectionBlock {
            restated_objective: t.objective.clone(),
            flagged: vec![],
            instruction: "answer only from the provided facts".into(),
        });
        let plan = InjectionPlan {
            inject: true,
            failure_type: Some(FailureType::Hallucination),
            recoverable: true,
            ..Default::default()
        };
        let backend = ScriptedBackend::new(plan);
        let mut rng = stream_for(1, &["run"]);
        let (d, _) = backend
            .next_action(&ctx(&t, t.subtask("s3").unwrap(), &prompt, 1), &mut rng)
            .unwrap();
        assert!(matches!(d, Directive::Respond { ref text } if text == &t.expected_output));
    }

    #[test]
    fn divergent_run_loops_then_disagrees() {
        let t = task();
        let prompt = PromptState::new(&t.objective);
        let plan = InjectionPlan {
            inject: true,
            failure_type: Some(FailureType::ReasoningInconsistency),
            target_run: Some(1),
            recoverable: true,
            transient: true,
            ..Default::default()
        };
        let backend = ScriptedBackend::new(plan);
        let mut rng = stream_for(1, &["run"]);

        // targeted run
        for emitted in 0..LOOP_EMISSION {
            let mut c = ctx(&t, t.subtask("s3").unwrap(), &prompt, 1);
            c.run_index = 1;
            c.actions_for_subtask = emitted;
            let (d, _) = backend.next_action(&c, &mut rng).unwrap();
            assert!(
                matches!(d, Directive::Reason { completes_subtask: false, .. }),
                "loop emission {emitted}"
            );
        }
        let mut c = ctx(&t, t.subtask("s3").unwrap(), &prompt, 1);
        c.run_index = 1;
        c.actions_for_subtask = LOOP_EMISSION;
        let (d, _) = backend.next_action(&c, &mut rng).unwrap();
        assert!(matches!(d, Directive::Respond { ref text } if text != &t.expected_output));

        // other runs answer normally
        let mut c = ctx(&t, t.subtask("s3").unwrap(), &prompt, 1);
        c.run_index = 0;
        let (d, _) = backend.next_action(&c, &mut rng).unwrap();
        assert!(matches!(d, Directive::Respond { ref text } if text == &t.expected_output));

        // and the fault is transient: attempt 1 is clean even on the target
        let mut c = ctx(&t, t.subtask("s3").unwrap(), &prompt, 1);
        c.run_index = 1;
        c.attempt = 1;
        let (d, _) = backend.next_action(&c, &mut rng).unwrap();
        assert!(matches!(d, Directive::Respond { ref text } if text == &t.expected_output));
    }

    #[test]
    fn propagation_abandons_target_subtask() {
        let t = task();
        let prompt = PromptState::new(&t.objective);
        let plan = InjectionPlan {
            inject: true,
            failure_type: Some(FailureType::WorkflowPropagation),
            target_subtask: Some("s1".into()),
            recoverable: false,
            ..Default::default()
        };
        let backend = ScriptedBackend::new(plan);
        let mut rng = stream_for(1, &["run"]);
        let (d, _) = backend
            .next_action(&ctx(&t, t.subtask("s1").unwrap(), &prompt, 3), &mut rng)
            .unwrap();
        assert!(matches!(d, Directive::Abandon { .. }));
        // other subtasks act normally
        let (d, _) = backend
            .next_action(&ctx(&t, t.subtask("s0").unwrap(), &prompt, 4), &mut rng)
            .unwrap();
        assert!(matches!(d, Directive::Reason { .. }));
    }
}
