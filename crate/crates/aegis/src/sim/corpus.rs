//! Synthetic task corpus generator. The paper's 300 test cases are not
//! published, so the corpus is generated from the master seed: per task type,
//! `cases_per_task_type` tasks with a small dependency DAG (half chains, half
//! diamonds), three knowledge-base facts each, and a canonical answer built
//! verbatim from those facts.

use rand::Rng;

use crate::model::{ExperimentConfig, SubtaskNode, SubtaskStatus, TaskSpec, TaskType};
use crate::rng::stream_for;

use super::kb::ValidationKB;

const SUBJECTS: [&str; 12] = [
    "relay", "turbine", "archive", "sensor", "gateway", "ledger", "beacon", "reactor", "depot",
    "antenna", "conduit", "registry",
];
const ADJECTIVES: [&str; 10] = [
    "primary", "auxiliary", "northern", "eastern", "central", "backup", "coastal", "inland",
    "upper", "lower",
];
const PLACES: [&str; 6] = ["sector", "district", "zone", "quadrant", "bay", "wing"];

fn node(id: &str, description: String, priority: u32, deps: &[&str], cap: &str) -> SubtaskNode {
    SubtaskNode {
        id: id.to_string(),
        description,
        priority,
        deps: deps.iter().map(|s| s.to_string()).collect(),
        required_capability: cap.to_string(),
        status: SubtaskStatus::Pending,
    }
}

/// Generate the corpus and its knowledge base for a configuration.
pub fn generate_corpus(cfg: &ExperimentConfig, master_seed: u64) -> (Vec<TaskSpec>, ValidationKB) {
    let mut tasks = Vec::new();
    let mut kb = ValidationKB::default();
    for task_type in TaskType::ALL {
        for case in 0..cfg.cases_per_task_type {
            let task = generate_task(task_type, case, master_seed, &mut kb);
            tasks.push(task);
        }
    }
    (tasks, kb)
}

fn generate_task(task_type: TaskType, case: u32, master_seed: u64, kb: &mut ValidationKB) -> TaskSpec {
    let mut rng = stream_for(
        master_seed,
        &["corpus", task_type.label(), &case.to_string()],
    );
    let id = format!("{}-{case:04}", task_type.id_prefix());

    let subj = SUBJECTS[rng.gen_range(0..SUBJECTS.len())];
    let adj = ADJECTIVES[rng.gen_range(0..ADJECTIVES.len())];
    let place = PLACES[rng.gen_range(0..PLACES.len())];
    let v0: u32 = rng.gen_range(100..999);
    let v1: u32 = rng.gen_range(10..99);
    let v2: u32 = rng.gen_range(2..9);

    let facts = [
        format!("the {adj} {subj} measures {v0} units"),
        format!("the {subj} {place} holds access code {v1}"),
        format!("route {v1} requires clearance level {v2}"),
    ];
    let mut validation_refs = Vec::new();
    for (i, fact) in facts.iter().enumerate() {
        let entry_id = format!("kb-{id}-{i}");
        kb.insert(entry_id.clone(), fact.clone());
        validation_refs.push(entry_id);
    }

    let diamond = rng.gen_bool(0.5);
    let (objective, expected_output, subtasks) = match task_type {
        TaskType::MultiStepReasoning => {
            let objective = format!("determine the {adj} {subj} measurement and its route clearance");
            let expected = format!("{}. {}.", facts[0], facts[2]);
            let subtasks = if diamond {
                vec![
                    node("s0", "review objective notes".into(), 1, &[], ""),
                    node("s1a", format!("gather {subj} figures"), 2, &["s0"], "search"),
                    node("s1b", format!("cross check {place} records"), 3, &["s0"], "search"),
                    node("s2", "reconcile findings".into(), 4, &["s1a", "s1b"], ""),
                    node("s3", "compose final answer".into(), 5, &["s2"], ""),
                ]
            } else {
                vec![
                    node("s0", "review objective notes".into(), 1, &[], ""),
                    node("s1", format!("gather {subj} figures"), 2, &["s0"], "search"),
                    node("s2", "reconcile findings".into(), 3, &["s1"], ""),
                    node("s3", "compose final answer".into(), 4, &["s2"], ""),
                ]
            };
            (objective, expected, subtasks)
        }
        TaskType::ApiOrchestration => {
            let objective = format!("orchestrate the {subj} endpoints and report the access state");
            let expected = format!("{}. {}.", facts[1], facts[0]);
            let subtasks = if diamond {
                vec![
                    node("s0", "plan api sequence".into(), 1, &[], ""),
                    node("s1", format!("call {subj} inventory endpoint"), 2, &["s0"], "http"),
                    node("s2", format!("call {place} status endpoint"), 3, &["s0"], "http"),
                    node("s3", "merge payloads".into(), 4, &["s1", "s2"], "transform"),
                    node("s4", "compose final answer".into(), 5, &["s3"], ""),
                ]
            } else {
                vec![
                    node("s0", "plan api sequence".into(), 1, &[], ""),
                    node("s1", format!("call {subj} inventory endpoint"), 2, &["s0"], "http"),
                    node("s2", format!("call {place} status endpoint"), 3, &["s1"], "http"),
                    node("s3", "merge payloads".into(), 4, &["s2"], "transform"),
                    node("s4", "compose final answer".into(), 5, &["s3"], ""),
                ]
            };
            (objective, expected, subtasks)
        }
        TaskType::DocumentProcessing => {
            let objective = format!("process the {subj} dossier and summarize clearance details");
            let expected = format!("{}. {}.", facts[2], facts[1]);
            let subtasks = if diamond {
                vec![
                    node("s0", format!("load {subj} document"), 1, &[], "parse"),
                    node("s1a", "extract key fields".into(), 2, &["s0"], "extract"),
                    node("s1b", "extract fallback fields".into(), 3, &["s0"], "extract"),
                    node("s2", "summarize findings".into(), 4, &["s1a", "s1b"], "summarize"),
                    node("s3", "compose final answer".into(), 5, &["s2"], ""),
                ]
            } else {
                vec![
                    node("s0", format!("load {subj} document"), 1, &[], "parse"),
                    node("s1", "extract key fields".into(), 2, &["s0"], "extract"),
                    node("s2", "summarize findings".into(), 3, &["s1"], "summarize"),
                    node("s3", "compose final answer".into(), 4, &["s2"], ""),
                ]
            };
            (objective, expected, subtasks)
        }
    };

    TaskSpec {
        id,
        task_type,
        objective,
        subtasks,
        validation_refs,
        expected_output,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_task;
    use crate::reliability::{semantic_score, split_claims};

    #[test]
    fn corpus_counts_and_validity() {
        let cfg = ExperimentConfig { cases_per_task_type: 10, ..Default::default() };
        let (tasks, kb) = generate_corpus(&cfg, 42);
        assert_eq!(tasks.len(), 30);
        assert_eq!(kb.len(), 90);
        for task in &tasks {
            assert!(validate_task(task).is_empty(), "{}: {:?}", task.id, validate_task(task));
            assert!(task.subtasks.len() >= 4);
            assert_eq!(task.sinks().len(), 1, "{} must have one terminal", task.id);
            assert!(task.subtasks.iter().any(|s| !s.required_capability.is_empty()));
        }
    }

    #[test]
    fn expected_outputs_fully_match_kb() {
        let cfg = ExperimentConfig { cases_per_task_type: 5, ..Default::default() };
        let (tasks, kb) = generate_corpus(&cfg, 42);
        for task in &tasks {
            let s = semantic_score(&task.expected_output, &kb, task, 0.6);
            assert_eq!(s, 1.0, "task {} expected output must score S=1", task.id);
            assert_eq!(split_claims(&task.expected_output).len(), 2);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = ExperimentConfig { cases_per_task_type: 5, ..Default::default() };
        let (a, kb_a) = generate_corpus(&cfg, 42);
        let (b, kb_b) = generate_corpus(&cfg, 42);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(kb_a, kb_b);
    }

    #[test]
    fn seeds_change_content() {
        let cfg = ExperimentConfig { cases_per_task_type: 5, ..Default::default() };
        let (a, _) = generate_corpus(&cfg, 1);
        let (b, _) = generate_corpus(&cfg, 2);
        assert_ne!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn corpus_contains_recoverable_propagation_targets() {
        let cfg = ExperimentConfig { cases_per_task_type: 20, ..Default::default() };
        let (tasks, _) = generate_corpus(&cfg, 42);
        let diamonds = tasks
            .iter()
            .filter(|t| {
                t.subtasks.iter().any(|s| {
                    crate::healing::replan(&mut (*t).clone(), &[s.id.clone()]).is_ok()
                        && !t.dependents().get(s.id.as_str()).map_or(true, |d| d.is_empty())
                })
            })
            .count();
        assert!(diamonds > 0, "some tasks must survive excluding a mid node");
    }
}
