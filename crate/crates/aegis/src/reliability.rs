//! Runtime reliability model.
//!
//! R = w1·C + w2·S + w3·E, where C is output consistency across K independent
//! executions (one minus the mean pairwise normalized step distance), S is the
//! fraction of output claims matching a validation knowledge base, and E is
//! the fraction of tool calls that succeeded. Weights are chosen per task
//! domain; `grid_search_weights` enumerates the simplex to pick them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, ActionKind, ReliabilityWeights, TaskSpec, Trajectory};
use crate::sim::ValidationKB;

/// Step distance used inside the consistency score.
///
/// `JensenShannon` applies to probability-distribution-valued step outputs; on
/// token sequences we compare the steps' token-frequency distributions over
/// their joint vocabulary. `WeightedLevenshtein` is the default for token
/// sequences. Both land in [0, 1], so they are interchangeable inside C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    #[default]
    WeightedLevenshtein,
    JensenShannon,
}

/// Edit-operation weights. Defaults to unit weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpWeights {
    pub insert: f64,
    pub delete: f64,
    pub substitute: f64,
}

impl Default for OpWeights {
    fn default() -> Self {
        OpWeights { insert: 1.0, delete: 1.0, substitute: 1.0 }
    }
}

impl OpWeights {
    pub fn max(&self) -> f64 {
        self.insert.max(self.delete).max(self.substitute)
    }

    pub fn validate(&self) -> Result<()> {
        if self.insert <= 0.0 || self.delete <= 0.0 || self.substitute <= 0.0 {
            return Err(Error::Contract("op weights must be positive".into()));
        }
        Ok(())
    }
}

/// Canonical normalization: lowercase, strip punctuation, split on whitespace.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|w| {
            let t: String = w
                .chars()
                .filter(|c| !c.is_ascii_punctuation())
                .flat_map(|c| c.to_lowercase())
                .collect();
            if t.is_empty() {
                None
            } else {
                Some(t)
            }
        })
        .collect()
}

/// Canonical token sequence for an action:
/// `[kind, tool?, normalized args tokens, normalized output tokens]`.
pub fn action_tokens(a: &Action) -> Vec<String> {
    let mut tokens = vec![a.kind.label().to_string()];
    if let Some(tool) = &a.tool {
        tokens.push(tool.to_lowercase());
    }
    tokens.extend(normalize_tokens(&a.args));
    tokens.extend(normalize_tokens(&a.output));
    tokens
}

/// Weighted Levenshtein distance (raw, not normalized).
pub fn weighted_edit_distance<T: PartialEq>(x: &[T], y: &[T], w: &OpWeights) -> f64 {
    let (n, m) = (x.len(), y.len());
    let mut prev: Vec<f64> = (0..=m).map(|j| j as f64 * w.insert).collect();
    let mut curr = vec![0.0f64; m + 1];
    for i in 1..=n {
        curr[0] = i as f64 * w.delete;
        for j in 1..=m {
            let sub = prev[j - 1] + if x[i - 1] == y[j - 1] { 0.0 } else { w.substitute };
            let del = prev[j] + w.delete;
            let ins = curr[j - 1] + w.insert;
            curr[j] = sub.min(del).min(ins);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[m]
}

/// Normalized edit distance: the weighted distance divided by
/// `max(|x|, |y|) · max op weight`. Zero iff the sequences are equal;
/// both empty yields 0. Symmetric when insert weight equals delete weight.
pub fn norm_edit_distance<T: PartialEq>(x: &[T], y: &[T], w: &OpWeights) -> f64 {
    let denom = x.len().max(y.len()) as f64 * w.max();
    if denom == 0.0 {
        return 0.0;
    }
    weighted_edit_distance(x, y, w) / denom
}

/// Jensen–Shannon divergence with base-2 logarithm, so the range is [0, 1].
/// Inputs must be same-length distributions (nonnegative, summing to 1 within
/// 1e-9).
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Contract(format!(
            "jsd: length mismatch ({} vs {})",
            p.len(),
            q.len()
        )));
    }
    for (label, v) in [("p", p), ("q", q)] {
        if v.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::Contract(format!("jsd: {label} has invalid entries")));
        }
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Contract(format!("jsd: {label} sums to {sum}, not 1")));
        }
    }
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q.iter()) {
        let mi = 0.5 * (pi + qi);
        if pi > 0.0 {
            total += 0.5 * pi * (pi / mi).log2();
        }
        if qi > 0.0 {
            total += 0.5 * qi * (qi / mi).log2();
        }
    }
    // exact-zero for identical inputs, and never negative from roundoff
    Ok(total.max(0.0))
}

fn token_distribution_pair(a: &[String], b: &[String]) -> (Vec<f64>, Vec<f64>) {
    let vocab: BTreeSet<&String> = a.iter().chain(b.iter()).collect();
    let count = |tokens: &[String]| -> Vec<f64> {
        let n = tokens.len().max(1) as f64;
        vocab
            .iter()
            .map(|v| tokens.iter().filter(|t| t == v).count() as f64 / n)
            .collect()
    };
    (count(a), count(b))
}

/// Distance between two aligned steps; `None` is the padding sentinel for
/// runs shorter than the bundle's maximum length. Sentinel-to-real distance
/// is 1, sentinel-to-sentinel is 0.
fn step_distance(a: Option<&Action>, b: Option<&Action>, kind: DistanceKind, w: &OpWeights) -> Result<f64> {
    match (a, b) {
        (None, None) => Ok(0.0),
        (None, Some(_)) | (Some(_), None) => Ok(1.0),
        (Some(a), Some(b)) => {
            let ta = action_tokens(a);
            let tb = action_tokens(b);
            match kind {
                DistanceKind::WeightedLevenshtein => Ok(norm_edit_distance(&ta, &tb, w)),
                DistanceKind::JensenShannon => {
                    if ta.is_empty() && tb.is_empty() {
                        return Ok(0.0);
                    }
                    let (p, q) = token_distribution_pair(&ta, &tb);
                    jsd(&p, &q)
                }
            }
        }
    }
}

/// Output consistency across a bundle of K trajectories:
///
/// C = 1 − (2 / (T·K·(K−1))) · Σ_t Σ_{i<j} d_norm(a_t^(i), a_t^(j))
///
/// Trajectories are aligned to T = the maximum run length; shorter runs are
/// padded with a sentinel at distance 1 from any real step. The result is in
/// [0, 1] because every pairwise distance is.
pub fn consistency(bundle: &[Trajectory], kind: DistanceKind) -> Result<f64> {
    let k = bundle.len();
    if k < 2 {
        return Err(Error::Contract(format!(
            "consistency requires K >= 2 trajectories (got {k})"
        )));
    }
    let t_max = bundle.iter().map(|t| t.actions.len()).max().unwrap_or(0);
    if t_max == 0 {
        return Ok(1.0);
    }
    let w = OpWeights::default();
    let mut sum = 0.0;
    for t in 0..t_max {
        for i in 0..k {
            for j in (i + 1)..k {
                let a = bundle[i].actions.get(t);
                let b = bundle[j].actions.get(t);
                sum += step_distance(a, b, kind, &w)?;
            }
        }
    }
    let c = 1.0 - (2.0 / (t_max as f64 * k as f64 * (k - 1) as f64)) * sum;
    debug_assert!((-1e-12..=1.0 + 1e-12).contains(&c), "consistency out of range: {c}");
    Ok(c)
}

/// Sentence-level claims: segments split on terminal punctuation.
pub fn split_claims(text: &str) -> Vec<String> {
    text.split(['.', '!', '?'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Jaccard overlap of normalized token sets.
pub fn token_jaccard(a: &str, b: &str) -> f64 {
    let sa: BTreeSet<String> = normalize_tokens(a).into_iter().collect();
    let sb: BTreeSet<String> = normalize_tokens(b).into_iter().collect();
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    let inter = sa.intersection(&sb).count() as f64;
    let union = sa.union(&sb).count() as f64;
    if union == 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// The match rule shared by claim scoring and the task success judgment:
/// normalized token-overlap Jaccard at or above the threshold.
pub fn output_matches(a: &str, b: &str, threshold: f64) -> bool {
    let ta = normalize_tokens(a);
    let tb = normalize_tokens(b);
    if ta.is_empty() || tb.is_empty() {
        return false;
    }
    token_jaccard(a, b) >= threshold
}

/// Per-claim match result against the task's referenced knowledge-base
/// entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimMatch {
    pub claim: String,
    pub matched: bool,
    pub best_entry: Option<String>,
    pub best_jaccard: f64,
}

/// Match every claim of `final_output` against the entries named by
/// `task.validation_refs`.
pub fn match_claims(
    final_output: &str,
    kb: &ValidationKB,
    task: &TaskSpec,
    threshold: f64,
) -> Vec<ClaimMatch> {
    let facts: Vec<(&str, &str)> = task
        .validation_refs
        .iter()
        .filter_map(|id| kb.lookup(id).map(|text| (id.as_str(), text)))
        .collect();
    split_claims(final_output)
        .into_iter()
        .map(|claim| {
            let mut best_entry = None;
            let mut best = 0.0f64;
            for (id, fact) in &facts {
                let j = token_jaccard(&claim, fact);
                if j > best {
                    best = j;
                    best_entry = Some(id.to_string());
                }
            }
            ClaimMatch {
                matched: best >= threshold && best_entry.is_some(),
                claim,
                best_entry,
                best_jaccard: best,
            }
        })
        .collect()
}

/// Semantic accuracy: matched claims over total claims. An empty output (or
/// one with no extractable claims) scores 0.
pub fn semantic_score(final_output: &str, kb: &ValidationKB, task: &TaskSpec, threshold: f64) -> f64 {
    let matches = match_claims(final_output, kb, task, threshold);
    if matches.is_empty() {
        return 0.0;
    }
    matches.iter().filter(|m| m.matched).count() as f64 / matches.len() as f64
}

/// Execution success rate of one trajectory: successful tool calls over tool
/// call attempts. With zero attempts the score is vacuously 1.
pub fn execution_rate(traj: &Trajectory) -> f64 {
    let calls: Vec<&Action> = traj
        .actions
        .iter()
        .filter(|a| a.kind == ActionKind::ToolCall)
        .collect();
    if calls.is_empty() {
        return 1.0;
    }
    calls.iter().filter(|a| a.status.is_ok()).count() as f64 / calls.len() as f64
}

/// Pooled execution rate over a bundle: total successful calls over total
/// attempts across all runs. `None` when no run attempted a tool call.
pub fn bundle_execution_rate(bundle: &[Trajectory]) -> Option<f64> {
    let mut ok = 0usize;
    let mut total = 0usize;
    for traj in bundle {
        for a in traj.actions.iter().filter(|a| a.kind == ActionKind::ToolCall) {
            total += 1;
            if a.status.is_ok() {
                ok += 1;
            }
        }
    }
    if total == 0 {
        None
    } else {
        Some(ok as f64 / total as f64)
    }
}

/// The weighted reliability score. Components must be in [0, 1] and the
/// weights valid; the result is in [0, 1] by convexity.
pub fn reliability(c: f64, s: f64, e: f64, w: &ReliabilityWeights) -> Result<f64> {
    w.validate()?;
    for (label, v) in [("C", c), ("S", s), ("E", e)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Contract(format!("{label} = {v} out of [0,1]")));
        }
    }
    Ok(w.w1 * c + w.w2 * s + w.w3 * e)
}

/// One labeled evaluation point for weight selection: scored components plus
/// the ground-truth injection label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledRun {
    pub c: f64,
    pub s: f64,
    pub e: f64,
    pub injected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GridObjective {
    /// F1-score of the R < theta trigger against the injection labels.
    #[default]
    DetectionF1,
}

/// All simplex points (w1, w2, w3) with each weight a nonnegative multiple of
/// `step` and the three summing to 1, in lexicographic order.
pub fn simplex_candidates(step: f64) -> Result<Vec<ReliabilityWeights>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Contract(format!("grid step {step} out of (0,1]")));
    }
    let n = (1.0 / step).round();
    if ((n * step) - 1.0).abs() > 1e-9 {
        return Err(Error::Contract(format!("grid step {step} does not divide 1 evenly")));
    }
    let n = n as u32;
    let mut out = Vec::new();
    for i in 0..=n {
        for j in 0..=(n - i) {
            let k = n - i - j;
            out.push(ReliabilityWeights {
                w1: i as f64 / n as f64,
                w2: j as f64 / n as f64,
                w3: k as f64 / n as f64,
            });
        }
    }
    Ok(out)
}

/// Detection F1 of the threshold trigger under the given weights.
fn detection_f1(runs: &[LabeledRun], w: &ReliabilityWeights, theta: f64) -> f64 {
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fne = 0u64;
    for r in runs {
        let score = w.w1 * r.c + w.w2 * r.s + w.w3 * r.e;
        let fired = score < theta;
        match (fired, r.injected) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fne += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fne;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Exhaustive grid search over the weight simplex, maximizing the objective.
/// Ties break toward the lexicographically smallest (w1, w2, w3), so the
/// result is reproducible.
pub fn grid_search_weights(
    runs: &[LabeledRun],
    theta: f64,
    step: f64,
    objective: GridObjective,
) -> Result<(ReliabilityWeights, f64)> {
    if runs.is_empty() {
        return Err(Error::Contract("grid search needs at least one labeled run".into()));
    }
    let eval = |w: &ReliabilityWeights| match objective {
        GridObjective::DetectionF1 => detection_f1(runs, w, theta),
    };
    grid_search_custom(step, eval)
}

/// Grid search with a caller-supplied objective (e.g., task success rate via
/// re-running the experiment per candidate).
pub fn grid_search_custom(
    step: f64,
    eval: impl Fn(&ReliabilityWeights) -> f64,
) -> Result<(ReliabilityWeights, f64)> {
    let candidates = simplex_candidates(step)?;
    let mut best = candidates[0];
    let mut best_value = eval(&best);
    for w in &candidates[1..] {
        let value = eval(w);
        if value > best_value {
            best = *w;
            best_value = value;
        }
    }
    Ok((best, best_value))
}
