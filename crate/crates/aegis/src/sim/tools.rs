//! Tool sandbox: a fixed catalog of simulated tools, capability bindings, and
//! the scripted invocation path with its latency model.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{ActionStatus, FaultProfile, ToolErrorKind, ToolSpec};

#[derive(Debug, Clone)]
pub struct ToolRegistry {
    tools: Vec<ToolSpec>,
}

/// Result of one simulated tool invocation.
#[derive(Debug, Clone)]
pub struct ToolOutcome {
    pub status: ActionStatus,
    pub output: String,
    pub latency_ms: u64,
}

fn tool(name: &str, cap: &str, eval: f64, cost: f64, profile: FaultProfile) -> ToolSpec {
    ToolSpec {
        name: name.to_string(),
        capabilities: [cap.to_string()].into_iter().collect(),
        resource_cost: cost,
        behavior: "{capability} data {args}".to_string(),
        fault_profile: profile,
        eval_score: eval,
    }
}

impl ToolRegistry {
    /// The built-in catalog. Every capability has at least two tools so tool
    /// re-selection always has a candidate.
    pub fn catalog() -> Self {
        let timeout_heavy = FaultProfile { timeout: 0.6, refusal: 0.2, malformed: 0.2 };
        let malformed_heavy = FaultProfile { timeout: 0.2, refusal: 0.2, malformed: 0.6 };
        let balanced = FaultProfile::default();
        ToolRegistry {
            tools: vec![
                tool("search_alpha", "search", 0.90, 1.0, balanced.clone()),
                tool("search_beta", "search", 0.80, 2.0, balanced.clone()),
                tool("http_north", "http", 0.85, 1.0, timeout_heavy.clone()),
                tool("http_south", "http", 0.80, 1.5, timeout_heavy.clone()),
                tool("http_cache", "http", 0.70, 0.5, timeout_heavy),
                tool("parse_strict", "parse", 0.90, 2.0, malformed_heavy.clone()),
                tool("parse_lenient", "parse", 0.75, 1.0, malformed_heavy.clone()),
                tool("extract_ml", "extract", 0.85, 3.0, balanced.clone()),
                tool("extract_regex", "extract", 0.80, 1.0, balanced.clone()),
                tool("transform_map", "transform", 0.90, 1.0, balanced.clone()),
                tool("transform_stream", "transform", 0.80, 0.8, balanced.clone()),
                tool("summarize_brief", "summarize", 0.85, 1.0, malformed_heavy),
                tool("summarize_deep", "summarize", 0.80, 2.5, balanced),
            ],
        }
    }

    pub fn tools(&self) -> &[ToolSpec] {
        &self.tools
    }

    pub fn get(&self, name: &str) -> Option<&ToolSpec> {
        self.tools.iter().find(|t| t.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut ToolSpec> {
        self.tools.iter_mut().find(|t| t.name == name)
    }

    pub fn capabilities(&self) -> BTreeSet<&str> {
        self.tools
            .iter()
            .flat_map(|t| t.capabilities.iter().map(String::as_str))
            .collect()
    }

    pub fn with_capability(&self, cap: &str) -> Vec<&ToolSpec> {
        self.tools
            .iter()
            .filter(|t| t.capabilities.contains(cap))
            .collect()
    }

    /// Default binding for a capability: the same ranking tool re-selection
    /// uses (evaluation score desc, resource cost asc, name).
    pub fn default_binding(&self, cap: &str) -> Option<&ToolSpec> {
        let mut candidates = self.with_capability(cap);
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
        candidates.into_iter().next()
    }

    /// Invoke a tool by name. `force_error` is the injected outage for this
    /// call, if any. Unknown names are a registry error; upstream that is an
    /// execution-failure signal.
    pub fn invoke(
        &self,
        name: &str,
        capability: &str,
        args: &str,
        rng: &mut ChaCha8Rng,
        force_error: Option<&ToolErrorKind>,
    ) -> Result<ToolOutcome> {
        let tool = self
            .get(name)
            .ok_or_else(|| Error::UnknownTool(name.to_string()))?;
        let base = (40.0 * tool.resource_cost) as u64;
        let jitter: u64 = rng.gen_range(0..10);
        match force_error {
            Some(kind) => {
                // a timed-out call burns the longest
                let latency = if *kind == ToolErrorKind::Timeout {
                    (base + jitter) * 3
                } else {
                    base + jitter
                };
                Ok(ToolOutcome {
                    status: ActionStatus::ToolError(kind.clone()),
                    output: format!("{} error from {name}", kind.label()),
                    latency_ms: latency,
                })
            }
            None => Ok(ToolOutcome {
                status: ActionStatus::Ok,
                output: tool
                    .behavior
                    .replace("{capability}", capability)
                    .replace("{args}", args),
                latency_ms: base + jitter,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_for;

    #[test]
    fn catalog_has_two_tools_per_capability() {
        let reg = ToolRegistry::catalog();
        for cap in reg.capabilities() {
            assert!(
                reg.with_capability(cap).len() >= 2,
                "capability {cap} needs an alternative tool"
            );
        }
    }

    #[test]
    fn default_bindings_follow_rank_rule() {
        let reg = ToolRegistry::catalog();
        assert_eq!(reg.default_binding("search").unwrap().name, "search_alpha");
        assert_eq!(reg.default_binding("http").unwrap().name, "http_north");
        assert_eq!(reg.default_binding("extract").unwrap().name, "extract_ml");
    }

    #[test]
    fn scripted_invocation_is_deterministic_per_args() {
        let reg = ToolRegistry::catalog();
        let mut rng = stream_for(1, &["t"]);
        let a = reg.invoke("search_alpha", "search", "query x", &mut rng, None).unwrap();
        let mut rng = stream_for(1, &["t"]);
        let b = reg.invoke("search_alpha", "search", "query x", &mut rng, None).unwrap();
        assert_eq!(a.output, b.output);
        assert_eq!(a.latency_ms, b.latency_ms);
        assert!(a.status.is_ok());
        assert_eq!(a.output, "search data query x");
    }

    #[test]
    fn same_capability_tools_return_equivalent_output() {
        let reg = ToolRegistry::catalog();
        let mut rng = stream_for(1, &["t"]);
        let a = reg.invoke("search_alpha", "search", "q", &mut rng, None).unwrap();
        let b = reg.invoke("search_beta", "search", "q", &mut rng, None).unwrap();
        assert_eq!(a.output, b.output);
    }

    #[test]
    fn injected_error_is_returned() {
        let reg = ToolRegistry::catalog();
        let mut rng = stream_for(1, &["t"]);
        let out = reg
            .invoke("search_alpha", "search", "q", &mut rng, Some(&ToolErrorKind::Timeout))
            .unwrap();
        assert_eq!(out.status, ActionStatus::ToolError(ToolErrorKind::Timeout));
    }

    #[test]
    fn unknown_tool_is_a_registry_error() {
        let reg = ToolRegistry::catalog();
        let mut rng = stream_for(1, &["t"]);
        assert!(matches!(
            reg.invoke("no_such_tool", "x", "q", &mut rng, None),
            Err(Error::UnknownTool(_))
        ));
    }
}
