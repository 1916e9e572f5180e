//! Remote agent backend adapter.
//!
//! When `AGENT_BACKEND_URL` is set, the engine can drive a real agent over
//! HTTP instead of the scripted model: POST a JSON body
//! `{task_id, prompt, step_index}` and read back
//! `{kind, tool, args, output, confidence}`. Absence of the variable selects
//! the scripted backend. The default test path never touches the network.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::backend::{AgentBackend, Directive, StepContext};

pub const AGENT_BACKEND_URL_VAR: &str = "AGENT_BACKEND_URL";

#[derive(Debug, Serialize)]
struct RemoteRequest<'a> {
    task_id: &'a str,
    prompt: String,
    step_index: usize,
}

#[derive(Debug, Deserialize)]
struct RemoteReply {
    kind: String,
    #[serde(default)]
    tool: Option<String>,
    #[serde(default)]
    args: Option<String>,
    #[serde(default)]
    output: Option<String>,
    confidence: f64,
}

pub struct RemoteBackend {
    url: String,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(url: impl Into<String>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(60))
            .build()
            .map_err(|e| Error::Backend(e.to_string()))?;
        Ok(RemoteBackend { url: url.into(), client })
    }

    /// Build from the environment; errors name the missing variable.
    pub fn from_env() -> Result<Self> {
        let url = std::env::var(AGENT_BACKEND_URL_VAR).map_err(|_| {
            Error::Config(format!(
                "remote backend selected but {AGENT_BACKEND_URL_VAR} is not set"
            ))
        })?;
        RemoteBackend::new(url)
    }
}

impl AgentBackend for RemoteBackend {
    fn next_action(&self, ctx: &StepContext, _rng: &mut ChaCha8Rng) -> Result<(Directive, f64)> {
        let body = RemoteRequest {
            task_id: &ctx.task.id,
            prompt: ctx.prompt.render(),
            step_index: ctx.step_index,
        };
        let reply: RemoteReply = self
            .client
            .post(&self.url)
            .json(&body)
            .send()
            .map_err(|e| Error::Backend(e.to_string()))?
            .error_for_status()
            .map_err(|e| Error::Backend(e.to_string()))?
            .json()
            .map_err(|e| Error::Backend(e.to_string()))?;

        let confidence = reply.confidence.clamp(0.0, 1.0);
        let directive = match reply.kind.as_str() {
            "reason" => Directive::Reason {
                args: reply.args.unwrap_or_default(),
                note: reply.output.unwrap_or_default(),
                completes_subtask: true,
            },
            "tool_call" => Directive::CallNamed {
                tool: reply
                    .tool
                    .ok_or_else(|| Error::Backend("tool_call reply without tool name".into()))?,
                args: reply.args.unwrap_or_default(),
            },
            "respond" => Directive::Respond {
                text: reply.output.unwrap_or_default(),
            },
            other => return Err(Error::Backend(format!("unknown directive kind `{other}`"))),
        };
        Ok((directive, confidence))
    }
}
