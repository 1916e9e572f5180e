//! Deterministic simulated world: scripted agent backend, tool sandbox,
//! validation knowledge base, and the fault injector. Ground truth for
//! scoring detection and recovery lives here and nowhere else.

mod backend;
mod corpus;
mod inject;
mod kb;
mod remote;
mod tools;
mod world;

pub use backend::{AgentBackend, Directive, ScriptedBackend, StepContext, LOOP_EMISSION};
pub use corpus::generate_corpus;
pub use inject::{draw_injection, InjectionPlan};
pub use kb::ValidationKB;
pub use remote::{RemoteBackend, AGENT_BACKEND_URL_VAR};
pub use tools::{ToolOutcome, ToolRegistry};
pub use world::{make_world, World, WorldDescription};
