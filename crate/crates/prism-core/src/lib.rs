//! Prism: a compositional metalanguage for agent policies.
//!
//! A tiny fixed core (`Core1`) supplies Church-encoded booleans, pairs,
//! predicates and tools; domain contexts extend it with categories,
//! constants and external capabilities. Policies are ordinary expressions
//! that select among alternative actions; this crate parses, checks,
//! normalizes, runs (against mock scenarios) and symbolically analyzes them.

pub mod analyze;
pub mod contexts;
pub mod corpus;
pub mod decimal;
pub mod diag;
pub mod eval;
pub mod kernel;
pub mod loader;
pub mod runtime;
pub mod syntax;
pub mod typing;
pub mod value;

pub use contexts::{core1, elaborate_context, ContextEnv};
pub use diag::{Diag, ErrorCode, Span};
pub use eval::{decode_host, encode_host, normalize, NormalForm, DEFAULT_FUEL};
pub use kernel::{alpha_eq, free_vars, substitute, Binding, Category, Term};
pub use loader::{load_contexts, LoadOptions, LoadedContexts, SourceFile};
pub use runtime::{
    invoke_external, load_scenario, parse_scenario, run_policy, ActionArg, ActionRecord,
    ExternalCall, Scenario, Trace,
};
pub use value::{HostValue, ValueDoc};
