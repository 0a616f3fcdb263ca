//! Automatic interface generation for interactive text environments.
//!
//! The crate wraps deterministic miniature environments with loadable
//! interface programs (`InferRules` + `WrapStep`), evaluates agents before
//! and after wrapping, and runs the iterative analyze/optimize loop that
//! synthesizes those interfaces from failed trajectories.

pub mod builtin_envs;
pub mod env_core;
pub mod interface_runtime;
