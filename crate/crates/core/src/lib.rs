//! Mixed-initiative semantic service discovery and composition engine.

pub mod assist;
pub mod bench;
pub mod cli;
pub mod error;
pub mod ontology;
pub mod planner;
pub mod process;
pub mod registry;
pub mod semantics;
pub mod session;
pub mod workspace;
