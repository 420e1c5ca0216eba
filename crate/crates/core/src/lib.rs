//! Logic-synthesis playground with a self-evolving optimization loop.
//!
//! The crate has two halves. The lower half is a small but real synthesis
//! tool: and-inverter graphs with AIGER I/O ([`aig`]), restructuring passes
//! ([`passes`]), a k-LUT mapper ([`mapper`]) and SAT-based equivalence
//! checking ([`equiv`]). The upper half drives that tool through an
//! evolution loop: agents propose edits to the tool's configuration
//! ([`agents`]), a rulebase constrains them ([`rulebase`]), an engine
//! evaluates candidates over a benchmark suite and keeps a champion
//! ([`engine`], [`harness`], [`target`]).

pub mod agents;
pub mod aig;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod engine;
pub mod equiv;
pub mod harness;
pub mod mapper;
pub mod passes;
pub mod rulebase;
pub mod target;
pub(crate) mod tt;
