//! Technology-independent optimization passes and flow execution.
//!
//! Three restructuring passes run over an [`Aig`]: `balance` rebuilds
//! AND trees associatively to cut depth, `rewrite` replaces small cut
//! cones with precomputed minimum structures, and `refactor` collapses
//! fanout-free cones and resynthesizes them. A [`FlowScript`] sequences
//! passes with per-line parameter overrides.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aig::Aig;

mod balance;
pub(crate) mod npn;
mod refactor;
mod rewrite;
pub(crate) mod work;

pub use balance::balance;
pub use refactor::refactor;
pub use rewrite::{rewrite, rewrite_with_stats, RewriteStats};

/// Tunable knobs shared by the passes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassParams {
    /// Cut width for rewriting, 2 to 4 leaves.
    pub cut_size: usize,
    /// Nontrivial cuts kept per node, 1 to 64.
    pub max_cuts_per_node: usize,
    /// Accept rewrites that keep the AND count unchanged.
    pub zero_cost_replace: bool,
    /// Leaf bound for refactoring cones, 2 to 6.
    pub refactor_max_inputs: usize,
    /// Fault-injection switch: rewriting installs xor structures in place
    /// of two-input ands. Only tests set this; the equivalence gate must
    /// reject any run that used it.
    pub fault_xor: bool,
}

impl Default for PassParams {
    fn default() -> PassParams {
        PassParams {
            cut_size: 3,
            max_cuts_per_node: 8,
            zero_cost_replace: false,
            refactor_max_inputs: 4,
            fault_xor: false,
        }
    }
}

impl PassParams {
    pub fn validate(&self) -> Result<(), PassError> {
        let range = |key: &'static str, v: usize, lo: usize, hi: usize| {
            if v < lo || v > hi {
                Err(PassError::BadParam {
                    key,
                    msg: format!("{} is outside {}..={}", v, lo, hi),
                })
            } else {
                Ok(())
            }
        };
        range("cut_size", self.cut_size, 2, 4)?;
        range("max_cuts_per_node", self.max_cuts_per_node, 1, 64)?;
        range("refactor_max_inputs", self.refactor_max_inputs, 2, 6)?;
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), PassError> {
        let bad = || PassError::Malformed {
            line,
            msg: format!("bad value {:?} for {}", value, key),
        };
        match key {
            "cut_size" => self.cut_size = value.parse().map_err(|_| bad())?,
            "max_cuts_per_node" => self.max_cuts_per_node = value.parse().map_err(|_| bad())?,
            "zero_cost_replace" => self.zero_cost_replace = value.parse().map_err(|_| bad())?,
            "refactor_max_inputs" => self.refactor_max_inputs = value.parse().map_err(|_| bad())?,
            "fault_xor" => self.fault_xor = value.parse().map_err(|_| bad())?,
            _ => {
                return Err(PassError::Malformed {
                    line,
                    msg: format!("unknown parameter {:?}", key),
                })
            }
        }
        Ok(())
    }
}

/// Structural before/after record one pass emits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassDelta {
    pub pass_name: String,
    pub and_count_before: usize,
    pub and_count_after: usize,
    pub depth_before: usize,
    pub depth_after: usize,
}

impl PassDelta {
    fn capture(pass_name: &str, before: &Aig, after: &Aig) -> PassDelta {
        let mb = before.metrics();
        let ma = after.metrics();
        PassDelta {
            pass_name: pass_name.to_string(),
            and_count_before: mb.and_count,
            and_count_after: ma.and_count,
            depth_before: mb.depth,
            depth_after: ma.depth,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PassError {
    #[error("line {line}: unknown pass {name:?}")]
    UnknownPassName { line: usize, name: String },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("flow has {lines} steps, the limit is {MAX_FLOW_LEN}")]
    FlowTooLong { lines: usize },
    #[error("parameter {key}: {msg}")]
    BadParam { key: &'static str, msg: String },
}

/// Upper bound on flow steps.
pub const MAX_FLOW_LEN: usize = 64;

const PASS_NAMES: [&str; 3] = ["balance", "rewrite", "refactor"];

/// An ordered pass sequence with per-step parameter overrides.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowScript {
    pub steps: Vec<FlowStep>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowStep {
    pub pass_name: String,
    pub params: PassParams,
}

impl FlowScript {
    /// Parses the text form: one pass per line, `passname key=value ...`,
    /// `#` starts a comment, blank lines allowed, case-sensitive.
    /// Overrides apply to `base` per line.
    pub fn parse_with(text: &str, base: &PassParams) -> Result<FlowScript, PassError> {
        let mut steps = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            let mut tokens = body.split_whitespace();
            let name = match tokens.next() {
                Some(n) => n,
                None => continue,
            };
            if !PASS_NAMES.contains(&name) {
                return Err(PassError::UnknownPassName {
                    line,
                    name: name.to_string(),
                });
            }
            let mut params = base.clone();
            for tok in tokens {
                let (key, value) = tok.split_once('=').ok_or_else(|| PassError::Malformed {
                    line,
                    msg: format!("expected key=value, got {:?}", tok),
                })?;
                params.set(key, value, line)?;
            }
            params.validate()?;
            steps.push(FlowStep {
                pass_name: name.to_string(),
                params,
            });
        }
        if steps.len() > MAX_FLOW_LEN {
            return Err(PassError::FlowTooLong { lines: steps.len() });
        }
        Ok(FlowScript { steps })
    }

    pub fn parse(text: &str) -> Result<FlowScript, PassError> {
        FlowScript::parse_with(text, &PassParams::default())
    }

    /// True if any step turns on fault injection.
    pub fn uses_fault_injection(&self) -> bool {
        self.steps.iter().any(|s| s.params.fault_xor)
    }
}

/// Runs the flow's passes in order, collecting one delta per step.
pub fn run_flow(aig: &Aig, flow: &FlowScript) -> Result<(Aig, Vec<PassDelta>), PassError> {
    let mut g = aig.clone();
    let mut deltas = Vec::with_capacity(flow.steps.len());
    for (idx, step) in flow.steps.iter().enumerate() {
        step.params.validate()?;
        let (next, delta) = match step.pass_name.as_str() {
            "balance" => balance(&g),
            "rewrite" => rewrite(&g, &step.params),
            "refactor" => refactor(&g, &step.params),
            other => {
                return Err(PassError::UnknownPassName {
                    line: idx + 1,
                    name: other.to_string(),
                })
            }
        };
        deltas.push(delta);
        g = next;
    }
    Ok((g, deltas))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aig::parse_aiger;

    #[test]
    fn flow_parse_overrides_and_comments() {
        let text = "\
# a comment line
balance
rewrite cut_size=4 max_cuts_per_node=16   # trailing comment

refactor refactor_max_inputs=6
";
        let flow = FlowScript::parse(text).unwrap();
        assert_eq!(flow.steps.len(), 3);
        assert_eq!(flow.steps[0].pass_name, "balance");
        assert_eq!(flow.steps[1].params.cut_size, 4);
        assert_eq!(flow.steps[1].params.max_cuts_per_node, 16);
        assert_eq!(flow.steps[2].params.refactor_max_inputs, 6);
        assert_eq!(flow.steps[2].params.cut_size, 3);
        assert!(!flow.uses_fault_injection());
    }

    #[test]
    fn flow_parse_rejects_unknown_pass() {
        let err = FlowScript::parse("balance\nresub\n").unwrap_err();
        assert_eq!(
            err,
            PassError::UnknownPassName {
                line: 2,
                name: "resub".to_string()
            }
        );
    }

    #[test]
    fn flow_parse_rejects_case_variants() {
        assert!(FlowScript::parse("Balance\n").is_err());
    }

    #[test]
    fn flow_parse_rejects_out_of_range() {
        assert!(FlowScript::parse("rewrite cut_size=5\n").is_err());
        assert!(FlowScript::parse("rewrite max_cuts_per_node=0\n").is_err());
        assert!(FlowScript::parse("refactor refactor_max_inputs=7\n").is_err());
    }

    #[test]
    fn flow_parse_enforces_length_cap() {
        let text = "balance\n".repeat(MAX_FLOW_LEN);
        assert_eq!(FlowScript::parse(&text).unwrap().steps.len(), MAX_FLOW_LEN);
        let text = "balance\n".repeat(MAX_FLOW_LEN + 1);
        assert_eq!(
            FlowScript::parse(&text).unwrap_err(),
            PassError::FlowTooLong {
                lines: MAX_FLOW_LEN + 1
            }
        );
    }

    #[test]
    fn empty_flow_is_identity() {
        let aig = parse_aiger("aag 3 2 0 1 1\n2\n4\n6\n6 2 4\n").unwrap();
        let flow = FlowScript::parse("").unwrap();
        let (out, deltas) = run_flow(&aig, &flow).unwrap();
        assert!(deltas.is_empty());
        assert_eq!(out.metrics(), aig.metrics());
    }

    #[test]
    fn flow_chains_deltas() {
        let text = "aag 7 4 0 1 3\n2\n4\n6\n8\n14\n10 2 4\n12 10 6\n14 12 8\n";
        let aig = parse_aiger(text).unwrap();
        let flow = FlowScript::parse("rewrite\nbalance\nrefactor\n").unwrap();
        let (out, deltas) = run_flow(&aig, &flow).unwrap();
        assert_eq!(deltas.len(), 3);
        for pair in deltas.windows(2) {
            assert_eq!(pair[0].and_count_after, pair[1].and_count_before);
            assert_eq!(pair[0].depth_after, pair[1].depth_before);
        }
        let last = deltas.last().unwrap();
        assert_eq!(last.and_count_after, out.metrics().and_count);
        assert_eq!(last.depth_after, out.metrics().depth);
    }
}
