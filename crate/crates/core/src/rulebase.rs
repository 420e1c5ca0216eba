//! Governance rulebase: declarative constraints on change sets, blocked-edit
//! evidence, and a review loop that can relax soft bounds inside hard
//! safety limits. History is an event journal.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agents::{ChangeSet, EditKind};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    ScopeOwnership,
    ParamBound,
    ForbiddenKey,
    FlowLengthCap,
}

impl RuleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleKind::ScopeOwnership => "scope_ownership",
            RuleKind::ParamBound => "param_bound",
            RuleKind::ForbiddenKey => "forbidden_key",
            RuleKind::FlowLengthCap => "flow_length_cap",
        }
    }

    fn parse(s: &str) -> Option<RuleKind> {
        match s {
            "scope_ownership" => Some(RuleKind::ScopeOwnership),
            "param_bound" => Some(RuleKind::ParamBound),
            "forbidden_key" => Some(RuleKind::ForbiddenKey),
            "flow_length_cap" => Some(RuleKind::FlowLengthCap),
            _ => None,
        }
    }
}

/// One constraint. `subject` is a parameter key, a path, or
/// `owner_agent:address_prefix` for ownership rules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub rule_id: String,
    pub kind: RuleKind,
    pub subject: String,
    pub bound: Option<(f64, f64)>,
    pub enabled: bool,
    pub version: u64,
}

/// A rule firing against one edit of a change set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule_id: String,
    pub edit_index: usize,
    pub message: String,
    pub bound: Option<(f64, f64)>,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "rule {}: edit {}: {}", self.rule_id, self.edit_index, self.message)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalStatus {
    Pending,
    Approved,
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationProposal {
    pub proposal_id: String,
    pub rule_id: String,
    pub proposed_bound: (f64, f64),
    /// Change set ids this rule blocked.
    pub evidence: Vec<String>,
    pub status: ProposalStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum RuleEvent {
    Init { rules: Vec<Rule>, relaxation_threshold: usize },
    Block { rule_id: String, cs_id: String },
    ProposalOpened { proposal_id: String, rule_id: String, proposed_bound: (f64, f64) },
    Decision { proposal_id: String, approved: bool, new_version: Option<u64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rulebase {
    pub rules: Vec<Rule>,
    pub proposals: Vec<RelaxationProposal>,
    pub evidence: BTreeMap<String, Vec<String>>,
    pub relaxation_threshold: usize,
    pub journal: Vec<RuleEvent>,
}

#[derive(Debug, thiserror::Error)]
pub enum RuleError {
    #[error("unknown rule {0:?}")]
    UnknownRule(String),
    #[error("unknown proposal {0:?}")]
    UnknownProposal(String),
    #[error("proposal {0:?} is not pending")]
    NotPending(String),
    #[error("rule {0:?} is a hard constraint and cannot be relaxed")]
    NotRelaxable(String),
    #[error("proposal for {rule_id:?} requests [{}, {}], hard limit is [{}, {}]",
            requested.0, requested.1, hard.0, hard.1)]
    ExceedsHardLimit { rule_id: String, requested: (f64, f64), hard: (f64, f64) },
    #[error("rulebase line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Outer widening limits for relaxable bounds. Anything not listed here
/// cannot be relaxed at all.
const HARD_LIMITS: [(&str, f64, f64); 8] = [
    ("rewrite.cut_size", 2.0, 4.0),
    ("rewrite.max_cuts_per_node", 1.0, 64.0),
    ("refactor.max_inputs", 2.0, 6.0),
    ("mapper.lut_k", 2.0, 6.0),
    ("mapper.cuts_per_node", 1.0, 16.0),
    ("mapper.area_weight", 0.0, 1.0),
    ("mapper.depth_weight", 0.0, 1.0),
    ("flow.ft", 0.0, 64.0),
];

pub fn hard_limit(subject: &str) -> Option<(f64, f64)> {
    HARD_LIMITS.iter().find(|(s, _, _)| *s == subject).map(|(_, lo, hi)| (*lo, *hi))
}

/// Only numeric bounds are negotiable. Ownership and forbidden-key rules
/// are structural: no code path can loosen them.
fn relaxable(kind: RuleKind) -> bool {
    matches!(kind, RuleKind::ParamBound | RuleKind::FlowLengthCap)
}

fn count_flow_steps(text: &str) -> usize {
    text.lines()
        .filter(|raw| {
            let body = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            !body.trim().is_empty()
        })
        .count()
}

/// Checks every edit against every enabled rule. Pure; the result is
/// empty exactly when the change set passes.
pub fn validate(cs: &ChangeSet, rb: &Rulebase) -> Vec<Violation> {
    let mut out = Vec::new();
    for (edit_index, edit) in cs.edits.iter().enumerate() {
        let addr = edit.address();
        for rule in rb.rules.iter().filter(|r| r.enabled) {
            match rule.kind {
                RuleKind::ScopeOwnership => {
                    let Some((owner, prefix)) = rule.subject.split_once(':') else {
                        continue;
                    };
                    if addr.starts_with(prefix) && cs.agent_id.as_str() != owner {
                        out.push(Violation {
                            rule_id: rule.rule_id.clone(),
                            edit_index,
                            message: format!("{addr} belongs to {owner}, not {}", cs.agent_id),
                            bound: None,
                        });
                    }
                }
                RuleKind::ParamBound => {
                    let EditKind::SetKv { key, value } = &edit.kind else { continue };
                    if *key != rule.subject {
                        continue;
                    }
                    let (lo, hi) = rule.bound.expect("param_bound rules carry a bound");
                    match value.parse::<f64>() {
                        Ok(v) if v >= lo && v <= hi => {}
                        Ok(v) => out.push(Violation {
                            rule_id: rule.rule_id.clone(),
                            edit_index,
                            message: format!("{key}={v} is outside [{lo}, {hi}]"),
                            bound: Some((lo, hi)),
                        }),
                        Err(_) => out.push(Violation {
                            rule_id: rule.rule_id.clone(),
                            edit_index,
                            message: format!("{key}={value:?} is not numeric"),
                            bound: Some((lo, hi)),
                        }),
                    }
                }
                RuleKind::ForbiddenKey => {
                    let EditKind::SetKv { key, .. } = &edit.kind else { continue };
                    if *key == rule.subject {
                        out.push(Violation {
                            rule_id: rule.rule_id.clone(),
                            edit_index,
                            message: format!("edits to {key} are forbidden"),
                            bound: None,
                        });
                    }
                }
                RuleKind::FlowLengthCap => {
                    if edit.path != rule.subject {
                        continue;
                    }
                    let EditKind::ReplaceText { text } = &edit.kind else { continue };
                    let steps = count_flow_steps(text);
                    let (_, hi) = rule.bound.expect("flow_length_cap rules carry a bound");
                    if steps as f64 > hi {
                        out.push(Violation {
                            rule_id: rule.rule_id.clone(),
                            edit_index,
                            message: format!("flow has {steps} steps, the cap is {hi}"),
                            bound: rule.bound,
                        });
                    }
                }
            }
        }
    }
    out
}

/// Records one blocked change set against a rule. At the evidence
/// threshold, a widening proposal opens automatically for relaxable rules.
pub fn record_block(rb: &Rulebase, rule_id: &str, cs_id: &str) -> Result<Rulebase, RuleError> {
    let mut rb = rb.clone();
    let rule = rb
        .rules
        .iter()
        .find(|r| r.rule_id == rule_id)
        .cloned()
        .ok_or_else(|| RuleError::UnknownRule(rule_id.to_string()))?;
    rb.journal
        .push(RuleEvent::Block { rule_id: rule_id.to_string(), cs_id: cs_id.to_string() });
    let evidence = rb.evidence.entry(rule_id.to_string()).or_default();
    evidence.push(cs_id.to_string());
    let has_pending = rb
        .proposals
        .iter()
        .any(|p| p.rule_id == rule_id && p.status == ProposalStatus::Pending);
    if evidence.len() >= rb.relaxation_threshold && relaxable(rule.kind) && !has_pending {
        if let Some(proposed_bound) = widen_bound(&rule) {
            let proposal_id = format!("p{}", rb.proposals.len() + 1);
            let snapshot = evidence.clone();
            rb.proposals.push(RelaxationProposal {
                proposal_id: proposal_id.clone(),
                rule_id: rule_id.to_string(),
                proposed_bound,
                evidence: snapshot,
                status: ProposalStatus::Pending,
            });
            rb.journal.push(RuleEvent::ProposalOpened {
                proposal_id,
                rule_id: rule_id.to_string(),
                proposed_bound,
            });
        }
    }
    Ok(rb)
}

/// One step of widening toward the hard limit, or None at the limit.
fn widen_bound(rule: &Rule) -> Option<(f64, f64)> {
    let (lo, hi) = rule.bound?;
    let (hard_lo, hard_hi) = hard_limit(&rule.subject)?;
    let next = ((lo - 1.0).max(hard_lo), (hi + 1.0).min(hard_hi));
    (next != (lo, hi)).then_some(next)
}

/// Opens a review proposal by hand (the planner's rule change requests go
/// through here). Bounds are checked at decision time, not here.
pub fn open_proposal(
    rb: &Rulebase,
    rule_id: &str,
    proposed_bound: (f64, f64),
) -> Result<Rulebase, RuleError> {
    let mut rb = rb.clone();
    if !rb.rules.iter().any(|r| r.rule_id == rule_id) {
        return Err(RuleError::UnknownRule(rule_id.to_string()));
    }
    let proposal_id = format!("p{}", rb.proposals.len() + 1);
    let evidence = rb.evidence.get(rule_id).cloned().unwrap_or_default();
    rb.proposals.push(RelaxationProposal {
        proposal_id: proposal_id.clone(),
        rule_id: rule_id.to_string(),
        proposed_bound,
        evidence,
        status: ProposalStatus::Pending,
    });
    rb.journal.push(RuleEvent::ProposalOpened {
        proposal_id,
        rule_id: rule_id.to_string(),
        proposed_bound,
    });
    Ok(rb)
}

/// Decides a pending proposal. Approval widens the rule inside its hard
/// limit and bumps the version; rejection closes it and resets evidence.
pub fn apply_relaxation(
    rb: &Rulebase,
    proposal_id: &str,
    approve: bool,
) -> Result<Rulebase, RuleError> {
    let mut rb = rb.clone();
    let pi = rb
        .proposals
        .iter()
        .position(|p| p.proposal_id == proposal_id)
        .ok_or_else(|| RuleError::UnknownProposal(proposal_id.to_string()))?;
    if rb.proposals[pi].status != ProposalStatus::Pending {
        return Err(RuleError::NotPending(proposal_id.to_string()));
    }
    let rule_id = rb.proposals[pi].rule_id.clone();
    if !approve {
        rb.proposals[pi].status = ProposalStatus::Rejected;
        rb.evidence.remove(&rule_id);
        rb.journal.push(RuleEvent::Decision {
            proposal_id: proposal_id.to_string(),
            approved: false,
            new_version: None,
        });
        return Ok(rb);
    }
    let ri = rb
        .rules
        .iter()
        .position(|r| r.rule_id == rule_id)
        .ok_or_else(|| RuleError::UnknownRule(rule_id.clone()))?;
    if !relaxable(rb.rules[ri].kind) {
        return Err(RuleError::NotRelaxable(rule_id));
    }
    let hard = hard_limit(&rb.rules[ri].subject)
        .ok_or_else(|| RuleError::NotRelaxable(rule_id.clone()))?;
    let requested = rb.proposals[pi].proposed_bound;
    if requested.0 < hard.0 || requested.1 > hard.1 {
        return Err(RuleError::ExceedsHardLimit { rule_id, requested, hard });
    }
    rb.rules[ri].bound = Some(requested);
    rb.rules[ri].version += 1;
    let new_version = rb.rules[ri].version;
    rb.proposals[pi].status = ProposalStatus::Approved;
    rb.evidence.remove(&rule_id);
    rb.journal.push(RuleEvent::Decision {
        proposal_id: proposal_id.to_string(),
        approved: true,
        new_version: Some(new_version),
    });
    Ok(rb)
}

/// Rebuilds the rulebase state at any point of its history by literal
/// event replay.
pub fn replay_journal(events: &[RuleEvent]) -> Result<Rulebase, RuleError> {
    let mut rb = match events.first() {
        Some(RuleEvent::Init { rules, relaxation_threshold }) => Rulebase {
            rules: rules.clone(),
            proposals: Vec::new(),
            evidence: BTreeMap::new(),
            relaxation_threshold: *relaxation_threshold,
            journal: vec![events[0].clone()],
        },
        _ => {
            return Err(RuleError::Parse { line: 1, msg: "journal must start with init".into() })
        }
    };
    for ev in &events[1..] {
        match ev {
            RuleEvent::Init { .. } => {
                return Err(RuleError::Parse { line: 0, msg: "duplicate init event".into() })
            }
            RuleEvent::Block { rule_id, cs_id } => {
                rb.evidence.entry(rule_id.clone()).or_default().push(cs_id.clone());
            }
            RuleEvent::ProposalOpened { proposal_id, rule_id, proposed_bound } => {
                let evidence = rb.evidence.get(rule_id).cloned().unwrap_or_default();
                rb.proposals.push(RelaxationProposal {
                    proposal_id: proposal_id.clone(),
                    rule_id: rule_id.clone(),
                    proposed_bound: *proposed_bound,
                    evidence,
                    status: ProposalStatus::Pending,
                });
            }
            RuleEvent::Decision { proposal_id, approved, new_version } => {
                let pi = rb
                    .proposals
                    .iter()
                    .position(|p| &p.proposal_id == proposal_id)
                    .ok_or_else(|| RuleError::UnknownProposal(proposal_id.clone()))?;
                let rule_id = rb.proposals[pi].rule_id.clone();
                if *approved {
                    let bound = rb.proposals[pi].proposed_bound;
                    let ri = rb
                        .rules
                        .iter()
                        .position(|r| r.rule_id == rule_id)
                        .ok_or_else(|| RuleError::UnknownRule(rule_id.clone()))?;
                    rb.rules[ri].bound = Some(bound);
                    rb.rules[ri].version =
                        new_version.expect("approved decisions carry the new version");
                    rb.proposals[pi].status = ProposalStatus::Approved;
                } else {
                    rb.proposals[pi].status = ProposalStatus::Rejected;
                }
                rb.evidence.remove(&rule_id);
            }
        }
        rb.journal.push(ev.clone());
    }
    Ok(rb)
}

fn rule(rule_id: &str, kind: RuleKind, subject: &str, bound: Option<(f64, f64)>) -> Rule {
    Rule {
        rule_id: rule_id.to_string(),
        kind,
        subject: subject.to_string(),
        bound,
        enabled: true,
        version: 1,
    }
}

/// Stock governance for the builtin target. Soft bounds start tighter than
/// the tool's own ranges so the review loop has real work to do.
pub fn default_rulebase() -> Rulebase {
    let rules = vec![
        rule("scope.flow", RuleKind::ScopeOwnership, "flow_agent:flow.ft", None),
        rule("scope.mapper", RuleKind::ScopeOwnership, "mapper_agent:params.cfg:mapper.", None),
        rule(
            "scope.logic_rewrite",
            RuleKind::ScopeOwnership,
            "logic_agent:params.cfg:rewrite.",
            None,
        ),
        rule(
            "scope.logic_refactor",
            RuleKind::ScopeOwnership,
            "logic_agent:params.cfg:refactor.",
            None,
        ),
        rule("bound.rewrite.cut_size", RuleKind::ParamBound, "rewrite.cut_size", Some((2.0, 3.0))),
        rule(
            "bound.rewrite.max_cuts",
            RuleKind::ParamBound,
            "rewrite.max_cuts_per_node",
            Some((1.0, 16.0)),
        ),
        rule(
            "bound.refactor.max_inputs",
            RuleKind::ParamBound,
            "refactor.max_inputs",
            Some((2.0, 4.0)),
        ),
        rule("bound.mapper.lut_k", RuleKind::ParamBound, "mapper.lut_k", Some((2.0, 6.0))),
        rule("bound.mapper.cuts", RuleKind::ParamBound, "mapper.cuts_per_node", Some((1.0, 8.0))),
        rule(
            "bound.mapper.area_weight",
            RuleKind::ParamBound,
            "mapper.area_weight",
            Some((0.0, 1.0)),
        ),
        rule(
            "bound.mapper.depth_weight",
            RuleKind::ParamBound,
            "mapper.depth_weight",
            Some((0.0, 1.0)),
        ),
        rule("forbid.fault_xor", RuleKind::ForbiddenKey, "rewrite.fault_xor", None),
        rule("cap.flow_length", RuleKind::FlowLengthCap, "flow.ft", Some((0.0, 64.0))),
    ];
    Rulebase {
        journal: vec![RuleEvent::Init { rules: rules.clone(), relaxation_threshold: 3 }],
        rules,
        proposals: Vec::new(),
        evidence: BTreeMap::new(),
        relaxation_threshold: 3,
    }
}

fn fmt_bound(b: Option<(f64, f64)>) -> String {
    match b {
        Some((lo, hi)) => format!("{lo}..{hi}"),
        None => "-".to_string(),
    }
}

/// One rule per line: `id|kind|subject|lo..hi|on|vN`, with a threshold
/// header. The journal is serialized separately as JSON lines.
pub fn to_text(rb: &Rulebase) -> String {
    let mut out = String::from("# governance rules: id|kind|subject|bound|enabled|version\n");
    out.push_str(&format!("threshold={}\n", rb.relaxation_threshold));
    for r in &rb.rules {
        out.push_str(&format!(
            "{}|{}|{}|{}|{}|v{}\n",
            r.rule_id,
            r.kind.as_str(),
            r.subject,
            fmt_bound(r.bound),
            if r.enabled { "on" } else { "off" },
            r.version,
        ));
    }
    out
}

pub fn from_text(text: &str) -> Result<Rulebase, RuleError> {
    let mut rules = Vec::new();
    let mut threshold = 3usize;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        if let Some(v) = body.strip_prefix("threshold=") {
            threshold = v
                .parse()
                .map_err(|_| RuleError::Parse { line, msg: format!("bad threshold {v:?}") })?;
            continue;
        }
        let fields: Vec<&str> = body.split('|').collect();
        if fields.len() != 6 {
            return Err(RuleError::Parse { line, msg: "expected 6 |-separated fields".into() });
        }
        let kind = RuleKind::parse(fields[1])
            .ok_or_else(|| RuleError::Parse { line, msg: format!("unknown kind {:?}", fields[1]) })?;
        let bound = match fields[3] {
            "-" => None,
            span => {
                let (lo, hi) = span.split_once("..").ok_or_else(|| RuleError::Parse {
                    line,
                    msg: format!("bad bound {span:?}"),
                })?;
                Some((
                    lo.parse().map_err(|_| RuleError::Parse { line, msg: format!("bad bound {span:?}") })?,
                    hi.parse().map_err(|_| RuleError::Parse { line, msg: format!("bad bound {span:?}") })?,
                ))
            }
        };
        if kind == RuleKind::ParamBound && bound.is_none() {
            return Err(RuleError::Parse { line, msg: "param_bound rules need a bound".into() });
        }
        let enabled = match fields[4] {
            "on" => true,
            "off" => false,
            other => {
                return Err(RuleError::Parse { line, msg: format!("bad enabled flag {other:?}") })
            }
        };
        let version = fields[5]
            .strip_prefix('v')
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| RuleError::Parse { line, msg: format!("bad version {:?}", fields[5]) })?;
        rules.push(Rule {
            rule_id: fields[0].to_string(),
            kind,
            subject: fields[2].to_string(),
            bound,
            enabled,
            version,
        });
    }
    Ok(Rulebase {
        journal: vec![RuleEvent::Init { rules: rules.clone(), relaxation_threshold: threshold }],
        rules,
        proposals: Vec::new(),
        evidence: BTreeMap::new(),
        relaxation_threshold: threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{AgentId, Edit};

    fn kv_cs(agent: AgentId, key: &str, value: &str) -> ChangeSet {
        ChangeSet {
            cs_id: format!("cs.{key}.{value}"),
            agent_id: agent,
            edits: vec![Edit::set_kv("params.cfg", key, value)],
            hypothesis: "test".into(),
            tokens_used: 0,
        }
    }

    #[test]
    fn in_bound_edit_passes() {
        let rb = default_rulebase();
        let cs = kv_cs(AgentId::LogicAgent, "rewrite.cut_size", "3");
        assert!(validate(&cs, &rb).is_empty());
    }

    #[test]
    fn out_of_bound_edit_names_rule_and_index() {
        let rb = default_rulebase();
        let cs = kv_cs(AgentId::LogicAgent, "rewrite.cut_size", "4");
        let vs = validate(&cs, &rb);
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0].rule_id, "bound.rewrite.cut_size");
        assert_eq!(vs[0].edit_index, 0);
        assert_eq!(vs[0].bound, Some((2.0, 3.0)));
    }

    #[test]
    fn cross_agent_edit_hits_ownership() {
        let rb = default_rulebase();
        let cs = kv_cs(AgentId::MapperAgent, "rewrite.cut_size", "3");
        let vs = validate(&cs, &rb);
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0].rule_id, "scope.logic_rewrite");
    }

    #[test]
    fn fault_flag_edits_are_forbidden_both_ways() {
        let rb = default_rulebase();
        for value in ["true", "false"] {
            let cs = kv_cs(AgentId::LogicAgent, "rewrite.fault_xor", value);
            let vs = validate(&cs, &rb);
            assert!(vs.iter().any(|v| v.rule_id == "forbid.fault_xor"), "value {value}");
        }
    }

    #[test]
    fn disabled_rules_never_fire() {
        let mut rb = default_rulebase();
        rb.rules
            .iter_mut()
            .find(|r| r.rule_id == "bound.rewrite.cut_size")
            .unwrap()
            .enabled = false;
        let cs = kv_cs(AgentId::LogicAgent, "rewrite.cut_size", "9");
        assert!(validate(&cs, &rb).is_empty());
    }

    #[test]
    fn overlong_flow_hits_the_cap() {
        let rb = default_rulebase();
        let cs = ChangeSet {
            cs_id: "cs.flow".into(),
            agent_id: AgentId::FlowAgent,
            edits: vec![Edit::replace_text("flow.ft", &"balance\n".repeat(65))],
            hypothesis: "test".into(),
            tokens_used: 0,
        };
        let vs = validate(&cs, &rb);
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0].rule_id, "cap.flow_length");
        let ok = ChangeSet {
            edits: vec![Edit::replace_text("flow.ft", &"balance\n".repeat(64))],
            ..cs
        };
        assert!(validate(&ok, &rb).is_empty());
    }

    #[test]
    fn record_block_requires_a_known_rule() {
        let rb = default_rulebase();
        assert!(matches!(
            record_block(&rb, "bound.nonsense", "cs1"),
            Err(RuleError::UnknownRule(_))
        ));
    }

    #[test]
    fn third_block_opens_a_pending_proposal() {
        let mut rb = default_rulebase();
        for i in 0..3 {
            rb = record_block(&rb, "bound.rewrite.cut_size", &format!("cs{i}")).unwrap();
        }
        assert_eq!(rb.proposals.len(), 1);
        let p = &rb.proposals[0];
        assert_eq!(p.status, ProposalStatus::Pending);
        assert_eq!(p.rule_id, "bound.rewrite.cut_size");
        assert_eq!(p.proposed_bound, (2.0, 4.0));
        assert_eq!(p.evidence, vec!["cs0", "cs1", "cs2"]);
        // further blocks do not stack proposals
        rb = record_block(&rb, "bound.rewrite.cut_size", "cs3").unwrap();
        assert_eq!(rb.proposals.len(), 1);
    }

    #[test]
    fn approval_widens_and_previously_blocked_edit_passes() {
        let mut rb = default_rulebase();
        let blocked = kv_cs(AgentId::LogicAgent, "rewrite.cut_size", "4");
        assert!(!validate(&blocked, &rb).is_empty());
        for i in 0..3 {
            rb = record_block(&rb, "bound.rewrite.cut_size", &format!("cs{i}")).unwrap();
        }
        let pid = rb.proposals[0].proposal_id.clone();
        let rb = apply_relaxation(&rb, &pid, true).unwrap();
        let r = rb.rules.iter().find(|r| r.rule_id == "bound.rewrite.cut_size").unwrap();
        assert_eq!(r.bound, Some((2.0, 4.0)));
        assert_eq!(r.version, 2);
        assert!(validate(&blocked, &rb).is_empty());
        // decided proposals cannot be decided again
        assert!(matches!(apply_relaxation(&rb, &pid, true), Err(RuleError::NotPending(_))));
    }

    #[test]
    fn rejection_resets_evidence_and_keeps_the_bound() {
        let mut rb = default_rulebase();
        for i in 0..3 {
            rb = record_block(&rb, "bound.rewrite.cut_size", &format!("cs{i}")).unwrap();
        }
        let pid = rb.proposals[0].proposal_id.clone();
        let rb = apply_relaxation(&rb, &pid, false).unwrap();
        assert_eq!(rb.proposals[0].status, ProposalStatus::Rejected);
        assert!(rb.evidence.get("bound.rewrite.cut_size").is_none());
        let r = rb.rules.iter().find(|r| r.rule_id == "bound.rewrite.cut_size").unwrap();
        assert_eq!(r.bound, Some((2.0, 3.0)));
        assert_eq!(r.version, 1);
    }

    #[test]
    fn relaxation_cannot_exceed_hard_limits() {
        let rb = default_rulebase();
        let rb = open_proposal(&rb, "bound.rewrite.cut_size", (2.0, 9.0)).unwrap();
        let pid = rb.proposals[0].proposal_id.clone();
        match apply_relaxation(&rb, &pid, true) {
            Err(RuleError::ExceedsHardLimit { requested, hard, .. }) => {
                assert_eq!(requested, (2.0, 9.0));
                assert_eq!(hard, (2.0, 4.0));
            }
            other => panic!("expected hard limit rejection, got {other:?}"),
        }
    }

    #[test]
    fn fault_flag_rule_is_structurally_unrelaxable() {
        let rb = default_rulebase();
        let rb = open_proposal(&rb, "forbid.fault_xor", (0.0, 1.0)).unwrap();
        let pid = rb.proposals[0].proposal_id.clone();
        assert!(matches!(apply_relaxation(&rb, &pid, true), Err(RuleError::NotRelaxable(_))));
    }

    #[test]
    fn text_form_round_trips() {
        let rb = default_rulebase();
        let text = to_text(&rb);
        let back = from_text(&text).unwrap();
        assert_eq!(back.rules, rb.rules);
        assert_eq!(back.relaxation_threshold, rb.relaxation_threshold);
        assert!(from_text("junk|line\n").is_err());
    }

    #[test]
    fn journal_replay_reconstructs_every_version() {
        let mut rb = default_rulebase();
        for i in 0..3 {
            rb = record_block(&rb, "bound.rewrite.cut_size", &format!("cs{i}")).unwrap();
        }
        let pid = rb.proposals[0].proposal_id.clone();
        rb = apply_relaxation(&rb, &pid, true).unwrap();
        rb = record_block(&rb, "bound.refactor.max_inputs", "cs9").unwrap();

        let full = replay_journal(&rb.journal).unwrap();
        assert_eq!(full.rules, rb.rules);
        assert_eq!(full.proposals, rb.proposals);
        assert_eq!(full.evidence, rb.evidence);

        // a prefix of the journal is an earlier version: before the
        // decision event the bound is still the original
        let before_decision = rb.journal.len() - 2;
        let past = replay_journal(&rb.journal[..before_decision]).unwrap();
        let r = past.rules.iter().find(|r| r.rule_id == "bound.rewrite.cut_size").unwrap();
        assert_eq!(r.bound, Some((2.0, 3.0)));
        assert_eq!(r.version, 1);
        assert_eq!(past.proposals[0].status, ProposalStatus::Pending);
    }
}
