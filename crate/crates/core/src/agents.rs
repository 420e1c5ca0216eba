//! Agent gateway: planning and edit proposals from mock, replay or live
//! LLM backends, with scope enforcement and token accounting.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::harness::{TokenCategory, TokenLedger};
use crate::rulebase::Violation;

/// Roles in the evolution loop. The planner never edits; the other three
/// ("coders") own disjoint slices of the target source.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentId {
    Planner,
    FlowAgent,
    MapperAgent,
    LogicAgent,
}

pub const CODERS: [AgentId; 3] = [AgentId::FlowAgent, AgentId::MapperAgent, AgentId::LogicAgent];

impl AgentId {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentId::Planner => "planner",
            AgentId::FlowAgent => "flow_agent",
            AgentId::MapperAgent => "mapper_agent",
            AgentId::LogicAgent => "logic_agent",
        }
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentId {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "planner" => Ok(AgentId::Planner),
            "flow_agent" => Ok(AgentId::FlowAgent),
            "mapper_agent" => Ok(AgentId::MapperAgent),
            "logic_agent" => Ok(AgentId::LogicAgent),
            _ => Err(()),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Mock,
    Llm,
    /// LLM wire format, but responses come from a recorded fixture book.
    Replay,
}

impl FromStr for BackendKind {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "mock" => Ok(BackendKind::Mock),
            "llm" => Ok(BackendKind::Llm),
            "replay" => Ok(BackendKind::Replay),
            _ => Err(()),
        }
    }
}

/// Static description of one agent: what it may touch and which backend
/// answers for it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AgentSpec {
    pub agent_id: AgentId,
    /// Address prefixes this agent may edit. An edit address is the file
    /// path, or `path:key` for key/value edits. Empty for the planner.
    pub scope: Vec<String>,
    pub backend: BackendKind,
    pub model_name: String,
    pub max_repair_rounds: usize,
}

/// Default crew: planner plus three coders with disjoint scopes.
pub fn default_specs(backend: BackendKind, model_name: &str) -> Vec<AgentSpec> {
    let spec = |agent_id, scope: &[&str]| AgentSpec {
        agent_id,
        scope: scope.iter().map(|s| s.to_string()).collect(),
        backend,
        model_name: model_name.to_string(),
        max_repair_rounds: 3,
    };
    vec![
        spec(AgentId::Planner, &[]),
        spec(AgentId::FlowAgent, &["flow.ft"]),
        spec(AgentId::MapperAgent, &["params.cfg:mapper."]),
        spec(AgentId::LogicAgent, &["params.cfg:rewrite.", "params.cfg:refactor."]),
    ]
}

/// Checks that the planner has no scope and coder scopes are pairwise
/// disjoint (no entry is a prefix of another agent's entry).
pub fn validate_specs(specs: &[AgentSpec]) -> Result<(), AgentError> {
    for s in specs {
        if s.agent_id == AgentId::Planner && !s.scope.is_empty() {
            return Err(AgentError::BadSpec("planner must not have an edit scope".into()));
        }
    }
    let coders: Vec<&AgentSpec> =
        specs.iter().filter(|s| s.agent_id != AgentId::Planner).collect();
    for (i, a) in coders.iter().enumerate() {
        for b in coders.iter().skip(i + 1) {
            if a.agent_id == b.agent_id {
                return Err(AgentError::BadSpec(format!("duplicate spec for {}", a.agent_id)));
            }
            for pa in &a.scope {
                for pb in &b.scope {
                    if pa.starts_with(pb.as_str()) || pb.starts_with(pa.as_str()) {
                        return Err(AgentError::BadSpec(format!(
                            "overlapping scopes: {} owns {pa:?}, {} owns {pb:?}",
                            a.agent_id, b.agent_id
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    /// Set `key=value` in a key/value file, replacing or appending the line.
    SetKv { key: String, value: String },
    /// Replace (or create) the whole file with `text`.
    ReplaceText { text: String },
    /// Apply a unified diff to the existing file.
    UnifiedDiff { diff: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edit {
    pub path: String,
    pub kind: EditKind,
}

impl Edit {
    pub fn set_kv(path: &str, key: &str, value: &str) -> Edit {
        Edit { path: path.into(), kind: EditKind::SetKv { key: key.into(), value: value.into() } }
    }

    pub fn replace_text(path: &str, text: &str) -> Edit {
        Edit { path: path.into(), kind: EditKind::ReplaceText { text: text.into() } }
    }

    /// Scope/ownership address of this edit.
    pub fn address(&self) -> String {
        match &self.kind {
            EditKind::SetKv { key, .. } => format!("{}:{}", self.path, key),
            _ => self.path.clone(),
        }
    }
}

/// One agent's proposed edits for a cycle, plus the reasoning one-liner
/// and the tokens the backend charged for producing it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChangeSet {
    pub cs_id: String,
    pub agent_id: AgentId,
    pub edits: Vec<Edit>,
    pub hypothesis: String,
    pub tokens_used: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanDecision {
    pub chosen_agents: Vec<AgentId>,
    pub objective_note: String,
    pub rule_change_requests: Vec<String>,
}

/// Human-supplied context documents, concatenated with a section index.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContextBundle {
    pub sections: Vec<String>,
    pub text: String,
    pub token_count: usize,
}

/// Bundles `(title, body)` documents in the given order. Token count uses
/// the 4-chars-per-token heuristic.
pub fn ingest_context(docs: &[(String, String)]) -> ContextBundle {
    let mut text = String::new();
    let mut sections = Vec::new();
    for (title, body) in docs {
        sections.push(title.clone());
        text.push_str(&format!("## {title}\n{body}\n"));
    }
    let token_count = text.chars().count() / 4;
    ContextBundle { sections, text, token_count }
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("{agent} may not edit {address}")]
    ScopeViolation { agent: AgentId, address: String },
    #[error("malformed edit: {0}")]
    MalformedEdit(String),
    #[error("malformed plan: {0}")]
    MalformedPlan(String),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("no replay fixture for {0}")]
    FixtureMiss(String),
    #[error("{0} exhausted its repair budget")]
    RepairExhausted(AgentId),
    #[error("bad agent spec: {0}")]
    BadSpec(String),
}

/// What a coder sees when asked to propose or repair.
#[derive(Clone, Debug)]
pub struct CycleContext {
    pub cycle: usize,
    pub seed: u64,
    /// Current target source files (already includes earlier agents' edits
    /// for this cycle when integrating sequentially).
    pub files: BTreeMap<String, String>,
    pub objective: String,
    pub feedback: String,
}

/// Failure evidence handed to `repair`.
#[derive(Clone, Debug)]
pub enum RepairInput {
    Build { log: String },
    Verify { summary: String },
    Rules { violations: Vec<Violation> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    pub endpoint: String,
    pub credential_env: String,
    pub max_tokens: usize,
    pub cost_per_1k_tokens: f64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            credential_env: "EVOSYN_API_KEY".into(),
            max_tokens: 2048,
            cost_per_1k_tokens: 0.015,
        }
    }
}

/// Prompt templates. Kept as plain data so a run directory can version
/// them next to the rulebase.
#[derive(Clone, Debug)]
pub struct PromptPack {
    pub plan: String,
    pub propose: String,
    pub repair: String,
}

impl Default for PromptPack {
    fn default() -> Self {
        PromptPack {
            plan: "You route work for a logic synthesis tool. Coders: flow_agent (flow.ft), \
                   mapper_agent (params.cfg mapper.*), logic_agent (params.cfg rewrite.*/refactor.*). \
                   Reply with JSON {\"chosen_agents\":[...],\"objective_note\":\"...\",\
                   \"rule_change_requests\":[...]}."
                .into(),
            propose: "You are {agent}. You may only edit addresses under: {scope}. \
                      Current files:\n{files}\nObjective: {objective}\nFeedback: {feedback}\n\
                      Reply with JSON {\"hypothesis\":\"...\",\"edits\":[{\"path\":\"...\",\
                      \"set_kv\":{\"key\":\"...\",\"value\":\"...\"}} | {\"path\":\"...\",\
                      \"replace_text\":\"...\"} | {\"path\":\"...\",\"unified_diff\":\"...\"}]}."
                .into(),
            repair: "Your previous change set failed. Evidence:\n{feedback}\n\
                     Fix or revert the offending edits. Same JSON reply format as propose."
                .into(),
        }
    }
}

/// One recorded backend response for the replay backend.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub agent: AgentId,
    pub phase: String,
    pub cycle: usize,
    pub content: String,
    #[serde(default)]
    pub tokens: usize,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ReplayBook {
    pub entries: Vec<ReplayEntry>,
}

impl ReplayBook {
    pub fn from_json(text: &str) -> Result<ReplayBook, serde_json::Error> {
        let entries: Vec<ReplayEntry> = serde_json::from_str(text)?;
        Ok(ReplayBook { entries })
    }
}

/// Front door for all agent queries. Owns backend plumbing; every call,
/// including failed ones, lands in the token ledger.
pub struct Gateway {
    pub llm: LlmConfig,
    pub prompts: PromptPack,
    replay: std::cell::RefCell<Vec<ReplayEntry>>,
}

impl Gateway {
    pub fn new(llm: LlmConfig) -> Gateway {
        Gateway { llm, prompts: PromptPack::default(), replay: std::cell::RefCell::new(Vec::new()) }
    }

    pub fn with_replay(mut self, book: ReplayBook) -> Gateway {
        self.replay = std::cell::RefCell::new(book.entries);
        self
    }

    fn charge(&self, ledger: &mut TokenLedger, agent: AgentId, tokens: usize) {
        let cost = tokens as f64 / 1000.0 * self.llm.cost_per_1k_tokens;
        ledger.record(TokenCategory::Evolution, agent.as_str(), tokens, cost);
    }

    /// Pops the first fixture matching (agent, phase, cycle).
    fn replay_lookup(&self, agent: AgentId, phase: &str, cycle: usize) -> Option<ReplayEntry> {
        let mut book = self.replay.borrow_mut();
        let pos = book
            .iter()
            .position(|e| e.agent == agent && e.phase == phase && e.cycle == cycle)?;
        Some(book.remove(pos))
    }

    fn call_llm(&self, messages: serde_json::Value, model: &str) -> Result<(String, usize), AgentError> {
        let key = std::env::var(&self.llm.credential_env).map_err(|_| {
            AgentError::BackendUnavailable(format!(
                "credential env {} is not set",
                self.llm.credential_env
            ))
        })?;
        let body = serde_json::json!({
            "model": model,
            "messages": messages,
            "max_tokens": self.llm.max_tokens,
        });
        let mut resp = ureq::post(&self.llm.endpoint)
            .header("authorization", &format!("Bearer {key}"))
            .send_json(&body)
            .map_err(|e| AgentError::BackendUnavailable(e.to_string()))?;
        let v: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| AgentError::BackendUnavailable(e.to_string()))?;
        let content = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| AgentError::BackendUnavailable("response has no content".into()))?
            .to_string();
        let tokens = v["usage"]["total_tokens"]
            .as_u64()
            .map(|t| t as usize)
            .unwrap_or_else(|| content.chars().count() / 4);
        Ok((content, tokens))
    }

    /// Runs a plan/propose/repair query against the configured backend and
    /// returns the raw content plus tokens charged.
    fn backend_content(
        &self,
        spec: &AgentSpec,
        phase: &str,
        cycle: usize,
        prompt: String,
        ledger: &mut TokenLedger,
    ) -> Result<String, AgentError> {
        match spec.backend {
            BackendKind::Mock => unreachable!("mock backends never build prompts"),
            BackendKind::Replay => match self.replay_lookup(spec.agent_id, phase, cycle) {
                Some(e) => {
                    self.charge(ledger, spec.agent_id, e.tokens);
                    Ok(e.content)
                }
                None => Err(AgentError::FixtureMiss(format!(
                    "{}/{phase}/cycle {cycle}",
                    spec.agent_id
                ))),
            },
            BackendKind::Llm => {
                let messages = serde_json::json!([
                    {"role": "system", "content": self.prompt_for(phase)},
                    {"role": "user", "content": prompt},
                ]);
                match self.call_llm(messages, &spec.model_name) {
                    Ok((content, tokens)) => {
                        self.charge(ledger, spec.agent_id, tokens);
                        Ok(content)
                    }
                    Err(e) => {
                        // Transport failures still cost the request estimate.
                        self.charge(ledger, spec.agent_id, prompt.chars().count() / 4);
                        Err(e)
                    }
                }
            }
        }
    }

    fn prompt_for(&self, phase: &str) -> &str {
        match phase {
            "plan" => &self.prompts.plan,
            "repair" => &self.prompts.repair,
            _ => &self.prompts.propose,
        }
    }

    /// Asks the planner which coders run this cycle.
    pub fn plan(
        &self,
        spec: &AgentSpec,
        cycle: usize,
        objective: &str,
        bundle: Option<&ContextBundle>,
        ledger: &mut TokenLedger,
    ) -> Result<PlanDecision, AgentError> {
        assert_eq!(spec.agent_id, AgentId::Planner, "plan is a planner query");
        if spec.backend == BackendKind::Mock {
            self.charge(ledger, AgentId::Planner, 80 + cycle % 16);
            let order = [AgentId::FlowAgent, AgentId::LogicAgent, AgentId::MapperAgent];
            let chosen = order[cycle % order.len()];
            return Ok(PlanDecision {
                chosen_agents: vec![chosen],
                objective_note: format!("cycle {cycle}: rotate focus to {chosen}"),
                rule_change_requests: Vec::new(),
            });
        }
        let mut prompt = String::new();
        if cycle == 0 {
            if let Some(b) = bundle {
                prompt.push_str(&b.text);
                prompt.push('\n');
            }
        }
        prompt.push_str(objective);
        let mut last_err = String::new();
        for attempt in 0..2 {
            let p = if attempt == 0 {
                prompt.clone()
            } else {
                format!("{prompt}\nYour previous reply was rejected: {last_err}. Reply with valid JSON only.")
            };
            let content = self.backend_content(spec, "plan", cycle, p, ledger)?;
            match parse_plan(&content) {
                Ok(d) => return Ok(d),
                Err(e) => last_err = e,
            }
        }
        Err(AgentError::MalformedPlan(last_err))
    }

    /// Asks one coder for a change set. Scope is enforced here: a violating
    /// reply is returned to the agent once with the violation as feedback,
    /// then the error surfaces.
    pub fn propose(
        &self,
        spec: &AgentSpec,
        ctx: &CycleContext,
        ledger: &mut TokenLedger,
    ) -> Result<ChangeSet, AgentError> {
        let cs_id = format!("c{}.{}", ctx.cycle, spec.agent_id);
        if spec.backend == BackendKind::Mock {
            self.charge(ledger, spec.agent_id, 120 + ((ctx.seed as usize + ctx.cycle) % 40));
            let cs = mock_proposal(spec.agent_id, ctx, cs_id);
            check_scope(spec, &cs)?;
            return Ok(cs);
        }
        let mut feedback = ctx.feedback.clone();
        for attempt in 0..2 {
            let prompt = self.fill_propose(spec, ctx, &feedback);
            let content = self.backend_content(spec, "propose", ctx.cycle, prompt, ledger)?;
            let cs = parse_changeset(&content, spec.agent_id, &cs_id)?;
            match check_scope(spec, &cs) {
                Ok(()) => return Ok(cs),
                Err(e) if attempt == 0 => feedback = format!("{}\n{e}", ctx.feedback),
                Err(e) => return Err(e),
            }
        }
        unreachable!()
    }

    /// Asks a coder to fix or revert a failed change set.
    pub fn repair(
        &self,
        spec: &AgentSpec,
        failed: &RepairInput,
        cs: &ChangeSet,
        round: usize,
        ctx: &CycleContext,
        ledger: &mut TokenLedger,
    ) -> Result<ChangeSet, AgentError> {
        let cs_id = format!("{}.r{round}", cs.cs_id);
        if spec.backend == BackendKind::Mock {
            self.charge(ledger, spec.agent_id, 60 + round);
            let cs = mock_repair(failed, cs, cs_id);
            check_scope(spec, &cs)?;
            return Ok(cs);
        }
        let feedback = match failed {
            RepairInput::Build { log } => format!("build failed:\n{log}"),
            RepairInput::Verify { summary } => format!("equivalence check failed: {summary}"),
            RepairInput::Rules { violations } => {
                let lines: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
                format!("rule violations:\n{}", lines.join("\n"))
            }
        };
        let prompt = format!(
            "{}\nFailed change set:\n{}\n{}",
            self.fill_propose(spec, ctx, &feedback),
            serde_json::to_string(&cs.edits).unwrap(),
            self.prompts.repair.replace("{feedback}", &feedback),
        );
        let content = self.backend_content(spec, "repair", ctx.cycle, prompt, ledger)?;
        let cs = parse_changeset(&content, spec.agent_id, &cs_id)?;
        check_scope(spec, &cs)?;
        Ok(cs)
    }

    fn fill_propose(&self, spec: &AgentSpec, ctx: &CycleContext, feedback: &str) -> String {
        let mut files = String::new();
        for (path, text) in &ctx.files {
            files.push_str(&format!("--- {path} ---\n{text}\n"));
        }
        self.prompts
            .propose
            .replace("{agent}", spec.agent_id.as_str())
            .replace("{scope}", &spec.scope.join(", "))
            .replace("{files}", &files)
            .replace("{objective}", &ctx.objective)
            .replace("{feedback}", feedback)
    }
}

/// Every edit address must sit under one of the agent's scope prefixes.
pub fn check_scope(spec: &AgentSpec, cs: &ChangeSet) -> Result<(), AgentError> {
    for edit in &cs.edits {
        let addr = edit.address();
        if !spec.scope.iter().any(|p| addr.starts_with(p.as_str())) {
            return Err(AgentError::ScopeViolation { agent: spec.agent_id, address: addr });
        }
    }
    Ok(())
}

/// Deterministic mock mutation schedule, indexed by `(seed + cycle) % 4`.
/// Documented in the README; tests pin individual entries.
fn mock_proposal(agent: AgentId, ctx: &CycleContext, cs_id: String) -> ChangeSet {
    let idx = (ctx.seed as usize + ctx.cycle) % 4;
    let (edits, hypothesis) = match agent {
        AgentId::FlowAgent => {
            let cur = ctx.files.get("flow.ft").cloned().unwrap_or_default();
            let line = ["rewrite", "balance", "refactor", "rewrite zero_cost_replace=true"][idx];
            (
                vec![Edit::replace_text("flow.ft", &format!("{cur}{line}\n"))],
                format!("append a {} pass to the tool flow", line.split(' ').next().unwrap()),
            )
        }
        AgentId::LogicAgent => {
            let (key, value) = [
                ("rewrite.cut_size", "4"),
                ("rewrite.max_cuts_per_node", "16"),
                ("refactor.max_inputs", "5"),
                ("rewrite.zero_cost_replace", "true"),
            ][idx];
            (
                vec![Edit::set_kv("params.cfg", key, value)],
                format!("raise {key} to {value} for deeper restructuring"),
            )
        }
        AgentId::MapperAgent => match idx {
            0 => (
                vec![Edit::set_kv("params.cfg", "mapper.cuts_per_node", "12")],
                "wider cut lists may expose better covers".to_string(),
            ),
            1 => (
                vec![
                    Edit::set_kv("params.cfg", "mapper.area_weight", "0.6"),
                    Edit::set_kv("params.cfg", "mapper.depth_weight", "0.4"),
                ],
                "bias cost toward area".to_string(),
            ),
            2 => (
                vec![Edit::set_kv("params.cfg", "mapper.lut_k", "5")],
                "larger LUTs absorb more logic".to_string(),
            ),
            _ => (
                vec![Edit::set_kv("params.cfg", "mapper.tie_break", "fewest_leaves")],
                "prefer smaller supports on cost ties".to_string(),
            ),
        },
        AgentId::Planner => unreachable!("planner does not propose edits"),
    };
    ChangeSet { cs_id, agent_id: agent, edits, hypothesis, tokens_used: 0 }
}

/// Legal builtin parameter ranges, used by the mock repair clamp.
const BUILD_RANGES: [(&str, f64, f64); 7] = [
    ("rewrite.cut_size", 2.0, 4.0),
    ("rewrite.max_cuts_per_node", 1.0, 64.0),
    ("refactor.max_inputs", 2.0, 6.0),
    ("mapper.lut_k", 2.0, 6.0),
    ("mapper.cuts_per_node", 1.0, 16.0),
    ("mapper.area_weight", 0.0, 1.0),
    ("mapper.depth_weight", 0.0, 1.0),
];

fn clamp_value(key: &str, value: &str, bound: Option<(f64, f64)>) -> Option<String> {
    let (lo, hi) = bound.or_else(|| {
        BUILD_RANGES.iter().find(|(k, _, _)| *k == key).map(|(_, lo, hi)| (*lo, *hi))
    })?;
    let v: f64 = value.parse().ok()?;
    let c = v.clamp(lo, hi);
    if c == v {
        return None;
    }
    if c.fract() == 0.0 && key != "mapper.area_weight" && key != "mapper.depth_weight" {
        Some(format!("{}", c as i64))
    } else {
        Some(format!("{c}"))
    }
}

/// Mock repair: clamp out-of-range values into their legal ranges, drop
/// edits that cannot be fixed that way.
fn mock_repair(failed: &RepairInput, cs: &ChangeSet, cs_id: String) -> ChangeSet {
    let mut edits = Vec::new();
    match failed {
        RepairInput::Rules { violations } => {
            for (i, edit) in cs.edits.iter().enumerate() {
                let hit: Vec<&Violation> =
                    violations.iter().filter(|v| v.edit_index == i).collect();
                if hit.is_empty() {
                    edits.push(edit.clone());
                    continue;
                }
                if let EditKind::SetKv { key, value } = &edit.kind {
                    let bound = hit.iter().find_map(|v| v.bound);
                    if let Some(nv) = clamp_value(key, value, bound) {
                        edits.push(Edit::set_kv(&edit.path, key, &nv));
                    }
                    // unfixable (forbidden key, scope): drop the edit
                }
            }
        }
        RepairInput::Build { .. } => {
            for edit in &cs.edits {
                match &edit.kind {
                    EditKind::SetKv { key, value } => match clamp_value(key, value, None) {
                        Some(nv) => edits.push(Edit::set_kv(&edit.path, key, &nv)),
                        None => edits.push(edit.clone()),
                    },
                    // a text edit that broke the build is reverted
                    _ => {}
                }
            }
        }
        RepairInput::Verify { .. } => {
            // revert everything: functional damage has no local fix
        }
    }
    ChangeSet {
        cs_id,
        agent_id: cs.agent_id,
        edits,
        hypothesis: format!("repair: {}", cs.hypothesis),
        tokens_used: 0,
    }
}

#[derive(Deserialize)]
struct PlanWire {
    chosen_agents: Vec<String>,
    #[serde(default)]
    objective_note: String,
    #[serde(default)]
    rule_change_requests: Vec<String>,
}

fn parse_plan(content: &str) -> Result<PlanDecision, String> {
    let w: PlanWire = serde_json::from_str(content.trim()).map_err(|e| e.to_string())?;
    let mut chosen = Vec::new();
    for name in &w.chosen_agents {
        let id: AgentId = name.parse().map_err(|_| format!("unknown agent {name:?}"))?;
        if id == AgentId::Planner {
            return Err("planner cannot choose itself".into());
        }
        chosen.push(id);
    }
    if chosen.is_empty() {
        return Err("chosen_agents must be non-empty".into());
    }
    Ok(PlanDecision {
        chosen_agents: chosen,
        objective_note: w.objective_note,
        rule_change_requests: w.rule_change_requests,
    })
}

#[derive(Deserialize)]
struct EditWire {
    path: String,
    #[serde(default)]
    set_kv: Option<KvWire>,
    #[serde(default)]
    replace_text: Option<String>,
    #[serde(default)]
    unified_diff: Option<String>,
}

#[derive(Deserialize)]
struct KvWire {
    key: String,
    value: String,
}

#[derive(Deserialize)]
struct ChangeSetWire {
    hypothesis: String,
    edits: Vec<EditWire>,
}

fn parse_changeset(content: &str, agent: AgentId, cs_id: &str) -> Result<ChangeSet, AgentError> {
    let w: ChangeSetWire = serde_json::from_str(content.trim())
        .map_err(|e| AgentError::MalformedEdit(e.to_string()))?;
    if w.hypothesis.trim().is_empty() {
        return Err(AgentError::MalformedEdit("hypothesis must be non-empty".into()));
    }
    let mut edits = Vec::new();
    for e in w.edits {
        let kind = match (e.set_kv, e.replace_text, e.unified_diff) {
            (Some(kv), None, None) => EditKind::SetKv { key: kv.key, value: kv.value },
            (None, Some(text), None) => EditKind::ReplaceText { text },
            (None, None, Some(diff)) => EditKind::UnifiedDiff { diff },
            _ => {
                return Err(AgentError::MalformedEdit(format!(
                    "edit on {:?} must carry exactly one of set_kv/replace_text/unified_diff",
                    e.path
                )))
            }
        };
        edits.push(Edit { path: e.path, kind });
    }
    Ok(ChangeSet {
        cs_id: cs_id.to_string(),
        agent_id: agent,
        edits,
        hypothesis: w.hypothesis,
        tokens_used: 0,
    })
}
