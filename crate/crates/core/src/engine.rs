//! The evolution loop. One champion lineage: each cycle plans, asks coder
//! agents for edits, validates them against the rulebase, builds, gates on
//! full-corpus equivalence (fail closed), evaluates, and integrates or
//! rolls back. Reward is normalized against the fixed cycle-0 baseline.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::agents::{
    ingest_context, validate_specs, AgentId, AgentSpec, ChangeSet, CycleContext, Gateway,
    RepairInput, CODERS,
};
use crate::aig::Aig;
use crate::equiv::{check_equiv, EquivStatus, DEFAULT_CONFLICT_LIMIT};
use crate::harness::{geomean, parallel_map, run_suite, MetricTable, MetricVector, TokenLedger};
use crate::rulebase::{self, ProposalStatus, Rulebase};
use crate::target::{apply_changeset, Target, TargetKind, TargetSource};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleStatus {
    Integrated,
    PartialPreserved,
    RolledBack,
    BuildFailed,
    VerifyFailed,
    EvalFailed,
    Halted,
}

impl CycleStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CycleStatus::Integrated => "integrated",
            CycleStatus::PartialPreserved => "partial_preserved",
            CycleStatus::RolledBack => "rolled_back",
            CycleStatus::BuildFailed => "build_failed",
            CycleStatus::VerifyFailed => "verify_failed",
            CycleStatus::EvalFailed => "eval_failed",
            CycleStatus::Halted => "halted",
        }
    }

    /// Statuses that reset the consecutive-failure counter.
    pub fn is_success(self) -> bool {
        matches!(self, CycleStatus::Integrated | CycleStatus::PartialPreserved)
    }
}

impl std::fmt::Display for CycleStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One journal line. `reward` and `qor_delta` are meaningful only for
/// statuses that reached evaluation; gate failures carry 0 and {}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub cycle: usize,
    pub status: CycleStatus,
    pub changesets: Vec<String>,
    pub reward: f64,
    pub qor_delta: BTreeMap<String, f64>,
    pub revision_id: String,
    pub duration: f64,
    pub note: String,
}

/// Best-so-far revision by normalized ADP (baseline = 1.0). History holds
/// one row per champion change and is append-only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChampionRegistry {
    pub champion_revision: String,
    pub champion_qor: f64,
    pub history: Vec<(usize, String, f64)>,
}

impl ChampionRegistry {
    pub fn new(revision: &str) -> ChampionRegistry {
        ChampionRegistry {
            champion_revision: revision.to_string(),
            champion_qor: 1.0,
            history: vec![(0, revision.to_string(), 1.0)],
        }
    }

    /// Accepts the revision iff it strictly beats the current champion.
    pub fn offer(&mut self, cycle: usize, revision: &str, qor: f64) -> bool {
        if qor < self.champion_qor {
            self.champion_revision = revision.to_string();
            self.champion_qor = qor;
            self.history.push((cycle, revision.to_string(), qor));
            true
        } else {
            false
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum SafetyDecision {
    Continue,
    Halt,
}

/// Halts the run when more than `threshold` consecutive cycles fail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafetyCounter {
    pub consecutive_failures: usize,
    pub threshold: usize,
}

impl SafetyCounter {
    pub fn new(threshold: usize) -> SafetyCounter {
        SafetyCounter { consecutive_failures: 0, threshold }
    }

    pub fn note(&mut self, status: CycleStatus) -> SafetyDecision {
        if status.is_success() {
            self.consecutive_failures = 0;
        } else {
            self.consecutive_failures += 1;
        }
        check_safety(self)
    }
}

pub fn check_safety(counter: &SafetyCounter) -> SafetyDecision {
    if counter.consecutive_failures > counter.threshold {
        SafetyDecision::Halt
    } else {
        SafetyDecision::Continue
    }
}

#[derive(Clone, Debug)]
pub struct EnginePolicy {
    /// Rollback tolerance: reward <= -tau rolls back outright.
    pub tau: f64,
    /// Partial preservation: no primary metric may worsen past 1 + this.
    pub tau_partial: f64,
    pub safety_threshold: usize,
    pub workers: usize,
    pub seed: u64,
    pub conflict_limit: usize,
    pub auto_approve_relaxations: bool,
    pub objective: String,
}

impl Default for EnginePolicy {
    fn default() -> Self {
        EnginePolicy {
            tau: 0.0,
            tau_partial: 0.01,
            safety_threshold: 10,
            workers: 1,
            seed: 0,
            conflict_limit: DEFAULT_CONFLICT_LIMIT,
            auto_approve_relaxations: true,
            objective: "minimize normalized area-delay product over the flow suite".into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("agent configuration: {0}")]
    Config(String),
    #[error("baseline build failed:\n{0}")]
    BaselineBuild(String),
    #[error("baseline evaluation failed: {0}")]
    BaselineEval(String),
    #[error("candidate and baseline tables cover different keys (first difference: {0})")]
    KeyMismatch(String),
    #[error("every (design, flow) key was excluded for a zero area-delay product")]
    ZeroBaseline,
}

const QOR_METRICS: [&str; 6] =
    ["and_count", "depth", "lut_count", "lut_depth", "mapper_area", "mapper_delay"];

fn metric_value(mv: &MetricVector, name: &str) -> f64 {
    match name {
        "and_count" => mv.and_count as f64,
        "depth" => mv.depth as f64,
        "lut_count" => mv.lut_count as f64,
        "lut_depth" => mv.lut_depth as f64,
        "mapper_area" => mv.mapper_area,
        "mapper_delay" => mv.mapper_delay,
        other => unreachable!("unknown metric {other}"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub reward: f64,
    pub qor_delta: BTreeMap<String, f64>,
    /// Keys dropped from the geomean, with the reason.
    pub excluded: Vec<String>,
}

/// Scalar reward = 1 - geomean over (design, flow) keys of the candidate's
/// ADP divided by the baseline's. Zero-ADP keys are excluded and logged;
/// per-metric ratio geomeans land in `qor_delta`.
pub fn compute_reward(
    candidate: &MetricTable,
    baseline: &MetricTable,
) -> Result<RewardBreakdown, EngineError> {
    if !candidate.entries.keys().eq(baseline.entries.keys()) {
        let cand: BTreeSet<_> = candidate.entries.keys().collect();
        let base: BTreeSet<_> = baseline.entries.keys().collect();
        let first = cand
            .symmetric_difference(&base)
            .next()
            .map(|(d, f)| format!("{d}/{f}"))
            .unwrap_or_else(|| "<none>".into());
        return Err(EngineError::KeyMismatch(first));
    }
    let mut ratios = Vec::new();
    let mut excluded = Vec::new();
    for (key, cand) in &candidate.entries {
        let base_adp = baseline.entries[key].adp();
        let cand_adp = cand.adp();
        if base_adp <= 0.0 {
            excluded.push(format!("{}/{}: zero baseline adp", key.0, key.1));
        } else if cand_adp <= 0.0 {
            excluded.push(format!("{}/{}: zero candidate adp", key.0, key.1));
        } else {
            ratios.push(cand_adp / base_adp);
        }
    }
    if ratios.is_empty() {
        return Err(EngineError::ZeroBaseline);
    }
    let reward = 1.0 - geomean(&ratios);
    let mut qor_delta = BTreeMap::new();
    for metric in QOR_METRICS {
        let rs: Vec<f64> = candidate
            .entries
            .iter()
            .filter_map(|(key, cand)| {
                let b = metric_value(&baseline.entries[key], metric);
                let c = metric_value(cand, metric);
                (b > 0.0 && c > 0.0).then(|| c / b)
            })
            .collect();
        if !rs.is_empty() {
            qor_delta.insert(metric.to_string(), geomean(&rs));
        }
    }
    Ok(RewardBreakdown { reward, qor_delta, excluded })
}

/// The integrate decision for a cycle that reached evaluation. Positive
/// reward integrates; reward at or below -tau rolls back; the band between
/// preserves the revision (as working base, never champion) iff a primary
/// metric improved and none worsened past tau_partial.
pub fn integrate_or_rollback(
    reward: f64,
    qor_delta: &BTreeMap<String, f64>,
    policy: &EnginePolicy,
) -> CycleStatus {
    if reward > 0.0 {
        return CycleStatus::Integrated;
    }
    if reward <= -policy.tau {
        return CycleStatus::RolledBack;
    }
    let primaries = ["mapper_area", "mapper_delay"];
    let improved = primaries.iter().any(|m| qor_delta.get(*m).is_some_and(|r| *r < 1.0));
    let worsened =
        primaries.iter().any(|m| qor_delta.get(*m).is_some_and(|r| *r > 1.0 + policy.tau_partial));
    if improved && !worsened {
        CycleStatus::PartialPreserved
    } else {
        CycleStatus::RolledBack
    }
}

enum JobOutcome {
    Measured(MetricVector),
    VerifyFail(String),
    EvalFail(String),
}

pub struct Engine {
    pub specs: Vec<AgentSpec>,
    pub gateway: Gateway,
    pub policy: EnginePolicy,
    /// Working base: candidates build on this revision.
    pub target: Target,
    pub corpus: Vec<(String, Aig)>,
    pub rulebase: Rulebase,
    pub ledger: TokenLedger,
    pub registry: ChampionRegistry,
    pub safety: SafetyCounter,
    /// Fixed cycle-0 metric table every reward is normalized against.
    pub baseline: MetricTable,
    pub journal: Vec<IterationRecord>,
    /// Champion sources by revision id, for snapshotting.
    pub snapshots: BTreeMap<String, TargetSource>,
    /// (title, body) docs bundled into the cycle-0 planning prompt.
    pub context_docs: Vec<(String, String)>,
    /// Ablation: coders held at their cycle-0 state (never scheduled).
    pub pinned: Vec<AgentId>,
    next_cycle: usize,
    feedback: String,
    halted: bool,
}

impl Engine {
    pub fn new(
        specs: Vec<AgentSpec>,
        gateway: Gateway,
        target: Target,
        corpus: Vec<(String, Aig)>,
        rulebase: Rulebase,
        policy: EnginePolicy,
    ) -> Result<Engine, EngineError> {
        validate_specs(&specs).map_err(|e| EngineError::Config(e.to_string()))?;
        if !specs.iter().any(|s| s.agent_id == AgentId::Planner) {
            return Err(EngineError::Config("no planner spec".into()));
        }
        if corpus.is_empty() {
            return Err(EngineError::Config("empty design corpus".into()));
        }
        let build = target.build();
        if !build.is_ok() {
            return Err(EngineError::BaselineBuild(build.log));
        }
        let baseline = run_suite(&target, &corpus, policy.workers, 0)
            .map_err(|e| EngineError::BaselineEval(e.to_string()))?;
        let revision = target.src.revision_id().to_string();
        let registry = ChampionRegistry::new(&revision);
        let mut snapshots = BTreeMap::new();
        snapshots.insert(revision, target.src.clone());
        let safety = SafetyCounter::new(policy.safety_threshold);
        Ok(Engine {
            specs,
            gateway,
            policy,
            target,
            corpus,
            rulebase,
            ledger: TokenLedger::default(),
            registry,
            safety,
            baseline,
            journal: Vec::new(),
            snapshots,
            context_docs: Vec::new(),
            pinned: Vec::new(),
            next_cycle: 0,
            feedback: String::new(),
            halted: false,
        })
    }

    pub fn halted(&self) -> bool {
        self.halted
    }

    fn spec_for(&self, agent: AgentId) -> AgentSpec {
        self.specs
            .iter()
            .find(|s| s.agent_id == agent)
            .cloned()
            .unwrap_or_else(|| panic!("no spec for {agent}"))
    }

    fn record(
        &self,
        cycle: usize,
        status: CycleStatus,
        changesets: Vec<String>,
        revision_id: String,
        note: String,
    ) -> IterationRecord {
        IterationRecord {
            cycle,
            status,
            changesets,
            reward: 0.0,
            qor_delta: BTreeMap::new(),
            revision_id,
            duration: 0.0,
            note,
        }
    }

    /// Runs one cycle and journals it; a safety halt appends an extra
    /// Halted record. Returns the cycle's own record.
    pub fn run_cycle(&mut self) -> IterationRecord {
        assert!(!self.halted, "run_cycle on a halted engine");
        let cycle = self.next_cycle;
        self.next_cycle += 1;
        let record = self.execute_cycle(cycle);
        self.feedback = format!("cycle {cycle}: {} ({})", record.status, record.note);
        self.journal.push(record.clone());
        if self.policy.auto_approve_relaxations {
            self.decide_pending_relaxations();
        }
        if self.safety.note(record.status) == SafetyDecision::Halt {
            self.halted = true;
            let note = format!(
                "safety halt: {} consecutive failures (threshold {})",
                self.safety.consecutive_failures, self.safety.threshold
            );
            let halt = self.record(
                cycle,
                CycleStatus::Halted,
                Vec::new(),
                self.target.src.revision_id().to_string(),
                note,
            );
            self.journal.push(halt);
        }
        record
    }

    /// Runs up to `cycles` more cycles, stopping early on a safety halt.
    pub fn run(&mut self, cycles: usize) -> &[IterationRecord] {
        for _ in 0..cycles {
            if self.halted {
                break;
            }
            self.run_cycle();
        }
        &self.journal
    }

    fn decide_pending_relaxations(&mut self) {
        let pending: Vec<String> = self
            .rulebase
            .proposals
            .iter()
            .filter(|p| p.status == ProposalStatus::Pending)
            .map(|p| p.proposal_id.clone())
            .collect();
        for pid in pending {
            match rulebase::apply_relaxation(&self.rulebase, &pid, true) {
                Ok(rb) => self.rulebase = rb,
                Err(_) => {
                    // out of hard limits or structurally fixed: close it
                    if let Ok(rb) = rulebase::apply_relaxation(&self.rulebase, &pid, false) {
                        self.rulebase = rb;
                    }
                }
            }
        }
    }

    fn execute_cycle(&mut self, cycle: usize) -> IterationRecord {
        let base_src = self.target.src.clone();
        let base_rev = base_src.revision_id().to_string();
        let mut notes: Vec<String> = Vec::new();

        // Plan
        let planner = self.spec_for(AgentId::Planner);
        let bundle = (cycle == 0 && !self.context_docs.is_empty())
            .then(|| ingest_context(&self.context_docs));
        let objective = if self.feedback.is_empty() {
            self.policy.objective.clone()
        } else {
            format!("{}\nlast cycle: {}", self.policy.objective, self.feedback)
        };
        let plan = match self.gateway.plan(
            &planner,
            cycle,
            &objective,
            bundle.as_ref(),
            &mut self.ledger,
        ) {
            Ok(p) => p,
            Err(e) => {
                return self.record(
                    cycle,
                    CycleStatus::BuildFailed,
                    Vec::new(),
                    base_rev,
                    format!("planning failed: {e}"),
                )
            }
        };
        for req in &plan.rule_change_requests {
            if let Some((rule_id, bound)) = parse_rule_request(req) {
                if let Ok(rb) = rulebase::open_proposal(&self.rulebase, &rule_id, bound) {
                    self.rulebase = rb;
                    notes.push(format!("opened relaxation review for {rule_id}"));
                }
            }
        }

        // Ablation pinning: planner choices falling on pinned agents are
        // re-routed to the eligible rotation so pinned levers stay frozen.
        let mut chosen: Vec<AgentId> =
            plan.chosen_agents.iter().copied().filter(|a| !self.pinned.contains(a)).collect();
        if chosen.is_empty() {
            let eligible: Vec<AgentId> =
                CODERS.iter().copied().filter(|a| !self.pinned.contains(a)).collect();
            if eligible.is_empty() {
                return self.record(
                    cycle,
                    CycleStatus::BuildFailed,
                    Vec::new(),
                    base_rev,
                    "every coder is pinned; nothing to schedule".into(),
                );
            }
            let substitute = eligible[cycle % eligible.len()];
            notes.push(format!("planner chose pinned agents; rotated to {substitute}"));
            chosen = vec![substitute];
        }

        // Propose, validate against the rulebase (with repair), apply.
        // Agents are sequential: each sees the previous one's edits.
        let mut src = base_src.clone();
        let mut applied: Vec<ChangeSet> = Vec::new();
        for agent in chosen {
            let spec = self.spec_for(agent);
            let ctx = CycleContext {
                cycle,
                seed: self.policy.seed,
                files: src.files().clone(),
                objective: plan.objective_note.clone(),
                feedback: self.feedback.clone(),
            };
            let mut cs = match self.gateway.propose(&spec, &ctx, &mut self.ledger) {
                Ok(cs) => cs,
                Err(e) => {
                    notes.push(format!("{agent}: proposal failed: {e}"));
                    continue;
                }
            };
            let mut clean = false;
            for round in 0..=spec.max_repair_rounds {
                let violations = rulebase::validate(&cs, &self.rulebase);
                if violations.is_empty() {
                    clean = true;
                    break;
                }
                let mut seen = BTreeSet::new();
                for v in &violations {
                    if seen.insert(v.rule_id.clone()) {
                        if let Ok(rb) = rulebase::record_block(&self.rulebase, &v.rule_id, &cs.cs_id)
                        {
                            self.rulebase = rb;
                        }
                    }
                }
                if round == spec.max_repair_rounds {
                    break;
                }
                let input = RepairInput::Rules { violations };
                cs = match self.gateway.repair(&spec, &input, &cs, round + 1, &ctx, &mut self.ledger)
                {
                    Ok(cs) => cs,
                    Err(e) => {
                        notes.push(format!("{agent}: rule repair failed: {e}"));
                        break;
                    }
                };
            }
            if !clean {
                notes.push(format!("{agent}: change set blocked by rules"));
                continue;
            }
            if cs.edits.is_empty() {
                notes.push(format!("{agent}: empty change set"));
                continue;
            }
            match apply_changeset(&src, &cs, &spec.scope) {
                Ok(next) => {
                    src = next;
                    applied.push(cs);
                }
                Err(e) => notes.push(format!("{agent}: apply failed: {e}")),
            }
        }
        if applied.is_empty() {
            return self.record(
                cycle,
                CycleStatus::BuildFailed,
                Vec::new(),
                base_rev,
                format!("no change set survived validation ({})", notes.join("; ")),
            );
        }

        // Build, with a repair loop over the applied change sets.
        let mut candidate = self.target.with_src(src.clone());
        let mut build = candidate.build();
        let max_rounds =
            applied.iter().map(|cs| self.spec_for(cs.agent_id).max_repair_rounds).max().unwrap_or(0);
        for round in 1..=max_rounds {
            if build.is_ok() {
                break;
            }
            let mut any_repaired = false;
            for cs in applied.iter_mut() {
                let spec = self.spec_for(cs.agent_id);
                let ctx = CycleContext {
                    cycle,
                    seed: self.policy.seed,
                    files: src.files().clone(),
                    objective: plan.objective_note.clone(),
                    feedback: self.feedback.clone(),
                };
                let input = RepairInput::Build { log: build.log.clone() };
                match self.gateway.repair(&spec, &input, cs, round, &ctx, &mut self.ledger) {
                    Ok(repaired) => {
                        *cs = repaired;
                        any_repaired = true;
                    }
                    Err(e) => notes.push(format!("{}: build repair failed: {e}", cs.agent_id)),
                }
            }
            if !any_repaired {
                break;
            }
            let mut rebuilt = base_src.clone();
            let mut apply_ok = true;
            for cs in &applied {
                let scope = self.spec_for(cs.agent_id).scope;
                match apply_changeset(&rebuilt, cs, &scope) {
                    Ok(next) => rebuilt = next,
                    Err(e) => {
                        notes.push(format!("{}: reapply failed: {e}", cs.agent_id));
                        apply_ok = false;
                        break;
                    }
                }
            }
            if !apply_ok {
                break;
            }
            src = rebuilt;
            candidate = self.target.with_src(src.clone());
            build = candidate.build();
        }
        let cs_ids: Vec<String> = applied.iter().map(|cs| cs.cs_id.clone()).collect();
        let cand_rev = candidate.src.revision_id().to_string();
        if !build.is_ok() {
            let head = build.log.lines().next().unwrap_or("").to_string();
            return self.record(cycle, CycleStatus::BuildFailed, cs_ids, cand_rev, head);
        }

        // Verify (full-corpus CEC, fail closed) and evaluate in one fanout.
        let flow_ids: Vec<String> = candidate.suite.keys().cloned().collect();
        let jobs: Vec<(usize, String)> = (0..self.corpus.len())
            .flat_map(|di| flow_ids.iter().map(move |f| (di, f.clone())))
            .collect();
        let corpus = &self.corpus;
        let conflict_limit = self.policy.conflict_limit;
        let cand_ref = &candidate;
        let outcomes = parallel_map(&jobs, self.policy.workers, move |(di, flow_id)| {
            let (design_id, design) = &corpus[*di];
            run_gate_job(cand_ref, design, design_id, flow_id, conflict_limit)
        });
        let mut entries = BTreeMap::new();
        let mut verify_fails = Vec::new();
        let mut eval_fails = Vec::new();
        for ((di, flow_id), outcome) in jobs.iter().zip(outcomes) {
            let design_id = self.corpus[*di].0.clone();
            match outcome {
                JobOutcome::Measured(mv) => {
                    entries.insert((design_id, flow_id.clone()), mv);
                }
                JobOutcome::VerifyFail(why) => {
                    verify_fails.push(format!("{design_id}/{flow_id}: {why}"))
                }
                JobOutcome::EvalFail(why) => {
                    eval_fails.push(format!("{design_id}/{flow_id}: {why}"))
                }
            }
        }
        if !verify_fails.is_empty() {
            verify_fails.sort();
            return self.record(
                cycle,
                CycleStatus::VerifyFailed,
                cs_ids,
                cand_rev,
                format!("equivalence gate: {}", verify_fails.join("; ")),
            );
        }
        if !eval_fails.is_empty() {
            eval_fails.sort();
            return self.record(
                cycle,
                CycleStatus::EvalFailed,
                cs_ids,
                cand_rev,
                format!("evaluation: {}", eval_fails.join("; ")),
            );
        }
        let table = MetricTable { revision_id: cand_rev.clone(), cycle, entries };

        // Reward and the integrate decision.
        let breakdown = match compute_reward(&table, &self.baseline) {
            Ok(b) => b,
            Err(e) => {
                return self.record(
                    cycle,
                    CycleStatus::EvalFailed,
                    cs_ids,
                    cand_rev,
                    format!("reward: {e}"),
                )
            }
        };
        let status = integrate_or_rollback(breakdown.reward, &breakdown.qor_delta, &self.policy);
        match status {
            CycleStatus::Integrated => {
                self.target = candidate;
                let qor = 1.0 - breakdown.reward;
                if self.registry.offer(cycle, &cand_rev, qor) {
                    self.snapshots.insert(cand_rev.clone(), src);
                    notes.push(format!("new champion at qor {qor:.4}"));
                }
            }
            CycleStatus::PartialPreserved => {
                self.target = candidate;
                notes.push("preserved as working base; champion unchanged".into());
            }
            CycleStatus::RolledBack => {
                notes.push("reverted to the previous working base".into());
            }
            _ => unreachable!("integrate decision produced {status}"),
        }
        for line in &breakdown.excluded {
            notes.push(format!("excluded {line}"));
        }
        IterationRecord {
            cycle,
            status,
            changesets: cs_ids,
            reward: breakdown.reward,
            qor_delta: breakdown.qor_delta,
            revision_id: cand_rev,
            duration: 0.0,
            note: notes.join("; "),
        }
    }
}

fn run_gate_job(
    candidate: &Target,
    design: &Aig,
    design_id: &str,
    flow_id: &str,
    conflict_limit: usize,
) -> JobOutcome {
    match &candidate.kind {
        TargetKind::Builtin => {
            let (optimized, mv) = match candidate.optimize_design(design, design_id, flow_id) {
                Ok(pair) => pair,
                Err(e) => return JobOutcome::EvalFail(e.to_string()),
            };
            match check_equiv(design, &optimized, conflict_limit) {
                Ok(v) => match v.status {
                    EquivStatus::Equivalent => JobOutcome::Measured(mv),
                    EquivStatus::NotEquivalent => {
                        let cex = v
                            .counterexample
                            .map(|bits| {
                                bits.iter().map(|b| if *b { '1' } else { '0' }).collect::<String>()
                            })
                            .unwrap_or_default();
                        JobOutcome::VerifyFail(format!("not equivalent, inputs {cex}"))
                    }
                    EquivStatus::ResourceOut => {
                        JobOutcome::VerifyFail("conflict limit hit; failing closed".into())
                    }
                },
                Err(e) => JobOutcome::VerifyFail(format!("checker error ({e}); failing closed")),
            }
        }
        TargetKind::External(_) => {
            let mv = match candidate.evaluate_design(design, design_id, flow_id) {
                Ok(mv) => mv,
                Err(e) => return JobOutcome::EvalFail(e.to_string()),
            };
            match candidate.external_verify(design, design) {
                Ok(true) => JobOutcome::Measured(mv),
                Ok(false) => JobOutcome::VerifyFail("external checker reports a difference".into()),
                Err(e) => JobOutcome::VerifyFail(format!("checker error ({e}); failing closed")),
            }
        }
    }
}

/// `rule_id=lo..hi` from a planner's rule change request.
fn parse_rule_request(req: &str) -> Option<(String, (f64, f64))> {
    let (rule_id, span) = req.split_once('=')?;
    let (lo, hi) = span.split_once("..")?;
    Some((rule_id.trim().to_string(), (lo.trim().parse().ok()?, hi.trim().parse().ok()?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{default_specs, BackendKind, LlmConfig, ReplayBook, ReplayEntry};
    use crate::aig::AigBuilder;
    use crate::target::{default_suite, TargetSource};

    fn mv(area: f64, delay: f64) -> MetricVector {
        MetricVector {
            and_count: 10,
            edge_count: 20,
            depth: 4,
            mapper_area: area,
            mapper_delay: delay,
            lut_count: 3,
            lut_depth: 2,
            cut_total: 30,
            cut_pruned: 2,
            pass_deltas: Vec::new(),
            wall_time: 0.0,
        }
    }

    fn table(cycle: usize, rev: &str, rows: &[(&str, &str, f64, f64)]) -> MetricTable {
        let entries = rows
            .iter()
            .map(|(d, f, a, dl)| ((d.to_string(), f.to_string()), mv(*a, *dl)))
            .collect();
        MetricTable { revision_id: rev.into(), cycle, entries }
    }

    #[test]
    fn identity_reward_is_zero() {
        let t = table(0, "r0", &[("d1", "f1", 3.0, 2.0), ("d2", "f1", 5.0, 4.0)]);
        let b = compute_reward(&t, &t).unwrap();
        assert!(b.reward.abs() < 1e-12);
        for (_, r) in &b.qor_delta {
            assert!((r - 1.0).abs() < 1e-12);
        }
        assert!(b.excluded.is_empty());
    }

    #[test]
    fn uniform_ratio_reproduces_the_headline_reward() {
        let base = table(0, "r0", &[("d1", "f1", 3.0, 2.0), ("d2", "f1", 5.0, 4.0)]);
        let mut cand = base.clone();
        for v in cand.entries.values_mut() {
            v.mapper_area *= 0.917;
        }
        let b = compute_reward(&cand, &base).unwrap();
        assert!((b.reward - 0.083).abs() < 1e-9, "reward {}", b.reward);
        assert!((b.qor_delta["mapper_area"] - 0.917).abs() < 1e-9);
        assert!((b.qor_delta["mapper_delay"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reciprocal_ratios_cancel_exactly() {
        let base = table(0, "r0", &[("d1", "f1", 1.0, 1.0), ("d2", "f1", 1.0, 1.0)]);
        let mut cand = base.clone();
        cand.entries.get_mut(&("d1".into(), "f1".into())).unwrap().mapper_area = 0.8;
        cand.entries.get_mut(&("d2".into(), "f1".into())).unwrap().mapper_area = 1.25;
        let b = compute_reward(&cand, &base).unwrap();
        assert!(b.reward.abs() < 1e-12, "reward {}", b.reward);
    }

    #[test]
    fn reward_is_scale_consistent() {
        let base = table(0, "r0", &[("d1", "f1", 3.0, 2.0), ("d2", "f2", 5.0, 4.0)]);
        let mut cand = base.clone();
        cand.entries.get_mut(&("d1".into(), "f1".into())).unwrap().mapper_area = 2.4;
        cand.entries.get_mut(&("d2".into(), "f2".into())).unwrap().mapper_delay = 3.1;
        let b1 = compute_reward(&cand, &base).unwrap();
        let scale = 37.0;
        let mut base2 = base.clone();
        let mut cand2 = cand.clone();
        for t in [&mut base2, &mut cand2] {
            for v in t.entries.values_mut() {
                v.mapper_area *= scale;
            }
        }
        let b2 = compute_reward(&cand2, &base2).unwrap();
        assert!((b1.reward - b2.reward).abs() < 1e-12);
        for (k, r) in &b1.qor_delta {
            assert!((r - b2.qor_delta[k]).abs() < 1e-12, "{k}");
        }
    }

    #[test]
    fn differing_grids_are_a_key_mismatch() {
        let base = table(0, "r0", &[("d1", "f1", 3.0, 2.0)]);
        let cand = table(0, "r1", &[("d1", "f2", 3.0, 2.0)]);
        assert!(matches!(compute_reward(&cand, &base), Err(EngineError::KeyMismatch(_))));
    }

    #[test]
    fn zero_baseline_keys_are_excluded_not_fatal() {
        let mut base = table(0, "r0", &[("d1", "f1", 0.0, 2.0), ("d2", "f1", 5.0, 4.0)]);
        let mut cand = base.clone();
        cand.entries.get_mut(&("d2".into(), "f1".into())).unwrap().mapper_area = 2.5;
        let b = compute_reward(&cand, &base).unwrap();
        assert_eq!(b.excluded, vec!["d1/f1: zero baseline adp"]);
        assert!((b.reward - 0.5).abs() < 1e-12);
        // every key zero is an error
        base.entries.get_mut(&("d2".into(), "f1".into())).unwrap().mapper_area = 0.0;
        assert!(matches!(compute_reward(&cand, &base), Err(EngineError::ZeroBaseline)));
    }

    #[test]
    fn integrate_decision_follows_the_sign_and_band_rules() {
        let policy = EnginePolicy { tau: 0.01, ..EnginePolicy::default() };
        let mut qd = BTreeMap::new();
        qd.insert("mapper_area".to_string(), 1.004);
        qd.insert("mapper_delay".to_string(), 0.96);
        assert_eq!(integrate_or_rollback(0.05, &qd, &policy), CycleStatus::Integrated);
        assert_eq!(integrate_or_rollback(-0.2, &qd, &policy), CycleStatus::RolledBack);
        assert_eq!(integrate_or_rollback(-0.001, &qd, &policy), CycleStatus::PartialPreserved);
        // a primary metric past 1 + tau_partial forfeits preservation
        qd.insert("mapper_area".to_string(), 1.02);
        assert_eq!(integrate_or_rollback(-0.001, &qd, &policy), CycleStatus::RolledBack);
        // no primary improvement forfeits it too
        qd.insert("mapper_area".to_string(), 1.0);
        qd.insert("mapper_delay".to_string(), 1.0);
        assert_eq!(integrate_or_rollback(-0.001, &qd, &policy), CycleStatus::RolledBack);
        // tau 0 leaves no band at all
        let strict = EnginePolicy::default();
        qd.insert("mapper_delay".to_string(), 0.96);
        assert_eq!(integrate_or_rollback(-0.001, &qd, &strict), CycleStatus::RolledBack);
        assert_eq!(integrate_or_rollback(0.0, &qd, &strict), CycleStatus::RolledBack);
    }

    #[test]
    fn safety_counter_halts_past_the_threshold() {
        let mut c = SafetyCounter::new(10);
        for i in 1..=10 {
            assert_eq!(c.note(CycleStatus::RolledBack), SafetyDecision::Continue, "failure {i}");
        }
        assert_eq!(c.note(CycleStatus::BuildFailed), SafetyDecision::Halt);
        // success resets
        let mut c = SafetyCounter::new(10);
        for _ in 0..10 {
            c.note(CycleStatus::VerifyFailed);
        }
        assert_eq!(c.note(CycleStatus::PartialPreserved), SafetyDecision::Continue);
        assert_eq!(c.consecutive_failures, 0);
    }

    #[test]
    fn champion_registry_keeps_the_minimum() {
        let mut r = ChampionRegistry::new("r0");
        assert!(r.offer(1, "r1", 0.95));
        assert!(!r.offer(2, "r2", 0.97));
        assert!(!r.offer(3, "r3", 0.95));
        assert!(r.offer(4, "r4", 0.90));
        assert_eq!(r.champion_revision, "r4");
        assert_eq!(r.history.len(), 3);
        let qors: Vec<f64> = r.history.iter().map(|(_, _, q)| *q).collect();
        assert!(qors.windows(2).all(|w| w[1] < w[0]));
    }

    fn small_corpus() -> Vec<(String, Aig)> {
        let mut designs = Vec::new();
        for n in [4usize, 5, 6] {
            let mut b = AigBuilder::new(n, 0);
            let mut acc = b.input(0);
            for k in 1..n {
                acc = if k % 2 == 0 { b.and(acc, b.input(k)) } else { b.xor(acc, b.input(k)) };
            }
            designs.push((format!("mix{n}"), b.finish(vec![acc], vec![])));
        }
        designs
    }

    fn mock_engine(seed: u64) -> Engine {
        let specs = default_specs(BackendKind::Mock, "mock");
        let gateway = Gateway::new(LlmConfig::default());
        let target = Target::builtin(TargetSource::builtin_default(), default_suite());
        let policy = EnginePolicy { seed, ..EnginePolicy::default() };
        Engine::new(specs, gateway, target, small_corpus(), rulebase::default_rulebase(), policy)
            .unwrap()
    }

    #[test]
    fn mock_run_is_deterministic() {
        let mut a = mock_engine(7);
        let mut b = mock_engine(7);
        a.run(3);
        b.run(3);
        assert_eq!(a.journal.len(), 3);
        let ja = serde_json::to_string(&a.journal).unwrap();
        let jb = serde_json::to_string(&b.journal).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn mock_run_keeps_champion_monotone_and_verified() {
        let mut e = mock_engine(0);
        e.run(6);
        assert_eq!(e.journal.len(), 6);
        let qors: Vec<f64> = e.registry.history.iter().map(|(_, _, q)| *q).collect();
        assert!(qors.windows(2).all(|w| w[1] < w[0]), "history {qors:?}");
        // every champion revision after the seed entry maps to an
        // Integrated journal record
        for (cycle, rev, _) in &e.registry.history[1..] {
            let rec = e.journal.iter().find(|r| r.cycle == *cycle).unwrap();
            assert_eq!(rec.status, CycleStatus::Integrated);
            assert_eq!(&rec.revision_id, rev);
            assert!(e.snapshots.contains_key(rev));
        }
    }

    #[test]
    fn fault_injecting_flow_trips_the_gate_and_is_discarded() {
        let plan = r#"{"chosen_agents":["flow_agent"],"objective_note":"x","rule_change_requests":[]}"#;
        let cs = r#"{"hypothesis":"swap sites","edits":[{"path":"flow.ft","replace_text":"rewrite fault_xor=true\n"}]}"#;
        let book = ReplayBook {
            entries: vec![
                ReplayEntry {
                    agent: AgentId::Planner,
                    phase: "plan".into(),
                    cycle: 0,
                    content: plan.into(),
                    tokens: 10,
                },
                ReplayEntry {
                    agent: AgentId::FlowAgent,
                    phase: "propose".into(),
                    cycle: 0,
                    content: cs.into(),
                    tokens: 10,
                },
            ],
        };
        let specs = default_specs(BackendKind::Replay, "replay");
        let gateway = Gateway::new(LlmConfig::default()).with_replay(book);
        let target = Target::builtin(TargetSource::builtin_default(), default_suite());
        let mut e = Engine::new(
            specs,
            gateway,
            target,
            small_corpus(),
            rulebase::default_rulebase(),
            EnginePolicy::default(),
        )
        .unwrap();
        let base_rev = e.target.src.revision_id().to_string();
        let rec = e.run_cycle();
        assert_eq!(rec.status, CycleStatus::VerifyFailed);
        assert!(rec.note.contains("not equivalent"), "note: {}", rec.note);
        assert_eq!(e.target.src.revision_id(), base_rev);
        assert_eq!(e.registry.history.len(), 1);
    }

    #[test]
    fn pending_relaxations_are_decided_after_the_cycle() {
        let mut e = mock_engine(0);
        e.rulebase = rulebase::open_proposal(&e.rulebase, "bound.rewrite.cut_size", (2.0, 4.0))
            .unwrap();
        e.rulebase =
            rulebase::open_proposal(&e.rulebase, "bound.refactor.max_inputs", (2.0, 9.0)).unwrap();
        e.run_cycle();
        let p1 = &e.rulebase.proposals[0];
        let p2 = &e.rulebase.proposals[1];
        assert_eq!(p1.status, ProposalStatus::Approved);
        assert_eq!(p2.status, ProposalStatus::Rejected);
        let r = e.rulebase.rules.iter().find(|r| r.rule_id == "bound.rewrite.cut_size").unwrap();
        assert_eq!(r.bound, Some((2.0, 4.0)));
    }

    #[test]
    fn pinned_agents_are_never_scheduled() {
        let mut e = mock_engine(0);
        e.pinned = vec![AgentId::FlowAgent];
        e.run(4);
        let base_flow = TargetSource::builtin_default().get("flow.ft").unwrap().to_string();
        assert_eq!(e.target.src.get("flow.ft").unwrap(), base_flow);
        for rec in &e.journal {
            for cs in &rec.changesets {
                assert!(!cs.contains("flow_agent"), "flow agent ran: {cs}");
            }
        }
    }
}
