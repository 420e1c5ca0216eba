//! Target adapter: an immutable snapshot of the tool-under-evolution's
//! source, functional change set application, and build/evaluate entry
//! points for the builtin tool and external command-driven targets.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{ChangeSet, EditKind};
use crate::aig::Aig;
use crate::harness::MetricVector;
use crate::mapper::{map, MapParams};
use crate::passes::{run_flow, FlowScript, PassParams};

/// Flow id to flow-script text. The evaluation suite is fixed for a run;
/// agents evolve `flow.ft`, never the suite.
pub type FlowSuite = BTreeMap<String, String>;

/// The eight stock evaluation flows.
pub fn default_suite() -> FlowSuite {
    let mut suite = FlowSuite::new();
    suite.insert("f0_raw".into(), String::new());
    suite.insert("f1_balance".into(), "balance\n".into());
    suite.insert("f2_rewrite".into(), "rewrite\n".into());
    suite.insert("f3_refactor".into(), "refactor\n".into());
    suite.insert("f4_rewrite_balance".into(), "rewrite\nbalance\n".into());
    suite.insert("f5_refactor_balance".into(), "refactor\nbalance\n".into());
    suite.insert("f6_full".into(), "rewrite\nrefactor\nbalance\n".into());
    suite.insert(
        "f7_full_deep".into(),
        "rewrite cut_size=4 max_cuts_per_node=16\nrefactor refactor_max_inputs=6\nbalance\n".into(),
    );
    suite
}

/// Immutable snapshot of the target's editable files. The revision id is
/// a content hash: equal content, equal id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSource {
    files: BTreeMap<String, String>,
    revision_id: String,
}

impl TargetSource {
    pub fn new(files: BTreeMap<String, String>) -> TargetSource {
        let revision_id = Self::hash(&files);
        TargetSource { files, revision_id }
    }

    fn hash(files: &BTreeMap<String, String>) -> String {
        let mut h = Sha256::new();
        for (path, text) in files {
            h.update(path.as_bytes());
            h.update([0u8]);
            h.update((text.len() as u64).to_le_bytes());
            h.update(text.as_bytes());
            h.update([0xffu8]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn files(&self) -> &BTreeMap<String, String> {
        &self.files
    }

    pub fn get(&self, path: &str) -> Option<&str> {
        self.files.get(path).map(|s| s.as_str())
    }

    pub fn revision_id(&self) -> &str {
        &self.revision_id
    }

    /// Stock builtin tool: a one-pass preamble flow and default parameters.
    pub fn builtin_default() -> TargetSource {
        let mut files = BTreeMap::new();
        files.insert("flow.ft".to_string(), DEFAULT_FLOW.to_string());
        files.insert("params.cfg".to_string(), DEFAULT_PARAMS.to_string());
        TargetSource::new(files)
    }

    /// Reads every regular file under `dir` (relative paths, `/` separators).
    pub fn from_dir(dir: &Path) -> std::io::Result<TargetSource> {
        fn walk(
            root: &Path,
            dir: &Path,
            files: &mut BTreeMap<String, String>,
        ) -> std::io::Result<()> {
            for entry in std::fs::read_dir(dir)? {
                let entry = entry?;
                let path = entry.path();
                if path.is_dir() {
                    walk(root, &path, files)?;
                } else {
                    let rel = path
                        .strip_prefix(root)
                        .expect("walk stays under root")
                        .components()
                        .map(|c| c.as_os_str().to_string_lossy().into_owned())
                        .collect::<Vec<_>>()
                        .join("/");
                    files.insert(rel, std::fs::read_to_string(&path)?);
                }
            }
            Ok(())
        }
        let mut files = BTreeMap::new();
        walk(dir, dir, &mut files)?;
        Ok(TargetSource::new(files))
    }

    /// Writes the snapshot into `dir`, creating subdirectories as needed.
    pub fn materialize(&self, dir: &Path) -> std::io::Result<()> {
        for (rel, text) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, text)?;
        }
        Ok(())
    }
}

pub const DEFAULT_FLOW: &str = "balance\n";

pub const DEFAULT_PARAMS: &str = "\
# builtin synthesis tool parameters
rewrite.cut_size=3
rewrite.max_cuts_per_node=8
rewrite.zero_cost_replace=false
rewrite.fault_xor=false
refactor.max_inputs=4
mapper.lut_k=4
mapper.cuts_per_node=8
mapper.area_weight=0.5
mapper.depth_weight=0.5
mapper.tie_break=lowest_level
";

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildStatus {
    Ok,
    Failed,
}

/// Outcome of building one revision. A failed build always carries a
/// diagnostic log; failure is data, not an error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildResult {
    pub status: BuildStatus,
    pub log: String,
    pub duration: f64,
}

impl BuildResult {
    pub fn ok(log: String, duration: f64) -> BuildResult {
        BuildResult { status: BuildStatus::Ok, log, duration }
    }

    pub fn failed(log: String, duration: f64) -> BuildResult {
        assert!(!log.trim().is_empty(), "a failed build must explain itself");
        BuildResult { status: BuildStatus::Failed, log, duration }
    }

    pub fn is_ok(&self) -> bool {
        self.status == BuildStatus::Ok
    }
}

/// One evaluation unit, as fanned out by the harness and the engine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalJob {
    pub design_id: String,
    pub flow_id: String,
    pub metric: Option<MetricVector>,
}

#[derive(Debug, thiserror::Error)]
pub enum TargetError {
    #[error("edit {index} targets {address}, which is outside the allowed scope")]
    PathOutsideScope { index: usize, address: String },
    #[error("edit {index} is malformed: {detail}")]
    MalformedEdit { index: usize, detail: String },
    #[error("flow {flow_id} failed on {design_id}: {detail}")]
    FlowFailure { design_id: String, flow_id: String, detail: String },
    #[error("could not interpret tool output: {0}")]
    ParseFailure(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Applies a change set to a snapshot, producing a new snapshot. The input
/// is untouched; an identical-content result keeps the same revision id.
/// `scope` re-asserts the proposing agent's address prefixes.
pub fn apply_changeset(
    src: &TargetSource,
    cs: &ChangeSet,
    scope: &[String],
) -> Result<TargetSource, TargetError> {
    let mut files = src.files.clone();
    for (index, edit) in cs.edits.iter().enumerate() {
        let address = edit.address();
        let path_ok = !edit.path.starts_with('/')
            && !edit.path.is_empty()
            && edit.path.split('/').all(|c| !c.is_empty() && c != "." && c != "..");
        let in_scope = scope.iter().any(|p| address.starts_with(p.as_str()));
        if !path_ok || !in_scope {
            return Err(TargetError::PathOutsideScope { index, address });
        }
        match &edit.kind {
            EditKind::SetKv { key, value } => {
                let text = files.get(&edit.path).ok_or_else(|| TargetError::MalformedEdit {
                    index,
                    detail: format!("set_kv target {} does not exist", edit.path),
                })?;
                files.insert(edit.path.clone(), set_kv_line(text, key, value));
            }
            EditKind::ReplaceText { text } => {
                files.insert(edit.path.clone(), text.clone());
            }
            EditKind::UnifiedDiff { diff } => {
                let text = files.get(&edit.path).ok_or_else(|| TargetError::MalformedEdit {
                    index,
                    detail: format!("diff target {} does not exist", edit.path),
                })?;
                let new = apply_unified_diff(text, diff)
                    .map_err(|detail| TargetError::MalformedEdit { index, detail })?;
                files.insert(edit.path.clone(), new);
            }
        }
    }
    Ok(TargetSource::new(files))
}

/// Replaces the first `key=...` line, preserving everything else; appends
/// the pair if the key is absent.
fn set_kv_line(text: &str, key: &str, value: &str) -> String {
    let mut out = String::new();
    let mut replaced = false;
    for line in text.lines() {
        let is_match = !replaced
            && line
                .split_once('=')
                .map(|(k, _)| k.trim() == key)
                .unwrap_or(false);
        if is_match {
            out.push_str(&format!("{key}={value}\n"));
            replaced = true;
        } else {
            out.push_str(line);
            out.push('\n');
        }
    }
    if !replaced {
        out.push_str(&format!("{key}={value}\n"));
    }
    out
}

/// Strict line-based unified diff application: every context and deletion
/// line must match the target exactly. The result is newline-terminated.
fn apply_unified_diff(old: &str, diff: &str) -> Result<String, String> {
    fn parse_range(tok: &str) -> Result<(usize, usize), String> {
        let tok = &tok[1..]; // strip - or +
        match tok.split_once(',') {
            Some((a, b)) => Ok((
                a.parse().map_err(|_| format!("bad hunk range {tok:?}"))?,
                b.parse().map_err(|_| format!("bad hunk range {tok:?}"))?,
            )),
            None => Ok((tok.parse().map_err(|_| format!("bad hunk range {tok:?}"))?, 1)),
        }
    }

    let old_lines: Vec<&str> = old.lines().collect();
    let mut out: Vec<String> = Vec::new();
    let mut pos = 0usize;
    let mut in_hunk = false;
    for line in diff.lines() {
        if line.starts_with("--- ") || line.starts_with("+++ ") || line.starts_with('\\') {
            continue;
        }
        if let Some(header) = line.strip_prefix("@@") {
            let header = header.trim_end_matches(|c| c != '@').trim_end_matches('@').trim();
            let mut toks = header.split_whitespace();
            let (old_start, old_len) =
                parse_range(toks.next().ok_or_else(|| format!("bad hunk header {line:?}"))?)?;
            // a zero-length old side addresses the gap after line `old_start`
            let start = if old_len == 0 { old_start } else { old_start.saturating_sub(1) };
            if start < pos {
                return Err("hunks out of order".to_string());
            }
            if start > old_lines.len() {
                return Err(format!("hunk starts past end of file at line {old_start}"));
            }
            while pos < start {
                out.push(old_lines[pos].to_string());
                pos += 1;
            }
            in_hunk = true;
            continue;
        }
        if !in_hunk {
            continue;
        }
        match line.chars().next() {
            Some(' ') | None => {
                let want = if line.is_empty() { "" } else { &line[1..] };
                if pos >= old_lines.len() || old_lines[pos] != want {
                    return Err(format!(
                        "context mismatch at line {}: expected {:?}",
                        pos + 1,
                        want
                    ));
                }
                out.push(old_lines[pos].to_string());
                pos += 1;
            }
            Some('-') => {
                if pos >= old_lines.len() || old_lines[pos] != &line[1..] {
                    return Err(format!(
                        "deletion mismatch at line {}: expected {:?}",
                        pos + 1,
                        &line[1..]
                    ));
                }
                pos += 1;
            }
            Some('+') => out.push(line[1..].to_string()),
            _ => return Err(format!("unexpected diff line {line:?}")),
        }
    }
    while pos < old_lines.len() {
        out.push(old_lines[pos].to_string());
        pos += 1;
    }
    let mut text = out.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    Ok(text)
}

/// Translates `PassParams`/`MapParams` field names back to config keys for
/// diagnostics.
fn cfg_key(key: &str) -> String {
    match key {
        "cut_size" => "rewrite.cut_size".into(),
        "max_cuts_per_node" => "rewrite.max_cuts_per_node".into(),
        "zero_cost_replace" => "rewrite.zero_cost_replace".into(),
        "fault_xor" => "rewrite.fault_xor".into(),
        "refactor_max_inputs" => "refactor.max_inputs".into(),
        other => format!("mapper.{other}"),
    }
}

/// Parses `params.cfg`: `namespace.key=value` lines under the `rewrite`,
/// `refactor` and `mapper` namespaces, `#` comments, blank lines allowed.
pub fn parse_builtin_params(text: &str) -> Result<(PassParams, MapParams), String> {
    let mut pp = PassParams::default();
    let mut mp = MapParams::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let body = body.trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| format!("line {line}: expected key=value, got {body:?}"))?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| format!("line {line}: bad value {value:?} for {what}");
        match key {
            "rewrite.cut_size" => pp.cut_size = value.parse().map_err(|_| bad(key))?,
            "rewrite.max_cuts_per_node" => {
                pp.max_cuts_per_node = value.parse().map_err(|_| bad(key))?
            }
            "rewrite.zero_cost_replace" => {
                pp.zero_cost_replace = value.parse().map_err(|_| bad(key))?
            }
            "rewrite.fault_xor" => pp.fault_xor = value.parse().map_err(|_| bad(key))?,
            "refactor.max_inputs" => pp.refactor_max_inputs = value.parse().map_err(|_| bad(key))?,
            k => match k.strip_prefix("mapper.") {
                Some(mk) => mp
                    .set(mk, value)
                    .map_err(|e| format!("line {line}: mapper.{mk}: {e}"))?,
                None => return Err(format!("line {line}: unknown parameter {key:?}")),
            },
        }
    }
    pp.validate().map_err(|e| match e {
        crate::passes::PassError::BadParam { key, msg } => format!("{}: {msg}", cfg_key(key)),
        other => other.to_string(),
    })?;
    mp.validate().map_err(|e| match e {
        crate::mapper::MapError::BadParam { key, msg } => format!("mapper.{key}: {msg}"),
        other => other.to_string(),
    })?;
    Ok((pp, mp))
}

/// External target plumbing: shell command templates run in a materialized
/// copy of the source tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalConfig {
    pub build_cmd: String,
    /// Template with `{design}` and `{flow}` placeholders; must print a
    /// JSON metrics object on stdout.
    pub run_cmd: String,
    /// Template with `{a}` and `{b}` placeholders; must print EQUIVALENT
    /// or NOT_EQUIVALENT as its first stdout token.
    pub verify_cmd: String,
    /// Path (inside the source tree) of the JSON map from MetricVector
    /// field names to dotted keys in the run_cmd output.
    pub metrics_schema: String,
    pub timeout_secs: u64,
}

impl Default for ExternalConfig {
    fn default() -> Self {
        ExternalConfig {
            build_cmd: "true".into(),
            run_cmd: String::new(),
            verify_cmd: String::new(),
            metrics_schema: "metrics_schema.json".into(),
            timeout_secs: 300,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TargetKind {
    Builtin,
    External(ExternalConfig),
}

/// A buildable, evaluable target: source snapshot plus the fixed flow
/// suite it is judged under.
#[derive(Clone, Debug)]
pub struct Target {
    pub kind: TargetKind,
    pub src: TargetSource,
    pub suite: FlowSuite,
}

impl Target {
    pub fn builtin(src: TargetSource, suite: FlowSuite) -> Target {
        Target { kind: TargetKind::Builtin, src, suite }
    }

    /// Replaces the snapshot, keeping kind and suite.
    pub fn with_src(&self, src: TargetSource) -> Target {
        Target { kind: self.kind.clone(), src, suite: self.suite.clone() }
    }

    /// Parses and validates the source. Never panics on bad input; a bad
    /// revision is a Failed result whose log names the offender.
    pub fn build(&self) -> BuildResult {
        match &self.kind {
            TargetKind::Builtin => self.build_builtin(),
            TargetKind::External(cfg) => self.build_external(cfg),
        }
    }

    fn build_builtin(&self) -> BuildResult {
        let mut log = String::new();
        let params_text = match self.src.get("params.cfg") {
            Some(t) => t,
            None => return BuildResult::failed("params.cfg is missing".into(), 0.0),
        };
        let (pp, _mp) = match parse_builtin_params(params_text) {
            Ok(x) => x,
            Err(e) => return BuildResult::failed(format!("params.cfg: {e}"), 0.0),
        };
        let flow_text = match self.src.get("flow.ft") {
            Some(t) => t,
            None => return BuildResult::failed("flow.ft is missing".into(), 0.0),
        };
        match FlowScript::parse_with(flow_text, &pp) {
            Ok(fs) => log.push_str(&format!("flow.ft: {} steps\n", fs.steps.len())),
            Err(e) => return BuildResult::failed(format!("flow.ft: {e}"), 0.0),
        }
        for (flow_id, text) in &self.suite {
            if let Err(e) = FlowScript::parse_with(text, &pp) {
                return BuildResult::failed(format!("suite flow {flow_id}: {e}"), 0.0);
            }
        }
        log.push_str(&format!("params ok, {} suite flows\n", self.suite.len()));
        BuildResult::ok(log, 0.0)
    }

    fn build_external(&self, cfg: &ExternalConfig) -> BuildResult {
        let started = Instant::now();
        let dir = match tempfile::tempdir() {
            Ok(d) => d,
            Err(e) => return BuildResult::failed(format!("workdir: {e}"), 0.0),
        };
        if let Err(e) = self.src.materialize(dir.path()) {
            return BuildResult::failed(format!("materialize: {e}"), 0.0);
        }
        match run_shell(&cfg.build_cmd, dir.path(), Duration::from_secs(cfg.timeout_secs)) {
            Ok(run) => {
                let duration = started.elapsed().as_secs_f64();
                let log = format!("{}{}", run.stdout, run.stderr);
                if run.success {
                    BuildResult::ok(log, duration)
                } else {
                    let log = if log.trim().is_empty() {
                        format!("build command failed: {}", cfg.build_cmd)
                    } else {
                        log
                    };
                    BuildResult::failed(log, duration)
                }
            }
            Err(e) => BuildResult::failed(format!("build command: {e}"), 0.0),
        }
    }

    /// Runs the tool flow, then the named suite flow, then maps. Returns
    /// the optimized graph alongside its metrics (builtin targets only).
    pub fn optimize_design(
        &self,
        design: &Aig,
        design_id: &str,
        flow_id: &str,
    ) -> Result<(Aig, MetricVector), TargetError> {
        match &self.kind {
            TargetKind::Builtin => self.builtin_eval(design, design_id, flow_id),
            TargetKind::External(_) => Err(TargetError::ParseFailure(
                "external targets do not expose optimized graphs".into(),
            )),
        }
    }

    /// Deterministic metric evaluation for one (design, flow) pair.
    pub fn evaluate_design(
        &self,
        design: &Aig,
        design_id: &str,
        flow_id: &str,
    ) -> Result<MetricVector, TargetError> {
        match &self.kind {
            TargetKind::Builtin => {
                self.builtin_eval(design, design_id, flow_id).map(|(_, mv)| mv)
            }
            TargetKind::External(cfg) => self.external_eval(cfg, design, design_id, flow_id),
        }
    }

    fn builtin_eval(
        &self,
        design: &Aig,
        design_id: &str,
        flow_id: &str,
    ) -> Result<(Aig, MetricVector), TargetError> {
        let fail = |detail: String| TargetError::FlowFailure {
            design_id: design_id.to_string(),
            flow_id: flow_id.to_string(),
            detail,
        };
        let params_text = self
            .src
            .get("params.cfg")
            .ok_or_else(|| TargetError::ParseFailure("params.cfg is missing".into()))?;
        let (pp, mp) = parse_builtin_params(params_text).map_err(TargetError::ParseFailure)?;
        let flow_text = self
            .src
            .get("flow.ft")
            .ok_or_else(|| TargetError::ParseFailure("flow.ft is missing".into()))?;
        let tool_flow = FlowScript::parse_with(flow_text, &pp).map_err(|e| fail(e.to_string()))?;
        let suite_text = self
            .suite
            .get(flow_id)
            .ok_or_else(|| TargetError::ParseFailure(format!("unknown flow {flow_id:?}")))?;
        let suite_flow =
            FlowScript::parse_with(suite_text, &pp).map_err(|e| fail(e.to_string()))?;
        let (g1, mut deltas) = run_flow(design, &tool_flow).map_err(|e| fail(e.to_string()))?;
        let (g2, d2) = run_flow(&g1, &suite_flow).map_err(|e| fail(e.to_string()))?;
        deltas.extend(d2);
        assert_eq!(
            g2.num_latches(),
            design.num_latches(),
            "optimization must preserve the latch count"
        );
        let m = g2.metrics();
        let (mapping, stats) = map(&g2, &mp);
        let mv = MetricVector {
            and_count: m.and_count,
            edge_count: m.edge_count,
            depth: m.depth,
            mapper_area: mapping.mapper_area,
            mapper_delay: mapping.mapper_delay,
            lut_count: mapping.lut_count,
            lut_depth: mapping.lut_depth,
            cut_total: stats.total_cuts,
            cut_pruned: stats.pruned_cuts,
            pass_deltas: deltas,
            wall_time: 0.0,
        };
        Ok((g2, mv))
    }

    fn external_eval(
        &self,
        cfg: &ExternalConfig,
        design: &Aig,
        design_id: &str,
        flow_id: &str,
    ) -> Result<MetricVector, TargetError> {
        let started = Instant::now();
        let dir = tempfile::tempdir()?;
        self.src.materialize(dir.path())?;
        let design_file = format!("{design_id}.aag");
        std::fs::write(dir.path().join(&design_file), crate::aig::write_aiger(design))?;
        let cmd = cfg.run_cmd.replace("{design}", &design_file).replace("{flow}", flow_id);
        let run = run_shell(&cmd, dir.path(), Duration::from_secs(cfg.timeout_secs))?;
        if !run.success {
            return Err(TargetError::FlowFailure {
                design_id: design_id.to_string(),
                flow_id: flow_id.to_string(),
                detail: format!("run command failed: {}{}", run.stdout, run.stderr),
            });
        }
        let schema_text = self.src.get(&cfg.metrics_schema).ok_or_else(|| {
            TargetError::ParseFailure(format!("metrics schema {} is missing", cfg.metrics_schema))
        })?;
        let schema: BTreeMap<String, String> = serde_json::from_str(schema_text)
            .map_err(|e| TargetError::ParseFailure(format!("metrics schema: {e}")))?;
        let out: serde_json::Value = serde_json::from_str(run.stdout.trim()).map_err(|e| {
            TargetError::ParseFailure(format!("run command output is not JSON: {e}"))
        })?;
        let mut mv = MetricVector {
            and_count: 0,
            edge_count: 0,
            depth: 0,
            mapper_area: 0.0,
            mapper_delay: 0.0,
            lut_count: 0,
            lut_depth: 0,
            cut_total: 0,
            cut_pruned: 0,
            pass_deltas: Vec::new(),
            wall_time: started.elapsed().as_secs_f64(),
        };
        for (field, key) in &schema {
            let v = json_lookup(&out, key).and_then(|v| v.as_f64()).ok_or_else(|| {
                TargetError::ParseFailure(format!("no numeric value at {key:?} for {field}"))
            })?;
            match field.as_str() {
                "and_count" => mv.and_count = v as usize,
                "edge_count" => mv.edge_count = v as usize,
                "depth" => mv.depth = v as usize,
                "mapper_area" => mv.mapper_area = v,
                "mapper_delay" => mv.mapper_delay = v,
                "lut_count" => mv.lut_count = v as usize,
                "lut_depth" => mv.lut_depth = v as usize,
                "cut_total" => mv.cut_total = v as usize,
                "cut_pruned" => mv.cut_pruned = v as usize,
                other => {
                    return Err(TargetError::ParseFailure(format!(
                        "metrics schema names unknown field {other:?}"
                    )))
                }
            }
        }
        Ok(mv)
    }

    /// Equivalence query through the external verify command. `a` and `b`
    /// are written as AIGER files into the materialized tree.
    pub fn external_verify(&self, a: &Aig, b: &Aig) -> Result<bool, TargetError> {
        let cfg = match &self.kind {
            TargetKind::External(cfg) => cfg,
            TargetKind::Builtin => {
                return Err(TargetError::ParseFailure(
                    "builtin targets verify through the equivalence checker".into(),
                ))
            }
        };
        let dir = tempfile::tempdir()?;
        self.src.materialize(dir.path())?;
        std::fs::write(dir.path().join("a.aag"), crate::aig::write_aiger(a))?;
        std::fs::write(dir.path().join("b.aag"), crate::aig::write_aiger(b))?;
        let cmd = cfg.verify_cmd.replace("{a}", "a.aag").replace("{b}", "b.aag");
        let run = run_shell(&cmd, dir.path(), Duration::from_secs(cfg.timeout_secs))?;
        match run.stdout.split_whitespace().next() {
            Some("EQUIVALENT") => Ok(true),
            Some("NOT_EQUIVALENT") => Ok(false),
            other => Err(TargetError::ParseFailure(format!(
                "verify command printed {other:?}, expected EQUIVALENT or NOT_EQUIVALENT"
            ))),
        }
    }
}

fn json_lookup<'a>(v: &'a serde_json::Value, path: &str) -> Option<&'a serde_json::Value> {
    path.split('.').try_fold(v, |acc, k| acc.get(k))
}

struct ShellRun {
    success: bool,
    stdout: String,
    stderr: String,
}

/// Runs a shell command with a hard wall-clock limit; a timed-out child is
/// killed and reported as a failure, never an error.
fn run_shell(cmd: &str, cwd: &Path, timeout: Duration) -> std::io::Result<ShellRun> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()?;
    let mut out_pipe = child.stdout.take().expect("stdout piped");
    let mut err_pipe = child.stderr.take().expect("stderr piped");
    let out_h = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = out_pipe.read_to_string(&mut s);
        s
    });
    let err_h = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = err_pipe.read_to_string(&mut s);
        s
    });
    let started = Instant::now();
    let mut timed_out = false;
    let status = loop {
        if let Some(st) = child.try_wait()? {
            break Some(st);
        }
        if started.elapsed() >= timeout {
            let _ = child.kill();
            let _ = child.wait();
            timed_out = true;
            break None;
        }
        std::thread::sleep(Duration::from_millis(10));
    };
    let stdout = out_h.join().unwrap_or_default();
    let mut stderr = err_h.join().unwrap_or_default();
    if timed_out {
        stderr.push_str(&format!("\ncommand timed out after {}s\n", timeout.as_secs()));
    }
    Ok(ShellRun { success: status.map(|s| s.success()).unwrap_or(false), stdout, stderr })
}
