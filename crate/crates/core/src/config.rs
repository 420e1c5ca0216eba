//! Run configuration: one declarative `key = value` text file. Paths are
//! resolved against the config file's directory; credentials come from the
//! environment variable the config names, never from the file itself.

use std::path::{Path, PathBuf};

use crate::agents::{AgentId, BackendKind, LlmConfig};
use crate::passes::{FlowScript, PassParams};
use crate::target::{ExternalConfig, FlowSuite};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// "builtin" or "external".
    pub target_kind: String,
    /// Target source directory; None uses the builtin default source.
    pub target_path: Option<PathBuf>,
    pub corpus_path: PathBuf,
    pub flows_path: PathBuf,
    pub cycles: usize,
    pub workers: usize,
    pub seed: u64,
    pub safety_threshold: usize,
    pub tau: f64,
    pub tau_partial: f64,
    pub auto_approve_relaxations: bool,
    pub backend: BackendKind,
    pub model: String,
    pub max_repair_rounds: usize,
    pub rulebase_path: PathBuf,
    pub out_dir: PathBuf,
    pub llm: LlmConfig,
    /// Directory of context documents bundled into the first planning call.
    pub context_docs_path: Option<PathBuf>,
    /// Fixture book for the replay backend.
    pub replay_path: Option<PathBuf>,
    /// Coders held at their cycle-0 state.
    pub ablation_pin: Vec<AgentId>,
    pub external: ExternalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            target_kind: "builtin".into(),
            target_path: None,
            corpus_path: "corpus".into(),
            flows_path: "flows.lst".into(),
            cycles: 10,
            workers: 4,
            seed: 0,
            safety_threshold: 10,
            tau: 0.0,
            tau_partial: 0.01,
            auto_approve_relaxations: true,
            backend: BackendKind::Mock,
            model: "mock".into(),
            max_repair_rounds: 3,
            rulebase_path: "rules.txt".into(),
            out_dir: "out".into(),
            llm: LlmConfig::default(),
            context_docs_path: None,
            replay_path: None,
            ablation_pin: Vec::new(),
            external: ExternalConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Bad { line: usize, msg: String },
    #[error("config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn bad(line: usize, msg: impl Into<String>) -> ConfigError {
    ConfigError::Bad { line, msg: msg.into() }
}

/// Parses the config text. Relative paths resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    cfg.corpus_path = base_dir.join("corpus");
    cfg.flows_path = base_dir.join("flows.lst");
    cfg.rulebase_path = base_dir.join("rules.txt");
    cfg.out_dir = base_dir.join("out");
    let rel = |v: &str| -> PathBuf {
        let p = PathBuf::from(v);
        if p.is_absolute() {
            p
        } else {
            base_dir.join(p)
        }
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let body = body.trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| bad(line, "expected key = value"))?;
        let parse_usize =
            |v: &str| v.parse::<usize>().map_err(|_| bad(line, format!("bad count {v:?}")));
        let parse_f64 =
            |v: &str| v.parse::<f64>().map_err(|_| bad(line, format!("bad number {v:?}")));
        let parse_bool = |v: &str| match v {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(bad(line, format!("bad flag {v:?}, want true/false"))),
        };
        match key {
            "target.kind" => match value {
                "builtin" | "external" => cfg.target_kind = value.into(),
                _ => return Err(bad(line, format!("bad target kind {value:?}"))),
            },
            "target.path" => cfg.target_path = Some(rel(value)),
            "corpus.path" => cfg.corpus_path = rel(value),
            "flows.path" => cfg.flows_path = rel(value),
            "run.cycles" => cfg.cycles = parse_usize(value)?,
            "run.workers" => cfg.workers = parse_usize(value)?,
            "run.seed" => {
                cfg.seed = value.parse().map_err(|_| bad(line, format!("bad seed {value:?}")))?
            }
            "run.safety_threshold" => cfg.safety_threshold = parse_usize(value)?,
            "run.tau" => cfg.tau = parse_f64(value)?,
            "run.tau_partial" => cfg.tau_partial = parse_f64(value)?,
            "run.auto_approve_relaxations" => cfg.auto_approve_relaxations = parse_bool(value)?,
            "agents.backend" => {
                cfg.backend =
                    value.parse().map_err(|_| bad(line, format!("bad backend {value:?}")))?
            }
            "agents.model" => cfg.model = value.into(),
            "agents.max_repair_rounds" => cfg.max_repair_rounds = parse_usize(value)?,
            "rulebase.path" => cfg.rulebase_path = rel(value),
            "out.dir" => cfg.out_dir = rel(value),
            "llm.endpoint" => cfg.llm.endpoint = value.into(),
            "llm.credential_env" => cfg.llm.credential_env = value.into(),
            "llm.max_tokens" => cfg.llm.max_tokens = parse_usize(value)?,
            "llm.cost_per_1k_tokens" => cfg.llm.cost_per_1k_tokens = parse_f64(value)?,
            "context.docs" => cfg.context_docs_path = Some(rel(value)),
            "replay.path" => cfg.replay_path = Some(rel(value)),
            "ablation.pin" => {
                cfg.ablation_pin = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| {
                        s.trim()
                            .parse::<AgentId>()
                            .map_err(|_| bad(line, format!("unknown agent {s:?}")))
                    })
                    .collect::<Result<_, _>>()?
            }
            "external.build_cmd" => cfg.external.build_cmd = value.into(),
            "external.run_cmd" => cfg.external.run_cmd = value.into(),
            "external.verify_cmd" => cfg.external.verify_cmd = value.into(),
            "external.metrics_schema" => cfg.external.metrics_schema = value.into(),
            "external.timeout_secs" => {
                cfg.external.timeout_secs = parse_usize(value)? as u64;
            }
            other => return Err(bad(line, format!("unknown key {other:?}"))),
        }
    }
    check(&cfg)?;
    Ok(cfg)
}

fn check(cfg: &RunConfig) -> Result<(), ConfigError> {
    if cfg.cycles < 1 {
        return Err(ConfigError::Invalid("run.cycles must be at least 1".into()));
    }
    if cfg.workers < 1 {
        return Err(ConfigError::Invalid("run.workers must be at least 1".into()));
    }
    if cfg.target_kind == "external" {
        if cfg.external.run_cmd.is_empty() || cfg.external.verify_cmd.is_empty() {
            return Err(ConfigError::Invalid(
                "external targets need external.run_cmd and external.verify_cmd".into(),
            ));
        }
        if cfg.target_path.is_none() {
            return Err(ConfigError::Invalid("external targets need target.path".into()));
        }
    }
    if cfg.backend == BackendKind::Replay && cfg.replay_path.is_none() {
        return Err(ConfigError::Invalid("the replay backend needs replay.path".into()));
    }
    Ok(())
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base)
}

/// The scaffold config written by `init`: every knob listed, defaults
/// spelled out, byte-stable.
pub fn default_config_text() -> String {
    "\
# run configuration: key = value, '#' comments.
# paths are relative to this file's directory.

target.kind = builtin
corpus.path = corpus
flows.path = flows.lst
rulebase.path = rules.txt
out.dir = out

run.cycles = 10
run.workers = 4
run.seed = 0
run.safety_threshold = 10
run.tau = 0
run.tau_partial = 0.01
run.auto_approve_relaxations = true

agents.backend = mock
agents.model = mock
agents.max_repair_rounds = 3

context.docs = docs

# llm backend (credentials come from the named environment variable)
llm.endpoint = https://api.openai.com/v1/chat/completions
llm.credential_env = EVOSYN_API_KEY
llm.max_tokens = 2048
llm.cost_per_1k_tokens = 0.015

# external target hooks (unused while target.kind = builtin)
# target.path = tool_src
# external.build_cmd = make -C .
# external.run_cmd = ./tool run {design} {flow}
# external.verify_cmd = ./tool cec {a} {b}
# external.metrics_schema = metrics_schema.json
# external.timeout_secs = 300
"
    .to_string()
}

/// Reads a flows list: one flow-script path per line ('#' comments); the
/// flow id is the file stem. Each script is syntax-checked.
pub fn load_flows(path: &Path) -> Result<FlowSuite, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut suite = FlowSuite::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let body = body.trim();
        if body.is_empty() {
            continue;
        }
        let fpath = base.join(body);
        let id = fpath
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .filter(|s| !s.is_empty())
            .ok_or_else(|| bad(line, format!("bad flow path {body:?}")))?;
        let script = std::fs::read_to_string(&fpath)
            .map_err(|e| bad(line, format!("{}: {e}", fpath.display())))?;
        FlowScript::parse_with(&script, &PassParams::default())
            .map_err(|e| bad(line, format!("{id}: {e}")))?;
        if suite.insert(id.clone(), script).is_some() {
            return Err(bad(line, format!("duplicate flow id {id:?}")));
        }
    }
    if suite.is_empty() {
        return Err(ConfigError::Invalid(format!("no flows listed in {}", path.display())));
    }
    Ok(suite)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaffold_text_parses_to_defaults() {
        let base = Path::new("/tmp/cfgtest");
        let cfg = parse_config(&default_config_text(), base).unwrap();
        assert_eq!(cfg.target_kind, "builtin");
        assert_eq!(cfg.cycles, 10);
        assert_eq!(cfg.workers, 4);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.backend, BackendKind::Mock);
        assert_eq!(cfg.corpus_path, base.join("corpus"));
        assert_eq!(cfg.out_dir, base.join("out"));
        assert_eq!(cfg.context_docs_path, Some(base.join("docs")));
        assert!(cfg.auto_approve_relaxations);
        assert!((cfg.tau_partial - 0.01).abs() < 1e-12);
    }

    #[test]
    fn unknown_keys_and_junk_name_their_line() {
        let err = parse_config("run.cycles = 3\nnot a pair\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = parse_config("run.bogus = 3\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("unknown key"), "{err}");
    }

    #[test]
    fn zero_counts_are_rejected() {
        assert!(parse_config("run.cycles = 0\n", Path::new(".")).is_err());
        assert!(parse_config("run.workers = 0\n", Path::new(".")).is_err());
    }

    #[test]
    fn external_kind_requires_commands_and_a_path() {
        let err = parse_config("target.kind = external\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("external"), "{err}");
        let ok = parse_config(
            "target.kind = external\ntarget.path = src\n\
             external.run_cmd = ./t run {design} {flow}\nexternal.verify_cmd = ./t cec {a} {b}\n",
            Path::new("/base"),
        )
        .unwrap();
        assert_eq!(ok.target_path, Some(PathBuf::from("/base/src")));
    }

    #[test]
    fn replay_backend_requires_a_book() {
        assert!(parse_config("agents.backend = replay\n", Path::new(".")).is_err());
        let ok =
            parse_config("agents.backend = replay\nreplay.path = book.json\n", Path::new("."))
                .unwrap();
        assert_eq!(ok.replay_path, Some(PathBuf::from("./book.json")));
    }

    #[test]
    fn pins_values_and_comments_parse() {
        let cfg = parse_config(
            "ablation.pin = flow_agent, mapper_agent\nrun.seed = 42 # inline comment\n",
            Path::new("."),
        )
        .unwrap();
        assert_eq!(cfg.ablation_pin, vec![AgentId::FlowAgent, AgentId::MapperAgent]);
        assert_eq!(cfg.seed, 42);
        assert!(parse_config("ablation.pin = nobody\n", Path::new(".")).is_err());
    }

    #[test]
    fn flows_list_loads_and_syntax_checks() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("flows")).unwrap();
        std::fs::write(dir.path().join("flows/f1_balance.ft"), "balance\n").unwrap();
        std::fs::write(dir.path().join("flows/f2_deep.ft"), "rewrite cut_size=4\nbalance\n")
            .unwrap();
        let lst = dir.path().join("flows.lst");
        std::fs::write(&lst, "# suite\nflows/f1_balance.ft\nflows/f2_deep.ft\n").unwrap();
        let suite = load_flows(&lst).unwrap();
        assert_eq!(suite.len(), 2);
        assert_eq!(suite["f1_balance"], "balance\n");

        std::fs::write(dir.path().join("flows/broken.ft"), "frobnicate\n").unwrap();
        std::fs::write(&lst, "flows/broken.ft\n").unwrap();
        let err = load_flows(&lst).unwrap_err();
        assert!(err.to_string().contains("broken"), "{err}");
    }
}
