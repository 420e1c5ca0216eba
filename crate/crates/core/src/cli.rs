//! Command-line driver: `init` scaffolding, `run` for evolution cycles,
//! `verify` as a standalone equivalence checker, and `report` over run
//! outputs. Exit codes are a stable contract:
//!
//! 0 success, 1 config or input error, 2 init target not empty,
//! 3 safety halt, 4 not equivalent, 5 resource limit hit.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::agents::{default_specs, AgentId, BackendKind, Gateway, ReplayBook, CODERS};
use crate::aig::parse_aiger;
use crate::config::{default_config_text, load_config, load_flows, RunConfig};
use crate::corpus::{default_corpus, load_corpus, save_corpus};
use crate::engine::{Engine, EnginePolicy, IterationRecord};
use crate::equiv::{check_equiv, EquivStatus, DEFAULT_CONFLICT_LIMIT};
use crate::harness::{
    account, ablation_table, emit_ablation_csv, emit_ablation_json, emit_account_csv,
    emit_account_json, emit_table_json, run_suite, MetricTable, TokenLedger,
};
use crate::rulebase::{self, default_rulebase};
use crate::target::{default_suite, Target, TargetKind, TargetSource};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DIR_NOT_EMPTY: i32 = 2;
pub const EXIT_HALT: i32 = 3;
pub const EXIT_NOT_EQUIVALENT: i32 = 4;
pub const EXIT_RESOURCE_OUT: i32 = 5;

#[derive(Parser)]
#[command(name = "evosyn", version, about = "self-evolving logic synthesis playground")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Scaffold a working directory: config, rulebase, flows, corpus, docs
    Init { dir: PathBuf },
    /// Run evolution cycles from a config file
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        cycles: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Force mock agent backends regardless of the config
        #[arg(long)]
        mock: bool,
        /// Comma-separated ablation labels; each names the enabled coder
        /// set: vanilla, flow, mapper, logic, combos like flow+mapper, all
        #[arg(long)]
        ablation: Option<String>,
        /// Override the configured output directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check two AIGER files for equivalence
    Verify {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CONFLICT_LIMIT)]
        conflict_limit: usize,
    },
    /// Summarize run outputs from the output directory
    Report {
        #[arg(value_parser = ["champion", "account", "ablation"])]
        kind: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
        format: String,
    },
}

pub fn run_cli(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return EXIT_OK;
        }
        Err(e) => {
            eprint!("{e}");
            return EXIT_CONFIG;
        }
    };
    match cli.cmd {
        Cmd::Init { dir } => cmd_init(&dir),
        Cmd::Run { config, cycles, workers, seed, mock, ablation, out } => {
            let mut cfg = match load_config(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return EXIT_CONFIG;
                }
            };
            if let Some(n) = cycles {
                cfg.cycles = n;
            }
            if let Some(n) = workers {
                cfg.workers = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if mock {
                cfg.backend = BackendKind::Mock;
            }
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            if cfg.cycles < 1 || cfg.workers < 1 {
                eprintln!("config error: cycles and workers must be at least 1");
                return EXIT_CONFIG;
            }
            match cmd_run(&cfg, ablation.as_deref()) {
                Ok(halted) => {
                    if halted {
                        EXIT_HALT
                    } else {
                        EXIT_OK
                    }
                }
                Err(e) => {
                    eprintln!("config error: {e}");
                    EXIT_CONFIG
                }
            }
        }
        Cmd::Verify { a, b, conflict_limit } => cmd_verify(&a, &b, conflict_limit),
        Cmd::Report { kind, out, format } => match cmd_report(&kind, &out, &format) {
            Ok(text) => {
                print!("{text}");
                EXIT_OK
            }
            Err(e) => {
                eprintln!("report error: {e}");
                EXIT_CONFIG
            }
        },
    }
}

const DOC_OVERVIEW: &str = "\
# Tool overview

The target is a small logic synthesis flow: and-inverter graph in,
optimization passes, k-LUT mapping out. Candidates are judged by the
area-delay product of the mapped result over the benchmark suite.
";

const DOC_TOOL_NOTES: &str = "\
# Editing notes

flow.ft is the optimization pass script, one pass per line with optional
key=value overrides. params.cfg holds namespaced rewrite/refactor/mapper
parameters. Every edit must keep the build green and preserve circuit
equivalence; the checker gates every cycle.
";

pub fn cmd_init(dir: &Path) -> i32 {
    if dir.exists() {
        if !dir.is_dir() {
            eprintln!("init: {} exists and is not a directory", dir.display());
            return EXIT_DIR_NOT_EMPTY;
        }
        match std::fs::read_dir(dir) {
            Ok(mut entries) => {
                if entries.next().is_some() {
                    eprintln!("init: {} is not empty", dir.display());
                    return EXIT_DIR_NOT_EMPTY;
                }
            }
            Err(e) => {
                eprintln!("init: {}: {e}", dir.display());
                return EXIT_CONFIG;
            }
        }
    }
    let scaffold = || -> std::io::Result<()> {
        std::fs::create_dir_all(dir.join("flows"))?;
        std::fs::create_dir_all(dir.join("docs"))?;
        std::fs::write(dir.join("config.txt"), default_config_text())?;
        std::fs::write(dir.join("rules.txt"), rulebase::to_text(&default_rulebase()))?;
        let mut lst = String::new();
        for (id, text) in default_suite() {
            std::fs::write(dir.join("flows").join(format!("{id}.ft")), text)?;
            lst.push_str(&format!("flows/{id}.ft\n"));
        }
        std::fs::write(dir.join("flows.lst"), lst)?;
        save_corpus(&dir.join("corpus"), &default_corpus())?;
        std::fs::write(dir.join("docs/overview.md"), DOC_OVERVIEW)?;
        std::fs::write(dir.join("docs/tool_notes.md"), DOC_TOOL_NOTES)?;
        Ok(())
    };
    match scaffold() {
        Ok(()) => {
            println!("initialized {}", dir.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("init: {e}");
            EXIT_CONFIG
        }
    }
}

/// Builds an engine from a loaded config. `pinned` freezes those coders.
pub fn build_engine(cfg: &RunConfig, pinned: Vec<AgentId>) -> Result<Engine, String> {
    let corpus = load_corpus(&cfg.corpus_path)
        .map_err(|e| format!("corpus {}: {e}", cfg.corpus_path.display()))?;
    if corpus.is_empty() {
        return Err(format!("corpus {}: no .aag designs found", cfg.corpus_path.display()));
    }
    let suite =
        load_flows(&cfg.flows_path).map_err(|e| format!("flows: {e}"))?;
    let src = match &cfg.target_path {
        Some(p) => TargetSource::from_dir(p).map_err(|e| format!("target {}: {e}", p.display()))?,
        None => TargetSource::builtin_default(),
    };
    let target = if cfg.target_kind == "external" {
        Target { kind: TargetKind::External(cfg.external.clone()), src, suite }
    } else {
        Target::builtin(src, suite)
    };
    let rb = if cfg.rulebase_path.exists() {
        let text = std::fs::read_to_string(&cfg.rulebase_path)
            .map_err(|e| format!("rulebase {}: {e}", cfg.rulebase_path.display()))?;
        rulebase::from_text(&text).map_err(|e| format!("rulebase: {e}"))?
    } else {
        default_rulebase()
    };
    let mut specs = default_specs(cfg.backend, &cfg.model);
    for s in &mut specs {
        s.max_repair_rounds = cfg.max_repair_rounds;
    }
    let mut gateway = Gateway::new(cfg.llm.clone());
    if cfg.backend == BackendKind::Replay {
        let path = cfg.replay_path.as_ref().expect("checked by config");
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("replay book {}: {e}", path.display()))?;
        let book = ReplayBook::from_json(&text).map_err(|e| format!("replay book: {e}"))?;
        gateway = gateway.with_replay(book);
    }
    let policy = EnginePolicy {
        tau: cfg.tau,
        tau_partial: cfg.tau_partial,
        safety_threshold: cfg.safety_threshold,
        workers: cfg.workers,
        seed: cfg.seed,
        auto_approve_relaxations: cfg.auto_approve_relaxations,
        ..EnginePolicy::default()
    };
    let mut engine =
        Engine::new(specs, gateway, target, corpus, rb, policy).map_err(|e| e.to_string())?;
    if let Some(docs_dir) = &cfg.context_docs_path {
        engine.context_docs = load_context_docs(docs_dir)?;
    }
    engine.pinned = pinned;
    Ok(engine)
}

fn load_context_docs(dir: &Path) -> Result<Vec<(String, String)>, String> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| format!("docs {}: {e}", dir.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let mut docs = Vec::new();
    for p in paths {
        let title = p.file_name().unwrap_or_default().to_string_lossy().to_string();
        let body =
            std::fs::read_to_string(&p).map_err(|e| format!("docs {}: {e}", p.display()))?;
        docs.push((title, body));
    }
    Ok(docs)
}

/// Runs the engine for the configured cycle budget, streaming journal
/// lines as they land. Returns the engine and whether it halted.
fn run_engine(cfg: &RunConfig, pinned: Vec<AgentId>, journal_path: &Path) -> Result<(Engine, bool), String> {
    let mut engine = build_engine(cfg, pinned)?;
    let mut journal = std::fs::File::create(journal_path)
        .map_err(|e| format!("{}: {e}", journal_path.display()))?;
    let mut written = 0;
    for _ in 0..cfg.cycles {
        if engine.halted() {
            break;
        }
        let rec = engine.run_cycle();
        println!(
            "cycle {}: {} reward {:.4} [{}]",
            rec.cycle,
            rec.status,
            rec.reward,
            rec.changesets.join(", ")
        );
        while written < engine.journal.len() {
            let line = serde_json::to_string(&engine.journal[written])
                .expect("journal records serialize");
            writeln!(journal, "{line}").map_err(|e| format!("journal write: {e}"))?;
            written += 1;
        }
    }
    journal.flush().map_err(|e| format!("journal write: {e}"))?;
    let halted = engine.halted();
    Ok((engine, halted))
}

/// The champion's metric table, evaluated fresh from its snapshot.
fn champion_table(engine: &Engine) -> Result<MetricTable, String> {
    let src = engine
        .snapshots
        .get(&engine.registry.champion_revision)
        .ok_or_else(|| "champion snapshot missing".to_string())?;
    let target = engine.target.with_src(src.clone());
    run_suite(&target, &engine.corpus, engine.policy.workers, engine.journal.len())
        .map_err(|e| e.to_string())
}

fn write_run_outputs(engine: &Engine, out_dir: &Path) -> Result<(), String> {
    let w = |name: &str, text: String| -> Result<(), String> {
        std::fs::write(out_dir.join(name), text).map_err(|e| format!("{name}: {e}"))
    };
    let ledger_json =
        serde_json::to_string_pretty(&engine.ledger).expect("ledger serializes");
    w("ledger.json", ledger_json + "\n")?;
    w("account.csv", emit_account_csv(&account(&engine.ledger)))?;
    w("champion.csv", emit_champion_csv(&engine.registry.history))?;
    let table = champion_table(engine)?;
    w("champion_table.json", emit_table_json(&table) + "\n")?;
    w("rules.txt", rulebase::to_text(&engine.rulebase))?;
    let mut events = String::new();
    for ev in &engine.rulebase.journal {
        events.push_str(&serde_json::to_string(ev).expect("rule events serialize"));
        events.push('\n');
    }
    w("rules_journal.jsonl", events)?;
    for (rev, src) in &engine.snapshots {
        let dir = out_dir.join("snapshots").join(rev);
        std::fs::create_dir_all(&dir).map_err(|e| format!("snapshots: {e}"))?;
        src.materialize(&dir).map_err(|e| format!("snapshots: {e}"))?;
    }
    Ok(())
}

/// Short ablation label → pinned (frozen) coder set. The label names the
/// agents allowed to evolve.
fn label_pins(label: &str) -> Result<Vec<AgentId>, String> {
    let enabled: Vec<AgentId> = match label {
        "all" => CODERS.to_vec(),
        "vanilla" => Vec::new(),
        spec => spec
            .split('+')
            .map(|part| match part.trim() {
                "flow" => Ok(AgentId::FlowAgent),
                "mapper" => Ok(AgentId::MapperAgent),
                "logic" => Ok(AgentId::LogicAgent),
                other => Err(format!("unknown ablation label part {other:?}")),
            })
            .collect::<Result<_, _>>()?,
    };
    Ok(CODERS.iter().copied().filter(|a| !enabled.contains(a)).collect())
}

fn cmd_run(cfg: &RunConfig, ablation: Option<&str>) -> Result<bool, String> {
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| format!("{}: {e}", cfg.out_dir.display()))?;
    let Some(labels) = ablation else {
        let (engine, halted) = run_engine(cfg, cfg.ablation_pin.clone(), &cfg.out_dir.join("journal.jsonl"))?;
        write_run_outputs(&engine, &cfg.out_dir)?;
        println!(
            "champion {} qor {:.4}",
            engine.registry.champion_revision, engine.registry.champion_qor
        );
        return Ok(halted);
    };
    let tables_dir = cfg.out_dir.join("tables");
    std::fs::create_dir_all(&tables_dir).map_err(|e| format!("tables: {e}"))?;
    let mut results: BTreeMap<String, MetricTable> = BTreeMap::new();
    let mut any_halt = false;
    for label in labels.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let pins = label_pins(label)?;
        let frozen = pins.len() == CODERS.len();
        let mut cfg_label = cfg.clone();
        if frozen {
            // nothing can evolve: the champion is the initial revision
            cfg_label.cycles = 1;
        }
        let (engine, halted) = if frozen {
            (build_engine(&cfg_label, pins)?, false)
        } else {
            let journal = cfg.out_dir.join(format!("journal_{label}.jsonl"));
            run_engine(&cfg_label, pins, &journal)?
        };
        any_halt |= halted;
        let table = champion_table(&engine)?;
        std::fs::write(tables_dir.join(format!("{label}.json")), emit_table_json(&table) + "\n")
            .map_err(|e| format!("tables: {e}"))?;
        results.insert(label.to_string(), table);
        println!("ablation {label}: champion qor {:.4}", engine.registry.champion_qor);
    }
    let baseline = if results.contains_key("vanilla") {
        "vanilla".to_string()
    } else {
        results.keys().next().cloned().unwrap_or_default()
    };
    let rows = ablation_table(&results, &baseline).map_err(|e| e.to_string())?;
    std::fs::write(cfg.out_dir.join("ablation.csv"), emit_ablation_csv(&rows))
        .map_err(|e| format!("ablation.csv: {e}"))?;
    Ok(any_halt)
}

pub fn cmd_verify(a: &Path, b: &Path, conflict_limit: usize) -> i32 {
    let load = |p: &Path| -> Result<crate::aig::Aig, String> {
        let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
        parse_aiger(&text).map_err(|e| format!("{}: {e}", p.display()))
    };
    let (ga, gb) = match (load(a), load(b)) {
        (Ok(ga), Ok(gb)) => (ga, gb),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("verify: {e}");
            return EXIT_CONFIG;
        }
    };
    match check_equiv(&ga, &gb, conflict_limit) {
        Ok(v) => match v.status {
            EquivStatus::Equivalent => {
                println!("EQUIVALENT");
                EXIT_OK
            }
            EquivStatus::NotEquivalent => {
                println!("NOT_EQUIVALENT");
                if let Some(bits) = &v.counterexample {
                    let pattern: String =
                        bits.iter().map(|b| if *b { '1' } else { '0' }).collect();
                    println!("counterexample inputs: {pattern}");
                }
                EXIT_NOT_EQUIVALENT
            }
            EquivStatus::ResourceOut => {
                println!("RESOURCE_OUT");
                eprintln!("verify: conflict limit {conflict_limit} reached");
                EXIT_RESOURCE_OUT
            }
        },
        Err(e) => {
            eprintln!("verify: {e}");
            EXIT_CONFIG
        }
    }
}

pub const CHAMPION_CSV_HEADER: &str = "cycle,revision_id,qor";

pub fn emit_champion_csv(history: &[(usize, String, f64)]) -> String {
    let mut out = String::from(CHAMPION_CSV_HEADER);
    out.push('\n');
    for (cycle, revision, qor) in history {
        out.push_str(&format!("{cycle},{revision},{qor:.6}\n"));
    }
    out
}

/// Parses a JSON-lines journal, naming the offending line on error.
pub fn read_journal(path: &Path) -> Result<Vec<IterationRecord>, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: IterationRecord = serde_json::from_str(line)
            .map_err(|e| format!("journal line {}: {e}", idx + 1))?;
        records.push(rec);
    }
    Ok(records)
}

/// Champion lineage re-derived from journal records alone: Integrated
/// cycles whose normalized qor (1 - reward) beats the best so far.
pub fn champion_rows_from_journal(records: &[IterationRecord]) -> Vec<(usize, String, f64)> {
    let mut best = 1.0f64;
    let mut rows = Vec::new();
    for rec in records {
        if rec.status == crate::engine::CycleStatus::Integrated {
            let qor = 1.0 - rec.reward;
            if qor < best {
                best = qor;
                rows.push((rec.cycle, rec.revision_id.clone(), qor));
            }
        }
    }
    rows
}

pub fn cmd_report(kind: &str, out_dir: &Path, format: &str) -> Result<String, String> {
    match kind {
        "champion" => {
            let records = read_journal(&out_dir.join("journal.jsonl"))?;
            let rows = champion_rows_from_journal(&records);
            Ok(if format == "json" {
                serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n"
            } else {
                emit_champion_csv(&rows)
            })
        }
        "account" => {
            let ledger_path = out_dir.join("ledger.json");
            let ledger: TokenLedger = if ledger_path.exists() {
                let text = std::fs::read_to_string(&ledger_path)
                    .map_err(|e| format!("{}: {e}", ledger_path.display()))?;
                serde_json::from_str(&text).map_err(|e| format!("ledger.json: {e}"))?
            } else {
                TokenLedger::default()
            };
            let report = account(&ledger);
            Ok(if format == "json" {
                emit_account_json(&report) + "\n"
            } else {
                emit_account_csv(&report)
            })
        }
        "ablation" => {
            let tables_dir = out_dir.join("tables");
            let mut results = BTreeMap::new();
            if tables_dir.exists() {
                let mut paths: Vec<PathBuf> = std::fs::read_dir(&tables_dir)
                    .map_err(|e| format!("tables: {e}"))?
                    .filter_map(|e| e.ok())
                    .map(|e| e.path())
                    .filter(|p| p.extension().is_some_and(|x| x == "json"))
                    .collect();
                paths.sort();
                for p in paths {
                    let label =
                        p.file_stem().unwrap_or_default().to_string_lossy().to_string();
                    let text = std::fs::read_to_string(&p)
                        .map_err(|e| format!("{}: {e}", p.display()))?;
                    let table: MetricTable = serde_json::from_str(&text)
                        .map_err(|e| format!("{}: {e}", p.display()))?;
                    results.insert(label, table);
                }
            }
            if results.is_empty() {
                return Ok(format!("{}\n", crate::harness::ABLATION_CSV_HEADER));
            }
            let baseline = if results.contains_key("vanilla") {
                "vanilla".to_string()
            } else {
                results.keys().next().cloned().unwrap()
            };
            let rows = ablation_table(&results, &baseline).map_err(|e| e.to_string())?;
            Ok(if format == "json" {
                emit_ablation_json(&rows) + "\n"
            } else {
                emit_ablation_csv(&rows)
            })
        }
        other => Err(format!("unknown report kind {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Vec<String> {
        std::iter::once("evosyn").chain(list.iter().copied()).map(String::from).collect()
    }

    fn tree_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
        let mut out = BTreeMap::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for entry in std::fs::read_dir(&d).unwrap() {
                let p = entry.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    let rel = p.strip_prefix(dir).unwrap().to_string_lossy().to_string();
                    out.insert(rel, std::fs::read(&p).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn init_scaffold_is_deterministic_and_refuses_nonempty() {
        let root = tempfile::tempdir().unwrap();
        let a = root.path().join("a");
        let b = root.path().join("b");
        assert_eq!(run_cli(args(&["init", a.to_str().unwrap()])), EXIT_OK);
        assert_eq!(run_cli(args(&["init", b.to_str().unwrap()])), EXIT_OK);
        let ta = tree_bytes(&a);
        let tb = tree_bytes(&b);
        assert_eq!(ta.len(), tb.len());
        assert!(ta.len() > 25, "scaffold files: {}", ta.len());
        for (name, bytes) in &ta {
            assert_eq!(Some(bytes), tb.get(name).as_deref(), "{name} differs");
        }
        for expected in ["config.txt", "rules.txt", "flows.lst", "corpus/add4.aag", "docs/overview.md"] {
            assert!(ta.contains_key(expected), "missing {expected}");
        }
        assert_eq!(run_cli(args(&["init", a.to_str().unwrap()])), EXIT_DIR_NOT_EMPTY);
    }

    #[test]
    fn verify_resolves_equivalence_and_prints_verdicts() {
        let dir = tempfile::tempdir().unwrap();
        let x = dir.path().join("x.aag");
        let y = dir.path().join("y.aag");
        // single AND vs single OR of the same two inputs
        std::fs::write(&x, "aag 3 2 0 1 1\n2\n4\n6\n6 2 4\n").unwrap();
        std::fs::write(&y, "aag 3 2 0 1 1\n2\n4\n7\n6 3 5\n").unwrap();
        assert_eq!(
            run_cli(args(&["verify", x.to_str().unwrap(), x.to_str().unwrap()])),
            EXIT_OK
        );
        assert_eq!(
            run_cli(args(&["verify", x.to_str().unwrap(), y.to_str().unwrap()])),
            EXIT_NOT_EQUIVALENT
        );
        assert_eq!(run_cli(args(&["verify", x.to_str().unwrap(), "/no/such.aag"])), EXIT_CONFIG);
    }

    #[test]
    fn mock_run_writes_journal_and_reports() {
        let root = tempfile::tempdir().unwrap();
        let ws = root.path().join("ws");
        assert_eq!(cmd_init(&ws), EXIT_OK);
        let code = run_cli(args(&[
            "run",
            "--config",
            ws.join("config.txt").to_str().unwrap(),
            "--cycles",
            "3",
            "--workers",
            "2",
            "--mock",
        ]));
        assert_eq!(code, EXIT_OK);
        let out = ws.join("out");
        let journal = read_journal(&out.join("journal.jsonl")).unwrap();
        assert_eq!(journal.len(), 3);
        for (k, rec) in journal.iter().enumerate() {
            assert_eq!(rec.cycle, k);
        }
        for name in
            ["ledger.json", "account.csv", "champion.csv", "champion_table.json", "rules.txt"]
        {
            assert!(out.join(name).exists(), "missing {name}");
        }
        let champion_csv = std::fs::read_to_string(out.join("champion.csv")).unwrap();
        assert!(champion_csv.starts_with(CHAMPION_CSV_HEADER));
        // the seed snapshot directory exists and holds the source files
        let found: Vec<_> = std::fs::read_dir(out.join("snapshots")).unwrap().collect();
        assert!(!found.is_empty());
        let report = cmd_report("champion", &out, "csv").unwrap();
        assert!(report.starts_with(CHAMPION_CSV_HEADER));
        let report = cmd_report("account", &out, "csv").unwrap();
        assert!(report.contains("evolution"));
    }

    #[test]
    fn report_handles_empty_and_broken_journals() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("journal.jsonl"), "").unwrap();
        let text = cmd_report("champion", dir.path(), "csv").unwrap();
        assert_eq!(text, format!("{CHAMPION_CSV_HEADER}\n"));
        std::fs::write(dir.path().join("journal.jsonl"), "{not json\n").unwrap();
        let err = cmd_report("champion", dir.path(), "csv").unwrap_err();
        assert!(err.contains("journal line 1"), "{err}");
    }

    #[test]
    fn ablation_labels_map_to_pinned_sets() {
        assert_eq!(label_pins("all").unwrap(), Vec::<AgentId>::new());
        assert_eq!(label_pins("vanilla").unwrap().len(), 3);
        let pins = label_pins("flow").unwrap();
        assert!(!pins.contains(&AgentId::FlowAgent));
        assert_eq!(pins.len(), 2);
        let pins = label_pins("flow+logic").unwrap();
        assert_eq!(pins, vec![AgentId::MapperAgent]);
        assert!(label_pins("bogus").is_err());
    }
}
