//! Evaluation harness: metric tables over a design corpus, ablation
//! normalization, token accounting and report emission.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::aig::Aig;
use crate::passes::PassDelta;
use crate::target::Target;

/// Everything one (design, flow) evaluation yields. Structural counts are
/// post-flow; mapper figures come from the LUT cover.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub and_count: usize,
    pub edge_count: usize,
    pub depth: usize,
    pub mapper_area: f64,
    pub mapper_delay: f64,
    pub lut_count: usize,
    pub lut_depth: usize,
    pub cut_total: usize,
    pub cut_pruned: usize,
    pub pass_deltas: Vec<PassDelta>,
    pub wall_time: f64,
}

impl MetricVector {
    /// Area-delay product, the scalar the reward is built from.
    pub fn adp(&self) -> f64 {
        self.mapper_area * self.mapper_delay
    }
}

#[derive(Serialize, Deserialize, Clone)]
struct MetricRow {
    design_id: String,
    flow_id: String,
    metrics: MetricVector,
}

#[derive(Serialize, Deserialize, Clone)]
struct MetricTableWire {
    revision_id: String,
    cycle: usize,
    rows: Vec<MetricRow>,
}

/// Complete metric grid for one revision: every (design, flow) key of the
/// suite appears exactly once. Serialized as sorted rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "MetricTableWire", into = "MetricTableWire")]
pub struct MetricTable {
    pub revision_id: String,
    pub cycle: usize,
    pub entries: BTreeMap<(String, String), MetricVector>,
}

impl From<MetricTableWire> for MetricTable {
    fn from(w: MetricTableWire) -> MetricTable {
        let entries = w
            .rows
            .into_iter()
            .map(|r| ((r.design_id, r.flow_id), r.metrics))
            .collect();
        MetricTable { revision_id: w.revision_id, cycle: w.cycle, entries }
    }
}

impl From<MetricTable> for MetricTableWire {
    fn from(t: MetricTable) -> MetricTableWire {
        let rows = t
            .entries
            .into_iter()
            .map(|((design_id, flow_id), metrics)| MetricRow { design_id, flow_id, metrics })
            .collect();
        MetricTableWire { revision_id: t.revision_id, cycle: t.cycle, rows }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenCategory {
    RepoProfiling,
    ExternalProfiling,
    Evolution,
}

impl TokenCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenCategory::RepoProfiling => "repo_profiling",
            TokenCategory::ExternalProfiling => "external_profiling",
            TokenCategory::Evolution => "evolution",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenEntry {
    pub category: TokenCategory,
    pub agent_id: String,
    pub tokens: usize,
    pub cost_estimate: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TokenLedger {
    pub entries: Vec<TokenEntry>,
}

impl TokenLedger {
    pub fn record(&mut self, category: TokenCategory, agent_id: &str, tokens: usize, cost: f64) {
        self.entries.push(TokenEntry {
            category,
            agent_id: agent_id.to_string(),
            tokens,
            cost_estimate: cost,
        });
    }
}

/// Token spend rollup. Shares cover only categories present in the ledger
/// and sum to 1 when the ledger is non-empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AccountReport {
    pub shares: BTreeMap<String, f64>,
    pub category_tokens: BTreeMap<String, usize>,
    pub per_agent_tokens: BTreeMap<String, usize>,
    pub total_tokens: usize,
    pub total_cost: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("evaluation failed for: {}", keys.join("; "))]
    EvalFailed { keys: Vec<String> },
    #[error("key mismatch: {0}")]
    KeyMismatch(String),
}

/// Geometric mean. All samples must be strictly positive.
pub fn geomean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "geomean over an empty sample");
    let mut acc = 0.0;
    for &x in xs {
        assert!(x > 0.0, "geomean sample {x} is not positive");
        acc += x.ln();
    }
    (acc / xs.len() as f64).exp()
}

/// Index-ordered parallel map over a fixed worker pool. The output is a
/// pure function of `items`, independent of `workers`.
pub fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let n = items.len();
    if n == 0 {
        return Vec::new();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..n).map(|_| None).collect());
    let nworkers = workers.max(1).min(n);
    std::thread::scope(|s| {
        for _ in 0..nworkers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|o| o.expect("worker filled every slot"))
        .collect()
}

/// Evaluates the full corpus x flow grid for one target revision. Any job
/// failure fails the whole suite, naming the failing keys.
pub fn run_suite(
    target: &Target,
    corpus: &[(String, Aig)],
    workers: usize,
    cycle: usize,
) -> Result<MetricTable, HarnessError> {
    let flow_ids: Vec<String> = target.suite.keys().cloned().collect();
    let jobs: Vec<(usize, String)> = corpus
        .iter()
        .enumerate()
        .flat_map(|(di, _)| flow_ids.iter().map(move |f| (di, f.clone())))
        .collect();
    let outs = parallel_map(&jobs, workers, |(di, flow_id)| {
        let (design_id, design) = &corpus[*di];
        target.evaluate_design(design, design_id, flow_id)
    });
    let mut entries = BTreeMap::new();
    let mut failures = Vec::new();
    for ((di, flow_id), out) in jobs.iter().zip(outs) {
        let design_id = corpus[*di].0.clone();
        match out {
            Ok(mv) => {
                entries.insert((design_id, flow_id.clone()), mv);
            }
            Err(e) => failures.push(format!("{design_id}/{flow_id}: {e}")),
        }
    }
    if !failures.is_empty() {
        failures.sort();
        return Err(HarnessError::EvalFailed { keys: failures });
    }
    Ok(MetricTable { revision_id: target.src.revision_id().to_string(), cycle, entries })
}

/// Per-configuration geomean of normalized ADP against the baseline
/// config. The baseline row is 1.000 by construction. Grid keys whose
/// ADP is not strictly positive on both sides (combinational passthroughs
/// and pure latch chains map to zero LUTs) are left out of the geomean.
pub fn ablation_table(
    results: &BTreeMap<String, MetricTable>,
    baseline_label: &str,
) -> Result<Vec<(String, f64)>, HarnessError> {
    let base = results
        .get(baseline_label)
        .ok_or_else(|| HarnessError::KeyMismatch(format!("no baseline config {baseline_label:?}")))?;
    let mut rows = Vec::new();
    for (label, table) in results {
        if table.entries.len() != base.entries.len()
            || !table.entries.keys().eq(base.entries.keys())
        {
            return Err(HarnessError::KeyMismatch(format!(
                "config {label:?} covers a different (design, flow) grid than {baseline_label:?}"
            )));
        }
        let ratios: Vec<f64> = table
            .entries
            .iter()
            .filter(|(k, mv)| mv.adp() > 0.0 && base.entries[*k].adp() > 0.0)
            .map(|(k, mv)| mv.adp() / base.entries[k].adp())
            .collect();
        if ratios.is_empty() {
            return Err(HarnessError::KeyMismatch(format!(
                "config {label:?} shares no positive area-delay samples with {baseline_label:?}"
            )));
        }
        rows.push((label.clone(), geomean(&ratios)));
    }
    Ok(rows)
}

/// Rolls a ledger up into per-category shares and per-agent totals.
pub fn account(ledger: &TokenLedger) -> AccountReport {
    let mut report = AccountReport::default();
    for e in &ledger.entries {
        *report
            .category_tokens
            .entry(e.category.as_str().to_string())
            .or_insert(0) += e.tokens;
        *report.per_agent_tokens.entry(e.agent_id.clone()).or_insert(0) += e.tokens;
        report.total_tokens += e.tokens;
        report.total_cost += e.cost_estimate;
    }
    if report.total_tokens > 0 {
        for (cat, tok) in &report.category_tokens {
            report.shares.insert(cat.clone(), *tok as f64 / report.total_tokens as f64);
        }
    }
    report
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const TABLE_CSV_HEADER: &str = "design_id,flow_id,and_count,edge_count,depth,mapper_area,\
mapper_delay,lut_count,lut_depth,cut_total,cut_pruned,pass_count,wall_time";

pub fn emit_table_csv(table: &MetricTable) -> String {
    let mut out = String::from(TABLE_CSV_HEADER);
    out.push('\n');
    for ((design, flow), m) in &table.entries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            csv_field(design),
            csv_field(flow),
            m.and_count,
            m.edge_count,
            m.depth,
            m.mapper_area,
            m.mapper_delay,
            m.lut_count,
            m.lut_depth,
            m.cut_total,
            m.cut_pruned,
            m.pass_deltas.len(),
            m.wall_time,
        ));
    }
    out
}

pub fn emit_table_json(table: &MetricTable) -> String {
    serde_json::to_string_pretty(table).expect("metric tables serialize")
}

pub const ABLATION_CSV_HEADER: &str = "label,normalized_adp";

pub fn emit_ablation_csv(rows: &[(String, f64)]) -> String {
    let mut out = String::from(ABLATION_CSV_HEADER);
    out.push('\n');
    for (label, norm) in rows {
        out.push_str(&format!("{},{:.3}\n", csv_field(label), norm));
    }
    out
}

pub fn emit_ablation_json(rows: &[(String, f64)]) -> String {
    let obj: Vec<serde_json::Value> = rows
        .iter()
        .map(|(label, norm)| serde_json::json!({"label": label, "normalized_adp": norm}))
        .collect();
    serde_json::to_string_pretty(&obj).expect("ablation rows serialize")
}

pub const ACCOUNT_CSV_HEADER: &str = "section,name,tokens,value";

pub fn emit_account_csv(report: &AccountReport) -> String {
    let mut out = String::from(ACCOUNT_CSV_HEADER);
    out.push('\n');
    for (cat, tokens) in &report.category_tokens {
        out.push_str(&format!(
            "category,{},{},{}\n",
            csv_field(cat),
            tokens,
            report.shares.get(cat).copied().unwrap_or(0.0),
        ));
    }
    for (agent, tokens) in &report.per_agent_tokens {
        out.push_str(&format!("agent,{},{},\n", csv_field(agent), tokens));
    }
    out.push_str(&format!("total,,{},{}\n", report.total_tokens, report.total_cost));
    out
}

pub fn emit_account_json(report: &AccountReport) -> String {
    serde_json::to_string_pretty(report).expect("account reports serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn mv(area: f64, delay: f64) -> MetricVector {
        MetricVector {
            and_count: 10,
            edge_count: 20,
            depth: 4,
            mapper_area: area,
            mapper_delay: delay,
            lut_count: area as usize,
            lut_depth: delay as usize,
            cut_total: 30,
            cut_pruned: 2,
            pass_deltas: Vec::new(),
            wall_time: 0.0,
        }
    }

    fn table(rev: &str, adp: &[((&str, &str), f64)]) -> MetricTable {
        let entries = adp
            .iter()
            .map(|((d, f), v)| ((d.to_string(), f.to_string()), mv(*v, 1.0)))
            .collect();
        MetricTable { revision_id: rev.into(), cycle: 0, entries }
    }

    #[test]
    fn geomean_matches_product_root() {
        let xs = [1.5, 0.7, 2.2, 0.9, 1.1];
        let prod: f64 = xs.iter().product();
        let byroot = prod.powf(1.0 / xs.len() as f64);
        assert!((geomean(&xs) - byroot).abs() < 1e-12);
    }

    #[test]
    #[should_panic(expected = "not positive")]
    fn geomean_rejects_nonpositive() {
        geomean(&[1.0, 0.0]);
    }

    #[test]
    fn parallel_map_is_worker_invariant() {
        let items: Vec<usize> = (0..57).collect();
        let expect: Vec<usize> = items.iter().map(|x| x * x).collect();
        for workers in [1, 4, 8, 64] {
            assert_eq!(parallel_map(&items, workers, |x| x * x), expect);
        }
        assert!(parallel_map(&Vec::<usize>::new(), 4, |x| *x).is_empty());
    }

    #[test]
    fn ablation_baseline_row_is_exactly_one() {
        let mut results = BTreeMap::new();
        results.insert("base".to_string(), table("r0", &[(("d1", "f1"), 4.0), (("d2", "f1"), 9.0)]));
        results.insert("fast".to_string(), table("r1", &[(("d1", "f1"), 2.0), (("d2", "f1"), 4.5)]));
        let rows = ablation_table(&results, "base").unwrap();
        let base_row = rows.iter().find(|(l, _)| l == "base").unwrap();
        assert_eq!(base_row.1, 1.0);
        let fast = rows.iter().find(|(l, _)| l == "fast").unwrap();
        assert!((fast.1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ablation_reciprocal_configs_multiply_to_one() {
        let mut results = BTreeMap::new();
        results.insert("base".to_string(), table("r0", &[(("d", "f"), 1.0), (("e", "f"), 1.0)]));
        results.insert("up".to_string(), table("r1", &[(("d", "f"), 1.3), (("e", "f"), 1.3)]));
        results.insert("down".to_string(), table("r2", &[(("d", "f"), 1.0 / 1.3), (("e", "f"), 1.0 / 1.3)]));
        let rows = ablation_table(&results, "base").unwrap();
        let up = rows.iter().find(|(l, _)| l == "up").unwrap().1;
        let down = rows.iter().find(|(l, _)| l == "down").unwrap().1;
        assert!((up * down - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ablation_rejects_mismatched_grids() {
        let mut results = BTreeMap::new();
        results.insert("base".to_string(), table("r0", &[(("d1", "f1"), 4.0)]));
        results.insert("other".to_string(), table("r1", &[(("dX", "f1"), 2.0)]));
        assert!(matches!(ablation_table(&results, "base"), Err(HarnessError::KeyMismatch(_))));
        assert!(matches!(ablation_table(&results, "gone"), Err(HarnessError::KeyMismatch(_))));
    }

    #[test]
    fn account_reproduces_token_shares() {
        let mut ledger = TokenLedger::default();
        ledger.record(TokenCategory::RepoProfiling, "planner", 6_800_000, 10.0);
        ledger.record(TokenCategory::ExternalProfiling, "planner", 1_100_000, 2.0);
        ledger.record(TokenCategory::Evolution, "flow_agent", 2_100_000, 4.0);
        let report = account(&ledger);
        assert!((report.shares["repo_profiling"] - 0.68).abs() < 1e-9);
        assert!((report.shares["external_profiling"] - 0.11).abs() < 1e-9);
        assert!((report.shares["evolution"] - 0.21).abs() < 1e-9);
        assert_eq!(report.total_tokens, 10_000_000);
        assert!((report.total_cost - 16.0).abs() < 1e-12);
    }

    #[test]
    fn account_of_empty_ledger_is_empty() {
        let report = account(&TokenLedger::default());
        assert!(report.shares.is_empty());
        assert_eq!(report.total_tokens, 0);
        let csv = emit_account_csv(&report);
        assert_eq!(csv, format!("{ACCOUNT_CSV_HEADER}\ntotal,,0,0\n"));
    }

    #[test]
    fn metric_table_json_round_trips() {
        let t = table("abc123", &[(("d2", "f1"), 6.0), (("d1", "f2"), 4.0)]);
        let json = emit_table_json(&t);
        let back: MetricTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
        // rows come out sorted by (design, flow)
        let first = json.find("\"d1\"").unwrap();
        let second = json.find("\"d2\"").unwrap();
        assert!(first < second);
    }

    #[test]
    fn empty_table_csv_is_header_only() {
        let t = MetricTable { revision_id: "r".into(), cycle: 0, entries: BTreeMap::new() };
        assert_eq!(emit_table_csv(&t), format!("{TABLE_CSV_HEADER}\n"));
    }

    #[test]
    fn csv_emission_is_byte_stable() {
        let mut t = table("rev", &[(("d1", "f1"), 3.0)]);
        t.entries.get_mut(&("d1".to_string(), "f1".to_string())).unwrap().wall_time = 0.0;
        let expect = format!(
            "{TABLE_CSV_HEADER}\nd1,f1,10,20,4,3,1,3,1,30,2,0,0\n"
        );
        assert_eq!(emit_table_csv(&t), expect);
        let rows = vec![("base".to_string(), 1.0), ("full".to_string(), 0.917)];
        assert_eq!(emit_ablation_csv(&rows), "label,normalized_adp\nbase,1.000\nfull,0.917\n");
    }

    #[test]
    fn csv_fields_are_quoted_when_needed() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
