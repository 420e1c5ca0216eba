//! Cut-based K-LUT technology mapping.
//!
//! Cuts are enumerated bottom-up with priority pruning, then a dynamic
//! program picks one cut per node minimizing a weighted blend of arrival
//! time and area flow. The cover is traced back from the outputs and each
//! LUT carries the truth table of the cone it absorbs, so a mapping can be
//! checked against the source graph by simulation alone.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aig::{Aig, VarKind};
use crate::tt::{tt_mask, var_pattern};

/// A cut: sorted leaf variables.
pub type Cut = Vec<u32>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    LowestLevel,
    FewestLeaves,
    LowestIndex,
}

impl TieBreak {
    pub fn as_str(&self) -> &'static str {
        match self {
            TieBreak::LowestLevel => "lowest_level",
            TieBreak::FewestLeaves => "fewest_leaves",
            TieBreak::LowestIndex => "lowest_index",
        }
    }
}

impl std::str::FromStr for TieBreak {
    type Err = ();

    fn from_str(s: &str) -> Result<TieBreak, ()> {
        match s {
            "lowest_level" => Ok(TieBreak::LowestLevel),
            "fewest_leaves" => Ok(TieBreak::FewestLeaves),
            "lowest_index" => Ok(TieBreak::LowestIndex),
            _ => Err(()),
        }
    }
}

/// Mapper knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    /// LUT input width, 2 to 6.
    pub lut_k: usize,
    /// Nontrivial cuts kept per node, 1 to 16.
    pub cuts_per_node: usize,
    /// Weight of area flow in the cut score.
    pub area_weight: f64,
    /// Weight of arrival time in the cut score.
    pub depth_weight: f64,
    /// Order applied between cuts with equal score.
    pub tie_break: TieBreak,
}

impl Default for MapParams {
    fn default() -> MapParams {
        MapParams {
            lut_k: 4,
            cuts_per_node: 8,
            area_weight: 0.5,
            depth_weight: 0.5,
            tie_break: TieBreak::LowestLevel,
        }
    }
}

impl MapParams {
    pub fn validate(&self) -> Result<(), MapError> {
        let range = |key: &'static str, v: usize, lo: usize, hi: usize| {
            if v < lo || v > hi {
                Err(MapError::BadParam {
                    key,
                    msg: format!("{} is outside {}..={}", v, lo, hi),
                })
            } else {
                Ok(())
            }
        };
        range("lut_k", self.lut_k, 2, 6)?;
        range("cuts_per_node", self.cuts_per_node, 1, 16)?;
        for (key, w) in [
            ("area_weight", self.area_weight),
            ("depth_weight", self.depth_weight),
        ] {
            if !(0.0..=1.0).contains(&w) {
                return Err(MapError::BadParam {
                    key,
                    msg: format!("{} is outside 0..=1", w),
                });
            }
        }
        if (self.area_weight + self.depth_weight - 1.0).abs() > 1e-9 {
            return Err(MapError::BadParam {
                key: "area_weight",
                msg: format!(
                    "area_weight + depth_weight = {}, must be 1",
                    self.area_weight + self.depth_weight
                ),
            });
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), MapError> {
        fn parse<T: std::str::FromStr>(key: &'static str, value: &str) -> Result<T, MapError> {
            value.parse().map_err(|_| MapError::BadParam {
                key,
                msg: format!("bad value {:?}", value),
            })
        }
        match key {
            "lut_k" => self.lut_k = parse("lut_k", value)?,
            "cuts_per_node" => self.cuts_per_node = parse("cuts_per_node", value)?,
            "area_weight" => self.area_weight = parse("area_weight", value)?,
            "depth_weight" => self.depth_weight = parse("depth_weight", value)?,
            "tie_break" => self.tie_break = parse("tie_break", value)?,
            _ => return Err(MapError::UnknownParam { key: key.to_string() }),
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("parameter {key}: {msg}")]
    BadParam { key: &'static str, msg: String },
    #[error("unknown parameter {key:?}")]
    UnknownParam { key: String },
}

/// Cut enumeration tallies. Counts cover AND nodes only; totals include
/// cuts later dropped by the per-node cap, size figures cover kept cuts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutStats {
    pub total_cuts: usize,
    pub pruned_cuts: usize,
    pub max_cut_size: usize,
    pub mean_cut_size: f64,
}

/// One LUT: a root node, its leaf variables and the truth table of the
/// covered cone. Row bit j of the table index comes from leaf j.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lut {
    pub root: u32,
    pub leaves: Vec<u32>,
    pub tt: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mapping {
    pub luts: Vec<Lut>,
    pub lut_count: usize,
    pub lut_depth: usize,
    pub mapper_area: f64,
    pub mapper_delay: f64,
}

/// Unions two sorted leaf sets, bailing out when the result exceeds `k`.
fn merge_cuts(a: &[u32], b: &[u32], k: usize) -> Option<Cut> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = if j >= b.len() || (i < a.len() && a[i] <= b[j]) {
            if j < b.len() && a[i] == b[j] {
                j += 1;
            }
            let v = a[i];
            i += 1;
            v
        } else {
            let v = b[j];
            j += 1;
            v
        };
        out.push(next);
        if out.len() > k {
            return None;
        }
    }
    Some(out)
}

/// Enumerates cuts for every node: the cross-merge of fanin cuts plus the
/// trivial cut, kept to `lut_k` leaves and capped at `cuts_per_node`
/// nontrivial cuts ranked by fewer leaves, then lower max leaf level, then
/// lower leaf index sum. Slot 0 of each AND node's list is the trivial cut.
pub fn enumerate_cuts(aig: &Aig, params: &MapParams) -> (Vec<Vec<Cut>>, CutStats) {
    params.validate().expect("mapper parameters");
    let nv = aig.num_vars();
    let lvl = aig.levels();
    let mut cuts: Vec<Vec<Cut>> = vec![Vec::new(); nv];
    cuts[0] = vec![vec![]];
    for v in 1..=aig.num_inputs() + aig.num_latches() {
        cuts[v] = vec![vec![v as u32]];
    }
    let mut stats = CutStats {
        total_cuts: 0,
        pruned_cuts: 0,
        max_cut_size: 0,
        mean_cut_size: 0.0,
    };
    let mut kept_sizes = 0usize;
    let mut kept_count = 0usize;
    for i in 0..aig.ands().len() {
        let v = aig.and_var(i);
        let [a, b] = aig.ands()[i];
        let mut gen: Vec<Cut> = Vec::new();
        for ca in &cuts[a.var() as usize] {
            for cb in &cuts[b.var() as usize] {
                if let Some(c) = merge_cuts(ca, cb, params.lut_k) {
                    gen.push(c);
                }
            }
        }
        gen.sort();
        gen.dedup();
        gen.sort_by_key(|c| {
            (
                c.len(),
                c.iter().map(|&l| lvl[l as usize]).max().unwrap_or(0),
                c.iter().map(|&l| l as usize).sum::<usize>(),
            )
        });
        stats.total_cuts += gen.len() + 1;
        if gen.len() > params.cuts_per_node {
            stats.pruned_cuts += gen.len() - params.cuts_per_node;
            gen.truncate(params.cuts_per_node);
        }
        kept_count += gen.len() + 1;
        kept_sizes += 1 + gen.iter().map(Vec::len).sum::<usize>();
        stats.max_cut_size = stats
            .max_cut_size
            .max(gen.iter().map(Vec::len).max().unwrap_or(0))
            .max(1);
        let mut list = Vec::with_capacity(gen.len() + 1);
        list.push(vec![v]);
        list.extend(gen);
        cuts[v as usize] = list;
    }
    if kept_count > 0 {
        stats.mean_cut_size = kept_sizes as f64 / kept_count as f64;
    }
    if aig.ands().is_empty() {
        stats.max_cut_size = 0;
    }
    (cuts, stats)
}

/// Truth table of `root` over the given leaves, or None when the leaves do
/// not cut every path into the cone.
fn cone_tt(aig: &Aig, root: u32, leaves: &[u32]) -> Option<u64> {
    let mut pos: HashMap<u32, usize> = HashMap::new();
    for (i, &l) in leaves.iter().enumerate() {
        pos.insert(l, i);
    }
    let mut memo: HashMap<u32, u64> = HashMap::new();
    let mut stack = vec![(root, false)];
    while let Some((v, expanded)) = stack.pop() {
        if memo.contains_key(&v) {
            continue;
        }
        if let Some(&p) = pos.get(&v) {
            memo.insert(v, var_pattern(p));
            continue;
        }
        if v == 0 {
            memo.insert(v, 0);
            continue;
        }
        let f = aig.fanins(v)?;
        if expanded {
            let word = |l: crate::aig::Lit| {
                let t = memo[&l.var()];
                if l.is_compl() {
                    !t
                } else {
                    t
                }
            };
            memo.insert(v, word(f[0]) & word(f[1]));
        } else {
            stack.push((v, true));
            stack.push((f[0].var(), false));
            stack.push((f[1].var(), false));
        }
    }
    Some(memo[&root] & tt_mask(leaves.len()))
}

/// Maps the graph to K-LUTs. Every node gets the cut minimizing
/// depth_weight·arrival + area_weight·area_flow from its enumerated list;
/// the cover is then traced from the outputs.
pub fn map(aig: &Aig, params: &MapParams) -> (Mapping, CutStats) {
    let (cuts, stats) = enumerate_cuts(aig, params);
    let nv = aig.num_vars();
    let mut fanout = vec![0u32; nv];
    for &[a, b] in aig.ands() {
        fanout[a.var() as usize] += 1;
        fanout[b.var() as usize] += 1;
    }
    for &l in aig.outputs().iter().chain(aig.latch_next()) {
        fanout[l.var() as usize] += 1;
    }

    let mut arrival = vec![0usize; nv];
    let mut aflow = vec![0f64; nv];
    let mut choice = vec![0usize; nv];
    for i in 0..aig.ands().len() {
        let v = aig.and_var(i) as usize;
        let mut best: Option<(f64, usize, f64, usize)> = None;
        for ci in 1..cuts[v].len() {
            let c = &cuts[v][ci];
            let arr = 1 + c.iter().map(|&l| arrival[l as usize]).max().unwrap_or(0);
            let af = 1.0
                + c.iter()
                    .map(|&l| aflow[l as usize] / fanout[l as usize].max(1) as f64)
                    .sum::<f64>();
            let cost = params.depth_weight * arr as f64 + params.area_weight * af;
            let take = match best {
                None => true,
                Some((bc, barr, _, bi)) => {
                    if cost != bc {
                        cost < bc
                    } else {
                        match params.tie_break {
                            TieBreak::LowestLevel => arr < barr,
                            TieBreak::FewestLeaves => c.len() < cuts[v][bi].len(),
                            TieBreak::LowestIndex => *c < cuts[v][bi],
                        }
                    }
                }
            };
            if take {
                best = Some((cost, arr, af, ci));
            }
        }
        let (_, arr, af, ci) = best.expect("every AND node keeps at least one nontrivial cut");
        arrival[v] = arr;
        aflow[v] = af;
        choice[v] = ci;
    }

    let mut visited = vec![false; nv];
    let mut work: Vec<u32> = Vec::new();
    for &l in aig.outputs().iter().chain(aig.latch_next()) {
        if matches!(aig.var_kind(l.var()), VarKind::And(_)) && !visited[l.var() as usize] {
            visited[l.var() as usize] = true;
            work.push(l.var());
        }
    }
    let mut roots: Vec<u32> = Vec::new();
    while let Some(v) = work.pop() {
        roots.push(v);
        for &leaf in &cuts[v as usize][choice[v as usize]] {
            if matches!(aig.var_kind(leaf), VarKind::And(_)) && !visited[leaf as usize] {
                visited[leaf as usize] = true;
                work.push(leaf);
            }
        }
    }
    roots.sort_unstable();

    let mut depth = vec![0usize; nv];
    let mut luts = Vec::with_capacity(roots.len());
    let mut lut_depth = 0usize;
    for &v in &roots {
        let leaves = cuts[v as usize][choice[v as usize]].clone();
        let tt = cone_tt(aig, v, &leaves).expect("chosen cut bounds the cone");
        depth[v as usize] = 1 + leaves.iter().map(|&l| depth[l as usize]).max().unwrap_or(0);
        lut_depth = lut_depth.max(depth[v as usize]);
        luts.push(Lut { root: v, leaves, tt });
    }
    let mapping = Mapping {
        lut_count: luts.len(),
        lut_depth,
        mapper_area: luts.len() as f64,
        mapper_delay: lut_depth as f64,
        luts,
    };
    (mapping, stats)
}

const VERIFY_SEED: u64 = 0x6c75_746d_6170;

/// Checks a mapping against its source graph: the cover must be complete
/// and the LUT network must simulate identically, exhaustively up to 10
/// free variables and over 1024 fixed-seed random vectors beyond that.
pub fn verify_mapping(aig: &Aig, mapping: &Mapping) -> bool {
    let nv = aig.num_vars();
    let mut root_at: Vec<bool> = vec![false; nv];
    for lut in &mapping.luts {
        let r = lut.root as usize;
        if r >= nv || !matches!(aig.var_kind(lut.root), VarKind::And(_)) || root_at[r] {
            return false;
        }
        root_at[r] = true;
    }
    for lut in &mapping.luts {
        if lut.leaves.len() > 6 {
            return false;
        }
        for &leaf in &lut.leaves {
            if leaf >= lut.root {
                return false;
            }
            let covered = matches!(
                aig.var_kind(leaf),
                VarKind::Input(_) | VarKind::Latch(_)
            ) || root_at[leaf as usize];
            if !covered {
                return false;
            }
        }
    }
    for &l in aig.outputs().iter().chain(aig.latch_next()) {
        if matches!(aig.var_kind(l.var()), VarKind::And(_)) && !root_at[l.var() as usize] {
            return false;
        }
    }

    let mut order: Vec<&Lut> = mapping.luts.iter().collect();
    order.sort_unstable_by_key(|l| l.root);

    let free = aig.num_inputs() + aig.num_latches();
    let exhaustive = free <= 10;
    let (nwords, last_mask) = if exhaustive {
        let npat = 1usize << free;
        if npat >= 64 {
            (npat / 64, !0u64)
        } else {
            (1, (1u64 << npat) - 1)
        }
    } else {
        (16, !0u64)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(VERIFY_SEED);
    let mut vals = vec![0u64; nv];
    for w in 0..nwords {
        let words: Vec<u64> = (0..free)
            .map(|i| {
                if !exhaustive {
                    rng.gen()
                } else if i < 6 {
                    var_pattern(i)
                } else if w >> (i - 6) & 1 == 1 {
                    !0
                } else {
                    0
                }
            })
            .collect();
        let (outs, nexts) = aig
            .simulate_words(&words[..aig.num_inputs()], &words[aig.num_inputs()..])
            .expect("word counts match");

        for (i, &word) in words.iter().enumerate() {
            vals[1 + i] = word;
        }
        for lut in &order {
            let mut out = 0u64;
            for row in 0..1u64 << lut.leaves.len() {
                if lut.tt >> row & 1 == 0 {
                    continue;
                }
                let mut conj = !0u64;
                for (j, &leaf) in lut.leaves.iter().enumerate() {
                    let t = vals[leaf as usize];
                    conj &= if row >> j & 1 == 1 { t } else { !t };
                }
                out |= conj;
            }
            vals[lut.root as usize] = out;
        }
        let eval = |l: crate::aig::Lit| {
            let t = if l.var() == 0 { 0 } else { vals[l.var() as usize] };
            if l.is_compl() {
                !t
            } else {
                t
            }
        };
        let mask = if w + 1 == nwords { last_mask } else { !0 };
        for (k, &l) in aig.outputs().iter().enumerate() {
            if (eval(l) ^ outs[k]) & mask != 0 {
                return false;
            }
        }
        for (k, &l) in aig.latch_next().iter().enumerate() {
            if (eval(l) ^ nexts[k]) & mask != 0 {
                return false;
            }
        }
    }
    true
}
