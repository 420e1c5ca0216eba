//! Cut rewriting against the precomputed structure library.

use crate::aig::{Aig, Lit, LIT_FALSE, LIT_TRUE};

use super::npn::{elit, library, Entry};
use super::work::{plan_entry, plan_gain, PlanRef, RewritePlan, WorkAig};
use crate::tt::reduce_support;
use super::{PassDelta, PassParams};

/// Counters a rewriting sweep reports alongside the structural delta.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RewriteStats {
    pub nodes_visited: usize,
    pub replacements: usize,
    /// Cut functions too wide for the library, skipped and counted.
    pub library_misses: usize,
}

pub fn rewrite(aig: &Aig, params: &PassParams) -> (Aig, PassDelta) {
    let (out, delta, _) = rewrite_with_stats(aig, params);
    (out, delta)
}

/// Visits nodes in topological order, enumerates cuts, and replaces a
/// node's cone with the smallest known structure for the cut function
/// whenever that lowers the AND count (or holds it, with
/// `zero_cost_replace`). With `fault_xor` the sweep instead installs an
/// xor structure at every two-input AND, a deliberate functional change
/// the equivalence gate must catch.
pub fn rewrite_with_stats(aig: &Aig, params: &PassParams) -> (Aig, PassDelta, RewriteStats) {
    params.validate().expect("rewrite params out of range");
    let mut w = WorkAig::from_aig(aig);
    let initial_vars = w.num_vars();
    let mut stats = RewriteStats::default();

    if params.fault_xor {
        fault_sweep(&mut w, initial_vars, &mut stats);
    } else {
        let cuts = enumerate_cuts(&w, params);
        sweep(&mut w, initial_vars, &cuts, params, &mut stats);
    }

    let out = w.extract();
    let delta = PassDelta::capture("rewrite", aig, &out);
    (out, delta, stats)
}

/// Nontrivial cuts per variable, bottom-up. The trivial cut is implicit.
fn enumerate_cuts(w: &WorkAig, params: &PassParams) -> Vec<Vec<Vec<u32>>> {
    let nv = w.num_vars();
    let mut cuts: Vec<Vec<Vec<u32>>> = vec![Vec::new(); nv];
    for v in 0..nv {
        if w.is_leaf_var(v) || !w.is_live_and(v) {
            continue;
        }
        let [a, b] = w.fanin_of(v).expect("live node");
        let (va, vb) = (a.var(), b.var());
        let mut set: Vec<Vec<u32>> = Vec::new();
        let mut ca_set = cuts[va as usize].clone();
        ca_set.push(vec![va]);
        let mut cb_set = cuts[vb as usize].clone();
        cb_set.push(vec![vb]);
        for ca in &ca_set {
            for cb in &cb_set {
                let mut u = ca.clone();
                u.extend_from_slice(cb);
                u.sort_unstable();
                u.dedup();
                if u.len() > params.cut_size {
                    continue;
                }
                set.push(u);
            }
        }
        set.sort();
        set.dedup();
        // Ranking: fewer leaves, then lower max leaf level, then lower
        // index sum; deterministic and order-independent.
        set.sort_by_key(|c| {
            let max_level = c.iter().map(|&x| w.level_of(x as usize)).max().unwrap_or(0);
            let index_sum: u64 = c.iter().map(|&x| x as u64).sum();
            (c.len(), max_level, index_sum)
        });
        set.truncate(params.max_cuts_per_node);
        cuts[v] = set;
    }
    cuts
}

fn sweep(
    w: &mut WorkAig,
    initial_vars: usize,
    cuts: &[Vec<Vec<u32>>],
    params: &PassParams,
    stats: &mut RewriteStats,
) {
    let lib = library();
    for v in 1..initial_vars {
        if w.is_leaf_var(v) || !w.is_live_and(v) {
            continue;
        }
        stats.nodes_visited += 1;
        let mut best: Option<(isize, RewritePlan)> = None;
        for cut in &cuts[v] {
            let mut leaves: Vec<usize> = cut
                .iter()
                .map(|&x| w.resolve(Lit::from_var(x, false)).var() as usize)
                .collect();
            leaves.sort_unstable();
            leaves.dedup();
            if leaves.len() > params.cut_size || leaves.contains(&v) {
                continue;
            }
            let tt = match w.node_tt(v, &leaves) {
                Some(t) => t,
                None => continue,
            };
            let (keep, rtt) = reduce_support(tt, leaves.len());
            let rleaves: Vec<usize> = keep.iter().map(|&i| leaves[i]).collect();
            let plan = match rleaves.len() {
                0 => Some(RewritePlan {
                    ops: Vec::new(),
                    root: PlanRef::Real(if rtt & 1 == 1 { LIT_TRUE } else { LIT_FALSE }),
                    protect: Default::default(),
                }),
                1 => Some(RewritePlan {
                    ops: Vec::new(),
                    root: PlanRef::Real(Lit::from_var(rleaves[0] as u32, rtt & 2 == 0)),
                    protect: Default::default(),
                }),
                2 | 3 => {
                    let entry = lib
                        .get(rleaves.len(), rtt)
                        .expect("library covers all small functions");
                    let lits: Vec<Lit> =
                        rleaves.iter().map(|&x| Lit::from_var(x as u32, false)).collect();
                    plan_entry(w, v, entry, &lits)
                }
                _ => {
                    stats.library_misses += 1;
                    None
                }
            };
            let plan = match plan {
                Some(p) => p,
                None => continue,
            };
            let gain = plan_gain(w, v, &plan);
            let better = match &best {
                None => true,
                Some((g, _)) => gain > *g,
            };
            if better {
                best = Some((gain, plan));
            }
        }
        if let Some((gain, plan)) = best {
            if gain > 0 || (params.zero_cost_replace && gain == 0) {
                let delta = w.commit(v, &plan);
                debug_assert_eq!(delta, -gain);
                stats.replacements += 1;
            }
        }
    }
}

/// Replaces every two-input AND with the xor of the same operand
/// literals, built directly so the plan can never collide with the node
/// it replaces.
fn fault_sweep(w: &mut WorkAig, initial_vars: usize, stats: &mut RewriteStats) {
    for v in 1..initial_vars {
        if w.is_leaf_var(v) || !w.is_live_and(v) {
            continue;
        }
        stats.nodes_visited += 1;
        let [a, b] = w.fanin_of(v).expect("live node");
        let (a, b) = (w.resolve(a), w.resolve(b));
        if a.var() == b.var() || a.is_const() || b.is_const() {
            continue;
        }
        let (a, b) = if a.var() < b.var() { (a, b) } else { (b, a) };
        let entry = xor_of(a.is_compl(), b.is_compl());
        let lits = [Lit::from_var(a.var(), false), Lit::from_var(b.var(), false)];
        let plan = plan_entry(w, v, &entry, &lits).expect("xor swap cannot collide");
        w.commit(v, &plan);
        stats.replacements += 1;
    }
}

/// Structure computing `(x0 ^ pa) xor (x1 ^ pb)` over two leaves.
fn xor_of(pa: bool, pb: bool) -> Entry {
    Entry {
        num_leaves: 2,
        nodes: vec![
            [elit(1, pa), elit(2, !pb)],
            [elit(1, !pa), elit(2, pb)],
            [elit(3, true), elit(4, true)],
        ],
        root: elit(5, true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aig::parse_aiger;

    fn exhaustive_outputs(aig: &Aig) -> Vec<Vec<bool>> {
        let n = aig.num_inputs();
        (0..1u32 << n)
            .map(|bits| {
                let ins: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
                aig.simulate(&ins, &[]).unwrap().0
            })
            .collect()
    }

    #[test]
    fn shannon_redundancy_collapses_to_wire() {
        // (a & b) | (a & !b) is just a.
        let text = "aag 5 2 0 1 3\n2\n4\n11\n6 2 4\n8 2 5\n10 7 9\n";
        let aig = parse_aiger(text).unwrap();
        let (out, delta) = rewrite(&aig, &PassParams::default());
        assert_eq!(out.and_count(), 0);
        assert_eq!(delta.and_count_before, 3);
        assert_eq!(delta.and_count_after, 0);
        for bits in 0..4u32 {
            let ins = vec![bits & 1 == 1, bits & 2 == 2];
            let (o, _) = out.simulate(&ins, &[]).unwrap();
            assert_eq!(o, vec![ins[0]]);
        }
    }

    #[test]
    fn import_collapses_trivial_redundancy() {
        // Duplicate AND feeding two outputs shares one node.
        let text = "aag 4 2 0 2 2\n2\n4\n6\n8\n6 2 4\n8 2 4\n";
        let aig = parse_aiger(text).unwrap();
        let (out, delta) = rewrite(&aig, &PassParams::default());
        assert_eq!(out.and_count(), 1);
        assert_eq!(delta.and_count_before, 2);
        // Contradiction becomes the constant.
        let text = "aag 2 1 0 1 1\n2\n4\n4 2 3\n";
        let aig = parse_aiger(text).unwrap();
        let (out, _) = rewrite(&aig, &PassParams::default());
        assert_eq!(out.and_count(), 0);
    }

    #[test]
    fn minimal_tree_stays_and_misses_are_counted() {
        // (a & b) & (c & d) is already minimal; the only library lookups
        // that could apply are four-leaf cuts, which the library lacks.
        let text = "aag 7 4 0 1 3\n2\n4\n6\n8\n14\n10 2 4\n12 6 8\n14 10 12\n";
        let aig = parse_aiger(text).unwrap();
        let mut params = PassParams::default();
        params.cut_size = 4;
        let (out, delta, stats) = rewrite_with_stats(&aig, &params);
        assert_eq!(out.and_count(), 3);
        assert_eq!(delta.and_count_after, 3);
        assert!(stats.library_misses >= 1, "four-leaf cut must be counted");
        assert_eq!(stats.replacements, 0);
    }

    #[test]
    fn and_count_never_increases_without_zero_cost() {
        let texts = [
            "aag 5 2 0 1 3\n2\n4\n11\n6 2 4\n8 2 5\n10 7 9\n",
            "aag 7 4 0 1 3\n2\n4\n6\n8\n14\n10 2 4\n12 10 6\n14 12 8\n",
            "aag 6 3 0 2 3\n2\n4\n6\n12\n10\n8 2 4\n10 8 6\n12 10 6\n",
        ];
        for text in texts {
            let aig = parse_aiger(text).unwrap();
            let before = exhaustive_outputs(&aig);
            let (out, delta) = rewrite(&aig, &PassParams::default());
            assert!(delta.and_count_after <= delta.and_count_before);
            assert_eq!(exhaustive_outputs(&out), before, "function changed");
        }
    }

    #[test]
    fn fault_swap_changes_every_and_site() {
        let aig = parse_aiger("aag 3 2 0 1 1\n2\n4\n6\n6 2 4\n").unwrap();
        let mut params = PassParams::default();
        params.fault_xor = true;
        let (out, _, stats) = rewrite_with_stats(&aig, &params);
        assert_eq!(stats.replacements, 1);
        for bits in 0..4u32 {
            let ins = vec![bits & 1 == 1, bits & 2 == 2];
            let (o, _) = out.simulate(&ins, &[]).unwrap();
            assert_eq!(o, vec![ins[0] ^ ins[1]]);
        }
        // Complemented operands keep their polarities under the swap.
        let aig = parse_aiger("aag 4 2 0 1 2\n2\n4\n9\n6 3 4\n8 6 5\n").unwrap();
        let (out, _, stats) = rewrite_with_stats(&aig, &params);
        assert!(stats.replacements >= 1);
        for bits in 0..4u32 {
            let ins = vec![bits & 1 == 1, bits & 2 == 2];
            let (o, _) = out.simulate(&ins, &[]).unwrap();
            let inner = !ins[0] ^ ins[1];
            assert_eq!(o, vec![!(inner ^ !ins[1])]);
        }
    }

    #[test]
    fn support_reduction_drops_vacuous_vars() {
        // tt = x0 over (x0, x1): second var vacuous.
        let (keep, rtt) = reduce_support(0xAAAA_AAAA_AAAA_AAAA & 0xF, 2);
        assert_eq!(keep, vec![0]);
        assert_eq!(rtt, 0x2);
        // tt = x1 over (x0, x1).
        let (keep, rtt) = reduce_support(0xC, 2);
        assert_eq!(keep, vec![1]);
        assert_eq!(rtt, 0x2);
        // Constant true over two vars.
        let (keep, rtt) = reduce_support(0xF, 2);
        assert!(keep.is_empty());
        assert_eq!(rtt, 1);
        // xor keeps both.
        let (keep, rtt) = reduce_support(0x6, 2);
        assert_eq!(keep, vec![0, 1]);
        assert_eq!(rtt, 0x6);
    }
}
