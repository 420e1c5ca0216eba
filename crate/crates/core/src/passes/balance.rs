//! Depth reduction by associative AND-tree restructuring.

use std::collections::HashMap;

use crate::aig::{Aig, AigBuilder, Lit};

use super::PassDelta;

/// Rebuilds every AND tree with its lowest-arriving leaves combined
/// first, which minimizes the tree's height for the given leaf depths.
/// Trees end at complemented edges and at nodes with multiple fanouts,
/// so sharing is preserved; structural hashing may still merge
/// duplicates, hence the AND count never grows.
pub fn balance(aig: &Aig) -> (Aig, PassDelta) {
    let mut fanout = vec![0u32; 1 + aig.num_inputs() + aig.num_latches() + aig.and_count()];
    for &[a, b] in aig.ands() {
        fanout[a.var() as usize] += 1;
        fanout[b.var() as usize] += 1;
    }
    for &o in aig.outputs().iter().chain(aig.latch_next().iter()) {
        fanout[o.var() as usize] += 1;
    }

    let mut b = AigBuilder::new(aig.num_inputs(), aig.num_latches());
    let mut memo: HashMap<u32, Lit> = HashMap::new();
    let emit = |memo: &HashMap<u32, Lit>, l: Lit| -> Lit {
        match memo.get(&l.var()) {
            Some(&m) => m ^ l.is_compl(),
            None => l,
        }
    };

    // Iterative post-order over tree roots. A node is absorbed into its
    // parent's tree when the edge is positive and it has a single fanout.
    let roots: Vec<u32> = aig
        .outputs()
        .iter()
        .chain(aig.latch_next().iter())
        .map(|l| l.var())
        .collect();
    let mut stack: Vec<(u32, bool)> = roots.iter().rev().map(|&v| (v, false)).collect();
    while let Some((v, expanded)) = stack.pop() {
        if aig.fanins(v).is_none() || memo.contains_key(&v) {
            continue;
        }
        let leaves = tree_leaves(aig, &fanout, v);
        if expanded {
            let mut lits: Vec<Lit> = leaves.iter().map(|&l| emit(&memo, l)).collect();
            // Combine the two shallowest literals until one remains,
            // ordering ties by encoding for determinism.
            while lits.len() > 1 {
                lits.sort_by_key(|l| (std::cmp::Reverse(b.level_of(*l)), std::cmp::Reverse(l.raw())));
                let x = lits.pop().unwrap();
                let y = lits.pop().unwrap();
                lits.push(b.and(x, y));
            }
            memo.insert(v, lits[0]);
        } else {
            stack.push((v, true));
            for l in leaves {
                stack.push((l.var(), false));
            }
        }
    }

    let outs: Vec<Lit> = aig.outputs().iter().map(|&l| emit(&memo, l)).collect();
    let next: Vec<Lit> = aig.latch_next().iter().map(|&l| emit(&memo, l)).collect();
    let out = b.finish_compact(outs, next);
    let delta = PassDelta::capture("balance", aig, &out);
    (out, delta)
}

/// Leaf literals of the maximal single-fanout AND tree rooted at `v`.
fn tree_leaves(aig: &Aig, fanout: &[u32], root: u32) -> Vec<Lit> {
    let mut leaves = Vec::new();
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        let [a, b] = aig.fanins(v).expect("tree root must be an AND");
        for l in [a, b] {
            let inner = !l.is_compl()
                && fanout[l.var() as usize] == 1
                && aig.fanins(l.var()).is_some();
            if inner {
                stack.push(l.var());
            } else {
                leaves.push(l);
            }
        }
    }
    leaves
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aig::parse_aiger;

    #[test]
    fn four_leaf_chain_reaches_depth_two() {
        let text = "aag 7 4 0 1 3\n2\n4\n6\n8\n14\n10 2 4\n12 10 6\n14 12 8\n";
        let aig = parse_aiger(text).unwrap();
        assert_eq!(aig.metrics().depth, 3);
        let (out, delta) = balance(&aig);
        assert_eq!(out.metrics().depth, 2);
        assert_eq!(out.metrics().and_count, 3);
        assert_eq!(delta.depth_before, 3);
        assert_eq!(delta.depth_after, 2);
        for bits in 0..16u32 {
            let ins: Vec<bool> = (0..4).map(|i| bits >> i & 1 == 1).collect();
            let (o, _) = out.simulate(&ins, &[]).unwrap();
            assert_eq!(o, vec![ins.iter().all(|&x| x)]);
        }
    }

    #[test]
    fn single_and_is_fixpoint() {
        let aig = parse_aiger("aag 3 2 0 1 1\n2\n4\n6\n6 2 4\n").unwrap();
        let (out, delta) = balance(&aig);
        assert_eq!(out.metrics(), aig.metrics());
        assert_eq!(delta.and_count_before, delta.and_count_after);
    }

    #[test]
    fn shared_node_not_duplicated() {
        // g = a & b has two fanouts; trees stop there.
        let text = "aag 6 3 0 2 3\n2\n4\n6\n12\n10\n8 2 4\n10 8 6\n12 10 6\n";
        let aig = parse_aiger(text).unwrap();
        let (out, _) = balance(&aig);
        assert!(out.metrics().and_count <= 3);
        for bits in 0..8u32 {
            let ins: Vec<bool> = (0..3).map(|i| bits >> i & 1 == 1).collect();
            let (o, _) = out.simulate(&ins, &[]).unwrap();
            let g = ins[0] && ins[1];
            assert_eq!(o, vec![g && ins[2] && ins[2], g && ins[2]]);
        }
    }

    #[test]
    fn complemented_edges_break_trees() {
        // f = !(a & b) & c: the inner AND is behind an inverter.
        let text = "aag 5 3 0 1 2\n2\n4\n6\n10\n8 2 4\n10 9 6\n";
        let aig = parse_aiger(text).unwrap();
        let (out, _) = balance(&aig);
        assert_eq!(out.metrics().and_count, 2);
        for bits in 0..8u32 {
            let ins: Vec<bool> = (0..3).map(|i| bits >> i & 1 == 1).collect();
            let (o, _) = out.simulate(&ins, &[]).unwrap();
            assert_eq!(o, vec![!(ins[0] && ins[1]) && ins[2]]);
        }
    }
}
