//! Incremental AIG construction with structural hashing.
//!
//! `and` performs the usual local simplifications (constant folding,
//! `x & x`, `x & !x`) and shares structurally identical nodes, so graphs
//! built through the builder never hold two AND nodes with the same
//! ordered fanin pair.

use std::collections::HashMap;

use super::{Aig, Lit, LIT_FALSE, LIT_TRUE};

pub struct AigBuilder {
    num_inputs: usize,
    num_latches: usize,
    ands: Vec<[Lit; 2]>,
    strash: HashMap<(u32, u32), Lit>,
    level: Vec<u32>,
}

impl AigBuilder {
    pub fn new(num_inputs: usize, num_latches: usize) -> AigBuilder {
        AigBuilder {
            num_inputs,
            num_latches,
            ands: Vec::new(),
            strash: HashMap::new(),
            level: vec![0; 1 + num_inputs + num_latches],
        }
    }

    pub fn input(&self, k: usize) -> Lit {
        assert!(k < self.num_inputs, "input index out of range");
        Lit::from_var((1 + k) as u32, false)
    }

    pub fn latch(&self, k: usize) -> Lit {
        assert!(k < self.num_latches, "latch index out of range");
        Lit::from_var((1 + self.num_inputs + k) as u32, false)
    }

    fn first_and_var(&self) -> u32 {
        (1 + self.num_inputs + self.num_latches) as u32
    }

    /// AND level of an already-built literal's variable.
    pub fn level_of(&self, l: Lit) -> u32 {
        self.level[l.var() as usize]
    }

    pub fn and_count(&self) -> usize {
        self.ands.len()
    }

    pub fn and(&mut self, a: Lit, b: Lit) -> Lit {
        if a == LIT_FALSE || b == LIT_FALSE || a == !b {
            return LIT_FALSE;
        }
        if a == LIT_TRUE {
            return b;
        }
        if b == LIT_TRUE {
            return a;
        }
        if a == b {
            return a;
        }
        let (a, b) = if a.raw() <= b.raw() { (a, b) } else { (b, a) };
        if let Some(&l) = self.strash.get(&(a.raw(), b.raw())) {
            return l;
        }
        let var = self.first_and_var() + self.ands.len() as u32;
        self.ands.push([a, b]);
        self.level
            .push(1 + self.level[a.var() as usize].max(self.level[b.var() as usize]));
        let l = Lit::from_var(var, false);
        self.strash.insert((a.raw(), b.raw()), l);
        l
    }

    pub fn or(&mut self, a: Lit, b: Lit) -> Lit {
        !self.and(!a, !b)
    }

    pub fn xor(&mut self, a: Lit, b: Lit) -> Lit {
        let t = self.and(a, !b);
        let u = self.and(!a, b);
        self.or(t, u)
    }

    /// if s then t else e
    pub fn mux(&mut self, s: Lit, t: Lit, e: Lit) -> Lit {
        let p = self.and(s, t);
        let q = self.and(!s, e);
        self.or(p, q)
    }

    /// Copies `other` into this builder, substituting `leaf_map` for its
    /// inputs followed by its latches. Returns the mapped output and
    /// next-state literals.
    pub fn append_aig(&mut self, other: &Aig, leaf_map: &[Lit]) -> (Vec<Lit>, Vec<Lit>) {
        assert_eq!(
            leaf_map.len(),
            other.num_inputs() + other.num_latches(),
            "leaf map must cover inputs then latches"
        );
        let mut map = vec![LIT_FALSE; other.num_vars()];
        for (k, &l) in leaf_map.iter().enumerate() {
            map[1 + k] = l;
        }
        let resolve = |map: &[Lit], l: Lit| -> Lit {
            let m = map[l.var() as usize];
            if l.is_compl() {
                !m
            } else {
                m
            }
        };
        for (i, &[a, b]) in other.ands().iter().enumerate() {
            let fa = resolve(&map, a);
            let fb = resolve(&map, b);
            map[other.and_var(i) as usize] = self.and(fa, fb);
        }
        let outs = other.outputs().iter().map(|&l| resolve(&map, l)).collect();
        let next = other.latch_next().iter().map(|&l| resolve(&map, l)).collect();
        (outs, next)
    }

    /// Finishes keeping every built node, reachable or not.
    pub fn finish(self, outputs: Vec<Lit>, latch_next: Vec<Lit>) -> Aig {
        Aig::new(
            self.num_inputs,
            self.num_latches,
            self.ands,
            outputs,
            latch_next,
        )
        .expect("builder invariants guarantee a valid graph")
    }

    /// Finishes and drops AND nodes not reachable from the outputs or
    /// next-state literals, renumbering the survivors in place.
    pub fn finish_compact(self, outputs: Vec<Lit>, latch_next: Vec<Lit>) -> Aig {
        let first_and = self.first_and_var() as usize;
        let num_vars = first_and + self.ands.len();
        let mut keep = vec![false; num_vars];
        let mut stack: Vec<u32> = outputs
            .iter()
            .chain(latch_next.iter())
            .map(|l| l.var())
            .collect();
        while let Some(v) = stack.pop() {
            let v = v as usize;
            if v < first_and || keep[v] {
                continue;
            }
            keep[v] = true;
            let [a, b] = self.ands[v - first_and];
            stack.push(a.var());
            stack.push(b.var());
        }
        let mut map = vec![0u32; num_vars];
        for v in 0..first_and {
            map[v] = v as u32;
        }
        let mut ands = Vec::new();
        for (i, &[a, b]) in self.ands.iter().enumerate() {
            let v = first_and + i;
            if !keep[v] {
                continue;
            }
            let ra = Lit::from_var(map[a.var() as usize], a.is_compl());
            let rb = Lit::from_var(map[b.var() as usize], b.is_compl());
            map[v] = (first_and + ands.len()) as u32;
            ands.push([ra, rb]);
        }
        let remap = |l: Lit| Lit::from_var(map[l.var() as usize], l.is_compl());
        Aig::new(
            self.num_inputs,
            self.num_latches,
            ands,
            outputs.into_iter().map(remap).collect(),
            latch_next.into_iter().map(remap).collect(),
        )
        .expect("compaction preserves topological order")
    }
}
