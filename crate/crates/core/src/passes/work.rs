//! Mutable AIG used inside restructuring passes.
//!
//! A `WorkAig` keeps structural hashing, fanout reference counts and
//! forwarding pointers so a pass can splice in a replacement cone and let
//! the old one die by reference counting. Node replacement never touches
//! fanout nodes; their fanin literals are resolved through the forwarding
//! table on every read. Gains are computed exactly before committing: a
//! dry-run plan counts the nodes a replacement would allocate, and a
//! reference-count simulation counts the nodes it would free.

use std::collections::{BTreeSet, HashMap};

use crate::aig::{Aig, AigBuilder, Lit, LIT_FALSE, LIT_TRUE};
use crate::tt::VAR_PAT;

use super::npn::Entry;

fn strash_key(a: Lit, b: Lit) -> (u32, u32) {
    (a.raw(), b.raw())
}

pub(crate) struct WorkAig {
    num_inputs: usize,
    num_latches: usize,
    fanin: Vec<Option<[Lit; 2]>>,
    level: Vec<u32>,
    nref: Vec<u32>,
    fwd: Vec<Lit>,
    strash: HashMap<(u32, u32), u32>,
    outputs: Vec<Lit>,
    latch_next: Vec<Lit>,
    live_ands: usize,
}

impl WorkAig {
    /// Imports a graph, structurally hashing and constant-folding on the
    /// way in, then drops anything unreferenced by an output.
    pub fn from_aig(aig: &Aig) -> WorkAig {
        let first = 1 + aig.num_inputs() + aig.num_latches();
        let mut w = WorkAig {
            num_inputs: aig.num_inputs(),
            num_latches: aig.num_latches(),
            fanin: vec![None; first],
            level: vec![0; first],
            nref: vec![0; first],
            fwd: (0..first as u32).map(|v| Lit::from_var(v, false)).collect(),
            strash: HashMap::new(),
            outputs: Vec::new(),
            latch_next: Vec::new(),
            live_ands: 0,
        };
        let mut map: Vec<Lit> = (0..first as u32).map(|v| Lit::from_var(v, false)).collect();
        for &[a, b] in aig.ands().iter() {
            let fa = map[a.var() as usize] ^ a.is_compl();
            let fb = map[b.var() as usize] ^ b.is_compl();
            let l = w.and(fa, fb);
            map.push(l);
        }
        w.outputs = aig
            .outputs()
            .iter()
            .map(|&l| map[l.var() as usize] ^ l.is_compl())
            .collect();
        w.latch_next = aig
            .latch_next()
            .iter()
            .map(|&l| map[l.var() as usize] ^ l.is_compl())
            .collect();
        let root_vars: Vec<usize> = w
            .outputs
            .iter()
            .chain(w.latch_next.iter())
            .map(|l| l.var() as usize)
            .collect();
        for v in root_vars {
            w.nref[v] += 1;
        }
        // Sweep nodes no output reaches; highest first so cascades settle.
        for v in (first..w.fanin.len()).rev() {
            if w.fanin[v].is_some() && w.nref[v] == 0 {
                w.dismantle(v);
            }
        }
        w
    }

    pub fn num_vars(&self) -> usize {
        self.fanin.len()
    }

    #[cfg(test)]
    pub fn live_ands(&self) -> usize {
        self.live_ands
    }

    pub fn is_leaf_var(&self, v: usize) -> bool {
        v <= self.num_inputs + self.num_latches
    }

    /// Live AND node: not a leaf and neither dead nor forwarded.
    pub fn is_live_and(&self, v: usize) -> bool {
        self.fanin[v].is_some()
    }

    pub fn fanin_of(&self, v: usize) -> Option<[Lit; 2]> {
        self.fanin[v]
    }

    pub fn nref_of(&self, v: usize) -> u32 {
        self.nref[v]
    }

    pub fn level_of(&self, v: usize) -> u32 {
        self.level[v]
    }

    /// Follows forwarding pointers to the literal's current definition.
    pub fn resolve(&self, l: Lit) -> Lit {
        let mut l = l;
        loop {
            let f = self.fwd[l.var() as usize];
            if f.var() == l.var() {
                return l;
            }
            l = f ^ l.is_compl();
        }
    }

    pub fn and(&mut self, a: Lit, b: Lit) -> Lit {
        let a = self.resolve(a);
        let b = self.resolve(b);
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
        if let Some(&v) = self.strash.get(&strash_key(a, b)) {
            return Lit::from_var(v, false);
        }
        let v = self.fanin.len() as u32;
        self.fanin.push(Some([a, b]));
        self.level
            .push(1 + self.level[a.var() as usize].max(self.level[b.var() as usize]));
        self.nref.push(0);
        self.fwd.push(Lit::from_var(v, false));
        self.nref[a.var() as usize] += 1;
        self.nref[b.var() as usize] += 1;
        self.strash.insert(strash_key(a, b), v);
        self.live_ands += 1;
        Lit::from_var(v, false)
    }

    /// Removes a node that holds no references and releases its fanins,
    /// cascading into nodes that drop to zero. Stored fanins may name
    /// forwarded variables; the reference counts live at their targets.
    fn dismantle(&mut self, v: usize) {
        debug_assert_eq!(self.nref[v], 0);
        let [a, b] = self.fanin[v].take().expect("dismantle of a non-node");
        self.strash.remove(&strash_key(a, b));
        self.live_ands -= 1;
        let ra = self.resolve(a).var() as usize;
        let rb = self.resolve(b).var() as usize;
        self.deref_var(ra);
        self.deref_var(rb);
    }

    fn deref_var(&mut self, v0: usize) {
        let mut stack = vec![v0];
        while let Some(v) = stack.pop() {
            debug_assert!(self.nref[v] > 0, "reference underflow at {}", v);
            self.nref[v] -= 1;
            if self.nref[v] == 0 {
                if let Some([a, b]) = self.fanin[v].take() {
                    self.strash.remove(&strash_key(a, b));
                    self.live_ands -= 1;
                    stack.push(self.resolve(a).var() as usize);
                    stack.push(self.resolve(b).var() as usize);
                }
            }
        }
    }

    /// Redirects every reference of node `v` to `new_l` and dismantles the
    /// node. `new_l` must not depend on `v`.
    pub fn replace(&mut self, v: usize, new_l: Lit) {
        let new_l = self.resolve(new_l);
        assert_ne!(
            new_l.var() as usize,
            v,
            "replacement may not be the node itself"
        );
        assert!(self.fanin[v].is_some(), "replacing a dead node");
        self.nref[new_l.var() as usize] += self.nref[v];
        self.nref[v] = 0;
        self.fwd[v] = new_l;
        self.dismantle(v);
    }

    /// Truth table of `root` as a function of `leaves`, or None when the
    /// leaves do not cut every input path (the cut is stale or invalid).
    pub fn node_tt(&self, root: usize, leaves: &[usize]) -> Option<u64> {
        debug_assert!(leaves.len() <= 6);
        let mut memo: HashMap<usize, u64> = HashMap::new();
        self.tt_rec(root, leaves, &mut memo)
    }

    fn tt_rec(&self, v: usize, leaves: &[usize], memo: &mut HashMap<usize, u64>) -> Option<u64> {
        if let Some(pos) = leaves.iter().position(|&w| w == v) {
            return Some(VAR_PAT[pos]);
        }
        if v == 0 {
            return Some(0);
        }
        if self.is_leaf_var(v) {
            return None;
        }
        if let Some(&t) = memo.get(&v) {
            return Some(t);
        }
        let [a, b] = self.fanin[v]?;
        let a = self.resolve(a);
        let b = self.resolve(b);
        let ta = self.tt_rec(a.var() as usize, leaves, memo)?;
        let tb = self.tt_rec(b.var() as usize, leaves, memo)?;
        let t = (if a.is_compl() { !ta } else { ta }) & (if b.is_compl() { !tb } else { tb });
        memo.insert(v, t);
        Some(t)
    }

    /// The root plus its maximum fanout-free cone: everything that dies
    /// when the root loses all references.
    pub fn mffc(&self, root: usize) -> Vec<usize> {
        let mut deficit: HashMap<usize, u32> = HashMap::new();
        let mut members = vec![root];
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            let [a, b] = self.fanin[v].expect("mffc over dead node");
            for f in [self.resolve(a), self.resolve(b)] {
                let w = f.var() as usize;
                if !self.is_live_and(w) {
                    continue;
                }
                let d = deficit.entry(w).or_insert(0);
                *d += 1;
                if *d == self.nref[w] {
                    members.push(w);
                    stack.push(w);
                }
            }
        }
        members
    }

    /// Boundary variables read by `members` but not contained in it.
    pub fn cone_leaves(&self, members: &[usize]) -> Vec<usize> {
        let mset: BTreeSet<usize> = members.iter().copied().collect();
        let mut leaves = BTreeSet::new();
        for &m in members {
            let [a, b] = self.fanin[m].expect("cone over dead node");
            for f in [self.resolve(a), self.resolve(b)] {
                let w = f.var() as usize;
                if !mset.contains(&w) {
                    leaves.insert(w);
                }
            }
        }
        leaves.into_iter().collect()
    }

    /// Counts the nodes that die if `v` is replaced, given `protect` extra
    /// references the replacement will add to existing nodes.
    pub fn deaths_after_replace(&self, v: usize, protect: &HashMap<usize, u32>) -> usize {
        let mut deficit: HashMap<usize, u32> = HashMap::new();
        let mut deaths = 0usize;
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            deaths += 1;
            let [a, b] = self.fanin[x].expect("death simulation over dead node");
            for f in [self.resolve(a), self.resolve(b)] {
                let w = f.var() as usize;
                if !self.is_live_and(w) {
                    continue;
                }
                let d = deficit.entry(w).or_insert(0);
                *d += 1;
                if *d == self.nref[w] + protect.get(&w).copied().unwrap_or(0) {
                    stack.push(w);
                }
            }
        }
        deaths
    }

    /// Serializes the live, reachable structure into a canonical Aig.
    pub fn extract(&self) -> Aig {
        let mut b = AigBuilder::new(self.num_inputs, self.num_latches);
        let mut map: HashMap<usize, Lit> = HashMap::new();
        let outs: Vec<Lit> = self.outputs.iter().map(|&l| self.resolve(l)).collect();
        let next: Vec<Lit> = self.latch_next.iter().map(|&l| self.resolve(l)).collect();
        for root in outs.iter().chain(next.iter()) {
            let mut stack: Vec<(usize, bool)> = vec![(root.var() as usize, false)];
            while let Some((v, expanded)) = stack.pop() {
                if self.is_leaf_var(v) || (!expanded && map.contains_key(&v)) {
                    continue;
                }
                let [f0, f1] = self.fanin[v].expect("reachable node must be live");
                let (ra, rb) = (self.resolve(f0), self.resolve(f1));
                if expanded {
                    let la = Self::emitted(&map, ra);
                    let lb = Self::emitted(&map, rb);
                    let l = b.and(la, lb);
                    map.insert(v, l);
                } else {
                    stack.push((v, true));
                    stack.push((rb.var() as usize, false));
                    stack.push((ra.var() as usize, false));
                }
            }
        }
        let emit = |l: &Lit| -> Lit {
            let v = l.var() as usize;
            if self.is_leaf_var(v) {
                *l
            } else {
                map[&v] ^ l.is_compl()
            }
        };
        let o: Vec<Lit> = outs.iter().map(emit).collect();
        let n: Vec<Lit> = next.iter().map(emit).collect();
        b.finish(o, n)
    }

    // Leaf variables keep their numbering; the map only holds ANDs.
    fn emitted(map: &HashMap<usize, Lit>, l: Lit) -> Lit {
        match map.get(&(l.var() as usize)) {
            Some(&m) => m ^ l.is_compl(),
            None => l,
        }
    }

    /// Builds the replacement described by `plan` and splices it in for
    /// node `v`. Returns the change in live AND count.
    pub fn commit(&mut self, v: usize, plan: &RewritePlan) -> isize {
        let before = self.live_ands as isize;
        let mut built: Vec<Lit> = Vec::with_capacity(plan.ops.len());
        for op in &plan.ops {
            let la = Self::materialize(op.a, &built);
            let lb = Self::materialize(op.b, &built);
            let prev = self.live_ands;
            let l = self.and(la, lb);
            debug_assert_eq!(self.live_ands, prev + 1, "plan op failed to allocate");
            built.push(l);
        }
        let root = Self::materialize(plan.root, &built);
        self.replace(v, root);
        self.live_ands as isize - before
    }

    fn materialize(r: PlanRef, built: &[Lit]) -> Lit {
        match r {
            PlanRef::Real(l) => l,
            PlanRef::Virt(i, c) => built[i] ^ c,
        }
    }
}

/// Operand of a planned AND: an existing literal or an earlier plan node.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum PlanRef {
    Real(Lit),
    Virt(usize, bool),
}

impl PlanRef {
    fn compl(self) -> PlanRef {
        match self {
            PlanRef::Real(l) => PlanRef::Real(!l),
            PlanRef::Virt(i, c) => PlanRef::Virt(i, !c),
        }
    }

    /// Order key: existing nodes before plan nodes, then by encoding.
    fn key(self) -> (u8, u32) {
        match self {
            PlanRef::Real(l) => (0, l.raw()),
            PlanRef::Virt(i, c) => (1, (i as u32) << 1 | c as u32),
        }
    }
}

#[derive(Copy, Clone, Debug)]
pub(crate) struct PlanOp {
    pub a: PlanRef,
    pub b: PlanRef,
}

/// Replacement recipe produced by a dry run.
pub(crate) struct RewritePlan {
    pub ops: Vec<PlanOp>,
    pub root: PlanRef,
    /// References the plan adds to existing nodes, for death simulation.
    pub protect: HashMap<usize, u32>,
}

impl RewritePlan {
    pub fn cost(&self) -> usize {
        self.ops.len()
    }

    pub fn root_real_var(&self) -> Option<usize> {
        match self.root {
            PlanRef::Real(l) => Some(l.var() as usize),
            PlanRef::Virt(..) => None,
        }
    }
}

/// Net AND-count reduction if `plan` replaced node `v` right now: nodes
/// freed by the replacement minus nodes it allocates. The plan root, when
/// it is an existing node, inherits all of `v`'s references and must be
/// shielded from the death count.
pub(crate) fn plan_gain(w: &WorkAig, v: usize, plan: &RewritePlan) -> isize {
    let mut protect = plan.protect.clone();
    if let Some(rv) = plan.root_real_var() {
        if w.is_live_and(rv) {
            *protect.entry(rv).or_insert(0) += w.nref_of(v);
        }
    }
    w.deaths_after_replace(v, &protect) as isize - plan.cost() as isize
}

/// Dry-runs `entry` over the given leaf literals against the current
/// graph, mirroring exactly what `commit` would allocate. Returns None
/// when the structure would have to pass through the node being rewritten
/// (a cycle) or degenerates to that node itself.
pub(crate) fn plan_entry(
    w: &WorkAig,
    avoid: usize,
    entry: &Entry,
    leaf_lits: &[Lit],
) -> Option<RewritePlan> {
    assert_eq!(leaf_lits.len(), entry.num_leaves as usize);
    let mut refs: Vec<PlanRef> = Vec::with_capacity(1 + leaf_lits.len() + entry.nodes.len());
    refs.push(PlanRef::Real(LIT_FALSE));
    for &l in leaf_lits {
        refs.push(PlanRef::Real(w.resolve(l)));
    }
    let mut ops: Vec<PlanOp> = Vec::new();
    let mut trial: HashMap<((u8, u32), (u8, u32)), PlanRef> = HashMap::new();
    let mut protect: HashMap<usize, u32> = HashMap::new();

    for &[ea, eb] in &entry.nodes {
        let ra0 = refs[(ea >> 1) as usize];
        let ra = if ea & 1 == 1 { ra0.compl() } else { ra0 };
        let rb0 = refs[(eb >> 1) as usize];
        let rb = if eb & 1 == 1 { rb0.compl() } else { rb0 };
        let res = plan_and(w, avoid, ra, rb, &mut ops, &mut trial, &mut protect)?;
        refs.push(res);
    }
    let root0 = refs[(entry.root >> 1) as usize];
    let root = if entry.root & 1 == 1 {
        root0.compl()
    } else {
        root0
    };
    if let PlanRef::Real(l) = root {
        if l.var() as usize == avoid {
            return None;
        }
    }
    Some(RewritePlan {
        ops,
        root,
        protect,
    })
}

fn plan_and(
    w: &WorkAig,
    avoid: usize,
    ra: PlanRef,
    rb: PlanRef,
    ops: &mut Vec<PlanOp>,
    trial: &mut HashMap<((u8, u32), (u8, u32)), PlanRef>,
    protect: &mut HashMap<usize, u32>,
) -> Option<PlanRef> {
    let f = PlanRef::Real(LIT_FALSE);
    let t = PlanRef::Real(LIT_TRUE);
    // Simplifications mirror WorkAig::and exactly.
    if ra == f || rb == f || ra == rb.compl() {
        return Some(f);
    }
    if ra == t {
        return Some(rb);
    }
    if rb == t {
        return Some(ra);
    }
    if ra == rb {
        return Some(ra);
    }
    let (ra, rb) = if ra.key() <= rb.key() { (ra, rb) } else { (rb, ra) };
    let key = (ra.key(), rb.key());
    if let Some(&r) = trial.get(&key) {
        return Some(r);
    }
    let res = if let (PlanRef::Real(la), PlanRef::Real(lb)) = (ra, rb) {
        match w.strash.get(&strash_key(la, lb)) {
            Some(&hv) if hv as usize == avoid => return None,
            Some(&hv) => PlanRef::Real(Lit::from_var(hv, false)),
            None => alloc(ra, rb, ops, protect),
        }
    } else {
        alloc(ra, rb, ops, protect)
    };
    trial.insert(key, res);
    Some(res)
}

fn alloc(
    ra: PlanRef,
    rb: PlanRef,
    ops: &mut Vec<PlanOp>,
    protect: &mut HashMap<usize, u32>,
) -> PlanRef {
    for r in [ra, rb] {
        if let PlanRef::Real(l) = r {
            *protect.entry(l.var() as usize).or_insert(0) += 1;
        }
    }
    let id = ops.len();
    ops.push(PlanOp { a: ra, b: rb });
    PlanRef::Virt(id, false)
}
