//! Conflict-driven clause learning over two watched literals.
//!
//! Literals are packed as `var*2 + sign` internally. Decisions follow a
//! bumped-activity order with phase saving; every conflict learns a first
//! unique implication point clause. Satisfying assignments are checked
//! against the input clauses before they leave the solver.

use super::{Cnf, SatResult};

/// Everything a solve run produces.
#[derive(Clone, Debug, PartialEq)]
pub struct SatOutcome {
    pub result: SatResult,
    pub model: Option<Vec<bool>>,
    pub conflicts: usize,
}

const NO_REASON: usize = usize::MAX;

fn ilit(l: i32) -> u32 {
    (l.unsigned_abs() - 1) * 2 + (l < 0) as u32
}

struct Solver {
    nvars: usize,
    clauses: Vec<Vec<u32>>,
    watches: Vec<Vec<usize>>,
    val: Vec<i8>,
    phase: Vec<bool>,
    level: Vec<u32>,
    reason: Vec<usize>,
    seen: Vec<bool>,
    trail: Vec<u32>,
    qhead: usize,
    cur_level: u32,
    activity: Vec<f64>,
    act_inc: f64,
    conflicts: usize,
}

impl Solver {
    fn new(nvars: usize) -> Solver {
        Solver {
            nvars,
            clauses: Vec::new(),
            watches: vec![Vec::new(); nvars * 2],
            val: vec![0; nvars],
            phase: vec![false; nvars],
            level: vec![0; nvars],
            reason: vec![NO_REASON; nvars],
            seen: vec![false; nvars],
            trail: Vec::new(),
            qhead: 0,
            cur_level: 0,
            activity: vec![0.0; nvars],
            act_inc: 1.0,
            conflicts: 0,
        }
    }

    fn lit_val(&self, l: u32) -> i8 {
        let v = self.val[(l >> 1) as usize];
        if l & 1 == 1 {
            -v
        } else {
            v
        }
    }

    fn enqueue(&mut self, l: u32, reason: usize) -> bool {
        match self.lit_val(l) {
            1 => true,
            -1 => false,
            _ => {
                let v = (l >> 1) as usize;
                self.val[v] = if l & 1 == 1 { -1 } else { 1 };
                self.level[v] = self.cur_level;
                self.reason[v] = reason;
                self.trail.push(l);
                true
            }
        }
    }

    /// Runs unit propagation to fixpoint; returns a falsified clause index.
    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let f = (p ^ 1) as usize;
            let mut i = 0;
            'watchers: while i < self.watches[f].len() {
                let ci = self.watches[f][i];
                if self.clauses[ci][0] == f as u32 {
                    self.clauses[ci].swap(0, 1);
                }
                let w0 = self.clauses[ci][0];
                if self.lit_val(w0) == 1 {
                    i += 1;
                    continue;
                }
                for j in 2..self.clauses[ci].len() {
                    let q = self.clauses[ci][j];
                    if self.lit_val(q) != -1 {
                        self.clauses[ci].swap(1, j);
                        self.watches[f].swap_remove(i);
                        self.watches[q as usize].push(ci);
                        continue 'watchers;
                    }
                }
                if self.enqueue(w0, ci) {
                    i += 1;
                } else {
                    return Some(ci);
                }
            }
        }
        None
    }

    fn bump(&mut self, v: usize) {
        self.activity[v] += self.act_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.act_inc *= 1e-100;
        }
    }

    /// First-UIP conflict analysis. Returns the learned clause with the
    /// asserting literal in slot 0 and the backjump level.
    fn analyze(&mut self, confl: usize) -> (Vec<u32>, u32) {
        let mut learned = vec![0u32];
        let mut touched: Vec<usize> = Vec::new();
        let mut counter = 0usize;
        let mut p: Option<u32> = None;
        let mut idx = self.trail.len();
        let mut ci = confl;
        loop {
            for k in 0..self.clauses[ci].len() {
                let q = self.clauses[ci][k];
                if p == Some(q) {
                    continue;
                }
                let v = (q >> 1) as usize;
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    touched.push(v);
                    self.bump(v);
                    if self.level[v] == self.cur_level {
                        counter += 1;
                    } else {
                        learned.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[(self.trail[idx] >> 1) as usize] {
                    break;
                }
            }
            let pl = self.trail[idx];
            counter -= 1;
            if counter == 0 {
                learned[0] = pl ^ 1;
                break;
            }
            ci = self.reason[(pl >> 1) as usize];
            p = Some(pl);
        }
        let mut bl = 0;
        if learned.len() > 1 {
            let mut mi = 1;
            for j in 2..learned.len() {
                if self.level[(learned[j] >> 1) as usize] > self.level[(learned[mi] >> 1) as usize]
                {
                    mi = j;
                }
            }
            learned.swap(1, mi);
            bl = self.level[(learned[1] >> 1) as usize];
        }
        for v in touched {
            self.seen[v] = false;
        }
        self.act_inc /= 0.95;
        (learned, bl)
    }

    fn backtrack(&mut self, to: u32) {
        while let Some(&l) = self.trail.last() {
            let v = (l >> 1) as usize;
            if self.level[v] <= to {
                break;
            }
            self.phase[v] = self.val[v] == 1;
            self.val[v] = 0;
            self.reason[v] = NO_REASON;
            self.trail.pop();
        }
        self.qhead = self.trail.len();
        self.cur_level = to;
    }

    fn decide(&mut self) -> Option<u32> {
        let mut best: Option<usize> = None;
        for v in 0..self.nvars {
            if self.val[v] == 0 && best.map_or(true, |b| self.activity[v] > self.activity[b]) {
                best = Some(v);
            }
        }
        best.map(|v| ((v as u32) << 1) | !self.phase[v] as u32)
    }
}

/// Decides `cnf` within `conflict_limit` conflicts.
pub fn sat_solve(cnf: &Cnf, conflict_limit: usize) -> SatOutcome {
    let nvars = cnf.num_vars;
    let mut s = Solver::new(nvars);
    let done = |result: SatResult, model: Option<Vec<bool>>, conflicts: usize| SatOutcome {
        result,
        model,
        conflicts,
    };
    let mut units: Vec<u32> = Vec::new();
    for c in &cnf.clauses {
        let mut lits: Vec<u32> = c
            .iter()
            .map(|&l| {
                assert!(
                    l != 0 && l.unsigned_abs() as usize <= nvars,
                    "literal {} outside 1..={}",
                    l,
                    nvars
                );
                ilit(l)
            })
            .collect();
        lits.sort_unstable();
        lits.dedup();
        if lits.windows(2).any(|w| w[0] ^ 1 == w[1]) {
            continue;
        }
        match lits.len() {
            0 => return done(SatResult::Unsat, None, 0),
            1 => units.push(lits[0]),
            _ => {
                let ci = s.clauses.len();
                s.watches[lits[0] as usize].push(ci);
                s.watches[lits[1] as usize].push(ci);
                s.clauses.push(lits);
            }
        }
    }
    for u in units {
        if !s.enqueue(u, NO_REASON) {
            return done(SatResult::Unsat, None, 0);
        }
    }
    loop {
        if let Some(confl) = s.propagate() {
            s.conflicts += 1;
            if s.cur_level == 0 {
                return done(SatResult::Unsat, None, s.conflicts);
            }
            if s.conflicts >= conflict_limit {
                return done(SatResult::Limit, None, s.conflicts);
            }
            let (learned, bl) = s.analyze(confl);
            s.backtrack(bl);
            if learned.len() == 1 {
                if !s.enqueue(learned[0], NO_REASON) {
                    return done(SatResult::Unsat, None, s.conflicts);
                }
            } else {
                let ci = s.clauses.len();
                s.watches[learned[0] as usize].push(ci);
                s.watches[learned[1] as usize].push(ci);
                let asserting = learned[0];
                s.clauses.push(learned);
                let ok = s.enqueue(asserting, ci);
                debug_assert!(ok, "asserting literal must be free after backjump");
            }
        } else {
            match s.decide() {
                None => {
                    let model: Vec<bool> = (0..nvars).map(|v| s.val[v] == 1).collect();
                    for c in &cnf.clauses {
                        assert!(
                            c.iter().any(|&l| model[l.unsigned_abs() as usize - 1] == (l > 0)),
                            "model fails clause {:?}",
                            c
                        );
                    }
                    return done(SatResult::Sat, Some(model), s.conflicts);
                }
                Some(l) => {
                    s.cur_level += 1;
                    let ok = s.enqueue(l, NO_REASON);
                    debug_assert!(ok);
                }
            }
        }
    }
}
