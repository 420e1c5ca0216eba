//! And-inverter graphs.
//!
//! An [`Aig`] is a combinational or sequential network of two-input AND
//! nodes with complemented edges. Variables are numbered canonically:
//! variable 0 is constant false, variables `1..=num_inputs` are the
//! primary inputs, the next `num_latches` variables are latch outputs and
//! the remaining variables are AND nodes in topological order. A [`Lit`]
//! is a variable index with a complement bit, encoded AIGER-style as
//! `2 * var + complement`.

mod aiger;
mod builder;

pub use aiger::{parse_aiger, write_aiger};
pub use builder::AigBuilder;

use std::fmt;
use thiserror::Error;

/// Edge into a node: variable index plus complement bit.
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(u32);

/// Constant false.
pub const LIT_FALSE: Lit = Lit(0);
/// Constant true.
pub const LIT_TRUE: Lit = Lit(1);

impl Lit {
    pub fn from_var(var: u32, compl: bool) -> Lit {
        Lit(var * 2 + compl as u32)
    }

    /// Raw AIGER encoding, `2 * var + complement`.
    pub fn from_raw(raw: u32) -> Lit {
        Lit(raw)
    }

    pub fn raw(self) -> u32 {
        self.0
    }

    pub fn var(self) -> u32 {
        self.0 >> 1
    }

    pub fn is_compl(self) -> bool {
        self.0 & 1 == 1
    }

    /// True for the two constant literals.
    pub fn is_const(self) -> bool {
        self.0 < 2
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl std::ops::BitXor<bool> for Lit {
    type Output = Lit;
    fn bitxor(self, compl: bool) -> Lit {
        Lit(self.0 ^ compl as u32)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// What a variable index refers to.
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum VarKind {
    Const,
    /// Input position.
    Input(usize),
    /// Latch position.
    Latch(usize),
    /// Index into the AND node list.
    And(usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AigError {
    #[error("line {line}: {msg}")]
    MalformedHeader { line: usize, msg: String },
    #[error("line {line}: AND node is out of topological order or ill-formed")]
    NonTopologicalNode { line: usize },
    #[error("line {line}: literal {lit} references an undefined variable")]
    DanglingLiteral { line: usize, lit: u32 },
    #[error("arity mismatch: expected {expected} {what}, got {got}")]
    ArityMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid graph: {0}")]
    Invalid(String),
}

/// Immutable and-inverter graph in canonical variable order.
#[derive(Clone, PartialEq, Eq)]
pub struct Aig {
    num_inputs: usize,
    num_latches: usize,
    /// Fanins of AND node `i`, which defines variable `first_and_var + i`.
    ands: Vec<[Lit; 2]>,
    outputs: Vec<Lit>,
    /// Next-state literal per latch. Latches reset to 0.
    latch_next: Vec<Lit>,
}

/// Size and shape counters for an [`Aig`].
#[derive(Copy, Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StructuralMetrics {
    pub and_count: usize,
    /// Two fanin edges per AND node.
    pub edge_count: usize,
    /// Longest input-to-node path in AND levels; inputs sit at level 0.
    pub depth: usize,
}

impl Aig {
    /// Builds a graph after checking every structural invariant: fanin
    /// literals must reference earlier variables, outputs and next-state
    /// literals must reference defined variables, and the latch arrays
    /// must agree in length.
    pub fn new(
        num_inputs: usize,
        num_latches: usize,
        ands: Vec<[Lit; 2]>,
        outputs: Vec<Lit>,
        latch_next: Vec<Lit>,
    ) -> Result<Aig, AigError> {
        if latch_next.len() != num_latches {
            return Err(AigError::Invalid(format!(
                "{} latches declared but {} next-state literals given",
                num_latches,
                latch_next.len()
            )));
        }
        let first_and = 1 + num_inputs + num_latches;
        for (i, [a, b]) in ands.iter().enumerate() {
            let lhs = (first_and + i) as u32;
            if a.var() >= lhs || b.var() >= lhs {
                return Err(AigError::Invalid(format!(
                    "AND {} references a variable at or above its own index",
                    lhs
                )));
            }
        }
        let num_vars = first_and + ands.len();
        for l in outputs.iter().chain(latch_next.iter()) {
            if (l.var() as usize) >= num_vars {
                return Err(AigError::Invalid(format!(
                    "literal {} references an undefined variable",
                    l.raw()
                )));
            }
        }
        Ok(Aig {
            num_inputs,
            num_latches,
            ands,
            outputs,
            latch_next,
        })
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_latches(&self) -> usize {
        self.num_latches
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn and_count(&self) -> usize {
        self.ands.len()
    }

    pub fn ands(&self) -> &[[Lit; 2]] {
        &self.ands
    }

    pub fn outputs(&self) -> &[Lit] {
        &self.outputs
    }

    pub fn latch_next(&self) -> &[Lit] {
        &self.latch_next
    }

    pub fn is_combinational(&self) -> bool {
        self.num_latches == 0
    }

    /// Total variable count including the constant.
    pub fn num_vars(&self) -> usize {
        1 + self.num_inputs + self.num_latches + self.ands.len()
    }

    /// Variable defined by AND node `i`.
    pub fn and_var(&self, i: usize) -> u32 {
        (1 + self.num_inputs + self.num_latches + i) as u32
    }

    pub fn input_lit(&self, k: usize) -> Lit {
        debug_assert!(k < self.num_inputs);
        Lit::from_var((1 + k) as u32, false)
    }

    pub fn latch_lit(&self, k: usize) -> Lit {
        debug_assert!(k < self.num_latches);
        Lit::from_var((1 + self.num_inputs + k) as u32, false)
    }

    pub fn var_kind(&self, var: u32) -> VarKind {
        let v = var as usize;
        if v == 0 {
            VarKind::Const
        } else if v <= self.num_inputs {
            VarKind::Input(v - 1)
        } else if v <= self.num_inputs + self.num_latches {
            VarKind::Latch(v - 1 - self.num_inputs)
        } else {
            VarKind::And(v - 1 - self.num_inputs - self.num_latches)
        }
    }

    /// Fanins of the AND node defining `var`; None for non-AND variables.
    pub fn fanins(&self, var: u32) -> Option<[Lit; 2]> {
        match self.var_kind(var) {
            VarKind::And(i) => Some(self.ands[i]),
            _ => None,
        }
    }

    /// AND level per variable; inputs, latches and the constant are level 0.
    pub fn levels(&self) -> Vec<usize> {
        let mut lvl = vec![0usize; self.num_vars()];
        for i in 0..self.ands.len() {
            let v = self.and_var(i) as usize;
            let [a, b] = self.ands[i];
            lvl[v] = 1 + lvl[a.var() as usize].max(lvl[b.var() as usize]);
        }
        lvl
    }

    pub fn metrics(&self) -> StructuralMetrics {
        let depth = self.levels().into_iter().max().unwrap_or(0);
        StructuralMetrics {
            and_count: self.ands.len(),
            edge_count: self.ands.len() * 2,
            depth,
        }
    }

    /// Single-pattern simulation. Returns output values and the next latch
    /// state; latches contribute `latch_state` to the current cycle.
    pub fn simulate(
        &self,
        inputs: &[bool],
        latch_state: &[bool],
    ) -> Result<(Vec<bool>, Vec<bool>), AigError> {
        let (outs, next) = self.simulate_words(
            &inputs.iter().map(|&b| if b { !0u64 } else { 0 }).collect::<Vec<_>>(),
            &latch_state.iter().map(|&b| if b { !0u64 } else { 0 }).collect::<Vec<_>>(),
        )?;
        Ok((
            outs.into_iter().map(|w| w & 1 != 0).collect(),
            next.into_iter().map(|w| w & 1 != 0).collect(),
        ))
    }

    /// 64-way bit-parallel simulation over machine words.
    pub fn simulate_words(
        &self,
        inputs: &[u64],
        latch_state: &[u64],
    ) -> Result<(Vec<u64>, Vec<u64>), AigError> {
        if inputs.len() != self.num_inputs {
            return Err(AigError::ArityMismatch {
                what: "input values",
                expected: self.num_inputs,
                got: inputs.len(),
            });
        }
        if latch_state.len() != self.num_latches {
            return Err(AigError::ArityMismatch {
                what: "latch state values",
                expected: self.num_latches,
                got: latch_state.len(),
            });
        }
        let mut vals = vec![0u64; self.num_vars()];
        vals[1..=self.num_inputs].copy_from_slice(inputs);
        let lbase = 1 + self.num_inputs;
        vals[lbase..lbase + self.num_latches].copy_from_slice(latch_state);
        let eval = |vals: &[u64], l: Lit| -> u64 {
            let v = vals[l.var() as usize];
            if l.is_compl() {
                !v
            } else {
                v
            }
        };
        for i in 0..self.ands.len() {
            let [a, b] = self.ands[i];
            vals[self.and_var(i) as usize] = eval(&vals, a) & eval(&vals, b);
        }
        let outs = self.outputs.iter().map(|&l| eval(&vals, l)).collect();
        let next = self.latch_next.iter().map(|&l| eval(&vals, l)).collect();
        Ok((outs, next))
    }
}

impl fmt::Debug for Aig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Aig(i={} l={} o={} a={})",
            self.num_inputs,
            self.num_latches,
            self.outputs.len(),
            self.ands.len()
        )
    }
}

/// Structural and functional metrics computed at once.
pub fn metrics(aig: &Aig) -> StructuralMetrics {
    aig.metrics()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> Aig {
        // and chain over n+1 inputs: ((i0 & i1) & i2) & ...
        let mut b = AigBuilder::new(n + 1, 0);
        let mut acc = b.input(0);
        for k in 1..=n {
            let i = b.input(k);
            acc = b.and(acc, i);
        }
        b.finish(vec![acc], vec![])
    }

    #[test]
    fn lit_encoding() {
        let l = Lit::from_var(3, true);
        assert_eq!(l.raw(), 7);
        assert_eq!(l.var(), 3);
        assert!(l.is_compl());
        assert_eq!((!l).raw(), 6);
        assert!(LIT_FALSE.is_const() && LIT_TRUE.is_const());
        assert_eq!(!LIT_FALSE, LIT_TRUE);
    }

    #[test]
    fn chain_metrics() {
        let m = chain(3).metrics();
        assert_eq!(m.and_count, 3);
        assert_eq!(m.edge_count, 6);
        assert_eq!(m.depth, 3);
    }

    #[test]
    fn empty_graph_metrics() {
        let a = Aig::new(2, 0, vec![], vec![Lit::from_var(1, false)], vec![]).unwrap();
        let m = a.metrics();
        assert_eq!((m.and_count, m.edge_count, m.depth), (0, 0, 0));
    }

    #[test]
    fn simulate_and() {
        let a = chain(1); // i0 & i1
        for (x, y) in [(false, false), (false, true), (true, false), (true, true)] {
            let (outs, _) = a.simulate(&[x, y], &[]).unwrap();
            assert_eq!(outs, vec![x && y]);
        }
    }

    #[test]
    fn simulate_const_and_inverter() {
        let a = Aig::new(1, 0, vec![], vec![LIT_TRUE, !Lit::from_var(1, false)], vec![]).unwrap();
        let (outs, _) = a.simulate(&[true], &[]).unwrap();
        assert_eq!(outs, vec![true, false]);
        let (outs, _) = a.simulate(&[false], &[]).unwrap();
        assert_eq!(outs, vec![true, true]);
    }

    #[test]
    fn simulate_arity_checked() {
        let a = chain(1);
        assert!(matches!(
            a.simulate(&[true], &[]),
            Err(AigError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn latch_state_feeds_current_cycle() {
        // latch output drives the output; next state is the input.
        let b = AigBuilder::new(1, 1);
        let i = b.input(0);
        let l = b.latch(0);
        let a = b.finish(vec![l], vec![i]);
        let (outs, next) = a.simulate(&[true], &[false]).unwrap();
        assert_eq!(outs, vec![false]);
        assert_eq!(next, vec![true]);
    }

    #[test]
    fn depth_bounded_by_and_count() {
        for n in [0, 1, 2, 5, 9] {
            let m = chain(n).metrics();
            assert!(m.depth <= m.and_count);
        }
    }
}
