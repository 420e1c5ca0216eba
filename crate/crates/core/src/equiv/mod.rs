//! Combinational equivalence checking gate.
//!
//! Two graphs are compared by building a miter (OR of pairwise output
//! XORs), translating it to CNF with the Tseitin transformation and
//! deciding satisfiability. Sequential designs are unrolled one frame
//! first: latch outputs become free inputs, next-state literals extra
//! outputs. Any satisfying assignment is replayed through `simulate` on
//! both graphs before it is reported as a counterexample.

use std::io;
use std::io::Write as _;
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aig::{Aig, AigBuilder, Lit, LIT_FALSE};

mod solver;

pub use solver::{sat_solve, SatOutcome};

/// Conjunctive normal form over 1-based DIMACS literals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cnf {
    pub num_vars: usize,
    pub clauses: Vec<Vec<i32>>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SatResult {
    Sat,
    Unsat,
    Limit,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquivStatus {
    Equivalent,
    NotEquivalent,
    ResourceOut,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivVerdict {
    pub status: EquivStatus,
    /// Inputs (then latch states, for unrolled graphs) separating the two
    /// circuits. Present exactly when status is NotEquivalent.
    pub counterexample: Option<Vec<bool>>,
    pub conflicts_used: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EquivError {
    #[error("interface mismatch: {what} differ ({a} vs {b})")]
    InterfaceMismatch {
        what: &'static str,
        a: usize,
        b: usize,
    },
    #[error("miter requires combinational graphs, got {latches} latches")]
    Sequential { latches: usize },
}

pub const DEFAULT_CONFLICT_LIMIT: usize = 1_000_000;

/// Removes latches for a depth-1 bounded check: each latch output turns
/// into a fresh input after the real ones, each next-state literal into an
/// extra output after the real ones. Variable numbering is unchanged.
pub fn unroll_one_frame(aig: &Aig) -> Aig {
    if aig.is_combinational() {
        return aig.clone();
    }
    let outputs = aig
        .outputs()
        .iter()
        .chain(aig.latch_next())
        .copied()
        .collect();
    Aig::new(
        aig.num_inputs() + aig.num_latches(),
        0,
        aig.ands().to_vec(),
        outputs,
        Vec::new(),
    )
    .expect("latch reinterpretation keeps the variable layout")
}

/// Single-output graph that is 1 exactly where some output pair of `a`
/// and `b` differs. Shared structure collapses by hashing, so the miter
/// of a graph against itself folds to constant false.
pub fn build_miter(a: &Aig, b: &Aig) -> Result<Aig, EquivError> {
    if !a.is_combinational() || !b.is_combinational() {
        return Err(EquivError::Sequential {
            latches: a.num_latches().max(b.num_latches()),
        });
    }
    if a.num_inputs() != b.num_inputs() {
        return Err(EquivError::InterfaceMismatch {
            what: "input counts",
            a: a.num_inputs(),
            b: b.num_inputs(),
        });
    }
    if a.num_outputs() != b.num_outputs() {
        return Err(EquivError::InterfaceMismatch {
            what: "output counts",
            a: a.num_outputs(),
            b: b.num_outputs(),
        });
    }
    let mut bld = AigBuilder::new(a.num_inputs(), 0);
    let leaves: Vec<Lit> = (0..a.num_inputs()).map(|k| bld.input(k)).collect();
    let (oa, _) = bld.append_aig(a, &leaves);
    let (ob, _) = bld.append_aig(b, &leaves);
    let mut diff = LIT_FALSE;
    for k in 0..oa.len() {
        let x = bld.xor(oa[k], ob[k]);
        diff = bld.or(diff, x);
    }
    Ok(bld.finish_compact(vec![diff], vec![]))
}

/// Tseitin transformation of a single-output graph, asserting the output.
/// CNF variable v+1 stands for graph variable v; variable 1 is the
/// constant-false wire and gets a unit clause when anything references it.
pub fn to_cnf(aig: &Aig) -> Cnf {
    assert_eq!(aig.num_outputs(), 1, "CNF encoding expects one output");
    assert!(aig.is_combinational(), "CNF encoding expects no latches");
    let lit = |l: Lit| -> i32 {
        let v = (l.var() + 1) as i32;
        if l.is_compl() {
            -v
        } else {
            v
        }
    };
    let mut clauses = Vec::with_capacity(aig.and_count() * 3 + 2);
    let mut const_used = false;
    for i in 0..aig.ands().len() {
        let v = (aig.and_var(i) + 1) as i32;
        let [a, b] = aig.ands()[i];
        const_used |= a.var() == 0 || b.var() == 0;
        clauses.push(vec![-v, lit(a)]);
        clauses.push(vec![-v, lit(b)]);
        clauses.push(vec![v, -lit(a), -lit(b)]);
    }
    let out = aig.outputs()[0];
    const_used |= out.var() == 0;
    clauses.push(vec![lit(out)]);
    if const_used {
        clauses.push(vec![-1]);
    }
    Cnf {
        num_vars: aig.num_vars(),
        clauses,
    }
}

/// Decides equivalence of two interface-compatible graphs, unrolling one
/// frame when latches are present. A NotEquivalent verdict always carries
/// a counterexample that has been replayed on both graphs.
pub fn check_equiv(a: &Aig, b: &Aig, conflict_limit: usize) -> Result<EquivVerdict, EquivError> {
    for (what, x, y) in [
        ("input counts", a.num_inputs(), b.num_inputs()),
        ("latch counts", a.num_latches(), b.num_latches()),
        ("output counts", a.num_outputs(), b.num_outputs()),
    ] {
        if x != y {
            return Err(EquivError::InterfaceMismatch { what, a: x, b: y });
        }
    }
    let ua = unroll_one_frame(a);
    let ub = unroll_one_frame(b);
    let miter = build_miter(&ua, &ub)?;
    let cnf = to_cnf(&miter);
    let out = sat_solve(&cnf, conflict_limit);
    let verdict = match out.result {
        SatResult::Unsat => EquivVerdict {
            status: EquivStatus::Equivalent,
            counterexample: None,
            conflicts_used: out.conflicts,
        },
        SatResult::Limit => EquivVerdict {
            status: EquivStatus::ResourceOut,
            counterexample: None,
            conflicts_used: out.conflicts,
        },
        SatResult::Sat => {
            let model = out.model.expect("sat result carries a model");
            let cex: Vec<bool> = (0..ua.num_inputs()).map(|k| model[1 + k]).collect();
            let (ra, _) = ua.simulate(&cex, &[]).expect("replay on first graph");
            let (rb, _) = ub.simulate(&cex, &[]).expect("replay on second graph");
            assert_ne!(ra, rb, "solver counterexample failed to replay");
            EquivVerdict {
                status: EquivStatus::NotEquivalent,
                counterexample: Some(cex),
                conflicts_used: out.conflicts,
            }
        }
    };
    Ok(verdict)
}

/// Writes `p cnf` DIMACS with zero-terminated clauses.
pub fn write_dimacs<W: io::Write>(cnf: &Cnf, w: &mut W) -> io::Result<()> {
    writeln!(w, "p cnf {} {}", cnf.num_vars, cnf.clauses.len())?;
    for c in &cnf.clauses {
        for l in c {
            write!(w, "{} ", l)?;
        }
        writeln!(w, "0")?;
    }
    Ok(())
}

/// Runs an external solver command on a DIMACS dump of `cnf`. The command
/// gets the file path as its single argument and answers through SAT
/// competition exit codes: 10 satisfiable (model on stdout `v` lines),
/// 20 unsatisfiable, anything else counts as resources exhausted.
pub fn solve_external(cnf: &Cnf, command: &str) -> io::Result<(SatResult, Option<Vec<bool>>)> {
    let mut file = tempfile::NamedTempFile::new()?;
    write_dimacs(cnf, &mut file)?;
    file.flush()?;
    let output = Command::new(command).arg(file.path()).output()?;
    match output.status.code() {
        Some(10) => {
            let stdout = String::from_utf8_lossy(&output.stdout);
            let mut model = vec![false; cnf.num_vars];
            for line in stdout.lines() {
                let mut toks = line.split_whitespace();
                if toks.next() != Some("v") {
                    continue;
                }
                for t in toks {
                    let l: i32 = t.parse().map_err(|_| {
                        io::Error::new(io::ErrorKind::InvalidData, "bad literal in model")
                    })?;
                    if l == 0 {
                        break;
                    }
                    let v = l.unsigned_abs() as usize;
                    if v > cnf.num_vars {
                        return Err(io::Error::new(
                            io::ErrorKind::InvalidData,
                            "model literal out of range",
                        ));
                    }
                    model[v - 1] = l > 0;
                }
            }
            for c in &cnf.clauses {
                if !c.iter().any(|&l| model[l.unsigned_abs() as usize - 1] == (l > 0)) {
                    return Err(io::Error::new(
                        io::ErrorKind::InvalidData,
                        "external model fails a clause",
                    ));
                }
            }
            Ok((SatResult::Sat, Some(model)))
        }
        Some(20) => Ok((SatResult::Unsat, None)),
        _ => Ok((SatResult::Limit, None)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn and2() -> Aig {
        let mut b = AigBuilder::new(2, 0);
        let n = b.and(b.input(0), b.input(1));
        b.finish(vec![n], vec![])
    }

    fn or2() -> Aig {
        let mut b = AigBuilder::new(2, 0);
        let n = b.or(b.input(0), b.input(1));
        b.finish(vec![n], vec![])
    }

    fn and2_commuted() -> Aig {
        let mut b = AigBuilder::new(2, 0);
        let n = b.and(b.input(1), b.input(0));
        b.finish(vec![n], vec![])
    }

    #[test]
    fn miter_of_identical_graphs_is_constant_false() {
        let a = and2();
        let m = build_miter(&a, &a).unwrap();
        assert_eq!(m.num_outputs(), 1);
        assert_eq!(m.outputs()[0], LIT_FALSE);
        let v = check_equiv(&a, &a, DEFAULT_CONFLICT_LIMIT).unwrap();
        assert_eq!(v.status, EquivStatus::Equivalent);
        assert_eq!(v.counterexample, None);
    }

    #[test]
    fn commuted_and_is_equivalent() {
        let v = check_equiv(&and2(), &and2_commuted(), DEFAULT_CONFLICT_LIMIT).unwrap();
        assert_eq!(v.status, EquivStatus::Equivalent);
    }

    #[test]
    fn and_vs_or_yields_validated_counterexample() {
        let a = and2();
        let b = or2();
        let v = check_equiv(&a, &b, DEFAULT_CONFLICT_LIMIT).unwrap();
        assert_eq!(v.status, EquivStatus::NotEquivalent);
        let cex = v.counterexample.unwrap();
        assert_eq!(cex.len(), 2);
        let (ra, _) = a.simulate(&cex, &[]).unwrap();
        let (rb, _) = b.simulate(&cex, &[]).unwrap();
        assert_ne!(ra, rb);
    }

    #[test]
    fn interface_mismatch_is_reported() {
        let mut b = AigBuilder::new(3, 0);
        let n = b.and(b.input(0), b.input(2));
        let three = b.finish(vec![n], vec![]);
        let err = check_equiv(&and2(), &three, DEFAULT_CONFLICT_LIMIT).unwrap_err();
        assert_eq!(
            err,
            EquivError::InterfaceMismatch {
                what: "input counts",
                a: 2,
                b: 3
            }
        );
    }

    #[test]
    fn tseitin_counts_for_single_and() {
        let cnf = to_cnf(&and2());
        assert_eq!(cnf.num_vars, 4);
        assert_eq!(cnf.clauses.len(), 4);
        assert!(cnf
            .clauses
            .iter()
            .all(|c| c.iter().all(|&l| l != 0 && l.unsigned_abs() <= 4)));
    }

    #[test]
    fn constant_false_output_encodes_unsat() {
        let b = AigBuilder::new(1, 0);
        let g = b.finish(vec![LIT_FALSE], vec![]);
        let cnf = to_cnf(&g);
        assert!(cnf.clauses.contains(&vec![1]));
        assert!(cnf.clauses.contains(&vec![-1]));
        assert_eq!(sat_solve(&cnf, 1000).result, SatResult::Unsat);
    }

    #[test]
    fn solver_basics() {
        let unsat = Cnf {
            num_vars: 1,
            clauses: vec![vec![1], vec![-1]],
        };
        assert_eq!(sat_solve(&unsat, 1000).result, SatResult::Unsat);
        let sat = Cnf {
            num_vars: 2,
            clauses: vec![vec![1, 2]],
        };
        let out = sat_solve(&sat, 1000);
        assert_eq!(out.result, SatResult::Sat);
        let m = out.model.unwrap();
        assert!(m[0] || m[1]);
    }

    #[test]
    fn conflict_limit_reports_resource_out() {
        let cnf = Cnf {
            num_vars: 2,
            clauses: vec![vec![1, 2], vec![1, -2], vec![-1, 2], vec![-1, -2]],
        };
        assert_eq!(sat_solve(&cnf, DEFAULT_CONFLICT_LIMIT).result, SatResult::Unsat);
        assert_eq!(sat_solve(&cnf, 1).result, SatResult::Limit);
    }

    #[test]
    fn random_cnf_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for round in 0..60 {
            let nv = 10;
            let nc = if round % 2 == 0 { 30 } else { 55 };
            let mut clauses = Vec::with_capacity(nc);
            for _ in 0..nc {
                let mut vars = [0usize; 3];
                vars[0] = rng.gen_range(0..nv);
                loop {
                    vars[1] = rng.gen_range(0..nv);
                    if vars[1] != vars[0] {
                        break;
                    }
                }
                loop {
                    vars[2] = rng.gen_range(0..nv);
                    if vars[2] != vars[0] && vars[2] != vars[1] {
                        break;
                    }
                }
                clauses.push(
                    vars.iter()
                        .map(|&v| {
                            let s: bool = rng.gen();
                            if s {
                                (v + 1) as i32
                            } else {
                                -((v + 1) as i32)
                            }
                        })
                        .collect::<Vec<i32>>(),
                );
            }
            let cnf = Cnf {
                num_vars: nv,
                clauses,
            };
            let brute = (0..1u32 << nv).any(|m| {
                cnf.clauses.iter().all(|c| {
                    c.iter()
                        .any(|&l| (m >> (l.unsigned_abs() - 1) & 1 == 1) == (l > 0))
                })
            });
            let got = sat_solve(&cnf, DEFAULT_CONFLICT_LIMIT);
            let expect = if brute { SatResult::Sat } else { SatResult::Unsat };
            assert_eq!(got.result, expect, "round {}", round);
        }
    }

    #[test]
    fn miter_models_enumerate_exactly_the_differing_vectors() {
        let a = and2();
        let b = or2();
        let miter = build_miter(&a, &b).unwrap();
        let mut cnf = to_cnf(&miter);
        let mut found = Vec::new();
        loop {
            let out = sat_solve(&cnf, DEFAULT_CONFLICT_LIMIT);
            match out.result {
                SatResult::Sat => {
                    let m = out.model.unwrap();
                    let bits = (m[1], m[2]);
                    found.push(bits);
                    cnf.clauses.push(vec![
                        if m[1] { -2 } else { 2 },
                        if m[2] { -3 } else { 3 },
                    ]);
                }
                SatResult::Unsat => break,
                SatResult::Limit => panic!("limit on a 2-input miter"),
            }
        }
        found.sort_unstable();
        assert_eq!(found, vec![(false, true), (true, false)]);
    }

    #[test]
    fn unroll_moves_latches_to_interface() {
        let mut b = AigBuilder::new(1, 1);
        let n = b.and(b.input(0), b.latch(0));
        let seq = b.finish(vec![n], vec![!n]);
        let u = unroll_one_frame(&seq);
        assert!(u.is_combinational());
        assert_eq!(u.num_inputs(), 2);
        assert_eq!(u.num_outputs(), 2);
        assert_eq!(u.and_count(), 1);
        let comb = and2();
        let same = unroll_one_frame(&comb);
        assert_eq!(same.num_inputs(), comb.num_inputs());
        assert_eq!(same.num_outputs(), comb.num_outputs());
    }

    #[test]
    fn sequential_graphs_check_through_unrolling() {
        let mut b = AigBuilder::new(2, 1);
        let q = b.latch(0);
        let t = b.and(b.input(0), b.input(1));
        let n = b.and(t, q);
        let seq = b.finish(vec![n], vec![n]);
        let balanced = crate::passes::balance(&seq).0;
        let v = check_equiv(&seq, &balanced, DEFAULT_CONFLICT_LIMIT).unwrap();
        assert_eq!(v.status, EquivStatus::Equivalent);

        let mut b2 = AigBuilder::new(2, 1);
        let q2 = b2.latch(0);
        let t2 = b2.or(b2.input(0), b2.input(1));
        let n2 = b2.and(t2, q2);
        let other = b2.finish(vec![n2], vec![n2]);
        let v2 = check_equiv(&seq, &other, DEFAULT_CONFLICT_LIMIT).unwrap();
        assert_eq!(v2.status, EquivStatus::NotEquivalent);
        assert_eq!(v2.counterexample.unwrap().len(), 3);
    }

    #[test]
    fn fault_injection_is_caught() {
        let mut b = AigBuilder::new(3, 0);
        let t = b.and(b.input(0), b.input(1));
        let n = b.and(t, b.input(2));
        let g = b.finish(vec![n], vec![]);
        let params = crate::passes::PassParams {
            fault_xor: true,
            ..Default::default()
        };
        let swapped = crate::passes::rewrite(&g, &params).0;
        let v = check_equiv(&g, &swapped, DEFAULT_CONFLICT_LIMIT).unwrap();
        assert_eq!(v.status, EquivStatus::NotEquivalent);
        assert!(v.counterexample.is_some());
    }

    #[test]
    fn clean_rewrite_keeps_equivalence() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let ni = 4;
            let mut b = AigBuilder::new(ni, 0);
            let mut pool: Vec<Lit> = (0..ni).map(|k| b.input(k)).collect();
            for _ in 0..12 {
                let x = pool[rng.gen_range(0..pool.len())];
                let y = pool[rng.gen_range(0..pool.len())];
                let (x, y) = (
                    if rng.gen() { !x } else { x },
                    if rng.gen() { !y } else { y },
                );
                let n = b.and(x, y);
                pool.push(n);
            }
            let out = *pool.last().unwrap();
            let g = b.finish(vec![out], vec![]);
            let rewritten = crate::passes::rewrite(&g, &Default::default()).0;
            let v = check_equiv(&g, &rewritten, DEFAULT_CONFLICT_LIMIT).unwrap();
            assert_eq!(v.status, EquivStatus::Equivalent);
        }
    }

    #[test]
    fn dimacs_and_external_solver_roundtrip() {
        use std::os::unix::fs::PermissionsExt;

        let cnf = Cnf {
            num_vars: 2,
            clauses: vec![vec![1, 2]],
        };
        let mut buf = Vec::new();
        write_dimacs(&cnf, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("p cnf 2 1\n"));
        assert!(text.contains("1 2 0"));

        let dir = tempfile::tempdir().unwrap();
        let write_script = |name: &str, body: &str| {
            let path = dir.path().join(name);
            std::fs::write(&path, body).unwrap();
            std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
            path
        };
        let sat = write_script("sat.sh", "#!/bin/sh\necho 's SATISFIABLE'\necho 'v 1 2 0'\nexit 10\n");
        let unsat = write_script("unsat.sh", "#!/bin/sh\nexit 20\n");
        let crash = write_script("crash.sh", "#!/bin/sh\nexit 1\n");

        let (r, model) = solve_external(&cnf, sat.to_str().unwrap()).unwrap();
        assert_eq!(r, SatResult::Sat);
        assert_eq!(model, Some(vec![true, true]));
        let (r, model) = solve_external(&cnf, unsat.to_str().unwrap()).unwrap();
        assert_eq!(r, SatResult::Unsat);
        assert_eq!(model, None);
        let (r, _) = solve_external(&cnf, crash.to_str().unwrap()).unwrap();
        assert_eq!(r, SatResult::Limit);
    }
}
