//! Cone collapsing and resynthesis.

use crate::aig::Lit;
use crate::aig::{Aig, LIT_FALSE, LIT_TRUE};

use super::npn::{elit, library, ELit, Entry, EntryBuilder, E_FALSE, E_TRUE};
use super::work::{plan_entry, plan_gain, PlanRef, RewritePlan, WorkAig};
use crate::tt::{reduce_support, tt_mask};
use super::{PassDelta, PassParams};

/// Collapses each maximum fanout-free cone with at most
/// `refactor_max_inputs` leaves to its truth table and resynthesizes it
/// by Shannon decomposition, keeping the result only when strictly
/// smaller.
pub fn refactor(aig: &Aig, params: &PassParams) -> (Aig, PassDelta) {
    params.validate().expect("refactor params out of range");
    let mut w = WorkAig::from_aig(aig);
    let initial_vars = w.num_vars();
    for v in 1..initial_vars {
        if w.is_leaf_var(v) || !w.is_live_and(v) {
            continue;
        }
        let members = w.mffc(v);
        if members.len() < 2 {
            continue;
        }
        let leaves = w.cone_leaves(&members);
        if leaves.len() > params.refactor_max_inputs {
            continue;
        }
        let tt = w
            .node_tt(v, &leaves)
            .expect("cone boundary always cuts the root");
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
            k => {
                let entry = synthesize(rtt, k);
                let lits: Vec<Lit> = rleaves
                    .iter()
                    .map(|&x| Lit::from_var(x as u32, false))
                    .collect();
                plan_entry(&w, v, &entry, &lits)
            }
        };
        let plan = match plan {
            Some(p) => p,
            None => continue,
        };
        let gain = plan_gain(&w, v, &plan);
        if gain > 0 {
            let delta = w.commit(v, &plan);
            debug_assert_eq!(delta, -gain);
        }
    }
    let out = w.extract();
    let delta = PassDelta::capture("refactor", aig, &out);
    (out, delta)
}

/// Builds a structure for `tt` over `k` leaves: library lookup through
/// three variables, Shannon expansion on the highest variable above that.
fn synthesize(tt: u64, k: usize) -> Entry {
    let mut eb = EntryBuilder::new(k as u8);
    let vars: Vec<ELit> = (0..k).map(|i| elit(1 + i as u8, false)).collect();
    let root = synth_rec(&mut eb, tt, &vars);
    eb.finish(root)
}

fn synth_rec(eb: &mut EntryBuilder, tt: u64, vars: &[ELit]) -> ELit {
    let k = vars.len();
    let mask = tt_mask(k);
    let t = tt & mask;
    if t == 0 {
        return E_FALSE;
    }
    if t == mask {
        return E_TRUE;
    }
    let (keep, rtt) = reduce_support(t, k);
    if keep.len() < k {
        let rvars: Vec<ELit> = keep.iter().map(|&i| vars[i]).collect();
        return synth_rec(eb, rtt, &rvars);
    }
    if k == 1 {
        return vars[0] ^ if t == 0x2 { 0 } else { 1 };
    }
    if k <= 3 {
        let entry = library().get(k, t).expect("library covers small functions");
        return eb.append(entry, vars);
    }
    let x = vars[k - 1];
    let half = 1usize << (k - 1);
    let cof0 = t & tt_mask(k - 1);
    let cof1 = (t >> half) & tt_mask(k - 1);
    let l0 = synth_rec(eb, cof0, &vars[..k - 1]);
    let l1 = synth_rec(eb, cof1, &vars[..k - 1]);
    let hi = eb.and(x, l1);
    let lo = eb.and(x ^ 1, l0);
    eb.or(hi, lo)
}
