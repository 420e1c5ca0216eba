//! Benchmark designs: structured generators with known functions, seeded
//! random graphs, and directory load/save in AIGER form.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aig::{parse_aiger, write_aiger, Aig, AigBuilder, Lit};

/// Ripple-carry adder: inputs a0..a(n-1), b0..b(n-1) (little-endian),
/// outputs s0..s(n-1), carry.
pub fn ripple_adder(bits: usize) -> Aig {
    assert!(bits >= 1);
    let mut b = AigBuilder::new(2 * bits, 0);
    let mut carry: Option<Lit> = None;
    let mut outs = Vec::new();
    for k in 0..bits {
        let a = b.input(k);
        let y = b.input(bits + k);
        let half = b.xor(a, y);
        match carry {
            None => {
                outs.push(half);
                carry = Some(b.and(a, y));
            }
            Some(c) => {
                outs.push(b.xor(half, c));
                let t1 = b.and(a, y);
                let t2 = b.and(c, half);
                carry = Some(b.or(t1, t2));
            }
        }
    }
    outs.push(carry.unwrap());
    b.finish(outs, vec![])
}

/// XOR fold over n inputs.
pub fn parity(inputs: usize) -> Aig {
    assert!(inputs >= 2);
    let mut b = AigBuilder::new(inputs, 0);
    let mut acc = b.input(0);
    for k in 1..inputs {
        acc = b.xor(acc, b.input(k));
    }
    b.finish(vec![acc], vec![])
}

/// 2^k-way selector: inputs sel0..sel(k-1) then d0..d(2^k - 1); the output
/// is the data bit addressed by the selector (sel0 = least significant).
pub fn mux_tree(sel_bits: usize) -> Aig {
    assert!((1..=4).contains(&sel_bits));
    let data = 1usize << sel_bits;
    let mut b = AigBuilder::new(sel_bits + data, 0);
    let mut layer: Vec<Lit> = (0..data).map(|k| b.input(sel_bits + k)).collect();
    for s in 0..sel_bits {
        let sel = b.input(s);
        layer = layer.chunks(2).map(|pair| b.mux(sel, pair[1], pair[0])).collect();
    }
    assert_eq!(layer.len(), 1);
    b.finish(layer, vec![])
}

/// Balanced conjunction of n inputs.
pub fn and_tree(inputs: usize) -> Aig {
    assert!(inputs >= 2);
    let mut b = AigBuilder::new(inputs, 0);
    let mut layer: Vec<Lit> = (0..inputs).map(|k| b.input(k)).collect();
    while layer.len() > 1 {
        let mut next = Vec::new();
        for pair in layer.chunks(2) {
            next.push(if pair.len() == 2 { b.and(pair[0], pair[1]) } else { pair[0] });
        }
        layer = next;
    }
    b.finish(layer, vec![])
}

/// Linear disjunction of n inputs.
pub fn or_chain(inputs: usize) -> Aig {
    assert!(inputs >= 2);
    let mut b = AigBuilder::new(inputs, 0);
    let mut acc = b.input(0);
    for k in 1..inputs {
        acc = b.or(acc, b.input(k));
    }
    b.finish(vec![acc], vec![])
}

/// n-stage shift register: one input, output is the oldest stage.
pub fn shift_register(stages: usize) -> Aig {
    assert!(stages >= 1);
    let b = AigBuilder::new(1, stages);
    let mut next = vec![b.input(0)];
    for k in 0..stages - 1 {
        next.push(b.latch(k));
    }
    let out = b.latch(stages - 1);
    b.finish(vec![out], next)
}

/// Binary up-counter with enable: increments each step the input is high;
/// outputs the counter bits.
pub fn toggle_counter(bits: usize) -> Aig {
    assert!(bits >= 1);
    let mut b = AigBuilder::new(1, bits);
    let mut carry = b.input(0);
    let mut next = Vec::new();
    let mut outs = Vec::new();
    for k in 0..bits {
        let q = b.latch(k);
        outs.push(q);
        next.push(b.xor(q, carry));
        carry = b.and(q, carry);
    }
    b.finish(outs, next)
}

/// Seeded random combinational graph built from and/or/xor over a growing
/// literal pool; at most `max_ands` AND nodes. Output is the last node.
pub fn random_aig(seed: u64, inputs: usize, max_ands: usize) -> Aig {
    assert!(inputs >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = AigBuilder::new(inputs, 0);
    let mut pool: Vec<Lit> = (0..inputs).map(|k| b.input(k)).collect();
    let mut out = pool[0];
    while b.and_count() < max_ands.saturating_sub(2) {
        let x = pool[rng.gen_range(0..pool.len())];
        let y = pool[rng.gen_range(0..pool.len())];
        let x = if rng.gen_bool(0.3) { !x } else { x };
        let node = match rng.gen_range(0..4u32) {
            0 => b.and(x, y),
            1 => b.or(x, y),
            _ => b.xor(x, y),
        };
        pool.push(node);
        out = node;
    }
    b.finish_compact(vec![out], vec![])
}

/// Like [`random_aig`] but every AND node is also an output, so any
/// corrupted rewrite site is directly observable.
pub fn observable_aig(seed: u64, inputs: usize, max_ands: usize) -> Aig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = AigBuilder::new(inputs, 0);
    let pool_init: Vec<Lit> = (0..inputs).map(|k| b.input(k)).collect();
    let mut pool = pool_init;
    let mut ands = Vec::new();
    while b.and_count() < max_ands {
        let x = pool[rng.gen_range(0..pool.len())];
        let y = pool[rng.gen_range(0..pool.len())];
        let before = b.and_count();
        let node = b.and(x, y);
        // structural hashing may fold the pair onto an existing literal
        if b.and_count() > before {
            ands.push(node);
            pool.push(node);
        }
    }
    b.finish(ands, vec![])
}

/// The stock 20-design benchmark set: arithmetic, control, trees, two
/// sequential toys, and seeded random graphs.
pub fn default_corpus() -> Vec<(String, Aig)> {
    let mut corpus: Vec<(String, Aig)> = vec![
        ("add4".into(), ripple_adder(4)),
        ("add8".into(), ripple_adder(8)),
        ("andtree8".into(), and_tree(8)),
        ("andtree16".into(), and_tree(16)),
        ("mux2".into(), mux_tree(2)),
        ("mux3".into(), mux_tree(3)),
        ("orchain8".into(), or_chain(8)),
        ("par8".into(), parity(8)),
        ("par16".into(), parity(16)),
        ("shift4".into(), shift_register(4)),
        ("toggle3".into(), toggle_counter(3)),
    ];
    for seed in 0..9u64 {
        let inputs = 5 + (seed as usize % 4);
        let max_ands = 40 + 20 * (seed as usize);
        corpus.push((format!("rnd{seed}"), random_aig(seed, inputs, max_ands)));
    }
    corpus.sort_by(|a, b| a.0.cmp(&b.0));
    corpus
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{file}: {msg}")]
    Parse { file: String, msg: String },
}

/// Reads every `.aag` file in `dir`, sorted by filename; the design id is
/// the file stem.
pub fn load_corpus(dir: &Path) -> Result<Vec<(String, Aig)>, CorpusError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "aag"))
        .collect();
    paths.sort();
    let mut corpus = Vec::new();
    for path in paths {
        let name = path.file_stem().unwrap_or_default().to_string_lossy().to_string();
        let text = std::fs::read_to_string(&path)?;
        let aig = parse_aiger(&text).map_err(|e| CorpusError::Parse {
            file: path.display().to_string(),
            msg: e.to_string(),
        })?;
        corpus.push((name, aig));
    }
    Ok(corpus)
}

pub fn save_corpus(dir: &Path, corpus: &[(String, Aig)]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (id, aig) in corpus {
        std::fs::write(dir.join(format!("{id}.aag")), write_aiger(aig))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn bits(value: usize, width: usize) -> Vec<bool> {
        (0..width).map(|k| value >> k & 1 == 1).collect()
    }

    fn word(bools: &[bool]) -> usize {
        bools.iter().enumerate().map(|(k, b)| (*b as usize) << k).sum()
    }

    #[test]
    fn adder_matches_arithmetic() {
        let aig = ripple_adder(4);
        for a in 0..16usize {
            for c in 0..16usize {
                let mut ins = bits(a, 4);
                ins.extend(bits(c, 4));
                let (outs, _) = aig.simulate(&ins, &[]).unwrap();
                assert_eq!(word(&outs), a + c, "inputs {a} {c}");
            }
        }
    }

    #[test]
    fn parity_is_the_xor_fold() {
        let aig = parity(8);
        for v in 0..256usize {
            let (outs, _) = aig.simulate(&bits(v, 8), &[]).unwrap();
            assert_eq!(outs, vec![v.count_ones() % 2 == 1]);
        }
    }

    #[test]
    fn mux_tree_selects_the_addressed_bit() {
        let aig = mux_tree(2);
        for v in 0..64usize {
            let ins = bits(v, 6);
            let sel = word(&ins[0..2]);
            let (outs, _) = aig.simulate(&ins, &[]).unwrap();
            assert_eq!(outs, vec![ins[2 + sel]], "pattern {v:06b}");
        }
    }

    #[test]
    fn trees_and_chains_fold_their_operator() {
        let at = and_tree(8);
        let oc = or_chain(8);
        for v in 0..256usize {
            let ins = bits(v, 8);
            let (a, _) = at.simulate(&ins, &[]).unwrap();
            let (o, _) = oc.simulate(&ins, &[]).unwrap();
            assert_eq!(a, vec![v == 255]);
            assert_eq!(o, vec![v != 0]);
        }
    }

    #[test]
    fn shift_register_delays_by_its_depth() {
        let aig = shift_register(4);
        let driven = [true, false, true, true, false, false, true, false];
        let mut state = vec![false; 4];
        let mut seen = Vec::new();
        for &d in &driven {
            let (outs, next) = aig.simulate(&[d], &state).unwrap();
            seen.push(outs[0]);
            state = next;
        }
        assert_eq!(&seen[4..], &driven[..4]);
        assert!(seen[..4].iter().all(|b| !b));
    }

    #[test]
    fn counter_counts_enabled_steps() {
        let aig = toggle_counter(3);
        let mut state = vec![false; 3];
        let mut expected = 0usize;
        for step in 0..20 {
            let enable = step % 3 != 0;
            let (outs, next) = aig.simulate(&[enable], &state).unwrap();
            assert_eq!(word(&outs), expected, "step {step}");
            if enable {
                expected = (expected + 1) % 8;
            }
            state = next;
        }
    }

    #[test]
    fn random_graphs_are_seed_deterministic() {
        let a = write_aiger(&random_aig(11, 6, 60));
        let b = write_aiger(&random_aig(11, 6, 60));
        let c = write_aiger(&random_aig(12, 6, 60));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn observable_graphs_expose_every_and_node() {
        let aig = observable_aig(3, 5, 30);
        let m = aig.metrics();
        assert_eq!(aig.num_outputs(), m.and_count);
        assert!(m.and_count >= 20);
    }

    #[test]
    fn stock_corpus_is_twenty_small_designs() {
        let corpus = default_corpus();
        assert_eq!(corpus.len(), 20);
        let ids: BTreeSet<&str> = corpus.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(ids.len(), 20);
        for (id, aig) in &corpus {
            let m = aig.metrics();
            assert!(m.and_count <= 300, "{id} has {} nodes", m.and_count);
            let back = parse_aiger(&write_aiger(aig)).unwrap();
            assert_eq!(write_aiger(&back), write_aiger(aig), "{id}");
        }
    }

    #[test]
    fn corpus_round_trips_through_a_directory() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = default_corpus();
        save_corpus(dir.path(), &corpus).unwrap();
        let back = load_corpus(dir.path()).unwrap();
        assert_eq!(back.len(), corpus.len());
        for ((id_a, a), (id_b, b)) in corpus.iter().zip(&back) {
            assert_eq!(id_a, id_b);
            assert_eq!(write_aiger(a), write_aiger(b));
        }
        std::fs::write(dir.path().join("broken.aag"), "not an aiger file").unwrap();
        assert!(matches!(load_corpus(dir.path()), Err(CorpusError::Parse { .. })));
    }
}
