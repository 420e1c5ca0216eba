//! ASCII AIGER (`aag`) reader and writer.
//!
//! Only the ASCII variant is handled; the binary `aig` format is out of
//! scope. The reader accepts any well-formed file whose AND definitions
//! have even, strictly increasing left-hand sides and topologically
//! ordered fanins, and renumbers variables into the canonical order used
//! by [`Aig`]: inputs first (in file order), then latches, then ANDs.
//! Symbol table and comment sections are ignored. Latch lines carry no
//! reset value; the reset state is fixed at 0.

use super::{Aig, AigError, Lit};

fn malformed(line: usize, msg: impl Into<String>) -> AigError {
    AigError::MalformedHeader {
        line,
        msg: msg.into(),
    }
}

fn parse_u32(tok: &str, line: usize) -> Result<u32, AigError> {
    tok.parse::<u32>()
        .map_err(|_| malformed(line, format!("expected an unsigned integer, got {:?}", tok)))
}

/// Parses an ASCII AIGER file into a canonical [`Aig`].
pub fn parse_aiger(text: &str) -> Result<Aig, AigError> {
    let total_lines = text.lines().count();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (hline, header) = lines
        .next()
        .ok_or_else(|| malformed(1, "empty file".to_string()))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 6 || toks[0] != "aag" {
        return Err(malformed(hline, "header must be `aag M I L O A`"));
    }
    let m = parse_u32(toks[1], hline)? as usize;
    let ni = parse_u32(toks[2], hline)? as usize;
    let nl = parse_u32(toks[3], hline)? as usize;
    let no = parse_u32(toks[4], hline)? as usize;
    let na = parse_u32(toks[5], hline)? as usize;
    if ni + nl + na > m {
        return Err(malformed(hline, "header: M smaller than I + L + A"));
    }

    let mut next_record = move |what: &'static str| -> Result<(usize, Vec<u32>), AigError> {
        let (ln, raw) = lines.next().ok_or_else(|| {
            malformed(
                total_lines + 1,
                format!("unexpected end of file, missing {}", what),
            )
        })?;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() {
            return Err(malformed(ln, format!("blank line where {} expected", what)));
        }
        let mut vals = Vec::with_capacity(toks.len());
        for t in toks {
            vals.push(parse_u32(t, ln)?);
        }
        Ok((ln, vals))
    };

    // kind[v]: 0 unset, 1 input, 2 latch, 3 and
    let mut kind = vec![0u8; m + 1];
    let mut order = vec![0u32; m + 1]; // canonical variable per original var
    let max_lit = (2 * m + 1) as u32;

    let check_lit = |lit: u32, line: usize| -> Result<Lit, AigError> {
        if lit > max_lit {
            return Err(AigError::DanglingLiteral { line, lit });
        }
        Ok(Lit::from_raw(lit))
    };

    let mut input_vars = Vec::with_capacity(ni);
    for k in 0..ni {
        let (ln, vals) = next_record("an input definition")?;
        if vals.len() != 1 {
            return Err(malformed(ln, "input line must hold a single literal"));
        }
        let lit = check_lit(vals[0], ln)?;
        if lit.is_compl() || lit.is_const() || kind[lit.var() as usize] != 0 {
            return Err(malformed(ln, "input literal must be a fresh even literal"));
        }
        kind[lit.var() as usize] = 1;
        order[lit.var() as usize] = (1 + k) as u32;
        input_vars.push(lit.var());
    }

    let mut latch_raw = Vec::with_capacity(nl);
    for k in 0..nl {
        let (ln, vals) = next_record("a latch definition")?;
        if vals.len() != 2 {
            return Err(malformed(ln, "latch line must hold `lhs next`"));
        }
        let lhs = check_lit(vals[0], ln)?;
        if lhs.is_compl() || lhs.is_const() || kind[lhs.var() as usize] != 0 {
            return Err(malformed(ln, "latch literal must be a fresh even literal"));
        }
        kind[lhs.var() as usize] = 2;
        order[lhs.var() as usize] = (1 + ni + k) as u32;
        latch_raw.push((ln, check_lit(vals[1], ln)?));
    }

    let mut output_raw = Vec::with_capacity(no);
    for _ in 0..no {
        let (ln, vals) = next_record("an output definition")?;
        if vals.len() != 1 {
            return Err(malformed(ln, "output line must hold a single literal"));
        }
        output_raw.push((ln, check_lit(vals[0], ln)?));
    }

    let mut and_raw = Vec::with_capacity(na);
    let mut prev_lhs = 0u32;
    for k in 0..na {
        let (ln, vals) = next_record("an AND definition")?;
        if vals.len() != 3 {
            return Err(malformed(ln, "AND line must hold `lhs rhs0 rhs1`"));
        }
        let lhs = check_lit(vals[0], ln)?;
        if lhs.is_compl() || lhs.is_const() || kind[lhs.var() as usize] != 0 {
            return Err(AigError::NonTopologicalNode { line: ln });
        }
        if lhs.raw() <= prev_lhs {
            return Err(AigError::NonTopologicalNode { line: ln });
        }
        prev_lhs = lhs.raw();
        let f0 = check_lit(vals[1], ln)?;
        let f1 = check_lit(vals[2], ln)?;
        if f0.var() >= lhs.var() || f1.var() >= lhs.var() {
            return Err(AigError::NonTopologicalNode { line: ln });
        }
        kind[lhs.var() as usize] = 3;
        order[lhs.var() as usize] = (1 + ni + nl + k) as u32;
        and_raw.push((ln, lhs, f0, f1));
    }
    // Anything after the AND section (symbols, comments) is ignored.

    let remap = |l: Lit, line: usize| -> Result<Lit, AigError> {
        if l.is_const() {
            return Ok(l);
        }
        if kind[l.var() as usize] == 0 {
            return Err(AigError::DanglingLiteral { line, lit: l.raw() });
        }
        Ok(Lit::from_var(order[l.var() as usize], l.is_compl()))
    };

    let mut ands = Vec::with_capacity(na);
    for &(ln, _lhs, f0, f1) in &and_raw {
        ands.push([remap(f0, ln)?, remap(f1, ln)?]);
    }
    let mut outputs = Vec::with_capacity(no);
    for &(ln, l) in &output_raw {
        outputs.push(remap(l, ln)?);
    }
    let mut latch_next = Vec::with_capacity(nl);
    for &(ln, l) in &latch_raw {
        latch_next.push(remap(l, ln)?);
    }

    Aig::new(ni, nl, ands, outputs, latch_next)
}

/// Serializes a canonical [`Aig`] as ASCII AIGER. `parse_aiger` on the
/// result reproduces the graph exactly.
pub fn write_aiger(aig: &Aig) -> String {
    let m = aig.num_vars() - 1;
    let mut out = String::new();
    out.push_str(&format!(
        "aag {} {} {} {} {}\n",
        m,
        aig.num_inputs(),
        aig.num_latches(),
        aig.num_outputs(),
        aig.and_count()
    ));
    for k in 0..aig.num_inputs() {
        out.push_str(&format!("{}\n", aig.input_lit(k).raw()));
    }
    for k in 0..aig.num_latches() {
        out.push_str(&format!(
            "{} {}\n",
            aig.latch_lit(k).raw(),
            aig.latch_next()[k].raw()
        ));
    }
    for &l in aig.outputs() {
        out.push_str(&format!("{}\n", l.raw()));
    }
    for (i, [a, b]) in aig.ands().iter().enumerate() {
        out.push_str(&format!(
            "{} {} {}\n",
            Lit::from_var(aig.and_var(i), false).raw(),
            a.raw(),
            b.raw()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aig::{AigBuilder, LIT_TRUE};

    #[test]
    fn parse_single_and() {
        let a = parse_aiger("aag 3 2 0 1 1\n2\n4\n6\n6 2 4\n").unwrap();
        assert_eq!(a.num_inputs(), 2);
        assert_eq!(a.and_count(), 1);
        let (outs, _) = a.simulate(&[true, true], &[]).unwrap();
        assert_eq!(outs, vec![true]);
        let (outs, _) = a.simulate(&[true, false], &[]).unwrap();
        assert_eq!(outs, vec![false]);
    }

    #[test]
    fn parse_three_input_conjunction() {
        // ((a & b) & c), 10 lines with a comment section ignored.
        let text = "aag 5 3 0 1 2\n2\n4\n6\n10\n8 2 4\n10 8 6\nc\nfoo\n";
        let a = parse_aiger(text).unwrap();
        assert_eq!(a.and_count(), 2);
        for bits in 0..8u32 {
            let iv: Vec<bool> = (0..3).map(|k| bits >> k & 1 != 0).collect();
            let (outs, _) = a.simulate(&iv, &[]).unwrap();
            assert_eq!(outs, vec![iv[0] && iv[1] && iv[2]]);
        }
    }

    #[test]
    fn parse_latch() {
        let a = parse_aiger("aag 2 1 1 1 0\n2\n4 2\n4\n").unwrap();
        assert_eq!(a.num_latches(), 1);
        let (outs, next) = a.simulate(&[true], &[false]).unwrap();
        assert_eq!(outs, vec![false]);
        assert_eq!(next, vec![true]);
    }

    #[test]
    fn error_bad_header() {
        let e = parse_aiger("aag 1 1\n").unwrap_err();
        assert!(matches!(e, AigError::MalformedHeader { line: 1, .. }));
    }

    #[test]
    fn error_truncated_file() {
        let e = parse_aiger("aag 2 2 0 0 0\n2\n").unwrap_err();
        assert!(matches!(e, AigError::MalformedHeader { .. }));
    }

    #[test]
    fn error_non_topological() {
        // AND references itself.
        let e = parse_aiger("aag 3 2 0 1 1\n2\n4\n6\n6 6 4\n").unwrap_err();
        assert_eq!(e, AigError::NonTopologicalNode { line: 5 });
        // Decreasing lhs order.
        let e = parse_aiger("aag 4 2 0 1 2\n2\n4\n8\n8 2 4\n6 2 4\n").unwrap_err();
        assert_eq!(e, AigError::NonTopologicalNode { line: 6 });
    }

    #[test]
    fn error_dangling_literal() {
        // Output references variable 3 which is never defined (M leaves a gap).
        let e = parse_aiger("aag 3 2 0 1 0\n2\n4\n6\n").unwrap_err();
        assert_eq!(e, AigError::DanglingLiteral { line: 4, lit: 6 });
        // Literal beyond 2M+1.
        let e = parse_aiger("aag 2 2 0 1 0\n2\n4\n99\n").unwrap_err();
        assert_eq!(e, AigError::DanglingLiteral { line: 4, lit: 99 });
    }

    #[test]
    fn error_line_numbers_reported() {
        let e = parse_aiger("aag 3 2 0 1 1\n2\n4\n6\nnot a number\n").unwrap_err();
        match e {
            AigError::MalformedHeader { line, .. } => assert_eq!(line, 5),
            other => panic!("unexpected error {:?}", other),
        }
    }

    #[test]
    fn writer_canonical_form() {
        let mut b = AigBuilder::new(2, 0);
        let x = b.input(0);
        let y = b.input(1);
        let g = b.and(x, y);
        let a = b.finish(vec![!g, LIT_TRUE], vec![]);
        assert_eq!(write_aiger(&a), "aag 3 2 0 2 1\n2\n4\n7\n1\n6 2 4\n");
    }

    #[test]
    fn round_trip_identity() {
        let text = "aag 5 3 0 1 2\n2\n4\n6\n10\n8 2 4\n10 8 6\n";
        let a = parse_aiger(text).unwrap();
        let b = parse_aiger(&write_aiger(&a)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_canonical_input_numbering_normalized() {
        // Inputs numbered 4, 2 in file order; parse renumbers but keeps
        // file order, so input 0 is the one defined first.
        let a = parse_aiger("aag 3 2 0 1 1\n4\n2\n6\n6 4 2\n").unwrap();
        let (outs, _) = a.simulate(&[true, false], &[]).unwrap();
        assert_eq!(outs, vec![false]);
        let rt = parse_aiger(&write_aiger(&a)).unwrap();
        assert_eq!(a, rt);
    }
}
