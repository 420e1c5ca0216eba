//! Word-packed truth tables over up to six variables.

/// Truth table of variable `i` over 64 input rows.
pub(crate) const VAR_PAT: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

pub(crate) fn var_pattern(i: usize) -> u64 {
    VAR_PAT[i]
}

/// All-ones mask for a table over `n` variables.
pub(crate) fn tt_mask(n: usize) -> u64 {
    if n >= 6 {
        !0
    } else {
        (1u64 << (1usize << n)) - 1
    }
}

/// Drops vacuous variables: returns kept positions and the repacked table.
pub(crate) fn reduce_support(tt: u64, k: usize) -> (Vec<usize>, u64) {
    let mask = tt_mask(k);
    let mut keep = Vec::with_capacity(k);
    for i in 0..k {
        let pi = var_pattern(i);
        let vacuous = ((tt >> (1usize << i)) ^ tt) & !pi & mask == 0;
        if !vacuous {
            keep.push(i);
        }
    }
    if keep.len() == k {
        return (keep, tt & mask);
    }
    let mut out = 0u64;
    for row in 0..1usize << keep.len() {
        let mut full_row = 0usize;
        for (j, &i) in keep.iter().enumerate() {
            if row >> j & 1 == 1 {
                full_row |= 1 << i;
            }
        }
        if tt >> full_row & 1 == 1 {
            out |= 1 << row;
        }
    }
    (keep, out)
}
