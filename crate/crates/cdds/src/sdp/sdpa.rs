//! SDPA sparse (".dat-s") export and a matching parser for round-trip
//! validation against external solvers.
//!
//! The exported problem is the dual standard form "minimize c'x subject to
//! Σ x_i F_i − F0 ⪰ 0": each of our PSD blocks `B0 + Σ x_i B_i ⪰ 0` maps
//! directly with `F0 = −B0`, `F_i = B_i`. Linear equalities `a'x = h` are
//! encoded as paired inequalities `a'x − h ≥ 0` and `h − a'x ≥ 0`, all
//! collected in one trailing diagonal block (negative block size per the
//! format convention); the file header comment documents this encoding.

use super::problem::{LinearEquality, SdpBlock, SdpProblem, SparseSym};

/// Renders the problem in SDPA sparse format; output is byte-stable for
/// identical input.
pub fn export_sdpa(p: &SdpProblem) -> String {
    let mut out = String::new();
    out.push_str("\"exported SDP: minimize c'x s.t. sum x_i F_i - F0 >= 0 per block\"\n");
    out.push_str(
        "\"equalities a'x = h are encoded as paired inequalities (a'x - h >= 0, h - a'x >= 0) in the trailing diagonal block\"\n",
    );
    let neq = p.equalities.len();
    let nblocks = p.blocks.len() + usize::from(neq > 0);
    out.push_str(&format!("{}\n", p.nvars));
    out.push_str(&format!("{}\n", nblocks));
    let mut sizes: Vec<String> = p.blocks.iter().map(|b| b.dim.to_string()).collect();
    if neq > 0 {
        sizes.push(format!("-{}", 2 * neq));
    }
    out.push_str(&sizes.join(" "));
    out.push('\n');
    out.push_str(
        &p.c
            .iter()
            .map(|v| fmt_val(*v))
            .collect::<Vec<_>>()
            .join(" "),
    );
    out.push('\n');

    // Matrix 0 holds F0 = -B0; matrix i holds F_i = B_i.
    for (bi, b) in p.blocks.iter().enumerate() {
        for &(i, j, v) in &b.b0.entries {
            out.push_str(&format!("0 {} {} {} {}\n", bi + 1, i + 1, j + 1, fmt_val(-v)));
        }
    }
    if neq > 0 {
        let blk = p.blocks.len() + 1;
        for (ei, e) in p.equalities.iter().enumerate() {
            let pos = 2 * ei + 1;
            let negr = 2 * ei + 2;
            if e.rhs != 0.0 {
                out.push_str(&format!("0 {blk} {pos} {pos} {}\n", fmt_val(e.rhs)));
                out.push_str(&format!("0 {blk} {negr} {negr} {}\n", fmt_val(-e.rhs)));
            }
        }
    }
    for var in 0..p.nvars {
        for (bi, b) in p.blocks.iter().enumerate() {
            for (v, t) in &b.terms {
                if *v != var {
                    continue;
                }
                for &(i, j, val) in &t.entries {
                    out.push_str(&format!(
                        "{} {} {} {} {}\n",
                        var + 1,
                        bi + 1,
                        i + 1,
                        j + 1,
                        fmt_val(val)
                    ));
                }
            }
        }
        if neq > 0 {
            let blk = p.blocks.len() + 1;
            for (ei, e) in p.equalities.iter().enumerate() {
                for &(v, a) in &e.terms {
                    if v != var || a == 0.0 {
                        continue;
                    }
                    let pos = 2 * ei + 1;
                    let negr = 2 * ei + 2;
                    out.push_str(&format!("{} {blk} {pos} {pos} {}\n", var + 1, fmt_val(a)));
                    out.push_str(&format!("{} {blk} {negr} {negr} {}\n", var + 1, fmt_val(-a)));
                }
            }
        }
    }
    out
}

fn fmt_val(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug)]
pub enum SdpaParseError {
    Malformed(String),
}

impl std::fmt::Display for SdpaParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SdpaParseError::Malformed(m) => write!(f, "malformed sdpa input: {m}"),
        }
    }
}

impl std::error::Error for SdpaParseError {}

/// Parses a file produced by [`export_sdpa`] back into an [`SdpProblem`].
/// The trailing diagonal block, when present, is decoded back into
/// equalities by re-pairing consecutive diagonal slots.
pub fn parse_sdpa(text: &str) -> Result<SdpProblem, SdpaParseError> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('"') && !l.starts_with('*'));
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| SdpaParseError::Malformed(format!("missing {what}")))
    };
    let nvars: usize = next("nvars")?
        .parse()
        .map_err(|e| SdpaParseError::Malformed(format!("nvars: {e}")))?;
    let nblocks: usize = next("nblocks")?
        .parse()
        .map_err(|e| SdpaParseError::Malformed(format!("nblocks: {e}")))?;
    let sizes: Vec<i64> = next("block sizes")?
        .split_whitespace()
        .map(|t| {
            t.trim_matches(|c| c == '(' || c == ')' || c == ',')
                .parse()
                .map_err(|e| SdpaParseError::Malformed(format!("block size: {e}")))
        })
        .collect::<Result<_, _>>()?;
    if sizes.len() != nblocks {
        return Err(SdpaParseError::Malformed(format!(
            "expected {nblocks} block sizes, got {}",
            sizes.len()
        )));
    }
    let c: Vec<f64> = if nvars == 0 {
        let _ = next("objective");
        Vec::new()
    } else {
        next("objective")?
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|e| SdpaParseError::Malformed(format!("objective: {e}")))
            })
            .collect::<Result<_, _>>()?
    };
    if c.len() != nvars {
        return Err(SdpaParseError::Malformed(format!(
            "expected {nvars} objective entries, got {}",
            c.len()
        )));
    }

    let has_eq_block = matches!(sizes.last(), Some(&s) if s < 0);
    let npsd = if has_eq_block { nblocks - 1 } else { nblocks };
    let mut p = SdpProblem::new(nvars);
    p.c = c;
    for (bi, &s) in sizes.iter().take(npsd).enumerate() {
        if s < 0 {
            return Err(SdpaParseError::Malformed(
                "negative block size before the trailing equality block".into(),
            ));
        }
        p.blocks.push(SdpBlock::new(s as usize, format!("block{}", bi + 1)));
    }
    let eq_slots = if has_eq_block {
        (-sizes[nblocks - 1]) as usize
    } else {
        0
    };
    if eq_slots % 2 != 0 {
        return Err(SdpaParseError::Malformed(
            "equality block must pair slots".into(),
        ));
    }
    let mut eqs: Vec<LinearEquality> = (0..eq_slots / 2)
        .map(|_| LinearEquality {
            terms: Vec::new(),
            rhs: 0.0,
        })
        .collect();

    let mut block_entries: Vec<Vec<(usize, usize, usize, f64)>> =
        vec![Vec::new(); npsd]; // (var, i, j, val); var 0 = constant
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(SdpaParseError::Malformed(format!("entry line: {line}")));
        }
        let var: usize = toks[0]
            .parse()
            .map_err(|e| SdpaParseError::Malformed(format!("matno: {e}")))?;
        let blk: usize = toks[1]
            .parse()
            .map_err(|e| SdpaParseError::Malformed(format!("blkno: {e}")))?;
        let i: usize = toks[2]
            .parse()
            .map_err(|e| SdpaParseError::Malformed(format!("row: {e}")))?;
        let j: usize = toks[3]
            .parse()
            .map_err(|e| SdpaParseError::Malformed(format!("col: {e}")))?;
        let val: f64 = toks[4]
            .parse()
            .map_err(|e| SdpaParseError::Malformed(format!("value: {e}")))?;
        if blk == 0 || blk > nblocks {
            return Err(SdpaParseError::Malformed(format!("block index {blk}")));
        }
        if has_eq_block && blk == nblocks {
            if i != j {
                return Err(SdpaParseError::Malformed(
                    "equality block entries must be diagonal".into(),
                ));
            }
            let slot = i - 1;
            let eq = &mut eqs[slot / 2];
            let sign = if slot % 2 == 0 { 1.0 } else { -1.0 };
            if var == 0 {
                // F0 diagonal carries +rhs in the positive slot.
                if slot % 2 == 0 {
                    eq.rhs = val;
                }
            } else if slot % 2 == 0 {
                eq.terms.push((var - 1, val * sign));
            }
        } else {
            block_entries[blk - 1].push((var, i - 1, j - 1, val));
        }
    }
    for (bi, entries) in block_entries.into_iter().enumerate() {
        let dim = p.blocks[bi].dim;
        let mut by_var: std::collections::BTreeMap<usize, Vec<(usize, usize, f64)>> =
            std::collections::BTreeMap::new();
        for (var, i, j, v) in entries {
            by_var.entry(var).or_default().push((i, j, v));
        }
        for (var, ents) in by_var {
            let mat = SparseSym::from_entries(dim, ents);
            if var == 0 {
                p.blocks[bi].b0 = mat.scaled(-1.0); // F0 = -B0
            } else {
                p.blocks[bi].terms.push((var - 1, mat));
            }
        }
        p.blocks[bi].normalize();
    }
    eqs.retain(|e| !e.terms.is_empty() || e.rhs != 0.0);
    p.equalities = eqs;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::problem::SparseSym as SS;
    use crate::sdp::reduce::eq;

    fn sample() -> SdpProblem {
        let mut p = SdpProblem::new(2);
        p.c = vec![1.0, -0.5];
        let mut b = SdpBlock::new(2, "m");
        b.b0 = SS::from_entries(2, vec![(0, 0, 0.25), (0, 1, 1.0)]);
        b.terms.push((0, SS::identity(2)));
        b.terms.push((1, SS::from_entries(2, vec![(1, 1, -2.0)])));
        p.blocks.push(b);
        p.equalities.push(eq(&[(0, 1.0), (1, 3.0)], 0.5));
        p
    }

    #[test]
    fn empty_problem_header_only() {
        let p = SdpProblem::new(0);
        let text = export_sdpa(&p);
        let body: Vec<&str> = text
            .lines()
            .filter(|l| !l.starts_with('"'))
            .collect();
        assert_eq!(body, vec!["0", "0", "", ""]);
    }

    #[test]
    fn tiny_problem_body() {
        // minimize x s.t. [x] ⪰ 0: one objective line + one entry line.
        let mut p = SdpProblem::new(1);
        p.c = vec![1.0];
        let mut b = SdpBlock::new(1, "x");
        b.terms.push((0, SS::identity(1)));
        p.blocks.push(b);
        let text = export_sdpa(&p);
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('"')).collect();
        assert_eq!(body.len(), 5);
        assert_eq!(body[0], "1");
        assert_eq!(body[1], "1");
        assert_eq!(body[2], "1");
        assert!(body[4].starts_with("1 1 1 1 "));
    }

    #[test]
    fn roundtrip_exact() {
        let p = sample();
        let text = export_sdpa(&p);
        let q = parse_sdpa(&text).unwrap();
        assert_eq!(q.nvars, p.nvars);
        assert_eq!(q.c, p.c);
        assert_eq!(q.blocks.len(), p.blocks.len());
        assert_eq!(q.blocks[0].b0, p.blocks[0].b0);
        assert_eq!(q.blocks[0].terms, p.blocks[0].terms);
        assert_eq!(q.equalities.len(), 1);
        assert_eq!(q.equalities[0].rhs, p.equalities[0].rhs);
        assert_eq!(q.equalities[0].terms, p.equalities[0].terms);
    }

    #[test]
    fn export_is_byte_stable() {
        let p = sample();
        assert_eq!(export_sdpa(&p), export_sdpa(&p));
    }
}
