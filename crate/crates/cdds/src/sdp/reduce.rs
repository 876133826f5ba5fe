//! Elimination of linear equalities by sparse Gaussian substitution.
//!
//! The coefficient-matching equalities produced by the Gram relaxation are
//! extremely sparse — most contain a variable appearing in no other
//! equality — so a pivot order that prefers short equations and rarely
//! shared pivots keeps the substituted block data sparse. The result is an
//! equality-free problem over the surviving variables plus an affine
//! recovery map back to the original coordinates.

use std::collections::HashMap;

use super::problem::{LinearEquality, SdpBlock, SdpProblem, SparseSym};

/// `x_original = Σ coeff · x_free + offset`, one row per original variable.
#[derive(Debug, Clone)]
pub struct Recovery {
    /// Free-variable index in the reduced problem for surviving variables.
    pub free_index: Vec<Option<usize>>,
    /// For eliminated variables: affine expression over *original* free ids.
    exprs: Vec<Option<(Vec<(usize, f64)>, f64)>>,
    /// Constant objective offset introduced by the substitution.
    pub objective_offset: f64,
}

impl Recovery {
    /// Lifts a reduced solution vector back to original coordinates.
    pub fn lift(&self, z: &[f64]) -> Vec<f64> {
        let n = self.free_index.len();
        let mut x = vec![0.0; n];
        for v in 0..n {
            if let Some(f) = self.free_index[v] {
                x[v] = z[f];
            }
        }
        for v in 0..n {
            if let Some((terms, cst)) = &self.exprs[v] {
                let mut acc = *cst;
                for &(w, a) in terms {
                    let f = self.free_index[w].expect("expr references free var");
                    acc += a * z[f];
                }
                x[v] = acc;
            }
        }
        x
    }
}

#[derive(Debug)]
pub enum ReduceError {
    Inconsistent { residual: f64 },
}

impl std::fmt::Display for ReduceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReduceError::Inconsistent { residual } => {
                write!(f, "inconsistent equalities (residual {residual:.3e})")
            }
        }
    }
}

impl std::error::Error for ReduceError {}

const DROP_TOL: f64 = 1e-13;

/// Eliminates all equalities, returning an equality-free problem over the
/// surviving variables and the affine recovery map. Variables appearing in
/// no block and no objective after reduction are still kept (callers may
/// report them as unconstrained).
pub fn reduce(p: &SdpProblem) -> Result<(SdpProblem, Recovery), ReduceError> {
    let n = p.nvars;
    // Working copy of the equalities as hash maps.
    let mut eqs: Vec<(HashMap<usize, f64>, f64)> = p
        .equalities
        .iter()
        .map(|e| {
            let mut m = HashMap::new();
            for &(v, a) in &e.terms {
                *m.entry(v).or_insert(0.0) += a;
            }
            m.retain(|_, a| a.abs() > DROP_TOL);
            (m, e.rhs)
        })
        .collect();

    let mut eliminated: Vec<Option<(Vec<(usize, f64)>, f64)>> = vec![None; n];
    let mut is_eliminated = vec![false; n];
    let mut order: Vec<usize> = Vec::new();
    let mut active: Vec<bool> = vec![true; eqs.len()];

    // Occurrence counts across active equalities guide pivot choice.
    let mut occurrences = vec![0usize; n];
    for (m, _) in &eqs {
        for &v in m.keys() {
            occurrences[v] += 1;
        }
    }

    loop {
        // Pick the shortest active equality; within it the pivot with the
        // fewest cross-occurrences, ties broken by coefficient magnitude.
        let mut best: Option<(usize, usize)> = None; // (eq idx, len)
        for (i, (m, _)) in eqs.iter().enumerate() {
            if !active[i] {
                continue;
            }
            let len = m.len();
            if best.map_or(true, |(_, bl)| len < bl) {
                best = Some((i, len));
            }
        }
        let Some((ei, len)) = best else { break };
        active[ei] = false;
        let (terms, rhs) = eqs[ei].clone();
        if len == 0 {
            if rhs.abs() > 1e-9 {
                return Err(ReduceError::Inconsistent { residual: rhs.abs() });
            }
            continue; // redundant row
        }
        let (&pivot, &pcoef) = terms
            .iter()
            .min_by(|a, b| {
                (occurrences[*a.0], std::cmp::Reverse(ordered(a.1.abs())), *a.0)
                    .cmp(&(occurrences[*b.0], std::cmp::Reverse(ordered(b.1.abs())), *b.0))
            })
            .expect("nonempty");
        // pivot = (rhs - Σ others) / pcoef.
        let mut expr: Vec<(usize, f64)> = terms
            .iter()
            .filter(|&(&v, _)| v != pivot)
            .map(|(&v, &a)| (v, -a / pcoef))
            .collect();
        expr.sort_by_key(|&(v, _)| v);
        let cst = rhs / pcoef;
        eliminated[pivot] = Some((expr.clone(), cst));
        is_eliminated[pivot] = true;
        order.push(pivot);
        // Substitute into the remaining active equalities.
        for (i, (m, r)) in eqs.iter_mut().enumerate() {
            if !active[i] {
                continue;
            }
            if let Some(a) = m.remove(&pivot) {
                occurrences[pivot] -= 1;
                for &(v, coef) in &expr {
                    let slot = m.entry(v).or_insert_with(|| {
                        occurrences[v] += 1;
                        0.0
                    });
                    *slot += a * coef;
                }
                *r -= a * cst;
                m.retain(|&v, coef| {
                    if coef.abs() > DROP_TOL {
                        true
                    } else {
                        occurrences[v] -= 1;
                        false
                    }
                });
            }
        }
        for &v in terms.keys() {
            occurrences[v] = occurrences[v].saturating_sub(1);
        }
    }

    // Back-substitute so each eliminated variable is affine in free vars.
    for &v in order.iter().rev() {
        let (expr, mut cst) = eliminated[v].take().expect("recorded");
        let mut flat: HashMap<usize, f64> = HashMap::new();
        for (w, a) in expr {
            if is_eliminated[w] {
                let (we, wc) = eliminated[w].as_ref().expect("resolved later pivot");
                for &(u, b) in we {
                    *flat.entry(u).or_insert(0.0) += a * b;
                }
                cst += a * wc;
            } else {
                *flat.entry(w).or_insert(0.0) += a;
            }
        }
        let mut flat: Vec<(usize, f64)> = flat
            .into_iter()
            .filter(|&(_, a)| a.abs() > DROP_TOL)
            .collect();
        flat.sort_by_key(|&(v, _)| v);
        eliminated[v] = Some((flat, cst));
    }

    // Free-variable numbering.
    let mut free_index = vec![None; n];
    let mut nfree = 0;
    for v in 0..n {
        if !is_eliminated[v] {
            free_index[v] = Some(nfree);
            nfree += 1;
        }
    }

    // Rewrite the objective.
    let mut c = vec![0.0; nfree];
    let mut objective_offset = 0.0;
    for v in 0..n {
        let cv = p.c[v];
        if cv == 0.0 {
            continue;
        }
        match free_index[v] {
            Some(f) => c[f] += cv,
            None => {
                let (expr, cst) = eliminated[v].as_ref().expect("eliminated");
                objective_offset += cv * cst;
                for &(w, a) in expr {
                    c[free_index[w].expect("free")] += cv * a;
                }
            }
        }
    }

    // Rewrite the blocks.
    let mut blocks = Vec::with_capacity(p.blocks.len());
    for b in &p.blocks {
        let mut nb = SdpBlock::new(b.dim, b.tag.clone());
        nb.b0 = b.b0.clone();
        for (v, t) in &b.terms {
            match free_index[*v] {
                Some(f) => nb.terms.push((f, t.clone())),
                None => {
                    let (expr, cst) = eliminated[*v].as_ref().expect("eliminated");
                    if cst.abs() > 0.0 {
                        nb.b0 = nb.b0.add(&t.scaled(*cst));
                    }
                    for &(w, a) in expr {
                        nb.terms.push((free_index[w].expect("free"), t.scaled(a)));
                    }
                }
            }
        }
        nb.normalize();
        blocks.push(nb);
    }

    let reduced = SdpProblem {
        nvars: nfree,
        c,
        blocks,
        equalities: Vec::new(),
    };
    let recovery = Recovery {
        free_index,
        exprs: eliminated,
        objective_offset,
    };
    Ok((reduced, recovery))
}

fn ordered(v: f64) -> u64 {
    // Monotone map of nonnegative floats onto integers for tuple compares.
    v.to_bits()
}

/// Convenience: equality from slice data.
pub fn eq(terms: &[(usize, f64)], rhs: f64) -> LinearEquality {
    LinearEquality {
        terms: terms.to_vec(),
        rhs,
    }
}

#[allow(unused_imports)]
use super::problem::SdpSolution;
