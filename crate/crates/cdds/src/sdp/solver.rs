//! Solve path for linear matrix inequality problems
//!
//! ```text
//!   minimize    c'z
//!   subject to  S_b(z) = F0_b + Σ_i z_i F_{i,b}  ⪰ 0   for every block b
//! ```
//!
//! Equalities are eliminated first (see [`super::reduce`]); the surviving
//! free variables and PSD blocks are handed to the Clarabel interior-point
//! solver in its standard conic form `min q'x  s.t.  Ax + s = b, s ∈ K`,
//! where each block contributes a scaled-triangle PSD cone with
//! `b = svec(F0)` and columns `-svec(F_i)`. The translation is exact, the
//! backend is deterministic, and the solution is reported back in the
//! original variable numbering together with per-block minimum eigenvalues
//! so callers can re-validate feasibility independently of the solver's
//! status claim.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::problem::{SdpProblem, SdpSolution, SolveStatus};
use super::reduce::reduce;

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Absolute and relative interior-point tolerance.
    pub tol: f64,
    pub max_iterations: usize,
    /// Fraction of the maximal step to the cone boundary.
    pub step_fraction: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iterations: 200,
            step_fraction: 0.99,
        }
    }
}

/// Solves the problem (eliminating equalities first) and reports the
/// solution in the original variable numbering.
pub fn solve(p: &SdpProblem, opts: &SolverOptions) -> SdpSolution {
    let (rp, recovery) = match reduce(p) {
        Ok(r) => r,
        Err(e) => {
            return SdpSolution {
                status: SolveStatus::Infeasible,
                x: vec![0.0; p.nvars],
                objective: f64::NAN,
                block_min_eigs: Vec::new(),
                duality_gap: f64::NAN,
                iterations: 0,
                diagnostics: e.to_string(),
            }
        }
    };
    let mut sol = solve_reduced(&rp, opts);
    let z = std::mem::take(&mut sol.x);
    sol.x = recovery.lift(&z);
    sol.objective += recovery.objective_offset;
    sol.block_min_eigs = p.block_min_eigs(&sol.x);
    sol
}

/// Column-major upper-triangle index of `(i, j)` with `i <= j`.
fn tri_index(i: usize, j: usize) -> usize {
    j * (j + 1) / 2 + i
}

fn solve_reduced(p: &SdpProblem, opts: &SolverOptions) -> SdpSolution {
    let k = p.nvars;
    let active_blocks: Vec<&super::problem::SdpBlock> =
        p.blocks.iter().filter(|b| b.dim > 0).collect();
    if k == 0 || active_blocks.is_empty() {
        // Nothing to optimize: constants only.
        let x = vec![0.0; k];
        let eigs = p.block_min_eigs(&x);
        let feasible = eigs.iter().all(|&e| e >= -1e-12);
        return SdpSolution {
            status: if feasible {
                SolveStatus::Feasible
            } else {
                SolveStatus::Infeasible
            },
            x,
            objective: 0.0,
            block_min_eigs: eigs,
            duality_gap: 0.0,
            iterations: 0,
            diagnostics: "trivial problem".into(),
        };
    }

    let sqrt2 = std::f64::consts::SQRT_2;

    // Row layout: any residual equalities first (zero cone), then one
    // scaled-triangle PSD cone per block.
    let neq = p.equalities.len();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
    if neq > 0 {
        cones.push(SupportedConeT::ZeroConeT(neq));
    }
    let mut nrows = neq;
    let mut block_row0 = Vec::with_capacity(active_blocks.len());
    for b in &active_blocks {
        block_row0.push(nrows);
        nrows += b.dim * (b.dim + 1) / 2;
        cones.push(SupportedConeT::PSDTriangleConeT(b.dim));
    }

    // b = svec(F0) stacked; column j of A accumulates -svec(F_j).
    let mut rhs = vec![0.0f64; nrows];
    let mut cols: Vec<std::collections::BTreeMap<usize, f64>> =
        vec![std::collections::BTreeMap::new(); k];
    for (e, eq) in p.equalities.iter().enumerate() {
        rhs[e] = eq.rhs;
        for &(v, a) in &eq.terms {
            *cols[v].entry(e).or_insert(0.0) += a;
        }
    }
    for (bi, b) in active_blocks.iter().enumerate() {
        let r0 = block_row0[bi];
        for &(i, j, v) in &b.b0.entries {
            let w = if i == j { v } else { v * sqrt2 };
            rhs[r0 + tri_index(i, j)] += w;
        }
        for (var, f) in &b.terms {
            let col = &mut cols[*var];
            for &(i, j, v) in &f.entries {
                let w = if i == j { v } else { v * sqrt2 };
                *col.entry(r0 + tri_index(i, j)).or_insert(0.0) -= w;
            }
        }
    }
    let mut colptr = Vec::with_capacity(k + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0usize);
    for col in &cols {
        for (&r, &v) in col {
            if v != 0.0 {
                rowval.push(r);
                nzval.push(v);
            }
        }
        colptr.push(rowval.len());
    }
    let a = CscMatrix::new(nrows, k, colptr, rowval, nzval);
    let pmat = CscMatrix::<f64>::zeros((k, k));

    let settings = DefaultSettings {
        verbose: false,
        max_iter: opts.max_iterations as u32,
        tol_gap_abs: opts.tol,
        tol_gap_rel: opts.tol,
        max_step_fraction: opts.step_fraction,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&pmat, &p.c, &a, &rhs, &cones, settings);
    solver.solve();
    let sol = &solver.solution;

    let pure_feasibility = p.c.iter().all(|&ci| ci == 0.0);
    let status = match sol.status {
        SolverStatus::Solved => {
            if pure_feasibility {
                SolveStatus::Feasible
            } else {
                SolveStatus::Optimal
            }
        }
        SolverStatus::AlmostSolved
        | SolverStatus::MaxIterations
        | SolverStatus::MaxTime
        | SolverStatus::InsufficientProgress => SolveStatus::Marginal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
            SolveStatus::Error
        }
        SolverStatus::NumericalError | SolverStatus::Unsolved => SolveStatus::Error,
    };
    let gap = (sol.obj_val - sol.obj_val_dual).abs()
        / (1.0 + sol.obj_val.abs().max(sol.obj_val_dual.abs()));
    SdpSolution {
        status,
        x: sol.x.clone(),
        objective: sol.obj_val,
        block_min_eigs: Vec::new(),
        duality_gap: gap,
        iterations: sol.iterations as usize,
        diagnostics: format!("interior point: {:?}", sol.status),
    }
}
