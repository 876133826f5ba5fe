//! System-file ingestion and machine-readable run reports.
//!
//! A system file is a JSON document carrying the dimensions, the constant
//! matrices, and the two distributed kernels either as Legendre coefficient
//! blocks in `r` (`poly_r`) or as monomial kernels in `τ`
//! (`monomial_kernel`), which are expanded exactly on load. Unknown fields
//! are rejected; parse failures carry line/column positions.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::AnalysisReport;
use crate::model::{monomial_kernel_to_legendre, CddsSystem, ModelError};
use crate::polymat::PolyMatrix;

#[derive(Debug, Error)]
pub enum SysFileError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{context}: expected a {rows}x{cols} matrix, got {got_rows}x{got_cols}")]
    BadShape {
        context: &'static str,
        rows: usize,
        cols: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("{context}: rows have unequal lengths")]
    Ragged { context: &'static str },
    #[error("invalid system: {0}")]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dimensions {
    pub n: usize,
    pub nu: usize,
    pub m: usize,
    pub q: usize,
    pub d: usize,
}

/// Distributed kernel: Legendre coefficient blocks in ascending powers of
/// `r`, or a monomial kernel in ascending powers of `τ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum KernelSpec {
    PolyR(Vec<Vec<Vec<f64>>>),
    MonomialKernel(Vec<Vec<Vec<f64>>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    pub dimensions: Dimensions,
    #[serde(rename = "A1")]
    pub a1: Vec<Vec<f64>>,
    #[serde(rename = "A2")]
    pub a2: Vec<Vec<f64>>,
    #[serde(rename = "A3", default, skip_serializing_if = "Option::is_none")]
    pub a3: Option<KernelSpec>,
    #[serde(rename = "A4")]
    pub a4: Vec<Vec<f64>>,
    #[serde(rename = "A5")]
    pub a5: Vec<Vec<f64>>,
    #[serde(rename = "C1")]
    pub c1: Vec<Vec<f64>>,
    #[serde(rename = "C2")]
    pub c2: Vec<Vec<f64>>,
    #[serde(rename = "C3", default, skip_serializing_if = "Option::is_none")]
    pub c3: Option<KernelSpec>,
    #[serde(rename = "D1")]
    pub d1: Vec<Vec<f64>>,
    #[serde(rename = "D2")]
    pub d2: Vec<Vec<f64>>,
}

fn to_matrix(
    rows: &[Vec<f64>],
    want_rows: usize,
    want_cols: usize,
    context: &'static str,
) -> Result<DMatrix<f64>, SysFileError> {
    if rows.len() != want_rows || rows.iter().any(|r| r.len() != want_cols) {
        let got_rows = rows.len();
        let got_cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != got_cols) {
            return Err(SysFileError::Ragged { context });
        }
        return Err(SysFileError::BadShape {
            context,
            rows: want_rows,
            cols: want_cols,
            got_rows,
            got_cols,
        });
    }
    Ok(DMatrix::from_fn(want_rows, want_cols, |i, j| rows[i][j]))
}

fn to_kernel(
    spec: Option<&KernelSpec>,
    rows: usize,
    d: usize,
    nu: usize,
    context: &'static str,
) -> Result<PolyMatrix, SysFileError> {
    let e = (d + 1) * nu;
    match spec {
        None => Ok(PolyMatrix::zeros(rows, e)),
        Some(KernelSpec::PolyR(coeffs)) => {
            let mats = coeffs
                .iter()
                .map(|c| to_matrix(c, rows, e, context))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(PolyMatrix::from_coeffs(rows, e, mats))
        }
        Some(KernelSpec::MonomialKernel(coeffs)) => {
            let mats = coeffs
                .iter()
                .map(|c| to_matrix(c, rows, nu, context))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(monomial_kernel_to_legendre(&mats, d, nu)?)
        }
    }
}

impl SystemFile {
    pub fn from_json(text: &str) -> Result<Self, SysFileError> {
        serde_json::from_str(text).map_err(|e| SysFileError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, SysFileError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_system(&self) -> Result<CddsSystem, SysFileError> {
        let Dimensions { n, nu, m, q, d } = self.dimensions;
        Ok(CddsSystem::new(
            d,
            to_matrix(&self.a1, n, n, "A1")?,
            to_matrix(&self.a2, n, nu, "A2")?,
            to_kernel(self.a3.as_ref(), n, d, nu, "A3")?,
            to_matrix(&self.a4, nu, n, "A4")?,
            to_matrix(&self.a5, nu, nu, "A5")?,
            to_matrix(&self.c1, m, n, "C1")?,
            to_matrix(&self.c2, m, nu, "C2")?,
            to_kernel(self.c3.as_ref(), m, d, nu, "C3")?,
            to_matrix(&self.d1, n, q, "D1")?,
            to_matrix(&self.d2, m, q, "D2")?,
        )?)
    }
}

/// Configuration echo embedded in every report; re-running with these
/// values reproduces the verdict.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct RunConfig {
    pub command: String,
    pub system: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    pub lambda1: usize,
    pub lambda2: usize,
    pub lambda3: usize,
    pub d: usize,
    pub delta7: usize,
    pub delta8: usize,
    pub supply: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSummary {
    pub points: usize,
    pub min_margin: f64,
    pub passed: bool,
}

/// Machine-readable mirror of an [`AnalysisReport`]; everything except
/// `elapsed_ms` is deterministic for a fixed configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub config: RunConfig,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    /// Coefficients of `g(r) = (r − r1)(r − r2)` when a range was analyzed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_coeffs: Option<[f64; 3]>,
    pub solver_status: String,
    pub solver_iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSummary>,
    pub notes: Vec<String>,
    pub elapsed_ms: u128,
}

impl RunReport {
    pub fn from_analysis(config: RunConfig, report: &AnalysisReport) -> Self {
        let grid = report.certificate.as_ref().map(|c| GridSummary {
            points: c.grid.points,
            min_margin: c
                .grid
                .pi_min
                .min(c.grid.minus_theta_min)
                .min(c.grid.s_min)
                .min(c.grid.u_min),
            passed: c.grid.passes(),
        });
        let g_coeffs = match (config.r1, config.r2) {
            (Some(r1), Some(r2)) => Some([r1 * r2, -(r1 + r2), 1.0]),
            _ => None,
        };
        RunReport {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            verdict: report.verdict.to_string(),
            gamma: report.gamma,
            rho: report.rho,
            margin: report.certificate.as_ref().and_then(|c| c.margin),
            g_coeffs,
            solver_status: format!("{:?}", report.sdp.status),
            solver_iterations: report.sdp.iterations,
            grid,
            notes: report.notes.clone(),
            elapsed_ms: report.elapsed_ms,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable table rendering.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut row = |k: &str, v: String| out.push_str(&format!("  {k:<18} {v}\n"));
        out.push_str(&format!("{} v{}\n", self.config.command, self.tool_version));
        row("system", self.config.system.clone());
        match (self.config.r1, self.config.r2, self.config.r0) {
            (Some(r1), Some(r2), _) => row("delay range", format!("[{r1}, {r2}]")),
            (_, _, Some(r0)) => row("delay", format!("{r0}")),
            _ => {}
        }
        row(
            "degrees",
            format!(
                "lambda = ({}, {}, {}), d = {}, delta7 = {}, delta8 = {}",
                self.config.lambda1,
                self.config.lambda2,
                self.config.lambda3,
                self.config.d,
                self.config.delta7,
                self.config.delta8
            ),
        );
        row("supply", self.config.supply.clone());
        row("verdict", self.verdict.clone());
        if let Some(g) = self.gamma {
            row("gamma", format!("{g:.6}"));
        }
        if let Some(rho) = self.rho {
            row("rho", format!("{rho:.6}"));
        }
        if let Some(m) = self.margin {
            row("margin t*", format!("{m:.3e}"));
        }
        row(
            "solver",
            format!("{} ({} iterations)", self.solver_status, self.solver_iterations),
        );
        if let Some(grid) = &self.grid {
            row(
                "grid check",
                format!(
                    "{} points, min margin {:.3e}, {}",
                    grid.points,
                    grid.min_margin,
                    if grid.passed { "passed" } else { "FAILED" }
                ),
            );
        }
        for note in &self.notes {
            row("note", note.clone());
        }
        out
    }
}
