use serde::{Deserialize, Serialize};

use super::problem::{SdpProblem, Sense};
use crate::error::Result;
use crate::linalg::{min_eigenvalue, ComplexMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub ok: bool,
    /// `max(‖A(X) − b‖₂ / max(1, ‖b‖₂), max_k −λ_min(X_k))`
    pub primal_feas_residual: f64,
    /// Most negative eigenvalue of the slack implied by `y`, relative to `max(1, ‖C‖_F)`.
    pub dual_feas_residual: f64,
    /// `|⟨C,X⟩ − bᵀy| / (1 + |⟨C,X⟩|)`
    pub gap: f64,
    pub primal_obj: f64,
    pub dual_obj: f64,
}

/// Recomputes feasibility and duality gap of `(X, y)` from the problem data
/// alone; the slack reported by the solver is not used.
pub fn check_certificate(p: &SdpProblem, x: &[ComplexMatrix], y: &[f64], tol: f64) -> Result<CertificateReport> {
    p.validate()?;
    let b = p.rhs();
    let ax = p.apply(x);
    let res: f64 = ax.iter().zip(&b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut primal = res / norm_b.max(1.0);
    for xk in x {
        primal = primal.max(-min_eigenvalue(xk)?);
    }

    let aty = p.adjoint(y);
    let mut norm_c_sq = 0.0;
    let mut dual: f64 = 0.0;
    for (k, a) in aty.iter().enumerate() {
        let c = p.objective_block(k);
        norm_c_sq += c.frobenius_norm().powi(2);
        let slack = match p.sense {
            Sense::Maximize => a - &c,
            Sense::Minimize => &c - a,
        };
        dual = dual.max(-min_eigenvalue(&slack.hermitian_part())?);
    }
    let dual = dual / norm_c_sq.sqrt().max(1.0);

    let primal_obj = p.objective_value(x);
    let dual_obj: f64 = b.iter().zip(y).map(|(b, y)| b * y).sum();
    let gap = (primal_obj - dual_obj).abs() / (1.0 + primal_obj.abs());
    Ok(CertificateReport {
        ok: primal <= tol && dual <= tol && gap <= tol,
        primal_feas_residual: primal,
        dual_feas_residual: dual,
        gap,
        primal_obj,
        dual_obj,
    })
}
