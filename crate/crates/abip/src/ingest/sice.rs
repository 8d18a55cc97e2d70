//! LP columns of the sparse inverse-covariance estimation problem.
//!
//! Estimating a sparse precision matrix Ω from a sample covariance Σ
//! decomposes into one small LP per column: recover β_j minimizing
//! ‖β‖₁ subject to ‖Σβ − e_j‖_∞ ≤ λ. Splitting β = β⁺ − β⁻ and adding
//! interval slacks w⁺, w⁻ for the band constraint gives the
//! standard-form LP
//!
//! ```text
//!   min  e'β⁺ + e'β⁻
//!   s.t. Σβ⁺ − Σβ⁻ + w⁺      = λe + e_j
//!                   w⁺ + w⁻ = 2λe
//!        β⁺, β⁻, w⁺, w⁻ ≥ 0
//! ```
//!
//! with 2d rows and 4d columns. The regularization weight follows the
//! usual sample-size rule λ = (3/2)·√(ln d / N).

use super::IngestError;
use crate::lp_model::StandardLp;
use crate::sparse::Csc;

const SYMMETRY_TOL: f64 = 1e-10;

/// One column subproblem of the precision-matrix estimation LP.
#[derive(Debug, Clone)]
pub struct SiceSpec {
    /// dense sample covariance, row-major, d×d, symmetric
    pub sigma: Vec<Vec<f64>>,
    /// number of samples behind `sigma`; sets the regularization
    pub n_samples: usize,
    /// which precision-matrix column to recover, 1-based in [1, d]
    pub column_index: usize,
}

/// The regularization weight λ = (3/2)·√(ln d / N).
pub fn sice_lambda(d: usize, n_samples: usize) -> f64 {
    1.5 * ((d as f64).ln() / n_samples as f64).sqrt()
}

/// Builds the standard-form LP for one column of the estimation
/// problem. Variable order is (β⁺, β⁻, w⁺, w⁻), each block of length d.
pub fn build_sice_lp(spec: &SiceSpec) -> Result<StandardLp, IngestError> {
    let d = spec.sigma.len();
    if d == 0 {
        return Err(IngestError::Invalid("covariance matrix is empty".into()));
    }
    if spec.n_samples < 2 {
        return Err(IngestError::Invalid("need at least 2 samples".into()));
    }
    if spec.column_index == 0 || spec.column_index > d {
        return Err(IngestError::Invalid(format!(
            "column index {} out of range [1, {d}]",
            spec.column_index
        )));
    }
    for (i, row) in spec.sigma.iter().enumerate() {
        if row.len() != d {
            return Err(IngestError::Invalid(format!(
                "covariance row {i} has length {}, expected {d}",
                row.len()
            )));
        }
        for j in 0..i {
            let skew = (spec.sigma[i][j] - spec.sigma[j][i]).abs();
            if skew > SYMMETRY_TOL {
                return Err(IngestError::Invalid(format!(
                    "covariance is asymmetric at ({i}, {j}): |difference| = {skew:.3e}"
                )));
            }
        }
    }

    let lambda = sice_lambda(d, spec.n_samples);
    let j0 = spec.column_index - 1;

    // block layout: rows [band | slack-coupling], cols [β⁺ β⁻ w⁺ w⁻]
    let mut trips = Vec::with_capacity(2 * d * d + 3 * d);
    for i in 0..d {
        for k in 0..d {
            let v = spec.sigma[i][k];
            if v != 0.0 {
                trips.push((i, k, v));
                trips.push((i, d + k, -v));
            }
        }
        trips.push((i, 2 * d + i, 1.0));
        trips.push((d + i, 2 * d + i, 1.0));
        trips.push((d + i, 3 * d + i, 1.0));
    }
    let a = Csc::from_triplets(2 * d, 4 * d, &trips);

    let mut b = vec![lambda; d];
    b[j0] += 1.0;
    b.extend(std::iter::repeat(2.0 * lambda).take(d));

    let mut c = vec![1.0; 2 * d];
    c.extend(std::iter::repeat(0.0).take(2 * d));

    Ok(StandardLp::new(a, b, c))
}
