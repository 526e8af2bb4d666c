//! Perturbation-based propagation of eigenpair statistics, with Monte Carlo and
//! closed-form baselines for validation.

mod convergence;
mod monte_carlo;
mod oracle;
mod report;

pub use convergence::{
    convergence_study, fit_slope, Baseline, BaselineKind, ClusterSlopes, ConvergenceRow,
    ConvergenceStudy, SlopeFit,
};
pub use monte_carlo::{
    monte_carlo, procrustes_align, projector_distance, sample_z, McClusterEstimate, McEstimate,
};
pub use oracle::{analytic_rectangle_oracle, OracleValue, RectangleOracle, ScalingAxis};
pub use report::{
    fmt_f64, write_convergence_csv, write_spectrum_csv, write_summary_csv,
    write_variance_field_csv, CONVERGENCE_HEADER, SPECTRUM_HEADER, SUMMARY_HEADER,
    VARIANCE_FIELD_HEADER,
};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fem::Discretization;
use crate::sensitivity::SensitivityResult;

/// Variance of `z_i ~ U[-1, 1]`.
pub const UNIFORM_VARIANCE: f64 = 1.0 / 3.0;

/// First-order statistics of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterUq {
    pub cluster_index: usize,
    /// Mean approximation, the reference eigenvalue.
    pub lambda: f64,
    /// `t^2 / 3 sum_i d_i d_i^T` with `d_i = diag(Dlambda_i)`, `m x m`.
    pub lambda_covariance: DMatrix<f64>,
    /// Diagonal of `lambda_covariance`, one variance per cluster branch.
    pub lambda_variance: Vec<f64>,
    /// `t^2 / 3 sum_i De_i .* De_i`, `N x m`.
    pub vector_variance: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UqSummary {
    pub t: f64,
    /// Number of KL modes.
    pub modes: usize,
    pub clusters: Vec<ClusterUq>,
}

fn check_t(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "amplitude t = {t} must be >= 0"
        )));
    }
    Ok(())
}

/// Propagates one cluster's derivatives to first-order statistics at amplitude `t`.
pub fn propagate_cluster(result: &SensitivityResult, t: f64) -> Result<ClusterUq> {
    check_t(t)?;
    let m = result.multiplicity();
    let n = result.vectors.nrows();
    let s = t * t * UNIFORM_VARIANCE;
    let mut cov = DMatrix::zeros(m, m);
    let mut vvar = DMatrix::zeros(n, m);
    for (dl, de) in result.dlambda.iter().zip(&result.dvectors) {
        let d: DVector<f64> = dl.diagonal();
        cov.ger(s, &d, &d, 1.0);
        vvar.zip_apply(de, |acc, x| *acc += s * x * x);
    }
    let lambda_variance = cov.diagonal().iter().copied().collect();
    Ok(ClusterUq {
        cluster_index: result.cluster_index,
        lambda: result.lambda,
        lambda_covariance: cov,
        lambda_variance,
        vector_variance: vvar,
    })
}

pub fn propagate(results: &[SensitivityResult], t: f64) -> Result<UqSummary> {
    check_t(t)?;
    Ok(UqSummary {
        t,
        modes: results.first().map_or(0, |r| r.modes()),
        clusters: results
            .iter()
            .map(|r| propagate_cluster(r, t))
            .collect::<Result<_>>()?,
    })
}

/// Full covariance of `vec(e)` (column-major, `Nm x Nm`): `t^2 / 3 sum_i vec(De_i) vec(De_i)^T`.
pub fn eigenvector_covariance(result: &SensitivityResult, t: f64) -> Result<DMatrix<f64>> {
    check_t(t)?;
    let nm = result.vectors.len();
    let s = t * t * UNIFORM_VARIANCE;
    let mut cov = DMatrix::zeros(nm, nm);
    for de in &result.dvectors {
        let v = DVector::from_column_slice(de.as_slice());
        cov.ger(s, &v, &v, 1.0);
    }
    Ok(cov)
}

/// Pointwise variance of the physical field on a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldVariance {
    pub x: f64,
    pub y: f64,
    pub var_ex: f64,
    pub var_ey: f64,
}

impl FieldVariance {
    pub fn magnitude(&self) -> f64 {
        self.var_ex + self.var_ey
    }
}

/// Variance of `E(x) = sum_k e_k w_k(x)` on a `grid x grid` uniform parametric grid,
/// summed over the cluster columns so the result does not depend on the cluster basis.
pub fn variance_field(
    disc: &Discretization,
    result: &SensitivityResult,
    t: f64,
    grid: usize,
) -> Result<Vec<FieldVariance>> {
    check_t(t)?;
    if grid < 2 {
        return Err(Error::InvalidArgument(
            "variance grid needs at least 2 points".into(),
        ));
    }
    let s = t * t * UNIFORM_VARIANCE;
    let mut out = Vec::with_capacity(grid * grid);
    for iy in 0..grid {
        for ix in 0..grid {
            let x = [ix as f64 / (grid - 1) as f64, iy as f64 / (grid - 1) as f64];
            let mut var = [0.0; 2];
            let mut point = None;
            for de in &result.dvectors {
                for col in de.column_iter() {
                    let (p, v) = disc.eval_field(&col.into_owned(), x)?;
                    point = Some(p);
                    var[0] += s * v[0] * v[0];
                    var[1] += s * v[1] * v[1];
                }
            }
            let p = match point {
                Some(p) => p,
                None => disc.eval_field(&DVector::zeros(disc.len()), x)?.0,
            };
            out.push(FieldVariance {
                x: p[0],
                y: p[1],
                var_ex: var[0],
                var_ey: var[1],
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn scalar_result(d: f64) -> SensitivityResult {
        SensitivityResult {
            cluster_index: 0,
            lambda: 2.0 * PI * PI,
            vectors: DMatrix::from_element(3, 1, 1.0),
            dlambda: vec![DMatrix::from_element(1, 1, d)],
            dvectors: vec![DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 0.5])],
            max_relative_residual: 0.0,
        }
    }

    #[test]
    fn scaled_rectangle_variance() {
        let u = propagate_cluster(&scalar_result(-2.0 * PI * PI), 0.1).unwrap();
        assert!((u.lambda_variance[0] - 1.298_79).abs() < 1e-5);
        assert_eq!(u.lambda, 2.0 * PI * PI);
    }

    #[test]
    fn zero_amplitude_and_t_squared_scaling() {
        let r = scalar_result(3.0);
        let z = propagate_cluster(&r, 0.0).unwrap();
        assert_eq!(z.lambda_variance, vec![0.0]);
        assert_eq!(z.vector_variance.amax(), 0.0);
        let a = propagate_cluster(&r, 0.125).unwrap();
        let b = propagate_cluster(&r, 0.25).unwrap();
        assert_eq!(b.lambda_variance[0], 4.0 * a.lambda_variance[0]);
        assert_eq!(b.vector_variance, &a.vector_variance * 4.0);
        assert!(propagate_cluster(&r, -0.1).is_err());
    }

    #[test]
    fn covariance_is_positive_semidefinite() {
        let r = SensitivityResult {
            cluster_index: 0,
            lambda: 1.0,
            vectors: DMatrix::zeros(2, 3),
            dlambda: (0..4)
                .map(|i| DMatrix::from_fn(3, 3, |a, b| ((a + 2 * b + 3 * i) as f64).sin()))
                .collect(),
            dvectors: vec![DMatrix::zeros(2, 3); 4],
            max_relative_residual: 0.0,
        };
        let u = propagate_cluster(&r, 0.3).unwrap();
        let tr = u.lambda_covariance.trace();
        let ev = u.lambda_covariance.clone().symmetric_eigenvalues();
        assert!(ev.iter().all(|&e| e >= -1e-12 * tr));
    }
}
