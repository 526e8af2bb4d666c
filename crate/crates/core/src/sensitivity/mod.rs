//! First derivatives of (possibly degenerate) eigenpairs with respect to the
//! deformation amplitude, one bordered saddle-point system per deformation mode.

mod bunch_kaufman;

pub use bunch_kaufman::{BunchKaufman, PIVOT_TOL};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::eigen::{EigenCluster, Spectrum, CLUSTER_TOL};
use crate::error::{Error, Result};
use crate::fem::EigenPencil;

/// Derivatives of one eigenvalue cluster for every deformation mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityResult {
    pub cluster_index: usize,
    pub lambda: f64,
    /// Cluster basis the derivatives refer to (`N x m`, M0-orthonormal).
    pub vectors: DMatrix<f64>,
    /// `[D_t lambda]_i`, each `m x m`.
    pub dlambda: Vec<DMatrix<f64>>,
    /// `[D_t e]_i`, each `N x m`.
    pub dvectors: Vec<DMatrix<f64>>,
    /// Largest bordered-solve residual relative to its right-hand side.
    pub max_relative_residual: f64,
}

impl SensitivityResult {
    pub fn multiplicity(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn modes(&self) -> usize {
        self.dlambda.len()
    }

    /// Rotates the cluster basis by an orthogonal `Q`:
    /// `e Q`, `Q^T Dlambda_i Q`, `De_i Q`.
    pub fn rotated(&self, q: &DMatrix<f64>) -> SensitivityResult {
        SensitivityResult {
            cluster_index: self.cluster_index,
            lambda: self.lambda,
            vectors: &self.vectors * q,
            dlambda: self.dlambda.iter().map(|d| q.transpose() * d * q).collect(),
            dvectors: self.dvectors.iter().map(|d| d * q).collect(),
            max_relative_residual: self.max_relative_residual,
        }
    }

    /// Basis in which `sum_i Dlambda_i^2` is diagonal, ordered by decreasing
    /// eigenvalue of that sum. For a single mode this diagonalizes `Dlambda_1`,
    /// separating the analytic eigenvalue branches of a degenerate cluster.
    pub fn adapted(&self) -> SensitivityResult {
        let m = self.multiplicity();
        if m <= 1 || self.dlambda.is_empty() {
            return self.clone();
        }
        let mut s = DMatrix::zeros(m, m);
        for d in &self.dlambda {
            s += d * d;
        }
        let s = (&s + s.transpose()) * 0.5;
        let eig = SymmetricEigen::new(s);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut q = DMatrix::zeros(m, m);
        for (c, &i) in order.iter().enumerate() {
            let mut col = eig.eigenvectors.column(i).into_owned();
            if col[col.iamax()] < 0.0 {
                col.neg_mut();
            }
            q.set_column(c, &col);
        }
        self.rotated(&q)
    }

    /// Orthonormality-derivative defect
    /// `max_i |De_i^T M0 e + e^T M0 De_i + e^T dM_i e|_max`.
    pub fn orthonormality_defect(&self, pencil: &EigenPencil) -> f64 {
        let me = &pencil.m0 * &self.vectors;
        self.dvectors
            .iter()
            .zip(&pencil.dm)
            .map(|(de, dm)| {
                let x = de.transpose() * &me;
                let defect = &x + x.transpose() + self.vectors.transpose() * dm * &self.vectors;
                defect.amax()
            })
            .fold(0.0, f64::max)
    }
}

/// Distance from the cluster to the nearest eigenvalue outside it (the gradient
/// kernel counts as eigenvalue zero).
pub fn spectral_gap(spectrum: &Spectrum, cluster: &EigenCluster) -> f64 {
    let end = cluster.start + cluster.multiplicity();
    let below = if cluster.start > 0 {
        spectrum.eigenvalues[cluster.start - 1]
    } else {
        0.0
    };
    let lo = cluster.lambda - below;
    let hi = spectrum
        .eigenvalues
        .get(end)
        .map_or(f64::INFINITY, |&v| v - cluster.lambda);
    lo.min(hi)
}

/// Bordered matrix `[[K0 - lambda M0, -M0 e], [-e^T M0, 0]]`.
pub fn bordered_matrix(pencil: &EigenPencil, lambda: f64, e: &DMatrix<f64>) -> DMatrix<f64> {
    let n = pencil.len();
    let m = e.ncols();
    let mut b = DMatrix::zeros(n + m, n + m);
    b.view_mut((0, 0), (n, n))
        .copy_from(&(&pencil.k0 - &pencil.m0 * lambda));
    let me = -(&pencil.m0 * e);
    b.view_mut((0, n), (n, m)).copy_from(&me);
    b.view_mut((n, 0), (m, n)).copy_from(&me.transpose());
    b
}

/// Right-hand sides for one mode: `-dK e + lambda dM e` over `1/2 e^T dM e`.
///
/// The constraint block is the full symmetric matrix `1/2 e^T dM e`; its diagonal
/// is the normalization condition and its off-diagonal part fixes the rotation
/// gauge of a degenerate cluster so that the differentiated orthonormality
/// condition holds entrywise.
pub fn bordered_rhs(
    lambda: f64,
    e: &DMatrix<f64>,
    dk: &DMatrix<f64>,
    dm: &DMatrix<f64>,
) -> DMatrix<f64> {
    let n = e.nrows();
    let m = e.ncols();
    let dme = dm * e;
    let top = -(dk * e) + &dme * lambda;
    let bottom = (e.transpose() * &dme) * 0.5;
    let bottom = (&bottom + bottom.transpose()) * 0.5;
    let mut rhs = DMatrix::zeros(n + m, m);
    rhs.view_mut((0, 0), (n, m)).copy_from(&top);
    rhs.view_mut((n, 0), (m, m)).copy_from(&bottom);
    rhs
}

/// Solves the bordered systems of `cluster` for every deformation mode, reusing a
/// single symmetric indefinite factorization.
pub fn eigenpair_derivatives(
    pencil: &EigenPencil,
    spectrum: &Spectrum,
    cluster: &EigenCluster,
) -> Result<SensitivityResult> {
    let gap = spectral_gap(spectrum, cluster);
    if gap <= 10.0 * CLUSTER_TOL * cluster.lambda {
        return Err(Error::ClusterNotIsolated {
            lambda: cluster.lambda,
            gap,
        });
    }
    let n = pencil.len();
    let m = cluster.multiplicity();
    let e = &cluster.vectors;
    let lambda = cluster.lambda;
    let bordered = bordered_matrix(pencil, lambda, e);
    let fact = BunchKaufman::factor(&bordered).map_err(|err| match err {
        Error::SingularBordered(_) => Error::ClusterNotIsolated { lambda, gap },
        other => other,
    })?;
    let mut dlambda = Vec::with_capacity(pencil.modes());
    let mut dvectors = Vec::with_capacity(pencil.modes());
    let mut max_res: f64 = 0.0;
    for (dk, dm) in pencil.dk.iter().zip(&pencil.dm) {
        let rhs = bordered_rhs(lambda, e, dk, dm);
        let sol = fact.solve_matrix(&rhs);
        let rnorm = rhs.norm();
        if rnorm > 0.0 {
            max_res = max_res.max((&bordered * &sol - &rhs).norm() / rnorm);
        }
        dvectors.push(sol.view((0, 0), (n, m)).into_owned());
        dlambda.push(sol.view((n, 0), (m, m)).into_owned());
    }
    Ok(SensitivityResult {
        cluster_index: cluster.index,
        lambda,
        vectors: e.clone(),
        dlambda,
        dvectors,
        max_relative_residual: max_res,
    })
}

/// Derivatives along the KL direction `z`: `(sum_i z_i Dlambda_i, sum_i z_i De_i)`.
pub fn directional_derivative(
    result: &SensitivityResult,
    z: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if z.len() != result.modes() {
        return Err(Error::Dimension(format!(
            "{} random parameters for {} modes",
            z.len(),
            result.modes()
        )));
    }
    let m = result.multiplicity();
    let mut dl = DMatrix::zeros(m, m);
    let mut de = DMatrix::zeros(result.vectors.nrows(), m);
    for ((zi, l), v) in z.iter().zip(&result.dlambda).zip(&result.dvectors) {
        dl += l * *zi;
        de += v * *zi;
    }
    Ok((dl, de))
}
