//! Dense generalized symmetric-definite eigensolver with gradient-kernel filtering
//! and multiplicity clustering.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fem::{Discretization, EigenPencil};

/// Eigenvalues below `ZERO_THRESHOLD * lambda_max` belong to the discrete gradient kernel.
pub const ZERO_THRESHOLD: f64 = 1e-8;
/// Relative gap below which neighbouring eigenvalues form one cluster.
pub const CLUSTER_TOL: f64 = 1e-6;
/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Resonant frequency (Hz) for an eigenvalue in 1/m^2.
pub fn frequency_hz(lambda: f64) -> f64 {
    lambda.max(0.0).sqrt() * SPEED_OF_LIGHT / (2.0 * std::f64::consts::PI)
}

/// Eigenvalue in 1/m^2 for a frequency in Hz.
pub fn lambda_for_frequency(f: f64) -> f64 {
    (2.0 * std::f64::consts::PI * f / SPEED_OF_LIGHT).powi(2)
}

/// A group of (numerically) equal eigenvalues with an M0-orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenCluster {
    pub index: usize,
    /// Position of the first member in the kernel-free spectrum.
    pub start: usize,
    /// Mean of the member eigenvalues.
    pub lambda: f64,
    pub eigenvalues: Vec<f64>,
    /// `N x m` basis.
    pub vectors: DMatrix<f64>,
    pub frequency_hz: f64,
}

impl EigenCluster {
    pub fn multiplicity(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Kernel-free part of a generalized spectrum, grouped into clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// All eigenvalues above the zero threshold, ascending.
    pub eigenvalues: Vec<f64>,
    pub kernel_count: usize,
    pub lambda_max: f64,
    pub clusters: Vec<EigenCluster>,
}

impl Spectrum {
    /// Every returned eigenvalue, cluster by cluster.
    pub fn returned_eigenvalues(&self) -> Vec<f64> {
        self.clusters
            .iter()
            .flat_map(|c| c.eigenvalues.iter().copied())
            .collect()
    }

    /// All returned vectors side by side.
    pub fn returned_vectors(&self) -> DMatrix<f64> {
        let n = self.clusters.first().map_or(0, |c| c.vectors.nrows());
        let cols: Vec<_> = self
            .clusters
            .iter()
            .flat_map(|c| c.vectors.column_iter().map(|v| v.into_owned()))
            .collect();
        if cols.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&cols)
        }
    }
}

/// Full generalized eigendecomposition `K x = lambda M x` with `X^T M X = I`,
/// eigenvalues ascending.
pub fn generalized_eigen(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = k.nrows();
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let chol: Cholesky<f64, Dyn> = m.clone().cholesky().ok_or(Error::MassNotPositiveDefinite)?;
    let l = chol.l();
    // A = L^{-1} K L^{-T}
    let mut tmp = k.clone();
    if !l.solve_lower_triangular_mut(&mut tmp) {
        return Err(Error::MassNotPositiveDefinite);
    }
    let mut a = tmp.transpose();
    l.solve_lower_triangular_mut(&mut a);
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut y = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        y.set_column(c, &eig.eigenvectors.column(i));
    }
    let lt = l.transpose();
    lt.solve_upper_triangular_mut(&mut y);
    Ok((values, y))
}

/// Flips each column so that its largest-magnitude entry is positive.
pub fn normalize_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let imax = col.iamax();
        if !col.is_empty() && col[imax] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Groups ascending eigenvalues into maximal chains with relative gaps at most
/// `CLUSTER_TOL`. Returns `(start, len)` pairs.
pub fn group_clusters(values: &[f64]) -> Vec<(usize, usize)> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        let split = i == values.len()
            || (values[i] - values[i - 1]).abs() > CLUSTER_TOL * values[i].abs().max(1.0);
        if split {
            groups.push((start, i - start));
            start = i;
        }
    }
    groups
}

struct Filtered {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
    kernel_count: usize,
    lambda_max: f64,
}

fn filtered_solve(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<Filtered> {
    let (values, vectors) = generalized_eigen(k, m)?;
    let lambda_max = values.last().copied().unwrap_or(0.0);
    let tau0 = ZERO_THRESHOLD * lambda_max;
    let kernel_count = values.iter().take_while(|&&v| v <= tau0).count();
    let vectors = vectors
        .columns(kernel_count, values.len() - kernel_count)
        .into_owned();
    Ok(Filtered {
        values: values[kernel_count..].to_vec(),
        vectors,
        kernel_count,
        lambda_max,
    })
}

fn make_cluster(index: usize, start: usize, len: usize, f: &Filtered) -> EigenCluster {
    let eigenvalues = f.values[start..start + len].to_vec();
    let lambda = eigenvalues.iter().sum::<f64>() / len as f64;
    let mut vectors = f.vectors.columns(start, len).into_owned();
    normalize_signs(&mut vectors);
    EigenCluster {
        index,
        start,
        lambda,
        eigenvalues,
        vectors,
        frequency_hz: frequency_hz(lambda),
    }
}

/// The `n_want` smallest eigenvalues above the zero threshold, extended so the
/// last cluster is complete.
pub fn solve_reference(pencil: &EigenPencil, n_want: usize) -> Result<Spectrum> {
    let f = filtered_solve(&pencil.k0, &pencil.m0)?;
    let mut clusters = Vec::new();
    let mut taken = 0;
    for (start, len) in group_clusters(&f.values) {
        if taken >= n_want {
            break;
        }
        clusters.push(make_cluster(clusters.len(), start, len, &f));
        taken += len;
    }
    Ok(Spectrum {
        eigenvalues: f.values,
        kernel_count: f.kernel_count,
        lambda_max: f.lambda_max,
        clusters,
    })
}

/// The first `n_clusters` clusters above the zero threshold.
pub fn solve_reference_clusters(pencil: &EigenPencil, n_clusters: usize) -> Result<Spectrum> {
    let f = filtered_solve(&pencil.k0, &pencil.m0)?;
    let clusters = group_clusters(&f.values)
        .into_iter()
        .take(n_clusters)
        .enumerate()
        .map(|(i, (start, len))| make_cluster(i, start, len, &f))
        .collect();
    Ok(Spectrum {
        eigenvalues: f.values,
        kernel_count: f.kernel_count,
        lambda_max: f.lambda_max,
        clusters,
    })
}

/// Solves the exactly deformed problem at `(t, z)` and assigns eigenpairs to the
/// reference clusters by spectral position. Each tracked eigenvalue must fall in the
/// reference window of its cluster widened by the factor `1 + 10 |t|`.
pub fn solve_sampled(
    disc: &Discretization,
    reference: &Spectrum,
    t: f64,
    z: &[f64],
) -> Result<Vec<EigenCluster>> {
    let (k, m) = disc.assemble_sampled(t, z)?;
    track(&filtered_solve(&k, &m)?, reference, t)
}

fn track(f: &Filtered, reference: &Spectrum, t: f64) -> Result<Vec<EigenCluster>> {
    if f.kernel_count != reference.kernel_count {
        return Err(Error::Tracking(format!(
            "kernel dimension changed from {} to {}",
            reference.kernel_count, f.kernel_count
        )));
    }
    let widen = 1.0 + 10.0 * t.abs();
    reference
        .clusters
        .iter()
        .map(|rc| {
            let len = rc.multiplicity();
            if rc.start + len > f.values.len() {
                return Err(Error::Tracking("sampled spectrum too short".into()));
            }
            let lo = rc.eigenvalues[0] * (1.0 - CLUSTER_TOL) / widen;
            let hi = rc.eigenvalues[len - 1] * (1.0 + CLUSTER_TOL) * widen;
            let c = make_cluster(rc.index, rc.start, len, f);
            if let Some(v) = c.eigenvalues.iter().find(|&&v| v < lo || v > hi) {
                return Err(Error::Tracking(format!(
                    "eigenvalue {v} left the window [{lo}, {hi}] of cluster {}",
                    rc.index
                )));
            }
            Ok(c)
        })
        .collect()
}

/// `|K e - lambda M e|_F` for a cluster.
pub fn residual_norm(k: &DMatrix<f64>, m: &DMatrix<f64>, c: &EigenCluster) -> f64 {
    let lam = DMatrix::from_diagonal(&DVector::from_vec(c.eigenvalues.clone()));
    (k * &c.vectors - m * &c.vectors * lam).norm()
}
