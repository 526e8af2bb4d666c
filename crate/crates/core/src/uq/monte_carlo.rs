use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::eigen::{solve_sampled, EigenCluster, Spectrum};
use crate::error::{Error, Result};
use crate::fem::Discretization;

/// Samples are solved in parallel in blocks of this size and accumulated in
/// index order.
const BLOCK: usize = 64;

/// Maximum fraction of samples that may be skipped.
const MAX_FAILED_FRACTION: f64 = 0.01;

/// KL parameters of sample `index`: `modes` draws from `U[-1, 1]` using a ChaCha8
/// stream seeded with `base_seed + index`.
pub fn sample_z(base_seed: u64, index: u64, modes: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(index));
    (0..modes).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

/// Rotates `sampled` within its span to best match `reference` in the `M0` inner
/// product: `Q = U V^T` for `sampled^T M0 reference = U S V^T`.
pub fn procrustes_align(
    sampled: &DMatrix<f64>,
    reference: &DMatrix<f64>,
    m0: &DMatrix<f64>,
) -> DMatrix<f64> {
    if sampled == reference {
        return sampled.clone();
    }
    let w = sampled.transpose() * (m0 * reference);
    let svd = w.svd(true, true);
    let q = svd.u.unwrap() * svd.v_t.unwrap();
    sampled * q
}

/// Distance `|P_s - P_r|` between the `M0`-orthogonal projectors onto two spans,
/// measured in the norm induced by `M0`. Both bases are first made
/// `M0`-orthonormal, then `|P_s - P_r|^2 = 2m - 2 |X_s^T M0 X_r|_F^2`.
pub fn projector_distance(
    sampled: &DMatrix<f64>,
    reference: &DMatrix<f64>,
    m0: &DMatrix<f64>,
) -> f64 {
    if sampled == reference {
        return 0.0;
    }
    let orthonormalize = |x: &DMatrix<f64>| -> DMatrix<f64> {
        let g = x.transpose() * m0 * x;
        match g.cholesky() {
            Some(c) => {
                let mut y = x.transpose();
                c.l().solve_lower_triangular_mut(&mut y);
                y.transpose()
            }
            None => x.clone(),
        }
    };
    let xs = orthonormalize(sampled);
    let xr = orthonormalize(reference);
    let m = xs.ncols() as f64;
    let w = xs.transpose() * m0 * xr;
    (2.0 * m - 2.0 * w.norm_squared()).max(0.0).sqrt()
}

/// Monte Carlo statistics of one tracked cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct McClusterEstimate {
    pub cluster_index: usize,
    pub lambda_ref: f64,
    /// Sample mean of each sorted cluster eigenvalue.
    pub mean: Vec<f64>,
    /// Unbiased sample variance of each sorted cluster eigenvalue.
    pub variance: Vec<f64>,
    pub mean_se: Vec<f64>,
    pub variance_se: Vec<f64>,
    /// Mean and variance of the Procrustes-aligned eigenvector coefficients, `N x m`.
    pub vector_mean: DMatrix<f64>,
    pub vector_variance: DMatrix<f64>,
    /// Mean of `|P_sample - P_ref|`.
    pub projector_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub t: f64,
    pub base_seed: u64,
    /// Samples used in the statistics.
    pub n_samples: usize,
    /// Samples skipped because the map folded or a cluster could not be tracked.
    pub n_failed: usize,
    pub clusters: Vec<McClusterEstimate>,
}

struct Sample {
    /// Per cluster: eigenvalue deviations from the reference eigenvalue.
    dlambda: Vec<Vec<f64>>,
    /// Per cluster: aligned vectors minus reference vectors.
    dvectors: Vec<DMatrix<f64>>,
    projector: Vec<f64>,
}

struct Accumulator {
    s1: Vec<f64>,
    s2: Vec<f64>,
    s3: Vec<f64>,
    s4: Vec<f64>,
    v1: DMatrix<f64>,
    v2: DMatrix<f64>,
    proj: f64,
}

impl Accumulator {
    fn new(c: &EigenCluster) -> Self {
        let m = c.multiplicity();
        let n = c.vectors.nrows();
        Accumulator {
            s1: vec![0.0; m],
            s2: vec![0.0; m],
            s3: vec![0.0; m],
            s4: vec![0.0; m],
            v1: DMatrix::zeros(n, m),
            v2: DMatrix::zeros(n, m),
            proj: 0.0,
        }
    }
}

fn run_sample(
    disc: &Discretization,
    reference: &Spectrum,
    m0: &DMatrix<f64>,
    t: f64,
    z: &[f64],
) -> Result<Sample> {
    let clusters = solve_sampled(disc, reference, t, z)?;
    let mut s = Sample {
        dlambda: Vec::with_capacity(clusters.len()),
        dvectors: Vec::with_capacity(clusters.len()),
        projector: Vec::with_capacity(clusters.len()),
    };
    for (c, rc) in clusters.iter().zip(&reference.clusters) {
        s.dlambda.push(
            c.eigenvalues
                .iter()
                .zip(&rc.eigenvalues)
                .map(|(a, b)| a - b)
                .collect(),
        );
        let aligned = procrustes_align(&c.vectors, &rc.vectors, m0);
        s.projector
            .push(projector_distance(&c.vectors, &rc.vectors, m0));
        s.dvectors.push(aligned - &rc.vectors);
    }
    Ok(s)
}

/// Monte Carlo estimates of eigenpair statistics for every reference cluster.
///
/// `m0` is the reference mass matrix used for alignment. Results depend only on
/// `(t, n_samples, base_seed)`, not on the number of worker threads.
pub fn monte_carlo(
    disc: &Discretization,
    reference: &Spectrum,
    m0: &DMatrix<f64>,
    t: f64,
    n_samples: usize,
    base_seed: u64,
) -> Result<McEstimate> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument(
            "Monte Carlo needs at least 2 samples".into(),
        ));
    }
    let modes = disc.field().len();
    let mut acc: Vec<Accumulator> = reference.clusters.iter().map(Accumulator::new).collect();
    let mut used = 0usize;
    let mut failed = 0usize;
    for start in (0..n_samples).step_by(BLOCK) {
        let end = (start + BLOCK).min(n_samples);
        let block: Vec<Result<Sample>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let z = sample_z(base_seed, i as u64, modes);
                run_sample(disc, reference, m0, t, &z)
            })
            .collect();
        for (i, r) in block.into_iter().enumerate() {
            match r {
                Ok(s) => {
                    used += 1;
                    for (a, ((dl, dv), p)) in acc
                        .iter_mut()
                        .zip(s.dlambda.iter().zip(&s.dvectors).zip(&s.projector))
                    {
                        for (j, d) in dl.iter().enumerate() {
                            a.s1[j] += d;
                            a.s2[j] += d * d;
                            a.s3[j] += d * d * d;
                            a.s4[j] += d * d * d * d;
                        }
                        a.v1 += dv;
                        a.v2.zip_apply(dv, |acc, x| *acc += x * x);
                        a.proj += p;
                    }
                }
                Err(e @ (Error::NotInvertible { .. } | Error::Tracking(_))) => {
                    log::debug!("sample {} skipped: {e}", start + i);
                    failed += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
    if failed as f64 > MAX_FAILED_FRACTION * n_samples as f64 || used < 2 {
        return Err(Error::TooManyFailedSamples {
            failed,
            total: n_samples,
        });
    }
    if failed > 0 {
        log::warn!("{failed} of {n_samples} samples skipped");
    }
    let n = used as f64;
    let clusters = reference
        .clusters
        .iter()
        .zip(acc)
        .map(|(rc, a)| {
            let m = rc.multiplicity();
            let mut mean = Vec::with_capacity(m);
            let mut variance = Vec::with_capacity(m);
            let mut mean_se = Vec::with_capacity(m);
            let mut variance_se = Vec::with_capacity(m);
            for j in 0..m {
                let mu = a.s1[j] / n;
                let var = ((a.s2[j] - n * mu * mu) / (n - 1.0)).max(0.0);
                let m4 = a.s4[j] / n - 4.0 * mu * a.s3[j] / n + 6.0 * mu * mu * a.s2[j] / n
                    - 3.0 * mu.powi(4);
                mean.push(rc.eigenvalues[j] + mu);
                variance.push(var);
                mean_se.push((var / n).sqrt());
                variance_se.push(
                    ((m4 - var * var * (n - 3.0) / (n - 1.0)) / n)
                        .max(0.0)
                        .sqrt(),
                );
            }
            let vmean = &a.v1 / n;
            let mut vvar = (&a.v2 - vmean.component_mul(&vmean) * n) / (n - 1.0);
            vvar.apply(|x| *x = x.max(0.0));
            McClusterEstimate {
                cluster_index: rc.index,
                lambda_ref: rc.lambda,
                mean,
                variance,
                mean_se,
                variance_se,
                vector_mean: &rc.vectors + vmean,
                vector_variance: vvar,
                projector_mean: a.proj / n,
            }
        })
        .collect();
    Ok(McEstimate {
        t,
        base_seed,
        n_samples: used,
        n_failed: failed,
        clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampler_is_reproducible_and_bounded() {
        let a = sample_z(7, 3, 5);
        assert_eq!(a, sample_z(7, 3, 5));
        assert_ne!(a, sample_z(7, 4, 5));
        assert!(a.iter().all(|z| (-1.0..=1.0).contains(z)));
    }

    #[test]
    fn procrustes_recovers_a_rotation() {
        let m0 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 0.5, 1.0]));
        let r = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.5]);
        let (s, c) = (0.4f64.sin(), 0.4f64.cos());
        let q = DMatrix::from_row_slice(2, 2, &[c, s, -s, c]);
        let rotated = &r * &q;
        let aligned = procrustes_align(&rotated, &r, &m0);
        assert!((aligned - &r).amax() < 1e-14);
        assert!(projector_distance(&rotated, &r, &m0) < 1e-7);
        let other = DMatrix::from_row_slice(
            4,
            2,
            &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0 / 0.5f64.sqrt(), 0.0, 0.0],
        );
        // one shared direction, one orthogonal: |P_s - P_r|^2 = 2
        assert!((projector_distance(&other, &r, &m0) - 2f64.sqrt()).abs() < 1e-12);
    }
}
