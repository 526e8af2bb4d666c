use crate::eigen::Spectrum;
use crate::error::{Error, Result};
use crate::fem::{Discretization, EigenPencil};
use crate::sensitivity::{eigenpair_derivatives, SensitivityResult};

use super::monte_carlo::monte_carlo;
use super::oracle::RectangleOracle;
use super::propagate_cluster;

/// Reference eigenvalues are matched to analytic modes within this relative distance.
const ANALYTIC_MATCH_TOL: f64 = 1e-2;
/// Errors at or below this fraction of `max(lambda, 1)` (squared for variances)
/// are treated as zero in slope fits.
const NOISE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Baseline {
    Analytic(RectangleOracle),
    /// Common random numbers: the same seeds are used at every amplitude.
    MonteCarlo {
        n_samples: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Analytic,
    MonteCarlo,
}

impl BaselineKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BaselineKind::Analytic => "analytic",
            BaselineKind::MonteCarlo => "monte_carlo",
        }
    }
}

impl Baseline {
    pub fn kind(&self) -> BaselineKind {
        match self {
            Baseline::Analytic(_) => BaselineKind::Analytic,
            Baseline::MonteCarlo { .. } => BaselineKind::MonteCarlo,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub t: f64,
    pub cluster_index: usize,
    /// Euclidean norm over cluster branches of the mean error.
    pub err_mean: f64,
    /// Euclidean norm over cluster branches of the variance error.
    pub err_var: f64,
    pub baseline: BaselineKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SlopeFit {
    Fitted(f64),
    Absent(String),
}

impl SlopeFit {
    pub fn value(&self) -> Option<f64> {
        match self {
            SlopeFit::Fitted(v) => Some(*v),
            SlopeFit::Absent(_) => None,
        }
    }
}

impl std::fmt::Display for SlopeFit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SlopeFit::Fitted(v) => write!(f, "{v:.3}"),
            SlopeFit::Absent(r) => write!(f, "absent ({r})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSlopes {
    pub cluster_index: usize,
    pub mean: SlopeFit,
    pub variance: SlopeFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    pub slopes: Vec<ClusterSlopes>,
}

/// Least-squares slope of `log err` against `log t` over the smaller half of the
/// amplitudes, ignoring errors at or below `floor`.
pub fn fit_slope(ts: &[f64], errs: &[f64], floor: f64) -> SlopeFit {
    let mut pts: Vec<(f64, f64)> = ts.iter().copied().zip(errs.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = pts.len().div_ceil(2);
    let usable: Vec<(f64, f64)> = pts[..half]
        .iter()
        .filter(|(t, e)| *t > 0.0 && e.is_finite() && *e > floor)
        .map(|(t, e)| (t.ln(), e.ln()))
        .collect();
    if usable.len() < 3 {
        return SlopeFit::Absent(format!(
            "{} of {} small-amplitude errors above the noise floor {floor:e}",
            usable.len(),
            half
        ));
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    SlopeFit::Fitted(sxy / sxx)
}

fn branch_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Compares the perturbation mean (reference eigenvalue) and first-order variance
/// of every cluster in `spectrum` against `baseline` at each amplitude.
///
/// Degenerate clusters are compared branch by branch in the adapted basis of their
/// derivative matrices, pairing branches by decreasing variance.
pub fn convergence_study(
    disc: &Discretization,
    pencil: &EigenPencil,
    spectrum: &Spectrum,
    t_list: &[f64],
    baseline: &Baseline,
) -> Result<ConvergenceStudy> {
    if t_list.len() < 4 {
        return Err(Error::InvalidArgument("need ≥ 4 amplitudes".into()));
    }
    if t_list.windows(2).any(|w| w[0] >= w[1]) || t_list[0] <= 0.0 {
        return Err(Error::InvalidArgument(
            "amplitudes must be positive and strictly increasing".into(),
        ));
    }
    let results: Vec<SensitivityResult> = spectrum
        .clusters
        .iter()
        .map(|c| eigenpair_derivatives(pencil, spectrum, c).map(|r| r.adapted()))
        .collect::<Result<_>>()?;

    let analytic_modes = match baseline {
        Baseline::Analytic(o) => spectrum
            .clusters
            .iter()
            .map(|c| {
                let modes = o.modes_near(c.lambda, ANALYTIC_MATCH_TOL);
                if modes.len() != c.multiplicity() {
                    return Err(Error::Tracking(format!(
                        "cluster {} at {} matches {} analytic modes, expected {}",
                        c.index,
                        c.lambda,
                        modes.len(),
                        c.multiplicity()
                    )));
                }
                Ok(modes)
            })
            .collect::<Result<Vec<_>>>()?,
        Baseline::MonteCarlo { .. } => Vec::new(),
    };

    let mut rows = Vec::new();
    for &t in t_list {
        let mc = match baseline {
            Baseline::MonteCarlo { n_samples, seed } => Some(monte_carlo(
                disc, spectrum, &pencil.m0, t, *n_samples, *seed,
            )?),
            Baseline::Analytic(_) => None,
        };
        for (ci, r) in results.iter().enumerate() {
            let u = propagate_cluster(r, t)?;
            // perturbation mean: the reference eigenvalues themselves
            let pert_mean = spectrum.clusters[ci].eigenvalues.clone();
            let pert_var = sorted_desc(u.lambda_variance.clone());
            let (base_mean, base_var) = match (baseline, &mc) {
                (Baseline::Analytic(o), _) => {
                    let mut branches = analytic_modes[ci]
                        .iter()
                        .map(|&mode| Ok((o.variance(mode, t)?, o.mean(mode, t)?)))
                        .collect::<Result<Vec<_>>>()?;
                    branches.sort_by(|a, b| b.0.total_cmp(&a.0));
                    (
                        branches.iter().map(|b| b.1).collect::<Vec<_>>(),
                        branches.iter().map(|b| b.0).collect::<Vec<_>>(),
                    )
                }
                (_, Some(mc)) => {
                    let c = &mc.clusters[ci];
                    (c.mean.clone(), sorted_desc(c.variance.clone()))
                }
                _ => unreachable!(),
            };
            rows.push(ConvergenceRow {
                t,
                cluster_index: r.cluster_index,
                err_mean: branch_norm(&pert_mean, &base_mean),
                err_var: branch_norm(&pert_var, &base_var),
                baseline: baseline.kind(),
            });
        }
    }

    let slopes = results
        .iter()
        .map(|r| {
            let own: Vec<&ConvergenceRow> = rows
                .iter()
                .filter(|row| row.cluster_index == r.cluster_index)
                .collect();
            let ts: Vec<f64> = own.iter().map(|row| row.t).collect();
            let scale = r.lambda.max(1.0);
            ClusterSlopes {
                cluster_index: r.cluster_index,
                mean: fit_slope(
                    &ts,
                    &own.iter().map(|row| row.err_mean).collect::<Vec<_>>(),
                    NOISE_FLOOR * scale,
                ),
                variance: fit_slope(
                    &ts,
                    &own.iter().map(|row| row.err_var).collect::<Vec<_>>(),
                    NOISE_FLOOR * scale * scale,
                ),
            }
        })
        .collect();
    Ok(ConvergenceStudy { rows, slopes })
}
