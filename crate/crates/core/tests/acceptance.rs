#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use cavity_uq::bspline::KnotVector;
use cavity_uq::eigen::{solve_reference, solve_reference_clusters, solve_sampled};
use cavity_uq::fem::EigenPencil;
use cavity_uq::geometry::{
    coefficient_derivatives_general, pullback_coefficients, ClosedForm, CurlCoefficient,
    ModeDerivative,
};
use cavity_uq::sensitivity::{directional_derivative, eigenpair_derivatives};
use cavity_uq::uq::*;
use common::*;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PI2: f64 = PI * PI;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within_time(start: Instant, limit: Duration, detail: String) -> Outcome {
    let took = start.elapsed();
    ensure!(
        took < limit,
        "{detail}; runtime {took:.1?} exceeds {limit:?}"
    );
    Ok(format!("{detail}; runtime {took:.1?}"))
}

fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn analytic_spectrum() -> Outcome {
    let start = Instant::now();
    let d = square(16, width_scaling());
    let p = d.assemble_pencil().map_err(|e| e.to_string())?;
    let s = solve_reference_clusters(&p, 5).map_err(|e| e.to_string())?;
    let expect = [(1.0, 2), (2.0, 1), (4.0, 2), (5.0, 2), (8.0, 1)];
    ensure!(s.clusters.len() == 5, "{} clusters", s.clusters.len());
    let mut worst: f64 = 0.0;
    for (c, (k, m)) in s.clusters.iter().zip(expect) {
        ensure!(
            c.multiplicity() == m,
            "cluster {} has multiplicity {}, expected {m}",
            c.index,
            c.multiplicity()
        );
        for l in &c.eigenvalues {
            worst = worst.max(rel(*l, k * PI2));
        }
    }
    ensure!(worst <= 1e-3, "max relative eigenvalue error {worst:e}");
    within_time(
        start,
        Duration::from_secs(60),
        format!("max relative error {worst:.2e}"),
    )
}

fn random_jacobian(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    loop {
        let j = DMatrix::from_fn(
            d,
            d,
            |a, b| if a == b { 1.0 } else { 0.0 } + rng.gen_range(-0.6..0.6),
        );
        let det = j.determinant();
        if (0.5..=2.0).contains(&det) {
            return j;
        }
    }
}

fn coefficient_parts(c: &CurlCoefficient) -> DMatrix<f64> {
    match c {
        CurlCoefficient::Scalar(s) => DMatrix::from_element(1, 1, *s),
        CurlCoefficient::Tensor(m) => m.clone(),
    }
}

fn coefficient_derivatives() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let h = 1e-5;
    let mut worst_fd: f64 = 0.0;
    let mut worst_id: f64 = 0.0;
    for k in 0..200 {
        let d = 2 + k % 2;
        let j = random_jacobian(&mut rng, d);
        let dj = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
        let (dc, da) = coefficient_derivatives_general(&j, &dj).map_err(|e| e.to_string())?;
        let (cp, ap) = pullback_coefficients(&(&j + &dj * h)).map_err(|e| e.to_string())?;
        let (cm, am) = pullback_coefficients(&(&j - &dj * h)).map_err(|e| e.to_string())?;
        let fd_c = (coefficient_parts(&cp) - coefficient_parts(&cm)) / (2.0 * h);
        let fd_a = (ap - am) / (2.0 * h);
        let dc = coefficient_parts(&dc);
        worst_fd = worst_fd
            .max((&fd_c - &dc).norm() / dc.norm().max(1e-3))
            .max((&fd_a - &da).norm() / da.norm().max(1e-3));

        // at the reference the general formulas reduce to B and -B
        let dv = dj;
        let id = DMatrix::identity(d, d);
        let (dc0, da0) = coefficient_derivatives_general(&id, &dv).map_err(|e| e.to_string())?;
        let b = DMatrix::identity(d, d) * dv.trace() - (&dv + dv.transpose());
        let md = ModeDerivative::from_mode_jacobian(&dv);
        worst_id = worst_id.max((&da0 - &b).amax()).max((&md.mass - &b).amax());
        match (&dc0, &md.curl) {
            (CurlCoefficient::Scalar(g), CurlCoefficient::Scalar(m)) => {
                worst_id = worst_id.max((g + dv.trace()).abs()).max((m - g).abs());
            }
            (CurlCoefficient::Tensor(g), CurlCoefficient::Tensor(m)) => {
                worst_id = worst_id.max((g + &da0).amax()).max((m + &b).amax());
            }
            _ => return Err("curl coefficient kind differs between paths".into()),
        }
    }
    ensure!(worst_fd <= 1e-5, "finite-difference mismatch {worst_fd:e}");
    ensure!(worst_id <= 1e-12, "reference identity defect {worst_id:e}");
    within_time(
        start,
        Duration::from_secs(5),
        format!("FD mismatch {worst_fd:.1e}, identity defect {worst_id:.1e}"),
    )
}

fn eigenpair_derivative_checks() -> Outcome {
    let start = Instant::now();
    let d = square(16, width_scaling());
    let p = d.assemble_pencil().map_err(|e| e.to_string())?;
    let s = solve_reference(&p, 3).map_err(|e| e.to_string())?;

    let c = &s.clusters[1];
    ensure!(
        c.multiplicity() == 1,
        "2 pi^2 cluster has multiplicity {}",
        c.multiplicity()
    );
    let r = eigenpair_derivatives(&p, &s, c).map_err(|e| e.to_string())?;
    let (dl, _) = directional_derivative(&r, &[1.0]).map_err(|e| e.to_string())?;
    let h = 1e-4;
    let plus = solve_sampled(&d, &s, h, &[1.0]).map_err(|e| e.to_string())?[1].eigenvalues[0];
    let minus = solve_sampled(&d, &s, -h, &[1.0]).map_err(|e| e.to_string())?[1].eigenvalues[0];
    let fd = (plus - minus) / (2.0 * h);
    let fd_err = rel(dl[(0, 0)], fd);
    ensure!(
        fd_err <= 1e-5,
        "nondegenerate derivative {} vs FD {fd}",
        dl[(0, 0)]
    );

    let deg = eigenpair_derivatives(&p, &s, &s.clusters[0]).map_err(|e| e.to_string())?;
    let ev = sorted_eigenvalues(&deg.dlambda[0]);
    let deg_err = rel(ev[0], -2.0 * PI2).max(ev[1].abs() / (2.0 * PI2));
    ensure!(deg_err <= 1e-2, "degenerate derivative spectrum {ev:?}");

    let ortho = r
        .orthonormality_defect(&p)
        .max(deg.orthonormality_defect(&p));
    ensure!(ortho <= 1e-8, "orthonormality derivative defect {ortho:e}");
    within_time(
        start,
        Duration::from_secs(120),
        format!("FD {fd_err:.1e}, degenerate {deg_err:.1e}, orthonormality {ortho:.1e}"),
    )
}

fn convergence_orders() -> Outcome {
    let start = Instant::now();
    let d = square(16, width_scaling());
    let p = d.assemble_pencil().map_err(|e| e.to_string())?;
    let s = solve_reference(&p, 3).map_err(|e| e.to_string())?;
    let ts: Vec<f64> = (1..=5).rev().map(|k| 2f64.powi(-k)).collect();
    let o = RectangleOracle::new(1.0, 1.0, ScalingAxis::Width).map_err(|e| e.to_string())?;
    let study =
        convergence_study(&d, &p, &s, &ts, &Baseline::Analytic(o)).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    for sl in &study.slopes {
        let m = sl
            .mean
            .value()
            .ok_or_else(|| format!("mean slope {}", sl.mean))?;
        let v = sl
            .variance
            .value()
            .ok_or_else(|| format!("variance slope {}", sl.variance))?;
        let mult = s.clusters[sl.cluster_index].multiplicity();
        ensure!(
            (1.7..=2.3).contains(&m),
            "cluster {} (m={mult}) mean slope {m:.3}",
            sl.cluster_index
        );
        ensure!(
            (3.6..=4.4).contains(&v),
            "cluster {} (m={mult}) variance slope {v:.3}",
            sl.cluster_index
        );
        detail.push(format!(
            "cluster {} (m={mult}) mean {m:.3} variance {v:.3}",
            sl.cluster_index
        ));
    }
    ensure!(
        s.clusters.iter().any(|c| c.multiplicity() > 1),
        "no degenerate cluster"
    );
    ensure!(
        s.clusters.iter().any(|c| c.multiplicity() == 1),
        "no simple cluster"
    );
    within_time(start, Duration::from_secs(300), detail.join(", "))
}

fn covariance_identity() -> Outcome {
    let f = field(vec![
        ClosedForm::Bump {
            axis: 0,
            amplitude: 0.3,
        },
        ClosedForm::Shear {
            from: 1,
            to: 0,
            factor: 0.2,
        },
        ClosedForm::AxisScaling {
            axis: 1,
            factor: 0.5,
        },
    ]);
    let d = square(3, f);
    let p = d.assemble_pencil().map_err(|e| e.to_string())?;
    ensure!(p.len() <= 50, "system size {}", p.len());
    let s = solve_reference(&p, 3).map_err(|e| e.to_string())?;
    let t = 0.2;
    let mut worst: f64 = 0.0;
    for c in &s.clusters {
        let r = eigenpair_derivatives(&p, &s, c).map_err(|e| e.to_string())?;
        let u = propagate_cluster(&r, t).map_err(|e| e.to_string())?;
        let cov = eigenvector_covariance(&r, t).map_err(|e| e.to_string())?;
        let (n, m) = r.vectors.shape();
        for a in 0..n * m {
            for b in 0..n * m {
                let brute: f64 = r
                    .dvectors
                    .iter()
                    .map(|de| de[(a % n, a / n)] * de[(b % n, b / n)])
                    .sum::<f64>()
                    * t
                    * t
                    / 3.0;
                worst = worst.max((cov[(a, b)] - brute).abs());
            }
            worst = worst.max((u.vector_variance[(a % n, a / n)] - cov[(a, a)]).abs());
        }
        for i in 0..m {
            for j in 0..m {
                let brute: f64 = r
                    .dlambda
                    .iter()
                    .map(|dl| dl[(i, i)] * dl[(j, j)])
                    .sum::<f64>()
                    * t
                    * t
                    / 3.0;
                worst =
                    worst.max((u.lambda_covariance[(i, j)] - brute).abs() / brute.abs().max(1.0));
            }
        }
    }
    ensure!(worst <= 1e-13, "entrywise defect {worst:e}");
    Ok(format!("N = {}, entrywise defect {worst:.1e}", p.len()))
}

fn monte_carlo_cross_check() -> Outcome {
    let start = Instant::now();
    let t = 0.2;
    let d = square(8, width_scaling());
    let p = d.assemble_pencil().map_err(|e| e.to_string())?;
    let s = solve_reference(&p, 3).map_err(|e| e.to_string())?;
    let ci = 1;
    ensure!(
        s.clusters[ci].multiplicity() == 1,
        "tracked cluster is not simple"
    );
    let r = eigenpair_derivatives(&p, &s, &s.clusters[ci]).map_err(|e| e.to_string())?;
    let u = propagate_cluster(&r, t).map_err(|e| e.to_string())?;
    let mc = monte_carlo(&d, &s, &p.m0, t, 2000, 42).map_err(|e| e.to_string())?;
    let c = &mc.clusters[ci];
    let o = RectangleOracle::new(1.0, 1.0, ScalingAxis::Width).map_err(|e| e.to_string())?;
    let (om, ov) = (
        o.mean((1, 1), t).map_err(|e| e.to_string())?,
        o.variance((1, 1), t).map_err(|e| e.to_string())?,
    );
    let z = |a: f64, b: f64, se: f64| (a - b).abs() / se;
    let zs = [
        (
            "perturbation mean",
            z(s.clusters[ci].lambda, c.mean[0], c.mean_se[0]),
        ),
        (
            "perturbation variance",
            z(u.lambda_variance[0], c.variance[0], c.variance_se[0]),
        ),
        ("MC mean vs oracle", z(c.mean[0], om, c.mean_se[0])),
        (
            "MC variance vs oracle",
            z(c.variance[0], ov, c.variance_se[0]),
        ),
    ];
    let detail = zs
        .iter()
        .map(|(n, v)| format!("{n} {v:.2} SE"))
        .collect::<Vec<_>>()
        .join(", ");
    let bad: Vec<&str> = zs
        .iter()
        .filter(|(_, v)| !(*v <= 3.0))
        .map(|(n, _)| *n)
        .collect();
    ensure!(bad.is_empty(), "{detail}; outside 3 SE: {}", bad.join(", "));
    within_time(start, Duration::from_secs(600), detail)
}

fn run_cli(dir: &std::path::Path, threads: usize, args: &[&str]) -> Result<(), String> {
    let mut full = vec!["cavity-uq".to_string()];
    full.extend(args.iter().map(|s| s.to_string()));
    full.extend([
        "--set".into(),
        format!("threads={threads}"),
        "--out".into(),
        dir.display().to_string(),
    ]);
    match cavity_uq::cli::run(full) {
        0 => Ok(()),
        code => Err(format!("{args:?} exited with {code}")),
    }
}

fn reproducibility() -> Outcome {
    let runs: [&[&str]; 3] = [
        &[
            "uq",
            "--set",
            "deformation=bump",
            "--set",
            "t=0.05,0.1",
            "--set",
            "spans=6",
            "--set",
            "grid=7",
        ],
        &[
            "mc",
            "--set",
            "deformation=bump",
            "--set",
            "t=0.1",
            "--set",
            "spans=4",
            "--set",
            "mc_samples=200",
            "--set",
            "seed=9",
        ],
        &[
            "converge",
            "--set",
            "deformation=shear",
            "--set",
            "t=0.05,0.1,0.2,0.4",
            "--set",
            "spans=3",
            "--set",
            "clusters=2",
            "--set",
            "mc_samples=100",
        ],
    ];
    let mut compared = 0;
    for args in runs {
        let one = tempfile::tempdir().map_err(|e| e.to_string())?;
        let eight = tempfile::tempdir().map_err(|e| e.to_string())?;
        run_cli(one.path(), 1, args)?;
        run_cli(eight.path(), 8, args)?;
        let mut names: Vec<_> = std::fs::read_dir(one.path())
            .map_err(|e| e.to_string())?
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        ensure!(!names.is_empty(), "{} wrote no files", args[0]);
        for name in names {
            let a = std::fs::read(one.path().join(&name)).map_err(|e| e.to_string())?;
            let b = std::fs::read(eight.path().join(&name)).map_err(|e| e.to_string())?;
            ensure!(
                a == b,
                "{} differs between 1 and 8 threads",
                name.to_string_lossy()
            );
            compared += 1;
        }
    }
    Ok(format!("{compared} CSV files byte-identical"))
}

fn structural_invariants() -> Outcome {
    let mut checks = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (p, spans) in [(1, 3), (2, 8), (3, 5), (4, 2)] {
        let k = KnotVector::uniform(p, spans).map_err(|e| e.to_string())?;
        for _ in 0..500 {
            let x: f64 = rng.gen();
            let e = k.eval_basis(x, 0).map_err(|e| e.to_string())?;
            let sum: f64 = e.values().iter().sum();
            ensure!(
                (sum - 1.0).abs() <= 1e-12,
                "partition of unity off by {:e}",
                sum - 1.0
            );
            ensure!(e.values().iter().all(|&v| v >= 0.0), "negative basis value");
            checks += 1;
        }
    }
    let f = field(vec![
        ClosedForm::Bump {
            axis: 0,
            amplitude: 0.3,
        },
        ClosedForm::Monomial {
            axis: 1,
            factor: 0.5,
            exponents: vec![1, 2],
        },
    ]);
    for (degree, spans) in [(1, 4), (2, 5), (3, 4)] {
        let d = rectangle(1.0, 0.7, degree, spans, f.clone());
        let p: EigenPencil = d.assemble_pencil().map_err(|e| e.to_string())?;
        ensure!(
            p.max_asymmetry() <= 1e-12,
            "asymmetry {:e}",
            p.max_asymmetry()
        );
        let kev = sorted_eigenvalues(&p.k0);
        ensure!(
            kev[0] >= -1e-10 * kev[kev.len() - 1],
            "K0 not PSD: {}",
            kev[0]
        );
        ensure!(
            p.m0.clone().cholesky().is_some(),
            "M0 not positive definite"
        );
        let g = d.space().discrete_gradient();
        let kernel = d.space().gradient_kernel_dim();
        ensure!(
            g.ncols() == kernel && g.rank(1e-10) == kernel,
            "gradient matrix rank"
        );
        let kg = (&p.k0 * &g).amax() / p.k0.amax();
        ensure!(kg <= 1e-12, "K0 G = {kg:e}");
        let s = solve_reference(&p, 4).map_err(|e| e.to_string())?;
        ensure!(
            s.kernel_count == kernel,
            "kernel count {} vs {kernel}",
            s.kernel_count
        );
        let results = s
            .clusters
            .iter()
            .map(|c| eigenpair_derivatives(&p, &s, c))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let summary = propagate(&results, 0.3).map_err(|e| e.to_string())?;
        for c in &summary.clusters {
            ensure!(
                c.lambda_variance.iter().all(|&v| v >= 0.0),
                "negative eigenvalue variance"
            );
            ensure!(
                c.vector_variance.iter().all(|&v| v >= 0.0),
                "negative vector variance"
            );
            let ev = sorted_eigenvalues(&c.lambda_covariance);
            ensure!(
                ev[0] >= -1e-12 * ev[ev.len() - 1].max(1e-300),
                "covariance not PSD"
            );
        }
        for r in &results {
            let field = variance_field(&d, r, 0.3, 4).map_err(|e| e.to_string())?;
            ensure!(
                field.iter().all(|v| v.var_ex >= 0.0 && v.var_ey >= 0.0),
                "negative field variance"
            );
        }
        checks += 1;
    }
    Ok(format!("{checks} checks, 0 failures"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("analytic spectrum", analytic_spectrum),
        ("coefficient derivatives", coefficient_derivatives),
        ("eigenpair derivatives", eigenpair_derivative_checks),
        ("convergence orders", convergence_orders),
        ("covariance identity", covariance_identity),
        ("Monte Carlo cross-check", monte_carlo_cross_check),
        ("reproducibility", reproducibility),
        ("structural invariants", structural_invariants),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {detail}", i + 1)
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
