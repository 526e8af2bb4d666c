mod common;

use std::f64::consts::PI;

use cavity_uq::eigen::{residual_norm, solve_reference, solve_reference_clusters, solve_sampled};
use cavity_uq::fem::{Discretization, HCurlSpace};
use cavity_uq::geometry::{ClosedForm, DeformationField, GeometryMap};
use cavity_uq::Error;
use common::*;
use nalgebra::{DMatrix, DVector};

const PI2: f64 = PI * PI;

#[test]
fn unit_square_low_spectrum() {
    let d = square(8, width_scaling());
    let p = d.assemble_pencil().unwrap();
    let s = solve_reference(&p, 3).unwrap();
    assert_eq!(s.clusters.len(), 2);
    assert_eq!(s.clusters[0].multiplicity(), 2);
    assert_eq!(s.clusters[1].multiplicity(), 1);
    assert!(rel(s.clusters[0].lambda, PI2) < 1e-3);
    assert!(rel(s.clusters[1].lambda, 2.0 * PI2) < 1e-3);
    assert_eq!(s.kernel_count, d.space().gradient_kernel_dim());
    // interior scalar splines: (p + n - 2)^2
    assert_eq!(s.kernel_count, 8 * 8);
}

#[test]
fn returned_pairs_satisfy_the_invariants() {
    let d = square(6, width_scaling());
    let p = d.assemble_pencil().unwrap();
    let s = solve_reference_clusters(&p, 6).unwrap();
    let k_norm = p.k0.norm();
    let tau0 = 1e-8 * s.lambda_max;
    for c in &s.clusters {
        assert!(residual_norm(&p.k0, &p.m0, c) <= 1e-8 * k_norm);
        assert!(c.eigenvalues.iter().all(|&l| l > tau0));
        let g = c.vectors.transpose() * &p.m0 * &c.vectors;
        assert!((g - DMatrix::identity(c.multiplicity(), c.multiplicity())).amax() < 1e-10);
        for col in c.vectors.column_iter() {
            assert!(col[col.iamax()] > 0.0);
        }
    }
    let e = s.returned_vectors();
    let g = e.transpose() * &p.m0 * &e;
    assert!((g - DMatrix::identity(e.ncols(), e.ncols())).amax() < 1e-8);
    let vals = s.returned_eigenvalues();
    assert!(vals.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn rectangle_spectrum() {
    let d = rectangle(1.0, 0.8, 2, 10, DeformationField::empty(2));
    let p = d.assemble_pencil().unwrap();
    let s = solve_reference_clusters(&p, 2).unwrap();
    assert_eq!(s.clusters[0].multiplicity(), 1);
    assert_eq!(s.clusters[1].multiplicity(), 1);
    assert!(rel(s.clusters[0].lambda, PI2) < 1e-3);
    assert!(rel(s.clusters[1].lambda, PI2 / 0.64) < 1e-3);
    assert!((PI2 / 0.64 - 15.4213).abs() < 1e-4);
}

#[test]
fn sampled_solve_reduces_to_reference_at_zero_amplitude() {
    let d = square(6, width_scaling());
    let p = d.assemble_pencil().unwrap();
    let s = solve_reference(&p, 6).unwrap();
    let sampled = solve_sampled(&d, &s, 0.0, &[0.7]).unwrap();
    assert_eq!(sampled, s.clusters);
}

#[test]
fn sampled_scaling_splits_the_first_cluster() {
    let d = square(12, width_scaling());
    let p = d.assemble_pencil().unwrap();
    let s = solve_reference(&p, 2).unwrap();
    let c = &solve_sampled(&d, &s, 0.1, &[1.0]).unwrap()[0];
    assert!(rel(c.eigenvalues[0], PI2 / 1.21) < 1e-4);
    assert!(rel(c.eigenvalues[1], PI2) < 1e-4);
    assert!((PI2 / 1.21 - 8.1567).abs() < 1e-4);
}

#[test]
fn deformation_and_reparameterization_agree() {
    // stretching the unit square by V = (x, 0) at t = 0.3 equals solving on a
    // 1.3 x 1 rectangle map directly
    let t = 0.3;
    let space = HCurlSpace::uniform((2, 2), (5, 5)).unwrap();
    let deformed = Discretization::new(
        space.clone(),
        GeometryMap::identity(2).unwrap(),
        width_scaling(),
    )
    .unwrap();
    let p = deformed.assemble_pencil().unwrap();
    let s = solve_reference(&p, 6).unwrap();
    let sampled = solve_sampled(&deformed, &s, t, &[1.0]).unwrap();
    let direct = Discretization::new(
        space,
        GeometryMap::affine(
            &DVector::zeros(2),
            &DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 + t, 1.0])),
        )
        .unwrap(),
        DeformationField::empty(2),
    )
    .unwrap();
    let pd = direct.assemble_pencil().unwrap();
    let sd = solve_reference(&pd, 6).unwrap();
    let a: Vec<f64> = sampled.iter().flat_map(|c| c.eigenvalues.clone()).collect();
    let b = sd.returned_eigenvalues();
    let mut a_sorted = a.clone();
    a_sorted.sort_by(f64::total_cmp);
    for (x, y) in a_sorted.iter().zip(&b) {
        assert!(rel(*x, *y) < 1e-8, "{x} vs {y}");
    }
}

#[test]
fn tracking_rejects_eigenvalues_outside_the_window() {
    // reference spectrum of a 0.2 x 1 box, sampled problem on the unit square
    let narrow = rectangle(0.2, 1.0, 2, 4, width_scaling());
    let s = solve_reference(&narrow.assemble_pencil().unwrap(), 2).unwrap();
    let d = square(4, width_scaling());
    let r = solve_sampled(&d, &s, 0.01, &[1.0]);
    assert!(matches!(r, Err(Error::Tracking(_))), "{r:?}");
}

#[test]
fn folded_samples_are_reported() {
    let d = square(
        4,
        field(vec![ClosedForm::Bump {
            axis: 0,
            amplitude: 1.0,
        }]),
    );
    let s = solve_reference(&d.assemble_pencil().unwrap(), 2).unwrap();
    let r = solve_sampled(&d, &s, 0.5, &[-1.0]);
    assert!(matches!(r, Err(Error::NotInvertible { .. })), "{r:?}");
}

#[test]
fn mass_must_be_positive_definite() {
    let d = square(3, DeformationField::empty(2));
    let mut p = d.assemble_pencil().unwrap();
    p.m0 = -p.m0;
    assert_eq!(solve_reference(&p, 2), Err(Error::MassNotPositiveDefinite));
    assert_eq!(
        Error::MassNotPositiveDefinite.to_string(),
        "mass matrix not positive definite"
    );
}

#[test]
fn bump_deformation_keeps_spectrum_trackable() {
    let f = field(vec![ClosedForm::Bump {
        axis: 1,
        amplitude: 0.5,
    }]);
    let d = square(6, f);
    let p = d.assemble_pencil().unwrap();
    let s = solve_reference(&p, 4).unwrap();
    let sampled = solve_sampled(&d, &s, 0.05, &[0.8]).unwrap();
    assert_eq!(sampled.len(), s.clusters.len());
}
