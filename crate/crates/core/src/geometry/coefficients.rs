use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Determinants at or below this value are treated as singular.
pub const SINGULAR_DET: f64 = 1e-12;

/// Coefficient of the curl-curl term. In the plane the curl is a scalar and so is
/// its coefficient.
#[derive(Debug, Clone, PartialEq)]
pub enum CurlCoefficient {
    Scalar(f64),
    Tensor(DMatrix<f64>),
}

impl CurlCoefficient {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            CurlCoefficient::Scalar(s) => Some(*s),
            CurlCoefficient::Tensor(_) => None,
        }
    }

    pub fn tensor(&self) -> Option<&DMatrix<f64>> {
        match self {
            CurlCoefficient::Tensor(m) => Some(m),
            CurlCoefficient::Scalar(_) => None,
        }
    }
}

/// Pointwise deformation coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSample {
    pub point: Vec<f64>,
    pub curl: CurlCoefficient,
    pub mass: DMatrix<f64>,
    pub mode_derivatives: Vec<ModeDerivative>,
}

/// `[D_t C]_i` and `[D_t A]_i` for one deformation mode at the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeDerivative {
    pub curl: CurlCoefficient,
    pub mass: DMatrix<f64>,
}

impl ModeDerivative {
    /// From the spatial mode Jacobian `dV_i`:
    /// `B = tr(dV) I - dV - dV^T`, `D_t A = B`, `D_t C = -B` (scalar `-tr dV` in 2D).
    pub fn from_mode_jacobian(dv: &DMatrix<f64>) -> Self {
        let d = dv.nrows();
        let tr = dv.trace();
        let b = DMatrix::identity(d, d) * tr - (dv + dv.transpose());
        let curl = if d == 2 {
            CurlCoefficient::Scalar(-tr)
        } else {
            CurlCoefficient::Tensor(-&b)
        };
        ModeDerivative { curl, mass: b }
    }
}

fn det_checked(j: &DMatrix<f64>) -> Result<f64> {
    if !j.is_square() || !(2..=3).contains(&j.nrows()) {
        return Err(Error::Dimension(format!(
            "Jacobian must be 2x2 or 3x3, got {}x{}",
            j.nrows(),
            j.ncols()
        )));
    }
    let det = j.determinant();
    if det <= SINGULAR_DET || !det.is_finite() {
        return Err(Error::NotInvertible {
            point: Vec::new(),
            det,
        });
    }
    Ok(det)
}

fn inverse(j: &DMatrix<f64>, det: f64) -> Result<DMatrix<f64>> {
    j.clone().try_inverse().ok_or(Error::NotInvertible {
        point: Vec::new(),
        det,
    })
}

/// `C = J^T J / det J` (scalar `1 / det J` in 2D) and `A = det J  J^{-1} J^{-T}`.
pub fn pullback_coefficients(j: &DMatrix<f64>) -> Result<(CurlCoefficient, DMatrix<f64>)> {
    let det = det_checked(j)?;
    let jinv = inverse(j, det)?;
    let mass = symmetrize(&jinv * jinv.transpose() * det);
    let curl = if j.nrows() == 2 {
        CurlCoefficient::Scalar(1.0 / det)
    } else {
        CurlCoefficient::Tensor(symmetrize(j.transpose() * j / det))
    };
    Ok((curl, mass))
}

/// Derivatives of `C_t`, `A_t` along a path with Jacobian `j` and Jacobian rate `dj`:
///
/// `C' = -tr(dj J^{-1}) C + (dj^T J + (dj^T J)^T) / det J`,
/// `A' = tr(dj J^{-1}) A - J^{-1} dj A - (J^{-1} dj A)^T`,
///
/// and in 2D `(1 / det J)' = -tr(dj J^{-1}) / det J`.
pub fn coefficient_derivatives_general(
    j: &DMatrix<f64>,
    dj: &DMatrix<f64>,
) -> Result<(CurlCoefficient, DMatrix<f64>)> {
    let det = det_checked(j)?;
    if dj.shape() != j.shape() {
        return Err(Error::Dimension("Jacobian rate shape mismatch".into()));
    }
    let jinv = inverse(j, det)?;
    let tr = (dj * &jinv).trace();
    let a = &jinv * jinv.transpose() * det;
    let jinv_dj_a = &jinv * dj * &a;
    let da = symmetrize(&a * tr - (&jinv_dj_a + jinv_dj_a.transpose()));
    let dc = if j.nrows() == 2 {
        CurlCoefficient::Scalar(-tr / det)
    } else {
        let c = j.transpose() * j / det;
        let g = dj.transpose() * j;
        CurlCoefficient::Tensor(symmetrize(-c * tr + (&g + g.transpose()) / det))
    };
    Ok((dc, da))
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn identity_jacobian() {
        let (c, a) = pullback_coefficients(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(c, CurlCoefficient::Tensor(DMatrix::identity(3, 3)));
        assert_eq!(a, DMatrix::identity(3, 3));
        let (c, a) = pullback_coefficients(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(c, CurlCoefficient::Scalar(1.0));
        assert_eq!(a, DMatrix::identity(2, 2));
    }

    #[test]
    fn axis_stretch() {
        let (c, a) = pullback_coefficients(&diag(&[1.5, 1.0, 1.0])).unwrap();
        assert_relative_eq!(
            c.tensor().unwrap().clone(),
            diag(&[1.5, 1.0 / 1.5, 1.0 / 1.5]),
            epsilon = 1e-15
        );
        assert_relative_eq!(a, diag(&[1.0 / 1.5, 1.5, 1.5]), epsilon = 1e-15);

        let (c, a) = pullback_coefficients(&diag(&[1.5, 1.0])).unwrap();
        assert_relative_eq!(c.scalar().unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(a, diag(&[2.0 / 3.0, 1.5]), epsilon = 1e-15);
    }

    #[test]
    fn singular_jacobian_is_an_error() {
        let r = pullback_coefficients(&diag(&[1.0, 0.0, 1.0]));
        assert!(matches!(r, Err(Error::NotInvertible { .. })));
        let r = coefficient_derivatives_general(&diag(&[1.0, -1.0]), &diag(&[1.0, 0.0]));
        assert!(matches!(r, Err(Error::NotInvertible { .. })));
    }

    #[test]
    fn stationary_path_has_zero_derivative() {
        let j = DMatrix::from_row_slice(3, 3, &[1.2, 0.1, 0.0, 0.0, 0.9, 0.2, 0.1, 0.0, 1.1]);
        let (dc, da) = coefficient_derivatives_general(&j, &DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(dc.tensor().unwrap().norm(), 0.0);
        assert_eq!(da.norm(), 0.0);
    }

    #[test]
    fn stretch_rate_at_identity() {
        let (dc, da) =
            coefficient_derivatives_general(&DMatrix::identity(3, 3), &diag(&[1.0, 0.0, 0.0]))
                .unwrap();
        assert_relative_eq!(dc.tensor().unwrap().clone(), diag(&[1.0, -1.0, -1.0]));
        assert_relative_eq!(da, diag(&[-1.0, 1.0, 1.0]));
    }

    #[test]
    fn mode_derivatives() {
        let m = ModeDerivative::from_mode_jacobian(&DMatrix::zeros(3, 3));
        assert_eq!(m.mass, DMatrix::zeros(3, 3));
        assert_eq!(m.curl, CurlCoefficient::Tensor(DMatrix::zeros(3, 3)));

        let m = ModeDerivative::from_mode_jacobian(&diag(&[1.0, 0.0, 0.0]));
        assert_eq!(m.curl, CurlCoefficient::Tensor(diag(&[1.0, -1.0, -1.0])));
        assert_eq!(m.mass, diag(&[-1.0, 1.0, 1.0]));

        let m = ModeDerivative::from_mode_jacobian(&DMatrix::from_row_slice(
            2,
            2,
            &[0.0, 1.0, 0.0, 0.0],
        ));
        assert_eq!(
            m.mass,
            DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0])
        );
        assert_eq!(m.curl, CurlCoefficient::Scalar(0.0));
    }

    #[test]
    fn determinant_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 200 {
            let j = DMatrix::from_fn(3, 3, |r, c| {
                (if r == c { 1.0 } else { 0.0 }) + rng.gen_range(-0.4..0.4)
            });
            let det = j.determinant();
            if !(0.5..=2.0).contains(&det) {
                continue;
            }
            let (c, a) = pullback_coefficients(&j).unwrap();
            let c = c.tensor().unwrap();
            assert_eq!(c, &c.transpose());
            assert_eq!(a, a.transpose());
            assert_relative_eq!(a.determinant(), det, max_relative = 1e-10);
            assert_relative_eq!(c.determinant(), 1.0 / det, max_relative = 1e-10);
            checked += 1;
        }
    }
}
