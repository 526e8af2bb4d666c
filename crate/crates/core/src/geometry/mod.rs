//! Patch maps, deformation fields and the pullback coefficients of the curl-curl
//! problem on a deformed domain.
//!
//! A realization of the deformed domain is `G_t(x; z) = x + t * sum_i z_i V_i(x)`
//! applied to the reference domain `D_0 = F(unit cube)`. All coefficients live on
//! `D_0`; assembly then pulls them back once more through the patch map `F`.

mod coefficients;
mod deformation;
mod format;

pub use coefficients::{
    coefficient_derivatives_general, pullback_coefficients, CoefficientSample, CurlCoefficient,
    ModeDerivative, SINGULAR_DET,
};
pub use deformation::{ClosedForm, DeformationField, DeformationMode, ModeEval, SplineField};
pub use format::{parse_deformation_file, parse_patch_file, write_deformation_file};

use nalgebra::{DMatrix, DVector};

use crate::bspline::{KnotVector, TensorBasis};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// Spline (optionally rational) map from the parametric unit cube onto `D_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryMap {
    basis: TensorBasis,
    control_points: Vec<DVector<f64>>,
    weights: Option<Vec<f64>>,
}

/// Image point and Jacobian of a map at one parametric point.
#[derive(Debug, Clone, PartialEq)]
pub struct MapEval {
    pub point: DVector<f64>,
    pub jacobian: DMatrix<f64>,
}

impl GeometryMap {
    pub fn new(
        basis: TensorBasis,
        control_points: Vec<DVector<f64>>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let d = basis.dim();
        if d < 2 {
            return Err(Error::Dimension("geometry maps need d in {2, 3}".into()));
        }
        if control_points.len() != basis.len() {
            return Err(Error::Dimension(format!(
                "{} control points for {} basis functions",
                control_points.len(),
                basis.len()
            )));
        }
        if let Some(bad) = control_points.iter().find(|c| c.len() != d) {
            return Err(Error::Dimension(format!(
                "control point of length {} in a {d}-dimensional map",
                bad.len()
            )));
        }
        if let Some(w) = &weights {
            if w.len() != basis.len() || w.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::InvalidArgument(
                    "weights must be positive, one per control point".into(),
                ));
            }
        }
        let map = GeometryMap {
            basis,
            control_points,
            weights,
        };
        map.check_invertible()?;
        Ok(map)
    }

    /// Axis-aligned box `[0, extents[0]] x ... ` as a multilinear patch.
    pub fn axis_box(extents: &[f64]) -> Result<Self> {
        let d = extents.len();
        let kv = KnotVector::uniform(1, 1)?;
        let basis = TensorBasis::new(vec![kv; d])?;
        let control_points = (0..basis.len())
            .map(|i| {
                let m = basis.multi_index(i);
                DVector::from_iterator(d, (0..d).map(|k| m[k] as f64 * extents[k]))
            })
            .collect();
        Self::new(basis, control_points, None)
    }

    pub fn identity(d: usize) -> Result<Self> {
        Self::axis_box(&vec![1.0; d])
    }

    pub fn rectangle(width: f64, height: f64) -> Result<Self> {
        Self::axis_box(&[width, height])
    }

    /// Affine image `x -> origin + matrix * x` of the unit cube.
    pub fn affine(origin: &DVector<f64>, matrix: &DMatrix<f64>) -> Result<Self> {
        let d = origin.len();
        let kv = KnotVector::uniform(1, 1)?;
        let basis = TensorBasis::new(vec![kv; d])?;
        let control_points = (0..basis.len())
            .map(|i| {
                let m = basis.multi_index(i);
                let x = DVector::from_iterator(d, m.iter().map(|&v| v as f64));
                origin + matrix * x
            })
            .collect();
        Self::new(basis, control_points, None)
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &TensorBasis {
        &self.basis
    }

    pub fn control_points(&self) -> &[DVector<f64>] {
        &self.control_points
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// `F(x)` and `dF(x)`; rational when weights are present.
    pub fn eval(&self, x: &[f64]) -> Result<MapEval> {
        let d = self.dim();
        let evals = self.basis.eval(x)?;
        let mut num = DVector::zeros(d);
        let mut dnum = DMatrix::zeros(d, d);
        let mut w_sum = 0.0;
        let mut dw = vec![0.0; d];
        for e in &evals {
            let w = self.weights.as_ref().map_or(1.0, |w| w[e.index]);
            let cp = &self.control_points[e.index];
            num.axpy(w * e.value, cp, 1.0);
            w_sum += w * e.value;
            for k in 0..d {
                let g = w * e.gradient[k];
                dw[k] += g;
                for r in 0..d {
                    dnum[(r, k)] += g * cp[r];
                }
            }
        }
        let point = num / w_sum;
        let mut jacobian = dnum;
        for k in 0..d {
            for r in 0..d {
                jacobian[(r, k)] = (jacobian[(r, k)] - point[r] * dw[k]) / w_sum;
            }
        }
        Ok(MapEval { point, jacobian })
    }

    fn check_invertible(&self) -> Result<()> {
        let d = self.dim();
        let max_p = self
            .basis
            .directions()
            .iter()
            .map(KnotVector::degree)
            .max()
            .unwrap_or(1);
        let (gp, _) = gauss_legendre(max_p + 1);
        let spans: Vec<_> = self.basis.directions().iter().map(|k| k.spans()).collect();
        let n_span: usize = spans.iter().map(Vec::len).product();
        let n_pts = gp.len().pow(d as u32);
        for s in 0..n_span {
            let mut rem = s;
            let span_idx: Vec<usize> = spans
                .iter()
                .map(|sp| {
                    let i = rem % sp.len();
                    rem /= sp.len();
                    i
                })
                .collect();
            for q in 0..n_pts {
                let mut rq = q;
                let x: Vec<f64> = (0..d)
                    .map(|k| {
                        let sp = spans[k][span_idx[k]];
                        let g = gp[rq % gp.len()];
                        rq /= gp.len();
                        0.5 * (sp.start + sp.end) + 0.5 * (sp.end - sp.start) * g
                    })
                    .collect();
                let j = self.eval(&x)?.jacobian;
                let det = j.determinant();
                if det <= SINGULAR_DET {
                    return Err(Error::NotInvertible { point: x, det });
                }
            }
        }
        Ok(())
    }
}

/// Point and Jacobian of the deformed map `x_hat -> F(x_hat) + t V(F(x_hat); z)`.
///
/// The Jacobian is taken with respect to the parametric coordinate, i.e.
/// `(I + t sum_i z_i dV_i) dF`; at `t = 0` it equals `dF`.
pub fn eval_map(
    map: &GeometryMap,
    field: &DeformationField,
    t: f64,
    z: &[f64],
    x: &[f64],
) -> Result<MapEval> {
    check_z(field, z)?;
    let base = map.eval(x)?;
    let modes = field.eval_modes(map, &base, x)?;
    let d = map.dim();
    let mut point = base.point.clone();
    let mut spatial = DMatrix::identity(d, d);
    for (zi, m) in z.iter().zip(&modes) {
        point.axpy(t * zi, &m.value, 1.0);
        spatial += &m.jacobian * (t * zi);
    }
    let jacobian = spatial * &base.jacobian;
    let det = jacobian.determinant();
    if det <= SINGULAR_DET {
        return Err(Error::NotInvertible {
            point: x.to_vec(),
            det,
        });
    }
    Ok(MapEval { point, jacobian })
}

/// Spatial Jacobian `I + t sum_i z_i dV_i` of the deformation on `D_0`.
pub fn deformation_jacobian(modes: &[ModeEval], t: f64, z: &[f64], d: usize) -> DMatrix<f64> {
    let mut j = DMatrix::identity(d, d);
    for (zi, m) in z.iter().zip(modes) {
        j += &m.jacobian * (t * zi);
    }
    j
}

/// `C_t`, `A_t` at the parametric point `x` for the realization `(t, z)`.
pub fn coefficients_at(
    map: &GeometryMap,
    field: &DeformationField,
    t: f64,
    z: &[f64],
    x: &[f64],
) -> Result<CoefficientSample> {
    check_z(field, z)?;
    let base = map.eval(x)?;
    let modes = field.eval_modes(map, &base, x)?;
    let j = deformation_jacobian(&modes, t, z, map.dim());
    let (curl, mass) = pullback_coefficients(&j).map_err(|e| with_point(e, x))?;
    Ok(CoefficientSample {
        point: x.to_vec(),
        curl,
        mass,
        mode_derivatives: Vec::new(),
    })
}

/// Per-mode `([D_t C]_i, [D_t A]_i)` at the reference configuration.
pub fn reference_mode_coefficients(
    map: &GeometryMap,
    field: &DeformationField,
    x: &[f64],
) -> Result<Vec<ModeDerivative>> {
    let base = map.eval(x)?;
    let modes = field.eval_modes(map, &base, x)?;
    Ok(modes
        .iter()
        .map(|m| ModeDerivative::from_mode_jacobian(&m.jacobian))
        .collect())
}

fn check_z(field: &DeformationField, z: &[f64]) -> Result<()> {
    if z.len() != field.len() {
        return Err(Error::Dimension(format!(
            "{} random parameters for {} modes",
            z.len(),
            field.len()
        )));
    }
    Ok(())
}

fn with_point(e: Error, x: &[f64]) -> Error {
    match e {
        Error::NotInvertible { det, .. } => Error::NotInvertible {
            point: x.to_vec(),
            det,
        },
        other => other,
    }
}
