use nalgebra::{DMatrix, DVector};

use super::{GeometryMap, MapEval};
use crate::bspline::TensorBasis;
use crate::error::{Error, Result};

/// Registered closed-form deformation modes, evaluated at physical points of `D_0`.
#[derive(Debug, Clone, PartialEq)]
pub enum ClosedForm {
    /// `V = factor * y_axis * e_axis`.
    AxisScaling { axis: usize, factor: f64 },
    /// `V = factor * y_from * e_to`.
    Shear { from: usize, to: usize, factor: f64 },
    /// `V = amplitude * prod_k 4 y_k (1 - y_k) * e_axis`, unit height at the cube centre.
    Bump { axis: usize, amplitude: f64 },
    /// `V = factor * prod_k y_k^exponents[k] * e_axis`.
    Monomial {
        axis: usize,
        factor: f64,
        exponents: Vec<u32>,
    },
}

impl ClosedForm {
    fn validate(&self, d: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self {
            ClosedForm::AxisScaling { axis, .. } | ClosedForm::Bump { axis, .. } if *axis >= d => {
                bad(format!("axis {axis} out of range for d = {d}"))
            }
            ClosedForm::Shear { from, to, .. } if *from >= d || *to >= d || from == to => {
                bad(format!("invalid shear axes {from} -> {to} for d = {d}"))
            }
            ClosedForm::Monomial {
                axis, exponents, ..
            } if *axis >= d || exponents.len() != d => bad(format!(
                "monomial needs an axis below {d} and {d} exponents"
            )),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, y: &DVector<f64>) -> ModeEval {
        let d = y.len();
        let mut value = DVector::zeros(d);
        let mut jacobian = DMatrix::zeros(d, d);
        match self {
            ClosedForm::AxisScaling { axis, factor } => {
                value[*axis] = factor * y[*axis];
                jacobian[(*axis, *axis)] = *factor;
            }
            ClosedForm::Shear { from, to, factor } => {
                value[*to] = factor * y[*from];
                jacobian[(*to, *from)] = *factor;
            }
            ClosedForm::Bump { axis, amplitude } => {
                let f: Vec<f64> = y.iter().map(|&v| 4.0 * v * (1.0 - v)).collect();
                value[*axis] = amplitude * f.iter().product::<f64>();
                for k in 0..d {
                    let rest: f64 = (0..d).filter(|&l| l != k).map(|l| f[l]).product();
                    jacobian[(*axis, k)] = amplitude * 4.0 * (1.0 - 2.0 * y[k]) * rest;
                }
            }
            ClosedForm::Monomial {
                axis,
                factor,
                exponents,
            } => {
                let pw = |k: usize, e: u32| if e == 0 { 1.0 } else { y[k].powi(e as i32) };
                value[*axis] = factor * (0..d).map(|k| pw(k, exponents[k])).product::<f64>();
                for k in 0..d {
                    if exponents[k] == 0 {
                        continue;
                    }
                    let rest: f64 = (0..d)
                        .map(|l| {
                            if l == k {
                                exponents[k] as f64 * pw(k, exponents[k] - 1)
                            } else {
                                pw(l, exponents[l])
                            }
                        })
                        .product();
                    jacobian[(*axis, k)] = factor * rest;
                }
            }
        }
        ModeEval { value, jacobian }
    }
}

/// Vector-valued spline over the parametric patch.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineField {
    basis: TensorBasis,
    coefficients: Vec<DVector<f64>>,
}

impl SplineField {
    pub fn new(basis: TensorBasis, coefficients: Vec<DVector<f64>>) -> Result<Self> {
        let d = basis.dim();
        if coefficients.len() != basis.len() || coefficients.iter().any(|c| c.len() != d) {
            return Err(Error::Dimension(format!(
                "spline field needs {} coefficient vectors of length {d}",
                basis.len()
            )));
        }
        Ok(SplineField {
            basis,
            coefficients,
        })
    }

    /// Interpolates `f` at the tensor Greville points of `basis`.
    pub fn interpolate(basis: TensorBasis, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let d = basis.dim();
        let n = basis.len();
        let greville: Vec<Vec<f64>> = basis
            .directions()
            .iter()
            .map(|k| k.greville_points())
            .collect();
        let sites: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let m = basis.multi_index(i);
                (0..d).map(|k| greville[k][m[k]]).collect()
            })
            .collect();
        let mut colloc = DMatrix::zeros(n, n);
        for (row, x) in sites.iter().enumerate() {
            for e in basis.eval(x)? {
                colloc[(row, e.index)] = e.value;
            }
        }
        let rhs = DMatrix::from_fn(n, d, |r, c| f(&sites[r])[c]);
        let sol = colloc
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidArgument("singular collocation matrix".into()))?;
        let coefficients = (0..n)
            .map(|i| DVector::from_iterator(d, sol.row(i).iter().copied()))
            .collect();
        Self::new(basis, coefficients)
    }

    pub fn basis(&self) -> &TensorBasis {
        &self.basis
    }

    pub fn coefficients(&self) -> &[DVector<f64>] {
        &self.coefficients
    }

    /// Value and parametric Jacobian at `x`.
    pub fn eval_parametric(&self, x: &[f64]) -> Result<ModeEval> {
        let d = self.basis.dim();
        let mut value = DVector::zeros(d);
        let mut jacobian = DMatrix::zeros(d, d);
        for e in self.basis.eval(x)? {
            let c = &self.coefficients[e.index];
            value.axpy(e.value, c, 1.0);
            for k in 0..d {
                for r in 0..d {
                    jacobian[(r, k)] += c[r] * e.gradient[k];
                }
            }
        }
        Ok(ModeEval { value, jacobian })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeformationMode {
    ClosedForm(ClosedForm),
    Spline(SplineField),
}

/// Mode value and spatial Jacobian `dV_i` (with respect to points of `D_0`).
#[derive(Debug, Clone, PartialEq)]
pub struct ModeEval {
    pub value: DVector<f64>,
    pub jacobian: DMatrix<f64>,
}

/// Karhunen-Loeve type field `V(x; z) = sum_i z_i V_i(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField {
    dim: usize,
    modes: Vec<DeformationMode>,
}

impl DeformationField {
    pub fn new(dim: usize, modes: Vec<DeformationMode>) -> Result<Self> {
        for m in &modes {
            match m {
                DeformationMode::ClosedForm(c) => c.validate(dim)?,
                DeformationMode::Spline(s) if s.basis().dim() != dim => {
                    return Err(Error::Dimension("spline mode dimension mismatch".into()))
                }
                DeformationMode::Spline(_) => {}
            }
        }
        Ok(DeformationField { dim, modes })
    }

    /// A field with no modes.
    pub fn empty(dim: usize) -> Self {
        DeformationField {
            dim,
            modes: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes(&self) -> &[DeformationMode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Evaluates every mode at the parametric point `x` whose image under the patch
    /// map is `base`. Spline modes are composed with `F^{-1}`, so their spatial
    /// Jacobian is `dV_hat dF^{-1}`.
    pub fn eval_modes(
        &self,
        map: &GeometryMap,
        base: &MapEval,
        x: &[f64],
    ) -> Result<Vec<ModeEval>> {
        if map.dim() != self.dim {
            return Err(Error::Dimension(format!(
                "field of dimension {} on a {}-dimensional map",
                self.dim,
                map.dim()
            )));
        }
        let mut jinv = None;
        self.modes
            .iter()
            .map(|m| match m {
                DeformationMode::ClosedForm(c) => Ok(c.eval(&base.point)),
                DeformationMode::Spline(s) => {
                    let par = s.eval_parametric(x)?;
                    if jinv.is_none() {
                        jinv = Some(base.jacobian.clone().try_inverse().ok_or_else(|| {
                            Error::NotInvertible {
                                point: x.to_vec(),
                                det: base.jacobian.determinant(),
                            }
                        })?);
                    }
                    let jacobian = par.jacobian * jinv.as_ref().unwrap();
                    Ok(ModeEval {
                        value: par.value,
                        jacobian,
                    })
                }
            })
            .collect()
    }
}
