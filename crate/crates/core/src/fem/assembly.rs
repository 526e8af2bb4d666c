use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rayon::prelude::*;

use super::space::HCurlSpace;
use super::EigenPencil;
use crate::error::{Error, Result};
use crate::geometry::{
    pullback_coefficients, DeformationField, GeometryMap, ModeDerivative, SINGULAR_DET,
};
use crate::quadrature::gauss_legendre_on;

/// Quadrature point data shared by every assembly on the same discretization.
#[derive(Debug, Clone)]
pub struct QuadPoint {
    pub param: [f64; 2],
    pub physical: Vector2<f64>,
    /// Patch map Jacobian `dF`.
    pub jacobian: Matrix2<f64>,
    /// Quadrature weight times `det dF`.
    pub weight: f64,
    /// Spatial mode Jacobians `dV_i`.
    pub mode_jacobians: Vec<Matrix2<f64>>,
    /// `([D_t C]_i, [D_t A]_i)` at this point.
    pub mode_derivatives: Vec<(f64, Matrix2<f64>)>,
}

#[derive(Debug, Clone)]
struct SpanData {
    points: Vec<QuadPoint>,
    /// Active index of each supported function, `None` when eliminated.
    dofs: Vec<Option<usize>>,
    /// `values[q][l]`, `curls[q][l]` for point `q` and local function `l`.
    values: Vec<Vec<Vector2<f64>>>,
    curls: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Stiffness,
    Mass,
}

enum PointCoef {
    Curl(f64),
    Mass(Matrix2<f64>),
}

/// Space, patch map and deformation modes with precomputed quadrature data.
///
/// Each knot span uses `(max(p1, p2) + 1)^2` Gauss points. Spans are processed in
/// parallel, and their local matrices are added to the global matrix in a fixed
/// span order, so results do not depend on the number of worker threads.
#[derive(Debug, Clone)]
pub struct Discretization {
    space: HCurlSpace,
    map: GeometryMap,
    field: DeformationField,
    spans: Vec<SpanData>,
}

fn to_m2(m: &DMatrix<f64>) -> Matrix2<f64> {
    Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

fn to_dm(m: &Matrix2<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]])
}

impl Discretization {
    pub fn new(space: HCurlSpace, map: GeometryMap, field: DeformationField) -> Result<Self> {
        if map.dim() != 2 || field.dim() != 2 {
            return Err(Error::Dimension(
                "assembly is implemented for planar patches only".into(),
            ));
        }
        let (p1, p2) = space.degrees();
        let nq = p1.max(p2) + 1;
        let xs = space.knots()[0].spans();
        let ys = space.knots()[1].spans();
        let cells: Vec<_> = ys
            .iter()
            .flat_map(|sy| xs.iter().map(move |sx| (*sx, *sy)))
            .collect();
        let spans = cells
            .par_iter()
            .map(|(sx, sy)| {
                let (qx, wx) = gauss_legendre_on(nq, sx.start, sx.end);
                let (qy, wy) = gauss_legendre_on(nq, sy.start, sy.end);
                let mut data = SpanData {
                    points: Vec::with_capacity(nq * nq),
                    dofs: Vec::new(),
                    values: Vec::with_capacity(nq * nq),
                    curls: Vec::with_capacity(nq * nq),
                };
                for (y, wyq) in qy.iter().zip(&wy) {
                    for (x, wxq) in qx.iter().zip(&wx) {
                        let param = [*x, *y];
                        let f = map.eval(&param)?;
                        let jac = to_m2(&f.jacobian);
                        let mut basis = space.eval_reference(*x, *y)?;
                        let det = HCurlSpace::push_forward(&mut basis, &jac)?;
                        if det <= SINGULAR_DET {
                            return Err(Error::NotInvertible {
                                point: param.to_vec(),
                                det,
                            });
                        }
                        let dofs: Vec<Option<usize>> =
                            basis.iter().map(|b| space.active_index(b.raw)).collect();
                        if data.dofs.is_empty() {
                            data.dofs = dofs;
                        } else {
                            debug_assert_eq!(data.dofs, dofs);
                        }
                        let modes = field.eval_modes(&map, &f, &param)?;
                        let mode_jacobians: Vec<Matrix2<f64>> =
                            modes.iter().map(|m| to_m2(&m.jacobian)).collect();
                        let mode_derivatives = modes
                            .iter()
                            .map(|m| {
                                let d = ModeDerivative::from_mode_jacobian(&m.jacobian);
                                (d.curl.scalar().unwrap_or(f64::NAN), to_m2(&d.mass))
                            })
                            .collect();
                        data.values.push(basis.iter().map(|b| b.value).collect());
                        data.curls.push(basis.iter().map(|b| b.curl).collect());
                        data.points.push(QuadPoint {
                            param,
                            physical: Vector2::new(f.point[0], f.point[1]),
                            jacobian: jac,
                            weight: wxq * wyq * det,
                            mode_jacobians,
                            mode_derivatives,
                        });
                    }
                }
                Ok(data)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Discretization {
            space,
            map,
            field,
            spans,
        })
    }

    pub fn space(&self) -> &HCurlSpace {
        &self.space
    }

    pub fn map(&self) -> &GeometryMap {
        &self.map
    }

    pub fn field(&self) -> &DeformationField {
        &self.field
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn quad_points(&self) -> impl Iterator<Item = &QuadPoint> {
        self.spans.iter().flat_map(|s| s.points.iter())
    }

    /// Core loop: `coef` yields one coefficient per output matrix at each point.
    fn assemble_with<F>(&self, n_out: usize, coef: F) -> Result<Vec<DMatrix<f64>>>
    where
        F: Fn(&QuadPoint) -> Result<Vec<PointCoef>> + Sync,
    {
        let locals = self
            .spans
            .par_iter()
            .map(|span| {
                let nl = span.dofs.len();
                let mut local = vec![DMatrix::<f64>::zeros(nl, nl); n_out];
                for (q, pt) in span.points.iter().enumerate() {
                    let coefs = coef(pt)?;
                    let (vals, curls) = (&span.values[q], &span.curls[q]);
                    for (lm, c) in local.iter_mut().zip(&coefs) {
                        match c {
                            PointCoef::Curl(s) => {
                                for i in 0..nl {
                                    let wi = pt.weight * s * curls[i];
                                    for j in i..nl {
                                        lm[(i, j)] += wi * curls[j];
                                    }
                                }
                            }
                            PointCoef::Mass(a) => {
                                for i in 0..nl {
                                    let ai = a * vals[i] * pt.weight;
                                    for j in i..nl {
                                        lm[(i, j)] += ai.dot(&vals[j]);
                                    }
                                }
                            }
                        }
                    }
                }
                for lm in local.iter_mut() {
                    lm.fill_lower_triangle_with_upper_triangle();
                }
                Ok(local)
            })
            .collect::<Result<Vec<_>>>()?;

        let n = self.len();
        let mut global = vec![DMatrix::zeros(n, n); n_out];
        for (span, local) in self.spans.iter().zip(&locals) {
            for (li, gi) in span.dofs.iter().enumerate() {
                let Some(gi) = gi else { continue };
                for (lj, gj) in span.dofs.iter().enumerate() {
                    let Some(gj) = gj else { continue };
                    for (g, l) in global.iter_mut().zip(local) {
                        g[(*gi, *gj)] += l[(li, lj)];
                    }
                }
            }
        }
        Ok(global)
    }

    /// Galerkin matrix for a coefficient on `D_0`: a `1 x 1` curl coefficient for
    /// [`MatrixKind::Stiffness`], a `2 x 2` tensor for [`MatrixKind::Mass`].
    pub fn assemble<F>(&self, kind: MatrixKind, coefficient: F) -> Result<DMatrix<f64>>
    where
        F: Fn(&QuadPoint) -> DMatrix<f64> + Sync,
    {
        let mut out = self.assemble_with(1, |pt| {
            let c = coefficient(pt);
            let v = match (kind, c.shape()) {
                (MatrixKind::Stiffness, (1, 1)) => PointCoef::Curl(c[(0, 0)]),
                (MatrixKind::Mass, (2, 2)) => PointCoef::Mass(to_m2(&c)),
                (_, shape) => {
                    return Err(Error::Dimension(format!(
                        "coefficient of shape {shape:?} for {kind:?} assembly"
                    )))
                }
            };
            Ok(vec![v])
        })?;
        Ok(out.remove(0))
    }

    /// Reference stiffness and mass plus the per-mode derivative matrices
    /// `K([D_t C]_i)`, `M([D_t A]_i)`.
    pub fn assemble_pencil(&self) -> Result<EigenPencil> {
        let m = self.field.len();
        let mut mats = self.assemble_with(2 + 2 * m, |pt| {
            let mut v = Vec::with_capacity(2 + 2 * m);
            v.push(PointCoef::Curl(1.0));
            v.push(PointCoef::Mass(Matrix2::identity()));
            for (dc, _) in &pt.mode_derivatives {
                v.push(PointCoef::Curl(*dc));
            }
            for (_, da) in &pt.mode_derivatives {
                v.push(PointCoef::Mass(*da));
            }
            Ok(v)
        })?;
        let dm = mats.split_off(2 + m);
        let dk = mats.split_off(2);
        let m0 = mats.pop().unwrap();
        let k0 = mats.pop().unwrap();
        Ok(EigenPencil { k0, m0, dk, dm })
    }

    /// Stiffness and mass with the exact coefficients `C_t(z)`, `A_t(z)`.
    pub fn assemble_sampled(&self, t: f64, z: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if z.len() != self.field.len() {
            return Err(Error::Dimension(format!(
                "{} random parameters for {} modes",
                z.len(),
                self.field.len()
            )));
        }
        let mut mats = self.assemble_with(2, |pt| {
            let mut j = Matrix2::identity();
            for (zi, dv) in z.iter().zip(&pt.mode_jacobians) {
                j += dv * (t * zi);
            }
            let (c, a) = pullback_coefficients(&to_dm(&j)).map_err(|e| match e {
                Error::NotInvertible { det, .. } => Error::NotInvertible {
                    point: pt.param.to_vec(),
                    det,
                },
                other => other,
            })?;
            Ok(vec![
                PointCoef::Curl(c.scalar().expect("planar curl coefficient")),
                PointCoef::Mass(to_m2(&a)),
            ])
        })?;
        let m = mats.pop().unwrap();
        let k = mats.pop().unwrap();
        Ok((k, m))
    }

    /// Physical point and field value `dF^{-T} sum_k c_k w_k` at a parametric point.
    pub fn eval_field(
        &self,
        coeffs: &DVector<f64>,
        x: [f64; 2],
    ) -> Result<(Vector2<f64>, Vector2<f64>)> {
        let f = self.map.eval(&x)?;
        let jac = to_m2(&f.jacobian);
        let mut basis = self.space.eval_reference(x[0], x[1])?;
        HCurlSpace::push_forward(&mut basis, &jac)?;
        let mut v = Vector2::zeros();
        for b in &basis {
            if let Some(a) = self.space.active_index(b.raw) {
                v += b.value * coeffs[a];
            }
        }
        Ok((Vector2::new(f.point[0], f.point[1]), v))
    }
}
