use nalgebra::{DMatrix, Matrix2, Vector2};

use crate::bspline::KnotVector;
use crate::error::{Error, Result};

/// One component of the edge-element space: a tensor spline space on the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpace {
    pub x: KnotVector,
    pub y: KnotVector,
}

impl ComponentSpace {
    pub fn len(&self) -> usize {
        self.x.len() * self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix + self.x.len() * iy
    }
}

/// Curl-conforming tensor spline space on the unit square with vanishing tangential
/// trace on the boundary.
///
/// Component 1 lives in `S^{p1-1}(X1') x S^{p2}(X2)`, component 2 in
/// `S^{p1}(X1) x S^{p2-1}(X2')`, where `X'` drops the first and last knot. Raw indices
/// number component 1 first; active indices skip the eliminated boundary functions.
#[derive(Debug, Clone, PartialEq)]
pub struct HCurlSpace {
    knots: [KnotVector; 2],
    comps: [ComponentSpace; 2],
    active: Vec<Option<usize>>,
    raw_of_active: Vec<usize>,
}

/// A supported edge basis function at a parametric point, before the patch pullback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefBasisValue {
    pub raw: usize,
    pub value: Vector2<f64>,
    pub curl: f64,
}

impl HCurlSpace {
    pub fn new(x: KnotVector, y: KnotVector) -> Result<Self> {
        if x.degree() == 0 || y.degree() == 0 {
            return Err(Error::Discretization(
                "edge-element space needs degrees >= 1 in both directions".into(),
            ));
        }
        let comps = [
            ComponentSpace {
                x: x.truncate_knots()?,
                y: y.clone(),
            },
            ComponentSpace {
                x: x.clone(),
                y: y.truncate_knots()?,
            },
        ];
        let n1 = comps[0].len();
        let mut active = Vec::with_capacity(n1 + comps[1].len());
        let mut raw_of_active = Vec::new();
        for (c, comp) in comps.iter().enumerate() {
            for iy in 0..comp.y.len() {
                for ix in 0..comp.x.len() {
                    // tangential trace: x-component on y = const edges and vice versa
                    let boundary = match c {
                        0 => iy == 0 || iy + 1 == comp.y.len(),
                        _ => ix == 0 || ix + 1 == comp.x.len(),
                    };
                    let raw = c * n1 + comp.index(ix, iy);
                    debug_assert_eq!(raw, active.len());
                    if boundary {
                        active.push(None);
                    } else {
                        active.push(Some(raw_of_active.len()));
                        raw_of_active.push(raw);
                    }
                }
            }
        }
        Ok(HCurlSpace {
            knots: [x, y],
            comps,
            active,
            raw_of_active,
        })
    }

    /// Uniform knots with `spans` spans per direction.
    pub fn uniform(degrees: (usize, usize), spans: (usize, usize)) -> Result<Self> {
        Self::new(
            KnotVector::uniform(degrees.0, spans.0)?,
            KnotVector::uniform(degrees.1, spans.1)?,
        )
    }

    /// Bisects every span in both directions.
    pub fn refine(&self) -> Result<Self> {
        Self::new(self.knots[0].refine(), self.knots[1].refine())
    }

    pub fn knots(&self) -> &[KnotVector; 2] {
        &self.knots
    }

    pub fn degrees(&self) -> (usize, usize) {
        (self.knots[0].degree(), self.knots[1].degree())
    }

    pub fn component(&self, c: usize) -> &ComponentSpace {
        &self.comps[c]
    }

    pub fn raw_len(&self) -> usize {
        self.active.len()
    }

    /// Number of active degrees of freedom.
    pub fn len(&self) -> usize {
        self.raw_of_active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw_of_active.is_empty()
    }

    pub fn active_index(&self, raw: usize) -> Option<usize> {
        self.active[raw]
    }

    pub fn raw_index(&self, active: usize) -> usize {
        self.raw_of_active[active]
    }

    /// Dimension of the scalar spline space with zero boundary trace. Its gradients
    /// span the kernel of the curl-curl stiffness matrix.
    pub fn gradient_kernel_dim(&self) -> usize {
        (self.knots[0].len() - 2) * (self.knots[1].len() - 2)
    }

    /// Coefficient matrix (`len x gradient_kernel_dim`) of the gradients of the
    /// interior scalar splines, expressed in the active edge basis.
    pub fn discrete_gradient(&self) -> DMatrix<f64> {
        let (kx, ky) = (&self.knots[0], &self.knots[1]);
        let (nx, ny) = (kx.len(), ky.len());
        let mut g = DMatrix::zeros(self.len(), self.gradient_kernel_dim());
        // d/dx B_{i,p} = a_i B'_{i-1} - a_{i+1} B'_i with B' on the truncated knots
        let coef = |kv: &KnotVector, i: usize| {
            let p = kv.degree();
            let k = kv.knots();
            p as f64 / (k[i + p] - k[i])
        };
        let n1 = self.comps[0].len();
        let mut col = 0;
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let mut put = |raw: usize, v: f64| {
                    if let Some(a) = self.active[raw] {
                        g[(a, col)] += v;
                    }
                };
                let c1 = &self.comps[0];
                put(c1.index(i - 1, j), coef(kx, i));
                put(c1.index(i, j), -coef(kx, i + 1));
                let c2 = &self.comps[1];
                put(n1 + c2.index(i, j - 1), coef(ky, j));
                put(n1 + c2.index(i, j), -coef(ky, j + 1));
                col += 1;
            }
        }
        g
    }

    /// Supported basis functions (raw indices) at a parametric point.
    pub fn eval_reference(&self, x: f64, y: f64) -> Result<Vec<RefBasisValue>> {
        let mut out = Vec::new();
        let n1 = self.comps[0].len();
        // component 1: (B'_a(x) B_b(y), 0), curl = -B'_a(x) dB_b(y)
        let c = &self.comps[0];
        let bx = c.x.eval_basis(x, 0)?;
        let by = c.y.eval_basis(y, 1)?;
        for (jb, &vy) in by.derivs[0].iter().enumerate() {
            for (ja, &vx) in bx.derivs[0].iter().enumerate() {
                out.push(RefBasisValue {
                    raw: c.index(bx.first + ja, by.first + jb),
                    value: Vector2::new(vx * vy, 0.0),
                    curl: -vx * by.derivs[1][jb],
                });
            }
        }
        // component 2: (0, B_a(x) B'_b(y)), curl = dB_a(x) B'_b(y)
        let c = &self.comps[1];
        let bx = c.x.eval_basis(x, 1)?;
        let by = c.y.eval_basis(y, 0)?;
        for (jb, &vy) in by.derivs[0].iter().enumerate() {
            for (ja, &vx) in bx.derivs[0].iter().enumerate() {
                out.push(RefBasisValue {
                    raw: n1 + c.index(bx.first + ja, by.first + jb),
                    value: Vector2::new(0.0, vx * vy),
                    curl: bx.derivs[1][ja] * vy,
                });
            }
        }
        Ok(out)
    }

    /// Covariant pullback of the reference functions through a map with Jacobian `jac`:
    /// values `dF^{-T} w`, curls `curl w / det dF`.
    pub fn push_forward(values: &mut [RefBasisValue], jac: &Matrix2<f64>) -> Result<f64> {
        let det = jac.determinant();
        let inv_t = jac
            .try_inverse()
            .ok_or_else(|| Error::NotInvertible {
                point: Vec::new(),
                det,
            })?
            .transpose();
        for v in values.iter_mut() {
            v.value = inv_t * v.value;
            v.curl /= det;
        }
        Ok(det)
    }
}
