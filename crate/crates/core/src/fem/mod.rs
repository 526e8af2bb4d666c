//! Curl-conforming spline discretization of the planar cavity problem.

mod assembly;
mod space;

pub use assembly::{Discretization, MatrixKind, QuadPoint};
pub use space::{ComponentSpace, HCurlSpace, RefBasisValue};

use std::io::Write;

use nalgebra::DMatrix;

use crate::bspline::KnotVector;
use crate::error::Result;
use crate::geometry::{DeformationField, GeometryMap};

/// Reference stiffness/mass and their per-mode derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPencil {
    pub k0: DMatrix<f64>,
    pub m0: DMatrix<f64>,
    pub dk: Vec<DMatrix<f64>>,
    pub dm: Vec<DMatrix<f64>>,
}

impl EigenPencil {
    pub fn len(&self) -> usize {
        self.k0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn modes(&self) -> usize {
        self.dk.len()
    }

    /// Largest relative Frobenius asymmetry `|A - A^T| / |A|` over all matrices.
    pub fn max_asymmetry(&self) -> f64 {
        std::iter::once(&self.k0)
            .chain(std::iter::once(&self.m0))
            .chain(&self.dk)
            .chain(&self.dm)
            .map(relative_asymmetry)
            .fold(0.0, f64::max)
    }

    /// Keeps the leading `n x n` block of every matrix.
    pub fn truncated(&self, n: usize) -> EigenPencil {
        let cut = |m: &DMatrix<f64>| m.view((0, 0), (n, n)).into_owned();
        EigenPencil {
            k0: cut(&self.k0),
            m0: cut(&self.m0),
            dk: self.dk.iter().map(cut).collect(),
            dm: self.dm.iter().map(cut).collect(),
        }
    }
}

pub fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.norm();
    if n == 0.0 {
        0.0
    } else {
        (m - m.transpose()).norm() / n
    }
}

/// Edge-element space from per-direction degrees and knot vectors.
pub fn build_space(x: KnotVector, y: KnotVector) -> Result<HCurlSpace> {
    HCurlSpace::new(x, y)
}

pub fn assemble<F>(
    space: &HCurlSpace,
    map: &GeometryMap,
    kind: MatrixKind,
    coefficient: F,
) -> Result<DMatrix<f64>>
where
    F: Fn(&QuadPoint) -> DMatrix<f64> + Sync,
{
    Discretization::new(space.clone(), map.clone(), DeformationField::empty(2))?
        .assemble(kind, coefficient)
}

pub fn assemble_pencil(
    space: &HCurlSpace,
    map: &GeometryMap,
    field: &DeformationField,
) -> Result<EigenPencil> {
    Discretization::new(space.clone(), map.clone(), field.clone())?.assemble_pencil()
}

/// Debug dump of the nonzero entries as `row,col,value` lines.
pub fn write_triplets_csv<W: Write>(m: &DMatrix<f64>, mut out: W) -> std::io::Result<()> {
    writeln!(out, "row,col,value")?;
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let v = m[(r, c)];
            if v != 0.0 {
                writeln!(out, "{r},{c},{v:e}")?;
            }
        }
    }
    Ok(())
}
