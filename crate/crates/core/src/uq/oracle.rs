use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Which side of the rectangle the deformation stretches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingAxis {
    Width,
    Height,
}

/// Rectangle `a x b` whose width (or height) becomes `a (1 + t z)` with
/// `z ~ U[-1, 1]`. Eigenvalues are `pi^2 (m^2 / a^2 + n^2 / b^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectangleOracle {
    pub a: f64,
    pub b: f64,
    pub axis: ScalingAxis,
}

/// Value and moments of one analytic eigenvalue branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleValue {
    pub lambda: f64,
    pub mean: f64,
    pub variance: f64,
}

fn check_amplitude(t: f64) -> Result<()> {
    if !(t.abs() < 1.0) {
        return Err(Error::DeformationNotInvertible(t));
    }
    Ok(())
}

impl RectangleOracle {
    pub fn new(a: f64, b: f64, axis: ScalingAxis) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidArgument(format!("rectangle sides {a} x {b}")));
        }
        Ok(RectangleOracle { a, b, axis })
    }

    /// `(scaled, fixed)` parts of the reference eigenvalue of mode `(m, n)`.
    fn split(&self, mode: (usize, usize)) -> Result<(f64, f64)> {
        let (m, n) = mode;
        if m == 0 && n == 0 {
            return Err(Error::InvalidArgument(
                "mode (0, 0) is not an eigenmode".into(),
            ));
        }
        let wx = PI * PI * (m * m) as f64 / (self.a * self.a);
        let wy = PI * PI * (n * n) as f64 / (self.b * self.b);
        Ok(match self.axis {
            ScalingAxis::Width => (wx, wy),
            ScalingAxis::Height => (wy, wx),
        })
    }

    pub fn reference(&self, mode: (usize, usize)) -> Result<f64> {
        let (s, r) = self.split(mode)?;
        Ok(s + r)
    }

    pub fn eigenvalue(&self, mode: (usize, usize), t: f64, z: f64) -> Result<f64> {
        check_amplitude(t * z)?;
        let (s, r) = self.split(mode)?;
        Ok(s / (1.0 + t * z).powi(2) + r)
    }

    /// `E[lambda] = s / (1 - t^2) + r`.
    pub fn mean(&self, mode: (usize, usize), t: f64) -> Result<f64> {
        check_amplitude(t)?;
        let (s, r) = self.split(mode)?;
        Ok(s / (1.0 - t * t) + r)
    }

    /// `Var[lambda] = s^2 (4 t^2 / 3) / (1 - t^2)^3`.
    pub fn variance(&self, mode: (usize, usize), t: f64) -> Result<f64> {
        check_amplitude(t)?;
        let (s, _) = self.split(mode)?;
        Ok(s * s * (4.0 * t * t / 3.0) / (1.0 - t * t).powi(3))
    }

    /// Modes whose reference eigenvalue lies within `rel_tol` of `lambda`.
    pub fn modes_near(&self, lambda: f64, rel_tol: f64) -> Vec<(usize, usize)> {
        let kmax_x = (lambda.max(0.0).sqrt() * self.a / PI).ceil() as usize + 1;
        let kmax_y = (lambda.max(0.0).sqrt() * self.b / PI).ceil() as usize + 1;
        let mut out = Vec::new();
        for m in 0..=kmax_x {
            for n in 0..=kmax_y {
                if let Ok(l) = self.reference((m, n)) {
                    if (l - lambda).abs() <= rel_tol * lambda {
                        out.push((m, n));
                    }
                }
            }
        }
        out
    }
}

/// Eigenvalue of mode `(m, n)` at `(t, z)` together with its closed-form mean and
/// variance over `z ~ U[-1, 1]`.
pub fn analytic_rectangle_oracle(
    a: f64,
    b: f64,
    mode: (usize, usize),
    axis: ScalingAxis,
    t: f64,
    z: f64,
) -> Result<OracleValue> {
    let o = RectangleOracle::new(a, b, axis)?;
    check_amplitude(t)?;
    Ok(OracleValue {
        lambda: o.eigenvalue(mode, t, z)?,
        mean: o.mean(mode, t)?,
        variance: o.variance(mode, t)?,
    })
}
