//! Plain-text, whitespace-separated file formats for deformation fields and patches.
//!
//! Deformation file (`#` starts a comment, records may span lines):
//!
//! ```text
//! dim 2
//! closed_form axis_scaling x 1.0
//! closed_form shear y x 0.5          # V_x = 0.5 * y
//! closed_form bump y 0.2
//! closed_form monomial x 1.0 0 1     # V_x = 1.0 * x^0 y^1
//! spline 1 1  2 2  <d * (p1+n1) * (p2+n2) coefficients>
//! ```
//!
//! A spline record lists the degrees, then the number of uniform spans per
//! direction, then for every control point (first direction fastest) its `d`
//! components.
//!
//! Patch file:
//!
//! ```text
//! patch 2  2 2  1 1  rational 0
//! <x y> or <x y w> per control point, first direction fastest
//! ```

use nalgebra::DVector;

use super::{ClosedForm, DeformationField, DeformationMode, GeometryMap, SplineField};
use crate::bspline::{KnotVector, TensorBasis};
use crate::error::{Error, Result};

struct Tokens<'a> {
    items: Vec<&'a str>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let items = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace)
            .collect();
        Tokens { items, pos: 0 }
    }

    fn peek(&self) -> Option<&'a str> {
        self.items.get(self.pos).copied()
    }

    fn next(&mut self, what: &str) -> Result<&'a str> {
        let t = self
            .items
            .get(self.pos)
            .copied()
            .ok_or_else(|| Error::Parse(format!("unexpected end of input, expected {what}")))?;
        self.pos += 1;
        Ok(t)
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        let t = self.next(kw)?;
        if t != kw {
            return Err(Error::Parse(format!("expected `{kw}`, found `{t}`")));
        }
        Ok(())
    }

    fn num<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let t = self.next(what)?;
        t.parse()
            .map_err(|_| Error::Parse(format!("invalid {what}: `{t}`")))
    }

    fn axis(&mut self, d: usize) -> Result<usize> {
        let t = self.next("axis")?;
        let axis = match t {
            "x" => 0,
            "y" => 1,
            "z" => 2,
            other => other
                .parse()
                .map_err(|_| Error::Parse(format!("invalid axis `{other}`")))?,
        };
        if axis >= d {
            return Err(Error::Parse(format!("axis `{t}` out of range for d = {d}")));
        }
        Ok(axis)
    }
}

fn axis_name(a: usize) -> &'static str {
    ["x", "y", "z"][a]
}

fn uniform_basis(tok: &mut Tokens<'_>, d: usize) -> Result<TensorBasis> {
    let degrees = (0..d)
        .map(|_| tok.num::<usize>("degree"))
        .collect::<Result<Vec<_>>>()?;
    let spans = (0..d)
        .map(|_| tok.num::<usize>("span count"))
        .collect::<Result<Vec<_>>>()?;
    let dirs = degrees
        .iter()
        .zip(&spans)
        .map(|(&p, &n)| KnotVector::uniform(p, n))
        .collect::<Result<Vec<_>>>()?;
    TensorBasis::new(dirs)
}

pub fn parse_deformation_file(text: &str) -> Result<DeformationField> {
    let mut tok = Tokens::new(text);
    tok.keyword("dim")?;
    let d: usize = tok.num("dimension")?;
    if !(2..=3).contains(&d) {
        return Err(Error::Parse(format!("dimension must be 2 or 3, got {d}")));
    }
    let mut modes = Vec::new();
    while let Some(kind) = tok.peek() {
        tok.pos += 1;
        match kind {
            "closed_form" => {
                let name = tok.next("closed-form name")?;
                let c = match name {
                    "axis_scaling" => ClosedForm::AxisScaling {
                        axis: tok.axis(d)?,
                        factor: tok.num("factor")?,
                    },
                    "shear" => ClosedForm::Shear {
                        from: tok.axis(d)?,
                        to: tok.axis(d)?,
                        factor: tok.num("factor")?,
                    },
                    "bump" => ClosedForm::Bump {
                        axis: tok.axis(d)?,
                        amplitude: tok.num("amplitude")?,
                    },
                    "monomial" => ClosedForm::Monomial {
                        axis: tok.axis(d)?,
                        factor: tok.num("factor")?,
                        exponents: (0..d)
                            .map(|_| tok.num::<u32>("exponent"))
                            .collect::<Result<_>>()?,
                    },
                    other => {
                        return Err(Error::Parse(format!("unknown closed-form mode `{other}`")))
                    }
                };
                modes.push(DeformationMode::ClosedForm(c));
            }
            "spline" => {
                let basis = uniform_basis(&mut tok, d)?;
                let coefficients = (0..basis.len())
                    .map(|_| {
                        (0..d)
                            .map(|_| tok.num::<f64>("coefficient"))
                            .collect::<Result<Vec<_>>>()
                            .map(DVector::from_vec)
                    })
                    .collect::<Result<Vec<_>>>()?;
                modes.push(DeformationMode::Spline(SplineField::new(
                    basis,
                    coefficients,
                )?));
            }
            other => return Err(Error::Parse(format!("unknown record `{other}`"))),
        }
    }
    DeformationField::new(d, modes)
}

/// Serializes a field in the format read by [`parse_deformation_file`]. Spline
/// modes must live on uniform knot vectors.
pub fn write_deformation_file(field: &DeformationField) -> Result<String> {
    let mut out = format!("dim {}\n", field.dim());
    for m in field.modes() {
        match m {
            DeformationMode::ClosedForm(c) => {
                let line = match c {
                    ClosedForm::AxisScaling { axis, factor } => {
                        format!("axis_scaling {} {factor:?}", axis_name(*axis))
                    }
                    ClosedForm::Shear { from, to, factor } => {
                        format!("shear {} {} {factor:?}", axis_name(*from), axis_name(*to))
                    }
                    ClosedForm::Bump { axis, amplitude } => {
                        format!("bump {} {amplitude:?}", axis_name(*axis))
                    }
                    ClosedForm::Monomial {
                        axis,
                        factor,
                        exponents,
                    } => {
                        let e: Vec<String> = exponents.iter().map(u32::to_string).collect();
                        format!("monomial {} {factor:?} {}", axis_name(*axis), e.join(" "))
                    }
                };
                out.push_str(&format!("closed_form {line}\n"));
            }
            DeformationMode::Spline(s) => {
                let mut degrees = Vec::new();
                let mut spans = Vec::new();
                for kv in s.basis().directions() {
                    let n = kv.spans().len();
                    if KnotVector::uniform(kv.degree(), n)? != *kv {
                        return Err(Error::InvalidArgument(
                            "only uniform spline modes can be written".into(),
                        ));
                    }
                    degrees.push(kv.degree().to_string());
                    spans.push(n.to_string());
                }
                out.push_str(&format!(
                    "spline {} {}\n",
                    degrees.join(" "),
                    spans.join(" ")
                ));
                for c in s.coefficients() {
                    let v: Vec<String> = c.iter().map(|x| format!("{x:?}")).collect();
                    out.push_str(&format!("  {}\n", v.join(" ")));
                }
            }
        }
    }
    Ok(out)
}

pub fn parse_patch_file(text: &str) -> Result<GeometryMap> {
    let mut tok = Tokens::new(text);
    tok.keyword("patch")?;
    let d: usize = tok.num("dimension")?;
    if !(2..=3).contains(&d) {
        return Err(Error::Parse(format!("dimension must be 2 or 3, got {d}")));
    }
    let basis = uniform_basis(&mut tok, d)?;
    tok.keyword("rational")?;
    let rational = match tok.next("0 or 1")? {
        "0" => false,
        "1" => true,
        other => {
            return Err(Error::Parse(format!(
                "rational flag must be 0 or 1, got `{other}`"
            )))
        }
    };
    let mut points = Vec::with_capacity(basis.len());
    let mut weights = Vec::new();
    for _ in 0..basis.len() {
        let p = (0..d)
            .map(|_| tok.num::<f64>("coordinate"))
            .collect::<Result<Vec<_>>>()?;
        points.push(DVector::from_vec(p));
        if rational {
            weights.push(tok.num::<f64>("weight")?);
        }
    }
    if let Some(extra) = tok.peek() {
        return Err(Error::Parse(format!(
            "trailing token `{extra}` in patch file"
        )));
    }
    GeometryMap::new(basis, points, rational.then_some(weights))
}
