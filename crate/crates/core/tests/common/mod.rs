#![allow(dead_code)]

use cavity_uq::fem::{Discretization, HCurlSpace};
use cavity_uq::geometry::{ClosedForm, DeformationField, DeformationMode, GeometryMap};

pub fn field(modes: Vec<ClosedForm>) -> DeformationField {
    DeformationField::new(
        2,
        modes.into_iter().map(DeformationMode::ClosedForm).collect(),
    )
    .unwrap()
}

pub fn width_scaling() -> DeformationField {
    field(vec![ClosedForm::AxisScaling {
        axis: 0,
        factor: 1.0,
    }])
}

pub fn rectangle(
    a: f64,
    b: f64,
    degree: usize,
    spans: usize,
    f: DeformationField,
) -> Discretization {
    Discretization::new(
        HCurlSpace::uniform((degree, degree), (spans, spans)).unwrap(),
        GeometryMap::rectangle(a, b).unwrap(),
        f,
    )
    .unwrap()
}

pub fn square(spans: usize, f: DeformationField) -> Discretization {
    rectangle(1.0, 1.0, 2, spans, f)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
