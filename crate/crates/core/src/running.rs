//! The two-input running example used throughout the tests and the demo.
//!
//! `x1` is protected over `[0, 8]`, `x2` is non-sensitive with tolerance 1 on
//! the domain `[-1, 1]`. The hidden layer computes `x1 + 6 x2` and `x1 - 6 x2`,
//! the output is `1 - 0.1 (h1 + h2)`.

use crate::model::{AffineLayer, Mlp};
use crate::schema::{AttrKind, Attribute, AttributeSchema, InputBox, ValueKind};

pub fn network() -> Mlp {
    let hidden = AffineLayer::from_rows(&[vec![1.0, 6.0], vec![1.0, -6.0]], vec![0.0, 0.0]).expect("valid layer");
    let out = AffineLayer::from_rows(&[vec![-0.1, -0.1]], vec![1.0]).expect("valid layer");
    Mlp::new(vec![hidden, out]).expect("valid network")
}

/// Schema with integer-valued attributes, so the neighbourhood is enumerable.
pub fn schema() -> AttributeSchema {
    AttributeSchema::new(vec![
        Attribute::protected("x1", 0.0, 8.0, ValueKind::Integer),
        Attribute::new("x2", AttrKind::Nonsensitive, -1.0, 1.0, ValueKind::Integer, 1.0),
    ])
    .expect("valid schema")
}

pub fn point() -> Vec<f64> {
    vec![4.0, 0.0]
}

pub fn input_box() -> InputBox {
    InputBox::new(vec![0.0, -1.0], vec![8.0, 1.0]).expect("valid box")
}
