//! Seeded synthetic data with a tunable dependence on a binary protected
//! attribute, plus a small full-batch trainer for baseline classifiers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::calibrate::{bce_value_and_grad, LayerGrad};
use crate::error::{Error, Result};
use crate::model::{AffineLayer, Mlp};
use crate::schema::{AttrKind, Attribute, AttributeSchema, Dataset, Sample, ValueKind};

/// Upper end of every nonsensitive synthetic attribute; values are integers in `[0, ATTR_MAX]`.
pub const ATTR_MAX: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    /// Number of input attributes; attribute 0 is protected.
    pub inputs: usize,
    pub hidden: Vec<usize>,
    /// Weight of the protected attribute in the labelling rule.
    pub bias_strength: f64,
    pub rows: usize,
    /// Neighbourhood radius of every nonsensitive attribute.
    pub epsilon: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl SynthConfig {
    pub fn new(seed: u64, inputs: usize, hidden: Vec<usize>, bias_strength: f64) -> Self {
        Self {
            seed,
            inputs,
            hidden,
            bias_strength,
            rows: 600,
            epsilon: 1.0,
            epochs: 300,
            learning_rate: 0.02,
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.inputs];
        d.extend(&self.hidden);
        d.push(1);
        d
    }
}

/// Protected `p` in `{0, 1}` followed by `a1..` integers in `[0, ATTR_MAX]`.
pub fn synthetic_schema(inputs: usize, epsilon: f64) -> Result<AttributeSchema> {
    if inputs < 2 {
        return Err(Error::Config("synthetic data needs at least 2 attributes".into()));
    }
    let mut attrs = vec![Attribute::protected("p", 0.0, 1.0, ValueKind::Integer)];
    for k in 1..inputs {
        attrs.push(Attribute::new(
            format!("a{k}"),
            AttrKind::Nonsensitive,
            0.0,
            ATTR_MAX,
            ValueKind::Integer,
            epsilon,
        ));
    }
    AttributeSchema::new(attrs)
}

/// Labels follow a seeded linear score of the nonsensitive attributes plus
/// `bias_strength * (2p - 1)` and Gaussian noise.
pub fn gen_dataset(seed: u64, schema: &AttributeSchema, rows: usize, bias_strength: f64) -> Result<Dataset> {
    if !bias_strength.is_finite() {
        return Err(Error::Config("bias strength must be finite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = schema.dim();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let coef: Vec<f64> = (0..m).map(|_| normal.sample(&mut rng)).collect();
    let protected = schema.protected_indices();
    let mut out = Vec::with_capacity(rows);
    for _ in 0..rows {
        let x = schema.sample_input(&mut rng);
        let mut score = 0.0;
        for (i, a) in schema.attributes().iter().enumerate() {
            if protected.contains(&i) {
                continue;
            }
            let mid = 0.5 * (a.lo + a.hi);
            let span = (a.hi - a.lo).max(1.0);
            score += coef[i] * 2.0 * (x[i] - mid) / span;
        }
        for &p in &protected {
            let a = &schema.attributes()[p];
            let unit = if a.hi > a.lo {
                (x[p] - a.lo) / (a.hi - a.lo)
            } else {
                0.0
            };
            score += bias_strength * (2.0 * unit - 1.0);
        }
        score += 0.3 * normal.sample(&mut rng);
        out.push(Sample {
            x,
            y: u8::from(score > 0.0),
        });
    }
    Ok(Dataset::new(out))
}

/// Dataset, trained network and schema for a one-hidden-layer net of width `d`.
pub fn gen_synthetic(seed: u64, m: usize, d: usize, bias_strength: f64) -> Result<(Dataset, Mlp, AttributeSchema)> {
    generate(&SynthConfig::new(seed, m, vec![d], bias_strength))
}

pub fn generate(cfg: &SynthConfig) -> Result<(Dataset, Mlp, AttributeSchema)> {
    let schema = synthetic_schema(cfg.inputs, cfg.epsilon)?;
    let data = gen_dataset(cfg.seed, &schema, cfg.rows, cfg.bias_strength)?;
    let scale = MinMax::from_schema(&schema);
    let net = train_scaled(
        &data,
        &cfg.dims(),
        cfg.epochs,
        cfg.learning_rate,
        cfg.seed.wrapping_add(1),
        Some(&scale),
    )?;
    Ok((data, net, schema))
}

/// Per-attribute affine map onto `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMax {
    pub lo: Vec<f64>,
    pub span: Vec<f64>,
}

impl MinMax {
    pub fn from_schema(schema: &AttributeSchema) -> Self {
        let lo = schema.attributes().iter().map(|a| a.lo).collect();
        let span = schema
            .attributes()
            .iter()
            .map(|a| if a.hi > a.lo { a.hi - a.lo } else { 1.0 })
            .collect();
        Self { lo, span }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.lo)
            .zip(&self.span)
            .map(|((v, l), s)| (v - l) / s)
            .collect()
    }

    /// Rewrite `layer` so that on raw inputs it computes what it computed on scaled ones.
    fn fold_into(&self, layer: &AffineLayer) -> Result<AffineLayer> {
        let n_in = layer.in_dim();
        let mut w = layer.weight().to_vec();
        let mut b = layer.bias().to_vec();
        for j in 0..layer.out_dim() {
            for i in 0..n_in {
                let v = w[j * n_in + i] / self.span[i];
                w[j * n_in + i] = v;
                b[j] -= v * self.lo[i];
            }
        }
        AffineLayer::new(layer.out_dim(), n_in, w, b)
    }
}

/// Train a `dims` network by full-batch Adam on mean BCE. Zero epochs
/// returns the seeded initialisation.
pub fn train_baseline(data: &Dataset, dims: &[usize], epochs: usize, lr: f64, seed: u64) -> Result<Mlp> {
    train_scaled(data, dims, epochs, lr, seed, None)
}

/// As [`train_baseline`], training on min-max scaled inputs and folding the
/// scaling into the first layer.
pub fn train_scaled(
    data: &Dataset,
    dims: &[usize],
    epochs: usize,
    lr: f64,
    seed: u64,
    scale: Option<&MinMax>,
) -> Result<Mlp> {
    if dims.len() < 3 || *dims.last().unwrap() != 1 || dims.contains(&0) {
        return Err(Error::Config(format!(
            "network dims must be [inputs, hidden.., 1] with no zero width, got {dims:?}"
        )));
    }
    if data.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    if data.rows.iter().any(|r| r.x.len() != dims[0]) {
        return Err(Error::dim("training row vs input width", dims[0], data.rows[0].x.len()));
    }
    if !(lr.is_finite() && lr > 0.0) {
        return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for pair in dims.windows(2) {
        let (n_in, n_out) = (pair[0], pair[1]);
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        let w = (0..n_in * n_out).map(|_| rng.random_range(-limit..limit)).collect();
        let b = vec![0.0; n_out];
        layers.push(AffineLayer::new(n_out, n_in, w, b)?);
    }
    let train = match scale {
        Some(s) => Dataset::new(
            data.rows
                .iter()
                .map(|r| Sample {
                    x: s.apply(&r.x),
                    y: r.y,
                })
                .collect(),
        ),
        None => data.clone(),
    };

    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut m1: Vec<LayerGrad> = layers.iter().map(zero_grad).collect();
    let mut m2: Vec<LayerGrad> = layers.iter().map(zero_grad).collect();
    for t in 1..=epochs {
        let mut g: Vec<LayerGrad> = layers.iter().map(zero_grad).collect();
        let loss = bce_value_and_grad(&layers, &train, Some(&mut g));
        if !loss.is_finite() {
            return Err(Error::Diverged {
                iteration: t - 1,
                value: loss,
            });
        }
        let c1 = 1.0 - f64::powi(b1, t as i32);
        let c2 = 1.0 - f64::powi(b2, t as i32);
        for (k, layer) in layers.iter_mut().enumerate() {
            let upd = |p: &mut f64, g: f64, a: &mut f64, v: &mut f64| {
                *a = b1 * *a + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*a / c1) / ((*v / c2).sqrt() + eps);
            };
            for (i, p) in layer.weight_mut().iter_mut().enumerate() {
                upd(p, g[k].weight[i], &mut m1[k].weight[i], &mut m2[k].weight[i]);
            }
            for (i, p) in layer.bias_mut().iter_mut().enumerate() {
                upd(p, g[k].bias[i], &mut m1[k].bias[i], &mut m2[k].bias[i]);
            }
        }
    }
    if let Some(s) = scale {
        layers[0] = s.fold_into(&layers[0])?;
    }
    Mlp::new(layers)
}

fn zero_grad(layer: &AffineLayer) -> LayerGrad {
    LayerGrad {
        weight: vec![0.0; layer.weight().len()],
        bias: vec![0.0; layer.bias().len()],
    }
}

/// Fraction of rows whose predicted class matches the label.
pub fn accuracy(net: &Mlp, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut hit = 0usize;
    for r in &data.rows {
        if net.predict(&r.x)? == (r.y == 1) {
            hit += 1;
        }
    }
    Ok(hit as f64 / data.len() as f64)
}
