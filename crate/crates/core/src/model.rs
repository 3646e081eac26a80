//! Feed-forward ReLU binary classifiers.
//!
//! An [`Mlp`] is a chain of [`AffineLayer`]s with ReLU after every layer except
//! the last, which has a single output row. The logit `f(x)` predicts the
//! positive class when `f(x) >= 0`.
//!
//! [`Mlp::split`] separates the network into its feature extractor (every layer
//! but the last, each followed by ReLU) and the final linear layer. Repairs
//! only ever touch the final layer, see [`Mlp::apply_repair`].

use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::path::Path;

use crate::error::{Error, Result};

const FORMAT_VERSION: u32 = 1;

/// Dense affine map `W x + b` with a row-major `out x in` weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineLayer {
    weight: Vec<f64>,
    bias: Vec<f64>,
    in_dim: usize,
}

impl AffineLayer {
    pub fn new(out_dim: usize, in_dim: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if out_dim == 0 || in_dim == 0 {
            return Err(Error::Structure(format!(
                "layer dimensions must be positive, got {out_dim}x{in_dim}"
            )));
        }
        if weight.len() != out_dim * in_dim {
            return Err(Error::dim("layer weight", out_dim * in_dim, weight.len()));
        }
        if bias.len() != out_dim {
            return Err(Error::dim("layer bias", out_dim, bias.len()));
        }
        if weight.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Structure("non-finite weight or bias".into()));
        }
        Ok(Self { weight, bias, in_dim })
    }

    pub fn from_rows(rows: &[Vec<f64>], bias: Vec<f64>) -> Result<Self> {
        let in_dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != in_dim) {
            return Err(Error::Structure("ragged weight rows".into()));
        }
        let weight = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), in_dim, weight, bias)
    }

    pub fn identity(dim: usize) -> Self {
        let mut weight = vec![0.0; dim * dim];
        for i in 0..dim {
            weight[i * dim + i] = 1.0;
        }
        Self {
            weight,
            bias: vec![0.0; dim],
            in_dim: dim,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.bias.len()
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.weight[j * self.in_dim..(j + 1) * self.in_dim]
    }

    #[inline]
    pub fn w(&self, j: usize, i: usize) -> f64 {
        self.weight[j * self.in_dim + i]
    }

    pub(crate) fn weight_mut(&mut self) -> &mut [f64] {
        &mut self.weight
    }

    pub(crate) fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        (0..self.out_dim())
            .map(|j| dot(self.row(j), x) + self.bias[j])
            .collect()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Every layer except the final linear one: affine maps, each followed by ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExtractor {
    layers: Vec<AffineLayer>,
}

impl FeatureExtractor {
    pub fn new(layers: Vec<AffineLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Structure("feature extractor needs a layer".into()));
        }
        check_chain(&layers)?;
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn feature_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::dim("feature extractor input", self.input_dim(), x.len()));
        }
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        for layer in &self.layers {
            cur = layer.apply(&cur);
            cur.iter_mut().for_each(|v| *v = relu(*v));
        }
        cur
    }

    /// Stable fingerprint over the exact bit patterns of every parameter.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        for layer in &self.layers {
            layer.in_dim.hash(&mut hasher);
            for v in layer.weight.iter().chain(&layer.bias) {
                v.to_bits().hash(&mut hasher);
            }
        }
        hasher.finish()
    }
}

/// A binary classifier `f: R^m -> R`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<AffineLayer>,
}

fn check_chain(layers: &[AffineLayer]) -> Result<()> {
    for (k, pair) in layers.windows(2).enumerate() {
        if pair[0].out_dim() != pair[1].in_dim() {
            return Err(Error::Structure(format!(
                "layer {k} outputs {} values but layer {} expects {}",
                pair[0].out_dim(),
                k + 1,
                pair[1].in_dim()
            )));
        }
    }
    Ok(())
}

impl Mlp {
    pub fn new(layers: Vec<AffineLayer>) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::Structure("network has no layers".into()));
        };
        if last.out_dim() != 1 {
            return Err(Error::Structure(format!(
                "final layer must have one output, has {}",
                last.out_dim()
            )));
        }
        check_chain(&layers)?;
        Ok(Self { layers })
    }

    pub fn from_parts(prefix: FeatureExtractor, last: AffineLayer) -> Result<Self> {
        let mut layers = prefix.layers;
        layers.push(last);
        Self::new(layers)
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [AffineLayer] {
        &mut self.layers
    }

    /// Layer widths, starting with the input dimension.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(AffineLayer::out_dim))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    /// Width of the penultimate output, i.e. the input width of the final layer.
    pub fn feature_dim(&self) -> usize {
        self.final_layer().in_dim()
    }

    pub fn final_layer(&self) -> &AffineLayer {
        &self.layers[self.layers.len() - 1]
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::dim("network input", self.input_dim(), x.len()));
        }
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> f64 {
        let features = self.features_unchecked(x);
        self.final_layer().apply(&features)[0]
    }

    pub fn forward_features(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::dim("network input", self.input_dim(), x.len()));
        }
        Ok(self.features_unchecked(x))
    }

    fn features_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        for layer in &self.layers[..self.layers.len() - 1] {
            cur = layer.apply(&cur);
            cur.iter_mut().for_each(|v| *v = relu(*v));
        }
        cur
    }

    pub fn predict(&self, x: &[f64]) -> Result<bool> {
        Ok(self.forward(x)? >= 0.0)
    }

    pub fn split(&self) -> Result<(FeatureExtractor, AffineLayer)> {
        if self.layers.len() < 2 {
            return Err(Error::Structure(
                "cannot split a single-layer network into extractor and final layer".into(),
            ));
        }
        let mut layers = self.layers.clone();
        let last = layers.pop().expect("at least two layers");
        Ok((FeatureExtractor { layers }, last))
    }

    pub fn prefix(&self) -> Result<FeatureExtractor> {
        self.split().map(|(p, _)| p)
    }

    pub fn apply_repair(&self, delta: &FinalLayerDelta) -> Result<Mlp> {
        let d = self.feature_dim();
        if delta.delta_w.len() != d {
            return Err(Error::dim("repair delta", d, delta.delta_w.len()));
        }
        if !delta.is_finite() {
            return Err(Error::Input("non-finite repair delta".into()));
        }
        let mut out = self.clone();
        let last = out.layers.last_mut().expect("non-empty");
        for (w, dw) in last.weight.iter_mut().zip(&delta.delta_w) {
            *w += dw;
        }
        last.bias[0] += delta.delta_b;
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# ifrepair model");
        let _ = writeln!(out, "version = {FORMAT_VERSION}");
        let dims: Vec<String> = self.dims().iter().map(usize::to_string).collect();
        let _ = writeln!(out, "dims = {}", dims.join(" "));
        let _ = writeln!(out, "activation = relu");
        for (k, layer) in self.layers.iter().enumerate() {
            let _ = writeln!(out, "layer_{k}.weight = {}", join_floats(&layer.weight));
            let _ = writeln!(out, "layer_{k}.bias = {}", join_floats(&layer.bias));
        }
        out
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Mlp> {
        parse_model(text, origin)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Mlp> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_model(&text, &path.display().to_string())
    }
}

pub fn save_model(net: &Mlp, path: impl AsRef<Path>) -> Result<()> {
    net.save(path)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Mlp> {
    Mlp::load(path)
}

// Display for f64 prints the shortest string that parses back to the same bits.
fn join_floats(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn parse_model(text: &str, origin: &str) -> Result<Mlp> {
    let err = |line: usize, field: &str, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        field: field.to_string(),
        message,
    };

    let mut version = None;
    let mut dims: Option<(usize, Vec<usize>)> = None;
    let mut activation = None;
    let mut weights: Vec<Option<(usize, Vec<f64>)>> = Vec::new();
    let mut biases: Vec<Option<(usize, Vec<f64>)>> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(lineno, line, "expected `key = value`".into()));
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "version" => {
                let v: u32 = value
                    .parse()
                    .map_err(|_| err(lineno, key, format!("not an integer: {value:?}")))?;
                if v != FORMAT_VERSION {
                    return Err(err(lineno, key, format!("unsupported version {v}")));
                }
                version = Some(v);
            }
            "dims" => {
                let parsed = value
                    .split_whitespace()
                    .map(|t| t.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| err(lineno, key, e.to_string()))?;
                if parsed.len() < 2 {
                    return Err(err(lineno, key, "need at least input and output width".into()));
                }
                dims = Some((lineno, parsed));
            }
            "activation" => {
                if value != "relu" {
                    return Err(err(lineno, key, format!("only `relu` is supported, got {value:?}")));
                }
                activation = Some(());
            }
            _ => {
                let Some((layer, field)) = key.strip_prefix("layer_").and_then(|rest| rest.split_once('.')) else {
                    return Err(err(lineno, key, "unknown field".into()));
                };
                let k: usize = layer.parse().map_err(|_| err(lineno, key, "bad layer index".into()))?;
                let floats = value
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| err(lineno, key, format!("bad number {t:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let slot = match field {
                    "weight" => &mut weights,
                    "bias" => &mut biases,
                    _ => return Err(err(lineno, key, "unknown field".into())),
                };
                if slot.len() <= k {
                    slot.resize(k + 1, None);
                }
                if slot[k].is_some() {
                    return Err(err(lineno, key, "duplicate field".into()));
                }
                slot[k] = Some((lineno, floats));
            }
        }
    }

    if version.is_none() {
        return Err(err(0, "version", "missing".into()));
    }
    if activation.is_none() {
        return Err(err(0, "activation", "missing".into()));
    }
    let Some((dims_line, dims)) = dims else {
        return Err(err(0, "dims", "missing".into()));
    };
    let n_layers = dims.len() - 1;
    if weights.len() > n_layers || biases.len() > n_layers {
        return Err(err(
            dims_line,
            "dims",
            format!("file defines more than {n_layers} layers"),
        ));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for k in 0..n_layers {
        let (in_dim, out_dim) = (dims[k], dims[k + 1]);
        let (wl, w) = weights
            .get(k)
            .cloned()
            .flatten()
            .ok_or_else(|| err(0, &format!("layer_{k}.weight"), "missing".into()))?;
        let (bl, b) = biases
            .get(k)
            .cloned()
            .flatten()
            .ok_or_else(|| err(0, &format!("layer_{k}.bias"), "missing".into()))?;
        if w.len() != in_dim * out_dim {
            return Err(Error::Structure(format!(
                "{origin}:{wl}: layer_{k}.weight has {} values, dims require {}x{}",
                w.len(),
                out_dim,
                in_dim
            )));
        }
        if b.len() != out_dim {
            return Err(Error::Structure(format!(
                "{origin}:{bl}: layer_{k}.bias has {} values, dims require {out_dim}",
                b.len()
            )));
        }
        layers.push(AffineLayer::new(out_dim, in_dim, w, b)?);
    }
    Mlp::new(layers)
}

/// Modification of the final layer: `W + delta_w`, `b + delta_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalLayerDelta {
    pub delta_w: Vec<f64>,
    pub delta_b: f64,
}

impl FinalLayerDelta {
    pub fn zero(dim: usize) -> Self {
        Self {
            delta_w: vec![0.0; dim],
            delta_b: 0.0,
        }
    }

    pub fn l1_norm(&self) -> f64 {
        self.delta_w.iter().map(|v| v.abs()).sum::<f64>() + self.delta_b.abs()
    }

    pub fn max_abs(&self) -> f64 {
        self.delta_w
            .iter()
            .chain(std::iter::once(&self.delta_b))
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.delta_w.iter().all(|v| v.is_finite()) && self.delta_b.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::running;

    #[test]
    fn running_network_outputs() {
        let net = running::network();
        assert!((net.forward(&[4.0, 0.0]).unwrap() - 0.2).abs() < 1e-12);
        assert!((net.forward(&[8.0, 1.0]).unwrap() + 0.6).abs() < 1e-12);
        assert_eq!(net.forward_features(&[4.0, 0.0]).unwrap(), vec![4.0, 4.0]);
        assert_eq!(net.forward_features(&[8.0, 1.0]).unwrap(), vec![14.0, 2.0]);
        assert_eq!(net.forward_features(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn zero_network_returns_bias() {
        let l1 = AffineLayer::new(3, 2, vec![0.0; 6], vec![0.0; 3]).unwrap();
        let l2 = AffineLayer::new(1, 3, vec![0.0; 3], vec![-2.5]).unwrap();
        let net = Mlp::new(vec![l1, l2]).unwrap();
        assert_eq!(net.forward(&[7.0, -3.0]).unwrap(), -2.5);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let net = running::network();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Dimension { .. })));
        assert!(net.forward_features(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn construction_rejects_bad_chains() {
        let l1 = AffineLayer::new(2, 2, vec![1.0; 4], vec![0.0; 2]).unwrap();
        let l2 = AffineLayer::new(1, 3, vec![1.0; 3], vec![0.0]).unwrap();
        assert!(matches!(Mlp::new(vec![l1.clone(), l2]), Err(Error::Structure(_))));
        // two outputs on the final layer
        assert!(Mlp::new(vec![l1]).is_err());
        assert!(AffineLayer::new(1, 1, vec![f64::NAN], vec![0.0]).is_err());
    }

    #[test]
    fn split_recomposes_exactly() {
        let net = running::network();
        let (prefix, last) = net.split().unwrap();
        assert_eq!(prefix.layers().len(), 1);
        assert_eq!(last.weight(), &[-0.1, -0.1]);
        assert_eq!(last.bias(), &[1.0]);
        let back = Mlp::from_parts(prefix, last).unwrap();
        assert_eq!(back, net);
        assert!((back.forward(&[4.0, 0.0]).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn split_identity_network() {
        let net = Mlp::new(vec![AffineLayer::identity(1), AffineLayer::identity(1)]).unwrap();
        let (prefix, last) = net.split().unwrap();
        assert_eq!(prefix.layers()[0], AffineLayer::identity(1));
        assert_eq!(last, AffineLayer::identity(1));
    }

    #[test]
    fn split_single_layer_fails() {
        let net = Mlp::new(vec![AffineLayer::identity(1)]).unwrap();
        assert!(matches!(net.split(), Err(Error::Structure(_))));
    }

    #[test]
    fn repair_from_the_concrete_example() {
        let net = running::network();
        let delta = FinalLayerDelta {
            delta_w: vec![9.0 / 140.0, 9.0 / 140.0],
            delta_b: 0.0,
        };
        let fixed = net.apply_repair(&delta).unwrap();
        for w in fixed.final_layer().weight() {
            assert!((w + 5.0 / 140.0).abs() < 1e-15);
        }
        assert_eq!(fixed.final_layer().bias(), &[1.0]);
        assert_eq!(fixed.layers()[0], net.layers()[0]);
        let y = fixed.forward(&[8.0, 1.0]).unwrap();
        assert!((y - 3.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn zero_repair_is_identity() {
        let net = running::network();
        let same = net.apply_repair(&FinalLayerDelta::zero(2)).unwrap();
        assert_eq!(same, net);
        assert!(net.apply_repair(&FinalLayerDelta::zero(3)).is_err());
    }

    #[test]
    fn text_round_trip_running() {
        let net = running::network();
        let back = Mlp::from_text(&net.to_text(), "mem").unwrap();
        assert_eq!(back, net);
        assert!((back.forward(&[4.0, 0.0]).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn parse_rejects_mismatched_widths() {
        let text = "version = 1\ndims = 2 2 1\nactivation = relu\n\
                    layer_0.weight = 1 2 3\nlayer_0.bias = 0 0\n\
                    layer_1.weight = 1 1\nlayer_1.bias = 0\n";
        assert!(matches!(Mlp::from_text(text, "mem"), Err(Error::Structure(_))));
    }

    #[test]
    fn parse_rejects_unknown_fields_with_line() {
        let text = "version = 1\ndims = 1 1\nactivation = relu\ncolor = blue\n";
        match Mlp::from_text(text, "m.txt") {
            Err(Error::Parse { line, field, .. }) => {
                assert_eq!(line, 4);
                assert_eq!(field, "color");
            }
            other => panic!("unexpected {other:?}"),
        }
        let tanh = "version = 1\ndims = 1 1\nactivation = tanh\n";
        assert!(Mlp::from_text(tanh, "m.txt").is_err());
    }
}
