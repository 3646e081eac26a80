//! Feature calibration: gradient descent on the feature extractor that
//! shrinks interval bounds over every repair neighbourhood while a BCE term
//! keeps the classifier accurate.
//!
//! The fairness loss is the mean over repair inputs of
//! `|hi_i - lo_i|_1 / width0_i`, where `lo_i, hi_i` are the interval feature
//! bounds over neighbourhood `i` and `width0_i` is that width for the
//! uncalibrated extractor. Gradients are taken by hand through the interval
//! computation: an affine layer routes each weight to the bound endpoint its
//! sign selects, and ReLU passes gradient where the endpoint is positive.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{relu, AffineLayer, FeatureExtractor, Mlp};
use crate::schema::{Dataset, InputBox};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    GradientDescent,
    Momentum { beta: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationConfig {
    pub max_iter: usize,
    pub learning_rate: f64,
    /// Inputs whose initial width is below this contribute 0 to the loss.
    pub ori_diff_floor: f64,
    /// Weight on the BCE term.
    pub bce_weight: f64,
    pub optimizer: Optimizer,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            learning_rate: 0.001,
            ori_diff_floor: 1e-9,
            bce_weight: 1.0,
            optimizer: Optimizer::GradientDescent,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.bce_weight.is_finite() && self.bce_weight >= 0.0) {
            return Err(Error::Config("bce weight must be finite and >= 0".into()));
        }
        if !(self.ori_diff_floor >= 0.0) {
            return Err(Error::Config("ori_diff_floor must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CalibrationTrace {
    /// `(l_fair, l_bce)` evaluated before each update.
    pub records: Vec<(f64, f64)>,
    /// Losses after the last update.
    pub final_losses: (f64, f64),
    /// Initial feature-bound width per repair input.
    pub ori_diffs: Vec<f64>,
}

impl CalibrationTrace {
    pub fn initial_fair(&self) -> f64 {
        self.records.first().map_or(self.final_losses.0, |r| r.0)
    }

    /// `iter,l_fair,l_bce`, one row per update plus a final row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,l_fair,l_bce\n");
        for (t, (f, b)) in self.records.iter().enumerate() {
            let _ = writeln!(out, "{t},{f},{b}");
        }
        let _ = writeln!(
            out,
            "{},{},{}",
            self.records.len(),
            self.final_losses.0,
            self.final_losses.1
        );
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Gradient of a scalar loss with respect to one affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerGrad {
    fn zeros(layer: &AffineLayer) -> Self {
        Self {
            weight: vec![0.0; layer.weight().len()],
            bias: vec![0.0; layer.bias().len()],
        }
    }

    fn add_scaled(&mut self, other: &LayerGrad, s: f64) {
        for (a, b) in self.weight.iter_mut().zip(&other.weight) {
            *a += s * b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += s * b;
        }
    }
}

/// Interval bounds of every layer, kept for the backward pass.
struct IntervalTape {
    /// `(lo, hi)` entering each layer; entry 0 is the box.
    inputs: Vec<(Vec<f64>, Vec<f64>)>,
    /// Pre-activation `(lo, hi)` of each layer.
    pre: Vec<(Vec<f64>, Vec<f64>)>,
}

fn interval_forward(layers: &[AffineLayer], b: &InputBox) -> (IntervalTape, Vec<f64>, Vec<f64>) {
    let mut lo = b.lower.clone();
    let mut hi = b.upper.clone();
    let mut tape = IntervalTape {
        inputs: Vec::with_capacity(layers.len()),
        pre: Vec::with_capacity(layers.len()),
    };
    for layer in layers {
        let (pl, pu) = crate::bounds::ibp_affine(layer, &lo, &hi);
        tape.inputs.push((lo, hi));
        lo = pl.iter().map(|&v| relu(v)).collect();
        hi = pu.iter().map(|&v| relu(v)).collect();
        tape.pre.push((pl, pu));
    }
    (tape, lo, hi)
}

/// Accumulate into `grads` the gradient of `g_lo . lo + g_hi . hi` (the
/// output bounds of the interval pass).
fn interval_backward(
    layers: &[AffineLayer],
    tape: &IntervalTape,
    mut g_lo: Vec<f64>,
    mut g_hi: Vec<f64>,
    grads: &mut [LayerGrad],
) {
    for k in (0..layers.len()).rev() {
        let layer = &layers[k];
        let (pl, pu) = &tape.pre[k];
        let (lo, hi) = &tape.inputs[k];
        let gpl: Vec<f64> = g_lo
            .iter()
            .zip(pl)
            .map(|(g, &v)| if v > 0.0 { *g } else { 0.0 })
            .collect();
        let gpu: Vec<f64> = g_hi
            .iter()
            .zip(pu)
            .map(|(g, &v)| if v > 0.0 { *g } else { 0.0 })
            .collect();
        let n_in = layer.in_dim();
        let mut next_lo = vec![0.0; n_in];
        let mut next_hi = vec![0.0; n_in];
        let grad = &mut grads[k];
        for j in 0..layer.out_dim() {
            let (a, c) = (gpl[j], gpu[j]);
            if a == 0.0 && c == 0.0 {
                continue;
            }
            grad.bias[j] += a + c;
            let row = layer.row(j);
            let gw = &mut grad.weight[j * n_in..(j + 1) * n_in];
            for i in 0..n_in {
                let w = row[i];
                if w > 0.0 {
                    gw[i] += a * lo[i] + c * hi[i];
                    next_lo[i] += a * w;
                    next_hi[i] += c * w;
                } else if w < 0.0 {
                    gw[i] += a * hi[i] + c * lo[i];
                    next_hi[i] += a * w;
                    next_lo[i] += c * w;
                }
            }
        }
        g_lo = next_lo;
        g_hi = next_hi;
    }
}

/// Initial L1 width of the feature bounds over each box.
pub fn ori_diffs(prefix: &FeatureExtractor, boxes: &[InputBox]) -> Result<Vec<f64>> {
    boxes
        .iter()
        .map(|b| Ok(crate::bounds::ibp_concrete(prefix, b)?.width_l1()))
        .collect()
}

fn check_boxes(prefix: &FeatureExtractor, boxes: &[InputBox], ori: &[f64]) -> Result<()> {
    if boxes.len() != ori.len() {
        return Err(Error::dim("boxes vs initial widths", boxes.len(), ori.len()));
    }
    for b in boxes {
        if b.dim() != prefix.input_dim() {
            return Err(Error::dim("box vs network input", prefix.input_dim(), b.dim()));
        }
    }
    Ok(())
}

fn fair_value_and_grad(
    layers: &[AffineLayer],
    boxes: &[InputBox],
    ori: &[f64],
    floor: f64,
    grads: Option<&mut [LayerGrad]>,
) -> f64 {
    if boxes.is_empty() {
        return 0.0;
    }
    let n = boxes.len() as f64;
    let mut total = 0.0;
    let mut grads = grads;
    for (b, &o) in boxes.iter().zip(ori) {
        if o < floor {
            continue;
        }
        let (tape, lo, hi) = interval_forward(layers, b);
        let width: f64 = lo.iter().zip(&hi).map(|(l, h)| h - l).sum();
        total += width / o;
        if let Some(g) = grads.as_deref_mut() {
            let s = 1.0 / (n * o);
            interval_backward(layers, &tape, vec![-s; lo.len()], vec![s; hi.len()], g);
        }
    }
    total / n
}

/// Mean ratio of current to initial feature-bound width.
pub fn fairness_loss(prefix: &FeatureExtractor, boxes: &[InputBox], ori: &[f64], floor: f64) -> Result<f64> {
    check_boxes(prefix, boxes, ori)?;
    Ok(fair_value_and_grad(prefix.layers(), boxes, ori, floor, None))
}

/// `max(z, 0) - y z + ln(1 + e^-|z|)`, the BCE of `sigmoid(z)` against `y`.
fn bce_term(z: f64, y: f64) -> f64 {
    z.max(0.0) - y * z + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn bce_loss(net: &Mlp, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Input("BCE needs a non-empty dataset".into()));
    }
    let mut total = 0.0;
    for row in &data.rows {
        total += bce_term(net.forward(&row.x)?, row.y as f64);
    }
    Ok(total / data.len() as f64)
}

/// Mean BCE over `data` and its gradient for every layer of `layers`, the
/// last of which is the linear output layer.
pub(crate) fn bce_value_and_grad(layers: &[AffineLayer], data: &Dataset, grads: Option<&mut [LayerGrad]>) -> f64 {
    let n = data.len() as f64;
    let mut total = 0.0;
    let mut grads = grads;
    let last = layers.len() - 1;
    for row in &data.rows {
        // Forward, keeping each layer's input and pre-activation.
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
        let mut pres: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
        let mut cur = row.x.clone();
        for (k, layer) in layers.iter().enumerate() {
            let z = layer.apply(&cur);
            acts.push(cur);
            cur = if k == last {
                z.clone()
            } else {
                z.iter().map(|&v| relu(v)).collect()
            };
            pres.push(z);
        }
        let logit = cur[0];
        let y = row.y as f64;
        total += bce_term(logit, y);
        let Some(g) = grads.as_deref_mut() else { continue };
        let mut delta = vec![(sigmoid(logit) - y) / n];
        for k in (0..layers.len()).rev() {
            let layer = &layers[k];
            if k != last {
                for (dv, &z) in delta.iter_mut().zip(&pres[k]) {
                    if z <= 0.0 {
                        *dv = 0.0;
                    }
                }
            }
            let input = &acts[k];
            let n_in = layer.in_dim();
            let mut back = vec![0.0; n_in];
            for (j, &dj) in delta.iter().enumerate() {
                if dj == 0.0 {
                    continue;
                }
                g[k].bias[j] += dj;
                let gw = &mut g[k].weight[j * n_in..(j + 1) * n_in];
                for (i, &w) in layer.row(j).iter().enumerate() {
                    gw[i] += dj * input[i];
                    back[i] += dj * w;
                }
            }
            delta = back;
        }
    }
    total / n
}

/// Total objective `L_fair + bce_weight * L_bce` with its gradient for every
/// feature-extractor layer. The output layer receives no update but the BCE
/// gradient flows through it.
pub fn objective_and_gradient(
    net: &Mlp,
    boxes: &[InputBox],
    ori: &[f64],
    calibration_set: &Dataset,
    cfg: &CalibrationConfig,
) -> Result<(f64, f64, Vec<LayerGrad>)> {
    let (prefix, _) = net.split()?;
    check_boxes(&prefix, boxes, ori)?;
    if calibration_set.is_empty() {
        return Err(Error::Input("calibration set is empty".into()));
    }
    let layers = net.layers();
    let np = layers.len() - 1;
    let mut fair_g: Vec<LayerGrad> = layers[..np].iter().map(LayerGrad::zeros).collect();
    let l_fair = fair_value_and_grad(&layers[..np], boxes, ori, cfg.ori_diff_floor, Some(&mut fair_g));
    let mut bce_g: Vec<LayerGrad> = layers.iter().map(LayerGrad::zeros).collect();
    let l_bce = bce_value_and_grad(layers, calibration_set, Some(&mut bce_g));
    for (f, b) in fair_g.iter_mut().zip(&bce_g) {
        f.add_scaled(b, cfg.bce_weight);
    }
    Ok((l_fair, l_bce, fair_g))
}

struct OptState {
    velocity: Vec<LayerGrad>,
    second: Vec<LayerGrad>,
    step: i32,
}

fn apply_update(layers: &mut [AffineLayer], grads: &[LayerGrad], cfg: &CalibrationConfig, st: &mut OptState) {
    let lr = cfg.learning_rate;
    st.step += 1;
    for ((layer, g), (v, s)) in layers
        .iter_mut()
        .zip(grads)
        .zip(st.velocity.iter_mut().zip(st.second.iter_mut()))
    {
        let params = layer
            .weight_mut()
            .iter_mut()
            .zip(&g.weight)
            .zip(v.weight.iter_mut().zip(s.weight.iter_mut()));
        for ((p, &gv), (m1, m2)) in params {
            *p -= step(gv, m1, m2, cfg.optimizer, lr, st.step);
        }
        let params = layer
            .bias_mut()
            .iter_mut()
            .zip(&g.bias)
            .zip(v.bias.iter_mut().zip(s.bias.iter_mut()));
        for ((p, &gv), (m1, m2)) in params {
            *p -= step(gv, m1, m2, cfg.optimizer, lr, st.step);
        }
    }
}

fn step(g: f64, m1: &mut f64, m2: &mut f64, opt: Optimizer, lr: f64, t: i32) -> f64 {
    match opt {
        Optimizer::GradientDescent => lr * g,
        Optimizer::Momentum { beta } => {
            *m1 = beta * *m1 + g;
            lr * *m1
        }
        Optimizer::Adam { beta1, beta2, eps } => {
            *m1 = beta1 * *m1 + (1.0 - beta1) * g;
            *m2 = beta2 * *m2 + (1.0 - beta2) * g * g;
            let mh = *m1 / (1.0 - beta1.powi(t));
            let vh = *m2 / (1.0 - beta2.powi(t));
            lr * mh / (vh.sqrt() + eps)
        }
    }
}

/// Run calibration for exactly `cfg.max_iter` updates. Only the feature
/// extractor changes; the output layer is returned bit-identical.
pub fn calibrate(
    net: &Mlp,
    repair_boxes: &[InputBox],
    calibration_set: &Dataset,
    cfg: &CalibrationConfig,
) -> Result<(Mlp, CalibrationTrace)> {
    cfg.validate()?;
    let (prefix, _) = net.split()?;
    let ori = ori_diffs(&prefix, repair_boxes)?;
    let mut trace = CalibrationTrace {
        records: Vec::with_capacity(cfg.max_iter),
        final_losses: (0.0, 0.0),
        ori_diffs: ori.clone(),
    };
    let mut cur = net.clone();
    if cfg.max_iter == 0 {
        let l_fair = fairness_loss(&prefix, repair_boxes, &ori, cfg.ori_diff_floor)?;
        let l_bce = if calibration_set.is_empty() {
            0.0
        } else {
            bce_loss(net, calibration_set)?
        };
        trace.final_losses = (l_fair, l_bce);
        return Ok((cur, trace));
    }
    let np = net.layers().len() - 1;
    let mut st = OptState {
        velocity: net.layers()[..np].iter().map(LayerGrad::zeros).collect(),
        second: net.layers()[..np].iter().map(LayerGrad::zeros).collect(),
        step: 0,
    };
    for t in 0..cfg.max_iter {
        let (l_fair, l_bce, grads) = objective_and_gradient(&cur, repair_boxes, &ori, calibration_set, cfg)?;
        let total = l_fair + cfg.bce_weight * l_bce;
        if !total.is_finite()
            || grads
                .iter()
                .any(|g| g.weight.iter().chain(&g.bias).any(|v| !v.is_finite()))
        {
            return Err(Error::Diverged {
                iteration: t,
                value: total,
            });
        }
        trace.records.push((l_fair, l_bce));
        apply_update(&mut cur.layers_mut()[..np], &grads, cfg, &mut st);
        if cur.layers()[..np]
            .iter()
            .any(|l| l.weight().iter().chain(l.bias()).any(|v| !v.is_finite()))
        {
            return Err(Error::Diverged {
                iteration: t + 1,
                value: f64::NAN,
            });
        }
    }
    let (new_prefix, _) = cur.split()?;
    let l_fair = fairness_loss(&new_prefix, repair_boxes, &ori, cfg.ori_diff_floor)?;
    let l_bce = bce_loss(&cur, calibration_set)?;
    if !(l_fair + l_bce).is_finite() {
        return Err(Error::Diverged {
            iteration: cfg.max_iter,
            value: l_fair + l_bce,
        });
    }
    trace.final_losses = (l_fair, l_bce);
    Ok((cur, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::running;
    use crate::schema::Sample;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_data() -> Dataset {
        Dataset::new(vec![
            Sample {
                x: vec![4.0, 0.0],
                y: 1,
            },
            Sample {
                x: vec![8.0, 1.0],
                y: 0,
            },
            Sample {
                x: vec![1.0, -1.0],
                y: 1,
            },
        ])
    }

    #[test]
    fn fairness_loss_starts_at_one() {
        let (prefix, _) = running::network().split().unwrap();
        let boxes = vec![running::input_box()];
        let ori = ori_diffs(&prefix, &boxes).unwrap();
        assert_eq!(ori, vec![28.0]);
        assert_eq!(fairness_loss(&prefix, &boxes, &ori, 1e-9).unwrap(), 1.0);
    }

    #[test]
    fn constant_features_give_zero_loss() {
        let layer = AffineLayer::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]], vec![1.0, 2.0]).unwrap();
        let prefix = FeatureExtractor::new(vec![layer]).unwrap();
        let boxes = vec![running::input_box()];
        let ori = ori_diffs(&prefix, &boxes).unwrap();
        assert_eq!(ori, vec![0.0]);
        assert_eq!(fairness_loss(&prefix, &boxes, &ori, 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn bce_values() {
        let zero = Mlp::new(vec![
            AffineLayer::from_rows(&[vec![0.0, 0.0]], vec![0.0]).unwrap(),
            AffineLayer::from_rows(&[vec![0.0]], vec![0.0]).unwrap(),
        ])
        .unwrap();
        assert!((bce_loss(&zero, &toy_data()).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        let ten = Mlp::new(vec![
            AffineLayer::from_rows(&[vec![0.0, 0.0]], vec![0.0]).unwrap(),
            AffineLayer::from_rows(&[vec![0.0]], vec![10.0]).unwrap(),
        ])
        .unwrap();
        let one = Dataset::new(vec![Sample {
            x: vec![0.0, 0.0],
            y: 1,
        }]);
        let expect = -(1.0 / (1.0 + (-10.0f64).exp())).ln();
        assert!((bce_loss(&ten, &one).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 4.54e-5).abs() < 1e-7);
        let big = Mlp::new(vec![
            AffineLayer::from_rows(&[vec![0.0, 0.0]], vec![0.0]).unwrap(),
            AffineLayer::from_rows(&[vec![0.0]], vec![800.0]).unwrap(),
        ])
        .unwrap();
        assert!(bce_loss(&big, &one).unwrap() < 1e-300);
        assert!(bce_loss(&big, &Dataset::default()).is_err());
    }

    #[test]
    fn zero_iterations_is_identity() {
        let net = running::network();
        let (out, trace) = calibrate(
            &net,
            &[running::input_box()],
            &toy_data(),
            &CalibrationConfig {
                max_iter: 0,
                ..CalibrationConfig::default()
            },
        )
        .unwrap();
        assert_eq!(out, net);
        assert!(trace.records.is_empty());
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let net = running::network();
        let cfg = CalibrationConfig {
            max_iter: 5,
            learning_rate: 0.0,
            ..CalibrationConfig::default()
        };
        let (out, trace) = calibrate(&net, &[running::input_box()], &toy_data(), &cfg).unwrap();
        assert_eq!(out, net);
        assert_eq!(trace.records.len(), 5);
        assert_eq!(trace.records[0].0, 1.0);
    }

    #[test]
    fn running_example_calibration_shrinks_bounds_and_freezes_output() {
        let net = running::network();
        let cfg = CalibrationConfig {
            max_iter: 50,
            ..CalibrationConfig::default()
        };
        let (out, trace) = calibrate(&net, &[running::input_box()], &toy_data(), &cfg).unwrap();
        assert_eq!(out.final_layer(), net.final_layer());
        assert!(trace.final_losses.0 < trace.initial_fair());
        let csv = trace.to_csv();
        assert!(csv.starts_with("iter,l_fair,l_bce\n0,1,"));
        assert_eq!(csv.lines().count(), 52);
    }

    #[test]
    fn divergence_names_the_iteration() {
        let net = running::network();
        let huge = InputBox::new(vec![0.0, -1e308], vec![8.0, 1e308]).unwrap();
        match calibrate(&net, &[huge], &toy_data(), &CalibrationConfig::default()) {
            Err(Error::Diverged { iteration, .. }) => assert_eq!(iteration, 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    /// Central differences with step 1e-5 on a seeded 2x3x1 net over three boxes.
    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut rand_layer = |o: usize, i: usize| {
            let w = (0..o * i).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b = (0..o).map(|_| rng.random_range(-0.3..0.3)).collect();
            AffineLayer::new(o, i, w, b).unwrap()
        };
        let net = Mlp::new(vec![rand_layer(3, 2), rand_layer(1, 3)]).unwrap();
        let boxes = vec![
            InputBox::new(vec![0.0, -1.0], vec![1.0, 0.5]).unwrap(),
            InputBox::new(vec![-0.5, 0.0], vec![0.5, 2.0]).unwrap(),
            InputBox::new(vec![0.3, 0.3], vec![0.8, 0.9]).unwrap(),
        ];
        let data = toy_data();
        let cfg = CalibrationConfig::default();
        let (prefix, _) = net.split().unwrap();
        let ori = ori_diffs(&prefix, &boxes).unwrap();
        let (_, _, grads) = objective_and_gradient(&net, &boxes, &ori, &data, &cfg).unwrap();
        let total = |n: &Mlp| {
            let (f, b, _) = objective_and_gradient(n, &boxes, &ori, &data, &cfg).unwrap();
            f + b
        };
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let layer0 = &net.layers()[0];
        for idx in 0..layer0.weight().len() + layer0.bias().len() {
            let bump = |delta: f64| {
                let mut n = net.clone();
                let l = &mut n.layers_mut()[0];
                if idx < l.weight().len() {
                    l.weight_mut()[idx] += delta;
                } else {
                    let k = idx - l.weight().len();
                    l.bias_mut()[k] += delta;
                }
                n
            };
            let fd = (total(&bump(h)) - total(&bump(-h))) / (2.0 * h);
            let an = if idx < layer0.weight().len() {
                grads[0].weight[idx]
            } else {
                grads[0].bias[idx - layer0.weight().len()]
            };
            if an.abs() > 1e-6 {
                worst = worst.max((an - fd).abs() / an.abs().max(fd.abs()));
            }
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }
}
