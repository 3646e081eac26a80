//! Sound output bounds over an input box.
//!
//! [`ibp_concrete`] propagates intervals layer by layer. [`symbolic_bounds`]
//! back-substitutes linear relaxations of every ReLU down to the input, giving
//! per-feature linear lower and upper functions of `x`. Intermediate
//! pre-activation bounds for the relaxations come from interval propagation.

use crate::error::{Error, Result};
use crate::model::{AffineLayer, FeatureExtractor, Mlp};
use crate::schema::InputBox;

/// Pre-activations inside `(-UNSTABLE_TOL, UNSTABLE_TOL)` at an endpoint count
/// as stable, which keeps the triangle slope away from `0 / 0`.
pub const UNSTABLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerBounds {
    pub pre_lower: Vec<f64>,
    pub pre_upper: Vec<f64>,
    pub post_lower: Vec<f64>,
    pub post_upper: Vec<f64>,
}

impl LayerBounds {
    pub fn is_unstable(&self, j: usize) -> bool {
        is_unstable(self.pre_lower[j], self.pre_upper[j])
    }
}

pub fn is_unstable(l: f64, u: f64) -> bool {
    l < -UNSTABLE_TOL && u > UNSTABLE_TOL
}

/// Interval bounds for every hidden layer of a feature extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcreteBounds {
    pub layers: Vec<LayerBounds>,
}

impl ConcreteBounds {
    /// Lower bounds of the extracted features.
    pub fn lower(&self) -> &[f64] {
        &self.layers.last().expect("at least one layer").post_lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.layers.last().expect("at least one layer").post_upper
    }

    /// `sum_j (upper_j - lower_j)`, the L1 width of the feature box.
    pub fn width_l1(&self) -> f64 {
        self.lower().iter().zip(self.upper()).map(|(l, u)| u - l).sum()
    }
}

/// Interval image of an affine map.
pub fn ibp_affine(layer: &AffineLayer, lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut out_lo = layer.bias().to_vec();
    let mut out_hi = layer.bias().to_vec();
    for j in 0..layer.out_dim() {
        for (i, &w) in layer.row(j).iter().enumerate() {
            if w > 0.0 {
                out_lo[j] += w * lo[i];
                out_hi[j] += w * hi[i];
            } else if w < 0.0 {
                out_lo[j] += w * hi[i];
                out_hi[j] += w * lo[i];
            }
        }
    }
    (out_lo, out_hi)
}

pub fn ibp_concrete(prefix: &FeatureExtractor, b: &InputBox) -> Result<ConcreteBounds> {
    if b.dim() != prefix.input_dim() {
        return Err(Error::dim("box vs network input", prefix.input_dim(), b.dim()));
    }
    let mut lo = b.lower.clone();
    let mut hi = b.upper.clone();
    let mut layers = Vec::with_capacity(prefix.layers().len());
    for layer in prefix.layers() {
        let (pl, pu) = ibp_affine(layer, &lo, &hi);
        lo = pl.iter().map(|v| v.max(0.0)).collect();
        hi = pu.iter().map(|v| v.max(0.0)).collect();
        layers.push(LayerBounds {
            pre_lower: pl,
            pre_upper: pu,
            post_lower: lo.clone(),
            post_upper: hi.clone(),
        });
    }
    Ok(ConcreteBounds { layers })
}

/// Interval bounds on the network output.
pub fn ibp_output(net: &Mlp, b: &InputBox) -> Result<(f64, f64)> {
    let (prefix, last) = net.split()?;
    let cb = ibp_concrete(&prefix, b)?;
    let (lo, hi) = ibp_affine(&last, cb.lower(), cb.upper());
    Ok((lo[0], hi[0]))
}

/// `a_lo x + c_lo <= h(x) <= a_hi x + c_hi` for every `x` in the box.
/// Coefficient matrices are row-major `features x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicBounds {
    pub in_dim: usize,
    pub out_dim: usize,
    pub a_lo: Vec<f64>,
    pub c_lo: Vec<f64>,
    pub a_hi: Vec<f64>,
    pub c_hi: Vec<f64>,
}

impl SymbolicBounds {
    pub fn lower_row(&self, j: usize) -> &[f64] {
        &self.a_lo[j * self.in_dim..(j + 1) * self.in_dim]
    }

    pub fn upper_row(&self, j: usize) -> &[f64] {
        &self.a_hi[j * self.in_dim..(j + 1) * self.in_dim]
    }

    /// Evaluate both linear functions at `x`.
    pub fn eval(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let lo = (0..self.out_dim)
            .map(|j| self.c_lo[j] + crate::model::dot(self.lower_row(j), x))
            .collect();
        let hi = (0..self.out_dim)
            .map(|j| self.c_hi[j] + crate::model::dot(self.upper_row(j), x))
            .collect();
        (lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SymbolicOptions {
    /// Use slope 1 instead of 0 for the lower line of an unstable ReLU when
    /// `u > -l`. Off by default; with it on, concretized bounds are no longer
    /// guaranteed to sit inside the interval bounds.
    pub adaptive_lower_slope: bool,
}

pub fn symbolic_bounds(prefix: &FeatureExtractor, b: &InputBox) -> Result<SymbolicBounds> {
    symbolic_bounds_with(prefix, b, SymbolicOptions::default())
}

pub fn symbolic_bounds_with(prefix: &FeatureExtractor, b: &InputBox, opts: SymbolicOptions) -> Result<SymbolicBounds> {
    let cb = ibp_concrete(prefix, b)?;
    let m = prefix.input_dim();
    let d = prefix.feature_dim();
    let mut sb = SymbolicBounds {
        in_dim: m,
        out_dim: d,
        a_lo: Vec::with_capacity(d * m),
        c_lo: Vec::with_capacity(d),
        a_hi: Vec::with_capacity(d * m),
        c_hi: Vec::with_capacity(d),
    };
    for j in 0..d {
        let mut unit = vec![0.0; d];
        unit[j] = 1.0;
        let (a, c) = back_substitute(prefix, &cb, unit.clone(), 0.0, Side::Lower, opts);
        sb.a_lo.extend(a);
        sb.c_lo.push(c);
        let (a, c) = back_substitute(prefix, &cb, unit, 0.0, Side::Upper, opts);
        sb.a_hi.extend(a);
        sb.c_hi.push(c);
    }
    Ok(sb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Lower,
    Upper,
}

/// Linear relaxation `slope * z + offset` of `ReLU(z)` for `z in [l, u]`.
fn relu_line(l: f64, u: f64, side: Side, opts: SymbolicOptions) -> (f64, f64) {
    if u <= UNSTABLE_TOL {
        (0.0, 0.0)
    } else if l >= -UNSTABLE_TOL {
        (1.0, 0.0)
    } else {
        match side {
            Side::Upper => {
                let s = u / (u - l);
                (s, -s * l)
            }
            Side::Lower if opts.adaptive_lower_slope && u > -l => (1.0, 0.0),
            Side::Lower => (0.0, 0.0),
        }
    }
}

/// Bound `coef . h + c`, where `h` is the feature vector, by a linear function
/// of the input. Returns the input coefficients and the constant.
fn back_substitute(
    prefix: &FeatureExtractor,
    cb: &ConcreteBounds,
    mut coef: Vec<f64>,
    mut c: f64,
    side: Side,
    opts: SymbolicOptions,
) -> (Vec<f64>, f64) {
    for (k, layer) in prefix.layers().iter().enumerate().rev() {
        let lb = &cb.layers[k];
        // Through the ReLU: pick the line that bounds in the requested direction.
        for (i, a) in coef.iter_mut().enumerate() {
            if *a == 0.0 {
                continue;
            }
            let want = match (side, *a > 0.0) {
                (Side::Upper, true) | (Side::Lower, false) => Side::Upper,
                _ => Side::Lower,
            };
            let (s, t) = relu_line(lb.pre_lower[i], lb.pre_upper[i], want, opts);
            c += *a * t;
            *a *= s;
        }
        // Through the affine map.
        c += crate::model::dot(&coef, layer.bias());
        let mut next = vec![0.0; layer.in_dim()];
        for (j, &a) in coef.iter().enumerate() {
            if a != 0.0 {
                for (n, &w) in next.iter_mut().zip(layer.row(j)) {
                    *n += a * w;
                }
            }
        }
        coef = next;
    }
    (coef, c)
}

/// Minimum and maximum of `a . x + c` over the box.
pub fn linear_range(a: &[f64], c: f64, b: &InputBox) -> (f64, f64) {
    let mut lo = c;
    let mut hi = c;
    for (k, &ak) in a.iter().enumerate() {
        let (p, q) = (ak * b.lower[k], ak * b.upper[k]);
        lo += p.min(q);
        hi += p.max(q);
    }
    (lo, hi)
}

/// Interval evaluation of symbolic bounds over a box: `(lower, upper)`.
pub fn concretize(sb: &SymbolicBounds, b: &InputBox) -> Result<(Vec<f64>, Vec<f64>)> {
    if b.dim() != sb.in_dim {
        return Err(Error::dim("box vs symbolic bounds", sb.in_dim, b.dim()));
    }
    let lo = (0..sb.out_dim)
        .map(|j| linear_range(sb.lower_row(j), sb.c_lo[j], b).0)
        .collect();
    let hi = (0..sb.out_dim)
        .map(|j| linear_range(sb.upper_row(j), sb.c_hi[j], b).1)
        .collect();
    Ok((lo, hi))
}

/// Output bounds from back-substituting the whole network, final layer
/// included, so correlations between features are kept.
pub fn symbolic_output_bounds(net: &Mlp, b: &InputBox) -> Result<(f64, f64)> {
    let (prefix, last) = net.split()?;
    let cb = ibp_concrete(&prefix, b)?;
    let opts = SymbolicOptions::default();
    let w = last.row(0).to_vec();
    let (a, c) = back_substitute(&prefix, &cb, w.clone(), last.bias()[0], Side::Lower, opts);
    let lo = linear_range(&a, c, b).0;
    let (a, c) = back_substitute(&prefix, &cb, w, last.bias()[0], Side::Upper, opts);
    let hi = linear_range(&a, c, b).1;
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::running;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn running_interval_bounds() {
        let (prefix, _) = running::network().split().unwrap();
        let cb = ibp_concrete(&prefix, &running::input_box()).unwrap();
        let l = &cb.layers[0];
        assert_eq!(l.pre_lower, vec![-6.0, -6.0]);
        assert_eq!(l.pre_upper, vec![14.0, 14.0]);
        assert_eq!(cb.lower(), &[0.0, 0.0]);
        assert_eq!(cb.upper(), &[14.0, 14.0]);
        let (lo, hi) = ibp_output(&running::network(), &running::input_box()).unwrap();
        assert!(close(lo, -1.8) && close(hi, 1.0), "{lo} {hi}");
    }

    #[test]
    fn point_box_matches_forward() {
        let net = running::network();
        let (prefix, _) = net.split().unwrap();
        let x = [8.0, 1.0];
        let cb = ibp_concrete(&prefix, &InputBox::point(&x)).unwrap();
        let h = prefix.forward(&x).unwrap();
        assert_eq!(cb.lower(), h.as_slice());
        assert_eq!(cb.upper(), h.as_slice());
        let sb = symbolic_bounds(&prefix, &InputBox::point(&x)).unwrap();
        let (lo, hi) = sb.eval(&x);
        for j in 0..2 {
            assert!(close(lo[j], h[j]) && close(hi[j], h[j]));
        }
    }

    #[test]
    fn running_symbolic_bounds() {
        let (prefix, _) = running::network().split().unwrap();
        let sb = symbolic_bounds(&prefix, &running::input_box()).unwrap();
        let expect_hi = [[0.7, 4.2], [0.7, -4.2]];
        for j in 0..2 {
            assert!(sb.lower_row(j).iter().all(|&a| a == 0.0));
            assert_eq!(sb.c_lo[j], 0.0);
            for k in 0..2 {
                assert!(close(sb.upper_row(j)[k], expect_hi[j][k]));
            }
            assert!(close(sb.c_hi[j], 4.2));
        }
        let (lo, hi) = concretize(&sb, &running::input_box()).unwrap();
        assert_eq!(lo, vec![0.0, 0.0]);
        assert!(close(hi[0], 14.0) && close(hi[1], 14.0));
        let (out_lo, out_hi) = symbolic_output_bounds(&running::network(), &running::input_box()).unwrap();
        assert!((out_lo + 0.96).abs() < 1e-9, "{out_lo}");
        assert!(out_hi <= 1.0 + 1e-12);
    }

    #[test]
    fn stable_active_neuron_is_exact() {
        let layer = AffineLayer::from_rows(&[vec![2.0, -1.0]], vec![5.0]).unwrap();
        let prefix = FeatureExtractor::new(vec![layer]).unwrap();
        let b = InputBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let sb = symbolic_bounds(&prefix, &b).unwrap();
        assert_eq!(sb.a_lo, vec![2.0, -1.0]);
        assert_eq!(sb.a_hi, vec![2.0, -1.0]);
        assert_eq!((sb.c_lo[0], sb.c_hi[0]), (5.0, 5.0));
    }

    #[test]
    fn zero_coefficients_concretize_to_constants() {
        let sb = SymbolicBounds {
            in_dim: 2,
            out_dim: 1,
            a_lo: vec![0.0, 0.0],
            c_lo: vec![-3.0],
            a_hi: vec![0.0, 0.0],
            c_hi: vec![4.0],
        };
        let (lo, hi) = concretize(&sb, &running::input_box()).unwrap();
        assert_eq!((lo, hi), (vec![-3.0], vec![4.0]));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (prefix, _) = running::network().split().unwrap();
        let b = InputBox::new(vec![0.0], vec![1.0]).unwrap();
        assert!(matches!(ibp_concrete(&prefix, &b), Err(Error::Dimension { .. })));
        assert!(symbolic_bounds(&prefix, &b).is_err());
    }

    fn random_net(seed: u64, dims: &[usize]) -> Mlp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let weight = (0..w[0] * w[1]).map(|_| rng.random_range(-1.0..1.0)).collect();
                let bias = (0..w[1]).map(|_| rng.random_range(-0.5..0.5)).collect();
                AffineLayer::new(w[1], w[0], weight, bias).unwrap()
            })
            .collect();
        Mlp::new(layers).unwrap()
    }

    fn random_box(rng: &mut ChaCha8Rng, m: usize) -> InputBox {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for _ in 0..m {
            let a: f64 = rng.random_range(-2.0..2.0);
            let w: f64 = rng.random_range(0.0..2.0);
            lo.push(a);
            hi.push(a + w);
        }
        InputBox::new(lo, hi).unwrap()
    }

    #[test]
    fn sampled_soundness() {
        for seed in 0..5u64 {
            let net = random_net(seed, &[3, 6, 5, 1]);
            let (prefix, _) = net.split().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let b = random_box(&mut rng, 3);
            let cb = ibp_concrete(&prefix, &b).unwrap();
            let sb = symbolic_bounds(&prefix, &b).unwrap();
            for _ in 0..10_000 {
                let x = b.sample(&mut rng);
                let h = prefix.forward(&x).unwrap();
                let (sl, su) = sb.eval(&x);
                for j in 0..h.len() {
                    assert!(cb.lower()[j] - 1e-9 <= h[j] && h[j] <= cb.upper()[j] + 1e-9);
                    assert!(sl[j] - 1e-9 <= h[j] && h[j] <= su[j] + 1e-9);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn symbolic_is_inside_interval(seed in any::<u64>()) {
            let net = random_net(seed, &[3, 5, 4, 1]);
            let (prefix, _) = net.split().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let b = random_box(&mut rng, 3);
            let cb = ibp_concrete(&prefix, &b).unwrap();
            let (lo, hi) = concretize(&symbolic_bounds(&prefix, &b).unwrap(), &b).unwrap();
            for j in 0..lo.len() {
                let tol = 1e-9 * (1.0 + cb.upper()[j].abs());
                prop_assert!(lo[j] >= cb.lower()[j] - tol);
                prop_assert!(hi[j] <= cb.upper()[j] + tol);
            }
            let (ol, oh) = symbolic_output_bounds(&net, &b).unwrap();
            let (il, ih) = ibp_output(&net, &b).unwrap();
            prop_assert!(ol >= il - 1e-9 && oh <= ih + 1e-9);
        }

        #[test]
        fn interval_bounds_are_monotone(seed in any::<u64>(), grow in 0.0f64..1.0) {
            let net = random_net(seed, &[3, 5, 4, 1]);
            let (prefix, _) = net.split().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x55);
            let small = random_box(&mut rng, 3);
            let big = InputBox::new(
                small.lower.iter().map(|v| v - grow).collect(),
                small.upper.iter().map(|v| v + grow).collect(),
            ).unwrap();
            let a = ibp_concrete(&prefix, &small).unwrap();
            let bb = ibp_concrete(&prefix, &big).unwrap();
            for (la, lb) in a.layers.iter().zip(&bb.layers) {
                for j in 0..la.post_lower.len() {
                    prop_assert!(lb.pre_lower[j] <= la.pre_lower[j] + 1e-12);
                    prop_assert!(la.pre_upper[j] <= lb.pre_upper[j] + 1e-12);
                }
            }
        }

        #[test]
        fn feature_distance_is_bounded_by_width(seed in any::<u64>()) {
            let net = random_net(seed, &[3, 5, 4, 1]);
            let (prefix, _) = net.split().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
            let b = random_box(&mut rng, 3);
            let width = ibp_concrete(&prefix, &b).unwrap().width_l1();
            for _ in 0..50 {
                let h = prefix.forward(&b.sample(&mut rng)).unwrap();
                let g = prefix.forward(&b.sample(&mut rng)).unwrap();
                let dist: f64 = h.iter().zip(&g).map(|(a, c)| (a - c).abs()).sum();
                prop_assert!(dist <= width + 1e-9);
            }
        }
    }
}
