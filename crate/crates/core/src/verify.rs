//! Exact verification of the output range over a box, fairness
//! certificates, and the CUR / IDI metrics.
//!
//! The range is computed by two MILPs with one binary per unstable hidden
//! neuron, using interval bounds as per-neuron big-M constants.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bounds::{ibp_affine, is_unstable};
use crate::error::{Error, Result};
use crate::model::{relu, Mlp};
use crate::schema::{AttributeSchema, Dataset, InputBox, Neighborhood};
use crate::solver::{solve_milp, MilpLimits, MilpStatus, Problem, Sense};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub limits: MilpLimits,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            limits: MilpLimits {
                gap: 1e-9,
                ..MilpLimits::default()
            },
        }
    }
}

/// Exact range of the network output over a box.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactRange {
    /// Best value found; attained at `argmin` up to solver tolerance.
    pub min: f64,
    pub max: f64,
    /// Proven bounds: the true minimum is at least `min_bound`.
    pub min_bound: f64,
    pub max_bound: f64,
    pub argmin: Vec<f64>,
    pub argmax: Vec<f64>,
    pub nodes: usize,
    pub binaries: usize,
}

/// Neuron representation inside the range program.
#[derive(Clone, Copy)]
enum Unit {
    Zero,
    Var(usize),
}

struct RangeProgram {
    problem: Problem,
    inputs: Vec<usize>,
    /// Output as `offset + sum coef * var`.
    output: Vec<(usize, f64)>,
    offset: f64,
    binaries: usize,
}

fn build_range_program(net: &Mlp, b: &InputBox) -> Result<RangeProgram> {
    if b.dim() != net.input_dim() {
        return Err(Error::dim("box vs network input", net.input_dim(), b.dim()));
    }
    let mut p = Problem::new();
    let inputs: Vec<usize> = (0..b.dim())
        .map(|i| p.add_continuous(format!("x_{i}"), b.lower[i], b.upper[i]))
        .collect();
    let mut units: Vec<Unit> = inputs.iter().map(|&v| Unit::Var(v)).collect();
    let mut lo = b.lower.clone();
    let mut hi = b.upper.clone();
    let layers = net.layers();
    let last = layers.len() - 1;
    let mut binaries = 0;
    for (k, layer) in layers[..last].iter().enumerate() {
        let (pl, pu) = ibp_affine(layer, &lo, &hi);
        let mut next = Vec::with_capacity(layer.out_dim());
        for j in 0..layer.out_dim() {
            let (l, u) = (pl[j], pu[j]);
            // z = bias + sum w * unit
            let mut z: Vec<(usize, f64)> = Vec::new();
            for (i, &w) in layer.row(j).iter().enumerate() {
                if let Unit::Var(v) = units[i] {
                    if w != 0.0 {
                        z.push((v, w));
                    }
                }
            }
            let bias = layer.bias()[j];
            if is_unstable(l, u) {
                let h = p.add_continuous(format!("h_{k}_{j}"), 0.0, u);
                let a = p.add_binary(format!("a_{k}_{j}"));
                binaries += 1;
                // h >= z
                let mut c: Vec<(usize, f64)> = vec![(h, 1.0)];
                c.extend(z.iter().map(|&(v, w)| (v, -w)));
                p.add_con(format!("ge_{k}_{j}"), c.clone(), Sense::Ge, bias);
                // h <= z - l (1 - a)
                c.push((a, -l));
                p.add_con(format!("le_{k}_{j}"), c, Sense::Le, bias - l);
                // h <= u a
                p.add_con(format!("on_{k}_{j}"), vec![(h, 1.0), (a, -u)], Sense::Le, 0.0);
                next.push(Unit::Var(h));
            } else if u <= 1e-12 {
                next.push(Unit::Zero);
            } else {
                let h = p.add_continuous(format!("h_{k}_{j}"), l.min(0.0), u);
                let mut c: Vec<(usize, f64)> = vec![(h, 1.0)];
                c.extend(z.iter().map(|&(v, w)| (v, -w)));
                p.add_con(format!("eq_{k}_{j}"), c, Sense::Eq, bias);
                next.push(Unit::Var(h));
            }
        }
        units = next;
        lo = pl.iter().map(|&v| relu(v)).collect();
        hi = pu.iter().map(|&v| relu(v)).collect();
    }
    let out = &layers[last];
    let output = out
        .row(0)
        .iter()
        .zip(&units)
        .filter_map(|(&w, u)| match u {
            Unit::Var(v) if w != 0.0 => Some((*v, w)),
            _ => None,
        })
        .collect();
    Ok(RangeProgram {
        problem: p,
        inputs,
        output,
        offset: out.bias()[0],
        binaries,
    })
}

/// Min and max of the network output over `b`, solved exactly.
pub fn exact_range(net: &Mlp, b: &InputBox) -> Result<ExactRange> {
    exact_range_with(net, b, &VerifyConfig::default())
}

pub fn exact_range_with(net: &Mlp, b: &InputBox, cfg: &VerifyConfig) -> Result<ExactRange> {
    let rp = build_range_program(net, b)?;
    let mut results = Vec::with_capacity(2);
    for sign in [1.0, -1.0] {
        let mut prob = rp.problem.clone();
        prob.set_objective(rp.output.iter().map(|&(v, w)| (v, sign * w)).collect());
        prob.objective_offset = sign * rp.offset;
        let sol = solve_milp(&prob, &cfg.limits)?;
        match sol.status {
            MilpStatus::Optimal => {}
            MilpStatus::Infeasible => {
                return Err(Error::Solver(
                    "range program reported infeasible on a non-empty box".into(),
                ))
            }
            MilpStatus::Timeout => {
                let (lower, upper) = if sign > 0.0 {
                    (sol.best_bound, sol.objective)
                } else {
                    (-sol.objective, -sol.best_bound)
                };
                return Err(Error::SolverLimit {
                    reason: format!("exact range after {} nodes", sol.nodes),
                    lower,
                    upper,
                });
            }
        }
        let values = sol.values()?;
        let x: Vec<f64> = rp
            .inputs
            .iter()
            .enumerate()
            .map(|(i, &v)| values[v].clamp(b.lower[i], b.upper[i]))
            .collect();
        results.push((
            sign * sol.objective,
            sign * sol.best_bound.min(sol.objective),
            x,
            sol.nodes,
        ));
    }
    let (max_res, min_res) = (results.pop().unwrap(), results.pop().unwrap());
    Ok(ExactRange {
        min: min_res.0,
        max: max_res.0,
        min_bound: min_res.1,
        max_bound: max_res.1,
        argmin: min_res.2,
        argmax: max_res.2,
        nodes: min_res.3 + max_res.3,
        binaries: rp.binaries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FairStatus {
    CertifiedFair,
    CertifiedUnfair,
    /// The range straddles zero only within solver tolerance and no
    /// candidate point flips the prediction under plain evaluation.
    Undecided,
}

impl fmt::Display for FairStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FairStatus::CertifiedFair => "certified-fair",
            FairStatus::CertifiedUnfair => "certified-unfair",
            FairStatus::Undecided => "undecided",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairnessCertificate {
    pub status: FairStatus,
    pub range: ExactRange,
    /// A point in the box classified differently from the input. Set only
    /// for [`FairStatus::CertifiedUnfair`].
    pub witness: Option<Vec<f64>>,
    pub output: f64,
}

impl FairnessCertificate {
    pub fn is_fair(&self) -> bool {
        self.status == FairStatus::CertifiedFair
    }
}

/// Certify whether every point of the neighbourhood of `x` gets the same class.
pub fn is_fair(net: &Mlp, schema: &AttributeSchema, x: &[f64]) -> Result<FairnessCertificate> {
    is_fair_with(net, schema, x, &VerifyConfig::default())
}

pub fn is_fair_with(net: &Mlp, schema: &AttributeSchema, x: &[f64], cfg: &VerifyConfig) -> Result<FairnessCertificate> {
    let b = schema.neighborhood(x)?;
    certify_box(net, &b, x, cfg)
}

/// As [`is_fair`] for an explicit box containing `x`.
pub fn certify_box(net: &Mlp, b: &InputBox, x: &[f64], cfg: &VerifyConfig) -> Result<FairnessCertificate> {
    let output = net.forward(x)?;
    let range = exact_range_with(net, b, cfg)?;
    if range.min_bound >= 0.0 || range.max_bound < 0.0 {
        return Ok(FairnessCertificate {
            status: FairStatus::CertifiedFair,
            range,
            witness: None,
            output,
        });
    }
    let candidate = if output >= 0.0 { &range.argmin } else { &range.argmax };
    let flips = (net.forward(candidate)? >= 0.0) != (output >= 0.0);
    let (status, witness) = if flips {
        (FairStatus::CertifiedUnfair, Some(candidate.clone()))
    } else {
        (FairStatus::Undecided, None)
    };
    Ok(FairnessCertificate {
        status,
        range,
        witness,
        output,
    })
}

/// Points per continuous axis when brute force falls back to a grid.
pub const BRUTE_FORCE_GRID: usize = 11;
/// Largest grid brute force will evaluate.
pub const BRUTE_FORCE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    pub fair: bool,
    /// True when every point of a finite neighbourhood was checked. A grid
    /// over continuous dimensions is not a certificate.
    pub exhaustive: bool,
    pub checked: usize,
    pub witness: Option<Vec<f64>>,
}

/// Evaluate the network on every neighbourhood point, or on a
/// `BRUTE_FORCE_GRID`-per-axis grid when some varying dimension is continuous.
pub fn brute_force_fair(net: &Mlp, schema: &AttributeSchema, x: &[f64]) -> Result<BruteForce> {
    let (points, exhaustive) = match schema.enumerate_neighborhood_capped(x, BRUTE_FORCE_CAP)? {
        Neighborhood::Finite(p) => (p, true),
        Neighborhood::Infinite => match schema.grid_neighborhood(x, BRUTE_FORCE_GRID, BRUTE_FORCE_CAP)? {
            Some(p) => (p, false),
            None => {
                return Err(Error::Input(format!(
                    "neighbourhood grid exceeds {BRUTE_FORCE_CAP} points"
                )))
            }
        },
    };
    let class = net.forward(x)? >= 0.0;
    for p in &points {
        if (net.forward_unchecked(p) >= 0.0) != class {
            return Ok(BruteForce {
                fair: false,
                exhaustive,
                checked: points.len(),
                witness: Some(p.clone()),
            });
        }
    }
    Ok(BruteForce {
        fair: true,
        exhaustive,
        checked: points.len(),
        witness: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CurReport {
    pub fair: usize,
    pub unfair: usize,
    pub undecided: usize,
}

impl CurReport {
    pub fn total(&self) -> usize {
        self.fair + self.unfair + self.undecided
    }

    /// Share of inputs not certified fair.
    pub fn rate(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            (self.unfair + self.undecided) as f64 / self.total() as f64
        }
    }
}

/// Certified unfairness rate over `points`.
pub fn cur(net: &Mlp, schema: &AttributeSchema, points: &[Vec<f64>], cfg: &VerifyConfig) -> Result<CurReport> {
    let mut r = CurReport::default();
    for x in points {
        match is_fair_with(net, schema, x, cfg)?.status {
            FairStatus::CertifiedFair => r.fair += 1,
            FairStatus::CertifiedUnfair => r.unfair += 1,
            FairStatus::Undecided => r.undecided += 1,
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdiMode {
    /// Enumerate finite neighbourhoods; sample `k` points from the others.
    Enumerate { k: usize, seed: u64 },
    /// Always sample `k` points per neighbourhood.
    Sample { k: usize, seed: u64 },
}

impl Default for IdiMode {
    fn default() -> Self {
        IdiMode::Enumerate { k: 100, seed: 0 }
    }
}

/// Fraction of `points` with a neighbour that flips the predicted class.
/// Sampling can only miss unfair points, so it never overstates the rate.
pub fn idi_rate(net: &Mlp, schema: &AttributeSchema, points: &[Vec<f64>], mode: IdiMode) -> Result<f64> {
    if points.is_empty() {
        return Ok(0.0);
    }
    let mut unfair = 0usize;
    for (i, x) in points.iter().enumerate() {
        let class = net.forward(x)? >= 0.0;
        let flips = |p: &[f64]| (net.forward_unchecked(p) >= 0.0) != class;
        let (k, seed, enumerate) = match mode {
            IdiMode::Enumerate { k, seed } => (k, seed, true),
            IdiMode::Sample { k, seed } => (k, seed, false),
        };
        let finite = if enumerate {
            match schema.enumerate_neighborhood(x)? {
                Neighborhood::Finite(p) => Some(p),
                Neighborhood::Infinite => None,
            }
        } else {
            None
        };
        let hit = match finite {
            Some(ps) => ps.iter().any(|p| flips(p)),
            None => {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64));
                let mut hit = false;
                for _ in 0..k {
                    if flips(&schema.sample_neighbor(x, &mut rng)?) {
                        hit = true;
                        break;
                    }
                }
                hit
            }
        };
        unfair += usize::from(hit);
    }
    Ok(unfair as f64 / points.len() as f64)
}

/// `n` uniform draws from the schema's input domain.
pub fn sample_input_space(schema: &AttributeSchema, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| schema.sample_input(&mut rng)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsConfig {
    pub idi: IdiMode,
    /// Number of uniform input-space points for the space IDI rate.
    pub space_points: usize,
    pub space_seed: u64,
    pub verify: VerifyConfig,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            idi: IdiMode::default(),
            space_points: 2000,
            space_seed: 0,
            verify: VerifyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub cur: CurReport,
    pub idi_data: f64,
    pub idi_space: f64,
    pub data_points: usize,
    pub space_points: usize,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str =
        "accuracy,cur,unfair,undecided,repair_points,idi_d,idi_s,data_points,space_points";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.accuracy,
            self.cur.rate(),
            self.cur.unfair,
            self.cur.undecided,
            self.cur.total(),
            self.idi_data,
            self.idi_space,
            self.data_points,
            self.space_points
        )
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", Self::CSV_HEADER, self.csv_row())
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>10}", "metric", "value")?;
        writeln!(f, "{:<10} {:>10.4}", "accuracy", self.accuracy)?;
        writeln!(
            f,
            "{:<10} {:>10.4}  ({} unfair, {} undecided of {})",
            "CUR",
            self.cur.rate(),
            self.cur.unfair,
            self.cur.undecided,
            self.cur.total()
        )?;
        writeln!(
            f,
            "{:<10} {:>10.4}  ({} points)",
            "IDI-D", self.idi_data, self.data_points
        )?;
        write!(
            f,
            "{:<10} {:>10.4}  ({} points)",
            "IDI-S", self.idi_space, self.space_points
        )
    }
}

/// Accuracy and IDI over `data`, CUR over `repair_points`, IDI over uniform input-space samples.
pub fn metrics(
    net: &Mlp,
    schema: &AttributeSchema,
    repair_points: &[Vec<f64>],
    data: &Dataset,
    cfg: &MetricsConfig,
) -> Result<MetricsReport> {
    let accuracy = crate::synth::accuracy(net, data)?;
    let cur = cur(net, schema, repair_points, &cfg.verify)?;
    let inputs = data.inputs();
    let idi_data = idi_rate(net, schema, &inputs, cfg.idi)?;
    let space = sample_input_space(schema, cfg.space_points, cfg.space_seed);
    let idi_space = idi_rate(net, schema, &space, cfg.idi)?;
    Ok(MetricsReport {
        accuracy,
        cur,
        idi_data,
        idi_space,
        data_points: inputs.len(),
        space_points: space.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::running;

    #[test]
    fn running_example_range() {
        let net = running::network();
        let r = exact_range(&net, &running::input_box()).unwrap();
        // The output is 1 - 0.1 (relu(x1 + x2) + relu(x1 - x2)), which is
        // 1 - 0.2 x1 on the box.
        assert!((r.min + 0.6).abs() < 1e-9, "{}", r.min);
        assert!((r.max - 1.0).abs() < 1e-9, "{}", r.max);
        assert!(r.min_bound <= r.min + 1e-12);
        assert!((net.forward(&r.argmin).unwrap() - r.min).abs() < 1e-7);
    }

    #[test]
    fn running_example_is_unfair_with_a_real_witness() {
        let net = running::network();
        let c = is_fair(&net, &running::schema(), &running::point()).unwrap();
        assert_eq!(c.status, FairStatus::CertifiedUnfair);
        let w = c.witness.unwrap();
        assert!(running::input_box().contains(&w, 1e-9));
        assert!(net.forward(&w).unwrap() < 0.0);
        assert!(
            !brute_force_fair(&net, &running::schema(), &running::point())
                .unwrap()
                .fair
        );
    }

    #[test]
    fn constant_network_is_fair() {
        let net = Mlp::new(vec![
            crate::AffineLayer::from_rows(&[vec![1.0, 0.0]], vec![0.0]).unwrap(),
            crate::AffineLayer::from_rows(&[vec![0.0]], vec![0.5]).unwrap(),
        ])
        .unwrap();
        let c = is_fair(&net, &running::schema(), &running::point()).unwrap();
        assert!(c.is_fair());
        let b = brute_force_fair(&net, &running::schema(), &running::point()).unwrap();
        assert!(b.fair && b.exhaustive && b.checked == 27);
    }

    #[test]
    fn idi_sampling_never_exceeds_enumeration() {
        let net = running::network();
        let schema = running::schema();
        let pts: Vec<Vec<f64>> = (0..=8).map(|v| vec![v as f64, 0.0]).collect();
        let e = idi_rate(&net, &schema, &pts, IdiMode::default()).unwrap();
        let s = idi_rate(&net, &schema, &pts, IdiMode::Sample { k: 3, seed: 7 }).unwrap();
        assert!(s <= e);
        assert_eq!(e, 1.0);
        let again = idi_rate(&net, &schema, &pts, IdiMode::Sample { k: 3, seed: 7 }).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn metrics_table_and_csv() {
        let net = running::network();
        let schema = running::schema();
        let data = Dataset::new(vec![crate::schema::Sample {
            x: vec![4.0, 0.0],
            y: 1,
        }]);
        let cfg = MetricsConfig {
            space_points: 20,
            ..MetricsConfig::default()
        };
        let m = metrics(&net, &schema, &[running::point()], &data, &cfg).unwrap();
        assert_eq!(m.cur.rate(), 1.0);
        assert!(m.to_csv().starts_with(MetricsReport::CSV_HEADER));
        assert!(m.to_string().contains("CUR"));
    }
}
