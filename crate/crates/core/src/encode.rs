//! Repair programs for the final linear layer.
//!
//! Both programs minimise `|dW|_1 + |db|` subject to: for every repair input
//! `i`, the repaired output is non-negative on the whole neighbourhood
//! (`Z_i = 1`) or negative on it (`Z_i = 0`). They differ in how the output
//! range is bounded:
//!
//! * [`build_naive`] uses interval feature bounds `lo <= h <= hi`. Per
//!   feature, `P_i_j` and `Q_i_j` bound `(W_j + dW_j) h_j` from below and
//!   above at the two interval endpoints.
//! * [`build_symbolic`] uses the polytope `A_i (h, x) <= D_i` formed by the
//!   symbolic feature bounds and the input box. Its exact minimum and maximum
//!   of `(W + dW) . h` are expressed through LP duality, which keeps the
//!   program linear in `dW`: any `lambda_i >= 0` with `A_i^T lambda_i = -C`
//!   certifies `min >= -lambda_i . D_i`, and symmetrically for `eta_i`.

use std::fmt;

use crate::bounds::SymbolicBounds;
use crate::error::{Error, Result};
use crate::model::{AffineLayer, FinalLayerDelta};
use crate::schema::InputBox;
use crate::solver::{Problem, Sense};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodeConfig {
    /// Each of `dW_j`, `db` is confined to `[-delta_max, delta_max]`.
    pub delta_max: f64,
    /// Gap enforced on the negative side: `UB_i <= -margin` when `Z_i = 0`.
    pub margin: f64,
    /// Gap enforced on the non-negative side: `LB_i >= nonneg_margin` when
    /// `Z_i = 1`. Keeps certified minima clear of floating-point noise.
    pub nonneg_margin: f64,
    pub m_floor: f64,
    /// Scales the computed Big-M; doubled when certification fails.
    pub m_scale: f64,
}

impl Default for EncodeConfig {
    fn default() -> Self {
        Self {
            delta_max: 10.0,
            margin: 1e-6,
            nonneg_margin: 1e-7,
            m_floor: 1e4,
            m_scale: 1.0,
        }
    }
}

impl EncodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_max.is_finite() && self.delta_max >= 0.0) {
            return Err(Error::Config(format!(
                "delta box must be finite and non-negative, got {}",
                self.delta_max
            )));
        }
        if !(self.margin.is_finite() && self.margin > 0.0) {
            return Err(Error::Config(format!("margin must be positive, got {}", self.margin)));
        }
        if !(self.nonneg_margin.is_finite() && self.nonneg_margin >= 0.0) {
            return Err(Error::Config("nonneg_margin must be finite and >= 0".into()));
        }
        if !(self.m_floor.is_finite() && self.m_floor > 0.0 && self.m_scale.is_finite() && self.m_scale >= 1.0) {
            return Err(Error::Config("Big-M floor must be positive and scale >= 1".into()));
        }
        Ok(())
    }
}

pub fn strict_margin(cfg: &EncodeConfig) -> Result<f64> {
    if !(cfg.margin.is_finite() && cfg.margin > 0.0) {
        return Err(Error::Config(format!("margin must be positive, got {}", cfg.margin)));
    }
    Ok(cfg.margin)
}

/// Big-M large enough to switch off either side of every disjunction for any
/// delta inside the box, given per-input feature bounds `(lo, hi)`.
pub fn big_m(cfg: &EncodeConfig, last: &AffineLayer, feature_bounds: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    if !cfg.delta_max.is_finite() {
        return Err(Error::Config("Big-M needs a finite delta box; set delta_max".into()));
    }
    let dm = cfg.delta_max;
    let b = last.bias()[0].abs();
    let mut worst: f64 = 0.0;
    for (lo, hi) in feature_bounds {
        let mut s = b + dm;
        for j in 0..lo.len() {
            s += (last.row(0)[j].abs() + dm) * lo[j].abs().max(hi[j].abs());
        }
        worst = worst.max(s);
    }
    Ok((worst * 1.1).max(cfg.m_floor) * cfg.m_scale)
}

/// What a variable of a repair program stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarRole {
    DeltaW(usize),
    DeltaB,
    /// `t_j >= |dW_j|`.
    AbsW(usize),
    /// `s >= |db|`.
    AbsB,
    Z(usize),
    Lambda(usize, usize),
    Eta(usize, usize),
    P(usize, usize),
    Q(usize, usize),
    Lb(usize),
    Ub(usize),
    LbHat(usize),
    UbHat(usize),
}

impl fmt::Display for VarRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarRole::DeltaW(j) => write!(f, "dW_{j}"),
            VarRole::DeltaB => write!(f, "db"),
            VarRole::AbsW(j) => write!(f, "t_{j}"),
            VarRole::AbsB => write!(f, "s"),
            VarRole::Z(i) => write!(f, "Z_{i}"),
            VarRole::Lambda(i, k) => write!(f, "lambda_{i}_{k}"),
            VarRole::Eta(i, k) => write!(f, "eta_{i}_{k}"),
            VarRole::P(i, j) => write!(f, "P_{i}_{j}"),
            VarRole::Q(i, j) => write!(f, "Q_{i}_{j}"),
            VarRole::Lb(i) => write!(f, "LB_{i}"),
            VarRole::Ub(i) => write!(f, "UB_{i}"),
            VarRole::LbHat(i) => write!(f, "LBhat_{i}"),
            VarRole::UbHat(i) => write!(f, "UBhat_{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepairMode {
    Naive,
    Symbolic,
}

impl std::str::FromStr for RepairMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(RepairMode::Naive),
            "symbolic" => Ok(RepairMode::Symbolic),
            _ => Err(Error::Config(format!(
                "unknown mode {s:?} (expected naive or symbolic)"
            ))),
        }
    }
}

impl fmt::Display for RepairMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RepairMode::Naive => "naive",
            RepairMode::Symbolic => "symbolic",
        })
    }
}

/// A repair program plus the metadata needed to read a solution back.
#[derive(Debug, Clone)]
pub struct RepairProgram {
    pub problem: Problem,
    pub roles: Vec<VarRole>,
    pub mode: RepairMode,
    pub big_m: f64,
    pub margin: f64,
    pub feature_dim: usize,
    pub inputs: usize,
}

impl RepairProgram {
    fn new(mode: RepairMode, big_m: f64, margin: f64, feature_dim: usize, inputs: usize) -> Self {
        Self {
            problem: Problem::new(),
            roles: Vec::new(),
            mode,
            big_m,
            margin,
            feature_dim,
            inputs,
        }
    }

    fn var(&mut self, role: VarRole, lower: f64, upper: f64) -> usize {
        self.roles.push(role);
        self.problem.add_continuous(role.to_string(), lower, upper)
    }

    fn binary(&mut self, role: VarRole) -> usize {
        self.roles.push(role);
        self.problem.add_binary(role.to_string())
    }

    pub fn index(&self, role: VarRole) -> Option<usize> {
        self.roles.iter().position(|r| *r == role)
    }

    /// The final-layer change encoded in a solution vector.
    pub fn delta(&self, values: &[f64]) -> FinalLayerDelta {
        let delta_w = (0..self.feature_dim)
            .map(|j| values[self.index(VarRole::DeltaW(j)).expect("dW present")])
            .collect();
        let delta_b = values[self.index(VarRole::DeltaB).expect("db present")];
        FinalLayerDelta { delta_w, delta_b }
    }

    /// Copy of the program with `dW` and `db` pinned to the given values.
    pub fn with_fixed_delta(&self, delta: &FinalLayerDelta) -> Problem {
        let mut p = self.problem.clone();
        for (j, &v) in delta.delta_w.iter().enumerate() {
            let k = self.index(VarRole::DeltaW(j)).expect("dW present");
            p.vars[k].lower = v;
            p.vars[k].upper = v;
        }
        let k = self.index(VarRole::DeltaB).expect("db present");
        p.vars[k].lower = delta.delta_b;
        p.vars[k].upper = delta.delta_b;
        p
    }
}

/// Shared delta variables, L1 surrogates and objective.
fn add_delta_block(prog: &mut RepairProgram, dm: f64) -> (Vec<usize>, usize) {
    let d = prog.feature_dim;
    let dw: Vec<usize> = (0..d).map(|j| prog.var(VarRole::DeltaW(j), -dm, dm)).collect();
    let db = prog.var(VarRole::DeltaB, -dm, dm);
    let mut objective = Vec::with_capacity(d + 1);
    for (j, &w) in dw.iter().enumerate() {
        let t = prog.var(VarRole::AbsW(j), 0.0, f64::INFINITY);
        prog.problem
            .add_con(format!("absW_pos_{j}"), vec![(t, 1.0), (w, -1.0)], Sense::Ge, 0.0);
        prog.problem
            .add_con(format!("absW_neg_{j}"), vec![(t, 1.0), (w, 1.0)], Sense::Ge, 0.0);
        objective.push((t, 1.0));
    }
    let s = prog.var(VarRole::AbsB, 0.0, f64::INFINITY);
    prog.problem
        .add_con("absB_pos", vec![(s, 1.0), (db, -1.0)], Sense::Ge, 0.0);
    prog.problem
        .add_con("absB_neg", vec![(s, 1.0), (db, 1.0)], Sense::Ge, 0.0);
    objective.push((s, 1.0));
    prog.problem.set_objective(objective);
    (dw, db)
}

/// `lb >= -M (1 - Z) + nonneg_margin` and `ub <= M Z - margin`.
fn add_disjunction(prog: &mut RepairProgram, cfg: &EncodeConfig, i: usize, lb: usize, ub: usize) {
    let z = prog.binary(VarRole::Z(i));
    let m = prog.big_m;
    prog.problem.add_con(
        format!("nonneg_{i}"),
        vec![(lb, 1.0), (z, -m)],
        Sense::Ge,
        -m + cfg.nonneg_margin,
    );
    prog.problem
        .add_con(format!("neg_{i}"), vec![(ub, 1.0), (z, -m)], Sense::Le, -cfg.margin);
}

fn check_last(last: &AffineLayer, d: usize) -> Result<()> {
    if last.out_dim() != 1 {
        return Err(Error::Structure("final layer must have a single output".into()));
    }
    if last.in_dim() != d {
        return Err(Error::dim("feature bounds vs final layer", last.in_dim(), d));
    }
    Ok(())
}

/// Repair program over interval feature bounds `(lo, hi)` per repair input.
pub fn build_naive(
    feature_bounds: &[(Vec<f64>, Vec<f64>)],
    last: &AffineLayer,
    cfg: &EncodeConfig,
) -> Result<RepairProgram> {
    cfg.validate()?;
    if feature_bounds.is_empty() {
        return Err(Error::Input("repair set is empty".into()));
    }
    let d = last.in_dim();
    for (lo, hi) in feature_bounds {
        check_last(last, lo.len())?;
        check_last(last, hi.len())?;
    }
    let m = big_m(cfg, last, feature_bounds)?;
    let mut prog = RepairProgram::new(RepairMode::Naive, m, strict_margin(cfg)?, d, feature_bounds.len());
    let (dw, db) = add_delta_block(&mut prog, cfg.delta_max);
    let w = last.row(0);
    let b = last.bias()[0];
    for (i, (lo, hi)) in feature_bounds.iter().enumerate() {
        let mut lb_terms = Vec::with_capacity(d + 2);
        let mut ub_terms = Vec::with_capacity(d + 2);
        for j in 0..d {
            let p = prog.var(VarRole::P(i, j), f64::NEG_INFINITY, f64::INFINITY);
            let q = prog.var(VarRole::Q(i, j), f64::NEG_INFINITY, f64::INFINITY);
            for (tag, h) in [("lo", lo[j]), ("hi", hi[j])] {
                // P <= (W_j + dW_j) h  and  Q >= (W_j + dW_j) h.
                prog.problem.add_con(
                    format!("P_{tag}_{i}_{j}"),
                    vec![(p, 1.0), (dw[j], -h)],
                    Sense::Le,
                    w[j] * h,
                );
                prog.problem.add_con(
                    format!("Q_{tag}_{i}_{j}"),
                    vec![(q, 1.0), (dw[j], -h)],
                    Sense::Ge,
                    w[j] * h,
                );
            }
            lb_terms.push((p, -1.0));
            ub_terms.push((q, -1.0));
        }
        let lb = prog.var(VarRole::Lb(i), f64::NEG_INFINITY, f64::INFINITY);
        let ub = prog.var(VarRole::Ub(i), f64::NEG_INFINITY, f64::INFINITY);
        lb_terms.extend([(lb, 1.0), (db, -1.0)]);
        ub_terms.extend([(ub, 1.0), (db, -1.0)]);
        prog.problem.add_con(format!("LB_def_{i}"), lb_terms, Sense::Eq, b);
        prog.problem.add_con(format!("UB_def_{i}"), ub_terms, Sense::Eq, b);
        add_disjunction(&mut prog, cfg, i, lb, ub);
    }
    Ok(prog)
}

/// The constraint system `A p <= D` over `p = (h, x)` for one repair input.
///
/// Row blocks, each of the listed height:
/// `[-I, a_lo] <= -c_lo` (d), `[I, -a_hi] <= c_hi` (d),
/// `[0, -I] <= -box.lower` (m), `[0, I] <= box.upper` (m).
#[derive(Debug, Clone, PartialEq)]
pub struct DualData {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols`.
    pub a: Vec<f64>,
    pub d: Vec<f64>,
}

impl DualData {
    pub fn new(sb: &SymbolicBounds, b: &InputBox) -> Result<Self> {
        let (d, m) = (sb.out_dim, sb.in_dim);
        if b.dim() != m {
            return Err(Error::dim("box vs symbolic bounds", m, b.dim()));
        }
        let rows = 2 * m + 2 * d;
        let cols = m + d;
        let mut a = vec![0.0; rows * cols];
        let mut rhs = Vec::with_capacity(rows);
        for j in 0..d {
            let r = j;
            a[r * cols + j] = -1.0;
            for k in 0..m {
                a[r * cols + d + k] = sb.lower_row(j)[k];
            }
            rhs.push(-sb.c_lo[j]);
        }
        for j in 0..d {
            let r = d + j;
            a[r * cols + j] = 1.0;
            for k in 0..m {
                a[r * cols + d + k] = -sb.upper_row(j)[k];
            }
            rhs.push(sb.c_hi[j]);
        }
        for k in 0..m {
            let r = 2 * d + k;
            a[r * cols + d + k] = -1.0;
            rhs.push(-b.lower[k]);
        }
        for k in 0..m {
            let r = 2 * d + m + k;
            a[r * cols + d + k] = 1.0;
            rhs.push(b.upper[k]);
        }
        Ok(Self { rows, cols, a, d: rhs })
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        self.a[r * self.cols + c]
    }

    /// Largest violation of `A (h, x) <= D`.
    pub fn violation(&self, h: &[f64], x: &[f64]) -> f64 {
        let p: Vec<f64> = h.iter().chain(x).copied().collect();
        (0..self.rows)
            .map(|r| {
                let lhs: f64 = (0..self.cols).map(|c| self.entry(r, c) * p[c]).sum();
                lhs - self.d[r]
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Repair program over symbolic feature bounds, one per repair input.
pub fn build_symbolic(
    symbolic: &[SymbolicBounds],
    boxes: &[InputBox],
    last: &AffineLayer,
    cfg: &EncodeConfig,
) -> Result<RepairProgram> {
    cfg.validate()?;
    if symbolic.is_empty() {
        return Err(Error::Input("repair set is empty".into()));
    }
    if symbolic.len() != boxes.len() {
        return Err(Error::dim("symbolic bounds vs boxes", symbolic.len(), boxes.len()));
    }
    let d = last.in_dim();
    for sb in symbolic {
        check_last(last, sb.out_dim)?;
    }
    let concrete: Vec<(Vec<f64>, Vec<f64>)> = symbolic
        .iter()
        .zip(boxes)
        .map(|(sb, b)| crate::bounds::concretize(sb, b))
        .collect::<Result<_>>()?;
    let m = big_m(cfg, last, &concrete)?;
    let mut prog = RepairProgram::new(RepairMode::Symbolic, m, strict_margin(cfg)?, d, symbolic.len());
    let (dw, db) = add_delta_block(&mut prog, cfg.delta_max);
    let w = last.row(0);
    let b = last.bias()[0];
    for (i, (sb, bx)) in symbolic.iter().zip(boxes).enumerate() {
        let data = DualData::new(sb, bx)?;
        let lam: Vec<usize> = (0..data.rows)
            .map(|k| prog.var(VarRole::Lambda(i, k), 0.0, f64::INFINITY))
            .collect();
        let eta: Vec<usize> = (0..data.rows)
            .map(|k| prog.var(VarRole::Eta(i, k), 0.0, f64::INFINITY))
            .collect();
        // A^T lambda = -C and A^T eta = C, with C = (W + dW, 0).
        for c in 0..data.cols {
            let mut lt: Vec<(usize, f64)> = Vec::new();
            let mut et: Vec<(usize, f64)> = Vec::new();
            for r in 0..data.rows {
                let a = data.entry(r, c);
                if a != 0.0 {
                    lt.push((lam[r], a));
                    et.push((eta[r], a));
                }
            }
            let wc = if c < d {
                lt.push((dw[c], 1.0));
                et.push((dw[c], -1.0));
                w[c]
            } else {
                0.0
            };
            prog.problem.add_con(format!("dual_lo_{i}_{c}"), lt, Sense::Eq, -wc);
            prog.problem.add_con(format!("dual_hi_{i}_{c}"), et, Sense::Eq, wc);
        }
        // LBhat = b + db - lambda . D and UBhat = b + db + eta . D.
        let lb = prog.var(VarRole::LbHat(i), f64::NEG_INFINITY, f64::INFINITY);
        let ub = prog.var(VarRole::UbHat(i), f64::NEG_INFINITY, f64::INFINITY);
        let mut lt = vec![(lb, 1.0), (db, -1.0)];
        let mut ut = vec![(ub, 1.0), (db, -1.0)];
        for r in 0..data.rows {
            if data.d[r] != 0.0 {
                lt.push((lam[r], data.d[r]));
                ut.push((eta[r], -data.d[r]));
            }
        }
        prog.problem.add_con(format!("LBhat_def_{i}"), lt, Sense::Eq, b);
        prog.problem.add_con(format!("UBhat_def_{i}"), ut, Sense::Eq, b);
        add_disjunction(&mut prog, cfg, i, lb, ub);
    }
    Ok(prog)
}
