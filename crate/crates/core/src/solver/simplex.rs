//! Bounded-variable revised simplex with an explicit dense basis inverse.
//!
//! Each row `r` gets a logical variable `s_r` and reads `a_r . x - s_r = 0`,
//! with the row's sense moved into the bounds of `s_r`. The all-logical basis
//! is therefore always available as a starting point.

use super::problem::{Problem, Sense};
use super::{FEAS_TOL, OPT_TOL, PIVOT_TOL};

const REFACTOR_EVERY: usize = 100;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_RUN: usize = 40;
const DEGENERATE_STEP: f64 = 1e-12;
const SINGULAR_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VarState {
    Basic,
    Lower,
    Upper,
    /// Nonbasic with no finite bound, held at zero.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Enough to rebuild a basis after bounds change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Basis {
    head: Vec<usize>,
    state: Vec<VarState>,
}

pub(crate) struct Simplex {
    rows: usize,
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    head: Vec<usize>,
    state: Vec<VarState>,
    /// Column-major: column `r` holds `B^-1 e_r`, indexed by basis position.
    binv: Vec<f64>,
    since_refactor: usize,
    pub iterations: usize,
    pub iteration_limit: usize,
}

impl Simplex {
    /// Binary variables are relaxed to `[0, 1]`.
    pub fn new(problem: &Problem) -> Self {
        let rows = problem.cons.len();
        let n = problem.vars.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (r, con) in problem.cons.iter().enumerate() {
            for &(j, a) in &con.coeffs {
                match cols[j].last_mut() {
                    Some((rr, v)) if *rr == r => *v += a,
                    _ => cols[j].push((r, a)),
                }
            }
        }
        for col in &mut cols {
            col.retain(|&(_, a)| a != 0.0);
        }
        let mut lower: Vec<f64> = problem.vars.iter().map(|v| v.lower).collect();
        let mut upper: Vec<f64> = problem.vars.iter().map(|v| v.upper).collect();
        for con in &problem.cons {
            let (l, u) = match con.sense {
                Sense::Le => (f64::NEG_INFINITY, con.rhs),
                Sense::Ge => (con.rhs, f64::INFINITY),
                Sense::Eq => (con.rhs, con.rhs),
            };
            lower.push(l);
            upper.push(u);
        }
        let mut cost = vec![0.0; n + rows];
        for &(j, c) in &problem.objective {
            cost[j] += c;
        }
        let mut s = Self {
            rows,
            n,
            cols,
            lower,
            upper,
            cost,
            x: vec![0.0; n + rows],
            head: (n..n + rows).collect(),
            state: vec![VarState::Lower; n + rows],
            binv: Vec::new(),
            since_refactor: 0,
            iterations: 0,
            iteration_limit: 200_000 + 50 * (n + rows),
        };
        for j in n..n + rows {
            s.state[j] = VarState::Basic;
        }
        for j in 0..n {
            s.state[j] = s.nonbasic_state(j, VarState::Lower);
        }
        s.refactor();
        s.place_nonbasics();
        s.recompute_basics();
        s
    }

    pub fn values(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    pub fn basis(&self) -> Basis {
        Basis {
            head: self.head.clone(),
            state: self.state.clone(),
        }
    }

    /// Install a basis and rebuild the factorization unless it is already current.
    pub fn install(&mut self, basis: &Basis) {
        if basis.head != self.head {
            self.head = basis.head.clone();
            self.state = basis.state.clone();
            self.refactor();
        } else {
            self.state = basis.state.clone();
        }
    }

    /// Move nonbasic variables to their (possibly changed) bounds and
    /// recompute the basic values.
    pub fn reset_point(&mut self) {
        for j in 0..self.n + self.rows {
            if self.state[j] != VarState::Basic {
                self.state[j] = self.nonbasic_state(j, self.state[j]);
            }
        }
        self.place_nonbasics();
        self.recompute_basics();
    }

    fn nonbasic_state(&self, j: usize, prefer: VarState) -> VarState {
        let (l, u) = (self.lower[j], self.upper[j]);
        match (l.is_finite(), u.is_finite()) {
            (true, true) => {
                if prefer == VarState::Upper {
                    VarState::Upper
                } else {
                    VarState::Lower
                }
            }
            (true, false) => VarState::Lower,
            (false, true) => VarState::Upper,
            (false, false) => VarState::Free,
        }
    }

    fn place_nonbasics(&mut self) {
        for j in 0..self.n + self.rows {
            self.x[j] = match self.state[j] {
                VarState::Basic => continue,
                VarState::Lower => self.lower[j],
                VarState::Upper => self.upper[j],
                VarState::Free => 0.0,
            };
        }
    }

    fn recompute_basics(&mut self) {
        let mut v = vec![0.0; self.rows];
        for j in 0..self.n + self.rows {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                self.axpy_col(j, self.x[j], &mut v);
            }
        }
        let m = self.rows;
        let mut xb = vec![0.0; m];
        for (r, &vr) in v.iter().enumerate() {
            if vr != 0.0 {
                for (o, b) in xb.iter_mut().zip(&self.binv[r * m..(r + 1) * m]) {
                    *o -= vr * b;
                }
            }
        }
        for (p, val) in xb.into_iter().enumerate() {
            self.x[self.head[p]] = val;
        }
    }

    /// `v += scale * a_j` over the full column set (logicals are `-e_r`).
    fn axpy_col(&self, j: usize, scale: f64, v: &mut [f64]) {
        if j < self.n {
            for &(r, a) in &self.cols[j] {
                v[r] += scale * a;
            }
        } else {
            v[j - self.n] -= scale;
        }
    }

    fn col_dot(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            self.cols[j].iter().map(|&(r, a)| a * y[r]).sum()
        } else {
            -y[j - self.n]
        }
    }

    /// `B^-1 a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.ftran_into(j, &mut out);
        out
    }

    fn ftran_into(&self, j: usize, out: &mut [f64]) {
        let m = self.rows;
        if j < self.n {
            out.fill(0.0);
            for &(r, a) in &self.cols[j] {
                for (o, b) in out.iter_mut().zip(&self.binv[r * m..(r + 1) * m]) {
                    *o += a * b;
                }
            }
        } else {
            let r = j - self.n;
            for (o, b) in out.iter_mut().zip(&self.binv[r * m..(r + 1) * m]) {
                *o = -b;
            }
        }
    }

    /// `c_B^T B^-1`.
    fn btran(&self, cb: &[f64]) -> Vec<f64> {
        let m = self.rows;
        let nz: Vec<(usize, f64)> = cb.iter().copied().enumerate().filter(|&(_, c)| c != 0.0).collect();
        (0..m)
            .map(|r| {
                let col = &self.binv[r * m..(r + 1) * m];
                nz.iter().map(|&(p, c)| c * col[p]).sum()
            })
            .collect()
    }

    /// Row `p` of `B^-1`.
    fn binv_row(&self, p: usize) -> Vec<f64> {
        let m = self.rows;
        (0..m).map(|r| self.binv[r * m + p]).collect()
    }

    /// Row duals and structural reduced costs for the phase-two objective.
    pub fn duals(&self) -> (Vec<f64>, Vec<f64>) {
        let cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        let y = self.btran(&cb);
        let d = (0..self.n).map(|j| self.cost[j] - self.col_dot(j, &y)).collect();
        (y, d)
    }

    /// Rebuild `B^-1` from scratch: start from the all-logical basis and
    /// pivot the structural columns in, sparsest first, each into the free
    /// logical position with the largest entry. A column with no usable
    /// pivot is dependent and stays out; its slot keeps a logical.
    fn refactor(&mut self) {
        self.since_refactor = 0;
        let m = self.rows;
        let mut keep_logical = vec![false; m];
        let mut structural: Vec<usize> = Vec::new();
        for &j in &self.head {
            if j >= self.n {
                keep_logical[j - self.n] = true;
            } else {
                structural.push(j);
            }
        }
        structural.sort_by_key(|&j| (self.cols[j].len(), j));
        let mut binv = vec![0.0; m * m];
        for r in 0..m {
            binv[r * m + r] = -1.0;
        }
        self.binv = binv;
        let mut head: Vec<usize> = (self.n..self.n + m).collect();
        // Positions still holding a logical that may be replaced.
        let mut open: Vec<bool> = (0..m).map(|r| !keep_logical[r]).collect();
        let mut alpha = vec![0.0; m];
        for &j in &structural {
            self.ftran_into(j, &mut alpha);
            let mut best = usize::MAX;
            let mut best_val = SINGULAR_TOL;
            for (p, &a) in alpha.iter().enumerate() {
                if open[p] && a.abs() > best_val {
                    best_val = a.abs();
                    best = p;
                }
            }
            if best == usize::MAX {
                self.state[j] = self.nonbasic_state(j, VarState::Lower);
                continue;
            }
            open[best] = false;
            self.eliminate(best, &alpha);
            head[best] = j;
        }
        for &j in &head {
            self.state[j] = VarState::Basic;
        }
        let dropped = self.head.iter().any(|&j| self.state[j] != VarState::Basic);
        self.head = head;
        if dropped {
            self.place_nonbasics();
        }
    }

    /// Apply the elementary row operations that turn `alpha` into `e_p` to `B^-1`.
    fn eliminate(&mut self, p: usize, alpha: &[f64]) {
        let m = self.rows;
        let piv = alpha[p];
        let nz: Vec<(usize, f64)> = alpha
            .iter()
            .copied()
            .enumerate()
            .filter(|&(q, a)| q != p && a != 0.0)
            .collect();
        for col in self.binv.chunks_mut(m) {
            let v = col[p];
            if v != 0.0 {
                let v = v / piv;
                col[p] = v;
                for &(q, a) in &nz {
                    col[q] -= a * v;
                }
            }
        }
    }

    fn pivot(&mut self, leave_pos: usize, enter: usize, alpha: &[f64]) {
        self.eliminate(leave_pos, alpha);
        self.head[leave_pos] = enter;
        self.state[enter] = VarState::Basic;
        self.iterations += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor();
            self.recompute_basics();
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lower[j] - FEAS_TOL {
            self.lower[j] - v
        } else if v > self.upper[j] + FEAS_TOL {
            v - self.upper[j]
        } else {
            0.0
        }
    }

    fn primal_infeasible(&self) -> bool {
        self.head.iter().any(|&j| self.infeasibility(j) > 0.0)
    }

    /// Reduced cost of nonbasic `j` and the direction it should move, if any.
    fn entering_direction(&self, j: usize, d: f64) -> Option<f64> {
        match self.state[j] {
            VarState::Basic => None,
            _ if self.lower[j] == self.upper[j] => None,
            VarState::Lower if d < -OPT_TOL => Some(1.0),
            VarState::Upper if d > OPT_TOL => Some(-1.0),
            VarState::Free if d.abs() > OPT_TOL => Some(-d.signum()),
            _ => None,
        }
    }

    /// Composite primal simplex: minimise the sum of infeasibilities until
    /// feasible, then the true objective.
    pub fn primal(&mut self) -> Outcome {
        let total = self.n + self.rows;
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut verified = 0;
        loop {
            if self.iterations >= self.iteration_limit {
                return Outcome::IterationLimit;
            }
            let phase1 = self.primal_infeasible();
            let cb: Vec<f64> = self
                .head
                .iter()
                .map(|&j| {
                    if phase1 {
                        let v = self.x[j];
                        if v < self.lower[j] - FEAS_TOL {
                            -1.0
                        } else if v > self.upper[j] + FEAS_TOL {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        self.cost[j]
                    }
                })
                .collect();
            let y = self.btran(&cb);
            let mut enter = None;
            let mut best = 0.0;
            for j in 0..total {
                if self.state[j] == VarState::Basic {
                    continue;
                }
                let c = if phase1 { 0.0 } else { self.cost[j] };
                let d = c - self.col_dot(j, &y);
                if let Some(dir) = self.entering_direction(j, d) {
                    if bland {
                        enter = Some((j, dir));
                        break;
                    }
                    if d.abs() > best {
                        best = d.abs();
                        enter = Some((j, dir));
                    }
                }
            }
            let Some((q, dir)) = enter else {
                // Confirm on a fresh factorization before declaring a result.
                if verified < 3 && self.since_refactor > 0 {
                    verified += 1;
                    self.refactor();
                    self.recompute_basics();
                    continue;
                }
                return if phase1 { Outcome::Infeasible } else { Outcome::Optimal };
            };
            let alpha = self.ftran(q);
            let step = self.primal_ratio(&alpha, dir, phase1, bland);
            let flip = self.upper[q] - self.lower[q];
            match step {
                Some((p, theta)) if theta < flip => {
                    let leave = self.head[p];
                    // Decided on the pre-step value: in phase one the target
                    // depends on which side of its bounds `leave` starts.
                    let (at, st) = self.leaving_bound(leave, -dir * alpha[p], phase1);
                    for (pos, &a) in alpha.iter().enumerate() {
                        if a != 0.0 {
                            let j = self.head[pos];
                            self.x[j] -= dir * a * theta;
                        }
                    }
                    self.x[q] += dir * theta;
                    self.x[leave] = at;
                    self.state[leave] = st;
                    if theta < DEGENERATE_STEP {
                        degenerate += 1;
                        if degenerate > DEGENERATE_RUN {
                            bland = true;
                        }
                    } else {
                        degenerate = 0;
                        bland = false;
                    }
                    self.pivot(p, q, &alpha);
                }
                _ if flip.is_finite() => {
                    for (pos, &a) in alpha.iter().enumerate() {
                        if a != 0.0 {
                            let j = self.head[pos];
                            self.x[j] -= dir * a * flip;
                        }
                    }
                    if dir > 0.0 {
                        self.x[q] = self.upper[q];
                        self.state[q] = VarState::Upper;
                    } else {
                        self.x[q] = self.lower[q];
                        self.state[q] = VarState::Lower;
                    }
                    self.iterations += 1;
                    degenerate = 0;
                    bland = false;
                }
                _ => {
                    if phase1 {
                        // No breakpoint although the infeasibility sum should
                        // decrease: numerical trouble, refactor and retry.
                        if verified < 3 {
                            verified += 1;
                            self.refactor();
                            self.recompute_basics();
                            continue;
                        }
                        return Outcome::Infeasible;
                    }
                    return Outcome::Unbounded;
                }
            }
        }
    }

    /// Which bound a leaving basic variable lands on, given its rate of change.
    fn leaving_bound(&self, j: usize, rate: f64, phase1: bool) -> (f64, VarState) {
        let (l, u) = (self.lower[j], self.upper[j]);
        let v = self.x[j];
        if rate < 0.0 {
            if phase1 && v > u + FEAS_TOL && u.is_finite() {
                (u, VarState::Upper)
            } else if l.is_finite() {
                (l, VarState::Lower)
            } else {
                (u, VarState::Upper)
            }
        } else if phase1 && v < l - FEAS_TOL && l.is_finite() {
            (l, VarState::Lower)
        } else if u.is_finite() {
            (u, VarState::Upper)
        } else {
            (l, VarState::Lower)
        }
    }

    /// Two-pass Harris ratio test. Returns the leaving position and the step.
    fn primal_ratio(&self, alpha: &[f64], dir: f64, phase1: bool, bland: bool) -> Option<(usize, f64)> {
        let limit = |p: usize, slack_tol: f64| -> Option<f64> {
            let rate = -dir * alpha[p];
            if rate.abs() < PIVOT_TOL {
                return None;
            }
            let j = self.head[p];
            let (l, u, v) = (self.lower[j], self.upper[j], self.x[j]);
            if rate < 0.0 {
                let target = if phase1 && v > u + FEAS_TOL {
                    u
                } else if phase1 && v < l - FEAS_TOL {
                    return None;
                } else {
                    l
                };
                if !target.is_finite() {
                    return None;
                }
                Some(((v - target + slack_tol) / -rate).max(0.0))
            } else {
                let target = if phase1 && v < l - FEAS_TOL {
                    l
                } else if phase1 && v > u + FEAS_TOL {
                    return None;
                } else {
                    u
                };
                if !target.is_finite() {
                    return None;
                }
                Some(((target - v + slack_tol) / rate).max(0.0))
            }
        };
        let mut theta_max = f64::INFINITY;
        for p in 0..alpha.len() {
            if let Some(t) = limit(p, FEAS_TOL) {
                theta_max = theta_max.min(t);
            }
        }
        if !theta_max.is_finite() {
            return None;
        }
        let mut choice: Option<(usize, f64, f64)> = None;
        for p in 0..alpha.len() {
            let Some(t) = limit(p, 0.0) else { continue };
            if t > theta_max {
                continue;
            }
            let mag = alpha[p].abs();
            let better = match choice {
                None => true,
                Some((bp, _, bmag)) => {
                    if bland {
                        self.head[p] < self.head[bp]
                    } else {
                        mag > bmag
                    }
                }
            };
            if better {
                choice = Some((p, t, mag));
            }
        }
        choice.map(|(p, t, _)| (p, t))
    }

    /// Dual simplex from a dual-feasible basis. Returns `None` when the
    /// basis is not dual feasible so the caller can fall back to primal.
    pub fn dual(&mut self) -> Option<Outcome> {
        let total = self.n + self.rows;
        loop {
            if self.iterations >= self.iteration_limit {
                return Some(Outcome::IterationLimit);
            }
            let cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
            let y = self.btran(&cb);
            let mut d = vec![0.0; total];
            for j in 0..total {
                if self.state[j] != VarState::Basic {
                    d[j] = self.cost[j] - self.col_dot(j, &y);
                    if self.entering_direction(j, d[j]).is_some() {
                        return None;
                    }
                }
            }
            // Leaving: the most infeasible basic variable.
            let mut leave = None;
            let mut worst = 0.0;
            for (p, &j) in self.head.iter().enumerate() {
                let inf = self.infeasibility(j);
                if inf > worst {
                    worst = inf;
                    leave = Some(p);
                }
            }
            let Some(p) = leave else {
                return Some(Outcome::Optimal);
            };
            let jl = self.head[p];
            let below = self.x[jl] < self.lower[jl];
            let target = if below { self.lower[jl] } else { self.upper[jl] };
            let rho = self.binv_row(p);
            // Candidates: (j, alpha_pj, ratio).
            let mut cands = Vec::new();
            for j in 0..total {
                if self.state[j] == VarState::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let a = self.col_dot(j, &rho);
                if a.abs() < PIVOT_TOL {
                    continue;
                }
                // x_p changes by -a per unit increase of x_j.
                let ok = match self.state[j] {
                    VarState::Lower => (below && a < 0.0) || (!below && a > 0.0),
                    VarState::Upper => (below && a > 0.0) || (!below && a < 0.0),
                    VarState::Free => true,
                    VarState::Basic => false,
                };
                if ok {
                    cands.push((j, a, d[j].abs() / a.abs()));
                }
            }
            if cands.is_empty() {
                return Some(Outcome::Infeasible);
            }
            let bound = cands
                .iter()
                .map(|&(j, a, _)| (d[j].abs() + OPT_TOL) / a.abs())
                .fold(f64::INFINITY, f64::min);
            let mut pick: Option<(usize, f64)> = None;
            for &(j, a, r) in &cands {
                if r <= bound {
                    let better = match pick {
                        None => true,
                        Some((_, ba)) => a.abs() > ba.abs(),
                    };
                    if better {
                        pick = Some((j, a));
                    }
                }
            }
            let (q, _) = pick.expect("candidate within Harris bound");
            let alpha = self.ftran(q);
            let apq = alpha[p];
            if apq.abs() < PIVOT_TOL {
                self.refactor();
                self.recompute_basics();
                return None;
            }
            let dq = -(target - self.x[jl]) / apq;
            for (pos, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    let j = self.head[pos];
                    self.x[j] -= a * dq;
                }
            }
            self.x[q] += dq;
            self.x[jl] = target;
            self.state[jl] = if below { VarState::Lower } else { VarState::Upper };
            self.pivot(p, q, &alpha);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::problem::{Problem, Sense};
    use proptest::prelude::*;

    fn solve_fresh(p: &Problem, bounds: &[(f64, f64)]) -> (Outcome, f64) {
        let mut s = Simplex::new(p);
        for (j, &(l, u)) in bounds.iter().enumerate() {
            s.set_bounds(j, l, u);
        }
        s.reset_point();
        let out = s.primal();
        (out, s.objective())
    }

    fn residual(s: &Simplex) -> f64 {
        let mut ax = vec![0.0; s.rows];
        for j in 0..s.n {
            for &(r, a) in &s.cols[j] {
                ax[r] += a * s.x[j];
            }
        }
        (0..s.rows).map(|r| (ax[r] - s.x[s.n + r]).abs()).fold(0.0, f64::max)
    }

    prop_compose! {
        fn lp_and_tightening()(n in 2usize..7, m in 1usize..7)(
            a in prop::collection::vec(-3.0f64..3.0, n * m),
            c in prop::collection::vec(-2.0f64..2.0, n),
            x0 in prop::collection::vec(-1.0f64..1.0, n),
            slack in prop::collection::vec(0.0f64..2.0, m),
            cuts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), n),
            n in Just(n), m in Just(m),
        ) -> (Problem, Vec<(f64, f64)>) {
            let mut p = Problem::new();
            for j in 0..n {
                p.add_continuous(format!("x{j}"), -4.0, 4.0);
            }
            for r in 0..m {
                let row: Vec<(usize, f64)> = (0..n).map(|j| (j, a[r * n + j])).collect();
                let act: f64 = row.iter().map(|&(j, v)| v * x0[j]).sum();
                p.add_con(format!("r{r}"), row, Sense::Le, act + slack[r]);
            }
            p.set_objective(c.iter().copied().enumerate().collect());
            let tightened = cuts
                .iter()
                .map(|&(s, t)| {
                    let (lo, hi) = (-4.0 + 8.0 * s.min(t), -4.0 + 8.0 * s.max(t));
                    (lo, hi)
                })
                .collect();
            (p, tightened)
        }
    }

    proptest! {
        // Mirrors the branch-and-bound flow: optimal parent basis, new bounds,
        // dual then primal. Must agree with a cold solve on the same bounds.
        #[test]
        fn warm_resolve_matches_cold((p, tight) in lp_and_tightening()) {
            let mut warm = Simplex::new(&p);
            prop_assert_eq!(warm.primal(), Outcome::Optimal);
            let parent = warm.basis();
            for (j, &(l, u)) in tight.iter().enumerate() {
                warm.set_bounds(j, l, u);
            }
            warm.install(&parent);
            warm.reset_point();
            let out = match warm.dual() {
                Some(Outcome::Optimal) | None => warm.primal(),
                Some(other) => other,
            };
            let (cold, cold_obj) = solve_fresh(&p, &tight);
            prop_assert_eq!(out, cold);
            if out == Outcome::Optimal {
                prop_assert!((warm.objective() - cold_obj).abs() < 1e-7 * (1.0 + cold_obj.abs()));
                prop_assert!(residual(&warm) < 1e-8);
                prop_assert!(p.max_violation(&warm.values()[..p.num_vars()]) < 1e-7);
            }
        }
    }
}
