//! Best-bound branch-and-bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::Duration;

use super::problem::Problem;
use super::simplex::{Basis, Outcome, Simplex};
use super::INT_TOL;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilpLimits {
    pub max_nodes: usize,
    /// Wall-clock budget. The clock is only read when this is set.
    pub time_limit: Option<Duration>,
    /// Relative optimality gap: stop once `incumbent - bound <= gap * (1 + |incumbent|)`.
    pub gap: f64,
}

impl Default for MilpLimits {
    fn default() -> Self {
        Self {
            max_nodes: 200_000,
            time_limit: None,
            gap: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    /// Node or time limit hit; `values` holds the incumbent if one was found.
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub values: Option<Vec<f64>>,
    pub objective: f64,
    pub best_bound: f64,
    pub nodes: usize,
    pub gap: f64,
}

impl MilpSolution {
    pub fn values(&self) -> Result<&[f64]> {
        self.values
            .as_deref()
            .ok_or_else(|| Error::Solver(format!("no feasible solution ({:?})", self.status)))
    }
}

struct Node {
    id: usize,
    depth: usize,
    bound: f64,
    fixings: Vec<(usize, f64)>,
    basis: Option<Rc<Basis>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    /// Max-heap order: smallest bound first, then deeper, then older.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

struct Clock {
    #[cfg(not(target_arch = "wasm32"))]
    start: Option<(std::time::Instant, Duration)>,
}

impl Clock {
    fn new(limit: Option<Duration>) -> Self {
        #[cfg(not(target_arch = "wasm32"))]
        {
            Self {
                start: limit.map(|l| (std::time::Instant::now(), l)),
            }
        }
        #[cfg(target_arch = "wasm32")]
        {
            let _ = limit;
            Self {}
        }
    }

    fn expired(&self) -> bool {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.is_some_and(|(t, l)| t.elapsed() >= l)
        }
        #[cfg(target_arch = "wasm32")]
        {
            false
        }
    }
}

pub fn solve_milp(problem: &Problem, limits: &MilpLimits) -> Result<MilpSolution> {
    problem.validate()?;
    let binaries = problem.binaries();
    let infeasible = |nodes| MilpSolution {
        status: MilpStatus::Infeasible,
        values: None,
        objective: f64::INFINITY,
        best_bound: f64::INFINITY,
        nodes,
        gap: f64::INFINITY,
    };
    if problem.vars.iter().any(|v| v.lower > v.upper) {
        return Ok(infeasible(0));
    }
    let clock = Clock::new(limits.time_limit);
    let mut lp = Simplex::new(problem);
    let base_bounds: Vec<(f64, f64)> = binaries.iter().map(|&j| lp.bounds(j)).collect();

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        id: 0,
        depth: 0,
        bound: f64::NEG_INFINITY,
        fixings: Vec::new(),
        basis: None,
    });
    let mut next_id = 1;
    let mut nodes = 0usize;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut timed_out = false;

    let tol = |inc: f64| limits.gap * (1.0 + inc.abs());

    while let Some(node) = heap.pop() {
        if let Some((inc, _)) = &incumbent {
            if node.bound >= inc - tol(*inc) {
                // Every remaining node is at least as bad.
                heap.clear();
                break;
            }
        }
        if nodes >= limits.max_nodes || clock.expired() {
            heap.push(node);
            timed_out = true;
            break;
        }
        nodes += 1;

        for (k, &j) in binaries.iter().enumerate() {
            lp.set_bounds(j, base_bounds[k].0, base_bounds[k].1);
        }
        for &(j, v) in &node.fixings {
            lp.set_bounds(j, v, v);
        }
        if let Some(b) = &node.basis {
            lp.install(b);
        }
        lp.reset_point();
        let outcome = match lp.dual() {
            Some(Outcome::Optimal) => lp.primal(),
            Some(other) => other,
            None => lp.primal(),
        };
        match outcome {
            Outcome::Optimal => {}
            Outcome::Infeasible => continue,
            Outcome::Unbounded => {
                return Err(Error::Solver("LP relaxation is unbounded".into()));
            }
            Outcome::IterationLimit => {
                return Err(Error::Solver(
                    "simplex iteration limit reached in branch-and-bound".into(),
                ));
            }
        }
        let obj = problem.objective_offset + lp.objective();
        if let Some((inc, _)) = &incumbent {
            if obj >= inc - tol(*inc) {
                continue;
            }
        }
        let values = lp.values();
        let mut branch: Option<(usize, f64)> = None;
        for &j in &binaries {
            let v = values[j];
            let frac = (v - v.floor()).min(v.ceil() - v);
            if frac > INT_TOL && branch.is_none_or(|(_, f)| frac > f) {
                branch = Some((j, frac));
            }
        }
        match branch {
            None => {
                incumbent = Some((obj, values.to_vec()));
            }
            Some((j, _)) => {
                let basis = Rc::new(lp.basis());
                for v in [0.0, 1.0] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((j, v));
                    heap.push(Node {
                        id: next_id,
                        depth: node.depth + 1,
                        bound: obj,
                        fixings,
                        basis: Some(Rc::clone(&basis)),
                    });
                    next_id += 1;
                }
            }
        }
    }

    let best_bound = heap
        .iter()
        .map(|n| n.bound)
        .fold(incumbent.as_ref().map_or(f64::INFINITY, |(o, _)| *o), f64::min);
    let Some((_, raw)) = incumbent else {
        if timed_out {
            return Ok(MilpSolution {
                status: MilpStatus::Timeout,
                values: None,
                objective: f64::INFINITY,
                best_bound,
                nodes,
                gap: f64::INFINITY,
            });
        }
        return Ok(infeasible(nodes));
    };
    let values = polish(problem, &binaries, &raw).unwrap_or_else(|| round_binaries(&binaries, raw));
    let objective = problem.objective_value(&values);
    let gap = (objective - best_bound).max(0.0);
    Ok(MilpSolution {
        status: if timed_out {
            MilpStatus::Timeout
        } else {
            MilpStatus::Optimal
        },
        values: Some(values),
        objective,
        best_bound,
        nodes,
        gap,
    })
}

fn round_binaries(binaries: &[usize], mut x: Vec<f64>) -> Vec<f64> {
    for &j in binaries {
        x[j] = x[j].round();
    }
    x
}

/// Re-solve with every binary fixed to its rounded value, so the returned
/// continuous part is consistent with exactly integral binaries.
fn polish(problem: &Problem, binaries: &[usize], x: &[f64]) -> Option<Vec<f64>> {
    let mut fixed = problem.clone();
    for &j in binaries {
        let v = x[j].round();
        fixed.vars[j].lower = v;
        fixed.vars[j].upper = v;
    }
    let mut lp = Simplex::new(&fixed);
    match lp.primal() {
        Outcome::Optimal => Some(round_binaries(binaries, lp.values().to_vec())),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Sense;

    #[test]
    fn knapsack() {
        // max 5a + 4b + 3c s.t. 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8.
        let mut p = Problem::new();
        let a = p.add_binary("a");
        let b = p.add_binary("b");
        let c = p.add_binary("c");
        p.add_con("r1", vec![(a, 2.0), (b, 3.0), (c, 1.0)], Sense::Le, 5.0);
        p.add_con("r2", vec![(a, 4.0), (b, 1.0), (c, 2.0)], Sense::Le, 11.0);
        p.add_con("r3", vec![(a, 3.0), (b, 4.0), (c, 2.0)], Sense::Le, 8.0);
        p.set_objective(vec![(a, -5.0), (b, -4.0), (c, -3.0)]);
        let s = solve_milp(&p, &MilpLimits::default()).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert!((s.objective + 9.0).abs() < 1e-9, "{}", s.objective);
    }

    #[test]
    fn integral_relaxation_is_solved_at_the_root() {
        let mut p = Problem::new();
        let z = p.add_binary("z");
        let x = p.add_continuous("x", 0.0, 10.0);
        p.add_con("c", vec![(x, 1.0), (z, -1.0)], Sense::Ge, 0.0);
        p.set_objective(vec![(z, 1.0), (x, 1.0)]);
        let s = solve_milp(&p, &MilpLimits::default()).unwrap();
        assert_eq!(s.nodes, 1);
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn infeasible_binary_program() {
        let mut p = Problem::new();
        let z = p.add_binary("z");
        p.add_con("lo", vec![(z, 1.0)], Sense::Ge, 0.3);
        p.add_con("hi", vec![(z, 1.0)], Sense::Le, 0.7);
        let s = solve_milp(&p, &MilpLimits::default()).unwrap();
        assert_eq!(s.status, MilpStatus::Infeasible);
        assert!(s.values().is_err());
    }

    #[test]
    fn node_limit_reports_timeout() {
        let mut p = Problem::new();
        let zs: Vec<usize> = (0..6).map(|k| p.add_binary(format!("z{k}"))).collect();
        p.add_con("half", zs.iter().map(|&z| (z, 2.0)).collect(), Sense::Eq, 7.0);
        let limits = MilpLimits {
            max_nodes: 3,
            ..MilpLimits::default()
        };
        let s = solve_milp(&p, &limits).unwrap();
        assert_eq!(s.status, MilpStatus::Timeout);
    }
}
