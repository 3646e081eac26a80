//! LP and MILP solving: a bounded revised simplex, branch-and-bound over
//! binaries, and CPLEX-LP text export/import for cross-checking with
//! external solvers.

mod lpfile;
mod milp;
mod problem;
mod simplex;

pub use lpfile::{export_lp_file, parse_lp, read_lp_file, write_lp};
pub use milp::{solve_milp, MilpLimits, MilpSolution, MilpStatus};
pub use problem::{Constraint, Problem, Sense, VarKind, Variable};

use crate::error::{Error, Result};
use simplex::{Outcome, Simplex};

pub const FEAS_TOL: f64 = 1e-8;
pub const OPT_TOL: f64 = 1e-9;
pub const PIVOT_TOL: f64 = 1e-9;
pub const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    /// One multiplier per constraint, with `c - A^T y` the reduced costs.
    /// Nonnegative on active `>=` rows and nonpositive on active `<=` rows.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

/// Solve the LP relaxation (binaries relaxed to `[0, 1]`).
pub fn solve_lp(problem: &Problem) -> Result<LpSolution> {
    problem.validate()?;
    if let Some(v) = problem.vars.iter().find(|v| v.lower > v.upper) {
        return Ok(infeasible(problem, format!("empty bounds on {}", v.name)));
    }
    let mut s = Simplex::new(problem);
    let outcome = s.primal();
    finish(problem, &s, outcome)
}

fn infeasible(problem: &Problem, _why: String) -> LpSolution {
    LpSolution {
        status: LpStatus::Infeasible,
        values: vec![0.0; problem.num_vars()],
        objective: f64::INFINITY,
        duals: vec![0.0; problem.num_cons()],
        reduced_costs: vec![0.0; problem.num_vars()],
        iterations: 0,
    }
}

fn finish(problem: &Problem, s: &Simplex, outcome: Outcome) -> Result<LpSolution> {
    let status = match outcome {
        Outcome::Optimal => LpStatus::Optimal,
        Outcome::Infeasible => LpStatus::Infeasible,
        Outcome::Unbounded => LpStatus::Unbounded,
        Outcome::IterationLimit => {
            return Err(Error::Solver(format!(
                "simplex iteration limit reached after {} pivots",
                s.iterations
            )))
        }
    };
    let values = s.values().to_vec();
    let (duals, reduced_costs) = s.duals();
    let objective = match status {
        LpStatus::Optimal => problem.objective_value(&values),
        LpStatus::Infeasible => f64::INFINITY,
        LpStatus::Unbounded => f64::NEG_INFINITY,
    };
    Ok(LpSolution {
        status,
        values,
        objective,
        duals,
        reduced_costs,
        iterations: s.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bound_row() {
        let mut p = Problem::new();
        let x = p.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY);
        p.add_con("c", vec![(x, 1.0)], Sense::Ge, 3.0);
        p.set_objective(vec![(x, 1.0)]);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.values[0] - 3.0).abs() < 1e-12);
        assert!((s.objective - 3.0).abs() < 1e-12);
        assert!((s.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut p = Problem::new();
        let x = p.add_continuous("x", 0.0, 1.0);
        p.add_con("c", vec![(x, 1.0)], Sense::Ge, 2.0);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Infeasible);

        let mut q = Problem::new();
        let x = q.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY);
        let y = q.add_continuous("y", 0.0, f64::INFINITY);
        q.add_con("c", vec![(x, 1.0), (y, -1.0)], Sense::Le, 1.0);
        q.set_objective(vec![(x, -1.0), (y, 0.5)]);
        assert_eq!(solve_lp(&q).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn textbook_maximisation() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36.
        let mut p = Problem::new();
        let x = p.add_continuous("x", 0.0, f64::INFINITY);
        let y = p.add_continuous("y", 0.0, f64::INFINITY);
        p.add_con("a", vec![(x, 1.0)], Sense::Le, 4.0);
        p.add_con("b", vec![(y, 2.0)], Sense::Le, 12.0);
        p.add_con("c", vec![(x, 3.0), (y, 2.0)], Sense::Le, 18.0);
        p.set_objective(vec![(x, -3.0), (y, -5.0)]);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 36.0).abs() < 1e-9);
        assert!((s.values[0] - 2.0).abs() < 1e-9 && (s.values[1] - 6.0).abs() < 1e-9);
        // Dual of the textbook problem is (0, 3/2, 1) for the max form.
        assert!((s.duals[0]).abs() < 1e-9);
        assert!((s.duals[1] + 1.5).abs() < 1e-9);
        assert!((s.duals[2] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn equality_rows_and_free_variables() {
        let mut p = Problem::new();
        let x = p.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY);
        let y = p.add_continuous("y", f64::NEG_INFINITY, f64::INFINITY);
        let t = p.add_continuous("t", 0.0, f64::INFINITY);
        p.add_con("e", vec![(x, 1.0), (y, 1.0)], Sense::Eq, 1.0);
        p.add_con("t1", vec![(t, 1.0), (x, -1.0)], Sense::Ge, 0.0);
        p.add_con("t2", vec![(t, 1.0), (x, 1.0)], Sense::Ge, 0.0);
        p.add_con("t3", vec![(t, 1.0), (y, -1.0)], Sense::Ge, 0.0);
        p.add_con("t4", vec![(t, 1.0), (y, 1.0)], Sense::Ge, 0.0);
        p.set_objective(vec![(t, 1.0)]);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 0.5).abs() < 1e-9);
        assert!(p.max_violation(&s.values) < 1e-9);
    }
}
