use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    /// May be `-inf`.
    pub lower: f64,
    /// May be `+inf`.
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

/// A minimisation problem over continuous and binary variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Problem {
    pub vars: Vec<Variable>,
    pub cons: Vec<Constraint>,
    pub objective: Vec<(usize, f64)>,
    pub objective_offset: f64,
}

impl Problem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> usize {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            VarKind::Continuous => (lower, upper),
        };
        self.vars.push(Variable {
            name: name.into(),
            kind,
            lower,
            upper,
        });
        self.vars.len() - 1
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> usize {
        self.add_var(name, VarKind::Continuous, lower, upper)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> usize {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn add_con(&mut self, name: impl Into<String>, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.cons.push(Constraint {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        });
        self.cons.len() - 1
    }

    pub fn set_objective(&mut self, coeffs: Vec<(usize, f64)>) {
        self.objective = coeffs;
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_cons(&self) -> usize {
        self.cons.len()
    }

    pub fn binaries(&self) -> Vec<usize> {
        (0..self.vars.len())
            .filter(|&j| self.vars[j].kind == VarKind::Binary)
            .collect()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().map(|&(j, c)| c * x[j]).sum::<f64>()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = self
            .vars
            .iter()
            .zip(x)
            .map(|(v, &xv)| (v.lower - xv).max(xv - v.upper).max(0.0));
        let rows = self.cons.iter().map(|c| c.violation(x));
        bounds.chain(rows).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vars.len();
        for v in &self.vars {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(Error::Solver(format!("variable {} has invalid bounds", v.name)));
            }
        }
        for c in &self.cons {
            if !c.rhs.is_finite() {
                return Err(Error::Solver(format!("row {} has non-finite rhs", c.name)));
            }
            for &(j, a) in &c.coeffs {
                if j >= n || !a.is_finite() {
                    return Err(Error::Solver(format!("row {} has a bad coefficient", c.name)));
                }
            }
        }
        for &(j, c) in &self.objective {
            if j >= n || !c.is_finite() {
                return Err(Error::Solver("objective has a bad coefficient".into()));
            }
        }
        Ok(())
    }
}
