//! Problem and solution types shared by every solver backend.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("backend failure: {0}")]
    Backend(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

/// One decision variable. Binaries keep bounds inside [0, 1]; a model
/// builder may tighten them to [0,0] or [1,1] to pre-fix a binary.
#[derive(Debug, Clone, Copy)]
pub struct VariableDef {
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

impl VariableDef {
    pub fn continuous(lower: f64, upper: f64) -> Self {
        VariableDef { lower, upper, kind: VarKind::Continuous }
    }

    pub fn binary() -> Self {
        VariableDef { lower: 0.0, upper: 1.0, kind: VarKind::Binary }
    }

    /// Binary with both bounds forced to `value` (0 or 1).
    pub fn binary_fixed(value: f64) -> Self {
        VariableDef { lower: value, upper: value, kind: VarKind::Binary }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// terms are (variable index, coefficient); indices must be unique within
/// one constraint (merge coefficients before constructing).
#[derive(Debug, Clone)]
pub struct LinearConstraint {
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        LinearConstraint { terms, sense, rhs }
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, c)| c * values[j]).sum()
    }

    /// Signed violation of this row at `values`; positive means violated.
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.eval(values);
        match self.sense {
            Sense::Le => lhs - self.rhs,
            Sense::Ge => self.rhs - lhs,
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjSense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone)]
pub struct MilpProblem {
    pub variables: Vec<VariableDef>,
    pub constraints: Vec<LinearConstraint>,
    pub objective: Vec<(usize, f64)>,
    pub obj_sense: ObjSense,
}

impl MilpProblem {
    pub fn new(obj_sense: ObjSense) -> Self {
        MilpProblem {
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            obj_sense,
        }
    }

    pub fn add_var(&mut self, def: VariableDef) -> usize {
        self.variables.push(def);
        self.variables.len() - 1
    }

    pub fn add_constraint(&mut self, c: LinearConstraint) {
        self.constraints.push(c);
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * values[j]).sum()
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        if self.variables.is_empty() {
            return Err(MilpError::InvalidProblem("no variables".into()));
        }
        for (i, v) in self.variables.iter().enumerate() {
            if v.lower > v.upper {
                return Err(MilpError::InvalidProblem(format!(
                    "variable {i}: lower {} > upper {}",
                    v.lower, v.upper
                )));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(MilpError::InvalidProblem(format!(
                    "binary variable {i} has bounds outside [0,1]"
                )));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            let mut seen = vec![false; self.variables.len()];
            for &(j, coef) in &c.terms {
                if j >= self.variables.len() {
                    return Err(MilpError::InvalidProblem(format!(
                        "constraint {i}: dangling variable index {j}"
                    )));
                }
                if seen[j] {
                    return Err(MilpError::InvalidProblem(format!(
                        "constraint {i}: duplicate variable index {j}"
                    )));
                }
                seen[j] = true;
                if !coef.is_finite() || !c.rhs.is_finite() {
                    return Err(MilpError::InvalidProblem(format!(
                        "constraint {i}: non-finite coefficient or rhs"
                    )));
                }
            }
        }
        for &(j, _) in &self.objective {
            if j >= self.variables.len() {
                return Err(MilpError::InvalidProblem(format!(
                    "objective references undeclared variable {j}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    LimitReached,
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: SolveStatus,
    /// Present for Optimal, and for LimitReached when an incumbent exists.
    pub values: Option<Vec<f64>>,
    pub objective: Option<f64>,
    pub node_count: u64,
    pub wall_time: f64,
}

impl MilpSolution {
    pub fn no_solution(status: SolveStatus) -> Self {
        MilpSolution { status, values: None, objective: None, node_count: 0, wall_time: 0.0 }
    }
}
