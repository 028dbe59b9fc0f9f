//! Post-hoc feasibility checking of a candidate point against a problem.

use crate::problem::{MilpError, MilpProblem, VarKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    LowerBound,
    UpperBound,
    Constraint,
    Integrality,
}

#[derive(Debug, Clone)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Variable index for bound/integrality, constraint index otherwise.
    pub index: usize,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Default)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_violation(&self) -> f64 {
        self.violations.iter().map(|v| v.magnitude).fold(0.0, f64::max)
    }
}

/// List every bound, constraint, and integrality violation exceeding `tol`.
pub fn check_feasibility(
    problem: &MilpProblem,
    values: &[f64],
    tol: f64,
) -> Result<FeasibilityReport, MilpError> {
    if values.len() != problem.num_vars() {
        return Err(MilpError::InvalidArgument(format!(
            "expected {} values, got {}",
            problem.num_vars(),
            values.len()
        )));
    }
    let mut report = FeasibilityReport::default();
    for (j, (v, def)) in values.iter().zip(&problem.variables).enumerate() {
        if def.lower - v > tol {
            report.violations.push(Violation {
                kind: ViolationKind::LowerBound,
                index: j,
                magnitude: def.lower - v,
            });
        }
        if v - def.upper > tol {
            report.violations.push(Violation {
                kind: ViolationKind::UpperBound,
                index: j,
                magnitude: v - def.upper,
            });
        }
        if def.kind == VarKind::Binary {
            let frac = (v - v.round()).abs();
            if frac > tol {
                report.violations.push(Violation {
                    kind: ViolationKind::Integrality,
                    index: j,
                    magnitude: frac,
                });
            }
        }
    }
    for (i, c) in problem.constraints.iter().enumerate() {
        let viol = c.violation(values);
        if viol > tol {
            report.violations.push(Violation {
                kind: ViolationKind::Constraint,
                index: i,
                magnitude: viol,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{LinearConstraint, ObjSense, Sense, VariableDef};

    #[test]
    fn zero_point_violates_ge() {
        let mut p = MilpProblem::new(ObjSense::Maximize);
        let x = p.add_var(VariableDef::continuous(0.0, 10.0));
        p.add_constraint(LinearConstraint::new(vec![(x, 1.0)], Sense::Ge, 2.0));
        p.objective = vec![(x, 1.0)];
        let r = check_feasibility(&p, &[0.0], 1e-6).unwrap();
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].kind, ViolationKind::Constraint);
        assert!((r.violations[0].magnitude - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fractional_binary_flagged() {
        let mut p = MilpProblem::new(ObjSense::Maximize);
        let _ = p.add_var(VariableDef::binary());
        p.objective = vec![(0, 1.0)];
        let r = check_feasibility(&p, &[0.5], 1e-5).unwrap();
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].kind, ViolationKind::Integrality);
    }

    #[test]
    fn length_mismatch_rejected() {
        let mut p = MilpProblem::new(ObjSense::Maximize);
        let _ = p.add_var(VariableDef::binary());
        p.objective = vec![(0, 1.0)];
        assert!(check_feasibility(&p, &[0.0, 1.0], 1e-6).is_err());
    }

    #[test]
    fn optimal_solution_is_clean() {
        let mut p = MilpProblem::new(ObjSense::Maximize);
        let a = p.add_var(VariableDef::binary());
        let b = p.add_var(VariableDef::binary());
        p.add_constraint(LinearConstraint::new(vec![(a, 1.0), (b, 1.0)], Sense::Le, 1.5));
        p.objective = vec![(a, 1.0), (b, 2.0)];
        let s = crate::bnb::solve_milp(&p, &crate::bnb::SolverOptions::default()).unwrap();
        let r = check_feasibility(&p, s.values.as_ref().unwrap(), 1e-6).unwrap();
        assert!(r.is_feasible());
    }
}
