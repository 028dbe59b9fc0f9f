//! Bound-driven reductions applied before the search: fixed-variable
//! elimination, activity-redundant row removal, and substitution of
//! continuous column singletons whose single row always binds (the
//! epigraph-slack pattern). Every reduction is exact; `postsolve`
//! reconstructs a full solution vector that satisfies the original rows.

use crate::problem::{
    LinearConstraint, MilpProblem, ObjSense, Sense, VarKind, VariableDef,
};

/// How one original variable is recovered from a reduced solution.
#[derive(Debug, Clone)]
enum VarFate {
    /// Column kept; payload is the reduced index.
    Kept(usize),
    /// Bounds pinned the value.
    Fixed(f64),
    /// x = (b - sum(coef * x_orig)) / a, evaluated during postsolve.
    Substituted { a: f64, b: f64, rest: Vec<(usize, f64)> },
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub problem: MilpProblem,
    fates: Vec<VarFate>,
    /// Substituted variables in dependency order (rest vars precede).
    subst_order: Vec<usize>,
    pub obj_offset: f64,
}

#[derive(Debug, Clone)]
pub enum PresolveResult {
    Reduced(Reduction),
    /// A row became constant and violated; no solution exists.
    Infeasible,
}

impl Reduction {
    /// Expand a reduced solution vector to the original variable space.
    pub fn postsolve(&self, reduced_values: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.fates.len()];
        for (j, fate) in self.fates.iter().enumerate() {
            match fate {
                VarFate::Kept(r) => full[j] = reduced_values[*r],
                VarFate::Fixed(v) => full[j] = *v,
                VarFate::Substituted { .. } => {}
            }
        }
        for &j in &self.subst_order {
            if let VarFate::Substituted { a, b, rest } = &self.fates[j] {
                let rest_val: f64 = rest.iter().map(|&(k, c)| c * full[k]).sum();
                full[j] = (b - rest_val) / a;
            }
        }
        full
    }

    /// Reduced index of an original column, if the column survived.
    pub fn reduced_index(&self, j: usize) -> Option<usize> {
        match self.fates.get(j) {
            Some(VarFate::Kept(r)) => Some(*r),
            _ => None,
        }
    }
}

/// Activity range of a term list under variable bounds (fixed vars folded
/// out beforehand, so every referenced variable is live).
fn activity(terms: &[(usize, f64)], vars: &[VariableDef]) -> (f64, f64) {
    let mut lo = 0.0;
    let mut hi = 0.0;
    for &(j, c) in terms {
        let (l, u) = (vars[j].lower, vars[j].upper);
        if c >= 0.0 {
            lo += c * l;
            hi += c * u;
        } else {
            lo += c * u;
            hi += c * l;
        }
    }
    (lo, hi)
}

pub fn presolve(problem: &MilpProblem, feas_tol: f64) -> PresolveResult {
    let n = problem.variables.len();
    let mut fates: Vec<Option<VarFate>> = vec![None; n];

    // Pass 0: eliminate variables whose bounds pin them.
    for (j, v) in problem.variables.iter().enumerate() {
        if v.lower == v.upper {
            fates[j] = Some(VarFate::Fixed(v.lower));
        }
    }

    // Fold fixed variables into row constants.
    struct Row {
        terms: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
        alive: bool,
    }
    let mut rows: Vec<Row> = Vec::with_capacity(problem.constraints.len());
    for c in &problem.constraints {
        let mut rhs = c.rhs;
        let mut terms = Vec::with_capacity(c.terms.len());
        for &(j, coef) in &c.terms {
            match &fates[j] {
                Some(VarFate::Fixed(v)) => rhs -= coef * v,
                _ => terms.push((j, coef)),
            }
        }
        rows.push(Row { terms, sense: c.sense, rhs, alive: true });
    }

    // Pass 1: drop rows implied by bounds; flag constant violated rows.
    for row in rows.iter_mut() {
        if row.terms.is_empty() {
            let ok = match row.sense {
                Sense::Le => 0.0 <= row.rhs + feas_tol,
                Sense::Ge => 0.0 >= row.rhs - feas_tol,
                Sense::Eq => row.rhs.abs() <= feas_tol,
            };
            if !ok {
                return PresolveResult::Infeasible;
            }
            row.alive = false;
            continue;
        }
        let (lo, hi) = activity(&row.terms, &problem.variables);
        row.alive = match row.sense {
            Sense::Le => hi > row.rhs,
            Sense::Ge => lo < row.rhs,
            Sense::Eq => !(lo >= row.rhs && hi <= row.rhs),
        };
    }

    // Pass 2: substitute continuous singletons on their binding side.
    let mut occurrence: Vec<Option<usize>> = vec![None; n]; // unique live row
    let mut occur_count = vec![0usize; n];
    for (r, row) in rows.iter().enumerate() {
        if !row.alive {
            continue;
        }
        for &(j, _) in &row.terms {
            occur_count[j] += 1;
            occurrence[j] = Some(r);
        }
    }
    let mut subst_order = Vec::new();
    let mut obj_coef = vec![0.0; n];
    for &(j, c) in &problem.objective {
        obj_coef[j] += c;
    }
    let mut obj_offset = 0.0;
    for (j, v) in problem.variables.iter().enumerate() {
        if fates[j].is_some() || v.kind != VarKind::Continuous || occur_count[j] != 1 {
            continue;
        }
        let r = occurrence[j].unwrap();
        if !rows[r].alive || rows[r].sense == Sense::Eq {
            continue;
        }
        let c = obj_coef[j];
        if c == 0.0 {
            continue;
        }
        let a = rows[r].terms.iter().find(|&&(k, _)| k == j).unwrap().1;
        if a == 0.0 {
            continue;
        }
        // Does this row bound x_j on the side the objective pushes toward?
        let row_gives_upper = (rows[r].sense == Sense::Le) == (a > 0.0);
        let wants_upper = (problem.obj_sense == ObjSense::Maximize) == (c > 0.0);
        if row_gives_upper != wants_upper {
            continue;
        }
        // Other variables already substituted may not appear here.
        let rest: Vec<(usize, f64)> = rows[r]
            .terms
            .iter()
            .copied()
            .filter(|&(k, _)| k != j)
            .collect();
        if rest.iter().any(|&(k, _)| matches!(fates[k], Some(VarFate::Substituted { .. }))) {
            continue;
        }
        // x_j = (b - rest)/a must stay inside the variable's own bounds
        // for every feasible rest, otherwise a bound can bind instead.
        let (rest_lo, rest_hi) = activity(&rest, &problem.variables);
        if !rest_lo.is_finite() || !rest_hi.is_finite() {
            continue;
        }
        let (q1, q2) = ((rows[r].rhs - rest_lo) / a, (rows[r].rhs - rest_hi) / a);
        let (q_lo, q_hi) = (q1.min(q2), q1.max(q2));
        if q_lo < v.lower || q_hi > v.upper {
            continue;
        }
        // Fold x_j out of the objective: c * (b - rest)/a.
        obj_offset += c * rows[r].rhs / a;
        for &(k, coef) in &rest {
            obj_coef[k] -= c * coef / a;
        }
        fates[j] = Some(VarFate::Substituted { a, b: rows[r].rhs, rest });
        subst_order.push(j);
        rows[r].alive = false;
    }

    // Objective constant from fixed variables.
    for (j, fate) in fates.iter().enumerate() {
        if let Some(VarFate::Fixed(v)) = fate {
            obj_offset += obj_coef[j] * v;
            obj_coef[j] = 0.0;
        }
    }

    // Assemble the reduced problem.
    let mut reduced = MilpProblem::new(problem.obj_sense);
    let mut new_idx = vec![usize::MAX; n];
    let mut final_fates = Vec::with_capacity(n);
    for (j, fate) in fates.into_iter().enumerate() {
        match fate {
            Some(f) => final_fates.push(f),
            None => {
                new_idx[j] = reduced.add_var(problem.variables[j]);
                final_fates.push(VarFate::Kept(new_idx[j]));
            }
        }
    }
    for row in &rows {
        if !row.alive {
            continue;
        }
        let terms: Vec<(usize, f64)> =
            row.terms.iter().map(|&(j, c)| (new_idx[j], c)).collect();
        reduced.add_constraint(LinearConstraint::new(terms, row.sense, row.rhs));
    }
    reduced.objective = (0..n)
        .filter(|&j| new_idx[j] != usize::MAX && obj_coef[j] != 0.0)
        .map(|j| (new_idx[j], obj_coef[j]))
        .collect();

    PresolveResult::Reduced(Reduction {
        problem: reduced,
        fates: final_fates,
        subst_order,
        obj_offset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{ObjSense, Sense};

    #[test]
    fn epigraph_slack_is_substituted() {
        // max 2x - w  s.t.  w >= 10 - x, x in [0, 8], w >= 0
        let mut p = MilpProblem::new(ObjSense::Maximize);
        let x = p.add_var(VariableDef::continuous(0.0, 8.0));
        let w = p.add_var(VariableDef::continuous(0.0, f64::INFINITY));
        p.add_constraint(LinearConstraint::new(vec![(x, -1.0), (w, -1.0)], Sense::Le, -10.0));
        p.objective = vec![(x, 2.0), (w, -1.0)];
        let PresolveResult::Reduced(red) = presolve(&p, 1e-6) else { panic!() };
        assert_eq!(red.problem.num_vars(), 1);
        assert_eq!(red.problem.constraints.len(), 0);
        // reduced objective: 2x - (10 - x) = 3x - 10 -> x = 8
        let full = red.postsolve(&[8.0]);
        assert_eq!(full, vec![8.0, 2.0]);
        assert!((red.obj_offset - (-10.0)).abs() < 1e-12);
    }

    #[test]
    fn redundant_row_dropped_and_fixed_var_folded() {
        let mut p = MilpProblem::new(ObjSense::Maximize);
        let x = p.add_var(VariableDef::continuous(0.0, 5.0));
        let z = p.add_var(VariableDef::binary_fixed(1.0));
        // x + z <= 100 is implied by bounds; x - z <= 2 is not
        p.add_constraint(LinearConstraint::new(vec![(x, 1.0), (z, 1.0)], Sense::Le, 100.0));
        p.add_constraint(LinearConstraint::new(vec![(x, 1.0), (z, -1.0)], Sense::Le, 2.0));
        p.objective = vec![(x, 1.0), (z, 5.0)];
        let PresolveResult::Reduced(red) = presolve(&p, 1e-6) else { panic!() };
        // z folds into the rhs (x <= 3), then x itself is a binding
        // singleton: everything disappears into the offset.
        assert_eq!(red.problem.num_vars(), 0);
        assert_eq!(red.problem.constraints.len(), 0);
        assert!((red.obj_offset - 8.0).abs() < 1e-12);
        let full = red.postsolve(&[]);
        assert_eq!(full, vec![3.0, 1.0]);
    }

    #[test]
    fn constant_violated_row_is_infeasible() {
        let mut p = MilpProblem::new(ObjSense::Maximize);
        let z = p.add_var(VariableDef::binary_fixed(0.0));
        p.add_constraint(LinearConstraint::new(vec![(z, 1.0)], Sense::Ge, 1.0));
        assert!(matches!(presolve(&p, 1e-6), PresolveResult::Infeasible));
    }

    #[test]
    fn wrong_side_singleton_kept() {
        // objective pushes x_j up but its single row only bounds it below
        let mut p = MilpProblem::new(ObjSense::Maximize);
        let x = p.add_var(VariableDef::continuous(0.0, 8.0));
        let w = p.add_var(VariableDef::continuous(0.0, 100.0));
        p.add_constraint(LinearConstraint::new(vec![(x, -1.0), (w, -1.0)], Sense::Le, -10.0));
        p.objective = vec![(x, 2.0), (w, 1.0)];
        let PresolveResult::Reduced(red) = presolve(&p, 1e-6) else { panic!() };
        assert_eq!(red.problem.num_vars(), 2);
    }
}
