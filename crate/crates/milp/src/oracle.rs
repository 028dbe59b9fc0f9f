//! Test-support oracles, independent of the simplex/branch-and-bound path.
//!
//! The LP oracle enumerates basic points (all n-subsets of constraint and
//! bound hyperplanes) and picks the best feasible one; the MILP oracle
//! brute-forces every binary assignment. Both are only usable at toy sizes,
//! which is the point: they cross-check the real solvers.

use crate::problem::{MilpProblem, ObjSense, SolveStatus, VarKind};
use crate::simplex::{solve_with_overrides, LpStatus};

const FEAS_TOL: f64 = 1e-7;

/// Best objective over all vertices of a fully boxed LP, or None when no
/// feasible vertex exists (infeasible, given every variable is boxed).
pub fn lp_vertex_enumeration(problem: &MilpProblem) -> Option<f64> {
    let n = problem.num_vars();
    // Hyperplanes: every constraint as equality, every finite bound.
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &problem.constraints {
        let mut row = vec![0.0; n];
        for &(j, a) in &c.terms {
            row[j] += a;
        }
        planes.push((row, c.rhs));
    }
    for (j, v) in problem.variables.iter().enumerate() {
        for b in [v.lower, v.upper] {
            if b.is_finite() {
                let mut row = vec![0.0; n];
                row[j] = 1.0;
                planes.push((row, b));
            }
        }
    }
    let sign = match problem.obj_sense {
        ObjSense::Maximize => 1.0,
        ObjSense::Minimize => -1.0,
    };
    let mut best: Option<f64> = None;
    let mut subset = vec![0usize; n];
    enumerate_subsets(planes.len(), n, &mut subset, 0, 0, &mut |chosen| {
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        for (r, &pi) in chosen.iter().enumerate() {
            a[r].copy_from_slice(&planes[pi].0);
            b[r] = planes[pi].1;
        }
        if let Some(x) = gauss_solve(&mut a, &mut b) {
            if point_feasible(problem, &x) {
                let obj = problem.objective_value(&x);
                let score = sign * obj;
                if best.map_or(true, |bst| score > sign * bst) {
                    best = Some(obj);
                }
            }
        }
    });
    best
}

fn point_feasible(problem: &MilpProblem, x: &[f64]) -> bool {
    for (j, v) in problem.variables.iter().enumerate() {
        if x[j] < v.lower - FEAS_TOL || x[j] > v.upper + FEAS_TOL {
            return false;
        }
    }
    problem.constraints.iter().all(|c| c.violation(x) <= FEAS_TOL)
}

fn enumerate_subsets(
    total: usize,
    k: usize,
    subset: &mut Vec<usize>,
    depth: usize,
    start: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if depth == k {
        f(subset);
        return;
    }
    for i in start..total {
        if total - i < k - depth {
            break;
        }
        subset[depth] = i;
        enumerate_subsets(total, k, subset, depth + 1, i + 1, f);
    }
}

/// Gaussian elimination with partial pivoting; None when near-singular.
fn gauss_solve(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let (pivot_row, pivot_val) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if pivot_val < 1e-9 {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Brute force over every assignment of the free binaries, each leaf solved
/// by the LP relaxation. Returns (status, best objective).
pub fn milp_brute_force(problem: &MilpProblem) -> (SolveStatus, Option<f64>) {
    let binaries: Vec<usize> = problem
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary && v.lower < v.upper)
        .map(|(j, _)| j)
        .collect();
    let sign = match problem.obj_sense {
        ObjSense::Maximize => 1.0,
        ObjSense::Minimize => -1.0,
    };
    let mut best: Option<f64> = None;
    let mut any_unbounded = false;
    for mask in 0u32..(1u32 << binaries.len()) {
        let fixes: Vec<(usize, f64, f64)> = binaries
            .iter()
            .enumerate()
            .map(|(k, &j)| {
                let v = if mask & (1 << k) != 0 { 1.0 } else { 0.0 };
                (j, v, v)
            })
            .collect();
        match solve_with_overrides(problem, &fixes).expect("oracle leaf solve") {
            out if out.status == LpStatus::Optimal => {
                let obj = out.objective.unwrap();
                if best.map_or(true, |bst| sign * obj > sign * bst) {
                    best = Some(obj);
                }
            }
            out if out.status == LpStatus::Unbounded => any_unbounded = true,
            _ => {}
        }
    }
    if any_unbounded {
        (SolveStatus::Unbounded, None)
    } else {
        match best {
            Some(obj) => (SolveStatus::Optimal, Some(obj)),
            None => (SolveStatus::Infeasible, None),
        }
    }
}

/// Tiny deterministic generator (SplitMix64) so the oracle suite does not
/// depend on an RNG crate.
pub struct Splitmix(pub u64);

impl Splitmix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [lo, hi] inclusive.
    pub fn int(&mut self, lo: i64, hi: i64) -> i64 {
        lo + (self.next_u64() % (hi - lo + 1) as u64) as i64
    }
}

/// Random fully boxed LP with <= 6 continuous variables.
pub fn random_lp(rng: &mut Splitmix) -> MilpProblem {
    use crate::problem::{LinearConstraint, Sense, VariableDef};
    let nv = rng.int(1, 6) as usize;
    let sense = if rng.int(0, 1) == 0 { ObjSense::Maximize } else { ObjSense::Minimize };
    let mut p = MilpProblem::new(sense);
    for _ in 0..nv {
        let lo = rng.int(-5, 0) as f64;
        let hi = lo + rng.int(1, 10) as f64;
        p.add_var(VariableDef::continuous(lo, hi));
    }
    let nc = rng.int(1, 10) as usize;
    for _ in 0..nc {
        let mut terms = Vec::new();
        for j in 0..nv {
            let c = rng.int(-10, 10);
            if c != 0 {
                terms.push((j, c as f64));
            }
        }
        if terms.is_empty() {
            terms.push((0, 1.0));
        }
        let s = match rng.int(0, 2) {
            0 => Sense::Le,
            1 => Sense::Ge,
            _ => Sense::Eq,
        };
        p.add_constraint(LinearConstraint::new(terms, s, rng.int(-10, 10) as f64));
    }
    for j in 0..nv {
        let c = rng.int(-10, 10);
        if c != 0 {
            p.objective.push((j, c as f64));
        }
    }
    p
}

/// Random MILP with <= 12 binaries, <= 6 boxed continuous, <= 10 rows.
pub fn random_milp(rng: &mut Splitmix) -> MilpProblem {
    use crate::problem::{LinearConstraint, Sense, VariableDef};
    let nb = rng.int(1, 12) as usize;
    let ncont = rng.int(0, 6) as usize;
    let sense = if rng.int(0, 1) == 0 { ObjSense::Maximize } else { ObjSense::Minimize };
    let mut p = MilpProblem::new(sense);
    for _ in 0..nb {
        p.add_var(VariableDef::binary());
    }
    for _ in 0..ncont {
        let lo = rng.int(-5, 0) as f64;
        let hi = lo + rng.int(1, 10) as f64;
        p.add_var(VariableDef::continuous(lo, hi));
    }
    let nv = nb + ncont;
    let nc = rng.int(1, 10) as usize;
    for _ in 0..nc {
        let mut terms = Vec::new();
        for j in 0..nv {
            let c = rng.int(-10, 10);
            if c != 0 {
                terms.push((j, c as f64));
            }
        }
        if terms.is_empty() {
            terms.push((rng.int(0, nv as i64 - 1) as usize, 1.0));
        }
        // Le/Ge only: random equalities over binaries are almost always
        // infeasible and would make the suite vacuous.
        let s = if rng.int(0, 1) == 0 { Sense::Le } else { Sense::Ge };
        p.add_constraint(LinearConstraint::new(terms, s, rng.int(-10, 10) as f64));
    }
    for j in 0..nv {
        let c = rng.int(-10, 10);
        if c != 0 {
            p.objective.push((j, c as f64));
        }
    }
    p
}
