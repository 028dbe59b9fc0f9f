//! LP backend contract.
//!
//! Branch-and-bound only needs "solve this LP with some variable bounds
//! tightened". The bundled dense simplex implements that directly; the
//! sparse backend adapts the `microlp` revised-simplex crate for instances
//! where a dense tableau would be too large. External solvers can be
//! plugged in behind the same trait.

use crate::problem::{MilpError, MilpProblem, ObjSense, Sense};
use crate::simplex::{self, LpOutcome, LpStatus};

pub trait LpBackend {
    /// Solve the LP relaxation with per-variable bound overrides
    /// `(index, lower, upper)` applied on top of the declared bounds.
    fn solve_lp(
        &self,
        problem: &MilpProblem,
        overrides: &[(usize, f64, f64)],
    ) -> Result<LpOutcome, MilpError>;
}

/// Bundled dense two-phase simplex (Bland's rule).
pub struct DenseSimplex;

impl LpBackend for DenseSimplex {
    fn solve_lp(
        &self,
        problem: &MilpProblem,
        overrides: &[(usize, f64, f64)],
    ) -> Result<LpOutcome, MilpError> {
        simplex::solve_with_overrides(problem, overrides)
    }
}

/// Sparse revised simplex via the `microlp` crate.
///
/// The first call (no overrides) solves from scratch and keeps the
/// solution; later calls clone that basis and apply the overrides as
/// incremental `fix_var` re-solves, which is what makes node solves in
/// branch-and-bound cheap. The cache is tied to one problem instance.
#[derive(Default)]
pub struct SparseBackend {
    cache: std::cell::RefCell<Option<SparseCache>>,
}

struct SparseCache {
    problem_addr: usize,
    vars: Vec<microlp::Variable>,
    root: microlp::Solution,
    /// Recently replayed fix sequences and their solutions. Branch-and-
    /// bound children extend their parent's fixes by one, so a prefix hit
    /// turns a depth-long replay into a single incremental re-solve.
    replayed: std::collections::VecDeque<(Vec<(usize, f64)>, microlp::Solution)>,
}

/// Cache capacity sized to a rough memory budget: a cached basis costs on
/// the order of 100 bytes per variable-plus-row.
fn replay_cache_cap(problem: &MilpProblem) -> usize {
    let size = problem.num_vars() + problem.constraints.len();
    (8_000_000 / size.max(1)).clamp(64, 768)
}

impl SparseBackend {
    /// From-scratch solve; caches the basis only for the un-overridden root.
    fn solve_from_scratch(
        &self,
        problem: &MilpProblem,
        overrides: &[(usize, f64, f64)],
    ) -> Result<LpOutcome, MilpError> {
        let n = problem.num_vars();
        let mut lower: Vec<f64> = problem.variables.iter().map(|v| v.lower).collect();
        let mut upper: Vec<f64> = problem.variables.iter().map(|v| v.upper).collect();
        for &(j, lo, hi) in overrides {
            lower[j] = lo.max(lower[j]);
            upper[j] = hi.min(upper[j]);
            if lower[j] > upper[j] {
                return Ok(LpOutcome { status: LpStatus::Infeasible, values: None, objective: None });
            }
        }
        let direction = match problem.obj_sense {
            ObjSense::Maximize => microlp::OptimizationDirection::Maximize,
            ObjSense::Minimize => microlp::OptimizationDirection::Minimize,
        };
        let mut obj = vec![0.0; n];
        for &(j, c) in &problem.objective {
            obj[j] += c;
        }
        let mut prob = microlp::Problem::new(direction);
        let vars: Vec<microlp::Variable> = (0..n)
            .map(|j| prob.add_var(obj[j], (lower[j], upper[j])))
            .collect();
        for c in &problem.constraints {
            let mut expr = microlp::LinearExpr::empty();
            for &(j, a) in &c.terms {
                expr.add(vars[j], a);
            }
            let op = match c.sense {
                Sense::Le => microlp::ComparisonOp::Le,
                Sense::Ge => microlp::ComparisonOp::Ge,
                Sense::Eq => microlp::ComparisonOp::Eq,
            };
            prob.add_constraint(expr, op, c.rhs);
        }
        match prob.solve() {
            Ok(sol) => {
                let values: Vec<f64> = vars.iter().map(|&v| sol[v]).collect();
                let objective = problem.objective_value(&values);
                if overrides.is_empty() {
                    *self.cache.borrow_mut() = Some(SparseCache {
                        problem_addr: problem as *const _ as usize,
                        vars,
                        root: sol,
                        replayed: std::collections::VecDeque::new(),
                    });
                }
                Ok(LpOutcome {
                    status: LpStatus::Optimal,
                    values: Some(values),
                    objective: Some(objective),
                })
            }
            Err(microlp::Error::Infeasible) => {
                Ok(LpOutcome { status: LpStatus::Infeasible, values: None, objective: None })
            }
            Err(microlp::Error::Unbounded) => {
                Ok(LpOutcome { status: LpStatus::Unbounded, values: None, objective: None })
            }
            // Numerical breakdown (e.g. a singular basis). Rare; fall back
            // to the dense exact simplex when the instance is small enough
            // for a tableau, otherwise surface the failure.
            Err(e) => {
                if n <= 2000 && problem.constraints.len() <= 6000 {
                    simplex::solve_with_overrides(problem, overrides)
                } else {
                    Err(MilpError::Backend(format!("microlp: {e:?}")))
                }
            }
        }
    }
}

impl LpBackend for SparseBackend {
    fn solve_lp(
        &self,
        problem: &MilpProblem,
        overrides: &[(usize, f64, f64)],
    ) -> Result<LpOutcome, MilpError> {
        let n = problem.num_vars();
        for &(j, lo, hi) in overrides {
            if j >= n {
                return Err(MilpError::InvalidArgument(format!(
                    "override index {j} out of range"
                )));
            }
            if lo > hi
                || lo > problem.variables[j].upper
                || hi < problem.variables[j].lower
            {
                return Ok(LpOutcome { status: LpStatus::Infeasible, values: None, objective: None });
            }
        }

        // True interval overrides cannot be replayed as fixes.
        if overrides.iter().any(|&(_, lo, hi)| lo != hi) {
            return self.solve_from_scratch(problem, overrides);
        }

        let addr = problem as *const _ as usize;
        let cache_valid = self
            .cache
            .borrow()
            .as_ref()
            .map(|c| c.problem_addr == addr)
            .unwrap_or(false);
        if !cache_valid {
            let root = self.solve_from_scratch(problem, &[])?;
            if overrides.is_empty() || root.status != LpStatus::Optimal {
                return Ok(root);
            }
        } else if overrides.is_empty() {
            let cache = self.cache.borrow();
            let c = cache.as_ref().unwrap();
            let values: Vec<f64> = c.vars.iter().map(|&v| c.root[v]).collect();
            let objective = problem.objective_value(&values);
            return Ok(LpOutcome {
                status: LpStatus::Optimal,
                values: Some(values),
                objective: Some(objective),
            });
        }

        // Replay the fixes incrementally, starting from the longest cached
        // prefix (usually the parent node), else the root basis.
        let mut cache = self.cache.borrow_mut();
        let c = cache.as_mut().expect("root solve populates the cache");
        let want: Vec<(usize, f64)> = overrides.iter().map(|&(j, lo, _)| (j, lo)).collect();
        let mut start = 0;
        let mut sol = None;
        for (key, s) in c.replayed.iter() {
            if key.len() >= start && key.len() <= want.len() && want[..key.len()] == key[..] {
                start = key.len();
                sol = Some(s.clone());
            }
        }
        let mut sol = sol.unwrap_or_else(|| c.root.clone());
        for &(j, v) in &want[start..] {
            match sol.fix_var(c.vars[j], v) {
                Ok(next) => sol = next,
                Err(microlp::Error::Infeasible) => {
                    return Ok(LpOutcome {
                        status: LpStatus::Infeasible,
                        values: None,
                        objective: None,
                    })
                }
                Err(microlp::Error::Unbounded) => {
                    return Ok(LpOutcome {
                        status: LpStatus::Unbounded,
                        values: None,
                        objective: None,
                    })
                }
                // Basis gone numerically bad mid-replay: retry cold with
                // the fixes as plain bounds.
                Err(_) => {
                    drop(cache);
                    return self.solve_from_scratch(problem, overrides);
                }
            }
        }
        let values: Vec<f64> = c.vars.iter().map(|&v| sol[v]).collect();
        let objective = problem.objective_value(&values);
        if !want.is_empty() {
            if c.replayed.len() >= replay_cache_cap(problem) {
                c.replayed.pop_front();
            }
            c.replayed.push_back((want, sol));
        }
        Ok(LpOutcome { status: LpStatus::Optimal, values: Some(values), objective: Some(objective) })
    }
}

/// Which backend to use for LP relaxations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackendChoice {
    /// Dense for small instances, sparse past the size threshold.
    #[default]
    Auto,
    Dense,
    Sparse,
}

impl BackendChoice {
    /// A fresh backend per search, so the sparse basis cache never leaks
    /// across problems.
    pub fn resolve(self, problem: &MilpProblem) -> Box<dyn LpBackend> {
        match self {
            BackendChoice::Dense => Box::new(DenseSimplex),
            BackendChoice::Sparse => Box::new(SparseBackend::default()),
            BackendChoice::Auto => {
                if problem.num_vars() <= 150 && problem.constraints.len() <= 300 {
                    Box::new(DenseSimplex)
                } else {
                    Box::new(SparseBackend::default())
                }
            }
        }
    }
}
