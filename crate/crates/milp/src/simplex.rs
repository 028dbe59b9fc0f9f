//! Dense two-phase simplex with Bland's rule.
//!
//! The problem is rewritten in standard form: every variable is shifted or
//! split so it is nonnegative, finite upper bounds become extra rows, and
//! Ge/Eq rows get artificial variables for phase 1. Bland's rule (lowest
//! eligible index enters, lowest-index basic variable leaves on ties) is
//! always on, so the pivot sequence cannot cycle and is deterministic.

use crate::problem::{MilpError, MilpProblem, MilpSolution, ObjSense, Sense, SolveStatus};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub status: LpStatus,
    pub values: Option<Vec<f64>>,
    pub objective: Option<f64>,
}

/// Solve the LP relaxation (integrality dropped) of `problem`.
pub fn solve_lp_relaxation(problem: &MilpProblem) -> Result<MilpSolution, MilpError> {
    problem.validate()?;
    let start = std::time::Instant::now();
    let out = solve_with_overrides(problem, &[])?;
    let status = match out.status {
        LpStatus::Optimal => SolveStatus::Optimal,
        LpStatus::Infeasible => SolveStatus::Infeasible,
        LpStatus::Unbounded => SolveStatus::Unbounded,
    };
    Ok(MilpSolution {
        status,
        values: out.values,
        objective: out.objective,
        node_count: 0,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// How one original variable maps into the nonnegative standard form.
enum VarMap {
    /// x = offset + y, y >= 0
    Shift { col: usize, offset: f64 },
    /// x = offset - y, y >= 0 (upper bound only)
    Mirror { col: usize, offset: f64 },
    /// x = y_pos - y_neg (free)
    Split { pos: usize, neg: usize },
}

/// Solve with per-variable bound overrides (used by branch-and-bound to fix
/// binaries without mutating the problem).
pub fn solve_with_overrides(
    problem: &MilpProblem,
    overrides: &[(usize, f64, f64)],
) -> Result<LpOutcome, MilpError> {
    let n = problem.num_vars();
    let mut lower: Vec<f64> = problem.variables.iter().map(|v| v.lower).collect();
    let mut upper: Vec<f64> = problem.variables.iter().map(|v| v.upper).collect();
    for &(j, lo, hi) in overrides {
        if j >= n {
            return Err(MilpError::InvalidArgument(format!("override index {j} out of range")));
        }
        lower[j] = lo;
        upper[j] = hi;
    }
    for j in 0..n {
        if lower[j] > upper[j] {
            // trivially infeasible box
            return Ok(LpOutcome { status: LpStatus::Infeasible, values: None, objective: None });
        }
    }

    // Map variables to nonnegative columns.
    let mut maps: Vec<VarMap> = Vec::with_capacity(n);
    let mut ncols = 0usize;
    // extra rows for two-sided bounds: (col, range)
    let mut ub_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (l, u) = (lower[j], upper[j]);
        if l.is_finite() {
            maps.push(VarMap::Shift { col: ncols, offset: l });
            if u.is_finite() {
                ub_rows.push((ncols, u - l));
            }
            ncols += 1;
        } else if u.is_finite() {
            maps.push(VarMap::Mirror { col: ncols, offset: u });
            ncols += 1;
        } else {
            maps.push(VarMap::Split { pos: ncols, neg: ncols + 1 });
            ncols += 2;
        }
    }

    // Assemble rows in y-space: (coeffs over ncols, sense, rhs).
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::new();
    for c in &problem.constraints {
        let mut coeffs = vec![0.0; ncols];
        let mut rhs = c.rhs;
        for &(j, a) in &c.terms {
            match maps[j] {
                VarMap::Shift { col, offset } => {
                    coeffs[col] += a;
                    rhs -= a * offset;
                }
                VarMap::Mirror { col, offset } => {
                    coeffs[col] -= a;
                    rhs -= a * offset;
                }
                VarMap::Split { pos, neg } => {
                    coeffs[pos] += a;
                    coeffs[neg] -= a;
                }
            }
        }
        rows.push((coeffs, c.sense, rhs));
    }
    for &(col, range) in &ub_rows {
        let mut coeffs = vec![0.0; ncols];
        coeffs[col] = 1.0;
        rows.push((coeffs, Sense::Le, range));
    }

    // Objective in y-space (internally always maximize).
    let sign = match problem.obj_sense {
        ObjSense::Maximize => 1.0,
        ObjSense::Minimize => -1.0,
    };
    let mut obj = vec![0.0; ncols];
    for &(j, c) in &problem.objective {
        let c = c * sign;
        match maps[j] {
            VarMap::Shift { col, .. } => obj[col] += c,
            VarMap::Mirror { col, .. } => obj[col] -= c,
            VarMap::Split { pos, neg } => {
                obj[pos] += c;
                obj[neg] -= c;
            }
        }
    }

    let m = rows.len();
    if m == 0 {
        // No rows at all: every remaining column is unbounded above, so any
        // positive cost makes the problem unbounded; otherwise y = 0.
        if obj.iter().any(|&c| c > COST_TOL) {
            return Ok(LpOutcome { status: LpStatus::Unbounded, values: None, objective: None });
        }
        let y = vec![0.0; ncols];
        let values = recover(&maps, &y, n);
        let objective = problem.objective_value(&values);
        return Ok(LpOutcome { status: LpStatus::Optimal, values: Some(values), objective: Some(objective) });
    }

    // Normalize rhs >= 0, then add slack/artificial columns.
    for (coeffs, sense, rhs) in rows.iter_mut() {
        if *rhs < 0.0 {
            for v in coeffs.iter_mut() {
                *v = -*v;
            }
            *rhs = -*rhs;
            *sense = match *sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }
    let n_slack = rows
        .iter()
        .filter(|(_, s, _)| matches!(s, Sense::Le | Sense::Ge))
        .count();
    let n_art = rows
        .iter()
        .filter(|(_, s, _)| matches!(s, Sense::Ge | Sense::Eq))
        .count();
    let total = ncols + n_slack + n_art;
    let width = total + 1; // + rhs column

    let mut tab = vec![0.0; m * width];
    let mut basis = vec![0usize; m];
    let mut is_artificial = vec![false; total];
    let mut slack_at = ncols;
    let mut art_at = ncols + n_slack;
    for (i, (coeffs, sense, rhs)) in rows.iter().enumerate() {
        let row = &mut tab[i * width..(i + 1) * width];
        row[..ncols].copy_from_slice(coeffs);
        row[total] = *rhs;
        match sense {
            Sense::Le => {
                row[slack_at] = 1.0;
                basis[i] = slack_at;
                slack_at += 1;
            }
            Sense::Ge => {
                row[slack_at] = -1.0;
                slack_at += 1;
                row[art_at] = 1.0;
                is_artificial[art_at] = true;
                basis[i] = art_at;
                art_at += 1;
            }
            Sense::Eq => {
                row[art_at] = 1.0;
                is_artificial[art_at] = true;
                basis[i] = art_at;
                art_at += 1;
            }
        }
    }

    // Phase 1: maximize -(sum of artificials). Cost row holds z_j - c_j.
    if n_art > 0 {
        // Maximize -(sum of artificials): c_j = -1 on artificials. The cost
        // row stores z_j - c_j, priced out over the initial basis.
        let mut cost = vec![0.0; width];
        for j in 0..total {
            if is_artificial[j] {
                cost[j] = 1.0; // -c_j
            }
        }
        for i in 0..m {
            if is_artificial[basis[i]] {
                // z row += (-1) * row? c_B = -1 -> z_j = sum c_B * a_ij
                for j in 0..width {
                    cost[j] -= tab[i * width + j];
                }
            }
        }
        let st = run_simplex(&mut tab, &mut cost, &mut basis, m, total, width, None);
        if st == LpStatus::Unbounded {
            // cannot happen in phase 1 (objective bounded by 0); treat as error
            return Err(MilpError::Backend("phase-1 simplex reported unbounded".into()));
        }
        // Objective of phase 1 = -sum artificials; stored in cost[total] as -obj.
        let infeas: f64 = (0..m)
            .filter(|&i| is_artificial[basis[i]])
            .map(|i| tab[i * width + total])
            .sum();
        if infeas > PHASE1_TOL {
            return Ok(LpOutcome { status: LpStatus::Infeasible, values: None, objective: None });
        }
        // Drive remaining zero-level artificials out of the basis.
        for i in 0..m {
            if is_artificial[basis[i]] {
                let mut pivoted = false;
                for j in 0..ncols + n_slack {
                    if tab[i * width + j].abs() > PIVOT_TOL {
                        pivot(&mut tab, &mut basis, m, width, i, j);
                        pivoted = true;
                        break;
                    }
                }
                if !pivoted {
                    // redundant row; leave the artificial basic at zero
                    tab[i * width + total] = 0.0;
                }
            }
        }
    }

    // Phase 2: real objective, artificials barred from entering.
    let mut cost = vec![0.0; width];
    for (j, &c) in obj.iter().enumerate() {
        cost[j] = -c; // -c_j
    }
    // Price out basic variables.
    for i in 0..m {
        let b = basis[i];
        let cb = if b < ncols { obj[b] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..width {
                cost[j] += cb * tab[i * width + j];
            }
        }
    }
    let st = run_simplex(&mut tab, &mut cost, &mut basis, m, total, width, Some(&is_artificial));
    if st == LpStatus::Unbounded {
        return Ok(LpOutcome { status: LpStatus::Unbounded, values: None, objective: None });
    }

    let mut y = vec![0.0; total];
    for i in 0..m {
        y[basis[i]] = tab[i * width + total];
    }
    let values = recover(&maps, &y, n);
    let objective = problem.objective_value(&values);
    Ok(LpOutcome { status: LpStatus::Optimal, values: Some(values), objective: Some(objective) })
}

fn recover(maps: &[VarMap], y: &[f64], n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for (j, map) in maps.iter().enumerate().take(n) {
        x[j] = match *map {
            VarMap::Shift { col, offset } => offset + y[col],
            VarMap::Mirror { col, offset } => offset - y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        };
    }
    x
}

fn pivot(tab: &mut [f64], basis: &mut [usize], m: usize, width: usize, r: usize, c: usize) {
    let p = tab[r * width + c];
    for j in 0..width {
        tab[r * width + j] /= p;
    }
    for i in 0..m {
        if i != r {
            let f = tab[i * width + c];
            if f != 0.0 {
                for j in 0..width {
                    tab[i * width + j] -= f * tab[r * width + j];
                }
            }
        }
    }
    basis[r] = c;
}

/// Bland's rule iteration loop over a tableau plus separate cost row.
fn run_simplex(
    tab: &mut [f64],
    cost: &mut [f64],
    basis: &mut [usize],
    m: usize,
    total: usize,
    width: usize,
    barred: Option<&[bool]>,
) -> LpStatus {
    loop {
        // Entering: lowest index with negative reduced cost (z_j - c_j < 0).
        let mut enter = None;
        for j in 0..total {
            if let Some(b) = barred {
                if b[j] {
                    continue;
                }
            }
            if cost[j] < -COST_TOL {
                enter = Some(j);
                break;
            }
        }
        let Some(c) = enter else { return LpStatus::Optimal };

        // Leaving: min ratio; ties broken by lowest basic variable index.
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = tab[i * width + c];
            if a > PIVOT_TOL {
                let ratio = tab[i * width + total] / a;
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - PIVOT_TOL
                            || ((ratio - lr).abs() <= PIVOT_TOL && basis[i] < basis[li])
                        {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((r, _)) = leave else { return LpStatus::Unbounded };

        // Pivot rows, then the cost row.
        pivot(tab, basis, m, width, r, c);
        let f = cost[c];
        if f != 0.0 {
            for j in 0..width {
                cost[j] -= f * tab[r * width + j];
            }
        }
    }
}
