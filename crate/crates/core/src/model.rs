//! Translate a snapshot of in-region agents into one MILP.
//!
//! Per agent the model holds 2N state variables (position and velocity for
//! steps 1..N; the initial state enters the dynamics rows as data), N
//! controls, and 2N deviation slacks. Cross-traffic separation
//! |d_p| + |d_q| >= s_dist is the complement of an L1 ball, a union of four
//! half-planes: one "crossed the center" binary per agent and step selects
//! the active sign pattern, the other rows are relaxed big-M style. Since
//! velocity is nonnegative, positions never decrease, so the crossed
//! binaries are chained monotone and pre-fixed wherever the reachable
//! position interval pins the sign. Row constants use the tightest valid
//! relaxation, capped at the configured big-M.

use std::time::Instant;

use crossflow_milp::{
    LinearConstraint, MilpProblem, MilpSolution, ObjSense, Sense, SolveStatus, VariableDef,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::SimConfig;
use crate::dynamics::{discretize_double_integrator, DynamicsMatrices, StateVector};
use crate::lane::Lane;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("scene has no agents")]
    EmptyScene,
    #[error("horizon must be >= 2, got {0}")]
    BadHorizon(usize),
    #[error("invalid scene: {0}")]
    BadScene(String),
    #[error("invalid bounds: {0}")]
    BadBounds(String),
    #[error("solver returned {0:?} instead of an optimal solution")]
    NotOptimal(SolveStatus),
    #[error(transparent)]
    Milp(#[from] crossflow_milp::MilpError),
}

/// Objective weights and the disjunction relaxation constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    /// Per-step deviation weights (position, velocity).
    pub qo: [f64; 2],
    /// Terminal deviation weights (position, velocity).
    pub po: [f64; 2],
    /// Trade-off between total velocity and deviation.
    pub lambda_v: f64,
    /// Disjunction relaxation constant, m.
    pub big_m: f64,
}

impl Default for ModelWeights {
    fn default() -> Self {
        ModelWeights { qo: [0.001, 0.01], po: [0.01, 0.1], lambda_v: 1.0, big_m: 1000.0 }
    }
}

/// One agent at the solve tick: either in-region (entry_step 0) or an
/// approaching agent whose region entry falls inside the horizon.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SceneAgent {
    pub id: u64,
    pub lane: Lane,
    pub state: StateVector,
    /// Region entry ordinal; lower entered earlier (is ahead on its lane).
    pub entry_order: u64,
    /// Horizon step at which the agent enters the control region. Until
    /// then it cruises at its current velocity (control fixed to zero):
    /// out-of-region motion is deterministic, so the model can see queue
    /// pressure from known future arrivals before they are controllable.
    #[serde(default)]
    pub entry_step: usize,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SceneSnapshot {
    pub agents: Vec<SceneAgent>,
    pub tick: u64,
}

impl SceneSnapshot {
    fn validate(&self, cfg: &SimConfig) -> Result<(), ModelError> {
        if self.agents.is_empty() {
            return Err(ModelError::EmptyScene);
        }
        for lane in Lane::ALL {
            let mut orders: Vec<u64> = self
                .agents
                .iter()
                .filter(|a| a.lane == lane)
                .map(|a| a.entry_order)
                .collect();
            orders.sort_unstable();
            if orders.windows(2).any(|w| w[0] == w[1]) {
                return Err(ModelError::BadScene(format!("duplicate entry order on lane {lane}")));
            }
        }
        for a in &self.agents {
            if a.entry_step == 0 && a.state.pos < -cfg.radius - 1e-6 {
                return Err(ModelError::BadScene(format!(
                    "agent {} at {} is outside the control region",
                    a.id, a.state.pos
                )));
            }
            if a.entry_step > 0 && a.state.pos >= -cfg.radius {
                return Err(ModelError::BadScene(format!(
                    "agent {} at {} is inside the region but has entry_step {}",
                    a.id, a.state.pos, a.entry_step
                )));
            }
        }
        Ok(())
    }
}

/// Bijection from (agent, kind, step) to variable index.
///
/// Layout: agent-major continuous block of 5N (positions 1..N, velocities
/// 1..N, controls 0..N-1, position slacks 1..N, velocity slacks 1..N),
/// then per-agent crossing binaries, then (fixed-order mode only) one
/// ordering binary per cross pair.
#[derive(Debug, Clone)]
pub struct ModelIndex {
    pub n: usize,
    pub agent_ids: Vec<u64>,
    bin_base: Vec<Option<usize>>,
    pub num_continuous: usize,
    pub num_binaries: usize,
}

impl ModelIndex {
    fn base(&self, a: usize) -> usize {
        a * 5 * self.n
    }
    /// Position at step i, i in 1..=N.
    pub fn pos(&self, a: usize, i: usize) -> usize {
        debug_assert!((1..=self.n).contains(&i));
        self.base(a) + (i - 1)
    }
    /// Velocity at step i, i in 1..=N.
    pub fn vel(&self, a: usize, i: usize) -> usize {
        debug_assert!((1..=self.n).contains(&i));
        self.base(a) + self.n + (i - 1)
    }
    /// Control at step i, i in 0..N.
    pub fn ctrl(&self, a: usize, i: usize) -> usize {
        debug_assert!(i < self.n);
        self.base(a) + 2 * self.n + i
    }
    /// Position deviation slack at step i, i in 1..=N.
    pub fn w_pos(&self, a: usize, i: usize) -> usize {
        debug_assert!((1..=self.n).contains(&i));
        self.base(a) + 3 * self.n + (i - 1)
    }
    /// Velocity deviation slack at step i, i in 1..=N.
    pub fn w_vel(&self, a: usize, i: usize) -> usize {
        debug_assert!((1..=self.n).contains(&i));
        self.base(a) + 4 * self.n + (i - 1)
    }
    /// Crossed-center binary at step i, when the agent has one.
    pub fn cross_bin(&self, a: usize, i: usize) -> Option<usize> {
        debug_assert!((1..=self.n).contains(&i));
        self.bin_base[a].map(|b| b + (i - 1))
    }
    /// Time-major branch order: decide all agents' step-1 crossings before
    /// any step-2 crossing. The layout is agent-major, so natural variable
    /// order would settle one agent's whole chain first; committing the
    /// near-term interleaving instead collapses near-tied crossing orders
    /// far earlier in the search.
    pub fn branch_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.num_binaries);
        for i in 1..=self.n {
            for a in 0..self.bin_base.len() {
                if let Some(b) = self.bin_base[a] {
                    order.push(b + (i - 1));
                }
            }
        }
        // Any trailing binaries outside the crossing blocks (fixed-order
        // mode's pair-ordering binaries) go first: they dominate the rest.
        let chain_lo = self.num_continuous + order.len();
        let mut full: Vec<usize> =
            (chain_lo..self.num_continuous + self.num_binaries).collect();
        full.extend(order);
        full
    }
}

/// Solved per-agent trajectories over the horizon.
#[derive(Debug, Clone)]
pub struct AgentPlan {
    pub id: u64,
    /// States for steps 0..=N (step 0 is the snapshot state).
    pub states: Vec<StateVector>,
    /// Controls for steps 0..N-1.
    pub controls: Vec<f64>,
}

impl AgentPlan {
    pub fn first_control(&self) -> f64 {
        self.controls[0]
    }
}

#[derive(Debug, Clone)]
pub struct HorizonPlan {
    pub agents: Vec<AgentPlan>,
}

/// Per-step reachable position interval given the input and velocity boxes.
/// Controls are pinned to zero (fixed cruise) before `entry_step`.
fn reach_bounds(
    state: StateVector,
    cfg: &SimConfig,
    mats: &DynamicsMatrices,
    n: usize,
    entry_step: usize,
) -> Vec<(f64, f64)> {
    let dt = mats.dt;
    let mut out = Vec::with_capacity(n + 1);
    out.push((state.pos, state.pos));
    let (mut lo_p, mut lo_v) = (state.pos, state.vel);
    let (mut hi_p, mut hi_v) = (state.pos, state.vel);
    for k in 1..=n {
        let (u_min, u_max) = if k <= entry_step { (0.0, 0.0) } else { (cfg.u_min, cfg.u_max) };
        let u_lo = u_min.max(-lo_v / dt);
        lo_p += dt * lo_v + 0.5 * dt * dt * u_lo;
        lo_v = (lo_v + dt * u_lo).max(0.0);
        let u_hi = u_max.min((cfg.v_max - hi_v) / dt);
        hi_p += dt * hi_v + 0.5 * dt * dt * u_hi;
        hi_v = (hi_v + dt * u_hi).min(cfg.v_max);
        out.push((lo_p, hi_p));
    }
    out
}

/// Distance from the reachable interval to the center (0 if it straddles).
fn center_distance(interval: (f64, f64)) -> f64 {
    if interval.0 > 0.0 {
        interval.0
    } else if interval.1 < 0.0 {
        -interval.1
    } else {
        0.0
    }
}

pub struct ModelBuilder<'a> {
    scene: &'a SceneSnapshot,
    cfg: &'a SimConfig,
    weights: &'a ModelWeights,
    mats: DynamicsMatrices,
    n: usize,
    problem: MilpProblem,
    index: ModelIndex,
    /// reach[a][i] for i in 0..=N
    reach: Vec<Vec<(f64, f64)>>,
    /// Scene indices of cross-constrained agents per lane.
    east_active: Vec<usize>,
    south_active: Vec<usize>,
}

impl<'a> ModelBuilder<'a> {
    pub fn new(
        scene: &'a SceneSnapshot,
        cfg: &'a SimConfig,
        weights: &'a ModelWeights,
    ) -> Result<Self, ModelError> {
        scene.validate(cfg)?;
        let n = cfg.horizon;
        if n < 2 {
            return Err(ModelError::BadHorizon(n));
        }
        if cfg.u_min >= cfg.u_max {
            return Err(ModelError::BadBounds(format!(
                "u_min {} >= u_max {}",
                cfg.u_min, cfg.u_max
            )));
        }
        if cfg.v_max <= 0.0 || cfg.position_bound() <= 0.0 {
            return Err(ModelError::BadBounds("state bounds are empty".into()));
        }
        let mats = discretize_double_integrator(cfg.dt)
            .map_err(|e| ModelError::BadBounds(e.to_string()))?;
        let mut reach: Vec<Vec<(f64, f64)>> = scene
            .agents
            .iter()
            .map(|a| reach_bounds(a.state, cfg, &mats, n, a.entry_step))
            .collect();
        // A follower can never pass its leader, so cap its upper reach at
        // the leader's minus d_safe, propagated down each lane's queue.
        for lane in Lane::ALL {
            let mut queue: Vec<usize> = (0..scene.agents.len())
                .filter(|&a| scene.agents[a].lane == lane)
                .collect();
            queue.sort_by_key(|&a| scene.agents[a].entry_order);
            for w in 0..queue.len().saturating_sub(1) {
                let (lead, follow) = (queue[w], queue[w + 1]);
                for i in 0..=n {
                    let cap = reach[lead][i].1 - cfg.d_safe;
                    if cap < reach[follow][i].1 {
                        reach[follow][i].1 = cap;
                    }
                }
            }
        }

        // Cross constraint activation: a pair is modeled only while both
        // members' measured positions are short of clearing the center by
        // s_dist. Shared per-agent binaries, so track the two sides.
        let pre = |a: &SceneAgent| a.state.pos < cfg.s_dist;
        let east_active: Vec<usize> = scene
            .agents
            .iter()
            .enumerate()
            .filter(|(_, a)| a.lane == Lane::WestEast && pre(a))
            .map(|(i, _)| i)
            .collect();
        let south_active: Vec<usize> = scene
            .agents
            .iter()
            .enumerate()
            .filter(|(_, a)| a.lane == Lane::NorthSouth && pre(a))
            .map(|(i, _)| i)
            .collect();
        let (east_active, south_active) = if east_active.is_empty() || south_active.is_empty() {
            (Vec::new(), Vec::new())
        } else {
            (east_active, south_active)
        };

        let p = scene.agents.len();
        let mut problem = MilpProblem::new(ObjSense::Maximize);
        let pos_bound = cfg.position_bound();
        // Approaching agents can sit well behind the region boundary, so
        // the lower clamp must cover the whole radar range.
        let pos_floor =
            -pos_bound.max(cfg.radius + n as f64 * cfg.v_max * cfg.dt + cfg.d_safe);
        // Rows added when a leader cap empties a position interval; the
        // contradiction surfaces as LP infeasibility instead of bad bounds.
        let mut cap_rows: Vec<(usize, f64)> = Vec::new();
        let margin = 1e-6;
        for a in 0..p {
            for i in 1..=n {
                let (lo, hi) = reach[a][i];
                let lower = (lo - margin).max(pos_floor);
                let upper = (hi + margin).min(pos_bound);
                let var = if upper >= lower {
                    problem.add_var(VariableDef::continuous(lower, upper))
                } else {
                    let v = problem.add_var(VariableDef::continuous(lower, pos_bound));
                    cap_rows.push((v, upper));
                    v
                };
                debug_assert_eq!(var, a * 5 * n + (i - 1));
            }
            for _ in 0..n {
                problem.add_var(VariableDef::continuous(0.0, cfg.v_max));
            }
            // Controls before the agent's region entry are pinned to zero:
            // it cruises, uncontrollable, until it crosses the boundary.
            let entry_step = scene.agents[a].entry_step;
            for i in 0..n {
                let def = if i < entry_step {
                    VariableDef::continuous(0.0, 0.0)
                } else {
                    VariableDef::continuous(cfg.u_min, cfg.u_max)
                };
                problem.add_var(def);
            }
            for _ in 0..2 * n {
                problem.add_var(VariableDef::continuous(0.0, f64::INFINITY));
            }
        }
        let num_continuous = problem.num_vars();
        for (v, ub) in cap_rows {
            problem.add_constraint(LinearConstraint::new(vec![(v, 1.0)], Sense::Le, ub));
        }

        let mut bin_base = vec![None; p];
        if !cfg.fixed_crossing_order {
            for &a in east_active.iter().chain(south_active.iter()) {
                let base = problem.num_vars();
                bin_base[a] = Some(base);
                for i in 1..=n {
                    let (lo, hi) = reach[a][i];
                    // Sign pre-fixing: positions never decrease, so a
                    // reachability-pinned sign stays pinned.
                    let def = if lo >= 0.0 {
                        VariableDef::binary_fixed(1.0)
                    } else if hi < 0.0 {
                        VariableDef::binary_fixed(0.0)
                    } else {
                        VariableDef::binary()
                    };
                    problem.add_var(def);
                }
            }
        }
        let num_binaries = problem.num_vars() - num_continuous;

        let index = ModelIndex {
            n,
            agent_ids: scene.agents.iter().map(|a| a.id).collect(),
            bin_base,
            num_continuous,
            num_binaries,
        };
        Ok(ModelBuilder {
            scene,
            cfg,
            weights,
            mats,
            n,
            problem,
            index,
            reach,
            east_active,
            south_active,
        })
    }

    /// Constraint 1: componentwise |s - s_f| <= w via two epigraph rows.
    pub fn add_deviation_constraints(&mut self) {
        let (pos_f, vel_f) = self.cfg.terminal_target();
        for a in 0..self.scene.agents.len() {
            for i in 1..=self.n {
                for (svar, wvar, target) in [
                    (self.index.pos(a, i), self.index.w_pos(a, i), pos_f),
                    (self.index.vel(a, i), self.index.w_vel(a, i), vel_f),
                ] {
                    self.problem.add_constraint(LinearConstraint::new(
                        vec![(svar, 1.0), (wvar, -1.0)],
                        Sense::Le,
                        target,
                    ));
                    self.problem.add_constraint(LinearConstraint::new(
                        vec![(svar, -1.0), (wvar, -1.0)],
                        Sense::Le,
                        -target,
                    ));
                }
            }
        }
    }

    /// Constraint 2: s_{i+1} = A s_i + B u_i, with s_0 pinned to the snapshot.
    pub fn add_dynamics_constraints(&mut self) {
        let dt = self.mats.dt;
        let half = 0.5 * dt * dt;
        for (a, agent) in self.scene.agents.iter().enumerate() {
            // i = 0: the initial state is data on the right-hand side.
            self.problem.add_constraint(LinearConstraint::new(
                vec![(self.index.pos(a, 1), 1.0), (self.index.ctrl(a, 0), -half)],
                Sense::Eq,
                agent.state.pos + dt * agent.state.vel,
            ));
            self.problem.add_constraint(LinearConstraint::new(
                vec![(self.index.vel(a, 1), 1.0), (self.index.ctrl(a, 0), -dt)],
                Sense::Eq,
                agent.state.vel,
            ));
            for i in 1..self.n {
                self.problem.add_constraint(LinearConstraint::new(
                    vec![
                        (self.index.pos(a, i + 1), 1.0),
                        (self.index.pos(a, i), -1.0),
                        (self.index.vel(a, i), -dt),
                        (self.index.ctrl(a, i), -half),
                    ],
                    Sense::Eq,
                    0.0,
                ));
                self.problem.add_constraint(LinearConstraint::new(
                    vec![
                        (self.index.vel(a, i + 1), 1.0),
                        (self.index.vel(a, i), -1.0),
                        (self.index.ctrl(a, i), -dt),
                    ],
                    Sense::Eq,
                    0.0,
                ));
            }
        }
    }

    /// Constraint 5: per-lane minimum gap between consecutive agents by
    /// entry order (transitivity covers the remaining pairs).
    pub fn add_same_lane_separation(&mut self) {
        for lane in Lane::ALL {
            let mut lane_agents: Vec<usize> = (0..self.scene.agents.len())
                .filter(|&a| self.scene.agents[a].lane == lane)
                .collect();
            lane_agents.sort_by_key(|&a| self.scene.agents[a].entry_order);
            for pair in lane_agents.windows(2) {
                let (ahead, behind) = (pair[0], pair[1]);
                for i in 1..=self.n {
                    self.problem.add_constraint(LinearConstraint::new(
                        vec![(self.index.pos(ahead, i), 1.0), (self.index.pos(behind, i), -1.0)],
                        Sense::Ge,
                        self.cfg.d_safe,
                    ));
                }
            }
        }
    }

    /// Constraint 6: |d_p| + |d_q| >= s_dist for active east/south pairs.
    pub fn add_intersection_separation(&mut self) {
        if self.east_active.is_empty() {
            return;
        }
        if self.cfg.fixed_crossing_order {
            self.add_fixed_order_separation();
            return;
        }
        let s_dist = self.cfg.s_dist;
        let big_m = self.weights.big_m;
        // Monotone chains: once crossed, stays crossed.
        for &a in self.east_active.iter().chain(self.south_active.iter()) {
            for i in 1..self.n {
                let (c_i, c_next) = (
                    self.index.cross_bin(a, i).unwrap(),
                    self.index.cross_bin(a, i + 1).unwrap(),
                );
                let is_fixed = |d: VariableDef| d.lower == d.upper;
                if is_fixed(self.problem.variables[c_i]) && is_fixed(self.problem.variables[c_next])
                {
                    continue;
                }
                self.problem.add_constraint(LinearConstraint::new(
                    vec![(c_next, 1.0), (c_i, -1.0)],
                    Sense::Ge,
                    0.0,
                ));
            }
        }
        // Lane-order cuts: a follower at or past the center puts its leader
        // at least d_safe past it, so the leader's crossed flag dominates
        // the follower's. Implied at integral points by the gap rows plus
        // the indicator links below, but it cuts the fractional region and
        // propagates a branch along the whole queue.
        for lane in Lane::ALL {
            if std::env::var_os("CROSSFLOW_NO_LANE_CUTS").is_some() {
                break;
            }
            let mut active: Vec<usize> = match lane {
                Lane::WestEast => self.east_active.clone(),
                Lane::NorthSouth => self.south_active.clone(),
            };
            active.sort_by_key(|&a| self.scene.agents[a].entry_order);
            for w in active.windows(2) {
                let (lead, follow) = (w[0], w[1]);
                for i in 1..=self.n {
                    let cl = self.index.cross_bin(lead, i).unwrap();
                    let cf = self.index.cross_bin(follow, i).unwrap();
                    let free = |v: VariableDef| v.lower != v.upper;
                    if free(self.problem.variables[cl]) || free(self.problem.variables[cf]) {
                        self.problem.add_constraint(LinearConstraint::new(
                            vec![(cl, 1.0), (cf, -1.0)],
                            Sense::Ge,
                            0.0,
                        ));
                    }
                }
            }
        }
        // Indicator links: c = 0 keeps the position at or below the center,
        // c = 1 at or above (with the reachability interval as the honest
        // relaxation constant). Any feasible trajectory satisfies these
        // with c_i = [x_i >= 0], and they price fractional binaries into
        // the relaxation: c stuck between 0 and 1 caps the agent's progress,
        // which the velocity objective pays for.
        let margin = 1e-6;
        let pos_bound = self.cfg.position_bound();
        for &a in self.east_active.iter().chain(self.south_active.iter()) {
            for i in 1..=self.n {
                let c = self.index.cross_bin(a, i).unwrap();
                let def = self.problem.variables[c];
                if def.lower == def.upper {
                    continue;
                }
                let (lo, hi) = self.reach[a][i];
                let lower = (lo - margin).max(-pos_bound);
                let upper = (hi + margin).min(pos_bound);
                // Near-zero constants would nearly duplicate the variable
                // bound row and destabilize the LP basis; the tightening
                // they buy is negligible.
                if upper > 1e-3 {
                    // x <= upper * c
                    self.problem.add_constraint(LinearConstraint::new(
                        vec![(self.index.pos(a, i), 1.0), (c, -upper)],
                        Sense::Le,
                        0.0,
                    ));
                }
                if lower < -1e-3 {
                    // x >= lower * (1 - c)
                    self.problem.add_constraint(LinearConstraint::new(
                        vec![(self.index.pos(a, i), 1.0), (c, lower)],
                        Sense::Ge,
                        lower,
                    ));
                }
            }
        }
        for &e in &self.east_active {
            for &s in &self.south_active {
                for i in 1..=self.n {
                    let (re, rs) = (self.reach[e][i], self.reach[s][i]);
                    if center_distance(re) + center_distance(rs) >= s_dist {
                        continue; // guaranteed separated at this step
                    }
                    // Four sign patterns; rows vacuous under a fixed binary
                    // are skipped.
                    for (sig_e, sig_s) in
                        [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
                    {
                        let min_e = if sig_e > 0.0 { re.0 } else { -re.1 };
                        let min_s = if sig_s > 0.0 { rs.0 } else { -rs.1 };
                        let m_row = (s_dist - (min_e + min_s)).max(0.0).min(big_m);
                        if m_row == 0.0 {
                            continue; // row holds for free
                        }
                        let mut terms = vec![
                            (self.index.pos(e, i), sig_e),
                            (self.index.pos(s, i), sig_s),
                        ];
                        let mut rhs = s_dist;
                        let mut vacuous = false;
                        for (&a, sig) in [(&e, sig_e), (&s, sig_s)] {
                            let c = self.index.cross_bin(a, i).unwrap();
                            let def = self.problem.variables[c];
                            let fixed = (def.lower == def.upper).then_some(def.lower);
                            // inactive term: (1 - c) for +, c for -
                            match (sig > 0.0, fixed) {
                                (true, Some(v)) if v < 0.5 => vacuous = true,
                                (false, Some(v)) if v > 0.5 => vacuous = true,
                                (_, Some(_)) => {} // matches the pattern; no relaxation
                                (true, None) => {
                                    // lhs >= s_dist - m*(1-c)
                                    terms.push((c, -m_row));
                                    rhs -= m_row;
                                }
                                (false, None) => {
                                    // lhs >= s_dist - m*c
                                    terms.push((c, m_row));
                                }
                            }
                        }
                        if vacuous {
                            continue;
                        }
                        self.problem.add_constraint(LinearConstraint::new(terms, Sense::Ge, rhs));
                    }
                }
            }
        }
        self.add_terminal_safety();
    }

    /// Terminal recursive-feasibility guard. The per-step rows keep the
    /// horizon safe, but nothing stops a plan from ending with two agents
    /// committed past their braking envelopes — feasible this tick, doomed
    /// a few ticks later. At the last step, every pair that can meet inside
    /// the horizon must either have crossed or still admit a joint
    /// brake-to-stop that respects s_dist. Stopping distance is an epigraph
    /// variable under tangent cuts on v^2/(2b), with a small margin
    /// covering the cut gap and the discrete braking profile.
    fn add_terminal_safety(&mut self) {
        let brake = -self.cfg.u_min;
        if brake <= 0.0 || std::env::var_os("CROSSFLOW_NO_TERMINAL_GUARD").is_some() {
            return;
        }
        let s_dist = self.cfg.s_dist;
        let big_m = self.weights.big_m;
        let n = self.n;
        let sd_margin = 0.2;
        let sd_cap = self.cfg.v_max * self.cfg.v_max / (2.0 * brake) + sd_margin;
        let mut stop_vars: Vec<Option<usize>> = vec![None; self.scene.agents.len()];
        for pe in 0..self.east_active.len() {
            for ps in 0..self.south_active.len() {
                let (e, s) = (self.east_active[pe], self.south_active[ps]);
                // Same inclusion rule as the per-step rows (and the conflict
                // components): pairs that cannot meet inside the horizon get
                // the guard once they can, while both still have full
                // braking room.
                let meets = (1..=n).any(|i| {
                    center_distance(self.reach[e][i]) + center_distance(self.reach[s][i])
                        < s_dist
                });
                if !meets {
                    continue;
                }
                // Sign patterns at step N; (crossed, crossed) needs no guard
                // (both move away) and is covered by the per-step row.
                for (sig_e, sig_s) in [(1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    let contrib_min = |a: usize, sig: f64| {
                        if sig > 0.0 {
                            self.reach[a][n].0
                        } else {
                            -self.reach[a][n].1 - sd_cap
                        }
                    };
                    let lhs_min = contrib_min(e, sig_e) + contrib_min(s, sig_s);
                    let m_row = (s_dist - lhs_min).max(0.0).min(big_m);
                    if m_row == 0.0 {
                        continue;
                    }
                    let mut bin_terms: Vec<(usize, f64)> = Vec::new();
                    let mut rhs = s_dist;
                    let mut vacuous = false;
                    for (&a, sig) in [(&e, sig_e), (&s, sig_s)] {
                        let c = self.index.cross_bin(a, n).unwrap();
                        let def = self.problem.variables[c];
                        let fixed = (def.lower == def.upper).then_some(def.lower);
                        match (sig > 0.0, fixed) {
                            (true, Some(v)) if v < 0.5 => vacuous = true,
                            (false, Some(v)) if v > 0.5 => vacuous = true,
                            (_, Some(_)) => {}
                            (true, None) => {
                                bin_terms.push((c, -m_row));
                                rhs -= m_row;
                            }
                            (false, None) => {
                                bin_terms.push((c, m_row));
                            }
                        }
                    }
                    if vacuous {
                        continue;
                    }
                    let mut terms = vec![
                        (self.index.pos(e, n), sig_e),
                        (self.index.pos(s, n), sig_s),
                    ];
                    for (a, sig) in [(e, sig_e), (s, sig_s)] {
                        if sig < 0.0 {
                            let sv = self.terminal_stop_var(a, &mut stop_vars, sd_cap, sd_margin, brake);
                            terms.push((sv, -1.0));
                        }
                    }
                    terms.extend(bin_terms);
                    self.problem.add_constraint(LinearConstraint::new(terms, Sense::Ge, rhs));
                }
            }
        }
    }

    /// Crossing-order pins carried across receding-horizon re-solves: for
    /// each (first, second) agent-id pair, `second` may not cross before
    /// `first`. Re-solving from scratch every tick lets the optimizer flip
    /// a planned crossing order after an agent has already burned the
    /// braking margin it would need under the other order; pinning the
    /// incumbent order once a pair member is committed keeps consecutive
    /// plans consistent. Pairs with stale or sign-fixed binaries fall
    /// through harmlessly.
    pub fn add_order_pins(&mut self, pins: &[(u64, u64)]) {
        if self.cfg.fixed_crossing_order {
            return;
        }
        for &(first, second) in pins {
            let find = |id: u64| self.index.agent_ids.iter().position(|&x| x == id);
            let (Some(f), Some(s)) = (find(first), find(second)) else { continue };
            if self.index.bin_base[f].is_none() || self.index.bin_base[s].is_none() {
                continue;
            }
            for i in 1..=self.n {
                let cf = self.index.cross_bin(f, i).unwrap();
                let cs = self.index.cross_bin(s, i).unwrap();
                let free = |v: VariableDef| v.lower != v.upper;
                if free(self.problem.variables[cf]) || free(self.problem.variables[cs]) {
                    self.problem.add_constraint(LinearConstraint::new(
                        vec![(cf, 1.0), (cs, -1.0)],
                        Sense::Ge,
                        0.0,
                    ));
                }
            }
        }
    }

    /// Epigraph variable for the braking distance of agent `a`'s terminal
    /// velocity, created on first use with its tangent cuts.
    fn terminal_stop_var(
        &mut self,
        a: usize,
        stop_vars: &mut [Option<usize>],
        sd_cap: f64,
        sd_margin: f64,
        brake: f64,
    ) -> usize {
        if let Some(v) = stop_vars[a] {
            return v;
        }
        let sv = self.problem.add_var(VariableDef::continuous(0.0, sd_cap));
        let vel_n = self.index.vel(a, self.n);
        let cuts = 6;
        for j in 0..=cuts {
            let vj = self.cfg.v_max * j as f64 / cuts as f64;
            // S >= (vj/b) v - vj^2/(2b) + margin
            self.problem.add_constraint(LinearConstraint::new(
                vec![(sv, 1.0), (vel_n, -vj / brake)],
                Sense::Ge,
                -vj * vj / (2.0 * brake) + sd_margin,
            ));
        }
        stop_vars[a] = Some(sv);
        sv
    }

    /// Optional cheaper encoding: one ordering binary per pair for the
    /// whole horizon, forcing a lane-frame lead of s_dist either way.
    fn add_fixed_order_separation(&mut self) {
        let s_dist = self.cfg.s_dist;
        let big_m = self.weights.big_m;
        for &e in &self.east_active {
            for &s in &self.south_active {
                let o = self.problem.add_var(VariableDef::binary());
                self.index.num_binaries += 1;
                for i in 1..=self.n {
                    let (re, rs) = (self.reach[e][i], self.reach[s][i]);
                    if center_distance(re) + center_distance(rs) >= s_dist {
                        continue;
                    }
                    // o = 1: east leads by s_dist; o = 0: south leads.
                    let m1 = (s_dist - (re.0 - rs.1)).max(0.0).min(big_m);
                    if m1 > 0.0 {
                        self.problem.add_constraint(LinearConstraint::new(
                            vec![
                                (self.index.pos(e, i), 1.0),
                                (self.index.pos(s, i), -1.0),
                                (o, m1),
                            ],
                            Sense::Ge,
                            s_dist,
                        ));
                    }
                    let m2 = (s_dist - (rs.0 - re.1)).max(0.0).min(big_m);
                    if m2 > 0.0 {
                        self.problem.add_constraint(LinearConstraint::new(
                            vec![
                                (self.index.pos(s, i), 1.0),
                                (self.index.pos(e, i), -1.0),
                                (o, -m2),
                            ],
                            Sense::Ge,
                            s_dist - m2,
                        ));
                    }
                }
            }
        }
    }

    /// Maximize lambda_v * J_v - J_p.
    pub fn build_objective(&mut self) {
        let w = self.weights;
        let mut obj: Vec<(usize, f64)> = Vec::new();
        for a in 0..self.scene.agents.len() {
            for i in 1..self.n {
                obj.push((self.index.vel(a, i), w.lambda_v));
                let terminal = i == self.n - 1;
                let wq = [
                    w.qo[0] + if terminal { w.po[0] } else { 0.0 },
                    w.qo[1] + if terminal { w.po[1] } else { 0.0 },
                ];
                if wq[0] != 0.0 {
                    obj.push((self.index.w_pos(a, i), -wq[0]));
                }
                if wq[1] != 0.0 {
                    obj.push((self.index.w_vel(a, i), -wq[1]));
                }
            }
        }
        self.problem.objective = obj;
    }

    pub fn finish(self) -> (MilpProblem, ModelIndex) {
        (self.problem, self.index)
    }
}

/// Assemble the full MILP for one scene.
pub fn build_model(
    scene: &SceneSnapshot,
    cfg: &SimConfig,
    weights: &ModelWeights,
) -> Result<(MilpProblem, ModelIndex), ModelError> {
    build_model_pinned(scene, cfg, weights, &[])
}

/// `build_model` with crossing-order pins from the previous tick's plan.
pub fn build_model_pinned(
    scene: &SceneSnapshot,
    cfg: &SimConfig,
    weights: &ModelWeights,
    pins: &[(u64, u64)],
) -> Result<(MilpProblem, ModelIndex), ModelError> {
    let mut b = ModelBuilder::new(scene, cfg, weights)?;
    b.add_deviation_constraints();
    b.add_dynamics_constraints();
    b.add_same_lane_separation();
    b.add_intersection_separation();
    b.add_order_pins(pins);
    b.build_objective();
    Ok(b.finish())
}

/// Reassemble per-agent trajectories from an optimal solution.
pub fn extract_plan(
    solution: &MilpSolution,
    index: &ModelIndex,
    scene: &SceneSnapshot,
) -> Result<HorizonPlan, ModelError> {
    if solution.status != SolveStatus::Optimal {
        return Err(ModelError::NotOptimal(solution.status));
    }
    let values = solution.values.as_ref().expect("optimal solution carries values");
    let mut agents = Vec::with_capacity(scene.agents.len());
    for (a, agent) in scene.agents.iter().enumerate() {
        let mut states = Vec::with_capacity(index.n + 1);
        states.push(agent.state);
        for i in 1..=index.n {
            states.push(StateVector::new(values[index.pos(a, i)], values[index.vel(a, i)]));
        }
        let controls: Vec<f64> = (0..index.n).map(|i| values[index.ctrl(a, i)]).collect();
        agents.push(AgentPlan { id: agent.id, states, controls });
    }
    Ok(HorizonPlan { agents })
}

/// Solve timing and search size for one scene solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub wall_time: f64,
    pub node_count: u64,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
    }
}

/// Partition the scene into independent conflict clusters.
///
/// Two agents are coupled when a separation row between them can bind
/// within the horizon under worst-case (uncapped) reachability: same-lane
/// consecutive pairs whose gap can shrink below d_safe, and cross pairs
/// whose reachable center distances can sum below s_dist. Everything else
/// is provably independent over this horizon, so each cluster can be
/// solved as its own MILP — turning simultaneous unrelated crossing
/// conflicts from a multiplicative search into an additive one.
pub fn conflict_components(
    scene: &SceneSnapshot,
    cfg: &SimConfig,
) -> Result<Vec<Vec<usize>>, ModelError> {
    let n = cfg.horizon;
    let mats = discretize_double_integrator(cfg.dt)
        .map_err(|e| ModelError::BadBounds(e.to_string()))?;
    let p = scene.agents.len();
    let reach: Vec<Vec<(f64, f64)>> = scene
        .agents
        .iter()
        .map(|a| reach_bounds(a.state, cfg, &mats, n, a.entry_step))
        .collect();
    let mut uf = UnionFind::new(p);

    for lane in Lane::ALL {
        let mut queue: Vec<usize> =
            (0..p).filter(|&a| scene.agents[a].lane == lane).collect();
        queue.sort_by_key(|&a| scene.agents[a].entry_order);
        for w in queue.windows(2) {
            let (lead, follow) = (w[0], w[1]);
            if (1..=n).any(|i| reach[lead][i].0 - reach[follow][i].1 < cfg.d_safe) {
                uf.union(lead, follow);
            }
        }
    }
    let pre = |a: &SceneAgent| a.state.pos < cfg.s_dist;
    for e in (0..p).filter(|&a| scene.agents[a].lane == Lane::WestEast && pre(&scene.agents[a])) {
        for s in
            (0..p).filter(|&a| scene.agents[a].lane == Lane::NorthSouth && pre(&scene.agents[a]))
        {
            if (1..=n)
                .any(|i| center_distance(reach[e][i]) + center_distance(reach[s][i]) < cfg.s_dist)
            {
                uf.union(e, s);
            }
        }
    }

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_slot = vec![usize::MAX; p];
    for a in 0..p {
        let r = uf.find(a);
        if root_slot[r] == usize::MAX {
            root_slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_slot[r]].push(a);
    }
    Ok(groups)
}

/// Convenience: build, solve, extract. Independent conflict clusters are
/// solved as separate MILPs and the plans stitched back together.
pub fn solve_scene(
    scene: &SceneSnapshot,
    cfg: &SimConfig,
    weights: &ModelWeights,
    pins: &[(u64, u64)],
) -> Result<(HorizonPlan, SolveStats), ModelError> {
    let components = conflict_components(scene, cfg)?;
    if components.len() <= 1 {
        return solve_component(scene, cfg, weights, pins);
    }
    let mut by_id = std::collections::HashMap::new();
    let mut stats = SolveStats { wall_time: 0.0, node_count: 0 };
    for comp in &components {
        let sub = SceneSnapshot {
            agents: comp.iter().map(|&a| scene.agents[a]).collect(),
            tick: scene.tick,
        };
        let ids: std::collections::HashSet<u64> = sub.agents.iter().map(|a| a.id).collect();
        let sub_pins: Vec<(u64, u64)> = pins
            .iter()
            .filter(|(a, b)| ids.contains(a) && ids.contains(b))
            .copied()
            .collect();
        let (plan, s) = solve_component(&sub, cfg, weights, &sub_pins)?;
        stats.wall_time += s.wall_time;
        stats.node_count += s.node_count;
        for ap in plan.agents {
            by_id.insert(ap.id, ap);
        }
    }
    let agents = scene
        .agents
        .iter()
        .map(|a| by_id.remove(&a.id).expect("every agent solved in some component"))
        .collect();
    Ok((HorizonPlan { agents }, stats))
}

/// Build, solve, and extract one (sub)scene as a single MILP.
fn solve_component(
    scene: &SceneSnapshot,
    cfg: &SimConfig,
    weights: &ModelWeights,
    pins: &[(u64, u64)],
) -> Result<(HorizonPlan, SolveStats), ModelError> {
    let (problem, index) = build_model_pinned(scene, cfg, weights, pins)?;
    let opts = crossflow_milp::SolverOptions {
        feasibility_tol: cfg.feasibility_tol,
        integrality_tol: cfg.integrality_tol,
        max_nodes: cfg.max_nodes,
        time_limit: cfg.time_limit,
        backend: crossflow_milp::BackendChoice::Auto,
        absolute_gap: 0.0,
        relative_gap: cfg.mip_gap,
        branch_order: Some(index.branch_order()),
        strong_branch: std::env::var("CROSSFLOW_STRONG_BRANCH")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(0),
    };
    let start = Instant::now();
    let solution = crossflow_milp::solve_milp(&problem, &opts)?;
    let stats = SolveStats { wall_time: start.elapsed().as_secs_f64(), node_count: solution.node_count };
    // Diagnostic hook: dump scenes whose solve exceeds a threshold.
    if let Ok(dir) = std::env::var("CROSSFLOW_SLOW_SOLVE_DUMP") {
        let threshold: f64 = std::env::var("CROSSFLOW_SLOW_SOLVE_SECS")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(5.0);
        if stats.wall_time > threshold {
            let dir = std::path::Path::new(&dir);
            let _ = std::fs::create_dir_all(dir);
            let stem = format!("slow_tick{}_{}agents", scene.tick, scene.agents.len());
            if let Ok(json) = serde_json::to_string_pretty(scene) {
                let _ = std::fs::write(dir.join(format!("{stem}.scene.json")), json);
            }
            let mut buf = Vec::new();
            if crossflow_milp::write_lp(&problem, &mut buf).is_ok() {
                let _ = std::fs::write(dir.join(format!("{stem}.lp")), buf);
            }
        }
    }
    let plan = extract_plan(&solution, &index, scene)?;
    Ok((plan, stats))
}
