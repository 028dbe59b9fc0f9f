//! The tick loop: seeded spawning, region entry/exit, one receding-horizon
//! solve per tick, first-control application, and full trajectory logging.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::SimConfig;
use crate::dynamics::{discretize_double_integrator, kinematic_advance, step, StateVector};
use crate::lane::Lane;
use crate::model::{
    build_model, solve_scene, AgentPlan, HorizonPlan, ModelError, SceneAgent, SceneSnapshot,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("solver abort at tick {tick}: {detail}")]
    SolverAbort {
        tick: u64,
        detail: String,
        /// Scene snapshot as JSON, for the diagnostic dump.
        scene_json: String,
        /// LP-format dump of the failing model.
        problem_dump: String,
    },
    #[error("model error at tick {tick}: {source}")]
    Model {
        tick: u64,
        #[source]
        source: ModelError,
    },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("log serialization: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Approaching,
    InRegion,
    Exited,
}

/// One logged sample of one agent.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct TrajPoint {
    pub t: u64,
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub u: f64,
    pub in_region: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AgentRecord {
    pub id: u64,
    pub lane: Lane,
    pub spawn_tick: u64,
    pub entry_tick: Option<u64>,
    pub exit_tick: Option<u64>,
    pub trajectory: Vec<TrajPoint>,
}

/// Per-tick solver bookkeeping.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct TickRecord {
    pub t: u64,
    pub solver_wall_time: f64,
    pub node_count: u64,
    pub in_region: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrajectoryLog {
    pub config: SimConfig,
    pub ticks: Vec<TickRecord>,
    pub agents: Vec<AgentRecord>,
}

impl TrajectoryLog {
    /// Zero the timing fields, which are the only nondeterministic bytes.
    pub fn strip_wall_times(&mut self) {
        for t in &mut self.ticks {
            t.solver_wall_time = 0.0;
        }
    }

    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn write_file(&self, path: &std::path::Path) -> Result<(), SimError> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read_file(path: &std::path::Path) -> Result<Self, SimError> {
        Ok(Self::from_json(&std::fs::read_to_string(path)?)?)
    }
}

/// Seeded arrival process: one draw per lane per tick, north-south first.
pub struct Spawner {
    rng: ChaCha8Rng,
    rand_step: u64,
}

impl Spawner {
    pub fn new(seed: u64, rand_step: u64) -> Self {
        Spawner { rng: ChaCha8Rng::seed_from_u64(seed), rand_step }
    }

    /// Lanes that spawn this tick. `blocked` suppresses a lane whose start
    /// is still within d_safe of the last spawned agent.
    pub fn tick(&mut self, tick: u64, blocked: impl Fn(Lane) -> bool) -> Vec<Lane> {
        let mut out = Vec::new();
        for lane in [Lane::NorthSouth, Lane::WestEast] {
            let k: u64 = self.rng.gen_range(1..=7);
            if tick % (k * self.rand_step) == 0 && !blocked(lane) {
                out.push(lane);
            }
        }
        out
    }
}

struct LiveAgent {
    id: u64,
    lane: Lane,
    spawn_tick: u64,
    phase: Phase,
    state: StateVector,
    entry_tick: Option<u64>,
    entry_pos: f64,
    entry_order: u64,
    exit_tick: Option<u64>,
    trajectory: Vec<TrajPoint>,
}

pub fn run_sim(cfg: &SimConfig) -> Result<TrajectoryLog, SimError> {
    run_sim_with(cfg, |_| {})
}

/// Like [`run_sim`] but invokes `on_tick` after every tick, for progress
/// reporting.
pub fn run_sim_with(
    cfg: &SimConfig,
    mut on_tick: impl FnMut(&TickRecord),
) -> Result<TrajectoryLog, SimError> {
    cfg.validate()?;
    let mats = discretize_double_integrator(cfg.dt).expect("validated dt");
    let mut spawner = Spawner::new(cfg.seed, cfg.rand_step);
    let mut agents: Vec<LiveAgent> = Vec::new();
    let mut ticks: Vec<TickRecord> = Vec::new();
    let mut next_id: u64 = 0;
    let mut pins: Vec<(u64, u64)> = Vec::new();
    let mut entry_counters = [0u64; 2];
    let n_ticks = cfg.n_ticks();

    for t in 0..n_ticks {
        // Spawn.
        let lanes = {
            let last_pos = |lane: Lane| {
                agents
                    .iter()
                    .rev()
                    .find(|a| a.lane == lane)
                    .map(|a| a.state.pos)
            };
            spawner.tick(t, |lane| {
                last_pos(lane)
                    .map(|p| (p - cfg.lane_start).abs() < cfg.d_safe)
                    .unwrap_or(false)
            })
        };
        for lane in lanes {
            agents.push(LiveAgent {
                id: next_id,
                lane,
                spawn_tick: t,
                phase: Phase::Approaching,
                state: StateVector::new(cfg.lane_start, cfg.v_max),
                entry_tick: None,
                entry_pos: 0.0,
                entry_order: 0,
                exit_tick: None,
                trajectory: Vec::new(),
            });
            next_id += 1;
        }

        // Phase transitions on the current (pre-advance) positions.
        for a in agents.iter_mut() {
            match a.phase {
                Phase::Approaching if a.state.pos >= -cfg.radius => {
                    a.phase = Phase::InRegion;
                    a.entry_tick = Some(t);
                    a.entry_pos = a.state.pos;
                    let li = a.lane as usize;
                    a.entry_order = entry_counters[li];
                    entry_counters[li] += 1;
                }
                Phase::InRegion if a.state.pos - a.entry_pos >= 2.0 * cfg.radius => {
                    a.phase = Phase::Exited;
                    a.exit_tick = Some(t);
                }
                _ => {}
            }
        }

        // Solve for the in-region scene, plus approaching agents whose
        // region entry falls inside the horizon: their cruise up to entry
        // is deterministic, so modeling them (control pinned to zero until
        // entry) lets the solver reserve queue space for known arrivals
        // instead of discovering them only once they are uncontrollable.
        let cruise = cfg.v_max * cfg.dt;
        let scene_members: Vec<(usize, usize)> = (0..agents.len())
            .filter_map(|i| match agents[i].phase {
                Phase::InRegion => Some((i, 0)),
                Phase::Approaching => {
                    let e = ((-cfg.radius - agents[i].state.pos) / cruise).ceil() as usize;
                    (e <= cfg.horizon).then_some((i, e.max(1)))
                }
                Phase::Exited => None,
            })
            .collect();
        let in_region = scene_members.iter().filter(|&&(_, e)| e == 0).count();
        let mut controls: Vec<f64> = vec![0.0; agents.len()];
        let tick_record = if in_region == 0 {
            pins.clear();
            TickRecord { t, solver_wall_time: 0.0, node_count: 0, in_region: 0 }
        } else {
            // Approaching members get their future entry ordinals, in lane
            // arrival order after every agent already inside.
            let mut next_order = entry_counters;
            let scene = SceneSnapshot {
                agents: scene_members
                    .iter()
                    .map(|&(i, e)| SceneAgent {
                        id: agents[i].id,
                        lane: agents[i].lane,
                        state: agents[i].state,
                        entry_order: if e == 0 {
                            agents[i].entry_order
                        } else {
                            let li = agents[i].lane as usize;
                            next_order[li] += 1;
                            next_order[li] - 1
                        },
                        entry_step: e,
                    })
                    .collect(),
                tick: t,
            };
            let (plan, stats) = match solve_scene(&scene, cfg, &cfg.weights, &pins) {
                Ok(ok) => ok,
                Err(ModelError::NotOptimal(status)) => {
                    return Err(abort_with_dump(t, &scene, cfg, format!("{status:?}")));
                }
                Err(ModelError::Milp(e)) => {
                    return Err(abort_with_dump(t, &scene, cfg, e.to_string()));
                }
                Err(e) => return Err(SimError::Model { tick: t, source: e }),
            };
            for (&(i, e), agent_plan) in scene_members.iter().zip(plan.agents.iter()) {
                debug_assert_eq!(agents[i].id, agent_plan.id);
                if e == 0 {
                    controls[i] = agent_plan.first_control();
                }
            }
            pins = crossing_pins(&scene, cfg, &plan);
            TickRecord {
                t,
                solver_wall_time: stats.wall_time,
                node_count: stats.node_count,
                in_region,
            }
        };
        on_tick(&tick_record);
        ticks.push(tick_record);

        // Log, then advance.
        for (i, a) in agents.iter_mut().enumerate() {
            if a.state.pos <= cfg.lane_end {
                let (x, y) = a.lane.world(a.state.pos);
                a.trajectory.push(TrajPoint {
                    t,
                    x,
                    y,
                    v: a.state.vel,
                    u: controls[i],
                    in_region: a.phase == Phase::InRegion,
                });
            }
            match a.phase {
                Phase::InRegion => {
                    a.state = step(a.state, controls[i], &mats);
                    // LP tolerance can leave the velocity a hair outside
                    // its box; the log contract is a hard [0, v_max].
                    a.state.vel = a.state.vel.clamp(0.0, cfg.v_max);
                }
                Phase::Approaching | Phase::Exited => {
                    a.state.pos = kinematic_advance(a.state.pos, a.state.vel, cfg.dt);
                }
            }
        }
    }

    Ok(TrajectoryLog {
        config: cfg.clone(),
        ticks,
        agents: agents
            .into_iter()
            .map(|a| AgentRecord {
                id: a.id,
                lane: a.lane,
                spawn_tick: a.spawn_tick,
                entry_tick: a.entry_tick,
                exit_tick: a.exit_tick,
                trajectory: a.trajectory,
            })
            .collect(),
    })
}

/// Crossing-order pins for the next tick's solve: for every active cross
/// pair where either member can no longer stop s_dist (plus a straddle
/// margin) short of the center, record the order the current plan crosses
/// them in. Without this, a re-solve is free to flip a planned crossing
/// order after an agent has already spent the braking margin the flipped
/// order would need, which strands the simulation in an infeasible state.
fn crossing_pins(scene: &SceneSnapshot, cfg: &SimConfig, plan: &HorizonPlan) -> Vec<(u64, u64)> {
    let brake = -cfg.u_min;
    if brake <= 0.0 {
        return Vec::new();
    }
    let burned = |a: &SceneAgent| {
        a.state.pos + a.state.vel * a.state.vel / (2.0 * brake) > -(cfg.s_dist + 0.5)
    };
    let cross_step = |ap: &AgentPlan| ap.states.iter().position(|s| s.pos >= 0.0);
    let active = |a: &&SceneAgent| a.state.pos < cfg.s_dist;
    let mut pins = Vec::new();
    for (ei, e) in scene.agents.iter().enumerate() {
        if e.lane != Lane::WestEast || !active(&e) {
            continue;
        }
        for (si, s) in scene.agents.iter().enumerate() {
            if s.lane != Lane::NorthSouth || !active(&s) || !(burned(e) || burned(s)) {
                continue;
            }
            match (cross_step(&plan.agents[ei]), cross_step(&plan.agents[si])) {
                (Some(a), Some(b)) if a < b => pins.push((e.id, s.id)),
                (Some(a), Some(b)) if a > b => pins.push((s.id, e.id)),
                (Some(_), None) => pins.push((e.id, s.id)),
                (None, Some(_)) => pins.push((s.id, e.id)),
                _ => {}
            }
        }
    }
    pins
}

fn abort_with_dump(tick: u64, scene: &SceneSnapshot, cfg: &SimConfig, detail: String) -> SimError {
    let scene_json = serde_json::json!({
        "tick": tick,
        "agents": scene
            .agents
            .iter()
            .map(|a| {
                serde_json::json!({
                    "id": a.id,
                    "lane": a.lane.to_string(),
                    "pos": a.state.pos,
                    "vel": a.state.vel,
                    "entry_order": a.entry_order,
                    "entry_step": a.entry_step,
                })
            })
            .collect::<Vec<_>>(),
    })
    .to_string();
    let problem_dump = match build_model(scene, cfg, &cfg.weights) {
        Ok((problem, _)) => {
            let mut buf = Vec::new();
            crossflow_milp::write_lp(&problem, &mut buf)
                .map(|_| String::from_utf8_lossy(&buf).into_owned())
                .unwrap_or_else(|e| format!("dump failed: {e}"))
        }
        Err(e) => format!("rebuild failed: {e}"),
    };
    SimError::SolverAbort { tick, detail, scene_json, problem_dump }
}
