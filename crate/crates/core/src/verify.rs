//! Post-hoc log checker: replays safety and consistency invariants over a
//! trajectory log, reporting every violation with tick, agents, and
//! magnitude.

use std::fmt;

use crate::dynamics::{discretize_double_integrator, kinematic_advance, step, StateVector};
use crate::sim::TrajectoryLog;

const GEOM_TOL: f64 = 1e-6;
const REPLAY_TOL: f64 = 1e-6;
const BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    SameLaneGap,
    CrossSeparation,
    DynamicsReplay,
    KinematicAdvance,
    VelocityBound,
    ControlBound,
    Bookkeeping,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub tick: u64,
    pub agents: Vec<u64>,
    pub magnitude: f64,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} at tick {} (agents {:?}, magnitude {:.3e}): {}",
            self.kind, self.tick, self.agents, self.magnitude, self.detail
        )
    }
}

/// Run every check; an empty report means the log is clean.
pub fn verify_log(log: &TrajectoryLog) -> Vec<Violation> {
    let cfg = &log.config;
    let mut out = Vec::new();
    let mats = match discretize_double_integrator(cfg.dt) {
        Ok(m) => m,
        Err(e) => {
            out.push(Violation {
                kind: ViolationKind::Bookkeeping,
                tick: 0,
                agents: vec![],
                magnitude: 0.0,
                detail: format!("config: {e}"),
            });
            return out;
        }
    };

    // Pairwise separation per tick, over agents flagged in-region.
    let n_ticks = log.ticks.len();
    let mut by_tick: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_ticks];
    for (ai, a) in log.agents.iter().enumerate() {
        for p in &a.trajectory {
            if p.in_region && (p.t as usize) < n_ticks {
                by_tick[p.t as usize].push((ai, a.lane.lane_pos(p.x, p.y)));
            }
        }
    }
    for (t, members) in by_tick.iter().enumerate() {
        for (i, &(ai, pa)) in members.iter().enumerate() {
            for &(bi, pb) in &members[i + 1..] {
                let (a, b) = (&log.agents[ai], &log.agents[bi]);
                if a.lane == b.lane {
                    let gap = (pa - pb).abs();
                    if gap < cfg.d_safe - GEOM_TOL {
                        out.push(Violation {
                            kind: ViolationKind::SameLaneGap,
                            tick: t as u64,
                            agents: vec![a.id, b.id],
                            magnitude: cfg.d_safe - gap,
                            detail: format!("gap {gap:.6} < d_safe {}", cfg.d_safe),
                        });
                    }
                } else {
                    let sep = pa.abs() + pb.abs();
                    if sep < cfg.s_dist - GEOM_TOL {
                        out.push(Violation {
                            kind: ViolationKind::CrossSeparation,
                            tick: t as u64,
                            agents: vec![a.id, b.id],
                            magnitude: cfg.s_dist - sep,
                            detail: format!("L1 separation {sep:.6} < s_dist {}", cfg.s_dist),
                        });
                    }
                }
            }
        }
    }

    // Per-agent consistency.
    for a in &log.agents {
        if a.exit_tick.is_some() && a.entry_tick.is_none() {
            out.push(Violation {
                kind: ViolationKind::Bookkeeping,
                tick: a.exit_tick.unwrap(),
                agents: vec![a.id],
                magnitude: 0.0,
                detail: "exit without entry".into(),
            });
        }
        for w in a.trajectory.windows(2) {
            let (p0, p1) = (&w[0], &w[1]);
            if p1.t != p0.t + 1 {
                out.push(Violation {
                    kind: ViolationKind::Bookkeeping,
                    tick: p0.t,
                    agents: vec![a.id],
                    magnitude: (p1.t - p0.t) as f64,
                    detail: "non-contiguous trajectory samples".into(),
                });
                continue;
            }
            let pos0 = a.lane.lane_pos(p0.x, p0.y);
            let pos1 = a.lane.lane_pos(p1.x, p1.y);
            if p0.in_region {
                if p0.v < -BOUND_TOL || p0.v > cfg.v_max + BOUND_TOL {
                    out.push(Violation {
                        kind: ViolationKind::VelocityBound,
                        tick: p0.t,
                        agents: vec![a.id],
                        magnitude: (p0.v - cfg.v_max).max(-p0.v),
                        detail: format!("v = {:.9} outside [0, {}]", p0.v, cfg.v_max),
                    });
                }
                if p0.u < cfg.u_min - GEOM_TOL || p0.u > cfg.u_max + GEOM_TOL {
                    out.push(Violation {
                        kind: ViolationKind::ControlBound,
                        tick: p0.t,
                        agents: vec![a.id],
                        magnitude: (p0.u - cfg.u_max).max(cfg.u_min - p0.u),
                        detail: format!(
                            "u = {:.9} outside [{}, {}]",
                            p0.u, cfg.u_min, cfg.u_max
                        ),
                    });
                }
                let mut next = step(StateVector::new(pos0, p0.v), p0.u, &mats);
                next.vel = next.vel.clamp(0.0, cfg.v_max);
                let err = (next.pos - pos1).abs().max((next.vel - p1.v).abs());
                if err > REPLAY_TOL {
                    out.push(Violation {
                        kind: ViolationKind::DynamicsReplay,
                        tick: p0.t,
                        agents: vec![a.id],
                        magnitude: err,
                        detail: format!(
                            "expected ({:.9}, {:.9}), logged ({pos1:.9}, {:.9})",
                            next.pos, next.vel, p1.v
                        ),
                    });
                }
            } else {
                let expect = kinematic_advance(pos0, p0.v, cfg.dt);
                let err = (expect - pos1).abs().max((p0.v - p1.v).abs());
                if err > REPLAY_TOL {
                    out.push(Violation {
                        kind: ViolationKind::KinematicAdvance,
                        tick: p0.t,
                        agents: vec![a.id],
                        magnitude: err,
                        detail: format!("expected pos {expect:.9}, logged {pos1:.9}"),
                    });
                }
            }
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use crate::sim::run_sim;

    fn small_log() -> TrajectoryLog {
        static LOG: std::sync::OnceLock<TrajectoryLog> = std::sync::OnceLock::new();
        LOG.get_or_init(|| {
            let mut cfg = SimConfig::default();
            cfg.radius = 40.0;
            cfg.horizon = 30;
            cfg.duration = 20.0;
            run_sim(&cfg).unwrap()
        })
        .clone()
    }

    #[test]
    fn clean_run_verifies_clean() {
        let log = small_log();
        let report = verify_log(&log);
        assert!(report.is_empty(), "violations: {report:?}");
    }

    #[test]
    fn injected_gap_violation_detected() {
        let mut log = small_log();
        // Move one in-region agent to 2.9 m behind a same-lane peer:
        // find the first tick where any lane has two in-region agents.
        let mut found = None;
        'search: for t in log.ticks.iter().map(|r| r.t) {
            for lane in crate::lane::Lane::ALL {
                let peers: Vec<usize> = (0..log.agents.len())
                    .filter(|&i| {
                        log.agents[i].lane == lane
                            && log.agents[i]
                                .trajectory
                                .iter()
                                .any(|p| p.t == t && p.in_region)
                    })
                    .collect();
                if peers.len() >= 2 {
                    found = Some((t, peers[0], peers[1]));
                    break 'search;
                }
            }
        }
        let (tick, a, b) = found.expect("fixture needs 2 same-lane in-region agents");
        let target = {
            let p = log.agents[a]
                .trajectory
                .iter()
                .find(|p| p.t == tick)
                .unwrap();
            log.agents[a].lane.lane_pos(p.x, p.y)
        };
        let lane = log.agents[b].lane;
        let p = log.agents[b]
            .trajectory
            .iter_mut()
            .find(|p| p.t == tick)
            .unwrap();
        let (x, y) = lane.world(target - 2.9);
        p.x = x;
        p.y = y;
        let report = verify_log(&log);
        assert!(report
            .iter()
            .any(|v| v.kind == ViolationKind::SameLaneGap
                && v.tick == tick
                && (v.magnitude - 0.1).abs() < 1e-6));
    }

    #[test]
    fn perturbed_control_detected() {
        let mut log = small_log();
        let a = log
            .agents
            .iter_mut()
            .find(|a| a.trajectory.iter().any(|p| p.in_region))
            .unwrap();
        let idx = a.trajectory.iter().position(|p| p.in_region).unwrap();
        // Perturbing u breaks the replay unless it was the final sample.
        assert!(idx + 1 < a.trajectory.len());
        a.trajectory[idx].u += 0.5;
        let report = verify_log(&log);
        assert!(report
            .iter()
            .any(|v| v.kind == ViolationKind::DynamicsReplay));
    }
}
