//! Evaluation quantities computed from a trajectory log: delay, solver
//! runtime aggregates, separation minima, and platoon statistics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::SimConfig;
use crate::lane::Lane;
use crate::sim::{AgentRecord, TrajectoryLog};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no completed agents in the log")]
    NoData,
    #[error("bad csv row: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayRecord {
    pub id: u64,
    pub ideal_time: f64,
    pub actual_time: f64,
    pub delay: f64,
}

/// Delay of one completed agent; `None` while it is still incomplete.
pub fn compute_delay(agent: &AgentRecord, cfg: &SimConfig) -> Option<DelayRecord> {
    let entry = agent.entry_tick?;
    let exit = agent.exit_tick?;
    let ideal_time = 2.0 * cfg.radius / cfg.v_max;
    let actual_time = (exit - entry) as f64 * cfg.dt;
    Some(DelayRecord { id: agent.id, ideal_time, actual_time, delay: actual_time - ideal_time })
}

pub fn delays(log: &TrajectoryLog) -> Vec<DelayRecord> {
    log.agents.iter().filter_map(|a| compute_delay(a, &log.config)).collect()
}

pub fn average_delay(log: &TrajectoryLog) -> Result<f64, MetricsError> {
    let d = delays(log);
    if d.is_empty() {
        return Err(MetricsError::NoData);
    }
    Ok(d.iter().map(|r| r.delay).sum::<f64>() / d.len() as f64)
}

pub fn total_solver_time(log: &TrajectoryLog) -> f64 {
    log.ticks.iter().map(|t| t.solver_wall_time).sum()
}

/// (mean, max) per-tick solver wall time over ticks with a non-empty scene.
pub fn solver_time_stats(log: &TrajectoryLog) -> (f64, f64) {
    let active: Vec<f64> = log
        .ticks
        .iter()
        .filter(|t| t.in_region > 0)
        .map(|t| t.solver_wall_time)
        .collect();
    if active.is_empty() {
        return (0.0, 0.0);
    }
    let max = active.iter().cloned().fold(0.0, f64::max);
    (active.iter().sum::<f64>() / active.len() as f64, max)
}

/// Lane-frame positions of all agents flagged in-region at each tick,
/// grouped as (lane, pos) lists indexed by tick.
fn in_region_by_tick(log: &TrajectoryLog) -> Vec<Vec<(Lane, f64)>> {
    let n = log.ticks.len();
    let mut by_tick: Vec<Vec<(Lane, f64)>> = vec![Vec::new(); n];
    for a in &log.agents {
        for p in &a.trajectory {
            if p.in_region {
                by_tick[p.t as usize].push((a.lane, a.lane.lane_pos(p.x, p.y)));
            }
        }
    }
    by_tick
}

/// Global minima over all ticks: (same-lane gap, cross-lane L1 separation),
/// each over pairs simultaneously in the region. No applicable pair at any
/// tick leaves the corresponding minimum at +inf.
pub fn separation_minima(log: &TrajectoryLog) -> (f64, f64) {
    let mut min_gap = f64::INFINITY;
    let mut min_cross = f64::INFINITY;
    for members in in_region_by_tick(log) {
        for (i, &(lane_a, pos_a)) in members.iter().enumerate() {
            for &(lane_b, pos_b) in &members[i + 1..] {
                if lane_a == lane_b {
                    min_gap = min_gap.min((pos_a - pos_b).abs());
                } else {
                    min_cross = min_cross.min(pos_a.abs() + pos_b.abs());
                }
            }
        }
    }
    (min_gap, min_cross)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanePlatoons {
    pub lane: Lane,
    /// Sizes of platoons in crossing order.
    pub sizes: Vec<usize>,
    /// Crossing-time gaps inside platoons, seconds.
    pub intra_headways: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlatoonStats {
    pub lanes: Vec<LanePlatoons>,
}

impl PlatoonStats {
    pub fn mean_size(&self) -> f64 {
        let sizes: Vec<usize> =
            self.lanes.iter().flat_map(|l| l.sizes.iter().copied()).collect();
        if sizes.is_empty() {
            return 0.0;
        }
        sizes.iter().sum::<usize>() as f64 / sizes.len() as f64
    }

    pub fn mean_intra_headway(&self) -> Option<f64> {
        let h: Vec<f64> =
            self.lanes.iter().flat_map(|l| l.intra_headways.iter().copied()).collect();
        if h.is_empty() {
            return None;
        }
        Some(h.iter().sum::<f64>() / h.len() as f64)
    }
}

/// Sub-tick center-crossing time for one agent, if it crossed.
fn crossing_time(agent: &AgentRecord, dt: f64) -> Option<f64> {
    let pos: Vec<(u64, f64)> = agent
        .trajectory
        .iter()
        .map(|p| (p.t, agent.lane.lane_pos(p.x, p.y)))
        .collect();
    for w in pos.windows(2) {
        let (t0, p0) = w[0];
        let (_, p1) = w[1];
        if p0 < 0.0 && p1 >= 0.0 {
            let frac = -p0 / (p1 - p0);
            return Some((t0 as f64 + frac) * dt);
        }
    }
    // Crossed exactly on a sample or entered past the center.
    pos.iter().find(|&&(_, p)| p >= 0.0).map(|&(t, _)| t as f64 * dt)
}

/// Cluster consecutive center crossings per lane: gaps ≤ `headway_threshold`
/// seconds stay inside one platoon.
pub fn platoon_stats(log: &TrajectoryLog, headway_threshold: f64) -> PlatoonStats {
    let mut lanes = Vec::new();
    for lane in Lane::ALL {
        let mut times: Vec<f64> = log
            .agents
            .iter()
            .filter(|a| a.lane == lane)
            .filter_map(|a| crossing_time(a, log.config.dt))
            .collect();
        times.sort_by(f64::total_cmp);
        let mut sizes = Vec::new();
        let mut intra_headways = Vec::new();
        let mut current = 0usize;
        for (i, &t) in times.iter().enumerate() {
            if current == 0 {
                current = 1;
            } else {
                let gap = t - times[i - 1];
                if gap <= headway_threshold {
                    current += 1;
                    intra_headways.push(gap);
                } else {
                    sizes.push(current);
                    current = 1;
                }
            }
        }
        if current > 0 {
            sizes.push(current);
        }
        lanes.push(LanePlatoons { lane, sizes, intra_headways });
    }
    PlatoonStats { lanes }
}

/// One row of the sweep CSV. `status` is "ok" for a completed run and a
/// short failure tag for an aborted grid point (numeric fields then NaN/0).
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub radius: f64,
    pub s_dist: f64,
    pub seed: u64,
    pub average_delay: f64,
    pub total_solver_time: f64,
    pub agents_spawned: u64,
    pub agents_completed: u64,
    pub min_gap: f64,
    pub min_cross_sep: f64,
    pub status: String,
}

pub const CSV_HEADER: &str = "radius,s_dist,seed,average_delay,total_solver_time,\
agents_spawned,agents_completed,min_gap,min_cross_sep,status";

impl RunSummary {
    pub fn from_log(log: &TrajectoryLog) -> Self {
        let (min_gap, min_cross_sep) = separation_minima(log);
        RunSummary {
            radius: log.config.radius,
            s_dist: log.config.s_dist,
            seed: log.config.seed,
            average_delay: average_delay(log).unwrap_or(f64::NAN),
            total_solver_time: total_solver_time(log),
            agents_spawned: log.agents.len() as u64,
            agents_completed: log
                .agents
                .iter()
                .filter(|a| a.exit_tick.is_some())
                .count() as u64,
            min_gap,
            min_cross_sep,
            status: "ok".into(),
        }
    }

    pub fn failed(radius: f64, s_dist: f64, seed: u64, tag: &str) -> Self {
        RunSummary {
            radius,
            s_dist,
            seed,
            average_delay: f64::NAN,
            total_solver_time: 0.0,
            agents_spawned: 0,
            agents_completed: 0,
            min_gap: f64::NAN,
            min_cross_sep: f64::NAN,
            status: tag.into(),
        }
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.radius,
            self.s_dist,
            self.seed,
            self.average_delay,
            self.total_solver_time,
            self.agents_spawned,
            self.agents_completed,
            self.min_gap,
            self.min_cross_sep,
            self.status
        )
    }

    pub fn parse_csv_row(row: &str) -> Result<Self, MetricsError> {
        let fields: Vec<&str> = row.trim().split(',').collect();
        if fields.len() != 10 {
            return Err(MetricsError::Csv(format!(
                "expected 10 fields, got {}",
                fields.len()
            )));
        }
        let num = |i: usize| -> Result<f64, MetricsError> {
            fields[i]
                .parse()
                .map_err(|_| MetricsError::Csv(format!("bad number `{}`", fields[i])))
        };
        let int = |i: usize| -> Result<u64, MetricsError> {
            fields[i]
                .parse()
                .map_err(|_| MetricsError::Csv(format!("bad integer `{}`", fields[i])))
        };
        Ok(RunSummary {
            radius: num(0)?,
            s_dist: num(1)?,
            seed: int(2)?,
            average_delay: num(3)?,
            total_solver_time: num(4)?,
            agents_spawned: int(5)?,
            agents_completed: int(6)?,
            min_gap: num(7)?,
            min_cross_sep: num(8)?,
            status: fields[9].to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{TickRecord, TrajPoint};

    fn agent(id: u64, lane: Lane, entry: Option<u64>, exit: Option<u64>) -> AgentRecord {
        AgentRecord {
            id,
            lane,
            spawn_tick: 0,
            entry_tick: entry,
            exit_tick: exit,
            trajectory: Vec::new(),
        }
    }

    fn empty_log(cfg: SimConfig) -> TrajectoryLog {
        TrajectoryLog { config: cfg, ticks: Vec::new(), agents: Vec::new() }
    }

    #[test]
    fn ideal_time_at_defaults() {
        let mut cfg = SimConfig::default();
        cfg.radius = 120.0;
        let a = agent(0, Lane::NorthSouth, Some(100), Some(280));
        let d = compute_delay(&a, &cfg).unwrap();
        assert!((d.ideal_time - 16.0).abs() < 1e-12);
        assert!((d.actual_time - 18.0).abs() < 1e-12);
        assert!((d.delay - 2.0).abs() < 1e-12);
    }

    #[test]
    fn incomplete_agent_skipped() {
        let cfg = SimConfig::default();
        assert!(compute_delay(&agent(0, Lane::NorthSouth, Some(5), None), &cfg).is_none());
        assert!(compute_delay(&agent(0, Lane::NorthSouth, None, None), &cfg).is_none());
    }

    #[test]
    fn average_delay_mean_and_no_data() {
        let mut cfg = SimConfig::default();
        cfg.radius = 75.0; // ideal = 10 s
        let mut log = empty_log(cfg);
        assert!(matches!(average_delay(&log), Err(MetricsError::NoData)));
        // delays 1.0 and 3.0
        log.agents.push(agent(0, Lane::NorthSouth, Some(0), Some(110)));
        log.agents.push(agent(1, Lane::WestEast, Some(0), Some(130)));
        log.agents.push(agent(2, Lane::WestEast, Some(40), None));
        assert!((average_delay(&log).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn separation_minima_single_agent_is_infinite() {
        let mut log = empty_log(SimConfig::default());
        log.ticks.push(TickRecord { t: 0, solver_wall_time: 0.0, node_count: 0, in_region: 1 });
        let mut a = agent(0, Lane::NorthSouth, Some(0), None);
        let (x, y) = Lane::NorthSouth.world(-10.0);
        a.trajectory.push(TrajPoint { t: 0, x, y, v: 15.0, u: 0.0, in_region: true });
        log.agents.push(a);
        let (gap, cross) = separation_minima(&log);
        assert!(gap.is_infinite() && cross.is_infinite());
    }

    #[test]
    fn separation_minima_hand_case() {
        let mut log = empty_log(SimConfig::default());
        log.ticks.push(TickRecord { t: 0, solver_wall_time: 0.0, node_count: 0, in_region: 3 });
        let mut mk = |id, lane: Lane, pos: f64| {
            let mut a = agent(id, lane, Some(0), None);
            let (x, y) = lane.world(pos);
            a.trajectory.push(TrajPoint { t: 0, x, y, v: 0.0, u: 0.0, in_region: true });
            log.agents.push(a);
        };
        mk(0, Lane::NorthSouth, -2.0);
        mk(1, Lane::NorthSouth, 3.5);
        mk(2, Lane::WestEast, 4.0);
        let (gap, cross) = separation_minima(&log);
        assert!((gap - 5.5).abs() < 1e-12);
        assert!((cross - 6.0).abs() < 1e-12); // |-2| + |4|
    }

    #[test]
    fn platoons_cluster_by_threshold() {
        let cfg = SimConfig::default();
        let dt = cfg.dt;
        let mut log = empty_log(cfg);
        // crossings at 1.0, 1.3, 1.6, then 5.0 seconds on NS
        for (id, tick) in [(0u64, 10u64), (1, 13), (2, 16), (3, 50)] {
            let mut a = agent(id, Lane::NorthSouth, Some(0), Some(100));
            for t in [tick - 1, tick] {
                let p = if t < tick { -1.5 } else { 0.0 };
                let (x, y) = Lane::NorthSouth.world(p);
                a.trajectory.push(TrajPoint { t, x, y, v: 15.0, u: 0.0, in_region: true });
            }
            log.agents.push(a);
        }
        let _ = dt;
        let stats = platoon_stats(&log, 0.4);
        let ns = &stats.lanes[0];
        assert_eq!(ns.sizes, vec![3, 1]);
        assert_eq!(ns.intra_headways.len(), 2);
        assert!((stats.mean_size() - 2.0).abs() < 1e-12);
        // degenerate threshold: everyone alone
        let stats0 = platoon_stats(&log, 0.0);
        assert_eq!(stats0.lanes[0].sizes, vec![1, 1, 1, 1]);
    }

    #[test]
    fn csv_round_trip() {
        let s = RunSummary {
            radius: 120.0,
            s_dist: 4.0,
            seed: 20,
            average_delay: 1.25,
            total_solver_time: 98.5,
            agents_spawned: 120,
            agents_completed: 110,
            min_gap: 3.0000001,
            min_cross_sep: 4.25,
            status: "ok".into(),
        };
        assert_eq!(CSV_HEADER.split(',').count(), 10);
        let back = RunSummary::parse_csv_row(&s.to_csv_row()).unwrap();
        assert_eq!(back, s);
    }
}
