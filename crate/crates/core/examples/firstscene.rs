//! Dump the first non-empty solve scene of a run without solving it:
//! `cargo run --release --example firstscene -- 25 60 7`

use crossflow_core::config::SimConfig;
use crossflow_core::dynamics::StateVector;
use crossflow_core::lane::Lane;
use crossflow_core::model::{SceneAgent, SceneSnapshot};
use crossflow_core::sim::Spawner;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mut cfg = SimConfig::default();
    cfg.radius = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(25.0);
    cfg.horizon = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(60);
    if let Some(s) = args.get(3) {
        cfg.s_dist = s.parse().unwrap();
    }
    let mut spawner = Spawner::new(cfg.seed, cfg.rand_step);
    let cruise = cfg.v_max * cfg.dt;
    let mut spawned: Vec<(u64, Lane, u64)> = Vec::new(); // id, lane, spawn tick
    let mut next_id = 0u64;
    for t in 0..cfg.n_ticks() {
        let last = |lane: Lane| {
            spawned.iter().rev().find(|s| s.1 == lane).map(|s| (t - s.2) as f64 * cruise)
        };
        for lane in spawner.tick(t, |lane| last(lane).map(|d| d < cfg.d_safe).unwrap_or(false)) {
            spawned.push((next_id, lane, t));
            next_id += 1;
        }
        let mut agents = Vec::new();
        let mut next_order = [0u64; 2];
        for &(id, lane, s) in &spawned {
            let pos = cfg.lane_start + (t - s) as f64 * cruise;
            let e = if pos >= -cfg.radius {
                0
            } else {
                (((-cfg.radius - pos) / cruise).ceil() as usize).max(1)
            };
            if e > cfg.horizon {
                continue;
            }
            let li = lane as usize;
            let order = next_order[li];
            next_order[li] += 1;
            agents.push(SceneAgent {
                id,
                lane,
                state: StateVector::new(pos, cfg.v_max),
                entry_order: order,
                entry_step: e,
            });
        }
        if agents.iter().any(|a| a.entry_step == 0) {
            let scene = SceneSnapshot { agents, tick: t };
            println!("{}", serde_json::to_string_pretty(&scene).unwrap());
            return;
        }
    }
    eprintln!("no non-empty scene before T");
}
