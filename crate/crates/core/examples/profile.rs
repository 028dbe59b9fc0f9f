//! Quick per-tick solver profile: `cargo run --release --example profile -- 60 60 30`

use crossflow_core::config::SimConfig;
use crossflow_core::sim::run_sim_with;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mut cfg = SimConfig::default();
    cfg.radius = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(60.0);
    cfg.duration = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(60.0);
    cfg.horizon = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(30);
    if let Some(s) = args.get(4) {
        cfg.s_dist = s.parse().unwrap();
    }
    if let Ok(g) = std::env::var("PROFILE_MIP_GAP") {
        cfg.mip_gap = g.parse().unwrap();
    }
    let t0 = std::time::Instant::now();
    let verbose = std::env::var("PROFILE_VERBOSE").is_ok();
    match run_sim_with(&cfg, |t| {
        if verbose && (t.solver_wall_time > 0.25 || t.t % 50 == 0) {
            eprintln!(
                "tick {:>5}  agents {:>3}  nodes {:>5}  {:.3}s",
                t.t, t.in_region, t.node_count, t.solver_wall_time
            );
        }
    }) {
        Ok(log) => {
            let total: f64 = log.ticks.iter().map(|t| t.solver_wall_time).sum();
            let max = log
                .ticks
                .iter()
                .max_by(|a, b| a.solver_wall_time.total_cmp(&b.solver_wall_time))
                .unwrap();
            let max_agents = log.ticks.iter().map(|t| t.in_region).max().unwrap();
            let nodes: u64 = log.ticks.iter().map(|t| t.node_count).sum();
            let done = log.agents.iter().filter(|a| a.exit_tick.is_some()).count();
            println!(
                "R={} dur={} N={} s_dist={}: wall {:.1}s solver {:.1}s | worst tick {:.2}s \
                 (t={}, {} in region) | max in-region {} | nodes {} | spawned {} done {}",
                cfg.radius,
                cfg.duration,
                cfg.horizon,
                cfg.s_dist,
                t0.elapsed().as_secs_f64(),
                total,
                max.solver_wall_time,
                max.t,
                max.in_region,
                max_agents,
                nodes,
                log.agents.len(),
                done
            );
        }
        Err(e) => {
            eprintln!("ABORT after {:.1}s: {e}", t0.elapsed().as_secs_f64());
            if let crossflow_core::sim::SimError::SolverAbort { tick, scene_json, .. } = &e {
                let path = format!("/root/tmp/abort_tick{tick}.scene.json");
                let _ = std::fs::write(&path, scene_json);
                eprintln!("scene dumped to {path}");
            }
            std::process::exit(3);
        }
    }
}
