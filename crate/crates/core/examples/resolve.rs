//! Re-solve a dumped scene snapshot:
//! `cargo run --release --example resolve -- scene.json 60 30 [s_dist]`

use crossflow_core::config::SimConfig;
use crossflow_core::model::{solve_scene, SceneSnapshot};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let text = std::fs::read_to_string(&args[1]).expect("read scene");
    let scene: SceneSnapshot = serde_json::from_str(&text).expect("parse scene");
    let mut cfg = SimConfig::default();
    cfg.radius = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(60.0);
    cfg.horizon = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(30);
    if let Some(s) = args.get(4) {
        cfg.s_dist = s.parse().unwrap();
    }
    if let Ok(g) = std::env::var("PROFILE_MIP_GAP") {
        cfg.mip_gap = g.parse().unwrap();
    }
    println!("{} agents at tick {}", scene.agents.len(), scene.tick);
    match solve_scene(&scene, &cfg, &cfg.weights, &[]) {
        Ok((plan, stats)) => {
            let obj: f64 = plan
                .agents
                .iter()
                .map(|a| {
                    let n = a.states.len() - 1;
                    (1..n).map(|i| a.states[i].vel).sum::<f64>()
                })
                .sum();
            println!(
                "solved: {} nodes, {:.3}s; velocity sum {:.4}; first controls: {:?}",
                stats.node_count,
                stats.wall_time,
                obj,
                plan.agents.iter().map(|a| a.first_control()).collect::<Vec<_>>()
            );
            if std::env::var_os("PROFILE_VERBOSE").is_some() {
                for (a, ap) in scene.agents.iter().zip(plan.agents.iter()) {
                    let track: Vec<String> = ap
                        .states
                        .iter()
                        .step_by(5)
                        .map(|s| format!("{:7.2}@{:4.1}", s.pos, s.vel))
                        .collect();
                    println!("agent {:3} {:2} | {}", a.id, a.lane, track.join(" "));
                }
            }
        }
        Err(e) => println!("error: {e}"),
    }
}
