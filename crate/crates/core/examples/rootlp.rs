//! Inspect the root LP relaxation of a dumped scene:
//! `cargo run --release --example rootlp -- scene.json 60 30 [s_dist]`

use crossflow_core::config::SimConfig;
use crossflow_core::model::{build_model, SceneSnapshot};
use crossflow_milp::BackendChoice;

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
    let (problem, index) = build_model(&scene, &cfg, &cfg.weights).expect("build");
    let backend = BackendChoice::Sparse.resolve(&problem);
    let out = match backend.solve_lp(&problem, &[]) {
        Ok(out) => out,
        Err(e) => {
            println!("root LP error: {e}");
            return;
        }
    };
    let Some(values) = out.values else {
        println!("root LP not optimal: {:?}", out.status);
        return;
    };
    println!("root LP objective: {:.4}", out.objective.unwrap());
    for (a, agent) in scene.agents.iter().enumerate() {
        let mut frac = Vec::new();
        for i in 1..=cfg.horizon {
            if let Some(c) = index.cross_bin(a, i) {
                let v = values[c];
                if v > 1e-6 && v < 1.0 - 1e-6 {
                    frac.push(format!("c[{i}]={v:.3}"));
                }
            }
        }
        let vel_sum: f64 = (1..cfg.horizon).map(|i| values[index.vel(a, i)]).sum();
        println!(
            "agent {:>3} {} pos {:>7.2} vel {:>5.2} | velsum {:>7.2}/{:<7.2} | {}",
            agent.id,
            agent.lane,
            agent.state.pos,
            agent.state.vel,
            vel_sum,
            cfg.v_max * (cfg.horizon - 1) as f64,
            frac.join(" ")
        );
    }
}
