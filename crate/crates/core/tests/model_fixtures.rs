//! Fixture scenes exercising the intersection model builder end to end.

use crossflow_core::config::SimConfig;
use crossflow_core::dynamics::{discretize_double_integrator, step, StateVector};
use crossflow_core::lane::Lane;
use crossflow_core::model::{
    build_model, extract_plan, solve_scene, ModelError, SceneAgent, SceneSnapshot,
};
use crossflow_milp::{check_feasibility, solve_milp, SolveStatus, SolverOptions};

fn agent(id: u64, lane: Lane, pos: f64, vel: f64, entry_order: u64) -> SceneAgent {
    SceneAgent { id, lane, state: StateVector::new(pos, vel), entry_order, entry_step: 0 }
}

fn cfg_with(radius: f64, horizon: usize) -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.radius = radius;
    cfg.horizon = horizon;
    cfg
}

fn solve_objective(scene: &SceneSnapshot, cfg: &SimConfig) -> f64 {
    let (problem, _) = build_model(scene, cfg, &cfg.weights).unwrap();
    let sol = solve_milp(&problem, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    sol.objective.unwrap()
}

#[test]
fn variable_counts_match_formula() {
    let cfg = cfg_with(120.0, 60);
    // one agent: 2N state + N control + 2N slack = 300, no binaries
    let scene = SceneSnapshot { agents: vec![agent(0, Lane::WestEast, -50.0, 15.0, 0)], tick: 0 };
    let (p, idx) = build_model(&scene, &cfg, &cfg.weights).unwrap();
    assert_eq!(idx.num_continuous, 300);
    assert_eq!(p.num_vars(), 300);
    assert_eq!(p.num_binaries(), 0);

    // two same-lane agents: 600 continuous, ordering fixed so no binaries
    let scene = SceneSnapshot {
        agents: vec![
            agent(0, Lane::WestEast, -40.0, 15.0, 0),
            agent(1, Lane::WestEast, -50.0, 15.0, 1),
        ],
        tick: 0,
    };
    let (p, _) = build_model(&scene, &cfg, &cfg.weights).unwrap();
    assert_eq!(p.num_vars(), 600);
    assert_eq!(p.num_binaries(), 0);

    // orthogonal pre-crossing pair: 600 continuous + 2*60 crossing binaries
    let scene = SceneSnapshot {
        agents: vec![
            agent(0, Lane::WestEast, -40.0, 15.0, 0),
            agent(1, Lane::NorthSouth, -50.0, 15.0, 0),
        ],
        tick: 0,
    };
    let (p, idx) = build_model(&scene, &cfg, &cfg.weights).unwrap();
    assert_eq!(idx.num_continuous, 600);
    assert_eq!(p.num_vars(), 720);
    assert_eq!(p.num_binaries(), 120);
}

#[test]
fn empty_scene_rejected() {
    let cfg = SimConfig::default();
    let scene = SceneSnapshot { agents: vec![], tick: 0 };
    assert!(matches!(build_model(&scene, &cfg, &cfg.weights), Err(ModelError::EmptyScene)));
}

#[test]
fn cleared_pair_has_no_binaries() {
    let mut cfg = cfg_with(60.0, 30);
    cfg.s_dist = 4.0;
    // both agents already past the center by more than s_dist
    let scene = SceneSnapshot {
        agents: vec![
            agent(0, Lane::WestEast, 10.0, 15.0, 0),
            agent(1, Lane::NorthSouth, 8.0, 15.0, 0),
        ],
        tick: 0,
    };
    let (p, _) = build_model(&scene, &cfg, &cfg.weights).unwrap();
    assert_eq!(p.num_binaries(), 0);
}

#[test]
fn lone_agent_cruises_at_v_max() {
    let cfg = cfg_with(120.0, 60);
    let scene = SceneSnapshot { agents: vec![agent(0, Lane::WestEast, -80.0, 15.0, 0)], tick: 0 };
    let (plan, _) = solve_scene(&scene, &cfg, &cfg.weights, &[]).unwrap();
    let traj = &plan.agents[0];
    assert!(traj.first_control().abs() < 1e-6);
    // the final step carries no objective weight, so skip it
    for s in &traj.states[..cfg.horizon] {
        assert!((s.vel - cfg.v_max).abs() < 1e-6, "vel {} off v_max", s.vel);
    }
}

#[test]
fn plan_replays_through_dynamics() {
    let mut cfg = cfg_with(60.0, 40);
    cfg.s_dist = 4.0;
    let scene = SceneSnapshot {
        agents: vec![
            agent(0, Lane::WestEast, -20.0, 15.0, 0),
            agent(1, Lane::NorthSouth, -21.0, 15.0, 0),
            agent(2, Lane::NorthSouth, -26.0, 15.0, 1),
        ],
        tick: 0,
    };
    let (problem, idx) = build_model(&scene, &cfg, &cfg.weights).unwrap();
    let sol = solve_milp(&problem, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    let report = check_feasibility(&problem, sol.values.as_ref().unwrap(), 1e-6).unwrap();
    assert!(report.is_feasible(), "violations: {:?}", report.violations);

    let plan = extract_plan(&sol, &idx, &scene).unwrap();
    let mats = discretize_double_integrator(cfg.dt).unwrap();
    for traj in &plan.agents {
        for i in 0..cfg.horizon {
            let next = step(traj.states[i], traj.controls[i], &mats);
            assert!((next.pos - traj.states[i + 1].pos).abs() < 1e-6);
            assert!((next.vel - traj.states[i + 1].vel).abs() < 1e-6);
        }
        // initial state pinned
        assert_eq!(traj.states[0].pos, scene.agents.iter().find(|a| a.id == traj.id).unwrap().state.pos);
    }

    // safety over the horizon, recomputed from the extracted plan
    let east = &plan.agents[0];
    for other in &plan.agents[1..] {
        for i in 1..=cfg.horizon {
            // pair active while both start short of clearing by s_dist
            let sep = east.states[i].pos.abs() + other.states[i].pos.abs();
            assert!(sep >= cfg.s_dist - 1e-6, "step {i}: cross separation {sep}");
        }
    }
    let (lead, follow) = (&plan.agents[1], &plan.agents[2]);
    for i in 1..=cfg.horizon {
        let gap = lead.states[i].pos - follow.states[i].pos;
        assert!(gap >= cfg.d_safe - 1e-6, "step {i}: same-lane gap {gap}");
    }

    // deviation slacks dominate |s - s_f|
    let (pos_f, vel_f) = cfg.terminal_target();
    let values = sol.values.as_ref().unwrap();
    for a in 0..scene.agents.len() {
        for i in 1..=cfg.horizon {
            assert!(values[idx.w_pos(a, i)] >= (values[idx.pos(a, i)] - pos_f).abs() - 1e-6);
            assert!(values[idx.w_vel(a, i)] >= (values[idx.vel(a, i)] - vel_f).abs() - 1e-6);
        }
    }
}

#[test]
fn conflicting_pair_respects_separation_and_one_yields() {
    let mut cfg = cfg_with(60.0, 60);
    cfg.s_dist = 4.0;
    // timed to arrive at the center simultaneously
    let scene = SceneSnapshot {
        agents: vec![
            agent(0, Lane::WestEast, -22.0, 15.0, 0),
            agent(1, Lane::NorthSouth, -22.0, 15.0, 0),
        ],
        tick: 0,
    };
    let (plan, stats) = solve_scene(&scene, &cfg, &cfg.weights, &[]).unwrap();
    assert!(stats.node_count >= 1);
    let (e, s) = (&plan.agents[0], &plan.agents[1]);
    let mut min_sep = f64::INFINITY;
    for i in 1..=cfg.horizon {
        min_sep = min_sep.min(e.states[i].pos.abs() + s.states[i].pos.abs());
    }
    assert!(min_sep >= cfg.s_dist - 1e-6, "min separation {min_sep}");
    // someone slowed down
    let min_vel = plan
        .agents
        .iter()
        .flat_map(|a| a.states.iter())
        .map(|s| s.vel)
        .fold(f64::INFINITY, f64::min);
    assert!(min_vel < cfg.v_max - 0.1, "nobody yielded: min vel {min_vel}");
}

#[test]
fn big_m_doubling_leaves_objective_unchanged() {
    let mut cfg = cfg_with(60.0, 40);
    cfg.s_dist = 4.0;
    let scene = SceneSnapshot {
        agents: vec![
            agent(0, Lane::WestEast, -18.0, 15.0, 0),
            agent(1, Lane::NorthSouth, -20.0, 14.0, 0),
            agent(2, Lane::WestEast, -25.0, 15.0, 1),
        ],
        tick: 0,
    };
    let obj_default = solve_objective(&scene, &cfg);
    let mut cfg2 = cfg.clone();
    cfg2.weights.big_m *= 2.0;
    let obj_doubled = solve_objective(&scene, &cfg2);
    assert!(
        (obj_default - obj_doubled).abs() < 1e-6,
        "objective moved with big-M: {obj_default} vs {obj_doubled}"
    );
}

#[test]
fn enlarging_s_dist_cannot_improve_objective() {
    let mut cfg = cfg_with(60.0, 40);
    cfg.s_dist = 4.0;
    let scene = SceneSnapshot {
        agents: vec![
            agent(0, Lane::WestEast, -20.0, 15.0, 0),
            agent(1, Lane::NorthSouth, -22.0, 15.0, 0),
        ],
        tick: 0,
    };
    let obj4 = solve_objective(&scene, &cfg);
    let mut cfg6 = cfg.clone();
    cfg6.s_dist = 6.0;
    let obj6 = solve_objective(&scene, &cfg6);
    assert!(obj6 <= obj4 + 1e-6, "s_dist=6 objective {obj6} above s_dist=4 {obj4}");
}

#[test]
fn mirrored_scene_same_objective() {
    let mut cfg = cfg_with(60.0, 40);
    cfg.s_dist = 4.0;
    let scene = SceneSnapshot {
        agents: vec![
            agent(0, Lane::WestEast, -20.0, 15.0, 0),
            agent(1, Lane::NorthSouth, -24.0, 13.0, 0),
            agent(2, Lane::WestEast, -28.0, 15.0, 1),
        ],
        tick: 0,
    };
    let mirrored = SceneSnapshot {
        agents: scene
            .agents
            .iter()
            .map(|a| SceneAgent { lane: a.lane.other(), ..*a })
            .collect(),
        tick: 0,
    };
    let a = solve_objective(&scene, &cfg);
    let b = solve_objective(&mirrored, &cfg);
    assert!((a - b).abs() < 1e-6, "asymmetric: {a} vs {b}");
}

#[test]
fn fixed_crossing_order_mode_is_safe_and_lean() {
    let mut cfg = cfg_with(60.0, 40);
    cfg.s_dist = 4.0;
    cfg.fixed_crossing_order = true;
    let scene = SceneSnapshot {
        agents: vec![
            agent(0, Lane::WestEast, -20.0, 15.0, 0),
            agent(1, Lane::NorthSouth, -20.0, 15.0, 0),
        ],
        tick: 0,
    };
    let (problem, _) = build_model(&scene, &cfg, &cfg.weights).unwrap();
    assert_eq!(problem.num_binaries(), 1);
    let (plan, _) = solve_scene(&scene, &cfg, &cfg.weights, &[]).unwrap();
    let (e, s) = (&plan.agents[0], &plan.agents[1]);
    for i in 1..=cfg.horizon {
        let sep = e.states[i].pos.abs() + s.states[i].pos.abs();
        assert!(sep >= cfg.s_dist - 1e-6);
    }
}

#[test]
#[ignore = "timing probe; run with --release --ignored"]
fn bench_congested_scene() {
    let mut cfg = cfg_with(120.0, 60);
    cfg.s_dist = 4.0;
    // 20 agents per lane queued from the region edge toward the center
    let mut agents = Vec::new();
    let mut id = 0;
    for lane in [Lane::WestEast, Lane::NorthSouth] {
        let mut pos = -5.0;
        for k in 0..20u64 {
            // slow head-of-queue group, then fast arrivals with braking room
            let vel = if k < 4 { 6.0 } else { 15.0 };
            agents.push(agent(id, lane, pos, vel, k));
            id += 1;
            pos -= if k == 3 { 16.0 } else { 5.0 };
        }
    }
    let scene = SceneSnapshot { agents, tick: 0 };
    let t0 = std::time::Instant::now();
    let (problem, _) = build_model(&scene, &cfg, &cfg.weights).unwrap();
    let t_build = t0.elapsed();
    println!(
        "model: {} vars ({} bin), {} rows, built in {:?}",
        problem.num_vars(),
        problem.num_binaries(),
        problem.constraints.len(),
        t_build
    );
    let t1 = std::time::Instant::now();
    let (_, stats) = solve_scene(&scene, &cfg, &cfg.weights, &[]).unwrap();
    println!("solved in {:?}, {} nodes", t1.elapsed(), stats.node_count);
}

#[test]
#[ignore = "timing probe; run with --release --ignored"]
fn bench_root_lp_only() {
    use crossflow_milp::{backend::SparseBackend, LpBackend, VarKind};
    let mut cfg = cfg_with(120.0, 60);
    cfg.s_dist = 4.0;
    let mut agents = Vec::new();
    let mut id = 0;
    for lane in [Lane::WestEast, Lane::NorthSouth] {
        let mut pos = -5.0;
        for k in 0..20u64 {
            let vel = if k < 4 { 6.0 } else { 15.0 };
            agents.push(agent(id, lane, pos, vel, k));
            id += 1;
            pos -= if k == 3 { 16.0 } else { 5.0 };
        }
    }
    let scene = SceneSnapshot { agents, tick: 0 };
    let (problem, _) = build_model(&scene, &cfg, &cfg.weights).unwrap();
    let free_bins = problem
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Binary && v.lower != v.upper)
        .count();
    println!(
        "{} vars, {} binaries ({} free), {} rows",
        problem.num_vars(),
        problem.num_binaries(),
        free_bins,
        problem.constraints.len()
    );
    let t = std::time::Instant::now();
    let out = SparseBackend::default().solve_lp(&problem, &[]).unwrap();
    println!("root LP: {:?} -> {:?}", t.elapsed(), out.status);
}
