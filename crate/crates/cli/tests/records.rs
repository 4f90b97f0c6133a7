use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hgrl_cli::plot::{render_rewards, render_trajectories, rolling_stats};
use hgrl_cli::records::{
    compute_metrics, read_csv, summarize, write_csv, LogRow, MetricsContext, MetricsRow, TrajectoryRecord,
    TrajectoryRecorder, LOG_HEADER, METRICS_HEADER, TRAJECTORY_HEADER,
};
use hgrl_core::env::{Env, EnvConfig};
use hgrl_core::sim::{CavOutcome, ScenarioConfig};
use hgrl_rl::episode::{run_episode, UniformPolicy};
use hgrl_rl::metrics::EpisodeMetrics;

fn row(id: u32, kind: &str, tick: u64, lane: u8, pos: f64, accel: f64) -> TrajectoryRecord {
    let cav = kind == "cav";
    TrajectoryRecord {
        tick,
        time: tick as f64 * 0.1,
        id,
        kind: kind.into(),
        lane,
        pos,
        speed: 20.0,
        accel,
        last_l_cmd: cav.then_some(0),
        kappa_front: cav.then_some(-0.25),
        kappa_left_front: None,
        kappa_right_front: cav.then_some(-1.0),
        kappa_rear: None,
        kappa_left_rear: None,
        kappa_right_rear: None,
        r_safe: cav.then_some(-1.0),
        r_task: cav.then_some(0.05),
        r_comfort: cav.then_some(0.0),
        r_energy: cav.then_some(0.0),
        r_terminal: cav.then_some(0.0),
        r_f: cav.then_some(-0.95),
        r_l: None,
        outcome: None,
    }
}

#[test]
fn trajectory_rows_round_trip() {
    let mut rows = vec![row(1, "cav", 3, 1, 120.5, 0.3), row(4, "hv", 3, 2, 99.0, -0.1)];
    rows[0].r_l = Some(-2.5);
    rows[0].outcome = Some("success".into());
    let mut buf = Vec::new();
    write_csv(&mut buf, TRAJECTORY_HEADER, &rows).unwrap();
    let back: Vec<TrajectoryRecord> = read_csv(buf.as_slice(), TRAJECTORY_HEADER).unwrap();
    assert_eq!(back, rows);
}

#[test]
fn empty_exports_hold_only_the_header() {
    let mut buf = Vec::new();
    write_csv::<MetricsRow, _>(&mut buf, METRICS_HEADER, &[]).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.trim_end(), METRICS_HEADER.join(","));
    assert!(read_csv::<MetricsRow, _>(buf.as_slice(), METRICS_HEADER).unwrap().is_empty());
    assert!(read_csv::<LogRow, _>(buf.as_slice(), LOG_HEADER).is_err());
}

#[test]
fn metrics_from_hand_built_rows() {
    // One CAV on the road from t = 10 s to t = 70 s, braking hard on three ticks.
    let mut rows: Vec<TrajectoryRecord> = (100..=700).map(|t| row(0, "cav", t, 0, 50.0 + t as f64, 0.0)).collect();
    for k in [5, 50, 500] {
        rows[k].accel = -5.0;
    }
    rows.push(row(9, "hv", 200, 1, 10.0, -6.0));
    let ctx = MetricsContext { m_cavs: 1, dt: 0.1, e_norm: 105.0 };
    let m = compute_metrics(&rows, &BTreeMap::from([(0, CavOutcome::Success)]), &ctx);
    assert_eq!(m.n_braking, 3.0);
    assert!((m.t_travel - 60.0).abs() < 1e-9);
    assert_eq!((m.successes, m.p_success), (1, 1.0));
    assert!((m.f_reward + 0.95 * 601.0).abs() < 1e-9);
    assert_eq!(m.energy, 0.0);
}

#[test]
fn metrics_from_trajectories_match_the_live_accumulator() {
    for seed in 0..3 {
        let cfg = EnvConfig {
            scenario: ScenarioConfig { n_vehicles: 15, m_cavs: 3, episode_limit_s: 40.0, rng_seed: seed, ..ScenarioConfig::default() },
            ..EnvConfig::default()
        };
        let mut env = Env::new(cfg).unwrap();
        let mut policy = UniformPolicy { rng: ChaCha8Rng::seed_from_u64(seed), bounds: (-4.5, 3.0) };
        let mut rec = TrajectoryRecorder::default();
        let live = run_episode(&mut env, &mut policy, 0, |e, r| rec.observe(e, r)).unwrap();
        let offline = compute_metrics(&rec.rows, &env.sim().final_outcomes(), &MetricsContext::of(&env));
        let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
        let (a, b): (&EpisodeMetrics, &EpisodeMetrics) = (&live, &offline);
        assert_eq!((a.successes, a.collisions, a.missed_exits, a.timeouts), (b.successes, b.collisions, b.missed_exits, b.timeouts));
        assert!(close(a.n_braking, b.n_braking) && close(a.energy, b.energy), "{a:?} vs {b:?}");
        assert!(close(a.f_reward, b.f_reward) && close(a.l_reward, b.l_reward), "{a:?} vs {b:?}");
        assert!(close(a.t_travel, b.t_travel), "{a:?} vs {b:?}");
    }
}

#[test]
fn summary_uses_population_statistics() {
    let m = |p| EpisodeMetrics { m_cavs: 2, p_success: p, ..EpisodeMetrics::default() };
    let rows: Vec<MetricsRow> = [0.0, 1.0, 0.5, 0.5].iter().enumerate().map(|(i, &p)| MetricsRow::new(i, 0, &m(p))).collect();
    let s = summarize(&rows);
    assert_eq!(s.episodes, 4);
    assert_eq!(s.mean["p_success"], 0.5);
    assert!((s.std["p_success"] - 0.125f64.sqrt()).abs() < 1e-12);
}

fn log(episode: usize, l: f64, f: f64) -> LogRow {
    LogRow {
        episode,
        scenario_seed: 0,
        ticks: 10,
        epsilon: 0.5,
        sigma: 0.5,
        updates_l: 0,
        updates_f: 0,
        loss_l: 0.0,
        loss_critic: 0.0,
        actor_objective: 0.0,
        p_success: 0.0,
        collisions: 0,
        missed_exits: 0,
        timeouts: 0,
        n_braking: 0.0,
        t_travel: 0.0,
        energy: 0.0,
        l_reward: l,
        f_reward: f,
    }
}

fn attr<'a>(svg: &'a str, tag: &str, name: &str) -> Vec<&'a str> {
    svg.split(tag)
        .skip(1)
        .filter_map(|s| s.split(&format!("{name}=\"")).nth(1)?.split('"').next())
        .collect()
}

#[test]
fn flat_rewards_have_a_zero_width_band() {
    assert!(rolling_stats(&[3.0; 30], 20).iter().all(|&(m, s)| m == 3.0 && s == 0.0));
    let stats = rolling_stats(&[0.0, 2.0, 4.0], 2);
    assert_eq!(stats, vec![(0.0, 0.0), (1.0, 1.0), (3.0, 1.0)]);
    let logs: Vec<LogRow> = (0..30).map(|e| log(e, -5.0, 2.0)).collect();
    let svg = render_rewards(&logs, 20);
    assert_eq!(svg.matches("class=\"reward-panel\"").count(), 2);
    for band in attr(&svg, "<polygon", "points") {
        let pts: Vec<&str> = band.split(' ').collect();
        let (upper, lower) = pts.split_at(pts.len() / 2);
        let lower: Vec<&str> = lower.iter().rev().copied().collect();
        assert_eq!(upper, lower.as_slice());
    }
}

#[test]
fn constant_speed_vehicle_draws_a_straight_line() {
    let rows: Vec<TrajectoryRecord> = (0..50).map(|t| row(3, "cav", t, 1, 100.0 + 2.0 * t as f64, 0.0)).collect();
    let svg = render_trajectories(&rows, 3);
    let lines = attr(&svg, "<polyline", "points");
    assert_eq!(lines.len(), 1);
    let pts: Vec<(f64, f64)> = lines[0]
        .split(' ')
        .map(|p| {
            let (x, y) = p.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect();
    let slope = |a: (f64, f64), b: (f64, f64)| (b.1 - a.1) / (b.0 - a.0);
    let s0 = slope(pts[0], pts[pts.len() - 1]);
    assert!(pts.windows(2).all(|w| (slope(w[0], w[1]) - s0).abs() < 0.05));
}

#[test]
fn one_panel_per_lane_populated_where_vehicles_drive() {
    let mut rows = Vec::new();
    for t in 0..20 {
        rows.push(row(1, "cav", t, 0, 10.0 * t as f64, 0.0));
        rows.push(row(2, "hv", t, 2, 5.0 + 10.0 * t as f64, 0.0));
    }
    let svg = render_trajectories(&rows, 3);
    assert_eq!(attr(&svg, "<g class=\"lane-panel\"", "data-lane"), vec!["2", "1", "0"]);
    assert_eq!(attr(&svg, "<g class=\"lane-panel\"", "data-vehicles"), vec!["1", "0", "1"]);
    // A lane change splits the vehicle's line between two panels.
    rows.push(row(1, "cav", 20, 1, 200.0, 0.0));
    let svg = render_trajectories(&rows, 3);
    assert_eq!(attr(&svg, "<g class=\"lane-panel\"", "data-vehicles"), vec!["1", "1", "1"]);
}
