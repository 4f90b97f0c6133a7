use std::path::Path;

use hgrl_cli::config::{env_overrides, load_config, parse_config, RunConfig};
use hgrl_core::graph::GraphMode;
use hgrl_nn::{HeadAgg, NetworkKind};

fn reduced_path() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reduced.toml")
}

#[test]
fn empty_config_is_the_default() {
    assert_eq!(parse_config("", &[], &[]).unwrap(), RunConfig::default());
    assert_eq!(load_config(None, &[]).unwrap(), RunConfig::default());
}

#[test]
fn written_config_reads_back_unchanged() {
    let cfg = parse_config(&std::fs::read_to_string(reduced_path()).unwrap(), &[], &[]).unwrap();
    assert_eq!(parse_config(&cfg.to_toml().unwrap(), &[], &[]).unwrap(), cfg);
}

#[test]
fn reduced_scenario_file_is_valid() {
    let cfg = load_config(Some(&reduced_path()), &[]).unwrap();
    assert_eq!((cfg.env.scenario.n_vehicles, cfg.env.scenario.m_cavs), (12, 2));
    assert_eq!(cfg.env.road.length_m, 400.0);
    assert_eq!(cfg.train.episodes, 200);
    assert_eq!(cfg.seeds, vec![7, 11, 23, 42, 101]);
    assert_eq!(cfg.env.graph_mode, GraphMode::Multilevel);
    assert_eq!(cfg.net.network_kind, NetworkKind::Gat);
}

#[test]
fn invalid_values_are_rejected_with_context() {
    let err = parse_config("[env.road]\nlanes = 4\n", &[], &[]).unwrap_err();
    assert!(format!("{err:#}").contains("lanes"), "{err:#}");
    assert!(parse_config("[train]\ngamma = 1.5\n", &[], &[]).is_err());
    assert!(parse_config("[env.scenario]\nm_cavs = 60\n", &[], &[]).is_err());
}

#[test]
fn unknown_keys_are_rejected() {
    assert!(parse_config("bogus = 1\n", &[], &[]).is_err());
    assert!(parse_config("[env.thresholds]\nz = 3.0\n", &[], &[]).is_err());
    assert!(parse_config("", &[], &["env.bogus=1".into()]).is_err());
    assert!(parse_config("", &[], &["no_equals_sign".into()]).is_err());
}

#[test]
fn overrides_replace_file_values() {
    let text = "[env.thresholds]\nx = 30.0\n";
    let cfg = parse_config(text, &[], &["env.thresholds.x=40.0".into()]).unwrap();
    assert_eq!(cfg.env.thresholds.x, 40.0);
    let cfg = parse_config(text, &[], &["env.thresholds.x=40".into()]).unwrap();
    assert_eq!(cfg.env.thresholds.x, 40.0);
    let cfg = parse_config(text, &[], &["train.episodes=3".into(), "seed=99".into()]).unwrap();
    assert_eq!((cfg.train.episodes, cfg.seed, cfg.env.thresholds.x), (3, 99, 30.0));
}

#[test]
fn ablation_toggles_need_no_section() {
    let toggles = ["graph_mode=basic".to_string(), "network_kind=gcn".into(), "head_agg=concat".into()];
    let cfg = parse_config("", &[], &toggles).unwrap();
    assert_eq!(cfg.env.graph_mode, GraphMode::Basic);
    assert_eq!(cfg.net.network_kind, NetworkKind::Gcn);
    assert_eq!(cfg.net.head_agg, HeadAgg::Concat);
    assert!(parse_config("", &[], &["graph_mode=fancy".into()]).is_err());
}

#[test]
fn environment_variables_map_to_dotted_keys() {
    let vars = [
        ("HGRL_ENV__THRESHOLDS__X".to_string(), "40.0".to_string()),
        ("PATH".into(), "/bin".into()),
        ("HGRL_SEED".into(), "3".into()),
    ];
    let env = env_overrides(vars);
    assert_eq!(env, vec!["env.thresholds.x=40.0".to_string(), "seed=3".into()]);
    let cfg = parse_config("", &env, &["seed=4".into()]).unwrap();
    assert_eq!(cfg.env.thresholds.x, 40.0);
    // Command-line toggles are applied after the environment.
    assert_eq!(cfg.seed, 4);
}
