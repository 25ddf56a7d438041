use magsle_lab::config::ExperimentConfig;
use magsle_lab::plot::dat_text;
use magsle_lab::{run_experiment, LabError};

const SMALL: &str = r#"
experiment = "interface_magnetization"
seed = 5
meshes = [0.125, 0.1, 0.0625]
samples = 100
[domain]
shape = "disk"
center = [0.0, 0.0]
radius = 1.0
a = [0.0, -1.0]
b = [0.0, 1.0]
[field]
h = 0.3
"#;

#[test]
fn same_config_same_report_hash_at_any_thread_count() {
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let a = run_experiment(&cfg, 1).unwrap();
    let b = run_experiment(&cfg, 3).unwrap();
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(dat_text(&a), dat_text(&b));
}

#[test]
fn seed_changes_the_report() {
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(run_experiment(&cfg, 1).unwrap().hash(), run_experiment(&other, 1).unwrap().hash());
}

#[test]
fn seed_and_config_hash_are_recorded() {
    let cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    let r = run_experiment(&cfg, 1).unwrap();
    assert_eq!(r.seed, 5);
    assert_eq!(r.config_hash, magsle_lab::experiments::config_hash(&cfg));
    assert!(r.to_json().contains("\"seed\": 5"));
}

#[test]
fn invalid_config_is_rejected_with_field_diagnostics() {
    let mut cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    cfg.meshes = vec![0.0625, 0.125];
    cfg.samples = 3;
    cfg.experiment = "interface_magnetization".into();
    let Err(LabError::ConfigInvalid(d)) = run_experiment(&cfg, 1) else { panic!("accepted a bad config") };
    let fields: Vec<&str> = d.iter().map(|x| x.field.as_str()).collect();
    assert!(fields.contains(&"samples") && fields.contains(&"meshes"), "{fields:?}");
}

#[test]
fn unknown_keys_and_ids_are_errors() {
    assert!(matches!(ExperimentConfig::from_toml(&format!("{SMALL}\nbogus = 1\n")), Err(LabError::Parse(_))));
    let text = SMALL.replace("interface_magnetization", "nope");
    let Err(LabError::ConfigInvalid(d)) = ExperimentConfig::from_toml(&text) else { panic!() };
    assert_eq!(d[0].field, "experiment");
}
