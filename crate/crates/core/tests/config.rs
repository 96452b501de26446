use std::path::PathBuf;

use clipmotion::config::{ConfigError, GroupConfig, GroupFile, ProviderKind, RunConfig};
use clipmotion::pipeline::DeformModel;

/// The full default file. Any drift in a default shows up here.
const DEFAULT_SNAPSHOT: &str = r#"provider = "mock"

[rig]
rho = 0.7
quality = 20.0
max_area_fraction = 0.006666666666666667
skeleton_contour_tol = 0.005

[contour]
flatten_tolerance = 0.1
alpha_threshold = 0.5

[optimize]
steps = 500
learning_rate = 0.5
lambda = 25.0
frames = 24
looping = false
bezier_order = 3
seed = 0
beta1 = 0.9
beta2 = 0.999
epsilon = 0.00000001
clip_norm = 10.0
init_sigma_fraction = 0.01
width = 256
height = 256
prompt = ""
deform = "arap"

[remote]
endpoint = "http://127.0.0.1:8000"
timeout_secs = 120.0
attempts = 3
backoff_ms = 500
guidance_scale = 50.0

[mock]

[export]
frame_delay_ms = 83
svg_frames = true
"#;

#[test]
fn default_config_snapshot() {
    assert_eq!(RunConfig::default().to_toml(), DEFAULT_SNAPSHOT);
}

#[test]
fn defaults_match_published_hyperparameters() {
    let c = RunConfig::default();
    assert_eq!(c.rig.rho, 0.7);
    assert_eq!(c.optimize.lambda, 25.0);
    assert_eq!(c.remote.guidance_scale, 50.0);
    assert_eq!(c.optimize.frames, 24);
    assert_eq!(c.optimize.steps, 500);
    assert_eq!(c.optimize.learning_rate, 0.5);
    assert_eq!((c.optimize.width, c.optimize.height), (256, 256));
    assert_eq!(c.optimize.bezier_order, 3);
    assert_eq!(c.optimize.deform, DeformModel::Arap);
    assert_eq!(c.provider, ProviderKind::Mock);
    c.validate().unwrap();
}

#[test]
fn empty_file_is_default() {
    assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
}

#[test]
fn toml_roundtrip_with_groups() {
    let mut c = RunConfig::default();
    c.provider = ProviderKind::Remote;
    c.optimize.looping = true;
    c.optimize.lambda = 0.0;
    c.groups = vec![
        GroupConfig { name: "body".into(), layers: vec!["torso".into(), "head".into()], keypoints: None },
        GroupConfig { name: "arm".into(), layers: vec!["arm".into()], keypoints: Some("arm.toml".into()) },
    ];
    let back = RunConfig::from_toml_str(&c.to_toml()).unwrap();
    assert_eq!(back, c);
}

#[test]
fn partial_file_overrides_only_given_keys() {
    let c = RunConfig::from_toml_str("[optimize]\nsteps = 40\nlooping = true\n[rig]\nrho = 0.3\n").unwrap();
    assert_eq!(c.optimize.steps, 40);
    assert!(c.optimize.looping);
    assert_eq!(c.rig.rho, 0.3);
    assert_eq!(c.optimize.lambda, 25.0);
    assert_eq!(c.rig.quality, 20.0);
}

#[test]
fn unknown_keys_are_rejected() {
    for text in ["stepz = 3", "[optimize]\nlearning_rat = 0.1", "[contour]\nalpha = 0.2"] {
        assert!(matches!(RunConfig::from_toml_str(text), Err(ConfigError::Parse(_))), "{text}");
    }
}

#[test]
fn invalid_values_are_rejected() {
    let cases: [fn(&mut RunConfig); 7] = [
        |c| c.optimize.steps = 0,
        |c| c.optimize.learning_rate = -1.0,
        |c| c.rig.rho = 0.0,
        |c| c.contour.alpha_threshold = 1.5,
        |c| c.remote.attempts = 0,
        |c| c.groups = vec![GroupConfig { name: "a b".into(), layers: vec![], keypoints: None }],
        |c| {
            c.groups = vec![GroupConfig { name: "a".into(), layers: vec![], keypoints: None }];
            c.keypoints = Some("k.toml".into());
        },
    ];
    for (i, f) in cases.iter().enumerate() {
        let mut c = RunConfig::default();
        f(&mut c);
        assert!(matches!(c.validate(), Err(ConfigError::Invalid(_))), "case {i}");
    }
}

#[test]
fn duplicate_group_names_are_rejected() {
    let mut c = RunConfig::default();
    let g = GroupConfig { name: "a".into(), layers: vec![], keypoints: None };
    c.groups = vec![g.clone(), g];
    assert!(c.validate().is_err());
}

#[test]
fn relative_paths_resolve_against_the_config_directory() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(
        &path,
        "keypoints = \"rig/k.toml\"\n[mock]\ntarget = \"/abs/target.json\"\n",
    )
    .unwrap();
    let c = RunConfig::load(&path).unwrap();
    assert_eq!(c.keypoints, Some(dir.path().join("rig/k.toml")));
    assert_eq!(c.mock.target, Some(PathBuf::from("/abs/target.json")));
}

#[test]
fn group_file_loads_and_rebases() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("groups.toml");
    std::fs::write(
        &path,
        "[[group]]\nname = \"left\"\nlayers = [\"left\"]\nkeypoints = \"left.toml\"\n\n[[group]]\nname = \"right\"\nlayers = [\"right\"]\n",
    )
    .unwrap();
    let f = GroupFile::load(&path).unwrap();
    assert_eq!(f.groups.len(), 2);
    assert_eq!(f.groups[0].keypoints, Some(dir.path().join("left.toml")));
    assert_eq!(f.groups[1].layers, vec!["right".to_string()]);
}

#[test]
fn missing_file_is_a_read_error() {
    assert!(matches!(RunConfig::load("/nonexistent/run.toml".as_ref()), Err(ConfigError::Read { .. })));
}
