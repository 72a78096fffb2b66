use std::fs;

use nalgebra::DVector;

use spectral_control::experiment::{
    best_linear_in_hindsight, in_stable_class, min_cost_closed_form, presets, run_experiment, sublinearity_sweep,
    ComparatorKind, ComparatorMode, ControllerSpec, CostSpec, ExperimentConfig, GridSpec, RunOptions, SystemSpec,
};
use spectral_control::lds::{CostFunction, DisturbanceSignal, LdsSystem, SignalKind, SystemBounds};
use spectral_control::par::Execution;
use spectral_control::Error;

fn scalar(a: f64, gamma: f64) -> SystemSpec {
    SystemSpec::Scalar {
        a,
        b: 1.0,
        gamma,
        kappa: 1.0,
        w_bound: 1.0,
    }
}

fn small_config() -> ExperimentConfig {
    let mut cfg = presets::regret_sweep_base();
    cfg.name = "small".into();
    cfg.horizon = 200;
    cfg.seeds = vec![1, 2];
    cfg.controllers.push(ControllerSpec::Zero { name: None });
    cfg
}

#[test]
fn hindsight_finds_deadbeat_gain_for_constant_disturbance() {
    let sys = LdsSystem::scalar(0.9, 1.0).unwrap();
    let sig = DisturbanceSignal::new(SignalKind::Constant { value: vec![1.0] }, 0, 1.0);
    let cost = CostSpec::QuadraticDiag {
        q: vec![1.0],
        r: vec![0.0],
    }
    .build(1, 1)
    .unwrap();
    let grid = GridSpec::default_for(1);
    let best = best_linear_in_hindsight(&sys, &sig, &cost, 200, &grid, None, Execution::Parallel).unwrap();
    assert!((best.k[(0, 0)] + 0.9).abs() <= 1e-3, "k = {}", best.k);
    assert!((best.total_cost - 199.0).abs() < 1e-6);
    assert!(in_stable_class(&sys, &best.k));
}

#[test]
fn hindsight_matches_hinge_closed_form() {
    let gamma = 0.25;
    let bounds = SystemBounds {
        gamma,
        ..SystemBounds::default()
    };
    let sys = LdsSystem::new(
        nalgebra::DMatrix::from_element(1, 1, 0.5),
        nalgebra::DMatrix::from_element(1, 1, 1.0),
        bounds,
    )
    .unwrap();
    let best = best_linear_in_hindsight(
        &sys,
        &DisturbanceSignal::zero(),
        &CostFunction::hinge_state(),
        16,
        &GridSpec::default_for(1),
        Some(DVector::from_element(1, 1.0)),
        Execution::Sequential,
    )
    .unwrap();
    assert!((best.total_cost - min_cost_closed_form(gamma, 16)).abs() < 1e-9);
    assert!((best.total_cost + 3.959909617).abs() < 1e-9);
    assert!((0.5 + best.k[(0, 0)] - 0.75).abs() < 1e-9);
}

#[test]
fn hindsight_rejects_large_dimensions() {
    let cfg = presets::study_desk(presets::StudySignal::GaussianLinear);
    let sys = cfg.system.build().unwrap();
    let err = best_linear_in_hindsight(
        &sys,
        &cfg.signal,
        &CostFunction::identity(10, 4),
        10,
        &GridSpec::default_for(4),
        None,
        Execution::Sequential,
    )
    .unwrap_err();
    assert!(matches!(err, Error::DimensionTooLarge(40)));
}

#[test]
fn zero_everything_has_zero_regret() {
    let cfg = ExperimentConfig {
        name: "zero".into(),
        system: scalar(0.5, 0.1),
        signal: DisturbanceSignal::zero(),
        cost: CostSpec::Quadratic { q: 1.0, r: 1.0 },
        controllers: vec![ControllerSpec::Zero { name: None }],
        schedule: Default::default(),
        horizon: 50,
        seeds: vec![0],
        x0: None,
        x0_scale: None,
        comparator: ComparatorMode::BestOfRun,
        hindsight: None,
        output_dir: None,
    };
    let out = run_experiment(&cfg, RunOptions::default()).unwrap();
    let r = out.report("zero", 0).unwrap();
    assert_eq!(r.total_cost, 0.0);
    assert_eq!(r.regret, 0.0);
    assert_eq!(out.comparators[0].kind, ComparatorKind::BestOfRun);
}

#[test]
fn zero_disturbance_sweep_has_no_regret() {
    let mut base = presets::regret_sweep_base();
    base.signal = DisturbanceSignal::zero();
    let report = sublinearity_sweep(&base, &[100, 200], RunOptions::default()).unwrap();
    assert!(report.rows.iter().all(|r| r.regret.abs() < 1e-12));
}

#[test]
fn regret_is_difference_of_totals() {
    let out = run_experiment(&small_config(), RunOptions::default()).unwrap();
    for r in &out.reports {
        assert_eq!(r.regret, r.total_cost - r.comparator_cost);
        assert_eq!(*r.regret_curve.last().unwrap(), r.regret);
        assert_eq!(r.comparator_kind, ComparatorKind::HindsightLinear);
    }
    for c in &out.comparators {
        let sys = small_config().system.build().unwrap();
        let k = nalgebra::DMatrix::from_row_slice(1, 1, c.gain.as_ref().unwrap());
        assert!(in_stable_class(&sys, &k));
    }
}

#[test]
fn outputs_are_byte_identical_and_parallel_matches_sequential() {
    let cfg = small_config();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&cfg, RunOptions::default())
        .unwrap()
        .write(&cfg, a.path())
        .unwrap();
    let seq = RunOptions {
        exec: Execution::Sequential,
        ..RunOptions::default()
    };
    run_experiment(&cfg, seq).unwrap().write(&cfg, b.path()).unwrap();
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 3 * 2 * 2 + 2);
    for name in names {
        let x = fs::read(a.path().join(&name)).unwrap();
        let y = fs::read(b.path().join(&name)).unwrap();
        assert_eq!(x, y, "{name:?} differs");
    }
    let csv = fs::read_to_string(a.path().join("osc_seed1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), format!("# config_hash: {}", cfg.config_hash()));
    assert_eq!(lines.next().unwrap(), "t,x_0,u_0,w_0,cost,memoryless_loss,step_ns");
    assert_eq!(lines.count(), 200);
}

#[test]
fn regret_curve_rederivable_from_csv() {
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&cfg, RunOptions::default()).unwrap();
    out.write(&cfg, dir.path()).unwrap();
    let costs: Vec<f64> = fs::read_to_string(dir.path().join("gpc_seed2.csv"))
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    let total: f64 = costs.iter().sum();
    let r = out.report("gpc", 2).unwrap();
    assert_eq!(total, r.total_cost);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config_hash"], cfg.config_hash());
}

#[test]
fn config_rejects_unknown_keys_and_duplicate_names() {
    let mut v: serde_json::Value = serde_json::from_str(&small_config().to_json().unwrap()).unwrap();
    v["surprise"] = serde_json::json!(1);
    assert!(matches!(ExperimentConfig::from_json(&v.to_string()), Err(Error::Config(_))));
    let mut cfg = small_config();
    cfg.controllers.push(ControllerSpec::Zero { name: None });
    assert!(matches!(ExperimentConfig::from_json(&cfg.to_json().unwrap()), Err(Error::Config(_))));
}

#[test]
fn shipped_configs_parse() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::from_json(&fs::read_to_string(&path).unwrap()).unwrap();
        cfg.system.build().unwrap();
        count += 1;
    }
    assert!(count >= 7);
    let desk = ExperimentConfig::from_json(
        &fs::read_to_string(format!("{dir}/study_desk_stu_like.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(desk, presets::study_desk(presets::StudySignal::StuLike));
}

#[test]
fn fixed_gain_with_wrong_shape_is_config_error() {
    let mut cfg = small_config();
    cfg.controllers = vec![ControllerSpec::FixedK {
        name: Some("bad".into()),
        k: vec![1.0, 2.0],
    }];
    let err = run_experiment(&cfg, RunOptions::default()).unwrap_err();
    assert!(err.is_config(), "{err}");
}
