use chaosfield::runner::*;
use chaosfield::FieldParams;
use std::path::PathBuf;

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("chaosfield-runner-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Base-scaling run small enough for a unit test.
fn small_base(out: PathBuf) -> RunConfig {
    let dx = 1.0 / 1024.0;
    RunConfig {
        params: FieldParams { d: 1, r: 0.25, alpha: 0.8, epsilon: 4.0 * dx, ..Default::default() },
        lattice: LatticeSpec { n_per_axis: 512, dx, boundary: chaosfield::Boundary::Padded },
        n_realizations: 24,
        seed: 7,
        output_dir: out,
        analysis: AnalysisOptions { fit_window: Some([16.0 * dx, 64.0 * dx]), ..Default::default() },
        ..RunConfig::preset(Experiment::BaseScaling)
    }
}

fn inequalities(r: &GateReport) -> Vec<&str> {
    r.gates.iter().map(|g| g.inequality.as_str()).collect()
}

#[test]
fn gate_strings_snapshot() {
    let mut x = RunConfig::preset(Experiment::XSkewness);
    x.analysis.orders = vec![2, 3, 4, 5];
    assert_eq!(
        inequalities(&validate_gates(&x)),
        [
            "d/2<α",
            "α<d/2+1",
            "ω_dγ₁² < d",
            "2γ₁²ω_d < α−d/2",
            "l is odd and (l+1)γ₁²ω_d<α−d/2",
            "l is even and lγ₁²ω_d<α−d/2",
            "l is odd and (l+1)γ₁²ω_d<α−d/2",
            "1+2lγ₁²ω_d<α",
            "1+2lγ₁²ω_d<α",
        ]
    );
    let x0 = RunConfig::preset(Experiment::X0Scaling);
    assert_eq!(
        inequalities(&validate_gates(&x0)),
        ["0<α", "α<1", "γ₀²ω_d<α", "(2l−3/2)γ₀²ω_d<α∧d/2"]
    );
    assert_eq!(
        four_fifths_incompatibility(3),
        "X family: ζ̃₃ = 1 requires α = 3/2, incompatible with the constraint 3/2 < α < 5/2"
    );
}

#[test]
fn trivial_intermittency_passes_every_required_gate() {
    let mut c = RunConfig::preset(Experiment::XSkewness);
    c.params = FieldParams { d: 1, alpha: 0.8, gamma1: 0.0, gamma0_star: 0.1, ..c.params };
    c.analysis.orders = vec![2, 3];
    let r = validate_gates(&c);
    assert!(r.pass);
    // the odd closed form needs α > 1 in d = 1 and is only reported
    let odd: Vec<&Gate> = r.gates.iter().filter(|g| !g.required).collect();
    assert_eq!(odd.len(), 1);
    assert!(!odd[0].pass);
}

#[test]
fn failing_gate_reports_slack() {
    let mut c = RunConfig::preset(Experiment::XScaling);
    c.params.alpha = 0.4;
    let r = validate_gates(&c);
    assert!(!r.pass);
    let g = r.failures().into_iter().find(|g| g.inequality == "d/2<α").unwrap();
    assert!((g.slack + 0.1).abs() < 1e-12);
    assert!(matches!(run(&c), Err(RunError::Gates(_))));
}

#[test]
fn four_fifths_flags_the_x_family() {
    let c = RunConfig::preset(Experiment::FourFifths);
    let r = validate_gates(&c);
    assert!(r.pass);
    assert_eq!(r.incompatibilities, vec![four_fifths_incompatibility(3)]);
    let mut x = RunConfig::preset(Experiment::XScaling);
    x.params = FieldParams { d: 3, alpha: 1.5, gamma1: 0.0, ..x.params };
    let g = validate_gates(&x);
    assert_eq!(g.failures()[0].inequality, "d/2<α");
    assert_eq!(g.failures()[0].slack, 0.0);
}

#[test]
fn shipped_configs_parse_and_match_presets() {
    for e in Experiment::ALL {
        let path = configs_dir().join(format!("{}.toml", e.name()));
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c, RunConfig::preset(e), "{}", path.display());
        assert!(validate_gates(&c).pass, "{}", e.name());
    }
    let reference = RunConfig::load(&configs_dir().join("reference.toml")).unwrap();
    assert_eq!(reference.experiment, Experiment::BaseScaling);
    assert_eq!(reference.analysis, AnalysisOptions::default());
}

#[test]
fn toml_round_trip_and_rejections() {
    let c = RunConfig::preset(Experiment::ChaosMoments);
    assert_eq!(RunConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
    let bad = c.to_toml().unwrap().replace("experiment = \"chaos_moments\"", "experiment = \"nope\"");
    assert!(RunConfig::from_toml(&bad).is_err());
    let extra = format!("{}\nbogus = 1\n", c.to_toml().unwrap());
    assert!(RunConfig::from_toml(&extra).is_err());
    assert!(Experiment::parse("base_scaling").is_ok());
    assert!(Experiment::parse("base").is_err());
}

#[test]
fn runs_are_byte_reproducible() {
    let a = run(&small_base(scratch("a"))).unwrap();
    let b = run(&small_base(scratch("b"))).unwrap();
    assert_eq!(a.artifacts, b.artifacts);
    assert!(a.artifacts.iter().any(|x| x.name == "fits_abs.csv"));
    let many = run(&RunConfig { workers: 3, ..small_base(scratch("c")) }).unwrap();
    assert_eq!(many.artifacts, a.artifacts);
    assert_eq!(many.summary, a.summary);

    let rep = reproduce(&a.config.output_dir.join(MANIFEST_FILE), &scratch("d")).unwrap();
    assert!(rep.identical);
    let on_disk = RunManifest::load(&a.config.output_dir.join(MANIFEST_FILE)).unwrap();
    assert_eq!(on_disk.artifacts, a.artifacts);
    assert!(on_disk.constants.is_some() && on_disk.lattice_constants.is_some());
    assert_eq!(on_disk.counters["realizations"], 24);
}

#[test]
fn seed_changes_artifacts() {
    let a = run(&small_base(scratch("s1"))).unwrap();
    let b = run(&RunConfig { seed: 8, ..small_base(scratch("s2")) }).unwrap();
    let csv = |m: &RunManifest| m.artifacts.iter().find(|x| x.name == "structure_abs.csv").unwrap().sha256.clone();
    assert_ne!(csv(&a), csv(&b));
}

#[test]
fn compute_errors_name_their_stage() {
    let mut c = small_base(scratch("e"));
    c.analysis.fit_window = Some([16.0 * c.lattice.dx, 20.0 * c.lattice.dx]);
    match run(&c) {
        Err(e @ RunError::Stage { stage: "fit", .. }) => assert!(e.is_config()),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn four_fifths_manifest_records_calibration() {
    let c = RunConfig { output_dir: scratch("ff"), ..RunConfig::preset(Experiment::FourFifths) };
    let m = run(&c).unwrap();
    assert!(m.pass, "{:?}", m.failed_checks());
    assert_eq!(m.summary["alpha_reported"], "0.3563");
    assert_eq!(m.summary["zeta_3"], 1.0);
}

#[test]
fn bounds_experiment_passes() {
    let c = RunConfig { output_dir: scratch("bd"), ..RunConfig::preset(Experiment::Bounds) };
    let m = run(&c).unwrap();
    assert!(m.pass, "{:?}", m.failed_checks());
    assert_eq!(m.checks.len(), 4);
}

#[test]
fn synth_and_moments_write_files() {
    let out = scratch("synth");
    let c = RunConfig { output_dir: out.clone(), ..small_base(out.clone()) };
    let paths = synth(&c, 2).unwrap();
    assert_eq!(paths.len(), 4);
    let f = chaosfield::FieldRealization::read_dump(&out, "field_000001").unwrap();
    assert_eq!(f.values[0].len(), 512);
    assert!(out.join("field_000000_slice.csv").exists());

    let mut m = RunConfig::preset(Experiment::ChaosMoments);
    m.output_dir = scratch("mom");
    m.analysis.gamma1_sweep = None;
    let rows = moments(&m).unwrap();
    assert_eq!(rows.len(), 2);
    assert!((rows[0].estimate.value - 1.0).abs() < 1e-6);
    assert!(m.output_dir.join("moments.csv").exists());
}
