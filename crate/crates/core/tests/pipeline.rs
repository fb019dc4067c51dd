use hybrid_iss::pipeline::{
    run_pipeline, validate_by_simulation, DwellRegion, ModeChoice, NetworkSpec, Property, RunOptions, ValidateOptions, Verdict,
};

fn load(name: &str) -> NetworkSpec {
    let path = format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"));
    NetworkSpec::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn example_certifies() {
    let spec = load("two_clock_network.json");
    let cert = run_pipeline(&spec, &RunOptions::default()).unwrap().certificate;
    assert_eq!(cert.verdict, Verdict::CertifiedForSolutionClass);
    assert_eq!(cert.property, Some(Property::Gas));
    assert!(cert.failed_step.is_none());
    assert!(!cert.summary.is_empty());
}

#[test]
fn over_budget_clock_is_inconclusive() {
    let spec = load("two_clock_network_l17.json");
    let cert = run_pipeline(&spec, &RunOptions::default()).unwrap().certificate;
    assert_eq!(cert.verdict, Verdict::Inconclusive);
    assert!(cert.failed_step.is_some());
    assert!(cert.reason.as_deref().unwrap_or("").contains("L2"));
}

#[test]
fn certificate_json_is_deterministic() {
    let spec = load("two_clock_network.json");
    let a = serde_json::to_string(&run_pipeline(&spec, &RunOptions::default()).unwrap().certificate).unwrap();
    let b = serde_json::to_string(&run_pipeline(&spec, &RunOptions::default()).unwrap().certificate).unwrap();
    assert_eq!(a, b);
}

#[test]
fn auto_mode_picks_its_own_clock() {
    let mut spec = load("two_clock_network.json");
    spec.augmentation = None;
    let opts = RunOptions { mode: ModeChoice::Auto, ..RunOptions::default() };
    let cert = run_pipeline(&spec, &opts).unwrap().certificate;
    assert!(cert.verdict.certified(), "{:?}: {:?}", cert.verdict, cert.reason);
    assert!(matches!(cert.dwell_region, Some(DwellRegion::Radt { .. })));
}

#[test]
fn input_pair_is_iss_everywhere() {
    let spec = load("iss_pair.json");
    let out = run_pipeline(&spec, &RunOptions::default()).unwrap();
    let cert = &out.certificate;
    assert_eq!(cert.verdict, Verdict::CertifiedIss);
    assert_eq!(cert.dwell_region, Some(DwellRegion::Unrestricted));
    let mut vo = ValidateOptions::from_spec(&spec);
    vo.trajectories = 10;
    let rep = validate_by_simulation(&out, &spec, &vo).unwrap();
    assert!(rep.confirmed, "{:?}", rep.failures);
}

#[test]
fn example_validates() {
    let spec = load("two_clock_network.json");
    let out = run_pipeline(&spec, &RunOptions::default()).unwrap();
    let mut vo = ValidateOptions::from_spec(&spec);
    vo.trajectories = 20;
    let rep = validate_by_simulation(&out, &spec, &vo).unwrap();
    assert!(rep.confirmed);
    assert_eq!(rep.in_class, 20);
}
