use soliton_forge_core::example::{build_example, EllProfile};
use soliton_forge_core::suite::{paper_suite, Check, Tolerances};

#[test]
fn every_preset_passes_in_dimension_three() {
    for (profile, k) in [
        (EllProfile::Log { c: 1.0 }, 1.0),
        (EllProfile::ScaledLog, 2.0),
        (EllProfile::Linear { alpha: 0.5 }, 1.0),
        (EllProfile::exp_for(0.8, 1, 1.0), 1.0),
    ] {
        let e = build_example(1, profile, k).unwrap();
        let report = paper_suite(&e, Tolerances::default()).unwrap();
        let failing: Vec<_> = report.failures().map(|r| (r.check, r.residual, r.detail.clone())).collect();
        assert!(report.pass, "{}: {failing:?}", report.subject);
        assert_eq!(report.summary.len(), Check::ALL.len());
    }
}

#[test]
fn tight_tolerances_are_reported_not_raised() {
    let e = build_example(1, EllProfile::ScaledLog, 1.0).unwrap();
    let tol = Tolerances {
        jet_exact: 1e-300,
        ..Tolerances::default()
    };
    let report = paper_suite(&e, tol).unwrap();
    assert!(!report.pass);
    assert!(report.records.iter().all(|r| r.tolerance > 0.0));
}
