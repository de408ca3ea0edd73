use ks_radial::conditions::{
    check_balance, check_decay, check_g1, check_h1, check_psi_lower, classify_regime, Condition,
    Holds, Regime, SampleRange,
};
use ks_radial::nonlinearity::{Family, NonlinearitySpec};
use ks_radial::Error;

fn spec(f: Family) -> NonlinearitySpec {
    NonlinearitySpec::new(f).unwrap()
}

#[test]
fn power_law_meets_the_blowup_hypotheses() {
    let c = classify_regime(&spec(Family::PowerLaw { p: 0.5, q: 1.0 }), 3).unwrap();
    assert_eq!(c.regime, Regime::FiniteTimeBlowupHypotheses);
    for cond in [Condition::G1, Condition::H1, Condition::Psi] {
        assert_eq!(c.report(cond).unwrap().holds, Holds::Yes, "{cond}");
    }
}

#[test]
fn semilinear_meets_the_blowup_hypotheses() {
    let c = classify_regime(&NonlinearitySpec::semilinear(), 3).unwrap();
    assert_eq!(c.regime, Regime::FiniteTimeBlowupHypotheses);
}

#[test]
fn decaying_sensitivity_is_an_infinite_time_candidate() {
    let c = classify_regime(
        &spec(Family::DecayingSensitivity {
            gamma1: 3.5,
            d1: 1.0,
        }),
        3,
    )
    .unwrap();
    assert_eq!(c.regime, Regime::InfiniteTimeCandidate);
    assert_eq!(c.report(Condition::Psi).unwrap().holds, Holds::No);
    let decay = c.report(Condition::Decay).unwrap();
    assert_eq!(decay.holds, Holds::Yes);
    let gamma1 = decay.witness("gamma1").unwrap();
    assert!((gamma1 - 3.5).abs() < 0.05, "{gamma1}");
}

#[test]
fn diffusion_only_is_bounded() {
    let c = classify_regime(&spec(Family::DiffusionOnly { q_d: 0.5, c_d: 1.0 }), 3).unwrap();
    assert_eq!(c.regime, Regime::BoundednessRegime);
}

#[test]
fn psi_lower_bound_of_the_semilinear_family() {
    let s = NonlinearitySpec::semilinear();
    let r = check_psi_lower(&s, &SampleRange::default_for(&s)).unwrap();
    assert_eq!(r.holds, Holds::Yes);
    assert!((r.witness("c0").unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn balance_constant_of_a_decaying_family() {
    // φ = β, so sup β/φ = 1 up to the safety factor
    let s = spec(Family::DecayingSensitivity {
        gamma1: 3.5,
        d1: 1.0,
    });
    let r = check_balance(&s, &SampleRange::default_for(&s)).unwrap();
    assert_eq!(r.holds, Holds::Yes);
    assert!((r.witness("D").unwrap() - 1.0).abs() < 1e-6);
    let d = check_decay(&s, 3, &SampleRange::default_for(&s)).unwrap();
    assert!(d.margin > 0.0);
}

#[test]
fn g1_rejects_alpha_at_or_below_two_over_n() {
    let s = NonlinearitySpec::semilinear();
    let err = check_g1(&s, 0.6, 3, &SampleRange::default_g1(&s)).unwrap_err();
    assert!(matches!(err, Error::Hypothesis(_)), "{err}");
}

#[test]
fn h1_rejects_gamma_outside_its_interval() {
    let s = NonlinearitySpec::semilinear();
    let range = SampleRange::default_for(&s);
    assert!(matches!(
        check_h1(&s, 0.5, 1.0, 3, &range),
        Err(Error::Hypothesis(_))
    ));
    assert!(matches!(
        check_h1(&s, 0.1, 1.0, 2, &range),
        Err(Error::Hypothesis(_))
    ));
}

#[test]
fn report_serialises_as_key_value_lines() {
    let s = NonlinearitySpec::semilinear();
    let r = check_psi_lower(&s, &SampleRange::default_for(&s)).unwrap();
    let text = r.to_key_value();
    assert!(text.starts_with("condition = PSI\nholds = yes\n"), "{text}");
    for key in [
        "witness.c0 = ",
        "margin = ",
        "range.lo = ",
        "range.count = 400",
    ] {
        assert!(text.contains(key), "{key}");
    }
}

#[test]
fn sample_range_validation() {
    assert!(SampleRange::new(1.0, 0.5, 10).is_err());
    assert!(SampleRange::new(0.0, 1.0, 10).is_err());
    let r = SampleRange::new(1e-3, 1e3, 7).unwrap();
    let pts = r.points();
    assert_eq!(pts.len(), 7);
    assert!((pts[3] - 1.0).abs() < 1e-12);
}
