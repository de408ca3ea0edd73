use ks_radial::grid::RadialGrid;
use ks_radial::initial_data::{concentrated_family, constant_state, EtaFamilyParams, InitialData};
use ks_radial::nonlinearity::{Family, NonlinearitySpec, Tabulation};
use ks_radial::solver::{
    detect_verdict, run, step, Monitors, Rejection, State, StepAttempt, StepControl, StepRecord,
    Transport, Verdict,
};
use ks_radial::Error;
use proptest::prelude::*;

/// First positive root of `tan k = k`: `j0(k r)` is then a Neumann eigenfunction on the unit ball.
const K1: f64 = 4.493_409_457_909_064;

fn j0(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `φ ≡ 1` with a negligible sensitivity, so `u` diffuses freely.
fn pure_diffusion() -> NonlinearitySpec {
    let t = Tabulation::from_csv("s,phi\n0,1\n1e6,1\n", "s,beta\n0,1e-30\n1e6,1e-30\n").unwrap();
    NonlinearitySpec::new(Family::Tabulated(t)).unwrap()
}

#[test]
fn constant_state_is_an_equilibrium() {
    let grid = RadialGrid::new(3, 1.0, 50).unwrap();
    let data = constant_state(&grid, 2.0, 2.0).unwrap();
    let out = run(
        &data,
        &grid,
        &NonlinearitySpec::semilinear(),
        &StepControl::default(),
        &Monitors::default(),
    )
    .unwrap();
    assert!(
        matches!(out.verdict, Verdict::SteadyState { .. }),
        "{:?}",
        out.verdict
    );
    assert!(out
        .final_state
        .u
        .values()
        .iter()
        .all(|&u| (u - 2.0).abs() < 1e-14));
    assert!(out
        .final_state
        .v
        .values()
        .iter()
        .all(|&v| (v - 2.0).abs() < 1e-14));
}

#[test]
fn diffusion_eigenmode_decays_at_the_analytic_rate() {
    // u = 1 + ε j0(k r) and v = 1 + ε j0(k r) both decay as exp(−k² t) when β ≈ 0
    let eps = 0.1;
    let t_end = 0.02;
    let spec = pure_diffusion();
    let errors: Vec<f64> = [(200usize, 2e-5), (400, 1e-5)]
        .iter()
        .map(|&(cells, dt)| {
            let grid = RadialGrid::new(3, 1.0, cells).unwrap();
            let mode = grid.sample(|r| 1.0 + eps * j0(K1 * r));
            let data = InitialData::from_fields(&grid, mode.clone(), mode).unwrap();
            let ctrl = StepControl {
                t_end,
                dt_init: dt,
                dt_max: dt,
                ..Default::default()
            };
            let out = run(&data, &grid, &spec, &ctrl, &Monitors::default()).unwrap();
            let decay = (-K1 * K1 * out.final_state.t).exp();
            let fields = [out.final_state.u.values(), out.final_state.v.values()];
            fields
                .iter()
                .flat_map(|f| f.iter().zip(grid.centers()))
                .map(|(w, &r)| (w - 1.0 - eps * decay * j0(K1 * r)).abs() / eps)
                .fold(0.0, f64::max)
        })
        .collect();
    assert!(errors[0] < 5e-3, "coarse error {}", errors[0]);
    assert!(errors[1] < errors[0] * 0.6, "no convergence: {errors:?}");
}

#[test]
fn explicit_step_rejects_above_the_cfl_bound() {
    let grid = RadialGrid::new(3, 1.0, 100).unwrap();
    let data = concentrated_family(&grid, &EtaFamilyParams::new(50.0, 0.125, 0.9)).unwrap();
    let spec = NonlinearitySpec::semilinear();
    let ctrl = StepControl::default();
    let attempt = step(&data.as_state(), 1e-2, &grid, &spec, &ctrl).unwrap();
    let dt_cfl = match attempt {
        StepAttempt::Rejected(Rejection::Cfl { dt_cfl }) => dt_cfl,
        other => panic!("expected a CFL rejection, got {other:?}"),
    };
    assert!(matches!(
        step(&data.as_state(), 0.5 * dt_cfl, &grid, &spec, &ctrl).unwrap(),
        StepAttempt::Accepted(_)
    ));
}

#[test]
fn implicit_transport_accepts_large_steps_and_conserves_mass() {
    let grid = RadialGrid::new(3, 1.0, 100).unwrap();
    let data = concentrated_family(&grid, &EtaFamilyParams::new(50.0, 0.125, 0.9)).unwrap();
    let spec = NonlinearitySpec::new(Family::DecayingSensitivity {
        gamma1: 3.5,
        d1: 1.0,
    })
    .unwrap();
    let ctrl = StepControl {
        transport: Transport::LinearlyImplicit,
        ..Default::default()
    };
    match step(&data.as_state(), 1e-2, &grid, &spec, &ctrl).unwrap() {
        StepAttempt::Accepted(s) => {
            let m: f64 = grid
                .volumes()
                .iter()
                .zip(s.u.values())
                .map(|(w, u)| w * u)
                .sum();
            assert!((m - data.m).abs() / data.m < 1e-13);
            assert!(s.u.min() > 0.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn step_rejects_nonpositive_dt() {
    let grid = RadialGrid::new(3, 1.0, 10).unwrap();
    let data = constant_state(&grid, 1.0, 1.0).unwrap();
    let err = step(
        &data.as_state(),
        0.0,
        &grid,
        &NonlinearitySpec::semilinear(),
        &StepControl::default(),
    );
    assert!(matches!(err, Err(Error::OutOfRange { .. })));
}

#[test]
fn state_validation_rejects_foreign_and_nonpositive_fields() {
    let grid = RadialGrid::new(3, 1.0, 8).unwrap();
    let other = RadialGrid::new(3, 1.0, 9).unwrap();
    let foreign = State::new(0.0, other.constant(1.0), grid.constant(1.0));
    assert!(foreign.validate(&grid).is_err());
    let zero = State::new(0.0, grid.constant(0.0), grid.constant(1.0));
    assert!(zero.validate(&grid).is_err());
}

#[test]
fn invalid_control_is_a_config_error() {
    let ctrl = StepControl {
        dt_min: 1.0,
        dt_init: 1e-3,
        ..Default::default()
    };
    assert!(matches!(ctrl.validate(), Err(Error::Config(_))));
}

fn record(t: f64, dt: f64, accepted: bool, sup_u: f64, residual: f64) -> StepRecord {
    StepRecord {
        t,
        dt,
        accepted,
        sup_u,
        residual,
    }
}

#[test]
fn verdict_rules() {
    let ctrl = StepControl::default();
    assert_eq!(detect_verdict(&[], &ctrl, 1e-10), None);
    let crossing = [record(1.0, 1e-6, true, 2e8, 1.0)];
    assert_eq!(
        detect_verdict(&crossing, &ctrl, 1e-10),
        Some(Verdict::FiniteTimeBlowup { t_star: 1.0 })
    );
    let pinned: Vec<StepRecord> = (0..10)
        .map(|_| record(0.5, ctrl.dt_min, false, 2e8, f64::NAN))
        .collect();
    assert_eq!(
        detect_verdict(&pinned, &ctrl, 1e-10),
        Some(Verdict::FiniteTimeBlowup { t_star: 0.5 })
    );
    let quiet: Vec<StepRecord> = (0..10)
        .map(|k| record(k as f64, 1e-3, true, 1.0, 1e-12))
        .collect();
    assert!(matches!(
        detect_verdict(&quiet, &ctrl, 1e-10),
        Some(Verdict::SteadyState { .. })
    ));
    assert_eq!(detect_verdict(&quiet[1..], &ctrl, 1e-10), None);
}

#[test]
fn semilinear_concentration_blows_up() {
    // sup u is capped by m / |V_0|, so the grid must be fine enough to reach the threshold
    let grid = RadialGrid::new(3, 1.0, 400).unwrap();
    let data = concentrated_family(&grid, &EtaFamilyParams::new(50.0, 0.0625, 0.9)).unwrap();
    let out = run(
        &data,
        &grid,
        &NonlinearitySpec::semilinear(),
        &StepControl::default(),
        &Monitors::default(),
    )
    .unwrap();
    match out.verdict {
        Verdict::FiniteTimeBlowup { t_star } => {
            assert!(t_star > 0.0 && t_star < 1e-3);
            assert!(out.final_state.u.max() >= 1e8);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn max_steps_guard_reports_a_solver_error() {
    let grid = RadialGrid::new(3, 1.0, 50).unwrap();
    let data = concentrated_family(&grid, &EtaFamilyParams::new(5.0, 0.25, 0.9)).unwrap();
    let ctrl = StepControl {
        max_steps: 5,
        ..Default::default()
    };
    let err = run(
        &data,
        &grid,
        &NonlinearitySpec::semilinear(),
        &ctrl,
        &Monitors::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::Solver { .. }), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn runs_conserve_mass_and_positivity(
        amp in 0.0f64..3.0,
        width in 0.1f64..0.6,
        implicit in any::<bool>(),
    ) {
        let grid = RadialGrid::new(3, 1.0, 60).unwrap();
        let u0 = grid.sample(|r| 1.0 + amp * (-(r / width).powi(2)).exp());
        let data = InitialData::from_fields(&grid, u0, grid.constant(1.0)).unwrap();
        let ctrl = StepControl {
            t_end: 0.05,
            transport: if implicit { Transport::LinearlyImplicit } else { Transport::Explicit },
            ..Default::default()
        };
        let out = run(&data, &grid, &NonlinearitySpec::semilinear(), &ctrl, &Monitors::default()).unwrap();
        for s in &out.series {
            prop_assert!((s.mass_u - data.m).abs() / data.m < 1e-12);
        }
        prop_assert!(out.final_state.u.min() > 0.0);
        prop_assert!(out.final_state.v.min() > 0.0);
    }
}
