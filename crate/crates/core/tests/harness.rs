use std::path::{Path, PathBuf};

use ks_radial::functionals::EnergySample;
use ks_radial::grid::RadialGrid;
use ks_radial::harness::commands::{
    analyze, make_data, simulate, sweep, sweep_points, ExitStatus, FINAL_FILE, SERIES_FILE,
    SUMMARY_FILE, SWEEP_FILE,
};
use ks_radial::harness::config::DataConfig;
use ks_radial::harness::io::{
    parse_series, parse_snapshot, read_series, series_csv, snapshot_csv, write_atomic,
};
use ks_radial::harness::{Axis, RunConfig};
use ks_radial::nonlinearity::Family;
use ks_radial::solver::{State, Transport};
use proptest::prelude::*;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn parse(text: &str) -> ks_radial::Result<RunConfig> {
    RunConfig::parse(text, Path::new("."))
}

const SMALL_BLOWUP: &str = r#"
[grid]
n = 3
cells = 400
[data]
kind = "concentrated"
m = 50.0
eta = 0.0625
gamma2 = 0.9
[control]
growth_cap = 0.05
[monitors]
p_bound = 1.2
snapshot_stride = 20
"#;

#[test]
fn minimal_config_takes_the_defaults() {
    let cfg = parse("[grid]\nn = 3\n").unwrap();
    assert_eq!(cfg.grid.n, 3);
    assert_eq!(cfg.grid.radius, 1.0);
    assert_eq!(cfg.grid.cells, 400);
    assert!(matches!(cfg.family, Family::Semilinear));
    assert!(
        matches!(cfg.data, DataConfig::Constant { u_star, v_star } if u_star == 1.0 && v_star == 1.0)
    );
    assert_eq!(cfg.monitors.kappa, 1.5);
    assert_eq!(cfg.monitors.p_bound, 1.25);
    assert_eq!(cfg.monitors.tail_fraction, 0.3);
    assert_eq!(cfg.control.transport, Transport::Explicit);
    assert!(cfg.sweep_axes.is_empty());
}

#[test]
fn kappa_at_or_below_n_minus_two_is_rejected() {
    let err = parse("[grid]\nn = 3\n[monitors]\nkappa = 0.5\n").unwrap_err();
    assert_eq!(ExitStatus::for_error(&err), ExitStatus::ConfigError);
    assert!(err.to_string().contains("kappa must exceed n-2"), "{err}");
}

#[test]
fn gamma2_above_n_minus_two_names_the_bound() {
    let text = "[grid]\nn = 3\n[data]\nkind = \"concentrated\"\nm = 1.0\neta = 0.1\ngamma2 = 2.5\n";
    let err = parse(text).unwrap_err();
    assert!(err.to_string().contains("n-2"), "{err}");
}

#[test]
fn unknown_keys_and_bad_values_are_config_errors() {
    let err = parse("[grid]\nn = 3\ncels = 10\n").unwrap_err();
    assert!(err.to_string().contains("grid.cels"), "{err}");
    assert!(parse("[grid]\nn = 3\ncells = 4\n").is_err());
    assert!(parse("[grid]\nn = 3\n[nonlinearity]\nfamily = \"cubic\"\n").is_err());
    assert!(parse("[grid]\nn = 3\n[control]\ntransport = \"sideways\"\n").is_err());
    assert!(parse("not toml at all [").is_err());
}

#[test]
fn override_replaces_one_key() {
    let cfg = parse(SMALL_BLOWUP).unwrap();
    let eta = cfg.with_override("data.eta", 0.125).unwrap();
    assert!(matches!(eta.data, DataConfig::Concentrated(p) if p.eta == 0.125));
    let cells = cfg.with_override("grid.cells", 200.0).unwrap();
    assert_eq!(cells.grid.cells, 200);
    assert!(cfg.with_override("grid.cells", 200.5).is_err());
    assert!(cfg.with_override("data.nope", 1.0).is_err());
}

#[test]
fn axis_parsing() {
    let a = Axis::parse("data.eta = 0.125, 0.0625").unwrap();
    assert_eq!(a.key, "data.eta");
    assert_eq!(a.values, vec![0.125, 0.0625]);
    assert!(Axis::parse("data.eta").is_err());
    assert!(Axis::parse("data.eta = x").is_err());
    assert!(Axis::parse("data.eta =").is_err());
}

#[test]
fn sweep_points_form_the_cartesian_product() {
    let axes = [
        Axis::parse("data.eta = 1, 2").unwrap(),
        Axis::parse("data.m = 3, 4, 5").unwrap(),
    ];
    let points = sweep_points(&axes);
    assert_eq!(points.len(), 6);
    assert_eq!(
        points[0].values,
        vec![("data.eta".into(), 1.0), ("data.m".into(), 3.0)]
    );
    assert_eq!(
        points[5].values,
        vec![("data.eta".into(), 2.0), ("data.m".into(), 5.0)]
    );
    assert_eq!(points[4].index, 4);
}

#[test]
fn every_shipped_config_parses() {
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn missing_config_is_an_io_error() {
    let err = RunConfig::load(Path::new("/nonexistent/run.toml")).unwrap_err();
    assert_eq!(ExitStatus::for_error(&err), ExitStatus::IoError);
    assert_eq!(ExitStatus::for_error(&err).code(), 3);
}

#[test]
fn exit_codes() {
    let codes: Vec<i32> = [
        ExitStatus::Completed,
        ExitStatus::Blowup,
        ExitStatus::Horizon,
        ExitStatus::Steady,
        ExitStatus::ConfigError,
        ExitStatus::IoError,
        ExitStatus::NumericalError,
    ]
    .iter()
    .map(|s| s.code())
    .collect();
    assert_eq!(codes, vec![0, 10, 11, 12, 2, 3, 4]);
}

#[test]
fn atomic_write_replaces_and_leaves_no_temporaries() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/out.txt");
    write_atomic(&path, b"first").unwrap();
    write_atomic(&path, b"second").unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "second");
    let names: Vec<_> = std::fs::read_dir(path.parent().unwrap()).unwrap().collect();
    assert_eq!(names.len(), 1);
}

#[test]
fn series_reader_rejects_a_foreign_header() {
    assert!(parse_series("t,F\n0,1\n").is_err());
    assert!(read_series(Path::new("/nonexistent/series.csv")).is_err());
}

#[test]
fn snapshot_reader_checks_radii_against_the_grid() {
    let grid = RadialGrid::new(3, 1.0, 8).unwrap();
    let state = State::new(0.0, grid.constant(1.0), grid.constant(2.0));
    let text = String::from_utf8(snapshot_csv(&state, &grid).unwrap()).unwrap();
    assert!(parse_snapshot(&text, &RadialGrid::new(3, 2.0, 8).unwrap(), 0.0).is_err());
    assert!(parse_snapshot(&text, &RadialGrid::new(3, 1.0, 9).unwrap(), 0.0).is_err());
    assert!(parse_snapshot("x,y,z\n", &grid, 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn series_round_trips_exactly(
        rows in prop::collection::vec((any::<f64>(), 1e-300f64..1e300, prop::option::of(0.0f64..1e6)), 1..20),
    ) {
        let series: Vec<EnergySample> = rows
            .iter()
            .enumerate()
            .map(|(k, &(f, x, lp))| EnergySample {
                t: k as f64 * x,
                f: if f.is_finite() { f } else { 0.0 },
                d: x,
                f_norm2: x / 3.0,
                g_norm2: x / 7.0,
                mass_u: 1.0 / x,
                mass_v: x.sqrt(),
                sup_u: x,
                sup_v: x,
                grad_v_norm2: x * 0.1,
                lp_norm: lp,
            })
            .collect();
        let text = String::from_utf8(series_csv(&series).unwrap()).unwrap();
        prop_assert_eq!(parse_series(&text).unwrap(), series);
    }

    #[test]
    fn snapshots_round_trip_exactly(cells in 8usize..40, seed in 1e-6f64..1e6) {
        let grid = RadialGrid::new(3, 1.0, cells).unwrap();
        let state = State::new(0.25, grid.sample(|r| seed * (1.0 + r)), grid.sample(|r| seed / (1.0 + r)));
        let text = String::from_utf8(snapshot_csv(&state, &grid).unwrap()).unwrap();
        let back = parse_snapshot(&text, &grid, 0.25).unwrap();
        prop_assert_eq!(back.u.values(), state.u.values());
        prop_assert_eq!(back.v.values(), state.v.values());
    }
}

#[test]
fn simulate_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse(SMALL_BLOWUP).unwrap();
    let run = simulate(&cfg, dir.path()).unwrap();
    assert_eq!(run.status, ExitStatus::Blowup);
    for file in [SERIES_FILE, FINAL_FILE, SUMMARY_FILE] {
        assert!(dir.path().join(file).is_file(), "{file}");
    }
    assert_eq!(run.summary.get("verdict"), Some("FiniteTimeBlowup"));
    assert_eq!(run.summary.get("exit_code"), Some("10"));
    let series = read_series(&dir.path().join(SERIES_FILE)).unwrap();
    assert_eq!(series, run.outcome.series);

    let analysis = tempfile::tempdir().unwrap();
    let kv = analyze(&cfg, dir.path(), analysis.path()).unwrap();
    assert!(kv.get("energy.max_residual").is_some());
    assert!(kv.get("theta").is_some());
    assert!(kv.get("ode.consistent").is_some());
}

#[test]
fn make_data_reports_membership() {
    let dir = tempfile::tempdir().unwrap();
    let kv = make_data(&parse(SMALL_BLOWUP).unwrap(), dir.path()).unwrap();
    for key in ["m", "A", "F0", "K", "threshold", "member"] {
        assert!(kv.get(key).is_some(), "{key}");
    }
    assert!(dir.path().join("data.csv").is_file());
}

#[test]
fn sweep_writes_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse(SMALL_BLOWUP).unwrap();
    let axes = [Axis::parse("data.eta = 0.125, 0.0625").unwrap()];
    let rows = sweep(&cfg, &axes, 2, dir.path()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.status == ExitStatus::Blowup));
    let text = std::fs::read_to_string(dir.path().join(SWEEP_FILE)).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("run,data.eta,verdict,"), "{text}");
    assert!(sweep(&cfg, &[], 1, dir.path()).is_err());
}
