use std::fs;
use std::path::{Path, PathBuf};

use sota_core::gtfs::{build_bundle, load_slice, CalibrationConfig, TimeWindow};
use sota_core::network::Network;
use sota_core::Error;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini_gtfs")
}

fn copy_fixture() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(fixture()).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), dir.path().join(entry.file_name())).unwrap();
    }
    dir
}

fn config() -> CalibrationConfig {
    CalibrationConfig {
        seed: 42,
        ..Default::default()
    }
}

fn trip_ids(cfg: &CalibrationConfig) -> Vec<String> {
    let mut ids: Vec<String> = load_slice(fixture(), cfg)
        .unwrap()
        .trips
        .into_iter()
        .map(|t| t.id)
        .collect();
    ids.sort();
    ids
}

#[test]
fn window_keeps_trips_departing_inside() {
    let ids = trip_ids(&config());
    // T6 leaves before 06:00; T9 leaves at 09:55 and is kept though it ends after 10:00.
    assert!(!ids.contains(&"T6".to_string()));
    assert!(ids.contains(&"T9".to_string()));
    assert!(ids.contains(&"T11".to_string()));
}

#[test]
fn window_is_half_open() {
    let cfg = CalibrationConfig {
        window: TimeWindow::parse("08:45-09:10").unwrap(),
        ..config()
    };
    assert_eq!(trip_ids(&cfg), ["T1", "T2"]);
}

#[test]
fn service_date_filters_by_calendar() {
    let weekday = CalibrationConfig {
        service_date: Some("20240306".into()),
        ..config()
    };
    assert!(!trip_ids(&weekday).contains(&"T11".to_string()));
    let saturday = CalibrationConfig {
        service_date: Some("20240309".into()),
        ..config()
    };
    assert_eq!(trip_ids(&saturday), ["T11"]);
}

#[test]
fn empty_window_warns_and_cannot_calibrate() {
    let cfg = CalibrationConfig {
        window: TimeWindow::parse("01:00-02:00").unwrap(),
        ..config()
    };
    let slice = load_slice(fixture(), &cfg).unwrap();
    assert!(slice.trips.is_empty());
    assert!(!slice.warnings.is_empty());
    assert!(matches!(build_bundle(&slice, &cfg), Err(Error::Gtfs(_))));
}

#[test]
fn calibration_is_deterministic_and_loads() {
    let cfg = config();
    let a = build_bundle(&load_slice(fixture(), &cfg).unwrap(), &cfg).unwrap();
    let b = build_bundle(&load_slice(fixture(), &cfg).unwrap(), &cfg).unwrap();
    assert_eq!(a.bundle.to_json().unwrap(), b.bundle.to_json().unwrap());
    assert_eq!(a.spec.to_json().unwrap(), b.spec.to_json().unwrap());
    let net = Network::from_spec(&a.spec, &a.bundle).unwrap();
    assert_eq!(net.lines.len(), 3);
    let r1 = a.report.lines.iter().find(|l| l.line == "R1:0").unwrap();
    // Short-turn T10 runs a different pattern and does not count.
    assert_eq!(r1.trips, 3);
    assert_eq!(r1.headway_seconds, 750.0);
    assert_eq!(r1.headway_ticks, 50);
    let other = CalibrationConfig { seed: 43, ..config() };
    let c = build_bundle(&load_slice(fixture(), &other).unwrap(), &other).unwrap();
    assert_ne!(a.bundle.to_json().unwrap(), c.bundle.to_json().unwrap());
}

#[test]
fn missing_table_is_an_error() {
    let dir = copy_fixture();
    fs::remove_file(dir.path().join("stop_times.txt")).unwrap();
    let err = load_slice(dir.path(), &config()).unwrap_err();
    assert!(err.to_string().contains("stop_times.txt"), "{err}");
}

#[test]
fn malformed_time_names_the_row() {
    let dir = copy_fixture();
    let path = dir.path().join("stop_times.txt");
    let text = fs::read_to_string(&path)
        .unwrap()
        .replacen("08:50:00,08:50:00", "08:50:00,8h50", 1);
    fs::write(&path, text).unwrap();
    let err = load_slice(dir.path(), &config()).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("row 3") && msg.contains("8h50"), "{msg}");
}

#[test]
fn unknown_stop_is_an_error() {
    let dir = copy_fixture();
    let path = dir.path().join("stop_times.txt");
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("T1,09:00:00,09:00:00,S9,4\n");
    fs::write(&path, text).unwrap();
    assert!(load_slice(dir.path(), &config())
        .unwrap_err()
        .to_string()
        .contains("S9"));
}
