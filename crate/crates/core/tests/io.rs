use bbdoa_core::io::{
    decode_record, encode_record, gnuplot_script, load_config, load_record, record_from_csv, save_record, save_table,
    Manifest, PlotKind, RecordFormat, Table,
};
use bbdoa_core::{BearingTimeRecord, Error, EstimatorKind, ScenarioConfig, SnapshotMatrix, SpatialSpectrum};
use nalgebra::DMatrix;
use num_complex::Complex64;

fn manifest() -> Manifest {
    Manifest {
        config_hash: "ab12".into(),
        seed: 7,
        estimator: "cbf".into(),
    }
}

fn real_record(m: usize, n: usize) -> SnapshotMatrix {
    // values exactly representable in f32 so the binary path is lossless
    let data = DMatrix::from_fn(m, n, |ch, t| ((ch * 31 + t * 7) % 97) as f64 / 64.0 - 0.75);
    SnapshotMatrix::time(data, 4096.0).unwrap()
}

fn complex_record() -> SnapshotMatrix {
    let data = DMatrix::from_fn(4, 9, |ch, t| Complex64::new(ch as f64 * 0.25, -(t as f64) / 8.0));
    SnapshotMatrix::narrowband(data).unwrap()
}

#[test]
fn records_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    for (name, rec) in [("real", real_record(5, 40)), ("complex", complex_record())] {
        for format in [RecordFormat::Binary, RecordFormat::Csv] {
            let path = dir.path().join(format!("{name}.{format:?}"));
            save_record(&rec, &path, format).unwrap();
            assert_eq!(load_record(&path, format).unwrap(), rec, "{name} {format:?}");
        }
    }
}

#[test]
fn csv_round_trip_keeps_full_precision() {
    let data = DMatrix::from_fn(3, 5, |ch, t| (ch as f64 + 1.0) / 3.0 + t as f64 * 1e-17 + std::f64::consts::PI);
    let rec = SnapshotMatrix::time(data, 1000.0).unwrap();
    let text = bbdoa_core::io::record_to_csv(&rec);
    assert!(text.starts_with("# channels=3 samples=5 rate=1000"));
    assert_eq!(record_from_csv(&text).unwrap(), rec);
}

#[test]
fn corrupt_magic_is_rejected() {
    let mut bytes = encode_record(&real_record(3, 4));
    bytes[0] = b'X';
    match decode_record(&bytes) {
        Err(Error::Parse { offset, .. }) => assert_eq!(offset, 0),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn truncated_and_padded_payloads_name_their_offset() {
    let bytes = encode_record(&real_record(3, 4));
    let short = &bytes[..bytes.len() - 3];
    assert!(matches!(decode_record(short), Err(Error::Parse { offset, .. }) if offset == short.len() as u64));
    let mut long = bytes.clone();
    long.push(0);
    assert!(matches!(decode_record(&long), Err(Error::Parse { offset, .. }) if offset == bytes.len() as u64));
}

#[test]
fn six_hundred_twenty_channels_fit_the_header() {
    let rec = real_record(620, 16);
    assert_eq!(decode_record(&encode_record(&rec)).unwrap().channels(), 620);
}

#[test]
fn csv_row_count_mismatch_is_a_parse_error() {
    let text = "# channels=3 samples=2 rate=100 kind=real\n1,2\n3,4\n";
    assert!(matches!(record_from_csv(text), Err(Error::Parse { .. })));
    let text = "# channels=2 samples=2 rate=100 kind=real\n1,2\n3\n";
    assert!(matches!(record_from_csv(text), Err(Error::Parse { offset: 46, .. })));
}

#[test]
fn spectrum_table_has_one_row_per_angle() {
    let s = SpatialSpectrum::new(vec![-1.0, 0.0, 1.0], vec![0.5, 1.0, 0.25], EstimatorKind::Cbf, None, 1e-12).unwrap();
    let csv = s.to_csv(&manifest());
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "# manifest config_sha256=ab12 seed=7 estimator=cbf");
    assert_eq!(lines[1], "angle_deg,power,power_db");
    assert_eq!(lines.len(), 2 + 3);
    assert_eq!(lines[3], "0,1,0");
}

#[test]
fn btr_table_is_frames_by_angles() {
    let btr = BearingTimeRecord {
        times: vec![0.5, 1.0],
        angles: vec![10.0, 20.0, 30.0],
        power_db: vec![vec![0.0, -3.0, -6.0], vec![-6.0, 0.0, -3.0]],
        estimator: EstimatorKind::Qspice,
    };
    let csv = btr.to_csv(&manifest());
    let rows: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.split(',').count() == 4));
    assert!(rows[1].starts_with("1,"));
}

#[test]
fn tables_are_written_with_their_plot_script() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let s = SpatialSpectrum::new(vec![0.0, 1.0], vec![1.0, 0.5], EstimatorKind::Music, None, 1e-12).unwrap();
    save_table(&s, &manifest(), &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), s.to_csv(&manifest()));
    let script = gnuplot_script(PlotKind::Spectrum, "s.csv");
    assert!(script.contains("file = 's.csv'"));
}

#[test]
fn scenario_configs_load_from_toml_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bbdoa_core::preset("nonuniform").unwrap();
    let toml_path = dir.path().join("s.toml");
    std::fs::write(&toml_path, toml::to_string(&cfg).unwrap()).unwrap();
    let json_path = dir.path().join("s.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    assert_eq!(load_config::<ScenarioConfig>(&toml_path).unwrap(), cfg);
    assert_eq!(load_config::<ScenarioConfig>(&json_path).unwrap(), cfg);
    std::fs::write(&toml_path, "name = 3").unwrap();
    assert!(matches!(load_config::<ScenarioConfig>(&toml_path), Err(Error::Config(_))));
}
