//! CLI-level behavior: reproducibility of artifacts, file shapes, and
//! config validation.

use std::io::BufReader;
use std::sync::OnceLock;

use meandim::{load_direction_table, DirectionTable};
use meandim_cli::{cmd_gaussian_tune, cmd_keister_sweep, ExperimentConfig};

fn table() -> &'static DirectionTable {
    static TABLE: OnceLock<DirectionTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let path = concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../data/new-joe-kuo-6.21201.txt"
        );
        let file = std::fs::File::open(path).expect("direction file");
        load_direction_table(BufReader::new(file)).expect("parse direction file")
    })
}

fn small_keister_cfg(out: std::path::PathBuf) -> ExperimentConfig {
    ExperimentConfig {
        d_values: Some(vec![25]),
        n: 1 << 10,
        out_dir: out,
        ..ExperimentConfig::default()
    }
}

#[test]
fn keister_csv_is_byte_identical_on_rerun() {
    let t1 = tempfile::tempdir().unwrap();
    let t2 = tempfile::tempdir().unwrap();
    let a = cmd_keister_sweep(&small_keister_cfg(t1.path().into()), table()).unwrap();
    let b = cmd_keister_sweep(&small_keister_cfg(t2.path().into()), table()).unwrap();
    let csv_a = std::fs::read(&a.csv_path).unwrap();
    let csv_b = std::fs::read(&b.csv_path).unwrap();
    assert_eq!(csv_a, csv_b);
}

#[test]
fn keister_csv_has_replicate_and_pooled_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cmd_keister_sweep(&small_keister_cfg(tmp.path().into()), table()).unwrap();
    let text = std::fs::read_to_string(&out.csv_path).unwrap();
    assert!(text.ends_with("\r\n"));
    let lines: Vec<&str> = text.trim_end().split("\r\n").collect();
    assert_eq!(lines[0], "d,replicate,n,sigma2,sum_tau2,nu,seed");
    // one d, five replicates, one pooled row
    assert_eq!(lines.len(), 7);
    assert_eq!(lines.iter().filter(|l| l.contains(",pooled,")).count(), 1);
}

#[test]
fn keister_svg_has_expected_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_keister_cfg(tmp.path().into());
    let out = cmd_keister_sweep(&cfg, table()).unwrap();
    let svg = std::fs::read_to_string(&out.svg_path).unwrap();
    assert!(svg.contains("viewBox=\"0 0 800 500\""));
    let polylines = svg.matches("<polyline").count();
    let dashed = svg.matches("stroke-dasharray").count();
    // one polyline per replicate plus two dotted reference lines
    assert_eq!(polylines, cfg.replicates);
    assert_eq!(dashed, 2);
    // the timestamp comment is the only run-dependent content
    assert!(svg.contains("<!-- generated-at: "));
}

#[test]
fn keister_svg_stable_after_stripping_timestamp() {
    let t1 = tempfile::tempdir().unwrap();
    let t2 = tempfile::tempdir().unwrap();
    let a = cmd_keister_sweep(&small_keister_cfg(t1.path().into()), table()).unwrap();
    let b = cmd_keister_sweep(&small_keister_cfg(t2.path().into()), table()).unwrap();
    let strip = |p: &std::path::Path| {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .filter(|l| !l.contains("generated-at"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&a.svg_path), strip(&b.svg_path));
}

#[test]
fn jobs_setting_does_not_change_output() {
    let t1 = tempfile::tempdir().unwrap();
    let t2 = tempfile::tempdir().unwrap();
    let base = cmd_keister_sweep(&small_keister_cfg(t1.path().into()), table()).unwrap();
    let serial_cfg = ExperimentConfig {
        jobs: Some(1),
        ..small_keister_cfg(t2.path().into())
    };
    let serial = cmd_keister_sweep(&serial_cfg, table()).unwrap();
    assert_eq!(
        std::fs::read(&base.csv_path).unwrap(),
        std::fs::read(&serial.csv_path).unwrap()
    );
}

#[test]
fn gaussian_tune_rejects_target_below_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        theta_targets: vec![0.5],
        n: 1 << 10,
        out_dir: tmp.path().into(),
        ..ExperimentConfig::default()
    };
    assert!(cmd_gaussian_tune(&cfg, table()).is_err());
}

#[test]
fn config_rejects_non_power_of_two_n() {
    let cfg = ExperimentConfig {
        n: 1000,
        ..ExperimentConfig::default()
    };
    assert!(cfg.validate().is_err());
}

#[test]
fn config_rejects_invalid_z3_df() {
    let cfg = ExperimentConfig {
        z3_df: 3.0,
        ..ExperimentConfig::default()
    };
    assert!(cfg.validate().is_err());
}

#[test]
fn config_rejects_unknown_fields() {
    let text = r#"{"experiment": "x", "bogus_field": 1}"#;
    assert!(serde_json::from_str::<ExperimentConfig>(text).is_err());
}

#[test]
fn config_roundtrips_through_json() {
    let cfg = ExperimentConfig::default();
    let text = serde_json::to_string(&cfg).unwrap();
    let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back.d_list(), cfg.d_list());
    assert_eq!(back.n, cfg.n);
    assert_eq!(back.master_seed, cfg.master_seed);
}
