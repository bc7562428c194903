use std::path::Path;
use std::process::{Command, Output};

use echotriage_core::dicom::{read_file, tags, PLACEHOLDER};
use echotriage_core::pipeline::Store;
use serde_json::Value;

fn echotriage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_echotriage"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_ok(args: &[&str]) -> String {
    let out = echotriage(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const PHANTOM_TOML: &str = r#"
study_id = "cli-study"

[[clip]]
long_semi_axis_mm = 40.0
radial_semi_axis_ed_mm = 20.0
radial_semi_axis_es_mm = 13.4
pixel_spacing_mm = 1.0
"#;

fn phantom(dir: &Path) -> std::path::PathBuf {
    let spec = dir.join("phantom.toml");
    std::fs::write(&spec, PHANTOM_TOML).unwrap();
    let out = dir.join("raw");
    let listed = stdout_ok(&["phantom", "--spec", p(&spec), "--out", p(&out)]);
    assert_eq!(listed.lines().count(), 1);
    out
}

#[test]
fn workload_defaults_give_180_hours() {
    assert_eq!(stdout_ok(&["workload"]).trim(), "180");
    let out = stdout_ok(&[
        "workload",
        "--studies",
        "10000",
        "--prevalence",
        "0.4",
        "--sensitivity",
        "0.3",
        "--minutes",
        "9",
    ]);
    assert_eq!(out.trim().parse::<f64>().unwrap(), 180.0);
    assert!(!echotriage(&["workload", "--prevalence", "1.5"]).status.success());
}

#[test]
fn calibrate_example_cohort() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("cohort.csv");
    std::fs::write(
        &csv,
        "study_id,estimated_lvef,truly_normal\na,65,true\nb,62,true\nc,55,true\nd,61,false\ne,45,false\n",
    )
    .unwrap();
    let v: Value = serde_json::from_str(&stdout_ok(&[
        "calibrate",
        "--cohort",
        p(&csv),
        "--precision-floor",
        "0.8",
    ]))
    .unwrap();
    assert_eq!(v["chosen_cutoff"], 61.0);
    assert_eq!(v["achieved_precision"], 1.0);
    assert_eq!(v["feasible"], true);

    std::fs::write(&csv, "study_id,estimated_lvef,truly_normal\na,sixty,true\n").unwrap();
    let out = echotriage(&["calibrate", "--cohort", p(&csv)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn ingest_anonymizes_and_keeps_sidecars() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = phantom(tmp.path());
    std::fs::write(raw.join("junk.dcm"), b"not dicom").unwrap();
    let store = tmp.path().join("ingested");
    let out = stdout_ok(&["ingest", p(&raw), "--out", p(&store), "--anonymize"]);
    let line: Value = serde_json::from_str(out.lines().next().unwrap()).unwrap();
    assert_eq!(line["clip_id"], "cli-study-a4c");
    assert_eq!(line["anonymized"], true);

    let study = store.join("cli-study");
    let file = read_file(&std::fs::read(study.join("cli-study-a4c.dcm")).unwrap()).unwrap();
    let ds = file.elements();
    assert_eq!(ds.text(tags::PATIENT_NAME).as_deref(), Some(PLACEHOLDER));
    assert_eq!(ds.text(tags::PATIENT_ID).as_deref(), Some(PLACEHOLDER));
    assert!(study.join("cli-study-a4c.LV.masks.rle").exists());

    let plain = tmp.path().join("plain");
    stdout_ok(&["ingest", p(&raw), "--out", p(&plain)]);
    let file = read_file(&std::fs::read(plain.join("cli-study/cli-study-a4c.dcm")).unwrap()).unwrap();
    assert_eq!(
        file.elements().text(tags::PATIENT_NAME).as_deref(),
        Some("PHANTOM^cli-study")
    );

    let empty = tmp.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    assert!(!echotriage(&["ingest", p(&empty), "--out", p(&plain)]).status.success());
}

#[test]
fn classify_backends() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = phantom(tmp.path());
    let hint: Value = serde_json::from_str(stdout_ok(&["classify", p(&raw), "--backend", "hint"]).trim()).unwrap();
    assert_eq!(hint["view"], "A4C");
    assert_eq!(hint["confidence"], 1.0);
    assert_eq!(hint["backend"], "hint");
    let constant: Value =
        serde_json::from_str(stdout_ok(&["classify", p(&raw), "--backend", "constant:PLAX"]).trim()).unwrap();
    assert_eq!(constant["view"], "PLAX");
    assert!(!echotriage(&["classify", p(&raw), "--backend", "neural"])
        .status
        .success());
    assert!(
        !echotriage(&["classify", p(&raw), "--backend", "external:/no/such/program"])
            .status
            .success()
    );
}

#[test]
fn run_stores_reports_and_applies_store_thresholds() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = phantom(tmp.path());
    let store_dir = tmp.path().join("store");
    let config = tmp.path().join("config.toml");
    std::fs::write(&config, format!("store_path = {:?}\nworkers = 2\n", p(&store_dir))).unwrap();

    let out = stdout_ok(&["run", p(&raw), "--config", p(&config)]);
    let cols: Vec<&str> = out.trim().split('\t').collect();
    assert_eq!(cols[0], "cli-study");
    // analytic LVEF of this phantom is 55.1
    assert_eq!(cols[1], "GREY");
    assert!((cols[2].parse::<f64>().unwrap() - 55.1).abs() < 3.0);

    let store = Store::open_existing(&store_dir).unwrap();
    store
        .set_thresholds(&echotriage_core::triage::ThresholdConfig::new(30.0, 50.0).unwrap())
        .unwrap();
    let out = stdout_ok(&["run", p(&raw), "--config", p(&config)]);
    assert!(out.contains("\tNORMAL\t"), "{out}");
    assert_eq!(store.report_versions("cli-study").unwrap().len(), 2);
    assert!(stdout_ok(&["verify", "--store", p(&store_dir)]).starts_with(&format!("{}", store.verify().unwrap())));

    std::fs::write(&config, "n_disks = 0\nbogus = 1\n").unwrap();
    assert!(!echotriage(&["run", p(&raw), "--config", p(&config)]).status.success());
}
