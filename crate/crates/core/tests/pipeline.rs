use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use echotriage_core::geometry::VolumeMethod;
use echotriage_core::phantom::{write_phantom_study, PhantomSpec, PhantomStudySpec};
use echotriage_core::pipeline::{
    discover_studies, run_batch, run_study, PipelineConfig, PipelineError, ReviewerOverride, Store,
    FLAG_NO_USABLE_CLIPS, FLAG_UNCALIBRATED,
};
use echotriage_core::triage::{Category, ThresholdConfig};
use echotriage_core::view::View;

/// Coarse, quick phantom: 1 mm pixels, six 20-frame beats.
fn spec(lvef: f64, view: View, seed: u64) -> PhantomSpec {
    PhantomSpec {
        view,
        noise_seed: seed,
        ..PhantomSpec::for_lvef(lvef, 40.0, 20.0, 1.0)
    }
}

fn write_study(root: &Path, id: &str, clips: Vec<PhantomSpec>) -> PathBuf {
    let dir = root.join(id);
    write_phantom_study(
        &PhantomStudySpec {
            study_id: id.to_string(),
            clips,
        },
        &dir,
    )
    .unwrap();
    dir
}

/// truth.csv read back without the library's types.
fn truth(dir: &Path) -> HashMap<String, f64> {
    fs::read_to_string(dir.join("truth.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn a4c_phantom_is_single_plane_within_three_points() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = write_study(tmp.path(), "p55", vec![spec(55.0, View::A4c, 1)]);
    let report = run_study(&dir, &PipelineConfig::default()).unwrap();
    let lvef = report.lvef.as_ref().unwrap();
    assert_eq!(lvef.method, VolumeMethod::SinglePlaneA4c);
    assert_eq!(lvef.cycles_used, 5);
    let expect = truth(&dir)["p55-a4c"];
    assert!((lvef.mean_lvef - expect).abs() <= 3.0, "{} vs {expect}", lvef.mean_lvef);
    assert_eq!(report.triage.category, Category::Grey);
    assert_eq!(report.selected.a4c.as_deref(), Some("p55-a4c"));
    assert!(report.failure.is_none());
}

#[test]
fn a4c_and_a2c_pair_is_biplane() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = write_study(
        tmp.path(),
        "bi",
        vec![spec(65.0, View::A4c, 1), spec(65.0, View::A2c, 2)],
    );
    let report = run_study(&dir, &PipelineConfig::default()).unwrap();
    let lvef = report.lvef.unwrap();
    assert_eq!(lvef.method, VolumeMethod::Biplane);
    assert!((lvef.mean_lvef - 65.0).abs() <= 3.0);
    assert_eq!(report.cycles[0].a2c_ed_frame, Some(0));
    assert_eq!(report.triage.category, Category::Normal);
}

#[test]
fn empty_directory_has_no_usable_clips() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(matches!(
        run_study(tmp.path(), &PipelineConfig::default()),
        Err(PipelineError::NoUsableClips { .. })
    ));
}

#[test]
fn sidecar_backend_matches_threshold_backend() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = write_study(tmp.path(), "sc", vec![spec(35.0, View::A4c, 4)]);
    let threshold = run_study(&dir, &PipelineConfig::default()).unwrap();
    let cfg = PipelineConfig::from_toml("[backends]\nclassifier = \"hint\"\nsegmenter = \"sidecar\"\n").unwrap();
    let sidecar = run_study(&dir, &cfg).unwrap();
    assert_eq!(threshold.cycles, sidecar.cycles);
    assert_ne!(threshold.config_fingerprint, sidecar.config_fingerprint);
}

#[test]
fn stage_failures_are_undetermined_and_batch_keeps_going() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write_study(tmp.path(), "a-good", vec![spec(15.0, View::A4c, 1)]);
    let other = write_study(tmp.path(), "b-plax", vec![spec(15.0, View::Plax, 1)]);
    let empty = tmp.path().join("c-empty");
    fs::create_dir(&empty).unwrap();
    let junk = tmp.path().join("d-junk");
    fs::create_dir(&junk).unwrap();
    fs::write(junk.join("x.dcm"), b"not dicom").unwrap();

    let dirs = discover_studies(tmp.path()).unwrap();
    assert_eq!(dirs, vec![good, other, empty, junk]);
    let store = Store::open(tmp.path().join("store")).unwrap();
    let reports = run_batch(&dirs, &PipelineConfig::default(), Some(&store)).unwrap();
    assert_eq!(reports.len(), 4);
    assert_eq!(reports[0].triage.category, Category::Abnormal);
    for r in &reports[1..] {
        assert_eq!(r.triage.category, Category::Undetermined);
        assert!(r.failure.is_some());
    }
    assert!(reports[2].quality_flags.contains(FLAG_NO_USABLE_CLIPS));
    assert_eq!(reports[3].quality_flags.len(), 1);
    assert_eq!(store.list_studies().unwrap().len(), 4);
    assert_eq!(store.masks("a-good").unwrap().len(), 1);
}

#[test]
fn uncalibrated_clip_is_flagged() {
    use echotriage_core::dicom::{parse_dicom, write_dicom, ClipMeta, DataSet, EchoClip};
    let tmp = tempfile::tempdir().unwrap();
    let dir = write_study(tmp.path(), "unc", vec![spec(55.0, View::A4c, 1)]);
    let path = dir.join("unc-a4c.dcm");
    let clip = parse_dicom(&fs::read(&path).unwrap()).unwrap();
    let meta = ClipMeta {
        pixel_spacing: None,
        ..clip.meta().clone()
    };
    let bare = EchoClip::new(meta, clip.rows(), clip.cols(), clip.pixels().to_vec()).unwrap();
    fs::write(&path, write_dicom(&bare, &DataSet::new()).unwrap()).unwrap();
    let report = run_study(&dir, &PipelineConfig::default()).unwrap();
    assert_eq!(report.triage.category, Category::Undetermined);
    assert!(report.quality_flags.contains(FLAG_UNCALIBRATED));
    assert_eq!(report.clips[0].view, View::A4c);
}

#[test]
fn reports_are_deterministic_across_runs_and_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let dirs: Vec<_> = [15.0, 45.0, 75.0]
        .iter()
        .enumerate()
        .map(|(i, &l)| write_study(tmp.path(), &format!("d{i}"), vec![spec(l, View::A4c, i as u64)]))
        .collect();
    let one = PipelineConfig {
        workers: 1,
        ..Default::default()
    };
    let many = PipelineConfig {
        workers: 3,
        ..Default::default()
    };
    let a = run_batch(&dirs, &one, None).unwrap();
    let b = run_batch(&dirs, &many, None).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.to_canonical_json(), y.to_canonical_json());
    }
}

#[test]
fn store_versions_overrides_and_thresholds() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = write_study(tmp.path(), "v", vec![spec(55.0, View::A4c, 1)]);
    let store = Store::open(tmp.path().join("store")).unwrap();
    let cfg_a = PipelineConfig::default();
    let cfg_b = PipelineConfig {
        n_disks: 30,
        ..Default::default()
    };
    let ra = run_batch(std::slice::from_ref(&dir), &cfg_a, Some(&store))
        .unwrap()
        .remove(0);
    let rb = run_batch(std::slice::from_ref(&dir), &cfg_b, Some(&store))
        .unwrap()
        .remove(0);
    assert_eq!(store.report_versions("v").unwrap().len(), 2);
    assert_eq!(store.load_report("v", Some(&cfg_a.fingerprint())).unwrap().unwrap(), ra);
    assert_eq!(store.load_report("v", None).unwrap().unwrap(), rb);

    let ov = ReviewerOverride {
        category: Category::Abnormal,
        reviewer_id: "dr-a".into(),
        timestamp: "2024-01-01T00:00:00Z".into(),
        note: None,
    };
    let reviewed = store.add_override("v", ov.clone()).unwrap();
    assert_eq!(reviewed.triage.category, Category::Grey);
    assert_eq!(reviewed.reviewer_override, Some(ov.clone()));
    assert_eq!(reviewed.effective_category(), Category::Abnormal);
    assert_eq!(store.load_report("v", None).unwrap().unwrap(), rb);
    let summary = &store.list_studies().unwrap()[0];
    assert_eq!(
        (summary.category, summary.machine_category),
        (Category::Abnormal, Category::Grey)
    );

    let bad = ReviewerOverride {
        category: Category::Undetermined,
        ..ov.clone()
    };
    assert!(matches!(
        store.add_override("v", bad),
        Err(PipelineError::InvalidOverride(_))
    ));
    assert!(matches!(
        store.add_override("nope", ov),
        Err(PipelineError::UnknownStudy(_))
    ));

    // thresholds apply to later runs only
    let before = fs::read_dir(store.root().join("records")).unwrap().count();
    store
        .set_thresholds(&ThresholdConfig::new(30.0, 50.0).unwrap())
        .unwrap();
    assert_eq!(store.load_report("v", None).unwrap().unwrap(), rb);
    assert_eq!(fs::read_dir(store.root().join("records")).unwrap().count(), before + 1);
    let cfg_c = PipelineConfig {
        thresholds: store.thresholds().unwrap().unwrap(),
        ..Default::default()
    };
    let rc = run_batch(&[dir], &cfg_c, Some(&store)).unwrap().remove(0);
    assert_eq!(rc.triage.category, Category::Normal);
    assert_eq!(store.verify().unwrap(), before + 1 + 2);
}

#[test]
fn corrupt_record_is_detected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = write_study(tmp.path(), "c", vec![spec(55.0, View::A4c, 1)]);
    let store = Store::open(tmp.path().join("store")).unwrap();
    run_batch(&[dir], &PipelineConfig::default(), Some(&store)).unwrap();
    let record = fs::read_dir(store.root().join("records"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.to_string_lossy().ends_with(".report.rec"))
        .unwrap();
    let mut bytes = fs::read(&record).unwrap();
    let n = bytes.len();
    bytes[n - 5] ^= 1;
    fs::write(&record, bytes).unwrap();
    assert!(matches!(store.verify(), Err(PipelineError::StoreCorrupt { .. })));
    assert!(matches!(
        store.load_report("c", None),
        Err(PipelineError::StoreCorrupt { .. })
    ));
}

#[test]
fn concurrent_writers_lose_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = write_study(tmp.path(), "base", vec![spec(55.0, View::A4c, 1)]);
    let base = run_study(&dir, &PipelineConfig::default()).unwrap();
    // two handles on one directory stand in for two processes
    let stores = [
        Store::open(tmp.path().join("store")).unwrap(),
        Store::open(tmp.path().join("store")).unwrap(),
    ];
    std::thread::scope(|s| {
        for t in 0..10 {
            let store = &stores[t % 2];
            let base = &base;
            s.spawn(move || {
                for i in 0..10 {
                    let mut r = base.clone();
                    r.study_id = format!("study-{:03}", t * 10 + i);
                    store.store_report(&r).unwrap();
                }
            });
        }
    });
    assert_eq!(stores[0].verify().unwrap(), 100);
    let listed = stores[1].list_studies().unwrap();
    assert_eq!(listed.len(), 100);
    for s in &listed {
        let r = stores[0].load_report(&s.study_id, None).unwrap().unwrap();
        assert_eq!(r.cycles, base.cycles);
    }
    assert_eq!(
        fs::read_dir(stores[0].root().join("tmp")).unwrap().count(),
        0,
        "temporary files left behind"
    );
}

#[cfg(unix)]
#[test]
fn external_backends_speak_dicom_on_stdin() {
    use std::os::unix::fs::PermissionsExt;
    let tmp = tempfile::tempdir().unwrap();
    let dir = write_study(tmp.path(), "ext", vec![spec(45.0, View::A4c, 1)]);
    let sidecar = dir.join("ext-a4c.LV.masks.rle");
    let script = |name: &str, body: String| {
        let p = tmp.path().join(name);
        fs::write(&p, body).unwrap();
        fs::set_permissions(&p, fs::Permissions::from_mode(0o755)).unwrap();
        p
    };
    // the classifier checks the DICOM magic before answering
    let classifier = script(
        "classify.sh",
        "#!/bin/sh\nhead -c 132 | tail -c 4 | grep -q DICM || exit 3\necho '{\"view\": \"A4C\", \"confidence\": 0.9}'\n"
            .to_string(),
    );
    let segmenter = script(
        "segment.sh",
        format!(
            "#!/bin/sh\ncat > /dev/null\n[ \"$1\" = A4C ] && [ \"$2\" = LV ] || exit 4\ncat '{}'\n",
            sidecar.display()
        ),
    );
    let cfg = PipelineConfig::from_toml(&format!(
        "[backends]\nclassifier = \"external:{}\"\nsegmenter = \"external:{}\"\n",
        classifier.display(),
        segmenter.display()
    ))
    .unwrap();
    let ext = run_batch(std::slice::from_ref(&dir), &cfg, None).unwrap().remove(0);
    let reference = run_study(&dir, &PipelineConfig::default()).unwrap();
    assert_eq!(ext.clips[0].confidence, 0.9);
    assert_eq!(ext.cycles, reference.cycles);

    let failing = script("fail.sh", "#!/bin/sh\nexit 1\n".to_string());
    let cfg = PipelineConfig::from_toml(&format!(
        "[backends]\nclassifier = \"hint\"\nsegmenter = \"external:{}\"\n",
        failing.display()
    ))
    .unwrap();
    let r = run_study(&dir, &cfg).unwrap();
    assert_eq!(r.triage.category, Category::Undetermined);
    assert!(r.quality_flags.contains("segmentation-failed"));
}
