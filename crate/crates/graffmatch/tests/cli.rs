use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use graffmatch::io::write_scan;
use graffmatch::sim::{campaign_pair, NoiseConfig, PairConfig, SceneConfig, Tier};
use graffmatch_core::{alignment_error, GraffElement, Landmark, RigidTransform, Scan};
use nalgebra::{Matrix3, Rotation3, Vector3};
use serde_json::Value;
use tempfile::TempDir;

fn graffmatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graffmatch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn clean_pair(seed: u64) -> graffmatch::sim::LoopPair {
    let base = PairConfig {
        clutter: 0,
        noise: NoiseConfig {
            angle_deg: 0.0,
            offset_m: 0.0,
        },
        ..PairConfig::default()
    };
    let tier = Tier {
        name: "full".into(),
        baseline: 8.0,
        overlap: 1.0,
    };
    campaign_pair(&SceneConfig::default(), &base, &tier, seed)
}

fn transform_of(doc: &Value) -> RigidTransform {
    let f = |key: &str| -> Vec<f64> {
        doc[key].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect()
    };
    let r = Matrix3::from_row_slice(&f("rotation"));
    RigidTransform::from_matrix(r, Vector3::from_column_slice(&f("translation"))).unwrap()
}

const MALFORMED: [&str; 20] = [
    "",
    "hello",
    r#"{"schema_version": 1, "id": "a", "objects": ["#,
    r#"{"id": "a", "objects": []}"#,
    r#"{"schema_version": 2, "id": "a", "objects": []}"#,
    r#"{"schema_version": 1, "objects": []}"#,
    r#"{"schema_version": 1, "id": "a", "objects": {}}"#,
    r#"{"schema_version": 1, "id": "a", "objects": [], "extra": 1}"#,
    r#"{"schema_version": 1, "id": "a", "objects": [{"kind": "point"}]}"#,
    r#"{"schema_version": 1, "id": "a", "objects": [{"kind": "line"}]}"#,
    r#"{"schema_version": 1, "id": "a", "objects": [{"kind": "line", "line": {"direction": [0,0,1], "point": [0,0,0]}, "plane": {"normal": [0,0,1], "d": 0}}]}"#,
    r#"{"schema_version": 1, "id": "a", "objects": [{"kind": "line", "line": {"direction": [0,0,0], "point": [0,0,0]}}]}"#,
    r#"{"schema_version": 1, "id": "a", "objects": [{"kind": "line", "line": {"direction": [0,1], "point": [0,0,0]}}]}"#,
    r#"{"schema_version": 1, "id": "a", "objects": [{"kind": "line", "line": {"direction": [0,0,1], "point": [1e400,0,0]}}]}"#,
    r#"{"schema_version": 1, "id": "a", "objects": [{"kind": "line", "line": {"direction": [0,0,1], "point": "origin"}}]}"#,
    r#"{"schema_version": 1, "id": "a", "objects": [{"kind": "plane", "plane": {"normal": [0,0,1]}}]}"#,
    r#"{"schema_version": 1, "id": "a", "objects": [{"kind": "plane", "plane": {"normal": [0,0,0], "d": 1}}]}"#,
    r#"{"schema_version": 1, "id": "a", "objects": [{"kind": "plane", "plane": {"normal": [0,0,1], "d": 1}, "centroid": [1,2]}]}"#,
    r#"{"schema_version": 1, "id": "a", "objects": [{"kind": "plane", "plane": {"normal": [0,0,1], "d": 1}, "colour": "red"}]}"#,
    r#"{"schema_version": 1, "id": "a", "objects": [{"plane": {"normal": [0,0,1], "d": 1}}]}"#,
];

#[test]
fn malformed_scans_exit_with_input_error() {
    let dir = TempDir::new().unwrap();
    let good = dir.path().join("good.json");
    write_scan(&clean_pair(1).scan_a, &good).unwrap();
    for (k, text) in MALFORMED.iter().enumerate() {
        let bad = dir.path().join(format!("bad{k}.json"));
        fs::write(&bad, text).unwrap();
        for args in [
            vec!["match", p(&bad), p(&good)],
            vec!["match", p(&good), p(&bad)],
            vec!["distance", p(&bad), "0", "0"],
        ] {
            let out = graffmatch(&args);
            assert_eq!(out.status.code(), Some(1), "case {k}: {text}");
            let err = String::from_utf8(out.stderr).unwrap();
            assert!(err.contains("bad") && err.trim().len() > 20, "case {k}: {err}");
        }
    }
    let missing = graffmatch(&["match", "/nonexistent/a.json", p(&good)]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn match_recovers_a_transformed_copy() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let scan = clean_pair(2).scan_a;
    let truth = RigidTransform::new(Rotation3::from_euler_angles(0.03, -0.02, 1.2), Vector3::new(6.0, -3.0, 0.4));
    write_scan(&scan, &a).unwrap();
    write_scan(&scan.transformed(&truth), &b).unwrap();
    let out = graffmatch(&["match", p(&a), p(&b)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["status"], "verified");
    assert_eq!(doc["correspondences"].as_array().unwrap().len(), scan.len());
    let e = alignment_error(&transform_of(&doc), &truth);
    assert!(e.rotation_deg.to_radians() < 1e-8 && e.translation_m < 1e-8, "{e:?}");
    let q: Vec<f64> = doc["quaternion_wxyz"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(q[0] >= 0.0);
    assert!((q.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-10);
}

#[test]
fn match_output_reproduces_inliers_within_residuals() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("r.json");
    let sim = graffmatch(&["simulate", "--seed", "5", "--tier", "medium", "--out", p(dir.path())]);
    assert_eq!(sim.status.code(), Some(0));
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let out = graffmatch(&["match", p(&a), p(&b), "--output", p(&out_path)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    let t = transform_of(&doc);
    let sa = graffmatch::io::read_scan(&a).unwrap().scan;
    let sb = graffmatch::io::read_scan(&b).unwrap().scan;
    let pairs = doc["correspondences"].as_array().unwrap();
    let residuals = doc["residuals"].as_array().unwrap();
    assert_eq!(pairs.len(), residuals.len());
    for (pair, res) in pairs.iter().zip(residuals) {
        let i = pair[0].as_u64().unwrap() as usize;
        let j = pair[1].as_u64().unwrap() as usize;
        let r = graffmatch_core::residual(&sa.landmarks()[i].element, &sb.landmarks()[j].element, &t).unwrap();
        // Recomputed from the 12-decimal document.
        assert!((r.offset_m - res[0].as_f64().unwrap()).abs() < 1e-6);
        assert!((r.angle_deg - res[1].as_f64().unwrap()).abs() < 1e-5);
        assert!(r.offset_m < 1.0 && r.angle_deg < 5.0);
    }
    // The estimate agrees with the simulator's ground truth.
    let truth: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("truth.json")).unwrap()).unwrap();
    assert!(alignment_error(&t, &transform_of(&truth)).verify(&Default::default()));
}

#[test]
fn too_few_consistent_matches_fail_verification() {
    let dir = TempDir::new().unwrap();
    let mut scan = Scan::new("two");
    scan.push(Landmark::new(GraffElement::line(Vector3::z(), Vector3::new(1.0, 0.0, 0.0)).unwrap()));
    scan.push(Landmark::new(GraffElement::plane(Vector3::x(), 4.0).unwrap()));
    let a = dir.path().join("a.json");
    write_scan(&scan, &a).unwrap();
    let out = graffmatch(&["match", p(&a), p(&a)]);
    assert_eq!(out.status.code(), Some(2));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["status"], "failed");
    assert!(doc["reason"].as_str().unwrap().contains("match"));
    assert!(doc.get("rotation").is_none());
}

#[test]
fn bad_parameters_are_input_errors() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    write_scan(&clean_pair(3).scan_a, &a).unwrap();
    for flags in [["--rho", "0"], ["--sigma=-1", "--epsilon=0.2"], ["--distance-fn", "nope"], ["--bogus", "1"]] {
        let out = graffmatch(&["match", p(&a), p(&a), flags[0], flags[1]]);
        assert_eq!(out.status.code(), Some(1), "{flags:?}");
    }
    // Centroid distances need centroids, which plain files may omit.
    let mut bare = Scan::new("bare");
    for k in 0..4 {
        bare.push(Landmark::new(GraffElement::plane(Vector3::x(), k as f64).unwrap()));
    }
    let b = dir.path().join("bare.json");
    write_scan(&bare, &b).unwrap();
    let out = graffmatch(&["match", p(&b), p(&b), "--distance-fn", "euclidean_centroid"]);
    assert_eq!(out.status.code(), Some(1));
}

fn write_objects(path: &Path, objects: &str) {
    fs::write(path, format!(r#"{{"schema_version": 1, "id": "s", "objects": [{objects}]}}"#)).unwrap();
}

#[test]
fn distance_examples() {
    let dir = TempDir::new().unwrap();
    let s = dir.path().join("s.json");
    write_objects(
        &s,
        r#"{"kind": "line", "line": {"direction": [0,0,1], "point": [0,0,0]}},
           {"kind": "line", "line": {"direction": [0,0,1], "point": [1,0,0]}},
           {"kind": "plane", "plane": {"normal": [1,0,0], "d": 3}}"#,
    );
    let run = |args: &[&str]| {
        let out = graffmatch(args);
        assert_eq!(out.status.code(), Some(0));
        String::from_utf8(out.stdout).unwrap()
    };
    let text = run(&["distance", p(&s), "0", "1", "--rho", "1"]);
    assert_eq!(text.lines().next().unwrap(), "distance 0.785398163397");
    let same = run(&["distance", p(&s), "2", "2"]);
    assert_eq!(same.lines().next().unwrap(), "distance 0.000000000000");
    let mixed = run(&["distance", p(&s), "0", "2"]);
    let angles: Vec<f64> = mixed.lines().nth(1).unwrap().split(' ').skip(1).map(|x| x.parse().unwrap()).collect();
    assert_eq!(angles.len(), 2);
    assert!(angles.iter().all(|a| a.is_finite()));
    let out = graffmatch(&["distance", p(&s), "0", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("out of range"));
}

const SMALL_CAMPAIGN: &str = r#"
seed = 3
trials_per_tier = 4
distance_fns = ["graff_shifted", "gr_only", "gr_times_euclidean"]
"#;

#[test]
fn bench_output_does_not_depend_on_worker_count() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, SMALL_CAMPAIGN).unwrap();
    let mut outputs = Vec::new();
    for workers in ["1", "8"] {
        let out = dir.path().join(format!("w{workers}"));
        let run = graffmatch(&["bench", p(&cfg), "--out", p(&out), "--workers", workers]);
        assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
        outputs.push([fs::read(out.join("results.csv")).unwrap(), fs::read(out.join("summary.json")).unwrap()]);
        assert!(!out.join("timing.json").exists());
    }
    assert_eq!(outputs[0], outputs[1]);
    let csv = String::from_utf8(outputs[0][0].clone()).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 4 * 3);
    assert!(csv.ends_with('\n'));
    let summary: Value = serde_json::from_slice(&outputs[0][1]).unwrap();
    assert_eq!(summary["rows"].as_array().unwrap().len(), 4 * 3);
}

#[test]
fn bench_timing_and_errors() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "trials_per_tier = 1\n").unwrap();
    let out = dir.path().join("t");
    let run = graffmatch(&["bench", p(&cfg), "--out", p(&out), "--timing"]);
    assert_eq!(run.status.code(), Some(0));
    let timing: Value = serde_json::from_slice(&fs::read(out.join("timing.json")).unwrap()).unwrap();
    assert_eq!(timing.as_array().unwrap().len(), 4);
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| !l.ends_with(',')));

    // A regular file where the output directory should go.
    let blocked = dir.path().join("file");
    fs::write(&blocked, "").unwrap();
    let run = graffmatch(&["bench", p(&cfg), "--out", p(&blocked.join("sub"))]);
    assert_eq!(run.status.code(), Some(1));
    fs::write(&cfg, "trials_per_tier = \"many\"\n").unwrap();
    let run = graffmatch(&["bench", p(&cfg), "--out", p(&out)]);
    assert_eq!(run.status.code(), Some(1));
    assert!(!run.stderr.is_empty());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let mut docs = Vec::new();
    for k in 0..2 {
        let d = dir.path().join(format!("r{k}"));
        assert_eq!(graffmatch(&["simulate", "--seed", "9", "--tier", "hard", "--out", p(&d)]).status.code(), Some(0));
        let m = graffmatch(&["match", p(&d.join("a.json")), p(&d.join("b.json"))]);
        let dist = graffmatch(&["distance", p(&d.join("a.json")), "1", "4"]);
        docs.push([
            fs::read(d.join("a.json")).unwrap(),
            fs::read(d.join("b.json")).unwrap(),
            fs::read(d.join("truth.json")).unwrap(),
            m.stdout,
            dist.stdout,
        ]);
    }
    assert_eq!(docs[0], docs[1]);
}
