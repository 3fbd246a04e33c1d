use std::path::Path;
use std::process::{Command, Output};

fn delmap(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_delmap"))
        .args(args)
        .current_dir(cwd)
        .env_remove("DELMAP_LOG")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn scene(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--out", "scene", "--seed", "3"];
    args.extend_from_slice(extra);
    let o = delmap(&args, dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn synth_then_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    scene(d, &[]);
    let o = delmap(
        &["run", "--config", "scene/config.toml", "--out", "out", "--threads", "2"],
        d,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = json(&d.join("out/report.json"));
    assert!(report["cam"]["precision"].as_f64().unwrap() > 0.9);
    let manifest = json(&d.join("out/manifest.json"));
    assert_eq!(manifest["counts"]["retained"], 12);
    let cam = json(&d.join("out/estimate_cam.geojson"));
    assert_eq!(cam["type"], "FeatureCollection");
    assert!(!cam["features"].as_array().unwrap().is_empty());
}

#[test]
fn strict_reports_hard_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    scene(d, &[]);
    std::fs::remove_file(d.join("scene/features/img_004.delt")).unwrap();
    let lenient = delmap(&["run", "--config", "scene/config.toml", "--out", "a"], d);
    assert_eq!(code(&lenient), 0, "{}", stderr(&lenient));
    let strict = delmap(&["run", "--config", "scene/config.toml", "--out", "b", "--strict"], d);
    assert_eq!(code(&strict), 2, "{}", stderr(&strict));
    let manifest = json(&d.join("b/manifest.json"));
    assert_eq!(manifest["counts"]["hard_failures"], 1);
    let img = manifest["images"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["image_id"] == "img_004")
        .unwrap();
    assert!(img["cam_error"].as_str().unwrap().contains("img_004.delt"));
}

#[test]
fn horizon_is_not_a_hard_failure() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    scene(d, &["--horizon-camera"]);
    let o = delmap(&["run", "--config", "scene/config.toml", "--out", "out", "--strict"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest = json(&d.join("out/manifest.json"));
    let horizon = manifest["images"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["disposition"] == "horizon")
        .count();
    assert_eq!(horizon, 1);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    scene(d, &[]);
    let missing = delmap(&["run", "--config", "nope.toml", "--out", "o"], d);
    assert_eq!(code(&missing), 1);
    assert!(stderr(&missing).contains("nope.toml"));

    std::fs::write(d.join("bad.toml"), "seed = \"x\"\n").unwrap();
    assert_eq!(code(&delmap(&["run", "--config", "bad.toml", "--out", "o"], d)), 1);

    let negative = delmap(
        &[
            "run",
            "--config",
            "scene/config.toml",
            "--out",
            "o",
            "--max-area-km2",
            "-1",
        ],
        d,
    );
    assert_eq!(code(&negative), 1);
    assert!(stderr(&negative).contains("positive"), "{}", stderr(&negative));

    assert_eq!(code(&delmap(&["run", "--out", "o"], d)), 1, "missing required input");
    assert_eq!(code(&delmap(&["frobnicate"], d)), 1);
    assert_eq!(code(&delmap(&["--help"], d)), 0);
}

#[test]
fn stages_run_standalone() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    scene(d, &[]);
    let steps: &[&[&str]] = &[
        &[
            "align",
            "--reconstruction",
            "scene/reconstruction.json",
            "--out",
            "aligned.json",
            "--report",
            "align.json",
        ],
        &[
            "georef",
            "--reconstruction",
            "aligned.json",
            "--out",
            "georef.json",
            "--strict",
        ],
        &[
            "cam",
            "--features",
            "scene/features/img_005.delt",
            "--weights",
            "scene/weights.delt",
            "--width",
            "640",
            "--height",
            "480",
            "--out",
            "cam.json",
            "--mask",
            "mask.pgm",
        ],
        &[
            "project",
            "--georef",
            "georef.json",
            "--polygons",
            "cam.json",
            "--image-id",
            "img_005",
            "--reconstruction",
            "aligned.json",
            "--out",
            "img_005.geojson",
        ],
        &[
            "filter",
            "--georef",
            "georef.json",
            "--reconstruction",
            "aligned.json",
            "--out",
            "footprints.geojson",
            "--verdicts",
            "verdicts.json",
            "--max-area-km2",
            "0.5",
        ],
        &[
            "evaluate",
            "--estimate",
            "img_005.geojson",
            "--truth",
            "scene/truth.geojson",
            "--boundary",
            "scene/boundary.geojson",
            "--method",
            "cam",
            "--reconstruction",
            "aligned.json",
            "--out",
            "eval.json",
        ],
    ];
    for args in steps {
        let o = delmap(args, d);
        assert_eq!(code(&o), 0, "{}: {}", args[0], stderr(&o));
    }
    let georef = json(&d.join("georef.json"));
    assert_eq!(georef.as_object().unwrap().len(), 12);
    assert!(georef["img_005"]["inlier_ratio"].as_f64().unwrap() > 0.5);
    assert!(std::fs::read_to_string(d.join("mask.pgm")).unwrap().starts_with("P2"));
    let verdicts = json(&d.join("verdicts.json"));
    let outcomes: Vec<&str> = verdicts
        .as_object()
        .unwrap()
        .values()
        .map(|v| v["outcome"].as_str().unwrap())
        .collect();
    assert!(
        outcomes.contains(&"retained") && outcomes.contains(&"filtered_area"),
        "{outcomes:?}"
    );
    let eval = json(&d.join("eval.json"));
    assert!(eval["precision"].as_f64().unwrap() > 0.9);
    assert_eq!(eval["image_count"], 1);
}

#[test]
fn single_image_georef_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::from("u,v,x,y\n");
    for i in 0..5 {
        for j in 0..5 {
            let (u, v) = (i as f64 * 100.0, j as f64 * 80.0);
            csv.push_str(&format!("{u},{v},{},{}\n", 2.0 * u + 10.0, 2.0 * v - 5.0));
        }
    }
    std::fs::write(d.join("c.csv"), csv).unwrap();
    let o = delmap(
        &[
            "georef",
            "--correspondences",
            "c.csv",
            "--image-id",
            "x",
            "--out",
            "g.json",
        ],
        d,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&d.join("g.json"))["x"]["inlier_count"], 25);

    std::fs::write(d.join("few.csv"), "u,v,x,y\n0,0,0,0\n1,0,1,0\n").unwrap();
    let lenient = delmap(
        &[
            "georef",
            "--correspondences",
            "few.csv",
            "--image-id",
            "x",
            "--out",
            "f.json",
        ],
        d,
    );
    assert_eq!(code(&lenient), 0);
    assert!(json(&d.join("f.json"))["x"]["error"].is_string());
    let strict = delmap(
        &[
            "georef",
            "--correspondences",
            "few.csv",
            "--image-id",
            "x",
            "--out",
            "f.json",
            "--strict",
        ],
        d,
    );
    assert_eq!(code(&strict), 2);
}

#[test]
fn labels_command() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("v.csv"), "image_id,votes,workers\na,2,3\nb,3,3\nc,0,3\n").unwrap();
    let o = delmap(&["labels", "--votes", "v.csv", "--scheme", "A"], d);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8_lossy(&o.stdout), "image_id,label\na,1\nb,1\nc,0\n");
    assert_eq!(code(&delmap(&["labels", "--votes", "v.csv", "--scheme", "Z"], d)), 1);
    std::fs::write(d.join("bad.csv"), "image_id,votes,workers\na,5,3\n").unwrap();
    assert_eq!(code(&delmap(&["labels", "--votes", "bad.csv", "--scheme", "A"], d)), 1);
}

#[test]
fn log_level_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    scene(d, &[]);
    let quiet = delmap(&["run", "--config", "scene/config.toml", "--out", "q"], d);
    assert!(!stderr(&quiet).contains("INFO"));
    let loud = Command::new(env!("CARGO_BIN_EXE_delmap"))
        .args(["run", "--config", "scene/config.toml", "--out", "l"])
        .current_dir(d)
        .env("DELMAP_LOG", "info")
        .output()
        .unwrap();
    assert_eq!(code(&loud), 0);
    assert!(stderr(&loud).contains("INFO"), "{}", stderr(&loud));
}
