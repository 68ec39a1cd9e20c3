use std::path::{Path, PathBuf};
use std::process::Command;

use rppg_core::model::{build_model, Arch, ModelSpec, WeightSet};
use rppg_core::vtf;
use rppg_dsp::SignalTrace;

fn rppg(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rppg"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn tiny_spec(multi: bool) -> ModelSpec {
    ModelSpec {
        input_size: 8,
        filters: [2, 2, 2, 2],
        hidden: 4,
        ..ModelSpec::new(Arch::Tscan).multi_task(multi)
    }
}

/// 30 s, 30 fps, 8×8 clip rendered through the CLI.
fn small_clip(dir: &Path) -> PathBuf {
    let cfg = write(
        dir,
        "clip.json",
        r#"{"fps": 30, "duration_s": 30, "height": 8, "width": 8}"#,
    );
    let out = dir.join("clips");
    let o = rppg(&["synth", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn synth_writes_frames_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_clip(dir.path());
    let recs = vtf::load(out.join("clip_000.vtf")).unwrap();
    let frames = recs.iter().find(|(n, _)| n == "frames").unwrap();
    assert_eq!(frames.1.dims(), &[900, 8, 8, 3]);
    assert!(out.join("clip_000_bvp.csv").exists() && out.join("clip_000.json").exists());

    let first = std::fs::read(out.join("manifest.json")).unwrap();
    let cfg = dir.path().join("clip.json");
    assert!(rppg(&["synth", "--config", s(&cfg), "--out", s(&out)])
        .status
        .success());
    assert_eq!(first, std::fs::read(out.join("manifest.json")).unwrap());
}

#[test]
fn synth_config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"duration_s": 30}"#);
    let o = rppg(&[
        "synth",
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fps"));

    let cfg = write(
        dir.path(),
        "small.json",
        r#"{"fps": 30, "duration_s": 1, "width": 4}"#,
    );
    let o = rppg(&[
        "synth",
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn infer_zero_weights_gives_zero_outputs_per_head() {
    let dir = tempfile::tempdir().unwrap();
    let clips = small_clip(dir.path());
    let spec = tiny_spec(true);
    let model = write(
        dir.path(),
        "model.json",
        &serde_json::to_string(&spec).unwrap(),
    );
    let weights = dir.path().join("zero.vtf");
    WeightSet::<f32>::zeros_like_spec(&spec)
        .save(&weights)
        .unwrap();
    let out = dir.path().join("pred");
    let o = rppg(&[
        "infer",
        "--model",
        s(&model),
        "--weights",
        s(&weights),
        "--clip",
        s(&clips.join("clip_000.vtf")),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for head in ["bvp.csv", "resp.csv"] {
        let t = SignalTrace::read_csv(out.join(head)).unwrap();
        assert_eq!(t.len(), 890);
        assert!(t.samples.iter().all(|&v| v == 0.0));
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("infer.json")).unwrap()).unwrap();
    assert_eq!(summary["windows"], 89);
    assert_eq!(summary["dropped_frames"], 9);
    assert_eq!(summary["schema_version"], 1);
}

#[test]
fn single_task_infer_writes_one_trace() {
    let dir = tempfile::tempdir().unwrap();
    let clips = small_clip(dir.path());
    let spec = tiny_spec(false);
    let model = write(
        dir.path(),
        "model.json",
        &serde_json::to_string(&spec).unwrap(),
    );
    let weights = dir.path().join("w.vtf");
    build_model(&spec, 3).unwrap().save(&weights).unwrap();
    let out = dir.path().join("pred");
    let o = rppg(&[
        "infer",
        "--model",
        s(&model),
        "--weights",
        s(&weights),
        "--clip",
        s(&clips.join("clip_000.vtf")),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    assert!(out.join("bvp.csv").exists() && !out.join("resp.csv").exists());
}

#[test]
fn eval_of_truth_against_itself_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let clips = small_clip(dir.path());
    let truth = clips.join("clip_000_bvp.csv");
    let out = dir.path().join("eval");
    let o = rppg(&[
        "eval",
        "--pred",
        s(&truth),
        "--truth",
        s(&truth),
        "--kind",
        "pulse",
        "--svg",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m["mae"], 0.0);
    assert_eq!(m["schema_version"], 1);
    for key in ["mae", "rmse", "pearson_rho", "mean_snr_db"] {
        assert!(m.get(key).is_some(), "{key}");
    }
    let ba = std::fs::read_to_string(out.join("bland_altman.csv")).unwrap();
    assert!(ba.starts_with("mean_rate,diff_rate"));
    assert!(ba.lines().skip(1).all(|l| l.ends_with(",0")));
    assert!(out.join("bland_altman.svg").exists());

    let short = write(
        dir.path(),
        "short.csv",
        "t_s,value\n0,1\n0.0333333333,2\n0.0666666667,3\n",
    );
    let o = rppg(&[
        "eval",
        "--pred",
        s(&short),
        "--truth",
        s(&short),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "clips.json",
        r#"[{"fps": 30, "duration_s": 1.5, "height": 8, "width": 8, "seed": 1},
            {"fps": 30, "duration_s": 1.5, "height": 8, "width": 8, "hr_bpm": 90, "seed": 2}]"#,
    );
    let data = dir.path().join("data");
    let o = rppg(&[
        "synth",
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("clips")),
        "--dataset",
        s(&data),
        "--input-size",
        "8",
        "--holdout",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let spec = tiny_spec(true);
    let model = write(
        dir.path(),
        "model.json",
        &serde_json::to_string(&spec).unwrap(),
    );

    let run = |epochs: &str, out: &str| {
        let out = dir.path().join(out);
        let o = rppg(&[
            "train",
            "--model",
            s(&model),
            "--data",
            s(&data),
            "--epochs",
            epochs,
            "--seed",
            "5",
            "--out",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let zero = run("0", "t0");
    let w = WeightSet::load(zero.join("weights.vtf"), &spec).unwrap();
    assert!(w.bitwise_eq(&build_model(&spec, 5).unwrap()));

    let (a, b) = (run("2", "t1"), run("2", "t2"));
    assert_eq!(
        std::fs::read(a.join("weights.vtf")).unwrap(),
        std::fs::read(b.join("weights.vtf")).unwrap()
    );
    let loss = std::fs::read_to_string(a.join("loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 3);
}

#[test]
fn baseline_estimates_heart_rate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "clip.json",
        r#"{"fps": 30, "duration_s": 20, "height": 24, "width": 24}"#,
    );
    let clips = dir.path().join("clips");
    assert!(rppg(&["synth", "--config", s(&cfg), "--out", s(&clips)])
        .status
        .success());
    for m in ["pos", "chrom", "ica"] {
        let out = dir.path().join(m);
        let o = rppg(&[
            "baseline",
            m,
            "--clip",
            s(&clips.join("clip_000.vtf")),
            "--out",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let b: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("baseline.json")).unwrap())
                .unwrap();
        let hr = b["hr_bpm"].as_f64().unwrap();
        assert!((hr - 72.0).abs() <= 2.0, "{m}: {hr}");
    }
}

#[test]
fn bench_rejects_short_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = rppg(&["bench", "--iters", "10", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let o = rppg(&["bench", "--models", "tscan,vgg", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}
