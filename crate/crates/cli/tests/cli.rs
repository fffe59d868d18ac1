use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ndvq_core::codec::unpack_bitstream;
use ndvq_core::signal::{save_wav, AudioBuffer};

const SMALL: &[&str] = &[
    "codec.codebook_size=16",
    "codec.max_layers=3",
    "data.n_clips=4",
    "data.clip_length=256",
    "train.batch_size=2",
];

fn ndvq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ndvq")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn train_small(out: &Path, steps: usize, extra: &[&str]) -> Output {
    let mut args = vec!["train".to_string(), "--out".into(), out.display().to_string()];
    let steps = format!("train.steps={steps}");
    for s in SMALL.iter().chain(extra).chain([&steps.as_str()]) {
        args.push("--set".into());
        args.push(s.to_string());
    }
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    ndvq(&refs)
}

fn sine_wav(dir: &Path, name: &str, len: usize) -> PathBuf {
    let samples: Vec<f32> = (0..len).map(|i| 0.5 * (i as f32 * 0.07).sin()).collect();
    let path = dir.join(name);
    save_wav(&path, &AudioBuffer::new(samples, 8000).unwrap()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_writes_checkpoint_history_and_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = train_small(&out, 3, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["config.toml", "loss_history.csv", "checkpoint/config.toml", "checkpoint/codebooks.ndvq", "checkpoint/model.ndvw"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let csv = std::fs::read_to_string(out.join("loss_history.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("step,time_l1,mel,codebook"));
    assert!(stderr(&o).contains("resolved configuration"));
}

#[test]
fn zero_steps_writes_initial_checkpoint_only() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = train_small(&out, 0, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("checkpoint/model.ndvw").is_file());
    let csv = std::fs::read_to_string(out.join("loss_history.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn malformed_config_fails_without_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[train]\nstepz = 3\n").unwrap();
    let out = tmp.path().join("run");
    let o = ndvq(&["train", "--config", s(&bad), "--out", s(&out)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("stepz"), "{}", stderr(&o));
    assert!(!out.exists());

    std::fs::write(&bad, "[train\n").unwrap();
    let o = ndvq(&["train", "--config", s(&bad), "--out", s(&out)]);
    assert!(!o.status.success());
    assert!(!out.exists());

    let o = ndvq(&["train", "--out", s(&out), "--set", "train.batch_size=0"]);
    assert!(!o.status.success());
    assert!(!out.exists());
}

#[test]
fn encode_decode_round_trip_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    assert!(train_small(&run, 2, &[]).status.success());
    let ckpt = run.join("checkpoint");
    let wav = sine_wav(tmp.path(), "in.wav", 800);
    let code = tmp.path().join("x.ndvc");
    // 1000 frames/s and 4 bits per index: 8 kbps is two layers.
    let o = ndvq(&["encode", "--checkpoint", s(&ckpt), "--input", s(&wav), "--output", s(&code), "--bandwidth", "8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("layers=2"));
    let (header, grid) = unpack_bitstream(&std::fs::read(&code).unwrap()).unwrap();
    assert_eq!((header.n_q, header.frame_count, grid.layers()), (2, 100, 2));

    let a = tmp.path().join("a.wav");
    let b = tmp.path().join("b.wav");
    for out in [&a, &b] {
        let o = ndvq(&["decode", "--checkpoint", s(&ckpt), "--input", s(&code), "--output", s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let decoded = ndvq_core::signal::load_wav::<f32>(&a).unwrap();
    assert_eq!((decoded.len(), decoded.sample_rate), (800, 8000));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn toy_config_bandwidth_twenty_selects_two_layers() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    let o = ndvq(&[
        "train",
        "--out",
        s(&run),
        "--set",
        "codec.codebook_size=1024",
        "--set",
        "codec.max_layers=32",
        "--set",
        "data.clip_length=2048",
        "--set",
        "data.n_clips=8",
        "--set",
        "train.steps=0",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let wav = sine_wav(tmp.path(), "in.wav", 1600);
    let code = tmp.path().join("x.ndvc");
    let ckpt = run.join("checkpoint");
    let o = ndvq(&["encode", "--checkpoint", s(&ckpt), "--input", s(&wav), "--output", s(&code), "--bandwidth", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("layers=2"), "{}", stdout(&o));
}

#[test]
fn invalid_bandwidth_lists_valid_values() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    assert!(train_small(&run, 0, &[]).status.success());
    let wav = sine_wav(tmp.path(), "in.wav", 400);
    let code = tmp.path().join("x.ndvc");
    let ckpt = run.join("checkpoint");
    let o = ndvq(&["encode", "--checkpoint", s(&ckpt), "--input", s(&wav), "--output", s(&code), "--bandwidth", "7"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains('4') && err.contains('8') && err.contains("12"), "{err}");
    assert!(!code.exists());
}

#[test]
fn decode_with_mismatched_checkpoint_names_field() {
    let tmp = tempfile::tempdir().unwrap();
    let run_a = tmp.path().join("a");
    let run_b = tmp.path().join("b");
    assert!(train_small(&run_a, 0, &[]).status.success());
    assert!(train_small(&run_b, 0, &["codec.latent_dim=16"]).status.success());
    let wav = sine_wav(tmp.path(), "in.wav", 400);
    let code = tmp.path().join("x.ndvc");
    let o = ndvq(&["encode", "--checkpoint", s(&run_a.join("checkpoint")), "--input", s(&wav), "--output", s(&code)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = tmp.path().join("y.wav");
    let o = ndvq(&["decode", "--checkpoint", s(&run_b.join("checkpoint")), "--input", s(&code), "--output", s(&out)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("latent_dim"), "{}", stderr(&o));
}

#[test]
fn eval_writes_one_report_per_bandwidth() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    assert!(train_small(&run, 1, &[]).status.success());
    let data = tmp.path().join("data");
    std::fs::create_dir(&data).unwrap();
    sine_wav(&data, "one.wav", 400);
    let reports = tmp.path().join("reports");
    let ckpt = run.join("checkpoint");
    let o = ndvq(&["eval", "--checkpoint", s(&ckpt), "--data-dir", s(&data), "--bandwidth", "4,12", "--out", s(&reports)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.matches("si_sdr_db=").count(), 2);
    for label in ["4", "12"] {
        let t = std::fs::read_to_string(reports.join(format!("report_{label}.txt"))).unwrap();
        assert!(t.contains("entropy_layer_1="));
        let j: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(reports.join(format!("report_{label}.json"))).unwrap()).unwrap();
        assert_eq!(j["clips"], 1);
    }
    let again = ndvq(&["eval", "--checkpoint", s(&ckpt), "--data-dir", s(&data), "--bandwidth", "4,12"]);
    assert_eq!(again.stdout, o.stdout);
}

#[test]
fn stats_reports_unit_sigma_for_fresh_codebooks() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    assert!(train_small(&run, 0, &[]).status.success());
    let o = ndvq(&["stats", "--checkpoint", s(&run.join("checkpoint")), "--synthetic"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("kind=ndvq layers=3 codebook_size=16"));
    let rows: Vec<&str> = text.lines().skip(2).take(3).collect();
    for row in &rows {
        assert_eq!(row.split_whitespace().skip(3).collect::<Vec<_>>(), ["1.0000", "1.0000", "1.0000"], "{row}");
    }
    assert!(text.contains("usage entropy (bits, max 4.00)"));
    assert!(text.lines().any(|l| l.starts_with("*     1")));
}

#[test]
fn missing_checkpoint_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ndvq(&["stats", "--checkpoint", s(&tmp.path().join("nope"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error:"));
}
