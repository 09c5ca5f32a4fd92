use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acousep"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_lists_every_subcommand() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for cmd in [
        "synth",
        "mix",
        "separate",
        "features",
        "train",
        "predict",
        "experiment",
    ] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn usage_errors_exit_1() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["separate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(run(d.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(d.path(), &[]).status.code(), Some(1));
    assert_eq!(
        run(d.path(), &["synth", "--class", "kite", "-o", "x.wav"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn data_errors_exit_2_with_diagnostic() {
    let d = tempfile::tempdir().unwrap();
    std::fs::create_dir(d.path().join("bad")).unwrap();
    std::fs::write(d.path().join("bad/mixed.wav"), b"RIFF\x04\x00\x00\x00WAVX").unwrap();
    let o = run(d.path(), &["separate", "--in", "bad", "-o", "out"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("error[format]") && e.contains("byte 8"), "{e}");

    let o = run(d.path(), &["separate", "--in", "missing", "-o", "out"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error[io]"));
}

#[test]
fn writes_stay_inside_out_dir() {
    let d = tempfile::tempdir().unwrap();
    let o = run(
        d.path(),
        &[
            "--out-dir",
            "out",
            "synth",
            "--class",
            "bird",
            "-o",
            "../escape.wav",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!d.path().join("escape.wav").exists());
    let o = run(
        d.path(),
        &[
            "--out-dir",
            "out",
            "synth",
            "--class",
            "bird",
            "--dur",
            "0.1",
            "-o",
            "b/bird.wav",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(d.path().join("out/b/bird.wav").is_file());
}

#[test]
fn pipeline_ends_in_a_prediction_file() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    let classes = ["drone", "drone", "aeroplane", "bird", "wind", "thunder"];
    let mut inputs = Vec::new();
    for (i, c) in classes.iter().enumerate() {
        let file = format!("{c}{i}.wav");
        let f0 = (150 + 70 * i).to_string();
        let seed = i.to_string();
        let o = run(
            p,
            &[
                "--seed",
                &seed,
                "synth",
                "--class",
                c,
                "--dur",
                "1",
                "--fundamental",
                &f0,
                "-o",
                &file,
            ],
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        inputs.push(file);
    }
    let steps: [&[&str]; 5] = [
        &["mix", "--inputs", &inputs.join(","), "-o", "mixed"],
        &["separate", "--in", "mixed", "-o", "sep"],
        &[
            "features",
            "--in",
            "sep",
            "--block-length",
            "4000",
            "-o",
            "f.csv",
        ],
        &[
            "train", "--feats", "f.csv", "--model", "knn", "-k", "3", "-o", "m.json",
        ],
        &[
            "predict", "--model", "m.json", "--feats", "f.csv", "-o", "pred.csv",
        ],
    ];
    for s in steps {
        let o = run(p, s);
        assert_eq!(o.status.code(), Some(0), "{s:?}: {}", stderr(&o));
    }
    let diag = std::fs::read_to_string(p.join("sep/separation.json")).unwrap();
    assert!(diag.contains("\"label\": \"drone\""));
    let pred = std::fs::read_to_string(p.join("pred.csv")).unwrap();
    let lines: Vec<&str> = pred.lines().collect();
    assert_eq!(lines[0], "index,method,label,block_length,prediction");
    assert_eq!(lines.len(), 1 + 6 * 6);
    let drones = lines
        .iter()
        .filter(|l| l.contains(",drone,") && l.ends_with(",drone"))
        .count();
    assert!(drones >= 10, "{pred}");
}

#[test]
fn mixed_methods_need_a_choice() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    for (c, seed) in [("drone", "1"), ("wind", "2")] {
        run(
            p,
            &[
                "--seed",
                seed,
                "synth",
                "--class",
                c,
                "--dur",
                "1",
                "-o",
                &format!("in/{c}.wav"),
            ],
        );
    }
    let o = run(
        p,
        &[
            "features",
            "--in",
            "in",
            "--method",
            "psd,mfcc",
            "--block-length",
            "2000",
            "-o",
            "f.json",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(
        p,
        &[
            "train", "--feats", "f.json", "--model", "svm", "-o", "m.json",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--method"));
    let o = run(
        p,
        &[
            "train", "--feats", "f.json", "--model", "svm", "--method", "psd", "-o", "m.json",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn single_trial_identity_experiment() {
    let d = tempfile::tempdir().unwrap();
    let cfg = r#"{"block_lengths": [10000], "trials_per_length": 1, "mixing": "identity",
                  "methods": ["rms-psd"], "classifiers": ["knn"]}"#;
    std::fs::write(d.path().join("exp.json"), cfg).unwrap();
    let o = run(
        d.path(),
        &["experiment", "--config", "exp.json", "-o", "rep"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for ext in ["txt", "csv", "json"] {
        assert!(d.path().join(format!("rep/report.{ext}")).is_file());
    }
    let text = std::fs::read_to_string(d.path().join("rep/report.txt")).unwrap();
    assert!(text.contains("n/a"), "{text}");

    std::fs::write(d.path().join("bad.json"), r#"{"trials": 3}"#).unwrap();
    let o = run(
        d.path(),
        &["experiment", "--config", "bad.json", "-o", "rep2"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown field"), "{}", stderr(&o));
}
