//! End-to-end command tests for the `facedeblur` binary: exit-code
//! contract, artifact layout, and run determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_facedeblur"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("spawn facedeblur")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn help_exits_zero_and_lists_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--help"], dir.path());
    assert_code(&out, 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["kernel-gen", "dataset-gen", "train", "eval", "infer"] {
        assert!(text.contains(cmd), "missing {cmd} in help");
    }
    for flag in ["--seed", "--profile", "--config"] {
        assert!(text.contains(flag), "missing {flag} in help");
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["kernel-gen", "--no-such-flag"], dir.path());
    assert_code(&out, 1);
    let out = run(&["definitely-not-a-command"], dir.path());
    assert_code(&out, 1);
}

#[test]
fn runtime_errors_exit_two_and_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let kernels = dir.path().join("k");
    let out = run(
        &[
            "kernel-gen", "--sizes", "13", "--per-size", "1", "--seed", "1",
            "--out", kernels.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_code(&out, 0);
    // missing label directory
    let clear = dir.path().join("clear");
    fs::create_dir_all(&clear).unwrap();
    let out = run(
        &[
            "dataset-gen", "--clear", clear.to_str().unwrap(), "--labels", "nowhere",
            "--kernels", kernels.to_str().unwrap(), "--out", dir.path().join("d").to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_code(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere"));
}

#[test]
fn kernel_gen_writes_arrays_with_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["kernel-gen", "--sizes", "13", "--per-size", "2", "--seed", "1", "--out", "k"],
        dir.path(),
    );
    assert_code(&out, 0);
    let files: Vec<_> = fs::read_dir(dir.path().join("k/size_13"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(files.iter().filter(|f| f.ends_with(".npy")).count(), 2);
    assert_eq!(files.iter().filter(|f| f.ends_with(".json")).count(), 2);
}

#[test]
fn full_pipeline_micro_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    assert_code(
        &run(
            &["kernel-gen", "--sizes", "13", "--per-size", "1", "--seed", "1", "--out", &d("k")],
            dir.path(),
        ),
        0,
    );
    assert_code(
        &run(
            &[
                "kernel-gen", "--sizes", "15", "--per-size", "1", "--seed", "77", "--out",
                &d("kt"),
            ],
            dir.path(),
        ),
        0,
    );
    assert_code(
        &run(
            &[
                "dataset-gen", "--synthetic", "2", "--image-size", "32", "--kernels", &d("k"),
                "--test-kernels", &d("kt"), "--sigma", "0.01", "--seed", "3", "--out", &d("data"),
            ],
            dir.path(),
        ),
        0,
    );
    assert!(dir.path().join("data/train.jsonl").exists());
    assert!(dir.path().join("data/test.jsonl").exists());

    // stage "all" with a minuscule scale factor: 4 checkpoints
    assert_code(
        &run(
            &[
                "train", "--manifest", &d("data/train.jsonl"), "--profile", "tiny", "--seed",
                "5", "--scale-factor", "0.00002", "--out", &d("run"),
            ],
            dir.path(),
        ),
        0,
    );
    for s in 1..=4 {
        assert!(dir.path().join(format!("run/checkpoint_stage{s}.ckpt")).exists());
    }
    assert!(dir.path().join("run/metrics.jsonl").exists());

    assert_code(
        &run(
            &[
                "eval", "--manifest", &d("data/test.jsonl"), "--ckpt",
                &d("run/checkpoint_stage4.ckpt"), "--out", &d("eval"), "--grids", "1",
            ],
            dir.path(),
        ),
        0,
    );
    for f in ["report.csv", "summary.csv", "report.json"] {
        assert!(dir.path().join("eval").join(f).exists());
    }

    // inference on an odd-sized crop: output matches input size
    let blurred: Vec<_> = fs::read_dir(dir.path().join("data/blurred"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    let src = facedeblur_core::image::Image::load_png(&blurred[0]).unwrap();
    let mut odd = facedeblur_core::image::Image::new(29, 31, 3);
    for y in 0..29 {
        for x in 0..31 {
            for c in 0..3 {
                odd.set(y, x, c, src.get(y, x, c));
            }
        }
    }
    odd.save_png(dir.path().join("odd.png")).unwrap();
    assert_code(
        &run(
            &[
                "infer", "--input", &d("odd.png"), "--ckpt", &d("run/checkpoint_stage4.ckpt"),
                "--out", &d("restored.png"), "--dump-parsing",
            ],
            dir.path(),
        ),
        0,
    );
    let restored = facedeblur_core::image::Image::load_png(dir.path().join("restored.png")).unwrap();
    assert_eq!((restored.height(), restored.width()), (29, 31));
    assert!(dir.path().join("restored.parsing.png").exists());

    // same seed, run twice: bit-identical inference outputs
    assert_code(
        &run(
            &[
                "infer", "--input", &d("odd.png"), "--ckpt", &d("run/checkpoint_stage4.ckpt"),
                "--out", &d("restored2.png"),
            ],
            dir.path(),
        ),
        0,
    );
    assert_eq!(
        fs::read(dir.path().join("restored.png")).unwrap(),
        fs::read(dir.path().join("restored2.png")).unwrap()
    );
}

#[test]
fn stage_beyond_one_requires_resume() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["train", "--synthetic", "2", "--stage", "3", "--scale-factor", "0.00001", "--out", "r"],
        dir.path(),
    );
    assert_code(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--resume"));
}

#[test]
fn config_file_round_trip_drives_training() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = facedeblur_core::config::RunConfig::tiny().with_seed(9);
    let cfg_path = dir.path().join("tiny.toml");
    cfg.save(&cfg_path).unwrap();
    let out = run(
        &[
            "train", "--config", cfg_path.to_str().unwrap(), "--synthetic", "2",
            "--scale-factor", "0.00001", "--stage", "all", "--out", "run",
        ],
        dir.path(),
    );
    assert_code(&out, 0);
    assert!(dir.path().join("run/checkpoint_stage4.ckpt").exists());
}
