use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use respira_core::neuralnet::{Checkpoint, ModelConfig, Network};
use respira_core::pipeline::{load_manifest, write_manifest, ClassLabel, Split};

fn respira(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_respira"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    respira(args).status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, count: usize) -> PathBuf {
    let n = count.to_string();
    assert_eq!(code(&["synth", "--count", &n, "--duration", "0.5", "--out", s(dir), "--quiet"]), 0);
    dir.join("manifest.jsonl")
}

fn files_with_ext(dir: &Path, ext: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    v.sort();
    v
}

#[test]
fn synth_writes_counted_deterministic_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let manifest = synth(&a, 10);
    synth(&b, 10);
    let entries = load_manifest(&manifest).unwrap();
    assert_eq!(entries.len(), 100);
    assert_eq!(std::fs::read_to_string(&manifest).unwrap().lines().count(), 100);
    for e in &entries {
        let (x, y) = (std::fs::read(a.join(&e.path)).unwrap(), std::fs::read(b.join(&e.path)).unwrap());
        assert_eq!(x, y, "{}", e.path);
    }
    for class in ClassLabel::ALL {
        assert_eq!(entries.iter().filter(|e| e.label == class).count(), 10);
    }
}

#[test]
fn synth_into_a_file_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("taken");
    std::fs::write(&file, b"x").unwrap();
    let out = respira(&["synth", "--count", "1", "--out", s(&file)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("not a directory"));
}

#[test]
fn augment_writes_outputs_sidecars_and_replays() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = synth(&tmp.path().join("corpus"), 1);
    let aug = tmp.path().join("aug");
    let out = respira(&["augment", "--manifest", s(&corpus), "--sets", "ST,SP2", "--out", s(&aug), "--quiet"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(files_with_ext(&aug, "wav").len(), 80);
    let sidecars: Vec<_> = files_with_ext(&aug, "json");
    assert_eq!(sidecars.len(), 80);

    let sources = load_manifest(&corpus).unwrap();
    let produced = load_manifest(&aug.join("manifest.jsonl")).unwrap();
    assert_eq!(produced.len(), 80);
    for p in &produced {
        let src = sources
            .iter()
            .find(|e| p.path.starts_with(&e.path.replace('/', "_").replace(".wav", "")))
            .unwrap();
        assert_eq!((p.label, &p.user_id), (src.label, &src.user_id));
    }

    let before: Vec<Vec<u8>> = files_with_ext(&aug, "wav").iter().map(|p| std::fs::read(p).unwrap()).collect();
    assert_eq!(code(&["augment", "--replay", "--out", s(&aug), "--quiet"]), 0);
    // rerunning overwrites with identical bytes
    assert_eq!(code(&["augment", "--manifest", s(&corpus), "--sets", "ST,SP2", "--out", s(&aug), "--quiet"]), 0);
    let after: Vec<Vec<u8>> = files_with_ext(&aug, "wav").iter().map(|p| std::fs::read(p).unwrap()).collect();
    assert_eq!(before, after);

    // a tampered output is caught by replay
    let victim = &files_with_ext(&aug, "wav")[5];
    let mut bytes = std::fs::read(victim).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    std::fs::write(victim, bytes).unwrap();
    assert_eq!(code(&["augment", "--replay", "--out", s(&aug), "--quiet"]), 1);
}

#[test]
fn augment_usage_and_missing_audio() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = synth(&tmp.path().join("corpus"), 1);
    let out = tmp.path().join("aug");
    assert_eq!(code(&["augment", "--manifest", s(&corpus), "--out", s(&out)]), 2);

    let mut entries = load_manifest(&corpus).unwrap();
    entries[3].path = "gone/a.wav".into();
    entries[7].path = "gone/b.wav".into();
    let broken = tmp.path().join("corpus/broken.jsonl");
    write_manifest(&broken, &entries).unwrap();
    let o = respira(&["augment", "--manifest", s(&broken), "--sets", "CRD", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("gone/a.wav") && err.contains("gone/b.wav"), "{err}");
}

#[test]
fn bn_augmentation_with_a_noise_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = synth(&tmp.path().join("corpus"), 1);
    let noise = tmp.path().join("noise");
    std::fs::create_dir(&noise).unwrap();
    let scene = respira_core::audio::synth_clip(
        &respira_core::audio::SynthSpec::new(
            respira_core::audio::SynthKind::Noise {
                low_hz: 100.0,
                high_hz: 4000.0,
            },
            1.0,
            9,
        ),
        22_050,
    )
    .unwrap();
    respira_core::audio::write_wav(noise.join("street.wav"), &scene).unwrap();
    let aug = tmp.path().join("aug");
    let args = ["--noise-dir", s(&noise), "--out", s(&aug), "--quiet"];
    assert_eq!(code(&[&["augment", "--manifest", s(&corpus), "--sets", "BN"][..], &args].concat()), 0);
    let side = std::fs::read_to_string(&files_with_ext(&aug, "json")[0]).unwrap();
    assert!(side.contains("\"street\""), "{side}");
    assert_eq!(code(&[&["augment", "--replay"][..], &args].concat()), 0);
}

#[test]
fn train_eval_predict_round() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = synth(&tmp.path().join("corpus"), 10);
    let run = tmp.path().join("run");
    let o = respira(&[
        "train", "--manifest", s(&corpus), "--features", "mfcc", "--epochs", "2", "--out", s(&run), "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("final val accuracy"));
    let history: serde_json::Value = serde_json::from_slice(&std::fs::read(run.join("history.json")).unwrap()).unwrap();
    assert_eq!(history["loss"].as_array().unwrap().len(), 2);
    assert_eq!(history["val_accuracy"].as_array().unwrap().len(), 2);

    let ckpt = run.join("classifier.ckpt");
    let o = respira(&["eval", "--checkpoint", s(&ckpt), "--manifest", s(&corpus), "--out", s(&run)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(run.join("report.json")).unwrap()).unwrap();
    let t = &report["tasks"][0];
    let n = |k: &str| t["metrics"][k].as_u64().unwrap();
    let (pt, pf, nt, nf) = (n("pt"), n("pf"), n("nt"), n("nf"));
    assert_eq!(pt + pf + nt + nf, t["clips"].as_u64().unwrap());
    let recount = (pt + nt) as f64 / (pt + pf + nt + nf) as f64 * 100.0;
    assert!((t["metrics"]["accuracy"].as_f64().unwrap() - recount).abs() < 1e-12);
    let table = stdout(&o);
    for col in ["PT", "PF", "NT", "NF", "accuracy", "f1"] {
        assert!(table.contains(col), "{table}");
    }

    let wav = tmp.path().join("corpus/covid_cough/covid_cough_0000.wav");
    let o = respira(&["predict", "--checkpoint", s(&ckpt), s(&wav)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    let p: Vec<f64> = serde_json::from_value(line["probabilities"].clone()).unwrap();
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);

    let o = respira(&["eval", "--checkpoint", s(&ckpt), "--manifest", s(&corpus), "--features", "ddae"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn zero_epochs_saves_the_initialization() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = synth(&tmp.path().join("corpus"), 4);
    let run = tmp.path().join("run");
    let o = respira(&[
        "train", "--manifest", s(&corpus), "--features", "mfcc", "--epochs", "0", "--seed", "5", "--out", s(&run),
        "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ckpt = Checkpoint::load(&run.join("classifier.ckpt")).unwrap();
    let mut cfg = ModelConfig::profile("paper").unwrap();
    cfg.epochs = 0;
    cfg.seed = 5;
    let fresh = Network::new(cfg).unwrap();
    let net = ckpt.network().unwrap();
    for ((na, a), (nb, b)) in net.stack().named_tensors().iter().zip(fresh.stack().named_tensors().iter()) {
        assert_eq!(na, nb);
        assert_eq!(a, b, "{na}");
    }
}

#[test]
fn train_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = synth(&tmp.path().join("corpus"), 2);
    let out = tmp.path().join("run");
    assert_eq!(code(&["train", "--manifest", s(&corpus), "--profile", "vgg", "--out", s(&out)]), 2);
    assert_eq!(code(&["train", "--manifest", s(&corpus), "--out", s(&out), "--quiet"]), 2);

    let healthy: Vec<_> = load_manifest(&corpus)
        .unwrap()
        .into_iter()
        .filter(|e| matches!(e.label, ClassLabel::HealthyCough | ClassLabel::HealthyBreath))
        .collect();
    let only_healthy = tmp.path().join("corpus/healthy.jsonl");
    write_manifest(&only_healthy, &healthy).unwrap();
    let o = respira(&["train", "--manifest", s(&only_healthy), "--features", "mfcc", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no positive recordings"), "{}", stderr(&o));
}

#[test]
fn eval_with_empty_test_split_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = synth(&tmp.path().join("corpus"), 4);
    let run = tmp.path().join("run");
    assert_eq!(
        code(&["train", "--manifest", s(&corpus), "--features", "mfcc", "--epochs", "1", "--out", s(&run), "--quiet"]),
        0
    );
    let entries: Vec<_> = load_manifest(&corpus)
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(i, mut e)| {
            e.split = Some(if i % 2 == 0 { Split::Train } else { Split::Val });
            e
        })
        .collect();
    let no_test = tmp.path().join("corpus/no_test.jsonl");
    write_manifest(&no_test, &entries).unwrap();
    let ckpt = run.join("classifier.ckpt");
    let o = respira(&["eval", "--checkpoint", s(&ckpt), "--manifest", s(&no_test), "--out", s(&run)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("test split"));
}

#[test]
fn config_file_supplies_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = synth(&tmp.path().join("corpus"), 4);
    let run = tmp.path().join("run");
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "manifest = {:?}\nout = {:?}\nfeatures = \"mfcc\"\nprofile = \"paper-3\"\nepochs = 1\nseed = 3\n",
            s(&corpus),
            s(&run)
        ),
    )
    .unwrap();
    let o = respira(&["train", "--config", s(&cfg), "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ckpt = Checkpoint::load(&run.join("classifier.ckpt")).unwrap();
    assert_eq!(ckpt.config.seed, 3);
    assert_eq!(ckpt.config.layers, ModelConfig::profile("paper-3").unwrap().layers);

    std::fs::write(&cfg, "epoch = 1\n").unwrap();
    assert_eq!(code(&["train", "--config", s(&cfg)]), 2);
    assert_eq!(code(&["train", "--config", s(&tmp.path().join("absent.toml"))]), 2);
}

#[test]
fn features_command_fills_the_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = synth(&tmp.path().join("corpus"), 1);
    let out = tmp.path().join("feat");
    let args = ["features", "--manifest", s(&corpus), "--features", "mfcc", "--out", s(&out), "--quiet"];
    let first = respira(&args);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    assert!(stdout(&first).contains("(0 from cache)"));
    assert!(stdout(&respira(&args)).contains("(10 from cache)"));
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("features.json")).unwrap()).unwrap();
    // 0.5 s at 16 kHz: floor((8000 - 1024) / 512) + 1 frames
    assert!(summary["clips"].as_array().unwrap().iter().all(|c| c["frames"] == 14));
    assert_eq!(code(&["features", "--manifest", s(&corpus), "--features", "ddae", "--out", s(&out)]), 2);
}

#[test]
fn gradcheck_exit_codes() {
    let ok = respira(&["gradcheck"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("max relative error"));
    assert_eq!(code(&["gradcheck", "--corrupt-gradient"]), 1);
    assert_eq!(code(&["gradcheck", "--profile", "missing"]), 2);
}

#[test]
fn help_documents_every_flag() {
    let top = respira(&["--help"]);
    assert_eq!(top.status.code(), Some(0));
    let text = stdout(&top);
    for cmd in ["synth", "augment", "train-ddae", "features", "train", "eval", "predict", "gradcheck"] {
        assert!(text.contains(cmd), "{cmd}");
        let o = respira(&[cmd, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{cmd}");
        let help = stdout(&o);
        for global in ["--seed", "--config", "--out", "--quiet"] {
            assert!(help.contains(global), "{cmd} {global}");
        }
        // every listed flag carries a description
        for line in help.lines().filter(|l| l.trim_start().starts_with("--")) {
            let words = line.split_whitespace().count();
            assert!(words >= 2, "{cmd}: undocumented {line:?}");
        }
    }
    assert!(!stdout(&respira(&["gradcheck", "--help"])).contains("corrupt"));
}
