//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use respira_core::audio::{synth_clip, AudioClip, SynthKind, SynthSpec};
use respira_core::augment::{
    apply_augmentation_set, mix_background, pitch_shift, replay, time_stretch, AugmentationRecord, AugmentationSet,
    SP1_SEMITONES, SP2_SEMITONES, STRETCH_HOP, STRETCH_RATES,
};
use respira_core::features::{ddae_train, DdaeConfig, DdaeModel, FeatureKind, Spectrum};
use respira_core::neuralnet::train::EpochReport;
use respira_core::neuralnet::{conv1d, dense, output_length, pool1d, Checkpoint, ModelConfig, PoolMode, Tensor};
use respira_core::pipeline::workflow::{collect_spectra, default_noise_bank, feature_meta, labeled_features, task_splits, TaskSplits};
use respira_core::pipeline::{
    builtin_task, compute_metrics, split_dataset, train_classifier, write_corpus, Classifier, CorpusSpec, Extractor,
    FeatureConfig, LabeledClip, ManifestEntry,
};
use respira_core::DEFAULT_SEED;

const RATIOS: (f64, f64, f64) = (0.8, 0.1, 0.1);
const CLASSIFIER_EPOCHS: usize = 10;
const DDAE_EPOCHS: usize = 20;
const DDAE_SPECTRA: usize = 3000;

type Verdict = Result<(bool, String), String>;

fn report(id: usize, name: &str, verdict: Verdict, started: Instant) -> bool {
    let secs = started.elapsed().as_secs_f64();
    let (pass, detail) = match verdict {
        Ok((p, d)) => (p, d),
        Err(e) => (false, format!("error: {e}")),
    };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "criterion {id:>2} {name:<28} {} {detail} [{secs:.1} s]",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = out.flush();
    pass
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn tone(freq: f64, secs: f64) -> AudioClip {
    synth_clip(&SynthSpec::new(SynthKind::Sine { frequency: freq }, secs, 0), 16_000).unwrap()
}

/// Frequency of the largest magnitude bin of a zero-padded FFT.
fn fft_peak_hz(samples: &[f64], rate: u32) -> f64 {
    let size = (8 * samples.len()).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&s| Complex::new(s, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(size).process(&mut buf);
    let k = (1..size / 2).max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm())).unwrap();
    k as f64 * f64::from(rate) / size as f64
}

fn gradient_check() -> Verdict {
    let out = Command::new(env!("CARGO_BIN_EXE_respira"))
        .args(["gradcheck", "--profile", "paper", "--quiet"])
        .output()
        .map_err(err)?;
    let text = String::from_utf8_lossy(&out.stdout);
    let value: f64 = text
        .split("max relative error ")
        .nth(1)
        .and_then(|t| t.split_whitespace().next())
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| format!("unexpected output {text:?}"))?;
    Ok((
        out.status.code() == Some(0) && value < 1e-4,
        format!("max relative error {value:.3e} < 1e-4 (exit {:?})", out.status.code()),
    ))
}

fn output_length_conformance() -> Verdict {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let (mut checked, mut failures) = (0, 0);
    while checked < 1200 {
        let il = r.random_range(1..200usize);
        let p = r.random_range(0..6usize);
        let k = r.random_range(1..=il + 2 * p);
        let s = r.random_range(1..6usize);
        let expected = (il + 2 * p - k) / s + 1;
        let x = Tensor::new(vec![1, il], vec![1.0; il]).map_err(err)?;
        let w = Tensor::new(vec![1, 1, k], vec![0.5; k]).map_err(err)?;
        let b = Tensor::vector(vec![0.0]).map_err(err)?;
        let conv = conv1d(&x, &w, &b, s, p).map_err(err)?.shape()[1];
        let formula = output_length(il, k, p, s).map_err(err)?;
        if conv != expected || formula != expected {
            failures += 1;
        }
        if k <= il {
            let pooled = pool1d(&x, k, s, PoolMode::Max).map_err(err)?.shape()[1];
            let pool_formula = output_length(il, k, 0, s).map_err(err)?;
            if pooled != (il - k) / s + 1 || pool_formula != pooled {
                failures += 1;
            }
        }
        checked += 1;
    }
    Ok((failures == 0, format!("{checked} configurations, {failures} mismatches")))
}

fn parameter_count() -> Verdict {
    let counted = ModelConfig::profile("paper").and_then(|c| c.param_count()).map_err(err)?;
    // six conv blocks of 10 filters (width 12) with batch-norm scale and shift,
    // flatten to 10 x 7, dense 1114, dense 2
    let conv = (1 * 12 + 1) * 10 + 5 * ((10 * 12 + 1) * 10);
    let bn = 6 * 2 * 10;
    let dense = (70 + 1) * 1114 + (1114 + 1) * 2;
    let hand = conv + bn + dense;
    Ok((
        counted == 87_624 && hand == 87_624,
        format!("param_count {counted}, hand count {hand}, target 87624"),
    ))
}

fn augmentation_suite() -> Verdict {
    let clip = tone(440.0, 1.0);
    let mut notes = Vec::new();
    let mut ok = true;

    let mut worst_len = 0i64;
    for rate in STRETCH_RATES {
        let out = time_stretch(&clip, rate).map_err(err)?;
        let target = (clip.len() as f64 / rate).round() as i64;
        worst_len = worst_len.max((out.len() as i64 - target).abs());
    }
    ok &= worst_len <= STRETCH_HOP as i64;
    notes.push(format!("(a) stretch off by <= {worst_len} samples (hop {STRETCH_HOP})"));

    let mut worst_pitch: f64 = 0.0;
    for s in SP1_SEMITONES.iter().chain(&SP2_SEMITONES) {
        let out = pitch_shift(&clip, *s).map_err(err)?;
        let want = 440.0 * 2f64.powf(s / 12.0);
        worst_pitch = worst_pitch.max((fft_peak_hz(out.samples(), 16_000) - want).abs() / want);
    }
    ok &= worst_pitch <= 0.03;
    notes.push(format!("(b) pitch peak error {:.2}%", worst_pitch * 100.0));

    let mut r = ChaCha8Rng::seed_from_u64(4);
    let mut worst_mix: f64 = 0.0;
    for _ in 0..100 {
        let n = r.random_range(1..400usize);
        let m = r.random_range(1..400usize);
        let a: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..=1.0)).collect();
        let b: Vec<f64> = (0..m).map(|_| r.random_range(-1.0..=1.0)).collect();
        let w: f64 = r.random_range(0.0..1.0);
        let out = mix_background(
            &AudioClip::new(a.clone(), 8000).map_err(err)?,
            &AudioClip::new(b.clone(), 8000).map_err(err)?,
            w,
        )
        .map_err(err)?;
        for (i, y) in out.samples().iter().enumerate() {
            let expect = ((1.0 - w) * (a[i] + w * b[i % m])).clamp(-1.0, 1.0);
            worst_mix = worst_mix.max((y - expect).abs());
        }
    }
    ok &= worst_mix <= 1e-9;
    notes.push(format!("(c) mix max error {worst_mix:.1e}"));

    let source = synth_clip(
        &SynthSpec::new(
            SynthKind::AmTone {
                carrier_hz: 700.0,
                modulation_hz: 3.0,
                depth: 0.6,
            },
            0.75,
            1,
        ),
        16_000,
    )
    .map_err(err)?;
    let bank = default_noise_bank();
    let mut replayed = 0;
    let mut identical = 0;
    for set in AugmentationSet::ALL {
        for (out, record) in apply_augmentation_set(&source, "source.wav", set, &bank, 9).map_err(err)? {
            let parsed = AugmentationRecord::from_json(&record.to_json()).map_err(err)?;
            let again = replay(&parsed, &source, &bank).map_err(err)?;
            replayed += 1;
            let same = again.len() == out.len()
                && again.samples().iter().zip(out.samples()).all(|(x, y)| x.to_bits() == y.to_bits());
            identical += usize::from(same);
        }
    }
    ok &= replayed == identical;
    notes.push(format!("(d) {identical}/{replayed} replays bit-exact"));
    Ok((ok, notes.join("; ")))
}

struct Corpus {
    _dir: tempfile::TempDir,
    root: std::path::PathBuf,
    entries: Vec<ManifestEntry>,
}

fn corpus() -> Result<Corpus, String> {
    let dir = tempfile::tempdir().map_err(err)?;
    let root = dir.path().join("corpus");
    let spec = CorpusSpec {
        per_class: 100,
        clips_per_user: 2,
        duration: 0.5,
        seed: DEFAULT_SEED,
    };
    let entries = write_corpus(&root, &spec).map_err(err)?;
    Ok(Corpus { _dir: dir, root, entries })
}

fn mean_sq(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let n: usize = a.iter().map(Vec::len).sum();
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)))
        .sum::<f64>()
        / n as f64
}

fn ddae_denoising(c: &Corpus) -> Result<(Verdict, Option<DdaeModel>), String> {
    let splits = split_dataset(&c.entries, RATIOS, DEFAULT_SEED).map_err(err)?;
    let spectra = collect_spectra(&splits.train, &c.root, DDAE_SPECTRA, DEFAULT_SEED).map_err(err)?;
    let held_out: Vec<Spectrum> = collect_spectra(&splits.test, &c.root, 500, DEFAULT_SEED + 1).map_err(err)?;
    let cfg = DdaeConfig {
        epochs: DDAE_EPOCHS,
        seed: DEFAULT_SEED,
        ..DdaeConfig::default()
    };
    let model = ddae_train(&spectra, cfg, &mut |_, _| {}).map_err(err)?;
    let h = model.history();
    let (first, last) = (h[0], h[h.len() - 1]);

    let clean: Vec<Vec<f64>> = held_out.iter().map(|s| model.normalize(s)).collect::<Result<_, _>>().map_err(err)?;
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let noisy: Vec<Vec<f64>> = clean
        .iter()
        .map(|row| {
            row.iter()
                .map(|&v| if r.random::<f64>() < cfg.corruption_level { 0.0 } else { v })
                .collect()
        })
        .collect();
    let corruption = mean_sq(&noisy, &clean);
    let recon = mean_sq(&model.reconstruct_normalized(&noisy).map_err(err)?, &clean);
    let pass = spectra.len() >= 2000 && recon < 0.5 * corruption && last <= 0.5 * first;
    let detail = format!(
        "{} spectra; held-out reconstruction MSE {recon:.2e} vs corruption MSE {corruption:.2e} (ratio {:.3}); loss {first:.4} -> {last:.4} (ratio {:.3})",
        spectra.len(),
        recon / corruption,
        last / first
    );
    Ok((Ok((pass, detail)), Some(model)))
}

struct TaskRun {
    train_acc: f64,
    test_acc: f64,
    epochs: usize,
}

fn clip_accuracy(classifier: &Classifier, clips: &[LabeledClip]) -> Result<f64, String> {
    let (_, c) = classifier.evaluate(clips).map_err(err)?;
    Ok(compute_metrics(c.pt, c.pf, c.nt, c.nf).map_err(err)?.accuracy)
}

fn run_task(c: &Corpus, splits: &TaskSplits, kind: FeatureKind, ddae: Option<&DdaeModel>) -> Result<TaskRun, String> {
    let extractor = Extractor::new(
        FeatureConfig {
            kind,
            ..FeatureConfig::default()
        },
        ddae,
    )
    .map_err(err)?;
    let feats = |e: &[ManifestEntry], l: &[usize]| labeled_features(e, l, &c.root, &extractor, None).map_err(err);
    let train = feats(&splits.train, &splits.train_labels)?;
    let val = feats(&splits.val, &splits.val_labels)?;
    let test = feats(&splits.test, &splits.test_labels)?;
    let mut cfg = ModelConfig::profile("paper").map_err(err)?;
    cfg.epochs = CLASSIFIER_EPOCHS;
    cfg.seed = DEFAULT_SEED;
    let outcome = train_classifier(&train, &val, cfg.clone(), feature_meta(&extractor, &splits.task), &mut |_: &EpochReport| {})
        .map_err(err)?;
    let classifier = Classifier::from_checkpoint(&outcome.checkpoint).map_err(err)?;
    Ok(TaskRun {
        train_acc: clip_accuracy(&classifier, &train)?,
        test_acc: clip_accuracy(&classifier, &test)?,
        epochs: cfg.epochs,
    })
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().map_err(err)?;
    let root = tmp.path().join("corpus");
    write_corpus(
        &root,
        &CorpusSpec {
            per_class: 10,
            duration: 0.5,
            ..CorpusSpec::default()
        },
    )
    .map_err(err)?;
    let manifest = root.join("manifest.jsonl");
    let train = |out: &Path| -> Result<(), String> {
        let status = Command::new(env!("CARGO_BIN_EXE_respira"))
            .args(["train", "--manifest"])
            .arg(&manifest)
            .args(["--train-ddae", "--ddae-epochs", "2", "--max-spectra", "400", "--epochs", "2", "--quiet", "--out"])
            .arg(out)
            .status()
            .map_err(err)?;
        if status.success() {
            Ok(())
        } else {
            Err(format!("train exited with {status}"))
        }
    };
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    train(&a)?;
    train(&b)?;
    let read = |p: &Path| std::fs::read(p).map_err(err);
    let same_classifier = read(&a.join("classifier.ckpt"))? == read(&b.join("classifier.ckpt"))?;
    let same_ddae = read(&a.join("ddae.ckpt"))? == read(&b.join("ddae.ckpt"))?;

    let ckpt = Checkpoint::load(&a.join("classifier.ckpt")).map_err(err)?;
    let net = ckpt.network().map_err(err)?;
    let copy = tmp.path().join("copy.ckpt");
    ckpt.save(&copy).map_err(err)?;
    let reloaded = Checkpoint::load(&copy).map_err(err)?.network().map_err(err)?;
    let mut r = ChaCha8Rng::seed_from_u64(6);
    let dim = net.config().input_dim;
    let x = Tensor::new(vec![16, dim], (0..16 * dim).map(|_| r.random_range(-3.0..3.0)).collect()).map_err(err)?;
    let (ya, yb) = (
        net.forward(&x, respira_core::neuralnet::Mode::Eval).map_err(err)?,
        reloaded.forward(&x, respira_core::neuralnet::Mode::Eval).map_err(err)?,
    );
    let bit_exact = ya.data().iter().zip(yb.data()).all(|(p, q)| p.to_bits() == q.to_bits());
    let ddae = DdaeModel::load(&a.join("ddae.ckpt")).map_err(err)?;
    let ddae_copy = tmp.path().join("ddae-copy.ckpt");
    ddae.save(&ddae_copy).map_err(err)?;
    let ddae_round_trip = DdaeModel::load(&ddae_copy).map_err(err)? == ddae;
    Ok((
        same_classifier && same_ddae && bit_exact && ddae_round_trip,
        format!(
            "identical classifier checkpoints: {same_classifier}; identical autoencoders: {same_ddae}; reloaded forward bit-exact: {bit_exact}; autoencoder round trip: {ddae_round_trip}"
        ),
    ))
}

/// Confusion counts with hand-derived accuracy and F1 (percent).
const TABLES: [(u64, u64, u64, u64, f64, f64); 20] = [
    (50, 0, 50, 0, 100.0, 100.0),
    (0, 50, 0, 50, 0.0, 0.0),
    (10, 0, 0, 0, 100.0, 100.0),
    (0, 0, 10, 0, 100.0, 0.0),
    (0, 10, 0, 0, 0.0, 0.0),
    (0, 0, 0, 10, 0.0, 0.0),
    (0, 5, 5, 0, 50.0, 0.0),
    (0, 0, 5, 5, 50.0, 0.0),
    (1, 1, 1, 1, 50.0, 50.0),
    (8, 2, 9, 1, 85.0, 1600.0 / 19.0),
    (3, 1, 4, 2, 70.0, 200.0 / 3.0),
    (1, 0, 0, 1, 50.0, 200.0 / 3.0),
    (1, 1, 0, 0, 50.0, 200.0 / 3.0),
    (90, 10, 80, 20, 85.0, 1800.0 / 21.0),
    (7, 3, 0, 0, 70.0, 1400.0 / 17.0),
    (5, 0, 5, 5, 200.0 / 3.0, 200.0 / 3.0),
    (2, 3, 4, 1, 60.0, 50.0),
    (1, 2, 3, 4, 40.0, 25.0),
    (34, 0, 40, 0, 100.0, 100.0),
    (1, 0, 999, 0, 100.0, 100.0),
];

fn metrics_exactness() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut flags_ok = true;
    for (pt, pf, nt, nf, acc, f1) in TABLES {
        let m = compute_metrics(pt, pf, nt, nf).map_err(err)?;
        worst = worst.max((m.accuracy - acc).abs()).max((m.f1 - f1).abs());
        flags_ok &= m.precision_undefined == (pt + pf == 0) && m.recall_undefined == (pt + nf == 0);
    }
    let all_zero_rejected = compute_metrics(0, 0, 0, 0).is_err();
    Ok((
        worst <= 1e-12 && flags_ok && all_zero_rejected,
        format!(
            "{} tables, max deviation {worst:.1e}; undefined-ratio flags {}; all-zero counts rejected: {all_zero_rejected}",
            TABLES.len(),
            if flags_ok { "correct" } else { "wrong" }
        ),
    ))
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
    }
}

fn brute_force() -> Verdict {
    let mut r = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    let mut shape_errors = 0;
    let randn = |r: &mut ChaCha8Rng, n: usize| -> Vec<f64> { (0..n).map(|_| r.random_range(-1.0..1.0)).collect() };
    for _ in 0..100 {
        let (c, o) = (r.random_range(1..4usize), r.random_range(1..4usize));
        let len = r.random_range(4..40usize);
        let pad = r.random_range(0..3usize);
        let k = r.random_range(1..=(len + 2 * pad).min(9));
        let stride = r.random_range(1..4usize);
        let x = randn(&mut r, c * len);
        let w = randn(&mut r, o * c * k);
        let b = randn(&mut r, o);

        let out_len = (len + 2 * pad - k) / stride + 1;
        let mut expect = vec![0.0; o * out_len];
        for oc in 0..o {
            for t in 0..out_len {
                let mut acc = b[oc];
                for ic in 0..c {
                    for j in 0..k {
                        let pos = (t * stride + j) as isize - pad as isize;
                        if pos >= 0 && (pos as usize) < len {
                            acc += w[(oc * c + ic) * k + j] * x[ic * len + pos as usize];
                        }
                    }
                }
                expect[oc * out_len + t] = acc;
            }
        }
        let got = conv1d(
            &Tensor::new(vec![c, len], x.clone()).map_err(err)?,
            &Tensor::new(vec![o, c, k], w).map_err(err)?,
            &Tensor::vector(b).map_err(err)?,
            stride,
            pad,
        )
        .map_err(err)?;
        if got.data().len() != expect.len() {
            shape_errors += 1;
        }
        for (g, e) in got.data().iter().zip(&expect) {
            worst = worst.max(rel(*g, *e));
        }

        let size = r.random_range(1..=len.min(5));
        let pstride = r.random_range(1..4usize);
        let plen = (len - size) / pstride + 1;
        for mode in [PoolMode::Max, PoolMode::Avg] {
            let got = pool1d(&Tensor::new(vec![c, len], x.clone()).map_err(err)?, size, pstride, mode).map_err(err)?;
            if got.data().len() != c * plen {
                shape_errors += 1;
            }
            for ch in 0..c {
                for t in 0..plen {
                    let window = &x[ch * len + t * pstride..ch * len + t * pstride + size];
                    let e = match mode {
                        PoolMode::Max => window.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                        PoolMode::Avg => window.iter().sum::<f64>() / size as f64,
                    };
                    worst = worst.max(rel(got.data()[ch * plen + t], e));
                }
            }
        }

        let (din, dout) = (r.random_range(1..64usize), r.random_range(1..16usize));
        let v = randn(&mut r, din);
        let m = randn(&mut r, dout * din);
        let bias = randn(&mut r, dout);
        let got = dense(
            &Tensor::vector(v.clone()).map_err(err)?,
            &Tensor::new(vec![dout, din], m.clone()).map_err(err)?,
            &Tensor::vector(bias.clone()).map_err(err)?,
        )
        .map_err(err)?;
        for row in 0..dout {
            let mut acc = bias[row];
            for col in 0..din {
                acc += m[row * din + col] * v[col];
            }
            worst = worst.max(rel(got.data()[row], acc));
        }
    }
    Ok((
        worst <= 1e-6 && shape_errors == 0,
        format!("100 random cases of conv1d, max/avg pool1d and dense; max relative error {worst:.1e}"),
    ))
}

fn main() {
    let total = Instant::now();
    let mut passed = Vec::new();

    let t = Instant::now();
    passed.push(report(1, "gradient correctness", gradient_check(), t));
    let t = Instant::now();
    passed.push(report(2, "output-length conformance", output_length_conformance(), t));
    let t = Instant::now();
    passed.push(report(3, "parameter count", parameter_count(), t));
    let t = Instant::now();
    passed.push(report(4, "augmentation suite", augmentation_suite(), t));

    let t = Instant::now();
    let shared = corpus();
    let (verdict, model) = match &shared {
        Ok(c) => ddae_denoising(c).unwrap_or_else(|e| (Err(e), None)),
        Err(e) => (Err(e.clone()), None),
    };
    passed.push(report(5, "autoencoder denoising", verdict, t));

    let t = Instant::now();
    let splits = shared.as_ref().map_err(Clone::clone).and_then(|c| {
        task_splits(&c.entries, &builtin_task(1).map_err(err)?, RATIOS, DEFAULT_SEED).map_err(err)
    });
    let ddae_run = match (&shared, &splits, &model) {
        (Ok(c), Ok(s), Some(m)) => run_task(c, s, FeatureKind::Ddae, Some(m)),
        (Err(e), _, _) | (_, Err(e), _) => Err(e.clone()),
        _ => Err("autoencoder unavailable".into()),
    };
    let v6 = ddae_run.as_ref().map_err(Clone::clone).map(|r| {
        (
            r.train_acc >= 95.0 && r.test_acc >= 80.0,
            format!(
                "task 1, paper profile, autoencoder features, {} epochs: train clip accuracy {:.2}% (>= 95), held-out clip accuracy {:.2}% (>= 80)",
                r.epochs, r.train_acc, r.test_acc
            ),
        )
    });
    passed.push(report(6, "end-to-end learning", v6, t));

    let t = Instant::now();
    let v7 = match (&shared, &splits, &ddae_run) {
        (Ok(c), Ok(s), Ok(d)) => run_task(c, s, FeatureKind::Mfcc, None).map(|m| {
            (
                d.test_acc >= m.test_acc - 2.0,
                format!(
                    "held-out accuracy autoencoder {:.2}% vs MFCC {:.2}% (needs >= {:.2}%)",
                    d.test_acc,
                    m.test_acc,
                    m.test_acc - 2.0
                ),
            )
        }),
        (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => Err(e.clone()),
    };
    passed.push(report(7, "feature comparison", v7, t));

    let t = Instant::now();
    passed.push(report(8, "metrics exactness", metrics_exactness(), t));
    let t = Instant::now();
    passed.push(report(9, "determinism", determinism(), t));
    let t = Instant::now();
    passed.push(report(10, "brute-force equivalence", brute_force(), t));

    let n = passed.iter().filter(|&&p| p).count();
    println!(
        "acceptance: {n}/{} criteria passed in {:.1} s",
        passed.len(),
        total.elapsed().as_secs_f64()
    );
    if n != passed.len() {
        std::process::exit(1);
    }
}
