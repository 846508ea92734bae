use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use fdms_cli::monitor::MonitorEvent;
use fdms_core::datasets::{read_pgm, wav_bytes};
use fdms_core::{FaultClass, Modality};
use serde_json::Value;

fn fdms(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdms"))
        .args(args)
        .env_remove("FDMS_SEED")
        .output()
        .expect("run fdms")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small three-class corpus with one model per modality, built once.
struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    manifest: PathBuf,
}

impl Fixture {
    fn model(&self, m: Modality) -> PathBuf {
        self.root.join(format!("{m}.model"))
    }

    fn scene(&self, name: &str) -> PathBuf {
        self.root.join("corpus/scenes").join(name)
    }
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let corpus = root.join("corpus");
        let out = fdms(&[
            "simulate",
            "--classes",
            "normal,material_runout,nozzle_clog",
            "--count",
            "4",
            "--seed",
            "3",
            "--duration",
            "4",
            "--out",
            s(&corpus),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let manifest = corpus.join("manifest.json");
        for m in Modality::ALL {
            let model = root.join(format!("{m}.model"));
            let out = fdms(&[
                "train",
                "--manifest",
                s(&manifest),
                "--modality",
                &m.to_string(),
                "--epochs",
                "2",
                "--seed",
                "3",
                "--model-out",
                s(&model),
            ]);
            assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        }
        Fixture {
            _dir: dir,
            root,
            manifest,
        }
    })
}

fn manifest_hash(stdout: &[u8]) -> String {
    let text = String::from_utf8_lossy(stdout);
    text.split("manifest_sha256=")
        .nth(1)
        .expect("hash in output")
        .trim()
        .to_string()
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = fdms(&[
            "simulate",
            "--classes",
            "normal,layer_shift",
            "--count",
            "2",
            "--seed",
            seed,
            "--duration",
            "1",
            "--out",
            s(&dir.path().join(name)),
        ]);
        assert_eq!(code(&out), 0);
        manifest_hash(&out.stdout)
    };
    let a = run("a", "5");
    assert_eq!(a, run("b", "5"));
    run("c", "6");
    let audio =
        |name: &str| fs::read(dir.path().join(name).join("scenes/normal_0000/audio.wav")).unwrap();
    assert_eq!(audio("a"), audio("b"));
    assert_ne!(audio("a"), audio("c"));
}

#[test]
fn simulate_seed_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fdms"))
        .args([
            "simulate",
            "--classes",
            "normal",
            "--count",
            "1",
            "--duration",
            "1",
            "--out",
            s(&dir.path().join("e")),
        ])
        .env("FDMS_SEED", "5")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("seed=5"));

    let bad = Command::new(env!("CARGO_BIN_EXE_fdms"))
        .args([
            "simulate",
            "--count",
            "1",
            "--out",
            s(&dir.path().join("f")),
        ])
        .env("FDMS_SEED", "minus one")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn simulate_rejects_unknown_class() {
    let dir = tempfile::tempdir().unwrap();
    let out = fdms(&[
        "simulate",
        "--classes",
        "normal,melted",
        "--count",
        "1",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("melted") && err.contains("material_runout"),
        "{err}"
    );
    assert_eq!(
        code(&fdms(&["simulate", "--count", "0", "--out", s(dir.path())])),
        2
    );
    assert_eq!(code(&fdms(&["simulate", "--bogus"])), 2);
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&fdms(&["--help"])), 0);
    assert_eq!(code(&fdms(&["monitor", "--help"])), 0);
}

#[test]
fn train_single_scene_class_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    let out = fdms(&[
        "simulate",
        "--classes",
        "normal,nozzle_clog",
        "--count",
        "2",
        "--seed",
        "1",
        "--duration",
        "1",
        "--out",
        s(&corpus),
    ]);
    assert_eq!(code(&out), 0);
    let path = corpus.join("manifest.json");
    let mut m: Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    m["entries"]
        .as_array_mut()
        .unwrap()
        .retain(|e| e["scene_id"] != "nozzle_clog_0001");
    fs::write(&path, serde_json::to_vec(&m).unwrap()).unwrap();
    let out = fdms(&[
        "train",
        "--manifest",
        s(&path),
        "--modality",
        "acoustic",
        "--epochs",
        "1",
        "--model-out",
        s(&dir.path().join("m")),
    ]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nozzle_clog (1)"));
}

#[test]
fn train_writes_model_and_history() {
    let f = fixture();
    for m in Modality::ALL {
        assert!(f.model(m).is_file());
        let history = fs::read_to_string(f.model(m).with_extension("history.csv")).unwrap();
        let lines: Vec<&str> = history.lines().collect();
        assert_eq!(lines.len(), 3, "{history}");
        assert!(lines[0].starts_with("epoch,"));
    }
}

#[test]
fn evaluate_reports_consistent_counts() {
    let f = fixture();
    let out = fdms(&[
        "evaluate",
        "--manifest",
        s(&f.manifest),
        "--acoustic-model",
        s(&f.model(Modality::Acoustic)),
        "--vibration-model",
        s(&f.model(Modality::Vibration)),
        "--thermal-model",
        s(&f.model(Modality::Thermal)),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["samples"], 12);
    assert_eq!(v["subset"], "all");
    let acc = v["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    let total: u64 = v["confusion"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|row| row.as_array().unwrap().iter().map(|c| c.as_u64().unwrap()))
        .sum();
    assert_eq!(total, 12);
    assert_eq!(v["per_modality"].as_object().unwrap().len(), 3);

    let val = fdms(&[
        "evaluate",
        "--manifest",
        s(&f.manifest),
        "--acoustic-model",
        s(&f.model(Modality::Acoustic)),
        "--subset",
        "val",
        "--seed",
        "3",
    ]);
    assert_eq!(code(&val), 0);
    let v: Value = serde_json::from_slice(&val.stdout).unwrap();
    assert_eq!(v["samples"], 3);
}

#[test]
fn evaluate_rejects_class_mismatch_and_empty_manifest() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let other = dir.path().join("other");
    assert_eq!(
        code(&fdms(&[
            "simulate",
            "--classes",
            "normal,layer_shift",
            "--count",
            "2",
            "--duration",
            "1",
            "--out",
            s(&other)
        ])),
        0
    );
    let out = fdms(&[
        "evaluate",
        "--manifest",
        s(&other.join("manifest.json")),
        "--acoustic-model",
        s(&f.model(Modality::Acoustic)),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("layer_shift"));

    let empty = dir.path().join("empty.json");
    let mut m: Value =
        serde_json::from_slice(&fs::read(other.join("manifest.json")).unwrap()).unwrap();
    m["entries"] = Value::Array(vec![]);
    fs::write(&empty, serde_json::to_vec(&m).unwrap()).unwrap();
    let out = fdms(&[
        "evaluate",
        "--manifest",
        s(&empty),
        "--acoustic-model",
        s(&f.model(Modality::Acoustic)),
    ]);
    assert_eq!(code(&out), 2);

    assert_eq!(code(&fdms(&["evaluate", "--manifest", s(&f.manifest)])), 2);
    let missing = fdms(&[
        "evaluate",
        "--manifest",
        s(&dir.path().join("nope.json")),
        "--acoustic-model",
        s(&f.model(Modality::Acoustic)),
    ]);
    assert_eq!(code(&missing), 1);
}

fn events(text: &[u8]) -> Vec<MonitorEvent> {
    String::from_utf8_lossy(text)
        .lines()
        .map(|l| serde_json::from_str(l).expect(l))
        .collect()
}

#[test]
fn monitor_hybrid_emits_one_event_per_second() {
    let f = fixture();
    let out = fdms(&[
        "monitor",
        "--scene",
        s(&f.scene("nozzle_clog_0000")),
        "--acoustic-model",
        s(&f.model(Modality::Acoustic)),
        "--vibration-model",
        s(&f.model(Modality::Vibration)),
        "--thermal-model",
        s(&f.model(Modality::Thermal)),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let ev = events(&out.stdout);
    // A 4 s scene has windows ending at 2, 3 and 4 s.
    assert_eq!(
        ev.iter().map(|e| e.ts_ms).collect::<Vec<_>>(),
        [2000, 3000, 4000]
    );
    for (i, e) in ev.iter().enumerate() {
        assert_eq!(e.window_id, i as u64);
        assert_eq!(e.scores.len(), 3);
        assert!(e.error.is_none());
        let fused = e.fused.as_ref().unwrap();
        assert_eq!(fused.len(), 3);
        assert!(fused.values().all(|p| (0.0..=1.0).contains(p)));
        assert_eq!(e.modalities_used.len(), 3);
    }
}

#[test]
fn monitor_baseline_uses_audio_only() {
    let f = fixture();
    let out_path = f.root.join("baseline.jsonl");
    let out = fdms(&[
        "monitor",
        "--preset",
        "baseline",
        "--audio",
        s(&f.scene("normal_0000").join("audio.wav")),
        "--acoustic-model",
        s(&f.model(Modality::Acoustic)),
        "--out",
        s(&out_path),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read(&out_path).unwrap();
    let ev = events(&text);
    assert!(!ev.is_empty());
    for line in String::from_utf8_lossy(&text).lines() {
        assert!(
            !line.contains("vibration") && !line.contains("thermal"),
            "{line}"
        );
    }
    assert!(ev.iter().all(|e| e.modalities_used == [Modality::Acoustic]));
}

#[test]
fn monitor_reports_bad_rows_and_keeps_going() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let src = fs::read_to_string(f.scene("normal_0001").join("vibration.csv")).unwrap();
    let mut lines: Vec<String> = src.lines().map(str::to_string).collect();
    lines[300] = "oops,1,2".into();
    let csv = dir.path().join("vibration.csv");
    fs::write(&csv, lines.join("\n") + "\n").unwrap();
    let out = fdms(&[
        "monitor",
        "--preset",
        "hybrid",
        "--audio",
        s(&f.scene("normal_0001").join("audio.wav")),
        "--vibration",
        s(&csv),
        "--thermal",
        s(&f.scene("normal_0001").join("thermal")),
        "--acoustic-model",
        s(&f.model(Modality::Acoustic)),
        "--vibration-model",
        s(&f.model(Modality::Vibration)),
        "--thermal-model",
        s(&f.model(Modality::Thermal)),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let ev = events(&out.stdout);
    let errors: Vec<&MonitorEvent> = ev.iter().filter(|e| e.error.is_some()).collect();
    assert_eq!(errors.len(), 1, "{ev:?}");
    assert!(errors[0].error.as_ref().unwrap().contains("vibration"));
    assert_eq!(ev.last().unwrap().ts_ms, 4000);
    assert!(ev.windows(2).all(|w| w[0].ts_ms < w[1].ts_ms));
}

#[test]
fn monitor_usage_errors() {
    let f = fixture();
    let scene = f.scene("normal_0000");
    let missing = fdms(&[
        "monitor",
        "--scene",
        s(&scene),
        "--acoustic-model",
        s(&f.root.join("absent.model")),
    ]);
    assert_eq!(code(&missing), 2);
    // Hybrid needs all three models.
    let partial = fdms(&[
        "monitor",
        "--scene",
        s(&scene),
        "--acoustic-model",
        s(&f.model(Modality::Acoustic)),
    ]);
    assert_eq!(code(&partial), 2);
    let both = fdms(&["monitor", "--scene", s(&scene), "--audio", "x.wav"]);
    assert_eq!(code(&both), 2);
}

#[test]
fn monitor_config_controls_threshold() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let run = |cfg: &str| {
        let path = dir.path().join("cfg.toml");
        fs::write(&path, cfg).unwrap();
        fdms(&[
            "monitor",
            "--preset",
            "baseline",
            "--scene",
            s(&f.scene("material_runout_0000")),
            "--acoustic-model",
            s(&f.model(Modality::Acoustic)),
            "--config",
            s(&path),
        ])
    };
    // With a near-zero threshold every window whose top class is a fault
    // gets flagged.
    let out = run("[fusion]\nthreshold = 0.0001\ndebounce_k = 1\n");
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for e in events(&out.stdout) {
        let fused = e.fused.unwrap();
        let top = *fused.iter().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        let want = (top != FaultClass::Normal).then_some(top);
        assert_eq!(e.flagged, want);
    }
    assert_eq!(code(&run("[fusion]\nthreshold = 2.0\n")), 2);
    assert_eq!(code(&run("[fusion]\nsurprise = 1\n")), 2);
    assert_eq!(code(&run("not toml at all ===")), 2);
}

#[test]
fn inspect_audio_writes_spectrograms() {
    let dir = tempfile::tempdir().unwrap();
    let rate = 16000u32;
    // A 20 Hz hum plus a 500 Hz tone.
    let x: Vec<f64> = (0..rate as usize * 2)
        .map(|i| {
            let t = i as f64 / f64::from(rate);
            0.4 * (2.0 * std::f64::consts::PI * 20.0 * t).sin()
                + 0.2 * (2.0 * std::f64::consts::PI * 500.0 * t).sin()
        })
        .collect();
    let wav = dir.path().join("hum.wav");
    fs::write(&wav, wav_bytes(&[&x, &x], rate).unwrap()).unwrap();
    let out_dir = dir.path().join("out");
    let out = fdms(&["inspect", s(&wav), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["spectrogram_raw.pgm", "spectrogram_filtered.pgm"] {
        read_pgm(&out_dir.join(name), 0).unwrap();
    }
    let bin_mean_db = |name: &str, freq: f64| {
        let text = fs::read_to_string(out_dir.join(name)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("time_s,freq_hz,magnitude"));
        let rows: Vec<Vec<f64>> = lines
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        // Bin nearest the requested frequency.
        let bin = rows
            .iter()
            .map(|c| c[1])
            .min_by(|a, b| (a - freq).abs().total_cmp(&(b - freq).abs()))
            .unwrap();
        let mags: Vec<f64> = rows.iter().filter(|c| c[1] == bin).map(|c| c[2]).collect();
        assert!(!mags.is_empty());
        20.0 * (mags.iter().sum::<f64>() / mags.len() as f64).log10()
    };
    let hum_drop =
        bin_mean_db("spectrogram_raw.csv", 20.0) - bin_mean_db("spectrogram_filtered.csv", 20.0);
    assert!(hum_drop >= 20.0, "20 Hz fell only {hum_drop:.1} dB");
    let tone_drop =
        bin_mean_db("spectrogram_raw.csv", 500.0) - bin_mean_db("spectrogram_filtered.csv", 500.0);
    assert!(tone_drop.abs() < 1.0, "500 Hz changed {tone_drop:.1} dB");
}

#[test]
fn inspect_vibration_and_thermal() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let scene = f.scene("normal_0000");
    let out = fdms(&[
        "inspect",
        s(&scene.join("vibration.csv")),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let fft = fs::read_to_string(dir.path().join("vibration_fft.csv")).unwrap();
    assert!(fft.starts_with("freq_hz,x,y,z\n"));

    let frame = fs::read_dir(scene.join("thermal"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    let out = fdms(&["inspect", s(&frame), "--out", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let img = read_pgm(&dir.path().join("thermal_input.pgm"), 0).unwrap();
    assert_eq!((img.width(), img.height()), (64, 64));
    assert!(dir.path().join("thermal_rows.csv").is_file());
}

#[test]
fn inspect_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&fdms(&[
            "inspect",
            s(&dir.path().join("none.wav")),
            "--out",
            s(dir.path())
        ])),
        1
    );
    let odd = dir.path().join("data.xyz");
    fs::write(&odd, b"123").unwrap();
    assert_eq!(
        code(&fdms(&["inspect", s(&odd), "--out", s(dir.path())])),
        1
    );
    let junk = dir.path().join("junk.wav");
    fs::write(&junk, b"RIFFxxxxWAVE").unwrap();
    assert_eq!(
        code(&fdms(&["inspect", s(&junk), "--out", s(dir.path())])),
        1
    );
}
