//! End-to-end runs of the `lmstego` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lmstego"));
    for (k, _) in std::env::vars() {
        if k.starts_with("STEG_") {
            c.env_remove(k);
        }
    }
    c
}

fn fixture(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "tests", "fixtures", name]
        .iter()
        .collect()
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    if !out.status.success() {
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn train(dir: &Path, order: &str) -> PathBuf {
    let model = dir.join(format!("model{order}.nglm"));
    let out = run(bin()
        .args(["train", "--order", order, "--corpus"])
        .arg(fixture("corpus.txt"))
        .arg("--out")
        .arg(&model));
    assert!(out.status.success());
    model
}

struct Case<'a> {
    flags: &'a [&'a str],
    hide_only: &'a [&'a str],
    stego_format: &'a str,
}

fn round_trip(model: &Path, dir: &Path, payload: &[u8], case: &Case<'_>) {
    let bits_in = dir.join("payload.bin");
    std::fs::write(&bits_in, payload).unwrap();
    let stego = dir.join("stego.txt");
    let out = run(bin()
        .arg("hide")
        .arg("--model")
        .arg(model)
        .args(case.flags)
        .args(case.hide_only)
        .args([
            "--seed-text",
            "the old man",
            "--stegotext",
            case.stego_format,
        ])
        .arg("--bits-in")
        .arg(&bits_in)
        .arg("--out")
        .arg(&stego));
    assert!(out.status.success(), "hide {:?}", case.flags);
    let diag = std::fs::read_to_string(dir.join("stego.txt.diag.csv")).unwrap();
    assert!(diag.starts_with("step,kl_bits,tvd,bits_embedded,encoded,"));

    let recovered = dir.join("recovered.bin");
    let mut seek = bin();
    seek.arg("seek")
        .arg("--model")
        .arg(model)
        .args(case.flags)
        .args([
            "--seed-text",
            "the old man",
            "--stegotext",
            case.stego_format,
        ])
        .arg("--stegotext-in")
        .arg(&stego)
        .arg("--bits-out")
        .arg(&recovered);
    if !case.flags.contains(&"--length-header") {
        seek.args(["--bits-len", &(8 * payload.len()).to_string()]);
    }
    let out = run(&mut seek);
    assert!(out.status.success(), "seek {:?}", case.flags);
    assert_eq!(
        std::fs::read(&recovered).unwrap(),
        payload,
        "{:?}",
        case.flags
    );
}

#[test]
fn hide_seek_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let model = train(dir.path(), "2");
    let payload = b"meet me by the sea wall";
    let cases = [
        Case {
            flags: &["--algo", "bins", "--k", "2", "--partition-seed", "7"],
            hide_only: &[],
            stego_format: "text",
        },
        Case {
            flags: &["--algo", "bins", "--k", "4", "--length-header"],
            hide_only: &[],
            stego_format: "ids",
        },
        Case {
            flags: &["--algo", "vlc"],
            hide_only: &[],
            stego_format: "text",
        },
        Case {
            flags: &["--algo", "vlc", "--length-header"],
            hide_only: &["--trailing-tokens", "5"],
            stego_format: "text",
        },
        Case {
            flags: &["--algo", "patient", "--delta", "0.3", "--rng-seed", "3"],
            hide_only: &[],
            stego_format: "ids",
        },
        Case {
            flags: &["--algo", "patient", "--delta", "0.5", "--divergence", "kl"],
            hide_only: &[],
            stego_format: "text",
        },
        Case {
            flags: &[
                "--algo",
                "vlc",
                "--xor-key",
                "hunter2",
                "--huffman-weights",
                "quantized",
            ],
            hide_only: &[],
            stego_format: "text",
        },
    ];
    for case in &cases {
        round_trip(&model, dir.path(), payload, case);
    }
}

#[test]
fn hex_payload_with_odd_length() {
    let dir = tempfile::tempdir().unwrap();
    let model = train(dir.path(), "3");
    std::fs::write(dir.path().join("p.hex"), "c0ffee1\n").unwrap();
    let stego = dir.path().join("s.txt");
    let out = run(bin()
        .args([
            "hide",
            "--bits-format",
            "hex",
            "--bits-len",
            "26",
            "--algo",
            "bins",
            "--k",
            "3",
        ])
        .arg("--model")
        .arg(&model)
        .arg("--bits-in")
        .arg(dir.path().join("p.hex"))
        .arg("--out")
        .arg(&stego));
    assert!(out.status.success());
    let back = dir.path().join("back.hex");
    let out = run(bin()
        .args([
            "seek",
            "--bits-format",
            "hex",
            "--bits-len",
            "26",
            "--algo",
            "bins",
            "--k",
            "3",
        ])
        .arg("--model")
        .arg(&model)
        .arg("--stegotext-in")
        .arg(&stego)
        .arg("--bits-out")
        .arg(&back));
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(&back).unwrap(), "c0ffee00\n");
    assert_eq!(
        std::fs::read_to_string(dir.path().join("back.hex.bitlen")).unwrap(),
        "26\n"
    );

    // the sidecar makes the recovered file a valid payload again
    let out = run(bin()
        .args([
            "hide",
            "--bits-format",
            "hex",
            "--algo",
            "bins",
            "--k",
            "3",
            "--no-diagnostics",
        ])
        .arg("--model")
        .arg(&model)
        .arg("--bits-in")
        .arg(&back)
        .arg("--out")
        .arg(dir.path().join("s2.txt")));
    assert!(out.status.success());
    assert_eq!(
        std::fs::read(&stego).unwrap(),
        std::fs::read(dir.path().join("s2.txt")).unwrap()
    );
}

#[test]
fn mismatched_k_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let model = train(dir.path(), "2");
    std::fs::write(dir.path().join("p.bin"), [0x5a; 6]).unwrap();
    let stego = dir.path().join("s.txt");
    assert!(run(bin()
        .args(["hide", "--algo", "bins", "--k", "3"])
        .arg("--model")
        .arg(&model)
        .arg("--bits-in")
        .arg(dir.path().join("p.bin"))
        .arg("--out")
        .arg(&stego))
    .status
    .success());
    let out = bin()
        .args(["seek", "--algo", "bins", "--k", "1", "--bits-len", "48"])
        .arg("--model")
        .arg(&model)
        .arg("--stegotext-in")
        .arg(&stego)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("parameter mismatch suspected"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let model = train(dir.path(), "2");
    std::fs::write(dir.path().join("p.bin"), [1u8]).unwrap();
    let base = |extra: &[&str]| {
        bin()
            .arg("hide")
            .arg("--model")
            .arg(&model)
            .arg("--bits-in")
            .arg(dir.path().join("p.bin"))
            .args(extra)
            .output()
            .unwrap()
    };
    let out = base(&["--algo", "patient", "--delta", "0", "--no-diagnostics"]);
    assert_eq!(out.status.code(), Some(2));
    let out = base(&["--algo", "bins", "--k", "20", "--no-diagnostics"]);
    assert_eq!(out.status.code(), Some(2));
    // stdout stegotext needs an explicit diagnostics decision
    let out = base(&[]);
    assert_eq!(out.status.code(), Some(2));
    let out = bin()
        .args(["seek", "--stegotext-in", "x"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn data_and_backend_errors() {
    let dir = tempfile::tempdir().unwrap();
    let model = train(dir.path(), "2");
    std::fs::write(dir.path().join("p.bin"), [1u8]).unwrap();

    let out = bin()
        .args(["hide", "--no-diagnostics", "--seed-text", "zebra"])
        .arg("--model")
        .arg(&model)
        .arg("--bits-in")
        .arg(dir.path().join("p.bin"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    let mut bytes = std::fs::read(&model).unwrap();
    bytes[20] ^= 1;
    let broken = dir.path().join("broken.nglm");
    std::fs::write(&broken, bytes).unwrap();
    let out = bin()
        .args(["hide", "--no-diagnostics"])
        .arg("--model")
        .arg(&broken)
        .arg("--bits-in")
        .arg(dir.path().join("p.bin"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum"));

    let out = bin()
        .args(["hide", "--no-diagnostics", "--bridge-cmd", "exit 1"])
        .arg("--bits-in")
        .arg(dir.path().join("p.bin"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn environment_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let model = train(dir.path(), "2");
    std::fs::write(dir.path().join("p.bin"), b"hi").unwrap();
    let cfg = dir.path().join("steg.toml");
    std::fs::write(&cfg, "algo = \"bins\"\nk = 1\nlength-header = true\n").unwrap();

    let hide = |env_k: Option<&str>, out: &str| {
        let mut c = bin();
        c.arg("hide")
            .arg("--config")
            .arg(&cfg)
            .arg("--model")
            .arg(&model)
            .arg("--bits-in")
            .arg(dir.path().join("p.bin"))
            .arg("--no-diagnostics")
            .arg("--out")
            .arg(dir.path().join(out));
        if let Some(k) = env_k {
            c.env("STEG_K", k);
        }
        assert!(run(&mut c).status.success());
        std::fs::read_to_string(dir.path().join(out)).unwrap()
    };
    let from_config = hide(None, "a.txt");
    let from_env = hide(Some("2"), "b.txt");
    assert_eq!(from_config.split_whitespace().count(), 16 + 32);
    assert_eq!(from_env.split_whitespace().count(), (16 + 32) / 2);
}

#[test]
fn bridge_backend_round_trip() {
    if Command::new("python3").arg("--version").output().is_err() {
        eprintln!("python3 not available; skipping");
        return;
    }
    let script: PathBuf = [
        env!("CARGO_MANIFEST_DIR"),
        "..",
        "core",
        "tests",
        "fixtures",
        "fake_bridge.py",
    ]
    .iter()
    .collect();
    let cmd = format!("python3 {}", script.display());
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.bin"), b"\x9c").unwrap();
    let stego = dir.path().join("s.txt");
    assert!(run(bin()
        .args(["hide", "--bridge-cmd", &cmd, "--seed-text", "the cat"])
        .arg("--bits-in")
        .arg(dir.path().join("p.bin"))
        .arg("--out")
        .arg(&stego))
    .status
    .success());
    let out = run(bin()
        .args([
            "seek",
            "--bridge-cmd",
            &cmd,
            "--seed-text",
            "the cat",
            "--bits-len",
            "8",
        ])
        .arg("--stegotext-in")
        .arg(&stego));
    assert!(out.status.success());
    assert_eq!(out.stdout, b"\x9c");
}

const GOLDEN_ARGS: &[&str] = &[
    "analyze",
    "--prefixes",
    "6",
    "--steps",
    "8",
    "--k",
    "1,3",
    "--rng-seed",
    "11",
    "--partition-seed",
    "5",
];

#[test]
fn analyze_matches_golden_table() {
    let dir = tempfile::tempdir().unwrap();
    let model = train(dir.path(), "2");
    let summary = dir.path().join("summary.csv");
    let hist = dir.path().join("hist.csv");
    let out = run(bin()
        .args(GOLDEN_ARGS)
        .arg("--model")
        .arg(&model)
        .arg("--summary-out")
        .arg(&summary)
        .arg("--histogram-out")
        .arg(&hist));
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("prefix,step,algo,param,kl_bits,tvd\n"));
    assert_eq!(table.lines().count(), 1 + 6 * 8 * 3);

    for line in table.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let kl: f64 = f[4].parse().unwrap();
        let bound = match (f[2], f[3]) {
            ("bins", k) => k.trim_start_matches("k=").parse::<f64>().unwrap(),
            _ => 1.0 + 1e-9,
        };
        assert!((0.0..=bound).contains(&kl), "{line}");
    }

    let golden = fixture("analyze_golden.csv");
    if std::env::var_os("LMSTEGO_UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden, &table).unwrap();
    }
    let expected = std::fs::read_to_string(&golden).expect("golden table present");
    assert_eq!(table, expected);
    assert!(std::fs::read_to_string(summary)
        .unwrap()
        .contains("vlc,huffman,kl_bits,"));
    assert!(std::fs::read_to_string(hist).unwrap().lines().count() > 1);
}
