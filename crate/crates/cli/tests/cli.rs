use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn fixture(name: &str) -> String {
    fixtures().join(name).to_str().unwrap().to_string()
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wdmopt"))
        .current_dir(dir)
        .env("WDMOPT_CONFIG_DIR", fixtures())
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn data_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

const NOISELESS: &str = r#"
version = 1
first_edfa_total_input_dbm = 0.0
b2b = "b2b.csv"

[grid]
count = 4
start_thz = 192.2
spacing_ghz = 1000.0
symbol_rate_gbd = 32.0

[amplifiers.S]
kind = "stub"

[[span]]
amplifier = "S"
target_output_dbm = 0.0
length_km = 0.0
"#;

#[test]
fn noiseless_zero_length_link_returns_the_back_to_back_snr() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("link.toml"), NOISELESS).unwrap();
    fs::copy(fixtures().join("b2b.csv"), dir.path().join("b2b.csv")).unwrap();
    let text = ok(dir.path(), &["predict", "--link", "link.toml"]);
    let rows = data_rows(&text);
    // 192.2, 193.2, 194.2 and 195.2 THz; the last two fall between measured points.
    let b2b = [20.8, 21.9, 22.1 - 0.1 * 0.5 / 0.6, 21.7 - 0.5 * 0.4 / 0.5];
    assert_eq!(rows.len(), 4);
    for (r, b) in rows.iter().zip(b2b) {
        assert!((r[5] - b).abs() < 1e-9, "{r:?}");
    }
}

#[test]
fn flat_reference_profile_is_flat_at_the_configured_total() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["optimize", "--strategy", "flat-input-reference", "--out", "p.csv"]);
    assert!(out.contains("flat-input-reference"));
    let rows = data_rows(&fs::read_to_string(dir.path().join("p.csv")).unwrap());
    assert_eq!(rows.len(), 40);
    // -2 dBm over 40 channels.
    let each = -2.0 - 10.0 * 40f64.log10();
    for r in &rows {
        assert!((r[1] - each).abs() < 1e-9, "{r:?}");
    }
}

#[test]
fn repeated_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["optimize", "--strategy", "flat-snr-linear", "--iterations", "30", "--jitter", "0.3", "--seed", "9"];
    let mut files = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let mut a = args.to_vec();
        a.extend(["--out", name]);
        ok(dir.path(), &a);
        files.push(fs::read(dir.path().join(name)).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn reports_render_as_svg() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["predict", "--out", "snr.csv"]);
    ok(dir.path(), &["plot", "--report", "snr.csv", "--out", "snr.svg"]);
    let svg = fs::read_to_string(dir.path().join("snr.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn failures_print_one_line_naming_the_stage_and_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["predict", "--link", "missing.toml"]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("predict") && err.contains("missing.toml"), "{err}");

    let out = run(dir.path(), &["train", "--dataset", "none.csv", "--kind", "nf", "--out", "m.json"]);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(!out.status.success());
    assert!(err.contains("train") && err.contains("none.csv"), "{err}");
}

#[test]
fn other_file_versions_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixtures().join("default_link.toml")).unwrap();
    let text = text
        .replace("version = 1", "version = 2")
        .replace("\"b2b.csv\"", &format!("{:?}", fixture("b2b.csv")))
        .replace("\"models/", &format!("\"{}/models/", fixtures().to_str().unwrap()));
    fs::write(dir.path().join("v2.toml"), text).unwrap();
    let out = run(dir.path(), &["predict", "--link", "v2.toml"]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("v2.toml") && err.contains('2'), "{err}");

    fs::write(dir.path().join("s.csv"), "# spectrum v2\nfrequency_thz,power_dbm\n").unwrap();
    let out = run(dir.path(), &["predict", "--input", "s.csv"]);
    assert!(!out.status.success());
}

#[test]
fn help_documents_the_file_formats() {
    let text = ok(Path::new("."), &["--help"]);
    for word in ["FILE FORMATS", "snr-report", "topology", "first_edfa_total_input_dbm", "WDMOPT_CONFIG_DIR"] {
        assert!(text.contains(word), "missing {word}");
    }
}

#[test]
fn dataset_to_optimized_link_in_minutes() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let oracle = fixture("oracle_a1.toml");
    ok(d, &["gen-dataset", "--oracle", &oracle, "--out", "d.csv", "--profiles", "200", "--seed", "21"]);
    ok(d, &["train", "--dataset", "d.csv", "--kind", "gain", "--out", "g.json", "--seed", "2"]);
    ok(d, &["train", "--dataset", "d.csv", "--kind", "nf", "--out", "n.json", "--seed", "2"]);
    let link = fs::read_to_string(fixtures().join("default_link.toml"))
        .unwrap()
        .replace("\"b2b.csv\"", &format!("{:?}", fixture("b2b.csv")))
        .replace("models/a1_gain.json", "g.json")
        .replace("models/a1_nf.json", "n.json");
    fs::write(d.join("link.toml"), link).unwrap();
    ok(d, &["optimize", "--link", "link.toml", "--strategy", "flat-snr-full", "--out", "p.csv", "--report", "r.csv"]);
    ok(d, &["predict", "--link", "link.toml", "--out", "flat.csv"]);
    let min = |f: &str| {
        data_rows(&fs::read_to_string(d.join(f)).unwrap())
            .iter()
            .map(|r| r[5])
            .fold(f64::INFINITY, f64::min)
    };
    assert!(min("r.csv") > min("flat.csv") + 0.5, "{} vs {}", min("r.csv"), min("flat.csv"));
    assert!(start.elapsed() < Duration::from_secs(300), "{:?}", start.elapsed());
}
