use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_did-miss");

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("DIDMISS_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

/// Treated and control arms of `n` units each with exact response counts
/// `[r1, r2]` per arm, indexed by arm, and outcomes in `0..levels`.
fn rate_panel(n: usize, counts: [[usize; 2]; 2], levels: usize) -> String {
    let mut s = String::from("id,d,y1,y2\n");
    for d in 0..2 {
        for i in 0..n {
            let y1 = if i < counts[d][0] { format!("{}", i % levels) } else { "NA".into() };
            let y2 = if i < counts[d][1] { format!("{}", i / 2 % levels) } else { String::new() };
            writeln!(s, "{d}-{i},{d},{y1},{y2}").unwrap();
        }
    }
    s
}

#[test]
fn rates_on_published_shape() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "rates.csv", &rate_panel(10_000, [[5774, 5428], [6084, 5513]], 5));
    let out = run_in(dir.path(), &["rates", "--input", "rates.csv"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["result"]["rates"]["p_r1"][1].as_f64(), Some(0.6084));
    assert_eq!(v["result"]["rates"]["p_r2"][0].as_f64(), Some(0.5428));
    let pi11 = v["result"]["proportions"]["monotone"]["arms"][1]["always_respondent"]["lo"]
        .as_f64()
        .unwrap();
    assert!((pi11 - 0.5738).abs() < 1e-9);
}

const FULL: &str = "id,d,y1,y2,aux1\n\
    a,0,1.0,2.0,1\nb,0,2.0,2.5,0\nc,0,0.5,1.5,1\nd,1,1.0,3.0,0\ne,1,0.0,2.5,1\nf,1,2.0,3.5,0\n";

#[test]
fn cc_equals_iv_without_missingness() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "full.csv", FULL);
    let cc = json(&run_in(dir.path(), &["cc", "--input", "full.csv"]));
    let iv = json(&run_in(dir.path(), &["iv", "--input", "full.csv", "--aux", "1"]));
    let p = cc["result"]["estimate"]["point"].as_f64().unwrap();
    assert_eq!(iv["result"]["estimate"]["point"].as_f64(), Some(p));
    assert!((p - (2.0 - 2.5 / 3.0)).abs() < 1e-12);
}

#[test]
fn refusals_exit_two() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "nocontrol.csv",
        "id,d,y1,y2\na,0,1.0,NA\nb,0,NA,2.0\nc,1,1.0,2.0\nd,1,0.0,1.0\n",
    );
    let out = run_in(dir.path(), &["bounds", "--input", "nocontrol.csv", "--mode", "monotone"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["status"], "refused");
    assert!(v["diagnostics"]["refusal"].as_str().unwrap().contains("no complete cases"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("refused"));

    // Missingness identical across instrument values.
    write(
        dir.path(),
        "weak.csv",
        "id,d,y1,y2,aux1\na,0,1,2,0\nb,0,1,NA,0\nc,0,1,3,1\nd,0,1,NA,1\n\
         e,1,1,2,0\nf,1,1,NA,0\ng,1,1,4,1\nh,1,1,NA,1\n",
    );
    let out = run_in(dir.path(), &["iv", "--input", "weak.csv", "--aux", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(json(&out)["diagnostics"]["refusal"].as_str().unwrap().contains("weak instrument"));
}

#[test]
fn input_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "bad.csv", "id,d,y1,y2\na,2,1,2\nb,0,1,2\n");
    write(dir.path(), "full.csv", FULL);
    let cases: &[&[&str]] = &[
        &["cc", "--input", "bad.csv"],
        &["cc", "--input", "missing.csv"],
        &["cc", "--input", "full.csv", "--bogus"],
        &["iv", "--input", "full.csv", "--aux", "3"],
        &["bounds", "--input", "full.csv", "--mode", "sideways"],
        &["cc", "--input", "full.csv", "--support", "1", "0"],
        &["cc", "--input", "full.csv", "--bootstrap", "10", "--level", "1.5"],
        &["simulate", "--preset", "nope", "--out", "x.csv"],
        &["frobnicate"],
    ];
    for args in cases {
        let out = run_in(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty(), "{args:?}");
    }
    let out = run_in(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn support_fallback_reports_full_range() {
    let dir = TempDir::new().unwrap();
    // Treated: 30% baseline and 35% follow-up response; control 80% / 85%.
    write(dir.path(), "gov.csv", &rate_panel(1000, [[814, 854], [302, 352]], 2));
    let out = run_in(
        dir.path(),
        &["bounds", "--input", "gov.csv", "--mode", "no-monotone", "--support", "0", "1"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["diagnostics"]["support_fallback"], true);
    assert_eq!(v["result"]["lb"].as_f64(), Some(-1.0));
    assert_eq!(v["result"]["ub"].as_f64(), Some(1.0));

    let out = run_in(dir.path(), &["bounds", "--input", "gov.csv", "--mode", "no-monotone"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_schema_is_stable() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "full.csv", FULL);
    let v = json(&run_in(dir.path(), &["cc", "--input", "full.csv"]));
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(
        keys,
        ["command", "diagnostics", "fingerprint", "result", "seed", "status", "version"]
    );
    let fp: Vec<&str> = v["fingerprint"].as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(fp, ["arm_sizes", "aux_arity", "covariate_arity", "rates", "rows"]);
}

#[test]
fn pretty_prints_aligned_table() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "full.csv", FULL);
    let out = run_in(dir.path(), &["cc", "--input", "full.csv", "--pretty"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().find(|l| l.starts_with("result.estimate.point")).unwrap();
    let col = |l: &str| l.len() - l.split_whitespace().last().unwrap().len();
    assert!(text.lines().filter(|l| !l.contains('[')).all(|l| col(l) == col(line)));
}

fn simulate(dir: &Path, preset: &str, n: &str, seed: &str, name: &str) {
    let out = run_in(
        dir,
        &["simulate", "--preset", preset, "--n", n, "--seed", seed, "--out", name, "--truth", "truth.json"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn pipeline_is_reproducible_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path(), "homogeneous-bias", "2000", "5", "a.csv");
    let first = std::fs::read(dir.path().join("a.csv")).unwrap();
    simulate(dir.path(), "homogeneous-bias", "2000", "5", "a.csv");
    assert_eq!(std::fs::read(dir.path().join("a.csv")).unwrap(), first);

    let commands: &[&[&str]] = &[
        &["cc", "--input", "a.csv", "--bootstrap", "200", "--seed", "9"],
        &["iv", "--input", "a.csv", "--aux", "1", "--bootstrap", "200", "--seed", "9"],
        &["bounds", "--input", "a.csv", "--bootstrap", "200", "--seed", "9"],
        &["pi", "--input", "a.csv", "--bootstrap", "200", "--seed", "9"],
    ];
    for args in commands {
        let outputs: Vec<Vec<u8>> = ["1", "4"]
            .iter()
            .map(|t| {
                let out = Command::new(BIN)
                    .args(*args)
                    .current_dir(dir.path())
                    .env("DIDMISS_THREADS", t)
                    .output()
                    .unwrap();
                assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
                out.stdout
            })
            .collect();
        assert_eq!(outputs[0], outputs[1], "{args:?}");
    }

    let out = Command::new(BIN)
        .args(["cc", "--input", "a.csv"])
        .current_dir(dir.path())
        .env("DIDMISS_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

fn ok(out: Output) -> Vec<u8> {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

/// Compare against `tests/golden/<name>.json`; set `UPDATE_GOLDEN=1` to
/// rewrite the file.
fn golden(name: &str, bytes: Vec<u8>) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.json"));
    let got = String::from_utf8(bytes).unwrap();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &got).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(got, want, "{name} differs from {}", path.display());
}

#[test]
fn golden_reports() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    simulate(d, "monotone", "400", "7", "mono.csv");
    golden("simulate_truth", std::fs::read(d.join("truth.json")).unwrap());
    golden("cc", ok(run_in(d, &["cc", "--input", "mono.csv", "--bootstrap", "100", "--seed", "3"])));
    golden("bounds", ok(run_in(d, &["bounds", "--input", "mono.csv", "--bootstrap", "100", "--seed", "3"])));
    golden("bounds_no_monotone", ok(run_in(d, &["bounds", "--input", "mono.csv", "--mode", "no-monotone"])));
    golden("rates", ok(run_in(d, &["rates", "--input", "mono.csv"])));

    simulate(d, "multi-iv", "400", "7", "multi.csv");
    golden("iv", ok(run_in(d, &["iv", "--input", "multi.csv", "--aux", "1"])));
    golden("iv_pair", ok(run_in(d, &["iv", "--input", "multi.csv", "--aux", "1", "--aux2", "2"])));

    simulate(d, "pi", "400", "7", "pi.csv");
    golden("pi", ok(run_in(d, &["pi", "--input", "pi.csv"])));

    golden("decompose", ok(run_in(d, &["decompose", "--preset", "mnar-baseline", "--n", "400", "--seed", "7"])));
}
