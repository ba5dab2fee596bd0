//! End-to-end tests of the `vinf` binary.
//!
//! Golden help files live in `tests/golden/`; regenerate them with
//! `VINF_UPDATE_GOLDEN=1 cargo test --test cli`.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SUBCOMMANDS: [&str; 11] = [
    "gen-model",
    "commit-model",
    "trace",
    "prove",
    "challenge",
    "respond",
    "verify",
    "referee",
    "estimate",
    "attack",
    "bench",
];

fn vinf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vinf")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json_stdout(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", stdout(o)))
}

fn json_stderr(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {}", String::from_utf8_lossy(&o.stderr)))
}

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name).display().to_string()
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

fn check_golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.txt"));
    if std::env::var_os("VINF_UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert_eq!(actual, expected, "help output of {name} drifted from {}", path.display());
}

#[test]
fn help_output_matches_golden_files() {
    let top = vinf(&["--help"]);
    assert!(top.status.success());
    check_golden("vinf", &stdout(&top));
    for sub in SUBCOMMANDS {
        let o = vinf(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub} --help");
        check_golden(sub, &stdout(&o));
    }
}

#[test]
fn help_lists_every_subcommand() {
    let text = stdout(&vinf(&["--help"]));
    for sub in SUBCOMMANDS {
        assert!(text.contains(sub), "{sub} missing from top-level help");
    }
}

#[test]
fn usage_errors_exit_2_with_json() {
    for args in [vec!["frobnicate"], vec!["gen-model", "--arch", "4"], vec!["verify"]] {
        let o = vinf(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert_eq!(json_stderr(&o)["error"]["kind"], "usage");
    }
}

#[test]
fn missing_files_exit_3() {
    let o = vinf(&["commit-model", "--model", "/nonexistent/model.json"]);
    assert_eq!(o.status.code(), Some(3));
    let err = json_stderr(&o);
    assert_eq!(err["error"]["kind"], "io");
    assert!(err["error"]["message"].as_str().unwrap().contains("/nonexistent/model.json"));
}

#[test]
fn gen_model_is_deterministic_given_a_seed() {
    let dir = TempDir::new().unwrap();
    for name in ["a.json", "b.json"] {
        let o = vinf(&["gen-model", "--arch", "4,8,3", "--out-fn", "softmax", "--seed", "5", "--out", &p(&dir, name)]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(p(&dir, "a.json")).unwrap(), std::fs::read(p(&dir, "b.json")).unwrap());
    let o = vinf(&["gen-model", "--arch", "4,8,3", "--seed", "5", "--out", &p(&dir, "c.bin")]);
    assert!(o.status.success());
    let json = stdout(&vinf(&["commit-model", "--model", &p(&dir, "a.json")]));
    assert_eq!(json.trim().len(), 64);
}

#[test]
fn three_round_protocol_through_files() {
    let dir = TempDir::new().unwrap();
    let model = fixture("f1_2_2_2.json");
    std::fs::write(p(&dir, "q.json"), "[0.25, -0.5]").unwrap();
    let q = p(&dir, "q.json");

    let o = vinf(&["prove", "--model", &model, "--query", &q, "--num-paths", "2", "--out", &p(&dir, "1.txn")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = vinf(&["challenge", "--transcript", &p(&dir, "1.txn"), "--seed", "7", "--out", &p(&dir, "2.txn")]);
    assert!(o.status.success());
    let rho = json_stdout(&o)["rho"].as_str().unwrap().to_string();
    let o = vinf(&["respond", "--model", &model, "--transcript", &p(&dir, "2.txn"), "--num-paths", "2", "--out", &p(&dir, "3.txn")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let cm = stdout(&vinf(&["commit-model", "--model", &model, "--num-paths", "2"])).trim().to_string();
    let o = vinf(&["verify", "--transcript", &p(&dir, "3.txn"), "--num-paths", "2", "--commitment", &cm]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json_stdout(&o)["accept"], true);

    // Same challenge from an explicit hex value gives the same transcript.
    let o = vinf(&["challenge", "--transcript", &p(&dir, "1.txn"), "--rho", &rho, "--out", &p(&dir, "2b.txn")]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(p(&dir, "2.txn")).unwrap(), std::fs::read(p(&dir, "2b.txn")).unwrap());

    // Verifying under different parameters or commitment rejects.
    let o = vinf(&["verify", "--transcript", &p(&dir, "3.txn")]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json_stdout(&o)["reason"], "params-mismatch");
    let other = stdout(&vinf(&["commit-model", "--model", &fixture("f2_2_2_2.json"), "--num-paths", "2"]));
    let o = vinf(&["verify", "--transcript", &p(&dir, "3.txn"), "--num-paths", "2", "--commitment", other.trim()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json_stdout(&o)["reason"], "commitment-mismatch");

    // A partial transcript is incomplete; garbage is malformed.
    let o = vinf(&["verify", "--transcript", &p(&dir, "2.txn"), "--num-paths", "2"]);
    assert_eq!(json_stdout(&o)["reason"], "incomplete");
    let o = vinf(&["verify", "--transcript", &q]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json_stdout(&o)["reason"], "malformed");

    // Responding with a different model is refused.
    let o = vinf(&["respond", "--model", &fixture("f2_2_2_2.json"), "--transcript", &p(&dir, "2.txn"), "--num-paths", "2", "--out", &p(&dir, "x.txn")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tampered_transcript_is_rejected() {
    let dir = TempDir::new().unwrap();
    let model = fixture("f1_2_2_2.json");
    std::fs::write(p(&dir, "q.txt"), "0.25, -0.5").unwrap();
    let o = vinf(&["verify", "--self-play", "--model", &model, "--query", &p(&dir, "q.txt"), "--out", &p(&dir, "t.txn")]);
    assert_eq!(o.status.code(), Some(0));
    let mut bytes = std::fs::read(p(&dir, "t.txn")).unwrap();
    // Flip a byte inside the last opening's sibling hashes.
    let n = bytes.len();
    bytes[n - 5] ^= 0x40;
    std::fs::write(p(&dir, "t.txn"), &bytes).unwrap();
    let o = vinf(&["verify", "--transcript", &p(&dir, "t.txn")]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json_stdout(&o)["accept"], false);
}

#[test]
fn referee_picks_the_honest_trace() {
    let dir = TempDir::new().unwrap();
    let model = fixture("f1_2_2_2.json");
    std::fs::write(p(&dir, "q.json"), "[0.25, -0.5]").unwrap();
    let q = p(&dir, "q.json");
    assert!(vinf(&["trace", "--model", &model, "--query", &q, "--out", &p(&dir, "good.trc")]).status.success());
    assert!(vinf(&["trace", "--model", &fixture("f2_2_2_2.json"), "--query", &q, "--out", &p(&dir, "bad.trc")]).status.success());

    let o = vinf(&["referee", "--model", &model, "--p1-trace", &p(&dir, "bad.trc"), "--p2-trace", &p(&dir, "good.trc"), "--query", &q, "--log", &p(&dir, "log.jsonl")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json_stdout(&o);
    assert_eq!(v["winner"], "p2");
    assert_eq!(v["rounds"], 3);
    let log = std::fs::read_to_string(p(&dir, "log.jsonl")).unwrap();
    assert!(log.lines().count() >= 3);

    let o = vinf(&["referee", "--model", &model, "--p1-trace", &p(&dir, "good.trc"), "--p2-trace", &p(&dir, "good.trc"), "--query", &q]);
    assert_eq!(json_stdout(&o)["dispute"], false);
}

#[test]
fn attack_and_estimate_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let model = fixture("iris_4_64_32_3.json");
    let queries = fixture("iris_queries.json");
    let run = |csv: &str| {
        let o = vinf(&[
            "attack", "--method", "grad-descent", "--model", &model, "--queries", &queries, "--inputs", "2", "--rounds", "2",
            "--max-iters", "100", "--seed", "3", "--csv", csv,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (stdout(&o), std::fs::read_to_string(csv).unwrap())
    };
    let a = run(&p(&dir, "a.csv"));
    assert_eq!(a, run(&p(&dir, "b.csv")));
    assert!(a.0.contains("All Layers"));
    assert_eq!(a.1.lines().count(), 1 + 2 * 2 * 3);

    std::fs::write(p(&dir, "cfg.txt"), "# inverse settings\nridge = 1e-3\n").unwrap();
    let o = vinf(&["attack", "--method", "inverse-regularized", "--model", &model, "--queries", &queries, "--inputs", "5", "--config", &p(&dir, "cfg.txt")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::write(p(&dir, "bad.txt"), "learning_rat = 1\n").unwrap();
    let o = vinf(&["attack", "--method", "swap", "--model", &model, "--queries", &queries, "--config", &p(&dir, "bad.txt")]);
    assert_eq!(o.status.code(), Some(3));

    assert!(vinf(&["gen-model", "--arch", "4,64,32,3", "--out-fn", "softmax", "--seed", "9", "--out", &p(&dir, "adv.json")]).status.success());
    let est = |seed: &str| {
        let o = vinf(&[
            "estimate", "--model", &model, "--adv-model", &p(&dir, "adv.json"), "--queries", &queries, "--eps-sep", "0.1",
            "--eps-target", "0.05", "--repetitions", "5", "--seed", seed,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    let first = est("1");
    assert_eq!(first, est("1"));
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["per_model"][0]["status"], "selected");
}

#[test]
fn threads_flag_is_validated() {
    let o = vinf(&["--threads", "0", "gen-model", "--arch", "2,2", "--out", "/dev/null"]);
    assert_eq!(o.status.code(), Some(2));
}
