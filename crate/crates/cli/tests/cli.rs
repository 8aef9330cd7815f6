use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

const TREE: &str = r#"{
  "schema": {
    "attributes": [
      {"name": "age", "kind": "numeric"},
      {"name": "parents", "kind": "categorical", "encoding": {"usual": 0, "pretentious": 1}}
    ],
    "classes": ["no", "yes"]
  },
  "levels": [
    [{"attr": 0, "threshold": 30, "mode": "numeric", "true_child": 0, "false_child": 1}],
    [{"attr": 1, "threshold": 1, "mode": "equality", "true_child": 0, "false_child": 1}, {"leaf": 0}],
    [{"leaf": 1}, {"leaf": 0}]
  ]
}"#;

const DATA: &str = "age,parents\n40,pretentious\n40,usual\n10,usual\n30,pretentious\n";

fn ppdt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppdt"))
        .current_dir(dir)
        .args(args)
        .env_remove("PPDT_LEVEL0")
        .env_remove("PPDT_ENDPOINTS")
        .output()
        .expect("run ppdt")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "ppdt failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn workdir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tree.json"), TREE).unwrap();
    std::fs::write(dir.path().join("data.csv"), DATA).unwrap();
    dir
}

struct Daemon {
    child: Child,
    endpoint: String,
}

impl Daemon {
    fn start(dir: &Path, args: &[&str]) -> Self {
        let mut child = Command::new(env!("CARGO_BIN_EXE_ppdt"))
            .current_dir(dir)
            .arg("levelsite")
            .args(args)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("start levelsite");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let endpoint = line.trim().rsplit(' ').next().unwrap().to_string();
        assert!(line.contains("listening on"), "unexpected banner {line:?}");
        Self { child, endpoint }
    }
}

impl Drop for Daemon {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

#[test]
fn single_leaf_prints_its_label() {
    let dir = workdir();
    std::fs::write(
        dir.path().join("leaf.json"),
        r#"{"schema": {"attributes": [], "classes": ["no"]}, "levels": [[{"leaf": 0}]]}"#,
    )
    .unwrap();
    let out = ppdt(dir.path(), &["classify", "--simulate", "--tree", "leaf.json", "--input", "{}"]);
    assert_eq!(stdout(&out), "no\n");
}

#[test]
fn simulation_matches_oracle() {
    let dir = workdir();
    let sim =
        stdout(&ppdt(dir.path(), &["classify", "--simulate", "--tree", "tree.json", "--t", "8", "--csv", "data.csv"]));
    let oracle = stdout(&ppdt(dir.path(), &["oracle", "--tree", "tree.json", "--t", "8", "--csv", "data.csv"]));
    assert_eq!(oracle, "yes\t2\nno\t2\nno\t1\nyes\t2\n");
    let labels: Vec<&str> = oracle.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(sim.lines().collect::<Vec<_>>(), labels);
}

#[test]
fn deployed_over_tcp() {
    let dir = workdir();
    let d = dir.path();
    stdout(&ppdt(d, &["keygen", "--key-bits", "512", "--t", "8"]));
    assert_eq!(stdout(&ppdt(d, &["partition", "--tree", "tree.json", "--pub", "client.pub"])), "3 slices\n");
    for f in ["client.key", "client.pub", "schema.json", "slice-0.bin", "slice-1.bin", "slice-2.bin"] {
        assert!(d.join(f).exists(), "{f} missing");
    }

    // Level 2 takes its configuration from a file, including a preinstalled slice.
    std::fs::write(
        d.join("site2.toml"),
        "level = 2\nlisten = \"127.0.0.1:0\"\nkeys = \"client.pub\"\nslice = \"slice-2.bin\"\n",
    )
    .unwrap();
    let l2 = Daemon::start(d, &["--config", "site2.toml"]);
    let l1 = Daemon::start(d, &["--level", "1", "--listen", "127.0.0.1:0", "--downstream", &l2.endpoint]);
    let l0 = Daemon::start(
        d,
        &["--level", "0", "--listen", "127.0.0.1:0", "--downstream", &l1.endpoint, "--bogus-continuation"],
    );
    let endpoints = format!("{},{}", l0.endpoint, l1.endpoint);
    // Two endpoints for a three-level tree.
    let out = ppdt(d, &["deploy", "--pub", "client.pub", "--endpoints", &endpoints]);
    assert_eq!(out.status.code(), Some(5));
    let endpoints = format!("{},{},{}", l0.endpoint, l1.endpoint, l2.endpoint);
    stdout(&ppdt(d, &["deploy", "--pub", "client.pub", "--endpoints", &endpoints]));

    let labels = stdout(&ppdt(
        d,
        &["classify", "--key", "client.key", "--schema", "schema.json", "--level0", &l0.endpoint, "--csv", "data.csv"],
    ));
    assert_eq!(labels, "yes\nno\nno\nyes\n");
    let one = stdout(&ppdt(
        d,
        &[
            "classify",
            "--key",
            "client.key",
            "--schema",
            "schema.json",
            "--level0",
            &l0.endpoint,
            "--input",
            r#"{"age": 12, "parents": "usual"}"#,
        ],
    ));
    assert_eq!(one, "no\n");
}

#[test]
fn site_without_slice_reports_not_ready() {
    let dir = workdir();
    let d = dir.path();
    stdout(&ppdt(d, &["keygen", "--key-bits", "512", "--t", "8"]));
    stdout(&ppdt(d, &["partition", "--tree", "tree.json", "--pub", "client.pub"]));
    let l0 = Daemon::start(d, &["--level", "0", "--listen", "127.0.0.1:0", "--downstream", "127.0.0.1:1"]);
    let out = ppdt(
        d,
        &[
            "classify",
            "--key",
            "client.key",
            "--schema",
            "schema.json",
            "--level0",
            &l0.endpoint,
            "--input",
            r#"{"age": 1, "parents": "usual"}"#,
        ],
    );
    assert_eq!(out.status.code(), Some(7), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn depth_stats_columns() {
    let dir = workdir();
    let out = stdout(&ppdt(dir.path(), &["depth-stats", "--tree", "tree.json", "--t", "8", "--csv", "data.csv"]));
    let lines: Vec<Vec<&str>> = out.lines().map(|l| l.split_whitespace().collect()).collect();
    assert_eq!(lines[0], ["average", "median", "3rd", "quartile", "max", "size"]);
    assert_eq!(lines[1], ["1.75", "2", "2", "2", "4"]);
}

#[test]
fn protocol_test_small_t() {
    let dir = workdir();
    let out = stdout(&ppdt(dir.path(), &["protocol-test", "--t", "3"]));
    assert_eq!(out, "numeric t=3: 64/64\nequality t=3: 64/64\n");
}

#[test]
fn bench_writes_csv() {
    let dir = workdir();
    let d = dir.path();
    let args = [
        "bench",
        "--depth",
        "5",
        "--levels",
        "1,4",
        "--runs",
        "2",
        "--hop-delay-ms",
        "2",
        "--bogus",
        "--csv",
        "bench.csv",
    ];
    let out = stdout(&ppdt(d, &args));
    assert!(out.contains("keygen"));
    let csv = std::fs::read_to_string(d.join("bench.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("termination_level,wall_ms,hop_count,comparison_count,correct"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        assert_eq!(row[2], "4", "bogus continuation forwards d-1 times");
        assert_eq!(row[3], row[0]);
        assert_eq!(row[4], "true");
    }
}

#[test]
fn exit_codes() {
    let dir = workdir();
    let d = dir.path();
    let code = |args: &[&str]| ppdt(d, args).status.code();
    assert_eq!(code(&["classify", "--bogus-flag"]), Some(2));
    assert_eq!(code(&["oracle", "--tree", "missing.json", "--input", "{}"]), Some(3));
    assert_eq!(code(&["oracle", "--tree", "data.csv", "--input", "{}"]), Some(4));
    assert_eq!(
        code(&["oracle", "--tree", "tree.json", "--t", "8", "--input", r#"{"age": 300, "parents": "usual"}"#]),
        Some(4)
    );
    assert_eq!(code(&["keygen", "--key-bits", "100"]), Some(5));
    std::fs::write(d.join("bad.toml"), "level = 0\nspeed = 1\n").unwrap();
    assert_eq!(code(&["levelsite", "--config", "bad.toml"]), Some(4));
    assert_eq!(code(&["levelsite", "--listen", "127.0.0.1:0"]), Some(5));
    stdout(&ppdt(d, &["keygen", "--key-bits", "512", "--t", "8"]));
    stdout(&ppdt(d, &["partition", "--tree", "tree.json", "--pub", "client.pub"]));
    // Nothing listens on port 1.
    let unreachable = [
        "classify",
        "--key",
        "client.key",
        "--schema",
        "schema.json",
        "--level0",
        "127.0.0.1:1",
        "--input",
        r#"{"age": 1, "parents": "usual"}"#,
    ];
    assert_eq!(code(&unreachable), Some(6));
    assert_eq!(code(&["partition", "--tree", "tree.json", "--pub", "slice-0.bin"]), Some(4));
}
