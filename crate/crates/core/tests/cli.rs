use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn sir(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sir")).args(args).current_dir(cwd).env_remove("SIR_WORKERS").output().unwrap()
}

fn tiny_rig(out: &str, rows: u32, cols: u32, seed: u64) -> Vec<String> {
    [
        "oracle-gen".to_string(),
        format!("--output-dir={out}"),
        format!("--seed={seed}"),
        format!("--set=rig.rows={rows}"),
        format!("--set=rig.cols={cols}"),
        "--set=rig.width=160".into(),
        "--set=rig.height=120".into(),
        "--set=rig.focal=150".into(),
    ]
    .to_vec()
}

fn run_ok(args: &[String], cwd: &Path) -> Output {
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = sir(&args, cwd);
    assert!(out.status.success(), "sir {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// Every file under `dir`, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn oracle_gen_is_deterministic_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&tiny_rig("a", 2, 3, 42), dir.path());
    run_ok(&tiny_rig("b", 2, 3, 42), dir.path());
    let (a, b) = (snapshot(&dir.path().join("a")), snapshot(&dir.path().join("b")));
    assert_eq!(a, b);
    assert_eq!(a.keys().filter(|k| k.starts_with("images/")).count(), 6);
    assert_eq!(a.keys().filter(|k| k.starts_with("gt/") && k.ends_with(".sird")).count(), 6);
    assert!(a.contains_key("sparse/cameras.txt") && a.contains_key("sparse/images.txt") && a.contains_key("sparse/points3D.txt"));

    run_ok(&tiny_rig("c", 2, 3, 43), dir.path());
    let c = snapshot(&dir.path().join("c"));
    assert_ne!(a["images/view_001.ppm"], c["images/view_001.ppm"]);

    run_ok(&tiny_rig("d", 1, 1, 42), dir.path());
    assert_eq!(snapshot(&dir.path().join("d")).keys().filter(|k| k.starts_with("images/")).count(), 1);
}

#[test]
fn recapture_and_cluster_commands() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&tiny_rig("fx", 2, 3, 42), dir.path());
    let common = ["--model-dir=fx/sparse", "--image-dir=fx/images"];
    let out = sir(&[&["recapture", "--grid=2x2", "--output-dir=rc"][..], &common[..]].concat(), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_dir(dir.path().join("rc/images")).unwrap().count(), 24);

    let out = sir(&["cluster", "--model-dir=rc/sparse", "--output-dir=cl", "--cluster-size=8"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("cl/clusters.txt")).unwrap();
    let members: usize = text.lines().filter(|l| l.starts_with("cluster ")).map(|l| l.split(':').nth(1).unwrap().split_whitespace().count()).sum();
    assert!(members >= 24, "{text}");
    assert_eq!(String::from_utf8_lossy(&out.stdout), text);
}

#[test]
fn bench_prints_table_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = sir(&["bench", "--grid=5x5"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let json_start = text.find('{').unwrap();
    assert!(text[..json_start].contains("peak"));
    let report: serde_json::Value = serde_json::from_str(&text[json_start..]).unwrap();
    assert_eq!(report["tile_width"], 2060);
    assert_eq!(report["tile_height"], 1540);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(sir(&["--help"], p).status.code(), Some(0));
    assert!(String::from_utf8_lossy(&sir(&["--help"], p).stdout).contains("sweep.num_hypotheses"));
    assert_eq!(sir(&[], p).status.code(), Some(1));
    assert_eq!(sir(&["frobnicate"], p).status.code(), Some(1));
    assert_eq!(sir(&["bench", "--no-such-flag"], p).status.code(), Some(1));
    assert_eq!(sir(&["bench", "--set", "no_such_key=1"], p).status.code(), Some(1));
    assert_eq!(sir(&["bench", "--grid", "0x3"], p).status.code(), Some(1));
    assert_eq!(sir(&["bench", "--config", "missing.json"], p).status.code(), Some(1));
    std::fs::write(p.join("bad.json"), "{\"grid\": \"2x2\", \"bogus\": 1}").unwrap();
    assert_eq!(sir(&["bench", "--config", "bad.json"], p).status.code(), Some(1));
    std::fs::write(p.join("good.json"), "{\"grid\": \"2x2\"}").unwrap();
    assert_eq!(sir(&["bench", "--config", "good.json"], p).status.code(), Some(0));

    // Missing or malformed data.
    assert_eq!(sir(&["depth", "--model-dir=nowhere"], p).status.code(), Some(2));
    assert_eq!(sir(&["evaluate", "--output-dir=nowhere", "--gt-dir=nowhere"], p).status.code(), Some(2));
    std::fs::create_dir_all(p.join("broken")).unwrap();
    std::fs::write(p.join("broken/cameras.txt"), "1 PINHOLE ten 10 1 1 5 5\n").unwrap();
    std::fs::write(p.join("broken/images.txt"), "").unwrap();
    assert_eq!(sir(&["cluster", "--model-dir=broken"], p).status.code(), Some(2));

    let out = Command::new(env!("CARGO_BIN_EXE_sir")).args(["bench"]).current_dir(p).env("SIR_WORKERS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
