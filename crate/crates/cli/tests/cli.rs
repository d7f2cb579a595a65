use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn repurpose(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repurpose"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = repurpose(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const CONFIG: &str = r#"
seed = 4
output_dir = "out"

[input]
drugs = "drugs.csv"

[tier1.moa]
k = [4, 6, 8]
[tier1.pathway]
k = [4, 6, 8]
[tier1.indication]
k = [4, 6, 8]
[tier1.target]
k = [4, 6, 8]

[gae]
hidden = 16
embedding = 4
epochs = 40

[tier2]
k = [2, 3, 4]
"#;

fn setup(dir: &Path) -> String {
    ok(&["--seed", "4", "synth", "--small", "--drugs", dir.join("drugs.csv").to_str().unwrap()]);
    let cfg = dir.join("pipeline.toml");
    fs::write(&cfg, CONFIG).unwrap();
    cfg.to_str().unwrap().to_owned()
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for sub in ["", "tier1"] {
        for e in fs::read_dir(dir.join(sub)).unwrap() {
            let p = e.unwrap().path();
            if p.is_file() && p.file_name().unwrap() != "timings.json" {
                files.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn staged_subcommands_match_run_all() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let mono = dir.path().join("mono");
    let staged = dir.path().join("staged");
    ok(&["--config", &cfg, "--out", mono.to_str().unwrap(), "run-all"]);
    for stage in ["filter", "tier1", "fuse", "embed", "tier2", "rank", "report"] {
        ok(&["--config", &cfg, "--out", staged.to_str().unwrap(), stage]);
    }
    let a = read_all(&mono);
    assert_eq!(a, read_all(&staged));
    for name in ["report.json", "report.md", "assignments.csv", "embedding.csv", "ddr_edges.csv", "ddr.dot", "ranking.csv"] {
        assert!(a.iter().any(|(n, _)| n == name), "{name} missing");
    }
}

#[test]
fn overrides_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let out = dir.path().join("o");
    let out_s = out.to_str().unwrap();

    let err = repurpose(&["--config", &cfg, "--out", out_s, "tier2"]);
    assert!(!err.status.success());
    let msg = String::from_utf8_lossy(&err.stderr);
    assert!(msg.contains("run `filter` first"), "{msg}");

    ok(&["--config", &cfg, "--out", out_s, "run-all"]);
    let before = fs::read(out.join("embedding.csv")).unwrap();
    let stdout = ok(&["--config", &cfg, "--out", out_s, "tier2", "--k", "2,3"]);
    assert!(stdout.starts_with("k="), "{stdout}");
    assert_eq!(before, fs::read(out.join("embedding.csv")).unwrap());
    ok(&["--config", &cfg, "--out", out_s, "rank", "--threshold", "0.60"]);
    let rank = fs::read_to_string(out.join("rank.json")).unwrap();
    assert!(rank.contains("\"threshold\": 0.6"), "{rank}");

    let missing = dir.path().join("absent.csv");
    fs::write(dir.path().join("bad.toml"), format!("[input]\ndrugs = {:?}\n", missing.to_str().unwrap())).unwrap();
    let err = repurpose(&["--config", dir.path().join("bad.toml").to_str().unwrap(), "--out", out_s, "filter"]);
    assert_eq!(err.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&err.stderr);
    assert!(msg.contains(&format!("stage parse: file not found {}", missing.display())), "{msg}");
}
