use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_stacklab");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn stacklab")
}

fn split_words(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut any = false;
    for c in line.chars() {
        match c {
            '"' => {
                quoted = !quoted;
                any = true;
            }
            c if c.is_whitespace() && !quoted => {
                if any {
                    out.push(std::mem::take(&mut cur));
                    any = false;
                }
            }
            c => {
                cur.push(c);
                any = true;
            }
        }
    }
    if any {
        out.push(cur);
    }
    out
}

struct Invocation {
    args: Vec<String>,
    expected: String,
}

fn console_blocks(readme: &str) -> Vec<Vec<Invocation>> {
    let mut blocks = Vec::new();
    let mut lines = readme.lines();
    while let Some(line) = lines.next() {
        if line.trim() != "```console" {
            continue;
        }
        let mut block: Vec<Invocation> = Vec::new();
        for line in lines.by_ref() {
            if line.trim() == "```" {
                break;
            }
            if let Some(cmd) = line.strip_prefix("$ ") {
                let words = split_words(cmd);
                assert_eq!(words[0], "stacklab", "unexpected command {cmd}");
                block.push(Invocation {
                    args: words[1..].to_vec(),
                    expected: String::new(),
                });
            } else {
                let inv = block.last_mut().expect("output before command");
                inv.expected.push_str(line);
                inv.expected.push('\n');
            }
        }
        blocks.push(block);
    }
    blocks
}

#[test]
fn readme_examples_match() {
    let readme =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md"))
            .expect("README.md");
    let blocks = console_blocks(&readme);
    assert!(blocks.len() >= 3);
    let dir = tempfile::tempdir().unwrap();
    for inv in blocks.iter().flatten() {
        let args: Vec<&str> = inv.args.iter().map(String::as_str).collect();
        let out = run(dir.path(), &args);
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert_eq!(stdout, inv.expected, "output of {args:?}");
    }
    assert!(dir.path().join("results/results.csv").exists());
    assert!(dir.path().join("catalogs/s7-0.catalog.json").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();

    assert_eq!(run(p, &["--help"]).status.code(), Some(0));
    assert_eq!(run(p, &["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(p, &["gen", "--count", "lots"]).status.code(), Some(1));

    std::fs::write(p.join("bad.json"), r#"{"dataset": {"threshold": 7.5}}"#).unwrap();
    assert_eq!(
        run(p, &["--config", "bad.json", "gen", "--out", "x"])
            .status
            .code(),
        Some(1)
    );

    assert_eq!(run(p, &["inspect", "missing.json"]).status.code(), Some(3));
    std::fs::write(p.join("junk.json"), "{ not json").unwrap();
    assert_eq!(run(p, &["inspect", "junk.json"]).status.code(), Some(3));

    assert!(
        run(p, &["--seed", "1", "gen", "--count", "1", "--out", "s"])
            .status
            .success()
    );
    let illegal = run(
        p,
        &[
            "replay",
            "--scenario",
            "s/s1-0.json",
            "--plan",
            "stack box1; stack box9",
        ],
    );
    assert_eq!(illegal.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&illegal.stderr).contains("box9"));
}

#[test]
fn config_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(run(p, &["config", "init", "--out", "c.json"])
        .status
        .success());
    let a = run(
        p,
        &[
            "--config", "c.json", "--seed", "5", "gen", "--count", "2", "--out", "a",
        ],
    );
    let b = run(p, &["--seed", "5", "gen", "--count", "2", "--out", "b"]);
    assert!(a.status.success() && b.status.success());
    for name in ["s5-0.json", "s5-1.json"] {
        assert_eq!(
            std::fs::read(p.join("a").join(name)).unwrap(),
            std::fs::read(p.join("b").join(name)).unwrap()
        );
    }
}
