use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Command, Stdio};

fn seals() -> Command {
    Command::new(env!("CARGO_BIN_EXE_seals"))
}

const SHORT_HOVER: &str = r#"
name = "short-hover"

[tank]
enabled = false

[task]
kind = "hover"

[task.hover]
warmup = 0.1
duration = 0.4
"#;

#[test]
fn list_names_builtin_scenarios() {
    let out = seals().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["splashdown", "wave", "hover", "oval", "capture", "reach"] {
        assert!(text.lines().any(|l| l == name), "{name} missing from {text}");
    }
}

#[test]
fn run_writes_logs_and_reports_checks() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("short.toml");
    std::fs::write(&file, SHORT_HOVER).unwrap();
    let out_dir = dir.path().join("out");
    let out = seals().args(["run", file.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--seed", "5"]).output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("hover bounds"), "{stdout}");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 5);
    assert_eq!(summary["scenario"], "short-hover");
    assert_eq!(out.status.code(), Some(if summary["passed"].as_bool().unwrap() { 0 } else { 1 }));
    let csv = std::fs::read_to_string(out_dir.join("run.csv")).unwrap();
    assert!(csv.starts_with("# seals-runlog v1\n"));
    assert_eq!(csv.lines().count(), 2 + 125);
}

#[test]
fn errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = seals().args(["run", "no-such-scenario", "--out", dir.path().to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("no-such-scenario"));

    let out = seals().args(["run", "reach", "--out", dir.path().to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn serve_answers_over_tcp() {
    let mut child = seals()
        .args(["serve", "--scenario", "reach", "--port", "0"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().rsplit(' ').next().unwrap().to_string();
    let result = std::panic::catch_unwind(|| {
        let mut w = TcpStream::connect(&addr).unwrap();
        let mut r = BufReader::new(w.try_clone().unwrap());
        w.write_all(b"{\"cmd\":\"reset\",\"seed\":1}\n{\"cmd\":\"step\",\"action\":[0,0,0.1]}\n").unwrap();
        let mut replies = Vec::new();
        for _ in 0..2 {
            let mut l = String::new();
            r.read_line(&mut l).unwrap();
            replies.push(serde_json::from_str::<serde_json::Value>(&l).unwrap());
        }
        assert_eq!(replies[0]["obs"].as_array().unwrap().len(), 17);
        assert_eq!(replies[1]["done"], false);
    });
    child.kill().unwrap();
    child.wait().unwrap();
    result.unwrap();
}
