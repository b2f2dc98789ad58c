use std::path::Path;
use std::process::Command;

fn trl(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_trl")).args(args).current_dir(dir).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn workdir(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("trl-exit-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn codegree_of_complete_graph() {
    let d = workdir("codegree");
    assert_eq!(trl(&d, &["sample", "--n", "5", "--p", "1", "--out", "k5.txt"]).0, 0);
    assert_eq!(trl(&d, &["check", "codegree", "--input", "k5.txt"]), (0, "3\n".into()));
    assert_eq!(trl(&d, &["check", "codegree", "--input", "k5.txt", "--min", "4"]).0, 2);
    let _ = std::fs::remove_dir_all(d);
}

#[test]
fn malformed_input_exits_one() {
    let d = workdir("malformed");
    std::fs::write(d.join("bad.txt"), "3 4 1\n0 1\n").unwrap();
    assert_eq!(trl(&d, &["check", "codegree", "--input", "bad.txt"]).0, 1);
    assert_eq!(trl(&d, &["check", "codegree", "--input", "missing.txt"]).0, 1);
    let _ = std::fs::remove_dir_all(d);
}

#[test]
fn parity_instance_codes() {
    let d = workdir("parity");
    trl(&d, &["sample", "--n", "12", "--p", "1", "--out", "k12.txt"]);
    trl(&d, &["adversary", "--input", "k12.txt", "--kind", "parity", "--a-size", "5", "--keep", "odd", "--out", "par.txt"]);
    assert_eq!(trl(&d, &["check", "codegree", "--input", "par.txt"]).1, "3\n");
    assert_eq!(trl(&d, &["oracle", "--input", "par.txt"]), (0, "false\n".into()));
    assert_eq!(trl(&d, &["find", "--input", "par.txt"]).0, 3);
    assert_eq!(trl(&d, &["oracle", "--input", "par.txt", "--cap", "10"]).0, 3);
    std::fs::write(d.join("cyc.txt"), (0..12).map(|v| format!("{v}\n")).collect::<String>()).unwrap();
    assert_eq!(trl(&d, &["verify", "--input", "par.txt", "--cycle", "cyc.txt"]).0, 2);
    let _ = std::fs::remove_dir_all(d);
}

#[test]
fn find_then_verify() {
    let d = workdir("find");
    trl(&d, &["sample", "--n", "8", "--p", "1", "--out", "k8.txt"]);
    assert_eq!(trl(&d, &["find", "--input", "k8.txt", "--out", "c.txt"]).0, 0);
    assert_eq!(trl(&d, &["verify", "--input", "k8.txt", "--cycle", "c.txt"]), (0, "valid\n".into()));
    let _ = std::fs::remove_dir_all(d);
}

#[test]
fn scan_single_cell() {
    let d = workdir("scan");
    let (code, _) = trl(&d, &["scan", "--n", "20", "--p", "0.6", "--trials", "1", "--csv", "s.csv"]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(d.join("s.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(trl(&d, &["scan", "--n", "20", "--p", "", "--trials", "0", "--csv", "t.csv"]).0, 2);
    let _ = std::fs::remove_dir_all(d);
}
