use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn projifs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_projifs"))
        .args(args)
        .env("PROJIFS_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn critexp_prints_csv() {
    let o = projifs(&["critexp", "--example", "diag-pair", "--depth", "12"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("s_lo,s_hi,depth,norm,certified"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let (lo, hi): (f64, f64) = (row[0].parse().unwrap(), row[1].parse().unwrap());
    assert!(lo <= hi);
    // Without --out the manifest goes to stderr.
    assert!(stderr(&o).contains("\"command\": \"critexp\""));
}

#[test]
fn dimension_of_positive_pair_is_consistent() {
    let o = projifs(&["dimension", "--example", "positive-pair", "--depth", "12"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let row = out.lines().nth(1).unwrap();
    assert!(row.ends_with(",pressure-bracket,consistent"), "{row}");
}

#[test]
fn elliptic_letter_makes_certification_inconclusive() {
    let o = projifs(&["certify-uh", "--example", "elliptic"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("elliptic letter present"));
}

#[test]
fn certify_uh_succeeds_for_positive_pair() {
    let o = projifs(&["certify-uh", "--example", "positive-pair"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("containment,margin"));
}

#[test]
fn usage_and_input_errors_exit_one() {
    assert_eq!(projifs(&["critexp", "--bogus"]).status.code(), Some(1));
    assert_eq!(
        projifs(&["critexp", "--example", "no-such-example"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(projifs(&["--help"]).status.code(), Some(0));
}

#[test]
fn parse_errors_report_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    fs::write(&path, "# two letters\nmatrix 2 1 1 1\nmatrix 1 1 x 2\n").unwrap();
    let o = projifs(&["classify", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("bad.cfg:3:"), "{err}");
}

#[test]
fn config_files_match_bundled_examples() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pair.cfg");
    fs::write(
        &path,
        projifs::bundled::example("positive-pair").unwrap().text,
    )
    .unwrap();
    let a = projifs(&[
        "critexp",
        "--config",
        path.to_str().unwrap(),
        "--depth",
        "8",
    ]);
    let b = projifs(&["critexp", "--example", "positive-pair", "--depth", "8"]);
    assert_eq!(stdout(&a), stdout(&b));
}

fn read_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn replay_reproduces_outputs() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let o = projifs(&[
        "attractor",
        "--example",
        "stern-brocot",
        "--samples",
        "2000",
        "--seed",
        "7",
        "--svg",
        "--out",
        first.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest = first.path().join("manifest.json");
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    assert_eq!(m["command"], "attractor");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["exit_code"], 0);

    let r = projifs(&[
        "replay",
        manifest.to_str().unwrap(),
        "--out",
        second.path().to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", stderr(&r));
    let (a, b) = (read_outputs(first.path()), read_outputs(second.path()));
    assert!(a.iter().any(|(n, _)| n.ends_with(".svg")));
    assert_eq!(a, b);
}

#[test]
fn thread_count_does_not_change_results() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_projifs"))
            .args([
                "zeta",
                "--example",
                "stern-brocot",
                "--depth",
                "10",
                "--s",
                "0.6",
            ])
            .env("PROJIFS_THREADS", threads)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("1"), run("3"));
}
