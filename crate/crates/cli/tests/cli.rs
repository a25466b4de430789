use std::path::Path;
use std::process::{Command, Output};

fn celltrail(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_celltrail"))
        .args(args)
        .env_remove("CELLTRAIL_USER")
        .output()
        .expect("run celltrail")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str]) -> String {
    let o = celltrail(args);
    assert!(o.status.success(), "{args:?} failed: {}", stderr(&o));
    stdout(&o)
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn audit_gradebook() {
    let dir = tempfile::tempdir().unwrap();
    let marks = dir.path().join("marks.ttz");
    ok(&["fixture", "-o", path(&marks)]);
    let all = ok(&["audit", path(&marks), "--format", "csv"]);
    assert_eq!(all.lines().count(), 51);
    let text = ok(&["audit", path(&marks)]);
    assert_eq!(text.lines().count(), 51);
    let f2v = ok(&["audit", path(&marks), "--class", "formula-to-value", "--format", "csv"]);
    assert_eq!(f2v.lines().count(), 8);
    assert!(f2v.lines().skip(1).all(|l| l.contains(",formula-to-value,")));

    let o = celltrail(&[
        "audit",
        path(&marks),
        "--class",
        "formula-to-value",
        "--format",
        "csv",
        "--strict-discrepancy",
    ]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("3 discrepancies"), "{}", stderr(&o));
    let flagged = stdout(&o).lines().skip(1).filter(|l| !l.ends_with(',')).count();
    assert_eq!(flagged, 3);

    let blocks = ok(&["audit", path(&marks), "--blocks"]);
    assert_eq!(blocks.lines().count(), 1);
    assert!(blocks.starts_with("F2:F3 -> H2:H3"), "{blocks}");
}

#[test]
fn audit_errors() {
    let missing = celltrail(&["audit", "/definitely/missing.ttz"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stdout(&missing).is_empty());
    assert_eq!(celltrail(&["audit"]).status.code(), Some(2));
    assert_eq!(celltrail(&["audit", "x.ttz", "--format", "pdf"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let marks = dir.path().join("marks.ttz");
    ok(&["fixture", "-o", path(&marks)]);
    assert_eq!(
        celltrail(&["audit", path(&marks), "--class", "bogus"]).status.code(),
        Some(1)
    );
}

#[test]
fn reconstruct_counts() {
    let dir = tempfile::tempdir().unwrap();
    let marks = dir.path().join("marks.ttz");
    let past = dir.path().join("past.ttz");
    ok(&["fixture", "-o", path(&marks)]);
    for k in [0usize, 20, 50] {
        ok(&["reconstruct", path(&marks), "--at", &k.to_string(), "-o", path(&past)]);
        let csv = ok(&["audit", path(&past), "--format", "csv"]);
        assert_eq!(csv.lines().count(), k + 1);
    }
    let o = celltrail(&["reconstruct", path(&marks), "--at", "51", "-o", path(&past)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_commands() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.ttz");
    ok(&[
        "bench",
        "gen-a",
        "--size",
        "3",
        "--b2",
        "2.0",
        "--recalc",
        "-o",
        path(&a),
    ]);
    assert!(std::fs::metadata(&a).unwrap().len() > 0);
    assert_eq!(
        celltrail(&["bench", "gen-a", "--size", "61", "-o", path(&a)])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        celltrail(&["bench", "gen-a", "--size", "2", "--b2", "0", "-o", path(&a)])
            .status
            .code(),
        Some(1)
    );
    ok(&[
        "bench",
        "gen-b",
        "--rows",
        "5",
        "--cols",
        "4",
        "-o",
        path(&dir.path().join("b.ttz")),
    ]);
    ok(&["recalc", path(&a)]);

    let timing = dir.path().join("timing.csv");
    std::fs::write(&timing, "N,seconds\n30,3.5\n35,7.5\n40,21\n45,44\n50,80\n").unwrap();
    let fit = ok(&["bench", "fit", "--model", "power", "--input", path(&timing)]);
    let parts: Vec<f64> = fit
        .trim()
        .split(' ')
        .map(|kv| kv.split('=').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(
        (parts[0] - 24.857).abs() < 0.01 && (parts[1] - 6.299).abs() < 0.01,
        "{fit}"
    );
    let mem = dir.path().join("mem.csv");
    std::fs::write(&mem, "x,y\n30,32.4\n35,33.2\n40,33.8\n45,34.4\n50,35.3\n").unwrap();
    let fit = ok(&["bench", "fit", "--model", "linear", "--input", path(&mem)]);
    assert_eq!(fit.trim(), "intercept=28.220000 slope=0.140000");
    assert_eq!(
        celltrail(&["bench", "fit", "--model", "cubic", "--input", path(&mem)])
            .status
            .code(),
        Some(2)
    );

    let samples = dir.path().join("samples.csv");
    std::fs::write(&samples, "N,seconds,concurrency\n50,81.5,1\n50,165,2\n").unwrap();
    let report = ok(&["bench", "overhead", "--baseline", "81.5", "--input", path(&samples)]);
    assert_eq!(report.lines().next(), Some("concurrency,per_task_s,overhead_frac"));
    assert!(report.contains("\n2,82.5,"));

    let run = ok(&["bench", "run", "--sizes", "2,3", "--trials", "2"]);
    assert_eq!(run.lines().count(), 5);
    assert_eq!(
        celltrail(&["bench", "run", "--sizes", "2", "--trials", "0"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn repository_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let repo = dir.path().join("repo");
    let r = path(&repo);
    let marks = dir.path().join("marks.ttz");
    ok(&["fixture", "-o", path(&marks)]);
    let when = |s: u32| format!("2003-05-01T09:{:02}:00Z", s);
    ok(&["repo", "init", "-r", r, "--user", "root"]);
    assert_eq!(
        celltrail(&["repo", "init", "-r", r, "--user", "root"]).status.code(),
        Some(1)
    );
    ok(&[
        "repo",
        "add",
        "-r",
        r,
        "--user",
        "root",
        "--when",
        &when(0),
        "marks",
        path(&marks),
    ]);
    assert_eq!(
        celltrail(&["repo", "add", "-r", r, "--user", "alice", "other", path(&marks)])
            .status
            .code(),
        Some(1)
    );
    for u in ["alice", "bob"] {
        ok(&["repo", "grant", "-r", r, "--user", "root", "marks", u, "edit"]);
    }
    assert_eq!(
        celltrail(&["repo", "grant", "-r", r, "--user", "root", "marks", "eve", "root"])
            .status
            .code(),
        Some(2)
    );

    let copy = dir.path().join("work.ttz");
    let out = ok(&[
        "repo",
        "checkout",
        "-r",
        r,
        "--user",
        "alice",
        "--when",
        &when(1),
        "marks",
        "-o",
        path(&copy),
    ]);
    let token = out.lines().find_map(|l| l.strip_prefix("token=")).unwrap().to_string();
    assert!(out.contains("otp=") && out.contains("version=1"));
    assert_eq!(std::fs::read(&copy).unwrap(), std::fs::read(&marks).unwrap());

    let locked = celltrail(&[
        "repo",
        "checkout",
        "-r",
        r,
        "--user",
        "bob",
        "--when",
        &when(2),
        "marks",
        "-o",
        "-",
    ]);
    assert_eq!(locked.status.code(), Some(1));
    assert!(
        stderr(&locked).contains("locked by alice since 2003-05-01T09:01:00Z"),
        "{}",
        stderr(&locked)
    );

    assert_eq!(
        ok(&[
            "repo",
            "checkin",
            "-r",
            r,
            "--when",
            &when(3),
            "--token",
            &token,
            "--discard"
        ])
        .trim(),
        "discarded"
    );
    let stale = celltrail(&[
        "repo",
        "checkin",
        "-r",
        r,
        "--when",
        &when(4),
        "--token",
        &token,
        "--discard",
    ]);
    assert_eq!(stale.status.code(), Some(1));

    for (i, user) in ["alice", "bob"].into_iter().enumerate() {
        let m = 10 + 2 * i as u32;
        let out = ok(&[
            "repo",
            "checkout",
            "-r",
            r,
            "--user",
            user,
            "--when",
            &when(m),
            "marks",
            "-o",
            path(&copy),
        ]);
        let token = out.lines().find_map(|l| l.strip_prefix("token=")).unwrap().to_string();
        std::fs::write(&copy, format!("edit {i}")).unwrap();
        let v = ok(&[
            "repo",
            "checkin",
            "-r",
            r,
            "--when",
            &when(m + 1),
            "--token",
            &token,
            "--file",
            path(&copy),
        ]);
        assert_eq!(v.trim(), format!("version {}", i + 2));
    }
    let history = ok(&["repo", "history", "-r", r, "--user", "alice", "marks"]);
    let lines: Vec<&str> = history.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("3\tbob\t2003-05-01T09:13:00Z\t"));
    let got = ok(&["repo", "get", "-r", r, "--user", "alice", "marks", "--seq", "2"]);
    assert_eq!(got, "edit 0");
    let denied = celltrail(&["repo", "history", "-r", r, "--user", "mallory", "marks"]);
    assert_eq!(denied.status.code(), Some(1));
    assert!(stderr(&denied).contains("permission denied"));
}

#[test]
fn passwd_stores_only_digests() {
    use std::io::Write;
    let dir = tempfile::tempdir().unwrap();
    let repo = dir.path().join("repo");
    ok(&["repo", "init", "-r", path(&repo), "--user", "root"]);
    let mut child = Command::new(env!("CARGO_BIN_EXE_celltrail"))
        .args(["repo", "passwd", "-r", path(&repo), "alice"])
        .stdin(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"correct horse\n").unwrap();
    assert!(child.wait().unwrap().success());
    let users = std::fs::read_to_string(repo.join("users.json")).unwrap();
    assert!(users.contains("alice") && !users.contains("correct horse"));
}
