use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SHORT: &str = "\
agents 3
edge 1 2 6
edge 2 3 6
edge 3 1 6
capacity 1 600
capacity 2 450
capacity 3 300
load 0 800
event 0.2 2 100
h 10
dt 0.001
t_end 0.5
strategy transient_match
";

fn gridshare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridshare"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_scenario(dir: &Path, text: &str) -> String {
    let path = dir.join("short.scn");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn simulate_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write_scenario(dir.path(), SHORT);
    let out = gridshare(&["simulate", &scn]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,s_1,s_2,s_3,p_cmd_1,p_cmd_2,p_cmd_3,p_del_1,p_del_2,p_del_3,p_o,p_l,e,r_1,r_2,r_3,c_a"
    );
    assert_eq!(lines.count(), 501);
}

#[test]
fn simulate_writes_sidecars_next_to_output() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write_scenario(dir.path(), SHORT);
    let csv = dir.path().join("run.csv");
    let out = gridshare(&[
        "simulate",
        &scn,
        "--out",
        csv.to_str().unwrap(),
        "--dump-messages",
        "--dump-ft",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.stdout.is_empty());

    let messages = fs::read_to_string(dir.path().join("run.csv.messages.csv")).unwrap();
    assert!(messages.starts_with("round,sender,receiver,kind,value\n"));
    assert!(messages.lines().any(|l| l.contains(",estimate,")));
    assert!(messages.lines().any(|l| l.contains(",ft_weight,")));

    let ft = fs::read_to_string(dir.path().join("run.csv.ft.csv")).unwrap();
    assert!(ft.starts_with("step,agent,order,kernel,c_a\n"));
    assert!(ft.lines().count() > 1);

    let again = dir.path().join("again.csv");
    assert!(
        gridshare(&["simulate", &scn, "--out", again.to_str().unwrap()])
            .status
            .success()
    );
    assert_eq!(fs::read(&csv).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn analyze_reports_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write_scenario(dir.path(), SHORT);
    let out = gridshare(&["analyze", &scn]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("quantity,index,value\n"));
    assert!(text.contains("dominant"));
}

#[test]
fn bad_scenario_fails_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write_scenario(dir.path(), &SHORT.replace("h 10", "h ten"));
    let out = gridshare(&["simulate", &scn]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: "), "{err}");
    assert!(err.contains("line 10"), "{err}");
}

#[test]
fn whole_file_errors_have_no_line() {
    let dir = tempfile::tempdir().unwrap();
    let scn = write_scenario(dir.path(), &SHORT.replace("t_end 0.5\n", ""));
    let err = String::from_utf8(gridshare(&["simulate", &scn]).stderr).unwrap();
    assert!(
        err.trim_end().ends_with("short.scn: missing 't_end'"),
        "{err}"
    );
}

#[test]
fn missing_file_fails() {
    let out = gridshare(&["analyze", "/nonexistent/nothing.scn"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("cannot read"));
}
