use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use cplanner::mapfile::reference_map;
use cplanner::solver::{Policy, SolverConfig, ValueTable};
use cplanner_service::{PropertyChoice, Session};
use serde_json::Value;

const CONTRASTIVE: &str = "First, we move south at critical grid 5 because it leads to the shortest and most flexible future route. Next, we move east at critical grid 10 because it leads to the shortest and most flexible future route. Then, we move north at critical grid 12 because it leads to the shortest route. Finally, we move east at critical grid 7 because it leads to the shortest route. All other decisions result in equivalent routes.";

fn reference_path() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../core/maps/reference.map").to_string()
}

fn cplanner(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cplanner"))
        .args(args)
        .env_remove("CPLANNER_LOG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Runs a command that must succeed quietly.
fn ok(args: &[&str]) -> String {
    let o = cplanner(args);
    assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
    assert!(o.stderr.is_empty(), "{args:?} wrote to stderr: {}", stderr(&o));
    stdout(&o)
}

fn code(args: &[&str]) -> i32 {
    cplanner(args).status.code().unwrap()
}

fn temp_map(name: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cplanner-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn solve_prints_values_and_arrows() {
    let out = ok(&["solve", "--map", &reference_path()]);
    assert!(out.lines().any(|l| l == "g10 6.667 →"), "{out}");
    assert!(out.lines().any(|l| l == "g4 0.000 -"));
    assert!(out.lines().any(|l| l == "g13 unreachable -"));
}

#[test]
fn solve_single_cell_map() {
    let map = temp_map("one.map", "grid 1 1 p=0.9\nD\nstart 0\n");
    let out = ok(&["solve", "--map", map.to_str().unwrap()]);
    assert_eq!(out.trim(), "g0 0.000 -");
    assert_eq!(ok(&["render", "--map", map.to_str().unwrap()]).trim(), "D");
}

#[test]
fn malformed_map_exits_1_naming_the_line() {
    let map = temp_map("bad.map", "grid 2 1 p=0.9\nS Q\n");
    let o = cplanner(&["solve", "--map", map.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    assert_eq!(code(&["solve", "--map", "/nonexistent/map"]), 1);
}

#[test]
fn non_convergence_exits_2() {
    assert_eq!(code(&["solve", "--max-iterations", "2"]), 2);
}

#[test]
fn structured_solve_round_trips() {
    let out = ok(&["solve", "--format", "structured"]);
    let doc: Value = serde_json::from_str(&out).unwrap();
    let values: ValueTable<f64> = serde_json::from_value(doc["values"].clone()).unwrap();
    let policy: Policy = serde_json::from_value(doc["policy"].clone()).unwrap();
    let session = Session::solve(reference_map(), PropertyChoice::MinCost, 0.0, &SolverConfig::default()).unwrap();
    assert_eq!(values, session.values);
    assert_eq!(policy, session.policy);
    assert_eq!(serde_json::to_value(&values).unwrap(), doc["values"]);
}

#[test]
fn monte_carlo_check_is_seeded() {
    let args = ["solve", "--episodes", "2000", "--seed", "3"];
    let a = ok(&args);
    assert_eq!(a, ok(&args));
    let line = a.lines().last().unwrap();
    assert!(line.starts_with("monte-carlo g5: 7.7"), "{line}");
}

#[test]
fn explain_types() {
    let map = reference_path();
    assert_eq!(ok(&["explain", "--type", "contrastive", "--map", &map]).trim_end(), CONTRASTIVE);
    assert_eq!(ok(&["explain", "--type", "none"]), "");
    assert_eq!(ok(&["explain", "--type", "naive-one", "--state", "10"]).trim_end(), "We move east at grid 10.");
    let doc: Value = serde_json::from_str(&ok(&["explain", "--type", "selective", "--format", "structured"])).unwrap();
    assert_eq!(doc["type"], "selective");
    assert_eq!(doc["sentences"][3]["state"], 7);
    assert_eq!(doc["sentences"][3]["connective"], "Finally");
}

#[test]
fn explain_with_bad_focus_exits_3() {
    assert_eq!(code(&["explain", "--type", "naive-one"]), 3);
    assert_eq!(code(&["explain", "--type", "responsibility", "--state", "13"]), 3);
    assert_eq!(code(&["explain", "--type", "bogus"]), 3);
}

#[test]
fn critical_listing() {
    let map = reference_path();
    let out = ok(&["critical", "--alpha", "0", "--map", &map]);
    let ids: Vec<&str> = out.lines().map(|l| l.split(' ').next().unwrap()).collect();
    assert_eq!(ids, ["g5", "g7", "g10", "g12", "g14"]);
    assert!(out.lines().any(|l| l == "g10 5.667 9.667 4.000"), "{out}");
    assert!(ok(&["critical", "--alpha", "3.9"]).lines().any(|l| l.starts_with("g10 ")));
    // Only the dead-end gaps survive an enormous threshold.
    let out = ok(&["critical", "--alpha", "1e9"]);
    assert!(out.lines().all(|l| l.ends_with("unreachable unreachable")), "{out}");
    assert_eq!(code(&["critical", "--alpha", "-1"]), 3);
}

#[test]
fn critical_listing_is_empty_with_finite_gaps_only() {
    let map = temp_map("open.map", "grid 3 1 p=0.8\nS U D\n");
    assert_eq!(ok(&["critical", "--alpha", "1e9", "--map", map.to_str().unwrap()]), "");
}

#[test]
fn contrast_pairs() {
    let out = ok(&["contrast", "--state", "10", "--chosen", "east", "--alt", "south"]);
    assert_eq!(
        out.trim_end(),
        "We move east at grid 10 instead of south because east leads to a route that is 4 grids shorter in expectation and offers 4 future decision points versus 2."
    );
    let out = ok(&["contrast", "--state", "14", "--chosen", "north", "--alt", "west"]);
    assert!(out.contains("west leads to a dead end"));
    assert_eq!(code(&["contrast", "--state", "10", "--chosen", "east", "--alt", "east"]), 3);
    assert_eq!(code(&["contrast", "--state", "10", "--chosen", "east", "--alt", "up"]), 3);
    assert_eq!(code(&["contrast", "--state", "11", "--chosen", "east", "--alt", "south"]), 3);
}

#[test]
fn render_marks_route_and_critical_states() {
    let out = ok(&["render"]);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows.len(), 5);
    let cell = |i: usize| {
        let row: Vec<char> = rows[i / 5].chars().collect();
        row[(i % 5) * 3..(i % 5) * 3 + 2].iter().collect::<String>()
    };
    assert_eq!(cell(10), "*→");
    assert_eq!(cell(5), "*↓");
    assert_eq!(cell(11), " →");
    assert_eq!(cell(4), " D");
    assert_eq!(cell(16), " #");
}

#[test]
fn usage_errors_exit_3() {
    assert_eq!(code(&["solve", "--bogus"]), 3);
    assert_eq!(code(&["frobnicate"]), 3);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn serve_binds_answers_and_stops_on_interrupt() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_cplanner"))
        .args(["serve", "--port", "0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").expect(&line).to_string();

    let mut stream = TcpStream::connect(&addr).unwrap();
    write!(stream, "GET /api/health HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.contains("\"status\":\"ok\""));

    let status = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(status.success());
    assert_eq!(child.wait().unwrap().code(), Some(0));
}

#[test]
fn serve_on_an_occupied_port_exits_4() {
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let o = cplanner(&["serve", "--port", &port]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}
