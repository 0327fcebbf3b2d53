// Copyright 2026 The convex-lse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


use std::path::Path;
use std::process::{Command, Output};

use convex_lse::io;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_convex-lse"))
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = cmd.output().unwrap();
    (
        status.code().unwrap(),
        String::from_utf8(stdout).unwrap(),
        String::from_utf8(stderr).unwrap(),
    )
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn square(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("data.csv");
    write(&p, "a,b,y\n0,0,1\n1,0,0.2\n0,1,0.1\n1,1,1.3\n0.5,0.5,0.3\n0.2,0.7,0.4\n");
    p
}

fn fields(line: &str) -> Vec<(&str, &str)> {
    line.split_whitespace().filter_map(|f| f.split_once('=')).collect()
}

#[test]
fn fit_then_predict_at_data_points() {
    let dir = tempfile::tempdir().unwrap();
    let data = square(dir.path());
    let model = dir.path().join("m.json");
    let (code, out, _) = run(bin().args(["fit", "--response", "y", "--input"]).arg(&data).arg("--out").arg(&model));
    assert_eq!(code, 0, "{out}");
    let kv = fields(out.lines().next().unwrap());
    assert!(kv.contains(&("status", "converged")) && kv.contains(&("n", "6")), "{out}");

    let pts = dir.path().join("pts.csv");
    write(&pts, "a,b\n0,0\n1,0\n0,1\n1,1\n0.5,0.5\n0.2,0.7\n");
    let pred = dir.path().join("pred.csv");
    let (code, out, err) = run(bin()
        .args(["predict", "--subgradients", "--model"])
        .arg(&model)
        .arg("--points")
        .arg(&pts)
        .arg("--out")
        .arg(&pred));
    assert_eq!(code, 0, "{out}{err}");
    let fitted = io::read_model(&model).unwrap();
    let text = std::fs::read_to_string(&pred).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "value,in_domain,xi_1,xi_2,eta");
    for (line, want) in lines.zip(fitted.fitted()) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 5);
        assert!((cols[0].parse::<f64>().unwrap() - want).abs() <= 1e-9);
        assert_eq!(cols[1], "true");
    }
}

#[test]
fn outside_hull_envelope_and_maxaffine() {
    let dir = tempfile::tempdir().unwrap();
    let data = square(dir.path());
    let model = dir.path().join("m.json");
    let (code, _, _) = run(bin().args(["fit", "--response", "y", "--input"]).arg(&data).arg("--out").arg(&model));
    assert_eq!(code, 0);
    let pts = dir.path().join("pts.csv");
    write(&pts, "a,b\n2,2\n");
    let pred = dir.path().join("pred.csv");
    let (code, _, _) = run(bin().arg("predict").arg("--model").arg(&model).arg("--points").arg(&pts).arg("--out").arg(&pred));
    assert_eq!(code, 0);
    assert_eq!(std::fs::read_to_string(&pred).unwrap(), "value,in_domain\ninf,false\n");
    let (code, _, _) = run(bin()
        .args(["predict", "--extension", "maxaffine", "--model"])
        .arg(&model)
        .arg("--points")
        .arg(&pts)
        .arg("--out")
        .arg(&pred));
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&pred).unwrap();
    let row = text.lines().nth(1).unwrap();
    let (value, flag) = row.split_once(',').unwrap();
    assert!(value.parse::<f64>().unwrap().is_finite());
    assert_eq!(flag, "false");
}

#[test]
fn bad_column_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = square(dir.path());
    let (code, _, err) = run(bin()
        .args(["fit", "--response", "nope", "--input"])
        .arg(&data)
        .arg("--out")
        .arg(dir.path().join("m.json")));
    assert_eq!(code, 2);
    assert!(err.contains("nope"), "{err}");
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = run(bin()
        .args(["fit", "--response", "y", "--input"])
        .arg(dir.path().join("absent.csv"))
        .arg("--out")
        .arg(dir.path().join("m.json")));
    assert_eq!(code, 2);
}

#[test]
fn iteration_cap_still_writes_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = square(dir.path());
    let model = dir.path().join("m.json");
    let (code, out, _) = run(bin()
        .args(["fit", "--response", "y", "--max-iter", "10", "--input"])
        .arg(&data)
        .arg("--out")
        .arg(&model));
    assert_eq!(code, 3, "{out}");
    assert!(fields(&out).contains(&("status", "iter_limit")));
    let m = io::read_model(&model).unwrap();
    assert_eq!(m.diagnostics().status, convex_lse::SolveStatus::IterLimit);
}

#[test]
fn dimension_mismatch_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let data = square(dir.path());
    let model = dir.path().join("m.json");
    run(bin().args(["fit", "--response", "y", "--input"]).arg(&data).arg("--out").arg(&model));
    let pts = dir.path().join("pts.csv");
    write(&pts, "a\n0.5\n");
    let (code, _, _) = run(bin()
        .arg("predict")
        .arg("--model")
        .arg(&model)
        .arg("--points")
        .arg(&pts)
        .arg("--out")
        .arg(dir.path().join("p.csv")));
    assert_eq!(code, 4);
}

#[test]
fn monotone_variant_flag() {
    let dir = tempfile::tempdir().unwrap();
    let data = square(dir.path());
    let model = dir.path().join("m.json");
    let (code, _, _) = run(bin()
        .args(["fit", "--response", "y", "--variant", "monotone", "--input"])
        .arg(&data)
        .arg("--out")
        .arg(&model));
    assert_eq!(code, 0);
    let m = io::read_model(&model).unwrap();
    assert_eq!(m.variant(), convex_lse::Variant::ConvexNonincreasing);
    assert!(m.subgradients().iter().all(|&s| s <= 1e-7));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = run(bin().args(["simulate", "--scenario", "cubic", "--out"]).arg(dir.path()));
    assert_eq!(code, 1);
    let (code, _, _) = run(bin().args(["fit", "--input", "x.csv"]));
    assert_eq!(code, 1);
    let (code, _, _) = run(bin().args(["simulate", "--reps", "0", "--out"]).arg(dir.path()));
    assert_eq!(code, 1);
    let (code, out, _) = run(bin().arg("--help"));
    assert_eq!(code, 0);
    assert!(out.contains("simulate"));
}

#[test]
fn noiseless_hyperplane_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sim");
    let (code, out, err) = run(bin()
        .args(["simulate", "--scenario", "hyperplane", "--sigma", "0", "--n", "16,32", "--design", "grid", "--out"])
        .arg(&out_dir));
    assert_eq!(code, 0, "{err}");
    let rows: Vec<_> = out.lines().filter(|l| l.starts_with("n=")).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let kv = fields(row);
        let sup: f64 = kv.iter().find(|f| f.0 == "mean_sup_error").unwrap().1.parse().unwrap();
        assert!(sup <= 1e-6, "{row}");
    }
    let csv = std::fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(out_dir.join("report.json").exists());
}

#[test]
fn library_entry_point_matches_binary() {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = convex_lse_cli::run(["convex-lse", "predict"], &mut out, &mut err);
    assert_eq!(code, convex_lse_cli::EXIT_USAGE);
    assert!(!err.is_empty());
}
