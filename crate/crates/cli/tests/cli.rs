use std::path::Path;
use std::process::{Command, Output};

use quick_xml::events::Event;
use quick_xml::Reader;
use rabi_chaos::observables::hermite_functions;
use rabi_chaos::quantum::io::write_snapshot;
use rabi_chaos::quantum::{QuadratureGrid, SpinorState};
use rabi_chaos::C64;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rabi-chaos"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn twa_writes_one_stroboscopic_block_per_period() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("twa");
    let cfg = write_config(tmp.path(), "c.json", r#"{"t_final": 12.566370614359172, "sample_interval": 4.0}"#);
    ok(&run(&["twa", "--config", &cfg, "--trajectories", "1000", "--seed", "5", "--out", out.to_str().unwrap()]));
    let text = std::fs::read_to_string(out.join("stroboscopic.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 1000);
    assert!(rows.iter().all(|r| r.starts_with("1,")));
    assert_eq!(text.lines().next().unwrap(), "k,t,traj,x,p,u,v,Z");
    let m = manifest(&out);
    assert_eq!(m["status"], "complete");
    assert_eq!(m["seed"], 5);
    assert!(out.join("twa_histogram_T1.json").exists());
}

#[test]
fn closed_single_trajectory_is_pure_and_runs_reproduce() {
    let tmp = tempfile::tempdir().unwrap();
    let body = r#"{
  "params": {"omega": 1, "Omega": 1, "g": 1.5, "eta0": 3, "omega_c": 1.5, "omega_d": 1, "kappa": 0},
  "n_trajectories": 1,
  "t_final": 2.0,
  "sample_interval": 0.5,
  "grid": {"n_points": 256, "x_max": 18},
  "fock_cutoff": 80
}"#;
    let cfg = write_config(tmp.path(), "c.json", body);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&run(&["trajectories", "--config", &cfg, "--out", a.to_str().unwrap()]));
    ok(&run(&["trajectories", "--config", &cfg, "--out", b.to_str().unwrap()]));
    let purity = csv_column(&a.join("time_series.csv"), "purity");
    assert_eq!(purity.len(), 5);
    for p in purity {
        assert!((p - 1.0).abs() < 1e-9, "purity {p}");
    }
    for f in ["time_series.csv", "jumps.csv", "trajectory0_final.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let (mut ma, mut mb) = (manifest(&a), manifest(&b));
    for m in [&mut ma, &mut mb] {
        let o = m.as_object_mut().unwrap();
        o.remove("created_unix");
        o.remove("wall_time_s");
        o["config"].as_object_mut().unwrap().remove("output_dir");
    }
    assert_eq!(ma, mb);
}

#[test]
fn jumps_are_recorded_with_measurement() {
    let tmp = tempfile::tempdir().unwrap();
    let body = r#"{"n_trajectories": 4, "t_final": 1.0, "sample_interval": 0.5, "grid": {"n_points": 256, "x_max": 18}, "density": false}"#;
    let cfg = write_config(tmp.path(), "c.json", body);
    let out = tmp.path().join("o");
    ok(&run(&["trajectories", "--config", &cfg, "--kappa", "0.05", "--out", out.to_str().unwrap()]));
    let jumps = std::fs::read_to_string(out.join("jumps.csv")).unwrap();
    assert_eq!(jumps.lines().next().unwrap(), "traj,jump_time");
    assert!(jumps.lines().count() > 1);
    assert!(csv_column(&out.join("time_series.csv"), "purity").iter().all(|p| p.is_nan()));
}

#[test]
fn oracle_series_has_one_row_per_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let body = r#"{"t_final": 1.0, "sample_interval": 0.5, "grid": {"n_points": 256, "x_max": 18}, "fock_cutoff": 50}"#;
    let cfg = write_config(tmp.path(), "c.json", body);
    let out = tmp.path().join("o");
    ok(&run(&["oracle", "--config", &cfg, "--kappa", "0.05", "--out", out.to_str().unwrap()]));
    let t = csv_column(&out.join("oracle_series.csv"), "t");
    assert_eq!(t, vec![0.0, 0.5, 1.0]);
    let purity = csv_column(&out.join("oracle_series.csv"), "purity");
    assert!((purity[0] - 1.0).abs() < 1e-9 && purity[2] < 1.0);
}

#[test]
fn invalid_configs_fail_with_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let neg = write_config(tmp.path(), "neg.json", r#"{"dt": -0.01}"#);
    let out = run(&["trajectories", "--config", &neg, "--out", tmp.path().join("x").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("dt"));

    let unknown = write_config(tmp.path(), "unk.json", "{\n  \"seed\": 3,\n  \"colour\": \"red\"\n}");
    let out = run(&["twa", "--config", &unknown]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(!out.status.success());
    assert!(err.contains("colour") && err.contains("line 3"), "{err}");

    let out = run(&["twa", "--profile", "nope"]);
    assert!(!out.status.success());

    let out = run(&["twa", "--profile", "paper-fig3"]);
    assert!(!out.status.success(), "profile is a trajectories preset");
}

fn fock_one_snapshot(path: &Path) {
    let grid = QuadratureGrid::new(256, 12.0).unwrap();
    let rows = hermite_functions(1, &grid.positions());
    let mut s = SpinorState::zeros(grid);
    for j in 0..grid.n_points() {
        s.amplitudes[grid.n_points() + j] = C64::new(rows[1][j], 0.0);
    }
    s.normalize().unwrap();
    write_snapshot(std::fs::File::create(path).unwrap(), &s).unwrap();
}

/// Parses the SVG and returns `(class, x, y)` of every heatmap cell.
fn cells(svg: &str) -> Vec<(String, f64, f64)> {
    let mut reader = Reader::from_str(svg);
    let mut out = Vec::new();
    loop {
        match reader.read_event().expect("well-formed XML") {
            Event::Eof => break,
            Event::Empty(e) | Event::Start(e) if e.name().as_ref() == "rect" => {
                let mut class = None;
                let (mut x, mut y) = (0.0, 0.0);
                for a in e.attributes() {
                    let a = a.unwrap();
                    let v = a.value.to_string();
                    match a.key.as_ref() {
                        "class" => class = Some(v),
                        "x" => x = v.parse().unwrap(),
                        "y" => y = v.parse().unwrap(),
                        _ => {}
                    }
                }
                if let Some(c) = class {
                    out.push((c, x, y));
                }
            }
            _ => {}
        }
    }
    out
}

#[test]
fn analyze_and_render_fock_state() {
    let tmp = tempfile::tempdir().unwrap();
    let snap = tmp.path().join("fock1.json");
    fock_one_snapshot(&snap);
    let out = tmp.path().join("an");
    ok(&run(&["analyze", "--input", snap.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out.join("analysis.json")).unwrap()).unwrap();
    let n_minus = summary["wavefunctions"]["N_minus"].as_f64().unwrap();
    assert!((n_minus - (1.0 - 2.0 * (-0.5f64).exp())).abs() < 1e-3);

    let svg_w = tmp.path().join("w.svg");
    ok(&run(&["render", "--input", out.join("wigner.json").to_str().unwrap(), "--output", svg_w.to_str().unwrap(), "--resolution", "41", "--extent", "4"]));
    let svg = std::fs::read_to_string(&svg_w).unwrap();
    let c = cells(&svg);
    assert_eq!(c.len(), 41 * 41);
    // cell (20, 20) is the origin
    let centre = c.iter().find(|(_, x, y)| *x == 80.0 && *y == 80.0).unwrap();
    assert_eq!(centre.0, "neg");
    assert!(svg.contains(">x</text>") && svg.contains(">p</text>"));

    let svg_q = tmp.path().join("q.svg");
    ok(&run(&["render", "--input", out.join("husimi.json").to_str().unwrap(), "--output", svg_q.to_str().unwrap(), "--resolution", "41"]));
    let c = cells(&std::fs::read_to_string(&svg_q).unwrap());
    assert!(!c.is_empty() && c.iter().all(|(k, _, _)| k == "pos"));
}

#[test]
fn analyze_twa_table_and_reject_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let twa = tmp.path().join("twa");
    let cfg = write_config(tmp.path(), "c.json", r#"{"t_final": 1.0, "sample_interval": 1.0}"#);
    ok(&run(&["twa", "--config", &cfg, "--trajectories", "200", "--out", twa.to_str().unwrap()]));
    let out = tmp.path().join("an");
    ok(&run(&["analyze", "--input", twa.join("twa_snapshots.csv").to_str().unwrap(), "--out", out.to_str().unwrap()]));
    assert!(out.join("histogram_t0.json").exists() && out.join("histogram_t1.json").exists());

    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    let r = run(&["render", "--input", bad.to_str().unwrap(), "--output", tmp.path().join("b.svg").to_str().unwrap()]);
    assert!(!r.status.success());
    let r = run(&["analyze", "--input", bad.to_str().unwrap(), "--out", tmp.path().join("b").to_str().unwrap()]);
    assert!(!r.status.success());
    assert_eq!(manifest(&tmp.path().join("b"))["status"], "partial");
}
