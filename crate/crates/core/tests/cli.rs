//! End-to-end runs of the `firefront` binary.

use std::path::Path;
use std::process::{Command, Output};

fn firefront(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_firefront"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const FLAT: &str = r#"
name = "flat"
[domain]
x = [-3.0, 3.0]
y = [-3.0, 3.0]
[terrain]
kind = "flat"
[fields]
a = 1.0
h = 0.5
[ignition]
kind = "point"
at = [0.0, 0.0]
[solver]
n = 16
dt = 0.05
t_end = 1.0
output_interval = 0.5
[oracle]
nx = 60
radius = 2
"#;

#[test]
fn missing_terrain_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = FLAT.replace("[terrain]\nkind = \"flat\"\n", "");
    let cfg = write_config(dir.path(), "bad.toml", &text);
    let o = firefront(&["check", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("terrain: required"), "{}", stderr(&o));
}

#[test]
fn invalid_value_names_its_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &FLAT.replace("dt = 0.05", "dt = -1.0"));
    let o = firefront(&["run", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("solver.dt"), "{}", stderr(&o));
}

#[test]
fn unreadable_config_is_a_config_error() {
    let o = firefront(&["run", "/nonexistent/scenario.toml"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn check_reports_convexity() {
    let ok = firefront(&["check", "fig2"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("result: pass"));

    let bad = firefront(&["check", "fig9"]);
    assert_eq!(bad.status.code(), Some(2));
    let text = stdout(&bad);
    assert!(text.contains("non-convex directions"), "{text}");
    assert!(text.contains("result: FAIL"));
}

#[test]
fn run_refuses_nonconvex_metric_unless_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let refused = firefront(&["run", "fig9", "--out", out]);
    assert_eq!(refused.status.code(), Some(2));
    assert!(!dir.path().join("fronts.csv").exists());

    let forced = firefront(&["run", "fig9", "--allow-nonconvex", "--n", "16", "--out", out]);
    assert_eq!(forced.status.code(), Some(0), "{}", stderr(&forced));
    assert!(dir.path().join("fronts.csv").exists());
}

#[test]
fn run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flat.toml", FLAT);
    let out = dir.path().join("out");
    let o = firefront(&["run", &cfg, "--out", out.to_str().unwrap(), "--contours"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let fronts = std::fs::read_to_string(out.join("fronts.csv")).unwrap();
    let mut lines = fronts.lines();
    assert_eq!(lines.next(), Some("t,trajectory_id,seed_param,x,y,z,vx,vy,status"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    // three output times, sixteen trajectories
    assert_eq!(rows.len(), 48);
    for r in &rows {
        assert_eq!(r.len(), 9);
        assert_eq!(r[8], "live");
        let t: f64 = r[0].parse().unwrap();
        let (x, y): (f64, f64) = (r[3].parse().unwrap(), r[4].parse().unwrap());
        assert!((x.hypot(y) - 1.5 * t).abs() < 1e-7, "{r:?}");
    }

    let traj = std::fs::read_to_string(out.join("trajectories.csv")).unwrap();
    assert!(traj.starts_with("t,trajectory_id,x,y,z,vx,vy\n"));
    assert_eq!(traj.lines().count(), 1 + 16 * 21);
    let cuts = std::fs::read_to_string(out.join("cuts.csv")).unwrap();
    assert_eq!(cuts, "t_cut,x,y,kind,ids\n");
    let svg = std::fs::read_to_string(out.join("fronts.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(stdout(&o).contains("burned area"));
}

#[test]
fn cut_points_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let o = firefront(&["run", "fig7", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cuts = std::fs::read_to_string(dir.path().join("cuts.csv")).unwrap();
    let rows: Vec<&str> = cuts.lines().skip(1).collect();
    assert!(!rows.is_empty());
    for r in rows {
        let f: Vec<&str> = r.split(',').collect();
        assert_eq!(f.len(), 5);
        assert!(matches!(f[3], "crossing" | "focal"));
        assert!(f[4].split(';').all(|id| id.parse::<usize>().is_ok()));
    }
}

#[test]
fn output_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one");
    let many = dir.path().join("many");
    for (out, threads) in [(&one, "1"), (&many, "4")] {
        let o = firefront(&["run", "fig6", "--allow-nonconvex", "--threads", threads, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["fronts.csv", "trajectories.csv", "cuts.csv", "fronts.svg"] {
        assert_eq!(std::fs::read(one.join(f)).unwrap(), std::fs::read(many.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn indicatrix_writes_svg() {
    let dir = tempfile::tempdir().unwrap();
    let o = firefront(&["indicatrix", "fig4", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let svg = std::fs::read_to_string(dir.path().join("indicatrices.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("<polygon") || svg.contains("<path"));
}

#[test]
fn oracle_compares_fronts_with_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "flat.toml", FLAT);
    let out = dir.path().join("out");
    let o = firefront(&["oracle", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.matches("median=").count(), 2, "{text}");
    let asc = std::fs::read_to_string(out.join("arrival.asc")).unwrap();
    assert!(asc.starts_with("ncols"));
    assert!(asc.contains("NODATA_value"));
}

#[test]
fn oracle_rejects_time_dependent_fields() {
    let dir = tempfile::tempdir().unwrap();
    let o = firefront(&["oracle", "fig8", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}
