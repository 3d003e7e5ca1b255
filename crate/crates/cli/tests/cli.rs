use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_quasicontrol");

struct Case {
    dir: TempDir,
}

impl Case {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("run.toml"), config).unwrap();
        Self { dir }
    }

    fn out(&self) -> PathBuf {
        self.dir.path().join("traj.out")
    }

    fn run(&self, command: &str, extra: &[&str]) -> Output {
        Command::new(BIN)
            .arg(command)
            .arg("--config")
            .arg(self.dir.path().join("run.toml"))
            .args(extra)
            .output()
            .unwrap()
    }

    fn run_to_file(&self, command: &str, extra: &[&str]) -> Output {
        let out = self.out();
        let mut args = vec!["--output", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        self.run(command, &args)
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(|s| s.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

const RIGID: &str = r#"
[system]
name = "planar-rigid-body"

[state]
q = [0.0, 0.0, 0.2]
y = [0.3, -0.2, 0.1]
ydot_a = [0.1, 0.2]
p = [0.05, -0.1, 0.02]
ptilde_alpha = [0.1]
"#;

const POINT_MASS: &str = r#"
[system]
name = "point-mass-lq"
"#;

#[test]
fn derive_rigid_body_is_regular() {
    let case = Case::new("[system]\nname = \"planar-rigid-body\"\n");
    let o = case.run("derive", &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("symplectic: true"), "{s}");
    assert!(s.contains("C^3_13"), "{s}");
    // Independently derived value at the zero state with unit parameters.
    assert!(s.contains("[1.0000000000000000e0, 0.0000000000000000e0]"), "{s}");
    assert!(s.contains("[0.0000000000000000e0, 4.0000000000000000e0]"), "{s}");
}

#[test]
fn derive_point_mass_has_no_structure_coefficients() {
    let o = Case::new(POINT_MASS).run("derive", &[]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(!s.lines().any(|l| l.starts_with("  C^")), "{s}");
}

#[test]
fn derive_constant_cost_is_degenerate() {
    let o = Case::new("[system]\nname = \"planar-rigid-body\"\ncost = \"constant\"\n").run("derive", &[]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stdout(&o).contains("symplectic: false"));
}

#[test]
fn config_errors_report_position() {
    let o = Case::new("[system]\nname = \"planar-rigid-body\"\nmass = [1\n").run("derive", &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = Case::new("[system]\nname = \"pendulum\"\n").run("simulate", &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let o = Case::new(POINT_MASS).run("solve", &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("[boundary]"));
}

#[test]
fn simulate_rigid_body_records_every_tenth_step() {
    let case = Case::new(&format!("{RIGID}\n[integrator]\ndt = 1e-3\ntf = 1.0\nsave_every = 10\n"));
    let o = case.run_to_file("simulate", &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = read_csv(&case.out());
    assert_eq!(header.len(), 17);
    assert_eq!(rows.len(), 101);
    let h = col(&header, "H");
    let h0 = rows[0][h];
    assert!(rows.iter().all(|r| (r[h] - h0).abs() <= 1e-8));
    let phi = col(&header, "max_phi");
    assert!(rows.iter().all(|r| r[phi] <= 1e-6));
    assert_eq!(rows[100][0], 1.0);
}

#[test]
fn simulate_zero_span_writes_the_initial_state() {
    let case = Case::new(&format!("{RIGID}\n[integrator]\ntf = 0.0\n"));
    let o = case.run_to_file("simulate", &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = read_csv(&case.out());
    assert_eq!(rows.len(), 1);
    let expect = [0.0, 0.0, 0.0, 0.2, 0.3, -0.2, 0.1, 0.1, 0.2, 0.05, -0.1, 0.02, 0.1];
    assert_eq!(&rows[0][..expect.len()], &expect);
    assert_eq!(header[12], "ptilde3");
}

#[test]
fn simulate_point_mass_coasts() {
    let case = Case::new(&format!(
        "{POINT_MASS}\n[state]\nq = [0.5, 1.0]\ny = [0.25, -1.0]\n[integrator]\ndt = 0.01\ntf = 2.0\nsave_every = 20\n"
    ));
    let o = case.run_to_file("simulate", &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = read_csv(&case.out());
    let (q1, q2, u1) = (col(&header, "q1"), col(&header, "q2"), col(&header, "u1"));
    for r in &rows {
        assert_eq!(r[u1], 0.0);
        assert!((r[q1] - (0.5 + 0.25 * r[0])).abs() < 1e-12);
        assert!((r[q2] - (1.0 - r[0])).abs() < 1e-12);
    }
}

#[test]
fn jsonl_mirrors_csv_columns() {
    let case = Case::new(&format!("{RIGID}\n[integrator]\ndt = 0.01\ntf = 0.1\n"));
    assert_eq!(code(&case.run_to_file("simulate", &[])), 0);
    let (header, rows) = read_csv(&case.out());
    assert_eq!(code(&case.run_to_file("simulate", &["--format", "jsonl"])), 0);
    let text = std::fs::read_to_string(case.out()).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), rows.len());
    for (obj, row) in lines.iter().zip(&rows) {
        let obj = obj.as_object().unwrap();
        assert_eq!(obj.keys().cloned().collect::<Vec<_>>(), header);
        for (k, v) in header.iter().zip(row) {
            assert_eq!(obj[k].as_f64().unwrap().to_bits(), v.to_bits(), "{k}");
        }
    }
}

#[test]
fn simulate_degenerate_system_exits_with_regularity_failure() {
    let case = Case::new("[system]\nname = \"planar-rigid-body\"\ncost = \"constant\"\n[integrator]\ntf = 0.1\n");
    let o = case.run_to_file("simulate", &[]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    let (header, rows) = read_csv(&case.out());
    assert_eq!(header[0], "t");
    assert!(rows.is_empty());
}

#[test]
fn simulate_overflowing_state_exits_nonfinite() {
    let case = Case::new(&format!("{POINT_MASS}\n[state]\ny = [1e200, 0.0]\np = [1e200, 0.0]\n[integrator]\ntf = 0.1\ndt = 0.01\n"));
    let o = case.run_to_file("simulate", &[]);
    assert_eq!(code(&o), 5, "{}", stderr(&o));
}

#[test]
fn solve_point_mass_textbook_problem() {
    let case = Case::new(&format!(
        "{POINT_MASS}\n[integrator]\ndt = 0.01\n[boundary]\nq0 = [0.0, 0.0]\ny0 = [0.0, 0.0]\nqf = [1.0, 0.0]\nyf = [0.0, 0.0]\n"
    ));
    let o = case.run_to_file("solve", &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(stdout(&o).lines().last().unwrap()).unwrap();
    assert_eq!(summary["converged"], true);
    assert!((summary["cost"].as_f64().unwrap() - 6.0).abs() < 1e-4);
    let (header, rows) = read_csv(&case.out());
    let u = col(&header, "u1");
    assert!(rows.iter().all(|r| (r[u] - (6.0 - 12.0 * r[0])).abs() < 1e-6));
}

#[test]
fn solve_zero_length_maneuver() {
    let case = Case::new(&format!(
        "{POINT_MASS}\n[integrator]\ndt = 0.01\n[boundary]\nq0 = [0.3, 0.0]\ny0 = [0.0, 0.0]\nqf = [0.3, 0.0]\nyf = [0.0, 0.0]\n"
    ));
    let o = case.run_to_file("solve", &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(stdout(&o).lines().last().unwrap()).unwrap();
    assert!(summary["iterations"].as_u64().unwrap() <= 2);
    assert_eq!(summary["cost"].as_f64().unwrap(), 0.0);
}

#[test]
fn solve_rigid_body_small_maneuver() {
    let case = Case::new(
        "[system]\nname = \"planar-rigid-body\"\n[integrator]\ndt = 1e-2\n\
         [boundary]\nq0 = [0.0, 0.0, 0.0]\ny0 = [0.0, 0.0, 0.0]\nqf = [0.1, 0.0, 0.0]\nyf = [0.0, 0.0, 0.0]\n",
    );
    let o = case.run_to_file("solve", &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(stdout(&o).lines().last().unwrap()).unwrap();
    assert!(summary["residual"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn solve_unreachable_target_exits_six() {
    let case = Case::new(&format!(
        "{POINT_MASS}\n[integrator]\ndt = 0.1\n[boundary]\nq0 = [0.0, 0.0]\ny0 = [0.0, 0.0]\nqf = [0.0, 0.0]\nyf = [0.0, 1.0]\nmax_iter = 3\n"
    ));
    let o = case.run_to_file("solve", &[]);
    assert_eq!(code(&o), 6, "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(stdout(&o).lines().last().unwrap()).unwrap();
    assert_eq!(summary["converged"], false);
}

#[test]
fn check_rigid_body_passes() {
    let case = Case::new(&format!("{RIGID}\n[integrator]\ntf = 0.5\n"));
    let o = case.run("check", &["--seed", "11"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let s = stdout(&o);
    assert_eq!(s.lines().filter(|l| l.starts_with("PASS")).count(), 6, "{s}");
}

#[test]
fn check_point_mass_includes_closed_form() {
    let o = Case::new(&format!("{POINT_MASS}\n[integrator]\ndt = 0.01\n")).run("check", &[]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS LQ control closed form"));
}

#[test]
fn check_reports_singular_frame() {
    let o = Case::new("[system]\nname = \"planar-rigid-body\"\ncompletion_scale = 0.0\n[integrator]\ntf = 0.01\n")
        .run("check", &[]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("FAIL frame round trip: frame is numerically singular"), "{}", stdout(&o));
}

#[test]
fn command_in_config_must_match() {
    let o = Case::new(&format!("command = \"check\"\n{POINT_MASS}")).run("derive", &[]);
    assert_eq!(code(&o), 2);
}
