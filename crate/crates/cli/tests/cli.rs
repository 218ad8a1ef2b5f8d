//! End-to-end command tests against a small synthetic incident log.

use std::path::{Path, PathBuf};
use std::process::Command;

use regime_design_core::model::{Demand, Instance, Regime};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_regime-design"))
}

/// Deterministic two-borough fixture: six incidents per (borough, window),
/// spread out so the conflict graph is empty, alternating call types.
fn write_fixture_csv(path: &Path) {
    use chrono::{Duration, NaiveDate};
    let mut rows = String::from(
        "CAD_INCIDENT_ID,INCIDENT_DATETIME,BOROUGH,INITIAL_CALL_TYPE,INCIDENT_DISPATCH_AREA,FIRST_ASSIGNMENT_DATETIME,INCIDENT_CLOSE_DATETIME,INCIDENT_TRAVEL_TM_SECONDS_QY\n",
    );
    let day = NaiveDate::from_ymd_opt(2025, 3, 3).unwrap();
    let windows = [20u32, 8u32];
    let fmt = "%Y-%m-%d %H:%M:%S";
    for (b, borough) in ["BRONX", "QUEENS"].iter().enumerate() {
        for (w, start_hour) in windows.iter().enumerate() {
            let window_start = day.and_hms_opt(*start_hour, 0, 0).unwrap();
            for i in 0..6usize {
                let call = if i % 2 == 0 { "SICK" } else { "CARDBR" };
                let occurred = window_start + Duration::minutes(7 + 67 * i as i64);
                let assigned = occurred + Duration::minutes(3);
                let sojourn = Duration::minutes((25 + 5 * i + 3 * b + 2 * w) as i64);
                let closed = assigned + sojourn;
                let travel = 240 + 30 * i;
                rows.push_str(&format!(
                    "{borough}-{w}-{i},{},{borough},{call},{borough}-A{},{},{},{travel}\n",
                    occurred.format(fmt),
                    i % 2,
                    assigned.format(fmt),
                    closed.format(fmt),
                ));
            }
        }
    }
    std::fs::write(path, rows).unwrap();
}

fn write_config(dir: &Path, csv: &Path) -> PathBuf {
    let path = dir.join("config.toml");
    let text = format!(
        r#"
boroughs = ["BRONX", "QUEENS"]

[input]
csv = "{}"

[regimes]
SICK = 0
CARDBR = 1

[[windows]]
name = "night"
start = "2025-03-03 20:00"
end = "2025-03-04 08:00"

[[windows]]
name = "peak"
start = "2025-03-03 08:00"
end = "2025-03-03 20:00"

[[profiles]]
name = "SMALL"
beta = 0.5
alpha = 0.1
psi = 1.2
phi = 1.0
kappa = 0.05

[[profiles]]
name = "LOOSE"
beta = 0.34
alpha = 0.2
psi = 1.5
phi = 1.1
kappa = 0.0
"#,
        csv.display()
    );
    std::fs::write(&path, text).unwrap();
    path
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

fn setup() -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let csv = root.join("incidents.csv");
    write_fixture_csv(&csv);
    let config = write_config(&root, &csv);
    Workspace {
        _dir: dir,
        root,
        config,
    }
}

fn run_ok(cmd: &mut Command) {
    let output = cmd.output().unwrap();
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn ingest(ws: &Workspace) -> PathBuf {
    let out = ws.root.join("ingested");
    run_ok(bin().args([
        "ingest",
        "--config",
        ws.config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    out
}

#[test]
fn ingest_writes_instances_and_reruns_identically() {
    let ws = setup();
    let out = ingest(&ws);
    let summary = std::fs::read_to_string(out.join("ingest_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 4, "summary was:\n{summary}");
    let instance_path = out.join("instance_bronx_night.json");
    let first = std::fs::read_to_string(&instance_path).unwrap();
    let inst = Instance::from_json(&first).unwrap();
    assert_eq!(inst.num_demands(), 6);
    assert!(inst.conflict_edges().is_empty());

    // rerun into a second directory: identical instance bytes
    let out2 = ws.root.join("ingested2");
    run_ok(bin().args([
        "ingest",
        "--config",
        ws.config.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
    ]));
    let second = std::fs::read_to_string(out2.join("instance_bronx_night.json")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn solve_poly_matches_enum_and_writes_plan() {
    let ws = setup();
    let out = ingest(&ws);
    let instance = out.join("instance_bronx_night.json");
    let baseline = out.join("baseline_bronx_night.json");

    let mut objectives = Vec::new();
    for method in ["poly", "enum"] {
        let run_dir = ws.root.join(format!("solve_{method}"));
        run_ok(bin().args([
            "solve",
            "--instance",
            instance.to_str().unwrap(),
            "--profile",
            "SMALL",
            "--config",
            ws.config.to_str().unwrap(),
            "--method",
            method,
            "--baseline",
            baseline.to_str().unwrap(),
            "--out",
            run_dir.to_str().unwrap(),
        ]));
        let plan_text = std::fs::read_to_string(run_dir.join("plan.json")).unwrap();
        let plan = regime_design_core::ServicePlan::from_json(&plan_text).unwrap();
        assert!(run_dir.join("plan.json.manifest.json").exists());
        objectives.push(plan.objective_value);
    }
    let rel = (objectives[0] - objectives[1]).abs() / (1.0 + objectives[1].abs());
    assert!(rel < 1e-5, "poly {} vs enum {}", objectives[0], objectives[1]);
}

#[test]
fn benders_writes_iteration_log() {
    let ws = setup();
    let out = ingest(&ws);
    let run_dir = ws.root.join("solve_benders");
    run_ok(bin().args([
        "solve",
        "--instance",
        out.join("instance_queens_peak.json").to_str().unwrap(),
        "--profile",
        "LOOSE",
        "--config",
        ws.config.to_str().unwrap(),
        "--method",
        "benders",
        "--out",
        run_dir.to_str().unwrap(),
    ]));
    let log = std::fs::read_to_string(run_dir.join("iterations.csv")).unwrap();
    assert!(log.starts_with("iter,lb,ub,gap,cut_kind,subproblem_status,wall_ms"));
    assert!(log.lines().count() >= 2);
}

#[test]
fn infeasible_conflicts_exit_code_two() {
    let ws = setup();
    // triangle conflict graph needing two protected demands
    let demands = vec![
        Demand::new("a", 1.0, 30.0, 0.1, 1.0).unwrap(),
        Demand::new("b", 1.0, 30.0, 0.1, 1.0).unwrap(),
        Demand::new("c", 1.0, 30.0, 0.1, 1.0).unwrap(),
    ];
    let regimes = vec![Regime::new(0, 0.05, 1.0, 1.0).unwrap()];
    let edges = [
        ("a".to_string(), "b".to_string()),
        ("b".to_string(), "c".to_string()),
        ("a".to_string(), "c".to_string()),
    ];
    let instance = Instance::new(demands, regimes, edges, 1e-4).unwrap();
    let path = ws.root.join("triangle.json");
    std::fs::write(&path, instance.to_json().unwrap()).unwrap();

    let output = bin()
        .args([
            "solve",
            "--instance",
            path.to_str().unwrap(),
            "--profile",
            "SMALL",
            "--config",
            ws.config.to_str().unwrap(),
            "--method",
            "benders",
            "--out",
            ws.root.join("tri_out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "{output:?}");
}

#[test]
fn poly_on_conflicted_instance_exits_three() {
    let ws = setup();
    let demands = vec![
        Demand::new("a", 1.0, 30.0, 0.1, 1.0).unwrap(),
        Demand::new("b", 1.0, 30.0, 0.1, 1.0).unwrap(),
    ];
    let regimes = vec![Regime::new(0, 0.05, 1.0, 1.0).unwrap()];
    let instance = Instance::new(
        demands,
        regimes,
        [("a".to_string(), "b".to_string())],
        1e-4,
    )
    .unwrap();
    let path = ws.root.join("edge.json");
    std::fs::write(&path, instance.to_json().unwrap()).unwrap();
    let output = bin()
        .args([
            "solve",
            "--instance",
            path.to_str().unwrap(),
            "--profile",
            "SMALL",
            "--config",
            ws.config.to_str().unwrap(),
            "--method",
            "poly",
            "--out",
            ws.root.join("poly_out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3), "{output:?}");
}

#[test]
fn simulate_is_deterministic_and_rejects_unstable_plans() {
    let ws = setup();
    let out = ingest(&ws);
    let instance_path = out.join("instance_bronx_night.json");
    let solve_dir = ws.root.join("sim_solve");
    run_ok(bin().args([
        "solve",
        "--instance",
        instance_path.to_str().unwrap(),
        "--profile",
        "SMALL",
        "--config",
        ws.config.to_str().unwrap(),
        "--method",
        "poly",
        "--out",
        solve_dir.to_str().unwrap(),
    ]));

    let mut outputs = Vec::new();
    for run in ["sim_a", "sim_b"] {
        let sim_dir = ws.root.join(run);
        run_ok(bin().args([
            "simulate",
            "--instance",
            instance_path.to_str().unwrap(),
            "--plan",
            solve_dir.join("plan.json").to_str().unwrap(),
            "--profile",
            "SMALL",
            "--config",
            ws.config.to_str().unwrap(),
            "--n-samples",
            "20000",
            "--seed",
            "7",
            "--out",
            sim_dir.to_str().unwrap(),
        ]));
        outputs.push(std::fs::read_to_string(sim_dir.join("simulation.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);

    // unstable plan: service rates below the arrival rates
    let instance = Instance::from_json(&std::fs::read_to_string(&instance_path).unwrap()).unwrap();
    let unstable = regime_design_core::ServicePlan::new(
        vec![0.0; instance.num_regimes()],
        vec![false; instance.num_demands()],
        0.0,
    );
    let bad_path = ws.root.join("unstable.json");
    std::fs::write(&bad_path, unstable.to_json().unwrap()).unwrap();
    let output = bin()
        .args([
            "simulate",
            "--instance",
            instance_path.to_str().unwrap(),
            "--plan",
            bad_path.to_str().unwrap(),
            "--n-samples",
            "10",
            "--out",
            ws.root.join("sim_bad").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!output.status.success());
}

#[test]
fn report_of_identical_plans_is_all_zeros() {
    let ws = setup();
    let out = ingest(&ws);
    let instance = out.join("instance_bronx_night.json");
    let baseline = out.join("baseline_bronx_night.json");
    let bp_dir = ws.root.join("bp");
    run_ok(bin().args([
        "baseline-plan",
        "--instance",
        instance.to_str().unwrap(),
        "--baseline",
        baseline.to_str().unwrap(),
        "--profile",
        "SMALL",
        "--config",
        ws.config.to_str().unwrap(),
        "--out",
        bp_dir.to_str().unwrap(),
    ]));
    let plan = bp_dir.join("baseline_plan.json");
    let report_dir = ws.root.join("report");
    run_ok(bin().args([
        "report",
        "--instance",
        instance.to_str().unwrap(),
        "--profile",
        "SMALL",
        "--config",
        ws.config.to_str().unwrap(),
        "--plan",
        plan.to_str().unwrap(),
        "--baseline-plan",
        plan.to_str().unwrap(),
        "--out",
        report_dir.to_str().unwrap(),
    ]));
    let deviation = std::fs::read_to_string(report_dir.join("deviation.csv")).unwrap();
    for line in deviation.lines().skip(1) {
        let change: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(change, 0.0, "{line}");
    }
    let paired = std::fs::read_to_string(report_dir.join("paired.csv")).unwrap();
    assert_eq!(paired.lines().count(), 1 + 6);
}

#[test]
fn mini_sweep_produces_one_row_per_target_and_reruns_identically() {
    let ws = setup();
    let sweep_dir = ws.root.join("sweep");
    let run_sweep = |dir: &Path| {
        run_ok(bin().args([
            "sweep",
            "--config",
            ws.config.to_str().unwrap(),
            "--methods",
            "poly",
            "--jobs",
            "2",
            "--out",
            dir.to_str().unwrap(),
        ]));
        std::fs::read_to_string(dir.join("sweep.csv")).unwrap()
    };
    let first = run_sweep(&sweep_dir);
    // 2 boroughs x 2 windows x 2 profiles x 1 method
    assert_eq!(first.lines().count(), 1 + 8, "{first}");
    for line in first.lines().skip(1) {
        assert!(line.contains(",ok,"), "unexpected row: {line}");
    }
    let second = run_sweep(&ws.root.join("sweep2"));
    let strip = |text: &str| {
        text.lines()
            .map(|l| {
                // wall_ms differs between runs; drop the last column
                let idx = l.rfind(',').unwrap();
                l[..idx].to_string()
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&first), strip(&second));
}
