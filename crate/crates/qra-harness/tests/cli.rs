//! End-to-end CLI behavior: exit codes, output schema, rerun determinism.
//!
//! Every invocation spawns a fresh process with a cold reservoir cache, so
//! these tests shrink the register to 3 data qubits through a config file;
//! the full geometry is covered by the acceptance suite.

use std::path::Path;
use std::process::Command;

fn qra() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qra"))
}

fn tempdir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("qra-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Config shrinking the register; returns the file path.
fn small_register_config(dir: &Path, extra: &str) -> std::path::PathBuf {
    named_config(dir, "small.conf", extra)
}

fn named_config(dir: &Path, name: &str, extra: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, format!("n_data_qubits=3\n{extra}")).unwrap();
    path
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn run_writes_pinned_csv_schema_and_rerun_is_byte_identical() {
    let dir = tempdir("determinism");
    let config = small_register_config(&dir, "");
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out in [&out_a, &out_b] {
        let status = qra()
            .args(["run", "--exp", "2", "--seeds", "904", "--trials", "1"])
            .args(["--nc", "5", "--no-timing"])
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let csv_a = read(&out_a.join("exp2_results.csv"));
    let csv_b = read(&out_b.join("exp2_results.csv"));
    assert_eq!(csv_a.as_bytes(), csv_b.as_bytes(), "reruns must be byte-identical");
    assert!(csv_a.starts_with(
        "exp_id,seed,trial,nc,mse_path1,mse_path2,final_loss,converged_at,wall_time_ms\n"
    ));
    assert_eq!(csv_a.lines().count(), 2);
    let fields: Vec<&str> = csv_a.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(fields[0], "2");
    assert_eq!(fields[8], "0"); // --no-timing zeroes the wall time
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn summarize_compares_experiments() {
    let dir = tempdir("summarize");
    let config = small_register_config(&dir, "");
    for exp in ["2", "7"] {
        let status = qra()
            .args(["run", "--exp", exp, "--seeds", "904,905", "--trials", "3"])
            .args(["--nc", "5", "--no-timing"])
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&dir)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let output = qra()
        .args(["summarize", "--compare", "7:2"])
        .arg("--in")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("exp 7 vs 2"), "stdout: {stdout}");

    let summary = read(&dir.join("summary.csv"));
    assert!(summary.starts_with("exp_id,nc,n_runs,mean_mse1,std_mse1,mean_loss,std_loss\n"));
    assert_eq!(summary.lines().count(), 3); // header + one row per (exp, nc)
    let comparisons = read(&dir.join("comparisons.csv"));
    let row = comparisons.lines().nth(1).unwrap();
    let ratio: f64 = row.split(',').nth(4).unwrap().parse().unwrap();
    assert!(ratio < 0.5, "exp7/exp2 ratio {ratio} should show the advantage");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn config_file_feeds_run() {
    let dir = tempdir("config");
    let config = small_register_config(
        &dir,
        "# desk-scale shot-noise run\nseeds=904\ntrials=1\nnc=4\nshots_enc=50\nshots_dec=50\nzero_wall_time=true\n",
    );
    let status = qra()
        .args(["run", "--exp", "2"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = read(&dir.join("exp2_results.csv"));
    let fields: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(fields[3], "4"); // nc from the config file
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn dump_state_writes_reservoir_and_state_json() {
    let dir = tempdir("dump");
    let config = small_register_config(&dir, "");
    let status = qra()
        .args(["run", "--exp", "1", "--seeds", "904", "--trials", "1"])
        .args(["--nc", "4", "--no-timing", "--dump-state"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let state: serde_json::Value =
        serde_json::from_str(&read(&dir.join("states/exp1_seed904_trial0_nc4.json"))).unwrap();
    assert_eq!(state["gamma"].as_array().unwrap().len(), 4);
    let spec: serde_json::Value =
        serde_json::from_str(&read(&dir.join("states/reservoir_a_seed904.json"))).unwrap();
    assert_eq!(spec["seed"], 904);
    // 4 qubits: 12 singles + 54 pairs + 4 triples + 1 quadruple per circuit
    assert_eq!(spec["total_parameter_count"], 142);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn probe_reports_subunit_radius() {
    let dir = tempdir("probe");
    let config = small_register_config(&dir, "");
    let output = qra()
        .args(["probe", "--seed", "904", "--nc", "4"])
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    let line = stdout
        .lines()
        .find(|l| l.contains("spectral radius"))
        .unwrap_or_else(|| panic!("no radius line in: {stdout}"));
    let radius: f64 = line
        .split("spectral radius = ")
        .nth(1)
        .unwrap()
        .split(',')
        .next()
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(radius < 1.0 && radius > 0.0, "radius {radius}");

    // the probe refuses noisy configs
    let noisy = named_config(&dir, "noisy.conf", "shots_enc=100\nshots_dec=100\n");
    let status = qra()
        .args(["probe", "--seed", "904", "--nc", "4"])
        .arg("--config")
        .arg(&noisy)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn exit_codes_follow_the_contract() {
    // usage error: 2
    let status = qra().args(["run", "--exp", "4"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
    let status = qra().arg("bogus-subcommand").status().unwrap();
    assert_eq!(status.code(), Some(2));

    // runtime failure: 1
    let status = qra()
        .args(["summarize", "--in", "/nonexistent/path.csv"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // invalid config value caught at runtime: 1
    let dir = tempdir("exitcodes");
    let config_path = dir.join("bad.conf");
    std::fs::write(&config_path, "p_dep=2.0\n").unwrap();
    let status = qra()
        .args(["run", "--exp", "3"])
        .arg("--config")
        .arg(&config_path)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let _ = std::fs::remove_dir_all(&dir);
}
