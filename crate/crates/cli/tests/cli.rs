use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn zeno(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zeno"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

/// Data rows of a CSV, split on commas, header excluded.
fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(path: &Path, i: usize) -> Vec<f64> {
    rows(path).iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn selftest_passes() {
    let dir = TempDir::new().unwrap();
    let out = zeno(&["selftest"], dir.path());
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 4);
}

#[test]
fn selftest_reports_injected_fault() {
    let dir = TempDir::new().unwrap();
    let out = zeno(&["selftest", "--inject-fault"], dir.path());
    assert_eq!(code(&out), 3);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL oracle-equivalence"));
    assert!(stdout.contains("PASS unitarity"));
}

#[test]
fn decoupled_level_has_zero_rates() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[model]\ncoupling = 0.0\nn_bath = 40\n");
    let out = zeno(&["ri-rate", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let file = dir.path().join("o/ri_rate_0.csv");
    let gamma = column(&file, 1);
    assert_eq!(gamma.len(), 100);
    assert!(gamma.iter().all(|&g| g == 0.0));
}

#[test]
fn log_grid_is_written_in_order() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "[model]\nn_bath = 60\n[grid]\ntau_min = 1e-3\ntau_max = 3.0\ntau_count = 40\ntau_spacing = \"log\"\n",
    );
    let out = zeno(&["ri-rate", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(code(&out), 0);
    let file = dir.path().join("o/ri_rate_0.csv");
    let header = fs::read_to_string(&file).unwrap();
    assert!(header.contains("\ntau,gamma_eff,gamma_zeno_asymptote,gamma_normalized,flag\n"));
    let tau = column(&file, 0);
    assert_eq!(tau.len(), 40);
    assert!(tau.windows(2).all(|w| w[1] > w[0]));
    assert!((tau[0] - 1e-3).abs() < 1e-15 && (tau[39] - 3.0).abs() < 1e-12);
}

#[test]
fn one_point_design_map() {
    let dir = TempDir::new().unwrap();
    let out = zeno(
        &["design-map", "--omega0", "3", "--tau", "0.5", "--out", "d"],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let data = rows(&dir.path().join("d/design_map.csv"));
    assert_eq!(data.len(), 1);
    assert_eq!(data[0][0], "3");
    assert_eq!(data[0][3], "0");
}

#[test]
fn design_map_needs_level_grid() {
    let dir = TempDir::new().unwrap();
    let out = zeno(&["design-map", "--out", "d"], dir.path());
    assert_eq!(code(&out), 1);
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[model]\nhopping = 1.0\ncupling = 0.2\n");
    let out = zeno(&["ri-rate", "--config", &cfg], dir.path());
    assert_eq!(code(&out), 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("cupling") && stderr.contains("line 3"),
        "{stderr}"
    );
}

#[test]
fn missing_config_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let out = zeno(&["ri-rate", "--config", "absent.toml"], dir.path());
    assert_eq!(code(&out), 1);
}

#[test]
fn oversized_step_is_a_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "[model]\nomega0 = 3.0\nn_bath = 40\n[protocol]\nkind = \"ec\"\n[run]\ndt = 1.0\nt_end = 20.0\ntau = []\n",
    );
    let out = zeno(&["ec-run", "--config", &cfg, "--out", "e"], dir.path());
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn output_is_deterministic_across_worker_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[model]\nn_bath = 80\n[grid]\ntau_count = 30\n");
    for (workers, out) in [("1", "a"), ("4", "b")] {
        let res = zeno(
            &[
                "ri-rate",
                "--config",
                &cfg,
                "--omega0=-3,0,1.5,3",
                "--workers",
                workers,
                "--out",
                out,
            ],
            dir.path(),
        );
        assert_eq!(code(&res), 0);
    }
    for i in 0..4 {
        let name = format!("ri_rate_{i}.csv");
        let a = fs::read_to_string(dir.path().join("a").join(&name)).unwrap();
        let b = fs::read_to_string(dir.path().join("b").join(&name)).unwrap();
        // the echoed output directory is the only difference
        assert_eq!(a.replace("dir = \"a\"", ""), b.replace("dir = \"b\"", ""));
    }
}

#[test]
fn echoed_header_reproduces_the_run() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "[model]\nomega0 = 1.2\nn_bath = 50\n[grid]\ntau_count = 20\n",
    );
    assert_eq!(
        code(&zeno(
            &["ri-rate", "--config", &cfg, "--out", "a"],
            dir.path()
        )),
        0
    );
    let first = fs::read_to_string(dir.path().join("a/ri_rate_0.csv")).unwrap();
    let echoed: String = first
        .lines()
        .skip(1)
        .take_while(|l| l.starts_with("# ") && !l.starts_with("# omega0="))
        .map(|l| format!("{}\n", &l[2..]))
        .collect();
    let replay = write_config(dir.path(), &echoed);
    assert_eq!(
        code(&zeno(&["ri-rate", "--config", &replay], dir.path())),
        0
    );
    let second = fs::read_to_string(dir.path().join("a/ri_rate_0.csv")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn uncoupled_ec_trajectory_stays_flat() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "[model]\ncoupling = 0.0\nn_bath = 30\n[protocol]\nkind = \"ec\"\n[run]\np0 = 0.7\nt_end = 10.0\ndt = 0.01\ntau = [0.5]\n",
    );
    let out = zeno(&["ec-run", "--config", &cfg, "--out", "e"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let p = column(&dir.path().join("e/ec_trajectory.csv"), 1);
    assert_eq!(p.len(), 1001);
    assert!(p.iter().all(|&x| (x - 0.7).abs() < 1e-15));
    let rates = rows(&dir.path().join("e/ec_rates.csv"));
    assert_eq!(rates.len(), 1);
    for v in &rates[0][1..] {
        assert!(v.parse::<f64>().unwrap().abs() < 1e-12, "{v}");
    }
}

#[test]
fn ri_evolve_approaches_fixed_point() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "[model]\nn_bath = 60\n[bath]\noccupation = \"constant\"\nvalue = 0.4\n[run]\np0 = 1.0\nn_steps = 2000\ntau = [0.8]\n",
    );
    let out = zeno(&["ri-evolve", "--config", &cfg, "--out", "r"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let file = dir.path().join("r/ri_evolve.csv");
    let text = fs::read_to_string(&file).unwrap();
    let fixed: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("# fixed_point="))
        .unwrap()
        .parse()
        .unwrap();
    let p = column(&file, 2);
    assert_eq!(p.len(), 2001);
    assert!((p[2000] - fixed).abs() < 1e-6);
    assert!((fixed - 0.4).abs() < 1e-12, "{fixed}");
}

#[test]
fn custom_protocol_writes_kept_entries() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "[model]\nn_bath = 3\n[protocol]\nkind = \"custom\"\nreset_pairs = [[1, 1], [2, 2], [3, 3]]\n[run]\nn_steps = 5\n",
    );
    let out = zeno(&["ri-evolve", "--config", &cfg, "--out", "c"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let data = rows(&dir.path().join("c/ri_evolve.csv"));
    assert_eq!(data.len(), 6);
    // 16 entries minus 3 reset diagonals, as re/im pairs, plus time
    assert_eq!(data[0].len(), 1 + 2 * 13);
}

#[test]
fn three_level_energies_vanish_at_short_steps() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "[grid]\ntau_min = 1e-3\ntau_max = 2.0\ntau_count = 60\ntau_spacing = \"log\"\nomega0_values = [0.0, 0.8, 3.0]\n",
    );
    let out = zeno(&["ri-rate", "--config", &cfg, "--out", "o"], dir.path());
    assert_eq!(code(&out), 0);
    for i in 0..3 {
        let file = dir.path().join(format!("o/ri_rate_{i}.csv"));
        let gamma = column(&file, 1);
        let normalized = column(&file, 3);
        assert!(gamma[0] < 1e-4 && gamma[0] < gamma[20]);
        assert!((normalized[0] / 1e-3 - 1.0).abs() < 0.02);
    }
}

#[test]
fn thermal_ec_run_relaxes_to_half_filling() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "[model]\nn_bath = 100\n[bath]\noccupation = \"fermi_dirac\"\nbeta = 2.0\n[protocol]\nkind = \"ec\"\n[run]\nt_end = 60.0\ndt = 0.01\ntau = []\nstride = 10\n",
    );
    let out = zeno(&["ec-run", "--config", &cfg, "--out", "e"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("e/ec_rates.csv").exists());
    let p = column(&dir.path().join("e/ec_trajectory.csv"), 1);
    assert_eq!(p[0], 1.0);
    assert!((p.last().unwrap() - 0.5).abs() < 0.05);
}

#[test]
fn design_map_is_symmetric_in_level_energy() {
    let dir = TempDir::new().unwrap();
    let out = zeno(
        &[
            "design-map",
            "--omega0=-3,-1,1,3",
            "--tau",
            "0.2,0.7,1.3",
            "--out",
            "d",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let gamma = column(&dir.path().join("d/design_map.csv"), 2);
    assert_eq!(gamma.len(), 12);
    for i in 0..4 {
        for j in 0..3 {
            let (a, b) = (gamma[3 * i + j], gamma[3 * (3 - i) + j]);
            assert!((a - b).abs() <= 1e-10 * a.max(1e-3));
        }
    }
}
