use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lpic::sim::parse_csv;

fn lpic() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lpic"));
    cmd.env_remove("LPIC_THREADS");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("failed to start lpic")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "lpic failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn filter_dump_second_stage() {
    let out = run(lpic().args(["filter-dump", "--kind", "G", "--K", "2", "--rho", "0.5", "--stage", "2"]));
    let rows: Vec<Vec<f64>> = stdout(&out)
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows, vec![vec![1.0, -0.5], vec![-0.5, 1.0]]);
}

#[test]
fn filter_dump_negative_rho_and_noise_kinds() {
    let out = run(lpic().args(["filter-dump", "--kind", "DC", "--K", "3", "--rho", "-0.2"]));
    assert_eq!(stdout(&out).lines().count(), 3);

    let out = run(lpic().args(["filter-dump", "--kind", "MMSE", "--K", "3", "--rho", "0.2"]));
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--sigma2"));

    let out = run(lpic().args(["filter-dump", "--kind", "MMSE", "--K", "3", "--rho", "0.2", "--sigma2", "0.1"]));
    assert_eq!(stdout(&out).lines().count(), 3);

    let out = run(lpic().args(["filter-dump", "--kind", "nope", "--K", "3", "--rho", "0.2"]));
    assert!(!out.status.success());
}

#[test]
fn analyze_equicorr_reports_beta() {
    let out = run(lpic().args(["analyze-equicorr", "--K", "3", "--rho", "0.2"]));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("K,rho,sir_g3,sir_gp3,beta,converges"));
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(fields[0], "3");
    let beta: f64 = fields[4].parse().unwrap();
    assert!((beta - 2.7638).abs() < 1e-4);
    assert_eq!(fields[5], "true");
}

const BER_CONFIG: &str = "\
# small run
K = 4
P = 16
snr_db = 10
detectors = MF, G:2..3, Gp:3, DC
trials = 5000
seed = 7
";

#[test]
fn ber_writes_csv_to_stdout_and_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", BER_CONFIG);
    let text = stdout(&run(lpic().arg("ber").arg(&cfg)));
    let records = parse_csv(&text).unwrap();
    assert_eq!(records.len(), 5);
    assert!(records.iter().all(|r| r.trials == 5000 && r.ber >= 0.0 && r.ber <= 0.5));

    let csv = dir.path().join("out.csv");
    let out = run(lpic().arg("ber").arg(&cfg).arg("--output").arg(&csv));
    assert!(stdout(&out).is_empty());
    assert_eq!(fs::read_to_string(&csv).unwrap(), text);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.cfg", &BER_CONFIG.replace("5000", "10000"));
    let one = stdout(&run(lpic().args(["--threads", "1", "ber"]).arg(&cfg)));
    let three = stdout(&run(lpic().env("LPIC_THREADS", "3").arg("ber").arg(&cfg)));
    assert_eq!(one, three);

    let out = run(lpic().args(["--threads", "0", "ber"]).arg(&cfg));
    assert!(!out.status.success());
}

#[test]
fn config_errors_exit_nonzero_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.cfg", "K = 4\nP = 16\nsnr_db = ten\ndetectors = MF\n");
    let out = run(lpic().arg("ber").arg(&bad));
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:") && err.contains("line 3"), "{err}");

    let out = run(lpic().arg("ber").arg(dir.path().join("missing.cfg")));
    assert!(!out.status.success());
}

#[test]
fn sinr_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.cfg",
        "K = 6\nP = 16\nsnr_db = 10\ndetectors = Gpw:2..3\nsweep_user = 2\nsweep_w = 0:0.25:2\n",
    );
    let out = run(lpic().arg("sinr-sweep").arg(&cfg));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("user,stage,w,sinr_db"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 2 * 9);
    assert!(rows.iter().all(|r| r[0] == "2"));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stage 2") && err.contains("stage 3"), "{err}");
}
