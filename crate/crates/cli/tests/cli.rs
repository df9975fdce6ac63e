use std::path::Path;
use std::process::{Command, Output};

fn spde(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spde"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("SPDE_THREADS", t),
        None => cmd.env_remove("SPDE_THREADS"),
    };
    cmd.output().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn print_config_output_is_a_runnable_config() {
    let out = spde(&["print-config", "harris-certify"], None);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("gamma = 0.5"));
    spde_cli::config::validate_config(&text).unwrap();
}

#[test]
fn unknown_kind_and_bad_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(spde(&["print-config", "heat"], None).status.code(), Some(2));
    let empty = write_config(dir.path(), "empty.txt", "");
    let out = spde(&["run", &empty], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kind missing"));
    let odd = write_config(dir.path(), "odd.txt", "kind = invariant\nseed = 1\nN = 3\n");
    assert_eq!(spde(&["run", &odd], None).status.code(), Some(2));
    let missing = dir.path().join("nope.txt");
    assert_eq!(spde(&["run", missing.to_str().unwrap()], None).status.code(), Some(2));
}

#[test]
fn invalid_thread_cap_is_a_configuration_error() {
    let out = spde(&["print-config", "invariant"], Some("zero"));
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(spde(&["print-config", "invariant"], Some("0")).status.code(), Some(2));
}

#[test]
fn run_writes_report_bundle_and_extra_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("harris");
    let cfg = write_config(
        dir.path(),
        "h.txt",
        &format!("kind = harris-certify\nseed = 3\noutput = {}\n", out_dir.display()),
    );
    let out = spde(&["run", &cfg], None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = std::fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert!(csv.starts_with("name,empirical,target,tolerance,relation,pass,provenance\n"));
    assert!(csv.contains("certificate alpha,"));
    let bundle = std::fs::read_to_string(out_dir.join("bundle.txt")).unwrap();
    assert!(bundle.contains("# overall PASS") && bundle.contains("wall-clock"));
    assert!(std::fs::read_to_string(out_dir.join("certificate.txt")).unwrap().contains("alpha"));
}

#[test]
fn failing_rows_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // too few paths in time leave the Hölder fit far from 1/4
    let cfg = write_config(
        dir.path(),
        "h.txt",
        "kind = holder\nseed = 1\nN = 64\nsteps = 8\ntime_levels = 1,2,3\nspace_levels = 1,2,3\nx_points = 1\n",
    );
    let out = spde(&["run", &cfg], None);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn csv_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for (i, threads) in [None, Some("1"), Some("3")].into_iter().enumerate() {
        let out_dir = dir.path().join(format!("run{i}"));
        let cfg = write_config(
            dir.path(),
            &format!("c{i}.txt"),
            &format!(
                "kind = ito-isometry\nseed = 11\ncases = 5\nreps = 2000\noutput = {}\n",
                out_dir.display()
            ),
        );
        let out = spde(&["run", &cfg], threads);
        assert!(out.status.code().unwrap() <= 1);
        csvs.push(std::fs::read(out_dir.join("report.csv")).unwrap());
    }
    assert!(csvs.windows(2).all(|w| w[0] == w[1]));
}
