use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn renormfock(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_renormfock"))
        .args(args)
        .env_remove("RENORMFOCK_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, sweep: &str) -> String {
    let text = format!(
        "model = vhm\n\n[grid]\nnodes = 1\nk_min = 0.5\nk_max = 1.5\n\n[truncation]\nnmax = 12\n\n[model]\nform_factor = weisskopf_wigner\nsigma = 2\n\n[sweep]\n{sweep}\n"
    );
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

/// CSV text with the trailing runtime column removed.
fn without_runtime(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.rsplit_once(',').unwrap().0.to_owned()).collect()
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.cfg", "param = sigma\nvalues = 1.5, 2, 3, 4, 6");
    let mut outputs = Vec::new();
    for threads in ["1", "8"] {
        let out = dir.path().join(format!("out{threads}.csv"));
        let o = renormfock(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", threads]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(without_runtime(&fs::read_to_string(out).unwrap()));
    }
    assert_eq!(outputs[0].len(), 6);
    assert!(outputs[0][0].starts_with("model,sweep_param,sweep_value,mu,"));
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn repeated_points_give_identical_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "b.cfg", "param = sigma\nvalues = 3, 3");
    let out = dir.path().join("b.csv");
    let o = renormfock(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "2"]);
    assert!(o.status.success());
    let rows = without_runtime(&fs::read_to_string(out).unwrap());
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1], rows[2]);
}

#[test]
fn output_defaults_to_config_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from_config.csv");
    let cfg = dir.path().join("c.cfg");
    let text = fs::read_to_string(write_config(dir.path(), "tmp.cfg", "param = sigma\nvalues = 2")).unwrap();
    fs::write(&cfg, format!("output = {}\n{text}", out.display())).unwrap();
    let o = renormfock(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(out).unwrap().lines().count(), 2);
}

#[test]
fn failing_point_leaves_partial_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "d.cfg", "param = nmax\nvalues = 2, 400");
    let text = fs::read_to_string(&cfg).unwrap().replace("nodes = 1", "nodes = 4");
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("d.csv");
    let o = renormfock(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("sweep point 1"), "{stderr}");
    assert!(!out.exists());
    let partial = fs::read_to_string(dir.path().join("d.csv.partial")).unwrap();
    assert_eq!(partial.lines().count(), 2);
}

#[test]
fn validate_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "e.cfg", "param = sigma\nvalues = 2");
    let o = renormfock(&["validate-config", "--config", &good]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("vhm model, 1 points"));

    let bad = dir.path().join("f.cfg");
    fs::write(&bad, "model = vhm\n[grid]\nnodez = 2\n").unwrap();
    let o = renormfock(&["validate-config", "--config", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn missing_output_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "g.cfg", "param = sigma\nvalues = 2");
    let o = renormfock(&["run", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("no output path"));
}
