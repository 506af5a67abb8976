use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vibent"))
}

fn run(args: &[&str], config: Option<&str>, out: &Path) -> std::process::Output {
    let mut cmd = bin();
    cmd.args(args).arg("--out").arg(out);
    let dir = out.parent().unwrap();
    if let Some(text) = config {
        let path = dir.join(format!("{}.toml", out.file_name().unwrap().to_string_lossy()));
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn body(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).map(str::to_string).collect()
}

const TINY_TRIANGLE: &str = "
[run]
t_end_tau = 3
samples = 3
dims = [3, 3, 2]
[run.sweep]
g0 = [0.3, 0.5]
rabi_amplitude = [3]
temperature = [0.01]
qubit_dephasing = [0]
";

#[test]
fn triangle_writes_every_table_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tri");
    let res = run(&["triangle"], Some(TINY_TRIANGLE), &out);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    for name in [
        "triangle_trajectories.csv",
        "triangle_tpe_g0.csv",
        "triangle_tpe_rabi.csv",
        "triangle_summary.csv",
        "triangle_region.csv",
    ] {
        let text = fs::read_to_string(out.join(name)).unwrap();
        assert!(text.starts_with("# vibent "), "{name}");
        assert!(text.contains("# scenario: triangle"));
        assert!(text.contains("# sweep = g0 = [3e-1, 5e-1]"));
    }
    let wide = body(&out.join("triangle_tpe_g0.csv"));
    assert_eq!(wide[0], "time_tau,g0=0.3,g0=0.5");
    assert_eq!(wide.len(), 4);
    assert!(!out.join("failures.csv").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = "[run]\nt_end_tau = 20\n[run.sweep]\ng0 = [0.2, 0.5]\n";
    assert!(run(&["multimode", "--threads", "2"], Some(cfg), &a).status.success());
    assert!(run(&["multimode"], Some(cfg), &b).status.success());
    assert_eq!(fs::read(a.join("multimode.csv")).unwrap(), fs::read(b.join("multimode.csv")).unwrap());
}

#[test]
fn seed_reaches_anharmonic_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[system]\nanharmonicity = 0.01\n";
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert!(run(&["tls-spectrum", "--seed", "1"], Some(cfg), &a).status.success());
    assert!(run(&["tls-spectrum", "--seed", "1"], Some(cfg), &b).status.success());
    assert!(run(&["tls-spectrum", "--seed", "2"], Some(cfg), &c).status.success());
    let bath = |d: &Path| fs::read_to_string(d.join("tls_bath.csv")).unwrap();
    assert_eq!(bath(&a), bath(&b));
    assert_ne!(body(&a.join("tls_bath.csv")), body(&c.join("tls_bath.csv")));
}

#[test]
fn tls_spectrum_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let cfg = "[run]\nomega_min = -1e8\nomega_max = 1e8\npoints = 21\n";
    assert!(run(&["tls-spectrum"], Some(cfg), &out).status.success());
    let rows = body(&out.join("tls_spectrum.csv"));
    assert_eq!(rows[0], "omega_hz,spectrum_value");
    assert_eq!(rows.len(), 22);
    assert!(rows[1].starts_with("-1e8,"));
}

#[test]
fn adjacency_matrices() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("adj");
    assert!(run(&["adjacency"], Some("[run]\ntargets = [2, 5]\n"), &out).status.success());
    let f = body(&out.join("adjacency_f.csv"));
    assert_eq!(f.len(), 11);
    assert_eq!(f[0].split(',').count(), 11);
    let act = body(&out.join("adjacency_active.csv"));
    assert_eq!(act[2], "2,1");
    assert_eq!(act[5], "5,1");
    assert_eq!(act[1], "1,0");
}

#[test]
fn depth_scan_zero_coupling_is_separable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    let cfg = "[run]\nt_end_tau = 10\nmax_k = 4\n[run.sweep]\ng0 = [0.0, 0.5]\ntemperature = [0.01]\n";
    assert!(run(&["depth-scan"], Some(cfg), &out).status.success());
    let t = body(&out.join("depth_scan.csv"));
    assert_eq!(t.len(), 1 + 2 * 3);
    for row in t.iter().skip(1).filter(|r| r.split(',').nth(1) == Some("0")) {
        assert!(row.ends_with(",0"), "{row}");
    }
    assert!(out.join("depth_boundary.csv").exists());
}

#[test]
fn compare_pairs_both_models() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let cfg = "[run]\nt_end_tau = 2\nsamples = 4\ndims = [3, 3, 2]\n[run.sweep]\ng0 = [0.0, 0.1]\n";
    assert!(run(&["compare"], Some(cfg), &out).status.success());
    let rows = body(&out.join("compare.csv"));
    assert_eq!(rows[0], "g0_over_gamma,time_tau,e12_exact,e12_gaussian");
    assert_eq!(rows.len(), 1 + 2 * 4);
    for r in rows.iter().skip(1).take(4) {
        assert!(r.ends_with(",0,0"), "{r}");
    }
    assert_eq!(body(&out.join("compare_summary.csv")).len(), 3);
}

#[test]
fn failed_point_gives_exit_code_2() {
    // zero drive gives zero detuning, rejected only when the point is validated
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f");
    let cfg = TINY_TRIANGLE.replace("rabi_amplitude = [3]", "rabi_amplitude = [3, 0]");
    let res = run(&["triangle"], Some(&cfg), &out);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
    let fails = body(&out.join("failures.csv"));
    assert!(fails.len() >= 2, "{fails:?}");
    assert!(fails.iter().skip(1).all(|r| r.contains("rabi=0")), "{fails:?}");
    assert!(out.join("triangle_tpe_g0.csv").exists());
}

#[test]
fn fatal_errors_give_exit_code_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let res = run(&["triangle"], Some("[run]\nbogus = 1\n"), &out);
    assert_eq!(res.status.code(), Some(1));
    let res = run(&["triangle"], Some("[run]\ndims = [3, 3]\n"), &out);
    assert_eq!(res.status.code(), Some(1));
    let mut cmd = bin();
    let res = cmd.args(["adjacency", "--config", "/nonexistent/cfg.toml"]).output().unwrap();
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("error"));
}
