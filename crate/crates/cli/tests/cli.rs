use std::path::PathBuf;
use std::process::{Command, Output};

fn default_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvar-pension")).arg(args[0]).arg("--config").arg(default_config()).args(&args[1..]).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn table(text: &str) -> (String, Vec<Vec<String>>) {
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    (header, lines.map(|l| l.split(',').map(str::to_string).collect()).collect())
}

fn f(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn solve_reports_effective_regime() {
    let out = stdout(&run(&["solve"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let obj = v.as_object().unwrap();
    let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    keys.sort_unstable();
    let mut want = vec![
        "schema_version",
        "regime",
        "lambda_hat",
        "r_value",
        "c_value",
        "lambda_under",
        "lambda_star",
        "nu_star",
        "rho_under",
        "rho_bar",
        "rho_ell",
        "residual_budget",
        "residual_tvar",
        "z1",
        "z2",
        "z_bar",
        "z_under",
        "z0",
        "x0",
        "a0",
        "d0",
        "ell0",
        "xi1",
        "xi2",
    ];
    want.sort_unstable();
    assert_eq!(keys, want);
    assert_eq!(v["regime"], "EffectiveTVaR");
    assert_eq!(v["schema_version"], 1);
    assert!(v["residual_budget"].as_f64().unwrap().abs() <= 1e-6 * 10.0);
    assert!(v["residual_tvar"].as_f64().unwrap().abs() <= 1e-6 * 50.0);
}

#[test]
fn exit_codes() {
    let o = run(&["solve", "--set", "pension.z_bar=5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("infeasible: z̄ < R(z̲)"));
    assert_eq!(run(&["solve", "--set", "pension.alpha=1.5"]).status.code(), Some(64));
    assert_eq!(run(&["solve", "--set", "pension.unknown=1"]).status.code(), Some(64));
    assert_eq!(run(&["solve", "--set", "broken"]).status.code(), Some(64));
    let missing = Command::new(env!("CARGO_BIN_EXE_tvar-pension")).args(["solve", "--config", "/nonexistent.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(64));
    // κ ≤ ℓ: the TVaR constraint is void
    let v: serde_json::Value = serde_json::from_str(&stdout(&run(&["solve", "--set", "pension.kappa=30"]))).unwrap();
    assert_eq!(v["regime"], "IneffectiveTVaR");
    // strategy needs the effective regime
    let o = run(&["strategy", "--set", "pension.kappa=30", "--set", "sim.n_paths=100"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unsupported regime"));
}

#[test]
fn terminal_map_table() {
    let (header, rows) = table(&stdout(&run(&["terminal-map"])));
    assert_eq!(header, "rho,z_star,x_star");
    let v: serde_json::Value = serde_json::from_str(&stdout(&run(&["solve"]))).unwrap();
    let rho: Vec<f64> = rows.iter().map(|r| f(&r[0])).collect();
    let z: Vec<f64> = rows.iter().map(|r| f(&r[1])).collect();
    assert!(rho.windows(2).all(|w| w[1] > w[0]));
    assert!(z.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(z.iter().copied().fold(f64::INFINITY, f64::min), 30.0);
    // every threshold sits on the grid
    for key in ["rho_under", "rho_bar", "rho_ell"] {
        let t = v[key].as_f64().unwrap();
        assert!(rho.iter().any(|r| (r - t).abs() <= 1e-6 * t), "{key}");
    }
    // 17 significant digits round-trip
    assert!(rows[0].iter().all(|c| c.contains('e') && c.split('e').next().unwrap().len() >= 18));
}

#[test]
fn strategy_table_accounts() {
    let out = stdout(&run(&["strategy", "--set", "sim.n_paths=2000"]));
    let (header, rows) = table(&out);
    assert_eq!(header, "t,x,pi1,pi2,cash");
    assert_eq!(rows.len(), 20);
    for r in &rows {
        let (x, a, b, c) = (f(&r[1]), f(&r[2]), f(&r[3]), f(&r[4]));
        assert!((a + b + c - x).abs() <= 1e-10 * x.abs().max(1.0), "{r:?}");
    }
    // t = 0 row is the initial wealth
    assert!((f(&rows[0][1]) - 13.003371933099901).abs() < 1e-6);
}

#[test]
fn density_table_masses() {
    let out = stdout(&run(&["density", "--set", "sim.n_paths=20000", "--set", "density.bins=50"]));
    let (header, rows) = table(&out);
    assert_eq!(header, "bin_lo,bin_hi,mass_floor,density_floor,mass_no_floor,density_no_floor");
    assert_eq!(rows.len(), 50);
    for col in [2, 4] {
        let s: f64 = rows.iter().map(|r| f(&r[col])).sum();
        assert!((s - 1.0).abs() < 1e-12, "{s}");
    }
    let below: f64 = rows.iter().filter(|r| f(&r[1]) <= 30.0).map(|r| f(&r[2])).sum();
    assert_eq!(below, 0.0);
}

#[test]
fn sweep_table_and_determinism() {
    let args = ["sweep", "--param", "alpha", "--values", "0.1,0.2", "--set", "sim.n_paths=2000", "--seed", "5"];
    let a = stdout(&run(&args));
    let b = stdout(&run(&args));
    assert_eq!(a, b);
    let (header, rows) = table(&a);
    assert_eq!(header, "param,value,regime,bond_share,stock_share,cash_share");
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "alpha");
    let c = stdout(&run(&["sweep", "--param", "alpha", "--values", "0.1,0.2", "--set", "sim.n_paths=2000", "--seed", "6"]));
    assert_ne!(a, c);
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("solve.json");
    let o = run(&["solve", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["regime"], "EffectiveTVaR");
}

#[test]
fn config_file_variants() {
    let dir = tempfile::tempdir().unwrap();
    let base = std::fs::read_to_string(default_config()).unwrap();
    // a0 and x0 given directly instead of back-solved
    let text = base.replace("ell0 = 7.0", "a0 = 0.055172914115967475").replace("z_bar = 10.0", "x0 = 13.003371933099901");
    let path = dir.path().join("direct.toml");
    std::fs::write(&path, text).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_tvar-pension")).args(["solve", "--config", path.to_str().unwrap()]).output().unwrap();
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["z_bar"].as_f64().unwrap() - 10.0).abs() < 1e-9);
    // both a0 and ell0 is a config error
    let text = base.replace("ell0 = 7.0", "ell0 = 7.0\na0 = 0.05");
    std::fs::write(&path, text).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_tvar-pension")).args(["solve", "--config", path.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pension.a0"));
}
