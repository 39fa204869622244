use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const LOGISTIC: &str = "
[problem]
domain = interval(0, 1)
lambda = 10
m = 1
a = d
f = u^2
g = 1

[grid]
h = 1/128
";

fn examples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/examples")
}

fn supersol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_supersol")).args(args).output().expect("binary runs")
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
    out: PathBuf,
}

impl Run {
    fn file(&self, name: &str) -> String {
        fs::read_to_string(self.out.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
    }

    fn value(&self, key: &str) -> String {
        let report = self.file("report.txt");
        let prefix = format!("{key} = ");
        report
            .lines()
            .find_map(|l| l.strip_prefix(&prefix))
            .unwrap_or_else(|| panic!("no `{key}` in report:\n{report}"))
            .to_string()
    }

    fn real(&self, key: &str) -> f64 {
        self.value(key).parse().unwrap()
    }
}

fn run_config(dir: &TempDir, mode: &str, config: &Path, extra: &[&str]) -> Run {
    let out = dir.path().join(format!("out-{}", fs::read_dir(dir.path()).unwrap().count()));
    let mut args = vec![mode, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = supersol(&args);
    Run {
        code: o.status.code().expect("exit code"),
        stdout: String::from_utf8(o.stdout).unwrap(),
        stderr: String::from_utf8(o.stderr).unwrap(),
        out,
    }
}

fn run_text(mode: &str, text: &str, extra: &[&str]) -> (TempDir, Run) {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, text).unwrap();
    let r = run_config(&dir, mode, &cfg, extra);
    (dir, r)
}

#[test]
fn shipped_interval_certificate_passes() {
    let dir = TempDir::new().unwrap();
    let r = run_config(&dir, "certify", &examples().join("interval-logistic.cfg"), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout, "certify: PASS\n");
    assert_eq!(r.value("verdict"), "PASS");
    assert_eq!(r.value("h"), "0.00390625");
    for key in ["epsilon", "sigma_eps", "fk_bound", "K", "K_boundary", "K_interior", "tau"] {
        assert!(r.real(key) > 0.0, "{key}");
    }
    assert!(r.real("min_interior_margin") >= 0.0);
    assert!(r.real("K") >= r.real("K_boundary").max(r.real("K_interior")));
    let phi = r.file("phi.csv");
    let mut lines = phi.lines();
    assert_eq!(lines.next(), Some("x,value"));
    assert_eq!(lines.count(), 257);
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = examples().join("interval-logistic.cfg");
    let dir = TempDir::new().unwrap();
    let a = run_config(&dir, "solve", &cfg, &["--h", "1/128"]);
    let b = run_config(&dir, "solve", &cfg, &["--h", "1/128"]);
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_eq!(a.stdout, b.stdout);
    for name in ["report.txt", "phi.csv", "supersolution.csv", "margin.csv", "solution.csv", "solution_below.csv"] {
        assert_eq!(fs::read(a.out.join(name)).unwrap(), fs::read(b.out.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn solve_reports_converged_bracket() {
    let (_d, r) = run_text("solve", LOGISTIC, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout, "solve: PASS\n");
    assert_eq!(r.value("monotone_violations"), "0");
    assert!(r.real("gap") <= 1e-6 * r.real("solution_max"));
    assert!(r.real("residual") <= r.real("residual_bound"));
    let iterations: usize = r.value("iterations").parse().unwrap();
    assert!(iterations > 1);
    // The solution lies between 0 and the certified supersolution.
    let sol = r.file("solution.csv");
    let sup = r.file("supersolution.csv");
    for (s, k) in sol.lines().zip(sup.lines()).skip(1) {
        let (s, k): (f64, f64) = (s.split(',').nth(1).unwrap().parse().unwrap(), k.split(',').nth(1).unwrap().parse().unwrap());
        assert!(s >= 0.0 && s <= k);
    }
}

#[test]
fn disk_solve_writes_planar_fields() {
    let dir = TempDir::new().unwrap();
    let r = run_config(&dir, "solve", &examples().join("disk-logistic.cfg"), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.file("solution.csv").starts_with("x,y,value\n"));
}

#[test]
fn loose_tolerance_fails_solve_check() {
    let text = format!("{LOGISTIC}\n[run]\ntol = 0.5\n");
    let (_d, r) = run_text("solve", &text, &[]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert_eq!(r.stdout, "solve: FAILED\n");
    assert_eq!(r.value("verdict"), "FAILED");
    assert_eq!(r.value("certificate"), "PASS");
}

#[test]
fn linear_absorption_fails_validation() {
    let (_d, r) = run_text("certify", &LOGISTIC.replace("f = u^2", "f = u"), &[]);
    assert_eq!(r.code, 3);
    assert!(r.stdout.is_empty());
    assert!(r.stderr.contains("superlinearity"), "{}", r.stderr);
    assert!(r.value("hypothesis.FSuperlinear").starts_with("FAILED"));
    assert_eq!(r.value("verdict"), "INVALID");
}

#[test]
fn validate_mode_lists_hypotheses() {
    let (_d, r) = run_text("validate", LOGISTIC, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report = r.file("report.txt");
    assert_eq!(report.lines().filter(|l| l.starts_with("hypothesis.")).count(), 9);
    assert!(report.lines().filter(|l| l.starts_with("hypothesis.")).all(|l| l.contains("= PASS")));

    let (_d, r) = run_text("validate", &LOGISTIC.replace("g = 1", "g = 0"), &[]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("g is not identically zero"), "{}", r.stderr);
}

#[test]
fn config_errors_exit_4() {
    let (_d, r) = run_text("certify", &LOGISTIC.replace("f = u^2", "f = u^^2"), &[]);
    assert_eq!(r.code, 4);
    assert!(r.stderr.contains("problem.f") && r.stderr.contains("offset 3"), "{}", r.stderr);

    let cases = [
        (LOGISTIC.replace("lambda = 10", ""), "missing key `lambda`"),
        (LOGISTIC.replace("h = 1/128", "h = 1/128\nspacing = 2"), "unknown key `spacing`"),
        (format!("{LOGISTIC}\n[output]\ndir = x\n"), "unknown section"),
        (LOGISTIC.replace("interval(0, 1)", "interval(1, 0)"), "domain"),
        (LOGISTIC.replace("h = 1/128", "h = 0.75"), "no interior node"),
        (LOGISTIC.replace("h = 1/128", "h = -1"), "spacing"),
        (LOGISTIC.replace("[grid]\nh = 1/128", ""), "missing key `h`"),
        (LOGISTIC.replace("m = 1", "m = u"), "may not depend on `u`"),
        (format!("{LOGISTIC}\n[run]\ncertify_with = guess\n"), "certify_with"),
    ];
    for (text, needle) in cases {
        let (_d, r) = run_text("certify", &text, &[]);
        assert_eq!(r.code, 4, "{needle}: {}", r.stderr);
        assert!(r.stderr.contains(needle), "expected `{needle}` in {}", r.stderr);
    }

    let dir = TempDir::new().unwrap();
    let r = run_config(&dir, "certify", &dir.path().join("absent.cfg"), &[]);
    assert_eq!(r.code, 4);
    assert!(r.stderr.contains("cannot read"));

    let o = supersol(&["plot", "--config", "x.cfg"]);
    assert_eq!(o.status.code(), Some(4));
    let o = supersol(&["certify", "--config", "x.cfg", "--h", "fine"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn runtime_failures_exit_1() {
    // u* is undefined on part of the grid.
    let text = format!("{LOGISTIC}\n[run]\nmms_solution = log(x - 0.5)\n");
    let (_d, r) = run_text("mms", &text, &[]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    assert!(r.stderr.contains("log"), "{}", r.stderr);

    // The output directory cannot be created over a regular file.
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, LOGISTIC).unwrap();
    let blocker = dir.path().join("taken");
    fs::write(&blocker, "").unwrap();
    let o = supersol(&["certify", "--config", cfg.to_str().unwrap(), "--out", blocker.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot write"));
}

#[test]
fn overrides_take_precedence() {
    let text = format!("{LOGISTIC}\n[run]\nout = ignored\n");
    let (d, r) = run_text("certify", &text, &["--lambda", "-5", "--h", "1/64"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.value("lambda"), "-5");
    assert_eq!(r.value("h"), "0.015625");
    assert!(!d.path().join("ignored").exists());
    // Non-positive growth accepts the first collar width, inradius / 4.
    assert_eq!(r.value("epsilon"), "0.125");
}

#[test]
fn config_out_is_relative_to_config() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, format!("{LOGISTIC}\n[run]\nmode = validate\nout = results\n")).unwrap();
    let o = supersol(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("results/report.txt").exists());
}

#[test]
fn faber_krahn_certification() {
    let text = format!("{LOGISTIC}\n[run]\ncertify_with = faber_krahn\n");
    let (_d, r) = run_text("certify", &text, &["--lambda", "100", "--h", "1/256"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.value("certify_with"), "faber_krahn");
    assert!(r.real("fk_bound") > 1.05 * 100.0);
}

#[test]
fn shipped_mms_configs_are_second_order() {
    let dir = TempDir::new().unwrap();
    for name in ["interval-mms.cfg", "square-mms.cfg"] {
        let r = run_config(&dir, "mms", &examples().join(name), &[]);
        assert_eq!(r.code, 0, "{name}: {}", r.stderr);
        let table = r.file("mms.csv");
        let mut lines = table.lines();
        assert_eq!(lines.next(), Some("h,error,order"));
        let orders: Vec<f64> = lines.filter_map(|l| l.split(',').nth(2)?.parse().ok()).collect();
        assert_eq!(orders.len(), 3);
        assert!(orders.iter().all(|o| (1.8..=2.2).contains(o)), "{name}: {orders:?}");
    }
}

#[test]
fn rough_manufactured_solution_fails_order_check() {
    // The kink at x = 1/3 falls between nodes, so the forcing misses it.
    let text = format!("{LOGISTIC}\n[run]\nmms_solution = abs(x - 1/3)\nmms_halvings = 2\n");
    let (_d, r) = run_text("mms", &text, &["--h", "1/32"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert_eq!(r.value("verdict"), "FAILED");
    assert!(r.real("level_2.order").abs() < 0.1);
}

#[test]
fn shipped_eigenbench_table() {
    let dir = TempDir::new().unwrap();
    let r = run_config(&dir, "eigenbench", &examples().join("eigenbench.cfg"), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.value("violations"), "0");
    let table = r.file("eigenbench.csv");
    let mut rd = table.lines();
    assert_eq!(rd.next(), Some("domain,eps,h,measure,fk_bound,sigma_computed,ratio,bound_holds"));
    let rows: Vec<Vec<String>> = rd.map(split_csv).collect();
    assert!(rows.len() >= 6);
    let ratio = |domain: &str, eps: &str| -> f64 {
        rows.iter().find(|r| r[0] == domain && r[1] == eps).unwrap_or_else(|| panic!("{domain} {eps}"))[6]
            .parse()
            .unwrap()
    };
    assert!((ratio("disk(0, 0, 1)", "-") - 1.0).abs() <= 0.02);
    assert!((ratio("rectangle(0, 1, 0, 1)", "-") / (19.739 / 18.168) - 1.0).abs() <= 0.02);
    // Two collars of width 2ε each: the bound sees total length 4ε.
    assert!((ratio("interval(0, 1)", "0.1") / 4.0 - 1.0).abs() <= 0.02);
    assert!(rows.iter().all(|r| r[7] == "true"));
}

fn split_csv(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    for c in line.chars() {
        match c {
            '"' => quoted = !quoted,
            ',' if !quoted => fields.push(std::mem::take(&mut cur)),
            c => cur.push(c),
        }
    }
    fields.push(cur);
    fields
}

#[test]
fn eigenbench_without_rows_is_config_error() {
    let (_d, r) = run_text("eigenbench", "[eigenbench]\neigen_tol = 1e-9\n", &[]);
    assert_eq!(r.code, 4);
    assert!(r.stderr.contains("`row`"));
}
