use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn monoconv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_monoconv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

/// File contents minus the `# out = ...` echo, which names the file itself.
fn without_out_line(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with("# out = "))
        .map(|l| format!("{l}\n"))
        .collect()
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

/// Parses the `a±bi` rendering back into `(re, im)`.
fn complex_field(text: &str, label: &str) -> (f64, f64) {
    let line = text
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{label} = ")))
        .unwrap_or_else(|| panic!("no {label} line in {text}"));
    let body = line.strip_suffix('i').unwrap();
    let bytes = body.as_bytes();
    let split = (1..body.len())
        .rev()
        .find(|&i| matches!(bytes[i], b'+' | b'-') && bytes[i - 1] != b'e')
        .unwrap();
    (body[..split].parse().unwrap(), body[split..].parse().unwrap())
}

#[test]
fn convolve_point_masses() {
    let out = monoconv(&["convolve", "point(1)", "point(2)"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "3 1\n");
}

#[test]
fn convolve_bernoulli_pair() {
    let out = monoconv(&["convolve", "--check-identity", "16", "two_point(-1,1,0.5)", "two_point(-1,1,0.5)"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let atoms: Vec<(f64, f64)> = stdout(&out)
        .lines()
        .map(|l| {
            let (t, w) = l.split_once(' ').unwrap();
            (t.parse().unwrap(), w.parse().unwrap())
        })
        .collect();
    // z - 1/z = ±1 has roots ±(1 ± √5)/2 with weights 1/(1 + 1/z²).
    let s5 = 5f64.sqrt();
    let golden = (1.0 + s5) / 2.0;
    let expected = [
        (-golden, (5.0 + s5) / 20.0),
        (-1.0 / golden, (5.0 - s5) / 20.0),
        (1.0 / golden, (5.0 - s5) / 20.0),
        (golden, (5.0 + s5) / 20.0),
    ];
    assert_eq!(atoms.len(), 4);
    for ((t, w), (et, ew)) in atoms.iter().zip(expected) {
        assert!((t - et).abs() < 1e-12 && (w - ew).abs() < 1e-12, "{t} {w} vs {et} {ew}");
    }
}

#[test]
fn convolve_usage_and_parse_errors() {
    let out = monoconv(&["convolve"]);
    assert_eq!(out.status.code(), Some(1));
    let out = monoconv(&["convolve", "point(1)", "two_point(1,2,"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("measure 2") && err.contains("two_point(1,2,") && err.contains("position"), "{err}");
    let out = monoconv(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn convolve_writes_self_describing_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.txt");
    let out = monoconv(&["convolve", "--out", path.to_str().unwrap(), "point(1)", "point(2)"]);
    assert!(out.status.success());
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# monoconv convolve\n# measure_1 = point(1)\n"), "{text}");
    assert!(text.ends_with("\n3 1\n"));
}

#[test]
fn transform_eval_examples() {
    let out = monoconv(&["transform-eval", "point(0)", "0+1i"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(complex_field(&text, "G"), (0.0, -1.0));
    assert_eq!(complex_field(&text, "F"), (0.0, 1.0));

    let out = monoconv(&["transform-eval", "two_point(-1,1,0.5)", "0+2i"]);
    let text = stdout(&out);
    let (gr, gi) = complex_field(&text, "G");
    let (fr, fi) = complex_field(&text, "F");
    let (dr, di) = complex_field(&text, "F'");
    assert!(gr.abs() < 1e-16 && (gi + 0.4).abs() < 1e-15);
    assert!(fr.abs() < 1e-15 && (fi - 2.5).abs() < 1e-14);
    // F(z) = z - 1/z, F'(z) = 1 + 1/z².
    assert!((dr - 0.75).abs() < 1e-14 && di.abs() < 1e-15);

    let out = monoconv(&["transform-eval", "two_point(-1,1,0.5)", "-3-0.5i"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn transform_eval_at_atom_is_a_pole() {
    let out = monoconv(&["transform-eval", "two_point(-1,1,0.5)", "1+0i"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("pole"), "{}", stderr(&out));
    let out = monoconv(&["transform-eval", "point(0)", "1+i"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn lln_pointmass_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    let out = monoconv(&["lln", example("pointmass.cfg").to_str().unwrap(), "--out", path.to_str().unwrap(), "--quiet"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).is_empty());
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# monoconv lln\n# [lln_harness]\n"));
    assert!(text.contains("# seed = 1\n"));
    let rows: Vec<Vec<&str>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[4].parse::<f64>().unwrap() == 0.0));
}

const SMALL_BERNOULLI: &str = "\
[lln_harness]
measure_rule = iid
base = two_point(-1, 1, 0.5)
horizon = 1000
eps = 0.1, 0.25
mc_checkpoints = 10, 100, 1000
exact_checkpoints = 10

[markov_chain]
paths = 20000
seed = 5
";

#[test]
fn lln_bernoulli_decays_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("b.cfg");
    fs::write(&cfg, SMALL_BERNOULLI).unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = monoconv(&["lln", cfg.to_str().unwrap(), "--out", path.to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
        (without_out_line(&path), stderr(&out))
    };
    let (first, summary) = run("a.csv");
    let (second, _) = run("b.csv");
    assert_eq!(first, second);
    assert!(summary.contains("convergent (closed form)"), "{summary}");
    assert!(summary.contains("[PASS] exact_vs_mc"), "{summary}");

    let text = first;
    let mc_at_quarter: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|r| r[5] == "mc" && r[3].parse::<f64>().unwrap() == 0.25)
        .map(|r| r[4].parse().unwrap())
        .collect();
    assert_eq!(mc_at_quarter.len(), 3);
    assert!(mc_at_quarter[0] > mc_at_quarter[2]);
    assert!(mc_at_quarter.windows(2).all(|w| w[1] <= w[0]));

    // A different seed changes the Monte Carlo rows.
    let path = dir.path().join("c.csv");
    let out = monoconv(&["lln", cfg.to_str().unwrap(), "--out", path.to_str().unwrap(), "--seed", "6", "--quiet"]);
    assert!(out.status.success());
    let reseeded = without_out_line(&path);
    assert!(reseeded.contains("# seed = 6\n"));
    assert!(reseeded != second);
}

#[test]
fn corrupted_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "[lln_harness]\nmeasure_rule = iid\nbase = point(0)\nwobble = 3\n").unwrap();
    let out = monoconv(&["lln", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));

    let out = monoconv(&["lln", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.cfg");
    fs::write(
        &cfg,
        "[lln_harness]\nmeasure_rule = iid\nbase = two_point(-1,1,0.5)\nhorizon = 20\n[markov_chain]\npaths = 10000\nseed = 9\n",
    )
    .unwrap();
    let path = dir.path().join("s.csv");
    let out = monoconv(&["simulate", cfg.to_str().unwrap(), "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# monoconv simulate\n"));
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "n,mean_x,var_x,mean_s2,analytic_sum,flags");
    assert_eq!(body.len(), 21);

    let again = dir.path().join("s2.csv");
    monoconv(&["simulate", cfg.to_str().unwrap(), "--out", again.to_str().unwrap(), "--quiet"]);
    assert!(without_out_line(&path) == without_out_line(&again));
}

#[test]
fn selftest_passes_and_detects_injected_faults() {
    let out = monoconv(&["selftest"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let table = stdout(&out);
    for name in ["weight-sum", "interlacing", "mean-shift", "nevanlinna-mass", "g-identity"] {
        assert!(table.lines().any(|l| l.starts_with(name) && l.contains("PASS")), "{table}");
    }

    let out = monoconv(&["selftest", "--inject-fault", "g-identity"]);
    assert_eq!(out.status.code(), Some(2));
    let table = stdout(&out);
    assert!(table.lines().any(|l| l.starts_with("g-identity") && l.contains("FAIL")), "{table}");
    assert_eq!(table.matches("PASS").count(), 4);

    let out = monoconv(&["selftest", "--inject-fault", "nonsense"]);
    assert_eq!(out.status.code(), Some(1));
}
