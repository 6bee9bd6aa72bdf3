use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fockmarket::fpl::{trajectory_simpson, FplParams};
use fockmarket::timeseries::uniform_grid;
use sha2::{Digest, Sha256};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fockmarket"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("c.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn fpl_figure_one_matches_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&configs().join("fig1.toml"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let produced = std::fs::read(tmp.path().join("fig1_w1_1_w2_1.csv")).unwrap();
    let frozen = std::fs::read(fixtures().join("fig1_w1_1_w2_1.csv")).unwrap();
    assert_eq!(produced, frozen);
}

#[test]
fn fixture_agrees_with_simpson_oracle() {
    let text = std::fs::read_to_string(fixtures().join("fig1_w1_1_w2_1.csv")).unwrap();
    let times = uniform_grid(10.0, 201).unwrap();
    let oracle = trajectory_simpson(&FplParams::figure(1, 1.0, 1.0).unwrap(), &times, 10_000).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), times.len());
    for (row, (t, d)) in rows.iter().zip(times.iter().zip(&oracle.delta_pi.values)) {
        assert!((row[0] - t).abs() < 1e-12);
        assert!((row[4] - d).abs() < 1e-7, "t={t}: {} vs {d}", row[4]);
    }
}

#[test]
fn verify_passes_and_detects_drift() {
    let o = bin().arg("verify").arg(configs().join("fig1.toml")).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let tmp = tempfile::tempdir().unwrap();
    let fx = tmp.path().join("fx");
    std::fs::create_dir(&fx).unwrap();
    let good = std::fs::read_to_string(fixtures().join("fig1_w1_1_w2_1.csv")).unwrap();
    std::fs::write(fx.join("fig1_w1_1_w2_1.csv"), good.replacen("0.05,", "0.051,", 1)).unwrap();
    let cfg = write_config(
        tmp.path(),
        "scenario = \"fpl\"\n[fpl]\nfigure = 1\n[output]\nfixtures = \"fx\"\n",
    );
    let o = bin().arg("verify").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3 differs"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "scenario = \"fp1\"\n");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stochastic-verdict"));

    let cfg = write_config(tmp.path(), "scenario = \"fpl\"\n[grid]\nt_max = -1\n");
    assert_eq!(run(&cfg, &out, &[]).status.code(), Some(2));

    let missing = tmp.path().join("nope.toml");
    assert_eq!(run(&missing, &out, &[]).status.code(), Some(2));

    let cfg = write_config(
        tmp.path(),
        "scenario = \"two-trader-exact\"\n[model]\nalpha = [-1, 2]\nbeta = [1, 1]\n[state]\noccupations = [1, 1, 2, 2, 1, 1]\n",
    );
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());

    let o = bin().arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn outputs_are_deterministic_across_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "scenario = \"fpl\"\n[grid]\nt_max = 4\nsamples = 41\n[sweep]\n\"fpl.figure\" = [1, 3, 4]\n\"fpl.w2\" = [1, 10]\n",
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&cfg, &a, &["--jobs", "1"]).status.success());
    assert!(run(&cfg, &b, &["--jobs", "4", "--plots"]).status.success());
    let (ta, tb) = (read_tree(&a), read_tree(&b));
    for (name, bytes) in &ta {
        if name != "manifest.txt" {
            assert_eq!(Some(bytes), tb.get(name), "{name}");
        }
    }
    assert!(tb.contains_key("run-005/fig4_w1_1_w2_10.svg"));
    let sweep = String::from_utf8(ta["sweep.txt"].clone()).unwrap();
    assert_eq!(sweep.lines().count(), 6);
    assert!(sweep.starts_with("run-000=fpl.figure=1,fpl.w2=1\n"));
}

#[test]
fn manifest_hashes_every_output() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&configs().join("effective_l.toml"), tmp.path(), &["--plots"]);
    assert!(o.status.success());
    let tree = read_tree(tmp.path());
    let manifest = String::from_utf8(tree["manifest.txt"].clone()).unwrap();
    let listed: Vec<(&str, &str)> = manifest
        .lines()
        .map(|l| l.split_once('=').unwrap())
        .collect();
    assert_eq!(listed.len(), tree.len() - 1);
    for (name, hash) in listed {
        assert_eq!(hex::encode(Sha256::digest(&tree[name])), hash, "{name}");
    }
}

fn report(dir: &Path, file: &str) -> BTreeMap<String, String> {
    std::fs::read_to_string(dir.join(file))
        .unwrap()
        .lines()
        .map(|l| {
            let (k, v) = l.split_once('=').unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}

#[test]
fn two_trader_conserved_drift_report() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(&configs().join("two_trader.toml"), tmp.path(), &[]).status.success());
    let r = report(tmp.path(), "two_trader_exact_conserved.txt");
    for key in ["drift_N", "drift_K", "drift_Gamma"] {
        let drift: f64 = r[key].parse().unwrap();
        assert!(drift < 1e-8, "{key} = {drift}");
    }
    assert_eq!(r["conserved"], "true");
}

#[test]
fn stochastic_portfolio_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(&configs().join("stochastic.toml"), tmp.path(), &[]).status.success());
    let r = report(tmp.path(), "stochastic_verdict.txt");
    assert_eq!(r["portfolio_stationary"], "true");
    assert_eq!(r["norm_l_pi"], "0");
    assert_eq!(r["eps_o_zeros"], "");
}

#[test]
fn meanfield_cross_check_report() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(run(&configs().join("meanfield.toml"), tmp.path(), &[]).status.success());
    let r = report(tmp.path(), "meanfield.txt");
    let gap: f64 = r["ode_max_abs_diff"].parse().unwrap();
    let detuning: f64 = r["nu_detuning"].parse().unwrap();
    assert!(gap < 1e-6);
    assert!((detuning - 0.5).abs() < 1e-6);
}
