use std::f64::consts::PI;
use std::process::{Command, Output};

fn renorm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_renorm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Header and rows of a CSV table.
fn table(o: &Output) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(o.stdout.as_slice());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

fn real(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn lebesgue_spectrum_rows() {
    let o = renorm(&["spectrum", "--alpha", "1/2", "--window=-100,0"]);
    assert_eq!(o.status.code(), Some(0));
    let (h, rows) = table(&o);
    let v = col(&h, "value");
    let values: Vec<f64> = rows.iter().map(|r| real(&r[v])).collect();
    let want = [0.0, -PI * PI, -4.0 * PI * PI, -9.0 * PI * PI];
    assert_eq!(values.len(), 4);
    for (x, w) in values.iter().zip(want) {
        assert!((x - w).abs() <= 1e-9 * w.abs().max(1.0), "{x} vs {w}");
    }
    assert!(rows.iter().all(|r| r.last().unwrap().len() == 64));
}

#[test]
fn ladder_and_oracle_agree_at_level_two() {
    let o = renorm(&["spectrum", "--alpha", "1/3", "--level", "2", "--window=-50,0"]);
    assert_eq!(o.status.code(), Some(0));
    let (h, rows) = table(&o);
    let d = col(&h, "defect");
    assert!(rows.len() > 3);
    for r in &rows {
        assert!(real(&r[d]) <= 1e-2, "{r:?}");
    }
}

#[test]
fn empty_window_gives_header_only() {
    let o = renorm(&["spectrum", "--alpha", "1/2", "--window=-5,-4"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "k,p,value,oracle_value,defect,config_hash\n");
}

#[test]
fn usage_errors() {
    assert_eq!(renorm(&["spectrum", "--alpha", "2"]).status.code(), Some(2));
    assert_eq!(renorm(&["spectrum", "--window=0,-1"]).status.code(), Some(2));
    assert_eq!(renorm(&["spectrum", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(renorm(&["verify", "--checks", "nope"]).status.code(), Some(2));
}

#[test]
fn lebesgue_ids_marks_no_gaps() {
    let o = renorm(&["ids", "--alpha", "0.5", "--level", "10", "--window=-400,-100", "--points", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let (h, rows) = table(&o);
    let (lam, ids, note, class) = (col(&h, "lambda"), col(&h, "ids_neumann"), col(&h, "note"), col(&h, "class"));
    for r in &rows {
        let want = (-real(&r[lam])).sqrt() / PI;
        assert!((real(&r[ids]) - want).abs() <= 0.02 * want);
        assert_eq!(r[note], "no gaps expected");
        assert_eq!(r[class], "InSupport");
    }
}

#[test]
fn ids_plateau_in_a_gap() {
    // Both points lie in the gap above lambda_1 = -13.76 at alpha = 2/3.
    let o = renorm(&["ids", "--alpha", "2/3", "--level", "10", "--window=-13.7,-12", "--points", "2"]);
    let (h, rows) = table(&o);
    let (ids, zeta, class) = (col(&h, "ids_neumann"), col(&h, "zeta"), col(&h, "class"));
    assert_eq!(rows[0][ids], rows[1][ids]);
    for r in &rows {
        assert!(real(&r[zeta]) > 0.0);
        assert_eq!(r[class], "Gap");
    }
}

#[test]
fn plane_symmetric_at_delta_one() {
    let o = renorm(&["plane", "--alpha", "0.5", "--grid", "9", "--plane-x=-2,2", "--plane-y=-2,2"]);
    let (h, rows) = table(&o);
    let (x, y, g) = (col(&h, "x"), col(&h, "y"), col(&h, "green"));
    let lookup = |a: &str, b: &str| rows.iter().find(|r| r[x] == a && r[y] == b).map(|r| real(&r[g])).unwrap();
    for r in &rows {
        assert!((lookup(&r[y], &r[x]) - real(&r[g])).abs() <= 1e-12 * (1.0 + real(&r[g])));
    }
}

#[test]
fn plane_collapses_d_line() {
    // delta = 2, so D is y = -2x and maps to (-1/2, -2).
    let o = renorm(&["plane", "--alpha", "2/3", "--grid", "5", "--plane-x=-1,1", "--plane-y=-2,2"]);
    let (h, rows) = table(&o);
    let (dr, ix, iy, rs) = (col(&h, "d_residual"), col(&h, "image_x"), col(&h, "image_y"), col(&h, "r_sign"));
    let on_d: Vec<_> = rows.iter().filter(|r| real(&r[dr]) < 1e-14).collect();
    assert_eq!(on_d.len(), 5);
    for r in on_d {
        assert!((real(&r[ix]) + 0.5).abs() < 1e-14 && (real(&r[iy]) + 2.0).abs() < 1e-14);
    }
    let signs: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[rs].as_str()).collect();
    assert!(signs.contains("1") && signs.contains("-1"));
}

#[test]
fn dichotomy_table() {
    let o = renorm(&["dichotomy", "--alphas", "1/3,2/3", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v["rows"].as_array().unwrap();
    let verdicts: Vec<&str> = rows.iter().map(|r| r[3].as_str().unwrap()).collect();
    assert_eq!(verdicts, ["Divergent", "SquareSummable", "SquareSummable", "Divergent"]);
}

#[test]
fn injected_delta_error_fails_semiconjugacy() {
    let o = renorm(&["verify", "--checks", "propagator.semiconjugacy", "--inject-delta-error", "1e-3"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["passed"], false);
    let clean = renorm(&["verify", "--checks", "propagator.semiconjugacy"]);
    assert_eq!(clean.status.code(), Some(0));
}

#[test]
fn timing_only_on_request() {
    let args = ["verify", "--checks", "model.identities,renorm.d_orbit"];
    let plain: serde_json::Value = serde_json::from_slice(&renorm(&args).stdout).unwrap();
    assert!(plain["checks"][0].get("seconds").is_none());
    let mut timed_args = args.to_vec();
    timed_args.push("--timing");
    let timed: serde_json::Value = serde_json::from_slice(&renorm(&timed_args).stdout).unwrap();
    assert!(timed["checks"][1]["seconds"].as_f64().is_some());
    assert_eq!(plain["provenance"], timed["provenance"]);
}

#[test]
fn config_file_with_override_and_parallel_output() {
    let dir = std::env::temp_dir().join(format!("renorm-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "# sweep\nalpha = 2/3\nlevel = 6\nwindow = -40, 0\npoints = 33\n").unwrap();
    let cfg_s = cfg.to_str().unwrap();
    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    let one = renorm(&["ids", "--config", cfg_s, "--jobs", "1", "--out", a.to_str().unwrap()]);
    let eight = renorm(&["ids", "--config", cfg_s, "--jobs", "8", "--out", b.to_str().unwrap()]);
    assert_eq!((one.status.code(), eight.status.code()), (Some(0), Some(0)));
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let over = renorm(&["ids", "--config", cfg_s, "--points", "3"]);
    assert_eq!(table(&over).1.len(), 3);
    std::fs::remove_dir_all(&dir).unwrap();
}
