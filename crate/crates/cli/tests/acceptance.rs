//! Acceptance criteria 1 to 10, one PASS/FAIL line each.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use renorm_cli::commands::{cmd_dichotomy, cmd_spectrum, root_set};
use renorm_cli::config::RunConfig;
use renorm_cli::record::ResultRecord;
use renorm_cli::verify::{oracle_gap, run_check, ALPHA_GRID};
use renorm_cli::{execute, Command, Output};
use renorm_core::halfline::{build_eigenfunction, parseval_check};
use renorm_core::model::{derive_params, BlowupPrefix};
use renorm_core::propagator::Renormalizer;
use renorm_core::spectral::{classify, ids, lyapunov, Classification, IdsMethod};
use renorm_core::string_oracle::{build_operator, discretize, eigen_count, Boundary, Scheme, TridiagonalOperator};
use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

type Outcome = Result<(bool, String), String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn checks_pass(ids: &[&str]) -> Outcome {
    let cfg = RunConfig::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for id in ids {
        let c = run_check(&cfg, id).map_err(err)?;
        ok &= c.passed;
        parts.push(format!("{id}: {}", c.detail));
    }
    Ok((ok, parts.join(" | ")))
}

/// Closed-form spectrum at alpha = 1/2 through the ladder and the string oracle.
fn criterion_1() -> Outcome {
    let cfg = RunConfig {
        alpha: 0.5,
        window: (-(10.5 * PI).powi(2), 0.0),
        oracle_depth: 12,
        ..RunConfig::default()
    };
    let rec = cmd_spectrum(&cfg).map_err(err)?;
    let want: Vec<f64> = (0..=10).map(|k| -((k as f64) * PI).powi(2)).collect();
    let values: Vec<Option<f64>> = rec.values("value").iter().map(|c| c.as_real()).collect();
    let oracle: Vec<Option<f64>> = rec.values("oracle_value").iter().map(|c| c.as_real()).collect();
    if values.len() != want.len() || oracle.len() != want.len() {
        return Ok((false, format!("{} ladder and {} oracle rows, want 11", values.len(), oracle.len())));
    }
    let (mut ladder_err, mut oracle_err) = (0.0_f64, 0.0_f64);
    for ((v, o), w) in values.iter().zip(&oracle).zip(&want) {
        let (v, o) = (v.ok_or("missing ladder value")?, o.ok_or("missing oracle value")?);
        let scale = w.abs().max(1.0);
        ladder_err = ladder_err.max((v - w).abs() / scale);
        oracle_err = oracle_err.max((o - w).abs() / scale);
    }
    Ok((
        ladder_err <= 1e-8 && oracle_err <= 1e-2,
        format!("ladder relative error {ladder_err:.3e}, oracle (2^12 masses) {oracle_err:.3e}"),
    ))
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0_f64;
    for alpha in [1.0 / 3.0, 0.5, 2.0 / 3.0] {
        worst = worst.max(oracle_gap(alpha, 14).map_err(err)?);
    }
    Ok((worst <= 1e-3, format!("max entry gap {worst:.3e} at 2^14 masses")))
}

fn criterion_3() -> Outcome {
    checks_pass(&[
        "propagator.identities",
        "propagator.semiconjugacy",
        "renorm.green_doubling",
        "renorm.r_identity",
        "renorm.cone",
    ])
}

fn criterion_4() -> Outcome {
    checks_pass(&["renorm.d_orbit"])
}

fn criterion_5() -> Outcome {
    let level = 12;
    let half = Renormalizer::new(derive_params(0.5).map_err(err)?).map_err(err)?;
    let radii = [10.0_f64, 100.0, 1000.0];
    let lambdas: Vec<f64> = radii.iter().map(|r| -r).collect();
    let est = ids(&half, &BlowupPrefix::ones(0), level, &lambdas, IdsMethod::OracleInertia).map_err(err)?;
    let mut weyl = 0.0_f64;
    let mut split = 0.0_f64;
    for (e, r) in est.iter().zip(radii) {
        let want = r.sqrt() / PI;
        weyl = weyl.max((e.normalized_neumann - want).abs() / want);
        split = split.max((e.normalized_neumann - e.normalized_dirichlet).abs());
    }
    let split_bound = 2.0 * 2f64.powi(-(level as i32));
    let mut scaling = 0.0_f64;
    for alpha in [1.0 / 3.0, 2.0 / 3.0] {
        let r = Renormalizer::new(derive_params(alpha).map_err(err)?).map_err(err)?;
        let g = r.params.gamma;
        let (lo, hi) = (-100.0, -1.0);
        let e = ids(&r, &BlowupPrefix::ones(0), level, &[lo, hi, g * lo, g * hi], IdsMethod::OracleInertia)
            .map_err(err)?;
        let mu_b = e[0].normalized_neumann - e[1].normalized_neumann;
        let mu_gb = e[2].normalized_neumann - e[3].normalized_neumann;
        scaling = scaling.max((mu_gb - 2.0 * mu_b).abs() / (2.0 * mu_b));
    }
    Ok((
        weyl <= 0.02 && split <= split_bound && scaling <= 0.03,
        format!(
            "Weyl relative error {weyl:.3e}; Neumann/Dirichlet gap {split:.3e} (bound {split_bound:.3e}); mu(gamma B)/2mu(B) - 1 = {scaling:.3e} for B = [-100, -1)"
        ),
    ))
}

/// The `index`-th smallest eigenvalue by Sturm bisection.
fn kth_eigenvalue(op: &TridiagonalOperator, index: usize, lo: f64, hi: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    while b - a > 1e-12 * a.abs().max(b.abs()) {
        let m = 0.5 * (a + b);
        if eigen_count(op, m) > index {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

/// Oracle eigenvalues sampled at level 12.
const LEVEL6: usize = 12;
const DEPTH6: usize = 8;
const SAMPLES6: usize = 60;
const WINDOW6: (f64, f64) = (-300.0, 0.0);

fn criterion_6() -> Outcome {
    let cfg = RunConfig::default();
    let ccfg = cfg.classify_config();
    let (mut ladder_tested, mut ladder_bad) = (0, 0);
    let (mut sampled, mut in_support, mut small_zeta, mut both) = (0, 0, 0, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for alpha in [1.0 / 3.0, 2.0 / 3.0] {
        let r = Renormalizer::new(derive_params(alpha).map_err(err)?).map_err(err)?;
        let roots = root_set(&r, -3000.0, &cfg).map_err(err)?;
        for k in 1..=5 {
            let lk = roots.get(k).ok_or(format!("root {k} missing for alpha {alpha}"))?;
            for p in -3..=3 {
                let lam = lk * r.params.gamma.powi(p);
                ladder_tested += 1;
                let gap = classify(&r, lam, &ccfg).verdict == Classification::Gap;
                let zeta = lyapunov(&r, lam, &ccfg.orbit).map_err(err)?.zeta;
                if !(gap && zeta > 0.0) {
                    ladder_bad += 1;
                }
            }
        }
        let string = discretize(&r.params, &BlowupPrefix::ones(LEVEL6), LEVEL6 + DEPTH6, Scheme::Barycenter);
        let op = build_operator(&string, Boundary::Neumann).map_err(err)?;
        let (lo, hi) = WINDOW6;
        let below = eigen_count(&op, lo);
        // The Neumann zero mode is left out.
        let inside = eigen_count(&op, hi - 1e-9) - below;
        for _ in 0..SAMPLES6 {
            let idx = below + rng.gen_range(0..inside);
            let lam = kth_eigenvalue(&op, idx, lo, hi);
            sampled += 1;
            let sup = classify(&r, lam, &ccfg).verdict == Classification::InSupport;
            let low = lyapunov(&r, lam, &ccfg.orbit).map_err(err)?.zeta <= 1e-3;
            in_support += sup as usize;
            small_zeta += low as usize;
            both += (sup && low) as usize;
        }
    }
    let fraction = both as f64 / sampled as f64;
    Ok((
        ladder_bad == 0 && fraction >= 0.95,
        format!(
            "ladder points Gap with zeta > 0: {}/{ladder_tested}; level-{LEVEL6} oracle eigenvalues in [-300, 0): {in_support}/{sampled} InSupport, {small_zeta}/{sampled} with zeta <= 1e-3, both {:.1}% (need 95%)",
            ladder_tested - ladder_bad,
            100.0 * fraction
        ),
    ))
}

/// `(alpha, boundary, verdict, ratios)` per row.
type DichotomyRow = (f64, String, String, Vec<f64>);

fn dichotomy_rows(rec: &ResultRecord) -> Vec<DichotomyRow> {
    let ratio_cols: Vec<usize> = rec
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.starts_with("ratio_"))
        .map(|(i, _)| i)
        .collect();
    let (a, b, v) = (rec.column("alpha"), rec.column("boundary"), rec.column("verdict"));
    rec.rows
        .iter()
        .map(|row| {
            let text = |i: Option<usize>| i.and_then(|i| row[i].as_text()).unwrap_or("").to_string();
            (
                a.and_then(|i| row[i].as_real()).unwrap_or(f64::NAN),
                text(b),
                text(v),
                ratio_cols.iter().filter_map(|&i| row[i].as_real()).collect(),
            )
        })
        .collect()
}

fn criterion_7() -> Outcome {
    let cfg = RunConfig {
        alphas: ALPHA_GRID.to_vec(),
        ..RunConfig::default()
    };
    let rec = cmd_dichotomy(&cfg).map_err(err)?;
    let rows = dichotomy_rows(&rec);
    let mut wrong = Vec::new();
    for (alpha, boundary, verdict, _) in &rows {
        // delta > 1 exactly when alpha > 1/2.
        let pure_neumann = *alpha > 0.5;
        let want = if boundary == "neumann" { pure_neumann } else { !pure_neumann };
        if (verdict == "SquareSummable") != want {
            wrong.push(format!("{alpha:.4} {boundary}"));
        }
    }
    let mirror_cfg = RunConfig {
        alphas: ALPHA_GRID.iter().map(|a| 1.0 - a).collect(),
        ..RunConfig::default()
    };
    let mirror = dichotomy_rows(&cmd_dichotomy(&mirror_cfg).map_err(err)?);
    let mut mismatches = 0;
    for (alpha, boundary, verdict, ratios) in &rows {
        let partner = mirror
            .iter()
            .find(|m| (m.0 - (1.0 - alpha)).abs() < 1e-12 && m.1 != *boundary);
        let same = partner.is_some_and(|m| {
            m.2 == *verdict
                && m.3.len() == ratios.len()
                && m.3.iter().zip(ratios).all(|(x, y)| (x - y).abs() <= 1e-12 * y.abs())
        });
        mismatches += (!same) as usize;
    }
    let ratio_err = rec
        .values("max_ratio_error")
        .iter()
        .filter_map(|c| c.as_real())
        .fold(0.0_f64, f64::max);
    Ok((
        wrong.is_empty() && mismatches == 0 && ratio_err <= 1e-6 && rows.len() == 12,
        format!(
            "{} rows, wrong verdicts {wrong:?}, mirror mismatches {mismatches}, max ratio error {ratio_err:.3e} for levels <= {}",
            rows.len(),
            cfg.norm_levels
        ),
    ))
}

fn criterion_8() -> Outcome {
    let p = derive_params(0.5).map_err(err)?;
    let r = Renormalizer::new(p).map_err(err)?;
    let cfg = RunConfig::default();
    let roots = root_set(&r, -400.0, &cfg).map_err(err)?;
    let n = 2;
    let depth = 10;
    let s = discretize(&p, &BlowupPrefix::ones(n), depth, Scheme::Barycenter);
    let mut reps = Vec::new();
    for k in 1..=2 {
        for pp in -2..=0 {
            reps.push(build_eigenfunction(&roots, k, pp, Boundary::Neumann, n, depth - n).map_err(err)?);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut residual, mut align) = (0.0_f64, 1.0_f64);
    for _ in 0..20 {
        let g: Vec<f64> = s
            .positions
            .iter()
            .map(|&x| if x <= 1.0 { rng.gen_range(-1.0..1.0) } else { 0.0 })
            .collect();
        let rep = parseval_check(&p, &s, Boundary::Neumann, &g, &reps).map_err(err)?;
        residual = residual.max(rep.relative_residual);
        align = rep.alignments.iter().fold(align, |m, a| m.min(a.2));
    }
    Ok((
        residual <= 1e-8 && align >= 0.999,
        format!("20 random g: max residual / |g|^2 = {residual:.3e}; smallest alignment {align:.6}"),
    ))
}

fn criterion_9() -> Outcome {
    checks_pass(&[
        "halfline.lemma45",
        "halfline.k_recursion",
        "halfline.pi_bound",
        "halfline.condition_bound",
        "halfline.energy_ratio",
    ])
}

fn criterion_10() -> Outcome {
    let run = |jobs: usize| -> Result<String, String> {
        let cfg = RunConfig {
            jobs,
            ..RunConfig::default()
        };
        match execute(Command::Verify, &cfg).map_err(err)? {
            Output::Report(r) => Ok(r.to_json()),
            Output::Table(_) => Err("verify returned a table".into()),
        }
    };
    let one = run(1)?;
    let eight = run(8)?;
    Ok((
        one == eight,
        format!("verify reports with 1 and 8 jobs: {} and {} bytes, identical {}", one.len(), eight.len(), one == eight),
    ))
}

struct Criterion {
    number: usize,
    name: &'static str,
    limit_s: Option<f64>,
    run: fn() -> Outcome,
}

const CRITERIA: &[Criterion] = &[
    Criterion { number: 1, name: "closed-form spectrum", limit_s: Some(10.0), run: criterion_1 },
    Criterion { number: 2, name: "cross-oracle propagator", limit_s: Some(60.0), run: criterion_2 },
    Criterion { number: 3, name: "structural identities", limit_s: Some(30.0), run: criterion_3 },
    Criterion { number: 4, name: "orbit of D", limit_s: Some(1.0), run: criterion_4 },
    Criterion { number: 5, name: "density of states", limit_s: Some(120.0), run: criterion_5 },
    Criterion { number: 6, name: "gap/ladder separation", limit_s: Some(120.0), run: criterion_6 },
    Criterion { number: 7, name: "spectral-type dichotomy", limit_s: Some(120.0), run: criterion_7 },
    Criterion { number: 8, name: "finite-level completeness", limit_s: Some(60.0), run: criterion_8 },
    Criterion { number: 9, name: "trace and energy machinery", limit_s: Some(120.0), run: criterion_9 },
    Criterion { number: 10, name: "determinism", limit_s: None, run: criterion_10 },
];

fn main() -> ExitCode {
    let mut failed = 0;
    for c in CRITERIA {
        let start = Instant::now();
        let outcome = (c.run)();
        let secs = start.elapsed().as_secs_f64();
        let in_time = c.limit_s.map_or(true, |l| secs < l);
        let (passed, detail) = match outcome {
            Ok((ok, d)) => (ok && in_time, d),
            Err(e) => (false, format!("error: {e}")),
        };
        let limit = c.limit_s.map_or(String::new(), |l| format!(", limit {l} s"));
        println!(
            "criterion {} ({}): {} {detail} [{secs:.2} s{limit}]",
            c.number,
            c.name,
            if passed { "PASS" } else { "FAIL" }
        );
        failed += (!passed) as usize;
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
