//! The table-producing subcommands.

use crate::config::RunConfig;
use crate::record::{Cell, ResultRecord};
use crate::CliError;
use rayon::prelude::*;
use renorm_core::halfline::{build_eigenfunction, log_norm_ratio, norm_series, norm_verdict};
use renorm_core::model::derive_params;
use renorm_core::propagator::Renormalizer;
use renorm_core::renorm_map::{f_affine, green, AffinePoint};
use renorm_core::spectral::{classify, enumerate_eigenvalues, find_s, ids, lyapunov, RootSet};
use renorm_core::string_oracle::{build_operator, discretize, eigen_solve, Boundary, Scheme, SolveOptions};

/// Smallest root window handed to [`find_s`]; `S` has no points above it.
const MIN_ROOT_WINDOW: f64 = -8.0;

/// Root set covering `[lo, 0]`.
pub fn root_set(r: &Renormalizer, lo: f64, cfg: &RunConfig) -> Result<RootSet, CliError> {
    let lo = (lo * (1.0 + 1e-9)).min(MIN_ROOT_WINDOW);
    Ok(find_s(r, (lo, 0.0), &cfg.root_search())?)
}

fn record(cfg: &RunConfig, command: &str, columns: &[&str]) -> ResultRecord {
    ResultRecord::new(command, cfg.canonical(), columns, cfg.hash())
}

/// Oracle eigenvalues of the level-`n` string in `[a, b)`, decreasing.
/// For `b >= 0` the window is closed at the top so the Neumann zero mode is kept.
pub fn oracle_eigenvalues(cfg: &RunConfig, boundary: Boundary) -> Result<Vec<f64>, CliError> {
    let params = cfg.params()?;
    let n = cfg.level;
    let prefix = cfg.blowup.extended(n)?;
    let string = discretize(&params, &prefix, n + cfg.oracle_depth, Scheme::Barycenter);
    let op = build_operator(&string, boundary)?;
    let (a, b) = cfg.window;
    let scale = a.abs().max(params.gamma.powi(-(n as i32)));
    let hi = if b >= 0.0 { b + 1e-9 * scale } else { b };
    let opts = SolveOptions {
        tol: cfg.tol * scale,
        ..SolveOptions::default()
    };
    let mut values: Vec<f64> = eigen_solve(&op, (a, hi), &opts).iter().map(|e| e.value).collect();
    values.reverse();
    Ok(values)
}

/// Labelled ladder eigenvalues of `H_<n>` next to the string oracle.
pub fn cmd_spectrum(cfg: &RunConfig) -> Result<ResultRecord, CliError> {
    let params = cfg.params()?;
    let r = Renormalizer::new(params)?;
    let (a, b) = cfg.window;
    let mut rec = record(cfg, "spectrum", &["k", "p", "value", "oracle_value", "defect"]);
    let roots = root_set(&r, a * params.gamma.powi(cfg.level as i32), cfg)?;
    rec.notes.extend(roots.warnings.iter().cloned());
    let ladder = enumerate_eigenvalues(&roots, cfg.level, (a, b), cfg.boundary)?;
    let oracle = oracle_eigenvalues(cfg, cfg.boundary)?;
    if ladder.len() != oracle.len() {
        rec.notes.push(format!(
            "ladder has {} values in the window, oracle {}; pairing from the top",
            ladder.len(),
            oracle.len()
        ));
    }
    for i in 0..ladder.len().max(oracle.len()) {
        let lad = ladder.get(i);
        let orc = oracle.get(i).copied();
        let label = lad.and_then(|e| e.label);
        let defect = match (lad, orc) {
            (Some(e), Some(o)) if e.value == 0.0 => Some(o.abs()),
            (Some(e), Some(o)) => Some((o - e.value).abs() / e.value.abs()),
            _ => None,
        };
        rec.push(vec![
            label.map(|l| l.k).into(),
            label.map(|l| l.p).into(),
            lad.map(|e| e.value).into(),
            orc.into(),
            defect.into(),
        ]);
    }
    Ok(rec)
}

/// `points` values spread evenly over the window, ends included.
pub fn lambda_grid(window: (f64, f64), points: usize) -> Vec<f64> {
    let (a, b) = window;
    if points == 1 {
        return vec![a];
    }
    (0..points)
        .map(|i| a + (b - a) * i as f64 / (points - 1) as f64)
        .collect()
}

pub fn cmd_ids(cfg: &RunConfig) -> Result<ResultRecord, CliError> {
    let params = cfg.params()?;
    let r = Renormalizer::new(params)?;
    let mut rec = record(
        cfg,
        "ids",
        &["lambda", "ids_neumann", "ids_dirichlet", "zeta", "class", "note"],
    );
    let lambdas = lambda_grid(cfg.window, cfg.points);
    let estimates = ids(&r, &cfg.blowup, cfg.level, &lambdas, cfg.ids_method)?;
    let ccfg = cfg.classify_config();
    let orbit = cfg.orbit();
    let dynamics = lambdas
        .par_iter()
        .map(|&lam| {
            let zeta = lyapunov(&r, lam, &orbit)?.zeta;
            Ok((zeta, classify(&r, lam, &ccfg).verdict))
        })
        .collect::<Result<Vec<_>, renorm_core::Error>>()?;
    let note = if params.is_lebesgue() { "no gaps expected" } else { "" };
    if params.is_lebesgue() {
        rec.notes.push("delta = 1: no gaps expected".into());
    }
    for ((lam, est), (zeta, class)) in lambdas.iter().zip(&estimates).zip(dynamics) {
        rec.push(vec![
            (*lam).into(),
            est.normalized_neumann.into(),
            est.normalized_dirichlet.into(),
            zeta.into(),
            class.name().into(),
            note.into(),
        ]);
    }
    Ok(rec)
}

/// Escape-time data over the affine chart `z = 1`.
pub fn cmd_plane(cfg: &RunConfig) -> Result<ResultRecord, CliError> {
    let params = cfg.params()?;
    let orbit = cfg.orbit();
    let mut rec = record(
        cfg,
        "plane",
        &[
            "x",
            "y",
            "green",
            "bounded",
            "escape_step",
            "r_sign",
            "c_residual",
            "d_residual",
            "image_x",
            "image_y",
        ],
    );
    let xs = lambda_grid(cfg.plane_x, cfg.grid);
    let ys = lambda_grid(cfg.plane_y, cfg.grid);
    let points: Vec<(f64, f64)> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect();
    let rows: Vec<Vec<Cell>> = points
        .par_iter()
        .map(|&(x, y)| {
            let p = AffinePoint::new(x, y);
            let s = green(p, &params, &orbit);
            let r = x * y - 1.0;
            let img = f_affine(p, &params);
            vec![
                x.into(),
                y.into(),
                s.green_estimate.into(),
                s.bounded.into(),
                s.escape_step.into(),
                Cell::Int(if r > 0.0 { 1 } else if r < 0.0 { -1 } else { 0 }),
                (r.abs() / (1.0 + (x * y).abs())).into(),
                ((x + y / params.delta).abs() / (1.0 + x.abs() + (y / params.delta).abs())).into(),
                img.x.into(),
                img.y.into(),
            ]
        })
        .collect();
    for row in rows {
        rec.push(row);
    }
    Ok(rec)
}

/// Number of norm-ladder ratios shown per row.
pub const SHOWN_RATIOS: usize = 5;

struct DichotomyRow {
    alpha: f64,
    delta: f64,
    boundary: Boundary,
    verdict: &'static str,
    ratios: Vec<f64>,
    max_ratio_error: f64,
    c_delta: Option<f64>,
    lambda_1: f64,
    gap_class: &'static str,
    zeta: f64,
}

fn dichotomy_row(cfg: &RunConfig, alpha: f64, boundary: Boundary) -> Result<DichotomyRow, CliError> {
    let params = derive_params(alpha)?;
    let r = Renormalizer::new(params)?;
    let (verdict, c_delta) = norm_verdict(boundary, &params);
    let ratios = (0..SHOWN_RATIOS)
        .map(|n| log_norm_ratio(boundary, n, &params).exp())
        .collect();
    let roots = root_set(&r, -400.0, cfg)?;
    let rep = build_eigenfunction(&roots, 1, 0, boundary, cfg.norm_levels, cfg.base_depth)?;
    let series = norm_series(&rep, &params, cfg.norm_levels)?;
    let lambda_1 = roots
        .get(1)
        .ok_or_else(|| CliError::Usage(format!("no root of S found for alpha {alpha}")))?;
    let orbit = cfg.orbit();
    Ok(DichotomyRow {
        alpha,
        delta: params.delta,
        boundary,
        verdict: verdict.name(),
        ratios,
        max_ratio_error: series.max_ratio_error,
        c_delta,
        lambda_1,
        gap_class: classify(&r, lambda_1, &cfg.classify_config()).verdict.name(),
        zeta: lyapunov(&r, lambda_1, &orbit)?.zeta,
    })
}

/// Norm-series verdicts for both boundary conditions over `alphas`.
pub fn cmd_dichotomy(cfg: &RunConfig) -> Result<ResultRecord, CliError> {
    let mut columns = vec!["alpha", "delta", "boundary", "verdict"];
    let ratio_names: Vec<String> = (1..=SHOWN_RATIOS).map(|i| format!("ratio_{i}")).collect();
    columns.extend(ratio_names.iter().map(String::as_str));
    columns.extend(["max_ratio_error", "c_delta", "lambda_1", "gap_class", "zeta"]);
    let mut rec = record(cfg, "dichotomy", &columns);
    let jobs: Vec<(f64, Boundary)> = cfg
        .alphas
        .iter()
        .flat_map(|&a| [(a, Boundary::Neumann), (a, Boundary::Dirichlet)])
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(a, b)| dichotomy_row(cfg, a, b))
        .collect::<Result<Vec<_>, _>>()?;
    for row in rows {
        let mut cells: Vec<Cell> = vec![
            row.alpha.into(),
            row.delta.into(),
            row.boundary.name().into(),
            row.verdict.into(),
        ];
        cells.extend(row.ratios.iter().map(|&x| Cell::Real(x)));
        cells.extend([
            row.max_ratio_error.into(),
            row.c_delta.into(),
            row.lambda_1.into(),
            row.gap_class.into(),
            row.zeta.into(),
        ]);
        rec.push(cells);
    }
    Ok(rec)
}
