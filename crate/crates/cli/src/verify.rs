//! Registry of invariant checks behind `renorm verify`.
//!
//! Every check draws its samples from a generator seeded by the run seed and
//! the check id, so a report depends only on the configuration.

use crate::commands::{cmd_spectrum, root_set};
use crate::config::RunConfig;
use crate::record::Provenance;
use crate::CliError;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use renorm_core::halfline::{
    build_eigenfunction, energy_ratios, lemma45_check, norm_series, norm_verdict, parseval_check,
    quadratic_form, recursion_residuals, trace_subsequence, NormVerdict,
};
use renorm_core::model::{
    blowup_map, cell_mass, derive_params, BlowupPrefix, CellAddress, ModelParams, Symbol, Tail,
};
use renorm_core::propagator::{semiconjugacy_residual, Renormalizer};
use renorm_core::renorm_map::{
    algebraic_invariants, cone_checks, d_orbit, distance_after, f_affine, green, infinity_preimage,
    r_lift, x_minus, x_plus, AffinePoint, ProjectivePoint,
};
use renorm_core::scalar::Mat2;
use renorm_core::spectral::{
    classify, enumerate_eigenvalues, lyapunov, support_points, Classification,
};
use renorm_core::string_oracle::{build_operator, discretize, eigen_count, Boundary, Scheme};
use serde::Serialize;
use std::time::Instant;

/// Test grid of `alpha` values away from `delta = 1`.
pub const ALPHA_GRID: [f64; 6] = [0.25, 1.0 / 3.0, 0.45, 0.55, 2.0 / 3.0, 0.75];
const STANDARD_ALPHAS: [f64; 3] = [1.0 / 3.0, 0.5, 2.0 / 3.0];

/// Samples per structural identity.
pub const SAMPLES: usize = 1000;
pub const LEMMA45_TRIALS: usize = 10_000;

/// Frozen regression thresholds.
pub const ORACLE_AGREEMENT_TOL: f64 = 1e-6;
pub const LADDER_ORACLE_TOL: f64 = 1e-2;
pub const ISOLATION_FLOOR: f64 = 2.5;
pub const CONDITION_BOUND: f64 = 1e3;
pub const ENERGY_BOUND: f64 = 20.0;
pub const PI_BOUND: f64 = 50.0;

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub passed: bool,
    pub detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

type CheckFn = fn(&RunConfig, &mut ChaCha8Rng) -> Result<Verdict, CliError>;

/// All checks, in report order.
pub const CHECKS: &[(&str, CheckFn)] = &[
    ("model.identities", model_identities),
    ("model.additivity", model_additivity),
    ("model.nesting", model_nesting),
    ("string.unimodular", string_unimodular),
    ("string.herglotz", string_herglotz),
    ("string.count", string_count),
    ("renorm.homogeneity", renorm_homogeneity),
    ("renorm.d_orbit", renorm_d_orbit),
    ("renorm.attracting", renorm_attracting),
    ("renorm.infinity", renorm_infinity),
    ("renorm.r_identity", renorm_r_identity),
    ("renorm.cone", renorm_cone),
    ("renorm.green_doubling", renorm_green_doubling),
    ("propagator.semiconjugacy", propagator_semiconjugacy),
    ("propagator.identities", propagator_identities),
    ("propagator.herglotz", propagator_herglotz),
    ("propagator.oracle_agreement", propagator_oracle_agreement),
    ("propagator.hypothesis", propagator_hypothesis),
    ("spectral.lyapunov_doubling", spectral_lyapunov_doubling),
    ("spectral.root_ladder_oracle", spectral_root_ladder_oracle),
    ("spectral.gap_openness", spectral_gap_openness),
    ("spectral.isolation", spectral_isolation),
    ("halfline.norm_ladder", halfline_norm_ladder),
    ("halfline.dichotomy", halfline_dichotomy),
    ("halfline.mirror", halfline_mirror),
    ("halfline.condition_bound", halfline_condition_bound),
    ("halfline.energy_ratio", halfline_energy_ratio),
    ("halfline.pi_bound", halfline_pi_bound),
    ("halfline.lemma45", halfline_lemma45),
    ("halfline.k_recursion", halfline_k_recursion),
    ("halfline.parseval", halfline_parseval),
    ("halfline.form_positive", halfline_form_positive),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub id: String,
    pub passed: bool,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub command: String,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub provenance: Provenance,
}

fn check_seed(seed: u64, id: &str) -> u64 {
    // FNV-1a of the id, mixed with the run seed.
    let h = id
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325_u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3));
    h ^ seed
}

/// Run one check by id.
pub fn run_check(cfg: &RunConfig, id: &str) -> Result<CheckResult, CliError> {
    let f = CHECKS
        .iter()
        .find(|(name, _)| *name == id)
        .map(|(_, f)| *f)
        .ok_or_else(|| CliError::Usage(format!("unknown check {id:?}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(check_seed(cfg.seed, id));
    let start = Instant::now();
    let v = f(cfg, &mut rng).unwrap_or_else(|e| verdict(false, format!("error: {e}")));
    Ok(CheckResult {
        id: id.to_string(),
        passed: v.passed,
        detail: v.detail,
        seconds: cfg.timing.then(|| start.elapsed().as_secs_f64()),
    })
}

/// Run the selected checks (all when `cfg.checks` is empty) on the current
/// rayon pool; results keep registry order.
pub fn cmd_verify(cfg: &RunConfig) -> Result<VerifyReport, CliError> {
    for id in &cfg.checks {
        if !CHECKS.iter().any(|(name, _)| name == id) {
            return Err(CliError::Usage(format!("unknown check {id:?}")));
        }
    }
    let ids: Vec<&str> = CHECKS
        .iter()
        .map(|(name, _)| *name)
        .filter(|name| cfg.checks.is_empty() || cfg.checks.iter().any(|c| c == name))
        .collect();
    let checks = ids
        .par_iter()
        .map(|id| run_check(cfg, id))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(VerifyReport {
        command: "verify".into(),
        passed: checks.iter().all(|c| c.passed),
        checks,
        provenance: Provenance::new(cfg.hash()),
    })
}

impl VerifyReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn failed(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

fn params(alpha: f64) -> Result<ModelParams, CliError> {
    Ok(derive_params(alpha)?)
}

fn renormalizer(alpha: f64) -> Result<Renormalizer, CliError> {
    Ok(Renormalizer::new(params(alpha)?)?)
}

fn symbols(rng: &mut ChaCha8Rng, len: usize) -> Vec<Symbol> {
    (0..len)
        .map(|_| if rng.gen_bool(0.5) { Symbol::Two } else { Symbol::One })
        .collect()
}

fn model_identities(_: &RunConfig, _: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut worst = 0.0_f64;
    for i in 1..50 {
        let alpha = i as f64 / 50.0;
        let p = params(alpha)?;
        let one = (1.0 - alpha).powi(-2);
        worst = worst
            .max((p.delta * p.gamma - one).abs() / one)
            .max((p.gamma - p.delta / (alpha * alpha)).abs() / p.gamma)
            .max((alpha * (1.0 + 1.0 / p.delta) - 1.0).abs());
    }
    Ok(verdict(worst <= 1e-13, format!("max relative error {worst:.3e} over 49 alphas")))
}

fn model_additivity(_: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut worst = 0.0_f64;
    for _ in 0..SAMPLES {
        let p = params(rng.gen_range(0.05..0.95))?;
        let plen = rng.gen_range(0..6);
        let prefix = BlowupPrefix::new(symbols(rng, plen), Tail::Undeclared);
        let wlen = rng.gen_range(0..12);
        let word = symbols(rng, wlen);
        let parent = cell_mass(&p, &prefix, &CellAddress::new(plen, word.clone()))?;
        let mut kids = 0.0;
        for s in [Symbol::One, Symbol::Two] {
            let mut child = word.clone();
            child.push(s);
            kids += cell_mass(&p, &prefix, &CellAddress::new(plen, child))?;
        }
        worst = worst.max((parent - kids).abs() / parent);
    }
    Ok(verdict(worst <= 1e-14, format!("max relative error {worst:.3e} over {SAMPLES} cells")))
}

fn model_nesting(_: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut violations = 0;
    for _ in 0..SAMPLES / 10 {
        let p = params(rng.gen_range(0.05..0.95))?;
        let s = symbols(rng, 12);
        for n in 0..s.len() {
            let inner = blowup_map(&p, &s[..n]);
            let outer = blowup_map(&p, &s[..n + 1]);
            let (a, b) = (inner.apply(0.0), inner.apply(1.0));
            let (c, d) = (outer.apply(0.0), outer.apply(1.0));
            let tol = 1e-12 * (d - c);
            if !(c <= a + tol && b <= d + tol) {
                violations += 1;
            }
        }
    }
    Ok(verdict(violations == 0, format!("{violations} violations over {} inclusions", SAMPLES / 10 * 12)))
}

fn string_unimodular(_: &RunConfig, _: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut worst = 0.0_f64;
    for alpha in STANDARD_ALPHAS {
        let p = params(alpha)?;
        let s = discretize(&p, &BlowupPrefix::trivial(), 16, Scheme::Barycenter);
        for lam in [-1e4, -3e3, -1e3, -1e2, -10.0, -1.0, -0.1] {
            let g = s.propagate_full(lam);
            let scale = g.max_abs().max(1.0).powi(2);
            worst = worst.max((g.det() - 1.0).abs() / scale);
        }
    }
    Ok(verdict(
        worst <= 1e-10,
        format!("max |det - 1| / max(1, |G|)^2 = {worst:.3e} at 2^16 masses, |lambda| <= 1e4"),
    ))
}

fn string_herglotz(_: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut bad = 0;
    let strings = STANDARD_ALPHAS
        .iter()
        .map(|&a| Ok(discretize(&params(a)?, &BlowupPrefix::trivial(), 8, Scheme::Barycenter)))
        .collect::<Result<Vec<_>, CliError>>()?;
    for i in 0..SAMPLES {
        let lam = Complex64::new(rng.gen_range(-200.0..50.0), rng.gen_range(1e-3..50.0));
        let g = strings[i % strings.len()].propagate_full(lam);
        if (g.m[0][0].conj() * g.m[1][0]).im <= 0.0 {
            bad += 1;
        }
    }
    Ok(verdict(bad == 0, format!("{bad} sign failures over {SAMPLES} points")))
}

fn string_count(_: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut bad = 0;
    for i in 0..SAMPLES / 4 {
        let p = params(STANDARD_ALPHAS[i % 3])?;
        let s = discretize(&p, &BlowupPrefix::ones(2), 8, Scheme::Barycenter);
        let op = build_operator(&s, Boundary::Neumann)?;
        let a = rng.gen_range(-3000.0..-1.0);
        let b = a * rng.gen_range(0.0..1.0);
        let c = b * rng.gen_range(0.0..1.0);
        let (na, nb, nc) = (eigen_count(&op, a), eigen_count(&op, b), eigen_count(&op, c));
        if !(na <= nb && nb <= nc) || nc - na != (nb - na) + (nc - nb) {
            bad += 1;
        }
    }
    Ok(verdict(
        bad == 0,
        format!("{bad} failures over {} nested windows; counts below lambda grow with lambda", SAMPLES / 4),
    ))
}

fn max_abs3(v: &[f64; 3]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn renorm_homogeneity(_: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut worst = 0.0_f64;
    for _ in 0..SAMPLES {
        let p = params(rng.gen_range(0.1..0.9))?;
        let x: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-5.0..5.0));
        let t = rng.gen_range(-4.0..4.0);
        let a = r_lift([t * x[0], t * x[1], t * x[2]], &p);
        let b = r_lift(x, &p);
        let scale = max_abs3(&a).max(t * t * max_abs3(&b)).max(f64::MIN_POSITIVE);
        for i in 0..3 {
            worst = worst.max((a[i] - t * t * b[i]).abs() / scale);
        }
    }
    Ok(verdict(worst <= 1e-13, format!("max relative error {worst:.3e}")))
}

fn renorm_d_orbit(_: &RunConfig, _: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut worst = 0.0_f64;
    for alpha in [1.0 / 3.0, 2.0 / 3.0, 0.75] {
        let p = params(alpha)?;
        let ld = p.delta.ln();
        for sample in [-2.0, -0.3, 0.37, 5.0] {
            let orbit = d_orbit(&p, sample, 40)?;
            let first = &orbit[0];
            let want = [-1.0 / p.delta, -p.delta];
            worst = worst
                .max((first.sign_x * first.log_abs_x.exp() - want[0]).abs() / want[0].abs())
                .max((first.sign_y * first.log_abs_y.exp() - want[1]).abs() / want[1].abs());
            for e in &orbit[1..] {
                let w = 2f64.powi(e.step as i32 - 1) * ld;
                let err = (e.log_abs_x + w).abs().max((e.log_abs_y - w).abs()) / w.abs().max(1.0);
                let signs = e.sign_x == 1.0 && e.sign_y == 1.0;
                worst = worst.max(if signs { err } else { f64::INFINITY });
            }
        }
    }
    Ok(verdict(worst <= 1e-10, format!("log-coordinate error {worst:.3e} for n <= 40")))
}

fn renorm_attracting(_: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut worst = 0.0_f64;
    for alpha in [0.25, 1.0 / 3.0, 2.0 / 3.0, 0.75] {
        let p = params(alpha)?;
        let (target, upper) = if p.delta > 1.0 { (x_plus(), true) } else { (x_minus(), false) };
        for _ in 0..SAMPLES / 4 {
            let m = rng.gen_range(0.05..0.9) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            // C+ has |x| < |y|; C- the reverse.
            let x = if upper { m } else { 1.0 / m };
            worst = worst.max(distance_after([x, 1.0 / x, 1.0], &target, &p, 40)?);
        }
    }
    Ok(verdict(worst <= 1e-8, format!("max distance to the attracting point after 40 steps {worst:.3e}")))
}

fn renorm_infinity(_: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut worst = 0.0_f64;
    for _ in 0..SAMPLES {
        let p = params(rng.gen_range(0.1..0.9))?;
        let (x, y) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let img = ProjectivePoint::new(r_lift(infinity_preimage(x, y, &p), &p))?;
        worst = worst.max(img.distance(&ProjectivePoint::new([x, y, 0.0])?));
    }
    Ok(verdict(worst <= 1e-12, format!("max projective distance {worst:.3e}")))
}

fn renorm_r_identity(_: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut worst = 0.0_f64;
    for _ in 0..SAMPLES {
        let p = params(rng.gen_range(0.1..0.9))?;
        let x: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-5.0..5.0));
        worst = worst.max(algebraic_invariants(x, &p).relative_residual());
    }
    Ok(verdict(worst <= 1e-9, format!("max relative residual {worst:.3e}")))
}

fn renorm_cone(_: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut points_bad = 0;
    let mut curve_bad = 0;
    for alpha in STANDARD_ALPHAS {
        let r = renormalizer(alpha)?;
        let points: Vec<[f64; 3]> = (0..SAMPLES)
            .map(|_| std::array::from_fn(|_| rng.gen_range(-5.0..5.0)))
            .collect();
        let curve: Vec<AffinePoint<f64>> = (0..SAMPLES)
            .map(|i| r.phi(-50.0 * i as f64 / (SAMPLES - 1) as f64).point())
            .collect();
        let rep = cone_checks(&points, &curve, &r.params);
        points_bad += rep.violations;
        curve_bad += rep.curve_violations;
    }
    Ok(verdict(
        points_bad == 0 && curve_bad == 0,
        format!("{points_bad} sign flips, {curve_bad} curve points outside the cone"),
    ))
}

fn renorm_green_doubling(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut worst = 0.0_f64;
    let orbit = cfg.orbit();
    for i in 0..SAMPLES {
        let p = params(STANDARD_ALPHAS[i % 3])?;
        let q = AffinePoint::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let g0 = green(q, &p, &orbit).green_estimate;
        let g1 = green(f_affine(q, &p), &p, &orbit).green_estimate;
        worst = worst.max((g1 - 2.0 * g0).abs());
    }
    Ok(verdict(worst <= 1e-6, format!("max |G(f(x)) - 2 G(x)| = {worst:.3e}")))
}

fn propagator_semiconjugacy(cfg: &RunConfig, _: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut worst = 0.0_f64;
    for alpha in STANDARD_ALPHAS {
        let r = renormalizer(alpha)?;
        let map = match cfg.inject_delta_error {
            Some(e) => r.params.with_corrupted_delta(e),
            None => r.params,
        };
        for i in 0..SAMPLES {
            let lam = -50.0 * i as f64 / (SAMPLES - 1) as f64;
            worst = worst.max(semiconjugacy_residual(&r, &map, lam));
        }
    }
    let mut detail = format!("max residual {worst:.3e} on [-50, 0]");
    if let Some(e) = cfg.inject_delta_error {
        detail.push_str(&format!(" (delta perturbed by {e:e})"));
    }
    Ok(verdict(worst <= 1e-8, detail))
}

/// Depth of the gluing used to test `c = lambda b` independently of how
/// [`Renormalizer::entries`] forms `c`.
const GLUE_DEPTH: usize = 3;

/// Propagator of `I` at `lambda` as the ordered product of its `2^k` level-`k`
/// cells, each a rescaled copy of the propagator at `gamma^{-k} lambda`.
pub fn glued_propagator(r: &Renormalizer, lambda: f64, k: usize) -> Result<Mat2<f64>, CliError> {
    let e = r.entries(lambda * r.params.gamma.powi(-(k as i32)))?;
    let (r1, r2) = (r.params.ratio(Symbol::One), r.params.ratio(Symbol::Two));
    let mut g = Mat2::identity();
    for i in 0u32..(1 << k) {
        let twos = i.count_ones() as i32;
        let w = r1.powi(k as i32 - twos) * r2.powi(twos);
        g = Mat2::new(e.a, w * e.b, e.c / w, e.d) * g;
    }
    Ok(g)
}

fn propagator_identities(_: &RunConfig, _: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let (mut det, mut ratio) = (0.0_f64, 0.0_f64);
    for alpha in STANDARD_ALPHAS {
        let r = renormalizer(alpha)?;
        for i in 0..SAMPLES {
            let lam = -50.0 * i as f64 / (SAMPLES - 1) as f64;
            let e = r.entries(lam)?;
            det = det.max((e.matrix().det() - 1.0).abs());
            let glued = glued_propagator(&r, lam, GLUE_DEPTH)?;
            let c = glued.m[1][0];
            ratio = ratio.max((c - lam * e.b).abs() / c.abs().max(1.0));
        }
    }
    Ok(verdict(
        det <= 1e-9 && ratio <= 1e-9,
        format!(
            "|det - 1| <= {det:.3e}; glued c against lambda b <= {ratio:.3e}; {} points",
            3 * SAMPLES
        ),
    ))
}

fn propagator_herglotz(_: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut bad = 0;
    let rs = STANDARD_ALPHAS
        .iter()
        .map(|&a| renormalizer(a))
        .collect::<Result<Vec<_>, _>>()?;
    for i in 0..SAMPLES {
        let lam = Complex64::new(rng.gen_range(-40.0..10.0), rng.gen_range(0.01..20.0));
        let e = rs[i % 3].entries(lam)?;
        if (e.a.conj() * e.c).im <= 0.0 {
            bad += 1;
        }
    }
    Ok(verdict(bad == 0, format!("{bad} sign failures over {SAMPLES} points")))
}

/// `max |entries(lambda) - string propagator|` over 50 points of `[-40, 0]`.
pub fn oracle_gap(alpha: f64, depth: usize) -> Result<f64, CliError> {
    let r = renormalizer(alpha)?;
    let s = discretize(&r.params, &BlowupPrefix::trivial(), depth, Scheme::Barycenter);
    let mut worst = 0.0_f64;
    for i in 0..50 {
        let lam = -40.0 * i as f64 / 49.0;
        let e = r.entries(lam)?.matrix();
        worst = worst.max(s.propagate_full(lam).sub(&e).max_abs());
    }
    Ok(worst)
}

fn propagator_oracle_agreement(_: &RunConfig, _: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let depths = [8, 10, 12, 14];
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in STANDARD_ALPHAS {
        let gaps = depths
            .iter()
            .map(|&d| oracle_gap(alpha, d))
            .collect::<Result<Vec<_>, _>>()?;
        ok &= gaps.windows(2).all(|w| w[1] <= w[0]) && gaps[3] <= ORACLE_AGREEMENT_TOL;
        parts.push(format!("alpha {alpha:.4}: {:.3e}", gaps[3]));
    }
    Ok(verdict(ok, format!("decreasing over depths 8..14; at 14 {}", parts.join(", "))))
}

fn propagator_hypothesis(_: &RunConfig, _: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut accepted = 0;
    let mut rejected = 0;
    for i in 1..50 {
        let p = params(i as f64 / 50.0)?;
        accepted += Renormalizer::new(p).is_ok() as usize;
        rejected += Renormalizer::new(p.with_corrupted_delta(1e-3)).is_err() as usize;
    }
    Ok(verdict(
        accepted == 49 && rejected == 49,
        format!("{accepted}/49 valid accepted, {rejected}/49 perturbed rejected"),
    ))
}

fn spectral_lyapunov_doubling(cfg: &RunConfig, _: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let orbit = cfg.orbit();
    let mut worst = 0.0_f64;
    for alpha in [1.0 / 3.0, 0.5, 2.0 / 3.0] {
        let r = renormalizer(alpha)?;
        for i in 0..100 {
            let lam = -0.05 - 29.95 * i as f64 / 99.0;
            let z = lyapunov(&r, lam, &orbit)?.zeta;
            let zg = lyapunov(&r, r.params.gamma * lam, &orbit)?.zeta;
            worst = worst.max((zg - 2.0 * z).abs());
        }
    }
    Ok(verdict(worst <= 1e-6, format!("max |zeta(gamma l) - 2 zeta(l)| = {worst:.3e}")))
}

/// Lower window edge near `-300` for the ladder/oracle comparison, placed
/// between two ladder values so no eigenvalue sits on the boundary.
pub fn ladder_window_edge(alpha: f64) -> f64 {
    if (alpha - 0.5).abs() < 1e-12 {
        -296.1
    } else {
        -327.6
    }
}

pub const LADDER_LEVELS: [usize; 5] = [0, 3, 6, 9, 12];
pub const LADDER_STRING_DEPTH: usize = 8;

/// Largest relative ladder/oracle defect and whether the counts matched,
/// at level `n` on the scaled window.
pub fn ladder_vs_oracle(cfg: &RunConfig, alpha: f64, level: usize, boundary: Boundary) -> Result<(f64, bool, usize), CliError> {
    let p = params(alpha)?;
    let scale = p.gamma.powi(-(level as i32));
    let mut c = cfg.clone();
    c.alpha = alpha;
    c.level = level;
    c.boundary = boundary;
    c.oracle_depth = LADDER_STRING_DEPTH;
    c.window = (ladder_window_edge(alpha) * scale, 0.0);
    let rec = cmd_spectrum(&c)?;
    let values = rec.values("value");
    let oracle = rec.values("oracle_value");
    let matched = values.iter().zip(&oracle).all(|(v, o)| v.as_real().is_some() && o.as_real().is_some());
    let mut worst = 0.0_f64;
    for (v, o) in values.iter().zip(&oracle) {
        if let (Some(v), Some(o)) = (v.as_real(), o.as_real()) {
            // The zero mode is compared on the scale of the first nonzero level.
            let err = if v == 0.0 { o.abs() / scale } else { (o - v).abs() / v.abs() };
            worst = worst.max(err);
        }
    }
    Ok((worst, matched, values.len()))
}

fn spectral_root_ladder_oracle(cfg: &RunConfig, _: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut worst = 0.0_f64;
    let mut mismatched = Vec::new();
    for alpha in STANDARD_ALPHAS {
        for b in [Boundary::Neumann, Boundary::Dirichlet] {
            for n in LADDER_LEVELS {
                let (err, matched, _) = ladder_vs_oracle(cfg, alpha, n, b)?;
                worst = worst.max(err);
                if !matched {
                    mismatched.push(format!("alpha {alpha:.4} {} n {n}", b.name()));
                }
            }
        }
    }
    Ok(verdict(
        worst <= LADDER_ORACLE_TOL && mismatched.is_empty(),
        format!(
            "max relative defect {worst:.3e} at levels 0..12 with 2^8 masses per copy; count mismatches: {:?}",
            mismatched
        ),
    ))
}

/// Relative offsets probing a punctured neighbourhood of a ladder point.
const GAP_OFFSETS: [f64; 4] = [-1e-6, -1e-9, 1e-9, 1e-6];

fn spectral_gap_openness(cfg: &RunConfig, _: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let ccfg = cfg.classify_config();
    let mut tested = 0;
    let mut bad = Vec::new();
    for alpha in [1.0 / 3.0, 2.0 / 3.0] {
        let r = renormalizer(alpha)?;
        let roots = root_set(&r, -3000.0, cfg)?;
        for k in 1..=3 {
            let lk = roots
                .get(k)
                .ok_or_else(|| CliError::Usage(format!("root {k} missing for alpha {alpha}")))?;
            for p in -3..=3 {
                let lam = lk * r.params.gamma.powi(p);
                for eps in GAP_OFFSETS {
                    tested += 1;
                    let x = lam * (1.0 + eps);
                    if classify(&r, x, &ccfg).verdict != Classification::Gap {
                        bad.push(format!("{x:e}"));
                    }
                }
            }
        }
    }
    Ok(verdict(
        bad.is_empty(),
        format!("{} of {tested} neighbourhood points not Gap {:?}", bad.len(), bad),
    ))
}

/// Window for the isolation check.
pub const ISOLATION_WINDOW: (f64, f64) = (-300.0, -1.0);

/// Level-`n` eigenvalues in [`ISOLATION_WINDOW`].
pub fn window_ladder(cfg: &RunConfig, alpha: f64, level: usize) -> Result<Vec<f64>, CliError> {
    let r = renormalizer(alpha)?;
    let roots = root_set(&r, -410.0 * r.params.gamma.powi(level as i32), cfg)?;
    let eig = enumerate_eigenvalues(&roots, level, ISOLATION_WINDOW, Boundary::Neumann)?;
    Ok(eig.iter().map(|e| e.value).collect())
}

/// Smallest distance from a level-0 eigenvalue to any other level-`n` eigenvalue.
pub fn isolation_radius(base: &[f64], ladder: &[f64]) -> f64 {
    base.iter()
        .map(|&x| {
            ladder
                .iter()
                .filter(|&&y| y != x)
                .map(|&y| (y - x).abs())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min)
}

fn spectral_isolation(cfg: &RunConfig, _: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [1.0 / 3.0, 2.0 / 3.0] {
        let base = window_ladder(cfg, alpha, 0)?;
        let radii = (0..=8)
            .map(|n| Ok(isolation_radius(&base, &window_ladder(cfg, alpha, n)?)))
            .collect::<Result<Vec<_>, CliError>>()?;
        let floor = radii.iter().cloned().fold(f64::INFINITY, f64::min);
        let drift = (radii[8] - radii[7]).abs() / radii[7];
        ok &= !base.is_empty() && floor >= ISOLATION_FLOOR && drift < 0.01;
        parts.push(format!(
            "alpha {alpha:.4}: {} level-0 points, nearest level-n neighbour >= {floor:.4}, level 7->8 change {drift:.2e}",
            base.len()
        ));
    }
    Ok(verdict(ok, parts.join("; ")))
}

fn halfline_norm_ladder(cfg: &RunConfig, _: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut worst = 0.0_f64;
    for alpha in STANDARD_ALPHAS {
        let r = renormalizer(alpha)?;
        let roots = root_set(&r, -400.0, cfg)?;
        for b in [Boundary::Neumann, Boundary::Dirichlet] {
            let rep = build_eigenfunction(&roots, 1, 0, b, 6, cfg.base_depth)?;
            worst = worst.max(norm_series(&rep, &r.params, 6)?.max_ratio_error);
        }
    }
    Ok(verdict(worst <= 1e-6, format!("max ratio error {worst:.3e} for n <= 6")))
}

fn verdict_pair(alpha: f64) -> Result<(NormVerdict, NormVerdict), CliError> {
    let p = params(alpha)?;
    Ok((norm_verdict(Boundary::Neumann, &p).0, norm_verdict(Boundary::Dirichlet, &p).0))
}

fn halfline_dichotomy(_: &RunConfig, _: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut bad = Vec::new();
    for alpha in ALPHA_GRID {
        let pure = params(alpha)?.delta > 1.0;
        let (neu, dir) = verdict_pair(alpha)?;
        if (neu == NormVerdict::SquareSummable) != pure || (dir == NormVerdict::SquareSummable) == pure {
            bad.push(alpha);
        }
    }
    Ok(verdict(bad.is_empty(), format!("wrong verdicts at alpha {bad:?}")))
}

fn halfline_mirror(_: &RunConfig, _: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut bad = Vec::new();
    for alpha in ALPHA_GRID {
        let (neu, dir) = verdict_pair(alpha)?;
        let (mneu, mdir) = verdict_pair(1.0 - alpha)?;
        if neu != mdir || dir != mneu {
            bad.push(alpha);
        }
    }
    Ok(verdict(bad.is_empty(), format!("mirror mismatches at alpha {bad:?}")))
}

/// Alphas and number of InSupport points for the level-20 machinery.
const SUPPORT_ALPHAS: [f64; 2] = [1.0 / 3.0, 2.0 / 3.0];
pub const SUPPORT_POINTS: usize = 10;
pub const MAX_LEVEL: usize = 20;
const FORM_DEPTH: usize = 10;

/// InSupport points between consecutive ladder values.
pub fn support_sample(cfg: &RunConfig, alpha: f64) -> Result<(Renormalizer, Vec<f64>), CliError> {
    let r = renormalizer(alpha)?;
    let roots = root_set(&r, -400.0, cfg)?;
    let pts = support_points(&r, &roots, SUPPORT_POINTS, &cfg.classify_config());
    if pts.len() < SUPPORT_POINTS {
        return Err(CliError::Usage(format!(
            "found {} InSupport points for alpha {alpha}, need {SUPPORT_POINTS}",
            pts.len()
        )));
    }
    Ok((r, pts))
}

fn halfline_condition_bound(cfg: &RunConfig, _: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut worst = 0.0_f64;
    for alpha in SUPPORT_ALPHAS {
        let (r, pts) = support_sample(cfg, alpha)?;
        for lam in pts {
            for n in 0..=MAX_LEVEL {
                let g = r.tilde_gamma(lam, n)?;
                worst = worst.max((g.transpose() * g).sym_eigenvalues().1);
            }
        }
    }
    Ok(verdict(
        worst <= CONDITION_BOUND,
        format!("max |tilde Gamma_n|^2 = {worst:.4} for n <= {MAX_LEVEL} (bound {CONDITION_BOUND:e})"),
    ))
}

/// Largest `max(t, 1/t)` of the energy ratio over the trace subsequence.
pub fn energy_constant(cfg: &RunConfig, r: &Renormalizer, lam: f64) -> Result<(f64, usize), CliError> {
    let ts = trace_subsequence(r, lam, MAX_LEVEL, &cfg.classify_config())?;
    let er = energy_ratios(r, lam, MAX_LEVEL, FORM_DEPTH)?;
    let mut worst = 1.0_f64;
    let mut used = 0;
    for &n in &ts.indices {
        if let Some(&(lo, hi)) = er.ranges.get(n) {
            worst = worst.max(hi).max(1.0 / lo);
            used += 1;
        }
    }
    Ok((worst, used))
}

fn halfline_energy_ratio(cfg: &RunConfig, _: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut worst = 1.0_f64;
    let mut empty = 0;
    for alpha in SUPPORT_ALPHAS {
        let (r, pts) = support_sample(cfg, alpha)?;
        for lam in pts {
            let (c, used) = energy_constant(cfg, &r, lam)?;
            worst = worst.max(c);
            empty += (used == 0) as usize;
        }
    }
    Ok(verdict(
        worst <= ENERGY_BOUND && empty == 0,
        format!("energy ratios within [1/{worst:.4}, {worst:.4}]; {empty} points without subsequence"),
    ))
}

fn halfline_pi_bound(cfg: &RunConfig, _: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut worst = 0.0_f64;
    let mut unstable = 0;
    for alpha in SUPPORT_ALPHAS {
        let (r, pts) = support_sample(cfg, alpha)?;
        for lam in pts {
            let ts = trace_subsequence(&r, lam, MAX_LEVEL, &cfg.classify_config())?;
            let at10 = ts.pi_running_max[9];
            let at20 = ts.pi_running_max[MAX_LEVEL - 1];
            worst = worst.max(at20);
            unstable += (at20 > 2.0 * at10) as usize;
        }
    }
    Ok(verdict(
        worst <= PI_BOUND && unstable == 0,
        format!("max running |Pi_n| = {worst:.4} for n <= {MAX_LEVEL}; {unstable} points grew past twice the level-10 value"),
    ))
}

/// Random positive definite form and random `SL(2)` matrix with `|tr| < 2`.
fn lemma45_sample(rng: &mut ChaCha8Rng) -> (Mat2<f64>, Mat2<f64>) {
    let (e1, e2, th) = (rng.gen_range(0.01..10.0), rng.gen_range(0.01..10.0), rng.gen_range(0.0..std::f64::consts::PI));
    let (c, s) = (th.cos(), th.sin());
    let rot = Mat2::new(c, -s, s, c);
    let form = rot * Mat2::new(e1, 0.0, 0.0, e2) * rot.transpose();
    loop {
        let a: f64 = rng.gen_range(-1.9..1.9);
        let d: f64 = rng.gen_range(-1.5..1.5);
        let cc: f64 = rng.gen_range(-3.0..3.0);
        if cc.abs() < 1e-2 || (a + d).abs() >= 1.99 {
            continue;
        }
        return (form, Mat2::new(a, (a * d - 1.0) / cc, cc, d));
    }
}

fn halfline_lemma45(_: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut failures = 0;
    let mut slack = f64::INFINITY;
    for _ in 0..LEMMA45_TRIALS {
        let (k, g) = lemma45_sample(rng);
        let rep = lemma45_check(&k, &g)?;
        failures += (!rep.holds) as usize;
        slack = slack.min(rep.slack);
    }
    Ok(verdict(
        failures == 0,
        format!("{failures} failures in {LEMMA45_TRIALS} trials; smallest slack {slack:.3e}"),
    ))
}

fn halfline_k_recursion(cfg: &RunConfig, _: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let xs = [[1.0, 0.0], [0.0, 1.0], [0.6, -0.8], [2.0, 3.0]];
    let r = renormalizer(2.0 / 3.0)?;
    let roots = root_set(&r, -400.0, cfg)?;
    let mut worst = 0.0_f64;
    for lam in support_points(&r, &roots, 3, &cfg.classify_config()) {
        for n in 0..=8 {
            let (plain, tilde) = recursion_residuals(&r.params, n, lam, 8, &xs);
            worst = worst.max(plain).max(tilde);
        }
    }
    Ok(verdict(worst <= 1e-6, format!("max recursion residual {worst:.3e} for n <= 8")))
}

fn halfline_parseval(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let r = renormalizer(0.5)?;
    let roots = root_set(&r, -400.0, cfg)?;
    let n = 2;
    let s = discretize(&r.params, &BlowupPrefix::ones(n), 10, Scheme::Barycenter);
    let mut reps = Vec::new();
    for k in 1..=2 {
        for p in -2..=0 {
            reps.push(build_eigenfunction(&roots, k, p, Boundary::Neumann, n, 10 - n)?);
        }
    }
    let (mut residual, mut align) = (0.0_f64, 1.0_f64);
    for _ in 0..3 {
        let g: Vec<f64> = s
            .positions
            .iter()
            .map(|&x| if x <= 1.0 { rng.gen_range(-1.0..1.0) } else { 0.0 })
            .collect();
        let rep = parseval_check(&r.params, &s, Boundary::Neumann, &g, &reps)?;
        residual = residual.max(rep.relative_residual);
        align = rep.alignments.iter().fold(align, |m, a| m.min(a.2));
    }
    Ok(verdict(
        residual <= 1e-8 && align >= 0.999,
        format!("relative residual {residual:.3e}; smallest alignment {align:.6}"),
    ))
}

fn halfline_form_positive(cfg: &RunConfig, _: &mut ChaCha8Rng) -> Result<Verdict, CliError> {
    let mut bad = 0;
    let mut total = 0;
    for alpha in SUPPORT_ALPHAS {
        let r = renormalizer(alpha)?;
        let roots = root_set(&r, -400.0, cfg)?;
        let mut lambdas = support_points(&r, &roots, 3, &cfg.classify_config());
        lambdas.push(0.0);
        for lam in lambdas {
            for n in 0..=8 {
                total += 1;
                bad += (!quadratic_form(&r.params, n, lam, 8).is_positive()) as usize;
            }
        }
    }
    Ok(verdict(
        bad == 0,
        format!("{bad} of {total} forms not positive definite at InSupport points and 0"),
    ))
}
