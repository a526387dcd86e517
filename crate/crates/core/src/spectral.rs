//! Root set `S`, eigenvalue ladders, density of states, Lyapunov exponent
//! and spectrum/gap classification.

use crate::error::{Error, Result};
use crate::model::{BlowupPrefix, ModelParams, Symbol};
use crate::propagator::Renormalizer;
use crate::renorm_map::{projective_distance, run_orbit, OrbitConfig, OrbitState, OrbitSummary};
use crate::scalar::Mat2;
use crate::string_oracle::{build_operator, discretize, eigen_count, Boundary, Scheme};

/// Leaves are small enough that each carries at most one solution zero.
const LEAF_RADIUS: f64 = 0.5;
/// Every Dirichlet eigenvalue of the unit string lies below `-4`.
const ROOT_FREE_BOUND: f64 = 4.0;
const MAX_LEAF_DEPTH: usize = 26;

/// Number of Dirichlet eigenvalues of the unit string in `(lambda, 0)`,
/// i.e. zeros of `b` there.
///
/// Sturm oscillation count of the solution with `f(0) = 0, f'(0) = 1`,
/// sampled at the endpoints of the level-`k` cells where `gamma^{-k} |lambda| <= 1/2`.
pub fn dirichlet_count(r: &Renormalizer, lambda: f64) -> Result<usize> {
    if lambda >= 0.0 {
        return Ok(0);
    }
    if !lambda.is_finite() {
        return Err(Error::Precondition(format!("non-finite spectral parameter {lambda}")));
    }
    let p = &r.params;
    let mut k = 0;
    let mut mu = lambda;
    while mu.abs() > LEAF_RADIUS {
        mu /= p.gamma;
        k += 1;
    }
    if k > MAX_LEAF_DEPTH {
        return Err(Error::Precondition(format!(
            "|lambda| = {} needs 2^{k} leaves",
            lambda.abs()
        )));
    }
    let e = r.entries(mu)?;
    let r1 = p.ratio(Symbol::One);
    let r2 = p.ratio(Symbol::Two);
    let leaves: Vec<Mat2<f64>> = (0..=k)
        .map(|twos| {
            let w = r1.powi((k - twos) as i32) * r2.powi(twos as i32);
            Mat2::new(e.a, w * e.b, e.c / w, e.d)
        })
        .collect();

    let mut v = [0.0, 1.0];
    let mut sign = 1.0;
    let mut count = 0;
    for i in 0u64..(1u64 << k) {
        v = leaves[i.count_ones() as usize].apply(v);
        if v[0] != 0.0 && v[0].signum() != sign {
            sign = v[0].signum();
            count += 1;
        }
        let size = v[0].abs().max(v[1].abs());
        if size > 1e100 {
            v = [v[0] / size, v[1] / size];
        }
    }
    Ok(count)
}

/// `#(S ∩ (lambda, 0))`.
pub fn root_count(r: &Renormalizer, lambda: f64) -> Result<usize> {
    let all = dirichlet_count(r, lambda)?;
    let shifted = dirichlet_count(r, lambda / r.params.gamma)?;
    Ok(all.saturating_sub(shifted))
}

/// `t(gamma^{-1} lambda)`, sign-preserving past overflow.
pub fn root_function(r: &Renormalizer, lambda: f64) -> f64 {
    r.phi(lambda / r.params.gamma)
        .state
        .trace_surrogate(&r.params)
}

/// Grid and tolerance settings for [`find_s`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSearch {
    /// Geometric grid points per factor `gamma`.
    pub steps_per_gamma: usize,
    /// Same-sign neighbours below this magnitude are reported.
    pub grid_floor: f64,
    /// Relative bracket width at which bisection stops.
    pub rel_tol: f64,
    /// Bound on `|t(gamma^{-1} r)|` for accepted roots.
    pub defect_tol: f64,
}

impl Default for RootSearch {
    fn default() -> Self {
        RootSearch {
            steps_per_gamma: 64,
            grid_floor: 1e-6,
            rel_tol: 4.0 * f64::EPSILON,
            defect_tol: 1e-8,
        }
    }
}

/// One element of `S` with its bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub value: f64,
    pub bracket: (f64, f64),
    /// `|t(gamma^{-1} value)|`.
    pub defect: f64,
}

/// Elements of `S` in a window, sorted decreasing (`lambda_1 > lambda_2 > ...`).
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub params: ModelParams,
    pub roots: Vec<Root>,
    /// Searched window `[lo, hi]`.
    pub window: (f64, f64),
    pub tol: f64,
    pub warnings: Vec<String>,
}

impl RootSet {
    pub fn values(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.value).collect()
    }

    /// `lambda_k`, 1-based.
    pub fn get(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.roots.get(i)).map(|r| r.value)
    }
}

struct Searcher<'a> {
    r: &'a Renormalizer,
    opts: RootSearch,
    roots: Vec<Root>,
    warnings: Vec<String>,
}

impl Searcher<'_> {
    fn g(&self, x: f64) -> f64 {
        root_function(self.r, x)
    }

    /// Isolate the `n` roots in `(a, b)`, `a < b < 0`, given `g` at both ends.
    fn isolate(&mut self, a: f64, b: f64, ga: f64, gb: f64, n: usize, depth: usize) -> Result<()> {
        let changes = ga.signum() != gb.signum();
        match n {
            0 => {
                if changes {
                    self.warnings
                        .push(format!("sign change without a counted root in ({a:e}, {b:e})"));
                }
                Ok(())
            }
            1 if changes => {
                let root = self.bisect(a, b, ga);
                self.roots.push(root);
                Ok(())
            }
            _ => {
                if b - a <= self.opts.rel_tol * a.abs() || depth > 200 {
                    self.warnings
                        .push(format!("{n} roots unresolved in ({a:e}, {b:e})"));
                    return Ok(());
                }
                let mid = if n == 2 && !changes {
                    self.golden_split(a, b, ga)
                } else {
                    0.5 * (a + b)
                };
                let gm = self.g(mid);
                let right = root_count(self.r, mid)? - root_count(self.r, b)?;
                let left = n.saturating_sub(right);
                // Higher roots come first in the final list.
                self.isolate(mid, b, gm, gb, right, depth + 1)?;
                self.isolate(a, mid, ga, gm, left, depth + 1)
            }
        }
    }

    /// Point where `g` is most opposite to its sign at `a`.
    fn golden_split(&self, a: f64, b: f64, ga: f64) -> f64 {
        let s = ga.signum();
        let h = |x: f64| s * self.g(x);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut lo, mut hi) = (a, b);
        let mut x1 = hi - phi * (hi - lo);
        let mut x2 = lo + phi * (hi - lo);
        let (mut h1, mut h2) = (h(x1), h(x2));
        for _ in 0..80 {
            if h1 < 0.0 {
                return x1;
            }
            if h2 < 0.0 {
                return x2;
            }
            if h1 < h2 {
                hi = x2;
                x2 = x1;
                h2 = h1;
                x1 = hi - phi * (hi - lo);
                h1 = h(x1);
            } else {
                lo = x1;
                x1 = x2;
                h1 = h2;
                x2 = lo + phi * (hi - lo);
                h2 = h(x2);
            }
            if hi - lo <= self.opts.rel_tol * lo.abs() {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    fn bisect(&self, mut a: f64, mut b: f64, ga: f64) -> Root {
        let sa = ga.signum();
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b || b - a <= self.opts.rel_tol * a.abs() {
                break;
            }
            if self.g(m).signum() == sa {
                a = m;
            } else {
                b = m;
            }
        }
        let value = 0.5 * (a + b);
        let p = self.r.phi(value / self.r.params.gamma);
        let defect = (p.a + p.d / self.r.params.delta).abs();
        Root {
            value,
            bracket: (a, b),
            defect,
        }
    }
}

/// Elements of `S` in `[window.0, window.1)`.
///
/// Geometric sign scan with `steps_per_gamma` points per factor `gamma`; the
/// number of roots in each grid cell is certified by [`root_count`] and
/// cells holding more roots than sign changes are split (golden-section
/// search around near-tangencies, bisection otherwise).
pub fn find_s(r: &Renormalizer, window: (f64, f64), opts: &RootSearch) -> Result<RootSet> {
    let (lo, hi) = window;
    if !(lo < hi) || hi > 0.0 || !lo.is_finite() {
        return Err(Error::InvalidWindow { lo, hi });
    }
    let mut s = Searcher {
        r,
        opts: *opts,
        roots: Vec::new(),
        warnings: Vec::new(),
    };
    let start = hi.abs().max(0.5 * ROOT_FREE_BOUND);
    if start < lo.abs() {
        let ratio = r.params.gamma.powf(1.0 / opts.steps_per_gamma as f64);
        let mut grid = vec![-start];
        let mut m = start;
        while m * ratio < lo.abs() {
            m *= ratio;
            grid.push(-m);
        }
        grid.push(lo);

        let vals: Vec<f64> = grid.iter().map(|&x| s.g(x)).collect();
        let counts = grid
            .iter()
            .map(|&x| root_count(r, x))
            .collect::<Result<Vec<_>>>()?;
        for j in 0..grid.len() - 1 {
            let (b, a) = (grid[j], grid[j + 1]);
            let (gb, ga) = (vals[j], vals[j + 1]);
            let n = counts[j + 1].saturating_sub(counts[j]);
            if ga.signum() == gb.signum() && ga.abs().min(gb.abs()) < opts.grid_floor {
                s.warnings.push(format!(
                    "possible missed root near ({a:e}, {b:e}); count reports {n}"
                ));
            }
            s.isolate(a, b, ga, gb, n, 0)?;
        }
        let total = counts[counts.len() - 1] - counts[0];
        if s.roots.len() != total {
            s.warnings.push(format!(
                "found {} roots, count reports {total}",
                s.roots.len()
            ));
        }
    }
    let mut roots: Vec<Root> = s
        .roots
        .into_iter()
        .filter(|x| x.value >= lo && x.value < hi)
        .collect();
    roots.sort_by(|x, y| y.value.total_cmp(&x.value));
    for x in &roots {
        if x.defect > opts.defect_tol {
            s.warnings
                .push(format!("root {:e} has defect {:e}", x.value, x.defect));
        }
    }
    Ok(RootSet {
        params: r.params,
        roots,
        window,
        tol: opts.defect_tol,
        warnings: s.warnings,
    })
}

/// `lambda_{k,p} = gamma^p lambda_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenLabel {
    pub k: usize,
    pub p: i32,
    pub value: f64,
}

/// Eigenvalue of `H_<n>`; the Neumann zero mode carries no label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderEigenvalue {
    pub value: f64,
    pub label: Option<EigenLabel>,
}

/// `{gamma^p lambda_k : p >= -n}` in `[window.0, window.1)`, decreasing.
/// For Neumann the zero eigenvalue is included when `window.0 <= 0 <= window.1`.
pub fn enumerate_eigenvalues(
    roots: &RootSet,
    level: usize,
    window: (f64, f64),
    boundary: Boundary,
) -> Result<Vec<LadderEigenvalue>> {
    let (a, b) = window;
    if !(a <= b) || a.is_nan() {
        return Err(Error::InvalidWindow { lo: a, hi: b });
    }
    let gamma = roots.params.gamma;
    let mut out = Vec::new();
    if boundary == Boundary::Neumann && a <= 0.0 && 0.0 <= b {
        out.push(LadderEigenvalue {
            value: 0.0,
            label: None,
        });
    }
    if a < 0.0 {
        let required = gamma.powi(level as i32) * a;
        if roots.window.0 > required * (1.0 - 1e-12) || roots.window.1 < -ROOT_FREE_BOUND {
            return Err(Error::InsufficientRootWindow {
                covered: roots.window.0,
                required,
            });
        }
        for (i, root) in roots.roots.iter().enumerate() {
            let mut p = -(level as i32);
            let mut v = root.value * gamma.powi(p);
            if v < a {
                break;
            }
            while v >= a {
                if v < b {
                    out.push(LadderEigenvalue {
                        value: v,
                        label: Some(EigenLabel { k: i + 1, p, value: v }),
                    });
                }
                p += 1;
                v = root.value * gamma.powi(p);
            }
        }
    }
    out.sort_by(|x, y| y.value.total_cmp(&x.value));
    Ok(out)
}

/// How [`ids`] counts eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdsMethod {
    /// Sturm inertia of the discretized operator.
    OracleInertia,
    /// Exact count of ladder labels, through the leaf oscillation count.
    LabelCount,
}

/// Eigenvalue counts of `H_<n>` in `[lambda, 0)`, normalized by `2^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdsEstimate {
    pub level: usize,
    pub window: (f64, f64),
    pub method: IdsMethod,
    pub neumann: usize,
    pub dirichlet: usize,
    pub normalized_neumann: f64,
    pub normalized_dirichlet: f64,
}

/// Discretization depth below the blow-up level used by the inertia method.
pub fn ids_depth(params: &ModelParams, radius: f64) -> usize {
    (16.0 * radius.max(1.0)).log(params.gamma).ceil() as usize
}

/// Integrated density of states at level `level` for each `lambda <= 0`.
pub fn ids(
    r: &Renormalizer,
    prefix: &BlowupPrefix,
    level: usize,
    lambdas: &[f64],
    method: IdsMethod,
) -> Result<Vec<IdsEstimate>> {
    if let Some(&bad) = lambdas.iter().find(|l| !(**l <= 0.0)) {
        return Err(Error::Precondition(format!("IDS needs lambda <= 0, got {bad}")));
    }
    let norm = 2f64.powi(level as i32);
    // Above every nonzero eigenvalue of H_<n> and below the Neumann zero mode.
    let top = -r.params.gamma.powi(-(level as i32));
    let make = |lam: f64, nn: usize, nd: usize| IdsEstimate {
        level,
        window: (lam, 0.0),
        method,
        neumann: nn,
        dirichlet: nd,
        normalized_neumann: nn as f64 / norm,
        normalized_dirichlet: nd as f64 / norm,
    };
    match method {
        IdsMethod::LabelCount => {
            let scale = r.params.gamma.powi(level as i32);
            lambdas
                .iter()
                .map(|&lam| {
                    let c = dirichlet_count(r, lam * scale)?;
                    Ok(make(lam, c, c))
                })
                .collect()
        }
        IdsMethod::OracleInertia => {
            let radius = lambdas.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
            let pre = prefix.extended(level)?;
            let depth = level + ids_depth(&r.params, radius);
            let string = discretize(&r.params, &pre, depth, Scheme::Barycenter);
            let neu = build_operator(&string, Boundary::Neumann)?;
            let dir = build_operator(&string, Boundary::Dirichlet)?;
            let (tn, td) = (eigen_count(&neu, top), eigen_count(&dir, top));
            Ok(lambdas
                .iter()
                .map(|&lam| {
                    let nn = tn.saturating_sub(eigen_count(&neu, lam));
                    let nd = td.saturating_sub(eigen_count(&dir, lam));
                    make(lam, nn, nd)
                })
                .collect())
        }
    }
}

/// `zeta(lambda) = G(phi(lambda))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSample {
    pub lambda: f64,
    pub zeta: f64,
    pub orbit: OrbitSummary<f64>,
}

pub fn lyapunov(r: &Renormalizer, lambda: f64, cfg: &OrbitConfig) -> Result<LyapunovSample> {
    let ph = r.phi(lambda);
    let orbit = run_orbit(ph.state, &r.params, cfg);
    if orbit.hit_indeterminacy {
        return Err(Error::Indeterminacy);
    }
    Ok(LyapunovSample {
        lambda,
        zeta: orbit.green_estimate,
        orbit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    InSupport,
    Gap,
    Undecided,
}

impl Classification {
    pub fn name(self) -> &'static str {
        match self {
            Classification::InSupport => "InSupport",
            Classification::Gap => "Gap",
            Classification::Undecided => "Undecided",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyConfig {
    pub orbit: OrbitConfig,
    /// Projective separation at which the companion orbit counts as diverged.
    pub divergence: f64,
    /// Relative offset of the companion orbit, in units of machine epsilon.
    pub offset_ulps: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            orbit: OrbitConfig::default(),
            divergence: 1e-3,
            offset_ulps: 8.0,
        }
    }
}

/// Verdict with its evidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyReport {
    pub lambda: f64,
    pub verdict: Classification,
    pub escape_step: Option<usize>,
    /// First step where the orbits of `lambda` and `lambda (1 + 8 eps)` separate.
    pub horizon: Option<usize>,
    /// Largest `log |f^n(phi(lambda))|` before the horizon.
    pub max_log_norm: f64,
}

struct PairRun {
    escape: Option<usize>,
    horizon: Option<usize>,
    max_log_norm: f64,
}

fn pair_run(r: &Renormalizer, lambda: f64, cfg: &ClassifyConfig, max_iter: usize) -> PairRun {
    let log_radius = cfg.orbit.escape_radius.ln();
    let mut x: OrbitState<f64> = r.phi(lambda).state;
    let mut y: OrbitState<f64> = r.phi(lambda * (1.0 + cfg.offset_ulps * f64::EPSILON)).state;
    let mut out = PairRun {
        escape: None,
        horizon: None,
        max_log_norm: f64::NEG_INFINITY,
    };
    for n in 0..=max_iter {
        let ln = x.log_norm();
        if out.horizon.is_none() && projective_distance(&x.projective(), &y.projective()) > cfg.divergence {
            out.horizon = Some(n);
        }
        if out.horizon.is_none() {
            out.max_log_norm = out.max_log_norm.max(ln);
        }
        if ln > log_radius || !x.is_valid() {
            out.escape = Some(n);
            break;
        }
        x = x.step(&r.params);
        y = y.step(&r.params);
    }
    out
}

/// Gap if the orbit of `phi(lambda)` escapes while still resolved by double
/// precision, InSupport if it stays bounded through `max_iter` (or up to the
/// precision horizon), Undecided inside the guard band `escape_radius / 10`.
pub fn classify(r: &Renormalizer, lambda: f64, cfg: &ClassifyConfig) -> ClassifyReport {
    let report = |verdict, run: &PairRun| ClassifyReport {
        lambda,
        verdict,
        escape_step: run.escape,
        horizon: run.horizon,
        max_log_norm: run.max_log_norm,
    };
    if r.params.is_lebesgue() && lambda <= 0.0 {
        let run = PairRun {
            escape: None,
            horizon: None,
            max_log_norm: 0.0,
        };
        return report(Classification::InSupport, &run);
    }
    let guard = (cfg.orbit.escape_radius / 10.0).ln();
    let mut max_iter = cfg.orbit.max_iter;
    for attempt in 0..2 {
        let run = pair_run(r, lambda, cfg, max_iter);
        let resolved = |e: usize| run.horizon.map_or(true, |h| e <= h);
        match run.escape {
            Some(e) if resolved(e) => return report(Classification::Gap, &run),
            _ if run.max_log_norm <= guard => return report(Classification::InSupport, &run),
            Some(_) => return report(Classification::Undecided, &run),
            None if attempt == 1 => return report(Classification::Undecided, &run),
            None => max_iter *= 4,
        }
    }
    unreachable!()
}

/// A point of `(lo, hi)` classified InSupport, found by zooming in on the
/// grid point whose orbit escapes last. Escape times grow without bound near
/// `supp mu`, which has no interior when `delta != 1`.
pub fn support_point_between(
    r: &Renormalizer,
    lo: f64,
    hi: f64,
    cfg: &ClassifyConfig,
) -> Option<f64> {
    const POINTS: usize = 33;
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    for _ in 0..120 {
        let mut best = (0usize, 0usize);
        for i in 0..POINTS {
            let x = a + (b - a) * i as f64 / (POINTS - 1) as f64;
            let c = classify(r, x, cfg);
            match (c.verdict, c.escape_step) {
                (Classification::InSupport, _) => return Some(x),
                (Classification::Gap, Some(e)) if e > best.1 => best = (i, e),
                _ => {}
            }
        }
        let i = best.0;
        let na = a + (b - a) * i.saturating_sub(1) as f64 / (POINTS - 1) as f64;
        let nb = a + (b - a) * (i + 1).min(POINTS - 1) as f64 / (POINTS - 1) as f64;
        if nb - na <= 8.0 * f64::EPSILON * na.abs().max(nb.abs()) {
            break;
        }
        a = na;
        b = nb;
    }
    None
}

/// Up to `count` InSupport points, one between each pair of consecutive
/// ladder points `gamma^p lambda_k` (`p <= 0`) in the root window.
pub fn support_points(r: &Renormalizer, roots: &RootSet, count: usize, cfg: &ClassifyConfig) -> Vec<f64> {
    let mut ladder: Vec<f64> = Vec::new();
    for p in 0..6 {
        for root in &roots.roots {
            ladder.push(root.value * r.params.gamma.powi(-p));
        }
    }
    ladder.sort_by(|x, y| y.total_cmp(x));
    ladder.dedup();
    let mut out = Vec::new();
    for w in ladder.windows(2) {
        if out.len() >= count {
            break;
        }
        if let Some(x) = support_point_between(r, w[1], w[0], cfg) {
            out.push(x);
        }
    }
    out
}
