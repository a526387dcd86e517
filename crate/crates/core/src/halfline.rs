//! Operator on the half-line `R_+` (blow-up `1, 1, 1, ...`).
//!
//! Eigenfunctions are glued level by level: on `I_<n+1> \ I_<n>` the
//! function is `b_n f_<n> ∘ T_n` with `T_n(x) = delta (x - alpha^{-n})`,
//! which maps that piece onto `I_<n>` and carries `delta` times its mass.

use crate::error::{Error, Result};
use crate::model::{BlowupPrefix, ModelParams};
use crate::propagator::Renormalizer;
use crate::renorm_map::softplus;
use crate::scalar::Mat2;
use crate::spectral::{classify, ClassifyConfig, Classification, RootSet};
use crate::string_oracle::{
    build_operator, discretize, eigen_solve, solution_values, Boundary, DiscreteString, Eigenpair, Scheme,
    SolveOptions,
};

/// `sign * exp(log_abs)`, for values with doubly exponential range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub sign: f64,
    pub log_abs: f64,
}

impl SignedLog {
    pub fn new(x: f64) -> Self {
        SignedLog {
            sign: x.signum(),
            log_abs: x.abs().ln(),
        }
    }

    pub fn value(&self) -> f64 {
        self.sign * self.log_abs.exp()
    }

    pub fn mul(&self, other: &SignedLog) -> SignedLog {
        SignedLog {
            sign: self.sign * other.sign,
            log_abs: self.log_abs + other.log_abs,
        }
    }
}

/// Gluing coefficient `b_n` at the junction `alpha^{-n}`.
///
/// Neumann: `b_0 = -1/delta`, `b_n = delta^{-2^n}`.
/// Dirichlet: `b_0 = -1`, `b_n = delta^{2^n - 1}` (the copy's derivative
/// carries the slope `delta` of `T_n`).
pub fn extension_coeff(boundary: Boundary, n: usize, params: &ModelParams) -> SignedLog {
    let ld = params.delta.ln();
    let two_n = 2f64.powi(n as i32);
    match (boundary, n) {
        (Boundary::Neumann, 0) => SignedLog {
            sign: -1.0,
            log_abs: -ld,
        },
        (Boundary::Dirichlet, 0) => SignedLog {
            sign: -1.0,
            log_abs: 0.0,
        },
        (Boundary::Neumann, _) => SignedLog {
            sign: 1.0,
            log_abs: -two_n * ld,
        },
        (Boundary::Dirichlet, _) => SignedLog {
            sign: 1.0,
            log_abs: (two_n - 1.0) * ld,
        },
    }
}

/// `log(1 + delta b_n^2)`.
pub fn log_norm_ratio(boundary: Boundary, n: usize, params: &ModelParams) -> f64 {
    let b = extension_coeff(boundary, n, params);
    softplus(params.delta.ln() + 2.0 * b.log_abs)
}

fn initial_data(boundary: Boundary) -> [f64; 2] {
    match boundary {
        Boundary::Neumann => [1.0, 0.0],
        Boundary::Dirichlet => [0.0, 1.0],
    }
}

/// Glued eigenfunction `f_{k,p}` restricted to `I_<target_level>`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenfunctionRep {
    pub k: usize,
    pub p: i32,
    pub boundary: Boundary,
    /// `lambda_k` from the root set.
    pub lambda: f64,
    /// Root of the same equation for the base string; gluing is exact there.
    pub base_lambda: f64,
    pub base: DiscreteString,
    pub base_values: Vec<f64>,
    /// `(f, f')(1)` of the base piece.
    pub base_end: [f64; 2],
    /// `b_0, ..., b_{L-1}` with `L = target_level + p`.
    pub coeffs: Vec<SignedLog>,
    pub target_level: usize,
    /// Largest relative mismatch of `(f, f')` across the junctions.
    pub junction_defect: f64,
}

/// Discrete `t = a + d / delta` of the unit string at depth `depth`.
fn string_trace(params: &ModelParams, string: &DiscreteString, lambda: f64) -> f64 {
    let g = string.propagate_full(lambda);
    g.m[0][0] + g.m[1][1] / params.delta
}

/// `lambda` near `guess` with `t(gamma^{-1} lambda) = 0` for the depth `depth - 1` string.
pub fn string_consistent_root(params: &ModelParams, guess: f64, depth: usize) -> Result<f64> {
    if depth == 0 {
        return Err(Error::Precondition("base depth must be at least 1".into()));
    }
    let half = discretize(params, &BlowupPrefix::trivial(), depth - 1, Scheme::Barycenter);
    let h = |x: f64| string_trace(params, &half, x / params.gamma);
    let mut w = 1e-3;
    let (mut a, mut b);
    loop {
        a = guess * (1.0 + w);
        b = guess * (1.0 - w);
        if h(a).signum() != h(b).signum() {
            break;
        }
        w *= 2.0;
        if w > 0.3 {
            return Err(Error::RootNotConverged {
                defect: h(guess).abs(),
                tol: 0.0,
            });
        }
    }
    let sa = h(a).signum();
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if h(m).signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Tolerance on the base end data and on junction defects.
pub const JUNCTION_TOL: f64 = 1e-8;

/// Build `f_{k,p}^±` on `I_<target_level>` from a base piece computed on the
/// depth-`base_depth` string.
pub fn build_eigenfunction(
    roots: &RootSet,
    k: usize,
    p: i32,
    boundary: Boundary,
    target_level: usize,
    base_depth: usize,
) -> Result<EigenfunctionRep> {
    let params = roots.params;
    let lambda = roots
        .get(k)
        .ok_or_else(|| Error::Precondition(format!("root set holds no lambda_{k}")))?;
    let glue = target_level as i32 + p;
    if glue < 0 {
        return Err(Error::Precondition(format!(
            "p = {p} is below -n = -{target_level}"
        )));
    }
    let base_lambda = string_consistent_root(&params, lambda, base_depth)?;
    let base = discretize(&params, &BlowupPrefix::trivial(), base_depth, Scheme::Barycenter);
    let init = initial_data(boundary);
    let (base_values, base_end) = solution_values(&base, base_lambda, init);

    let expected = match boundary {
        Boundary::Neumann => [-1.0 / params.delta, 0.0],
        Boundary::Dirichlet => [0.0, -params.delta],
    };
    let scale = expected[0].abs().max(expected[1].abs());
    let end_defect = (base_end[0] - expected[0]).abs().max((base_end[1] - expected[1]).abs()) / scale;
    if end_defect > JUNCTION_TOL {
        return Err(Error::RootNotConverged {
            defect: end_defect,
            tol: JUNCTION_TOL,
        });
    }

    let coeffs: Vec<SignedLog> = (0..glue as usize)
        .map(|n| extension_coeff(boundary, n, &params))
        .collect();

    // End data of f_<n> is (prod_{j<n} b_j) diag(1, delta^n) base_end; the
    // copy starting at alpha^{-n} has data b_n diag(1, delta) init.
    let mut junction_defect = end_defect;
    let mut prod = SignedLog {
        sign: 1.0,
        log_abs: 0.0,
    };
    for n in 0..coeffs.len() {
        if n > 0 {
            prod = prod.mul(&coeffs[n - 1]);
        }
        let ratio = SignedLog {
            sign: prod.sign * coeffs[n].sign,
            log_abs: prod.log_abs - coeffs[n].log_abs,
        }
        .value();
        let dn = params.delta.powi(n as i32);
        let left = [ratio * base_end[0], ratio * dn * base_end[1]];
        let right = [init[0], params.delta * init[1]];
        let s = right[0].abs().max(right[1].abs());
        let d = (left[0] - right[0]).abs().max((left[1] - right[1]).abs()) / s;
        junction_defect = junction_defect.max(d);
    }

    Ok(EigenfunctionRep {
        k,
        p,
        boundary,
        lambda,
        base_lambda,
        base,
        base_values,
        base_end,
        coeffs,
        target_level,
        junction_defect,
    })
}

impl EigenfunctionRep {
    /// Eigenvalue `gamma^p lambda_k` of the exact problem.
    pub fn eigenvalue(&self, gamma: f64) -> f64 {
        self.lambda * gamma.powi(self.p)
    }

    /// Eigenvalue of the glued discrete function.
    pub fn discrete_eigenvalue(&self, gamma: f64) -> f64 {
        self.base_lambda * gamma.powi(self.p)
    }

    fn base_eval(&self, x: f64) -> f64 {
        let pos = &self.base.positions;
        let v = &self.base_values;
        let init = initial_data(self.boundary);
        let i = pos.partition_point(|&q| q <= x);
        if i == 0 {
            init[0] + (x - self.base.left) * init[1]
        } else if i == pos.len() {
            v[i - 1] + (x - pos[i - 1]) * self.base_end[1]
        } else {
            let slope = (v[i] - v[i - 1]) / (pos[i] - pos[i - 1]);
            v[i - 1] + (x - pos[i - 1]) * slope
        }
    }

    /// `f_k(y)` for `y` in `I_<L>` as `(value, log scale)`: the result is `value * e^{scale}`.
    pub fn eval_base_coords(&self, y: f64, params: &ModelParams) -> (f64, f64) {
        let mut y = y;
        let mut sign = 1.0;
        let mut log = 0.0;
        for n in (0..self.coeffs.len()).rev() {
            let edge = params.alpha.powi(-(n as i32));
            if y > edge {
                y = params.delta * (y - edge);
                sign *= self.coeffs[n].sign;
                log += self.coeffs[n].log_abs;
            }
        }
        (sign * self.base_eval(y), log)
    }

    /// `f_{k,p}(x) = f_k(alpha^{-p} x)` as `(value, log scale)`.
    pub fn eval(&self, x: f64, params: &ModelParams) -> (f64, f64) {
        self.eval_base_coords(x * params.alpha.powi(-self.p), params)
    }

    /// Plain value, possibly overflowing for deep levels.
    pub fn value(&self, x: f64, params: &ModelParams) -> f64 {
        let (v, l) = self.eval(x, params);
        v * l.exp()
    }
}

/// Quadrature string for `f_{k,p}` on `I_<n>`: its cells inside a copy of `I`
/// (in the coordinates of `f_k`) sit at the base depth.
pub fn quadrature_string(params: &ModelParams, rep: &EigenfunctionRep, n: usize) -> Result<DiscreteString> {
    let shift = n as i32 + rep.p;
    if shift < 0 {
        return Err(Error::Precondition(format!("level {n} is below -p")));
    }
    let depth = shift as usize + rep.base.level;
    Ok(discretize(params, &BlowupPrefix::ones(n), depth, Scheme::Barycenter))
}

/// `log sum m_i f(x_i)^2` over a string, computed without overflow.
pub fn log_norm_sq(rep: &EigenfunctionRep, params: &ModelParams, string: &DiscreteString) -> f64 {
    let terms: Vec<f64> = string
        .positions
        .iter()
        .zip(&string.masses)
        .filter_map(|(&x, &m)| {
            let (v, l) = rep.eval(x, params);
            (v != 0.0).then(|| m.ln() + 2.0 * (v.abs().ln() + l))
        })
        .collect();
    let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return top;
    }
    top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormVerdict {
    SquareSummable,
    Divergent,
}

impl NormVerdict {
    pub fn name(self) -> &'static str {
        match self {
            NormVerdict::SquareSummable => "SquareSummable",
            NormVerdict::Divergent => "Divergent",
        }
    }
}

/// Squared norms of `f_{k,p,<n>}` and their ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct NormSeries {
    /// Levels `n` at which norms were computed.
    pub levels: Vec<usize>,
    /// `log ||f_{k,p,<n>}||^2` by quadrature.
    pub log_norms: Vec<f64>,
    /// Quadrature ratios `||f_<n+1>||^2 / ||f_<n>||^2`.
    pub quadrature_ratios: Vec<f64>,
    /// `1 + delta b_{n+p}^2`.
    pub formula_ratios: Vec<f64>,
    /// Largest relative gap between the two ratio columns.
    pub max_ratio_error: f64,
    pub verdict: NormVerdict,
    /// `prod_n (1 + delta b_n^2)` when it converges.
    pub c_delta: Option<f64>,
}

/// Terms beyond this index are only used for the convergence verdict.
const VERDICT_TERMS: usize = 60;

/// Verdict from the tail of `sum log(1 + delta b_n^2)`.
pub fn norm_verdict(boundary: Boundary, params: &ModelParams) -> (NormVerdict, Option<f64>) {
    let terms: Vec<f64> = (0..VERDICT_TERMS)
        .map(|n| log_norm_ratio(boundary, n, params))
        .collect();
    let last = terms[VERDICT_TERMS - 1];
    if last < 1e-300 || (last < 1e-12 && terms[VERDICT_TERMS - 2] > last) {
        let sum: f64 = terms.iter().sum();
        (NormVerdict::SquareSummable, Some(sum.exp()))
    } else {
        (NormVerdict::Divergent, None)
    }
}

/// Norm ladder of `rep` for levels `max(0, -p) ..= max_level`.
pub fn norm_series(rep: &EigenfunctionRep, params: &ModelParams, max_level: usize) -> Result<NormSeries> {
    if max_level > rep.target_level {
        return Err(Error::Precondition(format!(
            "representation built to level {}, asked for {max_level}",
            rep.target_level
        )));
    }
    let start = (-rep.p).max(0) as usize;
    let mut levels = Vec::new();
    let mut log_norms = Vec::new();
    for n in start..=max_level {
        let s = quadrature_string(params, rep, n)?;
        levels.push(n);
        log_norms.push(log_norm_sq(rep, params, &s));
    }
    let mut quadrature_ratios = Vec::new();
    let mut formula_ratios = Vec::new();
    let mut max_ratio_error: f64 = 0.0;
    for (i, w) in log_norms.windows(2).enumerate() {
        let idx = (levels[i] as i32 + rep.p) as usize;
        let lf = log_norm_ratio(rep.boundary, idx, params);
        let lq = w[1] - w[0];
        quadrature_ratios.push(lq.exp());
        formula_ratios.push(lf.exp());
        max_ratio_error = max_ratio_error.max((lq - lf).abs());
    }
    let (verdict, c_delta) = norm_verdict(rep.boundary, params);
    Ok(NormSeries {
        levels,
        log_norms,
        quadrature_ratios,
        formula_ratios,
        max_ratio_error,
        verdict,
        c_delta,
    })
}

/// Cosine between the glued function and a nodal vector, in the mass inner product.
pub fn alignment(rep: &EigenfunctionRep, params: &ModelParams, string: &DiscreteString, vector: &[f64]) -> f64 {
    let mut fe = 0.0;
    let mut ff = 0.0;
    let mut ee = 0.0;
    for ((&x, &m), &e) in string.positions.iter().zip(&string.masses).zip(vector) {
        let f = rep.value(x, params);
        fe += m * f * e;
        ff += m * f * f;
        ee += m * e * e;
    }
    fe.abs() / (ff * ee).sqrt()
}

/// Result of [`parseval_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParsevalReport {
    pub norm_sq: f64,
    /// `| ||g||^2 - sum <g, e>^2 / ||e||^2 |`.
    pub residual: f64,
    pub relative_residual: f64,
    /// `(k, p, cosine)` for each glued eigenfunction supplied.
    pub alignments: Vec<(usize, i32, f64)>,
    /// Energy of `g` carried by eigenpairs whose eigenvalue magnitude is at
    /// most `gamma^{-j}` times the largest one, `j = 0, 1, ...`.
    pub tail: Vec<f64>,
    pub eigenpairs: usize,
}

/// Full eigendecomposition of the oracle operator.
pub fn eigenbasis(string: &DiscreteString, boundary: Boundary) -> Result<Vec<Eigenpair>> {
    let op = build_operator(string, boundary)?;
    let (lo, hi) = op.gershgorin();
    let opts = SolveOptions {
        vectors: true,
        ..Default::default()
    };
    let pairs = eigen_solve(&op, (lo - 1.0, hi + 1.0), &opts);
    if pairs.len() != op.dim() {
        return Err(Error::Precondition(format!(
            "eigenbasis holds {} of {} vectors",
            pairs.len(),
            op.dim()
        )));
    }
    for e in &pairs {
        e.check()?;
    }
    Ok(pairs)
}

/// Completeness of the oracle eigenbasis for a node function `g` supported
/// in `I`, plus alignment of glued eigenfunctions with their oracle partners.
pub fn parseval_check(
    params: &ModelParams,
    string: &DiscreteString,
    boundary: Boundary,
    g: &[f64],
    reps: &[EigenfunctionRep],
) -> Result<ParsevalReport> {
    if g.len() != string.len() {
        return Err(Error::Precondition("g must have one value per node".into()));
    }
    if string
        .positions
        .iter()
        .zip(g)
        .any(|(&x, &v)| v != 0.0 && x > 1.0)
    {
        return Err(Error::Precondition("g must be supported in I".into()));
    }
    let pairs = eigenbasis(string, boundary)?;
    let m = &string.masses;
    let norm_sq: f64 = g.iter().zip(m).map(|(v, w)| w * v * v).sum();
    let coeffs: Vec<f64> = pairs
        .iter()
        .map(|e| {
            let v = e.vector.as_ref().expect("vectors requested");
            let ip: f64 = g.iter().zip(v).zip(m).map(|((a, b), w)| w * a * b).sum();
            let nn: f64 = v.iter().zip(m).map(|(b, w)| w * b * b).sum();
            ip * ip / nn
        })
        .collect();
    let captured: f64 = coeffs.iter().sum();
    let residual = (norm_sq - captured).abs();

    let top = pairs.iter().fold(0.0_f64, |acc, e| acc.max(e.value.abs()));
    let mut tail = Vec::new();
    let mut cut = top;
    while cut > 1e-300 && tail.len() < 64 {
        let t: f64 = pairs
            .iter()
            .zip(&coeffs)
            .filter(|(e, _)| e.value.abs() <= cut && e.value != 0.0)
            .map(|(_, c)| c)
            .sum();
        tail.push(t);
        if t == 0.0 {
            break;
        }
        cut /= params.gamma;
    }

    let mut alignments = Vec::new();
    for rep in reps {
        let target = rep.discrete_eigenvalue(params.gamma);
        let partner = pairs
            .iter()
            .min_by(|a, b| (a.value - target).abs().total_cmp(&(b.value - target).abs()))
            .expect("nonempty basis");
        let v = partner.vector.as_ref().expect("vectors requested");
        alignments.push((rep.k, rep.p, alignment(rep, params, string, v)));
    }

    Ok(ParsevalReport {
        norm_sq,
        residual,
        relative_residual: residual / norm_sq,
        alignments,
        tail,
        eigenpairs: pairs.len(),
    })
}

/// `K_<n>` at `lambda` by quadrature, and `K~_<n>(X) = K_<n>(D_{sqrt delta}^n X)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticFormSample {
    pub level: usize,
    pub lambda: f64,
    pub k: Mat2<f64>,
    pub k_tilde: Mat2<f64>,
}

impl QuadraticFormSample {
    pub fn is_positive(&self) -> bool {
        self.k.sym_eigenvalues().0 > 0.0
    }
}

/// Matrix `K_ij = int u_i u_j dm` for the solutions with data `e_1`, `e_2` at 0.
pub fn form_matrix(string: &DiscreteString, lambda: f64) -> Mat2<f64> {
    let (u, _) = solution_values(string, lambda, [1.0, 0.0]);
    let (v, _) = solution_values(string, lambda, [0.0, 1.0]);
    let mut k = [0.0; 3];
    for ((a, b), m) in u.iter().zip(&v).zip(&string.masses) {
        k[0] += m * a * a;
        k[1] += m * a * b;
        k[2] += m * b * b;
    }
    Mat2::new(k[0], k[1], k[1], k[2])
}

/// Oracle string on `I_<n>` with `depth` levels inside each copy of `I`.
pub fn level_string(params: &ModelParams, n: usize, depth: usize) -> DiscreteString {
    discretize(params, &BlowupPrefix::ones(n), n + depth, Scheme::Barycenter)
}

pub fn quadratic_form(params: &ModelParams, level: usize, lambda: f64, depth: usize) -> QuadraticFormSample {
    let s = level_string(params, level, depth);
    let k = form_matrix(&s, lambda);
    let d = Mat2::d_scale(params.sqrt_delta().powi(level as i32));
    QuadraticFormSample {
        level,
        lambda,
        k,
        k_tilde: d * k * d,
    }
}

/// `sqrt(delta) D_delta^{-1} D_{sqrt delta}^{-n} Gamma D_{sqrt delta}^n`.
pub fn tilde_of(params: &ModelParams, gamma_n: &Mat2<f64>, n: usize) -> Mat2<f64> {
    let sn = params.sqrt_delta().powi(n as i32);
    let m = Mat2::d_scale(1.0 / params.delta) * Mat2::d_scale(1.0 / sn) * *gamma_n * Mat2::d_scale(sn);
    let s = params.sqrt_delta();
    Mat2::new(s * m.m[0][0], s * m.m[0][1], s * m.m[1][0], s * m.m[1][1])
}

/// Worst relative residuals of the level recursion, for sample vectors `xs`:
/// `K_<n+1>(X) = K_<n>(X) + delta K_<n>(D_delta^{-1} Gamma_<n> X)` and its
/// tilde form `K~_<n+1>(X) = K~_<n>(D X) + K~_<n>(Gamma~_<n> D X)`, `D = D_{sqrt delta}`.
/// Every quantity comes from the oracle strings.
pub fn recursion_residuals(
    params: &ModelParams,
    level: usize,
    lambda: f64,
    depth: usize,
    xs: &[[f64; 2]],
) -> (f64, f64) {
    let here = quadratic_form(params, level, lambda, depth);
    let next = quadratic_form(params, level + 1, lambda, depth);
    let gamma_n = level_string(params, level, depth).propagate_full(lambda);
    let pull = Mat2::d_scale(1.0 / params.delta) * gamma_n;
    let gt = tilde_of(params, &gamma_n, level);
    let d = Mat2::d_scale(params.sqrt_delta());
    let mut plain: f64 = 0.0;
    let mut tilde: f64 = 0.0;
    for &x in xs {
        let lhs = next.k.quad(x);
        let rhs = here.k.quad(x) + params.delta * here.k.quad(pull.apply(x));
        plain = plain.max((lhs - rhs).abs() / lhs.abs());
        let dx = d.apply(x);
        let lhs = next.k_tilde.quad(x);
        let rhs = here.k_tilde.quad(dx) + here.k_tilde.quad(gt.apply(dx));
        tilde = tilde.max((lhs - rhs).abs() / lhs.abs());
    }
    (plain, tilde)
}

/// Outcome of [`lemma45_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma45Report {
    pub holds: bool,
    /// `min(lower slack, upper slack) / sup K`; negative on violation.
    pub slack: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// Extremes of `K(Z) + K(Gamma Z)` over unit `Z`.
    pub min_value: f64,
    pub max_value: f64,
}

/// Bounds on `K(Z) + K(Gamma Z)` for positive `K` and elliptic unimodular `Gamma`,
/// checked exactly through the eigenvalues of `K + Gamma^T K Gamma`.
pub fn lemma45_check(k: &Mat2<f64>, g: &Mat2<f64>) -> Result<Lemma45Report> {
    if (g.det() - 1.0).abs() > 1e-10 {
        return Err(Error::Precondition(format!("det Gamma = {}", g.det())));
    }
    let tr = g.trace();
    if !(tr.abs() < 2.0) {
        return Err(Error::Precondition(format!("|tr Gamma| = {} is not below 2", tr.abs())));
    }
    let (kmin, sup) = k.sym_eigenvalues();
    if !(kmin > 0.0) {
        return Err(Error::Precondition("K is not positive definite".into()));
    }
    let norm_sq = g.frobenius().powi(2);
    let lower_bound = sup * ((1.0 - tr * tr / 4.0) / norm_sq).powi(2);
    let upper_bound = sup * (1.0 + norm_sq);
    let sum = *k + g.transpose() * *k * *g;
    let (min_value, max_value) = sum.sym_eigenvalues();
    let slack = (min_value - lower_bound).min(upper_bound - max_value) / sup;
    Ok(Lemma45Report {
        holds: slack >= -1e-12,
        slack,
        lower_bound,
        upper_bound,
        min_value,
        max_value,
    })
}

/// Levels `n <= max_level` with `|tr Gamma~_<n-1>| <= 2/sqrt 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSubsequence {
    pub lambda: f64,
    pub indices: Vec<usize>,
    /// `|tr Gamma~_<n-1>|` for `n = 1..=max_level`.
    pub traces: Vec<f64>,
    /// Running maximum of `|Pi_<n>|`, `n = 1..=max_level`.
    pub pi_running_max: Vec<f64>,
    pub warning: Option<String>,
}

pub const TRACE_BOUND: f64 = 1.154_700_538_379_251_5; // 2 / sqrt(3)

pub fn trace_subsequence(
    r: &Renormalizer,
    lambda: f64,
    max_level: usize,
    cfg: &ClassifyConfig,
) -> Result<TraceSubsequence> {
    let verdict = classify(r, lambda, cfg).verdict;
    if verdict != Classification::InSupport {
        return Err(Error::NotInSupport(lambda));
    }
    let traces: Vec<f64> = r.tilde_traces(lambda, max_level).iter().map(|t| t.abs()).collect();
    let indices: Vec<usize> = traces
        .iter()
        .enumerate()
        .filter(|(_, t)| **t <= TRACE_BOUND)
        .map(|(i, _)| i + 1)
        .collect();
    let mut pi = 1.0_f64;
    let mut best = 0.0_f64;
    let pi_running_max = traces
        .iter()
        .map(|t| {
            pi *= t;
            best = best.max(pi);
            best
        })
        .collect();
    let warning = indices.is_empty().then(|| {
        let low = traces.iter().cloned().fold(f64::INFINITY, f64::min);
        format!("no trace below 2/sqrt(3) up to level {max_level}; smallest {low}")
    });
    Ok(TraceSubsequence {
        lambda,
        indices,
        traces,
        pi_running_max,
        warning,
    })
}

/// Spread of the energy ratio `int_{I_<n>} f^2 / int_{I_<n+1> \ I_<n>} f^2` over all
/// solutions, at each level `n < max_level`, using the tilde recursion seeded by
/// the oracle form on `I`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRatios {
    pub lambda: f64,
    /// `(min, max)` of the ratio at level `n`.
    pub ranges: Vec<(f64, f64)>,
    /// Condition number `|Gamma~_<n>|_2^2` for `n < max_level`.
    pub conditions: Vec<f64>,
}

/// Generalized eigenvalues of the pencil `(a, b)` for symmetric positive `b`.
fn pencil_range(a: &Mat2<f64>, b: &Mat2<f64>) -> (f64, f64) {
    // det(a - t b) = 0.
    let qa = b.det();
    let qb = -(a.m[0][0] * b.m[1][1] + a.m[1][1] * b.m[0][0] - 2.0 * a.m[0][1] * b.m[0][1]);
    let qc = a.det();
    let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
    let (t1, t2) = ((-qb - disc) / (2.0 * qa), (-qb + disc) / (2.0 * qa));
    (t1.min(t2), t1.max(t2))
}

pub fn energy_ratios(r: &Renormalizer, lambda: f64, max_level: usize, depth: usize) -> Result<EnergyRatios> {
    let params = r.params;
    let base = level_string(&params, 0, depth);
    let mut kt = form_matrix(&base, lambda);
    let d = Mat2::d_scale(params.sqrt_delta());
    let mut ranges = Vec::new();
    let mut conditions = Vec::new();
    for n in 0..max_level {
        let gt = r.tilde_gamma(lambda, n)?;
        let far = gt.transpose() * kt * gt;
        ranges.push(pencil_range(&kt, &far));
        let (_, smax) = (gt.transpose() * gt).sym_eigenvalues();
        conditions.push(smax);
        let step = gt * d;
        let next = d * kt * d + step.transpose() * kt * step;
        let tr = next.trace();
        kt = Mat2::new(next.m[0][0] / tr, next.m[0][1] / tr, next.m[1][0] / tr, next.m[1][1] / tr);
    }
    Ok(EnergyRatios {
        lambda,
        ranges,
        conditions,
    })
}
