//! The renormalization map `f(x, y) = (x(x + y/delta) - 1/delta, delta y (x + y/delta) - delta)`,
//! its homogeneous lift `R` on the projective plane, orbits and the Green
//! function, the invariant conic `C: xy = z^2` and the cones `K+-`.
//!
//! Orbits are tracked in one of two representations. Close to the fixed
//! point `(1, 1)` the deviation `(x - 1, y - 1)` is iterated directly, which
//! keeps full relative precision for points on the curve near `lambda = 0`.
//! Further out the homogeneous vector `(x, y, 1)` is carried as `e^L v` with
//! `|v|_inf = 1`, so escaping orbits never overflow.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::Scalar;

/// A point of the affine chart `z = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinePoint<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> AffinePoint<T> {
    pub fn new(x: T, y: T) -> Self {
        AffinePoint { x, y }
    }

    pub fn norm(&self) -> f64 {
        self.x.modulus().hypot(self.y.modulus())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist(&self, other: &Self) -> f64 {
        (self.x - other.x).modulus().hypot((self.y - other.y).modulus())
    }
}

/// One application of `f`.
pub fn f_affine<T: Scalar>(p: AffinePoint<T>, params: &ModelParams) -> AffinePoint<T> {
    let inv = T::from_f64(1.0 / params.delta);
    let del = T::from_f64(params.delta);
    let t = p.x + inv * p.y;
    AffinePoint {
        x: p.x * t - inv,
        y: del * p.y * t - del,
    }
}

/// One application of `f` written for the deviation `(u, v) = (x - 1, y - 1)`.
pub fn f_deviation<T: Scalar>(u: T, v: T, params: &ModelParams) -> (T, T) {
    let inv = T::from_f64(1.0 / params.delta);
    let del = T::from_f64(params.delta);
    let two = T::from_f64(2.0);
    let un = (two + inv) * u + inv * v + u * (u + inv * v);
    let vn = del * u + (del + two) * v + v * (del * u + v);
    (un, vn)
}

/// The homogeneous lift `R(x, y, z)`; vanishes only at `[1, -delta, 0]`.
pub fn r_lift<T: Scalar>(v: [T; 3], params: &ModelParams) -> [T; 3] {
    let inv = T::from_f64(1.0 / params.delta);
    let del = T::from_f64(params.delta);
    let [x, y, z] = v;
    let t = x + inv * y;
    let zz = z * z;
    [x * t - inv * zz, del * y * t - del * zz, zz]
}

fn max_modulus<T: Scalar>(v: &[T; 3]) -> f64 {
    v.iter().fold(0.0_f64, |m, c| m.max(c.modulus()))
}

fn hermitian_norm<T: Scalar>(v: &[T; 3]) -> f64 {
    v.iter().map(|c| c.modulus().powi(2)).sum::<f64>().sqrt()
}

/// Sine of the angle between two nonzero vectors of `C^3`.
pub fn projective_distance<T: Scalar>(a: &[T; 3], b: &[T; 3]) -> f64 {
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    hermitian_norm(&cross) / (hermitian_norm(a) * hermitian_norm(b))
}

/// A point of the projective plane, normalized so that its largest
/// component (by modulus) equals 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectivePoint<T> {
    coords: [T; 3],
}

impl<T: Scalar> ProjectivePoint<T> {
    pub fn new(coords: [T; 3]) -> Result<Self> {
        if !coords.iter().all(|c| c.is_finite()) {
            return Err(Error::Precondition("non-finite homogeneous coordinates".into()));
        }
        let k = (0..3)
            .max_by(|&i, &j| coords[i].modulus().total_cmp(&coords[j].modulus()))
            .unwrap_or(0);
        let pivot = coords[k];
        if pivot.modulus() == 0.0 {
            return Err(Error::Precondition("homogeneous triple is zero".into()));
        }
        let mut c = coords.map(|x| x / pivot);
        c[k] = T::one();
        Ok(ProjectivePoint { coords: c })
    }

    pub fn from_affine(p: AffinePoint<T>) -> Self {
        Self::new([p.x, p.y, T::one()]).expect("affine points are finite and nonzero")
    }

    pub fn coords(&self) -> [T; 3] {
        self.coords
    }

    /// Affine chart `z = 1`, if the point is not at infinity.
    pub fn to_affine(&self) -> Option<AffinePoint<T>> {
        let z = self.coords[2];
        if z.modulus() == 0.0 {
            return None;
        }
        Some(AffinePoint::new(self.coords[0] / z, self.coords[1] / z))
    }

    pub fn distance(&self, other: &Self) -> f64 {
        projective_distance(&self.coords, &other.coords)
    }

    pub fn distance_to_indeterminacy(&self, params: &ModelParams) -> f64 {
        let l = [T::one(), T::from_f64(-params.delta), T::zero()];
        projective_distance(&self.coords, &l)
    }
}

/// The indeterminacy point `l = [1, -delta, 0]`.
pub fn indeterminacy_point(params: &ModelParams) -> ProjectivePoint<f64> {
    ProjectivePoint::new([1.0, -params.delta, 0.0]).expect("nonzero")
}

/// `x_+ = [0, 1, 0]`
pub fn x_plus() -> ProjectivePoint<f64> {
    ProjectivePoint::new([0.0, 1.0, 0.0]).expect("nonzero")
}

/// `x_- = [1, 0, 0]`
pub fn x_minus() -> ProjectivePoint<f64> {
    ProjectivePoint::new([1.0, 0.0, 0.0]).expect("nonzero")
}

/// Geometric membership flags of a real projective point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointFlags {
    pub on_d: bool,
    pub on_c: bool,
    pub in_k_plus: bool,
    pub in_k_minus: bool,
    pub is_indeterminacy: bool,
}

/// Flags with tolerance `tol` relative to the normalized coordinates.
pub fn point_flags(p: &ProjectivePoint<f64>, params: &ModelParams, tol: f64) -> PointFlags {
    let [x, y, z] = p.coords();
    let r = x * y - z * z;
    PointFlags {
        on_d: (x + y / params.delta).abs() <= tol * (1.0 + 1.0 / params.delta),
        on_c: r.abs() <= tol,
        in_k_plus: r >= -tol,
        in_k_minus: r <= tol,
        is_indeterminacy: p.distance_to_indeterminacy(params) <= tol,
    }
}

/// Image under `R` together with the distance of the argument to `l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectiveImage<T> {
    pub point: ProjectivePoint<T>,
    pub distance_to_indeterminacy: f64,
    /// Set when the argument is within the configured threshold of `l`.
    pub near_indeterminacy: bool,
}

/// `R` on the projective plane.
pub fn r_homogeneous<T: Scalar>(
    p: &ProjectivePoint<T>,
    params: &ModelParams,
    near_threshold: f64,
) -> Result<ProjectiveImage<T>> {
    let dist = p.distance_to_indeterminacy(params);
    let image = r_lift(p.coords(), params);
    if dist == 0.0 || max_modulus(&image) == 0.0 {
        return Err(Error::Indeterminacy);
    }
    Ok(ProjectiveImage {
        point: ProjectivePoint::new(image)?,
        distance_to_indeterminacy: dist,
        near_indeterminacy: dist < near_threshold,
    })
}

/// Settings for orbit and Green-function computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitConfig {
    pub max_iter: usize,
    pub escape_radius: f64,
    /// Stop once `|G_{n+1} - G_n|` drops below this (after escape).
    pub green_tol: f64,
    pub near_threshold: f64,
    /// Number of affine iterates kept in the summary.
    pub keep: usize,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        OrbitConfig {
            max_iter: 200,
            escape_radius: 1e8,
            green_tol: 1e-12,
            near_threshold: 1e-10,
            keep: 64,
        }
    }
}

/// Log of an orbit and its Green-function estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSummary<T> {
    /// The first `keep` iterates, starting with the initial point.
    pub iterates: Vec<AffinePoint<T>>,
    /// `log |f^n(p)|` for every computed step.
    pub log_norms: Vec<f64>,
    pub green_estimate: f64,
    pub bounded: bool,
    pub escape_step: Option<usize>,
    pub min_distance_to_indeterminacy: f64,
    pub steps: usize,
    pub converged: bool,
    pub hit_indeterminacy: bool,
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

const DEVIATION_LIMIT: f64 = 0.5;

/// Orbit state in either representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrbitState<T> {
    Deviation { u: T, v: T },
    Homogeneous { v: [T; 3], log_scale: f64 },
}

impl<T: Scalar> OrbitState<T> {
    /// Points near `(1, 1)` start in deviation form (the subtraction is exact there).
    pub fn from_affine(p: AffinePoint<T>) -> Self {
        let (u, v) = (p.x - T::one(), p.y - T::one());
        if u.modulus().max(v.modulus()) <= DEVIATION_LIMIT {
            OrbitState::Deviation { u, v }
        } else {
            Self::homogeneous([p.x, p.y, T::one()], 0.0)
        }
    }

    pub fn from_deviation(u: T, v: T) -> Self {
        if u.modulus().max(v.modulus()) <= DEVIATION_LIMIT {
            OrbitState::Deviation { u, v }
        } else {
            Self::homogeneous([T::one() + u, T::one() + v, T::one()], 0.0)
        }
    }

    fn homogeneous(w: [T; 3], log_scale: f64) -> Self {
        let s = max_modulus(&w);
        if s == 0.0 || !s.is_finite() {
            return OrbitState::Homogeneous {
                v: w,
                log_scale: f64::NAN,
            };
        }
        OrbitState::Homogeneous {
            v: w.map(|c| c.scale(1.0 / s)),
            log_scale: log_scale + s.ln(),
        }
    }

    /// Apply `f` once.
    pub fn step(&self, params: &ModelParams) -> Self {
        match *self {
            OrbitState::Deviation { u, v } => {
                let (un, vn) = f_deviation(u, v, params);
                Self::from_deviation(un, vn)
            }
            OrbitState::Homogeneous { v, log_scale } => {
                Self::homogeneous(r_lift(v, params), 2.0 * log_scale)
            }
        }
    }

    pub fn is_valid(&self) -> bool {
        match self {
            OrbitState::Deviation { u, v } => u.is_finite() && v.is_finite(),
            OrbitState::Homogeneous { log_scale, .. } => log_scale.is_finite(),
        }
    }

    /// `log |(x, y)|`, finite even when the point itself would overflow.
    pub fn log_norm(&self) -> f64 {
        match *self {
            OrbitState::Deviation { u, v } => {
                let x = T::one() + u;
                let y = T::one() + v;
                x.modulus().hypot(y.modulus()).ln()
            }
            OrbitState::Homogeneous { v, log_scale } => {
                log_scale + v[0].modulus().hypot(v[1].modulus()).ln()
            }
        }
    }

    /// Affine point, possibly non-finite for escaped orbits.
    pub fn affine(&self) -> AffinePoint<T> {
        match *self {
            OrbitState::Deviation { u, v } => AffinePoint::new(T::one() + u, T::one() + v),
            OrbitState::Homogeneous { v, log_scale } => {
                let s = log_scale.exp();
                AffinePoint::new(v[0].scale(s), v[1].scale(s))
            }
        }
    }

    /// Homogeneous triple `[x, y, 1]` up to scale.
    pub fn projective(&self) -> [T; 3] {
        match *self {
            OrbitState::Deviation { u, v } => [T::one() + u, T::one() + v, T::one()],
            OrbitState::Homogeneous { v, .. } => v,
        }
    }

    /// Deviation from `(1, 1)`, computed without cancellation when available.
    pub fn deviation(&self) -> (T, T) {
        match *self {
            OrbitState::Deviation { u, v } => (u, v),
            OrbitState::Homogeneous { .. } => {
                let p = self.affine();
                (p.x - T::one(), p.y - T::one())
            }
        }
    }

    /// `x + y / delta`, with sign preserved when the point has overflowed
    /// (in that case only the sign and a bounded surrogate are meaningful).
    pub fn trace_surrogate(&self, params: &ModelParams) -> T {
        let inv = T::from_f64(1.0 / params.delta);
        match *self {
            OrbitState::Deviation { u, v } => T::from_f64(1.0 + 1.0 / params.delta) + u + inv * v,
            OrbitState::Homogeneous { v, log_scale } => {
                let t = v[0] + inv * v[1];
                if log_scale < 600.0 {
                    t.scale(log_scale.exp())
                } else {
                    t.scale(f64::MAX.sqrt())
                }
            }
        }
    }

    fn distance_to_indeterminacy(&self, params: &ModelParams) -> f64 {
        match *self {
            OrbitState::Deviation { .. } => 1.0,
            OrbitState::Homogeneous { v, .. } => {
                let l = [T::one(), T::from_f64(-params.delta), T::zero()];
                projective_distance(&v, &l)
            }
        }
    }
}

/// Green function estimate along the orbit of `p`.
pub fn green<T: Scalar>(p: AffinePoint<T>, params: &ModelParams, cfg: &OrbitConfig) -> OrbitSummary<T> {
    run_orbit(OrbitState::from_affine(p), params, cfg)
}

/// Same as [`green`] for the point `(1 + u, 1 + v)` given by its deviation.
pub fn green_from_deviation<T: Scalar>(
    u: T,
    v: T,
    params: &ModelParams,
    cfg: &OrbitConfig,
) -> OrbitSummary<T> {
    run_orbit(OrbitState::from_deviation(u, v), params, cfg)
}

/// Iterate from `state`, accumulating `G_n = 2^{-n} log(1 + |f^n|)`.
pub fn run_orbit<T: Scalar>(state: OrbitState<T>, params: &ModelParams, cfg: &OrbitConfig) -> OrbitSummary<T> {
    let log_radius = cfg.escape_radius.ln();
    let mut st = state;
    let mut iterates = Vec::with_capacity(cfg.keep.min(cfg.max_iter + 1));
    let mut log_norms = Vec::with_capacity(cfg.max_iter + 1);
    let mut escape_step = None;
    let mut min_dist = f64::INFINITY;
    let mut weight = 1.0;
    let mut g_prev = f64::NAN;
    let mut g;
    let mut converged = false;
    let mut hit_indeterminacy = false;
    let mut n = 0;

    loop {
        let ln = st.log_norm();
        log_norms.push(ln);
        if iterates.len() < cfg.keep {
            iterates.push(st.affine());
        }
        g = weight * softplus(ln);
        if escape_step.is_none() && ln > log_radius {
            escape_step = Some(n);
        }
        min_dist = min_dist.min(st.distance_to_indeterminacy(params));
        if (g - g_prev).abs() < cfg.green_tol && (escape_step.is_some() || n >= cfg.max_iter) {
            converged = true;
            break;
        }
        if n >= cfg.max_iter {
            break;
        }
        let next = st.step(params);
        if !next.is_valid() {
            hit_indeterminacy = true;
            break;
        }
        st = next;
        g_prev = g;
        weight *= 0.5;
        n += 1;
    }

    OrbitSummary {
        iterates,
        log_norms,
        green_estimate: g.max(0.0),
        bounded: escape_step.is_none() && !hit_indeterminacy,
        escape_step,
        min_distance_to_indeterminacy: min_dist,
        steps: n,
        converged,
        hit_indeterminacy,
    }
}

/// `r(X) = xy - z^2`, `p(X) = alpha (x + y / delta)` and the residual of
/// `r(R X) = gamma p(X)^2 r(X)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgebraicInvariants {
    pub r: f64,
    pub p: f64,
    pub r_of_rx: f64,
    pub residual: f64,
    /// Natural size of `r(R X)`, namely `|R X|_inf^2`.
    pub scale: f64,
}

impl AlgebraicInvariants {
    pub fn relative_residual(&self) -> f64 {
        if self.scale == 0.0 {
            self.residual
        } else {
            self.residual / self.scale
        }
    }
}

pub fn r_form(x: [f64; 3]) -> f64 {
    x[0] * x[1] - x[2] * x[2]
}

pub fn algebraic_invariants(x: [f64; 3], params: &ModelParams) -> AlgebraicInvariants {
    let r = r_form(x);
    let p = params.alpha * (x[0] + x[1] / params.delta);
    let rx = r_lift(x, params);
    let r_of_rx = r_form(rx);
    let residual = (r_of_rx - params.gamma * p * p * r).abs();
    AlgebraicInvariants {
        r,
        p,
        r_of_rx,
        residual,
        scale: max_modulus(&rx).powi(2),
    }
}

/// Outcome of the cone invariance checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeReport {
    pub points_checked: usize,
    /// Points whose `r` changed sign under `R` beyond rounding.
    pub violations: usize,
    pub curve_points_checked: usize,
    /// Curve points `(a, d)` with `ad - 1 > 0` beyond rounding.
    pub curve_violations: usize,
}

impl ConeReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.curve_violations == 0
    }
}

/// Sign of `r` preserved by `R` on `points`, and `r(a, d, 1) <= 0` on the
/// supplied curve points `phi(lambda)`, `lambda <= 0`.
pub fn cone_checks(points: &[[f64; 3]], curve: &[AffinePoint<f64>], params: &ModelParams) -> ConeReport {
    let tol = 1e-12;
    let violations = points
        .iter()
        .filter(|&&x| {
            let inv = algebraic_invariants(x, params);
            let before = tol * max_modulus(&x).powi(2);
            let after = tol * inv.scale;
            (inv.r > before && inv.r_of_rx < -after) || (inv.r < -before && inv.r_of_rx > after)
        })
        .count();
    let curve_violations = curve
        .iter()
        .filter(|p| {
            let r = p.x * p.y - 1.0;
            r > tol * (1.0 + p.x.abs() * p.y.abs())
        })
        .count();
    ConeReport {
        points_checked: points.len(),
        violations,
        curve_points_checked: curve.len(),
        curve_violations,
    }
}

/// Entry of the orbit of the line `D` in log coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DOrbitEntry {
    /// Iterate index (`1` is the first image of `D`).
    pub step: usize,
    pub sign_x: f64,
    pub log_abs_x: f64,
    pub sign_y: f64,
    pub log_abs_y: f64,
}

/// Orbit of `D`, iterates `1..=n_max + 1`.
///
/// The first image is computed with [`f_affine`] from a sample point of `D`.
/// It lies on `C`, where `R` acts by squaring, so later iterates are carried
/// exactly in log coordinates.
pub fn d_orbit(params: &ModelParams, sample_x: f64, n_max: usize) -> Result<Vec<DOrbitEntry>> {
    let d_point = AffinePoint::new(sample_x, -params.delta * sample_x);
    let first = f_affine(d_point, params);
    let r = first.x * first.y - 1.0;
    if r.abs() > 1e-12 * (1.0 + first.x.abs() * first.y.abs()) {
        return Err(Error::Precondition(format!("first image of D is off C (r = {r:e})")));
    }
    let mut e = DOrbitEntry {
        step: 1,
        sign_x: first.x.signum(),
        log_abs_x: first.x.abs().ln(),
        sign_y: first.y.signum(),
        log_abs_y: first.y.abs().ln(),
    };
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(e);
    for step in 2..=n_max + 1 {
        e = DOrbitEntry {
            step,
            sign_x: 1.0,
            log_abs_x: 2.0 * e.log_abs_x,
            sign_y: 1.0,
            log_abs_y: 2.0 * e.log_abs_y,
        };
        out.push(e);
    }
    Ok(out)
}

/// Largest relative gap between `R` and coordinate squaring on sampled
/// points `[x, 1/x, 1]` of `C`.
pub fn c_restriction_defect(params: &ModelParams, xs: &[f64]) -> f64 {
    xs.iter()
        .map(|&x| {
            let img = r_lift([x, 1.0 / x, 1.0], params);
            let want = [x * x, 1.0 / (x * x), 1.0];
            let scale = max_modulus(&want);
            (0..3)
                .map(|i| (img[i] - want[i]).abs() / scale)
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Expansion factor `gamma |X|^2 p(X)^2 / |R X|^2` of `|r|` in normalized
/// coordinates.
pub fn cone_expansion(x: [f64; 3], params: &ModelParams) -> f64 {
    let p = params.alpha * (x[0] + x[1] / params.delta);
    let rx = r_lift(x, params);
    let n2 = |v: &[f64; 3]| v.iter().map(|c| c * c).sum::<f64>();
    params.gamma * n2(&x) * p * p / n2(&rx)
}

/// Minimum of [`cone_expansion`] over the expanding branch of `C`: `C-`
/// (points `[x, 1/x, 1]`, `|x| >= 1`) when `delta > 1`, `C+` when `delta < 1`.
/// The bound is `max(delta, 1/delta)`.
pub fn expanding_branch_min(params: &ModelParams, magnitudes: &[f64]) -> f64 {
    magnitudes
        .iter()
        .flat_map(|&m| [m, -m])
        .map(|s| {
            let x = if params.delta >= 1.0 { s } else { 1.0 / s };
            cone_expansion([x, 1.0 / x, 1.0], params)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Iterate `R` (normalized) from `start` and return the distance to `target`.
pub fn distance_after(
    start: [f64; 3],
    target: &ProjectivePoint<f64>,
    params: &ModelParams,
    steps: usize,
) -> Result<f64> {
    let mut p = ProjectivePoint::new(start)?;
    for _ in 0..steps {
        p = r_homogeneous(&p, params, 0.0)?.point;
    }
    Ok(p.distance(target))
}

/// Preimage of `[x, y, 0]` under the map restricted to the line at infinity.
pub fn infinity_preimage(x: f64, y: f64, params: &ModelParams) -> [f64; 3] {
    [x, y / params.delta, 0.0]
}
