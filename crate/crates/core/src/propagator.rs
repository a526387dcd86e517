//! Propagator `Gamma_lambda` over `I` by renormalization.
//!
//! `phi(lambda) = (a(lambda), d(lambda))` satisfies `f(phi(lambda)) = phi(gamma lambda)`.
//! We seed `phi` at `gamma^{-n} lambda` with a Taylor polynomial whose
//! coefficients come from matching powers in that relation, then apply `f`
//! `n` times in deviation coordinates. The off-diagonal entries follow from
//! `b(lambda) = prod_{k>=1} alpha t(gamma^{-k} lambda)` with `t = a + d/delta`,
//! and `c = lambda b`.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::renorm_map::{f_affine, AffinePoint, OrbitState};
use crate::scalar::{Mat2, Scalar};

/// Seed and accuracy settings for [`Renormalizer`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiConfig {
    /// Seed radius: `|gamma^{-n} lambda| <= eps0`.
    pub eps0: f64,
    /// Taylor order of the seed.
    pub order: usize,
    /// Tolerance for the semiconjugacy residual and precision warnings.
    pub tol: f64,
}

impl Default for PhiConfig {
    fn default() -> Self {
        PhiConfig {
            eps0: 1e-6,
            order: 4,
            tol: 1e-8,
        }
    }
}

/// `phi(lambda)` with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiPoint<T> {
    pub lambda: T,
    pub a: T,
    pub d: T,
    /// Number of `f` applications after the seed.
    pub seed_level: usize,
    /// `|f(phi(lambda / gamma)) - phi(lambda)|`, the inner point computed from
    /// an independent seed one level deeper.
    pub residual: f64,
    /// Set when `residual > tol (1 + |phi|)`.
    pub precision_warning: bool,
    /// Orbit state of `phi(lambda)`; keeps sign and size past overflow.
    pub state: OrbitState<T>,
}

impl<T: Scalar> PhiPoint<T> {
    pub fn point(&self) -> AffinePoint<T> {
        AffinePoint::new(self.a, self.d)
    }
}

/// The four entries of `Gamma_lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorEntries<T> {
    pub lambda: T,
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
    /// Number of factors used in the product for `b`.
    pub truncation_level: usize,
}

impl<T: Scalar> PropagatorEntries<T> {
    pub fn matrix(&self) -> Mat2<T> {
        Mat2::new(self.a, self.b, self.c, self.d)
    }
}

/// `Pi_<n>(lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceProduct {
    pub lambda: f64,
    pub n: usize,
    pub value: f64,
}

/// Taylor coefficients of `a` and `d` at 0, built once per `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorSeed {
    pub a: Vec<f64>,
    pub d: Vec<f64>,
}

impl TaylorSeed {
    /// Coefficients up to `order` (inclusive).
    pub fn new(params: &ModelParams, order: usize) -> Self {
        let inv = 1.0 / params.delta;
        let del = params.delta;
        let mut a = vec![1.0, 1.0 - params.first_moment];
        let mut d = vec![1.0, params.first_moment];
        for k in 2..=order.max(1) {
            let mut ra = 0.0;
            let mut rd = 0.0;
            for i in 1..k {
                let t = a[k - i] + inv * d[k - i];
                ra += a[i] * t;
                rd += d[i] * t;
            }
            let gk = params.gamma.powi(k as i32);
            let m00 = gk - 2.0 - inv;
            let m11 = gk - del - 2.0;
            let rhs1 = del * rd;
            // [[m00, -inv], [-del, m11]] (a_k, d_k) = (ra, rhs1)
            let det = m00 * m11 - 1.0;
            a.push((ra * m11 + inv * rhs1) / det);
            d.push((m00 * rhs1 + del * ra) / det);
        }
        a.truncate(order.max(1) + 1);
        d.truncate(order.max(1) + 1);
        TaylorSeed { a, d }
    }

    /// Deviation `(a(mu) - 1, d(mu) - 1)` from the truncated series.
    pub fn deviation<T: Scalar>(&self, mu: T) -> (T, T) {
        let horner = |c: &[f64]| {
            let mut acc = T::zero();
            for &ck in c[1..].iter().rev() {
                acc = (acc + T::from_f64(ck)) * mu;
            }
            acc
        };
        (horner(&self.a), horner(&self.d))
    }
}

/// Renormalization evaluator for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct Renormalizer {
    pub params: ModelParams,
    pub config: PhiConfig,
    seed: TaylorSeed,
    seed_check: TaylorSeed,
}

/// Orbit `phi(gamma^{j - n} lambda)`, `j = 0..=n`, from one seed.
struct Chain<T> {
    states: Vec<OrbitState<T>>,
}

impl Renormalizer {
    pub fn new(params: ModelParams) -> Result<Self> {
        Self::with_config(params, PhiConfig::default())
    }

    pub fn with_config(params: ModelParams, config: PhiConfig) -> Result<Self> {
        let unit = params.alpha * (1.0 + 1.0 / params.delta);
        if (unit - 1.0).abs() > 4.0 * f64::EPSILON {
            return Err(Error::Precondition(format!(
                "alpha (1 + 1/delta) = {unit} differs from 1"
            )));
        }
        if !(config.eps0 > 0.0 && config.eps0 < 1.0) {
            return Err(Error::Precondition("seed radius must lie in (0, 1)".into()));
        }
        Ok(Renormalizer {
            params,
            config,
            seed: TaylorSeed::new(&params, config.order),
            seed_check: TaylorSeed::new(&params, config.order + 1),
        })
    }

    pub fn seed(&self) -> &TaylorSeed {
        &self.seed
    }

    /// Smallest `n` with `gamma^{-n} |lambda| <= eps0`.
    pub fn seed_level(&self, modulus: f64) -> usize {
        let mut n = 0;
        let mut m = modulus;
        while m > self.config.eps0 && n < 4096 {
            m /= self.params.gamma;
            n += 1;
        }
        n
    }

    fn chain<T: Scalar>(&self, lambda: T, extra: usize, seed: &TaylorSeed) -> Chain<T> {
        let n = self.seed_level(lambda.modulus()) + extra;
        let mu = lambda.scale(self.params.gamma.powi(-(n as i32)));
        let (u, v) = seed.deviation(mu);
        let mut st = OrbitState::from_deviation(u, v);
        let mut states = Vec::with_capacity(n + 1);
        states.push(st);
        for _ in 0..n {
            st = st.step(&self.params);
            states.push(st);
        }
        Chain { states }
    }

    /// `phi(lambda)`.
    pub fn phi<T: Scalar>(&self, lambda: T) -> PhiPoint<T> {
        let main = self.chain(lambda, 0, &self.seed);
        let n = main.states.len() - 1;
        let state = main.states[n];
        let p = state.affine();

        // Independent evaluation of phi(lambda / gamma) from a deeper seed.
        let inner = self.chain(lambda.scale(1.0 / self.params.gamma), 1, &self.seed_check);
        let q = inner.states[inner.states.len() - 1];
        let residual = deviation_gap(&state, &q.step(&self.params));
        let size = 1.0 + p.norm();
        PhiPoint {
            lambda,
            a: p.x,
            d: p.y,
            seed_level: n,
            residual,
            precision_warning: !(residual <= self.config.tol * size),
            state,
        }
    }

    /// `(a, b, c, d)` at `lambda`.
    pub fn entries<T: Scalar>(&self, lambda: T) -> Result<PropagatorEntries<T>> {
        let ch = self.chain(lambda, 0, &self.seed);
        let n = ch.states.len() - 1;
        let alpha = self.params.alpha;
        let inv = 1.0 / self.params.delta;

        // Factors k = 1..=n come from the chain, phi(gamma^{-k} lambda) = states[n - k].
        let mut b = T::one();
        for k in 1..=n {
            b *= factor(&ch.states[n - k], alpha, inv);
        }
        // Tail from the Taylor seed.
        let mut mu = lambda.scale(self.params.gamma.powi(-(n as i32)));
        let mut k = n;
        loop {
            mu = mu.scale(1.0 / self.params.gamma);
            k += 1;
            let (u, v) = self.seed.deviation(mu);
            let eps = (u + v.scale(inv)).scale(alpha);
            b *= T::one() + eps;
            if eps.modulus() < 1e-18 {
                break;
            }
            if k > n + 400 {
                return Err(Error::ProductDivergence {
                    steps: k,
                    last: eps.modulus(),
                });
            }
        }
        let p = ch.states[n].affine();
        Ok(PropagatorEntries {
            lambda,
            a: p.x,
            b,
            c: lambda * b,
            d: p.y,
            truncation_level: k,
        })
    }

    /// `Gamma_<n>, lambda`, the propagator over `I_<n> = [0, alpha^{-n}]`.
    pub fn gamma_n<T: Scalar>(&self, lambda: T, n: usize) -> Result<Mat2<T>> {
        let big = lambda.scale(self.params.gamma.powi(n as i32));
        let e = self.entries(big)?;
        let an = self.params.alpha.powi(n as i32);
        Ok(Mat2::new(e.a, e.b.scale(1.0 / an), e.c.scale(an), e.d))
    }

    /// `phi(gamma^k lambda)` for `k = 0..=n`, continuing one chain forward.
    pub fn forward_orbit(&self, lambda: f64, n: usize) -> Vec<OrbitState<f64>> {
        let ch = self.chain(lambda, 0, &self.seed);
        let mut st = ch.states[ch.states.len() - 1];
        let mut out = Vec::with_capacity(n + 1);
        out.push(st);
        for _ in 0..n {
            st = st.step(&self.params);
            out.push(st);
        }
        out
    }

    /// Traces `sqrt(delta) a(gamma^k lambda) + d(gamma^k lambda) / sqrt(delta)`, `k < n`.
    pub fn tilde_traces(&self, lambda: f64, n: usize) -> Vec<f64> {
        let s = self.params.sqrt_delta();
        self.forward_orbit(lambda, n.saturating_sub(1))
            .iter()
            .take(n)
            .map(|st| {
                let p = st.affine();
                s * p.x + p.y / s
            })
            .collect()
    }

    /// `Pi_<n>(lambda)`.
    pub fn trace_product(&self, lambda: f64, n: usize) -> TraceProduct {
        let value = self.tilde_traces(lambda, n).iter().product();
        TraceProduct { lambda, n, value }
    }

    /// `Gamma~_<n>, lambda` from the trace product.
    pub fn tilde_gamma(&self, lambda: f64, n: usize) -> Result<Mat2<f64>> {
        let e = self.entries(lambda)?;
        let top = self.forward_orbit(lambda, n)[n].affine();
        let pi = self.trace_product(lambda, n).value;
        let s = self.params.sqrt_delta();
        Ok(Mat2::new(s * top.x, s * e.b * pi, e.c * pi / s, top.y / s))
    }

    /// `Gamma~_<n>` by conjugating `Gamma_<n>`:
    /// `sqrt(delta) D_delta^{-1} D_{sqrt delta}^{-n} Gamma_<n> D_{sqrt delta}^n`.
    pub fn tilde_gamma_by_conjugation(&self, lambda: f64, n: usize) -> Result<Mat2<f64>> {
        let g = self.gamma_n(lambda, n)?;
        let s = self.params.sqrt_delta();
        let sn = s.powi(n as i32);
        let conj = Mat2::d_scale(1.0 / sn) * g * Mat2::d_scale(sn);
        let m = Mat2::d_scale(1.0 / self.params.delta) * conj;
        Ok(Mat2::new(s * m.m[0][0], s * m.m[0][1], s * m.m[1][0], s * m.m[1][1]))
    }
}

fn factor<T: Scalar>(st: &OrbitState<T>, alpha: f64, inv: f64) -> T {
    let (u, v) = st.deviation();
    T::one() + (u + v.scale(inv)).scale(alpha)
}

fn deviation_gap<T: Scalar>(a: &OrbitState<T>, b: &OrbitState<T>) -> f64 {
    let (ua, va) = a.deviation();
    let (ub, vb) = b.deviation();
    (ua - ub).modulus().hypot((va - vb).modulus())
}

/// `phi(lambda)` with a default configuration.
pub fn phi<T: Scalar>(lambda: T, params: &ModelParams, tol: f64) -> Result<PhiPoint<T>> {
    let r = Renormalizer::with_config(
        *params,
        PhiConfig {
            tol,
            ..Default::default()
        },
    )?;
    Ok(r.phi(lambda))
}

/// `Gamma_lambda` entries with a default configuration.
pub fn entries<T: Scalar>(lambda: T, params: &ModelParams, tol: f64) -> Result<PropagatorEntries<T>> {
    let r = Renormalizer::with_config(
        *params,
        PhiConfig {
            tol,
            ..Default::default()
        },
    )?;
    r.entries(lambda)
}

/// Semiconjugacy residual `|f(phi(lambda)) - phi(gamma lambda)|` relative to
/// `1 + |phi(gamma lambda)|`.
pub fn semiconjugacy_residual(r: &Renormalizer, map_params: &ModelParams, lambda: f64) -> f64 {
    let p = r.phi(lambda).point();
    let q = r.phi(lambda * r.params.gamma).point();
    f_affine(p, map_params).dist(&q) / (1.0 + q.norm())
}
