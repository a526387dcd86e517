//! Point-mass (Stieltjes string) discretization of the measure, used as an
//! independent oracle.
//!
//! Propagators are exact transfer-matrix products over the string. Spectra
//! of the finite operators come from Sturm counts of the symmetrized
//! tridiagonal matrix, bisection, and inverse iteration.

use crate::error::{Error, Result};
use crate::model::{blowup_map, total_mass, BlowupPrefix, ModelParams};
use crate::scalar::{Mat2, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Where a cell's mass is placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Cell midpoint.
    Midpoint,
    /// Cell left endpoint. The first mass then sits on the boundary, so only
    /// Neumann operators can be built from such strings.
    LeftEndpoint,
    /// Center of mass of the cell, `l + M (r - l)` with `M` the first moment.
    #[default]
    Barycenter,
}

/// Point masses on `I_<n>(omega)`, one per cell of word length `level`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteString {
    pub positions: Vec<f64>,
    pub masses: Vec<f64>,
    pub left: f64,
    pub right: f64,
    /// Word length of the cells.
    pub level: usize,
    /// Number of blow-up symbols applied to `I`.
    pub blowup_depth: usize,
}

impl DiscreteString {
    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Propagator over the whole domain.
    pub fn propagate_full<T: Scalar>(&self, lambda: T) -> Mat2<T> {
        propagate(self, lambda, self.left, self.right)
    }
}

/// One mass per cell `psi_{j_1} ∘ ... ∘ psi_{j_level}(I)`, mapped into
/// `I_<n>(omega)` with `n = prefix.len()`.
///
/// Cells are produced in increasing position order.
pub fn discretize(
    params: &ModelParams,
    prefix: &BlowupPrefix,
    level: usize,
    scheme: Scheme,
) -> DiscreteString {
    let map = blowup_map(params, &prefix.symbols);
    let left = map.apply(0.0);
    let right = map.apply(1.0);
    let mass0 = total_mass(params, &prefix.symbols);

    let mut cells: Vec<(f64, f64, f64)> = vec![(left, right, mass0)];
    for _ in 0..level {
        let mut next = Vec::with_capacity(cells.len() * 2);
        for &(l, r, m) in &cells {
            let cut = l + params.alpha * (r - l);
            next.push((l, cut, m * params.w1));
            next.push((cut, r, m * params.w2));
        }
        cells = next;
    }

    let (positions, masses) = cells
        .iter()
        .map(|&(l, r, m)| {
            let x = match scheme {
                Scheme::Midpoint => 0.5 * (l + r),
                Scheme::LeftEndpoint => l,
                Scheme::Barycenter => l + params.first_moment * (r - l),
            };
            (x, m)
        })
        .unzip();

    DiscreteString {
        positions,
        masses,
        left,
        right,
        level,
        blowup_depth: prefix.len(),
    }
}

/// Transfer matrix from `s` to `t` (`s < t`), mapping `(f, f')` at `s` to
/// `(f, f')` at `t`. Masses strictly inside `(s, t)` are included; the
/// product is accumulated left to right.
pub fn propagate<T: Scalar>(string: &DiscreteString, lambda: T, s: f64, t: f64) -> Mat2<T> {
    let mut m = Mat2::<T>::identity();
    let mut x = s;
    for (&pos, &w) in string.positions.iter().zip(&string.masses) {
        if pos <= s {
            continue;
        }
        if pos >= t {
            break;
        }
        gap(&mut m, pos - x);
        kick(&mut m, lambda * T::from_f64(w));
        x = pos;
    }
    gap(&mut m, t - x);
    m
}

#[inline]
fn gap<T: Scalar>(m: &mut Mat2<T>, len: f64) {
    let l = T::from_f64(len);
    for c in 0..2 {
        let lower = m.m[1][c];
        m.m[0][c] += l * lower;
    }
}

#[inline]
fn kick<T: Scalar>(m: &mut Mat2<T>, lw: T) {
    for c in 0..2 {
        let upper = m.m[0][c];
        m.m[1][c] += lw * upper;
    }
}

/// Values `f(x_i)` at every mass of the solution with `(f, f')(left) = init`,
/// plus the end data `(f, f')(right)`.
pub fn solution_values(string: &DiscreteString, lambda: f64, init: [f64; 2]) -> (Vec<f64>, [f64; 2]) {
    let mut f = init[0];
    let mut df = init[1];
    let mut x = string.left;
    let mut values = Vec::with_capacity(string.len());
    for (&pos, &w) in string.positions.iter().zip(&string.masses) {
        f += (pos - x) * df;
        values.push(f);
        df += lambda * w * f;
        x = pos;
    }
    f += (string.right - x) * df;
    (values, [f, df])
}

/// Boundary condition at both ends of the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    Neumann,
    Dirichlet,
}

impl Boundary {
    /// The other condition.
    pub fn swapped(self) -> Boundary {
        match self {
            Boundary::Neumann => Boundary::Dirichlet,
            Boundary::Dirichlet => Boundary::Neumann,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Boundary::Neumann => "neumann",
            Boundary::Dirichlet => "dirichlet",
        }
    }
}

/// Finite string operator `A = M^{-1} L` stored in the symmetric form
/// `S = M^{-1/2} L M^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    pub diagonal: Vec<f64>,
    /// Symmetrized off-diagonal, length `n - 1`.
    pub off_diagonal: Vec<f64>,
    pub masses: Vec<f64>,
    pub boundary: Boundary,
}

impl TridiagonalOperator {
    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    /// Gershgorin enclosure `(lower, upper)` of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off_diagonal[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off_diagonal[i].abs();
            }
            lo = lo.min(self.diagonal[i] - r);
            hi = hi.max(self.diagonal[i] + r);
        }
        (lo, hi)
    }

    /// Max-row-sum norm of `S`.
    pub fn norm(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    /// `S x` in the symmetric coordinates.
    pub fn apply_sym(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut y = self.diagonal[i] * x[i];
                if i > 0 {
                    y += self.off_diagonal[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.off_diagonal[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// `A f = M^{-1} L f` in the original (nodal value) coordinates.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let sq: Vec<f64> = self.masses.iter().map(|m| m.sqrt()).collect();
        let u: Vec<f64> = f.iter().zip(&sq).map(|(v, s)| v * s).collect();
        self.apply_sym(&u)
            .iter()
            .zip(&sq)
            .map(|(v, s)| v / s)
            .collect()
    }
}

/// Assemble the string operator with the given boundary condition.
pub fn build_operator(string: &DiscreteString, boundary: Boundary) -> Result<TridiagonalOperator> {
    let n = string.len();
    if n == 0 {
        return Err(Error::Precondition("string carries no masses".into()));
    }
    let x = &string.positions;
    let m = &string.masses;
    let cond: Vec<f64> = x.windows(2).map(|w| 1.0 / (w[1] - w[0])).collect();
    let (left_link, right_link) = match boundary {
        Boundary::Neumann => (0.0, 0.0),
        Boundary::Dirichlet => {
            let l = x[0] - string.left;
            let r = string.right - x[n - 1];
            if l <= 0.0 || r <= 0.0 {
                return Err(Error::Precondition(
                    "Dirichlet operator needs masses strictly inside the domain".into(),
                ));
            }
            (1.0 / l, 1.0 / r)
        }
    };

    let mut diagonal = Vec::with_capacity(n);
    for i in 0..n {
        let lc = if i == 0 { left_link } else { cond[i - 1] };
        let rc = if i + 1 == n { right_link } else { cond[i] };
        diagonal.push(-(lc + rc) / m[i]);
    }
    let off_diagonal = (0..n.saturating_sub(1))
        .map(|i| cond[i] / (m[i] * m[i + 1]).sqrt())
        .collect();

    Ok(TridiagonalOperator {
        diagonal,
        off_diagonal,
        masses: m.clone(),
        boundary,
    })
}

const PIVOT_FLOOR: f64 = 1e-300;

fn sturm_negatives(op: &TridiagonalOperator, lambda: f64) -> Option<usize> {
    let mut count = 0;
    let mut q = op.diagonal[0] - lambda;
    if q.abs() < PIVOT_FLOOR {
        return None;
    }
    if q < 0.0 {
        count += 1;
    }
    for i in 1..op.dim() {
        let e = op.off_diagonal[i - 1];
        q = (op.diagonal[i] - lambda) - e * e / q;
        if q.abs() < PIVOT_FLOOR || !q.is_finite() {
            return None;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    Some(count)
}

/// Number of eigenvalues strictly below `lambda`.
///
/// A vanishing pivot moves `lambda` by `1e-9 (1 + |lambda|)` and retries.
pub fn eigen_count(op: &TridiagonalOperator, lambda: f64) -> usize {
    let mut x = lambda;
    for _ in 0..64 {
        if let Some(c) = sturm_negatives(op, x) {
            return c;
        }
        x += 1e-9 * (1.0 + x.abs());
    }
    // Unreachable in practice: 64 consecutive exact singular pivots.
    sturm_negatives(op, x + 1e-6 * (1.0 + x.abs())).unwrap_or(0)
}

/// Eigenvalue with an optional mass-orthonormal eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    /// Nodal values `f_i` with `sum m_i f_i^2 = 1`.
    pub vector: Option<Vec<f64>>,
    /// `||S u - rho u|| / ||S||` of the symmetric eigenvector.
    pub residual: f64,
    pub converged: bool,
}

impl Eigenpair {
    /// Error for eigenpairs whose inverse iteration failed.
    pub fn check(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::InverseIteration {
                value: self.value,
                residual: self.residual,
            })
        }
    }
}

/// Settings for [`eigen_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Absolute bisection tolerance.
    pub tol: f64,
    pub vectors: bool,
    pub max_iter: usize,
    pub residual_tol: f64,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            vectors: false,
            max_iter: 50,
            residual_tol: 1e-10,
            seed: 0x5eed,
        }
    }
}

/// All eigenvalues in the half-open window `[a, b)`, ascending.
pub fn eigen_solve(op: &TridiagonalOperator, window: (f64, f64), opts: &SolveOptions) -> Vec<Eigenpair> {
    let (a, b) = window;
    if !(a < b) {
        return Vec::new();
    }
    let scale = op.norm().max(1.0);
    let tol = opts.tol.max(4.0 * f64::EPSILON * a.abs().max(b.abs()));
    let (glo, ghi) = op.gershgorin();
    // Clipping to the Gershgorin disc does not change either count.
    let lo = a.max(glo - 1.0);
    let hi = b.min(ghi + 1.0);
    if !(lo < hi) {
        return Vec::new();
    }
    // Eigenvalues in [a, b) are those with index in [count(a), count(b)).
    let c_lo = eigen_count(op, lo);
    let c_hi = eigen_count(op, hi);
    let mut values = Vec::with_capacity(c_hi.saturating_sub(c_lo));
    bisect_all(op, lo, hi, c_lo, c_hi, tol, &mut values);

    if !opts.vectors {
        return values
            .into_iter()
            .map(|value| Eigenpair {
                value,
                vector: None,
                residual: 0.0,
                converged: true,
            })
            .collect();
    }
    inverse_iteration(op, &values, scale, opts)
}

fn bisect_all(
    op: &TridiagonalOperator,
    lo: f64,
    hi: f64,
    c_lo: usize,
    c_hi: usize,
    tol: f64,
    out: &mut Vec<f64>,
) {
    if c_hi <= c_lo {
        return;
    }
    let mid = 0.5 * (lo + hi);
    if hi - lo <= tol || mid <= lo || mid >= hi {
        for _ in c_lo..c_hi {
            out.push(mid);
        }
        return;
    }
    let c_mid = eigen_count(op, mid).clamp(c_lo, c_hi);
    bisect_all(op, lo, mid, c_lo, c_mid, tol, out);
    bisect_all(op, mid, hi, c_mid, c_hi, tol, out);
}

/// LU factorization with partial pivoting of a tridiagonal matrix
/// (`sub`, `diag`, `sup`), stored as in LAPACK `dgttrf`.
struct TriLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TriLu {
    fn factor(sub: &[f64], diag: &[f64], sup: &[f64], pivmin: f64) -> TriLu {
        let n = diag.len();
        let mut dl = sub.to_vec();
        let mut d = diag.to_vec();
        let mut du = sup.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i].abs() < pivmin {
                    d[i] = pivmin;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if n > 0 && d[n - 1].abs() < pivmin {
            d[n - 1] = pivmin;
        }
        TriLu {
            dl,
            d,
            du,
            du2,
            swapped,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= self.dl[i] * b[i];
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nrm > 0.0 {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
    nrm
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inverse_iteration(
    op: &TridiagonalOperator,
    values: &[f64],
    scale: f64,
    opts: &SolveOptions,
) -> Vec<Eigenpair> {
    let n = op.dim();
    let cluster_gap = 1e-3 * scale;
    let sep = 10.0 * f64::EPSILON * scale;
    let pivmin = f64::EPSILON * scale * 1e-3;
    let sqm: Vec<f64> = op.masses.iter().map(|m| m.sqrt()).collect();

    let mut out: Vec<Eigenpair> = Vec::with_capacity(values.len());
    let mut sym_vectors: Vec<Vec<f64>> = Vec::with_capacity(values.len());
    let mut cluster_start = 0;
    let mut prev_shift = f64::NEG_INFINITY;

    for (j, &value) in values.iter().enumerate() {
        if j > 0 && value - values[j - 1] > cluster_gap {
            cluster_start = j;
        }
        let mut shift = value;
        if j > cluster_start && shift - prev_shift < sep {
            shift = prev_shift + sep;
        }
        prev_shift = shift;

        let diag: Vec<f64> = op.diagonal.iter().map(|d| d - shift).collect();
        let lu = TriLu::factor(&op.off_diagonal, &diag, &op.off_diagonal, pivmin);

        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (j as u64).wrapping_mul(0x9e37_79b9));
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        normalize(&mut x);

        let mut residual = f64::INFINITY;
        let mut converged = false;
        let mut extra = 0;
        for _ in 0..opts.max_iter {
            lu.solve(&mut x);
            for prev in &sym_vectors[cluster_start..j] {
                let c = dot(&x, prev);
                x.iter_mut().zip(prev).for_each(|(xi, pi)| *xi -= c * pi);
            }
            if normalize(&mut x) == 0.0 || x.iter().any(|v| !v.is_finite()) {
                x = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                normalize(&mut x);
                continue;
            }
            let sx = op.apply_sym(&x);
            let rho = dot(&x, &sx);
            residual = sx
                .iter()
                .zip(&x)
                .map(|(s, v)| (s - rho * v).powi(2))
                .sum::<f64>()
                .sqrt()
                / scale;
            if residual <= opts.residual_tol {
                converged = true;
                extra += 1;
                if extra >= 2 {
                    break;
                }
            }
        }

        // Fix the sign so the largest component is positive.
        let (imax, _) = x
            .iter()
            .enumerate()
            .fold((0, 0.0), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
        if x[imax] < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        let nodal: Vec<f64> = x.iter().zip(&sqm).map(|(u, s)| u / s).collect();
        sym_vectors.push(x);
        out.push(Eigenpair {
            value,
            vector: Some(nodal),
            residual,
            converged,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::derive_params;
    use num_complex::Complex64;

    fn lebesgue(level: usize) -> DiscreteString {
        discretize(&derive_params(0.5).unwrap(), &BlowupPrefix::trivial(), level, Scheme::Barycenter)
    }

    #[test]
    fn discretize_examples() {
        let s = lebesgue(1);
        assert_eq!(s.positions, vec![0.25, 0.75]);
        assert_eq!(s.masses, vec![0.5, 0.5]);
        let p = derive_params(1.0 / 3.0).unwrap();
        let s = discretize(&p, &BlowupPrefix::trivial(), 1, Scheme::Midpoint);
        assert!((s.positions[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((s.positions[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.masses[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.masses[1] - 1.0 / 3.0).abs() < 1e-15);
        let s = discretize(&p, &BlowupPrefix::trivial(), 0, Scheme::Midpoint);
        assert_eq!(s.masses, vec![1.0]);
        assert_eq!(s.positions, vec![0.5]);
        // Barycenters reproduce the first moment at every depth.
        for level in 0..6 {
            let s = discretize(&p, &BlowupPrefix::trivial(), level, Scheme::Barycenter);
            let m: f64 = s.positions.iter().zip(&s.masses).map(|(x, w)| x * w).sum();
            assert!((m - p.first_moment).abs() < 1e-15);
        }
    }

    #[test]
    fn single_mass_propagator() {
        let s = lebesgue(0);
        let lam = -3.0;
        let g = s.propagate_full(lam);
        let want = Mat2::new(1.0 + lam / 2.0, 1.0 + lam / 4.0, lam, 1.0 + lam / 2.0);
        assert!(g.sub(&want).max_abs() < 1e-15);
        let g0 = s.propagate_full(0.0);
        assert!(g0.sub(&Mat2::new(1.0, 1.0, 0.0, 1.0)).max_abs() < 1e-15);
    }

    #[test]
    fn complex_matches_real_on_axis() {
        let s = lebesgue(6);
        let r = s.propagate_full(-7.5);
        let c = s.propagate_full(Complex64::new(-7.5, 0.0));
        for i in 0..2 {
            for j in 0..2 {
                assert!((r.m[i][j] - c.m[i][j].re).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn two_by_two_operators() {
        let s = lebesgue(1);
        let op = build_operator(&s, Boundary::Neumann).unwrap();
        let ev: Vec<f64> = eigen_solve(&op, (-100.0, 1.0), &SolveOptions::default())
            .iter()
            .map(|e| e.value)
            .collect();
        assert_eq!(ev.len(), 2);
        assert!((ev[0] + 8.0).abs() < 1e-9 && ev[1].abs() < 1e-9);
        assert_eq!(eigen_count(&op, -1.0), 1);
        let op = build_operator(&s, Boundary::Dirichlet).unwrap();
        let ev: Vec<f64> = eigen_solve(&op, (-100.0, 0.0), &SolveOptions::default())
            .iter()
            .map(|e| e.value)
            .collect();
        assert!((ev[0] + 16.0).abs() < 1e-9 && (ev[1] + 8.0).abs() < 1e-9);
    }

    #[test]
    fn neumann_constant_mode() {
        let p = derive_params(0.3).unwrap();
        let s = discretize(&p, &BlowupPrefix::ones(2), 7, Scheme::Barycenter);
        let op = build_operator(&s, Boundary::Neumann).unwrap();
        let af = op.apply(&vec![1.0; s.len()]);
        assert!(af.iter().all(|v| v.abs() < 1e-6 * op.norm()));
        assert_eq!(eigen_count(&op, 1.0), s.len());
        let (lo, _) = op.gershgorin();
        assert_eq!(eigen_count(&op, lo - 1.0), 0);
    }

    #[test]
    fn eigenvectors_are_mass_orthonormal() {
        let p = derive_params(2.0 / 3.0).unwrap();
        let s = discretize(&p, &BlowupPrefix::trivial(), 6, Scheme::Barycenter);
        let op = build_operator(&s, Boundary::Dirichlet).unwrap();
        let (lo, _) = op.gershgorin();
        let opts = SolveOptions {
            vectors: true,
            ..Default::default()
        };
        let pairs = eigen_solve(&op, (lo - 1.0, 0.0), &opts);
        assert_eq!(pairs.len(), s.len());
        for (i, a) in pairs.iter().enumerate() {
            assert!(a.converged, "pair {i} residual {}", a.residual);
            let va = a.vector.as_ref().unwrap();
            for b in &pairs[i..(i + 3).min(pairs.len())] {
                let vb = b.vector.as_ref().unwrap();
                let ip: f64 = va.iter().zip(vb).zip(&s.masses).map(|((x, y), m)| x * y * m).sum();
                let want = if std::ptr::eq(a, b) { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-8, "inner product {ip}");
            }
        }
    }
}
