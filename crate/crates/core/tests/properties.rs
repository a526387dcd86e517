use num_complex::Complex64;
use proptest::prelude::*;
use renorm_core::halfline::{lemma45_check, log_norm_ratio};
use renorm_core::model::{
    blowup_map, cell_mass, derive_params, BlowupPrefix, CellAddress, Symbol, Tail,
};
use renorm_core::propagator::{semiconjugacy_residual, Renormalizer};
use renorm_core::renorm_map::{algebraic_invariants, r_lift, OrbitConfig};
use renorm_core::scalar::Mat2;
use renorm_core::spectral::lyapunov;
use renorm_core::string_oracle::{
    build_operator, discretize, eigen_count, Boundary, Scheme,
};

fn symbols(bits: &[bool]) -> Vec<Symbol> {
    bits.iter().map(|&b| if b { Symbol::Two } else { Symbol::One }).collect()
}

fn max_abs(v: &[f64; 3]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parameter_identities(alpha in 0.02f64..0.98) {
        let p = derive_params(alpha).unwrap();
        let one = (1.0 - alpha).powi(-2);
        prop_assert!((p.delta * p.gamma - one).abs() <= 1e-13 * one);
        prop_assert!((p.gamma - p.delta / (alpha * alpha)).abs() <= 1e-13 * p.gamma);
        prop_assert!((alpha * (1.0 + 1.0 / p.delta) - 1.0).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn cell_mass_additivity(
        alpha in 0.05f64..0.95,
        prefix in proptest::collection::vec(any::<bool>(), 0..6),
        word in proptest::collection::vec(any::<bool>(), 0..12),
    ) {
        let p = derive_params(alpha).unwrap();
        let pre = BlowupPrefix::new(symbols(&prefix), Tail::Undeclared);
        let w = symbols(&word);
        let parent = cell_mass(&p, &pre, &CellAddress::new(prefix.len(), w.clone())).unwrap();
        let kids: f64 = [Symbol::One, Symbol::Two]
            .iter()
            .map(|&s| {
                let mut child = w.clone();
                child.push(s);
                cell_mass(&p, &pre, &CellAddress::new(prefix.len(), child)).unwrap()
            })
            .sum();
        prop_assert!((parent - kids).abs() <= 1e-14 * parent);
    }

    #[test]
    fn blowup_nesting(alpha in 0.05f64..0.95, prefix in proptest::collection::vec(any::<bool>(), 1..12)) {
        let p = derive_params(alpha).unwrap();
        let s = symbols(&prefix);
        for n in 0..s.len() {
            let inner = blowup_map(&p, &s[..n]);
            let outer = blowup_map(&p, &s[..n + 1]);
            let (a, b) = (inner.apply(0.0), inner.apply(1.0));
            let (c, d) = (outer.apply(0.0), outer.apply(1.0));
            let tol = 1e-12 * (d - c);
            prop_assert!(c <= a + tol && b <= d + tol);
        }
    }

    #[test]
    fn string_unimodular(alpha in 0.1f64..0.9, lambda in -1e4f64..0.0, depth in 4usize..13) {
        let p = derive_params(alpha).unwrap();
        let s = discretize(&p, &BlowupPrefix::trivial(), depth, Scheme::Barycenter);
        let g = s.propagate_full(lambda);
        prop_assert!((g.det() - 1.0).abs() <= 1e-10 * g.max_abs().max(1.0).powi(2));
    }

    #[test]
    fn string_herglotz(alpha in 0.1f64..0.9, re in -200f64..50.0, im in 1e-3f64..50.0) {
        let p = derive_params(alpha).unwrap();
        let s = discretize(&p, &BlowupPrefix::trivial(), 8, Scheme::Barycenter);
        let g = s.propagate_full(Complex64::new(re, im));
        prop_assert!((g.m[0][0].conj() * g.m[1][0]).im > 0.0);
    }

    #[test]
    fn eigen_count_monotone_additive(alpha in 0.1f64..0.9, a in -3000f64..-1.0, t in 0.0f64..1.0, u in 0.0f64..1.0) {
        let p = derive_params(alpha).unwrap();
        let s = discretize(&p, &BlowupPrefix::ones(2), 8, Scheme::Barycenter);
        let op = build_operator(&s, Boundary::Neumann).unwrap();
        let b = a * (1.0 - t);
        let c = b * (1.0 - u);
        let (na, nb, nc) = (eigen_count(&op, a), eigen_count(&op, b), eigen_count(&op, c));
        prop_assert!(na <= nb && nb <= nc);
        prop_assert_eq!(nc - na, (nb - na) + (nc - nb));
    }

    #[test]
    fn lift_is_homogeneous(alpha in 0.1f64..0.9, x in -5f64..5.0, y in -5f64..5.0, z in -5f64..5.0, t in -4f64..4.0) {
        let p = derive_params(alpha).unwrap();
        let a = r_lift([t * x, t * y, t * z], &p);
        let b = r_lift([x, y, z], &p);
        let scale = max_abs(&a).max(t * t * max_abs(&b)).max(1e-300);
        for i in 0..3 {
            prop_assert!((a[i] - t * t * b[i]).abs() <= 1e-14 * scale);
        }
    }

    #[test]
    fn r_form_identity(alpha in 0.1f64..0.9, x in -5f64..5.0, y in -5f64..5.0, z in -5f64..5.0) {
        let p = derive_params(alpha).unwrap();
        prop_assert!(algebraic_invariants([x, y, z], &p).relative_residual() <= 1e-9);
    }

    #[test]
    fn lemma45_random(
        k in (0.01f64..10.0, 0.01f64..10.0, 0.0f64..std::f64::consts::PI),
        g in (-1.9f64..1.9, -3f64..3.0, -1.5f64..1.5),
    ) {
        let (e1, e2, th) = k;
        let (c, s) = (th.cos(), th.sin());
        let rot = Mat2::new(c, -s, s, c);
        let form = rot * Mat2::new(e1, 0.0, 0.0, e2) * rot.transpose();
        let (a, cc, d) = g;
        prop_assume!(cc.abs() > 1e-2);
        let bb = (a * d - 1.0) / cc;
        let gamma = Mat2::new(a, bb, cc, d);
        prop_assume!(gamma.trace().abs() < 2.0);
        let report = lemma45_check(&form, &gamma).unwrap();
        prop_assert!(report.holds, "slack {}", report.slack);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn determinant_and_ratio(alpha in 0.15f64..0.85, lambda in -50f64..0.0) {
        let r = Renormalizer::new(derive_params(alpha).unwrap()).unwrap();
        let e = r.entries(lambda).unwrap();
        let det = e.a * e.d - e.b * e.c;
        prop_assert!((det - 1.0).abs() <= 1e-9);
        prop_assert!((e.c - lambda * e.b).abs() <= 1e-9 * e.c.abs().max(1e-300) + 1e-15);
    }

    #[test]
    fn semiconjugacy_holds(alpha in 0.15f64..0.85, lambda in -50f64..0.0) {
        let r = Renormalizer::new(derive_params(alpha).unwrap()).unwrap();
        prop_assert!(semiconjugacy_residual(&r, &r.params, lambda) <= 1e-8);
    }

    #[test]
    fn propagator_herglotz(alpha in 0.15f64..0.85, re in -40f64..10.0, im in 0.01f64..20.0) {
        let r = Renormalizer::new(derive_params(alpha).unwrap()).unwrap();
        let e = r.entries(Complex64::new(re, im)).unwrap();
        prop_assert!((e.a.conj() * e.c).im > 0.0);
    }

    #[test]
    fn lyapunov_doubles(alpha in 0.2f64..0.8, lambda in -30f64..-0.05) {
        let r = Renormalizer::new(derive_params(alpha).unwrap()).unwrap();
        let cfg = OrbitConfig::default();
        let z = lyapunov(&r, lambda, &cfg).unwrap().zeta;
        let zg = lyapunov(&r, r.params.gamma * lambda, &cfg).unwrap().zeta;
        prop_assert!((zg - 2.0 * z).abs() <= 1e-6, "{} vs {}", zg, 2.0 * z);
    }

    #[test]
    fn norm_ratio_above_one(alpha in 0.05f64..0.95, n in 0usize..30) {
        let p = derive_params(alpha).unwrap();
        for b in [Boundary::Neumann, Boundary::Dirichlet] {
            let l = log_norm_ratio(b, n, &p);
            prop_assert!(l >= 0.0 && l.is_finite());
        }
    }
}
