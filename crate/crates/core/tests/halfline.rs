use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use renorm_core::halfline::*;
use renorm_core::model::{derive_params, BlowupPrefix, ModelParams};
use renorm_core::propagator::Renormalizer;
use renorm_core::spectral::{find_s, support_points, ClassifyConfig, RootSearch, RootSet};
use renorm_core::string_oracle::{discretize, Boundary, Scheme};

fn setup(alpha: f64) -> (ModelParams, Renormalizer, RootSet) {
    let p = derive_params(alpha).unwrap();
    let r = Renormalizer::new(p).unwrap();
    let rs = find_s(&r, (-400.0, 0.0), &RootSearch::default()).unwrap();
    (p, r, rs)
}

#[test]
fn coefficients_match_diagonal_propagator() {
    let (p, r, rs) = setup(2.0 / 3.0);
    let l1 = rs.get(1).unwrap();
    for n in 1..=4 {
        let g = r.gamma_n(l1, n).unwrap();
        let b = extension_coeff(Boundary::Neumann, n, &p).value();
        assert!(g.m[0][1].abs() < 1e-7 && g.m[1][0].abs() < 1e-7);
        assert!((g.m[0][0] - b).abs() < 1e-7);
        assert!((g.m[1][1] - 1.0 / b).abs() < 1e-7 / b);
    }
}

#[test]
fn first_copy_is_scaled_translate() {
    let (p, _, rs) = setup(2.0 / 3.0);
    let rep = build_eigenfunction(&rs, 1, 0, Boundary::Neumann, 1, 10).unwrap();
    for i in 0..=20 {
        let y = i as f64 / 20.0;
        let x = 1.0 + y / p.delta;
        let want = -rep.value(y, &p) / p.delta;
        assert!((rep.value(x, &p) - want).abs() < 1e-12, "{x}");
    }
}

#[test]
fn dirichlet_base_vanishes_at_one() {
    for alpha in [1.0 / 3.0, 0.5, 2.0 / 3.0] {
        let (p, _, rs) = setup(alpha);
        for k in 1..=3 {
            let rep = build_eigenfunction(&rs, k, 0, Boundary::Dirichlet, 0, 10).unwrap();
            assert!(rep.base_end[0].abs() < 1e-8, "alpha {alpha} k {k}: {}", rep.base_end[0]);
            assert!(rep.value(0.0, &p).abs() < 1e-15);
        }
    }
}

#[test]
fn norm_ladder_identity() {
    for alpha in [1.0 / 3.0, 0.5, 2.0 / 3.0] {
        let (p, _, rs) = setup(alpha);
        for b in [Boundary::Neumann, Boundary::Dirichlet] {
            let rep = build_eigenfunction(&rs, 1, 0, b, 6, 10).unwrap();
            assert!(rep.junction_defect <= JUNCTION_TOL);
            let ns = norm_series(&rep, &p, 6).unwrap();
            assert_eq!(ns.quadrature_ratios.len(), 6);
            assert!(ns.max_ratio_error <= 1e-6, "alpha {alpha} {b:?}: {}", ns.max_ratio_error);
        }
    }
    let two = derive_params(2.0 / 3.0).unwrap();
    let want = [1.5, 1.125, 1.0078125];
    for (n, w) in want.iter().enumerate() {
        assert!((log_norm_ratio(Boundary::Neumann, n, &two).exp() - w).abs() < 1e-14);
    }
}

#[test]
fn dichotomy_and_mirror() {
    for alpha in [0.25, 1.0 / 3.0, 0.45, 0.55, 2.0 / 3.0, 0.75] {
        let p = derive_params(alpha).unwrap();
        let neu = norm_verdict(Boundary::Neumann, &p).0;
        let dir = norm_verdict(Boundary::Dirichlet, &p).0;
        let pure = p.delta > 1.0;
        assert_eq!(neu == NormVerdict::SquareSummable, pure);
        assert_eq!(dir == NormVerdict::SquareSummable, !pure);
        let m = derive_params(1.0 - alpha).unwrap();
        assert_eq!(norm_verdict(Boundary::Dirichlet, &m).0, neu);
        assert_eq!(norm_verdict(Boundary::Neumann, &m).0, dir);
    }
}

#[test]
fn parseval_and_alignment() {
    let (p, _, rs) = setup(0.5);
    let n = 2;
    let s = discretize(&p, &BlowupPrefix::ones(n), 10, Scheme::Barycenter);
    let reps: Vec<_> = (1..=2)
        .flat_map(|k| (-2..=0).map(move |pp| (k, pp)))
        .map(|(k, pp)| build_eigenfunction(&rs, k, pp, Boundary::Neumann, n, 10 - n).unwrap())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g: Vec<f64> = s
        .positions
        .iter()
        .map(|&x| if x <= 1.0 { rng.gen_range(-1.0..1.0) } else { 0.0 })
        .collect();
    let rep = parseval_check(&p, &s, Boundary::Neumann, &g, &reps).unwrap();
    assert!(rep.relative_residual <= 1e-8);
    assert!(rep.alignments.iter().all(|a| a.2 >= 0.999), "{:?}", rep.alignments);
    assert!(rep.tail.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn support_g_is_required() {
    let p = derive_params(0.5).unwrap();
    let s = discretize(&p, &BlowupPrefix::ones(1), 6, Scheme::Barycenter);
    let g = vec![1.0; s.len()];
    assert!(parseval_check(&p, &s, Boundary::Neumann, &g, &[]).is_err());
}

#[test]
fn recursion_and_forms() {
    let (p, r, rs) = setup(2.0 / 3.0);
    let cfg = ClassifyConfig::default();
    let xs = [[1.0, 0.0], [0.0, 1.0], [0.6, -0.8], [2.0, 3.0]];
    for &l in support_points(&r, &rs, 3, &cfg).iter() {
        for n in 0..=8 {
            let (plain, tilde) = recursion_residuals(&p, n, l, 8, &xs);
            assert!(plain <= 1e-6 && tilde <= 1e-6, "n {n}: {plain} {tilde}");
            assert!(quadratic_form(&p, n, l, 8).is_positive());
        }
    }
    let half = derive_params(0.5).unwrap();
    let q = quadratic_form(&half, 0, 0.0, 12);
    assert!((q.k.m[1][1] - 1.0 / 3.0).abs() < 1e-7);
}

#[test]
fn trace_subsequence_lebesgue() {
    let p = derive_params(0.5).unwrap();
    let r = Renormalizer::new(p).unwrap();
    let ts = trace_subsequence(&r, -4.0, 20, &ClassifyConfig::default()).unwrap();
    assert!(!ts.indices.is_empty());
    for &n in &ts.indices {
        // tr of the level n-1 tilde propagator is 2 cos(2^n).
        let want = (2.0 * (2f64.powi(n as i32)).cos()).abs();
        assert!((ts.traces[n - 1] - want).abs() < 1e-6, "{n}");
    }
}

#[test]
fn gap_points_are_rejected() {
    let (_, r, rs) = setup(2.0 / 3.0);
    let l1 = rs.get(1).unwrap();
    assert!(trace_subsequence(&r, l1, 10, &ClassifyConfig::default()).is_err());
}
