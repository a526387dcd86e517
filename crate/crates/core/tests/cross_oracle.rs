use renorm_core::model::{derive_params, BlowupPrefix};
use renorm_core::propagator::Renormalizer;
use renorm_core::string_oracle::{discretize, Scheme};

fn max_gap(alpha: f64, level: usize, scheme: Scheme) -> f64 {
    let p = derive_params(alpha).unwrap();
    let r = Renormalizer::new(p).unwrap();
    let s = discretize(&p, &BlowupPrefix::trivial(), level, scheme);
    let mut worst = 0.0_f64;
    for i in 0..50 {
        let lam = -40.0 * i as f64 / 49.0;
        let g = s.propagate_full(lam);
        let e = r.entries(lam).unwrap().matrix();
        worst = worst.max(g.sub(&e).max_abs());
    }
    worst
}

#[test]
fn string_matches_renormalization() {
    for alpha in [1.0 / 3.0, 0.5, 2.0 / 3.0] {
        let w = max_gap(alpha, 14, Scheme::Barycenter);
        eprintln!("alpha {alpha}: {w:e}");
        assert!(w <= 1e-3, "alpha {alpha}: {w}");
    }
}
