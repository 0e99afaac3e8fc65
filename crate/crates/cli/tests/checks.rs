use vlc_secrecy_cli::checks::{self, Family};

#[test]
fn qp_suite_across_seeds() {
    // Seed 7 once produced a false infeasibility certificate.
    for seed in [1, 7, 2024] {
        let q = checks::qp_suite(100, seed).unwrap();
        assert_eq!(q.non_optimal, 0, "seed {seed}");
        assert!(q.kkt <= 1e-8 && q.oracle <= 1e-6 && q.min_slack >= -1e-8, "seed {seed}: {q:?}");
    }
}

#[test]
fn gradient_suites_detect_perturbation() {
    for fam in Family::ALL {
        assert!(checks::gradient_error(fam, 10, 3, 0.0).unwrap() <= 1e-5, "{fam:?}");
        assert!(checks::gradient_error(fam, 10, 3, 1e-3).unwrap() > 1e-4, "{fam:?}");
    }
}

#[test]
fn surrogate_and_matops_suites() {
    let s = checks::surrogate_contract(12, 5, 1e-5).unwrap();
    assert!(s.value <= 1e-10 && s.gradient <= 1e-8 && s.curvature_margin >= -1e-10, "{s:?}");
    let m = checks::matops_suite(5).unwrap();
    assert_eq!(m.commutation, 0.0);
    assert!(m.psd_min_eigenvalue >= -1e-12 && m.psd_idempotence <= 1e-12 && m.kron_mixed_product <= 1e-12);
}

#[test]
fn intensity_suites() {
    assert!(checks::uniform_limit_error().unwrap() <= 1e-8);
    assert!(checks::quadrature_error(&checks::QUADRATURE_ALPHAS).unwrap() <= 1e-6);
}
