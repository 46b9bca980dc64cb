use magws_core::dirac_triple::SparseOp;
use magws_core::dixmier_engine::{
    analytic_spectrum, calderon_norm, dixmier_estimate, dixmier_positive_operator, gamma_n, AnalyticKind,
    resolvent_dixmier_trace, CalderonOrder, FitModel, MatrixPathOptions,
};
use magws_core::{AlgebraElement, MagneticParams, C64};

const N_MAX: u64 = 1_000_000;

fn estimate(kind: AnalyticKind, eps: f64, model: FitModel) -> f64 {
    let spec = analytic_spectrum(kind, eps, N_MAX).unwrap();
    dixmier_estimate(&spec, N_MAX, model, f64::INFINITY).unwrap().extrapolated
}

#[test]
fn power_tail_reaches_the_exact_values() {
    let cases = [
        (AnalyticKind::QPower { s: 2.0 }, 0.5, 1e-3),
        (AnalyticKind::QInvProjection { j: 0 }, 1.0, 1e-4),
        (AnalyticKind::QInvProjection { j: 3 }, 1.0, 1e-4),
        (AnalyticKind::QInvUpsilon { j: 1, k: 1 }, 1.0, 1e-4),
        (AnalyticKind::DiracPower { s: 4.0 }, 2.0, 4e-3),
    ];
    for eps in [0.5, 1.0, 2.0] {
        for (kind, expected, tol) in cases {
            let v = estimate(kind, eps, FitModel::PowerTail);
            assert!((v - expected).abs() < tol, "{kind:?} eps={eps}: {v}");
        }
    }
}

#[test]
fn log_quadratic_is_biased_on_linear_multiplicities() {
    let exact = 0.5;
    let power = estimate(AnalyticKind::QPower { s: 2.0 }, 1.0, FitModel::PowerTail);
    let quad = estimate(AnalyticKind::QPower { s: 2.0 }, 1.0, FitModel::LogQuadratic);
    assert!((quad - exact).abs() > 10.0 * (power - exact).abs(), "{quad} vs {power}");
}

#[test]
fn transitions_trace_to_kronecker_delta() {
    let params = MagneticParams::default();
    for eps in [0.5, 1.0, 2.0] {
        for (j, k) in [(0, 2), (2, 2), (3, 1)] {
            let t = AlgebraElement::upsilon(j, k, 3, params).unwrap();
            let est = resolvent_dixmier_trace(&t, eps, N_MAX, FitModel::PowerTail).unwrap();
            let expected = if j == k { 1.0 } else { 0.0 };
            assert!((est.value - C64::new(expected, 0.0)).norm() < 1e-4, "({j},{k}) eps={eps}: {}", est.value);
        }
        // The singular values of an off-diagonal transition still form a
        // harmonic family, so |T| has Dixmier trace one.
        let abs = estimate(AnalyticKind::QInvUpsilon { j: 0, k: 2 }, eps, FitModel::PowerTail);
        assert!((abs - 1.0).abs() < 1e-4);
    }
}

#[test]
fn calderon_one_plus_exceeds_one_at_small_n() {
    // sigma_2 / log 2 for Q_1^{-1} Pi_0 is (1/2 + 1/3) / log 2, above one,
    // while gamma_N itself decreases toward the Dixmier trace 1.
    let spec = analytic_spectrum(AnalyticKind::QInvProjection { j: 0 }, 1.0, 1 << 16).unwrap();
    let norm = calderon_norm(&spec, CalderonOrder::OnePlus).unwrap();
    assert_eq!(norm.attained_at, 2);
    assert!((norm.value - (0.5 + 1.0 / 3.0) / 2f64.ln()).abs() < 1e-12);
    assert!(!norm.possibly_divergent);
    assert!(gamma_n(&spec, 1 << 16).unwrap() < norm.value);
}

#[test]
fn calderon_two_plus_is_finite_for_transitions() {
    let spec = analytic_spectrum(
        AnalyticKind::QHalfUpsilonQHalf { j: 0, k: 3, eps_prime: 1.0 },
        1.0,
        1 << 16,
    )
    .unwrap();
    let norm = calderon_norm(&spec, CalderonOrder::TwoPlus).unwrap();
    assert!(norm.value < 2.0);
}

#[test]
fn materialised_operator_matches_the_analytic_path() {
    let eps = 1.0;
    let mut diag = Vec::new();
    let mut j = 0usize;
    while diag.len() < 50_000 {
        let v = (j as f64 + 1.0 + eps).powi(-2);
        diag.extend(std::iter::repeat_n(C64::new(v, 0.0), j + 1));
        j += 1;
    }
    let op = SparseOp::diagonal(&diag);
    let opts = MatrixPathOptions {
        n_max: 4096,
        model: FitModel::PowerTail,
        max_component: 1,
        ..MatrixPathOptions::default()
    };
    let matrix = dixmier_positive_operator(&op, &opts).unwrap();
    let spec = analytic_spectrum(AnalyticKind::QPower { s: 2.0 }, eps, 4096).unwrap();
    let analytic = dixmier_estimate(&spec, 4096, FitModel::PowerTail, f64::INFINITY).unwrap();
    assert!((matrix.extrapolated - analytic.extrapolated).abs() < 1e-10);
    assert!((matrix.extrapolated - 0.5).abs() < 0.01);
}

#[test]
fn fit_model_names_round_trip() {
    for m in [FitModel::LogQuadratic, FitModel::HarmonicTail, FitModel::PowerTail] {
        assert_eq!(FitModel::parse(m.name()).unwrap(), m);
    }
    assert!(FitModel::parse("cubic").is_err());
}

#[test]
fn fitted_limit_is_stable_in_the_depth() {
    let kinds = [
        AnalyticKind::QPower { s: 2.0 },
        AnalyticKind::QInvProjection { j: 0 },
        AnalyticKind::QInvProjection { j: 3 },
        AnalyticKind::DiracPower { s: 4.0 },
    ];
    for kind in kinds {
        let mut fits = Vec::new();
        for n_max in [10_000u64, 100_000, 1_000_000] {
            let spec = analytic_spectrum(kind, 1.0, n_max).unwrap();
            fits.push(dixmier_estimate(&spec, n_max, FitModel::PowerTail, f64::INFINITY).unwrap());
        }
        let deepest = &fits[2];
        for shallow in &fits[..2] {
            let gap = (shallow.extrapolated - deepest.extrapolated).abs();
            let allowed = 5.0 * (shallow.standard_error + deepest.standard_error) + 10.0 * shallow.model_residual;
            assert!(gap <= allowed, "{kind:?}: gap {gap:.3e} vs {allowed:.3e}");
        }
    }
}

#[test]
fn bounded_diagonal_factor_shrinks_gamma() {
    let depth = 20_000u64;
    let spec = analytic_spectrum(AnalyticKind::QPower { s: 1.0 }, 1.0, depth).unwrap();
    let values = spec.values(depth).unwrap();
    let norm_b = 0.9;
    let mut scaled: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, v)| v * norm_b * (0.5 + 0.5 * (i as f64).sin().abs()))
        .collect();
    scaled.sort_by(|a, b| b.total_cmp(a));
    let bt = magws_core::dixmier_engine::SingularSpectrum::from_values(scaled).unwrap();
    for n in [16u64, 256, 4096, depth] {
        assert!(gamma_n(&bt, n).unwrap() <= norm_b * gamma_n(&spec, n).unwrap() + 1e-12);
    }
}
