use magws_core::laguerre_basis::{laguerre_fn, KernelCoeffs, LagIndex, MagneticParams, Point, QuadGrid, C64};
use magws_core::magnetic_algebra::AlgebraElement;
use magws_core::nc_calculus::{integration_by_parts_residual, kernel_derivation, magnetic_momentum, nabla, Direction};
use magws_core::twisted_convolution::twisted_convolve;
use proptest::prelude::*;

const TOL: f64 = 1e-10;

fn params() -> MagneticParams {
    MagneticParams::new(1.3, 1.0).unwrap()
}

fn element(max_cutoff: usize) -> impl Strategy<Value = AlgebraElement> {
    (0..=max_cutoff).prop_flat_map(|cutoff| {
        let len = (cutoff + 1) * (cutoff + 1);
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), len).prop_map(move |vals| {
            let mut a = AlgebraElement::zeros(cutoff, params());
            for (i, (re, im)) in vals.into_iter().enumerate() {
                a.set(i / (cutoff + 1), i % (cutoff + 1), C64::new(re, im)).unwrap();
            }
            a
        })
    })
}

fn direction() -> impl Strategy<Value = Direction> {
    prop_oneof![Just(Direction::One), Just(Direction::Two)]
}

fn pad(a: &AlgebraElement, cutoff: usize) -> AlgebraElement {
    a.with_cutoff(cutoff.max(a.cutoff()))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, rng_seed: proptest::test_runner::RngSeed::Fixed(7), ..ProptestConfig::default() })]

    #[test]
    fn product_is_associative(a in element(5), b in element(5), c in element(5)) {
        let left = a.multiply(&b).unwrap().multiply(&c).unwrap();
        let right = a.multiply(&b.multiply(&c).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right) < TOL);
    }

    #[test]
    fn adjoint_reverses_products(a in element(5), b in element(5)) {
        let lhs = a.multiply(&b).unwrap().adjoint();
        let rhs = b.adjoint().multiply(&a.adjoint()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < TOL);
    }

    #[test]
    fn trace_is_cyclic(a in element(5), b in element(5)) {
        let ab = a.multiply(&b).unwrap().trace_b();
        let ba = b.multiply(&a).unwrap().trace_b();
        prop_assert!((ab - ba).norm() < TOL);
    }

    #[test]
    fn trace_of_square_is_positive(a in element(5)) {
        let t = a.adjoint().multiply(&a).unwrap().trace_b();
        prop_assert!(t.re >= 0.0 && t.im.abs() < TOL);
        prop_assert!((t.re - a.frobenius_norm().powi(2)).abs() < TOL);
    }

    #[test]
    fn kernel_round_trip(a in element(5)) {
        let back = AlgebraElement::from_kernel(&a.to_kernel());
        prop_assert!(back.max_abs_diff(&a) < TOL);
    }

    #[test]
    fn nabla_obeys_leibniz(a in element(4), b in element(4), dir in direction()) {
        let n = a.cutoff().max(b.cutoff()) + 1;
        let lhs = nabla(&a.multiply(&b).unwrap(), dir);
        let rhs = pad(&nabla(&a, dir), n).multiply(&pad(&b, n)).unwrap()
            .add(&pad(&a, n).multiply(&pad(&nabla(&b, dir), n)).unwrap()).unwrap();
        prop_assert!(pad(&lhs, n + 1).max_abs_diff(&pad(&rhs, n + 1)) < TOL);
    }

    #[test]
    fn nabla_commutes_with_adjoint(a in element(5), dir in direction()) {
        let lhs = nabla(&a.adjoint(), dir);
        let rhs = nabla(&a, dir).adjoint();
        prop_assert!(lhs.max_abs_diff(&rhs) < TOL);
    }

    #[test]
    fn nabla_has_zero_trace(a in element(5), dir in direction()) {
        prop_assert!(nabla(&a, dir).trace_b().norm() < TOL);
    }

    #[test]
    fn integration_by_parts(a in element(4), b in element(4), dir in direction()) {
        let n = a.cutoff().max(b.cutoff());
        let r = integration_by_parts_residual(&pad(&a, n), &pad(&b, n), dir).unwrap();
        prop_assert!(r < TOL);
    }

    #[test]
    fn derivations_commute(a in element(4)) {
        let d12 = nabla(&nabla(&a, Direction::Two), Direction::One);
        let d21 = nabla(&nabla(&a, Direction::One), Direction::Two);
        prop_assert!(d12.max_abs_diff(&d21) < TOL);
    }

    #[test]
    fn nabla_is_a_momentum_commutator(a in element(4)) {
        let n = a.cutoff() + 2;
        let l = params().ell_b;
        let k1 = magnetic_momentum(Direction::One, n, params());
        let k2 = magnetic_momentum(Direction::Two, n, params());
        let big = pad(&a, n);
        let via_k2 = k2.commutator(&big).unwrap().scaled(C64::new(0.0, -l));
        let via_k1 = k1.commutator(&big).unwrap().scaled(C64::new(0.0, l));
        let d1 = pad(&nabla(&a, Direction::One), n);
        let d2 = pad(&nabla(&a, Direction::Two), n);
        let interior = a.cutoff() + 1;
        for k in 0..=interior {
            for j in 0..=interior {
                prop_assert!((d1.get(k, j) - via_k2.get(k, j)).norm() < TOL);
                prop_assert!((d2.get(k, j) - via_k1.get(k, j)).norm() < TOL);
            }
        }
    }

    #[test]
    fn kernel_derivation_matches_nabla(a in element(4), dir in direction()) {
        let via_kernel = AlgebraElement::from_kernel(&kernel_derivation(&a.to_kernel(), dir));
        let direct = nabla(&a, dir);
        prop_assert!(pad(&via_kernel, direct.cutoff()).max_abs_diff(&pad(&direct, via_kernel.cutoff())) < TOL);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, rng_seed: proptest::test_runner::RngSeed::Fixed(11), ..ProptestConfig::default() })]

    #[test]
    fn product_lemma_at_random_points(
        k in 0usize..4, j in 0usize..4, n in 0usize..4, m in 0usize..4,
        x1 in -3.0f64..3.0, x2 in -3.0f64..3.0,
    ) {
        let p = params();
        let grid = QuadGrid::convolution_default(&p);
        let f = KernelCoeffs::basis(k, j, p);
        let g = KernelCoeffs::basis(n, m, p);
        let x: Point = [x1, x2];
        let conv = twisted_convolve(&f, &g, x, &grid, &p).value;
        let expected = if j == n {
            laguerre_fn(LagIndex::new(k, m), x, &p) / p.sqrt_two_pi_ell()
        } else {
            C64::new(0.0, 0.0)
        };
        prop_assert!((conv - expected).norm() < 1e-7, "{conv} vs {expected}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, rng_seed: proptest::test_runner::RngSeed::Fixed(13), ..ProptestConfig::default() })]

    /// The dual action multiplies a kernel by `exp(i k . x)`; its derivative at
    /// `k = 0` is the kernel derivation, checked by central differences.
    #[test]
    fn kernel_derivation_is_the_dual_action_generator(
        a in element(3), dir in direction(), x1 in -3.0f64..3.0, x2 in -3.0f64..3.0,
    ) {
        let h = 1e-4;
        let f = a.to_kernel();
        let x: Point = [x1, x2];
        let xj = match dir { Direction::One => x1, Direction::Two => x2 };
        let fx = f.eval(x);
        let flow = |k: f64| C64::from_polar(1.0, k * xj) * fx;
        let fd = (flow(h) - flow(-h)) / (2.0 * h);
        let exact = kernel_derivation(&f, dir).eval(x);
        prop_assert!((fd - exact).norm() < 1e-6, "{fd} vs {exact}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, rng_seed: proptest::test_runner::RngSeed::Fixed(17), ..ProptestConfig::default() })]

    /// The position-space action `f^- * psi` agrees with the algebra element
    /// of `f` applied to the coefficients of `psi`.
    #[test]
    fn left_action_matches_the_algebra(a in element(3), b in element(3), x1 in -2.5f64..2.5, x2 in -2.5f64..2.5) {
        let p = params();
        let grid = QuadGrid::convolution_default(&p);
        let f = a.to_kernel();
        let psi = b.to_kernel().with_cutoff(a.cutoff().max(b.cutoff()));
        let x: Point = [x1, x2];
        let direct = magws_core::twisted_convolution::left_action(&f, &psi, x, &grid, &p);
        let via_algebra = a.with_cutoff(psi.cutoff()).apply_to_state(&psi).unwrap().eval(x);
        prop_assert!((direct - via_algebra).norm() < 1e-7, "{direct} vs {via_algebra}");
    }
}
