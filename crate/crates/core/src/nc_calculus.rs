//! Noncommutative calculus on the magnetic algebra: the derivations
//! `nabla_1, nabla_2` on transition operators, the kernel derivations
//! `(d_j f)(x) = i x_j f(x)`, Sobolev norms and integration by parts.

use crate::error::{MagError, Result};
use crate::laguerre_basis::{ladder_apply, KernelCoeffs, LadderOp, MagneticParams, C64};
use crate::magnetic_algebra::AlgebraElement;
use std::f64::consts::SQRT_2;

/// Selects one of the two plane directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// First coordinate.
    One,
    /// Second coordinate.
    Two,
}

impl Direction {
    /// Parses `1` or `2`.
    pub fn from_index(j: usize) -> Result<Self> {
        match j {
            1 => Ok(Direction::One),
            2 => Ok(Direction::Two),
            _ => Err(MagError::invalid("j", format!("direction must be 1 or 2, got {j}"))),
        }
    }
}

/// Derivation `nabla_j` on an element, computed from the closed formulas
///
/// `nabla_1 U_{j->k} = (l/sqrt 2)(sqrt k U_{j->k-1} + sqrt j U_{j-1->k} - sqrt(k+1) U_{j->k+1} - sqrt(j+1) U_{j+1->k})`,
/// `nabla_2 U_{j->k} = i(l/sqrt 2)(sqrt k U_{j->k-1} - sqrt j U_{j-1->k} + sqrt(k+1) U_{j->k+1} - sqrt(j+1) U_{j+1->k})`.
///
/// The result has cutoff one larger than the input.
pub fn nabla(a: &AlgebraElement, dir: Direction) -> AlgebraElement {
    let params = *a.params();
    let mut out = AlgebraElement::zeros(a.cutoff() + 1, params);
    let base = params.ell_b / SQRT_2;
    let (pref, s_down_j, s_up_k) = match dir {
        Direction::One => (C64::new(base, 0.0), 1.0, -1.0),
        Direction::Two => (C64::new(0.0, base), -1.0, 1.0),
    };
    for (k, j, c) in a.entries() {
        let c = c * pref;
        let kf = k as f64;
        let jf = j as f64;
        if k > 0 {
            out.add_to(k - 1, j, c * kf.sqrt()).expect("inside cutoff");
        }
        if j > 0 {
            out.add_to(k, j - 1, c * (s_down_j * jf.sqrt())).expect("inside cutoff");
        }
        out.add_to(k + 1, j, c * (s_up_k * (kf + 1.0).sqrt()))
            .expect("inside grown cutoff");
        out.add_to(k, j + 1, c * (-(jf + 1.0).sqrt()))
            .expect("inside grown cutoff");
    }
    out
}

/// Both derivations `(nabla_1 A, nabla_2 A)`.
pub fn grad(a: &AlgebraElement) -> (AlgebraElement, AlgebraElement) {
    (nabla(a, Direction::One), nabla(a, Direction::Two))
}

/// Kernel derivation `(d_j f)(x) = i x_j f(x)` on Laguerre coefficients:
/// `d_1 = (l/sqrt 2)(a^+ - a^- + b^+ - b^-)` and
/// `d_2 = i (l/sqrt 2)(b^+ + b^- - a^+ - a^-)`, with the standard ladder matrix
/// elements of [`ladder_apply`].
pub fn kernel_derivation(f: &KernelCoeffs, dir: Direction) -> KernelCoeffs {
    let l = f.params().ell_b;
    let grown = f.with_cutoff(f.cutoff() + 1);
    let ap = ladder_apply(LadderOp::APlus, f).with_cutoff(f.cutoff() + 1);
    let am = ladder_apply(LadderOp::AMinus, &grown);
    let bp = ladder_apply(LadderOp::BPlus, f).with_cutoff(f.cutoff() + 1);
    let bm = ladder_apply(LadderOp::BMinus, &grown);
    let one = C64::new(1.0, 0.0);
    let (s_a, s_am, s_b, s_bm, pref) = match dir {
        Direction::One => (one, -one, one, -one, C64::new(l / SQRT_2, 0.0)),
        Direction::Two => (-one, -one, one, one, C64::new(0.0, l / SQRT_2)),
    };
    let mut acc = ap.scaled(s_a);
    for (term, s) in [(&am, s_am), (&bp, s_b), (&bm, s_bm)] {
        acc = acc.combine(one, term, s).expect("same parameters");
    }
    acc.scaled(pref)
}

/// Truncated magnetic momentum on the first index:
/// `K_1 = (a^+ + a^-)/sqrt 2`, `K_2 = -i (a^+ - a^-)/sqrt 2`.
/// Only the matrix elements between indices `<= cutoff` are kept.
pub fn magnetic_momentum(
    dir: Direction,
    cutoff: usize,
    params: MagneticParams,
) -> AlgebraElement {
    let mut out = AlgebraElement::zeros(cutoff, params);
    for n in 0..cutoff {
        let s = ((n + 1) as f64).sqrt() / SQRT_2;
        // a^+ maps n to n + 1, a^- maps n + 1 to n.
        let (up, down) = match dir {
            Direction::One => (C64::new(s, 0.0), C64::new(s, 0.0)),
            Direction::Two => (C64::new(0.0, -s), C64::new(0.0, s)),
        };
        out.set(n + 1, n, up).expect("inside cutoff");
        out.set(n, n + 1, down).expect("inside cutoff");
    }
    out
}

/// Sobolev norm `(sum_{n+m<=N} |||nabla_1^n nabla_2^m A|||_2^2)^{1/2}` with
/// `|||T|||_2^2 = trace(T^* T)`. Only `p = 2` is supported.
pub fn sobolev_norm(a: &AlgebraElement, order: usize, p: u32) -> Result<f64> {
    if p != 2 {
        return Err(MagError::invalid("p", format!("only p = 2 is supported, got {p}")));
    }
    let mut total = 0.0;
    let mut row = a.clone();
    for n in 0..=order {
        let mut cur = row.clone();
        for _m in 0..=(order - n) {
            total += cur.hs_inner(&cur)?.re;
            cur = nabla(&cur, Direction::Two);
        }
        row = nabla(&row, Direction::One);
    }
    Ok(total.sqrt())
}

/// `|trace(T nabla_j S) + trace(nabla_j T S)|`.
pub fn integration_by_parts_residual(
    t: &AlgebraElement,
    s: &AlgebraElement,
    dir: Direction,
) -> Result<f64> {
    let lhs = t.multiply(&nabla(s, dir))?.trace_b();
    let rhs = nabla(t, dir).multiply(s)?.trace_b();
    Ok((lhs + rhs).norm())
}

/// Gradient pairing `trace(nabla(A_1)^* . nabla(A_2)) =
/// trace(nabla_1(A_1)^* nabla_1(A_2) + nabla_2(A_1)^* nabla_2(A_2))`.
pub fn gradient_pairing(a1: &AlgebraElement, a2: &AlgebraElement) -> Result<C64> {
    let (g1, g2) = grad(a1);
    let (h1, h2) = grad(a2);
    Ok(g1.hs_inner(&h1)? + g2.hs_inner(&h2)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> MagneticParams {
        MagneticParams::default()
    }

    #[test]
    fn gradient_of_ground_projection() {
        let params = MagneticParams::new(1.7, 1.0).unwrap();
        let pi0 = AlgebraElement::landau_projection(0, 0, params).unwrap();
        let (g1, g2) = grad(&pi0);
        let u01 = AlgebraElement::upsilon(0, 1, 1, params).unwrap();
        let u10 = AlgebraElement::upsilon(1, 0, 1, params).unwrap();
        let s = params.ell_b / SQRT_2;
        let e1 = u01.add(&u10).unwrap().scaled(C64::new(-s, 0.0));
        let e2 = u01.sub(&u10).unwrap().scaled(C64::new(0.0, s));
        assert!(g1.max_abs_diff(&e1) < 1e-15);
        assert!(g2.max_abs_diff(&e2) < 1e-15);
    }

    #[test]
    fn sobolev_examples() {
        let params = MagneticParams::new(1.3, 1.0).unwrap();
        let pi0 = AlgebraElement::landau_projection(0, 0, params).unwrap();
        assert!((sobolev_norm(&pi0, 0, 2).unwrap() - 1.0).abs() < 1e-15);
        let expected = (1.0 + 2.0 * 1.3f64.powi(2)).sqrt();
        assert!((sobolev_norm(&pi0, 1, 2).unwrap() - expected).abs() < 1e-14);
        let zero = AlgebraElement::zeros(2, params);
        assert_eq!(sobolev_norm(&zero, 3, 2).unwrap(), 0.0);
        assert!(sobolev_norm(&pi0, 1, 1).is_err());
    }

    #[test]
    fn integration_by_parts_examples() {
        let pi0 = AlgebraElement::landau_projection(0, 1, p()).unwrap();
        let pi1 = AlgebraElement::landau_projection(1, 1, p()).unwrap();
        assert!(integration_by_parts_residual(&pi0, &pi1, Direction::One).unwrap() < 1e-12);
        let u01 = AlgebraElement::upsilon(0, 1, 1, p()).unwrap();
        let u10 = AlgebraElement::upsilon(1, 0, 1, p()).unwrap();
        assert!(integration_by_parts_residual(&u01, &u10, Direction::Two).unwrap() < 1e-12);
    }

    #[test]
    fn kernel_derivation_matches_nabla() {
        for (n, m) in [(0, 0), (1, 0), (2, 3), (3, 1)] {
            let f = KernelCoeffs::basis(n, m, p());
            for dir in [Direction::One, Direction::Two] {
                let lhs = AlgebraElement::from_kernel(&kernel_derivation(&f, dir));
                let rhs = nabla(&AlgebraElement::from_kernel(&f), dir);
                assert!(lhs.max_abs_diff(&rhs) < 1e-14, "({n},{m}) {dir:?}");
            }
        }
    }

    #[test]
    fn gradient_pairing_of_ground_projection() {
        let params = MagneticParams::new(0.8, 1.0).unwrap();
        let pi0 = AlgebraElement::landau_projection(0, 0, params).unwrap();
        let v = gradient_pairing(&pi0, &pi0).unwrap();
        assert!((v.re - 2.0 * 0.64).abs() < 1e-14 && v.im.abs() < 1e-15);
    }

    #[test]
    fn direction_parsing() {
        assert_eq!(Direction::from_index(2).unwrap(), Direction::Two);
        assert!(Direction::from_index(3).is_err());
    }
}
