//! Position-space oracle for the magnetic twisted convolution, the special
//! kernels of the Landau problem (projection kernels, Mehler heat kernel),
//! magnetic translations and the trace-per-unit-volume double integral.

use crate::error::{MagError, Result};
use crate::laguerre_basis::{
    laguerre_rec, phase_cocycle, Kernel, MagneticParams, Point, QuadGrid, QuadResult, C64,
};
use nalgebra::DMatrix;
use std::f64::consts::PI;

/// `(f * g)(x) = (1 / 2 pi l^2) int dy f(x - y) g(y) Phi(x, y)`.
///
/// This is the change of variables `y -> x - y` of
/// `(1 / 2 pi l^2) int dy f(y) g(x - y) Phi(y, x)`. The rule is centred at
/// `x / 2`, where the product of two Gaussian envelopes peaks.
pub fn twisted_convolve(
    f: &dyn Kernel,
    g: &dyn Kernel,
    x: Point,
    grid: &QuadGrid,
    params: &MagneticParams,
) -> QuadResult {
    let table = twisted_convolve_table(&[f], &[g], x, grid, params);
    let accurate = match (f.poly_degree(), g.poly_degree()) {
        (Some(a), Some(b)) => grid.supports(a + b),
        _ => true,
    };
    QuadResult {
        value: table[0][0],
        accurate,
    }
}

/// All products `fs[a] * gs[b]` at one point, sharing kernel evaluations.
/// Entry `[a][b]` of the result is `(fs[a] * gs[b])(x)`.
pub fn twisted_convolve_table(
    fs: &[&dyn Kernel],
    gs: &[&dyn Kernel],
    x: Point,
    grid: &QuadGrid,
    params: &MagneticParams,
) -> Vec<Vec<C64>> {
    let l = params.ell_b;
    let centered = grid.centered([0.5 * x[0], 0.5 * x[1]]);
    let mut out = vec![vec![C64::new(0.0, 0.0); gs.len()]; fs.len()];
    let mut fv = vec![C64::new(0.0, 0.0); fs.len()];
    let mut gv = vec![C64::new(0.0, 0.0); gs.len()];
    for (y, w) in centered.nodes.iter().zip(centered.weights.iter()) {
        let xm = [x[0] - y[0], x[1] - y[1]];
        let phase = phase_cocycle(x, *y, params) * *w;
        for (slot, f) in fv.iter_mut().zip(fs.iter()) {
            *slot = f.value(xm) * phase;
        }
        for (slot, g) in gv.iter_mut().zip(gs.iter()) {
            *slot = g.value(*y);
        }
        for (row, fa) in out.iter_mut().zip(fv.iter()) {
            for (cell, gb) in row.iter_mut().zip(gv.iter()) {
                *cell += fa * gb;
            }
        }
    }
    let scale = 1.0 / (2.0 * PI * l * l);
    for row in out.iter_mut() {
        for cell in row.iter_mut() {
            *cell *= scale;
        }
    }
    out
}

/// The kernel involution `f^*(x) = conj(f(-x))`.
pub fn kernel_involution<'a>(f: &'a dyn Kernel) -> impl Fn(Point) -> C64 + 'a {
    move |x: Point| f.value([-x[0], -x[1]]).conj()
}

/// The reflected kernel `f^-(x) = f(-x)`.
pub fn kernel_reflection<'a>(f: &'a dyn Kernel) -> impl Fn(Point) -> C64 + 'a {
    move |x: Point| f.value([-x[0], -x[1]])
}

/// Landau projection kernel `p_n(x) = exp(-|x|^2/4l^2) L_n(|x|^2/2l^2)`.
pub fn projection_kernel(n: usize, x: Point, params: &MagneticParams) -> f64 {
    let l = params.ell_b;
    let r2 = x[0] * x[0] + x[1] * x[1];
    (-r2 / (4.0 * l * l)).exp() * laguerre_rec(n, 0.0, r2 / (2.0 * l * l))
}

/// Mehler kernel `g_s(x) = exp(-(|x|^2/4l^2) coth(s/2)) / (2 sinh(s/2))`.
pub fn mehler_kernel(s: f64, x: Point, params: &MagneticParams) -> Result<f64> {
    if !(s.is_finite() && s > 0.0) {
        return Err(MagError::invalid("s", format!("must be > 0, got {s}")));
    }
    let l = params.ell_b;
    let r2 = x[0] * x[0] + x[1] * x[1];
    let half = 0.5 * s;
    Ok((-(r2 / (4.0 * l * l)) / half.tanh()).exp() / (2.0 * half.sinh()))
}

/// Partial sums of `sum_j e^{-s/2} e^{-s j} p_j(x)`, stopped once the geometric
/// bound on the tail drops below `1e-12` of the running sum. Returns the value
/// and the number of terms used.
pub fn mehler_series(s: f64, x: Point, params: &MagneticParams) -> Result<(f64, usize)> {
    if !(s.is_finite() && s > 0.0) {
        return Err(MagError::invalid("s", format!("must be > 0, got {s}")));
    }
    let ratio = (-s).exp();
    let mut sum = 0.0;
    let mut weight = (-0.5 * s).exp();
    // |p_j(x)| <= 1, so the tail after term j is bounded by weight * ratio / (1 - ratio).
    for j in 0..100_000 {
        sum += weight * projection_kernel(j, x, params);
        weight *= ratio;
        let tail = weight / (1.0 - ratio);
        if tail <= 1e-12 * sum.abs().max(f64::MIN_POSITIVE) {
            return Ok((sum, j + 1));
        }
    }
    Err(MagError::Numerical(format!(
        "Mehler series did not settle for s = {s}"
    )))
}

/// Which family of translations to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TranslationKind {
    /// Magnetic translation `(U(a) f)(x) = Phi(a, x) f(x - a)`.
    U,
    /// Dual magnetic translation `(V(a) f)(x) = Phi(x, a) f(x - a)`.
    V,
}

/// Pointwise magnetic or dual magnetic translation of `f` by `a`.
pub fn magnetic_translate<'a>(
    kind: TranslationKind,
    a: Point,
    f: &'a dyn Kernel,
    params: MagneticParams,
) -> impl Fn(Point) -> C64 + 'a {
    move |x: Point| {
        let phase = match kind {
            TranslationKind::U => phase_cocycle(a, x, &params),
            TranslationKind::V => phase_cocycle(x, a, &params),
        };
        phase * f.value([x[0] - a[0], x[1] - a[1]])
    }
}

/// Left action of a kernel on a state: `(L_f psi)(x) = (f^- * psi)(x)`.
pub fn left_action(
    f: &dyn Kernel,
    psi: &dyn Kernel,
    x: Point,
    grid: &QuadGrid,
    params: &MagneticParams,
) -> C64 {
    let reflected = kernel_reflection(f);
    twisted_convolve(&reflected, psi, x, grid, params).value
}

/// Returns `(||f * g||, ||f|| ||g|| / (sqrt(2 pi) l))`, all norms in `L^2`.
/// The outer grid integrates `|f * g|^2`; the inner grid evaluates the
/// product at each outer node.
pub fn l2_contraction_check(
    f: &dyn Kernel,
    g: &dyn Kernel,
    outer: &QuadGrid,
    inner: &QuadGrid,
    params: &MagneticParams,
) -> (f64, f64) {
    let conv_sq = outer.integrate(|x| {
        let v = twisted_convolve(f, g, x, inner, params).value;
        C64::new(v.norm_sqr(), 0.0)
    });
    let nf = outer.integrate(|x| C64::new(f.value(x).norm_sqr(), 0.0));
    let ng = outer.integrate(|x| C64::new(g.value(x).norm_sqr(), 0.0));
    let lhs = conv_sq.re.max(0.0).sqrt();
    let rhs = (nf.re * ng.re).max(0.0).sqrt() / params.sqrt_two_pi_ell();
    (lhs, rhs)
}

/// Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(MagError::invalid("n", "need at least one node"));
    }
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let k = i as f64;
        let b = k / (4.0 * k * k - 1.0).sqrt();
        jac[(i - 1, i)] = b;
        jac[(i, i - 1)] = b;
    }
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
    Ok(pairs.into_iter().unzip())
}

/// Diagonal-capable kernel of `chi_Lambda L_f^* L_g chi_Lambda` before any
/// simplification:
/// `kappa(x, y) = (1/(2 pi l^2)^2) int ds conj(f(x - s)) g(y - s) Phi(s, y - x)`
/// (indicator functions are applied by the caller). The rule is centred at
/// the midpoint of `x` and `y`.
pub fn kappa_kernel(
    f: &dyn Kernel,
    g: &dyn Kernel,
    x: Point,
    y: Point,
    grid: &QuadGrid,
    params: &MagneticParams,
) -> C64 {
    let l = params.ell_b;
    let mid = [0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1])];
    let diff = [y[0] - x[0], y[1] - x[1]];
    let centered = grid.centered(mid);
    let integral = centered.integrate(|s| {
        f.value([x[0] - s[0], x[1] - s[1]]).conj()
            * g.value([y[0] - s[0], y[1] - s[1]])
            * phase_cocycle(s, diff, params)
    });
    let norm = 2.0 * PI * l * l;
    integral / (norm * norm)
}

/// Trace per unit volume oracle: `(2 pi l^2 / |Lambda_R|) int_{Lambda_R} dx kappa(x, x)`
/// over the disk of radius `R`, where `kappa` is evaluated by its own
/// quadrature at every outer node. Analytically this equals `<f, g>_B`.
pub fn tuv_quadrature(
    f: &dyn Kernel,
    g: &dyn Kernel,
    radius: f64,
    grid: &QuadGrid,
    params: &MagneticParams,
) -> Result<QuadResult> {
    let table = tuv_quadrature_table(&[f], &[g], radius, grid, params)?;
    let accurate = match (f.poly_degree(), g.poly_degree()) {
        (Some(a), Some(b)) => grid.supports(a + b),
        _ => true,
    };
    Ok(QuadResult {
        value: table[0][0],
        accurate,
    })
}

/// [`tuv_quadrature`] for all pairs `(fs[a], gs[b])` at once. Entry `[a][b]`
/// of the result belongs to `(fs[a], gs[b])`.
pub fn tuv_quadrature_table(
    fs: &[&dyn Kernel],
    gs: &[&dyn Kernel],
    radius: f64,
    grid: &QuadGrid,
    params: &MagneticParams,
) -> Result<Vec<Vec<C64>>> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(MagError::invalid("R", format!("must be > 0, got {radius}")));
    }
    let (xs, ws) = gauss_legendre(8)?;
    let n_angle = 8;
    let l = params.ell_b;
    let norm = 2.0 * PI * l * l;
    let mut total = vec![vec![C64::new(0.0, 0.0); gs.len()]; fs.len()];
    let mut fv = vec![C64::new(0.0, 0.0); fs.len()];
    let mut gv = vec![C64::new(0.0, 0.0); gs.len()];
    for (xi, wi) in xs.iter().zip(ws.iter()) {
        let r = 0.5 * radius * (xi + 1.0);
        let wr = 0.5 * radius * wi * r * (2.0 * PI / n_angle as f64);
        for a in 0..n_angle {
            let th = 2.0 * PI * a as f64 / n_angle as f64;
            let x = [r * th.cos(), r * th.sin()];
            // kappa(x, x) with the inner rule centred at x.
            let centered = grid.centered(x);
            for (s, w) in centered.nodes.iter().zip(centered.weights.iter()) {
                let shifted = [x[0] - s[0], x[1] - s[1]];
                for (slot, f) in fv.iter_mut().zip(fs.iter()) {
                    *slot = f.value(shifted).conj() * (*w * wr);
                }
                for (slot, g) in gv.iter_mut().zip(gs.iter()) {
                    *slot = g.value(shifted) * phase_cocycle(*s, [0.0, 0.0], params);
                }
                for (row, fa) in total.iter_mut().zip(fv.iter()) {
                    for (cell, gb) in row.iter_mut().zip(gv.iter()) {
                        *cell += fa * gb;
                    }
                }
            }
        }
    }
    let area = PI * radius * radius;
    let scale = norm / (area * norm * norm);
    for row in total.iter_mut() {
        for cell in row.iter_mut() {
            *cell *= scale;
        }
    }
    Ok(total)
}
