//! Generalized Laguerre polynomials, magnetic Laguerre functions, polar
//! quadrature grids on the plane and ladder operators acting on coefficient
//! arrays.
//!
//! Phase convention. The functions are normalized so that
//! `psi_{n,m} = psi_0 * sqrt(n!/m!) * w^{m-n} * L_n^{(m-n)}(|x|^2 / 2 l^2)` with
//! `w = (x_2 + i x_1) / (l sqrt 2)`. With this choice the twisted product of two
//! basis functions obeys `psi_{k,j} * psi_{n,m} = delta_{j,n} psi_{k,m} / (sqrt(2 pi) l)`
//! for the cocycle `exp(i (x_1 y_2 - x_2 y_1) / 2 l^2)`, the magnetic momenta
//! `K_1, K_2` act through standard creation/annihilation matrix elements on
//! the first index, and the dual momenta act on the second index through
//! `b^+ = -i c^+`, where `c^+` has standard matrix elements. The operation
//! [`ladder_apply`] implements the standard matrix elements for both indices.

use crate::error::{MagError, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;

/// A point of the plane.
pub type Point = [f64; 2];

/// Magnetic scales: the magnetic length and the magnetic energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagneticParams {
    /// Magnetic length, strictly positive.
    pub ell_b: f64,
    /// Magnetic energy scale, strictly positive.
    pub energy_b: f64,
}

impl Default for MagneticParams {
    fn default() -> Self {
        MagneticParams {
            ell_b: 1.0,
            energy_b: 1.0,
        }
    }
}

impl MagneticParams {
    /// Validated constructor.
    pub fn new(ell_b: f64, energy_b: f64) -> Result<Self> {
        if !(ell_b.is_finite() && ell_b > 0.0) {
            return Err(MagError::invalid("ell_B", format!("must be > 0, got {ell_b}")));
        }
        if !(energy_b.is_finite() && energy_b > 0.0) {
            return Err(MagError::invalid(
                "energy_B",
                format!("must be > 0, got {energy_b}"),
            ));
        }
        Ok(MagneticParams { ell_b, energy_b })
    }

    /// Area of the magnetic disk, `pi l^2`.
    pub fn lambda_b(&self) -> f64 {
        PI * self.ell_b * self.ell_b
    }

    /// The scale `sqrt(2 pi) l` that links kernels to transition operators.
    pub fn sqrt_two_pi_ell(&self) -> f64 {
        (2.0 * PI).sqrt() * self.ell_b
    }

    /// Fails unless both parameter sets share the same magnetic length.
    pub fn ensure_compatible(&self, other: &MagneticParams) -> Result<()> {
        if (self.ell_b - other.ell_b).abs() > 1e-14 * self.ell_b.max(other.ell_b) {
            return Err(MagError::MismatchedParams {
                left: self.ell_b,
                right: other.ell_b,
            });
        }
        Ok(())
    }
}

/// A Laguerre index pair `(n, m)`: Landau index and dual index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LagIndex {
    /// Landau (first) index.
    pub n: usize,
    /// Dual (second) index.
    pub m: usize,
}

impl LagIndex {
    /// Builds the pair `(n, m)`.
    pub fn new(n: usize, m: usize) -> Self {
        LagIndex { n, m }
    }
}

const FACTORIALS: [f64; 21] = [
    1.0,
    1.0,
    2.0,
    6.0,
    24.0,
    120.0,
    720.0,
    5040.0,
    40320.0,
    362880.0,
    3628800.0,
    39916800.0,
    479001600.0,
    6227020800.0,
    87178291200.0,
    1307674368000.0,
    20922789888000.0,
    355687428096000.0,
    6402373705728000.0,
    121645100408832000.0,
    2432902008176640000.0,
];

/// Natural logarithm of `n!`: exact table up to 20, Stirling series above.
pub fn ln_factorial(n: usize) -> f64 {
    if n <= 20 {
        return FACTORIALS[n].ln();
    }
    let x = n as f64 + 1.0;
    let x2 = x * x;
    // Stirling series for ln Gamma(x); the truncation error is below 1e-17 for x > 21.
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + 1.0 / (12.0 * x) - 1.0 / (360.0 * x * x2)
        + 1.0 / (1260.0 * x2 * x2 * x)
        - 1.0 / (1680.0 * x2 * x2 * x2 * x)
}

/// `sqrt(n! / m!)`, evaluated in log space once either argument exceeds 20.
pub fn sqrt_factorial_ratio(n: usize, m: usize) -> f64 {
    if n <= 20 && m <= 20 {
        (FACTORIALS[n] / FACTORIALS[m]).sqrt()
    } else {
        (0.5 * (ln_factorial(n) - ln_factorial(m))).exp()
    }
}

/// Generalized Laguerre polynomial `L_n^{(alpha)}(zeta)` by the three-term
/// recurrence. Negative degrees are rejected.
pub fn laguerre_poly(n: i64, alpha: f64, zeta: f64) -> Result<f64> {
    if n < 0 {
        return Err(MagError::invalid("n", format!("degree must be >= 0, got {n}")));
    }
    Ok(laguerre_rec(n as usize, alpha, zeta))
}

/// Infallible recurrence `(k+1) L_{k+1} = (2k+1+alpha-zeta) L_k - (k+alpha) L_{k-1}`.
pub(crate) fn laguerre_rec(n: usize, alpha: f64, zeta: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - zeta;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - zeta) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Explicit alternating-sum form of `L_n^{(alpha)}(zeta)`, kept as an
/// independent oracle for small degrees.
pub fn laguerre_poly_explicit(n: usize, alpha: f64, zeta: f64) -> f64 {
    let mut total = 0.0;
    for j in 0..=n {
        let mut num = 1.0;
        for t in (j + 1)..=n {
            num *= alpha + t as f64;
        }
        let denom = (ln_factorial(j) + ln_factorial(n - j)).exp();
        total += num / denom * (-zeta).powi(j as i32);
    }
    total
}

/// The ground state `psi_0(x) = exp(-|x|^2 / 4 l^2) / (l sqrt(2 pi))`.
pub fn ground_state(x: Point, params: &MagneticParams) -> f64 {
    let l = params.ell_b;
    (-(x[0] * x[0] + x[1] * x[1]) / (4.0 * l * l)).exp() / params.sqrt_two_pi_ell()
}

/// The magnetic Laguerre function `psi_{n,m}(x)` in the convention described
/// in the module documentation. For `m < n` the conjugate-index form
/// `psi_{n,m} = (-1)^{n-m} conj(psi_{m,n})` is used, which keeps every
/// Laguerre parameter nonnegative.
pub fn laguerre_fn(idx: LagIndex, x: Point, params: &MagneticParams) -> C64 {
    let l = params.ell_b;
    let r2 = x[0] * x[0] + x[1] * x[1];
    let t = r2 / (2.0 * l * l);
    let (lo, hi) = if idx.m >= idx.n {
        (idx.n, idx.m)
    } else {
        (idx.m, idx.n)
    };
    let k = hi - lo;
    let poly = laguerre_rec(lo, k as f64, t);
    let prefactor = 1.0 / params.sqrt_two_pi_ell();
    let magnitude = if k == 0 {
        prefactor * (-t / 2.0).exp()
    } else if t == 0.0 {
        0.0
    } else {
        let log_mag = -t / 2.0 + 0.5 * k as f64 * t.ln() + 0.5 * (ln_factorial(lo) - ln_factorial(hi));
        prefactor * log_mag.exp()
    };
    if magnitude == 0.0 {
        return C64::new(0.0, 0.0);
    }
    // Argument of w = (x_2 + i x_1)/(l sqrt 2).
    let theta = x[0].atan2(x[1]);
    let angle = if idx.m >= idx.n {
        k as f64 * theta
    } else {
        -(k as f64) * theta
    };
    let sign = if idx.m < idx.n && k % 2 == 1 { -1.0 } else { 1.0 };
    C64::from_polar(sign * magnitude * poly, angle)
}

/// The group 2-cocycle `Phi(x, y) = exp(i (x_1 y_2 - x_2 y_1) / 2 l^2)`.
pub fn phase_cocycle(x: Point, y: Point, params: &MagneticParams) -> C64 {
    let l = params.ell_b;
    C64::from_polar(1.0, (x[0] * y[1] - x[1] * y[0]) / (2.0 * l * l))
}

/// Anything that can be evaluated pointwise on the plane.
pub trait Kernel {
    /// Value at `x`.
    fn value(&self, x: Point) -> C64;
    /// Total polynomial degree of `value / exp(-|x|^2/4l^2)` when known.
    fn poly_degree(&self) -> Option<usize> {
        None
    }
}

impl<F: Fn(Point) -> C64> Kernel for F {
    fn value(&self, x: Point) -> C64 {
        self(x)
    }
}

/// A kernel `f = sum c_{n,m} psi_{n,m}` stored as a finite coefficient array.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelCoeffs {
    cutoff: usize,
    coeffs: Vec<C64>,
    params: MagneticParams,
}

/// Serialized form `{"cutoff":N,"ell_B":x,"coeffs":[[n,m,re,im],...]}`.
#[derive(Debug, Serialize, Deserialize)]
struct KernelCoeffsJson {
    cutoff: usize,
    #[serde(rename = "ell_B")]
    ell_b: f64,
    coeffs: Vec<(usize, usize, f64, f64)>,
}

impl KernelCoeffs {
    /// The zero kernel with indices `n, m <= cutoff`.
    pub fn zeros(cutoff: usize, params: MagneticParams) -> Self {
        KernelCoeffs {
            cutoff,
            coeffs: vec![C64::new(0.0, 0.0); (cutoff + 1) * (cutoff + 1)],
            params,
        }
    }

    /// The single basis function `psi_{n,m}` with cutoff `max(n, m)`.
    pub fn basis(n: usize, m: usize, params: MagneticParams) -> Self {
        let mut k = Self::zeros(n.max(m), params);
        k.coeffs[n * (n.max(m) + 1) + m] = C64::new(1.0, 0.0);
        k
    }

    /// Cutoff `N`: indices range over `0..=N`.
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Magnetic parameters the kernel was built with.
    pub fn params(&self) -> &MagneticParams {
        &self.params
    }

    fn offset(&self, n: usize, m: usize) -> usize {
        n * (self.cutoff + 1) + m
    }

    /// Coefficient `c_{n,m}`; zero outside the cutoff.
    pub fn get(&self, n: usize, m: usize) -> C64 {
        if n > self.cutoff || m > self.cutoff {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[self.offset(n, m)]
        }
    }

    /// Sets `c_{n,m}`; indices beyond the cutoff are rejected.
    pub fn set(&mut self, n: usize, m: usize, value: C64) -> Result<()> {
        if n > self.cutoff || m > self.cutoff {
            return Err(MagError::IndexOutOfRange(format!(
                "({n},{m}) beyond cutoff {}",
                self.cutoff
            )));
        }
        let o = self.offset(n, m);
        self.coeffs[o] = value;
        Ok(())
    }

    /// Copy with a different cutoff; shrinking drops coefficients.
    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        let mut out = Self::zeros(cutoff, self.params);
        for n in 0..=cutoff.min(self.cutoff) {
            for m in 0..=cutoff.min(self.cutoff) {
                let o = out.offset(n, m);
                out.coeffs[o] = self.get(n, m);
            }
        }
        out
    }

    /// Iterator over `(n, m, c_{n,m})` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        let w = self.cutoff + 1;
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, c)| (i / w, i % w, *c))
    }

    /// `alpha f + beta g`, with the larger cutoff.
    pub fn combine(&self, alpha: C64, other: &KernelCoeffs, beta: C64) -> Result<Self> {
        self.params.ensure_compatible(&other.params)?;
        let cutoff = self.cutoff.max(other.cutoff);
        let mut out = Self::zeros(cutoff, self.params);
        for n in 0..=cutoff {
            for m in 0..=cutoff {
                let o = out.offset(n, m);
                out.coeffs[o] = alpha * self.get(n, m) + beta * other.get(n, m);
            }
        }
        Ok(out)
    }

    /// Scalar multiple.
    pub fn scaled(&self, alpha: C64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= alpha);
        out
    }

    /// Largest coefficient modulus of `self - other` over the union of supports.
    pub fn max_abs_diff(&self, other: &KernelCoeffs) -> f64 {
        let cutoff = self.cutoff.max(other.cutoff);
        let mut worst: f64 = 0.0;
        for n in 0..=cutoff {
            for m in 0..=cutoff {
                worst = worst.max((self.get(n, m) - other.get(n, m)).norm());
            }
        }
        worst
    }

    /// Pointwise value `sum c_{n,m} psi_{n,m}(x)`.
    pub fn eval(&self, x: Point) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (n, m, c) in self.entries() {
            if c != C64::new(0.0, 0.0) {
                acc += c * laguerre_fn(LagIndex::new(n, m), x, &self.params);
            }
        }
        acc
    }

    /// Largest `n + m` carrying a nonzero coefficient.
    pub fn max_total_index(&self) -> usize {
        self.entries()
            .filter(|(_, _, c)| c.norm() > 0.0)
            .map(|(n, m, _)| n + m)
            .max()
            .unwrap_or(0)
    }

    /// Serializes to the documented JSON schema (nonzero entries only).
    pub fn to_json(&self) -> String {
        let coeffs = self
            .entries()
            .filter(|(_, _, c)| c.norm() > 0.0)
            .map(|(n, m, c)| (n, m, c.re, c.im))
            .collect();
        serde_json::to_string(&KernelCoeffsJson {
            cutoff: self.cutoff,
            ell_b: self.params.ell_b,
            coeffs,
        })
        .expect("kernel serialization cannot fail")
    }

    /// Parses the documented JSON schema; the energy scale defaults to 1.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: KernelCoeffsJson = serde_json::from_str(text)?;
        let params = MagneticParams::new(raw.ell_b, 1.0)?;
        let mut out = Self::zeros(raw.cutoff, params);
        for (n, m, re, im) in raw.coeffs {
            out.set(n, m, C64::new(re, im))?;
        }
        Ok(out)
    }
}

impl Kernel for KernelCoeffs {
    fn value(&self, x: Point) -> C64 {
        self.eval(x)
    }
    fn poly_degree(&self) -> Option<usize> {
        Some(self.max_total_index())
    }
}

/// The four ladder operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderOp {
    /// Raises the Landau index.
    APlus,
    /// Lowers the Landau index.
    AMinus,
    /// Raises the dual index.
    BPlus,
    /// Lowers the dual index.
    BMinus,
}

/// Applies a ladder operator with standard matrix elements
/// (`a^+ psi_{n,m} = sqrt(n+1) psi_{n+1,m}` and so on). Raising operators
/// return a kernel whose cutoff is one larger; lowering keeps the cutoff.
pub fn ladder_apply(op: LadderOp, f: &KernelCoeffs) -> KernelCoeffs {
    let raising = matches!(op, LadderOp::APlus | LadderOp::BPlus);
    let cutoff = if raising { f.cutoff + 1 } else { f.cutoff };
    let mut out = KernelCoeffs::zeros(cutoff, f.params);
    for (n, m, c) in f.entries() {
        if c == C64::new(0.0, 0.0) {
            continue;
        }
        let (tn, tm, factor) = match op {
            LadderOp::APlus => (n + 1, m, ((n + 1) as f64).sqrt()),
            LadderOp::AMinus => {
                if n == 0 {
                    continue;
                }
                (n - 1, m, (n as f64).sqrt())
            }
            LadderOp::BPlus => (n, m + 1, ((m + 1) as f64).sqrt()),
            LadderOp::BMinus => {
                if m == 0 {
                    continue;
                }
                (n, m - 1, (m as f64).sqrt())
            }
        };
        let o = out.offset(tn, tm);
        out.coeffs[o] += c * factor;
    }
    out
}

/// Gauss-Laguerre rule for `int_0^inf e^{-t} g(t) dt` with `n` nodes.
/// Returns `(nodes, weights)` with plain (not exponentially scaled) weights.
pub fn gauss_laguerre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(MagError::invalid("n_radial", "need at least one node"));
    }
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jac[(i, i)] = 2.0 * i as f64 + 1.0;
        if i + 1 < n {
            jac[(i, i + 1)] = (i + 1) as f64;
            jac[(i + 1, i)] = (i + 1) as f64;
        }
    }
    let mut nodes: Vec<f64> = jac.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).expect("finite nodes"));
    let mut weights = Vec::with_capacity(n);
    for t in nodes.iter_mut() {
        // Newton polish on L_n.
        for _ in 0..3 {
            let ln = laguerre_rec(n, 0.0, *t);
            let lnm1 = laguerre_rec(n - 1, 0.0, *t);
            let deriv = n as f64 * (ln - lnm1) / *t;
            if deriv != 0.0 {
                *t -= ln / deriv;
            }
        }
        let lnp1 = laguerre_rec(n + 1, 0.0, *t);
        let np1 = (n + 1) as f64;
        weights.push(*t / (np1 * np1 * lnp1 * lnp1));
    }
    Ok((nodes, weights))
}

/// A quadrature grid on the plane: Gauss-Laguerre in `t = r^2 / 2 l^2`
/// times a uniform trapezoid in angle. Weights absorb the Gaussian, so
/// `sum w_i f(x_i)` approximates `int f(x) dx` directly.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadGrid {
    /// Quadrature nodes.
    pub nodes: Vec<Point>,
    /// Positive weights (area element included).
    pub weights: Vec<f64>,
    /// Largest total degree `d` such that `exp(-|x|^2/2l^2) p(x)` is
    /// integrated exactly for every polynomial `p` of degree `<= d`.
    pub degree: usize,
    /// Number of radial nodes.
    pub n_radial: usize,
    /// Number of angular nodes.
    pub n_angle: usize,
}

impl QuadGrid {
    /// Polar grid with the given radial and angular resolutions.
    pub fn polar(n_radial: usize, n_angle: usize, params: &MagneticParams) -> Result<Self> {
        if n_angle == 0 {
            return Err(MagError::invalid("n_angle", "need at least one node"));
        }
        let (ts, ws) = gauss_laguerre(n_radial)?;
        let l = params.ell_b;
        let dtheta = 2.0 * PI / n_angle as f64;
        let mut nodes = Vec::with_capacity(n_radial * n_angle);
        let mut weights = Vec::with_capacity(n_radial * n_angle);
        for (t, w) in ts.iter().zip(ws.iter()) {
            let r = l * (2.0 * t).sqrt();
            // dx = r dr dtheta = l^2 dt dtheta; undo the e^{-t} of the rule.
            let wt = l * l * w * t.exp() * dtheta;
            for a in 0..n_angle {
                let th = a as f64 * dtheta;
                nodes.push([r * th.cos(), r * th.sin()]);
                weights.push(wt);
            }
        }
        let degree = (2 * (2 * n_radial - 1) + 1).min(n_angle - 1);
        Ok(QuadGrid {
            nodes,
            weights,
            degree,
            n_radial,
            n_angle,
        })
    }

    /// Default grid: exact for products of basis functions with all indices
    /// up to 16.
    pub fn default_for(params: &MagneticParams) -> Self {
        Self::polar(40, 72, params).expect("default grid parameters are valid")
    }

    /// Grid for twisted convolutions of low-index kernels.
    pub fn convolution_default(params: &MagneticParams) -> Self {
        Self::polar(48, 64, params).expect("default grid parameters are valid")
    }

    /// The same rule translated by `center`.
    pub fn centered(&self, center: Point) -> QuadGrid {
        let mut out = self.clone();
        for p in out.nodes.iter_mut() {
            p[0] += center[0];
            p[1] += center[1];
        }
        out
    }

    /// `sum w_i f(x_i)`.
    pub fn integrate(&self, f: impl Fn(Point) -> C64) -> C64 {
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .fold(C64::new(0.0, 0.0), |acc, (x, w)| acc + f(*x) * *w)
    }

    /// Whether an integrand of the stated total degree is integrated exactly.
    pub fn supports(&self, degree: usize) -> bool {
        degree <= self.degree
    }
}

/// A quadrature value together with an accuracy flag. The flag is `false`
/// when the integrand degree is known to exceed what the grid resolves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    /// Quadrature value.
    pub value: C64,
    /// `true` unless the grid degree is known to be insufficient.
    pub accurate: bool,
}

/// Scaled inner product `<f, g>_B = (1 / 2 pi l^2) int conj(f) g` by quadrature.
pub fn inner_product_b(
    f: &dyn Kernel,
    g: &dyn Kernel,
    grid: &QuadGrid,
    params: &MagneticParams,
) -> QuadResult {
    let l = params.ell_b;
    let value = grid.integrate(|x| f.value(x).conj() * g.value(x)) / (2.0 * PI * l * l);
    let accurate = match (f.poly_degree(), g.poly_degree()) {
        (Some(a), Some(b)) => grid.supports(a + b),
        _ => true,
    };
    QuadResult { value, accurate }
}

/// Exact scaled inner product from coefficients:
/// `sum conj(c_{n,m}) d_{n,m} / (2 pi l^2)`.
pub fn inner_product_b_coeffs(f: &KernelCoeffs, g: &KernelCoeffs) -> Result<C64> {
    f.params.ensure_compatible(&g.params)?;
    let l = f.params.ell_b;
    let cutoff = f.cutoff.min(g.cutoff);
    let mut acc = C64::new(0.0, 0.0);
    for n in 0..=cutoff {
        for m in 0..=cutoff {
            acc += f.get(n, m).conj() * g.get(n, m);
        }
    }
    Ok(acc / (2.0 * PI * l * l))
}

/// Seminorm `r_k(f) = sqrt(sum (2n+1)^k (2m+1)^k |c_{n,m}|^2)`.
pub fn seminorm_r_k(f: &KernelCoeffs, k: u32) -> f64 {
    f.entries()
        .map(|(n, m, c)| {
            ((2 * n + 1) as f64).powi(k as i32) * ((2 * m + 1) as f64).powi(k as i32) * c.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// The antilinear involution `(J f)(x) = conj(f(-x))` on coefficients. In the
/// chosen convention `J psi_{n,m} = psi_{m,n}`, so the coefficient matrix is
/// conjugate-transposed.
pub fn involution_j(f: &KernelCoeffs) -> KernelCoeffs {
    let mut out = KernelCoeffs::zeros(f.cutoff, f.params);
    for (n, m, c) in f.entries() {
        let o = out.offset(m, n);
        out.coeffs[o] = c.conj();
    }
    out
}

/// Pointwise form of the involution `J`.
pub fn involution_j_fn<'a>(f: &'a dyn Kernel) -> impl Fn(Point) -> C64 + 'a {
    move |x: Point| f.value([-x[0], -x[1]]).conj()
}
