//! The truncated magnetic algebra spanned by the transition operators
//! `Upsilon_{j->k}`.
//!
//! An element `A = sum a_{k,j} Upsilon_{j->k}` is stored as the matrix `a` with
//! row index `k` and column index `j`. Since
//! `Upsilon_{j->k} Upsilon_{m->n} = delta_{j,n} Upsilon_{m->k}`, the product of
//! two elements is the plain matrix product and the adjoint is the conjugate
//! transpose. The sign `(-1)^{m-n}` and the scale `sqrt(2 pi) l` relating
//! elements to kernels live only in [`AlgebraElement::from_kernel`] and
//! [`AlgebraElement::to_kernel`].

use crate::error::{MagError, Result};
use crate::laguerre_basis::{KernelCoeffs, MagneticParams, C64};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A finite element of the magnetic algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraElement {
    cutoff: usize,
    a: DMatrix<C64>,
    params: MagneticParams,
}

/// Serialized form `{"cutoff":N,"ell_B":x,"entries":[[k,j,re,im],...]}`.
#[derive(Debug, Serialize, Deserialize)]
struct AlgebraElementJson {
    cutoff: usize,
    #[serde(rename = "ell_B")]
    ell_b: f64,
    entries: Vec<(usize, usize, f64, f64)>,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

impl AlgebraElement {
    /// The zero element with indices `0..=cutoff`.
    pub fn zeros(cutoff: usize, params: MagneticParams) -> Self {
        AlgebraElement {
            cutoff,
            a: DMatrix::from_element(cutoff + 1, cutoff + 1, zero()),
            params,
        }
    }

    /// Builds an element from a square coefficient matrix `a[k][j]`.
    pub fn from_matrix(a: DMatrix<C64>, params: MagneticParams) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(MagError::invalid(
                "a",
                format!("need a nonempty square matrix, got {}x{}", a.nrows(), a.ncols()),
            ));
        }
        Ok(AlgebraElement {
            cutoff: a.nrows() - 1,
            a,
            params,
        })
    }

    /// The transition operator `Upsilon_{j->k}`.
    pub fn upsilon(j: usize, k: usize, cutoff: usize, params: MagneticParams) -> Result<Self> {
        if j > cutoff || k > cutoff {
            return Err(MagError::IndexOutOfRange(format!(
                "Upsilon_({j}->{k}) beyond cutoff {cutoff}"
            )));
        }
        let mut out = Self::zeros(cutoff, params);
        out.a[(k, j)] = C64::new(1.0, 0.0);
        Ok(out)
    }

    /// The Landau projection `Pi_n = Upsilon_{n->n}`.
    pub fn landau_projection(n: usize, cutoff: usize, params: MagneticParams) -> Result<Self> {
        Self::upsilon(n, n, cutoff, params)
    }

    /// Largest index `N` of the truncation.
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Magnetic parameters of the element.
    pub fn params(&self) -> &MagneticParams {
        &self.params
    }

    /// The coefficient matrix `a[k][j]`.
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.a
    }

    /// Coefficient of `Upsilon_{j->k}`; zero outside the cutoff.
    pub fn get(&self, k: usize, j: usize) -> C64 {
        if k > self.cutoff || j > self.cutoff {
            zero()
        } else {
            self.a[(k, j)]
        }
    }

    /// Sets the coefficient of `Upsilon_{j->k}`.
    pub fn set(&mut self, k: usize, j: usize, value: C64) -> Result<()> {
        if k > self.cutoff || j > self.cutoff {
            return Err(MagError::IndexOutOfRange(format!(
                "({k},{j}) beyond cutoff {}",
                self.cutoff
            )));
        }
        self.a[(k, j)] = value;
        Ok(())
    }

    /// Adds `value` to the coefficient of `Upsilon_{j->k}`.
    pub fn add_to(&mut self, k: usize, j: usize, value: C64) -> Result<()> {
        let current = self.get(k, j);
        self.set(k, j, current + value)
    }

    /// Copy with a different cutoff; shrinking drops coefficients.
    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        let mut out = Self::zeros(cutoff, self.params);
        let keep = cutoff.min(self.cutoff);
        for k in 0..=keep {
            for j in 0..=keep {
                out.a[(k, j)] = self.a[(k, j)];
            }
        }
        out
    }

    /// Nonzero coefficients as `(k, j, a_{k,j})` in row-major order.
    pub fn entries(&self) -> Vec<(usize, usize, C64)> {
        let mut out = Vec::new();
        for k in 0..=self.cutoff {
            for j in 0..=self.cutoff {
                let v = self.a[(k, j)];
                if v != zero() {
                    out.push((k, j, v));
                }
            }
        }
        out
    }

    /// Largest index carrying a nonzero coefficient, `None` for the zero element.
    pub fn support_max(&self) -> Option<usize> {
        self.entries().iter().map(|(k, j, _)| (*k).max(*j)).max()
    }

    /// `alpha A + beta B` on the larger cutoff.
    pub fn combine(&self, alpha: C64, other: &AlgebraElement, beta: C64) -> Result<Self> {
        self.params.ensure_compatible(&other.params)?;
        let cutoff = self.cutoff.max(other.cutoff);
        let mut out = Self::zeros(cutoff, self.params);
        for k in 0..=cutoff {
            for j in 0..=cutoff {
                out.a[(k, j)] = alpha * self.get(k, j) + beta * other.get(k, j);
            }
        }
        Ok(out)
    }

    /// `A + B`.
    pub fn add(&self, other: &AlgebraElement) -> Result<Self> {
        self.combine(C64::new(1.0, 0.0), other, C64::new(1.0, 0.0))
    }

    /// `A - B`.
    pub fn sub(&self, other: &AlgebraElement) -> Result<Self> {
        self.combine(C64::new(1.0, 0.0), other, C64::new(-1.0, 0.0))
    }

    /// Scalar multiple `alpha A`.
    pub fn scaled(&self, alpha: C64) -> Self {
        AlgebraElement {
            cutoff: self.cutoff,
            a: self.a.map(|v| v * alpha),
            params: self.params,
        }
    }

    /// Product `A B`. Cutoffs are merged to the larger one.
    pub fn multiply(&self, other: &AlgebraElement) -> Result<Self> {
        self.params.ensure_compatible(&other.params)?;
        let cutoff = self.cutoff.max(other.cutoff);
        let left = self.with_cutoff(cutoff);
        let right = other.with_cutoff(cutoff);
        Ok(AlgebraElement {
            cutoff,
            a: &left.a * &right.a,
            params: self.params,
        })
    }

    /// Commutator `A B - B A`.
    pub fn commutator(&self, other: &AlgebraElement) -> Result<Self> {
        self.multiply(other)?.sub(&other.multiply(self)?)
    }

    /// Adjoint `A^*`: conjugate transpose of the coefficients.
    pub fn adjoint(&self) -> Self {
        AlgebraElement {
            cutoff: self.cutoff,
            a: self.a.adjoint(),
            params: self.params,
        }
    }

    /// Largest coefficient modulus of `A - B` over the union of supports.
    pub fn max_abs_diff(&self, other: &AlgebraElement) -> f64 {
        let cutoff = self.cutoff.max(other.cutoff);
        let mut worst: f64 = 0.0;
        for k in 0..=cutoff {
            for j in 0..=cutoff {
                worst = worst.max((self.get(k, j) - other.get(k, j)).norm());
            }
        }
        worst
    }

    /// Frobenius norm of the coefficient matrix, equal to `sqrt(hs_inner(A, A))`.
    pub fn frobenius_norm(&self) -> f64 {
        self.a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `true` when every coefficient vanishes.
    pub fn is_zero(&self) -> bool {
        self.a.iter().all(|v| *v == zero())
    }

    /// The operator `L_g` of left twisted multiplication by a kernel:
    /// `L_g = (1 / sqrt(2 pi) l) sum (-1)^{m-n} g_{n,m} Upsilon_{m->n}`.
    pub fn from_kernel(g: &KernelCoeffs) -> Self {
        let params = *g.params();
        let scale = 1.0 / params.sqrt_two_pi_ell();
        let mut out = Self::zeros(g.cutoff(), params);
        for (n, m, c) in g.entries() {
            out.a[(n, m)] = c * sign(n, m) * scale;
        }
        out
    }

    /// Inverse of [`AlgebraElement::from_kernel`].
    pub fn to_kernel(&self) -> KernelCoeffs {
        let scale = self.params.sqrt_two_pi_ell();
        let mut out = KernelCoeffs::zeros(self.cutoff, self.params);
        for (n, m, c) in self.entries() {
            out.set(n, m, c * sign(n, m) * scale)
                .expect("indices lie inside the shared cutoff");
        }
        out
    }

    /// The trace `sum_j a_{j,j}`, so that `trace(Upsilon_{j->k}) = delta_{j,k}`.
    pub fn trace_b(&self) -> C64 {
        self.a.diagonal().iter().sum()
    }

    /// Trace per unit volume `trace_b(A) / (2 pi l^2)`.
    pub fn trace_per_unit_volume(&self) -> C64 {
        let l = self.params.ell_b;
        self.trace_b() / (2.0 * PI * l * l)
    }

    /// Hilbert-Schmidt pairing `trace_b(A^* B)`.
    pub fn hs_inner(&self, other: &AlgebraElement) -> Result<C64> {
        self.params.ensure_compatible(&other.params)?;
        let cutoff = self.cutoff.min(other.cutoff);
        let mut acc = zero();
        for k in 0..=cutoff {
            for j in 0..=cutoff {
                acc += self.a[(k, j)].conj() * other.a[(k, j)];
            }
        }
        Ok(acc)
    }

    /// Heat semigroup `exp(-s H / E) = exp(-s/2) sum_j exp(-s j) Pi_j`,
    /// truncated to `j <= cutoff`. See [`heat_tail`] for the omitted trace.
    pub fn heat_element(s: f64, cutoff: usize, params: MagneticParams) -> Result<Self> {
        check_heat_time(s)?;
        let mut out = Self::zeros(cutoff, params);
        for j in 0..=cutoff {
            out.a[(j, j)] = C64::new((-0.5 * s - s * j as f64).exp(), 0.0);
        }
        Ok(out)
    }

    /// Action on a state `v = sum v_{n,m} psi_{n,m}`:
    /// `(A v)_{k,m} = sum_j a_{k,j} v_{j,m}`. The second index is never touched.
    pub fn apply_to_state(&self, v: &KernelCoeffs) -> Result<KernelCoeffs> {
        self.params.ensure_compatible(v.params())?;
        let cutoff = self.cutoff.max(v.cutoff());
        let mut out = KernelCoeffs::zeros(cutoff, self.params);
        for (j, m, c) in v.entries() {
            if c == zero() || j > self.cutoff {
                continue;
            }
            for k in 0..=self.cutoff {
                let a = self.a[(k, j)];
                if a != zero() {
                    let cur = out.get(k, m);
                    out.set(k, m, cur + a * c)?;
                }
            }
        }
        Ok(out)
    }

    /// Serializes to the documented JSON schema (nonzero entries only).
    pub fn to_json(&self) -> String {
        let entries = self
            .entries()
            .into_iter()
            .map(|(k, j, c)| (k, j, c.re, c.im))
            .collect();
        serde_json::to_string(&AlgebraElementJson {
            cutoff: self.cutoff,
            ell_b: self.params.ell_b,
            entries,
        })
        .expect("element serialization cannot fail")
    }

    /// Parses the documented JSON schema; the energy scale defaults to 1.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: AlgebraElementJson = serde_json::from_str(text)?;
        let params = MagneticParams::new(raw.ell_b, 1.0)?;
        let mut out = Self::zeros(raw.cutoff, params);
        for (k, j, re, im) in raw.entries {
            out.set(k, j, C64::new(re, im))?;
        }
        Ok(out)
    }
}

/// `(-1)^{m-n}`.
fn sign(n: usize, m: usize) -> f64 {
    if (n + m) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn check_heat_time(s: f64) -> Result<()> {
    if !(s.is_finite() && s > 0.0) {
        return Err(MagError::invalid("s", format!("must be > 0, got {s}")));
    }
    Ok(())
}

/// Trace carried by the levels `j > cutoff` of the heat semigroup:
/// `exp(-s/2) exp(-s (cutoff + 1)) / (1 - exp(-s))`.
pub fn heat_tail(s: f64, cutoff: usize) -> Result<f64> {
    check_heat_time(s)?;
    Ok((-0.5 * s - s * (cutoff + 1) as f64).exp() / (1.0 - (-s).exp()))
}

/// The dual Landau projection `P_m`, which keeps only the components with
/// second index `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualProjectionSpec {
    /// Second Laguerre index selected by the projection.
    pub m: usize,
}

impl DualProjectionSpec {
    /// The projection onto the sector with second index `m`.
    pub fn new(m: usize) -> Self {
        DualProjectionSpec { m }
    }

    /// Applies `P_m` to a state.
    pub fn apply(&self, v: &KernelCoeffs) -> KernelCoeffs {
        let mut out = KernelCoeffs::zeros(v.cutoff(), *v.params());
        for (n, m, c) in v.entries() {
            if m == self.m {
                out.set(n, m, c).expect("same cutoff");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> MagneticParams {
        MagneticParams::default()
    }

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    #[test]
    fn product_follows_delta_rule() {
        let u01 = AlgebraElement::upsilon(0, 1, 3, p()).unwrap();
        let u20 = AlgebraElement::upsilon(2, 0, 3, p()).unwrap();
        let u21 = AlgebraElement::upsilon(2, 1, 3, p()).unwrap();
        assert_eq!(u01.multiply(&u20).unwrap(), u21);
        let u10 = AlgebraElement::upsilon(1, 0, 3, p()).unwrap();
        let pi1 = AlgebraElement::landau_projection(1, 3, p()).unwrap();
        assert_eq!(u01.multiply(&u10).unwrap(), pi1);
        let pi0 = AlgebraElement::landau_projection(0, 3, p()).unwrap();
        assert!(pi0.multiply(&pi1).unwrap().is_zero());
    }

    #[test]
    fn adjoint_swaps_indices() {
        let u12 = AlgebraElement::upsilon(1, 2, 3, p()).unwrap();
        let u21 = AlgebraElement::upsilon(2, 1, 3, p()).unwrap();
        assert_eq!(u12.adjoint(), u21);
        assert_eq!(u12.adjoint().adjoint(), u12);
    }

    #[test]
    fn kernel_round_trip_and_signs() {
        let psi10 = KernelCoeffs::basis(1, 0, p());
        let l = AlgebraElement::from_kernel(&psi10);
        let expected = AlgebraElement::upsilon(0, 1, 1, p())
            .unwrap()
            .scaled(C64::new(-1.0 / p().sqrt_two_pi_ell(), 0.0));
        assert!(l.max_abs_diff(&expected) < 1e-15);
        assert!(l.to_kernel().max_abs_diff(&psi10) < 1e-15);

        let pn = KernelCoeffs::basis(2, 2, p()).scaled(C64::new(p().sqrt_two_pi_ell(), 0.0));
        let pi2 = AlgebraElement::landau_projection(2, 2, p()).unwrap();
        assert!(AlgebraElement::from_kernel(&pn).max_abs_diff(&pi2) < 1e-15);
    }

    #[test]
    fn traces_of_special_elements() {
        for n in 0..=8 {
            let pi = AlgebraElement::landau_projection(n, 8, p()).unwrap();
            assert_eq!(pi.trace_b(), one());
        }
        assert_eq!(AlgebraElement::upsilon(0, 1, 2, p()).unwrap().trace_b(), zero());
        for s in [0.5, 1.0, 2.0] {
            let h = AlgebraElement::heat_element(s, 80, p()).unwrap();
            let exact = 1.0 / (2.0 * (0.5 * s).sinh());
            assert!((h.trace_b().re - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn heat_tail_closes_the_trace() {
        let s = 0.3;
        let h = AlgebraElement::heat_element(s, 10, p()).unwrap();
        let exact = 1.0 / (2.0 * (0.5 * s).sinh());
        let tail = heat_tail(s, 10).unwrap();
        assert!((h.trace_b().re + tail - exact).abs() < 1e-12);
        assert!(AlgebraElement::heat_element(0.0, 3, p()).is_err());
    }

    #[test]
    fn hs_inner_values() {
        let pi0 = AlgebraElement::landau_projection(0, 2, p()).unwrap();
        let pi1 = AlgebraElement::landau_projection(1, 2, p()).unwrap();
        let u01 = AlgebraElement::upsilon(0, 1, 2, p()).unwrap();
        assert_eq!(pi0.hs_inner(&pi0).unwrap(), one());
        assert_eq!(u01.hs_inner(&u01).unwrap(), one());
        assert_eq!(pi0.hs_inner(&pi1).unwrap(), zero());
    }

    #[test]
    fn state_action() {
        let pi0 = AlgebraElement::landau_projection(0, 5, p()).unwrap();
        let v = KernelCoeffs::basis(0, 5, p());
        assert_eq!(pi0.apply_to_state(&v).unwrap().max_abs_diff(&v), 0.0);
        let w = KernelCoeffs::basis(1, 0, p());
        assert_eq!(pi0.apply_to_state(&w).unwrap().max_abs_diff(&KernelCoeffs::zeros(1, p())), 0.0);
        let u = AlgebraElement::upsilon(1, 3, 4, p()).unwrap();
        let out = u.apply_to_state(&KernelCoeffs::basis(1, 2, p())).unwrap();
        assert_eq!(out.get(3, 2), one());
    }

    #[test]
    fn trace_per_unit_volume_scales() {
        let params = MagneticParams::new(2.0, 1.0).unwrap();
        let pi0 = AlgebraElement::landau_projection(0, 1, params).unwrap();
        assert!((pi0.trace_per_unit_volume().re - 1.0 / (8.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let mut a = AlgebraElement::zeros(3, p());
        a.set(2, 1, C64::new(0.25, -1.5)).unwrap();
        a.set(0, 3, C64::new(-2.0, 0.0)).unwrap();
        let back = AlgebraElement::from_json(&a.to_json()).unwrap();
        assert_eq!(a, back);
        assert!(AlgebraElement::from_json("{\"cutoff\":1}").is_err());
    }

    #[test]
    fn dual_projection_keeps_one_sector() {
        let mut v = KernelCoeffs::zeros(2, p());
        v.set(0, 1, one()).unwrap();
        v.set(1, 2, one()).unwrap();
        let out = DualProjectionSpec::new(2).apply(&v);
        assert_eq!(out.get(0, 1), zero());
        assert_eq!(out.get(1, 2), one());
    }

    #[test]
    fn mismatched_params_rejected() {
        let other = MagneticParams::new(2.0, 1.0).unwrap();
        let a = AlgebraElement::landau_projection(0, 1, p()).unwrap();
        let b = AlgebraElement::landau_projection(0, 1, other).unwrap();
        assert!(a.multiply(&b).is_err());
    }
}
