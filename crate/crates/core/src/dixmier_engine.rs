//! Singular value streams, the functionals `sigma_N` and `gamma_N`, Calderon
//! norms, Dixmier-trace estimation by extrapolation in `log N`, and the
//! trace identities and Connes formula built on top of them.
//!
//! A Dixmier trace is the limit of `gamma_N(T) = sigma_N(T) / log N`, where
//! `sigma_N` is the sum of the `N` largest singular values. The estimators
//! sample `gamma_N` at `N = 2^k` and fit a short expansion in `1 / log N`.

use crate::dirac_triple::{graded_quasi_differential, GammaSet, SparseOp, SpinorSpace, CHIRALITY, VARPI};
use crate::error::{MagError, Result};
use crate::laguerre_basis::{MagneticParams, C64};
use crate::magnetic_algebra::AlgebraElement;
use crate::nc_calculus::gradient_pairing;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

/// Smallest sample `N = 2^4` used by the extrapolation fits.
pub const MIN_SAMPLE_EXPONENT: u32 = 4;

/// Relative gap under which two singular values are merged into one run.
const MERGE_RTOL: f64 = 1e-14;

/// A nonincreasing sequence of singular values stored as runs
/// `(value, multiplicity)` with strictly decreasing values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularSpectrum {
    runs: Vec<(f64, u64)>,
    available: u64,
    exhaustive: bool,
}

impl SingularSpectrum {
    /// Builds a spectrum from runs. `exhaustive` states that every nonzero
    /// singular value is listed, so that the sequence continues with zeros.
    pub fn from_runs(runs: Vec<(f64, u64)>, exhaustive: bool) -> Result<Self> {
        let mut merged: Vec<(f64, u64)> = Vec::with_capacity(runs.len());
        for (v, mult) in runs {
            if !(v.is_finite() && v > 0.0) || mult == 0 {
                return Err(MagError::invalid(
                    "runs",
                    format!("need positive values and multiplicities, got ({v}, {mult})"),
                ));
            }
            match merged.last_mut() {
                Some((last, count)) if (*last - v).abs() <= MERGE_RTOL * *last => *count += mult,
                Some((last, _)) if v > *last => {
                    return Err(MagError::invalid("runs", "values must be decreasing"))
                }
                _ => merged.push((v, mult)),
            }
        }
        let available = merged.iter().map(|(_, k)| *k).sum();
        Ok(SingularSpectrum {
            runs: merged,
            available,
            exhaustive,
        })
    }

    /// Finite spectrum from arbitrary nonnegative values; zeros are dropped.
    pub fn from_values(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(MagError::invalid("values", "singular values must be finite and >= 0"));
        }
        values.retain(|v| *v > 0.0);
        values.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
        Self::from_runs(values.into_iter().map(|v| (v, 1)).collect(), true)
    }

    /// The empty (zero operator) spectrum.
    pub fn zero() -> Self {
        SingularSpectrum {
            runs: Vec::new(),
            available: 0,
            exhaustive: true,
        }
    }

    /// Runs `(value, multiplicity)`.
    pub fn runs(&self) -> &[(f64, u64)] {
        &self.runs
    }

    /// Number of singular values listed.
    pub fn available(&self) -> u64 {
        self.available
    }

    /// `true` when the sequence is known to continue with zeros.
    pub fn is_exhaustive(&self) -> bool {
        self.exhaustive
    }

    /// Flat enumeration of the first `count` values.
    pub fn values(&self, count: u64) -> Result<Vec<f64>> {
        self.check_depth(count)?;
        let mut out = Vec::with_capacity(count as usize);
        for &(v, k) in &self.runs {
            for _ in 0..k {
                if out.len() as u64 == count {
                    return Ok(out);
                }
                out.push(v);
            }
        }
        out.resize(count as usize, 0.0);
        Ok(out)
    }

    fn check_depth(&self, n: u64) -> Result<()> {
        if n > self.available && !self.exhaustive {
            return Err(MagError::SpectrumExhausted {
                requested: n as usize,
                available: self.available as usize,
            });
        }
        Ok(())
    }

    /// `sigma_N`: sum of the `N` largest singular values, by run arithmetic.
    pub fn partial_sum(&self, n: u64) -> Result<f64> {
        self.check_depth(n)?;
        let mut left = n;
        let mut acc = 0.0;
        for &(v, k) in &self.runs {
            if left == 0 {
                break;
            }
            let take = k.min(left);
            acc += v * take as f64;
            left -= take;
        }
        Ok(acc)
    }

    /// `sigma_N` for every `N` in the increasing list `ns`, in one pass.
    pub fn partial_sums(&self, ns: &[u64]) -> Result<Vec<f64>> {
        if let Some(last) = ns.last() {
            self.check_depth(*last)?;
        }
        let mut out = Vec::with_capacity(ns.len());
        let mut acc = 0.0;
        let mut consumed = 0u64;
        let mut run = 0usize;
        let mut used_in_run = 0u64;
        for &target in ns {
            if target < consumed {
                return Err(MagError::invalid("ns", "sample sizes must be increasing"));
            }
            while consumed < target && run < self.runs.len() {
                let (v, k) = self.runs[run];
                let take = (k - used_in_run).min(target - consumed);
                acc += v * take as f64;
                consumed += take;
                used_in_run += take;
                if used_in_run == k {
                    run += 1;
                    used_in_run = 0;
                }
            }
            consumed = target;
            out.push(acc);
        }
        Ok(out)
    }
}

/// `gamma_N = sigma_N / log N` for `N > 1`.
pub fn gamma_n(spec: &SingularSpectrum, n: u64) -> Result<f64> {
    if n < 2 {
        return Err(MagError::invalid("N", format!("must be > 1, got {n}")));
    }
    Ok(spec.partial_sum(n)? / (n as f64).ln())
}

/// Which Calderon norm to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CalderonOrder {
    /// `sup_{N>1} sigma_N / log N`.
    OnePlus,
    /// `sup_{N>=1} sigma_N / sqrt N`.
    TwoPlus,
}

/// A Calderon norm evaluated over the listed part of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalderonNorm {
    /// Supremum over every `N` up to the listed depth.
    pub value: f64,
    /// `N` attaining the supremum.
    pub attained_at: u64,
    /// `true` when the supremum sits at the last examined `N`, so the listed
    /// part cannot exclude growth beyond it.
    pub possibly_divergent: bool,
}

/// Calderon norm of order `1+` or `2+`, evaluated at every `N` up to the
/// listed depth (or up to the rank for exhaustive spectra).
pub fn calderon_norm(spec: &SingularSpectrum, order: CalderonOrder) -> Result<CalderonNorm> {
    let depth = spec.available();
    let start = match order {
        CalderonOrder::OnePlus => 2,
        CalderonOrder::TwoPlus => 1,
    };
    if depth < start {
        return Ok(CalderonNorm {
            value: 0.0,
            attained_at: start,
            possibly_divergent: false,
        });
    }
    let mut best = (f64::NEG_INFINITY, start);
    let mut acc = 0.0;
    let mut n = 0u64;
    for &(v, k) in spec.runs() {
        for _ in 0..k {
            acc += v;
            n += 1;
            if n < start {
                continue;
            }
            let val = match order {
                CalderonOrder::OnePlus => acc / (n as f64).ln(),
                CalderonOrder::TwoPlus => acc / (n as f64).sqrt(),
            };
            if val > best.0 {
                best = (val, n);
            }
        }
    }
    Ok(CalderonNorm {
        value: best.0,
        attained_at: best.1,
        possibly_divergent: !spec.is_exhaustive() && best.1 == depth,
    })
}

/// Analytically known spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum AnalyticKind {
    /// `Q_eps^{-s}`: value `(j + 1 + eps)^{-s}` with multiplicity `j + 1`.
    QPower {
        /// Exponent `s > 0`.
        s: f64,
    },
    /// `Q_eps^{-1} Pi_j`: values `(m + j + 1 + eps)^{-1}`, multiplicity one.
    QInvProjection {
        /// Landau level.
        j: usize,
    },
    /// `Q_eps^{-1} Upsilon_{j->k}`: values `(m + k + 1 + eps)^{-1}`.
    QInvUpsilon {
        /// Source level.
        j: usize,
        /// Target level.
        k: usize,
    },
    /// `Q_eps^{-1/2} Upsilon_{j->k} Q_{eps'}^{-1/2}`: values
    /// `((m + k + 1 + eps)(m + j + 1 + eps'))^{-1/2}`.
    QHalfUpsilonQHalf {
        /// Source level.
        j: usize,
        /// Target level.
        k: usize,
        /// Shift `eps'` of the right factor.
        eps_prime: f64,
    },
    /// `|D_eps|^{-s} = (D^2 + eps)^{-s/2}`: the union of the four families
    /// `Q_{eps + w_r}^{-s/2}`.
    DiracPower {
        /// Exponent `s > 0`.
        s: f64,
    },
}

impl AnalyticKind {
    /// Parses the short names used by the command line:
    /// `q<s>`, `d<s>`, `qpi<j>` and `qups<j>_<k>`.
    pub fn parse(name: &str) -> Result<Self> {
        let bad = || MagError::Config(format!("unknown spectrum case `{name}`"));
        let pair = |rest: &str| -> Result<(usize, usize)> {
            let (a, b) = rest.split_once('_').ok_or_else(bad)?;
            Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
        };
        if let Some(rest) = name.strip_prefix("qpi") {
            return Ok(AnalyticKind::QInvProjection {
                j: rest.parse().map_err(|_| bad())?,
            });
        }
        if let Some(rest) = name.strip_prefix("qups") {
            let (j, k) = pair(rest)?;
            return Ok(AnalyticKind::QInvUpsilon { j, k });
        }
        if let Some(rest) = name.strip_prefix('q') {
            return Ok(AnalyticKind::QPower {
                s: rest.parse().map_err(|_| bad())?,
            });
        }
        if let Some(rest) = name.strip_prefix('d') {
            return Ok(AnalyticKind::DiracPower {
                s: rest.parse().map_err(|_| bad())?,
            });
        }
        Err(bad())
    }
}

/// One decreasing family `index -> (value, multiplicity)`.
type Family = Box<dyn Fn(u64) -> (f64, u64)>;

struct HeapItem {
    value: f64,
    mult: u64,
    family: usize,
    index: u64,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then_with(|| other.family.cmp(&self.family))
    }
}

/// Merges decreasing families until at least `depth` values are listed.
fn merge_families(families: Vec<Family>, depth: u64) -> Result<SingularSpectrum> {
    let mut heap = BinaryHeap::new();
    for (i, f) in families.iter().enumerate() {
        let (value, mult) = f(0);
        heap.push(HeapItem {
            value,
            mult,
            family: i,
            index: 0,
        });
    }
    let mut runs: Vec<(f64, u64)> = Vec::new();
    let mut count = 0u64;
    let mut last = f64::INFINITY;
    while count < depth {
        let item = heap.pop().expect("families are infinite");
        if item.value > last * (1.0 + 1e-12) {
            return Err(MagError::Numerical("analytic family is not decreasing".into()));
        }
        last = item.value;
        runs.push((item.value, item.mult));
        count += item.mult;
        let next = item.index + 1;
        let (value, mult) = families[item.family](next);
        heap.push(HeapItem {
            value,
            mult,
            family: item.family,
            index: next,
        });
    }
    SingularSpectrum::from_runs(runs, false)
}

/// Exact spectrum of an analytic case, listed to at least `depth` values.
pub fn analytic_spectrum(kind: AnalyticKind, eps: f64, depth: u64) -> Result<SingularSpectrum> {
    let positive_shift = |shift: f64| -> Result<()> {
        if !(shift.is_finite() && shift > 0.0) {
            return Err(MagError::invalid("eps", format!("lowest eigenvalue {shift} must be > 0")));
        }
        Ok(())
    };
    let families: Vec<Family> = match kind {
        AnalyticKind::QPower { s } => {
            check_exponent(s)?;
            positive_shift(1.0 + eps)?;
            vec![Box::new(move |j| (((j + 1) as f64 + eps).powf(-s), j + 1))]
        }
        AnalyticKind::QInvProjection { j } => {
            positive_shift(1.0 + eps)?;
            vec![Box::new(move |m| (1.0 / ((m + j as u64 + 1) as f64 + eps), 1))]
        }
        AnalyticKind::QInvUpsilon { k, .. } => {
            positive_shift(1.0 + eps)?;
            vec![Box::new(move |m| (1.0 / ((m + k as u64 + 1) as f64 + eps), 1))]
        }
        AnalyticKind::QHalfUpsilonQHalf { j, k, eps_prime } => {
            positive_shift(1.0 + eps)?;
            positive_shift(1.0 + eps_prime)?;
            vec![Box::new(move |m| {
                let a = (m + k as u64 + 1) as f64 + eps;
                let b = (m + j as u64 + 1) as f64 + eps_prime;
                (1.0 / (a * b).sqrt(), 1)
            })]
        }
        AnalyticKind::DiracPower { s } => {
            check_exponent(s)?;
            let mut fams: Vec<Family> = Vec::new();
            for w in VARPI {
                let shift = eps + w as f64;
                positive_shift(1.0 + shift)?;
                fams.push(Box::new(move |j| (((j + 1) as f64 + shift).powf(-0.5 * s), j + 1)));
            }
            fams
        }
    };
    merge_families(families, depth)
}

fn check_exponent(s: f64) -> Result<()> {
    if !(s.is_finite() && s > 0.0) {
        return Err(MagError::invalid("s", format!("exponent must be > 0, got {s}")));
    }
    Ok(())
}

/// Extrapolation models for `gamma_N` in terms of `L = log N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FitModel {
    /// `gamma_N = c + a / L + b / L^2`.
    LogQuadratic,
    /// `gamma_N = c + a / L + d / (N L) + e / (N^2 L)`, that is
    /// `sigma_N = c log N + a + d / N + e / N^2`. This is the large-`N` form of
    /// partial sums over shifted harmonic families, including the staircase
    /// spectra produced by the matrix path.
    HarmonicTail,
    /// `sigma_N = c log N + a + d / sqrt N + e / N`. Spectra whose
    /// multiplicities grow linearly, such as those of `Q^{-2}` and `|D|^{-4}`,
    /// have partial sums with this expansion.
    PowerTail,
}

impl FitModel {
    fn row(&self, n: f64) -> Vec<f64> {
        let l = n.ln();
        match self {
            FitModel::LogQuadratic => vec![1.0, 1.0 / l, 1.0 / (l * l)],
            FitModel::HarmonicTail => vec![1.0, 1.0 / l, 1.0 / (n * l), 1.0 / (n * n * l)],
            FitModel::PowerTail => vec![1.0, 1.0 / l, 1.0 / (n.sqrt() * l), 1.0 / (n * l)],
        }
    }

    /// Smallest sample size entering the fit.
    pub fn min_sample(&self) -> u64 {
        match self {
            FitModel::PowerTail => 1 << 8,
            _ => 1 << MIN_SAMPLE_EXPONENT,
        }
    }

    /// Parses the report name back into a model.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "log-quadratic" => Ok(FitModel::LogQuadratic),
            "harmonic-tail" => Ok(FitModel::HarmonicTail),
            "power-tail" => Ok(FitModel::PowerTail),
            _ => Err(MagError::invalid("model", format!("unknown fit model {name:?}"))),
        }
    }

    /// Short name used in reports.
    pub fn name(&self) -> &'static str {
        match self {
            FitModel::LogQuadratic => "log-quadratic",
            FitModel::HarmonicTail => "harmonic-tail",
            FitModel::PowerTail => "power-tail",
        }
    }
}

/// Result of a Dixmier-trace extrapolation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DixmierEstimate {
    /// Samples `(N, gamma_N)` at `N = 2^k`.
    pub gamma_samples: Vec<(u64, f64)>,
    /// Extrapolated limit `c`.
    pub extrapolated: f64,
    /// Root mean square residual of the fit.
    pub model_residual: f64,
    /// Least-squares standard error of `extrapolated`.
    pub standard_error: f64,
    /// Largest `N` used.
    pub n_max: u64,
    /// Model that produced `extrapolated`.
    pub model: FitModel,
    /// All fitted coefficients, leading constant first.
    pub coefficients: Vec<f64>,
    /// Increment estimate `(sigma_N - sigma_{N/2}) / log 2` at the largest sample.
    pub increment_estimate: f64,
    /// `true` when the residual exceeds the tolerance passed to the fit.
    pub poor_fit: bool,
}

impl DixmierEstimate {
    /// The estimate of the zero operator.
    pub fn zero(n_max: u64, model: FitModel) -> Self {
        let samples = sample_sizes(n_max)
            .unwrap_or_default()
            .into_iter()
            .map(|n| (n, 0.0))
            .collect();
        DixmierEstimate {
            gamma_samples: samples,
            extrapolated: 0.0,
            model_residual: 0.0,
            standard_error: 0.0,
            n_max,
            model,
            coefficients: vec![0.0; 3],
            increment_estimate: 0.0,
            poor_fit: false,
        }
    }
}

/// Sample sizes `2^k` with `2^4 <= 2^k <= n_max`, followed by `n_max` itself
/// when it is not a power of two.
pub fn sample_sizes(n_max: u64) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    let mut k = MIN_SAMPLE_EXPONENT;
    while k < 63 && (1u64 << k) <= n_max {
        out.push(1u64 << k);
        k += 1;
    }
    if !n_max.is_power_of_two() && out.last().is_some_and(|&last| last < n_max) {
        out.push(n_max);
    }
    if out.len() < 4 {
        return Err(MagError::invalid(
            "N_max",
            format!("need N_max >= {} for a stable fit, got {n_max}", 1u64 << (MIN_SAMPLE_EXPONENT + 3)),
        ));
    }
    Ok(out)
}

/// Least-squares extrapolation of `gamma_N` sampled at `N = 2^k <= n_max`.
/// The value is always returned; `poor_fit` flags a residual above `tolerance`.
pub fn dixmier_estimate(
    spec: &SingularSpectrum,
    n_max: u64,
    model: FitModel,
    tolerance: f64,
) -> Result<DixmierEstimate> {
    let ns: Vec<u64> = sample_sizes(n_max)?
        .into_iter()
        .filter(|&n| n >= model.min_sample())
        .collect();
    if ns.len() < model.row(2.0).len() + 1 {
        return Err(MagError::invalid(
            "N_max",
            format!("too few samples above {} for the {} model", model.min_sample(), model.name()),
        ));
    }
    let sums = spec.partial_sums(&ns)?;
    let gammas: Vec<f64> = ns.iter().zip(&sums).map(|(n, s)| s / (*n as f64).ln()).collect();
    let rows: Vec<Vec<f64>> = ns.iter().map(|n| model.row(*n as f64)).collect();
    let cols = rows[0].len();
    let a = DMatrix::from_fn(ns.len(), cols, |i, j| rows[i][j]);
    let b = DVector::from_vec(gammas.clone());
    let svd = a.clone().svd(true, true);
    let coef = svd
        .solve(&b, 1e-14)
        .map_err(|e| MagError::Numerical(format!("least squares failed: {e}")))?;
    let fitted = &a * &coef;
    let rss: f64 = (fitted - &b).iter().map(|r| r * r).sum();
    let model_residual = (rss / ns.len() as f64).sqrt();
    let dof = ns.len().saturating_sub(cols).max(1) as f64;
    let standard_error = (a.transpose() * &a)
        .try_inverse()
        .map(|inv| (rss / dof * inv[(0, 0)].max(0.0)).sqrt())
        .unwrap_or(f64::INFINITY);
    let last = sums.len() - 1;
    let increment_estimate = (sums[last] - sums[last - 1]) / std::f64::consts::LN_2;
    Ok(DixmierEstimate {
        gamma_samples: ns.iter().copied().zip(gammas).collect(),
        extrapolated: coef[0],
        model_residual,
        standard_error,
        n_max: *ns.last().expect("nonempty"),
        model,
        coefficients: coef.iter().copied().collect(),
        increment_estimate,
        poor_fit: model_residual > tolerance,
    })
}

/// Settings of the matrix path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatrixPathOptions {
    /// Number of singular values used by the fit.
    pub n_max: u64,
    /// Required ratio of the truncated dimension to `n_max`.
    pub dominance_ratio: f64,
    /// Fit model.
    pub model: FitModel,
    /// Residual threshold for the `poor_fit` flag.
    pub tolerance: f64,
    /// Largest connected block handed to the dense eigensolver.
    pub max_component: usize,
}

impl Default for MatrixPathOptions {
    fn default() -> Self {
        MatrixPathOptions {
            n_max: 1 << 12,
            dominance_ratio: 10.0,
            model: FitModel::HarmonicTail,
            tolerance: 1e-2,
            max_component: 4000,
        }
    }
}

/// Eigenvalues of a Hermitian sparse operator. The operator is split into the
/// connected components of its sparsity graph and every component is solved
/// densely.
pub fn hermitian_eigenvalues(t: &SparseOp, max_component: usize) -> Result<Vec<f64>> {
    let dim = t.dim();
    let mut parent: Vec<usize> = (0..dim).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (i, j, _) in t.triplets() {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut members: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..dim {
        if !t.row(i).is_empty() {
            let root = find(&mut parent, i);
            members.entry(root).or_default().push(i);
        }
    }
    let mut out = Vec::new();
    for nodes in members.values() {
        if nodes.len() > max_component {
            return Err(MagError::Numerical(format!(
                "connected block of size {} exceeds the dense limit {max_component}",
                nodes.len()
            )));
        }
        if nodes.len() == 1 {
            let v = t.get(nodes[0], nodes[0]);
            out.push(v.re);
            continue;
        }
        let local = |g: usize| nodes.binary_search(&g).ok();
        let mut m = DMatrix::from_element(nodes.len(), nodes.len(), C64::new(0.0, 0.0));
        for (a, &g) in nodes.iter().enumerate() {
            for (col, v) in t.row(g) {
                if let Some(b) = local(*col) {
                    m[(a, b)] = *v;
                }
            }
        }
        out.extend(m.symmetric_eigenvalues().iter().copied());
    }
    Ok(out)
}

/// Spectrum of a positive semidefinite sparse operator.
pub fn positive_spectrum(t: &SparseOp, max_component: usize) -> Result<SingularSpectrum> {
    spectrum_from_eigenvalues(hermitian_eigenvalues(t, max_component)?)
}

/// Dixmier-trace estimate of a positive semidefinite truncated operator.
/// Rejects truncations whose dimension is below `dominance_ratio * n_max`.
pub fn dixmier_positive_operator(t: &SparseOp, opts: &MatrixPathOptions) -> Result<DixmierEstimate> {
    if (t.dim() as f64) < opts.dominance_ratio * opts.n_max as f64 {
        return Err(MagError::TruncationTooSmall {
            dimension: t.dim(),
            n_max: opts.n_max as usize,
        });
    }
    estimate_from_eigenvalues(hermitian_eigenvalues(t, opts.max_component)?, opts)
}

fn spectrum_from_eigenvalues(eig: Vec<f64>) -> Result<SingularSpectrum> {
    let top = eig.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if let Some(bad) = eig.iter().find(|v| **v < -1e-10 * top.max(1.0)) {
        return Err(MagError::invalid(
            "T",
            format!("operator is not positive semidefinite (eigenvalue {bad})"),
        ));
    }
    SingularSpectrum::from_values(eig.into_iter().map(|v| v.max(0.0)).collect())
}

fn estimate_from_eigenvalues(eig: Vec<f64>, opts: &MatrixPathOptions) -> Result<DixmierEstimate> {
    let spec = spectrum_from_eigenvalues(eig)?;
    if spec.available() == 0 {
        return Ok(DixmierEstimate::zero(opts.n_max, opts.model));
    }
    dixmier_estimate(&spec, opts.n_max, opts.model, opts.tolerance)
}

/// Builds `d(rho(A))` for a finite element.
pub type DifferentialBuilder<'a> = dyn Fn(&AlgebraElement) -> Result<(SpinorSpace, SparseOp)> + 'a;

/// The standard builder: `d(rho A) = [F_eps, rho(A)]_chi` on the truncation
/// `n <= support(A) + 1`, `m <= dual_cutoff`. Both `F` and `rho(A)` move the
/// Landau index by at most one past the support of `A`, so the Landau
/// truncation is exact and only the dual index is cut.
pub fn quasi_differential_builder(
    eps: f64,
    dual_cutoff: usize,
    landau_cutoff: usize,
) -> impl Fn(&AlgebraElement) -> Result<(SpinorSpace, SparseOp)> {
    move |a: &AlgebraElement| {
        let space = SpinorSpace::new(landau_cutoff, dual_cutoff);
        let gammas = GammaSet::standard();
        let f = space.dirac_phase(&gammas, eps)?;
        let chi = space.chirality();
        let rho = space.rho(a);
        Ok((space, graded_quasi_differential(&rho, &f, &chi)?))
    }
}

/// Spectrum of `|d(rho A)|^2 = d(rho A)^* d(rho A)` on the builder's
/// truncation, largest values first.
pub fn differential_square_spectrum(
    a: &AlgebraElement,
    builder: &DifferentialBuilder<'_>,
    max_component: usize,
) -> Result<SingularSpectrum> {
    let (_, d) = builder(a)?;
    positive_spectrum(&d.adjoint().matmul(&d)?, max_component)
}

/// Sesquilinear Dixmier estimate `Tr_Dix(x^* y)` for `x = d(rho A_1)`,
/// `y = d(rho A_2)`, through `x^* y = (1/4) sum_k i^{-k} |x + i^k y|^2`.
/// With `chirality` set, `chi x^* y` is estimated instead, splitting each
/// positive term into its two chirality sectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SesquilinearEstimate {
    /// Combined estimate.
    pub value: C64,
    /// Sum of the fit residuals of every positive term, weighted by `1/4`.
    pub residual: f64,
    /// Increment estimates combined with the same weights.
    pub increment_value: C64,
    /// The positive terms `(label, estimate)` that were combined.
    pub terms: Vec<(String, DixmierEstimate)>,
}

fn chirality_sector(space: &SpinorSpace, t: &SparseOp, sign: f64) -> Result<SparseOp> {
    let mut trip = Vec::new();
    for (i, j, v) in t.triplets() {
        let (ci, cj) = (CHIRALITY[space.state(i).r], CHIRALITY[space.state(j).r]);
        if ci != cj && v.norm() > 1e-13 {
            return Err(MagError::Numerical("operator mixes chirality sectors".into()));
        }
        if ci == sign {
            trip.push((i, j, v));
        }
    }
    Ok(SparseOp::from_triplets(t.dim(), trip))
}

/// See [`SesquilinearEstimate`].
pub fn dixmier_sesquilinear(
    a1: &AlgebraElement,
    a2: &AlgebraElement,
    builder: &DifferentialBuilder<'_>,
    opts: &MatrixPathOptions,
    chirality: bool,
) -> Result<SesquilinearEstimate> {
    let (plain, chi) = sesquilinear_with_chirality(a1, a2, builder, opts)?;
    Ok(if chirality { chi } else { plain })
}

/// Both sesquilinear estimates, without and with the chirality inserted.
/// Each positive term `|z|^2` is even, so it splits into its two chirality
/// sectors; the plain spectrum is the union of the sector spectra.
pub fn sesquilinear_with_chirality(
    a1: &AlgebraElement,
    a2: &AlgebraElement,
    builder: &DifferentialBuilder<'_>,
    opts: &MatrixPathOptions,
) -> Result<(SesquilinearEstimate, SesquilinearEstimate)> {
    a1.params().ensure_compatible(a2.params())?;
    let one = C64::new(1.0, 0.0);
    let phases: Vec<(String, C64, C64)> = if a1 == a2 {
        vec![("|x|^2".to_string(), C64::new(0.0, 0.0), C64::new(4.0, 0.0))]
    } else {
        (0..4)
            .map(|k| {
                let ik = C64::new(0.0, 1.0).powu(k);
                (format!("|x + i^{k} y|^2"), ik, ik.conj())
            })
            .collect()
    };
    let empty = || SesquilinearEstimate {
        value: C64::new(0.0, 0.0),
        residual: 0.0,
        increment_value: C64::new(0.0, 0.0),
        terms: Vec::new(),
    };
    let (mut plain, mut chi) = (empty(), empty());
    for (label, ik, weight) in phases {
        let combo = a1.combine(one, a2, ik)?;
        let (space, d) = builder(&combo)?;
        if (space.dim() as f64) < opts.dominance_ratio * opts.n_max as f64 {
            return Err(MagError::TruncationTooSmall {
                dimension: space.dim(),
                n_max: opts.n_max as usize,
            });
        }
        let t = d.adjoint().matmul(&d)?;
        let plus = hermitian_eigenvalues(&chirality_sector(&space, &t, 1.0)?, opts.max_component)?;
        let minus = hermitian_eigenvalues(&chirality_sector(&space, &t, -1.0)?, opts.max_component)?;
        let union: Vec<f64> = plus.iter().chain(minus.iter()).copied().collect();
        let w = weight / 4.0;
        let add = |target: &mut SesquilinearEstimate, name: String, eig: Vec<f64>, sign: f64| -> Result<()> {
            let est = estimate_from_eigenvalues(eig, opts)?;
            target.value += w * sign * est.extrapolated;
            target.increment_value += w * sign * est.increment_estimate;
            target.residual += est.model_residual / 4.0;
            target.terms.push((name, est));
            Ok(())
        };
        add(&mut plain, label.clone(), union, 1.0)?;
        add(&mut chi, format!("{label} chi+"), plus, 1.0)?;
        add(&mut chi, format!("{label} chi-"), minus, -1.0)?;
    }
    Ok((plain, chi))
}

/// Settings of the Connes-formula pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConnesOptions {
    /// Regularisation `eps > 0` of `|D_eps|`.
    pub eps: f64,
    /// Largest dual index kept in the truncation.
    pub dual_cutoff: usize,
    /// Matrix-path settings.
    pub matrix: MatrixPathOptions,
}

impl Default for ConnesOptions {
    fn default() -> Self {
        ConnesOptions {
            eps: 1.0,
            dual_cutoff: 1 << 13,
            matrix: MatrixPathOptions::default(),
        }
    }
}

/// Outcome of the first Connes formula check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnesReport {
    /// Dixmier estimate of `d(rho A_1)^* d(rho A_2)`.
    pub lhs_dixmier: C64,
    /// Increment estimate of the same quantity.
    pub lhs_increment: C64,
    /// `(2 / l^2) trace(nabla(A_1)^* . nabla(A_2))`.
    pub rhs_exact: C64,
    /// The alternative normalisation `(1 / l^2) trace(nabla(A_1)^* . nabla(A_2))`,
    /// which is what `T_B(...) = (1/2 pi) Tr_Dix(...)` would predict.
    pub rhs_alternative: C64,
    /// Dixmier estimate with the chirality inserted.
    pub chi_lhs: C64,
    /// Combined fit residual of the left-hand side.
    pub residual: f64,
    /// `"2/l^2"` or `"1/l^2"`, whichever constant is closer to the data.
    pub supported_constant: String,
}

/// Compares `Tr_Dix(d(rho A_1)^* d(rho A_2))` with `(2/l^2) trace(nabla(A_1)^* . nabla(A_2))`
/// and estimates `Tr_Dix(chi d(rho A_1)^* d(rho A_2))`.
pub fn connes_formula(a1: &AlgebraElement, a2: &AlgebraElement, opts: &ConnesOptions) -> Result<ConnesReport> {
    let l = a1.params().ell_b;
    let pairing = gradient_pairing(a1, a2)?;
    let rhs_exact = pairing * (2.0 / (l * l));
    let rhs_alternative = pairing / (l * l);
    let support = a1.support_max().max(a2.support_max()).unwrap_or(0);
    let builder = quasi_differential_builder(opts.eps, opts.dual_cutoff, support + 1);
    let (lhs, chi) = sesquilinear_with_chirality(a1, a2, &builder, &opts.matrix)?;
    let supported_constant = if (lhs.value - rhs_exact).norm() <= (lhs.value - rhs_alternative).norm() {
        "2/l^2"
    } else {
        "1/l^2"
    };
    Ok(ConnesReport {
        lhs_dixmier: lhs.value,
        lhs_increment: lhs.increment_value,
        rhs_exact,
        rhs_alternative,
        chi_lhs: chi.value,
        residual: lhs.residual,
        supported_constant: supported_constant.to_string(),
    })
}

/// Estimate of `Tr_Dix |Q_eps^{-1} A - A Q_{eps'}^{-1}|`. On the sector with
/// dual index `m` the operator is the finite matrix
/// `a_{k,j} (1/(k+m+1+eps) - 1/(j+m+1+eps'))`; its singular values are
/// collected for `m < n_max` and extrapolated.
pub fn vanishing_probe(
    a: &AlgebraElement,
    eps: f64,
    eps_prime: f64,
    n_max: u64,
    model: FitModel,
) -> Result<DixmierEstimate> {
    for e in [eps, eps_prime] {
        if !(e.is_finite() && e > -1.0) {
            return Err(MagError::invalid("eps", format!("must be > -1, got {e}")));
        }
    }
    let n = a.cutoff() + 1;
    let mut values = Vec::new();
    for m in 0..n_max {
        let mf = m as f64;
        let block = DMatrix::from_fn(n, n, |k, j| {
            a.get(k, j) * (1.0 / (k as f64 + mf + 1.0 + eps) - 1.0 / (j as f64 + mf + 1.0 + eps_prime))
        });
        if block.iter().all(|v| *v == C64::new(0.0, 0.0)) {
            continue;
        }
        values.extend(block.singular_values().iter().copied());
    }
    let spec = SingularSpectrum::from_values(values)?;
    if spec.available() == 0 {
        return Ok(DixmierEstimate::zero(n_max, model));
    }
    dixmier_estimate(&spec, n_max, model, f64::INFINITY)
}

/// Estimate of `Tr_Dix(Q_eps^{-1} T)` for a finite element `T`.
///
/// The Hermitian and anti-Hermitian parts of `T` are diagonalised on the
/// Landau index, `T = sum_i lambda_i v_i v_i^*`. Each rank-one piece gives
/// the positive operator `Q_eps^{-1/2} v v^* Q_eps^{-1/2}`, which has exactly
/// one nonzero singular value per dual index, namely
/// `sum_n |v_n|^2 / (n + m + 1 + eps)`. Every piece is extrapolated on its own
/// and the pieces are recombined linearly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolventTraceEstimate {
    /// Combined estimate.
    pub value: C64,
    /// Sum of `|lambda_i|` times the fit residual of each piece.
    pub residual: f64,
    /// Sum of `|lambda_i|` times the standard error of each piece.
    pub standard_error: f64,
}

/// See [`ResolventTraceEstimate`].
pub fn resolvent_dixmier_trace(
    t: &AlgebraElement,
    eps: f64,
    n_max: u64,
    model: FitModel,
) -> Result<ResolventTraceEstimate> {
    if !(eps.is_finite() && eps > -1.0) {
        return Err(MagError::invalid("eps", format!("must be > -1, got {eps}")));
    }
    let a = t.matrix();
    let herm = (a + a.adjoint()).map(|v| v * 0.5);
    let anti = (a - a.adjoint()).map(|v| v * C64::new(0.0, -0.5));
    let mut value = C64::new(0.0, 0.0);
    let mut residual = 0.0;
    let mut standard_error = 0.0;
    let ns = sample_sizes(n_max)?;
    for (part, weight) in [(herm, C64::new(1.0, 0.0)), (anti, C64::new(0.0, 1.0))] {
        if part.iter().all(|v| v.norm() == 0.0) {
            continue;
        }
        let pieces = if is_diagonal(&part) {
            (0..part.nrows())
                .map(|i| {
                    let mut w = vec![0.0; part.nrows()];
                    w[i] = 1.0;
                    (part[(i, i)].re, w)
                })
                .collect::<Vec<_>>()
        } else {
            let eig = part.clone().symmetric_eigen();
            (0..part.nrows())
                .map(|i| {
                    let w = (0..part.nrows())
                        .map(|n| eig.eigenvectors[(n, i)].norm_sqr())
                        .collect();
                    (eig.eigenvalues[i], w)
                })
                .collect()
        };
        for (lambda, w) in pieces {
            if lambda.abs() < 1e-15 {
                continue;
            }
            let est = rank_one_resolvent_estimate(&w, eps, &ns, model)?;
            value += weight * lambda * est.extrapolated;
            residual += lambda.abs() * est.model_residual;
            standard_error += lambda.abs() * est.standard_error;
        }
    }
    Ok(ResolventTraceEstimate {
        value,
        residual,
        standard_error,
    })
}

fn is_diagonal(m: &DMatrix<C64>) -> bool {
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)].norm() == 0.0))
}

/// Dixmier estimate of the positive operator with singular values
/// `sum_n w_n / (n + m + 1 + eps)`, `m = 0, 1, ...`.
fn rank_one_resolvent_estimate(w: &[f64], eps: f64, ns: &[u64], model: FitModel) -> Result<DixmierEstimate> {
    let depth = *ns.last().expect("nonempty");
    let support: Vec<(f64, f64)> = w
        .iter()
        .enumerate()
        .filter(|(_, wn)| **wn != 0.0)
        .map(|(n, wn)| (*wn, n as f64 + 1.0 + eps))
        .collect();
    let runs: Vec<(f64, u64)> = (0..depth)
        .map(|m| {
            let v: f64 = support.iter().map(|(wn, shift)| wn / (shift + m as f64)).sum();
            (v, 1)
        })
        .collect();
    let spec = SingularSpectrum::from_runs(runs, false)?;
    dixmier_estimate(&spec, depth, model, f64::INFINITY)
}

/// One line of the trace identity suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceIdentityCase {
    /// Name of the element.
    pub name: String,
    /// Regularisation.
    pub eps: f64,
    /// Exact trace of the element.
    pub trace: f64,
    /// `Tr_Dix(Q_eps^{-1} T)`.
    pub resolvent: f64,
    /// `(1/4) Tr_Dix(|D_eps|^{-2} rho T)`.
    pub dirac_quarter: f64,
    /// Exact trace per unit volume.
    pub per_unit_volume: f64,
    /// `(1 / 8 Lambda_B) Tr_Dix(|D_eps|^{-2} rho T)`.
    pub dirac_per_unit_volume: f64,
    /// Largest absolute deviation among the three comparisons.
    pub max_deviation: f64,
    /// Combined fit residual.
    pub residual: f64,
}

/// Report of [`trace_identity_suite`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceIdentityReport {
    /// All cases, ordered by element then `eps`.
    pub cases: Vec<TraceIdentityCase>,
    /// Largest deviation over all cases.
    pub max_deviation: f64,
}

/// The elements `Pi_0, Pi_1, Upsilon_{0->1} + Upsilon_{1->0}` and `exp(-H)`
/// used by the trace identity suite.
pub fn trace_suite_elements(params: MagneticParams) -> Result<Vec<(String, AlgebraElement)>> {
    let sym = AlgebraElement::upsilon(0, 1, 1, params)?.add(&AlgebraElement::upsilon(1, 0, 1, params)?)?;
    Ok(vec![
        ("pi0".to_string(), AlgebraElement::landau_projection(0, 0, params)?),
        ("pi1".to_string(), AlgebraElement::landau_projection(1, 1, params)?),
        ("ups01+ups10".to_string(), sym),
        ("heat1".to_string(), AlgebraElement::heat_element(1.0, 60, params)?),
    ])
}

/// Checks `trace(T) = Tr_Dix(Q_eps^{-1} T) = (1/4) Tr_Dix(|D_eps|^{-2} rho T)` and
/// `T_B(T) = (1 / 8 Lambda_B) Tr_Dix(|D_eps|^{-2} rho T)` for every element and
/// every `eps`. The operator `|D_eps|^{-2} rho T` is the direct sum of
/// `Q_{eps + w_r}^{-1} T` over the four spinor components.
pub fn trace_identity_suite(
    params: MagneticParams,
    eps_list: &[f64],
    n_max: u64,
    model: FitModel,
) -> Result<TraceIdentityReport> {
    let mut cases = Vec::new();
    let lambda = params.lambda_b();
    for (name, t) in trace_suite_elements(params)? {
        let trace = t.trace_b().re;
        let tuv = t.trace_per_unit_volume().re;
        for &eps in eps_list {
            if !(eps.is_finite() && eps > 0.0) {
                return Err(MagError::invalid("eps", format!("must be > 0, got {eps}")));
            }
            let q = resolvent_dixmier_trace(&t, eps, n_max, model)?;
            let mut dirac = 0.0;
            let mut residual = q.residual;
            for w in VARPI {
                let part = resolvent_dixmier_trace(&t, eps + w as f64, n_max, model)?;
                dirac += part.value.re;
                residual += part.residual;
            }
            let dirac_quarter = dirac / 4.0;
            let dirac_tuv = dirac / (8.0 * lambda);
            let max_deviation = (q.value.re - trace)
                .abs()
                .max((dirac_quarter - trace).abs())
                .max((dirac_tuv - tuv).abs() * 2.0 * PI * params.ell_b * params.ell_b);
            cases.push(TraceIdentityCase {
                name: name.clone(),
                eps,
                trace,
                resolvent: q.value.re,
                dirac_quarter,
                per_unit_volume: tuv,
                dirac_per_unit_volume: dirac_tuv,
                max_deviation,
                residual,
            });
        }
    }
    let max_deviation = cases.iter().map(|c| c.max_deviation).fold(0.0, f64::max);
    Ok(TraceIdentityReport { cases, max_deviation })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn runs_and_flat_partial_sums_agree() {
        let spec = SingularSpectrum::from_runs(vec![(1.0, 3), (0.5, 2), (0.25, 4)], true).unwrap();
        let flat = SingularSpectrum::from_values(spec.values(9).unwrap()).unwrap();
        for n in 0..12 {
            assert_eq!(spec.partial_sum(n).unwrap(), flat.partial_sum(n).unwrap());
        }
        assert_eq!(spec.partial_sums(&[2, 5, 11]).unwrap(), vec![2.0, 4.0, 5.0]);
    }

    #[test]
    fn invalid_runs_rejected() {
        assert!(SingularSpectrum::from_runs(vec![(0.5, 1), (1.0, 1)], true).is_err());
        assert!(SingularSpectrum::from_runs(vec![(1.0, 0)], true).is_err());
        let partial = SingularSpectrum::from_runs(vec![(1.0, 2)], false).unwrap();
        assert!(matches!(partial.partial_sum(3), Err(MagError::SpectrumExhausted { .. })));
    }

    #[test]
    fn gamma_of_harmonic_spectrum() {
        let spec = analytic_spectrum(AnalyticKind::QInvProjection { j: 0 }, 0.0, 200).unwrap();
        let g = gamma_n(&spec, 100).unwrap();
        assert!((g - 1.126_43).abs() < 1e-5);
        let flat = SingularSpectrum::from_runs(vec![(1.0, 50)], true).unwrap();
        assert!((gamma_n(&flat, 40).unwrap() - 40.0 / 40f64.ln()).abs() < 1e-12);
        assert!(gamma_n(&flat, 1).is_err());
    }

    #[test]
    fn analytic_merges_are_monotone() {
        let spec = analytic_spectrum(AnalyticKind::DiracPower { s: 4.0 }, 1.0, 5000).unwrap();
        let runs = spec.runs();
        assert!(runs.windows(2).all(|w| w[0].0 > w[1].0));
        // eps = 1: the shifts are 1, 1, 2 and 0, so the value 1/4 collects the
        // two unit-shift ground levels and the doubly degenerate level j = 1
        // of the zero-shift family.
        assert_eq!(runs[0], (1.0, 1));
        assert_eq!(runs[1], (0.25, 4));
        assert!(analytic_spectrum(AnalyticKind::DiracPower { s: 2.0 }, 0.0, 10).is_err());
    }

    #[test]
    fn parse_case_names() {
        assert_eq!(AnalyticKind::parse("q2").unwrap(), AnalyticKind::QPower { s: 2.0 });
        assert_eq!(AnalyticKind::parse("d4").unwrap(), AnalyticKind::DiracPower { s: 4.0 });
        assert_eq!(AnalyticKind::parse("qpi3").unwrap(), AnalyticKind::QInvProjection { j: 3 });
        assert_eq!(AnalyticKind::parse("qups1_2").unwrap(), AnalyticKind::QInvUpsilon { j: 1, k: 2 });
        assert!(AnalyticKind::parse("zz").is_err());
    }

    #[test]
    fn calderon_two_plus_below_two() {
        for (j, k) in [(0, 0), (0, 3), (2, 1)] {
            let kind = AnalyticKind::QHalfUpsilonQHalf { j, k, eps_prime: 0.5 };
            let spec = analytic_spectrum(kind, 1.0, 100_000).unwrap();
            let norm = calderon_norm(&spec, CalderonOrder::TwoPlus).unwrap();
            assert!(norm.value < 2.0);
            assert!(!norm.possibly_divergent);
        }
    }

    #[test]
    fn zero_operator_estimates_zero() {
        let t = SparseOp::zeros(10_000);
        let opts = MatrixPathOptions {
            n_max: 512,
            ..Default::default()
        };
        assert_eq!(dixmier_positive_operator(&t, &opts).unwrap().extrapolated, 0.0);
        let small = SparseOp::zeros(100);
        assert!(matches!(
            dixmier_positive_operator(&small, &opts),
            Err(MagError::TruncationTooSmall { .. })
        ));
    }

    #[test]
    fn non_positive_operator_rejected() {
        let t = SparseOp::diagonal(&[C64::new(-1.0, 0.0), C64::new(1.0, 0.0)]);
        assert!(positive_spectrum(&t, 10).is_err());
    }

    #[test]
    fn sample_sizes_grid() {
        assert_eq!(sample_sizes(1 << 20).unwrap().len(), 17);
        assert!(sample_sizes(64).is_err());
    }
}
