//! The magnetic Dirac operator
//! `D = (1/sqrt 2)(K_1 (x) g_1 + K_2 (x) g_2 + G_1 (x) g_3 + G_2 (x) g_4)`
//! acting on `L^2(R^2) (x) C^4`, its exact block decomposition by the
//! eigenvalue of `D^2`, the phase `F = D |D_eps|^{-1}`, bounded commutators
//! and the graded quasi-differential.
//!
//! Spinor components are labelled `r = 0..=3` (zero based). On the state
//! `psi_{n,m} (x) e_r` the square `D^2` acts as the integer
//! `n + m + 1 + w_r` with `w = (0, 0, +1, -1)`, so every `D^2` eigenspace is
//! finite dimensional and `D` can be diagonalised block by block without any
//! truncation error.
//!
//! The momenta act through ladder operators with standard matrix elements:
//! `K_1 = (a^+ + a^-)/sqrt 2`, `K_2 = -i (a^+ - a^-)/sqrt 2` on the first index
//! and `G_1 = i (c^+ - c^-)/sqrt 2`, `G_2 = (c^+ + c^-)/sqrt 2` on the second.

use crate::error::{MagError, Result};
use crate::laguerre_basis::{MagneticParams, C64};
use crate::magnetic_algebra::AlgebraElement;
use crate::nc_calculus::{nabla, Direction};
use nalgebra::{DMatrix, Matrix4};
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::FRAC_1_SQRT_2;

/// Spectral shift `w_r` of each spinor component in `D^2 = Q (x) 1 + 1 (x) w`.
pub const VARPI: [i64; 4] = [0, 0, 1, -1];

/// Chirality eigenvalue of each spinor component.
pub const CHIRALITY: [f64; 4] = [1.0, 1.0, -1.0, -1.0];

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// The four gamma matrices and the derived chirality.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSet {
    /// `gamma_1 .. gamma_4`.
    pub gammas: [Matrix4<C64>; 4],
}

impl GammaSet {
    /// The explicit choice used throughout the crate: `gamma_1` is the
    /// antidiagonal of ones and the others are fixed by the anticommutation
    /// relations together with `chi = diag(1, 1, -1, -1)`.
    pub fn standard() -> Self {
        let z = c(0.0, 0.0);
        let o = c(1.0, 0.0);
        let i = c(0.0, 1.0);
        #[rustfmt::skip]
        let g1 = Matrix4::new(
            z, z, z, o,
            z, z, o, z,
            z, o, z, z,
            o, z, z, z,
        );
        #[rustfmt::skip]
        let g2 = Matrix4::new(
            z, z, z, -i,
            z, z, i, z,
            z, -i, z, z,
            i, z, z, z,
        );
        #[rustfmt::skip]
        let g3 = Matrix4::new(
            z, z, o, z,
            z, z, z, -o,
            o, z, z, z,
            z, -o, z, z,
        );
        #[rustfmt::skip]
        let g4 = Matrix4::new(
            z, z, i, z,
            z, z, z, i,
            -i, z, z, z,
            z, -i, z, z,
        );
        GammaSet {
            gammas: [g1, g2, g3, g4],
        }
    }

    /// `chi = gamma_1 gamma_2 gamma_3 gamma_4`.
    pub fn chirality(&self) -> Matrix4<C64> {
        self.gammas[0] * self.gammas[1] * self.gammas[2] * self.gammas[3]
    }

    /// Largest entry of `{g_i, g_j} - 2 delta_ij` over all pairs.
    pub fn clifford_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let anti = self.gammas[a] * self.gammas[b] + self.gammas[b] * self.gammas[a];
                let target = if a == b {
                    Matrix4::identity() * c(2.0, 0.0)
                } else {
                    Matrix4::zeros()
                };
                worst = worst.max((anti - target).iter().map(|v| v.norm()).fold(0.0, f64::max));
            }
        }
        worst
    }

    /// Largest entry of `chi g_i + g_i chi` over `i`.
    pub fn chirality_defect(&self) -> f64 {
        let chi = self.chirality();
        self.gammas
            .iter()
            .map(|g| (chi * g + g * chi).iter().map(|v| v.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    /// Operator-valued spinor matrix of `D`: entry `[r_out][r_in]` holds the
    /// coefficients of `(a^+, a^-, c^+, c^-)`.
    fn ladder_table(&self) -> [[[C64; 4]; 4]; 4] {
        let h = FRAC_1_SQRT_2;
        // Ladder content of K_1, K_2, G_1, G_2 in the order (a+, a-, c+, c-).
        let momenta = [
            [c(h, 0.0), c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            [c(0.0, -h), c(0.0, h), c(0.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(0.0, 0.0), c(0.0, h), c(0.0, -h)],
            [c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0), c(h, 0.0)],
        ];
        let mut table = [[[c(0.0, 0.0); 4]; 4]; 4];
        for (ro, row) in table.iter_mut().enumerate() {
            for (ri, cell) in row.iter_mut().enumerate() {
                for (g, mom) in self.gammas.iter().zip(momenta.iter()) {
                    for (slot, x) in cell.iter_mut().zip(mom.iter()) {
                        *slot += g[(ro, ri)] * x * h;
                    }
                }
                // The entries are Gaussian integers; remove rounding residue.
                for slot in cell.iter_mut() {
                    *slot = c(snap(slot.re), snap(slot.im));
                }
            }
        }
        table
    }
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < 1e-12 {
        r
    } else {
        v
    }
}

/// A basis state `psi_{n,m} (x) e_r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SpinorState {
    /// Landau index.
    pub n: usize,
    /// Dual index.
    pub m: usize,
    /// Spinor component, `0..=3`.
    pub r: usize,
}

impl SpinorState {
    /// Eigenvalue of `D^2` on the state: `n + m + 1 + w_r`.
    pub fn level(&self) -> usize {
        (self.n as i64 + self.m as i64 + 1 + VARPI[self.r]) as usize
    }
}

/// Image of a basis state under `D`, as `(target, coefficient)` pairs.
fn dirac_image(table: &[[[C64; 4]; 4]; 4], z: SpinorState) -> Vec<(SpinorState, C64)> {
    let mut out = Vec::with_capacity(4);
    let SpinorState { n, m, r } = z;
    for (ro, row) in table.iter().enumerate() {
        let coeffs = row[r];
        if coeffs[0] != c(0.0, 0.0) {
            out.push((SpinorState { n: n + 1, m, r: ro }, coeffs[0] * ((n + 1) as f64).sqrt()));
        }
        if coeffs[1] != c(0.0, 0.0) && n > 0 {
            out.push((SpinorState { n: n - 1, m, r: ro }, coeffs[1] * (n as f64).sqrt()));
        }
        if coeffs[2] != c(0.0, 0.0) {
            out.push((SpinorState { n, m: m + 1, r: ro }, coeffs[2] * ((m + 1) as f64).sqrt()));
        }
        if coeffs[3] != c(0.0, 0.0) && m > 0 {
            out.push((SpinorState { n, m: m - 1, r: ro }, coeffs[3] * (m as f64).sqrt()));
        }
    }
    out
}

/// One `D^2` eigenspace with the restriction of `D` to it.
#[derive(Debug, Clone)]
pub struct DiracBlock {
    /// Eigenvalue `j` of `D^2` on the block.
    pub level: usize,
    /// Basis states, ordered by `(r, n)`.
    pub basis: Vec<SpinorState>,
    /// Hermitian matrix of `D` in that basis.
    pub matrix: DMatrix<C64>,
}

/// The Dirac operator stored block-diagonally by `D^2` eigenvalue.
#[derive(Debug, Clone)]
pub struct DiracBlocks {
    /// Largest level `J` included.
    pub cutoff: usize,
    /// Blocks for `j = 0..=J`.
    pub blocks: Vec<DiracBlock>,
    /// Magnetic parameters (the operator itself is scale free).
    pub params: MagneticParams,
}

/// Basis of the `D^2 = j` eigenspace, ordered by spinor component then `n`.
pub fn block_basis(level: usize) -> Vec<SpinorState> {
    let mut basis = Vec::new();
    for (r, w) in VARPI.iter().enumerate() {
        let total = level as i64 - 1 - w;
        if total < 0 {
            continue;
        }
        let total = total as usize;
        for n in 0..=total {
            basis.push(SpinorState { n, m: total - n, r });
        }
    }
    basis
}

/// Assembles `D` on every eigenspace of `D^2` with eigenvalue `j <= J`.
pub fn build_dirac(cutoff: usize, gammas: &GammaSet, params: MagneticParams) -> Result<DiracBlocks> {
    if cutoff < 1 {
        return Err(MagError::invalid("J", "block cutoff must be at least 1"));
    }
    let table = gammas.ladder_table();
    let mut blocks = Vec::with_capacity(cutoff + 1);
    for level in 0..=cutoff {
        let basis = block_basis(level);
        let index: HashMap<SpinorState, usize> =
            basis.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let mut matrix = DMatrix::from_element(basis.len(), basis.len(), c(0.0, 0.0));
        for (col, z) in basis.iter().enumerate() {
            for (x, v) in dirac_image(&table, *z) {
                let row = *index.get(&x).ok_or_else(|| {
                    MagError::Numerical(format!("D maps {z:?} outside its D^2 eigenspace"))
                })?;
                matrix[(row, col)] += v;
            }
        }
        blocks.push(DiracBlock {
            level,
            basis,
            matrix,
        });
    }
    Ok(DiracBlocks {
        cutoff,
        blocks,
        params,
    })
}

/// One distinct eigenvalue of `D` with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralLevel {
    /// Level `j` of `D^2` the eigenvalue belongs to.
    pub level: usize,
    /// Eigenvalue, exactly `+sqrt j`, `-sqrt j` or zero.
    pub eigenvalue: f64,
    /// Number of numerical eigenvalues assigned to it.
    pub multiplicity: usize,
}

/// Spectrum of `D` assembled from per-block eigendecompositions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiracSpectrum {
    /// Distinct eigenvalues ordered by level, negative before positive.
    pub levels: Vec<SpectralLevel>,
    /// Largest distance of a numerical eigenvalue from its exact value.
    pub max_deviation: f64,
}

/// Eigenvalues of every block, grouped as `(+-sqrt j, multiplicity)`.
pub fn spectrum(blocks: &DiracBlocks) -> DiracSpectrum {
    let mut levels = Vec::new();
    let mut max_deviation: f64 = 0.0;
    for block in &blocks.blocks {
        let root = (block.level as f64).sqrt();
        let eig = block.matrix.clone().symmetric_eigenvalues();
        let (mut neg, mut zero, mut pos) = (0usize, 0usize, 0usize);
        for &lam in eig.iter() {
            if block.level == 0 {
                zero += 1;
                max_deviation = max_deviation.max(lam.abs());
            } else if lam < 0.0 {
                neg += 1;
                max_deviation = max_deviation.max((lam + root).abs());
            } else {
                pos += 1;
                max_deviation = max_deviation.max((lam - root).abs());
            }
        }
        if zero > 0 {
            levels.push(SpectralLevel {
                level: 0,
                eigenvalue: 0.0,
                multiplicity: zero,
            });
        }
        if neg > 0 {
            levels.push(SpectralLevel {
                level: block.level,
                eigenvalue: -root,
                multiplicity: neg,
            });
        }
        if pos > 0 {
            levels.push(SpectralLevel {
                level: block.level,
                eigenvalue: root,
                multiplicity: pos,
            });
        }
    }
    DiracSpectrum {
        levels,
        max_deviation,
    }
}

/// Number of eigenvalues of modulus below `1e-10` across all blocks.
pub fn kernel_dimension(blocks: &DiracBlocks) -> usize {
    blocks
        .blocks
        .iter()
        .map(|b| {
            b.matrix
                .clone()
                .symmetric_eigenvalues()
                .iter()
                .filter(|v| v.abs() < 1e-10)
                .count()
        })
        .sum()
}

/// Largest entry of `M^2 - j` over all blocks.
pub fn block_square_defect(blocks: &DiracBlocks) -> f64 {
    blocks
        .blocks
        .iter()
        .map(|b| {
            let sq = &b.matrix * &b.matrix;
            let n = sq.nrows();
            let target = DMatrix::<C64>::identity(n, n) * c(b.level as f64, 0.0);
            (sq - target).iter().map(|v| v.norm()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Largest entry of `chi M chi + M` over all blocks, with `chi` read off the
/// spinor labels of the basis.
pub fn chirality_defect(blocks: &DiracBlocks) -> f64 {
    let mut worst: f64 = 0.0;
    for b in &blocks.blocks {
        for (i, x) in b.basis.iter().enumerate() {
            for (j, z) in b.basis.iter().enumerate() {
                let v = b.matrix[(i, j)] * (CHIRALITY[x.r] * CHIRALITY[z.r]) + b.matrix[(i, j)];
                worst = worst.max(v.norm());
            }
        }
    }
    worst
}

/// Phase `F = D / sqrt(j + eps)` on each block.
pub fn dirac_phase(blocks: &DiracBlocks, eps: f64) -> Result<Vec<DMatrix<C64>>> {
    check_eps(eps)?;
    Ok(blocks
        .blocks
        .iter()
        .map(|b| b.matrix.map(|v| v / (b.level as f64 + eps).sqrt()))
        .collect())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(MagError::invalid("eps", format!("must be > 0, got {eps}")));
    }
    Ok(())
}

/// Bounded commutator `delta(A) = -i [D, A (x) 1]`, stored through its two
/// spinor components:
/// `delta(A) = nabla_1(A) (x) g_2 / (sqrt 2 l) - nabla_2(A) (x) g_1 / (sqrt 2 l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaB {
    /// Coefficient of `gamma_2`.
    pub along_gamma2: AlgebraElement,
    /// Coefficient of `gamma_1`.
    pub along_gamma1: AlgebraElement,
}

/// Closed form of the bounded commutator.
pub fn delta_b(a: &AlgebraElement) -> DeltaB {
    let l = a.params().ell_b;
    let s = 1.0 / (std::f64::consts::SQRT_2 * l);
    DeltaB {
        along_gamma2: nabla(a, Direction::One).scaled(c(s, 0.0)),
        along_gamma1: nabla(a, Direction::Two).scaled(c(-s, 0.0)),
    }
}

/// Regularity coefficient `sqrt(s + 1 + alpha_i + m) - sqrt(r + 1 + alpha_k + m)`
/// with `alpha = eps + w` for the spinor components `i, k` in `0..=3`.
pub fn regularity_coeff(i: usize, k: usize, s: usize, r: usize, m: usize, eps: f64) -> Result<f64> {
    if eps < 0.0 || !eps.is_finite() {
        return Err(MagError::invalid("eps", format!("must be >= 0, got {eps}")));
    }
    if i > 3 || k > 3 {
        return Err(MagError::IndexOutOfRange(format!("spinor indices ({i},{k})")));
    }
    let left = s as f64 + 1.0 + eps + VARPI[i] as f64 + m as f64;
    let right = r as f64 + 1.0 + eps + VARPI[k] as f64 + m as f64;
    if left < 0.0 || right < 0.0 {
        return Err(MagError::invalid(
            "eps",
            format!("negative radicand for components ({i},{k}) at s={s}, r={r}, m={m}"),
        ));
    }
    Ok(left.sqrt() - right.sqrt())
}

/// Operator-norm bound of the regularity coefficient, attained at `m = 0`.
pub fn regularity_bound(i: usize, k: usize, s: usize, r: usize, eps: f64) -> Result<f64> {
    Ok(regularity_coeff(i, k, s, r, 0, eps)?.abs())
}

/// Sparse complex matrix in compressed row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    dim: usize,
    rows: Vec<Vec<(usize, C64)>>,
}

impl SparseOp {
    /// The zero operator on a space of dimension `dim`.
    pub fn zeros(dim: usize) -> Self {
        SparseOp {
            dim,
            rows: vec![Vec::new(); dim],
        }
    }

    /// Builds from `(row, col, value)` triplets, summing duplicates and
    /// dropping exact zeros.
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Self {
        let mut maps: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); dim];
        for (i, j, v) in triplets {
            *maps[i].entry(j).or_insert(c(0.0, 0.0)) += v;
        }
        let rows = maps
            .into_iter()
            .map(|m| m.into_iter().filter(|(_, v)| *v != c(0.0, 0.0)).collect())
            .collect();
        SparseOp { dim, rows }
    }

    /// Diagonal operator.
    pub fn diagonal(values: &[C64]) -> Self {
        Self::from_triplets(values.len(), values.iter().enumerate().map(|(i, v)| (i, i, *v)))
    }

    /// Dimension of the underlying space.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    /// Stored entries of row `i`, ordered by column.
    pub fn row(&self, i: usize) -> &[(usize, C64)] {
        &self.rows[i]
    }

    /// Entry `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> C64 {
        match self.rows[i].binary_search_by_key(&j, |(col, _)| *col) {
            Ok(pos) => self.rows[i][pos].1,
            Err(_) => c(0.0, 0.0),
        }
    }

    /// All stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |(j, v)| (i, *j, *v)))
    }

    fn check_dim(&self, other: &SparseOp) -> Result<()> {
        if self.dim != other.dim {
            return Err(MagError::invalid(
                "dim",
                format!("dimensions {} and {} differ", self.dim, other.dim),
            ));
        }
        Ok(())
    }

    /// Product `self * other`.
    pub fn matmul(&self, other: &SparseOp) -> Result<SparseOp> {
        self.check_dim(other)?;
        let mut rows = Vec::with_capacity(self.dim);
        let mut acc: BTreeMap<usize, C64> = BTreeMap::new();
        for row in &self.rows {
            acc.clear();
            for (k, a) in row {
                for (j, b) in &other.rows[*k] {
                    *acc.entry(*j).or_insert(c(0.0, 0.0)) += a * b;
                }
            }
            rows.push(acc.iter().filter(|(_, v)| **v != c(0.0, 0.0)).map(|(j, v)| (*j, *v)).collect());
        }
        Ok(SparseOp {
            dim: self.dim,
            rows,
        })
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> SparseOp {
        SparseOp::from_triplets(self.dim, self.triplets().map(|(i, j, v)| (j, i, v.conj())))
    }

    /// `alpha self + beta other`.
    pub fn combine(&self, alpha: C64, other: &SparseOp, beta: C64) -> Result<SparseOp> {
        self.check_dim(other)?;
        Ok(SparseOp::from_triplets(
            self.dim,
            self.triplets()
                .map(|(i, j, v)| (i, j, alpha * v))
                .chain(other.triplets().map(|(i, j, v)| (i, j, beta * v))),
        ))
    }

    /// Scalar multiple.
    pub fn scaled(&self, alpha: C64) -> SparseOp {
        SparseOp {
            dim: self.dim,
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|(j, v)| (*j, v * alpha)).collect())
                .collect(),
        }
    }

    /// Commutator `self * other - other * self`.
    pub fn commutator(&self, other: &SparseOp) -> Result<SparseOp> {
        self.matmul(other)?
            .combine(c(1.0, 0.0), &other.matmul(self)?, c(-1.0, 0.0))
    }

    /// Largest entry modulus among the entries with `keep(row, col)`.
    pub fn max_abs_where(&self, keep: impl Fn(usize, usize) -> bool) -> f64 {
        self.triplets()
            .filter(|(i, j, _)| keep(*i, *j))
            .map(|(_, _, v)| v.norm())
            .fold(0.0, f64::max)
    }

    /// Coordinate-list JSON `{"dim":d,"entries":[[i,j,re,im],...]}`.
    pub fn to_coo_json(&self) -> String {
        let entries: Vec<(usize, usize, f64, f64)> =
            self.triplets().map(|(i, j, v)| (i, j, v.re, v.im)).collect();
        serde_json::json!({ "dim": self.dim, "entries": entries }).to_string()
    }
}

/// Rectangular truncation `n <= n_max`, `m <= m_max` of `L^2 (x) C^4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinorSpace {
    /// Largest Landau index kept.
    pub n_max: usize,
    /// Largest dual index kept.
    pub m_max: usize,
}

impl SpinorSpace {
    /// The truncation `n <= n_max`, `m <= m_max`.
    pub fn new(n_max: usize, m_max: usize) -> Self {
        SpinorSpace { n_max, m_max }
    }

    /// Number of basis states.
    pub fn dim(&self) -> usize {
        4 * (self.n_max + 1) * (self.m_max + 1)
    }

    /// Index of a state, `None` outside the truncation.
    pub fn index(&self, s: SpinorState) -> Option<usize> {
        if s.n > self.n_max || s.m > self.m_max || s.r > 3 {
            return None;
        }
        Some(((s.m * (self.n_max + 1)) + s.n) * 4 + s.r)
    }

    /// State with a given index.
    pub fn state(&self, idx: usize) -> SpinorState {
        let r = idx % 4;
        let rest = idx / 4;
        SpinorState {
            n: rest % (self.n_max + 1),
            m: rest / (self.n_max + 1),
            r,
        }
    }

    /// Compression of `D` (scaled columnwise by `scale(level)`).
    fn dirac_scaled(&self, gammas: &GammaSet, scale: impl Fn(usize) -> f64) -> SparseOp {
        let table = gammas.ladder_table();
        let mut triplets = Vec::new();
        for col in 0..self.dim() {
            let z = self.state(col);
            let s = scale(z.level());
            for (x, v) in dirac_image(&table, z) {
                if let Some(row) = self.index(x) {
                    triplets.push((row, col, v * s));
                }
            }
        }
        SparseOp::from_triplets(self.dim(), triplets)
    }

    /// Compression of `D`.
    pub fn dirac(&self, gammas: &GammaSet) -> SparseOp {
        self.dirac_scaled(gammas, |_| 1.0)
    }

    /// Compression of the phase `F = D |D_eps|^{-1}`. Since `D` preserves the
    /// `D^2` eigenspaces, `F(x, z) = D(x, z) / sqrt(j_z + eps)`.
    pub fn dirac_phase(&self, gammas: &GammaSet, eps: f64) -> Result<SparseOp> {
        check_eps(eps)?;
        Ok(self.dirac_scaled(gammas, |j| 1.0 / (j as f64 + eps).sqrt()))
    }

    /// Chirality `diag(1, 1, -1, -1)` on the spinor factor.
    pub fn chirality(&self) -> SparseOp {
        let values: Vec<C64> = (0..self.dim())
            .map(|i| c(CHIRALITY[self.state(i).r], 0.0))
            .collect();
        SparseOp::diagonal(&values)
    }

    /// The diagonal operator `(D^2 + eps)^power`.
    pub fn dirac_eps_power(&self, eps: f64, power: f64) -> Result<SparseOp> {
        check_eps(eps)?;
        let values: Vec<C64> = (0..self.dim())
            .map(|i| c((self.state(i).level() as f64 + eps).powf(power), 0.0))
            .collect();
        Ok(SparseOp::diagonal(&values))
    }

    /// Representation `rho(A) = A (x) 1`, acting on the first index only.
    pub fn rho(&self, a: &AlgebraElement) -> SparseOp {
        let mut triplets = Vec::new();
        for (k, j, v) in a.entries() {
            if k > self.n_max || j > self.n_max {
                continue;
            }
            for m in 0..=self.m_max {
                for r in 0..4 {
                    let row = self.index(SpinorState { n: k, m, r }).expect("inside");
                    let col = self.index(SpinorState { n: j, m, r }).expect("inside");
                    triplets.push((row, col, v));
                }
            }
        }
        SparseOp::from_triplets(self.dim(), triplets)
    }
}

/// Graded quasi-differential `d(T) = [F, T]_chi`. The operator is split into
/// its even part `(T + chi T chi)/2` and odd part `(T - chi T chi)/2`; the
/// even part enters through the commutator and the odd part through the
/// anticommutator.
pub fn graded_quasi_differential(t: &SparseOp, f: &SparseOp, chi: &SparseOp) -> Result<SparseOp> {
    let one = c(1.0, 0.0);
    let half = c(0.5, 0.0);
    let conj = chi.matmul(t)?.matmul(chi)?;
    let even = t.combine(half, &conj, half)?;
    let odd = t.combine(half, &conj, -half)?;
    let ft0 = f.matmul(&even)?;
    let t0f = even.matmul(f)?;
    let ft1 = f.matmul(&odd)?;
    let t1f = odd.matmul(f)?;
    ft0.combine(one, &t0f, -one)?
        .combine(one, &ft1.combine(one, &t1f, one)?, one)
}

/// Direct commutator `-i [D, rho(A)]` on a rectangular truncation, for
/// comparison with [`delta_b`] on interior indices.
pub fn direct_commutator(space: &SpinorSpace, gammas: &GammaSet, a: &AlgebraElement) -> Result<SparseOp> {
    let d = space.dirac(gammas);
    let rho = space.rho(a);
    Ok(d.commutator(&rho)?.scaled(c(0.0, -1.0)))
}

/// Materialises the closed form of [`delta_b`] on a rectangular truncation.
pub fn delta_b_operator(space: &SpinorSpace, gammas: &GammaSet, delta: &DeltaB) -> SparseOp {
    let mut triplets = Vec::new();
    for (elem, g) in [(&delta.along_gamma2, &gammas.gammas[1]), (&delta.along_gamma1, &gammas.gammas[0])] {
        for (k, j, v) in elem.entries() {
            if k > space.n_max || j > space.n_max {
                continue;
            }
            for m in 0..=space.m_max {
                for ro in 0..4 {
                    for ri in 0..4 {
                        let gv = g[(ro, ri)];
                        if gv == c(0.0, 0.0) {
                            continue;
                        }
                        let row = space.index(SpinorState { n: k, m, r: ro }).expect("inside");
                        let col = space.index(SpinorState { n: j, m, r: ri }).expect("inside");
                        triplets.push((row, col, v * gv));
                    }
                }
            }
        }
    }
    SparseOp::from_triplets(space.dim(), triplets)
}
