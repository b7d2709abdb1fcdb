//! Truncated Fock-space linear algebra: tensor-product spaces, state vectors,
//! single-mode operators and their embeddings, coherent states, and Löwdin
//! orthonormalization.
//!
//! The tensor basis index is fixed as `(n_1·d_2 + n_2)·d_c + n_c` — subsystem
//! 1 outermost, the coupler innermost — so serialized states are portable.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::Subsystem;
use crate::C64;

/// Truncation dimensions of the three-subsystem tensor space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockSpace {
    dims: [usize; 3],
}

impl FockSpace {
    /// Default truncation: KPO occupation |α|² ≈ 4.1 needs ~20 levels of
    /// headroom; the coupler stays nearly empty (occupation ≲ 0.07 even at
    /// the gate peak).
    pub const DEFAULT_DIMS: [usize; 3] = [20, 20, 5];
    /// Default cap on the total dimension.
    pub const MAX_TOTAL: usize = 100_000;

    pub fn new(d1: usize, d2: usize, dc: usize) -> Result<Self> {
        Self::with_cap([d1, d2, dc], Self::MAX_TOTAL)
    }

    pub fn with_cap(dims: [usize; 3], cap: usize) -> Result<Self> {
        for &d in &dims {
            if d < 2 {
                return Err(Error::DimensionTooSmall(d));
            }
        }
        let total = dims.iter().product::<usize>();
        if total > cap {
            return Err(Error::SpaceTooLarge { dims, total, cap });
        }
        Ok(FockSpace { dims })
    }

    pub fn default_space() -> Self {
        let [d1, d2, dc] = Self::DEFAULT_DIMS;
        FockSpace::new(d1, d2, dc).expect("default dims are valid")
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn dim(&self, s: Subsystem) -> usize {
        self.dims[s.index()]
    }

    /// Total dimension D = d_1·d_2·d_c.
    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    /// Flat index of |n_1, n_2, n_c⟩.
    pub fn index(&self, n: [usize; 3]) -> usize {
        debug_assert!(n[0] < self.dims[0] && n[1] < self.dims[1] && n[2] < self.dims[2]);
        (n[0] * self.dims[1] + n[1]) * self.dims[2] + n[2]
    }

    /// Occupations (n_1, n_2, n_c) of a flat index.
    pub fn occupations(&self, index: usize) -> [usize; 3] {
        let nc = index % self.dims[2];
        let rest = index / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], nc]
    }

    /// Stride of subsystem `s` in the flat index.
    pub fn stride(&self, s: Subsystem) -> usize {
        match s {
            Subsystem::Kpo1 => self.dims[1] * self.dims[2],
            Subsystem::Kpo2 => self.dims[2],
            Subsystem::Coupler => 1,
        }
    }
}

/// Complex amplitude vector over the tensor basis of a [`FockSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    space: FockSpace,
    amp: Vec<C64>,
}

impl StateVector {
    pub fn zero(space: FockSpace) -> Self {
        StateVector {
            space,
            amp: vec![C64::new(0.0, 0.0); space.total()],
        }
    }

    /// The basis state |n_1, n_2, n_c⟩.
    pub fn basis(space: FockSpace, n: [usize; 3]) -> Result<Self> {
        for (i, (&ni, &di)) in n.iter().zip(&space.dims).enumerate() {
            if ni >= di {
                return Err(Error::DimensionMismatch {
                    op: n[i] + 1,
                    expected: di,
                });
            }
        }
        let mut v = Self::zero(space);
        v.amp[space.index(n)] = C64::new(1.0, 0.0);
        Ok(v)
    }

    pub fn from_amplitudes(space: FockSpace, amp: Vec<C64>) -> Result<Self> {
        if amp.len() != space.total() {
            return Err(Error::DimensionMismatch {
                op: amp.len(),
                expected: space.total(),
            });
        }
        Ok(StateVector { space, amp })
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amp
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amp
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// ⟨self|other⟩, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        inner(self, other)
    }

    pub fn scale(&mut self, c: C64) {
        for a in &mut self.amp {
            *a *= c;
        }
    }

    /// self += c·other.
    pub fn add_scaled(&mut self, c: C64, other: &StateVector) -> Result<()> {
        check_same_space(self, other)?;
        for (a, b) in self.amp.iter_mut().zip(&other.amp) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.scale(C64::new(1.0 / n, 0.0));
        }
        self
    }

    /// CSV dump: header `n_1,n_2,n_c,re,im`, one row per basis state, full
    /// double precision.
    pub fn dump_csv(&self) -> String {
        let mut out = String::from("n_1,n_2,n_c,re,im\n");
        for (i, a) in self.amp.iter().enumerate() {
            let [n1, n2, nc] = self.space.occupations(i);
            out.push_str(&format!("{n1},{n2},{nc},{:.16e},{:.16e}\n", a.re, a.im));
        }
        out
    }
}

fn check_same_space(x: &StateVector, y: &StateVector) -> Result<()> {
    if x.space != y.space {
        return Err(Error::SpaceMismatch {
            left: x.space.dims,
            right: y.space.dims,
        });
    }
    Ok(())
}

/// ⟨x|y⟩, conjugate-linear in the first argument.
pub fn inner(x: &StateVector, y: &StateVector) -> Result<C64> {
    check_same_space(x, y)?;
    Ok(x
        .amp
        .iter()
        .zip(&y.amp)
        .map(|(a, b)| a.conj() * b)
        .sum())
}

/// Dense single-mode operator (dimensions here are ≤ a few tens, so dense
/// storage is simplest; embeddings into the tensor space are sparse).
#[derive(Debug, Clone, PartialEq)]
pub struct ModeOp {
    dim: usize,
    /// Row-major dim×dim entries.
    m: Vec<C64>,
}

impl ModeOp {
    pub fn zeros(dim: usize) -> Self {
        ModeOp {
            dim,
            m: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = Self::zeros(dim);
        for i in 0..dim {
            op.m[i * dim + i] = C64::new(1.0, 0.0);
        }
        op
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.m[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: C64) {
        self.m[row * self.dim + col] = v;
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for r in 0..self.dim {
            for c in 0..self.dim {
                out.m[c * self.dim + r] = self.m[r * self.dim + c].conj();
            }
        }
        out
    }

    pub fn matmul(&self, other: &ModeOp) -> Result<ModeOp> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                op: other.dim,
                expected: self.dim,
            });
        }
        let d = self.dim;
        let mut out = Self::zeros(d);
        for r in 0..d {
            for k in 0..d {
                let v = self.m[r * d + k];
                if v != C64::new(0.0, 0.0) {
                    for c in 0..d {
                        out.m[r * d + c] += v * other.m[k * d + c];
                    }
                }
            }
        }
        Ok(out)
    }

    /// self += c·other.
    pub fn add_scaled(&mut self, c: C64, other: &ModeOp) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                op: other.dim,
                expected: self.dim,
            });
        }
        for (a, b) in self.m.iter_mut().zip(&other.m) {
            *a += c * b;
        }
        Ok(())
    }

    /// Nonzero entries as (row, col, value) triplets.
    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        let mut t = Vec::new();
        for r in 0..self.dim {
            for c in 0..self.dim {
                let v = self.m[r * self.dim + c];
                if v != C64::new(0.0, 0.0) {
                    t.push((r, c, v));
                }
            }
        }
        t
    }
}

/// Annihilation operator: a|n⟩ = √n |n−1⟩, a|0⟩ = 0.
pub fn annihilation(dim: usize) -> Result<ModeOp> {
    if dim < 2 {
        return Err(Error::DimensionTooSmall(dim));
    }
    let mut op = ModeOp::zeros(dim);
    for n in 1..dim {
        op.set(n - 1, n, C64::new((n as f64).sqrt(), 0.0));
    }
    Ok(op)
}

/// Creation operator a†.
pub fn creation(dim: usize) -> Result<ModeOp> {
    Ok(annihilation(dim)?.dagger())
}

/// Number operator a†a = diag(0, 1, …, dim−1).
pub fn number(dim: usize) -> Result<ModeOp> {
    if dim < 2 {
        return Err(Error::DimensionTooSmall(dim));
    }
    let mut op = ModeOp::zeros(dim);
    for n in 0..dim {
        op.set(n, n, C64::new(n as f64, 0.0));
    }
    Ok(op)
}

/// Sparse complex operator on the full tensor space, compressed-sparse-row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    space: FockSpace,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseOp {
    /// Build from (row, col, value) triplets; duplicates are summed, exact
    /// zeros dropped.
    pub fn from_triplets(space: FockSpace, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let d = space.total();
        let mut row_ptr = Vec::with_capacity(d + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if let (Some(&lr), Some(&lc)) = (rows.last(), col_idx.last()) {
                if lr == r && lc == c {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            col_idx.push(c);
            vals.push(v);
        }
        // Drop entries that cancelled exactly.
        let mut k = 0;
        for i in 0..vals.len() {
            if vals[i] != C64::new(0.0, 0.0) {
                rows[k] = rows[i];
                col_idx[k] = col_idx[i];
                vals[k] = vals[i];
                k += 1;
            }
        }
        rows.truncate(k);
        col_idx.truncate(k);
        vals.truncate(k);
        let mut next = 0;
        for r in 0..=d {
            while next < rows.len() && rows[next] < r {
                next += 1;
            }
            row_ptr.push(next);
        }
        SparseOp {
            space,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn zero(space: FockSpace) -> Self {
        Self::from_triplets(space, Vec::new())
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// y = A·x into a caller-provided buffer (the propagator hot path).
    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.space.total());
        debug_assert_eq!(y.len(), self.space.total());
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
    }

    /// y += c·A·x with a real scalar (Hamiltonian coefficients are real).
    pub fn apply_scaled_add(&self, c: f64, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.space.total());
        debug_assert_eq!(y.len(), self.space.total());
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            *out += c * acc;
        }
    }

    pub fn apply(&self, x: &StateVector) -> Result<StateVector> {
        if x.space != self.space {
            return Err(Error::SpaceMismatch {
                left: self.space.dims,
                right: x.space.dims,
            });
        }
        let mut y = StateVector::zero(self.space);
        self.apply_into(&x.amp, &mut y.amp);
        Ok(y)
    }

    /// ⟨x|A|y⟩.
    pub fn matrix_element(&self, x: &StateVector, y: &StateVector) -> Result<C64> {
        inner(x, &self.apply(y)?)
    }

    /// ⟨x|A|x⟩.
    pub fn expectation(&self, x: &StateVector) -> Result<C64> {
        self.matrix_element(x, x)
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        match self.col_idx[lo..hi].binary_search(&col) {
            Ok(k) => self.vals[lo + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        for v in &mut out.vals {
            *v *= c;
        }
        out
    }

    /// Entrywise sum (pattern union).
    pub fn add(&self, other: &SparseOp) -> Result<SparseOp> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch {
                left: self.space.dims,
                right: other.space.dims,
            });
        }
        let mut triplets = self.triplets();
        triplets.extend(other.triplets());
        Ok(Self::from_triplets(self.space, triplets))
    }

    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.space.total() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                t.push((r, self.col_idx[k], self.vals[k]));
            }
        }
        t
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> SparseOp {
        let t = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (c, r, v.conj()))
            .collect();
        Self::from_triplets(self.space, t)
    }

    /// max_{ij} |A_ij − conj(A_ji)| — zero (to rounding) for Hermitian
    /// operators. Diagnostic only; not on the hot path.
    pub fn hermiticity_defect(&self) -> f64 {
        use std::collections::HashMap;
        let mut entries: HashMap<(usize, usize), C64> = HashMap::with_capacity(self.nnz());
        for (r, c, v) in self.triplets() {
            entries.insert((r, c), v);
        }
        let mut defect: f64 = 0.0;
        for (&(r, c), &v) in &entries {
            let vt = entries
                .get(&(c, r))
                .copied()
                .unwrap_or_else(|| C64::new(0.0, 0.0));
            defect = defect.max((v - vt.conj()).norm());
        }
        defect
    }

    /// Largest absolute entry (scale reference for defect normalization).
    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Coordinate-format text dump: header `row,col,re,im`, full precision.
    pub fn dump_coo(&self) -> String {
        let mut out = String::from("row,col,re,im\n");
        for (r, c, v) in self.triplets() {
            out.push_str(&format!("{r},{c},{:.16e},{:.16e}\n", v.re, v.im));
        }
        out
    }
}

/// Embed a single-mode operator into the tensor space as identity on the
/// other two factors.
pub fn embed(op: &ModeOp, s: Subsystem, space: FockSpace) -> Result<SparseOp> {
    if op.dim() != space.dim(s) {
        return Err(Error::DimensionMismatch {
            op: op.dim(),
            expected: space.dim(s),
        });
    }
    let stride = space.stride(s);
    let block = stride * space.dim(s);
    let total = space.total();
    let mode_triplets = op.triplets();
    let mut triplets = Vec::with_capacity(mode_triplets.len() * (total / space.dim(s)));
    for (r, c, v) in mode_triplets {
        for chunk in (0..total).step_by(block) {
            for offset in 0..stride {
                triplets.push((chunk + r * stride + offset, chunk + c * stride + offset, v));
            }
        }
    }
    Ok(SparseOp::from_triplets(space, triplets))
}

/// Matrix-free application of a single-mode operator along one tensor axis;
/// must agree with `embed(op, s, space).apply(x)` to rounding.
pub fn apply_mode_op(op: &ModeOp, s: Subsystem, x: &StateVector) -> Result<StateVector> {
    let space = x.space();
    if op.dim() != space.dim(s) {
        return Err(Error::DimensionMismatch {
            op: op.dim(),
            expected: space.dim(s),
        });
    }
    let stride = space.stride(s);
    let dim = space.dim(s);
    let block = stride * dim;
    let mut y = StateVector::zero(space);
    for chunk in (0..space.total()).step_by(block) {
        for offset in 0..stride {
            for r in 0..dim {
                let mut acc = C64::new(0.0, 0.0);
                for c in 0..dim {
                    let v = op.entry(r, c);
                    if v != C64::new(0.0, 0.0) {
                        acc += v * x.amp[chunk + c * stride + offset];
                    }
                }
                y.amp[chunk + r * stride + offset] = acc;
            }
        }
    }
    Ok(y)
}

/// Truncated single-mode coherent state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeState {
    /// Unit-norm amplitudes over |0⟩..|dim−1⟩.
    pub amplitudes: Vec<C64>,
    /// Probability weight beyond the cutoff before renormalization,
    /// 1 − Σ_{n<dim} |α|^{2n} e^{−|α|²}/n!.
    pub truncation_deficit: f64,
}

impl ModeState {
    /// Whether the cutoff captures the state to the 1e−10 level.
    pub fn well_truncated(&self) -> bool {
        self.truncation_deficit < 1e-10
    }
}

/// Truncated coherent state |α⟩ with amplitudes e^{−|α|²/2} αⁿ/√(n!),
/// renormalized to unit norm after truncation. The truncation deficit is
/// reported rather than raised: callers decide whether their cutoff suffices.
pub fn coherent(dim: usize, alpha: C64) -> Result<ModeState> {
    if dim == 0 {
        return Err(Error::DimensionTooSmall(dim));
    }
    let mut amp = Vec::with_capacity(dim);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    let mut weight = 0.0;
    for n in 0..dim {
        amp.push(c);
        weight += c.norm_sqr();
        c *= alpha / ((n + 1) as f64).sqrt();
    }
    let deficit = (1.0 - weight).max(0.0);
    let renorm = 1.0 / weight.sqrt();
    for a in &mut amp {
        *a *= renorm;
    }
    Ok(ModeState {
        amplitudes: amp,
        truncation_deficit: deficit,
    })
}

/// Tensor product of three single-mode states.
pub fn product_state(space: FockSpace, factors: [&ModeState; 3]) -> Result<StateVector> {
    for (i, f) in factors.iter().enumerate() {
        if f.amplitudes.len() != space.dims()[i] {
            return Err(Error::DimensionMismatch {
                op: f.amplitudes.len(),
                expected: space.dims()[i],
            });
        }
    }
    let mut v = StateVector::zero(space);
    for n1 in 0..space.dims()[0] {
        let a1 = factors[0].amplitudes[n1];
        for n2 in 0..space.dims()[1] {
            let a12 = a1 * factors[1].amplitudes[n2];
            for nc in 0..space.dims()[2] {
                v.amp[space.index([n1, n2, nc])] = a12 * factors[2].amplitudes[nc];
            }
        }
    }
    Ok(v)
}

/// Löwdin (symmetric) orthonormalization: output = input·S^{−1/2} with S the
/// Gram matrix, producing the orthonormal set closest to the originals in
/// least-squares sense. Fails if S is numerically singular (min eigenvalue
/// below 1e−12 of the max).
pub fn lowdin_orthonormalize(states: &[StateVector]) -> Result<Vec<StateVector>> {
    let n = states.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    for s in &states[1..] {
        check_same_space(&states[0], s)?;
    }
    let mut gram = nalgebra::DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            gram[(i, j)] = inner(&states[i], &states[j])?;
        }
    }
    let inv_sqrt = hermitian_inverse_sqrt(&gram)?;
    let mut out = Vec::with_capacity(n);
    for l in 0..n {
        let mut y = StateVector::zero(states[0].space);
        for (k, s) in states.iter().enumerate() {
            y.add_scaled(inv_sqrt[(k, l)], s)?;
        }
        out.push(y);
    }
    Ok(out)
}

/// S^{−1/2} of a Hermitian positive-definite matrix via eigendecomposition.
pub(crate) fn hermitian_inverse_sqrt(
    gram: &nalgebra::DMatrix<Complex64>,
) -> Result<nalgebra::DMatrix<Complex64>> {
    let eig = gram.clone().symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v));
    let min_eig = eig
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(v));
    if !(min_eig > 1e-12 * max_eig) {
        return Err(Error::SingularGram { min_eig, max_eig });
    }
    let n = gram.nrows();
    let mut d = nalgebra::DMatrix::<Complex64>::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = Complex64::new(1.0 / eig.eigenvalues[i].sqrt(), 0.0);
    }
    Ok(&eig.eigenvectors * d * eig.eigenvectors.adjoint())
}
