//! Rotating-frame Hamiltonian assembly on a truncated Fock space.
//!
//! The Hamiltonian (all coefficients E/h in GHz)
//!
//! ```text
//! H = Σ_j [ −K_j/2 a_j†²a_j² + p_j/2 (a_j†² + a_j²) + Δ_j a_j†a_j ]
//!   + [ −K_c/2 a_c†²a_c² + Δ_c a_c†a_c ]
//!   + Σ_j g_jc (a_j†a_c + a_c†a_j) + g_12 (a_1†a_2 + a_2†a_1)
//! ```
//!
//! is a fixed linear combination of eleven sparsity patterns that depend only
//! on the space. [`HamiltonianComponents`] builds those patterns once; the
//! propagator then re-applies them with fresh scalar coefficients at every
//! stage, which is what makes time-dependent runs cheap.
//!
//! Every pattern entry is real (√n ladder factors), so the hot path stores
//! real-valued CSR matrices and multiplies them against complex amplitudes.
//!
//! [`build_decomposed`] produces the exactly equivalent split
//! `H = H₀ + H_ZZ + H_X`, where H₀ is the solvable part (inverted-Kerr wells
//! plus the displaced coupler mode), H_ZZ carries the effective beam-splitter
//! coefficient `g_12 − g_1c g_2c/Δ_c` and the coupler Kerr, and H_X is the
//! unwanted single-KPO term with coefficient `Δ_j − g_jc²/Δ_c`.

use crate::error::{Error, Result};
use crate::fock::{FockSpace, SparseOp};
use crate::params::{RotatingFrameParams, Subsystem};
use crate::C64;

/// Sparse real matrix in compressed-sparse-row form over a [`FockSpace`].
///
/// This is the storage behind Hamiltonian application; for anything
/// diagnostic-flavored convert to the complex [`SparseOp`] via
/// [`RealCsr::to_sparse_op`].
#[derive(Debug, Clone, PartialEq)]
pub struct RealCsr {
    space: FockSpace,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl RealCsr {
    pub fn from_triplets(space: FockSpace, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut rows: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut col_idx: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
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
        let mut k = 0;
        for i in 0..vals.len() {
            if vals[i] != 0.0 {
                rows[k] = rows[i];
                col_idx[k] = col_idx[i];
                vals[k] = vals[i];
                k += 1;
            }
        }
        rows.truncate(k);
        col_idx.truncate(k);
        vals.truncate(k);
        let d = space.total();
        let mut row_ptr = Vec::with_capacity(d + 1);
        let mut next = 0;
        for r in 0..=d {
            while next < rows.len() && rows[next] < r {
                next += 1;
            }
            row_ptr.push(next);
        }
        RealCsr {
            space,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// y = A·x.
    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.space.total());
        debug_assert_eq!(y.len(), self.space.total());
        for (r, out) in y.iter_mut().enumerate() {
            let mut re = 0.0;
            let mut im = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.vals[k];
                let xc = x[self.col_idx[k]];
                re += v * xc.re;
                im += v * xc.im;
            }
            *out = C64::new(re, im);
        }
    }

    /// y += c·A·x.
    pub fn apply_scaled_add(&self, c: f64, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.space.total());
        debug_assert_eq!(y.len(), self.space.total());
        if c == 0.0 {
            return;
        }
        for (r, out) in y.iter_mut().enumerate() {
            let mut re = 0.0;
            let mut im = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let v = self.vals[k];
                let xc = x[self.col_idx[k]];
                re += v * xc.re;
                im += v * xc.im;
            }
            out.re += c * re;
            out.im += c * im;
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(self.nnz());
        for r in 0..self.space.total() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                t.push((r, self.col_idx[k], self.vals[k]));
            }
        }
        t
    }

    /// Convert to the general complex sparse representation.
    pub fn to_sparse_op(&self) -> SparseOp {
        SparseOp::from_triplets(
            self.space,
            self.triplets()
                .into_iter()
                .map(|(r, c, v)| (r, c, C64::new(v, 0.0)))
                .collect(),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Number of fixed sparsity patterns in a Hamiltonian assembly.
pub const N_COMPONENTS: usize = 11;

/// Identifies each pattern slot; the coefficient vector is indexed the same
/// way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    /// a_1†a_1 — coefficient Δ_1.
    Number1 = 0,
    /// a_2†a_2 — coefficient Δ_2.
    Number2 = 1,
    /// a_c†a_c — coefficient Δ_c.
    NumberC = 2,
    /// a_1†²a_1² — coefficient −K_1/2.
    Quartic1 = 3,
    /// a_2†²a_2² — coefficient −K_2/2.
    Quartic2 = 4,
    /// a_c†²a_c² — coefficient −K_c/2.
    QuarticC = 5,
    /// a_1†² + a_1² — coefficient p_1/2.
    TwoPhoton1 = 6,
    /// a_2†² + a_2² — coefficient p_2/2.
    TwoPhoton2 = 7,
    /// a_1†a_c + a_c†a_1 — coefficient g_1c.
    Exchange1C = 8,
    /// a_2†a_c + a_c†a_2 — coefficient g_2c.
    Exchange2C = 9,
    /// a_1†a_2 + a_2†a_1 — coefficient g_12.
    Exchange12 = 10,
}

/// Triplets of the number operator of one subsystem.
fn number_triplets(space: FockSpace, s: Subsystem) -> Vec<(usize, usize, f64)> {
    let mut t = Vec::new();
    for i in 0..space.total() {
        let n = space.occupations(i)[s.index()];
        if n > 0 {
            t.push((i, i, n as f64));
        }
    }
    t
}

/// Triplets of a†²a² = n(n−1) of one subsystem.
fn quartic_triplets(space: FockSpace, s: Subsystem) -> Vec<(usize, usize, f64)> {
    let mut t = Vec::new();
    for i in 0..space.total() {
        let n = space.occupations(i)[s.index()] as f64;
        if n >= 2.0 {
            t.push((i, i, n * (n - 1.0)));
        }
    }
    t
}

/// Triplets of a†² + a² of one subsystem.
fn two_photon_triplets(space: FockSpace, s: Subsystem) -> Vec<(usize, usize, f64)> {
    let dim = space.dim(s);
    let stride = space.stride(s);
    let mut t = Vec::new();
    for i in 0..space.total() {
        let n = space.occupations(i)[s.index()];
        // a†² : |n⟩ → √((n+1)(n+2)) |n+2⟩
        if n + 2 < dim {
            let v = (((n + 1) * (n + 2)) as f64).sqrt();
            t.push((i + 2 * stride, i, v));
            t.push((i, i + 2 * stride, v));
        }
    }
    t
}

/// Triplets of the excitation exchange a_a†a_b + a_b†a_a between two
/// subsystems.
fn exchange_triplets(space: FockSpace, sa: Subsystem, sb: Subsystem) -> Vec<(usize, usize, f64)> {
    let (stride_a, dim_a) = (space.stride(sa), space.dim(sa));
    let (stride_b, _dim_b) = (space.stride(sb), space.dim(sb));
    let mut t = Vec::new();
    for i in 0..space.total() {
        let occ = space.occupations(i);
        let na = occ[sa.index()];
        let nb = occ[sb.index()];
        // a_a† a_b : |…n_a…n_b…⟩ → √((n_a+1) n_b) |…n_a+1…n_b−1…⟩
        if na + 1 < dim_a && nb >= 1 {
            let j = i + stride_a - stride_b;
            let v = (((na + 1) * nb) as f64).sqrt();
            t.push((j, i, v));
            t.push((i, j, v));
        }
    }
    t
}

/// The eleven fixed sparsity patterns of the rotating-frame Hamiltonian on a
/// given space. Build once per space, then assemble or apply with per-time
/// coefficient vectors; the patterns never change.
#[derive(Debug, Clone)]
pub struct HamiltonianComponents {
    space: FockSpace,
    components: Vec<RealCsr>,
}

impl HamiltonianComponents {
    pub fn new(space: FockSpace) -> Self {
        use Subsystem::*;
        let components = vec![
            RealCsr::from_triplets(space, number_triplets(space, Kpo1)),
            RealCsr::from_triplets(space, number_triplets(space, Kpo2)),
            RealCsr::from_triplets(space, number_triplets(space, Coupler)),
            RealCsr::from_triplets(space, quartic_triplets(space, Kpo1)),
            RealCsr::from_triplets(space, quartic_triplets(space, Kpo2)),
            RealCsr::from_triplets(space, quartic_triplets(space, Coupler)),
            RealCsr::from_triplets(space, two_photon_triplets(space, Kpo1)),
            RealCsr::from_triplets(space, two_photon_triplets(space, Kpo2)),
            RealCsr::from_triplets(space, exchange_triplets(space, Kpo1, Coupler)),
            RealCsr::from_triplets(space, exchange_triplets(space, Kpo2, Coupler)),
            RealCsr::from_triplets(space, exchange_triplets(space, Kpo1, Kpo2)),
        ];
        HamiltonianComponents { space, components }
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn component(&self, c: Component) -> &RealCsr {
        &self.components[c as usize]
    }

    /// Coefficient vector of the full Hamiltonian for a parameter set.
    pub fn coefficients(params: &RotatingFrameParams) -> [f64; N_COMPONENTS] {
        [
            params.detuning_ghz[0],
            params.detuning_ghz[1],
            params.detuning_ghz[2],
            -params.kerr_ghz[0] / 2.0,
            -params.kerr_ghz[1] / 2.0,
            -params.kerr_ghz[2] / 2.0,
            params.pump_ghz[0] / 2.0,
            params.pump_ghz[1] / 2.0,
            params.g_1c_ghz,
            params.g_2c_ghz,
            params.g_12_ghz,
        ]
    }

    /// y = Σ_i coeffs\[i\]·A_i·x — the propagator hot path; no allocation.
    pub fn apply_into(&self, coeffs: &[f64; N_COMPONENTS], x: &[C64], y: &mut [C64]) {
        y.fill(C64::new(0.0, 0.0));
        for (c, comp) in coeffs.iter().zip(&self.components) {
            comp.apply_scaled_add(*c, x, y);
        }
    }

    /// Merge into a single real CSR matrix (for static propagation and
    /// diagnostics).
    pub fn assemble(&self, coeffs: &[f64; N_COMPONENTS]) -> RealCsr {
        let mut triplets = Vec::new();
        for (c, comp) in coeffs.iter().zip(&self.components) {
            if *c != 0.0 {
                triplets.extend(comp.triplets().into_iter().map(|(r, col, v)| (r, col, c * v)));
            }
        }
        RealCsr::from_triplets(self.space, triplets)
    }

    pub fn assemble_params(&self, params: &RotatingFrameParams) -> RealCsr {
        self.assemble(&Self::coefficients(params))
    }
}

/// The direct Hamiltonian as a complex sparse operator.
pub fn build_hamiltonian(params: &RotatingFrameParams, space: FockSpace) -> SparseOp {
    HamiltonianComponents::new(space)
        .assemble_params(params)
        .to_sparse_op()
}

/// The decomposition H = H₀ + H_ZZ + H_X together with the re-assembled
/// total.
#[derive(Debug, Clone)]
pub struct HamiltonianTerms {
    pub h_total: SparseOp,
    pub h0: SparseOp,
    pub h_zz: SparseOp,
    pub h_x: SparseOp,
    /// Largest coefficient magnitude (GHz), for normalizing tolerances.
    pub scale: f64,
}

/// Build the exact decomposition. Expanding the displaced coupler term of H₀
/// shows each part is again a combination of the eleven standard patterns:
///
/// ```text
/// H₀   = Σ_j [−K_j/2 a_j†²a_j² + p_j/2 (a_j†²+a_j²)]
///        + Δ_c (a_c† + Σ_j (g_jc/Δ_c) a_j†)(a_c + Σ_j (g_jc/Δ_c) a_j)
/// H_ZZ = (g_12 − g_1c g_2c/Δ_c)(a_1†a_2 + h.c.) − K_c/2 a_c†²a_c²
/// H_X  = Σ_j (Δ_j − g_jc²/Δ_c) a_j†a_j
/// ```
///
/// The inverted-Kerr constants ±K_j α_j⁴/2 cancel inside H₀, so no identity
/// term appears and the sum reproduces the direct Hamiltonian coefficient by
/// coefficient (to rounding).
pub fn build_decomposed(
    params: &RotatingFrameParams,
    space: FockSpace,
) -> Result<HamiltonianTerms> {
    let dc = params.checked_coupler_detuning()?;
    for j in [Subsystem::Kpo1, Subsystem::Kpo2] {
        if !(params.kerr(j) > 0.0) {
            return Err(Error::InvalidDesign(format!(
                "K_{} must be positive for the inverted-Kerr decomposition (got {})",
                j.label(),
                params.kerr(j)
            )));
        }
    }
    let comps = HamiltonianComponents::new(space);
    let g1c = params.g_1c_ghz;
    let g2c = params.g_2c_ghz;

    let mut h0 = [0.0; N_COMPONENTS];
    h0[Component::Number1 as usize] = g1c * g1c / dc;
    h0[Component::Number2 as usize] = g2c * g2c / dc;
    h0[Component::NumberC as usize] = dc;
    h0[Component::Quartic1 as usize] = -params.kerr_ghz[0] / 2.0;
    h0[Component::Quartic2 as usize] = -params.kerr_ghz[1] / 2.0;
    h0[Component::TwoPhoton1 as usize] = params.pump_ghz[0] / 2.0;
    h0[Component::TwoPhoton2 as usize] = params.pump_ghz[1] / 2.0;
    h0[Component::Exchange1C as usize] = g1c;
    h0[Component::Exchange2C as usize] = g2c;
    h0[Component::Exchange12 as usize] = g1c * g2c / dc;

    let mut h_zz = [0.0; N_COMPONENTS];
    h_zz[Component::QuarticC as usize] = -params.kerr_ghz[2] / 2.0;
    h_zz[Component::Exchange12 as usize] = params.g_12_ghz - g1c * g2c / dc;

    let mut h_x = [0.0; N_COMPONENTS];
    h_x[Component::Number1 as usize] = params.detuning_ghz[0] - g1c * g1c / dc;
    h_x[Component::Number2 as usize] = params.detuning_ghz[1] - g2c * g2c / dc;

    let total = comps.assemble_params(params);
    let scale = HamiltonianComponents::coefficients(params)
        .iter()
        .fold(0.0f64, |m, c| m.max(c.abs()));
    Ok(HamiltonianTerms {
        h_total: total.to_sparse_op(),
        h0: comps.assemble(&h0).to_sparse_op(),
        h_zz: comps.assemble(&h_zz).to_sparse_op(),
        h_x: comps.assemble(&h_x).to_sparse_op(),
        scale,
    })
}
