//! Circuit quantization: from raw design values to the rotating-frame
//! Hamiltonian coefficients.
//!
//! The derivation chain is
//!
//! ```text
//! CircuitDesign ──> CapacitanceMatrix ──> ChargingEnergies
//!        │                                      │
//!        └──────────────┬───────────────────────┘
//!                       v
//!        SubsystemParams (ω⁰, K, p per subsystem, per flux)
//!        Couplings      (g_1c, g_2c, g_12, fixed at t = 0)
//!                       v
//!        RotatingFrameParams (Δ_λ, K_λ, p_j, g's at a given time)
//! ```
//!
//! All energies are ordinary frequencies `E/h` in GHz; bias fluxes are radians
//! (`φ̃`), while serialized design fields store the dimensionless `φ̃/2π`.

use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::TAU;

/// Division guard for expressions containing 1/Δ_c (1 kHz in GHz units).
pub const DETUNING_THRESHOLD_GHZ: f64 = 1e-6;

/// Subsystem label; the index order (KPO 1, KPO 2, coupler) fixes row/column
/// ordering of every 3×3 matrix and flux triple in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subsystem {
    Kpo1,
    Kpo2,
    Coupler,
}

impl Subsystem {
    pub const ALL: [Subsystem; 3] = [Subsystem::Kpo1, Subsystem::Kpo2, Subsystem::Coupler];
    /// The two pumped subsystems.
    pub const KPOS: [Subsystem; 2] = [Subsystem::Kpo1, Subsystem::Kpo2];

    pub fn index(self) -> usize {
        match self {
            Subsystem::Kpo1 => 0,
            Subsystem::Kpo2 => 1,
            Subsystem::Coupler => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Subsystem::Kpo1 => "1",
            Subsystem::Kpo2 => "2",
            Subsystem::Coupler => "c",
        }
    }
}

/// Design values of one subsystem (a capacitively shunted SQUID chain).
///
/// `shunt_capacitance_ff` is the value of *one* of the two identical shunting
/// capacitors; the lumped subsystem capacitance is
/// `C_λ = 2 C_λ^S + 2 C_λ^J / N_λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemDesign {
    /// C_λ^S in fF.
    pub shunt_capacitance_ff: f64,
    /// C_λ^J in fF (per-SQUID junction capacitance).
    pub junction_capacitance_ff: f64,
    /// N_λ, the number of SQUIDs in the chain.
    pub squid_count: u32,
    /// E_λ^J in GHz (as E/h).
    pub josephson_energy_ghz: f64,
    /// Static bias flux φ̃_λ^bias/2π (dimensionless).
    pub static_bias_flux_over_2pi: f64,
    /// Pump amplitude ε_{p,λ} (dimensionless; 0 for the coupler).
    pub pump_amplitude: f64,
}

impl SubsystemDesign {
    /// Static bias flux φ̃_λ^bias in radians.
    pub fn static_bias_flux_rad(&self) -> f64 {
        self.static_bias_flux_over_2pi * TAU
    }

    /// Lumped capacitance C_λ = 2C_λ^S + 2C_λ^J/N_λ in fF.
    pub fn lumped_capacitance_ff(&self) -> f64 {
        2.0 * self.shunt_capacitance_ff + 2.0 * self.junction_capacitance_ff / self.squid_count as f64
    }
}

/// The full circuit: three subsystems, three coupling capacitors, one pump
/// frequency. Serialized field names carry their units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitDesign {
    pub kpo1: SubsystemDesign,
    pub kpo2: SubsystemDesign,
    pub coupler: SubsystemDesign,
    /// C_12 in fF.
    pub coupling_capacitance_12_ff: f64,
    /// C_1c in fF.
    pub coupling_capacitance_1c_ff: f64,
    /// C_2c in fF.
    pub coupling_capacitance_2c_ff: f64,
    /// ω_p/2π in GHz.
    pub pump_frequency_ghz: f64,
}

impl CircuitDesign {
    /// The published design point: two identical KPOs and a three-SQUID
    /// coupler, biased at φ̃_j/2π = 0.25 and φ̃_c/2π = 2×10⁻³.
    pub fn table1() -> Self {
        let kpo = SubsystemDesign {
            shunt_capacitance_ff: 470.0,
            junction_capacitance_ff: 30.0,
            squid_count: 1,
            josephson_energy_ghz: 130.0,
            static_bias_flux_over_2pi: 0.25,
            pump_amplitude: 0.019,
        };
        CircuitDesign {
            kpo1: kpo,
            kpo2: kpo,
            coupler: SubsystemDesign {
                shunt_capacitance_ff: 400.0,
                junction_capacitance_ff: 30.0,
                squid_count: 3,
                josephson_energy_ghz: 426.0,
                static_bias_flux_over_2pi: 2e-3,
                pump_amplitude: 0.0,
            },
            coupling_capacitance_12_ff: 0.05,
            coupling_capacitance_1c_ff: 7.0,
            coupling_capacitance_2c_ff: 7.0,
            pump_frequency_ghz: 10.598944,
        }
    }

    pub fn subsystem(&self, s: Subsystem) -> &SubsystemDesign {
        match s {
            Subsystem::Kpo1 => &self.kpo1,
            Subsystem::Kpo2 => &self.kpo2,
            Subsystem::Coupler => &self.coupler,
        }
    }

    /// Static bias fluxes (radians), ordered (1, 2, c).
    pub fn static_fluxes_rad(&self) -> [f64; 3] {
        [
            self.kpo1.static_bias_flux_rad(),
            self.kpo2.static_bias_flux_rad(),
            self.coupler.static_bias_flux_rad(),
        ]
    }

    /// Copy of the design with the coupler's static bias replaced — the unit
    /// of work of a ZZ sweep, where every bias point is a distinct static
    /// circuit.
    pub fn with_coupler_bias_over_2pi(&self, flux_over_2pi: f64) -> Self {
        let mut d = *self;
        d.coupler.static_bias_flux_over_2pi = flux_over_2pi;
        d
    }

    /// Reject designs outside the model's validity domain.
    ///
    /// Subsystem capacitances must be strictly positive; coupling capacitances
    /// may be zero (the couplings then vanish). Pump amplitudes must satisfy
    /// |ε| < 0.1 and the coupler must not be pumped. Bias fluxes must sit on
    /// the principal branch, cos(φ̃/2) > 0.
    pub fn validate(&self) -> Result<()> {
        for s in Subsystem::ALL {
            let d = self.subsystem(s);
            let label = s.label();
            if !(d.shunt_capacitance_ff > 0.0) || !(d.junction_capacitance_ff > 0.0) {
                return Err(Error::InvalidDesign(format!(
                    "subsystem {label}: capacitances must be positive"
                )));
            }
            if d.squid_count < 1 {
                return Err(Error::InvalidDesign(format!(
                    "subsystem {label}: SQUID count must be at least 1"
                )));
            }
            if !(d.josephson_energy_ghz > 0.0) {
                return Err(Error::InvalidDesign(format!(
                    "subsystem {label}: Josephson energy must be positive"
                )));
            }
            if !(d.pump_amplitude.abs() < 0.1) {
                return Err(Error::InvalidDesign(format!(
                    "subsystem {label}: |pump amplitude| must be well below 1 (got {})",
                    d.pump_amplitude
                )));
            }
            let flux = d.static_bias_flux_rad();
            if !(flux.abs() < TAU) || (flux / 2.0).cos() <= 0.0 {
                return Err(Error::InvalidDesign(format!(
                    "subsystem {label}: bias flux {}·2π is off the principal branch",
                    d.static_bias_flux_over_2pi
                )));
            }
        }
        if self.coupler.pump_amplitude != 0.0 {
            return Err(Error::InvalidDesign(
                "the coupler is not pumped: its pump amplitude must be exactly 0".into(),
            ));
        }
        for (name, c) in [
            ("C_12", self.coupling_capacitance_12_ff),
            ("C_1c", self.coupling_capacitance_1c_ff),
            ("C_2c", self.coupling_capacitance_2c_ff),
        ] {
            if !(c >= 0.0) {
                return Err(Error::InvalidDesign(format!(
                    "coupling capacitance {name} must be non-negative (got {c})"
                )));
            }
        }
        if !(self.pump_frequency_ghz > 0.0) {
            return Err(Error::InvalidDesign(
                "pump frequency must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// 3×3 capacitance matrix in fF, node order (1, 2, c).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacitanceMatrix {
    pub m: [[f64; 3]; 3],
}

/// Build the capacitance matrix: lumped subsystem capacitances plus incident
/// coupling capacitances on the diagonal, minus the coupling capacitance on
/// each off-diagonal.
pub fn capacitance_matrix(design: &CircuitDesign) -> CapacitanceMatrix {
    let c1 = design.kpo1.lumped_capacitance_ff();
    let c2 = design.kpo2.lumped_capacitance_ff();
    let cc = design.coupler.lumped_capacitance_ff();
    let c12 = design.coupling_capacitance_12_ff;
    let c1c = design.coupling_capacitance_1c_ff;
    let c2c = design.coupling_capacitance_2c_ff;
    CapacitanceMatrix {
        m: [
            [c1 + c12 + c1c, -c12, -c1c],
            [-c12, c2 + c12 + c2c, -c2c],
            [-c1c, -c2c, cc + c1c + c2c],
        ],
    }
}

/// Charging-energy matrix (e²/2)·M⁻¹ in GHz. The diagonal holds E_λ^C, the
/// off-diagonals E_12^C, E_1c^C, E_2c^C.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargingEnergies {
    pub e_c: [[f64; 3]; 3],
}

impl ChargingEnergies {
    pub fn diagonal(&self, s: Subsystem) -> f64 {
        self.e_c[s.index()][s.index()]
    }

    pub fn off_diagonal(&self, a: Subsystem, b: Subsystem) -> f64 {
        self.e_c[a.index()][b.index()]
    }
}

/// Invert the capacitance matrix through the closed-form adjugate and convert
/// to charging energies. The matrix is diagonally dominant for physical
/// designs, so the closed form is exact to rounding; a determinant below
/// 1e−12 of the natural scale (or a non-positive-definite matrix) is rejected.
pub fn charging_energies(
    cm: &CapacitanceMatrix,
    constants: &PhysicalConstants,
) -> Result<ChargingEnergies> {
    let m = &cm.m;
    let cof = |i: usize, j: usize| -> f64 {
        // Cofactor C_ij (signed minor), laid out so that inv = adj/det with
        // adj[j][i] = C_ij; the matrix is symmetric so the transpose is free.
        let r = [(i + 1) % 3, (i + 2) % 3];
        let c = [(j + 1) % 3, (j + 2) % 3];
        m[r[0]][c[0]] * m[r[1]][c[1]] - m[r[0]][c[1]] * m[r[1]][c[0]]
    };
    let det = m[0][0] * cof(0, 0) + m[0][1] * cof(0, 1) + m[0][2] * cof(0, 2);
    let scale = m[0][0].abs().max(m[1][1].abs()).max(m[2][2].abs());
    if !(det > 1e-12 * scale * scale * scale) {
        return Err(Error::SingularCapacitance { det, scale });
    }
    // Positive definiteness by Sylvester's criterion (det > 0 checked above).
    if !(m[0][0] > 0.0) || !(m[0][0] * m[1][1] - m[0][1] * m[1][0] > 0.0) {
        return Err(Error::SingularCapacitance { det, scale });
    }
    let k = constants.charging_scale_ghz_ff();
    let mut e_c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            e_c[i][j] = k * cof(j, i) / det;
        }
    }
    // Symmetrize to the last bit: the cofactors of a symmetric matrix are
    // symmetric analytically but not always bitwise.
    for i in 0..3 {
        for j in (i + 1)..3 {
            let v = 0.5 * (e_c[i][j] + e_c[j][i]);
            e_c[i][j] = v;
            e_c[j][i] = v;
        }
    }
    Ok(ChargingEnergies { e_c })
}

/// Ẽ_λ^{J,bias} = 2 E_λ^J cos(φ̃/2) in GHz, rejecting fluxes off the
/// principal branch.
pub fn bias_josephson_energy(
    design: &CircuitDesign,
    s: Subsystem,
    flux_rad: f64,
) -> Result<f64> {
    let c = (flux_rad / 2.0).cos();
    if !(c > 0.0) {
        return Err(Error::FluxBranch { flux_rad });
    }
    Ok(2.0 * design.subsystem(s).josephson_energy_ghz * c)
}

/// Oscillator parameters of one subsystem at a bias flux `flux_at_t`, with the
/// t = 0 flux fixing the normalization Ẽ(0) of the mode functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsystemParams {
    /// ω_λ^(0)(t) in GHz.
    pub bare_frequency_ghz: f64,
    /// K_λ(t) in GHz.
    pub kerr_ghz: f64,
    /// p_λ(t) in GHz (0 for the coupler at all times).
    pub pump_rate_ghz: f64,
    /// Ẽ_λ^{J,bias}(t) in GHz.
    pub bias_energy_ghz: f64,
    /// Ẽ_λ^{J,bias}(0) in GHz.
    pub bias_energy_at_zero_ghz: f64,
}

impl SubsystemParams {
    /// Dressed frequency ω_λ = ω_λ^(0) − K_λ in GHz.
    pub fn dressed_frequency_ghz(&self) -> f64 {
        self.bare_frequency_ghz - self.kerr_ghz
    }
}

/// Evaluate ω_λ^(0), K_λ and p_λ at `flux_at_t_rad` given the t = 0 flux.
///
/// With Ẽ(t) the bias Josephson energy,
///
/// ```text
/// ω_λ^(0)(t) = √(2 E_λ^C Ẽ(0)/N_λ) · (Ẽ(t)/Ẽ(0) + 1)
/// K_λ(t)     = E_λ^C Ẽ(t) / (N_λ² Ẽ(0))
/// p_λ(t)     = π ε_{p,λ} E_λ^J √(2E_λ^C/(N_λ Ẽ(0))) · sin(φ̃(t)/2)
/// ```
///
/// Note ω_λ^(0)(t) is affine in Ẽ(t) for fixed Ẽ(0), which is what makes the
/// bias inversion in [`invert_bias_for_detuning`] closed-form.
pub fn subsystem_params(
    design: &CircuitDesign,
    charging: &ChargingEnergies,
    s: Subsystem,
    flux_at_t_rad: f64,
    flux_at_0_rad: f64,
) -> Result<SubsystemParams> {
    let d = design.subsystem(s);
    let n = d.squid_count as f64;
    let e_c = charging.diagonal(s);
    let e_t = bias_josephson_energy(design, s, flux_at_t_rad)?;
    let e_0 = bias_josephson_energy(design, s, flux_at_0_rad)?;
    let bare = (2.0 * e_c * e_0 / n).sqrt() * (e_t / e_0 + 1.0);
    let kerr = e_c * e_t / (n * n * e_0);
    let pump = std::f64::consts::PI
        * d.pump_amplitude
        * d.josephson_energy_ghz
        * (2.0 * e_c / (n * e_0)).sqrt()
        * (flux_at_t_rad / 2.0).sin();
    Ok(SubsystemParams {
        bare_frequency_ghz: bare,
        kerr_ghz: kerr,
        pump_rate_ghz: pump,
        bias_energy_ghz: e_t,
        bias_energy_at_zero_ghz: e_0,
    })
}

/// The three beam-splitter couplings, built from t = 0 bias energies only and
/// therefore time-independent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Couplings {
    pub g_1c_ghz: f64,
    pub g_2c_ghz: f64,
    pub g_12_ghz: f64,
}

/// g_jc = √2 E_jc^C (Ẽ_j(0)Ẽ_c(0)/(N_j N_c E_j^C E_c^C))^{1/4}, and the
/// analogous g_12.
pub fn coupling_strengths(
    design: &CircuitDesign,
    charging: &ChargingEnergies,
) -> Result<Couplings> {
    let fluxes = design.static_fluxes_rad();
    let e0 = |s: Subsystem| bias_josephson_energy(design, s, fluxes[s.index()]);
    let e0_1 = e0(Subsystem::Kpo1)?;
    let e0_2 = e0(Subsystem::Kpo2)?;
    let e0_c = e0(Subsystem::Coupler)?;
    let g = |e_off: f64, ea: f64, na: f64, eca: f64, eb: f64, nb: f64, ecb: f64| {
        std::f64::consts::SQRT_2 * e_off * (ea * eb / (na * nb * eca * ecb)).powf(0.25)
    };
    let n1 = design.kpo1.squid_count as f64;
    let n2 = design.kpo2.squid_count as f64;
    let nc = design.coupler.squid_count as f64;
    let ec1 = charging.diagonal(Subsystem::Kpo1);
    let ec2 = charging.diagonal(Subsystem::Kpo2);
    let ecc = charging.diagonal(Subsystem::Coupler);
    Ok(Couplings {
        g_1c_ghz: g(
            charging.off_diagonal(Subsystem::Kpo1, Subsystem::Coupler),
            e0_1,
            n1,
            ec1,
            e0_c,
            nc,
            ecc,
        ),
        g_2c_ghz: g(
            charging.off_diagonal(Subsystem::Kpo2, Subsystem::Coupler),
            e0_2,
            n2,
            ec2,
            e0_c,
            nc,
            ecc,
        ),
        g_12_ghz: g(
            charging.off_diagonal(Subsystem::Kpo1, Subsystem::Kpo2),
            e0_1,
            n1,
            ec1,
            e0_2,
            n2,
            ec2,
        ),
    })
}

/// The complete rotating-frame coefficient set at one instant.
///
/// Arrays are ordered (1, 2, c); `pump_ghz` covers the two KPOs (the coupler
/// pump vanishes identically).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatingFrameParams {
    /// Δ_λ = ω_λ − ω_p/2 in GHz.
    pub detuning_ghz: [f64; 3],
    /// K_λ in GHz.
    pub kerr_ghz: [f64; 3],
    /// p_1, p_2 in GHz.
    pub pump_ghz: [f64; 2],
    pub g_1c_ghz: f64,
    pub g_2c_ghz: f64,
    pub g_12_ghz: f64,
    /// Dressed frequencies ω_λ = ω_λ^(0) − K_λ in GHz.
    pub dressed_frequency_ghz: [f64; 3],
}

impl RotatingFrameParams {
    pub fn detuning(&self, s: Subsystem) -> f64 {
        self.detuning_ghz[s.index()]
    }

    pub fn kerr(&self, s: Subsystem) -> f64 {
        self.kerr_ghz[s.index()]
    }

    pub fn coupling_to_coupler(&self, j: Subsystem) -> f64 {
        match j {
            Subsystem::Kpo1 => self.g_1c_ghz,
            Subsystem::Kpo2 => self.g_2c_ghz,
            Subsystem::Coupler => panic!("coupling_to_coupler takes a KPO"),
        }
    }

    /// Guard the 1/Δ_c expressions used throughout the decomposed picture.
    pub fn checked_coupler_detuning(&self) -> Result<f64> {
        let dc = self.detuning(Subsystem::Coupler);
        if dc.abs() <= DETUNING_THRESHOLD_GHZ {
            return Err(Error::DetuningTooSmall {
                delta_c_ghz: dc,
                threshold_ghz: DETUNING_THRESHOLD_GHZ,
            });
        }
        Ok(dc)
    }

    /// Effective beam-splitter coefficient g_12 − g_1c g_2c/Δ_c in GHz.
    pub fn effective_beam_splitter_ghz(&self) -> Result<f64> {
        let dc = self.checked_coupler_detuning()?;
        Ok(self.g_12_ghz - self.g_1c_ghz * self.g_2c_ghz / dc)
    }

    /// Coefficient of the unwanted single-qubit term, Δ_j − g_jc²/Δ_c in GHz.
    pub fn x_coefficient_ghz(&self, j: Subsystem) -> Result<f64> {
        let dc = self.checked_coupler_detuning()?;
        let g = self.coupling_to_coupler(j);
        Ok(self.detuning(j) - g * g / dc)
    }
}

/// Assemble the full rotating-frame coefficient set at the bias fluxes
/// `fluxes_at_t_rad` (radians, ordered (1, 2, c)), with mode normalizations
/// and couplings anchored at the design's static fluxes.
pub fn rotating_frame_params(
    design: &CircuitDesign,
    fluxes_at_t_rad: [f64; 3],
) -> Result<RotatingFrameParams> {
    let charging = charging_energies(&capacitance_matrix(design), &PhysicalConstants::codata())?;
    rotating_frame_params_with(design, &charging, fluxes_at_t_rad)
}

/// As [`rotating_frame_params`], reusing a precomputed charging-energy matrix.
pub fn rotating_frame_params_with(
    design: &CircuitDesign,
    charging: &ChargingEnergies,
    fluxes_at_t_rad: [f64; 3],
) -> Result<RotatingFrameParams> {
    let statics = design.static_fluxes_rad();
    let half_pump = design.pump_frequency_ghz / 2.0;
    let mut detuning = [0.0; 3];
    let mut kerr = [0.0; 3];
    let mut dressed = [0.0; 3];
    let mut pump = [0.0; 2];
    for s in Subsystem::ALL {
        let i = s.index();
        let p = subsystem_params(design, charging, s, fluxes_at_t_rad[i], statics[i])?;
        kerr[i] = p.kerr_ghz;
        dressed[i] = p.dressed_frequency_ghz();
        detuning[i] = dressed[i] - half_pump;
        if i < 2 {
            pump[i] = p.pump_rate_ghz;
        }
    }
    let c = coupling_strengths(design, charging)?;
    Ok(RotatingFrameParams {
        detuning_ghz: detuning,
        kerr_ghz: kerr,
        pump_ghz: pump,
        g_1c_ghz: c.g_1c_ghz,
        g_2c_ghz: c.g_2c_ghz,
        g_12_ghz: c.g_12_ghz,
        dressed_frequency_ghz: dressed,
    })
}

/// Solve ω_λ(flux) = ω_p/2 + target_Δ for the bias flux, on the branch
/// flux/2 ∈ [0, π/2).
///
/// The dressed frequency is affine in the bias Josephson energy,
/// `ω_λ = A + B·Ẽ(t)` with `A = √(2E^C Ẽ(0)/N)` and
/// `B = (A − E^C/N²)/Ẽ(0)`, so the inversion is closed-form:
/// `Ẽ(t) = (ω_target − A)/B`, then `flux = 2·arccos(Ẽ(t)/2E^J)`.
pub fn invert_bias_for_detuning(
    design: &CircuitDesign,
    charging: &ChargingEnergies,
    s: Subsystem,
    target_detuning_ghz: f64,
) -> Result<f64> {
    let scales = InversionScales::new(design, charging, s)?;
    scales.flux_for_detuning(target_detuning_ghz)
}

/// Cached scalars for the closed-form bias inversion of one subsystem, used
/// both by [`invert_bias_for_detuning`] and by flux-schedule evaluation where
/// the inversion runs once per integrator stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionScales {
    /// √(2E^C Ẽ(0)/N) in GHz — the Ẽ-independent part of ω_λ.
    pub offset_ghz: f64,
    /// dω_λ/dẼ(t) (dimensionless).
    pub slope: f64,
    /// 2E_λ^J in GHz.
    pub two_ej_ghz: f64,
    /// E_λ^C/(N² Ẽ(0)) in 1/unit — multiplies Ẽ(t) to give K_λ(t).
    pub kerr_per_bias_energy: f64,
    /// π ε E^J √(2E^C/(N Ẽ(0))) in GHz — multiplies sin(φ̃/2) to give p_λ(t).
    pub pump_scale_ghz: f64,
    /// ω_p/2 in GHz.
    pub half_pump_ghz: f64,
}

impl InversionScales {
    pub fn new(
        design: &CircuitDesign,
        charging: &ChargingEnergies,
        s: Subsystem,
    ) -> Result<Self> {
        let d = design.subsystem(s);
        let n = d.squid_count as f64;
        let e_c = charging.diagonal(s);
        let e_0 = bias_josephson_energy(design, s, d.static_bias_flux_rad())?;
        let offset = (2.0 * e_c * e_0 / n).sqrt();
        let slope = (offset - e_c / (n * n)) / e_0;
        if !(slope > 0.0) {
            return Err(Error::InvalidDesign(format!(
                "subsystem {}: dressed frequency is not increasing in the bias energy \
                 (slope {slope:.3e}); the bias inversion is ill-posed",
                s.label()
            )));
        }
        Ok(InversionScales {
            offset_ghz: offset,
            slope,
            two_ej_ghz: 2.0 * d.josephson_energy_ghz,
            kerr_per_bias_energy: e_c / (n * n * e_0),
            pump_scale_ghz: std::f64::consts::PI
                * d.pump_amplitude
                * d.josephson_energy_ghz
                * (2.0 * e_c / (n * e_0)).sqrt(),
            half_pump_ghz: design.pump_frequency_ghz / 2.0,
        })
    }

    /// Bias energy Ẽ(t) realizing the target detuning.
    pub fn bias_energy_for_detuning(&self, target_detuning_ghz: f64) -> Result<f64> {
        let e_t = (target_detuning_ghz + self.half_pump_ghz - self.offset_ghz) / self.slope;
        if !(e_t > 0.0) || e_t > self.two_ej_ghz {
            return Err(Error::UnreachableDetuning {
                target_ghz: target_detuning_ghz,
                required_ghz: e_t,
                max_ghz: self.two_ej_ghz,
            });
        }
        Ok(e_t)
    }

    /// Flux (radians, on [0, 2π)) realizing the target detuning.
    pub fn flux_for_detuning(&self, target_detuning_ghz: f64) -> Result<f64> {
        let e_t = self.bias_energy_for_detuning(target_detuning_ghz)?;
        Ok(2.0 * (e_t / self.two_ej_ghz).min(1.0).acos())
    }

    /// Detuning at a given bias energy (the forward affine map).
    pub fn detuning_at_bias_energy(&self, e_t: f64) -> f64 {
        self.offset_ghz + self.slope * e_t - self.half_pump_ghz
    }

    /// K_λ at a given bias energy.
    pub fn kerr_at_bias_energy(&self, e_t: f64) -> f64 {
        self.kerr_per_bias_energy * e_t
    }

    /// p_λ at a given bias energy, using sin(φ̃/2) = √(1 − (Ẽ/2E^J)²) on the
    /// principal branch.
    pub fn pump_at_bias_energy(&self, e_t: f64) -> f64 {
        let u = (e_t / self.two_ej_ghz).min(1.0);
        self.pump_scale_ghz * (1.0 - u * u).max(0.0).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    // Reference values for the Table-I design, frozen from an independent
    // implementation of the same chain (arbitrary-order arithmetic checked
    // against the published 3-significant-figure table).
    pub(crate) const E1C_GHZ: f64 = 0.01923574768722772;
    pub(crate) const ECC_GHZ: f64 = 0.023228405137223113;
    const E12C_GHZ: f64 = 2.0774214555761708e-6;
    const E1CC_GHZ: f64 = 1.614685560680852e-4;
    pub(crate) const OMEGA_1_GHZ: f64 = 5.29974850422882;
    pub(crate) const OMEGA_C_GHZ: f64 = 7.261983384739311;
    pub(crate) const DELTA_1_GHZ: f64 = 2.765042288199737e-4;
    pub(crate) const DELTA_C_GHZ: f64 = 1.9625113847393116;
    pub(crate) const K_C_GHZ: f64 = 0.0025809339041359012;
    pub(crate) const P_1_GHZ: f64 = 0.07937288878930145;
    pub(crate) const G_1C_GHZ: f64 = 0.02374175794078181;
    pub(crate) const G_12_GHZ: f64 = 2.872197168124394e-4;
    pub(crate) const X_COEF_GHZ: f64 = -1.0715032429586314e-5;

    fn table1_charging() -> ChargingEnergies {
        charging_energies(
            &capacitance_matrix(&CircuitDesign::table1()),
            &PhysicalConstants::codata(),
        )
        .unwrap()
    }

    #[test]
    fn table1_design_is_valid() {
        CircuitDesign::table1().validate().unwrap();
    }

    #[test]
    fn capacitance_matrix_entries_follow_the_definition() {
        let m = capacitance_matrix(&CircuitDesign::table1()).m;
        assert_eq!(m[0][0], 2.0 * 470.0 + 2.0 * 30.0 / 1.0 + 0.05 + 7.0);
        assert_eq!(m[2][2], 2.0 * 400.0 + 2.0 * 30.0 / 3.0 + 7.0 + 7.0);
        assert_eq!(m[0][1], -0.05);
        assert_eq!(m[0][2], -7.0);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m[i][j], m[j][i]);
            }
        }
    }

    /// Independent oracle: Gauss-Jordan elimination with partial pivoting,
    /// deliberately a different algorithm from the adjugate closed form.
    fn gauss_jordan_inverse(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let mut a = [[0.0; 6]; 3];
        for i in 0..3 {
            a[i][..3].copy_from_slice(&m[i]);
            a[i][3 + i] = 1.0;
        }
        for col in 0..3 {
            let pivot = (col..3)
                .max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap())
                .unwrap();
            a.swap(col, pivot);
            let p = a[col][col];
            for v in a[col].iter_mut() {
                *v /= p;
            }
            for row in 0..3 {
                if row != col {
                    let f = a[row][col];
                    for k in 0..6 {
                        a[row][k] -= f * a[col][k];
                    }
                }
            }
        }
        let mut inv = [[0.0; 3]; 3];
        for i in 0..3 {
            inv[i].copy_from_slice(&a[i][3..]);
        }
        inv
    }

    #[test]
    fn charging_energies_match_gauss_jordan_inversion() {
        let cm = capacitance_matrix(&CircuitDesign::table1());
        let e = table1_charging();
        let inv = gauss_jordan_inverse(cm.m);
        let k = PhysicalConstants::codata().charging_scale_ghz_ff();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(e.e_c[i][j], k * inv[i][j], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn charging_energies_reproduce_the_reference_chain() {
        let e = table1_charging();
        assert_relative_eq!(e.diagonal(Subsystem::Kpo1), E1C_GHZ, max_relative = 1e-12);
        assert_relative_eq!(e.diagonal(Subsystem::Coupler), ECC_GHZ, max_relative = 1e-12);
        assert_relative_eq!(
            e.off_diagonal(Subsystem::Kpo1, Subsystem::Kpo2),
            E12C_GHZ,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            e.off_diagonal(Subsystem::Kpo1, Subsystem::Coupler),
            E1CC_GHZ,
            max_relative = 1e-12
        );
        // Cross-checks against the published table: ħK_j = E_j^C for N_j = 1,
        // and K_c = E_c^C/N_c².
        assert_relative_eq!(e.diagonal(Subsystem::Kpo1), 19.2e-3, max_relative = 5e-3);
        assert_relative_eq!(
            e.diagonal(Subsystem::Coupler) / 9.0,
            2.58e-3,
            max_relative = 5e-3
        );
    }

    #[test]
    fn scalar_charging_energy_for_a_lone_island() {
        let cm = CapacitanceMatrix {
            m: [[1000.0, 0.0, 0.0], [0.0, 1000.0, 0.0], [0.0, 0.0, 1000.0]],
        };
        let e = charging_energies(&cm, &PhysicalConstants::codata()).unwrap();
        assert_relative_eq!(e.e_c[0][0], 19.37e-3, max_relative = 1e-3);
        assert_eq!(e.e_c[0][1], 0.0);
    }

    #[test]
    fn singular_capacitance_matrix_is_rejected() {
        let cm = CapacitanceMatrix {
            m: [[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        };
        assert!(matches!(
            charging_energies(&cm, &PhysicalConstants::codata()),
            Err(Error::SingularCapacitance { .. })
        ));
    }

    #[test]
    fn bias_josephson_energy_examples() {
        let d = CircuitDesign::table1();
        let e = bias_josephson_energy(&d, Subsystem::Kpo1, 0.25 * TAU).unwrap();
        assert_relative_eq!(
            e,
            2.0 * 130.0 * (std::f64::consts::PI / 4.0).cos(),
            max_relative = 1e-15
        );
        assert_relative_eq!(e, 183.8, max_relative = 1e-3);
        let ec = bias_josephson_energy(&d, Subsystem::Coupler, 2e-3 * TAU).unwrap();
        assert_relative_eq!(ec, 851.98, max_relative = 1e-4);
        assert_eq!(
            bias_josephson_energy(&d, Subsystem::Coupler, 0.0).unwrap(),
            2.0 * 426.0
        );
    }

    #[test]
    fn off_branch_flux_is_rejected() {
        let d = CircuitDesign::table1();
        assert!(matches!(
            bias_josephson_energy(&d, Subsystem::Kpo1, 1.2 * std::f64::consts::PI),
            Err(Error::FluxBranch { .. })
        ));
    }

    #[test]
    fn kpo_params_reproduce_the_table() {
        let d = CircuitDesign::table1();
        let charging = table1_charging();
        let flux = d.kpo1.static_bias_flux_rad();
        let p = subsystem_params(&d, &charging, Subsystem::Kpo1, flux, flux).unwrap();
        assert_relative_eq!(p.kerr_ghz, 19.2e-3, max_relative = 5e-3);
        assert_relative_eq!(p.pump_rate_ghz, 79.4e-3, max_relative = 5e-3);
        assert_relative_eq!(p.pump_rate_ghz, P_1_GHZ, max_relative = 1e-12);
        assert_relative_eq!(p.dressed_frequency_ghz(), 5.30, max_relative = 1e-3);
        assert_relative_eq!(p.dressed_frequency_ghz(), OMEGA_1_GHZ, max_relative = 1e-12);
    }

    #[test]
    fn coupler_params_reproduce_the_table() {
        let d = CircuitDesign::table1();
        let charging = table1_charging();
        let flux = d.coupler.static_bias_flux_rad();
        let p = subsystem_params(&d, &charging, Subsystem::Coupler, flux, flux).unwrap();
        assert_relative_eq!(p.kerr_ghz, K_C_GHZ, max_relative = 1e-12);
        assert_relative_eq!(p.kerr_ghz, 2.58e-3, max_relative = 2e-3);
        assert_relative_eq!(p.dressed_frequency_ghz(), OMEGA_C_GHZ, max_relative = 1e-12);
        assert_relative_eq!(p.dressed_frequency_ghz(), 7.26, max_relative = 1e-3);
        assert_eq!(p.pump_rate_ghz, 0.0);
    }

    #[test]
    fn coupling_strengths_reproduce_the_table() {
        let d = CircuitDesign::table1();
        let c = coupling_strengths(&d, &table1_charging()).unwrap();
        assert_relative_eq!(c.g_1c_ghz, G_1C_GHZ, max_relative = 1e-12);
        assert_relative_eq!(c.g_1c_ghz, 23.7e-3, max_relative = 2e-3);
        assert_relative_eq!(c.g_12_ghz, G_12_GHZ, max_relative = 1e-12);
        assert_relative_eq!(c.g_12_ghz, 287e-6, max_relative = 1e-3);
        assert_eq!(c.g_1c_ghz, c.g_2c_ghz);
    }

    #[test]
    fn zero_coupling_capacitance_kills_the_couplings() {
        let mut d = CircuitDesign::table1();
        d.coupling_capacitance_12_ff = 0.0;
        d.coupling_capacitance_1c_ff = 0.0;
        d.coupling_capacitance_2c_ff = 0.0;
        d.validate().unwrap();
        let charging =
            charging_energies(&capacitance_matrix(&d), &PhysicalConstants::codata()).unwrap();
        let c = coupling_strengths(&d, &charging).unwrap();
        assert_abs_diff_eq!(c.g_1c_ghz, 0.0, epsilon = 1e-18);
        assert_abs_diff_eq!(c.g_2c_ghz, 0.0, epsilon = 1e-18);
        assert_abs_diff_eq!(c.g_12_ghz, 0.0, epsilon = 1e-18);
    }

    #[test]
    fn rotating_frame_params_reproduce_the_table() {
        let d = CircuitDesign::table1();
        let p = rotating_frame_params(&d, d.static_fluxes_rad()).unwrap();
        // Δ_j = ω_j − ω_p/2 cancels ~5.3 GHz down to ~277 kHz, so a 1-ulp
        // difference in ω_j between implementations is ~3e−12 *relative* on
        // Δ_j; the honest cross-implementation bound is absolute, a few ulps
        // of the frequency scale.
        assert_abs_diff_eq!(p.detuning(Subsystem::Kpo1), DELTA_1_GHZ, epsilon = 5e-15);
        assert_relative_eq!(p.detuning(Subsystem::Kpo1), 277e-6, max_relative = 2e-3);
        assert_relative_eq!(p.detuning(Subsystem::Coupler), DELTA_C_GHZ, max_relative = 1e-12);
        assert_relative_eq!(p.detuning(Subsystem::Coupler), 1.96, max_relative = 2e-3);
        assert_abs_diff_eq!(
            p.x_coefficient_ghz(Subsystem::Kpo1).unwrap(),
            X_COEF_GHZ,
            epsilon = 5e-15
        );
        assert_relative_eq!(
            p.x_coefficient_ghz(Subsystem::Kpo1).unwrap(),
            -10.7e-6,
            max_relative = 2e-3
        );
    }

    #[test]
    fn detuning_vanishes_when_pump_is_at_twice_the_dressed_frequency() {
        let mut d = CircuitDesign::table1();
        let p = rotating_frame_params(&d, d.static_fluxes_rad()).unwrap();
        d.pump_frequency_ghz = 2.0 * p.dressed_frequency_ghz[0];
        let p2 = rotating_frame_params(&d, d.static_fluxes_rad()).unwrap();
        assert_abs_diff_eq!(p2.detuning(Subsystem::Kpo1), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn identical_kpo_designs_give_identical_parameters() {
        let d = CircuitDesign::table1();
        let p = rotating_frame_params(&d, d.static_fluxes_rad()).unwrap();
        assert_eq!(p.detuning_ghz[0], p.detuning_ghz[1]);
        assert_eq!(p.kerr_ghz[0], p.kerr_ghz[1]);
        assert_eq!(p.pump_ghz[0], p.pump_ghz[1]);
        assert_eq!(p.g_1c_ghz, p.g_2c_ghz);
    }

    #[test]
    fn bias_inversion_round_trips_at_the_design_point() {
        let d = CircuitDesign::table1();
        let charging = table1_charging();
        let p = rotating_frame_params_with(&d, &charging, d.static_fluxes_rad()).unwrap();
        let flux = invert_bias_for_detuning(
            &d,
            &charging,
            Subsystem::Coupler,
            p.detuning(Subsystem::Coupler),
        )
        .unwrap();
        assert_relative_eq!(flux, d.coupler.static_bias_flux_rad(), max_relative = 1e-9);
    }

    #[test]
    fn bias_inversion_reaches_the_gate_peak_detuning() {
        // Pulling the coupler detuning down to 0.380 GHz requires a bias of
        // roughly 0.31 of a flux quantum.
        let d = CircuitDesign::table1();
        let charging = table1_charging();
        let flux =
            invert_bias_for_detuning(&d, &charging, Subsystem::Coupler, 0.380).unwrap();
        assert!((0.30..0.32).contains(&(flux / TAU)), "flux/2π = {}", flux / TAU);
        // Round trip through the full parameter chain to better than 1 Hz.
        let mut fluxes = d.static_fluxes_rad();
        fluxes[2] = flux;
        let p = rotating_frame_params_with(&d, &charging, fluxes).unwrap();
        assert_abs_diff_eq!(p.detuning(Subsystem::Coupler), 0.380, epsilon = 1e-9);
    }

    #[test]
    fn bias_inversion_round_trips_across_the_reachable_range() {
        let d = CircuitDesign::table1();
        let charging = table1_charging();
        for i in 0..40 {
            let target = 0.05 + 1.9 * (i as f64) / 39.0;
            let flux =
                invert_bias_for_detuning(&d, &charging, Subsystem::Coupler, target).unwrap();
            let mut fluxes = d.static_fluxes_rad();
            fluxes[2] = flux;
            let p = rotating_frame_params_with(&d, &charging, fluxes).unwrap();
            assert_abs_diff_eq!(p.detuning(Subsystem::Coupler), target, epsilon = 1e-9);
        }
    }

    #[test]
    fn unreachable_detuning_is_rejected() {
        let d = CircuitDesign::table1();
        let charging = table1_charging();
        // Below the zero-bias-energy end of the affine map.
        assert!(matches!(
            invert_bias_for_detuning(&d, &charging, Subsystem::Coupler, -2.0),
            Err(Error::UnreachableDetuning { .. })
        ));
        // Above the zero-flux end.
        assert!(matches!(
            invert_bias_for_detuning(&d, &charging, Subsystem::Coupler, 50.0),
            Err(Error::UnreachableDetuning { .. })
        ));
    }

    #[test]
    fn bare_frequency_is_monotone_in_the_bias_energy() {
        // The affine coefficient of the dressed frequency must be positive for
        // the design, which is what InversionScales::new asserts.
        let d = CircuitDesign::table1();
        let charging = table1_charging();
        for s in Subsystem::ALL {
            let scales = InversionScales::new(&d, &charging, s).unwrap();
            assert!(scales.slope > 0.0);
        }
    }

    #[test]
    fn validation_rejects_broken_designs() {
        let base = CircuitDesign::table1();

        let mut d = base;
        d.kpo1.shunt_capacitance_ff = -1.0;
        assert!(d.validate().is_err());

        let mut d = base;
        d.kpo2.pump_amplitude = 0.2;
        assert!(d.validate().is_err());

        let mut d = base;
        d.coupler.pump_amplitude = 0.01;
        assert!(d.validate().is_err());

        let mut d = base;
        d.kpo1.static_bias_flux_over_2pi = 0.6; // cos(0.6π) < 0
        assert!(d.validate().is_err());

        let mut d = base;
        d.coupling_capacitance_1c_ff = -0.5;
        assert!(d.validate().is_err());
    }
}
