//! Physical constants (SI, CODATA exact definitions).

/// The handful of SI constants the circuit quantization needs.
///
/// `electron_charge` and `planck_h` are the exact defined values; the derived
/// members are computed from them so the invariants
/// `reduced_planck = planck_h/2π` and
/// `reduced_flux_quantum = reduced_planck/(2·electron_charge)` hold to the
/// last bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Elementary charge e in coulombs.
    pub electron_charge: f64,
    /// Planck constant h in joule-seconds.
    pub planck_h: f64,
    /// ħ = h/2π in joule-seconds.
    pub reduced_planck: f64,
    /// Reduced flux quantum φ₀ = ħ/(2e) in webers.
    pub reduced_flux_quantum: f64,
}

impl PhysicalConstants {
    /// The 2019 SI exact values.
    pub const fn codata() -> Self {
        let electron_charge = 1.602_176_634e-19;
        let planck_h = 6.626_070_15e-34;
        let reduced_planck = planck_h / std::f64::consts::TAU;
        Self {
            electron_charge,
            planck_h,
            reduced_planck,
            reduced_flux_quantum: reduced_planck / (2.0 * electron_charge),
        }
    }

    /// `e²/(2h)`, scaled so that dividing by a capacitance in femtofarads
    /// yields a charging energy in GHz: `E^C [GHz] = charging_scale / C [fF]`.
    pub fn charging_scale_ghz_ff(&self) -> f64 {
        // e^2/(2 C h): with C in fF (1e-15 F) and the result in GHz (1e9 Hz),
        // the two prefixes combine into 1e6.
        self.electron_charge * self.electron_charge / (2.0 * self.planck_h) * 1e6
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::codata()
    }
}
