//! Flux-pulse synthesis and the two gate experiments: residual coupling at
//! the idle point, and the R_ZZ(−π/2) gate with average-fidelity scoring.
//!
//! The pulse lowers the coupler detuning along a half-sine so that the
//! beam-splitter rate acquires a shift −s(t), accumulating the entangling
//! phase Θ = ∫ 2π ζ_ZZ(t)/2 dt. In the crate's cyclic-frequency convention
//! the amplitude realizing Θ = −π/2 is s(t) = [π/(32 α₁α₂ t_g)]·sin(πt/t_g)
//! GHz, with the cat amplitudes frozen at their idle values.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::evolve::{
    diagonal_overlaps, propagate, HamiltonianProvider, Method, PropagationDiagnostics,
    PropagationSpec,
};
use crate::evolve::StaticHamiltonian;
use crate::fock::{coherent, FockSpace, SparseOp, StateVector};
use crate::model::{HamiltonianComponents, RealCsr, N_COMPONENTS};
use crate::constants::PhysicalConstants;
use crate::params::{
    capacitance_matrix, charging_energies, rotating_frame_params_with, ChargingEnergies,
    CircuitDesign, InversionScales, RotatingFrameParams, Subsystem, DETUNING_THRESHOLD_GHZ,
};
use crate::perturb::{cat_amplitudes, logical_basis, zeta_values, LogicalBasisMode};
use crate::{C64, TAU};

/// Smallest |u| accepted by [`extract_theta`]; below this the phase of a
/// diagonal amplitude is numerically meaningless.
const AMPLITUDE_FLOOR: f64 = 1e-12;

/// Absolute quadrature tolerance (rad) used by [`perturbative_theta`]; well
/// under the documented 1e−6 so the quadrature never dominates the budget.
const QUAD_ABS_TOL_RAD: f64 = 1e-9;

/// Times at which the Eq.-36 residual is sampled per gate report.
const EQ36_SAMPLES: usize = 1000;

/// Which bias fluxes the pulse moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleMode {
    /// Coupler and both KPO fluxes move; Δ_j(t) = g_jc²/Δ_c(t) is enforced
    /// algebraically at every interior time.
    BothTuned,
    /// Only the coupler flux moves; the KPO detunings stay at their idle
    /// values and the level-degeneracy condition is deliberately violated.
    CouplerOnly,
    /// No flux moves at all; useful as a do-nothing reference schedule.
    Static,
}

impl ScheduleMode {
    pub fn label(self) -> &'static str {
        match self {
            ScheduleMode::BothTuned => "both-tuned",
            ScheduleMode::CouplerOnly => "coupler-only",
            ScheduleMode::Static => "static",
        }
    }

    pub fn from_label(label: &str) -> Option<ScheduleMode> {
        match label {
            "both-tuned" => Some(ScheduleMode::BothTuned),
            "coupler-only" => Some(ScheduleMode::CouplerOnly),
            "static" => Some(ScheduleMode::Static),
            _ => None,
        }
    }
}

/// A synthesized flux schedule: analytic maps t ↦ bias fluxes built from the
/// closed-form detuning inversion, equal to the off-point fluxes bitwise at
/// and outside the pulse window.
#[derive(Debug, Clone)]
pub struct FluxSchedule {
    design: CircuitDesign,
    charging: ChargingEnergies,
    t_g_ns: f64,
    mode: ScheduleMode,
    theta_target_rad: f64,
    off_point_fluxes_rad: [f64; 3],
    /// Peak of s(t) in GHz; π/(32 α₁α₂ t_g) for Θ = −π/2.
    s_amplitude_ghz: f64,
    alpha_1: f64,
    alpha_2: f64,
    delta_c0_ghz: f64,
    /// g_1c·g_2c — flux-independent along the schedule.
    g_product_ghz: f64,
    /// g_1c g_2c/Δ_c(0); the pulse moves this to q₀ + s(t).
    q0_ghz: f64,
    /// g_jc² for the two KPO targets in both-tuned mode.
    g_sq_ghz: [f64; 2],
    scales: [InversionScales; 3],
}

impl FluxSchedule {
    pub fn t_g_ns(&self) -> f64 {
        self.t_g_ns
    }

    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    pub fn theta_target_rad(&self) -> f64 {
        self.theta_target_rad
    }

    pub fn s_amplitude_ghz(&self) -> f64 {
        self.s_amplitude_ghz
    }

    /// Cat amplitudes (α₁, α₂) frozen at t = 0, as used in the pulse
    /// amplitude.
    pub fn frozen_alphas(&self) -> (f64, f64) {
        (self.alpha_1, self.alpha_2)
    }

    pub fn off_point_fluxes_rad(&self) -> [f64; 3] {
        self.off_point_fluxes_rad
    }

    pub fn design(&self) -> &CircuitDesign {
        &self.design
    }

    /// The beam-splitter shift s(t) in GHz: exactly 0.0 outside the open
    /// pulse window (and everywhere for a static schedule), a half-sine
    /// inside.
    pub fn s_at(&self, t_ns: f64) -> f64 {
        if self.mode == ScheduleMode::Static || t_ns <= 0.0 || t_ns >= self.t_g_ns {
            return 0.0;
        }
        self.s_amplitude_ghz * (PI * t_ns / self.t_g_ns).sin()
    }

    /// Coupler detuning Δ_c(t) = g_1c g_2c/(q₀ + s(t)).
    pub fn coupler_detuning_ghz_at(&self, t_ns: f64) -> f64 {
        let s = self.s_at(t_ns);
        if s == 0.0 {
            return self.delta_c0_ghz;
        }
        self.g_product_ghz / (self.q0_ghz + s)
    }

    /// Bias fluxes (radians, ordered (1, 2, c)) at time t. Returns the
    /// off-point fluxes bitwise whenever s(t) = 0.
    pub fn fluxes_at(&self, t_ns: f64) -> [f64; 3] {
        let s = self.s_at(t_ns);
        if s == 0.0 {
            return self.off_point_fluxes_rad;
        }
        // The detuning targets are monotone in s, so they stay between the
        // endpoint and peak values validated at synthesis; the inversions
        // below cannot fail.
        let delta_c = self.g_product_ghz / (self.q0_ghz + s);
        let mut fluxes = self.off_point_fluxes_rad;
        fluxes[Subsystem::Coupler.index()] = self.scales[Subsystem::Coupler.index()]
            .flux_for_detuning(delta_c)
            .expect("pulse extremes validated at synthesis");
        if self.mode == ScheduleMode::BothTuned {
            for j in 0..2 {
                fluxes[j] = self.scales[j]
                    .flux_for_detuning(self.g_sq_ghz[j] / delta_c)
                    .expect("pulse extremes validated at synthesis");
            }
        }
        fluxes
    }

    /// Full rotating-frame coefficient set at time t along the schedule.
    pub fn params_at(&self, t_ns: f64) -> Result<RotatingFrameParams> {
        rotating_frame_params_with(&self.design, &self.charging, self.fluxes_at(t_ns))
    }

    /// A schedule that never leaves the off-point; `duration_ns` only scopes
    /// integrals taken along it.
    pub fn static_hold(design: &CircuitDesign, duration_ns: f64) -> Result<FluxSchedule> {
        if !(duration_ns >= 0.0) || !duration_ns.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "static schedule duration must be finite and non-negative, got {duration_ns}"
            )));
        }
        let charging = charging_energies(&capacitance_matrix(design), &PhysicalConstants::codata())?;
        let off = rotating_frame_params_with(design, &charging, design.static_fluxes_rad())?;
        let delta_c0 = off.checked_coupler_detuning()?;
        let g_product = off.g_1c_ghz * off.g_2c_ghz;
        let scales = [
            InversionScales::new(design, &charging, Subsystem::Kpo1)?,
            InversionScales::new(design, &charging, Subsystem::Kpo2)?,
            InversionScales::new(design, &charging, Subsystem::Coupler)?,
        ];
        Ok(FluxSchedule {
            design: *design,
            charging,
            t_g_ns: duration_ns,
            mode: ScheduleMode::Static,
            theta_target_rad: 0.0,
            off_point_fluxes_rad: design.static_fluxes_rad(),
            s_amplitude_ghz: 0.0,
            alpha_1: 0.0,
            alpha_2: 0.0,
            delta_c0_ghz: delta_c0,
            g_product_ghz: g_product,
            q0_ghz: g_product / delta_c0,
            g_sq_ghz: [off.g_1c_ghz * off.g_1c_ghz, off.g_2c_ghz * off.g_2c_ghz],
            scales,
        })
    }
}

/// Synthesize the half-sine schedule realizing R_ZZ(−π/2).
pub fn synthesize_pulse(
    design: &CircuitDesign,
    off_point: &RotatingFrameParams,
    t_g_ns: f64,
    mode: ScheduleMode,
) -> Result<FluxSchedule> {
    synthesize_pulse_with_theta(design, off_point, t_g_ns, mode, -FRAC_PI_2)
}

/// As [`synthesize_pulse`] with an arbitrary target angle: the s(t) amplitude
/// scales by Θ/(−π/2).
///
/// Θ < 0 lowers the coupler detuning (the Fig.-5 direction). Θ > 0 would have
/// to raise it, which crosses the pole of Δ_c(s) unless t_g is long and is
/// typically unreachable within the coupler's bias range.
pub fn synthesize_pulse_with_theta(
    design: &CircuitDesign,
    off_point: &RotatingFrameParams,
    t_g_ns: f64,
    mode: ScheduleMode,
    theta_target_rad: f64,
) -> Result<FluxSchedule> {
    if !(t_g_ns > 0.0) || !t_g_ns.is_finite() {
        return Err(Error::InvalidSpec(format!(
            "gate time must be positive and finite, got {t_g_ns} ns"
        )));
    }
    if !theta_target_rad.is_finite() {
        return Err(Error::InvalidSpec(format!(
            "target angle must be finite, got {theta_target_rad} rad"
        )));
    }
    if mode == ScheduleMode::Static {
        return Err(Error::InvalidSpec(
            "synthesize_pulse needs a pulsed mode; use FluxSchedule::static_hold for a \
             constant schedule"
                .into(),
        ));
    }
    let cats = cat_amplitudes(off_point)?;
    let alpha_product = cats.alpha_1 * cats.alpha_2;
    if !(alpha_product > 0.0) {
        return Err(Error::InvalidDesign(format!(
            "pulse amplitude diverges: cat amplitude product α₁·α₂ = {alpha_product:.3e}"
        )));
    }
    let delta_c0 = off_point.checked_coupler_detuning()?;
    let g_product = off_point.g_1c_ghz * off_point.g_2c_ghz;
    if g_product == 0.0 {
        return Err(Error::InvalidDesign(
            "coupler-mediated coupling g_1c·g_2c vanishes; the detuning pulse cannot shift \
             the beam-splitter rate"
                .into(),
        ));
    }
    // Θ = −16 α₁α₂ t_g · amp for the half-sine, so amp = −Θ/(16 α₁α₂ t_g);
    // this is the angular-units bracket π²/(16 α₁α₂ t_g) divided by 2π at
    // Θ = −π/2.
    let s_amplitude = -theta_target_rad / (16.0 * alpha_product * t_g_ns);
    let q0 = g_product / delta_c0;
    let delta_c_peak = g_product / (q0 + s_amplitude);
    if !delta_c_peak.is_finite()
        || delta_c_peak.abs() <= DETUNING_THRESHOLD_GHZ
        || delta_c_peak.signum() != delta_c0.signum()
    {
        return Err(Error::GateTimeTooShort {
            t_g_ns,
            delta_c_ghz: delta_c_peak,
        });
    }
    let charging = charging_energies(&capacitance_matrix(design), &PhysicalConstants::codata())?;
    let scales = [
        InversionScales::new(design, &charging, Subsystem::Kpo1)?,
        InversionScales::new(design, &charging, Subsystem::Kpo2)?,
        InversionScales::new(design, &charging, Subsystem::Coupler)?,
    ];
    let g_sq = [
        off_point.g_1c_ghz * off_point.g_1c_ghz,
        off_point.g_2c_ghz * off_point.g_2c_ghz,
    ];
    // All detuning targets are monotone in s, so validating the inversion at
    // the pulse peak (the endpoints are the design's own static fluxes)
    // guarantees it for every interior time.
    scales[Subsystem::Coupler.index()].flux_for_detuning(delta_c_peak)?;
    if mode == ScheduleMode::BothTuned {
        for j in 0..2 {
            scales[j].flux_for_detuning(g_sq[j] / delta_c_peak)?;
        }
    }
    Ok(FluxSchedule {
        design: *design,
        charging,
        t_g_ns,
        mode,
        theta_target_rad,
        off_point_fluxes_rad: design.static_fluxes_rad(),
        s_amplitude_ghz: s_amplitude,
        alpha_1: cats.alpha_1,
        alpha_2: cats.alpha_2,
        delta_c0_ghz: delta_c0,
        g_product_ghz: g_product,
        q0_ghz: q0,
        g_sq_ghz: g_sq,
        scales,
    })
}

/// [`HamiltonianProvider`] evaluating the rotating-frame Hamiltonian along a
/// flux schedule, using the precomputed component matrices so each instant
/// costs one 11-coefficient evaluation plus a sparse apply.
#[derive(Debug)]
pub struct ScheduleHamiltonian<'a> {
    schedule: &'a FluxSchedule,
    components: HamiltonianComponents,
}

impl<'a> ScheduleHamiltonian<'a> {
    pub fn new(schedule: &'a FluxSchedule, space: FockSpace) -> ScheduleHamiltonian<'a> {
        ScheduleHamiltonian {
            schedule,
            components: HamiltonianComponents::new(space),
        }
    }

    /// The 11-component coefficient vector at time t.
    pub fn coefficients_at(&self, t_ns: f64) -> Result<[f64; N_COMPONENTS]> {
        Ok(HamiltonianComponents::coefficients(
            &self.schedule.params_at(t_ns)?,
        ))
    }
}

impl HamiltonianProvider for ScheduleHamiltonian<'_> {
    fn space(&self) -> FockSpace {
        self.components.space()
    }

    fn apply(&self, t_ns: f64, x: &[C64], y: &mut [C64]) {
        let coeffs = self
            .coefficients_at(t_ns)
            .expect("schedule validated at synthesis");
        self.components.apply_into(&coeffs, x, y);
    }

    fn is_static(&self) -> bool {
        self.schedule.mode == ScheduleMode::Static
    }

    fn assemble(&self, t_ns: f64) -> SparseOp {
        let coeffs = self
            .coefficients_at(t_ns)
            .expect("schedule validated at synthesis");
        self.components.assemble(&coeffs).to_sparse_op()
    }
}

/// Assembled sparse Hamiltonian at one instant of a schedule.
pub fn hamiltonian_at(schedule: &FluxSchedule, t_ns: f64, space: FockSpace) -> Result<RealCsr> {
    let components = HamiltonianComponents::new(space);
    let coeffs = HamiltonianComponents::coefficients(&schedule.params_at(t_ns)?);
    Ok(components.assemble(&coeffs))
}

/// Diagonal of the ideal R_ZZ(Θ) on the logical quadruplet, ordered
/// (00, 01, 10, 11): diag(e^{−iΘ/2}, e^{iΘ/2}, e^{iΘ/2}, e^{−iΘ/2}).
pub fn rzz_target(theta_rad: f64) -> [C64; 4] {
    let outer = C64::from_polar(1.0, -0.5 * theta_rad);
    let inner = C64::from_polar(1.0, 0.5 * theta_rad);
    [outer, inner, inner, outer]
}

/// Average gate fidelity of a diagonal logical unitary against R_ZZ(Θ_target):
/// F̄ = [Tr(MM†) + |Tr M|²]/20 with M = R_ZZ(Θ_target)†·diag(u).
///
/// Callers are expected to supply physical amplitudes (|u| ≤ 1 up to
/// propagation rounding); for those the value lies in [0, 1]. The formula is
/// invariant under a global phase on u.
pub fn average_gate_fidelity(u_diag: &[C64; 4], theta_target_rad: f64) -> f64 {
    let reference = rzz_target(theta_target_rad);
    let mut trace_mmdag = 0.0;
    let mut trace_m = C64::new(0.0, 0.0);
    for (u, r) in u_diag.iter().zip(reference.iter()) {
        trace_mmdag += u.norm_sqr();
        trace_m += r.conj() * u;
    }
    (trace_mmdag + trace_m.norm_sqr()) / 20.0
}

/// Recover (Θ, θ) from the four diagonal amplitudes: Θ from the ZZ phase
/// pattern, wrapped to (−π, π], and the global phase θ = −(Σ arg u_lm)/4.
pub fn extract_theta(u_diag: &[C64; 4]) -> Result<(f64, f64)> {
    for u in u_diag {
        if u.norm() < AMPLITUDE_FLOOR {
            return Err(Error::ZeroAmplitude(u.norm()));
        }
    }
    let args = [
        u_diag[0].arg(),
        u_diag[1].arg(),
        u_diag[2].arg(),
        u_diag[3].arg(),
    ];
    let theta = wrap_to_pi(0.5 * (args[1] + args[2] - args[0] - args[3]));
    let global = -0.25 * (args[0] + args[1] + args[2] + args[3]);
    Ok((theta, global))
}

/// Wrap an angle to (−π, π].
fn wrap_to_pi(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Θ predicted by first-order perturbation theory along the schedule:
/// Θ = ∫ 2π ζ_ZZ(t)/2 dt, by adaptive quadrature to < 1e−6 rad absolute.
pub fn perturbative_theta(schedule: &FluxSchedule) -> Result<f64> {
    let integrand =
        |t: f64| -> Result<f64> { Ok(PI * zeta_values(&schedule.params_at(t)?)?.zeta_zz_ghz) };
    adaptive_simpson(&integrand, 0.0, schedule.t_g_ns(), QUAD_ABS_TOL_RAD)
}

const QUAD_MAX_DEPTH: usize = 40;

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Adaptive Simpson quadrature with the standard 1/15 Richardson error
/// estimate, splitting until the local estimate is below the local tolerance.
pub(crate) fn adaptive_simpson<F: Fn(f64) -> Result<f64>>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let m = 0.5 * (a + b);
    let fa = f(a)?;
    let fm = f(m)?;
    let fb = f(b)?;
    let whole = simpson(a, b, fa, fm, fb);
    simpson_recurse(f, a, b, fa, fm, fb, whole, tol, QUAD_MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse<F: Fn(f64) -> Result<f64>>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    let half = 0.5 * tol;
    Ok(simpson_recurse(f, a, m, fa, flm, fm, left, half, depth - 1)?
        + simpson_recurse(f, m, b, fm, frm, fb, right, half, depth - 1)?)
}

/// Diagonal logical amplitudes u_lm = ⟨ψ_lm|Ψ_lm(t_end)⟩ from propagating an
/// orthonormal logical basis along a schedule (the four runs in parallel).
pub fn logical_unitary_diagonal(
    schedule: &FluxSchedule,
    space: FockSpace,
    basis: &[StateVector],
    spec: &PropagationSpec,
) -> Result<(Vec<C64>, PropagationDiagnostics)> {
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate().take(i + 1) {
            let target = if i == j { 1.0 } else { 0.0 };
            let overlap = b.inner(a)?;
            if (overlap - C64::new(target, 0.0)).norm() > 1e-8 {
                return Err(Error::InvalidSpec(format!(
                    "logical basis is not orthonormal: |⟨{j}|{i}⟩ − δ| = {:.3e}",
                    (overlap - C64::new(target, 0.0)).norm()
                )));
            }
        }
    }
    let provider = ScheduleHamiltonian::new(schedule, space);
    diagonal_overlaps(&provider, basis, spec)
}

/// One gate experiment, summarized.
#[derive(Debug, Clone)]
pub struct GateReport {
    pub t_g_ns: f64,
    pub mode: ScheduleMode,
    pub theta_target_rad: f64,
    /// Diagonal amplitudes ordered (00, 01, 10, 11).
    pub u_diag: [C64; 4],
    /// F̄ against R_ZZ(Θ_target).
    pub avg_fidelity: f64,
    /// F̄ against R_ZZ(Θ_measured) — isolates amplitude/leakage loss from
    /// angle miscalibration.
    pub avg_fidelity_at_measured: f64,
    pub theta_measured_rad: f64,
    pub global_phase_rad: f64,
    /// Θ from first-order perturbation theory along the same schedule.
    pub theta_perturbative_rad: f64,
    /// max_t |Δ_j(t) − g_jc²/Δ_c(t)| over interior pulse times, in Hz. At the
    /// window edges the schedule sits on the published off-point, which meets
    /// the level-degeneracy condition only as well as the rounded design
    /// values do, so the edges are excluded.
    pub eq36_residual_hz_max: f64,
    /// Worst single-step norm drift / final norm error over the four runs.
    pub norm_drift: f64,
    /// Largest coherent-state truncation deficit among the basis factors.
    pub truncation_deficit: f64,
    pub diagnostics: PropagationDiagnostics,
}

impl GateReport {
    pub fn infidelity(&self) -> f64 {
        1.0 - self.avg_fidelity
    }
}

/// Synthesize the schedule for (t_g, mode), propagate the coherent-product
/// logical basis through it, and score against R_ZZ(−π/2).
///
/// `spec` contributes tolerances and method; the window is [0, t_g] and no
/// intermediate samples are recorded.
pub fn run_gate(
    design: &CircuitDesign,
    space: FockSpace,
    t_g_ns: f64,
    mode: ScheduleMode,
    spec: &PropagationSpec,
) -> Result<GateReport> {
    let charging = charging_energies(&capacitance_matrix(design), &PhysicalConstants::codata())?;
    let off = rotating_frame_params_with(design, &charging, design.static_fluxes_rad())?;
    let schedule = synthesize_pulse(design, &off, t_g_ns, mode)?;
    let theta_perturbative = perturbative_theta(&schedule)?;
    let eq36 = eq36_residual_hz_max(&schedule)?;
    let truncation_deficit = basis_truncation_deficit(&off, space)?;

    let basis = logical_basis(&off, space, LogicalBasisMode::Coherent)?;
    let run_spec = PropagationSpec {
        t_start_ns: 0.0,
        t_end_ns: t_g_ns,
        rel_tol: spec.rel_tol,
        abs_tol: spec.abs_tol,
        sample_times_ns: Vec::new(),
        method: spec.method.clone(),
    };
    let (u, diagnostics) = logical_unitary_diagonal(&schedule, space, &basis, &run_spec)?;
    let u_diag = [u[0], u[1], u[2], u[3]];
    let (theta_measured, global_phase) = extract_theta(&u_diag)?;
    Ok(GateReport {
        t_g_ns,
        mode,
        theta_target_rad: schedule.theta_target_rad(),
        u_diag,
        avg_fidelity: average_gate_fidelity(&u_diag, schedule.theta_target_rad()),
        avg_fidelity_at_measured: average_gate_fidelity(&u_diag, theta_measured),
        theta_measured_rad: theta_measured,
        global_phase_rad: global_phase,
        theta_perturbative_rad: theta_perturbative,
        eq36_residual_hz_max: eq36,
        norm_drift: diagnostics
            .max_step_norm_drift
            .max(diagnostics.max_final_norm_error),
        truncation_deficit,
        diagnostics,
    })
}

/// Max |Δ_j(t) − g_jc²/Δ_c(t)| in Hz over interior sample times (interval
/// midpoints, so the off-point edges are excluded — see [`GateReport`]).
fn eq36_residual_hz_max(schedule: &FluxSchedule) -> Result<f64> {
    let mut max_hz = 0.0f64;
    for k in 0..EQ36_SAMPLES {
        let t = (k as f64 + 0.5) / EQ36_SAMPLES as f64 * schedule.t_g_ns();
        let params = schedule.params_at(t)?;
        let delta_c = params.detuning(Subsystem::Coupler);
        for j in Subsystem::KPOS {
            let g = params.coupling_to_coupler(j);
            let residual = (params.detuning(j) - g * g / delta_c).abs() * 1e9;
            max_hz = max_hz.max(residual);
        }
    }
    Ok(max_hz)
}

/// Largest coherent truncation deficit over the four logical products.
fn basis_truncation_deficit(params: &RotatingFrameParams, space: FockSpace) -> Result<f64> {
    let cats = cat_amplitudes(params)?;
    let mut worst = 0.0f64;
    for l in 0..2 {
        for m in 0..2 {
            let (d1, d2, dc) = cats.displacements(l, m);
            for (s, d) in Subsystem::ALL.iter().zip([d1, d2, dc]) {
                let state = coherent(space.dim(*s), C64::new(d, 0.0))?;
                worst = worst.max(state.truncation_deficit);
            }
        }
    }
    Ok(worst)
}

/// Run [`run_gate`] for each gate time; points fan out across the rayon
/// worker pool.
pub fn gate_sweep(
    design: &CircuitDesign,
    space: FockSpace,
    t_gs_ns: &[f64],
    mode: ScheduleMode,
    spec: &PropagationSpec,
) -> Result<Vec<GateReport>> {
    use rayon::prelude::*;
    t_gs_ns
        .par_iter()
        .map(|&t_g| run_gate(design, space, t_g, mode, spec))
        .collect()
}

/// CSV dump of a gate sweep:
/// `t_g_ns,mode,infidelity,theta_rad,eq36_residual_hz_max,norm_drift`.
pub fn gate_sweep_csv(reports: &[GateReport]) -> String {
    let mut out = String::from("t_g_ns,mode,infidelity,theta_rad,eq36_residual_hz_max,norm_drift\n");
    for r in reports {
        out.push_str(&format!(
            "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.t_g_ns,
            r.mode.label(),
            r.infidelity(),
            r.theta_measured_rad,
            r.eq36_residual_hz_max,
            r.norm_drift
        ));
    }
    out
}

/// Sampled infidelity of the idle (static-Hamiltonian) hold, starting from
/// the equal superposition of the four logical basis states.
#[derive(Debug, Clone)]
pub struct ResidualSeries {
    pub times_ns: Vec<f64>,
    pub infidelities: Vec<f64>,
    pub max_infidelity: f64,
}

impl ResidualSeries {
    /// CSV dump: `t_ns,infidelity`.
    pub fn dump_csv(&self) -> String {
        let mut out = String::from("t_ns,infidelity\n");
        for (t, f) in self.times_ns.iter().zip(&self.infidelities) {
            out.push_str(&format!("{t:.16e},{f:.16e}\n"));
        }
        out
    }
}

/// Durations above this use the static-exponential propagator instead of
/// step integration; the 100 µs idle run is then a dense-space rotation.
const EXPONENTIAL_CUTOVER_NS: f64 = 1000.0;

/// The residual-coupling experiment: hold the design at its static fluxes,
/// start from Ψ(0) = (|ψ₀₀⟩+|ψ₀₁⟩+|ψ₁₀⟩+|ψ₁₁⟩)/2, and sample
/// 1 − |⟨Ψ(0)|Ψ(t)⟩|² at `n_samples` evenly spaced times.
pub fn residual_infidelity(
    design: &CircuitDesign,
    space: FockSpace,
    duration_ns: f64,
    n_samples: usize,
    basis_mode: LogicalBasisMode,
) -> Result<ResidualSeries> {
    residual_infidelity_with_tolerances(
        design,
        space,
        duration_ns,
        n_samples,
        basis_mode,
        PropagationSpec::DEFAULT_REL_TOL,
        PropagationSpec::DEFAULT_ABS_TOL,
    )
}

/// As [`residual_infidelity`], with explicit integrator tolerances (they only
/// bind on the step-integration path; the exponential path is exact up to the
/// eigensolve).
pub fn residual_infidelity_with_tolerances(
    design: &CircuitDesign,
    space: FockSpace,
    duration_ns: f64,
    n_samples: usize,
    basis_mode: LogicalBasisMode,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<ResidualSeries> {
    if !(duration_ns > 0.0) || !duration_ns.is_finite() {
        return Err(Error::InvalidSpec(format!(
            "residual experiment duration must be positive and finite, got {duration_ns} ns"
        )));
    }
    if n_samples < 2 {
        return Err(Error::InvalidSpec(format!(
            "residual experiment needs at least 2 samples, got {n_samples}"
        )));
    }
    let charging = charging_energies(&capacitance_matrix(design), &PhysicalConstants::codata())?;
    let params = rotating_frame_params_with(design, &charging, design.static_fluxes_rad())?;
    let basis = logical_basis(&params, space, basis_mode)?;
    let mut psi0 = StateVector::zero(space);
    for b in &basis {
        psi0.add_scaled(C64::new(0.5, 0.0), b)?;
    }
    let matrix = HamiltonianComponents::new(space).assemble_params(&params);
    let provider = StaticHamiltonian::new(matrix);
    let method = if duration_ns > EXPONENTIAL_CUTOVER_NS {
        Method::StaticExponential
    } else {
        Method::AdaptiveEmbeddedRk
    };
    let spec = PropagationSpec::adaptive(0.0, duration_ns)
        .with_tolerances(rel_tol, abs_tol)
        .with_method(method)
        .with_linspace_samples(n_samples);
    let trajectory = propagate(&provider, &psi0, &spec)?;
    // Normalizing by ‖Ψ(0)‖⁴ makes the t = 0 sample exactly zero: the overlap
    // of the recorded initial state with itself is bitwise ‖Ψ(0)‖².
    let norm_sq = psi0.norm_sqr();
    let denom = norm_sq * norm_sq;
    let mut infidelities = Vec::with_capacity(trajectory.states.len());
    let mut max_infidelity = 0.0f64;
    for state in &trajectory.states {
        let infid = 1.0 - psi0.inner(state)?.norm_sqr() / denom;
        max_infidelity = max_infidelity.max(infid);
        infidelities.push(infid);
    }
    Ok(ResidualSeries {
        times_ns: trajectory.sample_times_ns,
        infidelities,
        max_infidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::rotating_frame_params;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    // Frozen from an independent arbitrary-precision evaluation of the
    // closed-form pulse algebra at the published design, t_g = 20 ns.
    const S_AMP_20NS_GHZ: f64 = 0.0011896159645604421;
    const DELTA_C_MID_GHZ: f64 = 0.38167499005145855;
    const DELTA_1_MID_GHZ: f64 = 1.4768352258100022e-3;

    fn table1_off() -> (CircuitDesign, RotatingFrameParams) {
        let design = CircuitDesign::table1();
        let off = rotating_frame_params(&design, design.static_fluxes_rad()).unwrap();
        (design, off)
    }

    fn small_space() -> FockSpace {
        FockSpace::new(10, 10, 4).unwrap()
    }

    #[test]
    fn rzz_target_matches_the_published_matrix() {
        for u in rzz_target(0.0) {
            assert_eq!(u, C64::new(1.0, 0.0));
        }
        let gate = rzz_target(-FRAC_PI_2);
        let expected = [
            C64::from_polar(1.0, PI / 4.0),
            C64::from_polar(1.0, -PI / 4.0),
            C64::from_polar(1.0, -PI / 4.0),
            C64::from_polar(1.0, PI / 4.0),
        ];
        for (g, e) in gate.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(g.re, e.re, epsilon = 1e-15);
            assert_abs_diff_eq!(g.im, e.im, epsilon = 1e-15);
        }
        for u in rzz_target(TAU) {
            assert_abs_diff_eq!(u.re, -1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(u.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn fidelity_formula_reproduces_hand_values() {
        // M = I.
        let ideal = rzz_target(-FRAC_PI_2);
        assert_abs_diff_eq!(
            average_gate_fidelity(&ideal, -FRAC_PI_2),
            1.0,
            epsilon = 1e-15
        );
        // u = (1,1,1,1) against Θ = −π/2: [4 + |4cos(π/4)|²]/20 = 12/20.
        let ones = [C64::new(1.0, 0.0); 4];
        assert_abs_diff_eq!(average_gate_fidelity(&ones, -FRAC_PI_2), 0.6, epsilon = 1e-15);
        // Global-phase invariance.
        let u = [
            C64::from_polar(0.999, 0.81),
            C64::from_polar(0.997, -0.74),
            C64::from_polar(0.998, -0.77),
            C64::from_polar(0.996, 0.78),
        ];
        let rotated = u.map(|v| v * C64::from_polar(1.0, 0.7));
        assert_abs_diff_eq!(
            average_gate_fidelity(&u, -FRAC_PI_2),
            average_gate_fidelity(&rotated, -FRAC_PI_2),
            epsilon = 1e-15
        );
    }

    #[test]
    fn theta_extraction_inverts_the_phase_pattern() {
        let (theta, global) = extract_theta(&rzz_target(-FRAC_PI_2)).unwrap();
        assert_abs_diff_eq!(theta, -FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(global, 0.0, epsilon = 1e-15);

        let rotated = rzz_target(-FRAC_PI_2).map(|v| v * C64::from_polar(1.0, 0.3));
        let (theta, global) = extract_theta(&rotated).unwrap();
        assert_abs_diff_eq!(theta, -FRAC_PI_2, epsilon = 1e-14);
        assert_abs_diff_eq!(global, -0.3, epsilon = 1e-14);

        let (theta, global) = extract_theta(&[C64::new(1.0, 0.0); 4]).unwrap();
        assert_eq!(theta, 0.0);
        assert_eq!(global, -0.0);

        // Θ beyond π wraps into (−π, π]: rzz_target(5) has half-angle 2.5,
        // so the pattern reads as 5 − 2π.
        let (theta, _) = extract_theta(&rzz_target(5.0)).unwrap();
        assert_abs_diff_eq!(theta, 5.0 - TAU, epsilon = 1e-14);

        let mut broken = rzz_target(-FRAC_PI_2);
        broken[2] = C64::new(0.0, 0.0);
        assert!(matches!(
            extract_theta(&broken),
            Err(Error::ZeroAmplitude(_))
        ));
    }

    #[test]
    fn synthesized_schedule_matches_the_published_midpulse_detunings() {
        let (design, off) = table1_off();
        let schedule = synthesize_pulse(&design, &off, 20.0, ScheduleMode::BothTuned).unwrap();

        // Amplitude: π/(32 α₁α₂ t_g) with the frozen idle cat amplitudes.
        let cats = cat_amplitudes(&off).unwrap();
        let expected_amp = PI / (32.0 * cats.alpha_1 * cats.alpha_2 * 20.0);
        assert_relative_eq!(schedule.s_amplitude_ghz(), expected_amp, max_relative = 1e-12);
        assert_relative_eq!(schedule.s_amplitude_ghz(), S_AMP_20NS_GHZ, max_relative = 1e-12);

        // Closed-form midpulse coupler detuning, against the frozen value and
        // the published ≈ 0.380 GHz dip.
        assert_relative_eq!(
            schedule.coupler_detuning_ghz_at(10.0),
            DELTA_C_MID_GHZ,
            max_relative = 1e-12
        );
        assert_abs_diff_eq!(schedule.coupler_detuning_ghz_at(10.0), 0.380, epsilon = 2e-3);

        // The realized parameters round-trip through flux inversion and back.
        let mid = schedule.params_at(10.0).unwrap();
        assert_relative_eq!(
            mid.detuning(Subsystem::Coupler),
            DELTA_C_MID_GHZ,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            mid.detuning(Subsystem::Kpo1),
            DELTA_1_MID_GHZ,
            max_relative = 1e-9
        );
        // Published midpulse KPO detuning ≈ 1.48 MHz.
        assert_abs_diff_eq!(mid.detuning(Subsystem::Kpo1), 1.48e-3, epsilon = 5e-6);
        // Both-tuned: the level-degeneracy condition holds to rounding at
        // interior times.
        let g = mid.coupling_to_coupler(Subsystem::Kpo1);
        assert_abs_diff_eq!(
            mid.detuning(Subsystem::Kpo1),
            g * g / mid.detuning(Subsystem::Coupler),
            epsilon = 1e-12
        );
    }

    #[test]
    fn schedule_endpoints_reproduce_the_off_point_bitwise() {
        let (design, off) = table1_off();
        let statics = design.static_fluxes_rad();
        for mode in [ScheduleMode::BothTuned, ScheduleMode::CouplerOnly] {
            let schedule = synthesize_pulse(&design, &off, 20.0, mode).unwrap();
            assert_eq!(schedule.fluxes_at(0.0), statics);
            assert_eq!(schedule.fluxes_at(20.0), statics);
            assert_eq!(schedule.fluxes_at(-3.0), statics);
            assert_eq!(schedule.fluxes_at(25.0), statics);
            assert_ne!(schedule.fluxes_at(10.0), statics);

            // The Hamiltonian coefficient set at the endpoints is bitwise the
            // static one.
            let space = FockSpace::new(4, 4, 2).unwrap();
            let provider = ScheduleHamiltonian::new(&schedule, space);
            let static_coeffs = HamiltonianComponents::coefficients(&off);
            assert_eq!(provider.coefficients_at(0.0).unwrap(), static_coeffs);
            assert_eq!(provider.coefficients_at(20.0).unwrap(), static_coeffs);
            assert_eq!(
                provider.coefficients_at(0.0).unwrap(),
                provider.coefficients_at(20.0).unwrap()
            );
            let h0 = hamiltonian_at(&schedule, 0.0, space).unwrap();
            let h_static = HamiltonianComponents::new(space).assemble_params(&off);
            assert_eq!(h0.triplets(), h_static.triplets());
        }
    }

    #[test]
    fn coupler_only_mode_leaves_the_kpo_fluxes_untouched() {
        let (design, off) = table1_off();
        let statics = design.static_fluxes_rad();
        let coupler_only =
            synthesize_pulse(&design, &off, 20.0, ScheduleMode::CouplerOnly).unwrap();
        let both = synthesize_pulse(&design, &off, 20.0, ScheduleMode::BothTuned).unwrap();
        for &t in &[1.0, 5.0, 10.0, 19.5] {
            let fluxes = coupler_only.fluxes_at(t);
            assert_eq!(fluxes[0], statics[0]);
            assert_eq!(fluxes[1], statics[1]);
            assert_ne!(fluxes[2], statics[2]);
            let tuned = both.fluxes_at(t);
            assert_ne!(tuned[0], statics[0]);
            assert_ne!(tuned[1], statics[1]);
            // Both modes drive the identical coupler trajectory.
            assert_eq!(tuned[2], fluxes[2]);
        }
    }

    #[test]
    fn pulse_synthesis_rejects_degenerate_requests() {
        let (design, off) = table1_off();
        assert!(matches!(
            synthesize_pulse(&design, &off, 0.0, ScheduleMode::BothTuned),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            synthesize_pulse(&design, &off, -5.0, ScheduleMode::BothTuned),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            synthesize_pulse(&design, &off, 20.0, ScheduleMode::Static),
            Err(Error::InvalidSpec(_))
        ));
        // Short enough that Δ_c(t_g/2) would cross the small-detuning
        // threshold.
        assert!(matches!(
            synthesize_pulse(&design, &off, 1e-5, ScheduleMode::BothTuned),
            Err(Error::GateTimeTooShort { .. })
        ));
        // Short enough that the KPO detuning targets g²/Δ_c(t_g/2) leave the
        // reachable band, while the coupler trajectory alone stays legal.
        assert!(matches!(
            synthesize_pulse(&design, &off, 1e-3, ScheduleMode::BothTuned),
            Err(Error::UnreachableDetuning { .. })
        ));
        assert!(synthesize_pulse(&design, &off, 1e-3, ScheduleMode::CouplerOnly).is_ok());
        // Positive Θ would push Δ_c through its pole at this gate time.
        assert!(matches!(
            synthesize_pulse_with_theta(&design, &off, 20.0, ScheduleMode::BothTuned, FRAC_PI_2),
            Err(Error::GateTimeTooShort { .. })
        ));
    }

    #[test]
    fn quadrature_helper_is_accurate() {
        // ∫₀^π sin = 2, adaptive to 1e−9.
        let two = adaptive_simpson(&|t: f64| Ok(t.sin()), 0.0, PI, 1e-9).unwrap();
        assert_abs_diff_eq!(two, 2.0, epsilon = 1e-9);
        // Simpson is exact on cubics.
        let quarter = adaptive_simpson(&|t: f64| Ok(t * t * t), 0.0, 1.0, 1e-9).unwrap();
        assert_abs_diff_eq!(quarter, 0.25, epsilon = 1e-14);
        assert_eq!(adaptive_simpson(&|_| Ok(1.0), 2.0, 2.0, 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn perturbative_theta_reproduces_the_closed_form() {
        let (design, off) = table1_off();
        let schedule = synthesize_pulse(&design, &off, 20.0, ScheduleMode::BothTuned).unwrap();

        // Beam-splitter term alone: Θ_bs = −8π α₁α₂ ∫s dt = −π/2 exactly for
        // the half-sine. Quadrature of s_at against the analytic value.
        let (a1, a2) = schedule.frozen_alphas();
        let theta_bs = adaptive_simpson(
            &|t: f64| Ok(-8.0 * PI * a1 * a2 * schedule.s_at(t)),
            0.0,
            20.0,
            1e-9,
        )
        .unwrap();
        assert_abs_diff_eq!(theta_bs, -FRAC_PI_2, epsilon = 1e-6);
        // The same identity, algebraically: ∫s dt = amp·2t_g/π.
        assert_relative_eq!(
            -16.0 * a1 * a2 * schedule.s_amplitude_ghz() * 20.0,
            -FRAC_PI_2,
            max_relative = 1e-12
        );

        // The full ζ_ZZ integral picks up the K_c(α_c⁺(t))⁴ correction and
        // the drift of the cat amplitudes: a small deviation from −π/2.
        let theta = perturbative_theta(&schedule).unwrap();
        assert_abs_diff_eq!(theta, -FRAC_PI_2, epsilon = 5e-3);
        assert!((theta + FRAC_PI_2).abs() > 1e-8);

        // Scaled-amplitude schedule: Θ_target = −π/4.
        let quarter = synthesize_pulse_with_theta(
            &design,
            &off,
            20.0,
            ScheduleMode::BothTuned,
            -FRAC_PI_2 / 2.0,
        )
        .unwrap();
        let theta_quarter = perturbative_theta(&quarter).unwrap();
        assert_abs_diff_eq!(theta_quarter, -FRAC_PI_2 / 2.0, epsilon = 3e-3);

        // A static hold at the engineered null accumulates next to nothing.
        let hold = FluxSchedule::static_hold(&design, 100.0).unwrap();
        let theta_hold = perturbative_theta(&hold).unwrap();
        assert!(theta_hold.abs() < TAU * 1e-9 * 100.0);
    }

    #[test]
    fn residual_series_starts_at_exactly_zero_and_stays_small() {
        let design = CircuitDesign::table1();
        let series = residual_infidelity(
            &design,
            small_space(),
            40.0,
            41,
            LogicalBasisMode::Coherent,
        )
        .unwrap();
        assert_eq!(series.times_ns.len(), 41);
        assert_eq!(series.infidelities.len(), 41);
        assert_eq!(series.infidelities[0], 0.0);
        assert_eq!(series.times_ns[0], 0.0);
        assert_abs_diff_eq!(series.times_ns[40], 40.0, epsilon = 1e-12);
        // At this small space the floor is coherent-state truncation
        // (measured ≈ 5.8e−2), far above the design's intrinsic residual;
        // enlarging the KPO dimensions drops it by orders of magnitude.
        assert!(series.max_infidelity < 0.1);
        assert!(series.max_infidelity > 1e-4);
        let larger = residual_infidelity(
            &design,
            FockSpace::new(14, 14, 4).unwrap(),
            40.0,
            41,
            LogicalBasisMode::Coherent,
        )
        .unwrap();
        assert!(larger.max_infidelity < 2e-3);
        assert!(larger.max_infidelity < series.max_infidelity / 10.0);
        assert_eq!(
            series.max_infidelity,
            series
                .infidelities
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max)
        );

        let csv = series.dump_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t_ns,infidelity"));
        assert_eq!(csv.lines().count(), 42);
        let row: Vec<f64> = csv
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .map(|v| v.parse().unwrap())
            .collect();
        assert_eq!(row[0], 0.0);
        assert_eq!(row[1], 0.0);

        assert!(matches!(
            residual_infidelity(&design, small_space(), 0.0, 5, LogicalBasisMode::Coherent),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            residual_infidelity(&design, small_space(), 10.0, 1, LogicalBasisMode::Coherent),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn long_residual_holds_switch_to_the_exponential_path_and_stay_bounded() {
        let design = CircuitDesign::table1();
        let space = FockSpace::new(12, 12, 4).unwrap();
        // 100 µs hold: far beyond the step-integration cutover; bounded
        // oscillation, no secular growth.
        let series = residual_infidelity(
            &design,
            space,
            100_000.0,
            81,
            LogicalBasisMode::Coherent,
        )
        .unwrap();
        assert_eq!(series.infidelities[0], 0.0);
        assert!(series.max_infidelity < 0.05);
        let first_half = series.infidelities[..41]
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        let second_half = series.infidelities[41..]
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        assert!(second_half < 3.0 * first_half.max(1e-6));
    }

    #[test]
    fn exponential_and_adaptive_residuals_agree_on_a_short_hold() {
        let design = CircuitDesign::table1();
        let space = FockSpace::new(8, 8, 3).unwrap();
        let adaptive =
            residual_infidelity(&design, space, 900.0, 7, LogicalBasisMode::Coherent).unwrap();
        let exponential =
            residual_infidelity(&design, space, 1100.0, 7, LogicalBasisMode::Coherent).unwrap();
        // Same design, same basis; compare at the overlapping sample grid by
        // rerunning the exponential path over the short window directly.
        let charging =
            charging_energies(&capacitance_matrix(&design), &PhysicalConstants::codata()).unwrap();
        let params =
            rotating_frame_params_with(&design, &charging, design.static_fluxes_rad()).unwrap();
        let basis = logical_basis(&params, space, LogicalBasisMode::Coherent).unwrap();
        let mut psi0 = StateVector::zero(space);
        for b in &basis {
            psi0.add_scaled(C64::new(0.5, 0.0), b).unwrap();
        }
        let matrix = HamiltonianComponents::new(space).assemble_params(&params);
        let provider = StaticHamiltonian::new(matrix);
        let spec = PropagationSpec::adaptive(0.0, 900.0)
            .with_method(Method::StaticExponential)
            .with_linspace_samples(7);
        let trajectory = propagate(&provider, &psi0, &spec).unwrap();
        let denom = psi0.norm_sqr() * psi0.norm_sqr();
        for (k, state) in trajectory.states.iter().enumerate() {
            let infid = 1.0 - psi0.inner(state).unwrap().norm_sqr() / denom;
            assert_abs_diff_eq!(infid, adaptive.infidelities[k], epsilon = 1e-8);
        }
        // The exponential run over the longer window exists and is sane.
        assert!(exponential.max_infidelity < 1.0);
    }

    #[test]
    fn small_space_gate_report_is_internally_consistent() {
        let design = CircuitDesign::table1();
        let spec = PropagationSpec::adaptive(0.0, 20.0);
        let report = run_gate(
            &design,
            small_space(),
            20.0,
            ScheduleMode::BothTuned,
            &spec,
        )
        .unwrap();
        for u in report.u_diag {
            assert!(u.norm() <= 1.0 + 1e-9);
            assert!(u.norm() > 0.5);
        }
        assert!(report.avg_fidelity > 0.0 && report.avg_fidelity <= 1.0);
        assert!(report.avg_fidelity_at_measured >= report.avg_fidelity - 1e-12);
        // The schedule enforces the level-degeneracy condition algebraically.
        assert!(report.eq36_residual_hz_max < 1.0);
        assert_abs_diff_eq!(report.theta_measured_rad, -FRAC_PI_2, epsilon = 0.2);
        assert_abs_diff_eq!(
            report.theta_measured_rad,
            report.theta_perturbative_rad,
            epsilon = 0.1
        );
        assert!(report.norm_drift < 1e-9);
        // Truncation deficit at (10,10,4) is set by the α ≈ 2.03 KPO factors.
        assert!(report.truncation_deficit > 1e-6 && report.truncation_deficit < 0.1);
        assert!(report.diagnostics.steps_accepted > 100);
        assert_eq!(report.theta_target_rad, -FRAC_PI_2);
        assert_eq!(report.mode, ScheduleMode::BothTuned);
        assert_abs_diff_eq!(
            report.infidelity(),
            1.0 - report.avg_fidelity,
            epsilon = 1e-15
        );
    }

    #[test]
    fn coupler_only_gate_reports_the_broken_degeneracy_condition() {
        let design = CircuitDesign::table1();
        let spec = PropagationSpec::adaptive(0.0, 20.0);
        let report = run_gate(
            &design,
            small_space(),
            20.0,
            ScheduleMode::CouplerOnly,
            &spec,
        )
        .unwrap();
        // Δ_j stays at its idle value while g²/Δ_c(t) swings to ~1.48 MHz:
        // the Eq.-36 residual is macroscopic in this mode.
        assert!(report.eq36_residual_hz_max > 1e5);
        assert!(report.avg_fidelity > 0.0 && report.avg_fidelity <= 1.0);
        assert_abs_diff_eq!(report.theta_measured_rad, -FRAC_PI_2, epsilon = 0.3);
    }

    #[test]
    fn logical_unitary_diagonal_guards_its_basis() {
        let design = CircuitDesign::table1();
        let space = small_space();
        let charging =
            charging_energies(&capacitance_matrix(&design), &PhysicalConstants::codata()).unwrap();
        let params =
            rotating_frame_params_with(&design, &charging, design.static_fluxes_rad()).unwrap();
        let basis = logical_basis(&params, space, LogicalBasisMode::Coherent).unwrap();

        // Zero-duration hold: every diagonal amplitude is 1 up to rounding.
        let hold = FluxSchedule::static_hold(&design, 0.0).unwrap();
        let spec = PropagationSpec::adaptive(0.0, 0.0);
        let (u, _) = logical_unitary_diagonal(&hold, space, &basis, &spec).unwrap();
        for v in &u {
            assert!((v - C64::new(1.0, 0.0)).norm() < 1e-12);
        }

        // A non-orthonormal basis is rejected.
        let degenerate = vec![basis[0].clone(), basis[0].clone()];
        assert!(matches!(
            logical_unitary_diagonal(&hold, space, &degenerate, &spec),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn gate_sweep_csv_has_the_documented_layout() {
        let report = GateReport {
            t_g_ns: 20.0,
            mode: ScheduleMode::BothTuned,
            theta_target_rad: -FRAC_PI_2,
            u_diag: [C64::new(1.0, 0.0); 4],
            avg_fidelity: 0.999,
            avg_fidelity_at_measured: 0.9995,
            theta_measured_rad: -1.57,
            global_phase_rad: 0.1,
            theta_perturbative_rad: -1.5625,
            eq36_residual_hz_max: 0.25,
            norm_drift: 1e-13,
            truncation_deficit: 1e-9,
            diagnostics: PropagationDiagnostics::default(),
        };
        let csv = gate_sweep_csv(&[report]);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("t_g_ns,mode,infidelity,theta_rad,eq36_residual_hz_max,norm_drift")
        );
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 6);
        assert_eq!(row[1], "both-tuned");
        assert_eq!(row[0].parse::<f64>().unwrap(), 20.0);
        assert_abs_diff_eq!(row[2].parse::<f64>().unwrap(), 1.0 - 0.999, epsilon = 1e-15);
        assert_eq!(row[4].parse::<f64>().unwrap(), 0.25);
        assert!(lines.next().is_none());
    }

    #[test]
    fn schedule_mode_labels_round_trip() {
        for mode in [
            ScheduleMode::BothTuned,
            ScheduleMode::CouplerOnly,
            ScheduleMode::Static,
        ] {
            assert_eq!(ScheduleMode::from_label(mode.label()), Some(mode));
        }
        assert_eq!(ScheduleMode::from_label("half-tuned"), None);
    }
}
