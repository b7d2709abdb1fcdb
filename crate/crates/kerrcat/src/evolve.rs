//! Time-domain propagation of the rotating-frame Schrödinger equation
//!
//! ```text
//! dψ/dt = −i·2π·H(t)·ψ        (H in GHz, t in ns)
//! ```
//!
//! — the single place where the angular 2π of the unit policy lives.
//!
//! Three methods:
//!
//! * **Adaptive embedded RK** — Dormand-Prince 5(4) with FSAL and a standard
//!   PI-free step controller. The workhorse for time-dependent schedules.
//! * **Fixed-step RK4** — classic fourth-order, used as an independent
//!   cross-check of the adaptive path.
//! * **Static exponential** — exact `ψ(t) = e^{−i2πHt}ψ₀` through a dense
//!   eigendecomposition; only valid when the provider declares H constant,
//!   and the right tool for very long runs under a static Hamiltonian.
//!
//! Norm handling: Runge-Kutta methods are not exactly unitary, so each
//! accepted step is rescaled to the *initial* norm. Rescaling to the initial
//! norm (not to 1) keeps propagation exactly linear under scalar rescaling of
//! the input, which the linearity and superposition tests rely on; the
//! pre-rescale drift per step is tracked and reported.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{FockSpace, SparseOp, StateVector};
use crate::model::RealCsr;
use crate::{C64, TAU};

/// Integration method selector.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// Dormand-Prince 5(4), adaptive step.
    AdaptiveEmbeddedRk,
    /// Classic RK4 with a fixed step (ns).
    FixedStepRk4 { dt_ns: f64 },
    /// Dense eigendecomposition exponential; requires a static provider.
    StaticExponential,
}

/// What to integrate, over which window, how accurately, and where to sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationSpec {
    pub t_start_ns: f64,
    pub t_end_ns: f64,
    /// Relative local-error tolerance (per step, embedded estimate).
    pub rel_tol: f64,
    /// Absolute local-error tolerance.
    pub abs_tol: f64,
    /// Times (ns) at which the trajectory is recorded; must lie within the
    /// window. Sorted internally.
    pub sample_times_ns: Vec<f64>,
    pub method: Method,
}

impl PropagationSpec {
    pub const DEFAULT_REL_TOL: f64 = 1e-12;
    pub const DEFAULT_ABS_TOL: f64 = 1e-14;

    /// Adaptive propagation over [t_start, t_end] at default tolerances,
    /// no intermediate samples.
    pub fn adaptive(t_start_ns: f64, t_end_ns: f64) -> Self {
        PropagationSpec {
            t_start_ns,
            t_end_ns,
            rel_tol: Self::DEFAULT_REL_TOL,
            abs_tol: Self::DEFAULT_ABS_TOL,
            sample_times_ns: Vec::new(),
            method: Method::AdaptiveEmbeddedRk,
        }
    }

    pub fn with_samples(mut self, samples: Vec<f64>) -> Self {
        self.sample_times_ns = samples;
        self
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    /// n equally spaced samples covering [t_start, t_end] inclusive.
    pub fn with_linspace_samples(self, n: usize) -> Self {
        let (a, b) = (self.t_start_ns, self.t_end_ns);
        let samples = if n <= 1 {
            vec![b]
        } else {
            (0..n)
                .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                .collect()
        };
        self.with_samples(samples)
    }

    fn validate(&self) -> Result<()> {
        if !self.t_start_ns.is_finite() || !self.t_end_ns.is_finite() {
            return Err(Error::InvalidSpec("non-finite time window".into()));
        }
        if self.t_end_ns < self.t_start_ns {
            return Err(Error::InvalidSpec(format!(
                "t_end {} ns precedes t_start {} ns",
                self.t_end_ns, self.t_start_ns
            )));
        }
        for tol in [self.rel_tol, self.abs_tol] {
            if !(tol > 0.0 && tol <= 1e-3) {
                return Err(Error::InvalidSpec(format!(
                    "tolerances must lie in (0, 1e-3]; got rel {}, abs {}",
                    self.rel_tol, self.abs_tol
                )));
            }
        }
        let slop = 1e-9 * (self.t_end_ns - self.t_start_ns).max(1.0);
        for &s in &self.sample_times_ns {
            if !s.is_finite() || s < self.t_start_ns - slop || s > self.t_end_ns + slop {
                return Err(Error::InvalidSpec(format!(
                    "sample time {s} ns outside [{}, {}]",
                    self.t_start_ns, self.t_end_ns
                )));
            }
        }
        if let Method::FixedStepRk4 { dt_ns } = self.method {
            if !(dt_ns > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "fixed step must be positive, got {dt_ns} ns"
                )));
            }
        }
        Ok(())
    }
}

/// A time-dependent Hamiltonian H(t) that the propagator can apply.
///
/// `apply` must be linear in `x` and pure (no interior mutation), so shared
/// references can be used from several propagations in parallel.
pub trait HamiltonianProvider: Sync {
    fn space(&self) -> FockSpace;

    /// y = H(t)·x, H in GHz.
    fn apply(&self, t_ns: f64, x: &[C64], y: &mut [C64]);

    /// Whether H is independent of t; gates the static-exponential method.
    fn is_static(&self) -> bool;

    /// Assembled sparse form at time t, for Hermiticity spot-checks and the
    /// static-exponential path. Not called on the integration hot path.
    fn assemble(&self, t_ns: f64) -> SparseOp;
}

/// Provider wrapping one merged static matrix.
#[derive(Debug, Clone)]
pub struct StaticHamiltonian {
    csr: RealCsr,
}

impl StaticHamiltonian {
    pub fn new(csr: RealCsr) -> Self {
        StaticHamiltonian { csr }
    }

    pub fn matrix(&self) -> &RealCsr {
        &self.csr
    }
}

impl HamiltonianProvider for StaticHamiltonian {
    fn space(&self) -> FockSpace {
        self.csr.space()
    }

    fn apply(&self, _t_ns: f64, x: &[C64], y: &mut [C64]) {
        self.csr.apply_into(x, y);
    }

    fn is_static(&self) -> bool {
        true
    }

    fn assemble(&self, _t_ns: f64) -> SparseOp {
        self.csr.to_sparse_op()
    }
}

/// Propagation output: sampled states plus integration diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Sorted copy of the requested sample times.
    pub sample_times_ns: Vec<f64>,
    /// State at each sample time.
    pub states: Vec<StateVector>,
    /// State at t_end.
    pub final_state: StateVector,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    /// Largest relative norm drift of a single accepted step before
    /// renormalization.
    pub max_step_norm_drift: f64,
}

impl Trajectory {
    /// CSV dump: `t_ns,norm,overlap_with_initial,occ_1,occ_2,occ_c` at each
    /// sample; the overlap column is |⟨ψ₀|ψ(t)⟩|².
    pub fn dump_csv(&self, psi0: &StateVector) -> Result<String> {
        let mut out = String::from("t_ns,norm,overlap_with_initial,occ_1,occ_2,occ_c\n");
        for (t, state) in self.sample_times_ns.iter().zip(&self.states) {
            let ovl = psi0.inner(state)?.norm_sqr();
            let space = state.space();
            let mut occ = [0.0f64; 3];
            for (i, a) in state.amplitudes().iter().enumerate() {
                let n = space.occupations(i);
                let w = a.norm_sqr();
                for k in 0..3 {
                    occ[k] += n[k] as f64 * w;
                }
            }
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                t,
                state.norm(),
                ovl,
                occ[0],
                occ[1],
                occ[2]
            ));
        }
        Ok(out)
    }
}

/// Relative Hermiticity defect allowed at spot-checked times.
const HERMITICITY_TOL: f64 = 1e-10;

fn spot_check_hermiticity<P: HamiltonianProvider + ?Sized>(
    provider: &P,
    times: &[f64],
) -> Result<()> {
    for &t in times {
        let h = provider.assemble(t);
        let scale = h.max_abs();
        let defect = h.hermiticity_defect();
        if defect > HERMITICITY_TOL * scale.max(1e-300) {
            return Err(Error::NotHermitian {
                t_ns: t,
                defect: defect / scale.max(1e-300),
            });
        }
    }
    Ok(())
}

/// Solve the Schrödinger equation over the spec's window.
///
/// The input state need not be normalized; its norm is preserved (each
/// accepted step renormalizes to the initial norm, so propagation stays
/// exactly linear under scalar rescaling).
pub fn propagate<P: HamiltonianProvider + ?Sized>(
    provider: &P,
    psi0: &StateVector,
    spec: &PropagationSpec,
) -> Result<Trajectory> {
    spec.validate()?;
    if psi0.space() != provider.space() {
        return Err(Error::SpaceMismatch {
            left: provider.space().dims(),
            right: psi0.space().dims(),
        });
    }
    let span = spec.t_end_ns - spec.t_start_ns;
    let mid = spec.t_start_ns + 0.5 * span;
    spot_check_hermiticity(provider, &[spec.t_start_ns, mid, spec.t_end_ns])?;
    match spec.method {
        Method::AdaptiveEmbeddedRk => integrate_rk(provider, psi0, spec, None),
        Method::FixedStepRk4 { dt_ns } => integrate_rk(provider, psi0, spec, Some(dt_ns)),
        Method::StaticExponential => {
            if !provider.is_static() {
                return Err(Error::InvalidSpec(
                    "static-exponential method requires a time-independent Hamiltonian".into(),
                ));
            }
            static_exponential(provider, psi0, spec)
        }
    }
}

/// Dormand-Prince 5(4) coefficients (the classic dopri5 tableau).
mod dp5 {
    pub const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    pub const A2: [f64; 1] = [0.2];
    pub const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
    pub const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
    pub const A5: [f64; 4] = [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
    ];
    pub const A6: [f64; 5] = [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ];
    /// Fifth-order solution weights (row seven; also A7 because of FSAL).
    pub const B5: [f64; 6] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ];
    /// B5 − B4: the embedded error-estimate weights (k7 included).
    pub const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
}

/// y = −i·2π·(H(t)·x): the equation of motion's right-hand side. `y` first
/// receives H·x from the provider, then is rotated by −i·2π in place.
fn rhs<P: HamiltonianProvider + ?Sized>(provider: &P, t: f64, x: &[C64], y: &mut [C64]) {
    provider.apply(t, x, y);
    for v in y.iter_mut() {
        *v = C64::new(TAU * v.im, -TAU * v.re);
    }
}

/// Shared driver for the adaptive DP5 and fixed-step RK4 paths
/// (`fixed_dt = Some(dt)` selects RK4).
fn integrate_rk<P: HamiltonianProvider + ?Sized>(
    provider: &P,
    psi0: &StateVector,
    spec: &PropagationSpec,
    fixed_dt: Option<f64>,
) -> Result<Trajectory> {
    let space = psi0.space();
    let d = space.total();
    let span = spec.t_end_ns - spec.t_start_ns;
    let eps_t = 1e-9 * span.max(1.0);
    let h_min = 1e-12 * span.max(1.0);

    let mut samples = spec.sample_times_ns.clone();
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut y: Vec<C64> = psi0.amplitudes().to_vec();
    let n0 = psi0.norm();
    let mut t = spec.t_start_ns;

    let mut states: Vec<StateVector> = Vec::with_capacity(samples.len());
    let mut si = 0;
    while si < samples.len() && samples[si] <= t + eps_t {
        states.push(StateVector::from_amplitudes(space, y.clone())?);
        si += 1;
    }

    let mut traj = Trajectory {
        sample_times_ns: samples.clone(),
        states: Vec::new(),
        final_state: StateVector::from_amplitudes(space, y.clone())?,
        steps_accepted: 0,
        steps_rejected: 0,
        max_step_norm_drift: 0.0,
    };

    if span <= eps_t || n0 == 0.0 {
        traj.states = states;
        while traj.states.len() < samples.len() {
            traj.states.push(StateVector::from_amplitudes(space, y.clone())?);
        }
        return Ok(traj);
    }

    // Stage buffers.
    let mut k: Vec<Vec<C64>> = (0..7).map(|_| vec![C64::new(0.0, 0.0); d]).collect();
    let mut ytmp = vec![C64::new(0.0, 0.0); d];
    let mut ynew = vec![C64::new(0.0, 0.0); d];

    rhs(provider, t, &y, &mut k[0]);

    let mut h = match fixed_dt {
        Some(dt) => dt.min(span),
        None => initial_step(provider, t, &y, &k[0], spec, span),
    };

    while t < spec.t_end_ns - eps_t {
        // Clip to the next event (sample or window end).
        let target = if si < samples.len() {
            samples[si].min(spec.t_end_ns)
        } else {
            spec.t_end_ns
        };
        let h_step = h.min(target - t).max(h_min.min(target - t));

        let (err, drift) = if fixed_dt.is_some() {
            rk4_step(provider, t, h_step, &y, &mut k, &mut ytmp, &mut ynew);
            (0.0, norm_of(&ynew) / n0 - 1.0)
        } else {
            dp5_step(provider, t, h_step, &y, &mut k, &mut ytmp, &mut ynew, spec)
        };

        if err <= 1.0 {
            t += h_step;
            if (t - target).abs() <= eps_t {
                t = target;
            }
            // Renormalize to the initial norm; FSAL derivative scales along.
            let factor = n0 / norm_of(&ynew);
            for v in &mut ynew {
                *v *= factor;
            }
            std::mem::swap(&mut y, &mut ynew);
            if fixed_dt.is_none() {
                let (head, tail) = k.split_at_mut(1);
                for (a, b) in head[0].iter_mut().zip(tail[5].iter()) {
                    *a = factor * b;
                }
            } else {
                rhs(provider, t, &y, &mut k[0]);
            }
            traj.steps_accepted += 1;
            traj.max_step_norm_drift = traj.max_step_norm_drift.max(drift.abs());
            while si < samples.len() && samples[si] <= t + eps_t {
                states.push(StateVector::from_amplitudes(space, y.clone())?);
                si += 1;
            }
        } else {
            traj.steps_rejected += 1;
        }

        if fixed_dt.is_none() {
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = h_step * if err <= 1.0 { factor } else { factor.min(1.0) };
            if h < h_min && t < spec.t_end_ns - eps_t {
                return Err(Error::StepSizeUnderflow { t_ns: t, h_ns: h });
            }
        }
    }

    while si < samples.len() {
        states.push(StateVector::from_amplitudes(space, y.clone())?);
        si += 1;
    }
    traj.states = states;
    traj.final_state = StateVector::from_amplitudes(space, y)?;
    Ok(traj)
}

fn norm_of(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Starting-step heuristic (Hairer-Nørsett-Wanner style): balance the size of
/// the state against its derivative, refine with one Euler probe.
fn initial_step<P: HamiltonianProvider + ?Sized>(
    provider: &P,
    t0: f64,
    y0: &[C64],
    f0: &[C64],
    spec: &PropagationSpec,
    span: f64,
) -> f64 {
    let d = y0.len() as f64;
    let sc = |y: &[C64], i: usize| spec.abs_tol + spec.rel_tol * y[i].norm();
    let d0 = (y0
        .iter()
        .enumerate()
        .map(|(i, v)| (v.norm() / sc(y0, i)).powi(2))
        .sum::<f64>()
        / d)
        .sqrt();
    let d1 = (f0
        .iter()
        .enumerate()
        .map(|(i, v)| (v.norm() / sc(y0, i)).powi(2))
        .sum::<f64>()
        / d)
        .sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
    .min(span);
    let y1: Vec<C64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![C64::new(0.0, 0.0); y0.len()];
    rhs(provider, t0 + h0, &y1, &mut f1);
    let d2 = (f1
        .iter()
        .zip(f0)
        .enumerate()
        .map(|(i, (a, b))| ((a - b).norm() / sc(y0, i)).powi(2))
        .sum::<f64>()
        / d)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// One DP5 attempt from (t, y) with step h; fills `ynew` with the 5th-order
/// candidate and returns (scaled error norm, relative norm drift).
#[allow(clippy::too_many_arguments)]
fn dp5_step<P: HamiltonianProvider + ?Sized>(
    provider: &P,
    t: f64,
    h: f64,
    y: &[C64],
    k: &mut [Vec<C64>],
    ytmp: &mut [C64],
    ynew: &mut [C64],
    spec: &PropagationSpec,
) -> (f64, f64) {
    let stage = |ytmp: &mut [C64], coeffs: &[f64], k: &[Vec<C64>]| {
        for (i, v) in ytmp.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (a, kj) in coeffs.iter().zip(k) {
                acc += *a * kj[i];
            }
            *v = y[i] + h * acc;
        }
    };
    stage(ytmp, &dp5::A2, k);
    rhs(provider, t + dp5::C[1] * h, ytmp, &mut k[1]);
    stage(ytmp, &dp5::A3, k);
    rhs(provider, t + dp5::C[2] * h, ytmp, &mut k[2]);
    stage(ytmp, &dp5::A4, k);
    rhs(provider, t + dp5::C[3] * h, ytmp, &mut k[3]);
    stage(ytmp, &dp5::A5, k);
    rhs(provider, t + dp5::C[4] * h, ytmp, &mut k[4]);
    stage(ytmp, &dp5::A6, k);
    rhs(provider, t + dp5::C[5] * h, ytmp, &mut k[5]);
    // 5th-order solution (row 7 of the tableau).
    for (i, v) in ynew.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (a, kj) in dp5::B5.iter().zip(k.iter()) {
            if *a != 0.0 {
                acc += *a * kj[i];
            }
        }
        *v = y[i] + h * acc;
    }
    rhs(provider, t + h, ynew, &mut k[6]);
    // Embedded error estimate against the 4th-order solution.
    let d = y.len() as f64;
    let mut err_acc = 0.0;
    for i in 0..y.len() {
        let mut e = C64::new(0.0, 0.0);
        for (a, kj) in dp5::E.iter().zip(k.iter()) {
            if *a != 0.0 {
                e += *a * kj[i];
            }
        }
        let e = h * e;
        let sc = spec.abs_tol + spec.rel_tol * y[i].norm().max(ynew[i].norm());
        err_acc += (e.norm() / sc).powi(2);
    }
    let err = (err_acc / d).sqrt();
    let drift = norm_of(ynew) / norm_of(y) - 1.0;
    (err, drift)
}

/// One classic RK4 step; always accepted.
fn rk4_step<P: HamiltonianProvider + ?Sized>(
    provider: &P,
    t: f64,
    h: f64,
    y: &[C64],
    k: &mut [Vec<C64>],
    ytmp: &mut [C64],
    ynew: &mut [C64],
) {
    // k[0] already holds f(t, y).
    for (i, v) in ytmp.iter_mut().enumerate() {
        *v = y[i] + 0.5 * h * k[0][i];
    }
    rhs(provider, t + 0.5 * h, ytmp, &mut k[1]);
    for (i, v) in ytmp.iter_mut().enumerate() {
        *v = y[i] + 0.5 * h * k[1][i];
    }
    rhs(provider, t + 0.5 * h, ytmp, &mut k[2]);
    for (i, v) in ytmp.iter_mut().enumerate() {
        *v = y[i] + h * k[2][i];
    }
    rhs(provider, t + h, ytmp, &mut k[3]);
    for (i, v) in ynew.iter_mut().enumerate() {
        *v = y[i] + h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
    }
}

/// ψ(t) = V·e^{−i2πΛ(t−t0)}·V†ψ₀ through a dense Hermitian
/// eigendecomposition.
fn static_exponential<P: HamiltonianProvider + ?Sized>(
    provider: &P,
    psi0: &StateVector,
    spec: &PropagationSpec,
) -> Result<Trajectory> {
    let space = psi0.space();
    let d = space.total();
    let h = provider.assemble(spec.t_start_ns);
    let mut dense = nalgebra::DMatrix::<Complex64>::zeros(d, d);
    for (r, c, v) in h.triplets() {
        dense[(r, c)] = v;
    }
    let eig = nalgebra::SymmetricEigen::try_new(dense, f64::EPSILON, 0)
        .ok_or(Error::EigenFailure)?;
    let psi_vec = nalgebra::DVector::<Complex64>::from_column_slice(psi0.amplitudes());
    let proj = eig.eigenvectors.adjoint() * &psi_vec;

    let state_at = |t: f64| -> StateVector {
        let dt = t - spec.t_start_ns;
        if dt == 0.0 {
            // The identity propagator: return the input bitwise rather than
            // round-tripping it through the eigenbasis.
            return psi0.clone();
        }
        let mut w = proj.clone();
        for i in 0..d {
            let phase = -TAU * eig.eigenvalues[i] * dt;
            w[i] *= C64::new(phase.cos(), phase.sin());
        }
        let out = &eig.eigenvectors * w;
        StateVector::from_amplitudes(space, out.as_slice().to_vec())
            .expect("dimensions match by construction")
    };

    let mut samples = spec.sample_times_ns.clone();
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let states = samples.iter().map(|&t| state_at(t)).collect();
    Ok(Trajectory {
        sample_times_ns: samples,
        states,
        final_state: state_at(spec.t_end_ns),
        steps_accepted: 0,
        steps_rejected: 0,
        max_step_norm_drift: 0.0,
    })
}

/// Propagate each of the supplied basis states through the window and return
/// the diagonal overlaps u_l = ⟨basis_l|ψ_l(t_end)⟩ — the diagonal of the
/// time-evolution operator projected on the basis span. The propagations run
/// in parallel.
pub fn diagonal_overlaps<P: HamiltonianProvider + ?Sized>(
    provider: &P,
    basis: &[StateVector],
    spec: &PropagationSpec,
) -> Result<(Vec<C64>, PropagationDiagnostics)> {
    use rayon::prelude::*;
    let results: Vec<Result<(C64, Trajectory)>> = basis
        .par_iter()
        .map(|b| {
            let traj = propagate(provider, b, spec)?;
            let u = b.inner(&traj.final_state)?;
            Ok((u, traj))
        })
        .collect();
    let mut us = Vec::with_capacity(basis.len());
    let mut diag = PropagationDiagnostics::default();
    for r in results {
        let (u, traj) = r?;
        us.push(u);
        diag.steps_accepted += traj.steps_accepted;
        diag.steps_rejected += traj.steps_rejected;
        diag.max_step_norm_drift = diag.max_step_norm_drift.max(traj.max_step_norm_drift);
        let norm_err = (traj.final_state.norm() - 1.0).abs();
        diag.max_final_norm_error = diag.max_final_norm_error.max(norm_err);
    }
    Ok((us, diag))
}

/// Aggregated integration diagnostics over a set of propagations.
#[derive(Debug, Clone, Copy, Default)]
pub struct PropagationDiagnostics {
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub max_step_norm_drift: f64,
    pub max_final_norm_error: f64,
}
