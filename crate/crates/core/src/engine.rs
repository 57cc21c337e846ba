//! Two-level propagation of the addressed transition in the rotating frame.
//!
//! The frame rotates at the nominal transition frequency; every deviation
//! (magnetic offset, Stark shift, drive offset) enters as a detuning `Delta`
//! with Hamiltonian `Delta sz/2 + f1 (cos phi sx + sin phi sy)/2` in Hz.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spin::{SpinSystem, Transition, TransitionKind};
use crate::stark::{stark_coefficient, DonorInstance};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

pub type Unitary = Matrix2<Complex64>;

/// Density matrix of the addressed two-level subspace. Index 0 is the
/// initially populated level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState(pub Matrix2<Complex64>);

impl QubitState {
    pub fn ground() -> Self {
        Self(Matrix2::new(ONE, ZERO, ZERO, ZERO))
    }

    pub fn excited() -> Self {
        Self(Matrix2::new(ZERO, ZERO, ZERO, ONE))
    }

    pub fn maximally_mixed() -> Self {
        Self::from_bloch([0.0; 3])
    }

    /// `(I + x sx + y sy + z sz) / 2`.
    pub fn from_bloch([x, y, z]: [f64; 3]) -> Self {
        Self(Matrix2::new(
            Complex64::new(0.5 * (1.0 + z), 0.0),
            Complex64::new(0.5 * x, -0.5 * y),
            Complex64::new(0.5 * x, 0.5 * y),
            Complex64::new(0.5 * (1.0 - z), 0.0),
        ))
    }

    /// `(<sx>, <sy>, <sz>)`.
    pub fn bloch(&self) -> [f64; 3] {
        let r = &self.0;
        [
            2.0 * r[(0, 1)].re,
            -2.0 * r[(0, 1)].im,
            (r[(0, 0)] - r[(1, 1)]).re,
        ]
    }

    pub fn coherence(&self) -> Complex64 {
        self.0[(0, 1)]
    }

    /// Population of level 1, i.e. the probability the spin was flipped.
    pub fn flip_probability(&self) -> f64 {
        self.0[(1, 1)].re
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    /// Eigenvalues of the (Hermitian part of the) density matrix, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let [x, y, z] = self.bloch();
        let t = self.trace().re;
        let r = (x * x + y * y + z * z).sqrt();
        [0.5 * (t - r), 0.5 * (t + r)]
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        let herm = (self.0 - self.0.adjoint()).norm() <= tol;
        herm && (self.trace() - ONE).norm() <= tol && self.eigenvalues()[0] >= -tol
    }

    /// Half the trace norm of the difference, for unit-trace states.
    pub fn trace_distance(&self, other: &Self) -> f64 {
        let (a, b) = (self.bloch(), other.bloch());
        0.5 * a
            .iter()
            .zip(&b)
            .map(|(p, q)| (p - q).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn transform(&self, u: &Unitary) -> Self {
        Self(u * self.0 * u.adjoint())
    }
}

impl std::ops::Add for QubitState {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl std::ops::Mul<f64> for QubitState {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Self(self.0 * Complex64::new(rhs, 0.0))
    }
}

impl num_traits::Zero for QubitState {
    fn zero() -> Self {
        Self(Matrix2::zeros())
    }

    fn is_zero(&self) -> bool {
        self.0.iter().all(|c| c.norm() == 0.0)
    }
}

/// `exp[-i 2 pi tau (Delta sz/2 + f1 (cos phi sx + sin phi sy)/2)]` in closed
/// form: a rotation by `2 pi tau sqrt(Delta^2 + f1^2)` about the tilted axis.
pub fn rotation(detuning: f64, rabi: f64, phase: f64, duration: f64) -> Unitary {
    let omega = detuning.hypot(rabi);
    if omega == 0.0 || duration == 0.0 {
        return Unitary::identity();
    }
    let half = PI * duration * omega;
    let (s, c) = half.sin_cos();
    let (nx, ny, nz) = (
        rabi * phase.cos() / omega,
        rabi * phase.sin() / omega,
        detuning / omega,
    );
    // cos(h) I - i sin(h) (n . sigma)
    Unitary::new(
        Complex64::new(c, -s * nz),
        Complex64::new(-s * ny, -s * nx),
        Complex64::new(s * ny, -s * nx),
        Complex64::new(c, s * nz),
    )
}

/// Free precession under a detuning for accumulated phase `2 pi Delta tau`.
pub fn z_rotation(cycles: f64) -> Unitary {
    let e = (-I * PI * cycles).exp();
    Unitary::new(e, ZERO, ZERO, e.conj())
}

/// Off-resonant Rabi rotation of `rho`.
pub fn propagate_pulse(
    rho: &QubitState,
    detuning: f64,
    rabi: f64,
    phase: f64,
    duration: f64,
) -> QubitState {
    debug_assert!(duration >= 0.0);
    rho.transform(&rotation(detuning, rabi, phase, duration))
}

/// Multiplies the coherences by `exp(-tau / T2)`; `T2 = inf` is the identity.
pub fn apply_decoherence(rho: &QubitState, duration: f64, t2: f64) -> QubitState {
    debug_assert!(t2 > 0.0);
    let k = (-duration / t2).exp();
    let mut out = *rho;
    out.0[(0, 1)] *= k;
    out.0[(1, 0)] *= k;
    out
}

/// Polarity pattern of a voltage waveform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VoltageMode {
    Unipolar,
    /// `+V` for the first half of the duration, `-V` for the second.
    BipolarPair,
    /// Alternating `+V`/`-V` with the given repetition frequency (Hz),
    /// starting positive.
    SquareWave(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoltageWaveform {
    /// Volts.
    pub amplitude: f64,
    pub mode: VoltageMode,
}

impl VoltageWaveform {
    pub fn new(amplitude: f64, mode: VoltageMode) -> Self {
        Self { amplitude, mode }
    }

    pub fn off() -> Self {
        Self::new(0.0, VoltageMode::Unipolar)
    }

    /// Constant-polarity segments `(sign, duration)` covering `duration`; a
    /// square wave ends with an exact partial segment when its period does
    /// not divide the duration.
    pub fn segments(&self, duration: f64) -> Vec<(f64, f64)> {
        match self.mode {
            VoltageMode::Unipolar => vec![(1.0, duration)],
            VoltageMode::BipolarPair => vec![(1.0, 0.5 * duration), (-1.0, 0.5 * duration)],
            VoltageMode::SquareWave(freq) => {
                let half = 0.5 / freq;
                let mut n = (duration / half).floor();
                if (n + 1.0) * half <= duration * (1.0 + 1e-12) {
                    n += 1.0;
                }
                let n = n as usize;
                let mut out = Vec::with_capacity(n + 1);
                let mut sign = 1.0;
                let mut elapsed = 0.0;
                for k in 0..n {
                    let end = if k + 1 == n {
                        duration.min((k + 1) as f64 * half)
                    } else {
                        (k + 1) as f64 * half
                    };
                    out.push((sign, end - elapsed));
                    elapsed = end;
                    sign = -sign;
                }
                let rest = duration - elapsed;
                if rest > 1e-12 * duration {
                    out.push((sign, rest));
                } else if let Some(last) = out.last_mut() {
                    last.1 += rest;
                }
                out
            }
        }
    }
}

/// A timed voltage event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoltageEvent {
    pub waveform: VoltageWaveform,
    /// Seconds.
    pub duration: f64,
}

/// Which spectrometer channel drives a pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Mw,
    Rf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bandwidth {
    Selective,
    Hard,
}

/// A drive pulse, optionally with a simultaneous voltage waveform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrivePulse {
    pub channel: Channel,
    /// Nominal Rabi frequency, Hz.
    pub rabi: f64,
    /// Radians.
    pub phase: f64,
    /// Seconds.
    pub duration: f64,
    pub bandwidth: Bandwidth,
    /// Drive frequency minus the nominal transition frequency, Hz.
    pub offset: f64,
    pub voltage: Option<VoltageWaveform>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseEvent {
    Pulse(DrivePulse),
    Voltage(VoltageEvent),
    Delay(f64),
    Readout,
}

impl PulseEvent {
    pub fn duration(&self) -> f64 {
        match self {
            Self::Pulse(p) => p.duration,
            Self::Voltage(v) => v.duration,
            Self::Delay(d) => *d,
            Self::Readout => 0.0,
        }
    }
}

/// Everything a donor trajectory needs beyond its own offsets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentContext {
    pub system: SpinSystem,
    /// Tesla.
    pub b0: f64,
    pub transition: Transition,
    /// Plate separation in micrometres; `E = V / thickness`.
    pub thickness_um: f64,
    /// Phenomenological coherence time of the addressed transition, s.
    pub t2: f64,
    /// Quadratic Stark coefficient of `transition`, Hz/(V/um)^2.
    pub stark_coefficient: f64,
}

impl ExperimentContext {
    pub fn new(
        system: SpinSystem,
        b0: f64,
        transition: Transition,
        thickness_um: f64,
        t2: f64,
    ) -> Result<Self> {
        if !(thickness_um > 0.0 && thickness_um.is_finite()) {
            return Err(Error::Domain(format!(
                "sample thickness must be positive, got {thickness_um} um"
            )));
        }
        if !(t2 > 0.0) {
            return Err(Error::Domain(format!("T2 must be positive, got {t2}")));
        }
        let stark_coefficient = stark_coefficient(&system, b0, &transition)?;
        Ok(Self {
            system,
            b0,
            transition,
            thickness_um,
            t2,
            stark_coefficient,
        })
    }

    /// Applied field in V/um for a plate voltage.
    pub fn field(&self, volts: f64) -> f64 {
        volts / self.thickness_um
    }

    /// Nominal (`s = 1`, `lambda = 0`) quadratic shift at a plate voltage, Hz.
    pub fn nominal_shift(&self, volts: f64) -> f64 {
        let e = self.field(volts);
        self.stark_coefficient * e * e
    }

    /// Plate voltage whose nominal quadratic shift has magnitude `shift`.
    pub fn voltage_for_shift(&self, shift: f64) -> f64 {
        (shift / self.stark_coefficient).abs().sqrt() * self.thickness_um
    }
}

/// Z rotation accumulated under a voltage waveform. The quadratic and
/// magnetic parts scale with the total duration and the linear part with the
/// signed duration, so a bipolar pair cancels the linear term exactly.
pub fn voltage_phase_cycles(
    waveform: &VoltageWaveform,
    duration: f64,
    ctx: &ExperimentContext,
    donor: &DonorInstance,
) -> f64 {
    let local = donor.field_scale * ctx.field(waveform.amplitude);
    let signed: f64 = waveform
        .segments(duration)
        .iter()
        .map(|(sign, d)| sign * d)
        .sum();
    let signed = match waveform.mode {
        VoltageMode::BipolarPair => 0.0,
        _ => signed,
    };
    (donor.magnetic_detuning + ctx.stark_coefficient * local * local) * duration
        + donor.linear_stark * local * signed
}

/// Evolution under a voltage event with no drive.
pub fn propagate_voltage(
    rho: &QubitState,
    event: &VoltageEvent,
    ctx: &ExperimentContext,
    donor: &DonorInstance,
) -> QubitState {
    let cycles = voltage_phase_cycles(&event.waveform, event.duration, ctx, donor);
    rho.transform(&z_rotation(cycles))
}

/// Unitary of a drive applied together with a voltage waveform, built from
/// exact rotations on each constant-voltage segment. `frame_detuning` is the
/// nominal transition frequency minus the drive frequency.
#[allow(clippy::too_many_arguments)]
pub fn rf_under_voltage_unitary(
    rabi: f64,
    phase: f64,
    duration: f64,
    waveform: &VoltageWaveform,
    ctx: &ExperimentContext,
    donor: &DonorInstance,
    frame_detuning: f64,
) -> Unitary {
    let e = ctx.field(waveform.amplitude);
    let base = frame_detuning + donor.magnetic_detuning;
    let plus = base + donor.field_shift(ctx.stark_coefficient, e);
    let minus = base + donor.field_shift(ctx.stark_coefficient, -e);
    let mut u = Unitary::identity();
    let mut cached: Option<(f64, f64, Unitary)> = None;
    for (sign, d) in waveform.segments(duration) {
        let step = match cached {
            Some((s, dd, m)) if s == sign && dd == d => m,
            _ => {
                let det = if sign > 0.0 { plus } else { minus };
                let m = rotation(det, rabi, phase, d);
                cached = Some((sign, d, m));
                m
            }
        };
        u = step * u;
    }
    u
}

#[allow(clippy::too_many_arguments)]
pub fn propagate_rf_under_voltage(
    rho: &QubitState,
    rabi: f64,
    phase: f64,
    duration: f64,
    waveform: &VoltageWaveform,
    ctx: &ExperimentContext,
    donor: &DonorInstance,
    frame_detuning: f64,
) -> QubitState {
    rho.transform(&rf_under_voltage_unitary(
        rabi,
        phase,
        duration,
        waveform,
        ctx,
        donor,
        frame_detuning,
    ))
}

/// Final state and the states recorded at each `Readout` of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub final_state: QubitState,
    pub readouts: Vec<QubitState>,
}

/// Runs an event list for one donor in the nominal frame. A pulse with a
/// drive offset keeps phase with its own drive from `t = 0`, so splitting a
/// pulse in two leaves the result unchanged; pulses must use the channel
/// that matches the addressed transition.
pub fn execute(
    events: &[PulseEvent],
    initial: QubitState,
    ctx: &ExperimentContext,
    donor: &DonorInstance,
) -> Result<Trajectory> {
    let expected = match ctx.transition.kind() {
        TransitionKind::Esr => Channel::Mw,
        TransitionKind::Nmr => Channel::Rf,
    };
    let mut elapsed = 0.0;
    let mut rho = initial;
    let mut readouts = Vec::new();
    for (k, event) in events.iter().enumerate() {
        let duration = event.duration();
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(Error::Schedule(format!(
                "event {} has invalid duration {duration}",
                k + 1
            )));
        }
        match event {
            PulseEvent::Pulse(p) => {
                if p.channel != expected {
                    return Err(Error::Runtime(format!(
                        "event {}: {:?} pulse cannot drive the {} transition",
                        k + 1,
                        p.channel,
                        ctx.transition
                    )));
                }
                let in_drive_frame = match &p.voltage {
                    Some(w) => rf_under_voltage_unitary(
                        p.rabi, p.phase, p.duration, w, ctx, donor, -p.offset,
                    ),
                    None => rotation(
                        donor.magnetic_detuning - p.offset,
                        p.rabi,
                        p.phase,
                        p.duration,
                    ),
                };
                let u = if p.offset == 0.0 {
                    in_drive_frame
                } else {
                    z_rotation(p.offset * (elapsed + p.duration))
                        * in_drive_frame
                        * z_rotation(-p.offset * elapsed)
                };
                rho = rho.transform(&u);
            }
            PulseEvent::Voltage(v) => {
                let cycles = voltage_phase_cycles(&v.waveform, v.duration, ctx, donor);
                rho = rho.transform(&z_rotation(cycles));
            }
            PulseEvent::Delay(d) => {
                rho = rho.transform(&z_rotation(donor.magnetic_detuning * d));
            }
            PulseEvent::Readout => readouts.push(rho),
        }
        if duration > 0.0 && ctx.t2.is_finite() {
            rho = apply_decoherence(&rho, duration, ctx.t2);
        }
        elapsed += duration;
    }
    Ok(Trajectory {
        final_state: rho,
        readouts,
    })
}
