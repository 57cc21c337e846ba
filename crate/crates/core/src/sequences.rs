//! The named experiments: UDD Stark spectroscopy, the voltage-controlled
//! phase gate, ENDOR spectra, detuned Rabi driving and the refocused
//! conditional gate.

use std::f64::consts::FRAC_PI_2;
use std::ops::{Add, Mul};

use num_complex::Complex64;
use num_traits::Zero;
use rayon::prelude::*;

use crate::analysis::{pairwise_sum, Trace};
use crate::engine::{
    apply_decoherence, execute, rotation, voltage_phase_cycles, z_rotation, Bandwidth, Channel,
    DrivePulse, ExperimentContext, PulseEvent, QubitState, Unitary, VoltageEvent, VoltageMode,
    VoltageWaveform,
};
use crate::error::{Error, Result};
use crate::spin::TransitionKind;
use crate::stark::{DonorInstance, Ensemble};
use crate::tomography::{cardinal_states, process_matrix, ProcessMatrix};

/// Rabi frequency of the broadband refocusing pulses, Hz.
pub const HARD_RABI: f64 = 30e3;

const PROBABILITY_SLACK: f64 = 1e-9;

/// Pulse times of an `n`-pulse UDD sequence of length `total`.
pub fn udd_times(n: usize, total: f64) -> Vec<f64> {
    let denom = (2 * n + 2) as f64;
    (1..=n)
        .map(|j| {
            let s = (std::f64::consts::PI * j as f64 / denom).sin();
            total * s * s
        })
        .collect()
}

/// Echo intensity for a nuclear flip probability: -1 unperturbed, 0 inverted.
pub fn endor_readout(p_flip: f64) -> Result<f64> {
    if !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&p_flip) {
        return Err(Error::Domain(format!(
            "flip probability must lie in [0, 1], got {p_flip}"
        )));
    }
    Ok(p_flip.clamp(0.0, 1.0) - 1.0)
}

/// Mean over donors of equal-length per-donor rows. Donors run in parallel;
/// each point is reduced pairwise in donor order, so the result does not
/// depend on the thread count.
pub fn donor_mean<T, F>(donors: &[DonorInstance], f: F) -> Result<Vec<T>>
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T> + Zero + Send,
    F: Fn(&DonorInstance) -> Result<Vec<T>> + Sync + Send,
{
    if donors.is_empty() {
        return Err(Error::Domain("ensemble has no donors".into()));
    }
    let rows: Vec<Vec<T>> = donors.par_iter().map(f).collect::<Result<_>>()?;
    let len = rows[0].len();
    let scale = 1.0 / donors.len() as f64;
    let mut column = Vec::with_capacity(rows.len());
    Ok((0..len)
        .map(|j| {
            column.clear();
            column.extend(rows.iter().map(|r| r[j]));
            pairwise_sum(&column) * scale
        })
        .collect())
}

fn drive_channel(ctx: &ExperimentContext) -> Channel {
    match ctx.transition.kind() {
        TransitionKind::Esr => Channel::Mw,
        TransitionKind::Nmr => Channel::Rf,
    }
}

fn pulse(
    ctx: &ExperimentContext,
    rabi: f64,
    phase: f64,
    duration: f64,
    voltage: Option<VoltageWaveform>,
) -> PulseEvent {
    PulseEvent::Pulse(DrivePulse {
        channel: drive_channel(ctx),
        rabi,
        phase,
        duration,
        bandwidth: Bandwidth::Selective,
        offset: 0.0,
        voltage,
    })
}

fn hard_pi(ctx: &ExperimentContext, rabi: f64, phase: f64) -> PulseEvent {
    PulseEvent::Pulse(DrivePulse {
        channel: drive_channel(ctx),
        rabi,
        phase,
        duration: 0.5 / rabi,
        bandwidth: Bandwidth::Hard,
        offset: 0.0,
        voltage: None,
    })
}

/// Pulse count and total length of a UDD sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UddSchedule {
    pub pulses: usize,
    /// Seconds.
    pub total: f64,
}

impl UddSchedule {
    /// Free-evolution intervals between consecutive pulses (and the ends).
    pub fn intervals(&self) -> Vec<f64> {
        let mut edges = vec![0.0];
        edges.extend(udd_times(self.pulses, self.total));
        edges.push(self.total);
        edges.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Echo signal `2 rho_01` of a UDD sequence with the voltage applied in the
/// odd intervals (between alternating pulse pairs), centred, splitting the
/// total voltage time `tau` evenly. Bipolar alternates the polarity from
/// window to window. Ideal instantaneous `pi_x` pulses, `|+x>` start.
pub fn udd_stark_experiment(
    ctx: &ExperimentContext,
    volts: f64,
    bipolar: bool,
    tau_grid: &[f64],
    schedule: UddSchedule,
    ensemble: &Ensemble,
) -> Result<Trace<Complex64>> {
    let intervals = schedule.intervals();
    let windows: Vec<usize> = (1..intervals.len()).step_by(2).collect();
    for &tau in tau_grid {
        if !(tau >= 0.0) {
            return Err(Error::Schedule(format!("negative voltage time {tau}")));
        }
        if tau > 0.0 && windows.is_empty() {
            return Err(Error::Schedule(
                "a UDD sequence without pulses has no voltage interval".into(),
            ));
        }
        let each = tau / windows.len().max(1) as f64;
        if let Some(&k) = windows
            .iter()
            .find(|&&k| each > intervals[k] * (1.0 + 1e-12))
        {
            return Err(Error::Schedule(format!(
                "voltage window {each:e} s exceeds UDD interval {k} ({:e} s)",
                intervals[k]
            )));
        }
    }
    let pi_x = rotation(0.0, 1.0, 0.0, 0.5);
    let start = QubitState::from_bloch([1.0, 0.0, 0.0]);
    let donors = ensemble.donors();
    let values = donor_mean(&donors, |donor| {
        Ok(tau_grid
            .iter()
            .map(|&tau| {
                let each = if windows.is_empty() {
                    0.0
                } else {
                    tau / windows.len() as f64
                };
                let mut rho = start;
                for (i, &len) in intervals.iter().enumerate() {
                    let mut cycles = donor.magnetic_detuning * len;
                    if let Some(w) = windows.iter().position(|&k| k == i) {
                        let sign = if bipolar && w % 2 == 1 { -1.0 } else { 1.0 };
                        let wave = VoltageWaveform::new(sign * volts, VoltageMode::Unipolar);
                        cycles += voltage_phase_cycles(&wave, each, ctx, donor)
                            - donor.magnetic_detuning * each;
                    }
                    rho = rho.transform(&z_rotation(cycles));
                    if i + 1 < intervals.len() {
                        rho = rho.transform(&pi_x);
                    }
                }
                if ctx.t2.is_finite() {
                    rho = apply_decoherence(&rho, schedule.total, ctx.t2);
                }
                rho.coherence() * 2.0
            })
            .collect())
    })?;
    Ok(Trace::new("tau_v", tau_grid.to_vec(), values, donors.len()))
}

/// Voltage and drive settings of the Hahn-refocused phase gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseGate {
    pub volts: f64,
    pub mode: VoltageMode,
    /// Soft RF Rabi frequency, Hz.
    pub rabi: f64,
    pub hard_rabi: f64,
}

/// Echo intensity on a `tau_rf` x `tau_v` grid, row-major in `tau_rf`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMap {
    pub tau_rf: Vec<f64>,
    pub tau_v: Vec<f64>,
    pub readout: Vec<f64>,
    pub donors: usize,
}

impl PhaseMap {
    pub fn get(&self, i_rf: usize, i_v: usize) -> f64 {
        self.readout[i_rf * self.tau_v.len() + i_v]
    }

    /// Readout versus `tau_rf` at one voltage time.
    pub fn rf_cut(&self, i_v: usize) -> Vec<f64> {
        (0..self.tau_rf.len()).map(|i| self.get(i, i_v)).collect()
    }

    /// Readout versus `tau_v` at one RF time.
    pub fn voltage_cut(&self, i_rf: usize) -> Vec<f64> {
        let n = self.tau_v.len();
        self.readout[i_rf * n..(i_rf + 1) * n].to_vec()
    }
}

/// Event list of one phase-gate point: half the RF rotation, voltage for
/// `tau_v`, a hard `pi_x`, a matching delay, the other half of the rotation.
pub fn phase_gate_events(
    ctx: &ExperimentContext,
    gate: &PhaseGate,
    tau_rf: f64,
    tau_v: f64,
) -> Vec<PulseEvent> {
    vec![
        pulse(ctx, gate.rabi, 0.0, 0.5 * tau_rf, None),
        PulseEvent::Voltage(VoltageEvent {
            waveform: VoltageWaveform::new(gate.volts, gate.mode),
            duration: tau_v,
        }),
        hard_pi(ctx, gate.hard_rabi, 0.0),
        PulseEvent::Delay(tau_v),
        pulse(ctx, gate.rabi, 0.0, 0.5 * tau_rf, None),
    ]
}

pub fn phase_gate_map(
    ctx: &ExperimentContext,
    tau_rf: &[f64],
    tau_v: &[f64],
    gate: &PhaseGate,
    ensemble: &Ensemble,
) -> Result<PhaseMap> {
    if tau_rf.is_empty() || tau_v.is_empty() {
        return Err(Error::Domain("phase gate grids must be non-empty".into()));
    }
    let donors = ensemble.donors();
    let readout = donor_mean(&donors, |donor| {
        let mut row = Vec::with_capacity(tau_rf.len() * tau_v.len());
        for &t_rf in tau_rf {
            for &t_v in tau_v {
                let events = phase_gate_events(ctx, gate, t_rf, t_v);
                let run = execute(&events, QubitState::ground(), ctx, donor)?;
                row.push(run.final_state.flip_probability());
            }
        }
        Ok(row)
    })?
    .into_iter()
    .map(endor_readout)
    .collect::<Result<_>>()?;
    Ok(PhaseMap {
        tau_rf: tau_rf.to_vec(),
        tau_v: tau_v.to_vec(),
        readout,
        donors: donors.len(),
    })
}

/// ENDOR line: echo intensity versus RF offset from the nominal transition
/// frequency for a single RF pulse, optionally under a voltage waveform.
pub fn endor_spectrum(
    ctx: &ExperimentContext,
    offsets: &[f64],
    voltage: Option<VoltageWaveform>,
    tau_rf: f64,
    rabi: f64,
    ensemble: &Ensemble,
) -> Result<Trace> {
    let donors = ensemble.donors();
    let p = donor_mean(&donors, |donor| {
        offsets
            .iter()
            .map(|&off| {
                let mut event = pulse(ctx, rabi, 0.0, tau_rf, voltage);
                if let PulseEvent::Pulse(p) = &mut event {
                    p.offset = off;
                }
                let run = execute(&[event], QubitState::ground(), ctx, donor)?;
                Ok(run.final_state.flip_probability())
            })
            .collect()
    })?;
    let values = p.into_iter().map(endor_readout).collect::<Result<_>>()?;
    Ok(Trace::new(
        "rf_offset",
        offsets.to_vec(),
        values,
        donors.len(),
    ))
}

/// When the voltage is on during a detuned Rabi experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VoltageWindow {
    AlwaysOn,
    /// Seconds from the start of the RF pulse.
    Window {
        start: f64,
        stop: f64,
    },
}

/// Rabi trace (echo intensity versus RF duration) with the voltage applied
/// during `window`.
pub fn detuned_rabi(
    ctx: &ExperimentContext,
    tau_rf: &[f64],
    window: VoltageWindow,
    voltage: VoltageWaveform,
    rabi: f64,
    ensemble: &Ensemble,
) -> Result<Trace> {
    let max_tau = tau_rf.iter().copied().fold(0.0, f64::max);
    if let VoltageWindow::Window { start, stop } = window {
        if !(0.0 <= start && start <= stop && stop <= max_tau) {
            return Err(Error::Schedule(format!(
                "voltage window [{start:e}, {stop:e}] s must lie within [0, {max_tau:e}] s"
            )));
        }
    }
    let donors = ensemble.donors();
    let p = donor_mean(&donors, |donor| {
        tau_rf
            .iter()
            .map(|&tau| {
                let events = rabi_events(ctx, tau, window, voltage, rabi);
                let run = execute(&events, QubitState::ground(), ctx, donor)?;
                Ok(run.final_state.flip_probability())
            })
            .collect()
    })?;
    let values = p.into_iter().map(endor_readout).collect::<Result<_>>()?;
    Ok(Trace::new("tau_rf", tau_rf.to_vec(), values, donors.len()))
}

fn rabi_events(
    ctx: &ExperimentContext,
    tau: f64,
    window: VoltageWindow,
    voltage: VoltageWaveform,
    rabi: f64,
) -> Vec<PulseEvent> {
    match window {
        VoltageWindow::AlwaysOn => vec![pulse(ctx, rabi, 0.0, tau, Some(voltage))],
        VoltageWindow::Window { start, stop } => {
            let a = start.min(tau);
            let b = stop.min(tau);
            [(a, None), (b - a, Some(voltage)), (tau - b, None)]
                .into_iter()
                .filter(|(d, _)| *d > 0.0)
                .map(|(d, v)| pulse(ctx, rabi, 0.0, d, v))
                .collect()
        }
    }
}

/// Soft `Y(pi/2)`, hard `Y(pi)`, soft `Y(pi/2)`; with the voltage on, a
/// square wave runs during the soft halves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefocusedGate {
    /// Soft RF Rabi frequency, Hz.
    pub rabi: f64,
    pub hard_rabi: f64,
    pub volts: f64,
    /// Square-wave frequency, Hz.
    pub square_freq: f64,
    /// Without the hard pulse the sequence is a plain soft `Y(pi)`.
    pub refocus: bool,
}

impl RefocusedGate {
    pub fn events(&self, ctx: &ExperimentContext, voltage_on: bool) -> Vec<PulseEvent> {
        let wave = voltage_on
            .then(|| VoltageWaveform::new(self.volts, VoltageMode::SquareWave(self.square_freq)));
        let soft = pulse(ctx, self.rabi, FRAC_PI_2, 0.25 / self.rabi, wave);
        if self.refocus {
            vec![soft, hard_pi(ctx, self.hard_rabi, FRAC_PI_2), soft]
        } else {
            vec![soft, soft]
        }
    }

    /// The refocusing pulse is undone in post-processing (toggling frame), so
    /// both variants target `Y(pi)` with the voltage off.
    fn frame(&self) -> Option<Unitary> {
        self.refocus.then(|| rotation(0.0, 1.0, FRAC_PI_2, 0.5))
    }
}

/// Ensemble-averaged output of the refocused gate for one input state.
pub fn refocused_conditional_gate(
    ctx: &ExperimentContext,
    input: &QubitState,
    voltage_on: bool,
    gate: &RefocusedGate,
    ensemble: &Ensemble,
) -> Result<QubitState> {
    Ok(gate_outputs(ctx, std::slice::from_ref(input), voltage_on, gate, ensemble)?[0])
}

fn gate_outputs(
    ctx: &ExperimentContext,
    inputs: &[QubitState],
    voltage_on: bool,
    gate: &RefocusedGate,
    ensemble: &Ensemble,
) -> Result<Vec<QubitState>> {
    let events = gate.events(ctx, voltage_on);
    let frame = gate.frame();
    let donors = ensemble.donors();
    donor_mean(&donors, |donor| {
        inputs
            .iter()
            .map(|input| {
                let out = execute(&events, *input, ctx, donor)?.final_state;
                Ok(match &frame {
                    Some(u) => out.transform(&u.adjoint()),
                    None => out,
                })
            })
            .collect()
    })
}

/// Process matrix of the gate from the six cardinal input states.
pub fn gate_process(
    ctx: &ExperimentContext,
    voltage_on: bool,
    gate: &RefocusedGate,
    ensemble: &Ensemble,
) -> Result<ProcessMatrix> {
    let inputs = cardinal_states();
    let outputs = gate_outputs(ctx, &inputs, voltage_on, gate, ensemble)?;
    process_matrix(&inputs, &outputs)
}
