//! Named experiments driven by a program's config block.
//!
//! Each preset reads its grid and drive settings from config keys, falling
//! back to the defaults listed on [`Preset`], and returns one or more tables.

use std::fmt;
use std::str::FromStr;

use crate::analysis::{fft_distribution, fit_lineshape, LineshapeModel, Window};
use crate::engine::{VoltageMode, VoltageWaveform};
use crate::error::{Error, Result};
use crate::output::Table;
use crate::program::{Program, RunOptions, Setup};
use crate::sequences::{
    detuned_rabi, endor_spectrum, gate_process, phase_gate_map, udd_stark_experiment, PhaseGate,
    RefocusedGate, UddSchedule, VoltageWindow,
};
use crate::tomography::{process_fidelity, ProcessMatrix};

/// Experiments reachable with `sweep --preset`.
///
/// | preset | keys (default) |
/// |---|---|
/// | `fig1b` | `voltage` (150 V), `udd_pulses` (4), `udd_total` (6 ms), `tau_max` (2.56 ms), `tau_steps` (256) |
/// | `fig2c` | `voltage`, `tau_rf_max` (2 ms), `tau_rf_steps` (21), `tau_v_max` (0.8 ms), `tau_v_steps` (17) |
/// | `fig3c` | `voltage`, `offset_span` (12 kHz), `offset_steps` (241), `square_freq` (8 kHz) |
/// | `fig3def` | `voltage`, `tau_rf_max` (4 ms), `tau_rf_steps` (201), `window_start` (1 ms), `window_stop` (2 ms), `square_freq` (unipolar if absent) |
/// | `fig4b` | `voltage`, `square_freq` (8 kHz) |
///
/// All of them also use `rf_rabi` and `hard_rabi` where a drive is involved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig1b,
    Fig2c,
    Fig3c,
    Fig3def,
    Fig4b,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Fig1b,
        Preset::Fig2c,
        Preset::Fig3c,
        Preset::Fig3def,
        Preset::Fig4b,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fig1b => "fig1b",
            Self::Fig2c => "fig2c",
            Self::Fig3c => "fig3c",
            Self::Fig3def => "fig3def",
            Self::Fig4b => "fig4b",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown preset '{s}'"))
    }
}

/// Run-time knobs that are not part of the program file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PresetOptions {
    pub run: RunOptions,
    /// Apodization of the UDD trace before the Fourier transform.
    pub window: Window,
}

const DEFAULT_VOLTS: f64 = 150.0;

/// `steps` evenly spaced points on `[0, max]`.
fn grid(max: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![0.0];
    }
    (0..steps)
        .map(|k| max * k as f64 / (steps - 1) as f64)
        .collect()
}

fn steps(doc: &Program, key: &str, default: u64, min: u64) -> Result<usize> {
    let n = doc.integer_or(key, default);
    if n < min {
        return Err(Error::Domain(format!(
            "{key} must be at least {min}, got {n}"
        )));
    }
    Ok(n as usize)
}

fn positive(doc: &Program, key: &str, default: f64) -> Result<f64> {
    let v = doc.number_or(key, default);
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{key} must be positive, got {v}")))
    }
}

fn finite(doc: &Program, key: &str, default: f64) -> Result<f64> {
    let v = doc.number_or(key, default);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{key} must be finite, got {v}")))
    }
}

pub fn run_preset(doc: &Program, preset: Preset, options: PresetOptions) -> Result<Vec<Table>> {
    let setup = doc.setup(options.run)?;
    match preset {
        Preset::Fig1b => fig1b(doc, &setup, options.window),
        Preset::Fig2c => fig2c(doc, &setup),
        Preset::Fig3c => fig3c(doc, &setup),
        Preset::Fig3def => fig3def(doc, &setup),
        Preset::Fig4b => fig4b(doc, &setup),
    }
}

fn fig1b(doc: &Program, setup: &Setup, window: Window) -> Result<Vec<Table>> {
    let volts = finite(doc, "voltage", DEFAULT_VOLTS)?;
    let schedule = UddSchedule {
        pulses: steps(doc, "udd_pulses", 4, 1)?,
        total: positive(doc, "udd_total", 6e-3)?,
    };
    let taus = grid(
        positive(doc, "tau_max", 2.56e-3)?,
        steps(doc, "tau_steps", 256, 4)?,
    );
    let ctx = &setup.context;
    let bipolar = udd_stark_experiment(ctx, volts, true, &taus, schedule, &setup.ensemble)?;
    let unipolar = udd_stark_experiment(ctx, volts, false, &taus, schedule, &setup.ensemble)?;

    let mut trace = Table::new(
        "udd_trace",
        &[
            "tau_v_s",
            "bipolar_re",
            "bipolar_im",
            "unipolar_re",
            "unipolar_im",
        ],
    );
    for (k, &t) in taus.iter().enumerate() {
        let (b, u) = (bipolar.values[k], unipolar.values[k]);
        trace.push(vec![t, b.re, b.im, u.re, u.im]);
    }

    let spec_b = fft_distribution(&bipolar, window)?;
    let spec_u = fft_distribution(&unipolar, window)?;
    let mut spectrum = Table::new("udd_spectrum", &["frequency_hz", "bipolar", "unipolar"]);
    for k in 0..spec_b.frequencies.len() {
        spectrum.push(vec![
            spec_b.frequencies[k],
            spec_b.amplitudes[k].re,
            spec_u.amplitudes[k].re,
        ]);
    }

    let fit = spec_b.fit(LineshapeModel::Lorentzian)?;
    let mut fits = Table::new(
        "udd_fit",
        &[
            "center_hz",
            "fwhm_hz",
            "amplitude",
            "residual_norm",
            "peak_hz",
            "resolution_hz",
            "expected_center_hz",
        ],
    );
    fits.push(vec![
        fit.center,
        fit.fwhm,
        fit.amplitude,
        fit.residual_norm,
        spec_b.peak_frequency(),
        spec_b.resolution,
        ctx.nominal_shift(volts),
    ]);
    Ok(vec![trace, spectrum, fits])
}

fn fig2c(doc: &Program, setup: &Setup) -> Result<Vec<Table>> {
    let gate = PhaseGate {
        volts: finite(doc, "voltage", DEFAULT_VOLTS)?,
        mode: VoltageMode::BipolarPair,
        rabi: setup.rf_rabi,
        hard_rabi: setup.hard_rabi,
    };
    let tau_rf = grid(
        positive(doc, "tau_rf_max", 2e-3)?,
        steps(doc, "tau_rf_steps", 21, 1)?,
    );
    let tau_v = grid(
        positive(doc, "tau_v_max", 0.8e-3)?,
        steps(doc, "tau_v_steps", 17, 1)?,
    );
    let map = phase_gate_map(&setup.context, &tau_rf, &tau_v, &gate, &setup.ensemble)?;
    let mut table = Table::new("phase_gate", &["tau_rf_s", "tau_v_s", "echo"]);
    for (i, &a) in tau_rf.iter().enumerate() {
        for (j, &b) in tau_v.iter().enumerate() {
            table.push(vec![a, b, map.get(i, j)]);
        }
    }
    Ok(vec![table])
}

fn square_wave(doc: &Program, default: Option<f64>) -> Result<VoltageMode> {
    match doc.number("square_freq").or(default) {
        Some(f) if f > 0.0 && f.is_finite() => Ok(VoltageMode::SquareWave(f)),
        Some(f) => Err(Error::Domain(format!(
            "square_freq must be positive, got {f}"
        ))),
        None => Ok(VoltageMode::Unipolar),
    }
}

fn fig3c(doc: &Program, setup: &Setup) -> Result<Vec<Table>> {
    let volts = finite(doc, "voltage", DEFAULT_VOLTS)?;
    let span = positive(doc, "offset_span", 12e3)?;
    let offsets: Vec<f64> = grid(span, steps(doc, "offset_steps", 241, 4)?)
        .into_iter()
        .map(|f| f - 0.5 * span)
        .collect();
    let square = square_wave(doc, Some(8e3))?;
    let tau_rf = 0.5 / setup.rf_rabi;
    let modes = [
        None,
        Some(VoltageWaveform::new(volts, VoltageMode::Unipolar)),
        Some(VoltageWaveform::new(volts, square)),
    ];
    let lines = modes
        .iter()
        .map(|v| {
            endor_spectrum(
                &setup.context,
                &offsets,
                *v,
                tau_rf,
                setup.rf_rabi,
                &setup.ensemble,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut spectrum = Table::new(
        "endor_spectrum",
        &["rf_offset_hz", "echo_off", "echo_unipolar", "echo_square"],
    );
    for (k, &f) in offsets.iter().enumerate() {
        spectrum.push(vec![
            f,
            lines[0].values[k],
            lines[1].values[k],
            lines[2].values[k],
        ]);
    }

    // mode: 0 off, 1 unipolar, 2 square wave
    let mut fits = Table::new("endor_fit", &["mode", "center_hz", "fwhm_hz", "amplitude"]);
    for (m, line) in lines.iter().enumerate() {
        let lifted: Vec<f64> = line.values.iter().map(|v| v + 1.0).collect();
        let row = match fit_lineshape(&offsets, &lifted, LineshapeModel::Lorentzian) {
            Ok(fit) => vec![m as f64, fit.center, fit.fwhm, fit.amplitude],
            Err(e) => {
                log::warn!("ENDOR line {m} not fitted: {e}");
                vec![m as f64, f64::NAN, f64::NAN, f64::NAN]
            }
        };
        fits.push(row);
    }
    Ok(vec![spectrum, fits])
}

fn fig3def(doc: &Program, setup: &Setup) -> Result<Vec<Table>> {
    let volts = finite(doc, "voltage", DEFAULT_VOLTS)?;
    let wave = VoltageWaveform::new(volts, square_wave(doc, None)?);
    let taus = grid(
        positive(doc, "tau_rf_max", 4e-3)?,
        steps(doc, "tau_rf_steps", 201, 1)?,
    );
    let window = VoltageWindow::Window {
        start: finite(doc, "window_start", 1e-3)?,
        stop: finite(doc, "window_stop", 2e-3)?,
    };
    let run = |w: VoltageWindow, v: VoltageWaveform| {
        detuned_rabi(&setup.context, &taus, w, v, setup.rf_rabi, &setup.ensemble)
    };
    let off = run(VoltageWindow::AlwaysOn, VoltageWaveform::off())?;
    let on = run(VoltageWindow::AlwaysOn, wave)?;
    let windowed = run(window, wave)?;
    let mut table = Table::new(
        "detuned_rabi",
        &["tau_rf_s", "echo_off", "echo_always_on", "echo_window"],
    );
    for (k, &t) in taus.iter().enumerate() {
        table.push(vec![t, off.values[k], on.values[k], windowed.values[k]]);
    }
    Ok(vec![table])
}

/// The conditional gate configured by a program, with the hard refocusing
/// pulse.
pub fn refocused_gate(doc: &Program, setup: &Setup) -> Result<RefocusedGate> {
    let square_freq = match square_wave(doc, Some(8e3))? {
        VoltageMode::SquareWave(f) => f,
        _ => unreachable!("a default frequency is supplied"),
    };
    Ok(RefocusedGate {
        rabi: setup.rf_rabi,
        hard_rabi: setup.hard_rabi,
        volts: finite(doc, "voltage", DEFAULT_VOLTS)?,
        square_freq,
        refocus: true,
    })
}

fn fig4b(doc: &Program, setup: &Setup) -> Result<Vec<Table>> {
    let base = refocused_gate(doc, setup)?;
    let mut table = Table::new(
        "gate_fidelity",
        &[
            "refocus",
            "voltage_on",
            "fidelity_pi_y",
            "fidelity_identity",
        ],
    );
    for refocus in [true, false] {
        let gate = RefocusedGate { refocus, ..base };
        for voltage_on in [false, true] {
            let chi = gate_process(&setup.context, voltage_on, &gate, &setup.ensemble)?;
            table.push(vec![
                f64::from(u8::from(refocus)),
                f64::from(u8::from(voltage_on)),
                process_fidelity(&chi, &ProcessMatrix::pi_y()),
                process_fidelity(&chi, &ProcessMatrix::identity()),
            ]);
        }
    }
    Ok(vec![table])
}

/// `chi` as one row per element.
pub fn chi_table(chi: &ProcessMatrix) -> Table {
    let mut table = Table::new("chi", &["row", "col", "re", "im"]);
    for i in 0..4 {
        for j in 0..4 {
            let c = chi.0[(i, j)];
            table.push(vec![i as f64, j as f64, c.re, c.im]);
        }
    }
    table
}
