//! Acceptance criteria, one test each. Every test prints a single
//! `acceptance <n> ... PASS|FAIL` line to stderr (visible without
//! `--nocapture`) before asserting.
//!
//! Run with `cargo test -p starksim-core --test acceptance`.

use std::f64::consts::PI;
use std::io::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use starksim_core::analysis::{fft_distribution, fit_lineshape, LineshapeModel, Window};
use starksim_core::engine::{
    propagate_pulse, ExperimentContext, QubitState, VoltageMode, VoltageWaveform,
};
use starksim_core::program::{parse_program, parse_program_bytes};
use starksim_core::sequences::{
    detuned_rabi, endor_spectrum, gate_process, phase_gate_map, udd_stark_experiment, PhaseGate,
    RefocusedGate, UddSchedule, VoltageWindow,
};
use starksim_core::spin::{transition_frequency, transition_sensitivities, SpinSystem, Transition};
use starksim_core::stark::{quadratic_shift, Ensemble, EnsembleDistribution};
use starksim_core::tomography::{cardinal_states, process_fidelity, process_matrix, ProcessMatrix};

/// Bohr magneton over Planck's constant, Hz/T (CODATA 2018).
const MU_B_OVER_H: f64 = 13.996_244_936_1e9;

/// 150 V across the 1.71 mm sample, V/um.
const E_150V: f64 = 150.0 / 1710.0;

struct Check {
    what: String,
    ok: bool,
}

#[derive(Default)]
struct Report {
    checks: Vec<Check>,
}

impl Report {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        self.checks.push(Check {
            what: what.into(),
            ok,
        });
    }

    /// Prints the criterion's line, then fails the test if any check failed.
    fn finish(self, id: u32, title: &str, elapsed: Duration, limit: Duration) {
        let in_time = elapsed < limit;
        let ok = in_time && self.checks.iter().all(|c| c.ok);
        let failed: Vec<&str> = self
            .checks
            .iter()
            .filter(|c| !c.ok)
            .map(|c| c.what.as_str())
            .collect();
        let details: Vec<&str> = self.checks.iter().map(|c| c.what.as_str()).collect();
        let line = format!(
            "acceptance {id} {title}: {} ({:.2} s of {} s) [{}]\n",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs(),
            details.join("; ")
        );
        let _ = std::io::stderr().write_all(line.as_bytes());
        assert!(in_time, "criterion {id} took {elapsed:?}, limit {limit:?}");
        assert!(
            failed.is_empty(),
            "criterion {id} failed: {}",
            failed.join("; ")
        );
    }
}

fn sb() -> SpinSystem {
    SpinSystem::sb121()
}

fn context(transition: Transition, t2: f64) -> ExperimentContext {
    ExperimentContext::new(sb(), 0.34, transition, 1710.0, t2).unwrap()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
        .collect()
}

/// Frequency shift from re-diagonalising with the Stark-modified `A` and
/// `g_e`, without any derivative.
fn shift_by_rediagonalising(sys: &SpinSystem, b0: f64, t: &Transition, e: f64) -> f64 {
    let mut tuned = *sys;
    tuned.hyperfine *= 1.0 + sys.eta_a * e * e;
    tuned.electron_g *= 1.0 + sys.eta_g * e * e;
    transition_frequency(&tuned, b0, t).unwrap() - transition_frequency(sys, b0, t).unwrap()
}

#[test]
fn criterion_1_high_field_sensitivities() {
    let start = Instant::now();
    let mut r = Report::default();
    let b0 = 5.0;
    let mut worst_a = 0.0f64;
    let mut worst_g = 0.0f64;
    for k in 0..6 {
        let m = -2.5 + k as f64;
        let s = transition_sensitivities(&sb(), b0, &Transition::esr(m)).unwrap();
        worst_a = worst_a.max((s.df_da - m).abs());
        worst_g = worst_g.max((s.df_dg / (MU_B_OVER_H * b0) - 1.0).abs());
    }
    r.check(
        worst_a < 1e-3,
        format!("ESR max |df/dA - m_I| = {worst_a:.2e} (< 1e-3)"),
    );
    r.check(
        worst_g < 1e-3,
        format!("ESR max |df/dg_e / (mu_B B0/h) - 1| = {worst_g:.2e} (< 1e-3)"),
    );
    let mut nmr_a = 0.0f64;
    let mut nmr_g = 0.0f64;
    for k in 0..5 {
        let m = -2.5 + k as f64;
        let s = transition_sensitivities(&sb(), b0, &Transition::nmr(0.5, m)).unwrap();
        nmr_a = nmr_a.max((s.df_da - 0.5).abs());
        nmr_g = nmr_g.max(s.df_dg.abs());
    }
    r.check(
        nmr_a < 1e-3,
        format!("NMR max |df/dA - 1/2| = {nmr_a:.2e} (< 1e-3)"),
    );
    r.check(
        nmr_g < 1.0,
        format!("NMR max |df/dg_e| = {nmr_g:.3e} Hz (< 1 Hz)"),
    );
    r.finish(
        1,
        "high-field sensitivity limits",
        start.elapsed(),
        Duration::from_secs(1),
    );
}

#[test]
fn criterion_2_nmr_stark_shift() {
    let start = Instant::now();
    let mut r = Report::default();
    let t = Transition::nmr(0.5, -0.5);
    let q = quadratic_shift(&sb(), 0.34, &t, E_150V).unwrap();
    let oracle = shift_by_rediagonalising(&sb(), 0.34, &t, E_150V);
    r.check(
        (q.abs() - 2500.0).abs() <= 250.0,
        format!("|shift| = {:.1} Hz (2500 +- 10%)", q.abs()),
    );
    r.check(
        (q - oracle).abs() <= 1e-4 * oracle.abs(),
        format!("re-diagonalised shift {oracle:.1} Hz"),
    );
    r.finish(
        2,
        "NMR Stark shift at 150 V",
        start.elapsed(),
        Duration::from_secs(1),
    );
}

#[test]
fn criterion_3_esr_stark_shift() {
    let start = Instant::now();
    let mut r = Report::default();
    for m in [-2.5, 2.5] {
        let t = Transition::esr(m);
        let q = quadratic_shift(&sb(), 0.34, &t, E_150V).unwrap();
        let oracle = shift_by_rediagonalising(&sb(), 0.34, &t, E_150V);
        r.check(
            (q.abs() - 12e3).abs() <= 0.15 * 12e3,
            format!("m_I {m:+}: |shift| = {:.0} Hz (12 kHz +- 15%)", q.abs()),
        );
        r.check(
            (q - oracle).abs() <= 1e-4 * oracle.abs(),
            format!("m_I {m:+}: re-diagonalised {oracle:.0} Hz"),
        );
    }
    r.finish(
        3,
        "ESR Stark shift at 150 V",
        start.elapsed(),
        Duration::from_secs(1),
    );
}

#[test]
fn criterion_4_udd_stark_spectroscopy() {
    let start = Instant::now();
    let mut r = Report::default();
    let t = Transition::esr(-2.5);
    let ctx = context(t, 7e-3);
    let q = shift_by_rediagonalising(&sb(), 0.34, &t, E_150V);
    let w = 0.05;
    let taus = linspace(0.0, 2.56e-3, 256);
    let schedule = UddSchedule {
        pulses: 4,
        total: 6e-3,
    };

    let narrow = Ensemble::new(
        EnsembleDistribution {
            field_scale_fwhm: w,
            linear_stark_std: 100e3,
            ..Default::default()
        },
        11,
        2000,
    );
    let bipolar = udd_stark_experiment(&ctx, 150.0, true, &taus, schedule, &narrow).unwrap();
    let spectrum = fft_distribution(&bipolar, Window::None).unwrap();
    let peak = spectrum.peak_frequency();
    r.check(
        (peak - q).abs() <= spectrum.resolution,
        format!(
            "FFT peak {peak:.0} Hz vs {q:.0} Hz (bin {:.0} Hz)",
            spectrum.resolution
        ),
    );
    // s = 1 + x with Lorentzian x of FWHM w shifts by q (1 + x)^2 ~ q + 2 q x
    let expected = 2.0 * q.abs() * w;
    match spectrum.fit(LineshapeModel::Lorentzian) {
        Ok(fit) => r.check(
            (fit.fwhm - expected).abs() <= 0.1 * expected,
            format!(
                "Lorentzian FWHM {:.0} Hz vs {expected:.0} Hz (10%)",
                fit.fwhm
            ),
        ),
        Err(e) => r.check(false, format!("fit failed: {e}")),
    }

    let unipolar = udd_stark_experiment(&ctx, 150.0, false, &taus, schedule, &narrow).unwrap();
    let period = 1.0 / q.abs();
    let first_below = taus
        .iter()
        .zip(&unipolar.values)
        .find(|(_, v)| v.norm() < (-1.0f64).exp())
        .map(|(t, _)| *t);
    r.check(
        first_below.is_some_and(|t| t <= period),
        format!(
            "unipolar |signal| < 1/e at {:?} us, period {:.1} us",
            first_below.map(|t| (t * 1e6).round()),
            period * 1e6
        ),
    );
    r.finish(
        4,
        "UDD Stark spectroscopy",
        start.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_5_phase_gate() {
    let start = Instant::now();
    let mut r = Report::default();
    let t = Transition::nmr(0.5, -0.5);
    let ctx = context(t, f64::INFINITY);
    let gate = PhaseGate {
        volts: 150.0,
        mode: VoltageMode::BipolarPair,
        rabi: 500.0,
        hard_rabi: 30e3,
    };
    // the inhomogeneities the Hahn echo and the bipolar pair refocus
    let ensemble = Ensemble::new(
        EnsembleDistribution {
            magnetic_fwhm: 500.0,
            linear_stark_std: 10e3,
            ..Default::default()
        },
        2,
        200,
    );
    let tau_rf = linspace(0.0, 2e-3, 41);
    let map = phase_gate_map(&ctx, &tau_rf, &[0.0, 0.2e-3], &gate, &ensemble).unwrap();
    let span = |v: &[f64]| {
        v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - v.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let contrast = span(&map.rf_cut(0));
    let pinned = span(&map.rf_cut(1));
    r.check(
        pinned < 0.05 * contrast,
        format!("tau_V 0.2 ms peak-to-peak {pinned:.4} vs Rabi contrast {contrast:.4} (< 5%)"),
    );

    // single nominal donor; tau_RF = 0.5 ms puts the spin on the equator
    let tau_v = linspace(0.0, 2e-3, 2001);
    let cut = phase_gate_map(&ctx, &[0.5e-3], &tau_v, &gate, &Ensemble::nominal())
        .unwrap()
        .voltage_cut(0);
    let mean = cut.iter().sum::<f64>() / cut.len() as f64;
    let crossings: Vec<f64> = (1..cut.len())
        .filter_map(|k| {
            let (a, b) = (cut[k - 1] - mean, cut[k] - mean);
            (a * b < 0.0).then(|| tau_v[k - 1] + (tau_v[k] - tau_v[k - 1]) * a / (a - b))
        })
        .collect();
    let period = if crossings.len() >= 3 {
        2.0 * (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64
    } else {
        f64::NAN
    };
    r.check(
        (period - 0.4e-3).abs() <= 0.02 * 0.4e-3,
        format!("tau_V period {:.4} ms (0.4 ms +- 2%)", period * 1e3),
    );
    r.finish(5, "phase gate", start.elapsed(), Duration::from_secs(60));
}

#[test]
fn criterion_6_detuning_gate() {
    let start = Instant::now();
    let mut r = Report::default();
    let t = Transition::nmr(0.5, -0.5);
    let ctx = context(t, f64::INFINITY);
    let (f1, delta) = (500.0, 2500.0);

    let volts = ctx.voltage_for_shift(delta);
    let taus = linspace(0.0, 4e-3, 4001);
    let on = detuned_rabi(
        &ctx,
        &taus,
        VoltageWindow::AlwaysOn,
        VoltageWaveform::new(volts, VoltageMode::Unipolar),
        f1,
        &Ensemble::nominal(),
    )
    .unwrap();
    let amplitude = on.values.iter().map(|e| e + 1.0).fold(0.0, f64::max);
    let oracle = f1 * f1 / (f1 * f1 + delta * delta);
    r.check(
        (amplitude - 0.0385).abs() <= 1e-3 && (amplitude - oracle).abs() <= 1e-3,
        format!(
            "always-on amplitude {amplitude:.5} (0.0385 +- 1e-3; f1^2/(f1^2+D^2) = {oracle:.5})"
        ),
    );

    let ensemble = Ensemble::new(
        EnsembleDistribution {
            magnetic_fwhm: 500.0,
            field_scale_fwhm: 0.05,
            linear_stark_std: 10e3,
        },
        2,
        400,
    );
    let offsets = linspace(-6e3, 6e3, 241);
    let width = |mode: VoltageMode| -> f64 {
        let line = endor_spectrum(
            &ctx,
            &offsets,
            Some(VoltageWaveform::new(150.0, mode)),
            0.5 / f1,
            f1,
            &ensemble,
        )
        .unwrap();
        let lifted: Vec<f64> = line.values.iter().map(|v| v + 1.0).collect();
        fit_lineshape(&offsets, &lifted, LineshapeModel::Lorentzian).map_or(f64::NAN, |f| f.fwhm)
    };
    let unipolar = width(VoltageMode::Unipolar);
    let squares: Vec<f64> = [1e3, 2e3, 4e3, 8e3]
        .into_iter()
        .map(|f| width(VoltageMode::SquareWave(f)))
        .collect();
    r.check(
        squares[3] < unipolar,
        format!(
            "8 kHz width {:.0} Hz < unipolar {unipolar:.0} Hz",
            squares[3]
        ),
    );
    r.check(
        squares.windows(2).all(|p| p[1] < p[0]),
        format!(
            "widths at 1/2/4/8 kHz: {:.0}/{:.0}/{:.0}/{:.0} Hz decreasing",
            squares[0], squares[1], squares[2], squares[3]
        ),
    );
    r.finish(6, "detuning gate", start.elapsed(), Duration::from_secs(60));
}

fn pauli(i: usize) -> Matrix2<Complex64> {
    let (o, z, j) = (
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 1.0),
    );
    match i {
        0 => Matrix2::new(o, z, z, o),
        1 => Matrix2::new(z, o, o, z),
        2 => Matrix2::new(z, -j, j, z),
        _ => Matrix2::new(o, z, z, -o),
    }
}

/// `sum chi_mn P_m rho P_n`, the chi-matrix action written out directly.
fn apply_chi(chi: &ProcessMatrix, rho: &Matrix2<Complex64>) -> Matrix2<Complex64> {
    let mut out = Matrix2::zeros();
    for m in 0..4 {
        for n in 0..4 {
            out += pauli(m) * rho * pauli(n) * chi.0[(m, n)];
        }
    }
    out
}

/// Kraus operators of a random channel: the blocks of a random 2k x 2
/// isometry.
fn random_kraus(rng: &mut ChaCha8Rng, k: usize) -> Vec<Matrix2<Complex64>> {
    let mut cols: Vec<Vec<Complex64>> = (0..2)
        .map(|_| {
            (0..2 * k)
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect()
        })
        .collect();
    // Gram-Schmidt
    let dot = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    };
    let n0 = dot(&cols[0], &cols[0]).re.sqrt();
    cols[0].iter_mut().for_each(|x| *x /= n0);
    let p = dot(&cols[0], &cols[1]);
    let c0 = cols[0].clone();
    cols[1].iter_mut().zip(&c0).for_each(|(x, y)| *x -= p * y);
    let n1 = dot(&cols[1], &cols[1]).re.sqrt();
    cols[1].iter_mut().for_each(|x| *x /= n1);
    (0..k)
        .map(|b| {
            Matrix2::new(
                cols[0][2 * b],
                cols[1][2 * b],
                cols[0][2 * b + 1],
                cols[1][2 * b + 1],
            )
        })
        .collect()
}

#[test]
fn criterion_7_tomography() {
    let start = Instant::now();
    let mut r = Report::default();
    let inputs = cardinal_states();
    let ctx = context(Transition::nmr(0.5, -0.5), f64::INFINITY);
    let gate = RefocusedGate {
        rabi: 500.0,
        hard_rabi: 30e3,
        volts: 150.0,
        square_freq: 8e3,
        refocus: true,
    };

    let noiseless = gate_process(&ctx, false, &gate, &Ensemble::nominal()).unwrap();
    let f = process_fidelity(&noiseless, &ProcessMatrix::pi_y());
    r.check(
        (f - 1.0).abs() < 1e-9,
        format!("noiseless pi_Y fidelity 1 - {:.1e}", 1.0 - f),
    );
    let identity = process_matrix(&inputs, &inputs).unwrap();
    let f = process_fidelity(&identity, &ProcessMatrix::pi_y());
    r.check(f.abs() < 1e-9, format!("identity vs pi_Y {f:.1e}"));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let kraus = random_kraus(&mut rng, 1 + i % 3);
        let channel = |rho: &Matrix2<Complex64>| -> Matrix2<Complex64> {
            kraus.iter().map(|k| k * rho * k.adjoint()).sum()
        };
        let outputs: Vec<QubitState> = inputs.iter().map(|s| QubitState(channel(&s.0))).collect();
        let chi = process_matrix(&inputs, &outputs).unwrap();
        // the reconstruction must reproduce the channel on states it never saw
        for _ in 0..4 {
            let v = [rng.random::<f64>(), rng.random(), rng.random()];
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(1.0);
            let probe = QubitState::from_bloch([v[0] / norm, v[1] / norm, v[2] / norm]).0;
            worst = worst.max((apply_chi(&chi, &probe) - channel(&probe)).norm());
        }
    }
    r.check(
        worst < 1e-8,
        format!("100 random channels, worst error {worst:.1e}"),
    );

    // magnetic spread from the 500 Hz NMR line, common random numbers across widths
    let fidelities: Vec<(f64, f64, f64, f64)> = [0.0, 250.0, 500.0, 750.0, 1000.0]
        .into_iter()
        .map(|fwhm| {
            let ens = Ensemble::new(
                EnsembleDistribution {
                    magnetic_fwhm: fwhm,
                    ..Default::default()
                },
                5,
                400,
            );
            let off = gate_process(&ctx, false, &gate, &ens).unwrap();
            let on = gate_process(&ctx, true, &gate, &ens).unwrap();
            (
                fwhm,
                process_fidelity(&off, &ProcessMatrix::pi_y()),
                process_fidelity(&on, &ProcessMatrix::identity()),
                process_fidelity(&on, &ProcessMatrix::pi_y()),
            )
        })
        .collect();
    let at_500 = fidelities[2];
    r.check(
        (0.80..=0.99).contains(&at_500.1),
        format!(
            "500 Hz line: voltage-off fidelity vs pi_Y {:.4} in [0.80, 0.99]",
            at_500.1
        ),
    );
    r.check(
        fidelities.windows(2).all(|p| p[1].1 < p[0].1),
        format!(
            "decreasing with width: {}",
            fidelities
                .iter()
                .map(|f| format!("{:.3}", f.1))
                .collect::<Vec<_>>()
                .join(" > ")
        ),
    );
    r.check(
        at_500.2 > at_500.3,
        format!(
            "voltage on: vs identity {:.4} > vs pi_Y {:.4}",
            at_500.2, at_500.3
        ),
    );
    r.finish(7, "tomography", start.elapsed(), Duration::from_secs(120));
}

/// RK4 integration of `dU/dt = -i 2 pi H U` with `H` in Hz.
fn stepped_unitary(
    delta: f64,
    rabi: f64,
    phase: f64,
    tau: f64,
    steps: usize,
) -> Matrix2<Complex64> {
    let half = |x: f64| Complex64::new(0.5 * x, 0.0);
    let h = pauli(3) * half(delta)
        + (pauli(1) * half(phase.cos()) + pauli(2) * half(phase.sin())) * Complex64::new(rabi, 0.0);
    let a = h * Complex64::new(0.0, -2.0 * PI);
    let dt = Complex64::new(tau / steps as f64, 0.0);
    let mut u = Matrix2::identity();
    for _ in 0..steps {
        let k1 = a * u;
        let k2 = a * (u + k1 * (dt * 0.5));
        let k3 = a * (u + k2 * (dt * 0.5));
        let k4 = a * (u + k3 * dt);
        u += (k1 + (k2 + k3) * Complex64::new(2.0, 0.0) + k4) * (dt / 6.0);
    }
    u
}

#[test]
fn criterion_8_engine_oracle() {
    let start = Instant::now();
    let mut r = Report::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let delta = rng.random_range(-5e3..5e3);
        let rabi = rng.random_range(0.0..5e3);
        let phase = rng.random_range(0.0..2.0 * PI);
        let tau = rng.random_range(0.0..2e-3);
        let bloch = {
            let v = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0f64),
            ];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(1.0);
            [v[0] / n, v[1] / n, v[2] / n]
        };
        let rho = QubitState::from_bloch(bloch);
        let closed = propagate_pulse(&rho, delta, rabi, phase, tau).bloch();
        let u = stepped_unitary(delta, rabi, phase, tau, 10_000);
        let stepped = QubitState(u * rho.0 * u.adjoint()).bloch();
        for k in 0..3 {
            worst = worst.max((closed[k] - stepped[k]).abs());
        }
    }
    r.check(
        worst < 1e-6,
        format!("1000 random pulses, worst Bloch difference {worst:.1e} (< 1e-6)"),
    );
    r.finish(
        8,
        "engine oracle equivalence",
        start.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_9_parser() {
    let start = Instant::now();
    let mut r = Report::default();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../programs");
    let mut corpus: Vec<(String, String)> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension()? == "pulse").then(|| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    std::fs::read_to_string(&p).unwrap(),
                )
            })
        })
        .collect();
    corpus.sort();

    let mut round_trips = 0;
    for (name, text) in &corpus {
        let ok = parse_program(text).is_ok_and(|doc| {
            let canonical = doc.serialize();
            parse_program(&canonical)
                .is_ok_and(|again| again == doc && again.serialize() == canonical)
        });
        if ok {
            round_trips += 1;
        } else {
            r.check(false, format!("{name} does not round-trip"));
        }
    }
    let figures = ["fig1b", "fig2c", "fig3c", "fig3def", "fig4b"]
        .iter()
        .all(|f| corpus.iter().any(|(n, _)| n == &format!("{f}.pulse")));
    r.check(
        corpus.len() >= 20 && figures && round_trips == corpus.len(),
        format!(
            "{round_trips}/{} programs round-trip, figure presets present: {figures}",
            corpus.len()
        ),
    );

    // half pure noise, half mutations of valid programs
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut crashes = 0;
    let mut accepted = 0;
    for i in 0..100_000 {
        let bytes: Vec<u8> = if i % 2 == 0 {
            let mut b = vec![0u8; rng.random_range(0..200)];
            rng.fill_bytes(&mut b);
            b
        } else {
            let mut b = corpus[i % corpus.len()].1.as_bytes().to_vec();
            for _ in 0..rng.random_range(1..6) {
                let at = rng.random_range(0..=b.len());
                match rng.random_range(0..3) {
                    0 if at < b.len() => b[at] = rng.random(),
                    1 if at < b.len() => {
                        b.remove(at);
                    }
                    _ => b.insert(at, rng.random()),
                }
            }
            b
        };
        match std::panic::catch_unwind(|| parse_program_bytes(&bytes)) {
            Ok(Ok(_)) => accepted += 1,
            Ok(Err(e)) => {
                if e.line == 0 || e.column == 0 {
                    crashes += 1;
                }
            }
            Err(_) => crashes += 1,
        }
    }
    r.check(
        crashes == 0,
        format!("1e5 fuzz inputs: {crashes} crashes or unlocated errors, {accepted} accepted"),
    );
    r.finish(
        9,
        "parser fuzz and round trip",
        start.elapsed(),
        Duration::from_secs(60),
    );
}
