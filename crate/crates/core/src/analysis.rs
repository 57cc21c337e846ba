//! Ensemble averaging, Fourier analysis of phase traces and lineshape fits.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Add;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use num_traits::Zero;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Zero-padding factor applied before the FFT.
pub const ZERO_PADDING: usize = 4;
pub const FIT_MAX_ITERATIONS: usize = 200;
pub const FIT_TOLERANCE: f64 = 1e-10;

/// Sum with pairwise splitting; the result depends only on the input order.
pub fn pairwise_sum<T: Copy + Add<Output = T> + Zero>(xs: &[T]) -> T {
    if xs.len() <= 8 {
        return xs.iter().fold(T::zero(), |acc, &x| acc + x);
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// A readout trace: one ordinate per abscissa point, with the number of
/// donors averaged into each point.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T = f64> {
    pub abscissa_name: String,
    pub abscissa: Vec<f64>,
    pub values: Vec<T>,
    pub donors: Vec<usize>,
}

impl<T> Trace<T> {
    pub fn new(name: impl Into<String>, abscissa: Vec<f64>, values: Vec<T>, donors: usize) -> Self {
        assert_eq!(
            abscissa.len(),
            values.len(),
            "trace axes must have equal length"
        );
        let n = abscissa.len();
        Self {
            abscissa_name: name.into(),
            abscissa,
            values,
            donors: vec![donors; n],
        }
    }

    pub fn len(&self) -> usize {
        self.abscissa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abscissa.is_empty()
    }
}

/// Pointwise mean of traces sharing one abscissa.
pub fn ensemble_average<T>(traces: &[Trace<T>]) -> Result<Trace<T>>
where
    T: Copy + Add<Output = T> + Zero + std::ops::Mul<f64, Output = T>,
{
    let first = traces
        .first()
        .ok_or_else(|| Error::Shape("no traces to average".into()))?;
    for t in traces {
        if t.abscissa != first.abscissa || t.abscissa_name != first.abscissa_name {
            return Err(Error::Shape(format!(
                "abscissa mismatch: '{}' ({} points) vs '{}' ({} points)",
                first.abscissa_name,
                first.len(),
                t.abscissa_name,
                t.len()
            )));
        }
    }
    let scale = 1.0 / traces.len() as f64;
    let mut column = Vec::with_capacity(traces.len());
    let values = (0..first.len())
        .map(|k| {
            column.clear();
            column.extend(traces.iter().map(|t| t.values[k]));
            pairwise_sum(&column) * scale
        })
        .collect();
    let donors = (0..first.len())
        .map(|k| traces.iter().map(|t| t.donors[k]).sum())
        .collect();
    Ok(Trace {
        abscissa_name: first.abscissa_name.clone(),
        abscissa: first.abscissa.clone(),
        values,
        donors,
    })
}

/// Apodization applied to a time signal before transforming.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Window {
    #[default]
    None,
    /// Multiply by `exp(-t / time_constant)`.
    Exponential { time_constant: f64 },
}

/// Complex spectrum on a uniform, increasing frequency axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Hz.
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<Complex64>,
    /// `1 / (N dt)` of the unpadded record, Hz.
    pub resolution: f64,
}

impl Spectrum {
    pub fn real(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.re).collect()
    }

    pub fn spacing(&self) -> f64 {
        self.frequencies[1] - self.frequencies[0]
    }

    /// `sum |X|^2 df`.
    pub fn energy(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.spacing()
    }

    /// Frequency of the largest real-part bin.
    pub fn peak_frequency(&self) -> f64 {
        let (k, _) = self
            .amplitudes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.re.total_cmp(&b.1.re))
            .expect("non-empty spectrum");
        self.frequencies[k]
    }

    pub fn fit(&self, model: LineshapeModel) -> Result<LineshapeFit> {
        fit_lineshape(&self.frequencies, &self.real(), model)
    }
}

/// Uniform sample spacing of a time axis.
fn uniform_step(t: &[f64]) -> Result<f64> {
    if t.len() < 2 {
        return Err(Error::Domain("need at least two samples".into()));
    }
    let dt = t[1] - t[0];
    if !(dt > 0.0) {
        return Err(Error::Domain("time axis must be increasing".into()));
    }
    for (k, &tk) in t.iter().enumerate() {
        let expected = t[0] + k as f64 * dt;
        if (tk - expected).abs() > 1e-6 * dt {
            return Err(Error::Domain(format!(
                "time axis is not uniform at sample {k}: {tk} vs {expected}"
            )));
        }
    }
    Ok(dt)
}

/// Time signal as transformed: windowed, with the first sample half-weighted
/// so a one-sided decay transforms to a pure absorption line.
pub fn prepared_signal(trace: &Trace<Complex64>, window: Window) -> Result<Vec<Complex64>> {
    uniform_step(&trace.abscissa)?;
    let t0 = trace.abscissa[0];
    Ok(trace
        .abscissa
        .iter()
        .zip(&trace.values)
        .enumerate()
        .map(|(k, (&t, &x))| {
            let w = match window {
                Window::None => 1.0,
                Window::Exponential { time_constant } => (-(t - t0) / time_constant).exp(),
            };
            let half = if k == 0 { 0.5 } else { 1.0 };
            x * (w * half)
        })
        .collect())
}

/// Continuous-normalised discrete Fourier transform `X(f) = dt sum x(t) e^{-i 2 pi f t}`
/// of a uniformly sampled complex signal, zero padded and centred.
pub fn fft_distribution(trace: &Trace<Complex64>, window: Window) -> Result<Spectrum> {
    let dt = uniform_step(&trace.abscissa)?;
    let n = trace.len();
    let m = n * ZERO_PADDING;
    let mut buf = prepared_signal(trace, window)?;
    buf.resize(m, Complex64::zero());
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);

    let t0 = trace.abscissa[0];
    let df = 1.0 / (m as f64 * dt);
    let half = m / 2;
    let mut frequencies = Vec::with_capacity(m);
    let mut amplitudes = Vec::with_capacity(m);
    for j in 0..m {
        // ascending: bins m/2.. are the negative frequencies
        let k = (j + m - half) % m;
        let f = (j as f64 - half as f64) * df;
        let phase = Complex64::from_polar(1.0, -2.0 * PI * f * t0);
        frequencies.push(f);
        amplitudes.push(buf[k] * dt * phase);
    }
    Ok(Spectrum {
        frequencies,
        amplitudes,
        resolution: 1.0 / (n as f64 * dt),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineshapeModel {
    Lorentzian,
    Gaussian,
}

impl fmt::Display for LineshapeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Lorentzian => "lorentzian",
            Self::Gaussian => "gaussian",
        })
    }
}

const GAUSS_K: f64 = 4.0 * std::f64::consts::LN_2;

impl LineshapeModel {
    /// Value and gradient with respect to `(center, fwhm, amplitude)`.
    fn eval(self, f: f64, p: &Vector3<f64>) -> (f64, Vector3<f64>) {
        let (c, w, a) = (p[0], p[1], p[2]);
        let d = f - c;
        match self {
            Self::Lorentzian => {
                let g = 0.5 * w;
                let den = d * d + g * g;
                let shape = g * g / den;
                let v = a * shape;
                let dc = a * g * g * 2.0 * d / (den * den);
                let dw = a * g * d * d / (den * den);
                (v, Vector3::new(dc, dw, shape))
            }
            Self::Gaussian => {
                let e = (-GAUSS_K * d * d / (w * w)).exp();
                let v = a * e;
                let dc = v * 2.0 * GAUSS_K * d / (w * w);
                let dw = v * 2.0 * GAUSS_K * d * d / (w * w * w);
                (v, Vector3::new(dc, dw, e))
            }
        }
    }

    pub fn value(self, f: f64, center: f64, fwhm: f64, amplitude: f64) -> f64 {
        self.eval(f, &Vector3::new(center, fwhm, amplitude)).0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineshapeFit {
    pub model: LineshapeModel,
    pub center: f64,
    pub fwhm: f64,
    pub amplitude: f64,
    /// Euclidean norm of the final residual vector.
    pub residual_norm: f64,
    pub iterations: usize,
    /// Residual norm after the initial guess and each accepted step.
    pub residual_history: Vec<f64>,
}

fn initial_guess(x: &[f64], y: &[f64]) -> Vector3<f64> {
    let (k, &peak) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty data");
    let half = 0.5 * peak;
    let crossing = |range: &mut dyn Iterator<Item = usize>| {
        let mut prev = k;
        for j in range {
            if y[j] < half {
                let t = (y[prev] - half) / (y[prev] - y[j]);
                return Some((x[prev] + t * (x[j] - x[prev]) - x[k]).abs());
            }
            prev = j;
        }
        None
    };
    let left = crossing(&mut (0..k).rev());
    let right = crossing(&mut (k + 1..x.len()));
    let span = x[x.len() - 1] - x[0];
    let fwhm = match (left, right) {
        (Some(l), Some(r)) => l + r,
        (Some(h), None) | (None, Some(h)) => 2.0 * h,
        (None, None) => 0.1 * span,
    };
    let fwhm = if fwhm > 0.0 {
        fwhm
    } else {
        (x[1] - x[0]).abs()
    };
    Vector3::new(x[k], fwhm, peak)
}

/// Damped least-squares fit of a single line with analytic Jacobians,
/// initialised from the peak bin and its half-maximum crossings.
pub fn fit_lineshape(x: &[f64], y: &[f64], model: LineshapeModel) -> Result<LineshapeFit> {
    if x.len() != y.len() || x.len() < 4 {
        return Err(Error::Shape(format!(
            "need matching axes with >= 4 points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let mut sorted: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let peak = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 5.0 * median) {
        return Err(Error::Fit {
            message: format!("no resolvable peak (max {peak:.3e} <= 5 x median {median:.3e})"),
            iterations: 0,
            residual: f64::NAN,
        });
    }

    let cost = |p: &Vector3<f64>| -> f64 {
        x.iter()
            .zip(y)
            .map(|(&f, &v)| (model.eval(f, p).0 - v).powi(2))
            .sum()
    };
    let mut p = initial_guess(x, y);
    let mut current = cost(&p);
    let mut history = vec![current.sqrt()];
    let mut lambda = -1.0;

    for iteration in 1..=FIT_MAX_ITERATIONS {
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for (&f, &v) in x.iter().zip(y) {
            let (m, g) = model.eval(f, &p);
            jtj += g * g.transpose();
            jtr += g * (m - v);
        }
        if lambda < 0.0 {
            lambda = 1e-3 * jtj.diagonal().max();
        }
        let mut damped = jtj;
        for i in 0..3 {
            damped[(i, i)] += lambda * jtj[(i, i)].max(f64::MIN_POSITIVE);
        }
        let step = damped.lu().solve(&(-jtr)).unwrap_or_else(Vector3::zeros);
        let width = p[1].abs();
        let change = (step[0].abs() / width)
            .max(step[1].abs() / width)
            .max(step[2].abs() / p[2].abs().max(f64::MIN_POSITIVE));
        let trial = p + step;
        let trial_cost = if trial[1] > 0.0 {
            cost(&trial)
        } else {
            f64::INFINITY
        };
        if trial_cost < current {
            p = trial;
            current = trial_cost;
            history.push(current.sqrt());
            lambda = (lambda * 0.3).max(1e-15);
        } else {
            lambda *= 4.0;
        }
        if change < FIT_TOLERANCE {
            return Ok(LineshapeFit {
                model,
                center: p[0],
                fwhm: p[1],
                amplitude: p[2],
                residual_norm: current.sqrt(),
                iterations: iteration,
                residual_history: history,
            });
        }
    }
    Err(Error::Fit {
        message: format!(
            "no convergence after {FIT_MAX_ITERATIONS} iterations (center {:.6e}, fwhm {:.6e}, amplitude {:.6e})",
            p[0], p[1], p[2]
        ),
        iterations: FIT_MAX_ITERATIONS,
        residual: current.sqrt(),
    })
}
