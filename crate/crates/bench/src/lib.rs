//! Fixtures shared by the benchmarks.

use starksim_core::engine::ExperimentContext;
use starksim_core::spin::{SpinSystem, Transition};
use starksim_core::stark::{Ensemble, EnsembleDistribution};

/// The m_S = +1/2, m_I -1/2 <-> +1/2 NMR line of Sb-121 at 0.34 T.
pub fn nmr_context() -> ExperimentContext {
    ExperimentContext::new(
        SpinSystem::sb121(),
        0.34,
        Transition::nmr(0.5, -0.5),
        1710.0,
        f64::INFINITY,
    )
    .expect("valid context")
}

/// The m_I = -5/2 ESR line of Sb-121 at 0.34 T.
pub fn esr_context() -> ExperimentContext {
    ExperimentContext::new(
        SpinSystem::sb121(),
        0.34,
        Transition::esr(-2.5),
        1710.0,
        7e-3,
    )
    .expect("valid context")
}

pub fn broadened(count: usize) -> Ensemble {
    let dist = EnsembleDistribution {
        magnetic_fwhm: 500.0,
        field_scale_fwhm: 0.05,
        linear_stark_std: 10e3,
    };
    Ensemble::new(dist, 7, count)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
        .collect()
}

/// A swept program exercising every statement kind.
pub const PROGRAM: &str = "\
config
  b0 0.34T
  donors 64
  magnetic_fwhm 500Hz
  linear_stark_std 10kHz/(V/um)
  rf_rabi 500Hz
  transition nmr ms=+1/2 mi=-1/2
end
sequence
  pulse rf 0.5ms phase +x   # half of the rotation
  voltage 150V $tv bipolar
  pulse rf 33.3us hard
  delay $tv
  pulse rf 0.5ms
  readout
end
sweep
  tv from 0ms to 0.8ms steps 17
end
";
