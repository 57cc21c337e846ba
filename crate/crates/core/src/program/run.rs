use super::units::Dimension;
use super::{ConfigValue, Program, Statement, WaveMode};
use crate::engine::{
    execute, Bandwidth, Channel, DrivePulse, ExperimentContext, PulseEvent, QubitState,
    VoltageEvent, VoltageMode, VoltageWaveform,
};
use crate::error::{Error, Result};
use crate::output::Table;
use crate::sequences::{donor_mean, HARD_RABI};
use crate::spin::{SpinSystem, Transition};
use crate::stark::{Ensemble, EnsembleDistribution};

/// Physical setup described by a program's config block, defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub context: ExperimentContext,
    pub ensemble: Ensemble,
    pub rf_rabi: f64,
    pub mw_rabi: f64,
    pub hard_rabi: f64,
    pub initial: QubitState,
}

/// Command-line overrides of the config block.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    pub donors: Option<usize>,
    pub seed: Option<u64>,
}

impl Program {
    /// Numeric value of a key in base units; `None` when absent.
    pub fn number(&self, key: &str) -> Option<f64> {
        match self.config.get(key)? {
            ConfigValue::Number(v) | ConfigValue::Quantity(v, _) => Some(*v),
            ConfigValue::Integer(n) => Some(*n as f64),
            _ => None,
        }
    }

    pub fn number_or(&self, key: &str, default: f64) -> f64 {
        self.number(key).unwrap_or(default)
    }

    pub fn integer_or(&self, key: &str, default: u64) -> u64 {
        match self.config.get(key) {
            Some(ConfigValue::Integer(n)) => *n,
            _ => default,
        }
    }

    pub fn setup(&self, options: RunOptions) -> Result<Setup> {
        let sb = SpinSystem::sb121();
        let system = SpinSystem {
            nuclear_spin: self.number_or("nuclear_spin", sb.nuclear_spin),
            hyperfine: self.number_or("hyperfine", sb.hyperfine),
            electron_g: self.number_or("electron_g", sb.electron_g),
            nuclear_gamma: self.number_or("nuclear_gamma", sb.nuclear_gamma),
            eta_a: self.number_or("eta_a", sb.eta_a),
            eta_g: self.number_or("eta_g", sb.eta_g),
        };
        let transition = match self.config.get("transition") {
            Some(ConfigValue::Transition(t)) => *t,
            _ => Transition::nmr(0.5, -0.5),
        };
        let b0 = self.number_or("b0", 0.34);
        if !(b0 >= 0.0) {
            return Err(Error::Domain(format!(
                "B0 must be non-negative, got {b0} T"
            )));
        }
        let context = ExperimentContext::new(
            system,
            b0,
            transition,
            self.number_or("thickness", 1710.0),
            self.number_or("t2", f64::INFINITY),
        )?;
        let distribution = EnsembleDistribution {
            magnetic_fwhm: self.number_or("magnetic_fwhm", 0.0),
            field_scale_fwhm: self.number_or("field_scale_fwhm", 0.0),
            linear_stark_std: self.number_or("linear_stark_std", 0.0),
        };
        if [
            distribution.magnetic_fwhm,
            distribution.field_scale_fwhm,
            distribution.linear_stark_std,
        ]
        .iter()
        .any(|w| !(*w >= 0.0 && w.is_finite()))
        {
            return Err(Error::Domain(format!(
                "ensemble widths must be finite and non-negative: {distribution:?}"
            )));
        }
        let donors = options
            .donors
            .unwrap_or(self.integer_or("donors", 1) as usize);
        if donors == 0 {
            return Err(Error::Domain("donor count must be at least 1".into()));
        }
        let seed = options.seed.unwrap_or(self.integer_or("seed", 0));
        let initial = match self.config.get("initial") {
            Some(ConfigValue::State(a)) => QubitState::from_bloch(a.bloch()),
            _ => QubitState::ground(),
        };
        let positive = |key: &str, default: f64| {
            let v = self.number_or(key, default);
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Domain(format!("{key} must be positive, got {v}")))
            }
        };
        Ok(Setup {
            context,
            ensemble: Ensemble::new(distribution, seed, donors),
            rf_rabi: positive("rf_rabi", 500.0)?,
            mw_rabi: positive("mw_rabi", 1e6)?,
            hard_rabi: positive("hard_rabi", HARD_RABI)?,
            initial,
        })
    }

    /// Engine events at one sweep value.
    pub fn events(&self, setup: &Setup, sweep_value: Option<f64>) -> Result<Vec<PulseEvent>> {
        let wave = |spec: &super::WaveSpec| -> Result<VoltageWaveform> {
            let mode = match &spec.mode {
                WaveMode::Unipolar => VoltageMode::Unipolar,
                WaveMode::Bipolar => VoltageMode::BipolarPair,
                WaveMode::Square(f) => {
                    let f = f.resolve(sweep_value);
                    if !(f > 0.0 && f.is_finite()) {
                        return Err(Error::Domain(format!(
                            "square-wave frequency must be positive, got {f}"
                        )));
                    }
                    VoltageMode::SquareWave(f)
                }
            };
            Ok(VoltageWaveform::new(
                spec.amplitude.resolve(sweep_value),
                mode,
            ))
        };
        self.sequence
            .iter()
            .map(|st| {
                Ok(match st {
                    Statement::Pulse(p) => {
                        let rabi = match (&p.rabi, p.hard, p.channel) {
                            (Some(r), _, _) => r.resolve(sweep_value),
                            (None, true, _) => setup.hard_rabi,
                            (None, false, Channel::Rf) => setup.rf_rabi,
                            (None, false, Channel::Mw) => setup.mw_rabi,
                        };
                        if !(rabi > 0.0 && rabi.is_finite()) {
                            return Err(Error::Domain(format!(
                                "Rabi frequency must be positive, got {rabi}"
                            )));
                        }
                        PulseEvent::Pulse(DrivePulse {
                            channel: p.channel,
                            rabi,
                            phase: p.phase.map_or(0.0, |ph| ph.radians()),
                            duration: p.duration.resolve(sweep_value),
                            bandwidth: if p.hard {
                                Bandwidth::Hard
                            } else {
                                Bandwidth::Selective
                            },
                            offset: p.offset.as_ref().map_or(0.0, |o| o.resolve(sweep_value)),
                            voltage: p.voltage.as_ref().map(wave).transpose()?,
                        })
                    }
                    Statement::Voltage { wave: w, duration } => PulseEvent::Voltage(VoltageEvent {
                        waveform: wave(w)?,
                        duration: duration.resolve(sweep_value),
                    }),
                    Statement::Delay(d) => PulseEvent::Delay(d.resolve(sweep_value)),
                    Statement::Readout => PulseEvent::Readout,
                })
            })
            .collect()
    }

    pub fn sweep_points(&self) -> Vec<Option<f64>> {
        match &self.sweep {
            Some(sw) => sw.values().into_iter().map(Some).collect(),
            None => vec![None],
        }
    }

    pub fn sweep_dimension(&self) -> Option<Dimension> {
        self.sweep.as_ref().map(|s| s.dimension)
    }
}

/// One ensemble-averaged readout of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRecord {
    pub point: usize,
    pub sweep_value: Option<f64>,
    /// Index of the `readout` statement; a program without readouts reports
    /// its final state as readout 0.
    pub readout: usize,
    pub donors: usize,
    pub state: QubitState,
}

/// Runs every sweep point over the ensemble.
pub fn run_program(doc: &Program, options: RunOptions) -> Result<Vec<RunRecord>> {
    let setup = doc.setup(options)?;
    let donors = setup.ensemble.donors();
    let mut records = Vec::new();
    for (point, value) in doc.sweep_points().into_iter().enumerate() {
        let events = doc.events(&setup, value)?;
        let states = donor_mean(&donors, |donor| {
            let run = execute(&events, setup.initial, &setup.context, donor)?;
            Ok(if run.readouts.is_empty() {
                vec![run.final_state]
            } else {
                run.readouts
            })
        })?;
        records.extend(
            states
                .into_iter()
                .enumerate()
                .map(|(readout, state)| RunRecord {
                    point,
                    sweep_value: value,
                    readout,
                    donors: donors.len(),
                    state,
                }),
        );
    }
    Ok(records)
}

/// One row per record; `sweep_value` is NaN for unswept programs.
pub fn records_table(records: &[RunRecord]) -> Table {
    let mut table = Table::new(
        "run",
        &[
            "point",
            "sweep_value",
            "readout",
            "donors",
            "x",
            "y",
            "z",
            "echo",
        ],
    );
    for r in records {
        let [x, y, z] = r.state.bloch();
        table.push(vec![
            r.point as f64,
            r.sweep_value.unwrap_or(f64::NAN),
            r.readout as f64,
            r.donors as f64,
            x,
            y,
            z,
            r.state.flip_probability().clamp(0.0, 1.0) - 1.0,
        ]);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::super::parse_program;
    use super::*;

    #[test]
    fn minimal_program_runs() {
        let doc = parse_program("config\nend\nsequence\ndelay 1ms\nend\n").unwrap();
        let recs = run_program(&doc, RunOptions::default()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].state, QubitState::ground());
        assert_eq!(recs[0].donors, 1);
    }

    #[test]
    fn swept_rabi_program() {
        let doc = parse_program(
            "config\n rf_rabi 500Hz\nend\nsequence\n pulse rf $t\n readout\nend\n\
             sweep\n t from 0ms to 2ms steps 5\nend\n",
        )
        .unwrap();
        let recs = run_program(&doc, RunOptions::default()).unwrap();
        assert_eq!(recs.len(), 5);
        for r in &recs {
            let t = r.sweep_value.unwrap();
            let p = (std::f64::consts::PI * 500.0 * t).sin().powi(2);
            assert!((r.state.flip_probability() - p).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_channel_is_runtime_error() {
        let doc = parse_program("config\nend\nsequence\npulse mw 1us\nend\n").unwrap();
        assert!(matches!(
            run_program(&doc, RunOptions::default()),
            Err(Error::Runtime(_))
        ));
    }

    #[test]
    fn overrides_and_readouts() {
        let doc = parse_program(
            "config\n magnetic_fwhm 500Hz\n donors 3\n initial +x\nend\n\
             sequence\n readout\n delay 1ms\n readout\nend\n",
        )
        .unwrap();
        let opts = RunOptions {
            donors: Some(7),
            seed: Some(3),
        };
        let recs = run_program(&doc, opts).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].donors, 7);
        assert_eq!(recs[0].state.bloch()[0], 1.0);
        assert!(recs[1].state.bloch()[0] < 1.0);
        assert_eq!(recs, run_program(&doc, opts).unwrap());
    }

    #[test]
    fn record_rows() {
        let doc = parse_program("config\nend\nsequence\n pulse rf 1ms\nend\n").unwrap();
        let t = records_table(&run_program(&doc, RunOptions::default()).unwrap());
        assert_eq!(t.rows.len(), 1);
        assert!(t.rows[0][1].is_nan());
        assert!((t.column("echo").unwrap()[0] - 0.0).abs() < 1e-12);
        assert!((t.column("z").unwrap()[0] + 1.0).abs() < 1e-12);
    }
}
