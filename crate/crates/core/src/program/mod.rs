//! The pulse-program text format: document model, parser, canonical
//! serializer and runner.
//!
//! ```text
//! config
//!   b0 0.34T
//!   transition nmr ms=+1/2 mi=-1/2
//! end
//! sequence
//!   pulse rf $t phase +x
//!   voltage 150V 0.2ms bipolar
//!   readout
//! end
//! sweep
//!   t from 0ms to 1ms steps 11
//! end
//! ```

mod parse;
mod run;
pub mod units;

use std::collections::BTreeMap;
use std::fmt::Write as _;

pub use parse::{parse_program, parse_program_bytes};
pub use run::{records_table, run_program, RunOptions, RunRecord, Setup};

use crate::engine::Channel;
use crate::spin::Transition;
use units::{format_number, format_quantity, Dimension};

/// Value type of a config key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigKind {
    Number,
    Integer,
    Quantity(Dimension),
    /// A time that may also be `inf`.
    Lifetime,
    Transition,
    State,
}

/// Every recognised config key.
pub const CONFIG_KEYS: &[(&str, ConfigKind)] = &[
    ("b0", ConfigKind::Quantity(Dimension::Field)),
    ("donors", ConfigKind::Integer),
    ("electron_g", ConfigKind::Number),
    ("eta_a", ConfigKind::Quantity(Dimension::StarkEta)),
    ("eta_g", ConfigKind::Quantity(Dimension::StarkEta)),
    ("field_scale_fwhm", ConfigKind::Number),
    ("hard_rabi", ConfigKind::Quantity(Dimension::Frequency)),
    ("hyperfine", ConfigKind::Quantity(Dimension::Frequency)),
    ("initial", ConfigKind::State),
    (
        "linear_stark_std",
        ConfigKind::Quantity(Dimension::LinearStark),
    ),
    ("magnetic_fwhm", ConfigKind::Quantity(Dimension::Frequency)),
    ("mw_rabi", ConfigKind::Quantity(Dimension::Frequency)),
    (
        "nuclear_gamma",
        ConfigKind::Quantity(Dimension::Gyromagnetic),
    ),
    ("nuclear_spin", ConfigKind::Number),
    ("offset_span", ConfigKind::Quantity(Dimension::Frequency)),
    ("offset_steps", ConfigKind::Integer),
    ("rf_rabi", ConfigKind::Quantity(Dimension::Frequency)),
    ("seed", ConfigKind::Integer),
    ("square_freq", ConfigKind::Quantity(Dimension::Frequency)),
    ("t2", ConfigKind::Lifetime),
    ("tau_max", ConfigKind::Quantity(Dimension::Time)),
    ("tau_rf_max", ConfigKind::Quantity(Dimension::Time)),
    ("tau_rf_steps", ConfigKind::Integer),
    ("tau_steps", ConfigKind::Integer),
    ("tau_v_max", ConfigKind::Quantity(Dimension::Time)),
    ("tau_v_steps", ConfigKind::Integer),
    ("thickness", ConfigKind::Quantity(Dimension::Length)),
    ("transition", ConfigKind::Transition),
    ("udd_pulses", ConfigKind::Integer),
    ("udd_total", ConfigKind::Quantity(Dimension::Time)),
    ("voltage", ConfigKind::Quantity(Dimension::Voltage)),
    ("window_start", ConfigKind::Quantity(Dimension::Time)),
    ("window_stop", ConfigKind::Quantity(Dimension::Time)),
];

pub fn config_kind(key: &str) -> Option<ConfigKind> {
    CONFIG_KEYS
        .iter()
        .find(|(k, _)| *k == key)
        .map(|&(_, kind)| kind)
}

/// A cardinal direction on the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    PlusX,
    MinusX,
    PlusY,
    MinusY,
    PlusZ,
    MinusZ,
}

impl Axis {
    pub fn parse(text: &str) -> Option<Self> {
        Some(match text.to_ascii_lowercase().as_str() {
            "+x" => Self::PlusX,
            "-x" => Self::MinusX,
            "+y" => Self::PlusY,
            "-y" => Self::MinusY,
            "+z" => Self::PlusZ,
            "-z" => Self::MinusZ,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::PlusX => "+x",
            Self::MinusX => "-x",
            Self::PlusY => "+y",
            Self::MinusY => "-y",
            Self::PlusZ => "+z",
            Self::MinusZ => "-z",
        }
    }

    pub fn bloch(self) -> [f64; 3] {
        match self {
            Self::PlusX => [1.0, 0.0, 0.0],
            Self::MinusX => [-1.0, 0.0, 0.0],
            Self::PlusY => [0.0, 1.0, 0.0],
            Self::MinusY => [0.0, -1.0, 0.0],
            Self::PlusZ => [0.0, 0.0, 1.0],
            Self::MinusZ => [0.0, 0.0, -1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigValue {
    Number(f64),
    Integer(u64),
    /// Base units of the dimension.
    Quantity(f64, Dimension),
    Transition(Transition),
    State(Axis),
}

impl ConfigValue {
    fn render(&self) -> String {
        match self {
            Self::Number(v) => format_number(*v),
            Self::Integer(n) => n.to_string(),
            Self::Quantity(v, _) if v.is_infinite() => "inf".into(),
            Self::Quantity(v, d) => format_quantity(*v, *d),
            Self::Transition(t) => t.to_string(),
            Self::State(a) => a.name().into(),
        }
    }
}

/// A literal or a reference to the sweep variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Literal(f64),
    Var(String),
}

impl Value {
    fn render(&self, dim: Dimension) -> String {
        match self {
            Self::Literal(v) => format_quantity(*v, dim),
            Self::Var(name) => format!("${name}"),
        }
    }

    pub fn resolve(&self, sweep_value: Option<f64>) -> f64 {
        match self {
            Self::Literal(v) => *v,
            Self::Var(_) => {
                sweep_value.expect("variables are checked against the sweep at parse time")
            }
        }
    }
}

/// RF/MW phase: a symbolic axis in the xy-plane or degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phase {
    Axis(Axis),
    Degrees(f64),
}

impl Phase {
    pub fn radians(self) -> f64 {
        let deg = match self {
            Self::Axis(Axis::PlusY) => 90.0,
            Self::Axis(Axis::MinusX) => 180.0,
            Self::Axis(Axis::MinusY) => 270.0,
            Self::Axis(_) => 0.0,
            Self::Degrees(d) => d,
        };
        deg.to_radians()
    }

    fn render(self) -> String {
        match self {
            Self::Axis(a) => a.name().into(),
            Self::Degrees(d) => format_quantity(d, Dimension::Angle),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WaveMode {
    Unipolar,
    Bipolar,
    Square(Value),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveSpec {
    pub amplitude: Value,
    pub mode: WaveMode,
}

impl WaveMode {
    fn render(&self) -> String {
        match self {
            Self::Unipolar => "unipolar".into(),
            Self::Bipolar => "bipolar".into(),
            Self::Square(f) => format!("square {}", f.render(Dimension::Frequency)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSpec {
    pub channel: Channel,
    pub duration: Value,
    pub phase: Option<Phase>,
    /// Falls back to the channel's config Rabi frequency.
    pub rabi: Option<Value>,
    pub hard: bool,
    pub offset: Option<Value>,
    pub voltage: Option<WaveSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Pulse(PulseSpec),
    Voltage { wave: WaveSpec, duration: Value },
    Delay(Value),
    Readout,
}

impl Statement {
    fn render(&self) -> String {
        match self {
            Self::Pulse(p) => {
                let channel = match p.channel {
                    Channel::Mw => "mw",
                    Channel::Rf => "rf",
                };
                let mut s = format!("pulse {channel} {}", p.duration.render(Dimension::Time));
                if let Some(ph) = p.phase {
                    let _ = write!(s, " phase {}", ph.render());
                }
                if let Some(r) = &p.rabi {
                    let _ = write!(s, " rabi {}", r.render(Dimension::Frequency));
                }
                if p.hard {
                    s.push_str(" hard");
                }
                if let Some(o) = &p.offset {
                    let _ = write!(s, " offset {}", o.render(Dimension::Frequency));
                }
                if let Some(w) = &p.voltage {
                    let _ = write!(
                        s,
                        " voltage {} {}",
                        w.amplitude.render(Dimension::Voltage),
                        w.mode.render()
                    );
                }
                s
            }
            Self::Voltage { wave, duration } => format!(
                "voltage {} {} {}",
                wave.amplitude.render(Dimension::Voltage),
                duration.render(Dimension::Time),
                wave.mode.render()
            ),
            Self::Delay(d) => format!("delay {}", d.render(Dimension::Time)),
            Self::Readout => "readout".into(),
        }
    }
}

/// `<name> from <a> to <b> steps <n>`; the points are evenly spaced and
/// include both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub variable: String,
    pub dimension: Dimension,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.from];
        }
        let n = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                let t = i as f64 / n;
                self.from + (self.to - self.from) * t
            })
            .collect()
    }
}

/// A parsed program.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub config: BTreeMap<String, ConfigValue>,
    pub sequence: Vec<Statement>,
    pub sweep: Option<Sweep>,
}

impl Program {
    /// Canonical text: sorted config keys, canonical units, one blank line
    /// between blocks.
    pub fn serialize(&self) -> String {
        let mut out = String::from("config\n");
        for (key, value) in &self.config {
            let _ = writeln!(out, "  {key} {}", value.render());
        }
        out.push_str("end\n\nsequence\n");
        for st in &self.sequence {
            let _ = writeln!(out, "  {}", st.render());
        }
        out.push_str("end\n");
        if let Some(sw) = &self.sweep {
            let _ = write!(
                out,
                "\nsweep\n  {} from {} to {} steps {}\nend\n",
                sw.variable,
                format_quantity(sw.from, sw.dimension),
                format_quantity(sw.to, sw.dimension),
                sw.steps
            );
        }
        out
    }

    pub fn get(&self, key: &str) -> Option<&ConfigValue> {
        self.config.get(key)
    }
}

/// `parse(serialize(doc))`.
pub fn serialize_program(doc: &Program) -> String {
    doc.serialize()
}
