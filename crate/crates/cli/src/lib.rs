//! The `starksim` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 parse error, 3 runtime or fit
//! error. `STARKSIM_THREADS` caps the worker pool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use starksim_core::analysis::{fit_lineshape, LineshapeModel, Window};
use starksim_core::output::{tables_from_csv, tables_to_csv, tables_to_json, Table};
use starksim_core::presets::{chi_table, refocused_gate, run_preset, Preset, PresetOptions};
use starksim_core::program::units::{parse_quantity, Dimension};
use starksim_core::program::{
    parse_program_bytes, records_table, run_program, Program, RunOptions,
};
use starksim_core::sequences::gate_process;
use starksim_core::tomography::{process_fidelity, ProcessMatrix};
use starksim_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

pub const THREADS_VAR: &str = "STARKSIM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "starksim", version, about = "Stark-tuned donor spin simulator")]
struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a program's sequence at every sweep point.
    Run {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a named experiment with the program's config.
    Sweep {
        file: PathBuf,
        #[arg(long, value_enum)]
        preset: PresetArg,
        /// Exponential apodization time constant for the UDD spectrum, e.g. `1ms`.
        #[arg(long)]
        apodize: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Process tomography of the refocused conditional gate.
    Tomo {
        file: PathBuf,
        /// Ideal gate to compare against.
        #[arg(long, value_enum)]
        gate: GateArg,
        #[arg(long, value_enum)]
        voltage: Switch,
        #[command(flatten)]
        common: Common,
    },
    /// Fit a single line to two columns of a CSV table.
    Fit {
        csv: PathBuf,
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Schema name of the table to read; the first table by default.
        #[arg(long)]
        table: Option<String>,
        /// Abscissa column; the first column by default.
        #[arg(long)]
        x: Option<String>,
        /// Ordinate column; the second column by default.
        #[arg(long)]
        y: Option<String>,
        /// Subtracted from the ordinate before fitting (e.g. -1 for ENDOR echoes).
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        baseline: f64,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Ensemble size, overriding the config.
    #[arg(long)]
    donors: Option<usize>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: Output,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions {
            donors: self.donors,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
struct Output {
    /// Write here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetArg {
    Fig1b,
    Fig2c,
    Fig3c,
    Fig3def,
    Fig4b,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Fig1b => Preset::Fig1b,
            PresetArg::Fig2c => Preset::Fig2c,
            PresetArg::Fig3c => Preset::Fig3c,
            PresetArg::Fig3def => Preset::Fig3def,
            PresetArg::Fig4b => Preset::Fig4b,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GateArg {
    Y180,
    Identity,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    Lorentzian,
    Gaussian,
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse(_) => EXIT_PARSE,
            _ => EXIT_RUNTIME,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Runs the command line with the process's standard streams.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// Runs the command line, writing results to `out` and messages to `err`.
pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    init_logging(cli.verbose);
    let result = with_pool(|| compute(cli.command)).and_then(|done| {
        if let Some(note) = &done.note {
            let _ = writeln!(err, "{note}");
        }
        emit(&done.tables, &done.output, out)
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    // a second call in the same process keeps the first logger
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}

fn thread_cap() -> Result<Option<usize>, Failure> {
    match std::env::var(THREADS_VAR) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Failure::usage(format!(
                "{THREADS_VAR} must be a positive integer, got '{v}'"
            ))),
        },
        Err(e) => Err(Failure::usage(format!("{THREADS_VAR}: {e}"))),
    }
}

fn with_pool<R: Send>(f: impl FnOnce() -> Result<R, Failure> + Send) -> Result<R, Failure> {
    match thread_cap()? {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure {
                code: EXIT_RUNTIME,
                message: format!("cannot start {n} worker threads: {e}"),
            })?
            .install(f),
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn load_program(path: &Path) -> Result<Program, Failure> {
    let bytes = read_input(path)?;
    parse_program_bytes(&bytes).map_err(|e| Failure {
        code: EXIT_PARSE,
        message: format!("{}: {e}", path.display()),
    })
}

fn emit(tables: &[Table], output: &Output, out: &mut dyn Write) -> Result<(), Failure> {
    let text = match output.format {
        Format::Csv => tables_to_csv(tables),
        Format::Json => tables_to_json(tables),
    };
    let written = match &output.out {
        Some(path) => fs::write(path, text).map_err(|e| (path.display().to_string(), e)),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| ("standard output".to_string(), e)),
    };
    written.map_err(|(place, e)| Failure {
        code: EXIT_RUNTIME,
        message: format!("cannot write {place}: {e}"),
    })
}

/// What a command produced, written after the worker pool is done.
struct Done {
    tables: Vec<Table>,
    output: Output,
    /// Human-readable summary for standard error.
    note: Option<String>,
}

impl Done {
    fn tables(tables: Vec<Table>, output: Output) -> Self {
        Self {
            tables,
            output,
            note: None,
        }
    }
}

fn compute(command: Command) -> Result<Done, Failure> {
    match command {
        Command::Run { file, common } => {
            let doc = load_program(&file)?;
            let records = run_program(&doc, common.options())?;
            Ok(Done::tables(vec![records_table(&records)], common.output))
        }
        Command::Sweep {
            file,
            preset,
            apodize,
            common,
        } => {
            let doc = load_program(&file)?;
            let window = match apodize {
                None => Window::None,
                Some(text) => {
                    let tc = parse_quantity(&text, Dimension::Time)
                        .map_err(|e| Failure::usage(format!("--apodize '{text}': {e}")))?;
                    if !(tc > 0.0) {
                        return Err(Failure::usage("--apodize must be positive"));
                    }
                    Window::Exponential { time_constant: tc }
                }
            };
            let options = PresetOptions {
                run: common.options(),
                window,
            };
            let tables = run_preset(&doc, preset.into(), options)?;
            Ok(Done::tables(tables, common.output))
        }
        Command::Tomo {
            file,
            gate,
            voltage,
            common,
        } => {
            let doc = load_program(&file)?;
            let setup = doc.setup(common.options())?;
            let conditional = refocused_gate(&doc, &setup)?;
            let voltage_on = matches!(voltage, Switch::On);
            let chi = gate_process(&setup.context, voltage_on, &conditional, &setup.ensemble)?;
            let (name, ideal) = match gate {
                GateArg::Y180 => ("y180", ProcessMatrix::pi_y()),
                GateArg::Identity => ("identity", ProcessMatrix::identity()),
            };
            let fidelity = process_fidelity(&chi, &ideal);
            let mut summary = Table::new("process_fidelity", &["voltage_on", "fidelity"]);
            summary.push(vec![f64::from(u8::from(voltage_on)), fidelity]);
            Ok(Done {
                tables: vec![summary, chi_table(&chi)],
                output: common.output,
                note: Some(format!("process fidelity vs {name}: {fidelity:.3}")),
            })
        }
        Command::Fit {
            csv,
            model,
            table,
            x,
            y,
            baseline,
            output,
        } => {
            let bytes = read_input(&csv)?;
            let text = String::from_utf8(bytes)
                .map_err(|e| Failure::usage(format!("{} is not UTF-8: {e}", csv.display())))?;
            let tables = tables_from_csv(&text).map_err(|e| Failure {
                code: EXIT_PARSE,
                message: format!("{}: {e}", csv.display()),
            })?;
            let data = match &table {
                None => &tables[0],
                Some(name) => tables
                    .iter()
                    .find(|t| &t.schema == name)
                    .ok_or_else(|| Failure::usage(format!("no table '{name}' in the input")))?,
            };
            let column = |name: &Option<String>, default: usize| -> Result<Vec<f64>, Failure> {
                let name = match name {
                    Some(n) => n.clone(),
                    None => data.columns.get(default).cloned().ok_or_else(|| {
                        Failure::usage(format!("table has fewer than {} columns", default + 1))
                    })?,
                };
                data.column(&name)
                    .ok_or_else(|| Failure::usage(format!("no column '{name}'")))
            };
            let xs = column(&x, 0)?;
            let ys: Vec<f64> = column(&y, 1)?.into_iter().map(|v| v - baseline).collect();
            let model = match model {
                ModelArg::Lorentzian => LineshapeModel::Lorentzian,
                ModelArg::Gaussian => LineshapeModel::Gaussian,
            };
            let fit = fit_lineshape(&xs, &ys, model)?;
            let mut result = Table::new(
                "lineshape_fit",
                &["center", "fwhm", "amplitude", "residual_norm", "iterations"],
            );
            result.push(vec![
                fit.center,
                fit.fwhm,
                fit.amplitude,
                fit.residual_norm,
                fit.iterations as f64,
            ]);
            Ok(Done::tables(vec![result], output))
        }
    }
}
