use std::collections::BTreeMap;

use super::units::{parse_any_quantity, parse_number, parse_quantity, Dimension};
use super::{
    config_kind, Axis, ConfigKind, ConfigValue, Phase, Program, PulseSpec, Statement, Sweep, Value,
    WaveMode, WaveSpec,
};
use crate::engine::Channel;
use crate::error::ParseError;
use crate::spin::{HalfInt, Transition};

const MAX_SWEEP_STEPS: usize = 1_000_000;
const MAX_TWICE_PROJECTION: i32 = 64;

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

struct Line<'a> {
    number: usize,
    tokens: Vec<Token<'a>>,
    /// Column just past the last token, for "missing argument" errors.
    end_column: usize,
}

fn tokenize(number: usize, raw: &str) -> Line<'_> {
    let content = raw.split('#').next().unwrap_or("");
    let mut tokens = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    let mut col = 0;
    for (byte, ch) in content.char_indices() {
        col += 1;
        match (ch.is_whitespace(), start) {
            (false, None) => start = Some((byte, col)),
            (true, Some((b, c))) => {
                tokens.push(Token {
                    text: &content[b..byte],
                    column: c,
                });
                start = None;
            }
            _ => {}
        }
    }
    if let Some((b, c)) = start {
        tokens.push(Token {
            text: &content[b..],
            column: c,
        });
    }
    Line {
        number,
        tokens,
        end_column: col + 1,
    }
}

fn err(line: usize, column: usize, msg: impl Into<String>) -> ParseError {
    ParseError::new(line, column, msg)
}

/// Cursor over the tokens of one line.
struct Args<'a, 'l> {
    line: &'l Line<'a>,
    pos: usize,
}

impl<'a, 'l> Args<'a, 'l> {
    fn new(line: &'l Line<'a>, pos: usize) -> Self {
        Self { line, pos }
    }

    fn next(&mut self, what: &str) -> Result<Token<'a>, ParseError> {
        let t = self.line.tokens.get(self.pos).copied().ok_or_else(|| {
            err(
                self.line.number,
                self.line.end_column,
                format!("missing {what}"),
            )
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn peek(&self) -> Option<Token<'a>> {
        self.line.tokens.get(self.pos).copied()
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) => Err(err(
                self.line.number,
                t.column,
                format!("unexpected '{}'", t.text),
            )),
            None => Ok(()),
        }
    }
}

/// A `$name` reference awaiting validation against the sweep block.
struct VarUse {
    name: String,
    dimension: Dimension,
    line: usize,
    column: usize,
    duration: bool,
}

struct Parser {
    uses: Vec<VarUse>,
}

impl Parser {
    fn value(
        &mut self,
        line: usize,
        tok: Token<'_>,
        dim: Dimension,
        duration: bool,
    ) -> Result<Value, ParseError> {
        if let Some(name) = tok.text.strip_prefix('$') {
            if !is_identifier(name) {
                return Err(err(
                    line,
                    tok.column,
                    format!("invalid variable '{}'", tok.text),
                ));
            }
            self.uses.push(VarUse {
                name: name.into(),
                dimension: dim,
                line,
                column: tok.column,
                duration,
            });
            return Ok(Value::Var(name.into()));
        }
        let v = parse_quantity(tok.text, dim)
            .map_err(|e| err(line, tok.column, format!("'{}': {e}", tok.text)))?;
        if duration && v < 0.0 {
            return Err(err(
                line,
                tok.column,
                format!("negative duration '{}'", tok.text),
            ));
        }
        Ok(Value::Literal(v))
    }

    fn positive(&mut self, line: usize, tok: Token<'_>, what: &str) -> Result<Value, ParseError> {
        let v = self.value(line, tok, Dimension::Frequency, false)?;
        if let Value::Literal(f) = v {
            if f <= 0.0 {
                return Err(err(line, tok.column, format!("{what} must be positive")));
            }
        }
        Ok(v)
    }

    fn wave_mode(&mut self, args: &mut Args<'_, '_>) -> Result<WaveMode, ParseError> {
        let line = args.line.number;
        let t = args.next("voltage mode (unipolar, bipolar or square <frequency>)")?;
        match t.text.to_ascii_lowercase().as_str() {
            "unipolar" => Ok(WaveMode::Unipolar),
            "bipolar" => Ok(WaveMode::Bipolar),
            "square" => {
                let f = args.next("square-wave frequency")?;
                Ok(WaveMode::Square(self.positive(
                    line,
                    f,
                    "square-wave frequency",
                )?))
            }
            other => Err(err(
                line,
                t.column,
                format!("unknown voltage mode '{other}'"),
            )),
        }
    }

    fn statement(&mut self, line: &Line<'_>) -> Result<Statement, ParseError> {
        let n = line.number;
        let head = line.tokens[0];
        let mut args = Args::new(line, 1);
        let st = match head.text.to_ascii_lowercase().as_str() {
            "pulse" => {
                let ch = args.next("channel (mw or rf)")?;
                let channel = match ch.text.to_ascii_lowercase().as_str() {
                    "mw" => Channel::Mw,
                    "rf" => Channel::Rf,
                    other => return Err(err(n, ch.column, format!("unknown channel '{other}'"))),
                };
                let d = args.next("pulse duration")?;
                let mut spec = PulseSpec {
                    channel,
                    duration: self.value(n, d, Dimension::Time, true)?,
                    phase: None,
                    rabi: None,
                    hard: false,
                    offset: None,
                    voltage: None,
                };
                while let Some(opt) = args.peek() {
                    args.pos += 1;
                    let key = opt.text.to_ascii_lowercase();
                    let dup = || err(n, opt.column, format!("duplicate pulse option '{key}'"));
                    match key.as_str() {
                        "phase" => {
                            if spec.phase.is_some() {
                                return Err(dup());
                            }
                            let t = args.next("phase")?;
                            spec.phase = Some(parse_phase(n, t)?);
                        }
                        "rabi" => {
                            if spec.rabi.is_some() {
                                return Err(dup());
                            }
                            let t = args.next("Rabi frequency")?;
                            spec.rabi = Some(self.positive(n, t, "Rabi frequency")?);
                        }
                        "hard" => {
                            if spec.hard {
                                return Err(dup());
                            }
                            spec.hard = true;
                        }
                        "offset" => {
                            if spec.offset.is_some() {
                                return Err(dup());
                            }
                            let t = args.next("drive offset")?;
                            spec.offset = Some(self.value(n, t, Dimension::Frequency, false)?);
                        }
                        "voltage" => {
                            if spec.voltage.is_some() {
                                return Err(dup());
                            }
                            let t = args.next("voltage amplitude")?;
                            let amplitude = self.value(n, t, Dimension::Voltage, false)?;
                            let mode = self.wave_mode(&mut args)?;
                            spec.voltage = Some(WaveSpec { amplitude, mode });
                        }
                        _ => {
                            return Err(err(
                                n,
                                opt.column,
                                format!("unknown pulse option '{}'", opt.text),
                            ))
                        }
                    }
                }
                Statement::Pulse(spec)
            }
            "voltage" => {
                let a = args.next("voltage amplitude")?;
                let amplitude = self.value(n, a, Dimension::Voltage, false)?;
                let d = args.next("voltage duration")?;
                let duration = self.value(n, d, Dimension::Time, true)?;
                let mode = self.wave_mode(&mut args)?;
                Statement::Voltage {
                    wave: WaveSpec { amplitude, mode },
                    duration,
                }
            }
            "delay" => {
                let d = args.next("delay duration")?;
                Statement::Delay(self.value(n, d, Dimension::Time, true)?)
            }
            "readout" => Statement::Readout,
            _ => {
                return Err(err(
                    n,
                    head.column,
                    format!("unknown statement '{}'", head.text),
                ))
            }
        };
        args.finish()?;
        Ok(st)
    }
}

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_phase(line: usize, tok: Token<'_>) -> Result<Phase, ParseError> {
    if let Some(axis) = Axis::parse(tok.text) {
        if matches!(axis, Axis::PlusZ | Axis::MinusZ) {
            return Err(err(
                line,
                tok.column,
                "a drive phase must lie in the xy-plane",
            ));
        }
        return Ok(Phase::Axis(axis));
    }
    parse_quantity(tok.text, Dimension::Angle)
        .map(Phase::Degrees)
        .map_err(|e| {
            err(
                line,
                tok.column,
                format!(
                    "phase must be +x, -x, +y, -y or <n>deg ('{}': {e})",
                    tok.text
                ),
            )
        })
}

fn parse_projection(line: usize, tok: Token<'_>, prefix: &str) -> Result<HalfInt, ParseError> {
    let lower = tok.text.to_ascii_lowercase();
    let bad = || {
        err(
            line,
            tok.column,
            format!("expected {prefix}=<half-integer>, found '{}'", tok.text),
        )
    };
    let rest = lower
        .strip_prefix(prefix)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(bad)?;
    let v = parse_number(rest).map_err(|_| bad())?;
    match HalfInt::from_f64(v) {
        Some(h) if h.0.abs() <= MAX_TWICE_PROJECTION => Ok(h),
        _ => Err(bad()),
    }
}

fn parse_transition(args: &mut Args<'_, '_>) -> Result<Transition, ParseError> {
    let n = args.line.number;
    let kind = args.next("transition kind (esr or nmr)")?;
    match kind.text.to_ascii_lowercase().as_str() {
        "esr" => {
            let m_i = parse_projection(n, args.next("mi=<m_I>")?, "mi")?;
            Ok(Transition::Esr { m_i })
        }
        "nmr" => {
            let t = args.next("ms=<m_S>")?;
            let m_s = parse_projection(n, t, "ms")?;
            if m_s.0.abs() != 1 {
                return Err(err(n, t.column, "m_S must be +1/2 or -1/2"));
            }
            let m_i = parse_projection(n, args.next("mi=<m_I>")?, "mi")?;
            Ok(Transition::Nmr { m_s, m_i })
        }
        other => Err(err(
            n,
            kind.column,
            format!("unknown transition kind '{other}'"),
        )),
    }
}

fn config_entry(line: &Line<'_>) -> Result<(String, ConfigValue), ParseError> {
    let n = line.number;
    let key_tok = line.tokens[0];
    let key = key_tok.text.to_ascii_lowercase();
    let kind = config_kind(&key).ok_or_else(|| {
        err(
            n,
            key_tok.column,
            format!("unknown config key '{}'", key_tok.text),
        )
    })?;
    let mut args = Args::new(line, 1);
    let value = match kind {
        ConfigKind::Transition => ConfigValue::Transition(parse_transition(&mut args)?),
        _ => {
            let t = args.next(&format!("value for '{key}'"))?;
            let located =
                |e: super::units::QuantityError| err(n, t.column, format!("'{}': {e}", t.text));
            match kind {
                ConfigKind::Number => ConfigValue::Number(parse_number(t.text).map_err(located)?),
                ConfigKind::Integer => ConfigValue::Integer(t.text.parse().map_err(|_| {
                    err(
                        n,
                        t.column,
                        format!("expected a non-negative integer, found '{}'", t.text),
                    )
                })?),
                ConfigKind::Quantity(d) => {
                    ConfigValue::Quantity(parse_quantity(t.text, d).map_err(located)?, d)
                }
                ConfigKind::Lifetime => {
                    let v = if t.text.eq_ignore_ascii_case("inf") {
                        f64::INFINITY
                    } else {
                        parse_quantity(t.text, Dimension::Time).map_err(located)?
                    };
                    if !(v > 0.0) {
                        return Err(err(n, t.column, "a lifetime must be positive"));
                    }
                    ConfigValue::Quantity(v, Dimension::Time)
                }
                ConfigKind::State => ConfigValue::State(Axis::parse(t.text).ok_or_else(|| {
                    err(
                        n,
                        t.column,
                        format!("expected +x, -x, +y, -y, +z or -z, found '{}'", t.text),
                    )
                })?),
                ConfigKind::Transition => unreachable!(),
            }
        }
    };
    args.finish()?;
    Ok((key, value))
}

fn expect_word(args: &mut Args<'_, '_>, word: &str) -> Result<(), ParseError> {
    let t = args.next(&format!("'{word}'"))?;
    if t.text.eq_ignore_ascii_case(word) {
        Ok(())
    } else {
        Err(err(
            args.line.number,
            t.column,
            format!("expected '{word}', found '{}'", t.text),
        ))
    }
}

fn sweep_line(line: &Line<'_>) -> Result<(Sweep, usize), ParseError> {
    let n = line.number;
    let mut args = Args::new(line, 0);
    let name = args.next("sweep variable")?;
    if !is_identifier(name.text) {
        return Err(err(
            n,
            name.column,
            format!("invalid variable name '{}'", name.text),
        ));
    }
    expect_word(&mut args, "from")?;
    let a = args.next("start value")?;
    let (from, dim) =
        parse_any_quantity(a.text).map_err(|e| err(n, a.column, format!("'{}': {e}", a.text)))?;
    expect_word(&mut args, "to")?;
    let b = args.next("end value")?;
    let to =
        parse_quantity(b.text, dim).map_err(|e| err(n, b.column, format!("'{}': {e}", b.text)))?;
    expect_word(&mut args, "steps")?;
    let s = args.next("step count")?;
    let steps: usize = s
        .text
        .parse()
        .ok()
        .filter(|&k| (1..=MAX_SWEEP_STEPS).contains(&k))
        .ok_or_else(|| {
            err(
                n,
                s.column,
                format!("step count must be an integer in 1..={MAX_SWEEP_STEPS}"),
            )
        })?;
    args.finish()?;
    Ok((
        Sweep {
            variable: name.text.into(),
            dimension: dim,
            from,
            to,
            steps,
        },
        name.column,
    ))
}

#[derive(Clone, Copy, PartialEq)]
enum Block {
    Config,
    Sequence,
    Sweep,
}

/// Parses raw bytes; invalid UTF-8 is reported at its position.
pub fn parse_program_bytes(bytes: &[u8]) -> Result<Program, ParseError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_program(text),
        Err(e) => {
            let good = &bytes[..e.valid_up_to()];
            let line = 1 + good.iter().filter(|&&b| b == b'\n').count();
            let last = good.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
            let column = 1 + String::from_utf8_lossy(&good[last..]).chars().count();
            Err(err(line, column, "invalid UTF-8"))
        }
    }
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut parser = Parser { uses: Vec::new() };
    let mut config: Option<BTreeMap<String, ConfigValue>> = None;
    let mut sequence: Option<Vec<Statement>> = None;
    let mut sweep: Option<(Sweep, usize, usize)> = None;
    let mut open: Option<(Block, usize)> = None;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = tokenize(idx + 1, raw);
        last_line = idx + 1;
        let Some(&head) = line.tokens.first() else {
            continue;
        };
        let word = head.text.to_ascii_lowercase();
        match open {
            None => {
                let block = match word.as_str() {
                    "config" => Block::Config,
                    "sequence" => Block::Sequence,
                    "sweep" => Block::Sweep,
                    _ => {
                        return Err(err(
                            line.number,
                            head.column,
                            format!(
                                "unknown keyword '{}': expected config, sequence or sweep",
                                head.text
                            ),
                        ))
                    }
                };
                let seen = match block {
                    Block::Config => config.is_some(),
                    Block::Sequence => sequence.is_some(),
                    Block::Sweep => sweep.is_some(),
                };
                if seen {
                    return Err(err(
                        line.number,
                        head.column,
                        format!("duplicate {word} block"),
                    ));
                }
                Args::new(&line, 1).finish()?;
                match block {
                    Block::Config => config = Some(BTreeMap::new()),
                    Block::Sequence => sequence = Some(Vec::new()),
                    Block::Sweep => {}
                }
                open = Some((block, line.number));
            }
            Some((block, start)) => {
                if word == "end" {
                    Args::new(&line, 1).finish()?;
                    if block == Block::Sweep && sweep.is_none() {
                        return Err(err(line.number, head.column, "empty sweep block"));
                    }
                    open = None;
                    continue;
                }
                match block {
                    Block::Config => {
                        let (key, value) = config_entry(&line)?;
                        let map = config.as_mut().expect("config block is open");
                        if map.contains_key(&key) {
                            return Err(err(
                                line.number,
                                head.column,
                                format!("duplicate config key '{key}'"),
                            ));
                        }
                        map.insert(key, value);
                    }
                    Block::Sequence => {
                        let st = parser.statement(&line)?;
                        sequence.as_mut().expect("sequence block is open").push(st);
                    }
                    Block::Sweep => {
                        if sweep.is_some() {
                            return Err(err(
                                line.number,
                                head.column,
                                format!("a sweep block holds one line (opened at line {start})"),
                            ));
                        }
                        let (sw, col) = sweep_line(&line)?;
                        sweep = Some((sw, line.number, col));
                    }
                }
            }
        }
    }
    if let Some((block, start)) = open {
        let name = match block {
            Block::Config => "config",
            Block::Sequence => "sequence",
            Block::Sweep => "sweep",
        };
        return Err(err(
            last_line.max(1),
            1,
            format!("missing 'end' for the {name} block opened at line {start}"),
        ));
    }
    let config = config.ok_or_else(|| err(1, 1, "missing config block"))?;
    let sequence = sequence.ok_or_else(|| err(1, 1, "missing sequence block"))?;

    for u in &parser.uses {
        match &sweep {
            Some((sw, _, _)) if sw.variable == u.name => {
                if sw.dimension != u.dimension {
                    return Err(err(
                        u.line,
                        u.column,
                        format!(
                            "${} sweeps a {} but is used as a {}",
                            u.name, sw.dimension, u.dimension
                        ),
                    ));
                }
            }
            _ => {
                return Err(err(
                    u.line,
                    u.column,
                    format!("undefined variable ${}", u.name),
                ))
            }
        }
    }
    if let Some((sw, line, col)) = &sweep {
        if !parser.uses.iter().any(|u| u.name == sw.variable) {
            return Err(err(
                *line,
                *col,
                format!(
                    "sweep variable '{}' is not used in the sequence",
                    sw.variable
                ),
            ));
        }
        if parser.uses.iter().any(|u| u.duration) && sw.from.min(sw.to) < 0.0 {
            return Err(err(*line, *col, "sweep gives a negative duration"));
        }
    }
    Ok(Program {
        config,
        sequence,
        sweep: sweep.map(|(s, _, _)| s),
    })
}
