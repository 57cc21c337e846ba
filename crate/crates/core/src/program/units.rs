//! Unit-suffixed quantities with exact decimal scaling.
//!
//! A literal such as `1000us` is scaled by rewriting its decimal exponent and
//! parsing once, so `1000us` and `1ms` give the same `f64`. Formatting picks
//! the largest unit in which the magnitude is at least one.

use std::fmt;

/// Physical kind of a quantity; each has its own unit table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dimension {
    /// Seconds.
    Time,
    /// Hz.
    Frequency,
    /// Volts.
    Voltage,
    /// Tesla.
    Field,
    /// Micrometres.
    Length,
    /// Hz/T.
    Gyromagnetic,
    /// um^2/V^2.
    StarkEta,
    /// Hz per V/um.
    LinearStark,
    /// Degrees.
    Angle,
}

impl Dimension {
    /// `(suffix, power of ten)` from smallest to largest.
    pub fn units(self) -> &'static [(&'static str, i64)] {
        match self {
            Self::Time => &[("ns", -9), ("us", -6), ("ms", -3), ("s", 0)],
            Self::Frequency => &[("Hz", 0), ("kHz", 3), ("MHz", 6), ("GHz", 9)],
            Self::Voltage => &[("mV", -3), ("V", 0), ("kV", 3)],
            Self::Field => &[("mT", -3), ("T", 0)],
            Self::Length => &[("um", 0), ("mm", 3), ("m", 6)],
            Self::Gyromagnetic => &[("Hz/T", 0), ("kHz/T", 3), ("MHz/T", 6)],
            Self::StarkEta => &[("um2/V2", 0)],
            Self::LinearStark => &[("Hz/(V/um)", 0), ("kHz/(V/um)", 3), ("MHz/(V/um)", 6)],
            Self::Angle => &[("deg", 0)],
        }
    }

    fn base_unit(self) -> &'static str {
        self.units()
            .iter()
            .find(|(_, e)| *e == 0)
            .map(|(u, _)| *u)
            .unwrap_or(self.units()[0].0)
    }

    /// The dimension a unit suffix belongs to, with its power of ten.
    pub fn of_unit(unit: &str) -> Option<(Self, i64)> {
        const ALL: [Dimension; 9] = [
            Dimension::Time,
            Dimension::Frequency,
            Dimension::Voltage,
            Dimension::Field,
            Dimension::Length,
            Dimension::Gyromagnetic,
            Dimension::StarkEta,
            Dimension::LinearStark,
            Dimension::Angle,
        ];
        ALL.iter().find_map(|&d| {
            d.units()
                .iter()
                .find(|(u, _)| *u == unit || (*u == "us" && unit == "µs"))
                .map(|&(_, e)| (d, e))
        })
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::Time => "time",
            Self::Frequency => "frequency",
            Self::Voltage => "voltage",
            Self::Field => "magnetic field",
            Self::Length => "length",
            Self::Gyromagnetic => "gyromagnetic ratio",
            Self::StarkEta => "Stark coefficient",
            Self::LinearStark => "linear Stark coefficient",
            Self::Angle => "angle",
        };
        f.write_str(name)
    }
}

/// `digits x 10^exponent`, with an explicit sign.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Decimal {
    negative: bool,
    digits: String,
    exponent: i64,
}

impl Decimal {
    fn to_f64(&self) -> Option<f64> {
        let sign = if self.negative { "-" } else { "" };
        let v: f64 = format!("{sign}{}e{}", self.digits, self.exponent)
            .parse()
            .ok()?;
        v.is_finite().then_some(v)
    }

    fn shifted(&self, by: i64) -> Option<Self> {
        Some(Self {
            exponent: self.exponent.checked_add(by)?,
            ..self.clone()
        })
    }
}

/// Splits a token into its numeric prefix and the remaining suffix.
fn split_number(token: &str) -> Option<(Decimal, &str)> {
    let bytes = token.as_bytes();
    let mut i = 0;
    let mut negative = false;
    if let Some(&c) = bytes.first() {
        if c == b'+' || c == b'-' {
            negative = c == b'-';
            i += 1;
        }
    }
    let int_start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    let int_part = &token[int_start..i];
    let mut frac_part = "";
    if i < bytes.len() && bytes[i] == b'.' {
        let s = i + 1;
        i = s;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        frac_part = &token[s..i];
    }
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let mut exponent: i64 = 0;
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        let d = j;
        while j < bytes.len() && bytes[j].is_ascii_digit() {
            j += 1;
        }
        if j > d {
            exponent = token[i + 1..j].parse().ok()?;
            i = j;
        }
    }
    let mut digits = format!("{int_part}{frac_part}");
    exponent = exponent.checked_sub(frac_part.len() as i64)?;
    let trimmed = digits.trim_start_matches('0');
    digits = if trimmed.is_empty() {
        "0".into()
    } else {
        trimmed.into()
    };
    Some((
        Decimal {
            negative,
            digits,
            exponent,
        },
        &token[i..],
    ))
}

/// Why a token did not parse as the expected quantity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QuantityError {
    NotANumber,
    MissingUnit(Dimension),
    UnknownUnit(String),
    WrongDimension {
        expected: Dimension,
        found: Dimension,
    },
    UnexpectedUnit(String),
    OutOfRange,
}

impl fmt::Display for QuantityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotANumber => f.write_str("expected a number"),
            Self::MissingUnit(d) => write!(f, "missing unit: a {d} needs one of {}", unit_list(*d)),
            Self::UnknownUnit(u) => write!(f, "unknown unit '{u}'"),
            Self::WrongDimension { expected, found } => {
                write!(f, "expected a {expected}, found a {found}")
            }
            Self::UnexpectedUnit(u) => write!(f, "unexpected unit '{u}' on a plain number"),
            Self::OutOfRange => f.write_str("number out of range"),
        }
    }
}

fn unit_list(d: Dimension) -> String {
    d.units()
        .iter()
        .map(|(u, _)| *u)
        .collect::<Vec<_>>()
        .join(", ")
}

/// Parses `<number><unit>` of any dimension.
pub fn parse_any_quantity(token: &str) -> Result<(f64, Dimension), QuantityError> {
    let (dec, unit) = split_number(token).ok_or(QuantityError::NotANumber)?;
    if unit.is_empty() {
        return Err(QuantityError::NotANumber);
    }
    let (dim, exp) =
        Dimension::of_unit(unit).ok_or_else(|| QuantityError::UnknownUnit(unit.into()))?;
    let value = dec
        .shifted(exp)
        .and_then(|d| d.to_f64())
        .ok_or(QuantityError::OutOfRange)?;
    Ok((value, dim))
}

/// Parses `<number><unit>` of a given dimension into base units.
pub fn parse_quantity(token: &str, dim: Dimension) -> Result<f64, QuantityError> {
    let (dec, unit) = split_number(token).ok_or(QuantityError::NotANumber)?;
    if unit.is_empty() {
        return Err(QuantityError::MissingUnit(dim));
    }
    let (found, exp) =
        Dimension::of_unit(unit).ok_or_else(|| QuantityError::UnknownUnit(unit.into()))?;
    if found != dim {
        return Err(QuantityError::WrongDimension {
            expected: dim,
            found,
        });
    }
    dec.shifted(exp)
        .and_then(|d| d.to_f64())
        .ok_or(QuantityError::OutOfRange)
}

/// Parses a plain number; `a/b` fractions are accepted.
pub fn parse_number(token: &str) -> Result<f64, QuantityError> {
    if let Some((num, den)) = token.split_once('/') {
        let n = parse_number(num)?;
        let d = parse_number(den)?;
        let v = n / d;
        return if v.is_finite() {
            Ok(v)
        } else {
            Err(QuantityError::OutOfRange)
        };
    }
    let (dec, rest) = split_number(token).ok_or(QuantityError::NotANumber)?;
    if !rest.is_empty() {
        return Err(if Dimension::of_unit(rest).is_some() {
            QuantityError::UnexpectedUnit(rest.into())
        } else {
            QuantityError::NotANumber
        });
    }
    dec.to_f64().ok_or(QuantityError::OutOfRange)
}

fn decimal_of(v: f64) -> Decimal {
    // `{:e}` is the shortest representation that round-trips.
    let s = format!("{:e}", v.abs());
    let (dec, _) = split_number(&s).expect("formatted float is a number");
    Decimal {
        negative: v < 0.0,
        ..dec
    }
}

fn render(dec: &Decimal) -> String {
    let sign = if dec.negative { "-" } else { "" };
    let d = &dec.digits;
    let n = d.len() as i64;
    let k = dec.exponent;
    let lead = k + n - 1;
    let body = if (0..=15).contains(&k) {
        format!("{d}{}", "0".repeat(k as usize))
    } else if k < 0 && n + k > 0 {
        let (a, b) = d.split_at((n + k) as usize);
        format!("{a}.{b}")
    } else if k < 0 && n + k > -6 {
        format!("0.{}{d}", "0".repeat((-(n + k)) as usize))
    } else if n == 1 {
        format!("{d}e{lead}")
    } else {
        format!("{}.{}e{lead}", &d[..1], &d[1..])
    };
    format!("{sign}{body}")
}

/// Plain-number text that parses back to exactly `v`.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    render(&decimal_of(v))
}

/// Canonical `<number><unit>` text for a base-unit value; parses back to
/// exactly `v`.
pub fn format_quantity(v: f64, dim: Dimension) -> String {
    if v == 0.0 {
        return format!("0{}", dim.base_unit());
    }
    let dec = decimal_of(v);
    let lead = dec.exponent + dec.digits.len() as i64 - 1;
    let units = dim.units();
    let &(unit, exp) = units
        .iter()
        .rev()
        .find(|(_, e)| *e <= lead)
        .unwrap_or(&units[0]);
    let scaled = Decimal {
        exponent: dec.exponent - exp,
        ..dec
    };
    format!("{}{unit}", render(&scaled))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scaling_is_exact() {
        let t = |s| parse_quantity(s, Dimension::Time).unwrap();
        assert_eq!(t("1000us"), t("1ms"));
        assert_eq!(t("1ms"), 1e-3);
        assert_eq!(t("0.2ms"), 2e-4);
        assert_eq!(t("-1.5e3ns"), -1.5e-6);
        assert_eq!(t("5µs"), 5e-6);
        assert_eq!(parse_quantity("1.71mm", Dimension::Length).unwrap(), 1710.0);
        assert_eq!(
            parse_quantity("10.2551MHz/T", Dimension::Gyromagnetic).unwrap(),
            10.2551e6
        );
    }

    #[test]
    fn errors() {
        use QuantityError::*;
        assert_eq!(
            parse_quantity("1", Dimension::Time),
            Err(MissingUnit(Dimension::Time))
        );
        assert_eq!(parse_quantity("ms", Dimension::Time), Err(NotANumber));
        assert_eq!(
            parse_quantity("1parsec", Dimension::Time),
            Err(UnknownUnit("parsec".into()))
        );
        assert!(matches!(
            parse_quantity("1V", Dimension::Time),
            Err(WrongDimension { .. })
        ));
        assert_eq!(parse_quantity("1e999s", Dimension::Time), Err(OutOfRange));
        assert_eq!(
            parse_quantity("1e99999999999999999999s", Dimension::Time),
            Err(NotANumber)
        );
        assert_eq!(
            parse_quantity("1MS", Dimension::Time),
            Err(UnknownUnit("MS".into()))
        );
        assert_eq!(parse_number("3ms"), Err(UnexpectedUnit("ms".into())));
        assert_eq!(parse_number("5/2"), Ok(2.5));
        assert_eq!(parse_number("1/0"), Err(OutOfRange));
    }

    #[test]
    fn canonical_units() {
        assert_eq!(format_quantity(1e-3, Dimension::Time), "1ms");
        assert_eq!(format_quantity(2e-4, Dimension::Time), "200us");
        assert_eq!(format_quantity(1.5, Dimension::Time), "1.5s");
        assert_eq!(format_quantity(0.0, Dimension::Time), "0s");
        assert_eq!(format_quantity(150.0, Dimension::Voltage), "150V");
        assert_eq!(
            format_quantity(186.802e6, Dimension::Frequency),
            "186.802MHz"
        );
        assert_eq!(format_quantity(1710.0, Dimension::Length), "1.71mm");
        assert_eq!(format_quantity(-2.5e3, Dimension::Frequency), "-2.5kHz");
        assert_eq!(format_quantity(3e-15, Dimension::Time), "0.000003ns");
        assert_eq!(format_quantity(3e-16, Dimension::Time), "3e-7ns");
        assert_eq!(format_number(1.99858), "1.99858");
        assert_eq!(format_number(-3.54e-3), "-0.00354");
        assert_eq!(format_number(5.3e-9), "5.3e-9");
        assert_eq!(format_number(1e20), "1e20");
    }

    proptest! {
        #[test]
        fn quantity_round_trip(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            for dim in [Dimension::Time, Dimension::Frequency, Dimension::Length, Dimension::Angle] {
                let s = format_quantity(v, dim);
                prop_assert_eq!(parse_quantity(&s, dim).unwrap(), v, "{}", s);
            }
            prop_assert_eq!(parse_number(&format_number(v)).unwrap(), v);
        }

        #[test]
        fn no_panic_on_garbage(s in "\\PC{0,12}") {
            let _ = parse_quantity(&s, Dimension::Time);
            let _ = parse_any_quantity(&s);
            let _ = parse_number(&s);
        }
    }
}
