//! Flat `key = value` configuration files with unit suffixes.
//!
//! ```text
//! # comment
//! h_u = 0.6mm
//! csr_turn_lengths = 96.4mm, 93.2mm
//! eps_eff_form = standard
//! ```
//!
//! Keys are case-sensitive, values may carry a trailing `# comment`, and a
//! key may appear only once. Every error carries the line number and key.

use std::path::Path;

use crate::error::{Error, Result};

/// Physical dimension expected for a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    Dimensionless,
    Length,
    Area,
    Capacitance,
    Inductance,
    Frequency,
    Time,
}

impl Dim {
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Dim::Dimensionless => &[("", 1.0)],
            Dim::Length => &[
                ("m", 1.0),
                ("cm", 1e-2),
                ("mm", 1e-3),
                ("um", 1e-6),
                ("µm", 1e-6),
                ("nm", 1e-9),
            ],
            Dim::Area => &[("m2", 1.0), ("cm2", 1e-4), ("mm2", 1e-6), ("um2", 1e-12)],
            Dim::Capacitance => &[
                ("F", 1.0),
                ("uF", 1e-6),
                ("nF", 1e-9),
                ("pF", 1e-12),
                ("fF", 1e-15),
            ],
            Dim::Inductance => &[
                ("H", 1.0),
                ("mH", 1e-3),
                ("uH", 1e-6),
                ("nH", 1e-9),
                ("pH", 1e-12),
            ],
            Dim::Frequency => &[
                ("Hz", 1.0),
                ("kHz", 1e3),
                ("MHz", 1e6),
                ("GHz", 1e9),
                ("THz", 1e12),
            ],
            Dim::Time => &[
                ("s", 1.0),
                ("ms", 1e-3),
                ("us", 1e-6),
                ("ns", 1e-9),
                ("ps", 1e-12),
                ("fs", 1e-15),
            ],
        }
    }

    fn name(self) -> &'static str {
        match self {
            Dim::Dimensionless => "dimensionless",
            Dim::Length => "length",
            Dim::Area => "area",
            Dim::Capacitance => "capacitance",
            Dim::Inductance => "inductance",
            Dim::Frequency => "frequency",
            Dim::Time => "time",
        }
    }
}

/// Splits `"0.6mm"` into `("0.6", "mm")`, accepting exponents such as `1e-3mm`.
fn split_number(s: &str) -> (&str, &str) {
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let exp_ok = (b == b'e' || b == b'E')
            && i > 0
            && match bytes.get(i + 1) {
                Some(c) if c.is_ascii_digit() => true,
                Some(b'+' | b'-') => bytes.get(i + 2).is_some_and(u8::is_ascii_digit),
                _ => false,
            };
        let sign_ok = (b == b'+' || b == b'-') && (i == 0 || matches!(bytes[i - 1], b'e' | b'E'));
        if b.is_ascii_digit() || b == b'.' || exp_ok || sign_ok {
            i += 1;
        } else {
            break;
        }
    }
    (&s[..i], s[i..].trim())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

impl Entry {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            field: self.key.clone(),
            message: message.into(),
        }
    }

    fn parse_quantity(&self, text: &str, dim: Dim) -> Result<f64> {
        let (num, unit) = split_number(text.trim());
        let value: f64 = num
            .parse()
            .map_err(|_| self.err(format!("`{text}` is not a number with a unit suffix")))?;
        let scale = dim
            .units()
            .iter()
            .find(|(u, _)| *u == unit)
            .map(|(_, s)| *s)
            .ok_or_else(|| {
                let known: Vec<&str> = dim
                    .units()
                    .iter()
                    .map(|(u, _)| if u.is_empty() { "<none>" } else { u })
                    .collect();
                self.err(format!(
                    "unknown {} unit `{unit}` (expected one of {})",
                    dim.name(),
                    known.join(", ")
                ))
            })?;
        // sub-unit prefixes divide by an exact integer so `1.5nH` is the
        // nearest double to 1.5e-9
        let v = if scale < 1.0 {
            value / (1.0 / scale).round()
        } else {
            value * scale
        };
        if !v.is_finite() {
            return Err(self.err(format!("`{text}` is not finite")));
        }
        Ok(v)
    }
}

/// A parsed configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: Vec<Entry>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<Entry> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Parse {
                    line,
                    field: content.to_string(),
                    message: "expected `key = value`".into(),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Parse {
                    line,
                    field: key.to_string(),
                    message: "keys must be single words".into(),
                });
            }
            if let Some(prev) = entries.iter().find(|e| e.key == key) {
                return Err(Error::Parse {
                    line,
                    field: key.to_string(),
                    message: format!("duplicate key (first set on line {})", prev.line),
                });
            }
            if value.is_empty() {
                return Err(Error::Parse {
                    line,
                    field: key.to_string(),
                    message: "empty value".into(),
                });
            }
            entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line,
            });
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    fn require(&self, key: &str) -> Result<&Entry> {
        self.get(key).ok_or_else(|| Error::Parse {
            line: 0,
            field: key.to_string(),
            message: "missing required key".into(),
        })
    }

    pub fn quantity(&self, key: &str, dim: Dim) -> Result<f64> {
        let e = self.require(key)?;
        e.parse_quantity(&e.value, dim)
    }

    pub fn quantity_or(&self, key: &str, dim: Dim, default: f64) -> Result<f64> {
        match self.get(key) {
            Some(e) => e.parse_quantity(&e.value, dim),
            None => Ok(default),
        }
    }

    /// Comma-separated list of quantities.
    pub fn quantity_list(&self, key: &str, dim: Dim) -> Result<Vec<f64>> {
        let e = self.require(key)?;
        e.value
            .split(',')
            .map(|item| e.parse_quantity(item, dim))
            .collect()
    }

    pub fn quantity_list_or(&self, key: &str, dim: Dim, default: &[f64]) -> Result<Vec<f64>> {
        if self.contains(key) {
            self.quantity_list(key, dim)
        } else {
            Ok(default.to_vec())
        }
    }

    pub fn count(&self, key: &str) -> Result<usize> {
        let e = self.require(key)?;
        e.value
            .parse()
            .map_err(|_| e.err(format!("`{}` is not a non-negative integer", e.value)))
    }

    pub fn count_or(&self, key: &str, default: usize) -> Result<usize> {
        if self.contains(key) {
            self.count(key)
        } else {
            Ok(default)
        }
    }

    pub fn flag_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(e) => match e.value.as_str() {
                "true" | "yes" | "on" => Ok(true),
                "false" | "no" | "off" => Ok(false),
                other => Err(e.err(format!("`{other}` is not a boolean"))),
            },
        }
    }

    pub fn text(&self, key: &str) -> Result<&str> {
        Ok(&self.require(key)?.value)
    }

    pub fn text_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).map_or(default, |e| e.value.as_str())
    }

    /// Value restricted to a fixed set of keywords.
    pub fn choice<T: Copy>(&self, key: &str, options: &[(&str, T)], default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(e) => options
                .iter()
                .find(|(name, _)| *name == e.value)
                .map(|(_, v)| *v)
                .ok_or_else(|| {
                    let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                    e.err(format!("`{}` is not one of {}", e.value, names.join(", ")))
                }),
        }
    }

    /// Fails on the first key not listed in `known`.
    pub fn reject_unknown(&self, known: &[&str]) -> Result<()> {
        match self.entries.iter().find(|e| !known.contains(&e.key.as_str())) {
            Some(e) => Err(e.err("unknown key")),
            None => Ok(()),
        }
    }

    /// Error attributed to `key`, for semantic checks done by callers.
    pub fn error(&self, key: &str, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.get(key).map_or(0, |e| e.line),
            field: key.to_string(),
            message: message.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn units_and_lists() {
        let c = Config::parse(
            "h_u = 0.6mm # upper\n\nt = 35um\nP = 96.4mm, 9.32cm\nA = 774.3 mm2\nf = 1.2e2MHz\nn=14\nx = -3e-1\n",
        )
        .unwrap();
        assert!((c.quantity("h_u", Dim::Length).unwrap() - 0.6e-3).abs() < 1e-18);
        assert!((c.quantity("t", Dim::Length).unwrap() - 35e-6).abs() < 1e-18);
        let p = c.quantity_list("P", Dim::Length).unwrap();
        assert!((p[1] - 0.0932).abs() < 1e-15);
        assert!((c.quantity("A", Dim::Area).unwrap() - 774.3e-6).abs() < 1e-15);
        assert_eq!(c.quantity("f", Dim::Frequency).unwrap(), 120e6);
        assert_eq!(c.count("n").unwrap(), 14);
        assert_eq!(c.quantity("x", Dim::Dimensionless).unwrap(), -0.3);
    }

    #[test]
    fn bad_suffix_names_field_and_line() {
        let c = Config::parse("a = 1mm\nh_u = 0.6 furlongs\n").unwrap();
        match c.quantity("h_u", Dim::Length) {
            Err(Error::Parse { line, field, message }) => {
                assert_eq!(line, 2);
                assert_eq!(field, "h_u");
                assert!(message.contains("furlongs"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let c = Config::parse("L = 1.5nH\n").unwrap();
        assert!(c.quantity("L", Dim::Capacitance).is_err());
        assert!(c.quantity("L", Dim::Inductance).is_ok());
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(
            Config::parse("a = 1\na = 2\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Config::parse("just words\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            Config::parse("a =\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        let c = Config::parse("a = 1\nzzz = 2\n").unwrap();
        assert!(matches!(
            c.reject_unknown(&["a"]),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn choices_and_flags() {
        let c = Config::parse("form = standard\nq = yes\n").unwrap();
        assert_eq!(
            c.choice("form", &[("standard", 1), ("as_printed", 2)], 0)
                .unwrap(),
            1
        );
        assert_eq!(c.choice("other", &[("standard", 1)], 7).unwrap(), 7);
        assert!(c.flag_or("q", false).unwrap());
        assert!(c.choice("form", &[("x", 1)], 0).is_err());
    }

    #[test]
    fn split_keeps_exponents() {
        assert_eq!(split_number("1e-3mm"), ("1e-3", "mm"));
        assert_eq!(split_number("2.5"), ("2.5", ""));
        assert_eq!(split_number("5 ps"), ("5", "ps"));
        assert_eq!(split_number("3em"), ("3", "em"));
    }
}
