//! Two-port Touchstone (`.s2p`), real/imaginary format.

use std::fmt::Write as _;

use crate::dps::{Sweep, SweepPoint};
use crate::error::{Error, Result};
use crate::rfcore::{Complex, SParams};

/// Serializes the unmasked points of `sweep`. Masked points are listed in a
/// comment and omitted from the data.
pub fn write(sweep: &Sweep, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "! {c}");
    }
    let masked = sweep.masked_count();
    if masked > 0 {
        let _ = writeln!(out, "! {masked} masked frequencies omitted");
    }
    let _ = writeln!(out, "# HZ S RI R {}", sweep.z0);
    for p in &sweep.points {
        let Some(s) = &p.sparams else { continue };
        let _ = write!(out, "{:.17e}", p.frequency);
        for z in [s.s11, s.s21, s.s12, s.s22] {
            let _ = write!(out, " {:.17e} {:.17e}", z.re, z.im);
        }
        out.push('\n');
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        field: "touchstone".into(),
        message: message.into(),
    }
}

#[derive(Clone, Copy)]
enum Format {
    Ri,
    Ma,
    Db,
}

/// Reads a two-port file in RI, MA or DB format with any frequency unit.
pub fn read(text: &str) -> Result<Sweep> {
    let mut scale = 1e9;
    let mut format = Format::Ma;
    let mut z0 = 50.0;
    let mut seen_option = false;
    let mut values: Vec<(usize, f64)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('!').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(opts) = line.strip_prefix('#') {
            if seen_option {
                return Err(parse_err(line_no, "second option line"));
            }
            seen_option = true;
            let tokens: Vec<String> = opts.split_whitespace().map(|t| t.to_ascii_uppercase()).collect();
            let mut k = 0;
            while k < tokens.len() {
                match tokens[k].as_str() {
                    "HZ" => scale = 1.0,
                    "KHZ" => scale = 1e3,
                    "MHZ" => scale = 1e6,
                    "GHZ" => scale = 1e9,
                    "S" => {}
                    "RI" => format = Format::Ri,
                    "MA" => format = Format::Ma,
                    "DB" => format = Format::Db,
                    "R" => {
                        k += 1;
                        z0 = tokens
                            .get(k)
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| parse_err(line_no, "R needs a number"))?;
                    }
                    other => return Err(parse_err(line_no, format!("unsupported option `{other}`"))),
                }
                k += 1;
            }
            continue;
        }
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(line_no, format!("`{tok}` is not a number")))?;
            values.push((line_no, v));
        }
    }
    if values.len() % 9 != 0 {
        let line = values.last().map_or(0, |v| v.0);
        return Err(parse_err(line, "data is not a whole number of 9-value records"));
    }
    let pair = |a: f64, b: f64| match format {
        Format::Ri => Complex::new(a, b),
        Format::Ma => Complex::from_polar(a, b.to_radians()),
        Format::Db => Complex::from_polar(10f64.powf(a / 20.0), b.to_radians()),
    };
    let mut points = Vec::with_capacity(values.len() / 9);
    for rec in values.chunks(9) {
        let v: Vec<f64> = rec.iter().map(|x| x.1).collect();
        if let Some(prev) = points.last().map(|p: &SweepPoint| p.frequency) {
            if v[0] * scale <= prev {
                return Err(parse_err(rec[0].0, "frequencies must increase"));
            }
        }
        points.push(SweepPoint {
            frequency: v[0] * scale,
            sparams: Some(SParams {
                s11: pair(v[1], v[2]),
                s21: pair(v[3], v[4]),
                s12: pair(v[5], v[6]),
                s22: pair(v[7], v[8]),
                reference_impedance: z0,
            }),
        });
    }
    Ok(Sweep {
        z0,
        n_cells: 0,
        points,
    })
}
