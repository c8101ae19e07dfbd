//! CSV exports and atomic file writes.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::dispersion::StudyResult;
use crate::dps::Sweep;
use crate::error::{Error, Result};
use crate::rfcore::PortPair;
use crate::sensitivity::SensitivityMap;

/// Writes `contents` to a temporary file next to `path`, syncs it and renames
/// it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.12e}")
    }
}

/// One row per frequency; masked rows keep their frequency and leave the
/// numeric columns empty.
pub fn sweep_csv(sweep: &Sweep) -> String {
    let mut out =
        String::from("freq_hz,s11_re,s11_im,s21_re,s21_im,s21_db,s21_phase_deg_unwrapped,masked_flag\n");
    let s21_db = sweep.magnitude_db(PortPair::S21);
    let phase = sweep.phase_unwrapped_deg(PortPair::S21);
    for (i, p) in sweep.points.iter().enumerate() {
        let _ = write!(out, "{:.12e}", p.frequency);
        match &p.sparams {
            Some(s) => {
                for z in [s.s11, s.s21] {
                    let _ = write!(out, ",{},{}", num(z.re), num(z.im));
                }
            }
            None => out.push_str(",,,,"),
        }
        let _ = writeln!(
            out,
            ",{},{},{}",
            num(s21_db[i]),
            num(phase[i]),
            u8::from(p.masked())
        );
    }
    out
}

/// Frequency rows by permittivity columns.
pub fn sensitivity_map_csv(map: &SensitivityMap) -> String {
    let mut out = String::from("frequency_hz,propagating");
    for e in &map.eps_grid {
        let _ = write!(out, ",eps_{e}");
    }
    out.push('\n');
    for (i, f) in map.frequencies.iter().enumerate() {
        let _ = write!(out, "{f:.12e},{}", u8::from(map.propagating[i]));
        for v in &map.s_dps[i] {
            let _ = write!(out, ",{}", num(*v));
        }
        out.push('\n');
    }
    out
}

/// NRMSE by pulse width (rows) and VWC (columns), then one tone row with the
/// spectral purity in dB.
pub fn distortion_matrix_csv(pulse_widths: &[f64], vwc: &[f64], result: &StudyResult) -> String {
    let mut out = String::from("excitation");
    for v in vwc {
        let _ = write!(out, ",vwc_{v}");
    }
    out.push('\n');
    for (pw, row) in pulse_widths.iter().zip(&result.nrmse) {
        let _ = write!(out, "pulse_{:.0}ps_nrmse", pw * 1e12);
        for x in row {
            let _ = write!(out, ",{}", num(*x));
        }
        out.push('\n');
    }
    out.push_str("tone_purity_db");
    for x in &result.tone_purity_db {
        let _ = write!(out, ",{}", num(*x));
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dps::{s_parameters, DpsCircuitValues};
    use crate::rfcore::FrequencyGrid;

    #[test]
    fn atomic_write_replaces_file() {
        let dir = std::env::temp_dir().join(format!("dps-export-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("x.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        let leftovers = fs::read_dir(&dir).unwrap().count();
        assert_eq!(leftovers, 1);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn masked_rows_are_flagged() {
        let c = DpsCircuitValues::tabulated();
        let pole = c.shunt_pole();
        let grid = FrequencyGrid::new(vec![100e6, pole, 300e6]).unwrap();
        let csv = sweep_csv(&s_parameters(&c, &grid, 50.0, 1).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[2].ends_with(",1"));
        assert!(lines[1].ends_with(",0"));
        assert!(lines.iter().all(|l| l.split(',').count() == 8));
    }
}
