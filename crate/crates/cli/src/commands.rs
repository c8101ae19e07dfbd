use std::path::Path;

use dps_core::dispersion::StudyResult;
use dps_core::dps::{band_report, default_band_search, s_parameters, BandReport, DpsCircuitValues};
use dps_core::geometry::{extract, Extraction, MutPermittivity};
use dps_core::io::export::{distortion_matrix_csv, sensitivity_map_csv, sweep_csv};
use dps_core::io::touchstone;
use dps_core::par::Exec;
use dps_core::sensitivity::{
    direct_sensitivity, dps_sensitivity, sensitivity_map, vwc_referred_sensitivity, SensitivityMap,
    SensitivityPoint, SensorModel,
};
use dps_core::soilcal::{
    estimation_error, resolution, DetectorModel, DetectorReading, InversionResult, Inverter,
};
use serde::Serialize;

use crate::failure::Failure;
use crate::output::Output;
use crate::run_config::{Excitation, RunConfig};

fn model(cfg: &RunConfig) -> SensorModel {
    SensorModel {
        z0: cfg.z0,
        n_cells: cfg.n_cells,
        ..SensorModel::new(cfg.geometry.clone(), cfg.inductors)
    }
}

fn map(cfg: &RunConfig) -> Result<SensitivityMap, Failure> {
    Ok(sensitivity_map(
        &model(cfg),
        &cfg.map_grid,
        &cfg.map_eps,
        cfg.fd_step,
    )?)
}

/// Fixed frequency, or the map optimum.
fn excitation(cfg: &RunConfig, out: &mut Output) -> Result<f64, Failure> {
    match cfg.f_exc {
        Excitation::Fixed(f) => Ok(f),
        Excitation::Auto => {
            let f = map(cfg)?.f_optimal;
            out.note(format!("f_exc auto -> {f} Hz"));
            Ok(f)
        }
    }
}

fn vwc_label(v: f64) -> String {
    format!("{v}").replace('.', "p")
}

#[derive(Serialize)]
struct ComparisonRow {
    quantity: &'static str,
    extracted: f64,
    tabulated: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct ExtractReport<'a> {
    geometry_sha256: &'a str,
    extraction: Extraction,
    tabulated_comparison: Vec<ComparisonRow>,
}

pub fn extract_cmd(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let ex = extract(&cfg.geometry, cfg.mut_permittivity, cfg.inductors)?;
    let t = DpsCircuitValues::tabulated();
    let c = ex.circuit;
    let rows = [
        ("L", c.l, t.l),
        ("C_i", c.c_i.re, t.c_i.re),
        ("C_u", c.c_u.re, t.c_u.re),
        ("C_d", c.c_d, t.c_d),
        ("C_c", c.c_c, t.c_c),
        ("L_c", c.l_c, t.l_c),
    ];
    let report = ExtractReport {
        geometry_sha256: &cfg.geometry_sha256,
        extraction: ex,
        tabulated_comparison: rows
            .into_iter()
            .map(|(quantity, extracted, tabulated)| ComparisonRow {
                quantity,
                extracted,
                tabulated,
                ratio: extracted / tabulated,
            })
            .collect(),
    };
    out.write_json("extract.json", &report)
}

pub fn sweep_cmd(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let model = model(cfg);
    for &v in &cfg.sweep_vwc {
        let m = cfg.curve.permittivity_from_vwc(v)?;
        let sweep = s_parameters(&model.circuit(m)?, &cfg.sweep_grid, cfg.z0, cfg.n_cells)?;
        let name = format!("sweep_vwc{}", vwc_label(v));
        let comments = [
            format!("geometry sha256 {}", cfg.geometry_sha256),
            format!("vwc {v} %, eps {} - j{}", m.eps_real, m.eps_imag),
            format!("cells {}", cfg.n_cells),
        ];
        out.write(
            &format!("{name}.s2p"),
            touchstone::write(&sweep, &comments).as_bytes(),
        )?;
        out.write(&format!("{name}.csv"), sweep_csv(&sweep).as_bytes())?;
        if sweep.masked_count() > 0 {
            out.note(format!("{name}: {} masked frequencies", sweep.masked_count()));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ExtractedBand {
    mut_permittivity: MutPermittivity,
    report: BandReport,
}

#[derive(Serialize)]
struct BandOutput<'a> {
    geometry_sha256: &'a str,
    tabulated: BandReport,
    extracted: ExtractedBand,
}

pub fn band_cmd(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let search = default_band_search();
    let tabulated = band_report(&DpsCircuitValues::tabulated(), &search)?;
    let circuit = model(cfg).circuit(cfg.mut_permittivity)?;
    let report = band_report(&circuit, &search)?;
    if report.numeric.is_empty() {
        out.note("extracted circuit has no propagating band in the search range");
    }
    out.write_json(
        "band.json",
        &BandOutput {
            geometry_sha256: &cfg.geometry_sha256,
            tabulated,
            extracted: ExtractedBand {
                mut_permittivity: cfg.mut_permittivity,
                report,
            },
        },
    )
}

#[derive(Serialize)]
struct VwcReferred {
    vwc_percent: f64,
    eps_real: f64,
    s_dps_deg_per_eps: f64,
    d_eps_d_vwc: f64,
    deg_per_vwc: f64,
    phase_accuracy_deg: f64,
    resolution_vwc_percent: f64,
}

#[derive(Serialize)]
struct SenseReport<'a> {
    geometry_sha256: &'a str,
    f_exc: f64,
    f_optimal: f64,
    optimal_band: (f64, f64),
    /// Position of `f_optimal` in the band, 0 at the lower edge.
    optimal_band_fraction: f64,
    at_f_exc: Vec<SensitivityPoint>,
    vwc_referred: VwcReferred,
}

pub fn sense_cmd(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let model = model(cfg);
    let map = map(cfg)?;
    out.write("sensitivity_map.csv", sensitivity_map_csv(&map).as_bytes())?;
    let f_exc = match cfg.f_exc {
        Excitation::Fixed(f) => f,
        Excitation::Auto => map.f_optimal,
    };
    let at_f_exc = cfg
        .map_eps
        .iter()
        .map(|&e| dps_sensitivity(&model, e, f_exc, cfg.fd_step))
        .collect::<Result<Vec<_>, _>>()?;
    let (_, top) = cfg.curve.vwc_range();
    let m = cfg.curve.permittivity_from_vwc(top)?;
    let s = direct_sensitivity(&model, m.eps_real, f_exc, cfg.fd_step)?;
    let slope = cfg.curve.slope(top)?;
    let deg_per_vwc = vwc_referred_sensitivity(s, slope)?;
    let (lo, hi) = map.optimal_band();
    let report = SenseReport {
        geometry_sha256: &cfg.geometry_sha256,
        f_exc,
        f_optimal: map.f_optimal,
        optimal_band: (lo, hi),
        optimal_band_fraction: if hi > lo {
            (map.f_optimal - lo) / (hi - lo)
        } else {
            0.0
        },
        at_f_exc,
        vwc_referred: VwcReferred {
            vwc_percent: top,
            eps_real: m.eps_real,
            s_dps_deg_per_eps: s,
            d_eps_d_vwc: slope,
            deg_per_vwc,
            phase_accuracy_deg: cfg.phase_accuracy,
            resolution_vwc_percent: resolution(deg_per_vwc.abs(), cfg.phase_accuracy)?,
        },
    };
    out.write_json("sense.json", &report)
}

struct ReadingRow {
    reading: Result<DetectorReading, String>,
    nominal_vwc: Option<f64>,
}

fn read_readings(path: &Path) -> Result<Vec<ReadingRow>, Failure> {
    let fail = |e: &dyn std::fmt::Display| Failure::config(format!("{}: {e}", path.display()));
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| fail(&e))?;
    let headers = rdr.headers().map_err(|e| fail(&e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ip), Some(im)) = (col("v_p"), col("v_m")) else {
        return Err(fail(&"header must name `v_p` and `v_m` columns"));
    };
    let inom = col("nominal_vwc");
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| fail(&e))?;
        let num = |i: usize| -> Result<f64, String> {
            let text = record.get(i).unwrap_or("");
            text.parse::<f64>()
                .map_err(|_| format!("`{text}` is not a number"))
        };
        let reading = num(ip).and_then(|v_p| Ok(DetectorReading { v_p, v_m: num(im)? }));
        let nominal_vwc = inom.and_then(|i| num(i).ok());
        rows.push(ReadingRow { reading, nominal_vwc });
    }
    Ok(rows)
}

#[derive(Serialize)]
struct RowResult {
    row: usize,
    reading: Option<DetectorReading>,
    nominal_vwc: Option<f64>,
    result: Option<InversionResult>,
    vwc_error: Option<f64>,
    eps_real_error_percent: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct InvertSummary {
    f_exc: f64,
    quantized: bool,
    rows: usize,
    succeeded: usize,
    failed: usize,
    compared: usize,
    mean_abs_vwc_error: Option<f64>,
    max_abs_vwc_error: Option<f64>,
    mean_eps_real_error_percent: Option<f64>,
    report: String,
}

const SYNTHETIC_VWC: [f64; 7] = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0];

pub fn invert_cmd(cfg: &RunConfig, readings: Option<&Path>, out: &mut Output) -> Result<(), Failure> {
    let f_exc = excitation(cfg, out)?;
    let detector = if cfg.quantize {
        DetectorModel::quantized()
    } else {
        DetectorModel::default()
    };
    let inv = Inverter::new(model(cfg), f_exc, cfg.curve.clone(), detector);

    let rows = match readings.or(cfg.readings_file.as_deref()) {
        Some(p) => read_readings(p)?,
        None => {
            let mut csv_text = String::from("v_p,v_m,nominal_vwc\n");
            let mut rows = Vec::new();
            for v in SYNTHETIC_VWC {
                let r = inv.synthesize(cfg.curve.permittivity_from_vwc(v)?)?;
                csv_text.push_str(&format!("{},{},{v}\n", r.v_p, r.v_m));
                rows.push(ReadingRow {
                    reading: Ok(r),
                    nominal_vwc: Some(v),
                });
            }
            out.write("synthetic_readings.csv", csv_text.as_bytes())?;
            rows
        }
    };

    let good: Vec<DetectorReading> = rows
        .iter()
        .filter_map(|r| r.reading.as_ref().ok().copied())
        .collect();
    let mut solved = inv.invert_batch(Exec::default(), &good).into_iter();
    let mut lines = String::new();
    let mut results = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let outcome = match &row.reading {
            Ok(_) => solved
                .next()
                .expect("one result per parsed row")
                .map_err(|e| e.to_string()),
            Err(e) => Err(e.clone()),
        };
        let (result, error) = match outcome {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e)),
        };
        let vwc_error = match (&result, row.nominal_vwc) {
            (Some(r), Some(n)) => r.vwc_percent.map(|v| v - n),
            _ => None,
        };
        let eps_real_error_percent = match (&result, row.nominal_vwc) {
            (Some(r), Some(n)) => cfg
                .curve
                .permittivity_from_vwc(n)
                .ok()
                .and_then(|m| estimation_error(r.eps.eps_real, m.eps_real).ok()),
            _ => None,
        };
        let rr = RowResult {
            row: i + 1,
            reading: row.reading.as_ref().ok().copied(),
            nominal_vwc: row.nominal_vwc,
            result,
            vwc_error,
            eps_real_error_percent,
            error,
        };
        lines.push_str(&serde_json::to_string(&rr).map_err(|e| Failure::config(e.to_string()))?);
        lines.push('\n');
        results.push(rr);
    }
    out.write("inversion.jsonl", lines.as_bytes())?;

    let errs: Vec<f64> = results.iter().filter_map(|r| r.vwc_error).collect();
    let eps_errs: Vec<f64> = results.iter().filter_map(|r| r.eps_real_error_percent).collect();
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let abs_errs: Vec<f64> = errs.iter().map(|e| e.abs()).collect();
    let mean_eps = mean(&eps_errs);
    let succeeded = results.iter().filter(|r| r.result.is_some()).count();
    let summary = InvertSummary {
        f_exc,
        quantized: cfg.quantize,
        rows: results.len(),
        succeeded,
        failed: results.len() - succeeded,
        compared: abs_errs.len(),
        mean_abs_vwc_error: mean(&abs_errs),
        max_abs_vwc_error: abs_errs.iter().copied().reduce(f64::max),
        mean_eps_real_error_percent: mean_eps,
        report: match mean_eps {
            Some(e) => format!("average error of the estimated real permittivity: {e:.1}%"),
            None => "no nominal values to compare against".into(),
        },
    };
    out.write_json("inversion_summary.json", &summary)
}

#[derive(Serialize)]
struct PulseReport<'a> {
    line_length_m: f64,
    fits: &'a [dps_core::dispersion::DebyeFit],
    nrmse: &'a [Vec<f64>],
    tone_purity_db: &'a [f64],
}

pub fn pulse_cmd(cfg: &RunConfig, out: &mut Output) -> Result<(), Failure> {
    let study = &cfg.study;
    let r: StudyResult = study.run(&cfg.curve)?;
    for s in &r.scenarios {
        let name = match s.pulse_width {
            Some(pw) => format!("waveform_pulse_{:.0}ps_vwc{}.csv", pw * 1e12, vwc_label(s.vwc)),
            None => format!(
                "waveform_tone_{:.0}MHz_vwc{}.csv",
                study.tone_frequency / 1e6,
                vwc_label(s.vwc)
            ),
        };
        out.write(&name, s.output.to_csv().as_bytes())?;
    }
    out.write(
        "distortion_matrix.csv",
        distortion_matrix_csv(&study.pulse_widths, &study.vwc, &r).as_bytes(),
    )?;
    out.write_json(
        "debye_fits.json",
        &PulseReport {
            line_length_m: study.line.length,
            fits: &r.fits,
            nrmse: &r.nrmse,
            tone_purity_db: &r.tone_purity_db,
        },
    )
}
