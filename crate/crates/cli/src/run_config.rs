//! Run settings read from the same flat config file as the geometry.

use std::path::{Path, PathBuf};

use dps_core::dispersion::{BuriedLine, PulseStudy};
use dps_core::geometry::{EpsEffForm, GeometrySpec, Inductors, MutPermittivity, CONFIG_KEYS};
use dps_core::io::config::{Config, Dim};
use dps_core::rfcore::{FrequencyGrid, DEFAULT_Z0};
use dps_core::soilcal::{Interpolation, SoilCalibrationCurve};
use sha2::{Digest, Sha256};

use crate::failure::{config_error, Failure};

const RUN_KEYS: &[&str] = &[
    "geometry_file",
    "calibration_file",
    "interpolation",
    "readings_file",
    "f_exc",
    "z0",
    "n_cells",
    "mut_eps_real",
    "mut_eps_imag",
    "sweep_start",
    "sweep_stop",
    "sweep_points",
    "sweep_vwc",
    "map_start",
    "map_stop",
    "map_points",
    "map_eps",
    "fd_step",
    "phase_accuracy",
    "quantize",
    "line_length",
    "line_width",
    "line_height",
    "pulse_widths",
    "pulse_vwc",
    "pulse_sample_rate",
    "pulse_fft_len",
    "tone_frequency",
    "eps_inf",
];

/// Excitation frequency: fixed, or the map optimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Excitation {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub geometry: GeometrySpec,
    pub geometry_sha256: String,
    pub inductors: Inductors,
    pub curve: SoilCalibrationCurve,
    pub readings_file: Option<PathBuf>,
    pub f_exc: Excitation,
    pub z0: f64,
    pub n_cells: usize,
    pub mut_permittivity: MutPermittivity,
    pub sweep_grid: FrequencyGrid,
    pub sweep_vwc: Vec<f64>,
    pub map_grid: FrequencyGrid,
    pub map_eps: Vec<f64>,
    pub fd_step: f64,
    pub phase_accuracy: f64,
    pub quantize: bool,
    pub study: PulseStudy,
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// SHA-256 over the canonical JSON of the geometry.
pub fn geometry_hash(g: &GeometrySpec) -> String {
    let json = serde_json::to_vec(g).expect("geometry serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

fn grid(cfg: &Config, prefix: &str, start: f64, stop: f64, points: usize) -> Result<FrequencyGrid, Failure> {
    let start = cfg.quantity_or(&format!("{prefix}_start"), Dim::Frequency, start)?;
    let stop = cfg.quantity_or(&format!("{prefix}_stop"), Dim::Frequency, stop)?;
    let points = cfg.count_or(&format!("{prefix}_points"), points)?;
    FrequencyGrid::linear(start, stop, points).map_err(|e| config_error(&format!("{prefix}_points"), e))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let cfg = Config::load(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let known: Vec<&str> = CONFIG_KEYS.iter().chain(RUN_KEYS).copied().collect();
        cfg.reject_unknown(&known)?;

        let geometry_cfg = match cfg.get("geometry_file") {
            Some(e) => {
                let p = resolve(base, &e.value);
                let g = Config::load(&p).map_err(|err| Failure::config(format!("{}: {err}", p.display())))?;
                g.reject_unknown(CONFIG_KEYS)?;
                g
            }
            None => cfg.clone(),
        };
        let geometry = GeometrySpec::from_config(&geometry_cfg)?;
        let defaults = Inductors::default();
        let inductors = Inductors {
            l: geometry_cfg.quantity_or("L", Dim::Inductance, defaults.l)?,
            l_c: geometry_cfg.quantity_or("L_c", Dim::Inductance, defaults.l_c)?,
        };

        let interpolation = cfg.choice(
            "interpolation",
            &[
                ("linear", Interpolation::Linear),
                ("monotone_cubic", Interpolation::MonotoneCubic),
            ],
            Interpolation::Linear,
        )?;
        let curve = match cfg.get("calibration_file") {
            Some(e) => {
                let p = resolve(base, &e.value);
                SoilCalibrationCurve::load_csv(&p, interpolation).map_err(|err| {
                    if err.is_io_or_config() {
                        Failure::config(format!("{}: {err}", p.display()))
                    } else {
                        config_error("calibration_file", err)
                    }
                })?
            }
            None => SoilCalibrationCurve::sandy_soil_with(interpolation),
        };

        let f_exc = match cfg.get("f_exc") {
            None => Excitation::Auto,
            Some(e) if e.value == "auto" => Excitation::Auto,
            Some(_) => Excitation::Fixed(cfg.quantity("f_exc", Dim::Frequency)?),
        };
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(cfg.error(key, format!("must be positive, got {v}")))
            }
        };
        let z0 = positive("z0", cfg.quantity_or("z0", Dim::Dimensionless, DEFAULT_Z0)?)?;
        let n_cells = cfg.count_or("n_cells", 1)?;
        if n_cells == 0 {
            return Err(cfg.error("n_cells", "must be at least 1").into());
        }
        let mut_permittivity = MutPermittivity::new(
            cfg.quantity_or("mut_eps_real", Dim::Dimensionless, 1.0)?,
            cfg.quantity_or("mut_eps_imag", Dim::Dimensionless, 0.0)?,
        )
        .map_err(|e| config_error("mut_eps_real", e))?;

        let defaults = PulseStudy::default();
        let line = BuriedLine {
            width: positive(
                "line_width",
                cfg.quantity_or("line_width", Dim::Length, defaults.line.width)?,
            )?,
            height: positive(
                "line_height",
                cfg.quantity_or("line_height", Dim::Length, defaults.line.height)?,
            )?,
            substrate_eps_r: geometry.substrate_eps_r,
            length: positive(
                "line_length",
                cfg.quantity_or("line_length", Dim::Length, defaults.line.length)?,
            )?,
            form: EpsEffForm::Standard,
        };
        let pulse_fft_len = cfg.count_or("pulse_fft_len", defaults.pulse_fft_len)?;
        if !pulse_fft_len.is_power_of_two() {
            return Err(cfg.error("pulse_fft_len", "must be a power of two").into());
        }
        let study = PulseStudy {
            line,
            vwc: cfg.quantity_list_or("pulse_vwc", Dim::Dimensionless, &defaults.vwc)?,
            pulse_widths: cfg.quantity_list_or("pulse_widths", Dim::Time, &defaults.pulse_widths)?,
            pulse_sample_rate: positive(
                "pulse_sample_rate",
                cfg.quantity_or("pulse_sample_rate", Dim::Frequency, defaults.pulse_sample_rate)?,
            )?,
            pulse_fft_len,
            tone_frequency: positive(
                "tone_frequency",
                cfg.quantity_or("tone_frequency", Dim::Frequency, defaults.tone_frequency)?,
            )?,
            eps_inf: cfg.quantity_or("eps_inf", Dim::Dimensionless, defaults.eps_inf)?,
            ..defaults
        };

        Ok(Self {
            geometry_sha256: geometry_hash(&geometry),
            geometry,
            inductors,
            curve,
            readings_file: cfg.get("readings_file").map(|e| resolve(base, &e.value)),
            f_exc,
            z0,
            n_cells,
            mut_permittivity,
            sweep_grid: grid(&cfg, "sweep", 50e6, 1.5e9, 2901)?,
            sweep_vwc: cfg.quantity_list_or("sweep_vwc", Dim::Dimensionless, &[0.0, 10.0, 20.0, 30.0])?,
            map_grid: grid(&cfg, "map", 300e6, 1.2e9, 901)?,
            map_eps: cfg.quantity_list_or("map_eps", Dim::Dimensionless, &[5.0, 10.0, 15.0, 20.0])?,
            fd_step: positive("fd_step", cfg.quantity_or("fd_step", Dim::Dimensionless, 1e-3)?)?,
            phase_accuracy: cfg.quantity_or("phase_accuracy", Dim::Dimensionless, 0.1)?,
            quantize: cfg.flag_or("quantize", false)?,
            study,
        })
    }
}
