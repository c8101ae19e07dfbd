//! Phase sensitivity to the soil permittivity.
//!
//! The observable is the phase lag `Δθ = −arg s21` of the sensor at one
//! excitation frequency. Its derivative with respect to `ε′` is taken by
//! central differences, both directly and through the two capacitances the
//! soil actually moves:
//!
//! ```text
//! dΔθ/dε = dΔθ/dC_u · dC_u/dε + dΔθ/dC_i · dC_i/dε
//! ```

use serde::Serialize;

use crate::dps::{band_edges_numeric, default_band_search, BandStructure, DpsCircuitValues};
use crate::error::{ensure_positive, Error, Result};
use crate::geometry::{extract_circuit, GeometrySpec, Inductors, MutPermittivity};
use crate::par::Exec;
use crate::rfcore::{db, wrap_degrees, Complex, FrequencyGrid, DEFAULT_Z0};

/// Default permittivity step for central differences.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Largest relative change tolerated when the step is halved twice.
pub const STEP_TOLERANCE: f64 = 0.10;

/// Largest relative disagreement between the direct and chain-rule derivative.
pub const CHAIN_RULE_TOLERANCE: f64 = 0.01;

/// Relative capacitance step used for `dΔθ/dC`.
const CAP_STEP: f64 = 1e-6;

/// Phase accumulated by a line with a fixed delay per millimetre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MicrostripBaseline {
    pub phase_deg: f64,
    pub phase_per_mm_deg: f64,
}

/// `phase = 360 · f · delay_per_mm · length`.
pub fn microstrip_baseline(delay_per_mm: f64, f: f64, length_mm: f64) -> Result<MicrostripBaseline> {
    ensure_positive("delay per mm", delay_per_mm)?;
    ensure_positive("frequency", f)?;
    if !(length_mm >= 0.0 && length_mm.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "length must be ≥ 0, got {length_mm}"
        )));
    }
    let per_mm = 360.0 * f * delay_per_mm;
    Ok(MicrostripBaseline {
        phase_deg: per_mm * length_mm,
        phase_per_mm_deg: per_mm,
    })
}

/// Geometry plus everything else needed to evaluate the sensor response.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensorModel {
    pub geometry: GeometrySpec,
    pub inductors: Inductors,
    pub z0: f64,
    pub n_cells: usize,
}

/// Detector-side observables at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseResponse {
    /// Phase lag `−arg s21` in degrees, in `(−180, 180]`.
    pub delta_theta_deg: f64,
    /// `20 log10 |s21|`.
    pub loss_db: f64,
}

fn response_of(c: &DpsCircuitValues, f: f64, z0: f64, n_cells: usize) -> Result<PhaseResponse> {
    let s = match c.sparams_at(f, z0, n_cells) {
        Ok(s) => s,
        Err(Error::PoleProximity { .. } | Error::SingularNetwork { .. }) => {
            return Err(Error::MaskedFrequency { frequency: f })
        }
        Err(e) => return Err(e),
    };
    Ok(PhaseResponse {
        delta_theta_deg: wrap_degrees(-s.s21.arg().to_degrees()),
        loss_db: db(s.s21),
    })
}

impl SensorModel {
    pub fn new(geometry: GeometrySpec, inductors: Inductors) -> Self {
        Self {
            geometry,
            inductors,
            z0: DEFAULT_Z0,
            n_cells: 1,
        }
    }

    pub fn reference_design() -> Self {
        Self::new(GeometrySpec::reference_design(), Inductors::default())
    }

    pub fn circuit(&self, m: MutPermittivity) -> Result<DpsCircuitValues> {
        extract_circuit(&self.geometry, m, self.inductors)
    }

    pub fn phase_response(&self, m: MutPermittivity, f_exc: f64) -> Result<PhaseResponse> {
        ensure_positive("excitation frequency", f_exc)?;
        response_of(&self.circuit(m)?, f_exc, self.z0, self.n_cells)
    }

    /// Numeric band structure of the extracted circuit.
    pub fn band(&self, m: MutPermittivity) -> Result<BandStructure> {
        band_edges_numeric(&self.circuit(m)?, &default_band_search())
    }
}

/// Wrapped phase difference `a − b` in degrees.
fn phase_diff(a: f64, b: f64) -> f64 {
    wrap_degrees(a - b)
}

fn lossless(eps: f64) -> Result<MutPermittivity> {
    MutPermittivity::lossless(eps)
}

/// Central difference of `Δθ` in `ε′` with step `h`.
fn direct_derivative(model: &SensorModel, eps: f64, f: f64, h: f64) -> Result<f64> {
    let up = model.phase_response(lossless(eps + h)?, f)?;
    let down = model.phase_response(lossless(eps - h)?, f)?;
    Ok(phase_diff(up.delta_theta_deg, down.delta_theta_deg) / (2.0 * h))
}

fn relative_change(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-12 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Direct derivative with the step-halving convergence check.
pub fn direct_sensitivity(model: &SensorModel, eps_real: f64, f_exc: f64, h: f64) -> Result<f64> {
    ensure_positive("step", h)?;
    if eps_real < 1.0 + h {
        return Err(Error::Precondition(format!(
            "ε′ = {eps_real} must be at least 1 + h = {}",
            1.0 + h
        )));
    }
    let d1 = direct_derivative(model, eps_real, f_exc, h)?;
    let d2 = direct_derivative(model, eps_real, f_exc, h / 2.0)?;
    let d4 = direct_derivative(model, eps_real, f_exc, h / 4.0)?;
    let change = relative_change(d1, d2).max(relative_change(d2, d4));
    if change > STEP_TOLERANCE {
        return Err(Error::StepSize {
            relative_change: change,
        });
    }
    Ok(d1)
}

/// Both sides of the chain-rule identity at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityPoint {
    pub eps_real: f64,
    pub frequency: f64,
    /// `dΔθ/dε′` in degrees per unit permittivity.
    pub s_dps: f64,
    pub d_theta_d_cu: f64,
    pub d_cu_d_eps: f64,
    pub d_theta_d_ci: f64,
    pub d_ci_d_eps: f64,
    pub chain_sum: f64,
    pub relative_error: f64,
}

/// Derivative of `Δθ` with respect to the real part of one capacitance.
fn capacitance_derivative(
    model: &SensorModel,
    c: &DpsCircuitValues,
    f: f64,
    set: impl Fn(&mut DpsCircuitValues, Complex),
    get: impl Fn(&DpsCircuitValues) -> Complex,
) -> Result<f64> {
    let base = get(c);
    let d = CAP_STEP * base.re;
    let mut up = *c;
    set(&mut up, base + d);
    let mut down = *c;
    set(&mut down, base - d);
    let a = response_of(&up, f, model.z0, model.n_cells)?;
    let b = response_of(&down, f, model.z0, model.n_cells)?;
    Ok(phase_diff(a.delta_theta_deg, b.delta_theta_deg) / (2.0 * d))
}

/// `S_DPS` at `(ε′, f_exc)`, checked against the two-term chain rule.
pub fn dps_sensitivity(model: &SensorModel, eps_real: f64, f_exc: f64, h: f64) -> Result<SensitivityPoint> {
    let s_dps = direct_sensitivity(model, eps_real, f_exc, h)?;

    let c0 = model.circuit(lossless(eps_real)?)?;
    let up = model.circuit(lossless(eps_real + h)?)?;
    let down = model.circuit(lossless(eps_real - h)?)?;
    let d_cu_d_eps = (up.c_u.re - down.c_u.re) / (2.0 * h);
    let d_ci_d_eps = (up.c_i.re - down.c_i.re) / (2.0 * h);
    let d_theta_d_cu = capacitance_derivative(model, &c0, f_exc, |c, v| c.c_u = v, |c| c.c_u)?;
    let d_theta_d_ci = capacitance_derivative(model, &c0, f_exc, |c, v| c.c_i = v, |c| c.c_i)?;
    let chain_sum = d_theta_d_cu * d_cu_d_eps + d_theta_d_ci * d_ci_d_eps;
    let relative_error = relative_change(s_dps, chain_sum);
    if relative_error > CHAIN_RULE_TOLERANCE {
        return Err(Error::ChainRuleMismatch {
            direct: s_dps,
            chain_sum,
            relative_error,
        });
    }
    Ok(SensitivityPoint {
        eps_real,
        frequency: f_exc,
        s_dps,
        d_theta_d_cu,
        d_cu_d_eps,
        d_theta_d_ci,
        d_ci_d_eps,
        chain_sum,
        relative_error,
    })
}

/// `S_DPS` over a frequency × permittivity grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityMap {
    pub frequencies: Vec<f64>,
    pub eps_grid: Vec<f64>,
    /// `s_dps[i][j]` at `frequencies[i]`, `eps_grid[j]`; NaN where the
    /// derivative could not be evaluated.
    pub s_dps: Vec<Vec<f64>>,
    /// Row `i` propagates for every permittivity of the grid.
    pub propagating: Vec<bool>,
    pub f_optimal: f64,
    pub step: f64,
}

impl SensitivityMap {
    pub fn row_index(&self, f: f64) -> Option<usize> {
        self.frequencies.iter().position(|&x| x == f)
    }

    /// Contiguous run of all-ε propagating rows containing `f_optimal`.
    pub fn optimal_band(&self) -> (f64, f64) {
        let i = self.row_index(self.f_optimal).expect("f_optimal is a grid point");
        let mut lo = i;
        while lo > 0 && self.propagating[lo - 1] {
            lo -= 1;
        }
        let mut hi = i;
        while hi + 1 < self.frequencies.len() && self.propagating[hi + 1] {
            hi += 1;
        }
        (self.frequencies[lo], self.frequencies[hi])
    }
}

pub fn sensitivity_map(
    model: &SensorModel,
    f_grid: &FrequencyGrid,
    eps_grid: &[f64],
    h: f64,
) -> Result<SensitivityMap> {
    sensitivity_map_with(Exec::default(), model, f_grid, eps_grid, h)
}

pub fn sensitivity_map_with(
    exec: Exec,
    model: &SensorModel,
    f_grid: &FrequencyGrid,
    eps_grid: &[f64],
    h: f64,
) -> Result<SensitivityMap> {
    if eps_grid.is_empty() {
        return Err(Error::InvalidInput("permittivity grid is empty".into()));
    }
    for &e in eps_grid {
        if !(e >= 1.0 + h) || !e.is_finite() {
            return Err(Error::Precondition(format!("ε′ = {e} must be at least 1 + h")));
        }
    }
    let circuits = eps_grid
        .iter()
        .map(|&e| model.circuit(lossless(e)?))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(f64, f64)> = f_grid
        .points()
        .iter()
        .flat_map(|&f| eps_grid.iter().map(move |&e| (f, e)))
        .collect();
    let values = exec.map(&cells, |&(f, e)| {
        direct_sensitivity(model, e, f, h).unwrap_or(f64::NAN)
    });
    let s_dps: Vec<Vec<f64>> = values.chunks(eps_grid.len()).map(<[f64]>::to_vec).collect();
    let propagating: Vec<bool> = exec.map(f_grid.points(), |&f| {
        circuits
            .iter()
            .all(|c| crate::dps::dispersion(&c.lossless(), f).is_ok_and(|p| p.propagating))
    });

    // First maximum wins, so ties go to the lowest frequency.
    let mut best: Option<(usize, f64)> = None;
    for (i, row) in s_dps.iter().enumerate() {
        if !propagating[i] || row.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let mean = row.iter().map(|v| v.abs()).sum::<f64>() / row.len() as f64;
        if best.is_none_or(|(_, m)| mean > m) {
            best = Some((i, mean));
        }
    }
    let Some((i_opt, _)) = best else {
        return Err(Error::NoPropagatingBand(
            "no grid frequency propagates for every permittivity of the grid".into(),
        ));
    };
    Ok(SensitivityMap {
        frequencies: f_grid.points().to_vec(),
        eps_grid: eps_grid.to_vec(),
        s_dps,
        propagating,
        f_optimal: f_grid.points()[i_opt],
        step: h,
    })
}

/// `dΔθ/dVWC = S_DPS · dε′/dVWC`.
pub fn vwc_referred_sensitivity(s_dps: f64, d_eps_d_vwc: f64) -> Result<f64> {
    if !s_dps.is_finite() {
        return Err(Error::InvalidInput(format!("S_DPS must be finite, got {s_dps}")));
    }
    if !(d_eps_d_vwc.is_finite() && d_eps_d_vwc > 0.0) {
        return Err(Error::Degenerate(format!(
            "calibration slope dε′/dVWC = {d_eps_d_vwc} must be positive"
        )));
    }
    Ok(s_dps * d_eps_d_vwc)
}
