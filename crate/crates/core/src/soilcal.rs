//! Calibration and inversion.
//!
//! * gravimetric water content from weights,
//! * the VWC ↔ complex permittivity curve of sand at 130 MHz,
//! * the gain/phase detector transfer characteristic,
//! * inversion of a detector reading into `(ε′, ε″)` and VWC.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GeometrySpec, Inductors, MutPermittivity};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::par::Exec;
use crate::sensitivity::SensorModel;

/// `100 · W_water / (W_dry + W_water)`.
///
/// This is a mass ratio; it is used as the VWC of the prepared samples.
pub fn vwc_from_weights(w_dry: f64, w_water: f64) -> Result<f64> {
    if !(w_dry.is_finite() && w_dry > 0.0) {
        return Err(Error::InvalidInput(format!(
            "dry weight must be positive, got {w_dry}"
        )));
    }
    if !(w_water.is_finite() && w_water >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "water weight must be ≥ 0, got {w_water}"
        )));
    }
    Ok(100.0 * w_water / (w_dry + w_water))
}

/// `|ε_meas − ε_nominal| / ε_nominal · 100`.
pub fn estimation_error(eps_meas: f64, eps_nominal: f64) -> Result<f64> {
    if !(eps_nominal.is_finite() && eps_nominal > 0.0) {
        return Err(Error::InvalidInput(format!(
            "nominal permittivity must be positive, got {eps_nominal}"
        )));
    }
    Ok((eps_meas - eps_nominal).abs() / eps_nominal * 100.0)
}

/// Smallest resolvable VWC step: `phase_accuracy / sensitivity`.
pub fn resolution(sensitivity_deg_per_vwc: f64, phase_accuracy_deg: f64) -> Result<f64> {
    if !(sensitivity_deg_per_vwc.is_finite() && sensitivity_deg_per_vwc > 0.0) {
        return Err(Error::Degenerate(format!(
            "sensitivity must be positive, got {sensitivity_deg_per_vwc}"
        )));
    }
    if !(phase_accuracy_deg.is_finite() && phase_accuracy_deg >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "phase accuracy must be ≥ 0, got {phase_accuracy_deg}"
        )));
    }
    Ok(phase_accuracy_deg / sensitivity_deg_per_vwc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Linear,
    /// Piecewise cubic Hermite with Fritsch–Carlson slopes.
    MonotoneCubic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub vwc_percent: f64,
    pub eps_real: f64,
    pub eps_imag: f64,
}

/// Monotone cubic Hermite interpolant.
#[derive(Debug, Clone, PartialEq)]
struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d = vec![delta[0]; 2];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = Self::edge(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = Self::edge(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Self {
            x: x.to_vec(),
            y: y.to_vec(),
            d,
        }
    }

    // Shape-preserving three-point end slope.
    fn edge(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
        let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
        if d.signum() != m0.signum() {
            0.0
        } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
            3.0 * m0
        } else {
            d
        }
    }

    fn segment(&self, t: f64) -> usize {
        match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            i => (i - 1).min(self.x.len() - 2),
        }
    }

    fn eval(&self, t: f64) -> f64 {
        let k = self.segment(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.y[k]
            + (s3 - 2.0 * s2 + s) * h * self.d[k]
            + (-2.0 * s3 + 3.0 * s2) * self.y[k + 1]
            + (s3 - s2) * h * self.d[k + 1]
    }

    fn derivative(&self, t: f64) -> f64 {
        let k = self.segment(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        ((6.0 * s2 - 6.0 * s) * self.y[k]
            + (3.0 * s2 - 4.0 * s + 1.0) * h * self.d[k]
            + (-6.0 * s2 + 6.0 * s) * self.y[k + 1]
            + (3.0 * s2 - 2.0 * s) * h * self.d[k + 1])
            / h
    }
}

/// Tabulated VWC → `(ε′, ε″)` with an interpolation rule.
#[derive(Debug, Clone, PartialEq)]
pub struct SoilCalibrationCurve {
    points: Vec<CalibrationPoint>,
    interpolation: Interpolation,
    real: Pchip,
    imag: Pchip,
}

const SANDY_SOIL: [(f64, f64, f64); 7] = [
    (0.0, 2.5, 0.05),
    (5.0, 6.0, 0.5),
    (10.0, 8.0, 0.9),
    (15.0, 14.5, 1.8),
    (20.0, 18.0, 2.5),
    (25.0, 21.0, 3.1),
    (30.0, 23.5, 3.5),
];

impl SoilCalibrationCurve {
    pub fn new(points: Vec<CalibrationPoint>, interpolation: Interpolation) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput("a calibration curve needs two points".into()));
        }
        for p in &points {
            if ![p.vwc_percent, p.eps_real, p.eps_imag]
                .iter()
                .all(|v| v.is_finite())
            {
                return Err(Error::InvalidInput("calibration values must be finite".into()));
            }
            if p.eps_real < 1.0 || p.eps_imag < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "calibration point at {}% has ε′ < 1 or ε″ < 0",
                    p.vwc_percent
                )));
            }
        }
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b.vwc_percent <= a.vwc_percent {
                return Err(Error::InvalidInput("VWC must be strictly increasing".into()));
            }
            if b.eps_real <= a.eps_real {
                return Err(Error::InvalidInput(
                    "ε′ must be strictly increasing with VWC".into(),
                ));
            }
            if b.eps_imag < a.eps_imag {
                return Err(Error::InvalidInput("ε″ must not decrease with VWC".into()));
            }
        }
        let x: Vec<f64> = points.iter().map(|p| p.vwc_percent).collect();
        let re: Vec<f64> = points.iter().map(|p| p.eps_real).collect();
        let im: Vec<f64> = points.iter().map(|p| p.eps_imag).collect();
        Ok(Self {
            real: Pchip::new(&x, &re),
            imag: Pchip::new(&x, &im),
            points,
            interpolation,
        })
    }

    /// Sand at 130 MHz.
    pub fn sandy_soil() -> Self {
        Self::sandy_soil_with(Interpolation::Linear)
    }

    pub fn sandy_soil_with(interpolation: Interpolation) -> Self {
        let points = SANDY_SOIL
            .iter()
            .map(|&(v, r, i)| CalibrationPoint {
                vwc_percent: v,
                eps_real: r,
                eps_imag: i,
            })
            .collect();
        Self::new(points, interpolation).expect("bundled curve is valid")
    }

    pub fn points(&self) -> &[CalibrationPoint] {
        &self.points
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn with_interpolation(&self, interpolation: Interpolation) -> Self {
        Self {
            interpolation,
            ..self.clone()
        }
    }

    pub fn vwc_range(&self) -> (f64, f64) {
        (
            self.points[0].vwc_percent,
            self.points[self.points.len() - 1].vwc_percent,
        )
    }

    pub fn eps_real_range(&self) -> (f64, f64) {
        (
            self.points[0].eps_real,
            self.points[self.points.len() - 1].eps_real,
        )
    }

    fn knot(&self, vwc: f64) -> Option<&CalibrationPoint> {
        self.points.iter().find(|p| p.vwc_percent == vwc)
    }

    fn segment(&self, vwc: f64) -> usize {
        match self.points.partition_point(|p| p.vwc_percent <= vwc) {
            0 => 0,
            i => (i - 1).min(self.points.len() - 2),
        }
    }

    fn check_vwc(&self, vwc: f64) -> Result<()> {
        let (lo, hi) = self.vwc_range();
        if vwc.is_nan() || vwc < lo || vwc > hi {
            return Err(Error::ExtrapolationRefused {
                quantity: "VWC",
                value: vwc,
                nearest: if vwc < lo { lo } else { hi },
            });
        }
        Ok(())
    }

    fn eval(&self, vwc: f64) -> (f64, f64) {
        if let Some(p) = self.knot(vwc) {
            return (p.eps_real, p.eps_imag);
        }
        match self.interpolation {
            Interpolation::Linear => {
                let k = self.segment(vwc);
                let (a, b) = (self.points[k], self.points[k + 1]);
                let t = (vwc - a.vwc_percent) / (b.vwc_percent - a.vwc_percent);
                (
                    a.eps_real + t * (b.eps_real - a.eps_real),
                    a.eps_imag + t * (b.eps_imag - a.eps_imag),
                )
            }
            Interpolation::MonotoneCubic => (self.real.eval(vwc), self.imag.eval(vwc)),
        }
    }

    pub fn permittivity_from_vwc(&self, vwc: f64) -> Result<MutPermittivity> {
        self.check_vwc(vwc)?;
        let (re, im) = self.eval(vwc);
        MutPermittivity::new(re, im.max(0.0))
    }

    pub fn vwc_from_permittivity(&self, eps_real: f64) -> Result<f64> {
        let (lo, hi) = self.eps_real_range();
        if eps_real.is_nan() || eps_real < lo || eps_real > hi {
            return Err(Error::ExtrapolationRefused {
                quantity: "ε′",
                value: eps_real,
                nearest: if eps_real < lo { lo } else { hi },
            });
        }
        if let Some(p) = self.points.iter().find(|p| p.eps_real == eps_real) {
            return Ok(p.vwc_percent);
        }
        let k = match self.points.partition_point(|p| p.eps_real <= eps_real) {
            0 => 0,
            i => (i - 1).min(self.points.len() - 2),
        };
        let (a, b) = (self.points[k], self.points[k + 1]);
        match self.interpolation {
            Interpolation::Linear => {
                let t = (eps_real - a.eps_real) / (b.eps_real - a.eps_real);
                Ok(a.vwc_percent + t * (b.vwc_percent - a.vwc_percent))
            }
            Interpolation::MonotoneCubic => {
                // the segment is monotone, so bisection always brackets
                let (mut lo, mut hi) = (a.vwc_percent, b.vwc_percent);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.real.eval(mid) < eps_real {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }

    /// `dε′/dVWC`. At a knot the linear rule uses the segment below it,
    /// except at the first knot.
    pub fn slope(&self, vwc: f64) -> Result<f64> {
        self.check_vwc(vwc)?;
        match self.interpolation {
            Interpolation::Linear => {
                let mut k = self.segment(vwc);
                if k > 0 && self.points[k].vwc_percent == vwc {
                    k -= 1;
                }
                let (a, b) = (self.points[k], self.points[k + 1]);
                Ok((b.eps_real - a.eps_real) / (b.vwc_percent - a.vwc_percent))
            }
            Interpolation::MonotoneCubic => Ok(self.real.derivative(vwc)),
        }
    }

    /// Reads `vwc_percent,eps_real,eps_imag` rows after a header line.
    pub fn load_csv(path: &Path, interpolation: Interpolation) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let headers = rdr.headers()?.clone();
        let expected = ["vwc_percent", "eps_real", "eps_imag"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse {
                line: 1,
                field: "header".into(),
                message: format!("expected `{}`", expected.join(",")),
            });
        }
        let mut points = Vec::new();
        for (i, row) in rdr.deserialize::<CalibrationPoint>().enumerate() {
            points.push(row.map_err(|e| Error::Parse {
                line: i + 2,
                field: "row".into(),
                message: e.to_string(),
            })?);
        }
        Self::new(points, interpolation)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("vwc_percent,eps_real,eps_imag\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.vwc_percent, p.eps_real, p.eps_imag));
        }
        out
    }
}

/// Voltages of the gain/phase detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorReading {
    pub v_p: f64,
    pub v_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecodedReading {
    pub folded_phase_deg: f64,
    pub loss_db: f64,
}

/// Linear transfer characteristic of the detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorModel {
    /// Phase output at 0°.
    pub phase_anchor_v: f64,
    /// Phase slope (negative: the output falls as the phase grows).
    pub phase_slope_v_per_deg: f64,
    /// Magnitude output at 0 dB.
    pub magnitude_anchor_v: f64,
    pub magnitude_slope_v_per_db: f64,
    /// Usable magnitude range, ± dB.
    pub loss_range_db: f64,
    pub v_max: f64,
    /// Round phase to 0.1° and loss to 0.1 dB.
    pub quantize: bool,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            phase_anchor_v: 1.8,
            phase_slope_v_per_deg: -0.010,
            magnitude_anchor_v: 0.9,
            magnitude_slope_v_per_db: 0.030,
            loss_range_db: 30.0,
            v_max: 1.8,
            quantize: false,
        }
    }
}

/// Phase step of the quantised detector (degrees).
pub const PHASE_QUANTUM_DEG: f64 = 0.1;
/// Magnitude step of the quantised detector (dB).
pub const LOSS_QUANTUM_DB: f64 = 0.1;

// Dividing by the integer count per unit lands exactly on the decimal lattice.
fn snap(x: f64, q: f64) -> f64 {
    let per_unit = (1.0 / q).round();
    (x * per_unit).round() / per_unit
}

/// `|((φ + 180) mod 360) − 180|`, in `[0, 180]`.
pub fn fold_phase(phase_deg: f64) -> f64 {
    ((phase_deg + 180.0).rem_euclid(360.0) - 180.0).abs()
}

impl DetectorModel {
    pub fn quantized() -> Self {
        Self {
            quantize: true,
            ..Self::default()
        }
    }

    pub fn encode(&self, delta_phi_deg: f64, loss_db: f64) -> Result<DetectorReading> {
        if !delta_phi_deg.is_finite() {
            return Err(Error::InvalidInput(format!(
                "phase must be finite, got {delta_phi_deg}"
            )));
        }
        let r = self.loss_range_db;
        if !(loss_db.is_finite() && loss_db.abs() <= r) {
            return Err(Error::Range {
                quantity: "loss_db",
                value: loss_db,
                min: -r,
                max: r,
            });
        }
        let mut phase = fold_phase(delta_phi_deg);
        let mut loss = loss_db;
        if self.quantize {
            phase = snap(phase, PHASE_QUANTUM_DEG);
            loss = snap(loss, LOSS_QUANTUM_DB);
        }
        Ok(DetectorReading {
            v_p: self.phase_anchor_v + self.phase_slope_v_per_deg * phase,
            v_m: self.magnitude_anchor_v + self.magnitude_slope_v_per_db * loss,
        })
    }

    pub fn decode(&self, r: DetectorReading) -> Result<DecodedReading> {
        for (q, v) in [("v_p", r.v_p), ("v_m", r.v_m)] {
            if !(v.is_finite() && (0.0..=self.v_max).contains(&v)) {
                return Err(Error::Range {
                    quantity: q,
                    value: v,
                    min: 0.0,
                    max: self.v_max,
                });
            }
        }
        let mut phase = (r.v_p - self.phase_anchor_v) / self.phase_slope_v_per_deg;
        let mut loss = (r.v_m - self.magnitude_anchor_v) / self.magnitude_slope_v_per_db;
        if self.quantize {
            phase = snap(phase, PHASE_QUANTUM_DEG);
            loss = snap(loss, LOSS_QUANTUM_DB);
        }
        Ok(DecodedReading {
            folded_phase_deg: phase.clamp(0.0, 180.0),
            loss_db: loss,
        })
    }
}

/// Outcome of one inversion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InversionResult {
    #[serde(flatten)]
    pub eps: MutPermittivity,
    /// `None` when ε′ lies outside the calibration curve.
    pub vwc_percent: Option<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

/// Everything an inversion needs besides the reading.
#[derive(Debug, Clone)]
pub struct Inverter {
    pub model: SensorModel,
    pub f_exc: f64,
    pub curve: SoilCalibrationCurve,
    pub detector: DetectorModel,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Residual above which a reading is rejected as inconsistent.
    pub no_fit_threshold: f64,
}

/// Coarse grid of the first stage.
pub const GRID_EPS_REAL: (f64, f64, f64) = (1.0, 30.0, 0.5);
/// ε′ distance from a curve end that the refinement alone can leave.
const REFINEMENT_SLACK: f64 = 1e-4;
pub const GRID_EPS_IMAG: (f64, f64, f64) = (0.0, 5.0, 0.25);

fn grid_axis((start, stop, step): (f64, f64, f64)) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n).map(|k| start + step * k as f64).collect()
}

impl Inverter {
    pub fn new(model: SensorModel, f_exc: f64, curve: SoilCalibrationCurve, detector: DetectorModel) -> Self {
        Self {
            model,
            f_exc,
            curve,
            detector,
            tolerance: 1e-6,
            max_iterations: 200,
            no_fit_threshold: 3.0,
        }
    }

    /// Model prediction `(folded phase, loss)`.
    pub fn forward(&self, m: MutPermittivity) -> Result<(f64, f64)> {
        let r = self.model.phase_response(m, self.f_exc)?;
        Ok((fold_phase(r.delta_theta_deg), r.loss_db))
    }

    /// Detector reading the model predicts for `m`.
    pub fn synthesize(&self, m: MutPermittivity) -> Result<DetectorReading> {
        let r = self.model.phase_response(m, self.f_exc)?;
        self.detector.encode(r.delta_theta_deg, r.loss_db)
    }

    fn residual(&self, target: &DecodedReading, e_re: f64, e_im: f64) -> f64 {
        let Ok(m) = MutPermittivity::new(e_re.max(1.0), e_im.max(0.0)) else {
            return f64::INFINITY;
        };
        match self.forward(m) {
            Ok((phase, loss)) => {
                let dp = (phase - target.folded_phase_deg) / PHASE_QUANTUM_DEG;
                let dl = (loss - target.loss_db) / LOSS_QUANTUM_DB;
                // leaving the physical domain is penalised so the simplex
                // does not settle on the clamp
                let outside = (1.0 - e_re).max(0.0) + (-e_im).max(0.0);
                dp.hypot(dl) + 1e3 * outside
            }
            Err(_) => f64::INFINITY,
        }
    }

    /// Checks that the folded phase is monotone over the calibration curve.
    pub fn ambiguity_warning(&self) -> Option<String> {
        let (lo, hi) = self.curve.vwc_range();
        let mut phases = Vec::new();
        for k in 0..=60 {
            let vwc = lo + (hi - lo) * k as f64 / 60.0;
            let m = self.curve.permittivity_from_vwc(vwc).ok()?;
            phases.push((m.eps_real, self.forward(m).ok()?.0));
        }
        let rising = phases.windows(2).all(|w| w[1].1 > w[0].1);
        let falling = phases.windows(2).all(|w| w[1].1 < w[0].1);
        if rising || falling {
            return None;
        }
        let turns: Vec<String> = phases
            .windows(3)
            .filter(|w| (w[1].1 - w[0].1) * (w[2].1 - w[1].1) <= 0.0)
            .map(|w| format!("{:.2}", w[1].0))
            .collect();
        Some(format!(
            "folded phase is not monotone over the calibration curve at {} Hz; \
             branches meet near ε′ = [{}]",
            self.f_exc,
            turns.join(", ")
        ))
    }

    pub fn invert(&self, reading: DetectorReading) -> Result<InversionResult> {
        let target = self.detector.decode(reading)?;
        let re_axis = grid_axis(GRID_EPS_REAL);
        let im_axis = grid_axis(GRID_EPS_IMAG);
        let mut best = (f64::INFINITY, re_axis[0], im_axis[0]);
        for &er in &re_axis {
            for &ei in &im_axis {
                let r = self.residual(&target, er, ei);
                if r < best.0 {
                    best = (r, er, ei);
                }
            }
        }
        if !best.0.is_finite() {
            return Err(Error::NoFit { residual: best.0 });
        }
        let min = nelder_mead(
            |x: &[f64; 2]| self.residual(&target, x[0], x[1]),
            [best.1, best.2],
            [GRID_EPS_REAL.2 / 2.0, GRID_EPS_IMAG.2 / 2.0],
            NelderMeadOptions {
                target: self.tolerance,
                max_iterations: self.max_iterations,
                ..Default::default()
            },
        );
        if min.value > self.no_fit_threshold {
            return Err(Error::NoFit { residual: min.value });
        }
        let eps = MutPermittivity::new(min.x[0].max(1.0), min.x[1].max(0.0))?;
        let mut warnings = Vec::new();
        let vwc_percent = match self.curve.vwc_from_permittivity(eps.eps_real) {
            Ok(v) => Some(v),
            Err(e @ Error::ExtrapolationRefused { nearest, .. }) => {
                // Within quantisation of the curve end the reading cannot be
                // told apart from the end point.
                let bound = if self.detector.quantize {
                    self.quantization_bound(eps).map(|b| b.0).unwrap_or(0.0)
                } else {
                    0.0
                }
                .max(REFINEMENT_SLACK);
                if (eps.eps_real - nearest).abs() <= bound {
                    let v = self.curve.vwc_from_permittivity(nearest)?;
                    warnings.push(format!(
                        "ε′ = {:.6} lies outside the curve by less than {bound:.4}; VWC clamped to {v}",
                        eps.eps_real
                    ));
                    Some(v)
                } else {
                    warnings.push(format!("VWC unavailable: {e}"));
                    None
                }
            }
            Err(e) => return Err(e),
        };
        if let Some(w) = self.ambiguity_warning() {
            warnings.push(w);
        }
        Ok(InversionResult {
            eps,
            vwc_percent,
            residual: min.value,
            iterations: min.iterations,
            converged: min.value < self.tolerance,
            warnings,
        })
    }

    /// Inverts every reading; failures stay in their row.
    pub fn invert_batch(&self, exec: Exec, readings: &[DetectorReading]) -> Vec<Result<InversionResult>> {
        exec.map(readings, |r| self.invert(*r))
    }

    /// Worst-case `(ε′, ε″)` error from half a quantisation step on each
    /// channel, from the local Jacobian of the forward model.
    pub fn quantization_bound(&self, m: MutPermittivity) -> Result<(f64, f64)> {
        let h = 1e-4;
        let at = |re: f64, im: f64| self.forward(MutPermittivity::new(re, im.max(0.0))?);
        let im_lo = (m.eps_imag - h).max(0.0);
        let im_hi = m.eps_imag + h;
        let (p_rp, l_rp) = at(m.eps_real + h, m.eps_imag)?;
        let (p_rm, l_rm) = at((m.eps_real - h).max(1.0), m.eps_imag)?;
        let dre = m.eps_real + h - (m.eps_real - h).max(1.0);
        let (p_ip, l_ip) = at(m.eps_real, im_hi)?;
        let (p_im, l_im) = at(m.eps_real, im_lo)?;
        let dim = im_hi - im_lo;
        let j = [
            [(p_rp - p_rm) / dre, (p_ip - p_im) / dim],
            [(l_rp - l_rm) / dre, (l_ip - l_im) / dim],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-300 {
            return Err(Error::Degenerate("forward model Jacobian is singular".into()));
        }
        let (dp, dl) = (PHASE_QUANTUM_DEG / 2.0, LOSS_QUANTUM_DB / 2.0);
        let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
        Ok((
            inv[0][0].abs() * dp + inv[0][1].abs() * dl,
            inv[1][0].abs() * dp + inv[1][1].abs() * dl,
        ))
    }
}

/// One-shot inversion with the default tolerances.
pub fn invert_permittivity(
    reading: DetectorReading,
    g: &GeometrySpec,
    inductors: Inductors,
    f_exc: f64,
    curve: &SoilCalibrationCurve,
    detector: DetectorModel,
) -> Result<InversionResult> {
    Inverter::new(
        SensorModel::new(g.clone(), inductors),
        f_exc,
        curve.clone(),
        detector,
    )
    .invert(reading)
}
