//! Lumped equivalent circuit of the dispersive phase shifter.
//!
//! One cell is a symmetric T network: half the series branch `Z/2`, the shunt
//! branch `Y`, and the other half `Z/2`. The series branch is the top-layer
//! inductance `L` in series with the interdigital capacitance `C_i`; the shunt
//! branch is the plate capacitance `C_t = C_u + C_d` loaded by the resonator
//! `L_c ‖ C_c` tank:
//!
//! ```text
//! Z(ω) = jωL/2 + 1/(j2ωC_i)
//! Y(ω) = jωC_t (1 − ω²L_cC_c) / (1 − ω²L_c(C_c + C_t))
//! ```
//!
//! The image impedance of this T cell is `√((Z/2)(Z/2 + 2/Y))` and the Bloch
//! phase obeys `cos βl = 1 + ZY/2`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{ensure_positive, Error, Result};
use crate::par::Exec;
use crate::rfcore::{db, unwrap_phase, Complex, FrequencyGrid, PortPair, SParams, TwoPortAbcd};

/// Relative distance to the shunt pole below which `Y` is not evaluated.
pub const POLE_GUARD: f64 = 1e-12;

/// Bisection stops once a band edge is bracketed this tightly (Hz).
pub const EDGE_RESOLUTION_HZ: f64 = 1e3;

/// Published measurements of the fabricated, unloaded sensor. Used only as
/// reference columns in discrepancy reports.
pub mod measured {
    /// Lower edge of the measured 3 dB passband.
    pub const PASSBAND_LOWER_HZ: f64 = 114e6;
    /// Upper edge of the measured 3 dB passband.
    pub const PASSBAND_UPPER_HZ: f64 = 135e6;
    /// Measured transmission zero near the lower cutoff.
    pub const TRANSMISSION_ZERO_HZ: f64 = 103e6;
}

fn omega(f: f64) -> f64 {
    2.0 * PI * f
}

/// The six lumped elements of one cell.
///
/// `c_u` and `c_i` are complex so that material loss can be carried as a
/// negative imaginary part; the remaining elements are real.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DpsCircuitValues {
    /// Top-layer inductance per section (H).
    pub l: f64,
    /// Interdigital series capacitance (F).
    pub c_i: Complex,
    /// Upper plate capacitance (F).
    pub c_u: Complex,
    /// Lower plate capacitance (F).
    pub c_d: f64,
    /// Resonator capacitance (F).
    pub c_c: f64,
    /// Resonator inductance (H).
    pub l_c: f64,
}

impl DpsCircuitValues {
    /// Tabulated values of the optimised unloaded design.
    pub fn tabulated() -> Self {
        Self {
            l: 1.5e-9,
            c_i: Complex::new(1.2e-12, 0.0),
            c_u: Complex::new(14.1e-12, 0.0),
            c_d: 15.9e-12,
            c_c: 7.8e-12,
            l_c: 17.2e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let reals = [
            ("L", self.l),
            ("Re C_i", self.c_i.re),
            ("Re C_u", self.c_u.re),
            ("C_d", self.c_d),
            ("C_c", self.c_c),
            ("L_c", self.l_c),
        ];
        for (name, v) in reals {
            ensure_positive(name, v)?;
        }
        for (name, v) in [("Im C_i", self.c_i.im), ("Im C_u", self.c_u.im)] {
            if !v.is_finite() || v > 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and non-positive (passive loss), got {v:e}"
                )));
            }
        }
        Ok(())
    }

    pub fn total_capacitance(&self) -> Complex {
        self.c_u + self.c_d
    }

    pub fn is_lossless(&self) -> bool {
        self.c_u.im == 0.0 && self.c_i.im == 0.0
    }

    /// Same circuit with the loss (imaginary) parts removed.
    pub fn lossless(&self) -> Self {
        Self {
            c_i: Complex::new(self.c_i.re, 0.0),
            c_u: Complex::new(self.c_u.re, 0.0),
            ..*self
        }
    }

    /// Multiplies every inductance and capacitance by `k`; all characteristic
    /// frequencies then scale by `1/k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            l: self.l * k,
            c_i: self.c_i * k,
            c_u: self.c_u * k,
            c_d: self.c_d * k,
            c_c: self.c_c * k,
            l_c: self.l_c * k,
        }
    }

    /// Series resonance `1/(2π√(L·C_i))`, where `Z` vanishes.
    pub fn series_resonance(&self) -> f64 {
        1.0 / (2.0 * PI * (self.l * self.c_i.re).sqrt())
    }

    /// Zero of the shunt admittance, `1/(2π√(L_c·C_c))`.
    pub fn shunt_zero(&self) -> f64 {
        1.0 / (2.0 * PI * (self.l_c * self.c_c).sqrt())
    }

    /// Pole of the shunt admittance (the second transmission zero),
    /// `1/(2π√(L_c(C_c + C_t)))`.
    pub fn shunt_pole(&self) -> f64 {
        1.0 / (2.0 * PI * (self.l_c * (self.c_c + self.total_capacitance().re)).sqrt())
    }

    /// Series branch impedance `Z` in ohms.
    pub fn series_impedance(&self, f: f64) -> Result<Complex> {
        ensure_positive("frequency", f)?;
        let w = omega(f);
        let j = Complex::i();
        Ok(j * (w * self.l / 2.0) + 1.0 / (j * (2.0 * w) * self.c_i))
    }

    /// Shunt branch admittance `Y` in siemens.
    pub fn shunt_admittance(&self, f: f64) -> Result<Complex> {
        ensure_positive("frequency", f)?;
        let w = omega(f);
        let w2 = w * w;
        let ct = self.total_capacitance();
        let den = 1.0 - w2 * self.l_c * (self.c_c + ct);
        if den.norm() < POLE_GUARD {
            return Err(Error::PoleProximity {
                frequency: f,
                pole: self.shunt_pole(),
            });
        }
        let num = Complex::i() * w * ct * (1.0 - w2 * self.l_c * self.c_c);
        Ok(num / den)
    }

    /// Symmetric T cell `[Z/2] → [Y] → [Z/2]`.
    pub fn unit_cell(&self, f: f64) -> Result<TwoPortAbcd> {
        let half = TwoPortAbcd::series(self.series_impedance(f)? / 2.0)?;
        let shunt = TwoPortAbcd::shunt(self.shunt_admittance(f)?)?;
        Ok(half.cascade(&shunt).cascade(&half))
    }

    /// S-parameters of `n_cells` cascaded cells at a single frequency.
    pub fn sparams_at(&self, f: f64, z0: f64, n_cells: usize) -> Result<SParams> {
        if n_cells == 0 {
            return Err(Error::InvalidInput("n_cells must be at least 1".into()));
        }
        self.unit_cell(f)?.repeated(n_cells).to_s(z0)
    }
}

/// Bloch analysis of one cell at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionPoint {
    pub frequency: f64,
    /// `1 + ZY/2`.
    pub cos_beta_l: Complex,
    /// Phase constant times cell length (rad), `Im ≤ 0`.
    pub beta_l: Complex,
    /// Image (characteristic) impedance in ohms, `Re ≥ 0`.
    pub z_c: Complex,
    pub propagating: bool,
}

impl DispersionPoint {
    /// `|(z_c − z0)/(z_c + z0)|`: how well the image impedance matches the
    /// reference. Infinite when `z_c` is.
    pub fn image_reflection(&self, z0: f64) -> f64 {
        if !crate::rfcore::is_finite(self.z_c) {
            return 1.0;
        }
        ((self.z_c - z0) / (self.z_c + z0)).norm()
    }
}

/// Evaluates `cos βl = 1 + ZY/2` and the image impedance.
pub fn dispersion(c: &DpsCircuitValues, f: f64) -> Result<DispersionPoint> {
    let z = c.series_impedance(f)?;
    let y = c.shunt_admittance(f)?;
    let cos_bl = 1.0 + z * y / 2.0;
    let mut beta_l = cos_bl.acos();
    if beta_l.im > 0.0 {
        beta_l = -beta_l;
    }
    let half = z / 2.0;
    let z_c = (half * (half + 2.0 / y)).sqrt();
    let propagating = cos_bl.re.abs() <= 1.0 && cos_bl.im.abs() < 1e-9 && z_c.re > 0.0;
    Ok(DispersionPoint {
        frequency: f,
        cos_beta_l: cos_bl,
        beta_l,
        z_c,
        propagating,
    })
}

/// How a [`BandStructure`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BandMethod {
    ClosedForm,
    Numeric,
}

/// One contiguous propagating interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Band {
    pub lower: f64,
    pub upper: f64,
    /// The band continues below the first searched frequency.
    pub lower_open: bool,
    /// The band continues above the last searched frequency.
    pub upper_open: bool,
}

impl Band {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.lower && f <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandStructure {
    pub method: BandMethod,
    /// Lower cutoff of the lowest band, if any.
    pub f_cl: Option<f64>,
    /// Upper cutoff of the lowest band, if any.
    pub f_cu: Option<f64>,
    /// Transmission zero of the series branch (always 0 Hz).
    pub f_z1: f64,
    /// Transmission zero at the shunt pole.
    pub f_z2: f64,
    pub bands: Vec<Band>,
}

impl BandStructure {
    pub fn first_band(&self) -> Option<&Band> {
        self.bands.first()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }
}

fn propagating_at(c: &DpsCircuitValues, f: f64) -> bool {
    dispersion(c, f).map(|p| p.propagating).unwrap_or(false)
}

/// Finds the propagating bands of the lossless circuit on `search`, refining
/// every edge by bisection.
pub fn band_edges_numeric(c: &DpsCircuitValues, search: &FrequencyGrid) -> Result<BandStructure> {
    c.validate()?;
    if search.first() > 1e6 || search.last() < 1e10 || search.len() < 10_000 {
        return Err(Error::Precondition(format!(
            "band search must span [1 MHz, 10 GHz] with at least 10^4 points \
             (got [{}, {}] Hz with {} points)",
            search.first(),
            search.last(),
            search.len()
        )));
    }
    let lossless = c.lossless();
    let f = search.points();
    let flags: Vec<bool> = f.iter().map(|&x| propagating_at(&lossless, x)).collect();

    let refine = |mut lo: f64, mut hi: f64, lo_state: bool| {
        while hi - lo > EDGE_RESOLUTION_HZ {
            let mid = 0.5 * (lo + hi);
            if propagating_at(&lossless, mid) == lo_state {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let mut bands = Vec::new();
    let mut open: Option<(f64, bool)> = flags[0].then_some((f[0], true));
    for k in 1..f.len() {
        match (flags[k - 1], flags[k]) {
            (false, true) => open = Some((refine(f[k - 1], f[k], false), false)),
            (true, false) => {
                if let Some((lower, lower_open)) = open.take() {
                    bands.push(Band {
                        lower,
                        upper: refine(f[k - 1], f[k], true),
                        lower_open,
                        upper_open: false,
                    });
                }
            }
            _ => {}
        }
    }
    if let Some((lower, lower_open)) = open {
        bands.push(Band {
            lower,
            upper: f[f.len() - 1],
            lower_open,
            upper_open: true,
        });
    }

    Ok(BandStructure {
        method: BandMethod::Numeric,
        f_cl: bands.first().map(|b| b.lower),
        f_cu: bands.first().map(|b| b.upper),
        f_z1: 0.0,
        f_z2: c.shunt_pole(),
        bands,
    })
}

/// Default search grid for [`band_edges_numeric`]: 1 MHz to 10 GHz, 20 001
/// logarithmic points.
pub fn default_band_search() -> FrequencyGrid {
    FrequencyGrid::logarithmic(1e6, 1e10, 20_001).expect("static grid")
}

/// Coefficients `(a, b, c)` of the closed-form lower cutoff, evaluated with
/// `C = C_t` and all quantities in SI units:
///
/// ```text
/// a = C·L·L_c·C_c·C_i
/// b = C·L·C_i + 8·C_i·L_c·(C_c + C) + L_c·C_c
/// c = 8·C_i + C
/// ```
pub fn closed_form_coefficients(c: &DpsCircuitValues) -> (f64, f64, f64) {
    let ct = c.total_capacitance().re;
    let ci = c.c_i.re;
    let a = ct * c.l * c.l_c * c.c_c * ci;
    let b = ct * c.l * ci + 8.0 * ci * c.l_c * (c.c_c + ct) + c.l_c * c.c_c;
    let cc = 8.0 * ci + ct;
    (a, b, cc)
}

/// Cutoffs from the closed-form expressions:
/// `f_cu = 1/(2π√(L·C_i))` and `f_cl = √(b − √(b² − 4ac)) / (2π√(2a))`.
pub fn band_edges_closed_form(c: &DpsCircuitValues) -> Result<BandStructure> {
    c.validate()?;
    if !c.is_lossless() {
        return Err(Error::Precondition(
            "closed-form band edges need real element values".into(),
        ));
    }
    let (a, b, cc) = closed_form_coefficients(c);
    let disc = b * b - 4.0 * a * cc;
    if disc < 0.0 || !disc.is_finite() {
        return Err(Error::ClosedFormInapplicable { discriminant: disc });
    }
    // b − √disc without cancellation.
    let small = 4.0 * a * cc / (b + disc.sqrt());
    let f_cl = small.sqrt() / (2.0 * PI * (2.0 * a).sqrt());
    let f_cu = c.series_resonance();
    Ok(BandStructure {
        method: BandMethod::ClosedForm,
        f_cl: Some(f_cl),
        f_cu: Some(f_cu),
        f_z1: 0.0,
        f_z2: c.shunt_pole(),
        bands: vec![Band {
            lower: f_cl.min(f_cu),
            upper: f_cl.max(f_cu),
            lower_open: false,
            upper_open: false,
        }],
    })
}

/// One row of a closed-form vs numeric comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscrepancyRow {
    pub quantity: &'static str,
    pub closed_form_hz: Option<f64>,
    pub numeric_hz: Option<f64>,
    /// `closed_form / numeric`.
    pub ratio: Option<f64>,
    pub measured_hz: Option<f64>,
}

/// Side-by-side comparison of both band-edge methods with the measured values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandReport {
    pub closed_form: Option<BandStructure>,
    pub closed_form_error: Option<String>,
    pub closed_form_coefficients: [f64; 3],
    pub numeric: BandStructure,
    pub discrepancies: Vec<DiscrepancyRow>,
}

pub fn band_report(c: &DpsCircuitValues, search: &FrequencyGrid) -> Result<BandReport> {
    let numeric = band_edges_numeric(c, search)?;
    let (closed_form, closed_form_error) = match band_edges_closed_form(c) {
        Ok(b) => (Some(b), None),
        Err(e @ Error::ClosedFormInapplicable { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let ratio = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) if y != 0.0 => Some(x / y),
        _ => None,
    };
    let row = |quantity, cf: Option<f64>, nm: Option<f64>, measured: Option<f64>| DiscrepancyRow {
        quantity,
        closed_form_hz: cf,
        numeric_hz: nm,
        ratio: ratio(cf, nm),
        measured_hz: measured,
    };
    let cf = closed_form.as_ref();
    let discrepancies = vec![
        row(
            "f_cl",
            cf.and_then(|b| b.f_cl),
            numeric.f_cl,
            Some(measured::PASSBAND_LOWER_HZ),
        ),
        row(
            "f_cu",
            cf.and_then(|b| b.f_cu),
            numeric.f_cu,
            Some(measured::PASSBAND_UPPER_HZ),
        ),
        row(
            "f_z2",
            cf.map(|b| b.f_z2),
            Some(numeric.f_z2),
            Some(measured::TRANSMISSION_ZERO_HZ),
        ),
    ];
    Ok(BandReport {
        closed_form,
        closed_form_error,
        closed_form_coefficients: {
            let (a, b, cc) = closed_form_coefficients(c);
            [a, b, cc]
        },
        numeric,
        discrepancies,
    })
}

/// S-parameters at one sweep frequency; `None` when the point is masked by
/// pole proximity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub frequency: f64,
    pub sparams: Option<SParams>,
}

impl SweepPoint {
    pub fn masked(&self) -> bool {
        self.sparams.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub z0: f64,
    pub n_cells: usize,
    pub points: Vec<SweepPoint>,
}

impl Sweep {
    pub fn frequencies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.frequency).collect()
    }

    /// `20 log10 |s_xy|`; NaN at masked points.
    pub fn magnitude_db(&self, pair: PortPair) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| p.sparams.map_or(f64::NAN, |s| db(s.get(pair))))
            .collect()
    }

    /// Phase in degrees, unwrapped across the unmasked points; NaN at masked points.
    pub fn phase_unwrapped_deg(&self, pair: PortPair) -> Vec<f64> {
        let raw: Vec<f64> = self
            .points
            .iter()
            .filter_map(|p| p.sparams.map(|s| s.get(pair).arg()))
            .collect();
        let mut unwrapped = unwrap_phase(&raw).into_iter();
        self.points
            .iter()
            .map(|p| match p.sparams {
                Some(_) => unwrapped.next().map_or(f64::NAN, f64::to_degrees),
                None => f64::NAN,
            })
            .collect()
    }

    pub fn masked_count(&self) -> usize {
        self.points.iter().filter(|p| p.masked()).count()
    }
}

/// Sweeps `n_cells` cascaded cells over `grid`.
pub fn s_parameters(c: &DpsCircuitValues, grid: &FrequencyGrid, z0: f64, n_cells: usize) -> Result<Sweep> {
    s_parameters_with(Exec::default(), c, grid, z0, n_cells)
}

pub fn s_parameters_with(
    exec: Exec,
    c: &DpsCircuitValues,
    grid: &FrequencyGrid,
    z0: f64,
    n_cells: usize,
) -> Result<Sweep> {
    c.validate()?;
    ensure_positive("reference impedance", z0)?;
    if n_cells == 0 {
        return Err(Error::InvalidInput("n_cells must be at least 1".into()));
    }
    let points = exec.try_map(grid.points(), |&f| match c.sparams_at(f, z0, n_cells) {
        Ok(s) => Ok(SweepPoint {
            frequency: f,
            sparams: Some(s),
        }),
        Err(Error::PoleProximity { .. } | Error::SingularNetwork { .. }) => Ok(SweepPoint {
            frequency: f,
            sparams: None,
        }),
        Err(e) => Err(e),
    })?;
    Ok(Sweep { z0, n_cells, points })
}
