//! Circuit values from physical dimensions.
//!
//! * spiral resonator capacitance `C_c` from the turn lengths,
//! * plate capacitances `C_d` and `C_u`, the latter widened by the fringing
//!   extension `ΔL(ε_eff)`,
//! * interdigital capacitance `C_i` from the finger count and width.
//!
//! The soil enters only through the effective permittivity of the top layer,
//! so `C_c` and `C_d` do not depend on it.

use serde::Serialize;

use crate::dps::DpsCircuitValues;
use crate::error::{ensure_positive, Error, Result};
use crate::io::config::{Config, Dim};
use crate::rfcore::Complex;

/// Vacuum permittivity (F/m).
pub const EPS0: f64 = 8.854_187_8128e-12;

/// Superstrate thickness must reach this multiple of `h_u` for the
/// half-space permittivity mixing to apply.
pub const THICK_MUT_RATIO: f64 = 10.0;

const REFERENCE_DESIGN_CFG: &str = include_str!("../data/reference_design.cfg");

/// Shape factor used in the effective-permittivity mixing rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsEffForm {
    /// `F = 1/√(1 + 12h/a)`.
    Standard,
    /// `F = √(1 + 12h/a)`.
    AsPrinted,
}

/// Fringing extension of the top plate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FringingForm {
    /// Hammerstad: `0.412h (ε+0.3)(a/h+0.264) / ((ε−0.258)(a/h+0.8))`.
    Standard,
    /// `0.412h (ε+0.3)(h+0.3) / ((ε−0.258)(a/h+0.8))` with the bare `h`
    /// in the second factor taken in millimetres.
    AsPrinted,
}

/// Treatment of `ln(8t/P_n)` in the spiral capacitance, which is negative
/// for any turn longer than `8t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CsrLogForm {
    Signed,
    Rectified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModelForms {
    pub eps_eff: EpsEffForm,
    pub fringing: FringingForm,
    pub csr_log: CsrLogForm,
}

impl Default for ModelForms {
    fn default() -> Self {
        Self {
            eps_eff: EpsEffForm::Standard,
            fringing: FringingForm::Standard,
            csr_log: CsrLogForm::Signed,
        }
    }
}

/// Physical description of the sensor. All lengths in metres.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometrySpec {
    pub substrate_eps_r: f64,
    /// Substrate loss tangent. Recorded for reference; the extraction treats
    /// the substrate as lossless.
    pub substrate_tan_delta: f64,
    pub h_u: f64,
    pub h_d: f64,
    pub t_m: f64,
    /// Top-layer width.
    pub a: f64,
    /// Top-layer length.
    pub b_len: f64,
    /// Bottom plate area (m²).
    pub a_d: f64,
    /// Length of each resonator turn.
    pub csr_turn_lengths: Vec<f64>,
    /// Resonator gap width.
    pub s_c: f64,
    pub l_i: f64,
    pub w_i: f64,
    pub n_fingers: u32,
    /// Thickness of the material above the top layer.
    pub h_m: f64,
    pub forms: ModelForms,
}

/// Complex relative permittivity of the material under test, `ε′ − jε″`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MutPermittivity {
    pub eps_real: f64,
    /// Loss, stored positive.
    pub eps_imag: f64,
}

impl MutPermittivity {
    pub const AIR: MutPermittivity = MutPermittivity {
        eps_real: 1.0,
        eps_imag: 0.0,
    };

    pub fn new(eps_real: f64, eps_imag: f64) -> Result<Self> {
        if !(eps_real.is_finite() && eps_real >= 1.0) {
            return Err(Error::InvalidInput(format!("ε′ must be ≥ 1, got {eps_real}")));
        }
        if !(eps_imag.is_finite() && eps_imag >= 0.0) {
            return Err(Error::InvalidInput(format!("ε″ must be ≥ 0, got {eps_imag}")));
        }
        Ok(Self { eps_real, eps_imag })
    }

    pub fn lossless(eps_real: f64) -> Result<Self> {
        Self::new(eps_real, 0.0)
    }

    pub fn as_complex(&self) -> Complex {
        Complex::new(self.eps_real, -self.eps_imag)
    }
}

/// Inductances, which the geometry does not determine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Inductors {
    pub l: f64,
    pub l_c: f64,
}

impl Default for Inductors {
    fn default() -> Self {
        let t = DpsCircuitValues::tabulated();
        Self { l: t.l, l_c: t.l_c }
    }
}

/// Turn lengths of a rectangular spiral: each turn is a closed rectangle
/// shrunk by one pitch (`strip + gap`) on every side.
pub fn rectangular_spiral_turns(
    outer_length: f64,
    outer_width: f64,
    strip: f64,
    gap: f64,
    turns: usize,
) -> Result<Vec<f64>> {
    for (n, v) in [
        ("outer length", outer_length),
        ("outer width", outer_width),
        ("strip width", strip),
        ("gap", gap),
    ] {
        ensure_positive(n, v)?;
    }
    if turns == 0 {
        return Err(Error::GeometryInfeasible("spiral needs at least one turn".into()));
    }
    let pitch = strip + gap;
    (0..turns)
        .map(|n| {
            let shrink = 2.0 * pitch * n as f64;
            let (l, w) = (outer_length - shrink, outer_width - shrink);
            if w <= 0.0 || l <= 0.0 {
                Err(Error::GeometryInfeasible(format!(
                    "turn {} of the spiral has non-positive size ({l:e} × {w:e} m)",
                    n + 1
                )))
            } else {
                Ok(2.0 * (l + w))
            }
        })
        .collect()
}

pub const CONFIG_KEYS: &[&str] = &[
    "substrate_eps_r",
    "substrate_tan_delta",
    "h_u",
    "h_d",
    "t_m",
    "a",
    "b_len",
    "A_d",
    "csr_turn_lengths",
    "csr_outer_length",
    "csr_outer_width",
    "csr_strip_width",
    "csr_turns",
    "S_c",
    "l_i",
    "W_i",
    "N_fingers",
    "h_m",
    "L",
    "L_c",
    "eps_eff_form",
    "fringing_form",
    "csr_log",
];

impl GeometrySpec {
    /// Bundled design on FR-4.
    pub fn reference_design() -> Self {
        Self::from_config(&Config::parse(REFERENCE_DESIGN_CFG).expect("bundled config parses"))
            .expect("bundled config is valid")
    }

    pub fn reference_design_config() -> &'static str {
        REFERENCE_DESIGN_CFG
    }

    /// Reads the geometry keys of `cfg`; other keys are ignored.
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let s_c = cfg.quantity("S_c", Dim::Length)?;
        let csr_turn_lengths = if cfg.contains("csr_turn_lengths") {
            cfg.quantity_list("csr_turn_lengths", Dim::Length)?
        } else {
            rectangular_spiral_turns(
                cfg.quantity("csr_outer_length", Dim::Length)?,
                cfg.quantity("csr_outer_width", Dim::Length)?,
                cfg.quantity("csr_strip_width", Dim::Length)?,
                s_c,
                cfg.count("csr_turns")?,
            )
            .map_err(|e| cfg.error("csr_turns", e.to_string()))?
        };
        let n_fingers = cfg.count("N_fingers")?;
        let spec = Self {
            substrate_eps_r: cfg.quantity("substrate_eps_r", Dim::Dimensionless)?,
            substrate_tan_delta: cfg.quantity_or("substrate_tan_delta", Dim::Dimensionless, 0.0)?,
            h_u: cfg.quantity("h_u", Dim::Length)?,
            h_d: cfg.quantity("h_d", Dim::Length)?,
            t_m: cfg.quantity("t_m", Dim::Length)?,
            a: cfg.quantity("a", Dim::Length)?,
            b_len: cfg.quantity("b_len", Dim::Length)?,
            a_d: cfg.quantity("A_d", Dim::Area)?,
            csr_turn_lengths,
            s_c,
            l_i: cfg.quantity("l_i", Dim::Length)?,
            w_i: cfg.quantity("W_i", Dim::Length)?,
            n_fingers: u32::try_from(n_fingers).map_err(|_| cfg.error("N_fingers", "too large"))?,
            h_m: cfg.quantity("h_m", Dim::Length)?,
            forms: ModelForms {
                eps_eff: cfg.choice(
                    "eps_eff_form",
                    &[
                        ("standard", EpsEffForm::Standard),
                        ("as_printed", EpsEffForm::AsPrinted),
                    ],
                    EpsEffForm::Standard,
                )?,
                fringing: cfg.choice(
                    "fringing_form",
                    &[
                        ("standard", FringingForm::Standard),
                        ("as_printed", FringingForm::AsPrinted),
                    ],
                    FringingForm::Standard,
                )?,
                csr_log: cfg.choice(
                    "csr_log",
                    &[
                        ("signed", CsrLogForm::Signed),
                        ("rectified", CsrLogForm::Rectified),
                    ],
                    CsrLogForm::Signed,
                )?,
            },
        };
        spec.validate().map_err(|e| Error::Parse {
            line: 0,
            field: "geometry".into(),
            message: e.to_string(),
        })?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("substrate_eps_r", self.substrate_eps_r),
            ("h_u", self.h_u),
            ("h_d", self.h_d),
            ("t_m", self.t_m),
            ("a", self.a),
            ("b_len", self.b_len),
            ("A_d", self.a_d),
            ("S_c", self.s_c),
            ("l_i", self.l_i),
            ("W_i", self.w_i),
            ("h_m", self.h_m),
        ];
        for (n, v) in lengths {
            ensure_positive(n, v)?;
        }
        if self.substrate_tan_delta < 0.0 || !self.substrate_tan_delta.is_finite() {
            return Err(Error::InvalidInput("substrate_tan_delta must be ≥ 0".into()));
        }
        if self.csr_turn_lengths.is_empty() {
            return Err(Error::InvalidInput(
                "at least one resonator turn is required".into(),
            ));
        }
        for &p in &self.csr_turn_lengths {
            ensure_positive("csr turn length", p)?;
        }
        if self.n_fingers < 4 {
            return Err(Error::InvalidInput(format!(
                "N_fingers must be at least 4, got {}",
                self.n_fingers
            )));
        }
        Ok(())
    }

    /// The superstrate is thick enough for the half-space mixing rule.
    pub fn thick_mut(&self) -> bool {
        self.h_m >= THICK_MUT_RATIO * self.h_u
    }
}

/// One turn's bracket `P t/S + 2π t / ln(8t/P)`, in metres.
pub fn csr_turn_bracket(p_n: f64, t_m: f64, s_c: f64, log: CsrLogForm) -> Result<f64> {
    let arg = 8.0 * t_m / p_n;
    if arg <= 0.0 || arg == 1.0 {
        return Err(Error::GeometryInfeasible(format!(
            "log argument 8t/P = {arg} is not usable"
        )));
    }
    let ln = match log {
        CsrLogForm::Signed => arg.ln(),
        CsrLogForm::Rectified => arg.ln().abs(),
    };
    let bracket = p_n * t_m / s_c + 2.0 * std::f64::consts::PI * t_m / ln;
    if !(bracket > 0.0) || !bracket.is_finite() {
        return Err(Error::GeometryInfeasible(format!(
            "turn of length {p_n:e} m gives non-positive bracket {bracket:e}"
        )));
    }
    Ok(bracket)
}

/// Series combination of the per-turn capacitances
/// `ε0 (ε_r+1)/2 [P_n t/S + 2π t/ln(8t/P_n)]`.
pub fn csr_capacitance(g: &GeometrySpec) -> Result<f64> {
    g.validate()?;
    let eps = EPS0 * (g.substrate_eps_r + 1.0) / 2.0;
    let mut inv = 0.0;
    for &p in &g.csr_turn_lengths {
        inv += 1.0 / (eps * csr_turn_bracket(p, g.t_m, g.s_c, g.forms.csr_log)?);
    }
    Ok(1.0 / inv)
}

/// `(ε_r + ε_m)/2 + (ε_r − ε_m)/2 · F`, relative.
pub fn eps_eff_mixing(eps_r: f64, eps_m: Complex, h_over_a: f64, form: EpsEffForm) -> Complex {
    let root = (1.0 + 12.0 * h_over_a).sqrt();
    let f = match form {
        EpsEffForm::Standard => 1.0 / root,
        EpsEffForm::AsPrinted => root,
    };
    (eps_r + eps_m) / 2.0 + (eps_r - eps_m) / 2.0 * f
}

/// Effective relative permittivity of the top layer under a thick superstrate.
pub fn effective_permittivity(g: &GeometrySpec, m: MutPermittivity) -> Result<Complex> {
    g.validate()?;
    if !g.thick_mut() {
        return Err(Error::Precondition(format!(
            "superstrate thickness {} m is below {THICK_MUT_RATIO}·h_u",
            g.h_m
        )));
    }
    Ok(eps_eff_mixing(
        g.substrate_eps_r,
        m.as_complex(),
        g.h_u / g.a,
        g.forms.eps_eff,
    ))
}

/// Fringing extension in metres for one plate edge.
pub fn fringing_extension(h: f64, a: f64, eps_eff: f64, form: FringingForm) -> Result<f64> {
    let den_eps = eps_eff - 0.258;
    if !(den_eps > 0.0) {
        return Err(Error::FormulaDomain(format!(
            "ε_eff = {eps_eff} must exceed 0.258"
        )));
    }
    let w_h = a / h;
    let second = match form {
        FringingForm::Standard => w_h + 0.264,
        FringingForm::AsPrinted => h * 1e3 + 0.3,
    };
    Ok(0.412 * h * (eps_eff + 0.3) * second / (den_eps * (w_h + 0.8)))
}

pub fn effective_length_increment(g: &GeometrySpec, eps_eff_real: f64) -> Result<f64> {
    g.validate()?;
    fringing_extension(g.h_u, g.a, eps_eff_real, g.forms.fringing)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlateCapacitances {
    pub c_d: f64,
    pub c_u: Complex,
    pub delta_l: f64,
    pub eps_eff: Complex,
}

/// `C_d = ε0 ε_r A_d/h_d`, `C_u = ε0 ε_r a(b + 2ΔL)/h_u · (1 − j tanδ_eff)`.
pub fn plate_capacitances(g: &GeometrySpec, m: MutPermittivity) -> Result<PlateCapacitances> {
    let eps_eff = effective_permittivity(g, m)?;
    let delta_l = effective_length_increment(g, eps_eff.re)?;
    let c_d = EPS0 * g.substrate_eps_r * g.a_d / g.h_d;
    let area = g.a * (g.b_len + 2.0 * delta_l);
    let tan_eff = -eps_eff.im / eps_eff.re;
    let c_u = EPS0 * g.substrate_eps_r * area / g.h_u * Complex::new(1.0, -tan_eff);
    Ok(PlateCapacitances {
        c_d,
        c_u,
        delta_l,
        eps_eff,
    })
}

/// `(A1, A2)` finger coefficients for a finger width `w` on a substrate `h`.
pub fn interdigital_coefficients(h: f64, w: f64) -> (f64, f64) {
    let r = h / w;
    (
        4.409 * (0.55 * r.powf(0.45)).tanh(),
        9.92 * (0.52 * r.sqrt()).tanh(),
    )
}

/// `C_i = (ε_eff + 1) l_i [(N−3)A1 + A2]` pF with `l_i` in metres.
pub fn interdigital_capacitance(g: &GeometrySpec, eps_eff: Complex) -> Result<Complex> {
    g.validate()?;
    let (a1, a2) = interdigital_coefficients(g.h_u, g.w_i);
    let bracket = f64::from(g.n_fingers - 3) * a1 + a2;
    Ok((eps_eff + 1.0) * g.l_i * bracket * 1e-12)
}

/// Intermediate values of one extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extraction {
    pub mut_permittivity: MutPermittivity,
    pub eps_eff: Complex,
    pub delta_l: f64,
    pub circuit: DpsCircuitValues,
}

pub fn extract(g: &GeometrySpec, m: MutPermittivity, inductors: Inductors) -> Result<Extraction> {
    ensure_positive("L", inductors.l)?;
    ensure_positive("L_c", inductors.l_c)?;
    let plates = plate_capacitances(g, m)?;
    let c_i = interdigital_capacitance(g, plates.eps_eff)?;
    let c_c = csr_capacitance(g)?;
    let circuit = DpsCircuitValues {
        l: inductors.l,
        c_i,
        c_u: plates.c_u,
        c_d: plates.c_d,
        c_c,
        l_c: inductors.l_c,
    };
    circuit.validate()?;
    Ok(Extraction {
        mut_permittivity: m,
        eps_eff: plates.eps_eff,
        delta_l: plates.delta_l,
        circuit,
    })
}

pub fn extract_circuit(
    g: &GeometrySpec,
    m: MutPermittivity,
    inductors: Inductors,
) -> Result<DpsCircuitValues> {
    extract(g, m, inductors).map(|e| e.circuit)
}
