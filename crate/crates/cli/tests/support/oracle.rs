//! Second evaluation of every closed form, written from the formulas rather
//! than from the library. Algebraically rearranged where that is natural so
//! the two paths do not share intermediate expressions.

use std::f64::consts::PI;

use dps_core::rfcore::Complex;

pub const EPS0: f64 = 8.854_187_8128e-12;

fn j() -> Complex {
    Complex::new(0.0, 1.0)
}

fn w(f: f64) -> f64 {
    2.0 * PI * f
}

/// Series branch as one fraction: `(1 − ω²L C_i) / (2jω C_i)`.
pub fn series_z(l: f64, c_i: Complex, f: f64) -> Complex {
    let w = w(f);
    (1.0 - w * w * l * c_i) / (2.0 * j() * w * c_i)
}

/// Shunt branch as `C_t` in series with the `L_c ∥ C_c` tank.
pub fn shunt_y(c_t: Complex, c_c: f64, l_c: f64, f: f64) -> Complex {
    let w = w(f);
    let tank = j() * w * l_c / (1.0 - w * w * l_c * c_c);
    1.0 / (1.0 / (j() * w * c_t) + tank)
}

/// Entries of the T cell multiplied out by hand.
pub fn t_cell(z: Complex, y: Complex) -> [Complex; 4] {
    let a = 1.0 + z * y / 2.0;
    let b = z + z * z * y / 4.0;
    [a, b, y, a]
}

/// `cos βl` as the `A` entry of the cell.
pub fn cos_beta_l(z: Complex, y: Complex) -> Complex {
    t_cell(z, y)[0]
}

/// Image impedance `√(B/C)` with `Re ≥ 0`.
pub fn image_impedance(z: Complex, y: Complex) -> Complex {
    let [_, b, c, _] = t_cell(z, y);
    let r = (b / c).sqrt();
    if r.re < 0.0 {
        -r
    } else {
        r
    }
}

/// `[s11, s21, s12, s22]` with numerator and denominator scaled by `z0`.
pub fn abcd_to_s([a, b, c, d]: [Complex; 4], z0: f64) -> [Complex; 4] {
    let den = a * z0 + b + c * z0 * z0 + d * z0;
    [
        (a * z0 + b - c * z0 * z0 - d * z0) / den,
        2.0 * z0 / den,
        2.0 * z0 * (a * d - b * c) / den,
        (-a * z0 + b - c * z0 * z0 + d * z0) / den,
    ]
}

pub fn f_cu(l: f64, c_i: f64) -> f64 {
    (l * c_i).sqrt().recip() / (2.0 * PI)
}

pub fn f_z2(l_c: f64, c_c: f64, c_t: f64) -> f64 {
    (l_c * (c_c + c_t)).sqrt().recip() / (2.0 * PI)
}

pub fn cutoff_coefficients(l: f64, c_i: f64, c_t: f64, c_c: f64, l_c: f64) -> (f64, f64, f64) {
    (
        c_t * l * l_c * c_c * c_i,
        c_t * l * c_i + 8.0 * c_i * l_c * (c_c + c_t) + l_c * c_c,
        8.0 * c_i + c_t,
    )
}

/// Smaller root of `a x² − b x + c` in `x = ω²`, polished by one Newton step.
pub fn f_cl(a: f64, b: f64, c: f64) -> f64 {
    let mut x = 2.0 * c / (b + (b * b - 4.0 * a * c).sqrt());
    x -= (a * x * x - b * x + c) / (2.0 * a * x - b);
    x.sqrt() / (2.0 * PI)
}

pub fn csr_capacitance(eps_r: f64, turns: &[f64], t_m: f64, s_c: f64) -> f64 {
    let per_area = EPS0 * 0.5 * (eps_r + 1.0);
    let elastance: f64 = turns
        .iter()
        .map(|&p| 1.0 / (per_area * (p * t_m / s_c + 2.0 * PI * t_m / (8.0 * t_m / p).ln())))
        .sum();
    elastance.recip()
}

pub fn c_d(eps_r: f64, area: f64, h_d: f64) -> f64 {
    EPS0 * eps_r * area / h_d
}

/// Standard quasi-static mixing.
pub fn eps_eff(eps_r: f64, eps_m: Complex, h_u: f64, a: f64) -> Complex {
    let f = 1.0 / (1.0 + 12.0 * h_u / a).sqrt();
    eps_r * (1.0 + f) / 2.0 + eps_m * (1.0 - f) / 2.0
}

/// Hammerstad end extension.
pub fn delta_l(h: f64, a: f64, e: f64) -> f64 {
    let u = a / h;
    0.412 * h * ((e + 0.3) / (e - 0.258)) * ((u + 0.264) / (u + 0.8))
}

/// `C_u` with the MUT loss carried as `1 − j tanδ_eff`.
pub fn c_u(eps_r: f64, a: f64, b: f64, dl: f64, h_u: f64, e: Complex) -> Complex {
    let lossless = EPS0 * eps_r * (a * b + 2.0 * a * dl) / h_u;
    Complex::new(lossless, lossless * e.im / e.re)
}

pub fn finger_coefficients(h_u: f64, w_i: f64) -> (f64, f64) {
    let r = h_u / w_i;
    (
        4.409 * (0.55 * r.powf(0.45)).tanh(),
        9.92 * (0.52 * r.powf(0.5)).tanh(),
    )
}

/// Interdigital capacitance in farads, finger length in metres.
pub fn c_i(e: Complex, l_i: f64, n: u32, h_u: f64, w_i: f64) -> Complex {
    let (a1, a2) = finger_coefficients(h_u, w_i);
    (e + 1.0) * (l_i * ((n as f64 - 3.0) * a1 + a2)) / 1e12
}

pub fn vwc_from_weights(w1: f64, w2: f64) -> f64 {
    w2 / (w1 + w2) * 100.0
}

pub fn estimation_error(eps: f64, nominal: f64) -> f64 {
    100.0 * (eps / nominal - 1.0).abs()
}

pub fn resolution(deg_per_vwc: f64, accuracy_deg: f64) -> f64 {
    accuracy_deg / deg_per_vwc
}

/// Degrees accumulated over `length_mm` at `delay_per_mm` seconds per mm.
pub fn line_phase_deg(delay_per_mm: f64, f: f64, length_mm: f64) -> f64 {
    delay_per_mm * length_mm * f * 360.0
}

pub fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

pub fn rel_c(a: Complex, b: Complex) -> f64 {
    let s = a.norm().max(b.norm());
    if s == 0.0 {
        0.0
    } else {
        (a - b).norm() / s
    }
}
