//! Pulses and tones through a line buried in dispersive soil.
//!
//! The soil follows a Debye relaxation model, the line's effective
//! permittivity mixes it with the substrate, and propagation is a bin-wise
//! multiplication by `H(f) = exp(−jω√ε_eff·ℓ/c0)` in the frequency domain.
//! A single tone only sees `H` at one frequency and comes out as a scaled,
//! shifted copy of itself; a pulse sees the whole dispersion curve.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::geometry::{eps_eff_mixing, EpsEffForm, EPS0};
use crate::par::Exec;
use crate::rfcore::{is_finite, Complex};
use crate::soilcal::SoilCalibrationCurve;

/// Speed of light in vacuum (m/s).
pub const C0: f64 = 299_792_458.0;

/// Default high-frequency permittivity of dry sand.
pub const DEFAULT_EPS_INF: f64 = 2.5;

/// Fraction of output energy allowed in the guard region at the end of the
/// padded buffer.
pub const ALIASING_LIMIT: f64 = 1e-3;

/// Debye relaxation: `ε(f) = ε∞ + Σ Δε_k/(1 + jωτ_k) − jσ/(ωε0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DebyeModel {
    pub eps_inf: f64,
    pub delta_eps: Vec<f64>,
    pub tau: Vec<f64>,
    /// DC conductivity (S/m).
    pub sigma_dc: f64,
}

impl DebyeModel {
    pub fn new(eps_inf: f64, delta_eps: Vec<f64>, tau: Vec<f64>, sigma_dc: f64) -> Result<Self> {
        let m = Self {
            eps_inf,
            delta_eps,
            tau,
            sigma_dc,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_inf.is_finite() && self.eps_inf >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "ε∞ must be ≥ 1, got {}",
                self.eps_inf
            )));
        }
        if self.delta_eps.len() != self.tau.len() || !(1..=2).contains(&self.tau.len()) {
            return Err(Error::InvalidInput("Debye order must be 1 or 2".into()));
        }
        for (&d, &t) in self.delta_eps.iter().zip(&self.tau) {
            ensure_positive("Δε", d)?;
            ensure_positive("τ", t)?;
        }
        if !(self.sigma_dc.is_finite() && self.sigma_dc >= 0.0) {
            return Err(Error::InvalidInput("σ_dc must be ≥ 0".into()));
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.tau.len()
    }

    pub fn static_permittivity(&self) -> f64 {
        self.eps_inf + self.delta_eps.iter().sum::<f64>()
    }

    pub fn permittivity(&self, f: f64) -> Complex {
        let w = 2.0 * PI * f;
        let j = Complex::i();
        let mut eps = Complex::new(self.eps_inf, 0.0);
        for (&d, &t) in self.delta_eps.iter().zip(&self.tau) {
            eps += d / (1.0 + j * w * t);
        }
        if self.sigma_dc > 0.0 {
            eps -= j * self.sigma_dc / (w * EPS0);
        }
        eps
    }
}

/// A first-order fit and how far its loss misses the anchor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DebyeFit {
    pub model: DebyeModel,
    pub anchor_frequency: f64,
    pub anchor: Complex,
    /// `Im ε_model(f_anchor) − Im ε_anchor`.
    pub imag_mismatch: f64,
    pub iterations: usize,
}

/// Static permittivity for which a first-order model through the anchor's
/// `ε′` also reproduces its `ε″`.
pub fn loss_matched_static(eps_real: f64, eps_imag: f64, eps_inf: f64) -> Result<f64> {
    if !(eps_real > eps_inf) {
        return Err(Error::FitInfeasible(format!(
            "ε′ = {eps_real} must exceed ε∞ = {eps_inf}"
        )));
    }
    if !(eps_imag >= 0.0) {
        return Err(Error::FitInfeasible(format!("ε″ = {eps_imag} must be ≥ 0")));
    }
    let x = eps_imag / (eps_real - eps_inf);
    Ok(eps_inf + (eps_real - eps_inf) * (1.0 + x * x))
}

/// First-order fit with `ε∞` and the static value fixed; `τ` is found by
/// bisection on `log τ` so that `Re ε(f_anchor)` matches.
pub fn fit_debye(anchor_f: f64, anchor: Complex, static_eps: f64, eps_inf: f64) -> Result<DebyeFit> {
    ensure_positive("anchor frequency", anchor_f)?;
    ensure_finite("anchor ε′", anchor.re)?;
    ensure_finite("anchor ε″", anchor.im)?;
    let target = anchor.re;
    if !(eps_inf >= 1.0) {
        return Err(Error::FitInfeasible(format!("ε∞ = {eps_inf} must be ≥ 1")));
    }
    if target == static_eps {
        return Err(Error::Degenerate(
            "anchor ε′ equals the static value, which forces τ → 0".into(),
        ));
    }
    if !(target > eps_inf && target < static_eps) {
        return Err(Error::FitInfeasible(format!(
            "anchor ε′ = {target} is not between ε∞ = {eps_inf} and static {static_eps}"
        )));
    }
    let delta = static_eps - eps_inf;
    let w = 2.0 * PI * anchor_f;
    let re_at = |log_tau: f64| {
        let wt = w * log_tau.exp();
        eps_inf + delta / (1.0 + wt * wt)
    };
    // Re ε falls monotonically with τ.
    let (mut lo, mut hi) = ((1e-18f64).ln(), (1.0f64).ln());
    let mut iterations = 0;
    while iterations < 200 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let v = re_at(mid);
        if (v - target).abs() <= 1e-12 * target {
            lo = mid;
            hi = mid;
            break;
        }
        if v > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = (0.5 * (lo + hi)).exp();
    let model = DebyeModel::new(eps_inf, vec![delta], vec![tau], 0.0)?;
    let got = model.permittivity(anchor_f);
    if (got.re - target).abs() > 1e-6 {
        return Err(Error::FitInfeasible(format!(
            "bisection ended at ε′ = {} for target {target}",
            got.re
        )));
    }
    Ok(DebyeFit {
        imag_mismatch: got.im - anchor.im,
        model,
        anchor_frequency: anchor_f,
        anchor,
        iterations,
    })
}

/// Anchor frequency of the calibration data.
pub const ANCHOR_FREQUENCY: f64 = 130e6;

/// Fit for one VWC of a calibration curve, with the loss-matched static value.
pub fn fit_from_curve(curve: &SoilCalibrationCurve, vwc: f64, eps_inf: f64) -> Result<DebyeFit> {
    let m = curve.permittivity_from_vwc(vwc)?;
    let static_eps = loss_matched_static(m.eps_real, m.eps_imag, eps_inf)?;
    fit_debye(ANCHOR_FREQUENCY, m.as_complex(), static_eps, eps_inf)
}

/// Buried microstrip: substrate below, soil above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BuriedLine {
    pub width: f64,
    pub height: f64,
    pub substrate_eps_r: f64,
    pub length: f64,
    pub form: EpsEffForm,
}

impl Default for BuriedLine {
    fn default() -> Self {
        Self {
            width: 1.15e-3,
            height: 0.6e-3,
            substrate_eps_r: 4.3,
            length: 0.60,
            form: EpsEffForm::Standard,
        }
    }
}

impl BuriedLine {
    pub fn eps_eff(&self, eps_soil: Complex) -> Complex {
        eps_eff_mixing(
            self.substrate_eps_r,
            eps_soil,
            self.height / self.width,
            self.form,
        )
    }
}

/// `exp(−jω√ε·ℓ/c0)` with the root taken in the lower half plane.
pub fn transfer_at(eps_eff: Complex, length: f64, f: f64) -> Complex {
    if f == 0.0 {
        return Complex::new(1.0, 0.0);
    }
    let mut root = eps_eff.sqrt();
    if root.im > 0.0 {
        root = root.conj();
    }
    let w = 2.0 * PI * f;
    (-Complex::i() * w * root * length / C0).exp()
}

pub fn line_transfer_function(
    eps_of_f: impl Fn(f64) -> Complex,
    length: f64,
    freqs: &[f64],
) -> Result<Vec<Complex>> {
    ensure_positive("line length", length)?;
    Ok(freqs
        .iter()
        .map(|&f| transfer_at(eps_of_f(f), length, f))
        .collect())
}

/// Product of per-segment transfer functions; interface reflections are
/// ignored.
pub fn segmented_transfer_function(
    segments: &[(f64, &dyn Fn(f64) -> Complex)],
    freqs: &[f64],
) -> Result<Vec<Complex>> {
    let mut h = vec![Complex::new(1.0, 0.0); freqs.len()];
    for (length, eps) in segments {
        for (hk, hs) in h.iter_mut().zip(line_transfer_function(eps, *length, freqs)?) {
            *hk *= hs;
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Waveform {
    pub sample_rate: f64,
    pub samples: Vec<f64>,
    /// Time of the first sample.
    pub t0: f64,
}

impl Waveform {
    pub fn new(sample_rate: f64, samples: Vec<f64>, t0: f64) -> Result<Self> {
        ensure_positive("sample rate", sample_rate)?;
        if samples.len() < 2 {
            return Err(Error::Sampling("a waveform needs at least two samples".into()));
        }
        Ok(Self {
            sample_rate,
            samples,
            t0,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum::<f64>() * self.dt()
    }

    /// Sum of samples times `dt`.
    pub fn integral(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.dt()
    }

    /// Zero-padded copy of length `n`.
    pub fn padded(&self, n: usize) -> Self {
        let mut samples = self.samples.clone();
        samples.resize(n.max(self.len()), 0.0);
        Self { samples, ..*self }
    }

    /// Samples with `t_start ≤ t ≤ t_end`.
    pub fn window(&self, t_start: f64, t_end: f64) -> Self {
        let first = ((t_start - self.t0) * self.sample_rate).ceil().max(0.0) as usize;
        let last = (((t_end - self.t0) * self.sample_rate).floor() as usize).min(self.len() - 1);
        let first = first.min(last);
        Self {
            sample_rate: self.sample_rate,
            samples: self.samples[first..=last].to_vec(),
            t0: self.time(first),
        }
    }

    /// Two-column CSV, `time_s,amplitude`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 32);
        out.push_str("time_s,amplitude\n");
        for (i, x) in self.samples.iter().enumerate() {
            out.push_str(&format!("{:.6e},{:.9e}\n", self.time(i), x));
        }
        out
    }
}

/// Trapezoidal pulse of unit height. `pulse_width` is measured between the
/// 50% points, which fall half-way between samples.
pub fn make_pulse(pulse_width: f64, rise_time: f64, sample_rate: f64) -> Result<Waveform> {
    ensure_positive("rise time", rise_time)?;
    ensure_positive("pulse width", pulse_width)?;
    ensure_positive("sample rate", sample_rate)?;
    if sample_rate * rise_time < 20.0 * (1.0 - 1e-9) {
        return Err(Error::Sampling(format!(
            "{sample_rate} Hz gives fewer than 20 samples per {rise_time} s edge"
        )));
    }
    if rise_time > pulse_width {
        return Err(Error::Sampling("rise time exceeds pulse width".into()));
    }
    let dt = 1.0 / sample_rate;
    let lead = (rise_time * sample_rate).ceil() as usize + 1;
    let t_a = (lead as f64 - 0.5) * dt;
    let t_b = t_a + pulse_width;
    let n = ((t_b + rise_time) * sample_rate).ceil() as usize + lead;
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 * dt;
            let up = (t - (t_a - rise_time / 2.0)) / rise_time;
            let down = ((t_b + rise_time / 2.0) - t) / rise_time;
            up.min(down).clamp(0.0, 1.0)
        })
        .collect();
    Waveform::new(sample_rate, samples, 0.0)
}

/// Sine burst with raised-cosine ramps at both ends.
pub fn tone_burst(f: f64, cycles: usize, ramp_cycles: usize, sample_rate: f64) -> Result<Waveform> {
    ensure_positive("tone frequency", f)?;
    if sample_rate < 4.0 * f {
        return Err(Error::Sampling(format!(
            "{sample_rate} Hz is too slow for a {f} Hz tone"
        )));
    }
    if 2 * ramp_cycles >= cycles {
        return Err(Error::Sampling("ramps leave no steady-state part".into()));
    }
    let n = (cycles as f64 * sample_rate / f).round() as usize;
    let ramp = ramp_cycles as f64 / f;
    let total = cycles as f64 / f;
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 / sample_rate;
            let env = if t < ramp {
                0.5 * (1.0 - (PI * t / ramp).cos())
            } else if t > total - ramp {
                0.5 * (1.0 - (PI * (total - t) / ramp).cos())
            } else {
                1.0
            };
            env * (2.0 * PI * f * t).sin()
        })
        .collect();
    Waveform::new(sample_rate, samples, 0.0)
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Plans {
    let mut planner = FftPlanner::new();
    Plans {
        forward: planner.plan_fft_forward(n),
        inverse: planner.plan_fft_inverse(n),
    }
}

/// Frequency of bin `k` of an `n`-point transform, `k ≤ n/2`.
fn bin_frequency(k: usize, n: usize, sample_rate: f64) -> f64 {
    k as f64 * sample_rate / n as f64
}

/// Filters `w` through `h(f)` with an `n_fft`-point transform.
///
/// `h` is evaluated on the non-negative bins and mirrored, so the output is
/// real. `n_fft` must be a power of two and at least four times the input
/// length.
pub fn propagate(w: &Waveform, h: impl Fn(f64) -> Complex, n_fft: usize) -> Result<Waveform> {
    if !n_fft.is_power_of_two() || n_fft < 4 * w.len() {
        return Err(Error::Sampling(format!(
            "transform length {n_fft} must be a power of two ≥ 4 × {}",
            w.len()
        )));
    }
    let p = plans(n_fft);
    let mut buf: Vec<Complex> = w
        .padded(n_fft)
        .samples
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .collect();
    p.forward.process(&mut buf);
    let half = n_fft / 2;
    for k in 0..=half {
        let mut hk = h(bin_frequency(k, n_fft, w.sample_rate));
        if !is_finite(hk) {
            return Err(Error::InvalidInput(format!(
                "transfer function is not finite at bin {k}"
            )));
        }
        if k == 0 || k == half {
            hk = Complex::new(hk.re, 0.0);
        }
        buf[k] *= hk;
        if k != 0 && k != half {
            buf[n_fft - k] *= hk.conj();
        }
    }
    p.inverse.process(&mut buf);
    let scale = 1.0 / n_fft as f64;
    let samples: Vec<f64> = buf.iter().map(|z| z.re * scale).collect();

    let total: f64 = samples.iter().map(|x| x * x).sum();
    let guard = n_fft / 10;
    let tail: f64 = samples[n_fft - guard..].iter().map(|x| x * x).sum();
    if total > 0.0 && tail / total > ALIASING_LIMIT {
        return Err(Error::Aliasing {
            tail_fraction: tail / total,
        });
    }
    Waveform::new(w.sample_rate, samples, w.t0)
}

/// How much a waveform changed shape on the way through a line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistortionReport {
    /// `‖y − g·x_d‖ / ‖g·x_d‖`, with `x_d` the delayed input and `g` the
    /// least-squares gain.
    pub nrmse_vs_delayed_input: f64,
    /// Spread of the 10…90% rise instants beyond that of the input (s);
    /// not defined for tones.
    pub edge_jitter: Option<f64>,
    /// Tone-bin power over all other power (dB), for tone runs.
    pub spectral_purity_db: Option<f64>,
    /// Delay used for the comparison (s).
    pub delay: f64,
    pub gain: f64,
}

/// Delay of `y` relative to `x` at the cross-correlation peak, refined by a
/// parabola through the peak and its neighbours.
pub fn correlation_delay(x: &Waveform, y: &Waveform) -> Result<f64> {
    if x.sample_rate != y.sample_rate {
        return Err(Error::Sampling("sample rates differ".into()));
    }
    let n = (x.len() + y.len()).next_power_of_two();
    let p = plans(n);
    let to_buf = |w: &Waveform| {
        let mut b: Vec<Complex> = w.samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
        b.resize(n, Complex::new(0.0, 0.0));
        b
    };
    let mut a = to_buf(x);
    let mut b = to_buf(y);
    p.forward.process(&mut a);
    p.forward.process(&mut b);
    let mut c: Vec<Complex> = a.iter().zip(&b).map(|(u, v)| u.conj() * v).collect();
    p.inverse.process(&mut c);
    let r: Vec<f64> = c.iter().map(|z| z.re).collect();
    let (k, _) = r.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |best, (i, &v)| if v > best.1 { (i, v) } else { best },
    );
    let prev = r[(k + n - 1) % n];
    let next = r[(k + 1) % n];
    let den = prev - 2.0 * r[k] + next;
    let frac = if den.abs() > 0.0 {
        0.5 * (prev - next) / den
    } else {
        0.0
    };
    let lag = if k > n / 2 { k as f64 - n as f64 } else { k as f64 };
    Ok((lag + frac) / x.sample_rate + (y.t0 - x.t0))
}

/// Copy of `x` delayed by `delay`, sampled on `y`'s time axis.
fn delayed_on(x: &Waveform, delay: f64, y: &Waveform) -> Vec<f64> {
    let n = (x.len().max(y.len()) * 2).next_power_of_two();
    let p = plans(n);
    let mut buf: Vec<Complex> = x.samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(n, Complex::new(0.0, 0.0));
    p.forward.process(&mut buf);
    let shift = delay + x.t0 - y.t0;
    for (k, z) in buf.iter_mut().enumerate() {
        let kk = if k > n / 2 { k as f64 - n as f64 } else { k as f64 };
        let f = kk * x.sample_rate / n as f64;
        *z *= Complex::from_polar(1.0, -2.0 * PI * f * shift);
    }
    if n % 2 == 0 {
        let nyq = n / 2;
        buf[nyq] = Complex::new(0.0, 0.0);
    }
    p.inverse.process(&mut buf);
    buf.iter().take(y.len()).map(|z| z.re / n as f64).collect()
}

/// First instants at which the leading edge crosses each fraction of the
/// peak, by linear interpolation.
pub fn rise_instants(w: &Waveform, fractions: &[f64]) -> Vec<f64> {
    let (lo, hi) = w
        .samples
        .iter()
        .fold((0.0f64, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let peak_at = w.samples.iter().position(|&v| v == hi).unwrap_or(0);
    fractions
        .iter()
        .map(|&q| {
            let level = lo + q * (hi - lo);
            let mut t = w.time(peak_at);
            for i in 1..=peak_at {
                let (a, b) = (w.samples[i - 1], w.samples[i]);
                if a < level && b >= level {
                    t = w.time(i - 1) + (level - a) / (b - a) * w.dt();
                    break;
                }
            }
            t
        })
        .collect()
}

const EDGE_FRACTIONS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

fn spread(t: &[f64]) -> f64 {
    t.iter().copied().fold(f64::NEG_INFINITY, f64::max) - t.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn distortion_metrics(
    input: &Waveform,
    output: &Waveform,
    nominal_delay: Option<f64>,
) -> Result<DistortionReport> {
    if input.sample_rate != output.sample_rate {
        return Err(Error::Sampling("input and output sample rates differ".into()));
    }
    let delay = match nominal_delay {
        Some(d) => d,
        None => correlation_delay(input, output)?,
    };
    let x = delayed_on(input, delay, output);
    let y = &output.samples;
    let xx: f64 = x.iter().map(|v| v * v).sum();
    let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let gain = if xx > 0.0 { xy / xx } else { 0.0 };
    let err: f64 = x.iter().zip(y).map(|(a, b)| (b - gain * a).powi(2)).sum();
    let reference = gain * gain * xx;
    let nrmse = if reference > 0.0 {
        (err / reference).sqrt()
    } else {
        f64::INFINITY
    };
    let jitter =
        spread(&rise_instants(output, &EDGE_FRACTIONS)) - spread(&rise_instants(input, &EDGE_FRACTIONS));
    Ok(DistortionReport {
        nrmse_vs_delayed_input: nrmse,
        edge_jitter: Some(jitter.abs()),
        spectral_purity_db: None,
        delay,
        gain,
    })
}

/// Power in the tone bin over all other bins (dB) for `periods` whole
/// periods of `f` starting at `t_start`.
pub fn spectral_purity(w: &Waveform, f: f64, t_start: f64, periods: usize) -> Result<f64> {
    let per_period = w.sample_rate / f;
    if (per_period - per_period.round()).abs() > 1e-9 * per_period {
        return Err(Error::Sampling(
            "sample rate must be an integer multiple of the tone frequency".into(),
        ));
    }
    let m = periods * per_period.round() as usize;
    let first = ((t_start - w.t0) * w.sample_rate).round().max(0.0) as usize;
    if first + m > w.len() || periods == 0 {
        return Err(Error::Sampling("analysis segment runs past the waveform".into()));
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    let mut buf: Vec<Complex> = w.samples[first..first + m]
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .collect();
    fft.process(&mut buf);
    let power: Vec<f64> = buf[..=m / 2].iter().map(|z| z.norm_sqr()).collect();
    let tone = power[periods];
    let rest: f64 = power
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != periods)
        .map(|(_, p)| p)
        .sum::<f64>()
        .max(tone * 1e-30);
    if !(tone > 0.0) {
        return Err(Error::Degenerate("no power at the tone frequency".into()));
    }
    Ok(10.0 * (tone / rest).log10())
}

/// Settings of the pulse and tone experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PulseStudy {
    pub line: BuriedLine,
    pub vwc: Vec<f64>,
    pub pulse_widths: Vec<f64>,
    /// Edge duration as a fraction of the pulse width.
    pub rise_fraction: f64,
    pub pulse_sample_rate: f64,
    pub pulse_fft_len: usize,
    pub tone_frequency: f64,
    pub tone_samples_per_period: usize,
    pub tone_cycles: usize,
    pub tone_ramp_cycles: usize,
    pub eps_inf: f64,
}

impl Default for PulseStudy {
    fn default() -> Self {
        Self {
            line: BuriedLine::default(),
            vwc: vec![10.0, 20.0, 30.0],
            pulse_widths: vec![50e-12, 450e-12, 1e-9],
            rise_fraction: 0.1,
            pulse_sample_rate: 4e12,
            pulse_fft_len: 1 << 18,
            tone_frequency: 120e6,
            tone_samples_per_period: 64,
            tone_cycles: 80,
            tone_ramp_cycles: 5,
            eps_inf: DEFAULT_EPS_INF,
        }
    }
}

/// One `(excitation, VWC)` run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    /// `None` for the tone.
    pub pulse_width: Option<f64>,
    pub vwc: f64,
    pub report: DistortionReport,
    /// Output around the arrival, for export.
    #[serde(skip)]
    pub output: Waveform,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    pub fits: Vec<DebyeFit>,
    pub scenarios: Vec<Scenario>,
    /// `nrmse[i][j]` for `pulse_widths[i]`, `vwc[j]`.
    pub nrmse: Vec<Vec<f64>>,
    pub tone_purity_db: Vec<f64>,
}

enum Excitation {
    Pulse(f64),
    Tone,
}

impl PulseStudy {
    fn run_one(&self, fit: &DebyeFit, vwc: f64, exc: &Excitation) -> Result<Scenario> {
        let line = self.line;
        let eps = |f: f64| line.eps_eff(fit.model.permittivity(f));
        let h = |f: f64| transfer_at(eps(f), line.length, f);
        match *exc {
            Excitation::Pulse(pw) => {
                let input = make_pulse(pw, pw * self.rise_fraction, self.pulse_sample_rate)?;
                let output = propagate(&input, h, self.pulse_fft_len)?;
                let report = distortion_metrics(&input, &output, None)?;
                let window = output.window(report.delay - 1e-9, report.delay + pw + 2e-9);
                Ok(Scenario {
                    pulse_width: Some(pw),
                    vwc,
                    report,
                    output: window,
                })
            }
            Excitation::Tone => {
                let f = self.tone_frequency;
                let fs = f * self.tone_samples_per_period as f64;
                let input = tone_burst(f, self.tone_cycles, self.tone_ramp_cycles, fs)?;
                let n_fft = (4 * input.len()).next_power_of_two();
                let output = propagate(&input, h, n_fft)?;
                let mut report = distortion_metrics(&input, &output, None)?;
                report.edge_jitter = None;
                // steady state: skip the ramp and one more ramp length for
                // the dispersed transient
                let settle = 2 * self.tone_ramp_cycles;
                let periods = self.tone_cycles - 2 * settle;
                let delay_periods = (report.delay * f).ceil();
                let t_start = (settle as f64 + delay_periods) / f;
                report.spectral_purity_db = Some(spectral_purity(&output, f, t_start, periods)?);
                let end = report.delay + self.tone_cycles as f64 / f;
                let window = output.window(0.0, end);
                Ok(Scenario {
                    pulse_width: None,
                    vwc,
                    report,
                    output: window,
                })
            }
        }
    }

    pub fn run(&self, curve: &SoilCalibrationCurve) -> Result<StudyResult> {
        self.run_with(Exec::default(), curve)
    }

    /// Runs every pulse width and the tone at every VWC.
    pub fn run_with(&self, exec: Exec, curve: &SoilCalibrationCurve) -> Result<StudyResult> {
        let fits = self
            .vwc
            .iter()
            .map(|&v| fit_from_curve(curve, v, self.eps_inf))
            .collect::<Result<Vec<_>>>()?;
        let mut jobs = Vec::new();
        for &pw in &self.pulse_widths {
            for j in 0..self.vwc.len() {
                jobs.push((Excitation::Pulse(pw), j));
            }
        }
        for j in 0..self.vwc.len() {
            jobs.push((Excitation::Tone, j));
        }
        let scenarios = exec.try_map(&jobs, |(exc, j)| self.run_one(&fits[*j], self.vwc[*j], exc))?;
        let nv = self.vwc.len();
        let nrmse = (0..self.pulse_widths.len())
            .map(|i| {
                (0..nv)
                    .map(|j| scenarios[i * nv + j].report.nrmse_vs_delayed_input)
                    .collect()
            })
            .collect();
        let tone_purity_db = scenarios[self.pulse_widths.len() * nv..]
            .iter()
            .map(|s| s.report.spectral_purity_db.unwrap_or(f64::NAN))
            .collect();
        Ok(StudyResult {
            fits,
            scenarios,
            nrmse,
            tone_purity_db,
        })
    }
}

/// NRMSE grows down the rows (shorter pulses first) and along the columns.
pub fn is_monotone_matrix(m: &[Vec<f64>]) -> bool {
    let rows_ok = m.iter().all(|r| r.windows(2).all(|w| w[1] > w[0]));
    let cols_ok = m.windows(2).all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| a > b));
    rows_ok && cols_ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn single(eps_inf: f64, d: f64, tau: f64) -> DebyeModel {
        DebyeModel::new(eps_inf, vec![d], vec![tau], 0.0).unwrap()
    }

    #[test]
    fn debye_limits() {
        let m = single(2.5, 10.0, 1e-9);
        assert_relative_eq!(m.permittivity(1e-3).re, 12.5, max_relative = 1e-9);
        assert_relative_eq!(m.permittivity(1e18).re, 2.5, max_relative = 1e-6);
        let peak = m.permittivity(1.0 / (2.0 * PI * 1e-9));
        assert_relative_eq!(peak.im, -5.0, max_relative = 1e-12);
        assert_relative_eq!(peak.re, 7.5, max_relative = 1e-12);
    }

    #[test]
    fn debye_is_passive() {
        let m = DebyeModel::new(3.0, vec![4.0, 9.0], vec![1e-11, 3e-9], 0.01).unwrap();
        for k in 0..200 {
            let f = 10f64.powf(3.0 + 0.05 * k as f64);
            assert!(m.permittivity(f).im <= 0.0);
        }
    }

    #[test]
    fn invalid_models() {
        assert!(DebyeModel::new(0.5, vec![1.0], vec![1e-9], 0.0).is_err());
        assert!(DebyeModel::new(2.0, vec![1.0; 3], vec![1e-9; 3], 0.0).is_err());
        assert!(DebyeModel::new(2.0, vec![-1.0], vec![1e-9], 0.0).is_err());
    }

    #[test]
    fn fit_matches_closed_form_tau() {
        let fit = fit_debye(130e6, Complex::new(8.0, -0.9), 12.0, 2.5).unwrap();
        let w = 2.0 * PI * 130e6;
        let tau = ((12.0 - 2.5) / (8.0 - 2.5) - 1.0f64).sqrt() / w;
        assert_relative_eq!(fit.model.tau[0], tau, max_relative = 1e-9);
        assert!((fit.model.permittivity(130e6).re - 8.0).abs() < 1e-6);
    }

    #[test]
    fn loss_matched_fits_reproduce_both_parts() {
        let curve = SoilCalibrationCurve::sandy_soil();
        let expected = [
            (10.0, 8.147_272_727_272_727, 2.003_348_934e-10),
            (20.0, 18.403_225_806_451_61, 1.974_627_086e-10),
            (30.0, 24.083_333_333_333_33, 2.040_447_988e-10),
        ];
        for (vwc, stat, tau) in expected {
            let fit = fit_from_curve(&curve, vwc, DEFAULT_EPS_INF).unwrap();
            assert_relative_eq!(fit.model.static_permittivity(), stat, max_relative = 1e-12);
            assert_relative_eq!(fit.model.tau[0], tau, max_relative = 1e-8);
            assert!(fit.imag_mismatch.abs() < 1e-6, "{}", fit.imag_mismatch);
        }
    }

    #[test]
    fn degenerate_and_infeasible_fits() {
        assert!(matches!(
            fit_debye(130e6, Complex::new(8.0, 0.0), 8.0, 2.5),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            fit_debye(130e6, Complex::new(9.0, 0.0), 8.0, 2.5),
            Err(Error::FitInfeasible(_))
        ));
        assert!(matches!(
            fit_debye(130e6, Complex::new(2.0, 0.0), 8.0, 2.5),
            Err(Error::FitInfeasible(_))
        ));
    }

    #[test]
    fn vacuum_and_constant_lines() {
        let f = [1e6, 1e8, 1e10];
        let h = line_transfer_function(|_| Complex::new(1.0, 0.0), 0.6, &f).unwrap();
        for (hk, fk) in h.iter().zip(f) {
            assert_relative_eq!(hk.norm(), 1.0, max_relative = 1e-12);
            let want = -2.0 * PI * fk * 0.6 / C0;
            assert!((crate::rfcore::wrap_degrees((hk.arg() - want).to_degrees())).abs() < 1e-6);
        }
        let d1 = correlation_free_delay(1.0);
        let d4 = correlation_free_delay(4.0);
        assert_relative_eq!(d4, 2.0 * d1, max_relative = 1e-12);
    }

    // group delay of a constant-ε line from the phase slope
    fn correlation_free_delay(eps: f64) -> f64 {
        let df = 1e3;
        let f = 1e8;
        let a = transfer_at(Complex::new(eps, 0.0), 0.6, f).arg();
        let b = transfer_at(Complex::new(eps, 0.0), 0.6, f + df).arg();
        -(b - a) / (2.0 * PI * df)
    }

    #[test]
    fn lossy_line_attenuates_more_at_higher_frequency() {
        let fit = fit_from_curve(&SoilCalibrationCurve::sandy_soil(), 30.0, DEFAULT_EPS_INF).unwrap();
        let line = BuriedLine::default();
        let f: Vec<f64> = (1..=400).map(|k| k as f64 * 25e6).collect();
        let h = line_transfer_function(|x| line.eps_eff(fit.model.permittivity(x)), line.length, &f).unwrap();
        assert!(h.windows(2).all(|w| w[1].norm() < w[0].norm()));
        assert!(h.iter().all(|z| z.norm() <= 1.0));
    }

    #[test]
    fn identity_filter_and_parseval() {
        let w = make_pulse(50e-12, 5e-12, 4e12).unwrap();
        let n = (4 * w.len()).next_power_of_two();
        let out = propagate(&w, |_| Complex::new(1.0, 0.0), n).unwrap();
        for (a, b) in w.samples.iter().zip(&out.samples) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_relative_eq!(out.energy(), w.energy(), max_relative = 1e-9);
    }

    #[test]
    fn pure_delay_filter() {
        let w = make_pulse(200e-12, 20e-12, 1e12).unwrap();
        let delay = 137.0 / 1e12;
        let n = (4 * w.len()).next_power_of_two().max(4096);
        let out = propagate(&w, |f| Complex::from_polar(1.0, -2.0 * PI * f * delay), n).unwrap();
        let d = correlation_delay(&w, &out).unwrap();
        assert!((d - delay).abs() < 0.05e-12, "{d}");
        let r = distortion_metrics(&w, &out, None).unwrap();
        assert!(r.nrmse_vs_delayed_input < 1e-9, "{r:?}");
        assert!(r.edge_jitter.unwrap() < 1e-15);
    }

    #[test]
    fn short_buffer_is_rejected_or_flagged() {
        let w = make_pulse(200e-12, 20e-12, 1e12).unwrap();
        assert!(matches!(
            propagate(&w, |_| Complex::new(1.0, 0.0), w.len()),
            Err(Error::Sampling(_))
        ));
        let n = (4 * w.len()).next_power_of_two();
        let delay = 0.95 * n as f64 / 1e12;
        assert!(matches!(
            propagate(&w, |f| Complex::from_polar(1.0, -2.0 * PI * f * delay), n),
            Err(Error::Aliasing { .. })
        ));
    }

    #[test]
    fn pulse_geometry() {
        let w = make_pulse(50e-12, 5e-12, 2e12).unwrap_err();
        assert!(matches!(w, Error::Sampling(_)));
        let w = make_pulse(50e-12, 10e-12, 2e12).unwrap();
        assert_eq!(w.samples.iter().filter(|&&x| x > 0.5).count(), 100);
        let a = make_pulse(100e-12, 10e-12, 4e12).unwrap().integral();
        let b = make_pulse(200e-12, 10e-12, 4e12).unwrap().integral();
        assert_relative_eq!(b, 2.0 * a, max_relative = 1e-9);
        assert!(make_pulse(50e-12, 0.0, 4e12).is_err());
    }

    #[test]
    fn tone_survives_dispersion() {
        let fit = fit_from_curve(&SoilCalibrationCurve::sandy_soil(), 30.0, DEFAULT_EPS_INF).unwrap();
        let study = PulseStudy::default();
        let s = study.run_one(&fit, 30.0, &Excitation::Tone).unwrap();
        assert!(s.report.spectral_purity_db.unwrap() > 60.0, "{:?}", s.report);
    }

    #[test]
    fn short_pulses_distort_more() {
        let fit = fit_from_curve(&SoilCalibrationCurve::sandy_soil(), 30.0, DEFAULT_EPS_INF).unwrap();
        let study = PulseStudy::default();
        let short = study.run_one(&fit, 30.0, &Excitation::Pulse(50e-12)).unwrap();
        let long = study.run_one(&fit, 30.0, &Excitation::Pulse(1e-9)).unwrap();
        assert!(short.report.nrmse_vs_delayed_input > long.report.nrmse_vs_delayed_input);
        assert!(short.report.edge_jitter.unwrap() > 0.0);
    }

    #[test]
    fn monotone_matrix_check() {
        assert!(is_monotone_matrix(&[vec![3.0, 4.0], vec![1.0, 2.0]]));
        assert!(!is_monotone_matrix(&[vec![3.0, 4.0], vec![3.5, 5.0]]));
    }
}
