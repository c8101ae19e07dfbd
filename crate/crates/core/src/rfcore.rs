//! Two-port network algebra: chain (ABCD) matrices, cascading, conversion to
//! scattering parameters and phase unwrapping.
//!
//! Time dependence is `e^{+jωt}` throughout the crate, so an ideal delay line
//! has a negative, decreasing unwrapped phase and a lossy capacitance carries a
//! negative imaginary part.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{ensure_positive, Error, Result};

pub type Complex = Complex64;

/// Numerical tolerances shared by the network code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative tolerance for identities such as `ad - bc = 1`.
    pub relative: f64,
    /// Magnitude below which an ABCD-to-S denominator counts as singular.
    pub singular_floor: f64,
}

pub const TOLERANCES: Tolerances = Tolerances {
    relative: 1e-9,
    singular_floor: 1e-15,
};

/// Default reference impedance in ohms.
pub const DEFAULT_Z0: f64 = 50.0;

pub(crate) fn is_finite(z: Complex) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

fn ensure_finite_complex(name: &str, z: Complex) -> Result<Complex> {
    if is_finite(z) {
        Ok(z)
    } else {
        Err(Error::InvalidInput(format!("{name} must be finite, got {z}")))
    }
}

/// Chain matrix `[[a, b], [c, d]]` of a two-port; `b` in ohms, `c` in siemens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoPortAbcd {
    pub a: Complex,
    pub b: Complex,
    pub c: Complex,
    pub d: Complex,
}

impl TwoPortAbcd {
    pub const IDENTITY: TwoPortAbcd = TwoPortAbcd {
        a: Complex::new(1.0, 0.0),
        b: Complex::new(0.0, 0.0),
        c: Complex::new(0.0, 0.0),
        d: Complex::new(1.0, 0.0),
    };

    pub fn new(a: Complex, b: Complex, c: Complex, d: Complex) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b), ("c", c), ("d", d)] {
            ensure_finite_complex(name, v)?;
        }
        Ok(Self { a, b, c, d })
    }

    /// Series impedance `z`: `[[1, z], [0, 1]]`.
    pub fn series(z: Complex) -> Result<Self> {
        ensure_finite_complex("series impedance", z)?;
        Ok(Self {
            b: z,
            ..Self::IDENTITY
        })
    }

    /// Shunt admittance `y`: `[[1, 0], [y, 1]]`.
    pub fn shunt(y: Complex) -> Result<Self> {
        ensure_finite_complex("shunt admittance", y)?;
        Ok(Self {
            c: y,
            ..Self::IDENTITY
        })
    }

    /// `self` followed by `next` (matrix product `self × next`).
    pub fn cascade(&self, next: &TwoPortAbcd) -> TwoPortAbcd {
        TwoPortAbcd {
            a: self.a * next.a + self.b * next.c,
            b: self.a * next.b + self.b * next.d,
            c: self.c * next.a + self.d * next.c,
            d: self.c * next.b + self.d * next.d,
        }
    }

    /// `n` identical copies in cascade, by repeated squaring.
    pub fn repeated(&self, n: usize) -> TwoPortAbcd {
        let mut result = Self::IDENTITY;
        let mut base = *self;
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                result = result.cascade(&base);
            }
            base = base.cascade(&base);
            k >>= 1;
        }
        result
    }

    pub fn determinant(&self) -> Complex {
        self.a * self.d - self.b * self.c
    }

    pub fn is_finite(&self) -> bool {
        is_finite(self.a) && is_finite(self.b) && is_finite(self.c) && is_finite(self.d)
    }

    /// Scattering parameters for a real reference impedance `z0`.
    pub fn to_s(&self, z0: f64) -> Result<SParams> {
        ensure_positive("reference impedance", z0)?;
        let b_norm = self.b / z0;
        let c_norm = self.c * z0;
        let den = self.a + b_norm + c_norm + self.d;
        if !is_finite(den) || den.norm() < TOLERANCES.singular_floor {
            return Err(Error::SingularNetwork {
                denominator: den.norm(),
            });
        }
        Ok(SParams {
            s11: (self.a + b_norm - c_norm - self.d) / den,
            s21: 2.0 / den,
            s12: 2.0 * self.determinant() / den,
            s22: (-self.a + b_norm - c_norm + self.d) / den,
            reference_impedance: z0,
        })
    }

    /// Inverse of [`TwoPortAbcd::to_s`].
    pub fn from_s(s: &SParams) -> Result<Self> {
        let z0 = ensure_positive("reference impedance", s.reference_impedance)?;
        if s.s21.norm() < TOLERANCES.singular_floor {
            return Err(Error::SingularNetwork {
                denominator: s.s21.norm(),
            });
        }
        let one = Complex::new(1.0, 0.0);
        let cross = s.s12 * s.s21;
        let den = 2.0 * s.s21;
        Self::new(
            ((one + s.s11) * (one - s.s22) + cross) / den,
            z0 * ((one + s.s11) * (one + s.s22) - cross) / den,
            ((one - s.s11) * (one - s.s22) - cross) / (den * z0),
            ((one - s.s11) * (one + s.s22) + cross) / den,
        )
    }
}

/// Two-port scattering parameters referenced to a real impedance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SParams {
    pub s11: Complex,
    pub s21: Complex,
    pub s12: Complex,
    pub s22: Complex,
    pub reference_impedance: f64,
}

/// Selects one entry of an [`SParams`] set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortPair {
    S11,
    S21,
    S12,
    S22,
}

impl SParams {
    pub fn get(&self, pair: PortPair) -> Complex {
        match pair {
            PortPair::S11 => self.s11,
            PortPair::S21 => self.s21,
            PortPair::S12 => self.s12,
            PortPair::S22 => self.s22,
        }
    }

    /// `|s11|² + |s21|²`, which equals one for a lossless matched-port network.
    pub fn power_sum(&self) -> f64 {
        self.s11.norm_sqr() + self.s21.norm_sqr()
    }
}

/// Magnitude in dB, `20 log10 |z|`.
pub fn db(z: Complex) -> f64 {
    20.0 * z.norm().log10()
}

/// Ordered list of strictly increasing, positive frequencies in Hz.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyGrid {
    points: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("frequency grid is empty".into()));
        }
        if let Some(bad) = points.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "frequency grid points must be positive and finite, got {bad}"
            )));
        }
        if let Some(w) = points.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!(
                "frequency grid must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { points })
    }

    /// `n` evenly spaced points from `start` to `stop` inclusive.
    pub fn linear(start: f64, stop: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Self::new(vec![start]);
        }
        let step = (stop - start) / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|k| start + step * k as f64).collect();
        points[n - 1] = stop;
        Self::new(points)
    }

    /// `n` logarithmically spaced points from `start` to `stop` inclusive.
    pub fn logarithmic(start: f64, stop: f64, n: usize) -> Result<Self> {
        ensure_positive("grid start", start)?;
        ensure_positive("grid stop", stop)?;
        if n < 2 {
            return Self::new(vec![start]);
        }
        let (l0, l1) = (start.ln(), stop.ln());
        let step = (l1 - l0) / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|k| (l0 + step * k as f64).exp()).collect();
        points[0] = start;
        points[n - 1] = stop;
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }
}

/// Removes 2π jumps so that adjacent samples differ by less than π.
///
/// Each output sample is congruent to its input modulo 2π.
pub fn unwrap_phase(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let Some(&first) = phases.first() else {
        return out;
    };
    out.push(first);
    let mut offset = 0.0;
    for w in phases.windows(2) {
        let delta = w[1] - w[0];
        if delta > PI || delta < -PI {
            offset -= 2.0 * PI * ((delta + PI) / (2.0 * PI)).floor();
        }
        out.push(w[1] + offset);
    }
    out
}

/// Wraps an angle in degrees into `(-180, 180]`.
pub fn wrap_degrees(x: f64) -> f64 {
    let r = x.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn assert_abcd_close(x: &TwoPortAbcd, y: &TwoPortAbcd, tol: f64) {
        for (p, q) in [(x.a, y.a), (x.b, y.b), (x.c, y.c), (x.d, y.d)] {
            let scale = p.norm().max(q.norm()).max(1.0);
            assert!((p - q).norm() <= tol * scale, "{p} vs {q}");
        }
    }

    #[test]
    fn zero_series_and_zero_shunt_are_throughs() {
        assert_eq!(TwoPortAbcd::series(c(0.0, 0.0)).unwrap(), TwoPortAbcd::IDENTITY);
        assert_eq!(TwoPortAbcd::shunt(c(0.0, 0.0)).unwrap(), TwoPortAbcd::IDENTITY);
    }

    #[test]
    fn primitive_entries() {
        let s = TwoPortAbcd::series(c(0.0, 100.0)).unwrap();
        assert_eq!(
            (s.a, s.b, s.c, s.d),
            (c(1.0, 0.0), c(0.0, 100.0), c(0.0, 0.0), c(1.0, 0.0))
        );
        let y = TwoPortAbcd::shunt(c(0.0, 0.02)).unwrap();
        assert_eq!(y.c, c(0.0, 0.02));
    }

    #[test]
    fn non_finite_elements_are_rejected() {
        assert!(matches!(
            TwoPortAbcd::series(c(f64::NAN, 0.0)),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            TwoPortAbcd::shunt(c(0.0, f64::INFINITY)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn series_and_shunt_compose_additively() {
        let (z1, z2) = (c(3.0, 40.0), c(-1.0, 7.5));
        let chained = TwoPortAbcd::series(z1)
            .unwrap()
            .cascade(&TwoPortAbcd::series(z2).unwrap());
        assert_abcd_close(&chained, &TwoPortAbcd::series(z1 + z2).unwrap(), 1e-15);
        let (y1, y2) = (c(0.001, 0.02), c(0.0, -0.005));
        let chained = TwoPortAbcd::shunt(y1)
            .unwrap()
            .cascade(&TwoPortAbcd::shunt(y2).unwrap());
        assert_abcd_close(&chained, &TwoPortAbcd::shunt(y1 + y2).unwrap(), 1e-15);
    }

    #[test]
    fn identity_law_and_unit_determinant() {
        let m = TwoPortAbcd::series(c(50.0, 0.0))
            .unwrap()
            .cascade(&TwoPortAbcd::shunt(c(0.02, 0.0)).unwrap())
            .cascade(&TwoPortAbcd::series(c(50.0, 0.0)).unwrap());
        assert_eq!(TwoPortAbcd::IDENTITY.cascade(&m), m);
        assert_relative_eq!(m.determinant().re, 1.0, max_relative = 1e-12);
        assert!(m.determinant().im.abs() < 1e-12);
    }

    #[test]
    fn conversion_examples() {
        let s = TwoPortAbcd::IDENTITY.to_s(75.0).unwrap();
        assert_eq!(s.s21, c(1.0, 0.0));
        assert_eq!(s.s11, c(0.0, 0.0));

        // a = d = 1, b = 50, c = 0 at z0 = 50: den = 3.
        let s = TwoPortAbcd::series(c(50.0, 0.0)).unwrap().to_s(50.0).unwrap();
        assert_relative_eq!(s.s21.re, 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(s.s11.re, 1.0 / 3.0, max_relative = 1e-15);

        let s = TwoPortAbcd::shunt(c(1.0 / 50.0, 0.0))
            .unwrap()
            .to_s(50.0)
            .unwrap();
        assert_relative_eq!(s.s21.re, 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(s.s11.re, -1.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn singular_network_is_reported() {
        // a + b/z0 + c z0 + d = 0 with a = d = -0.5, b = z0/2, c = 1/(2 z0).
        let m = TwoPortAbcd::new(c(-0.5, 0.0), c(25.0, 0.0), c(0.01, 0.0), c(-0.5, 0.0)).unwrap();
        assert!(matches!(m.to_s(50.0), Err(Error::SingularNetwork { .. })));
        assert!(matches!(
            TwoPortAbcd::IDENTITY.to_s(0.0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn repeated_matches_explicit_cascade() {
        let cell = TwoPortAbcd::series(c(1.0, 20.0))
            .unwrap()
            .cascade(&TwoPortAbcd::shunt(c(0.001, -0.01)).unwrap());
        let mut explicit = TwoPortAbcd::IDENTITY;
        for _ in 0..7 {
            explicit = explicit.cascade(&cell);
        }
        assert_abcd_close(&cell.repeated(7), &explicit, 1e-12);
        assert_eq!(cell.repeated(0), TwoPortAbcd::IDENTITY);
    }

    #[test]
    fn unwrap_examples() {
        assert_eq!(unwrap_phase(&[0.1, 0.2, 0.3]), vec![0.1, 0.2, 0.3]);
        assert_eq!(unwrap_phase(&[1.5; 4]), vec![1.5; 4]);
        let u = unwrap_phase(&[3.0, -3.0]);
        assert_eq!(u[0], 3.0);
        assert_relative_eq!(u[1], -3.0 + 2.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(u[1], 3.2832, epsilon = 1e-4);
        assert!(unwrap_phase(&[]).is_empty());
    }

    #[test]
    fn grid_validation() {
        assert!(FrequencyGrid::new(vec![1.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![0.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![]).is_err());
        let g = FrequencyGrid::logarithmic(1e6, 1e10, 10_001).unwrap();
        assert_eq!(g.first(), 1e6);
        assert_eq!(g.last(), 1e10);
    }

    #[test]
    fn wrap_degrees_range() {
        assert_eq!(wrap_degrees(180.0), 180.0);
        assert_eq!(wrap_degrees(-180.0), 180.0);
        assert_relative_eq!(wrap_degrees(370.0), 10.0, epsilon = 1e-12);
        assert_relative_eq!(wrap_degrees(-190.0), 170.0, epsilon = 1e-12);
    }

    fn element() -> impl Strategy<Value = TwoPortAbcd> {
        (any::<bool>(), 0.0..200.0f64, -500.0..500.0f64).prop_map(|(series, r, x)| {
            if series {
                TwoPortAbcd::series(c(r, x)).unwrap()
            } else {
                TwoPortAbcd::shunt(c(r / 1e4, x / 1e4)).unwrap()
            }
        })
    }

    fn lossless_element() -> impl Strategy<Value = TwoPortAbcd> {
        (any::<bool>(), -500.0..500.0f64).prop_map(|(series, x)| {
            if series {
                TwoPortAbcd::series(c(0.0, x)).unwrap()
            } else {
                TwoPortAbcd::shunt(c(0.0, x / 1e4)).unwrap()
            }
        })
    }

    fn chain(elements: &[TwoPortAbcd]) -> TwoPortAbcd {
        elements
            .iter()
            .fold(TwoPortAbcd::IDENTITY, |acc, e| acc.cascade(e))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn reciprocal_cascades_have_unit_determinant(els in prop::collection::vec(element(), 1..6)) {
            let m = chain(&els);
            let scale = (m.a * m.d).norm().max((m.b * m.c).norm()).max(1.0);
            prop_assert!((m.determinant() - c(1.0, 0.0)).norm() <= TOLERANCES.relative * scale);
        }

        #[test]
        fn s_round_trip_recovers_abcd(els in prop::collection::vec(element(), 1..5)) {
            let m = chain(&els);
            let s = m.to_s(DEFAULT_Z0).unwrap();
            let back = TwoPortAbcd::from_s(&s).unwrap();
            for (p, q) in [(m.a, back.a), (m.b, back.b), (m.c, back.c), (m.d, back.d)] {
                let scale = p.norm().max(1.0);
                prop_assert!((p - q).norm() <= TOLERANCES.relative * scale, "{} vs {}", p, q);
            }
            prop_assert!((s.s12 - s.s21).norm() <= TOLERANCES.relative);
            prop_assert!(s.s11.norm() <= 1.0 + 1e-9 && s.s21.norm() <= 1.0 + 1e-9);
        }

        #[test]
        fn lossless_networks_conserve_power(els in prop::collection::vec(lossless_element(), 1..6)) {
            let s = chain(&els).to_s(DEFAULT_Z0).unwrap();
            prop_assert!(s.power_sum() <= 1.0 + 1e-9);
            prop_assert!((s.power_sum() - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn cascade_is_associative(a in element(), b in element(), d in element()) {
            let left = a.cascade(&b).cascade(&d);
            let right = a.cascade(&b.cascade(&d));
            for (p, q) in [(left.a, right.a), (left.b, right.b), (left.c, right.c), (left.d, right.d)] {
                prop_assert!((p - q).norm() <= 1e-12 * p.norm().max(1.0));
            }
        }

        #[test]
        fn unwrap_is_continuous_and_congruent(raw in prop::collection::vec(-PI..PI, 1..50)) {
            let u = unwrap_phase(&raw);
            for w in u.windows(2) {
                prop_assert!((w[1] - w[0]).abs() < PI + 1e-12);
            }
            for (x, y) in raw.iter().zip(&u) {
                let k = (y - x) / (2.0 * PI);
                prop_assert!((k - k.round()).abs() < 1e-9);
            }
        }
    }
}
