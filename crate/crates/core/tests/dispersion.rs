use std::f64::consts::PI;

use dps_core::dispersion::{
    distortion_metrics, is_monotone_matrix, line_transfer_function, make_pulse, propagate,
    segmented_transfer_function, spectral_purity, tone_burst, transfer_at, BuriedLine, DebyeModel,
    PulseStudy, Waveform,
};
use dps_core::rfcore::Complex;
use dps_core::soilcal::SoilCalibrationCurve;
use proptest::prelude::*;

fn debye() -> impl Strategy<Value = DebyeModel> {
    (1.0..5.0f64, 0.5..30.0f64, -12.0..-8.0f64, 0.0..0.1f64)
        .prop_map(|(inf, d, lt, s)| DebyeModel::new(inf, vec![d], vec![10f64.powf(lt)], s).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn passive_lines_never_amplify(m in debye(), len in 0.01..2.0f64) {
        let line = BuriedLine { length: len, ..BuriedLine::default() };
        let f: Vec<f64> = (0..200).map(|k| 10f64.powf(5.0 + 0.03 * k as f64)).collect();
        let h = line_transfer_function(|x| line.eps_eff(m.permittivity(x)), len, &f).unwrap();
        for (hk, fk) in h.iter().zip(&f) {
            prop_assert!(hk.norm() <= 1.0 + 1e-15, "{fk}: {}", hk.norm());
            prop_assert!(m.permittivity(*fk).im <= 0.0);
        }
    }

    #[test]
    fn transform_preserves_energy(xs in prop::collection::vec(-1.0..1.0f64, 8..200)) {
        let w = Waveform::new(1e9, xs, 0.0).unwrap();
        let n = (4 * w.len()).next_power_of_two();
        let out = propagate(&w, |_| Complex::new(1.0, 0.0), n).unwrap();
        let (a, b) = (w.energy(), out.energy());
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-300));
    }

    #[test]
    fn tones_stay_pure(m in debye()) {
        let line = BuriedLine::default();
        let f0 = 120e6;
        let w = tone_burst(f0, 80, 5, 64.0 * f0).unwrap();
        let n = (4 * w.len()).next_power_of_two();
        let out = propagate(&w, |f| transfer_at(line.eps_eff(m.permittivity(f)), line.length, f), n).unwrap();
        let r = distortion_metrics(&w, &out, None).unwrap();
        let start = (10.0 + (r.delay * f0).ceil()) / f0;
        let purity = spectral_purity(&out, f0, start, 60).unwrap();
        prop_assert!(purity > 60.0 && purity.is_finite(), "{purity}");
    }

    #[test]
    fn delayed_copy_is_undistorted(shift in 10usize..400) {
        let w = make_pulse(100e-12, 20e-12, 1e12).unwrap();
        let delay = shift as f64 * 1e-12;
        let n = (4 * w.len()).next_power_of_two().max(2048);
        let out = propagate(&w, |f| Complex::from_polar(1.0, -2.0 * PI * f * delay), n).unwrap();
        let r = distortion_metrics(&w, &out, Some(delay)).unwrap();
        prop_assert!(r.nrmse_vs_delayed_input < 1e-9);
        prop_assert!(r.edge_jitter.unwrap() < 1e-15);
        prop_assert!(r.nrmse_vs_delayed_input >= 0.0);
    }
}

#[test]
fn segments_multiply() {
    let f: Vec<f64> = (1..50).map(|k| k as f64 * 1e8).collect();
    let a = |_: f64| Complex::new(4.0, -0.2);
    let b = |_: f64| Complex::new(9.0, -1.0);
    let whole = segmented_transfer_function(&[(0.1, &a), (0.2, &b), (0.1, &a)], &f).unwrap();
    let ha = line_transfer_function(a, 0.2, &f).unwrap();
    let hb = line_transfer_function(b, 0.2, &f).unwrap();
    for k in 0..f.len() {
        assert!((whole[k] - ha[k] * hb[k]).norm() < 1e-12);
    }
}

#[test]
fn bundled_models_give_a_monotone_matrix() {
    let r = PulseStudy::default()
        .run(&SoilCalibrationCurve::sandy_soil())
        .unwrap();
    assert!(is_monotone_matrix(&r.nrmse), "{:?}", r.nrmse);
    assert!(
        r.tone_purity_db.iter().all(|&p| p > 60.0),
        "{:?}",
        r.tone_purity_db
    );
    assert_eq!(r.scenarios.len(), 12);
}
