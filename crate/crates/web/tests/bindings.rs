use hydrotrack_web::{
    band_center_hz, channel_wavelengths, evm_demo, filter_response, solution_spectrum,
    spectrum_wavelengths,
};

#[test]
fn response_vanishes_at_dc_and_nyquist() {
    let h = filter_response(0.01, 0.2, 1.0, 2, 501).unwrap();
    assert_eq!(h.len(), 501);
    assert!(h[0] < 1e-9 && h[500] < 1e-9);
    assert!(h.iter().all(|v| *v <= 1.0 + 1e-9));
}

#[test]
fn invalid_band_is_an_error() {
    assert!(filter_response(0.3, 0.2, 1.0, 2, 10).is_err());
    assert!(filter_response(0.01, 0.6, 1.0, 2, 10).is_err());
}

#[test]
fn evm_demo_decomposes() {
    let n = 600;
    let centre = band_center_hz(0.01, 0.2, 1.0);
    let out = evm_demo(5.0, 0.01, 0.2, 2, centre, 0.01, n).unwrap();
    assert_eq!(out.len(), 3 * n);
    for i in 0..n {
        assert!((out[2 * n + i] - out[i] - 5.0 * out[n + i]).abs() < 1e-12);
    }
    assert!(evm_demo(1.0, 0.01, 0.2, 2, 0.05, 0.01, 5).is_err());
}

#[test]
fn spectrum_rises_with_concentration() {
    let wl = spectrum_wavelengths(101);
    let lo = solution_spectrum(200.0, 101).unwrap();
    let hi = solution_spectrum(400.0, 101).unwrap();
    assert_eq!(wl.len(), lo.len());
    assert!(lo.iter().zip(&hi).all(|(a, b)| b > a));
    for c in channel_wavelengths() {
        assert!(wl.contains(&c));
    }
    assert!(solution_spectrum(-1.0, 10).is_err());
}
