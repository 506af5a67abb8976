use vibent_wasm::{adjacency, spectrum, trace};

#[test]
fn spectrum_is_symmetric_grid() {
    let s = spectrum(3.0, 5.0, 0.01, 5).unwrap();
    assert_eq!(s.len(), 10);
    assert!((s[0] + s[8]).abs() < 1e-3);
    assert_eq!(s[4], 0.0);
    assert!(s.iter().skip(1).step_by(2).all(|&v| v.is_finite()));
}

#[test]
fn adjacency_connects_targets_only() {
    let f = adjacency(4, &[1, 3], false).unwrap();
    assert_eq!(f.len(), 16);
    for i in 0..4 {
        for j in 0..4 {
            assert_eq!(f[4 * i + j], f[4 * j + i]);
        }
    }
    assert_eq!(f.iter().fold(0.0f64, |a, x| a.max(x.abs())), 1.0);
    assert!(f[2] > 0.0);
    assert_eq!(f[1], 0.0);
    assert!(f[1].is_sign_positive());
    assert!(adjacency(4, &[5], false).is_err());
}

#[test]
fn trace_starts_separable() {
    let t = trace(0.0, 3.0, 2, 0.01, 5.0, 5).unwrap();
    assert_eq!(t.len(), 10);
    assert!(t.iter().skip(1).step_by(2).all(|&e| e == 0.0));
    assert!(trace(0.5, 3.0, 1, 0.01, 5.0, 5).is_err());
}
