//! Browser bindings: the qubit fluctuation spectrum, the modulation
//! adjacency matrix and a two-mode Gaussian entanglement trace.
//!
//! Rates are passed in units of Γ and temperatures in K. Arrays come back
//! flattened as `Float64Array`.

use vibent::measures::{log_negativity_gaussian, Bipartition};
use vibent::modulation::{adjacency_for, CouplingMatrix};
use vibent::params::{angular_to_hz, ModulationScheme, SystemParams};
use vibent::scenario::{depth_params, gaussian_trajectory, sample_times, Point};
use vibent::tls::fluctuation_spectrum;
use wasm_bindgen::prelude::*;

fn base(n_modes: usize, rabi: f64, ratio: f64, temperature: f64) -> SystemParams {
    let mut p = SystemParams::paper_defaults(n_modes);
    p = p.clone().with_drive(rabi * p.qubit_decay, ratio);
    p.temperature = temperature;
    p
}

/// `[ω/2π, S(ω)]` pairs on `points` frequencies spanning ±6ω_1.
pub fn spectrum(rabi: f64, ratio: f64, temperature: f64, points: usize) -> Result<Vec<f64>, String> {
    let p = base(1, rabi, ratio, temperature);
    p.validate().map_err(|e| e.to_string())?;
    let w1 = p.spectrum().omegas[0];
    let points = points.max(2);
    let mut out = Vec::with_capacity(2 * points);
    for i in 0..points {
        let w = -6.0 * w1 + 12.0 * w1 * i as f64 / (points - 1) as f64;
        out.push(angular_to_hz(w));
        out.push(fluctuation_spectrum(w, &p).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

/// Row-major `n × n` entangling weights F normalized to max |F| = 1, with
/// tones on the target modes (1-based).
pub fn adjacency(n_modes: usize, targets: &[u32], half_sum: bool) -> Result<Vec<f64>, String> {
    if n_modes == 0 || n_modes > 64 {
        return Err("mode count must be 1..=64".into());
    }
    let mut p = SystemParams::paper_defaults(n_modes);
    p.modulation_scheme = if half_sum { ModulationScheme::HalfSumFrequencies } else { ModulationScheme::ModeFrequencies };
    if targets.iter().any(|&k| k == 0 || k as usize > n_modes) {
        return Err("targets must lie in 1..=n_modes".into());
    }
    let active: Vec<usize> = targets.iter().map(|&k| k as usize - 1).collect();
    let p = vibent::scenario::with_active_modes(&p, &active);
    let f = adjacency_for(&p).weighted_tms(&CouplingMatrix::new(&p));
    let m = f.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    Ok(f.iter().map(|x| if m > 0.0 { x / m + 0.0 } else { 0.0 }).collect())
}

/// `[t/τ, E^{1|k}]` pairs for the two-mode Gaussian model {1, k}.
pub fn trace(g0: f64, rabi: f64, k: usize, temperature: f64, t_end_tau: f64, samples: usize) -> Result<Vec<f64>, String> {
    if !(2..=50).contains(&k) {
        return Err("k must lie in 2..=50".into());
    }
    if !(t_end_tau > 0.0 && t_end_tau <= 2000.0) {
        return Err("t_end must lie in (0, 2000] τ".into());
    }
    let b = base(2, rabi, 5.0, temperature);
    let p = depth_params(&Point { g0: Some(g0), ..Default::default() }.apply(&b, None), k);
    let tau = p.tau_fsr();
    let times = sample_times(t_end_tau * tau, samples.clamp(1, 2000));
    let bip = Bipartition::pair(0, 1).map_err(|e| e.to_string())?;
    let traj = gaussian_trajectory(&p, &times).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(2 * traj.len());
    for (t, cm) in traj {
        out.push(t / tau);
        out.push(log_negativity_gaussian(&cm, &bip).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn tls_spectrum(rabi_over_gamma: f64, detuning_ratio: f64, temperature: f64, points: usize) -> Result<Vec<f64>, JsError> {
    spectrum(rabi_over_gamma, detuning_ratio, temperature, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn adjacency_matrix(n_modes: usize, targets: Vec<u32>, half_sum: bool) -> Result<Vec<f64>, JsError> {
    adjacency(n_modes, &targets, half_sum).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn entanglement_trace(
    g0_over_gamma: f64,
    rabi_over_gamma: f64,
    k: usize,
    temperature: f64,
    t_end_tau: f64,
    samples: usize,
) -> Result<Vec<f64>, JsError> {
    trace(g0_over_gamma, rabi_over_gamma, k, temperature, t_end_tau, samples).map_err(|e| JsError::new(&e))
}

