//! Physical parameters, unit conventions and derived quantities.
//!
//! Every frequency and rate is an angular frequency in rad/s and ħ = 1.
//! Temperature only enters through [`thermal_occupation`].

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant (J s), CODATA 2018 exact.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K), CODATA 2018 exact.
pub const K_B: f64 = 1.380_649e-23;

/// Converts an ordinary frequency in Hz to rad/s.
pub fn hz_to_angular(f: f64) -> f64 {
    2.0 * PI * f
}

pub fn angular_to_hz(w: f64) -> f64 {
    w / (2.0 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModulationScheme {
    /// Tones at the frequencies of the active modes.
    #[default]
    ModeFrequencies,
    /// Tones at half the pairwise sums of active-mode frequencies.
    HalfSumFrequencies,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Number of simulated mechanical modes.
    pub n_modes: usize,
    /// Harmonic numbers of the simulated modes, `ω = k δ_FSR`. Defaults to `1..=n_modes`.
    pub mode_numbers: Vec<usize>,
    pub fsr: f64,
    pub quality_factor: f64,
    pub qubit_freq: f64,
    pub qubit_decay: f64,
    pub qubit_dephasing: f64,
    /// Kelvin.
    pub temperature: f64,
    /// Per-mode coupling `g_k`, one entry per simulated mode.
    pub coupling: Vec<f64>,
    pub rabi_amplitude: f64,
    pub detuning: f64,
    /// Drive tones `w_i`. A zero tone is a constant (unmodulated) drive.
    pub modulation_freqs: Vec<f64>,
    pub modulation_scheme: ModulationScheme,
    /// Relative mode-spacing disorder ε; zero gives the commensurate spectrum.
    pub anharmonicity: f64,
    pub anharmonicity_seed: u64,
    /// Far-detuned regime requires `Δ > factor · max(Γ, Ω_0)`.
    pub far_detuned_factor: f64,
}

impl SystemParams {
    /// The triangle defaults: δ_FSR/2π = 20 MHz, Q = 10⁷, ω_q/2π = 10 GHz,
    /// Γ/2π = 20 MHz, T = 10 mK, g_0 = 0.5Γ, Ω_0 = 3Γ, Δ = 5Ω_0, no dephasing,
    /// tones at the mode frequencies.
    pub fn paper_defaults(n_modes: usize) -> Self {
        let fsr = hz_to_angular(20e6);
        let gamma = hz_to_angular(20e6);
        let rabi = 3.0 * gamma;
        let mut p = SystemParams {
            n_modes,
            mode_numbers: (1..=n_modes).collect(),
            fsr,
            quality_factor: 1e7,
            qubit_freq: hz_to_angular(10e9),
            qubit_decay: gamma,
            qubit_dephasing: 0.0,
            temperature: 0.01,
            coupling: vec![0.5 * gamma; n_modes],
            rabi_amplitude: rabi,
            detuning: 5.0 * rabi,
            modulation_freqs: Vec::new(),
            modulation_scheme: ModulationScheme::ModeFrequencies,
            anharmonicity: 0.0,
            anharmonicity_seed: 0,
            far_detuned_factor: 3.0,
        };
        p.modulation_freqs = p.default_tones();
        p
    }

    /// Simulated modes are the harmonics in `mode_numbers`; the couplings
    /// are reset to the uniform `g0` and the tones to the scheme defaults.
    pub fn with_modes(mut self, mode_numbers: Vec<usize>) -> Self {
        let g0 = self.coupling.first().copied().unwrap_or(0.0);
        self.n_modes = mode_numbers.len();
        self.mode_numbers = mode_numbers;
        self.coupling = vec![g0; self.n_modes];
        self.modulation_freqs = self.default_tones();
        self
    }

    pub fn with_uniform_coupling(mut self, g0: f64) -> Self {
        self.coupling = vec![g0; self.n_modes];
        self
    }

    /// Sets Ω_0 and Δ = `detuning_ratio`·Ω_0.
    pub fn with_drive(mut self, rabi: f64, detuning_ratio: f64) -> Self {
        self.rabi_amplitude = rabi;
        self.detuning = detuning_ratio * rabi;
        self
    }

    pub fn spectrum(&self) -> ModeSpectrum {
        mode_spectrum(self)
    }

    /// Tones selected by the modulation scheme over all simulated modes.
    pub fn default_tones(&self) -> Vec<f64> {
        let spec = self.spectrum();
        crate::modulation::select_tones(&spec.omegas, self.modulation_scheme)
    }

    pub fn tau_fsr(&self) -> f64 {
        2.0 * PI / self.fsr
    }

    pub fn qubit_occupation(&self) -> f64 {
        thermal_occupation(self.qubit_freq, self.temperature)
    }

    pub fn mode_occupations(&self) -> Vec<f64> {
        self.spectrum()
            .omegas
            .iter()
            .map(|&w| thermal_occupation(w, self.temperature))
            .collect()
    }

    pub fn intrinsic_dampings(&self) -> Vec<f64> {
        self.spectrum()
            .omegas
            .iter()
            .map(|&w| intrinsic_damping(w, self.quality_factor))
            .collect()
    }

    /// Hard validation: positivity and shape consistency.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParams(what.to_string()));
        if self.n_modes == 0 {
            return bad("n_modes must be at least 1");
        }
        if self.mode_numbers.len() != self.n_modes {
            return bad("mode_numbers length must equal n_modes");
        }
        if self.mode_numbers.contains(&0) {
            return bad("mode numbers start at 1");
        }
        if self.mode_numbers.windows(2).any(|w| w[0] >= w[1]) {
            return bad("mode numbers must be strictly increasing");
        }
        if self.coupling.len() != self.n_modes {
            return bad("coupling must have one entry per mode");
        }
        for (name, v) in [
            ("fsr", self.fsr),
            ("quality_factor", self.quality_factor),
            ("qubit_freq", self.qubit_freq),
            ("qubit_decay", self.qubit_decay),
            ("detuning", self.detuning),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.qubit_dephasing >= 0.0) {
            return bad("qubit_dephasing must be non-negative");
        }
        if !(self.temperature >= 0.0) {
            return bad("temperature must be non-negative");
        }
        if !(self.rabi_amplitude >= 0.0) {
            return bad("rabi_amplitude must be non-negative");
        }
        if self.coupling.iter().any(|&g| !(g >= 0.0)) {
            return bad("couplings must be non-negative");
        }
        if self.modulation_freqs.iter().any(|&w| !(w >= 0.0)) {
            return bad("modulation frequencies must be non-negative");
        }
        if !(0.0..0.5).contains(&self.anharmonicity) {
            return bad("anharmonicity must lie in [0, 0.5)");
        }
        Ok(())
    }

    pub fn regime(&self) -> RegimeFlags {
        let g_max = self.coupling.iter().cloned().fold(0.0, f64::max);
        RegimeFlags {
            adiabatic: self.qubit_decay > g_max,
            far_detuned: self.detuning
                > self.far_detuned_factor * self.qubit_decay.max(self.rabi_amplitude),
        }
    }

    /// Logs a warning for every violated regime condition. Never fails.
    pub fn warn_regime(&self) -> RegimeFlags {
        let flags = self.regime();
        if !flags.adiabatic {
            log::warn!("adiabatic condition violated: Γ <= max g_k");
        }
        if !flags.far_detuned {
            log::warn!(
                "far-detuned condition violated: Δ <= {}·max(Γ, Ω_0)",
                self.far_detuned_factor
            );
        }
        flags
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegimeFlags {
    pub adiabatic: bool,
    pub far_detuned: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    pub mode_numbers: Vec<usize>,
    pub omegas: Vec<f64>,
}

impl ModeSpectrum {
    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Commensurate harmonics `1..=n`.
    pub fn commensurate(n: usize, fsr: f64) -> Self {
        Self::harmonics((1..=n).collect(), fsr, 0.0, 0)
    }

    /// `ω_k = k δ (1 + ε r_k)` with `r_k ∈ (0,1)` drawn from a seeded stream
    /// indexed by harmonic number, so a mode keeps its frequency regardless
    /// of which other modes are simulated.
    pub fn harmonics(mode_numbers: Vec<usize>, fsr: f64, eps: f64, seed: u64) -> Self {
        let max_k = mode_numbers.iter().copied().max().unwrap_or(0);
        let disorder: Vec<f64> = if eps > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..max_k).map(|_| rng.random::<f64>()).collect()
        } else {
            vec![0.0; max_k]
        };
        let omegas = mode_numbers
            .iter()
            .map(|&k| k as f64 * fsr * (1.0 + eps * disorder[k - 1]))
            .collect();
        ModeSpectrum { mode_numbers, omegas }
    }
}

pub fn mode_spectrum(params: &SystemParams) -> ModeSpectrum {
    ModeSpectrum::harmonics(
        params.mode_numbers.clone(),
        params.fsr,
        params.anharmonicity,
        params.anharmonicity_seed,
    )
}

/// Bose–Einstein occupation `1/(exp(ħω/k_B T) − 1)`; exactly zero at T = 0.
pub fn thermal_occupation(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    let x = HBAR * omega / (K_B * temperature);
    1.0 / x.exp_m1()
}

pub fn intrinsic_damping(omega: f64, q: f64) -> f64 {
    omega / q
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn triangle_spectrum() {
        let p = SystemParams::paper_defaults(3);
        let s = mode_spectrum(&p);
        let unit = hz_to_angular(20e6);
        assert_eq!(s.omegas, vec![unit, 2.0 * unit, 3.0 * unit]);
    }

    #[test]
    fn single_mode_spectrum() {
        let s = ModeSpectrum::commensurate(1, 1.0);
        assert_eq!(s.omegas, vec![1.0]);
    }

    #[test]
    fn sixth_mode() {
        let s = ModeSpectrum::commensurate(6, hz_to_angular(20e6));
        assert_relative_eq!(s.omegas[5], hz_to_angular(120e6), max_relative = 1e-15);
    }

    #[test]
    fn thermal_occupation_cases() {
        assert_eq!(thermal_occupation(1.0e9, 0.0), 0.0);
        // ħω/k_B T = ln 2
        let t = 1.0;
        let w = 2f64.ln() * K_B * t / HBAR;
        assert_relative_eq!(thermal_occupation(w, t), 1.0, max_relative = 1e-12);
        // 10 GHz at 10 mK: x = 47.99..., n = exp(-x)/(1-exp(-x)).
        let x = HBAR * hz_to_angular(10e9) / (K_B * 0.01);
        let expected = (-x).exp() / (1.0 - (-x).exp());
        let n = thermal_occupation(hz_to_angular(10e9), 0.01);
        assert_relative_eq!(n, expected, max_relative = 1e-12);
        assert!(n > 1.3e-21 && n < 1.5e-21, "{n:e}");
    }

    #[test]
    fn thermal_occupation_monotone() {
        let ws: Vec<f64> = (1..20).map(|k| hz_to_angular(k as f64 * 1e8)).collect();
        let ts: Vec<f64> = (1..20).map(|k| k as f64 * 0.01).collect();
        for &w in &ws {
            for pair in ts.windows(2) {
                assert!(thermal_occupation(w, pair[1]) > thermal_occupation(w, pair[0]));
            }
        }
        for &t in &ts {
            for pair in ws.windows(2) {
                assert!(thermal_occupation(pair[1], t) < thermal_occupation(pair[0], t));
            }
        }
    }

    #[test]
    fn damping_cases() {
        let g = intrinsic_damping(hz_to_angular(20e6), 1e7);
        assert_relative_eq!(g, hz_to_angular(2.0), max_relative = 1e-14);
        assert!(intrinsic_damping(1e9, 1e30) < 1e-20);
        let g6 = intrinsic_damping(hz_to_angular(120e6), 1e7);
        assert_relative_eq!(g6, hz_to_angular(12.0), max_relative = 1e-14);
    }

    #[test]
    fn spectrum_over_q_is_damping() {
        let p = SystemParams::paper_defaults(6);
        let s = p.spectrum();
        for (w, g) in s.omegas.iter().zip(p.intrinsic_dampings()) {
            assert_relative_eq!(w / p.quality_factor, g, max_relative = 1e-15);
        }
    }

    #[test]
    fn default_regime_is_valid() {
        let p = SystemParams::paper_defaults(3);
        p.validate().unwrap();
        let r = p.regime();
        assert!(r.adiabatic && r.far_detuned);
    }

    #[test]
    fn regime_breakdown_is_reported_not_fatal() {
        let g = hz_to_angular(20e6);
        let p = SystemParams::paper_defaults(3)
            .with_uniform_coupling(1.5 * g)
            .with_drive(3.0 * g, 1.0);
        p.validate().unwrap();
        let r = p.warn_regime();
        assert!(!r.adiabatic && !r.far_detuned);
    }

    #[test]
    fn validation_rejects_bad_input() {
        let mut p = SystemParams::paper_defaults(3);
        p.coupling.pop();
        assert!(p.validate().is_err());
        let mut p = SystemParams::paper_defaults(3);
        p.qubit_decay = 0.0;
        assert!(p.validate().is_err());
        let mut p = SystemParams::paper_defaults(3);
        p.qubit_dephasing = -1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn disorder_is_reproducible_and_per_harmonic() {
        let a = ModeSpectrum::harmonics(vec![1, 2, 3, 4], 1.0, 1e-2, 7);
        let b = ModeSpectrum::harmonics(vec![2, 4], 1.0, 1e-2, 7);
        assert_eq!(a.omegas[1], b.omegas[0]);
        assert_eq!(a.omegas[3], b.omegas[1]);
        for (k, w) in a.omegas.iter().enumerate() {
            let base = (k + 1) as f64;
            assert!(*w > base && *w < base * 1.01);
        }
    }
}
