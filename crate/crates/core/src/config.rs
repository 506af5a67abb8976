//! TOML configuration files.
//!
//! Four sections: `[system]`, `[drive]`, `[noise]`, `[run]`. Keys under the
//! first three are [`SystemParams`] field names. Every frequency or rate in
//! the file is an ordinary frequency in Hz and is converted to rad/s on load;
//! temperature is in K. Unset keys keep the scenario defaults.
//!
//! ```toml
//! [system]
//! n_modes = 3
//! fsr = 20e6
//! qubit_decay = 20e6
//! coupling = 10e6            # uniform g_0, or one value per mode
//!
//! [drive]
//! rabi_amplitude = 60e6
//! detuning_ratio = 5.0       # Δ = 5 Ω_0; or `detuning = 300e6`
//! modulation_scheme = "mode-frequencies"
//!
//! [noise]
//! temperature = 0.01
//! qubit_dephasing = 0.0
//! quality_factor = 1e7
//!
//! [run]
//! t_end_tau = 100.0
//! samples = 200
//! dims = [6, 5, 4]
//!
//! [run.sweep]                # rates in units of qubit_decay, temperature in K
//! g0 = [0.1, 0.3, 0.5]
//! rabi_amplitude = [3.0, 7.0]
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::params::{hz_to_angular, ModulationScheme, SystemParams};

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Coupling {
    Uniform(f64),
    PerMode(Vec<f64>),
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub n_modes: Option<usize>,
    pub mode_numbers: Option<Vec<usize>>,
    pub fsr: Option<f64>,
    pub qubit_freq: Option<f64>,
    pub qubit_decay: Option<f64>,
    pub coupling: Option<Coupling>,
    pub anharmonicity: Option<f64>,
    pub anharmonicity_seed: Option<u64>,
    pub far_detuned_factor: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DriveSection {
    pub rabi_amplitude: Option<f64>,
    pub detuning: Option<f64>,
    pub detuning_ratio: Option<f64>,
    pub modulation_freqs: Option<Vec<f64>>,
    pub modulation_scheme: Option<ModulationScheme>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub temperature: Option<f64>,
    pub qubit_dephasing: Option<f64>,
    pub quality_factor: Option<f64>,
}

/// Sweep axes. Rates are in units of the qubit decay Γ.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub g0: Option<Vec<f64>>,
    pub rabi_amplitude: Option<Vec<f64>>,
    pub temperature: Option<Vec<f64>>,
    pub qubit_dephasing: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Simulated time in units of τ_FSR.
    pub t_end_tau: Option<f64>,
    pub samples: Option<usize>,
    /// Fock truncation per mode for the exact model.
    pub dims: Option<Vec<usize>>,
    pub tolerance: Option<f64>,
    /// Ω_0/Γ and g_0/Γ of the triangle (T, Γ̃) robustness grid.
    pub region_rabi: Option<f64>,
    pub region_g0: Option<f64>,
    /// Largest mode number of the depth scan.
    pub max_k: Option<usize>,
    /// Total modes M of the multimode scenario.
    pub total_modes: Option<usize>,
    /// Mode numbers addressed by the drive tones (adjacency).
    pub targets: Option<Vec<usize>>,
    /// Spectrum grid of `tls-spectrum`, Hz.
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub points: Option<usize>,
    /// Also write covariance snapshots (CSV and binary).
    pub write_snapshots: Option<bool>,
    /// Also write the final density matrix of every exact run.
    pub dump_states: Option<bool>,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub system: SystemSection,
    pub drive: DriveSection,
    pub noise: NoiseSection,
    pub run: RunSection,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn check(&self) -> Result<()> {
        if self.drive.detuning.is_some() && self.drive.detuning_ratio.is_some() {
            return Err(Error::Config("give either drive.detuning or drive.detuning_ratio".into()));
        }
        if let Some(s) = self.run.samples {
            if s == 0 {
                return Err(Error::Config("run.samples must be at least 1".into()));
            }
        }
        if let Some(t) = self.run.t_end_tau {
            positive("run.t_end_tau", t)?;
        }
        if let Some(tol) = self.run.tolerance {
            positive("run.tolerance", tol)?;
        }
        if let Some(d) = &self.run.dims {
            if d.contains(&0) {
                return Err(Error::Config("run.dims entries must be positive".into()));
            }
        }
        let sw = &self.run.sweep;
        for (name, vals) in [
            ("g0", &sw.g0),
            ("rabi_amplitude", &sw.rabi_amplitude),
            ("temperature", &sw.temperature),
            ("qubit_dephasing", &sw.qubit_dephasing),
        ] {
            if let Some(v) = vals {
                if v.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                    return Err(Error::Config(format!("run.sweep.{name} values must be finite and >= 0")));
                }
            }
        }
        Ok(())
    }

    /// Δ/Ω_0 to keep while sweeping Ω_0, unless the file fixes Δ itself.
    pub fn detuning_ratio(&self) -> Option<f64> {
        match (self.drive.detuning, self.drive.detuning_ratio) {
            (Some(_), _) => None,
            (None, r) => Some(r.unwrap_or(5.0)),
        }
    }

    /// Overlays the file onto `base`, converting Hz to rad/s.
    ///
    /// Changing the mode set resets couplings and tones as
    /// [`SystemParams::with_modes`] does, before the file's own couplings
    /// and tones are applied.
    pub fn apply(&self, base: SystemParams) -> Result<SystemParams> {
        let mut p = base;
        let s = &self.system;
        if let Some(f) = s.fsr {
            p.fsr = hz_to_angular(positive("system.fsr", f)?);
        }
        if let Some(f) = s.qubit_freq {
            p.qubit_freq = hz_to_angular(positive("system.qubit_freq", f)?);
        }
        if let Some(f) = s.qubit_decay {
            p.qubit_decay = hz_to_angular(positive("system.qubit_decay", f)?);
        }
        if let Some(a) = s.anharmonicity {
            p.anharmonicity = a;
        }
        if let Some(seed) = s.anharmonicity_seed {
            p.anharmonicity_seed = seed;
        }
        if let Some(f) = s.far_detuned_factor {
            p.far_detuned_factor = positive("system.far_detuned_factor", f)?;
        }
        match (s.n_modes, &s.mode_numbers) {
            (_, Some(m)) => {
                if s.n_modes.is_some_and(|n| n != m.len()) {
                    return Err(Error::Config("system.n_modes disagrees with system.mode_numbers".into()));
                }
                p = p.with_modes(m.clone());
            }
            (Some(n), None) => p = p.with_modes((1..=n).collect()),
            (None, None) => {}
        }
        let n = &self.noise;
        if let Some(t) = n.temperature {
            p.temperature = t;
        }
        if let Some(g) = n.qubit_dephasing {
            p.qubit_dephasing = hz_to_angular(g);
        }
        if let Some(q) = n.quality_factor {
            p.quality_factor = positive("noise.quality_factor", q)?;
        }
        let d = &self.drive;
        if let Some(r) = d.rabi_amplitude {
            p.rabi_amplitude = hz_to_angular(r);
        }
        if let Some(dt) = d.detuning {
            p.detuning = hz_to_angular(positive("drive.detuning", dt)?);
        } else if d.detuning_ratio.is_some() || d.rabi_amplitude.is_some() {
            p.detuning = d.detuning_ratio.unwrap_or(5.0) * p.rabi_amplitude;
        }
        if let Some(scheme) = d.modulation_scheme {
            p.modulation_scheme = scheme;
            p.modulation_freqs = p.default_tones();
        }
        if let Some(t) = &d.modulation_freqs {
            p.modulation_freqs = t.iter().map(|&f| hz_to_angular(f)).collect();
        }
        match &s.coupling {
            Some(Coupling::Uniform(g)) => p.coupling = vec![hz_to_angular(*g); p.n_modes],
            Some(Coupling::PerMode(g)) => {
                if g.len() != p.n_modes {
                    return Err(Error::Config(format!(
                        "system.coupling has {} entries for {} modes",
                        g.len(),
                        p.n_modes
                    )));
                }
                p.coupling = g.iter().map(|&x| hz_to_angular(x)).collect();
            }
            None => {}
        }
        p.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_file_keeps_defaults() {
        let cfg = Config::parse("").unwrap();
        let base = SystemParams::paper_defaults(3);
        assert_eq!(cfg.apply(base.clone()).unwrap(), base);
    }

    #[test]
    fn hz_converted_on_load() {
        let cfg = Config::parse(
            "[system]\nfsr = 10e6\ncoupling = 1e6\n[drive]\nrabi_amplitude = 2e6\n[noise]\ntemperature = 0.05\n",
        )
        .unwrap();
        let p = cfg.apply(SystemParams::paper_defaults(2)).unwrap();
        assert_relative_eq!(p.fsr, hz_to_angular(10e6));
        assert_eq!(p.coupling, vec![hz_to_angular(1e6); 2]);
        assert_relative_eq!(p.rabi_amplitude, hz_to_angular(2e6));
        // Δ follows the default ratio 5
        assert_relative_eq!(p.detuning, 5.0 * hz_to_angular(2e6));
        assert_eq!(p.temperature, 0.05);
    }

    #[test]
    fn explicit_detuning_and_modes() {
        let cfg = Config::parse(
            "[system]\nmode_numbers = [1, 4]\ncoupling = [1e6, 2e6]\n[drive]\ndetuning = 1e8\nmodulation_scheme = \"half-sum-frequencies\"\n",
        )
        .unwrap();
        assert_eq!(cfg.detuning_ratio(), None);
        let p = cfg.apply(SystemParams::paper_defaults(3)).unwrap();
        assert_eq!(p.n_modes, 2);
        assert_eq!(p.mode_numbers, vec![1, 4]);
        assert_relative_eq!(p.detuning, hz_to_angular(1e8));
        assert_eq!(p.modulation_freqs.len(), 1);
        assert_relative_eq!(p.modulation_freqs[0], 2.5 * p.fsr);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Config::parse("[system]\nbogus = 1\n").is_err());
        assert!(Config::parse("[run.sweep]\nkappa = [1.0]\n").is_err());
        assert!(Config::parse("[drive]\ndetuning = 1e8\ndetuning_ratio = 5\n").is_err());
        assert!(Config::parse("[run]\nsamples = 0\n").is_err());
        let cfg = Config::parse("[system]\nn_modes = 2\ncoupling = [1e6]\n").unwrap();
        assert!(cfg.apply(SystemParams::paper_defaults(3)).is_err());
        let cfg = Config::parse("[system]\nfsr = -1.0\n").unwrap();
        assert!(cfg.apply(SystemParams::paper_defaults(3)).is_err());
    }

    #[test]
    fn sweep_section() {
        let cfg = Config::parse("[run.sweep]\ng0 = [0.1, 0.5]\ntemperature = [0.01]\n").unwrap();
        assert_eq!(cfg.run.sweep.g0, Some(vec![0.1, 0.5]));
        assert_eq!(cfg.run.sweep.rabi_amplitude, None);
    }
}
