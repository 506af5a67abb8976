//! Modulated TLS drive, resonance bookkeeping and the weighted two-mode
//! squeezing / state-transfer adjacency matrices.

use crate::params::{ModeSpectrum, ModulationScheme, SystemParams};

/// Ω(t) = Ω_0 Σ_i cos(w_i t).
pub fn drive_amplitude(t: f64, rabi: f64, tones: &[f64]) -> f64 {
    rabi * tones.iter().map(|w| (w * t).cos()).sum::<f64>()
}

/// Tones for `scheme` over the given (active) mode frequencies. The
/// half-sum scheme uses every unordered pair k < l.
pub fn select_tones(active_omegas: &[f64], scheme: ModulationScheme) -> Vec<f64> {
    match scheme {
        ModulationScheme::ModeFrequencies => active_omegas.to_vec(),
        ModulationScheme::HalfSumFrequencies => {
            if active_omegas.len() < 2 {
                return active_omegas.to_vec();
            }
            let mut tones = Vec::new();
            for (k, wk) in active_omegas.iter().enumerate() {
                for wl in &active_omegas[k + 1..] {
                    tones.push(0.5 * (wk + wl));
                }
            }
            tones
        }
    }
}

/// Ω(t)²/Ω_0² as a list of (frequency, weight) exponential components.
///
/// Each ordered tone pair contributes `e^{±i(w_i+w_j)t}` and
/// `e^{±i(w_i−w_j)t}` with weight 1/4 each.
pub fn drive_square_components(tones: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(4 * tones.len() * tones.len());
    for &wi in tones {
        for &wj in tones {
            out.push((wi + wj, 0.25));
            out.push((-(wi + wj), 0.25));
            out.push((wi - wj, 0.25));
            out.push((-(wi - wj), 0.25));
        }
    }
    out
}

fn resonant_weight(components: &[(f64, f64)], nu: f64, tol: f64) -> f64 {
    components
        .iter()
        .filter(|(f, _)| (f - nu).abs() <= tol)
        .map(|(_, w)| w)
        .sum()
}

/// Static part of the effective coupling per unit Ω²:
/// `g_k g_l / (2Δ(2n̄_q+1) ω_k ω_l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    pub n: usize,
    per_rabi_sq: Vec<f64>,
    pub rabi: f64,
    pub tones: Vec<f64>,
}

impl CouplingMatrix {
    pub fn new(params: &SystemParams) -> Self {
        let spec = params.spectrum();
        Self::from_parts(
            &spec.omegas,
            &params.coupling,
            params.detuning,
            params.qubit_occupation(),
            params.rabi_amplitude,
            params.modulation_freqs.clone(),
        )
    }

    pub fn from_parts(
        omegas: &[f64],
        couplings: &[f64],
        detuning: f64,
        n_q: f64,
        rabi: f64,
        tones: Vec<f64>,
    ) -> Self {
        let n = omegas.len();
        let pref = 1.0 / (2.0 * detuning * (2.0 * n_q + 1.0));
        let mut per_rabi_sq = vec![0.0; n * n];
        for k in 0..n {
            for l in 0..n {
                let gg = couplings[k] * couplings[l];
                if gg != 0.0 {
                    per_rabi_sq[k * n + l] = pref * gg / (omegas[k] * omegas[l]);
                }
            }
        }
        CouplingMatrix { n, per_rabi_sq, rabi, tones }
    }

    /// G_{k,l} per unit Ω².
    pub fn unit_value(&self, k: usize, l: usize) -> f64 {
        self.per_rabi_sq[k * self.n + l]
    }

    /// G_{k,l} with Ω ← Ω_0.
    pub fn static_value(&self, k: usize, l: usize) -> f64 {
        self.per_rabi_sq[k * self.n + l] * self.rabi * self.rabi
    }

    /// G_{k,l}(t) with Ω ← Ω(t).
    pub fn value_at(&self, k: usize, l: usize, t: f64) -> f64 {
        let om = drive_amplitude(t, self.rabi, &self.tones);
        self.per_rabi_sq[k * self.n + l] * om * om
    }

    /// Row-major G(t).
    pub fn matrix_at(&self, t: f64) -> Vec<f64> {
        let om = drive_amplitude(t, self.rabi, &self.tones);
        self.per_rabi_sq.iter().map(|g| g * om * om).collect()
    }

    pub fn static_matrix(&self) -> Vec<f64> {
        let r2 = self.rabi * self.rabi;
        self.per_rabi_sq.iter().map(|g| g * r2).collect()
    }
}

/// G_{k,l} between simulated modes `k`, `l` (0-based) at drive amplitude Ω_0.
pub fn effective_coupling(k: usize, l: usize, params: &SystemParams) -> f64 {
    CouplingMatrix::new(params).static_value(k, l)
}

/// Weighted adjacency matrices over a spectrum of `n` modes (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrices {
    pub n: usize,
    pub tms: Vec<f64>,
    pub qst: Vec<f64>,
    /// Modes directly addressed by the tones (0-based indices into the spectrum).
    pub active_set: Vec<usize>,
}

impl AdjacencyMatrices {
    pub fn tms(&self, k: usize, l: usize) -> f64 {
        self.tms[k * self.n + l]
    }

    pub fn qst(&self, k: usize, l: usize) -> f64 {
        self.qst[k * self.n + l]
    }

    /// F_{k,l} = G_{k,l} B^tms_{k,l}.
    pub fn weighted_tms(&self, coupling: &CouplingMatrix) -> Vec<f64> {
        assert_eq!(coupling.n, self.n, "coupling and adjacency built on different spectra");
        let mut f = vec![0.0; self.n * self.n];
        for k in 0..self.n {
            for l in 0..self.n {
                f[k * self.n + l] = coupling.static_value(k, l) * self.tms(k, l);
            }
        }
        f
    }

    /// Relabels modes: new index `i` is old index `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut tms = vec![0.0; n * n];
        let mut qst = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                tms[i * n + j] = self.tms(perm[i], perm[j]);
                qst[i * n + j] = self.qst(perm[i], perm[j]);
            }
        }
        let mut active_set: Vec<usize> = self
            .active_set
            .iter()
            .map(|&a| perm.iter().position(|&p| p == a).unwrap())
            .collect();
        active_set.sort_unstable();
        AdjacencyMatrices { n, tms, qst, active_set }
    }
}

/// Resolves which drive components of Ω(t)² are resonant with each
/// two-mode-squeezing (ω_k + ω_l) and state-transfer (ω_k − ω_l) process.
/// Resonances from different tone pairs are summed.
pub fn build_adjacency(
    spectrum: &ModeSpectrum,
    tones: &[f64],
    scheme: ModulationScheme,
    tol: f64,
) -> AdjacencyMatrices {
    let n = spectrum.len();
    let w = &spectrum.omegas;
    let comps = drive_square_components(tones);
    let mut tms = vec![0.0; n * n];
    let mut qst = vec![0.0; n * n];
    for k in 0..n {
        for l in 0..n {
            tms[k * n + l] = resonant_weight(&comps, w[k] + w[l], tol);
            qst[k * n + l] = resonant_weight(&comps, w[k] - w[l], tol);
        }
    }
    let hits = |x: f64| tones.iter().any(|t| (t - x).abs() <= tol);
    let active_set = (0..n)
        .filter(|&k| match scheme {
            ModulationScheme::ModeFrequencies => hits(w[k]),
            ModulationScheme::HalfSumFrequencies => {
                (0..n).any(|l| l != k && hits(0.5 * (w[k] + w[l]))) || (n == 1 && hits(w[k]))
            }
        })
        .collect();
    AdjacencyMatrices { n, tms, qst, active_set }
}

/// Adjacency for the simulated spectrum of `params`, resonance tolerance
/// 10⁻⁹ δ_FSR.
pub fn adjacency_for(params: &SystemParams) -> AdjacencyMatrices {
    build_adjacency(
        &params.spectrum(),
        &params.modulation_freqs,
        params.modulation_scheme,
        1e-9 * params.fsr,
    )
}

/// Quadratic form `H = ½ uᵀ K u` over `u = (x_1, p_1, …, x_M, p_M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub n_modes: usize,
    /// Row-major 2M×2M symmetric Hessian.
    pub k: Vec<f64>,
}

impl QuadraticForm {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.k[a * 2 * self.n_modes + b]
    }

    pub fn xx(&self, k: usize, l: usize) -> f64 {
        self.get(2 * k, 2 * l)
    }

    pub fn pp(&self, k: usize, l: usize) -> f64 {
        self.get(2 * k + 1, 2 * l + 1)
    }

    pub fn xp(&self, k: usize, l: usize) -> f64 {
        self.get(2 * k, 2 * l + 1)
    }
}

/// Interaction-picture RWA Hamiltonian
/// `½ Σ G_{k,l}(B^tms b_k b_l − B^qst b_k b_l†) + H.c.` in quadrature form,
/// with `b_k b_l + H.c. = x_k x_l − p_k p_l` and
/// `b_k b_l† + H.c. = x_k x_l + p_k p_l` (constants dropped).
pub fn rwa_hamiltonian(adj: &AdjacencyMatrices, coupling: &CouplingMatrix) -> QuadraticForm {
    assert_eq!(adj.n, coupling.n, "coupling and adjacency built on different spectra");
    let n = adj.n;
    let dim = 2 * n;
    let mut k = vec![0.0; dim * dim];
    for a in 0..n {
        for b in 0..n {
            let g = coupling.static_value(a, b);
            let t = adj.tms(a, b);
            let q = 0.5 * (adj.qst(a, b) + adj.qst(b, a));
            // H = Σ_ab [c_xx x_a x_b + c_pp p_a p_b], Hessian entries are 2c.
            let c_xx = 0.5 * g * (t - q);
            let c_pp = -0.5 * g * (t + q);
            k[(2 * a) * dim + 2 * b] += 2.0 * c_xx;
            k[(2 * a + 1) * dim + 2 * b + 1] += 2.0 * c_pp;
        }
    }
    QuadraticForm { n_modes: n, k }
}
