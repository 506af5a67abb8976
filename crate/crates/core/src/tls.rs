//! Driven-dissipative two-level system: mean-field (Bloch) dynamics, steady
//! state, σ_z fluctuation spectrum from the regression resolvent, and the
//! effective bath it imposes on each mechanical mode.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::modulation::drive_amplitude;
use crate::ode::rk4_sampled;
use crate::params::{ModeSpectrum, SystemParams};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Mean-field expectation values ⟨σ+⟩, ⟨σ−⟩ = ⟨σ+⟩*, ⟨σz⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TlsState {
    pub sigma_plus: Complex64,
    pub sigma_z: f64,
}

impl TlsState {
    pub fn ground() -> Self {
        TlsState { sigma_plus: Complex64::new(0.0, 0.0), sigma_z: -1.0 }
    }

    pub fn sigma_minus(&self) -> Complex64 {
        self.sigma_plus.conj()
    }

    /// `4|⟨σ+⟩|² + ⟨σz⟩²`, the squared Bloch-vector length.
    pub fn bloch_norm_sq(&self) -> f64 {
        4.0 * self.sigma_plus.norm_sqr() + self.sigma_z * self.sigma_z
    }
}

/// Rates entering the Bloch equations.
#[derive(Debug, Clone, Copy)]
pub struct BlochRates {
    pub detuning: f64,
    pub decay: f64,
    pub dephasing: f64,
    pub n_q: f64,
}

impl BlochRates {
    pub fn from_params(p: &SystemParams) -> Self {
        BlochRates {
            detuning: p.detuning,
            decay: p.qubit_decay,
            dephasing: p.qubit_dephasing,
            n_q: p.qubit_occupation(),
        }
    }

    fn m(&self) -> f64 {
        2.0 * self.n_q + 1.0
    }

    /// Linear generator and inhomogeneity of `d(σ+, σ−, σz)/dt = L x + b`.
    ///
    /// Pure dephasing enters as the `(Γ̃/2) D[σz]` dissipator does in the
    /// master equation: coherences decay at an extra `2Γ̃`.
    pub fn generator(&self, rabi: f64, mean_p: f64) -> (Matrix3<Complex64>, Vector3<Complex64>) {
        let c = 0.5 * self.decay * self.m();
        let d = self.detuning;
        let ph = Complex64::from_polar(1.0, mean_p);
        let deph = 2.0 * self.dephasing;
        let l = Matrix3::new(
            -(c + deph) + I * d,
            Complex64::new(0.0, 0.0),
            -0.5 * I * rabi * ph,
            Complex64::new(0.0, 0.0),
            -(c + deph) - I * d,
            0.5 * I * rabi * ph.conj(),
            -I * rabi * ph.conj(),
            I * rabi * ph,
            Complex64::new(-self.decay * self.m(), 0.0),
        );
        let b = Vector3::new(
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(-self.decay, 0.0),
        );
        (l, b)
    }

    /// Right-hand side of the mean-field equations at `state`.
    pub fn rhs(&self, state: &TlsState, rabi: f64, mean_p: f64) -> (Complex64, Complex64, f64) {
        let (l, b) = self.generator(rabi, mean_p);
        let x = Vector3::new(state.sigma_plus, state.sigma_minus(), Complex64::new(state.sigma_z, 0.0));
        let r = l * x + b;
        (r[0], r[1], r[2].re)
    }
}

/// Closed-form fixed point of the mean-field equations without pure
/// dephasing:
///
/// ⟨σ±⟩ = ±iΩ(Γm ± 2iΔ) e^{±i⟨P⟩} / [m(Γ²m² + 4Δ² + 2Ω²)],
/// ⟨σz⟩ = −(Γ²m² + 4Δ²) / [m(Γ²m² + 4Δ² + 2Ω²)], m = 2n̄_q + 1.
pub fn steady_state(detuning: f64, rabi: f64, decay: f64, n_q: f64, mean_p: f64) -> TlsState {
    let m = 2.0 * n_q + 1.0;
    let base = decay * decay * m * m + 4.0 * detuning * detuning;
    let den = m * (base + 2.0 * rabi * rabi);
    let sp = I * rabi * (decay * m + 2.0 * I * detuning) * Complex64::from_polar(1.0, mean_p) / den;
    TlsState { sigma_plus: sp, sigma_z: -base / den }
}

/// Fixed point for arbitrary rates, including pure dephasing, from the
/// linear Bloch system.
pub fn steady_state_general(rates: &BlochRates, rabi: f64, mean_p: f64) -> Result<TlsState> {
    if rates.dephasing == 0.0 {
        return Ok(steady_state(rates.detuning, rabi, rates.decay, rates.n_q, mean_p));
    }
    let (l, b) = rates.generator(rabi, mean_p);
    let x = l
        .lu()
        .solve(&(-b))
        .ok_or_else(|| Error::InvalidParams("singular Bloch generator".into()))?;
    Ok(TlsState { sigma_plus: x[0], sigma_z: x[2].re })
}

/// Steady state at the static drive amplitude Ω_0 and ⟨P⟩ = 0.
pub fn steady_state_for(params: &SystemParams) -> Result<TlsState> {
    steady_state_general(&BlochRates::from_params(params), params.rabi_amplitude, 0.0)
}

/// Largest step accepted by [`mean_field_evolve`]: 0.05 periods of the
/// fastest of Δ, peak drive and Γ.
pub fn mean_field_max_step(params: &SystemParams) -> f64 {
    let peak_drive = params.rabi_amplitude * params.modulation_freqs.len().max(1) as f64;
    let fastest = params.detuning.max(peak_drive).max(params.qubit_decay);
    0.05 * 2.0 * std::f64::consts::PI / fastest
}

/// Integrates the mean-field equations under the modulated drive Ω(t) with
/// ⟨P⟩ held fixed. Returns `samples + 1` evenly spaced snapshots including
/// t = 0.
pub fn mean_field_evolve(
    initial: TlsState,
    params: &SystemParams,
    mean_p: f64,
    t_end: f64,
    dt: f64,
    samples: usize,
) -> Result<Vec<(f64, TlsState)>> {
    let limit = mean_field_max_step(params);
    if !(dt > 0.0) || dt > limit {
        return Err(Error::StepSize { dt, limit });
    }
    let rates = BlochRates::from_params(params);
    let rabi = params.rabi_amplitude;
    let tones = params.modulation_freqs.clone();
    let samples = samples.max(1);
    let times: Vec<f64> = (0..=samples).map(|k| t_end * k as f64 / samples as f64).collect();
    let mut y = vec![
        initial.sigma_plus,
        initial.sigma_minus(),
        Complex64::new(initial.sigma_z, 0.0),
    ];
    let mut out = Vec::with_capacity(times.len());
    let f = |t: f64, y: &[Complex64], dy: &mut [Complex64]| {
        let om = drive_amplitude(t, rabi, &tones);
        let (l, b) = rates.generator(om, mean_p);
        let x = Vector3::new(y[0], y[1], y[2]);
        let r = l * x + b;
        dy.copy_from_slice(r.as_slice());
    };
    rk4_sampled(f, 0.0, &mut y, dt, &times, |t, y| {
        out.push((t, TlsState { sigma_plus: y[0], sigma_z: y[2].re }));
        Ok(())
    })?;
    Ok(out)
}

/// Sign of the pure-dephasing term on the diagonal of the regression matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DephasingConvention {
    /// `−Γm/2 + Γ̃ ± iΔ`, exactly as the resolvent matrix is usually printed.
    #[default]
    AsPrinted,
    /// `−Γm/2 − 2Γ̃ ± iΔ`, consistent with the `(Γ̃/2)D[σz]` dissipator.
    MasterEquation,
}

/// Regression matrix `M` and initial-correlation vector `v` of the
/// two-time σ_z correlator, built at the static drive Ω_0 and ⟨P⟩ = 0.
#[derive(Debug, Clone)]
pub struct Resolvent {
    pub m: Matrix3<Complex64>,
    pub v: Vector3<Complex64>,
}

impl Resolvent {
    pub fn new(params: &SystemParams, convention: DephasingConvention) -> Result<Self> {
        let rates = BlochRates::from_params(params);
        let ss = steady_state_general(&rates, params.rabi_amplitude, 0.0)?;
        Ok(Self::from_parts(&rates, params.rabi_amplitude, &ss, convention))
    }

    pub fn from_parts(
        rates: &BlochRates,
        rabi: f64,
        ss: &TlsState,
        convention: DephasingConvention,
    ) -> Self {
        let m_q = rates.m();
        let deph = match convention {
            DephasingConvention::AsPrinted => rates.dephasing,
            DephasingConvention::MasterEquation => -2.0 * rates.dephasing,
        };
        let diag = -0.5 * rates.decay * m_q + deph;
        let z = Complex64::new(0.0, 0.0);
        let m = Matrix3::new(
            diag + I * rates.detuning,
            z,
            -0.5 * I * rabi,
            z,
            diag - I * rates.detuning,
            0.5 * I * rabi,
            -I * rabi,
            I * rabi,
            Complex64::new(-rates.decay * m_q, 0.0),
        );
        let sz = ss.sigma_z;
        let v = Vector3::new(
            -ss.sigma_plus * (1.0 + sz),
            ss.sigma_minus() * (1.0 - sz),
            Complex64::new(1.0 - sz * sz, 0.0),
        );
        Resolvent { m, v }
    }

    /// Eigenvalues of `M`.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let schur = nalgebra::Schur::new(self.m);
        let (_, t) = schur.unpack();
        (0..3).map(|i| t[(i, i)]).collect()
    }

    /// True when every eigenvalue of `M` has negative real part.
    pub fn is_stable(&self) -> bool {
        self.eigenvalues().iter().all(|l| l.re < 0.0)
    }

    /// `C(s) = (sI − M)⁻¹ v` at `s = −iω`.
    pub fn correlation_transform(&self, omega: f64) -> Result<Vector3<Complex64>> {
        let s = Complex64::new(0.0, -omega);
        let a = Matrix3::from_diagonal_element(s) - self.m;
        let scale = self.m.iter().map(|c| c.norm()).fold(omega.abs(), f64::max);
        let det = a.determinant();
        if det.norm() <= 1e-13 * scale.powi(3) {
            return Err(Error::SingularResolvent { omega, det: det.norm() });
        }
        a.lu().solve(&self.v).ok_or(Error::SingularResolvent { omega, det: det.norm() })
    }

    /// S(ω) = ½ Re C₃(−iω).
    pub fn spectrum(&self, omega: f64) -> Result<f64> {
        Ok(0.5 * self.correlation_transform(omega)?[2].re)
    }
}

/// TLS steady-state σ_z fluctuation spectrum S(ω).
pub fn fluctuation_spectrum(omega: f64, params: &SystemParams) -> Result<f64> {
    let res = Resolvent::new(params, DephasingConvention::default())?;
    if !res.is_stable() {
        log::warn!("regression matrix has eigenvalues with non-negative real part");
    }
    res.spectrum(omega)
}

/// TLS-induced damping `γ̃_k` and occupancy `ñ_k` of each mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TlsEffectiveBath {
    pub induced_damping: Vec<f64>,
    pub induced_occupancy: Vec<f64>,
}

impl TlsEffectiveBath {
    pub fn none(n: usize) -> Self {
        TlsEffectiveBath { induced_damping: vec![0.0; n], induced_occupancy: vec![0.0; n] }
    }
}

/// γ̃_k = g_k²[S(ω_k) − S(−ω_k)], ñ_k = S(−ω_k)/[S(ω_k) − S(−ω_k)].
///
/// When both spectral values vanish (no drive) the mode gets no induced
/// bath. A non-positive difference otherwise is reported as an error.
pub fn effective_bath(params: &SystemParams, spectrum: &ModeSpectrum) -> Result<TlsEffectiveBath> {
    let res = Resolvent::new(params, DephasingConvention::default())?;
    effective_bath_with(&res, &params.coupling, spectrum)
}

pub fn effective_bath_with(
    res: &Resolvent,
    coupling: &[f64],
    spectrum: &ModeSpectrum,
) -> Result<TlsEffectiveBath> {
    let n = spectrum.len();
    let mut bath = TlsEffectiveBath::none(n);
    // S has units of time; the natural scale is 1/|M|.
    let scale = 1.0 / res.m.iter().map(|c| c.norm()).fold(0.0, f64::max);
    for (k, &w) in spectrum.omegas.iter().enumerate() {
        let s_pos = res.spectrum(w)?;
        let s_neg = res.spectrum(-w)?;
        if s_pos.abs() < 1e-14 * scale && s_neg.abs() < 1e-14 * scale {
            continue;
        }
        let diff = s_pos - s_neg;
        if diff <= 0.0 {
            return Err(Error::NonPositiveDamping { mode: k, difference: diff });
        }
        bath.induced_damping[k] = coupling[k] * coupling[k] * diff;
        bath.induced_occupancy[k] = s_neg / diff;
    }
    Ok(bath)
}
