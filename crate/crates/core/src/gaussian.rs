//! Effective Gaussian model: drift and diffusion of the mode quadratures,
//! covariance-matrix propagation and symplectic linear algebra.
//!
//! Quadratures are ordered `(x_1, p_1, …, x_M, p_M)` with vacuum `V = I/2`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::modulation::{drive_amplitude, rwa_hamiltonian, AdjacencyMatrices, CouplingMatrix};
use crate::params::SystemParams;
use crate::tls::{effective_bath, TlsEffectiveBath};

/// Symmetry tolerance accepted by [`CovarianceMatrix::new`].
const SYMMETRY_TOL: f64 = 1e-10;
/// Physicality slack used when aborting an integration.
pub const PHYSICALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    v: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Wraps `v`, which must be square, even-sized and symmetric. The stored
    /// matrix is exactly symmetrised.
    pub fn new(v: DMatrix<f64>) -> Result<Self> {
        if v.nrows() != v.ncols() || !v.nrows().is_multiple_of(2) || v.nrows() == 0 {
            return Err(Error::InvalidParams(format!(
                "covariance matrix must be 2M×2M, got {}×{}",
                v.nrows(),
                v.ncols()
            )));
        }
        let asym = (&v - v.transpose()).amax();
        if asym > SYMMETRY_TOL * v.amax().max(1.0) {
            return Err(Error::InvalidParams(format!("covariance matrix not symmetric ({asym:e})")));
        }
        Ok(CovarianceMatrix { v: (&v + v.transpose()) * 0.5 })
    }

    pub fn vacuum(n_modes: usize) -> Self {
        CovarianceMatrix { v: DMatrix::identity(2 * n_modes, 2 * n_modes) * 0.5 }
    }

    /// Product of thermal states with the given occupations.
    pub fn thermal(occupations: &[f64]) -> Self {
        let diag: Vec<f64> = occupations.iter().flat_map(|&n| [n + 0.5, n + 0.5]).collect();
        CovarianceMatrix { v: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)) }
    }

    /// Two-mode squeezed vacuum with squeezing `r`.
    pub fn two_mode_squeezed(r: f64) -> Self {
        let c = 0.5 * (2.0 * r).cosh();
        let s = 0.5 * (2.0 * r).sinh();
        #[rustfmt::skip]
        let v = DMatrix::from_row_slice(4, 4, &[
            c, 0.0, s, 0.0,
            0.0, c, 0.0, -s,
            s, 0.0, c, 0.0,
            0.0, -s, 0.0, c,
        ]);
        CovarianceMatrix { v }
    }

    pub fn n_modes(&self) -> usize {
        self.v.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.v
    }

    /// CM of the listed modes (0-based), in the given order.
    pub fn reduced(&self, modes: &[usize]) -> Result<Self> {
        let m = self.n_modes();
        if modes.is_empty() || modes.iter().any(|&k| k >= m) {
            return Err(Error::InvalidPartition(format!("modes {modes:?} out of range for {m}")));
        }
        let idx: Vec<usize> = modes.iter().flat_map(|&k| [2 * k, 2 * k + 1]).collect();
        let n = idx.len();
        let v = DMatrix::from_fn(n, n, |i, j| self.v[(idx[i], idx[j])]);
        Ok(CovarianceMatrix { v })
    }

    /// Direct sum `self ⊕ other`.
    pub fn direct_sum(&self, other: &CovarianceMatrix) -> Self {
        let (a, b) = (self.v.nrows(), other.v.nrows());
        let mut v = DMatrix::zeros(a + b, a + b);
        v.view_mut((0, 0), (a, a)).copy_from(&self.v);
        v.view_mut((a, a), (b, b)).copy_from(&other.v);
        CovarianceMatrix { v }
    }

    /// Congruence `S V Sᵀ`.
    pub fn transformed(&self, s: &DMatrix<f64>) -> Self {
        let v = s * &self.v * s.transpose();
        CovarianceMatrix { v: (&v + v.transpose()) * 0.5 }
    }

    /// Row-major upper triangle (including the diagonal).
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.v.nrows();
        let mut out = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                out.push(self.v[(i, j)]);
            }
        }
        out
    }

    pub fn from_upper_triangle(n_modes: usize, data: &[f64]) -> Result<Self> {
        let n = 2 * n_modes;
        if data.len() != n * (n + 1) / 2 {
            return Err(Error::InvalidParams("upper triangle length mismatch".into()));
        }
        let mut v = DMatrix::zeros(n, n);
        let mut it = data.iter();
        for i in 0..n {
            for j in i..n {
                let x = *it.next().unwrap();
                v[(i, j)] = x;
                v[(j, i)] = x;
            }
        }
        Ok(CovarianceMatrix { v })
    }

    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        symplectic_eigenvalues(self)
    }

    pub fn min_symplectic_eigenvalue(&self) -> Result<f64> {
        Ok(symplectic_eigenvalues(self)?[0])
    }

    /// `det(2V)`; at least 1 for physical states, 1 for pure ones.
    pub fn purity_determinant(&self) -> f64 {
        (&self.v * 2.0).determinant()
    }

    /// Symplectic eigenvalues all ≥ 1/2 − `tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        match self.min_symplectic_eigenvalue() {
            Ok(nu) => nu >= 0.5 - tol,
            Err(_) => false,
        }
    }
}

/// Block-diagonal symplectic form `⊕ [[0, 1], [−1, 0]]`.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut om = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        om[(2 * k, 2 * k + 1)] = 1.0;
        om[(2 * k + 1, 2 * k)] = -1.0;
    }
    om
}

fn sqrt_spd(v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(v.clone());
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    if eig.eigenvalues.iter().any(|&l| l <= 1e-15 * scale) {
        return Err(Error::NotPositiveDefinite);
    }
    let sq = eig.eigenvalues.map(f64::sqrt);
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sq) * eig.eigenvectors.transpose())
}

/// Symplectic spectrum of `V`, ascending, one value per mode.
///
/// With `S = √V Ω √V` (antisymmetric) the eigenvalues of `SᵀS` are the
/// squared symplectic eigenvalues, each twice.
pub fn symplectic_eigenvalues(cm: &CovarianceMatrix) -> Result<Vec<f64>> {
    let m = cm.n_modes();
    let r = sqrt_spd(&cm.v)?;
    let s = &r * symplectic_form(m) * &r;
    let sts = s.transpose() * &s;
    let mut ev: Vec<f64> = SymmetricEigen::new((&sts + sts.transpose()) * 0.5)
        .eigenvalues
        .iter()
        .map(|&x| x.max(0.0).sqrt())
        .collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev.iter().step_by(2).copied().collect())
}

fn entropy_term(nu: f64) -> f64 {
    let a = nu + 0.5;
    let b = nu - 0.5;
    let hi = a * a.ln();
    if b <= 1e-14 {
        hi
    } else {
        hi - b * b.ln()
    }
}

/// Von Neumann entropy (nats) of a Gaussian state.
pub fn gaussian_entropy(cm: &CovarianceMatrix) -> Result<f64> {
    Ok(symplectic_eigenvalues(cm)?.into_iter().map(|nu| entropy_term(nu.max(0.5))).sum())
}

/// Negates the momentum rows/columns of the modes in `party`.
pub fn partial_transpose_cm(cm: &CovarianceMatrix, party: &[usize]) -> CovarianceMatrix {
    let mut v = cm.v.clone();
    for &k in party {
        let p = 2 * k + 1;
        for j in 0..v.ncols() {
            v[(p, j)] = -v[(p, j)];
        }
        for i in 0..v.nrows() {
            v[(i, p)] = -v[(i, p)];
        }
    }
    CovarianceMatrix { v }
}

/// Stable-convention drift `Ā`, so that `u̇ = Āu + noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftMatrix {
    pub a: DMatrix<f64>,
}

impl DriftMatrix {
    pub fn eigenvalues(&self) -> Vec<num_complex::Complex64> {
        self.a.complex_eigenvalues().iter().copied().collect()
    }
}

/// Diagonal diffusion, one value per quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionMatrix {
    pub d: Vec<f64>,
}

impl DiffusionMatrix {
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.d))
    }
}

/// Mode frequencies, total dampings and noise of the effective model.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    pub omegas: Vec<f64>,
    pub kappa: Vec<f64>,
    pub diffusion: DiffusionMatrix,
    pub coupling: CouplingMatrix,
    a_static: DMatrix<f64>,
    a_drive: DMatrix<f64>,
}

impl GaussianModel {
    /// Model for `params`, with the TLS-induced bath from the resolvent.
    pub fn new(params: &SystemParams) -> Result<Self> {
        params.validate()?;
        let spec = params.spectrum();
        let bath = effective_bath(params, &spec)?;
        Ok(Self::from_parts(
            &spec.omegas,
            &params.intrinsic_dampings(),
            &params.mode_occupations(),
            &bath,
            CouplingMatrix::new(params),
        ))
    }

    pub fn from_parts(
        omegas: &[f64],
        gamma: &[f64],
        occupations: &[f64],
        bath: &TlsEffectiveBath,
        coupling: CouplingMatrix,
    ) -> Self {
        let m = omegas.len();
        assert!(gamma.len() == m && occupations.len() == m && coupling.n == m);
        let mut kappa = Vec::with_capacity(m);
        let mut d = Vec::with_capacity(2 * m);
        for k in 0..m {
            let (gt, nt) = (bath.induced_damping[k], bath.induced_occupancy[k]);
            kappa.push(gamma[k] + gt);
            let dk = gamma[k] * (occupations[k] + 0.5) + gt * (nt + 0.5);
            d.extend([dk, dk]);
        }
        let mut a_static = DMatrix::zeros(2 * m, 2 * m);
        let mut a_drive = DMatrix::zeros(2 * m, 2 * m);
        for k in 0..m {
            let (x, p) = (2 * k, 2 * k + 1);
            a_static[(x, x)] = -0.5 * kappa[k];
            a_static[(p, p)] = -0.5 * kappa[k];
            a_static[(x, p)] = omegas[k];
            a_static[(p, x)] = -omegas[k];
            for l in 0..m {
                a_drive[(p, 2 * l)] = -coupling.unit_value(k, l);
            }
        }
        GaussianModel {
            omegas: omegas.to_vec(),
            kappa,
            diffusion: DiffusionMatrix { d },
            coupling,
            a_static,
            a_drive,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.omegas.len()
    }

    fn drive_square(&self, t: f64) -> f64 {
        let om = drive_amplitude(t, self.coupling.rabi, &self.coupling.tones);
        om * om
    }

    pub fn drift_at(&self, t: f64) -> DriftMatrix {
        DriftMatrix { a: &self.a_static + &self.a_drive * self.drive_square(t) }
    }

    /// Largest frequency in `Ā(t)`: mode frequencies and drive beats `2·max w`.
    pub fn max_frequency(&self) -> f64 {
        let w_mode = self.omegas.iter().copied().fold(0.0, f64::max);
        let w_drive = 2.0 * self.coupling.tones.iter().map(|w| w.abs()).fold(0.0, f64::max);
        w_mode.max(w_drive)
    }

    /// `(2π/ω_max)/50`.
    pub fn max_step(&self) -> f64 {
        let w = self.max_frequency();
        if w > 0.0 {
            2.0 * std::f64::consts::PI / w / 50.0
        } else {
            f64::INFINITY
        }
    }

    /// Period of `Ā(t)` when all tones are integer multiples of `base / q`
    /// for some small `q`; `None` for a static or incommensurate drive.
    pub fn drive_period(&self, base: f64) -> Option<f64> {
        let tones: Vec<f64> = self.coupling.tones.iter().map(|w| w.abs()).filter(|&w| w > 0.0).collect();
        if tones.is_empty() || self.coupling.rabi == 0.0 {
            return None;
        }
        (1..=4).find_map(|q| {
            let ok = tones.iter().all(|&w| {
                let r = w * q as f64 / base;
                (r - r.round()).abs() < 1e-9 * r.max(1.0)
            });
            ok.then(|| q as f64 * 2.0 * std::f64::consts::PI / base)
        })
    }

    /// Static drift of the rotating-wave model in the frame rotating at the
    /// mode frequencies.
    pub fn rwa_drift(&self, adj: &AdjacencyMatrices) -> DriftMatrix {
        let m = self.n_modes();
        let form = rwa_hamiltonian(adj, &self.coupling);
        let mut a = DMatrix::zeros(2 * m, 2 * m);
        for k in 0..m {
            let (x, p) = (2 * k, 2 * k + 1);
            for b in 0..2 * m {
                a[(x, b)] = form.get(p, b);
                a[(p, b)] = -form.get(x, b);
            }
            a[(x, x)] -= 0.5 * self.kappa[k];
            a[(p, p)] -= 0.5 * self.kappa[k];
        }
        DriftMatrix { a }
    }
}

/// Drift at time `t` built directly from the parameter set.
pub fn build_drift(t: f64, params: &SystemParams, coupling: &CouplingMatrix, bath: &TlsEffectiveBath) -> DriftMatrix {
    GaussianModel::from_parts(
        &params.spectrum().omegas,
        &params.intrinsic_dampings(),
        &params.mode_occupations(),
        bath,
        coupling.clone(),
    )
    .drift_at(t)
}

pub fn build_diffusion(params: &SystemParams, bath: &TlsEffectiveBath) -> DiffusionMatrix {
    let occ = params.mode_occupations();
    let gamma = params.intrinsic_dampings();
    let d = (0..occ.len())
        .flat_map(|k| {
            let dk = gamma[k] * (occ[k] + 0.5) + bath.induced_damping[k] * (bath.induced_occupancy[k] + 0.5);
            [dk, dk]
        })
        .collect();
    DiffusionMatrix { d }
}

/// How [`integrate_lyapunov_with`] advances between samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Propagation {
    /// Fixed-step RK4 over the whole interval.
    Direct,
    /// RK4 over one drive period to obtain `V ↦ ΦVΦᵀ + Q`, then iterate the
    /// map; falls back to `Direct` for aperiodic drives.
    #[default]
    PeriodMap,
}

#[derive(Debug, Clone, Copy)]
pub struct LyapunovOptions {
    /// Step; defaults to [`GaussianModel::max_step`].
    pub dt: Option<f64>,
    pub propagation: Propagation,
    /// Base frequency used to detect drive periodicity (normally δ_FSR).
    pub base_frequency: Option<f64>,
    /// Abort when a sample violates `ν_min ≥ 1/2 − PHYSICALITY_TOL`.
    pub check_physicality: bool,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        LyapunovOptions { dt: None, propagation: Propagation::PeriodMap, base_frequency: None, check_physicality: true }
    }
}

/// `dV/dt = ĀV + VĀᵀ + D` in place, `a` supplied by the caller.
fn lyapunov_rhs(a: &DMatrix<f64>, d: &[f64], v: &DMatrix<f64>, out: &mut DMatrix<f64>) {
    let av = a * v;
    out.copy_from(&av);
    *out += av.transpose();
    for (i, di) in d.iter().enumerate() {
        out[(i, i)] += di;
    }
}

/// One classical RK4 step of the Lyapunov equation.
fn lyapunov_step(model: &GaussianModel, t: f64, v: &mut DMatrix<f64>, h: f64, with_noise: bool) {
    let zero: Vec<f64>;
    let d: &[f64] = if with_noise {
        &model.diffusion.d
    } else {
        zero = vec![0.0; model.diffusion.d.len()];
        &zero
    };
    let n = v.nrows();
    let a1 = model.drift_at(t).a;
    let a2 = model.drift_at(t + 0.5 * h).a;
    let a4 = model.drift_at(t + h).a;
    let mut k1 = DMatrix::zeros(n, n);
    let mut k2 = DMatrix::zeros(n, n);
    let mut k3 = DMatrix::zeros(n, n);
    let mut k4 = DMatrix::zeros(n, n);
    lyapunov_rhs(&a1, d, v, &mut k1);
    lyapunov_rhs(&a2, d, &(&*v + &k1 * (0.5 * h)), &mut k2);
    lyapunov_rhs(&a2, d, &(&*v + &k2 * (0.5 * h)), &mut k3);
    lyapunov_rhs(&a4, d, &(&*v + &k3 * h), &mut k4);
    *v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
}

/// RK4 on `Φ̇ = ĀΦ`.
fn propagator_step(model: &GaussianModel, t: f64, phi: &mut DMatrix<f64>, h: f64) {
    let a1 = model.drift_at(t).a;
    let a2 = model.drift_at(t + 0.5 * h).a;
    let a4 = model.drift_at(t + h).a;
    let k1 = &a1 * &*phi;
    let k2 = &a2 * (&*phi + &k1 * (0.5 * h));
    let k3 = &a2 * (&*phi + &k2 * (0.5 * h));
    let k4 = &a4 * (&*phi + &k3 * h);
    *phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
}

fn advance_direct(model: &GaussianModel, v: &mut DMatrix<f64>, t0: f64, t1: f64, dt: f64) {
    let span = t1 - t0;
    if span <= 0.0 {
        return;
    }
    let steps = (span / dt - 1e-9).ceil().max(1.0) as u64;
    let h = span / steps as f64;
    for s in 0..steps {
        lyapunov_step(model, t0 + s as f64 * h, v, h, true);
    }
}

/// One-period affine map `V ↦ ΦVΦᵀ + Q` of a periodic model.
///
/// RK4 on `Φ̇ = ĀΦ` loses amplitude like `(ωh)⁶` per step, and unlike the
/// Lyapunov form that loss is not balanced by the noise term, so it shows up
/// as sub-vacuum squeezing after many periods. The map is therefore built
/// with a step [`PeriodMap::REFINE`] times finer than the one requested.
#[derive(Debug, Clone)]
pub struct PeriodMap {
    pub period: f64,
    pub phi: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

impl PeriodMap {
    pub const REFINE: f64 = 8.0;

    pub fn new(model: &GaussianModel, period: f64, dt: f64) -> Self {
        let n = 2 * model.n_modes();
        let steps = (Self::REFINE * period / dt - 1e-9).ceil().max(1.0) as u64;
        let h = period / steps as f64;
        let mut phi = DMatrix::identity(n, n);
        let mut q = DMatrix::zeros(n, n);
        for s in 0..steps {
            let t = s as f64 * h;
            propagator_step(model, t, &mut phi, h);
            lyapunov_step(model, t, &mut q, h, true);
        }
        PeriodMap { period, phi, q }
    }

    pub fn apply(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let out = &self.phi * v * self.phi.transpose() + &self.q;
        (&out + out.transpose()) * 0.5
    }
}

fn check_sample(t: f64, v: &DMatrix<f64>, check: bool) -> Result<CovarianceMatrix> {
    let cm = CovarianceMatrix { v: (v + v.transpose()) * 0.5 };
    if !cm.v.iter().all(|x| x.is_finite()) {
        return Err(Error::Unphysical { time: t, min_nu: f64::NAN });
    }
    if check {
        let nu = cm.min_symplectic_eigenvalue().map_err(|_| Error::Unphysical { time: t, min_nu: f64::NAN })?;
        if nu < 0.5 - PHYSICALITY_TOL {
            return Err(Error::Unphysical { time: t, min_nu: nu });
        }
    }
    Ok(cm)
}

/// Propagates `v0` from t = 0 and calls `on_sample` at each sorted sample
/// time.
pub fn integrate_lyapunov_with<S>(
    v0: &CovarianceMatrix,
    model: &GaussianModel,
    sample_times: &[f64],
    opts: &LyapunovOptions,
    mut on_sample: S,
) -> Result<()>
where
    S: FnMut(f64, &CovarianceMatrix) -> Result<()>,
{
    if v0.n_modes() != model.n_modes() {
        return Err(Error::InvalidParams("initial CM size does not match the model".into()));
    }
    let limit = model.max_step();
    let dt = opts.dt.unwrap_or(limit);
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::StepSize { dt, limit });
    }
    if sample_times.windows(2).any(|w| w[1] < w[0]) || sample_times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidParams("sample times must be sorted and non-negative".into()));
    }
    let period = match opts.propagation {
        Propagation::Direct => None,
        Propagation::PeriodMap => opts.base_frequency.and_then(|b| model.drive_period(b)),
    };
    let mut v = v0.v.clone();
    let mut t = 0.0;
    match period {
        None => {
            for &ts in sample_times {
                advance_direct(model, &mut v, t, ts, dt);
                t = ts;
                on_sample(t, &check_sample(t, &v, opts.check_physicality)?)?;
            }
        }
        Some(period) => {
            let map = PeriodMap::new(model, period, dt);
            // `v` lives at a multiple `n·period`; samples in between are
            // reached by direct integration from there.
            let mut n_done: u64 = 0;
            for &ts in sample_times {
                let n_target = ((ts / period) * (1.0 + 1e-12)).floor() as u64;
                while n_done < n_target {
                    v = map.apply(&v);
                    n_done += 1;
                }
                let base = n_done as f64 * period;
                let rem = ts - base;
                let sample = if rem > 1e-12 * period {
                    let mut w = v.clone();
                    advance_direct(model, &mut w, 0.0, rem, dt);
                    w
                } else {
                    v.clone()
                };
                t = ts;
                on_sample(t, &check_sample(t, &sample, opts.check_physicality)?)?;
            }
        }
    }
    let _ = t;
    Ok(())
}

/// Fixed-step RK4 trajectory sampled at `sample_times`.
pub fn integrate_lyapunov(
    v0: &CovarianceMatrix,
    model: &GaussianModel,
    sample_times: &[f64],
    dt: f64,
) -> Result<Vec<(f64, CovarianceMatrix)>> {
    let opts = LyapunovOptions { dt: Some(dt), propagation: Propagation::Direct, ..Default::default() };
    let mut out = Vec::with_capacity(sample_times.len());
    integrate_lyapunov_with(v0, model, sample_times, &opts, |t, cm| {
        out.push((t, cm.clone()));
        Ok(())
    })?;
    Ok(out)
}

/// Steady state of a static drift: solves `ĀV + VĀᵀ + D = 0`.
pub fn steady_state(drift: &DriftMatrix, diffusion: &DiffusionMatrix) -> Result<CovarianceMatrix> {
    let n = drift.a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let big = drift.a.kronecker(&eye) + eye.kronecker(&drift.a);
    let mut rhs = nalgebra::DVector::zeros(n * n);
    for i in 0..n {
        rhs[i * n + i] = -diffusion.d[i];
    }
    let sol = big.lu().solve(&rhs).ok_or(Error::NotPositiveDefinite)?;
    // Kronecker layout: vec index i*n + j ↔ V[(i, j)]
    let v = DMatrix::from_fn(n, n, |i, j| sol[i * n + j]);
    CovarianceMatrix::new((&v + v.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn single_mode(omega: f64, gamma: f64, nbar: f64, gt: f64, nt: f64) -> GaussianModel {
        let bath = TlsEffectiveBath { induced_damping: vec![gt], induced_occupancy: vec![nt] };
        let coupling = CouplingMatrix::from_parts(&[omega], &[0.0], 1.0, 0.0, 0.0, vec![]);
        GaussianModel::from_parts(&[omega], &[gamma], &[nbar], &bath, coupling)
    }

    #[test]
    fn symplectic_spectra() {
        let vac = symplectic_eigenvalues(&CovarianceMatrix::vacuum(3)).unwrap();
        assert!(vac.iter().all(|&n| (n - 0.5).abs() < 1e-12));
        let th = symplectic_eigenvalues(&CovarianceMatrix::thermal(&[1.0])).unwrap();
        assert_relative_eq!(th[0], 1.5, epsilon = 1e-12);
        let tmsv = symplectic_eigenvalues(&CovarianceMatrix::two_mode_squeezed(1.0)).unwrap();
        assert!(tmsv.iter().all(|&n| (n - 0.5).abs() < 1e-9), "{tmsv:?}");
    }

    #[test]
    fn tmsv_partial_transpose() {
        let pt = partial_transpose_cm(&CovarianceMatrix::two_mode_squeezed(1.0), &[1]);
        let nu = symplectic_eigenvalues(&pt).unwrap();
        assert_relative_eq!(nu[0], (-2.0f64).exp() / 2.0, epsilon = 1e-10);
        let twice = partial_transpose_cm(&pt, &[1]);
        assert_eq!(twice, CovarianceMatrix::two_mode_squeezed(1.0));
        let prod = CovarianceMatrix::thermal(&[0.3, 1.2]);
        assert!(partial_transpose_cm(&prod, &[0]).is_physical(1e-12));
    }

    #[test]
    fn entropy_values() {
        assert!(gaussian_entropy(&CovarianceMatrix::vacuum(2)).unwrap().abs() < 1e-12);
        assert_relative_eq!(
            gaussian_entropy(&CovarianceMatrix::thermal(&[1.0])).unwrap(),
            2.0 * 2f64.ln(),
            epsilon = 1e-12
        );
        let a = CovarianceMatrix::thermal(&[0.7]);
        let b = CovarianceMatrix::two_mode_squeezed(0.4).transformed(&DMatrix::identity(4, 4));
        let sum = gaussian_entropy(&a).unwrap() + gaussian_entropy(&b).unwrap();
        assert_relative_eq!(gaussian_entropy(&a.direct_sum(&b)).unwrap(), sum, epsilon = 1e-10);
    }

    #[test]
    fn uncoupled_drift_eigenvalues() {
        let model = single_mode(2.0, 0.3, 0.0, 0.1, 0.0);
        let mut ev = model.drift_at(0.4).eigenvalues();
        ev.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert_relative_eq!(ev[0].re, -0.2, epsilon = 1e-12);
        assert_relative_eq!(ev[0].im, -2.0, epsilon = 1e-12);
        assert_relative_eq!(ev[1].im, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn drift_quadratic_in_rabi() {
        let p = SystemParams::paper_defaults(3).with_uniform_coupling(0.5 * crate::params::hz_to_angular(20e6));
        let bath = TlsEffectiveBath::none(3);
        let a1 = build_drift(0.37, &p, &CouplingMatrix::new(&p), &bath).a;
        let mut p2 = p.clone();
        p2.rabi_amplitude *= 2.0;
        let a2 = build_drift(0.37, &p2, &CouplingMatrix::new(&p2), &bath).a;
        let a0 = GaussianModel::from_parts(
            &p.spectrum().omegas,
            &p.intrinsic_dampings(),
            &p.mode_occupations(),
            &bath,
            CouplingMatrix::from_parts(&p.spectrum().omegas, &[0.0; 3], 1.0, 0.0, 0.0, vec![]),
        )
        .drift_at(0.0)
        .a;
        let g1 = &a1 - &a0;
        let g2 = &a2 - &a0;
        assert!((g2 - g1 * 4.0).amax() < 1e-9 * a1.amax());
    }

    #[test]
    fn constant_without_drift_or_noise() {
        let bath = TlsEffectiveBath::none(1);
        let coupling = CouplingMatrix::from_parts(&[0.0], &[0.0], 1.0, 0.0, 0.0, vec![]);
        let model = GaussianModel::from_parts(&[0.0], &[0.0], &[0.0], &bath, coupling);
        let v0 = CovarianceMatrix::two_mode_squeezed(0.3).reduced(&[0]).unwrap();
        let traj = integrate_lyapunov(&v0, &model, &[1.0, 5.0], 0.01).unwrap();
        assert!((traj[1].1.matrix() - v0.matrix()).amax() < 1e-14);
    }

    #[test]
    fn ornstein_uhlenbeck_steady_state() {
        let (gamma, nbar, gt, nt) = (0.05, 2.0, 0.1, 0.4);
        let model = single_mode(1.0, gamma, nbar, gt, nt);
        let kappa = gamma + gt;
        let n_eff = (gamma * nbar + gt * nt) / kappa;
        let t_end = 20.0 / kappa;
        let traj = integrate_lyapunov(&CovarianceMatrix::vacuum(1), &model, &[t_end], model.max_step()).unwrap();
        let v = traj[0].1.matrix();
        for i in 0..2 {
            assert_relative_eq!(v[(i, i)], n_eff + 0.5, max_relative = 1e-6);
        }
        assert!(v[(0, 1)].abs() < 1e-6);
        let ss = steady_state(&model.drift_at(0.0), &model.diffusion).unwrap();
        assert_relative_eq!(ss.matrix()[(0, 0)], n_eff + 0.5, max_relative = 1e-12);
    }

    #[test]
    fn rk4_fourth_order() {
        let model = single_mode(1.0, 0.2, 0.5, 0.0, 0.0);
        let r: f64 = 0.6;
        let v0 = CovarianceMatrix::new(DMatrix::from_row_slice(2, 2, &[(-2.0 * r).exp() / 2.0, 0.0, 0.0, (2.0 * r).exp() / 2.0])).unwrap();
        let t: f64 = 3.0;
        let (c, s) = (t.cos(), t.sin());
        let rot = DMatrix::from_row_slice(2, 2, &[c, s, -s, c]);
        let vss = DMatrix::identity(2, 2) * 1.0;
        let exact = (&rot * (v0.matrix() - &vss) * rot.transpose()) * (-0.2 * t).exp() + &vss;
        let err = |dt: f64| {
            let traj = integrate_lyapunov(&v0, &model, &[t], dt).unwrap();
            (traj[0].1.matrix() - &exact).amax()
        };
        let (e1, e2) = (err(0.1), err(0.05));
        assert!(e1 / e2 >= 8.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn step_size_rejected() {
        let model = single_mode(10.0, 0.1, 0.0, 0.0, 0.0);
        let err = integrate_lyapunov(&CovarianceMatrix::vacuum(1), &model, &[1.0], 0.1).unwrap_err();
        assert!(matches!(err, Error::StepSize { .. }));
    }

    fn triangle_model(g0_over_gamma: f64) -> (SystemParams, GaussianModel) {
        let gamma = crate::params::hz_to_angular(20e6);
        let p = SystemParams::paper_defaults(3).with_uniform_coupling(g0_over_gamma * gamma);
        let m = GaussianModel::new(&p).unwrap();
        (p, m)
    }

    #[test]
    fn period_map_matches_direct() {
        let (p, model) = triangle_model(0.5);
        let tau = p.tau_fsr();
        let times: Vec<f64> = (1..=6).map(|i| i as f64 * 0.75 * tau).collect();
        let dt = model.max_step();
        let vac = CovarianceMatrix::vacuum(3);
        let direct = integrate_lyapunov(&vac, &model, &times, dt).unwrap();
        let fine = integrate_lyapunov(&vac, &model, &times, dt / 4.0).unwrap();
        let opts = LyapunovOptions { base_frequency: Some(p.fsr), ..Default::default() };
        let mut mapped = Vec::new();
        integrate_lyapunov_with(&vac, &model, &times, &opts, |t, cm| {
            mapped.push((t, cm.clone()));
            Ok(())
        })
        .unwrap();
        for i in 0..times.len() {
            let reference = fine[i].1.matrix();
            let scale = reference.amax();
            let e_direct = (direct[i].1.matrix() - reference).amax() / scale;
            let e_map = (mapped[i].1.matrix() - reference).amax() / scale;
            assert!(e_direct < 1e-5 && e_map < 1e-5, "{e_direct:e} {e_map:e}");
        }
    }

    #[test]
    fn uncoupled_modes_thermalize_independently() {
        let omegas = [1.0, 2.0, 3.0];
        let bath = TlsEffectiveBath::none(3);
        let coupling = CouplingMatrix::from_parts(&omegas, &[0.0; 3], 1.0, 0.0, 1.0, vec![1.0, 2.0]);
        let model = GaussianModel::from_parts(&omegas, &[0.2, 0.3, 0.4], &[0.5, 1.0, 2.0], &bath, coupling);
        let traj = integrate_lyapunov(&CovarianceMatrix::vacuum(3), &model, &[150.0], model.max_step()).unwrap();
        let v = traj[0].1.matrix();
        for k in 0..3 {
            for l in 0..3 {
                if k != l {
                    for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        assert!(v[(2 * k + a, 2 * l + b)].abs() < 1e-10);
                    }
                }
            }
        }
        assert_relative_eq!(v[(4, 4)], 2.5, max_relative = 1e-8);
    }

    #[test]
    fn triangle_trajectory_physical() {
        let (p, model) = triangle_model(0.5);
        let tau = p.tau_fsr();
        let times: Vec<f64> = (0..=40).map(|i| i as f64 * 5.0 * tau).collect();
        let opts = LyapunovOptions { base_frequency: Some(p.fsr), ..Default::default() };
        integrate_lyapunov_with(&CovarianceMatrix::vacuum(3), &model, &times, &opts, |_, cm| {
            assert!(cm.min_symplectic_eigenvalue().unwrap() >= 0.5 - 1e-6);
            assert!(cm.purity_determinant() >= 1.0 - 1e-9);
            Ok(())
        })
        .unwrap();
    }
}
