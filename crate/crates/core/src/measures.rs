//! Entanglement, quantum Fisher information and non-Gaussianity on
//! covariance matrices and density matrices.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{build_operators, covariance_from_rho, DensityMatrix, Operator};
use crate::gaussian::{gaussian_entropy, partial_transpose_cm, symplectic_eigenvalues, CovarianceMatrix, PHYSICALITY_TOL};

/// Two disjoint mode sets; modes in neither are traced out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bipartition {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl Bipartition {
    pub fn new(a: Vec<usize>, b: Vec<usize>) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidPartition("both sides must be nonempty".into()));
        }
        if a.iter().any(|x| b.contains(x)) {
            return Err(Error::InvalidPartition(format!("{a:?} and {b:?} overlap")));
        }
        Ok(Bipartition { a, b })
    }

    /// Mode `i` against mode `j`.
    pub fn pair(i: usize, j: usize) -> Result<Self> {
        Self::new(vec![i], vec![j])
    }

    fn check(&self, n_modes: usize) -> Result<()> {
        let mut all: Vec<usize> = self.a.iter().chain(&self.b).copied().collect();
        all.sort_unstable();
        all.dedup();
        if all.len() != self.a.len() + self.b.len() || all.iter().any(|&k| k >= n_modes) || self.a.is_empty() || self.b.is_empty() {
            return Err(Error::InvalidPartition(format!("{self:?} invalid for {n_modes} modes")));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        let side = |s: &[usize]| s.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join(",");
        format!("{}|{}", side(&self.a), side(&self.b))
    }
}

/// Logarithmic negativity of a Gaussian state across `bip` (nats).
pub fn log_negativity_gaussian(cm: &CovarianceMatrix, bip: &Bipartition) -> Result<f64> {
    bip.check(cm.n_modes())?;
    let modes: Vec<usize> = bip.a.iter().chain(&bip.b).copied().collect();
    let reduced = cm.reduced(&modes)?;
    let nu = symplectic_eigenvalues(&reduced)?;
    if nu[0] < 0.5 - PHYSICALITY_TOL {
        return Err(Error::Unphysical { time: f64::NAN, min_nu: nu[0] });
    }
    let party: Vec<usize> = (0..bip.a.len()).collect();
    let pt = partial_transpose_cm(&reduced, &party);
    Ok(symplectic_eigenvalues(&pt)?
        .into_iter()
        .filter(|&n| 2.0 * n < 1.0)
        .map(|n| -(2.0 * n).ln())
        .fold(0.0, |a, b| a + b))
}

/// `ln ‖ρ^{T_A}‖₁` for a mode-only density matrix.
pub fn negativity_density(rho: &DensityMatrix, bip: &Bipartition) -> Result<f64> {
    if rho.layout().has_tls() {
        return Err(Error::LayoutMismatch("trace out the TLS before evaluating negativity".into()));
    }
    bip.check(rho.layout().n_modes())?;
    let keep: Vec<usize> = bip.a.iter().chain(&bip.b).copied().collect();
    let reduced = rho.partial_trace(&keep)?;
    let party: Vec<usize> = (0..bip.a.len()).collect();
    let pt = reduced.partial_transpose(&party);
    let n = reduced.dim();
    let m = DMatrix::from_row_slice(n, n, &pt);
    let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let trace_norm: f64 = SymmetricEigen::new(h).eigenvalues.iter().map(|l| l.abs()).sum();
    let tr = reduced.trace().re;
    Ok((trace_norm / tr).ln().max(0.0))
}

/// A state in either representation (mode-only for density matrices).
#[derive(Debug, Clone, Copy)]
pub enum StateRef<'a> {
    Gaussian(&'a CovarianceMatrix),
    Density(&'a DensityMatrix),
}

impl StateRef<'_> {
    fn n_modes(&self) -> usize {
        match self {
            StateRef::Gaussian(cm) => cm.n_modes(),
            StateRef::Density(rho) => rho.layout().n_modes(),
        }
    }

    fn method(&self) -> Method {
        match self {
            StateRef::Gaussian(_) => Method::GaussianCM,
            StateRef::Density(_) => Method::DensityMatrix,
        }
    }

    pub fn log_negativity(&self, bip: &Bipartition) -> Result<f64> {
        match self {
            StateRef::Gaussian(cm) => log_negativity_gaussian(cm, bip),
            StateRef::Density(rho) => negativity_density(rho, bip),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    GaussianCM,
    DensityMatrix,
}

/// Ordered disjoint parties; `focus = None` minimises over every focus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub parties: Vec<Vec<usize>>,
    pub focus: Option<usize>,
}

impl PartitionSpec {
    /// One party per listed mode.
    pub fn single_modes(modes: &[usize]) -> Self {
        PartitionSpec { parties: modes.iter().map(|&k| vec![k]).collect(), focus: None }
    }

    fn validate(&self, n_modes: usize) -> Result<()> {
        if self.parties.len() < 3 {
            return Err(Error::InvalidPartition("genuine multipartite entanglement needs at least 3 parties".into()));
        }
        if self.parties.len() > 16 {
            return Err(Error::InvalidPartition("at most 16 parties".into()));
        }
        let mut seen = vec![false; n_modes];
        for p in &self.parties {
            if p.is_empty() {
                return Err(Error::InvalidPartition("empty party".into()));
            }
            for &k in p {
                if k >= n_modes || std::mem::replace(&mut seen[k], true) {
                    return Err(Error::InvalidPartition(format!("mode {k} out of range or repeated")));
                }
            }
        }
        if let Some(f) = self.focus {
            if f >= self.parties.len() {
                return Err(Error::InvalidPartition(format!("focus {f} out of range")));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        self.parties
            .iter()
            .map(|p| p.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
            .join("|")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntanglementReport {
    pub value: f64,
    pub partition: PartitionSpec,
    pub method: Method,
    /// Focus party attaining the minimum.
    pub focus: usize,
    /// Residual for each focus considered (NaN where not evaluated).
    pub residuals: Vec<f64>,
    /// The minimum residual was negative and has been replaced by 0.
    pub floored: bool,
}

/// Contangle (squared log-negativity) of party `i` against the union of
/// the parties in `mask`, memoised.
struct Contangles<'a> {
    state: StateRef<'a>,
    parties: &'a [Vec<usize>],
    cache: HashMap<(usize, u32), f64>,
}

impl Contangles<'_> {
    fn get(&mut self, i: usize, mask: u32) -> Result<f64> {
        if let Some(&v) = self.cache.get(&(i, mask)) {
            return Ok(v);
        }
        let b: Vec<usize> = (0..self.parties.len())
            .filter(|j| mask & (1 << j) != 0)
            .flat_map(|j| self.parties[j].iter().copied())
            .collect();
        let e = self.state.log_negativity(&Bipartition::new(self.parties[i].clone(), b)?)?;
        self.cache.insert((i, mask), e * e);
        Ok(e * e)
    }

    /// R(i, S) = τ(i|S) − Σ_{∅≠T⊊S} R(i, T).
    fn residual(&mut self, i: usize, mask: u32, memo: &mut HashMap<u32, f64>) -> Result<f64> {
        if let Some(&r) = memo.get(&mask) {
            return Ok(r);
        }
        let mut r = self.get(i, mask)?;
        // proper nonempty submasks
        let mut sub = (mask - 1) & mask;
        while sub != 0 {
            r -= self.residual(i, sub, memo)?;
            sub = (sub - 1) & mask;
        }
        memo.insert(mask, r);
        Ok(r)
    }
}

/// Genuine multipartite entanglement via the recursive contangle residual,
/// minimised over focus parties and floored at 0.
pub fn genuine_multipartite(state: StateRef<'_>, spec: &PartitionSpec) -> Result<EntanglementReport> {
    spec.validate(state.n_modes())?;
    let np = spec.parties.len();
    let mut ct = Contangles { state, parties: &spec.parties, cache: HashMap::new() };
    let foci: Vec<usize> = match spec.focus {
        Some(f) => vec![f],
        None => (0..np).collect(),
    };
    let mut residuals = vec![f64::NAN; np];
    for &i in &foci {
        let others: u32 = (0..np as u32).filter(|&j| j as usize != i).map(|j| 1 << j).sum();
        let mut memo = HashMap::new();
        residuals[i] = ct.residual(i, others, &mut memo)?;
    }
    let (focus, min) = foci
        .iter()
        .map(|&i| (i, residuals[i]))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one focus");
    Ok(EntanglementReport {
        value: min.max(0.0),
        partition: spec.clone(),
        method: state.method(),
        focus,
        residuals,
        floored: min < 0.0,
    })
}

/// Eigen-cutoff on `λ_k + λ_l` in [`qfi`].
pub const QFI_CUTOFF: f64 = 1e-12;

/// `F_Q = 2 Σ |⟨k|O|l⟩|² (λ_k − λ_l)²/(λ_k + λ_l)`.
pub fn qfi(rho: &DensityMatrix, observable: &Operator) -> Result<f64> {
    let n = rho.dim();
    if observable.dim() != n {
        return Err(Error::LayoutMismatch(format!("observable is {}-dimensional, state {n}", observable.dim())));
    }
    let scale = observable.to_dense().iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
    let defect = observable.hermiticity_defect();
    if defect > 1e-10 * scale {
        return Err(Error::NonHermitian { deviation: defect });
    }
    let eig = SymmetricEigen::new({
        let m = rho.to_matrix();
        (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
    });
    let lambda: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let u = &eig.eigenvectors;
    let o = DMatrix::from_row_slice(n, n, &observable.to_dense());
    let o_eig = u.adjoint() * o * u;
    let mut f = 0.0;
    for k in 0..n {
        for l in 0..n {
            let s = lambda[k] + lambda[l];
            if s > QFI_CUTOFF {
                let d = lambda[k] - lambda[l];
                f += o_eig[(k, l)].norm_sqr() * d * d / s;
            }
        }
    }
    Ok(2.0 * f)
}

/// `X_M = Σ_k x_k` over every mode of a mode-only layout.
pub fn collective_quadrature(rho: &DensityMatrix) -> Result<Operator> {
    if rho.layout().has_tls() {
        return Err(Error::LayoutMismatch("collective quadrature is defined on the modes only".into()));
    }
    let ops = build_operators(rho.layout());
    let mut x = Operator::zeros(rho.dim());
    for k in 0..rho.layout().n_modes() {
        x = x.add(&ops.x(k));
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedQfi {
    /// `max_t F_Q[ρ(t), X_M]/M`.
    pub value: f64,
    pub time: f64,
    /// `F̄_Q` of the mode vacuum in this convention.
    pub vacuum_baseline: f64,
    /// The value exceeds `M`.
    pub exceeds_bound: bool,
}

/// Maximum of `F_Q[ρ_m(t), X_M]/M` over a mode-only trajectory.
pub fn normalized_qfi_max(trajectory: &[(f64, DensityMatrix)], m: usize) -> Result<NormalizedQfi> {
    if trajectory.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let values = trajectory
        .par_iter()
        .map(|(t, rho)| {
            let x = collective_quadrature(rho)?;
            Ok((*t, qfi(rho, &x)? / m as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let (time, value) = values.into_iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    Ok(NormalizedQfi { value, time, vacuum_baseline: 2.0, exceeds_bound: value > m as f64 })
}

/// `δ_NG = S(ρ_G) − S(ρ)` for a mode-only state.
pub fn non_gaussianity(rho: &DensityMatrix) -> Result<f64> {
    let cm = covariance_from_rho(rho)?;
    Ok(gaussian_entropy(&cm)? - rho.entropy())
}

/// Log-negativity across `bip` for each `(t, V)`.
pub fn log_negativity_gaussian_batch(snapshots: &[(f64, CovarianceMatrix)], bip: &Bipartition) -> Result<Vec<(f64, f64)>> {
    snapshots.par_iter().map(|(t, cm)| Ok((*t, log_negativity_gaussian(cm, bip)?))).collect()
}

pub fn negativity_density_batch(snapshots: &[(f64, DensityMatrix)], bip: &Bipartition) -> Result<Vec<(f64, f64)>> {
    snapshots.par_iter().map(|(t, rho)| Ok((*t, negativity_density(rho, bip)?))).collect()
}

pub fn genuine_multipartite_batch<'a, I>(snapshots: I, spec: &PartitionSpec) -> Result<Vec<(f64, EntanglementReport)>>
where
    I: IntoParallelIterator<Item = (f64, StateRef<'a>)>,
{
    snapshots.into_par_iter().map(|(t, s)| Ok((t, genuine_multipartite(s, spec)?))).collect()
}

pub fn non_gaussianity_batch(snapshots: &[(f64, DensityMatrix)]) -> Result<Vec<(f64, f64)>> {
    snapshots.par_iter().map(|(t, rho)| Ok((*t, non_gaussianity(rho)?))).collect()
}

/// Tidy row `(time, measure, partition, value)` as written by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureRow {
    pub time: f64,
    pub measure: String,
    pub partition: String,
    pub value: f64,
}

impl MeasureRow {
    pub fn negativity(time: f64, bip: &Bipartition, value: f64) -> Self {
        MeasureRow { time, measure: "log_negativity".into(), partition: bip.label(), value }
    }

    pub fn genuine(time: f64, report: &EntanglementReport) -> Self {
        MeasureRow { time, measure: "genuine".into(), partition: report.partition.label(), value: report.value }
    }
}
