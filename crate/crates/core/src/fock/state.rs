use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::operators::{build_operators, HilbertLayout, Operator};
use crate::error::{Error, Result};
use crate::gaussian::CovarianceMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Density matrix stored row-major over a [`HilbertLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    layout: HilbertLayout,
    data: Vec<Complex64>,
}

/// Tolerances checked by [`DensityMatrix::validate`].
#[derive(Debug, Clone, Copy)]
pub struct Validity {
    pub hermiticity: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

impl Default for Validity {
    fn default() -> Self {
        Validity { hermiticity: 1e-10, trace: 1e-8, min_eigenvalue: -1e-8 }
    }
}

impl DensityMatrix {
    pub fn new(layout: HilbertLayout, data: Vec<Complex64>) -> Result<Self> {
        let n = layout.dim();
        if data.len() != n * n {
            return Err(Error::LayoutMismatch(format!("expected {} entries, got {}", n * n, data.len())));
        }
        Ok(DensityMatrix { layout, data })
    }

    /// `|ψ⟩⟨ψ|` for a normalised `psi`.
    pub fn pure(layout: HilbertLayout, psi: &[Complex64]) -> Result<Self> {
        let n = layout.dim();
        if psi.len() != n {
            return Err(Error::LayoutMismatch(format!("state vector has {} entries, layout {}", psi.len(), n)));
        }
        let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let mut data = vec![ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = psi[i] * psi[j].conj() / (norm * norm);
            }
        }
        Ok(DensityMatrix { layout, data })
    }

    /// TLS ground state (if present) ⊗ mode vacua.
    pub fn ground(layout: HilbertLayout) -> Self {
        let n = layout.dim();
        let idx = if layout.has_tls() { layout.stride(0) } else { 0 };
        let mut data = vec![ZERO; n * n];
        data[idx * n + idx] = Complex64::new(1.0, 0.0);
        DensityMatrix { layout, data }
    }

    pub fn maximally_mixed(layout: HilbertLayout) -> Self {
        let n = layout.dim();
        let mut data = vec![ZERO; n * n];
        for i in 0..n {
            data[i * n + i] = Complex64::new(1.0 / n as f64, 0.0);
        }
        DensityMatrix { layout, data }
    }

    /// Truncated thermal state of a single mode, renormalised.
    pub fn thermal_mode(dim: usize, nbar: f64) -> Result<Self> {
        let layout = HilbertLayout::modes(&[dim])?;
        let mut pops: Vec<f64> = if nbar == 0.0 {
            (0..dim).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect()
        } else {
            let q = nbar / (nbar + 1.0);
            (0..dim).map(|k| q.powi(k as i32)).collect()
        };
        let z: f64 = pops.iter().sum();
        pops.iter_mut().for_each(|p| *p /= z);
        let mut data = vec![ZERO; dim * dim];
        for (k, p) in pops.into_iter().enumerate() {
            data[k * dim + k] = Complex64::new(p, 0.0);
        }
        Ok(DensityMatrix { layout, data })
    }

    /// Tensor product, `self` as the slower factor.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<Self> {
        if other.layout.has_tls() {
            return Err(Error::LayoutMismatch("TLS factor must come first".into()));
        }
        let mut dims = self.layout.dims().to_vec();
        dims.extend_from_slice(other.layout.dims());
        let layout = if self.layout.has_tls() {
            HilbertLayout::with_tls(&dims[1..])?
        } else {
            HilbertLayout::modes(&dims)?
        };
        let (a, b) = (self.dim(), other.dim());
        let n = a * b;
        let mut data = vec![ZERO; n * n];
        for i1 in 0..a {
            for j1 in 0..a {
                let x = self.data[i1 * a + j1];
                if x == ZERO {
                    continue;
                }
                for i2 in 0..b {
                    for j2 in 0..b {
                        data[(i1 * b + i2) * n + j1 * b + j2] = x * other.data[i2 * b + j2];
                    }
                }
            }
        }
        Ok(DensityMatrix { layout, data })
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim() + j]
    }

    pub fn trace(&self) -> Complex64 {
        let n = self.dim();
        (0..n).map(|i| self.data[i * n + i]).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.data[i * n + j] - self.data[j * n + i].conj()).norm());
            }
        }
        worst
    }

    /// Replaces ρ by (ρ + ρ†)/2.
    pub fn symmetrize(&mut self) {
        let n = self.dim();
        for i in 0..n {
            self.data[i * n + i].im = 0.0;
            for j in i + 1..n {
                let m = 0.5 * (self.data[i * n + j] + self.data[j * n + i].conj());
                self.data[i * n + j] = m;
                self.data[j * n + i] = m.conj();
            }
        }
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.dim(), self.dim(), &self.data)
    }

    /// Ascending eigenvalues of the Hermitian part.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.to_matrix())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// `Tr(ρA)`.
    pub fn expect(&self, op: &Operator) -> Complex64 {
        op.trace_with(&self.data)
    }

    pub fn purity(&self) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (self.data[i * n + j] * self.data[j * n + i]).re;
            }
        }
        acc
    }

    /// `−Tr ρ ln ρ` in nats, dropping eigenvalues below 10⁻¹⁴.
    pub fn entropy(&self) -> f64 {
        self.eigenvalues().into_iter().filter(|&l| l > 1e-14).map(|l| -l * l.ln()).sum()
    }

    pub fn validate(&self, tol: &Validity) -> Result<()> {
        let herm = self.hermiticity_defect();
        if herm > tol.hermiticity {
            return Err(Error::NonHermitian { deviation: herm });
        }
        let tr = self.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > tol.trace {
            return Err(Error::InvalidParams(format!("density matrix trace {tr} differs from 1")));
        }
        let min = self.min_eigenvalue();
        if min < tol.min_eigenvalue {
            return Err(Error::InvalidParams(format!("density matrix has eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// Reduced state over the subsystems in `keep`, in that order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let dims = self.layout.dims();
        let ns = dims.len();
        if keep.is_empty() || keep.iter().any(|&s| s >= ns) {
            return Err(Error::InvalidPartition(format!("cannot keep {keep:?} of {ns} subsystems")));
        }
        let mut seen = vec![false; ns];
        for &s in keep {
            if std::mem::replace(&mut seen[s], true) {
                return Err(Error::InvalidPartition(format!("subsystem {s} listed twice")));
            }
        }
        let traced: Vec<usize> = (0..ns).filter(|s| !seen[*s]).collect();
        let layout = self.layout.reduced(keep)?;
        let dk = layout.dim();
        let dt: usize = traced.iter().map(|&s| dims[s]).product();
        let n = self.dim();
        // groups[c * dk + a] = full index with traced part c and kept part a
        let mut groups = vec![0usize; n];
        for i in 0..n {
            let mut a = 0;
            for &s in keep {
                a = a * dims[s] + self.layout.level(i, s);
            }
            let mut c = 0;
            for &s in &traced {
                c = c * dims[s] + self.layout.level(i, s);
            }
            groups[c * dk + a] = i;
        }
        let mut out = vec![ZERO; dk * dk];
        for c in 0..dt {
            let g = &groups[c * dk..(c + 1) * dk];
            for (a, &ia) in g.iter().enumerate() {
                let row = &self.data[ia * n..(ia + 1) * n];
                let dst = &mut out[a * dk..(a + 1) * dk];
                for (d, &ib) in dst.iter_mut().zip(g) {
                    *d += row[ib];
                }
            }
        }
        Ok(DensityMatrix { layout, data: out })
    }

    /// Mode-only reduced state (TLS traced out).
    pub fn modes_only(&self) -> Result<DensityMatrix> {
        if !self.layout.has_tls() {
            return Ok(self.clone());
        }
        let keep: Vec<usize> = (1..self.layout.dims().len()).collect();
        self.partial_trace(&keep)
    }

    /// Partial transpose over the subsystems in `party`.
    pub fn partial_transpose(&self, party: &[usize]) -> Vec<Complex64> {
        let n = self.dim();
        let mut out = vec![ZERO; n * n];
        let strides: Vec<(usize, usize)> =
            party.iter().map(|&s| (self.layout.stride(s), self.layout.dims()[s])).collect();
        for i in 0..n {
            for j in 0..n {
                let (mut ii, mut jj) = (i, j);
                for &(st, d) in &strides {
                    let a = (i / st) % d;
                    let b = (j / st) % d;
                    ii = ii - a * st + b * st;
                    jj = jj - b * st + a * st;
                }
                out[ii * n + jj] = self.data[i * n + j];
            }
        }
        out
    }
}

pub(crate) fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `V_ij = ½⟨{u_i − ⟨u_i⟩, u_j − ⟨u_j⟩}⟩` over a mode-only state.
///
/// Same-mode `⟨x²⟩`, `⟨p²⟩` use `⟨b†b⟩ + ½ ± Re⟨b²⟩`: the truncated product
/// `b b†` drops the top Fock level and would bias them low.
pub fn covariance_from_rho(rho: &DensityMatrix) -> Result<CovarianceMatrix> {
    if rho.layout().has_tls() {
        return Err(Error::LayoutMismatch("trace out the TLS before computing moments".into()));
    }
    let m = rho.layout().n_modes();
    let ops = build_operators(rho.layout());
    let quads: Vec<Operator> = (0..m).flat_map(|k| [ops.x(k), ops.p(k)]).collect();
    let tr = rho.trace().re;
    let means: Vec<f64> = quads.iter().map(|q| rho.expect(q).re / tr).collect();
    let n = 2 * m;
    let mut v = DMatrix::zeros(n, n);
    for k in 0..m {
        let nk = rho.expect(&ops.number(k)).re / tr;
        let b2 = rho.expect(&ops.b[k].mul(&ops.b[k])).re / tr;
        v[(2 * k, 2 * k)] = nk + 0.5 + b2 - means[2 * k] * means[2 * k];
        v[(2 * k + 1, 2 * k + 1)] = nk + 0.5 - b2 - means[2 * k + 1] * means[2 * k + 1];
    }
    for a in 0..n {
        for b in a + 1..n {
            let ab = rho.expect(&quads[a].mul(&quads[b]));
            let ba = rho.expect(&quads[b].mul(&quads[a]));
            let val = 0.5 * (ab + ba).re / tr - means[a] * means[b];
            v[(a, b)] = val;
            v[(b, a)] = val;
        }
    }
    CovarianceMatrix::new(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn moments_of_top_fock_level() {
        let layout = HilbertLayout::modes(&[4]).unwrap();
        let mut psi = vec![c(0.0); 4];
        psi[3] = c(1.0);
        let cm = covariance_from_rho(&DensityMatrix::pure(layout, &psi).unwrap()).unwrap();
        assert_relative_eq!(cm.matrix()[(0, 0)], 3.5, epsilon = 1e-12);
        assert_relative_eq!(cm.matrix()[(1, 1)], 3.5, epsilon = 1e-12);
    }

    #[test]
    fn partial_trace_of_product() {
        let a = DensityMatrix::thermal_mode(3, 0.4).unwrap();
        let b = DensityMatrix::thermal_mode(4, 1.1).unwrap();
        let ab = a.tensor(&b).unwrap();
        let ra = ab.partial_trace(&[0]).unwrap();
        let rb = ab.partial_trace(&[1]).unwrap();
        for (x, y) in ra.data().iter().zip(a.data()) {
            assert!((x - y).norm() < 1e-14);
        }
        for (x, y) in rb.data().iter().zip(b.data()) {
            assert!((x - y).norm() < 1e-14);
        }
        let swapped = ab.partial_trace(&[1, 0]).unwrap();
        assert_eq!(swapped.layout().dims(), &[4, 3]);
        assert_relative_eq!(swapped.get(5, 5).re, ab.get(9, 9).re, epsilon = 1e-15);
    }

    #[test]
    fn bell_reduced_state_is_mixed() {
        let layout = HilbertLayout::modes(&[3, 3]).unwrap();
        let mut psi = vec![c(0.0); 9];
        psi[0] = c(1.0);
        psi[4] = c(1.0);
        let rho = DensityMatrix::pure(layout, &psi).unwrap();
        let red = rho.partial_trace(&[0]).unwrap();
        assert_relative_eq!(red.get(0, 0).re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(red.get(1, 1).re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(red.entropy(), 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn covariance_examples() {
        let vac = DensityMatrix::ground(HilbertLayout::modes(&[4, 3]).unwrap());
        let v = covariance_from_rho(&vac).unwrap();
        assert!((v.matrix() - CovarianceMatrix::vacuum(2).matrix()).amax() < 1e-14);

        let layout = HilbertLayout::modes(&[4]).unwrap();
        let one = DensityMatrix::pure(layout, &[c(0.0), c(1.0), c(0.0), c(0.0)]).unwrap();
        let v = covariance_from_rho(&one).unwrap();
        assert_relative_eq!(v.matrix()[(0, 0)], 1.5, epsilon = 1e-14);
        assert_relative_eq!(v.matrix()[(1, 1)], 1.5, epsilon = 1e-14);

        let th = DensityMatrix::thermal_mode(60, 0.7).unwrap();
        let v = covariance_from_rho(&th).unwrap();
        assert_relative_eq!(v.matrix()[(0, 0)], 1.2, epsilon = 1e-9);
        assert!(v.matrix()[(0, 1)].abs() < 1e-14);
    }

    #[test]
    fn ground_state_and_validation() {
        let layout = HilbertLayout::with_tls(&[3, 2]).unwrap();
        let g = DensityMatrix::ground(layout.clone());
        assert_eq!(g.get(6, 6), c(1.0));
        g.validate(&Validity::default()).unwrap();
        let mut bad = g.clone();
        bad.data_mut()[1] = c(0.3);
        assert!(bad.validate(&Validity::default()).is_err());
        let red = g.partial_trace(&[0]).unwrap();
        assert!(red.layout().has_tls());
        assert_eq!(red.get(1, 1), c(1.0));
    }

    #[test]
    fn partial_transpose_involution() {
        let layout = HilbertLayout::modes(&[2, 3]).unwrap();
        let psi: Vec<Complex64> = (0..6).map(|k| Complex64::new(k as f64, 1.0 - k as f64)).collect();
        let rho = DensityMatrix::pure(layout.clone(), &psi).unwrap();
        let pt = DensityMatrix::new(layout, rho.partial_transpose(&[1])).unwrap();
        let back = pt.partial_transpose(&[1]);
        for (x, y) in back.iter().zip(rho.data()) {
            assert!((x - y).norm() < 1e-15);
        }
    }
}
