use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tensor-product layout `(TLS, mode 1, …, mode M)` or modes only.
/// The first factor varies slowest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertLayout {
    dims: Vec<usize>,
    tls: bool,
}

/// Default ceiling on the total dimension (a 2048² complex matrix is 64 MiB).
pub const DEFAULT_DIM_CEILING: usize = 2048;

impl HilbertLayout {
    /// TLS followed by the given Fock truncations.
    pub fn with_tls(mode_dims: &[usize]) -> Result<Self> {
        let mut dims = vec![2];
        dims.extend_from_slice(mode_dims);
        Self::build(dims, true, DEFAULT_DIM_CEILING)
    }

    pub fn modes(mode_dims: &[usize]) -> Result<Self> {
        Self::build(mode_dims.to_vec(), false, DEFAULT_DIM_CEILING)
    }

    pub fn with_ceiling(mut self, ceiling: usize) -> Result<Self> {
        self = Self::build(self.dims, self.tls, ceiling)?;
        Ok(self)
    }

    fn build(dims: Vec<usize>, tls: bool, ceiling: usize) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidParams("layout dimensions must be positive".into()));
        }
        let dim: usize = dims.iter().product();
        if dim > ceiling {
            return Err(Error::MemoryCeiling { dim, ceiling });
        }
        Ok(HilbertLayout { dims, tls })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn has_tls(&self) -> bool {
        self.tls
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn n_modes(&self) -> usize {
        self.dims.len() - usize::from(self.tls)
    }

    /// Subsystem index of mode `k` (0-based).
    pub fn mode_subsystem(&self, k: usize) -> usize {
        k + usize::from(self.tls)
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.dims[usize::from(self.tls)..]
    }

    /// Stride of subsystem `s` in the flat index.
    pub fn stride(&self, s: usize) -> usize {
        self.dims[s + 1..].iter().product()
    }

    /// Local level of subsystem `s` in flat index `i`.
    pub fn level(&self, i: usize, s: usize) -> usize {
        (i / self.stride(s)) % self.dims[s]
    }

    /// Layout over the kept subsystems (in the given order).
    pub fn reduced(&self, keep: &[usize]) -> Result<Self> {
        let dims = keep.iter().map(|&s| self.dims[s]).collect();
        let tls = self.tls && keep.first() == Some(&0);
        Self::build(dims, tls, usize::MAX)
    }
}

/// Sparse square operator stored as per-row `(column, value)` lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    n: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl Operator {
    pub fn zeros(n: usize) -> Self {
        Operator { n, rows: vec![Vec::new(); n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut op = Self::zeros(n);
        for i in 0..n {
            op.rows[i].push((i, Complex64::new(1.0, 0.0)));
        }
        op
    }

    pub fn from_dense(n: usize, data: &[Complex64]) -> Self {
        let mut op = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let v = data[i * n + j];
                if v != Complex64::new(0.0, 0.0) {
                    op.rows[i].push((j, v));
                }
            }
        }
        op
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[(usize, Complex64)] {
        &self.rows[i]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.rows[i]
            .iter()
            .filter(|(c, _)| *c == j)
            .map(|(_, v)| *v)
            .sum()
    }

    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut d = vec![Complex64::new(0.0, 0.0); self.n * self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                d[i * self.n + j] += v;
            }
        }
        d
    }

    fn compact(mut self) -> Self {
        for row in &mut self.rows {
            row.sort_by_key(|(c, _)| *c);
            let mut merged: Vec<(usize, Complex64)> = Vec::with_capacity(row.len());
            for &(c, v) in row.iter() {
                match merged.last_mut() {
                    Some((lc, lv)) if *lc == c => *lv += v,
                    _ => merged.push((c, v)),
                }
            }
            merged.retain(|(_, v)| v.norm() > 0.0);
            *row = merged;
        }
        self
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Operator {
            n: self.n,
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|&(c, v)| (c, v * s)).collect())
                .collect(),
        }
    }

    pub fn add(&self, other: &Operator) -> Self {
        assert_eq!(self.n, other.n);
        let mut rows = self.rows.clone();
        for (r, o) in rows.iter_mut().zip(&other.rows) {
            r.extend_from_slice(o);
        }
        Operator { n: self.n, rows }.compact()
    }

    pub fn sub(&self, other: &Operator) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &Operator) -> Self {
        assert_eq!(self.n, other.n);
        let mut rows = vec![Vec::new(); self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, a) in row {
                for &(j, b) in &other.rows[k] {
                    rows[i].push((j, a * b));
                }
            }
        }
        Operator { n: self.n, rows }.compact()
    }

    pub fn adjoint(&self) -> Self {
        let mut rows = vec![Vec::new(); self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                rows[j].push((i, v.conj()));
            }
        }
        Operator { n: self.n, rows }.compact()
    }

    pub fn commutator(&self, other: &Operator) -> Self {
        self.mul(other).sub(&other.mul(self))
    }

    /// Largest entry of `A − A†`.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.sub(&self.adjoint());
        d.rows.iter().flatten().map(|(_, v)| v.norm()).fold(0.0, f64::max)
    }

    /// `A · X` for a dense row-major `X`.
    pub fn mul_dense(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for (i, row) in self.rows.iter().enumerate() {
            let dst = &mut out[i * n..(i + 1) * n];
            for &(k, a) in row {
                for (d, s) in dst.iter_mut().zip(&x[k * n..(k + 1) * n]) {
                    *d += a * s;
                }
            }
        }
        out
    }

    /// `X · A` for a dense row-major `X`.
    pub fn dense_mul(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            let src = &x[i * n..(i + 1) * n];
            let dst = &mut out[i * n..(i + 1) * n];
            for (k, row) in self.rows.iter().enumerate() {
                let xik = src[k];
                if xik == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for &(j, a) in row {
                    dst[j] += xik * a;
                }
            }
        }
        out
    }

    /// `Tr(X A)` for dense row-major `X`.
    pub fn trace_with(&self, x: &[Complex64]) -> Complex64 {
        let n = self.n;
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                acc += x[j * n + i] * a;
            }
        }
        acc
    }

    /// Lifts a local `d×d` dense matrix acting on subsystem `s`.
    pub fn embed(layout: &HilbertLayout, s: usize, local: &[Complex64]) -> Self {
        let d = layout.dims()[s];
        assert_eq!(local.len(), d * d);
        let n = layout.dim();
        let stride = layout.stride(s);
        let mut op = Self::zeros(n);
        for i in 0..n {
            let a = (i / stride) % d;
            let base = i - a * stride;
            for b in 0..d {
                let v = local[a * d + b];
                if v != Complex64::new(0.0, 0.0) {
                    op.rows[i].push((base + b * stride, v));
                }
            }
        }
        op
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Truncated annihilation operator on `d` Fock levels.
pub fn annihilation(d: usize) -> Vec<Complex64> {
    let mut m = vec![c(0.0); d * d];
    for n in 1..d {
        m[(n - 1) * d + n] = c((n as f64).sqrt());
    }
    m
}

/// Qubit basis: index 0 = excited (σz = +1), index 1 = ground.
pub mod qubit {
    use super::*;

    pub fn sigma_z() -> Vec<Complex64> {
        vec![c(1.0), c(0.0), c(0.0), c(-1.0)]
    }

    pub fn sigma_x() -> Vec<Complex64> {
        vec![c(0.0), c(1.0), c(1.0), c(0.0)]
    }

    /// σ+ = |e⟩⟨g|.
    pub fn sigma_plus() -> Vec<Complex64> {
        vec![c(0.0), c(1.0), c(0.0), c(0.0)]
    }

    pub fn sigma_minus() -> Vec<Complex64> {
        vec![c(0.0), c(0.0), c(1.0), c(0.0)]
    }
}

#[derive(Debug, Clone)]
pub struct QubitOperators {
    pub sigma_x: Operator,
    pub sigma_z: Operator,
    pub sigma_plus: Operator,
    pub sigma_minus: Operator,
}

/// Full-space operators for a layout.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub qubit: Option<QubitOperators>,
    pub b: Vec<Operator>,
    pub b_dag: Vec<Operator>,
}

impl OperatorSet {
    /// `x_k = (b_k + b_k†)/√2`.
    pub fn x(&self, k: usize) -> Operator {
        self.b[k].add(&self.b_dag[k]).scale(c(std::f64::consts::FRAC_1_SQRT_2))
    }

    /// `p_k = −i(b_k − b_k†)/√2`.
    pub fn p(&self, k: usize) -> Operator {
        self.b[k]
            .sub(&self.b_dag[k])
            .scale(Complex64::new(0.0, -std::f64::consts::FRAC_1_SQRT_2))
    }

    pub fn number(&self, k: usize) -> Operator {
        self.b_dag[k].mul(&self.b[k])
    }
}

pub fn build_operators(layout: &HilbertLayout) -> OperatorSet {
    let qubit = layout.has_tls().then(|| QubitOperators {
        sigma_x: Operator::embed(layout, 0, &qubit::sigma_x()),
        sigma_z: Operator::embed(layout, 0, &qubit::sigma_z()),
        sigma_plus: Operator::embed(layout, 0, &qubit::sigma_plus()),
        sigma_minus: Operator::embed(layout, 0, &qubit::sigma_minus()),
    });
    let mut b = Vec::new();
    let mut b_dag = Vec::new();
    for k in 0..layout.n_modes() {
        let s = layout.mode_subsystem(k);
        let op = Operator::embed(layout, s, &annihilation(layout.dims()[s]));
        b_dag.push(op.adjoint());
        b.push(op);
    }
    OperatorSet { qubit, b, b_dag }
}
