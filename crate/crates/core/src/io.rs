//! Output formats: commented CSV with a parameter header, covariance
//! snapshots (CSV and a compact little-endian binary) and density-matrix
//! dumps.
//!
//! Binary covariance file:
//!
//! ```text
//! b"VBCM" | u32 version (1) | u32 n_modes | u64 n_snapshots
//! per snapshot: f64 time | M(2M+1) f64 upper triangle, row-major
//! ```
//!
//! Density-matrix dump:
//!
//! ```text
//! b"VBRH" | u32 version (1) | u32 tls flag (0/1) | u32 n_dims | n_dims × u32 dims
//! D² × (f64 re, f64 im), row-major, D = product of dims
//! ```

use std::fmt::Write as _;
use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, HilbertLayout};
use crate::gaussian::CovarianceMatrix;
use crate::params::SystemParams;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const CM_MAGIC: &[u8; 4] = b"VBCM";
const RHO_MAGIC: &[u8; 4] = b"VBRH";
const FORMAT_VERSION: u32 = 1;

/// Comment block (`# ` lines) naming the code version, the scenario and the
/// resolved parameters in SI units (rad/s, K).
pub fn header_block(scenario: &str, params: &SystemParams, extra: &[(&str, String)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# vibent {VERSION}");
    let _ = writeln!(s, "# scenario: {scenario}");
    let _ = writeln!(s, "# units: rad/s, K");
    let body = toml::to_string(params).unwrap_or_default();
    for line in body.lines() {
        let _ = writeln!(s, "# {line}");
    }
    for (k, v) in extra {
        let _ = writeln!(s, "# {k} = {v}");
    }
    s
}

/// Formats a float so that identical values always print identically and
/// round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == 0.0 {
        "0".into()
    } else {
        format!("{x:e}")
    }
}

/// A CSV table held in memory, written in one go.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Table { columns: columns.iter().map(|c| c.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn push_f64(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&x| fmt_f64(x)).collect());
    }

    pub fn to_csv(&self, header: &str) -> String {
        let mut s = String::from(header);
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    /// Parses CSV text written by [`Table::to_csv`], skipping `#` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
        let head = lines.next().ok_or_else(|| Error::Config("empty CSV".into()))?;
        let mut t = Table::new(&head.split(',').collect::<Vec<_>>());
        for l in lines {
            let row: Vec<String> = l.split(',').map(str::to_string).collect();
            if row.len() != t.columns.len() {
                return Err(Error::Config(format!("ragged CSV row: {l}")));
            }
            t.rows.push(row);
        }
        Ok(t)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn f64_column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.column(name).ok_or_else(|| Error::Config(format!("no column {name}")))?;
        self.rows
            .iter()
            .map(|r| r[i].parse::<f64>().map_err(|e| Error::Config(format!("{name}: {e}"))))
            .collect()
    }
}

/// Square matrix as CSV with a leading row-label column.
pub fn matrix_table(n: usize, data: &[f64]) -> Table {
    let mut cols = vec!["mode".to_string()];
    cols.extend((1..=n).map(|k| k.to_string()));
    let mut t = Table::new(&cols);
    for i in 0..n {
        let mut row = vec![(i + 1).to_string()];
        row.extend(data[i * n..(i + 1) * n].iter().map(|&x| fmt_f64(x)));
        t.push(row);
    }
    t
}

/// `time, v_0_0, v_0_1, …` with the upper triangle of V in row-major order.
pub fn snapshots_table(snapshots: &[(f64, CovarianceMatrix)]) -> Table {
    let n = snapshots.first().map(|s| 2 * s.1.n_modes()).unwrap_or(0);
    let mut cols = vec!["time".to_string()];
    for i in 0..n {
        for j in i..n {
            cols.push(format!("v_{i}_{j}"));
        }
    }
    let mut t = Table::new(&cols);
    for (time, cm) in snapshots {
        let mut row = vec![fmt_f64(*time)];
        row.extend(cm.upper_triangle().iter().map(|&x| fmt_f64(x)));
        t.push(row);
    }
    t
}

pub fn write_snapshots_binary<W: Write>(mut w: W, snapshots: &[(f64, CovarianceMatrix)]) -> Result<()> {
    let m = snapshots.first().map(|s| s.1.n_modes()).unwrap_or(0);
    w.write_all(CM_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(m as u32).to_le_bytes())?;
    w.write_all(&(snapshots.len() as u64).to_le_bytes())?;
    for (t, cm) in snapshots {
        if cm.n_modes() != m {
            return Err(Error::InvalidParams("snapshots of different sizes".into()));
        }
        w.write_all(&t.to_le_bytes())?;
        for x in cm.upper_triangle() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn expect_magic<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<()> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    if &b != magic {
        return Err(Error::Config(format!("bad magic {:?}", String::from_utf8_lossy(&b))));
    }
    let v = read_u32(r)?;
    if v != FORMAT_VERSION {
        return Err(Error::Config(format!("unsupported format version {v}")));
    }
    Ok(())
}

pub fn read_snapshots_binary<R: Read>(mut r: R) -> Result<Vec<(f64, CovarianceMatrix)>> {
    expect_magic(&mut r, CM_MAGIC)?;
    let m = read_u32(&mut r)? as usize;
    let count = read_u64(&mut r)?;
    let len = m * (2 * m + 1);
    let mut out = Vec::new();
    for _ in 0..count {
        let t = read_f64(&mut r)?;
        let data = (0..len).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
        out.push((t, CovarianceMatrix::from_upper_triangle(m, &data)?));
    }
    Ok(out)
}

pub fn write_density_matrix<W: Write>(mut w: W, rho: &DensityMatrix) -> Result<()> {
    let layout = rho.layout();
    w.write_all(RHO_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(layout.has_tls() as u32).to_le_bytes())?;
    w.write_all(&(layout.dims().len() as u32).to_le_bytes())?;
    for &d in layout.dims() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for c in rho.data() {
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_density_matrix<R: Read>(mut r: R) -> Result<DensityMatrix> {
    expect_magic(&mut r, RHO_MAGIC)?;
    let tls = read_u32(&mut r)? != 0;
    let n = read_u32(&mut r)? as usize;
    let dims = (0..n).map(|_| read_u32(&mut r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let layout = if tls {
        HilbertLayout::with_tls(&dims[1..])?
    } else {
        HilbertLayout::modes(&dims)?
    };
    let d = layout.dim();
    let mut data = Vec::with_capacity(d * d);
    for _ in 0..d * d {
        let re = read_f64(&mut r)?;
        let im = read_f64(&mut r)?;
        data.push(Complex64::new(re, im));
    }
    DensityMatrix::new(layout, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let mut t = Table::new(&["a", "b"]);
        t.push_f64(&[1.5, -2e-300]);
        t.push_f64(&[0.0, f64::NAN]);
        let text = t.to_csv("# hello\n");
        let back = Table::parse(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.f64_column("a").unwrap(), vec![1.5, 0.0]);
        assert_eq!(back.f64_column("b").unwrap()[0], -2e-300);
    }

    #[test]
    fn float_formatting_round_trips() {
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, -1e-17, 123456789.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn header_lists_parameters() {
        let h = header_block("test", &SystemParams::paper_defaults(2), &[("seed", "7".into())]);
        assert!(h.lines().all(|l| l.starts_with('#')));
        assert!(h.contains("qubit_decay"));
        assert!(h.contains(VERSION));
        assert!(h.contains("# seed = 7"));
    }

    #[test]
    fn binary_snapshots_round_trip() {
        let snaps = vec![
            (0.0, CovarianceMatrix::vacuum(2)),
            (1.5, CovarianceMatrix::two_mode_squeezed(0.4)),
        ];
        let mut buf = Vec::new();
        write_snapshots_binary(&mut buf, &snaps).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 4 + 8 + 2 * 8 * (1 + 10));
        let back = read_snapshots_binary(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].0, 1.5);
        assert_eq!(back[1].1.matrix(), snaps[1].1.matrix());
        assert!(read_snapshots_binary(&b"XXXX"[..]).is_err());
    }

    #[test]
    fn snapshot_csv_columns() {
        let t = snapshots_table(&[(0.0, CovarianceMatrix::vacuum(1))]);
        assert_eq!(t.columns, vec!["time", "v_0_0", "v_0_1", "v_1_1"]);
        assert_eq!(t.rows[0], vec!["0", "5e-1", "0", "5e-1"]);
    }

    #[test]
    fn density_dump_round_trip() {
        let layout = HilbertLayout::with_tls(&[3]).unwrap();
        let rho = DensityMatrix::maximally_mixed(layout);
        let mut buf = Vec::new();
        write_density_matrix(&mut buf, &rho).unwrap();
        let back = read_density_matrix(&buf[..]).unwrap();
        assert_eq!(back.layout().dims(), rho.layout().dims());
        assert_eq!(back.data(), rho.data());
    }
}
