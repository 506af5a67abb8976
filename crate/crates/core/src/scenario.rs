//! Numerical experiments as parameter sweeps producing CSV tables.
//!
//! Each [`ScenarioKind`] has documented defaults that a [`Config`] can
//! override. Sweep points run in parallel; a failing point is recorded in
//! [`Output::failures`] and the rest of the sweep continues.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::fock::{build_operators, evolve_with, DensityMatrix, EvolveOptions, HilbertLayout};
use crate::gaussian::{integrate_lyapunov_with, CovarianceMatrix, GaussianModel, LyapunovOptions};
use crate::io::{fmt_f64, header_block, matrix_table, snapshots_table, write_density_matrix, write_snapshots_binary, Table};
use crate::measures::{
    collective_quadrature, genuine_multipartite, log_negativity_gaussian, negativity_density, non_gaussianity, qfi,
    Bipartition, EntanglementReport, PartitionSpec, StateRef,
};
use crate::modulation::{adjacency_for, select_tones, CouplingMatrix};
use crate::params::{angular_to_hz, hz_to_angular, SystemParams};
use crate::tls::{effective_bath, fluctuation_spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    Triangle,
    Multimode,
    DepthScan,
    Compare,
    TlsSpectrum,
    Adjacency,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::Triangle,
        ScenarioKind::Multimode,
        ScenarioKind::DepthScan,
        ScenarioKind::Compare,
        ScenarioKind::TlsSpectrum,
        ScenarioKind::Adjacency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Triangle => "triangle",
            ScenarioKind::Multimode => "multimode",
            ScenarioKind::DepthScan => "depth-scan",
            ScenarioKind::Compare => "compare",
            ScenarioKind::TlsSpectrum => "tls-spectrum",
            ScenarioKind::Adjacency => "adjacency",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario {s}")))
    }
}

/// Parameters that can be swept. Rates are in units of the qubit decay Γ,
/// temperature in K.
pub const AXES: [&str; 4] = ["g0", "rabi_amplitude", "temperature", "qubit_dephasing"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub name: String,
    pub values: Vec<f64>,
}

impl SweepAxis {
    pub fn new(name: &str, values: Vec<f64>) -> Result<Self> {
        if !AXES.contains(&name) {
            return Err(Error::Config(format!("unknown sweep parameter {name}")));
        }
        if values.is_empty() {
            return Err(Error::Config(format!("sweep axis {name} is empty")));
        }
        Ok(SweepAxis { name: name.into(), values })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub t_end_tau: f64,
    pub samples: usize,
    /// Fock truncation per mode of the exact model.
    pub dims: Vec<usize>,
    pub tolerance: f64,
    /// Δ/Ω_0 kept fixed when Ω_0 is swept; `None` keeps Δ itself fixed.
    pub detuning_ratio: Option<f64>,
    pub region_rabi: f64,
    pub region_g0: f64,
    pub max_k: usize,
    /// Mode numbers the drive tones address (adjacency).
    pub targets: Vec<usize>,
    /// Frequency grid of the spectrum scenario, in Hz.
    pub omega_range: (f64, f64),
    pub points: usize,
    pub write_snapshots: bool,
    pub dump_states: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub params: SystemParams,
    pub sweep: Vec<SweepAxis>,
    pub run: RunSettings,
}

fn grid(start: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect()
}

impl Scenario {
    /// Defaults per scenario. `full_dims` selects the large truncation and
    /// the long simulated time for the exact-model scenarios.
    pub fn defaults(kind: ScenarioKind, full_dims: bool) -> Self {
        let mut run = RunSettings {
            t_end_tau: 1000.0,
            samples: 200,
            dims: if full_dims { vec![10, 9, 8] } else { vec![6, 5, 4] },
            tolerance: 1e-7,
            detuning_ratio: Some(5.0),
            region_rabi: 7.0,
            region_g0: 0.5,
            max_k: 100,
            targets: vec![1, 2, 3],
            omega_range: (0.0, 0.0),
            points: 241,
            write_snapshots: false,
            dump_states: false,
            seed: 0,
        };
        let axis = |n: &str, v: Vec<f64>| SweepAxis::new(n, v).expect("built-in axis");
        let (params, sweep) = match kind {
            ScenarioKind::Triangle => {
                if !full_dims {
                    run.t_end_tau = 100.0;
                }
                (
                    SystemParams::paper_defaults(3),
                    vec![
                        axis("g0", vec![0.1, 0.3, 0.5]),
                        axis("rabi_amplitude", vec![3.0, 5.0, 7.0]),
                        axis("temperature", vec![0.01, 0.1]),
                        axis("qubit_dephasing", vec![0.0, 0.05]),
                    ],
                )
            }
            ScenarioKind::Multimode => (SystemParams::paper_defaults(6), vec![axis("g0", grid(0.0, 0.1, 11))]),
            ScenarioKind::DepthScan => (
                SystemParams::paper_defaults(2),
                vec![axis("g0", grid(0.05, 0.05, 20)), axis("temperature", vec![0.01, 0.02, 0.05, 0.1, 0.2])],
            ),
            ScenarioKind::Compare => {
                if !full_dims {
                    run.t_end_tau = 200.0;
                }
                let gamma = SystemParams::paper_defaults(3).qubit_decay;
                (SystemParams::paper_defaults(3).with_drive(gamma, 5.0), vec![axis("g0", vec![0.1, 0.3, 0.5])])
            }
            ScenarioKind::TlsSpectrum => (SystemParams::paper_defaults(3), Vec::new()),
            ScenarioKind::Adjacency => (SystemParams::paper_defaults(10), Vec::new()),
        };
        let mut sc = Scenario { kind, params, sweep, run };
        sc.refresh_derived();
        sc
    }

    /// Quantities that follow the parameters unless set explicitly.
    fn refresh_derived(&mut self) {
        let f1 = angular_to_hz(self.params.spectrum().omegas[0]);
        self.run.omega_range = (-6.0 * f1, 6.0 * f1);
        if self.kind == ScenarioKind::Adjacency {
            self.retarget();
        }
    }

    fn retarget(&mut self) {
        let spec = self.params.spectrum();
        let w: Vec<f64> = self
            .run
            .targets
            .iter()
            .filter_map(|&k| self.params.mode_numbers.iter().position(|&m| m == k).map(|i| spec.omegas[i]))
            .collect();
        self.params.modulation_freqs = select_tones(&w, self.params.modulation_scheme);
    }

    /// Defaults overlaid with a config file, `--full-dims` and `--seed`.
    pub fn from_config(kind: ScenarioKind, cfg: &Config, full_dims: bool, seed: Option<u64>) -> Result<Self> {
        let mut sc = Self::defaults(kind, full_dims);
        sc.params = cfg.apply(sc.params)?;
        if let Some(seed) = seed {
            sc.params.anharmonicity_seed = seed;
            sc.run.seed = seed;
        }
        sc.run.detuning_ratio = cfg.detuning_ratio();
        sc.refresh_derived();
        let r = &cfg.run;
        if let Some(t) = r.t_end_tau {
            sc.run.t_end_tau = t;
        }
        if let Some(s) = r.samples {
            sc.run.samples = s;
        }
        if let Some(d) = &r.dims {
            sc.run.dims = d.clone();
        }
        if let Some(t) = r.tolerance {
            sc.run.tolerance = t;
        }
        if let Some(x) = r.region_rabi {
            sc.run.region_rabi = x;
        }
        if let Some(x) = r.region_g0 {
            sc.run.region_g0 = x;
        }
        if let Some(k) = r.max_k {
            sc.run.max_k = k;
        }
        if let Some(m) = r.total_modes {
            if kind != ScenarioKind::Multimode {
                return Err(Error::Config("run.total_modes applies to multimode only".into()));
            }
            let g = sc.params.coupling.first().copied().unwrap_or(0.0);
            sc.params = sc.params.clone().with_modes((1..=m).collect()).with_uniform_coupling(g);
        }
        if let Some(t) = &r.targets {
            sc.run.targets = t.clone();
            if kind == ScenarioKind::Adjacency && cfg.drive.modulation_freqs.is_none() {
                sc.retarget();
            }
        }
        if let (Some(a), Some(b)) = (r.omega_min, r.omega_max) {
            sc.run.omega_range = (a, b);
        } else if r.omega_min.is_some() || r.omega_max.is_some() {
            return Err(Error::Config("give both run.omega_min and run.omega_max".into()));
        }
        if let Some(n) = r.points {
            sc.run.points = n;
        }
        if let Some(w) = r.write_snapshots {
            sc.run.write_snapshots = w;
        }
        if let Some(d) = r.dump_states {
            sc.run.dump_states = d;
        }
        let sw = &r.sweep;
        for (name, vals) in [
            ("g0", &sw.g0),
            ("rabi_amplitude", &sw.rabi_amplitude),
            ("temperature", &sw.temperature),
            ("qubit_dephasing", &sw.qubit_dephasing),
        ] {
            if let Some(v) = vals {
                // an empty list drops the axis: the base value is used
                if v.is_empty() {
                    sc.sweep.retain(|a| a.name != name);
                    continue;
                }
                let ax = SweepAxis::new(name, v.clone())?;
                match sc.sweep.iter_mut().find(|a| a.name == name) {
                    Some(slot) => *slot = ax,
                    None => sc.sweep.push(ax),
                }
            }
        }
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        for a in &self.sweep {
            SweepAxis::new(&a.name, a.values.clone())?;
        }
        if !(self.run.t_end_tau > 0.0) || self.run.samples == 0 {
            return Err(Error::Config("t_end_tau and samples must be positive".into()));
        }
        if matches!(self.kind, ScenarioKind::Triangle | ScenarioKind::Compare) && self.run.dims.len() != self.params.n_modes {
            return Err(Error::Config(format!(
                "{} Fock dimensions for {} modes",
                self.run.dims.len(),
                self.params.n_modes
            )));
        }
        if self.kind == ScenarioKind::Multimode && self.params.n_modes < 3 {
            return Err(Error::Config("multimode needs at least 3 modes".into()));
        }
        if self.kind == ScenarioKind::DepthScan && self.run.max_k < 2 {
            return Err(Error::Config("depth scan needs max_k >= 2".into()));
        }
        if self.kind == ScenarioKind::TlsSpectrum && (self.run.points < 2 || !(self.run.omega_range.1 > self.run.omega_range.0)) {
            return Err(Error::Config("spectrum grid needs at least 2 points on an increasing range".into()));
        }
        Ok(())
    }

    pub fn axis(&self, name: &str) -> Option<&[f64]> {
        self.sweep.iter().find(|a| a.name == name).map(|a| a.values.as_slice())
    }

    fn header(&self) -> String {
        let mut extra = vec![
            ("seed", self.run.seed.to_string()),
            ("t_end_tau", fmt_f64(self.run.t_end_tau)),
            ("samples", self.run.samples.to_string()),
        ];
        if matches!(self.kind, ScenarioKind::Triangle | ScenarioKind::Compare) {
            extra.push(("dims", format!("{:?}", self.run.dims)));
            extra.push(("tolerance", fmt_f64(self.run.tolerance)));
        }
        for a in &self.sweep {
            let vals: Vec<String> = a.values.iter().map(|&v| fmt_f64(v)).collect();
            extra.push(("sweep", format!("{} = [{}]", a.name, vals.join(", "))));
        }
        let extra: Vec<(&str, String)> = extra.into_iter().collect();
        header_block(self.kind.name(), &self.params, &extra)
    }

    pub fn run(&self) -> Result<Output> {
        self.validate()?;
        let mut out = match self.kind {
            ScenarioKind::Triangle => run_triangle(self)?,
            ScenarioKind::Multimode => run_multimode(self)?,
            ScenarioKind::DepthScan => run_depth_scan(self)?,
            ScenarioKind::Compare => run_compare(self)?,
            ScenarioKind::TlsSpectrum => run_tls_spectrum(self)?,
            ScenarioKind::Adjacency => run_adjacency(self)?,
        };
        out.header = self.header();
        Ok(out)
    }
}

/// Sweep coordinates in units of Γ (rates) and K (temperature).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Point {
    pub g0: Option<f64>,
    pub rabi: Option<f64>,
    pub temperature: Option<f64>,
    pub dephasing: Option<f64>,
}

impl Point {
    pub fn apply(&self, base: &SystemParams, detuning_ratio: Option<f64>) -> SystemParams {
        let gamma = base.qubit_decay;
        let mut p = base.clone();
        if let Some(g) = self.g0 {
            p = p.with_uniform_coupling(g * gamma);
        }
        if let Some(r) = self.rabi {
            p.rabi_amplitude = r * gamma;
            if let Some(ratio) = detuning_ratio {
                p.detuning = ratio * p.rabi_amplitude;
            }
        }
        if let Some(t) = self.temperature {
            p.temperature = t;
        }
        if let Some(d) = self.dephasing {
            p.qubit_dephasing = d * gamma;
        }
        p
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(g) = self.g0 {
            parts.push(format!("g0={g}"));
        }
        if let Some(r) = self.rabi {
            parts.push(format!("rabi={r}"));
        }
        if let Some(t) = self.temperature {
            parts.push(format!("T={t}"));
        }
        if let Some(d) = self.dephasing {
            parts.push(format!("dephasing={d}"));
        }
        parts.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub point: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Csv(Table),
    Binary(Vec<u8>),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Output {
    pub header: String,
    pub files: Vec<(String, Artifact)>,
    pub failures: Vec<PointFailure>,
}

impl Output {
    fn csv(&mut self, name: &str, t: Table) {
        self.files.push((name.to_string(), Artifact::Csv(t)));
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.files.iter().find_map(|(n, a)| match a {
            Artifact::Csv(t) if n == name => Some(t),
            _ => None,
        })
    }

    /// Writes every artifact (plus `failures.csv` when a point failed) into
    /// `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, a) in &self.files {
            let path = dir.join(name);
            match a {
                Artifact::Csv(t) => std::fs::write(&path, t.to_csv(&self.header))?,
                Artifact::Binary(b) => std::fs::write(&path, b)?,
            }
            written.push(path);
        }
        if !self.failures.is_empty() {
            let mut t = Table::new(&["point", "error"]);
            for f in &self.failures {
                t.push(vec![f.point.replace(',', ";"), f.error.replace(',', ";")]);
            }
            let path = dir.join("failures.csv");
            std::fs::write(&path, t.to_csv(&self.header))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Runs `f` over `points` in parallel, preserving order. Failures are logged
/// and collected instead of aborting the sweep.
pub fn sweep<P, T, F>(points: &[P], label: impl Fn(&P) -> String + Sync, f: F) -> (Vec<Option<T>>, Vec<PointFailure>)
where
    P: Sync,
    T: Send,
    F: Fn(&P) -> Result<T> + Sync,
{
    let res: Vec<Result<T>> = points.par_iter().map(&f).collect();
    let mut failures = Vec::new();
    let vals = res
        .into_iter()
        .zip(points)
        .map(|(r, p)| match r {
            Ok(v) => Some(v),
            Err(e) => {
                let point = label(p);
                log::warn!("sweep point {point} failed: {e}");
                failures.push(PointFailure { point, error: e.to_string() });
                None
            }
        })
        .collect();
    (vals, failures)
}

/// `samples` evenly spaced times ending at `t_end` (t = 0 excluded).
pub fn sample_times(t_end: f64, samples: usize) -> Vec<f64> {
    (1..=samples).map(|i| t_end * i as f64 / samples as f64).collect()
}

/// Which measures to evaluate along an exact trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactMeasures {
    pub genuine: bool,
    pub qfi: bool,
    pub non_gaussianity: bool,
}

impl ExactMeasures {
    pub const ALL: ExactMeasures = ExactMeasures { genuine: true, qfi: true, non_gaussianity: true };
    pub const PAIRS: ExactMeasures = ExactMeasures { genuine: false, qfi: false, non_gaussianity: false };
}

/// Observables of one exact-model snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactRecord {
    pub time: f64,
    pub sigma_z: f64,
    pub occupations: Vec<f64>,
    /// Log-negativity of every mode pair `(i, j)`, `i < j`.
    pub pairs: Vec<(Bipartition, f64)>,
    pub genuine: Option<EntanglementReport>,
    /// `F_Q[ρ_m, X_M]/M`.
    pub qfi_normalized: Option<f64>,
    pub non_gaussianity: Option<f64>,
    pub min_eigenvalue: f64,
}

/// Exact-model trajectory from the joint ground state, with the final state.
pub fn exact_trajectory(
    params: &SystemParams,
    dims: &[usize],
    times: &[f64],
    tolerance: f64,
    what: ExactMeasures,
) -> Result<(Vec<ExactRecord>, DensityMatrix)> {
    let layout = HilbertLayout::with_tls(dims)?;
    let ops = build_operators(&layout);
    let sz = ops.qubit.as_ref().expect("TLS layout").sigma_z.clone();
    let m = layout.n_modes();
    let pairs: Vec<Bipartition> = (0..m)
        .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
        .map(|(i, j)| Bipartition::pair(i, j))
        .collect::<Result<_>>()?;
    let all: Vec<usize> = (0..m).collect();
    let spec = PartitionSpec::single_modes(&all);
    let mut records = Vec::with_capacity(times.len());
    let mut last = None;
    let opts = EvolveOptions::with_tolerance(tolerance);
    evolve_with(&DensityMatrix::ground(layout), params, times, &opts, |t, rho| {
        let modes = rho.modes_only()?;
        let x = if what.qfi { Some(collective_quadrature(&modes)?) } else { None };
        records.push(ExactRecord {
            time: t,
            sigma_z: rho.expect(&sz).re,
            occupations: (0..m).map(|k| rho.expect(&ops.number(k)).re).collect(),
            pairs: pairs.iter().map(|b| Ok((b.clone(), negativity_density(&modes, b)?))).collect::<Result<_>>()?,
            genuine: if what.genuine && m >= 3 {
                Some(genuine_multipartite(StateRef::Density(&modes), &spec)?)
            } else {
                None
            },
            qfi_normalized: match &x {
                Some(x) => Some(qfi(&modes, x)? / m as f64),
                None => None,
            },
            non_gaussianity: if what.non_gaussianity { Some(non_gaussianity(&modes)?) } else { None },
            min_eigenvalue: rho.min_eigenvalue(),
        });
        last = Some(rho.clone());
        Ok(())
    })?;
    let last = last.ok_or(Error::EmptyTrajectory)?;
    Ok((records, last))
}

/// Gaussian-model trajectory from the mode vacuum.
pub fn gaussian_trajectory(params: &SystemParams, times: &[f64]) -> Result<Vec<(f64, CovarianceMatrix)>> {
    let model = GaussianModel::new(params)?;
    let opts = LyapunovOptions { base_frequency: Some(params.fsr), ..Default::default() };
    let mut out = Vec::with_capacity(times.len());
    integrate_lyapunov_with(&CovarianceMatrix::vacuum(params.n_modes), &model, times, &opts, |t, cm| {
        out.push((t, cm.clone()));
        Ok(())
    })?;
    Ok(out)
}

fn dedup_push(v: &mut Vec<Point>, p: Point) {
    if !v.contains(&p) {
        v.push(p);
    }
}

fn base_ratio(sc: &Scenario) -> (f64, f64) {
    let p = &sc.params;
    let r = |x: f64| (x * 1e9).round() / 1e9;
    (r(p.coupling[0] / p.qubit_decay), r(p.rabi_amplitude / p.qubit_decay))
}

fn run_triangle(sc: &Scenario) -> Result<Output> {
    let (g_base, r_base) = base_ratio(sc);
    let g_axis = sc.axis("g0").map(<[f64]>::to_vec).unwrap_or_else(|| vec![g_base]);
    let r_axis = sc.axis("rabi_amplitude").map(<[f64]>::to_vec).unwrap_or_else(|| vec![r_base]);
    let mut points = Vec::new();
    for &g in &g_axis {
        for &r in &r_axis {
            dedup_push(&mut points, Point { g0: Some(g), rabi: Some(r), ..Default::default() });
        }
    }
    for &g in &g_axis {
        dedup_push(&mut points, Point { g0: Some(g), rabi: Some(r_base), ..Default::default() });
    }
    for &r in &r_axis {
        dedup_push(&mut points, Point { g0: Some(g_base), rabi: Some(r), ..Default::default() });
    }
    let tau = sc.params.tau_fsr();
    let grid_tau = sample_times(sc.run.t_end_tau, sc.run.samples);
    let times: Vec<f64> = grid_tau.iter().map(|x| x * tau).collect();
    let (runs, mut failures) = sweep(&points, Point::label, |pt| {
        let p = pt.apply(&sc.params, sc.run.detuning_ratio);
        exact_trajectory(&p, &sc.run.dims, &times, sc.run.tolerance, ExactMeasures::ALL)
    });

    let mut out = Output::default();
    let mut tidy = Table::new(&["g0_over_gamma", "rabi_over_gamma", "time_tau", "measure", "partition", "value"]);
    let mut summary = Table::new(&[
        "g0_over_gamma",
        "rabi_over_gamma",
        "e123_final",
        "non_gaussianity_final",
        "qfi_max",
        "qfi_max_time_tau",
        "min_eigenvalue",
    ]);
    for (pt, run) in points.iter().zip(&runs) {
        let Some((recs, last)) = run else { continue };
        let key = [fmt_f64(pt.g0.unwrap()), fmt_f64(pt.rabi.unwrap())];
        let mut row = |t: f64, measure: &str, part: &str, v: f64| {
            tidy.push(vec![key[0].clone(), key[1].clone(), fmt_f64(t), measure.into(), part.into(), fmt_f64(v)]);
        };
        for (r, &t) in recs.iter().zip(&grid_tau) {
            row(t, "sigma_z", "tls", r.sigma_z);
            for (k, n) in r.occupations.iter().enumerate() {
                row(t, "occupation", &(k + 1).to_string(), *n);
            }
            for (b, v) in &r.pairs {
                row(t, "log_negativity", &b.label(), *v);
            }
            if let Some(g) = &r.genuine {
                row(t, "genuine", &g.partition.label(), g.value);
            }
            if let Some(q) = r.qfi_normalized {
                row(t, "qfi_normalized", "X", q);
            }
            if let Some(d) = r.non_gaussianity {
                row(t, "non_gaussianity", "modes", d);
            }
            row(t, "min_eigenvalue", "all", r.min_eigenvalue);
        }
        let fin = recs.last().expect("nonempty trajectory");
        let (qt, qv) = recs
            .iter()
            .zip(&grid_tau)
            .filter_map(|(r, &t)| r.qfi_normalized.map(|q| (t, q)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((f64::NAN, f64::NAN));
        let min_eig = recs.iter().map(|r| r.min_eigenvalue).fold(f64::INFINITY, f64::min);
        summary.push(vec![
            key[0].clone(),
            key[1].clone(),
            fmt_f64(fin.genuine.as_ref().map_or(f64::NAN, |g| g.value)),
            fmt_f64(fin.non_gaussianity.unwrap_or(f64::NAN)),
            fmt_f64(qv),
            fmt_f64(qt),
            fmt_f64(min_eig),
        ]);
        if sc.run.dump_states {
            let mut buf = Vec::new();
            write_density_matrix(&mut buf, last)?;
            out.files.push((format!("rho_g0_{}_rabi_{}.bin", key[0], key[1]), Artifact::Binary(buf)));
        }
    }

    // one E^{1|2|3}(t) column per swept value, the other coordinate at its base
    let wide = |vals: &[f64], pick: &dyn Fn(f64) -> Point, prefix: &str| {
        let mut cols = vec!["time_tau".to_string()];
        cols.extend(vals.iter().map(|v| format!("{prefix}{v}")));
        let mut t = Table::new(&cols);
        let series: Vec<Option<&Vec<ExactRecord>>> = vals
            .iter()
            .map(|&v| points.iter().position(|p| *p == pick(v)).and_then(|i| runs[i].as_ref().map(|r| &r.0)))
            .collect();
        for (i, &time) in grid_tau.iter().enumerate() {
            let mut row = vec![fmt_f64(time)];
            for s in &series {
                let v = s.and_then(|r| r.get(i)).and_then(|r| r.genuine.as_ref()).map_or(f64::NAN, |g| g.value);
                row.push(fmt_f64(v));
            }
            t.push(row);
        }
        t
    };
    let by_g = wide(&g_axis, &|g| Point { g0: Some(g), rabi: Some(r_base), ..Default::default() }, "g0=");
    let by_r = wide(&r_axis, &|r| Point { g0: Some(g_base), rabi: Some(r), ..Default::default() }, "rabi=");
    out.csv("triangle_tpe_g0.csv", by_g);
    out.csv("triangle_tpe_rabi.csv", by_r);
    out.csv("triangle_trajectories.csv", tidy);
    out.csv("triangle_summary.csv", summary);

    // (T, Γ̃) robustness grid at the final time
    let temps = sc.axis("temperature").map(<[f64]>::to_vec).unwrap_or_else(|| vec![sc.params.temperature]);
    let deph = sc
        .axis("qubit_dephasing")
        .map(<[f64]>::to_vec)
        .unwrap_or_else(|| vec![sc.params.qubit_dephasing / sc.params.qubit_decay]);
    let region: Vec<Point> = temps
        .iter()
        .flat_map(|&t| {
            deph.iter().map(move |&d| Point {
                g0: Some(sc.run.region_g0),
                rabi: Some(sc.run.region_rabi),
                temperature: Some(t),
                dephasing: Some(d),
            })
        })
        .collect();
    let t_end = [sc.run.t_end_tau * tau];
    let what = ExactMeasures { genuine: true, qfi: false, non_gaussianity: false };
    let (vals, fails) = sweep(&region, Point::label, |pt| {
        let p = pt.apply(&sc.params, sc.run.detuning_ratio);
        let (recs, _) = exact_trajectory(&p, &sc.run.dims, &t_end, sc.run.tolerance, what)?;
        Ok(recs[0].genuine.as_ref().map_or(0.0, |g| g.value))
    });
    failures.extend(fails);
    let mut t = Table::new(&["temperature", "dephasing_over_gamma", "e123", "entangled"]);
    for (pt, v) in region.iter().zip(vals) {
        let v = v.unwrap_or(f64::NAN);
        t.push(vec![
            fmt_f64(pt.temperature.unwrap()),
            fmt_f64(pt.dephasing.unwrap()),
            fmt_f64(v),
            ((v > 0.0) as u8).to_string(),
        ]);
    }
    out.csv("triangle_region.csv", t);
    out.failures = failures;
    Ok(out)
}

/// Mode sets of the multimode scenario: `(n, label, 0-based indices)`.
pub fn multimode_sets(m: usize) -> Vec<(usize, &'static str, Vec<usize>)> {
    let mut sets = Vec::new();
    for n in 3..=m {
        sets.push((n, "first", (0..n).collect()));
        if n < m {
            sets.push((n, "second", (m - n..m).collect()));
        }
    }
    sets
}

/// Copy of `params` with tones on the modes at `active` (0-based).
pub fn with_active_modes(params: &SystemParams, active: &[usize]) -> SystemParams {
    let w = params.spectrum().omegas;
    let mut p = params.clone();
    let act: Vec<f64> = active.iter().map(|&i| w[i]).collect();
    p.modulation_freqs = select_tones(&act, p.modulation_scheme);
    p
}

fn modes_label(modes: &[usize]) -> String {
    modes.iter().map(|k| (k + 1).to_string()).collect::<Vec<_>>().join("-")
}

fn run_multimode(sc: &Scenario) -> Result<Output> {
    let (g_base, _) = base_ratio(sc);
    let g_axis = sc.axis("g0").map(<[f64]>::to_vec).unwrap_or_else(|| vec![g_base]);
    let sets = multimode_sets(sc.params.n_modes);
    let jobs: Vec<(f64, usize)> = g_axis.iter().flat_map(|&g| (0..sets.len()).map(move |s| (g, s))).collect();
    let tau = sc.params.tau_fsr();
    let t_end = sc.run.t_end_tau * tau;
    let times = if sc.run.write_snapshots { sample_times(t_end, sc.run.samples) } else { vec![t_end] };
    let (vals, failures) = sweep(
        &jobs,
        |&(g, s)| format!("g0={g} set={} n={}", sets[s].1, sets[s].0),
        |&(g, s)| {
            let active = &sets[s].2;
            let p = with_active_modes(&Point { g0: Some(g), ..Default::default() }.apply(&sc.params, None), active);
            let traj = gaussian_trajectory(&p, &times)?;
            let cm = traj.last().expect("at least one sample").1.reduced(active)?;
            let idx: Vec<usize> = (0..active.len()).collect();
            let rep = genuine_multipartite(StateRef::Gaussian(&cm), &PartitionSpec::single_modes(&idx))?;
            Ok((rep, traj))
        },
    );
    let mut out = Output::default();
    let mut t = Table::new(&["g0_over_gamma", "n", "set", "modes", "value", "floored"]);
    for (&(g, s), v) in jobs.iter().zip(&vals) {
        let (n, set, modes) = &sets[s];
        let (value, floored) = v.as_ref().map_or((f64::NAN, false), |(r, _)| (r.value, r.floored));
        t.push(vec![fmt_f64(g), n.to_string(), set.to_string(), modes_label(modes), fmt_f64(value), (floored as u8).to_string()]);
        if sc.run.write_snapshots {
            if let Some((_, traj)) = v {
                let stem = format!("multimode_snapshots_g0_{}_{}_{}", fmt_f64(g), set, n);
                let mut buf = Vec::new();
                write_snapshots_binary(&mut buf, traj)?;
                out.files.push((format!("{stem}.bin"), Artifact::Binary(buf)));
                out.csv(&format!("{stem}.csv"), snapshots_table(traj));
            }
        }
    }
    out.files.insert(0, ("multimode.csv".into(), Artifact::Csv(t)));
    out.failures = failures;
    Ok(out)
}

/// Two-mode system {1, k} driven at ω_1 and ω_k.
pub fn depth_params(base: &SystemParams, k: usize) -> SystemParams {
    let g0 = base.coupling.first().copied().unwrap_or(0.0);
    let mut p = base.clone().with_modes(vec![1, k]).with_uniform_coupling(g0);
    p.modulation_freqs = select_tones(&p.spectrum().omegas, p.modulation_scheme);
    p
}

/// `E^{1|k}` at `t_end` for the two-mode system {1, k}.
pub fn depth_point(base: &SystemParams, k: usize, t_end: f64) -> Result<f64> {
    let p = depth_params(base, k);
    let traj = gaussian_trajectory(&p, &[t_end])?;
    log_negativity_gaussian(&traj[0].1, &Bipartition::pair(0, 1)?)
}

fn run_depth_scan(sc: &Scenario) -> Result<Output> {
    let (g_base, _) = base_ratio(sc);
    let g_axis = sc.axis("g0").map(<[f64]>::to_vec).unwrap_or_else(|| vec![g_base]);
    let temps = sc.axis("temperature").map(<[f64]>::to_vec).unwrap_or_else(|| vec![sc.params.temperature]);
    let ks: Vec<usize> = (2..=sc.run.max_k).collect();
    let mut jobs: Vec<(f64, f64, usize)> = Vec::new();
    for &t in &temps {
        for &g in &g_axis {
            jobs.extend(ks.iter().map(|&k| (t, g, k)));
        }
    }
    let t_end = sc.run.t_end_tau * sc.params.tau_fsr();
    let (vals, failures) = sweep(
        &jobs,
        |&(t, g, k)| format!("T={t} g0={g} k={k}"),
        |&(t, g, k)| {
            let pt = Point { g0: Some(g), temperature: Some(t), ..Default::default() };
            depth_point(&pt.apply(&sc.params, None), k, t_end)
        },
    );
    let mut table = Table::new(&["temperature", "g0_over_gamma", "k", "e1k"]);
    for (&(t, g, k), v) in jobs.iter().zip(&vals) {
        table.push(vec![fmt_f64(t), fmt_f64(g), k.to_string(), fmt_f64(v.unwrap_or(f64::NAN))]);
    }
    let mut boundary = Table::new(&["temperature", "k", "g0_min_entangled", "g0_max_entangled", "entangled_points"]);
    for &t in &temps {
        for &k in &ks {
            let ent: Vec<f64> = jobs
                .iter()
                .zip(&vals)
                .filter(|((tt, _, kk), v)| *tt == t && *kk == k && v.is_some_and(|x| x > 0.0))
                .map(|((_, g, _), _)| *g)
                .collect();
            let lo = ent.iter().copied().fold(f64::NAN, f64::min);
            let hi = ent.iter().copied().fold(f64::NAN, f64::max);
            boundary.push(vec![fmt_f64(t), k.to_string(), fmt_f64(lo), fmt_f64(hi), ent.len().to_string()]);
        }
    }
    let mut out = Output::default();
    out.csv("depth_scan.csv", table);
    out.csv("depth_boundary.csv", boundary);
    out.failures = failures;
    Ok(out)
}

/// RMS gap, exact peak and their ratio for paired series.
pub fn rms_gap(exact: &[f64], gaussian: &[f64]) -> (f64, f64, f64) {
    let n = exact.len().min(gaussian.len()).max(1) as f64;
    let ss: f64 = exact.iter().zip(gaussian).map(|(a, b)| (a - b) * (a - b)).sum();
    let rms = (ss / n).sqrt();
    let peak = exact.iter().copied().fold(0.0, f64::max);
    (rms, peak, rms / peak)
}

/// Paired `E^{1|2}` series of both models at `times`.
pub fn compare_point(params: &SystemParams, dims: &[usize], times: &[f64], tolerance: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (recs, _) = exact_trajectory(params, dims, times, tolerance, ExactMeasures::PAIRS)?;
    let exact = recs.iter().map(|r| r.pairs[0].1).collect();
    let bip = Bipartition::pair(0, 1)?;
    let gauss = gaussian_trajectory(params, times)?
        .iter()
        .map(|(_, cm)| log_negativity_gaussian(cm, &bip))
        .collect::<Result<_>>()?;
    Ok((exact, gauss))
}

fn run_compare(sc: &Scenario) -> Result<Output> {
    let (g_base, _) = base_ratio(sc);
    let g_axis = sc.axis("g0").map(<[f64]>::to_vec).unwrap_or_else(|| vec![g_base]);
    let tau = sc.params.tau_fsr();
    let grid_tau = sample_times(sc.run.t_end_tau, sc.run.samples);
    let times: Vec<f64> = grid_tau.iter().map(|x| x * tau).collect();
    let (vals, failures) = sweep(
        &g_axis,
        |g| format!("g0={g}"),
        |&g| {
            let p = Point { g0: Some(g), ..Default::default() }.apply(&sc.params, None);
            compare_point(&p, &sc.run.dims, &times, sc.run.tolerance)
        },
    );
    let mut series = Table::new(&["g0_over_gamma", "time_tau", "e12_exact", "e12_gaussian"]);
    let mut summary = Table::new(&["g0_over_gamma", "rms_gap", "exact_peak", "gaussian_peak", "rms_over_peak"]);
    for (&g, v) in g_axis.iter().zip(&vals) {
        let Some((ex, ga)) = v else { continue };
        for ((t, a), b) in grid_tau.iter().zip(ex).zip(ga) {
            series.push_f64(&[g, *t, *a, *b]);
        }
        let (rms, peak, ratio) = rms_gap(ex, ga);
        summary.push_f64(&[g, rms, peak, ga.iter().copied().fold(0.0, f64::max), ratio]);
    }
    let mut out = Output::default();
    out.csv("compare.csv", series);
    out.csv("compare_summary.csv", summary);
    out.failures = failures;
    Ok(out)
}

fn run_tls_spectrum(sc: &Scenario) -> Result<Output> {
    let (lo, hi) = sc.run.omega_range;
    let n = sc.run.points;
    let mut t = Table::new(&["omega_hz", "spectrum_value"]);
    for i in 0..n {
        let f = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        t.push_f64(&[f, fluctuation_spectrum(hz_to_angular(f), &sc.params)?]);
    }
    let spec = sc.params.spectrum();
    let bath = effective_bath(&sc.params, &spec)?;
    let mut b = Table::new(&["mode", "omega_hz", "induced_damping", "induced_occupancy", "intrinsic_damping", "thermal_occupation"]);
    let (gam, occ) = (sc.params.intrinsic_dampings(), sc.params.mode_occupations());
    for k in 0..spec.len() {
        b.push(vec![
            sc.params.mode_numbers[k].to_string(),
            fmt_f64(angular_to_hz(spec.omegas[k])),
            fmt_f64(bath.induced_damping[k]),
            fmt_f64(bath.induced_occupancy[k]),
            fmt_f64(gam[k]),
            fmt_f64(occ[k]),
        ]);
    }
    let mut out = Output::default();
    out.csv("tls_spectrum.csv", t);
    out.csv("tls_bath.csv", b);
    Ok(out)
}

fn run_adjacency(sc: &Scenario) -> Result<Output> {
    let adj = adjacency_for(&sc.params);
    let f = adj.weighted_tms(&CouplingMatrix::new(&sc.params));
    let fmax = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let fnorm: Vec<f64> = f.iter().map(|x| if fmax > 0.0 { x / fmax } else { 0.0 }).collect();
    let mut active = Table::new(&["mode", "active"]);
    for (i, k) in sc.params.mode_numbers.iter().enumerate() {
        active.push(vec![k.to_string(), (adj.active_set.contains(&i) as u8).to_string()]);
    }
    let mut out = Output::default();
    out.csv("adjacency_tms.csv", matrix_table(adj.n, &adj.tms));
    out.csv("adjacency_qst.csv", matrix_table(adj.n, &adj.qst));
    out.csv("adjacency_f.csv", matrix_table(adj.n, &f));
    out.csv("adjacency_f_normalized.csv", matrix_table(adj.n, &fnorm));
    out.csv("adjacency_active.csv", active);
    Ok(out)
}
