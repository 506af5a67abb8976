//! Explicit Runge–Kutta integrators over flat state vectors.
//!
//! Fixed-step classical RK4 drives the covariance and mean-field models;
//! the adaptive Dormand–Prince 5(4) pair drives the master equation.

use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub trait OdeScalar: Copy + Default + Add<Output = Self> + Mul<f64, Output = Self> + Send + Sync {
    fn magnitude(self) -> f64;
}

impl OdeScalar for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl OdeScalar for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Scratch buffers for [`rk4_step`].
pub struct Rk4Workspace<T> {
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    tmp: Vec<T>,
}

impl<T: OdeScalar> Rk4Workspace<T> {
    pub fn new(n: usize) -> Self {
        Self {
            k1: vec![T::default(); n],
            k2: vec![T::default(); n],
            k3: vec![T::default(); n],
            k4: vec![T::default(); n],
            tmp: vec![T::default(); n],
        }
    }
}

/// One classical RK4 step of `y' = f(t, y)`, in place.
pub fn rk4_step<T, F>(f: &mut F, t: f64, y: &mut [T], h: f64, ws: &mut Rk4Workspace<T>)
where
    T: OdeScalar,
    F: FnMut(f64, &[T], &mut [T]),
{
    let n = y.len();
    f(t, y, &mut ws.k1);
    for i in 0..n {
        ws.tmp[i] = y[i] + ws.k1[i] * (0.5 * h);
    }
    f(t + 0.5 * h, &ws.tmp, &mut ws.k2);
    for i in 0..n {
        ws.tmp[i] = y[i] + ws.k2[i] * (0.5 * h);
    }
    f(t + 0.5 * h, &ws.tmp, &mut ws.k3);
    for i in 0..n {
        ws.tmp[i] = y[i] + ws.k3[i] * h;
    }
    f(t + h, &ws.tmp, &mut ws.k4);
    let h6 = h / 6.0;
    for i in 0..n {
        y[i] = y[i] + (ws.k1[i] + ws.k2[i] * 2.0 + ws.k3[i] * 2.0 + ws.k4[i]) * h6;
    }
}

/// Integrates with fixed step `dt` from `t0`, reporting the state at each
/// sample time. The last step before a sample is shortened to land on it.
pub fn rk4_sampled<T, F, S>(
    mut f: F,
    t0: f64,
    y: &mut [T],
    dt: f64,
    sample_times: &[f64],
    mut on_sample: S,
) -> Result<()>
where
    T: OdeScalar,
    F: FnMut(f64, &[T], &mut [T]),
    S: FnMut(f64, &[T]) -> Result<()>,
{
    let mut ws = Rk4Workspace::new(y.len());
    let mut t = t0;
    for &ts in sample_times {
        if ts < t - 1e-12 * dt.abs().max(ts.abs()) {
            return Err(Error::InvalidParams("sample times must be sorted and >= t0".into()));
        }
        let span = ts - t;
        let steps = (span / dt - 1e-9).ceil().max(0.0) as u64;
        if steps > 0 {
            let h = span / steps as f64;
            for s in 0..steps {
                rk4_step(&mut f, t + s as f64 * h, y, h, &mut ws);
            }
        }
        t = ts;
        on_sample(t, y)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: u64,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            h_init: None,
            h_max: f64::INFINITY,
            h_min: 0.0,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AdaptiveStats {
    pub accepted: u64,
    pub rejected: u64,
    pub rhs_evals: u64,
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Adaptive Dormand–Prince 5(4) with FSAL and step clamping at sample times.
///
/// `post_step` runs on every accepted state (e.g. renormalization) and
/// `on_sample` receives the state at each requested time.
pub fn dopri5<T, F, P, S>(
    mut f: F,
    t0: f64,
    y: &mut [T],
    sample_times: &[f64],
    opts: &AdaptiveOptions,
    mut post_step: P,
    mut on_sample: S,
) -> Result<AdaptiveStats>
where
    T: OdeScalar,
    F: FnMut(f64, &[T], &mut [T]),
    P: FnMut(&mut [T]),
    S: FnMut(f64, &[T]) -> Result<()>,
{
    let n = y.len();
    let zero = T::default();
    let mut k = vec![vec![zero; n]; 7];
    let mut tmp = vec![zero; n];
    let mut ynew = vec![zero; n];
    let mut stats = AdaptiveStats::default();

    let mut t = t0;
    f(t, y, &mut k[0]);
    stats.rhs_evals += 1;

    let mut h = match opts.h_init {
        Some(h) => h,
        None => initial_step(y, &k[0], opts),
    }
    .min(opts.h_max);

    for &ts in sample_times {
        if ts < t - 1e-12 * ts.abs().max(1e-300) {
            return Err(Error::InvalidParams("sample times must be sorted and >= t0".into()));
        }
        while t < ts {
            if stats.accepted + stats.rejected > opts.max_steps {
                return Err(Error::Tolerance { time: t, reason: "step budget exhausted".into() });
            }
            let remaining = ts - t;
            let mut hs = h.min(remaining);
            // avoid a sliver step right before the sample
            if remaining - hs < 1e-3 * hs {
                hs = remaining;
            }
            let stage = |k: &Vec<Vec<T>>, coeffs: &[f64], tmp: &mut [T], y: &[T]| {
                for i in 0..n {
                    let mut acc = y[i];
                    for (j, &c) in coeffs.iter().enumerate() {
                        if c != 0.0 {
                            acc = acc + k[j][i] * (c * hs);
                        }
                    }
                    tmp[i] = acc;
                }
            };
            stage(&k, &[A21], &mut tmp, y);
            f(t + C2 * hs, &tmp, &mut k[1]);
            stage(&k, &[A31, A32], &mut tmp, y);
            f(t + C3 * hs, &tmp, &mut k[2]);
            stage(&k, &[A41, A42, A43], &mut tmp, y);
            f(t + C4 * hs, &tmp, &mut k[3]);
            stage(&k, &[A51, A52, A53, A54], &mut tmp, y);
            f(t + C5 * hs, &tmp, &mut k[4]);
            stage(&k, &[A61, A62, A63, A64, A65], &mut tmp, y);
            f(t + hs, &tmp, &mut k[5]);
            stage(&k, &[B1, 0.0, B3, B4, B5, B6], &mut ynew, y);
            f(t + hs, &ynew, &mut k[6]);
            stats.rhs_evals += 6;

            let mut err2 = 0.0;
            for i in 0..n {
                let e = (k[0][i] * E1
                    + k[2][i] * E3
                    + k[3][i] * E4
                    + k[4][i] * E5
                    + k[5][i] * E6
                    + k[6][i] * E7)
                    .magnitude()
                    * hs;
                let scale = opts.atol + opts.rtol * y[i].magnitude().max(ynew[i].magnitude());
                err2 += (e / scale).powi(2);
            }
            let err = (err2 / n as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Tolerance { time: t, reason: "non-finite error estimate".into() });
            }
            if err <= 1.0 {
                t = if hs == remaining { ts } else { t + hs };
                y.copy_from_slice(&ynew);
                post_step(y);
                stats.accepted += 1;
                // FSAL; post_step only applies O(tolerance) corrections
                k.swap(0, 6);
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // only grow from a full step, not one clamped to a sample time
                if hs == h || fac < 1.0 {
                    h = (hs * fac).min(opts.h_max);
                }
            } else {
                stats.rejected += 1;
                h = hs * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
            if h < opts.h_min || h <= f64::EPSILON * t.abs() {
                return Err(Error::Tolerance { time: t, reason: format!("step size underflow ({h:e})") });
            }
        }
        on_sample(ts, y)?;
    }
    Ok(stats)
}

fn initial_step<T: OdeScalar>(y: &[T], dy: &[T], opts: &AdaptiveOptions) -> f64 {
    let n = y.len().max(1) as f64;
    let (mut d0, mut d1) = (0.0, 0.0);
    for (a, b) in y.iter().zip(dy) {
        let sc = opts.atol + opts.rtol * a.magnitude();
        d0 += (a.magnitude() / sc).powi(2);
        d1 += (b.magnitude() / sc).powi(2);
    }
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
}
