//! Ito stepping of the measurement and feedback evolution equations with
//! reproducible noise streams.
//!
//! Conventions: the Lindblad operator is `M = sqrt(gamma/2) X`; the paper's
//! `gamma = 2` convention makes `M = X`. Wiener increments have variance dt.
//! Mixed-state steps use the positivity-preserving product discretization
//! `rho' ~ K rho K^dag (+ unmonitored term)` with the same one-step generator
//! as the pure-state update, so a unit-efficiency mixed trajectory follows the
//! pure trajectory's projector exactly on shared noise. Its Ito expansion is
//! the literal master-equation increment.

use crate::error::{Error, Result};
use crate::linalg::{
    mat4_add, mat4_identity, mat4_mul, mat4_scale, mat4_trace, matvec4, C64, Mat4,
};
use crate::qcore::{DensityMatrix, MeasurementOp, PureState};

/// Splittable counter-style generator: SplitMix64 over a 64-bit state with
/// Gaussian output via Box-Muller. Per-trajectory streams are derived as
/// `base_seed + trajectory_index`; identical (seed, dt) give bitwise-identical
/// increment sequences within one build.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    seed: u64,
    state: u64,
    dt: f64,
    cached: Option<f64>,
    checksum: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, dt: f64) -> Self {
        Self {
            seed,
            state: seed,
            dt,
            cached: None,
            checksum: 0xcbf29ce484222325, // FNV offset basis
        }
    }

    pub fn for_trajectory(base_seed: u64, index: u64, dt: f64) -> Self {
        Self::new(base_seed.wrapping_add(index), dt)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in (0, 1].
    fn next_uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64
    }

    /// Standard normal via Box-Muller (pairs cached).
    pub fn next_standard_normal(&mut self) -> f64 {
        if let Some(z) = self.cached.take() {
            return z;
        }
        let u1 = self.next_uniform();
        let u2 = self.next_uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
        self.cached = Some(r * s);
        r * c
    }

    /// Wiener increment ~ Normal(0, dt). Each draw is folded into the running
    /// checksum so paired runs can verify they consumed identical streams.
    pub fn next_dw(&mut self) -> f64 {
        let dw = self.next_standard_normal() * self.dt.sqrt();
        self.checksum = (self.checksum ^ dw.to_bits()).wrapping_mul(0x100000001b3);
        dw
    }

    /// FNV-1a digest of all increments drawn so far.
    pub fn checksum(&self) -> u64 {
        self.checksum
    }
}

/// One integrator step's noise and homodyne record.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    pub dw: f64,
    pub dv: f64,
    pub t: f64,
}

/// Homodyne record increment dV = <X> dt + dW / sqrt(2 eta gamma).
pub fn homodyne_record(x_expect: f64, dw: f64, m: &MeasurementOp, dt: f64) -> Result<f64> {
    if m.eta <= 0.0 {
        return Err(Error::Domain(
            "no homodyne record exists at eta = 0".into(),
        ));
    }
    Ok(x_expect * dt + dw / (2.0 * m.eta * m.gamma).sqrt())
}

/// Stochastic Schroedinger step at unit efficiency:
/// `psi += [-(1/2)(M - <M>)^2 dt + (M - <M>) dW] psi`, then renormalize.
pub fn step_sse(psi: &PureState, m: &MeasurementOp, dw: f64, dt: f64) -> Result<PureState> {
    if (m.eta - 1.0).abs() > 1e-12 {
        return Err(Error::Contract(
            "step_sse requires eta = 1; use step_sme for inefficient measurement".into(),
        ));
    }
    Ok(sse_step_unchecked(psi, m, dw, dt))
}

pub(crate) fn sse_step_unchecked(psi: &PureState, m: &MeasurementOp, dw: f64, dt: f64) -> PureState {
    if let Some(d) = m.scaled_diag() {
        let a = psi.amplitudes();
        let mut xbar = 0.0;
        for k in 0..4 {
            xbar += d[k] * a[k].norm_sqr();
        }
        let mut amp = *a;
        for k in 0..4 {
            let dev = d[k] - xbar;
            amp[k] *= C64::new(1.0 - 0.5 * dev * dev * dt + dev * dw, 0.0);
        }
        PureState::renormalized(amp)
    } else {
        let mm = m.scaled_matrix();
        let xbar = psi.expectation(&mm);
        let a = psi.amplitudes();
        let sub = |v: &[C64; 4]| {
            let mv = matvec4(&mm, v);
            [
                mv[0] - xbar * v[0],
                mv[1] - xbar * v[1],
                mv[2] - xbar * v[2],
                mv[3] - xbar * v[3],
            ]
        };
        let av = sub(a);
        let aav = sub(&av);
        let mut amp = *a;
        for k in 0..4 {
            amp[k] += C64::new(-0.5 * dt, 0.0) * aav[k] + C64::new(dw, 0.0) * av[k];
        }
        PureState::renormalized(amp)
    }
}

/// Stochastic master-equation step
/// `rho += D[M] rho dt + H[M] rho sqrt(eta) dW`, re-Hermitized and
/// trace-renormalized.
///
/// Discretized in product form `K rho K^dag + (1-eta) A rho A dt` with
/// `K = 1 - (1/2) A^2 dt + sqrt(eta) A dW`, `A = M - <M>`. The
/// pre-normalization trace then deviates from one by
/// `eta (dW^2 - dt) <A^2>` exactly at first order; a residual beyond that
/// signals a too-large step and raises a step-size error.
pub fn step_sme(rho: &DensityMatrix, m: &MeasurementOp, dw: f64, dt: f64) -> Result<DensityMatrix> {
    let mm = m.scaled_matrix();
    let xbar = rho.expectation(&mm);
    let mut a = mm;
    for k in 0..4 {
        a[k][k] -= C64::new(xbar, 0.0);
    }
    let a2 = mat4_mul(&a, &a);
    let var = rho.expectation(&a2);

    let mut k = mat4_identity();
    let se = m.eta.sqrt();
    for i in 0..4 {
        for j in 0..4 {
            k[i][j] += C64::new(-0.5 * dt, 0.0) * a2[i][j] + C64::new(se * dw, 0.0) * a[i][j];
        }
    }
    let mut next = mat4_mul(&k, &mat4_mul(rho.matrix(), &crate::linalg::mat4_adjoint(&k)));
    if m.eta < 1.0 {
        let ara = mat4_mul(&a, &mat4_mul(rho.matrix(), &a));
        next = mat4_add(&next, &mat4_scale(&ara, C64::new((1.0 - m.eta) * dt, 0.0)));
    }

    let tr = mat4_trace(&next).re;
    let predicted = m.eta * (dw * dw - dt) * var;
    if (tr - 1.0 - predicted).abs() > 1e-6 {
        return Err(Error::StepSize(format!(
            "trace deviation {:.3e} beyond the stochastic budget; reduce dt",
            (tr - 1.0 - predicted).abs()
        )));
    }
    Ok(DensityMatrix::from_raw(next).hermitized().renormalized())
}

/// Pure-state Wiseman-Milburn feedback step (unit efficiency): the
/// measurement terms of [`step_sse`] plus
/// `[-(i/2) H_F (M + <M>) - H_F^2/8] dt - (i/2) H_F dW` applied to psi.
pub fn step_wm_pure(
    psi: &PureState,
    m: &MeasurementOp,
    h_f: &Mat4,
    dw: f64,
    dt: f64,
) -> Result<PureState> {
    if (m.eta - 1.0).abs() > 1e-12 {
        return Err(Error::Contract(
            "step_wm_pure requires eta = 1".into(),
        ));
    }
    let mm = m.scaled_matrix();
    let xbar = psi.expectation(&mm);
    let a = psi.amplitudes();

    let sub = |v: &[C64; 4]| {
        let mv = matvec4(&mm, v);
        [
            mv[0] - xbar * v[0],
            mv[1] - xbar * v[1],
            mv[2] - xbar * v[2],
            mv[3] - xbar * v[3],
        ]
    };
    let av = sub(a);
    let aav = sub(&av);

    // (M + <M>) psi and H_F-applied vectors.
    let mv = matvec4(&mm, a);
    let mplus = [
        mv[0] + xbar * a[0],
        mv[1] + xbar * a[1],
        mv[2] + xbar * a[2],
        mv[3] + xbar * a[3],
    ];
    let h_mplus = matvec4(h_f, &mplus);
    let h_psi = matvec4(h_f, a);
    let hh_psi = matvec4(h_f, &h_psi);

    let half_i = C64::new(0.0, -0.5);
    let mut amp = *a;
    for k in 0..4 {
        amp[k] += C64::new(-0.5 * dt, 0.0) * aav[k]
            + C64::new(dw, 0.0) * av[k]
            + C64::new(dt, 0.0) * (half_i * h_mplus[k] - C64::new(0.125, 0.0) * hh_psi[k])
            + C64::new(dw, 0.0) * half_i * h_psi[k];
    }
    Ok(PureState::renormalized(amp))
}

/// Mixed-state Wiseman-Milburn feedback step (unit efficiency): the master
/// equation `d rho = D[M] rho dt + H[M] rho dW - (i/2)[H_F, rho] dW
/// - (i/2)[H_F, M rho + rho M] dt + (1/4) D[H_F] rho dt`, discretized in the
/// same product form as [`step_sme`] so that it shadows [`step_wm_pure`] on
/// shared noise.
pub fn step_wm_mixed(
    rho: &DensityMatrix,
    m: &MeasurementOp,
    h_f: &Mat4,
    dw: f64,
    dt: f64,
) -> Result<DensityMatrix> {
    if (m.eta - 1.0).abs() > 1e-12 {
        return Err(Error::Contract(
            "step_wm_mixed requires eta = 1".into(),
        ));
    }
    let mm = m.scaled_matrix();
    let xbar = rho.expectation(&mm);
    let mut a = mm;
    for k in 0..4 {
        a[k][k] -= C64::new(xbar, 0.0);
    }
    let a2 = mat4_mul(&a, &a);

    let mut mplus = mm;
    for k in 0..4 {
        mplus[k][k] += C64::new(xbar, 0.0);
    }
    let h_mplus = mat4_mul(h_f, &mplus);
    let hh = mat4_mul(h_f, h_f);

    // K = 1 + [-(1/2)A^2 - (i/2) H (M + <M>) - H^2/8] dt + [A - (i/2) H] dW
    let half_i = C64::new(0.0, -0.5);
    let mut k = mat4_identity();
    for i in 0..4 {
        for j in 0..4 {
            let drift = C64::new(-0.5, 0.0) * a2[i][j] + half_i * h_mplus[i][j]
                - C64::new(0.125, 0.0) * hh[i][j];
            let noise = a[i][j] + half_i * h_f[i][j];
            k[i][j] += drift * dt + noise * dw;
        }
    }
    let next = mat4_mul(&k, &mat4_mul(rho.matrix(), &crate::linalg::mat4_adjoint(&k)));

    // Step-size guard on the trace, net of the exact stochastic budget of the
    // product scheme.
    let g = {
        let mut g = a;
        for i in 0..4 {
            for j in 0..4 {
                g[i][j] += half_i * h_f[i][j];
            }
        }
        g
    };
    let g_rho_gd = mat4_mul(&g, &mat4_mul(rho.matrix(), &crate::linalg::mat4_adjoint(&g)));
    let c2 = mat4_trace(&g_rho_gd).re;
    let tr = mat4_trace(&next).re;
    let predicted = (dw * dw - dt) * c2;
    // The feedback terms contribute legitimate O(dt dW ||H||^2) trace pieces
    // on top of the measurement budget; allow a fraction of that scale.
    let threshold = 1e-6 + 0.1 * dt * c2;
    let defect = (tr - 1.0 - predicted).abs();
    if !defect.is_finite() || defect > threshold {
        return Err(Error::StepSize(format!(
            "trace deviation {defect:.3e} beyond the stochastic budget; reduce dt"
        )));
    }
    Ok(DensityMatrix::from_raw(next).hermitized().renormalized())
}
