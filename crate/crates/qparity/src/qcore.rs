//! Two-qubit states, entanglement measures and the Schmidt-angle
//! parameterization used by the feedback protocols.
//!
//! Basis order is |00>, |01>, |10>, |11>; the first tensor factor is qubit 1.
//! Local unitaries are built from Euler angles as
//! `U = exp(-i g sz/2) exp(-i th sy/2) exp(-i ph sz/2)`.

use crate::error::{Error, Result};
use crate::linalg::{
    binary_entropy, jacobi_eigh4, kron, mat2_adjoint, mat2_identity, mat2_mul, mat4_adjoint,
    mat4_conj, mat4_hermitian_deviation, mat4_mul, mat4_scale, mat4_trace, mat4_zero, matvec4,
    svd2, vec4_inner, vec4_norm, C64, Mat2, Mat4, Vec4, ONE, SIGMA_X, SIGMA_Y, SIGMA_Z, ZERO,
};

const NORM_TOL: f64 = 1e-6;

/// Normalized two-qubit wavefunction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureState {
    amp: Vec4,
}

impl PureState {
    /// Builds a state from raw amplitudes, rejecting vectors whose norm
    /// deviates from one by more than 1e-6. The stored state is renormalized.
    pub fn new(amp: [C64; 4]) -> Result<Self> {
        let n = vec4_norm(&amp);
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!(
                "norm deviates from 1 by {:.3e}",
                (n - 1.0).abs()
            )));
        }
        let mut amp = amp;
        for a in amp.iter_mut() {
            *a /= n;
        }
        Ok(Self { amp })
    }

    /// Builds and renormalizes without the norm guard. For internal steps
    /// whose inputs are O(dt)-perturbed states.
    pub(crate) fn renormalized(mut amp: Vec4) -> Self {
        let n = vec4_norm(&amp);
        for a in amp.iter_mut() {
            *a /= n;
        }
        Self { amp }
    }

    pub fn basis(index: usize) -> Self {
        let mut amp = [ZERO; 4];
        amp[index] = ONE;
        Self { amp }
    }

    /// (|01> + |10>)/sqrt(2).
    pub fn bell_psi_plus() -> Self {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self {
            amp: [ZERO, h, h, ZERO],
        }
    }

    /// (|00> - |11>)/sqrt(2).
    pub fn bell_phi_minus() -> Self {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self {
            amp: [h, ZERO, ZERO, -h],
        }
    }

    /// (|0>+|1>)(|0>+|1>)/2, the equal-superposition product state.
    pub fn plus_plus() -> Self {
        let q = C64::new(0.5, 0.0);
        Self { amp: [q, q, q, q] }
    }

    pub fn amplitudes(&self) -> &Vec4 {
        &self.amp
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amp[index]
    }

    pub fn norm(&self) -> f64 {
        vec4_norm(&self.amp)
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        vec4_inner(&self.amp, &other.amp)
    }

    /// Real expectation value of a Hermitian operator.
    pub fn expectation(&self, op: &Mat4) -> f64 {
        vec4_inner(&self.amp, &matvec4(op, &self.amp)).re
    }

    pub fn apply(&self, op: &Mat4) -> PureState {
        PureState::renormalized(matvec4(op, &self.amp))
    }

    /// Projector |psi><psi| as a density matrix.
    pub fn projector(&self) -> DensityMatrix {
        let mut m = mat4_zero();
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = self.amp[i] * self.amp[j].conj();
            }
        }
        DensityMatrix { m }
    }

    /// Reduced state of qubit 1 obtained by tracing out qubit 2.
    pub fn partial_trace_q2(&self) -> Mat2 {
        let a = &self.amp;
        [
            [
                a[0] * a[0].conj() + a[1] * a[1].conj(),
                a[0] * a[2].conj() + a[1] * a[3].conj(),
            ],
            [
                a[2] * a[0].conj() + a[3] * a[1].conj(),
                a[2] * a[2].conj() + a[3] * a[3].conj(),
            ],
        ]
    }

    pub fn max_abs_diff(&self, other: &PureState) -> f64 {
        let mut d: f64 = 0.0;
        for k in 0..4 {
            d = d.max((self.amp[k] - other.amp[k]).norm());
        }
        d
    }
}

/// 4x4 Hermitian, trace-one, positive-semidefinite operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    m: Mat4,
}

impl DensityMatrix {
    /// Validates hermiticity (1e-10), unit trace (1e-10) and spectrum
    /// bounded below by -1e-8.
    pub fn new(m: Mat4) -> Result<Self> {
        let dev = mat4_hermitian_deviation(&m);
        if dev > 1e-10 {
            return Err(Error::InvalidState(format!(
                "hermiticity deviation {dev:.3e}"
            )));
        }
        let tr = mat4_trace(&m);
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::InvalidState(format!("trace {} is not 1", tr)));
        }
        let rho = Self { m };
        let (l, _) = jacobi_eigh4(&rho.hermitized().m)?;
        if l.iter().any(|&x| x < -1e-8) {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {:.3e}",
                l.iter().cloned().fold(f64::INFINITY, f64::min)
            )));
        }
        Ok(rho)
    }

    /// Trusted constructor for integrator internals.
    pub(crate) fn from_raw(m: Mat4) -> Self {
        Self { m }
    }

    pub fn from_pure(psi: &PureState) -> Self {
        psi.projector()
    }

    /// Equal classical mixture of |00><00| and |11><11|.
    pub fn even_parity_mixture() -> Self {
        let mut m = mat4_zero();
        m[0][0] = C64::new(0.5, 0.0);
        m[3][3] = C64::new(0.5, 0.0);
        Self { m }
    }

    pub fn maximally_mixed() -> Self {
        let mut m = mat4_zero();
        for k in 0..4 {
            m[k][k] = C64::new(0.25, 0.0);
        }
        Self { m }
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.m
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.m[i][j]
    }

    pub fn trace(&self) -> C64 {
        mat4_trace(&self.m)
    }

    pub fn expectation(&self, op: &Mat4) -> f64 {
        mat4_trace(&mat4_mul(op, &self.m)).re
    }

    pub(crate) fn hermitized(&self) -> Self {
        let ad = mat4_adjoint(&self.m);
        let mut m = self.m;
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = (m[i][j] + ad[i][j]) * 0.5;
            }
        }
        Self { m }
    }

    pub(crate) fn renormalized(&self) -> Self {
        let tr = mat4_trace(&self.m).re;
        Self {
            m: mat4_scale(&self.m, C64::new(1.0 / tr, 0.0)),
        }
    }

    pub fn conjugate(&self, u: &Mat4) -> Self {
        Self {
            m: mat4_mul(u, &mat4_mul(&self.m, &mat4_adjoint(u))),
        }
    }

    /// Reduced state of qubit 1.
    pub fn partial_trace_q2(&self) -> Mat2 {
        let m = &self.m;
        [
            [m[0][0] + m[1][1], m[0][2] + m[1][3]],
            [m[2][0] + m[3][1], m[2][2] + m[3][3]],
        ]
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                d = d.max((self.m[i][j] - other.m[i][j]).norm());
            }
        }
        d
    }

    pub fn frobenius_distance(&self, other: &DensityMatrix) -> f64 {
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                s += (self.m[i][j] - other.m[i][j]).norm_sqr();
            }
        }
        s.sqrt()
    }
}

/// Canonical state coordinates: a signed concurrence and the five
/// local-rotation angles (the antisymmetric z angle before the y rotation is
/// gauge and fixed to zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchmidtParams {
    /// Signed concurrence in [-1, 1]; |c| is the physical concurrence.
    pub c: f64,
    pub theta: f64,
    pub delta_theta: f64,
    pub phi: f64,
    pub gamma: f64,
    pub delta_gamma: f64,
}

impl SchmidtParams {
    pub fn new(c: f64, theta: f64, delta_theta: f64, phi: f64, gamma: f64, delta_gamma: f64) -> Result<Self> {
        if c.abs() > 1.0 + 1e-12 {
            return Err(Error::Domain(format!("|C| = {} exceeds 1", c.abs())));
        }
        Ok(Self {
            c: c.clamp(-1.0, 1.0),
            theta,
            delta_theta,
            phi,
            gamma,
            delta_gamma,
        })
    }

    pub fn with_concurrence(c: f64) -> Result<Self> {
        Self::new(c, 0.0, 0.0, 0.0, 0.0, 0.0)
    }
}

/// Continuous measurement operator with rate and efficiency.
#[derive(Debug, Clone, Copy)]
pub struct MeasurementOp {
    matrix: Mat4,
    /// Eigenvalues when the operator is diagonal in the computational basis;
    /// lets the integrators use an O(4) update.
    diag: Option<[f64; 4]>,
    pub gamma: f64,
    pub eta: f64,
}

impl MeasurementOp {
    /// Half-parity operator X_H = (sz x I + I x sz)/2 at rate gamma = 2, eta = 1.
    pub fn half_parity() -> Self {
        let mut m = mat4_zero();
        let d = [1.0, 0.0, 0.0, -1.0];
        for k in 0..4 {
            m[k][k] = C64::new(d[k], 0.0);
        }
        Self {
            matrix: m,
            diag: Some(d),
            gamma: 2.0,
            eta: 1.0,
        }
    }

    /// Full-parity operator X_F = (sz x sz)/2 at rate gamma = 2, eta = 1.
    pub fn full_parity() -> Self {
        let mut m = mat4_zero();
        let d = [0.5, -0.5, -0.5, 0.5];
        for k in 0..4 {
            m[k][k] = C64::new(d[k], 0.0);
        }
        Self {
            matrix: m,
            diag: Some(d),
            gamma: 2.0,
            eta: 1.0,
        }
    }

    /// Custom Hermitian measurement operator.
    pub fn custom(matrix: Mat4, gamma: f64, eta: f64) -> Result<Self> {
        if mat4_hermitian_deviation(&matrix) > 1e-10 {
            return Err(Error::InvalidState(
                "measurement operator is not Hermitian".into(),
            ));
        }
        if !(0.0..=1.0).contains(&eta) || gamma <= 0.0 {
            return Err(Error::Domain(format!(
                "invalid measurement parameters gamma={gamma}, eta={eta}"
            )));
        }
        let mut diag = Some([0.0; 4]);
        'scan: for i in 0..4 {
            for j in 0..4 {
                if i != j && matrix[i][j].norm() > 0.0 {
                    diag = None;
                    break 'scan;
                }
            }
        }
        if let Some(d) = diag.as_mut() {
            for k in 0..4 {
                d[k] = matrix[k][k].re;
            }
        }
        Ok(Self {
            matrix,
            diag,
            gamma,
            eta,
        })
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Domain(format!("eta = {eta} outside [0, 1]")));
        }
        self.eta = eta;
        Ok(self)
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.matrix
    }

    /// Eigenvalues of sqrt(gamma/2) X when diagonal.
    pub(crate) fn scaled_diag(&self) -> Option<[f64; 4]> {
        let s = (self.gamma / 2.0).sqrt();
        self.diag.map(|d| d.map(|x| s * x))
    }

    /// sqrt(gamma/2) X, the Lindblad operator of the measurement.
    pub(crate) fn scaled_matrix(&self) -> Mat4 {
        mat4_scale(&self.matrix, C64::new((self.gamma / 2.0).sqrt(), 0.0))
    }

    pub fn x_expectation_pure(&self, psi: &PureState) -> f64 {
        psi.expectation(&self.matrix)
    }

    pub fn x_expectation_mixed(&self, rho: &DensityMatrix) -> f64 {
        rho.expectation(&self.matrix)
    }
}

/// Product of two single-qubit unitaries.
#[derive(Debug, Clone, Copy)]
pub struct LocalUnitary {
    pub u1: Mat2,
    pub u2: Mat2,
}

impl LocalUnitary {
    pub fn new(u1: Mat2, u2: Mat2) -> Result<Self> {
        for u in [&u1, &u2] {
            let p = mat2_mul(&mat2_adjoint(u), u);
            let id = mat2_identity();
            for i in 0..2 {
                for j in 0..2 {
                    if (p[i][j] - id[i][j]).norm() > 1e-10 {
                        return Err(Error::InvalidState(
                            "local unitary factor is not unitary".into(),
                        ));
                    }
                }
            }
        }
        Ok(Self { u1, u2 })
    }

    pub fn identity() -> Self {
        Self {
            u1: mat2_identity(),
            u2: mat2_identity(),
        }
    }

    /// Single-qubit Euler rotation exp(-i g sz/2) exp(-i th sy/2) exp(-i ph sz/2).
    pub fn euler(gamma: f64, theta: f64, phi: f64) -> Mat2 {
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let eg = |a: f64| C64::from_polar(1.0, -a / 2.0);
        // rz(g) ry(th) rz(ph)
        [
            [eg(gamma) * c * eg(phi), eg(gamma) * (-s) * eg(-phi)],
            [eg(-gamma) * s * eg(phi), eg(-gamma) * c * eg(-phi)],
        ]
    }

    pub fn from_euler(q1: (f64, f64, f64), q2: (f64, f64, f64)) -> Self {
        Self {
            u1: Self::euler(q1.0, q1.1, q1.2),
            u2: Self::euler(q2.0, q2.1, q2.2),
        }
    }

    pub fn matrix(&self) -> Mat4 {
        kron(&self.u1, &self.u2)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            u1: mat2_adjoint(&self.u1),
            u2: mat2_adjoint(&self.u2),
        }
    }
}

/// Pure-state concurrence |<psi*| sy x sy |psi>| = 2 |a00 a11 - a01 a10|.
pub fn concurrence_pure(psi: &PureState) -> Result<f64> {
    if (psi.norm() - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidState(format!(
            "concurrence of unnormalized state (norm deviation {:.3e})",
            (psi.norm() - 1.0).abs()
        )));
    }
    let a = psi.amplitudes();
    Ok(2.0 * (a[0] * a[3] - a[1] * a[2]).norm())
}

/// Wootters concurrence max(0, l1 - l2 - l3 - l4), where l_i are the
/// decreasingly ordered square roots of the eigenvalues of
/// rho (sy x sy) rho* (sy x sy).
///
/// Computed through the Hermitian form sqrt(rho) rho~ sqrt(rho), which has
/// the same spectrum and keeps the Jacobi solver applicable.
pub fn concurrence_mixed(rho: &DensityMatrix) -> Result<f64> {
    let yy = kron(&SIGMA_Y, &SIGMA_Y);
    let rho_tilde = mat4_mul(&yy, &mat4_mul(&mat4_conj(rho.matrix()), &yy));

    let (l, v) = jacobi_eigh4(rho.matrix())?;
    // sqrt(rho) from its eigendecomposition, clamping tiny negatives.
    let mut sq = mat4_zero();
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = ZERO;
            for k in 0..4 {
                acc += v[i][k] * l[k].max(0.0).sqrt() * v[j][k].conj();
            }
            sq[i][j] = acc;
        }
    }
    let t = mat4_mul(&sq, &mat4_mul(&rho_tilde, &sq));
    let (mut mu, _) = jacobi_eigh4(&crate::linalg::mat4_hermitize(&t))?;
    mu.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // Roundoff-scale eigenvalues would contribute sqrt(machine-epsilon)
    // artifacts to the signed sum; treat them as exact zeros.
    let lam: Vec<f64> = mu
        .iter()
        .map(|&x| if x < 1e-14 { 0.0 } else { x.sqrt() })
        .collect();
    Ok((lam[0] - lam[1] - lam[2] - lam[3]).max(0.0))
}

/// Reconstructs the state of Eq.-style canonical coordinates:
/// `(U1 x U2) [ k+ |00> - k- |11> ]` with `k_pm = sqrt((1 pm sqrt(1-C^2))/2)`,
/// Euler angles `theta_i = theta pm delta_theta` etc., the antisymmetric
/// z-angle before the y rotation fixed to zero, and the global phase chosen
/// so that arg(a00) = -gamma (falling back along a01, a10, a11 when a00
/// vanishes).
pub fn state_from_schmidt(p: &SchmidtParams) -> Result<PureState> {
    if p.c.abs() > 1.0 {
        return Err(Error::Domain(format!("|C| = {} exceeds 1", p.c.abs())));
    }
    let c2 = p.c * p.c;
    let root = (1.0 - c2).max(0.0).sqrt();
    let kp = ((1.0 + root) / 2.0).sqrt();
    let km = ((1.0 - root) / 2.0).sqrt();

    let u1 = LocalUnitary::euler(p.gamma + p.delta_gamma, p.theta + p.delta_theta, p.phi);
    let u2 = LocalUnitary::euler(p.gamma - p.delta_gamma, p.theta - p.delta_theta, p.phi);
    let u = kron(&u1, &u2);

    let bracket = [C64::new(kp, 0.0), ZERO, ZERO, C64::new(-km, 0.0)];
    let mut amp = matvec4(&u, &bracket);

    // Global phase convention.
    let targets = [-p.gamma, -p.delta_gamma, p.delta_gamma, p.gamma];
    for k in 0..4 {
        if amp[k].norm() > 1e-9 {
            let delta = targets[k] - amp[k].arg();
            let ph = C64::from_polar(1.0, delta);
            for a in amp.iter_mut() {
                *a *= ph;
            }
            break;
        }
    }
    PureState::new(amp)
}

/// Result of a Schmidt extraction; `degenerate` marks inputs with a
/// (near-)degenerate Schmidt spectrum (|C| within 1e-12 of 1), for which the
/// fixed gauge documented in [`svd2`] was used.
#[derive(Debug, Clone, Copy)]
pub struct SchmidtExtraction {
    pub lu: LocalUnitary,
    pub degenerate: bool,
}

/// Finds the local unitary L with `L psi = state_from_schmidt(C(psi), targets)`,
/// entrywise (global phase included).
pub fn schmidt_extract(psi: &PureState, targets: &SchmidtParams) -> Result<SchmidtExtraction> {
    let c = concurrence_pure(psi)?.min(1.0);
    let a = psi.amplitudes();
    let amp_mat: Mat2 = [[a[0], a[1]], [a[2], a[3]]];
    let (u, _s, w, degenerate) = svd2(&amp_mat);

    // psi = (u x conj(w)) (s0 |00> + s1 |11>), s0 = k+, s1 = k-.
    // The canonical bracket carries -k- on |11>; absorb the sign into the
    // second factor.
    let canon = SchmidtParams {
        c,
        theta: targets.theta,
        delta_theta: targets.delta_theta,
        phi: targets.phi,
        gamma: targets.gamma,
        delta_gamma: targets.delta_gamma,
    };
    let target_state = state_from_schmidt(&canon)?;

    let u1t = LocalUnitary::euler(
        canon.gamma + canon.delta_gamma,
        canon.theta + canon.delta_theta,
        canon.phi,
    );
    let u2t = LocalUnitary::euler(
        canon.gamma - canon.delta_gamma,
        canon.theta - canon.delta_theta,
        canon.phi,
    );
    let flip: Mat2 = [[ONE, ZERO], [ZERO, C64::new(-1.0, 0.0)]];

    let l1 = mat2_mul(&u1t, &mat2_adjoint(&u));
    let l2 = mat2_mul(&mat2_mul(&u2t, &flip), &mat2_adjoint(&mat2_conj2(&w)));

    // Fix the global phase so that L psi matches the constructor's convention.
    let lu = LocalUnitary::new(l1, l2)?;
    let moved = psi.apply(&lu.matrix());
    let overlap = moved.inner(&target_state);
    let l1 = if overlap.norm() > 1e-9 {
        crate::linalg::mat2_scale(&l1, overlap / overlap.norm())
    } else {
        l1
    };
    Ok(SchmidtExtraction {
        lu: LocalUnitary::new(l1, l2)?,
        degenerate,
    })
}

fn mat2_conj2(a: &Mat2) -> Mat2 {
    let mut out = *a;
    for row in out.iter_mut() {
        for x in row.iter_mut() {
            *x = x.conj();
        }
    }
    out
}

/// Applies a local unitary; the norm is preserved.
pub fn apply_lu(l: &LocalUnitary, psi: &PureState) -> PureState {
    psi.apply(&l.matrix())
}

/// Entanglement entropy: von-Neumann entropy of qubit 1 in bits.
pub fn entanglement_entropy(psi: &PureState) -> Result<f64> {
    if (psi.norm() - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidState("entropy of unnormalized state".into()));
    }
    let r = psi.partial_trace_q2();
    Ok(entropy_of_qubit(&r))
}

/// Von-Neumann entropy of a single-qubit density matrix in bits.
pub fn entropy_of_qubit(r: &Mat2) -> f64 {
    let tr = (r[0][0] + r[1][1]).re;
    let det = (r[0][0] * r[1][1] - r[0][1] * r[1][0]).re;
    let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
    let p = ((tr + disc) / 2.0).clamp(0.0, 1.0);
    binary_entropy(p)
}

/// Fidelity |<target|psi>|^2 to a maximally entangled target, together with
/// the singlet fraction F_max = (C(psi)+1)/2, the fidelity optimized over
/// local unitaries.
pub fn fidelity_and_singlet_fraction(psi: &PureState, target: &PureState) -> Result<(f64, f64)> {
    let ct = concurrence_pure(target)?;
    if (ct - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "target concurrence {ct} is not maximal"
        )));
    }
    let f = target.inner(psi).norm_sqr();
    let c = concurrence_pure(psi)?;
    Ok((f, (c + 1.0) / 2.0))
}

/// Pauli operators on the doubled space, used across the protocol modules.
pub mod ops {
    use super::*;

    pub fn sx1() -> Mat4 {
        kron(&SIGMA_X, &mat2_identity())
    }
    pub fn sx2() -> Mat4 {
        kron(&mat2_identity(), &SIGMA_X)
    }
    pub fn sy1() -> Mat4 {
        kron(&SIGMA_Y, &mat2_identity())
    }
    pub fn sz1() -> Mat4 {
        kron(&SIGMA_Z, &mat2_identity())
    }
    pub fn sx1_sz2() -> Mat4 {
        kron(&SIGMA_X, &SIGMA_Z)
    }
    pub fn sy1_sz2() -> Mat4 {
        kron(&SIGMA_Y, &SIGMA_Z)
    }
    pub fn sz1_sx2() -> Mat4 {
        kron(&SIGMA_Z, &SIGMA_X)
    }
    pub fn sz1_sy2() -> Mat4 {
        kron(&SIGMA_Z, &SIGMA_Y)
    }
    pub fn sz1_sz2() -> Mat4 {
        kron(&SIGMA_Z, &SIGMA_Z)
    }
    pub fn sy1_sy2() -> Mat4 {
        kron(&SIGMA_Y, &SIGMA_Y)
    }

    /// Hadamard on both qubits.
    pub fn hadamard_pair() -> Mat4 {
        let h = 1.0 / 2.0_f64.sqrt();
        let hm: Mat2 = [
            [C64::new(h, 0.0), C64::new(h, 0.0)],
            [C64::new(h, 0.0), C64::new(-h, 0.0)],
        ];
        kron(&hm, &hm)
    }

    /// exp(-i theta sx/2) on qubit 1.
    pub fn x_rotation_q1(theta: f64) -> Mat4 {
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let r: Mat2 = [
            [C64::new(c, 0.0), C64::new(0.0, -s)],
            [C64::new(0.0, -s), C64::new(c, 0.0)],
        ];
        kron(&r, &mat2_identity())
    }
}
