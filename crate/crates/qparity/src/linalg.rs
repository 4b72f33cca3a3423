//! Dense complex linear algebra on the fixed 2x2 and 4x4 spaces used by the
//! two-qubit simulator. Dimensions never exceed four, so everything is done
//! with stack arrays and hand-rolled loops.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat2 = [[C64; 2]; 2];
pub type Mat4 = [[C64; 4]; 4];
pub type Vec4 = [C64; 4];

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn mat2_zero() -> Mat2 {
    [[ZERO; 2]; 2]
}

pub fn mat4_zero() -> Mat4 {
    [[ZERO; 4]; 4]
}

pub fn mat4_identity() -> Mat4 {
    let mut m = mat4_zero();
    for k in 0..4 {
        m[k][k] = ONE;
    }
    m
}

pub fn mat2_identity() -> Mat2 {
    [[ONE, ZERO], [ZERO, ONE]]
}

pub const SIGMA_X: Mat2 = [[ZERO, ONE], [ONE, ZERO]];
pub const SIGMA_Y: Mat2 = [
    [ZERO, C64::new(0.0, -1.0)],
    [C64::new(0.0, 1.0), ZERO],
];
pub const SIGMA_Z: Mat2 = [[ONE, ZERO], [ZERO, C64::new(-1.0, 0.0)]];

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = mat2_zero();
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat2_adjoint(a: &Mat2) -> Mat2 {
    let mut out = mat2_zero();
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[j][i].conj();
        }
    }
    out
}

pub fn mat2_scale(a: &Mat2, s: C64) -> Mat2 {
    let mut out = *a;
    for row in out.iter_mut() {
        for x in row.iter_mut() {
            *x *= s;
        }
    }
    out
}

/// Kronecker product of two single-qubit operators, basis order
/// |00>, |01>, |10>, |11> (first factor = qubit 1).
pub fn kron(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut out = mat4_zero();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[2 * i + k][2 * j + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = mat4_zero();
    for i in 0..4 {
        for k in 0..4 {
            let aik = a[i][k];
            if aik == ZERO {
                continue;
            }
            for j in 0..4 {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn mat4_add(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = *a;
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] += b[i][j];
        }
    }
    out
}

pub fn mat4_sub(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = *a;
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] -= b[i][j];
        }
    }
    out
}

pub fn mat4_scale(a: &Mat4, s: C64) -> Mat4 {
    let mut out = *a;
    for row in out.iter_mut() {
        for x in row.iter_mut() {
            *x *= s;
        }
    }
    out
}

pub fn mat4_adjoint(a: &Mat4) -> Mat4 {
    let mut out = mat4_zero();
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[j][i].conj();
        }
    }
    out
}

pub fn mat4_conj(a: &Mat4) -> Mat4 {
    let mut out = *a;
    for row in out.iter_mut() {
        for x in row.iter_mut() {
            *x = x.conj();
        }
    }
    out
}

pub fn mat4_trace(a: &Mat4) -> C64 {
    a[0][0] + a[1][1] + a[2][2] + a[3][3]
}

pub fn matvec4(a: &Mat4, v: &Vec4) -> Vec4 {
    let mut out = [ZERO; 4];
    for i in 0..4 {
        out[i] = a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2] + a[i][3] * v[3];
    }
    out
}

pub fn vec4_norm(v: &Vec4) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec4_inner(a: &Vec4, b: &Vec4) -> C64 {
    a[0].conj() * b[0] + a[1].conj() * b[1] + a[2].conj() * b[2] + a[3].conj() * b[3]
}

pub fn mat4_frobenius(a: &Mat4) -> f64 {
    a.iter()
        .flat_map(|row| row.iter())
        .map(|x| x.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn mat4_hermitian_deviation(a: &Mat4) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            dev = dev.max((a[i][j] - a[j][i].conj()).norm());
        }
    }
    dev
}

/// (a + a^dagger)/2.
pub fn mat4_hermitize(a: &Mat4) -> Mat4 {
    let ad = mat4_adjoint(a);
    mat4_scale(&mat4_add(a, &ad), C64::new(0.5, 0.0))
}

/// Eigendecomposition of a 4x4 Hermitian matrix by cyclic Jacobi rotations.
///
/// Sweeps annihilate off-diagonal entries with complex plane rotations until
/// the off-diagonal Frobenius norm drops below 1e-12 (at most 100 sweeps).
/// Returns the eigenvalues and the unitary whose columns are eigenvectors,
/// so that `a = v * diag(l) * v^dagger`.
pub fn jacobi_eigh4(a: &Mat4) -> Result<([f64; 4], Mat4)> {
    const TOL: f64 = 1e-12;
    const MAX_SWEEPS: usize = 100;

    let mut m = *a;
    let mut v = mat4_identity();

    for sweep in 0..MAX_SWEEPS {
        let mut off: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    off += m[i][j].norm_sqr();
                }
            }
        }
        if off.sqrt() < TOL {
            let mut l = [0.0; 4];
            for k in 0..4 {
                l[k] = m[k][k].re;
            }
            return Ok((l, v));
        }
        let _ = sweep;

        for p in 0..3 {
            for q in (p + 1)..4 {
                let apq = m[p][q];
                if apq.norm() < TOL * 1e-2 {
                    continue;
                }
                // Phase that makes the pivot real, then a real Jacobi rotation.
                let phase = apq / apq.norm();
                let app = m[p][p].re;
                let aqq = m[q][q].re;
                let tau = (aqq - app) / (2.0 * apq.norm());
                // Small-magnitude root of t^2 - 2 tau t - 1 = 0, which zeroes
                // the rotated pivot for this rotation's column layout.
                let t = if tau >= 0.0 {
                    -1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // Columns of the rotation acting on (p, q):
                //   e_p -> c e_p + s phase^* e_q,  e_q -> -s phase e_p + c e_q
                let mut g = mat4_identity();
                g[p][p] = C64::new(c, 0.0);
                g[q][p] = C64::new(s, 0.0) * phase.conj();
                g[p][q] = C64::new(-s, 0.0) * phase;
                g[q][q] = C64::new(c, 0.0);

                m = mat4_mul(&mat4_adjoint(&g), &mat4_mul(&m, &g));
                v = mat4_mul(&v, &g);
            }
        }
    }
    Err(Error::Numerical(format!(
        "Jacobi eigensolver did not converge within {MAX_SWEEPS} sweeps"
    )))
}

/// Singular value decomposition of a 2x2 complex matrix: `a = u * diag(s) * w^dagger`
/// with `s[0] >= s[1] >= 0`.
///
/// Phases are fixed deterministically: the dominant-magnitude component of each
/// right-singular vector is made real and positive. For a degenerate spectrum
/// (`s[0] ~ s[1]`) the right factor is pinned to the identity, which is the
/// fixed gauge used for maximally entangled inputs.
pub fn svd2(a: &Mat2) -> (Mat2, [f64; 2], Mat2, bool) {
    // Hermitian 2x2 eigenproblem for a^dagger a.
    let ad = mat2_adjoint(a);
    let h = mat2_mul(&ad, a);
    let h00 = h[0][0].re;
    let h11 = h[1][1].re;
    let h01 = h[0][1];

    let tr = h00 + h11;
    let disc = ((h00 - h11) * (h00 - h11) + 4.0 * h01.norm_sqr()).max(0.0).sqrt();
    let l0 = 0.5 * (tr + disc);
    let l1 = (0.5 * (tr - disc)).max(0.0);

    let degenerate = disc < 1e-12;

    let mut w = mat2_identity();
    if !degenerate {
        // Dominant eigenvector of h: the better-conditioned of the two
        // closed forms.
        let cand1 = [h01, C64::new(l0 - h00, 0.0)];
        let cand2 = [C64::new(l0 - h11, 0.0), h01.conj()];
        let n1 = cand1[0].norm_sqr() + cand1[1].norm_sqr();
        let n2 = cand2[0].norm_sqr() + cand2[1].norm_sqr();
        let v0 = normalize_phase2(if n1 >= n2 { cand1 } else { cand2 });
        let v1 = normalize_phase2([-v0[1].conj(), v0[0].conj()]);
        w = [[v0[0], v1[0]], [v0[1], v1[1]]];
    }

    let s = [l0.sqrt(), l1.sqrt()];

    // Left factor: Gram-Schmidt on (a w0, a w1), completed by the orthogonal
    // complement when a column collapses. Keeps u exactly unitary.
    let apply = |k: usize| {
        [
            a[0][0] * w[0][k] + a[0][1] * w[1][k],
            a[1][0] * w[0][k] + a[1][1] * w[1][k],
        ]
    };
    let mut u = mat2_identity();
    let aw0 = apply(0);
    let n0 = (aw0[0].norm_sqr() + aw0[1].norm_sqr()).sqrt();
    if n0 > 1e-12 {
        u[0][0] = aw0[0] / n0;
        u[1][0] = aw0[1] / n0;
    }
    let aw1 = apply(1);
    let ip = u[0][0].conj() * aw1[0] + u[1][0].conj() * aw1[1];
    let r = [aw1[0] - ip * u[0][0], aw1[1] - ip * u[1][0]];
    let nr = (r[0].norm_sqr() + r[1].norm_sqr()).sqrt();
    if nr > 1e-12 {
        u[0][1] = r[0] / nr;
        u[1][1] = r[1] / nr;
    } else {
        u[0][1] = -u[1][0].conj();
        u[1][1] = u[0][0].conj();
    }
    (u, s, w, degenerate)
}

fn normalize_phase2(v: [C64; 2]) -> [C64; 2] {
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let mut v = [v[0] / n, v[1] / n];
    let pivot = if v[0].norm() >= v[1].norm() { v[0] } else { v[1] };
    if pivot.norm() > 1e-300 {
        let ph = pivot.conj() / pivot.norm();
        v = [v[0] * ph, v[1] * ph];
    }
    v
}

/// Binary entropy in bits with the 0 log 0 := 0 convention.
pub fn binary_entropy(p: f64) -> f64 {
    let mut s = 0.0;
    for x in [p, 1.0 - p] {
        if x > 0.0 {
            s -= x * x.log2();
        }
    }
    s
}
