"""Thin dense linear-algebra layer over numpy/scipy.

All routines accept and return complex128 arrays so the rest of the
package never has to think about dtype promotion.
"""

import warnings

import numpy as np
import scipy.linalg as sla

from .errors import SingularMatrixError, SpecError

EPS = np.finfo(float).eps
PIVOT_RTOL = 1e-12


def as_complex(a):
    return np.asarray(a, dtype=np.complex128)


def matmul(a, b):
    return as_complex(a) @ as_complex(b)


def adjoint(a):
    return as_complex(a).conj().T


def norm2(a):
    a = as_complex(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def fro(a):
    a = as_complex(a)
    return float(np.linalg.norm(a)) if a.size else 0.0


def solve(a, b):
    """Solve ``a x = b`` by LU with partial pivoting.

    Raises SingularMatrixError when the smallest pivot is below
    ``1e-12 * ||a||_F``; the offending magnitude is attached as ``pivot``.
    """
    a = as_complex(a)
    b = as_complex(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise SpecError(f"solve needs a square matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        return np.zeros((0,) + b.shape[1:], dtype=np.complex128)
    scale = fro(a)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(a, check_finite=True)
    pivot = float(np.min(np.abs(np.diag(lu))))
    if scale == 0.0 or pivot < PIVOT_RTOL * scale:
        raise SingularMatrixError(f"matrix is numerically singular (min pivot {pivot:.3g})", pivot=pivot)
    return sla.lu_solve((lu, piv), b)


def solve_adjoint(a, b):
    """Solve ``a^* x = b`` without forming the adjoint explicitly twice."""
    return solve(adjoint(a), b)


def cond(a):
    a = as_complex(a)
    if a.shape[0] == 0:
        return 1.0
    s = svd_values(a)
    return float(np.inf) if s[-1] == 0 else float(s[0] / s[-1])


def eig(a):
    """Eigenvalues and unit-norm right eigenvectors."""
    w, v = np.linalg.eig(as_complex(a))
    if v.size:
        v = v / np.linalg.norm(v, axis=0, keepdims=True)
    return w, v


def refine_eig(a, w, v, iters=4):
    """Newton refinement of simple eigenpairs with extended-precision residuals.

    Each pair solves the bordered system [[a - w I, -v], [v0^*, 0]] in double
    precision while the residual ``a v - w v`` is formed in ``np.clongdouble``.
    On platforms where long double is plain double this reduces to one or two
    ordinary Newton steps and changes nothing of substance.
    """
    a = as_complex(a)
    n = a.shape[0]
    a_ld = a.astype(np.clongdouble)
    w_out = np.array(w, dtype=np.complex128)
    v_out = np.array(v, dtype=np.complex128)
    scale = max(norm2(a), 1.0)
    for i in range(w_out.size):
        lam = np.clongdouble(w_out[i])
        x = v_out[:, i].astype(np.clongdouble)
        v0 = v_out[:, i].conj()
        for _ in range(iters):
            r = a_ld @ x - lam * x
            c = np.clongdouble(1) - v0.astype(np.clongdouble) @ x
            M = np.zeros((n + 1, n + 1), complex)
            M[:n, :n] = a - complex(lam) * np.eye(n)
            M[:n, n] = -x.astype(complex)
            M[n, :n] = v0
            rhs = np.concatenate([-r.astype(complex), [complex(c)]])
            try:
                step = np.linalg.solve(M, rhs)
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(step)):
                break
            x = x + step[:n].astype(np.clongdouble)
            lam = lam + np.clongdouble(step[n])
            if abs(step[n]) <= 1e-3 * EPS * EPS * scale:
                break
        xd = x.astype(complex)
        nrm = np.linalg.norm(xd)
        if np.isfinite(nrm) and nrm > 0 and abs(complex(lam) - w_out[i]) < 1e-6 * scale:
            w_out[i] = complex(lam)
            v_out[:, i] = xd / nrm
    return w_out, v_out


def eigvals(a):
    return np.linalg.eigvals(as_complex(a))


def eigh(a):
    a = as_complex(a)
    return np.linalg.eigh((a + adjoint(a)) / 2)


def svd_values(a):
    """Singular values, descending."""
    return np.linalg.svd(as_complex(a), compute_uv=False)


def orthonormalize(a, rtol=1e-10):
    """Orthonormal basis of range(a). Rank is decided from the singular values."""
    a = as_complex(a)
    if a.shape[1] == 0:
        return a.copy()
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    rank = int(np.sum(s > rtol * max(s[0], EPS)))
    if rank == a.shape[1]:
        # QR keeps each column's direction, so orthonormal input comes back up to phase
        return np.linalg.qr(a)[0]
    return u[:, :rank]


def null_space(a, rtol=1e-8):
    """Orthonormal basis of the numerical null space of a square matrix."""
    a = as_complex(a)
    n = a.shape[1]
    if n == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    _, s, vh = np.linalg.svd(a)
    scale = max(s[0] if s.size else 0.0, 1.0)
    rank = int(np.sum(s > rtol * scale))
    return adjoint(vh[rank:])


def expm(a):
    return sla.expm(as_complex(a))


def principal_angles(a, b):
    """Principal angles (radians, descending) between range(a) and range(b)."""
    a = as_complex(a)
    b = as_complex(b)
    if a.shape[1] == 0 or b.shape[1] == 0:
        return np.zeros(0)
    return sla.subspace_angles(a, b)


def block_diag(*blocks):
    blocks = [as_complex(b) for b in blocks]
    return sla.block_diag(*blocks).astype(np.complex128) if blocks else np.zeros((0, 0), complex)


def random_complex(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_hermitian(rng, n):
    g = random_complex(rng, (n, n))
    return (g + adjoint(g)) / 2
