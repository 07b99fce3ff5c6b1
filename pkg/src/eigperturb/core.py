"""Leading-order eigenstructure of lambda*I + N + t*B for a nilpotent N.

Given the perturbation B expressed in Jordan-chain coordinates, the
eigenvalues splitting at order t^(1/rho) are governed by a Schur
complement S_rho of a bordered matrix W_rho built from B.
"""

from dataclasses import dataclass, field

import numpy as np

from . import linalg as la
from .errors import ClusterError, NonGenericError, SingularMatrixError, SpecError
from .jordan import BlockIndex

W_COND_LIMIT = 1e8
ROOT_GAP = 1e-6


def partition(B, spec):
    B = la.as_complex(B)
    p = spec.p
    if B.shape != (p, p):
        raise SpecError(f"B has shape {B.shape}, expected ({p}, {p})")
    return BlockIndex(spec, B)


def _w_rows(spec, k):
    return np.concatenate([np.arange(spec.p)[spec.rows(i, i)] for i in range(k, spec.m + 1)])


def _w_cols(spec, k):
    return np.concatenate([np.arange(spec.p)[spec.rows(j, 1)] for j in range(k, spec.m + 1)])


def assemble_W(B, spec, k):
    """W_k: rows from position i of block i, columns from position 1 of block j (i, j >= k)."""
    if not 1 <= k <= spec.m:
        raise SpecError(f"k={k} outside 1..{spec.m}")
    B = partition(B, spec).B
    return B[np.ix_(_w_rows(spec, k), _w_cols(spec, k))]


def _check_generic(W, k, limit):
    c = la.cond(W)
    if not np.isfinite(c) or c > limit:
        raise NonGenericError(k, c)
    return c


def schur_from_blocks(b_rr, w_r_rest, w_rest_r, W_next, k_next, limit=W_COND_LIMIT):
    """S = b_rr + w_r_rest @ G with G = -W_next^{-1} w_rest_r."""
    if W_next is None or W_next.shape[0] == 0:
        return la.as_complex(b_rr).copy(), np.zeros((0, b_rr.shape[1]), complex)
    _check_generic(W_next, k_next, limit)
    try:
        G = -la.solve(W_next, w_rest_r)
    except SingularMatrixError as exc:
        raise NonGenericError(k_next, np.inf, f"W_{k_next} is singular (pivot {exc.pivot:.3g})") from exc
    return b_rr + w_r_rest @ G, G


def schur_S(B, spec, rho, limit=W_COND_LIMIT):
    """Return (S_rho, G_rho); G_rho stacks G_{rho+1,rho}, ..., G_{m,rho}."""
    B = partition(B, spec).B
    rr = spec.rows(rho, rho)
    r1 = spec.rows(rho, 1)
    b_rr = B[rr, r1]
    if rho == spec.m:
        return b_rr.copy(), np.zeros((0, spec.s_of(rho)), complex)
    rows_rest = _w_rows(spec, rho + 1)
    cols_rest = _w_cols(spec, rho + 1)
    W_next = B[np.ix_(rows_rest, cols_rest)]
    w_rest_r = B[rows_rest, r1]
    w_r_rest = B[rr][:, cols_rest]
    return schur_from_blocks(b_rr, w_r_rest, w_rest_r, W_next, rho + 1, limit)


def companion_theta(S, rho):
    S = la.as_complex(S)
    s = S.shape[0]
    if rho == 1:
        return S.copy()
    n = rho * s
    theta = np.zeros((n, n), complex)
    theta[: n - s, s:] = np.eye(n - s)
    theta[n - s:, :s] = S
    return theta


def rho_roots(gammas, rho):
    """All rho-th roots of each gamma, grouped per gamma and sorted by argument.

    Returns (roots, index) with index[k] = (i, j): root j of gamma i.
    """
    roots, index = [], []
    for i, g in enumerate(np.asarray(gammas, dtype=complex)):
        base = np.abs(g) ** (1.0 / rho) * np.exp(1j * np.angle(g) / rho)
        cand = base * np.exp(2j * np.pi * np.arange(rho) / rho)
        args = np.angle(cand)
        args[np.isclose(args, -np.pi)] = np.pi
        for j, r in enumerate(cand[np.argsort(args, kind="stable")]):
            roots.append(r)
            index.append((i, j))
    return np.array(roots, dtype=complex), index


@dataclass
class PerturbationAnalysis:
    rho: int
    W: list
    W_cond: list
    S: np.ndarray
    G: np.ndarray
    theta: np.ndarray = field(repr=False)
    gammas: np.ndarray
    gamma_vectors: np.ndarray = field(repr=False)
    roots: np.ndarray
    root_index: list = field(repr=False)

    @classmethod
    def from_blocks(cls, rho, W, S, G, limit=W_COND_LIMIT, first_k=None):
        """Validate W_rho..W_m (largest failing index reported) and derive the spectra."""
        first_k = rho if first_k is None else first_k
        conds = [None] * len(W)
        for pos in range(len(W) - 1, -1, -1):
            conds[pos] = _check_generic(W[pos], first_k + pos, limit)
        S = la.as_complex(S)
        gammas, qs = la.eig(S)
        roots, index = rho_roots(gammas, rho)
        return cls(rho, [la.as_complex(w) for w in W], conds, S, la.as_complex(G),
                   companion_theta(S, rho), gammas, qs, roots, index)

    def with_S(self, S):
        """Same analysis with S replaced (used for negative controls)."""
        gammas, qs = la.eig(S)
        roots, index = rho_roots(gammas, self.rho)
        return PerturbationAnalysis(self.rho, self.W, self.W_cond, la.as_complex(S), self.G,
                                    companion_theta(S, self.rho), gammas, qs, roots, index)

    def root_vectors(self):
        """Eigenvector f of Theta for each root, built as [q; q w; ...; q w^(rho-1)]."""
        F, _, _ = restrict_cluster(self, list(range(len(self.roots))), check_gap=False)
        return F


def analyze(B, spec, rho, limit=W_COND_LIMIT):
    if spec.s_of(rho) == 0:
        raise SpecError(f"s_{rho} = 0: no eigenvalues split at order 1/{rho}")
    W = [assemble_W(B, spec, k) for k in range(rho, spec.m + 1)]
    for pos in range(len(W) - 1, 0, -1):
        _check_generic(W[pos], rho + pos, limit)
    S, G = schur_S(B, spec, rho, limit)
    return PerturbationAnalysis.from_blocks(rho, W, S, G, limit)


def generic_conditions(B, spec):
    """Condition numbers of W_1..W_m."""
    return [la.cond(assemble_W(B, spec, k)) for k in range(1, spec.m + 1)]


def predict_eigenvalues(lambda0, analysis, t):
    if t <= 0:
        raise SpecError("t must be positive")
    return lambda0 + t ** (1.0 / analysis.rho) * analysis.roots


@dataclass
class SubspacePrediction:
    """Leading-order basis of a predicted invariant subspace.

    ``reduced`` is the matrix K with A_t @ basis ~ basis @ K; ``expected_gram``
    times t**gram_scale is the predicted value of basis^* form basis.
    """

    basis: np.ndarray
    reduced: np.ndarray
    t: float
    rho: int
    orders: dict
    expected_gram: np.ndarray = None
    gram_scale: float = 0.0
    form: np.ndarray = None


def remainder_orders(spec, rho):
    """Declared exponent of the neglected remainder per (block k, position)."""
    table = {}
    for k in range(1, spec.m + 1):
        if k < rho:
            table[k] = [1 - (k - i + 1) / rho for i in range(1, k + 1)]
        elif k == rho:
            table[k] = [1.0] * k
        else:
            table[k] = [1 / rho] + [min((i - 1) / rho, 1.0) for i in range(2, k + 1)]
    return table


def chain_groups(t, rho):
    """Scalars t^((c-1)/rho) multiplying column group c."""
    return [t ** ((c - 1) / rho) for c in range(1, rho + 1)]


def leading_basis(spec, analysis, t):
    rho = analysis.rho
    s = spec.s_of(rho)
    X = np.zeros((spec.p, rho * s), complex)
    for c, scale in enumerate(chain_groups(t, rho), start=1):
        X[spec.rows(rho, c), (c - 1) * s: c * s] = scale * np.eye(s)
    off = 0
    for k in range(rho + 1, spec.m + 1):
        sk = spec.s_of(k)
        X[spec.rows(k, 1), :s] = analysis.G[off: off + sk]
        off += sk
    reduced = spec.eigenvalue * np.eye(rho * s) + t ** (1.0 / rho) * analysis.theta
    return SubspacePrediction(X, reduced, t, rho, remainder_orders(spec, rho))


def restrict_cluster(analysis, selection, check_gap=True):
    """(F, Q, Omega) for the roots listed in ``selection`` (flat indices into roots)."""
    sel = [int(k) for k in selection]
    if not sel:
        raise SpecError("empty root selection")
    rho = analysis.rho
    roots = analysis.roots
    if check_gap:
        rest = np.delete(roots, sel)
        if rest.size:
            gap = np.min(np.abs(roots[sel][:, None] - rest[None, :]))
            scale = max(1.0, float(np.max(np.abs(roots))))
            if gap < ROOT_GAP * scale:
                raise ClusterError(f"selected roots are not isolated (gap {gap:.3g})")
    omega = np.diag(roots[sel])
    Q = analysis.gamma_vectors[:, [analysis.root_index[k][0] for k in sel]]
    F = np.vstack([Q @ np.linalg.matrix_power(omega, c) for c in range(rho)])
    norms = np.linalg.norm(F, axis=0)
    F = F / norms
    Q = Q / norms
    res = la.norm2(analysis.theta @ F - F @ omega)
    if check_gap and res > 1e-8 * max(1.0, la.norm2(analysis.theta)):
        raise ClusterError(f"cluster basis fails Theta F = F Omega (residual {res:.3g})")
    if check_gap and len(sel) > 1 and np.linalg.matrix_rank(F, tol=1e-10) < len(sel):
        raise ClusterError("selected roots do not span an invariant subspace of full rank")
    return F, Q, omega
