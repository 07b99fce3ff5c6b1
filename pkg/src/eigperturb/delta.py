"""Δ-Hermitian pencils C + tD: structured W_k, S_rho and predicted bases.

Two cases: a nonreal eigenvalue (chains V and partner chains V_c, form
pairing them) and a real eigenvalue (one chain set U with sign blocks).
Every analysis is computed from the chain matrices directly and, as an
independent check, through the generic partition path of ``core``.
"""

from dataclasses import dataclass, field

import numpy as np

from . import core
from . import linalg as la
from .canonical import gamma_block
from .errors import NonGenericError, SingularMatrixError, SpecError, StructureError

REAL_TOL = 1e-8


def check_structure(A, form, tol=1e-10):
    FA = la.as_complex(form) @ la.as_complex(A)
    return la.fro(FA - FA.conj().T) <= tol * max(la.fro(FA), np.finfo(float).tiny)


def chain_pos(X, spec, j, i):
    return X[:, spec.rows(j, i)]


def lead_cols(X, spec, k):
    """[X_{k1}, ..., X_{m1}]: eigenvector columns of blocks k..m."""
    return np.hstack([chain_pos(X, spec, j, 1) for j in range(k, spec.m + 1)]) if k <= spec.m \
        else np.zeros((X.shape[0], 0), complex)


def top_cols(Xc, spec, k):
    """[Xc_{kk}, ..., Xc_{mm}]: last-position columns of the partner chains."""
    return np.hstack([chain_pos(Xc, spec, j, j) for j in range(k, spec.m + 1)]) if k <= spec.m \
        else np.zeros((Xc.shape[0], 0), complex)


def forward_basis(X, first, spec, rho, t):
    """[first, t^(1/rho) X_{rho,2}, ..., t^(1-1/rho) X_{rho,rho}]."""
    cols = [first]
    for c in range(2, rho + 1):
        cols.append(t ** ((c - 1) / rho) * chain_pos(X, spec, rho, c))
    return np.hstack(cols)


def backward_basis(Xc, last, spec, rho, t):
    """[t^(1-1/rho) Xc_{rho,1}, ..., t^(1/rho) Xc_{rho,rho-1}, last]."""
    cols = [t ** ((rho - c) / rho) * chain_pos(Xc, spec, rho, c) for c in range(1, rho)]
    cols.append(last)
    return np.hstack(cols)


def _solve_generic(W, rhs, k, adjoint=False):
    if W.shape[0] == 0:
        return np.zeros((0, rhs.shape[1]), complex)
    try:
        return la.solve(W.conj().T if adjoint else W, rhs)
    except SingularMatrixError as exc:
        raise NonGenericError(k, np.inf, f"W_{k} is singular") from exc


@dataclass
class StructuredAnalysis:
    base: core.PerturbationAnalysis
    case: str
    spec: object = field(repr=False)
    G_c: np.ndarray = None
    Sigma: np.ndarray = None
    S_hat: np.ndarray = None
    W_hat: list = field(default=None, repr=False)
    route_gap: float = 0.0
    hermitian_gap: float = 0.0

    @property
    def rho(self):
        return self.base.rho

    @property
    def G(self):
        return self.base.G

    @property
    def predicted_gram(self):
        rho, s = self.rho, self.spec.s_of(self.rho)
        if self.case == "nonreal":
            r = rho * s
            return np.block([[np.zeros((r, r)), np.eye(r)], [np.eye(r), np.zeros((r, r))]]).astype(complex)
        return gamma_block(self.spec, rho)

    @property
    def gram_scale(self):
        return 1.0 - 1.0 / self.rho


def _route_gap(a, b):
    W1, S1 = a
    W2, S2 = b
    gaps = [la.norm2(x - y) / max(la.norm2(x), 1.0) for x, y in zip(W1, W2)]
    gaps.append(la.norm2(S1 - S2) / max(la.norm2(S1), 1.0))
    return float(max(gaps))


def _require(problem, case):
    if problem.spec.case != case:
        raise SpecError(f"expected a {case} problem, got {problem.spec.case}")
    if problem.perturbation is None:
        raise StructureError("problem has no perturbation")


def analyze_nonreal(problem, rho, limit=core.W_COND_LIMIT):
    _require(problem, "delta_nonreal")
    spec = problem.spec
    if spec.s_of(rho) == 0:
        raise SpecError(f"s_{rho} = 0")
    V, Vc = problem.chains["V"], problem.chains["Vc"]
    FD = problem.form @ problem.perturbation
    W = [top_cols(Vc, spec, k).conj().T @ FD @ lead_cols(V, spec, k) for k in range(rho, spec.m + 1)]
    for pos in range(len(W) - 1, 0, -1):
        core._check_generic(W[pos], rho + pos, limit)
    E_next, Ec_next = lead_cols(V, spec, rho + 1), top_cols(Vc, spec, rho + 1)
    V_r1, Vc_rr = chain_pos(V, spec, rho, 1), chain_pos(Vc, spec, rho, rho)
    W_next = W[1] if len(W) > 1 else np.zeros((0, 0), complex)
    G = -_solve_generic(W_next, Ec_next.conj().T @ FD @ V_r1, rho + 1)
    G_c = -_solve_generic(W_next, E_next.conj().T @ FD @ Vc_rr, rho + 1, adjoint=True)
    S = Vc_rr.conj().T @ FD @ (V_r1 + E_next @ G)
    base = core.PerturbationAnalysis.from_blocks(rho, W, S, G, limit)
    # independent route: partition M11 = V_c^* Δ D V
    M11 = Vc.conj().T @ FD @ V
    alt = core.analyze(M11, spec, rho, limit)
    gap = _route_gap((W, S), (alt.W, alt.S))
    return StructuredAnalysis(base, "nonreal", spec, G_c=G_c, route_gap=gap)


def analyze_real(problem, rho, limit=core.W_COND_LIMIT):
    _require(problem, "delta_real")
    spec = problem.spec
    if spec.s_of(rho) == 0:
        raise SpecError(f"s_{rho} = 0")
    U = problem.chains["U"]
    FD = problem.form @ problem.perturbation
    W_hat = []
    for k in range(rho, spec.m + 1):
        E = lead_cols(U, spec, k)
        W_hat.append(E.conj().T @ FD @ E)
    herm = max(la.norm2(w - w.conj().T) / max(la.norm2(w), 1.0) for w in W_hat)
    W_hat = [(w + w.conj().T) / 2 for w in W_hat]
    sig = [np.concatenate([spec.sigma(j) for j in range(k, spec.m + 1)]) for k in range(rho, spec.m + 1)]
    W = [s[:, None] * w for s, w in zip(sig, W_hat)]
    for pos in range(len(W) - 1, 0, -1):
        core._check_generic(W[pos], rho + pos, limit)
    E_next = lead_cols(U, spec, rho + 1)
    U_r1 = chain_pos(U, spec, rho, 1)
    W_hat_next = W_hat[1] if len(W_hat) > 1 else np.zeros((0, 0), complex)
    G = -_solve_generic(W_hat_next, E_next.conj().T @ FD @ U_r1, rho + 1)
    S_hat = U_r1.conj().T @ FD @ (U_r1 + E_next @ G)
    herm = max(herm, la.norm2(S_hat - S_hat.conj().T) / max(la.norm2(S_hat), 1.0))
    S_hat = (S_hat + S_hat.conj().T) / 2
    Sigma = np.diag(spec.sigma(rho)).astype(complex)
    S = Sigma @ S_hat
    base = core.PerturbationAnalysis.from_blocks(rho, W, S, G, limit)
    full, _ = problem.target_coordinates()
    alt = core.analyze(full, spec, rho, limit)
    gap = _route_gap((W, S), (alt.W, alt.S))
    return StructuredAnalysis(base, "real", spec, Sigma=Sigma, S_hat=S_hat, W_hat=W_hat,
                              route_gap=gap, hermitian_gap=herm)


def analyze(problem, rho, limit=core.W_COND_LIMIT):
    if problem.spec.case == "delta_nonreal":
        return analyze_nonreal(problem, rho, limit)
    if problem.spec.case == "delta_real":
        return analyze_real(problem, rho, limit)
    raise SpecError(f"not a Δ-Hermitian case: {problem.spec.case}")


def predict(problem, analysis, t):
    """Predicted eigenvalues near the target (and near its conjugate)."""
    lam = problem.spec.eigenvalue
    near = core.predict_eigenvalues(lam, analysis.base, t)
    if analysis.case == "nonreal":
        return near, np.conj(near)
    return near, np.zeros(0, complex)


def predict_pair_basis(problem, analysis, t):
    spec, rho = problem.spec, analysis.rho
    lam = spec.eigenvalue
    theta = analysis.base.theta
    r = theta.shape[0]
    orders = core.remainder_orders(spec, rho)
    if analysis.case == "nonreal":
        V, Vc = problem.chains["V"], problem.chains["Vc"]
        first = chain_pos(V, spec, rho, 1) + lead_cols(V, spec, rho + 1) @ analysis.G
        last = chain_pos(Vc, spec, rho, rho) + top_cols(Vc, spec, rho + 1) @ analysis.G_c
        basis = np.hstack([forward_basis(V, first, spec, rho, t), backward_basis(Vc, last, spec, rho, t)])
        reduced = la.block_diag(lam * np.eye(r) + t ** (1 / rho) * theta,
                                np.conj(lam) * np.eye(r) + t ** (1 / rho) * theta.conj().T)
        orders = {"target": orders, "partner": {k: v[::-1] for k, v in orders.items()}}
    else:
        U = problem.chains["U"]
        first = chain_pos(U, spec, rho, 1) + lead_cols(U, spec, rho + 1) @ analysis.G
        basis = forward_basis(U, first, spec, rho, t)
        reduced = lam * np.eye(r) + t ** (1 / rho) * theta
        orders = {"target": orders}
    return core.SubspacePrediction(basis, reduced, t, rho, orders, analysis.predicted_gram,
                                   analysis.gram_scale, problem.form)


def _left_vector(S, gamma):
    """Left eigenvector y (y^* S = gamma y^*) of a simple eigenvalue."""
    w, Y = la.eig(S.conj().T)
    return Y[:, int(np.argmin(np.abs(w - np.conj(gamma))))]


def eigvec_prediction(problem, analysis, root, t):
    """Leading-order eigenvector for root number ``root`` and its partner.

    Returns a dict with ``right``, ``partner`` (the vector paired with
    ``right`` by the form), ``cond_exponent`` and, for real roots in the
    real case, the sign ``sigma``.
    """
    base = analysis.base
    rho = base.rho
    roots = base.roots
    w = roots[root]
    if np.min(np.abs(np.delete(roots, root) - w), initial=np.inf) < core.ROOT_GAP * max(1, abs(w)):
        raise SpecError("selected root is not simple")
    gi = base.root_index[root][0]
    q = base.gamma_vectors[:, gi]
    f = np.concatenate([q * w ** c for c in range(rho)])
    pred = predict_pair_basis(problem, analysis, t)
    r = rho * problem.spec.s_of(rho)
    out = {"cond_exponent": -(1.0 - 1.0 / rho), "sigma": None}
    if analysis.case == "nonreal":
        qc = _left_vector(base.S, base.gammas[gi])
        qc = qc / np.conj(rho * np.conj(w) ** (rho - 1) * (q.conj() @ qc))
        fc = np.concatenate([qc * np.conj(w) ** (rho - 1 - c) for c in range(rho)])
        out["right"] = pred.basis[:, :r] @ f
        out["partner"] = pred.basis[:, r:] @ fc
        return out
    kappa = rho * w ** (rho - 1) * (q.conj() @ analysis.Sigma @ q)
    if abs(w.imag) <= REAL_TOL * abs(w) and abs(kappa.imag) <= 1e-6 * abs(kappa):
        f = f / np.sqrt(abs(kappa.real))
        out["sigma"] = int(np.sign(kappa.real))
    out["right"] = pred.basis @ f
    out["partner"] = out["right"]
    return out


def classify_roots(S, Sigma, analysis, tol=REAL_TOL):
    """Per-root persistence classification for a Σ-Hermitian S.

    A root is ``conjugate-pair`` when it is nonreal or its gamma fails the
    parity/positivity rule, ``sufficient`` when it is real and the form Σ
    is definite on the gamma-eigenspace, and ``necessary-only`` otherwise.
    """
    rho = analysis.rho
    gammas = analysis.gammas
    scale = max(1.0, la.norm2(S))
    out = []
    for k, w in enumerate(analysis.roots):
        gi = analysis.root_index[k][0]
        g = gammas[gi]
        cluster = np.abs(gammas - g) <= tol * scale
        real_gamma = abs(g.imag) <= tol * scale
        necessary = real_gamma and (rho % 2 == 1 or g.real > 0)
        rec = {"root": complex(w), "gamma": complex(g), "gamma_index": gi,
               "gamma_tag": "real-candidate" if necessary else "conjugate-pair",
               "status": "conjugate-pair", "sign": None}
        if necessary and abs(w.imag) <= tol * max(abs(w), 1e-300):
            Q = la.null_space(S - g.real * np.eye(S.shape[0]), rtol=1e-7)
            mult = int(np.sum(cluster))
            status = "necessary-only"
            if Q.shape[1] == mult:
                h = np.linalg.eigvalsh(Q.conj().T @ Sigma @ Q)
                if np.all(h > tol) or np.all(h < -tol):
                    status = "sufficient"
                    rec["sign"] = int(np.sign(h[0]) * np.sign(w.real) ** (rho - 1))
            rec["status"] = status
        out.append(rec)
    return out


def classify_real_persistence(analysis):
    if analysis.case != "real":
        raise SpecError("persistence classification needs a real-case analysis")
    return classify_roots(analysis.base.S, analysis.Sigma, analysis.base)
