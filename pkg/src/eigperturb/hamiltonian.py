"""Hamiltonian pencils H + tT with J_n H and J_n T Hermitian.

The analyses assemble Ψ_k directly from the chain matrices.  The same
predictions are also obtained by rewriting the problem as the Δ-Hermitian
pencil -i(H + tT) with Δ = -i J_n and running the ``delta`` analyses; the
two routes are compared in ``route_gap``.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import core, delta
from . import linalg as la
from .canonical import gamma_block, symplectic_J
from .delta import backward_basis, chain_pos, forward_basis, lead_cols, top_cols
from .errors import NonGenericError, SpecError, StructureError


def check_hamiltonian(H, tol=1e-10):
    H = la.as_complex(H)
    n2 = H.shape[0]
    if H.ndim != 2 or H.shape[1] != n2 or n2 % 2:
        raise SpecError(f"Hamiltonian check needs an even square matrix, got {H.shape}")
    JH = symplectic_J(n2 // 2) @ H
    return la.fro(JH - JH.conj().T) <= tol * max(la.fro(H), np.finfo(float).tiny)


def to_delta_hermitian(H, T):
    for name, M in (("H", H), ("T", T)):
        if not check_hamiltonian(M):
            raise StructureError(f"{name} is not Hamiltonian")
    J = symplectic_J(la.as_complex(H).shape[0] // 2)
    C, D, Delta = -1j * la.as_complex(H), -1j * la.as_complex(T), -1j * J
    if not delta.check_structure(C, Delta):
        raise StructureError("-iH is not (-iJ)-Hermitian")
    return C, D, Delta


def phase_matrix(spec):
    """diag over blocks of diag(I, -i I, ..., (-i)^(j-1) I)."""
    d = np.empty(spec.p, complex)
    for j in range(1, spec.m + 1):
        for i in range(1, j + 1):
            d[spec.rows(j, i)] = (-1j) ** (i - 1)
    return np.diag(d)


def delta_problem(problem):
    """The equivalent Δ-Hermitian problem (-iH, -iT, -iJ) with mapped chains."""
    C, D, Delta = to_delta_hermitian(problem.A, problem.perturbation)
    spec = problem.spec
    if spec.case == "ham_nonimaginary":
        Ph = phase_matrix(spec)
        chains = {"V": problem.chains["Xi"] @ Ph.conj().T,
                  "Vc": 1j * problem.chains["Xi_c"] @ Ph.conj().T}
        new_spec = spec.with_case("delta_nonreal", -1j * spec.eigenvalue)
    elif spec.case == "ham_imaginary":
        chains = {"U": problem.chains["Phi"]}
        new_spec = spec.with_case("delta_real", complex((-1j * spec.eigenvalue).real, 0.0))
    else:
        raise SpecError(f"not a Hamiltonian case: {spec.case}")
    comp = -1j * np.asarray(problem.complement_spectrum)
    return replace(problem, kind="delta_hermitian", A=C, form=Delta, perturbation=D,
                   spec=new_spec, chains=chains, complement_spectrum=comp)


@dataclass
class HamiltonianAnalysis:
    base: core.PerturbationAnalysis
    case: str
    spec: object = field(repr=False)
    Psi: list = field(default=None, repr=False)
    S_hat: np.ndarray = None
    G_hat_c: np.ndarray = None
    Sigma: np.ndarray = None
    route_gap: float = 0.0
    generic_gap: float = 0.0
    hermitian_gap: float = 0.0
    persistence: list = None

    @property
    def rho(self):
        return self.base.rho

    @property
    def inertia(self):
        return None if self.persistence is None else [r["sign"] for r in self.persistence]

    @property
    def predicted_gram(self):
        rho, s = self.rho, self.spec.s_of(self.rho)
        if self.case == "nonimaginary":
            return symplectic_J(rho * s)
        return 1j * gamma_block(self.spec, rho)

    @property
    def gram_scale(self):
        return 1.0 - 1.0 / self.rho


def _solve(W, rhs, k, adjoint=False):
    return delta._solve_generic(W, rhs, k, adjoint)


def _multiset_gap(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if a.size != b.size:
        return np.inf
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


def _routes(problem, an, limit):
    """Fill generic_gap (partition path) and route_gap (Δ-Hermitian path)."""
    rho = an.rho
    _, B = problem.target_coordinates()
    alt = core.analyze(B, problem.spec, rho, limit)
    an.generic_gap = delta._route_gap((an.base.W, an.base.S), (alt.W, alt.S))
    dp = delta_problem(problem)
    dan = delta.analyze(dp, rho, limit)
    near_h, _ = predict(problem, an, 1.0)
    near_d, _ = delta.predict(dp, dan, 1.0)
    an.route_gap = _multiset_gap(near_h, 1j * near_d)
    return an


def analyze_nonimaginary(problem, rho, limit=core.W_COND_LIMIT, cross_check=True):
    spec = problem.spec
    if spec.case != "ham_nonimaginary":
        raise SpecError(f"expected ham_nonimaginary, got {spec.case}")
    if spec.s_of(rho) == 0:
        raise SpecError(f"s_{rho} = 0")
    Xi, Xic = problem.chains["Xi"], problem.chains["Xi_c"]
    JT = problem.form @ problem.perturbation
    Psi = [top_cols(Xic, spec, k).conj().T @ JT @ lead_cols(Xi, spec, k) for k in range(rho, spec.m + 1)]
    for pos in range(len(Psi) - 1, 0, -1):
        core._check_generic(Psi[pos], rho + pos, limit)
    Y, Yc = lead_cols(Xi, spec, rho + 1), top_cols(Xic, spec, rho + 1)
    X1, Xc_rr = chain_pos(Xi, spec, rho, 1), chain_pos(Xic, spec, rho, rho)
    P_next = Psi[1] if len(Psi) > 1 else np.zeros((0, 0), complex)
    G = -_solve(P_next, Yc.conj().T @ JT @ X1, rho + 1)
    G_c = -_solve(P_next, Y.conj().T @ JT @ Xc_rr, rho + 1, adjoint=True)
    S_hat = Xc_rr.conj().T @ JT @ (X1 + Y @ G)
    base = core.PerturbationAnalysis.from_blocks(rho, [-p for p in Psi], -S_hat, G, limit)
    an = HamiltonianAnalysis(base, "nonimaginary", spec, Psi=Psi, S_hat=S_hat, G_hat_c=G_c)
    return _routes(problem, an, limit) if cross_check else an


def analyze_imaginary(problem, rho, limit=core.W_COND_LIMIT, cross_check=True):
    spec = problem.spec
    if spec.case != "ham_imaginary":
        raise SpecError(f"expected ham_imaginary, got {spec.case}")
    if spec.s_of(rho) == 0:
        raise SpecError(f"s_{rho} = 0")
    Phi = problem.chains["Phi"]
    JT = problem.form @ problem.perturbation
    Psi = []
    for k in range(rho, spec.m + 1):
        Y = lead_cols(Phi, spec, k)
        Psi.append(Y.conj().T @ JT @ Y)
    herm = max(la.norm2(P - P.conj().T) / max(la.norm2(P), 1.0) for P in Psi)
    Psi = [(P + P.conj().T) / 2 for P in Psi]
    sig = [np.concatenate([spec.sigma(j) for j in range(k, spec.m + 1)]) for k in range(rho, spec.m + 1)]
    W = [-s[:, None] * P for s, P in zip(sig, Psi)]
    for pos in range(len(W) - 1, 0, -1):
        core._check_generic(W[pos], rho + pos, limit)
    Y = lead_cols(Phi, spec, rho + 1)
    P1 = chain_pos(Phi, spec, rho, 1)
    P_next = Psi[1] if len(Psi) > 1 else np.zeros((0, 0), complex)
    G = -_solve(P_next, Y.conj().T @ JT @ P1, rho + 1)
    S_hat = P1.conj().T @ JT @ (P1 + Y @ G)
    herm = max(herm, la.norm2(S_hat - S_hat.conj().T) / max(la.norm2(S_hat), 1.0))
    S_hat = (S_hat + S_hat.conj().T) / 2
    Sigma = np.diag(spec.sigma(rho)).astype(complex)
    base = core.PerturbationAnalysis.from_blocks(rho, W, -Sigma @ S_hat, G, limit)
    an = HamiltonianAnalysis(base, "imaginary", spec, Psi=Psi, S_hat=S_hat, Sigma=Sigma,
                             hermitian_gap=herm)
    an.persistence = persistence_analysis(an)
    return _routes(problem, an, limit) if cross_check else an


def analyze(problem, rho, limit=core.W_COND_LIMIT, cross_check=True):
    if problem.spec.case == "ham_nonimaginary":
        return analyze_nonimaginary(problem, rho, limit, cross_check)
    if problem.spec.case == "ham_imaginary":
        return analyze_imaginary(problem, rho, limit, cross_check)
    raise SpecError(f"not a Hamiltonian case: {problem.spec.case}")


def predict(problem, analysis, t):
    """(near, mirror): predictions at the target and at -conj(target)."""
    lam = problem.spec.eigenvalue
    step = t ** (1.0 / analysis.rho) * analysis.base.roots
    if analysis.case == "nonimaginary":
        near = lam + step
        return near, -np.conj(near)
    return lam + 1j * step, np.zeros(0, complex)


def predict_pair_basis(problem, analysis, t):
    spec, rho = problem.spec, analysis.rho
    lam = spec.eigenvalue
    theta = analysis.base.theta
    r = theta.shape[0]
    orders = core.remainder_orders(spec, rho)
    if analysis.case == "nonimaginary":
        Xi, Xic = problem.chains["Xi"], problem.chains["Xi_c"]
        first = chain_pos(Xi, spec, rho, 1) + lead_cols(Xi, spec, rho + 1) @ analysis.base.G
        last = chain_pos(Xic, spec, rho, rho) + top_cols(Xic, spec, rho + 1) @ analysis.G_hat_c
        basis = np.hstack([forward_basis(Xi, first, spec, rho, t), backward_basis(Xic, last, spec, rho, t)])
        K = lam * np.eye(r) + t ** (1 / rho) * theta
        reduced = la.block_diag(K, -K.conj().T)
        orders = {"target": orders, "partner": {k: v[::-1] for k, v in orders.items()}}
    else:
        Phi = problem.chains["Phi"]
        first = chain_pos(Phi, spec, rho, 1) + lead_cols(Phi, spec, rho + 1) @ analysis.base.G
        basis = forward_basis(Phi, first, spec, rho, t)
        reduced = lam * np.eye(r) + 1j * t ** (1 / rho) * theta
        orders = {"target": orders}
    return core.SubspacePrediction(basis, reduced, t, rho, orders, analysis.predicted_gram,
                                   analysis.gram_scale, problem.form)


_STATUS = {"conjugate-pair": "leaves-axis",
           "sufficient": "stays-imaginary-sufficient",
           "necessary-only": "stays-imaginary-necessary-only"}


def persistence_analysis(analysis):
    """Per-root fate of the imaginary eigenvalue and predicted inertia index."""
    if analysis.case != "imaginary":
        raise SpecError("persistence analysis needs an imaginary-case analysis")
    recs = delta.classify_roots(analysis.base.S, analysis.Sigma, analysis.base)
    for r in recs:
        r["status"] = _STATUS[r["status"]]
    return recs


def semidefinite_case(problem, half_rho, limit=core.W_COND_LIMIT):
    """Even-block imaginary eigenvalue with T = J K, K positive semidefinite.

    ``half_rho`` is k for blocks of size 2k; the splitting order is 1/(2k).
    """
    spec = problem.spec
    if spec.case != "ham_imaginary":
        raise SpecError("the semidefinite case needs an imaginary eigenvalue")
    rho = 2 * int(half_rho)
    if rho > spec.m or spec.s_of(rho) == 0:
        raise SpecError(f"no Jordan blocks of size {rho}")
    for k in range(1, spec.m + 1):
        if k % 2 and spec.s_of(k):
            raise SpecError(f"odd block size {k} present; all blocks must have even size")
        if spec.signs[k - 1] != spec.s_of(k):
            raise SpecError(f"block size {k} carries negative signs; all signs must be +1")
    K = -problem.form @ problem.perturbation
    if la.fro(K - K.conj().T) > 1e-10 * max(la.fro(K), 1.0):
        raise StructureError("K = -J T is not Hermitian")
    K = (K + K.conj().T) / 2
    kmin = float(np.linalg.eigvalsh(K)[0])
    if kmin < -1e-12 * max(la.norm2(K), 1.0):
        raise SpecError(f"K is indefinite (min eigenvalue {kmin:.3g})")
    Phi = problem.chains["Phi"]
    w_min = {}
    for k in range(2, spec.m + 1, 2):
        Y = lead_cols(Phi, spec, k)
        Wk = Y.conj().T @ K @ Y
        ev = np.linalg.eigvalsh((Wk + Wk.conj().T) / 2)
        w_min[k] = float(ev[0])
        if ev[0] <= 1e-12 * max(la.norm2(K), 1.0) * max(la.norm2(Y) ** 2, 1.0):
            raise NonGenericError(k, np.inf, f"W_{k} is not positive definite (min eigenvalue {ev[0]:.3g})")
    an = analyze_imaginary(problem, rho, limit)
    alpha = spec.eigenvalue.imag
    branches, off_axis = [], []
    for rec in an.persistence:
        entry = {"root": rec["root"], "gamma": rec["gamma"]}
        if rec["status"] == "leaves-axis":
            off_axis.append(entry)
        else:
            entry["branch"] = "+" if rec["root"].real > 0 else "-"
            entry["inertia"] = rec["sign"]
            entry["status"] = rec["status"]
            branches.append(entry)
    return {"block_size": rho, "half_size": int(half_rho), "order": f"1/{rho}", "alpha": alpha,
            "K_min_eigenvalue": kmin, "W_min_eigenvalue": w_min,
            "gammas": [complex(g) for g in an.base.gammas],
            "imaginary_branches": branches, "off_axis_roots": off_axis, "analysis": an}
