"""Structured canonical forms and randomized test problems with known chains.

Problems are assembled in canonical coordinates (target Jordan block plus
a diagonal complement) and then moved to generic coordinates by a random
similarity that preserves the form.  The chain matrices are carried along,
so the eigenstructure of every generated problem is known exactly.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import linalg as la
from .core import generic_conditions
from .errors import NonGenericError, SpecError, StructureError
from .jordan import JordanSpec

MAX_MAGNITUDE = 2.0
MIN_GAP = 0.5
RANDOM_GAP = 1.0
GENERIC_COND = 1e6

CHAIN_KEYS = {
    "delta_nonreal": ("V", "Vc"),
    "delta_real": ("U",),
    "ham_nonimaginary": ("Xi", "Xi_c"),
    "ham_imaginary": ("Phi",),
}


def symplectic_J(n):
    J = np.zeros((2 * n, 2 * n), complex)
    J[:n, n:] = np.eye(n)
    J[n:, :n] = -np.eye(n)
    return J


def build_nilpotent(spec):
    p = spec.p
    N = np.zeros((p, p), complex)
    for j in range(1, spec.m + 1):
        sj = spec.s_of(j)
        for i in range(1, j):
            N[spec.rows(j, i), spec.rows(j, i + 1)] = np.eye(sj)
    return N


def gamma_block(spec, k):
    """k x k block anti-diagonal matrix with Σ_k on the anti-diagonal."""
    sk = spec.s_of(k)
    sig = np.diag(spec.sigma(k)).astype(complex)
    G = np.zeros((k * sk, k * sk), complex)
    for i in range(k):
        G[i * sk:(i + 1) * sk, (k - 1 - i) * sk:(k - i) * sk] = sig
    return G


def build_form_T(spec):
    """Hermitian involutory form of the target block (Δ-Hermitian normalization)."""
    p = spec.p
    if spec.paired:
        F = np.zeros((2 * p, 2 * p), complex)
        F[:p, p:] = np.eye(p)
        F[p:, :p] = np.eye(p)
        return F
    return la.block_diag(*[gamma_block(spec, k) for k in range(1, spec.m + 1)])


def canonical_target(spec):
    """(A_T, F_T): target block and its form block as used in ambient coordinates.

    F_T is Hermitian for Δ-Hermitian cases and skew-Hermitian (a block of J)
    for Hamiltonian cases.
    """
    p = spec.p
    N = build_nilpotent(spec)
    lam = spec.eigenvalue
    L = lam * np.eye(p) + N
    if spec.case == "delta_nonreal":
        return la.block_diag(L, L.conj().T), build_form_T(spec)
    if spec.case == "delta_real":
        return L, build_form_T(spec)
    if spec.case == "ham_nonimaginary":
        return la.block_diag(L, -L.conj().T), symplectic_J(p)
    return lam * np.eye(p) + 1j * N, 1j * build_form_T(spec)


# ---------------------------------------------------------------- complement

def _mirror(case, z):
    return np.conj(z) if case.startswith("delta") else -np.conj(z)


def _far(z, taken, gap):
    return all(abs(z - w) >= gap for w in taken)


def _complement_blocks(spec, items):
    """Turn complement items into (eigenvalues, A block, form block) triples."""
    blocks = []
    ham = spec.kind == "hamiltonian"
    for it in items:
        z = complex(*it["eigenvalue"]) if isinstance(it["eigenvalue"], (list, tuple)) else complex(it["eigenvalue"])
        sign = int(it.get("sign", 1))
        if sign not in (1, -1):
            raise SpecError(f"complement sign must be +1 or -1, got {sign}")
        on_axis = (z.real == 0) if ham else (z.imag == 0)
        if on_axis:
            blocks.append(([z], np.array([[z]]), np.array([[1j * sign if ham else sign]], complex)))
        else:
            w = -np.conj(z) if ham else np.conj(z)
            form = symplectic_J(1) if ham else np.array([[0, 1], [1, 0]], complex)
            blocks.append(([z, w], np.diag([z, w]), form))
    return blocks


def _check_collisions(spec, blocks, gap=MIN_GAP):
    lam = spec.eigenvalue
    targets = {lam, _mirror(spec.case, lam)}
    for vals, _, _ in blocks:
        for z in vals:
            d = min(abs(z - w) for w in targets)
            if d < gap:
                raise SpecError(f"complement eigenvalue {z} within {d:.3g} of the target spectrum")


def draw_complement(spec, rng, count=None):
    """Random complement request compatible with the target's form.

    Δ-Hermitian: one real singleton and one conjugate pair.
    Hamiltonian: one (λ, -conj λ) pair plus imaginary singletons whose
    signs make the overall form J_n-compatible.
    """
    lam = spec.eigenvalue
    taken = [lam, _mirror(spec.case, lam)]
    items = []

    def pick(on_axis):
        for _ in range(10000):
            z = lam + 2.0 * la.random_complex(rng, ())
            if spec.kind == "hamiltonian":
                z = complex(0.0, z.imag) if on_axis else z
                ok = on_axis or abs(z.real) >= 0.25
            else:
                z = complex(z.real, 0.0) if on_axis else z
                ok = on_axis or abs(z.imag) >= 0.25
            if ok and _far(z, taken[:2], RANDOM_GAP) and _far(z, taken[2:], MIN_GAP) \
                    and _far(_mirror(spec.case, z), taken[2:], MIN_GAP):
                taken.extend([z, _mirror(spec.case, z)])
                return z
        raise SpecError("could not place complement eigenvalues")

    if spec.kind == "delta_hermitian":
        n_pairs = 1 if count is None else count // 2
        n_single = 1 if count is None else count - 2 * n_pairs
        for _ in range(n_single):
            z = pick(True)
            items.append({"eigenvalue": [z.real, z.imag], "sign": int(rng.choice([1, -1]))})
        for _ in range(n_pairs):
            z = pick(False)
            items.append({"eigenvalue": [z.real, z.imag]})
        return items
    pos, neg = (spec.p, spec.p) if spec.paired else spec.sign_split()
    excess = pos - neg
    signs = [-int(np.sign(excess))] * abs(excess)
    if count is None:
        signs = signs or [1, -1]
        extra = 2
    else:
        extra = max(0, count - abs(excess))
    for sg in signs:
        z = pick(True)
        items.append({"eigenvalue": [z.real, z.imag], "sign": sg})
    for _ in range(extra // 2):
        z = pick(False)
        items.append({"eigenvalue": [z.real, z.imag]})
    return items


# ---------------------------------------------------------------- problem

@dataclass
class StructuredProblem:
    kind: str
    A: np.ndarray
    form: np.ndarray
    perturbation: np.ndarray
    spec: JordanSpec
    chains: dict
    complement_spectrum: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.A.shape[0]

    def chain_matrix(self):
        keys = CHAIN_KEYS[self.spec.case]
        missing = [k for k in keys if k not in self.chains]
        if missing:
            raise StructureError(f"missing chain matrices {missing} for case {self.spec.case}")
        return np.hstack([la.as_complex(self.chains[k]) for k in keys])

    def target_coordinates(self, matrix=None):
        """(full, B): ``matrix`` (default: the perturbation) in chain coordinates.

        ``full`` is F_T^{-1} X^* F matrix X.  ``B`` is the p x p block that
        plays the role of the perturbation of lambda*I + N.
        """
        P = self.perturbation if matrix is None else matrix
        if P is None:
            raise StructureError("problem has no perturbation")
        X = self.chain_matrix()
        return self._chain_blocks(P @ X)

    def chain_defect(self):
        """(full, B) for the residual A X - X A_T, formed in extended precision.

        This is the part of the stored A that is not exactly defective; it
        behaves like an extra perturbation of size ||B||/t at parameter t.
        """
        X = self.chain_matrix()
        A_T, _ = canonical_target(self.spec)
        X_ld = X.astype(np.clongdouble)
        R = self.A.astype(np.clongdouble) @ X_ld - X_ld @ A_T.astype(np.clongdouble)
        return self._chain_blocks(R.astype(complex))

    def _chain_blocks(self, MX):
        X = self.chain_matrix()
        _, F_T = canonical_target(self.spec)
        full = la.solve(F_T, X.conj().T @ self.form @ MX)
        p = self.spec.p
        if self.spec.paired:
            return full, full[:p, :p]
        if self.spec.case == "ham_imaginary":
            return full, full / 1j
        return full, full

    def validate(self, tol=1e-10):
        """Raise StructureError unless all structural identities hold."""
        A, F = self.A, self.form
        n = A.shape[0]
        if A.shape != (n, n) or F.shape != (n, n):
            raise StructureError("A and form must be square of equal size")
        if self.kind == "hamiltonian":
            if n % 2:
                raise StructureError("Hamiltonian problems need even dimension")
            if not np.array_equal(F, symplectic_J(n // 2)):
                raise StructureError("form must be exactly J_n for Hamiltonian problems")
        else:
            r = la.fro(F - F.conj().T)
            if r > tol * la.fro(F):
                raise StructureError("form is not Hermitian", r)
        if la.cond(F) > 1e12:
            raise StructureError("form is singular")
        for name, M in (("A", A), ("perturbation", self.perturbation)):
            if M is None:
                continue
            FM = F @ M
            r = la.fro(FM - FM.conj().T)
            if r > tol * max(la.fro(FM), 1.0):
                raise StructureError(f"{name} violates the structure (residual {r:.3g})", r)
        X = self.chain_matrix()
        A_T, F_T = canonical_target(self.spec)
        if X.shape != (n, A_T.shape[0]):
            raise StructureError(f"chains have shape {X.shape}, expected {(n, A_T.shape[0])}")
        scale = la.norm2(A) * max(la.norm2(X), 1.0)
        r = la.norm2(A @ X - X @ A_T)
        if r > tol * max(scale, 1.0):
            raise StructureError(f"chains are inconsistent with A (residual {r:.3g})", r)
        r = la.norm2(X.conj().T @ F @ X - F_T)
        if r > tol * max(la.norm2(X) ** 2 * la.norm2(F), 1.0):
            raise StructureError(f"chains do not normalize the form (residual {r:.3g})", r)
        lam = self.spec.eigenvalue
        for z in np.atleast_1d(self.complement_spectrum):
            if abs(z - lam) < 1e-8 or abs(z - _mirror(self.spec.case, lam)) < 1e-8:
                raise StructureError(f"target eigenvalue collides with complement eigenvalue {z}")
        return True


def build_canonical_pair(spec, complement=None, rng=None):
    """Problem without perturbation.  ``complement`` is a list of items
    ``{"eigenvalue": [re, im], "sign": ±1}`` or None for a random draw."""
    if complement is None:
        complement = draw_complement(spec, rng if rng is not None else np.random.default_rng(0))
    blocks = _complement_blocks(spec, complement)
    _check_collisions(spec, blocks)
    A_T, F_T = canonical_target(spec)
    A_can = la.block_diag(A_T, *[b[1] for b in blocks])
    F_can = la.block_diag(F_T, *[b[2] for b in blocks])
    comp = np.array([z for b in blocks for z in b[0]], dtype=complex)
    dim_T = A_T.shape[0]
    n_tot = A_can.shape[0]
    if spec.kind == "delta_hermitian":
        A, form, X = A_can, F_can, np.eye(n_tot, dtype=complex)[:, :dim_T]
    else:
        if n_tot % 2:
            raise SpecError("Hamiltonian problem has odd total dimension; adjust the complement")
        w, Q = la.eigh(-1j * F_can)
        if np.sum(w > 0) != n_tot // 2:
            raise SpecError("complement signs do not balance the form to J_n")
        Q = np.hstack([Q[:, w > 0], Q[:, w < 0]])
        h = n_tot // 2
        I = np.eye(h)
        Z = np.block([[I, I], [1j * I, -1j * I]]) / np.sqrt(2)
        Phi0 = Z @ Q.conj().T
        A = Phi0 @ A_can @ Phi0.conj().T
        form = symplectic_J(h)
        X = Phi0[:, :dim_T]
    keys = CHAIN_KEYS[spec.case]
    if len(keys) == 2:
        chains = {keys[0]: X[:, :spec.p], keys[1]: X[:, spec.p:]}
    else:
        chains = {keys[0]: X}
    return StructuredProblem(spec.kind, A, form, None, spec, chains, comp,
                             {"complement": complement})


def random_structured_similarity(form, magnitude, rng):
    """exp(X) with X = form^{-1} K, where K is skew-Hermitian (Hermitian form)
    or Hermitian (skew-Hermitian form J).  ||X||_2 is set to ``magnitude``."""
    form = la.as_complex(form)
    n = form.shape[0]
    magnitude = float(magnitude)
    if magnitude < 0:
        raise SpecError("similarity magnitude must be nonnegative")
    magnitude = min(magnitude, MAX_MAGNITUDE)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    H = la.random_hermitian(rng, n)
    hermitian_form = la.fro(form - form.conj().T) <= 1e-14 * la.fro(form)
    K = 1j * H if hermitian_form else H
    X = la.solve(form, K)
    if magnitude == 0:
        return np.eye(n, dtype=complex)
    X *= magnitude / la.norm2(X)
    return la.expm(X)


def random_structured_perturbation(kind, form, rng, M=None):
    """D = form^{-1} M (Δ-Hermitian) or T = -J M (Hamiltonian), M Hermitian."""
    form = la.as_complex(form)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if M is None:
        M = la.random_hermitian(rng, form.shape[0])
    M = (la.as_complex(M) + la.adjoint(M)) / 2
    if kind == "hamiltonian":
        return -form @ M
    if kind == "delta_hermitian":
        return la.solve(form, M)
    raise SpecError(f"unknown kind {kind!r}")


def project_structure(M, form):
    """Nearest matrix M' with form @ M' Hermitian, i.e. form^{-1} herm(form M).

    For the signed-permutation forms produced here every step is exact in
    floating point, so the result carries the structure to the last bit.
    """
    FM = la.as_complex(form) @ la.as_complex(M)
    return la.solve(form, (FM + FM.conj().T) / 2)


def conjugate_problem(problem, U):
    U = la.as_complex(U)
    Uinv = la.solve(U, np.eye(U.shape[0]))
    A = project_structure(U @ problem.A @ Uinv, problem.form)
    P = problem.perturbation
    if P is not None:
        P = project_structure(U @ P @ Uinv, problem.form)
    chains = {k: U @ v for k, v in problem.chains.items()}
    out = replace(problem, A=A, perturbation=P, chains=chains)
    out.validate(tol=1e-9)
    return out


def perturbation_from_K(problem, K):
    """T = J K for a Hamiltonian problem."""
    return problem.form @ la.as_complex(K)


def random_K(rng, n, mode):
    if mode == "identity":
        return np.eye(n, dtype=complex)
    if mode in ("positive", "negative"):
        G = la.random_complex(rng, (n, n))
        K = G @ G.conj().T / n + 0.1 * np.eye(n)
        return K if mode == "positive" else -K
    if mode == "indefinite":
        return la.random_hermitian(rng, n)
    raise SpecError(f"unknown K mode {mode!r}")


def generate_problem(cfg):
    """Build a problem from a config dict (see README for the schema)."""
    spec = cfg["spec"] if isinstance(cfg["spec"], JordanSpec) else JordanSpec.from_dict(cfg["spec"])
    seed = int(cfg.get("seed", 0))
    rng = np.random.default_rng(seed)
    comp = cfg.get("complement")
    if isinstance(comp, dict):
        comp = draw_complement(spec, rng, int(comp.get("count", 0)) or None)
    elif comp is None:
        comp = draw_complement(spec, rng)
    prob = build_canonical_pair(spec, comp, rng)
    mag = float(cfg.get("similarity_magnitude", 0.5))
    U = random_structured_similarity(prob.form, mag, rng)
    prob = conjugate_problem(prob, U)
    pert = cfg.get("perturbation", {"type": "random"})
    limit = float(cfg.get("generic_cond_limit", GENERIC_COND))
    tries = int(cfg.get("max_tries", 200))
    last = None
    for _ in range(tries):
        if pert.get("type", "random") == "JK":
            if prob.kind != "hamiltonian":
                raise SpecError("perturbation type JK needs a Hamiltonian problem")
            K = random_K(rng, prob.n, pert.get("K", "positive"))
            P = perturbation_from_K(prob, K)
        else:
            P = random_structured_perturbation(prob.kind, prob.form, rng)
        cand = replace(prob, perturbation=project_structure(P, prob.form))
        _, B = cand.target_coordinates()
        conds = generic_conditions(B, spec)
        worst = int(np.argmax(conds))
        if conds[worst] <= limit:
            cand.meta = dict(prob.meta, seed=seed, similarity_magnitude=mag,
                             perturbation=dict(pert), W_cond=[float(c) for c in conds])
            cand.validate()
            return cand
        last = (worst + 1, conds[worst])
    raise NonGenericError(last[0], last[1], f"no generic perturbation found in {tries} draws")
