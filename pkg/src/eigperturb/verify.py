"""Sweep t, compare predictions with a dense eigensolver, fit the orders.

At every t all eigenvalues of A + tP are matched jointly against the union
of predictions (every order with s_rho > 0, the mirrored cluster, and the
complement).  Subspace checks use one-root cluster restrictions: each
actual eigenvector is compared with the predicted basis applied to the
corresponding eigenvector of the reduced matrix.
"""

import copy
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import core, delta, hamiltonian
from . import linalg as la
from .errors import ClusterError, NonGenericError, SingularMatrixError, SpecError
from .serialize import to_jsonable

DEFAULT_TOLERANCES = {
    "order_tol": 0.05,
    "residual_margin": 0.1,
    "angle_tol": 0.05,
    "gram_min": 0.95,
    "symmetry_tol": 1e-10,
    "eigvec_cond_flag": 1e8,
    "residual_floor": 1e2,
    "real_rel_tol": 1e-4,
    "w_cond_limit": core.W_COND_LIMIT,
    "refine": True,
    "floor_ratio": 0.1,
    "asymptotic_rel_tol": 0.1,
}


def default_grid(start=1e-2, stop=1e-9, points=8):
    if not (start > stop > 0) or points < 4:
        raise SpecError("t grid needs start > stop > 0 and at least 4 points")
    return np.geomspace(start, stop, int(points))


# ---------------------------------------------------------------- primitives

def match_eigenvalues(predicted, actual):
    """perm with actual[perm[i]] assigned to predicted[i], minimizing total distance."""
    predicted = np.asarray(predicted, complex)
    actual = np.asarray(actual, complex)
    if predicted.shape != actual.shape:
        raise SpecError(f"cannot match {predicted.size} predictions to {actual.size} eigenvalues")
    if predicted.size == 0:
        return np.zeros(0, int)
    cost = np.abs(predicted[:, None] - actual[None, :])
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(predicted.size, int)
    perm[rows] = cols
    return perm


def invariant_subspace(A, cluster, eigvecs=None, eigvals=None):
    """(Q, cond): orthonormal span of the eigenvectors for ``cluster``.

    ``cond`` is the condition number of the selected unit eigenvectors; a
    large value flags a nearly defective cluster.
    """
    if eigvecs is None:
        eigvals, eigvecs = la.eig(A)
    cluster = np.atleast_1d(np.asarray(cluster, complex))
    cost = np.abs(cluster[:, None] - eigvals[None, :])
    rows, cols = linear_sum_assignment(cost)
    X = eigvecs[:, cols[np.argsort(rows)]]
    X = X / np.linalg.norm(X, axis=0)
    return la.orthonormalize(X, rtol=1e-14), la.cond(X)


def principal_angles(Q1, Q2):
    return la.principal_angles(Q1, Q2)


def fit_order(ts, values):
    ts = np.asarray(ts, float)
    values = np.asarray(values, float)
    if ts.size != values.size or ts.size < 3:
        raise SpecError("fit_order needs at least 3 paired points")
    if np.any(ts <= 0) or np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise SpecError("fit_order needs positive finite data")
    return float(np.polyfit(np.log(ts), np.log(values), 1)[0])


def gram_residual(U, form, expected, scale_exp, t):
    U = la.as_complex(U)
    return la.fro(U.conj().T @ form @ U - t ** scale_exp * la.as_complex(expected))


# ---------------------------------------------------------------- dispatch

def analyze_problem(problem, rho, limit=core.W_COND_LIMIT):
    if problem.kind == "hamiltonian":
        return hamiltonian.analyze(problem, rho, limit)
    return delta.analyze(problem, rho, limit)


def predictions(problem, an, t):
    mod = hamiltonian if problem.kind == "hamiltonian" else delta
    return mod.predict(problem, an, t)


def pair_basis(problem, an, t):
    mod = hamiltonian if problem.kind == "hamiltonian" else delta
    return mod.predict_pair_basis(problem, an, t)


def root_statuses(problem, an):
    """Persistence record per root for real/imaginary cases, else None."""
    if problem.spec.case == "delta_real":
        return delta.classify_real_persistence(an)
    if problem.spec.case == "ham_imaginary":
        return an.persistence
    return None


def corrupt_analysis(an, entry=(0, 0), factor=1.1):
    """Copy of ``an`` with one entry of S scaled (negative control)."""
    S = an.base.S.copy()
    S[entry] *= factor
    out = copy.copy(an)
    out.base = an.base.with_S(S)
    return out


def _mirror_map(case):
    if case.startswith("delta"):
        return np.conj
    return lambda z: -np.conj(z)


def symmetry_error(values, case):
    """Largest gap between the spectrum and its structural mirror."""
    values = np.asarray(values, complex)
    mirrored = _mirror_map(case)(values)
    perm = match_eigenvalues(values, mirrored)
    return float(np.max(np.abs(values - mirrored[perm]))) if values.size else 0.0


# ---------------------------------------------------------------- sweep

@dataclass
class SweepReport:
    case: str
    rho: int
    t_grid: list
    records: list
    fitted: dict
    verdict: dict
    threshold: float
    tolerances: dict
    analysis_summary: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(v for k, v in self.verdict.items() if v is not None)

    def to_dict(self):
        return to_jsonable({"case": self.case, "rho": self.rho, "t_grid": self.t_grid,
                          "threshold": self.threshold, "fitted": self.fitted,
                          "verdict": self.verdict, "passed": self.passed,
                          "tolerances": self.tolerances, "analysis": self.analysis_summary,
                          "records": self.records})

    def csv_rows(self):
        for rec in self.records:
            for pr in rec["pairs"]:
                yield [rec["t"], self.rho, pr["pred"].real, pr["pred"].imag, pr["act"].real,
                       pr["act"].imag, pr["residual"], rec["gram_residual"], rec["max_angle"]]


def _prediction_table(problem, analyses, t):
    """Flat list of predictions with labels (rho, half, root)."""
    vals, labels = [], []
    for rho, an in analyses.items():
        near, mirror = predictions(problem, an, t)
        for k, z in enumerate(near):
            vals.append(z)
            labels.append((rho, "near", k))
        for k, z in enumerate(mirror):
            vals.append(z)
            labels.append((rho, "mirror", k))
    for k, z in enumerate(np.atleast_1d(problem.complement_spectrum)):
        vals.append(z)
        labels.append((0, "complement", k))
    return np.array(vals, complex), labels


def _reduced_eigvecs(problem, an, pred):
    """Eigenvectors of the reduced matrix, one column per prediction of ``an``.

    The near half uses the one-root restrictions [q; q w; ...]; the mirror
    half (paired cases) uses the eigenvectors of the partner block.
    """
    base = an.base
    r = base.theta.shape[0]
    F, _, _ = core.restrict_cluster(base, range(r), check_gap=False)
    if not problem.spec.paired:
        return F, np.zeros((0, 0), complex)
    K2 = pred.reduced[r:, r:]
    lv, Phi2 = la.eig(K2)
    _, mirror = predictions(problem, an, pred.t)
    perm = match_eigenvalues(mirror, lv)
    return F, Phi2[:, perm]


def construction_floor(problem, rho, t, B=None, D=None):
    """Predicted-basis shift caused by the defect of the stored A at parameter t.

    The stored A is only defective up to rounding; in chain coordinates that
    defect D enters as D/t next to B.  It moves G_rho and the eigenvectors of
    S_rho; subspace errors below that shift are not resolvable in double
    precision.
    """
    if B is None:
        _, B = problem.target_coordinates()
    if D is None:
        _, D = problem.chain_defect()
    try:
        S0, G0 = core.schur_S(B, problem.spec, rho, limit=np.inf)
        S1, G1 = core.schur_S(B + D / t, problem.spec, rho, limit=np.inf)
    except (NonGenericError, SingularMatrixError):
        return np.inf
    shift = la.norm2(G1 - G0) if G0.size else 0.0
    w0, Q0 = la.eig(S0)
    w1, Q1 = la.eig(S1)
    perm = match_eigenvalues(w0, w1)
    for i, j in enumerate(perm):
        shift = max(shift, float(la.principal_angles(Q0[:, [i]], Q1[:, [j]])[0]))
    return shift


def _evaluate_t(problem, analyses, rho, t, statuses, tol, coords=None):
    A_t = problem.A + t * problem.perturbation
    w, X = la.eig(A_t)
    if tol["refine"]:
        w, X = la.refine_eig(A_t, w, X)
    scale = la.norm2(A_t)
    vals, labels = _prediction_table(problem, analyses, t)
    perm = match_eigenvalues(vals, w)
    lam0 = problem.spec.eigenvalue
    an = analyses[rho]
    pred = pair_basis(problem, an, t)
    F, Phi2 = _reduced_eigvecs(problem, an, pred)
    r = F.shape[0]

    # nearest-prediction attribution for resolution and cardinality
    dist = np.abs(w[:, None] - vals[None, :])
    nearest = np.argmin(dist, axis=1)
    counts, expected_counts = {}, {}
    for a in range(w.size):
        key = labels[nearest[a]][0]
        counts[key] = counts.get(key, 0) + 1
    for lab in labels:
        expected_counts[lab[0]] = expected_counts.get(lab[0], 0) + 1
    stable = counts.get(rho, 0) == expected_counts[rho]

    pairs, cols, halves = [], [], []
    resolved = True
    ham_real_axis = problem.spec.case == "ham_imaginary"
    for i, (lab, z) in enumerate(zip(labels, vals)):
        if lab[0] != rho:
            continue
        a = perm[i]
        x = X[:, a]
        act = w[a]
        res = abs(act - z)
        others = np.delete(vals, i)
        sep = np.min(np.abs(others - z)) if others.size else np.inf
        if nearest[a] != i or res >= 0.5 * sep:
            resolved = False
        k = lab[2]
        if lab[1] == "near":
            u = pred.basis[:, :r] @ F[:, k]
        else:
            u = pred.basis[:, r:] @ Phi2[:, k]
        ang = float(la.principal_angles(x[:, None], u[:, None])[0])
        c = (x.conj() @ u) / (x.conj() @ x)
        cols.append(c * x)
        halves.append((lab[1], k))
        offset = act - (lam0 if lab[1] == "near" else _mirror_map(problem.spec.case)(lam0))
        center = lam0 if lab[1] == "near" else _mirror_map(problem.spec.case)(lam0)
        rel = res / abs(z - center) if abs(z - center) > 0 else np.inf
        rec = {"pred": z, "act": act, "residual": res, "relative_residual": rel,
               "half": lab[1], "root": k,
               "angle": ang, "offset": abs(offset)}
        if statuses is not None and lab[1] == "near":
            st = statuses[k]
            rec["status"] = st["status"]
            rec["inertia_predicted"] = st["sign"]
            off = act.real if ham_real_axis else act.imag
            rec["real_measured"] = bool(abs(off) <= tol["real_rel_tol"] * abs(offset))
            rec["axis_offset"] = abs(off)
            if ham_real_axis:
                rec["inertia_measured"] = int(np.sign((x.conj() @ problem.form @ x).imag))
        pairs.append(rec)

    # aligned actual basis, columns ordered like the reduced eigenvectors
    Xa = np.zeros((problem.n, len(cols)), complex)
    for c, (h, k) in zip(cols, halves):
        Xa[:, k if h == "near" else r + k] = c
    Phi = la.block_diag(F, Phi2) if Phi2.size else F
    U_act = Xa @ la.solve(Phi, np.eye(Phi.shape[0]))
    gram = gram_residual(U_act, problem.form, pred.expected_gram, pred.gram_scale, t)
    Xc = np.column_stack([X[:, perm[i]] for i, lab in enumerate(labels) if lab[0] == rho])
    vcond = la.cond(Xc)
    range_angle = float(np.max(la.principal_angles(pred.basis, Xc)))
    near_pairs = [p for p in pairs if p["half"] == "near"]
    return {
        "t": float(t),
        "pairs": pairs,
        "resolved": bool(resolved and stable),
        "counts_stable": bool(stable),
        "flagged": bool(vcond > tol["eigvec_cond_flag"]),
        "eigvec_cond": vcond,
        "counts": {str(k): v for k, v in sorted(counts.items())},
        "max_residual": max(p["residual"] for p in pairs),
        "relative_residual": max(p["relative_residual"] for p in pairs),
        "order_metric": max(p["offset"] for p in pairs),
        "max_angle": max(p["angle"] for p in pairs),
        "range_angle": range_angle,
        "gram_residual": gram,
        "symmetry_error": symmetry_error(w, problem.spec.case),
        "norm": scale,
        "construction_floor": construction_floor(problem, rho, t, *(coords or (None, None))),
        "max_axis_offset": max((p.get("axis_offset", 0.0) for p in near_pairs), default=0.0),
    }


def _safe_fit(ts, vals, floor=0.0):
    ts = np.asarray(ts, float)
    vals = np.asarray(vals, float)
    keep = vals > floor
    if np.sum(keep) < 3:
        return None
    return fit_order(ts[keep], vals[keep])


def run_sweep(problem, rho, t_grid=None, tolerances=None, workers=1, corrupt=None):
    """Sweep report for one order rho.

    ``corrupt`` = (entry, factor) scales one entry of S_rho before predicting.
    """
    tol = dict(DEFAULT_TOLERANCES, **(tolerances or {}))
    t_grid = default_grid() if t_grid is None else np.asarray(t_grid, float)
    if t_grid.size < 4 or np.any(np.diff(t_grid) >= 0) or np.any(t_grid <= 0):
        raise SpecError("t grid must be strictly decreasing, positive, with at least 4 points")
    spec = problem.spec
    if rho not in spec.orders:
        raise SpecError(f"s_{rho} = 0; available orders {spec.orders}")
    analyses = {r: analyze_problem(problem, r, tol["w_cond_limit"]) for r in spec.orders}
    if corrupt is not None:
        analyses[rho] = corrupt_analysis(analyses[rho], *corrupt)
    statuses = root_statuses(problem, analyses[rho])
    if corrupt is not None and spec.case == "ham_imaginary":
        statuses = hamiltonian.persistence_analysis(analyses[rho])

    coords = (problem.target_coordinates()[1], problem.chain_defect()[1])

    def one(t):
        return _evaluate_t(problem, analyses, rho, t, statuses, tol, coords)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            records = list(ex.map(one, t_grid))
    else:
        records = [one(t) for t in t_grid]

    threshold = None
    for rec in records[::-1]:
        if not rec["resolved"]:
            break
        threshold = rec["t"]
    usable = [r for r in records if r["resolved"] and not r["flagged"]]
    expected = rho * spec.s_of(rho)
    if len(usable) < 3:
        worst = min(records, key=lambda r: r["t"])
        raise ClusterError(f"order {rho}: fewer than 3 resolved grid points",
                           expected=expected, found=worst["counts"].get(str(rho), 0))
    ts = [r["t"] for r in usable]
    subspace = [r for r in usable
                if r["relative_residual"] <= tol["asymptotic_rel_tol"]
                and r["construction_floor"] <= tol["floor_ratio"] * r["max_angle"]]
    ts_sub = [r["t"] for r in subspace]
    eps = np.finfo(float).eps
    floor = tol["residual_floor"] * eps * max(r["norm"] for r in usable)
    fitted = {
        "order_exponent": _safe_fit(ts, [r["order_metric"] for r in usable]),
        "residual_exponent": _safe_fit(ts, [r["max_residual"] for r in usable], floor),
        "angle_exponent": _safe_fit(ts_sub, [r["max_angle"] for r in subspace], 1e-15),
        "gram_exponent": _safe_fit(ts_sub, [r["gram_residual"] for r in subspace], floor),
        "range_angle_exponent": _safe_fit(ts, [r["range_angle"] for r in usable], 1e-15),
    }
    if spec.case == "ham_imaginary":
        fitted["axis_offset_exponent"] = _safe_fit(ts, [r["max_axis_offset"] for r in usable], 1e-300)
    target = 1.0 / rho
    fe = fitted
    verdict = {
        "order": fe["order_exponent"] is not None and abs(fe["order_exponent"] - target) <= tol["order_tol"],
        "residual": fe["residual_exponent"] is not None and fe["residual_exponent"] >= target + tol["residual_margin"],
        "angle": fe["angle_exponent"] is not None and fe["angle_exponent"] >= target - tol["angle_tol"],
        "gram": fe["gram_exponent"] is not None and fe["gram_exponent"] >= tol["gram_min"],
        "symmetry": all(r["symmetry_error"] <= tol["symmetry_tol"] * max(1.0, r["norm"]) for r in records),
        "cardinality": threshold is not None and all(
            r["counts"].get(str(rho), 0) == expected * (2 if spec.paired else 1) for r in usable),
    }
    an = analyses[rho]
    summary = analysis_summary(problem, an)
    return SweepReport(spec.case, rho, [float(t) for t in t_grid], records, fitted, verdict,
                       threshold, tol, summary)


def analysis_summary(problem, an):
    base = an.base
    out = {"rho": base.rho, "gammas": base.gammas, "roots": base.roots,
           "S": base.S, "W_cond": base.W_cond, "route_gap": getattr(an, "route_gap", 0.0)}
    if hasattr(an, "generic_gap"):
        out["generic_gap"] = an.generic_gap
    st = root_statuses(problem, an)
    if st is not None:
        out["roots_status"] = st
    return out


def run_all(problem, t_grid=None, tolerances=None, workers=1):
    return {rho: run_sweep(problem, rho, t_grid, tolerances, workers) for rho in problem.spec.orders}
