"""JSON round trip for problems and reports.

Matrices are nested lists of ``[re, im]`` pairs.  Floats are written with
Python's shortest round-trip repr, so equal inputs give byte-identical files.
"""

import json
import math
from pathlib import Path

import numpy as np

from .canonical import CHAIN_KEYS, StructuredProblem, generate_problem
from .errors import SpecError, StructureError
from .jordan import JordanSpec

SCHEMA = 1


def to_jsonable(x):
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [to_jsonable(v) for v in x.tolist()]
    if isinstance(x, (complex, np.complexfloating)):
        return [to_jsonable(float(x.real)), to_jsonable(float(x.imag))]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, JordanSpec):
        return x.to_dict()
    return x


def dumps(obj):
    return json.dumps(to_jsonable(obj), indent=2) + "\n"


def encode_matrix(M):
    M = np.asarray(M, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def decode_matrix(obj, name="matrix"):
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"{name}: entries must be [re, im] pairs") from exc
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise SpecError(f"{name}: expected a 2-d array of [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def decode_vector(obj, name="vector"):
    arr = np.asarray(obj if obj is not None else [], dtype=float)
    if arr.size == 0:
        return np.zeros(0, complex)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise SpecError(f"{name}: expected a list of [re, im] pairs")
    return arr[:, 0] + 1j * arr[:, 1]


def problem_to_dict(problem):
    meta = dict(problem.meta)
    out = {
        "schema": SCHEMA,
        "kind": problem.kind,
        "spec": problem.spec.to_dict(),
        "seed": meta.pop("seed", None),
        "similarity_magnitude": meta.pop("similarity_magnitude", None),
        "complement": meta.pop("complement", None),
        "A": encode_matrix(problem.A),
        "form": encode_matrix(problem.form),
        "perturbation": None if problem.perturbation is None else encode_matrix(problem.perturbation),
        "chains": {k: encode_matrix(v) for k, v in problem.chains.items()},
        "complement_spectrum": [[float(z.real), float(z.imag)] for z in np.atleast_1d(problem.complement_spectrum)],
        "meta": meta,
    }
    return to_jsonable(out)


def problem_from_dict(d, validate=True):
    """Explicit problem (``A`` present) or a generation recipe (spec + seed)."""
    if not isinstance(d, dict):
        raise SpecError("problem must be a JSON object")
    if "A" not in d:
        return generate_problem(d)
    spec = JordanSpec.from_dict(d.get("spec", {}))
    kind = d.get("kind", spec.kind)
    if kind != spec.kind:
        raise SpecError(f"kind {kind!r} does not match case {spec.case!r}")
    chains = {k: decode_matrix(v, f"chains.{k}") for k, v in (d.get("chains") or {}).items()}
    missing = [k for k in CHAIN_KEYS[spec.case] if k not in chains]
    if missing:
        raise StructureError(f"missing chain matrices {missing} for case {spec.case}")
    P = d.get("perturbation")
    meta = dict(d.get("meta") or {})
    for key in ("seed", "similarity_magnitude", "complement"):
        if d.get(key) is not None:
            meta[key] = d[key]
    prob = StructuredProblem(kind, decode_matrix(d["A"], "A"), decode_matrix(d["form"], "form"),
                             None if P is None else decode_matrix(P, "perturbation"), spec, chains,
                             decode_vector(d.get("complement_spectrum"), "complement_spectrum"), meta)
    if validate:
        prob.validate()
    return prob


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise SpecError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc})") from exc


def write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
