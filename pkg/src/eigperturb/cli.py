"""eigperturb command line.

    eigperturb <command> --config PATH [--out-json PATH] [--out-csv PATH] [--seed N]

Exit codes: 0 success, 1 a threshold check failed, 2 invalid config or
spec, 3 structure violation, 4 non-generic perturbation, 5 cluster
mismatch.
"""

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import core, verify
from . import linalg as la
from .errors import EigPerturbError, SingularMatrixError, SpecError
from .hamiltonian import semidefinite_case
from .serialize import SCHEMA, dumps, load_json, problem_from_dict, problem_to_dict, write_text

COMMANDS = ("generate", "predict", "verify", "sweep", "special-case")
CSV_HEADER = ["t", "rho", "pred_re", "pred_im", "act_re", "act_im", "residual", "gram_residual", "max_angle"]
ROUTE_TOL = 1e-10
AXIS_TOL = 1e-10


# ---------------------------------------------------------------- config

def load_config(path, command, seed=None):
    cfg = load_json(path)
    if not isinstance(cfg, dict):
        raise SpecError("config must be a JSON object")
    if cfg.get("schema") != SCHEMA:
        raise SpecError(f"unsupported config schema {cfg.get('schema')!r}; expected {SCHEMA}")
    if cfg.get("command", command) != command:
        raise SpecError(f"config is for command {cfg['command']!r}, not {command!r}")
    if "problem" not in cfg:
        raise SpecError("config needs a 'problem' entry (inline object or path)")
    cfg = dict(cfg, _base=Path(path).resolve().parent)
    if seed is not None:
        cfg["seed"] = int(seed)
    unknown = set(cfg.get("tolerances") or {}) - set(verify.DEFAULT_TOLERANCES)
    if unknown:
        raise SpecError(f"unknown tolerance keys {sorted(unknown)}")
    return cfg


def problem_source(cfg):
    src = cfg["problem"]
    if isinstance(src, str):
        p = Path(src)
        src = load_json(p if p.is_absolute() else cfg["_base"] / p)
    if not isinstance(src, dict):
        raise SpecError("problem must be an object or a path to one")
    if "A" not in src and cfg.get("seed") is not None:
        src = dict(src, seed=cfg["seed"])
    return src


def load_problem(cfg):
    return problem_from_dict(problem_source(cfg))


def t_grid(cfg):
    g = cfg.get("t_grid")
    if g is None:
        return verify.default_grid()
    try:
        return verify.default_grid(float(g["start"]), float(g["stop"]), int(g["points"]))
    except (KeyError, TypeError) as exc:
        raise SpecError("t_grid needs start, stop and points") from exc


def orders(cfg, problem):
    rho = cfg.get("rho", "all")
    if rho == "all":
        return list(problem.spec.orders)
    rho = int(rho)
    if rho not in problem.spec.orders:
        raise SpecError(f"s_{rho} = 0; available orders {problem.spec.orders}")
    return [rho]


def tolerances(cfg):
    return dict(verify.DEFAULT_TOLERANCES, **(cfg.get("tolerances") or {}))


def corruption(cfg):
    c = cfg.get("corrupt")
    if c is None:
        return None, None
    return int(c["rho"]), (tuple(c.get("entry", (0, 0))), float(c.get("factor", 1.1)))


# ---------------------------------------------------------------- commands

def cmd_generate(cfg):
    src = problem_source(cfg)
    if "A" in src:
        raise SpecError("generate needs a recipe (spec, seed, ...), not an explicit problem")
    problem = problem_from_dict(src)
    return problem_to_dict(problem), [], 0, f"generated {problem.spec.case} problem, n={problem.n}"


def _order_summary(problem, rho, tol):
    an = verify.analyze_problem(problem, rho, tol["w_cond_limit"])
    out = verify.analysis_summary(problem, an)
    out["generic"] = True
    if problem.spec.case == "ham_imaginary":
        out["inertia"] = an.inertia
    return an, out


def cmd_predict(cfg):
    problem = load_problem(cfg)
    tol = tolerances(cfg)
    _, B = problem.target_coordinates()
    result = {"schema": SCHEMA, "command": "predict", "case": problem.spec.case,
              "eigenvalue": problem.spec.eigenvalue,
              "W_cond": core.generic_conditions(B, problem.spec), "orders": {}}
    lines = []
    for rho in orders(cfg, problem):
        _, summary = _order_summary(problem, rho, tol)
        result["orders"][rho] = summary
        lines.append(f"rho={rho}: gammas {np.round(summary['gammas'], 6).tolist()}")
    return result, [], 0, "\n".join(lines)


def _sweeps(cfg, problem):
    tol = tolerances(cfg)
    grid = t_grid(cfg)
    c_rho, corrupt = corruption(cfg)
    workers = int(cfg.get("workers", 1))
    return [verify.run_sweep(problem, rho, grid, tol, workers, corrupt if rho == c_rho else None)
            for rho in orders(cfg, problem)]


def _table(reports):
    rows = ["rho  order   resid   angle   gram    t*       verdict"]
    for r in reports:
        f = r.fitted

        def fmt(v):
            return "   n/a " if v is None else f"{v:7.3f}"

        thr = "none" if r.threshold is None else f"{r.threshold:.1e}"
        bad = [k for k, v in r.verdict.items() if not v]
        rows.append(f"{r.rho:3d} {fmt(f['order_exponent'])} {fmt(f['residual_exponent'])} "
                    f"{fmt(f['angle_exponent'])} {fmt(f['gram_exponent'])} {thr:>8} "
                    f"{'pass' if r.passed else 'FAIL ' + ','.join(bad)}")
    return "\n".join(rows)


def cmd_sweep(cfg):
    problem = load_problem(cfg)
    reports = _sweeps(cfg, problem)
    passed = all(r.passed for r in reports)
    result = {"schema": SCHEMA, "command": "sweep", "case": problem.spec.case,
              "passed": passed, "reports": [r.to_dict() for r in reports]}
    rows = [row for r in reports for row in r.csv_rows()]
    return result, rows, 0 if passed else 1, _table(reports)


def cmd_verify(cfg):
    """Structure, route cross-checks and sweep verdicts, without per-t records."""
    problem = load_problem(cfg)
    tol = tolerances(cfg)
    checks = {"structure": True}
    routes = {}
    for rho in orders(cfg, problem):
        an = verify.analyze_problem(problem, rho, tol["w_cond_limit"])
        gaps = {k: float(getattr(an, k)) for k in ("route_gap", "generic_gap", "hermitian_gap")
                if hasattr(an, k)}
        routes[rho] = gaps
        checks[f"routes_rho{rho}"] = all(v <= ROUTE_TOL for v in gaps.values())
    reports = _sweeps(cfg, problem)
    for r in reports:
        checks[f"sweep_rho{r.rho}"] = r.passed
    passed = all(checks.values())
    result = {"schema": SCHEMA, "command": "verify", "case": problem.spec.case, "passed": passed,
              "checks": checks, "routes": routes,
              "sweeps": [{k: v for k, v in r.to_dict().items() if k != "records"} for r in reports]}
    rows = [row for r in reports for row in r.csv_rows()]
    return result, rows, 0 if passed else 1, _table(reports)


def persistence_check(problem, report):
    """Axis and inertia checks for an imaginary-eigenvalue sweep."""
    H = la.norm2(problem.A)
    stay_off, leave_off, inertia_ok = [], [], True
    for rec in report.records:
        stays = [p for p in rec["pairs"] if p.get("status", "").startswith("stays")]
        leaves = [p for p in rec["pairs"] if p.get("status") == "leaves-axis"]
        stay_off.append(max((p["axis_offset"] for p in stays), default=0.0))
        leave_off.append(max((p["axis_offset"] for p in leaves), default=0.0))
        if rec["resolved"]:
            inertia_ok &= all(p["inertia_measured"] == p["inertia_predicted"]
                              for p in stays if p["status"] == "stays-imaginary-sufficient")
    out = {"norm_H": H, "max_axis_offset_staying": max(stay_off),
           "axis_ok": all(v <= AXIS_TOL * H for v in stay_off), "inertia_ok": bool(inertia_ok)}
    if any(v > 0 for v in leave_off):
        ts = [r["t"] for r in report.records if r["resolved"]]
        vals = [v for r, v in zip(report.records, leave_off) if r["resolved"]]
        slope = verify._safe_fit(ts, vals, 0.0)
        out["leaving_exponent"] = slope
        out["leaving_ok"] = slope is not None and abs(slope - 1 / report.rho) <= report.tolerances["order_tol"]
    return out


def cmd_special_case(cfg):
    problem = load_problem(cfg)
    if problem.spec.case != "ham_imaginary":
        raise SpecError("special-case needs a ham_imaginary problem")
    sc = cfg.get("special_case") or {}
    even = [r for r in problem.spec.orders if r % 2 == 0]
    if "half_rho" in sc:
        half = int(sc["half_rho"])
    elif even:
        half = even[0] // 2
    else:
        raise SpecError("no even Jordan blocks at the target eigenvalue")
    try:
        cert = semidefinite_case(problem, half, tolerances(cfg)["w_cond_limit"])
        cert.pop("analysis")
        cert["semidefinite"] = True
    except SpecError as exc:
        cert = {"semidefinite": False, "reason": str(exc), "block_size": 2 * half}
    report = verify.run_sweep(problem, 2 * half, t_grid(cfg), tolerances(cfg))
    persist = persistence_check(problem, report)
    ok = report.passed and persist["axis_ok"] and persist["inertia_ok"] and persist.get("leaving_ok", True)
    result = {"schema": SCHEMA, "command": "special-case", "passed": ok, "certificate": cert,
              "persistence": persist, "report": report.to_dict()}
    text = _table([report]) + (f"\nsemidefinite: {cert['semidefinite']}; axis ok: {persist['axis_ok']}; "
                               f"inertia ok: {persist['inertia_ok']}")
    return result, list(report.csv_rows()), 0 if ok else 1, text


HANDLERS = {"generate": cmd_generate, "predict": cmd_predict, "verify": cmd_verify,
            "sweep": cmd_sweep, "special-case": cmd_special_case}


# ---------------------------------------------------------------- entry point

def csv_text(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        w.writerow([repr(float(v)) if not isinstance(v, (int, np.integer)) else int(v) for v in row])
    return buf.getvalue()


def build_parser():
    ap = argparse.ArgumentParser(prog="eigperturb",
                                 description="Structured perturbation of defective eigenvalues.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON run config")
    ap.add_argument("--out-json", help="write the JSON result here (default: stdout)")
    ap.add_argument("--out-csv", help="write per-(t, pair) rows here")
    ap.add_argument("--seed", type=int, help="override the problem seed")
    return ap


def run(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.command, args.seed)
        result, rows, code, text = HANDLERS[args.command](cfg)
        out = cfg.get("output") or {}
        json_path = args.out_json or out.get("json")
        csv_path = args.out_csv or out.get("csv")
        if json_path:
            write_text(cfg["_base"] / json_path if not args.out_json else json_path, dumps(result))
            print(text, file=stdout)
        else:
            stdout.write(dumps(result))
            if text:
                print(text, file=stderr)
        if csv_path:
            write_text(cfg["_base"] / csv_path if not args.out_csv else csv_path, csv_text(rows))
        return code
    except SingularMatrixError as exc:
        print(f"error: {exc}", file=stderr)
        return 4
    except (EigPerturbError, KeyError, TypeError, ValueError) as exc:
        code = getattr(exc, "exit_code", 2)
        print(f"error: {exc}", file=stderr)
        return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
