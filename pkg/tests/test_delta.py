from dataclasses import replace

import numpy as np
import pytest

from eigperturb import canonical as cn
from eigperturb import core, delta
from eigperturb import linalg as la
from eigperturb.errors import SpecError
from eigperturb.jordan import JordanSpec

SWAP = np.array([[0, 1], [1, 0]], complex)


def canonical_with(spec, M):
    p = cn.build_canonical_pair(spec, [])
    return replace(p, perturbation=la.solve(p.form, la.as_complex(M)))


def test_check_structure_examples(rng):
    assert delta.check_structure(np.eye(3), la.random_hermitian(rng, 3))
    assert delta.check_structure(np.array([[0, 0], [1, 0]]), SWAP)
    assert not delta.check_structure(np.array([[0, 1], [0, 0]]), np.eye(2))


def test_nonreal_first_order_is_M21(rng):
    sp = JordanSpec(1, (1,), eigenvalue=1 + 1j, case="delta_nonreal")
    M = la.random_hermitian(rng, 2)
    p = canonical_with(sp, M)
    an = delta.analyze(p, 1)
    assert np.allclose(an.base.S, [[M[1, 0]]])
    near, mirror = delta.predict(p, an, 1e-3)
    assert np.allclose(near, 1 + 1j + 1e-3 * M[1, 0])
    assert np.allclose(mirror, np.conj(near))


@pytest.mark.parametrize("sign,expect", [(1, "real"), (-1, "imag")])
def test_real_case_two_by_two(sign, expect):
    alpha, t = 0.25, 1e-6
    sp = JordanSpec(2, (0, 1), (0, 1), alpha, "delta_real")
    p = canonical_with(sp, [[sign, 0], [0, 0]])
    an = delta.analyze(p, 2)
    assert np.allclose(an.W_hat[0], [[sign]])
    assert np.allclose(an.base.S, [[sign]])
    near, _ = delta.predict(p, an, t)
    offsets = np.sort_complex(near - alpha)
    if expect == "real":
        assert np.allclose(offsets, [-1e-3, 1e-3])
    else:
        assert np.allclose(sorted(offsets, key=lambda z: z.imag), [-1e-3j, 1e-3j])
    actual = la.eigvals(p.A + t * p.perturbation)
    assert np.allclose(sorted(actual, key=lambda z: (z.real, z.imag)),
                       sorted(near, key=lambda z: (z.real, z.imag)), atol=1e-8)


def test_real_case_one_by_one():
    sp = JordanSpec(1, (1,), (1,), 0.5, "delta_real")
    p = canonical_with(sp, [[0.3]])
    near, _ = delta.predict(p, delta.analyze(p, 1), 1e-2)
    assert np.allclose(near, 0.5 + 0.003) and abs(near[0].imag) == 0


def _scalar_analysis(gamma, rho):
    return core.PerturbationAnalysis.from_blocks(rho, [np.eye(1)], np.array([[gamma]], complex),
                                                 np.zeros((0, 1)))


@pytest.mark.parametrize("gamma,rho,tag", [(1, 2, "real-candidate"), (-1, 2, "conjugate-pair"),
                                           (-8, 3, "real-candidate")])
def test_classifier_rule(gamma, rho, tag):
    an = _scalar_analysis(gamma, rho)
    recs = delta.classify_roots(an.S, np.eye(1), an)
    assert {r["gamma_tag"] for r in recs} == {tag}
    n_real = sum(r["status"] != "conjugate-pair" for r in recs)
    assert n_real == (2 if (gamma, rho) == (1, 2) else 1 if rho == 3 else 0)


def test_classifier_signs_and_mixed_form():
    an = _scalar_analysis(1, 2)
    recs = delta.classify_roots(an.S, np.eye(1), an)
    signs = {round(r["root"].real): r["sign"] for r in recs}
    assert signs == {1: 1, -1: -1}
    an = core.PerturbationAnalysis.from_blocks(2, [np.eye(2)], np.eye(2, dtype=complex), np.zeros((0, 2)))
    recs = delta.classify_roots(an.S, np.diag([1.0, -1.0]), an)
    assert {r["status"] for r in recs} == {"necessary-only"}


def test_pair_basis_first_order_nonreal(rng):
    sp = JordanSpec(1, (1,), eigenvalue=2 - 1j, case="delta_nonreal")
    p = canonical_with(sp, la.random_hermitian(rng, 2))
    an = delta.analyze(p, 1)
    pred = delta.predict_pair_basis(p, an, 1e-3)
    assert np.allclose(pred.basis, np.eye(2))
    assert pred.gram_scale == 0
    assert np.allclose(pred.expected_gram, SWAP)


def test_pair_basis_real_block():
    t = 1e-4
    sp = JordanSpec(2, (0, 1), (0, 1), 0.0, "delta_real")
    p = canonical_with(sp, [[1, 0], [0, 0]])
    pred = delta.predict_pair_basis(p, delta.analyze(p, 2), t)
    assert np.allclose(pred.basis, [[1, 0], [0, t ** 0.5]])
    assert np.isclose(pred.gram_scale, 0.5)
    assert np.allclose(pred.expected_gram, SWAP)
    assert la.fro(pred.basis.conj().T @ p.form @ pred.basis - t ** 0.5 * SWAP) <= 1e-15


def test_eigvec_prediction_first_order(rng):
    sp = JordanSpec(1, (2,), (1, ), 0.0, "delta_real")
    p = cn.generate_problem({"spec": sp.to_dict(), "seed": 5})
    an = delta.analyze(p, 1)
    t = 1e-6
    k = 0
    out = delta.eigvec_prediction(p, an, k, t)
    assert out["cond_exponent"] == 0
    w, X = la.eig(p.A + t * p.perturbation)
    near, _ = delta.predict(p, an, t)
    x = X[:, int(np.argmin(np.abs(w - near[k])))]
    assert la.principal_angles(x[:, None], out["right"][:, None])[0] <= 1e-4


@pytest.mark.parametrize("case,lam,signs", [("delta_nonreal", 1 + 1j, None), ("delta_real", -0.4 + 0j, [1, 1, 0])])
def test_structured_route_matches_partition_route(case, lam, signs):
    cfg = {"spec": {"m": 3, "s": [1, 1, 1], "eigenvalue": [lam.real, lam.imag], "case": case}, "seed": 9}
    if signs:
        cfg["spec"]["signs"] = signs
    p = cn.generate_problem(cfg)
    for rho in (1, 2, 3):
        an = delta.analyze(p, rho)
        assert an.route_gap <= 1e-10


def test_case_mismatch():
    p = cn.generate_problem({"spec": {"m": 1, "s": [1], "eigenvalue": [0, 1], "case": "ham_imaginary"}, "seed": 1})
    with pytest.raises(SpecError):
        delta.analyze(p, 1)
