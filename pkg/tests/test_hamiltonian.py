from dataclasses import replace

import numpy as np
import pytest

from eigperturb import canonical as cn
from eigperturb import delta, hamiltonian as hm
from eigperturb import linalg as la
from eigperturb.canonical import StructuredProblem, symplectic_J
from eigperturb.errors import NonGenericError, SpecError, StructureError
from eigperturb.jordan import JordanSpec
from eigperturb.verify import run_sweep

J1 = symplectic_J(1)
ALPHA = 1.0


def jordan2x2(K):
    """H = [[iα, 1], [0, iα]] with chains diag(1, i) and T = J K."""
    spec = JordanSpec(2, (0, 1), (0, 1), 1j * ALPHA, "ham_imaginary")
    H = np.array([[1j * ALPHA, 1], [0, 1j * ALPHA]])
    p = StructuredProblem("hamiltonian", H, J1, J1 @ la.as_complex(K), spec,
                          {"Phi": np.diag([1, 1j])}, np.zeros(0))
    p.validate()
    return p


def test_check_hamiltonian_examples():
    assert hm.check_hamiltonian(np.diag([1.0, -1.0]))
    assert not hm.check_hamiltonian(np.eye(2))
    assert hm.check_hamiltonian(np.array([[1j, 2.5], [0, 1j]]))
    with pytest.raises(SpecError):
        hm.check_hamiltonian(np.eye(3))


def test_to_delta_hermitian_example():
    C, D, Delta = hm.to_delta_hermitian(J1, J1)
    assert np.allclose(C, -1j * J1) and np.allclose(Delta, -1j * J1)
    assert np.allclose(Delta @ C, np.eye(2))
    with pytest.raises(StructureError):
        hm.to_delta_hermitian(np.eye(2), J1)


def test_generated_problem_round_trips_to_delta():
    p = cn.generate_problem({"spec": {"m": 2, "s": [1, 1], "eigenvalue": [0.5, 0.2],
                                      "case": "ham_nonimaginary"}, "seed": 2})
    d = hm.delta_problem(p)
    assert delta.check_structure(d.A, d.form) and delta.check_structure(d.perturbation, d.form)
    d.validate()


def test_phase_matrix_examples():
    assert np.array_equal(hm.phase_matrix(JordanSpec(1, (2,), case="ham_imaginary", eigenvalue=1j)), np.eye(2))
    P = hm.phase_matrix(JordanSpec(2, (0, 1), case="ham_imaginary", eigenvalue=1j))
    assert np.allclose(P, np.diag([1, -1j]))
    N = np.array([[0, 1], [0, 0]])
    assert np.allclose(np.diag([1, 1j]) @ (1j * N) @ P, N)
    P3 = hm.phase_matrix(JordanSpec(3, (0, 0, 1), case="ham_imaginary", eigenvalue=1j))
    assert np.allclose(P3, np.diag([1, -1j, -1]))


@pytest.mark.parametrize("k,gamma", [(1.0, 1.0), (-1.0, -1.0)])
def test_two_by_two_closed_form(k, gamma):
    p = jordan2x2(k * np.eye(2))
    an = hm.analyze(p, 2)
    assert np.allclose(an.base.S, [[gamma]])
    t = 1e-6
    near, _ = hm.predict(p, an, t)
    actual = la.eigvals(p.A + t * p.perturbation)
    exact = 1j * ALPHA + np.array([1, -1]) * 1j * np.sqrt(complex(k * t * (1 + k * t)))
    key = lambda z: (round(z.real, 9), z.imag)
    assert np.allclose(sorted(actual, key=key), sorted(exact, key=key), atol=1e-12)
    lead = 1j * ALPHA + np.array([1, -1]) * 1j * np.sqrt(complex(k * t))
    assert np.allclose(sorted(near, key=key), sorted(lead, key=key), atol=1e-14)


def test_two_by_two_persistence():
    an = hm.analyze(jordan2x2(np.eye(2)), 2)
    fate = {int(np.sign(r["root"].real)): (r["status"], r["sign"]) for r in an.persistence}
    assert fate == {1: ("stays-imaginary-sufficient", 1), -1: ("stays-imaginary-sufficient", -1)}
    an = hm.analyze(jordan2x2(-np.eye(2)), 2)
    assert {r["status"] for r in an.persistence} == {"leaves-axis"}


def test_semidefinite_two_by_two():
    rep = hm.semidefinite_case(jordan2x2(np.eye(2)), 1)
    assert {b["branch"]: b["inertia"] for b in rep["imaginary_branches"]} == {"+": 1, "-": -1}
    assert not rep["off_axis_roots"]
    with pytest.raises(NonGenericError):
        hm.semidefinite_case(jordan2x2(np.zeros((2, 2))), 1)
    with pytest.raises(SpecError):
        hm.semidefinite_case(jordan2x2(-np.eye(2)), 1)


def test_semidefinite_four_by_four_stays_on_axis():
    spec = JordanSpec(2, (0, 1), (0, 1), 1j, "ham_imaginary")
    comp = [{"eigenvalue": [0.0, 3.0], "sign": 1}, {"eigenvalue": [0.0, -2.0], "sign": -1}]
    base = cn.build_canonical_pair(spec, comp)
    eps = 1e-2
    p = replace(base, perturbation=cn.perturbation_from_K(base, np.diag([1, 1, eps, eps])))
    p.validate()
    rep = hm.semidefinite_case(p, 1)
    assert min(rep["W_min_eigenvalue"].values()) > 0
    report = run_sweep(p, 2)
    assert max(r["max_axis_offset"] for r in report.records) <= 1e-12


@pytest.mark.parametrize("case,lam,signs", [("ham_nonimaginary", 0.7 + 0.4j, None), ("ham_imaginary", 1j, [1, 0, 1])])
def test_routes_agree(case, lam, signs):
    spec = {"m": 3, "s": [1, 1, 1], "eigenvalue": [lam.real, lam.imag], "case": case}
    if signs:
        spec["signs"] = signs
    p = cn.generate_problem({"spec": spec, "seed": 4})
    for rho in (1, 2, 3):
        an = hm.analyze(p, rho)
        assert an.route_gap <= 1e-10
        assert an.generic_gap <= 1e-10


def test_nonimaginary_predictions_are_mirrored():
    p = cn.generate_problem({"spec": {"m": 1, "s": [2], "eigenvalue": [0.3, 1.0], "case": "ham_nonimaginary"},
                             "seed": 1})
    near, mirror = hm.predict(p, hm.analyze(p, 1), 1e-3)
    assert np.allclose(mirror, -np.conj(near))
