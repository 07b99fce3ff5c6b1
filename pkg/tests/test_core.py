import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eigperturb import core
from eigperturb import linalg as la
from eigperturb.canonical import build_nilpotent
from eigperturb.errors import ClusterError, NonGenericError, SpecError
from eigperturb.jordan import BlockIndex, JordanSpec


def spec(m, s, **kw):
    return JordanSpec(m, tuple(s), **kw)


# ---------------------------------------------------------------- Jordan layout

def test_nilpotent_examples():
    assert np.array_equal(build_nilpotent(spec(1, [2])), np.zeros((2, 2)))
    assert np.array_equal(build_nilpotent(spec(2, [0, 1])), [[0, 1], [0, 0]])
    N = build_nilpotent(spec(2, [1, 1]))
    assert np.array_equal(N, la.block_diag(np.zeros((1, 1)), [[0, 1], [0, 0]]))
    assert np.linalg.matrix_rank(N) == 1
    assert not np.any(N @ N)


@given(st.lists(st.integers(0, 3), min_size=1, max_size=4).filter(lambda s: s[-1] > 0))
@settings(max_examples=40, deadline=None)
def test_nilpotent_rank_formula(s):
    sp = spec(len(s), s)
    N = build_nilpotent(sp)
    for k in range(1, len(s) + 1):
        expected = sum((j - k) * s[j - 1] for j in range(k + 1, len(s) + 1))
        assert np.linalg.matrix_rank(np.linalg.matrix_power(N, k)) == expected


def test_spec_validation():
    with pytest.raises(SpecError):
        spec(2, [1])
    with pytest.raises(SpecError):
        spec(2, [1, 0])
    with pytest.raises(SpecError):
        spec(1, [1], signs=[2])
    with pytest.raises(SpecError):
        JordanSpec(1, (1,), eigenvalue=1.0, case="delta_nonreal")
    with pytest.raises(SpecError):
        JordanSpec(1, (1,), eigenvalue=1j, case="delta_real")


def test_spec_round_trip():
    sp = JordanSpec(3, (1, 0, 2), (0, 0, 1), 0.5, "delta_real")
    assert JordanSpec.from_dict(sp.to_dict()) == sp


def test_block_index_tiles_cover_matrix():
    sp = spec(3, [1, 2, 1])
    seen = np.zeros((sp.p, sp.p), int)
    idx = BlockIndex(sp)
    for key in idx.tiles():
        rows, cols = idx.ranges(*key)
        seen[rows, cols] += 1
    assert np.all(seen == 1)


# ---------------------------------------------------------------- W and S

def test_assemble_W_single_block():
    B = np.array([[11, 12], [21, 22]], complex)
    assert np.array_equal(core.assemble_W(B, spec(2, [0, 1]), 2), [[21]])
    B1 = np.array([[5 + 1j]])
    assert np.array_equal(core.assemble_W(B1, spec(1, [1]), 1), B1)


def test_assemble_W_tiling_oracle(rng):
    B = la.random_complex(rng, (3, 3))
    W1 = core.assemble_W(B, spec(2, [1, 1]), 1)
    # 1-based indices ((1,1),(1,2),(3,1),(3,2))
    assert np.array_equal(W1, [[B[0, 0], B[0, 1]], [B[2, 0], B[2, 1]]])


def test_schur_S_examples(rng):
    sp = spec(2, [1, 1])
    B = la.random_complex(rng, (3, 3))
    S, G = core.schur_S(B, sp, 1)
    assert np.allclose(S, B[0, 0] - B[0, 1] * B[2, 0] / B[2, 1])
    S2, G2 = core.schur_S(B, sp, 2)
    assert np.array_equal(S2, [[B[2, 1]]]) and G2.shape == (0, 1)
    B = np.zeros((3, 3), complex)
    B[0, 0], B[0, 1], B[2, 0], B[2, 1] = 2, 1, 1, 1
    S, G = core.schur_S(B, sp, 1)
    assert np.allclose(S, [[1]]) and np.allclose(G, [[-1]])


def test_singular_W_is_non_generic():
    B = np.zeros((3, 3), complex)
    B[0, 0] = 1
    with pytest.raises(NonGenericError) as exc:
        core.analyze(B, spec(2, [1, 1]), 1)
    assert exc.value.k == 2


def test_companion_theta_examples():
    S = np.array([[0.7 - 0.2j]])
    assert np.array_equal(core.companion_theta(S, 1), S)
    g = 3.0
    th = core.companion_theta(np.array([[g]]), 2)
    assert np.array_equal(th, [[0, 1], [g, 0]])
    assert np.allclose(np.sort(la.eigvals(th).real), [-np.sqrt(g), np.sqrt(g)])
    w = la.eigvals(core.companion_theta(np.array([[8.0]]), 3))
    om = np.exp(2j * np.pi / 3)
    target = np.array([2, 2 * om, 2 * om ** 2])
    assert np.allclose(np.sort_complex(np.round(w, 12)), np.sort_complex(np.round(target, 12)))


def test_predict_eigenvalues_examples():
    an = core.analyze(np.array([[0.5 + 0.1j]]), spec(1, [1]), 1)
    assert np.allclose(core.predict_eigenvalues(2.0, an, 1e-3), 2 + 1e-3 * (0.5 + 0.1j))
    sp = spec(2, [0, 1])
    an = core.analyze(np.array([[0, 0], [1, 0]], complex), sp, 2)
    t = 1e-4
    pred = core.predict_eigenvalues(0, an, t)
    assert np.allclose(np.sort(pred.real), [-1e-2, 1e-2])
    actual = la.eigvals(build_nilpotent(sp) + t * np.array([[0, 0], [1, 0]]))
    assert np.allclose(np.sort(actual.real), [-1e-2, 1e-2], atol=1e-15)
    an = core.analyze(np.array([[0, 0], [-1, 0]], complex), sp, 2)
    pred = core.predict_eigenvalues(1j, an, t)
    assert np.allclose(sorted(pred, key=lambda z: z.imag), [1j * (1 - 1e-2), 1j * (1 + 1e-2)])


def test_leading_basis_examples(rng):
    an = core.analyze(np.array([[1.5]]), spec(1, [1]), 1)
    assert np.array_equal(core.leading_basis(spec(1, [1]), an, 0.1).basis, [[1]])
    sp = spec(2, [0, 1])
    an = core.analyze(np.array([[0, 0], [1, 0]], complex), sp, 2)
    t = 1e-4
    assert np.allclose(core.leading_basis(sp, an, t).basis, [[1, 0], [0, t ** 0.5]])
    sp = spec(2, [1, 1])
    B = la.random_complex(rng, (3, 3))
    an = core.analyze(B, sp, 1)
    X = core.leading_basis(sp, an, t).basis
    assert np.allclose(X[:, 0], [1, an.G[0, 0], 0])


def test_restrict_cluster_examples():
    an = core.analyze(np.array([[2.0 + 1j]]), spec(1, [1]), 1)
    F, Q, Om = core.restrict_cluster(an, [0])
    assert np.allclose(np.abs(F), 1) and np.allclose(Om, an.S)
    sp = spec(2, [0, 1])
    an = core.analyze(np.array([[0, 0], [1, 0]], complex), sp, 2)
    k = int(np.argmin(np.abs(an.roots - 1)))
    F, Q, Om = core.restrict_cluster(an, [k])
    assert np.allclose(Om, [[1]]) and np.allclose(np.abs(F), 1 / np.sqrt(2))
    assert np.allclose(F[:, 0] / F[0, 0], [1, 1])


def test_restrict_cluster_two_roots():
    S = np.diag([1.0, 4.0]).astype(complex)
    an = core.PerturbationAnalysis.from_blocks(2, [np.eye(2)], S, np.zeros((0, 2)))
    sel = [int(np.argmin(np.abs(an.roots - r))) for r in (1, 2)]
    F, Q, Om = core.restrict_cluster(an, sel)
    assert np.allclose(np.diag(Om), [1, 2])
    assert F.shape == (4, 2)
    assert la.norm2(an.theta @ F - F @ Om) <= 1e-12


def test_restrict_cluster_rejects_repeated_roots():
    S = np.eye(2, dtype=complex)
    an = core.PerturbationAnalysis.from_blocks(1, [np.eye(2)], S, np.zeros((0, 2)))
    with pytest.raises(ClusterError):
        core.restrict_cluster(an, [0])


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_theta_spectrum_is_all_roots(seed):
    rng = np.random.default_rng(seed)
    s, rho = int(rng.integers(1, 5)), int(rng.integers(1, 5))
    S = la.random_complex(rng, (s, s))
    ev = la.eigvals(core.companion_theta(S, rho))
    roots, _ = core.rho_roots(la.eigvals(S), rho)
    cost = np.abs(ev[:, None] - roots[None, :])
    from scipy.optimize import linear_sum_assignment
    r, c = linear_sum_assignment(cost)
    assert cost[r, c].max() <= 1e-8
