import math

import numpy as np
import pytest

from groupcs.gamma import (
    KP_COMPLEX,
    KP_REAL,
    GammaEstimate,
    norm_2to1_exact_real,
    norm_2to1_lower,
    norm_2to1_upper_sdp,
    penalty_gamma,
)
from groupcs.grouping import contiguous_1d, random_groups, singletons, strided_1d
from groupcs.operators import SupportSet, make_basis, make_ensemble, normalize_rows

from oracles import hadamard_matrix, norm_2to1_sphere_oracle


def test_exact_orthonormal_rows():
    m = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)
    assert math.isclose(norm_2to1_exact_real(m), math.sqrt(2), rel_tol=1e-12)


def test_exact_equal_rows():
    m = np.array([[1.0, 0.0], [1.0, 0.0]])
    assert norm_2to1_exact_real(m) == pytest.approx(2.0, abs=1e-14)


def test_exact_rejects_complex_and_large():
    with pytest.raises(ValueError):
        norm_2to1_exact_real(np.array([[1j, 0]]))
    with pytest.raises(ValueError):
        norm_2to1_exact_real(np.zeros((25, 3)))


def test_exact_against_sphere_oracle():
    rng = np.random.default_rng(202)
    for _ in range(20):
        m = rng.standard_normal((3, 5))
        exact = norm_2to1_exact_real(m)
        oracle = norm_2to1_sphere_oracle(m, rng, samples=100000, starts=30)
        assert abs(exact - oracle) <= 1e-3 * max(1.0, exact)
        assert oracle <= exact + 1e-9  # oracle evaluates feasible points only


def test_lower_matches_exact_with_sign_cover():
    rng = np.random.default_rng(5)
    for _ in range(10):
        m = rng.standard_normal((4, 7))
        exact = norm_2to1_exact_real(m)
        lower = norm_2to1_lower(m, restarts=8, rng=0)
        assert abs(lower - exact) <= 1e-9 * max(1.0, exact)


def test_lower_rank_one_alignment():
    rng = np.random.default_rng(6)
    w = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    v = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    m = 0.7 * np.outer(w, v.conj())
    target = 0.7 * np.sum(np.abs(w)) * np.linalg.norm(v)
    assert norm_2to1_lower(m, restarts=1, rng=0) == pytest.approx(target, rel=1e-10)


def test_lower_monotone_in_restarts():
    rng = np.random.default_rng(7)
    m = rng.standard_normal((4, 6)) + 1j * rng.standard_normal((4, 6))
    vals = [norm_2to1_lower(m, restarts=r, rng=1) for r in (1, 4, 16, 64)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_sdp_upper_orthonormal_rows():
    m = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)
    up = norm_2to1_upper_sdp(m)
    assert math.sqrt(2) - 1e-12 <= up <= KP_REAL * math.sqrt(2) + 1e-9
    assert up == pytest.approx(math.sqrt(2), abs=1e-9)


def test_sdp_upper_equal_rows_tight():
    rng = np.random.default_rng(8)
    row = rng.standard_normal(6)
    row /= np.linalg.norm(row)
    m = np.tile(row, (5, 1))
    assert norm_2to1_upper_sdp(m) == pytest.approx(5.0, abs=1e-8)


def test_sdp_upper_contains_exact():
    rng = np.random.default_rng(9)
    for k in range(10):
        m = rng.standard_normal((8, 12))
        m = normalize_rows(m)
        exact = norm_2to1_exact_real(m)
        up = norm_2to1_upper_sdp(m, seed=k)
        assert exact - 1e-9 <= up
        assert up / exact <= 1.2533 + 1e-9


def test_sdp_matches_cvxpy_oracle():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(10)
    for _ in range(4):
        g, k = int(rng.integers(2, 7)), int(rng.integers(2, 9))
        m = normalize_rows(rng.standard_normal((g, k)))
        q = m @ m.T
        w = cp.Variable((g, g), PSD=True)
        prob = cp.Problem(
            cp.Maximize(cp.sum(cp.multiply(q, w))), [cp.diag(w) == 1]
        )
        prob.solve(solver=cp.SCS, eps=1e-10)
        ours = norm_2to1_upper_sdp(m) ** 2
        assert ours == pytest.approx(prob.value, rel=1e-7)


def test_sandwich_on_random_instances():
    rng = np.random.default_rng(11)
    for i in range(100):
        g = int(rng.integers(2, 9))
        k = int(rng.integers(2, 17))
        m = normalize_rows(rng.standard_normal((g, k)))
        exact = norm_2to1_exact_real(m)
        lower = norm_2to1_lower(m, restarts=2 ** (g - 1), rng=i)
        upper = norm_2to1_upper_sdp(m, seed=i)
        assert lower <= exact + 1e-9
        assert exact <= upper + 1e-9
        assert upper / exact <= KP_REAL + 1e-9


def _dft_ensemble(n):
    return make_ensemble(make_basis("identity", n), make_basis("dft1d", n))


def test_penalty_gamma_singletons_is_one():
    e = _dft_ensemble(16)
    t = SupportSet(np.array([1, 5, 9]))
    est = penalty_gamma(e, t, singletons(16))
    assert est.exact == pytest.approx(1.0, abs=1e-12)
    assert est.method == "exact_sign_enum"


def test_penalty_gamma_contiguous_beats_strided_on_narrowband():
    e = _dft_ensemble(16)
    t = SupportSet(np.arange(4))  # adjacent low frequencies
    contig = penalty_gamma(e, t, contiguous_1d(16, 4))
    strided = penalty_gamma(e, t, strided_1d(16, 4))
    assert contig.upper > strided.upper
    # strided groups are mutually orthogonal on any support here
    assert strided.upper == pytest.approx(2.0, abs=1e-9)
    assert strided.lower == pytest.approx(2.0, abs=1e-9)


def test_penalty_gamma_hadamard_exact_range():
    n, g = 16, 4
    h = make_basis("custom", entries=hadamard_matrix(n) / math.sqrt(n))
    e = make_ensemble(make_basis("identity", n), h)
    rng = np.random.default_rng(12)
    for seed in range(5):
        t = SupportSet(np.sort(rng.permutation(n)[:6]))
        gs = random_groups(n, g, seed)
        est = penalty_gamma(e, t, gs)
        assert est.method == "exact_sign_enum"
        assert math.sqrt(g) - 1e-9 <= est.exact <= g + 1e-9


def test_penalty_gamma_exact_mode_rejects_complex():
    e = _dft_ensemble(16)
    t = SupportSet(np.arange(4))
    with pytest.raises(ValueError):
        penalty_gamma(e, t, contiguous_1d(16, 4), "exact")


def test_penalty_gamma_scale_invariance():
    # scaling A's rows by positive constants is absorbed by normalization
    rng = np.random.default_rng(13)
    n, g = 12, 3
    q = np.linalg.qr(rng.standard_normal((n, n)))[0]
    e1 = make_ensemble(make_basis("identity", n), make_basis("custom", entries=q))
    t = SupportSet(np.array([0, 3, 7, 9]))
    gs = contiguous_1d(n, g)
    est1 = penalty_gamma(e1, t, gs)
    # rescale rows via a manual submatrix check instead of a non-unitary A
    from groupcs.gamma import norm_2to1_exact_real as exact

    sub = e1.a[np.ix_(gs.group(1), t.indices)]
    scaled = np.diag([0.5, 2.0, 7.0]) @ sub
    assert exact(normalize_rows(sub)) == pytest.approx(
        exact(normalize_rows(scaled)), rel=1e-12
    )
    assert est1.exact is not None


def test_penalty_gamma_group_permutation():
    # generic real ensemble so the per-group norms are distinct
    rng = np.random.default_rng(15)
    q = np.linalg.qr(rng.standard_normal((16, 16)))[0]
    e = make_ensemble(make_basis("identity", 16), make_basis("custom", entries=q))
    t = SupportSet(np.array([0, 1, 2, 5]))
    gs = contiguous_1d(16, 4)
    perm = [2, 0, 3, 1]
    from groupcs.grouping import GroupStructure

    gs_perm = GroupStructure(16, 4, gs.groups[perm], "contiguous1d")
    a = penalty_gamma(e, t, gs)
    b = penalty_gamma(e, t, gs_perm)
    assert a.exact == pytest.approx(b.exact, rel=1e-12)
    assert perm[b.argmax_group] == a.argmax_group


def test_gamma_estimate_invariants():
    with pytest.raises(ValueError):
        GammaEstimate(2.0, 1.0, None, "sandwich", 0)
    with pytest.raises(ValueError):
        GammaEstimate(1.0, 2.0, 3.0, "sandwich", 0)
    with pytest.raises(ValueError):
        GammaEstimate(1.0, 2.0, None, "bogus", 0)
    est = GammaEstimate(1.0, 2.0, None, "sandwich", 0)
    assert est.value == 2.0
    assert GammaEstimate(1.0, 1.0, 1.0, "exact_sign_enum", 0).value == 1.0


def test_kp_sandwich_ratio_structural():
    e = _dft_ensemble(64)
    rng = np.random.default_rng(14)
    t = SupportSet(np.sort(rng.permutation(64)[:6]))
    for gs in (strided_1d(64, 8), contiguous_1d(64, 8), random_groups(64, 8, 1)):
        est = penalty_gamma(e, t, gs)
        assert est.method == "sandwich"
        assert est.upper / est.lower <= KP_COMPLEX + 1e-9
        assert math.sqrt(8) - 1e-9 <= est.lower <= est.upper <= 8 + 1e-9
