import numpy as np
import pytest

from mksys import (EmpiricalMeasure, ObservableFamily, estimate_invariant, finite_orbit_invariant,
                   integrate, invariance_residual, ulam_invariant)
from mksys.ergodic import batch_standard_error
from mksys.errors import DimError, DomainError
from mksys.measures import ulam_matrix

from conftest import chain_stationary

TEST_GS = ["x", "x*x", "exp(x)"]


def test_chain_mass(sys_b):
    mu = estimate_invariant(sys_b, 0.0, 10 ** 5, 10 ** 3, seed=1)
    X, w = mu.support()
    assert abs(float(np.sum(w[X[:, 0] < 0.5])) - 2 / 3) <= 0.01
    assert mu.source == {"x0": [0.0], "n": 10 ** 5, "burn_in": 1000, "seed": [1, 0]}
    assert X.shape == (10 ** 5 - 10 ** 3, 1)


def test_halving_mean(emp_a_1e6):
    assert 0.49 <= integrate(emp_a_1e6, "x") <= 0.51


def test_burn_in_precondition(sys_a):
    with pytest.raises(ValueError):
        estimate_invariant(sys_a, 0.3, 10, 20)


def test_integrate_examples(sys_b, pi_b, ulam_a, emp_a_1e6):
    for m in (pi_b, ulam_a, emp_a_1e6):
        assert integrate(m, 1.0) == pytest.approx(1.0, abs=1e-12)
    emp = estimate_invariant(sys_b, 0.0, 10 ** 5, 10 ** 3, seed=2)
    occ = ObservableFamily.occupancy(sys_b, "V1")
    assert abs(integrate(emp, occ) - 2 / 3) <= 0.01
    assert integrate(pi_b, occ) == pytest.approx(0.9 * 2 / 3 + 0.2 / 3, abs=1e-14)
    assert abs(integrate(ulam_a, "x") - 0.5) <= 1e-3


def test_normalisation(pi_b, ulam_a, ulam_c, emp_c_1e6):
    for m in (pi_b, ulam_a, ulam_c, emp_c_1e6):
        _, w = m.support()
        assert abs(w.sum() - 1) <= 1e-12
        assert np.all(w >= 0)


def test_ulam_uniform_for_halving(ulam_a):
    assert ulam_a.bins == 1024
    assert np.max(np.abs(ulam_a.mass - 1 / 1024)) <= 1e-12
    assert ulam_a.residual <= 1e-12


def test_ulam_matrix_rows_stochastic(sys_b, sys_c):
    for s in (sys_b, sys_c):
        T, lo, hi = ulam_matrix(s, 512)
        assert np.allclose(np.asarray(T.sum(axis=1)).ravel(), 1.0, atol=1e-12)
        assert np.all(hi > lo)


def test_ulam_chain_matches_stationary(sys_b):
    u = ulam_invariant(sys_b, 256)
    X, w = u.support()
    assert float(np.sum(w[X[:, 0] < 0.5])) == pytest.approx(chain_stationary()[0], abs=1e-9)


def test_ulam_place_dependent(sys_c, ulam_c, emp_c_1e6):
    # U x = 3x/8 + 1/4 has fixed point 2/5, so the invariant mean of x is 0.4
    assert abs(integrate(ulam_c, "x") - 0.4) <= 1e-3
    assert abs(integrate(ulam_c, "x") - integrate(emp_c_1e6, "x")) <= 2e-3


def test_ulam_dim_two(sys_fig1):
    with pytest.raises(DimError):
        ulam_invariant(sys_fig1, 64)


def test_cross_oracle(sys_b, ulam_a, ulam_c, emp_a_1e6, emp_c_1e6):
    emp_b = estimate_invariant(sys_b, 0.0, 10 ** 6, 10 ** 3, seed=3)
    ulam_b = ulam_invariant(sys_b, 256)
    for emp, ul in ((emp_a_1e6, ulam_a), (emp_b, ulam_b), (emp_c_1e6, ulam_c)):
        X, _ = emp.support()
        tol = max(2e-3, 4 * batch_standard_error(X[:, 0]))
        assert abs(integrate(emp, "x") - integrate(ul, "x")) <= tol


def test_invariance_residual(sys_a, sys_b, pi_b, emp_a_1e6):
    assert invariance_residual(sys_b, pi_b, ["x"]) <= 1e-12
    assert invariance_residual(sys_a, emp_a_1e6, TEST_GS) <= 5e-3
    assert invariance_residual(sys_a, emp_a_1e6, [1.0]) == 0.0
    with pytest.raises(ValueError):
        invariance_residual(sys_a, emp_a_1e6, [])


def test_residual_shrinks_with_n(sys_a, sys_c, emp_a_1e6, emp_c_1e6):
    for s, big in ((sys_a, emp_a_1e6), (sys_c, emp_c_1e6)):
        small = estimate_invariant(s, 0.3, 10 ** 4, 1000, seed=21)
        assert invariance_residual(s, big, TEST_GS) <= invariance_residual(s, small, TEST_GS) + 1e-3


def test_thinning_preserves_mean(sys_a, emp_a_1e6):
    thin = estimate_invariant(sys_a, 0.3, 10 ** 6, 1000, seed=11, cap=10 ** 5)
    assert thin.points.shape[0] == 10 ** 5
    assert abs(integrate(thin, "x") - integrate(emp_a_1e6, "x")) <= 1e-3


def test_finite_orbit(sys_b, pi_b):
    mu = finite_orbit_invariant(sys_b, 0.0)
    X, w = mu.support()
    assert X[:, 0].tolist() == [0.0, 1.0]
    assert np.allclose(w, pi_b.weights, atol=1e-14)
    assert mu.source["orbit"] == 2


def test_weighted_measure_checks(sys_a):
    with pytest.raises(ValueError):
        EmpiricalMeasure(sys_a, [[0.1], [0.2]], [1.0, -1.0])
    with pytest.raises(DomainError):
        EmpiricalMeasure(sys_a, [[1.5]])
    m = EmpiricalMeasure(sys_a, [[0.1], [0.3]], [1.0, 3.0])
    assert m.support()[1].tolist() == [0.25, 0.75]
    assert m.to_csv() == "x0,weight\n0.10000000000000001,0.25\n0.29999999999999999,0.75\n"


def test_csv_exports(ulam_a):
    lines = ulam_a.to_csv().splitlines()
    assert lines[0] == "bin_lo,bin_hi,mass"
    assert len(lines) == 1025
    assert lines[1] == "0,0.0009765625,0.0009765625"
