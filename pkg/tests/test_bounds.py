import math

import numpy as np
import pytest
from triqi.bounds import (advantage_ratio, bhattacharyya_bound,
                          chernoff, error_bound_2gamma, error_bound_3gamma,
                          evaluate_point, helstrom_optimum, povm_error, q_s)
from triqi.errors import NumericalError, RegimeWarning
from triqi.fock import DensityOperator, build_space
from triqi.presets import (AUDIT_POINT, DENSE_CHECK_POINTS, GOLDEN_POINT,
                           GOLDEN_POINT_TRACED)
from triqi.states import build_hypothesis_pair, three_photon_state

from oracles import QsGrid, qs_ref

GOLDEN_PAIR = build_hypothesis_pair(GOLDEN_POINT)
TRACED_PAIR = build_hypothesis_pair(GOLDEN_POINT_TRACED)


def dense_copy(rho):
    return DensityOperator.dense(rho.space, rho.to_dense())


def diag_pair(p, q):
    space = build_space(1, [len(p)])
    return (DensityOperator.diagonal(space, np.asarray(p, float)),
            DensityOperator.diagonal(space, np.asarray(q, float)))


def test_qs_equal_states_is_one():
    rho = GOLDEN_PAIR.rho0
    for s in (0.0, 0.2, 0.5, 0.8, 1.0):
        assert q_s(rho, rho, s) == pytest.approx(1.0, abs=1e-12)


def test_qs_pure_pair_s_independent():
    space = build_space(3, [2, 2, 2])
    k0 = three_photon_state(0.2, space)
    k1 = three_photon_state(0.7, space)
    overlap = abs(np.vdot(k0.amplitudes, k1.amplitudes)) ** 2
    r0 = DensityOperator.from_ket(k0)
    r1 = DensityOperator.from_ket(k1)
    for s in (0.1, 0.5, 0.9):
        assert q_s(r0, r1, s) == pytest.approx(overlap, abs=1e-12)


def test_qs_golden_value_structured_and_dense():
    frozen = 0.996920494113427  # dense eigendecomposition oracle
    assert q_s(GOLDEN_PAIR.rho0, GOLDEN_PAIR.rho1, 0.5) == pytest.approx(frozen, abs=1e-12)
    assert q_s(dense_copy(GOLDEN_PAIR.rho0), dense_copy(GOLDEN_PAIR.rho1), 0.5) == \
        pytest.approx(frozen, abs=1e-12)
    assert qs_ref(GOLDEN_PAIR.rho0.to_dense(), GOLDEN_PAIR.rho1.to_dense(), 0.5) == \
        pytest.approx(frozen, abs=1e-13)


def test_qs_golden_endpoints():
    # informative because rho0 is rank deficient
    assert q_s(GOLDEN_PAIR.rho0, GOLDEN_PAIR.rho1, 0.0) == pytest.approx(0.9990132624250361, abs=1e-12)
    assert q_s(GOLDEN_PAIR.rho0, GOLDEN_PAIR.rho1, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_qs_symmetry():
    for s in np.arange(0.1, 0.95, 0.1):
        a = q_s(GOLDEN_PAIR.rho0, GOLDEN_PAIR.rho1, float(s))
        b = q_s(GOLDEN_PAIR.rho1, GOLDEN_PAIR.rho0, 1.0 - float(s))
        assert a == pytest.approx(b, abs=1e-10)


def test_qs_bounded_by_one_and_strictly_below_for_distinct_states():
    values = [q_s(GOLDEN_PAIR.rho0, GOLDEN_PAIR.rho1, float(s))
              for s in np.arange(0.0, 1.0001, 0.1)]
    assert all(v <= 1.0 + 1e-12 for v in values)
    assert min(values) < 1.0 - 1e-6  # distinct states are distinguishable


def test_qs_rejects_indefinite_input():
    space = build_space(1, [2])
    bad = DensityOperator.dense(space, np.diag([1.2, -0.2]))
    good = DensityOperator.diagonal(space, [0.5, 0.5])
    with pytest.raises(NumericalError):
        q_s(bad, good, 0.5)


def test_qs_space_mismatch():
    small = build_hypothesis_pair(GOLDEN_POINT.with_updates(cutoffs=(2, 4, 4)))
    with pytest.raises(ValueError):
        q_s(GOLDEN_PAIR.rho0, small.rho1, 0.5)


def test_chernoff_identical_states():
    res = chernoff(GOLDEN_PAIR.rho0, GOLDEN_PAIR.rho0)
    assert res.exponent < 1e-12


def test_chernoff_commuting_boundary_minimum():
    rho0, rho1 = diag_pair([0.5, 0.5], [1.0, 0.0])
    res = chernoff(rho0, rho1)
    assert res.q_star == pytest.approx(0.5, abs=1e-5)
    assert res.s_star > 0.99


def test_chernoff_golden_triple_vs_grid_oracle():
    res = chernoff(GOLDEN_PAIR.rho0, GOLDEN_PAIR.rho1)
    grid = QsGrid(GOLDEN_PAIR.rho0.to_dense(), GOLDEN_PAIR.rho1.to_dense())
    ss = np.arange(0.0, 1.0 + 1e-12, 1e-4)
    qv = np.array([grid.q(float(s)) for s in ss])
    k = int(np.argmin(qv))
    assert abs(res.s_star - ss[k]) <= 2e-4
    assert res.q_star <= qv[k] + 1e-12
    assert res.q_star == pytest.approx(qv[k], abs=1e-9)
    # frozen from the grid-scan oracle
    assert ss[k] == pytest.approx(0.4447, abs=1e-12)
    assert qv[k] == pytest.approx(0.9968891798483536, abs=1e-12)
    assert res.exponent == pytest.approx(-math.log(res.q_star), abs=1e-15)


def test_chernoff_convexity_prescan():
    res = chernoff(GOLDEN_PAIR.rho0, GOLDEN_PAIR.rho1)
    q = np.array([v for _, v in res.grid])
    second = q[2:] - 2 * q[1:-1] + q[:-2]
    assert second.min() >= -1e-9


def test_chernoff_exponent_monotone_in_eta():
    exps = []
    for eta in (0.0, 0.01, 0.05, 0.1):
        pair = build_hypothesis_pair(GOLDEN_POINT.with_updates(eta=eta))
        exps.append(chernoff(pair.rho0, pair.rho1).exponent)
    assert all(b >= a - 1e-12 for a, b in zip(exps, exps[1:]))
    assert exps[0] < 1e-12


def test_bhattacharyya_trivial_and_arithmetic():
    rho = GOLDEN_PAIR.rho0
    for m in (1, 7):
        assert bhattacharyya_bound(rho, rho, m) == pytest.approx(0.5, abs=1e-12)
    # commuting pair engineered to Q_half = 0.9
    rho0, rho1 = diag_pair([1.0, 0.0], [0.81, 0.19])
    assert q_s(rho0, rho1, 0.5) == pytest.approx(0.9, abs=1e-14)
    assert bhattacharyya_bound(rho0, rho1, 10) == pytest.approx(0.5 * 0.9 ** 10, abs=1e-14)
    assert bhattacharyya_bound(rho0, rho1, 10) == pytest.approx(0.17433922005, abs=1e-9)
    with pytest.raises(ValueError):
        bhattacharyya_bound(rho0, rho1, 0)


def test_bound_ordering_chernoff_vs_bhattacharyya():
    res = chernoff(GOLDEN_PAIR.rho0, GOLDEN_PAIR.rho1)
    for m in (1, 10, 100):
        assert 0.5 * res.q_star ** m <= bhattacharyya_bound(GOLDEN_PAIR.rho0,
                                                            GOLDEN_PAIR.rho1, m) + 1e-15


def test_helstrom_golden_values():
    assert helstrom_optimum(GOLDEN_PAIR.rho0, GOLDEN_PAIR.rho1) == \
        pytest.approx(0.4772620726123002, abs=1e-11)
    assert helstrom_optimum(TRACED_PAIR.rho0, TRACED_PAIR.rho1) == \
        pytest.approx(0.47726437110246733, abs=1e-11)
    # structured path agrees with the dense eigendecomposition path
    assert helstrom_optimum(dense_copy(GOLDEN_PAIR.rho0), dense_copy(GOLDEN_PAIR.rho1)) == \
        pytest.approx(0.4772620726123002, abs=1e-11)


def test_helstrom_below_half_q_half():
    for pair in (GOLDEN_PAIR, TRACED_PAIR):
        hel = helstrom_optimum(pair.rho0, pair.rho1)
        assert hel <= 0.5 * q_s(pair.rho0, pair.rho1, 0.5) + 1e-12
        assert hel <= 0.5
        assert hel <= bhattacharyya_bound(pair.rho0, pair.rho1, 1) + 1e-12


def test_povm_error_orthogonal_states():
    space = build_space(1, [2])
    r0 = DensityOperator.diagonal(space, [1.0, 0.0])
    r1 = DensityOperator.diagonal(space, [0.0, 1.0])
    e1 = np.diag([0.0, 1.0])
    e0 = np.diag([1.0, 0.0])
    assert povm_error(r0, r1, e0, e1, 0.5) == pytest.approx(0.0, abs=1e-15)
    assert helstrom_optimum(r0, r1) == pytest.approx(0.0, abs=1e-12)


def test_povm_error_always_guess_h0():
    rho0, rho1 = diag_pair([0.5, 0.5], [1.0, 0.0])
    e0 = np.eye(2)
    e1 = np.zeros((2, 2))
    assert povm_error(rho0, rho1, e0, e1, 0.5) == pytest.approx(0.5, abs=1e-15)


def test_povm_error_completeness_check():
    rho0, rho1 = diag_pair([0.5, 0.5], [1.0, 0.0])
    with pytest.raises(NumericalError):
        povm_error(rho0, rho1, np.eye(2), 0.5 * np.eye(2))
    with pytest.raises(NumericalError):
        povm_error(rho0, rho1, 2 * np.eye(2), -np.eye(2))


def test_closed_form_bounds_exact_values():
    with pytest.warns(RegimeWarning):
        val = error_bound_3gamma(0.01, 10.0, 0)  # nbar below the regime floor
        assert val == pytest.approx(0.5, abs=1e-16)
    p3 = error_bound_3gamma(0.01, 100.0, 1e4)
    assert p3 == pytest.approx(0.5 * math.exp(-10.0), rel=1e-15)
    p2 = error_bound_2gamma(0.1, 0.01, 100.0, 1e6)
    assert p2 == pytest.approx(0.5 * math.exp(-10.0), rel=1e-15)
    assert error_bound_3gamma(0.0, 100.0, 1e6) == pytest.approx(0.5, abs=1e-16)
    assert error_bound_2gamma(0.1, 0.0, 100.0, 1e6) == pytest.approx(0.5, abs=1e-16)
    assert error_bound_2gamma(0.1, 0.01, 100.0, 0) == pytest.approx(0.5, abs=1e-16)


def test_closed_form_regime_warnings():
    with pytest.warns(RegimeWarning):
        error_bound_3gamma(0.5, 100.0, 1)
    with pytest.warns(RegimeWarning):
        error_bound_3gamma(1e-6, 100.0, 1)  # eta below 10/nbar^2
    with pytest.warns(RegimeWarning):
        error_bound_2gamma(0.9, 0.01, 100.0, 1)


def test_advantage_ratio():
    assert advantage_ratio(0.01) == pytest.approx(100.0, abs=1e-12)
    assert advantage_ratio(0.1) == pytest.approx(10.0, abs=1e-13)
    assert advantage_ratio(0.999999) == pytest.approx(1.0, rel=1e-5)
    with pytest.raises(ValueError):
        advantage_ratio(1.0)
    with pytest.raises(ValueError):
        advantage_ratio(0.0)


def test_evaluate_point_record_fields():
    report = evaluate_point(GOLDEN_POINT, m_shots=100)
    rec = report.as_record()
    for key in ("s_star", "q_star", "exponent", "q_half", "helstrom",
                "p3g", "p2g", "ratio", "q_curve.s", "q_curve.q"):
        assert key in rec
    assert rec["q_half"] == pytest.approx(0.996920494113427, abs=1e-12)
    assert rec["ratio"] == pytest.approx(advantage_ratio(GOLDEN_POINT.theta ** 2), rel=1e-14)
    assert rec["q_star"] <= rec["q_half"]
    assert len(rec["q_curve.s"]) == 21


def test_qs_symmetry_on_structured_only_size():
    # dimension 5000 forbids the dense lane; both argument orders must still run
    pair = build_hypothesis_pair(AUDIT_POINT)
    assert pair.rho0.space.total_dim > pair.rho0.space.dense_limit
    for s in (0.0, 0.3, 0.5, 1.0):
        forward = q_s(pair.rho0, pair.rho1, s)
        swapped = q_s(pair.rho1, pair.rho0, 1.0 - s)
        assert forward == pytest.approx(swapped, abs=1e-12)
    assert helstrom_optimum(pair.rho0, pair.rho1) == \
        pytest.approx(helstrom_optimum(pair.rho1, pair.rho0), abs=1e-14)


def test_povm_error_of_helstrom_measurement_attains_optimum():
    rho0 = GOLDEN_PAIR.rho0.to_dense()
    rho1 = GOLDEN_PAIR.rho1.to_dense()
    w, v = np.linalg.eigh(0.5 * rho1 - 0.5 * rho0)
    e1 = (v * (w > 0)) @ v.conj().T  # decide target-present on the positive part
    e0 = np.eye(len(w)) - e1
    err = povm_error(GOLDEN_PAIR.rho0, GOLDEN_PAIR.rho1, e0, e1, 0.5)
    assert err == pytest.approx(helstrom_optimum(GOLDEN_PAIR.rho0, GOLDEN_PAIR.rho1),
                                abs=1e-12)


def test_chernoff_q_star_below_sampled_curve():
    res = chernoff(GOLDEN_PAIR.rho0, GOLDEN_PAIR.rho1)
    assert all(res.q_star <= q + 1e-10 for _, q in res.grid)


@pytest.mark.parametrize("params", DENSE_CHECK_POINTS,
                         ids=[f"point{i}" for i in range(len(DENSE_CHECK_POINTS))])
def test_structured_matches_dense_q_half_and_helstrom(params):
    pair = build_hypothesis_pair(params)
    structured_q = q_s(pair.rho0, pair.rho1, 0.5)
    dense_q = q_s(dense_copy(pair.rho0), dense_copy(pair.rho1), 0.5)
    assert structured_q == pytest.approx(dense_q, abs=1e-10)
    structured_h = helstrom_optimum(pair.rho0, pair.rho1)
    dense_h = helstrom_optimum(dense_copy(pair.rho0), dense_copy(pair.rho1))
    assert structured_h == pytest.approx(dense_h, abs=1e-10)
