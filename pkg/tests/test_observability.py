"""Observability matrix construction, rank tests, and placement checks."""

import math

import numpy as np
import pytest

from siws.dynamics import taylor_jet
from siws.errors import DimensionMismatch, PreconditionViolated
from siws.model import (CouplingLayer, InfrastructureLayer, PopulationLayer,
                        State, validate_model)
from siws.observability import (MeasurementMap, UncheckedModel, build_O,
                                closed_form_blocks, f_condition,
                                observability_report, rank_test,
                                sensor_placement_check)

from conftest import random_unscaled_model


def rank_one_coupling_model() -> UncheckedModel:
    """2+2 model whose infrastructure feeds the population through one column."""
    pop = PopulationLayer(beta=[[1.0, 1.0], [1.0, 2.0]], delta=[1.0, 1.0])
    infra = InfrastructureLayer(alpha=[[1.0, 1.0], [1.0, 1.0]],
                                delta_w=[1.0, 1.0])
    coup = CouplingLayer(beta_w=[[1.0, 0.0], [1.0, 0.0]],
                         c_w=[[1.0, 1.0], [1.0, 1.0]])
    return UncheckedModel(pop=pop, infra=infra, coupling=coup)


def test_w_block_closed_form_exact():
    model = rank_one_coupling_model()
    meas = MeasurementMap.identity(2)
    for w1 in (0.25, 0.5, 0.75, 1.25, 1.5):
        blocks = closed_form_blocks(model, meas, np.array([w1, 0.625]))
        expected = np.array([[1.0 - 2.0 * w1, 1.0], [2.0 - 2.0 * w1, 1.0]])
        assert np.array_equal(blocks[2][:, 2:], expected)


def test_full_rank_despite_rank_one_coupling():
    model = rank_one_coupling_model()
    meas = MeasurementMap.identity(2)
    rng = np.random.default_rng(21)
    for _ in range(5):
        w0 = rng.uniform(0.0, 2.0, 2)
        rank, full = rank_test(build_O(model, meas, w0))
        assert rank == 4 and full
    fc = f_condition(model, meas)
    assert fc.rank_cbw == 1 and not fc.holds


def test_low_order_blocks_at_zero_contamination():
    rng = np.random.default_rng(22)
    model = random_unscaled_model(rng, n=3, m=2)
    meas = MeasurementMap.identity(3)
    O = build_O(model, meas, np.zeros(2), order=2)
    assert np.array_equal(O[:3, :3], np.eye(3))
    assert not O[:3, 3:].any()
    f_x0 = model.pop.beta - np.diag(model.pop.delta)
    assert np.allclose(O[3:6, :3], f_x0, atol=1e-14)
    assert np.allclose(O[3:6, 3:], model.coupling.beta_w, atol=1e-14)


def test_closed_form_matches_jet_on_random_models():
    rng = np.random.default_rng(23)
    for _ in range(25):
        model = random_unscaled_model(rng, n=3, m=2)
        meas = MeasurementMap(c_matrix=rng.uniform(0, 1, (3, 3)))
        w0 = rng.uniform(0, 2, 2)
        jet = taylor_jet(model, State(x=np.zeros(3), w=w0), 2,
                         with_sensitivities=True)
        closed = closed_form_blocks(model, meas, w0)
        for k in range(3):
            blk = math.factorial(k) * (meas.c_matrix @ jet.sens[k][:3, :])
            scale = max(1.0, np.abs(closed[k]).max())
            assert np.abs(blk - closed[k]).max() / scale < 1e-8


def test_output_derivative_sensitivities_vs_finite_differences():
    rng = np.random.default_rng(24)
    h = 1e-6
    model = random_unscaled_model(rng, n=3, m=2)
    C = rng.uniform(0, 1, (2, 3))
    meas = MeasurementMap(c_matrix=C)
    w0 = rng.uniform(0.2, 1.5, 2)
    O = build_O(model, meas, w0, order=4)
    z0 = np.concatenate([np.zeros(3), w0])
    dim = 5
    for k in range(1, 5):
        fd = np.zeros((2, dim))
        for j in range(dim):
            e = np.zeros(dim)
            e[j] = h
            yp = C @ taylor_jet(model, z0 + e, k).coeffs[k][:3]
            ym = C @ taylor_jet(model, z0 - e, k).coeffs[k][:3]
            fd[:, j] = math.factorial(k) * (yp - ym) / (2 * h)
        blk = O[2 * k:2 * (k + 1), :]
        scale = max(1.0, np.abs(fd).max())
        assert np.abs(blk - fd).max() / scale < 1e-5


def test_rank_zero_measurement():
    model = rank_one_coupling_model()
    meas = MeasurementMap(c_matrix=np.zeros((2, 2)))
    rank, full = rank_test(build_O(model, meas, np.ones(2)))
    assert rank == 0 and not full


def test_rank_block_diagonal_additivity():
    rng = np.random.default_rng(25)
    a = rng.uniform(1, 2, (3, 2))  # rank 2
    b = np.outer(rng.uniform(1, 2, 4), rng.uniform(1, 2, 3))  # rank 1
    block = np.block([[a, np.zeros((3, 3))], [np.zeros((4, 2)), b]])
    rank, _ = rank_test(block)
    assert rank == 3


def test_f_condition_cases():
    rng = np.random.default_rng(26)
    model = random_unscaled_model(rng, n=3, m=2)
    # a zero measurement row drops rank(C) below n
    c = np.eye(3)
    c[2] = 0.0
    fc = f_condition(model, MeasurementMap(c_matrix=c))
    assert fc.rank_c == 2 and not fc.holds
    with pytest.raises(DimensionMismatch):
        f_condition(model, MeasurementMap(c_matrix=np.eye(4)))


def test_sensor_placement_cases():
    pop = PopulationLayer(beta=np.ones((3, 3)), delta=[1.0, 1.0, 1.0])
    alpha = np.array([[-1.0, 1.0], [1.0, -1.0]])
    infra = InfrastructureLayer(alpha=alpha, delta_w=[1.0, 1.0])

    full = CouplingLayer(beta_w=[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
                         c_w=np.ones((2, 3)))
    model = validate_model(pop, infra, full, "A2")
    rep = sensor_placement_check(model)
    assert rep.observable and rep.deficiency == 0

    dup = CouplingLayer(beta_w=[[1.0, 1.0], [0.5, 0.5], [0.2, 0.2]],
                        c_w=np.ones((2, 3)))
    model = validate_model(pop, infra, dup, "A2")
    rep = sensor_placement_check(model)
    assert not rep.observable and rep.deficiency == 1

    wide = rank_one_coupling_model()
    rep = sensor_placement_check(wide)
    assert not rep.observable and rep.deficiency == 1

    pop1 = PopulationLayer(beta=[[1.0]], delta=[1.0])
    infra2 = InfrastructureLayer(alpha=alpha, delta_w=[1.0, 1.0])
    coup = CouplingLayer(beta_w=[[1.0, 1.0]], c_w=[[1.0], [1.0]])
    narrow = validate_model(pop1, infra2, coup, "A2")
    with pytest.raises(PreconditionViolated):
        sensor_placement_check(narrow)


def test_sufficiency_implication_on_random_instances():
    rng = np.random.default_rng(27)
    checked = 0
    while checked < 10:
        model = random_unscaled_model(rng, n=3, m=2, density=0.8)
        meas = MeasurementMap.identity(3)
        if not f_condition(model, meas).holds:
            continue
        rank, full = rank_test(build_O(model, meas, rng.uniform(0, 2, 2)))
        assert full
        checked += 1


def test_report_shape_and_flags():
    model = rank_one_coupling_model()
    rep = observability_report(model, samples=5, seed=99)
    assert rep.order == 4
    assert rep.o_matrix.shape == (2 * 5, 4)
    assert rep.rank == 4 and rep.full_rank
    assert rep.generic and rep.ranks == [4] * 6
    assert rep.w_eval.shape == (6, 2)
    assert rep.cor2 is False  # C = I but B_w rank-deficient: not concluded
    assert not rep.a2_structure
    assert rep.row3_mismatch is not None and rep.row3_mismatch > 1e-8
    assert rep.rank_truncated == 4
    d = rep.to_dict()
    assert set(d) >= {"order", "rank", "full_rank", "generic", "w_eval",
                      "f_condition", "cor2", "singular_values",
                      "a2_structure"}


def test_report_cor2_true_case():
    pop = PopulationLayer(beta=np.ones((3, 3)), delta=[2.0, 2.0, 2.0])
    alpha = np.array([[-1.0, 1.0], [1.0, -1.0]])
    infra = InfrastructureLayer(alpha=alpha, delta_w=[1.0, 1.0])
    coup = CouplingLayer(beta_w=[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
                         c_w=np.ones((2, 3)))
    model = validate_model(pop, infra, coup, "A2")
    rep = observability_report(model, samples=3, seed=1)
    assert rep.cor2 is True
    assert rep.full_rank
    assert rep.a2_structure


def test_build_O_order_validation():
    model = rank_one_coupling_model()
    meas = MeasurementMap.identity(2)
    with pytest.raises(PreconditionViolated):
        build_O(model, meas, np.ones(2), order=0)
    with pytest.raises(DimensionMismatch):
        build_O(model, meas, np.ones(3))
