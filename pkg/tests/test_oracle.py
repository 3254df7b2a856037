import math
from fractions import Fraction

import numpy as np
import pytest

from credlearn.experiments import ExperimentConfig, run_coverage
from credlearn.finite_space import SampleSpace
from credlearn.hypotheses import GaussianLabelModel, ThresholdHypothesis, expected_risk_gaussian, make_grid_space
from credlearn.oracle import (
    OracleError,
    SimplexGrid,
    _closed_risk,
    contamination_member,
    coverage_trial,
    dominated_by_contour,
    dominated_by_possibility,
    exhaustive_rademacher_matrix,
    grid_lower_envelope,
    grid_upper_envelope,
    mc_expected_risk,
    plateau_fixed_point,
)


def test_simplex_grid_enumeration():
    g = SimplexGrid(SampleSpace("abc"), 4)
    comps = list(g.compositions())
    assert len(comps) == len(g) == math.comb(6, 2)
    assert len(set(comps)) == len(comps)
    assert all(sum(c) == 4 and min(c) >= 0 for c in comps)
    assert all(abs(sum(p.probs) - 1) < 1e-12 for p in g.points())
    assert len(SimplexGrid(SampleSpace("a"), 7)) == 1
    with pytest.raises(OracleError):
        SimplexGrid(SampleSpace("abcde"), 2)
    with pytest.raises(OracleError):
        SimplexGrid(SampleSpace("ab"), 0)


def test_grid_envelopes_unconstrained_and_empty():
    g = SimplexGrid(SampleSpace("abc"), 10)
    assert grid_lower_envelope(lambda p: True, g, 0b011) == 0.0
    assert grid_upper_envelope(lambda p: True, g, 0b011) == 1.0
    with pytest.raises(OracleError):
        grid_lower_envelope(lambda p: False, g, 1)


def test_predicates():
    g = SimplexGrid(SampleSpace("abc"), 4)
    pts = list(g.points())
    point = dominated_by_contour((0.5, 1.0, 0.75))
    event = dominated_by_possibility((0.5, 1.0, 0.75))
    # the event-wise set is contained in the pointwise one
    assert all(point(p) for p in pts if event(p))
    assert any(point(p) and not event(p) for p in pts)
    cont = contamination_member([(1.0, 0.0, 0.0)], [0.25])
    assert sorted(tuple(map(float, p.probs)) for p in pts if cont(p)) == [(0.75, 0.0, 0.25), (0.75, 0.25, 0.0), (1.0, 0.0, 0.0)]


def test_plateau_fixed_point_examples():
    assert plateau_fixed_point([], lambda c: 1.0) == 0.0
    assert plateau_fixed_point([0.5, 0.5], lambda c: 0.2) == 0.2
    assert plateau_fixed_point([0.5, 0.5], lambda c: 0.7) == 0.5
    assert plateau_fixed_point([0.5, 0.1], lambda c: 0.3 if c == 1 else 0.05) == 0.05
    assert plateau_fixed_point([0.5, 0.1], lambda c: 0.3 if c == 1 else 0.2) == 0.3
    assert plateau_fixed_point([0.9], lambda c: 0.0) == 0.0


def test_exhaustive_rademacher_exact_values():
    # one column of ones averages to 0; with columns e1, e2 only sigma = (-1, -1) loses
    assert exhaustive_rademacher_matrix([[1], [1]], exact=True) == 0
    assert exhaustive_rademacher_matrix([[1, 0], [0, 1]], exact=True) == Fraction(1, 4)
    assert exhaustive_rademacher_matrix([[1, 0]], exact=True) == Fraction(1, 2)


def test_closed_risk_agrees_with_library():
    m = GaussianLabelModel(0.3, 1.7, -0.4, 0.15)
    for t in (-5.0, -0.4, 0.0, 2.5):
        h = ThresholdHypothesis(t)
        assert _closed_risk(t, True, 0.3, 1.7, -0.4, 0.15) == pytest.approx(expected_risk_gaussian(m, h), abs=1e-14)
        assert _closed_risk(t, False, 0.3, 1.7, -0.4, 0.15) == pytest.approx(
            expected_risk_gaussian(m, h.flipped()), abs=1e-14
        )


@pytest.mark.parametrize("theta", [-1.0, 0.5, 2.0])
def test_mc_risk_matches_closed_form(theta):
    m = GaussianLabelModel(0.0, 1.0, 0.0, 0.05)
    est, se = mc_expected_risk(m, ThresholdHypothesis(theta), 10**6, 3)
    assert abs(est - expected_risk_gaussian(m, ThresholdHypothesis(theta))) <= 3 * se


def test_coverage_trial_forced_zero_bound():
    cfg = {"n": 20, "flip_prob": 0.1, "bound": 0.0}
    assert coverage_trial(cfg, 25, 1) == (25, 25)
    assert coverage_trial(dict(cfg, bound=1.0), 25, 1) == (0, 25)
    with pytest.raises(OracleError):
        coverage_trial(cfg, 0, 1)


def coverage_cfg(rho):
    return ExperimentConfig.from_dict(
        {"experiment_id": "custom", "likelihood_means": [0.0], "likelihood_sds": [1.0],
         "h_count": 100, "grid_lo": -10, "grid_hi": 10, "delta": 0.05, "sample_sizes": [[50, 50]],
         "noise_rho": rho, "trials": 300, "master_seed": 9, "kind": "exp2"}
    )


@pytest.mark.parametrize("mode,rho,bound", [("risk", 0.0, "eps_ub"), ("excess", 0.1, "eps_prime_ub")])
def test_coverage_production_and_oracle_agree(mode, rho, bound):
    cfg = coverage_cfg(rho)
    row = run_coverage(cfg, mode).rows[0]
    v, t = coverage_trial({"n": 50, "flip_prob": rho, "mode": mode, "bound": bound}, 300, 9)
    band = 0.05 + 3 * math.sqrt(0.05 * 0.95 / 300)
    assert row[2] == pytest.approx(
        (math.log(100) + math.log(20)) / 50 if mode == "risk" else math.sqrt(2 * (math.log(100) + math.log(40)) / 50)
    )
    assert row[5] <= band and v / t <= band
