"""Acceptance criteria, one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the summary lines
(they are also written with capture disabled, so a plain ``pytest -v`` shows them).
"""

import contextlib
import io
import itertools
import json
import math
import os
import subprocess
import sys
import time
from importlib import resources

import numpy as np
import pytest

from credlearn.bounds import (
    MonteCarloParams,
    RiskOracle,
    diam_shift,
    drift_bound_agnostic,
    drift_bound_realizable,
    empirical_rademacher_mc,
    epsilon_3star,
    epsilon_prime_ub,
    epsilon_star,
    epsilon_star_from_count,
    epsilon_star_star,
    epsilon_ub,
    rademacher_mc,
)
from credlearn.cli import main
from credlearn.construction import LikelihoodEnsemble, construct_from_config, contour_from_likelihoods
from credlearn.experiments import ExperimentConfig, run_coverage, run_experiment, truncate5
from credlearn.finite_space import CredalSet
from credlearn.hypotheses import (
    GaussianLabelModel,
    LabeledDataset,
    ThresholdHypothesis,
    expected_risk_gaussian,
    make_grid_space,
)
from credlearn.oracle import coverage_trial, exhaustive_rademacher, exhaustive_rademacher_matrix, mc_expected_risk

CONFIGS = resources.files("credlearn").joinpath("configs")

NS = [10, 100, 200, 300, 400, 500]
UB = [0.76009, 0.07600, 0.03800, 0.02533, 0.01900, 0.01520]
COUNTS = [86, 96, 97, 98, 99, 98]
STAR = [0.74500, 0.07560, 0.03785, 0.02526, 0.01897, 0.01516]
PRIME_UB_10 = [0.84877, 0.26840, 0.18979, 0.15496, 0.13420, 0.12003]


def bundled(name):
    return json.loads(CONFIGS.joinpath(f"{name}.json").read_text())


@contextlib.contextmanager
def criterion(label, pytestconfig, limit=None):
    start = time.perf_counter()
    status, detail = "PASS", ""
    try:
        yield
        elapsed = time.perf_counter() - start
        if limit is not None and elapsed >= limit:
            status, detail = "FAIL", f" runtime {elapsed:.1f}s exceeds {limit}s"
            raise AssertionError(detail.strip())
    except BaseException as exc:
        if status == "PASS":
            status, detail = "FAIL", f" {type(exc).__name__}: {exc}"
        raise
    finally:
        elapsed = time.perf_counter() - start
        line = f"ACCEPTANCE {label}: {status} ({elapsed:.2f}s){detail}"
        capman = pytestconfig.pluginmanager.getplugin("capturemanager")
        with capman.global_and_fixture_disabled():
            print("\n" + line)


# --- 1 ---------------------------------------------------------------------------


def reference_deviations():
    ub = [epsilon_ub(100, n, 0.05).bound_value for n in NS]
    star = [epsilon_star_from_count(c, n, 0.05) for c, n in zip(COUNTS, NS)]
    return [abs(a - b) for a, b in zip(ub + star, UB + STAR)], ub + star


def test_criterion_1_formulas(pytestconfig):
    """Every cell equals the reference digits under 5-decimal truncation.

    The fixed-point solver is exercised too: a risk profile with exactly c bad
    hypotheses forces the least self-consistent value onto the c-plateau.
    """
    with criterion("criterion 1 (closed forms, 5-decimal truncated display)", pytestconfig, limit=1.0):
        _, values = reference_deviations()
        assert [truncate5(v) for v in values] == [f"{v:.5f}" for v in UB + STAR]
        hs = make_grid_space(-10, 10, 100)
        for c, n, v in zip(COUNTS, NS, values[6:]):
            mat = np.r_[np.full(c, 0.99), np.zeros(100 - c)][None, :]
            r = epsilon_star(RiskOracle.from_matrix(mat), hs, n, 0.05)
            assert r.bound_value == v and r.intermediates["bad_set_size"] == c


@pytest.mark.xfail(
    strict=True,
    reason="reference digits are truncated, not rounded: 5 of 12 exact values sit 6e-6 to 9e-6 above them",
)
def test_criterion_1_stated_tolerance(pytestconfig):
    devs, _ = reference_deviations()
    bad = [d for d in devs if d > 5e-6]
    with criterion("criterion 1 (closed forms at stated tolerance 5e-6)", pytestconfig):
        assert not bad, f"{len(bad)}/12 cells exceed 5e-6, worst {max(bad):.2e}"


# --- 2 ---------------------------------------------------------------------------

POSSIBILITY_EXAMPLE = {("w1",): (0.0, 0.5), ("w2",): (0.25, 1.0), ("w3",): (0.0, 0.75),
          ("w1", "w2"): (0.25, 1.0), ("w2", "w3"): (0.5, 1.0), ("w1", "w3"): (0.0, 0.75)}
CONTAMINATION_EXAMPLE = {("w1",): (0.09, 0.58), ("w2",): (0.08, 0.82), ("w3",): (0.09, 0.68),
              ("w1", "w2"): (0.32, 0.91), ("w2", "w3"): (0.42, 0.91), ("w1", "w3"): (0.18, 0.92)}
SUBJECTIVE = {(4,): 1 / 3, (5,): 1 / 3, (6,): 1 / 4, (4, 5): 2 / 3, (5, 6): 2 / 3, (4, 6): 7 / 12}


def test_criterion_2_construction(pytestconfig):
    with criterion("criterion 2 (constructions)", pytestconfig, limit=1.0):
        doc = bundled("construct_contour")
        contour = contour_from_likelihoods(LikelihoodEnsemble.from_vectors(doc["outcomes"], doc["likelihoods"]))
        assert np.allclose(contour.pl, [0.5, 1.0, 0.75], atol=1e-12, rtol=0)
        res = construct_from_config(doc, "contour")
        for labels, (lo, up) in POSSIBILITY_EXAMPLE.items():
            m = res.lower.space.mask(labels)
            assert abs(res.lower[m] - lo) <= 1e-12 and abs(res.upper[m] - up) <= 1e-12
        res = construct_from_config(bundled("construct_contamination"), "contamination")
        for labels, (lo, up) in CONTAMINATION_EXAMPLE.items():
            m = res.lower.space.mask(labels)
            assert abs(res.lower[m] - lo) <= 1e-12 and abs(res.upper[m] - up) <= 1e-12
        res = construct_from_config(bundled("construct_subjectivist"), "subjectivist")
        for labels, v in SUBJECTIVE.items():
            assert abs(res.lower.at(labels) - v) <= 1e-15


# --- 3 ---------------------------------------------------------------------------


def test_criterion_3_experiment2(pytestconfig):
    with criterion("criterion 3 (exp2 sanity)", pytestconfig, limit=30.0):
        table = run_experiment(ExperimentConfig.from_dict(bundled("exp2_sanity")))
        assert [(r[0], r[1]) for r in table.rows] == [(1000, 500), (1500, 1000), (2000, 1500)]
        for r in table.rows:
            assert r[2] == 0.0 and truncate5(r[2]) == "0.00000"
            assert r[6] == 0 and r[7] == 1000
        assert [truncate5(r[5]) for r in table.rows] == ["0.01520", "0.00760", "0.00506"]


# --- 4 ---------------------------------------------------------------------------


def test_criterion_4_experiment3(pytestconfig):
    with criterion("criterion 4 (exp3 agnostic)", pytestconfig, limit=60.0):
        for log in ("natural", "ten"):
            cfg = ExperimentConfig.from_dict(dict(bundled("exp3_agnostic"), log_base=log))
            table = run_experiment(cfg)
            assert [r[0] for r in table.rows] == NS
            for n, l_hat, l_star, diff, ess, pub, _ in table.rows:
                assert l_star == 0.1 and truncate5(l_star) == "0.10000"
                assert diff == l_hat - l_star
                assert diff <= ess <= pub
            if log == "ten":
                got = [r[5] for r in table.rows]
                assert all(abs(a - b) <= 5e-5 for a, b in zip(got, PRIME_UB_10)), got


# --- 5 ---------------------------------------------------------------------------


def property_a():
    for seed in range(100):
        rng = np.random.default_rng([5, seed])
        hs = make_grid_space(-3, 3, int(rng.integers(2, 60)))
        k = int(rng.integers(1, 5))
        n = int(rng.integers(1, 400))
        delta = float(rng.uniform(0.001, 0.5))
        mat = rng.random((k, len(hs))) * (rng.random((k, len(hs))) < 0.6)
        oracle = RiskOracle.from_matrix(mat)
        assert epsilon_star(oracle, hs, n, delta).bound_value <= epsilon_ub(len(hs), n, delta).bound_value
        d = LabeledDataset(rng.normal(size=n), rng.integers(0, 2, size=n))
        assert (epsilon_star_star(oracle, hs, d, None, delta).bound_value
                <= epsilon_prime_ub(len(hs), n, delta).bound_value)


def property_b():
    hs = make_grid_space(-3, 3, 20)
    m = GaussianLabelModel(0.0, 1.0, 0.0, 0.1)
    single = CredalSet.from_vectors("ab", [(0.4, 0.6)])
    t1 = epsilon_star(RiskOracle([m]), hs, 50, 0.05)
    assert diam_shift(t1, single).bound_value == t1.bound_value
    d = LabeledDataset(*m.draw(np.random.default_rng(1), 50))
    t2 = epsilon_star_star(RiskOracle([m]), hs, d, None, 0.05)
    assert diam_shift(t2, single).bound_value == t2.bound_value
    t3 = epsilon_3star([m], hs, 50, 0.05, MonteCarloParams(100, 10), seed=2)
    assert diam_shift(t3, eta=0.0).bound_value == t3.bound_value
    # with one extreme point the robust bound is the classical 4 R + sqrt(2 ln(2/delta)/n)
    r, _ = rademacher_mc(m, hs, 50, 100, 10, seed=2, key=(0, 50))
    assert t3.bound_value == pytest.approx(4 * r + math.sqrt(2 * math.log(40) / 50), abs=1e-15)


def property_c():
    for n in range(2, 201):
        for k in range(1, n):
            assert drift_bound_realizable(1.0, n, k) >= 4 - 1e-12
            assert drift_bound_agnostic(1.0, n, k) >= 2 - 1e-12


def property_d():
    # same frozen instance family as the unit suite
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 13))
        d = LabeledDataset(rng.normal(size=n), rng.integers(0, 2, size=n))
        hs = make_grid_space(-2, 2, 7)
        exact = exhaustive_rademacher(d, hs)
        est, se = empirical_rademacher_mc(hs.loss_matrix(d.x, d.y), sigma_reps=4000, seed=seed)
        assert abs(est - exact) <= 3 * se + 1e-12, (seed, est, exact, se)
    shatter = np.array(list(itertools.product((0, 1), repeat=8))).T
    assert exhaustive_rademacher_matrix(shatter, exact=True) == 0.5


def property_e():
    rng = np.random.default_rng(2024)
    for t in range(50):
        theta, star = rng.uniform(-3, 3, size=2)
        rho = float(rng.uniform(0, 0.45))
        m = GaussianLabelModel(0.0, 1.0, float(star), rho)
        h = ThresholdHypothesis(float(theta))
        est, se = mc_expected_risk(m, h, 10**6, t)
        assert abs(est - expected_risk_gaussian(m, h)) <= 3 * se, (t, theta, star, rho)


def property_f():
    band = 0.05 + 3 * math.sqrt(0.05 * 0.95 / 1000)
    base = {"likelihood_means": [0.0], "likelihood_sds": [1.0], "h_count": 100, "grid_lo": -10.0,
            "grid_hi": 10.0, "delta": 0.05, "sample_sizes": [[100, 100]], "trials": 1000,
            "master_seed": 31, "experiment_id": "custom", "kind": "exp2"}
    for rho, mode, bound in ((0.0, "risk", "eps_ub"), (0.1, "excess", "eps_prime_ub")):
        row = run_coverage(ExperimentConfig.from_dict(dict(base, noise_rho=rho)), mode).rows[0]
        assert row[5] <= band, row
        v, t = coverage_trial({"n": 100, "flip_prob": rho, "mode": mode, "bound": bound}, 1000, 31)
        assert v / t <= band


def test_criterion_5_properties(pytestconfig):
    with criterion("criterion 5 (property suite a-f)", pytestconfig, limit=300.0):
        for part in (property_a, property_b, property_c, property_d, property_e, property_f):
            part()


# --- 6 ---------------------------------------------------------------------------


def cli_output(argv, out_dir=None):
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = main(argv)
    assert code == 0, argv
    files = {}
    if out_dir is not None:
        for p in sorted(out_dir.rglob("*")):
            if p.is_file():
                files[str(p.relative_to(out_dir))] = p.read_bytes()
    return buf.getvalue().encode(), files


def test_criterion_6_determinism(pytestconfig, tmp_path):
    t3 = tmp_path / "t3.json"
    t3.write_text(json.dumps({"formula": "C3_2_drift", "n": 40, "k": 20, "sigma_reps": 40, "data_reps": 5,
                              "models": [{"mean": 0.0, "sd": 1.0, "true_theta": 0.0, "flip_prob": 0.1}],
                              "hypotheses": {"grid_lo": -3, "grid_hi": 3, "count": 20}}))
    commands = [
        ["construct", "--config", str(CONFIGS.joinpath(f"construct_{r}.json")), "--route", r]
        for r in ("contour", "contamination", "subjectivist")
    ] + [
        ["bound", "--config", str(CONFIGS.joinpath("bound_c_ub.json"))],
        ["bound", "--config", str(CONFIGS.joinpath("bound_t1_gaussian.json")), "--format", "csv"],
        ["bound", "--config", str(t3), "--seed", "11"],
        ["experiment", "--name", "exp1_wide"],
        ["experiment", "--name", "exp1_narrow", "--format", "csv"],
        ["experiment", "--name", "exp3_agnostic", "--log-base", "10"],
        ["coverage", "--name", "exp2_sanity", "--trials", "50", "--n", "200"],
    ]
    with criterion("criterion 6 (byte-identical reruns)", pytestconfig):
        for argv in commands:
            assert cli_output(argv) == cli_output(argv), argv
        dirs = [tmp_path / "a", tmp_path / "b"]
        outs = [cli_output(["construct", "--config", str(CONFIGS.joinpath("construct_contour.json")),
                            "--route", "contour", "--out", str(d)], d) for d in dirs]
        assert outs[0] == outs[1] and outs[0][1]
        # separate processes with different hash seeds
        runs = []
        for hash_seed in ("1", "2"):
            env = dict(os.environ, PYTHONHASHSEED=hash_seed)
            res = subprocess.run([sys.executable, "-m", "credlearn.cli", "bound", "--config", str(t3)],
                                 capture_output=True, env=env, check=True)
            runs.append(res.stdout)
        assert runs[0] == runs[1]
