"""Generalization bounds for an ERM when the data law lies in a credal set.

The credal set enters only through its extreme points. A :class:`RiskOracle`
maps (extreme index, hypothesis) to an expected zero-one risk, which is all the
finite-space bounds need; the Rademacher bounds also sample from the extremes.

Formula identifiers used in :class:`BoundReport`:

==============  ===========================================================
``T1``          least self-consistent eps*, realizable, finite H
``C_UB``        (log|H| + log(1/delta)) / n
``C1_1_drift``  eps* n^2 / (k (n - k))
``C1_3_diam``   eps* + diam_TV
``T2``          least self-consistent eps**, agnostic, finite H
``C_PRIME_UB``  sqrt(2 (log|H| + log(2/delta)) / n)
``C2_2_drift``  eps** sqrt(n / (k (n - k))) (sqrt(k) + sqrt(n - k))
``C2_3_diam``   eps** + diam_TV
``T3``          4 max_ex R_n + sqrt(2 log(2/delta) / n)
``C3_2_drift``  4 (R_k + R_{n-k}) + sqrt(2 log(2/delta) / (n (n-k))) (sqrt(n-k) + sqrt(n))
``C3_3_diam``   eps*** + diam_TV
==============  ===========================================================
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .finite_space import CredalSet, FiniteDistribution, diameter_tv
from .hypotheses import (
    GaussianLabelModel,
    HypothesisSpace,
    LabeledDataset,
    draw_from,
    empirical_risks,
    expected_risk_finite,
    expected_risks_gaussian,
)
from .rng import substream

FORMULA_IDS = (
    "T1",
    "C_UB",
    "C1_1_drift",
    "C1_3_diam",
    "T2",
    "C_PRIME_UB",
    "C2_2_drift",
    "C2_3_diam",
    "T3",
    "C3_2_drift",
    "C3_3_diam",
)
DIAMETER_OF = {"T1": "C1_3_diam", "T2": "C2_3_diam", "T3": "C3_3_diam"}
DRIFT_OF = {"T1": "C1_1_drift", "T2": "C2_2_drift", "T3": "C3_2_drift"}

BISECTION_TOL = 1e-10
CSV_COLUMNS = ("formula_id", "n", "delta", "bound", "bad_set_size", "rademacher", "stderr", "eta", "k", "iterations")


class NumericalFailure(RuntimeError):
    """The fixed-point search could not bracket or converge."""


@dataclass
class BoundReport:
    formula_id: str
    bound_value: float
    delta: float
    n: int
    intermediates: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.formula_id not in FORMULA_IDS:
            raise ValueError(f"unknown formula id {self.formula_id!r}")
        if not self.bound_value >= 0:
            raise ValueError(f"bound must be non-negative, got {self.bound_value}")

    def to_json(self) -> dict:
        return {
            "formula_id": self.formula_id,
            "bound": self.bound_value,
            "delta": self.delta,
            "n": self.n,
            "intermediates": _jsonable(self.intermediates),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def csv_row(self) -> dict:
        im = self.intermediates
        return {
            "formula_id": self.formula_id,
            "n": self.n,
            "delta": self.delta,
            "bound": self.bound_value,
            "bad_set_size": im.get("bad_set_size", ""),
            "rademacher": im.get("rademacher_estimate", ""),
            "stderr": im.get("rademacher_stderr", ""),
            "eta": im.get("diameter_eta", ""),
            "k": im.get("k", ""),
            "iterations": im.get("iterations", ""),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerow(self.csv_row())
        return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def log_fn(log_base: str = "e") -> Callable[[float], float]:
    if log_base in ("e", "natural"):
        return math.log
    if log_base in ("10", "ten"):
        return math.log10
    raise ValueError(f"log base must be 'e' or '10', not {log_base!r}")


def _check(n: int, delta: float) -> None:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")


def _check_split(n: int, k: int) -> None:
    if not 0 < k < n:
        raise ValueError(f"drift split needs 0 < k < n (got k={k}, n={n})")


class RiskOracle:
    """Expected risk of each hypothesis under each extreme of a credal set.

    ``sources`` are :class:`FiniteDistribution` objects over (x, y) outcomes or
    :class:`GaussianLabelModel` instances; ``matrix`` overrides them with a fixed
    (extremes, |H|) table of risks.
    """

    def __init__(self, sources: Sequence = (), matrix: np.ndarray | None = None):
        self.sources = tuple(sources)
        self._matrix = None if matrix is None else np.atleast_2d(np.asarray(matrix, dtype=float))
        if not self.sources and self._matrix is None:
            raise ValueError("risk oracle needs sources or a risk matrix")

    @classmethod
    def from_credal_set(cls, c: CredalSet) -> "RiskOracle":
        return cls(c.extremes)

    @classmethod
    def from_matrix(cls, matrix) -> "RiskOracle":
        return cls(matrix=matrix)

    @property
    def n_extremes(self) -> int:
        return len(self._matrix) if self._matrix is not None else len(self.sources)

    def risk(self, i: int, h) -> float:
        src = self.sources[i]
        if isinstance(src, FiniteDistribution):
            return expected_risk_finite(src, h)
        return float(expected_risks_gaussian(src, HypothesisSpace([h]))[0])

    def risk_matrix(self, hs: HypothesisSpace) -> np.ndarray:
        if self._matrix is not None:
            if self._matrix.shape[1] != len(hs):
                raise ValueError("risk matrix width does not match the hypothesis space")
            return self._matrix
        rows = []
        for src in self.sources:
            if isinstance(src, GaussianLabelModel):
                rows.append(expected_risks_gaussian(src, hs))
            else:
                rows.append([expected_risk_finite(src, h) for h in hs])
        return np.asarray(rows, dtype=float)


def bad_set_realizable(oracle: RiskOracle, hs: HypothesisSpace, eps: float) -> frozenset:
    """Hypotheses whose risk exceeds ``eps`` under at least one extreme."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    worst = oracle.risk_matrix(hs).max(axis=0)
    return frozenset(np.flatnonzero(worst > eps).tolist())


def bad_set_agnostic(oracle: RiskOracle, hs: HypothesisSpace, d: LabeledDataset, eps: float) -> frozenset:
    """Hypotheses whose empirical-vs-expected gap exceeds eps/2 under some extreme."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    gaps = _max_gaps(oracle, hs, d)
    return frozenset(np.flatnonzero(gaps > eps / 2).tolist())


def _max_gaps(oracle: RiskOracle, hs: HypothesisSpace, d: LabeledDataset) -> np.ndarray:
    emp = empirical_risks(d, hs)
    return np.abs(oracle.risk_matrix(hs) - emp[None, :]).max(axis=0)


def least_fixed_point(
    count: Callable[[float], int],
    value: Callable[[int], float],
    hi: float,
    tol: float = BISECTION_TOL,
    max_iter: int = 200,
) -> tuple[float, int]:
    """Smallest eps >= 0 with count(eps) == 0 or value(count(eps)) <= eps.

    ``count`` must be non-increasing in eps, which makes the accepted set an
    up-ray; bisection on [0, hi] finds its left end. When the final plateau has a
    genuine fixed point value(c) inside the bracket it is returned exactly.
    Returns (eps, iterations).
    """

    def ok(eps: float) -> bool:
        c = count(eps)
        return c == 0 or value(c) <= eps

    if ok(0.0):
        return 0.0, 0
    if not ok(hi):
        raise NumericalFailure(f"fixed point not bracketed by [0, {hi}]")
    lo, it = 0.0, 0
    while hi - lo > tol:
        if it >= max_iter:
            raise NumericalFailure("bisection did not converge")
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
        it += 1
    c = count(hi)
    if c > 0:
        cand = value(c)
        if lo < cand <= hi and ok(cand):
            return cand, it
    return hi, it


def epsilon_star_from_count(bad_set_size: int, n: int, delta: float, log_base: str = "e") -> float:
    """(log|B| + log(1/delta)) / n for a given bad-set size."""
    _check(n, delta)
    if bad_set_size < 1:
        raise ValueError("bad-set size must be at least 1 for the closed formula")
    log = log_fn(log_base)
    return (log(bad_set_size) + log(1.0 / delta)) / n


def epsilon_star_star_from_count(bad_set_size: int, n: int, delta: float, log_base: str = "e") -> float:
    _check(n, delta)
    if bad_set_size < 1:
        raise ValueError("bad-set size must be at least 1 for the closed formula")
    log = log_fn(log_base)
    return math.sqrt(2.0 * (log(bad_set_size) + log(2.0 / delta)) / n)


def epsilon_ub(h_count: int, n: int, delta: float, log_base: str = "e") -> BoundReport:
    if h_count < 1:
        raise ValueError("|H| must be at least 1")
    value = epsilon_star_from_count(h_count, n, delta, log_base)
    return BoundReport("C_UB", value, delta, n, {"h_count": h_count, "log_base": log_base})


def epsilon_prime_ub(h_count: int, n: int, delta: float, log_base: str = "e") -> BoundReport:
    if h_count < 1:
        raise ValueError("|H| must be at least 1")
    value = epsilon_star_star_from_count(h_count, n, delta, log_base)
    return BoundReport("C_PRIME_UB", value, delta, n, {"h_count": h_count, "log_base": log_base})


def epsilon_star(
    oracle: RiskOracle,
    hs: HypothesisSpace,
    n: int,
    delta: float,
    log_base: str = "e",
    tol: float = BISECTION_TOL,
    max_iter: int = 200,
) -> BoundReport:
    """Realizable bound: least eps with (log|B(eps)| + log(1/delta)) / n <= eps."""
    _check(n, delta)
    worst = oracle.risk_matrix(hs).max(axis=0)
    realizable = bool(np.any(worst == 0.0))
    hi = epsilon_star_from_count(len(hs), n, delta, log_base)
    eps, it = least_fixed_point(
        lambda e: int(np.count_nonzero(worst > e)),
        lambda c: epsilon_star_from_count(c, n, delta, log_base),
        hi,
        tol,
        max_iter,
    )
    return BoundReport(
        "T1",
        eps,
        delta,
        n,
        {
            "bad_set_size": int(np.count_nonzero(worst > eps)),
            "iterations": it,
            "h_count": len(hs),
            "realizable": realizable,
            "log_base": log_base,
        },
    )


def epsilon_star_star(
    oracle: RiskOracle,
    hs: HypothesisSpace,
    d: LabeledDataset,
    n: int | None,
    delta: float,
    log_base: str = "e",
    tol: float = BISECTION_TOL,
    max_iter: int = 200,
) -> BoundReport:
    """Agnostic bound: least eps with sqrt(2 (log|B'(eps)| + log(2/delta)) / n) <= eps.

    ``n`` defaults to the size of ``d``, the sample behind the empirical risks.
    """
    n = len(d) if n is None else n
    _check(n, delta)
    gaps = _max_gaps(oracle, hs, d)
    hi = epsilon_star_star_from_count(len(hs), n, delta, log_base)
    eps, it = least_fixed_point(
        lambda e: int(np.count_nonzero(gaps > e / 2)),
        lambda c: epsilon_star_star_from_count(c, n, delta, log_base),
        hi,
        tol,
        max_iter,
    )
    return BoundReport(
        "T2",
        eps,
        delta,
        n,
        {
            "bad_set_size": int(np.count_nonzero(gaps > eps / 2)),
            "iterations": it,
            "h_count": len(hs),
            "max_gap": float(gaps.max()),
            "log_base": log_base,
        },
    )


def drift_bound_realizable(eps_star: float, n: int, k: int) -> float:
    _check_split(n, k)
    return eps_star * n * n / (k * (n - k))


def drift_bound_agnostic(eps_ss: float, n: int, k: int) -> float:
    _check_split(n, k)
    return eps_ss * math.sqrt(n / (k * (n - k))) * (math.sqrt(k) + math.sqrt(n - k))


def drift_report(base: BoundReport, k: int) -> BoundReport:
    """Drift bound of a T1 or T2 report for a split after ``k`` points."""
    if base.formula_id == "T1":
        value = drift_bound_realizable(base.bound_value, base.n, k)
    elif base.formula_id == "T2":
        value = drift_bound_agnostic(base.bound_value, base.n, k)
    else:
        raise ValueError("drift reports derive from T1 or T2; use drift_bound_rademacher for T3")
    im = dict(base.intermediates, k=k, base_bound=base.bound_value)
    return BoundReport(DRIFT_OF[base.formula_id], value, base.delta, base.n, im)


def diam_shift(
    bound: BoundReport | float,
    c: CredalSet | None = None,
    *,
    eta: float | None = None,
    base: str | None = None,
    delta: float | None = None,
    n: int | None = None,
) -> BoundReport:
    """Add the TV diameter of the credal set to a T1/T2/T3 bound.

    Pass the credal set ``c`` for finite spaces, or ``eta`` directly (e.g. from
    :func:`credlearn.hypotheses.gaussian_tv` for Gaussian extremes).
    """
    if (c is None) == (eta is None):
        raise ValueError("pass exactly one of a credal set or an explicit eta")
    eta = diameter_tv(c) if c is not None else float(eta)
    if isinstance(bound, BoundReport):
        base, delta, n, im = bound.formula_id, bound.delta, bound.n, dict(bound.intermediates)
        value = bound.bound_value
    else:
        if base is None or delta is None or n is None:
            raise ValueError("a bare bound value needs base, delta and n")
        value, im = float(bound), {}
    if value < 0:
        raise ValueError("bound must be non-negative")
    if base not in DIAMETER_OF:
        raise ValueError(f"diameter shifts apply to T1, T2 or T3, not {base!r}")
    im.update(diameter_eta=eta, base_bound=value)
    return BoundReport(DIAMETER_OF[base], value + eta, delta, n, im)


def rademacher_sups(loss: np.ndarray, sigma_reps: int, rng: np.random.Generator) -> np.ndarray:
    """sup_h (1/n) sum_i sigma_i loss[i, h] for ``sigma_reps`` random sign vectors."""
    n = loss.shape[0]
    sigma = rng.integers(0, 2, size=(sigma_reps, n), dtype=np.int8) * 2 - 1
    return (sigma.astype(np.float64) @ loss.astype(np.float64)).max(axis=1) / n


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    if len(values) < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(len(values)))


def empirical_rademacher_mc(loss: np.ndarray, sigma_reps: int = 200, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo Rademacher average of a fixed (n, |H|) loss matrix."""
    if sigma_reps < 1:
        raise ValueError("sigma_reps must be at least 1")
    return _mean_stderr(rademacher_sups(np.asarray(loss), sigma_reps, substream(seed, 0)))


def rademacher_mc(
    source,
    hs: HypothesisSpace,
    n: int,
    sigma_reps: int = 200,
    data_reps: int = 50,
    seed: int = 0,
    key: Sequence[int] = (),
) -> tuple[float, float]:
    """Monte Carlo estimate of E[sup_h (1/n) sum sigma_i loss_i(h)] under ``source``.

    Data replicate ``j`` draws its sample and then its sign vectors from substream
    ``(seed, *key, j)``. Returns (estimate, stderr) with the stderr taken over all
    data_reps * sigma_reps suprema.
    """
    if n < 1 or sigma_reps < 1 or data_reps < 1:
        raise ValueError("n, sigma_reps and data_reps must all be at least 1")
    sups = []
    for j in range(data_reps):
        rng = substream(seed, *key, j)
        x, y = draw_from(source, rng, n)
        sups.append(rademacher_sups(hs.loss_matrix(x, y), sigma_reps, rng))
    return _mean_stderr(np.concatenate(sups))


@dataclass(frozen=True)
class MonteCarloParams:
    sigma_reps: int = 200
    data_reps: int = 50


def _sources(c) -> tuple:
    if isinstance(c, CredalSet):
        return c.extremes
    if isinstance(c, RiskOracle):
        if not c.sources:
            raise ValueError("Rademacher bounds need samplable extremes, not a bare risk matrix")
        return c.sources
    return tuple(c)


def _rademacher_per_extreme(sources, hs, size, mc: MonteCarloParams, seed):
    return [
        rademacher_mc(src, hs, size, mc.sigma_reps, mc.data_reps, seed, key=(i, size))
        for i, src in enumerate(sources)
    ]


def rademacher_tail(n: int, delta: float, log_base: str = "e") -> float:
    return math.sqrt(2.0 * log_fn(log_base)(2.0 / delta) / n)


def epsilon_3star(
    c,
    hs: HypothesisSpace,
    n: int,
    delta: float,
    mc: MonteCarloParams = MonteCarloParams(),
    seed: int = 0,
    log_base: str = "e",
) -> BoundReport:
    """4 * max over extremes of R_n + sqrt(2 log(2/delta) / n)."""
    _check(n, delta)
    per = _rademacher_per_extreme(_sources(c), hs, n, mc, seed)
    best = int(np.argmax([r for r, _ in per]))
    r, se = per[best]
    tail = rademacher_tail(n, delta, log_base)
    return BoundReport(
        "T3",
        max(0.0, 4.0 * r + tail),
        delta,
        n,
        {
            "rademacher_estimate": r,
            "rademacher_stderr": se,
            "argmax_extreme": best,
            "per_extreme": [{"estimate": a, "stderr": b} for a, b in per],
            "tail": tail,
            "sigma_reps": mc.sigma_reps,
            "data_reps": mc.data_reps,
            "seed": seed,
        },
    )


def drift_shift_value(r_k: float, r_rest: float, n: int, k: int, delta: float, log_base: str = "e") -> float:
    _check_split(n, k)
    log = log_fn(log_base)
    tail = math.sqrt(2.0 * log(2.0 / delta) / (n * (n - k))) * (math.sqrt(n - k) + math.sqrt(n))
    return 4.0 * (r_k + r_rest) + tail


def drift_bound_rademacher(
    c,
    hs: HypothesisSpace,
    n: int,
    k: int,
    delta: float,
    mc: MonteCarloParams = MonteCarloParams(),
    seed: int = 0,
    log_base: str = "e",
) -> BoundReport:
    _check(n, delta)
    _check_split(n, k)
    sources = _sources(c)
    per_k = _rademacher_per_extreme(sources, hs, k, mc, seed)
    per_rest = _rademacher_per_extreme(sources, hs, n - k, mc, seed)
    r_k = max(r for r, _ in per_k)
    r_rest = max(r for r, _ in per_rest)
    value = drift_shift_value(r_k, r_rest, n, k, delta, log_base)
    se = math.hypot(
        per_k[int(np.argmax([r for r, _ in per_k]))][1],
        per_rest[int(np.argmax([r for r, _ in per_rest]))][1],
    )
    return BoundReport(
        "C3_2_drift",
        max(0.0, value),
        delta,
        n,
        {
            "k": k,
            "rademacher_estimate": r_k + r_rest,
            "rademacher_stderr": se,
            "rademacher_k": r_k,
            "rademacher_n_minus_k": r_rest,
            # sum of the two per-block classical tails; never smaller than the tail used above
            "tail_per_block": rademacher_tail(k, delta, log_base) + rademacher_tail(n - k, delta, log_base),
            "sigma_reps": mc.sigma_reps,
            "data_reps": mc.data_reps,
            "seed": seed,
        },
    )
