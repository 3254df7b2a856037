"""Brute-force verifiers, deliberately independent of the production code paths.

Everything here recomputes from first principles: grid enumeration for
envelopes, plain Monte Carlo for risks, full sign-vector enumeration for
Rademacher averages, a plateau scan for the self-consistent bounds and an
inline ERM loop for coverage. These are slow by design and only meant for
tests and for regenerating reference values.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, Sequence

import numpy as np

from .finite_space import FiniteDistribution, SampleSpace

MAX_GRID_SIZE = 4
MAX_GRID_RESOLUTION = 400
MAX_EXHAUSTIVE_N = 12


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class SimplexGrid:
    """All pmfs on ``space`` whose masses are multiples of 1/resolution."""

    space: SampleSpace
    resolution: int

    def __post_init__(self):
        if self.space.size > MAX_GRID_SIZE:
            raise OracleError(f"grid oracle supports at most {MAX_GRID_SIZE} outcomes")
        if not 1 <= self.resolution <= MAX_GRID_RESOLUTION:
            raise OracleError(f"resolution must lie in [1, {MAX_GRID_RESOLUTION}]")

    def compositions(self) -> Iterator[tuple[int, ...]]:
        # stars and bars: choose size-1 bar positions among resolution+size-1 slots
        k, r = self.space.size, self.resolution
        for bars in itertools.combinations(range(r + k - 1), k - 1):
            prev, parts = -1, []
            for b in bars:
                parts.append(b - prev - 1)
                prev = b
            parts.append(r + k - 2 - prev)
            yield tuple(parts)

    def points(self) -> Iterator[FiniteDistribution]:
        for c in self.compositions():
            yield FiniteDistribution(self.space, tuple(v / self.resolution for v in c))

    def __len__(self):
        return math.comb(self.resolution + self.space.size - 1, self.space.size - 1)


def _event_mass(p: FiniteDistribution, event: int) -> float:
    return sum(v for i, v in enumerate(p.probs) if event >> i & 1)


def grid_lower_envelope(
    constraint: Callable[[FiniteDistribution], bool], grid: SimplexGrid, event: int
) -> float:
    """min P(event) over admissible grid points."""
    best = None
    for p in grid.points():
        if constraint(p):
            v = _event_mass(p, event)
            if best is None or v < best:
                best = v
    if best is None:
        raise OracleError("no grid point satisfies the constraint")
    return best


def grid_upper_envelope(
    constraint: Callable[[FiniteDistribution], bool], grid: SimplexGrid, event: int
) -> float:
    best = None
    for p in grid.points():
        if constraint(p):
            v = _event_mass(p, event)
            if best is None or v > best:
                best = v
    if best is None:
        raise OracleError("no grid point satisfies the constraint")
    return best


def dominated_by_contour(pl: Sequence[float], tol: float = 1e-12) -> Callable[[FiniteDistribution], bool]:
    """Predicate p(w) <= pl(w) for every outcome."""
    pl = tuple(float(v) for v in pl)
    return lambda p: all(a <= b + tol for a, b in zip(p.probs, pl))


def dominated_by_possibility(pl: Sequence[float], tol: float = 1e-12) -> Callable[[FiniteDistribution], bool]:
    """Predicate P(A) <= max over A of pl, for every event A.

    This is the core of the possibility measure. Pointwise domination alone is
    weaker: it only constrains singletons.
    """
    pl = tuple(float(v) for v in pl)
    events = range(1, 1 << len(pl))

    def check(p: FiniteDistribution) -> bool:
        for a in events:
            cap = max(v for i, v in enumerate(pl) if a >> i & 1)
            if _event_mass(p, a) > cap + tol:
                return False
        return True

    return check


def contamination_member(
    likelihoods: Sequence[Sequence[float]], epsilons: Sequence[float], tol: float = 1e-12
) -> Callable[[FiniteDistribution], bool]:
    """Predicate: p = (1-eps_i) l_i + eps_i q for some i and some pmf q,
    i.e. p dominates (1-eps_i) l_i pointwise."""
    floors = [tuple((1 - e) * v for v in lik) for lik, e in zip(likelihoods, epsilons)]
    return lambda p: any(all(a >= f - tol for a, f in zip(p.probs, fl)) for fl in floors)


def mc_expected_risk(m, h, samples: int, seed: int) -> tuple[float, float]:
    """Plain Monte Carlo zero-one risk of a threshold rule under a Gaussian label model."""
    if samples < 1:
        raise OracleError("samples must be at least 1")
    rng = np.random.default_rng([seed, 7])
    x = m.mean + m.sd * rng.standard_normal(samples)
    clean_high = x >= m.true_theta
    clean = clean_high if m.polarity == "above" else ~clean_high
    y = np.where(rng.uniform(size=samples) < m.flip_prob, ~clean, clean)
    pred_high = x >= h.theta
    pred = pred_high if h.polarity == "above" else ~pred_high
    p = float(np.mean(pred != y))
    return p, math.sqrt(p * (1 - p) / samples)


def exhaustive_rademacher_matrix(loss, exact: bool = False):
    """Average over all 2^n sign vectors of max_h (1/n) sum_i sigma_i loss[i][h]."""
    rows = [[int(v) for v in r] for r in loss]
    n = len(rows)
    if n == 0:
        raise OracleError("empty loss matrix")
    if n > MAX_EXHAUSTIVE_N:
        raise OracleError(f"exhaustive enumeration limited to n <= {MAX_EXHAUSTIVE_N}")
    width = len(rows[0])
    total = 0
    for sigma in itertools.product((-1, 1), repeat=n):
        total += max(sum(s * rows[i][j] for i, s in enumerate(sigma)) for j in range(width))
    value = Fraction(total, n * 2**n)
    return value if exact else float(value)


def exhaustive_rademacher(d, hs, exact: bool = False):
    """Conditional Rademacher average of the zero-one loss class on a fixed dataset."""
    loss = []
    for x, y in zip(d.x, d.y):
        row = []
        for h in hs:
            pred = (x >= h.theta) if h.polarity == "above" else (x < h.theta)
            row.append(int(int(pred) != int(y)))
        loss.append(row)
    return exhaustive_rademacher_matrix(loss, exact)


def plateau_fixed_point(thresholds: Sequence[float], value: Callable[[int], float]) -> float:
    """Least eps >= 0 with |{t > eps}| == 0 or value(|{t > eps}|) <= eps.

    The count is constant on each interval between consecutive distinct
    thresholds, so scanning the plateaus in order finds the exact answer.
    """
    ts = sorted(float(t) for t in thresholds)
    cuts = sorted({0.0, *(t for t in ts if t > 0)})
    for j, a in enumerate(cuts):
        b = cuts[j + 1] if j + 1 < len(cuts) else math.inf
        c = sum(1 for t in ts if t > a)
        if c == 0:
            return a
        eps = max(a, value(c))
        if eps < b:
            return eps
    raise OracleError("no self-consistent value found")  # unreachable: last plateau has count 0


def _phi(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def _closed_risk(theta, above, mean, sd, true_theta, rho):
    between = abs(_phi((theta - mean) / sd) - _phi((true_theta - mean) / sd))
    dis = between if above else 1.0 - between
    return rho + (1 - 2 * rho) * dis


def coverage_trial(config: dict, trials: int, seed: int) -> tuple[int, int]:
    """Count trials in which the tested inequality fails.

    config keys: n, delta, h_count, grid_lo, grid_hi, true_theta (default: the
    middle grid point), mean, sd, flip_prob, mode ("risk" tests L(h_erm) <= bound,
    "excess" tests L(h_erm) - min_h L(h) <= bound) and bound ("eps_ub",
    "eps_prime_ub" or a number).
    """
    if trials < 1:
        raise OracleError("trials must be at least 1")
    n = int(config["n"])
    delta = float(config.get("delta", 0.05))
    count = int(config.get("h_count", 100))
    lo, hi = float(config.get("grid_lo", -10.0)), float(config.get("grid_hi", 10.0))
    thetas = [lo + (hi - lo) * j / (count - 1) for j in range(count)] if count > 1 else [lo]
    true_theta = float(config.get("true_theta", thetas[count // 2]))
    mean, sd = float(config.get("mean", 0.0)), float(config.get("sd", 1.0))
    rho = float(config.get("flip_prob", 0.0))
    mode = config.get("mode", "risk")
    bound = config.get("bound", "eps_ub")
    if bound == "eps_ub":
        limit = (math.log(count) + math.log(1 / delta)) / n
    elif bound == "eps_prime_ub":
        limit = math.sqrt(2 * (math.log(count) + math.log(2 / delta)) / n)
    else:
        limit = float(bound)

    risks = [_closed_risk(t, True, mean, sd, true_theta, rho) for t in thetas]
    best = min(risks)
    th = np.array(thetas)
    violations = 0
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        x = mean + sd * rng.standard_normal(n)
        y = (x >= true_theta) ^ (rng.uniform(size=n) < rho)
        errs = ((x[:, None] >= th[None, :]) != y[:, None]).sum(axis=0)
        j = int(np.flatnonzero(errs == errs.min())[0])
        gap = risks[j] - (best if mode == "excess" else 0.0)
        if gap > limit:
            violations += 1
    return violations, trials
