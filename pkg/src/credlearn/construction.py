"""Eliciting credal sets and lower/upper probabilities from several training sets.

Four routes are available:

* ``contamination`` -- epsilon-contaminate one likelihood per training set and
  take the convex hull of the union;
* ``contour`` -- normalise the pointwise upper likelihood into a possibility
  contour and use the induced necessity/possibility pair;
* ``subjectivist`` -- derive a lower probability on the observed support from
  the empirical distributions of the training sets;
* ``hull`` -- the convex hull of the likelihoods themselves.

Belief functions built from mass assignments are available as well.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .finite_space import (
    LOWER,
    NORMALIZATION_TOL,
    UPPER,
    CredalSet,
    FiniteDistribution,
    IncoherentAssessment,
    PowerSetTooLarge,
    SampleSpace,
    SetFunction,
    core_membership,
    core_of_two_monotone,
    dual,
    envelope_pair,
    is_two_monotone,
    prune_extremes,
)

ROUTES = ("contamination", "contour", "subjectivist", "hull")


@dataclass(frozen=True)
class LikelihoodEnsemble:
    space: SampleSpace
    pmfs: tuple

    def __post_init__(self):
        pmfs = tuple(self.pmfs)
        if not pmfs:
            raise ValueError("a likelihood ensemble needs at least one pmf")
        for p in pmfs:
            if p.space != self.space:
                raise ValueError("all likelihoods must live on the same space")
        object.__setattr__(self, "pmfs", pmfs)

    @classmethod
    def from_vectors(cls, outcomes, vectors) -> "LikelihoodEnsemble":
        space = outcomes if isinstance(outcomes, SampleSpace) else SampleSpace(tuple(outcomes))
        return cls(space, tuple(FiniteDistribution(space, v) for v in vectors))

    @property
    def matrix(self) -> np.ndarray:
        return np.vstack([p.probs for p in self.pmfs])


@dataclass(frozen=True)
class ContaminationModel:
    ensemble: LikelihoodEnsemble
    epsilons: tuple

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        if len(eps) != len(self.ensemble.pmfs):
            raise ValueError(
                f"need one contamination level per likelihood ({len(self.ensemble.pmfs)}), got {len(eps)}"
            )
        if any(not 0.0 < e < 1.0 for e in eps):
            raise ValueError(f"contamination levels must lie strictly inside (0, 1): {eps}")
        object.__setattr__(self, "epsilons", eps)

    @property
    def space(self) -> SampleSpace:
        return self.ensemble.space


def contamination_lower(m: ContaminationModel, event: int) -> float:
    """min_i (1 - eps_i) L_i(A) for A != Omega, and 1 on Omega."""
    if event == m.space.full:
        return 1.0
    return min((1.0 - e) * p.prob(event) for p, e in zip(m.ensemble.pmfs, m.epsilons))


def contamination_upper(m: ContaminationModel, event: int) -> float:
    """max_i (1 - eps_i) L_i(A) + eps_i for A != empty set, and 0 on it."""
    if event == 0:
        return 0.0
    return max((1.0 - e) * p.prob(event) + e for p, e in zip(m.ensemble.pmfs, m.epsilons))


def contamination_pair(m: ContaminationModel) -> tuple[SetFunction, SetFunction]:
    space = m.space
    space.check_enumerable()
    scaled = np.vstack(
        [(1.0 - e) * p.event_probs() for p, e in zip(m.ensemble.pmfs, m.epsilons)]
    )
    eps = np.asarray(m.epsilons)[:, None]
    lower = scaled.min(axis=0)
    upper = (scaled + eps).max(axis=0)
    lower[space.full] = 1.0
    upper[0] = 0.0
    return SetFunction(space, lower, LOWER), SetFunction(space, upper, UPPER)


def contamination_credal_set(m: ContaminationModel) -> CredalSet:
    """Finite-space generators of Conv(union of the contamination classes).

    Each class {(1 - eps) L + eps Q} is the hull of (1 - eps) L + eps * delta_w over
    the outcomes w, so the union's hull is generated by those points.
    """
    space = m.space
    vectors = []
    for p, e in zip(m.ensemble.pmfs, m.epsilons):
        for j in range(space.size):
            v = (1.0 - e) * p.probs
            v[j] += e
            vectors.append(v)
    return prune_extremes(CredalSet.from_vectors(space, vectors))


@dataclass(frozen=True, eq=False)
class MassFunction:
    space: SampleSpace
    masses: np.ndarray

    def __post_init__(self):
        self.space.check_enumerable()
        m = np.array(self.masses, dtype=float).reshape(-1)
        if m.shape != (1 << self.space.size,):
            raise ValueError(f"expected {1 << self.space.size} masses, got {m.shape[0]}")
        if np.any(m < 0):
            raise ValueError("masses must be non-negative")
        if abs(m.sum() - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"masses sum to {m.sum()!r}, not 1")
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)

    @classmethod
    def from_focal(cls, space: SampleSpace, focal: dict) -> "MassFunction":
        """Build from ``{iterable of labels: mass}``."""
        masses = np.zeros(1 << space.size)
        for labels, value in focal.items():
            masses[space.mask(labels)] += value
        return cls(space, masses)


def belief_from_mass(m: MassFunction, event: int) -> float:
    """Bel(A): total mass of the subsets of A."""
    total = 0.0
    sub = event
    while True:
        total += m.masses[sub]
        if sub == 0:
            break
        sub = (sub - 1) & event
    return float(total)


def belief_function(m: MassFunction) -> SetFunction:
    # zeta transform over the subset lattice
    bel = m.masses.copy()
    n = m.space.size
    masks = np.arange(1 << n)
    for j in range(n):
        has = masks[(masks >> j & 1) == 1]
        bel[has] += bel[has ^ (1 << j)]
    return SetFunction(m.space, bel, LOWER)


def plausibility_function(m: MassFunction) -> SetFunction:
    return dual(belief_function(m))


@dataclass(frozen=True, eq=False)
class PossibilityContour:
    space: SampleSpace
    pl: np.ndarray

    def __post_init__(self):
        pl = np.array(self.pl, dtype=float).reshape(-1)
        if pl.shape != (self.space.size,):
            raise ValueError(f"expected {self.space.size} contour values")
        if np.any(pl < 0) or np.any(pl > 1):
            raise ValueError("contour values must lie in [0, 1]")
        if abs(pl.max() - 1.0) > NORMALIZATION_TOL:
            raise ValueError("a possibility contour must reach 1")
        pl.setflags(write=False)
        object.__setattr__(self, "pl", pl)


def contour_from_likelihoods(e: LikelihoodEnsemble) -> PossibilityContour:
    upper = e.matrix.max(axis=0)
    return PossibilityContour(e.space, upper / upper.max())


def possibility_pair(c: PossibilityContour) -> tuple[SetFunction, SetFunction]:
    """Necessity (lower) and possibility (upper) measures of a contour.

    Possibility is maxitive, Pi(A) = max over A of pl; necessity is its dual.
    """
    space = c.space
    space.check_enumerable()
    upper = np.zeros(1 << space.size)
    for j, v in enumerate(c.pl):
        half = 1 << j
        upper[half : 2 * half] = np.maximum(upper[:half], v)
    up = SetFunction(space, upper, UPPER)
    return dual(up), up


class EmpiricalEnsemble:
    """N observed multisets of outcome labels and their empirical distributions.

    Probabilities are kept as integer numerators over a common denominator so the
    subjectivist lower probability is exact until the final division.
    """

    def __init__(self, datasets: Iterable[Iterable]):
        self.datasets = tuple(tuple(d) for d in datasets)
        if not self.datasets:
            raise ValueError("an empirical ensemble needs at least one dataset")
        if any(len(d) == 0 for d in self.datasets):
            raise ValueError("every dataset must be nonempty")
        seen: dict = {}
        for d in self.datasets:
            for lab in d:
                seen.setdefault(lab, None)
        try:
            support = tuple(sorted(seen))
        except TypeError:
            support = tuple(seen)
        self.space = SampleSpace(support)
        self.counts = [Counter(d) for d in self.datasets]
        self.sizes = [len(d) for d in self.datasets]
        self.denominator = math.lcm(*self.sizes)

    def numerators(self) -> np.ndarray:
        """(N, |S|) integer matrix: P_i(w) * denominator."""
        out = np.zeros((len(self.datasets), self.space.size), dtype=object)
        for i, (cnt, n) in enumerate(zip(self.counts, self.sizes)):
            scale = self.denominator // n
            for j, lab in enumerate(self.space.outcomes):
                out[i, j] = cnt.get(lab, 0) * scale
        return out

    def empirical(self, i: int) -> FiniteDistribution:
        num = self.numerators()[i]
        return FiniteDistribution(self.space, [x / self.denominator for x in num])


def subjectivist_lower(e: EmpiricalEnsemble) -> SetFunction:
    """Lower probability on 2^S from the empirical distributions.

    Singletons take the smallest positive empirical probability; any other proper
    event B takes max(sum of singleton lowers over B, 1 - sum over B^c of the
    largest empirical probability).
    """
    space = e.space
    space.check_enumerable()
    num = e.numerators()
    low = [min(x for x in num[:, j] if x > 0) for j in range(space.size)]
    high = [max(num[:, j]) for j in range(space.size)]
    d = e.denominator
    low_sums = _int_subset_sums(low)
    high_sums = _int_subset_sums(high)
    full = space.full
    values = np.zeros(1 << space.size)
    for mask in range(1, full):
        if mask & (mask - 1) == 0:
            continue
        numer = max(low_sums[mask], d - high_sums[full & ~mask])
        values[mask] = numer / d
        if numer > d:
            raise IncoherentAssessment(
                f"lower probability of {space.format_event(mask)} exceeds 1: "
                "the training sets incur sure loss"
            )
    for j in range(space.size):
        values[1 << j] = low[j] / d
    values[full] = 1.0
    return SetFunction(space, values, LOWER)


def _int_subset_sums(weights: Sequence[int]) -> list:
    out = [0] * (1 << len(weights))
    for j, w in enumerate(weights):
        half = 1 << j
        for m in range(half):
            out[half + m] = out[m] + w
    return out


def credal_from_likelihoods(e: LikelihoodEnsemble) -> CredalSet:
    return prune_extremes(CredalSet(e.space, e.pmfs))


def simplex_grid(size: int, resolution: int) -> np.ndarray:
    """All compositions of ``resolution`` into ``size`` non-negative parts."""
    if size == 1:
        return np.array([[resolution]])
    rows = []
    for first in range(resolution + 1):
        rest = simplex_grid(size - 1, resolution - first)
        rows.append(np.hstack([np.full((len(rest), 1), first), rest]))
    return np.vstack(rows)


def setfunction_to_core_samples(
    lp: SetFunction, grid_resolution: int, tol: float = 1e-9
) -> list[FiniteDistribution]:
    """Simplex-grid points that dominate ``lp`` on every event."""
    n = lp.space.size
    if n > 4 or grid_resolution > 400 or grid_resolution < 1:
        raise PowerSetTooLarge("core sampling is limited to |Omega| <= 4 and resolution in [1, 400]")
    grid = simplex_grid(n, grid_resolution) / grid_resolution
    membership = np.array(
        [[(mask >> j) & 1 for mask in range(1 << n)] for j in range(n)], dtype=float
    )
    out = []
    for start in range(0, len(grid), 200_000):
        chunk = grid[start : start + 200_000]
        ok = np.all(chunk @ membership >= lp.values - tol, axis=1)
        out.extend(FiniteDistribution(lp.space, row) for row in chunk[ok])
    return out


@dataclass(frozen=True, eq=False)
class Construction:
    route: str
    lower: SetFunction
    upper: SetFunction
    credal_set: CredalSet | None


def _outcomes(doc: dict, width: int) -> list:
    outcomes = doc.get("outcomes")
    if outcomes is None:
        return [f"w{j + 1}" for j in range(width)]
    return outcomes


def construct_from_config(doc: dict, route: str | None = None) -> Construction:
    """Run one elicitation route on a JSON-style config document."""
    route = route or doc.get("route")
    if route is None:
        if "datasets" in doc:
            route = "subjectivist"
        elif "epsilons" in doc:
            route = "contamination"
        else:
            raise ValueError("config must name a route")
    if route not in ROUTES:
        raise ValueError(f"unknown route {route!r}; expected one of {', '.join(ROUTES)}")

    if route == "subjectivist":
        if "datasets" not in doc:
            raise ValueError("subjectivist route needs 'datasets'")
        ens = EmpiricalEnsemble(doc["datasets"])
        lower = subjectivist_lower(ens)
        credal = core_of_two_monotone(lower) if ens.space.size <= 8 and is_two_monotone(lower) else None
        return Construction(route, lower, dual(lower), credal)

    if "likelihoods" not in doc:
        raise ValueError(f"{route} route needs 'likelihoods'")
    likelihoods = doc["likelihoods"]
    if not likelihoods:
        raise ValueError("'likelihoods' must be a nonempty list")
    ens = LikelihoodEnsemble.from_vectors(_outcomes(doc, len(likelihoods[0])), likelihoods)

    if route == "contamination":
        if "epsilons" not in doc:
            raise ValueError("contamination route needs 'epsilons'")
        model = ContaminationModel(ens, tuple(doc["epsilons"]))
        lower, upper = contamination_pair(model)
        return Construction(route, lower, upper, contamination_credal_set(model))
    if route == "contour":
        lower, upper = possibility_pair(contour_from_likelihoods(ens))
        credal = core_of_two_monotone(lower) if ens.space.size <= 8 else None
        return Construction(route, lower, upper, credal)
    credal = credal_from_likelihoods(ens)
    lower, upper = envelope_pair(credal)
    return Construction(route, lower, upper, credal)


def format_value(v: float) -> str:
    return format(float(v), ".12g")


def setfunction_csv(lower: SetFunction, upper: SetFunction) -> str:
    """CSV with one row per event: event labels, lower, upper."""
    if lower.space != upper.space:
        raise ValueError("lower and upper must share a space")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["event", "lower", "upper"])
    for mask in range(1 << lower.space.size):
        writer.writerow(
            [lower.space.format_event(mask), format_value(lower[mask]), format_value(upper[mask])]
        )
    return buf.getvalue()


def read_setfunction_csv(text: str, space: SampleSpace) -> tuple[SetFunction, SetFunction]:
    """Inverse of :func:`setfunction_csv` for a known space (rows in bitmask order)."""
    rows = list(csv.DictReader(io.StringIO(text)))
    if len(rows) != 1 << space.size:
        raise ValueError("row count does not match the power set")
    lower = [float(r["lower"]) for r in rows]
    upper = [float(r["upper"]) for r in rows]
    return SetFunction(space, lower, LOWER), SetFunction(space, upper, UPPER)


__all__ = [
    "ROUTES",
    "LikelihoodEnsemble",
    "ContaminationModel",
    "MassFunction",
    "PossibilityContour",
    "EmpiricalEnsemble",
    "Construction",
    "contamination_lower",
    "contamination_upper",
    "contamination_pair",
    "contamination_credal_set",
    "belief_from_mass",
    "belief_function",
    "plausibility_function",
    "contour_from_likelihoods",
    "possibility_pair",
    "subjectivist_lower",
    "credal_from_likelihoods",
    "setfunction_to_core_samples",
    "simplex_grid",
    "construct_from_config",
    "setfunction_csv",
    "read_setfunction_csv",
    "core_membership",
]
