"""Finite sample spaces, distributions, credal sets and set functions.

Subsets of a :class:`SampleSpace` are integer bitmasks over the ordered outcome
list: bit ``j`` set means outcome ``j`` belongs to the event. Anything that
enumerates the power set is capped at :data:`MAX_ENUMERABLE` outcomes.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Any, Hashable, Iterable, Sequence

import numpy as np
from scipy.optimize import linprog

MAX_ENUMERABLE = 24
NORMALIZATION_TOL = 1e-12
HULL_TOL = 1e-9

LOWER = "lower"
UPPER = "upper"


class SpaceMismatch(ValueError):
    """Two objects that must share a sample space do not."""


class PowerSetTooLarge(ValueError):
    """The sample space is too large for a full 2^|Omega| scan."""


class IncoherentAssessment(ValueError):
    """A constructed set function leaves [0, 1] or breaks monotonicity."""


def _freeze_label(label: Any) -> Hashable:
    if isinstance(label, list):
        return tuple(_freeze_label(v) for v in label)
    return label


def _thaw_label(label: Any) -> Any:
    if isinstance(label, tuple):
        return [_thaw_label(v) for v in label]
    return label


@dataclass(frozen=True)
class SampleSpace:
    outcomes: tuple

    def __post_init__(self):
        outcomes = tuple(_freeze_label(o) for o in self.outcomes)
        object.__setattr__(self, "outcomes", outcomes)
        if not outcomes:
            raise ValueError("a sample space needs at least one outcome")
        if len(set(outcomes)) != len(outcomes):
            raise ValueError(f"outcome labels must be unique: {outcomes!r}")

    @property
    def size(self) -> int:
        return len(self.outcomes)

    @property
    def full(self) -> int:
        """Bitmask of the whole space."""
        return (1 << self.size) - 1

    def check_enumerable(self) -> None:
        if self.size > MAX_ENUMERABLE:
            raise PowerSetTooLarge(
                f"|Omega| = {self.size} exceeds the power-set budget of {MAX_ENUMERABLE}"
            )

    def index(self, label) -> int:
        return self.outcomes.index(_freeze_label(label))

    def mask(self, labels: Iterable) -> int:
        m = 0
        for lab in labels:
            m |= 1 << self.index(lab)
        return m

    def labels(self, mask: int) -> tuple:
        return tuple(o for j, o in enumerate(self.outcomes) if mask >> j & 1)

    def complement(self, mask: int) -> int:
        return self.full & ~mask

    def format_event(self, mask: int) -> str:
        return "{" + ",".join(str(o) for o in self.labels(mask)) + "}"


def subset_sums(weights: np.ndarray) -> np.ndarray:
    """Sum of ``weights`` over every subset, indexed by bitmask."""
    weights = np.asarray(weights, dtype=float)
    out = np.zeros(1 << len(weights))
    for j, w in enumerate(weights):
        half = 1 << j
        out[half : 2 * half] = out[:half] + w
    return out


@dataclass(frozen=True, eq=False)
class FiniteDistribution:
    space: SampleSpace
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).reshape(-1)
        if p.shape != (self.space.size,):
            raise ValueError(
                f"expected {self.space.size} probabilities, got {p.shape[0]}"
            )
        if np.any(p < -NORMALIZATION_TOL) or np.any(p > 1 + NORMALIZATION_TOL):
            raise ValueError(f"probabilities must lie in [0, 1]: {p}")
        if abs(p.sum() - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        p = np.clip(p, 0.0, 1.0)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    def prob(self, mask: int) -> float:
        return float(sum(self.probs[j] for j in range(self.space.size) if mask >> j & 1))

    def event_probs(self) -> np.ndarray:
        """P(A) for every event A, indexed by bitmask."""
        self.space.check_enumerable()
        return subset_sums(self.probs)

    def allclose(self, other: "FiniteDistribution", tol: float = NORMALIZATION_TOL) -> bool:
        _same_space(self.space, other.space)
        return bool(np.max(np.abs(self.probs - other.probs)) <= tol)

    def __repr__(self):
        return f"FiniteDistribution({list(self.probs)!r})"


def _same_space(a: SampleSpace, b: SampleSpace) -> None:
    if a != b:
        raise SpaceMismatch(f"sample spaces differ: {a.outcomes!r} vs {b.outcomes!r}")


@dataclass(frozen=True, eq=False)
class CredalSet:
    """Conv(extremes). ``extremes`` are candidates until :func:`prune_extremes` runs."""

    space: SampleSpace
    extremes: tuple

    def __post_init__(self):
        ext = tuple(self.extremes)
        if not ext:
            raise ValueError("a credal set needs at least one distribution")
        for e in ext:
            _same_space(self.space, e.space)
        object.__setattr__(self, "extremes", ext)

    @classmethod
    def from_vectors(cls, outcomes: Sequence, vectors: Iterable[Sequence[float]]) -> "CredalSet":
        space = outcomes if isinstance(outcomes, SampleSpace) else SampleSpace(tuple(outcomes))
        return cls(space, tuple(FiniteDistribution(space, v) for v in vectors))

    @property
    def matrix(self) -> np.ndarray:
        return np.vstack([e.probs for e in self.extremes])

    def __len__(self):
        return len(self.extremes)

    def to_json(self) -> dict:
        return {
            "outcomes": [_thaw_label(o) for o in self.space.outcomes],
            "extremes": [[float(v) for v in e.probs] for e in self.extremes],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "CredalSet":
        try:
            return cls.from_vectors(doc["outcomes"], doc["extremes"])
        except KeyError as exc:
            raise ValueError(f"credal set document lacks field {exc.args[0]!r}") from None

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


@dataclass(frozen=True, eq=False)
class SetFunction:
    """A lower or upper probability on the power set of ``space``."""

    space: SampleSpace
    values: np.ndarray
    kind: str = LOWER
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.space.check_enumerable()
        if self.kind not in (LOWER, UPPER):
            raise ValueError(f"kind must be 'lower' or 'upper', not {self.kind!r}")
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.shape != (1 << self.space.size,):
            raise ValueError(f"expected {1 << self.space.size} values, got {v.shape[0]}")
        if self.validate:
            _check_set_function(self.space, v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __getitem__(self, mask: int) -> float:
        return float(self.values[mask])

    def at(self, labels: Iterable) -> float:
        return self[self.space.mask(labels)]

    @classmethod
    def from_function(cls, space: SampleSpace, fn, kind: str = LOWER) -> "SetFunction":
        space.check_enumerable()
        return cls(space, [fn(m) for m in range(1 << space.size)], kind)

    def dual(self) -> "SetFunction":
        return dual(self)


def _check_set_function(space: SampleSpace, v: np.ndarray, tol: float = NORMALIZATION_TOL) -> None:
    if abs(v[0]) > tol or abs(v[space.full] - 1.0) > tol:
        raise IncoherentAssessment(
            f"set function must be 0 on the empty set and 1 on Omega (got {v[0]}, {v[space.full]})"
        )
    if np.any(v < -tol) or np.any(v > 1 + tol):
        raise IncoherentAssessment("set function values must lie in [0, 1]")
    masks = np.arange(1 << space.size)
    for j in range(space.size):
        without = masks[(masks >> j & 1) == 0]
        if np.any(v[without] > v[without | (1 << j)] + tol):
            raise IncoherentAssessment("set function is not monotone")


def dual(sf: SetFunction) -> SetFunction:
    """Conjugate set function A -> 1 - sf(A^c); lower becomes upper and back."""
    full = sf.space.full
    masks = np.arange(1 << sf.space.size)
    values = 1.0 - sf.values[full & ~masks]
    return SetFunction(sf.space, values, UPPER if sf.kind == LOWER else LOWER, sf.validate)


def tv_distance(p: FiniteDistribution, q: FiniteDistribution) -> float:
    """Total-variation distance, computed as half the L1 distance."""
    _same_space(p.space, q.space)
    return float(0.5 * np.abs(p.probs - q.probs).sum())


def diameter_tv(c: CredalSet) -> float:
    """Largest TV distance inside Conv(extremes); attained at a pair of extremes."""
    best = 0.0
    for a, b in itertools.combinations(c.extremes, 2):
        best = max(best, tv_distance(a, b))
    return best


def lower_envelope(c: CredalSet, event: int) -> float:
    """inf of P(event) over the credal set, i.e. the min over its extremes."""
    return min(e.prob(event) for e in c.extremes)


def upper_envelope(c: CredalSet, event: int) -> float:
    return max(e.prob(event) for e in c.extremes)


def envelope_pair(c: CredalSet) -> tuple[SetFunction, SetFunction]:
    """Lower and upper envelopes of ``c`` on every event."""
    probs = np.vstack([e.event_probs() for e in c.extremes])
    return (
        SetFunction(c.space, probs.min(axis=0), LOWER),
        SetFunction(c.space, probs.max(axis=0), UPPER),
    )


def in_convex_hull(point: np.ndarray, others: np.ndarray, tol: float = HULL_TOL) -> bool:
    """Whether ``point`` is a convex combination of the rows of ``others``.

    Solves min ||others.T w - point||_1 subject to w >= 0, sum(w) = 1 as a linear
    program and compares the optimum with ``tol``.
    """
    others = np.atleast_2d(others)
    k, d = others.shape
    if k == 0:
        return False
    # variables: w (k), s_plus (d), s_minus (d)
    cost = np.r_[np.zeros(k), np.ones(2 * d)]
    a_eq = np.zeros((d + 1, k + 2 * d))
    a_eq[:d, :k] = others.T
    a_eq[:d, k : k + d] = np.eye(d)
    a_eq[:d, k + d :] = -np.eye(d)
    a_eq[d, :k] = 1.0
    b_eq = np.r_[point, 1.0]
    res = linprog(cost, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        return False
    return bool(res.fun <= tol)


def prune_extremes(c: CredalSet, tol: float = HULL_TOL) -> CredalSet:
    """Drop duplicates and every candidate lying in the hull of the others."""
    unique: list[FiniteDistribution] = []
    for e in c.extremes:
        if not any(np.max(np.abs(e.probs - u.probs)) <= tol for u in unique):
            unique.append(e)
    if len(unique) == 1:
        return CredalSet(c.space, tuple(unique))
    mat = np.vstack([u.probs for u in unique])
    keep = [
        u
        for i, u in enumerate(unique)
        if not in_convex_hull(mat[i], np.delete(mat, i, axis=0), tol)
    ]
    return CredalSet(c.space, tuple(keep))


def core_membership(lp: SetFunction, p: FiniteDistribution, tol: float = HULL_TOL) -> bool:
    """True iff P(A) >= lp(A) - tol on every event A."""
    if lp.kind != LOWER:
        raise ValueError("core membership is defined against a lower probability")
    _same_space(lp.space, p.space)
    return bool(np.all(p.event_probs() >= lp.values - tol))


def is_two_monotone(lp: SetFunction, tol: float = NORMALIZATION_TOL) -> bool:
    """Check lp(A+i+j) + lp(A) >= lp(A+i) + lp(A+j) for all A and i, j outside A.

    The local condition is equivalent to 2-monotonicity on a finite lattice.
    """
    v = lp.values
    n = lp.space.size
    masks = np.arange(1 << n)
    for i, j in itertools.combinations(range(n), 2):
        bi, bj = 1 << i, 1 << j
        base = masks[(masks & (bi | bj)) == 0]
        if np.any(v[base | bi | bj] + v[base] < v[base | bi] + v[base | bj] - tol):
            return False
    return True


def core_of_two_monotone(lp: SetFunction, max_size: int = 8) -> CredalSet:
    """Extreme points of the core of a 2-monotone lower probability.

    For 2-monotone lower probabilities the core vertices are the marginal vectors
    p(w_pi(j)) = lp(S_j) - lp(S_{j-1}) over all orderings pi of the outcomes.
    """
    if lp.kind != LOWER:
        raise ValueError("core extraction needs a lower probability")
    n = lp.space.size
    if n > max_size:
        raise PowerSetTooLarge(f"permutation enumeration capped at |Omega| <= {max_size}")
    if not is_two_monotone(lp):
        raise IncoherentAssessment("lower probability is not 2-monotone")
    vectors = []
    for perm in itertools.permutations(range(n)):
        p = np.zeros(n)
        prev, mask = 0.0, 0
        for j in perm:
            mask |= 1 << j
            p[j] = lp[mask] - prev
            prev = lp[mask]
        vectors.append(p)
    return prune_extremes(CredalSet.from_vectors(lp.space, vectors))
