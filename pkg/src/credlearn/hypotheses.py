"""Threshold classifiers on a scalar input and Gaussian data with label noise.

Convention: a point exactly at the threshold belongs to the high side, so an
``above`` hypothesis predicts 1 at ``x == theta`` and a ``below`` one predicts 0.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .finite_space import FiniteDistribution
from .rng import substream

ABOVE = "above"
BELOW = "below"
POLARITIES = (ABOVE, BELOW)


def _check_polarity(polarity: str) -> None:
    if polarity not in POLARITIES:
        raise ValueError(f"polarity must be 'above' or 'below', not {polarity!r}")


@dataclass(frozen=True)
class ThresholdHypothesis:
    theta: float
    polarity: str = ABOVE

    def __post_init__(self):
        _check_polarity(self.polarity)
        if not math.isfinite(self.theta):
            raise ValueError("threshold must be finite")

    def predict(self, x):
        high = np.asarray(x) >= self.theta
        return (high if self.polarity == ABOVE else ~high).astype(np.int8)

    def flipped(self) -> "ThresholdHypothesis":
        return ThresholdHypothesis(self.theta, BELOW if self.polarity == ABOVE else ABOVE)


class HypothesisSpace:
    """Finite ordered list of threshold classifiers; order breaks ERM ties."""

    def __init__(self, hypotheses: Iterable[ThresholdHypothesis]):
        self.hypotheses = tuple(hypotheses)
        if not self.hypotheses:
            raise ValueError("hypothesis space is empty")
        self.thetas = np.array([h.theta for h in self.hypotheses])
        self.above = np.array([h.polarity == ABOVE for h in self.hypotheses])

    def __len__(self):
        return len(self.hypotheses)

    def __getitem__(self, i) -> ThresholdHypothesis:
        return self.hypotheses[i]

    def __iter__(self):
        return iter(self.hypotheses)

    def predictions(self, x) -> np.ndarray:
        """(n, |H|) matrix of predicted labels."""
        high = np.asarray(x, dtype=float)[:, None] >= self.thetas[None, :]
        return np.where(self.above[None, :], high, ~high).astype(np.int8)

    def loss_matrix(self, x, y) -> np.ndarray:
        """(n, |H|) zero-one losses."""
        y = np.asarray(y, dtype=np.int8)[:, None]
        return (self.predictions(x) != y).astype(np.int8)

    def index_of(self, theta: float, polarity: str = ABOVE) -> int:
        for i, h in enumerate(self.hypotheses):
            if h.theta == theta and h.polarity == polarity:
                return i
        raise KeyError(f"no hypothesis with theta={theta} polarity={polarity}")


def make_grid_space(lo: float, hi: float, count: int, polarity: str = ABOVE) -> HypothesisSpace:
    """``count`` evenly spaced thresholds on [lo, hi], endpoints included."""
    _check_polarity(polarity)
    if not lo < hi:
        raise ValueError(f"grid needs lo < hi (got {lo}, {hi})")
    if count < 1:
        raise ValueError("grid needs at least one threshold")
    return HypothesisSpace(ThresholdHypothesis(float(t), polarity) for t in np.linspace(lo, hi, count))


@dataclass(frozen=True)
class GaussianLabelModel:
    """x ~ N(mean, sd^2); clean label from a threshold at ``true_theta``; flip w.p. ``flip_prob``."""

    mean: float = 0.0
    sd: float = 1.0
    true_theta: float = 0.0
    flip_prob: float = 0.0
    polarity: str = ABOVE

    def __post_init__(self):
        _check_polarity(self.polarity)
        if not self.sd > 0:
            raise ValueError("sd must be positive")
        if not 0.0 <= self.flip_prob < 0.5:
            raise ValueError("flip probability must lie in [0, 0.5)")

    @property
    def clean_rule(self) -> ThresholdHypothesis:
        return ThresholdHypothesis(self.true_theta, self.polarity)

    def cdf(self, t: float) -> float:
        return float(ndtr((t - self.mean) / self.sd))

    def draw(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        x = rng.normal(self.mean, self.sd, size=n)
        flips = rng.random(n) < self.flip_prob
        y = self.clean_rule.predict(x) ^ flips.astype(np.int8)
        return x, y

    def density(self, x, y) -> np.ndarray:
        """Joint density of (x, y)."""
        x = np.asarray(x, dtype=float)
        phi = np.exp(-0.5 * ((x - self.mean) / self.sd) ** 2) / (self.sd * math.sqrt(2 * math.pi))
        clean = self.clean_rule.predict(x)
        rho = self.flip_prob
        p1 = np.where(clean == 1, 1 - rho, rho)
        return phi * np.where(np.asarray(y) == 1, p1, 1 - p1)

    def to_json(self) -> dict:
        return {
            "mean": self.mean,
            "sd": self.sd,
            "true_theta": self.true_theta,
            "flip_prob": self.flip_prob,
            "polarity": self.polarity,
        }


class LabeledDataset:
    def __init__(self, x, y):
        self.x = np.asarray(x, dtype=float).reshape(-1)
        self.y = np.asarray(y, dtype=np.int8).reshape(-1)
        if self.x.shape != self.y.shape:
            raise ValueError("x and y must have equal length")
        if np.any((self.y != 0) & (self.y != 1)):
            raise ValueError("labels must be 0 or 1")

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence]) -> "LabeledDataset":
        pairs = list(pairs)
        return cls([p[0] for p in pairs], [p[1] for p in pairs])

    def __len__(self):
        return len(self.x)

    def pairs(self) -> list[tuple[float, int]]:
        return [(float(a), int(b)) for a, b in zip(self.x, self.y)]

    def concat(self, *others: "LabeledDataset") -> "LabeledDataset":
        return LabeledDataset(
            np.concatenate([self.x, *(o.x for o in others)]),
            np.concatenate([self.y, *(o.y for o in others)]),
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y"])
        for a, b in zip(self.x, self.y):
            w.writerow([repr(float(a)), int(b)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "LabeledDataset":
        rows = list(csv.DictReader(io.StringIO(text)))
        if rows and not {"x", "y"} <= set(rows[0]):
            raise ValueError("dataset CSV needs columns 'x' and 'y'")
        return cls([float(r["x"]) for r in rows], [int(r["y"]) for r in rows])


def zero_one_loss(pair: Sequence, h: ThresholdHypothesis) -> int:
    x, y = pair
    return int(h.predict(x) != int(y))


def empirical_risk(d: LabeledDataset, h: ThresholdHypothesis) -> float:
    if len(d) == 0:
        raise ValueError("empirical risk of an empty dataset")
    return float(np.mean(h.predict(d.x) != d.y))


def empirical_risks(d: LabeledDataset, hs: HypothesisSpace) -> np.ndarray:
    if len(d) == 0:
        raise ValueError("empirical risk of an empty dataset")
    return hs.loss_matrix(d.x, d.y).mean(axis=0)


def erm_index(d: LabeledDataset, hs: HypothesisSpace) -> tuple[int, float]:
    risks = empirical_risks(d, hs)
    i = int(np.argmin(risks))  # first minimiser
    return i, float(risks[i])


def erm(d: LabeledDataset, hs: HypothesisSpace) -> tuple[ThresholdHypothesis, float]:
    """Lowest-index empirical risk minimiser and its risk."""
    i, risk = erm_index(d, hs)
    return hs[i], risk


def disagreement_mass(m: GaussianLabelModel, h: ThresholdHypothesis) -> float:
    """P(h(x) != clean label) under the model's input law."""
    between = abs(m.cdf(h.theta) - m.cdf(m.true_theta))
    return between if h.polarity == m.polarity else 1.0 - between


def expected_risk_gaussian(m: GaussianLabelModel, h: ThresholdHypothesis) -> float:
    rho = m.flip_prob
    return rho + (1.0 - 2.0 * rho) * disagreement_mass(m, h)


def expected_risks_gaussian(m: GaussianLabelModel, hs: HypothesisSpace) -> np.ndarray:
    between = np.abs(ndtr((hs.thetas - m.mean) / m.sd) - m.cdf(m.true_theta))
    same = hs.above == (m.polarity == ABOVE)
    dis = np.where(same, between, 1.0 - between)
    return m.flip_prob + (1.0 - 2.0 * m.flip_prob) * dis


def expected_risk_finite(p: FiniteDistribution, h: ThresholdHypothesis) -> float:
    """Sum of p(w) * loss(w, h) with each outcome label an (x, y) pair."""
    total = 0.0
    for w, prob in zip(p.space.outcomes, p.probs):
        total += prob * zero_one_loss(_as_pair(w), h)
    return float(total)


def _as_pair(label) -> tuple[float, int]:
    try:
        x, y = label
    except (TypeError, ValueError):
        raise ValueError(f"outcome {label!r} is not an (x, y) pair") from None
    return float(x), int(y)


def finite_draw(p: FiniteDistribution, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    """n i.i.d. (x, y) pairs from a distribution over labelled outcomes."""
    pairs = np.array([_as_pair(w) for w in p.space.outcomes])
    idx = rng.choice(len(pairs), size=n, p=p.probs)
    return pairs[idx, 0], pairs[idx, 1].astype(np.int8)


def draw_from(source, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(source, FiniteDistribution):
        return finite_draw(source, rng, n)
    return source.draw(rng, n)


def sample(m: GaussianLabelModel, n: int, seed: int, stream: int = 0) -> LabeledDataset:
    """n labelled draws from ``m`` using substream ``(seed, stream)``."""
    if n < 1:
        raise ValueError("sample size must be at least 1")
    x, y = m.draw(substream(seed, stream), n)
    return LabeledDataset(x, y)


def risk_of(source, h: ThresholdHypothesis) -> float:
    if isinstance(source, FiniteDistribution):
        return expected_risk_finite(source, h)
    return expected_risk_gaussian(source, h)


def gaussian_tv(a: GaussianLabelModel, b: GaussianLabelModel) -> float:
    """TV distance between the joint (x, y) laws of two label models."""
    if (a.sd, a.true_theta, a.flip_prob, a.polarity) == (b.sd, b.true_theta, b.flip_prob, b.polarity):
        # identical label channel: TV of the input laws, closed form for equal sds
        return float(2.0 * ndtr(abs(a.mean - b.mean) / (2.0 * a.sd)) - 1.0)

    def integrand(x):
        return 0.5 * sum(abs(a.density(x, y) - b.density(x, y)) for y in (0, 1))

    lo = min(a.mean - 12 * a.sd, b.mean - 12 * b.sd)
    hi = max(a.mean + 12 * a.sd, b.mean + 12 * b.sd)
    breaks = sorted({a.true_theta, b.true_theta, a.mean, b.mean})
    val, _ = integrate.quad(integrand, lo, hi, points=breaks, limit=200)
    return float(min(1.0, val))
