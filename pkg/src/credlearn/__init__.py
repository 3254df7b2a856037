"""Credal sets from multiple samples and learning bounds that hold over them."""

__version__ = "0.1.0"

from .finite_space import CredalSet, FiniteDistribution, SampleSpace, SetFunction  # noqa: E402
from .bounds import BoundReport, RiskOracle  # noqa: E402
from .hypotheses import GaussianLabelModel, HypothesisSpace, LabeledDataset, ThresholdHypothesis  # noqa: E402

__all__ = [
    "BoundReport",
    "CredalSet",
    "FiniteDistribution",
    "GaussianLabelModel",
    "HypothesisSpace",
    "LabeledDataset",
    "RiskOracle",
    "SampleSpace",
    "SetFunction",
    "ThresholdHypothesis",
]
