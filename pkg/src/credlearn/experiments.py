"""Synthetic threshold-classifier experiments and their result tables.

Default protocol:

* hypotheses: ``h_count`` thresholds evenly spaced on [grid_lo, grid_hi], all
  predicting 1 at or above the threshold;
* clean labels come from the grid point ``true_theta`` (default: the middle grid
  point), so the grid is realizable when ``noise_rho`` is 0;
* exp1: extremes N(mean_i, sd_i); eps* is computed from closed-form risks, no
  sampling involved;
* exp2: single N(mean, sd) law, clean labels; ``trials`` repetitions per
  (train, test) pair;
* exp3: one training sample of size n from each extreme, ERM on their union,
  an independent sample of size n from the test law for the empirical risks in
  eps**.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from decimal import ROUND_DOWN, Decimal
from dataclasses import asdict, dataclass, field, fields
from typing import Any

import numpy as np

from . import __version__
from .bounds import (
    RiskOracle,
    epsilon_prime_ub,
    epsilon_star,
    epsilon_star_star,
    epsilon_ub,
)
from .hypotheses import (
    GaussianLabelModel,
    LabeledDataset,
    empirical_risk,
    erm_index,
    expected_risks_gaussian,
    make_grid_space,
)
from .rng import substream

EXPERIMENT_IDS = ("exp1_wide", "exp1_narrow", "exp2_sanity", "exp3_agnostic", "custom")
KINDS = {"exp1_wide": "exp1", "exp1_narrow": "exp1", "exp2_sanity": "exp2", "exp3_agnostic": "exp3"}
LOG_BASES = {"natural": "e", "e": "e", "ten": "10", "10": "10"}


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class ExperimentConfig:
    experiment_id: str
    likelihood_means: list = field(default_factory=lambda: [0.0])
    likelihood_sds: list = field(default_factory=lambda: [1.0])
    epsilons: list | None = None
    h_count: int = 100
    grid_lo: float = -10.0
    grid_hi: float = 10.0
    delta: float = 0.05
    sample_sizes: list = field(default_factory=lambda: [10, 100, 200, 300, 400, 500])
    noise_rho: float = 0.0
    trials: int = 1000
    master_seed: int = 20240501
    log_base: str = "natural"
    true_theta: float | None = None
    test_mean: float = 0.0
    test_sd: float = 1.0
    kind: str | None = None

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config", "must be a JSON object")
        known = {f.name for f in fields(cls)}
        for key in doc:
            if key not in known:
                raise ConfigError(key, "unknown field")
        if "experiment_id" not in doc:
            raise ConfigError("experiment_id", "missing")
        return cls(**doc)

    def validate(self) -> None:
        if self.experiment_id not in EXPERIMENT_IDS:
            raise ConfigError("experiment_id", f"must be one of {', '.join(EXPERIMENT_IDS)}")
        kind = self.kind or KINDS.get(self.experiment_id)
        if kind not in ("exp1", "exp2", "exp3"):
            raise ConfigError("kind", "custom experiments must set kind to exp1, exp2 or exp3")
        self.kind = kind
        if self.log_base not in LOG_BASES:
            raise ConfigError("log_base", "must be 'natural' or 'ten'")
        if not _is_number(self.delta) or not 0.0 < self.delta < 1.0:
            raise ConfigError("delta", "must lie in (0, 1)")
        if not isinstance(self.h_count, int) or isinstance(self.h_count, bool) or self.h_count < 1:
            raise ConfigError("h_count", "must be a positive integer")
        if not (_is_number(self.grid_lo) and _is_number(self.grid_hi)) or not self.grid_lo < self.grid_hi:
            raise ConfigError("grid_lo", "grid needs finite grid_lo < grid_hi")
        if not isinstance(self.likelihood_means, list) or not self.likelihood_means:
            raise ConfigError("likelihood_means", "must be a nonempty list")
        if not isinstance(self.likelihood_sds, list) or len(self.likelihood_sds) != len(self.likelihood_means):
            raise ConfigError("likelihood_sds", "must be a list matching likelihood_means")
        if not all(_is_number(v) for v in self.likelihood_means):
            raise ConfigError("likelihood_means", "entries must be finite numbers")
        if not all(_is_number(v) and v > 0 for v in self.likelihood_sds):
            raise ConfigError("likelihood_sds", "entries must be positive")
        if not _is_number(self.test_sd) or self.test_sd <= 0:
            raise ConfigError("test_sd", "must be positive")
        if not _is_number(self.noise_rho) or not 0.0 <= self.noise_rho < 0.5:
            raise ConfigError("noise_rho", "must lie in [0, 0.5)")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials", "must be a positive integer")
        if not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ConfigError("master_seed", "must be a non-negative integer")
        if self.epsilons is not None and (
            len(self.epsilons) != len(self.likelihood_means) or not all(0 < e < 1 for e in self.epsilons)
        ):
            raise ConfigError("epsilons", "one value in (0, 1) per likelihood")
        if self.true_theta is not None and not _is_number(self.true_theta):
            raise ConfigError("true_theta", "must be a finite number")
        if not isinstance(self.sample_sizes, list) or not self.sample_sizes:
            raise ConfigError("sample_sizes", "must be a nonempty list")
        for s in self.sample_sizes:
            parts = s if kind == "exp2" else [s]
            if kind == "exp2" and (not isinstance(s, list) or len(s) != 2):
                raise ConfigError("sample_sizes", "exp2 expects [train, test] pairs")
            if not all(isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in parts):
                raise ConfigError("sample_sizes", "sizes must be integers >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @property
    def log(self) -> str:
        return LOG_BASES[self.log_base]

    def hypothesis_space(self):
        return make_grid_space(self.grid_lo, self.grid_hi, self.h_count)

    def theta_star(self) -> float:
        if self.true_theta is not None:
            return float(self.true_theta)
        return float(self.hypothesis_space().thetas[self.h_count // 2])

    def models(self, rho: float | None = None) -> list[GaussianLabelModel]:
        rho = self.noise_rho if rho is None else rho
        t = self.theta_star()
        return [
            GaussianLabelModel(float(m), float(s), t, rho)
            for m, s in zip(self.likelihood_means, self.likelihood_sds)
        ]

    def test_model(self) -> GaussianLabelModel:
        return GaussianLabelModel(float(self.test_mean), float(self.test_sd), self.theta_star(), self.noise_rho)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


@dataclass
class ResultTable:
    headers: list
    rows: list
    footer: dict = field(default_factory=dict)
    title: str = ""

    def __post_init__(self):
        for r in self.rows:
            if len(r) != len(self.headers):
                raise ValueError("result table is not rectangular")
            for v in r:
                if isinstance(v, float) and not math.isfinite(v):
                    raise ValueError("result table holds a non-finite value")

    def column(self, name: str) -> list:
        j = self.headers.index(name)
        return [r[j] for r in self.rows]

    def _footer_lines(self) -> list[str]:
        return [f"{k}: {self.footer[k]}" for k in ("config_sha256", "master_seed", "version") if k in self.footer]

    def to_markdown(self) -> str:
        out = []
        if self.title:
            out += [f"### {self.title}", ""]
        out.append("| " + " | ".join(self.headers) + " |")
        out.append("|" + "|".join("---" for _ in self.headers) + "|")
        for r in self.rows:
            out.append("| " + " | ".join(fmt_cell(v) for v in r) + " |")
        out.append("")
        out += [f"- {line}" for line in self._footer_lines()]
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.headers)
        for r in self.rows:
            w.writerow([fmt_cell(v) for v in r])
        for line in self._footer_lines():
            buf.write(f"# {line}\n")
        return buf.getvalue()

    def render(self, fmt: str) -> str:
        if fmt == "md":
            return self.to_markdown()
        if fmt == "csv":
            return self.to_csv()
        raise ValueError(f"unknown table format {fmt!r}")


def truncate5(v: float) -> str:
    """Five decimals, truncated toward zero on the shortest decimal repr.

    The reference tables truncate rather than round (0.0760090 shows as 0.07600).
    """
    d = Decimal(repr(float(v))).quantize(Decimal("0.00001"), rounding=ROUND_DOWN)
    return f"{abs(d) if d == 0 else d:.5f}"


def fmt_cell(v: Any) -> str:
    if isinstance(v, bool):
        return "Yes" if v else "No"
    if isinstance(v, (float, np.floating)):
        return truncate5(v)
    return str(v)


def _footer(cfg: ExperimentConfig) -> dict:
    return {"config_sha256": cfg.config_hash(), "master_seed": cfg.master_seed, "version": __version__}


def run_experiment1(cfg: ExperimentConfig) -> ResultTable:
    """eps*, eps_UB and the bad-set size per sample size for a Gaussian credal set."""
    hs = cfg.hypothesis_space()
    oracle = RiskOracle(cfg.models())
    rows = []
    for n in cfg.sample_sizes:
        star = epsilon_star(oracle, hs, n, cfg.delta, cfg.log)
        ub = epsilon_ub(len(hs), n, cfg.delta, cfg.log)
        size = star.intermediates["bad_set_size"]
        if not star.bound_value <= ub.bound_value or not size <= len(hs):
            raise AssertionError(f"row n={n} breaks eps* <= eps_UB or |B| <= |H|")
        rows.append([n, star.bound_value, ub.bound_value, size, len(hs), star.intermediates["realizable"]])
    headers = ["n", "eps_star", "eps_ub", "bad_set_size", "h_count", "realizable"]
    return ResultTable(headers, rows, _footer(cfg), cfg.experiment_id)


def run_experiment2(cfg: ExperimentConfig) -> ResultTable:
    """Repeated ERM on clean data; bound columns are evaluated at the test size.

    Coverage violations compare the true risk of each trial's ERM against
    eps_UB at the training size, which is the sample the guarantee is about.
    """
    hs = cfg.hypothesis_space()
    model = cfg.models()[0]
    true_risk = expected_risks_gaussian(model, hs)
    oracle = RiskOracle([model])
    rows = []
    for p, (n_train, n_test) in enumerate(cfg.sample_sizes):
        limit = epsilon_ub(len(hs), n_train, cfg.delta, cfg.log).bound_value
        test_risks, risks, violations = [], [], 0
        for t in range(cfg.trials):
            rng = substream(cfg.master_seed, p, t)
            train = LabeledDataset(*model.draw(rng, n_train))
            test = LabeledDataset(*model.draw(rng, n_test))
            j, _ = erm_index(train, hs)
            risks.append(true_risk[j])
            test_risks.append(empirical_risk(test, hs[j]))
            violations += int(true_risk[j] > limit)
        star = epsilon_star(oracle, hs, n_test, cfg.delta, cfg.log)
        ub = epsilon_ub(len(hs), n_test, cfg.delta, cfg.log)
        rows.append(
            [n_train, n_test, float(np.mean(test_risks)), float(np.mean(risks)),
             star.bound_value, ub.bound_value, violations, cfg.trials]
        )
    headers = ["train_n", "test_n", "test_risk", "true_risk", "eps_star", "eps_ub", "violations", "trials"]
    return ResultTable(headers, rows, _footer(cfg), cfg.experiment_id)


def run_experiment3(cfg: ExperimentConfig) -> ResultTable:
    """Agnostic run: excess risk of the pooled ERM against eps** and eps'_UB."""
    hs = cfg.hypothesis_space()
    models = cfg.models()
    target = cfg.test_model()
    target_risk = expected_risks_gaussian(target, hs)
    oracle = RiskOracle(models)
    rows = []
    for r, n in enumerate(cfg.sample_sizes):
        parts = [LabeledDataset(*m.draw(substream(cfg.master_seed, r, i), n)) for i, m in enumerate(models)]
        train = parts[0].concat(*parts[1:])
        holdout = LabeledDataset(*target.draw(substream(cfg.master_seed, r, len(models)), n))
        j, _ = erm_index(train, hs)
        l_hat, l_star = float(target_risk[j]), float(target_risk.min())
        ess = epsilon_star_star(oracle, hs, holdout, n, cfg.delta, cfg.log)
        pub = epsilon_prime_ub(len(hs), n, cfg.delta, cfg.log)
        diff = l_hat - l_star
        if not (diff <= ess.bound_value and ess.bound_value <= pub.bound_value):
            raise AssertionError(f"row n={n} breaks difference <= eps** <= eps'_UB")
        rows.append([n, l_hat, l_star, diff, ess.bound_value, pub.bound_value, empirical_risk(holdout, hs[j])])
    headers = ["n", "risk_erm", "risk_best", "difference", "eps_star_star", "eps_prime_ub", "test_risk"]
    return ResultTable(headers, rows, _footer(cfg), cfg.experiment_id)


RUNNERS = {"exp1": run_experiment1, "exp2": run_experiment2, "exp3": run_experiment3}


def run_experiment(cfg: ExperimentConfig) -> ResultTable:
    return RUNNERS[cfg.kind](cfg)


def run_coverage(cfg: ExperimentConfig, mode: str = "risk", n: int | None = None) -> ResultTable:
    """Violation counts of the closed-form bounds over ``cfg.trials`` seeded trials.

    ``risk`` tests L(h_erm) <= eps_UB; ``excess`` tests L(h_erm) - min_h L(h) <= eps'_UB.
    """
    if mode not in ("risk", "excess"):
        raise ConfigError("mode", "must be 'risk' or 'excess'")
    hs = cfg.hypothesis_space()
    model = cfg.models()[0]
    risk = expected_risks_gaussian(model, hs)
    sizes = [n] if n is not None else [s[0] if isinstance(s, list) else s for s in cfg.sample_sizes]
    rows = []
    for p, size in enumerate(sizes):
        if mode == "risk":
            limit, base = epsilon_ub(len(hs), size, cfg.delta, cfg.log).bound_value, 0.0
        else:
            limit, base = epsilon_prime_ub(len(hs), size, cfg.delta, cfg.log).bound_value, float(risk.min())
        violations = 0
        for t in range(cfg.trials):
            d = LabeledDataset(*model.draw(substream(cfg.master_seed, p, t), size))
            j, _ = erm_index(d, hs)
            violations += int(risk[j] - base > limit)
        band = cfg.delta + 3 * math.sqrt(cfg.delta * (1 - cfg.delta) / cfg.trials)
        rows.append([size, mode, limit, violations, cfg.trials, violations / cfg.trials, band])
    headers = ["n", "mode", "bound", "violations", "trials", "fraction", "allowed"]
    return ResultTable(headers, rows, _footer(cfg), f"{cfg.experiment_id} coverage")
