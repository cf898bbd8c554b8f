"""Parameter counting, information criteria, MAP partitioning, and the
top-level model-selection driver sweeping the component count."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, Hyperparameters, Model, Parameters
from .em import EmConfig, EmResult, run_em, run_penalized_em
from .micl import MiclConfig, log_integrated_complete, run_micl
from .util import derive_seed

CRITERIA = ("bic", "aic", "micl", "bic-noselect", "icl-noselect")


def count_params(model: Model, kinds) -> int:
    """Free-parameter count: g-1 proportions plus, per column, one block per
    component if relevant and a single shared block otherwise."""
    nu = model.g - 1
    for j, kind in enumerate(kinds):
        nu += kind.n_free_params * (model.g if model.omega[j] else 1)
    return int(nu)


def bic(loglik: float, nu_m: int, n: int) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    return loglik - 0.5 * nu_m * np.log(n)


def aic(loglik: float, nu_m: int) -> float:
    return loglik - nu_m


def map_partition(fuzzy: np.ndarray) -> np.ndarray:
    """Highest-responsibility labels (1-based); ties go to the lowest index."""
    return np.argmax(fuzzy, axis=1).astype(np.intp) + 1


@dataclass
class GRecord:
    """One (criterion, g) fit."""

    criterion: str
    g: int
    model: Model
    value: float
    loglik: float | None
    theta: Parameters | None
    z_star: np.ndarray | None
    runtime_s: float


@dataclass
class SelectionReport:
    criterion: str
    records: list = field(default_factory=list)
    best: GRecord | None = None
    theta: Parameters | None = None
    fuzzy: np.ndarray | None = None
    partition: np.ndarray | None = None
    relevance: np.ndarray | None = None

    @property
    def g(self) -> int:
        return self.best.g

    @property
    def relevant_rate(self) -> float:
        return float(np.mean(self.best.model.omega))


def _argbest(records) -> GRecord:
    # ties toward smaller g: strict improvement required, records in g order
    best = records[0]
    for rec in records[1:]:
        if rec.value > best.value:
            best = rec
    return best


def select_model(dataset: Dataset, criterion: str, g_max: int, config: EmConfig,
                 hyper: Hyperparameters | None = None) -> SelectionReport:
    """Sweep g = 1..g_max under one criterion and return the winning model.

    bic/aic run the penalized EM (c = ln(n)/2 or 1); micl runs the alternating
    integrated-likelihood optimizer and refits the winner by plain EM;
    bic-noselect/icl-noselect force every column relevant and score plain EM
    fits by the BIC or by the integrated complete-data value at the MAP
    partition.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    if g_max < 1:
        raise ValueError("g_max must be >= 1")
    if hyper is None and criterion in ("micl", "icl-noselect"):
        hyper = Hyperparameters.default(dataset)
    n = dataset.n
    report = SelectionReport(criterion=criterion)
    em_results: dict[int, EmResult] = {}
    for g in range(1, g_max + 1):
        cfg = EmConfig(seed=derive_seed(config.seed, 17, g),
                       max_iterations=config.max_iterations,
                       rel_tolerance=config.rel_tolerance,
                       n_starts=config.n_starts,
                       empty_component_policy=config.empty_component_policy,
                       max_redraws=config.max_redraws)
        t0 = time.perf_counter()
        if criterion in ("bic", "aic"):
            c = 0.5 * np.log(n) if criterion == "bic" else 1.0
            res = run_penalized_em(dataset, g, float(c), cfg)
            em_results[g] = res
            rec = GRecord(criterion, g, res.model, res.objective, res.loglik,
                          res.theta, None, time.perf_counter() - t0)
        elif criterion == "micl":
            mcfg = MiclConfig(seed=cfg.seed, n_starts=cfg.n_starts)
            model, z_star, value = run_micl(dataset, g, hyper, mcfg)
            rec = GRecord(criterion, g, model, value, None, None, z_star,
                          time.perf_counter() - t0)
        else:
            model = Model(g, np.ones(dataset.d, dtype=np.int8))
            res = run_em(dataset, model, cfg)
            em_results[g] = res
            if criterion == "bic-noselect":
                value = bic(res.loglik, count_params(model, dataset.kinds), n)
            else:
                value = log_integrated_complete(dataset, map_partition(res.fuzzy),
                                                model, hyper)
            rec = GRecord(criterion, g, model, value, res.loglik, res.theta,
                          None, time.perf_counter() - t0)
        report.records.append(rec)
    report.best = _argbest(report.records)
    if criterion == "micl":
        # inference for the selected model only
        cfg = EmConfig(seed=derive_seed(config.seed, 23),
                       max_iterations=config.max_iterations,
                       rel_tolerance=config.rel_tolerance,
                       n_starts=config.n_starts)
        refit = run_em(dataset, report.best.model, cfg)
        report.theta, report.fuzzy = refit.theta, refit.fuzzy
        report.best.theta = refit.theta
        report.best.loglik = refit.loglik
    else:
        res = em_results[report.best.g]
        report.theta, report.fuzzy = res.theta, res.fuzzy
    report.partition = map_partition(report.fuzzy)
    report.relevance = report.best.model.omega.astype(bool)
    return report
