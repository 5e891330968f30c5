"""Running trials, merging outcomes and exporting sweep tables."""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import beta

from ..errors import ResourceCapError, ValidationError
from ..info import joint_from_x1x2
from .ensemble import EnsembleModel
from .scheme import (
    CODEBOOK_CAP,
    SchemeConfig,
    TrialOutcome,
    TypicalityTables,
    explicit_baseline_trial,
    explicit_block_markov_trial,
    explicit_storage,
    require_class,
)

THREADS_ENV = "SWITCHFB_THREADS"
# auto mode leaves the explicit engine when a trial would scan more candidate pairs than this
SCAN_CAP = 2**18
SWEEP_COLUMNS = ["axis_value", "trials", "errors", "error_rate", "ci_low", "ci_high", "stage1_errors",
                 "stage2_errors", "seed"]


def clopper_pearson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Exact binomial confidence interval for k successes in n trials."""
    a = 1 - level
    lo = 0.0 if k == 0 else float(beta.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(beta.ppf(1 - a / 2, k + 1, n - k))
    return lo, hi


@dataclass
class SimReport:
    trials: int
    block_errors: int
    stage1_errors: int
    stage2_errors: int
    ci_low: float
    ci_high: float
    mean_decode_time: float
    engine: str
    scheme: str
    effective_rate: float
    seed: int

    @property
    def message_error_rate(self) -> float:
        return self.block_errors / self.trials

    def counts(self) -> tuple[int, int, int, int]:
        """The deterministic part of the report."""
        return self.trials, self.block_errors, self.stage1_errors, self.stage2_errors

    def to_document(self) -> dict:
        return {
            "trials": self.trials, "errors": self.block_errors, "error_rate": self.message_error_rate,
            "ci_low": self.ci_low, "ci_high": self.ci_high, "stage1_errors": self.stage1_errors,
            "stage2_errors": self.stage2_errors, "engine": self.engine, "scheme": self.scheme,
            "effective_rate": self.effective_rate, "seed": self.seed,
        }


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        raise ValidationError(f"{THREADS_ENV} must be an integer") from None


def _run(trial_fn: Callable[[int], TrialOutcome], trials: int, threads: int | None) -> list[TrialOutcome]:
    if int(trials) != trials or trials < 1:
        raise ValidationError("trials must be a positive integer")
    threads = default_threads() if threads is None else int(threads)
    if threads <= 1:
        return [trial_fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(trial_fn, range(trials)))


def _summarise(outcomes: Sequence[TrialOutcome], engine: str, scheme: str, rate: float, seed: int) -> SimReport:
    errors = sum(o.error for o in outcomes)
    s1 = sum(o.error and o.stage == 1 for o in outcomes)
    s2 = sum(o.error and o.stage == 2 for o in outcomes)
    lo, hi = clopper_pearson(errors, len(outcomes))
    mean_t = float(np.mean([o.decode_time for o in outcomes]))
    return SimReport(len(outcomes), int(errors), int(s1), int(s2), lo, hi, mean_t, engine, scheme, rate, seed)


def select_engine(config: SchemeConfig, storage: int, scan: int = 0) -> str:
    if config.engine == "explicit":
        if storage > CODEBOOK_CAP:
            raise ResourceCapError(
                f"explicit codebooks need {storage} symbols (cap {CODEBOOK_CAP}); use the ensemble engine"
            )
        return "explicit"
    if config.engine == "ensemble":
        return "ensemble"
    return "explicit" if storage <= CODEBOOK_CAP and scan <= SCAN_CAP else "ensemble"


def run_block_markov(config: SchemeConfig, trials: int, threads: int | None = None) -> SimReport:
    """Monte Carlo error rate of the block-Markov scheme (messages from encoder 1 only)."""
    inv = require_class(config.channel)
    tables = TypicalityTables.build(config.joint.mass, config.n, config.epsilon)
    engine = select_engine(config, explicit_storage(config))
    if engine == "explicit":
        fn = lambda t: explicit_block_markov_trial(config, tables, inv, t)  # noqa: E731
    else:
        model = EnsembleModel(config, tables, inv)
        fn = model.block_markov_trial
    return _summarise(_run(fn, trials, threads), engine, "block_markov", config.effective_rate, config.seed)


def baseline_mass(config: SchemeConfig) -> np.ndarray:
    """Law of (X1, X2, Y_d) with independent inputs drawn from the marginals of input_dist."""
    P = config.input_dist
    prod = np.outer(P.sum(axis=1), P.sum(axis=0))
    return joint_from_x1x2(config.channel, prod, config.p).marginal(("X1", "X2", "Yd")).mass


def run_no_feedback_baseline(config: SchemeConfig, trials: int, threads: int | None = None) -> SimReport:
    """Single-block MAC code with independent codebooks at rates (R1, R2), decoded from y_d."""
    mass = baseline_mass(config)
    engine = select_engine(config, (config.M1 + config.M2) * config.n, config.M1 * config.M2)
    if engine == "explicit":
        fn = lambda t: explicit_baseline_trial(config, mass, t)  # noqa: E731
    else:
        tables = TypicalityTables.build(mass, config.n, config.epsilon)
        model = EnsembleModel(config, tables)
        fn = lambda t: model.baseline_trial(t, mass)  # noqa: E731
    return _summarise(_run(fn, trials, threads), engine, "baseline", config.R1 + config.R2, config.seed)


@dataclass
class SweepRow:
    axis_value: float
    report: SimReport


def sweep(template: SchemeConfig, axis: str, values: Sequence[float], trials: int, scheme: str = "block_markov",
          threads: int | None = None) -> list[SweepRow]:
    """Reports over one parameter axis, all with the template's master seed."""
    if axis not in ("n", "p", "R1"):
        raise ValidationError(f"axis must be one of n, p, R1 (got {axis!r})")
    values = list(values)
    if not values:
        raise ValidationError("sweep needs at least one value")
    d = np.diff(values)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise ValidationError("sweep values must be strictly monotone")
    runner = {"block_markov": run_block_markov, "baseline": run_no_feedback_baseline}.get(scheme)
    if runner is None:
        raise ValidationError(f"unknown scheme {scheme!r}")
    rows = []
    for v in values:
        v = int(v) if axis == "n" else float(v)
        rows.append(SweepRow(v, runner(template.with_(**{axis: v}), trials, threads)))
    return rows


def sweep_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for row in rows:
        r = row.report
        w.writerow([row.axis_value, r.trials, r.block_errors, f"{r.message_error_rate:.6f}", f"{r.ci_low:.6f}",
                    f"{r.ci_high:.6f}", r.stage1_errors, r.stage2_errors, r.seed])
    return buf.getvalue()
