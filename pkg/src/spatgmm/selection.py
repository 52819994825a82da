"""BIC scores, free-parameter counts and sweeps over candidate models.

BIC here is ``2 * loglik - k * log(N)``: higher is better.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, replace

log = logging.getLogger(__name__)

SCORE_COLUMNS = ("G", "family", "constrained", "loglik", "k", "bic", "converged")


def count_params(G: int, p: int, family, constrained: bool = False) -> int:
    """Free parameters: mixing weights, unstructured means and covariance terms.

    ``family`` is ``"sigmoid"`` (4 spatial parameters per set), ``"quadratic"``
    (3 per set) or ``"full"`` for the unconstrained baseline.
    """
    family = getattr(family, "value", family)
    base = (G - 1) + G * p
    if family == "full":
        return base + G * p * (p + 1) // 2
    per_set = {"sigmoid": 4, "quadratic": 3}[family]
    return base + per_set * (1 if constrained else G)


def bic(loglik: float, k: int, n: int) -> float:
    if n < 1:
        raise ValueError("N must be >= 1")
    return 2.0 * loglik - k * math.log(n)


@dataclass(frozen=True)
class ModelScore:
    G: int
    family: str
    constrained: bool
    loglik: float
    k: int
    bic: float
    converged: bool = True

    @classmethod
    def from_result(cls, result, n: int):
        model = result.model
        family = getattr(model, "family", "full")
        family = getattr(family, "value", family)
        k = model.n_params()
        return cls(
            G=model.G,
            family=family,
            constrained=bool(getattr(model, "constrained", False)),
            loglik=result.loglik,
            k=k,
            bic=bic(result.loglik, k, n),
            converged=result.converged,
        )

    def row(self):
        return [self.G, self.family, str(self.constrained).lower(), repr(self.loglik), self.k, repr(self.bic), str(self.converged).lower()]


@dataclass
class Selection:
    scores: list[ModelScore]
    best: int
    results: dict
    failures: dict

    @property
    def best_score(self) -> ModelScore:
        return self.scores[self.best]

    @property
    def best_result(self):
        return self.results[self.best_score.G]


def select_g(data, cs, g_range, config=None) -> Selection:
    """Fit every G in ``g_range`` with the same seed and keep the highest BIC.

    Failed fits are recorded in ``failures`` and excluded; equal BICs resolve
    to the smallest G.
    """
    from .errors import FitError
    from .mixture import FitConfig, fit

    config = config or FitConfig()
    n = len(data)
    scores, results, failures = [], {}, {}
    for G in sorted(set(int(g) for g in g_range)):
        try:
            res = fit(data, cs, G, config)
        except (FitError, ValueError) as exc:
            log.warning("G=%d failed: %s", G, exc)
            failures[G] = str(exc)
            continue
        results[G] = res
        scores.append(ModelScore.from_result(res, n))
    if not scores:
        raise FitError(f"every candidate G in {sorted(g_range)} failed", list(failures.items()))
    best = max(range(len(scores)), key=lambda i: (scores[i].bic, -scores[i].G))
    return Selection(scores=scores, best=best, results=results, failures=failures)


def compare_constraint(data, cs, G: int, config=None):
    """Unconstrained and constrained fits from identical initialization.

    Returns ``(unconstrained_score, constrained_score, unconstrained_fit, constrained_fit)``.
    """
    from .mixture import FitConfig, fit

    config = config or FitConfig()
    n = len(data)
    free = fit(data, cs, G, replace(config, constrained=False))
    shared = fit(data, cs, G, replace(config, constrained=True))
    return ModelScore.from_result(free, n), ModelScore.from_result(shared, n), free, shared


def scores_csv(scores) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCORE_COLUMNS)
    for s in scores:
        w.writerow(s.row())
    return buf.getvalue()
