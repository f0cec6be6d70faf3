"""Exact Mann-Whitney tests, Cliff's delta, and the frequentist reproduction table.

Convention throughout: ``x`` is the control sample (group A) and ``y`` the
treatment sample (group P). The U statistic counts pairs where ``y`` exceeds
``x`` (ties count one half), ``alternative="greater"`` means ``y`` is
stochastically larger, the confidence interval bounds the location shift of
``y`` relative to ``x`` and a positive Cliff's delta means ``y`` tends to be
larger.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass
from typing import Literal, Sequence

import numpy as np
from scipy import stats

from .data import OUTCOMES, Dataset, aggregate_per_participant, group_summary, group_totals
from .jsonutil import dump_json

Alternative = Literal["two_sided", "greater", "less"]
ALPHA = 0.05
EXACT_MAX_N = 20


@dataclass(frozen=True)
class MwuResult:
    u_statistic: float
    p_value: float
    alternative: str
    method: str
    ci_low: float
    ci_high: float
    conf_level: float
    estimate: float  # Hodges-Lehmann shift of y relative to x


@dataclass(frozen=True)
class CliffsDelta:
    delta: float
    n_greater: int
    n_less: int
    n_tied: int


def _check_samples(x: Sequence[float], y: Sequence[float]) -> None:
    if len(x) == 0 or len(y) == 0:
        raise ValueError("both samples must be non-empty")


def _doubled_midranks(pooled: Sequence[float]) -> tuple[list[float], list[int], list[int]]:
    """Distinct values, their tie counts and twice their mid-rank (an integer)."""
    counts = sorted(Counter(pooled).items())
    values, ties, ranks2 = [], [], []
    below = 0
    for v, t in counts:
        values.append(v)
        ties.append(t)
        ranks2.append(2 * below + t + 1)
        below += t
    return values, ties, ranks2


def _u2_distribution(ties: list[int], ranks2: list[int], n_y: int) -> dict[int, int]:
    """Null distribution of 2*U_y as {value: number of label assignments}.

    Dynamic programming over tie groups: choosing ``c`` of the ``t`` tied
    observations for ``y`` contributes ``comb(t, c)`` assignments and
    ``c * rank2`` to twice the rank sum.
    """
    dist: dict[tuple[int, int], int] = {(0, 0): 1}
    for t, r2 in zip(ties, ranks2):
        nxt: dict[tuple[int, int], int] = defaultdict(int)
        for (k, s), ways in dist.items():
            for c in range(min(t, n_y - k) + 1):
                nxt[(k + c, s + c * r2)] += ways * math.comb(t, c)
        dist = nxt
    offset = n_y * (n_y + 1)
    return {s - offset: w for (k, s), w in dist.items() if k == n_y}


def _u2_observed(x: Sequence[float], y: Sequence[float]) -> int:
    u2 = 0
    for yi in y:
        for xi in x:
            u2 += 2 if yi > xi else (1 if yi == xi else 0)
    return u2


def _exact_p(x: Sequence[float], y: Sequence[float], alternative: Alternative) -> tuple[int, float]:
    _, ties, ranks2 = _doubled_midranks(list(x) + list(y))
    dist = _u2_distribution(ties, ranks2, len(y))
    total = math.comb(len(x) + len(y), len(y))
    u2 = _u2_observed(x, y)
    centre = len(x) * len(y)  # 2 * E[U]
    if alternative == "greater":
        hits = sum(w for v, w in dist.items() if v >= u2)
    elif alternative == "less":
        hits = sum(w for v, w in dist.items() if v <= u2)
    else:
        dev = abs(u2 - centre)
        hits = sum(w for v, w in dist.items() if abs(v - centre) >= dev)
    return u2, hits / total


def _normal_p(x: Sequence[float], y: Sequence[float], alternative: Alternative) -> tuple[int, float]:
    n_x, n_y = len(x), len(y)
    n = n_x + n_y
    _, ties, _ = _doubled_midranks(list(x) + list(y))
    u2 = _u2_observed(x, y)
    tie_term = sum(t**3 - t for t in ties) / (n * (n - 1)) if n > 1 else 0.0
    var = n_x * n_y / 12.0 * ((n + 1) - tie_term)
    if var <= 0:
        return u2, 1.0
    diff = u2 / 2.0 - n_x * n_y / 2.0
    sd = math.sqrt(var)
    if alternative == "greater":
        p = stats.norm.sf((diff - 0.5) / sd)
    elif alternative == "less":
        p = stats.norm.cdf((diff + 0.5) / sd)
    else:
        p = min(1.0, 2 * stats.norm.sf((abs(diff) - 0.5) / sd))
    return u2, float(p)


def _p_value(x, y, alternative: Alternative, exact: bool) -> tuple[int, float]:
    return _exact_p(x, y, alternative) if exact else _normal_p(x, y, alternative)


def mann_whitney(
    x: Sequence[float],
    y: Sequence[float],
    alternative: Alternative = "two_sided",
    conf_level: float = 0.95,
    method: str = "auto",
) -> MwuResult:
    """Mann-Whitney U test with a test-inversion confidence interval.

    The exact permutation distribution (mid-ranks, enumerated over the observed
    multiset of values) is used when ``len(x) + len(y) <= 20`` or when
    ``method="exact"``. The interval collects every integer shift ``d`` for
    which testing ``x`` against ``y - d`` is not rejected at ``1 - conf_level``;
    an endpoint that is never rejected is reported as infinite.
    """
    _check_samples(x, y)
    if not 0 < conf_level < 1:
        raise ValueError("conf_level must lie in (0, 1)")
    if alternative not in ("two_sided", "greater", "less"):
        raise ValueError(f"unknown alternative {alternative!r}")
    if method not in ("auto", "exact", "normal_approx"):
        raise ValueError(f"unknown method {method!r}")
    exact = method == "exact" or (method == "auto" and len(x) + len(y) <= EXACT_MAX_N)
    x = [float(v) for v in x]
    y = [float(v) for v in y]

    u2, p = _p_value(x, y, alternative, exact)

    alpha = 1.0 - conf_level
    pooled = x + y
    span = int(math.ceil(max(pooled) - min(pooled)))
    shifts = range(-span - 1, span + 2)
    accepted = [d for d in shifts if _p_value(x, [v - d for v in y], alternative, exact)[1] > alpha]
    if accepted:
        lo = -math.inf if accepted[0] == shifts[0] or alternative == "less" else float(accepted[0])
        hi = math.inf if accepted[-1] == shifts[-1] or alternative == "greater" else float(accepted[-1])
    else:
        lo = hi = float("nan")

    estimate = float(np.median(np.subtract.outer(np.asarray(y), np.asarray(x))))
    return MwuResult(
        u_statistic=u2 / 2.0,
        p_value=min(1.0, p),
        alternative=alternative,
        method="exact" if exact else "normal_approx",
        ci_low=lo,
        ci_high=hi,
        conf_level=conf_level,
        estimate=estimate,
    )


def cliffs_delta(x: Sequence[float], y: Sequence[float]) -> CliffsDelta:
    """Cliff's delta, P(Y > X) - P(Y < X), by exact pairwise comparison."""
    _check_samples(x, y)
    signs = np.sign(np.subtract.outer(np.asarray(y, dtype=float), np.asarray(x, dtype=float)))
    n_greater = int(np.count_nonzero(signs > 0))
    n_less = int(np.count_nonzero(signs < 0))
    n_tied = int(signs.size) - n_greater - n_less
    return CliffsDelta((n_greater - n_less) / signs.size, n_greater, n_less, n_tied)


# --------------------------------------------------------------- reproduction


@dataclass(frozen=True)
class ReproductionRow:
    element: str
    mean_a: float
    mean_p: float
    median_a: float
    median_p: float
    p_value: float
    p_value_one_sided: float
    ci_low: float
    ci_high: float
    delta: float

    @property
    def significant(self) -> bool:
        return self.p_value < ALPHA

    def as_dict(self) -> dict:
        out = asdict(self)
        out["significant"] = self.significant
        return out


def reproduce_table(d: Dataset, conf_level: float = 0.95, method: str = "exact") -> list[ReproductionRow]:
    """One row per element type: group means/medians, two-sided MWU p-value,
    its confidence interval, the one-sided p-value and Cliff's delta.

    ``method`` is ``"exact"`` (default) or ``"normal_approx"``.
    """
    summary = group_summary(aggregate_per_participant(d))
    rows = []
    for outcome in OUTCOMES:
        a, p = group_totals(d, outcome)
        two = mann_whitney(a, p, "two_sided", conf_level, method)
        one = mann_whitney(a, p, "greater", conf_level, method)
        rows.append(
            ReproductionRow(
                element=outcome.capitalize(),
                mean_a=summary[outcome]["A"].mean,
                mean_p=summary[outcome]["P"].mean,
                median_a=summary[outcome]["A"].median,
                median_p=summary[outcome]["P"].median,
                p_value=two.p_value,
                p_value_one_sided=one.p_value,
                ci_low=two.ci_low,
                ci_high=two.ci_high,
                delta=cliffs_delta(a, p).delta,
            )
        )
    return rows


def _fmt_bound(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:g}"


def _fmt_median(v: float) -> str:
    return f"{v:g}"


def format_table(rows: Sequence[ReproductionRow], fmt: str = "md") -> str:
    """Render reproduction rows as ``md``, ``csv`` or ``json`` text."""
    if fmt == "json":
        return dump_json([r.as_dict() for r in rows])
    header = ["Element", "Mean (A)", "Mean (P)", "Median (A)", "Median (P)",
              "P-value", "Conf. Int.", "Cliff's delta", "P-value (one-sided)"]
    body = []
    for r in rows:
        star = "*" if r.significant else ""
        body.append([
            r.element, f"{r.mean_a:.2f}", f"{r.mean_p:.2f}", _fmt_median(r.median_a),
            _fmt_median(r.median_p), f"{star}{r.p_value:.2f}",
            f"({_fmt_bound(r.ci_low)}; {_fmt_bound(r.ci_high)})", f"{r.delta:.2f}",
            f"{r.p_value_one_sided:.2f}",
        ])
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(body)
        return buf.getvalue()
    if fmt != "md":
        raise ValueError(f"unknown format {fmt!r}")
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(row) + " |" for row in body]
    return "\n".join(lines) + "\n"
