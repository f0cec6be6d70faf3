"""Report assembly: ``report.md``, ``results.json`` and SVG marginal plots."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .effects import REFERENCE_POLICY, MarginalEffect  # noqa: E402
from .jsonutil import dump_json  # noqa: E402

SCHEMA_VERSION = 1

matplotlib.rcParams.update({"svg.hashsalt": "causal-reanalysis", "svg.fonttype": "path"})


def plot_marginals(effects: Sequence[MarginalEffect], path: Path, title: str, xlabel: str) -> None:
    """Levels on x; posterior mean line with a shaded credible band per effect."""
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    for eff in effects:
        label = eff.predictor if len({e.response for e in effects}) == 1 else eff.response
        line = ax.plot(eff.levels, eff.mean, marker="o", label=label)[0]
        ax.fill_between(eff.levels, eff.ci_low, eff.ci_high, alpha=0.25, color=line.get_color())
        ax.errorbar(
            eff.levels, eff.mean,
            yerr=[[m - lo for m, lo in zip(eff.mean, eff.ci_low)], [hi - m for m, hi in zip(eff.mean, eff.ci_high)]],
            fmt="none", ecolor=line.get_color(), capsize=3,
        )
    levels = sorted({lv for e in effects for lv in e.levels})
    ax.set_xticks(levels)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("P(element missing)")
    ax.set_ylim(0, 1)
    ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _fmt(v, digits: int = 2) -> str:
    if isinstance(v, str):
        return v
    if v is None:
        return "-"
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.{digits}f}"


def _markdown(results: dict, plots: list[str]) -> str:
    out = ["# Reanalysis report", ""]
    out += [f"Representative levels for marginal effects: {REFERENCE_POLICY}.", ""]

    if results.get("reproduction"):
        out += ["## Frequentist reproduction", ""]
        out += ["| Element | Mean (A) | Mean (P) | Median (A) | Median (P) | P-value | Conf. Int. | Cliff's delta | P-value (one-sided) |",
                "|---|---|---|---|---|---|---|---|---|"]
        for r in results["reproduction"]:
            star = "*" if r["significant"] else ""
            out.append(
                f"| {r['element']} | {_fmt(r['mean_a'])} | {_fmt(r['mean_p'])} | {r['median_a']:g} | {r['median_p']:g} "
                f"| {star}{_fmt(r['p_value'])} | ({_fmt(r['ci_low'], 0)}; {_fmt(r['ci_high'], 0)}) "
                f"| {_fmt(r['delta'])} | {_fmt(r['p_value_one_sided'])} |"
            )
        out.append("")
    if results.get("identification"):
        ident = results["identification"]
        out += ["## Identification", "", f"Adjustment mode: `{ident['mode']}`", ""]
        for outcome, info in sorted(ident["outcomes"].items()):
            sets = ", ".join("{" + ", ".join(s) + "}" for s in info["minimal_backdoor_sets"]) or "none"
            out.append(f"- **{outcome}**: minimal backdoor sets {sets}; model covariates: {', '.join(info['model_covariates']) or 'none'}")
        out += ["", f"Reduced DAG nodes: {', '.join(ident['reduced_dag']['nodes'])}", ""]
    if results.get("fits"):
        out += ["## Bayesian models", ""]
        for response, fit in sorted(results["fits"].items()):
            diag = fit["diagnostics"]
            out += [f"### {response}", "",
                    f"Predictors: {', '.join(fit['predictors'])}. "
                    f"Max R-hat {_fmt(diag['max_rhat'], 3)}, min bulk ESS {_fmt(diag['min_ess_bulk'], 0)}, "
                    f"divergences {diag['divergences']}.", "",
                    "| Parameter | Mean | SD | 2.5% | 97.5% |", "|---|---|---|---|---|"]
            for name, s in fit["coefficients"].items():
                out.append(f"| {name} | {_fmt(s['mean'])} | {_fmt(s['sd'])} | {_fmt(s['ci_low'])} | {_fmt(s['ci_high'])} |")
            out.append("")
    if results.get("marginals"):
        out += ["## Marginal effects", "", "| Response | Predictor | Level | Mean | 95% CrI | Expected count |", "|---|---|---|---|---|---|"]
        for m in results["marginals"]:
            for i, lv in enumerate(m["levels"]):
                out.append(
                    f"| {m['response']} | {m['predictor']} | {lv:g} | {_fmt(m['mean'][i], 3)} "
                    f"| [{_fmt(m['ci_low'][i], 3)}, {_fmt(m['ci_high'][i], 3)}] | {_fmt(m['count_mean'][i])} |"
                )
        out.append("")
    if results.get("contrasts"):
        out += ["## Contrasts", "", "| Response | Predictor | Levels | Mean diff | 95% CrI | P(diff > 0) |", "|---|---|---|---|---|---|"]
        for c in results["contrasts"]:
            out.append(
                f"| {c['response']} | {c['predictor']} | {c['level_a']:g} vs {c['level_b']:g} | {_fmt(c['mean'], 3)} "
                f"| [{_fmt(c['ci_low'], 3)}, {_fmt(c['ci_high'], 3)}] | {_fmt(c['prob_positive'])} |"
            )
        out.append("")
    if results.get("ppc"):
        out += ["## Posterior predictive checks", "", "| Response | Statistic | Observed | Replicated mean | Fraction exceeding |", "|---|---|---|---|---|"]
        for response, checks in sorted(results["ppc"].items()):
            for stat, c in checks.items():
                out.append(f"| {response} | {stat} | {_fmt(c['observed'])} | {_fmt(c['replicated_mean'])} | {_fmt(c['fraction_exceeding'])} |")
        out.append("")
    if plots:
        out += ["## Plots", ""] + [f"![{Path(p).stem}]({p})" for p in plots] + [""]
    return "\n".join(out)


def render_report(results: dict, out_dir: str | Path) -> list[Path]:
    """Write report.md, results.json and one SVG per marginal plot into ``out_dir``.

    ``results`` may hold any of the keys ``reproduction``, ``identification``,
    ``fits``, ``marginals``, ``contrasts`` and ``ppc``; at least one is required.
    """
    keys = ("reproduction", "identification", "fits", "marginals", "contrasts", "ppc")
    if not any(results.get(k) for k in keys):
        raise ValueError("nothing to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    marginals = [MarginalEffect.from_json(m) for m in results.get("marginals", [])]
    plots: list[str] = []
    for eff in marginals:
        if eff.predictor == "passive":
            name = f"marginal_passive_{eff.response}.svg"
            plot_marginals([eff], out_dir / name, f"Passive voice: {eff.response}", "passive voice (0 = active, 1 = passive)")
            plots.append(name)
    mediators = [e for e in marginals if e.response == "associations" and e.predictor in ("missing_actors", "missing_objects")]
    if mediators:
        name = "marginal_mediators_associations.svg"
        plot_marginals(mediators, out_dir / name, "Missing actors/objects: associations", "number missing")
        plots.append(name)

    payload = {"schema_version": SCHEMA_VERSION, "reference_policy": REFERENCE_POLICY, **{k: results[k] for k in keys if results.get(k)}}
    dump_json(payload, out_dir / "results.json")
    (out_dir / "report.md").write_text(_markdown(payload, plots), encoding="utf-8")
    return [out_dir / "report.md", out_dir / "results.json", *(out_dir / p for p in plots)]
