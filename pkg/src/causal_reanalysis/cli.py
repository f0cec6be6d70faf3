"""Command-line pipeline.

Each subcommand reads its predecessors' artifacts from the run directory
(``--out``) and writes its own::

    reproduce   frequentist table              reproduction.{md,csv,json}
    identify    adjustment sets, reduced DAG   identification.json, reduced_dag.dot
    fit         one HMC fit per response       fits/<response>/{draws.csv,fit.json}
    marginal    marginal effects + contrasts   marginals/<response>_<predictor>.{json,svg}
    ppc         prior/posterior predictive     ppc/<response>.json
    report      everything above               report.md, results.json, *.svg

Exit codes: 0 ok, 2 input error, 3 pipeline-order error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__
from .bayes.hmc import SamplerError, SamplerSettings, hmc_sample
from .bayes.io import read_fit, write_fit
from .bayes.model import MEDIATORS, GlmmModel, ModelError, build_model
from .bayes.predictive import posterior_predictive, prior_predictive
from .causal import Dag, DagError, backdoor_adjustment_sets, build_paper_dag, load_dag, model_covariates, reduced_dag, to_dot
from .data import OUTCOMES, DataError, Dataset, convert_long_table, load_dataset, save_dataset
from .effects import MarginalEffect, coefficient_summary, contrast, default_levels, marginal_effect
from .frequentist import format_table, reproduce_table
from .jsonutil import dump_json
from .report import plot_marginals, render_report
from .simulate import simulate_dataset

EXIT_OK, EXIT_INPUT, EXIT_ORDER, EXIT_NUMERIC = 0, 2, 3, 4
SEED_ENV = "CAUSAL_REANALYSIS_SEED"


class PipelineOrderError(RuntimeError):
    """An upstream artifact is missing from the run directory."""


@dataclass
class RunConfig:
    command: str
    data: str | None = None
    dag: str | None = None
    seed: int | None = None
    chains: int = 4
    warmup: int = 1000
    samples: int = 1000
    response: str = "all"
    adjustment: str = "paper"
    out: str = "run"
    format: str = "md"
    strict_paper: bool = False
    mwu_method: str = "exact"
    predictor: str = "passive"
    levels: str | None = None
    cores: int = 1

    @property
    def responses(self) -> tuple[str, ...]:
        return OUTCOMES if self.response == "all" else (self.response,)

    @property
    def out_dir(self) -> Path:
        return Path(self.out)


# ------------------------------------------------------------------ helpers


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _input_digests(cfg: RunConfig) -> dict[str, str]:
    out = {}
    if cfg.data and Path(cfg.data).is_dir():
        for name in ("participants.csv", "requirements.csv", "observations.csv"):
            p = Path(cfg.data) / name
            if p.is_file():
                out[f"data/{name}"] = _sha256(p)
    if cfg.dag and Path(cfg.dag).is_file():
        out["dag"] = _sha256(Path(cfg.dag))
    return out


def _update_manifest(cfg: RunConfig) -> None:
    path = cfg.out_dir / "manifest.json"
    manifest = json.loads(path.read_text(encoding="utf-8")) if path.is_file() else {}
    manifest["tool"] = "causal-reanalysis"
    manifest["tool_version"] = __version__
    manifest.setdefault("stages", {})[cfg.command] = {"config": asdict(cfg), "inputs": _input_digests(cfg)}
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _dataset(cfg: RunConfig) -> Dataset:
    if not cfg.data:
        raise DataError("--data DIR is required for this command")
    return load_dataset(cfg.data, strict_paper=cfg.strict_paper)


def _dag(cfg: RunConfig) -> Dag:
    if not cfg.dag:
        return build_paper_dag()
    g = load_dag(cfg.dag)
    if g.exposure is None or not g.outcomes:
        raise DagError(f"{cfg.dag}: the JSON sidecar must name the exposure and outcomes")
    return g


def _seed(cfg: RunConfig, required: bool = True) -> int | None:
    if cfg.seed is not None:
        return cfg.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise DataError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    if required:
        raise DataError(f"a seed is required: pass --seed N or set {SEED_ENV}")
    return None


def _fit_dir(cfg: RunConfig, response: str) -> Path:
    return cfg.out_dir / "fits" / response


def _load_fit(cfg: RunConfig, response: str):
    d = _fit_dir(cfg, response)
    if not (d / "fit.json").is_file() or not (d / "draws.csv").is_file():
        raise PipelineOrderError(
            f"no fit for {response!r} in {cfg.out_dir}; run "
            f"`causal-reanalysis fit --data DIR --response {response} --out {cfg.out}` first"
        )
    return read_fit(d)


def _fitted_responses(cfg: RunConfig) -> list[str]:
    if cfg.response != "all":
        return [cfg.response]
    found = [r for r in OUTCOMES if (_fit_dir(cfg, r) / "fit.json").is_file()]
    if not found:
        raise PipelineOrderError(f"no fits in {cfg.out_dir}; run `causal-reanalysis fit` first")
    return found


def _emit(text: str) -> None:
    sys.stdout.write(text)


# ----------------------------------------------------------------- commands


def cmd_reproduce(cfg: RunConfig) -> int:
    d = _dataset(cfg)
    rows = reproduce_table(d, method=cfg.mwu_method)
    _emit(format_table(rows, cfg.format))
    if cfg.out:
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        for fmt in ("md", "csv"):
            (cfg.out_dir / f"reproduction.{fmt}").write_text(format_table(rows, fmt), encoding="utf-8")
        dump_json([r.as_dict() for r in rows], cfg.out_dir / "reproduction.json")
        _update_manifest(cfg)
    return EXIT_OK


def identification(g: Dag, mode: str) -> dict:
    outcomes = {}
    for o in g.outcomes:
        sets = backdoor_adjustment_sets(g, g.exposure, o)
        outcomes[o] = {
            "minimal_backdoor_sets": [list(s.variables) for s in sets],
            "model_covariates": list(model_covariates(g, o, mode).variables),
        }
    r = reduced_dag(g)
    return {
        "exposure": g.exposure,
        "mode": mode,
        "outcomes": outcomes,
        "reduced_dag": {"nodes": list(r.nodes), "edges": [list(e) for e in sorted(r.edges)]},
        "excluded": [n for n in g.nodes if n not in r.nodes],
    }


def cmd_identify(cfg: RunConfig) -> int:
    g = _dag(cfg)
    result = identification(g, cfg.adjustment)
    if cfg.format == "json":
        _emit(dump_json(result))
    else:
        lines = [f"exposure: {g.exposure}"]
        for o, info in result["outcomes"].items():
            sets = "; ".join("{" + ", ".join(s) + "}" for s in info["minimal_backdoor_sets"]) or "none"
            lines.append(f"{o}: minimal backdoor sets {sets}")
            lines.append(f"{o}: model covariates ({cfg.adjustment}) {{{', '.join(info['model_covariates'])}}}")
        lines.append("reduced DAG:")
        lines.append(to_dot(reduced_dag(g), "reduced").rstrip())
        _emit("\n".join(lines) + "\n")
    if cfg.out:
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        dump_json(result, cfg.out_dir / "identification.json")
        (cfg.out_dir / "reduced_dag.dot").write_text(to_dot(reduced_dag(g), "reduced"), encoding="utf-8")
        _update_manifest(cfg)
    return EXIT_OK


def _settings(cfg: RunConfig, seed: int) -> SamplerSettings:
    return SamplerSettings(chains=cfg.chains, warmup=cfg.warmup, samples=cfg.samples, seed=seed, cores=cfg.cores)


def cmd_fit(cfg: RunConfig) -> int:
    seed = _seed(cfg)
    d = _dataset(cfg)
    g = _dag(cfg)
    settings = _settings(cfg, seed)
    try:
        settings.validate()
    except ValueError as exc:
        raise DataError(str(exc)) from None
    digests = _input_digests(cfg)
    for response in cfg.responses:
        adj = model_covariates(g, f"missing_{response}", cfg.adjustment)
        spec = build_model(d, response, adj, include_mediators=cfg.adjustment == "paper", dag=g)
        model = GlmmModel.from_dataset(spec, d)
        draws, diag = hmc_sample(model, settings)
        write_fit(_fit_dir(cfg, response), spec, draws, diag,
                  data_dir=cfg.data, adjustment=cfg.adjustment, inputs=digests)
        print(
            f"{response}: predictors {', '.join(spec.predictor_names)}; max R-hat {diag.rhat.max():.3f}; "
            f"min bulk ESS {diag.ess_bulk.min():.0f}; divergences {diag.divergences}",
            file=sys.stderr,
        )
    _update_manifest(cfg)
    return EXIT_OK


def _parse_levels(text: str | None) -> list[float] | None:
    if not text:
        return None
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise DataError(f"--levels must be comma-separated numbers, got {text!r}") from None


def _marginals_for(cfg: RunConfig, response: str, predictor: str, levels=None) -> tuple[dict, dict] | None:
    spec, draws, _ = _load_fit(cfg, response)
    if predictor not in spec.predictor_names:
        if cfg.response == "all":
            return None
        raise ModelError(f"predictor {predictor!r} is not in the {response} model")
    eff = marginal_effect(draws, spec, predictor, levels)
    lv = eff.levels
    con = contrast(draws, spec, predictor, lv[-1], lv[0])
    return eff.to_json(), con.to_json()


def cmd_marginal(cfg: RunConfig) -> int:
    levels = _parse_levels(cfg.levels)
    out = cfg.out_dir / "marginals"
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for response in _fitted_responses(cfg):
        res = _marginals_for(cfg, response, cfg.predictor, levels)
        if res is None:
            continue
        eff, con = res
        stem = f"{response}_{cfg.predictor}"
        dump_json({"marginal": eff, "contrast": con}, out / f"{stem}.json")
        plot_marginals([MarginalEffect.from_json(eff)], out / f"{stem}.svg",
                       f"{cfg.predictor}: {response}", cfg.predictor)
        written.append({"marginal": eff, "contrast": con})
    if not written:
        raise ModelError(f"predictor {cfg.predictor!r} is in none of the fitted models")
    if cfg.format == "json":
        _emit(dump_json(written))
    else:
        for w in written:
            m, c = w["marginal"], w["contrast"]
            cells = ", ".join(
                f"{lv:g}: {mu:.3f} [{lo:.3f}, {hi:.3f}]"
                for lv, mu, lo, hi in zip(m["levels"], m["mean"], m["ci_low"], m["ci_high"])
            )
            _emit(f"{m['response']} / {m['predictor']}: {cells}; diff {c['mean']:.3f}, P(diff>0) {c['prob_positive']:.2f}\n")
    _update_manifest(cfg)
    return EXIT_OK


def _data_for_fit(cfg: RunConfig, manifest: dict) -> Dataset:
    path = cfg.data or manifest.get("data_dir")
    if not path:
        raise DataError("cannot locate the dataset; pass --data DIR")
    return load_dataset(path)


def cmd_ppc(cfg: RunConfig) -> int:
    out = cfg.out_dir / "ppc"
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for response in _fitted_responses(cfg):
        spec, draws, manifest = _load_fit(cfg, response)
        seed = _seed(cfg, required=False)
        seed = manifest["seed"] if seed is None else seed
        model = GlmmModel.from_dataset(spec, _data_for_fit(cfg, manifest))
        post = posterior_predictive(model, draws, seed=seed).checks()
        prior = prior_predictive(model, n_sims=1000, seed=seed).summary()
        dump_json({"posterior": post, "prior": prior}, out / f"{response}.json")
        summary[response] = post
    if cfg.format == "json":
        _emit(dump_json(summary))
    else:
        for response, checks in summary.items():
            cells = ", ".join(f"{k} {v['fraction_exceeding']:.2f}" for k, v in checks.items())
            _emit(f"{response}: fraction of replicates exceeding observed: {cells}\n")
    _update_manifest(cfg)
    return EXIT_OK


def cmd_report(cfg: RunConfig) -> int:
    results: dict = {}
    responses = _fitted_responses(cfg)
    fits, marginals, contrasts, ppc = {}, [], [], {}
    data_dir = None
    for response in responses:
        spec, draws, manifest = _load_fit(cfg, response)
        data_dir = data_dir or manifest.get("data_dir")
        fits[response] = {
            "predictors": list(spec.predictor_names),
            "adjustment": manifest.get("adjustment"),
            "settings": manifest["settings"],
            "diagnostics": {k: manifest["diagnostics"][k] for k in ("max_rhat", "min_ess_bulk", "divergences", "accept_rate")},
            "coefficients": coefficient_summary(draws),
        }
        wanted = ["passive"] + ([m for m in MEDIATORS if m in spec.predictor_names] if response == "associations" else [])
        for predictor in wanted:
            stored = cfg.out_dir / "marginals" / f"{response}_{predictor}.json"
            if stored.is_file():
                obj = json.loads(stored.read_text(encoding="utf-8"))
                eff, con = obj["marginal"], obj["contrast"]
            else:
                eff = marginal_effect(draws, spec, predictor, default_levels(spec, predictor)).to_json()
                con = contrast(draws, spec, predictor, eff["levels"][-1], eff["levels"][0]).to_json()
            marginals.append(eff)
            contrasts.append(con)
        ppc_path = cfg.out_dir / "ppc" / f"{response}.json"
        if ppc_path.is_file():
            ppc[response] = json.loads(ppc_path.read_text(encoding="utf-8"))["posterior"]
    data_path = cfg.data or data_dir
    if data_path and Path(data_path).is_dir():
        results["reproduction"] = [r.as_dict() for r in reproduce_table(load_dataset(data_path), method=cfg.mwu_method)]
    results["identification"] = identification(_dag(cfg), cfg.adjustment)
    results.update(fits=fits, marginals=marginals, contrasts=contrasts, ppc=ppc)
    paths = render_report(results, cfg.out_dir)
    for p in paths:
        print(p, file=sys.stderr)
    _update_manifest(cfg)
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, participants: int, requirements: int) -> int:
    seed = _seed(cfg)
    d = simulate_dataset(participants, requirements, seed=seed)
    save_dataset(d, cfg.out_dir)
    print(f"wrote {len(d.observations)} observations to {cfg.out_dir}", file=sys.stderr)
    return EXIT_OK


def cmd_convert(cfg: RunConfig, long_table: str) -> int:
    d = convert_long_table(long_table, cfg.out_dir, strict_paper=cfg.strict_paper)
    print(f"wrote {len(d.observations)} observations to {cfg.out_dir}", file=sys.stderr)
    return EXIT_OK


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", metavar="DIR", help="directory with participants/requirements/observations CSV files")
    common.add_argument("--dag", metavar="FILE", help="DOT file (with JSON sidecar) replacing the built-in DAG")
    common.add_argument("--seed", type=int, help=f"random seed (fallback: ${SEED_ENV})")
    common.add_argument("--chains", type=int, default=4)
    common.add_argument("--warmup", type=int, default=1000)
    common.add_argument("--samples", type=int, default=1000)
    common.add_argument("--response", choices=[*OUTCOMES, "all"], default="all")
    common.add_argument("--adjustment", choices=["total", "paper"], default="paper",
                        help="total: exclude mediators; paper: adjust the associations model for missing actors/objects")
    common.add_argument("--out", metavar="DIR", default="run", help="run directory for artifacts")
    common.add_argument("--format", choices=["csv", "json", "md"], default="md")
    common.add_argument("--strict-paper", action="store_true", help="enforce 7 requirements and groups of 7 (A) and 8 (P)")
    common.add_argument("--cores", type=int, default=1, help="processes for running chains")

    parser = argparse.ArgumentParser(prog="causal-reanalysis", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    rep = sub.add_parser("reproduce", parents=[common], help="frequentist reproduction table")
    rep.add_argument("--mwu-method", choices=["exact", "normal_approx"], default="exact")
    sub.add_parser("identify", parents=[common], help="adjustment sets and reduced DAG")
    sub.add_parser("fit", parents=[common], help="fit the Bayesian models with HMC")
    marg = sub.add_parser("marginal", parents=[common], help="marginal effects from fitted models")
    marg.add_argument("--predictor", default="passive")
    marg.add_argument("--levels", help="comma-separated raw levels, e.g. 0,1")
    sub.add_parser("ppc", parents=[common], help="prior and posterior predictive checks")
    r = sub.add_parser("report", parents=[common], help="assemble report.md, results.json and plots")
    r.add_argument("--mwu-method", choices=["exact", "normal_approx"], default="exact")
    sim = sub.add_parser("simulate", parents=[common], help="write a synthetic dataset to --out")
    sim.add_argument("--participants", type=int, default=15)
    sim.add_argument("--requirements", type=int, default=7)
    conv = sub.add_parser("convert", parents=[common], help="split a long table into the canonical files at --out")
    conv.add_argument("long_table", metavar="FILE")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    fields = set(RunConfig.__dataclass_fields__)
    cfg = RunConfig(**{k: v for k, v in vars(args).items() if k in fields})
    try:
        if cfg.command == "simulate":
            return cmd_simulate(cfg, args.participants, args.requirements)
        if cfg.command == "convert":
            return cmd_convert(cfg, args.long_table)
        handler = {
            "reproduce": cmd_reproduce,
            "identify": cmd_identify,
            "fit": cmd_fit,
            "marginal": cmd_marginal,
            "ppc": cmd_ppc,
            "report": cmd_report,
        }[cfg.command]
        return handler(cfg)
    except (DataError, DagError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PipelineOrderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ORDER
    except SamplerError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
