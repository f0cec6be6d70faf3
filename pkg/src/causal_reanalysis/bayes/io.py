"""Draw export: one CSV row per draw plus a JSON manifest."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .diagnostics import Diagnostics
from .hmc import PosteriorDraws, SamplerSettings
from .model import ModelSpec


def write_draws_csv(draws: PosteriorDraws, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["chain", "iter", *draws.names])
        for c in range(draws.n_chains):
            for i in range(draws.n_draws):
                w.writerow([c, i, *(repr(float(v)) for v in draws.values[c, i])])


def read_draws_csv(path: str | Path, settings: SamplerSettings | None = None) -> PosteriorDraws:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [(int(r[0]), int(r[1]), [float(v) for v in r[2:]]) for r in reader]
    names = header[2:]
    n_chains = max(r[0] for r in rows) + 1
    n_draws = max(r[1] for r in rows) + 1
    values = np.empty((n_chains, n_draws, len(names)))
    for c, i, v in rows:
        values[c, i] = v
    return PosteriorDraws(names, values, settings or SamplerSettings(chains=n_chains))


def fit_manifest(spec: ModelSpec, draws: PosteriorDraws, diagnostics: Diagnostics, **extra) -> dict:
    return {
        "spec": spec.to_json(),
        "settings": asdict(draws.settings),
        "seed": draws.settings.seed,
        "parameters": draws.names,
        "step_sizes": [float(s) for s in draws.step_sizes],
        "diagnostics": diagnostics.to_json(),
        **extra,
    }


def write_fit(directory: str | Path, spec: ModelSpec, draws: PosteriorDraws, diagnostics: Diagnostics, **extra) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_draws_csv(draws, directory / "draws.csv")
    manifest = fit_manifest(spec, draws, diagnostics, **extra)
    (directory / "fit.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_fit(directory: str | Path) -> tuple[ModelSpec, PosteriorDraws, dict]:
    directory = Path(directory)
    manifest = json.loads((directory / "fit.json").read_text(encoding="utf-8"))
    settings = SamplerSettings(**manifest["settings"])
    draws = read_draws_csv(directory / "draws.csv", settings)
    draws.step_sizes = manifest.get("step_sizes", [])
    return ModelSpec.from_json(manifest["spec"]), draws, manifest
