from __future__ import annotations

import itertools

import numpy as np
import pytest

from causal_reanalysis.causal import make_dag
from causal_reanalysis.data import (
    ExperienceLevel,
    Group,
    Observation,
    Participant,
    Program,
    Requirement,
    build_dataset,
)


def participant(pid: str, group: str = "A", level: int = 1, **levels) -> Participant:
    exp = {
        name: ExperienceLevel(levels.get(name, level))
        for name in ("exp_se_ind", "exp_se_acad", "exp_re_ind", "exp_re_acad", "exp_prog_ind", "exp_prog_acad")
    }
    return Participant(pid, Group(group), levels.get("age_group", 1), Program(levels.get("program", 0)), **exp)


def requirement(rid: str, actors: int = 1, objects: int = 3, associations: int = 4) -> Requirement:
    return Requirement(rid, actors, objects, associations)


def tiny_dataset(counts: dict[tuple[str, str], tuple[int, int, int]] | None = None, n_p: int = 4, n_r: int = 3):
    """``n_p`` participants (first half A), ``n_r`` requirements, full crossing."""
    ps = [participant(str(i + 1), "A" if i < n_p // 2 else "P", level=i % 4) for i in range(n_p)]
    rs = [requirement(f"R{j + 1}") for j in range(n_r)]
    counts = counts or {}
    obs = [
        Observation(p.id, r.id, *counts.get((p.id, r.id), (0, 0, 0)))
        for p, r in itertools.product(ps, rs)
    ]
    return build_dataset(ps, rs, obs)


def random_dag(rng: np.random.Generator, n_nodes: int, p_edge: float = 0.35):
    """Random DAG over v0..v{n-1}, edges only from lower to higher index in a shuffled order."""
    names = [f"v{i}" for i in range(n_nodes)]
    order = list(rng.permutation(names))
    edges = [
        (order[i], order[j])
        for i in range(n_nodes)
        for j in range(i + 1, n_nodes)
        if rng.random() < p_edge
    ]
    return make_dag(edges, nodes=names)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
