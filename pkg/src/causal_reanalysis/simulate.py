"""Synthetic datasets drawn from the hierarchical binomial model.

Used for parameter-recovery checks, self-consistency predictive checks and
for exercising the pipeline without the original experiment data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .data import (
    Dataset,
    ExperienceLevel,
    Group,
    Observation,
    Participant,
    Program,
    Requirement,
    build_dataset,
)


@dataclass(frozen=True)
class Truth:
    alpha: dict = field(default_factory=lambda: {"actors": -2.0, "objects": -1.5, "associations": -1.0})
    beta_passive: float = 0.5
    beta_experience: float = -0.2  # per standardized unit of each RE experience variable
    beta_mediator: float = 0.4  # per missing actor / object, associations only
    sigma_participant: float = 0.5
    sigma_requirement: float = 0.3


def simulate_dataset(
    n_participants: int = 15,
    n_requirements: int = 7,
    seed: int = 0,
    truth: Truth = Truth(),
    expected_actors: tuple[int, int] = (1, 1),
    expected_objects: tuple[int, int] = (2, 4),
    expected_associations: tuple[int, int] = (3, 6),
) -> Dataset:
    """Draw a complete dataset; the first ``n_participants // 2`` are group A.

    Expected counts per requirement are drawn uniformly from the given
    inclusive ranges. Participant and requirement offsets are shared by all
    three outcomes.
    """
    rng = np.random.default_rng(seed)
    n_active = n_participants // 2
    participants = []
    for j in range(n_participants):
        age = int(rng.integers(0, 3))
        program = Program(min(2, max(0, age + int(rng.integers(-1, 2)))))
        exp = {
            c: ExperienceLevel(int(rng.integers(0, 4)))
            for c in ("exp_se_ind", "exp_se_acad", "exp_re_ind", "exp_re_acad", "exp_prog_ind", "exp_prog_acad")
        }
        participants.append(
            Participant(f"{j + 1}", Group.ACTIVE if j < n_active else Group.PASSIVE, age, program, **exp)
        )
    requirements = [
        Requirement(
            f"R{r + 1}",
            int(rng.integers(expected_actors[0], expected_actors[1] + 1)),
            int(rng.integers(expected_objects[0], expected_objects[1] + 1)),
            int(rng.integers(expected_associations[0], expected_associations[1] + 1)),
        )
        for r in range(n_requirements)
    ]

    z_p = rng.standard_normal(n_participants) * truth.sigma_participant
    z_r = rng.standard_normal(n_requirements) * truth.sigma_requirement
    re_ind = np.array([p.exp_re_ind for p in participants], dtype=float)
    re_acad = np.array([p.exp_re_acad for p in participants], dtype=float)

    def std(v):
        return (v - v.mean()) / (v.std() or 1.0)

    exp_effect = truth.beta_experience * (std(re_ind) + std(re_acad))
    passive = np.array([p.passive for p in participants], dtype=float)

    observations = []
    for j, p in enumerate(participants):
        for r, req in enumerate(requirements):
            base = z_p[j] + z_r[r] + truth.beta_passive * passive[j] + exp_effect[j]
            ma = rng.binomial(req.expected_actors, expit(truth.alpha["actors"] + base))
            mo = rng.binomial(req.expected_objects, expit(truth.alpha["objects"] + base))
            eta_as = truth.alpha["associations"] + base + truth.beta_mediator * (ma + mo)
            mas = rng.binomial(req.expected_associations, expit(eta_as))
            observations.append(Observation(p.id, req.id, int(ma), int(mo), int(mas)))
    return build_dataset(participants, requirements, observations)
