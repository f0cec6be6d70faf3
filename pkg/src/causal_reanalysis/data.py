"""Experiment dataset: schema, loading, validation and per-participant aggregation.

A dataset lives in a directory holding three CSV files::

    participants.csv   participant_id,group,age_group,program,exp_se_ind,...
    requirements.csv   requirement_id,expected_actors,expected_objects,expected_associations
    observations.csv   participant_id,requirement_id,missing_actors,...

Expected counts per requirement are the binomial denominators of the
Bayesian models, so they are mandatory columns.
"""

from __future__ import annotations

import csv
import enum
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

OUTCOMES = ("actors", "objects", "associations")

PARTICIPANT_COLUMNS = (
    "participant_id",
    "group",
    "age_group",
    "program",
    "exp_se_ind",
    "exp_se_acad",
    "exp_re_ind",
    "exp_re_acad",
    "exp_prog_ind",
    "exp_prog_acad",
)
EXPERIENCE_COLUMNS = PARTICIPANT_COLUMNS[4:]
REQUIREMENT_COLUMNS = (
    "requirement_id",
    "expected_actors",
    "expected_objects",
    "expected_associations",
)
OBSERVATION_COLUMNS = (
    "participant_id",
    "requirement_id",
    "missing_actors",
    "missing_objects",
    "missing_associations",
)

PAPER_N_REQUIREMENTS = 7
PAPER_GROUP_SIZES = {"A": 7, "P": 8}


class DataError(ValueError):
    """Raised for schema, integrity or strict-mode violations in input data."""


class Group(str, enum.Enum):
    ACTIVE = "A"
    PASSIVE = "P"


class ExperienceLevel(enum.IntEnum):
    NONE = 0
    UP_TO_6_MONTHS = 1
    MONTHS_6_TO_12 = 2
    MORE_THAN_12_MONTHS = 3


class Program(enum.IntEnum):
    """Study program. ``UNKNOWN`` is its own category and is never imputed."""

    BACHELOR = 0
    MASTER = 1
    PHD = 2
    UNKNOWN = 3


_PROGRAM_TOKENS = {
    "bachelor": Program.BACHELOR,
    "master": Program.MASTER,
    "phd": Program.PHD,
    "unknown": Program.UNKNOWN,
}


@dataclass(frozen=True)
class Participant:
    id: str
    group: Group
    age_group: int
    program: Program
    exp_se_ind: ExperienceLevel
    exp_se_acad: ExperienceLevel
    exp_re_ind: ExperienceLevel
    exp_re_acad: ExperienceLevel
    exp_prog_ind: ExperienceLevel
    exp_prog_acad: ExperienceLevel

    @property
    def passive(self) -> int:
        return int(self.group is Group.PASSIVE)

    def covariate(self, name: str) -> int:
        if name in ("passive", "passive_voice"):
            return self.passive
        value = getattr(self, name)
        return int(value)


@dataclass(frozen=True)
class Requirement:
    id: str
    expected_actors: int
    expected_objects: int
    expected_associations: int

    def expected(self, outcome: str) -> int:
        return getattr(self, f"expected_{outcome}")


@dataclass(frozen=True)
class Observation:
    participant_id: str
    requirement_id: str
    missing_actors: int
    missing_objects: int
    missing_associations: int

    def missing(self, outcome: str) -> int:
        return getattr(self, f"missing_{outcome}")


@dataclass(frozen=True)
class Dataset:
    participants: tuple[Participant, ...]
    requirements: tuple[Requirement, ...]
    observations: tuple[Observation, ...]

    def participant(self, pid: str) -> Participant:
        return self._participant_index()[pid]

    def requirement(self, rid: str) -> Requirement:
        return {r.id: r for r in self.requirements}[rid]

    def _participant_index(self) -> dict[str, Participant]:
        return {p.id: p for p in self.participants}

    @property
    def participant_ids(self) -> tuple[str, ...]:
        return tuple(p.id for p in self.participants)

    @property
    def requirement_ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.requirements)


# --------------------------------------------------------------------------- parsing


def _parse_int(value: str, column: str, where: str, lo: int = 0, hi: int | None = None) -> int:
    try:
        out = int(value.strip())
    except ValueError:
        raise DataError(f"{where}: column {column!r} must be an integer, got {value!r}") from None
    if out < lo or (hi is not None and out > hi):
        bound = f"[{lo}, {hi}]" if hi is not None else f">= {lo}"
        raise DataError(f"{where}: column {column!r} value {out} outside {bound}")
    return out


def _parse_program(value: str, where: str) -> Program:
    token = value.strip().lower()
    if token in _PROGRAM_TOKENS:
        return _PROGRAM_TOKENS[token]
    if token in ("", "na", "nan"):
        return Program.UNKNOWN
    return Program(_parse_int(token, "program", where, 0, 3))


def _read_csv(path: Path, columns: Sequence[str]) -> list[dict[str, str]]:
    if not path.is_file():
        raise DataError(f"missing input file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = tuple(reader.fieldnames or ())
        missing = [c for c in columns if c not in header]
        extra = [c for c in header if c not in columns]
        if missing:
            raise DataError(f"{path.name}: missing column(s) {', '.join(missing)}")
        if extra:
            raise DataError(f"{path.name}: unexpected column(s) {', '.join(extra)}")
        return list(reader)


def _participant_from_row(row: dict[str, str], where: str) -> Participant:
    group = row["group"].strip().upper()
    if group not in ("A", "P"):
        raise DataError(f"{where}: group must be 'A' or 'P', got {row['group']!r}")
    exp = {c: ExperienceLevel(_parse_int(row[c], c, where, 0, 3)) for c in EXPERIENCE_COLUMNS}
    return Participant(
        id=row["participant_id"].strip(),
        group=Group(group),
        age_group=_parse_int(row["age_group"], "age_group", where),
        program=_parse_program(row["program"], where),
        **exp,
    )


def _requirement_from_row(row: dict[str, str], where: str) -> Requirement:
    return Requirement(
        id=row["requirement_id"].strip(),
        **{c: _parse_int(row[c], c, where) for c in REQUIREMENT_COLUMNS[1:]},
    )


def _observation_from_row(row: dict[str, str], where: str) -> Observation:
    return Observation(
        participant_id=row["participant_id"].strip(),
        requirement_id=row["requirement_id"].strip(),
        **{c: _parse_int(row[c], c, where) for c in OBSERVATION_COLUMNS[2:]},
    )


def _sort_key(ident: str) -> tuple:
    # numeric ids sort numerically, everything else lexicographically after them
    return (0, int(ident), "") if ident.isdigit() else (1, 0, ident)


def build_dataset(
    participants: Iterable[Participant],
    requirements: Iterable[Requirement],
    observations: Iterable[Observation],
    strict_paper: bool = False,
) -> Dataset:
    """Validate records and return a Dataset in normalized order."""
    participants = sorted(participants, key=lambda p: _sort_key(p.id))
    requirements = sorted(requirements, key=lambda r: _sort_key(r.id))
    observations = sorted(
        observations, key=lambda o: (_sort_key(o.participant_id), _sort_key(o.requirement_id))
    )
    if not observations:
        raise DataError("no observations")
    if not participants:
        raise DataError("no participants")
    if not requirements:
        raise DataError("no requirements")

    pids = [p.id for p in participants]
    rids = [r.id for r in requirements]
    if len(set(pids)) != len(pids):
        raise DataError("duplicate participant_id in participants")
    if len(set(rids)) != len(rids):
        raise DataError("duplicate requirement_id in requirements")
    req_index = {r.id: r for r in requirements}
    pid_set = set(pids)

    seen: set[tuple[str, str]] = set()
    for obs in observations:
        cell = (obs.participant_id, obs.requirement_id)
        if obs.participant_id not in pid_set:
            raise DataError(f"observation references unknown participant {obs.participant_id!r}")
        if obs.requirement_id not in req_index:
            raise DataError(f"observation references unknown requirement {obs.requirement_id!r}")
        if cell in seen:
            raise DataError(f"duplicate observation for cell {cell}")
        seen.add(cell)
        req = req_index[obs.requirement_id]
        for outcome in OUTCOMES:
            if obs.missing(outcome) > req.expected(outcome):
                raise DataError(
                    f"cell {cell}: missing_{outcome}={obs.missing(outcome)} exceeds "
                    f"expected_{outcome}={req.expected(outcome)}"
                )
    n_expected = len(pids) * len(rids)
    if len(seen) != n_expected:
        absent = [(p, r) for p in pids for r in rids if (p, r) not in seen]
        raise DataError(f"{len(absent)} participant x requirement cell(s) lack an observation, e.g. {absent[0]}")

    if strict_paper:
        if len(rids) != PAPER_N_REQUIREMENTS:
            raise DataError(f"strict-paper: expected {PAPER_N_REQUIREMENTS} requirements, got {len(rids)}")
        sizes = {g: sum(p.group.value == g for p in participants) for g in PAPER_GROUP_SIZES}
        if sizes != PAPER_GROUP_SIZES:
            raise DataError(f"strict-paper: expected group sizes A=7, P=8, got A={sizes['A']}, P={sizes['P']}")

    return Dataset(tuple(participants), tuple(requirements), tuple(observations))


def load_dataset(path: str | Path, strict_paper: bool = False) -> Dataset:
    """Load and validate the three canonical CSV files found in directory ``path``."""
    root = Path(path)
    if not root.is_dir():
        raise DataError(f"data directory not found: {root}")
    p_rows = _read_csv(root / "participants.csv", PARTICIPANT_COLUMNS)
    r_rows = _read_csv(root / "requirements.csv", REQUIREMENT_COLUMNS)
    o_rows = _read_csv(root / "observations.csv", OBSERVATION_COLUMNS)
    participants = [_participant_from_row(r, f"participants.csv line {i + 2}") for i, r in enumerate(p_rows)]
    requirements = [_requirement_from_row(r, f"requirements.csv line {i + 2}") for i, r in enumerate(r_rows)]
    observations = [_observation_from_row(r, f"observations.csv line {i + 2}") for i, r in enumerate(o_rows)]
    return build_dataset(participants, requirements, observations, strict_paper=strict_paper)


def save_dataset(d: Dataset, path: str | Path) -> None:
    """Write ``d`` in canonical form (UTF-8, LF line endings)."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)

    def write(name: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
        with (root / name).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)

    write(
        "participants.csv",
        PARTICIPANT_COLUMNS,
        (
            [p.id, p.group.value, p.age_group, p.program.name.lower()]
            + [int(getattr(p, c)) for c in EXPERIENCE_COLUMNS]
            for p in d.participants
        ),
    )
    write(
        "requirements.csv",
        REQUIREMENT_COLUMNS,
        ([r.id, r.expected_actors, r.expected_objects, r.expected_associations] for r in d.requirements),
    )
    write(
        "observations.csv",
        OBSERVATION_COLUMNS,
        (
            [o.participant_id, o.requirement_id, o.missing_actors, o.missing_objects, o.missing_associations]
            for o in d.observations
        ),
    )


# ----------------------------------------------------------------------- aggregation


@dataclass(frozen=True)
class ParticipantTotals:
    participant_id: str
    group: Group
    total_missing_actors: int
    total_missing_objects: int
    total_missing_associations: int

    def total(self, outcome: str) -> int:
        return getattr(self, f"total_missing_{outcome}")


def aggregate_per_participant(d: Dataset) -> list[ParticipantTotals]:
    """Sum each participant's missing-element counts over all requirements."""
    sums = {p.id: [0, 0, 0] for p in d.participants}
    for obs in d.observations:
        acc = sums[obs.participant_id]
        for i, outcome in enumerate(OUTCOMES):
            acc[i] += obs.missing(outcome)
    return [ParticipantTotals(p.id, p.group, *sums[p.id]) for p in d.participants]


@dataclass(frozen=True)
class GroupStats:
    mean: float
    median: float
    values: tuple[int, ...]


def group_summary(agg: Sequence[ParticipantTotals]) -> dict[str, dict[str, GroupStats]]:
    """Per-outcome, per-group mean and median of participant totals.

    Returns ``{outcome: {"A": GroupStats, "P": GroupStats}}``.
    """
    if not agg:
        raise DataError("aggregated table is empty")
    out: dict[str, dict[str, GroupStats]] = {}
    for outcome in OUTCOMES:
        out[outcome] = {}
        for g in Group:
            values = tuple(row.total(outcome) for row in agg if row.group is g)
            if not values:
                raise DataError(f"group {g.value} absent from aggregated table")
            out[outcome][g.value] = GroupStats(statistics.fmean(values), statistics.median(values), values)
    return out


def group_totals(d: Dataset, outcome: str) -> tuple[list[int], list[int]]:
    """Participant totals for ``outcome`` split into (active, passive) samples."""
    agg = aggregate_per_participant(d)
    active = [row.total(outcome) for row in agg if row.group is Group.ACTIVE]
    passive = [row.total(outcome) for row in agg if row.group is Group.PASSIVE]
    return active, passive


def convert_long_table(path: str | Path, out_dir: str | Path, strict_paper: bool = False) -> Dataset:
    """Split a single long table into the three canonical files.

    The long table has one row per participant x requirement cell carrying
    every participant, requirement and observation column (the layout of a
    typical spreadsheet export). Participant and requirement attributes must be
    consistent across the rows that repeat them.
    """
    columns = tuple(dict.fromkeys(PARTICIPANT_COLUMNS + REQUIREMENT_COLUMNS + OBSERVATION_COLUMNS))
    rows = _read_csv(Path(path), columns)
    participants: dict[str, Participant] = {}
    requirements: dict[str, Requirement] = {}
    observations = []
    for i, row in enumerate(rows):
        where = f"{Path(path).name} line {i + 2}"
        p = _participant_from_row(row, where)
        r = _requirement_from_row(row, where)
        if participants.setdefault(p.id, p) != p:
            raise DataError(f"{where}: participant {p.id!r} attributes differ from an earlier row")
        if requirements.setdefault(r.id, r) != r:
            raise DataError(f"{where}: requirement {r.id!r} expected counts differ from an earlier row")
        observations.append(_observation_from_row(row, where))
    d = build_dataset(participants.values(), requirements.values(), observations, strict_paper=strict_paper)
    save_dataset(d, out_dir)
    return d
