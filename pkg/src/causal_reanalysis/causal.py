"""Causal DAGs, d-separation and backdoor adjustment sets.

Graphs are small (a dozen variables), so adjustment sets are found by exact
search over the subset lattice rather than by the polynomial-time
constructions used for large graphs.
"""

from __future__ import annotations

import itertools
import json
import re
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Literal

CHAIN, FORK, COLLIDER = "chain", "fork", "collider"

AdjustmentMode = Literal["total", "paper"]


class DagError(ValueError):
    """Invalid graph: cycle, self-edge, unknown node, or malformed file."""


@dataclass(frozen=True)
class Dag:
    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]
    exposure: str | None = None
    outcomes: tuple[str, ...] = ()
    rationale: dict[tuple[str, str], str] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self) -> None:
        node_set = set(self.nodes)
        if len(node_set) != len(self.nodes):
            raise DagError("duplicate node labels")
        for a, b in self.edges:
            if a == b:
                raise DagError(f"self-edge on {a!r}")
            if a not in node_set or b not in node_set:
                raise DagError(f"edge {a}->{b} references an unknown node")
        for v in ([self.exposure] if self.exposure else []) + list(self.outcomes):
            if v not in node_set:
                raise DagError(f"designated node {v!r} is not in the graph")
        cycle = _find_cycle(self)
        if cycle:
            raise DagError("graph has a directed cycle: " + " -> ".join(cycle))

    def parents(self, v: str) -> set[str]:
        return {a for a, b in self.edges if b == v}

    def children(self, v: str) -> set[str]:
        return {b for a, b in self.edges if a == v}

    def check_node(self, v: str) -> None:
        if v not in self.nodes:
            raise DagError(f"unknown node {v!r}")

    def without_outgoing(self, v: str) -> "Dag":
        return Dag(self.nodes, frozenset(e for e in self.edges if e[0] != v))

    def without_edge(self, a: str, b: str) -> "Dag":
        return Dag(self.nodes, self.edges - {(a, b)})

    def subgraph(self, keep: Iterable[str]) -> "Dag":
        keep = set(keep)
        return Dag(
            tuple(n for n in self.nodes if n in keep),
            frozenset((a, b) for a, b in self.edges if a in keep and b in keep),
            self.exposure if self.exposure in keep else None,
            tuple(o for o in self.outcomes if o in keep),
            {e: r for e, r in self.rationale.items() if e[0] in keep and e[1] in keep},
        )


def make_dag(
    edges: Iterable[tuple[str, str]],
    nodes: Iterable[str] = (),
    exposure: str | None = None,
    outcomes: Iterable[str] = (),
) -> Dag:
    """Convenience constructor; node order is first appearance."""
    edges = list(edges)
    if len(set(edges)) != len(edges):
        raise DagError("duplicate edges")
    order: dict[str, None] = dict.fromkeys(nodes)
    for a, b in edges:
        order.setdefault(a)
        order.setdefault(b)
    return Dag(tuple(order), frozenset(edges), exposure, tuple(outcomes))


def _find_cycle(g: Dag) -> list[str]:
    children: dict[str, list[str]] = {n: [] for n in g.nodes}
    for a, b in g.edges:
        children[a].append(b)
    state = dict.fromkeys(g.nodes, 0)  # 0 new, 1 on stack, 2 done
    stack_path: list[str] = []

    def visit(v: str) -> list[str]:
        state[v] = 1
        stack_path.append(v)
        for c in sorted(children[v]):
            if state[c] == 1:
                return stack_path[stack_path.index(c):] + [c]
            if state[c] == 0:
                found = visit(c)
                if found:
                    return found
        stack_path.pop()
        state[v] = 2
        return []

    for n in g.nodes:
        if state[n] == 0:
            found = visit(n)
            if found:
                return found
    return []


# ------------------------------------------------------------------------ DOT I/O

_EDGE_RE = re.compile(r"^\s*(.+?)\s*(\[(.*)\])?\s*$", re.S)
_ATTR_RE = re.compile(r'(\w+)\s*=\s*("((?:[^"\\]|\\.)*)"|[^,\s\]]+)')


def _strip_comments(text: str) -> str:
    text = re.sub(r"/\*.*?\*/", "", text, flags=re.S)
    return "\n".join(re.sub(r"(^|\s)(//|#).*$", "", line) for line in text.splitlines())


def _statements(body: str) -> Iterator[str]:
    buf, in_quote = [], False
    for ch in body:
        if ch == '"':
            in_quote = not in_quote
        if ch in ";\n" and not in_quote:
            stmt = "".join(buf).strip()
            if stmt:
                yield stmt
            buf = []
        else:
            buf.append(ch)
    stmt = "".join(buf).strip()
    if stmt:
        yield stmt


def parse_dot(text: str) -> Dag:
    """Parse the subset of DOT used for causal graphs (node and edge statements)."""
    text = _strip_comments(text)
    m = re.search(r"digraph\s*[\w\"]*\s*\{(.*)\}", text, re.S)
    if not m:
        raise DagError("not a DOT digraph")
    nodes: dict[str, None] = {}
    edges: list[tuple[str, str]] = []
    rationale: dict[tuple[str, str], str] = {}
    for stmt in _statements(m.group(1)):
        if "=" in stmt and "[" not in stmt:
            continue  # graph attribute, e.g. rankdir=LR
        sm = _EDGE_RE.match(stmt)
        chain_txt, attrs_txt = sm.group(1), sm.group(3) or ""
        if chain_txt.split()[0] in ("node", "edge", "graph"):
            continue
        attrs = {k: (q if q is not None else v) for k, v, q in _ATTR_RE.findall(attrs_txt)}
        parts = [p.strip().strip('"') for p in chain_txt.split("->")]
        if any(not p for p in parts):
            raise DagError(f"malformed statement: {stmt!r}")
        for p in parts:
            nodes.setdefault(p)
        for a, b in zip(parts, parts[1:]):
            if (a, b) in rationale or (a, b) in edges:
                raise DagError(f"duplicate edge {a}->{b}")
            edges.append((a, b))
            if "rationale" in attrs:
                rationale[(a, b)] = attrs["rationale"]
    return Dag(tuple(nodes), frozenset(edges), rationale=rationale)


def to_dot(g: Dag, name: str = "dag") -> str:
    lines = [f"digraph {name} {{"]
    for n in g.nodes:
        lines.append(f"  {n};")
    for a, b in sorted(g.edges):
        note = g.rationale.get((a, b))
        attr = ' [rationale="{}"]'.format(note.replace('"', '\\"')) if note else ""
        lines.append(f"  {a} -> {b}{attr};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def load_dag(dot_path: str | Path, sidecar_path: str | Path | None = None) -> Dag:
    """Load a DAG from a DOT file plus JSON sidecar naming exposure and outcomes.

    The sidecar defaults to the DOT path with a ``.json`` suffix.
    """
    dot_path = Path(dot_path)
    sidecar = Path(sidecar_path) if sidecar_path else dot_path.with_suffix(".json")
    if not dot_path.is_file():
        raise DagError(f"DAG file not found: {dot_path}")
    g = parse_dot(dot_path.read_text(encoding="utf-8"))
    meta = json.loads(sidecar.read_text(encoding="utf-8")) if sidecar.is_file() else {}
    return Dag(g.nodes, g.edges, meta.get("exposure"), tuple(meta.get("outcomes", ())), g.rationale)


def build_paper_dag() -> Dag:
    """The DAG of the passive-voice experiment shipped with the package."""
    base = resources.files("causal_reanalysis") / "fixtures"
    g = parse_dot((base / "paper_dag.dot").read_text(encoding="utf-8"))
    meta = json.loads((base / "paper_dag.json").read_text(encoding="utf-8"))
    return Dag(g.nodes, g.edges, meta["exposure"], tuple(meta["outcomes"]), g.rationale)


# ---------------------------------------------------------------- graph queries


def descendants(g: Dag, v: str) -> set[str]:
    """Nodes reachable from ``v`` along directed edges, excluding ``v``."""
    g.check_node(v)
    return _reach(g, v, g.children)


def ancestors(g: Dag, v: str) -> set[str]:
    g.check_node(v)
    return _reach(g, v, g.parents)


def _reach(g: Dag, v: str, step) -> set[str]:
    seen: set[str] = set()
    todo = deque(step(v))
    while todo:
        n = todo.popleft()
        if n not in seen:
            seen.add(n)
            todo.extend(step(n))
    return seen


def d_separated(g: Dag, x: str, y: str, z: Iterable[str] = ()) -> bool:
    """True iff every path between ``x`` and ``y`` is blocked given ``z``.

    Uses the reachable-trail traversal (each node visited at most once per
    direction of arrival), so it never enumerates paths.
    """
    z = set(z)
    for v in (x, y, *z):
        g.check_node(v)
    if x == y:
        raise DagError("x and y must differ")
    if x in z or y in z:
        raise DagError("x and y must not be in the conditioning set")

    parents = {n: set() for n in g.nodes}
    children = {n: set() for n in g.nodes}
    for a, b in g.edges:
        parents[b].add(a)
        children[a].add(b)

    # nodes with a descendant (or self) in z: colliders there are open
    opens = set(z)
    todo = deque(z)
    while todo:
        for p in parents[todo.popleft()]:
            if p not in opens:
                opens.add(p)
                todo.append(p)

    visited: set[tuple[str, str]] = set()
    todo = deque([(x, "up")])
    while todo:
        node, direction = todo.popleft()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node == y:
            return False
        if direction == "up" and node not in z:
            todo.extend((p, "up") for p in parents[node])
            todo.extend((c, "down") for c in children[node])
        elif direction == "down":
            if node not in z:
                todo.extend((c, "down") for c in children[node])
            if node in opens:
                todo.extend((p, "up") for p in parents[node])
    return True


# ------------------------------------------------------- explicit path analysis


@dataclass(frozen=True)
class PathClassification:
    path: tuple[str, ...]
    roles: tuple[str, ...]  # one per interior node
    blocked_by: frozenset[str]
    blocked: bool


def undirected_paths(g: Dag, x: str, y: str) -> Iterator[tuple[str, ...]]:
    """All simple paths between ``x`` and ``y`` ignoring edge direction."""
    g.check_node(x)
    g.check_node(y)
    nbrs = {n: set() for n in g.nodes}
    for a, b in g.edges:
        nbrs[a].add(b)
        nbrs[b].add(a)

    def extend(path: list[str]) -> Iterator[tuple[str, ...]]:
        last = path[-1]
        if last == y:
            yield tuple(path)
            return
        for n in sorted(nbrs[last]):
            if n not in path:
                yield from extend(path + [n])

    yield from extend([x])


def classify_path(g: Dag, path: tuple[str, ...], z: Iterable[str] = ()) -> PathClassification:
    z = set(z)
    roles, blockers, blocked = [], set(), False
    for prev, node, nxt in zip(path, path[1:], path[2:]):
        into_from_prev = (prev, node) in g.edges
        into_from_next = (nxt, node) in g.edges
        if into_from_prev and into_from_next:
            roles.append(COLLIDER)
            if node not in z and not (descendants(g, node) & z):
                blocked = True
        else:
            roles.append(FORK if not into_from_prev and not into_from_next else CHAIN)
            if node in z:
                blocked = True
                blockers.add(node)
    return PathClassification(tuple(path), tuple(roles), frozenset(blockers), blocked)


def d_separated_by_paths(g: Dag, x: str, y: str, z: Iterable[str] = ()) -> bool:
    """Reference d-separation by enumerating every path; exponential, for checks."""
    z = set(z)
    return all(classify_path(g, p, z).blocked for p in undirected_paths(g, x, y))


# ----------------------------------------------------------- adjustment sets


@dataclass(frozen=True, order=True)
class AdjustmentSet:
    variables: tuple[str, ...]
    minimal: bool = True

    def __iter__(self):
        return iter(self.variables)

    def __len__(self) -> int:
        return len(self.variables)


def is_backdoor_set(g: Dag, x: str, y: str, z: Iterable[str]) -> bool:
    """Backdoor criterion: no descendant of ``x`` in ``z`` and ``z`` blocks every
    path into ``x`` (checked as d-separation with ``x``'s outgoing edges cut)."""
    z = set(z)
    if z & descendants(g, x) or x in z or y in z:
        return False
    return d_separated(g.without_outgoing(x), x, y, z)


def backdoor_adjustment_sets(g: Dag, x: str, y: str) -> list[AdjustmentSet]:
    """All minimal backdoor adjustment sets for the effect of ``x`` on ``y``.

    Sorted by size, then lexicographically. Returns ``[AdjustmentSet(())]``
    when ``x`` has no open backdoor path, and ``[]`` when no set exists.
    """
    g.check_node(x)
    g.check_node(y)
    if x == y:
        raise DagError("x and y must differ")
    # minimal separators lie within the ancestors of {x, y}
    pool = sorted((ancestors(g, x) | ancestors(g, y)) - descendants(g, x) - {x, y})
    found: list[tuple[str, ...]] = []
    for size in range(len(pool) + 1):
        for combo in itertools.combinations(pool, size):
            cs = set(combo)
            if any(set(f) <= cs for f in found):
                continue
            if is_backdoor_set(g, x, y, cs):
                found.append(combo)
    return sorted((AdjustmentSet(f) for f in found), key=lambda a: (len(a), a.variables))


def is_direct_effect_set(g: Dag, x: str, y: str, z: Iterable[str]) -> bool:
    """``z`` identifies the controlled direct effect ``x -> y``: it holds no
    descendant of ``y`` and separates ``x`` from ``y`` once that edge is cut."""
    z = set(z)
    if (x, y) not in g.edges or x in z or y in z or z & descendants(g, y):
        return False
    return d_separated(g.without_edge(x, y), x, y, z)


def model_covariates(g: Dag, outcome: str, mode: AdjustmentMode = "paper") -> AdjustmentSet:
    """Covariates entering the regression for ``outcome``.

    The first minimal backdoor set, plus the outcome's other direct causes
    (precision variables). In ``"paper"`` mode, direct causes that are
    themselves affected by the exposure (mediators) are included as well, so the
    model estimates a direct rather than a total effect.
    """
    x = g.exposure
    if x is None:
        raise DagError("graph has no exposure")
    sets = backdoor_adjustment_sets(g, x, outcome)
    if not sets:
        raise DagError(f"no backdoor adjustment set exists for {x} -> {outcome}")
    chosen = set(sets[0].variables)
    de_x = descendants(g, x)
    for p in g.parents(outcome) - {x}:
        if p not in de_x:
            chosen.add(p)
        elif mode == "paper":
            chosen.add(p)
    if mode == "total" and not is_backdoor_set(g, x, outcome, chosen):
        raise DagError(f"precision covariates break the backdoor criterion for {outcome}")
    if mode == "paper" and chosen & de_x and not is_direct_effect_set(g, x, outcome, chosen):
        raise DagError(f"mediator-adjusted set does not identify the direct effect on {outcome}")
    return AdjustmentSet(tuple(sorted(chosen)), minimal=False)


def reduced_dag(g: Dag) -> Dag:
    """Keep exposure, outcomes, every direct cause of an outcome and every node of
    a minimal backdoor set; drop everything else.

    Any dropped variable can only influence an outcome through a kept one.
    """
    if g.exposure is None or not g.outcomes:
        raise DagError("reduced_dag needs exposure and outcomes")
    keep = {g.exposure, *g.outcomes}
    for o in g.outcomes:
        keep |= g.parents(o)
        for s in backdoor_adjustment_sets(g, g.exposure, o)[:1]:
            keep |= set(s.variables)
    return g.subgraph(keep)


def passes_through(g: Dag, excluded: str, retained: set[str], targets: Iterable[str]) -> bool:
    """True iff every directed path from ``excluded`` to a target has a
    ``retained`` node strictly between its endpoints."""

    def clear(v: str, target: str) -> bool:
        for c in g.children(v):
            if c == target:
                return False
            if c not in retained and not clear(c, target):
                return False
        return True

    return all(clear(excluded, t) for t in targets)
