"""Chain graphs with directed and undirected edges.

Nodes are integers ``0..p-1``. A directed edge ``(j, k)`` is an arrow from
node ``j`` to node ``k``; undirected edges are unordered pairs. Everything
purely graphical lives here: validity, relatives, chain components,
triplexes, Markov equivalence, magnification onto explicit error nodes,
determination closure, and traversal of a Markov equivalence class via
component merges and splits. Graphs are immutable values; every operation
returns a new graph.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, NamedTuple

import numpy as np

__all__ = [
    "CapacityError",
    "ChainGraph",
    "GraphStructureError",
    "MagnifiedGraph",
    "Triplex",
    "adjacencies",
    "canonical_key",
    "chain_components",
    "determined_closure",
    "enumerate_chain_graphs",
    "equivalence_class",
    "feasible_merge",
    "feasible_split",
    "find_semidirected_cycle",
    "is_chain_graph",
    "magnify",
    "markov_equivalent",
    "random_chain_graph",
    "relatives",
    "structural_hamming_distance",
    "triplexes",
]

RELATIVE_KINDS = ("parents", "descendants", "non_descendants", "adjacents")


class GraphStructureError(ValueError):
    """A candidate graph is malformed: bad index, self-loop or duplicate edge."""


class CapacityError(ValueError):
    """An enumeration would exceed its configured size cap."""


class Triplex(NamedTuple):
    """Induced subgraph j ~ k ~ l with center k: j and l non-adjacent, no
    edge points out of k, and at least one of the two edges points into k.
    Canonical form has j < l."""

    j: int
    k: int
    l: int


@dataclass(frozen=True)
class ChainGraph:
    """Simple graph with directed and undirected edges over ``p`` nodes.

    The constructor normalizes edge containers and rejects malformed input
    (self-loops, out-of-range indices, more than one edge per node pair).
    It does *not* reject semidirected cycles, so that :func:`is_chain_graph`
    can classify arbitrary simple candidates; all other operations assume
    the candidate passed that check.
    """

    p: int
    directed: frozenset = frozenset()
    undirected: frozenset = frozenset()
    labels: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.p, int) or self.p < 1:
            raise GraphStructureError(f"node count must be a positive integer, got {self.p!r}")
        directed = frozenset((int(j), int(k)) for j, k in self.directed)
        undirected = frozenset((min(int(j), int(k)), max(int(j), int(k))) for j, k in self.undirected)
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "undirected", undirected)
        seen: set[tuple[int, int]] = set()
        for j, k in itertools.chain(directed, undirected):
            if j == k:
                raise GraphStructureError(f"self-loop at node {j}")
            if not (0 <= j < self.p and 0 <= k < self.p):
                raise GraphStructureError(f"edge ({j}, {k}) out of range for p={self.p}")
            pair = (min(j, k), max(j, k))
            if pair in seen:
                raise GraphStructureError(f"more than one edge between nodes {pair[0]} and {pair[1]}")
            seen.add(pair)
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != self.p:
                raise GraphStructureError(f"expected {self.p} labels, got {len(labels)}")
            object.__setattr__(self, "labels", labels)

    # -- cached adjacency structure ------------------------------------

    @cached_property
    def _parents(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.p)]
        for j, k in self.directed:
            out[k].append(j)
        return tuple(tuple(sorted(x)) for x in out)

    @cached_property
    def _children(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.p)]
        for j, k in self.directed:
            out[j].append(k)
        return tuple(tuple(sorted(x)) for x in out)

    @cached_property
    def _neighbors(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.p)]
        for j, k in self.undirected:
            out[j].append(k)
            out[k].append(j)
        return tuple(tuple(sorted(x)) for x in out)

    @cached_property
    def _adjacencies(self) -> frozenset:
        pairs = {(min(j, k), max(j, k)) for j, k in self.directed}
        return frozenset(pairs | set(self.undirected))

    @cached_property
    def _triplexes(self) -> frozenset:
        found = set()
        for k in range(self.p):
            into = [(j, True) for j in self._parents[k]] + [(j, False) for j in self._neighbors[k]]
            for (j, dj), (l, dl) in itertools.combinations(into, 2):
                if (dj or dl) and not self.adjacent(j, l):
                    found.add(Triplex(min(j, l), k, max(j, l)))
        return frozenset(found)

    @cached_property
    def _components(self) -> tuple[frozenset, ...]:
        seen = [False] * self.p
        blocks = []
        for start in range(self.p):
            if seen[start]:
                continue
            block = {start}
            stack = [start]
            seen[start] = True
            while stack:
                v = stack.pop()
                for w in self._neighbors[v]:
                    if not seen[w]:
                        seen[w] = True
                        block.add(w)
                        stack.append(w)
            blocks.append(frozenset(block))
        return tuple(sorted(blocks, key=min))

    # -- small helpers ---------------------------------------------------

    def adjacent(self, j: int, k: int) -> bool:
        return (min(j, k), max(j, k)) in self._adjacencies

    def edge_between(self, j: int, k: int) -> str | None:
        """Edge kind between j and k: '->', '<-', '--' or None."""
        if (j, k) in self.directed:
            return "->"
        if (k, j) in self.directed:
            return "<-"
        if (min(j, k), max(j, k)) in self.undirected:
            return "--"
        return None

    def node_label(self, j: int) -> str:
        return self.labels[j] if self.labels is not None else f"X{j + 1}"

    def n_edges(self) -> int:
        return len(self.directed) + len(self.undirected)


@dataclass(frozen=True)
class MagnifiedGraph:
    """A chain graph over the original nodes plus one error node apiece.

    ``error_of[j]`` is the index of node j's error node in ``base``. Error
    nodes have no parents, each points at exactly its own original node,
    and all undirected edges run between error nodes.
    """

    base: ChainGraph
    error_of: tuple

    def __post_init__(self):
        object.__setattr__(self, "error_of", tuple(int(x) for x in self.error_of))
        p = len(self.error_of)
        if self.base.p != 2 * p:
            raise GraphStructureError("magnified graph must have exactly 2p nodes")
        errors = set(self.error_of)
        for j, nj in enumerate(self.error_of):
            if (nj, j) not in self.base.directed:
                raise GraphStructureError(f"missing error edge {nj} -> {j}")
            if self.base._parents[nj]:
                raise GraphStructureError(f"error node {nj} must have no parents")
        for a, b in self.base.undirected:
            if a not in errors or b not in errors:
                raise GraphStructureError("undirected edges may only join error nodes")

    @property
    def original_p(self) -> int:
        return len(self.error_of)


def _validate_nodes(g: ChainGraph, s: Iterable[int]) -> frozenset:
    out = frozenset(int(x) for x in s)
    for x in out:
        if not (0 <= x < g.p):
            raise ValueError(f"node index {x} out of range for p={g.p}")
    return out


def find_semidirected_cycle(g: ChainGraph) -> list[int] | None:
    """Return one semidirected cycle as a node sequence [u, v, ..., u], or None.

    A semidirected cycle starts with a directed edge u -> v and returns to u
    along edges that are undirected or directed the same way around.
    """
    for u, v in sorted(g.directed):
        parent: dict[int, int | None] = {v: None}
        queue = [v]
        while queue:
            x = queue.pop(0)
            for y in itertools.chain(g._children[x], g._neighbors[x]):
                if y not in parent:
                    parent[y] = x
                    queue.append(y)
        if u in parent:
            chain = [u]
            cur = parent[u]
            while cur is not None:
                chain.append(cur)
                cur = parent[cur]
            # chain is u..v walking predecessors; reverse to v..u, prepend u
            return [u] + chain[::-1]
    return None


def is_chain_graph(g: ChainGraph) -> bool:
    """True iff the simple graph has no semidirected cycle."""
    return find_semidirected_cycle(g) is None


def relatives(g: ChainGraph, s: Iterable[int], kind: str) -> frozenset:
    """Parents, descendants, non-descendants or adjacents of the node set s.

    Descendants follow directed paths of length >= 1 only; an undirected
    edge never extends descent, and a node is not its own descendant unless
    a directed path loops back to it (impossible in a valid chain graph).
    """
    s = _validate_nodes(g, s)
    if kind not in RELATIVE_KINDS:
        raise ValueError(f"unknown relative kind {kind!r}; expected one of {RELATIVE_KINDS}")
    if kind == "parents":
        return frozenset(itertools.chain.from_iterable(g._parents[k] for k in s))
    if kind == "adjacents":
        out: set[int] = set()
        for k in s:
            out.update(g._parents[k])
            out.update(g._children[k])
            out.update(g._neighbors[k])
        return frozenset(out)
    reached: set[int] = set()
    stack = list(itertools.chain.from_iterable(g._children[k] for k in s))
    while stack:
        v = stack.pop()
        if v not in reached:
            reached.add(v)
            stack.extend(g._children[v])
    if kind == "descendants":
        return frozenset(reached)
    return frozenset(range(g.p)) - frozenset(reached)


def chain_components(g: ChainGraph) -> tuple:
    """Partition of the nodes into maximal undirected-connected blocks."""
    return g._components


def triplexes(g: ChainGraph) -> frozenset:
    """All triplexes of g in canonical (min, center, max) form."""
    return g._triplexes


def adjacencies(g: ChainGraph) -> frozenset:
    """Unordered adjacent node pairs, ignoring edge type."""
    return g._adjacencies


def markov_equivalent(g: ChainGraph, h: ChainGraph) -> bool:
    """True iff g and h have the same adjacencies and the same triplexes."""
    if g.p != h.p:
        raise ValueError(f"node count mismatch: {g.p} vs {h.p}")
    return g._adjacencies == h._adjacencies and g._triplexes == h._triplexes


def magnify(g: ChainGraph) -> MagnifiedGraph:
    """Attach an explicit error node to every node.

    The result has 2p nodes: original node j keeps index j, its error node
    gets index p + j and an edge (p + j) -> j. Directed edges are kept and
    every undirected edge {j, k} is replaced by {p + j, p + k} between the
    error nodes.
    """
    p = g.p
    directed = set(g.directed)
    directed.update((p + j, j) for j in range(p))
    undirected = {(p + j, p + k) for j, k in g.undirected}
    if g.labels is None:
        labels = tuple(f"X{j + 1}" for j in range(p)) + tuple(f"N{j + 1}" for j in range(p))
    else:
        labels = g.labels + tuple(f"N_{x}" for x in g.labels)
    base = ChainGraph(2 * p, frozenset(directed), frozenset(undirected), labels=labels)
    return MagnifiedGraph(base=base, error_of=tuple(range(p, 2 * p)))


def determined_closure(mg: MagnifiedGraph, c: Iterable[int]) -> frozenset:
    """Smallest superset of c closed under functional determination.

    Node j is determined once its parents and its error node all are; the
    error node is determined once node j and j's parents all are. Computed
    by fixed-point iteration, so it is monotone and idempotent.
    """
    closed = set(_validate_nodes(mg.base, c))
    p = mg.original_p
    parents0 = [tuple(x for x in mg.base._parents[j] if x != mg.error_of[j]) for j in range(p)]
    changed = True
    while changed:
        changed = False
        for j in range(p):
            nj = mg.error_of[j]
            pa_in = all(x in closed for x in parents0[j])
            if j not in closed and pa_in and nj in closed:
                closed.add(j)
                changed = True
            if nj not in closed and pa_in and j in closed:
                closed.add(nj)
                changed = True
    return frozenset(closed)


def feasible_merge(g: ChainGraph, upper: Iterable[int], lower: Iterable[int]) -> ChainGraph | None:
    """Drop the direction of every edge from component `upper` into `lower`.

    Accepted (the new graph is returned) only when the result is a valid
    chain graph that is Markov equivalent to g; otherwise None.
    """
    u = frozenset(_validate_nodes(g, upper))
    l = frozenset(_validate_nodes(g, lower))
    comps = set(chain_components(g))
    if u not in comps or l not in comps or u == l:
        raise ValueError("upper and lower must be two distinct chain components")
    between = [(a, b) for a, b in g.directed if a in u and b in l]
    if not between:
        raise ValueError("no directed edge from the upper to the lower component")
    h = ChainGraph(
        g.p,
        g.directed - set(between),
        g.undirected | {(min(a, b), max(a, b)) for a, b in between},
        labels=g.labels,
    )
    if is_chain_graph(h) and markov_equivalent(g, h):
        return h
    return None


def feasible_split(g: ChainGraph, upper: Iterable[int], lower: Iterable[int]) -> ChainGraph | None:
    """Orient every undirected edge between the two halves of one component.

    Inverse of :func:`feasible_merge`: `upper` and `lower` partition a single
    chain component, and each crossing undirected edge {a, b} with a in
    `upper` becomes a -> b. Same accept test as the merge; None on reject.
    """
    u = frozenset(_validate_nodes(g, upper))
    l = frozenset(_validate_nodes(g, lower))
    if not u or not l or u & l:
        raise ValueError("upper and lower must be disjoint and non-empty")
    if (u | l) not in set(chain_components(g)):
        raise ValueError("upper and lower must partition one chain component")
    crossing = [(a, b) for a, b in g.undirected if (a in u) != (b in u)]
    directed = set(g.directed)
    for a, b in crossing:
        directed.add((a, b) if a in u else (b, a))
    h = ChainGraph(
        g.p,
        frozenset(directed),
        g.undirected - set(crossing),
        labels=g.labels,
    )
    if is_chain_graph(h) and markov_equivalent(g, h):
        return h
    return None


def _single_moves(g: ChainGraph) -> Iterator[ChainGraph]:
    comps = chain_components(g)
    comp_index = {}
    for i, comp in enumerate(comps):
        for v in comp:
            comp_index[v] = i
    merge_pairs = {(comp_index[a], comp_index[b]) for a, b in g.directed}
    for iu, il in sorted(merge_pairs):
        h = feasible_merge(g, comps[iu], comps[il])
        if h is not None:
            yield h
    for comp in comps:
        if len(comp) < 2:
            continue
        members = sorted(comp)
        for r in range(1, len(members)):
            for upper in itertools.combinations(members, r):
                h = feasible_split(g, upper, comp - set(upper))
                if h is not None:
                    yield h


def canonical_key(g: ChainGraph) -> tuple:
    """Total order on graphs of equal size; used for deterministic output."""
    return (g.p, tuple(sorted(g.directed)), tuple(sorted(g.undirected)))


def equivalence_class(g: ChainGraph, cap: int = 12) -> list:
    """All graphs reachable from g by feasible merges and splits.

    Every returned graph is Markov equivalent to g, and the closure is the
    whole Markov equivalence class (checked against brute-force enumeration
    at small node counts in the test suite). Sorted for reproducibility.
    """
    if g.p > cap:
        raise CapacityError(f"equivalence-class traversal capped at p={cap}, got p={g.p}")
    seen = {g}
    frontier = [g]
    while frontier:
        x = frontier.pop()
        for h in _single_moves(x):
            if h not in seen:
                seen.add(h)
                frontier.append(h)
    return sorted(seen, key=canonical_key)


def random_chain_graph(p: int, edge_prob: float, undirected_frac: float, seed) -> ChainGraph:
    """Sample a valid chain graph.

    Construction guarantees validity: nodes get a random order and are
    grouped into consecutive blocks (each node joins the previous block
    with probability `undirected_frac`). Pairs inside a block become
    undirected edges with probability `edge_prob`; pairs across blocks
    become directed edges pointing from the earlier block.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    for name, value in (("edge_prob", edge_prob), ("undirected_frac", undirected_frac)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {value}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(p)
    block_of = np.zeros(p, dtype=int)
    block = 0
    for pos in range(1, p):
        if rng.random() >= undirected_frac:
            block += 1
        block_of[order[pos]] = block
    directed = set()
    undirected = set()
    for pos_a in range(p):
        for pos_b in range(pos_a + 1, p):
            a, b = int(order[pos_a]), int(order[pos_b])
            if rng.random() >= edge_prob:
                continue
            if block_of[a] == block_of[b]:
                undirected.add((min(a, b), max(a, b)))
            else:
                directed.add((a, b))
    return ChainGraph(p, frozenset(directed), frozenset(undirected))


def enumerate_chain_graphs(p: int, cap: int = 5) -> Iterator[ChainGraph]:
    """Yield every chain graph on p nodes (4^C(p,2) candidates filtered)."""
    if p > cap:
        raise CapacityError(f"exhaustive enumeration capped at p={cap}, got p={p}")
    pairs = list(itertools.combinations(range(p), 2))
    for states in itertools.product(range(4), repeat=len(pairs)):
        directed = set()
        undirected = set()
        for (a, b), state in zip(pairs, states):
            if state == 1:
                directed.add((a, b))
            elif state == 2:
                directed.add((b, a))
            elif state == 3:
                undirected.add((a, b))
        g = ChainGraph(p, frozenset(directed), frozenset(undirected))
        if is_chain_graph(g):
            yield g


def structural_hamming_distance(g: ChainGraph, h: ChainGraph) -> int:
    """Number of node pairs whose edge presence or type differs."""
    if g.p != h.p:
        raise ValueError(f"node count mismatch: {g.p} vs {h.p}")
    return sum(
        1
        for j, k in itertools.combinations(range(g.p), 2)
        if g.edge_between(j, k) != h.edge_between(j, k)
    )
