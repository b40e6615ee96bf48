"""Cross-country vertex elimination.

Eliminating an intermediate vertex j fuses every in-edge partial with
every out-edge partial (c_ik += c_jk . c_ij) and removes j from the
graph.  Applying this to every intermediate vertex, in any order, leaves
a bipartite graph whose edges are the Jacobians of the outputs with
respect to the leaves.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .errors import NotIntermediate
from .graph import CompGraph, topo_order
from .tensor import SparseTensor, add, contract


@dataclass
class EliminationOrder:
    """Either a named mode or an explicit list of intermediate vertex ids."""

    mode: str | list[int] = "reverse"


@dataclass
class JacobianSet:
    """Map from (leaf id, output id) to the accumulated Jacobian."""

    entries: dict[tuple[int, int], SparseTensor]
    names: dict[str, int]

    def get(self, src: int, dst: int) -> SparseTensor | None:
        return self.entries.get((src, dst))

    def by_name(self, src: str, dst: str) -> SparseTensor | None:
        return self.entries.get((self.names[src], self.names[dst]))


def _eliminate_inplace(g: CompGraph, j: int) -> None:
    preds = g.predecessors(j)
    succs = g.successors(j)
    if j in g.outputs or not preds or not succs:
        raise NotIntermediate(f"vertex {j} is not an intermediate vertex")
    for i in preds:
        c_ij = g.edges[(i, j)].partial
        for k in succs:
            c_jk = g.edges[(j, k)].partial
            fused = contract(c_jk, c_ij)
            if (i, k) in g.edges and g.edges[(i, k)].partial is not None:
                fused = add(g.edges[(i, k)].partial, fused)
            g.add_edge(i, k, fused)
    for i in preds:
        del g.edges[(i, j)]
    for k in succs:
        del g.edges[(j, k)]


def eliminate_vertex(g: CompGraph, j: int) -> CompGraph:
    """Return a copy of g with intermediate vertex j eliminated.

    The vertex itself stays in the vertex table (isolated) so ids remain
    stable across elimination steps.
    """
    out = g.copy()
    _eliminate_inplace(out, j)
    return out


def intermediate_vertices(g: CompGraph) -> list[int]:
    have_in = {d for (_, d) in g.edges}
    have_out = {s for (s, _) in g.edges}
    return [v for v in g.vertices if v in have_in and v in have_out and v not in g.outputs]


def resolve_order(g: CompGraph, order: EliminationOrder) -> list[int]:
    inter = set(intermediate_vertices(g))
    if isinstance(order.mode, str):
        topo = [v for v in topo_order(g) if v in inter]
        if order.mode == "forward":
            return topo
        if order.mode == "reverse":
            return list(reversed(topo))
        raise ValueError(f"unknown elimination mode {order.mode!r}")
    explicit = list(order.mode)
    if sorted(explicit) != sorted(inter):
        raise NotIntermediate("explicit order must cover each intermediate vertex exactly once")
    return explicit


def random_order(g: CompGraph, rng: random.Random) -> EliminationOrder:
    ids = intermediate_vertices(g)
    rng.shuffle(ids)
    return EliminationOrder(ids)


def accumulate_jacobian(g: CompGraph, order: EliminationOrder | None = None) -> JacobianSet:
    """Eliminate all intermediates and collect the leaf-to-output Jacobians.

    Any valid order yields the same Jacobians up to floating-point
    rounding.  When one output feeds another, the remaining
    output-to-output edge is folded through so every entry is a full
    Jacobian with respect to the leaf.
    """
    if order is None:
        order = EliminationOrder("reverse")
    work = g.copy()
    for j in resolve_order(g, order):
        _eliminate_inplace(work, j)
    leaves = set(g.leaves())
    # fold output->output edges in topo order of the original graph
    out_rank = {vid: pos for pos, vid in enumerate(topo_order(g))}
    for o in sorted(work.outputs, key=out_rank.get):
        for o2 in list(work.predecessors(o)):
            if o2 in leaves:
                continue
            c_o2o = work.edges[(o2, o)].partial
            for i in work.predecessors(o2):
                fused = contract(c_o2o, work.edges[(i, o2)].partial)
                if (i, o) in work.edges:
                    fused = add(work.edges[(i, o)].partial, fused)
                work.add_edge(i, o, fused)
            del work.edges[(o2, o)]
    entries = {
        (s, d): e.partial
        for (s, d), e in work.edges.items()
        if s in leaves and d in work.outputs
    }
    return JacobianSet(entries, dict(g._by_name))
