"""Computational-graph IR for one neuron-model time step.

A graph is a DAG of elemental operations.  ``build_graph`` checks shapes
and wiring; ``linearize`` evaluates the graph at concrete leaf values and
attaches the partial Jacobian of every elemental op to its input edges,
with maximal delta structure.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .errors import CycleDetected, ShapeMismatch, UndefinedValue
from .tensor import (
    SparseTensor,
    add as t_add,
    dense_tensor,
    diag_tensor,
    delta3_tensor,
    make_tensor,
    StructureDescriptor,
)

KINDS = {
    "constant": 0,
    "add": 2,
    "subtract": 2,
    "elementwise_mul": 2,
    "scalar_mul": 2,
    "matvec": 2,
    "surrogate_threshold": 1,
}

DEFAULT_SLOPE = 10.0


def surrogate_grad(x: np.ndarray, slope: float = DEFAULT_SLOPE) -> np.ndarray:
    """Derivative of the smooth spike surrogate, peak-normalized to 1 at 0."""
    return 1.0 / (1.0 + slope * np.abs(x)) ** 2


def surrogate_smooth(x: np.ndarray, slope: float = DEFAULT_SLOPE) -> np.ndarray:
    """Antiderivative of ``surrogate_grad``; used only by derivative checks."""
    return 0.5 + x / (1.0 + slope * np.abs(x))


def heaviside(x: np.ndarray) -> np.ndarray:
    """Hard threshold with the tie broken as a spike: theta(0) = 1."""
    return (x >= 0.0).astype(x.dtype)


@dataclass
class Vertex:
    id: int
    kind: str
    shape: tuple[int, ...]
    name: str = ""
    attrs: dict = field(default_factory=dict)


@dataclass
class Edge:
    src: int
    dst: int
    partial: SparseTensor | None = None


class CompGraph:
    """DAG of elemental operations with per-edge partial Jacobians."""

    def __init__(self):
        self.vertices: dict[int, Vertex] = {}
        self.edges: dict[tuple[int, int], Edge] = {}
        self.inputs: list[int] = []
        self.outputs: list[int] = []
        self.operands: dict[int, list[int]] = {}
        self.values: dict[int, np.ndarray] | None = None
        self._by_name: dict[str, int] = {}

    def vertex_by_name(self, name: str) -> Vertex:
        return self.vertices[self._by_name[name]]

    def add_vertex(self, kind: str, shape, name: str = "", attrs=None) -> Vertex:
        vid = len(self.vertices)
        v = Vertex(vid, kind, tuple(shape), name, dict(attrs or {}))
        self.vertices[vid] = v
        if name:
            self._by_name[name] = vid
        return v

    def add_edge(self, src: int, dst: int, partial: SparseTensor | None = None) -> None:
        self.edges[(src, dst)] = Edge(src, dst, partial)

    def predecessors(self, vid: int) -> list[int]:
        return sorted(s for (s, d) in self.edges if d == vid)

    def successors(self, vid: int) -> list[int]:
        return sorted(d for (s, d) in self.edges if s == vid)

    def leaves(self) -> list[int]:
        """Vertices with only outbound edges (declared inputs and constants)."""
        have_in = {d for (_, d) in self.edges}
        return [vid for vid in self.vertices if vid not in have_in]

    def copy(self) -> "CompGraph":
        g = CompGraph()
        g.vertices = dict(self.vertices)
        g.edges = {k: Edge(e.src, e.dst, e.partial) for k, e in self.edges.items()}
        g.inputs = list(self.inputs)
        g.outputs = list(self.outputs)
        g.operands = {k: list(v) for k, v in self.operands.items()}
        g.values = dict(self.values) if self.values is not None else None
        g._by_name = dict(self._by_name)
        return g

    def dump(self) -> str:
        """Textual form for golden-file tests: vertices, then edges."""
        lines = []
        for vid in sorted(self.vertices):
            v = self.vertices[vid]
            shape = "x".join(map(str, v.shape)) if v.shape else "scalar"
            lines.append(f"v{vid} {v.kind} {shape} {v.name}".rstrip())
        for (s, d) in sorted(self.edges):
            p = self.edges[(s, d)].partial
            if p is None:
                tag = "none"
            elif p.structure.delta_pairs:
                tag = "delta"
            else:
                tag = "dense"
            lines.append(f"e v{s}->v{d} {tag}")
        return "\n".join(lines)


def _op_shape(kind: str, shapes: list[tuple[int, ...]]) -> tuple[int, ...]:
    if kind in ("add", "subtract"):
        a, b = shapes
        if a == b:
            return a
        if a == ():
            return b
        if b == ():
            return a
        raise ShapeMismatch(f"{kind} operands {a} and {b} are incompatible")
    if kind == "elementwise_mul":
        a, b = shapes
        if a != b:
            raise ShapeMismatch(f"elementwise_mul operands {a} and {b} differ")
        return a
    if kind == "scalar_mul":
        a, b = shapes
        if a != ():
            raise ShapeMismatch(f"scalar_mul first operand must be scalar, got {a}")
        return b
    if kind == "matvec":
        w, z = shapes
        if len(w) != 2 or z != (w[1],):
            raise ShapeMismatch(f"matvec operands {w} and {z} are incompatible")
        return (w[0],)
    if kind == "surrogate_threshold":
        return shapes[0]
    raise ShapeMismatch(f"unknown op kind {kind!r}")


def build_graph(program, inputs, outputs) -> CompGraph:
    """Build a DAG from an ordered list of elemental ops over named values.

    ``inputs`` maps leaf names to shapes; values are supplied at
    ``linearize`` time.  Program entries are ``(name, kind, operands)``
    with an optional attrs dict; ``constant`` entries carry their value in
    place of operand names.
    """
    g = CompGraph()
    for name, shape in inputs.items():
        v = g.add_vertex("input", tuple(shape), name)
        g.inputs.append(v.id)
    for entry in program:
        name, kind, args = entry[0], entry[1], entry[2]
        attrs = dict(entry[3]) if len(entry) > 3 else {}
        if name in g._by_name:
            raise UndefinedValue(f"value {name!r} defined twice")
        if kind == "constant":
            value = np.asarray(args)
            attrs["value"] = value
            g.add_vertex(kind, value.shape, name, attrs)
            continue
        if kind not in KINDS:
            raise UndefinedValue(f"unknown op kind {kind!r}")
        if len(args) != KINDS[kind]:
            raise ShapeMismatch(f"{kind} takes {KINDS[kind]} operands, got {len(args)}")
        op_ids = []
        for arg in args:
            if arg not in g._by_name:
                raise UndefinedValue(f"value {arg!r} used before definition")
            op_ids.append(g._by_name[arg])
        shape = _op_shape(kind, [g.vertices[i].shape for i in op_ids])
        v = g.add_vertex(kind, shape, name, attrs)
        g.operands[v.id] = op_ids
        for src in op_ids:
            g.add_edge(src, v.id)
    for name in outputs:
        if name not in g._by_name:
            raise UndefinedValue(f"output {name!r} is not defined")
        g.outputs.append(g._by_name[name])
    return g


def _eval_vertex(v: Vertex, args: list[np.ndarray], smooth: bool) -> np.ndarray:
    if v.kind == "constant":
        return v.attrs["value"]
    if v.kind == "add":
        return args[0] + args[1]
    if v.kind == "subtract":
        return args[0] - args[1]
    if v.kind == "elementwise_mul":
        return args[0] * args[1]
    if v.kind == "scalar_mul":
        return args[0] * args[1]
    if v.kind == "matvec":
        return args[0] @ args[1]
    if v.kind == "surrogate_threshold":
        slope = v.attrs.get("slope", DEFAULT_SLOPE)
        if smooth:
            return surrogate_smooth(args[0], slope)
        return heaviside(args[0])
    raise UndefinedValue(f"cannot evaluate kind {v.kind!r}")


def local_partials(v: Vertex, input_values: list[np.ndarray]) -> list[SparseTensor]:
    """Partial Jacobian per operand, with maximal delta structure."""
    shapes = [np.asarray(a).shape for a in input_values]
    out_shape = _op_shape(v.kind, shapes) if v.kind != "constant" else v.shape
    n = out_shape[0] if out_shape else 1

    def wrt(slot: int, sign: float = 1.0) -> SparseTensor:
        val = np.asarray(input_values[slot])
        if val.shape == () and out_shape != ():
            # scalar operand of a vector op: dense column of +-1
            return dense_tensor(np.full(out_shape, sign, dtype=float), len(out_shape))
        return diag_tensor(np.full(n, sign, dtype=float))

    if v.kind == "add":
        return [wrt(0), wrt(1)]
    if v.kind == "subtract":
        return [wrt(0), wrt(1, -1.0)]
    if v.kind == "elementwise_mul":
        a, b = (np.asarray(x) for x in input_values)
        return [diag_tensor(b.copy()), diag_tensor(a.copy())]
    if v.kind == "scalar_mul":
        alpha = float(np.asarray(input_values[0]))
        vec = np.asarray(input_values[1])
        d_scalar = dense_tensor(vec.astype(float).copy(), len(vec.shape))
        return [d_scalar, diag_tensor(np.full(vec.shape[0], alpha))]
    if v.kind == "matvec":
        w = np.asarray(input_values[0])
        z = np.asarray(input_values[1])
        d_w = delta3_tensor(np.broadcast_to(z, w.shape).copy())
        d_z = dense_tensor(w.copy(), 1)
        return [d_w, d_z]
    if v.kind == "surrogate_threshold":
        x = np.asarray(input_values[0])
        slope = v.attrs.get("slope", DEFAULT_SLOPE)
        return [diag_tensor(surrogate_grad(x, slope))]
    raise ShapeMismatch(f"kind {v.kind!r} has no partials")


def evaluate(g: CompGraph, input_values: dict[str, np.ndarray], smooth: bool = False):
    """Forward-evaluate the graph; returns a dict of vertex id -> value."""
    values: dict[int, np.ndarray] = {}
    for vid in sorted(g.vertices):
        v = g.vertices[vid]
        if v.kind == "input":
            if v.name not in input_values:
                raise UndefinedValue(f"no value supplied for input {v.name!r}")
            val = np.asarray(input_values[v.name])
            if val.shape != v.shape:
                raise ShapeMismatch(f"input {v.name!r} has shape {val.shape}, expected {v.shape}")
            values[vid] = val
        elif v.kind == "constant":
            values[vid] = v.attrs["value"]
        else:
            args = [values[i] for i in g.operands[vid]]
            values[vid] = _eval_vertex(v, args, smooth)
    return values


def linearize(g: CompGraph, input_values, smooth: bool = False) -> CompGraph:
    """Evaluate the graph and attach a partial Jacobian to every edge.

    If an op consumes the same value twice the two slot partials collapse
    onto the single edge by addition.
    """
    out = g.copy()
    out.values = evaluate(g, input_values, smooth)
    for vid, op_ids in g.operands.items():
        v = g.vertices[vid]
        args = [out.values[i] for i in op_ids]
        partials = local_partials(v, args)
        per_src: dict[int, SparseTensor] = {}
        for src, p in zip(op_ids, partials):
            per_src[src] = t_add(per_src[src], p) if src in per_src else p
        for src, p in per_src.items():
            out.edges[(src, vid)].partial = p
    return out


def topo_order(g: CompGraph) -> list[int]:
    """Topological order over all vertices, ties broken by vertex id."""
    indeg = {vid: 0 for vid in g.vertices}
    for (_, d) in g.edges:
        indeg[d] += 1
    heap = [vid for vid, deg in indeg.items() if deg == 0]
    heapq.heapify(heap)
    order = []
    succs: dict[int, list[int]] = {vid: [] for vid in g.vertices}
    for (s, d) in g.edges:
        succs[s].append(d)
    while heap:
        vid = heapq.heappop(heap)
        order.append(vid)
        for d in succs[vid]:
            indeg[d] -= 1
            if indeg[d] == 0:
                heapq.heappush(heap, d)
    if len(order) != len(g.vertices):
        raise CycleDetected("graph contains a cycle")
    return order
