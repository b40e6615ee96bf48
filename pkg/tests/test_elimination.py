"""Vertex elimination: chain rule by graph surgery, order invariance."""

import random

import numpy as np
import pytest

from sparseprop.elimination import (
    EliminationOrder,
    accumulate_jacobian,
    eliminate_vertex,
    intermediate_vertices,
    random_order,
    resolve_order,
)
from sparseprop.errors import NotIntermediate
from sparseprop.graph import build_graph, linearize
from sparseprop.neurons import ALIFParams, LIFParams, NeuronState, _leaf_values, \
    alif_step_graph, lif_step_graph

from conftest import random_vector_program


def _scaled_chain():
    """x -> (*2) -> v1 -> (*3) -> v2 as a linearized graph."""
    program = [
        ("v1", "scalar_mul", ("two", "x")),
        ("v2", "scalar_mul", ("three", "v1")),
    ]
    g = build_graph(program, {"x": (2,), "two": (), "three": ()}, ["v2"])
    return linearize(g, {"x": np.array([1.0, 1.0]),
                         "two": np.asarray(2.0), "three": np.asarray(3.0)})


class TestEliminateVertex:
    def test_chain_fuses_to_product(self):
        lin = _scaled_chain()
        j = lin._by_name["v1"]
        out = eliminate_vertex(lin, j)
        x, v2 = lin._by_name["x"], lin._by_name["v2"]
        fused = out.edges[(x, v2)].partial
        assert np.allclose(fused.densify(), 6.0 * np.eye(2))
        assert not out.predecessors(j) and not out.successors(j)

    def test_diamond_sums_path_products(self):
        program = [
            ("a", "scalar_mul", ("two", "x")),
            ("b", "scalar_mul", ("three", "x")),
            ("y", "add", ("a", "b")),
        ]
        g = build_graph(program, {"x": (2,), "two": (), "three": ()}, ["y"])
        lin = linearize(g, {"x": np.ones(2), "two": np.asarray(2.0),
                            "three": np.asarray(3.0)})
        step = eliminate_vertex(lin, lin._by_name["a"])
        step = eliminate_vertex(step, step._by_name["b"])
        dy_dx = step.edges[(lin._by_name["x"], lin._by_name["y"])].partial
        assert np.allclose(dy_dx.densify(), 5.0 * np.eye(2))

    def test_input_vertex_rejected(self):
        lin = _scaled_chain()
        with pytest.raises(NotIntermediate):
            eliminate_vertex(lin, lin._by_name["x"])

    def test_output_vertex_rejected(self):
        lin = _scaled_chain()
        with pytest.raises(NotIntermediate):
            eliminate_vertex(lin, lin._by_name["v2"])


class TestResolveOrder:
    def test_forward_is_topo_reverse_is_reversed(self):
        lin = _scaled_chain()
        fwd = resolve_order(lin, EliminationOrder("forward"))
        rev = resolve_order(lin, EliminationOrder("reverse"))
        assert fwd == list(reversed(rev))
        assert set(fwd) == set(intermediate_vertices(lin))

    def test_explicit_must_cover_intermediates(self):
        lin = _scaled_chain()
        with pytest.raises(NotIntermediate):
            resolve_order(lin, EliminationOrder([]))


class TestAccumulateJacobian:
    def test_single_edge_graph_unchanged(self):
        program = [("y", "scalar_mul", ("s", "x"))]
        g = build_graph(program, {"s": (), "x": (3,)}, ["y"])
        lin = linearize(g, {"s": np.asarray(4.0), "x": np.ones(3)})
        js = accumulate_jacobian(lin)
        assert np.allclose(js.by_name("x", "y").densify(), 4.0 * np.eye(3))

    def test_forward_equals_reverse(self):
        lin = _scaled_chain()
        a = accumulate_jacobian(lin, EliminationOrder("forward"))
        b = accumulate_jacobian(lin, EliminationOrder("reverse"))
        assert set(a.entries) == set(b.entries)
        for key in a.entries:
            assert np.max(np.abs(a.entries[key].densify()
                                 - b.entries[key].densify())) <= 1e-10

    def test_lif_reverse_gives_alpha_diag_and_spike_rows(self):
        n, k = 4, 3
        rng = np.random.default_rng(7)
        p = LIFParams(rng.standard_normal((n, k)))
        x = (rng.random(k) < 0.5).astype(float)
        st = NeuronState(rng.uniform(0, 2, n), np.zeros(n), None)
        lin = linearize(lif_step_graph(n, k, p.slope, False), _leaf_values(p, st, x))
        js = accumulate_jacobian(lin, EliminationOrder("reverse"))
        h = js.by_name("u", "integrated")
        f = js.by_name("W", "integrated")
        assert h.structure.delta_pairs and f.structure.delta_pairs
        assert np.allclose(h.values, p.alpha)
        assert np.allclose(f.values, np.broadcast_to(x, (n, k)))

    def test_order_invariance_random_graphs(self, rng):
        for case in range(12):
            program, inputs, outputs, values = random_vector_program(rng)
            g = build_graph(program, inputs, outputs)
            lin = linearize(g, values, smooth=True)
            base = None
            orders = [EliminationOrder("forward"), EliminationOrder("reverse"),
                      random_order(lin, random.Random(case))]
            for order in orders:
                js = accumulate_jacobian(lin, order)
                arrs = {key: t.densify() for key, t in js.entries.items()}
                if base is None:
                    base = arrs
                else:
                    assert set(base) == set(arrs)
                    for key in base:
                        assert np.max(np.abs(base[key] - arrs[key])) <= 1e-10

    def test_order_invariance_neuron_graphs(self):
        rng = np.random.default_rng(3)
        n, k = 4, 5
        w = rng.standard_normal((n, k)) * 0.4
        x = (rng.random(k) < 0.4).astype(float)
        for p in (LIFParams(w), LIFParams(w, reset=True), ALIFParams(w)):
            graph = (alif_step_graph if isinstance(p, ALIFParams)
                     else lif_step_graph)(n, k, p.slope, p.reset)
            st = NeuronState(rng.uniform(0, 2, n), np.zeros(n), rng.uniform(0, 1, n))
            lin = linearize(graph, _leaf_values(p, st, x))
            base = None
            for trial in range(3):
                js = accumulate_jacobian(lin, random_order(lin, random.Random(trial)))
                arrs = {key: t.densify() for key, t in js.entries.items()}
                if base is None:
                    base = arrs
                else:
                    for key in base:
                        assert np.max(np.abs(base[key] - arrs[key])) <= 1e-10
