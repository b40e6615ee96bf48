"""Shared random generators for structure-preserving algebra tests."""

import numpy as np
import pytest

from sparseprop.tensor import StructureDescriptor, make_tensor


def rand_tensor(structure, rng, dtype=np.float64):
    vals = rng.standard_normal(structure.compressed_shape())
    return make_tensor(structure.logical_shape, structure, vals, dtype=dtype)


def random_contract_pair(rng):
    """A random (A, B) pair with A.in_dims == B.out_dims.

    Covers every layout the gradient engines produce: dense, diagonal,
    delta-3, and per-neuron block tensors, mixed freely on either side.
    """
    n = int(rng.integers(2, 8))
    k = int(rng.integers(2, 8))
    j = int(rng.integers(1, 6))
    mid_kind = rng.choice(["vec", "mat", "block"])
    if mid_kind == "vec":
        mid = (n,)
        a_opts = [
            StructureDescriptor((j,), mid),
            StructureDescriptor((n,), mid, ((0, 1),)),
            StructureDescriptor((n, 2), mid),
        ]
        b_opts = [
            StructureDescriptor(mid, (j,)),
            StructureDescriptor(mid, (n,), ((0, 1),)),
            StructureDescriptor(mid, (n, k), ((0, 1),)),
            StructureDescriptor(mid, (n, k)),
        ]
    elif mid_kind == "mat":
        mid = (n, k)
        a_opts = [
            StructureDescriptor((j,), mid),
            StructureDescriptor((n,), mid, ((0, 1),)),
        ]
        b_opts = [
            StructureDescriptor(mid, (j,)),
            StructureDescriptor(mid, ()),
        ]
    else:
        mid = (n, 2)
        a_opts = [
            StructureDescriptor((n, 2), mid, ((0, 2),)),
            StructureDescriptor((j,), mid),
        ]
        b_opts = [
            StructureDescriptor(mid, (n, 2), ((0, 2),)),
            StructureDescriptor(mid, (n, k), ((0, 2),)),
            StructureDescriptor(mid, (j,)),
        ]
    sa = a_opts[rng.integers(len(a_opts))]
    sb = b_opts[rng.integers(len(b_opts))]
    return rand_tensor(sa, rng), rand_tensor(sb, rng)


def random_add_pair(rng):
    """A random (A, B) pair with equal logical shapes (structures may differ)."""
    n = int(rng.integers(2, 8))
    k = int(rng.integers(2, 8))
    shape_kind = rng.choice(["square", "delta3"])
    if shape_kind == "square":
        opts = [
            StructureDescriptor((n,), (n,), ((0, 1),)),
            StructureDescriptor((n,), (n,)),
        ]
    else:
        opts = [
            StructureDescriptor((n,), (n, k), ((0, 1),)),
            StructureDescriptor((n,), (n, k)),
        ]
    sa = opts[rng.integers(len(opts))]
    sb = opts[rng.integers(len(opts))]
    return rand_tensor(sa, rng), rand_tensor(sb, rng)


def random_vector_program(rng, n=3):
    """A random elemental-op program over length-n vectors.

    Inputs are two vectors, a scalar, and an n-by-n weight matrix; each
    op draws its operands from the values defined so far.  Every value
    with no consumer becomes an output.
    """
    inputs = {"x": (n,), "y": (n,), "s": (), "W": (n, n)}
    vectors = ["x", "y"]
    program = []
    consumed = set()
    n_ops = int(rng.integers(3, 8))
    for i in range(n_ops):
        name = f"t{i}"
        kind = rng.choice(
            ["add", "subtract", "elementwise_mul", "scalar_mul", "matvec",
             "surrogate_threshold"]
        )
        if kind == "scalar_mul":
            ops = ("s", vectors[rng.integers(len(vectors))])
        elif kind == "matvec":
            ops = ("W", vectors[rng.integers(len(vectors))])
        elif kind == "surrogate_threshold":
            ops = (vectors[rng.integers(len(vectors))],)
        else:
            a = vectors[rng.integers(len(vectors))]
            b = vectors[rng.integers(len(vectors))]
            ops = (a, b)
        program.append((name, kind, ops))
        consumed.update(ops)
        vectors.append(name)
    outputs = [v for v in vectors if v not in consumed and v.startswith("t")]
    if not outputs:
        outputs = [vectors[-1]]
    values = {
        "x": rng.standard_normal(n),
        "y": rng.standard_normal(n),
        "s": np.asarray(rng.standard_normal()),
        "W": rng.standard_normal((n, n)),
    }
    return program, inputs, outputs, values


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
