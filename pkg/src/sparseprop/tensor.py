"""Structure-tagged tensor algebra on compressed buffers.

A Jacobian-shaped tensor whose sparsity is a product of Kronecker deltas
is stored as the dense buffer of its free axes only: a diagonal matrix as
a vector, a three-tensor ``T[i,a,b] = delta_ia * M[i,b]`` as the matrix
``M``, a per-neuron block tensor as an ``n x p x q`` stack of blocks.
Contraction and addition operate on the compressed buffers directly, so
aligned deltas reduce generalized matrix products to element-wise or
small-block work.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arena import active_dtype as _active_dtype, track as _track
from .errors import BadStructure, ShapeMismatch

_MAX_RANK = 4
_MAX_PAIRS = 2
_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


@dataclass(frozen=True)
class StructureDescriptor:
    """Shape and delta-pair layout of a Jacobian tensor.

    Axes are indexed globally into ``out_dims + in_dims``.  Each delta
    pair ``(i, j)`` with ``i < j`` constrains the two axes to be equal;
    the second axis of every pair is dropped from the compressed buffer.
    ``block_dims`` marks axes that stay dense inside a delta-paired
    neuron index (per-neuron blocks); it is descriptive metadata and does
    not change the storage rule.
    """

    out_dims: tuple[int, ...]
    in_dims: tuple[int, ...]
    delta_pairs: tuple[tuple[int, int], ...] = ()
    block_dims: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "out_dims", tuple(int(d) for d in self.out_dims))
        object.__setattr__(self, "in_dims", tuple(int(d) for d in self.in_dims))
        pairs = tuple(tuple(sorted((int(i), int(j)))) for i, j in self.delta_pairs)
        object.__setattr__(self, "delta_pairs", pairs)
        object.__setattr__(self, "block_dims", tuple(int(a) for a in self.block_dims))
        shape = self.logical_shape
        if len(shape) > _MAX_RANK:
            raise BadStructure(f"rank {len(shape)} exceeds supported rank {_MAX_RANK}")
        if len(pairs) > _MAX_PAIRS:
            raise BadStructure(f"{len(pairs)} delta pairs exceed supported {_MAX_PAIRS}")
        seen: set[int] = set()
        for i, j in pairs:
            if i == j:
                raise BadStructure(f"delta pair repeats axis {i}")
            for ax in (i, j):
                if not 0 <= ax < len(shape):
                    raise BadStructure(f"axis {ax} out of range for rank {len(shape)}")
                if ax in seen:
                    raise BadStructure(f"axis {ax} appears in more than one delta pair")
                seen.add(ax)
            if shape[i] != shape[j]:
                raise BadStructure(f"paired axes {i},{j} have sizes {shape[i]} != {shape[j]}")

    @property
    def logical_shape(self) -> tuple[int, ...]:
        return self.out_dims + self.in_dims

    @property
    def rank(self) -> int:
        return len(self.logical_shape)

    def compressed_axes(self) -> tuple[int, ...]:
        dropped = {j for _, j in self.delta_pairs}
        return tuple(ax for ax in range(self.rank) if ax not in dropped)

    def compressed_shape(self) -> tuple[int, ...]:
        shape = self.logical_shape
        return tuple(shape[ax] for ax in self.compressed_axes())

    def compressed_size(self) -> int:
        return int(np.prod(self.compressed_shape(), dtype=np.int64))

    def same_sparsity(self, other: "StructureDescriptor") -> bool:
        """True if the two layouts store values identically (metadata aside)."""
        return (
            self.out_dims == other.out_dims
            and self.in_dims == other.in_dims
            and self.delta_pairs == other.delta_pairs
        )


@dataclass
class SparseTensor:
    """Compressed tensor value.  Treat as immutable after construction."""

    structure: StructureDescriptor
    values: np.ndarray
    fallback: bool = False

    @property
    def logical_shape(self) -> tuple[int, ...]:
        return self.structure.logical_shape

    @property
    def dtype(self):
        return self.values.dtype

    def densify(self) -> np.ndarray:
        """Expand to the full logical shape; off-delta entries are exact zeros."""
        s = self.structure
        if not s.delta_pairs:
            return self.values.reshape(s.logical_shape).copy()
        # One distinct letter per logical axis; compressed axes use the
        # letter of the pair's kept member, each pair adds an identity operand.
        letters = {ax: _LETTERS[ax] for ax in range(s.rank)}
        keep_of = {j: i for i, j in s.delta_pairs}
        comp_sub = "".join(
            letters[keep_of.get(ax, ax)] for ax in s.compressed_axes()
        )
        operands = [self.values]
        subs = [comp_sub]
        shape = s.logical_shape
        for i, j in s.delta_pairs:
            operands.append(np.eye(shape[i], dtype=self.values.dtype))
            subs.append(letters[i] + letters[j])
        out_sub = "".join(letters[ax] for ax in range(s.rank))
        return np.einsum(",".join(subs) + "->" + out_sub, *operands)


def _wrap(structure: StructureDescriptor, values: np.ndarray, fallback: bool = False) -> SparseTensor:
    """Internal constructor: registers a freshly computed buffer, no copy."""
    return SparseTensor(structure, _track(values), fallback)


def make_tensor(logical_shape, structure: StructureDescriptor, values, dtype=None) -> SparseTensor:
    """Build a tensor from a compressed value buffer.

    The buffer must have exactly one entry per free axis combination; its
    bytes are registered with the active arena context, if any.
    """
    if tuple(logical_shape) != structure.logical_shape:
        raise ShapeMismatch(
            f"logical shape {tuple(logical_shape)} != descriptor shape {structure.logical_shape}"
        )
    if dtype is None:
        dtype = _active_dtype()
    arr = np.array(values, dtype=dtype)
    if arr.size != structure.compressed_size():
        raise ShapeMismatch(
            f"buffer has {arr.size} entries, structure needs {structure.compressed_size()}"
        )
    return _wrap(structure, arr.reshape(structure.compressed_shape()))


def dense_tensor(values, n_out_axes: int, dtype=None) -> SparseTensor:
    """Wrap a dense array, splitting its axes into out/in at ``n_out_axes``."""
    arr = np.asarray(values)
    shape = arr.shape
    s = StructureDescriptor(shape[:n_out_axes], shape[n_out_axes:])
    return make_tensor(shape, s, arr, dtype=dtype)


def diag_tensor(v, dtype=None) -> SparseTensor:
    """Diagonal matrix diag(v) stored as the vector v."""
    v = np.asarray(v)
    n = v.shape[0]
    s = StructureDescriptor((n,), (n,), ((0, 1),))
    return make_tensor((n, n), s, v, dtype=dtype)


def delta3_tensor(m, dtype=None) -> SparseTensor:
    """Three-tensor T[i,a,b] = delta_ia * m[i,b] stored as the matrix m."""
    m = np.asarray(m)
    n, k = m.shape
    s = StructureDescriptor((n,), (n, k), ((0, 1),))
    return make_tensor((n, n, k), s, m, dtype=dtype)


def zero_tensor(structure: StructureDescriptor, dtype=None) -> SparseTensor:
    if dtype is None:
        dtype = _active_dtype()
    return _wrap(structure, np.zeros(structure.compressed_shape(), dtype=dtype))


def _find(parent: list[int], x: int) -> int:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def contract(a: SparseTensor, b: SparseTensor) -> SparseTensor:
    """Jacobian chain product: contracts ``a.in_dims`` against ``b.out_dims``.

    Delta pairs in either operand unify contraction indices, so the
    underlying einsum runs over compressed buffers only: aligned diagonal
    operands cost O(compressed size), never the dense contraction.
    """
    sa, sb = a.structure, b.structure
    if sa.in_dims != sb.out_dims:
        raise ShapeMismatch(f"cannot contract in_dims {sa.in_dims} with out_dims {sb.out_dims}")
    na_out = len(sa.out_dims)
    na = sa.rank
    nb_out = len(sb.out_dims)
    nb_in = len(sb.in_dims)
    # Symbol ids: a's axes are 0..na-1; b's out axes share a's in-axis ids,
    # b's in axes get na..na+nb_in-1.
    ids_b = [na_out + ax for ax in range(nb_out)] + [na + ax for ax in range(nb_in)]
    parent = list(range(na + nb_in))
    for i, j in sa.delta_pairs:
        parent[_find(parent, i)] = _find(parent, j)
    for i, j in sb.delta_pairs:
        parent[_find(parent, ids_b[i])] = _find(parent, ids_b[j])
    letters: dict[int, str] = {}

    def letter(sym: int) -> str:
        root = _find(parent, sym)
        if root not in letters:
            letters[root] = _LETTERS[len(letters)]
        return letters[root]

    sub_a = "".join(letter(ax) for ax in sa.compressed_axes())
    sub_b = "".join(letter(ids_b[ax]) for ax in sb.compressed_axes())
    out_syms = list(range(na_out)) + [na + ax for ax in range(nb_in)]
    out_letters = [letter(s) for s in out_syms]
    # Axes sharing a symbol class survive as a delta pair in the result.
    groups: dict[str, list[int]] = {}
    for ax, lt in enumerate(out_letters):
        groups.setdefault(lt, []).append(ax)
    pairs = []
    sub_o = ""
    for ax, lt in enumerate(out_letters):
        grp = groups[lt]
        if len(grp) > 2:
            raise BadStructure("contraction result needs more than one delta per index class")
        if ax == grp[0]:
            sub_o += lt
        if len(grp) == 2 and ax == grp[0]:
            pairs.append((grp[0], grp[1]))
    out_struct = StructureDescriptor(sa.out_dims, sb.in_dims, tuple(pairs))
    values = np.einsum(f"{sub_a},{sub_b}->{sub_o}", a.values, b.values)
    return _wrap(out_struct, values, fallback=a.fallback or b.fallback)


def add(a: SparseTensor, b: SparseTensor) -> SparseTensor:
    """Sum of two tensors of equal logical shape.

    Identical layouts add buffer-wise and keep their structure; mismatched
    layouts fall back to a densified sum with the ``fallback`` flag set.
    """
    if a.logical_shape != b.logical_shape:
        raise ShapeMismatch(f"cannot add shapes {a.logical_shape} and {b.logical_shape}")
    if a.structure.same_sparsity(b.structure):
        return _wrap(a.structure, a.values + b.values, fallback=a.fallback or b.fallback)
    dense = a.densify() + b.densify()
    s = StructureDescriptor(a.structure.out_dims, a.structure.in_dims)
    return _wrap(s, dense, fallback=True)
