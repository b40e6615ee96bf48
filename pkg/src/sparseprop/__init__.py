"""Sparse automatic differentiation for online synaptic plasticity.

Per-step Jacobians of arbitrary discrete-time neuron models are derived
by tensor-valued vertex elimination on an elemental-operation graph; the
eligibility-trace recursion then runs entirely on compressed
Kronecker-delta tensors, giving online gradients with constant-in-time
memory that match backpropagation through time exactly on feed-forward
networks.
"""

from .arena import Arena, ArenaStats, arena, arena_stats, track
from .elimination import EliminationOrder, JacobianSet, accumulate_jacobian, eliminate_vertex
from .errors import SparsePropError
from .gradients import (
    ENGINES,
    DeviationStats,
    TraceState,
    bptt_gradient,
    eprop_sparse_gradient,
    eprop_trace_update,
    finite_difference_gradient,
    gradient_deviation_stats,
    naive_eprop_gradient,
    rtrl_gradient_dense,
)
from .graph import CompGraph, build_graph, linearize, local_partials, topo_order
from .neurons import (
    ALIFParams,
    LIFParams,
    Network,
    NeuronState,
    ReadoutParams,
    alif_step,
    lif_step,
    readout_step,
    step_jacobians,
)
from .tensor import SparseTensor, StructureDescriptor, add, contract, make_tensor

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
