"""Neuron models (LIF, ALIF), the leaky readout, and their step Jacobians.

The forward step functions are plain numpy with hard binary spikes.  The
per-step Jacobians used by the gradient engines are not hand-derived:
each model is expressed as an elemental-operation graph and the
state/parameter Jacobians fall out of reverse vertex elimination, with
the spike threshold differentiated through its smooth surrogate.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .elimination import EliminationOrder, accumulate_jacobian
from .errors import ShapeMismatch
from .graph import (
    CompGraph,
    DEFAULT_SLOPE,
    build_graph,
    heaviside,
    linearize,
    surrogate_grad,
)
from .tensor import SparseTensor, StructureDescriptor, make_tensor


@dataclass
class LIFParams:
    w: np.ndarray  # input weights, n x k
    alpha: float = 0.95
    theta: float = 1.0
    slope: float = DEFAULT_SLOPE
    reset: bool = False  # soft reset u' -= theta * z, off by default

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if self.theta <= 0.0:
            raise ValueError("theta must be positive")

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @property
    def k(self) -> int:
        return self.w.shape[1]


@dataclass
class ALIFParams(LIFParams):
    beta: float = 0.8
    rho: float = 0.96

    def __post_init__(self):
        super().__post_init__()
        if self.beta < 0.0:
            raise ValueError("beta must be non-negative")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must be in (0, 1)")


@dataclass
class NeuronState:
    u: np.ndarray
    z: np.ndarray
    a: np.ndarray | None = None


@dataclass
class ReadoutParams:
    w_out: np.ndarray  # m x n
    kappa: float = 0.95

    def __post_init__(self):
        if not 0.0 < self.kappa < 1.0:
            raise ValueError("kappa must be in (0, 1)")


@dataclass
class Network:
    """Single hidden spiking layer plus a non-spiking leaky readout."""

    kind: str  # "lif" | "alif"
    neuron: LIFParams
    readout: ReadoutParams

    @property
    def n(self) -> int:
        return self.neuron.n

    @property
    def k(self) -> int:
        return self.neuron.k

    @property
    def m(self) -> int:
        return self.readout.w_out.shape[0]


def fresh_state(p: LIFParams, dtype=np.float64) -> NeuronState:
    a = np.zeros(p.n, dtype=dtype) if isinstance(p, ALIFParams) else None
    return NeuronState(np.zeros(p.n, dtype=dtype), np.zeros(p.n, dtype=dtype), a)


def lif_step(state: NeuronState, input_current: np.ndarray, p: LIFParams):
    """One LIF update: u' = alpha*u + I (optionally minus theta*z reset)."""
    if input_current.shape != state.u.shape:
        raise ShapeMismatch("input current shape does not match membrane shape")
    u_next = p.alpha * state.u + input_current
    if p.reset:
        u_next = u_next - p.theta * state.z
    z_next = heaviside(u_next - p.theta)
    return NeuronState(u_next, z_next, None), z_next


def alif_step(state: NeuronState, input_current: np.ndarray, p: ALIFParams):
    """One ALIF update with spike-driven adaptive threshold."""
    if input_current.shape != state.u.shape:
        raise ShapeMismatch("input current shape does not match membrane shape")
    a_next = p.rho * state.a + state.z
    threshold = p.theta + p.beta * a_next
    u_next = p.alpha * state.u + input_current
    if p.reset:
        u_next = u_next - p.theta * state.z
    z_next = heaviside(u_next - threshold)
    return NeuronState(u_next, z_next, a_next), z_next


def readout_step(v: np.ndarray, z: np.ndarray, p: ReadoutParams) -> np.ndarray:
    """Leaky readout integration v' = kappa*v + W_out z."""
    if z.shape[0] != p.w_out.shape[1]:
        raise ShapeMismatch("spike vector does not match readout weights")
    return p.kappa * v + p.w_out @ z


@lru_cache(maxsize=None)
def lif_step_graph(n: int, k: int, slope: float, reset: bool) -> CompGraph:
    """LIF step as an elemental-op program.

    Leaves: state u, presynaptic input x, weights W, decay alpha and a
    threshold vector.  Outputs are the new membrane and the new spikes.
    """
    program = [
        ("current", "matvec", ("W", "x")),
        ("decayed", "scalar_mul", ("alpha", "u")),
        ("integrated", "add", ("decayed", "current")),
    ]
    u_next = "integrated"
    if reset:
        program += [
            ("drive", "subtract", ("u", "theta_vec")),
            ("spike_now", "surrogate_threshold", ("drive",), {"slope": slope}),
            ("reset_term", "scalar_mul", ("theta", "spike_now")),
            ("u_next", "subtract", ("integrated", "reset_term")),
        ]
        u_next = "u_next"
    program += [
        ("over", "subtract", (u_next, "theta_vec")),
        ("z_next", "surrogate_threshold", ("over",), {"slope": slope}),
    ]
    inputs = {
        "u": (n,),
        "x": (k,),
        "W": (n, k),
        "alpha": (),
        "theta": (),
        "theta_vec": (n,),
    }
    return build_graph(program, inputs, [u_next, "z_next"])


@lru_cache(maxsize=None)
def alif_step_graph(n: int, k: int, slope: float, reset: bool) -> CompGraph:
    """ALIF step program over state (u, a).

    The spike feeding the adaptation and the reset is expressed from the
    current state, z = theta-step(u - theta - beta*a), which is exactly
    the spike the forward pass stored at the end of the previous step.
    """
    program = [
        ("adapt", "scalar_mul", ("beta", "a")),
        ("drive0", "subtract", ("u", "theta_vec")),
        ("drive", "subtract", ("drive0", "adapt")),
        ("spike_now", "surrogate_threshold", ("drive",), {"slope": slope}),
        ("decayed_a", "scalar_mul", ("rho", "a")),
        ("a_next", "add", ("decayed_a", "spike_now")),
        ("current", "matvec", ("W", "x")),
        ("decayed", "scalar_mul", ("alpha", "u")),
        ("integrated", "add", ("decayed", "current")),
    ]
    u_next = "integrated"
    if reset:
        program += [
            ("reset_term", "scalar_mul", ("theta", "spike_now")),
            ("u_next", "subtract", ("integrated", "reset_term")),
        ]
        u_next = "u_next"
    program += [
        ("adapt_next", "scalar_mul", ("beta", "a_next")),
        ("thresh_next", "add", ("theta_vec", "adapt_next")),
        ("over", "subtract", (u_next, "thresh_next")),
        ("z_next", "surrogate_threshold", ("over",), {"slope": slope}),
    ]
    inputs = {
        "u": (n,),
        "a": (n,),
        "x": (k,),
        "W": (n, k),
        "alpha": (),
        "rho": (),
        "beta": (),
        "theta": (),
        "theta_vec": (n,),
    }
    return build_graph(program, inputs, [u_next, "a_next", "z_next"])


def _leaf_values(p: LIFParams, state: NeuronState, x: np.ndarray) -> dict:
    vals = {
        "u": state.u,
        "x": x,
        "W": p.w,
        "alpha": np.asarray(p.alpha),
        "theta": np.asarray(p.theta),
        "theta_vec": np.full(p.n, p.theta),
    }
    if isinstance(p, ALIFParams):
        vals["a"] = state.a
        vals["rho"] = np.asarray(p.rho)
        vals["beta"] = np.asarray(p.beta)
    return vals


def _diag_values(t: SparseTensor | None, n: int) -> np.ndarray:
    if t is None:
        return np.zeros(n)
    if not t.structure.delta_pairs:
        raise ShapeMismatch("expected a delta-paired Jacobian block")
    return t.values


def step_jacobians(p: LIFParams, state: NeuronState, x: np.ndarray, smooth: bool = False):
    """Per-step state and parameter Jacobians via reverse vertex elimination.

    Returns (H_I, F): the state-to-state Jacobian (diagonal for LIF,
    per-neuron 2x2 blocks for ALIF) and the state-to-weight Jacobian
    (delta-3 with rows equal to the presynaptic input), both in
    compressed form.
    """
    n, k = p.n, p.k
    u_next = "u_next" if p.reset else "integrated"
    if isinstance(p, ALIFParams):
        g = alif_step_graph(n, k, p.slope, p.reset)
    else:
        g = lif_step_graph(n, k, p.slope, p.reset)
    lin = linearize(g, _leaf_values(p, state, x), smooth=smooth)
    jac = accumulate_jacobian(lin, EliminationOrder("reverse"))
    if not isinstance(p, ALIFParams):
        h_i = jac.by_name("u", u_next)
        f = jac.by_name("W", u_next)
        return h_i, f
    # assemble per-neuron 2x2 blocks over state order (u, a)
    blocks = np.zeros((n, 2, 2))
    blocks[:, 0, 0] = _diag_values(jac.by_name("u", u_next), n)
    blocks[:, 0, 1] = _diag_values(jac.by_name("a", u_next), n)
    blocks[:, 1, 0] = _diag_values(jac.by_name("u", "a_next"), n)
    blocks[:, 1, 1] = _diag_values(jac.by_name("a", "a_next"), n)
    h_struct = StructureDescriptor((n, 2), (n, 2), ((0, 2),), block_dims=(1, 3))
    h_i = make_tensor((n, 2, n, 2), h_struct, blocks)
    f_w = jac.by_name("W", u_next)
    f_vals = np.zeros((n, 2, k))
    f_vals[:, 0, :] = f_w.values if f_w is not None else 0.0
    f_struct = StructureDescriptor((n, 2), (n, k), ((0, 2),), block_dims=(1,))
    f = make_tensor((n, 2, n, k), f_struct, f_vals)
    return h_i, f
