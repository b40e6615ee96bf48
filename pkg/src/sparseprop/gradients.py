"""The four gradient engines and their oracles.

All engines compute the same quantity -- the gradient of a softmax
cross-entropy loss on the time-summed readout with respect to the input
weights and the readout weights -- for a single-hidden-layer feed-forward
spiking network:

* ``eprop_sparse_gradient``: forward-in-time trace recursion executed
  entirely on compressed delta-structured tensors (the point of the
  package),
* ``naive_eprop_gradient``: the same recursion on densified tensors with
  full contractions (performance foil),
* ``rtrl_gradient_dense``: forward-mode accumulation with hand-built
  dense state Jacobians,
* ``bptt_gradient``: reverse-in-time adjoint sweep over stored states.

On feed-forward networks all four agree to floating-point rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arena import arena_stats as _arena_stats, current_arena as _current_arena, track as _track
from .errors import (
    LabelOutOfRange,
    ResourceLimit,
    ShapeMismatch,
    SpikeFlipDetected,
    StructureFallback,
)
from .graph import heaviside, surrogate_grad, surrogate_smooth
from .neurons import ALIFParams, Network, step_jacobians, NeuronState
from .tensor import SparseTensor, StructureDescriptor, add, contract, zero_tensor


@dataclass
class TraceState:
    """Compressed eligibility tensor G_t plus a proof it stayed compressed."""

    G: SparseTensor
    structure_intact: bool = True


@dataclass
class DeviationStats:
    median: float
    q_low: float
    q_high: float


@dataclass
class GradResult:
    loss: float
    grads: dict[str, np.ndarray]
    readout_sum: np.ndarray
    live_bytes_per_step: list[int] | None = None

    @property
    def prediction(self) -> int:
        return int(np.argmax(self.readout_sum))


def softmax_cross_entropy(v: np.ndarray, label: int):
    """Loss and dL/dv for logits v; dL/dv = softmax(v) - onehot(label)."""
    if not 0 <= label < v.shape[0]:
        raise LabelOutOfRange(f"label {label} out of range for {v.shape[0]} classes")
    shifted = v - np.max(v)
    logz = np.log(np.sum(np.exp(shifted)))
    loss = float(logz - shifted[label])
    grad = np.exp(shifted - logz)
    grad[label] -= 1.0
    return loss, grad


def trace_structure(p, dtype=np.float64) -> StructureDescriptor:
    n, k = p.n, p.k
    if isinstance(p, ALIFParams):
        return StructureDescriptor((n, 2), (n, k), ((0, 2),), block_dims=(1,))
    return StructureDescriptor((n,), (n, k), ((0, 1),))


def initial_trace(p, dtype=np.float64) -> TraceState:
    return TraceState(zero_tensor(trace_structure(p), dtype=dtype))


def eprop_trace_update(g_prev: TraceState, h_i: SparseTensor, f: SparseTensor) -> TraceState:
    """One trace step G_t = H_I G_{t-1} + F_t, entirely in compressed form."""
    if not h_i.structure.delta_pairs or not f.structure.delta_pairs:
        raise StructureFallback("trace update received a densified operand")
    g = add(contract(h_i, g_prev.G), f)
    return TraceState(g, g_prev.structure_intact and not g.fallback)


def learning_signal(dl_dv: np.ndarray, readout, surrogate_grads: np.ndarray) -> np.ndarray:
    """Per-step dL/du for the hidden layer: (dL/dv . W_out) * sigma'."""
    if dl_dv.shape[0] != readout.w_out.shape[0]:
        raise ShapeMismatch("dL/dv does not match readout width")
    return (readout.w_out.T @ dl_dv) * surrogate_grads


def accumulate_param_grad(acc: np.ndarray, c_t: np.ndarray, g_t: TraceState) -> np.ndarray:
    """acc[i,j] += c_t[i] * G_t[i,j] (u-component for ALIF blocks)."""
    vals = g_t.G.values
    u_vals = vals[:, 0, :] if vals.ndim == 3 else vals
    if acc.shape != u_vals.shape or c_t.shape[0] != acc.shape[0]:
        raise ShapeMismatch("accumulator, signal and trace shapes disagree")
    acc += c_t[:, None] * u_vals
    return acc


def _spike(x: np.ndarray, slope: float, smooth: bool) -> np.ndarray:
    return surrogate_smooth(x, slope) if smooth else heaviside(x)


def _step_state(net: Network, u, a, x_t, smooth: bool):
    """Shared forward update; returns (u', a', z', sg') with z' = spike(u'-A')."""
    p = net.neuron
    beta = p.beta if isinstance(p, ALIFParams) else 0.0
    rho = p.rho if isinstance(p, ALIFParams) else 0.0
    z = _spike(u - p.theta - beta * a, p.slope, smooth)
    a_next = rho * a + z
    u_next = p.alpha * u + net.neuron.w @ x_t
    if p.reset:
        u_next = u_next - p.theta * z
    drive = u_next - p.theta - beta * a_next
    return u_next, a_next, _spike(drive, p.slope, smooth), surrogate_grad(drive, p.slope)


def eprop_sparse_gradient(net: Network, x_seq: np.ndarray, label: int,
                          smooth: bool = False) -> GradResult:
    """Online sparse e-prop: compressed traces, constant state across steps.

    The readout decay is folded in by kappa-filtering the
    surrogate-weighted traces, so the result equals the BPTT gradient of
    the full loss while touching only O(n*k) state per step.
    """
    p = net.neuron
    r = net.readout
    dtype = net.neuron.w.dtype
    n, k, m = net.n, net.k, net.m
    T = x_seq.shape[0]
    track = _track
    u = np.zeros(n, dtype=dtype)
    a = np.zeros(n, dtype=dtype)
    trace = initial_trace(p, dtype=dtype)
    xbar = track(np.zeros((n, k), dtype=dtype))   # kappa-filtered dz/dW
    xsum = track(np.zeros((n, k), dtype=dtype))
    zbar = np.zeros(n, dtype=dtype)
    zsum = np.zeros(n, dtype=dtype)
    v = np.zeros(m, dtype=dtype)
    s = np.zeros(m, dtype=dtype)
    live = [] if _current_arena() is not None else None
    beta = p.beta if isinstance(p, ALIFParams) else 0.0
    for t in range(T):
        x_t = x_seq[t]
        state = NeuronState(u, _spike(u - p.theta - beta * a, p.slope, smooth), a)
        h_i, f = step_jacobians(p, state, x_t, smooth=smooth)
        trace = eprop_trace_update(trace, h_i, f)
        u, a, z, sg = _step_state(net, u, a, x_t, smooth)
        v = r.kappa * v + r.w_out @ z
        s = s + v
        g_vals = trace.G.values
        if g_vals.ndim == 3:
            x_step = sg[:, None] * (g_vals[:, 0, :] - beta * g_vals[:, 1, :])
        else:
            x_step = sg[:, None] * g_vals
        xbar *= r.kappa
        xbar += x_step
        xsum += xbar
        zbar = r.kappa * zbar + z
        zsum = zsum + zbar
        if live is not None:
            live.append(_arena_stats().live_bytes)
    loss, g = softmax_cross_entropy(s, label)
    w_sig = net.readout.w_out.T @ g
    grads = {
        "w": (w_sig[:, None] * xsum).astype(dtype),
        "w_out": np.outer(g, zsum).astype(dtype),
    }
    if not trace.structure_intact:
        raise StructureFallback("trace densified during a feed-forward run")
    return GradResult(loss, grads, s, live)


def bptt_gradient(net: Network, x_seq: np.ndarray, label: int,
                  smooth: bool = False) -> GradResult:
    """Offline reverse sweep over stored forward states (memory O(nT))."""
    p = net.neuron
    r = net.readout
    dtype = net.neuron.w.dtype
    n, m = net.n, net.m
    T = x_seq.shape[0]
    track = _track
    u = np.zeros(n, dtype=dtype)
    a = np.zeros(n, dtype=dtype)
    us = track(np.zeros((T, n), dtype=dtype))
    zs = track(np.zeros((T, n), dtype=dtype))
    sgs = track(np.zeros((T, n), dtype=dtype))
    v = np.zeros(m, dtype=dtype)
    s = np.zeros(m, dtype=dtype)
    for t in range(T):
        u, a, z, sg = _step_state(net, u, a, x_seq[t], smooth)
        us[t], zs[t], sgs[t] = u, z, sg
        v = r.kappa * v + r.w_out @ z
        s = s + v
    loss, g = softmax_cross_entropy(s, label)
    is_alif = isinstance(p, ALIFParams)
    grad_w = track(np.zeros_like(p.w))
    grad_w_out = track(np.zeros_like(r.w_out))
    lam_u = np.zeros(n, dtype=dtype)
    lam_a = np.zeros(n, dtype=dtype)
    c_t = 0.0
    for t in range(T - 1, -1, -1):
        c_t = 1.0 + r.kappa * c_t  # sum_{s>=t} kappa^(s-t)
        lam_v = c_t * g
        mu = r.w_out.T @ lam_v
        grad_w_out += np.outer(lam_v, zs[t])
        xi = mu
        if is_alif:
            xi = xi + lam_a
        if p.reset:
            xi = xi - p.theta * lam_u
        new_lam_u = p.alpha * lam_u + xi * sgs[t]
        if is_alif:
            lam_a = p.rho * lam_a - p.beta * xi * sgs[t]
        lam_u = new_lam_u
        grad_w += np.outer(lam_u, x_seq[t])
    return GradResult(loss, {"w": grad_w, "w_out": grad_w_out}, s)


def _check_cap(nbytes: int, cap_bytes: float) -> None:
    if nbytes > cap_bytes:
        raise ResourceLimit(f"dense buffers need {nbytes} bytes, cap is {int(cap_bytes)}")


def rtrl_gradient_dense(net: Network, x_seq: np.ndarray, label: int,
                        smooth: bool = False, cap_bytes: float = 8e9) -> GradResult:
    """Dense forward-mode RTRL: full H_t and G_t tensors, memory O(n^2 k)."""
    p = net.neuron
    r = net.readout
    dtype = net.neuron.w.dtype
    n, k, m = net.n, net.k, net.m
    T = x_seq.shape[0]
    is_alif = isinstance(p, ALIFParams)
    sdim = 2 * n if is_alif else n
    _check_cap(3 * sdim * n * k * dtype.itemsize, cap_bytes)
    track = _track
    u = np.zeros(n, dtype=dtype)
    a = np.zeros(n, dtype=dtype)
    big_g = track(np.zeros((sdim, n, k), dtype=dtype))
    xbar = track(np.zeros((n, n, k), dtype=dtype))
    xsum = track(np.zeros((n, n, k), dtype=dtype))
    zbar = np.zeros(n, dtype=dtype)
    zsum = np.zeros(n, dtype=dtype)
    v = np.zeros(m, dtype=dtype)
    s = np.zeros(m, dtype=dtype)
    beta = p.beta if is_alif else 0.0
    idx = np.arange(n)
    for t in range(T):
        sg_prev = surrogate_grad(u - p.theta - beta * a, p.slope)
        h = np.zeros((sdim, sdim), dtype=dtype)
        h[idx, idx] = p.alpha
        if p.reset:
            h[idx, idx] -= p.theta * sg_prev
        if is_alif:
            if p.reset:
                h[idx, n + idx] = p.theta * beta * sg_prev
            h[n + idx, idx] = sg_prev
            h[n + idx, n + idx] = p.rho - beta * sg_prev
        big_g = track(np.tensordot(h, big_g, axes=1))
        big_g[idx, idx, :] += x_seq[t]
        u, a, z, sg = _step_state(net, u, a, x_seq[t], smooth)
        v = r.kappa * v + r.w_out @ z
        s = s + v
        x_step = sg[:, None, None] * big_g[:n]
        if is_alif:
            x_step = x_step - beta * sg[:, None, None] * big_g[n:]
        xbar *= r.kappa
        xbar += x_step
        xsum += xbar
        zbar = r.kappa * zbar + z
        zsum = zsum + zbar
    loss, g = softmax_cross_entropy(s, label)
    w_sig = r.w_out.T @ g
    grad_w = np.tensordot(w_sig, xsum, axes=1).astype(dtype)
    return GradResult(loss, {"w": grad_w, "w_out": np.outer(g, zsum).astype(dtype)}, s)


def naive_eprop_gradient(net: Network, x_seq: np.ndarray, label: int,
                         smooth: bool = False, cap_bytes: float = 8e9) -> GradResult:
    """Dense e-prop foil: the sparse recursion with densified H_I, F and G.

    Exists solely to show what the compressed algebra saves; results
    match the sparse engine to rounding.
    """
    p = net.neuron
    r = net.readout
    dtype = net.neuron.w.dtype
    n, k, m = net.n, net.k, net.m
    T = x_seq.shape[0]
    is_alif = isinstance(p, ALIFParams)
    _check_cap((4 if is_alif else 3) * n * n * k * dtype.itemsize * (2 if is_alif else 1),
               cap_bytes)
    track = _track
    u = np.zeros(n, dtype=dtype)
    a = np.zeros(n, dtype=dtype)
    beta = p.beta if is_alif else 0.0
    if is_alif:
        big_g = track(np.zeros((n, 2, n, k), dtype=dtype))
    else:
        big_g = track(np.zeros((n, n, k), dtype=dtype))
    xbar = track(np.zeros((n, n, k), dtype=dtype))
    xsum = track(np.zeros((n, n, k), dtype=dtype))
    zbar = np.zeros(n, dtype=dtype)
    zsum = np.zeros(n, dtype=dtype)
    v = np.zeros(m, dtype=dtype)
    s = np.zeros(m, dtype=dtype)
    for t in range(T):
        x_t = x_seq[t]
        state = NeuronState(u, _spike(u - p.theta - beta * a, p.slope, smooth), a)
        h_i, f = step_jacobians(p, state, x_t, smooth=smooth)
        h_dense = track(h_i.densify().astype(dtype))
        f_dense = track(f.densify().astype(dtype))
        if is_alif:
            big_g = track(np.einsum("ipjq,jqab->ipab", h_dense, big_g) + f_dense)
        else:
            big_g = track(np.einsum("ij,jab->iab", h_dense, big_g) + f_dense)
        u, a, z, sg = _step_state(net, u, a, x_t, smooth)
        v = r.kappa * v + r.w_out @ z
        s = s + v
        if is_alif:
            x_step = sg[:, None, None] * (big_g[:, 0] - beta * big_g[:, 1])
        else:
            x_step = sg[:, None, None] * big_g
        xbar *= r.kappa
        xbar += x_step
        xsum += xbar
        zbar = r.kappa * zbar + z
        zsum = zsum + zbar
    loss, g = softmax_cross_entropy(s, label)
    w_sig = r.w_out.T @ g
    grad_w = np.tensordot(w_sig, xsum, axes=1).astype(dtype)
    return GradResult(loss, {"w": grad_w, "w_out": np.outer(g, zsum).astype(dtype)}, s)


def network_loss(net: Network, x_seq: np.ndarray, label: int, smooth: bool = False):
    """Forward-only loss evaluation; also returns the binary spike raster."""
    p = net.neuron
    r = net.readout
    dtype = net.neuron.w.dtype
    u = np.zeros(net.n, dtype=dtype)
    a = np.zeros(net.n, dtype=dtype)
    v = np.zeros(net.m, dtype=dtype)
    s = np.zeros(net.m, dtype=dtype)
    raster = np.zeros((x_seq.shape[0], net.n), dtype=bool)
    for t in range(x_seq.shape[0]):
        u, a, z, _ = _step_state(net, u, a, x_seq[t], smooth)
        raster[t] = z > 0.5
        v = r.kappa * v + r.w_out @ z
        s = s + v
    loss, _ = softmax_cross_entropy(s, label)
    return loss, s, raster


def central_difference(f, theta: np.ndarray, h: float) -> np.ndarray:
    """Plain central-difference gradient of a scalar function."""
    theta = np.asarray(theta, dtype=float)
    grad = np.zeros_like(theta)
    it = np.nditer(theta, flags=["multi_index"])
    for _ in it:
        ix = it.multi_index
        saved = theta[ix]
        theta[ix] = saved + h
        fp = f(theta)
        theta[ix] = saved - h
        fm = f(theta)
        theta[ix] = saved
        grad[ix] = (fp - fm) / (2.0 * h)
    return grad


def finite_difference_gradient(net: Network, x_seq: np.ndarray, label: int,
                               h: float = 1e-6, smooth: bool = True) -> GradResult:
    """Central differences per parameter; the independent gradient oracle.

    With hard thresholds the loss is piecewise constant in the hidden
    weights, so any spike flip between the two perturbed evaluations
    raises SpikeFlipDetected instead of returning a silently wrong value.
    """
    base_loss, s, _ = network_loss(net, x_seq, label, smooth)
    grads = {}
    for name in ("w", "w_out"):
        holder = net.neuron if name == "w" else net.readout
        attr = "w" if name == "w" else "w_out"
        theta = getattr(holder, attr)
        grad = np.zeros_like(theta, dtype=float)
        it = np.nditer(theta, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            saved = theta[ix]
            theta[ix] = saved + h
            fp, _, rp = network_loss(net, x_seq, label, smooth)
            theta[ix] = saved - h
            fm, _, rm = network_loss(net, x_seq, label, smooth)
            theta[ix] = saved
            if not smooth and not np.array_equal(rp, rm):
                raise SpikeFlipDetected(
                    f"spike decision flipped while perturbing {name}{ix}"
                )
            grad[ix] = (fp - fm) / (2.0 * h)
        grads[name] = grad
    return GradResult(base_loss, grads, s)


def gradient_deviation_stats(g1, g2) -> DeviationStats:
    """Median and 2.5/97.5 quantiles of |g1 - g2| over all parameters."""

    def flat(g):
        if isinstance(g, GradResult):
            g = g.grads
        if isinstance(g, dict):
            return np.concatenate([np.asarray(g[k]).ravel() for k in sorted(g)])
        return np.asarray(g).ravel()

    a, b = flat(g1), flat(g2)
    if a.shape != b.shape:
        raise ShapeMismatch("gradient shapes disagree")
    delta = np.abs(a - b).astype(np.float64)
    lo, med, hi = np.quantile(delta, [0.025, 0.5, 0.975], method="linear")
    return DeviationStats(float(med), float(lo), float(hi))


ENGINES = {
    "eprop-sparse": eprop_sparse_gradient,
    "eprop-naive": naive_eprop_gradient,
    "rtrl": rtrl_gradient_dense,
    "bptt": bptt_gradient,
}
