"""Network assembly, loss, optimizers, and the online training loop."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .datasets import SpikeDataset
from .errors import ShapeMismatch
from .gradients import ENGINES, network_loss, softmax_cross_entropy
from .neurons import ALIFParams, LIFParams, Network, ReadoutParams

_DTYPES = {"f32": np.float32, "f64": np.float64}


@dataclass
class NetworkSpec:
    kind: str = "lif"
    n_hidden: int = 64
    n_inputs: int = 140
    n_classes: int = 3
    alpha: float = 0.95
    theta: float = 1.0
    slope: float = 10.0
    beta: float = 0.8
    rho: float = 0.96
    kappa: float = 0.95
    reset: bool = False
    precision: str = "f64"
    seed: int = 0


def init_network(spec: NetworkSpec) -> Network:
    """Seeded uniform +-1/sqrt(fan_in) initialization of both weight blocks."""
    dtype = _DTYPES[spec.precision]
    rng = np.random.default_rng(spec.seed)
    bound_w = 1.0 / np.sqrt(spec.n_inputs)
    bound_out = 1.0 / np.sqrt(spec.n_hidden)
    w = rng.uniform(-bound_w, bound_w, size=(spec.n_hidden, spec.n_inputs)).astype(dtype)
    w_out = rng.uniform(-bound_out, bound_out, size=(spec.n_classes, spec.n_hidden)).astype(dtype)
    if spec.kind == "alif":
        neuron = ALIFParams(w, spec.alpha, spec.theta, spec.slope, spec.reset,
                            spec.beta, spec.rho)
    elif spec.kind == "lif":
        neuron = LIFParams(w, spec.alpha, spec.theta, spec.slope, spec.reset)
    else:
        raise ValueError(f"unknown neuron kind {spec.kind!r}")
    return Network(spec.kind, neuron, ReadoutParams(w_out, spec.kappa))


def loss_and_grad(readout_sum: np.ndarray, label: int):
    """Softmax cross-entropy on the time-summed readout."""
    return softmax_cross_entropy(readout_sum, label)


def sgd_update(params: dict, grads: dict, lr: float) -> dict:
    out = {}
    for key, p in params.items():
        g = grads[key]
        if g.shape != p.shape:
            raise ShapeMismatch(f"gradient for {key!r} has shape {g.shape}, expected {p.shape}")
        out[key] = p - lr * g
    return out


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_update(params: dict, grads: dict, lr: float, state: AdamState,
                beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> dict:
    state.t += 1
    out = {}
    for key, p in params.items():
        g = grads[key]
        if g.shape != p.shape:
            raise ShapeMismatch(f"gradient for {key!r} has shape {g.shape}, expected {p.shape}")
        m = state.m.get(key, np.zeros_like(p))
        v = state.v.get(key, np.zeros_like(p))
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        state.m[key], state.v[key] = m, v
        m_hat = m / (1 - beta1 ** state.t)
        v_hat = v / (1 - beta2 ** state.t)
        out[key] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
    return out


@dataclass
class MetricsRow:
    epoch: int
    step: int
    loss: float
    accuracy: float


def _set_weights(net: Network, params: dict) -> None:
    net.neuron.w = params["w"].astype(net.neuron.w.dtype)
    net.readout.w_out = params["w_out"].astype(net.readout.w_out.dtype)


def evaluate(net: Network, dataset: SpikeDataset) -> tuple[float, float]:
    """Mean loss and accuracy over all samples."""
    dtype = net.neuron.w.dtype
    losses, correct = [], 0
    for s in range(dataset.n_samples):
        x = dataset.input_array(s, dtype=dtype)
        label = dataset.label_of(s)
        loss, logits, _ = network_loss(net, x, label)
        losses.append(loss)
        correct += int(np.argmax(logits) == label)
    return float(np.mean(losses)), correct / dataset.n_samples


def train(spec: NetworkSpec, dataset: SpikeDataset, method: str = "eprop-sparse",
          optimizer: str = "sgd", epochs: int = 1, lr: float = 0.01,
          max_updates: int | None = None, metrics_path=None):
    """Single-sample online training loop; deterministic per (spec, seed).

    For the e-prop methods each sample is processed strictly online: the
    traces and accumulators update step by step and no state history is
    stored.  Returns (network, metrics rows).
    """
    if method not in ENGINES:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(ENGINES)}")
    engine = ENGINES[method]
    net = init_network(spec)
    adam = AdamState()
    metrics: list[MetricsRow] = []
    updates = 0
    dtype = net.neuron.w.dtype
    inputs = [dataset.input_array(s, dtype=dtype) for s in range(dataset.n_samples)]
    labels = [dataset.label_of(s) for s in range(dataset.n_samples)]
    done = False
    for epoch in range(epochs):
        ep_losses, ep_correct = [], 0
        for s in range(dataset.n_samples):
            result = engine(net, inputs[s], labels[s])
            params = {"w": net.neuron.w, "w_out": net.readout.w_out}
            if optimizer == "adam":
                params = adam_update(params, result.grads, lr, adam)
            else:
                params = sgd_update(params, result.grads, lr)
            _set_weights(net, params)
            ep_losses.append(result.loss)
            ep_correct += int(result.prediction == labels[s])
            updates += 1
            metrics.append(MetricsRow(epoch, updates, result.loss,
                                      ep_correct / len(ep_losses)))
            if max_updates is not None and updates >= max_updates:
                done = True
                break
        if done:
            break
    if metrics_path is not None:
        with open(metrics_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "step", "loss", "accuracy"])
            for row in metrics:
                writer.writerow([row.epoch, row.step, f"{row.loss:.6f}", f"{row.accuracy:.4f}"])
    return net, metrics
