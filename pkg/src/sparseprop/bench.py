"""Step-time and peak-memory benchmarks across the four gradient methods.

Timing measures wall clock over a full-sequence gradient computation and
divides by the number of steps; peak memory is the arena high-water mark,
which is deterministic for a given configuration.  Input generation and
network initialization happen outside the measured region.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .arena import arena
from .datasets import sample_events, sample_rate_patterns
from .gradients import ENGINES
from .training import NetworkSpec, init_network

CSV_HEADER = ["method", "n_hidden", "timesteps", "mean_step_ms", "std_step_ms",
              "peak_bytes", "seed"]


@dataclass
class BenchConfig:
    method: str = "eprop-sparse"
    n_hidden: tuple[int, ...] = (16, 32, 64, 128, 256)
    timesteps: tuple[int, ...] = (10, 100, 500, 1000, 2000)
    n_inputs: int = 140
    n_classes: int = 20
    repeats: int = 3
    warmup: int = 1
    precision: str = "f32"
    seed: int = 0
    neuron: str = "lif"
    out_path: str | None = None

    def __post_init__(self):
        if self.repeats < 3:
            raise ValueError("repeats must be >= 3")
        if self.warmup < 1:
            raise ValueError("warmup must be >= 1")


@dataclass
class BenchRecord:
    method: str
    n_hidden: int
    timesteps: int
    mean_step_ms: float
    std_step_ms: float
    peak_bytes: int
    seed: int

    def row(self):
        return [self.method, self.n_hidden, self.timesteps,
                f"{self.mean_step_ms:.6f}", f"{self.std_step_ms:.6f}",
                self.peak_bytes, self.seed]


def _bench_inputs(cfg: BenchConfig, n_steps: int, dtype):
    rng = np.random.default_rng(cfg.seed)
    rates = sample_rate_patterns(1, cfg.n_inputs, rng)[0]
    x = sample_events(rates, n_steps, rng).astype(dtype)
    return x, 0


def _make_network(cfg: BenchConfig, n: int):
    spec = NetworkSpec(kind=cfg.neuron, n_hidden=n, n_inputs=cfg.n_inputs,
                       n_classes=cfg.n_classes, precision=cfg.precision,
                       seed=cfg.seed)
    return init_network(spec)


def bench_time(cfg: BenchConfig) -> list[BenchRecord]:
    """Mean wall-clock milliseconds per time step, warmup excluded."""
    engine = ENGINES[cfg.method]
    records = []
    for n in cfg.n_hidden:
        net = _make_network(cfg, n)
        for n_steps in cfg.timesteps:
            dtype = net.neuron.w.dtype
            x, label = _bench_inputs(cfg, n_steps, dtype)
            for _ in range(cfg.warmup):
                engine(net, x, label)
            samples = []
            for _ in range(cfg.repeats):
                t0 = time.perf_counter()
                engine(net, x, label)
                samples.append((time.perf_counter() - t0) * 1000.0 / n_steps)
            records.append(BenchRecord(cfg.method, n, n_steps,
                                       float(np.mean(samples)),
                                       float(np.std(samples)),
                                       peak_bytes=_peak_once(engine, net, x, label,
                                                             cfg.precision),
                                       seed=cfg.seed))
    return records


def _peak_once(engine, net, x, label, precision) -> int:
    with arena(precision) as a:
        engine(net, x, label)
    return a.high_water_bytes


def bench_memory(cfg: BenchConfig) -> list[BenchRecord]:
    """Arena high-water bytes over one full-sequence gradient computation."""
    engine = ENGINES[cfg.method]
    records = []
    for n in cfg.n_hidden:
        net = _make_network(cfg, n)
        for n_steps in cfg.timesteps:
            dtype = net.neuron.w.dtype
            x, label = _bench_inputs(cfg, n_steps, dtype)
            peak = _peak_once(engine, net, x, label, cfg.precision)
            records.append(BenchRecord(cfg.method, n, n_steps, 0.0, 0.0,
                                       peak, cfg.seed))
    return records


def write_records(records: list[BenchRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for rec in records:
            writer.writerow(rec.row())
