"""Spike-event datasets: synthetic generation, file I/O, channel pooling.

The on-disk format (SPIKES v1) is a plain-text event list:

    SPIKES v1 <n_samples> <n_channels> <n_steps>
    <sample> <t> <channel>        # one line per event
    LABELS
    <sample> <class>              # one line per sample

Canonical ordering sorts events by (sample, t, channel), which makes the
save/load round trip byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotDivisible, ParseError, RangeError


@dataclass
class SpikeDataset:
    n_samples: int
    n_channels: int
    n_steps: int
    events: list[tuple[int, int, int]]
    labels: list[tuple[int, int]]
    weights: list[float] | None = None  # event multiplicities after pooling

    def __post_init__(self):
        for s, t, c in self.events:
            if not 0 <= t < self.n_steps:
                raise RangeError(f"event time {t} out of range [0, {self.n_steps})")
            if not 0 <= c < self.n_channels:
                raise RangeError(f"event channel {c} out of range [0, {self.n_channels})")
            if not 0 <= s < self.n_samples:
                raise RangeError(f"event sample {s} out of range [0, {self.n_samples})")
        if len(self.labels) != self.n_samples:
            raise RangeError("every sample needs exactly one label")

    def label_of(self, sample: int) -> int:
        return dict(self.labels)[sample]

    def input_array(self, sample: int, dtype=np.float64) -> np.ndarray:
        """Dense (n_steps, n_channels) input currents for one sample."""
        out = np.zeros((self.n_steps, self.n_channels), dtype=dtype)
        for i, (s, t, c) in enumerate(self.events):
            if s == sample:
                out[t, c] += self.weights[i] if self.weights is not None else 1.0
        return out

    def total_spikes(self, sample: int) -> float:
        if self.weights is None:
            return float(sum(1 for s, _, _ in self.events if s == sample))
        return float(sum(w for (s, _, _), w in zip(self.events, self.weights) if s == sample))


def sample_rate_patterns(n_classes: int, n_channels: int, rng) -> np.ndarray:
    """Fixed per-class firing-rate patterns, rates in [0.01, 0.2] spikes/step."""
    return rng.uniform(0.01, 0.2, size=(n_classes, n_channels))


def sample_events(rates: np.ndarray, n_steps: int, rng) -> np.ndarray:
    """Independent per-step binary events at the given per-channel rates."""
    return rng.random((n_steps, rates.shape[0])) < rates


def generate_poisson_dataset(n_samples: int, n_channels: int, n_steps: int,
                             n_classes: int, seed: int) -> SpikeDataset:
    """Synthetic classification task; deterministic per seed."""
    rng = np.random.default_rng(seed)
    rates = sample_rate_patterns(n_classes, n_channels, rng)
    events = []
    labels = []
    for s in range(n_samples):
        label = int(rng.integers(n_classes))
        labels.append((s, label))
        grid = sample_events(rates[label], n_steps, rng)
        for t, c in zip(*np.nonzero(grid)):
            events.append((s, int(t), int(c)))
    return SpikeDataset(n_samples, n_channels, n_steps, events, labels)


def save_spike_dataset(ds: SpikeDataset, path) -> None:
    if ds.weights is not None:
        raise ParseError("SPIKES v1 stores unit events only; save before pooling")
    lines = [f"SPIKES v1 {ds.n_samples} {ds.n_channels} {ds.n_steps}"]
    for s, t, c in sorted(ds.events):
        lines.append(f"{s} {t} {c}")
    lines.append("LABELS")
    for s, cls in sorted(ds.labels):
        lines.append(f"{s} {cls}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_spike_dataset(path) -> SpikeDataset:
    with open(path) as fh:
        raw = fh.read().splitlines()
    if not raw:
        raise ParseError("line 1: empty file")
    header = raw[0].split()
    if len(header) != 5 or header[0] != "SPIKES" or header[1] != "v1":
        raise ParseError("line 1: expected 'SPIKES v1 <n_samples> <n_channels> <n_steps>'")
    try:
        n_samples, n_channels, n_steps = (int(x) for x in header[2:])
    except ValueError:
        raise ParseError("line 1: header counts must be integers") from None
    events = []
    labels = []
    section = "events"
    for lineno, line in enumerate(raw[1:], start=2):
        if not line.strip():
            continue
        if line.strip() == "LABELS":
            section = "labels"
            continue
        parts = line.split()
        if section == "events":
            if len(parts) != 3:
                raise ParseError(f"line {lineno}: expected '<sample> <t> <channel>'")
            try:
                events.append(tuple(int(x) for x in parts))
            except ValueError:
                raise ParseError(f"line {lineno}: non-integer event field") from None
        else:
            if len(parts) != 2:
                raise ParseError(f"line {lineno}: expected '<sample> <class>'")
            try:
                labels.append(tuple(int(x) for x in parts))
            except ValueError:
                raise ParseError(f"line {lineno}: non-integer label field") from None
    return SpikeDataset(n_samples, n_channels, n_steps, events, labels)


def pool_channels(ds: SpikeDataset, factor: int) -> SpikeDataset:
    """Sum groups of ``factor`` adjacent channels into one input channel.

    Pooled inputs are integer-valued currents (event counts), not
    re-binarized spikes.
    """
    if ds.n_channels % factor != 0:
        raise NotDivisible(f"{ds.n_channels} channels not divisible by factor {factor}")
    counts: dict[tuple[int, int, int], float] = {}
    for i, (s, t, c) in enumerate(ds.events):
        w = ds.weights[i] if ds.weights is not None else 1.0
        key = (s, t, c // factor)
        counts[key] = counts.get(key, 0.0) + w
    keys = sorted(counts)
    return SpikeDataset(
        ds.n_samples,
        ds.n_channels // factor,
        ds.n_steps,
        keys,
        list(ds.labels),
        weights=[counts[k] for k in keys],
    )
