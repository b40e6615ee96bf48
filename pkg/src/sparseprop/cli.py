"""Command-line entry point: gradcheck, bench, train, gen-data."""

from __future__ import annotations

import argparse
import csv
import sys

from .bench import BenchConfig, bench_memory, bench_time, write_records
from .datasets import generate_poisson_dataset, load_spike_dataset, save_spike_dataset
from .errors import SparsePropError
from .gradients import bptt_gradient, eprop_sparse_gradient, gradient_deviation_stats
from .training import NetworkSpec, evaluate, init_network, train

GRADCHECK_HEADER = ["model", "precision", "n", "T", "seed", "median", "q2.5", "q97.5"]


def _apply_config_file(args: argparse.Namespace, path: str) -> None:
    """key=value lines override parsed flag values."""
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not hasattr(args, key):
                raise SparsePropError(f"unknown config key {key!r}")
            current = getattr(args, key)
            if isinstance(current, bool):
                value = value.strip().lower() in ("1", "true", "yes")
            elif isinstance(current, int):
                value = int(value)
            elif isinstance(current, float):
                value = float(value)
            else:
                value = value.strip()
            setattr(args, key, value)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--neuron", choices=["lif", "alif"], default="lif")
    sub.add_argument("--hidden", type=int, default=64)
    sub.add_argument("--steps", type=int, default=100)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--precision", choices=["f32", "f64"], default="f64")
    sub.add_argument("--out", default=None)
    sub.add_argument("--config", default=None, help="key=value file overriding flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparseprop")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("gradcheck", help="compare sparse e-prop against BPTT")
    _add_common(p)
    p.add_argument("--inputs", type=int, default=140)
    p.add_argument("--classes", type=int, default=10)

    p = subs.add_parser("bench", help="step-time and peak-memory sweeps")
    _add_common(p)
    p.add_argument("--method", choices=["eprop-sparse", "eprop-naive", "rtrl", "bptt"],
                   default="eprop-sparse")
    p.add_argument("--mode", choices=["time", "memory"], default="time")
    p.add_argument("--hidden-list", default=None,
                   help="comma-separated hidden sizes (overrides --hidden)")
    p.add_argument("--steps-list", default=None,
                   help="comma-separated step counts (overrides --steps)")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--inputs", type=int, default=140)

    p = subs.add_parser("train", help="train on a SPIKES file or synthetic data")
    _add_common(p)
    p.add_argument("--method", choices=["eprop-sparse", "eprop-naive", "rtrl", "bptt"],
                   default="eprop-sparse")
    p.add_argument("--data", default=None, help="SPIKES v1 file (synthetic if omitted)")
    p.add_argument("--pool", type=int, default=1, help="channel pooling factor")
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--updates", type=int, default=None)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--optimizer", choices=["sgd", "adam"], default="sgd")
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--samples", type=int, default=30)
    p.add_argument("--inputs", type=int, default=140)

    p = subs.add_parser("gen-data", help="write a synthetic SPIKES v1 dataset")
    _add_common(p)
    p.add_argument("--samples", type=int, default=30)
    p.add_argument("--channels", type=int, default=140)
    p.add_argument("--classes", type=int, default=3)

    return parser


def _cmd_gradcheck(args) -> int:
    spec = NetworkSpec(kind=args.neuron, n_hidden=args.hidden, n_inputs=args.inputs,
                       n_classes=args.classes, precision=args.precision, seed=args.seed)
    net = init_network(spec)
    ds = generate_poisson_dataset(1, args.inputs, args.steps, args.classes, args.seed)
    x = ds.input_array(0, dtype=net.neuron.w.dtype)
    label = ds.label_of(0)
    stats = gradient_deviation_stats(eprop_sparse_gradient(net, x, label),
                                     bptt_gradient(net, x, label))
    row = [args.neuron, args.precision, args.hidden, args.steps, args.seed,
           f"{stats.median:.3e}", f"{stats.q_low:.3e}", f"{stats.q_high:.3e}"]
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(GRADCHECK_HEADER)
            writer.writerow(row)
    print(",".join(GRADCHECK_HEADER))
    print(",".join(str(x) for x in row))
    return 0


def _cmd_bench(args) -> int:
    hidden = tuple(int(x) for x in args.hidden_list.split(",")) if args.hidden_list \
        else (args.hidden,)
    steps = tuple(int(x) for x in args.steps_list.split(",")) if args.steps_list \
        else (args.steps,)
    cfg = BenchConfig(method=args.method, n_hidden=hidden, timesteps=steps,
                      n_inputs=args.inputs, repeats=args.repeats,
                      precision=args.precision, seed=args.seed, neuron=args.neuron)
    records = bench_time(cfg) if args.mode == "time" else bench_memory(cfg)
    if args.out:
        write_records(records, args.out)
    for rec in records:
        print(",".join(str(x) for x in rec.row()))
    return 0


def _cmd_train(args) -> int:
    if args.data:
        ds = load_spike_dataset(args.data)
        if args.pool > 1:
            from .datasets import pool_channels

            ds = pool_channels(ds, args.pool)
    else:
        ds = generate_poisson_dataset(args.samples, args.inputs, args.steps,
                                      args.classes, args.seed)
    spec = NetworkSpec(kind=args.neuron, n_hidden=args.hidden, n_inputs=ds.n_channels,
                       n_classes=args.classes, precision=args.precision, seed=args.seed)
    net, metrics = train(spec, ds, method=args.method, optimizer=args.optimizer,
                         epochs=args.epochs, lr=args.lr, max_updates=args.updates,
                         metrics_path=args.out)
    loss, acc = evaluate(net, ds)
    print(f"final loss {loss:.4f} accuracy {acc:.3f} over {len(metrics)} updates")
    return 0


def _cmd_gen_data(args) -> int:
    if not args.out:
        print("gen-data requires --out", file=sys.stderr)
        return 2
    ds = generate_poisson_dataset(args.samples, args.channels, args.steps,
                                  args.classes, args.seed)
    save_spike_dataset(ds, args.out)
    print(f"wrote {len(ds.events)} events for {ds.n_samples} samples to {args.out}")
    return 0


_COMMANDS = {
    "gradcheck": _cmd_gradcheck,
    "bench": _cmd_bench,
    "train": _cmd_train,
    "gen-data": _cmd_gen_data,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        if args.config:
            _apply_config_file(args, args.config)
        return _COMMANDS[args.command](args)
    except SparsePropError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
