"""Command-line entry point: ``pcsqcnn {verify,accounting,train,eval,diagnose}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import rng as rngmod
from .data import DatasetSpec, IDXFormatError, build_benchmark
from .diagnostics import (
    class_balanced_subset,
    count_parameters,
    depth_family_diagnostics,
    landscape_probe,
    loss_histogram,
)
from .head import head_forward, init_head
from .layers import LayerStack, MultiplexerParams
from .readout import readout_entropy, sample_shots_batch
from .storage import (
    ConfigError,
    MetricsWriter,
    PRESETS,
    encoder_from_config,
    layout_from_config,
    load_checkpoint,
    load_config,
    save_checkpoint,
    save_config,
    train_config_from,
)
from .training import encode_images, evaluate_readouts, predict_readout, train

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("pcsqcnn")


def parse_shots(text: str) -> list:
    """``"128,1024,inf"`` -> ``[128, 1024, None]`` (``None`` meaning exact readout)."""
    out = []
    for tok in text.split(","):
        tok = tok.strip().lower()
        if tok in ("inf", "exact"):
            out.append(None)
            continue
        try:
            n = int(tok)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad shot budget {tok!r}") from None
        if n < 1:
            raise argparse.ArgumentTypeError(f"shot budget must be >= 1, got {n}")
        out.append(n)
    return out


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"preset ({', '.join(sorted(PRESETS))}) or JSON config path")
    common.add_argument("--seed", type=_u64, help="override the config seed")
    common.add_argument("--out", default="runs", help="output directory")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="pcsqcnn", description="Translation-equivariant quantum CNN simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[common], help="run the property battery")
    v.add_argument("--quick", action="store_true", help="fewer random draws")

    sub.add_parser("accounting", parents=[common], help="parameter table")

    t = sub.add_parser("train", parents=[common], help="train per a config")
    t.add_argument("--epochs", type=int, help="override the configured epoch count")
    t.add_argument("--sidecar", action="store_true", help="store arrays in an .npz next to the checkpoint")

    e = sub.add_parser("eval", parents=[common], help="exact / finite-shot test evaluation")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--shots", type=parse_shots, default=[None])

    d = sub.add_parser("diagnose", parents=[common], help="gradient, entropy, landscape and histogram probes")
    d.add_argument("--checkpoint")
    d.add_argument("--shots", type=parse_shots, default=parse_shots("32,128,512,2048"))
    d.add_argument("--probes", default="gradients,entropy,landscape,histogram")
    d.add_argument("--depths", default="1,2,3")
    d.add_argument("--inits", type=int, default=12)
    d.add_argument("--subset", type=int, default=100, help="class-balanced diagnostic subset size")
    d.add_argument("--passes", type=int, default=100)
    d.add_argument("--batch-size", type=int, default=0, help="histogram batch size (0: whole test set)")
    return p


def _config(args) -> dict:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def _run_id(cfg: dict) -> str:
    return f"{cfg.get('name', 'run')}-s{cfg['seed']}"


def _dataset(cfg: dict):
    data = dict(cfg["data"])
    data["seed"] = cfg["seed"]
    return build_benchmark(DatasetSpec(**data))


def _stack_head(cfg: dict):
    layout = layout_from_config(cfg)
    m = cfg["model"]
    seed = cfg["seed"]
    params = MultiplexerParams.uniform(layout, seed)
    stack = LayerStack(layout, params, m["mode"], m["basis"], m.get("rbc_seed", seed))
    head = init_head(layout.D_out, layout.n_classes, rngmod.stream(seed, "init-head"))
    return stack, head


# ----------------------------------------------------------------------------


def cmd_verify(args) -> int:
    from .verification import run_all

    results = run_all(seed=args.seed or 0, quick=args.quick)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} properties passed")
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_accounting(args) -> int:
    names = [args.config] if args.config else ["q1nf1_canvas32", "q3nf3_canvas32", "direct16", "q3nf2_canvas32"]
    print(f"{'config':<18} {'qubits':>6} {'readout':>12} {'quantum':>9} {'classifier':>10} {'total':>9}")
    for name in names:
        cfg = load_config(name)
        c = count_parameters(layout_from_config(cfg))
        shape = "x".join(str(s) for s in c["readout_shape"])
        label = cfg.get("name", name)
        print(f"{label:<18} {c['total_qubits']:>6} {shape:>12} {c['quantum']:>9} {c['classifier']:>10} {c['total']:>9}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    if args.epochs is not None:
        cfg["train"]["epochs"] = args.epochs
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bench = _dataset(cfg)
    stack, head = _stack_head(cfg)
    tcfg = train_config_from(cfg, threads=args.threads)
    metrics = MetricsWriter(out / "metrics.jsonl", _run_id(cfg))

    def on_eval(epoch, history):
        for row in history:
            if row["epoch"] == epoch:
                metrics.write(shots="exact", **row)

    save_config(cfg, out / "config.json")
    _, _, history = train(
        stack, head, bench.train_images, bench.train_labels, tcfg, bench.test_images, bench.test_labels, on_eval
    )
    save_checkpoint(out / "checkpoint.json", stack, head, cfg, sidecar=args.sidecar)
    final = [r for r in history if r["epoch"] == history[-1]["epoch"]]
    for r in final:
        print(f"epoch {r['epoch']} {r['split']}: loss {r['loss']:.4f} accuracy {r['accuracy']:.4f}")
    return EXIT_OK


def _finite_shot_eval(P, head, labels, shots, seed):
    rows = []
    for s in shots:
        R = P if s is None else sample_shots_batch(P, s, seed, "eval-shots")
        res = evaluate_readouts(R, head, labels)
        res["shots"] = "exact" if s is None else s
        rows.append(res)
    return rows


def cmd_eval(args) -> int:
    stack, head, ck = load_checkpoint(args.checkpoint)
    cfg = _config(args) if args.config else load_config(str(Path(args.checkpoint).with_name("config.json")))
    if args.seed is not None:
        cfg["seed"] = args.seed
    bench = _dataset(cfg)
    enc = encode_images(bench.test_images, encoder_from_config(cfg))
    P = predict_readout(stack, enc, threads=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics = MetricsWriter(out / "eval.jsonl", _run_id(cfg))
    for row in _finite_shot_eval(P, head, bench.test_labels, args.shots, cfg["seed"]):
        metrics.write(split="test", **row)
        print(f"shots {row['shots']!s:>6}: loss {row['loss']:.4f} accuracy {row['accuracy']:.4f}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    probes = {p.strip() for p in args.probes.split(",") if p.strip()}
    unknown = probes - {"gradients", "entropy", "landscape", "histogram"}
    if unknown:
        raise ConfigError(f"unknown probes: {', '.join(sorted(unknown))}")
    seed = cfg["seed"]
    metrics = MetricsWriter(out / "diagnostics.jsonl", _run_id(cfg))
    bench = _dataset(cfg)
    if "gradients" in probes:
        idx = class_balanced_subset(bench.train_labels, args.subset)
        depths = [int(q) for q in args.depths.split(",")]
        rows = depth_family_diagnostics(
            bench.train_images[idx], bench.train_labels[idx], depths, cfg["model"]["n_f"], args.inits, seed
        )
        for r in rows:
            metrics.write(probe="gradients", **r)
            print(f"Q={r['Q']} {r['mask']:>5} {r['quantity']}: mean {r['mean']:.4g} [{r['p25']:.4g}, {r['p75']:.4g}]")
    if probes & {"entropy", "landscape", "histogram"}:
        if args.checkpoint:
            stack, head, _ = load_checkpoint(args.checkpoint)
        else:
            stack, head = _stack_head(cfg)
        enc = encode_images(bench.test_images, encoder_from_config(cfg))
        P = predict_readout(stack, enc, threads=args.threads)
        labels = bench.test_labels
        finite = [s for s in args.shots if s is not None]
    if "entropy" in probes:
        H = readout_entropy(P)
        metrics.write(probe="entropy", shots="exact", mean=float(np.mean(H)), max_bits=float(np.log2(P.shape[1])))
        print(f"entropy exact: {np.mean(H):.4f} bits")
        for s in finite:
            Hs = readout_entropy(sample_shots_batch(P, s, seed, "entropy-shots"))
            metrics.write(probe="entropy", shots=s, mean=float(np.mean(Hs)))
            print(f"entropy {s}: {np.mean(Hs):.4f} bits")
    if "landscape" in probes:
        grid = np.linspace(-3, 3, 13)
        for s in finite:
            res = landscape_probe(head, P, labels, s, grid)
            metrics.write(
                probe="landscape", shots=s, grid=grid.tolist(),
                loss=[[None if np.isnan(v) else v for v in row] for row in res["loss_masked"]],
                valid_fraction=res["valid_fraction"].tolist(), skipped=res["skipped"],
            )
            print(f"landscape {s}: centre {res['loss'][6, 6]:.4f}, skipped {res['skipped']}")
    if "histogram" in probes:
        n = len(labels)
        bs = args.batch_size or n
        usable = n - n % bs
        hist = loss_histogram(stack, head, None, labels[:usable], finite, bs, args.passes, seed, readouts=P[:usable])
        for key, vals in hist.items():
            metrics.write(probe="histogram", shots=key, batch_means=vals.tolist())
            print(f"histogram {key}: mean {vals.mean():.4f} sd {vals.std():.4f} entries {vals.size}")
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify,
    "accounting": cmd_accounting,
    "train": cmd_train,
    "eval": cmd_eval,
    "diagnose": cmd_diagnose,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (FileNotFoundError, IsADirectoryError, PermissionError, IDXFormatError) as exc:
        print(f"pcsqcnn: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, json.JSONDecodeError, ValueError, TypeError) as exc:
        print(f"pcsqcnn: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
