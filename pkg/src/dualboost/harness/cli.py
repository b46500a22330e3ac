"""Command line entry point: ``dualboost {gen-data,train,eval,compare}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from ..core import ConfigError
from ..datasets import DatasetParseError, load_dataset, save_dataset
from ..serialization import ArtifactError
from .artifact import load_artifact, staged_dir, write_artifact
from .config import ExperimentConfig, parse_flat
from .experiment import compare, evaluate, format_table, load_data, train_kind

log = logging.getLogger("dualboost")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dualboost", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic bimodal dataset")
    g.add_argument("--spec", required=True, help="config file with data.* keys")
    g.add_argument("--out", required=True, help="output directory (train.txt, valid.txt)")

    t = sub.add_parser("train", help="train one model kind")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True, help="artifact directory")
    t.add_argument("--plot", action="store_true", help="also write history.png")

    e = sub.add_parser("eval", help="score a trained model on a dataset file")
    e.add_argument("--model", required=True, help="artifact directory")
    e.add_argument("--data", required=True, help="dataset file")
    e.add_argument("--metric", choices=("f1", "accuracy"))

    c = sub.add_parser("compare", help="train a roster and tabulate relative improvements")
    c.add_argument("--config", required=True)
    c.add_argument("--out", help="output directory (default: compare_out)")
    c.add_argument("--repeats", type=int)
    c.add_argument("--plot", action="store_true", help="also write traces.png")
    return p


def _load_config(path) -> ExperimentConfig:
    if not Path(path).is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    return ExperimentConfig.load(path)


def _plot(path: Path, traces: dict):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for name, rows in traces.items():
        pts = [(r["seconds"] / 60.0, r["val_metric"]) for r in rows if r.get("val_metric") is not None]
        if pts:
            ax.plot(*zip(*pts), label=name)
    ax.set_xlabel("minutes")
    ax.set_ylabel("validation metric")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def cmd_gen_data(args) -> int:
    if not Path(args.spec).is_file():
        raise FileNotFoundError(f"spec file not found: {args.spec}")
    flat = parse_flat(Path(args.spec).read_text(), args.spec)
    # bare GenSpec keys are accepted as well as data.* ones
    flat = {(k if "." in k or k in ("seed", "metric") else f"data.{k}"): v for k, v in flat.items()}
    cfg = ExperimentConfig.from_flat(flat)
    train, valid = load_data(cfg)
    with staged_dir(Path(args.out)) as tmp:
        save_dataset(train, tmp / "train.txt")
        if valid is not None:
            save_dataset(valid, tmp / "valid.txt")
        (tmp / "spec.txt").write_text(cfg.to_text())
    print(f"wrote {train.n} train / {0 if valid is None else valid.n} valid samples to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args.config)
    train, valid = load_data(cfg)
    artifact = train_kind(cfg, train, valid)
    with staged_dir(Path(args.out)) as tmp:
        write_artifact(artifact, tmp)
        if args.plot:
            _plot(tmp / "history.png", {cfg.kind: artifact.history})
    if valid is not None and valid.n:
        print(f"metric={cfg.metric} value={evaluate(artifact, valid)!r} split=valid")
    return 0


def cmd_eval(args) -> int:
    artifact = load_artifact(args.model)
    data = load_dataset(args.data)
    metric = args.metric or artifact.config.metric
    print(f"metric={metric} value={evaluate(artifact, data, metric)!r}")
    return 0


def cmd_compare(args) -> int:
    cfg = _load_config(args.config)
    out = Path(args.out or "compare_out")
    with staged_dir(out) as tmp:
        def keep(kind, repeat, artifact):
            if repeat == 0:
                (tmp / kind).mkdir()
                write_artifact(artifact, tmp / kind)

        rows, artifacts = compare(cfg, args.repeats, on_trained=keep)
        with open(tmp / "compare.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["model", "metric", "value", "rel_improvement"])
            for row in rows:
                w.writerow([row.kind, cfg.metric, repr(row.value), f"{row.rel_improvement:.2f}"])
        table = format_table(rows, cfg.metric)
        (tmp / "compare.md").write_text(table)
        (tmp / "config.txt").write_text(cfg.to_text())
        if args.plot:
            _plot(tmp / "traces.png", {k: a.history for k, a in artifacts.items()})
    print(table, end="")
    return 0


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "eval": cmd_eval, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DatasetParseError, ArtifactError, FileNotFoundError, ValueError) as exc:
        print(f"dualboost {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
