"""Command line entry point: ``dialshape <subcommand> [flags]``.

Flags fill an ``ExperimentConfig``; a ``--config`` JSON file is applied on top
of them, so values in the file win.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .harness import ExperimentConfig
from .rnn import RnnModel


def _floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v]


def _seeds(text: str) -> list:
    """``"0,1,5"`` or an inclusive range ``"0-9"``."""
    out = []
    for part in text.split(","):
        if "-" in part.strip("-"):
            lo, hi = part.split("-")
            out += list(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _named(items) -> dict:
    out = {}
    for item in items or []:
        name, sep, path = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected name=path, got {item!r}")
        out[name] = path
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file whose keys override the flags")
    common.add_argument("--ontology", help="ontology JSON (default: built-in restaurant domain)")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="dialshape", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-corpus", parents=[common], help="simulate a labelled dialogue corpus")
    g.add_argument("--n", type=int)
    g.add_argument("--ser", type=_floats, help="one rate or a comma list used round-robin")
    g.add_argument("--balanced", action=argparse.BooleanOptionalAction, default=None)

    t = sub.add_parser("train-rnn", parents=[common], help="train a return-decomposition RNN")
    t.add_argument("--train", help="training corpus (JSONL)")
    t.add_argument("--valid", help="validation corpus (JSONL)")
    t.add_argument("--cell", choices=["basic", "lstm", "gru"])
    t.add_argument("--hidden", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--epochs", type=int)
    t.add_argument("--clip", type=float, help="gradient-norm clip")
    t.add_argument("--target-scale", type=float, help="train on returns divided by this")

    e = sub.add_parser("eval-rnn", parents=[common], help="RMSE of a model on test corpora")
    e.add_argument("--model")
    e.add_argument("--train", help="corpus whose mean return is the constant baseline")
    e.add_argument("--test", nargs="+", metavar="NAME=PATH")

    r = sub.add_parser("train-policy", parents=[common], help="GP-SARSA learning curves")
    r.add_argument("--shaping", choices=["none", "rnn", "oracle"])
    r.add_argument("--model", help="RNN model for --shaping rnn")
    r.add_argument("--gamma", type=float)
    r.add_argument("--seeds", type=_seeds, help='"0,1,2" or "0-9"')
    r.add_argument("--budget", type=int)
    r.add_argument("--eval-every", type=int)
    r.add_argument("--eval-n", type=int)
    r.add_argument("--ser", type=_floats)
    r.add_argument("--sigma2", type=float)
    r.add_argument("--explore-scale", type=float)
    r.add_argument("--exploration", choices=["sample", "epsilon"])
    r.add_argument("--epsilon", type=float)
    r.add_argument("--workers", type=int)

    s = sub.add_parser("report", parents=[common], help="aggregate a run directory")
    s.add_argument("--window", type=int)
    return p


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    flags = {k: v for k, v in vars(args).items()
             if v is not None and k not in ("command", "config", "verbose")}
    if "test" in flags:
        flags["test"] = _named(flags["test"])
    cfg = ExperimentConfig().updated(flags)
    if args.config:
        cfg = ExperimentConfig.from_file(args.config, cfg)
    return cfg


def _out(cfg: ExperimentConfig, default: str) -> Path:
    return Path(cfg.out if cfg.out != "runs" else default)


def cmd_gen_corpus(cfg: ExperimentConfig) -> None:
    onto = cfg.load_ontology()
    path = _out(cfg, "corpus.jsonl")
    path.parent.mkdir(parents=True, exist_ok=True)
    ser = cfg.ser if len(cfg.ser) > 1 else cfg.ser[0]
    episodes = harness.gen_corpus(path, onto, cfg.n, ser, cfg.balanced, cfg.seed)
    rows = [{"id": ep.id, "ser": ep.ser, "success": ep.success, "return": ep.return_label,
             "turns": len(ep.turns)} for ep in episodes]
    harness.write_csv(path.with_suffix(".csv"), rows, ("id", "ser", "success", "return", "turns"))
    wins = sum(ep.success for ep in episodes)
    print(f"wrote {len(episodes)} dialogues to {path} ({wins} successes)")


def cmd_train_rnn(cfg: ExperimentConfig) -> None:
    if not cfg.train or not cfg.valid:
        raise SystemExit("train-rnn needs --train and --valid corpora")
    model, path = harness.train_rnn(cfg.train, cfg.valid, cfg.train_config(), _out(cfg, "runs"))
    print(f"wrote {path}")


def cmd_eval_rnn(cfg: ExperimentConfig) -> None:
    if not cfg.model or not cfg.test:
        raise SystemExit("eval-rnn needs --model and --test NAME=PATH")
    model = RnnModel.load(cfg.model)
    mean = None
    if cfg.train:
        mean = float(np.mean([R for _, R in harness.load_corpus(cfg.train, model.input_dim)]))
    rows = harness.run_rnn_eval(model, dict(cfg.test), mean)
    path = _out(cfg, "rnn_eval.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    harness.write_rnn_eval(path, rows)
    for r in rows:
        print(f"{r['corpus']}: rmse {r['rmse']:.3f} (mean baseline {r['baseline_rmse']:.3f}, n={r['n']})")


def cmd_train_policy(cfg: ExperimentConfig) -> None:
    onto = cfg.load_ontology()
    model = RnnModel.load(cfg.model) if cfg.shaping == "rnn" and cfg.model else None
    if cfg.shaping == "rnn" and model is None:
        raise SystemExit("--shaping rnn needs --model")
    curve, seed_rows, online = harness.train_policy(onto, cfg.policy_config(), cfg.shaping, cfg.seeds,
                                                    model, cfg.workers)
    out = _out(cfg, "runs")
    harness.write_policy_run(out, cfg.shaping, curve, seed_rows, online)
    last = curve.rows[-1]
    print(f"{cfg.shaping}: final reward {last['mean_reward']:.2f} +- {last['stderr']:.2f}, "
          f"AUC {harness.area_under_curve(curve.rows, 'mean_reward'):.2f}; wrote {out}")


def cmd_report(cfg: ExperimentConfig) -> None:
    summary = harness.report(_out(cfg, "runs"), cfg.window)
    for row in summary:
        p = row["p_vs_baseline"]
        p = f"{p:.4f}" if isinstance(p, float) else "-"
        print(f"{row['source']:>8}: AUC {row['auc_mean']:.2f} +- {row['auc_stderr']:.2f} "
              f"(n={row['n_seeds']}), p={p}")


COMMANDS = {"gen-corpus": cmd_gen_corpus, "train-rnn": cmd_train_rnn, "eval-rnn": cmd_eval_rnn,
            "train-policy": cmd_train_policy, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        COMMANDS[args.command](cfg)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
