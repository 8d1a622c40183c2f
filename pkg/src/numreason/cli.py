"""Command-line front end: dataset generation, parsing inspection,
training, evaluation, oracle runs, and report aggregation."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import executor, gen, report as report_mod, training
from .corpus import load_dataset, save_dataset
from .parsing import parse_to_program
from .training import TrainConfig


def _load_config(args) -> TrainConfig:
    fields = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            raw = json.load(fh)
        known = set(TrainConfig.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise SystemExit(f"unknown config keys: {sorted(unknown)}")
        fields.update(raw)
    if getattr(args, "seed", None) is not None:
        fields["seed"] = args.seed
    return TrainConfig(**fields)


def _out_path(args, name: str) -> Path:
    out_dir = Path(getattr(args, "out_dir", ".") or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / name


def cmd_gen_data(args):
    instances = gen.generate(args.n, args.seed,
                             distractor_rate=args.distractor_rate)
    save_dataset(instances, args.out, with_gold=not args.no_gold)
    print(f"wrote {len(instances)} instances to {args.out}")


def cmd_parse(args):
    for inst in load_dataset(args.data):
        program = parse_to_program(inst.dep_parse, inst.query_tokens)
        print(f"{inst.id}\t{' '.join(inst.query_tokens)}")
        for i, step in enumerate(program.steps):
            words = " ".join(program.span_tokens(inst.query_tokens, step.span))
            refs = f" refs={step.refs}" if step.refs else ""
            print(f"  step {i}: [{words}]{refs}")
        print(f"  final: refs={program.final.refs}")


def cmd_train(args):
    config = _load_config(args)
    instances = load_dataset(args.data)

    def log(stats):
        print(f"epoch {stats.epoch:3d} [{stats.phase}] "
              f"loss={stats.loss:8.4f} reward={stats.mean_reward:6.3f} "
              f"hits={stats.hit_rate:.3f}", flush=True)

    model, trace = training.train(instances, config, log=log)
    ckpt = _out_path(args, args.checkpoint)
    training.save_checkpoint(ckpt, model, config)
    print(f"saved checkpoint to {ckpt} (config {config.hash()})")
    if args.trace_out:
        rows = trace.to_rows()
        with open(_out_path(args, args.trace_out), "w") as fh:
            json.dump(rows, fh, indent=2)


def cmd_eval(args):
    model, config = training.load_checkpoint(args.checkpoint)
    instances = load_dataset(args.data, with_gold=True)
    rep = report_mod.evaluate(model, instances)
    print(rep.text(), end="")
    if args.csv_out:
        _out_path(args, args.csv_out).write_text(rep.csv())
    if args.dump_actions:
        for inst in instances:
            out = model.forward(inst)
            print(f"# {inst.id}")
            for a in report_mod.dedup_ranked(out.space.actions)[:args.top]:
                mark = "+" if executor.reward(a.answer, inst.gold_answer) == 1 else " "
                print(f"  {mark} logp={a.logp:8.3f} {a.etype:6s} {a.op:6s} "
                      f"{a.payload} -> {float(a.answer):g}")


def cmd_oracle(args):
    instances = load_dataset(args.data, with_gold=True)
    reachable = 0
    for inst in instances:
        table = inst.entity_table()
        good = executor.oracle_good_actions(table, inst.gold_answer,
                                            n_refs=args.n_refs)
        universe = executor.action_universe(table, n_refs=args.n_refs)
        if good:
            reachable += 1
        print(f"{inst.id}\tgood={len(good)}\tuniverse={len(universe)}")
    print(f"reachable: {reachable}/{len(instances)}")


def cmd_report(args):
    import csv as csv_lib
    with open(args.csv) as fh:
        rows = list(csv_lib.DictReader(fh))
    if not rows:
        raise SystemExit("empty eval csv")
    n = len(rows)
    print(f"instances            {n}")
    print(f"exact_match          {sum(int(r['em']) for r in rows) / n:.4f}")
    for k in report_mod.RECALL_KS:
        col = f"recall@{k}"
        print(f"{col:<21}{sum(int(r[col]) for r in rows) / n:.4f}")
    print(f"recall@all           {sum(int(r['recall_all']) for r in rows) / n:.4f}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="numreason",
        description="Weakly supervised numerical reasoning over text.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    p.add_argument("--n", type=int, default=700)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--distractor-rate", type=float, default=0.5)
    p.add_argument("--no-gold", action="store_true",
                   help="strip gold traces from the output")
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("parse", help="show induced programs for a dataset")
    p.add_argument("--data", required=True)
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("train", help="train a policy on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--config", help="JSON file with training config fields")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--checkpoint", default="model.ckpt")
    p.add_argument("--trace-out", help="write per-epoch stats JSON here")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--csv-out", help="write per-instance metrics CSV here")
    p.add_argument("--dump-actions", action="store_true",
                   help="print the ranked action list per instance")
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("oracle", help="brute-force good-action search")
    p.add_argument("--data", required=True)
    p.add_argument("--n-refs", type=int, default=1)
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("report", help="aggregate an eval CSV into a summary")
    p.add_argument("--csv", required=True)
    p.set_defaults(fn=cmd_report)

    args = parser.parse_args(argv)
    args.fn(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
