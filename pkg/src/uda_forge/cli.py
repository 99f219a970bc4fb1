"""Command-line entry points: train, eval, stability, ablate, toygen, stats."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .data import compute_class_frequencies, load_manifest
from .data.manifest import DOMAINS, SOURCE
from .data.toy import ToyConfig, generate_toy_domains
from .errors import ConfigError, DataError, NumericAbort
from .evaluation import InferConfig, evaluate
from .harness import resolve_config, run_ablation_suite, run_stability, run_training
from .harness.config import _build_dataclass
from .harness.runner import _resolve_manifests, runtime_device
from .models import load_checkpoint

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

log = logging.getLogger("uda_forge")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="YAML/JSON experiment config")
    parser.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key"
    )
    parser.add_argument("--seed", type=int, default=None, help="override the run seed")
    parser.add_argument("--out", type=str, default=None, help="override the output directory")


def _experiment_config(args):
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    config = resolve_config(args.config, overrides)
    if args.out is not None:
        config = dataclasses.replace(config, out_dir=args.out)
    return config


def _cmd_train(args) -> int:
    config = _experiment_config(args)
    result = run_training(config, resume_from=args.resume)
    print(f"target-val mIoU: {100 * result.final_report.miou:.2f}")
    if result.out_of_target_report is not None:
        print(f"out-of-target mIoU: {100 * result.out_of_target_report.miou:.2f}")
    print(f"artifacts in {result.out_dir}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    config = _experiment_config(args)
    net, _ = load_checkpoint(args.checkpoint)
    net.to(runtime_device())
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _, _, target_val, out_of_target = _resolve_manifests(config, out_dir)
    manifest = target_val if args.split == "target_val" else out_of_target
    if manifest is None:
        raise ConfigError(f"no manifest configured for split '{args.split}'")
    infer = InferConfig(
        window=config.eval.window,
        stride=config.eval.stride,
        flip=config.eval.flip,
        batch_size=config.eval.batch_size,
    )
    report = evaluate(net, manifest, infer, workers=args.workers or config.eval.workers)
    report.save_json(out_dir / f"eval_{args.split}.json")
    report.save_csv(out_dir / f"eval_{args.split}.csv")
    print(report.format_table(manifest.class_space.names))
    return EXIT_OK


def _cmd_stability(args) -> int:
    config = _experiment_config(args)
    seeds = [int(s) for s in args.seeds.split(",") if s.strip() != ""]
    report = run_stability(config, seeds)
    for entry in report.entries:
        score = "failed" if entry.status != "ok" else f"{100 * entry.miou:.2f}"
        print(f"seed {entry.seed}: {score}")
    print(
        f"best {100 * report.best:.2f}  worst {100 * report.worst:.2f}  "
        f"average {100 * report.average:.2f}  std {100 * report.std_dev:.2f}"
    )
    return EXIT_OK if all(e.status == "ok" for e in report.entries) else EXIT_DATA


def _cmd_ablate(args) -> int:
    config = _experiment_config(args)
    toggles = [t for t in args.toggles.split(",") if t.strip() != ""]
    table = run_ablation_suite(config, toggles)
    print(table.format_table())
    return EXIT_OK


def _cmd_toygen(args) -> int:
    toy = _build_dataclass(ToyConfig, _overrides_to_dict(args.set), "toy")
    source, target_train, target_val = generate_toy_domains(args.out, toy, args.seed)
    print(
        f"wrote {len(source)} source / {len(target_train)} target-train / "
        f"{len(target_val)} target-val samples to {args.out}"
    )
    return EXIT_OK


def _overrides_to_dict(assignments: list[str]) -> dict:
    import yaml

    tree: dict = {}
    for assignment in assignments:
        if "=" not in assignment:
            raise ConfigError(f"override '{assignment}' is not of the form key=value")
        key, raw = assignment.split("=", 1)
        node = tree
        parts = key.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = yaml.safe_load(raw)
    return tree


def _cmd_stats(args) -> int:
    manifest = load_manifest(args.manifest, args.domain)
    table = compute_class_frequencies(manifest)
    if args.out:
        table.to_csv(args.out)
        print(f"wrote {args.out}")
    else:
        freq = table.frequency
        print(f"{'class':<8}{'pixels':>12}{'images':>10}{'frequency':>12}")
        for c in range(table.num_classes):
            print(
                f"{c:<8}{int(table.pixel_count[c]):>12}{int(table.image_count[c]):>10}"
                f"{freq[c]:>12.6f}"
            )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uda-forge")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run one training experiment")
    _add_config_flags(train)
    train.add_argument("--resume", type=Path, default=None, help="checkpoint to resume from")
    train.set_defaults(handler=_cmd_train)

    ev = sub.add_parser("eval", help="evaluate a checkpoint on a configured split")
    _add_config_flags(ev)
    ev.add_argument("--checkpoint", type=Path, required=True)
    ev.add_argument("--split", choices=("target_val", "out_of_target"), default="target_val")
    ev.add_argument("--workers", type=int, default=None)
    ev.set_defaults(handler=_cmd_eval)

    stab = sub.add_parser("stability", help="train over several seeds and aggregate")
    _add_config_flags(stab)
    stab.add_argument("--seeds", type=str, default="0,1,2,3,4,5", help="comma-separated seeds")
    stab.set_defaults(handler=_cmd_stability)

    abl = sub.add_parser("ablate", help="single-toggle removal suite")
    _add_config_flags(abl)
    abl.add_argument(
        "--toggles",
        type=str,
        default="ema,pseudo_weight,lr_multiplier,dacs,rcs,mic,fd_loss",
        help="comma-separated toggle names to remove one at a time",
    )
    abl.set_defaults(handler=_cmd_ablate)

    toygen = sub.add_parser("toygen", help="generate the procedural two-domain benchmark")
    toygen.add_argument("--out", type=str, required=True)
    toygen.add_argument("--seed", type=int, default=0)
    toygen.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    toygen.set_defaults(handler=_cmd_toygen)

    stats = sub.add_parser("stats", help="class-frequency table of a labeled manifest")
    stats.add_argument("--manifest", type=str, required=True)
    stats.add_argument("--domain", choices=DOMAINS, default=SOURCE)
    stats.add_argument("--out", type=str, default=None, help="CSV output path")
    stats.set_defaults(handler=_cmd_stats)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except NumericAbort as exc:
        log.error("numeric abort: %s", exc)
        return EXIT_NUMERIC
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to exit code
        log.exception("unexpected failure: %s", exc)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
