"""Command-line interface.

    unrank generate  --config cfg.json
    unrank train     --config cfg.json
    unrank unlearn   --config cfg.json --method curd
    unrank evaluate  --config cfg.json [--checkpoint path]
    unrank sweep     --config cfg.json --axis gamma
    unrank report    --config cfg.json [--out report.csv]

Any config field can be overridden with repeated `--set key=value` flags
(dotted paths, JSON-parsed values); `--seed` overrides every seed at once.

Exit codes: 0 success, 1 usage or config error, 2 runtime or numeric
error, 3 sweep finished with failed cells.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .errors import NumericError, UnrankError, ValidationError
from . import harness

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_PARTIAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        raise _UsageError(f"{self.prog}: {message}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="unrank", description="Corrective unranking experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: _Parser) -> None:
        p.add_argument("--config", help="experiment config JSON (defaults apply when omitted)")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config field (dotted path, JSON value)")
        p.add_argument("--seed", type=int, help="master seed; overrides all section seeds")
        p.add_argument("--run-id", help="run directory name (default: derived from the config)")
        p.add_argument("--outdir", help="parent directory for run outputs")

    common(sub.add_parser("generate", help="write the synthetic corpus and forget specs"))
    common(sub.add_parser("train", help="fit the teacher model"))
    p_unlearn = sub.add_parser("unlearn", help="apply one unlearning method")
    common(p_unlearn)
    p_unlearn.add_argument("--method", required=True,
                           help=f"one of: {', '.join(harness.UNLEARN_METHODS)}")
    p_eval = sub.add_parser("evaluate", help="run the metric suite on a checkpoint")
    common(p_eval)
    p_eval.add_argument("--checkpoint", help="checkpoint path (default: the unlearned student)")
    p_sweep = sub.add_parser("sweep", help="grid sweep with mean/stderr aggregation")
    common(p_sweep)
    p_sweep.add_argument("--axis", required=True, help=f"one of: {', '.join(harness.SWEEP_AXES)}")
    p_report = sub.add_parser("report", help="aggregate an existing sweep.csv")
    common(p_report)
    p_report.add_argument("--out", help="also write the aggregate table as CSV")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = harness.load_config(
            args.config, args.overrides, seed=args.seed, run_id=args.run_id, outdir=args.outdir
        )
        if args.command == "generate":
            paths = harness.cmd_generate(cfg)
            print(f"wrote corpus and forget specs under {paths.data}")
        elif args.command == "train":
            paths = harness.cmd_train(cfg)
            print(f"wrote teacher checkpoint {paths.teacher}")
        elif args.command == "unlearn":
            if args.method in harness.EXCLUDED_METHODS or args.method not in harness.UNLEARN_METHODS:
                raise _UsageError(_method_message(args.method))
            paths = harness.cmd_unlearn(cfg, args.method)
            print(f"wrote student checkpoint {paths.student}")
        elif args.command == "evaluate":
            report = harness.cmd_evaluate(cfg, args.checkpoint)
            paths = harness.run_paths(cfg)
            print(f"wrote {paths.metrics_json}")
            for name in sorted(report.to_json_dict()):
                print(f"  {name} = {report.to_json_dict()[name]}")
        elif args.command == "sweep":
            if args.axis not in harness.SWEEP_AXES:
                raise _UsageError(
                    f"unknown sweep axis {args.axis!r}; choose one of {', '.join(harness.SWEEP_AXES)}"
                )
            outcome = harness.cmd_sweep(cfg, args.axis)
            paths = harness.run_paths(cfg)
            print(f"wrote {paths.sweep_csv} and {paths.sweep_svg}")
            if outcome.failures:
                print(f"{outcome.failures} sweep cell(s) failed", file=sys.stderr)
                return EXIT_PARTIAL
        else:
            table = harness.cmd_report(cfg, args.out)
            print(table)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except UnrankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _method_message(method: str) -> str:
    if method in harness.EXCLUDED_METHODS:
        return f"method {method!r} is not available: {harness.EXCLUDED_METHODS[method]}"
    return f"unknown unlearn method {method!r}; choose one of {', '.join(harness.UNLEARN_METHODS)}"


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
