"""``mvlrr`` command line.

Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .data import DataError
from .eig import EigenError
from .experiments import (
    MODES,
    ExperimentConfig,
    run_ablate_bias,
    run_cv,
    run_predict,
    run_synth,
    run_train,
    run_verify,
)
from .solver import SolverError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _rank_range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("..")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}")
    try:
        return int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers in {text!r}") from None


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mvlrr", description="Multi-view low-rank ridge regression experiments.")
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--manifest", help="dataset manifest (JSON)")
    ranks = parser.add_mutually_exclusive_group()
    ranks.add_argument("--rank", type=int)
    ranks.add_argument("--rank-range", type=_rank_range, metavar="A..B")
    parser.add_argument("--lambda", dest="lambda_strategy", default="one", metavar="one|sum|p90|fixed:v1,v2")
    parser.add_argument("--bias", action=argparse.BooleanOptionalAction, default=True)
    parser.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True)
    parser.add_argument("--method", choices=("sum", "voting"), default="sum")
    parser.add_argument("--folds", type=int, default=5)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--out", default="results")
    parser.add_argument("--model", help="model JSON (predict mode)")

    synth = parser.add_argument_group("synth")
    synth.add_argument("--n", type=int, default=120)
    synth.add_argument("--classes", type=int, default=4)
    synth.add_argument("--view-dims", type=_int_list, default=(10, 10, 10))
    synth.add_argument("--latent-rank", type=int)
    synth.add_argument("--noise", type=float, default=0.5)
    synth.add_argument("--nuisance-rank", type=int, default=0)
    synth.add_argument("--nuisance-scale", type=float, default=0.0)

    parser.add_argument("--instances", type=int, default=20, help="random instances per verify check")
    return parser


_DATA_MODES = {m for m in MODES if m not in ("synth", "verify")}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = ExperimentConfig(**vars(args))
        if config.mode in _DATA_MODES and not config.manifest:
            raise UsageError(f"{config.mode} needs --manifest")
    except (ValueError, UsageError) as exc:
        print(f"mvlrr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        return _dispatch(config)
    except DataError as exc:
        print(f"mvlrr: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SolverError, EigenError) as exc:
        print(f"mvlrr: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"mvlrr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"mvlrr: i/o error: {exc}", file=sys.stderr)
        return EXIT_DATA


def _dispatch(config: ExperimentConfig) -> int:
    if config.mode == "synth":
        path = run_synth(config)
        print(path)
        return EXIT_OK
    if config.mode == "verify":
        report = run_verify(config)
        Path(config.out).parent.mkdir(parents=True, exist_ok=True)
        Path(f"{config.out}.json").write_text(
            json.dumps({k: v for k, v in report.items() if k != "runtime_seconds"}, indent=1, sort_keys=True) + "\n"
        )
        for check in report["checks"]:
            status = "PASS" if check["passed"] else "FAIL"
            print(f"{status} {check['name']}: {check['deviation']:.3e} (tol {check['tolerance']:.0e})")
        print(f"runtime {report['runtime_seconds']:.1f}s", file=sys.stderr)
        return EXIT_OK if report["passed"] else EXIT_VERIFY
    if config.mode == "train":
        run_train(config)
        print(f"{config.out}.model.json")
        return EXIT_OK
    if config.mode == "predict":
        table = run_predict(config)
        print(f"accuracy {table.rows[0]['accuracy']:.4f}")
        return EXIT_OK
    table = run_ablate_bias(config) if config.mode == "ablate-bias" else run_cv(config)
    csv_path, _ = table.write(config.out)
    print(csv_path.read_text(), end="")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
