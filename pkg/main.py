import argparse
import os
import sys
from typing import List, Optional

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from services import experiment_service
from src.agents import parse_params
from src.tools import estimates_csv, format_table
from utils.config import settings
from utils.errors import InvalidSeed, MixedManifests, RSEnvError, UnknownPolicy
from utils.logger import get_logger, setup_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_DATA = 2
EXIT_USAGE = 3
EXIT_UNKNOWN_POLICY = 4
EXIT_MIXED = 5


class UsageError(Exception):
    pass


class CommandParser(argparse.ArgumentParser):
    """Argument errors exit with the usage code instead of argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)


def _csv_list(text: Optional[str]) -> List[str]:
    return [part.strip() for part in (text or "").split(",") if part.strip()]


def _seeds(text: Optional[str]) -> Optional[List[int]]:
    if not text:
        return None
    try:
        return [int(part) for part in _csv_list(text)]
    except ValueError:
        raise UsageError(f"--seed expects integers, got {text!r}")


# ==================== Commands ====================

def cmd_validate_data(args) -> int:
    schema = experiment_service.parse_schema(args.schema)
    report = experiment_service.validate_data(args.input, schema)
    print(format_table(report.model_dump()))
    return EXIT_OK


def cmd_create_manifest(args) -> int:
    schema = experiment_service.parse_schema(args.schema)
    path, digest = experiment_service.author_manifest(args.input, args.config, args.out, schema)
    print(f"{path} {digest}")
    return EXIT_OK


def cmd_run(args) -> int:
    if args.steps < 0:
        raise UsageError("--steps must be non-negative")
    reports = experiment_service.run_experiment(
        args.manifest,
        args.policy,
        parse_params(args.params),
        steps=args.steps,
        seeds=_seeds(args.seed),
        out_dir=args.out,
        workers=args.workers,
    )
    for report in reports:
        print(f"seed {report.seed} fingerprint {report.fingerprint}")
    return EXIT_OK


def cmd_evaluate_offpolicy(args) -> int:
    rows = experiment_service.evaluate_offpolicy(
        args.log,
        args.policy,
        parse_params(args.params),
        estimators=_csv_list(args.estimators),
        clip=args.clip,
        schema=experiment_service.parse_schema(args.schema),
        context_keys=_csv_list(args.context_keys),
        reward_model=args.reward_model,
        seed=args.seed,
        catalog=_csv_list(args.catalog),
    )
    text = estimates_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        logger.info(f"Estimates saved to: {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_compare(args) -> int:
    frame = experiment_service.compare_reports(args.reports, allow_mixed=args.allow_mixed, out_path=args.out)
    print(frame.to_string(index=False))
    return EXIT_OK


# ==================== Parser ====================

def build_parser() -> argparse.ArgumentParser:
    parser = CommandParser(prog="rsenv", description="Reproducible recommender-system task environments")
    parser.add_argument("--log-level", default=None, help="overrides RSENV_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CommandParser)

    p = sub.add_parser("validate-data", help="parse an interaction log and print its validation report")
    p.add_argument("--input", required=True)
    p.add_argument("--schema", default=None, help="JSON file or role=column,... mapping")
    p.set_defaults(handler=cmd_validate_data)

    p = sub.add_parser("create-manifest", help="author an environment manifest for a dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--config", required=True, help="JSON with assumptions, reward, state, seed, slate_k")
    p.add_argument("--schema", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_create_manifest)

    p = sub.add_parser("run", help="run a policy against a manifest-built environment")
    p.add_argument("--manifest", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--params", default="")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", default=None, help="seed or comma-separated seeds; defaults to the manifest seed")
    p.add_argument("--out", default=settings.output_dir)
    p.add_argument("--workers", type=int, default=settings.run_workers)
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("evaluate-offpolicy", help="off-policy value estimates over a logged CSV")
    p.add_argument("--log", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--params", default="")
    p.add_argument("--estimators", default="replay,ips,dm,dr")
    p.add_argument("--clip", type=float, default=None)
    p.add_argument("--schema", default=None)
    p.add_argument("--context-keys", default="")
    p.add_argument("--reward-model", default="ridge", help="ridge or constant:<value>")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--catalog", default="", help="extra candidate item ids beyond the logged ones")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_evaluate_offpolicy)

    p = sub.add_parser("compare", help="tabulate run reports")
    p.add_argument("--reports", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--allow-mixed", action="store_true")
    p.set_defaults(handler=cmd_compare)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.log_level:
        setup_logger(args.log_level.upper())

    try:
        return args.handler(args)
    except UnknownPolicy as e:
        logger.error(str(e))
        return EXIT_UNKNOWN_POLICY
    except MixedManifests as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_MIXED
    except InvalidSeed as e:
        sys.stderr.write(f"error: {e}\n")
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except RSEnvError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_DATA
    except FileNotFoundError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_DATA
    except (UsageError, ValueError) as e:
        sys.stderr.write(f"error: {e}\n")
        parser.print_usage(sys.stderr)
        return EXIT_USAGE


# ==================== Run CLI ====================

if __name__ == "__main__":
    sys.exit(main())
