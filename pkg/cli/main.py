"""
Command-line front end: realizability checks, basis conversion, model generation and identity verification.

Exit codes: 0 pass, 1 fail, 2 inconclusive, 3 usage or data error, 4 unexpected error.
"""
import argparse
import asyncio
import logging
import sys
import time
from collections.abc import Sequence
from typing import Final, NoReturn, override

from pydantic import ValidationError

from cli.settings import Settings
from moment_common.convention import CheckSession, SequenceRepository
from moment_common.errors import MomentError
from moment_common.model import (
    DEFAULT_MAX_ENTRIES,
    CheckConfig,
    CheckKind,
    MassLaw,
    ModelKind,
    ModelSpec,
    Provenance,
    ReportFile,
    TestSetPolicy,
    Timing,
    Verdict,
)
from moment_core.check_session import LocalCheckSession
from moment_core.codec import decode_as, decode_correlations, decode_moments, encode
from moment_core.correlation import corr_to_moment, moment_to_corr
from moment_core.file_repository import FileSequenceRepository
from moment_core.identities import SUITES
from moment_core.oracles import generate
from moment_core.realizability import DEFAULT_TOL, DEFAULT_TOL_EQ

logger = logging.getLogger(__name__)

EXIT_PASS: Final[int] = 0
EXIT_FAIL: Final[int] = 1
EXIT_INCONCLUSIVE: Final[int] = 2
EXIT_DATA_ERROR: Final[int] = 3
EXIT_UNEXPECTED: Final[int] = 4

VERDICT_EXIT_CODES: Final[dict[Verdict, int]] = {
    Verdict.PASS: EXIT_PASS,
    Verdict.FAIL: EXIT_FAIL,
    Verdict.INCONCLUSIVE: EXIT_INCONCLUSIVE,
}

CORR_TO_MOMENT: Final[str] = "corr-to-moment"
MOMENT_TO_CORR: Final[str] = "moment-to-corr"


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    """Reports usage errors with exit code 3; 2 belongs to inconclusive verdicts."""

    @override
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _parse_values(text: str) -> tuple[int | float, ...]:
    values: list[int | float] = []
    for item in text.split(","):
        item = item.strip()
        try:
            values.append(int(item))
        except ValueError:
            try:
                values.append(float(item))
            except ValueError:
                raise argparse.ArgumentTypeError(f"{item!r} is not a number") from None
    return tuple(values)


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="rmm", description="Realizability checks for moment and correlation sequences")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    verbosity.add_argument("--verbose", action="store_true", help="log matrix-level details")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    check = commands.add_parser("check", help="run a realizability check on a sequence file")
    check.add_argument("kind", type=CheckKind, choices=list(CheckKind))
    check.add_argument("input")
    check.add_argument("--degree", type=int, default=1, help="degree r of the polynomial basis")
    check.add_argument("--tol", type=float, default=DEFAULT_TOL, help="relative PSD tolerance")
    check.add_argument("--tol-eq", type=float, default=DEFAULT_TOL_EQ, help="absolute equality tolerance")
    check.add_argument("--kmax", type=int, default=2)
    check.add_argument("--nmax", type=int, default=2)
    check.add_argument("--horizon", type=int, default=None, help="Stieltjes diagnostic horizon, default D // 2")
    check.add_argument("--test-set", default="indicators", help="indicators or indicators+random:K")
    check.add_argument("--seed", type=int, default=0, help="seed of the random test vectors")
    check.add_argument("--max-entries", type=int, default=DEFAULT_MAX_ENTRIES)
    check.add_argument("--report", default=None, help="write the JSON report here")

    convert = commands.add_parser("convert", help="convert between moment and correlation sequences")
    convert.add_argument("direction", choices=[CORR_TO_MOMENT, MOMENT_TO_CORR])
    convert.add_argument("input")
    convert.add_argument("output")

    gen = commands.add_parser("generate", help="write the sequence of a ground-truth model")
    gen.add_argument("kind", type=ModelKind, choices=list(ModelKind))
    gen.add_argument("output")
    gen.add_argument("--values", type=_parse_values, required=True, help="comma-separated per-site parameters")
    gen.add_argument("--truncation", type=int, required=True, help="truncation degree D")
    gen.add_argument("--samples", type=int, default=None, help="Monte Carlo sample count")
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--mass-law", type=MassLaw, choices=list(MassLaw), default=MassLaw.CONSTANT)
    gen.add_argument("--mass-value", type=float, default=1.0)
    gen.add_argument("--beta-a", type=float, default=2.0)
    gen.add_argument("--beta-b", type=float, default=2.0)

    verify = commands.add_parser("verify", help="run the identity suites")
    verify.add_argument("suites", nargs="*", default=[], help=f"any of {', '.join(SUITES)}; all when omitted")
    verify.add_argument("--cases", type=int, default=None, help="cases per suite; each suite has its own default")
    verify.add_argument("--seed", type=int, default=0)
    return parser


async def cmd_check(args: argparse.Namespace, repository: SequenceRepository, session: CheckSession) -> int:
    kind: CheckKind = args.kind
    file = await repository.load_sequence(args.input)
    sequence = decode_as(file, kind.basis)
    config = CheckConfig(
        degree=args.degree,
        tol=args.tol,
        tol_eq=args.tol_eq,
        kmax=args.kmax,
        nmax=args.nmax,
        horizon=args.horizon,
        test_set=TestSetPolicy.parse(args.test_set, args.seed),
        max_entries=args.max_entries,
    )
    started = time.perf_counter()
    report = await session.run_check(kind, sequence, config)
    elapsed = time.perf_counter() - started
    if args.report is not None:
        await repository.save_report(args.report, ReportFile(
            input_digest=await repository.digest(args.input),
            config=config,
            report=report,
            timing=Timing(seconds=elapsed),
        ))
    print(f"{kind}: {report.verdict}")
    for label in report.failing_labels():
        print(f"  failed: {label}")
    if report.determinacy is not None and not report.determinacy.consistent:
        print("  determinacy diagnostic: growth not consistent with the Stieltjes bound")
    return VERDICT_EXIT_CODES[report.verdict]


async def cmd_convert(args: argparse.Namespace, repository: SequenceRepository) -> int:
    file = await repository.load_sequence(args.input)
    if args.direction == CORR_TO_MOMENT:
        converted = corr_to_moment(decode_correlations(file))
    else:
        converted = moment_to_corr(decode_moments(file))
    provenance = (file.provenance or Provenance()).converted(args.direction, await repository.digest(args.input))
    await repository.save_sequence(args.output, encode(converted, provenance))
    logger.info("Converted %s (%s) to %s", args.input, args.direction, args.output)
    return EXIT_PASS


async def cmd_generate(args: argparse.Namespace, repository: SequenceRepository) -> int:
    spec = ModelSpec(
        kind=args.kind,
        truncation=args.truncation,
        values=args.values,
        mass_law=args.mass_law,
        mass_value=args.mass_value,
        beta_a=args.beta_a,
        beta_b=args.beta_b,
        seed=args.seed,
        samples=args.samples,
    )
    sequence = generate(spec)
    await repository.save_sequence(
        args.output, encode(sequence, Provenance(model=spec, seed=spec.seed, samples=spec.samples))
    )
    return EXIT_PASS


async def cmd_verify(args: argparse.Namespace, session: CheckSession) -> int:
    suites: list[str] = args.suites or list(SUITES)
    results = await session.verify(suites, args.cases, args.seed)
    for result in results:
        status = "pass" if result.passed else "fail"
        print(f"{result.name}: max error {result.max_error:.3g} (threshold {result.threshold:.0e}, "
              f"{result.cases} cases) {status}")
    return EXIT_PASS if all(result.passed for result in results) else EXIT_FAIL


async def dispatch(args: argparse.Namespace, repository: SequenceRepository, session: CheckSession) -> int:
    match args.command:
        case "check":
            return await cmd_check(args, repository, session)
        case "convert":
            return await cmd_convert(args, repository)
        case "generate":
            return await cmd_generate(args, repository)
        case "verify":
            return await cmd_verify(args, session)
        case _:
            raise UsageError(f"Unknown command {args.command}")


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.WARNING if args.quiet else logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_DATA_ERROR
    _configure_logging(args)
    try:
        settings = Settings.from_environment()
        session = LocalCheckSession(settings.threads)
        return asyncio.run(dispatch(args, FileSequenceRepository(), session))
    except (MomentError, ValidationError, UsageError) as e:
        logger.error("%s", e)
        return EXIT_DATA_ERROR
    except Exception:
        logger.exception("Unexpected error")
        return EXIT_UNEXPECTED


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
