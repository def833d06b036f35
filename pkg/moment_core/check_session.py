import logging
from asyncio import Semaphore, gather, to_thread
from collections.abc import Callable, Sequence
from typing import Final, final, override

from moment_common.convention import CheckSession
from moment_common.model import CheckConfig, CheckKind, CheckReport, IdentityResult
from moment_common.tensor import TruncatedSequence
from moment_core.identities import run_suite
from moment_core.realizability import run_check

logger = logging.getLogger(__name__)


@final
class LocalCheckSession(CheckSession):
    """
    Runs checks and identity suites on worker threads of this process.

    Results come back in request order whatever the completion order.

    Attributes:
        _semaphore: Bounds the number of computations in flight
    """
    _semaphore: Final[Semaphore]

    def __init__(self, threads: int):
        if threads < 1:
            raise ValueError(f"Thread count must be positive, got {threads}")
        self._semaphore = Semaphore(threads)

    async def _bounded[T](self, function: Callable[..., T], *args: object) -> T:
        async with self._semaphore:
            return await to_thread(function, *args)

    @override
    async def run_check(self, kind: CheckKind, sequence: TruncatedSequence, config: CheckConfig) -> CheckReport:
        return await self._bounded(run_check, kind, sequence, config)

    @override
    async def run_checks(
            self,
            requests: Sequence[tuple[CheckKind, TruncatedSequence, CheckConfig]],
    ) -> Sequence[CheckReport]:
        return await gather(*(self.run_check(kind, sequence, config) for kind, sequence, config in requests))

    @override
    async def verify(self, suites: Sequence[str], cases: int | None, seed: int) -> Sequence[IdentityResult]:
        results = await gather(*(self._bounded(run_suite, name, cases, seed) for name in suites))
        for result in results:
            logger.info("Identity %s: max error %.3g (%s)", result.name, result.max_error,
                        "pass" if result.passed else "fail")
        return results
