from abc import ABC, abstractmethod
from collections.abc import Sequence

from moment_common.model import CheckConfig, CheckKind, CheckReport, IdentityResult, ReportFile, SequenceFile
from moment_common.tensor import TruncatedSequence


class SequenceRepository(ABC):
    @abstractmethod
    async def load_sequence(self, name: str) -> SequenceFile:
        raise NotImplementedError

    @abstractmethod
    async def save_sequence(self, name: str, file: SequenceFile) -> None:
        raise NotImplementedError

    @abstractmethod
    async def save_report(self, name: str, report: ReportFile) -> None:
        raise NotImplementedError

    @abstractmethod
    async def digest(self, name: str) -> str:
        raise NotImplementedError

    @abstractmethod
    async def exists(self, name: str) -> bool:
        raise NotImplementedError


class CheckSession(ABC):
    @abstractmethod
    async def run_check(self, kind: CheckKind, sequence: TruncatedSequence, config: CheckConfig) -> CheckReport:
        raise NotImplementedError

    @abstractmethod
    async def run_checks(
            self,
            requests: Sequence[tuple[CheckKind, TruncatedSequence, CheckConfig]],
    ) -> Sequence[CheckReport]:
        raise NotImplementedError

    @abstractmethod
    async def verify(self, suites: Sequence[str], cases: int | None, seed: int) -> Sequence[IdentityResult]:
        raise NotImplementedError
