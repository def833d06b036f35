import os
from typing import Final, final

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field

THREADS_VARIABLE: Final[str] = "RMM_THREADS"
MAX_DEFAULT_THREADS: Final[int] = 8


@final
class Settings(BaseModel):
    """
    Process-wide settings read from the environment.

    Attributes:
        threads: Worker count for concurrent checks and identity suites
    """
    model_config = ConfigDict(frozen=True)

    threads: int = Field(default=1, ge=1)

    @classmethod
    def from_environment(cls) -> "Settings":
        """
        Load a .env file if present, then read RMM_THREADS.

        Raises:
            pydantic.ValidationError: If RMM_THREADS is set but not a positive integer
        """
        load_dotenv()
        value = os.getenv(THREADS_VARIABLE)
        if value is None or not value.strip():
            return cls(threads=min(os.cpu_count() or 1, MAX_DEFAULT_THREADS))
        return cls.model_validate({"threads": value.strip()})
