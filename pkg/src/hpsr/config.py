"""Process-level settings read from the environment."""

import os

from .errors import ParameterError

THREADS_ENV = "HPSR_THREADS"


def thread_count() -> int:
    """Worker cap for parallel sweeps, from ``HPSR_THREADS`` (default 1).

    Raises:
        ParameterError: If the variable is set to anything but a positive integer.
    """
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ParameterError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise ParameterError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return value
