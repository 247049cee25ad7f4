"""Non-negative magnitudes held as natural logarithms.

Zero is represented by ``-inf``. Products add logs, sums use log-sum-exp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import total_ordering

import numpy as np

LOG_ZERO = -math.inf
LOG_ONE = 0.0


def safe_log(x):
    """Natural log taking zero to ``-inf`` without warnings."""
    x = np.abs(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore"):
        out = np.log(x)
    return float(out) if out.ndim == 0 else out


def log_sum(logs) -> float:
    """Log of ``sum(exp(logs))`` in ascending index order.

    The shift is the maximum finite entry; an empty input or an input of
    all ``-inf`` gives ``-inf``.
    """
    a = np.asarray(logs, dtype=float).ravel()
    if a.size == 0:
        return LOG_ZERO
    top = a.max()
    if top == -math.inf:
        return LOG_ZERO
    if top == math.inf:
        return math.inf
    return float(top + math.log(math.fsum(np.exp(a - top))))


def log_cumsum(logs) -> np.ndarray:
    """Running log-sum-exp, ``out[i] = log(sum(exp(logs[:i+1])))``."""
    a = np.asarray(logs, dtype=float)
    if a.size == 0:
        return a.copy()
    return np.logaddexp.accumulate(a)


@total_ordering
@dataclass(frozen=True)
class LogMagnitude:
    """A magnitude ``exp(log_value)``; ``log_value = -inf`` is exactly zero.

    ``log_value = +inf`` is reserved for "unbounded" (a tail bound that
    cannot be closed).
    """

    log_value: float

    def __post_init__(self):
        if math.isnan(self.log_value):
            raise ValueError("LogMagnitude cannot hold NaN")

    @classmethod
    def zero(cls) -> LogMagnitude:
        return cls(LOG_ZERO)

    @classmethod
    def one(cls) -> LogMagnitude:
        return cls(LOG_ONE)

    @classmethod
    def unbounded(cls) -> LogMagnitude:
        return cls(math.inf)

    @classmethod
    def from_value(cls, x: float) -> LogMagnitude:
        if x < 0:
            raise ValueError("magnitudes are non-negative")
        return cls(safe_log(x))

    @property
    def value(self) -> float:
        """The magnitude itself; overflows to ``inf`` for large logs."""
        with np.errstate(over="ignore"):
            return float(np.exp(self.log_value))

    @property
    def is_zero(self) -> bool:
        return self.log_value == LOG_ZERO

    @property
    def is_unbounded(self) -> bool:
        return self.log_value == math.inf

    def __add__(self, other: LogMagnitude) -> LogMagnitude:
        return LogMagnitude(float(np.logaddexp(self.log_value, _log_of(other))))

    __radd__ = __add__

    def __mul__(self, other) -> LogMagnitude:
        a, b = self.log_value, _log_of(other)
        if a == LOG_ZERO or b == LOG_ZERO:
            return LogMagnitude(LOG_ZERO)
        return LogMagnitude(a + b)

    __rmul__ = __mul__

    def __lt__(self, other) -> bool:
        return self.log_value < _log_of(other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, (LogMagnitude, int, float)):
            return NotImplemented
        return self.log_value == _log_of(other)

    def __hash__(self):
        return hash(self.log_value)

    def __float__(self) -> float:
        return self.log_value

    def __repr__(self) -> str:
        return f"LogMagnitude({self.log_value!r})"


def _log_of(other) -> float:
    if isinstance(other, LogMagnitude):
        return other.log_value
    # plain numbers are magnitudes, not logs
    return safe_log(float(other))
