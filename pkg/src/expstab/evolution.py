"""Operator sequences A(n), evolution products A_m^n and their log-norms.

``A_m^n = A(m) ... A(n+1)`` for ``m > n`` and the identity for ``m == n``;
indices start at 0. Every norm is carried as a natural log so that products
like ``e^(m+1)`` never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import kernels
from .errors import ContractError, ResourceLimitError, UnsupportedRepresentation
from .logmag import LogMagnitude, safe_log

KINDS = ("scalar", "diagonal", "dense", "closed-form")
NORMS = ("l1", "l2", "linf")

HORIZON_CAP = 20000
# tables that must be stored densely (matrix and closed-form families)
DENSE_HORIZON_CAP = 5000


@dataclass(frozen=True, eq=False)
class EvolutionFamily:
    """A sequence ``n -> A(n)`` of real operators of fixed dimension.

    Scalar and diagonal families carry ``log_abs`` (vectorized log|A(n)|,
    shape ``(k,)`` or ``(k, d)``) so that norms are formed from sums of logs.
    Closed-form families carry only ``closed_form(m_array, n) -> log||A_m^n||``.
    """

    kind: str
    dimension: int
    norm: str = "linf"
    coef: Callable[[int], Any] | None = None
    log_abs: Callable[[np.ndarray], np.ndarray] | None = None
    closed_form: Callable[[np.ndarray, int], np.ndarray] | None = None
    label: str = ""
    params: dict = field(default_factory=dict)
    _stack_cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown family kind {self.kind!r}")
        if self.norm not in NORMS:
            raise ContractError(f"unknown norm {self.norm!r}; expected one of {NORMS}")
        if self.dimension < 1:
            raise ContractError("dimension must be positive")
        if self.kind == "scalar" and self.dimension != 1:
            raise ContractError("scalar families have dimension 1")
        if self.kind == "closed-form":
            if self.closed_form is None:
                raise ContractError("closed-form family needs a log-norm callback")
        elif self.coef is None:
            raise ContractError(f"{self.kind} family needs coefficients")

    @property
    def norm_code(self) -> int:
        return kernels.NORM_CODES[self.norm]

    @property
    def dual_norm(self) -> str:
        return kernels.DUAL_NORM[self.norm]

    def with_norm(self, norm: str) -> EvolutionFamily:
        return EvolutionFamily(self.kind, self.dimension, norm, self.coef, self.log_abs,
                               self.closed_form, self.label, dict(self.params))

    def matrix(self, n: int) -> np.ndarray:
        """A(n) as a ``(d, d)`` array."""
        self._require_operators()
        a = self.coef(n)
        if self.kind == "scalar":
            return np.array([[float(a)]])
        if self.kind == "diagonal":
            return np.diag(np.asarray(a, dtype=float))
        return np.asarray(a, dtype=float)

    def stack(self, hi: int) -> np.ndarray:
        """``A(0), ..., A(hi)`` stacked into shape ``(hi + 1, d, d)``."""
        self._require_operators()
        cached = self._stack_cache.get("stack")
        if cached is not None and cached.shape[0] > hi:
            out = cached[: hi + 1]
            out.flags.writeable = False
            return out
        d = self.dimension
        out = np.empty((hi + 1, d, d))
        for n in range(hi + 1):
            out[n] = self.matrix(n)
        self._stack_cache["stack"] = out
        out = out.view()
        out.flags.writeable = False
        return out

    def log_abs_coefs(self, hi: int) -> np.ndarray:
        n = np.arange(hi + 1)
        if self.log_abs is not None:
            return np.asarray(self.log_abs(n), dtype=float)
        vals = np.array([self.coef(int(j)) for j in n], dtype=float)
        return safe_log(vals)

    def _require_operators(self):
        if self.kind == "closed-form":
            raise UnsupportedRepresentation(
                "closed-form family exposes log-norms only; no operators to compose or apply")


def _check_order(m: int, n: int):
    if n < 0 or m < n:
        raise ContractError(f"evolution index order violated: need m >= n >= 0, got m={m}, n={n}")


def _as_vector(family: EvolutionFamily, x) -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.shape != (family.dimension,):
        raise ContractError(f"vector of shape {v.shape} does not match dimension {family.dimension}")
    return v


def compose(family: EvolutionFamily, m: int, n: int):
    """The operator A_m^n; a float for scalar families, else a ``(d, d)`` array."""
    _check_order(m, n)
    family._require_operators()
    if family.kind == "scalar":
        return math.prod(float(family.coef(j)) for j in range(n + 1, m + 1))
    if family.kind == "diagonal":
        prod = np.ones(family.dimension)
        for j in range(n + 1, m + 1):
            prod = np.asarray(family.coef(j), dtype=float) * prod
        return np.diag(prod)
    P = np.eye(family.dimension)
    for j in range(n + 1, m + 1):
        P = family.matrix(j) @ P
    return P


def apply(family: EvolutionFamily, m: int, n: int, x):
    """``A_m^n x`` by applying A(n+1), ..., A(m) in turn."""
    _check_order(m, n)
    family._require_operators()
    scalar_in = np.ndim(x) == 0
    y = _as_vector(family, x)
    for j in range(n + 1, m + 1):
        if family.kind == "dense":
            y = family.matrix(j) @ y
        else:
            y = np.asarray(family.coef(j), dtype=float) * y
    return float(y[0]) if scalar_in else y


def vector_norm(family: EvolutionFamily, x, norm: str | None = None) -> float:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    return float(np.linalg.norm(v, {"l1": 1, "l2": 2, "linf": np.inf}[norm or family.norm]))


def log_norm(family: EvolutionFamily, m: int, n: int) -> LogMagnitude:
    """log ||A_m^n|| in the operator norm induced by ``family.norm``."""
    _check_order(m, n)
    if m == n:
        return LogMagnitude.one()
    if family.kind == "closed-form":
        return LogMagnitude(float(np.asarray(family.closed_form(np.array([m]), n))[0]))
    if family.kind in ("scalar", "diagonal"):
        logs = family.log_abs_coefs(m)[n + 1:]
        if family.kind == "scalar":
            return LogMagnitude(_sum_logs(logs))
        return LogMagnitude(max(_sum_logs(logs[:, i]) for i in range(family.dimension)))
    row = _dense_row(family, n, m)
    return LogMagnitude(float(row[-1]))


def _sum_logs(logs) -> float:
    if np.any(np.isneginf(logs)):
        return -math.inf
    return math.fsum(logs)


def _dense_row(family, n, m):
    mats = family.stack(m)[n:].copy()
    mats[0] = np.eye(family.dimension)
    # one start only: run the sweep on the chain n..m and keep its first row
    return kernels.sweep_matrix_log_norms(np.ascontiguousarray(mats), family.norm_code)[0, :]


def dual_applied_log_norm(family: EvolutionFamily, m: int, k: int, xstar) -> LogMagnitude:
    """log ||(A_m^k)^* x*|| in the dual norm, applying transposes A(m)^T, ..., A(k+1)^T."""
    _check_order(m, k)
    family._require_operators()
    y = _as_vector(family, xstar)
    if family.kind == "scalar":
        base = safe_log(y[0])
        return LogMagnitude(base) * log_norm(family, m, k)
    code = kernels.NORM_CODES[family.dual_norm]
    col = kernels.dual_column(family.stack(m), y, m, k, code)
    return LogMagnitude(float(col[0]))


def probe_vectors(dimension: int, norm: str = "linf", n_random: int = 8, seed: int = 0) -> np.ndarray:
    """Canonical basis plus ``n_random`` seeded random vectors of unit ``norm``.

    A scalar system needs only ``[1.0]``.
    """
    if dimension == 1:
        return np.ones((1, 1))
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, dimension])))
    rand = rng.standard_normal((n_random, dimension))
    ordv = {"l1": 1, "l2": 2, "linf": np.inf}[norm]
    rand /= np.linalg.norm(rand, ord=ordv, axis=1, keepdims=True)
    return np.vstack([np.eye(dimension), rand])


class NormTable:
    """log ||A_m^n|| for every pair ``0 <= n <= m <= horizon``.

    Scalar and diagonal families keep prefix sums of log|A(j)| and produce
    entries on demand; other kinds hold a dense ``(M+1, M+1)`` array indexed
    ``[n, m]`` (NaN below the diagonal).
    """

    def __init__(self, family: EvolutionFamily, horizon: int, *, dense=None, prefix=None, zeros=None):
        self.family = family
        self.horizon = horizon
        self._dense = dense
        self._prefix = prefix
        self._zeros = zeros

    @property
    def family_id(self) -> str:
        return self.family.label or self.family.kind

    def entry(self, m: int, n: int) -> float:
        _check_order(m, n)
        if m > self.horizon:
            raise ContractError(f"m={m} beyond table horizon {self.horizon}")
        if self._dense is not None:
            return float(self._dense[n, m])
        return float(self.block(n, n)[0, m])

    def row(self, n: int) -> np.ndarray:
        """Entries ``(m, n)`` for ``m = n .. horizon``."""
        return self.block(n, n)[0, n:]

    def column(self, m: int) -> np.ndarray:
        """Entries ``(m, k)`` for ``k = 0 .. m``."""
        if self._dense is not None:
            return self._dense[: m + 1, m].copy()
        if self._prefix.ndim == 1:
            out = self._prefix[m] - self._prefix[: m + 1]
            out[self._zeros[m] > self._zeros[: m + 1]] = -np.inf
            return out
        diff = self._prefix[m][None, :] - self._prefix[: m + 1]
        diff[self._zeros[m][None, :] > self._zeros[: m + 1]] = -np.inf
        return diff.max(axis=1)

    def block(self, n_lo: int, n_hi: int) -> np.ndarray:
        """Full-width rows for starts ``n_lo..n_hi``, shape ``(rows, M+1)``."""
        M = self.horizon
        if self._dense is not None:
            return self._dense[n_lo: n_hi + 1]
        n = np.arange(n_lo, n_hi + 1)
        below = np.arange(M + 1)[None, :] < n[:, None]
        if self._prefix.ndim == 1:
            out = self._prefix[None, :] - self._prefix[n][:, None]
            out[self._zeros[None, :] > self._zeros[n][:, None]] = -np.inf
        else:
            diff = self._prefix[None, :, :] - self._prefix[n][:, None, :]
            diff[self._zeros[None, :, :] > self._zeros[n][:, None, :]] = -np.inf
            out = diff.max(axis=2)
        out[below] = np.nan
        return out

    def iter_blocks(self, n_hi: int | None = None, rows: int = 256):
        n_hi = self.horizon if n_hi is None else n_hi
        for lo in range(0, n_hi + 1, rows):
            hi = min(lo + rows - 1, n_hi)
            yield lo, self.block(lo, hi)

    def dense(self) -> np.ndarray:
        """The whole table as an array indexed ``[n, m]``."""
        if self._dense is not None:
            return self._dense
        if self.horizon > DENSE_HORIZON_CAP:
            raise ResourceLimitError(
                f"materializing a {self.horizon}-horizon table exceeds the dense cap {DENSE_HORIZON_CAP}")
        return self.block(0, self.horizon)


def build_norm_table(family: EvolutionFamily, horizon: int, cap: int = HORIZON_CAP) -> NormTable:
    """Materialize (or index for lazy evaluation) all log-norms up to ``horizon``."""
    if horizon < 1:
        raise ContractError("horizon must be at least 1")
    if horizon > cap:
        raise ResourceLimitError(f"horizon {horizon} exceeds cap {cap}; raise the cap explicitly to proceed")
    if family.kind in ("scalar", "diagonal"):
        logs = family.log_abs_coefs(horizon)
        zero = np.isneginf(logs)
        finite = np.where(zero, 0.0, logs)
        finite[0] = 0.0  # A(0) never enters A_m^n
        zero[0] = False
        prefix = np.cumsum(finite, axis=0)
        zeros = np.cumsum(zero, axis=0)
        return NormTable(family, horizon, prefix=prefix, zeros=zeros)
    if horizon > DENSE_HORIZON_CAP:
        raise ResourceLimitError(
            f"horizon {horizon} exceeds the dense-table cap {DENSE_HORIZON_CAP} for {family.kind} families")
    if family.kind == "closed-form":
        out = np.full((horizon + 1, horizon + 1), np.nan)
        for n in range(horizon + 1):
            m = np.arange(n, horizon + 1)
            vals = np.asarray(family.closed_form(m, n), dtype=float)
            out[n, n:] = vals
            out[n, n] = 0.0
        return NormTable(family, horizon, dense=out)
    mats = np.ascontiguousarray(family.stack(horizon))
    return NormTable(family, horizon, dense=kernels.sweep_matrix_log_norms(mats, family.norm_code))


def _combine(logs: np.ndarray, norm: str) -> np.ndarray:
    """Vector norm from per-component log-magnitudes along the last axis."""
    if norm == "linf":
        return logs.max(axis=-1)
    if norm == "l1":
        return np.logaddexp.reduce(logs, axis=-1)
    return 0.5 * np.logaddexp.reduce(2.0 * logs, axis=-1)


class AppliedTable:
    """``log ||A_m^n x||`` for one fixed vector ``x``, laid out like a NormTable.

    Scalar tables (any kind of dimension 1) shift the operator entries by
    ``log |x|``; diagonal tables combine per-component prefix sums; dense
    families run one vector sweep over all starts.
    """

    def __init__(self, table: NormTable, x):
        fam = table.family
        self.table = table
        self.horizon = table.horizon
        self.x = _as_vector(fam, x)
        self._dense = None
        if fam.dimension == 1:
            self._shift = safe_log(self.x[0])
        elif fam.kind == "diagonal":
            self._logx = safe_log(self.x)
        elif fam.kind == "dense":
            mats = np.ascontiguousarray(fam.stack(table.horizon))
            self._dense = kernels.sweep_vector_log_norms(mats, self.x, fam.norm_code)
        else:
            raise UnsupportedRepresentation(
                f"{fam.kind} families of dimension {fam.dimension} carry no operators to apply")

    def block(self, n_lo: int, n_hi: int) -> np.ndarray:
        fam = self.table.family
        if self._dense is not None:
            return self._dense[n_lo: n_hi + 1]
        if fam.dimension == 1:
            return self.table.block(n_lo, n_hi) + self._shift
        prefix, zeros = self.table._prefix, self.table._zeros
        n = np.arange(n_lo, n_hi + 1)
        comp = prefix[None, :, :] - prefix[n][:, None, :] + self._logx
        comp[zeros[None, :, :] > zeros[n][:, None, :]] = -np.inf
        out = _combine(comp, fam.norm)
        out[np.arange(self.horizon + 1)[None, :] < n[:, None]] = np.nan
        return out

    def row(self, n: int) -> np.ndarray:
        return self.block(n, n)[0, n:]

    def iter_blocks(self, n_hi: int | None = None, rows: int = 256):
        n_hi = self.horizon if n_hi is None else n_hi
        for lo in range(0, n_hi + 1, rows):
            yield lo, self.block(lo, min(lo + rows - 1, n_hi))
