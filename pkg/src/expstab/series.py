"""Datko-type (forward) and Barbashin-type (adjoint) series tests.

One weighted implementation covers every variant: the forward sum
``sum_{m>=n} e^{d(m-n)} ||A_m^p x||`` is compared against
``D(n) e^{cn} ||A_n^p x||`` and the adjoint sum
``sum_{k<=m} e^{b(m-k)} ||(A_m^k)^* x*||`` against ``B e^{cm} ||x*||``.
Setting ``c = 0`` or passing ``D`` as a function of ``n`` recovers the
uniform and nonuniform statements. Sums run in ascending index order in
log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import kernels
from .certificates import CHECK_TOL, StabilityEnvelope, classify
from .errors import ContractError, UnsupportedRepresentation
from .evolution import (AppliedTable, EvolutionFamily, NormTable, _as_vector, _combine,
                        build_norm_table, probe_vectors, vector_norm)
from .logmag import LogMagnitude, log_sum, safe_log

# relative growth allowed between horizon H/2 and H before a sum counts as divergent
DOUBLING_TOL = 1e-3


def resolved(log_B: float, horizon: int) -> bool:
    """Whether a sup-sum ``B`` that passed the doubling test is short enough to be
    believed: at most the ``H/2 + 1`` terms of the half window.

    Beyond that the window cannot tell a bounded sum from one still climbing
    (``H/2`` unit terms already reach it), and near-critical families whose
    sums peak early and explode later pass the doubling test.
    """
    return log_B <= math.log(horizon // 2 + 1)


@dataclass
class SeriesReport:
    """Outcome of one series test.

    ``tail_bound`` is ``LogMagnitude.unbounded()`` when no valid bound on the
    omitted terms exists. Uniform checks are empirical: their ``tail_bound``
    holds the growth observed between horizons ``H/2`` and ``H``.
    """

    partial_sum: LogMagnitude
    terms_used: int
    tail_bound: LogMagnitude
    bound_checked: LogMagnitude
    verdict: str  # "pass" | "fail" | "inconclusive"
    witness: dict[str, Any] = field(default_factory=dict)
    empirical: bool = False
    divergent: bool = False
    growth_ratio: float = math.nan
    resolved: bool = True  # empirical checks: B small enough for the horizon

    @property
    def total(self) -> LogMagnitude:
        return self.partial_sum + self.tail_bound


def _verdict(partial: float, tail: float, bound: float) -> str:
    # a partial sum that already exceeds the bound fails whatever the tail
    if partial > bound + CHECK_TOL:
        return "fail"
    if tail == math.inf:
        return "inconclusive"
    return "pass" if float(np.logaddexp(partial, tail)) <= bound + CHECK_TOL else "fail"


def _log_D(D, n: int) -> float:
    val = D(n) if callable(D) else D
    if not val >= 1:
        raise ContractError(f"bound constant must be at least 1, got {val}")
    return math.log(val)


def tail_bound(envelope: StabilityEnvelope, weight: float, cutoff_gap: float, n: int = 0) -> LogMagnitude:
    """Bound on ``sum_{g >= cutoff_gap} e^{weight g} ||A_{n+g}^n||`` from ``envelope``.

    Geometric closure: ``N(n) e^{beta n} e^{(weight-alpha) gap} / (1 - e^{weight-alpha})``.
    Unbounded when the weight reaches the decay rate.
    """
    r = weight - envelope.alpha
    if r >= 0:
        return LogMagnitude.unbounded()
    if cutoff_gap == math.inf:
        return LogMagnitude.zero()
    lp = float(envelope.log_prefactor(n))
    return LogMagnitude(lp + r * cutoff_gap - math.log(-math.expm1(r)))


def derive_datko_constant(N: float, alpha: float, beta: float, d: float) -> float:
    """``D = 1 + N e^alpha / (e^alpha - e^d)``, valid for ``0 < d < alpha``.

    Any family bounded by ``N e^{-alpha(m-n)} e^{beta n}`` then satisfies the
    forward sum bound with this ``D`` and weight ``c = beta``. ``beta`` is
    accepted for symmetry with the adjoint constant; it does not enter.
    """
    if not d < alpha:
        raise ContractError(f"weight d={d} must be below the rate alpha={alpha}")
    if d < 0:
        raise ContractError("d must be non-negative")
    return 1.0 + N / (-math.expm1(d - alpha))


def derive_barbashin_constant(N: float, alpha: float, beta: float, b: float) -> float:
    """``B = 1 + N e^{alpha+beta} / (e^{alpha+beta} - e^b)`` for ``beta < b < alpha + beta``."""
    if not beta < b < alpha + beta:
        raise ContractError(f"b={b} must lie strictly between beta={beta} and alpha+beta={alpha + beta}")
    return 1.0 + N / (-math.expm1(b - alpha - beta))


def _resolve_envelope(table: NormTable, envelope):
    if envelope == "fit":
        return classify(table.family, table.horizon, table=table).envelope
    return envelope


def datko_sum(table: NormTable, d: float, n: int, p: int, x, horizon: int | None = None, *,
              D: float | Callable[[int], float] = 1.0, c: float = 0.0,
              envelope: StabilityEnvelope | str | None = None) -> SeriesReport:
    """Forward weighted sum ``sum_{m=n}^{H} e^{d(m-n)} ||A_m^p x||`` checked against
    ``D(n) e^{cn} ||A_n^p x||`` (which is ``D e^{cn} ||x||`` when ``p == n``).

    The omitted tail past ``H`` is bounded through ``envelope`` (or a fitted
    one with ``envelope="fit"``); without it the verdict cannot be "pass".
    """
    if d < 0:
        raise ContractError(f"weight d must be non-negative, got {d}")
    H = table.horizon if horizon is None else horizon
    if not 0 <= p <= n <= H <= table.horizon:
        raise ContractError(f"need 0 <= p <= n <= horizon <= {table.horizon}, got p={p}, n={n}, horizon={H}")
    applied = AppliedTable(table, x)
    if applied.x.size and not np.any(applied.x):
        raise ContractError("x must be nonzero")
    row = applied.row(p)[n - p: H - p + 1]  # m = n .. H
    terms = row + d * np.arange(row.size)
    partial = log_sum(terms)
    base = float(row[0])  # log ||A_n^p x||

    if np.isneginf(row[-1]):
        tail = -math.inf  # the orbit hit zero and stays there
    else:
        env = _resolve_envelope(table, envelope)
        if env is None:
            tail = math.inf
        else:
            tail = base + tail_bound(env, d, H - n + 1, n).log_value
    bound = _log_D(D, n) + c * n + base
    return SeriesReport(LogMagnitude(partial), int(row.size), LogMagnitude(tail), LogMagnitude(bound),
                        _verdict(partial, tail, bound),
                        witness={"n": n, "p": p, "x": applied.x.tolist(), "horizon": H})


def _row_sums(applied, lo, block, weight):
    """Weighted log-sums over each row of ``block`` (starts ``lo..``)."""
    n = np.arange(lo, lo + block.shape[0])
    gaps = np.arange(block.shape[1])[None, :] - n[:, None]
    with np.errstate(invalid="ignore"):
        v = np.where(np.isnan(block), -np.inf, block + weight * gaps)
    return np.logaddexp.reduce(v, axis=1)


def _sup_forward(applied: AppliedTable, d: float, n_hi: int, H: int):
    """``max_{n <= n_hi} log sum_{m=n}^{H} e^{d(m-n)} ||A_m^n x||`` and its argmax."""
    best, arg = -math.inf, 0
    for lo, block in applied.iter_blocks(n_hi):
        sums = _row_sums(applied, lo, block[:, : H + 1], d)
        i = int(np.argmax(sums))
        if sums[i] > best:
            best, arg = float(sums[i]), lo + i
    return best, arg


def _empirical_verdict(divergent: bool, ok: bool) -> str:
    if divergent:
        return "fail"
    return "pass" if ok else "inconclusive"


def _doubling(full: float, half: float):
    if full == -math.inf:
        return 1.0, False
    growth = math.exp(full - half) if math.isfinite(half) else math.inf
    if not math.isfinite(full):
        growth = math.inf
    return growth, bool(growth > 1.0 + DOUBLING_TOL)


def datko_check_uniform(table: NormTable, probes=None, horizon: int | None = None,
                        d: float = 0.0) -> SeriesReport:
    """Empirical uniform constant ``sup_{n <= H/2, x} sum_{m=n}^{H} e^{d(m-n)} ||A_m^n x|| / ||x||``.

    The same supremum at horizon ``H/2`` (over ``n <= H/4``) is compared to
    it; growth beyond ``1 + 1e-3`` flags divergence and a "fail" verdict.
    """
    if d < 0:
        raise ContractError(f"weight d must be non-negative, got {d}")
    H = table.horizon if horizon is None else horizon
    if H > table.horizon or H < 2:
        raise ContractError(f"horizon must lie in [2, {table.horizon}]")
    fam = table.family
    probes = probe_vectors(fam.dimension, fam.norm) if probes is None else np.atleast_2d(probes)
    if len(probes) == 0:
        raise ContractError("probe set is empty")
    full, half, witness = -math.inf, -math.inf, {}
    for j, x in enumerate(probes):
        applied = AppliedTable(table, x)
        lognorm = float(applied.block(0, 0)[0, 0])
        if lognorm == -math.inf:
            raise ContractError("probe vectors must be nonzero")
        f, n_arg = _sup_forward(applied, d, H // 2, H)
        h, _ = _sup_forward(applied, d, H // 4, H // 2)
        if f - lognorm > full:
            full, witness = f - lognorm, {"n": n_arg, "probe": j, "x": applied.x.tolist(), "horizon": H}
        half = max(half, h - lognorm)
    growth, divergent = _doubling(full, half)
    increment = LogMagnitude(full) if growth == math.inf else LogMagnitude(
        full + math.log(max(-math.expm1(half - full), 0.0)) if full > half else -math.inf)
    ok = resolved(full, H)
    return SeriesReport(LogMagnitude(full), H + 1, increment, LogMagnitude(half),
                        _empirical_verdict(divergent, ok), witness, empirical=True,
                        divergent=divergent, growth_ratio=growth, resolved=ok)


def _dual_column(family: EvolutionFamily, table: NormTable | None, xstar: np.ndarray, m: int, n_low: int):
    """``log ||(A_m^k)^* x*||`` in the dual norm for ``k = n_low..m``."""
    dual = kernels.DUAL_NORM[family.norm]
    if family.dimension == 1:
        tab = table if table is not None and table.horizon >= m else build_norm_table(family, m)
        return tab.column(m)[n_low:] + safe_log(xstar[0])
    if family.kind == "diagonal":
        tab = table if table is not None and table.horizon >= m else build_norm_table(family, m)
        prefix, zeros = tab._prefix, tab._zeros
        comp = prefix[m][None, :] - prefix[n_low: m + 1] + safe_log(xstar)[None, :]
        comp[zeros[m][None, :] > zeros[n_low: m + 1]] = -np.inf
        return _combine(comp, dual)
    if family.kind == "dense":
        mats = np.ascontiguousarray(family.stack(m))
        return kernels.dual_column(mats, xstar, m, n_low, kernels.NORM_CODES[dual])
    raise UnsupportedRepresentation(f"{family.kind} families carry no operators to transpose")


def barbashin_sum(table_or_family: NormTable | EvolutionFamily, b: float, m: int, n_low: int, xstar, *,
                  B: float = 1.0, c: float = 0.0) -> SeriesReport:
    """Adjoint weighted sum ``sum_{k=n_low}^{m} e^{b(m-k)} ||(A_m^k)^* x*||`` against
    ``B e^{cm} ||x*||`` (dual norm). The sum is finite, so the tail is zero."""
    if b < 0:
        raise ContractError(f"weight b must be non-negative, got {b}")
    if not 0 <= n_low <= m:
        raise ContractError(f"need 0 <= n_low <= m, got n_low={n_low}, m={m}")
    if isinstance(table_or_family, NormTable):
        table, family = table_or_family, table_or_family.family
    else:
        table, family = None, table_or_family
    y = _as_vector(family, xstar)
    if not np.any(y):
        raise ContractError("x* must be nonzero")
    col = _dual_column(family, table, y, m, n_low)  # k = n_low .. m
    terms = col + b * (m - np.arange(n_low, m + 1))
    partial = log_sum(terms)
    dual = family.dual_norm
    xnorm = float(col[-1]) if family.dimension == 1 else math.log(vector_norm(family, y, dual))
    bound = _log_D(B, m) + c * m + xnorm
    return SeriesReport(LogMagnitude(partial), int(col.size), LogMagnitude.zero(), LogMagnitude(bound),
                        _verdict(partial, -math.inf, bound),
                        witness={"m": m, "n_low": n_low, "xstar": y.tolist()})


def _column_sums(table, b: float, H: int) -> np.ndarray:
    """``log sum_{k=0}^{m} e^{b(m-k)} entry(m, k)`` for every ``m <= H``."""
    acc = np.full(H + 1, -np.inf)
    for lo, block in table.iter_blocks(H):
        n = np.arange(lo, lo + block.shape[0])
        gaps = np.arange(H + 1)[None, :] - n[:, None]
        with np.errstate(invalid="ignore"):
            v = np.where(np.isnan(block[:, : H + 1]), -np.inf, block[:, : H + 1] + b * gaps)
        acc = np.logaddexp(acc, np.logaddexp.reduce(v, axis=0))
    return acc


def barbashin_check_operator(table: NormTable, b: float = 0.0, horizon: int | None = None) -> SeriesReport:
    """Empirical ``sup_{m <= H} sum_{k=0}^{m} e^{b(m-k)} ||A_m^k||`` with the doubling test."""
    if b < 0:
        raise ContractError(f"weight b must be non-negative, got {b}")
    H = table.horizon if horizon is None else horizon
    if H > table.horizon or H < 2:
        raise ContractError(f"horizon must lie in [2, {table.horizon}]")
    sums = _column_sums(table, b, H)
    full_m = int(np.argmax(sums))
    full, half = float(sums[full_m]), float(sums[: H // 2 + 1].max())
    growth, divergent = _doubling(full, half)
    increment = LogMagnitude(full) if growth == math.inf else LogMagnitude(
        full + math.log(max(-math.expm1(half - full), 0.0)) if full > half else -math.inf)
    ok = resolved(full, H)
    return SeriesReport(LogMagnitude(full), H + 1, increment, LogMagnitude(half),
                        _empirical_verdict(divergent, ok), {"m": full_m, "horizon": H},
                        empirical=True, divergent=divergent, growth_ratio=growth, resolved=ok)


def operator_sum_curve(table: NormTable, b: float = 0.0) -> np.ndarray:
    """Per-``m`` log of the operator-norm adjoint sums (for plotting and the explorer)."""
    return _column_sums(table, b, table.horizon)


def pointwise_sum_curve(table: NormTable, x, b: float = 0.0) -> np.ndarray:
    """Per-``m`` log of ``sum_{k=0}^{m} e^{b(m-k)} ||A_m^k x||``."""
    return _column_sums(AppliedTable(table, x), b, table.horizon)
