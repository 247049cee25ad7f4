"""Envelope certificates for the four stability classes and the estimator
that picks the strongest class consistent with a finite norm table.

All bounds are linear in log space: ``log N(n) - alpha (m - n) + beta n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .errors import ContractError, NoRateDerivable
from .evolution import EvolutionFamily, NormTable, build_norm_table

KINDS = ("UES", "SES", "ES", "NES")
# strongest first; a failed confirmation moves one step right
LADDER = ("UES", "SES", "ES", "NES", "none")
CHECK_TOL = 1e-9


@dataclass(frozen=True)
class StabilityEnvelope:
    """Bound ``N(n) e^{-alpha (m-n)} e^{beta n}`` on ``||A_m^n||``.

    ``log_N`` is the log of a constant prefactor; NES envelopes instead carry
    ``log_Nfun``, a vectorized nondecreasing ``n -> log N(n)``.
    """

    kind: str
    alpha: float
    log_N: float = 0.0
    beta: float = 0.0
    log_Nfun: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown envelope kind {self.kind!r}")
        if not self.alpha > 0:
            raise ContractError(f"alpha must be positive, got {self.alpha}")
        if not self.log_N >= 0:
            raise ContractError("N must be at least 1")
        if not self.beta >= 0:
            raise ContractError("beta must be non-negative")
        if self.kind == "UES" and self.beta != 0:
            raise ContractError("a UES envelope has beta = 0")
        if self.kind == "SES" and not self.beta < self.alpha:
            raise ContractError(f"SES needs beta < alpha, got beta={self.beta}, alpha={self.alpha}")
        if self.kind == "NES" and self.log_Nfun is None:
            raise ContractError("NES envelope needs N(n)")

    @classmethod
    def ues(cls, N: float, alpha: float) -> StabilityEnvelope:
        return cls("UES", alpha, _log_prefactor(N))

    @classmethod
    def ses(cls, N: float, alpha: float, beta: float) -> StabilityEnvelope:
        return cls("SES", alpha, _log_prefactor(N), beta)

    @classmethod
    def es(cls, N: float, alpha: float, beta: float) -> StabilityEnvelope:
        return cls("ES", alpha, _log_prefactor(N), beta)

    @classmethod
    def nes(cls, alpha: float, log_Nfun) -> StabilityEnvelope:
        return cls("NES", alpha, log_Nfun=log_Nfun)

    def with_kind(self, kind: str) -> StabilityEnvelope:
        """Same bound, relabelled (valid for any weaker kind)."""
        if kind == "NES" and self.log_Nfun is None:
            logN, beta = self.log_N, self.beta
            return StabilityEnvelope("NES", self.alpha, log_Nfun=lambda n: logN + beta * np.asarray(n, float))
        return StabilityEnvelope(kind, self.alpha, self.log_N, self.beta, self.log_Nfun)

    def log_prefactor(self, n) -> np.ndarray:
        """log of the full start-time factor, ``log N(n) + beta n``."""
        n = np.asarray(n, dtype=float)
        if self.log_Nfun is not None:
            return np.asarray(self.log_Nfun(n), dtype=float) + self.beta * n
        return self.log_N + self.beta * n

    def log_bound(self, m, n) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        return self.log_prefactor(n) - self.alpha * (m - np.asarray(n, dtype=float))


def _log_prefactor(N: float) -> float:
    if not N >= 1:
        raise ContractError(f"N must be at least 1, got {N}")
    return math.log(N)


@dataclass(frozen=True)
class LinearLogBound:
    """``log ||A_m^n|| <= log_N + coef_m * m + coef_n * n`` (reparameterized forms)."""

    log_N: float
    coef_m: float
    coef_n: float
    label: str = ""

    def log_bound(self, m, n):
        return self.log_N + self.coef_m * np.asarray(m, float) + self.coef_n * np.asarray(n, float)


@dataclass
class CertificateReport:
    verdict: str  # "pass" | "fail"
    worst_pair: tuple[int, int] | None
    margin: float
    horizon: int
    kind: str = ""
    triples_checked: int = 0
    triple_violations: int = 0

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


def check_bound(table: NormTable, bound, *, kind: str = "", triples: int = 64, seed: int = 0,
                tol: float = CHECK_TOL) -> CertificateReport:
    """Check ``entry(m, n) <= bound.log_bound(m, n)`` on every pair of the table.

    The three-index form ``||A_m^p|| <= bound(m, n) ||A_n^p||`` is spot-checked
    on ``triples`` seeded triples.
    """
    M = table.horizon
    worst, worst_pair = math.inf, None
    for lo, block in table.iter_blocks():
        n = np.arange(lo, lo + block.shape[0])
        m = np.arange(M + 1)
        with np.errstate(invalid="ignore"):
            margin = bound.log_bound(m[None, :], n[:, None]) - block
        margin = np.where(np.isnan(block), np.inf, margin)
        margin = np.where(np.isneginf(block), np.inf, margin)
        idx = np.unravel_index(np.argmin(margin), margin.shape)
        if margin[idx] < worst:
            worst = float(margin[idx])
            worst_pair = (int(m[idx[1]]), int(n[idx[0]]))
    violations = 0
    if triples:
        rng = np.random.default_rng(seed)
        trip = np.sort(rng.integers(0, M + 1, size=(triples, 3)), axis=1)
        for p, nn, mm in trip:
            lhs = table.entry(mm, p)
            rhs = float(bound.log_bound(mm, nn)) + table.entry(nn, p)
            if lhs > rhs + tol:
                violations += 1
    ok = worst >= -tol and violations == 0
    return CertificateReport("pass" if ok else "fail", worst_pair, worst, M, kind,
                             triples, violations)


def check_envelope(table: NormTable, env: StabilityEnvelope, **kw) -> CertificateReport:
    """Two-index check of ``env`` on every pair, plus sampled three-index triples."""
    if env.kind == "NES":
        logN = np.asarray(env.log_Nfun(np.arange(table.horizon + 1, dtype=float)), dtype=float)
        if np.any(logN < -CHECK_TOL) or np.any(np.diff(logN) < -CHECK_TOL):
            raise ContractError("N(n) must be nondecreasing and at least 1")
    return check_bound(table, env, kind=env.kind, **kw)


def geometric_rate(N: float, k: int, a_k: float) -> float:
    """Uniform rate ``-ln(N a_k) / k`` built from one decay sample ``||A_{n+k}^n|| <= N a_k``."""
    if k < 1 or not a_k > 0 or not N >= 1:
        raise ContractError("need N >= 1, k >= 1, a_k > 0")
    if N * a_k >= 1:
        raise NoRateDerivable(f"N * a_k = {N * a_k} >= 1; no uniform rate follows")
    return -math.log(N * a_k) / k


def geometric_prefactor(N: float, k: int, a_k: float) -> float:
    """The matching constant ``N e^{alpha k}`` that makes the UES envelope hold."""
    return N * math.exp(geometric_rate(N, k, a_k) * k)


@dataclass(frozen=True)
class ESForms:
    """One e.s. bound in three parameterizations:
    ``e^{-alpha(m-n)} e^{beta n}``, ``e^{-nu(m-n)} e^{beta m}``, ``e^{-delta m} e^{nu n}``."""

    alpha: float
    beta: float
    nu: float
    delta: float


def transform_es(alpha: float, beta: float) -> ESForms:
    return ESForms(alpha, beta, alpha + beta, alpha)


def es_from_nu_beta(nu: float, beta: float) -> tuple[float, float]:
    """Inverse of the (nu, beta) form: returns (alpha, beta)."""
    if not 0 <= beta < nu:
        raise ContractError("need 0 <= beta < nu")
    return nu - beta, beta


def es_from_nu_delta(nu: float, delta: float) -> tuple[float, float]:
    """Inverse of the (nu, delta) form: returns (alpha, beta)."""
    if not 0 < delta <= nu:
        raise ContractError("need 0 < delta <= nu")
    return delta, nu - delta


def transform_ses(alpha: float, beta: float) -> float:
    """``nu = alpha + beta``, which lies in ``[alpha, 2 alpha)`` exactly when s.e.s."""
    if not alpha > 0 or not 0 <= beta < alpha:
        raise ContractError(f"s.e.s. needs 0 <= beta < alpha, got alpha={alpha}, beta={beta}")
    return alpha + beta


def ses_from_nu(alpha: float, nu: float) -> float:
    if not alpha <= nu < 2 * alpha:
        raise ContractError("need alpha <= nu < 2 alpha")
    return nu - alpha


def es_form_ii(log_N: float, nu: float, beta: float) -> LinearLogBound:
    # N e^{-nu(m-n)} e^{beta m}
    return LinearLogBound(log_N, beta - nu, nu, "es-nu-beta")


def es_form_iii(log_N: float, nu: float, delta: float) -> LinearLogBound:
    # N e^{-delta m} e^{nu n}
    return LinearLogBound(log_N, -delta, nu, "es-delta-nu")


def ses_form(log_N: float, alpha: float, nu: float) -> LinearLogBound:
    # N e^{-alpha m} e^{nu n}
    return LinearLogBound(log_N, -alpha, nu, "ses-alpha-nu")


@dataclass
class EstimatorConfig:
    min_horizon: int = 64
    gap_floor: int = 8
    eps_alpha: float = 1e-3
    tol_alpha: float = 1e-3
    tol_beta: float = 1e-2
    superlinear_tol: float = 1.0
    boundary_tol: float = 1e-2
    alpha_cap: float = 50.0
    pool_width: int = 8
    relaxed_factor: float = 0.5


@dataclass
class ClassificationReport:
    verdict: str
    alpha_hat: float
    alpha_used: float
    beta_hat: float
    intercept: float
    fit_error: float
    superlinear_flag: bool
    boundary: bool
    horizon: int
    logK: np.ndarray
    logK_monotone: np.ndarray
    residuals: np.ndarray
    slopes: np.ndarray
    estimated_verdict: str = ""
    alpha_cert: float = 0.0
    beta_relaxed: float = math.nan
    certificate: CertificateReport | None = None
    envelope: StabilityEnvelope | None = None
    notes: list = field(default_factory=list)

    @property
    def stable(self) -> bool:
        return self.verdict != "none"

    def implies(self, kind: str) -> bool:
        """Whether the verdict is at least as strong as ``kind``."""
        return self.verdict != "none" and LADDER.index(self.verdict) <= LADDER.index(kind)


def _lstsq_line(x, y):
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(slope), float(icpt)


def _forward_max(y, width):
    """``out[n] = max(y[n : n + width])`` (shorter windows at the end)."""
    if width <= 1:
        return y.copy()
    padded = np.concatenate([y, np.full(width - 1, -np.inf)])
    return np.lib.stride_tricks.sliding_window_view(padded, width).max(axis=1)


def _growth(logK, half, cfg):
    """Least-squares growth of the forward-pooled ``log K`` over ``n <= half``.

    Returns slope, intercept, residuals and the superlinear flag: the line
    fitted to the first half of the range undershoots the last quartile by
    more than ``superlinear_tol`` plus its first-half misfit.
    """
    pooled = _forward_max(logK, cfg.pool_width)
    ns = np.arange(half + 1, dtype=float)
    y = pooled[: half + 1]
    if not np.all(np.isfinite(y)):
        return math.nan, math.nan, np.full(half + 1, np.nan), False
    slope, icpt = _lstsq_line(ns, y)
    residuals = y - (slope * ns + icpt)
    q = max(half // 4, 2)
    b1, i1 = _lstsq_line(ns[: 2 * q], y[: 2 * q])
    early = float(np.abs(y[: 2 * q] - (b1 * ns[: 2 * q] + i1)).max())
    late = float((y[-q:] - (b1 * ns[-q:] + i1)).max())
    return slope, icpt, residuals, bool(late > cfg.superlinear_tol + early)


def _log_K(table, alpha):
    M = table.horizon
    logK = np.empty(M + 1)
    for lo, block in table.iter_blocks():
        n = np.arange(lo, lo + block.shape[0])
        gaps = np.arange(M + 1)[None, :] - n[:, None]
        with np.errstate(invalid="ignore"):
            vals = block + alpha * gaps
        logK[n] = np.nanmax(np.where(np.isneginf(block), -np.inf, vals), axis=1)
    return logK


def estimate_envelope(table: NormTable, config: EstimatorConfig | None = None) -> ClassificationReport:
    """Estimate decay rate, nonuniformity exponent and the strongest class.

    1. For each start ``n <= M/2`` fit the lowest line lying above
       ``(m - n, entry(m, n))`` over gaps ``>= gap_floor`` (least total gap,
       a linear-feasibility fit); ``alpha_hat`` is minus the largest slope,
       clamped at 0.
    2. ``log K(n) = max_m entry(m, n) + alpha (m - n)`` with
       ``alpha = (1 - eps_alpha) alpha_hat``.
    3. ``beta_hat`` is the least-squares slope, over ``n <= M/2``, of
       ``max(log K[n : n + pool_width])``. The forward max absorbs
       short-period oscillation such as parity effects.

    Uniform stability only needs *some* positive rate. At a rate this close
    to the worst observed one, random products make ``log K`` wander like a
    driftless walk, so ``K`` is also computed at ``relaxed_factor * alpha``.
    A flat curve at either rate gives UES, certified at that rate. The
    superlinear test reads the relaxed curve, which is far less noisy; the
    SES/ES split stays at the near-optimal rate.
    """
    cfg = config or EstimatorConfig()
    M = table.horizon
    if M < cfg.min_horizon:
        raise ContractError(f"horizon {M} below the estimator minimum {cfg.min_horizon}")
    half = M // 2

    slopes = np.full(half + 1, np.nan)
    for lo, block in table.iter_blocks(half):
        slopes[lo: lo + block.shape[0]] = kernels.row_envelope_slopes(
            np.ascontiguousarray(block), lo, cfg.gap_floor)
    finite = slopes[np.isfinite(slopes)]
    if finite.size == 0:
        # no nonzero products past the gap floor: faster than any exponential
        raw_alpha = math.inf
    else:
        raw_alpha = -float(finite.max())
    alpha_hat = max(raw_alpha, 0.0)
    alpha_used = min((1.0 - cfg.eps_alpha) * alpha_hat, cfg.alpha_cap)
    alpha_relaxed = cfg.relaxed_factor * alpha_used

    logK = _log_K(table, alpha_used)
    beta_hat, intercept, residuals, _ = _growth(logK, half, cfg)
    logK_r = _log_K(table, alpha_relaxed)
    beta_r, intercept_r, residuals_r, superlinear = _growth(logK_r, half, cfg)

    alpha_cert = alpha_used
    if not alpha_hat > cfg.tol_alpha:
        verdict = "none"
    elif beta_hat <= cfg.tol_beta:
        verdict = "UES"
    elif beta_r <= cfg.tol_beta:
        verdict = "UES"
        alpha_cert, logK, beta_hat, intercept, residuals = alpha_relaxed, logK_r, beta_r, intercept_r, residuals_r
    elif superlinear:
        verdict = "NES" if np.all(np.isfinite(logK)) else "none"
    elif beta_hat < alpha_hat - cfg.tol_beta:
        verdict = "SES"
    else:
        verdict = "ES"

    fit_error = float(np.abs(residuals).max()) if np.all(np.isfinite(residuals)) else math.inf
    boundary = bool(abs(raw_alpha) <= cfg.boundary_tol or (
        verdict in ("SES", "ES") and abs(alpha_hat - beta_hat) <= cfg.boundary_tol))

    report = ClassificationReport(verdict, alpha_hat, alpha_used, beta_hat, intercept, fit_error,
                                  superlinear, boundary, M, logK, np.maximum.accumulate(logK),
                                  residuals, slopes, estimated_verdict=verdict,
                                  alpha_cert=alpha_cert, beta_relaxed=beta_r)
    if alpha_cert != alpha_used:
        report.notes.append(f"uniform bound certified at the relaxed rate {alpha_cert:.6g}")
    return report


def confirming_envelope(report: ClassificationReport) -> StabilityEnvelope | None:
    """Envelope built from the fit: ``log N = intercept + 2 * fit_error`` (at least 0)."""
    v, a = report.verdict, report.alpha_cert
    if v == "none" or not a > 0 or not math.isfinite(report.fit_error):
        return None
    half = (report.horizon // 2) + 1
    if v == "UES":
        # the fit covers n <= M/2; later starts can still peak a little higher
        top = report.intercept + max(report.beta_hat, 0.0) * (half - 1) + 2 * report.fit_error
        return StabilityEnvelope("UES", a, max(0.0, top, float(np.max(report.logK))))
    if v == "NES":
        curve = report.logK_monotone.copy()
        return StabilityEnvelope.nes(a, lambda n: _extend(curve, n))
    logN = max(0.0, report.intercept + 2 * report.fit_error)
    beta = max(report.beta_hat, 0.0)
    if v == "SES":
        return StabilityEnvelope("SES", a, logN, beta)
    return StabilityEnvelope("ES", a, logN, beta)


def _extend(curve, n):
    idx = np.clip(np.asarray(n, dtype=int), 0, curve.size - 1)
    return np.maximum(curve[idx], 0.0)


def classify(family: EvolutionFamily, horizon: int = 400, config: EstimatorConfig | None = None,
             table: NormTable | None = None) -> ClassificationReport:
    """Estimate the class at ``horizon`` and confirm it with an envelope check.

    A failed confirmation downgrades the verdict by one step. Verdicts mean
    "consistent at this horizon", not an asymptotic proof.
    """
    table = table if table is not None else build_norm_table(family, horizon)
    report = estimate_envelope(table, config)
    env = confirming_envelope(report)
    if env is not None:
        cert = check_envelope(table, env)
        report.certificate = cert
        report.envelope = env
        if not cert.passed:
            report.verdict = LADDER[LADDER.index(report.verdict) + 1]
            report.notes.append(f"confirming {env.kind} certificate failed at {cert.worst_pair}; downgraded")
    return report
