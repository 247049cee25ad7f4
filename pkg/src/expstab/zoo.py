"""Reference families: the parity-split example, simple baselines and seeded
random generators, plus the brute-force comparison against closed forms.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ContractError
from .evolution import EvolutionFamily, build_norm_table

# Random families draw A(n) from PCG64 seeded by SeedSequence([seed, n, tag]).
RNG_ALGORITHM = "PCG64/SeedSequence(seed,n,tag) v1"
GENERATORS = {"dense": 0, "upper-triangular": 1, "rotation-contraction": 2}


def _log_c(c: float) -> float:
    return math.log(c) if c > 0 else -math.inf


def _parity_log_a(n):
    """log a_n: -n for even n, n + 1 for odd n."""
    n = np.asarray(n)
    return np.where(n % 2 == 0, -n, n + 1).astype(float)


def paper_example(c: float, norm: str = "linf") -> EvolutionFamily:
    """Scalar family ``A(n) = c * a_n`` with ``a_n = e^-n`` (n even), ``e^(n+1)`` (n odd)."""
    if not c >= 0:
        raise ContractError(f"the parity example needs c >= 0, got {c}")
    logc = _log_c(c)

    def log_abs(n):
        return logc + _parity_log_a(n)

    def coef(n):
        with np.errstate(over="ignore"):
            return float(c * np.exp(_parity_log_a(n)))

    return EvolutionFamily("scalar", 1, norm, coef=coef, log_abs=log_abs,
                           label=f"paper-example(c={c:g})", params={"c": c})


def closed_form_log_norm(c: float, m, n: int):
    """``(m - n) log c + log a_mn`` from the four-case parity table; 0 when m == n.

    ``m`` may be an array; ``n`` is a single start index.
    """
    m_arr = np.asarray(m)
    logc = _log_c(c)
    gap = (m_arr - n).astype(float)
    if n % 2 == 0:
        tail = np.where(m_arr % 2 == 0, 0.0, m_arr + 1.0)
    else:
        tail = np.where(m_arr % 2 == 0, -n - 1.0, gap)
    with np.errstate(invalid="ignore"):
        out = np.where(m_arr == n, 0.0, gap * logc + tail)
    return float(out) if out.ndim == 0 else out


def paper_example_closed_form(c: float, norm: str = "linf") -> EvolutionFamily:
    return EvolutionFamily("closed-form", 1, norm,
                           closed_form=lambda m, n: closed_form_log_norm(c, m, n),
                           label=f"paper-example-closed-form(c={c:g})", params={"form": "paper-example", "c": c})


def constant_scalar(a: float, norm: str = "linf") -> EvolutionFamily:
    la = math.log(abs(a)) if a != 0 else -math.inf
    return EvolutionFamily("scalar", 1, norm, coef=lambda n: float(a),
                           log_abs=lambda n: np.full(np.shape(n), la),
                           label=f"constant-scalar(a={a:g})", params={"a": a})


def zero_family(dimension: int = 1, norm: str = "linf") -> EvolutionFamily:
    if dimension == 1:
        fam = constant_scalar(0.0, norm)
    else:
        fam = diagonal([0.0] * dimension, norm)
    return EvolutionFamily(fam.kind, fam.dimension, norm, fam.coef, fam.log_abs,
                           label="zero", params=fam.params)


def identity_family(dimension: int = 1, norm: str = "linf") -> EvolutionFamily:
    fam = constant_scalar(1.0, norm) if dimension == 1 else diagonal([1.0] * dimension, norm)
    return EvolutionFamily(fam.kind, fam.dimension, norm, fam.coef, fam.log_abs,
                           label="identity", params=fam.params)


def diagonal(entries, norm: str = "linf") -> EvolutionFamily:
    """The same diagonal matrix at every step."""
    lam = np.asarray(entries, dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise ContractError("diagonal entries must be a non-empty list")
    with np.errstate(divide="ignore"):
        loglam = np.log(np.abs(lam))
    return EvolutionFamily("diagonal", lam.size, norm, coef=lambda n: lam.copy(),
                           log_abs=lambda n: np.broadcast_to(loglam, (np.size(n), lam.size)).copy(),
                           label=f"diagonal({', '.join(f'{v:g}' for v in lam)})",
                           params={"entries": lam.tolist()})


def dense_sequence(matrices, periodic: bool = True, norm: str = "linf") -> EvolutionFamily:
    """A(n) read from a list; periodic lists repeat, others hold the last matrix."""
    mats = np.asarray(matrices, dtype=float)
    if mats.ndim != 3 or mats.shape[1] != mats.shape[2] or mats.shape[0] == 0:
        raise ContractError("dense-sequence needs a non-empty list of square matrices of one size")
    k = mats.shape[0]

    def coef(n):
        return mats[n % k] if periodic else mats[min(n, k - 1)]

    return EvolutionFamily("dense", mats.shape[1], norm, coef=coef,
                           label=f"dense-sequence(len={k})",
                           params={"matrices": mats.tolist(), "periodic": periodic})


def _step_rng(seed: int, n: int, tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, n, tag])))


def random_family(seed: int, dimension: int, radius: float, generator: str = "dense",
                  norm: str = "linf") -> EvolutionFamily:
    """Independent seeded random A(n), reproducible from ``seed`` alone.

    ``dense``: entries uniform in [-radius, radius].
    ``upper-triangular``: diagonal within 1% below ``radius``, strict upper part
    uniform in [-1, 1] (long polynomial transients).
    ``rotation-contraction``: random orthogonal times diag(radius * s), s in [0.5, 1.5].
    """
    if not radius > 0:
        raise ContractError("radius must be positive")
    if generator not in GENERATORS:
        raise ContractError(f"unknown generator {generator!r}; expected one of {sorted(GENERATORS)}")
    tag = GENERATORS[generator]
    d = dimension

    def coef(n):
        rng = _step_rng(seed, n, tag)
        if generator == "dense":
            return rng.uniform(-radius, radius, (d, d))
        if generator == "upper-triangular":
            A = np.triu(rng.uniform(-1.0, 1.0, (d, d)), 1)
            A[np.diag_indices(d)] = radius * (1.0 - 0.01 * rng.uniform(0.0, 1.0, d))
            return A
        q, r = np.linalg.qr(rng.standard_normal((d, d)))
        q = q * np.sign(np.diag(r))
        return q @ np.diag(radius * rng.uniform(0.5, 1.5, d))

    return EvolutionFamily("dense", d, norm, coef=coef,
                           label=f"random({generator}, seed={seed}, d={d}, r={radius:g})",
                           params={"seed": seed, "dimension": d, "radius": radius,
                                   "generator": generator, "rng": RNG_ALGORITHM})


def scaled(family: EvolutionFamily, factor: float, horizon: int) -> EvolutionFamily:
    """Closed-form wrapper with every non-trivial log-norm shifted by ``log factor``.

    Models an equivalent norm: bounds change by a constant, rates do not.
    Defined up to ``horizon``.
    """
    table = build_norm_table(family, horizon)
    shift = math.log(factor)

    def fn(m, n):
        row = table.row(n)[np.asarray(m) - n]
        return np.where(np.asarray(m) == n, 0.0, row + shift)

    return EvolutionFamily("closed-form", family.dimension, family.norm, closed_form=fn,
                           label=f"scaled({family.label}, {factor:g})",
                           params={"form": "scaled", "factor": factor})


def oracle_compare(family: EvolutionFamily, closed_form, horizon: int) -> float:
    """Max |direct - closed form| over all pairs up to ``horizon``.

    ``closed_form(m_array, n)`` returns log-norms; matching ``-inf`` entries
    count as zero difference, a one-sided ``-inf`` as infinite.
    """
    table = build_norm_table(family, horizon)
    worst = 0.0
    for lo, block in table.iter_blocks():
        for i in range(block.shape[0]):
            n = lo + i
            m = np.arange(n, horizon + 1)
            direct = block[i, n:]
            ref = np.asarray(closed_form(m, n), dtype=float)
            both_zero = np.isneginf(direct) & np.isneginf(ref)
            with np.errstate(invalid="ignore"):
                diff = np.where(both_zero, 0.0, np.abs(direct - ref))
            diff = np.where(np.isnan(diff), np.inf, diff)
            worst = max(worst, float(diff.max()))
    return worst
