"""Search for families whose pointwise adjoint sums stay bounded while the
decay rate shrinks.

Whether the pointwise bound ``sum_{k<=m} ||A_m^k x|| <= B ||x||`` forces
uniform stability is open; the operator-norm version is known to. The
explorer ranks seeded random families by how far the two bounds come apart.
It reports evidence and never claims a counterexample.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .certificates import LADDER, classify
from .errors import ContractError, ResourceLimitError, SpecError
from .evolution import EvolutionFamily, NormTable, build_norm_table, probe_vectors, vector_norm
from .series import DOUBLING_TOL, operator_sum_curve, pointwise_sum_curve, resolved
from .specio import _jsonable, build_family, parse_spec

# cost of one family ~ horizon^2 * dimension^3 multiply-adds
DEFAULT_WORK_CAP = 5e10


@dataclass
class CandidateRecord:
    spec: dict
    horizon: int
    empirical_pointwise_B: float
    empirical_operator_B: float
    ues_margin: float  # alpha_hat from the classifier
    score: float  # operator / pointwise
    log_pointwise_B: float
    log_operator_B: float
    pointwise_growth: float  # B(H) / B(H/2)
    operator_growth: float
    # both flags also require B <= horizon/2 + 1 (see series.resolved)
    pointwise_bounded: bool  # growth within the config's bounded_tol
    operator_bounded: bool  # growth within 1 + DOUBLING_TOL
    verdict: str
    target_consistent: bool
    control: bool = False

    @property
    def key(self) -> str:
        return spec_key(self.spec, self.horizon)

    def to_json(self) -> str:
        return json.dumps(_jsonable(asdict(self)), sort_keys=True, allow_nan=False)

    @classmethod
    def from_json(cls, line: str) -> CandidateRecord:
        raw = json.loads(line)
        for k in ("empirical_pointwise_B", "empirical_operator_B", "ues_margin", "score",
                  "log_pointwise_B", "log_operator_B", "pointwise_growth", "operator_growth"):
            raw[k] = float(raw[k])
        return cls(**raw)


def spec_key(spec: dict, horizon: int) -> str:
    return json.dumps({"spec": spec, "horizon": horizon}, sort_keys=True)


def rank_key(rec: CandidateRecord):
    """Bounded pointwise sums first, then the smallest decay rate, then the
    largest operator/pointwise gap; ties break on the spec text."""
    return (not rec.pointwise_bounded, rec.ues_margin, -rec.score, json.dumps(rec.spec, sort_keys=True))


def _sup_and_growth(curve: np.ndarray):
    """``log sup`` over the whole curve and ``sup(H) / sup(H/2)``."""
    H = curve.size - 1
    full = float(curve.max())
    half = float(curve[: H // 2 + 1].max())
    if full == -math.inf:
        return full, 1.0
    return full, math.exp(full - half) if math.isfinite(full - half) else math.inf


def pointwise_barbashin_score(family: EvolutionFamily, horizon: int, probes=None, *,
                              table: NormTable | None = None, b: float = 0.0):
    """``(pointwise B, operator B)``: suprema over ``m <= horizon`` (and unit
    probes) of ``sum_{k=0}^{m} e^{b(m-k)} ||A_m^k x|| / ||x||`` and of the
    same sum with operator norms."""
    detail = _score_detail(family, horizon, probes, table=table, b=b)
    return math.exp(detail["log_pointwise"]), math.exp(detail["log_operator"])


def _score_detail(family, horizon, probes=None, *, table=None, b=0.0, bounded_tol=DOUBLING_TOL) -> dict:
    table = table if table is not None else build_norm_table(family, horizon)
    probes = probe_vectors(family.dimension, family.norm) if probes is None else np.atleast_2d(probes)
    if len(probes) == 0:
        raise ContractError("probe set is empty")
    pw = np.full(horizon + 1, -np.inf)
    for x in probes:
        lx = math.log(vector_norm(family, x))
        pw = np.maximum(pw, pointwise_sum_curve(table, x, b) - lx)
    op = operator_sum_curve(table, b)
    log_pw, pw_growth = _sup_and_growth(pw)
    log_op, op_growth = _sup_and_growth(op)
    return {"log_pointwise": log_pw, "log_operator": log_op,
            "pointwise_growth": pw_growth, "operator_growth": op_growth,
            "pointwise_bounded": pw_growth <= 1.0 + bounded_tol and resolved(log_pw, horizon),
            "operator_bounded": op_growth <= 1.0 + DOUBLING_TOL and resolved(log_op, horizon),
            "table": table}


@dataclass
class ExplorerConfig:
    dimension: int = 2
    radii: tuple = (0.5,)
    seeds: tuple = tuple(range(10))
    generators: tuple = ("dense",)
    horizon: int = 200
    norm: str = "linf"
    top_k: int = 10
    controls: tuple = ()  # extra spec documents evaluated alongside
    target: str = "UES"  # class the classifier verdict is compared against
    b: float = 0.0
    # sums of stationary random products still set new maxima after doubling
    # (ratios up to ~1.3 at horizon 128), while linear growth doubles them
    bounded_tol: float = 0.5
    work_cap: float = DEFAULT_WORK_CAP
    workers: int = 1

    @classmethod
    def from_dict(cls, doc: dict) -> ExplorerConfig:
        known = {f.name for f in cls.__dataclass_fields__.values()}
        for k in doc:
            if k not in known and k not in ("seed_start", "n_seeds"):
                raise SpecError(k, f"unknown explorer config field {k!r}")
        doc = dict(doc)
        if "n_seeds" in doc:
            start = int(doc.pop("seed_start", 0))
            doc["seeds"] = tuple(range(start, start + int(doc.pop("n_seeds"))))
        elif "seed_start" in doc:
            raise SpecError("seed_start", "seed_start needs n_seeds")
        for k in ("radii", "seeds", "generators", "controls"):
            if k in doc:
                if not isinstance(doc[k], (list, tuple)):
                    raise SpecError(k, f"{k} must be a list")
                doc[k] = tuple(doc[k])
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    def validate(self):
        if self.target not in LADDER[:-1]:
            raise SpecError("target", f"target must be one of {', '.join(LADDER[:-1])}")
        if not 1 <= self.dimension <= 3:
            raise SpecError("dimension", "dimension must be 1, 2 or 3")
        if self.horizon < 64:
            raise SpecError("horizon", "horizon must be at least 64")
        if self.b < 0:
            raise SpecError("b", "b must be non-negative")
        if not self.bounded_tol > 0:
            raise SpecError("bounded_tol", "bounded_tol must be positive")
        for i, c in enumerate(self.controls):
            try:
                parse_spec(c)
            except SpecError as exc:
                raise SpecError(f"controls[{i}].{exc.field}", exc.message) from None
        for r in self.radii:
            parse_spec({"kind": "random", "seed": 0, "dimension": self.dimension, "radius": r})

    def candidate_specs(self) -> list[tuple[dict, bool]]:
        out = [(parse_spec(c).to_dict(), True) for c in self.controls]
        for gen in self.generators:
            for r in self.radii:
                for s in self.seeds:
                    doc = {"kind": "random", "seed": int(s), "dimension": self.dimension,
                           "radius": float(r), "generator": gen, "norm": self.norm}
                    out.append((parse_spec(doc).to_dict(), False))
        return out

    def cost(self, spec: dict) -> float:
        d = spec.get("dimension", 1)
        return float(self.horizon) ** 2 * d ** 3


def evaluate(spec: dict, horizon: int, target: str = "UES", b: float = 0.0, control: bool = False,
             bounded_tol: float = 0.5) -> CandidateRecord:
    """Score and classify one family."""
    fam = build_family(parse_spec(spec))
    det = _score_detail(fam, horizon, b=b, bounded_tol=bounded_tol)
    rep = classify(fam, horizon, table=det["table"])
    lp, lo = det["log_pointwise"], det["log_operator"]
    return CandidateRecord(
        spec=spec, horizon=horizon,
        empirical_pointwise_B=math.exp(lp) if lp < 700 else math.inf,
        empirical_operator_B=math.exp(lo) if lo < 700 else math.inf,
        ues_margin=rep.alpha_hat, score=math.exp(lo - lp) if math.isfinite(lo - lp) else math.inf,
        log_pointwise_B=lp, log_operator_B=lo,
        pointwise_growth=det["pointwise_growth"], operator_growth=det["operator_growth"],
        pointwise_bounded=det["pointwise_bounded"], operator_bounded=det["operator_bounded"],
        verdict=rep.verdict, target_consistent=rep.implies(target), control=control)


def _evaluate_args(args):
    return evaluate(*args)


@dataclass
class ExplorerResult:
    ranked: list  # top_k records
    records: list  # every record, ranked
    truncated: bool = False
    skipped: int = 0
    notes: list = field(default_factory=list)


def search_counterexample(config: ExplorerConfig, *, existing: list | None = None,
                          sink=None) -> ExplorerResult:
    """Evaluate every candidate not already in ``existing`` and rank all of them.

    Candidates are processed in config order until ``work_cap`` would be
    exceeded; the rest are dropped and ``truncated`` is set. ``sink`` gets
    each new record as soon as it is computed (used for JSON-lines output).
    """
    config.validate()
    existing = list(existing or [])
    done = {r.key for r in existing}
    todo, spent, truncated = [], 0.0, False
    skipped = 0
    for spec, control in config.candidate_specs():
        if spec_key(spec, config.horizon) in done:
            skipped += 1
            continue
        c = config.cost(spec)
        if spent + c > config.work_cap:
            truncated = True
            break
        spent += c
        todo.append((spec, config.horizon, config.target, config.b, control, config.bounded_tol))
    if not todo and not existing and truncated:
        raise ResourceLimitError("a single candidate exceeds the work cap")

    new = []
    if config.workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for rec in pool.map(_evaluate_args, todo):
                new.append(rec)
                if sink is not None:
                    sink(rec)
    else:
        for args in todo:
            rec = evaluate(*args)
            new.append(rec)
            if sink is not None:
                sink(rec)
    records = sorted(existing + new, key=rank_key)
    notes = []
    if truncated:
        notes.append(f"work cap {config.work_cap:g} reached; {len(todo)} candidates evaluated this run")
    return ExplorerResult(records[: config.top_k], records, truncated, skipped, notes)


def read_records(path) -> list[CandidateRecord]:
    """Records from a JSON-lines file; a torn final line (interrupted write) is ignored."""
    if not os.path.exists(path):
        return []
    out = []
    with open(path) as fh:
        lines = fh.read().splitlines()
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            out.append(CandidateRecord.from_json(line))
        except (json.JSONDecodeError, TypeError, KeyError):
            if i == len(lines) - 1:
                break
            raise
    return out


def run_explorer(config: ExplorerConfig, out_path, resume: bool = False) -> ExplorerResult:
    """Run the search, appending records to ``out_path`` one line at a time.

    With ``resume`` the existing file is read and its candidates skipped;
    otherwise the file is overwritten.
    """
    existing = read_records(out_path) if resume else []
    if resume and os.path.exists(out_path):
        # rewrite the valid prefix so a torn last line does not linger
        with open(out_path, "w") as fh:
            for r in existing:
                fh.write(r.to_json() + "\n")
    mode = "a" if resume else "w"
    with open(out_path, mode) as fh:
        def sink(rec):
            fh.write(rec.to_json() + "\n")
            fh.flush()
        return search_counterexample(config, existing=existing, sink=sink)
