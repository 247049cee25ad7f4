"""System spec files, JSON reports and CSV dumps.

A system spec is a flat JSON object::

    {"kind": "paper-example", "c": 0.1, "norm": "linf", "label": "demo"}

Every kind has a fixed set of parameter fields; anything else is rejected
with a :class:`SpecError` naming the field. Reports encode non-finite
floats as the strings ``"inf"``, ``"-inf"`` and ``"nan"`` so that the output
is strict JSON.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, TextIO

import numpy as np

from . import zoo
from .errors import SpecError
from .evolution import NORMS, EvolutionFamily
from .logmag import LogMagnitude

SPEC_KINDS = ("paper-example", "constant-scalar", "diagonal", "dense-sequence", "random", "closed-form")
CLOSED_FORMS = ("paper-example", "exponential", "scaled")
_COMMON = ("kind", "norm", "label")
# per kind: {field: (required, default)}
_FIELDS: dict[str, dict[str, tuple[bool, Any]]] = {
    "paper-example": {"c": (True, None)},
    "constant-scalar": {"a": (True, None)},
    "diagonal": {"entries": (True, None)},
    "dense-sequence": {"matrices": (True, None), "periodic": (False, True)},
    "random": {"seed": (True, None), "dimension": (True, None), "radius": (True, None),
               "generator": (False, "dense")},
    "closed-form": {"form": (True, None), "c": (False, None), "rate": (False, None),
                    "factor": (False, None), "base": (False, None), "horizon": (False, None)},
}


@dataclass(frozen=True)
class SystemSpec:
    """Validated, canonical form of a spec document."""

    kind: str
    params: tuple = ()  # sorted (name, value) pairs with defaults filled in
    norm: str = "linf"
    label: str | None = None

    def param(self, name: str, default=None):
        return dict(self.params).get(name, default)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for k, v in self.params:
            out[k] = _thaw(v)
        out["norm"] = self.norm
        if self.label is not None:
            out["label"] = self.label
        return out


def _freeze(v):
    """Nested lists/dicts to tuples so specs compare and hash by value."""
    if isinstance(v, dict):
        return tuple(sorted((k, _freeze(x)) for k, x in v.items()))
    if isinstance(v, (list, tuple)):
        return tuple(_freeze(x) for x in v)
    return v


def _thaw(v):
    if isinstance(v, tuple) and v and all(isinstance(x, tuple) and len(x) == 2 and isinstance(x[0], str)
                                         for x in v):
        return {k: _thaw(x) for k, x in v}
    if isinstance(v, tuple):
        return [_thaw(x) for x in v]
    return v


def _number(doc, name, *, low=None, strict_low=False, integer=False):
    v = doc[name]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SpecError(name, f"{name} must be a number")
    if integer and not (isinstance(v, int) or float(v).is_integer()):
        raise SpecError(name, f"{name} must be an integer")
    if not math.isfinite(v):
        raise SpecError(name, f"{name} must be finite")
    if low is not None and (v <= low if strict_low else v < low):
        raise SpecError(name, f"{name} must be {'>' if strict_low else '>='} {low}")
    return int(v) if integer else float(v)


def _matrix_list(doc, name):
    try:
        arr = np.asarray(doc[name], dtype=float)
    except (TypeError, ValueError):
        raise SpecError(name, f"{name} must be a list of square numeric matrices of one size") from None
    if arr.ndim != 3 or arr.shape[0] == 0 or arr.shape[1] != arr.shape[2] or arr.shape[1] == 0:
        raise SpecError(name, f"{name} must be a non-empty list of square matrices of uniform dimension")
    if not np.all(np.isfinite(arr)):
        raise SpecError(name, f"{name} entries must be finite")
    return arr.tolist()


def parse_spec(doc: dict) -> SystemSpec:
    """Validate a spec document and fill defaults."""
    if not isinstance(doc, dict):
        raise SpecError("", "a system spec must be a JSON object")
    kind = doc.get("kind")
    if kind not in SPEC_KINDS:
        raise SpecError("kind", f"kind must be one of {', '.join(SPEC_KINDS)}; got {kind!r}")
    allowed = _FIELDS[kind]
    for key in doc:
        if key not in allowed and key not in _COMMON:
            raise SpecError(key, f"unknown field {key!r} for kind {kind!r}")
    for key, (required, _) in allowed.items():
        if required and key not in doc:
            raise SpecError(key, f"kind {kind!r} requires field {key!r}")
    norm = doc.get("norm", "linf")
    if norm not in NORMS:
        raise SpecError("norm", f"norm must be one of {', '.join(NORMS)}; got {norm!r}")
    label = doc.get("label")
    if label is not None and not isinstance(label, str):
        raise SpecError("label", "label must be a string")

    p: dict[str, Any] = {}
    if kind == "paper-example":
        p["c"] = _number(doc, "c", low=0)
    elif kind == "constant-scalar":
        p["a"] = _number(doc, "a")
    elif kind == "diagonal":
        e = doc["entries"]
        if not isinstance(e, list) or not e:
            raise SpecError("entries", "entries must be a non-empty list of numbers")
        p["entries"] = [_number({"entries": v}, "entries") for v in e]
    elif kind == "dense-sequence":
        p["matrices"] = _matrix_list(doc, "matrices")
        periodic = doc.get("periodic", True)
        if not isinstance(periodic, bool):
            raise SpecError("periodic", "periodic must be true or false")
        p["periodic"] = periodic
    elif kind == "random":
        p["seed"] = _number(doc, "seed", low=0, integer=True)
        p["dimension"] = _number(doc, "dimension", low=1, integer=True)
        p["radius"] = _number(doc, "radius", low=0, strict_low=True)
        gen = doc.get("generator", "dense")
        if gen not in zoo.GENERATORS:
            raise SpecError("generator", f"generator must be one of {', '.join(zoo.GENERATORS)}")
        p["generator"] = gen
    else:
        p.update(_parse_closed_form(doc))
    return SystemSpec(kind, _freeze(p), norm, label)


def _parse_closed_form(doc) -> dict:
    form = doc["form"]
    if form not in CLOSED_FORMS:
        raise SpecError("form", f"form must be one of {', '.join(CLOSED_FORMS)}")
    needs = {"paper-example": ("c",), "exponential": ("rate",), "scaled": ("base", "factor", "horizon")}[form]
    for key in ("c", "rate", "factor", "base", "horizon"):
        if key in doc and key not in needs:
            raise SpecError(key, f"field {key!r} does not apply to closed form {form!r}")
        if key in needs and key not in doc:
            raise SpecError(key, f"closed form {form!r} requires field {key!r}")
    p: dict[str, Any] = {"form": form}
    if form == "paper-example":
        p["c"] = _number(doc, "c", low=0)
    elif form == "exponential":
        p["rate"] = _number(doc, "rate")
    else:
        try:
            base = parse_spec(doc["base"])
        except SpecError as exc:
            raise SpecError(f"base.{exc.field}", exc.message) from None
        p["base"] = base.to_dict()
        p["factor"] = _number(doc, "factor", low=0, strict_low=True)
        p["horizon"] = _number(doc, "horizon", low=1, integer=True)
    return p


def emit_spec(spec: SystemSpec) -> str:
    return json.dumps(spec.to_dict(), indent=2, sort_keys=False)


def load_spec(path) -> SystemSpec:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SpecError("", f"not valid JSON: {exc}") from None
    return parse_spec(doc)


def build_family(spec: SystemSpec) -> EvolutionFamily:
    """Construct the family a spec describes."""
    k, norm = spec.kind, spec.norm
    if k == "paper-example":
        fam = zoo.paper_example(spec.param("c"), norm)
    elif k == "constant-scalar":
        fam = zoo.constant_scalar(spec.param("a"), norm)
    elif k == "diagonal":
        fam = zoo.diagonal(list(spec.param("entries")), norm)
    elif k == "dense-sequence":
        fam = zoo.dense_sequence(_thaw(spec.param("matrices")), spec.param("periodic"), norm)
    elif k == "random":
        fam = zoo.random_family(spec.param("seed"), spec.param("dimension"), spec.param("radius"),
                                spec.param("generator"), norm)
    else:
        fam = _closed_form_family(spec)
    if spec.label:
        fam = dataclasses.replace(fam, label=spec.label)
    return fam


def _closed_form_family(spec: SystemSpec) -> EvolutionFamily:
    form = spec.param("form")
    if form == "paper-example":
        return zoo.paper_example_closed_form(spec.param("c"), spec.norm)
    if form == "exponential":
        rate = spec.param("rate")
        return EvolutionFamily("closed-form", 1, spec.norm,
                               closed_form=lambda m, n: -rate * (np.asarray(m, dtype=float) - n),
                               label=f"exponential(rate={rate:g})", params={"form": "exponential", "rate": rate})
    base = build_family(parse_spec(_thaw(spec.param("base"))))
    return zoo.scaled(base, spec.param("factor"), spec.param("horizon"))


# ---------------------------------------------------------------- reports

def _jsonable(obj):
    if isinstance(obj, LogMagnitude):
        return _jsonable(obj.log_value)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    return obj


def classification_payload(report) -> dict:
    env = report.envelope
    cert = report.certificate
    return _jsonable({
        "type": "classification",
        "verdict": report.verdict,
        "estimated_verdict": report.estimated_verdict,
        "alpha_hat": report.alpha_hat,
        "alpha_used": report.alpha_used,
        "alpha_cert": report.alpha_cert,
        "beta_hat": report.beta_hat,
        "beta_relaxed": report.beta_relaxed,
        "intercept": report.intercept,
        "fit_error": report.fit_error,
        "superlinear_flag": report.superlinear_flag,
        "boundary": report.boundary,
        "horizon": report.horizon,
        "envelope": None if env is None else {
            "kind": env.kind, "alpha": env.alpha, "beta": env.beta,
            "log_N": None if env.log_Nfun is not None else env.log_N},
        "certificate": None if cert is None else {
            "verdict": cert.verdict, "kind": cert.kind, "margin": cert.margin,
            "worst_pair": list(cert.worst_pair) if cert.worst_pair else None,
            "triples_checked": cert.triples_checked, "triple_violations": cert.triple_violations},
        "notes": list(report.notes),
    })


def series_payload(report) -> dict:
    """Log-domain fields carry the ``log_`` prefix."""
    return _jsonable({
        "verdict": report.verdict,
        "log_partial_sum": report.partial_sum,
        "log_tail_bound": report.tail_bound,
        "log_bound_checked": report.bound_checked,
        "terms_used": report.terms_used,
        "empirical": report.empirical,
        "divergent": report.divergent,
        "resolved": report.resolved,
        "growth_ratio": report.growth_ratio,
        "witness": report.witness,
    })


def report_document(command: str, config: dict, result: dict, wall_clock: float) -> dict:
    from . import __version__
    return {"tool": "expstab", "version": __version__, "command": command,
            "config": _jsonable(config), "wall_clock_s": wall_clock, "result": result}


def dumps(doc) -> str:
    return json.dumps(_jsonable(doc), indent=2, allow_nan=False)


def report_schema() -> dict:
    """The JSON schema every report document validates against."""
    text = resources.files("expstab").joinpath("schemas/report.schema.json").read_text()
    return json.loads(text)


def _fmt(x: float) -> str:
    return repr(float(x)) if math.isfinite(x) else ("-inf" if x < 0 else "inf")


def write_table_csv(table, out: TextIO) -> int:
    """``m,n,log_norm`` rows for every pair ``n <= m``; returns the row count."""
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["m", "n", "log_norm"])
    rows = 0
    for lo, block in table.iter_blocks():
        for i in range(block.shape[0]):
            n = lo + i
            for m in range(n, table.horizon + 1):
                w.writerow([m, n, _fmt(block[i, m])])
                rows += 1
    return rows


def write_logK_csv(report, out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["n", "logK"])
    for n, v in enumerate(report.logK):
        w.writerow([n, _fmt(v)])


def read_csv_column(stream: TextIO, column: str) -> np.ndarray:
    """Read one CSV column back as floats (``inf`` strings included)."""
    return np.array([float(r[column]) for r in csv.DictReader(stream)])
