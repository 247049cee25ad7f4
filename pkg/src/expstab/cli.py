"""``expstab`` command line.

Exit codes: 0 stable class or passing check, 3 class ``none`` or failing
check, 4 inconclusive check, 2 input error.
"""

from __future__ import annotations

import json
import math
import sys
import time

import click
import numpy as np

from . import specio
from .certificates import EstimatorConfig, StabilityEnvelope, classify
from .errors import ContractError, SpecError
from .evolution import HORIZON_CAP, build_norm_table, probe_vectors
from .explorer import ExplorerConfig, run_explorer
from .series import (barbashin_check_operator, barbashin_sum, datko_check_uniform, datko_sum,
                     derive_barbashin_constant, derive_datko_constant)

EXIT_OK, EXIT_INPUT, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 2, 3, 4
_VERDICT_EXIT = {"pass": EXIT_OK, "fail": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE}


def _num(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.6g}"


def _input_error(exc: Exception):
    field = getattr(exc, "field", None)
    where = f" (field '{field}')" if field else ""
    msg = getattr(exc, "message", str(exc))
    click.echo(f"error{where}: {msg}", err=True)
    sys.exit(EXIT_INPUT)


def _load(spec_path):
    try:
        spec = specio.load_spec(spec_path)
        return spec, specio.build_family(spec)
    except (SpecError, ContractError, OSError) as exc:
        _input_error(exc)


def _table(family, horizon):
    try:
        return build_norm_table(family, horizon)
    except ContractError as exc:
        _input_error(exc)


def _write_json(target, command, config, result, started):
    doc = specio.report_document(command, config, result, time.perf_counter() - started)
    text = specio.dumps(doc)
    if target == "-":
        click.echo(text)
    else:
        with open(target, "w") as fh:
            fh.write(text + "\n")


def _parse_vector(text, dimension, name):
    if text is None:
        return None
    try:
        vec = np.array([float(v) for v in text.split(",")])
    except ValueError:
        _input_error(SpecError(name, "expected comma-separated numbers"))
    if vec.size != dimension:
        _input_error(SpecError(name, f"expected {dimension} components, got {vec.size}"))
    if not np.any(vec):
        _input_error(SpecError(name, "vector must be nonzero"))
    return vec


def _parse_envelope(text, table):
    """``N,alpha,beta``, ``fit`` (classifier envelope) or ``none``."""
    if text is None or text == "none":
        return None
    if text == "fit":
        return classify(table.family, table.horizon, table=table).envelope
    try:
        N, alpha, beta = (float(v) for v in text.split(","))
        kind = "UES" if beta == 0 else ("SES" if beta < alpha else "ES")
        return StabilityEnvelope(kind, alpha, math.log(N) if N >= 1 else -1.0, beta)
    except ValueError:
        _input_error(SpecError("envelope", "expected N,alpha,beta with N >= 1, alpha > 0, beta >= 0"))


def _envelope_payload(env):
    if env is None:
        return None
    return {"kind": env.kind, "alpha": env.alpha, "beta": env.beta,
            "log_N": None if env.log_Nfun is not None else env.log_N}


@click.group()
@click.version_option(package_name="artifact", prog_name="expstab")
def main():
    """Stability classes and series criteria for discrete-time linear systems."""


_horizon = click.option("--horizon", type=click.IntRange(1, HORIZON_CAP), default=400, show_default=True,
                        help="Last time index of the norm table.")
_json = click.option("--json", "json_out", type=click.Path(dir_okay=False, allow_dash=True),
                     help="Write a JSON report here ('-' for stdout, replacing the text output).")


@main.command("classify")
@click.argument("spec_path", type=click.Path(exists=True, dir_okay=False))
@_horizon
@click.option("--tol-alpha", type=float, default=EstimatorConfig.tol_alpha, show_default=True)
@click.option("--tol-beta", type=float, default=EstimatorConfig.tol_beta, show_default=True)
@_json
@click.option("--csv", "csv_out", type=click.Path(dir_okay=False, allow_dash=True),
              help="Write the n,logK curve as CSV.")
def classify_cmd(spec_path, horizon, tol_alpha, tol_beta, json_out, csv_out):
    """Strongest stability class consistent with the table up to HORIZON."""
    started = time.perf_counter()
    spec, family = _load(spec_path)
    table = _table(family, horizon)
    try:
        cfg = EstimatorConfig(tol_alpha=tol_alpha, tol_beta=tol_beta)
        report = classify(family, horizon, cfg, table=table)
    except ContractError as exc:
        _input_error(exc)
    if json_out:
        config = {"spec": spec.to_dict(), "horizon": horizon, "tol_alpha": tol_alpha, "tol_beta": tol_beta}
        _write_json(json_out, "classify", config, specio.classification_payload(report), started)
    if csv_out:
        with click.open_file(csv_out, "w") as fh:
            specio.write_logK_csv(report, fh)
    if json_out != "-":
        line = (f"class={report.verdict} alpha={_num(report.alpha_hat)} beta={_num(report.beta_hat)} "
                f"horizon={horizon}")
        click.echo(line + (" boundary" if report.boundary else ""))
        for note in report.notes:
            click.echo(f"note: {note}")
    sys.exit(EXIT_OK if report.stable else EXIT_FAIL)


def _combine(*verdicts):
    live = [v for v in verdicts if v is not None]
    if "fail" in live:
        return "fail"
    if "inconclusive" in live:
        return "inconclusive"
    return "pass"


@main.command("datko")
@click.argument("spec_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--d", "d", type=float, default=0.0, show_default=True, help="Forward weight exponent d.")
@click.option("--c-weight", type=float, default=None,
              help="Start-time weight c in D e^{cn}; defaults to the envelope's beta, else 0.")
@click.option("--n", "n", type=int, default=0, show_default=True)
@click.option("--p", "p", type=int, default=None, help="Initial time of the orbit (defaults to n).")
@click.option("--x", "x_text", default=None, help="Comma-separated vector (defaults to the first basis vector).")
@click.option("--D", "D", type=float, default=None, help="Bound constant; derived from the envelope when omitted.")
@click.option("--envelope", default="fit", show_default=True,
              help="'N,alpha,beta', 'fit' or 'none'; bounds the truncated tail.")
@click.option("--uniform/--no-uniform", default=False,
              help="Also require the uniform sup-sum to stay bounded under horizon doubling.")
@_horizon
@_json
def datko_cmd(spec_path, d, c_weight, n, p, x_text, D, envelope, uniform, horizon, json_out):
    """Forward (Datko-type) series at start N against D e^{cN} ||x||."""
    started = time.perf_counter()
    spec, family = _load(spec_path)
    table = _table(family, horizon)
    p = n if p is None else p
    x = _parse_vector(x_text, family.dimension, "x")
    if x is None:
        x = probe_vectors(family.dimension, family.norm)[0]
    try:
        env = _parse_envelope(envelope, table)
        c = c_weight if c_weight is not None else (env.beta if env is not None else 0.0)
        derived = None
        if env is not None and env.log_Nfun is None and d < env.alpha:
            derived = derive_datko_constant(math.exp(env.log_N), env.alpha, env.beta, d)
        bound_D = D if D is not None else (derived if derived is not None else 1.0)
        rep = datko_sum(table, d, n, p, x, D=bound_D, c=c, envelope=env)
        uni = datko_check_uniform(table, d=d)
    except ContractError as exc:
        _input_error(exc)
    verdict = _combine(rep.verdict, uni.verdict if uniform else None)
    if json_out:
        config = {"spec": spec.to_dict(), "horizon": horizon, "d": d, "c": c, "n": n, "p": p,
                  "D": bound_D, "envelope": envelope, "uniform": uniform}
        result = {"type": "datko", "verdict": verdict, "sum": specio.series_payload(rep),
                  "uniform": specio.series_payload(uni), "derived_constant": derived,
                  "empirical_constant": uni.partial_sum.value, "envelope": _envelope_payload(env)}
        _write_json(json_out, "datko", config, specio._jsonable(result), started)
    if json_out != "-":
        click.echo(f"partial_sum={_num(rep.partial_sum.value)} terms={rep.terms_used} "
                   f"tail_bound={_num(rep.tail_bound.value)} bound={_num(rep.bound_checked.value)}")
        click.echo(f"empirical_D={_num(uni.partial_sum.value)}"
                   + (f" derived_D={_num(derived)}" if derived is not None else "")
                   + (" divergent" if uni.divergent else "")
                   + (" unresolved" if not (uni.resolved or uni.divergent) else ""))
        click.echo(f"verdict={verdict}")
    sys.exit(_VERDICT_EXIT[verdict])


@main.command("barbashin")
@click.argument("spec_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--b", "b", type=float, default=0.0, show_default=True, help="Adjoint weight exponent b.")
@click.option("--c-weight", type=float, default=0.0, show_default=True, help="Weight c in B e^{cm}.")
@click.option("--m", "m", type=int, default=None, help="End index of the sum (defaults to the horizon).")
@click.option("--n-low", type=int, default=0, show_default=True)
@click.option("--xstar", "x_text", default=None, help="Comma-separated functional (defaults to the first basis vector).")
@click.option("--B", "B", type=float, default=None, help="Bound constant; derived from --envelope when omitted.")
@click.option("--envelope", default="none", show_default=True, help="'N,alpha,beta', 'fit' or 'none'.")
@click.option("--operator/--no-operator", default=False,
              help="Also require the operator-norm sums to stay bounded under horizon doubling.")
@_horizon
@_json
def barbashin_cmd(spec_path, b, c_weight, m, n_low, x_text, B, envelope, operator, horizon, json_out):
    """Adjoint (Barbashin-type) series ending at M against B e^{cM} ||x*||."""
    started = time.perf_counter()
    spec, family = _load(spec_path)
    table = _table(family, horizon)
    m = horizon if m is None else m
    if not 0 <= m <= horizon:
        _input_error(SpecError("m", f"m must lie in [0, {horizon}]"))
    xs = _parse_vector(x_text, family.dimension, "xstar")
    if xs is None:
        xs = probe_vectors(family.dimension, family.norm)[0]
    try:
        env = _parse_envelope(envelope, table)
        derived = None
        if env is not None and env.log_Nfun is None and env.beta < b < env.alpha + env.beta:
            derived = derive_barbashin_constant(math.exp(env.log_N), env.alpha, env.beta, b)
        bound_B = B if B is not None else (derived if derived is not None else 1.0)
        rep = barbashin_sum(table, b, m, n_low, xs, B=bound_B, c=c_weight)
        op = barbashin_check_operator(table, b)
    except ContractError as exc:
        _input_error(exc)
    verdict = _combine(rep.verdict, op.verdict if operator else None)
    if json_out:
        config = {"spec": spec.to_dict(), "horizon": horizon, "b": b, "c": c_weight, "m": m,
                  "n_low": n_low, "B": bound_B, "envelope": envelope, "operator": operator}
        result = {"type": "barbashin", "verdict": verdict, "sum": specio.series_payload(rep),
                  "uniform": specio.series_payload(op), "derived_constant": derived,
                  "empirical_constant": op.partial_sum.value, "envelope": _envelope_payload(env)}
        _write_json(json_out, "barbashin", config, specio._jsonable(result), started)
    if json_out != "-":
        click.echo(f"partial_sum={_num(rep.partial_sum.value)} terms={rep.terms_used} "
                   f"bound={_num(rep.bound_checked.value)}")
        click.echo(f"empirical_B={_num(op.partial_sum.value)}"
                   + (f" derived_B={_num(derived)}" if derived is not None else "")
                   + (" divergent" if op.divergent else "")
                   + (" unresolved" if not (op.resolved or op.divergent) else ""))
        click.echo(f"verdict={verdict}")
    sys.exit(_VERDICT_EXIT[verdict])


@main.command("evolve")
@click.argument("spec_path", type=click.Path(exists=True, dir_okay=False))
@_horizon
@click.option("--csv", "csv_out", type=click.Path(dir_okay=False, allow_dash=True), default="-",
              show_default=True, help="Destination of the m,n,log_norm rows.")
def evolve_cmd(spec_path, horizon, csv_out):
    """Dump every log ||A_m^n|| up to HORIZON as CSV."""
    _, family = _load(spec_path)
    table = _table(family, horizon)
    with click.open_file(csv_out, "w") as fh:
        specio.write_table_csv(table, fh)


@main.command("explore")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default="explore.jsonl", show_default=True,
              help="JSON-lines file receiving one record per candidate.")
@click.option("--resume", is_flag=True, help="Skip candidates already present in --out.")
@_json
def explore_cmd(config_path, out_path, resume, json_out):
    """Rank seeded families by pointwise versus operator adjoint sums."""
    started = time.perf_counter()
    try:
        with open(config_path) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise SpecError("", "explorer config must be a JSON object")
        cfg = ExplorerConfig.from_dict(raw)
    except json.JSONDecodeError as exc:
        _input_error(SpecError("", f"not valid JSON: {exc}"))
    except (SpecError, ContractError, TypeError, OSError) as exc:
        _input_error(exc)
    try:
        res = run_explorer(cfg, out_path, resume=resume)
    except (SpecError, ContractError) as exc:
        _input_error(exc)
    if json_out:
        result = {"type": "explore", "truncated": res.truncated, "evaluated": len(res.records),
                  "skipped": res.skipped, "notes": res.notes,
                  "top": [specio._jsonable(r.__dict__) for r in res.ranked]}
        _write_json(json_out, "explore", raw, result, started)
    if json_out != "-":
        for r in res.ranked:
            tag = " control" if r.control else ""
            click.echo(f"{json.dumps(r.spec, sort_keys=True)} alpha={_num(r.ues_margin)} "
                       f"pointwise_B={_num(r.empirical_pointwise_B)} operator_B={_num(r.empirical_operator_B)} "
                       f"bounded={'yes' if r.pointwise_bounded else 'no'} class={r.verdict}{tag}")
        click.echo(f"records={len(res.records)} skipped={res.skipped}" + (" truncated" if res.truncated else ""))
    sys.exit(EXIT_OK)


if __name__ == "__main__":  # pragma: no cover
    main()
