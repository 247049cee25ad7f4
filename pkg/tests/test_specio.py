import io
import json
import math

import jsonschema
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from expstab.certificates import classify
from expstab.errors import SpecError
from expstab.evolution import build_norm_table
from expstab.specio import (build_family, classification_payload, dumps, emit_spec, parse_spec,
                            read_csv_column, report_document, report_schema, write_logK_csv,
                            write_table_csv)
from expstab.zoo import paper_example

finite = st.floats(-5, 5, allow_nan=False)
norms = st.sampled_from(["l1", "l2", "linf"])
labels = st.one_of(st.none(), st.text(max_size=8))


@st.composite
def spec_docs(draw):
    kind = draw(st.sampled_from(["paper-example", "constant-scalar", "diagonal", "dense-sequence",
                                 "random", "closed-form"]))
    doc = {"kind": kind, "norm": draw(norms)}
    if kind == "paper-example":
        doc["c"] = draw(st.floats(0, 1))
    elif kind == "constant-scalar":
        doc["a"] = draw(finite)
    elif kind == "diagonal":
        doc["entries"] = draw(st.lists(finite, min_size=1, max_size=3))
    elif kind == "dense-sequence":
        d = draw(st.integers(1, 3))
        k = draw(st.integers(1, 3))
        doc["matrices"] = draw(st.lists(st.lists(st.lists(finite, min_size=d, max_size=d),
                                                 min_size=d, max_size=d), min_size=k, max_size=k))
        doc["periodic"] = draw(st.booleans())
    elif kind == "random":
        doc.update(seed=draw(st.integers(0, 10 ** 6)), dimension=draw(st.integers(1, 3)),
                   radius=draw(st.floats(0.01, 2)),
                   generator=draw(st.sampled_from(["dense", "upper-triangular", "rotation-contraction"])))
    else:
        form = draw(st.sampled_from(["paper-example", "exponential"]))
        doc["form"] = form
        if form == "paper-example":
            doc["c"] = draw(st.floats(0, 1))
        else:
            doc["rate"] = draw(finite)
    label = draw(labels)
    if label is not None:
        doc["label"] = label
    return doc


@given(spec_docs())
def test_round_trip(doc):
    spec = parse_spec(doc)
    again = parse_spec(json.loads(emit_spec(spec)))
    assert again == spec
    assert emit_spec(again) == emit_spec(spec)


def test_defaults_are_filled():
    spec = parse_spec({"kind": "random", "seed": 1, "dimension": 2, "radius": 0.5})
    assert spec.norm == "linf" and spec.param("generator") == "dense"


@pytest.mark.parametrize("doc,field", [
    ({"kind": "paper-example", "c": 0.1, "extra": 1}, "extra"),
    ({"kind": "paper-example"}, "c"),
    ({"kind": "paper-example", "c": -1}, "c"),
    ({"kind": "paper-example", "c": 0.1, "norm": "l3"}, "norm"),
    ({"kind": "nope"}, "kind"),
    ({"kind": "dense-sequence", "matrices": [[[1, 2]]]}, "matrices"),
    ({"kind": "dense-sequence", "matrices": [[[1, 0], [0, 1]], [[1]]]}, "matrices"),
    ({"kind": "random", "seed": 1, "dimension": 2, "radius": 0}, "radius"),
    ({"kind": "random", "seed": 1.5, "dimension": 2, "radius": 1}, "seed"),
    ({"kind": "closed-form", "form": "exponential"}, "rate"),
    ({"kind": "closed-form", "form": "scaled", "factor": 2, "horizon": 10,
      "base": {"kind": "constant-scalar"}}, "base.a"),
])
def test_malformed_specs_name_the_field(doc, field):
    with pytest.raises(SpecError) as exc:
        parse_spec(doc)
    assert exc.value.field == field


def test_periodic_sequences_repeat_and_others_hold():
    mats = [[[2.0]], [[3.0]]]
    per = build_family(parse_spec({"kind": "dense-sequence", "matrices": mats}))
    hold = build_family(parse_spec({"kind": "dense-sequence", "matrices": mats, "periodic": False}))
    assert per.matrix(4)[0, 0] == 2.0 and per.matrix(5)[0, 0] == 3.0
    assert hold.matrix(9)[0, 0] == 3.0


def test_build_family_kinds():
    fam = build_family(parse_spec({"kind": "paper-example", "c": 0.2, "label": "x"}))
    assert fam.label == "x" and fam.coef(3) == pytest.approx(0.2 * math.e ** 4)
    cf = build_family(parse_spec({"kind": "closed-form", "form": "exponential", "rate": 0.5}))
    assert build_norm_table(cf, 10).entry(7, 3) == pytest.approx(-2.0)
    sc = build_family(parse_spec({"kind": "closed-form", "form": "scaled", "factor": 2.0, "horizon": 20,
                                  "base": {"kind": "constant-scalar", "a": 0.5}}))
    assert build_norm_table(sc, 20).entry(3, 1) == pytest.approx(2 * math.log(0.5) + math.log(2))


def test_table_csv_round_trip():
    table = build_norm_table(paper_example(0.0), 6)
    buf = io.StringIO()
    assert write_table_csv(table, buf) == 28
    buf.seek(0)
    vals = read_csv_column(buf, "log_norm")
    assert vals[0] == 0.0 and np.isneginf(vals[1])
    assert buf.getvalue().splitlines()[0] == "m,n,log_norm"


def test_logK_csv_and_report_schema():
    rep = classify(paper_example(0.2), 100)
    buf = io.StringIO()
    write_logK_csv(rep, buf)
    assert buf.getvalue().startswith("n,logK\n")
    doc = json.loads(dumps(report_document("classify", {"c": 0.2}, classification_payload(rep), 0.01)))
    jsonschema.validate(doc, report_schema())
    zero = json.loads(dumps(report_document("classify", {}, classification_payload(
        classify(paper_example(0.0), 100)), 0.0)))
    assert zero["result"]["alpha_hat"] == "inf"
    jsonschema.validate(zero, report_schema())
