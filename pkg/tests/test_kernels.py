"""The numba and numpy backends must agree; the envelope fit must be the
lowest line over the points."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from expstab import _kernels_numpy as knp
from expstab import kernels
from expstab.zoo import random_family

knb = pytest.importorskip("expstab._kernels_numba")


def _mats(seed, d, H, radius=0.8):
    return np.ascontiguousarray(random_family(seed, d, radius).stack(H))


@pytest.mark.parametrize("code", [0, 1, 2])
@pytest.mark.parametrize("d", [1, 2, 3])
def test_matrix_sweeps_agree(code, d):
    mats = _mats(11 + d, d, 60)
    a = knb.sweep_matrix_log_norms(mats, code)
    b = knp.sweep_matrix_log_norms(mats, code)
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-10, equal_nan=True)


@pytest.mark.parametrize("code", [0, 1, 2])
def test_vector_sweeps_and_dual_columns_agree(code):
    mats = _mats(5, 3, 50)
    x = np.array([0.3, -1.0, 2.0])
    np.testing.assert_allclose(knb.sweep_vector_log_norms(mats, x, code),
                               knp.sweep_vector_log_norms(mats, x, code), rtol=1e-10, equal_nan=True)
    np.testing.assert_allclose(knb.vector_row(mats, x, 3, 40, code), knp.vector_row(mats, x, 3, 40, code),
                               rtol=1e-10)
    np.testing.assert_allclose(knb.dual_column(mats, x, 40, 2, code), knp.dual_column(mats, x, 40, 2, code),
                               rtol=1e-10)


def test_op_norm_l2_matches_svd():
    rng = np.random.default_rng(0)
    for _ in range(20):
        P = rng.standard_normal((3, 3))
        s = np.linalg.svd(P, compute_uv=False)[0]
        assert knb.op_norm(P, 1) == pytest.approx(s, rel=1e-8)
        assert knp.op_norm(P, 1) == pytest.approx(s, rel=1e-8)


def test_zero_product_gives_minus_infinity():
    mats = np.zeros((6, 2, 2))
    out = knb.sweep_matrix_log_norms(mats, 2)
    assert out[0, 0] == 0.0 and np.all(np.isneginf(out[0, 1:]))
    assert np.isnan(out[3, 1])  # below the diagonal


point_sets = st.lists(st.floats(-50, 50, allow_nan=False), min_size=2, max_size=40)


@given(point_sets)
def test_envelope_line_lies_above_every_point(ys):
    x = np.arange(len(ys), dtype=float)
    y = np.array(ys)
    for impl in (knb, knp):
        s, b = impl.envelope_slope(x, y)
        assert np.all(y <= s * x + b + 1e-7 * (1 + np.abs(y)))


@given(point_sets)
def test_envelope_backends_agree(ys):
    x = np.arange(len(ys), dtype=float)
    y = np.array(ys)
    s1, b1 = knb.envelope_slope(x, y)
    s2, b2 = knp.envelope_slope(x, y)
    assert s1 == pytest.approx(s2, rel=1e-7, abs=1e-7)


def test_envelope_of_a_line_is_the_line():
    x = np.arange(10, dtype=float)
    s, b = knb.envelope_slope(x, -0.7 * x + 3)
    assert s == pytest.approx(-0.7) and b == pytest.approx(3)


def test_envelope_minimizes_total_gap():
    # compare against a brute-force search over candidate lines through two points
    rng = np.random.default_rng(3)
    x = np.arange(15, dtype=float)
    y = rng.normal(size=15)
    s, b = knb.envelope_slope(x, y)
    best = np.inf
    for i in range(15):
        for j in range(i + 1, 15):
            ss = (y[j] - y[i]) / (x[j] - x[i])
            bb = y[i] - ss * x[i]
            if np.all(y <= ss * x + bb + 1e-12):
                best = min(best, np.sum(ss * x + bb - y))
    assert np.sum(s * x + b - y) == pytest.approx(best, rel=1e-9)


def test_row_slopes_respect_gap_floor():
    H = 40
    block = np.full((1, H + 1), np.nan)
    g = np.arange(H + 1.0)
    block[0] = -0.5 * g
    block[0, 1:8] = 10.0  # short-gap transients are excluded
    assert knb.row_envelope_slopes(block, 0, 8)[0] == pytest.approx(-0.5)
    assert knp.row_envelope_slopes(block, 0, 8)[0] == pytest.approx(-0.5)


def test_backend_selection_is_reported():
    assert kernels.BACKEND in ("numba", "numpy")


_PROBE = """
import json
from expstab import BACKEND, classify, random_family
from expstab.evolution import build_norm_table
rep = classify(random_family(5, 3, 0.6), 200)
t = build_norm_table(random_family(5, 3, 0.6, norm="l2"), 120)
print(json.dumps([BACKEND, rep.verdict, rep.alpha_hat, t.entry(120, 3)]))
"""


def _run_backend(name):
    env = dict(os.environ, EXPSTAB_BACKEND=name)
    out = subprocess.run([sys.executable, "-c", _PROBE], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def test_environment_switch_selects_backend_with_same_results():
    fast, slow = _run_backend("numba"), _run_backend("numpy")
    assert slow[0] == "numpy" and fast[0] in ("numba", "numpy")
    assert fast[1] == slow[1]
    assert fast[2] == pytest.approx(slow[2], rel=1e-9)
    assert fast[3] == pytest.approx(slow[3], rel=1e-9, abs=1e-12)


def test_unknown_backend_is_rejected():
    env = dict(os.environ, EXPSTAB_BACKEND="fortran")
    proc = subprocess.run([sys.executable, "-c", "import expstab"], env=env, capture_output=True, text=True)
    assert proc.returncode != 0 and "EXPSTAB_BACKEND" in proc.stderr
