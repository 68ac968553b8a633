"""Both kernel backends against scipy and closed forms."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from mgpboot import kernels

BACKENDS = sorted(kernels.IMPLEMENTATIONS)
NUS = [1.05, 1.5, 2.0, 2.5, 3.0, 7.0, 30.0, 200.0]


@pytest.fixture(params=BACKENDS)
def impl(request):
    return kernels.IMPLEMENTATIONS[request.param]


@pytest.mark.parametrize("nu", NUS)
def test_sf_matches_scipy(impl, nu):
    t = np.concatenate([np.linspace(-40, 40, 801), [0.0, 1e-8, 1e3, 1e6, -1e6]])
    ref = stats.t.sf(t, nu)
    np.testing.assert_allclose(impl["t_sf"](t, nu), ref, rtol=1e-10, atol=1e-300)


def test_sf_closed_form_nu2(impl):
    # P(T > t) = 1/2 - t / (2 sqrt(2 + t^2)) for two degrees of freedom
    t = np.linspace(-20, 20, 401)
    np.testing.assert_allclose(impl["t_sf"](t, 2.0), 0.5 - t / (2 * np.sqrt(2 + t * t)), rtol=1e-12, atol=1e-15)


def test_sf_cauchy_closed_form(impl):
    t = np.linspace(-30, 30, 301)
    np.testing.assert_allclose(impl["t_sf"](t, 1.0), 0.5 - np.arctan(t) / math.pi, rtol=1e-11, atol=1e-15)


@pytest.mark.parametrize("nu", NUS)
def test_isf_matches_scipy(impl, nu):
    p = np.concatenate([np.geomspace(1e-12, 0.5, 200), np.linspace(0.5, 0.999, 50)])
    ref = stats.t.isf(p, nu)
    got = impl["t_isf"](p, nu)
    np.testing.assert_allclose(got, ref, rtol=1e-8, atol=1e-12)


@pytest.mark.parametrize("nu", [1.5, 2.0, 3.0, 25.0])
def test_isf_roundtrip_extreme_tail(impl, nu):
    # keep |t| below ~1e150 where t*t is still finite
    p = np.geomspace(max(1e-250, 10.0 ** (-100 * nu)), 1e-3, 60)
    back = impl["t_sf"](impl["t_isf"](p, nu), nu)
    np.testing.assert_allclose(back, p, rtol=1e-10)


def test_isf_edges(impl):
    out = impl["t_isf"](np.array([0.0, 1.0, 0.5]), 3.0)
    assert out[0] == np.inf and out[1] == -np.inf and out[2] == 0.0


@pytest.mark.parametrize("a,b", [(0.5, 0.5), (1.0, 3.0), (2.5, 0.5), (10.0, 7.0), (100.0, 0.5)])
def test_betainc_matches_scipy(impl, a, b):
    x = np.linspace(0.0, 1.0, 201)
    np.testing.assert_allclose(impl["betainc"](a, b, x), special.betainc(a, b, x), rtol=1e-11, atol=1e-15)


def test_backends_agree():
    if len(BACKENDS) < 2:
        pytest.skip("numba not installed")
    t = np.linspace(-60, 60, 2001)
    p = np.geomspace(1e-200, 0.999, 500)
    a, b = kernels.IMPLEMENTATIONS["numba"], kernels.IMPLEMENTATIONS["numpy"]
    for nu in NUS:
        np.testing.assert_allclose(a["t_sf"](t, nu), b["t_sf"](t, nu), rtol=1e-13, atol=1e-300)
        np.testing.assert_allclose(a["t_isf"](p, nu), b["t_isf"](p, nu), rtol=1e-9)


def test_shape_preserved(impl):
    t = np.zeros((3, 4))
    assert impl["t_sf"](t, 2.0).shape == (3, 4)
    assert impl["t_isf"](np.full((2, 5), 0.3), 2.0).shape == (2, 5)


def test_bad_nu_rejected():
    with pytest.raises(ValueError):
        kernels.t_sf(np.zeros(2), -1.0)
    with pytest.raises(ValueError):
        kernels.t_isf(np.full(2, 0.1), math.inf)


@settings(max_examples=200, deadline=None)
@given(
    t=st.floats(-1e4, 1e4, allow_nan=False),
    nu=st.floats(1.01, 200.0),
)
def test_sf_symmetry(t, nu):
    s = kernels.t_sf(np.array([t, -t]), nu)
    assert abs(s[0] + s[1] - 1.0) < 1e-13


@settings(max_examples=200, deadline=None)
@given(
    p=st.floats(1e-200, 0.999999),
    q=st.floats(1e-200, 0.999999),
    nu=st.floats(1.01, 200.0),
)
def test_isf_monotone(p, q, nu):
    lo, hi = sorted((p, q))
    x = kernels.t_isf(np.array([lo, hi]), nu)
    assert x[0] >= x[1]


@pytest.mark.parametrize("value,expected", [("numpy", "numpy"), ("NumPy ", "numpy"), ("bogus", None)])
def test_backend_env_flag(value, expected):
    import os
    import subprocess
    import sys

    env = {**os.environ, "MGPBOOT_BACKEND": value}
    proc = subprocess.run([sys.executable, "-c", "from mgpboot import kernels; print(kernels.BACKEND)"],
                          env=env, capture_output=True, text=True)
    if expected is None:
        assert proc.returncode != 0 and "MGPBOOT_BACKEND" in proc.stderr
    else:
        assert proc.stdout.strip() == expected


def test_pipeline_identical_across_backends():
    import os
    import subprocess
    import sys

    code = ("from mgpboot.experiment import ScenarioConfig, run_scenario;"
            "r = run_scenario(ScenarioConfig(n_outer=1, n_inner=2, m=2000, oracle_size=20000));"
            "print(sorted((k, round(s['mean'], 6)) for k, s in r.counts.stats.items()))")
    outs = []
    for b in BACKENDS:
        proc = subprocess.run([sys.executable, "-c", code], env={**os.environ, "MGPBOOT_BACKEND": b},
                              capture_output=True, text=True, check=True)
        outs.append(proc.stdout)
    assert len(set(outs)) == 1
