import json
import math
import sys
import time

import numpy as np
import pytest

import cmlab
from cmlab import lax as lax_mod
from cmlab import symplectic
from cmlab.spectral import TWO_PI, Geometry, HardyState, constant_state, pm, random_state
from cmlab.verify import (
    SUITES,
    Check,
    SuiteReport,
    bound_suite,
    carleman_check,
    carleman_sides,
    commutation_suite,
    degeneracy_suite,
    gradient_suite,
    l1_norm,
    line_geometry,
    lipschitz_probe,
    run_all,
    run_suite,
    s_norm_constant,
)


def _patch_everywhere(monkeypatch, name, replacement):
    """Replace ``name`` in every loaded cmlab module that imported it."""
    for mod_name, mod in list(sys.modules.items()):
        if mod_name.startswith("cmlab") and hasattr(mod, name):
            monkeypatch.setattr(mod, name, replacement)


# ------------------------------------------------------------ reports

def test_report_bookkeeping():
    rep = SuiteReport("demo")
    rep.check_le("small", 0.5, 1.0)
    rep.check_ge("large", 0.5, 1.0)
    assert not rep.passed
    assert [c.name for c in rep.failures()] == ["large"]
    d = rep.to_dict()
    json.dumps(d)
    assert d["passed"] is False and len(d["checks"]) == 2


def test_report_nan_is_failure():
    rep = SuiteReport("nan")
    rep.check_le("x", float("nan"), 1.0)
    assert not rep.passed
    json.dumps(rep.to_dict())


def test_report_error_is_failure():
    rep = SuiteReport("boom", error="RuntimeError: x")
    assert not rep.passed


# ------------------------------------------------------------ Carleman

def test_carleman_single_mode():
    c = np.zeros(16, dtype=complex)
    c[1] = 1
    f = HardyState(Geometry.torus(16), c)
    lhs, rhs = carleman_sides(f)
    assert lhs == pytest.approx(TWO_PI / 4, rel=1e-12)
    assert rhs == pytest.approx(math.pi, rel=1e-12)
    assert lhs / rhs == pytest.approx(0.5, rel=1e-12)


def test_carleman_zero():
    f = HardyState(Geometry.torus(16), np.zeros(16))
    assert carleman_sides(f) == (0.0, 0.0)


def test_l1_norm_constant():
    g = Geometry.torus(16)
    assert l1_norm(constant_state(2.0, g)) == pytest.approx(2 * TWO_PI, rel=1e-12)


@pytest.mark.parametrize("geometry", ["torus", "line"])
def test_carleman_random(geometry):
    rep = carleman_check(geometry, trials=40, seed=3, n_modes=32)
    assert rep.passed, rep.failures()
    assert 0 < rep.info["max_ratio"] <= 1


def test_carleman_near_extremal_torus():
    # the torus bound is approached by Poisson kernels
    r = 0.9
    c = r ** np.arange(512)
    lhs, rhs = carleman_sides(HardyState(Geometry.torus(512), c))
    assert 0.95 < lhs / rhs <= 1 + 1e-9


# ------------------------------------------------------------ suites

def test_s_norm_saturates():
    vals = s_norm_constant((32, 64, 128))
    assert all(0.9 < v <= 1 + 1e-12 for v in vals.values())


@pytest.mark.parametrize("runner,trials", [
    (bound_suite, 10), (gradient_suite, 1), (commutation_suite, 2),
    (degeneracy_suite, 10), (lipschitz_probe, 5),
])
def test_suites_pass_small(runner, trials):
    rep = runner(trials, 11, 16)
    assert rep.passed, [c for c in rep.checks if not c.passed] or rep.error


def test_line_geometry_minimum():
    g = line_geometry(16)
    assert g.kind == "line" and g.n_modes >= 64


def test_run_suite_unknown():
    with pytest.raises(ValueError):
        run_suite("nonsense")


def test_run_all_smoke_fast():
    t0 = time.perf_counter()
    out = run_all(seed=7, n_modes=16)
    elapsed = time.perf_counter() - t0
    assert out["passed"], [s["name"] for s in out["suites"] if not s["passed"]]
    assert elapsed < 5.0
    json.dumps(out)
    assert {s["suite"].split("-")[0] for s in out["suites"]} == set(SUITES)


def test_run_all_deterministic():
    a = run_all(seed=5, n_modes=16, trials=1, suites=("carleman", "bounds", "lipschitz"))
    b = run_all(seed=5, n_modes=16, trials=1, suites=("carleman", "bounds", "lipschitz"))
    for x in (a, b):
        for s in x["suites"]:
            s.pop("elapsed_s")
    assert a == b


def test_run_all_collects_crash(monkeypatch):
    def boom(*args, **kw):
        raise RuntimeError("kaboom")

    monkeypatch.setattr("cmlab.verify.lipschitz_probe", boom)
    out = run_all(seed=7, n_modes=16, trials=1, suites=("lipschitz", "carleman"))
    assert not out["passed"]
    assert len(out["suites"]) == 3
    assert "kaboom" in out["suites"][0]["error"]


# ------------------------------------------------------------ mutations

def _flipped_omega(q):
    th = symplectic.theta(q)
    n = q.n_modes
    s = -pm(q.sign)
    return symplectic.RealLinearOperator(1j * (np.eye(n) - 2 * s * th.A), -2j * s * th.B)


def test_mutation_theta_sign(monkeypatch):
    _patch_everywhere(monkeypatch, "omega_op", _flipped_omega)
    rng = np.random.default_rng(1)
    q = random_state(Geometry.torus(16), rng, 1.0)
    f, g, h = (random_state(Geometry.torus(16), rng, 1.0) for _ in range(3))
    # still a closed form, but the wrong one
    assert abs(symplectic.closedness_defect(q, f, g, h)) < 1e-10
    assert not gradient_suite(1, 7, 16).passed


def test_mutation_lax_sign(monkeypatch):
    original = lax_mod.build_lax

    def flipped(q):
        return original(q.with_sign("defocusing" if q.sign == "focusing" else "focusing"))

    _patch_everywhere(monkeypatch, "build_lax", flipped)
    reports = [gradient_suite(1, 7, 16), degeneracy_suite(5, 7, 16), commutation_suite(1, 7, 16)]
    assert not all(r.passed for r in reports)


def test_mutation_hamiltonian_gradient(monkeypatch):
    original = symplectic.grad

    def flipped(fn, q, lax=None):
        fn = symplectic.Functional.parse(fn) if isinstance(fn, str) else fn
        if fn.kind == "hamiltonian":
            other = q.with_sign("defocusing" if q.sign == "focusing" else "focusing")
            return q.with_coeffs(original(fn, other).coeffs)
        return original(fn, q, lax)

    _patch_everywhere(monkeypatch, "grad", flipped)
    assert not gradient_suite(1, 7, 16).passed
