import math

import numpy as np
import pytest

from cmlab.lax import ThresholdError, build_lax, energies
from cmlab.spectral import (
    TWO_PI,
    Geometry,
    HardyState,
    constant_state,
    mass,
    plane_wave,
    random_state,
    rescale_to_mass,
    torus_soliton,
)
from cmlab.flows import (
    FlowSpec,
    ccm_field,
    half_e2_field,
    equicontinuity_monitor,
    evolve,
    hk_convergence,
    hk_field,
    lax_residual,
    lax_residual_at,
    probe_dt,
    linear_symbol,
    negative_norm,
    peter_operator,
    step,
    tail_mass,
    vector_field,
)
from cmlab.symplectic import grad

from conftest import rel

T32 = Geometry.torus(32)
L64 = Geometry.line(64, 24.0)
SIGNS = ["focusing", "defocusing"]
FLOWS = [("ccm", None), ("beta", 3.0), ("en", 1), ("en", 2), ("en", 3), ("hk", 8.0),
         ("mass", None), ("momentum", None)]


def dist(a: HardyState, b: HardyState) -> float:
    return math.sqrt(a.geometry.weight) * float(np.linalg.norm(a.coeffs - b.coeffs))


# ------------------------------------------------------------ flow specification

def test_flowspec_validation():
    with pytest.raises(ValueError):
        FlowSpec("kdv", T32)
    with pytest.raises(ValueError):
        FlowSpec("beta", T32)
    with pytest.raises(ValueError):
        FlowSpec("beta", T32, param=0.5)
    with pytest.raises(ValueError):
        FlowSpec("half-e2", L64)
    with pytest.raises(ValueError):
        FlowSpec("ccm", T32, dt=1e-3, t_final=0.0015)
    with pytest.raises(ValueError):
        FlowSpec("hk", T32, param=4.0, hk_split="other")
    spec = FlowSpec.parse("beta:3", T32, dt=1e-2, t_final=0.1)
    assert spec.label == "beta:3" and spec.steps == 10
    assert FlowSpec.parse("en:2", T32).hamiltonian().param == 2


# ------------------------------------------------------------ fields

@pytest.mark.parametrize("g", [T32, L64])
@pytest.mark.parametrize("sign", SIGNS)
@pytest.mark.parametrize("field,param", FLOWS)
def test_field_matches_symplectic_gradient(g, sign, field, param, rng):
    # independent assemblies: product formulas / Peter operator vs 2 J dF
    q = random_state(g, rng, 1.0, sign)
    spec = FlowSpec(field, g, sign, param=param)
    v = vector_field(spec, q).coeffs
    ref = spec.generator_scale * grad(spec.hamiltonian(), q).coeffs
    tol = 1e-8
    if g.kind == "line" and field == "ccm":
        tol = 1e-4  # continuum product formula on a finite window
    assert rel(v, ref) < tol


def test_line_ccm_field_window_error_shrinks(rng):
    errs = []
    for n, half in [(64, 24.0), (128, 48.0), (256, 96.0)]:
        g = Geometry.line(n, half)
        q = random_state(g, rng, 1.0)
        errs.append(rel(ccm_field(q).coeffs, grad("hamiltonian", q).coeffs))
    assert errs[0] > errs[1] > errs[2]


@pytest.mark.parametrize("sign", SIGNS)
@pytest.mark.parametrize("field,param", [("beta", 3.0), ("en", 2), ("ccm", None), ("hk", 8.0)])
def test_peter_operator_generates_field(sign, field, param, rng):
    q = random_state(T32, rng, 1.0, sign)
    spec = FlowSpec(field, T32, sign, param=param)
    p = peter_operator(spec, q)
    assert rel(p @ q.coeffs, vector_field(spec, q).coeffs) < 1e-9


@pytest.mark.parametrize("sign,s", [("focusing", 1), ("defocusing", -1)])
def test_ccm_plane_wave_field(sign, s):
    c = 0.3 - 0.2j
    q = plane_wave(c, 1, 16, sign)
    expect = np.zeros(16, dtype=complex)
    expect[1] = -1j * c * (1 + s * 2 * abs(c) ** 2)
    np.testing.assert_allclose(ccm_field(q).coeffs, expect, atol=1e-14)


@pytest.mark.parametrize("sign,s", [("focusing", 1), ("defocusing", -1)])
def test_half_e2_is_ccm_up_to_modulation(sign, s, rng):
    q = random_state(T32, rng, 1.0, sign)
    diff = half_e2_field(q).coeffs - ccm_field(q).coeffs
    xi = T32.freqs
    e = energies(q, 1)
    # (c1 d/dx + i c2) q with coefficients fixed by mass and momentum
    m0 = e[0]
    p = -0.5 * e[1] - s * m0 * m0 / (4 * math.pi)
    c1 = s * m0 / TWO_PI + s * m0 / math.pi
    c2 = -s * 3 / math.pi * p - 3 / (4 * math.pi ** 2) * m0 * m0
    expect = (c1 * 1j * xi + 1j * c2) * q.coeffs
    assert rel(diff, expect) < 1e-8


def test_fields_vanish_at_zero():
    for g in (T32, L64):
        z = HardyState(g, np.zeros(g.n_modes))
        for field, param in FLOWS:
            assert not np.any(vector_field(FlowSpec(field, g, param=param), z).coeffs)


def test_linear_symbol_matches_field_at_small_amplitude(rng):
    q = rescale_to_mass(random_state(T32, rng, 1.0), 1e-14)
    for field, param in [("ccm", None), ("beta", 3.0), ("en", 2), ("hk", 8.0), ("mass", None)]:
        spec = FlowSpec(field, T32, param=param)
        assert rel(vector_field(spec, q).coeffs, linear_symbol(spec) * q.coeffs) < 1e-10


def test_hk_duhamel_split_differs_only_linearly():
    spec_f = FlowSpec("hk", T32, param=4.0)
    spec_d = FlowSpec("hk", T32, param=4.0, hk_split="duhamel")
    diff = linear_symbol(spec_f) - linear_symbol(spec_d)
    xi = T32.freqs
    np.testing.assert_allclose(diff, -1j * 64 / (xi + 4), atol=1e-12)


# ------------------------------------------------------------ integration

def test_ccm_plane_wave_closed_form():
    c = 0.3
    q = plane_wave(c, 1, 128)
    spec = FlowSpec("ccm", Geometry.torus(128), dt=1e-3, t_final=1.0, monitor_stride=1000)
    out = evolve(spec, q).final
    assert abs(out.coeffs[1] - c * np.exp(-1j * (1 + 2 * c * c))) < 1e-8
    assert np.abs(np.delete(out.coeffs, 1)).max() < 1e-14


def test_mass_flow_is_phase_rotation(rng):
    q = random_state(T32, rng, 1.0)
    out = evolve(FlowSpec("mass", T32, dt=0.05, t_final=0.5, monitor_stride=10), q).final
    np.testing.assert_allclose(out.coeffs, np.exp(-1j) * q.coeffs, atol=1e-14)


def test_momentum_flow_is_translation(rng):
    q = random_state(T32, rng, 1.0, "defocusing")
    out = evolve(FlowSpec("momentum", T32, "defocusing", dt=0.05, t_final=0.5), q).final
    np.testing.assert_allclose(out.coeffs, np.exp(0.5j * T32.freqs) * q.coeffs, atol=1e-14)


def test_soliton_conservation_short():
    g = Geometry.torus(128)
    tr = evolve(FlowSpec("ccm", g, dt=5e-4, t_final=0.1, monitor_stride=50), torus_soliton(3, 128))
    for name in ("mass", "e2", "beta"):
        assert tr.drift(name) < 1e-7
    # the soliton sits exactly at the focusing threshold
    assert any("threshold" in w for w in tr.warnings)


def test_fourth_order_convergence(rng):
    q = random_state(T32, rng, 0.8)
    errs = []
    ref = evolve(FlowSpec("ccm", T32, dt=6.25e-4, t_final=0.1, monitor_stride=1000), q).final
    for dt in (1e-2, 5e-3):
        out = evolve(FlowSpec("ccm", T32, dt=dt, t_final=0.1, monitor_stride=1000), q).final
        errs.append(dist(out, ref))
    assert 12 < errs[0] / errs[1] < 20


def test_step_is_reversible(rng):
    q = random_state(T32, rng, 0.8)
    spec = FlowSpec("beta", T32, param=3.0, dt=1e-2)
    back = step(spec, step(spec, q), -1e-2)
    assert dist(back, q) < 1e-9


def test_beta_flows_commute(rng):
    g = Geometry.torus(32)
    q = random_state(g, rng, 1.0)

    def run(x, k):
        return evolve(FlowSpec("beta", g, param=k, dt=2e-3, t_final=0.2, monitor_stride=100), x).final

    a = run(run(q, 3.0), 5.0)
    b = run(run(q, 5.0), 3.0)
    assert dist(a, b) <= 1e-6
    assert dist(a, q) > 1e-2


def test_focusing_threshold_warning():
    q = rescale_to_mass(torus_soliton(1, 32), TWO_PI)
    tr = evolve(FlowSpec("ccm", T32, dt=1e-3, t_final=1e-3), q)
    assert any("threshold" in w for w in tr.warnings)


def test_beta_flow_above_threshold_raises():
    q = constant_state(1.2, T32)
    with pytest.raises(ThresholdError):
        evolve(FlowSpec("beta", T32, param=1.0, dt=1e-3, t_final=1e-3), q)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_blowup_reported():
    big = HardyState(T32, np.full(32, 1e80, dtype=complex))
    tr = evolve(FlowSpec("ccm", T32, "defocusing", dt=1e-1, t_final=1.0, monitor_stride=1), big)
    assert tr.blowup is not None
    assert np.all(np.isfinite(tr.blowup["last_finite"].coeffs))


def test_geometry_mismatch(rng):
    with pytest.raises(ValueError):
        evolve(FlowSpec("ccm", T32), random_state(Geometry.torus(16), rng, 1.0))


# ------------------------------------------------------------ Lax residual

def test_lax_residual_zero_state():
    z = HardyState(T32, np.zeros(32))
    tr = evolve(FlowSpec("beta", T32, param=3.0, dt=1e-2, t_final=0.05, monitor_stride=1), z)
    assert np.all(lax_residual(tr.spec, tr) == 0)


@pytest.mark.parametrize("field,param", [("beta", 3.0), ("en", 1), ("en", 2), ("en", 3)])
def test_lax_residual_small_and_second_order(field, param, rng):
    g = Geometry.torus(64)
    q = random_state(g, rng, 0.8)
    spec = FlowSpec(field, g, param=param, dt=1e-3)
    h = probe_dt(spec)
    r1, p1 = lax_residual_at(spec, q)
    r2, _ = lax_residual_at(spec, q, h / 2)
    assert r1 <= 1e-4
    assert p1 <= 1e-9
    assert 3.5 < r1 / r2 < 4.5


def test_probe_dt_scales_with_stiffness():
    g = Geometry.torus(64)
    assert probe_dt(FlowSpec("beta", g, param=3.0, dt=1e-3)) == 1e-3
    assert probe_dt(FlowSpec("en", g, param=3, dt=1e-3)) == pytest.approx(1e-2 / (2 * 31 ** 3))


def test_lax_monitor_records_residual(rng):
    q = random_state(T32, rng, 0.5)
    tr = evolve(FlowSpec("beta", T32, param=3.0, dt=1e-2, t_final=0.02, monitor_stride=1,
                         lax_monitor=True), q)
    assert np.all(tr.monitors["lax_residual"] < 1e-3)
    assert np.all(np.isnan(evolve(FlowSpec("beta", T32, param=3.0, dt=1e-2, t_final=0.02),
                                  q).monitors["lax_residual"]))


# ------------------------------------------------------------ diagnostics

def test_equicontinuity_plane_wave_constant():
    q = plane_wave(0.5, 2, 32)
    tr = evolve(FlowSpec("ccm", T32, dt=1e-2, t_final=0.2, monitor_stride=5), q)
    trace = equicontinuity_monitor(tr, 4.0)
    assert np.ptp(trace.functional) <= 1e-12 * trace.functional[0]
    assert trace.tail.max() < 1e-30 and not trace.cascade


def test_equicontinuity_hk_conserved(rng):
    q = random_state(T32, rng, 0.8)
    tr = evolve(FlowSpec("hk", T32, param=4.0, dt=1e-3, t_final=0.1, monitor_stride=20), q)
    trace = equicontinuity_monitor(tr, 4.0)
    assert np.ptp(trace.functional) <= 1e-6 * trace.functional[0]


def test_tail_mass_and_negative_norm():
    q = HardyState(Geometry.torus(8), np.array([0, 0, 0, 0, 0, 1.0, 0, 0]))
    assert tail_mass(q) == pytest.approx(TWO_PI)
    assert negative_norm(q, 1.0) == pytest.approx(math.sqrt(TWO_PI) / 6)


def test_hk_convergence_zero():
    z = HardyState(T32, np.zeros(32))
    rows = hk_convergence(z, [8, 16], 0.01, dt=1e-3, monitor_stride=5)
    assert all(r.sup_distance == 0 and r.field_distance == 0 for r in rows)


def test_hk_static_field_convergence():
    q2 = torus_soliton(2, 64)
    ref = ccm_field(q2)
    d = [negative_norm(hk_field(q2, k) - ref) for k in (8, 16, 32, 64)]
    assert all(a > b for a, b in zip(d, d[1:]))
