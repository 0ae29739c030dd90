import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmlab.lax import (
    LaxProducts,
    ThresholdError,
    apply_lax,
    beta,
    beta_dk,
    build_lax,
    decay_diagnostics,
    energies,
    equicontinuity_functional,
    resolve,
    s_opnorm,
    sobolev_ratio,
    sst_spectrum,
    t_hsnorm,
)
from cmlab.spectral import (
    TWO_PI,
    Geometry,
    HardyState,
    constant_state,
    inner,
    line_soliton,
    mass,
    plane_wave,
    random_state,
    torus_soliton,
)

from conftest import rel


def zero(g):
    return HardyState(g, np.zeros(g.n_modes))


@pytest.mark.parametrize("g", [Geometry.torus(16), Geometry.line(16, 5.0)])
def test_free_lax_is_diagonal(g):
    lax = build_lax(zero(g))
    np.testing.assert_array_equal(lax.matrix, np.diag(g.freqs))


@pytest.mark.parametrize("g", [Geometry.torus(32), Geometry.line(32, 12.0)])
@pytest.mark.parametrize("sign", ["focusing", "defocusing"])
def test_matrix_matches_matrix_free(g, sign, rng):
    q = random_state(g, rng, 1.5, sign)
    f = random_state(g, rng, 1.0)
    lax = build_lax(q)
    assert np.abs(lax.matrix - lax.matrix.conj().T).max() == 0
    assert rel(lax.apply(f).coeffs, apply_lax(q, f).coeffs) < 1e-12


@pytest.mark.parametrize("geom", [Geometry.torus(24), Geometry.line(32, 12.0)])
@pytest.mark.parametrize("sign", ["focusing", "defocusing"])
def test_matrix_free_products_match_matrix(geom, sign, rng):
    q = random_state(geom, rng, 1.0, sign)
    v = rng.normal(size=geom.n_modes) + 1j * rng.normal(size=geom.n_modes)
    assert rel(LaxProducts(q).dot(v), build_lax(q).matrix @ v) < 1e-13
    np.testing.assert_allclose(energies(q, 4, LaxProducts(q)), energies(q, 4, build_lax(q)),
                               rtol=1e-12, atol=1e-13)


def test_torus_soliton_eigenrelation():
    q = torus_soliton(3, 128)
    r = build_lax(q).matrix @ q.coeffs + q.coeffs
    assert np.linalg.norm(r) / np.linalg.norm(q.coeffs) < 1e-7


@pytest.mark.parametrize("half", [40.0, 80.0])
def test_line_soliton_eigenvalue_shift(half):
    # The window soliton is an exact eigenvector; its eigenvalue -dxi/2 comes
    # from the zero bin and vanishes as the window grows.
    q = line_soliton(1, int(12.8 * half), half)
    v = build_lax(q).matrix @ q.coeffs
    lam = q.geometry.dxi / 2
    assert np.linalg.norm(v + lam * q.coeffs) / np.linalg.norm(q.coeffs) < 1e-12
    assert np.linalg.norm(v) / np.linalg.norm(q.coeffs) == pytest.approx(math.pi / (2 * half))


def test_resolve_zero():
    rv = resolve(zero(Geometry.torus(8)), 2.0)
    assert rv.beta == 0 and not np.any(rv.m.coeffs)


@pytest.mark.parametrize("kappa", [2.0, 3.0, 5.0])
def test_soliton_beta(kappa):
    q = torus_soliton(3, 128)
    assert beta(q, kappa) == pytest.approx(TWO_PI / (kappa - 1), rel=1e-6)
    # d beta / d kappa = -||m||^2 = -2 pi / (kappa - 1)^2
    assert beta_dk(q, kappa) == pytest.approx(-TWO_PI / (kappa - 1) ** 2, rel=1e-6)


@pytest.mark.parametrize("m", [1, 2, 3])
@pytest.mark.parametrize("kappa", [1.0, 4.0])
def test_plane_wave_beta_and_energies(m, kappa):
    q = plane_wave(math.sqrt(2 * m), m, 16, "defocusing")
    assert beta(q, kappa) == pytest.approx(4 * math.pi * m / (3 * m + kappa), rel=1e-12)
    e = energies(q, 4)
    np.testing.assert_allclose(e, [(3 * m) ** n * 4 * math.pi * m for n in range(5)], rtol=1e-12)


@pytest.mark.parametrize("sign,s", [("focusing", 1), ("defocusing", -1)])
def test_plane_wave_e1(sign, s):
    c = 0.6 + 0.3j
    q = plane_wave(c, 1, 8, sign)
    a2 = abs(c) ** 2
    assert energies(q, 1)[1] == pytest.approx(TWO_PI * a2 - s * TWO_PI * a2 ** 2, rel=1e-13)


def test_energies_zero_and_limit():
    assert not np.any(energies(zero(Geometry.torus(8)), 6))
    with pytest.raises(ValueError):
        energies(zero(Geometry.torus(8)), 7)


def test_resolvent_residual_and_reality(rng):
    q = random_state(Geometry.line(48, 18.0), rng, 2.0)
    lax = build_lax(q)
    rv = resolve(q, 3.0, lax)
    r = (lax.matrix + 3.0 * np.eye(48)) @ rv.m.coeffs - q.coeffs
    assert np.linalg.norm(r) < 1e-10
    assert abs(inner(q, rv.m).imag) < 1e-10


def test_beta_generating_function(rng):
    q = random_state(Geometry.torus(32), rng, 1.0)
    e = energies(q, 4)
    kappa = 200.0
    series = sum((-1) ** n * kappa ** (-(n + 1)) * e[n] for n in range(5))
    assert beta(q, kappa) == pytest.approx(series, rel=1e-9)
    assert 1e4 * beta(q, 1e4) == pytest.approx(e[0], rel=1e-3)


def test_kappa_below_one_rejected():
    with pytest.raises(ValueError):
        resolve(zero(Geometry.torus(4)), 0.5)


def test_threshold_error_names_mass():
    q = torus_soliton(1, 64) * 1.5
    with pytest.raises(ThresholdError) as exc:
        resolve(q, 1.0)
    assert exc.value.mass == pytest.approx(2.25 * TWO_PI, rel=1e-8)
    assert "mass" in str(exc.value)


def test_defocusing_any_mass_is_fine():
    q = torus_soliton(1, 64, "defocusing") * 3
    assert beta(q, 1.0) > 0


def test_operator_norms_zero():
    z = zero(Geometry.torus(8))
    assert s_opnorm(z, 1.0) == 0 and t_hsnorm(z, z, 1.0) == 0


@pytest.mark.parametrize("n", [64, 128, 256])
def test_s_norm_of_constant(n):
    assert s_opnorm(constant_state(1.0, Geometry.torus(n)), 1.0) ** 2 <= 1 + 1e-8


@pytest.mark.parametrize("g", [Geometry.torus(32), Geometry.line(32, 12.0)])
def test_s_bound_and_sst(g, rng):
    q = random_state(g, rng, 1.0)
    assert s_opnorm(q, 1.0) ** 2 <= 1.0 / TWO_PI + 1e-8
    sp = sst_spectrum(q, 1.0)
    ref = np.sort(sp["S*S"].real)
    for key in ("T", "T*", "SS*"):
        np.testing.assert_allclose(np.sort(sp[key].real), ref, atol=1e-6)
        assert np.abs(sp[key].imag).max() < 1e-6


def test_t_hsnorm_bilinear(rng):
    g = Geometry.torus(24)
    q, f = random_state(g, rng, 1.0), random_state(g, rng, 1.0)
    assert t_hsnorm(q * 2.5, f, 2.0) == pytest.approx(2.5 * t_hsnorm(q, f, 2.0))


def test_sobolev_ratio_zero(rng):
    g = Geometry.torus(16)
    f = random_state(g, rng, 1.0)
    for s in (-1, -0.5, 0, 0.5, 1):
        assert sobolev_ratio(zero(g), f, s, 2.0) == pytest.approx(1.0)


def test_sobolev_ratio_soliton_growth():
    inv = []
    for n in (2, 4, 8, 16):
        q = torus_soliton(n, 512)
        inv.append(1.0 / sobolev_ratio(q, q, 1.0, 2.0))
    assert all(b > a for a, b in zip(inv, inv[1:]))
    assert inv[-1] / inv[0] >= 4


def test_sobolev_ratio_band(rng):
    g = Geometry.torus(32)
    vals = []
    for i in range(100):
        q = random_state(g, rng, 0.5, ("focusing", "defocusing")[i % 2])
        f = random_state(g, rng, 1.0)
        for s in (-1.0, 1.0):
            vals.append(sobolev_ratio(q, f, s, 2.0))
    vals = np.array(vals)
    c = max(vals.max(), 1 / vals.min())
    assert np.isfinite(c) and c < 2.0


def test_sobolev_ratio_refuses_indefinite():
    q = torus_soliton(1, 64) * 1.5
    with pytest.raises(ThresholdError):
        sobolev_ratio(q, q, 1.0, 1.0)


def test_equicontinuity_functional(rng):
    g = Geometry.torus(32)
    assert equicontinuity_functional(zero(g), 1.0) == 0
    q = random_state(g, rng, 1.2)
    vals = [equicontinuity_functional(q, v) for v in (0.5, 2, 8, 32, 1e8)]
    assert 0 <= vals[0] <= mass(q)
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-10


@pytest.mark.parametrize("sign,s", [("focusing", 1), ("defocusing", -1)])
def test_decay_plane_wave(sign, s):
    c = 0.5
    q = plane_wave(c, 1, 8, sign)
    lam = 1 - s * c * c
    kappa = 3.0
    a, b = decay_diagnostics(q, kappa)
    m_norm = math.sqrt(mass(q)) / (lam + kappa)
    assert a == pytest.approx(abs(lam) * m_norm, rel=1e-12)
    assert b == pytest.approx(kappa * abs(lam) * m_norm / (lam + kappa), rel=1e-12)


def test_decay_zero_and_monotone(rng):
    g = Geometry.torus(32)
    assert decay_diagnostics(zero(g), 2.0) == (0.0, 0.0)
    q = random_state(g, rng, 1.0)
    a = [decay_diagnostics(q, k) for k in (4, 8, 16, 32)]
    for j in range(2):
        assert all(y[j] < x[j] for x, y in zip(a, a[1:]))


def test_lowest_eigenvalue_bound(rng):
    # L_q + 1 >= (1 - M / 2pi) (L_0 + 1) as forms, so its lowest eigenvalue
    # is at least 1 - M / 2pi.
    g = Geometry.torus(48)
    for _ in range(20):
        m = rng.uniform(0.1, 0.95) * TWO_PI
        q = random_state(g, rng, m)
        assert build_lax(q).eigenvalues[0] + 1 >= 1 - m / TWO_PI - 1e-10


@given(st.integers(0, 2 ** 32 - 1), st.floats(1.0, 20.0))
@settings(max_examples=30, deadline=None)
def test_beta_real_positive(seed, kappa):
    r = np.random.default_rng(seed)
    q = random_state(Geometry.torus(16), r, r.uniform(0.1, 5.0), "defocusing")
    rv = resolve(q, kappa)
    assert rv.beta > 0
    assert abs(inner(q, rv.m).imag) < 1e-10 * max(1.0, rv.beta)
