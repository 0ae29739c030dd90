"""Verification suites for the inequalities, identities and thresholds.

Every suite is a deterministic function of ``(seed, n_modes, trials)`` and
returns a :class:`SuiteReport`.  A report is a list of named checks, each
carrying the measured value, its limit and a pass flag, plus free-form
diagnostics (maxima, ratios).  Suites never raise on a failed check;
:func:`run_all` collects them and the CLI turns any failure into exit code 2.

Random states follow :func:`cmlab.spectral.random_state`: on the torus
``q_hat(k) = r_k e^{i phi_k} (1 + k)^(-a)`` with ``r_k ~ U(0.5, 1)`` and
``a ~ U(1.5, 3)``, rescaled to a target mass; on the line a few Gaussian
wave packets.  The line window used by the suites has at least 64 modes
and half-length ``3 N / 8``, which keeps packets resolved in both space and
frequency.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .lax import (
    build_lax,
    resolve,
    s_matrix,
    s_opnorm,
    sst_spectrum,
    t_hsnorm,
)
from .spectral import (
    TWO_PI,
    Geometry,
    HardyState,
    constant_state,
    conv,
    line_soliton,
    mass,
    norm,
    plane_wave,
    random_state,
    synthesize,
)
from .symplectic import (
    DegeneracyError,
    Functional,
    beta_wirtinger,
    degeneracy_witness,
    grad,
    grad_oracle,
    j_map,
    l2_distance,
    omega_op,
    poisson_bracket,
)

IDENTITY_TOL = {"torus": 1e-8, "line": 1e-5}
INEQ_SLACK = 1e-9

SUITES = ("carleman", "bounds", "gradients", "commute", "degeneracy", "lipschitz")

DEFAULT_TRIALS = {
    "carleman": 200,
    "bounds": 200,
    "gradients": 3,
    "commute": 10,
    "degeneracy": 100,
    "lipschitz": 50,
}


@dataclass
class Check:
    name: str
    value: float
    limit: float
    passed: bool
    relation: str = "<="

    def to_dict(self) -> dict:
        return {"name": self.name, "value": _num(self.value), "limit": _num(self.limit),
                "relation": self.relation, "passed": self.passed}


@dataclass
class SuiteReport:
    name: str
    checks: list[Check] = field(default_factory=list)
    info: dict = field(default_factory=dict)
    elapsed: float = 0.0
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks)

    def check_le(self, name: str, value: float, limit: float) -> Check:
        c = Check(name, float(value), float(limit), bool(np.isfinite(value) and value <= limit))
        self.checks.append(c)
        return c

    def check_ge(self, name: str, value: float, limit: float) -> Check:
        c = Check(name, float(value), float(limit), bool(np.isfinite(value) and value >= limit), ">=")
        self.checks.append(c)
        return c

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "suite": self.name,
            "passed": self.passed,
            "elapsed_s": round(self.elapsed, 4),
            "error": self.error,
            "checks": [c.to_dict() for c in self.checks],
            "info": {k: _jsonable(v) for k, v in self.info.items()},
        }


def _num(x: float) -> float | str:
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return _num(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


LINE_MIN_MODES = 64


def line_geometry(n_modes: int) -> Geometry:
    """Line window used by the suites.

    At least 64 modes with half-length ``3 N / 8``; smaller windows cut the
    wave packets off and the window error exceeds the identity tolerances.
    """
    n = max(n_modes, LINE_MIN_MODES)
    return Geometry.line(n, 3.0 * n / 8.0)


def _geometries(n_modes: int) -> list[Geometry]:
    return [Geometry.torus(n_modes), line_geometry(n_modes)]


def _rng(seed: int, *salt: int) -> np.random.Generator:
    return np.random.default_rng([seed, *salt])


# ------------------------------------------------------------ Carleman

def l1_norm(f: HardyState, oversample: int = 8) -> float:
    """``||f||_{L^1}`` by the rectangle rule on an oversampled grid.

    The rule is spectrally accurate for smooth periodic integrands; on the
    line the window is treated as one period.
    """
    g = f.geometry
    pts = max(64, oversample * g.grid_points)
    vals = synthesize(f, pts)
    length = TWO_PI if g.kind == "torus" else 2.0 * g.half_length
    return float(np.abs(vals).sum() * length / pts)


def carleman_sides(f: HardyState) -> tuple[float, float]:
    """Both sides of the Carleman inequality, ``(lhs, rhs)``.

    Torus: ``<f, (2 L_0 + 2)^{-1} f> = 2 pi sum |c_k|^2 / (2k + 2)``.

    Line: ``2 pi int |f_hat|^2 / (2 xi) dxi`` by the midpoint rule on bins
    ``[xi_j - dxi/2, xi_j + dxi/2)``, ``j >= 1``, each weighted by the exact
    integral of ``1 / (2 xi)`` over the bin.  The first half bin is replaced
    by the bound ``2 pi (|c_0| + |c_1|)^2 / 16`` valid for ``|f_hat(xi)| <=
    xi * sup|f_hat'|``, so the computed side never undercounts.

    The right side is ``||f||_{L^1}^2 / (4 pi)``.
    """
    g = f.geometry
    c = f.coeffs
    if g.kind == "torus":
        k = np.arange(c.size)
        lhs = TWO_PI * float(np.sum(np.abs(c) ** 2 / (2 * k + 2)))
    else:
        j = np.arange(1, c.size)
        w = 0.5 * np.log((j + 0.5) / (j - 0.5))
        lhs = TWO_PI * float(np.sum(np.abs(c[1:]) ** 2 * w))
        if c.size > 1:
            lhs += TWO_PI * (abs(c[0]) + abs(c[1])) ** 2 / 16.0
    rhs = l1_norm(f) ** 2 / (4.0 * math.pi)
    return lhs, rhs


def carleman_check(geometry: str | Geometry = "torus", trials: int = 200, seed: int = 7,
                   n_modes: int = 64) -> SuiteReport:
    """Carleman inequality on random ``f`` in the Hardy space.

    Reports the number of violations (``lhs > rhs + 1e-9``) and the largest
    ratio ``lhs / rhs``.  No claim about extremizers is made.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    t0 = time.perf_counter()
    g = geometry if isinstance(geometry, Geometry) else (
        Geometry.torus(n_modes) if geometry == "torus" else line_geometry(n_modes))
    rep = SuiteReport(f"carleman-{g.kind}")
    rng = _rng(seed, 1, 0 if g.kind == "torus" else 1)
    bad, worst = 0, 0.0
    for _ in range(trials):
        f = random_state(g, rng, rng.uniform(0.1, 10.0))
        lhs, rhs = carleman_sides(f)
        bad += lhs > rhs + INEQ_SLACK
        worst = max(worst, lhs / rhs)
    rep.check_le(f"violations ({g.kind})", bad, 0)
    rep.info["max_ratio"] = worst
    rep.info["trials"] = trials
    rep.elapsed = time.perf_counter() - t0
    return rep


# ------------------------------------------------------------ operator bounds

def s_bound_form(q: HardyState, g: HardyState, kappa: float) -> float:
    """``<g, C+ conj(q) (L_0 + kappa)^{-1} q g>`` with the exact product ``q g``."""
    d = q.geometry.dxi
    qg = d * conv(q.coeffs, g.coeffs)
    xi = np.arange(qg.size) * d
    return q.geometry.weight * float(np.sum(np.abs(qg) ** 2 / (xi + kappa)))


def op_bound_form(q: HardyState, g: HardyState) -> float:
    """``<g, C+ conj(q) (-i d)^{-1} q g>`` on the torus, for ``g_hat(0) = 0``."""
    if q.geometry.kind != "torus":
        raise ValueError("the inverse derivative form is checked on the torus")
    if abs(g.coeffs[0]) > 0:
        raise ValueError("g must have zero mean")
    qg = conv(q.coeffs, g.coeffs)
    k = np.arange(qg.size)
    return TWO_PI * float(np.sum(np.abs(qg[1:]) ** 2 / k[1:]))


def _embed(q: HardyState, geometry: Geometry) -> HardyState:
    c = np.zeros(geometry.n_modes, dtype=complex)
    m = min(q.n_modes, geometry.n_modes)
    c[:m] = q.coeffs[:m]
    return HardyState(geometry, c, q.sign)


def _doubled(g: Geometry) -> Geometry:
    if g.kind == "torus":
        return Geometry.torus(2 * g.n_modes)
    return Geometry.line(2 * g.n_modes, g.half_length)


def s_norm_constant(n_values=(64, 128, 256), kappa: float = 1.0) -> dict[int, float]:
    """``||S(1)||^2`` on the torus for each ``N``; the constant has mass ``2 pi``."""
    return {n: s_opnorm(constant_state(1.0, Geometry.torus(n)), kappa) ** 2 for n in n_values}


def bound_suite(trials: int = 200, seed: int = 7, n_modes: int = 64,
                kappas=(1.0, 3.0)) -> SuiteReport:
    """Operator bounds derived from the Carleman inequality.

    For random ``q`` (mass up to ``2 pi``) and ``g`` on both geometries:
    ``||S(q)||^2 <= M / 2 pi``, the quadratic form bound, the inverse
    derivative form bound (torus), ``1 - S*S >= 1 - M / 2 pi`` and
    ``S*S <= M / 2 pi`` as forms, Hilbert-Schmidt scaling of ``T(q, g)`` and
    equality of the four spectra.
    """
    t0 = time.perf_counter()
    rep = SuiteReport("bounds")
    for gi, g in enumerate(_geometries(n_modes)):
        rng = _rng(seed, 2, gi)
        worst = {"s_bound": -np.inf, "s_form": -np.inf, "op_form": -np.inf, "form_lower": -np.inf}
        hs_ratio, hs_scale, hs_n, sst_gap = 0.0, 0.0, 0.0, 0.0
        g2 = _doubled(g)
        for t in range(trials):
            m_q = rng.uniform(0.05, 1.0) * TWO_PI
            q = random_state(g, rng, m_q)
            f = random_state(g, rng, rng.uniform(0.1, 4.0))
            for kappa in kappas:
                s = s_matrix(q, kappa)
                sv = np.linalg.svd(s, compute_uv=False)
                worst["s_bound"] = max(worst["s_bound"], sv[0] ** 2 - m_q / TWO_PI)
                # 1 - S*S >= 1 - M/2pi: smallest eigenvalue of 1 - S*S minus the bound
                lo = 1.0 - sv[0] ** 2
                worst["form_lower"] = max(worst["form_lower"], (1 - m_q / TWO_PI) - lo)
                lhs = s_bound_form(q, f, kappa)
                worst["s_form"] = max(worst["s_form"],
                                      lhs - m_q * mass(f) / TWO_PI)
            if g.kind == "torus":
                f0 = f.with_coeffs(np.concatenate([[0.0], f.coeffs[1:]]))
                worst["op_form"] = max(worst["op_form"],
                                       op_bound_form(q, f0) - m_q * mass(f0) / TWO_PI)
            if t < min(trials, 20):
                qn, fn_ = norm(q), norm(f)
                hs = t_hsnorm(q, f, 1.0)
                hs_ratio = max(hs_ratio, hs / (qn * fn_))
                lam = rng.uniform(0.2, 3.0)
                hs_scale = max(hs_scale, abs(t_hsnorm(q * lam, f, 1.0) - lam * hs) / max(hs, 1e-300))
                r2 = t_hsnorm(_embed(q, g2), _embed(f, g2), 1.0) / (qn * fn_)
                hs_n = max(hs_n, abs(r2 - hs / (qn * fn_)) / max(hs / (qn * fn_), 1e-300))
                sp = sst_spectrum(q, 2.0)
                ref = np.sort(sp["SS*"].real)
                for key in ("T", "T*", "S*S"):
                    sst_gap = max(sst_gap, float(np.abs(np.sort(sp[key].real) - ref).max()),
                                  float(np.abs(sp[key].imag).max()))
        k = g.kind
        rep.check_le(f"||S||^2 - M/2pi ({k})", worst["s_bound"], INEQ_SLACK)
        rep.check_le(f"S*S form upper bound ({k})", worst["s_form"], INEQ_SLACK)
        rep.check_le(f"1 - S*S lower bound ({k})", worst["form_lower"], INEQ_SLACK)
        if k == "torus":
            rep.check_le(f"inverse derivative form ({k})", worst["op_form"], INEQ_SLACK)
        rep.check_le(f"HS bilinear scaling ({k})", hs_scale, 1e-10)
        rep.check_le(f"HS ratio stable under N -> 2N ({k})", hs_n, 0.5)
        rep.check_le(f"SST spectra agree ({k})", sst_gap, 1e-6)
        rep.info[f"max_slack_{k}"] = {a: float(b) for a, b in worst.items() if np.isfinite(b)}
        rep.info[f"hs_ratio_{k}"] = hs_ratio
    ns = (64, 128, 256)
    sq = s_norm_constant(ns)
    rep.info["S(1)_norm2"] = sq
    rep.check_ge("||S(1)||^2 at N=256 (lower)", sq[256], 0.98)
    rep.check_le("||S(1)||^2 at N=256 (upper)", sq[256], 1.0 + 1e-12)
    vals = [sq[n] for n in ns]
    rep.check_le("||S(1)||^2 nondecreasing in N", -min(np.diff(vals), default=0.0), 1e-12)
    z = HardyState(Geometry.torus(n_modes), np.zeros(n_modes, dtype=complex))
    rep.check_le("||S(0)|| = 0", s_opnorm(z, 1.0), 0.0)
    rep.info["trials"] = trials
    rep.elapsed = time.perf_counter() - t0
    return rep


# ------------------------------------------------------------ gradients

GRADIENT_FUNCTIONALS = ("mass", "momentum", "hamiltonian", "en:1", "en:2", "en:3",
                        "beta:2", "beta:3", "beta:5", "hk:4", "hk:8")


def beta_identity_residual(q: HardyState, kappa: float) -> float:
    """Relative size of ``Omega(q) grad beta - 2 d beta / d conj(q)``."""
    lax = build_lax(q)
    lhs = omega_op(q).apply(grad(Functional("beta", kappa), q, lax).coeffs)
    rhs = 2.0 * beta_wirtinger(q, kappa, lax).coeffs
    den = max(float(np.linalg.norm(rhs)), 1e-300)
    return float(np.linalg.norm(lhs - rhs) / den) if np.any(rhs) else float(np.linalg.norm(lhs))


def gradient_suite(trials: int = 3, seed: int = 7, n_modes: int = 64,
                   functionals=GRADIENT_FUNCTIONALS, identity_trials: int = 20) -> SuiteReport:
    """Closed-form symplectic gradients against the finite-difference oracle.

    The discrepancy is ``||grad - oracle|| / max(1, ||oracle||)``; limits are
    ``1e-5`` on the torus and the line.  The identity
    ``Omega(q) grad beta_3 = 2 d beta_3 / d conj(q)`` is checked on
    ``identity_trials`` further states with the identity tolerances.
    """
    t0 = time.perf_counter()
    rep = SuiteReport("gradients")
    for gi, g in enumerate(_geometries(n_modes)):
        rng = _rng(seed, 3, gi)
        worst: dict[str, float] = {}
        for i in range(trials):
            q = random_state(g, rng, rng.uniform(0.2, 1.5), ("focusing", "defocusing")[i % 2])
            try:
                J = j_map(q)
            except DegeneracyError as exc:
                rep.error = str(exc)
                continue
            lax = build_lax(q)
            for name in functionals:
                fn = Functional.parse(name)
                a = grad(fn, q, lax)
                o = grad_oracle(fn, q, J=J)
                d = l2_distance(a, o) / max(1.0, norm(o))
                worst[name] = max(worst.get(name, 0.0), d)
        for name, d in worst.items():
            rep.check_le(f"grad {name} vs oracle ({g.kind})", d, 1e-5)
        ident = 0.0
        for _ in range(identity_trials):
            q = random_state(g, rng, rng.uniform(0.2, 1.5))
            ident = max(ident, beta_identity_residual(q, 3.0))
        rep.check_le(f"Omega grad beta_3 = 2 dbeta ({g.kind})", ident, IDENTITY_TOL[g.kind])
        z = HardyState(g, np.zeros(g.n_modes, dtype=complex))
        rep.check_le(f"zero state gradients vanish ({g.kind})",
                     max(norm(grad(f, z)) for f in ("beta:3", "hamiltonian", "en:2")), 0.0)
    rep.info["trials"] = trials
    rep.elapsed = time.perf_counter() - t0
    return rep


# ------------------------------------------------------------ commutation

BETA_GRID = (1.0, 2.0, 3.0, 5.0, 8.0)
ENERGY_GRID = (0, 1, 2, 3)


def commutation_suite(trials: int = 10, seed: int = 7, n_modes: int = 64,
                      max_mass: float = 1.0) -> SuiteReport:
    """Poisson brackets among ``beta_kappa`` and ``E_n`` on random states.

    Both geometries and both signs; the brackets use exact discrete
    Wirtinger derivatives and the inverse of ``Omega``.
    """
    t0 = time.perf_counter()
    rep = SuiteReport("commute")
    bb = be = ee = 0.0
    betas = [Functional("beta", k) for k in BETA_GRID]
    ens = [Functional("en", n) for n in ENERGY_GRID]
    for gi, g in enumerate(_geometries(n_modes)):
        for si, sign in enumerate(("focusing", "defocusing")):
            rng = _rng(seed, 4, gi, si)
            for _ in range(trials):
                q = random_state(g, rng, rng.uniform(0.1, max_mass), sign)
                J, lax = j_map(q), build_lax(q)

                def br(a, b):
                    return abs(poisson_bracket(a, b, q, "wirtinger", J, lax))

                for i, a in enumerate(betas):
                    for b in betas[i + 1:]:
                        bb = max(bb, br(a, b))
                    for b in ens:
                        be = max(be, br(a, b))
                for i, a in enumerate(ens):
                    for b in ens[i + 1:]:
                        ee = max(ee, br(a, b))
    rep.check_le("max |{beta_k, beta_l}|", bb, 1e-8)
    rep.check_le("max |{beta_k, E_n}|", be, 1e-7)
    rep.check_le("max |{E_m, E_n}|", ee, 1e-7)
    pw = plane_wave(0.7, 2, n_modes, "defocusing")
    rep.check_le("{M, P} at a plane wave", abs(poisson_bracket("mass", "momentum", pw)), 1e-12)
    q = random_state(Geometry.torus(n_modes), _rng(seed, 4, 9), 0.5)
    rep.check_le("{beta_2, beta_2}", abs(poisson_bracket("beta:2", "beta:2", q)), 1e-13)
    rep.info.update(trials=trials, beta_grid=list(BETA_GRID), energy_grid=list(ENERGY_GRID),
                    max_beta_beta=bb, max_beta_energy=be, max_energy_energy=ee)
    rep.elapsed = time.perf_counter() - t0
    return rep


# ------------------------------------------------------------ degeneracy

def line_witness_state(n_modes: int = 256, half_length: float = 40.0) -> HardyState:
    """``sqrt(2) / (x + i)`` periodized into the line window."""
    return line_soliton(1, n_modes, half_length) * (-1j)


def degeneracy_suite(trials: int = 100, seed: int = 7, n_modes: int = 64,
                     focusing_mass: float = 1.9 * math.pi,
                     defocusing_mass: float = 8 * math.pi) -> SuiteReport:
    """Smallest singular value of ``Omega`` at the threshold and away from it.

    ``q = 1`` on the torus and the line soliton ``sqrt(2)/(x+i)`` (window
    ``N = 256``, ``L = 40``) have mass ``2 pi`` and a numerically singular
    form; random focusing states below ``1.9 pi`` and defocusing states up
    to ``8 pi`` stay bounded away from zero.
    """
    t0 = time.perf_counter()
    rep = SuiteReport("degeneracy")
    one = constant_state(1.0, Geometry.torus(n_modes))
    d1 = degeneracy_witness(one)
    rep.check_le("sigma_min(Omega) at q = 1 (torus)", d1.sigma_min, 1e-6)
    rep.check_le("witness residual at q = 1 (torus)",
                 d1.witness_residual if d1.witness_residual is not None else np.inf, 1e-8)
    lw = line_witness_state()
    d2 = degeneracy_witness(lw, G=lw)
    rep.check_le("sigma_min(Omega) at sqrt(2)/(x+i) (line)", d2.sigma_min, 1e-3)
    rep.check_le("witness residual G = q (line)", d2.witness_residual, 1e-3)
    g = Geometry.torus(n_modes)
    low = {}
    for sign, top in (("focusing", focusing_mass), ("defocusing", defocusing_mass)):
        rng = _rng(seed, 5, sign == "focusing")
        smin = np.inf
        for _ in range(trials):
            q = random_state(g, rng, rng.uniform(0.05, 1.0) * top, sign)
            smin = min(smin, float(omega_op(q).singular_values()[-1]))
        low[sign] = smin
        rep.check_ge(f"min sigma_min over {sign} samples", smin, 0.05)
    rep.info.update(trials=trials, sigma_one=d1.sigma_min, sigma_line=d2.sigma_min,
                    line_witness_residual=d2.witness_residual, min_sigma=low)
    rep.elapsed = time.perf_counter() - t0
    return rep


# ------------------------------------------------------------ Lipschitz

def _h1_norm(v: np.ndarray, g: Geometry) -> float:
    return math.sqrt(g.weight) * float(np.linalg.norm(np.sqrt(1 + g.freqs ** 2) * v))


def lipschitz_ratios(q: HardyState, p: HardyState, kappa: float) -> tuple[float, float]:
    """``||m(q) - m(p)||_{H^1} / ||q - p||`` and the same with the L2 norm."""
    g = q.geometry
    mq = resolve(q, kappa).m.coeffs
    mp = resolve(p, kappa).m.coeffs
    dq = l2_distance(q, p)
    return _h1_norm(mq - mp, g) / dq, math.sqrt(g.weight) * float(np.linalg.norm(mq - mp)) / dq


def lipschitz_probe(pairs: int = 50, seed: int = 7, n_modes: int = 64,
                    kappas=(1.0, 4.0, 16.0), pair_mass: float = 0.5) -> SuiteReport:
    """Empirical Lipschitz constants of ``q -> m(kappa, q)`` on a mass ball.

    Pairs are drawn on the torus and re-evaluated after embedding into
    ``2 N`` modes; the suite asserts finite constants and agreement of the
    two resolutions within 10 %.
    """
    t0 = time.perf_counter()
    rep = SuiteReport("lipschitz")
    g = Geometry.torus(n_modes)
    g2 = _doubled(g)
    rng = _rng(seed, 6)
    sample = []
    for i in range(pairs):
        sign = ("focusing", "defocusing")[i % 2]
        q = random_state(g, rng, rng.uniform(0.05, 1.0) * pair_mass, sign)
        p = random_state(g, rng, rng.uniform(0.05, 1.0) * pair_mass, sign)
        if l2_distance(q, p) > 0:
            sample.append((q, p))
    table = {}
    for kappa in kappas:
        h1 = l2 = h1_2n = 0.0
        for q, p in sample:
            a, b = lipschitz_ratios(q, p, kappa)
            h1, l2 = max(h1, a), max(l2, b)
            h1_2n = max(h1_2n, lipschitz_ratios(_embed(q, g2), _embed(p, g2), kappa)[0])
        table[kappa] = {"H1": h1, "L2": l2, "H1_2N": h1_2n}
        rep.check_le(f"H1 constant finite (kappa={kappa:g})", h1, 1e6)
        rep.check_le(f"H1 constant stable N -> 2N (kappa={kappa:g})", abs(h1_2n - h1) / h1, 0.1)
    rep.info.update(pairs=len(sample), constants=table)
    rep.elapsed = time.perf_counter() - t0
    return rep


# ------------------------------------------------------------ driver

def run_suite(name: str, seed: int = 7, n_modes: int = 64, trials: int | None = None) -> list[SuiteReport]:
    """Run one named suite; ``carleman`` yields one report per geometry."""
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or 'all'")
    t = trials if trials is not None else DEFAULT_TRIALS[name]
    if name == "carleman":
        return [carleman_check(k, t, seed, n_modes) for k in ("torus", "line")]
    runners: dict[str, Callable[..., SuiteReport]] = {
        "bounds": bound_suite,
        "gradients": gradient_suite,
        "commute": commutation_suite,
        "degeneracy": degeneracy_suite,
        "lipschitz": lipschitz_probe,
    }
    if name not in runners:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or 'all'")
    return [runners[name](t, seed, n_modes)]


def run_all(seed: int = 7, n_modes: int = 64, trials: int | None = None,
            suites=SUITES) -> dict:
    """Run every suite, collecting failures and exceptions instead of stopping.

    Returns a JSON-ready report with a top-level ``passed`` flag.
    """
    reports: list[SuiteReport] = []
    for name in suites:
        t0 = time.perf_counter()
        try:
            reports.extend(run_suite(name, seed, n_modes, trials))
        except Exception as exc:  # a crashing suite is a failed suite
            reports.append(SuiteReport(name, error=f"{type(exc).__name__}: {exc}",
                                       elapsed=time.perf_counter() - t0))
    return {
        "seed": seed,
        "n_modes": n_modes,
        "trials": trials,
        "passed": all(r.passed for r in reports),
        "suites": [r.to_dict() for r in reports],
    }
