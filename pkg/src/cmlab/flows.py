"""Hamiltonian flows on the truncated Hardy space.

Every flow is integrated with a Lawson (integrating-factor) RK4 scheme: a
diagonal linear part ``Lambda`` is propagated exactly, mode by mode, and the
remainder ``N(q) = X(q) - Lambda q`` by classical RK4 in the rotated frame.
States keep only the retained nonnegative modes, so every stage is already
Hardy-projected.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
from numpy.typing import NDArray

from .lax import (
    LaxMatrix,
    ThresholdError,
    build_lax,
    energies,
    equicontinuity_functional,
    lax_powers,
    mult_proj_matrix,
    resolve,
)
from .spectral import TWO_PI, Geometry, HardyState, pm
from .symplectic import Functional, evaluate, grad

log = logging.getLogger(__name__)

FIELD_KINDS = ("ccm", "half-e2", "beta", "en", "hk", "mass", "momentum")


# ------------------------------------------------------------ specification

@dataclass(frozen=True)
class FlowSpec:
    """What to integrate and how.

    ``field`` is one of ``ccm``, ``half-e2``, ``beta`` (parameter kappa), ``en``
    (parameter n), ``hk`` (parameter kappa), ``mass`` or ``momentum``.
    ``hk_split`` selects the linear part for the regularized flow.
    ``"full"`` (default) splits off the whole linearization at zero,
    ``-i kappa xi^2 / (xi + kappa)``.  ``"duhamel"`` splits off only
    ``kappa d/dx - i kappa^2``, a rigid translation with a phase, and leaves a
    resolvent term of size ``kappa^2`` in the remainder, which needs
    ``dt << kappa^-2``.
    """

    field: str
    geometry: Geometry
    sign: str = "focusing"
    dt: float = 1e-3
    t_final: float = 1.0
    param: float | None = None
    integrator: str = "lawson-rk4"
    monitor_stride: int = 10
    probe_kappa: float = 3.0
    probe_varkappa: float = 4.0
    lax_monitor: bool = False
    hk_split: str = "full"

    def __post_init__(self) -> None:
        if self.field not in FIELD_KINDS:
            raise ValueError(f"unknown flow {self.field!r}")
        if self.field in ("beta", "en", "hk") and self.param is None:
            raise ValueError(f"flow {self.field!r} needs a parameter")
        if self.field == "half-e2" and self.geometry.kind != "torus":
            raise ValueError("half-e2 is a torus flow")
        if self.field in ("beta", "hk") and self.param < 1:
            raise ValueError("kappa must be at least 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_final < 0:
            raise ValueError("t_final must be nonnegative")
        steps = self.t_final / self.dt
        if abs(steps - round(steps)) > 1e-6 * max(1.0, steps):
            raise ValueError("t_final must be an integer multiple of dt")
        if self.integrator != "lawson-rk4":
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.monitor_stride < 1:
            raise ValueError("monitor_stride must be positive")
        if self.hk_split not in ("duhamel", "full"):
            raise ValueError(f"unknown hk_split {self.hk_split!r}")

    @property
    def steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def label(self) -> str:
        if self.param is None:
            return self.field
        p = self.param
        return f"{self.field}:{int(p) if float(p).is_integer() else p}"

    @classmethod
    def parse(cls, text: str, geometry: Geometry, **kw) -> "FlowSpec":
        name, _, arg = text.strip().lower().partition(":")
        param = None
        if arg:
            param = int(arg) if name == "en" else float(arg)
        return cls(name, geometry, param=param, **kw)

    def hamiltonian(self) -> Functional:
        """The functional generating this flow."""
        f = self.field
        if f == "ccm":
            return Functional("hamiltonian")
        if f == "half-e2":
            return Functional("en", 2)
        if f == "en":
            return Functional("en", int(self.param))
        if f in ("beta", "hk"):
            return Functional(f, float(self.param))
        return Functional(f)

    @property
    def generator_scale(self) -> float:
        """The flow is generated by ``generator_scale * hamiltonian()``."""
        return 0.5 if self.field == "half-e2" else 1.0

    def to_dict(self) -> dict:
        return {
            "field": self.field, "param": self.param, "sign": self.sign,
            "geometry": self.geometry.to_dict(), "dt": self.dt, "t_final": self.t_final,
            "integrator": self.integrator, "monitor_stride": self.monitor_stride,
            "probe_kappa": self.probe_kappa, "probe_varkappa": self.probe_varkappa,
            "lax_monitor": self.lax_monitor, "hk_split": self.hk_split,
        }


MONITOR_NAMES = ("mass", "momentum", "hamiltonian", "beta", "e1", "e2", "e3",
                 "equi", "tail", "lax_residual", "peter_residual")


@dataclass
class TrajectoryRecord:
    spec: FlowSpec
    times: NDArray[np.float64]
    states: list[HardyState]
    monitors: dict[str, NDArray[np.float64]]
    blowup: dict | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def final(self) -> HardyState:
        return self.states[-1]

    def drift(self, name: str) -> float:
        """``max_t |X(t) - X(0)| / max(|X(0)|, 1e-300)``."""
        v = self.monitors[name]
        return float(np.max(np.abs(v - v[0])) / max(abs(v[0]), 1e-300))


# ------------------------------------------------------------ fast products

class _Products:
    """FFT convolution on coefficient arrays of one geometry."""

    def __init__(self, geometry: Geometry):
        n = geometry.n_modes
        self.n = n
        self.size = 1 << max(2, (2 * n - 1).bit_length())
        self.dxi = geometry.dxi
        self.w0 = geometry.zero_weight
        self.xi = geometry.freqs

    def grid(self, c: NDArray) -> NDArray[np.complex128]:
        return np.fft.ifft(c, self.size) * self.size

    def coeffs(self, s: NDArray) -> NDArray[np.complex128]:
        return np.fft.fft(s) * (self.dxi / self.size)

    def cp_abs2(self, s: NDArray) -> NDArray[np.complex128]:
        """``C+(|u|^2)`` on modes ``0..N-1`` from samples of ``u``."""
        c = self.coeffs(np.abs(s) ** 2)[: self.n].copy()
        c[0] *= self.w0
        return c

    def project_product(self, s: NDArray, c: NDArray) -> NDArray[np.complex128]:
        return self.coeffs(s * self.grid(c))[: self.n]

    def mcq(self, a: NDArray, b: NDArray, c: NDArray) -> NDArray[np.complex128]:
        """``P[a C+(conj(b) c)]``."""
        inner = self.coeffs(np.conj(self.grid(b)) * self.grid(c))[: self.n].copy()
        inner[0] *= self.w0
        return self.project_product(self.grid(a), inner)


# ------------------------------------------------------------ vector fields

def _mass(q: NDArray, geometry: Geometry) -> float:
    return float(geometry.weight * np.vdot(q, q).real)


def ccm_field(q: HardyState, prod: _Products | None = None) -> HardyState:
    """``i q'' +- 2 q C+(|q|^2)'`` with the extra ``-+ E_0 q' / pi`` on the torus."""
    g = q.geometry
    prod = prod or _Products(g)
    s = pm(q.sign)
    c = q.coeffs
    xi = g.freqs
    su = prod.grid(c)
    dcp = 1j * xi * prod.cp_abs2(su)
    out = -1j * xi * xi * c + 2 * s * prod.project_product(su, dcp)
    if g.kind == "torus":
        out = out - s / math.pi * _mass(c, g) * 1j * xi * c
    return q.with_coeffs(out)


def half_e2_field(q: HardyState, prod: _Products | None = None) -> HardyState:
    """Flow of ``E_2 / 2`` on the torus, written through mass and momentum."""
    g = q.geometry
    prod = prod or _Products(g)
    s = pm(q.sign)
    c = q.coeffs
    xi = g.freqs
    su = prod.grid(c)
    cp = prod.cp_abs2(su)
    m0 = _mass(c, g)
    e1 = float(g.weight * (np.sum(xi * np.abs(c) ** 2)
                           - s * np.vdot(c, prod.project_product(su, cp)).real))
    p = -0.5 * e1 - s * m0 * m0 / (4 * math.pi)
    out = (-1j * xi * xi * c + 2 * s * prod.project_product(su, 1j * xi * cp)
           + s / TWO_PI * m0 * 1j * xi * c - s * 3j / math.pi * p * c
           - 3j / (4 * math.pi ** 2) * m0 * m0 * c)
    return q.with_coeffs(out)


def _resolvent_data(q: HardyState, kappa: float, lax: LaxMatrix):
    fac = lax.shifted_factor(kappa)
    m = sla.cho_solve(fac, q.coeffs.astype(complex))
    nv = sla.cho_solve(fac, m)
    w = q.geometry.weight
    beta = float((w * np.vdot(q.coeffs, m)).real)
    mm = float((w * np.vdot(m, m)).real)
    mn = float((w * np.vdot(m, nv)).real)
    lm = lax.matrix @ m
    lm2 = float((w * np.vdot(lm, lm)).real)
    return fac, m, nv, beta, mm, mn, lm2


def hk_field(q: HardyState, kappa: float, lax: LaxMatrix | None = None,
             prod: _Products | None = None) -> HardyState:
    """Regularized Hamiltonian field written out term by term."""
    g = q.geometry
    lax = lax or build_lax(q)
    prod = prod or _Products(g)
    s = pm(q.sign)
    k = kappa
    c = q.coeffs.astype(complex)
    xi = g.freqs
    qx = 1j * xi * c
    _, m, nv, beta, mm, mn, lm2 = _resolvent_data(q, k, lax)

    def mcq(a: NDArray, b: NDArray) -> NDArray:
        # a C+(q conj(b))
        return prod.mcq(a, b, c)

    m_cqm = mcq(m, m)
    if g.kind == "line":
        gb = -2j * m + 2j * s * m_cqm
        return q.with_coeffs(0.5 * (k ** 3 * gb + 2j * k * k * c - 2 * k * qx))
    e0 = _mass(c, g)
    pi = math.pi
    out = (k ** 3 - s * 3 / (2 * pi) * k * k * e0) * (
        -1j * m + s * 1j * m_cqm - s * 1j / (2 * pi) * m * beta - s * 1j / (2 * pi) * c * mm)
    out = out + (1j * k * k * c - k * qx - s * 2j / pi * k * c * e0
                 + s * 3j / (2 * pi) * k * k * beta * c - 3j / (2 * pi ** 2) * e0 * e0 * c
                 + s * 1j / (2 * pi) * k * c * lm2)
    brace = (-1j * c + 2j * k * m - s * 2j * k * m_cqm + s * 1j / pi * k * m * beta
             + s * 1j / pi * k * c * mm - 1j * k * k * nv
             + s * 1j * k * k * mcq(nv, m) + s * 1j * k * k * mcq(m, nv)
             - s * 1j / (2 * pi) * k * k * beta * nv - s * 1j / (2 * pi) * k * k * m * mm
             - s * 1j / pi * k * k * c * mn)
    out = out - s / (2 * pi) * k * e0 * brace
    return q.with_coeffs(out)


def peter_operator(spec: FlowSpec, q: HardyState,
                   lax: LaxMatrix | None = None) -> NDArray[np.complex128]:
    """Dense matrix of the Peter operator ``P`` with ``dL/dt = [P, L]``, ``dq/dt = P q``."""
    g = q.geometry
    lax = lax or build_lax(q)
    n = q.n_modes
    s = pm(q.sign)
    torus = g.kind == "torus"
    eye = np.eye(n, dtype=complex)
    xi = g.freqs

    def p_n(order: int) -> NDArray:
        if order == 0:
            return -2j * eye
        pw = lax_powers(q, order, lax)
        lpow = [eye]
        for _ in range(order):
            lpow.append(lax.matrix @ lpow[-1])
        e = energies(q, order - 1, lax)
        out = -2j * lpow[order]
        for j in range(order):
            l = order - 1 - j
            term = mult_proj_matrix(q.with_coeffs(pw[j]), q.with_coeffs(pw[l]))
            if torus:
                term = term - e[l] / TWO_PI * lpow[j]
            out = out - 2j * s * term
        if torus:
            out = out + s * 1j / math.pi * order * e[order - 1] * eye
        return out

    def p_beta(kappa: float, fac, m, beta, mm) -> NDArray:
        r = sla.cho_solve(fac, eye)
        ms = q.with_coeffs(m)
        out = -2j * r + 2j * s * mult_proj_matrix(ms, ms)
        if torus:
            out = out - s * 1j / math.pi * (beta * r + mm * eye)
        return out

    f = spec.field
    if f == "mass":
        return p_n(0)
    if f == "en":
        return p_n(int(spec.param))
    e = energies(q, 1, lax)
    if f == "momentum":
        out = -0.5 * p_n(1)
        return out - s * e[0] / TWO_PI * p_n(0) if torus else out
    if f == "half-e2":
        return 0.5 * p_n(2)
    if f == "ccm":
        out = 0.5 * p_n(2)
        if torus:
            out = out + s * 3 / (4 * math.pi) * e[0] * p_n(1) \
                + (s * 3 / (4 * math.pi) * e[1] + 3 / (4 * math.pi ** 2) * e[0] ** 2) * p_n(0)
        return out
    k = float(spec.param)
    fac, m, nv, beta, mm, mn, lm2 = _resolvent_data(q, k, lax)
    if f == "beta":
        return p_beta(k, fac, m, beta, mm)
    # hk
    dx = np.diag(1j * xi)
    if not torus:
        return 0.5 * k ** 3 * p_beta(k, fac, m, beta, mm) + 1j * k * k * eye - k * dx
    pi = math.pi
    e0 = e[0]
    r = sla.cho_solve(fac, eye)
    r2 = r @ r
    ms, ns = q.with_coeffs(m), q.with_coeffs(nv)
    mcm = mult_proj_matrix(ms, ms)
    out = (k ** 3 - s * 3 / (2 * pi) * k * k * e0) * (
        -1j * r + s * 1j * mcm - s * 1j / (2 * pi) * beta * r - s * 1j / (2 * pi) * mm * eye)
    out = out + 1j * k * k * eye - k * dx + (
        -s * 2j / pi * k * e0 + s * 3j / (2 * pi) * k * k * beta - 3j / (2 * pi ** 2) * e0 * e0
        + s * 1j / (2 * pi) * k * lm2 + s * 1j / (2 * pi) * k * e0) * eye
    brace = (2j * r - s * 2j * mcm + s * 1j / pi * beta * r + s * 1j / pi * mm * eye
             - 1j * k * r2 + s * 1j * k * mult_proj_matrix(ns, ms)
             + s * 1j * k * mult_proj_matrix(ms, ns)
             - s * 1j / (2 * pi) * k * beta * r2 - s * 1j / (2 * pi) * k * mm * r
             - s * 1j / pi * k * mn * eye)
    return out - s / (2 * pi) * k * k * e0 * brace


def vector_field(spec: FlowSpec, q: HardyState, lax: LaxMatrix | None = None) -> HardyState:
    """``dq/dt`` for the flow, computed independently of the gradient assembly.

    CCM and the half-E_2 flow use the direct product formulas, the hierarchy flows apply
    their Peter operator to ``q``, the regularized flow uses its term-by-term
    display, and mass and momentum use the closed-form gradients.
    """
    f = spec.field
    if f == "ccm":
        return ccm_field(q)
    if f == "half-e2":
        return half_e2_field(q)
    if f == "hk":
        return hk_field(q, float(spec.param), lax)
    if f in ("beta", "en"):
        return q.with_coeffs(peter_operator(spec, q, lax) @ q.coeffs)
    return grad(spec.hamiltonian(), q, lax)


def linear_symbol(spec: FlowSpec) -> NDArray[np.complex128]:
    """Diagonal linear part propagated exactly by the integrator."""
    xi = spec.geometry.freqs
    f = spec.field
    if f in ("ccm", "half-e2"):
        return -1j * xi * xi
    if f == "beta":
        return -2j / (xi + spec.param)
    if f == "en":
        return -2j * xi ** int(spec.param) if int(spec.param) > 0 else np.full(xi.size, -2j)
    if f == "hk":
        k = float(spec.param)
        if spec.hk_split == "duhamel":
            return 1j * (k * k - k * xi)
        return -1j * k * xi * xi / (xi + k)
    if f == "mass":
        return np.full(xi.size, -2j)
    return 1j * xi  # momentum: translation


# ------------------------------------------------------------ integrator

class _Stepper:
    def __init__(self, spec: FlowSpec, sign: str):
        self.spec = spec
        self.sign = sign
        self.geometry = spec.geometry
        self.lam = linear_symbol(spec)
        self.prod = _Products(spec.geometry)
        self._cache: dict[float, tuple[NDArray, NDArray]] = {}

    def state(self, c: NDArray) -> HardyState:
        return HardyState(self.geometry, c, self.sign)

    def field(self, c: NDArray) -> NDArray[np.complex128]:
        q = self.state(c)
        f = self.spec.field
        if f == "ccm":
            return ccm_field(q, self.prod).coeffs
        if f == "half-e2":
            return half_e2_field(q, self.prod).coeffs
        if f == "hk":
            return hk_field(q, float(self.spec.param), prod=self.prod).coeffs
        if f == "beta":
            return self._beta_field(q)
        return vector_field(self.spec, q).coeffs

    def _beta_field(self, q: HardyState) -> NDArray[np.complex128]:
        # the Peter operator applied to q without forming the resolvent
        k = float(self.spec.param)
        lax = build_lax(q)
        fac = lax.shifted_factor(k)
        c = q.coeffs
        m = sla.cho_solve(fac, c)
        s = pm(q.sign)
        out = -2j * m + 2j * s * self.prod.mcq(m, m, c)
        if self.geometry.kind == "torus":
            w = self.geometry.weight
            beta = float((w * np.vdot(c, m)).real)
            mm = float((w * np.vdot(m, m)).real)
            out = out - s * 1j / math.pi * (beta * m + mm * c)
        return out

    def nonlinear(self, c: NDArray) -> NDArray[np.complex128]:
        return self.field(c) - self.lam * c

    def propagators(self, dt: float) -> tuple[NDArray, NDArray]:
        if dt not in self._cache:
            self._cache[dt] = (np.exp(self.lam * dt / 2), np.exp(self.lam * dt))
        return self._cache[dt]

    def step(self, c: NDArray, dt: float) -> NDArray[np.complex128]:
        e, e2 = self.propagators(dt)
        k1 = self.nonlinear(c)
        k2 = self.nonlinear(e * (c + 0.5 * dt * k1))
        ec = e * c
        k3 = self.nonlinear(ec + 0.5 * dt * k2)
        k4 = self.nonlinear(e2 * c + dt * e * k3)
        return e2 * c + dt / 6 * (e2 * k1 + 2 * e * (k2 + k3) + k4)


def step(spec: FlowSpec, q: HardyState, dt: float | None = None) -> HardyState:
    """One Lawson RK4 step (``dt`` may be negative)."""
    st = _Stepper(spec, q.sign)
    return q.with_coeffs(st.step(q.coeffs.astype(complex), spec.dt if dt is None else dt))


def _hs_block(a: NDArray, n: int) -> float:
    return float(np.linalg.norm(a[:n, :n], "fro"))


def probe_dt(spec: FlowSpec, n_modes: int | None = None) -> float:
    """Differencing step for the Lax residual.

    The centered difference errs by about ``dt^2 |Lambda|^3`` on the
    interior block, so the step is capped at ``1e-2 / max |Lambda|`` there.
    """
    n = (n_modes or spec.geometry.n_modes) // 2
    stiff = float(np.abs(linear_symbol(spec)[:n]).max()) if n else 0.0
    return min(spec.dt, 1e-2 / stiff) if stiff > 0 else spec.dt


def lax_residual_at(spec: FlowSpec, q: HardyState, dt: float | None = None,
                    stepper: _Stepper | None = None) -> tuple[float, float]:
    """``(||dL/dt - [P, L]||_HS, ||dq/dt - P q||)`` at one state.

    In the second entry ``dq/dt`` is the closed-form symplectic gradient,
    which shares no code with the Peter operator.

    ``dL/dt`` is the centered difference of ``L`` over one step either side,
    with the step from :func:`probe_dt` unless ``dt`` is given.
    The Hilbert-Schmidt norm is taken on the block of modes below ``N/2``,
    away from the truncation edge where the compression of ``[P, L]`` and
    the derivative of the compressed ``L`` differ.
    """
    dt = probe_dt(spec) if dt is None else dt
    st = stepper or _Stepper(spec, q.sign)
    c = q.coeffs.astype(complex)
    qp = q.with_coeffs(st.step(c, dt))
    qm = q.with_coeffs(st.step(c, -dt))
    lax = build_lax(q)
    dl = (build_lax(qp).matrix - build_lax(qm).matrix) / (2 * dt)
    p = peter_operator(spec, q, lax)
    comm = p @ lax.matrix - lax.matrix @ p
    res = _hs_block(dl - comm, q.n_modes // 2)
    qdot = spec.generator_scale * grad(spec.hamiltonian(), q, lax).coeffs
    pres = math.sqrt(q.geometry.weight) * float(np.linalg.norm(qdot - p @ c))
    return res, pres


def _monitor_values(spec: FlowSpec, q: HardyState, st: _Stepper) -> dict[str, float]:
    out = dict.fromkeys(MONITOR_NAMES, float("nan"))
    lax = build_lax(q)
    e = energies(q, 3, lax)
    out["mass"] = float(e[0])
    out["e1"], out["e2"], out["e3"] = float(e[1]), float(e[2]), float(e[3])
    out["momentum"] = evaluate("momentum", q, lax)
    out["hamiltonian"] = evaluate("hamiltonian", q, lax)
    try:
        out["beta"] = resolve(q, spec.probe_kappa, lax).beta
    except ThresholdError:
        pass
    out["equi"] = equicontinuity_functional(q, spec.probe_varkappa, lax)
    out["tail"] = tail_mass(q)
    if spec.lax_monitor:
        out["lax_residual"], out["peter_residual"] = lax_residual_at(spec, q, stepper=st)
    return out


def tail_mass(q: HardyState) -> float:
    """Mass carried by modes above ``N/2``."""
    n = q.n_modes
    return float(q.geometry.weight * np.sum(np.abs(q.coeffs[n // 2 + 1:]) ** 2))


def evolve(spec: FlowSpec, q0: HardyState,
           callback: Callable[[float, HardyState], None] | None = None) -> TrajectoryRecord:
    """Integrate ``dq/dt = X(q)`` from ``q0`` up to ``spec.t_final``.

    Monitors and thinned states are stored every ``monitor_stride`` steps and
    at the final time.  A non-finite state stops the run and is reported in
    ``blowup`` together with the last finite state.
    """
    if q0.geometry != spec.geometry:
        raise ValueError("state and flow geometries differ")
    st = _Stepper(spec, q0.sign)
    warnings: list[str] = []
    m0 = float(q0.geometry.weight * np.vdot(q0.coeffs, q0.coeffs).real)
    if q0.sign == "focusing" and m0 >= TWO_PI * (1 - 1e-12):
        warnings.append(f"initial mass {m0:.10g} is at or above the focusing threshold 2*pi")
    c = q0.coeffs.astype(complex)
    times = [0.0]
    states = [q0]
    mons = [_monitor_values(spec, q0, st)]
    blowup = None
    nsteps = spec.steps
    for i in range(1, nsteps + 1):
        new = st.step(c, spec.dt)
        if not np.all(np.isfinite(new)):
            blowup = {"time": (i - 1) * spec.dt, "step": i,
                      "last_finite": states[-1] if times[-1] == (i - 1) * spec.dt
                      else q0.with_coeffs(c)}
            log.warning("non-finite state at step %d; stopping", i)
            if times[-1] != (i - 1) * spec.dt:
                times.append((i - 1) * spec.dt)
                states.append(q0.with_coeffs(c))
                mons.append(_monitor_values(spec, states[-1], st))
            break
        c = new
        if i % spec.monitor_stride == 0 or i == nsteps:
            q = q0.with_coeffs(c)
            times.append(i * spec.dt)
            states.append(q)
            mons.append(_monitor_values(spec, q, st))
            if callback:
                callback(i * spec.dt, q)
    monitors = {k: np.array([m[k] for m in mons]) for k in MONITOR_NAMES}
    tails = monitors["tail"]
    if tails[0] > 0 and np.nanmax(tails) > 10 * tails[0]:
        warnings.append("tail mass grew beyond 10x its initial value (frequency cascade)")
    return TrajectoryRecord(spec, np.array(times), states, monitors, blowup, warnings)


def lax_residual(spec: FlowSpec, trajectory: TrajectoryRecord) -> NDArray[np.float64]:
    """Lax-pair residual at every stored state of a trajectory."""
    st = _Stepper(spec, trajectory.states[0].sign)
    return np.array([lax_residual_at(spec, q, stepper=st)[0] for q in trajectory.states])


# ------------------------------------------------------------ diagnostics

@dataclass
class EquicontinuityTrace:
    times: NDArray[np.float64]
    functional: NDArray[np.float64]
    tail: NDArray[np.float64]
    cascade: bool


def equicontinuity_monitor(trajectory: TrajectoryRecord,
                           varkappa: float) -> EquicontinuityTrace:
    vals = []
    tails = []
    for q in trajectory.states:
        vals.append(equicontinuity_functional(q, varkappa))
        tails.append(tail_mass(q))
    tails_a = np.array(tails)
    cascade = bool(tails_a[0] > 0 and tails_a.max() > 10 * tails_a[0])
    if cascade:
        log.warning("tail mass grew beyond 10x its initial value")
    return EquicontinuityTrace(trajectory.times, np.array(vals), tails_a, cascade)


def negative_norm(q: HardyState, order: float = 5.0) -> float:
    """``(1 + xi)^(-order)`` weighted L2 norm."""
    xi = q.geometry.freqs
    return math.sqrt(q.geometry.weight) * float(np.linalg.norm((1 + xi) ** (-order) * q.coeffs))


@dataclass
class ConvergenceRow:
    kappa: float
    sup_distance: float
    field_distance: float


def hk_convergence(q0: HardyState, kappas: list[float], t_final: float, dt: float = 1e-4,
                   monitor_stride: int = 50, hk_split: str = "full") -> list[ConvergenceRow]:
    """Distance between regularized and CCM trajectories as ``kappa`` grows.

    ``sup_distance`` is the largest L2 distance over the stored times;
    ``field_distance`` is the ``(1+xi)^-5`` weighted norm of the difference of
    the two vector fields at ``q0``.
    """
    g = q0.geometry
    base = dict(geometry=g, sign=q0.sign, dt=dt, t_final=t_final, monitor_stride=monitor_stride)
    ref = evolve(FlowSpec("ccm", **base), q0)
    f_ref = ccm_field(q0)
    rows = []
    w = math.sqrt(g.weight)
    for k in kappas:
        spec = FlowSpec("hk", param=float(k), hk_split=hk_split, **base)
        tr = evolve(spec, q0)
        d = max(w * float(np.linalg.norm(a.coeffs - b.coeffs))
                for a, b in zip(tr.states, ref.states))
        fd = negative_norm(hk_field(q0, float(k)) - f_ref)
        rows.append(ConvergenceRow(float(k), d, fd))
    return rows
