"""Real-linear symplectic machinery on the truncated Hardy space.

``Theta(q) g = i q D^{-1} Re(conj(q) g)`` and ``Omega(q) = i (1 -+ 2 C+ Theta(q))``
are real-linear (they involve ``conj(g)``), so they are stored as a pair of
complex matrices ``(A, B)`` acting by ``g -> A g + B conj(g)`` and converted to
a ``2N x 2N`` real matrix on stacked real and imaginary parts for inversion
and singular values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla
from numpy.typing import NDArray

from .lax import (
    LaxMatrix,
    LaxProducts,
    ResolventVector,
    build_lax,
    energies,
    lax_powers,
    resolve,
)
from .spectral import (
    TWO_PI,
    FullState,
    Geometry,
    HardyState,
    antiderivative,
    as_full,
    cauchy_szego,
    combine,
    inner,
    multiply,
    pm,
    sawtooth_coeffs,
)


class DegeneracyError(ArithmeticError):
    """``Omega(q)`` is numerically singular."""

    def __init__(self, message: str, sigma_min: float):
        super().__init__(message)
        self.sigma_min = sigma_min


# ------------------------------------------------------------ operators

@dataclass(frozen=True, eq=False)
class RealLinearOperator:
    """``g -> A g + B conj(g)``."""

    A: NDArray[np.complex128]
    B: NDArray[np.complex128]

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def apply(self, g: NDArray) -> NDArray[np.complex128]:
        g = np.asarray(g, dtype=complex)
        return self.A @ g + self.B @ np.conj(g)

    def __call__(self, g: NDArray) -> NDArray[np.complex128]:
        return self.apply(g)

    def to_real(self) -> NDArray[np.float64]:
        p, m = self.A + self.B, self.A - self.B
        return np.block([[p.real, -m.imag], [p.imag, m.real]])

    @classmethod
    def from_real(cls, r: NDArray) -> "RealLinearOperator":
        n0, n1 = r.shape[0] // 2, r.shape[1] // 2
        r11, r12, r21, r22 = r[:n0, :n1], r[:n0, n1:], r[n0:, :n1], r[n0:, n1:]
        a = 0.5 * ((r11 + r22) + 1j * (r21 - r12))
        b = 0.5 * ((r11 - r22) + 1j * (r21 + r12))
        return cls(a, b)

    @classmethod
    def identity(cls, n: int) -> "RealLinearOperator":
        return cls(np.eye(n, dtype=complex), np.zeros((n, n), dtype=complex))

    def compose(self, other: "RealLinearOperator") -> "RealLinearOperator":
        """``self o other``."""
        return RealLinearOperator(self.A @ other.A + self.B @ np.conj(other.B),
                                  self.A @ other.B + self.B @ np.conj(other.A))

    def __matmul__(self, other: "RealLinearOperator") -> "RealLinearOperator":
        return self.compose(other)

    def __add__(self, other: "RealLinearOperator") -> "RealLinearOperator":
        return RealLinearOperator(self.A + other.A, self.B + other.B)

    def __sub__(self, other: "RealLinearOperator") -> "RealLinearOperator":
        return RealLinearOperator(self.A - other.A, self.B - other.B)

    def scale(self, s: complex) -> "RealLinearOperator":
        """``s * self`` (complex scalar applied after the operator)."""
        return RealLinearOperator(s * self.A, s * self.B)

    def inverse(self) -> "RealLinearOperator":
        return RealLinearOperator.from_real(np.linalg.inv(self.to_real()))

    def singular_values(self) -> NDArray[np.float64]:
        return np.linalg.svd(self.to_real(), compute_uv=False)

    def norm(self) -> float:
        return float(np.linalg.norm(self.to_real(), 2))


def _index_matrix(c: NDArray, rows: NDArray, cols: NDArray,
                  offset: Callable[[NDArray, NDArray], NDArray]) -> NDArray[np.complex128]:
    idx = offset(rows[:, None], cols[None, :])
    ok = (idx >= 0) & (idx < c.size)
    return np.where(ok, c[np.clip(idx, 0, c.size - 1)], 0.0)


def _antiderivative_matrix(g: Geometry, band_in: int, hi_out: int) -> NDArray[np.complex128]:
    """Matrix of the primitive from band ``-band_in..band_in`` to ``-band_in..hi_out``."""
    kin = np.arange(-band_in, band_in + 1)
    kout = np.arange(-band_in, hi_out + 1)
    k = np.zeros((kout.size, kin.size), dtype=complex)
    nz = kin != 0
    diag = np.zeros(kin.size, dtype=complex)
    diag[nz] = 1.0 / (1j * kin[nz] * g.dxi)
    k[np.arange(kin.size), np.arange(kin.size)] = diag
    if g.kind == "line":
        parity = np.where(kin % 2 == 0, 1.0, -1.0)
        zero_out = band_in  # row of output frequency 0
        k[zero_out, :] -= diag * parity
        k[:, band_in] += g.dxi * sawtooth_coeffs(g, kout)
    return k


def theta(q: HardyState, out_modes: int | None = None) -> RealLinearOperator:
    """``Theta(q)`` from the retained modes to modes ``0..out_modes-1``.

    With ``out_modes = N`` (default) this is the Galerkin operator.  Larger
    values keep more of the exact product.
    """
    n = q.n_modes
    no = out_modes or n
    d = q.geometry.dxi
    c = q.coeffs
    b = n - 1
    dband = np.arange(-b, b + 1)
    j = np.arange(n)
    cq = d * _index_matrix(np.conj(c), dband, j, lambda r, s: s - r)   # conj(q) g
    dq = d * _index_matrix(c, dband, j, lambda r, s: r + s)            # q conj(g)
    hi = max(b, no - 1)
    kmat = _antiderivative_matrix(q.geometry, b, hi)
    fband = np.arange(-b, hi + 1)
    qq = d * _index_matrix(c, np.arange(no), fband, lambda r, s: r - s)
    qk = qq @ kmat
    return RealLinearOperator(0.5j * qk @ cq, 0.5j * qk @ dq)


def theta_apply_full(q: HardyState, g: HardyState | FullState,
                     band: int | None = None) -> FullState:
    """``i q D^{-1} Re(conj(q) g)`` as an unprojected function.

    ``g`` may be any band-limited function, so ``Theta(q)^2 = 0`` can be
    checked without an intermediate projection.
    """
    h = multiply(as_full(q).conj(), g).real_part()
    f = antiderivative(h, band)
    return multiply(q, f).scale(1j)


def omega_op(q: HardyState) -> RealLinearOperator:
    """``Omega(q) = i (1 -+ 2 C+ Theta(q))`` on the retained modes."""
    th = theta(q)
    n = q.n_modes
    s = pm(q.sign)
    return RealLinearOperator(1j * (np.eye(n) - 2 * s * th.A), -2j * s * th.B)


def omega_form(q: HardyState, f: HardyState, g: HardyState,
               omega: RealLinearOperator | None = None) -> float:
    om = omega or omega_op(q)
    return float(inner(f, f.with_coeffs(om.apply(g.coeffs))).real)


def j_map(q: HardyState, tol: float = 1e-6) -> RealLinearOperator:
    """``J(q) = Omega(q)^{-1}``; refuses when ``Omega`` is numerically singular."""
    om = omega_op(q)
    r = om.to_real()
    sv = np.linalg.svd(r, compute_uv=False)
    if sv[-1] < tol * sv[0]:
        raise DegeneracyError(
            f"Omega(q) is singular: sigma_min = {sv[-1]:.3e}", float(sv[-1]))
    return RealLinearOperator.from_real(np.linalg.inv(r))


def closedness_defect(q: HardyState, f: HardyState, g: HardyState, h: HardyState) -> float:
    """Cyclic sum ``D_f w(g,h) + D_g w(h,f) + D_h w(f,g)`` from the derivative of Theta.

    ``D_f w_q(g, h) = -+ 2 Re <g, i D_f Theta h>`` with
    ``D_f Theta h = i f D^{-1} Re(conj(q) h) + i q D^{-1} Re(conj(f) h)``.
    """
    s = pm(q.sign)
    n = q.n_modes

    def d_theta(fv: HardyState, hv: HardyState) -> NDArray:
        a = multiply(fv, antiderivative(multiply(as_full(q).conj(), hv).real_part()))
        b = multiply(q, antiderivative(multiply(as_full(fv).conj(), hv).real_part()))
        return 1j * combine(1, a, 1, b).band(0, n - 1)

    def d_omega(fv, gv, hv):
        dth = hv.with_coeffs(d_theta(fv, hv))
        return -s * 2.0 * float(inner(gv, dth * 1j).real)

    return d_omega(f, g, h) + d_omega(g, h, f) + d_omega(h, f, g)


# ------------------------------------------------------------ degeneracy

@dataclass
class DegeneracyReport:
    sigma_min: float
    sigma_max: float
    singular: bool
    kernel: HardyState | None
    witness: HardyState | None
    witness_residual: float | None


def witness_residual(q: HardyState, G: HardyState, band: int | None = None) -> float:
    """Relative size of the positive-frequency part of ``G -+ i conj(q) D^{-1}(q G)``.

    ``G`` is first restricted to strictly positive frequencies, the
    orthogonal complement of the conjugate Hardy space in the discrete
    model (the zero bin belongs to both half-spaces on the line).
    """
    n = q.n_modes
    s = pm(q.sign)
    G = G.with_coeffs(np.concatenate([[0.0], G.coeffs[1:]]))
    qg = multiply(q, G)
    f = antiderivative(qg, band or 4 * n)
    x = combine(1, as_full(G), -s * 1j, multiply(as_full(q).conj(), f))
    k = x.indices
    pos = np.where(k > 0, x.coeffs, 0.0)
    den = math.sqrt(G.geometry.weight) * np.linalg.norm(G.coeffs)
    return float(math.sqrt(G.geometry.weight) * np.linalg.norm(pos) / den)


def degeneracy_witness(q: HardyState, tol: float = 1e-6,
                       G: HardyState | None = None) -> DegeneracyReport:
    """Smallest singular value of ``Omega(q)`` and, if singular, a kernel witness.

    When ``G`` is supplied its witness residual is reported; otherwise ``G``
    is rebuilt from the kernel vector ``g`` as the conjugate of the
    negative-frequency part of ``(1 -+ 2 Theta(q)) g``.
    """
    om = omega_op(q)
    r = om.to_real()
    u, sv, vt = np.linalg.svd(r)
    n = q.n_modes
    singular = bool(sv[-1] < tol * sv[0])
    kernel = None
    wit = G
    if singular or G is not None:
        v = vt[-1]
        kernel = q.with_coeffs(v[:n] + 1j * v[n:])
        if wit is None:
            t = theta_apply_full(q, kernel, 2 * n)
            x = combine(1, kernel.full(), -2 * pm(q.sign), t)
            neg = FullState(q.geometry, np.where(x.indices < 0, x.coeffs, 0.0), x.kmin).conj()
            wit = q.with_coeffs(neg.band(0, n - 1))
    res = witness_residual(q, wit) if wit is not None and np.any(wit.coeffs) else None
    return DegeneracyReport(float(sv[-1]), float(sv[0]), singular, kernel, wit, res)


# ------------------------------------------------------------ functionals

FUNCTIONAL_KINDS = ("mass", "momentum", "hamiltonian", "en", "beta", "hk")


@dataclass(frozen=True)
class Functional:
    kind: str
    param: float | int | None = None

    def __post_init__(self) -> None:
        if self.kind not in FUNCTIONAL_KINDS:
            raise ValueError(f"unknown functional {self.kind!r}")
        if self.kind in ("en", "beta", "hk") and self.param is None:
            raise ValueError(f"functional {self.kind!r} needs a parameter")

    @classmethod
    def parse(cls, text: str) -> "Functional":
        name, _, arg = text.strip().lower().partition(":")
        aliases = {"e": "en", "e_n": "en", "h": "hamiltonian", "m": "mass", "p": "momentum",
                   "kappa": "beta", "hkappa": "hk"}
        name = aliases.get(name, name)
        if name == "en":
            return cls(name, int(arg))
        if name in ("beta", "hk"):
            return cls(name, float(arg))
        if arg:
            raise ValueError(f"functional {name!r} takes no parameter")
        return cls(name)

    def __str__(self) -> str:
        if self.param is None:
            return self.kind
        p = self.param
        return f"{self.kind}:{int(p) if float(p).is_integer() else p}"


def _is_torus(q: HardyState) -> bool:
    return q.geometry.kind == "torus"


def lm_norm2(q: HardyState, kappa: float, lax: LaxMatrix | None = None) -> float:
    """``||L_q m_kappa||^2`` evaluated directly."""
    lax = lax or build_lax(q)
    m = resolve(q, kappa, lax).m
    v = lax.matrix @ m.coeffs
    return float(q.geometry.weight * np.vdot(v, v).real)


def evaluate(fn: Functional | str, q: HardyState, lax: LaxMatrix | None = None) -> float:
    """Value of a functional in the discrete model."""
    fn = Functional.parse(fn) if isinstance(fn, str) else fn
    if lax is None:
        # energies only need products with L_q; resolvents need the matrix
        lax = build_lax(q) if fn.kind in ("beta", "hk") else LaxProducts(q)
    s = pm(q.sign)
    torus = _is_torus(q)
    if fn.kind == "beta":
        return resolve(q, fn.param, lax).beta
    if fn.kind == "en":
        return float(energies(q, int(fn.param), lax)[-1])
    e = energies(q, 2, lax)
    if fn.kind == "mass":
        return float(e[0])
    if fn.kind == "momentum":
        return float(-0.5 * e[1] - (s * e[0] ** 2 / (4 * math.pi) if torus else 0.0))
    if fn.kind == "hamiltonian":
        if not torus:
            return float(0.5 * e[2])
        return float(0.5 * e[2] + s * 3 / (4 * math.pi) * e[0] * e[1] + e[0] ** 3 / (4 * math.pi ** 2))
    # regularized Hamiltonian
    k = float(fn.param)
    b = resolve(q, k, lax).beta
    e1k = -k * k * b + k * e[0]
    e2k = k ** 3 * b - k * k * e[0] + k * e[1]
    if not torus:
        return float(0.5 * e2k)
    return float(0.5 * e2k + s * 3 / (4 * math.pi) * e[0] * e1k + e[0] ** 3 / (4 * math.pi ** 2)
                 - s * k * e[0] * lm_norm2(q, k, lax) / (4 * math.pi))


# ------------------------------------------------------------ gradients

class _Ops:
    """Products and projections on coefficient arrays of one state."""

    def __init__(self, q: HardyState):
        self.q = q
        self.g = q.geometry
        self.n = q.n_modes
        self.s = pm(q.sign)
        self.torus = _is_torus(q)

    def H(self, c: NDArray) -> FullState:
        return FullState(self.g, c, 0)

    def P(self, f: FullState) -> NDArray:
        return f.band(0, self.n - 1)

    def mul(self, a, b) -> FullState:
        return multiply(self._f(a), self._f(b))

    def _f(self, a) -> FullState:
        return a if isinstance(a, FullState) else self.H(a)

    def cbar(self, a) -> FullState:
        return self._f(a).conj()

    def cp(self, f: FullState) -> FullState:
        return cauchy_szego(f, "plus")

    def cm(self, f: FullState) -> FullState:
        return cauchy_szego(f, "minus")

    def ip(self, a: NDArray, b: NDArray) -> complex:
        return self.g.weight * np.vdot(a, b)

    def deriv(self, a: NDArray) -> NDArray:
        return 1j * self.g.freqs * a

    def a_cp_qbar(self, a: NDArray, b: NDArray) -> NDArray:
        """``P[a C+(q conj(b))]``."""
        return self.P(self.mul(a, self.cp(self.mul(self.q.coeffs, self.cbar(b)))))


def beta_wirtinger(q: HardyState, kappa: float, lax: LaxMatrix | None = None) -> HardyState:
    """``d beta / d conj(q) = m +- P[m C-(q conj(m))]``.

    The outer projection is onto the retained coefficients with full weight,
    which makes this the exact derivative of the discrete ``beta``.
    """
    o = _Ops(q)
    m = resolve(q, kappa, lax).m.coeffs
    inner_term = o.cm(o.mul(q.coeffs, o.cbar(m)))
    return q.with_coeffs(m + o.s * o.P(o.mul(m, inner_term)))


def _dl_pair(o: "_Ops", a: NDArray, b: NDArray) -> NDArray:
    """Contribution of ``<a, dL b> + <b, dL a>`` to a Wirtinger derivative."""
    return -o.s * (o.P(o.mul(a, o.cm(o.mul(o.q.coeffs, o.cbar(b)))))
                   + o.P(o.mul(b, o.cm(o.mul(o.q.coeffs, o.cbar(a))))))


def wirtinger(fn: "Functional | str", q: HardyState, lax: LaxMatrix | None = None) -> HardyState:
    """Exact ``dF/dconj(q)`` of the discrete functional, in closed form.

    Built from ``d<q, f(L) q>`` with ``dL f = -+ P[dq C+(conj(q) f)] -+ P[q C+(conj(dq) f)]``.
    """
    fn = Functional.parse(fn) if isinstance(fn, str) else fn
    lax = lax or build_lax(q)
    o = _Ops(q)
    s = o.s
    torus = o.torus
    qc = q.coeffs.astype(complex)

    def d_en(n: int) -> NDArray:
        p = lax_powers(q, n, lax)
        out = p[n].copy()
        for j in range(n):
            out += 0.5 * _dl_pair(o, p[j], p[n - 1 - j])
        return out

    def d_beta(k: float) -> tuple[NDArray, ResolventVector]:
        rv = resolve(q, k, lax)
        m = rv.m.coeffs
        return m - 0.5 * _dl_pair(o, m, m), rv

    if fn.kind == "mass":
        return q.with_coeffs(qc)
    if fn.kind == "en":
        return q.with_coeffs(d_en(int(fn.param)))
    if fn.kind == "beta":
        return q.with_coeffs(d_beta(float(fn.param))[0])
    e = energies(q, 2, lax)
    d1 = d_en(1)
    if fn.kind == "momentum":
        out = -0.5 * d1 - (s * e[0] / TWO_PI * qc if torus else 0.0)
        return q.with_coeffs(out)
    if fn.kind == "hamiltonian":
        out = 0.5 * d_en(2)
        if torus:
            out = out + s * 3 / (4 * math.pi) * (e[1] * qc + e[0] * d1) \
                + 3 / (4 * math.pi ** 2) * e[0] ** 2 * qc
        return q.with_coeffs(out)
    k = float(fn.param)
    db, rv = d_beta(k)
    d1k = -k * k * db + k * qc
    d2k = k ** 3 * db - k * k * qc + k * d1
    out = 0.5 * d2k
    if torus:
        m = rv.m.coeffs
        nv = sla.cho_solve(lax.shifted_factor(k), m)
        dmm = nv - 0.5 * _dl_pair(o, m, nv) - 0.5 * _dl_pair(o, nv, m)
        dlm = qc - 2 * k * db + k * k * dmm
        e1k = -k * k * rv.beta + k * e[0]
        lm2 = lm_norm2(q, k, lax)
        out = (out + s * 3 / (4 * math.pi) * (e1k * qc + e[0] * d1k)
               + 3 / (4 * math.pi ** 2) * e[0] ** 2 * qc
               - s * k / (4 * math.pi) * (lm2 * qc + e[0] * dlm))
    return q.with_coeffs(out)


def grad_beta(q: HardyState, kappa: float, lax: LaxMatrix | None = None) -> HardyState:
    o = _Ops(q)
    rv = resolve(q, kappa, lax)
    m = rv.m.coeffs
    out = -2j * m + 2j * o.s * o.a_cp_qbar(m, m)
    if o.torus:
        mm = o.ip(m, m).real
        out = out - o.s * 1j / math.pi * (m * rv.beta + q.coeffs * mm)
    return q.with_coeffs(out)


def grad_energy(q: HardyState, n: int, lax: LaxMatrix | None = None) -> HardyState:
    """Symplectic gradient of ``E_n`` from powers of ``L_q``."""
    o = _Ops(q)
    if n == 0:
        return q.with_coeffs(-2j * q.coeffs)
    lax = lax or build_lax(q)
    p = lax_powers(q, n, lax)
    e = energies(q, max(n - 1, 0), lax) if o.torus else None
    out = -2j * p[n]
    for j in range(n):
        l = n - 1 - j
        term = o.a_cp_qbar(p[j], p[l])
        if o.torus:
            term = term - e[l] / TWO_PI * p[j]
        out = out - 2j * o.s * term
    if o.torus:
        out = out + o.s * 1j / math.pi * n * e[n - 1] * q.coeffs
    return q.with_coeffs(out)


def grad_lm_norm2(q: HardyState, kappa: float, lax: LaxMatrix | None = None) -> HardyState:
    """Symplectic gradient of ``||L_q m_kappa||^2``."""
    o = _Ops(q)
    lax = lax or build_lax(q)
    rv = resolve(q, kappa, lax)
    m = rv.m.coeffs
    nv = resolve(rv.m.with_sign(q.sign), kappa, lax).m.coeffs  # (L_q + kappa)^{-1} m
    k = kappa
    s = o.s
    out = (-2j * q.coeffs + 4j * k * m - 4j * s * k * o.a_cp_qbar(m, m)
           - 2j * k * k * nv + 2j * s * k * k * o.a_cp_qbar(nv, m)
           + 2j * s * k * k * o.a_cp_qbar(m, nv))
    if o.torus:
        mm = o.ip(m, m).real
        mn = o.ip(m, nv).real
        out = out + s * 1j / math.pi * (
            2 * k * m * rv.beta + 2 * k * q.coeffs * mm - k * k * rv.beta * nv
            - k * k * m * mm - 2 * k * k * q.coeffs * mn)
    return q.with_coeffs(out)


def grad(fn: Functional | str, q: HardyState, lax: LaxMatrix | None = None) -> HardyState:
    """Closed-form symplectic gradient ``nabla_omega F(q)``.

    Momentum, Hamiltonian and the regularized Hamiltonian are assembled from
    the gradients of ``E_n``, ``beta`` and ``||L_q m||^2`` exactly as their
    defining combinations dictate.
    """
    fn = Functional.parse(fn) if isinstance(fn, str) else fn
    lax = lax or build_lax(q)
    s = pm(q.sign)
    torus = _is_torus(q)
    if fn.kind == "mass":
        return grad_energy(q, 0, lax)
    if fn.kind == "en":
        return grad_energy(q, int(fn.param), lax)
    if fn.kind == "beta":
        return grad_beta(q, float(fn.param), lax)
    g0 = grad_energy(q, 0, lax).coeffs
    g1 = grad_energy(q, 1, lax).coeffs
    e = energies(q, 1, lax)
    if fn.kind == "momentum":
        out = -0.5 * g1
        if torus:
            out = out - s * e[0] / TWO_PI * g0
        return q.with_coeffs(out)
    if fn.kind == "hamiltonian":
        g2 = grad_energy(q, 2, lax).coeffs
        out = 0.5 * g2
        if torus:
            out = out + s * 3 / (4 * math.pi) * (e[1] * g0 + e[0] * g1) \
                + 3 / (4 * math.pi ** 2) * e[0] ** 2 * g0
        return q.with_coeffs(out)
    k = float(fn.param)
    rv = resolve(q, k, lax)
    gb = grad_beta(q, k, lax).coeffs
    ge1k = -k * k * gb + k * g0
    ge2k = k ** 3 * gb - k * k * g0 + k * g1
    out = 0.5 * ge2k
    if torus:
        e1k = -k * k * rv.beta + k * e[0]
        lm2 = lm_norm2(q, k, lax)
        glm = grad_lm_norm2(q, k, lax).coeffs
        out = (out + s * 3 / (4 * math.pi) * (e1k * g0 + e[0] * ge1k)
               + 3 / (4 * math.pi ** 2) * e[0] ** 2 * g0
               - s * k / (4 * math.pi) * (lm2 * g0 + e[0] * glm))
    return q.with_coeffs(out)


def wirtinger_oracle(fn: Functional | str, q: HardyState, h: float | None = None) -> HardyState:
    """``dF/d conj(q)`` by central differences along the ``2N`` real directions.

    ``dF(f) = 2 Re <f, dF/dconj(q)>``, so the derivatives along ``e_k`` and
    ``i e_k`` are ``2 w Re d_k`` and ``2 w Im d_k`` with ``w`` the inner
    product weight.
    """
    fn = Functional.parse(fn) if isinstance(fn, str) else fn
    qn = math.sqrt(max(0.0, float(inner(q, q).real)))
    h = h if h is not None else 1e-5 * max(1.0, qn)
    n = q.n_modes
    c = q.coeffs
    d = np.zeros(n, dtype=complex)
    w = q.geometry.weight
    for k in range(n):
        for unit in (1.0, 1j):
            e = np.zeros(n, dtype=complex)
            e[k] = unit * h
            fp = evaluate(fn, q.with_coeffs(c + e))
            fm = evaluate(fn, q.with_coeffs(c - e))
            der = (fp - fm) / (2 * h)
            if unit == 1.0:
                d[k] += der / (2 * w)
            else:
                d[k] += 1j * der / (2 * w)
    return q.with_coeffs(d)


def grad_oracle(fn: Functional | str, q: HardyState, h: float | None = None,
                J: RealLinearOperator | None = None) -> HardyState:
    """``2 J(q) dF/dconj(q)`` with the Wirtinger derivative from finite differences."""
    J = J or j_map(q)
    d = wirtinger_oracle(fn, q, h)
    return q.with_coeffs(2.0 * J.apply(d.coeffs))


@dataclass
class GradientReport:
    functional: str
    analytic: HardyState
    oracle: HardyState
    discrepancy: float

    def to_dict(self) -> dict:
        return {
            "functional": self.functional,
            "discrepancy": self.discrepancy,
            "analytic": [[float(z.real), float(z.imag)] for z in self.analytic.coeffs],
            "oracle": [[float(z.real), float(z.imag)] for z in self.oracle.coeffs],
        }


def l2_distance(a: HardyState, b: HardyState) -> float:
    return math.sqrt(a.geometry.weight) * float(np.linalg.norm(a.coeffs - b.coeffs))


def gradient_report(fn: Functional | str, q: HardyState, h: float | None = None,
                    J: RealLinearOperator | None = None) -> GradientReport:
    fn = Functional.parse(fn) if isinstance(fn, str) else fn
    a = grad(fn, q)
    o = grad_oracle(fn, q, h, J)
    return GradientReport(str(fn), a, o, l2_distance(a, o))


def poisson_bracket(F: Functional | str, G: Functional | str, q: HardyState,
                    method: str = "wirtinger", J: RealLinearOperator | None = None,
                    lax: LaxMatrix | None = None) -> float:
    """``{F, G}(q) = 4 Re <dF/dconj(q), J dG/dconj(q)>``.

    Methods
    -------
    ``"wirtinger"``
        Exact discrete Wirtinger derivatives and the inverse ``J``.
    ``"gradient"``
        Closed-form symplectic gradients, ``Re <Omega grad F, grad G>``;
        no inversion.
    ``"oracle"``
        Finite-difference Wirtinger derivatives and ``J``.
    """
    lax = lax or build_lax(q)
    w = q.geometry.weight
    if method == "gradient":
        om = omega_op(q)
        gf = grad(F, q, lax).coeffs
        gg = grad(G, q, lax).coeffs
        return float((w * np.vdot(om.apply(gf), gg)).real)
    if method in ("wirtinger", "oracle"):
        J = J or j_map(q)
        if method == "wirtinger":
            df, dg = wirtinger(F, q, lax).coeffs, wirtinger(G, q, lax).coeffs
        else:
            df, dg = wirtinger_oracle(F, q).coeffs, wirtinger_oracle(G, q).coeffs
        return float(4 * (w * np.vdot(df, J.apply(dg))).real)
    raise ValueError(f"unknown method {method!r}")


# ------------------------------------------------------------ Hamiltonian forms

def hamiltonian_expressions(q: HardyState) -> tuple[float, float, float]:
    """The Hamiltonian on the torus in three equivalent forms.

    1. The combination of ``E_0, E_1, E_2``.
    2. ``(1/2)||q' -+ i q C+|q|^2||^2`` plus mass, half-derivative and
       quartic corrections.
    3. The fully expanded Sobolev and Lebesgue norm form.

    Forms 2 and 3 use exact (untruncated) products.
    """
    if not _is_torus(q):
        raise ValueError("the three-form comparison is a torus identity")
    from .spectral import norm

    s = pm(q.sign)
    h1 = evaluate("hamiltonian", q)
    qf = q.full()
    a2 = multiply(qf, qf.conj())
    cpa = cauchy_szego(a2, "plus")
    x = combine(1, qf.derivative(), -s * 1j, multiply(qf, cpa))
    m2 = norm(q, "L2") ** 2
    hh = norm(q, "Hdots", 0.5) ** 2
    l4 = norm(q, "L4") ** 4
    l6 = norm(q, "L6") ** 6
    xx = float(q.geometry.weight * np.sum(np.abs(x.coeffs) ** 2))
    h2 = 0.5 * xx + s * 3 / (4 * math.pi) * m2 * hh - 3 / (8 * math.pi) * m2 * l4 \
        + m2 ** 3 / (16 * math.pi ** 2)
    h1d = norm(q, "Hdots", 1.0) ** 2
    cp_half = norm(cpa, "Hdots", 0.5) ** 2
    q2 = multiply(qf, qf)
    q2_half = norm(q2, "Hdots", 0.5) ** 2
    h3 = (0.5 * h1d - s * 0.5 * cp_half - s * 0.25 * q2_half + s / (2 * math.pi) * m2 * hh
          + l6 / 6 - l4 * m2 / (4 * math.pi) + m2 ** 3 / (12 * math.pi ** 2))
    return h1, float(h2), float(h3)


def coercivity_slack(q: HardyState) -> float:
    """``H(q) + E_0^3 / (32 pi^2)``, nonnegative by the sharp lower bound."""
    e0 = float(inner(q, q).real)
    return evaluate("hamiltonian", q) + e0 ** 3 / (32 * math.pi ** 2)
