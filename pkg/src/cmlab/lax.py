"""The Lax operator ``L_q = -i d/dx -+ q C+ conj(q)`` on the retained Hardy basis.

On the coefficient basis the multiplication-projection part is a product of
Toeplitz matrices::

    L_q = diag(xi) -+ dxi^2 T_q W T_q^H

where ``T_q`` is the lower-triangular Toeplitz matrix of ``q_hat`` and ``W``
is the share of each frequency kept by ``C+`` (identity on the torus, a half
weight on the zero bin of the line window).  Because the inner product is a
uniform multiple of the Euclidean one, matrix adjoints are operator adjoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np
import scipy.linalg as sla
from numpy.typing import NDArray

from .spectral import (
    TWO_PI,
    FullState,
    HardyState,
    as_full,
    cauchy_szego,
    inner,
    mass,
    multiply,
    pm,
)


class ThresholdError(ArithmeticError):
    """``L_q + kappa`` is not positive definite (focusing mass too large)."""

    def __init__(self, message: str, mass_value: float):
        super().__init__(message)
        self.mass = mass_value


@lru_cache(maxsize=16)
def _lower_index(n: int) -> NDArray[np.intp]:
    # entry (j, k) reads c[j - k]; the upper triangle reads the zero at index n
    d = np.subtract.outer(np.arange(n), np.arange(n))
    d[d < 0] = n
    d.setflags(write=False)
    return d


def toeplitz_lower(c: NDArray) -> NDArray[np.complex128]:
    """Matrix of ``f -> P[c f]`` on coefficients, without the ``dxi`` factor."""
    c = np.asarray(c, dtype=complex)
    return np.append(c, 0)[_lower_index(c.size)]


def zero_weights(q: HardyState) -> NDArray[np.float64]:
    w = np.ones(q.n_modes)
    w[0] = q.geometry.zero_weight
    return w


def mult_proj_matrix(a: HardyState, b: HardyState) -> NDArray[np.complex128]:
    """Matrix of ``f -> P[a C+(conj(b) f)]`` on the retained basis."""
    d = a.geometry.dxi
    ta = toeplitz_lower(a.coeffs)
    tb = ta if b is a else toeplitz_lower(b.coeffs)
    return d * d * (ta * zero_weights(a)) @ tb.conj().T


@dataclass(frozen=True, eq=False)
class LaxMatrix:
    """Dense Hermitian matrix of ``L_q``."""

    q: HardyState
    matrix: NDArray[np.complex128]

    @property
    def geometry(self):
        return self.q.geometry

    @property
    def sign(self) -> str:
        return self.q.sign

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def eigh(self) -> tuple[NDArray[np.float64], NDArray[np.complex128]]:
        return np.linalg.eigh(self.matrix)

    @property
    def eigenvalues(self) -> NDArray[np.float64]:
        return self.eigh[0]

    def function(self, fn: Callable[[NDArray], NDArray]) -> NDArray[np.complex128]:
        """``fn(L_q)`` by Hermitian functional calculus."""
        lam, v = self.eigh
        return (v * fn(lam)) @ v.conj().T

    def apply(self, f: HardyState) -> HardyState:
        return f.with_coeffs(self.matrix @ f.coeffs)

    def dot(self, v: NDArray) -> NDArray[np.complex128]:
        return self.matrix @ v

    def shifted_factor(self, kappa: float):
        """Cholesky factor of ``L_q + kappa``; raises ThresholdError if indefinite."""
        a = self.matrix + kappa * np.eye(self.n)
        try:
            return sla.cho_factor(a, lower=False, check_finite=True)
        except np.linalg.LinAlgError:
            m = mass(self.q)
            raise ThresholdError(
                f"L_q + {kappa:g} is not positive definite (mass {m:.10g}, "
                f"threshold 2*pi = {TWO_PI:.10g})", m) from None


class LaxProducts:
    """Matrix-free ``L_q`` from its factor ``A = dxi T_q sqrt(W)``.

    Applying ``diag(xi) -+ A A^H`` costs two triangular Toeplitz products,
    which is all the energies ``E_n`` need.
    """

    def __init__(self, q: HardyState):
        self.q = q
        self.factor = toeplitz_lower(q.coeffs) * (q.geometry.dxi * np.sqrt(zero_weights(q)))
        self._xi = q.geometry.freqs
        self._s = pm(q.sign)

    def dot(self, v: NDArray) -> NDArray[np.complex128]:
        a = self.factor
        return self._xi * v - self._s * (a @ (a.conj().T @ v))


def build_lax(q: HardyState) -> LaxMatrix:
    # T W T^H = A A^H with A = T sqrt(W), Hermitian up to rounding
    d = q.geometry.dxi
    a = toeplitz_lower(q.coeffs) * (d * np.sqrt(zero_weights(q)))
    mat = -pm(q.sign) * (a @ a.conj().T)
    mat += np.diag(q.geometry.freqs)
    mat = 0.5 * (mat + mat.conj().T)
    return LaxMatrix(q, mat)


def apply_lax(q: HardyState, f: HardyState) -> HardyState:
    """Matrix-free ``L_q f`` from transforms and projections."""
    prod = multiply(q, cauchy_szego(multiply(as_full(q).conj(), f), "plus"))
    deriv = as_full(f).derivative()
    out = deriv.scale(-1j).band(0, f.n_modes - 1) - pm(q.sign) * prod.band(0, f.n_modes - 1)
    return f.with_coeffs(out)


@dataclass(frozen=True, eq=False)
class ResolventVector:
    kappa: float
    m: HardyState
    beta: float


def _lax_of(q: HardyState, lax: LaxMatrix | None) -> LaxMatrix:
    return lax if lax is not None else build_lax(q)


def resolve(q: HardyState, kappa: float, lax: LaxMatrix | None = None) -> ResolventVector:
    """``m = (L_q + kappa)^{-1} q`` and ``beta = <q, m>``."""
    if kappa < 1:
        raise ValueError("kappa must be at least 1")
    lax = _lax_of(q, lax)
    fac = lax.shifted_factor(kappa)
    m = sla.cho_solve(fac, q.coeffs.astype(complex))
    b = inner(q, q.with_coeffs(m))
    return ResolventVector(float(kappa), q.with_coeffs(m), float(b.real))


def beta(q: HardyState, kappa: float, lax: LaxMatrix | None = None) -> float:
    return resolve(q, kappa, lax).beta


def beta_dk(q: HardyState, kappa: float, lax: LaxMatrix | None = None) -> float:
    """``d beta / d kappa = -<q, (L_q + kappa)^{-2} q> = -||m||^2``."""
    m = resolve(q, kappa, lax).m
    return -float(inner(m, m).real)


def lax_powers(q: HardyState, n_max: int,
               lax: LaxMatrix | LaxProducts | None = None) -> list[NDArray]:
    """Coefficient arrays of ``L_q^j q`` for ``j = 0..n_max``."""
    lax = lax if lax is not None else LaxProducts(q)
    out = [q.coeffs.astype(complex)]
    for _ in range(n_max):
        out.append(lax.dot(out[-1]))
    return out


def energies(q: HardyState, n_max: int,
             lax: LaxMatrix | LaxProducts | None = None) -> NDArray[np.float64]:
    """``E_n = <q, L_q^n q>`` for ``n = 0..n_max`` (evaluated symmetrically)."""
    if n_max > 6:
        raise ValueError("n_max is limited to 6")
    pw = lax_powers(q, (n_max + 1) // 2 + 1, lax)
    w = q.geometry.weight
    out = np.empty(n_max + 1)
    for n in range(n_max + 1):
        a, b = n // 2, n - n // 2
        out[n] = (w * np.vdot(pw[a], pw[b])).real
    return out


def _l0_shift(q: HardyState, kappa: float) -> NDArray[np.float64]:
    return q.geometry.freqs + kappa


def s_matrix(q: HardyState, kappa: float) -> NDArray[np.complex128]:
    """``S(q) = C+ conj(q) (L_0 + kappa)^{-1/2}`` on the retained basis.

    The zero bin weight enters as a square root on each side so that
    ``S* S`` reproduces the Lax perturbation exactly.
    """
    d = q.geometry.dxi
    tq = toeplitz_lower(q.coeffs)
    sw = np.sqrt(zero_weights(q))
    return d * (sw[:, None] * tq.conj().T) / np.sqrt(_l0_shift(q, kappa))[None, :]


def s_opnorm(q: HardyState, kappa: float) -> float:
    """Operator norm ``||S(q)||`` (the bound concerns its square)."""
    return float(np.linalg.norm(s_matrix(q, kappa), 2))


def t_matrix(q: HardyState, g: HardyState, kappa: float) -> NDArray[np.complex128]:
    """``T(q, g) = q C+ conj(g) (L_0 + kappa)^{-1}`` on the retained basis."""
    return mult_proj_matrix(q, g) / _l0_shift(q, kappa)[None, :]


def t_hsnorm(q: HardyState, g: HardyState, kappa: float) -> float:
    return float(np.linalg.norm(t_matrix(q, g, kappa), "fro"))


def sst_spectrum(q: HardyState, kappa: float) -> dict[str, NDArray[np.complex128]]:
    """Eigenvalues of ``T(q,q)``, ``T(q,q)*``, ``S*S`` and ``S S*``, each sorted."""
    s = s_matrix(q, kappa)
    t = t_matrix(q, q, kappa)

    def srt(v):
        v = np.asarray(v, dtype=complex)
        return v[np.lexsort((v.imag, v.real))]

    return {
        "T": srt(np.linalg.eigvals(t)),
        "T*": srt(np.linalg.eigvals(t.conj().T)),
        "S*S": srt(np.linalg.eigvalsh(s.conj().T @ s)),
        "SS*": srt(np.linalg.eigvalsh(s @ s.conj().T)),
    }


def _require_definite(lax: LaxMatrix, kappa: float) -> None:
    lam = lax.eigenvalues
    if lam.size and lam[0] + kappa <= 0:
        m = mass(lax.q)
        raise ThresholdError(
            f"L_q + {kappa:g} is indefinite (lowest eigenvalue {lam[0] + kappa:.3g}, mass {m:.6g})", m)


def sobolev_ratio(q: HardyState, f: HardyState, s: float, kappa: float,
                  lax: LaxMatrix | None = None) -> float:
    """``||(L_q + kappa)^s f|| / ||(L_0 + kappa)^s f||``."""
    lax = _lax_of(q, lax)
    _require_definite(lax, kappa)
    num = lax.function(lambda lam: (lam + kappa) ** s) @ f.coeffs
    den = _l0_shift(q, kappa) ** s * f.coeffs
    return float(np.linalg.norm(num) / np.linalg.norm(den))


def equicontinuity_functional(q: HardyState, varkappa: float,
                              lax: LaxMatrix | None = None) -> float:
    """``<q, (L_q+1)^2 / ((L_q+1)^2 + varkappa^2) q>``."""
    lax = _lax_of(q, lax)
    lam, v = lax.eigh
    a = v.conj().T @ q.coeffs
    x = (lam + 1.0) ** 2
    return float(q.geometry.weight * np.sum(x / (x + varkappa ** 2) * np.abs(a) ** 2))


def decay_diagnostics(q: HardyState, kappa: float,
                      lax: LaxMatrix | None = None) -> tuple[float, float]:
    """``(||L_q m||, ||kappa L_q (L_q + kappa)^{-1} m||)`` with ``m = m(kappa, q)``."""
    lax = _lax_of(q, lax)
    rv = resolve(q, kappa, lax)
    lm = lax.matrix @ rv.m.coeffs
    second = kappa * (lax.matrix @ sla.cho_solve(lax.shifted_factor(kappa), rv.m.coeffs))
    w = math.sqrt(q.geometry.weight)
    return float(w * np.linalg.norm(lm)), float(w * np.linalg.norm(second))
