"""Truncated Hardy-space representation on the circle and on a line window.

A state is stored by its Fourier coefficients ``q_hat`` on the retained
nonnegative frequencies.  With the transform convention

    f_hat(xi) = (1/2pi) * integral exp(-i xi x) f(x) dx

a coefficient vector ``c`` represents

    q(x) = dxi * sum_k c[k] exp(i xi_k x),    xi_k = k * dxi,

with ``dxi = 1`` on the torus and ``dxi = pi/L`` on the window ``[-L, L)``.
Plancherel then reads ``||q||^2 = 2 pi dxi sum |c_k|^2`` in both geometries.

Products are exact discrete convolutions (scaled by ``dxi``), so no
aliasing enters any nonlinear term; truncation back to the retained band is
the only spatial approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.signal import fftconvolve

Kind = Literal["torus", "line"]
Sign = Literal["focusing", "defocusing"]

SIGNS: tuple[str, ...] = ("focusing", "defocusing")
TWO_PI = 2.0 * math.pi

# Above this length the direct convolution is slower than the FFT one.
_DIRECT_CONV_MAX = 384


class DimensionError(ValueError):
    """Raised when coefficient arrays do not match the geometry."""


class GeometryMismatch(ValueError):
    """Raised when two states live on different geometries."""


def pm(sign: str) -> float:
    """Return +1 for the focusing (upper) sign and -1 for defocusing."""
    if sign == "focusing":
        return 1.0
    if sign == "defocusing":
        return -1.0
    raise ValueError(f"unknown sign {sign!r}")


def _next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


@dataclass(frozen=True)
class Geometry:
    """Torus of period 2pi or a periodized line window ``[-L, L)``.

    Parameters
    ----------
    kind : {"torus", "line"}
    n_modes : int
        Number of retained nonnegative frequencies ``N``.
    half_length : float, optional
        Window half length ``L`` (line only).  The torus always uses pi.
    grid_points : int, optional
        Physical grid size; defaults to the smallest power of two that is at
        least ``4 N``.
    """

    kind: Kind
    n_modes: int
    half_length: float = math.pi
    grid_points: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("torus", "line"):
            raise ValueError(f"unknown geometry kind {self.kind!r}")
        if int(self.n_modes) < 1:
            raise ValueError("n_modes must be positive")
        object.__setattr__(self, "n_modes", int(self.n_modes))
        if self.kind == "torus":
            object.__setattr__(self, "half_length", math.pi)
        elif not self.half_length > 0:
            raise ValueError("half_length must be positive")
        gp = int(self.grid_points) or _next_pow2(4 * self.n_modes)
        if gp < 4 * self.n_modes:
            raise ValueError("grid_points must be at least 4 * n_modes")
        if gp & (gp - 1):
            raise ValueError("grid_points must be a power of two")
        object.__setattr__(self, "grid_points", gp)

    @classmethod
    def torus(cls, n_modes: int, grid_points: int = 0) -> "Geometry":
        return cls("torus", n_modes, math.pi, grid_points)

    @classmethod
    def line(cls, n_modes: int, half_length: float, grid_points: int = 0) -> "Geometry":
        return cls("line", n_modes, float(half_length), grid_points)

    @property
    def dxi(self) -> float:
        return math.pi / self.half_length

    @property
    def zero_weight(self) -> float:
        # Share of the xi = 0 bin given to each Cauchy-Szego projection.
        return 1.0 if self.kind == "torus" else 0.5

    @property
    def weight(self) -> float:
        """Factor in ``<f, g> = weight * sum conj(f_k) g_k``."""
        return TWO_PI * self.dxi

    @property
    def freqs(self) -> NDArray[np.float64]:
        return np.arange(self.n_modes) * self.dxi

    def grid(self, points: int | None = None) -> NDArray[np.float64]:
        m = points or self.grid_points
        if self.kind == "torus":
            return TWO_PI * np.arange(m) / m
        return -self.half_length + 2.0 * self.half_length * np.arange(m) / m

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "n_modes": self.n_modes, "grid_points": self.grid_points}
        if self.kind == "line":
            d["half_length"] = self.half_length
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Geometry":
        return cls(d["kind"], int(d["n_modes"]), float(d.get("half_length", math.pi)),
                   int(d.get("grid_points", 0)))


@dataclass(frozen=True, eq=False)
class HardyState:
    """Coefficients of ``q`` on frequencies ``0, dxi, ..., (N-1) dxi``."""

    geometry: Geometry
    coeffs: NDArray[np.complex128]
    sign: Sign = "focusing"

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.geometry.n_modes,):
            raise DimensionError(
                f"expected {self.geometry.n_modes} coefficients, got shape {c.shape}")
        pm(self.sign)
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def n_modes(self) -> int:
        return self.geometry.n_modes

    def with_coeffs(self, coeffs: ArrayLike) -> "HardyState":
        return HardyState(self.geometry, np.asarray(coeffs, dtype=complex), self.sign)

    def with_sign(self, sign: Sign) -> "HardyState":
        return HardyState(self.geometry, self.coeffs, sign)

    def full(self) -> "FullState":
        return FullState(self.geometry, self.coeffs, 0)

    def __add__(self, other: "HardyState") -> "HardyState":
        _check_same(self.geometry, other.geometry)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: "HardyState") -> "HardyState":
        _check_same(self.geometry, other.geometry)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar: complex) -> "HardyState":
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "HardyState":
        return self.with_coeffs(-self.coeffs)


@dataclass(frozen=True, eq=False)
class FullState:
    """Coefficients on frequencies ``kmin, ..., kmin + len - 1`` (in units of dxi)."""

    geometry: Geometry
    coeffs: NDArray[np.complex128]
    kmin: int = 0

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size == 0:
            raise DimensionError("FullState needs a nonempty 1-D coefficient array")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "kmin", int(self.kmin))

    @property
    def kmax(self) -> int:
        return self.kmin + self.coeffs.size - 1

    @property
    def indices(self) -> NDArray[np.int64]:
        return np.arange(self.kmin, self.kmax + 1)

    def coeff(self, k: int) -> complex:
        j = k - self.kmin
        return complex(self.coeffs[j]) if 0 <= j < self.coeffs.size else 0.0j

    def band(self, lo: int, hi: int) -> NDArray[np.complex128]:
        """Coefficients on ``lo..hi`` inclusive, zero-filled outside the support."""
        out = np.zeros(hi - lo + 1, dtype=complex)
        a, b = max(lo, self.kmin), min(hi, self.kmax)
        if a <= b:
            out[a - lo:b - lo + 1] = self.coeffs[a - self.kmin:b - self.kmin + 1]
        return out

    def hardy(self, sign: Sign = "focusing") -> HardyState:
        """Project onto the retained state space (modes ``0..N-1``)."""
        return HardyState(self.geometry, self.band(0, self.geometry.n_modes - 1), sign)

    def conj(self) -> "FullState":
        return FullState(self.geometry, np.conj(self.coeffs[::-1]), -self.kmax)

    def real_part(self) -> "FullState":
        return combine(0.5, self, 0.5, self.conj())

    def scale(self, s: complex) -> "FullState":
        return FullState(self.geometry, self.coeffs * s, self.kmin)

    def derivative(self) -> "FullState":
        return FullState(self.geometry, 1j * self.indices * self.geometry.dxi * self.coeffs, self.kmin)


def _check_same(a: Geometry, b: Geometry) -> None:
    if a != b:
        raise GeometryMismatch(f"geometry mismatch: {a} vs {b}")


def as_full(f: "FullState | HardyState") -> FullState:
    return f.full() if isinstance(f, HardyState) else f


def combine(a: complex, f: FullState, b: complex, g: FullState) -> FullState:
    """Return ``a f + b g`` on the union of the two supports."""
    _check_same(f.geometry, g.geometry)
    lo, hi = min(f.kmin, g.kmin), max(f.kmax, g.kmax)
    return FullState(f.geometry, a * f.band(lo, hi) + b * g.band(lo, hi), lo)


# ---------------------------------------------------------------- kernels

def conv(a: NDArray, b: NDArray) -> NDArray[np.complex128]:
    """Exact linear convolution of two coefficient arrays."""
    if min(a.size, b.size) <= _DIRECT_CONV_MAX:
        return np.convolve(a, b)
    return fftconvolve(a, b)


def flip_conj(a: NDArray) -> NDArray:
    """Coefficients of the conjugate function: ``c_k -> conj(c_{-k})``."""
    return np.conj(a[::-1])


def mul_hardy(a: NDArray, b: NDArray, dxi: float, n: int) -> NDArray[np.complex128]:
    """Coefficients ``0..n-1`` of the product of two Hardy arrays."""
    return dxi * conv(a[:n], b[:n])[:n]


# -------------------------------------------------------------- transforms

def synthesize(q: HardyState | FullState, points: int | None = None) -> NDArray[np.complex128]:
    """Sample the represented function on the physical grid."""
    f = as_full(q)
    g = f.geometry
    m = points or g.grid_points
    if f.kmax - f.kmin + 1 > m:
        raise DimensionError(f"{m} grid points cannot resolve band {f.kmin}..{f.kmax}")
    buf = np.zeros(m, dtype=complex)
    k = f.indices
    c = f.coeffs
    if g.kind == "line":
        # x_j = -L + 2Lj/m contributes a phase (-1)^k.
        c = c * np.where(k % 2 == 0, 1.0, -1.0)
    np.add.at(buf, k % m, c)
    return g.dxi * m * np.fft.ifft(buf)


def analyze(samples: ArrayLike, geometry: Geometry, band: int | None = None) -> FullState:
    """Fourier coefficients on ``-band..band`` from grid samples."""
    s = np.asarray(samples, dtype=complex)
    if s.ndim != 1:
        raise DimensionError("samples must be one-dimensional")
    m = s.size
    if band is None:
        band = min(geometry.n_modes - 1, m // 2 - 1)
    if 2 * band + 1 > m:
        raise DimensionError(f"{m} samples cannot resolve band {band}")
    spec = np.fft.fft(s) / (m * geometry.dxi)
    k = np.arange(-band, band + 1)
    c = spec[k % m]
    if geometry.kind == "line":
        c = c * np.where(k % 2 == 0, 1.0, -1.0)
    return FullState(geometry, c, -band)


def multiply(f: FullState | HardyState, g: FullState | HardyState) -> FullState:
    """Exact (alias-free) product of two band-limited functions."""
    f, g = as_full(f), as_full(g)
    _check_same(f.geometry, g.geometry)
    return FullState(f.geometry, f.geometry.dxi * conv(f.coeffs, g.coeffs), f.kmin + g.kmin)


def cauchy_szego(f: FullState | HardyState, side: Literal["plus", "minus"] = "plus") -> FullState:
    """Cauchy-Szego projection onto nonnegative ("plus") or nonpositive frequencies.

    On the torus the zero mode is kept by both sides, so ``C+ f + C- f = f + f_hat(0)``.
    On the line window the zero bin is split evenly, so ``C+ + C- = 1``.
    """
    f = as_full(f)
    k = f.indices
    w0 = f.geometry.zero_weight
    if side == "plus":
        mask = np.where(k > 0, 1.0, np.where(k == 0, w0, 0.0))
    elif side == "minus":
        mask = np.where(k < 0, 1.0, np.where(k == 0, w0, 0.0))
    else:
        raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")
    return FullState(f.geometry, f.coeffs * mask, f.kmin)


def sawtooth_coeffs(geometry: Geometry, k: NDArray[np.int64]) -> NDArray[np.complex128]:
    """Window Fourier coefficients of the function ``x`` on ``[-L, L)``."""
    dxi = geometry.dxi
    out = np.zeros(k.shape, dtype=complex)
    nz = k != 0
    out[nz] = 1j * np.where(k[nz] % 2 == 0, 1.0, -1.0) / (k[nz] * dxi * dxi)
    return out


def antiderivative(f: FullState | HardyState, band: int | None = None) -> FullState:
    """The primitive operator with kernel ``sgn(x - y) / 2``.

    Torus: Fourier multiplier ``1/(i n)`` with the zero mode removed.
    Line: the sgn-kernel integral of the band-limited interpolant over the
    window, evaluated in closed form.  It is the periodic primitive, shifted
    so that the boundary values average to zero, plus ``f_hat(0) dxi * x``.
    The linear part has a slowly decaying series, so the result is returned
    on the symmetric band ``-band..band`` (at least the input band).
    """
    f = as_full(f)
    g = f.geometry
    b = max(abs(f.kmin), abs(f.kmax), band or 0)
    k = np.arange(-b, b + 1)
    c = f.band(-b, b)
    out = np.zeros_like(c)
    nz = k != 0
    out[nz] = c[nz] / (1j * k[nz] * g.dxi)
    if g.kind == "line":
        parity = np.where(k % 2 == 0, 1.0, -1.0)
        out[b] = -np.sum(out[nz] * parity[nz])
        out += c[b] * g.dxi * sawtooth_coeffs(g, k)
    return FullState(g, out, -b)


def sgn_quadrature(samples: ArrayLike, dx: float) -> NDArray:
    """``(1/2) sum_j sgn(x_i - x_j) f_j dx`` on a uniform grid via prefix sums."""
    f = np.asarray(samples)
    total = f.sum()
    before = np.concatenate(([0.0], np.cumsum(f)[:-1]))
    after = total - before - f
    return 0.5 * dx * (before - after)


# ------------------------------------------------------------------ norms

def inner(f: HardyState, g: HardyState) -> complex:
    """``<f, g> = integral conj(f) g``."""
    _check_same(f.geometry, g.geometry)
    return f.geometry.weight * np.vdot(f.coeffs, g.coeffs)


def inner_full(f: FullState, g: FullState) -> complex:
    _check_same(f.geometry, g.geometry)
    lo, hi = min(f.kmin, g.kmin), max(f.kmax, g.kmax)
    return f.geometry.weight * np.vdot(f.band(lo, hi), g.band(lo, hi))


def mass(q: HardyState | FullState) -> float:
    f = as_full(q)
    return float(f.geometry.weight * np.sum(np.abs(f.coeffs) ** 2))


def norm(q: HardyState | FullState, kind: str = "L2", s: float = 0.0) -> float:
    """Norms of a state.

    Parameters
    ----------
    kind : {"L2", "Hs", "Hdots", "L4", "L6"}
        ``Hs`` uses the weight ``(1 + xi^2)^s`` and ``Hdots`` uses ``|xi|^(2s)``.
        Lebesgue norms are computed on the physical grid, which integrates
        the sextic density exactly when ``grid_points >= 4 N``.
    """
    f = as_full(q)
    g = f.geometry
    xi = np.abs(f.indices * g.dxi)
    a2 = np.abs(f.coeffs) ** 2
    if kind == "L2":
        return math.sqrt(mass(f))
    if kind == "Hs":
        return math.sqrt(g.weight * np.sum((1.0 + xi ** 2) ** s * a2))
    if kind == "Hdots":
        w = np.ones_like(xi)
        if s != 0:
            w = np.zeros_like(xi)
            np.power(xi, 2 * s, out=w, where=xi > 0)
        return math.sqrt(g.weight * np.sum(w * a2))
    if kind in ("L4", "L6"):
        p = 4 if kind == "L4" else 6
        span = max(abs(f.kmin), abs(f.kmax))
        m = max(g.grid_points, _next_pow2((p // 2) * 2 * span + 2))
        x = np.abs(synthesize(f, m))
        dx = 2.0 * g.half_length / m
        return float((np.sum(x ** p) * dx) ** (1.0 / p))
    raise ValueError(f"unknown norm kind {kind!r}")


# ---------------------------------------------------------------- presets

def torus_soliton(n: int, n_modes: int, sign: Sign = "focusing") -> HardyState:
    """Coefficients ``sqrt(2n+1) n^k / (n+1)^(k+1)`` of ``sqrt(2n+1)/(1 - n(e^{ix} - 1))``."""
    k = np.arange(n_modes)
    r = n / (n + 1.0)
    c = math.sqrt(2 * n + 1) / (n + 1.0) * r ** k
    return HardyState(Geometry.torus(n_modes), c.astype(complex), sign)


def torus_soliton_profile(n: int, x: ArrayLike) -> NDArray[np.complex128]:
    x = np.asarray(x, dtype=float)
    return math.sqrt(2 * n + 1) / (1.0 - n * (np.exp(1j * x) - 1.0))


def line_soliton(n: float, n_modes: int, half_length: float,
                 representation: Literal["periodized", "sampled"] = "periodized",
                 sign: Sign = "focusing") -> HardyState:
    """Window representation of ``sqrt(2n)/(1 - i n x)``.

    ``"sampled"`` takes ``sqrt(2/n) exp(-xi/n)`` at the bin frequencies.
    ``"periodized"`` uses the geometric sequence with ratio ``exp(-dxi/n)``
    normalized to mass ``2 pi``; it is the period-``2L`` member of the
    soliton family and converges to the line profile as ``L`` grows.
    """
    g = Geometry.line(n_modes, half_length)
    k = np.arange(n_modes)
    if representation == "sampled":
        c = math.sqrt(2.0 / n) * np.exp(-k * g.dxi / n)
    elif representation == "periodized":
        r = math.exp(-g.dxi / n)
        c = math.sqrt((1.0 - r * r) / g.dxi) * r ** k
    else:
        raise ValueError(f"unknown representation {representation!r}")
    return HardyState(g, c.astype(complex), sign)


def line_soliton_profile(n: float, x: ArrayLike) -> NDArray[np.complex128]:
    x = np.asarray(x, dtype=float)
    return math.sqrt(2.0 * n) / (1.0 - 1j * n * x)


def plane_wave(c: complex, m: int, n_modes: int, sign: Sign = "focusing") -> HardyState:
    """``c e^{imx}`` on the torus."""
    if not 0 <= m < n_modes:
        raise ValueError("plane-wave frequency outside the retained band")
    coeffs = np.zeros(n_modes, dtype=complex)
    coeffs[m] = c
    return HardyState(Geometry.torus(n_modes), coeffs, sign)


def constant_state(value: complex, geometry: Geometry, sign: Sign = "focusing") -> HardyState:
    coeffs = np.zeros(geometry.n_modes, dtype=complex)
    coeffs[0] = value / geometry.dxi
    return HardyState(geometry, coeffs, sign)


def rescale_to_mass(q: HardyState, target: float) -> HardyState:
    m = mass(q)
    if m == 0:
        raise ValueError("cannot rescale the zero state")
    return q * math.sqrt(target / m)


def random_state(geometry: Geometry, rng: np.random.Generator, target_mass: float,
                 sign: Sign = "focusing", band: int | None = None,
                 decay: tuple[float, float] = (1.5, 3.0)) -> HardyState:
    """Random state for property checks.

    Torus: ``q_hat(k) = r_k e^{i phi_k} (1 + k)^(-a)`` on ``0 <= k < band``
    with ``r_k ~ U(0.5, 1)`` and ``a ~ U(decay)``, rescaled to the target mass.
    The default band ``N // 3`` keeps every cubic product inside the retained
    modes.

    Line: a sum of two or three Gaussian wave packets placed away from
    ``xi = 0`` and from the band edge, so that the function is localized in
    the window and its spectrum is resolved.
    """
    n = geometry.n_modes
    if geometry.kind == "torus":
        b = max(1, min(n, band if band is not None else max(1, n // 3)))
        k = np.arange(b)
        a = rng.uniform(*decay)
        c = np.zeros(n, dtype=complex)
        c[:b] = rng.uniform(0.5, 1.0, b) * np.exp(2j * np.pi * rng.random(b)) * (1.0 + k) ** (-a)
        return rescale_to_mass(HardyState(geometry, c, sign), target_mass)
    return random_packet(geometry, rng, target_mass, sign, band)


def random_packet(geometry: Geometry, rng: np.random.Generator, target_mass: float,
                  sign: Sign = "focusing", band: int | None = None) -> HardyState:
    dxi = geometry.dxi
    b = band if band is not None else max(4, geometry.n_modes // 3)
    top = b * dxi
    xi = geometry.freqs
    c = np.zeros(geometry.n_modes, dtype=complex)
    count = int(rng.integers(2, 4))
    width_hi = max(0.3, min(0.7, top / 14.0))
    for _ in range(count):
        s = rng.uniform(0.6 * width_hi, width_hi)
        lo, hi = 6.5 * s, top - 6.5 * s
        centre = rng.uniform(lo, max(lo, hi))
        shift = rng.uniform(-0.25, 0.25) * geometry.half_length
        amp = rng.uniform(0.5, 1.0) * np.exp(2j * np.pi * rng.random())
        c += amp * np.exp(-0.5 * ((xi - centre) / s) ** 2 - 1j * xi * shift)
    return rescale_to_mass(HardyState(geometry, c, sign), target_mass)


# -------------------------------------------------------------- persistence

STATE_SCHEMA: dict = {
    "type": "object",
    "required": ["geometry", "sign", "coeffs"],
    "properties": {
        "geometry": {
            "type": "object",
            "required": ["kind", "n_modes", "grid_points"],
            "properties": {
                "kind": {"enum": ["torus", "line"]},
                "n_modes": {"type": "integer", "minimum": 1},
                "half_length": {"type": "number", "exclusiveMinimum": 0},
                "grid_points": {"type": "integer", "minimum": 4},
            },
        },
        "sign": {"enum": list(SIGNS)},
        "coeffs": {
            "type": "array",
            "items": {"type": "array", "minItems": 2, "maxItems": 2,
                      "items": {"type": "number"}},
        },
    },
}


def state_to_dict(q: HardyState) -> dict:
    return {
        "geometry": q.geometry.to_dict(),
        "sign": q.sign,
        "coeffs": [[float(z.real), float(z.imag)] for z in q.coeffs],
    }


def state_from_dict(d: dict) -> HardyState:
    import jsonschema

    jsonschema.validate(d, STATE_SCHEMA)
    g = Geometry.from_dict(d["geometry"])
    pairs: Sequence = d["coeffs"]
    if len(pairs) != g.n_modes:
        raise DimensionError(f"state lists {len(pairs)} coefficients for n_modes={g.n_modes}")
    c = np.array([complex(a, b) for a, b in pairs], dtype=complex)
    return HardyState(g, c, d["sign"])
