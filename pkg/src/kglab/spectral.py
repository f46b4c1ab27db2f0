"""Mixed Fourier calculus on a periodic box approximating R^2 x T.

The plane directions x = (x1, x2) live on a square of side ``box_period``
sampled with ``plane_points`` nodes per axis; the periodic direction y has
period 2*pi and carries the modes n = -mode_cutoff..mode_cutoff, sampled on
``2*mode_cutoff + 1`` nodes so that the y transform is a bijection.

Coefficients are stored in FFT order with shape ``(P, P, 2M + 1)`` and are
scaled so that Parseval holds with unit constant::

    sum |f(x, y)|^2 dV  ==  sum |c(xi, n)|^2

i.e. ``c = sqrt(vol) / npts * fftn(f)`` where ``vol = box_period**2 * 2*pi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridSpec",
    "Field",
    "ContractError",
    "forward_transform",
    "inverse_transform",
    "apply_lambda",
    "propagate",
    "weighted_derivative",
    "DERIVATIVES",
    "lp_norm",
    "real_values",
]

DERIVATIVES = ("dx1/lam", "dx2/lam", "n/lam", "dx1", "dx2", "dy")


class ContractError(ValueError):
    """Raised when an operation's input contract is violated."""


@dataclass(frozen=True)
class GridSpec:
    """Discretization of R^2 x T.

    Parameters
    ----------
    box_period : float
        Side of the periodic square standing in for R^2.
    plane_points : int
        Even number of nodes per plane axis.
    mode_cutoff : int
        Largest periodic mode |n| carried.
    dealias_fraction : float
        Fraction of the resolved band kept by the dealiasing mask, applied
        identically in all three directions.
    """

    box_period: float = 64 * math.pi
    plane_points: int = 256
    mode_cutoff: int = 8
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        if not self.box_period > 0:
            raise ContractError("box_period must be positive")
        if self.plane_points < 4 or self.plane_points % 2:
            raise ContractError("plane_points must be even and >= 4")
        if self.mode_cutoff < 1:
            raise ContractError("mode_cutoff must be >= 1")
        if not 0 < self.dealias_fraction <= 1:
            raise ContractError("dealias_fraction must lie in (0, 1]")

    # -- sizes -------------------------------------------------------------
    @property
    def y_points(self) -> int:
        return 2 * self.mode_cutoff + 1

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.plane_points, self.plane_points, self.y_points)

    @property
    def npts(self) -> int:
        return self.plane_points ** 2 * self.y_points

    @property
    def volume(self) -> float:
        return self.box_period ** 2 * 2 * math.pi

    @property
    def dk(self) -> float:
        """Plane lattice spacing 2*pi/L."""
        return 2 * math.pi / self.box_period

    @property
    def dx(self) -> float:
        return self.box_period / self.plane_points

    # -- frequency lattice -------------------------------------------------
    @cached_property
    def plane_index(self) -> np.ndarray:
        """Integer plane wavenumbers in FFT order (Nyquist is -P/2)."""
        return np.fft.fftfreq(self.plane_points, 1.0 / self.plane_points).astype(int)

    @cached_property
    def modes(self) -> np.ndarray:
        """Periodic modes n in FFT order."""
        return np.fft.fftfreq(self.y_points, 1.0 / self.y_points).astype(int)

    @cached_property
    def xi1(self) -> np.ndarray:
        return (self.dk * self.plane_index)[:, None, None]

    @cached_property
    def xi2(self) -> np.ndarray:
        return (self.dk * self.plane_index)[None, :, None]

    @cached_property
    def n(self) -> np.ndarray:
        return self.modes[None, None, :].astype(float)

    @cached_property
    def xi_abs(self) -> np.ndarray:
        return np.sqrt(self.xi1 ** 2 + self.xi2 ** 2)

    @cached_property
    def lam(self) -> np.ndarray:
        """Lambda_n(xi) = sqrt(1 + |xi|^2 + n^2) on every lattice node."""
        return np.sqrt(1.0 + self.xi1 ** 2 + self.xi2 ** 2 + self.n ** 2)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        kmax = self.dealias_fraction * (self.plane_points // 2)
        nmax = self.dealias_fraction * self.mode_cutoff
        a = np.abs(self.plane_index) <= kmax
        # the Nyquist row has no symmetric partner and is always dropped
        a &= self.plane_index != -(self.plane_points // 2)
        b = np.abs(self.modes) <= nmax
        return a[:, None, None] & a[None, :, None] & b[None, None, :]

    @cached_property
    def lam_max(self) -> float:
        """Largest Lambda on the dealiased band."""
        return float(self.lam[self.dealias_mask].max())

    @property
    def h_max(self) -> float:
        """Step budget for the interaction-picture integrator.

        Interaction phases reach 3*lam_max; keeping h*3*lam_max <= 6 leaves
        RK4 well inside its stability region.
        """
        return 2.0 / self.lam_max

    # -- physical grid -----------------------------------------------------
    def plane_coords(self, oversample: int = 1) -> np.ndarray:
        """Node coordinates on (-L/2, L/2] in minimal-image convention."""
        m = self.plane_points * oversample
        x = np.arange(m) * (self.box_period / m)
        return np.where(x > self.box_period / 2, x - self.box_period, x)

    def y_coords(self, oversample: int = 1) -> np.ndarray:
        m = self.y_points * oversample
        return np.arange(m) * (2 * math.pi / m)

    def radius(self, oversample: int = 1) -> np.ndarray:
        """|x| at every plane node, shape (P, P, 1)."""
        x = self.plane_coords(oversample)
        return np.sqrt(x[:, None] ** 2 + x[None, :] ** 2)[:, :, None]

    def mesh(self, oversample: int = 1):
        """Broadcastable (x1, x2, y) coordinate arrays."""
        x = self.plane_coords(oversample)
        y = self.y_coords(oversample)
        return x[:, None, None], x[None, :, None], y[None, None, :]


@dataclass(frozen=True, eq=False)
class Field:
    """Spectral coefficients of a function on the discretized R^2 x T."""

    grid: GridSpec
    coeffs: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.shape != self.grid.shape:
            raise ContractError(f"coefficient shape {c.shape} != grid shape {self.grid.shape}")
        object.__setattr__(self, "coeffs", c.astype(complex, copy=False))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "Field":
        return cls(grid, np.zeros(grid.shape, complex))

    @classmethod
    def mode(cls, grid: GridSpec, k1: int, k2: int, n: int, amplitude: complex = 1.0) -> "Field":
        """Single lattice mode (k1, k2 in units of 2*pi/L) with given coefficient."""
        c = np.zeros(grid.shape, complex)
        P, Ny = grid.plane_points, grid.y_points
        c[k1 % P, k2 % P, n % Ny] = amplitude
        return cls(grid, c)

    def _like(self, coeffs) -> "Field":
        return Field(self.grid, coeffs)

    def __add__(self, other: "Field") -> "Field":
        return self._like(self.coeffs + other.coeffs)

    def __sub__(self, other: "Field") -> "Field":
        return self._like(self.coeffs - other.coeffs)

    def __neg__(self) -> "Field":
        return self._like(-self.coeffs)

    def __mul__(self, s) -> "Field":
        return self._like(self.coeffs * s)

    __rmul__ = __mul__

    def multiply(self, symbol) -> "Field":
        """Apply a Fourier multiplier given on the lattice."""
        return self._like(self.coeffs * symbol)

    def conj(self) -> "Field":
        """Coefficients of the complex conjugate function: conj(c(-xi, -n))."""
        c = np.conj(self.coeffs)
        for ax in range(3):
            c = np.roll(np.flip(c, axis=ax), 1, axis=ax)
        return self._like(c)

    def real_part(self) -> "Field":
        return self._like(0.5 * (self.coeffs + self.conj().coeffs))

    def dealiased(self) -> "Field":
        return self._like(np.where(self.grid.dealias_mask, self.coeffs, 0))

    def l2(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def values(self, oversample: int = 1) -> np.ndarray:
        return inverse_transform(self, oversample)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.coeffs).all())


# -- transforms ---------------------------------------------------------------

def forward_transform(f, grid: GridSpec) -> Field:
    """Sampled function on the base physical grid -> spectral Field."""
    f = np.asarray(f)
    if f.shape != grid.shape:
        raise ContractError(f"sample shape {f.shape} != grid shape {grid.shape}")
    c = sfft.fftn(f) * (math.sqrt(grid.volume) / grid.npts)
    return Field(grid, c)


def _pad_axis(c: np.ndarray, axis: int, m: int) -> np.ndarray:
    """Zero-pad an FFT-ordered axis to length m, splitting an even Nyquist."""
    n = c.shape[axis]
    if m == n:
        return c
    shape = list(c.shape)
    shape[axis] = m
    out = np.zeros(shape, c.dtype)
    h = (n + 1) // 2  # nonnegative frequencies 0..h-1
    sl = [slice(None)] * c.ndim

    def take(s):
        sl2 = list(sl)
        sl2[axis] = s
        return tuple(sl2)

    out[take(slice(0, h))] = c[take(slice(0, h))]
    out[take(slice(m - (n - h), m))] = c[take(slice(h, n))]
    if n % 2 == 0:
        nyq = c[take(slice(n // 2, n // 2 + 1))]
        out[take(slice(m - n // 2, m - n // 2 + 1))] = 0.5 * nyq
        out[take(slice(n // 2, n // 2 + 1))] = 0.5 * nyq
    return out


def inverse_transform(f: Field, oversample: int = 1) -> np.ndarray:
    """Physical samples, optionally on an ``oversample``-times finer grid."""
    grid = f.grid
    c = f.coeffs
    if oversample != 1:
        for ax, m in enumerate(grid.shape):
            c = _pad_axis(c, ax, m * oversample)
    npts = c.size
    return sfft.ifftn(c) * (npts / math.sqrt(grid.volume))


def real_values(f: Field, oversample: int = 1) -> np.ndarray:
    """Physical samples of a Hermitian-symmetric Field via a real transform.

    Only the n >= 0 half of the spectrum is read, so the result is the real
    part of ``inverse_transform`` for any input.
    """
    grid = f.grid
    c = f.coeffs[:, :, : grid.mode_cutoff + 1]
    shape = tuple(m * oversample for m in grid.shape)
    if oversample != 1:
        c = _pad_axis(_pad_axis(c, 0, shape[0]), 1, shape[1])
    half = np.zeros(c.shape[:2] + (shape[2] // 2 + 1,), complex)
    half[:, :, : c.shape[2]] = c
    npts = shape[0] * shape[1] * shape[2]
    return sfft.irfftn(half, s=shape) * (npts / math.sqrt(grid.volume))


# -- diagonal multipliers -------------------------------------------------------

def apply_lambda(f: Field, power: float = 1.0) -> Field:
    """Multiply by Lambda_n(xi)**power."""
    if not f.is_finite():
        raise ContractError("non-finite coefficients")
    return f.multiply(f.grid.lam ** power)


def propagate(f: Field, t: float, sign: int = 1) -> Field:
    """Unitary group exp(i*sign*t*Lambda) applied coefficient-wise."""
    if sign not in (1, -1):
        raise ContractError("sign must be +1 or -1")
    return f.multiply(np.exp(1j * sign * t * f.grid.lam))


def derivative_symbol(grid: GridSpec, which: str) -> np.ndarray:
    g = grid
    table = {
        "dx1/lam": lambda: 1j * g.xi1 / g.lam,
        "dx2/lam": lambda: 1j * g.xi2 / g.lam,
        "n/lam": lambda: g.n / g.lam,
        "dx1": lambda: 1j * g.xi1 + 0 * g.n,
        "dx2": lambda: 1j * g.xi2 + 0 * g.n,
        "dy": lambda: 1j * g.n + 0 * g.xi1,
    }
    try:
        return np.broadcast_to(table[which](), g.shape)
    except KeyError:
        raise ContractError(f"unknown derivative {which!r}; expected one of {DERIVATIVES}") from None


def weighted_derivative(f: Field, which: str) -> Field:
    """Plain or Lambda-weighted derivative multiplier, see ``DERIVATIVES``."""
    return f.multiply(derivative_symbol(f.grid, which))


# -- norms ----------------------------------------------------------------------

def lp_norm(f: Field | np.ndarray, p: float, grid: GridSpec | None = None, oversample: int | None = None) -> float:
    """L^p norm on the box by grid quadrature.

    L^inf is a grid maximum on a 2x oversampled grid unless ``oversample``
    says otherwise; finite p uses the base grid.  Physical sample arrays
    may be passed directly together with their grid.
    """
    if isinstance(f, Field):
        grid = f.grid
        if oversample is None:
            oversample = 2 if math.isinf(p) else 1
        vals = inverse_transform(f, oversample)
    else:
        vals = np.asarray(f)
    a = np.abs(vals)
    if math.isinf(p):
        return float(a.max())
    dv = grid.volume / a.size
    if p == 2:
        return float(math.sqrt(np.sum(a * a) * dv))
    return float((np.sum(a ** p) * dv) ** (1.0 / p))
