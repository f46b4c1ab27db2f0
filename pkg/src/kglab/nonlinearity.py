"""Quadratic quasilinear nonlinearity F(u, du, d^2 u).

    F = sum_{j,k=0..3} G^{jk}(u, du) d_j d_k u + Q(u, du),
    G^{jk} = sum_l g^{jkl} d_l u + h^{jk} u,

with index 0 the time direction, 1, 2 the plane and 3 the periodic
direction.  G^{00} vanishes identically, so the only time derivatives
needed are u_t and its spatial gradient; F is explicit in (u, u_t).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.fft as sfft

from .spectral import ContractError, Field, GridSpec, real_values

SPATIAL = (1, 2, 3)


class AliasingError(ContractError):
    """The grid's dealias rule leaves too little margin for a quadratic product."""


@dataclass(frozen=True, eq=False)
class NonlinearityCoeffs:
    """Constants g^{jkl}, h^{jk} and the symmetric form q on (u, u_t, u_1, u_2, u_3)."""

    g: np.ndarray = dc_field(default_factory=lambda: np.zeros((4, 4, 4)))
    h: np.ndarray = dc_field(default_factory=lambda: np.zeros((4, 4)))
    q: np.ndarray = dc_field(default_factory=lambda: np.zeros((5, 5)))

    def __post_init__(self):
        g = np.asarray(self.g, float)
        h = np.asarray(self.h, float)
        q = np.asarray(self.q, float)
        if g.shape != (4, 4, 4) or h.shape != (4, 4) or q.shape != (5, 5):
            raise ContractError("coefficient arrays must have shapes (4,4,4), (4,4), (5,5)")
        if not np.array_equal(g, g.transpose(1, 0, 2)):
            raise ContractError("g^{jkl} must be symmetric in (j, k)")
        if not np.array_equal(h, h.T):
            raise ContractError("h^{jk} must be symmetric")
        if np.any(g[0, 0] != 0) or h[0, 0] != 0:
            raise ContractError("G^{00} must vanish: g^{00l} = h^{00} = 0")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "h", h)
        # only the symmetric part of q contributes
        object.__setattr__(self, "q", 0.5 * (q + q.T))

    @property
    def is_zero(self) -> bool:
        return not (self.g.any() or self.h.any() or self.q.any())

    @property
    def has_quasilinear(self) -> bool:
        return bool(self.g.any() or self.h.any())

    def to_dict(self) -> dict:
        return {"g": self.g.tolist(), "h": self.h.tolist(), "q": self.q.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NonlinearityCoeffs":
        return cls(np.array(d["g"]), np.array(d["h"]), np.array(d["q"]))


def _mixed():
    g = np.zeros((4, 4, 4))
    h = np.zeros((4, 4))
    q = np.zeros((5, 5))
    for j in SPATIAL:
        g[j, j, 0] = 0.5            # G^{jj} += u_t / 2
    g[0, 1, 1] = g[1, 0, 1] = 0.2   # G^{01} += u_1 / 5
    h[1, 2] = h[2, 1] = 0.3
    h[3, 3] = -0.4
    q[0, 0] = 1.0                   # u^2
    q[1, 1] = -1.0                  # -(u_t)^2
    q[0, 4] = q[4, 0] = 0.25        # u u_y / 2
    return NonlinearityCoeffs(g, h, q)


def preset(name: str) -> NonlinearityCoeffs:
    """Named coefficient sets: ``zero``, ``dt2`` (Q = u_t^2), ``u2`` (Q = u^2), ``mixed``."""
    if name == "zero":
        return NonlinearityCoeffs()
    if name == "dt2":
        q = np.zeros((5, 5))
        q[1, 1] = 1.0
        return NonlinearityCoeffs(q=q)
    if name == "u2":
        q = np.zeros((5, 5))
        q[0, 0] = 1.0
        return NonlinearityCoeffs(q=q)
    if name == "mixed":
        return _mixed()
    raise ContractError(f"unknown nonlinearity preset {name!r}")


PRESETS = ("zero", "dt2", "u2", "mixed")


def random_coeffs(rng: np.random.Generator, scale: float = 1.0) -> NonlinearityCoeffs:
    g = rng.standard_normal((4, 4, 4)) * scale
    g = 0.5 * (g + g.transpose(1, 0, 2))
    g[0, 0] = 0
    h = rng.standard_normal((4, 4)) * scale
    h = 0.5 * (h + h.T)
    h[0, 0] = 0
    q = rng.standard_normal((5, 5)) * scale
    return NonlinearityCoeffs(g, h, 0.5 * (q + q.T))


# -- spectral helpers -------------------------------------------------------------

def check_dealias_margin(grid: GridSpec) -> None:
    """Raise unless products of dealiased fields alias only onto discarded modes."""
    kp = math.floor(grid.dealias_fraction * (grid.plane_points // 2))
    kn = math.floor(grid.dealias_fraction * grid.mode_cutoff)
    if 3 * kp >= grid.plane_points or 3 * kn >= grid.y_points:
        raise AliasingError(
            f"dealias_fraction={grid.dealias_fraction} keeps |k|<={kp}, |n|<={kn}; "
            f"quadratic products need 3*{kp} < {grid.plane_points} and 3*{kn} < {grid.y_points}"
        )


def spatial_symbol(grid: GridSpec, j: int) -> np.ndarray:
    """i*xi_1, i*xi_2 or i*n for j = 1, 2, 3."""
    return 1j * (grid.xi1, grid.xi2, grid.n)[j - 1]


def forward_real(values: np.ndarray, grid: GridSpec) -> Field:
    """Transform a real sample array using a real FFT."""
    M = grid.mode_cutoff
    half = sfft.rfftn(values) * (math.sqrt(grid.volume) / grid.npts)
    c = np.empty(grid.shape, complex)
    c[:, :, : M + 1] = half[:, :, : M + 1]
    tail = np.conj(half[:, :, 1 : M + 1])
    # c(k1, k2, -n) = conj(c(-k1, -k2, n))
    tail = np.roll(np.flip(tail, axis=(0, 1)), 1, axis=(0, 1))
    c[:, :, M + 1 :] = tail[:, :, ::-1]
    return Field(grid, c)


class PhysicalDerivatives:
    """Lazily evaluated physical-space derivatives of a real state (u, u_t).

    ``first(l)`` is d_l u (l = 0 gives u_t); ``second(j, k)`` is d_j d_k u for
    (j, k) != (0, 0).
    """

    def __init__(self, u: Field, udot: Field, oversample: int = 1):
        self.u = u
        self.udot = udot
        self.grid = u.grid
        self.oversample = oversample
        self._cache: dict = {}

    def _get(self, key, make):
        if key not in self._cache:
            self._cache[key] = real_values(make(), self.oversample)
        return self._cache[key]

    def value(self) -> np.ndarray:
        return self._get("u", lambda: self.u)

    def first(self, l: int) -> np.ndarray:
        if l == 0:
            return self._get("ut", lambda: self.udot)
        return self._get(("d", l), lambda: self.u.multiply(spatial_symbol(self.grid, l)))

    def second(self, j: int, k: int) -> np.ndarray:
        j, k = sorted((j, k))
        if j == 0 and k == 0:
            raise ContractError("d_t^2 u is never required: G^{00} = 0")
        if j == 0:
            return self._get(("dt", k), lambda: self.udot.multiply(spatial_symbol(self.grid, k)))
        return self._get(
            ("dd", j, k),
            lambda: self.u.multiply(spatial_symbol(self.grid, j) * spatial_symbol(self.grid, k)),
        )

    def jet(self, i: int) -> np.ndarray:
        """Component i of (u, u_t, u_1, u_2, u_3)."""
        return self.value() if i == 0 else self.first(i - 1)


def g_field(d: PhysicalDerivatives, coeffs: NonlinearityCoeffs, j: int, k: int):
    """G^{jk}(u, du) as a physical array, or None when it vanishes identically."""
    out = None
    for l in range(4):
        c = coeffs.g[j, k, l]
        if c:
            term = c * d.first(l)
            out = term if out is None else out + term
    if coeffs.h[j, k]:
        term = coeffs.h[j, k] * d.value()
        out = term if out is None else out + term
    return out


def nonlinearity_values(d: PhysicalDerivatives, coeffs: NonlinearityCoeffs) -> np.ndarray:
    grid = d.grid
    shape = tuple(m * d.oversample for m in grid.shape)
    F = np.zeros(shape)
    for j in range(4):
        for k in range(4):
            if j == 0 and k == 0:
                continue
            G = g_field(d, coeffs, j, k)
            if G is not None:
                F += G * d.second(j, k)
    q = coeffs.q
    for a in range(5):
        for b in range(a, 5):
            c = q[a, b] if a == b else 2 * q[a, b]
            if c:
                F += c * d.jet(a) * d.jet(b)
    return F


def evaluate_nonlinearity(u: Field, udot: Field, coeffs: NonlinearityCoeffs) -> Field:
    """Dealiased spectral coefficients of F(u, du, d^2 u) for real u, u_t."""
    grid = u.grid
    if coeffs.is_zero:
        return Field.zeros(grid)
    check_dealias_margin(grid)
    d = PhysicalDerivatives(u.dealiased(), udot.dealiased())
    return forward_real(nonlinearity_values(d, coeffs), grid).dealiased()
