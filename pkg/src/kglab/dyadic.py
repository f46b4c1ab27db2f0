"""Smooth dyadic cutoffs and Littlewood-Paley projections on R^2 x T.

The base bump ``phi`` equals 1 on [-5/4, 5/4] and vanishes outside
[-8/5, 8/5].  From it::

    phi_k(r)  = phi(r / 2**k) - phi(r / 2**(k-1))        (annulus 2**k * [5/8, 8/5])
    psi_{-1}  = phi(2 r),   psi_l = phi_l  (l >= 0)

``R_k`` multiplies plane frequencies by psi_k(|xi|), ``S_l`` multiplies
periodic modes by psi_l(|n|), and spatial atoms multiply by phi_j(|x|).
Interval sums psi_I are evaluated through the telescoped form so that
they are exactly 1 where the partition says so.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .spectral import Field, GridSpec, inverse_transform, forward_transform, lp_norm

PLATEAU = 5.0 / 4.0
SUPPORT = 8.0 / 5.0


def smoothstep_exp(s):
    """C^infinity step: 0 for s <= 0, 1 for s >= 1, exp(-1/s) blend between."""
    s = np.asarray(s, float)
    out = np.where(s >= 1.0, 1.0, 0.0)
    mid = (s > 0.0) & (s < 1.0)
    if np.any(mid):
        sm = s[mid]
        a = np.exp(-1.0 / sm)
        b = np.exp(-1.0 / (1.0 - sm))
        out[mid] = a / (a + b)
    return out


MOLLIFIERS: dict[str, Callable] = {"exp": smoothstep_exp}


@dataclass(frozen=True)
class DyadicCutoffs:
    """The bump phi and the families derived from it."""

    step: Callable = smoothstep_exp

    def phi(self, r):
        r = np.abs(np.asarray(r, float))
        return self.step((SUPPORT - r) / (SUPPORT - PLATEAU))

    def phi_k(self, r, k: int):
        """phi(r / 2**k) - phi(r / 2**(k-1)), any integer k."""
        r = np.abs(np.asarray(r, float))
        return self.phi(r / 2.0 ** k) - self.phi(r / 2.0 ** (k - 1))

    def psi(self, r, k: int):
        """psi_k for k >= -1."""
        if k < -1:
            raise ValueError("shell index must be >= -1")
        if k == -1:
            return self.phi(2.0 * np.abs(np.asarray(r, float)))
        return self.phi_k(r, k)

    def psi_interval(self, r, lo: int, hi: int):
        """psi_I for I = [lo, hi]; indices below -1 are dropped."""
        lo = max(lo, -1)
        if hi < lo:
            return np.zeros_like(np.asarray(r, float))
        r = np.abs(np.asarray(r, float))
        top = self.phi(r / 2.0 ** hi)
        if lo == -1:
            return top
        return top - self.phi(r / 2.0 ** (lo - 1))

    def atom(self, r, j: int, floor: int | None = None, top: int | None = None):
        """Spatial atom phi_j(|x|); the floor shell absorbs all j <= floor
        and the top shell absorbs everything beyond it."""
        r = np.abs(np.asarray(r, float))
        if floor is not None and j == floor:
            return self.phi(r / 2.0 ** j)
        if top is not None and j == top:
            return 1.0 - self.phi(r / 2.0 ** (j - 1))
        return self.phi_k(r, j)


def build_cutoffs(smoothness_profile: str = "exp") -> DyadicCutoffs:
    try:
        return DyadicCutoffs(MOLLIFIERS[smoothness_profile])
    except KeyError:
        raise ValueError(f"unknown mollifier {smoothness_profile!r}") from None


CUTOFFS = build_cutoffs()


@dataclass(frozen=True)
class AtomIndex:
    """One (j, k, l) atom of the space-frequency decomposition."""

    j: int
    k: int
    l: int
    empty: bool = False


# -- shell ranges -------------------------------------------------------------

def _as_interval(s):
    if isinstance(s, tuple):
        return s
    return (s, s)


def plane_shell_max(grid: GridSpec) -> int:
    """Largest k whose annulus meets the resolved plane band."""
    kmax = grid.dk * (grid.plane_points // 2)
    return max(-1, math.ceil(math.log2(kmax / (5.0 / 8.0))))


def mode_shell_max(grid: GridSpec) -> int:
    return max(-1, math.ceil(math.log2(grid.mode_cutoff / (5.0 / 8.0))))


SPATIAL_FLOOR = 0


def spatial_shell_max(grid: GridSpec) -> int:
    """Largest j with 2**j <= box_period / 2; that shell absorbs the rest of the box."""
    return int(math.floor(math.log2(grid.box_period / 2)))


def spatial_shells(grid: GridSpec) -> range:
    return range(SPATIAL_FLOOR, spatial_shell_max(grid) + 1)


# -- projections -----------------------------------------------------------------

def frequency_symbol(grid: GridSpec, k, l, cut: DyadicCutoffs = CUTOFFS) -> np.ndarray:
    """psi_k(|xi|) * psi_l(|n|) on the lattice; k, l are ints or (lo, hi)."""
    klo, khi = _as_interval(k)
    llo, lhi = _as_interval(l)
    a = cut.psi_interval(grid.xi_abs, klo, khi)
    b = cut.psi_interval(np.abs(grid.n), llo, lhi)
    return a * b


def project_frequency(f: Field, k, l, cut: DyadicCutoffs = CUTOFFS) -> Field:
    """R_k S_l f; each of k and l may be a shell index or an interval (lo, hi)."""
    return f.multiply(frequency_symbol(f.grid, k, l, cut))


def atom_weight(grid: GridSpec, j: int, oversample: int = 1, cut: DyadicCutoffs = CUTOFFS) -> np.ndarray | None:
    """phi_j(|x|) on the physical grid, or None if shell j is out of range."""
    top = spatial_shell_max(grid)
    if j < SPATIAL_FLOOR or j > top:
        return None
    return cut.atom(grid.radius(oversample), j, floor=SPATIAL_FLOOR, top=top)


def project_space(f: Field, j: int, cut: DyadicCutoffs = CUTOFFS) -> Field:
    """phi_j(|x|) * f computed in physical space.

    Shells outside ``spatial_shells(grid)`` give the zero Field.
    """
    w = atom_weight(f.grid, j, cut=cut)
    if w is None:
        return Field.zeros(f.grid)
    return forward_transform(inverse_transform(f) * w, f.grid)


def atom_index(grid: GridSpec, j: int, k: int, l: int) -> AtomIndex:
    empty = not (
        SPATIAL_FLOOR <= j <= spatial_shell_max(grid)
        and -1 <= k <= plane_shell_max(grid)
        and -1 <= l <= mode_shell_max(grid)
    )
    return AtomIndex(j, k, l, empty)


# -- inequality probes -------------------------------------------------------------

def _grad_x_abs(f: Field, oversample: int) -> np.ndarray:
    g = f.grid
    a = inverse_transform(f.multiply(1j * g.xi1), oversample)
    b = inverse_transform(f.multiply(1j * g.xi2), oversample)
    return np.sqrt(np.abs(a) ** 2 + np.abs(b) ** 2)


def verify_finite_band(f: Field, k: int, l: int, p: float) -> dict | None:
    """Finite-band ratios for R_k S_l f in L^p.

    Returns ``{"x": ||grad_x g||_p / (2**k ||g||_p), "y": ||d_y g||_p / (2**l ||g||_p)}``
    with g = R_k S_l f, or None when the projection vanishes.
    """
    g = project_frequency(f, k, l)
    grid = f.grid
    os = 2 if math.isinf(p) else 1
    base = lp_norm(inverse_transform(g, os), p, grid)
    if base == 0.0 or g.l2() < 1e-300:
        return None
    gx = lp_norm(_grad_x_abs(g, os), p, grid)
    gy = lp_norm(inverse_transform(g.multiply(1j * grid.n), os), p, grid)
    return {"x": gx / (2.0 ** k * base), "y": gy / (2.0 ** l * base)}


def verify_bernstein(f: Field, k: int, l: int, r: float) -> float | None:
    """||R_k S_l f||_{L^r} / (2**((k + l/2)(1 - 2/r)) ||f||_{L^2}); None for f = 0."""
    norm2 = f.l2()
    if norm2 == 0.0:
        return None
    g = project_frequency(f, k, l)
    expo = (k + l / 2.0) * (1.0 - 2.0 / r)
    return lp_norm(g, r) / (2.0 ** expo * norm2)
