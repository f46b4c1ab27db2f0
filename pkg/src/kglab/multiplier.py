"""Bilinear Fourier symbols of the nonlinearity in the U_+/U_- variables.

Writing u and its derivatives through

    u_t^ = (U_+^ + U_-^) / 2,    u^ = (U_+^ - U_-^) / (-2 i Lambda),

the transform of F becomes

    F^(xi, n) = sum_{mu, nu} sum_{m, eta} M^{mu nu}_{n,m}(xi, eta) U_mu^(xi - eta, n - m) U_nu^(eta, m)

(with the grid's 1/sqrt(volume) product normalization).  The symbols are
generated with sympy from (g, h, q): the G^{jk} factor sits in the first
slot at (xi - eta, n - m) and the second-derivative or Q factor in the
second slot at (eta, m).  Nothing here is hand-transcribed.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import sympy as sp

from .nonlinearity import NonlinearityCoeffs, check_dealias_margin
from .spectral import Field

SIGNS = (1, -1)
CHANNELS = tuple((mu, nu) for mu in SIGNS for nu in SIGNS)

# slot-1 frequency (a1, a2, p) = (xi - eta, n - m); slot-2 frequency (b1, b2, m) = (eta, m)
a1, a2, p, b1, b2, m = sp.symbols("a1 a2 p b1 b2 m", real=True)
SLOT_VARS = ((a1, a2, p), (b1, b2, m))


def _lam(z):
    return sp.sqrt(1 + z[0] ** 2 + z[1] ** 2 + z[2] ** 2)


def _first(z, sign, l):
    """Coefficient of U_sign^ in (d_l u)^ at frequency z; l = 0 is the time slot,
    l = -1 the undifferentiated value."""
    L = _lam(z)
    if l == 0:
        return sp.Rational(1, 2)
    base = sign * sp.I / (2 * L)          # u^ = i(U_+^ - U_-^)/(2 Lambda)
    if l == -1:
        return base
    return sp.I * z[l - 1] * base


def _second(z, sign, j, k):
    """Coefficient of U_sign^ in (d_j d_k u)^, (j, k) != (0, 0)."""
    j, k = sorted((j, k))
    if j == 0:
        return sp.I * z[k - 1] * sp.Rational(1, 2)
    return sp.I * z[j - 1] * sp.I * z[k - 1] * _first(z, sign, -1)


def _jet(z, sign, i):
    """Component i of (u, u_t, u_1, u_2, u_3)."""
    return _first(z, sign, -1 if i == 0 else i - 1)


def _term_list(coeffs: NonlinearityCoeffs, mu: int, nu: int):
    """(constant, slot-1 factor, slot-2 factor) for every nonzero term."""
    za, zb = SLOT_VARS
    out = []
    for j in range(4):
        for k in range(4):
            if j == 0 and k == 0:
                continue
            second = _second(zb, nu, j, k)
            for l in range(4):
                c = coeffs.g[j, k, l]
                if c:
                    out.append((float(c), _first(za, mu, l), second))
            if coeffs.h[j, k]:
                out.append((float(coeffs.h[j, k]), _first(za, mu, -1), second))
    for a in range(5):
        for b in range(5):
            if coeffs.q[a, b]:
                out.append((float(coeffs.q[a, b]), _jet(za, mu, a), _jet(zb, nu, b)))
    return out


def multiplier_symbols(coeffs: NonlinearityCoeffs) -> dict:
    """Sympy expressions M^{mu nu} in the slot variables (a1, a2, p, b1, b2, m)."""
    out = {}
    for ch in CHANNELS:
        # exact binary rationals keep the float coefficients bit-faithful
        out[ch] = sp.Add(*(sp.Rational(c) * f1 * f2 for c, f1, f2 in _term_list(coeffs, *ch)))
    return out


def in_xi_eta(expr):
    """Rewrite a slot-variable symbol in (xi, eta, n, m) coordinates."""
    x1, x2, e1, e2, n = sp.symbols("xi1 xi2 eta1 eta2 n", real=True)
    return expr.subs({a1: x1 - e1, a2: x2 - e2, p: n - m, b1: e1, b2: e2}, simultaneous=True)


def _families():
    La, Lb = _lam(SLOT_VARS[0]), _lam(SLOT_VARS[1])
    first = [sp.Integer(1), 1 / La, a1 / La, a2 / La, p / La]
    second = [sp.Integer(1), b1, b2, m, 1 / Lb, b1 / Lb, b2 / Lb, m / Lb,
              b1 * b1 / Lb, b1 * b2 / Lb, b2 * b2 / Lb, m * b1 / Lb, m * b2 / Lb, m * m / Lb]
    return first, second


def _member(expr, family) -> bool:
    for f in family:
        r = sp.cancel(expr / f)
        if r.free_symbols.isdisjoint({a1, a2, p, b1, b2, m}):
            return True
    return False


def check_family_membership(coeffs: NonlinearityCoeffs) -> list:
    """Terms whose slot factors fall outside the admissible factor families
    (constant multiples of 1, 1/Lambda, zeta/Lambda, ... in each slot).  Empty
    list means every generated term is admissible."""
    first, second = _families()
    bad = []
    for ch in CHANNELS:
        for c, f1, f2 in _term_list(coeffs, *ch):
            if not (_member(f1, first) and _member(f2, second)):
                bad.append((ch, c, f1, f2))
    return bad


@lru_cache(maxsize=32)
def _lambdified(key):
    coeffs = NonlinearityCoeffs.from_dict(key_to_dict(key))
    syms = multiplier_symbols(coeffs)
    args = (a1, a2, p, b1, b2, m)
    return {ch: sp.lambdify(args, e, "numpy") for ch, e in syms.items()}


def dict_to_key(d: dict):
    return tuple(tuple(np.ravel(d[name]).tolist()) for name in ("g", "h", "q"))


def key_to_dict(key) -> dict:
    g, h, q = key
    return {"g": np.reshape(g, (4, 4, 4)), "h": np.reshape(h, (4, 4)), "q": np.reshape(q, (5, 5))}


def numeric_symbols(coeffs: NonlinearityCoeffs) -> dict:
    """Vectorized callables M^{mu nu}(a1, a2, p, b1, b2, m)."""
    return _lambdified(dict_to_key(coeffs.to_dict()))


def spectral_nonlinearity(U: Field, coeffs: NonlinearityCoeffs) -> Field:
    """F^ assembled from the symbols by direct lattice convolution.

    Cost is quadratic in the number of retained modes; intended for small
    grids as an independent route to ``evaluate_nonlinearity``.
    """
    grid = U.grid
    check_dealias_margin(grid)
    mask = grid.dealias_mask
    Up = U.coeffs * mask
    Um = U.conj().coeffs * mask
    idx = np.argwhere(mask)
    P = grid.plane_points
    k1 = grid.plane_index[idx[:, 0]]
    k2 = grid.plane_index[idx[:, 1]]
    nn = grid.modes[idx[:, 2]]
    dk = grid.dk
    vals = {1: Up[mask], -1: Um[mask]}
    syms = numeric_symbols(coeffs)
    out = np.zeros(grid.shape, complex)
    # all ordered pairs (slot1 = i, slot2 = j); output index is the sum
    A = (k1[:, None] * dk, k2[:, None] * dk, nn[:, None])
    B = (k1[None, :] * dk, k2[None, :] * dk, nn[None, :])
    s1 = k1[:, None] + k1[None, :]
    s2 = k2[:, None] + k2[None, :]
    s3 = nn[:, None] + nn[None, :]
    total = np.zeros(s1.shape, complex)
    for (mu, nu), fn in syms.items():
        M = np.broadcast_to(fn(*A, *B), s1.shape)
        total += M * vals[mu][:, None] * vals[nu][None, :]
    half = P // 2
    keep = (np.abs(s1) < half) & (np.abs(s2) < half) & (np.abs(s3) <= grid.mode_cutoff)
    np.add.at(out, (s1[keep] % P, s2[keep] % P, s3[keep] % grid.y_points), total[keep])
    out /= math.sqrt(grid.volume)
    return Field(grid, out * mask)
