"""Scalar functionals tracked along a solution.

Sobolev norms, the atom-weighted Z and Z_J norms, the modified energy with
its quasilinear correction, the sup-norm decay functional theta, and
log-log decay fits.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import dyadic
from .nonlinearity import NonlinearityCoeffs, PhysicalDerivatives, g_field, spatial_symbol, SPATIAL
from .spectral import ContractError, Field, GridSpec, inverse_transform, real_values


class EnergyFormError(ArithmeticError):
    """The quasilinear correction makes the energy form indefinite."""


# -- Sobolev ---------------------------------------------------------------------

def sobolev_norm(f: Field, N: float) -> float:
    """(sum (1 + |xi|^2 + n^2)^N |c|^2)^(1/2)."""
    w = f.grid.lam ** (2 * N)
    return float(math.sqrt(np.sum(w * np.abs(f.coeffs) ** 2)))


# -- Z norms -----------------------------------------------------------------------

@dataclass
class AtomTable:
    """Shell L^2 masses of R_k S_l f and of its spatial atoms.

    ``plain[(k, l)]`` is ||R_k S_l f||_2 and ``atoms[(k, l)][j]`` is
    ||phi_j(x) R_k S_l f||_2 for j = 1..j_max.
    """

    plain: dict
    atoms: dict
    j_max: int

    def weighted(self, weight) -> tuple[float, tuple[int, int]]:
        best, arg = 0.0, (-1, -1)
        for (k, l), a in self.plain.items():
            s = a + sum(weight(j) * b for j, b in self.atoms[(k, l)].items())
            v = 2.0 ** (9 * (k + l)) * s
            if v > best:
                best, arg = v, (k, l)
        return best, arg


def atom_table(f: Field, k_max: int | None = None, l_max: int | None = None,
               j_max: int | None = None) -> AtomTable:
    grid = f.grid
    k_max = dyadic.plane_shell_max(grid) if k_max is None else k_max
    l_max = dyadic.mode_shell_max(grid) if l_max is None else l_max
    j_top = dyadic.spatial_shell_max(grid)
    j_max = j_top if j_max is None else min(j_max, j_top)
    weights = {j: dyadic.atom_weight(grid, j) for j in range(1, j_max + 1)}
    dv = grid.volume / grid.npts
    plain, atoms = {}, {}
    for k in range(-1, k_max + 1):
        for l in range(-1, l_max + 1):
            g = dyadic.project_frequency(f, k, l)
            plain[(k, l)] = g.l2()
            if plain[(k, l)] == 0.0:
                atoms[(k, l)] = {}
                continue
            a2 = np.abs(inverse_transform(g)) ** 2
            atoms[(k, l)] = {
                j: float(math.sqrt(np.sum(w ** 2 * a2) * dv)) for j, w in weights.items()
            }
    return AtomTable(plain, atoms, j_max)


def z_norm_detail(f: Field, k_max=None, l_max=None, j_max=None) -> tuple[float, tuple[int, int]]:
    """Z norm and the (k, l) attaining the sup."""
    return atom_table(f, k_max, l_max, j_max).weighted(lambda j: 2.0 ** j)


def z_norm(f: Field, k_max=None, l_max=None, j_max=None) -> float:
    """sup_{k,l} 2^{9(k+l)} [||R_k S_l f|| + sum_{j>=1} 2^j ||phi_j R_k S_l f||]."""
    return z_norm_detail(f, k_max, l_max, j_max)[0]


def z_j_weight(J: int):
    return lambda j: 2.0 ** min(j, 2 * J - j)


def z_j_norm(f: Field, J: int, k_max=None, l_max=None, j_max=None) -> float:
    """Z norm with spatial weight 2^min(j, 2J - j)."""
    if J < 0:
        raise ContractError("J must be nonnegative")
    return atom_table(f, k_max, l_max, j_max).weighted(z_j_weight(J))[0]


# -- energy ------------------------------------------------------------------------

def multi_indices(order: int):
    """All (a, b, c) with a + b + c <= order."""
    return [r for r in itertools.product(range(order + 1), repeat=3) if sum(r) <= order]


def derivative_weight(grid: GridSpec, N: int) -> np.ndarray:
    """sum_{|rho| <= N} (xi^rho)^2."""
    w = np.zeros(grid.shape)
    x1, x2, n = grid.xi1 ** 2, grid.xi2 ** 2, grid.n ** 2
    for a, b, c in multi_indices(N):
        w = w + x1 ** a * x2 ** b * n ** c
    return w


def _rho_symbol(grid: GridSpec, rho) -> np.ndarray:
    a, b, c = rho
    return (1j * grid.xi1) ** a * (1j * grid.xi2) ** b * (1j * grid.n) ** c


def modified_energy(u: Field, udot: Field, N: int, coeffs: NonlinearityCoeffs | None = None) -> float:
    """Order-N energy of (u, u_t) plus the quasilinear correction.

    Raises
    ------
    EnergyFormError
        If delta^{jk} + G^{jk} fails to be positive definite somewhere on the
        grid, i.e. the data is too large for the corrected form.
    """
    grid = u.grid
    w = derivative_weight(grid, N)
    E = float(np.sum(w * (np.abs(udot.coeffs) ** 2 + grid.lam ** 2 * np.abs(u.coeffs) ** 2)))
    if coeffs is None or not coeffs.has_quasilinear:
        return E
    d = PhysicalDerivatives(u, udot)
    G = {}
    for j in SPATIAL:
        for k in SPATIAL:
            G[(j, k)] = g_field(d, coeffs, j, k)
    _check_form(grid, G)
    dv = grid.volume / grid.npts
    corr = 0.0
    for rho in multi_indices(N):
        u_rho = u.multiply(_rho_symbol(grid, rho))
        du = {j: real_values(u_rho.multiply(spatial_symbol(grid, j))) for j in SPATIAL}
        for (j, k), Gjk in G.items():
            if Gjk is not None:
                corr += float(np.sum(Gjk * du[j] * du[k])) * dv
    return E + corr


def _check_form(grid: GridSpec, G: dict) -> None:
    shape = grid.shape
    m = np.zeros(shape + (3, 3))
    for (j, k), Gjk in G.items():
        if Gjk is not None:
            m[..., j - 1, k - 1] = Gjk
    # cheap sufficient test first: ||G||_F < 1 keeps I + G positive definite
    if np.sqrt(np.max(np.sum(m ** 2, axis=(-1, -2)))) < 1.0:
        return
    m = m + np.eye(3)
    lo = float(np.linalg.eigvalsh(m).min())
    if lo <= 0.0:
        raise EnergyFormError(f"corrected energy form is indefinite (min eigenvalue {lo:.3e}); data too large")


def energy_norm(u: Field, udot: Field, N: int) -> float:
    """||u||_{H^{N+1}} + ||u_t||_{H^N}."""
    return sobolev_norm(u, N + 1) + sobolev_norm(udot, N)


# -- sup-norm decay functional -----------------------------------------------------

def decay_sum(u: Field, udot: Field, oversample: int = 2) -> float:
    """sum_{|rho|<=2} ||d^rho u||_inf + sum_{|rho|<=1} ||d^rho u_t||_inf."""
    grid = u.grid
    total = 0.0
    for rho in multi_indices(2):
        total += float(np.abs(real_values(u.multiply(_rho_symbol(grid, rho)), oversample)).max())
    for rho in multi_indices(1):
        total += float(np.abs(real_values(udot.multiply(_rho_symbol(grid, rho)), oversample)).max())
    return total


class ThetaTracker:
    """Running sup of (1 + t) * decay_sum; append-only."""

    def __init__(self, oversample: int = 2):
        self.oversample = oversample
        self.times: list[float] = []
        self.values: list[float] = []
        self.theta = 0.0

    def append(self, t: float, u: Field, udot: Field) -> float:
        if self.times and t <= self.times[-1]:
            raise ContractError("history times must increase")
        s = decay_sum(u, udot, self.oversample)
        self.times.append(float(t))
        self.values.append(s)
        self.theta = max(self.theta, (1.0 + t) * s)
        return self.theta


def theta_functional(history, oversample: int = 2) -> float:
    """theta over a history of (t, u, u_t) snapshots."""
    history = list(history)
    if not history:
        raise ContractError("history must be nonempty")
    tr = ThetaTracker(oversample)
    for t, u, udot in history:
        tr.append(t, u, udot)
    return tr.theta


# -- decay fits --------------------------------------------------------------------

@dataclass
class DecayFit:
    window: tuple[float, float]
    exponent: float
    amplitude: float
    residual: float
    samples: int = 0

    def to_dict(self) -> dict:
        return {"t_min": self.window[0], "t_max": self.window[1], "exponent": self.exponent,
                "amplitude": self.amplitude, "residual": self.residual, "samples": self.samples}


def fit_decay(times, values, window: tuple[float, float] | None = None,
              horizon: float | None = None) -> DecayFit:
    """Least-squares fit value ~ amplitude * (1 + t)^exponent on the window.

    ``horizon`` (typically box_period / 2) bounds the admissible window.
    """
    t = np.asarray(times, float)
    v = np.asarray(values, float)
    if window is None:
        window = (max(1.0, float(t.min())), float(t.max()))
    lo, hi = window
    if lo < 1.0:
        raise ContractError("decay windows start at t >= 1")
    if horizon is not None and hi > horizon:
        raise ContractError(f"window end {hi} beyond wrap-around horizon {horizon}")
    sel = (t >= lo) & (t <= hi)
    if sel.sum() < 8:
        raise ContractError(f"need >= 8 samples in window, got {int(sel.sum())}")
    if np.any(v[sel] <= 0):
        raise ContractError("decay fit needs positive values")
    X = np.log1p(t[sel])
    Y = np.log(v[sel])
    A = np.vstack([X, np.ones_like(X)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, Y, rcond=None)
    res = float(np.sqrt(np.mean((A @ [slope, icpt] - Y) ** 2)))
    return DecayFit((lo, hi), float(slope), float(math.exp(icpt)), res, int(sel.sum()))


def envelope_exponent(times, energies, t_min: float = 1.0) -> float:
    """Smallest a with E(0)(1+t)^-a <= E(t) <= E(0)(1+t)^a for t >= t_min.

    Applied to E^(1/2) this is the constant in an (1+t)^(C eps) envelope.
    """
    t = np.asarray(times, float)
    e = np.asarray(energies, float)
    sel = t >= t_min
    if not sel.any():
        raise ContractError("no samples beyond t_min")
    return float(np.max(np.abs(np.log(e[sel] / e[0])) / np.log1p(t[sel])))


# -- report --------------------------------------------------------------------------

@dataclass
class NormReport:
    t: float
    sobolev: dict = dc_field(default_factory=dict)
    z_norm: float = 0.0
    z_j_norm: dict = dc_field(default_factory=dict)
    energy: float = 0.0
    theta: float = 0.0
    z_argmax: tuple[int, int] = (-1, -1)

    def __post_init__(self):
        vals = [self.t, self.z_norm, self.energy, self.theta, *self.sobolev.values(), *self.z_j_norm.values()]
        if not all(math.isfinite(v) for v in vals):
            raise ContractError("report entries must be finite")
        if any(v < 0 for v in vals[1:]):
            raise ContractError("report entries must be nonnegative")

    def to_flat(self) -> dict:
        d = {"t": self.t}
        d.update({f"h{N}": v for N, v in sorted(self.sobolev.items())})
        d["z"] = self.z_norm
        d.update({f"zJ{J}": v for J, v in sorted(self.z_j_norm.items())})
        d["energy"] = self.energy
        d["theta"] = self.theta
        d["z_k"], d["z_l"] = self.z_argmax
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_flat(), sort_keys=False)

    @classmethod
    def from_flat(cls, d: dict) -> "NormReport":
        sob = {int(k[1:]): float(v) for k, v in d.items() if k.startswith("h") and k[1:].isdigit()}
        zj = {int(k[2:]): float(v) for k, v in d.items() if k.startswith("zJ")}
        return cls(float(d["t"]), sob, float(d["z"]), zj, float(d["energy"]), float(d["theta"]),
                   (int(d.get("z_k", -1)), int(d.get("z_l", -1))))

    @classmethod
    def from_json(cls, s: str) -> "NormReport":
        return cls.from_flat(json.loads(s))

    def csv_header(self) -> list[str]:
        return list(self.to_flat())

    def to_csv_row(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.csv_header(), lineterminator="\n")
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in self.to_flat().items()})
        return buf.getvalue()


def norm_report(u: Field, udot: Field, t: float = 0.0, sobolev_orders=(0, 1, 2), J_values=(0, 1, 2, 4),
                energy_order: int = 1, coeffs: NonlinearityCoeffs | None = None,
                theta: float | None = None, target: Field | None = None) -> NormReport:
    """Full report for a state; Z norms are taken of ``target`` (default u_t - i*Lambda*u)."""
    from .spectral import apply_lambda

    if target is None:
        target = udot - apply_lambda(u, 1.0) * 1j
    table = atom_table(target)
    z, arg = table.weighted(lambda j: 2.0 ** j)
    zj = {J: table.weighted(z_j_weight(J))[0] for J in J_values}
    sob = {N: sobolev_norm(target, N) for N in sobolev_orders}
    E = modified_energy(u, udot, energy_order, coeffs)
    th = theta if theta is not None else (1.0 + t) * decay_sum(u, udot)
    return NormReport(float(t), sob, z, zj, E, th, arg)
