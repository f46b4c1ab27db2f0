"""Oscillatory kernels of the Klein-Gordon group on R^2 x T.

For a radial cutoff chi (psi_{-1} or phi_k) the kernel

    K(x) = int_{R^2} exp(i x.xi) exp(+-i t Lambda_n(xi)) chi(|xi|) dxi
         = 2 pi int_0^inf exp(+-i t Lambda_n(r)) J0(r |x|) chi(r) r dr

is evaluated by Gauss-Legendre panels fine enough to resolve both the
temporal phase and the Bessel oscillation, with panel doubling as the
error certificate.  Sweeps compare sup_x |K| against the decay rates
(1 + |n|)/(1 + t) for the low shell and (4**k + n**2)/(sqrt(1 + n**2) t)
for annular shells.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.fft as sfft
from scipy.special import j0 as scipy_j0

from .dyadic import CUTOFFS, SUPPORT, PLATEAU
from .norms import DecayFit, decay_sum, fit_decay
from .spectral import ContractError, Field, GridSpec

GL_ORDER = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)


class QuadratureError(ArithmeticError):
    """Panel refinement did not reach the tolerance within budget."""

    def __init__(self, msg, worst_panel=None):
        super().__init__(msg)
        self.worst_panel = worst_panel


class CertificationError(AssertionError):
    """A hard bound check failed."""


def bessel_j0(z, points: int | None = None):
    """J0 by the trapezoid rule on (1/2pi) int_0^{2pi} cos(z sin theta) dtheta.

    The integrand is periodic and entire, so the rule converges
    geometrically once ``points`` exceeds |z| by a few dozen.
    """
    z = np.asarray(z, float)
    if points is None:
        points = int(np.max(np.abs(z), initial=0.0)) + 48
    theta = 2 * math.pi * np.arange(points) / points
    return np.mean(np.cos(z[..., None] * np.sin(theta)), axis=-1)


# -- queries ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelQuery:
    shell: int
    n: int
    t: float
    sign: int = 1
    radii: tuple = (0.0,)

    def __post_init__(self):
        if self.shell < -1:
            raise ContractError("shell must be >= -1")
        if not math.isfinite(self.t) or self.t < 0:
            raise ContractError("t must be finite and >= 0")
        if self.sign not in (1, -1):
            raise ContractError("sign must be +1 or -1")
        r = np.asarray(self.radii, float)
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise ContractError("radii must be finite and >= 0")
        object.__setattr__(self, "radii", tuple(float(v) for v in r))


def shell_support(shell: int) -> tuple[float, float]:
    """Radial interval carrying the cutoff."""
    if shell == -1:
        return 0.0, SUPPORT / 2
    return 2.0 ** shell * PLATEAU / 2, 2.0 ** shell * SUPPORT


def shell_cutoff(shell: int, r):
    return CUTOFFS.psi(r, shell)


def _lam(r, n):
    return np.sqrt(1.0 + r * r + n * n)


def group_speed(r, n):
    """|grad Lambda_n| at |xi| = r."""
    return r / _lam(r, n)


def _panel_rule(lo, hi, panels):
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    weights = (half[:, None] * _GL_W[None, :]).ravel()
    return nodes, weights


def _panel_sums(q: KernelQuery, radii: np.ndarray, panels: int, j0=scipy_j0) -> np.ndarray:
    """Per-panel integrals, shape (len(radii), panels)."""
    lo, hi = shell_support(q.shell)
    r, w = _panel_rule(lo, hi, panels)
    base = 2 * math.pi * np.exp(1j * q.sign * q.t * _lam(r, q.n)) * shell_cutoff(q.shell, r) * r * w
    out = np.empty((len(radii), panels), complex)
    chunk = max(1, 2_000_000 // max(1, len(r)))
    for s in range(0, len(radii), chunk):
        x = radii[s : s + chunk]
        vals = base[None, :] * j0(x[:, None] * r[None, :])
        out[s : s + chunk] = vals.reshape(len(x), panels, GL_ORDER).sum(axis=2)
    return out


def kernel_scale(shell: int) -> float:
    """2 pi int chi(r) r dr: the t = 0, x = 0 value, used to make tolerances relative."""
    lo, hi = shell_support(shell)
    r, w = _panel_rule(lo, hi, 64)
    return float(2 * math.pi * np.sum(shell_cutoff(shell, r) * r * w))


def initial_panels(q: KernelQuery) -> int:
    """Panel count with width <= min(pi / (4 t max|Lambda'|), pi / (4 max|x|))."""
    lo, hi = shell_support(q.shell)
    vmax = float(group_speed(hi, q.n))
    freq = max(q.t * vmax, max(q.radii, default=0.0), 1e-12)
    width = min(math.pi / (4 * freq), (hi - lo) / 4)
    return max(4, math.ceil((hi - lo) / width))


def eval_kernel(q: KernelQuery, tol: float = 1e-6, max_panels: int = 1 << 17, j0=scipy_j0) -> np.ndarray:
    """Kernel values at ``q.radii``.

    Panels are doubled until two successive rules agree to ``tol`` times
    the t = 0 scale; on budget exhaustion the error carries the panel
    with the largest change.
    """
    if not (0 < tol <= 1e-4):
        raise ContractError("tol must lie in (0, 1e-4]")
    radii = np.asarray(q.radii, float)
    scale = kernel_scale(q.shell)
    panels = initial_panels(q)
    coarse = _panel_sums(q, radii, panels, j0)
    while True:
        fine = _panel_sums(q, radii, 2 * panels, j0)
        diff = np.abs(coarse.sum(1) - fine.sum(1))
        if np.all(diff <= tol * scale):
            return fine.sum(1)
        if 4 * panels > max_panels:
            pair = np.abs(coarse - fine.reshape(len(radii), panels, 2).sum(2))
            i, p = np.unravel_index(np.argmax(pair), pair.shape)
            lo, hi = shell_support(q.shell)
            width = (hi - lo) / panels
            raise QuadratureError(
                f"kernel quadrature not converged: shell={q.shell} n={q.n} t={q.t} "
                f"|x|={radii[i]:.4g} err={diff.max():.3e}",
                worst_panel=(lo + p * width, lo + (p + 1) * width),
            )
        panels *= 2
        coarse = fine


def sample_radii(shell: int, n: int, t: float, density: float = 8.0) -> np.ndarray:
    """Radii covering the dispersive band [t v(r_lo), t v(r_hi)] densely, plus a
    coarse global grid on [0, t + 2]."""
    lo, hi = shell_support(shell)
    step = math.pi / (density * hi)
    a = t * float(group_speed(lo, n))
    b = t * float(group_speed(hi, n))
    band = np.arange(max(0.0, a - 4.0), b + 4.0 + step, step)
    glob = np.linspace(0.0, t + 2.0, 64)
    return np.unique(np.concatenate([band, glob, [0.0]]))


def sup_kernel(shell: int, n: int, t: float, tol: float = 1e-6, sign: int = 1) -> tuple[float, float]:
    """(sup_x |K|, attaining radius) with local refinement around the best samples."""
    radii = sample_radii(shell, n, t)
    vals = np.abs(eval_kernel(KernelQuery(shell, n, t, sign, tuple(radii)), tol))
    lo, hi = shell_support(shell)
    step = math.pi / (8.0 * hi)
    best = radii[np.argsort(vals)[-5:]]
    local = np.unique(np.clip(np.concatenate([np.linspace(r - step, r + step, 17) for r in best]), 0, None))
    lv = np.abs(eval_kernel(KernelQuery(shell, n, t, sign, tuple(local)), tol))
    allr = np.concatenate([radii, local])
    allv = np.concatenate([vals, lv])
    i = int(np.argmax(allv))
    return float(allv[i]), float(allr[i])


# -- bound reports -------------------------------------------------------------------------

def low_shell_bound(n: int, t: float) -> float:
    return (1 + abs(n)) / (1 + t)


def annulus_bound(k: int, n: int, t: float) -> float:
    return (4.0 ** k + n * n) / math.sqrt(1 + n * n) / t


@dataclass(frozen=True)
class BoundReport:
    query: KernelQuery
    sup_abs: float
    bound: float
    ratio: float = dc_field(init=False)

    def __post_init__(self):
        ratio = self.sup_abs / self.bound if self.bound > 0 else math.inf
        object.__setattr__(self, "ratio", ratio)
        if not math.isfinite(self.ratio):
            raise CertificationError(f"non-finite ratio for {self.query}")

    def row(self) -> list:
        return [self.query.shell, self.query.n, self.query.t, self.sup_abs, self.bound, self.ratio]


CSV_COLUMNS = ("k", "n", "t", "sup_abs", "bound", "ratio")


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        k, n, t, s, b, q = r.row()
        w.writerow([k, n, repr(float(t)), repr(s), repr(b), repr(q)])
    return buf.getvalue()


def reports_from_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and tuple(rows[0].keys()) != CSV_COLUMNS:
        raise ContractError("unexpected CSV columns")
    return [{"k": int(r["k"]), "n": int(r["n"]), **{c: float(r[c]) for c in CSV_COLUMNS[2:]}} for r in rows]


def _sweep(shells, n_range, t_range, tol, bound_fn):
    out = []
    for k in shells:
        for n in n_range:
            for t in t_range:
                s, r = sup_kernel(k, n, t, tol)
                out.append(BoundReport(KernelQuery(k, n, t, 1, (r,)), s, bound_fn(k, n, t)))
    return out


def certify_low_shell(n_range=range(5), t_range=(1, 2, 5, 10, 20, 50, 100), tol=1e-6,
                      bound_fn=None) -> list[BoundReport]:
    """Sweep of the psi_{-1} kernel against (1 + |n|)/(1 + t)."""
    fn = bound_fn or (lambda k, n, t: low_shell_bound(n, t))
    return _sweep([-1], n_range, t_range, tol, fn)


def certify_annulus_shells(k_range=range(5), n_range=range(5), t_range=(1, 2, 5, 10, 20, 50, 100),
                           tol=1e-6, bound_fn=None) -> list[BoundReport]:
    """Sweep of the phi_k kernels against (4**k + n**2)/(sqrt(1 + n**2) t)."""
    if min(k_range) < 0:
        raise ContractError("annulus shells need k >= 0")
    return _sweep(k_range, n_range, t_range, tol, bound_fn or annulus_bound)


@dataclass
class SweepSummary:
    max_ratio: float
    stability: dict          # (k, n) -> upper-decade max / lower-decade max
    doubling: dict           # (k, n, t) -> sup(2t) / sup(t)
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures


def summarize(reports, lower=(1, 10), upper=(10, 100), stability_factor=3.0,
              doubling_from=10.0, doubling_band=(0.375, 0.625)) -> SweepSummary:
    """Decade stability and doubling checks over a sweep."""
    by = {}
    for r in reports:
        by.setdefault((r.query.shell, r.query.n), {})[r.query.t] = r
    failures = []
    stability = {}
    doubling = {}
    for key, rows in by.items():
        lo = [v.ratio for t, v in rows.items() if lower[0] <= t <= lower[1]]
        hi = [v.ratio for t, v in rows.items() if upper[0] <= t <= upper[1]]
        if lo and hi:
            s = max(hi) / max(lo)
            stability[key] = s
            if not (1 / stability_factor <= s <= stability_factor):
                failures.append(("stability", key, s))
        for t, v in rows.items():
            if t >= doubling_from and 2 * t in rows:
                d = rows[2 * t].sup_abs / v.sup_abs
                doubling[key + (t,)] = d
                if not (doubling_band[0] <= d <= doubling_band[1]):
                    failures.append(("doubling", key + (t,), d))
    mr = max((r.ratio for r in reports), default=0.0)
    if not math.isfinite(mr):
        failures.append(("finite", None, mr))
    return SweepSummary(mr, stability, doubling, failures)


# -- linear flow -------------------------------------------------------------------------

def linear_kg_solve(u0: Field, u1: Field, t: float) -> tuple[Field, Field]:
    """Exact solution of u_tt - Delta u + u = 0: returns (u(t), u_t(t))."""
    lam = u0.grid.lam
    c, s = np.cos(t * lam), np.sin(t * lam)
    u = u0.multiply(c) + u1.multiply(s / lam)
    ut = u0.multiply(-lam * s) + u1.multiply(c)
    return u, ut


def gaussian_bump(grid: GridSpec, epsilon: float = 1.0, width: float = 1.0, y_amp: float = 0.5,
                  y_mode: int = 1) -> Field:
    """epsilon exp(-|x|^2 / (2 width^2)) (1 + y_amp cos(y_mode y)), dealiased."""
    from .spectral import forward_transform

    x1, x2, y = grid.mesh()
    f = epsilon * np.exp(-(x1 ** 2 + x2 ** 2) / (2 * width ** 2)) * (1 + y_amp * np.cos(y_mode * y))
    return forward_transform(f, grid).dealiased()


def decay_horizon(grid: GridSpec, margin: float = 5.0) -> float:
    return grid.box_period / 2 - margin


def certify_linear_decay(u0: Field, u1: Field, window=(2.0, 90.0), samples: int = 24,
                         band=(-1.15, -0.85), margin: float = 5.0, check: bool = True) -> DecayFit:
    """Fit the decay exponent of the derivative sup-norm sum along the exact linear flow."""
    horizon = decay_horizon(u0.grid, margin)
    if window[1] > horizon or window[0] < 1:
        raise ContractError(f"window {window} outside [1, {horizon:.3f}]")
    times = np.geomspace(window[0], window[1], samples)
    vals = [decay_sum(*linear_kg_solve(u0, u1, float(t))) for t in times]
    fit = fit_decay(times, vals, window=window, horizon=horizon)
    if check and not (band[0] <= fit.exponent <= band[1]):
        raise CertificationError(f"linear decay exponent {fit.exponent:.4f} outside {band}")
    return fit


# -- composite dispersive estimate --------------------------------------------------------------

@dataclass(frozen=True)
class LocalizedDatum:
    """g(x, y) = sum_n c_n exp(-|x - x_n|^2 / (2 s_n^2)) exp(i n y)."""

    modes: np.ndarray      # n values
    amps: np.ndarray       # complex c_n
    centers: np.ndarray    # (len, 2)
    widths: np.ndarray     # s_n

    @classmethod
    def random(cls, rng: np.random.Generator, shells=range(-1, 4), spread: float = 3.0) -> "LocalizedDatum":
        """One random periodic mode from the core of each S_l shell, so every
        projection in ``shells`` is nonzero; random centers, widths, amplitudes."""
        picks = []
        for l in shells:
            if l == -1:
                picks.append(0)
                continue
            lo = max(1, math.ceil(2.0 ** l * PLATEAU / 2 + 1e-9))
            hi = math.floor(2.0 ** l * SUPPORT - 1e-9)
            core = [n for n in range(lo, hi + 1) if CUTOFFS.psi(float(n), l) > 0.5] or list(range(lo, hi + 1))
            picks.append(int(rng.choice(core)) * int(rng.choice((-1, 1))))
        modes = np.array(sorted(set(picks)))
        amps = (rng.standard_normal(modes.size) + 1j * rng.standard_normal(modes.size)) / np.sqrt(2)
        centers = rng.uniform(-spread, spread, (modes.size, 2))
        widths = rng.uniform(0.6, 1.6, modes.size)
        return cls(modes, amps, centers, widths)

    def plane_transform(self, xi1, xi2, i: int):
        """int a_n(x) exp(-i x.xi) dx for component i."""
        s, c = self.widths[i], self.centers[i]
        return (self.amps[i] * 2 * math.pi * s * s * np.exp(-0.5 * s * s * (xi1 ** 2 + xi2 ** 2))
                * np.exp(-1j * (c[0] * xi1 + c[1] * xi2)))

    def l1_norm(self, h: float = 0.05, ny: int = 64) -> float:
        """int_{R^2 x T} |g| by midpoint quadrature on a box containing the bumps."""
        R = float(np.max(np.abs(self.centers)) + 7 * np.max(self.widths))
        x = np.arange(-R, R, h) + h / 2
        y = 2 * math.pi * np.arange(ny) / ny
        total = 0.0
        X1, X2 = np.meshgrid(x, x, indexing="ij")
        E = np.exp(1j * np.outer(self.modes, y))      # (modes, ny)
        for row in range(0, x.size, 64):
            a = np.stack([self.amps[i] * np.exp(-((X1[row:row + 64] - self.centers[i, 0]) ** 2
                                                  + (X2[row:row + 64] - self.centers[i, 1]) ** 2)
                                                 / (2 * self.widths[i] ** 2))
                          for i in range(self.modes.size)], axis=-1)
            total += float(np.abs(a @ E).sum())
        return total * h * h * (2 * math.pi / ny)


def _smooth_size(P: int) -> int:
    """Smallest even 5-smooth integer >= P."""
    while True:
        m = P
        for f in (2, 3, 5):
            while m % f == 0:
                m //= f
        if m == 1 and P % 2 == 0:
            return P
        P += 1


def _plane_points_for(k: int, box_period: float, oversample: int = 2) -> int:
    """Plane resolution whose band covers |xi| <= 2**k * 8/5, oversampled so
    the sup over grid nodes does not undersample the shortest wavelength."""
    need = 2 * math.ceil(2.0 ** k * SUPPORT / (2 * math.pi / box_period)) + 2
    return _smooth_size(max(128, oversample * need))


class _ShellPlan:
    """Frequency arrays and per-(t, |n|) phases for one R_{[-1,k]} on the box."""

    def __init__(self, k: int, box_period: float):
        self.P = _plane_points_for(k, box_period)
        self.dk = 2 * math.pi / box_period
        idx = sfft.fftfreq(self.P, 1.0 / self.P) * self.dk
        self.xi1 = idx[:, None]
        self.xi2 = idx[None, :]
        self.rho2 = self.xi1 ** 2 + self.xi2 ** 2
        cut = CUTOFFS.psi_interval(np.sqrt(self.rho2), -1, k)
        self.support = cut > 0
        self.cut = cut[self.support]
        self._phase = {}
        # (1/(2 pi)^2) sum spec exp(i x.xi) dk^2 realized as an inverse FFT
        self.norm = self.P * self.P * self.dk * self.dk / (4 * math.pi ** 2)

    def phase(self, t: float, n: int) -> np.ndarray:
        key = (t, abs(n))
        if key not in self._phase:
            lam = np.sqrt(1.0 + self.rho2[self.support] + n * n)
            self._phase[key] = np.exp(1j * t * lam).astype(np.complex64)
        return self._phase[key]

    def transforms(self, g: "LocalizedDatum") -> list:
        x1 = np.broadcast_to(self.xi1, (self.P, self.P))[self.support]
        x2 = np.broadcast_to(self.xi2, (self.P, self.P))[self.support]
        return [g.plane_transform(x1, x2, i) * self.cut for i in range(g.modes.size)]


def _sup_over_y(B: np.ndarray, modes: np.ndarray, weights: np.ndarray, absB: np.ndarray) -> float:
    """sup_{x, y} |sum_n w_n b_n(x) e^{iny}| by branch and bound on sum_n |w_n b_n(x)|."""
    act = np.nonzero(weights)[0]
    if act.size == 0:
        return 0.0
    w = weights[act]
    env = np.tensordot(w, absB[act], axes=1).ravel()
    nmax = int(np.max(np.abs(modes[act])))
    ny = 8 * (2 * nmax + 1)
    y = 2 * math.pi * np.arange(ny) / ny
    E = (w[:, None] * np.exp(1j * np.outer(modes[act], y))).astype(np.complex64)
    Bf = B[act].reshape(act.size, -1)
    best = 0.0
    cand = np.argpartition(env, -min(4096, env.size))[-min(4096, env.size):]
    while cand.size:
        best = max(best, float(np.abs(Bf[:, cand].T @ E).max()))
        env[cand] = -np.inf
        # nodes not yet evaluated whose envelope could still beat ``best``
        rest = np.nonzero(env > best)[0]
        cand = rest[np.argsort(env[rest])[::-1][:65536]]
    return best


def dispersed_sups(g: "LocalizedDatum", plan: _ShellPlan, t: float, shells, hats=None) -> list[float]:
    """sup_{x,y} |R_{[-1,k]} exp(i t Lambda) S_l g| for every l in ``shells``.

    Every periodic mode is propagated with one 2D FFT; S_l only reweights
    the modes, so the FFTs are shared across l.
    """
    hats = plan.transforms(g) if hats is None else hats
    B = np.empty((g.modes.size, plan.P, plan.P), np.complex64)
    spec = np.zeros((plan.P, plan.P), np.complex64)
    for i, n in enumerate(g.modes):
        spec[plan.support] = hats[i] * plan.phase(t, int(n))
        B[i] = sfft.ifft2(spec) * plan.norm
    absB = np.abs(B)
    absn = np.abs(g.modes).astype(float)
    return [_sup_over_y(B, g.modes, CUTOFFS.psi(absn, l), absB) for l in shells]


def dispersed_sup(g: "LocalizedDatum", k: int, l: int, t: float, box_period: float = 64 * math.pi) -> float:
    """sup_{x,y} |R_{[-1,k]} exp(i t Lambda) S_l g| on a periodic box of the given period."""
    return dispersed_sups(g, _ShellPlan(k, box_period), t, [l])[0]


def composite_ratio(g: "LocalizedDatum", k: int, l: int, t: float, l1: float | None = None,
                    box_period: float = 64 * math.pi) -> float:
    """||R_{[-1,k]} e^{itLambda} S_l g||_inf (1 + t) / (2**(2(k + l)) ||g||_{L^1})."""
    l1 = g.l1_norm() if l1 is None else l1
    return dispersed_sup(g, k, l, t, box_period) * (1 + t) / (2.0 ** (2 * (k + l)) * l1)


def certify_composite(count: int = 50, shells=range(-1, 4), times=(1.0, 10.0, 100.0), seed: int = 0,
                      spread_limit: float = 5.0, box_period: float = 64 * math.pi) -> dict:
    """Ratios over random localized data; the per-time sup constant C(t) must
    stay within ``spread_limit`` across ``times``."""
    shells = list(shells)
    rng = np.random.default_rng(seed)
    data = [LocalizedDatum.random(rng) for _ in range(count)]
    l1 = np.array([g.l1_norm() for g in data])
    ratios = np.zeros((count, len(shells), len(shells), len(times)))
    for i, k in enumerate(shells):
        plan = _ShellPlan(k, box_period)
        for a, g in enumerate(data):
            hats = plan.transforms(g)
            for m, t in enumerate(times):
                sups = dispersed_sups(g, plan, t, shells, hats)
                for j, l in enumerate(shells):
                    ratios[a, i, j, m] = sups[j] * (1 + t) / (2.0 ** (2 * (k + l)) * l1[a])
            plan._phase.clear()
    per_t = ratios.max(axis=(0, 1, 2))
    spread = float(per_t.max() / per_t.min())
    with np.errstate(divide="ignore", invalid="ignore"):
        atom = ratios.max(axis=3) / ratios.min(axis=3)
    return {
        "constant": float(per_t.max()),
        "per_time": dict(zip(times, per_t.tolist())),
        "spread": spread,
        "atom_spread_max": float(np.nanmax(atom)),
        "ok": bool(np.all(np.isfinite(ratios)) and spread <= spread_limit),
        "ratios": ratios,
    }
