"""Experiment drivers behind the ``kglab`` command line.

A run is described by a flat ``key = value`` config.  Values are layered:
built-in defaults, then the config file, then ``KGLAB_<KEY>`` environment
variables, then command-line flags.  Every driver is deterministic for a
fixed config; CSV floats are written with ``repr`` so reruns are
byte-identical.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels, norms
from .dynamics import IntegrationError, StateU, integrate, normalize_initial_data, profile
from .nonlinearity import PRESETS, NonlinearityCoeffs, preset
from .spectral import ContractError, Field, GridSpec

ENV_PREFIX = "KGLAB_"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CERTIFICATION = 4


class ConfigError(ValueError):
    pass


class CertificationFailure(AssertionError):
    pass


@dataclass(frozen=True)
class RunConfig:
    box_period: float = 64 * math.pi
    plane_points: int = 256
    mode_cutoff: int = 8
    dealias_fraction: float = 2.0 / 3.0
    coeffs: str = "mixed"
    epsilon0: float = 1e-3
    t_end: float = 40.0
    dt: float = 0.2
    diagnostics_every: int = 10
    output_dir: str = "kglab-out"
    seed: int = 0
    bump_width: float = 1.0
    y_amplitude: float = 0.5
    energy_order: int = 1
    fit_t_min: float = 2.0
    report_every: int = 0

    def grid(self) -> GridSpec:
        try:
            return GridSpec(self.box_period, self.plane_points, self.mode_cutoff, self.dealias_fraction)
        except (ValueError, ContractError) as e:
            raise ConfigError(str(e)) from None

    def nonlinearity(self) -> NonlinearityCoeffs:
        if self.coeffs in PRESETS:
            return preset(self.coeffs)
        path = Path(self.coeffs)
        if not path.is_file():
            raise ConfigError(f"coeffs must be one of {PRESETS} or a JSON file with g, h, q arrays")
        try:
            return NonlinearityCoeffs.from_dict(json.loads(path.read_text()))
        except (ValueError, KeyError, ContractError) as e:
            raise ConfigError(f"bad coefficient file {path}: {e}") from None

    def validate(self) -> "RunConfig":
        grid = self.grid()
        if not self.epsilon0 > 0:
            raise ConfigError("epsilon0 must be > 0")
        if not 0 < self.t_end < grid.box_period / 2:
            raise ConfigError(f"t_end must lie in (0, box_period/2 = {grid.box_period / 2:.4g})")
        if not 0 < self.dt <= grid.h_max:
            raise ConfigError(f"dt must lie in (0, h_max = {grid.h_max:.4g}]")
        if self.diagnostics_every < 1:
            raise ConfigError("diagnostics_every must be a positive integer")
        if self.report_every < 0:
            raise ConfigError("report_every must be >= 0")
        self.nonlinearity()
        return self

    def to_text(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)!r}\n" if isinstance(getattr(self, f.name), float)
                       else f"{f.name} = {getattr(self, f.name)}\n" for f in dataclasses.fields(self))


FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, raw: str):
    if key not in FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    kind = FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(eval_number(raw))
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def eval_number(raw: str) -> float:
    """Float literal, optionally ``<a>*pi`` or ``pi``."""
    s = raw.replace(" ", "")
    if s.endswith("*pi"):
        return float(s[:-3]) * math.pi
    if s == "pi":
        return math.pi
    return float(s)


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = _coerce(key, value)
    return out


def env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    out = {}
    for name, value in environ.items():
        if name.startswith(ENV_PREFIX):
            key = name[len(ENV_PREFIX):].lower()
            if key in FIELD_TYPES:
                out[key] = _coerce(key, value)
    return out


def load_config(path: str | None = None, overrides: dict | None = None, environ=None) -> RunConfig:
    values = {}
    if path:
        try:
            values.update(parse_config_text(Path(path).read_text()))
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
    values.update(env_overrides(environ))
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = _coerce(k, str(v)) if isinstance(v, str) else v
    return RunConfig(**values).validate()


# -- output helpers ------------------------------------------------------------------

def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    _atomic_write(path, buf.getvalue())


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


# -- simulate ----------------------------------------------------------------------------

def initial_data(cfg: RunConfig, grid: GridSpec | None = None) -> tuple[Field, Field]:
    """epsilon0 * bump for u0 and zero velocity; the seed rotates the y-modulation."""
    grid = grid or cfg.grid()
    rng = np.random.default_rng(cfg.seed)
    phase = float(rng.uniform(0, 2 * math.pi)) if cfg.seed else 0.0
    from .spectral import forward_transform

    x1, x2, y = grid.mesh()
    f = cfg.epsilon0 * np.exp(-(x1 ** 2 + x2 ** 2) / (2 * cfg.bump_width ** 2)) \
        * (1 + cfg.y_amplitude * np.cos(y + phase))
    return forward_transform(f, grid).dealiased(), Field.zeros(grid)


SERIES_COLUMNS = ("t", "decay_sum", "theta", "energy", "profile_drift", "realness")


@dataclass
class SimulationResult:
    series: list
    reports: list
    decay: dict | None
    energy_exponent: float
    theta_plateau: float
    summary: dict


def run_simulation(cfg: RunConfig, full_reports: bool = True) -> SimulationResult:
    """Time-step the configured system, collecting diagnostics every
    ``diagnostics_every`` steps (and a full NormReport every ``report_every``
    diagnostics, 0 = only at the first and last)."""
    grid = cfg.grid()
    coeffs = cfg.nonlinearity()
    u0, u1 = initial_data(cfg, grid)
    state = normalize_initial_data(u0, u1)
    V0 = profile(state)
    theta = norms.ThetaTracker()
    series, reports = [], []

    def diagnose(s: StateU, final=False):
        u, ut = s.u(), s.udot()
        th = theta.append(s.t, u, ut)
        E = norms.modified_energy(u, ut, cfg.energy_order, coeffs)
        drift = (profile(s) - V0).l2()
        real = max(_imag_ratio(u), _imag_ratio(ut))
        series.append((s.t, theta.values[-1], th, E, drift, real))
        k = len(series) - 1
        want = full_reports and (k == 0 or final or (cfg.report_every and k % cfg.report_every == 0))
        if want:
            reports.append(norms.norm_report(u, ut, s.t, energy_order=cfg.energy_order,
                                             coeffs=coeffs, theta=th))

    diagnose(state)
    nsteps = max(1, math.ceil(cfg.t_end / cfg.dt - 1e-9))
    h = cfg.t_end / nsteps
    last_good = state
    for i in range(nsteps):
        try:
            state = integrate(state, state.t + h, h, coeffs)
        except IntegrationError as e:
            path = _save_snapshot(cfg, last_good)
            raise IntegrationError(f"{e}; last good snapshot at {path}", last_good) from None
        state = StateU(state.U, (i + 1) * h)
        last_good = state
        if (i + 1) % cfg.diagnostics_every == 0 or i + 1 == nsteps:
            diagnose(state, final=(i + 1 == nsteps))

    times = np.array([r[0] for r in series])
    decay = None
    sel = times >= cfg.fit_t_min
    if sel.sum() >= 8:
        decay = norms.fit_decay(times, [r[1] for r in series], window=(cfg.fit_t_min, float(times[-1])),
                                horizon=grid.box_period / 2).to_dict()
    energies = np.array([r[3] for r in series])
    e_exp = norms.envelope_exponent(times, np.sqrt(energies)) if energies[0] > 0 and (times >= 1).any() else 0.0
    plateau = theta_plateau(times, [r[2] for r in series])
    summary = {
        "config": dataclasses.asdict(cfg),
        "steps": nsteps,
        "decay_fit": decay,
        "energy_exponent": e_exp,
        "theta_final": series[-1][2],
        "theta_plateau": plateau,
        "profile_drift_max": max(r[4] for r in series),
        "realness_max": max(r[5] for r in series),
        "energy_relative_change": float(abs(energies[-1] - energies[0]) / energies[0]) if energies[0] else 0.0,
        # G^{00} = 0 makes F explicit in (u, u_t): no d_t^2 u substitution, so the residual is identically 0
        "fixed_point_residual": 0.0,
    }
    if coeffs.is_zero:
        summary["flags"] = {
            "energy_conserved": summary["energy_relative_change"] < 1e-8,
            "profile_stationary": summary["profile_drift_max"] < 1e-10,
            "theta_plateau": plateau <= 1.25,
        }
    return SimulationResult(series, reports, decay, e_exp, plateau, summary)


def theta_plateau(times, thetas) -> float:
    """theta(t_end) / theta(t_end / 2): 1 means theta has levelled off."""
    t = np.asarray(times, float)
    th = np.asarray(thetas, float)
    half = th[np.searchsorted(t, t[-1] / 2, side="right") - 1]
    return float(th[-1] / half) if half > 0 else math.inf


def _imag_ratio(f: Field) -> float:
    n = f.l2()
    return float((f - f.conj()).l2() / (2 * n)) if n > 0 else 0.0


def _save_snapshot(cfg: RunConfig, state: StateU) -> str:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "last_good.npz"
    np.savez(path, U=state.U.coeffs, t=state.t)
    return str(path)


def write_simulation(cfg: RunConfig, res: SimulationResult) -> dict:
    out = Path(cfg.output_dir)
    write_csv(out / "series.csv", SERIES_COLUMNS, res.series)
    if res.reports:
        header = res.reports[0].csv_header()
        write_csv(out / "norms.csv", header, [[r.to_flat()[h] for h in header] for r in res.reports])
    _atomic_write(out / "summary.json", json.dumps(res.summary, indent=2, sort_keys=True) + "\n")
    _atomic_write(out / "config.txt", cfg.to_text())
    return res.summary


# -- decay scan ----------------------------------------------------------------------------

SCAN_COLUMNS = ("epsilon0", "coeffs", "energy_exponent", "decay_exponent", "theta_plateau")


def decay_scan(cfg: RunConfig, epsilons, control: bool = True) -> list[tuple]:
    """Energy-growth exponents per epsilon0 plus an optional coeffs = 0 control row."""
    eps = [float(e) for e in epsilons]
    if not eps:
        raise ConfigError("decay-scan needs at least one epsilon0")
    if any(e <= 0 for e in eps):
        raise ConfigError("epsilon0 values must be positive")
    if eps != sorted(eps, reverse=True) and eps != sorted(eps):
        raise ConfigError("epsilon0 values must be sorted")
    rows = []
    runs = [(e, cfg.coeffs) for e in eps]
    if control:
        runs.append((min(eps), "zero"))
    for e, c in runs:
        r = run_simulation(dataclasses.replace(cfg, epsilon0=e, coeffs=c), full_reports=False)
        rows.append((e, c, r.energy_exponent, r.decay["exponent"] if r.decay else float("nan"), r.theta_plateau))
    return rows


def check_scan_trend(rows, max_inversions: int = 1) -> list[str]:
    """Exponents must shrink as epsilon0 shrinks (one inversion allowed);
    the control row must be ~0."""
    problems = []
    main = sorted([r for r in rows if r[1] != "zero"], key=lambda r: r[0], reverse=True)
    inv = sum(1 for a, b in zip(main, main[1:]) if not b[2] < a[2])
    if inv > max_inversions:
        problems.append(f"energy exponents not decreasing with epsilon0 ({inv} inversions)")
    for r in rows:
        if r[1] == "zero" and abs(r[2]) >= 1e-3:
            problems.append(f"control exponent {r[2]:.3e} not ~0")
    return problems


# -- kernel verification -----------------------------------------------------------------------

def corrupted_bound(k, n, t):
    """Deliberately wrong rate (1 + t)^-2: ratios then grow linearly in t."""
    return (1 + abs(n)) / (1 + t) ** 2


def kernel_verify(k_range, n_range, t_range, tol: float, corrupt: bool = False,
                  stability_factor: float = 3.0) -> tuple[list, kernels.SweepSummary]:
    bound = corrupted_bound if corrupt else None
    reports = []
    if -1 in k_range:
        reports += kernels.certify_low_shell(n_range, t_range, tol, bound_fn=bound)
    ks = [k for k in k_range if k >= 0]
    if ks:
        reports += kernels.certify_annulus_shells(ks, n_range, t_range, tol, bound_fn=bound)
    return reports, kernels.summarize(reports, stability_factor=stability_factor)


# -- norm report -------------------------------------------------------------------------------

class FieldParseError(ValueError):
    def __init__(self, msg: str, offset: int):
        super().__init__(f"{msg} (byte offset {offset})")
        self.offset = offset


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


def parse_field_file(data: bytes) -> tuple[Field, Field, float]:
    """Field JSON: {"grid": {...}, "t": float, "u": {"re": [...], "im": [...]}, "udot": {...}}.

    Coefficient arrays are nested lists in FFT order with shape
    (plane_points, plane_points, 2 * mode_cutoff + 1).
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise FieldParseError("invalid UTF-8", e.start) from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise FieldParseError(f"JSON syntax error: {e.msg}", _byte_offset(text, e.pos)) from None
    if not isinstance(obj, dict):
        raise FieldParseError("top level must be an object", 0)

    def where(key):
        i = text.find(f'"{key}"')
        return _byte_offset(text, max(i, 0))

    try:
        g = obj["grid"]
        grid = GridSpec(float(g["box_period"]), int(g["plane_points"]), int(g["mode_cutoff"]),
                        float(g.get("dealias_fraction", 2.0 / 3.0)))
    except (KeyError, TypeError, ValueError) as e:
        raise FieldParseError(f"bad grid block: {e}", where("grid")) from None

    def arr(key):
        try:
            block = obj[key]
            c = np.asarray(block["re"], float) + 1j * np.asarray(block["im"], float)
        except (KeyError, TypeError, ValueError) as e:
            raise FieldParseError(f"bad {key} block: {e}", where(key)) from None
        if c.shape != grid.shape:
            raise FieldParseError(f"{key} has shape {c.shape}, grid needs {grid.shape}", where(key))
        if not np.all(np.isfinite(c)):
            raise FieldParseError(f"{key} has non-finite entries", where(key))
        return Field(grid, c)

    u = arr("u")
    udot = arr("udot") if "udot" in obj else Field.zeros(grid)
    try:
        t = float(obj.get("t", 0.0))
    except (TypeError, ValueError):
        raise FieldParseError("t must be a number", where("t")) from None
    return u, udot, t


def field_file_text(u: Field, udot: Field, t: float = 0.0) -> str:
    g = u.grid
    return json.dumps({
        "grid": {"box_period": g.box_period, "plane_points": g.plane_points,
                 "mode_cutoff": g.mode_cutoff, "dealias_fraction": g.dealias_fraction},
        "t": t,
        "u": {"re": u.coeffs.real.tolist(), "im": u.coeffs.imag.tolist()},
        "udot": {"re": udot.coeffs.real.tolist(), "im": udot.coeffs.imag.tolist()},
    })


def norm_report_from_bytes(data: bytes, coeffs: NonlinearityCoeffs | None = None) -> norms.NormReport:
    u, udot, t = parse_field_file(data)
    return norms.norm_report(u, udot, t, coeffs=coeffs)
