"""First-order Klein-Gordon dynamics for U = u_t - i*Lambda*u.

    (d_t + i Lambda) U = F(u, du, d^2 u)

is integrated with a fourth-order Lawson (integrating-factor) Runge-Kutta
scheme: the linear part is applied exactly through exp(-i h Lambda).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nonlinearity import NonlinearityCoeffs, evaluate_nonlinearity
from .spectral import ContractError, Field, apply_lambda, propagate


class IntegrationError(RuntimeError):
    """Blow-up or non-finite values during time stepping."""

    def __init__(self, msg, state=None):
        super().__init__(msg)
        self.state = state


@dataclass(frozen=True)
class StateU:
    U: Field
    t: float = 0.0

    @property
    def grid(self):
        return self.U.grid

    def u(self) -> Field:
        """u = i (U - conj U) / (2 Lambda)."""
        U = self.U
        return apply_lambda((U - U.conj()) * 0.5j, -1.0)

    def udot(self) -> Field:
        """u_t = (U + conj U) / 2."""
        return (self.U + self.U.conj()) * 0.5


def _is_real(f: Field, tol: float = 1e-12) -> bool:
    scale = max(f.l2(), 1e-300)
    return float(np.linalg.norm(f.coeffs - f.conj().coeffs)) <= tol * scale


def normalize_initial_data(u0: Field, u1: Field) -> StateU:
    """U_0 = u_1 - i Lambda u_0 for real-valued data."""
    if not (_is_real(u0) and _is_real(u1)):
        raise ContractError("initial data must be real-valued")
    return StateU(u1 - apply_lambda(u0, 1.0) * 1j, 0.0)


def rhs(U: Field, coeffs: NonlinearityCoeffs) -> Field:
    """F evaluated at the state encoded by U."""
    s = StateU(U)
    return evaluate_nonlinearity(s.u(), s.udot(), coeffs)


def step(state: StateU, h: float, coeffs: NonlinearityCoeffs) -> StateU:
    """One Lawson RK4 step of size h."""
    if not h > 0:
        raise ContractError("step size must be positive")
    U = state.U
    E_half = np.exp(-0.5j * h * U.grid.lam)
    if coeffs.is_zero:
        return StateU(U.multiply(E_half * E_half), state.t + h)
    E_full = E_half * E_half
    u0 = U.coeffs
    k1 = rhs(U, coeffs).coeffs
    k2 = rhs(Field(U.grid, E_half * (u0 + 0.5 * h * k1)), coeffs).coeffs
    k3 = rhs(Field(U.grid, E_half * u0 + 0.5 * h * k2), coeffs).coeffs
    k4 = rhs(Field(U.grid, E_full * u0 + h * E_half * k3), coeffs).coeffs
    new = E_full * u0 + (h / 6.0) * (E_full * k1 + 2.0 * E_half * (k2 + k3) + k4)
    out = Field(U.grid, new)
    n0, n1 = U.l2(), out.l2()
    if not out.is_finite() or (n0 > 0 and n1 > 10.0 * n0):
        raise IntegrationError(f"blow-up at t={state.t + h:.6g}: |U| {n0:.3e} -> {n1:.3e}", state)
    return StateU(out, state.t + h)


def integrate(state: StateU, t_end: float, h: float, coeffs: NonlinearityCoeffs, callback=None) -> StateU:
    """Step to t_end with steps of at most h; ``callback(state)`` after every step."""
    nsteps = max(1, math.ceil((t_end - state.t) / h - 1e-9))
    dt = (t_end - state.t) / nsteps
    t0 = state.t
    for i in range(nsteps):
        state = step(state, dt, coeffs)
        state = StateU(state.U, t0 + (i + 1) * dt)
        if callback is not None:
            callback(state)
    return state


def profile(state: StateU) -> Field:
    """V = exp(i t Lambda) U."""
    return propagate(state.U, state.t, +1)


# -- phases -------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseQuery:
    xi: tuple[float, float]
    eta: tuple[float, float]
    n: int
    m: int
    mu: int = 1
    nu: int = 1


def _lam(v1, v2, n):
    return np.sqrt(1.0 + v1 * v1 + v2 * v2 + n * n)


def phase(q: PhaseQuery) -> float:
    """Lambda_n(xi) - mu Lambda_{n-m}(xi - eta) - nu Lambda_m(eta)."""
    return float(phase_array(np.asarray(q.xi, float), np.asarray(q.eta, float), q.n, q.m, q.mu, q.nu))


def phase_array(xi, eta, n, m, mu, nu):
    """Vectorized phase; xi, eta have a trailing axis of length 2."""
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    d = xi - eta
    return (_lam(xi[..., 0], xi[..., 1], n)
            - mu * _lam(d[..., 0], d[..., 1], np.asarray(n) - m)
            - nu * _lam(eta[..., 0], eta[..., 1], m))


def phase_gradient(q: PhaseQuery) -> np.ndarray:
    """(d/dxi1, d/dxi2, d/deta1, d/deta2) of the phase."""
    xi = np.asarray(q.xi, float)
    eta = np.asarray(q.eta, float)
    d = xi - eta
    a = xi / _lam(xi[0], xi[1], q.n)
    b = d / _lam(d[0], d[1], q.n - q.m)
    c = eta / _lam(eta[0], eta[1], q.m)
    return np.concatenate([a - q.mu * b, q.mu * b - q.nu * c])


def phase_hessian(q: PhaseQuery) -> np.ndarray:
    """4x4 Hessian of the phase in (xi, eta)."""
    def hess(v, n):
        L = _lam(v[0], v[1], n)
        return np.eye(2) / L - np.outer(v, v) / L ** 3

    xi = np.asarray(q.xi, float)
    eta = np.asarray(q.eta, float)
    A = hess(xi, q.n)
    B = hess(xi - eta, q.n - q.m)
    C = hess(eta, q.m)
    H = np.zeros((4, 4))
    H[:2, :2] = A - q.mu * B
    H[:2, 2:] = q.mu * B
    H[2:, :2] = q.mu * B
    H[2:, 2:] = -q.mu * B - q.nu * C
    return H


def _third_derivative_norm(v, n):
    """Max-entry bound of the third derivative tensor of Lambda at (v, n)."""
    L = _lam(v[0], v[1], n)
    T = np.zeros((2, 2, 2))
    for i in range(2):
        for j in range(2):
            for k in range(2):
                t = 3 * v[i] * v[j] * v[k] / L ** 5
                t -= ((i == j) * v[k] + (i == k) * v[j] + (j == k) * v[i]) / L ** 3
                T[i, j, k] = t
    return float(np.abs(T).max())


def verify_phase_bounds(sample_count: int = 100_000, seed: int = 0, xi_scale: float = 20.0,
                        n_max: int = 40, constant: float = 2.0) -> dict:
    """Randomized sweep of the three-wave denominators.

    For all sign pairs, checks
        |Lambda_n(xi) +- Lambda_{n-m}(xi-eta) +- Lambda_m(eta)| >= 1 / (constant sqrt(1 + min(a, b, c)))
    and records sup |grad Phi| / |Phi| and sup |d^alpha (1/Phi)| |Phi| for |alpha| <= 2
    over the (mu, nu) phases.  Violations are returned as witness queries.
    """
    rng = np.random.default_rng(seed)
    # mix of scales so near-resonant low and high frequencies are both visited
    scale = xi_scale * rng.random(sample_count)[:, None] ** 2
    xi = rng.standard_normal((sample_count, 2)) * scale
    eta = rng.standard_normal((sample_count, 2)) * scale
    n = rng.integers(-n_max, n_max + 1, sample_count)
    m = rng.integers(-n_max, n_max + 1, sample_count)
    d = xi - eta
    a = np.sum(xi ** 2, 1) + n ** 2
    b = np.sum(d ** 2, 1) + (n - m) ** 2
    c = np.sum(eta ** 2, 1) + m ** 2
    bound = 1.0 / (constant * np.sqrt(1.0 + np.minimum(np.minimum(a, b), c)))
    La, Lb, Lc = np.sqrt(1 + a), np.sqrt(1 + b), np.sqrt(1 + c)
    violations = []
    worst = math.inf
    for s1 in (1, -1):
        for s2 in (1, -1):
            den = np.abs(La + s1 * Lb + s2 * Lc)
            r = den / bound
            worst = min(worst, float(r.min()))
            for i in np.nonzero(den < bound)[0][:10]:
                violations.append({"xi": xi[i].tolist(), "eta": eta[i].tolist(), "n": int(n[i]),
                                   "m": int(m[i]), "signs": (s1, s2), "denominator": float(den[i]),
                                   "bound": float(bound[i])})
    # derivative-of-1/Phi ratios on a subsample (gradients/Hessians are per-query)
    grad_ratio = 0.0
    inv_ratio = 0.0
    sub = min(sample_count, 5000)
    for i in range(sub):
        for mu in (1, -1):
            for nu in (1, -1):
                q = PhaseQuery(tuple(xi[i]), tuple(eta[i]), int(n[i]), int(m[i]), mu, nu)
                P = phase(q)
                gr = phase_gradient(q)
                H = phase_hessian(q)
                grad_ratio = max(grad_ratio, float(np.linalg.norm(gr)) / abs(P))
                # d(1/P) = -grad/P^2 ; d^2(1/P) = -H/P^2 + 2 grad grad^T / P^3
                d1 = np.linalg.norm(gr) / P ** 2
                d2 = np.abs(-H / P ** 2 + 2 * np.outer(gr, gr) / P ** 3).max()
                inv_ratio = max(inv_ratio, float(max(d1, d2)) * abs(P))
    return {
        "samples": sample_count,
        "violations": violations,
        "min_margin": worst,
        "sup_grad_over_phase": grad_ratio,
        "sup_inverse_derivatives": inv_ratio,
    }
