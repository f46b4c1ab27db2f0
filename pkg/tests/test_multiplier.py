"""Symbolic bilinear multipliers and their agreement with the physical-space route."""
import math

import numpy as np
import pytest
import sympy as sp

from kglab import multiplier as mp
from kglab.dynamics import StateU, normalize_initial_data
from kglab.nonlinearity import evaluate_nonlinearity, preset, random_coeffs
from kglab.spectral import GridSpec

from conftest import bump, random_real_field


@pytest.fixture(scope="module")
def tiny_grid():
    return GridSpec(box_period=4 * math.pi, plane_points=16, mode_cutoff=3)


def _rel(a, b):
    return np.abs(a - b).max() / max(np.abs(b).max(), 1e-300)


class TestSymbols:
    def test_zero_coeffs(self):
        for expr in mp.multiplier_symbols(preset("zero")).values():
            assert expr == 0

    def test_dt_squared_is_quarter(self):
        syms = mp.multiplier_symbols(preset("dt2"))
        assert set(syms) == set(mp.CHANNELS)
        for expr in syms.values():
            assert sp.simplify(expr - sp.Rational(1, 4)) == 0

    def test_u_squared_direct_substitution(self, rng):
        # u^ = i (U_+ - U_-) / (2 Lambda) gives -mu nu / (4 Lambda_a Lambda_b)
        fns = mp.numeric_symbols(preset("u2"))
        x = rng.standard_normal((6, 50)) * 3
        La = np.sqrt(1 + x[0] ** 2 + x[1] ** 2 + x[2] ** 2)
        Lb = np.sqrt(1 + x[3] ** 2 + x[4] ** 2 + x[5] ** 2)
        for (mu, nu), fn in fns.items():
            assert np.allclose(fn(*x), -mu * nu / (4 * La * Lb), rtol=1e-14, atol=0)

    def test_mixed_terms_stay_in_families(self):
        assert mp.check_family_membership(preset("mixed")) == []

    @pytest.mark.parametrize("seed", [0, 1])
    def test_random_terms_stay_in_families(self, seed):
        assert mp.check_family_membership(random_coeffs(np.random.default_rng(seed))) == []

    def test_xi_eta_rewrite(self):
        expr = mp.multiplier_symbols(preset("u2"))[(1, 1)]
        rewritten = mp.in_xi_eta(expr)
        names = {s.name for s in rewritten.free_symbols}
        assert names == {"xi1", "xi2", "eta1", "eta2", "n", "m"}

    def test_key_roundtrip(self):
        d = preset("mixed").to_dict()
        back = mp.key_to_dict(mp.dict_to_key(d))
        for k in ("g", "h", "q"):
            assert np.array_equal(np.asarray(back[k]), np.asarray(d[k]))


class TestDualPath:
    @pytest.mark.parametrize("name", ["dt2", "u2", "mixed"])
    def test_presets(self, tiny_grid, rng, name):
        u = random_real_field(tiny_grid, rng, 1e-2)
        ud = random_real_field(tiny_grid, rng, 1e-2)
        s = normalize_initial_data(u, ud)
        phys = evaluate_nonlinearity(s.u(), s.udot(), preset(name)).coeffs
        spec = mp.spectral_nonlinearity(s.U, preset(name)).coeffs
        assert _rel(spec, phys) <= 1e-10

    @pytest.mark.parametrize("seed", [3, 4, 5])
    def test_random_coeffs(self, tiny_grid, seed):
        rng = np.random.default_rng(seed)
        c = random_coeffs(rng)
        s = normalize_initial_data(bump(tiny_grid, 1.2, 1e-2), random_real_field(tiny_grid, rng, 1e-3))
        phys = evaluate_nonlinearity(s.u(), s.udot(), c).coeffs
        spec = mp.spectral_nonlinearity(s.U, c).coeffs
        assert _rel(spec, phys) <= 1e-10

    def test_zero_state(self, tiny_grid):
        U = StateU(random_real_field(tiny_grid, np.random.default_rng(0)) * 0.0).U
        assert np.abs(mp.spectral_nonlinearity(U, preset("mixed")).coeffs).max() == 0.0
