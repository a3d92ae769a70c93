from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import genlaguerre

from oamspdc.lgmodes import (
    BeamGeometry,
    LGIndex,
    adjusted_waist,
    associated_laguerre,
    double_factorial,
    factorial_f,
    lg_field,
    lg_norm,
)

GEOM = BeamGeometry(1.0, 0.05)


def series_laguerre(p, a, x):
    # exact rational sum; the alternating float series cancels badly for large x
    xf = Fraction(x)
    return float(sum((-1) ** k * math.comb(p + a, p - k) * xf**k / math.factorial(k) for k in range(p + 1)))


def test_vortex_core_is_dark():
    assert lg_field(LGIndex(1, 0), GEOM, 0.0, 0.3, 0.2) == 0


def test_fundamental_mode_normalized_adaptive_quadrature():
    def dens(r, phi):
        return abs(lg_field(LGIndex(0, 0), GEOM, r, phi)) ** 2 * r

    val, _ = integrate.dblquad(dens, 0, 2 * math.pi, 0, 12.0, epsabs=1e-13, epsrel=1e-12)
    assert abs(val - 1.0) < 1e-9


@pytest.mark.parametrize("z", [0.0, None])
def test_normalization_over_window(z):
    zr = GEOM.z_r if z is None else z
    for l in range(-5, 6):
        for p in range(4):
            # the azimuthal integral is 2 pi; the radial one is a fine 1-D quadrature
            def f(r):
                return abs(lg_field(LGIndex(l, p), GEOM, r, 0.0, zr)) ** 2 * r

            val, _ = integrate.quad(f, 0, 15.0 * GEOM.width(zr), limit=400, epsabs=1e-14, epsrel=1e-12)
            assert abs(2 * math.pi * val - 1.0) < 1e-8, (l, p)


def test_orthogonality_over_window():
    r = np.linspace(0, 12, 24001)
    phi = np.linspace(0, 2 * math.pi, 65)[:-1]
    R, PHI = np.meshgrid(r, phi, indexing="ij")
    modes = [(l, p) for l in range(-3, 4) for p in range(3)]
    fields = {m: lg_field(LGIndex(*m), GEOM, R, PHI) for m in modes}
    for a in modes:
        for b in modes:
            # uniform periodic phi grid is exact for the trigonometric part; Simpson for r
            g = np.mean(fields[a] * np.conj(fields[b]), axis=1) * 2 * math.pi * r
            val = integrate.simpson(g, x=r)
            assert abs(val - (1.0 if a == b else 0.0)) < 1e-8, (a, b)


def test_azimuthal_phase_winding():
    r = 0.7
    a1, a2 = 0.3, 1.9
    d = np.angle(lg_field(LGIndex(2, 0), GEOM, r, a2)) - np.angle(lg_field(LGIndex(2, 0), GEOM, r, a1))
    assert abs(np.angle(np.exp(1j * (d - 2 * (a2 - a1))))) < 1e-12


@given(st.integers(-6, 6), st.integers(0, 4), st.floats(0, 4), st.floats(-math.pi, math.pi))
@settings(max_examples=60, deadline=None)
def test_conjugation_symmetry(l, p, r, phi):
    a = lg_field(LGIndex(-l, p), GEOM, r, phi)
    b = np.conj(lg_field(LGIndex(l, p), GEOM, r, phi))
    assert abs(a - b) <= 1e-14 * max(1.0, abs(b))


def test_laguerre_examples():
    assert associated_laguerre(0, 3, 1.234) == 1.0
    assert associated_laguerre(1, 0, 2.0) == -1.0
    assert abs(associated_laguerre(3, 2, 0.7) - series_laguerre(3, 2, 0.7)) < 1e-12


@given(st.integers(0, 12), st.integers(0, 8), st.floats(0, 30))
@example(10, 3, 20.46875)
@settings(max_examples=100, deadline=None)
def test_laguerre_matches_series_and_scipy(p, a, x):
    ref = series_laguerre(p, a, x)
    got = associated_laguerre(p, a, x)
    assert abs(got - ref) <= 1e-11 * max(1.0, abs(ref))
    assert abs(got - genlaguerre(p, a)(x)) <= 1e-8 * max(1.0, abs(ref))


def test_adjusted_waist_values():
    assert adjusted_waist(0, 2.5) == 2.5
    assert adjusted_waist(1, 1.0) == 1.5
    assert adjusted_waist(2, 1.0) == 1.875
    assert adjusted_waist(-2, 1.0) == adjusted_waist(2, 1.0)


def test_double_factorial():
    assert double_factorial(0) == 1
    assert double_factorial(1) == 1
    assert double_factorial(5) == 15
    assert double_factorial(9) == 945
    assert double_factorial(8) == 384
    huge = double_factorial(400)
    assert isinstance(huge, int)
    with pytest.raises(OverflowError):
        float(huge)
    with pytest.raises(ValueError):
        double_factorial(-1)


def test_factorial_log_domain():
    assert factorial_f(20) == math.factorial(20)
    assert abs(factorial_f(30) / math.factorial(30) - 1) < 1e-12


def test_norm_prefactor():
    assert abs(lg_norm(0, 0) - math.sqrt(2 / math.pi)) < 1e-15
    assert abs(lg_norm(2, 1) - math.sqrt(2 * 1 / (math.pi * math.factorial(3)))) < 1e-15


def test_invalid_inputs():
    with pytest.raises(ValueError):
        LGIndex(0, -1)
    with pytest.raises(ValueError):
        BeamGeometry(0.0, 1.0)
    with pytest.raises(ValueError):
        BeamGeometry(1.0, -1.0)


def test_rayleigh_range_derived():
    g = BeamGeometry(2e-3, 5e-7)
    assert g.z_r == math.pi * 4e-6 / 5e-7
    assert abs(g.width(g.z_r) - 2e-3 * math.sqrt(2)) < 1e-18
