import math

import mpmath
import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given, settings, strategies as st

from sfwm.faddeeva import erf, wofz


def _mp_w(z):
    z = mpmath.mpc(z.real, z.imag)
    return complex(mpmath.exp(-z * z) * mpmath.erfc(-1j * z))


def test_against_scipy_on_disc():
    r = np.linspace(0, 10, 60)
    t = np.linspace(0, 2 * np.pi, 90)
    z = (r[:, None] * np.exp(1j * t[None, :])).ravel()
    z = z[np.abs(np.exp(-z * z)) < 1e300]  # keep the reference finite
    ref = sp.wofz(z)
    rel = np.abs(wofz(z) - ref) / np.maximum(np.abs(ref), 1e-300)
    assert rel.max() < 1e-10


@pytest.mark.parametrize("z", [0.5 + 0.5j, 3 - 2j, -4 + 0.1j, 9.5 + 1e-3j, 1e-6j, -2 - 3j])
def test_against_arbitrary_precision(z):
    assert wofz(z) == pytest.approx(_mp_w(z), rel=1e-10)


def test_real_erf():
    for x in np.linspace(-5, 5, 41):
        assert erf(x).real == pytest.approx(math.erf(x), abs=1e-13)


@settings(max_examples=200, deadline=None)
@given(st.floats(-6, 6), st.floats(-3, 3))
def test_complex_erf_matches_scipy(x, y):
    z = complex(x, y)
    ref = sp.erf(z)
    assert abs(erf(z) - ref) <= 1e-10 * max(1.0, abs(ref))


@settings(max_examples=100, deadline=None)
@given(st.floats(-8, 8), st.floats(0, 8))
def test_reflection_symmetry(x, y):
    # w(-conj z) = conj w(z)
    z = complex(x, y)
    assert wofz(-z.conjugate()) == pytest.approx(np.conj(wofz(z)), rel=1e-12, abs=1e-300)
