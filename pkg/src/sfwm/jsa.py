"""Joint spectral amplitudes on rectangular (nu_s, nu_i) grids.

Four evaluators share the same grid type:

``jsa_full``
    numeric pump-convolution integral with the exact phase mismatch;
``jsa_linearized``
    Gaussian pump envelope times a sinc phasematching function built from
    the group-delay coefficients T_s, T_i;
``jsa_dualpump_walkoff``
    the non-degenerate, temporally walking-off pump pair, in which the
    phasematching function becomes a difference of complex error functions;
``jsa_counterprop``
    the counter-propagating pump geometry.

Detunings nu are in rad/fs about the grid's center frequencies.  Amplitudes
are in arbitrary units; :func:`normalize_jsi` fixes the discrete L2 norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import AxisMismatch, FaddeevaOverflow, QuadratureNonConvergence, ZeroGrid
from .faddeeva import wofz
from .fiber import FiberModel, propagation_constant
from .phasematch import GroupDelayTerms, ProcessSpec, nonlinear_phase

__all__ = [
    "PumpSpec",
    "GridAxes",
    "JsaGrid",
    "pump_envelope",
    "sinc",
    "jsa_full",
    "jsa_linearized",
    "jsa_dualpump_walkoff",
    "jsa_counterprop",
    "normalize_jsi",
    "auto_axes",
]


@dataclass(frozen=True)
class PumpSpec:
    """Gaussian pump: amplitude exp(-nu^2/sigma^2) exp(i chirp nu^2).

    sigma is the 1/e amplitude half-width in rad/fs, ``power`` the average
    power in W, ``delay`` the arrival time in fs.
    """

    omega0: float
    sigma: float
    power: float = 1.0
    chirp: float = 0.0
    delay: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("pump bandwidth must be positive")


def _check_axis(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or a.size < 2:
        raise AxisMismatch(f"{name} axis needs at least two samples")
    d = np.diff(a)
    if np.any(d <= 0):
        raise AxisMismatch(f"{name} axis must be strictly increasing")
    if np.max(np.abs(d - d.mean())) > 1e-9 * abs(d.mean()):
        raise AxisMismatch(f"{name} axis must be uniform")
    return a


@dataclass(frozen=True, eq=False)
class GridAxes:
    omega_s0: float
    omega_i0: float
    nu_s: np.ndarray
    nu_i: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nu_s", _check_axis(self.nu_s, "signal"))
        object.__setattr__(self, "nu_i", _check_axis(self.nu_i, "idler"))

    @classmethod
    def symmetric(cls, omega_s0, omega_i0, half_span_s, half_span_i=None, n=256):
        half_span_i = half_span_s if half_span_i is None else half_span_i
        return cls(omega_s0, omega_i0, np.linspace(-half_span_s, half_span_s, n), np.linspace(-half_span_i, half_span_i, n))


@dataclass(frozen=True, eq=False)
class JsaGrid:
    nu_s: np.ndarray
    nu_i: np.ndarray
    amplitude: np.ndarray  # shape (len(nu_s), len(nu_i))
    omega_s0: float
    omega_i0: float
    regime: str
    arbitrary_units: bool = True
    scale: float = 1.0  # norm before the last normalize_jsi call

    def __post_init__(self):
        object.__setattr__(self, "nu_s", _check_axis(self.nu_s, "signal"))
        object.__setattr__(self, "nu_i", _check_axis(self.nu_i, "idler"))
        amp = np.asarray(self.amplitude, dtype=complex)
        if amp.shape != (self.nu_s.size, self.nu_i.size):
            raise AxisMismatch(f"amplitude shape {amp.shape} does not match axes")
        object.__setattr__(self, "amplitude", amp)

    @property
    def dnu_s(self) -> float:
        return float(self.nu_s[1] - self.nu_s[0])

    @property
    def dnu_i(self) -> float:
        return float(self.nu_i[1] - self.nu_i[0])

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.intensity) * self.dnu_s * self.dnu_i))

    def axes(self) -> GridAxes:
        return GridAxes(self.omega_s0, self.omega_i0, self.nu_s, self.nu_i)

    def with_amplitude(self, amplitude, regime=None) -> "JsaGrid":
        return replace(self, amplitude=amplitude, regime=regime or self.regime)


def _norm_const(sigma):
    return (2.0 / (math.pi * sigma * sigma)) ** 0.25


def pump_envelope(pump: PumpSpec, nu):
    nu = np.asarray(nu, dtype=float)
    return _norm_const(pump.sigma) * np.exp(-(nu * nu) / pump.sigma**2 + 1j * pump.chirp * nu * nu)


def sinc(x):
    """sin(x)/x with the removable singularity taken from its series."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-8
    xs = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x * x / 6.0, np.sin(xs) / xs)


def _pump_convolution(p1: PumpSpec, p2: PumpSpec, omega):
    """Closed form of integral alpha1(nu) alpha2(omega - nu) dnu."""
    a1 = 1.0 / p1.sigma**2 - 1j * p1.chirp
    a2 = 1.0 / p2.sigma**2 - 1j * p2.chirp
    pref = _norm_const(p1.sigma) * _norm_const(p2.sigma) * np.sqrt(np.pi / (a1 + a2))
    return pref * np.exp(-(a1 * a2 / (a1 + a2)) * omega * omega)


def _offsets(axes: GridAxes, center):
    """Detunings of the grid relative to a process center (if known)."""
    if center is None:
        return axes.nu_s, axes.nu_i
    return axes.nu_s + (axes.omega_s0 - center.omega_s), axes.nu_i + (axes.omega_i0 - center.omega_i)


def jsa_linearized(terms: GroupDelayTerms, pump1: PumpSpec, pump2: PumpSpec, axes: GridAxes) -> JsaGrid:
    """alpha(nu_s + nu_i) sinc(x) exp(i x) with x = (T_s nu_s + T_i nu_i)/2."""
    ns, ni = _offsets(axes, terms.center)
    S, I = ns[:, None], ni[None, :]
    x = 0.5 * (terms.T_s * S + terms.T_i * I)
    amp = _pump_convolution(pump1, pump2, S + I) * sinc(x) * np.exp(1j * x)
    return JsaGrid(axes.nu_s, axes.nu_i, amp, axes.omega_s0, axes.omega_i0, "linearized")


def _walkoff_term(c, X):
    """exp(-X^2) erf(c - iX) rewritten without overflow, minus its constant.

    exp(-X^2) erf(c - iX) = exp(-X^2) - exp(-c^2 + 2icX) w(X + ic); the
    exp(-X^2) piece cancels in the difference taken by the caller, so only
    the second term is returned (with sign).  For c < 0 the reflection
    formula keeps the Faddeeva argument in the upper half-plane.
    """
    if c >= 0:
        return -np.exp(-c * c + 2j * c * X) * wofz(X + 1j * c)
    return -2.0 * np.exp(-X * X) + np.exp(-c * c + 2j * c * X) * wofz(-X - 1j * c)


def jsa_dualpump_walkoff(
    terms: GroupDelayTerms,
    pump1: PumpSpec,
    pump2: PumpSpec,
    axes: GridAxes,
    pre_delay: float = 0.0,
    gaussian_limit: bool = False,
) -> JsaGrid:
    """Non-degenerate pump pair with temporal walk-off tau_p.

    The phasematching factor is
    exp(-X^2) [erf(sigma (tau + tau_p)/2 - iX) - erf(sigma tau/2 - iX)]
    with X = (T_s nu_s + T_i nu_i)/(sigma tau_p), sigma the effective pump
    bandwidth and tau = ``pre_delay``.  ``gaussian_limit`` replaces it with
    exp(-X^2), the form reached when |sigma tau_p| >> 1 and the slow pump
    leads by |tau_p|/2.
    """
    s1, s2 = pump1.sigma, pump2.sigma
    sigma = s1 * s2 / math.hypot(s1, s2)
    ns, ni = _offsets(axes, terms.center)
    S, I = ns[:, None], ni[None, :]
    envelope = _pump_convolution(pump1, pump2, S + I)
    lin = terms.T_s * S + terms.T_i * I
    tau_p = terms.tau_p
    if tau_p == 0.0:
        if gaussian_limit:
            raise ValueError("Gaussian limit needs a non-zero pump walk-off")
        pm = sinc(lin / 2) * np.exp(0.5j * lin)
        regime = "walkoff_sinc_limit"
    else:
        X = lin / (sigma * tau_p)
        if gaussian_limit:
            pm = np.exp(-X * X).astype(complex)
            regime = "walkoff_gaussian"
        else:
            a = sigma * (pre_delay + tau_p) / 2
            b = sigma * pre_delay / 2
            with np.errstate(invalid="ignore", over="ignore"):  # non-finite cells are reported below
                pm = _walkoff_term(a, X) - _walkoff_term(b, X)
            regime = "walkoff_erf"
            bad = ~np.isfinite(pm)
            if np.any(bad):
                j, l = (int(v[0]) for v in np.nonzero(bad))
                raise FaddeevaOverflow(f"non-finite erf difference at grid cell ({j}, {l})")
    return JsaGrid(axes.nu_s, axes.nu_i, envelope * pm, axes.omega_s0, axes.omega_i0, regime)


# --- quadrature-based evaluators ---------------------------------------------

_GL_ORDER = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)


def _panel_nodes(n_panels):
    """Gauss-Legendre nodes/weights on [-1, 1] split into equal panels."""
    edges = np.linspace(-1.0, 1.0, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    w = (half[:, None] * _GL_W[None, :]).ravel()
    return x, w


def _uniform_sum_index(axes: GridAxes):
    """Signal/idler axes share a step: nu_s[j] + nu_i[l] depends on j + l only."""
    ds, di = axes.nu_s[1] - axes.nu_s[0], axes.nu_i[1] - axes.nu_i[0]
    return abs(ds - di) <= 1e-12 * abs(ds)


def _convolution_quadrature(fiber, process, pump1, pump2, axes, integrand_phase, tol, max_level, min_level=2):
    """Shared driver for the full and counter-propagating evaluators.

    ``integrand_phase(kp1, kp2, ks, ki, nu1)`` returns the complex factor
    multiplying alpha1 alpha2 at each quadrature node.
    """
    if not _uniform_sum_index(axes):
        raise AxisMismatch("quadrature evaluators need equal signal and idler grid steps")
    ws = axes.omega_s0 + axes.nu_s
    wi = axes.omega_i0 + axes.nu_i
    ns, ni = ws.size, wi.size
    ks = propagation_constant(fiber, process.signal.mode, ws)
    ki = propagation_constant(fiber, process.idler.mode, wi)
    # Omega = (omega_s + omega_i) - (omega_p1 + omega_p2): deviation of the pump sum
    omega_sum0 = axes.omega_s0 + axes.omega_i0 + axes.nu_s[0] + axes.nu_i[0]
    step = axes.nu_s[1] - axes.nu_s[0]
    Om = omega_sum0 - pump1.omega0 - pump2.omega0 + step * np.arange(ns + ni - 1)
    s1, s2 = pump1.sigma**2, pump2.sigma**2
    centre = Om * s1 / (s1 + s2)
    width = 5.0 * math.sqrt(s1 * s2 / (s1 + s2))

    def evaluate(n_panels):
        x, w = _panel_nodes(n_panels)
        nu1 = centre[:, None] + width * x[None, :]  # (nOm, nodes)
        nu2 = Om[:, None] - nu1
        kp1 = propagation_constant(fiber, process.pump1.mode, pump1.omega0 + nu1)
        kp2 = propagation_constant(fiber, process.pump2.mode, pump2.omega0 + nu2)
        weight = pump_envelope(pump1, nu1) * pump_envelope(pump2, nu2) * (w * width)[None, :]
        out = np.empty((ns, ni), dtype=complex)
        for j in range(ns):
            sl = slice(j, j + ni)
            val = integrand_phase(kp1[sl], kp2[sl], ks[j], ki[:, None], nu1[sl])
            out[j] = np.sum(weight[sl] * val, axis=1)
        return out

    prev = evaluate(2**min_level)
    for level in range(min_level + 1, max_level + 1):
        cur = evaluate(2**level)
        peak = np.max(np.abs(cur))
        if peak == 0 or np.max(np.abs(cur - prev)) <= tol * peak:
            return cur
        prev = cur
    raise QuadratureNonConvergence(f"pump-convolution quadrature not converged after {2**max_level} panels")


def jsa_full(
    fiber: FiberModel,
    process: ProcessSpec,
    pump1: PumpSpec,
    pump2: PumpSpec,
    axes: GridAxes,
    tol: float = 1e-10,
    max_level: int = 10,
) -> JsaGrid:
    """Numeric pump-convolution JSA with the exact co-propagating mismatch."""
    if not process.co_propagating:
        raise ValueError("jsa_full handles co-propagating processes; use jsa_counterprop")
    L = fiber.length_um
    phi = nonlinear_phase(process, fiber)

    def phase(kp1, kp2, ks, ki, nu1):
        half = 0.5 * L * (kp1 + kp2 - ks - ki - phi)
        return sinc(half) * np.exp(1j * half)

    amp = _convolution_quadrature(fiber, process, pump1, pump2, axes, phase, tol, max_level)
    return JsaGrid(axes.nu_s, axes.nu_i, amp, axes.omega_s0, axes.omega_i0, "full")


def jsa_counterprop(
    fiber: FiberModel,
    process: ProcessSpec,
    pump1: PumpSpec,
    pump2: PumpSpec,
    axes: GridAxes,
    tol: float = 1e-10,
    max_level: int = 12,
) -> JsaGrid:
    """Counter-propagating pumps: sinc(L dk/2) exp(i L kappa/2) exp(i nu1 tau).

    dk uses the signed per-direction form and kappa is the sum of the four
    propagation constants.  tau is the arrival-time difference
    ``pump2.delay - pump1.delay``.
    """
    if process.pump1.direction == process.pump2.direction:
        raise ValueError("counter-propagating geometry needs pumps travelling in opposite directions")
    L = fiber.length_um
    phi = nonlinear_phase(process, fiber)
    d = [w.direction for w in process.waves]
    tau = pump2.delay - pump1.delay

    def phase(kp1, kp2, ks, ki, nu1):
        dk = d[0] * kp1 + d[1] * kp2 - d[2] * ks - d[3] * ki - phi
        kappa = kp1 + kp2 + ks + ki
        return sinc(0.5 * L * dk) * np.exp(0.5j * L * kappa + 1j * nu1 * tau)

    amp = _convolution_quadrature(fiber, process, pump1, pump2, axes, phase, tol, max_level)
    return JsaGrid(axes.nu_s, axes.nu_i, amp, axes.omega_s0, axes.omega_i0, "counterprop")


def normalize_jsi(grid: JsaGrid) -> JsaGrid:
    """Scale to unit discrete L2 norm; the previous norm is kept in ``scale``."""
    n = grid.norm()
    if not n > 0 or not np.isfinite(n):
        raise ZeroGrid("cannot normalize an all-zero (or non-finite) amplitude")
    return replace(grid, amplitude=grid.amplitude / n, scale=n)


def auto_axes(terms: GroupDelayTerms, pump1: PumpSpec, pump2: PumpSpec, n: int = 256, widths: float = 4.0) -> GridAxes:
    """Grid spanning +-``widths`` marginal widths of the linearized JSI.

    Marginal widths come from the second moments of the linearized JSI with
    the sinc replaced by its Gaussian fit, which has closed-form moments.
    """
    from .constants import GAMMA_SINC

    if terms.center is None:
        raise ValueError("terms need center frequencies to place the grid")
    # |F|^2 ~ exp(-2 a (ns+ni)^2 - 2 g (Ts ns + Ti ni)^2 / 4)
    a = 1.0 / (pump1.sigma**2 + pump2.sigma**2)
    g = GAMMA_SINC / 4.0
    Ts, Ti = terms.T_s, terms.T_i
    Q = 2.0 * np.array([[a + g * Ts * Ts, a + g * Ts * Ti], [a + g * Ts * Ti, a + g * Ti * Ti]])
    cov = np.linalg.pinv(Q) / 2.0
    sd = np.sqrt(np.maximum(np.diag(cov), 0.0))
    big = 2.0 * math.hypot(pump1.sigma, pump2.sigma)
    sd = np.where(sd > 0, np.minimum(sd, big), big)
    c = terms.center
    return GridAxes.symmetric(c.omega_s, c.omega_i, widths * sd[0], widths * sd[1], n)
