"""Source design searches built on the phasematching and group-delay tools.

* :func:`factorable_search` walks a traced contour and returns the segments
  on which T_s T_i <= 0, the necessary condition for a factorable state.
* :func:`symmetric_bandwidth_solve` returns the pump bandwidth (or fiber
  length) for which 2 Gamma sigma^2 |T_s T_i| = 1.
* :func:`ultrabroadband_search` looks for a transverse scale at which a
  zero-dispersion point also has vanishing fourth-order dispersion.
* :func:`critical_power` finds the pump power at which a phasematching loop
  closes to a point.
* :func:`tuning_scan` follows the outer-branch emission wavelengths as the
  fiber is scaled.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import constants as K
from .errors import EmptyContour, SfwmError, NoLoop, NonNegativeProduct, NoRoot, NotAntisymmetric
from .fiber import FiberModel, ModeId, find_zdw, k_derivatives, scale_fiber
from .phasematch import (
    CenterFrequencies,
    ProcessSpec,
    _field,
    column_roots,
    phasematch_angle,
    raman_overlap,
    trace_contour,
)

__all__ = [
    "DesignCandidate",
    "FactorableSegment",
    "DegenerateDesignWarning",
    "factorable_search",
    "symmetric_residual",
    "symmetric_bandwidth_solve",
    "UltrabroadbandCandidate",
    "ultrabroadband_search",
    "CriticalPower",
    "solution_count",
    "critical_power",
    "TuningRow",
    "tuning_scan",
]

# |T_s T_i| (fs^2) below which a point counts as a segment boundary
BOUNDARY_EPS = 1e-4
# relative |T_s + T_i| tolerated for a "symmetric" design
SYMMETRY_TOL = 0.05
# |k3| (fs^3/um) below which an ultrabroadband candidate is flagged
K3_FLAT = 1e-6


class DegenerateDesignWarning(UserWarning):
    """Every contour point has T_s = T_i = 0 (no dispersion to design with)."""


@dataclass(frozen=True)
class DesignCandidate:
    omega_p1: float
    omega_p2: float
    omega_s: float
    omega_i: float
    T_s: float
    T_i: float
    theta_deg: float  # NaN when T_s = T_i = 0
    factorable: bool  # T_s T_i <= 0
    sigma1: float | None = None
    sigma2: float | None = None
    length_m: float = 1.0
    scale_factor: float = 1.0
    process: str = ""
    symmetric_residual: float | None = None
    raman_status: str = "clear"
    raman_fraction: float = 0.0
    degenerate: bool = False

    @property
    def center(self) -> CenterFrequencies:
        return CenterFrequencies(self.omega_p1, self.omega_p2, self.omega_s, self.omega_i)

    def row(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class FactorableSegment:
    branch: int  # index of the contour polyline the segment lies on
    candidates: tuple[DesignCandidate, ...]
    closed: bool = False  # segment covers a whole closed loop


def _delays(fiber, process, wp1, wp2, ws, wi, sigma1, sigma2):
    """T_s, T_i arrays (fs) for arrays of center frequencies."""
    k1 = lambda mode, w: k_derivatives(fiber, mode, np.atleast_1d(w))[1][0]
    L = fiber.length_um
    kp1, kp2 = k1(process.pump1.mode, wp1), k1(process.pump2.mode, wp2)
    ks, ki = k1(process.signal.mode, ws), k1(process.idler.mode, wi)
    tau_p = L * (kp1 - kp2)
    shift = tau_p * sigma1**2 / (sigma1**2 + sigma2**2)
    return L * (kp2 - ks) + shift, L * (kp2 - ki) + shift


def _candidate(fiber, process, wp1, wp2, d, Ts, Ti, sigma1, sigma2, sigma_given):
    wbar = 0.5 * (wp1 + wp2)
    c = CenterFrequencies(wp1, wp2, wbar + d, wbar - d)
    degenerate = Ts == 0.0 and Ti == 0.0
    theta = math.nan if degenerate else phasematch_angle(_Terms(Ts, Ti))[0]
    prod = Ts * Ti
    s1 = sigma1
    if not sigma_given and prod < 0:
        s1 = 1.0 / math.sqrt(2.0 * K.GAMMA_SINC * abs(prod))
    resid = None if prod >= 0 or s1 is None else 2.0 * K.GAMMA_SINC * s1 * s1 * abs(prod) - 1.0
    flag = raman_overlap(c)
    return DesignCandidate(
        wp1, wp2, c.omega_s, c.omega_i, float(Ts), float(Ti), theta, bool(prod <= 0),
        s1, sigma2 if sigma_given else s1, fiber.length_m, fiber.scale_factor, process.label,
        resid, flag.status, flag.fraction, degenerate,
    )


@dataclass(frozen=True)
class _Terms:
    T_s: float
    T_i: float


def factorable_search(
    fiber: FiberModel,
    process: ProcessSpec,
    pump_range,
    detuning_range=None,
    samples: int = 128,
    pump2_omega: float | None = None,
    sigma1: float | None = None,
    sigma2: float | None = None,
) -> list[FactorableSegment]:
    """Segments of the phasematching contour with T_s T_i <= 0.

    ``pump_range`` and ``detuning_range`` are (low, high) in rad/fs; the
    detuning window defaults to +-40% of the upper pump frequency.  Segment
    ends are refined along the contour until |T_s T_i| <= 1e-4 fs^2, keeping
    the endpoint on the feasible side.  Without ``sigma1`` each candidate
    carries the bandwidth solving the symmetric condition (when T_s T_i < 0).
    """
    lo, hi = pump_range
    if detuning_range is None:
        detuning_range = (-0.4 * hi, 0.4 * hi)
    x = np.linspace(lo, hi, samples)
    y = np.linspace(detuning_range[0], detuning_range[1], samples + 1)
    contour = trace_contour(fiber, process, x, y, pump2_omega=pump2_omega)
    sigma_given = sigma1 is not None
    s1 = sigma1 if sigma_given else 1.0
    s2 = (sigma2 if sigma2 is not None else s1) if sigma_given else 1.0

    def wp2_of(wp):
        return wp if pump2_omega is None else np.full_like(np.asarray(wp, float), pump2_omega)

    def products(wp, d):
        wp = np.atleast_1d(np.asarray(wp, float))
        d = np.atleast_1d(np.asarray(d, float))
        w2 = wp2_of(wp)
        wbar = 0.5 * (wp + w2)
        return _delays(fiber, process, wp, w2, wbar + d, wbar - d, s1, s2)

    def make(wp, d, Ts, Ti):
        w2 = wp if pump2_omega is None else pump2_omega
        return _candidate(fiber, process, float(wp), float(w2), float(d), float(Ts), float(Ti),
                          sigma1, sigma2, sigma_given)

    if contour.degenerate:
        warnings.warn("phase mismatch vanishes identically; every point is trivially factorable", DegenerateDesignWarning)
        cands = []
        for wp in x:
            cands.append(make(wp, 0.0, 0.0, 0.0))
        return [FactorableSegment(-1, tuple(cands), False)]
    if contour.empty:
        raise EmptyContour("no phasematched points in the search window")

    fun = _field(fiber, process, pump2_omega)
    hx, hy = x[1] - x[0], y[1] - y[0]
    segments: list[FactorableSegment] = []
    all_degenerate = True
    for pid, poly in enumerate(contour.polylines):
        pts = np.asarray(poly.points, dtype=float)
        if len(pts) < 2:
            continue
        Ts, Ti = products(pts[:, 0], pts[:, 1])
        prod = Ts * Ti
        if np.any((Ts != 0) | (Ti != 0)):
            all_degenerate = False
        feas = prod <= 0
        n = len(pts)
        if poly.closed and np.all(feas):
            segments.append(FactorableSegment(pid, tuple(make(*pts[j], Ts[j], Ti[j]) for j in range(n)), True))
            continue
        if poly.closed and not np.all(feas):
            # start the walk on an infeasible vertex so no segment wraps around
            start = int(np.nonzero(~feas)[0][0])
            order = np.r_[np.arange(start, n), np.arange(0, start)]
            pts, Ts, Ti, feas = pts[order], Ts[order], Ti[order], feas[order]
            pts, Ts, Ti, feas = (np.concatenate([a, a[:1]]) for a in (pts, Ts, Ti, feas))
            n += 1
        j = 0
        while j < n:
            if not feas[j]:
                j += 1
                continue
            k = j
            while k + 1 < n and feas[k + 1]:
                k += 1
            cands = []
            if j > 0:
                cands.append(_refine(fun, products, make, pts[j], pts[j - 1], hx, hy))
            cands += [make(*pts[m], Ts[m], Ti[m]) for m in range(j, k + 1)]
            if k + 1 < n:
                cands.append(_refine(fun, products, make, pts[k], pts[k + 1], hx, hy))
            segments.append(FactorableSegment(pid, tuple(cands), False))
            j = k + 1
    if all_degenerate and segments:
        warnings.warn("T_s = T_i = 0 along the whole contour", DegenerateDesignWarning)
    return segments


def _project(fun, wp, d, horizontal, hx, hy):
    """Nearest zero of dk from (wp, d), searching along one grid axis."""
    if horizontal:
        g = lambda t: float(fun(wp, t))
        a, b, step = d, d, hy
    else:
        g = lambda t: float(fun(t, d))
        a, b, step = wp, wp, hx
    ga = g(a)
    if ga == 0:
        return wp, d
    for m in (0.25, 0.5, 1.0, 2.0):
        a, b = (d if horizontal else wp) - m * step, (d if horizontal else wp) + m * step
        fa, fb = g(a), g(b)
        if np.isfinite(fa) and np.isfinite(fb) and fa * fb <= 0:
            r = optimize.brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            return (wp, r) if horizontal else (r, d)
    return None


def _refine(fun, products, make, inside, outside, hx, hy, eps=BOUNDARY_EPS, iters=200):
    """Boundary point of a feasible run between a feasible and an infeasible vertex."""
    dx, dy = (outside - inside)
    horizontal = abs(dx / hx) >= abs(dy / hy)

    def at(t):
        p = inside + t * (outside - inside)
        q = _project(fun, p[0], p[1], horizontal, hx, hy)
        if q is None:
            return None
        Ts, Ti = products(q[0], q[1])
        return q, float(Ts[0]), float(Ti[0])

    lo, hi = 0.0, 1.0
    best = at(0.0)
    if best is None:
        Ts, Ti = products(*inside)
        return make(*inside, Ts[0], Ti[0])
    for _ in range(iters):
        if abs(best[1] * best[2]) <= eps:
            break
        mid = 0.5 * (lo + hi)
        r = at(mid)
        if r is None:
            hi = mid
            continue
        if r[1] * r[2] <= 0:
            lo, best = mid, r
        else:
            hi = mid
        if hi - lo < 1e-16:
            break
    (wp, d), Ts, Ti = best
    return make(wp, d, Ts, Ti)


def symmetric_residual(sigma: float, T_s: float, T_i: float) -> float:
    """2 Gamma sigma^2 |T_s T_i| - 1; zero for the symmetric factorable design."""
    return 2.0 * K.GAMMA_SINC * sigma * sigma * abs(T_s * T_i) - 1.0


def symmetric_bandwidth_solve(terms, solve_for: str = "sigma", sigma: float | None = None, length_m: float | None = None) -> float:
    """Bandwidth (rad/fs) or length satisfying 2 Gamma sigma^2 |T_s T_i| = 1.

    For ``solve_for="length"`` the delays scale linearly with length, so the
    condition fixes the length factor f = 1/(sigma sqrt(2 Gamma |T_s T_i|)).
    The new length is returned when ``length_m`` is given, else f itself.
    """
    Ts, Ti = terms.T_s, terms.T_i
    prod = Ts * Ti
    if not prod < 0:
        raise NonNegativeProduct(f"T_s T_i = {prod:.6g} fs^2 is not negative; no factorable solution")
    asym = abs(Ts + Ti) / max(abs(Ts), abs(Ti))
    if asym > SYMMETRY_TOL:
        raise NotAntisymmetric(
            f"|T_s + T_i| / max|T| = {asym:.3g} exceeds the {SYMMETRY_TOL:.0%} symmetry tolerance"
        )
    root = math.sqrt(2.0 * K.GAMMA_SINC * abs(prod))
    if solve_for == "sigma":
        return 1.0 / root
    if solve_for == "length":
        if sigma is None or sigma <= 0:
            raise ValueError("a positive pump bandwidth is required to solve for length")
        f = 1.0 / (sigma * root)
        return f if length_m is None else f * length_m
    raise ValueError("solve_for must be 'sigma' or 'length'")


# --- ultrabroadband -----------------------------------------------------------

@dataclass(frozen=True)
class UltrabroadbandCandidate:
    scale_factor: float
    lambda0_um: float
    omega0: float
    k2: float
    k3: float
    k4: float
    k3_flat: bool


def _zdw_k4(fiber, mode, scale, lambda_range, samples):
    f = scale_fiber(fiber, scale)
    try:
        z = find_zdw(f, mode, lambda_range, samples=samples, xtol=1e-12)
    except SfwmError:  # out of guidance band at this scale
        return np.empty(0), np.empty(0)
    if not z:
        return np.empty(0), np.empty(0)
    z = np.asarray(z)
    w = 2.0 * math.pi * K.C_UM_PER_FS / z
    return z, k_derivatives(f, mode, w)[1][3]


def ultrabroadband_search(
    fiber: FiberModel,
    mode: ModeId,
    scale_range,
    lambda_range,
    scale_samples: int = 25,
    zdw_samples: int = 201,
) -> UltrabroadbandCandidate:
    """Scale and wavelength where k2 = 0 and k4 = 0 together.

    Zero-dispersion wavelengths are tracked across a coarse scale sweep; a
    sign change of k4 along one tracked ZDW is refined by bisection on the
    scale, re-solving the ZDW near its interpolated position each step.
    """
    scales = np.linspace(scale_range[0], scale_range[1], scale_samples)
    track = [_zdw_k4(fiber, mode, s, lambda_range, zdw_samples) for s in scales]
    span = lambda_range[1] - lambda_range[0]
    found = []
    for j in range(scale_samples - 1):
        (za, ka), (zb, kb) = track[j], track[j + 1]
        for a in range(za.size):
            if zb.size == 0:
                break
            b = int(np.argmin(np.abs(zb - za[a])))
            if abs(zb[b] - za[a]) > 0.25 * span or ka[a] * kb[b] > 0:
                continue
            s0, s1 = scales[j], scales[j + 1]
            z0, z1 = za[a], zb[b]
            width = abs(z1 - z0) + 0.02 * span

            def h(s):
                guess = z0 + (z1 - z0) * (s - s0) / (s1 - s0)
                win = (max(lambda_range[0], guess - width), min(lambda_range[1], guess + width))
                z, k4 = _zdw_k4(fiber, mode, s, win, 41)
                if z.size == 0:
                    raise NoRoot("lost track of the zero-dispersion wavelength")
                return float(k4[int(np.argmin(np.abs(z - guess)))])

            try:
                s_star = optimize.brentq(h, s0, s1, xtol=1e-12)
            except (NoRoot, ValueError):
                continue
            guess = z0 + (z1 - z0) * (s_star - s0) / (s1 - s0)
            win = (max(lambda_range[0], guess - width), min(lambda_range[1], guess + width))
            z, _ = _zdw_k4(fiber, mode, s_star, win, 41)
            lam0 = float(z[int(np.argmin(np.abs(z - guess)))])
            f = scale_fiber(fiber, s_star)
            w0 = 2.0 * math.pi * K.C_UM_PER_FS / lam0
            _, d, _ = k_derivatives(f, mode, [w0])
            found.append(UltrabroadbandCandidate(s_star, lam0, w0, float(d[1, 0]), float(d[2, 0]), float(d[3, 0]),
                                                 bool(abs(d[2, 0]) < K3_FLAT)))
    if not found:
        raise NoRoot("no scale in range gives simultaneous k2 = 0 and k4 = 0")
    return min(found, key=lambda c: abs(c.k2) + abs(c.k4))


# --- nonlinear loop collapse ----------------------------------------------------

@dataclass(frozen=True)
class CriticalPower:
    power: float  # per-pump power (W) with P1 = P2
    lower: float  # largest power found with solutions
    upper: float  # smallest power found without
    phi_nl: float  # nonlinear phase at ``power`` (1/um)


def solution_count(fiber, process, omega_p, detunings, power, pump2_omega=None) -> int:
    """Number of phasematched detunings on the grid with P1 = P2 = ``power``."""
    return int(column_roots(fiber, process.with_powers(power, power), omega_p, detunings, pump2_omega).size)


def critical_power(
    fiber: FiberModel,
    process: ProcessSpec,
    pump_lambda: float,
    detuning_max: float,
    detuning_min: float | None = None,
    samples: int = 4001,
    rel_tol: float = 0.01,
    p_start: float = 1.0,
    p_limit: float = 1e9,
) -> CriticalPower:
    """Pump power (W per pump, P1 = P2) at which the loop column collapses.

    Solutions are counted on detunings in (detuning_min, detuning_max]; the
    default lower bound keeps clear of the trivial root at zero detuning.
    The returned bracket satisfies (upper - lower) <= rel_tol/2 * upper.
    """
    wp = 2.0 * math.pi * K.C_UM_PER_FS / pump_lambda
    dmin = 1e-4 * detuning_max if detuning_min is None else detuning_min
    d = np.linspace(dmin, detuning_max, samples)
    count = lambda p: solution_count(fiber, process, wp, d, p)
    if count(0.0) == 0:
        raise NoLoop(f"no phasematched detuning at {pump_lambda} um without nonlinear shift")
    lo, hi = 0.0, p_start
    while count(hi) > 0:
        lo, hi = hi, 2.0 * hi
        if hi > p_limit:
            raise NoRoot("solutions persist up to the power limit")
    while hi - lo > 0.5 * rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if count(mid) > 0:
            lo = mid
        else:
            hi = mid
    p = 0.5 * (lo + hi)
    from .phasematch import nonlinear_phase

    return CriticalPower(p, lo, hi, nonlinear_phase(process.with_powers(p, p), fiber))


# --- tuning -----------------------------------------------------------------

@dataclass(frozen=True)
class TuningRow:
    scale: float
    lambda_s_um: float
    lambda_i_um: float
    ok: bool


def tuning_scan(
    fiber: FiberModel,
    process: ProcessSpec,
    scale_values,
    pump_omega: float,
    detuning_grid,
    pump2_omega: float | None = None,
) -> list[TuningRow]:
    """Outer-branch signal/idler wavelengths versus transverse scale.

    Rows without a solution at the pump frequency are returned with
    ``ok=False`` and NaN wavelengths.
    """
    rows = []
    w2 = pump_omega if pump2_omega is None else pump2_omega
    wbar = 0.5 * (pump_omega + w2)
    for s in scale_values:
        f = fiber if s == 1.0 else scale_fiber(fiber, s)
        try:
            r = column_roots(f, process, pump_omega, detuning_grid, pump2_omega)
        except SfwmError:
            r = np.empty(0)
        r = r[r > 0]
        if r.size == 0:
            rows.append(TuningRow(float(s), math.nan, math.nan, False))
            continue
        d = float(r.max())
        lam = lambda w: 2.0 * math.pi * K.C_UM_PER_FS / w
        rows.append(TuningRow(float(s), lam(wbar + d), lam(wbar - d), True))
    return rows
