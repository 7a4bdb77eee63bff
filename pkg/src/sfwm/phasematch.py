"""Phase mismatch, phasematching contours and group-delay coefficients.

Conventions
-----------
Each wave carries a direction d = +1 (forward) or -1 (backward).  The phase
mismatch is

    dk = d_p1 k_p1 + d_p2 k_p2 - d_s k_s - d_i k_i - (g1 P1 + g2 P2)

so for an all-forward process it is the usual k_p1 + k_p2 - k_s - k_i minus
the nonlinear shift.  Contours live in the (omega_p, Delta) plane where the
signal and idler sit symmetrically about the mean pump frequency,
omega_s = wbar + Delta and omega_i = wbar - Delta.  Positive Delta therefore
puts the signal on the blue side.  With two degenerate pumps wbar = omega_p;
otherwise pump 2 is held fixed and pump 1 is swept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import constants as K
from .errors import DegenerateTerms, MissingGamma, NonPhysical, NotPhasematched
from .fiber import FiberModel, ModeId, k_derivatives, propagation_constant

__all__ = [
    "Wave",
    "ProcessSpec",
    "polarization_process",
    "CenterFrequencies",
    "nonlinear_phase",
    "delta_k",
    "Polyline",
    "PhasematchContour",
    "trace_zero_set",
    "trace_contour",
    "classify_branches",
    "column_roots",
    "loop_area",
    "DelayVariant",
    "GroupDelayTerms",
    "group_delay_terms",
    "phasematch_angle",
    "RamanFlag",
    "raman_overlap",
]


@dataclass(frozen=True)
class Wave:
    mode: ModeId
    direction: int = 1

    def __post_init__(self):
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")


@dataclass(frozen=True)
class ProcessSpec:
    """Mode and direction assignment for one SFWM interaction.

    ``label`` keys the fiber's gamma table.  ``weight`` is the user supplied
    mode-overlap coefficient used when several processes are superposed.
    ``table_row`` optionally records which of the six single-mode
    polarization combinations this process is.
    """

    label: str
    pump1: Wave
    pump2: Wave
    signal: Wave
    idler: Wave
    power1: float = 0.0
    power2: float = 0.0
    weight: complex = 1.0
    table_row: int | None = None

    def __post_init__(self):
        if self.power1 < 0 or self.power2 < 0:
            raise ValueError("pump powers must be non-negative")

    @property
    def waves(self):
        return (self.pump1, self.pump2, self.signal, self.idler)

    @property
    def co_propagating(self) -> bool:
        return all(w.direction == 1 for w in self.waves)

    @property
    def exchange_symmetric(self) -> bool:
        return self.signal == self.idler

    def with_powers(self, p1: float, p2: float) -> "ProcessSpec":
        return replace(self, power1=p1, power2=p2)


# polarizations (pump1, pump2, signal, idler) of the six single-mode processes
_POLARIZATION_ROWS = {
    1: "xxxx",
    2: "yyyy",
    3: "xyxy",
    4: "xyyx",
    5: "xxyy",
    6: "yyxx",
}


def polarization_process(row: int, power1: float = 0.0, power2: float = 0.0, label: str | None = None, weight=1.0):
    """One of the six fundamental-mode polarization processes, all forward."""
    pols = _POLARIZATION_ROWS[row]
    waves = [Wave(ModeId("HE11" + p)) for p in pols]
    return ProcessSpec(label or f"p{row}", *waves, power1=power1, power2=power2, weight=weight, table_row=row)


@dataclass(frozen=True)
class CenterFrequencies:
    omega_p1: float
    omega_p2: float
    omega_s: float
    omega_i: float

    @classmethod
    def from_contour(cls, omega_p: float, delta: float, pump2_omega: float | None = None):
        w2 = omega_p if pump2_omega is None else pump2_omega
        wbar = 0.5 * (omega_p + w2)
        return cls(omega_p, w2, wbar + delta, wbar - delta)


def _gammas(fiber: FiberModel, process: ProcessSpec):
    if process.label not in fiber.gamma_table:
        if process.power1 == 0 and process.power2 == 0:
            return 0.0, 0.0
        raise MissingGamma(f"no nonlinear coefficient for process {process.label}")
    g = fiber.gamma_table[process.label]
    return (g, g) if not isinstance(g, tuple) else g


def nonlinear_phase(process: ProcessSpec, fiber: FiberModel) -> float:
    """phi_nl = g1 P1 + g2 P2 in 1/um."""
    g1, g2 = _gammas(fiber, process)
    return (g1 * process.power1 + g2 * process.power2) * K.GAMMA_TO_PER_UM


def _dk(fiber, process, wp1, wp2, ws, strict=True):
    wi = wp1 + wp2 - ws
    k = lambda wave, w: propagation_constant(fiber, wave.mode, w, strict=strict)
    return (
        process.pump1.direction * k(process.pump1, wp1)
        + process.pump2.direction * k(process.pump2, wp2)
        - process.signal.direction * k(process.signal, ws)
        - process.idler.direction * k(process.idler, wi)
        - nonlinear_phase(process, fiber)
    )


def delta_k(fiber: FiberModel, process: ProcessSpec, omega_p1, omega_p2, omega_s):
    """Signed phase mismatch in 1/um (scalars or broadcastable arrays)."""
    wp1, wp2, ws = (np.asarray(v, dtype=float) for v in (omega_p1, omega_p2, omega_s))
    wi = wp1 + wp2 - ws
    if np.any(wi <= 0) or np.any(ws <= 0):
        raise NonPhysical("signal and idler frequencies must both be positive")
    out = _dk(fiber, process, wp1, wp2, ws)
    return float(out) if np.ndim(out) == 0 else out


# --- generic zero-set tracing ------------------------------------------------

@dataclass(frozen=True, eq=False)
class Polyline:
    points: np.ndarray  # (n, 2) columns: x, y
    closed: bool

    def area(self) -> float:
        if not self.closed or len(self.points) < 3:
            return 0.0
        x, y = self.points[:, 0], self.points[:, 1]
        return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


INNER, OUTER, LINE = "inner", "outer", "line"


@dataclass(frozen=True, eq=False)
class PhasematchContour:
    """Zero set of the phase mismatch.

    ``columns[j]`` holds the sorted detunings solving dk = 0 at
    ``pump_axis[j]``; ``labels[j]`` the matching branch labels once
    :func:`classify_branches` has run (``None`` before that).
    """

    pump_axis: np.ndarray
    detuning_axis: np.ndarray
    columns: tuple
    polylines: tuple
    labels: tuple | None = None
    empty: bool = False
    degenerate: bool = False
    max_residual: float = 0.0

    @property
    def closed(self) -> bool:
        return any(p.closed for p in self.polylines)

    def branch_of_point(self, x: float, y: float) -> str:
        if self.labels is None:
            return LINE
        j = int(np.argmin(np.abs(self.pump_axis - x)))
        col = self.columns[j]
        same = [n for n in range(len(col)) if np.sign(col[n]) == np.sign(y)]
        if not same:
            return LINE
        n = min(same, key=lambda n: abs(col[n] - y))
        return self.labels[j][n]

    def points(self):
        """All column solutions as (omega_p, Delta) pairs."""
        return [(float(x), float(d)) for x, col in zip(self.pump_axis, self.columns) for d in col]


def _node_signs(F):
    """Boolean "positive" map; exact zeros copy the sign of a neighbour.

    A zero node takes the sign of the next sample along the last axis (the
    previous one at the end).  A simple root sitting on a node then yields
    one crossing, while a tangential zero, such as the trivial degenerate
    solution at zero detuning, yields none.
    """
    S = np.sign(F)
    for _ in range(S.shape[-1]):
        zero = S == 0
        if not zero.any():
            break
        nxt = np.concatenate([S[..., 1:], S[..., -1:]], axis=-1)
        prv = np.concatenate([S[..., :1], S[..., :-1]], axis=-1)
        S = np.where(zero, np.where(nxt != 0, nxt, prv), S)
    return S > 0


def _bisect_edges(fun, fixed, a, b, fa, tol, along_y):
    """Refine sign changes on grid edges; returns roots and residuals."""
    lo, hi, flo = a.copy(), b.copy(), fa.copy()
    mid = 0.5 * (lo + hi)
    active = np.ones(lo.shape, dtype=bool)
    fm = np.empty_like(lo)
    for _ in range(200):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        m = 0.5 * (lo[idx] + hi[idx])
        v = fun(fixed[idx], m) if along_y else fun(m, fixed[idx])
        mid[idx], fm[idx] = m, v
        same = np.sign(v) == np.sign(flo[idx])
        lo[idx] = np.where(same, m, lo[idx])
        flo[idx] = np.where(same, v, flo[idx])
        hi[idx] = np.where(same, hi[idx], m)
        done = (np.abs(v) < tol) | (np.abs(hi[idx] - lo[idx]) <= 4 * np.spacing(np.abs(m))) | ~np.isfinite(v)
        active[idx[done]] = False
    return mid, np.abs(fm)


def trace_zero_set(
    fun: Callable[[np.ndarray, np.ndarray], np.ndarray],
    x_axis: Sequence[float],
    y_axis: Sequence[float],
    tol: float = K.TOL_PHASEMATCH,
) -> PhasematchContour:
    """Marching-squares extraction of ``fun(x, y) = 0`` with edge bisection.

    ``fun`` must accept broadcastable arrays and may return NaN where it is
    undefined; cells touching a NaN corner are skipped.
    """
    x = np.asarray(x_axis, dtype=float)
    y = np.asarray(y_axis, dtype=float)
    if np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
        raise ValueError("grid axes must be strictly increasing")
    nx, ny = x.size, y.size
    F = fun(x[:, None], y[None, :])
    F = np.broadcast_to(F, (nx, ny)).astype(float)
    finite = np.isfinite(F)
    if finite.all() and np.max(np.abs(F)) < tol:
        return PhasematchContour(x, y, tuple(np.empty(0) for _ in x), (), empty=False, degenerate=True)
    pos = _node_signs(np.where(finite, F, 1.0))

    # vertical edges: (i, j)-(i, j+1); horizontal edges: (i, j)-(i+1, j)
    v_cross = (pos[:, :-1] != pos[:, 1:]) & finite[:, :-1] & finite[:, 1:]
    h_cross = (pos[:-1, :] != pos[1:, :]) & finite[:-1, :] & finite[1:, :]
    vi, vj = np.nonzero(v_cross)
    hi_, hj = np.nonzero(h_cross)

    vy, vres = _bisect_edges(fun, x[vi], y[vj], y[vj + 1], F[vi, vj], tol, along_y=True)
    hx, hres = _bisect_edges(fun, y[hj], x[hi_], x[hi_ + 1], F[hi_, hj], tol, along_y=False)
    v_ok = vres < tol
    h_ok = hres < tol

    # node ids: vertical edge (i, j) -> i*(ny-1)+j ; horizontal (i, j) -> NV + i*ny + j
    NV = nx * (ny - 1)
    coords = {}
    for n in range(vi.size):
        if v_ok[n]:
            coords[vi[n] * (ny - 1) + vj[n]] = (x[vi[n]], vy[n])
    for n in range(hi_.size):
        if h_ok[n]:
            coords[NV + hi_[n] * ny + hj[n]] = (hx[n], y[hj[n]])

    def vid(i, j):
        return i * (ny - 1) + j

    def hid(i, j):
        return NV + i * ny + j

    adj: dict[int, list[int]] = {}

    def link(a, b):
        if a in coords and b in coords:
            adj.setdefault(a, []).append(b)
            adj.setdefault(b, []).append(a)

    cell_ok = finite[:-1, :-1] & finite[1:, :-1] & finite[1:, 1:] & finite[:-1, 1:]
    cell_ok &= h_cross[:, :-1] | h_cross[:, 1:] | v_cross[:-1, :] | v_cross[1:, :]
    for i, j in zip(*np.nonzero(cell_ok)):
        # corners a=(i,j) b=(i+1,j) c=(i+1,j+1) d=(i,j+1); edges ab, bc, cd, da
        edges = [
            (hid(i, j), h_cross[i, j]),
            (vid(i + 1, j), v_cross[i + 1, j]),
            (hid(i, j + 1), h_cross[i, j + 1]),
            (vid(i, j), v_cross[i, j]),
        ]
        hits = [e for e, c in edges if c]
        if len(hits) == 2:
            link(*hits)
        elif len(hits) == 4:
            centre = 0.25 * (F[i, j] + F[i + 1, j] + F[i + 1, j + 1] + F[i, j + 1])
            e = [eid for eid, _ in edges]
            if (centre >= 0) == pos[i, j]:
                link(e[0], e[1])
                link(e[2], e[3])
            else:
                link(e[3], e[0])
                link(e[1], e[2])

    polylines = []
    seen = set()
    starts = sorted(n for n in adj if len(adj[n]) == 1) + sorted(n for n in adj if len(adj[n]) != 1)
    for s in starts:
        if s in seen:
            continue
        chain = [s]
        seen.add(s)
        prev, cur = None, s
        closed = False
        while True:
            nxt = [n for n in adj[cur] if n != prev]
            nxt = [n for n in nxt if n not in seen or (n == s and len(chain) > 2)]
            if not nxt:
                break
            if nxt[0] == s:
                closed = True
                break
            prev, cur = cur, nxt[0]
            chain.append(cur)
            seen.add(cur)
        pts = np.array([coords[n] for n in chain])
        if not closed and len(pts) > 2:
            dx = abs(pts[0, 0] - pts[-1, 0]) / np.min(np.diff(x))
            dy = abs(pts[0, 1] - pts[-1, 1]) / np.min(np.diff(y))
            closed = dx <= 1 and dy <= 1
        polylines.append(Polyline(pts, bool(closed)))

    columns = []
    for i in range(nx):
        sel = (vi == i) & v_ok
        columns.append(np.sort(vy[sel]))
    residual = float(max(vres[v_ok].max(initial=0.0), hres[h_ok].max(initial=0.0)))
    return PhasematchContour(
        x, y, tuple(columns), tuple(polylines), empty=not coords, max_residual=residual
    )


def _field(fiber, process, pump2_omega):
    def fun(wp, d):
        wp, d = np.broadcast_arrays(np.asarray(wp, float), np.asarray(d, float))
        w2 = wp if pump2_omega is None else np.full_like(wp, pump2_omega)
        wbar = 0.5 * (wp + w2)
        ws, wi = wbar + d, wbar - d
        bad = (ws <= 0) | (wi <= 0)
        out = _dk(fiber, process, wp, w2, np.where(bad, wbar, ws), strict=False)
        return np.where(bad, np.nan, out)

    return fun


def trace_contour(
    fiber: FiberModel,
    process: ProcessSpec,
    pump_grid,
    detuning_grid,
    pump2_omega: float | None = None,
    tol: float = K.TOL_PHASEMATCH,
    min_samples: int = 64,
) -> PhasematchContour:
    """Trace dk = 0 over pump frequency (rad/fs) and detuning (rad/fs).

    With ``pump2_omega`` unset both pumps share the swept frequency.
    Branch labels are filled in before returning.
    """
    pump_grid = np.asarray(pump_grid, dtype=float)
    detuning_grid = np.asarray(detuning_grid, dtype=float)
    if pump_grid.size < min_samples or detuning_grid.size < min_samples:
        raise ValueError(f"need at least {min_samples} samples per axis")
    contour = trace_zero_set(_field(fiber, process, pump2_omega), pump_grid, detuning_grid, tol)
    return classify_branches(contour)


def column_roots(
    fiber: FiberModel,
    process: ProcessSpec,
    omega_p: float,
    detuning_grid,
    pump2_omega: float | None = None,
    tol: float = K.TOL_PHASEMATCH,
) -> np.ndarray:
    """Sorted detunings solving dk = 0 at one pump frequency.

    Uses the same sign-change detection and edge bisection as
    :func:`trace_contour`, so the result equals that column of a traced
    contour over the same detuning grid.
    """
    fun = _field(fiber, process, pump2_omega)
    d = np.asarray(detuning_grid, dtype=float)
    f = fun(np.full_like(d, omega_p), d)
    ok = np.isfinite(f[:-1]) & np.isfinite(f[1:])
    pos = _node_signs(np.where(np.isfinite(f), f, 1.0))
    j = np.nonzero((pos[:-1] != pos[1:]) & ok)[0]
    if j.size == 0:
        return np.empty(0)
    r, res = _bisect_edges(fun, np.full(j.size, float(omega_p)), d[j], d[j + 1], f[j], tol, along_y=True)
    return np.sort(r[res < tol])


def classify_branches(contour: PhasematchContour) -> PhasematchContour:
    """Label column solutions inner/outer per half-plane, or line if alone."""
    labels = []
    for col in contour.columns:
        lab = [LINE] * len(col)
        for sign in (1, -1):
            idx = [n for n in range(len(col)) if np.sign(col[n]) == sign]
            if len(idx) >= 2:
                idx.sort(key=lambda n: abs(col[n]))
                lab[idx[0]] = INNER
                lab[idx[-1]] = OUTER
        labels.append(tuple(lab))
    return replace(contour, labels=tuple(labels))


def loop_area(contour: PhasematchContour) -> float:
    """Total area enclosed by closed polylines, in (rad/fs)^2."""
    return float(sum(p.area() for p in contour.polylines))


# --- group delays -------------------------------------------------------------

class DelayVariant(Enum):
    # signal/idler delays referenced to pump 2; T = tau + tau_p s1^2/(s1^2+s2^2)
    PUMP2_REFERENCE = "pump2_reference"
    # referenced to the mean pump delay; T = tau + (s1^2-s2^2)/(s1^2+s2^2) tau_p/2
    MEAN_PUMP_REFERENCE = "mean_pump_reference"


@dataclass(frozen=True)
class GroupDelayTerms:
    """Group-delay mismatches (fs) over the fiber length.

    Under either variant T_s and T_i are the same numbers; only the stored
    tau_s, tau_i differ by tau_p/2.
    """

    tau_s: float
    tau_i: float
    tau_p: float
    T_s: float
    T_i: float
    variant: DelayVariant = DelayVariant.PUMP2_REFERENCE
    center: CenterFrequencies | None = None
    sigma1: float | None = None
    sigma2: float | None = None

    @classmethod
    def from_T(cls, T_s: float, T_i: float, tau_p: float = 0.0, sigma1=None, sigma2=None, center=None):
        """Synthetic terms for given T_s, T_i (equal pump bandwidths if tau_p != 0)."""
        if tau_p != 0.0 and (sigma1 is None or sigma2 is None):
            raise ValueError("tau_p != 0 requires both pump bandwidths")
        w = 0.0 if tau_p == 0.0 else sigma1**2 / (sigma1**2 + sigma2**2)
        return cls(T_s - w * tau_p, T_i - w * tau_p, tau_p, T_s, T_i, DelayVariant.PUMP2_REFERENCE,
                   center, sigma1, sigma2)

    def scaled(self, factor: float) -> "GroupDelayTerms":
        """Terms for a fiber ``factor`` times longer (all delays scale with L)."""
        return replace(
            self,
            tau_s=self.tau_s * factor,
            tau_i=self.tau_i * factor,
            tau_p=self.tau_p * factor,
            T_s=self.T_s * factor,
            T_i=self.T_i * factor,
        )


def _k1(fiber, mode, omega):
    return float(k_derivatives(fiber, mode, [omega])[1][0, 0])


def group_delay_terms(
    fiber: FiberModel,
    process: ProcessSpec,
    center: CenterFrequencies,
    sigma1: float,
    sigma2: float,
    variant: DelayVariant = DelayVariant.PUMP2_REFERENCE,
    tol: float = K.TOL_PHASEMATCH,
) -> GroupDelayTerms:
    if sigma1 <= 0 or sigma2 <= 0:
        raise ValueError("pump bandwidths must be positive")
    if not process.co_propagating:
        raise ValueError("group-delay coefficients are defined for co-propagating processes")
    c = center
    if not math.isclose(c.omega_p1 + c.omega_p2, c.omega_s + c.omega_i, rel_tol=1e-12, abs_tol=1e-15):
        raise NonPhysical("center frequencies violate energy conservation")
    resid = delta_k(fiber, process, c.omega_p1, c.omega_p2, c.omega_s)
    if abs(resid) > tol:
        raise NotPhasematched(f"|dk| = {abs(resid):.3e} 1/um at the requested center")
    L = fiber.length_um
    k1p1 = _k1(fiber, process.pump1.mode, c.omega_p1)
    k1p2 = _k1(fiber, process.pump2.mode, c.omega_p2)
    k1s = _k1(fiber, process.signal.mode, c.omega_s)
    k1i = _k1(fiber, process.idler.mode, c.omega_i)
    tau_p = L * (k1p1 - k1p2)
    s1, s2 = sigma1**2, sigma2**2
    if variant is DelayVariant.PUMP2_REFERENCE:
        tau_s, tau_i = L * (k1p2 - k1s), L * (k1p2 - k1i)
        shift = tau_p * s1 / (s1 + s2)
    else:
        ref = 0.5 * (k1p1 + k1p2)
        tau_s, tau_i = L * (ref - k1s), L * (ref - k1i)
        shift = (s1 - s2) / (s1 + s2) * tau_p / 2
    return GroupDelayTerms(tau_s, tau_i, tau_p, tau_s + shift, tau_i + shift, variant, center, sigma1, sigma2)


def phasematch_angle(terms: GroupDelayTerms) -> tuple[float, float]:
    """(theta_si, theta_dwp) in degrees; theta_si in (-90, 90]."""
    Ts, Ti = terms.T_s, terms.T_i
    if Ts == 0 and Ti == 0:
        raise DegenerateTerms("T_s = T_i = 0: no preferred orientation")
    if Ti == 0:
        theta = 90.0
    else:
        theta = -math.degrees(math.atan(Ts / Ti))
        if theta == -90.0:
            theta = 90.0
    return theta, 45.0 - theta


@dataclass(frozen=True)
class RamanFlag:
    status: str  # "clear" or "stokes_band"
    fraction: float


def raman_overlap(center: CenterFrequencies, band_thz: float = K.RAMAN_BAND_THZ) -> RamanFlag:
    """Flag signal/idler frequencies inside the Stokes band of either pump.

    ``fraction`` is the depth into the band (0 at the pump, 1 at the far
    edge); the largest depth over all photon/pump pairs is reported.
    """
    width = 2.0 * math.pi * band_thz * 1e-3  # THz -> rad/fs
    depth = None
    for wp in (center.omega_p1, center.omega_p2):
        for w in (center.omega_s, center.omega_i):
            if wp - width <= w < wp:
                f = (wp - w) / width
                depth = f if depth is None else max(depth, f)
    if depth is None:
        return RamanFlag("clear", 0.0)
    return RamanFlag("stokes_band", float(depth))
