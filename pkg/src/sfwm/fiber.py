"""Fiber dispersion: propagation constants, derivatives, D and zero-dispersion points.

Three dispersion sources are supported:

* a weakly guiding step-index surrogate with a fused-silica cladding, solved
  from the scalar LP characteristic equation;
* tabulated effective indices per mode (for instance exported from an
  external mode solver), interpolated with a quintic spline in wavelength;
* a Taylor expansion of k(omega) about a reference frequency, optionally with
  a user supplied dependence on the transverse scale factor.  This is mostly
  useful for synthetic test dispersions with known analytic features.

Derivatives of k are exact for the Taylor kind and come from central finite
differences with two levels of Richardson extrapolation otherwise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import interpolate, optimize, special

from . import constants as K
from .errors import ModeCutoff, NonMonotonic, OutOfRange, ParseError, TableGap, UnsupportedForTabulated

__all__ = [
    "FiberKind",
    "ModeId",
    "HE11X",
    "HE11Y",
    "TE01",
    "TM01",
    "TaylorDispersion",
    "FiberModel",
    "DispersionSample",
    "material_index",
    "propagation_constant",
    "k_derivatives",
    "mode_dispersion",
    "dispersion_parameter",
    "find_zdw",
    "scale_fiber",
    "load_dispersion_table",
    "export_dispersion_table",
]


class FiberKind(Enum):
    STEP_INDEX = "step_index"
    TABULATED = "tabulated"
    TAYLOR = "taylor"


# (polarization, LP azimuthal order) for the built-in labels
_BUILTIN_MODES = {
    "HE11x": ("x", 0),
    "HE11y": ("y", 0),
    "TE01": ("x", 1),
    "TM01": ("y", 1),
}


@dataclass(frozen=True)
class ModeId:
    """A transverse mode and polarization label.

    Built-in labels are HE11x, HE11y, TE01 and TM01.  Any other label is a
    custom mode that must be backed by a table or Taylor expansion; its
    polarization is read from a trailing ``x``/``y`` if present.
    """

    label: str

    @property
    def polarization(self) -> str | None:
        if self.label in _BUILTIN_MODES:
            return _BUILTIN_MODES[self.label][0]
        if self.label[-1:] in ("x", "y"):
            return self.label[-1]
        return None

    @property
    def lp_order(self) -> int | None:
        if self.label in _BUILTIN_MODES:
            return _BUILTIN_MODES[self.label][1]
        return None

    def __str__(self):
        return self.label


HE11X = ModeId("HE11x")
HE11Y = ModeId("HE11y")
TE01 = ModeId("TE01")
TM01 = ModeId("TM01")


@dataclass(frozen=True)
class TaylorDispersion:
    """k(omega) = sum_n beta_n (omega - omega0)^n / n! per mode label.

    ``betas`` maps a mode label to (beta_0, beta_1, ...) in fs^n/um.
    ``scale_law``, when given, returns such a mapping for a scale factor and
    replaces ``betas`` whenever the fiber's scale factor differs from 1.
    """

    omega0: float
    betas: Mapping[str, tuple[float, ...]]
    scale_law: Callable[[float], Mapping[str, Sequence[float]]] | None = field(default=None, compare=False)

    def coefficients(self, label: str, scale: float) -> np.ndarray:
        table = self.betas if self.scale_law is None or scale == 1.0 else self.scale_law(scale)
        if label not in table:
            raise ModeCutoff(f"no Taylor coefficients for mode {label}")
        return np.asarray(table[label], dtype=float)


@dataclass(frozen=True)
class FiberModel:
    kind: FiberKind
    length_m: float = 1.0
    core_radius: float = 1.0
    index_contrast: float = 0.02
    birefringence: float = 0.0
    scale_factor: float = 1.0
    gamma_table: Mapping[str, float | tuple[float, float]] = field(default_factory=dict)
    dispersion_tables: Mapping[str, tuple[tuple[float, ...], tuple[float, ...]]] = field(default_factory=dict)
    taylor: TaylorDispersion | None = None
    _splines: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.length_m <= 0:
            raise ValueError("fiber length must be positive")
        if self.scale_factor <= 0:
            raise ValueError("scale factor must be positive")
        if self.kind is FiberKind.STEP_INDEX:
            if self.core_radius <= 0:
                raise ValueError("core radius must be positive")
            if not 0 < self.index_contrast < 0.05:
                raise ValueError("index contrast must lie in (0, 0.05) for the weak-guidance surrogate")
        if self.kind is FiberKind.TAYLOR and self.taylor is None:
            raise ValueError("Taylor fiber needs a TaylorDispersion")
        for label, g in self.gamma_table.items():
            vals = g if isinstance(g, tuple) else (g,)
            if any(v < 0 for v in vals):
                raise ValueError(f"negative nonlinear coefficient for {label}")
        for label, (lam, neff) in self.dispersion_tables.items():
            if len(lam) != len(neff) or len(lam) < 2:
                raise ParseError(f"table for {label} needs at least two matching samples")
            if np.any(np.diff(lam) <= 0):
                raise NonMonotonic(f"wavelengths for {label} are not strictly increasing")

    @property
    def effective_radius(self) -> float:
        return self.core_radius * self.scale_factor

    @property
    def length_um(self) -> float:
        return self.length_m * K.M_TO_UM

    def modes(self) -> list[ModeId]:
        if self.kind is FiberKind.TABULATED:
            return [ModeId(m) for m in self.dispersion_tables]
        if self.kind is FiberKind.TAYLOR:
            return [ModeId(m) for m in self.taylor.betas]
        return [HE11X, HE11Y, TE01, TM01]


@dataclass(frozen=True)
class DispersionSample:
    omega: float
    k: float
    k1: float
    k2: float
    k3: float
    k4: float
    # estimated absolute error of k1..k4 (zero for exact Taylor derivatives)
    errors: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)


def material_index(lam):
    """Fused-silica refractive index at wavelength ``lam`` (um)."""
    lam = np.asarray(lam, dtype=float)
    lo, hi = K.SILICA_RANGE_UM
    if np.any((lam < lo) | (lam > hi)) or np.any(~np.isfinite(lam)):
        raise OutOfRange(f"wavelength outside Sellmeier validity [{lo}, {hi}] um")
    l2 = lam * lam
    n2 = 1.0
    for b, c in zip(K.SILICA_B, K.SILICA_C):
        n2 = n2 + b * l2 / (l2 - c)
    n = np.sqrt(n2)
    return float(n) if n.ndim == 0 else n


# first zeros of J_0 and J_1, used to bracket LP_l1 roots
_J_ZEROS = (special.jn_zeros(0, 1)[0], special.jn_zeros(1, 1)[0], special.jn_zeros(2, 1)[0])


def _jv(n, x):
    if n == -1:
        return -special.j1(x)
    return special.j0(x) if n == 0 else special.j1(x) if n == 1 else special.jv(n, x)


def _kve(n, x):
    return special.k0e(x) if n == 0 else special.k1e(x) if n == 1 else special.kve(n, x)


def _lp_root(l: int, V: np.ndarray, strict: bool = True) -> np.ndarray:
    """Solve u J_{l-1}(u)/J_l(u) + w K_{l-1}(w)/K_l(w) = 0 for the LP_l1 mode.

    Vectorized bisection: the bracket endpoints have known signs (positive at
    the lower end, negative at the upper end), so a fixed number of halvings
    reaches machine precision without per-element branching.
    """
    lo = np.zeros_like(V) if l == 0 else np.full_like(V, _J_ZEROS[l - 1])
    hi = np.minimum(V, _J_ZEROS[l])
    cut = V <= lo
    if np.any(cut):
        if strict:
            raise ModeCutoff(f"LP{l}1 mode is cut off (V={float(np.min(V)):.4g})")
        hi = np.where(cut, lo + 1.0, hi)

    def f(u):
        w = np.sqrt(np.maximum(V * V - u * u, 0.0))
        ju = u * _jv(l - 1, u) / _jv(l, u)
        with np.errstate(invalid="ignore", divide="ignore"):
            kw = np.where(w > 0, w * _kve(abs(l - 1), w) / _kve(l, w), 0.0)
        return ju + kw

    for _ in range(64):
        mid = 0.5 * (lo + hi)
        pos = f(mid) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
        if np.all(hi - lo <= 2 * np.finfo(float).eps * np.abs(hi)):
            break
    return np.where(cut, np.nan, 0.5 * (lo + hi))


def _neff_step_index(fiber: FiberModel, mode: ModeId, lam: np.ndarray, strict: bool = True) -> np.ndarray:
    l = mode.lp_order
    if l is None:
        raise ModeCutoff(f"step-index surrogate has no mode {mode.label}")
    if strict:
        n_cl = np.asarray(material_index(lam))
    else:
        lo, hi = K.SILICA_RANGE_UM
        n_cl = np.asarray(material_index(np.clip(lam, lo, hi)))
        n_cl = np.where((lam < lo) | (lam > hi), np.nan, n_cl)
    n_co = n_cl * (1.0 + fiber.index_contrast)
    na2 = n_co * n_co - n_cl * n_cl
    V = 2.0 * np.pi * fiber.effective_radius / lam * np.sqrt(na2)
    u = _lp_root(l, np.atleast_1d(V), strict).reshape(V.shape)
    b = 1.0 - (u / V) ** 2
    return np.sqrt(n_cl * n_cl + b * na2)


def _table_spline(fiber: FiberModel, label: str):
    spl = fiber._splines.get(label)
    if spl is None:
        lam, neff = fiber.dispersion_tables[label]
        deg = min(5, len(lam) - 1)
        spl = interpolate.make_interp_spline(np.asarray(lam), np.asarray(neff), k=deg)
        fiber._splines[label] = spl
    return spl


def _pol_offset(fiber: FiberModel, mode: ModeId) -> float:
    pol = mode.polarization
    if pol == "x":
        return 0.5 * fiber.birefringence
    if pol == "y":
        return -0.5 * fiber.birefringence
    return 0.0


def _check_mode(fiber: FiberModel, mode: ModeId):
    if fiber.kind is FiberKind.TABULATED and mode.label not in fiber.dispersion_tables:
        raise ModeCutoff(f"no dispersion table for mode {mode.label}")


def _k_raw(fiber: FiberModel, mode: ModeId, omega: np.ndarray, strict: bool = True) -> np.ndarray:
    """Propagation constant for an array of frequencies.

    With ``strict=False`` points outside the guided band come back as NaN
    instead of raising; finite-difference stencils rely on this near cutoff.
    """
    omega = np.asarray(omega, dtype=float)
    if fiber.kind is FiberKind.TAYLOR:
        beta = fiber.taylor.coefficients(mode.label, fiber.scale_factor)
        x = omega - fiber.taylor.omega0
        # Horner on beta_n / n!
        coef = beta / np.array([math.factorial(n) for n in range(len(beta))])
        k = np.zeros_like(x)
        for c in coef[::-1]:
            k = k * x + c
        return k + _pol_offset(fiber, mode) * omega / K.C_UM_PER_FS
    if np.any(omega <= 0):
        raise OutOfRange("non-positive angular frequency")
    lam = 2.0 * np.pi * K.C_UM_PER_FS / omega
    if fiber.kind is FiberKind.TABULATED:
        _check_mode(fiber, mode)
        spl = _table_spline(fiber, mode.label)
        neff = spl(lam)
    else:
        neff = _neff_step_index(fiber, mode, lam, strict)
    return (neff + _pol_offset(fiber, mode)) * omega / K.C_UM_PER_FS


def _check_table_cover(fiber: FiberModel, mode: ModeId, omega: np.ndarray):
    if fiber.kind is not FiberKind.TABULATED:
        return
    _check_mode(fiber, mode)
    lam_tab = fiber.dispersion_tables[mode.label][0]
    lam = 2.0 * np.pi * K.C_UM_PER_FS / np.asarray(omega, dtype=float)
    tol = 1e-12 * lam_tab[-1]
    if np.any(lam < lam_tab[0] - tol) or np.any(lam > lam_tab[-1] + tol):
        raise TableGap(f"table for {mode.label} covers {lam_tab[0]}..{lam_tab[-1]} um only")


def propagation_constant(fiber: FiberModel, mode: ModeId, omega, strict: bool = True) -> np.ndarray:
    """k(omega) in 1/um; accepts scalars or arrays.

    ``strict=False`` returns NaN outside the guided band or table coverage,
    which is what field evaluations over a plotting window want.
    """
    if strict:
        _check_table_cover(fiber, mode, omega)
        return _k_raw(fiber, mode, omega)
    omega = np.asarray(omega, dtype=float)
    safe = np.where(omega > 0, omega, np.nan)
    if fiber.kind is FiberKind.TABULATED:
        _check_mode(fiber, mode)
        lam_tab = fiber.dispersion_tables[mode.label][0]
        lam = 2.0 * np.pi * K.C_UM_PER_FS / safe
        inside = (lam >= lam_tab[0]) & (lam <= lam_tab[-1])
        return np.where(inside, _k_raw(fiber, mode, np.where(inside, safe, 1.0)), np.nan)
    if fiber.kind is FiberKind.TAYLOR:
        return _k_raw(fiber, mode, omega)
    ok = np.isfinite(safe)
    return np.where(ok, _k_raw(fiber, mode, np.where(ok, safe, 1.0), strict=False), np.nan)


# Reference step for the finite-difference derivatives, relative to omega.
_H_REL = 4e-3
_H_MULTIPLIERS = (0.25, 0.5, 1.0, 2.0, 4.0)
_OFFSETS = np.arange(-8, 9)


def _fd_one_base(fiber, mode, omega, h):
    # samples at omega + m h/4, m = -8..8; steps h, h/2, h/4 are 4, 2, 1 offsets
    pts = omega[:, None] + _OFFSETS[None, :] * (h[:, None] / 4.0)
    f = _k_raw(fiber, mode, pts, strict=False)
    c = 8

    def levels(q, s):
        f0 = f[:, c]
        p1, m1 = f[:, c + q], f[:, c - q]
        p2, m2 = f[:, c + 2 * q], f[:, c - 2 * q]
        d1 = (p1 - m1) / (2 * s)
        d2 = (p1 - 2 * f0 + m1) / s**2
        d3 = (p2 - 2 * p1 + 2 * m1 - m2) / (2 * s**3)
        d4 = (p2 - 4 * p1 + 6 * f0 - 4 * m1 + m2) / s**4
        return np.stack([d1, d2, d3, d4])

    D_h = levels(4, h)
    D_h2 = levels(2, h / 2)
    D_h4 = levels(1, h / 4)
    R1a = (4 * D_h2 - D_h) / 3
    R1b = (4 * D_h4 - D_h2) / 3
    R2 = (16 * R1b - R1a) / 15
    # truncation (Richardson difference) plus the rounding amplified by the
    # finest stencil; |coefficient| sums per order are 1, 4, 3, 16
    s = h / 4
    rounding = 4 * np.finfo(float).eps * np.abs(f[:, c]) * np.array([1, 4, 3, 16])[:, None] / np.stack(
        [s, s**2, s**3, s**4])
    err = np.abs(R2 - R1b) + rounding
    err = np.where(np.isfinite(err), err, np.inf)
    return f[:, c], R2, err


def k_derivatives(fiber: FiberModel, mode: ModeId, omega):
    """Return (k, [k1, k2, k3, k4], errors) as arrays over ``omega``."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    _check_table_cover(fiber, mode, omega)
    if fiber.kind is FiberKind.TAYLOR:
        beta = fiber.taylor.coefficients(mode.label, fiber.scale_factor)
        x = omega - fiber.taylor.omega0
        out = []
        for m in range(5):
            acc = np.zeros_like(x)
            for n in range(len(beta) - 1, m - 1, -1):
                acc = acc * x + beta[n] / math.factorial(n - m)
            out.append(acc)
        bire = _pol_offset(fiber, mode) / K.C_UM_PER_FS
        out[0] = out[0] + bire * omega
        out[1] = out[1] + bire
        return out[0], np.stack(out[1:]), np.zeros((4, omega.size))

    k0 = _k_raw(fiber, mode, omega)
    best = None
    for mult in _H_MULTIPLIERS:
        h = _H_REL * mult * omega
        k, est, err = _fd_one_base(fiber, mode, omega, h)
        if best is None:
            best = [k, est.copy(), err.copy()]
            continue
        better = err < best[2]
        best[1] = np.where(better, est, best[1])
        best[2] = np.where(better, err, best[2])
    if np.any(~np.isfinite(best[2])):
        raise ModeCutoff(f"no finite-difference stencil fits inside the guided band of {mode.label}")
    return k0, best[1], best[2]


def mode_dispersion(fiber: FiberModel, mode: ModeId, omega: float) -> DispersionSample:
    k, d, err = k_derivatives(fiber, mode, [omega])
    return DispersionSample(
        float(omega), float(k[0]), *(float(v) for v in d[:, 0]), errors=tuple(float(e) for e in err[:, 0])
    )


def dispersion_parameter(fiber: FiberModel, mode: ModeId, lam):
    """D in ps/(nm km); positive is anomalous."""
    lam = np.asarray(lam, dtype=float)
    omega = 2.0 * np.pi * K.C_UM_PER_FS / lam
    _, d, _ = k_derivatives(fiber, mode, omega.ravel())
    k2 = d[1].reshape(lam.shape)
    D = -(2.0 * np.pi * K.C_UM_PER_FS / lam**2) * k2 * K.D_FS_PER_UM2_TO_PS_NM_KM
    return float(D) if D.ndim == 0 else D


# |D| below this is treated as numerically zero when looking for sign changes
_D_FLOOR = 1e-6


def _d_with_error(fiber, mode, lam):
    omega = 2.0 * np.pi * K.C_UM_PER_FS / lam
    _, d, err = k_derivatives(fiber, mode, omega)
    conv = (2.0 * np.pi * K.C_UM_PER_FS / lam**2) * K.D_FS_PER_UM2_TO_PS_NM_KM
    return -conv * d[1], conv * err[1]


def find_zdw(fiber: FiberModel, mode: ModeId, lambda_range, samples: int = 401, xtol: float = 1e-7) -> list[float]:
    """All zero-dispersion wavelengths in ``lambda_range``, ascending.

    Sign changes where |D| stays within ten times its finite-difference
    error estimate on both sides are treated as noise, so a dispersionless
    mode returns no roots.
    """
    lam = np.linspace(lambda_range[0], lambda_range[1], samples)
    D, err = _d_with_error(fiber, mode, lam)
    floor = np.maximum(_D_FLOOR, 10.0 * err)
    roots = []
    for j in range(samples - 1):
        a, b = D[j], D[j + 1]
        if abs(a) < floor[j] and abs(b) < floor[j + 1]:
            continue
        if a == 0.0:
            roots.append(float(lam[j]))
        elif a * b < 0:
            r = optimize.brentq(lambda x: dispersion_parameter(fiber, mode, x), lam[j], lam[j + 1], xtol=xtol)
            roots.append(float(r))
    if D[-1] == 0.0 and abs(D[-2]) >= floor[-2]:
        roots.append(float(lam[-1]))
    return sorted(roots)


def scale_fiber(fiber: FiberModel, factor: float) -> FiberModel:
    """Copy of ``fiber`` with the transverse geometry scaled by ``factor``."""
    if factor <= 0:
        raise ValueError("scale factor must be positive")
    if fiber.kind is FiberKind.TABULATED:
        raise UnsupportedForTabulated("tabulated dispersion is tied to one geometry")
    if fiber.kind is FiberKind.TAYLOR and fiber.taylor.scale_law is None:
        raise UnsupportedForTabulated("Taylor dispersion without a scale law cannot be rescaled")
    return replace(fiber, scale_factor=fiber.scale_factor * factor, _splines={})


_TABLE_HEADER = ["mode", "lambda_um", "n_eff"]


def load_dispersion_table(path, length_m: float = 1.0, birefringence: float = 0.0, gamma_table=None) -> FiberModel:
    """Read a ``mode,lambda_um,n_eff`` CSV into a tabulated FiberModel.

    The header line is optional.  Rows for one mode must have strictly
    increasing wavelengths; rows for different modes may interleave.
    """
    tables: dict[str, tuple[list, list]] = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            cells = [c.strip() for c in row]
            if lineno == 1 and cells == _TABLE_HEADER:
                continue
            if len(cells) != 3:
                raise ParseError(f"line {lineno}: expected 3 fields, got {len(cells)}")
            label = cells[0]
            try:
                lam, neff = float(cells[1]), float(cells[2])
            except ValueError:
                raise ParseError(f"line {lineno}: non-numeric wavelength or index") from None
            if not label or not (math.isfinite(lam) and math.isfinite(neff)) or lam <= 0 or neff <= 0:
                raise ParseError(f"line {lineno}: invalid entry")
            lams, ns = tables.setdefault(label, ([], []))
            if lams and lam <= lams[-1]:
                raise NonMonotonic(f"line {lineno}: wavelength {lam} does not increase for mode {label}")
            lams.append(lam)
            ns.append(neff)
    if not tables:
        raise ParseError("no data rows")
    for label, (lams, _) in tables.items():
        if len(lams) < 2:
            raise ParseError(f"mode {label} has a single sample")
    return FiberModel(
        kind=FiberKind.TABULATED,
        length_m=length_m,
        birefringence=birefringence,
        gamma_table=dict(gamma_table or {}),
        dispersion_tables={m: (tuple(a), tuple(b)) for m, (a, b) in tables.items()},
    )


def export_dispersion_table(fiber: FiberModel, path, lambdas=None, modes=None):
    """Write ``mode,lambda_um,n_eff`` rows with 17 significant digits.

    Tabulated fibers write their own samples unless ``lambdas`` is given.
    Birefringence offsets are included in the written effective index only
    for computed (non-tabulated) modes.
    """
    from .io import atomic_write_text

    lines = [",".join(_TABLE_HEADER)]
    modes = modes or fiber.modes()
    for mode in modes:
        if fiber.kind is FiberKind.TABULATED and lambdas is None:
            lam, neff = fiber.dispersion_tables[mode.label]
        else:
            if lambdas is None:
                raise ValueError("lambdas required for computed dispersion")
            lam = np.asarray(lambdas, dtype=float)
            omega = 2.0 * np.pi * K.C_UM_PER_FS / lam
            neff = propagation_constant(fiber, mode, omega) * K.C_UM_PER_FS / omega
        lines += [f"{mode.label},{l:.17g},{n:.17g}" for l, n in zip(lam, neff)]
    atomic_write_text(Path(path), "\n".join(lines) + "\n")
