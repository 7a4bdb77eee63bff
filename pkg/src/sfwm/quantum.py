"""Source-quality and entanglement metrics computed from joint spectra.

The Schmidt decomposition works on the area-weighted matrix
``M[j, l] = F(nu_s[j], nu_i[l]) * sqrt(dnu_s * dnu_i)``.  Its singular values
squared approximate the eigenvalues of the continuum operator, because
``sum |M|^2`` is the Riemann sum for the squared L2 norm of F.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import constants as K
from .errors import AxisMismatch, MissingGamma, NotConverged, SinglePolarization, ZeroGrid
from .fiber import FiberModel, k_derivatives
from .jsa import JsaGrid, PumpSpec
from .phasematch import ProcessSpec, _gammas

__all__ = [
    "SchmidtReport",
    "schmidt_decompose",
    "g2_from_schmidt",
    "gaussian_schmidt_number",
    "jsi_orientation",
    "Brightness",
    "pulse_duration_fwhm",
    "brightness_estimate",
    "ProcessEntry",
    "MultiProcessState",
    "build_multiprocess_state",
    "NegativityReport",
    "log_negativity",
]


@dataclass(frozen=True)
class SchmidtReport:
    coefficients: np.ndarray
    K: float
    purity: float
    g2: float
    hom_visibility: float

    def to_dict(self) -> dict:
        return {
            "schmidt_coefficients": [float(v) for v in self.coefficients],
            "schmidt_number": self.K,
            "purity": self.purity,
            "g2": self.g2,
            "hom_visibility": self.hom_visibility,
        }


def g2_from_schmidt(K_value: float) -> float:
    """Heralded autocorrelation of a source with K thermal modes: 1 + 1/K."""
    if K_value < 1.0:
        raise ValueError("Schmidt number is at least 1")
    return 1.0 + 1.0 / K_value


def schmidt_decompose(grid: JsaGrid) -> SchmidtReport:
    M = grid.amplitude * math.sqrt(grid.dnu_s * grid.dnu_i)
    if not np.all(np.isfinite(M)):
        raise ZeroGrid("amplitude contains non-finite values")
    s = np.linalg.svd(M, compute_uv=False)
    total = float(np.sum(s * s))
    if total <= 0.0:
        raise ZeroGrid("cannot decompose an all-zero amplitude")
    lam = s * s / total
    lam = lam[lam >= K.SCHMIDT_FLOOR]
    lam = lam / lam.sum()
    Kn = 1.0 / float(np.sum(lam * lam))
    P = 1.0 / Kn
    return SchmidtReport(lam, Kn, P, 1.0 + P, P)


def gaussian_schmidt_number(a: float, b: float) -> float:
    """K of exp(-a (nu_s + nu_i)^2 - b (nu_s - nu_i)^2) in closed form.

    The amplitude factorizes in the rotated coordinates and is a two-mode
    squeezed-vacuum-like Gaussian kernel; its Schmidt coefficients form a
    geometric series with ratio ((sqrt(a) - sqrt(b)) / (sqrt(a) + sqrt(b)))^2,
    which sums to K = (a + b) / (2 sqrt(a b)).
    """
    if a <= 0 or b <= 0:
        raise ValueError("Gaussian widths must be positive")
    return (a + b) / (2.0 * math.sqrt(a * b))


def jsi_orientation(grid: JsaGrid, aperture: float | None = None) -> float:
    """Major-axis angle (degrees, in (-90, 90]) of the JSI from second moments.

    The angle is measured from the signal axis towards the idler axis.  An
    optional circular ``aperture`` (rad/fs, about the intensity centroid)
    removes the bias a rectangular grid imposes on an elongated ridge that
    it clips.
    """
    I = grid.intensity
    S, Ii = np.meshgrid(grid.nu_s, grid.nu_i, indexing="ij")
    tot = I.sum()
    if tot <= 0:
        raise ZeroGrid("empty intensity")
    cs, ci = (I * S).sum() / tot, (I * Ii).sum() / tot
    if aperture is not None:
        I = np.where((S - cs) ** 2 + (Ii - ci) ** 2 <= aperture * aperture, I, 0.0)
        tot = I.sum()
    dS, dI = S - cs, Ii - ci
    mss = (I * dS * dS).sum() / tot
    mii = (I * dI * dI).sum() / tot
    msi = (I * dS * dI).sum() / tot
    ang = 0.5 * math.degrees(math.atan2(2.0 * msi, mss - mii))
    return 90.0 if ang <= -90.0 else ang


# --- brightness --------------------------------------------------------------

# Time-bandwidth product for the intensity FWHM of the Gaussian pump
# exp(-nu^2/sigma^2): |E(t)|^2 ~ exp(-sigma^2 t^2 / 2).
_FWHM_FACTOR = 2.0 * math.sqrt(2.0 * math.log(2.0))


def pulse_duration_fwhm(pump: PumpSpec) -> float:
    """Transform-limited intensity FWHM (fs) of a Gaussian pump."""
    return _FWHM_FACTOR / pump.sigma


@dataclass(frozen=True)
class Brightness:
    flux: float  # arbitrary units
    effective_length_m: float
    max_length_m: float  # inf when the pumps do not walk off
    clamped: bool


def brightness_estimate(
    fiber: FiberModel, process: ProcessSpec, pump1: PumpSpec, pump2: PumpSpec | None = None, duration_factor: float = 1.0
) -> Brightness:
    """Relative pair flux ~ p1 p2 sigma L_eff gamma1 gamma2.

    The interaction length saturates at L_max, the length after which the
    pumps have walked apart by ``duration_factor`` times the shorter pulse
    duration.  Degenerate pumps (same frequency and mode) never saturate.
    """
    pump2 = pump1 if pump2 is None else pump2
    if process.label not in fiber.gamma_table:
        raise MissingGamma(f"no nonlinear coefficient for process {process.label}")
    g1, g2 = _gammas(fiber, process)
    degenerate = pump1.omega0 == pump2.omega0 and process.pump1.mode == process.pump2.mode
    if degenerate:
        sigma = pump1.sigma
        L_max = math.inf
    else:
        # reduces to the common bandwidth when both pumps are equally broad
        sigma = math.sqrt(2.0) * pump1.sigma * pump2.sigma / math.hypot(pump1.sigma, pump2.sigma)
        k1a = float(k_derivatives(fiber, process.pump1.mode, [pump1.omega0])[1][0, 0])
        k1b = float(k_derivatives(fiber, process.pump2.mode, [pump2.omega0])[1][0, 0])
        walk = abs(k1a - k1b)  # fs/um
        dur = duration_factor * min(pulse_duration_fwhm(pump1), pulse_duration_fwhm(pump2))
        L_max = math.inf if walk == 0 else dur / walk / K.M_TO_UM
    L_eff = min(fiber.length_m, L_max)
    flux = pump1.power * pump2.power * sigma * L_eff * g1 * g2
    return Brightness(flux, L_eff, L_max, fiber.length_m > L_max)


# --- multi-process states ----------------------------------------------------

@dataclass(frozen=True)
class ProcessEntry:
    process: ProcessSpec
    weight: complex
    grid: JsaGrid

    @property
    def signal_pol(self) -> str:
        return self.process.signal.mode.polarization or self.process.signal.mode.label

    @property
    def idler_pol(self) -> str:
        return self.process.idler.mode.polarization or self.process.idler.mode.label


@dataclass(frozen=True)
class MultiProcessState:
    """Coherent superposition sum_n w_n F_n(nu_s, nu_i) |p_s^n, p_i^n>."""

    entries: tuple[ProcessEntry, ...]
    norm_before: float = field(default=1.0)

    def inner(self, j: int, l: int) -> complex:
        a, b = self.entries[j], self.entries[l]
        if a.signal_pol != b.signal_pol or a.idler_pol != b.idler_pol:
            return 0.0
        g = a.grid
        return complex(np.sum(np.conj(a.weight * a.grid.amplitude) * b.weight * b.grid.amplitude) * g.dnu_s * g.dnu_i)

    def norm(self) -> float:
        n = len(self.entries)
        return math.sqrt(sum(self.inner(j, l) for j in range(n) for l in range(n)).real)


def build_multiprocess_state(entries) -> MultiProcessState:
    """Normalize the superposition of (process, weight, grid) triples.

    Processes with identical signal and idler polarization labels add
    coherently, so the norm includes their overlap integrals.
    """
    items = [e if isinstance(e, ProcessEntry) else ProcessEntry(*e) for e in entries]
    if not items:
        raise ValueError("at least one process is required")
    ref = items[0].grid
    for e in items[1:]:
        g = e.grid
        if g.amplitude.shape != ref.amplitude.shape or not (
            np.allclose(g.nu_s, ref.nu_s, rtol=0, atol=1e-12 * np.abs(ref.nu_s).max())
            and np.allclose(g.nu_i, ref.nu_i, rtol=0, atol=1e-12 * np.abs(ref.nu_i).max())
            and g.omega_s0 == ref.omega_s0
            and g.omega_i0 == ref.omega_i0
        ):
            raise AxisMismatch("all process grids must share the same axes and centers")
    raw = MultiProcessState(tuple(items))
    n = raw.norm()
    if not n > 0:
        raise ZeroGrid("superposition has zero norm")
    scaled = tuple(ProcessEntry(e.process, e.weight / n, e.grid) for e in items)
    return MultiProcessState(scaled, n)


@dataclass(frozen=True)
class NegativityReport:
    LN: float
    bins: int
    converged: bool
    LN_coarse: float  # evaluation at the requested bin count

    def to_dict(self) -> dict:
        return {"log_negativity_bits": self.LN, "bins": self.bins, "converged": self.converged, "log_negativity_coarse_bits": self.LN_coarse}


def _reduced_state(state: MultiProcessState, bins: int) -> tuple[np.ndarray, int]:
    """rho on (signal polarization) x (idler-frequency bin).

    The pure amplitude lives on (p_s, nu_s, p_i, nu_i); nu_s, p_i and the
    position of nu_i inside its bin are traced out.
    """
    pols = sorted({e.signal_pol for e in state.entries})
    ipols = sorted({e.idler_pol for e in state.entries})
    g0 = state.entries[0].grid
    ns, ni = g0.amplitude.shape
    area = g0.dnu_s * g0.dnu_i
    # A[p_s, p_i] (ns, ni): summed amplitudes of processes sharing both labels
    A = np.zeros((len(pols), len(ipols), ns, ni), dtype=complex)
    for e in state.entries:
        A[pols.index(e.signal_pol), ipols.index(e.idler_pol)] += e.weight * e.grid.amplitude
    if ni % bins:
        raise ValueError("bins must divide the number of idler samples")
    P = len(pols)
    # rho[(a,J),(b,J')] = sum_{p_i, s, q} A[a,p_i,s,J,q] conj(A[b,p_i,s,J',q]); q is the in-bin offset
    B = A.reshape(P, len(ipols), ns, bins, ni // bins)
    B = np.moveaxis(B, 3, 1)  # (P, bins, Pi, ns, width)
    V = B.reshape(P * bins, -1)
    rho = (V @ V.conj().T) * area
    return rho, P


def _ln_from_rho(rho: np.ndarray, P: int) -> float:
    d = rho.shape[0] // P
    R = rho.reshape(P, d, P, d)
    RT = R.transpose(2, 1, 0, 3).reshape(P * d, P * d)  # transpose on signal polarization
    ev = np.linalg.eigvalsh(0.5 * (RT + RT.conj().T))
    tn = float(np.sum(np.abs(ev)))
    return max(0.0, math.log2(tn)) if tn > 0 else 0.0


def _equal_bins(requested: int, n: int) -> int:
    """Smallest divisor of ``n`` that is at least ``requested`` (capped at n)."""
    for b in range(min(requested, n), n + 1):
        if n % b == 0:
            return b
    return n


def log_negativity(state: MultiProcessState, bins: int = 32, tol: float = 1e-3, raise_on_nonconvergence: bool = False) -> NegativityReport:
    """LN (bits) across the split (signal polarization | idler frequency).

    The result at ``bins`` is compared with ``2 * bins`` (capped at the
    number of idler samples); ``converged`` reports whether they agree to
    ``tol``.  The returned LN is the finer of the two evaluations.

    Bins have equal width so that the in-bin offset is a genuine tensor
    factor; the bin count is raised to the next divisor of the idler sample
    count when needed.  Tracing the offset is not a local operation, so
    phase structure finer than one bin can change LN; with one sample per
    bin the result is invariant under idler phase masks.
    """
    if bins < 8:
        raise ValueError("at least 8 idler-frequency bins are required")
    if len(state.entries) == 1:
        # a single process is a product across this split
        return NegativityReport(0.0, bins, True, 0.0)
    if len({e.signal_pol for e in state.entries}) < 2:
        raise SinglePolarization("the state has a single signal polarization; LN is identically 0")
    ni = state.entries[0].grid.amplitude.shape[1]
    b1 = _equal_bins(bins, ni)
    b2 = _equal_bins(2 * b1, ni)
    rho1, P = _reduced_state(state, b1)
    ln1 = _ln_from_rho(rho1, P)
    if b2 == b1:
        ln2 = ln1
    else:
        rho2, _ = _reduced_state(state, b2)
        ln2 = _ln_from_rho(rho2, P)
    ok = abs(ln2 - ln1) < tol
    if not ok and raise_on_nonconvergence:
        raise NotConverged(f"LN changed by {abs(ln2 - ln1):.3g} between {b1} and {b2} bins")
    return NegativityReport(ln2, b2, ok, ln1)
