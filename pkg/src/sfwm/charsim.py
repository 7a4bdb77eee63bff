"""Simulated joint-spectrum measurements and reconstruction error.

Every simulator takes a ground-truth joint spectrum (a :class:`JsaGrid`),
produces the detector-level data of one measurement scheme and inverts it
to a JSI estimate.  ``noiseless=True`` returns the analytic expectation;
otherwise counts are Poisson-sampled from a generator seeded by the
detector model, so equal seeds give bit-identical results.

Acquisition time is compared through a proxy: number of measurement
settings times the dwell per setting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import constants as K
from .errors import NyquistViolation
from .jsa import JsaGrid

__all__ = [
    "DetectorModel",
    "Reconstruction",
    "reconstruction_error",
    "rebin_intensity",
    "sim_monochromator",
    "bandpass_delay_step",
    "commensurate_delays",
    "sim_ft_spectroscopy",
    "diagonal_purity",
    "dispersive_delay_ps",
    "sim_dispersive_fiber",
    "sim_set",
]


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 1.0
    dark_rate_hz: float = 0.0
    jitter_ps: float = 0.0
    window_ps: float = 1000.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.efficiency <= 1:
            raise ValueError("detector efficiency must lie in (0, 1]")
        if self.dark_rate_hz < 0 or self.jitter_ps < 0 or self.window_ps < 0:
            raise ValueError("detector rates and times must be non-negative")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed))

    def accidentals(self, dwell_s: float) -> float:
        """Mean accidental coincidences per setting from two dark-counting detectors."""
        return self.dark_rate_hz**2 * self.window_ps * 1e-12 * dwell_s


@dataclass(frozen=True, eq=False)
class Reconstruction:
    method: str
    estimate: JsaGrid | None  # JSI estimate (amplitude = sqrt(intensity)); None for 1-D spectra
    spectrum: np.ndarray | None = None  # 1-D results: (frequency axis, estimate) stacked
    settings: int = 0
    pair_budget: float = 0.0
    acquisition_proxy: float = 0.0
    metrics: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    warnings: tuple = ()

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "settings": self.settings,
            "pair_budget": self.pair_budget,
            "acquisition_proxy": self.acquisition_proxy,
            "metrics": self.metrics,
            "warnings": list(self.warnings),
        }
        out.update({k: v for k, v in self.extra.items() if isinstance(v, (int, float, str, bool))})
        return out


def _edges(axis):
    h = axis[1] - axis[0]
    return np.concatenate([axis - h / 2, axis[-1:] + h / 2])


def _overlap_matrix(src_edges, dst_edges):
    """Fraction of each source cell (rows) lying inside each target cell."""
    lo = np.maximum(src_edges[:-1, None], dst_edges[None, :-1])
    hi = np.minimum(src_edges[1:, None], dst_edges[None, 1:])
    return np.clip(hi - lo, 0.0, None) / np.diff(src_edges)[:, None]


def rebin_intensity(grid: JsaGrid, nu_s, nu_i) -> np.ndarray:
    """Truth intensity mass collected into cells centered on (nu_s, nu_i).

    The truth is treated as piecewise constant over its cells and each cell's
    mass is split by overlap length along each axis.  Absolute frequencies
    are compared, so differing grid centers are handled; mass outside the
    target grid is dropped.
    """
    src_s = _edges(grid.omega_s0 + grid.nu_s)
    src_i = _edges(grid.omega_i0 + grid.nu_i)
    Ws = _overlap_matrix(src_s, _edges(np.asarray(nu_s, float)))
    Wi = _overlap_matrix(src_i, _edges(np.asarray(nu_i, float)))
    return Ws.T @ grid.intensity @ Wi


def _unit(p):
    p = np.clip(np.asarray(p, float), 0.0, None)
    s = p.sum()
    return p / s if s > 0 else p


def reconstruction_error(truth, estimate) -> dict:
    """L1 distance and overlap sum sqrt(p q) of unit-normalized intensities.

    Either argument may be a :class:`JsaGrid` or a plain intensity array.  A
    grid truth is re-binned onto a grid estimate's cells when they differ.
    """
    if isinstance(truth, JsaGrid) and isinstance(estimate, JsaGrid):
        if truth.amplitude.shape == estimate.amplitude.shape and np.allclose(
            truth.omega_s0 + truth.nu_s, estimate.omega_s0 + estimate.nu_s, rtol=0, atol=1e-12
        ) and np.allclose(truth.omega_i0 + truth.nu_i, estimate.omega_i0 + estimate.nu_i, rtol=0, atol=1e-12):
            p = truth.intensity
        else:
            p = rebin_intensity(truth, estimate.omega_s0 + estimate.nu_s, estimate.omega_i0 + estimate.nu_i)
        q = estimate.intensity
    else:
        p = truth.intensity if isinstance(truth, JsaGrid) else np.asarray(truth, float)
        q = estimate.intensity if isinstance(estimate, JsaGrid) else np.asarray(estimate, float)
    if p.shape != q.shape:
        raise ValueError("intensity arrays differ in shape")
    p, q = _unit(p), _unit(q)
    return {"l1": float(np.abs(p - q).sum()), "overlap": float(min(1.0, np.sqrt(p * q).sum()))}


def _estimate_grid(template: JsaGrid, nu_s, nu_i, intensity, method, omega_s0=None, omega_i0=None) -> JsaGrid:
    inten = np.clip(intensity, 0.0, None)
    return JsaGrid(
        np.asarray(nu_s, float),
        np.asarray(nu_i, float),
        np.sqrt(inten).astype(complex),
        template.omega_s0 if omega_s0 is None else omega_s0,
        template.omega_i0 if omega_i0 is None else omega_i0,
        method,
    )


def _counts(mean, noiseless, rng):
    return mean if noiseless else rng.poisson(mean).astype(float)


# --- scanning monochromators ------------------------------------------------

def sim_monochromator(
    truth: JsaGrid,
    steps_s: int,
    steps_i: int,
    pair_budget: float,
    det: DetectorModel = DetectorModel(),
    dwell_s: float = 1.0,
    noiseless: bool = False,
) -> Reconstruction:
    """Raster scan of two monochromators with contiguous rectangular passbands.

    ``pair_budget`` is the number of pairs the source emits during one
    setting's dwell.  The expected coincidences at a setting are the budget
    times the normalized JSI mass inside both passbands times efficiency^2,
    plus accidentals.  Accidentals are subtracted on average before the
    estimate is normalized.
    """
    if steps_s < 8 or steps_i < 8:
        raise ValueError("at least 8 monochromator settings per axis are required")
    if pair_budget <= 0:
        raise ValueError("pair budget must be positive")
    span_s = (truth.nu_s[0] - truth.dnu_s / 2, truth.nu_s[-1] + truth.dnu_s / 2)
    span_i = (truth.nu_i[0] - truth.dnu_i / 2, truth.nu_i[-1] + truth.dnu_i / 2)
    cs = span_s[0] + (np.arange(steps_s) + 0.5) * (span_s[1] - span_s[0]) / steps_s
    ci = span_i[0] + (np.arange(steps_i) + 0.5) * (span_i[1] - span_i[0]) / steps_i
    mass = rebin_intensity(truth, truth.omega_s0 + cs, truth.omega_i0 + ci)
    mass = mass / mass.sum()
    acc = det.accidentals(dwell_s)
    mean = pair_budget * det.efficiency**2 * mass + acc
    counts = _counts(mean, noiseless, det.rng())
    est = _estimate_grid(truth, cs, ci, counts - acc, "monochromator")
    settings = steps_s * steps_i
    return Reconstruction(
        "monochromator", est, settings=settings, pair_budget=pair_budget, acquisition_proxy=settings * dwell_s,
        metrics=reconstruction_error(truth, est), extra={"total_counts": float(counts.sum())},
    )


# --- Fourier transform spectroscopy -----------------------------------------------

def bandpass_delay_step(omega_lo: float, omega_hi: float, margin: float = 0.02) -> float:
    """Largest delay step (fs) whose Nyquist zones hold [omega_lo, omega_hi] whole.

    A band-limited interferogram can be sampled below the ordinary Nyquist
    rate as long as the band does not straddle a multiple of pi/step.  The
    band is widened by ``margin`` of its width on both sides first.
    """
    w = omega_hi - omega_lo
    lo, hi = omega_lo - margin * w, omega_hi + margin * w
    if lo <= 0:
        return math.pi / hi
    # zone n spans [n W, (n + 1) W]; the widest step uses the highest zone index that fits
    n = int(math.floor(lo / (hi - lo)))
    return math.pi * (n + 1) / hi


def commensurate_delays(omega_lo: float, omega_hi: float, grid_step: float, guard: float = 0.25,
                        max_periods: int = 8) -> np.ndarray:
    """Bandpass delay grid for cosine-transform spectroscopy.

    The step h places [omega_lo, omega_hi] inside one Nyquist zone
    [n W, (n + 1) W], W = pi/h, keeping a ``guard`` fraction of the zone free
    at both ends.  Without the guard, sum frequencies of two in-band
    components alias onto zero and leak into the reconstruction.  The count
    N satisfies N h grid_step = 2 pi p, which makes cosines at two grid
    frequencies exactly orthogonal over the window.  The choice with the
    fewest samples wins.
    """
    if not 0 <= guard < 0.5:
        raise ValueError("guard must lie in [0, 0.5)")
    lo, hi = omega_lo, omega_hi
    if lo <= 0 or hi <= lo:
        raise NyquistViolation("band edges must satisfy 0 < omega_lo < omega_hi")
    best = None
    n_top = int(math.floor(lo * (1 - 2 * guard) / (hi - lo) - guard))
    for n in range(max(n_top, 0), -1, -1):
        a, b = (n + guard) * math.pi / lo, (n + 1 - guard) * math.pi / hi
        if a > b:
            continue
        for p in range(1, max_periods + 1):
            N = math.ceil(2 * math.pi * p / (grid_step * b))
            h = 2 * math.pi * p / (N * grid_step)
            if a <= h <= b and (best is None or N < best[0]):
                best = (N, h)
        if best is not None:
            break
    if best is None:
        raise NyquistViolation("no commensurate delay step fits the band")
    N, h = best
    return np.arange(N) * h


def _check_bandpass(step, omega_lo, omega_hi):
    if step <= 0:
        raise NyquistViolation("delay step must be positive")
    W = math.pi / step
    if math.floor(omega_lo / W) != math.floor(omega_hi / W) and not math.isclose(omega_hi / W, round(omega_hi / W)):
        raise NyquistViolation(
            f"delay step {step:.4g} fs folds the band [{omega_lo:.4g}, {omega_hi:.4g}] rad/fs across a Nyquist edge"
        )


def _uniform_delays(delays, name):
    d = np.asarray(delays, float)
    if d.ndim != 1 or d.size < 2 or np.any(np.diff(d) <= 0):
        raise NyquistViolation(f"{name} delays must be strictly increasing")
    h = np.diff(d)
    if np.max(np.abs(h - h.mean())) > 1e-9 * h.mean():
        raise NyquistViolation(f"{name} delays must be uniformly spaced")
    return d, float(h.mean())


def _cos_matrix(delays, omegas):
    return np.cos(np.outer(delays, omegas))


def _cosine_fit(C, y):
    """Least-squares coefficients of y on [1, cos(omega_j tau)] columns.

    Equivalent to the cosine transform C^T y followed by inverting the
    window's Gram matrix, which removes the residual leakage between grid
    frequencies (sum-frequency images, finite-window sidelobes).  Returns
    (constant, per-frequency coefficients) along the first axis of y.
    """
    A = np.hstack([np.ones((C.shape[0], 1)), C])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return coef[0], coef[1:]


def sim_ft_spectroscopy(
    truth: JsaGrid,
    delays_s,
    delays_i=None,
    mode: str = "twoD",
    det: DetectorModel = DetectorModel(),
    pair_budget: float = 1e6,
    dwell_s: float = 1.0,
    noiseless: bool = True,
) -> Reconstruction:
    """Fourier-transform spectroscopy of a joint spectrum.

    ``oneD``
        the signal alone passes an interferometer; I(tau) - I(0)/2 is a
        cosine series in the signal spectrum.
    ``twoD``
        both photons pass interferometers with delays (tau_s, tau_i).  The
        coincidence interferogram contains a constant, one term depending on
        tau_s only, one on tau_i only, and the JSI term.  A separable
        least-squares fit on [1, cos] bases along each delay axis puts the
        first three into the discarded constant row and column.
    ``diagonal``
        tau_s = tau_i = tau; the cosine transform separates the sum- and
        difference-frequency distributions, whose widths give sigma_d and
        sigma_a.  ``delays_s`` must satisfy the ordinary Nyquist limit for
        the sum frequency.

    The oneD and twoD estimates are the cosine transform corrected by the
    window's Gram matrix (a least-squares fit on the grid frequencies), so a
    noiseless interferogram is inverted exactly.  Delays are in fs, start at
    0 and are uniformly spaced; ``commensurate_delays`` gives well
    conditioned windows.  Noisy
    runs draw Poisson counts with ``pair_budget`` pairs per delay setting.
    """
    ws = truth.omega_s0 + truth.nu_s
    wi = truth.omega_i0 + truth.nu_i
    J = truth.intensity
    J = J / J.sum()
    rng = det.rng()
    eta = det.efficiency
    acc = det.accidentals(dwell_s)
    ts, hs = _uniform_delays(delays_s, "signal")

    if mode == "oneD":
        _check_bandpass(hs, ws[0] - truth.dnu_s / 2, ws[-1] + truth.dnu_s / 2)
        S = J.sum(axis=1)
        C = _cos_matrix(ts, ws)
        prob = C @ S * 0.5 + 0.5  # (1 + cos)/2 averaged over the spectrum
        mean = pair_budget * eta * prob + acc
        I = _counts(mean, noiseless, rng) - acc
        _, est = _cosine_fit(C, I)
        est = np.clip(est, 0.0, None)
        m = reconstruction_error(S, est)
        return Reconstruction("ft_1d", None, spectrum=np.vstack([truth.nu_s, est]), settings=ts.size,
                              pair_budget=pair_budget, acquisition_proxy=ts.size * dwell_s, metrics=m)

    if mode == "twoD":
        ti, hi = _uniform_delays(delays_i if delays_i is not None else delays_s, "idler")
        _check_bandpass(hs, ws[0] - truth.dnu_s / 2, ws[-1] + truth.dnu_s / 2)
        _check_bandpass(hi, wi[0] - truth.dnu_i / 2, wi[-1] + truth.dnu_i / 2)
        Cs, Ci = _cos_matrix(ts, ws), _cos_matrix(ti, wi)
        As, Ai = 0.5 * (1 + Cs), 0.5 * (1 + Ci)
        prob = As @ J @ Ai.T
        mean = pair_budget * eta**2 * prob + acc
        I = _counts(mean, noiseless, rng)
        # fit along tau_s, then tau_i; constant and single-arm terms land in
        # the first row/column and are discarded
        c0, rows = _cosine_fit(Cs, I)
        _, est = _cosine_fit(Ci, rows.T)
        est = est.T
        grid = _estimate_grid(truth, truth.nu_s, truth.nu_i, est, "ft_2d")
        settings = ts.size * ti.size
        return Reconstruction("ft_2d", grid, settings=settings, pair_budget=pair_budget,
                              acquisition_proxy=settings * dwell_s, metrics=reconstruction_error(truth, grid))

    if mode == "diagonal":
        top = ws[-1] + wi[-1] + truth.dnu_s + truth.dnu_i
        if hs >= math.pi / top:
            raise NyquistViolation(f"diagonal scan needs delay step < {math.pi / top:.4g} fs")
        S, I_ = np.meshgrid(ws, wi, indexing="ij")
        u, v = (S + I_).ravel(), (S - I_).ravel()
        w = J.ravel()
        # (1+cos ws t)(1+cos wi t)/4 = [1 + cos ws t + cos wi t + (cos u t + cos v t)/2]/4
        prob = 0.25 * (1 + np.cos(np.outer(ts, ws)) @ J.sum(axis=1) + np.cos(np.outer(ts, wi)) @ J.sum(axis=0)
                       + 0.5 * (np.cos(np.outer(ts, u)) @ w + np.cos(np.outer(ts, v)) @ w))
        mean = pair_budget * eta**2 * prob + acc
        I = _counts(mean, noiseless, rng) - acc
        I = I - I[-1] if noiseless else I - I[-max(1, ts.size // 20):].mean()
        wt = np.ones(ts.size)
        wt[0] = 0.5
        du = truth.dnu_s + truth.dnu_i

        def band_moments(center, half):
            axis = np.arange(center - half, center + half + du / 4, du / 4)
            spec = np.clip((np.cos(np.outer(axis, ts)) * wt) @ I, 0.0, None)
            p = spec / spec.sum()
            mu = float(p @ axis)
            return math.sqrt(float(p @ (axis - mu) ** 2)), mu

        ub = truth.omega_s0 + truth.omega_i0
        vb = truth.omega_s0 - truth.omega_i0
        half_u = 0.5 * (ws[-1] - ws[0] + wi[-1] - wi[0]) + du
        sd, _ = band_moments(ub, half_u)
        if abs(vb) > half_u:
            sa, _ = band_moments(vb, half_u)
        else:
            # difference band touches zero: use the folded second moment about zero
            axis = np.arange(0.0, abs(vb) + half_u + du / 4, du / 4)
            spec = np.clip((np.cos(np.outer(axis, ts)) * wt) @ I, 0.0, None)
            spec[0] *= 0.5
            p = spec / spec.sum()
            sa = math.sqrt(float(p @ axis**2) - vb * vb)
        r = sd * sd / (sa * sa)
        extra = {"sigma_d_radfs": sd, "sigma_a_radfs": sa, "r": r, "purity": diagonal_purity(r)}
        return Reconstruction("ft_diagonal", None, settings=ts.size, pair_budget=pair_budget,
                              acquisition_proxy=ts.size * dwell_s, extra=extra)

    raise ValueError("mode must be oneD, twoD or diagonal")


def diagonal_purity(r: float) -> float:
    """Purity of a Gaussian JSI with r = sigma_d^2 / sigma_a^2: 2 sqrt(r) / (1 + r)."""
    if r <= 0:
        raise ValueError("width ratio must be positive")
    return 2.0 * math.sqrt(r) / (1.0 + r)


# --- dispersive fiber -------------------------------------------------------

def dispersive_delay_ps(dispersion_ps_nm_km: float, length_km: float, delta_lambda_nm):
    """Arrival-time shift (ps) of a wavelength offset after a dispersive fiber."""
    return dispersion_ps_nm_km * length_km * np.asarray(delta_lambda_nm, float)


def _lambda_nm(omega):
    return 2.0 * math.pi * K.C_UM_PER_FS / np.asarray(omega, float) * 1e3


def sim_dispersive_fiber(
    truth: JsaGrid,
    dispersion_ps_nm_km: float,
    length_km: float,
    det: DetectorModel = DetectorModel(),
    pairs: int = 100000,
    noiseless: bool = True,
) -> Reconstruction:
    """Frequency-to-time mapping in a dispersive fiber with detector jitter.

    Each photon arrives at t = D L (lambda - lambda_0) relative to the pump
    trigger, plus Gaussian jitter.  Time bins are the images of the truth's
    frequency cells, so inverting the linear map puts the histogram back on
    the truth grid.  The noiseless mode integrates the jitter kernel
    analytically; otherwise ``pairs`` photon pairs are drawn.
    """
    ws = truth.omega_s0 + truth.nu_s
    wi = truth.omega_i0 + truth.nu_i
    J = truth.intensity / truth.intensity.sum()
    lam0_s, lam0_i = _lambda_nm(truth.omega_s0), _lambda_nm(truth.omega_i0)
    DL = dispersion_ps_nm_km * length_km
    if DL == 0:
        raise ValueError("zero total dispersion maps every wavelength to the same time")
    t_s = DL * (_lambda_nm(ws) - lam0_s)
    t_i = DL * (_lambda_nm(wi) - lam0_i)
    tb_s = np.sort(DL * (_lambda_nm(truth.omega_s0 + _edges(truth.nu_s)) - lam0_s))
    tb_i = np.sort(DL * (_lambda_nm(truth.omega_i0 + _edges(truth.nu_i)) - lam0_i))
    jit = det.jitter_ps
    flags = []
    min_bin = min(np.min(np.diff(tb_s)), np.min(np.diff(tb_i)))
    if jit > min_bin:
        flags.append(f"jitter {jit:.3g} ps exceeds the {min_bin:.3g} ps time bin; resolution is jitter limited")

    def kernel(t, edges):
        # probability that a photon at t lands in each time bin
        if jit == 0:
            k = np.zeros((t.size, edges.size - 1))
            idx = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, edges.size - 2)
            k[np.arange(t.size), idx] = 1.0
            return k
        c = special.ndtr((edges[None, :] - t[:, None]) / jit)
        return np.diff(c, axis=1)

    # time bins sorted ascending; reorder to the frequency axis afterwards
    order_s = np.argsort(t_s)
    order_i = np.argsort(t_i)
    if noiseless:
        H = kernel(t_s, tb_s).T @ (J * det.efficiency**2) @ kernel(t_i, tb_i)
    else:
        rng = det.rng()
        cells = rng.choice(J.size, size=pairs, p=J.ravel())
        js, ji = np.unravel_index(cells, J.shape)
        us = rng.uniform(-0.5, 0.5, pairs)
        ui = rng.uniform(-0.5, 0.5, pairs)
        ts_ = DL * (_lambda_nm(ws[js] + us * truth.dnu_s) - lam0_s) + jit * rng.standard_normal(pairs)
        ti_ = DL * (_lambda_nm(wi[ji] + ui * truth.dnu_i) - lam0_i) + jit * rng.standard_normal(pairs)
        keep = rng.uniform(size=pairs) < det.efficiency**2
        H = np.histogram2d(ts_[keep], ti_[keep], bins=[tb_s, tb_i])[0]
    # bin k in sorted time order corresponds to frequency cell order_s[k]
    est = np.empty_like(H)
    est[np.ix_(order_s, order_i)] = H
    grid = _estimate_grid(truth, truth.nu_s, truth.nu_i, est, "dispersive_fiber")
    extra = {"time_per_nm_ps": float(abs(DL)), "signal_time_span_ps": float(tb_s[-1] - tb_s[0])}
    return Reconstruction("dispersive_fiber", grid, settings=1, pair_budget=float(pairs),
                          acquisition_proxy=1.0, metrics=reconstruction_error(truth, grid), extra=extra,
                          warnings=tuple(flags))


# --- stimulated emission tomography ---------------------------------------------

def sim_set(
    truth: JsaGrid,
    seed_steps: int,
    seed_range=None,
    seed_photons: float = 1e6,
    pair_budget: float = 1e3,
    det: DetectorModel = DetectorModel(),
    rel_noise: float = 0.0,
    dwell_s: float = 1.0,
    noiseless: bool = True,
) -> Reconstruction:
    """Seeded idler scan; each stimulated-signal spectrum is one JSI row.

    ``seed_range`` is a (low, high) idler detuning window in rad/fs and
    defaults to the truth's idler axis.  The seed sits at ``seed_steps``
    evenly spaced idler detunings; the JSI there is interpolated linearly
    along the idler axis.  Stimulated counts scale with the spontaneous
    pair number times ``seed_photons``.  Noisy runs draw Poisson counts and
    optionally a relative Gaussian (classical) fluctuation.
    """
    if seed_steps < 2:
        raise ValueError("at least two seed settings are required")
    lo, hi = (truth.nu_i[0], truth.nu_i[-1]) if seed_range is None else seed_range
    if lo < truth.nu_i[0] - 1e-12 or hi > truth.nu_i[-1] + 1e-12:
        raise ValueError("seed scan extends beyond the truth's idler band")
    seeds = np.linspace(lo, hi, seed_steps)
    J = truth.intensity / (truth.intensity.sum() * truth.dnu_s * truth.dnu_i)
    rows = np.empty((truth.nu_s.size, seed_steps))
    for s in range(truth.nu_s.size):
        rows[s] = np.interp(seeds, truth.nu_i, J[s])
    # JSI mass per (signal cell, seed-spacing cell)
    cell = truth.dnu_s * (seeds[1] - seeds[0])
    mean = pair_budget * seed_photons * det.efficiency * rows * cell
    if noiseless:
        counts = mean
    else:
        rng = det.rng()
        counts = rng.poisson(mean).astype(float)
        if rel_noise > 0:
            counts = counts * (1.0 + rel_noise * rng.standard_normal(counts.shape))
    est = _estimate_grid(truth, truth.nu_s, seeds, counts, "set")
    return Reconstruction("set", est, settings=seed_steps, pair_budget=pair_budget,
                          acquisition_proxy=seed_steps * dwell_s, metrics=reconstruction_error(truth, est))
