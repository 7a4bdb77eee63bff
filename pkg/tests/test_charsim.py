import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from sfwm.charsim import (
    DetectorModel,
    commensurate_delays,
    diagonal_purity,
    dispersive_delay_ps,
    rebin_intensity,
    reconstruction_error,
    sim_dispersive_fiber,
    sim_ft_spectroscopy,
    sim_monochromator,
    sim_set,
)
from sfwm.errors import NyquistViolation
from sfwm.jsa import JsaGrid, normalize_jsi
from sfwm.quantum import schmidt_decompose


def ellipse(a, b, n=48, half=0.08, ws0=2.6, wi0=2.2):
    """Gaussian amplitude exp(-a (s+i)^2 - b (s-i)^2); its intensity has r = b / a."""
    nu = np.linspace(-half, half, n)
    S, I = np.meshgrid(nu, nu, indexing="ij")
    return normalize_jsi(JsaGrid(nu, nu, np.exp(-a * (S + I) ** 2 - b * (S - I) ** 2).astype(complex), ws0, wi0, "truth"))


def _band(g):
    ws = g.omega_s0 + g.nu_s
    wi = g.omega_i0 + g.nu_i
    return (ws[0] - g.dnu_s / 2, ws[-1] + g.dnu_s / 2), (wi[0] - g.dnu_i / 2, wi[-1] + g.dnu_i / 2)


# --- reconstruction error ------------------------------------------------------


def test_error_identical_and_disjoint():
    p = np.zeros((4, 4))
    p[:2] = 1.0
    q = np.zeros((4, 4))
    q[2:] = 1.0
    assert reconstruction_error(p, p) == {"l1": 0.0, "overlap": 1.0}
    e = reconstruction_error(p, q)
    assert e["overlap"] == 0.0 and e["l1"] == pytest.approx(2.0)


@settings(max_examples=40)
@given(arrays(np.float64, (5, 6), elements=st.floats(0, 10)), arrays(np.float64, (5, 6), elements=st.floats(0, 10)))
def test_error_is_symmetric(p, q):
    if p.sum() == 0 or q.sum() == 0:
        return
    a, b = reconstruction_error(p, q), reconstruction_error(q, p)
    assert a["overlap"] == pytest.approx(b["overlap"], abs=1e-14)
    assert a["l1"] == pytest.approx(b["l1"], abs=1e-14)
    assert 0 <= a["overlap"] <= 1 and 0 <= a["l1"] <= 2 + 1e-12


# --- monochromator -------------------------------------------------------------------


def test_monochromator_noiseless_is_passband_mass():
    g = ellipse(300.0, 3000.0, n=64)
    r = sim_monochromator(g, 16, 16, 1e4, noiseless=True)
    est = r.estimate
    ref = rebin_intensity(g, est.omega_s0 + est.nu_s, est.omega_i0 + est.nu_i)
    assert np.allclose(est.intensity / est.intensity.sum(), ref / ref.sum(), rtol=0, atol=1e-14)
    assert r.settings == 256 and r.acquisition_proxy == 256.0


def test_monochromator_overlap_rises_with_budget():
    g = ellipse(300.0, 3000.0, n=64)
    det = DetectorModel(efficiency=0.5, dark_rate_hz=100.0, window_ps=1000.0, seed=7)
    ov = [sim_monochromator(g, 32, 32, b, det).metrics["overlap"] for b in (1e2, 1e3, 1e4, 1e5)]
    assert all(x < y for x, y in zip(ov, ov[1:]))


def test_monochromator_seeded_determinism():
    g = ellipse(300.0, 3000.0)
    det = DetectorModel(seed=11)
    a = sim_monochromator(g, 16, 16, 500.0, det)
    b = sim_monochromator(g, 16, 16, 500.0, det)
    assert np.array_equal(a.estimate.amplitude, b.estimate.amplitude)


# --- Fourier transform spectroscopy ------------------------------------------------------


def test_ft_one_d_recovers_marginal():
    g = ellipse(300.0, 3000.0)
    (s_lo, s_hi), _ = _band(g)
    r = sim_ft_spectroscopy(g, commensurate_delays(s_lo, s_hi, g.dnu_s), mode="oneD")
    assert r.metrics["overlap"] > 1 - 1e-9


def test_ft_two_d_round_trip():
    g = ellipse(300.0, 3000.0)
    (s_lo, s_hi), (i_lo, i_hi) = _band(g)
    ds = commensurate_delays(s_lo, s_hi, g.dnu_s)
    di = commensurate_delays(i_lo, i_hi, g.dnu_i)
    r = sim_ft_spectroscopy(g, ds, di, mode="twoD")
    assert r.metrics["overlap"] > 0.99
    assert r.settings == ds.size * di.size


def test_commensurate_delays_keep_band_in_one_zone():
    d = commensurate_delays(2.52, 2.68, 0.003)
    h = d[1] - d[0]
    W = math.pi / h
    assert math.floor(2.52 / W) == math.floor(2.68 / W)
    periods = d.size * h * 0.003 / (2 * math.pi)
    assert periods == pytest.approx(round(periods), abs=1e-9)


def test_ft_rejects_aliasing_step():
    g = ellipse(300.0, 3000.0)
    (s_lo, s_hi), _ = _band(g)
    W = 0.5 * (s_lo + s_hi)  # a zone edge inside the band
    with pytest.raises(NyquistViolation):
        sim_ft_spectroscopy(g, np.arange(64) * math.pi / W, mode="oneD")


def _diagonal(g, n=4096):
    top = 2.6 + 2.2 + 0.2
    return sim_ft_spectroscopy(g, np.arange(n) * 0.5 * math.pi / top, mode="diagonal")


def test_ft_diagonal_separable_truth():
    g = ellipse(1000.0, 1000.0, n=128)
    r = _diagonal(g)
    assert r.extra["r"] == pytest.approx(1.0, abs=2e-3)
    assert r.extra["purity"] == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("a,b", [(300.0, 3000.0), (2000.0, 500.0)])
def test_ft_diagonal_ratio_matches_ellipse(a, b):
    r = _diagonal(ellipse(a, b, n=128, half=0.12))
    assert r.extra["r"] == pytest.approx(b / a, rel=0.01)


@pytest.mark.parametrize("a,b", [(300.0, 3000.0), (1000.0, 1000.0), (2000.0, 500.0)])
def test_diagonal_purity_not_below_two_d_svd(a, b):
    g = ellipse(a, b, n=128, half=0.12)
    (s_lo, s_hi), (i_lo, i_hi) = _band(g)
    two = sim_ft_spectroscopy(g, commensurate_delays(s_lo, s_hi, g.dnu_s), commensurate_delays(i_lo, i_hi, g.dnu_i))
    svd_purity = schmidt_decompose(normalize_jsi(two.estimate)).purity
    assert _diagonal(g).extra["purity"] >= svd_purity - 0.02


def test_diagonal_purity_formula():
    assert diagonal_purity(1.0) == 1.0
    assert diagonal_purity(4.0) == pytest.approx(0.8)
    assert diagonal_purity(0.25) == pytest.approx(diagonal_purity(4.0))


# --- dispersive fiber ---------------------------------------------------------------------


def test_dispersive_mapping_arithmetic():
    assert dispersive_delay_ps(-120.0, 0.4, 1.0) == pytest.approx(-48.0)


def test_dispersive_zero_jitter_recovers_truth():
    g = ellipse(300.0, 3000.0, n=96)
    r = sim_dispersive_fiber(g, -120.0, 0.4)
    assert r.metrics["overlap"] > 0.999
    assert r.extra["time_per_nm_ps"] == pytest.approx(48.0)


def _width_along_difference(intensity, nu):
    S, I = np.meshgrid(nu, nu, indexing="ij")
    v = (S - I) / math.sqrt(2)
    p = intensity / intensity.sum()
    m = (p * v).sum()
    return math.sqrt((p * (v - m) ** 2).sum())


def test_jitter_matching_width_inflates_by_sqrt2():
    # degenerate centers so both photons share one frequency-to-time scale
    w0 = 2.4
    g = ellipse(2000.0, 20000.0, n=161, half=0.04, ws0=w0, wi0=w0)
    sv = _width_along_difference(g.intensity, g.nu_s)
    DL = 120.0 * 0.4
    ps_per_radfs = DL * 2 * math.pi * 0.299792458 / w0**2 * 1e3
    det = DetectorModel(jitter_ps=sv * ps_per_radfs)
    r = sim_dispersive_fiber(g, 120.0, 0.4, det)
    assert r.warnings  # jitter wider than a bin is flagged
    ratio = _width_along_difference(r.estimate.intensity, g.nu_s) / sv
    assert ratio == pytest.approx(math.sqrt(2), rel=0.03)


def test_dispersive_sampled_mode_is_seeded():
    g = ellipse(300.0, 3000.0, n=32)
    det = DetectorModel(jitter_ps=5.0, seed=3)
    a = sim_dispersive_fiber(g, -120.0, 0.4, det, pairs=20000, noiseless=False)
    b = sim_dispersive_fiber(g, -120.0, 0.4, det, pairs=20000, noiseless=False)
    assert np.array_equal(a.estimate.amplitude, b.estimate.amplitude)
    assert a.metrics["overlap"] > 0.95


# --- stimulated emission tomography -----------------------------------------------------------


def test_set_full_scan_is_exact():
    g = ellipse(300.0, 3000.0)
    r = sim_set(g, g.nu_i.size)
    assert r.metrics["overlap"] == pytest.approx(1.0, abs=1e-12)
    assert r.metrics["l1"] < 1e-12


def test_set_coarser_scans_degrade_smoothly():
    g = ellipse(300.0, 3000.0, n=65)
    ov = [sim_set(g, n).metrics["overlap"] for n in (65, 33, 17, 9)]
    assert all(x >= y for x, y in zip(ov, ov[1:]))
    assert ov[2] > 0.99
    drops = -np.diff(ov)
    assert np.all(drops[1:] >= drops[:-1])  # no sudden jump at any one halving


def test_set_beats_monochromator_at_equal_pair_budget():
    g = ellipse(300.0, 3000.0, n=32)
    det = DetectorModel(efficiency=0.5, dark_rate_hz=100.0, seed=5)
    budget = 200.0
    mono = sim_monochromator(g, 32, 32, budget, det)
    st_ = sim_set(g, 32, pair_budget=budget, seed_photons=1e4, det=det, noiseless=False)
    assert st_.acquisition_proxy < mono.acquisition_proxy
    assert st_.metrics["l1"] < mono.metrics["l1"]
    assert st_.metrics["overlap"] > mono.metrics["overlap"]


def test_set_rejects_scan_outside_band():
    g = ellipse(300.0, 3000.0)
    with pytest.raises(ValueError):
        sim_set(g, 10, seed_range=(-1.0, 1.0))
