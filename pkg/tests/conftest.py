import numpy as np
import pytest

from sfwm.fiber import FiberKind, FiberModel, ModeId, TaylorDispersion
from sfwm.phasematch import ProcessSpec, Wave

# Two-ZDW Taylor test fiber: k2(w) = A((w - w0)^2 - x0^2), ZDWs at w0 +- x0.
TWO_ZDW_OMEGA0 = 2.4
TWO_ZDW_A = 0.22
TWO_ZDW_X0 = 0.3
TWO_ZDW_BETAS = (10.0, 5.0, -TWO_ZDW_A * TWO_ZDW_X0**2, 0.0, 2 * TWO_ZDW_A)


def two_zdw_fiber(length_m=0.01, gamma=70.0, extra_modes=None, birefringence=0.0):
    betas = {"HE11x": TWO_ZDW_BETAS}
    betas.update(extra_modes or {})
    return FiberModel(
        FiberKind.TAYLOR,
        length_m=length_m,
        birefringence=birefringence,
        gamma_table={"p1": gamma, "p4": gamma},
        taylor=TaylorDispersion(TWO_ZDW_OMEGA0, betas),
    )


def co_process(label="p1", mode="HE11x"):
    m = ModeId(mode)
    return ProcessSpec(label, Wave(m), Wave(m), Wave(m), Wave(m))


@pytest.fixture
def fiber():
    return two_zdw_fiber()


@pytest.fixture
def process():
    return co_process()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            props = dict(getattr(rep, "user_properties", []))
            if rep.when == "call" and "criterion" in props:
                lines.append((props["criterion"], key == "passed", props["detail"]))
    if lines:
        terminalreporter.section("acceptance criteria")
        for n, ok, detail in sorted(lines):
            terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
