"""Command-line entry point.

``sfwm <subcommand> --config run.json [--out DIR] [--seed N] [--quiet]``

Physics parameters live in the JSON config (validated against the shipped
schema before anything runs); flags only choose paths, the seed and
verbosity.  Each run prints one JSON summary line on stdout.  Exit codes:
0 success, 2 configuration or input error, 3 numerical non-convergence,
1 file-system error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import jsonschema
import numpy as np

from . import constants as K
from .charsim import (
    DetectorModel,
    commensurate_delays,
    sim_dispersive_fiber,
    sim_ft_spectroscopy,
    sim_monochromator,
    sim_set,
)
from .design import (
    critical_power,
    factorable_search,
    symmetric_bandwidth_solve,
    tuning_scan,
    ultrabroadband_search,
)
from .errors import ConfigError, InputError, NumericalError
from .fiber import (
    FiberKind,
    FiberModel,
    ModeId,
    TaylorDispersion,
    dispersion_parameter,
    find_zdw,
    k_derivatives,
    load_dispersion_table,
)
from .io import AtomicBatch, contour_csv, dumps, fmt, import_jsa, jsa_files, jsi_files, load_schema, table_csv
from .jsa import (
    GridAxes,
    PumpSpec,
    auto_axes,
    jsa_counterprop,
    jsa_dualpump_walkoff,
    jsa_full,
    jsa_linearized,
    normalize_jsi,
)
from .phasematch import (
    CenterFrequencies,
    ProcessSpec,
    Wave,
    column_roots,
    group_delay_terms,
    loop_area,
    polarization_process,
    trace_contour,
)
from .quantum import ProcessEntry, build_multiprocess_state, log_negativity, schmidt_decompose

COMMANDS = ("dispersion", "contour", "jsa", "schmidt", "negativity", "design", "charsim", "validate")
EXIT_OK, EXIT_IO, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


# --- configuration ------------------------------------------------------------

def _key_path(error: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in error.absolute_path]
    if error.validator == "additionalProperties" and isinstance(error.instance, dict):
        allowed = set(error.schema.get("properties", {}))
        extra = sorted(k for k in error.instance if k not in allowed)
        if extra:
            parts.append(extra[0])
    return ".".join(parts) or "<root>"


def load_config(path) -> dict:
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from None
    validator = jsonschema.Draft202012Validator(load_schema("config.schema.json"))
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = jsonschema.exceptions.best_match(errors)
        raise ConfigError(f"config key {_key_path(e)}: {e.message}")
    return cfg


def _section(cfg, name):
    if name not in cfg:
        raise ConfigError(f"config key {name}: section required by this command")
    return cfg[name]


def _resolve(base: Path, p: str) -> Path:
    q = Path(p)
    return q if q.is_absolute() else base / q


def build_fiber(cfg, base: Path) -> FiberModel:
    f = _section(cfg, "fiber")
    gammas = dict(f.get("gamma_per_w_km", {}))
    kind = FiberKind(f["kind"])
    if kind is FiberKind.TABULATED:
        if "table_path" not in f:
            raise ConfigError("config key fiber.table_path: required for tabulated fibers")
        return load_dispersion_table(_resolve(base, f["table_path"]), f["length_m"], f.get("birefringence", 0.0), gammas)
    taylor = None
    if kind is FiberKind.TAYLOR:
        if "taylor" not in f:
            raise ConfigError("config key fiber.taylor: required for Taylor fibers")
        t = f["taylor"]
        taylor = TaylorDispersion(t["omega0_radfs"], {m: tuple(b) for m, b in t["betas_fsn_per_um"].items()})
    return FiberModel(
        kind=kind,
        length_m=f["length_m"],
        core_radius=f.get("core_radius_um", 1.0),
        index_contrast=f.get("index_contrast", 0.02),
        birefringence=f.get("birefringence", 0.0),
        scale_factor=f.get("scale_factor", 1.0),
        gamma_table=gammas,
        taylor=taylor,
    )


def _pump_omega(p, where):
    if "omega_radfs" in p:
        return p["omega_radfs"]
    if "lambda_um" in p:
        return K.omega_from_lambda(p["lambda_um"])
    raise ConfigError(f"config key {where}.omega_radfs: give omega_radfs or lambda_um")


def build_pumps(cfg) -> tuple[PumpSpec, PumpSpec]:
    ps = _section(cfg, "pumps")

    def one(p, where):
        return PumpSpec(_pump_omega(p, where), p["sigma_rad_per_fs"], p.get("power_w", 0.0),
                        p.get("chirp_fs2", 0.0), p.get("delay_fs", 0.0))

    p1 = one(ps["pump1"], "pumps.pump1")
    p2 = one(ps["pump2"], "pumps.pump2") if "pump2" in ps else p1
    return p1, p2


def build_processes(cfg, pumps=None) -> dict[str, ProcessSpec]:
    p1w, p2w = (pumps[0].power, pumps[1].power) if pumps else (0.0, 0.0)
    out = {}
    for n, p in enumerate(_section(cfg, "processes")):
        dirs = p.get("directions", [1, 1, 1, 1])
        if "polarization_row" in p:
            base = polarization_process(p["polarization_row"], label=p["label"])
            waves = [Wave(w.mode, d) for w, d in zip(base.waves, dirs)]
            row = p["polarization_row"]
        elif "modes" in p:
            waves = [Wave(ModeId(m), d) for m, d in zip(p["modes"], dirs)]
            row = None
        else:
            raise ConfigError(f"config key processes.{n}.modes: give modes or polarization_row")
        out[p["label"]] = ProcessSpec(p["label"], *waves, power1=p1w, power2=p2w, table_row=row)
    return out


def _pick_process(processes, section, where):
    label = section.get("process")
    if label is None:
        return next(iter(processes.values()))
    if label not in processes:
        raise ConfigError(f"config key {where}.process: unknown process label {label!r}")
    return processes[label]


def _center(fiber, process, section, p1, p2) -> CenterFrequencies:
    w1, w2 = p1.omega0, p2.omega0
    if "signal_omega_radfs" in section:
        ws = section["signal_omega_radfs"]
        return CenterFrequencies(w1, w2, ws, w1 + w2 - ws)
    wbar = 0.5 * (w1 + w2)
    lo, hi = section.get("detuning_search_radfs", (1e-4 * wbar, 0.4 * wbar))
    grid = np.linspace(lo, hi, section.get("detuning_search_samples", 2001))
    roots = column_roots(fiber, process, w1, grid, None if w2 == w1 else w2)
    if roots.size == 0:
        raise InputError("no phasematched detuning in the search window")
    idx = section.get("root_index", -1)
    try:
        d = float(roots[idx])
    except IndexError:
        raise ConfigError(f"root_index {idx} out of range ({roots.size} roots found)") from None
    return CenterFrequencies.from_contour(w1, d, w2)


# --- commands -----------------------------------------------------------------

def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (np.floating, np.integer)):
        return _clean(v.item())
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def cmd_dispersion(cfg, base, seed):
    fiber = build_fiber(cfg, base)
    d = _section(cfg, "dispersion")
    lam = np.linspace(d["lambda_min_um"], d["lambda_max_um"], d.get("samples", 201))
    modes = [ModeId(m) for m in d.get("modes", [m.label for m in fiber.modes()])]
    rows, zdws = [], {}
    for mode in modes:
        omega = K.omega_from_lambda(lam)
        k, der, _ = k_derivatives(fiber, mode, omega)
        D = dispersion_parameter(fiber, mode, lam)
        for j in range(lam.size):
            rows.append([mode.label, lam[j], omega[j], k[j], *der[:, j], D[j]])
        zdws[mode.label] = find_zdw(fiber, mode, (lam[0], lam[-1]))
    header = ["mode", "lambda_um", "omega_radfs", "k_per_um", "k1_fs_per_um", "k2_fs2_per_um",
              "k3_fs3_per_um", "k4_fs4_per_um", "D_ps_per_nm_km"]
    files = [("dispersion.csv", table_csv(header, rows)), ("dispersion.json", dumps({"zdw_um": zdws}))]
    return files, {"zdw_um": zdws}


def cmd_contour(cfg, base, seed):
    fiber = build_fiber(cfg, base)
    c = _section(cfg, "contour")
    procs = build_processes(cfg, build_pumps(cfg) if "pumps" in cfg else None)
    process = _pick_process(procs, c, "contour")
    x = np.linspace(c["pump_min_radfs"], c["pump_max_radfs"], c.get("pump_samples", 256))
    y = np.linspace(c["detuning_min_radfs"], c["detuning_max_radfs"], c.get("detuning_samples", 257))
    contour = trace_contour(fiber, process, x, y, pump2_omega=c.get("pump2_omega_radfs"))
    info = {
        "process": process.label,
        "loop_area_rad2_per_fs2": loop_area(contour),
        "closed": contour.closed,
        "empty": contour.empty,
        "degenerate": contour.degenerate,
        "polylines": len(contour.polylines),
        "max_residual_per_um": contour.max_residual,
    }
    return [("contour.csv", contour_csv(contour)), ("contour.json", dumps(info))], info


def compute_jsa(cfg, base):
    """Normalized JSA for the ``jsa`` section; shared with tests."""
    fiber = build_fiber(cfg, base)
    p1, p2 = build_pumps(cfg)
    section = _section(cfg, "jsa")
    process = _pick_process(build_processes(cfg, (p1, p2)), section, "jsa")
    method = section["method"]
    center = _center(fiber, process, section, p1, p2)
    n = section.get("grid_points", 128)
    spans = ("half_span_signal_radfs" in section, "half_span_idler_radfs" in section)
    axes = None
    if any(spans):
        hs = section.get("half_span_signal_radfs", section.get("half_span_idler_radfs"))
        hi = section.get("half_span_idler_radfs", hs)
        axes = GridAxes.symmetric(center.omega_s, center.omega_i, hs, hi, n)
    if method == "counterprop":
        if axes is None:
            raise ConfigError("config key jsa.half_span_signal_radfs: required for counterprop grids")
        grid = jsa_counterprop(fiber, process, p1, p2, axes, tol=section.get("quadrature_tol", 1e-10))
    else:
        terms = group_delay_terms(fiber, process, center, p1.sigma, p2.sigma)
        if axes is None:
            axes = auto_axes(terms, p1, p2, n, section.get("grid_widths", 4.0))
        if method == "linearized":
            grid = jsa_linearized(terms, p1, p2, axes)
        elif method == "walkoff":
            grid = jsa_dualpump_walkoff(terms, p1, p2, axes, section.get("pre_delay_fs", 0.0),
                                        section.get("gaussian_limit", False))
        else:
            grid = jsa_full(fiber, process, p1, p2, axes, tol=section.get("quadrature_tol", 1e-10))
    return normalize_jsi(grid), center


def cmd_jsa(cfg, base, seed):
    grid, center = compute_jsa(cfg, base)
    rep = schmidt_decompose(grid)
    info = {
        "regime": grid.regime,
        "omega_s_radfs": center.omega_s,
        "omega_i_radfs": center.omega_i,
        "schmidt_number": rep.K,
        "purity": rep.purity,
    }
    files = jsa_files(grid) + jsi_files(grid)
    return files, info


def cmd_schmidt(cfg, base, seed):
    s = _section(cfg, "schmidt")
    grid = import_jsa(_resolve(base, s["input_sidecar"]))
    rep = schmidt_decompose(grid)
    coeff = "\n".join(fmt(v) for v in rep.coefficients) + "\n"
    return [("schmidt.json", dumps(rep.to_dict())), ("schmidt_coefficients.csv", coeff)], {
        "schmidt_number": rep.K,
        "purity": rep.purity,
        "g2": rep.g2,
    }


def cmd_negativity(cfg, base, seed):
    s = _section(cfg, "negativity")
    procs = build_processes(cfg)
    entries = []
    for n, e in enumerate(s["entries"]):
        if e["process"] not in procs:
            raise ConfigError(f"config key negativity.entries.{n}.process: unknown process label {e['process']!r}")
        grid = import_jsa(_resolve(base, e["input_sidecar"]))
        w = complex(e.get("weight_real", 1.0), e.get("weight_imag", 0.0))
        entries.append(ProcessEntry(procs[e["process"]], w, grid))
    state = build_multiprocess_state(entries)
    rep = log_negativity(state, bins=s.get("bins", 32), tol=s.get("tolerance_bits", 1e-3))
    return [("negativity.json", dumps(_clean(rep.to_dict())))], rep.to_dict()


def cmd_design(cfg, base, seed):
    s = _section(cfg, "design")
    fiber = build_fiber(cfg, base)
    task = s["task"]
    pumps = build_pumps(cfg) if "pumps" in cfg else None
    if task == "ultrabroadband":
        for key in ("mode", "scale_range", "lambda_range_um"):
            if key not in s:
                raise ConfigError(f"config key design.{key}: required for the ultrabroadband task")
        c = ultrabroadband_search(fiber, ModeId(s["mode"]), s["scale_range"], s["lambda_range_um"])
        info = {k: getattr(c, k) for k in c.__dataclass_fields__}
        return [("design.json", dumps(_clean(info)))], info
    process = _pick_process(build_processes(cfg, pumps), s, "design")
    if task == "factorable":
        if "pump_range_radfs" not in s:
            raise ConfigError("config key design.pump_range_radfs: required for the factorable task")
        sig = (pumps[0].sigma, pumps[1].sigma) if pumps else (None, None)
        segs = factorable_search(fiber, process, s["pump_range_radfs"], s.get("detuning_range_radfs"),
                                 s.get("samples", 128), s.get("pump2_omega_radfs"), *sig)
        header = None
        rows = []
        for j, seg in enumerate(segs):
            for cand in seg.candidates:
                r = cand.row()
                header = header or ["segment", *r]
                rows.append([j, *("" if v is None else v for v in r.values())])
        info = {"segments": len(segs), "candidates": len(rows)}
        return [("factorable.csv", table_csv(header or ["segment"], rows)), ("design.json", dumps(info))], info
    if task == "symmetric":
        if pumps is None:
            raise ConfigError("config key pumps: required for the symmetric task")
        p1, p2 = pumps
        center = _center(fiber, process, s, p1, p2)
        terms = group_delay_terms(fiber, process, center, p1.sigma, p2.sigma)
        mode = s.get("solve_for", "sigma")
        val = symmetric_bandwidth_solve(terms, mode, sigma=p1.sigma, length_m=fiber.length_m)
        key = "sigma_rad_per_fs" if mode == "sigma" else "length_m"
        info = {key: val, "T_s_fs": terms.T_s, "T_i_fs": terms.T_i}
        return [("design.json", dumps(info))], info
    if task == "critical_power":
        for key in ("pump_lambda_um", "detuning_max_radfs"):
            if key not in s:
                raise ConfigError(f"config key design.{key}: required for the critical_power task")
        cp = critical_power(fiber, process, s["pump_lambda_um"], s["detuning_max_radfs"],
                            rel_tol=s.get("relative_tolerance", 0.01))
        info = {"power_w": cp.power, "lower_w": cp.lower, "upper_w": cp.upper, "phi_nl_per_um": cp.phi_nl}
        return [("design.json", dumps(info))], info
    # tuning
    for key in ("scale_values", "pump_omega_radfs", "detuning_range_radfs"):
        if key not in s:
            raise ConfigError(f"config key design.{key}: required for the tuning task")
    d = np.linspace(*s["detuning_range_radfs"], s.get("samples", 2001))
    rows = tuning_scan(fiber, process, s["scale_values"], s["pump_omega_radfs"], d, s.get("pump2_omega_radfs"))
    text = table_csv(["scale", "lambda_s_um", "lambda_i_um", "ok"],
                     [[r.scale, r.lambda_s_um, r.lambda_i_um, r.ok] for r in rows])
    info = {"rows": len(rows), "solved": sum(r.ok for r in rows)}
    return [("tuning.csv", text), ("design.json", dumps(info))], info


def _ft_delays(s, lo, hi, step_cell):
    if "delay_step_fs" in s:
        return np.arange(s.get("delay_count", 256)) * s["delay_step_fs"]
    return commensurate_delays(lo, hi, step_cell)


def cmd_charsim(cfg, base, seed):
    s = _section(cfg, "charsim")
    truth = import_jsa(_resolve(base, s["input_sidecar"]))
    det = DetectorModel(**s.get("detector", {}), seed=seed)
    noiseless = s.get("noiseless", False)
    budget = s.get("pair_budget", 1e4)
    dwell = s.get("dwell_s", 1.0)
    method = s["method"]
    if method == "monochromator":
        rec = sim_monochromator(truth, s.get("steps_signal", truth.nu_s.size), s.get("steps_idler", truth.nu_i.size),
                                budget, det, dwell, noiseless)
    elif method == "set":
        rec = sim_set(truth, s.get("seed_steps", truth.nu_i.size), seed_photons=s.get("seed_photons", 1e6),
                      pair_budget=budget, det=det, rel_noise=s.get("relative_noise", 0.0), dwell_s=dwell,
                      noiseless=noiseless)
    elif method == "dispersive":
        for key in ("dispersion_ps_per_nm_km", "length_km"):
            if key not in s:
                raise ConfigError(f"config key charsim.{key}: required for the dispersive method")
        rec = sim_dispersive_fiber(truth, s["dispersion_ps_per_nm_km"], s["length_km"], det, int(budget), noiseless)
    else:
        mode = s.get("ft_mode", "twoD")
        ws = truth.omega_s0 + truth.nu_s
        wi = truth.omega_i0 + truth.nu_i
        h_s, h_i = truth.dnu_s, truth.dnu_i
        if mode == "diagonal":
            top = ws[-1] + wi[-1] + h_s + h_i
            step = s.get("delay_step_fs", 0.5 * math.pi / top)
            ds = np.arange(s.get("delay_count", 4096)) * step
            di = None
        else:
            ds = _ft_delays(s, ws[0] - h_s / 2, ws[-1] + h_s / 2, h_s)
            di = _ft_delays(s, wi[0] - h_i / 2, wi[-1] + h_i / 2, h_i) if mode == "twoD" else None
        rec = sim_ft_spectroscopy(truth, ds, di, mode, det, budget, dwell, noiseless)
    files = [("reconstruction.json", dumps(_clean(rec.to_dict())))]
    if rec.estimate is not None:
        files += jsi_files(rec.estimate, "estimate")
    if rec.spectrum is not None:
        files.append(("spectrum.csv", table_csv(["nu_radfs", "estimate"], rec.spectrum.T.tolist())))
    return files, _clean(rec.to_dict())


HANDLERS = {
    "dispersion": cmd_dispersion,
    "contour": cmd_contour,
    "jsa": cmd_jsa,
    "schmidt": cmd_schmidt,
    "negativity": cmd_negativity,
    "design": cmd_design,
    "charsim": cmd_charsim,
}


# --- entry point ----------------------------------------------------------------

def _parser():
    ap = argparse.ArgumentParser(prog="sfwm", description="SFWM photon-pair source toolkit")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="output directory (overrides output_dir in the config)")
    ap.add_argument("--seed", type=int, help="RNG seed, 0..2^64-1 (overrides the config)")
    ap.add_argument("--quiet", action="store_true", help="suppress warnings on stderr")
    return ap


def run_command(argv=None) -> int:
    args = _parser().parse_args(argv)

    def fail(code, msg):
        print(f"sfwm {args.command}: {msg}", file=sys.stderr)
        print(json.dumps({"command": args.command, "status": "error", "exit_code": code}, sort_keys=True))
        return code

    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must lie in 0..2^64-1")
        cfg_path = Path(args.config)
        cfg = load_config(cfg_path)
        if args.command == "validate":
            print(json.dumps({"command": "validate", "status": "ok", "outputs": []}, sort_keys=True))
            return EXIT_OK
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        out = Path(args.out or cfg.get("output_dir", "sfwm_out"))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            files, info = HANDLERS[args.command](cfg, cfg_path.parent, seed)
        if not args.quiet:
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)
        with AtomicBatch() as batch:
            for name, text in files:
                batch.add(out / name, text)
    except (ConfigError, InputError) as e:
        return fail(EXIT_INPUT, e)
    except NumericalError as e:
        return fail(EXIT_NUMERIC, e)
    except OSError as e:
        return fail(EXIT_IO, e)
    except ValueError as e:
        return fail(EXIT_INPUT, e)
    summary = {"command": args.command, "status": "ok", "outputs": [str(p) for p in batch.written]}
    summary.update(_clean(info))
    print(json.dumps(summary, sort_keys=True, allow_nan=False))
    return EXIT_OK


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
