"""File formats and atomic output.

Every writer goes through a temporary file in the destination directory
followed by ``os.replace``, so a reader never sees a half-written file.
Multi-file outputs use :class:`AtomicBatch`, which renames nothing until all
members have been written successfully.
"""

from __future__ import annotations

import json
import os
import tempfile
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import AxisMismatch, ParseError

SCHEMA_VERSION = 1


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def atomic_write_text(path: Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class AtomicBatch:
    """Collect several files and publish them together.

    >>> with AtomicBatch() as batch:
    ...     batch.add(path_a, text_a)
    ...     batch.add(path_b, text_b)
    """

    def __init__(self):
        self._pending: list[tuple[Path, str]] = []
        self.written: list[Path] = []

    def add(self, path, text: str):
        self._pending.append((Path(path), text))

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            self._pending.clear()
            return False
        temps = []
        try:
            for path, text in self._pending:
                path.parent.mkdir(parents=True, exist_ok=True)
                fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
                with os.fdopen(fd, "w", newline="") as fh:
                    fh.write(text)
                temps.append((tmp, path))
        except BaseException:
            for tmp, _ in temps:
                if os.path.exists(tmp):
                    os.unlink(tmp)
            raise
        for tmp, path in temps:
            os.replace(tmp, path)
            self.written.append(path)
        return False


def load_schema(name: str) -> dict:
    text = resources.files("sfwm.schemas").joinpath(name).read_text()
    return json.loads(text)


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, floats via repr (round-trip exact)."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def matrix_csv(a: np.ndarray) -> str:
    return "\n".join(",".join(fmt(v) for v in row) for row in np.asarray(a, dtype=float)) + "\n"


def read_matrix_csv(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric entry") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise ParseError(f"{path}: ragged or empty matrix")
    return np.array(rows)


# --- joint spectra -----------------------------------------------------------

def _grid_sidecar(grid, kind: str, files: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "files": files,
        "omega_s0_radfs": float(grid.omega_s0),
        "omega_i0_radfs": float(grid.omega_i0),
        "nu_s_radfs": [float(v) for v in grid.nu_s],
        "nu_i_radfs": [float(v) for v in grid.nu_i],
        "regime": grid.regime,
        "arbitrary_units": bool(grid.arbitrary_units),
        "normalization_scale": float(grid.scale),
    }


def jsa_files(grid, stem: str = "jsa") -> list[tuple[str, str]]:
    """(file name, contents) pairs for a complex amplitude and its sidecar."""
    files = {"real": f"{stem}_real.csv", "imag": f"{stem}_imag.csv"}
    side = _grid_sidecar(grid, "jsa", files)
    jsonschema.validate(side, load_schema("grid_sidecar.schema.json"))
    return [
        (files["real"], matrix_csv(grid.amplitude.real)),
        (files["imag"], matrix_csv(grid.amplitude.imag)),
        (f"{stem}.json", dumps(side)),
    ]


def jsi_files(grid, stem: str = "jsi") -> list[tuple[str, str]]:
    files = {"intensity": f"{stem}.csv"}
    side = _grid_sidecar(grid, "jsi", files)
    jsonschema.validate(side, load_schema("grid_sidecar.schema.json"))
    return [(files["intensity"], matrix_csv(np.abs(grid.amplitude) ** 2)), (f"{stem}.json", dumps(side))]


def _publish(out_dir, members) -> list[Path]:
    with AtomicBatch() as b:
        for name, text in members:
            b.add(Path(out_dir) / name, text)
    return b.written


def export_jsa(grid, out_dir, stem: str = "jsa") -> list[Path]:
    return _publish(out_dir, jsa_files(grid, stem))


def export_jsi(grid, out_dir, stem: str = "jsi") -> list[Path]:
    return _publish(out_dir, jsi_files(grid, stem))


def import_jsa(sidecar_path):
    """Load a JSA written by :func:`export_jsa` (or a JSI, as a real amplitude)."""
    from .jsa import JsaGrid

    sidecar_path = Path(sidecar_path)
    try:
        side = json.loads(sidecar_path.read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"{sidecar_path}: {e}") from None
    try:
        jsonschema.validate(side, load_schema("grid_sidecar.schema.json"))
    except jsonschema.ValidationError as e:
        raise ParseError(f"{sidecar_path}: {e.message}") from None
    base = sidecar_path.parent
    if side["kind"] == "jsa":
        amp = read_matrix_csv(base / side["files"]["real"]) + 1j * read_matrix_csv(base / side["files"]["imag"])
    else:
        amp = np.sqrt(np.clip(read_matrix_csv(base / side["files"]["intensity"]), 0, None)).astype(complex)
    nu_s, nu_i = np.array(side["nu_s_radfs"]), np.array(side["nu_i_radfs"])
    if amp.shape != (nu_s.size, nu_i.size):
        raise AxisMismatch(f"matrix shape {amp.shape} does not match axes ({nu_s.size}, {nu_i.size})")
    return JsaGrid(
        nu_s=nu_s,
        nu_i=nu_i,
        amplitude=amp,
        omega_s0=side["omega_s0_radfs"],
        omega_i0=side["omega_i0_radfs"],
        regime=side["regime"],
        arbitrary_units=side["arbitrary_units"],
        scale=side["normalization_scale"],
    )


# --- contours and tables ----------------------------------------------------

def contour_csv(contour) -> str:
    lines = ["omega_p_radfs,detuning_radfs,branch,loop_id"]
    for loop_id, poly in enumerate(contour.polylines):
        for wp, d in poly.points:
            lines.append(f"{fmt(wp)},{fmt(d)},{contour.branch_of_point(wp, d)},{loop_id}")
    return "\n".join(lines) + "\n"


def table_csv(header: list[str], rows) -> str:
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    return "\n".join(out) + "\n"
