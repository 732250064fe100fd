"""Persistence: CSV trajectories/points, JSON reports, binary checkpoints,
and run-config loading.

CSV trajectory columns are stable: time_au, P0..P6, norm, absorbed_norm
(plus field_au when available), written with 17 significant digits.

Checkpoint layout (little-endian):
    magic   4 bytes  b"VBCK" (wavefunction) / b"VBBS" (basis)
    version u32      1
    grid    6 f64    R_min dR x_min dx, n_R n_x as u64 u64
    payload          row-major complex128 amplitudes
Basis checkpoints insert n_states (u64), energies and residuals (f64 arrays)
before the stacked state payload. A version or magic mismatch refuses the
read; nothing is returned from a partial parse.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import Grid2D, Wavefunction2D

WF_MAGIC = b"VBCK"
BASIS_MAGIC = b"VBBS"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


class ConfigError(ValueError):
    """Invalid run configuration; message carries the offending field."""


def _grid_header(grid: Grid2D) -> bytes:
    return struct.pack("<4dQQ", grid.R_min, grid.dR, grid.x_min, grid.dx,
                       grid.n_R, grid.n_x)


def _parse_grid_header(buf, offset, grid: Grid2D = None):
    R_min, dR, x_min, dx, n_R, n_x = struct.unpack_from("<4dQQ", buf, offset)
    offset += struct.calcsize("<4dQQ")
    if grid is not None:
        if (n_R, n_x) != grid.shape or abs(R_min - grid.R_min) > 1e-12 \
                or abs(dR - grid.dR) > 1e-15 or abs(x_min - grid.x_min) > 1e-12 \
                or abs(dx - grid.dx) > 1e-15:
            raise CheckpointError("checkpoint grid metadata does not match the grid")
    meta = dict(R_min=R_min, dR=dR, x_min=x_min, dx=dx, n_R=int(n_R), n_x=int(n_x))
    return meta, offset


def grid_from_meta(meta, absorber_width_R=2.0, absorber_width_x=5.0) -> Grid2D:
    return Grid2D(R_min=meta["R_min"],
                  R_max=meta["R_min"] + meta["dR"] * (meta["n_R"] - 1),
                  dR=meta["dR"],
                  x_min=meta["x_min"],
                  x_max=meta["x_min"] + meta["dx"] * (meta["n_x"] - 1),
                  dx=meta["dx"],
                  absorber_width_R=absorber_width_R,
                  absorber_width_x=absorber_width_x)


def write_checkpoint(path, psi: Wavefunction2D):
    data = np.ascontiguousarray(psi.amplitudes, dtype="<c16")
    with open(path, "wb") as f:
        f.write(WF_MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(_grid_header(psi.grid))
        f.write(data.tobytes())


def read_checkpoint(path, grid: Grid2D = None) -> Wavefunction2D:
    buf = Path(path).read_bytes()
    if buf[:4] != WF_MAGIC:
        raise CheckpointError(f"bad magic bytes in {path}")
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != VERSION:
        raise CheckpointError(f"checkpoint version {version} != {VERSION}")
    meta, off = _parse_grid_header(buf, 8, grid)
    n = meta["n_R"] * meta["n_x"]
    expected = off + 16 * n
    if len(buf) != expected:
        raise CheckpointError(f"truncated checkpoint: {len(buf)} != {expected} bytes")
    amps = np.frombuffer(buf, dtype="<c16", count=n, offset=off).reshape(
        meta["n_R"], meta["n_x"])
    g = grid if grid is not None else grid_from_meta(meta)
    return Wavefunction2D(amps.copy(), g)


def write_basis_checkpoint(path, basis):
    with open(path, "wb") as f:
        f.write(BASIS_MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(_grid_header(basis.grid))
        f.write(struct.pack("<Q", basis.n_states))
        f.write(np.asarray(basis.energies, dtype="<f8").tobytes())
        f.write(np.asarray(basis.residuals, dtype="<f8").tobytes())
        for s in basis.states:
            f.write(np.ascontiguousarray(s.amplitudes, dtype="<c16").tobytes())


CURVES_MAGIC = b"VBCV"


def write_curves_checkpoint(path, curves):
    """R samples, both curves, dipole and the electronic states, row-major."""
    n = curves.R_samples.size
    nx = curves.phi_g.shape[1]
    with open(path, "wb") as f:
        f.write(CURVES_MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<QQ", n, nx))
        for arr in (curves.R_samples, curves.E_g, curves.E_u, curves.dipole_gu):
            f.write(np.asarray(arr, dtype="<f8").tobytes())
        f.write(np.asarray(curves.degenerate, dtype="<u1").tobytes())
        f.write(np.ascontiguousarray(curves.phi_g, dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(curves.phi_u, dtype="<f8").tobytes())


def read_curves_checkpoint(path, grid: Grid2D, params):
    from .eigensolver import BOCurves
    buf = Path(path).read_bytes()
    if buf[:4] != CURVES_MAGIC:
        raise CheckpointError(f"bad magic bytes in {path}")
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != VERSION:
        raise CheckpointError(f"curves checkpoint version {version} != {VERSION}")
    n, nx = struct.unpack_from("<QQ", buf, 8)
    off = 8 + 16

    def take(count, dtype="<f8", itemsize=8):
        nonlocal off
        arr = np.frombuffer(buf, dtype=dtype, count=count, offset=off).copy()
        off += itemsize * count
        return arr

    R = take(n)
    E_g = take(n)
    E_u = take(n)
    dip = take(n)
    degenerate = take(n, "<u1", 1).astype(bool)
    phi_g = take(n * nx).reshape(n, nx)
    phi_u = take(n * nx).reshape(n, nx)
    if off != len(buf):
        raise CheckpointError("trailing bytes in curves checkpoint")
    return BOCurves(R_samples=R, E_g=E_g, E_u=E_u, phi_g=phi_g, phi_u=phi_u,
                    dipole_gu=dip, degenerate=degenerate, grid=grid, params=params)


def read_basis_checkpoint(path, grid: Grid2D = None):
    from .eigensolver import VibrationalBasis
    buf = Path(path).read_bytes()
    if buf[:4] != BASIS_MAGIC:
        raise CheckpointError(f"bad magic bytes in {path}")
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != VERSION:
        raise CheckpointError(f"basis checkpoint version {version} != {VERSION}")
    meta, off = _parse_grid_header(buf, 8, grid)
    (n_states,) = struct.unpack_from("<Q", buf, off)
    off += 8
    energies = np.frombuffer(buf, dtype="<f8", count=n_states, offset=off).copy()
    off += 8 * n_states
    residuals = np.frombuffer(buf, dtype="<f8", count=n_states, offset=off).copy()
    off += 8 * n_states
    g = grid if grid is not None else grid_from_meta(meta)
    n = meta["n_R"] * meta["n_x"]
    states = []
    for _ in range(n_states):
        amps = np.frombuffer(buf, dtype="<c16", count=n, offset=off).reshape(
            meta["n_R"], meta["n_x"])
        states.append(Wavefunction2D(amps.copy(), g))
        off += 16 * n
    if off != len(buf):
        raise CheckpointError("trailing bytes in basis checkpoint")
    return VibrationalBasis(states=states, energies=energies,
                            residuals=residuals, grid=g)


# --- CSV/JSON ---

def _fmt(x) -> str:
    return f"{x:.17g}"


def write_trajectory_csv(path, result, n_pop: int = 7):
    """time_au, P0..P{n-1}, norm, absorbed_norm, field_au."""
    pops = result.populations
    k = pops.shape[1] if pops.ndim == 2 and pops.size else 0
    n_pop = max(n_pop, k)
    has_field = getattr(result, "field", None) is not None
    hdr = ["time_au"] + [f"P{v}" for v in range(n_pop)] + ["norm", "absorbed_norm"]
    if has_field:
        hdr.append("field_au")
    lines = [",".join(hdr)]
    norm = getattr(result, "norm", None)
    absorbed = getattr(result, "absorbed_norm", None)
    for i, t in enumerate(result.times):
        row = [_fmt(t)]
        row += [_fmt(pops[i][v]) if v < k else _fmt(0.0) for v in range(n_pop)]
        row.append(_fmt(norm[i]) if norm is not None
                   else _fmt(float(np.sum(pops[i]))))
        row.append(_fmt(absorbed[i]) if absorbed is not None else _fmt(0.0))
        if has_field:
            row.append(_fmt(result.field[i]))
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_points_csv(path, points):
    if not points:
        raise ValueError("no points to write")
    cols = list(points[0].keys())
    lines = [",".join(cols)]
    for pt in points:
        lines.append(",".join(
            _fmt(pt[c]) if isinstance(pt[c], float) else str(pt[c]) for c in cols))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path):
    """Returns (columns, dict of numpy arrays); numeric where possible."""
    lines = Path(path).read_text().strip().splitlines()
    cols = lines[0].split(",")
    raw = [ln.split(",") for ln in lines[1:]]
    out = {}
    for j, c in enumerate(cols):
        vals = [r[j] for r in raw]
        try:
            out[c] = np.array([float(v) for v in vals])
        except ValueError:
            out[c] = np.array(vals)
    return cols, out


def write_report_json(path, report):
    doc = {
        "kind": report.kind,
        "engine": report.engine,
        "inputs": report.inputs,
        "fits": report.fits,
        "n_points": len(report.points),
        "provenance": report.provenance,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def write_experiment_dir(out_dir, report):
    """report.json + points.csv + traj_*.csv in a self-describing directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report_json(out / "report.json", report)
    write_points_csv(out / "points.csv", report.points)
    for label, traj in report.trajectories:
        if traj is not None and getattr(traj, "times", None) is not None:
            write_trajectory_csv(out / f"traj_{label}.csv", traj)
    return out


# --- run configuration ---

_CONFIG_KEYS = {
    "experiment": {"kind", "engine", "parameters"},
    "grid": {"preset", "R_min", "R_max", "dR", "x_min", "x_max", "dx",
             "absorber_width_R", "absorber_width_x"},
    "model": {"mu_p", "alpha_e", "alpha_p"},
    "propagation": {"dt", "observe_stride", "absorber_on", "checkpoint_stride"},
    "output_dir": None,
    "n_states": None,
    "basis_checkpoint": None,
}


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}")
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    for key, val in cfg.items():
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        allowed = _CONFIG_KEYS[key]
        if allowed is not None:
            if not isinstance(val, dict):
                raise ConfigError(f"config key {key!r} must be an object")
            for sub in val:
                if sub not in allowed:
                    raise ConfigError(f"unknown config key {key}.{sub}")
    if "experiment" not in cfg:
        raise ConfigError("config must contain an 'experiment' section")
    exp = cfg["experiment"]
    for req in ("kind", "parameters"):
        if req not in exp:
            raise ConfigError(f"experiment.{req} is required")
    return cfg


def grid_from_config(cfg) -> Grid2D:
    g = cfg.get("grid", {"preset": "smoke"})
    preset = g.get("preset")
    if preset == "paper":
        base = Grid2D.paper()
    elif preset in (None, "smoke"):
        base = Grid2D.smoke()
    else:
        raise ConfigError(f"unknown grid preset {preset!r}")
    explicit = {k: v for k, v in g.items() if k != "preset"}
    if explicit:
        fields = dict(R_min=base.R_min, R_max=base.R_max, dR=base.dR,
                      x_min=base.x_min, x_max=base.x_max, dx=base.dx,
                      absorber_width_R=base.absorber_width_R,
                      absorber_width_x=base.absorber_width_x)
        fields.update(explicit)
        try:
            return Grid2D(**fields)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"bad grid: {e}")
    return base
