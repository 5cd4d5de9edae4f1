"""Config files, CSV tables and heatmap images."""

from __future__ import annotations

import math
import os
import shutil
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import (
    BECEstimate,
    CFL_SLACK,
    ColdLinear,
    ConfigError,
    CustomTable,
    Grid,
    LaserCooledEstimate,
    PhysicalParams,
    SimulationConfig,
    ZeroDecay,
    default_z_max,
)
from .hierarchy import Trajectory


class ConfigParseError(ConfigError):
    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("invalid config:\n  " + "\n  ".join(self.problems))


NUMERIC_KEYS = {
    "gamma", "omega_c", "g2n", "l0", "ell", "z_max", "dz", "cfl", "dt", "total_time",
    "snapshot_stride", "snapshot_dt",
    "decay.a", "decay.k_c", "decay.v_s", "decay.hbar_over_m", "decay.length",
}
TEXT_KEYS = {"decay.model", "decay.rates", "output_dir", "closure"}
REQUIRED = ("l0", "ell", "total_time")
DECAY_MODELS = ("zero", "cold_linear", "laser_cooled", "bec", "custom")


@dataclass(frozen=True)
class Settings:
    config: SimulationConfig
    output_dir: str = "out"


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def parse_settings(text: str) -> Settings:
    """Parse ``key = value`` lines; every problem is reported at once."""
    problems = []
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip(raw)
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if key not in NUMERIC_KEYS and key not in TEXT_KEYS:
            problems.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            problems.append(f"line {lineno}: duplicate key {key!r}")
            continue
        if key in NUMERIC_KEYS:
            try:
                num = float(value)
            except ValueError:
                problems.append(f"line {lineno}: {key} = {value!r} is not a number")
                continue
            if not math.isfinite(num):
                problems.append(f"line {lineno}: {key} must be finite")
                continue
            values[key] = num
        else:
            values[key] = value
    missing = [k for k in REQUIRED if k not in values]
    if missing:
        problems.append("missing required keys: " + ", ".join(missing))
    if problems:
        raise ConfigParseError(problems)

    model = values.get("decay.model", "cold_linear")
    if model not in DECAY_MODELS:
        raise ConfigParseError([f"decay.model must be one of {DECAY_MODELS}, got {model!r}"])

    def need(*keys):
        absent = [k for k in keys if k not in values]
        if absent:
            raise ConfigParseError([f"decay.model = {model} needs " + ", ".join(absent)])
        return [values[k] for k in keys]

    try:
        if model == "zero":
            decay = ZeroDecay()
        elif model == "cold_linear":
            (a,) = need("decay.a")
            decay = ColdLinear(a)
        elif model == "laser_cooled":
            decay = LaserCooledEstimate(*need("decay.k_c", "decay.v_s"))
        elif model == "bec":
            decay = BECEstimate(*need("decay.k_c", "decay.hbar_over_m", "decay.length"))
        else:
            (rates,) = need("decay.rates")
            decay = CustomTable(tuple(float(r) for r in rates.split(",")))

        params = PhysicalParams(Gamma=values.get("gamma", 1.0), Omega_c=values.get("omega_c", 0.69),
                                g2N=values.get("g2n", 138.0))
        ell = values["ell"]
        if ell != int(ell):
            raise ConfigParseError([f"ell must be an integer, got {ell}"])
        ell = int(ell)
        L0 = values["l0"]
        total_time = values["total_time"]
        dz = values.get("dz", 0.05)
        if not dz > 0:
            raise ConfigParseError(["dz must be positive"])
        if "dt" in values:
            dt = values["dt"]
            if "cfl" in values:
                raise ConfigParseError(["give either cfl or dt, not both"])
        else:
            cfl = values.get("cfl", 0.5)
            if not 0 < cfl <= 1 + CFL_SLACK:
                raise ConfigParseError([f"cfl = {cfl} must lie in (0, 1]"])
            dt = None
        if "snapshot_stride" in values and "snapshot_dt" in values:
            raise ConfigParseError(["give either snapshot_stride or snapshot_dt, not both"])
        if "snapshot_stride" in values:
            stride = values["snapshot_stride"]
            if stride != int(stride) or stride < 1:
                raise ConfigParseError(["snapshot_stride must be a positive integer"])
            stride = int(stride)
        z_max = values.get("z_max")
        if z_max is None:
            z_max = math.ceil(default_z_max(L0, ell, total_time, params) / dz) * dz
        if dt is None:
            dt = cfl * Grid.snapped_dz(z_max, dz) / params.c
        if "snapshot_stride" not in values:
            stride = max(1, int(round(values.get("snapshot_dt", 1.0) / dt)))
        grid = Grid.from_spacing(z_max, dz, dt, stride)
        config = SimulationConfig(params=params, decay=decay, L0=L0, ell=ell, grid=grid,
                                  total_time=total_time, closure=values.get("closure", "spin"))
    except ConfigParseError:
        raise
    except (ConfigError, ValueError) as exc:
        raise ConfigParseError([str(exc)]) from exc
    return Settings(config, values.get("output_dir", "out"))


def parse_config(text: str) -> SimulationConfig:
    return parse_settings(text).config


def render_config(config: SimulationConfig, output_dir: str | None = None) -> str:
    """Text form that :func:`parse_config` maps back to an equal config."""
    p = config.params
    g = config.grid
    lines = [
        f"gamma = {p.Gamma!r}",
        f"omega_c = {p.Omega_c!r}",
        f"g2n = {p.g2N!r}",
    ]
    d = config.decay
    if isinstance(d, ZeroDecay):
        lines.append("decay.model = zero")
    elif isinstance(d, ColdLinear):
        lines += ["decay.model = cold_linear", f"decay.a = {d.a!r}"]
    elif isinstance(d, LaserCooledEstimate):
        lines += ["decay.model = laser_cooled", f"decay.k_c = {d.k_c!r}", f"decay.v_s = {d.v_s!r}"]
    elif isinstance(d, BECEstimate):
        lines += ["decay.model = bec", f"decay.k_c = {d.k_c!r}",
                  f"decay.hbar_over_m = {d.hbar_over_m!r}", f"decay.length = {d.L!r}"]
    elif isinstance(d, CustomTable):
        lines += ["decay.model = custom", "decay.rates = " + ",".join(repr(r) for r in d.rates)]
    else:
        raise TypeError(f"cannot render decay model {d!r}")
    # z_max/dz reproduce n_z exactly; dt is written verbatim so no cfl rounding creeps in
    lines += [
        f"l0 = {config.L0!r}",
        f"ell = {config.ell}",
        f"closure = {config.closure}",
        f"z_max = {g.z_max!r}",
        f"dz = {g.dz!r}",
        f"dt = {g.dt!r}",
        f"total_time = {config.total_time!r}",
        f"snapshot_stride = {g.snapshot_stride}",
    ]
    if output_dir is not None:
        lines.append(f"output_dir = {output_dir}")
    return "\n".join(lines) + "\n"


# --- tables -----------------------------------------------------------------

def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.9g}"


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    out = [",".join(header)]
    out += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(out) + "\n"


# --- heatmaps ---------------------------------------------------------------

# blue background through cyan and yellow to red for the brightest light
RAMP = np.array([
    [0, 0, 96],
    [0, 0, 255],
    [0, 255, 255],
    [255, 255, 0],
    [255, 0, 0],
], dtype=float)


def heatmap_levels(traj: Trajectory) -> np.ndarray:
    """8-bit levels, rows = z from +z_max (top) to -z_max, columns = snapshots."""
    maps = traj.intensity_maps
    top = maps.max() if maps.size else 0.0
    scaled = maps / top if top > 0 else np.zeros_like(maps)
    levels = np.rint(np.clip(scaled, 0.0, 1.0) * 255).astype(np.uint8)
    return levels.T[::-1].copy()


def colorize(levels: np.ndarray) -> np.ndarray:
    x = levels.astype(float) / 255 * (len(RAMP) - 1)
    lo = np.clip(np.floor(x).astype(int), 0, len(RAMP) - 2)
    frac = (x - lo)[..., None]
    rgb = RAMP[lo] * (1 - frac) + RAMP[lo + 1] * frac
    return np.rint(rgb).astype(np.uint8)


def write_pgm(path: Path, levels: np.ndarray) -> None:
    h, w = levels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(levels.tobytes())


def write_ppm(path: Path, rgb: np.ndarray) -> None:
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


def read_pnm(path: Path) -> np.ndarray:
    """Read back a binary PGM/PPM written by this module."""
    data = Path(path).read_bytes()
    magic, dims, maxval, rest = data.split(b"\n", 3)
    w, h = (int(v) for v in dims.split())
    arr = np.frombuffer(rest, dtype=np.uint8)
    return arr.reshape(h, w) if magic == b"P5" else arr.reshape(h, w, 3)


# --- output directories -----------------------------------------------------

@contextmanager
def staged_output(directory: os.PathLike):
    """Yield a scratch directory whose files move into ``directory`` only on success."""
    target = Path(directory)
    target.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".staging-", dir=target.parent))
    try:
        yield scratch
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise
    target.mkdir(parents=True, exist_ok=True)
    for item in sorted(scratch.iterdir()):
        os.replace(item, target / item.name)
    scratch.rmdir()


def write_trajectory_files(traj: Trajectory, directory: Path) -> list:
    """Write the CSV tables and heatmaps for one run into an existing directory."""
    directory = Path(directory)
    t = traj.times
    files = []
    path = directory / "strength.csv"
    write_csv(path, ("t", "I"), zip(t, traj.strength_series))
    files.append(path)
    path = directory / "peaks.csv"
    write_csv(path, ("t", "z_forward", "z_backward"),
              zip(t, traj.forward_peak_positions, traj.backward_peak_positions))
    files.append(path)
    path = directory / "intensity.csv"
    with open(path, "w", newline="\n") as fh:
        fh.write("t,z,value\n")
        zs = [fmt(v) for v in traj.z]
        for ti, row in zip(t, traj.intensity_maps):
            tt = fmt(ti)
            fh.write("".join(f"{tt},{zz},{fmt(v)}\n" for zz, v in zip(zs, row)))
    files.append(path)
    levels = heatmap_levels(traj)
    path = directory / "intensity.pgm"
    write_pgm(path, levels)
    files.append(path)
    path = directory / "intensity.ppm"
    write_ppm(path, colorize(levels))
    files.append(path)
    return files


def write_trajectory(traj: Trajectory, directory: os.PathLike) -> list:
    """Emit strength.csv, peaks.csv, intensity.csv and the heatmaps; all or nothing."""
    try:
        with staged_output(directory) as scratch:
            written = write_trajectory_files(traj, scratch)
    except OSError as exc:
        raise OSError(f"could not write trajectory to {directory}: {exc}") from exc
    return [Path(directory) / p.name for p in written]
