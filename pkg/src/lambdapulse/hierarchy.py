"""Time-domain integration of the truncated Maxwell-Bloch hierarchy and its diagnostics."""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from ._kernel import Workspace
from .core import (
    ConfigError,
    FieldState,
    SimulationConfig,
    chain_decays,
    default_z_max,
    gaussian_initial_state,
    vg_to_slow_units,
)

log = logging.getLogger(__name__)


class IntegrationDiverged(RuntimeError):
    def __init__(self, time: float, message: str = "non-finite field values"):
        super().__init__(f"{message} at t = {time:.6g}")
        self.time = time


class NotApplicable(Exception):
    """The requested quantity does not exist for this trajectory (e.g. no moving pulse)."""


# --- right-hand side --------------------------------------------------------

def _check_shapes(state: FieldState, config: SimulationConfig) -> None:
    n = config.grid.n_z
    if state.atoms.shape != (2 * config.K + 1, n):
        raise ValueError(f"atoms shape {state.atoms.shape} does not match truncation "
                         f"K={config.K} and n_z={n}")
    if state.ep_plus.shape != (n,) or state.ep_minus.shape != (n,):
        raise ValueError("probe envelopes do not match the grid")


def rhs(state: FieldState, config: SimulationConfig) -> FieldState:
    """Local time derivatives of every field.

    The returned ``ep_plus``/``ep_minus`` hold only the source i g sqrt(N) P_{+-1};
    the advection terms -+c dE/dz belong to the stepper.
    """
    _check_shapes(state, config)
    p = config.params
    damp = chain_decays(config.decay, config.K, p)[:, None]
    y = state.atoms
    nb = np.zeros_like(y)
    nb[1:] += y[:-1]
    nb[:-1] += y[1:]
    dy = -damp * y + 1j * p.Omega_c * nb
    K = config.K
    if K >= 1:
        dy[K + 1] += 1j * p.g_sqrt_n * state.ep_plus
        dy[K - 1] += 1j * p.g_sqrt_n * state.ep_minus
        src_p = 1j * p.g_sqrt_n * y[K + 1]
        src_m = 1j * p.g_sqrt_n * y[K - 1]
    else:
        src_p = np.zeros_like(state.ep_plus)
        src_m = np.zeros_like(state.ep_minus)
    return FieldState(src_p, src_m, dy, state.time)


def coupling_matrix(config: SimulationConfig) -> np.ndarray:
    """Dense local coupling matrix on (E+, E-, chain orders -K..K), built entry by entry."""
    p = config.params
    K = config.K
    n = 2 * K + 3
    A = np.zeros((n, n), complex)
    # index 0: E+, 1: E-, 2 + (m + K): order m
    idx = {m: 2 + m + K for m in range(-K, K + 1)}
    from .core import decay_rate
    for m in range(-K, K + 1):
        i = idx[m]
        if m % 2:
            # optical coherence P_m
            A[i, i] = -(p.Gamma + decay_rate(config.decay, m, p))
            for s in (m - 1, m + 1):
                if s in idx:
                    A[i, idx[s]] += 1j * p.Omega_c
            if m == 1:
                A[i, 0] = 1j * p.g_sqrt_n
            if m == -1:
                A[i, 1] = 1j * p.g_sqrt_n
        else:
            # spin coherence S_m
            A[i, i] = -decay_rate(config.decay, m, p)
            for q in (m - 1, m + 1):
                if q in idx:
                    A[i, idx[q]] += 1j * p.Omega_c
    if 1 in idx:
        A[0, idx[1]] = 1j * p.g_sqrt_n
        A[1, idx[-1]] = 1j * p.g_sqrt_n
    return A


# --- stepping ---------------------------------------------------------------

def _padded_damp(config: SimulationConfig) -> np.ndarray:
    d = np.zeros(2 * config.K + 3)
    d[1:-1] = chain_decays(config.decay, config.K, config.params)
    return d


def _run_kernel(ws: Workspace, config: SimulationConfig, nsteps: int, ghost: int, damp) -> None:
    p = config.params
    ws.run(damp, p.Omega_c, p.g_sqrt_n, config.grid.courant(p.c), config.grid.dt, nsteps, ghost)


def step(state: FieldState, config: SimulationConfig) -> FieldState:
    """Advance the state by one time step dt."""
    config.grid.check_cfl(config.params.c)
    _check_shapes(state, config)
    ws = Workspace(config.grid.n_z, config.K)
    ws.load(state.ep_plus, state.ep_minus, state.atoms)
    _run_kernel(ws, config, 1, -1, _padded_damp(config))
    ep, em, atoms = ws.fields()
    t = state.time + config.grid.dt
    out = FieldState(ep, em, atoms, t)
    if not out.is_finite():
        raise IntegrationDiverged(t)
    return out


def reference_step(state: FieldState, config: SimulationConfig) -> FieldState:
    """Plain-numpy version of :func:`step`, built on :func:`rhs`; used for cross-checks."""
    g = config.grid
    p = config.params
    nu = g.courant(p.c)
    dt = g.dt
    src = rhs(state, config)

    def lf(e, sign):
        left = np.concatenate(([0.0 if sign > 0 else e[0]], e[:-1]))
        right = np.concatenate((e[1:], [e[-1] if sign > 0 else 0.0]))
        return 0.5 * (left + right) - 0.5 * sign * nu * (right - left)

    ep_new = lf(state.ep_plus, +1) + dt * src.ep_plus
    em_new = lf(state.ep_minus, -1) + dt * src.ep_minus
    half = FieldState(state.ep_plus, state.ep_minus,
                      state.atoms + 0.5 * dt * src.atoms, state.time)
    mid = FieldState(0.5 * (state.ep_plus + ep_new), 0.5 * (state.ep_minus + em_new),
                     half.atoms, state.time)
    k2 = rhs(mid, config)
    return FieldState(ep_new, em_new, state.atoms + dt * k2.atoms, state.time + dt)


# --- diagnostics ------------------------------------------------------------

def intensity(state: FieldState) -> np.ndarray:
    """|E_s|^2 + |E_d|^2 with E_s = E+ + E-, E_d = E+ - E-."""
    return intensity_from(state.ep_plus, state.ep_minus)


def intensity_from(ep: np.ndarray, em: np.ndarray) -> np.ndarray:
    es = ep + em
    ed = ep - em
    return es.real**2 + es.imag**2 + ed.real**2 + ed.imag**2


def window_integral(values: np.ndarray, z: np.ndarray, half_width: float) -> float:
    """Trapezoidal integral of ``values`` over [-half_width, half_width]."""
    if half_width > z[-1] * (1 + 1e-12) or -half_width < z[0] * (1 + 1e-12):
        raise ConfigError(f"integration window +-{half_width} exceeds grid [{z[0]}, {z[-1]}]")
    lo, hi = -half_width, half_width
    inside = (z > lo) & (z < hi)
    zz = np.concatenate(([lo], z[inside], [hi]))
    vv = np.concatenate(([np.interp(lo, z, values)], values[inside], [np.interp(hi, z, values)]))
    return float(np.trapezoid(vv, zz))


def remaining_strength(state: FieldState, L0: float, z: np.ndarray) -> float:
    """Light strength I = int |E_s|^2 + |E_d|^2 dz over [-3 L0, 3 L0]."""
    return window_integral(intensity(state), z, 3 * L0)


def _parabolic_peak(z: np.ndarray, y: np.ndarray) -> tuple[float, int]:
    k = int(np.argmax(y))
    if 0 < k < len(y) - 1:
        y0, y1, y2 = y[k - 1], y[k], y[k + 1]
        den = y0 - 2 * y1 + y2
        off = 0.5 * (y0 - y2) / den if den != 0 else 0.0
        return float(z[k] + off * (z[1] - z[0])), k
    return float(z[k]), k


def peak_positions(z: np.ndarray, row: np.ndarray) -> tuple[float, float]:
    """Sub-grid argmax of the intensity on z > 0 and on z < 0 (NaN if the half is dark)."""
    pos = z > 0
    neg = z < 0
    fwd = bwd = math.nan
    if row[pos].max() > 0:
        fwd, k = _parabolic_peak(z[pos], row[pos])
        if k == 0:
            fwd = math.nan  # maximum sits at the centre: no separate forward pulse
    if row[neg].max() > 0:
        zn = z[neg][::-1]
        b, k = _parabolic_peak(-zn, row[neg][::-1])
        bwd = math.nan if k == 0 else -b
    return fwd, bwd


# --- trajectory -------------------------------------------------------------

@dataclass
class Trajectory:
    z: np.ndarray
    times: np.ndarray
    intensity_maps: np.ndarray
    strength_series: np.ndarray
    forward_peak_positions: np.ndarray
    backward_peak_positions: np.ndarray
    config: SimulationConfig
    final_state: Optional[FieldState] = None


def _is_mirror_symmetric(state: FieldState) -> bool:
    m = state.mirrored()
    return (np.array_equal(m.ep_plus, state.ep_plus) and np.array_equal(m.ep_minus, state.ep_minus)
            and np.array_equal(m.atoms, state.atoms))


class _Folded:
    """Half-grid view of a mirror-symmetric state: z >= 0 (or z > 0 for even n_z)."""

    def __init__(self, n_z: int):
        self.n_z = n_z
        self.start = n_z // 2
        self.ghost = 1 if n_z % 2 else 0

    def fold(self, state: FieldState):
        s = self.start
        return state.ep_plus[s:], state.ep_minus[s:], state.atoms[:, s:]

    def unfold_probe(self, ep, em):
        skip = 1 if self.ghost else 0
        full_p = np.concatenate((em[skip:][::-1], ep))
        full_m = np.concatenate((ep[skip:][::-1], em))
        return full_p, full_m

    def unfold_atoms(self, atoms):
        skip = 1 if self.ghost else 0
        left = atoms[::-1, skip:][:, ::-1]
        return np.concatenate((left, atoms), axis=1)


def simulate(config: SimulationConfig, initial: Optional[FieldState] = None,
             exploit_symmetry: bool = True, keep_final: bool = True) -> Trajectory:
    """Integrate from ``initial`` (default: the stored Gaussian spin wave) to total_time.

    Mirror-symmetric initial data are integrated on the half grid z >= 0 with a
    reflecting ghost cell; the recorded fields are identical to a full-grid run.
    """
    g = config.grid
    p = config.params
    g.check_cfl(p.c)
    state = gaussian_initial_state(config) if initial is None else initial
    _check_shapes(state, config)
    z = g.z
    damp = _padded_damp(config)

    folded = exploit_symmetry and _is_mirror_symmetric(state)
    if folded:
        fold = _Folded(g.n_z)
        ep, em, atoms = fold.fold(state)
        ws = Workspace(len(ep), config.K)
        ws.load(ep, em, atoms)
        ghost = fold.ghost
    else:
        ws = Workspace(g.n_z, config.K)
        ws.load(state.ep_plus, state.ep_minus, state.atoms)
        ghost = -1

    def full_probe():
        ep_, em_ = ws.probe()
        return fold.unfold_probe(ep_, em_) if folded else (ep_, em_)

    times, maps, strength, fwd, bwd = [], [], [], [], []

    def record(t):
        ep_, em_ = full_probe()
        row = intensity_from(ep_, em_)
        if not (np.isfinite(row).all()):
            raise IntegrationDiverged(t)
        times.append(t)
        maps.append(row)
        strength.append(window_integral(row, z, 3 * config.L0))
        f, b = peak_positions(z, row)
        fwd.append(f)
        bwd.append(b)

    t0 = state.time
    record(t0)
    done = 0
    n_steps = config.n_steps
    while done < n_steps:
        chunk = min(g.snapshot_stride, n_steps - done)
        _run_kernel(ws, config, chunk, ghost, damp)
        done += chunk
        t = t0 + done * g.dt
        if not (np.isfinite(ws.yr).all() and np.isfinite(ws.yi).all()):
            raise IntegrationDiverged(t)
        record(t)

    final = None
    if keep_final:
        ep_, em_, atoms_ = ws.fields()
        if folded:
            ep_, em_ = fold.unfold_probe(ep_, em_)
            atoms_ = fold.unfold_atoms(atoms_)
        final = FieldState(ep_, em_, atoms_, t0 + n_steps * g.dt)

    return Trajectory(z=z, times=np.array(times), intensity_maps=np.array(maps),
                      strength_series=np.array(strength),
                      forward_peak_positions=np.array(fwd),
                      backward_peak_positions=np.array(bwd),
                      config=config, final_state=final)


# --- group velocity ---------------------------------------------------------

@dataclass(frozen=True)
class GroupVelocityEstimate:
    value: float
    stderr: float
    fit_window: tuple
    n_points: int


def estimate_group_velocity(traj: Trajectory, fit_from: float = 0.5) -> GroupVelocityEstimate:
    """Slope of the forward-pulse peak position over the latter part of the run.

    Raises :class:`NotApplicable` when no moving forward pulse is resolved.
    """
    t = traj.times
    if len(t) < 3:
        raise NotApplicable("too few snapshots")
    t_start = t[0] + fit_from * (t[-1] - t[0])
    sel = t >= t_start
    pos = traj.forward_peak_positions[sel]
    ts = t[sel]
    if len(ts) < 3 or not np.isfinite(pos).all():
        raise NotApplicable("no forward peak resolved over the fit window")
    if not (np.diff(pos) > 0).all():
        raise NotApplicable("forward peak is not moving outwards")
    # a separate pulse has a dip between itself and the centre
    last = traj.intensity_maps[-1]
    centre = np.interp(0.0, traj.z, last)
    if centre > 0.5 * last.max():
        raise NotApplicable("light stays concentrated at the centre")
    coef, cov = np.polyfit(ts, pos, 1, cov=True) if len(ts) > 3 else (np.polyfit(ts, pos, 1), None)
    slope = float(coef[0])
    err = float(math.sqrt(cov[0, 0])) if cov is not None else 0.0
    params = traj.config.params
    return GroupVelocityEstimate(value=vg_to_slow_units(slope, params),
                                 stderr=vg_to_slow_units(err, params),
                                 fit_window=(float(ts[0]), float(ts[-1])), n_points=int(len(ts)))


# --- behaviour classification -----------------------------------------------

class Behavior(Enum):
    STATIONARY = "stationary"
    SPLITTING = "splitting"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class BehaviorClass:
    variant: Behavior
    evidence: float
    threshold: float
    onset_time: Optional[float] = None


def peak_separation(z: np.ndarray, row: np.ndarray, rel_floor: float = 0.1) -> float:
    """Distance between the two largest local maxima above ``rel_floor`` of the peak."""
    top = row.max()
    if not top > 0:
        return 0.0
    inner = row[1:-1]
    is_max = (inner > row[:-2]) & (inner >= row[2:]) & (inner >= rel_floor * top)
    idx = np.nonzero(is_max)[0] + 1
    if len(idx) < 2:
        return 0.0
    best = idx[np.argsort(row[idx])[::-1][:2]]
    return float(abs(z[best[0]] - z[best[1]]))


def separation_series(traj: Trajectory, rel_floor: float = 0.1) -> np.ndarray:
    return np.array([peak_separation(traj.z, row, rel_floor) for row in traj.intensity_maps])


def classify_behavior(traj: Trajectory, threshold: Optional[float] = None,
                      rel_floor: float = 0.1) -> BehaviorClass:
    """Stationary vs splitting, judged by the separation of the two brightest maxima."""
    if threshold is None:
        threshold = 2.0 * traj.config.L0
    sep = separation_series(traj, rel_floor)
    over = np.nonzero(sep > threshold)[0]
    evidence = float(sep[-1]) if len(sep) else 0.0
    if len(over):
        return BehaviorClass(Behavior.SPLITTING, evidence, threshold, float(traj.times[over[0]]))
    if len(traj.strength_series) and traj.strength_series[-1] > 0:
        return BehaviorClass(Behavior.STATIONARY, evidence, threshold)
    return BehaviorClass(Behavior.UNDECIDED, evidence, threshold)


# --- convergence in truncation order ----------------------------------------

@dataclass
class OrderConvergence:
    points: list  # (ell, GroupVelocityEstimate or None)
    plateau: Optional[float]
    converged: bool
    tol: float
    window: int


def config_for_order(base: SimulationConfig, ell: int, resize: bool = True) -> SimulationConfig:
    """Copy of ``base`` at truncation ``ell``; optionally resize the domain for that order."""
    grid = base.grid
    if resize:
        z_max = default_z_max(base.L0, ell, base.total_time, base.params)
        z_max = math.ceil(z_max / grid.dz) * grid.dz
        grid = type(grid).from_spacing(z_max, grid.dz, grid.dt, grid.snapshot_stride)
    return dataclasses.replace(base, ell=ell, grid=grid)


def _vg_for(config: SimulationConfig):
    traj = simulate(config, keep_final=False)
    try:
        return estimate_group_velocity(traj)
    except NotApplicable:
        return None


def plateau_of(values: Sequence[Optional[float]], tol: float = 0.01, window: int = 10):
    """Mean over the trailing ``window`` values if every successive change is below ``tol``."""
    if len(values) < window or window < 2:
        return None
    tail = values[-window:]
    if any(v is None or not math.isfinite(v) for v in tail):
        return None
    if np.all(np.abs(np.diff(tail)) < tol):
        return float(np.mean(tail))
    return None


def converge_in_order(base: SimulationConfig, ell_schedule: Iterable[int], tol: float = 0.01,
                      window: int = 10, resize: bool = True, workers: int = 1,
                      progress: Optional[Callable[[int, Optional[GroupVelocityEstimate]], None]] = None
                      ) -> OrderConvergence:
    """Group velocity as a function of truncation order, with plateau detection."""
    schedule = list(ell_schedule)
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("ell_schedule must be strictly increasing")
    configs = [config_for_order(base, ell, resize) for ell in schedule]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_vg_for, configs))
    else:
        results = []
        for ell, cfg in zip(schedule, configs):
            est = _vg_for(cfg)
            log.info("ell=%d v_g=%s", ell, None if est is None else f"{est.value:.4f}")
            if progress is not None:
                progress(ell, est)
            results.append(est)
    values = [None if r is None else r.value for r in results]
    plateau = plateau_of(values, tol, window)
    return OrderConvergence(points=list(zip(schedule, results)), plateau=plateau,
                            converged=plateau is not None, tol=tol, window=window)
