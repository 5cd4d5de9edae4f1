"""Units, parameters, decay models, grids and initial states.

Simulation units: time in 1/Gamma, length in absorption lengths l_abs.
With Gamma = 1 and l_abs = 1 the vacuum speed of light equals g2N numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

# Relative slack when checking c*dt/dz <= 1, so that dt = dz/c passes despite rounding.
CFL_SLACK = 1e-12


class ConfigError(ValueError):
    """Invalid physical parameters, grid or configuration."""


@dataclass(frozen=True)
class PhysicalParams:
    """Optical decay, control Rabi frequency and collective coupling.

    ``Gamma`` sets the time unit and ``l_abs`` the length unit. The speed of
    light follows from ``l_abs = Gamma * c / g2N``.
    """

    Gamma: float = 1.0
    Omega_c: float = 0.69
    g2N: float = 138.0
    l_abs: float = 1.0

    def __post_init__(self):
        for name in ("Gamma", "Omega_c", "g2N", "l_abs"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be positive and finite, got {value!r}")

    @property
    def c(self) -> float:
        return self.g2N * self.l_abs / self.Gamma

    @property
    def g_sqrt_n(self) -> float:
        return math.sqrt(self.g2N)

    @property
    def vg_unit(self) -> float:
        """The slow-light velocity unit c * Omega_c**2 / g2N, in l_abs * Gamma."""
        return self.c * self.Omega_c**2 / self.g2N


DEFAULT_PARAMS = PhysicalParams()


# --- decay models -----------------------------------------------------------

@dataclass(frozen=True)
class ZeroDecay:
    """gamma_n = 0 for every order (atoms pinned, e.g. in a deep lattice)."""

    def rate(self, n: int, params: PhysicalParams) -> float:
        return 0.0


@dataclass(frozen=True)
class ColdLinear:
    """gamma_n = |n| a Gamma."""

    a: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a >= 0):
            raise ConfigError(f"decay constant a must be >= 0, got {self.a!r}")

    def rate(self, n: int, params: PhysicalParams) -> float:
        return abs(n) * self.a * params.Gamma


@dataclass(frozen=True)
class LaserCooledEstimate:
    """Thermal-motion estimate |n| |k_c v_s / (2 pi)| for laser-cooled gases.

    An order-of-magnitude rule; ``k_c`` and ``v_s`` are given in simulation units.
    """

    k_c: float
    v_s: float

    def rate(self, n: int, params: PhysicalParams) -> float:
        return abs(n) * abs(self.k_c * self.v_s / (2 * math.pi))


@dataclass(frozen=True)
class BECEstimate:
    """Recoil escape estimate |n| k_c (hbar/m) / L for a condensate of length L."""

    k_c: float
    hbar_over_m: float
    L: float

    def __post_init__(self):
        if self.L <= 0:
            raise ConfigError("BEC ensemble length L must be positive")

    def rate(self, n: int, params: PhysicalParams) -> float:
        return abs(n) * abs(self.k_c) * abs(self.hbar_over_m) / self.L


@dataclass(frozen=True)
class CustomTable:
    """Explicit rates indexed by |n|; entry 0 must be zero."""

    rates: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if not self.rates or self.rates[0] != 0.0:
            raise ConfigError("CustomTable needs rates[0] == 0")
        if any(not math.isfinite(r) or r < 0 for r in self.rates):
            raise ConfigError("CustomTable rates must be finite and >= 0")

    def rate(self, n: int, params: PhysicalParams) -> float:
        k = abs(n)
        if k >= len(self.rates):
            raise IndexError(f"CustomTable has no rate for order {n} (table covers |n| < {len(self.rates)})")
        return self.rates[k]


DecayModel = Union[ZeroDecay, ColdLinear, LaserCooledEstimate, BECEstimate, CustomTable]


def decay_rate(model: DecayModel, n: int, params: PhysicalParams = DEFAULT_PARAMS) -> float:
    """Decay rate gamma_n of the n-th order coherence, in units of Gamma."""
    if n == 0:
        return 0.0
    return model.rate(n, params)


# --- truncation -------------------------------------------------------------

CLOSURES = ("spin", "optical")


def max_order(ell: int, closure: str = "spin") -> int:
    """Highest coherence order kept at truncation ``ell``.

    ``spin`` keeps S_{2n} for |n| <= ell and P_{2n+1} for |2n+1| < 2 ell, so the chain
    ends on a spin coherence. ``optical`` also keeps P_{+-(2 ell + 1)}.
    """
    if ell < 0:
        raise ConfigError("truncation order ell must be >= 0")
    if closure == "spin":
        return 2 * ell
    if closure == "optical":
        return 2 * ell + 1
    raise ConfigError(f"unknown closure {closure!r}; expected one of {CLOSURES}")


def chain_decays(model: DecayModel, K: int, params: PhysicalParams) -> np.ndarray:
    """Local damping of each chain member, orders -K..K (Gamma added on odd orders)."""
    out = np.empty(2 * K + 1)
    for i, m in enumerate(range(-K, K + 1)):
        out[i] = decay_rate(model, m, params) + (params.Gamma if m % 2 else 0.0)
    return out


# --- grid and configuration -------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Symmetric 1-D grid on [-z_max, z_max] with a fixed time step."""

    z_max: float
    n_z: int
    dt: float
    snapshot_stride: int = 1

    def __post_init__(self):
        if not (self.z_max > 0 and math.isfinite(self.z_max)):
            raise ConfigError("z_max must be positive")
        if self.n_z < 3:
            raise ConfigError("need at least 3 grid points")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError("dt must be positive")
        if self.snapshot_stride < 1:
            raise ConfigError("snapshot_stride must be >= 1")

    @classmethod
    def from_spacing(cls, z_max: float, dz: float, dt: float, snapshot_stride: int = 1) -> "Grid":
        cells = int(round(2 * z_max / dz))
        return cls(z_max=z_max, n_z=cells + 1, dt=dt, snapshot_stride=snapshot_stride)

    @staticmethod
    def snapped_dz(z_max: float, dz: float) -> float:
        """Spacing actually used by ``from_spacing`` once dz is fitted to the domain."""
        return 2 * z_max / max(1, int(round(2 * z_max / dz)))

    @property
    def z_min(self) -> float:
        return -self.z_max

    @property
    def dz(self) -> float:
        return (self.z_max - self.z_min) / (self.n_z - 1)

    @property
    def z(self) -> np.ndarray:
        # centered integer offsets keep z[j] == -z[n_z - 1 - j] bit for bit
        return (np.arange(self.n_z) - (self.n_z - 1) / 2) * self.dz

    def courant(self, c: float) -> float:
        return c * self.dt / self.dz

    def check_cfl(self, c: float) -> None:
        nu = self.courant(c)
        if nu > 1 + CFL_SLACK:
            raise ConfigError(f"CFL violated: c*dt/dz = {nu:.6g} > 1")


@dataclass(frozen=True)
class SimulationConfig:
    params: PhysicalParams
    decay: DecayModel
    L0: float
    ell: int
    grid: Grid
    total_time: float
    closure: str = "spin"

    def __post_init__(self):
        if not (self.L0 > 0 and math.isfinite(self.L0)):
            raise ConfigError("L0 must be positive")
        if self.ell < 0 or int(self.ell) != self.ell:
            raise ConfigError("ell must be a non-negative integer")
        max_order(self.ell, self.closure)
        if self.total_time < 0:
            raise ConfigError("total_time must be >= 0")
        if self.grid.z_max < 3 * self.L0 * (1 - 1e-12):
            raise ConfigError(f"z_max = {self.grid.z_max} must be >= 3 L0 = {3 * self.L0}")
        self.grid.check_cfl(self.params.c)

    @property
    def K(self) -> int:
        return max_order(self.ell, self.closure)

    @property
    def n_steps(self) -> int:
        return int(round(self.total_time / self.grid.dt))

    @property
    def n_fields(self) -> int:
        return 2 * self.K + 3


def default_z_max(L0: float, ell: int, total_time: float, params: PhysicalParams = DEFAULT_PARAMS,
                  margin: float = 5.0) -> float:
    """Half-width large enough that the leading edge of the light stays clear of the boundary.

    The medium is cut off at +-z_max, so light reaching the edge loses the atoms
    that would have slowed it and the tracked peak is dragged back. The leading
    edge runs ahead of the peak; 1.25 * max(c0(ell), 1.05) slow-light units bounds it
    for every ell at zero decay.
    """
    from .analytic import c0_exact

    units = 1.05
    if ell >= 1:
        units = max(units, c0_exact(ell, params) / params.vg_unit)
    c_est = 1.25 * units * params.vg_unit
    return max(3 * L0, L0 + c_est * total_time + margin * params.l_abs)


def make_config(L0: float = 5.0, ell: int = 30, decay: DecayModel | None = None,
                params: PhysicalParams = DEFAULT_PARAMS, total_time: float = 100.0,
                dz: float = 0.05, cfl: float = 0.5, z_max: float | None = None,
                snapshot_dt: float = 1.0, closure: str = "spin") -> SimulationConfig:
    """Build a configuration with the standard sizing defaults."""
    if decay is None:
        decay = ZeroDecay()
    if not (0 < cfl):
        raise ConfigError("cfl must be positive")
    if z_max is None:
        z_max = default_z_max(L0, ell, total_time, params)
        z_max = math.ceil(z_max / dz) * dz
    # the Courant number refers to the fitted spacing, which can be finer than dz
    dt = cfl * Grid.snapped_dz(z_max, dz) / params.c
    stride = max(1, int(round(snapshot_dt / dt)))
    grid = Grid.from_spacing(z_max, dz, dt, stride)
    return SimulationConfig(params=params, decay=decay, L0=L0, ell=ell, grid=grid,
                            total_time=total_time, closure=closure)


# --- field state ------------------------------------------------------------

@dataclass(frozen=True)
class FieldState:
    """Probe envelopes and the truncated coherence chain on the grid.

    ``atoms`` has one row per coherence order m = -K..K; even rows are spin
    coherences S_m, odd rows optical coherences P_m.
    """

    ep_plus: np.ndarray
    ep_minus: np.ndarray
    atoms: np.ndarray
    time: float = 0.0

    @property
    def K(self) -> int:
        return (self.atoms.shape[0] - 1) // 2

    @property
    def n_fields(self) -> int:
        return self.atoms.shape[0] + 2

    def order(self, m: int) -> np.ndarray:
        """Row for coherence order m (S_m if m even, P_m if m odd)."""
        if abs(m) > self.K:
            raise IndexError(f"order {m} outside truncation K={self.K}")
        return self.atoms[m + self.K]

    @property
    def s(self) -> np.ndarray:
        """Spin coherences S_{2n}, ascending order."""
        start = self.K % 2
        return self.atoms[start::2]

    @property
    def p(self) -> np.ndarray:
        """Optical coherences P_{2n+1}, ascending order."""
        start = 1 - self.K % 2
        return self.atoms[start::2]

    def copy(self) -> "FieldState":
        return FieldState(self.ep_plus.copy(), self.ep_minus.copy(), self.atoms.copy(), self.time)

    def scaled(self, alpha: complex) -> "FieldState":
        return FieldState(alpha * self.ep_plus, alpha * self.ep_minus, alpha * self.atoms, self.time)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.ep_plus).all() and np.isfinite(self.ep_minus).all()
                    and np.isfinite(self.atoms).all())

    def mirrored(self) -> "FieldState":
        """Reflect z -> -z and swap +-orders (maps a solution onto a solution)."""
        return FieldState(self.ep_minus[::-1].copy(), self.ep_plus[::-1].copy(),
                          self.atoms[::-1, ::-1].copy(), self.time)


def zero_state(config: SimulationConfig) -> FieldState:
    n = config.grid.n_z
    return FieldState(np.zeros(n, complex), np.zeros(n, complex),
                      np.zeros((2 * config.K + 1, n), complex), 0.0)


def gaussian_initial_state(config: SimulationConfig, amplitude: complex = 1.0) -> FieldState:
    """Stored spin wave S_0 = amplitude * exp(-(z/L0)^2); every other field zero."""
    state = zero_state(config)
    z = config.grid.z
    state.atoms[config.K] = amplitude * np.exp(-(z / config.L0) ** 2)
    return state


def vg_to_slow_units(v: float, params: PhysicalParams = DEFAULT_PARAMS) -> float:
    """Convert a velocity in l_abs * Gamma to units of c Omega_c^2 / g2N."""
    return v / params.vg_unit
