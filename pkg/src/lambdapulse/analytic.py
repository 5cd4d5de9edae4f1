"""Adiabatic-elimination results for the zero-decay limit.

With the optical coherences slaved to the spin wave, the truncated chain closes
into propagation equations for the sum (s) and difference (d) probe modes, and the
stored wave splits into two copies moving at +-c0(ell).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import DEFAULT_PARAMS, PhysicalParams


def _check_order(ell: int) -> None:
    if ell < 1 or int(ell) != ell:
        raise ValueError(f"analytic solution needs integer ell >= 1, got {ell!r}")


def c0_exact(ell: int, params: PhysicalParams = DEFAULT_PARAMS) -> float:
    """Splitting velocity c / sqrt((1 + ell g2N / ((2 ell + 1) Omega^2)) (1 + ell g2N / Omega^2))."""
    _check_order(ell)
    x = params.g2N / params.Omega_c**2
    return params.c / math.sqrt((1 + ell * x / (2 * ell + 1)) * (1 + ell * x))


def c0_slowlight(ell: int, params: PhysicalParams = DEFAULT_PARAMS) -> float:
    """Slow-light limit c sqrt(2 ell + 1) Omega^2 / (ell g2N)."""
    _check_order(ell)
    return params.c * math.sqrt(2 * ell + 1) * params.Omega_c**2 / (ell * params.g2N)


@dataclass(frozen=True)
class AnalyticVelocity:
    ell: int
    c0_exact: float
    c0_slowlight: float
    c0_exact_slow: float
    c0_slowlight_slow: float


def analytic_velocity(ell: int, params: PhysicalParams = DEFAULT_PARAMS) -> AnalyticVelocity:
    ce = c0_exact(ell, params)
    cs = c0_slowlight(ell, params)
    return AnalyticVelocity(ell, ce, cs, ce / params.vg_unit, cs / params.vg_unit)


def velocity_table(ell_max: int, params: PhysicalParams = DEFAULT_PARAMS) -> list:
    return [analytic_velocity(ell, params) for ell in range(1, ell_max + 1)]


def traveling_wave(S0: Callable[[np.ndarray], np.ndarray], z: np.ndarray, t: float, ell: int,
                   params: PhysicalParams = DEFAULT_PARAMS, prefactor: Optional[float] = None):
    """Sum and difference probe modes of the split pulse at time t.

    E_s = -(Omega/g) [S0(z - c0 t) + S0(z + c0 t)] and
    E_d = -A (Omega/g) [S0(z - c0 t) - S0(z + c0 t)].

    ``g`` is the collective coupling sqrt(g2N), matching how S is normalised.
    The E_d amplitude ``A`` defaults to :func:`difference_prefactor`.
    """
    _check_order(ell)
    c0 = c0_exact(ell, params)
    if prefactor is None:
        prefactor = difference_prefactor(ell, params)
    scale = params.Omega_c / params.g_sqrt_n
    fwd = S0(z - c0 * t)
    bwd = S0(z + c0 * t)
    e_s = -scale * (fwd + bwd)
    e_d = -prefactor * scale * (fwd - bwd)
    return e_s, e_d


def difference_prefactor(ell: int, params: PhysicalParams = DEFAULT_PARAMS) -> float:
    """E_d / E_s amplitude ratio of a rigidly moving copy, rho0 / c0.

    The adiabatic closure gives A_s dE_s/dt + c dE_d/dz = 0 and
    A_d dE_d/dt + c dE_s/dz = 0 with A_s = 1 + ell g2N / ((2 ell + 1) Omega^2),
    A_d = 1 + ell g2N / Omega^2. A copy moving at +c0 needs
    E_d = (c / (A_d c0)) E_s, i.e. rho0 = c / A_d.
    """
    _check_order(ell)
    x = params.g2N / params.Omega_c**2
    rho0 = params.c / (1 + ell * x)
    return rho0 / c0_exact(ell, params)


@dataclass(frozen=True)
class ModeChain:
    """Coefficients of P_{s,2n+1} and P_{d,2n+1} in terms of (P_{.,1}, (i g / Omega^2) dE/dt).

    Row n holds (coefficient of P_1, coefficient of the derivative term).
    ``closure_s`` and ``closure_d`` are the cutoff values of P_{s,1}, P_{d,1}
    in units of (i g / Omega^2) dE/dt.
    """

    ell: int
    s_rows: np.ndarray
    d_rows: np.ndarray
    closure_s: float
    closure_d: float


def adiabatic_mode_chain(ell: int) -> ModeChain:
    """Mode recursion of the adiabatically eliminated chain and its cutoff at order ell.

    With the optical derivatives dropped, Omega^2 (P_{2n-1} + 2 P_{2n+1} + P_{2n+3})
    = i g dE_{2n+1}/dt. Only n = 0 carries a probe, so for n >= 1 the s and d
    combinations obey second-order recursions solved by
    P_{s,2n+1} = (-1)^n ((2n+1) P_{s,1} - n D_s) and
    P_{d,2n+1} = (-1)^n (P_{d,1} - n D_d), D = (i g / Omega^2) dE/dt.
    Setting P_{.,2 ell + 1} = 0 fixes P_{s,1} = ell/(2 ell + 1) D_s and P_{d,1} = ell D_d.
    """
    _check_order(ell)
    n = np.arange(ell + 1)
    sign = (-1.0) ** n
    s_rows = np.stack((sign * (2 * n + 1), -sign * n), axis=1)
    d_rows = np.stack((sign * 1.0, -sign * n), axis=1)
    return ModeChain(ell, s_rows, d_rows, ell / (2 * ell + 1), float(ell))
