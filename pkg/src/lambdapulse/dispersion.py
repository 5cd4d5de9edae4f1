"""Frequency-domain analysis: continued fraction, effective decays and k(omega).

Fields vary as exp(i (k z - omega t)). Eliminating the coherence chain above
P_{+-1} leaves the continued fraction

    R = Omega^2 / (gamma_2 - i w + Omega^2 / (Gamma + gamma_3 - i w + ... Omega^2 / (gamma_{2 ell} - i w)))

and the sum/difference probe modes then satisfy

    c^2 k^2 = -(g2N / Gamma_s - i w) (g2N / Gamma_d - i w).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
from scipy.linalg import solve_banded

from .core import DEFAULT_PARAMS, DecayModel, PhysicalParams, decay_rate, max_order

DEFAULT_DEPTH = 1000


class PoleError(ZeroDivisionError):
    def __init__(self, message: str, level: Optional[int] = None):
        super().__init__(message)
        self.level = level


class SingularSystem(np.linalg.LinAlgError):
    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition


def _level_denominator(m: int, omega, params: PhysicalParams, decay: DecayModel):
    base = decay_rate(decay, m, params) - 1j * omega
    return base + params.Gamma if m % 2 else base


def continued_fraction_R(omega, params: PhysicalParams = DEFAULT_PARAMS, decay: DecayModel = None,
                         ell: int = DEFAULT_DEPTH, closure: str = "spin"):
    """Evaluate R bottom-up from the deepest kept order down to order 2.

    ``omega`` may be a scalar or an array. The ``spin`` closure ends on the
    gamma_{2 ell} - i omega level, ``optical`` adds the Gamma + gamma_{2 ell + 1} level.
    """
    if decay is None:
        from .core import ZeroDecay
        decay = ZeroDecay()
    K = max_order(ell, closure)
    w = np.asarray(omega, dtype=float)
    om2 = params.Omega_c**2
    x = np.zeros(w.shape, complex)
    for m in range(K, 1, -1):
        den = _level_denominator(m, w, params, decay) + x
        if np.any(den == 0):
            raise PoleError(f"continued fraction denominator vanishes at order {m}", level=m)
        x = om2 / den
    return complex(x) if x.ndim == 0 else x


@dataclass(frozen=True)
class EffectiveDecays:
    gamma_s: complex
    gamma_d: complex
    r_value: complex
    ell_used: int
    r_change: float  # |R(ell) - R(ell - 1)| / |R(ell)|, a convergence meter


def effective_decays(omega: float, params: PhysicalParams = DEFAULT_PARAMS, decay: DecayModel = None,
                     ell: int = DEFAULT_DEPTH, closure: str = "spin") -> EffectiveDecays:
    """Gamma_s = Gamma + gamma_1 - i w + 2 i Omega^2 / w + R and Gamma_d = Gamma + gamma_1 - i w + R."""
    if omega == 0:
        raise PoleError("Gamma_s has a pole at omega = 0")
    if decay is None:
        from .core import ZeroDecay
        decay = ZeroDecay()
    r = continued_fraction_R(omega, params, decay, ell, closure)
    r_prev = continued_fraction_R(omega, params, decay, ell - 1, closure) if ell >= 1 else r
    change = abs(r - r_prev) / abs(r) if r != 0 else abs(r - r_prev)
    base = params.Gamma + decay_rate(decay, 1, params) - 1j * omega + r
    return EffectiveDecays(gamma_s=base + 2j * params.Omega_c**2 / omega, gamma_d=base,
                           r_value=r, ell_used=ell, r_change=float(change))


@dataclass(frozen=True)
class DispersionPoint:
    omega: float
    k_plus: complex
    k_minus: complex
    error: Optional[str] = None


def _k_from_decays(omega: float, eff: EffectiveDecays, params: PhysicalParams) -> complex:
    g2n = params.g2N
    prod = (g2n / eff.gamma_s - 1j * omega) * (g2n / eff.gamma_d - 1j * omega)
    k = 1j / params.c * np.sqrt(complex(prod))
    return -k if k.imag < 0 else k


def dispersion_k(omega: float, params: PhysicalParams = DEFAULT_PARAMS, decay: DecayModel = None,
                 ell: int = DEFAULT_DEPTH, closure: str = "spin") -> DispersionPoint:
    """Both momentum branches at real frequency omega; k_plus has Im k >= 0."""
    if omega == 0:
        return DispersionPoint(0.0, 0j, 0j)
    eff = effective_decays(omega, params, decay, ell, closure)
    k = _k_from_decays(omega, eff, params)
    return DispersionPoint(float(omega), k, -k)


def scan_dispersion(omegas: Iterable[float], params: PhysicalParams = DEFAULT_PARAMS,
                    decay: DecayModel = None, ell: int = DEFAULT_DEPTH,
                    closure: str = "spin") -> list:
    """Dispersion over a sorted frequency list with the branch kept continuous.

    The first point follows the Im k >= 0 convention; each later k_plus is the
    root closest to its predecessor. Points that fail are recorded with NaN and
    an error message and do not break the continuity chain.
    """
    omegas = list(omegas)
    if any(b < a for a, b in zip(omegas, omegas[1:])):
        raise ValueError("omegas must be sorted")
    out = []
    prev = None
    for w in omegas:
        try:
            pt = dispersion_k(w, params, decay, ell, closure)
        except (PoleError, ZeroDivisionError, FloatingPointError) as exc:
            nan = complex(math.nan, math.nan)
            out.append(DispersionPoint(float(w), nan, nan, error=str(exc)))
            continue
        if prev is not None and abs(pt.k_minus - prev) < abs(pt.k_plus - prev):
            pt = DispersionPoint(pt.omega, pt.k_minus, pt.k_plus)
        prev = pt.k_plus
        out.append(pt)
    return out


# --- independent oracle -----------------------------------------------------

def _atomic_system(omega: float, params: PhysicalParams, decay: DecayModel, K: int):
    """Tridiagonal matrix (banded storage) of the frequency-domain chain, orders -K..K."""
    n = 2 * K + 1
    ab = np.zeros((3, n), complex)
    for i, m in enumerate(range(-K, K + 1)):
        ab[1, i] = _level_denominator(m, omega, params, decay)
        if i + 1 < n:
            ab[0, i + 1] = -1j * params.Omega_c  # super-diagonal
            ab[2, i] = -1j * params.Omega_c  # sub-diagonal
    return ab


def _dense(ab: np.ndarray) -> np.ndarray:
    n = ab.shape[1]
    A = np.diag(ab[1])
    A += np.diag(ab[0, 1:], 1)
    A += np.diag(ab[2, :-1], -1)
    return A


@dataclass(frozen=True)
class OracleResult:
    k_plus: complex
    k_minus: complex
    eigvecs: np.ndarray  # columns: (E+, E-) for k_plus, k_minus
    condition: float


def truncated_matrix_oracle(omega: float, params: PhysicalParams = DEFAULT_PARAMS,
                            decay: DecayModel = None, ell: int = 50,
                            closure: str = "spin") -> OracleResult:
    """k(omega) from direct elimination of the truncated frequency-domain system.

    Solves the chain for unit E+ and unit E- drives, reads off the P_{+-1}
    response matrix, and returns the eigenvalues of the resulting 2x2 problem
    k (E+, E-) = diag(1, -1) (omega + g sqrt(N) M) (E+, E-) / c.
    """
    if omega == 0:
        raise PoleError("oracle needs omega != 0")
    if decay is None:
        from .core import ZeroDecay
        decay = ZeroDecay()
    K = max_order(ell, closure)
    if K < 1:
        raise ValueError("truncation keeps no optical coherence")
    ab = _atomic_system(omega, params, decay, K)
    # dense condition number only for moderate sizes
    cond = float(np.linalg.cond(_dense(ab))) if K <= 400 else math.nan
    if cond == math.inf or cond > 1e14:
        raise SingularSystem(f"chain matrix is singular (cond ~ {cond:.3g})", cond)
    rhs = np.zeros((2 * K + 1, 2), complex)
    rhs[K + 1, 0] = 1j * params.g_sqrt_n  # E+ drives P_1
    rhs[K - 1, 1] = 1j * params.g_sqrt_n  # E- drives P_-1
    x = solve_banded((1, 1), ab, rhs)
    resp = np.array([[x[K + 1, 0], x[K + 1, 1]], [x[K - 1, 0], x[K - 1, 1]]])
    kmat = np.diag([1.0, -1.0]) @ (omega * np.eye(2) + params.g_sqrt_n * resp) / params.c
    vals, vecs = np.linalg.eig(kmat)
    order = np.argsort(-vals.imag)
    vals = vals[order]
    vecs = vecs[:, order]
    return OracleResult(complex(vals[0]), complex(vals[1]), vecs, cond)


def plug_back_residual(omega: float, k: complex, probe: np.ndarray, params: PhysicalParams = DEFAULT_PARAMS,
                       decay: DecayModel = None, ell: int = 50, closure: str = "spin") -> float:
    """Largest relative residual of the full frequency-domain system at (omega, k).

    The chain is solved for the given probe amplitudes, then every atomic and
    both propagation equations are evaluated.
    """
    if decay is None:
        from .core import ZeroDecay
        decay = ZeroDecay()
    K = max_order(ell, closure)
    ab = _atomic_system(omega, params, decay, K)
    ep, em = complex(probe[0]), complex(probe[1])
    b = np.zeros(2 * K + 1, complex)
    b[K + 1] = 1j * params.g_sqrt_n * ep
    b[K - 1] = 1j * params.g_sqrt_n * em
    x = solve_banded((1, 1), ab, b)
    A = _dense(ab)
    atomic = np.abs(A @ x - b).max() / max(np.abs(b).max(), 1e-300)
    c = params.c
    g = params.g_sqrt_n
    scale = max(abs(omega * ep), abs(c * k * ep), abs(g * x[K + 1]), 1e-300)
    fwd = abs(-1j * omega * ep + 1j * c * k * ep - 1j * g * x[K + 1]) / scale
    bwd = abs(-1j * omega * em - 1j * c * k * em - 1j * g * x[K - 1]) / scale
    return float(max(atomic, fwd, bwd))
