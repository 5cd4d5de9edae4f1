"""Compiled time stepper for the truncated hierarchy.

Layout: the coherence chain is stored as flat real/imag arrays of (M + 2) rows by
``nz`` columns, row ``r`` holding order ``m = r - K - 1``. Rows 0 and M + 1 are
zero padding, so every chain member sees two neighbours. Flat storage plus
contiguous 1-D views keeps the inner loops vectorizable.

One step:
  * probe envelopes: Lax-Friedrichs for (d_t +- c d_z) E = i g sqrt(N) P_{+-1},
    source taken at the old time level;
  * chain: explicit midpoint rule per grid point, with the probe at the old
    level in the first stage and the average of old and new in the second.

The midpoint stages are fused into one sweep down the chain per block of grid
points (a 3-row rolling buffer holds the half-step values).
"""

import numba
import numpy as np

_FM = {"contract"}
BLOCK = 256


@numba.njit(fastmath=_FM, cache=True)
def _advect(epr, epi, emr, emi, yr, yi, nepr, nepi, nemr, nemi,
            nz, iplus, iminus, couple, gd, nu, ghost):
    a = 0.5 * (1.0 + nu)
    b = 0.5 * (1.0 - nu)
    if ghost >= 0:
        # folded grid: E+ left of the mirror point is E- reflected, and vice versa
        lpr = emr[ghost]
        lpi = emi[ghost]
        lmr = epr[ghost]
        lmi = epi[ghost]
    else:
        lpr = 0.0
        lpi = 0.0
        lmr = emr[0]
        lmi = emi[0]
    rpr = epr[nz - 1]
    rpi = epi[nz - 1]
    for j in range(nz):
        if j == 0:
            pl_r = lpr
            pl_i = lpi
            ml_r = lmr
            ml_i = lmi
        else:
            pl_r = epr[j - 1]
            pl_i = epi[j - 1]
            ml_r = emr[j - 1]
            ml_i = emi[j - 1]
        if j == nz - 1:
            pr_r = rpr
            pr_i = rpi
            mr_r = 0.0
            mr_i = 0.0
        else:
            pr_r = epr[j + 1]
            pr_i = epi[j + 1]
            mr_r = emr[j + 1]
            mr_i = emi[j + 1]
        nepr[j] = a * pl_r + b * pr_r
        nepi[j] = a * pl_i + b * pr_i
        nemr[j] = b * ml_r + a * mr_r
        nemi[j] = b * ml_i + a * mr_i
    if couple:
        op = iplus * nz
        om = iminus * nz
        for j in range(nz):
            nepr[j] -= gd * yi[op + j]
            nepi[j] += gd * yr[op + j]
            nemr[j] -= gd * yi[om + j]
            nemi[j] += gd * yr[om + j]


@numba.njit(fastmath=_FM, cache=True)
def _half_row(hr_, hi_, ar, ai, lr, li, rr, ri, dm, omega, h, n):
    for q in range(n):
        hr_[q] = ar[q] + h * (-dm * ar[q] - omega * (li[q] + ri[q]))
        hi_[q] = ai[q] + h * (-dm * ai[q] + omega * (lr[q] + rr[q]))


@numba.njit(fastmath=_FM, cache=True)
def _full_row(ar, ai, cr, ci, lr, li, rr, ri, dm, omega, dt, n):
    for q in range(n):
        ar[q] += dt * (-dm * cr[q] - omega * (li[q] + ri[q]))
        ai[q] += dt * (-dm * ci[q] + omega * (lr[q] + rr[q]))


@numba.njit(fastmath=_FM, cache=True)
def _add_source(ar, ai, er, ei, fr, fi, w, n):
    # a += i * w * (e + f)
    for q in range(n):
        ar[q] -= w * (ei[q] + fi[q])
        ai[q] += w * (er[q] + fr[q])


@numba.njit(fastmath=_FM, cache=True)
def _zero(x, n):
    for q in range(n):
        x[q] = 0.0


@numba.njit(fastmath=_FM, cache=True)
def advance(epr, epi, emr, emi, yr, yi, damp, omega, gsn, nu, dt, nsteps, nz, K, ghost,
            nepr, nepi, nemr, nemi, hr, hi):
    """Advance ``nsteps`` steps in place. ``ghost`` < 0 means an unfolded grid."""
    M = 2 * K + 1
    iplus = K + 2
    iminus = K
    couple = M >= 3
    h = 0.5 * dt
    gd = gsn * dt
    B = BLOCK
    for _ in range(nsteps):
        _advect(epr, epi, emr, emi, yr, yi, nepr, nepi, nemr, nemi,
                nz, iplus, iminus, couple, gd, nu, ghost)
        for j0 in range(0, nz, B):
            n = min(B, nz - j0)
            # rolling buffer slot for chain row r is r % 3
            _zero(hr[0:n], n)
            _zero(hi[0:n], n)
            for r in range(1, M + 2):
                s = (r % 3) * B
                if r <= M:
                    o = r * nz + j0
                    ol = o - nz
                    orr = o + nz
                    _half_row(hr[s:s + n], hi[s:s + n], yr[o:o + n], yi[o:o + n],
                              yr[ol:ol + n], yi[ol:ol + n], yr[orr:orr + n], yi[orr:orr + n],
                              damp[r], omega, h, n)
                    if couple and r == iplus:
                        _add_source(hr[s:s + n], hi[s:s + n], epr[j0:j0 + n], epi[j0:j0 + n],
                                    epr[j0:j0 + n], epi[j0:j0 + n], 0.5 * h * gsn, n)
                    if couple and r == iminus:
                        _add_source(hr[s:s + n], hi[s:s + n], emr[j0:j0 + n], emi[j0:j0 + n],
                                    emr[j0:j0 + n], emi[j0:j0 + n], 0.5 * h * gsn, n)
                else:
                    _zero(hr[s:s + n], n)
                    _zero(hi[s:s + n], n)
                if r >= 2:
                    u = r - 1
                    o = u * nz + j0
                    sc = (u % 3) * B
                    sl = ((u - 1) % 3) * B
                    _full_row(yr[o:o + n], yi[o:o + n], hr[sc:sc + n], hi[sc:sc + n],
                              hr[sl:sl + n], hi[sl:sl + n], hr[s:s + n], hi[s:s + n],
                              damp[u], omega, dt, n)
                    if couple and u == iplus:
                        _add_source(yr[o:o + n], yi[o:o + n], epr[j0:j0 + n], epi[j0:j0 + n],
                                    nepr[j0:j0 + n], nepi[j0:j0 + n], h * gsn, n)
                    if couple and u == iminus:
                        _add_source(yr[o:o + n], yi[o:o + n], emr[j0:j0 + n], emi[j0:j0 + n],
                                    nemr[j0:j0 + n], nemi[j0:j0 + n], h * gsn, n)
        epr[:] = nepr
        epi[:] = nepi
        emr[:] = nemr
        emi[:] = nemi


class Workspace:
    """Flat buffers for one grid/truncation, reused across calls to ``advance``."""

    def __init__(self, nz: int, K: int):
        M = 2 * K + 1
        self.nz = nz
        self.K = K
        self.yr = np.zeros((M + 2) * nz)
        self.yi = np.zeros((M + 2) * nz)
        self.e = [np.zeros(nz) for _ in range(4)]
        self.ne = [np.zeros(nz) for _ in range(4)]
        self.hr = np.zeros(3 * BLOCK)
        self.hi = np.zeros(3 * BLOCK)

    def load(self, ep_plus, ep_minus, atoms):
        M = 2 * self.K + 1
        nz = self.nz
        self.yr[nz:(M + 1) * nz] = atoms.real.ravel()
        self.yi[nz:(M + 1) * nz] = atoms.imag.ravel()
        self.e[0][:] = ep_plus.real
        self.e[1][:] = ep_plus.imag
        self.e[2][:] = ep_minus.real
        self.e[3][:] = ep_minus.imag

    def fields(self):
        M = 2 * self.K + 1
        nz = self.nz
        atoms = (self.yr[nz:(M + 1) * nz] + 1j * self.yi[nz:(M + 1) * nz]).reshape(M, nz)
        ep = self.e[0] + 1j * self.e[1]
        em = self.e[2] + 1j * self.e[3]
        return ep, em, atoms

    def probe(self):
        return self.e[0] + 1j * self.e[1], self.e[2] + 1j * self.e[3]

    def run(self, damp_padded, omega, gsn, nu, dt, nsteps, ghost):
        advance(self.e[0], self.e[1], self.e[2], self.e[3], self.yr, self.yi, damp_padded,
                omega, gsn, nu, dt, nsteps, self.nz, self.K, ghost,
                self.ne[0], self.ne[1], self.ne[2], self.ne[3], self.hr, self.hi)
