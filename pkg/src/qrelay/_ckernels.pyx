# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; contract identical to _kernels_py."""

from libc.math cimport sqrt

BACKEND = "compiled"

cdef int _MAX_N = 16

cdef double[17] _SQRT_FACT
cdef double[17][17] _BINOM

cdef void _init_tables():
    cdef int n, k
    cdef double f = 1.0
    _SQRT_FACT[0] = 1.0
    for n in range(1, _MAX_N + 1):
        f *= n
        _SQRT_FACT[n] = sqrt(f)
    for n in range(_MAX_N + 1):
        _BINOM[n][0] = 1.0
        for k in range(1, n + 1):
            if k == n:
                _BINOM[n][k] = 1.0
            else:
                _BINOM[n][k] = _BINOM[n - 1][k - 1] + _BINOM[n - 1][k]

_init_tables()


def two_mode_transform(dict terms, int ia, int ib,
                       double complex u00, double complex u01,
                       double complex u10, double complex u11,
                       double prune=1e-15):
    cdef dict out = {}
    cdef bytes occ
    cdef double complex amp, base, ca, cb, coeff, cur
    cdef int na, nb, j, k, p, q
    cdef double complex pow00[17]
    cdef double complex pow01[17]
    cdef double complex pow10[17]
    cdef double complex pow11[17]
    cdef bytearray occ_b
    cdef object key

    for occ, amp in terms.items():
        na = occ[ia]
        nb = occ[ib]
        if na == 0 and nb == 0:
            cur = out.get(occ, 0.0)
            out[occ] = cur + amp
            continue
        base = amp / (_SQRT_FACT[na] * _SQRT_FACT[nb])
        pow00[0] = 1.0
        pow01[0] = 1.0
        for j in range(na):
            pow00[j + 1] = pow00[j] * u00
            pow01[j + 1] = pow01[j] * u01
        pow10[0] = 1.0
        pow11[0] = 1.0
        for k in range(nb):
            pow10[k + 1] = pow10[k] * u10
            pow11[k + 1] = pow11[k] * u11
        occ_b = bytearray(occ)
        for j in range(na + 1):
            ca = _BINOM[na][j] * pow00[j] * pow01[na - j]
            if ca == 0.0:
                continue
            for k in range(nb + 1):
                cb = _BINOM[nb][k] * pow10[k] * pow11[nb - k]
                if cb == 0.0:
                    continue
                p = j + k
                q = na + nb - p
                coeff = base * ca * cb * (_SQRT_FACT[p] * _SQRT_FACT[q])
                occ_b[ia] = p
                occ_b[ib] = q
                key = bytes(occ_b)
                cur = out.get(key, 0.0)
                out[key] = cur + coeff
    if prune > 0.0:
        return {k2: v for k2, v in out.items() if abs(v) >= prune}
    return out


def scale_mode_transform(dict terms, int idx, double complex u, double prune=1e-15):
    cdef dict out = {}
    cdef bytes occ
    cdef double complex amp, val, cur
    cdef int n, i
    for occ, amp in terms.items():
        n = occ[idx]
        val = amp
        for i in range(n):
            val = val * u
        if abs(val) >= prune:
            cur = out.get(occ, 0.0)
            out[occ] = cur + val
    return out
